//! End-to-end stream processing: one private release per slot, plus the
//! evaluation records needed to plot utility and budget over time.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use crate::accountant::{LedgerEntry, PrivacyLedger};
use crate::apps::{hbos_detect, precision_recall, AnomalyReport};
use crate::boosting::DpiState;
use crate::budget::{BudgetState, OptimalSchedule, RangeQueues};
use crate::config::{Allocation, RunConfig};
use crate::error::{Error, Result};
use crate::pdf::{kl_divergence, mse, normalize, CountVector, ProbabilityVector};
use crate::query::{eval_query, Query};
use crate::rng::{derive_seed, stream_rng};
use crate::stream::StreamSlot;
use crate::synopsis::{default_pool_size, generate_pool};

const POOL_TAG: u64 = 1;
const ALLOCATION_TAG: u64 = 2;
const STEP_TAG: u64 = 3;

enum Allocator {
    Nearest(BudgetState),
    Range(RangeQueues),
}

impl Allocator {
    fn build(cfg: &RunConfig, schedule: &OptimalSchedule) -> Result<Self> {
        Ok(match cfg.allocation {
            Allocation::Nearest => {
                Allocator::Nearest(BudgetState::from_schedule(schedule, cfg.horizon, cfg.lambda_rate)?)
            }
            Allocation::Range => {
                let values: Vec<f64> = schedule.costs(cfg.horizon).filter(|v| *v > 0.0).collect();
                Allocator::Range(RangeQueues::from_series(&values))
            }
        })
    }

    fn draw(&mut self, rng: &mut ChaCha8Rng) -> Result<f64> {
        match self {
            Allocator::Nearest(s) => s.sample(rng).map(|d| d.budget),
            Allocator::Range(q) => q.sample(rng).map(|(_, v)| v),
        }
    }

    fn remaining_mass(&self) -> f64 {
        match self {
            Allocator::Nearest(s) => s.remaining_mass(),
            Allocator::Range(q) => q.small().iter().chain(q.medium()).chain(q.large()).sum(),
        }
    }
}

/// Everything observed for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: usize,
    /// The slot had no data; the previous release was repeated.
    pub empty: bool,
    pub eps: f64,
    /// `(query id, released vector)` pairs.
    pub releases: Vec<(usize, ProbabilityVector)>,
    /// Equal-weight mixture of the releases.
    pub published: ProbabilityVector,
    pub kl_inst: Option<f64>,
    pub mse_inst: Option<f64>,
    pub kl_acc: Option<f64>,
    pub mse_acc: Option<f64>,
    pub anomalies: AnomalyReport,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    /// `(released, true)` answer per configured scalar query.
    pub answers: Vec<(usize, f64, Option<f64>)>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: RunConfig,
    pub domain_size: usize,
    pub pool_size: usize,
    pub slots: Vec<SlotRecord>,
    /// All ledger entries, including those from before any restart.
    pub ledger: Vec<LedgerEntry>,
    /// Budget spent across all restarts.
    pub consumed: f64,
    /// Unspent series mass of the current allocator.
    pub remaining_mass: f64,
    pub ledger_cumulative: f64,
    pub restarts: u32,
}

impl RunReport {
    fn empty(config: RunConfig) -> Self {
        let remaining_mass = config
            .series_config()
            .map(|c| OptimalSchedule::new(c).total())
            .unwrap_or(0.0);
        Self {
            config,
            domain_size: 0,
            pool_size: 0,
            slots: Vec::new(),
            ledger: Vec::new(),
            consumed: 0.0,
            remaining_mass,
            ledger_cumulative: 0.0,
            restarts: 0,
        }
    }

    pub fn kl_inst(&self) -> Vec<f64> {
        self.slots.iter().filter_map(|s| s.kl_inst).collect()
    }

    pub fn mse_inst(&self) -> Vec<f64> {
        self.slots.iter().filter_map(|s| s.mse_inst).collect()
    }
}

struct Accumulative {
    truth: CountVector,
    release_sum: Vec<f64>,
    releases: usize,
}

impl Accumulative {
    fn new(k: usize) -> Self {
        Self {
            truth: CountVector::zeros(k),
            release_sum: vec![0.0; k],
            releases: 0,
        }
    }

    fn push(
        &mut self,
        counts: &CountVector,
        published: &ProbabilityVector,
    ) -> Result<Option<(ProbabilityVector, ProbabilityVector)>> {
        self.truth.add(counts)?;
        for (a, p) in self.release_sum.iter_mut().zip(published.probs()) {
            *a += p;
        }
        self.releases += 1;
        if self.truth.total() == 0 {
            return Ok(None);
        }
        let n = self.releases as f64;
        let release = ProbabilityVector::new(self.release_sum.iter().map(|x| x / n).collect())?;
        Ok(Some((normalize(&self.truth)?, release)))
    }
}

/// Runs the full pipeline over `stream`.
pub fn run_pipeline(cfg: &RunConfig, stream: &[StreamSlot]) -> Result<RunReport> {
    cfg.validate()?;
    let Some(first) = stream.first() else {
        return Ok(RunReport::empty(cfg.clone()));
    };
    let k = first.counts.domain_size();
    for q in &cfg.queries {
        q.validate(k)?;
    }
    let pool_size = cfg.pool_size.unwrap_or_else(|| default_pool_size(k));
    let pool = Arc::new(generate_pool(
        cfg.pool_trials,
        k,
        pool_size,
        derive_seed(cfg.seed, POOL_TAG),
    )?);
    log::info!("pool ready: {pool_size} synopses, k = {k}, n = {}", cfg.pool_trials);
    let schedule = OptimalSchedule::new(cfg.series_config()?);
    let mut allocator = Allocator::build(cfg, &schedule)?;
    let mut alloc_rng = stream_rng(derive_seed(cfg.seed, ALLOCATION_TAG), 0);
    let step_seed = derive_seed(cfg.seed, STEP_TAG);
    let ledger = PrivacyLedger::new(cfg.epsilon, cfg.mu)?;
    let mut state = DpiState::new(Arc::clone(&pool), cfg.queries.clone(), ledger, cfg.boost_config())?;

    let mut report = RunReport::empty(cfg.clone());
    report.domain_size = k;
    report.pool_size = pool_size;
    let mut consumed_before_restart = 0.0;
    let mut prev: Vec<(usize, ProbabilityVector)> = vec![(0, ProbabilityVector::uniform(k)?)];
    let mut acc = Accumulative::new(k);

    for slot in stream {
        let at = |e: Error| e.at_slot(slot.t);
        if slot.counts.domain_size() != k {
            return Err(at(Error::DomainMismatch {
                left: slot.counts.domain_size(),
                right: k,
            }));
        }
        let empty = slot.counts.total() == 0;
        let mut eps = 0.0;
        let releases = if empty {
            prev.clone()
        } else {
            eps = match allocator.draw(&mut alloc_rng) {
                Ok(e) => e,
                Err(Error::BudgetExhausted) if cfg.restart_on_exhaustion => {
                    log::warn!("budget series exhausted at slot {}; restarting", slot.t);
                    consumed_before_restart += state.ledger().cumulative();
                    report.ledger.extend_from_slice(state.ledger().entries());
                    state.ledger_mut().reset();
                    allocator = Allocator::build(cfg, &schedule)?;
                    allocator.draw(&mut alloc_rng).map_err(at)?
                }
                Err(e) => return Err(at(e)),
            };
            let rounds = if state.slot_index() == 0 { cfg.warmup_rounds } else { 1 };
            let mut out = None;
            for _ in 0..rounds {
                let seed = derive_seed(step_seed, state.slot_index() + 1);
                out = Some(state.step(&slot.counts, eps / rounds as f64, seed).map_err(at)?);
            }
            out.expect("at least one round")
                .releases
                .iter()
                .map(|r| (r.query_id, pool.get(r.synopsis_id).pdf().clone()))
                .collect()
        };
        let parts: Vec<&ProbabilityVector> = releases.iter().map(|(_, p)| p).collect();
        let published = ProbabilityVector::mixture(&parts).map_err(at)?;
        report
            .slots
            .push(evaluate_slot(cfg, slot, empty, eps, releases.clone(), published, &mut acc).map_err(at)?);
        prev = releases;
    }

    report.ledger.extend_from_slice(state.ledger().entries());
    report.ledger_cumulative = state.ledger().cumulative();
    report.consumed = consumed_before_restart + state.ledger().cumulative();
    report.remaining_mass = allocator.remaining_mass();
    report.restarts = state.ledger().restarts();
    log::info!(
        "{} slots done, consumed {:.3e} of {}",
        stream.len(),
        report.consumed,
        cfg.epsilon
    );
    Ok(report)
}

fn evaluate_slot(
    cfg: &RunConfig,
    slot: &StreamSlot,
    empty: bool,
    eps: f64,
    releases: Vec<(usize, ProbabilityVector)>,
    published: ProbabilityVector,
    acc: &mut Accumulative,
) -> Result<SlotRecord> {
    let truth = if empty { None } else { Some(normalize(&slot.counts)?) };
    let (kl_inst, mse_inst) = match &truth {
        Some(t) => (
            Some(kl_divergence(t, &published, cfg.kl_smoothing)?),
            Some(mse(t, &published)?),
        ),
        None => (None, None),
    };
    let (kl_acc, mse_acc) = match acc.push(&slot.counts, &published)? {
        Some((t, r)) => (Some(kl_divergence(&t, &r, cfg.kl_smoothing)?), Some(mse(&t, &r)?)),
        None => (None, None),
    };
    let anomalies = hbos_detect(&published, cfg.anomaly_quantile)?;
    let (precision, recall) = match &truth {
        Some(t) => {
            let reference = hbos_detect(t, cfg.anomaly_quantile)?;
            let (p, r) = precision_recall(&anomalies.flagged, &reference.flagged);
            (Some(p), Some(r))
        }
        None => (None, None),
    };
    let answers = cfg
        .queries
        .iter()
        .enumerate()
        .filter(|(_, q)| q.is_scalar())
        .map(|(i, q): (usize, &Query)| {
            let released = eval_query(q, &published)?;
            let true_answer = truth.as_ref().map(|t| eval_query(q, t)).transpose()?;
            Ok((i, released, true_answer))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SlotRecord {
        slot: slot.t,
        empty,
        eps,
        releases,
        published,
        kl_inst,
        mse_inst,
        kl_acc,
        mse_acc,
        anomalies,
        precision,
        recall,
        answers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{gen_synthetic, DEFAULT_VARIANCES};

    fn small_cfg() -> RunConfig {
        RunConfig {
            pool_trials: 200,
            pool_size: Some(300),
            horizon: 5_000,
            seed: 4,
            ..RunConfig::default()
        }
    }

    #[test]
    fn empty_stream() {
        let r = run_pipeline(&small_cfg(), &[]).unwrap();
        assert!(r.slots.is_empty());
        assert_eq!(r.consumed, 0.0);
    }

    #[test]
    fn empty_slot_repeats_previous_release() {
        let stream = vec![
            StreamSlot {
                t: 0,
                counts: CountVector::zeros(3),
            },
            StreamSlot {
                t: 1,
                counts: CountVector::new(vec![3, 1, 1]),
            },
            StreamSlot {
                t: 2,
                counts: CountVector::zeros(3),
            },
        ];
        let r = run_pipeline(&small_cfg(), &stream).unwrap();
        assert_eq!(r.slots[0].published, ProbabilityVector::uniform(3).unwrap());
        assert!(r.slots[0].empty && r.slots[0].kl_inst.is_none() && r.slots[0].eps == 0.0);
        assert_eq!(r.slots[2].published, r.slots[1].published);
        assert_eq!(r.ledger.len(), 1);
    }

    #[test]
    fn causal_prefix() {
        let stream = gen_synthetic(30, 8, 20.0, &DEFAULT_VARIANCES, 1).unwrap();
        let full = run_pipeline(&small_cfg(), &stream).unwrap();
        let head = run_pipeline(&small_cfg(), &stream[..12]).unwrap();
        assert_eq!(&full.slots[..12], head.slots.as_slice());
    }

    #[test]
    fn exhaustion_and_restart() {
        let stream = gen_synthetic(10, 4, 20.0, &[4.0], 2).unwrap();
        let cfg = RunConfig {
            horizon: 3,
            ..small_cfg()
        };
        let err = run_pipeline(&cfg, &stream).unwrap_err();
        assert!(err.is_budget_exhaustion());
        assert!(matches!(err, Error::AtSlot { slot: 3, .. }));

        let again = RunConfig {
            restart_on_exhaustion: true,
            ..cfg
        };
        let r = run_pipeline(&again, &stream).unwrap();
        assert_eq!(r.restarts, 3);
        assert_eq!(r.ledger.len(), 10);
    }

    #[test]
    fn warmup_rounds_share_the_first_budget() {
        let stream = gen_synthetic(3, 4, 20.0, &[4.0], 2).unwrap();
        let cfg = RunConfig {
            warmup_rounds: 4,
            ..small_cfg()
        };
        let r = run_pipeline(&cfg, &stream).unwrap();
        assert_eq!(r.ledger.len(), 6);
        let first: f64 = r.ledger[..4].iter().map(|e| e.cost).sum();
        assert!((first - r.slots[0].eps).abs() < 1e-12);

        let mut late = vec![StreamSlot {
            t: 0,
            counts: CountVector::zeros(4),
        }];
        late.extend(stream.into_iter().map(|s| StreamSlot { t: s.t + 1, ..s }));
        let r = run_pipeline(&cfg, &late).unwrap();
        assert_eq!(r.ledger.len(), 6);
    }

    #[test]
    fn range_allocation_runs() {
        let stream = gen_synthetic(20, 5, 20.0, &[4.0], 2).unwrap();
        let cfg = RunConfig {
            allocation: Allocation::Range,
            ..small_cfg()
        };
        let r = run_pipeline(&cfg, &stream).unwrap();
        assert!(r.consumed <= cfg.epsilon && r.remaining_mass > 0.0);
    }

    #[test]
    fn domain_change_is_reported_with_slot() {
        let stream = vec![
            StreamSlot {
                t: 0,
                counts: CountVector::new(vec![1, 2]),
            },
            StreamSlot {
                t: 1,
                counts: CountVector::new(vec![1, 2, 3]),
            },
        ];
        let err = run_pipeline(&small_cfg(), &stream).unwrap_err();
        assert!(matches!(err, Error::AtSlot { slot: 1, .. }));
    }
}
