//! Bi-directional boosting over the synopsis pool.
//!
//! Each step samples queries by their weights, samples synopses for each
//! query from that query's row, scores every sampled pair against the true
//! slot distribution, and reweights: accurate synopses gain weight within
//! their query's row, well-served queries lose weight so that later steps
//! concentrate on the poorly served ones.

use std::sync::Arc;

use rand::seq::index::sample_weighted;

use crate::accountant::PrivacyLedger;
use crate::budget::{alpha, eta_from_slot_budget, EtaPair};
use crate::error::{Error, Result};
use crate::pdf::{normalize, CountVector, ProbabilityVector};
use crate::query::{eval_query, Query};
use crate::rng::stream_rng;
use crate::synopsis::{sample_synopses_with, PoolWeights, SynopsisPool};

/// Direction of the exponential updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateRule {
    /// Synopses move with their score, queries against theirs.
    #[default]
    Bidirectional,
    /// Both sides move against their score.
    Literal,
}

/// Which sampled synopsis a query releases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReleaseRule {
    /// The sampled synopsis with the largest weight before the update.
    #[default]
    HighestWeight,
    /// The first sampled synopsis.
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostConfig {
    pub lambda: f64,
    pub mu: f64,
    pub sample_count: usize,
    pub queries_per_slot: usize,
    pub forgetting: f64,
    pub weight_floor: f64,
    pub update_rule: UpdateRule,
    pub release_rule: ReleaseRule,
}

impl BoostConfig {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        let cfg = Self {
            lambda,
            mu,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda {} must be positive", self.lambda));
        }
        if !(self.mu > 0.0 && self.mu <= self.lambda / 2.0) {
            return bad(format!("mu {} must lie in (0, lambda/2]", self.mu));
        }
        if self.sample_count == 0 || self.queries_per_slot == 0 {
            return bad("sample_count and queries_per_slot must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.forgetting) {
            return bad(format!("forgetting {} must lie in [0, 1]", self.forgetting));
        }
        if !(self.weight_floor > 0.0 && self.weight_floor < 1e-3) {
            return bad(format!("weight floor {} must lie in (0, 1e-3)", self.weight_floor));
        }
        Ok(())
    }
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            mu: 0.05,
            sample_count: 16,
            queries_per_slot: 1,
            forgetting: 0.9,
            weight_floor: 1e-12,
            update_rule: UpdateRule::Bidirectional,
            release_rule: ReleaseRule::HighestWeight,
        }
    }
}

/// Synopsis-side score of an answer error: +1 inside `λ`, −1 beyond `λ + μ`,
/// linear in between. The query-side score is its negation.
pub fn score(error: f64, cfg: &BoostConfig) -> f64 {
    if error < cfg.lambda {
        1.0
    } else if error >= cfg.lambda + cfg.mu {
        -1.0
    } else {
        1.0 - 2.0 * (error - cfg.lambda) / cfg.mu
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryPool {
    queries: Vec<Query>,
    weights: Vec<f64>,
}

impl QueryPool {
    pub fn new(queries: Vec<Query>) -> Result<Self> {
        if queries.is_empty() {
            return Err(Error::ConfigInvalid("query pool is empty".into()));
        }
        let w = 1.0 / queries.len() as f64;
        Ok(Self {
            weights: vec![w; queries.len()],
            queries,
        })
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Release {
    pub query_id: usize,
    pub synopsis_id: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub round: u64,
    pub eps_slot: f64,
    pub etas: EtaPair,
    pub releases: Vec<Release>,
    /// Mean synopsis score per sampled query, in release order.
    pub query_scores: Vec<f64>,
}

impl StepOutcome {
    /// Equal-weight mixture of the released synopses.
    pub fn published(&self, pool: &SynopsisPool) -> Result<ProbabilityVector> {
        let parts: Vec<&ProbabilityVector> = self.releases.iter().map(|r| pool.get(r.synopsis_id).pdf()).collect();
        ProbabilityVector::mixture(&parts)
    }
}

pub struct DpiState {
    pool: Arc<SynopsisPool>,
    queries: QueryPool,
    weights: PoolWeights,
    ledger: PrivacyLedger,
    cfg: BoostConfig,
    slot_index: u64,
    query_acc: Vec<f64>,
    synopsis_acc: Vec<Vec<f64>>,
    answers: Vec<Option<Vec<f64>>>,
}

impl DpiState {
    pub fn new(pool: Arc<SynopsisPool>, queries: Vec<Query>, ledger: PrivacyLedger, cfg: BoostConfig) -> Result<Self> {
        cfg.validate()?;
        if (ledger.mu() - cfg.mu).abs() > 0.0 {
            return Err(Error::ConfigInvalid("ledger and boosting disagree on mu".into()));
        }
        let k = pool.domain_size();
        for q in &queries {
            q.validate(k)?;
        }
        let queries = QueryPool::new(queries)?;
        let answers = queries
            .queries()
            .iter()
            .map(|q| {
                q.is_scalar().then(|| {
                    pool.synopses()
                        .iter()
                        .map(|s| eval_query(q, s.pdf()).expect("query validated"))
                        .collect()
                })
            })
            .collect();
        let n = pool.len();
        let nq = queries.len();
        Ok(Self {
            weights: PoolWeights::uniform(nq, n),
            query_acc: vec![0.0; nq],
            synopsis_acc: vec![vec![0.0; n]; nq],
            answers,
            pool,
            queries,
            ledger,
            cfg,
            slot_index: 0,
        })
    }

    pub fn pool(&self) -> &SynopsisPool {
        &self.pool
    }

    pub fn query_pool(&self) -> &QueryPool {
        &self.queries
    }

    pub fn pool_weights(&self) -> &PoolWeights {
        &self.weights
    }

    pub fn ledger(&self) -> &PrivacyLedger {
        &self.ledger
    }

    pub fn ledger_mut(&mut self) -> &mut PrivacyLedger {
        &mut self.ledger
    }

    pub fn config(&self) -> &BoostConfig {
        &self.cfg
    }

    /// Number of completed steps.
    pub fn slot_index(&self) -> u64 {
        self.slot_index
    }

    fn synopsis_error(&self, q: usize, truth: &ProbabilityVector, truth_answer: Option<f64>, a: usize) -> Result<f64> {
        let query = &self.queries.queries[q];
        match (&self.answers[q], truth_answer) {
            (Some(cached), Some(t)) => Ok((t - cached[a]).abs() / query.scale(truth.domain_size())),
            _ => query.error(truth, self.pool.get(a).pdf()),
        }
    }

    /// One boosting round on `slot` spending `eps_slot`.
    pub fn step(&mut self, slot: &CountVector, eps_slot: f64, rng_seed: u64) -> Result<StepOutcome> {
        if slot.domain_size() != self.pool.domain_size() {
            return Err(Error::DomainMismatch {
                left: slot.domain_size(),
                right: self.pool.domain_size(),
            });
        }
        if !(eps_slot >= 0.0 && eps_slot.is_finite()) {
            return Err(Error::ConfigInvalid(format!("slot budget {eps_slot} must be >= 0")));
        }
        let truth = normalize(slot)?;
        let mut rng = stream_rng(rng_seed, 0);

        let nq = self.cfg.queries_per_slot.min(self.queries.len());
        let picked: Vec<usize> = if nq == self.queries.len() {
            (0..nq).collect()
        } else {
            let w = &self.queries.weights;
            sample_weighted(&mut rng, w.len(), |i| w[i], nq)
                .map_err(|e| Error::ConfigInvalid(format!("query weights: {e}")))?
                .into_vec()
        };
        let etas = eta_from_slot_budget(eps_slot / nq as f64, self.cfg.mu);

        let mut releases = Vec::with_capacity(nq);
        let mut query_scores = Vec::with_capacity(nq);
        let mut pair_scores: Vec<(usize, Vec<(usize, f64)>)> = Vec::with_capacity(nq);
        for &q in &picked {
            let draws = sample_synopses_with(&self.pool, &self.weights, q, self.cfg.sample_count, &mut rng)?;
            let mut distinct: Vec<usize> = Vec::with_capacity(draws.len());
            for a in draws {
                if !distinct.contains(&a) {
                    distinct.push(a);
                }
            }
            let truth_answer = match self.queries.queries[q].is_scalar() {
                true => Some(eval_query(&self.queries.queries[q], &truth)?),
                false => None,
            };
            let mut scored = Vec::with_capacity(distinct.len());
            for &a in &distinct {
                let e = self.synopsis_error(q, &truth, truth_answer, a)?;
                scored.push((a, score(e, &self.cfg)));
            }
            let chosen = match self.cfg.release_rule {
                ReleaseRule::Sampled => distinct[0],
                ReleaseRule::HighestWeight => {
                    let row = self.weights.row(q);
                    let mut best = distinct[0];
                    for &a in &distinct[1..] {
                        if row[a] > row[best] {
                            best = a;
                        }
                    }
                    best
                }
            };
            releases.push(Release {
                query_id: q,
                synopsis_id: chosen,
            });
            query_scores.push(scored.iter().map(|(_, s)| s).sum::<f64>() / scored.len() as f64);
            pair_scores.push((q, scored));
        }

        let round = self.slot_index + 1;
        self.ledger.record_parts(round, etas, nq as u32)?;
        self.apply_update(etas, &pair_scores, &picked, &query_scores);
        self.slot_index = round;
        Ok(StepOutcome {
            round,
            eps_slot,
            etas,
            releases,
            query_scores,
        })
    }

    fn apply_update(
        &mut self,
        etas: EtaPair,
        pair_scores: &[(usize, Vec<(usize, f64)>)],
        picked: &[usize],
        query_scores: &[f64],
    ) {
        let gamma = self.cfg.forgetting;
        self.query_acc.iter_mut().for_each(|x| *x *= gamma);
        for row in &mut self.synopsis_acc {
            row.iter_mut().for_each(|x| *x *= gamma);
        }
        for (q, scored) in pair_scores {
            for &(a, s) in scored {
                self.synopsis_acc[*q][a] += s;
            }
        }
        for (&q, &s) in picked.iter().zip(query_scores) {
            self.query_acc[q] += s;
        }

        let (syn_sign, query_sign) = match self.cfg.update_rule {
            UpdateRule::Bidirectional => (1.0, -1.0),
            UpdateRule::Literal => (-1.0, 1.0),
        };
        let alpha_a = alpha(etas.eta_a);
        let alpha_q = alpha(etas.eta_q);
        let floor = self.cfg.weight_floor;
        if alpha_a > 0.0 {
            for q in 0..self.queries.len() {
                let acc = &self.synopsis_acc[q];
                if acc.iter().all(|&x| x == 0.0) {
                    continue;
                }
                let row = self.weights.row_mut(q);
                for (w, &s) in row.iter_mut().zip(acc) {
                    *w *= (syn_sign * alpha_a * s).exp();
                }
                renormalize(row, floor);
            }
        }
        if alpha_q > 0.0 {
            for (w, &s) in self.queries.weights.iter_mut().zip(&self.query_acc) {
                *w *= (query_sign * alpha_q * s).exp();
            }
            renormalize(&mut self.queries.weights, floor);
        }
    }
}

fn renormalize(row: &mut [f64], floor: f64) {
    let z: f64 = row.iter().sum();
    row.iter_mut().for_each(|w| *w = (*w / z).max(floor));
    let z: f64 = row.iter().sum();
    row.iter_mut().for_each(|w| *w /= z);
}

/// [`DpiState::step`] as a free function.
pub fn dpi_step(state: &mut DpiState, slot: &CountVector, eps_slot: f64, rng_seed: u64) -> Result<StepOutcome> {
    state.step(slot, eps_slot, rng_seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::budget::slot_cost;
    use crate::synopsis::generate_pool;
    use proptest::prelude::*;

    fn cfg() -> BoostConfig {
        BoostConfig::new(0.1, 0.05).unwrap()
    }

    #[test]
    fn score_branches() {
        let c = cfg();
        assert_eq!(score(0.0, &c), 1.0);
        assert!(score(c.lambda + c.mu / 2.0, &c).abs() < 1e-12);
        assert_eq!(score(c.lambda + c.mu, &c), -1.0);
        // the ramp meets the hard branch continuously
        assert!((score(c.lambda + c.mu - 1e-12, &c) + 1.0).abs() < 1e-9);
        assert_eq!(score(c.lambda - 1e-12, &c), 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(BoostConfig::new(0.1, 0.06).is_err());
        assert!(BoostConfig::new(0.0, 0.0).is_err());
        let bad = BoostConfig {
            forgetting: 1.5,
            ..cfg()
        };
        assert!(bad.validate().is_err());
    }

    fn two_synopsis_state(rule: UpdateRule) -> DpiState {
        // synopsis 0 = (1, 0) matches the truth, synopsis 1 = (0, 1) is far off
        let pool = Arc::new(SynopsisPool::exhaustive(1, 2).unwrap());
        let c = BoostConfig {
            lambda: 0.5,
            mu: 0.25,
            sample_count: 64,
            update_rule: rule,
            ..BoostConfig::default()
        };
        let ledger = PrivacyLedger::new(1e6, c.mu).unwrap();
        DpiState::new(pool, vec![Query::point(0)], ledger, c).unwrap()
    }

    #[test]
    fn accurate_synopsis_gains_weight() {
        let mut st = two_synopsis_state(UpdateRule::Bidirectional);
        assert_eq!(st.pool().get(0).counts(), &[1, 0]);
        // α = ½ ln 3 means η = 1/4, i.e. μ·ε/8 = ln 3 per side
        let eps = 8.0 * 3f64.ln() / st.config().mu;
        let out = st.step(&CountVector::new(vec![5, 0]), eps, 1).unwrap();
        assert!((out.etas.eta_a - 0.25).abs() < 1e-12);
        let row = st.pool_weights().row(0);
        // (0.5 e^{α}, 0.5 e^{−α}) normalized = (3/4, 1/4)
        assert!(
            (row[0] - 0.75).abs() < 1e-12 && (row[1] - 0.25).abs() < 1e-12,
            "{row:?}"
        );
        assert!((st.ledger().cumulative() - slot_cost(out.etas, st.config().mu)).abs() < 1e-12);
    }

    #[test]
    fn literal_rule_inverts_the_update() {
        let mut st = two_synopsis_state(UpdateRule::Literal);
        st.step(&CountVector::new(vec![5, 0]), 10.0, 1).unwrap();
        let row = st.pool_weights().row(0);
        assert!(row[0] < row[1]);
    }

    #[test]
    fn zero_budget_leaves_weights() {
        let mut st = two_synopsis_state(UpdateRule::Bidirectional);
        let before = st.pool_weights().clone();
        let qw = st.query_pool().weights().to_vec();
        let out = st.step(&CountVector::new(vec![1, 1]), 0.0, 3).unwrap();
        assert_eq!(st.pool_weights(), &before);
        assert_eq!(st.query_pool().weights(), qw.as_slice());
        assert_eq!(out.releases.len(), 1);
        assert_eq!(st.ledger().cumulative(), 0.0);
    }

    #[test]
    fn domain_and_overflow_errors() {
        let mut st = two_synopsis_state(UpdateRule::Bidirectional);
        assert!(matches!(
            st.step(&CountVector::new(vec![1, 1, 1]), 0.1, 0),
            Err(Error::DomainMismatch { .. })
        ));
        let pool = Arc::new(SynopsisPool::exhaustive(1, 2).unwrap());
        let c = BoostConfig::new(0.5, 0.25).unwrap();
        let mut tight = DpiState::new(pool, vec![Query::point(0)], PrivacyLedger::new(0.1, 0.25).unwrap(), c).unwrap();
        let before = tight.pool_weights().clone();
        assert!(matches!(
            tight.step(&CountVector::new(vec![1, 1]), 0.2, 0),
            Err(Error::BudgetOverflow { .. })
        ));
        assert_eq!(tight.pool_weights(), &before);
        assert_eq!(tight.slot_index(), 0);
    }

    fn demo_state(seed: u64) -> DpiState {
        let pool = Arc::new(generate_pool(20, 4, 300, seed).unwrap());
        let c = BoostConfig {
            queries_per_slot: 2,
            ..cfg()
        };
        let queries = vec![
            Query::distribution(),
            Query::mean(),
            Query::point(1),
            Query::range(0, 1),
        ];
        DpiState::new(pool, queries, PrivacyLedger::new(2.0, c.mu).unwrap(), c).unwrap()
    }

    #[test]
    fn deterministic_given_seed() {
        let slot = CountVector::new(vec![10, 3, 5, 2]);
        let mut a = demo_state(4);
        let mut b = demo_state(4);
        for t in 0..20 {
            let oa = a.step(&slot, 0.01, 100 + t).unwrap();
            let ob = b.step(&slot, 0.01, 100 + t).unwrap();
            assert_eq!(oa, ob);
        }
        assert_eq!(a.pool_weights(), b.pool_weights());
        assert_eq!(a.query_pool(), b.query_pool());
    }

    #[test]
    fn split_budget_across_queries() {
        let mut st = demo_state(1);
        let out = st.step(&CountVector::new(vec![1, 2, 3, 4]), 0.4, 9).unwrap();
        assert_eq!(out.releases.len(), 2);
        let per = eta_from_slot_budget(0.2, st.config().mu);
        assert!((out.etas.eta_q - per.eta_q).abs() < 1e-15);
        assert!((st.ledger().cumulative() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn ten_thousand_steps_stay_within_budget() {
        use crate::budget::{BudgetState, DecaySeriesConfig, OptimalSchedule};
        let pool = Arc::new(generate_pool(10, 3, 60, 2).unwrap());
        let c = BoostConfig {
            sample_count: 4,
            ..cfg()
        };
        let mut st = DpiState::new(
            pool,
            vec![Query::distribution(), Query::median()],
            PrivacyLedger::new(2.0, c.mu).unwrap(),
            c,
        )
        .unwrap();
        let sched = OptimalSchedule::new(DecaySeriesConfig::new(2.0, 0.1, c.mu).unwrap());
        let mut budget = BudgetState::from_schedule(&sched, 20_000, 1e3).unwrap();
        let mut rng = stream_rng(5, 5);
        let slot = CountVector::new(vec![4, 3, 3]);
        for t in 0..10_000u64 {
            let eps = budget.sample(&mut rng).unwrap().budget;
            st.step(&slot, eps, t).unwrap();
        }
        assert!(st.ledger().cumulative() <= 2.0);
        assert!((st.ledger().cumulative() - budget.consumed_sum()).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn weights_stay_normalized_and_positive(seed in any::<u64>(), eps in prop::collection::vec(0f64..40.0, 1..15)) {
            let mut st = demo_state(seed);
            st.ledger = PrivacyLedger::new(1e9, st.cfg.mu).unwrap();
            let slot = CountVector::new(vec![9, 0, 1, 30]);
            for (t, e) in eps.iter().enumerate() {
                st.step(&slot, *e, seed ^ t as u64).unwrap();
                let qw = st.query_pool().weights();
                prop_assert!((qw.iter().sum::<f64>() - 1.0).abs() < 1e-9 && qw.iter().all(|w| *w > 0.0));
                for q in 0..st.pool_weights().rows() {
                    let row = st.pool_weights().row(q);
                    prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9 && row.iter().all(|w| *w > 0.0));
                }
            }
        }

        #[test]
        fn higher_score_gets_more_weight(c0 in 0u64..20, c1 in 0u64..20, lambda in 0.05f64..0.9, ramp in 0.05f64..1.0, eps in 0.01f64..50.0) {
            prop_assume!(c0 + c1 > 0);
            let c = BoostConfig { lambda, mu: lambda / 2.0 * ramp, sample_count: 128, ..BoostConfig::default() };
            let pool = Arc::new(SynopsisPool::exhaustive(1, 2).unwrap());
            let mut st = DpiState::new(pool, vec![Query::point(0)], PrivacyLedger::new(1e9, c.mu).unwrap(), c).unwrap();
            let slot = CountVector::new(vec![c0, c1]);
            let truth = normalize(&slot).unwrap();
            // synopsis 0 is (1, 0), synopsis 1 is (0, 1)
            let sa = score(truth[1], &c);
            let sb = score(truth[0], &c);
            st.step(&slot, eps, 7).unwrap();
            let row = st.pool_weights().row(0);
            if sa > sb {
                prop_assert!(row[0] > row[1]);
            } else if sb > sa {
                prop_assert!(row[1] > row[0]);
            }
        }
    }
}
