//! Random budget allocation: per-slot budgets are drawn without replacement
//! from a converging series, so the sum of everything ever spent is bounded
//! by the series total.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::stream_rng;

use super::schedule::OptimalSchedule;

/// Default number of materialized series elements.
pub const DEFAULT_HORIZON: u64 = 1_000_000;

/// Default exponential rate of the proposal distribution.
pub const DEFAULT_LAMBDA_RATE: f64 = 1e8;

/// One allocation: the raw exponential proposal and the budget it selected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetDraw {
    pub proposal: f64,
    pub budget: f64,
}

/// Unconsumed series elements plus the analytic mass beyond the horizon.
#[derive(Debug, Clone)]
pub struct BudgetState {
    // keyed by bit pattern; the order matches numeric order for positive values
    remaining: BTreeSet<(u64, u64)>,
    remaining_sum: f64,
    consumed_sum: f64,
    tail_mass: f64,
    lambda_rate: f64,
}

fn check_rate(lambda_rate: f64) -> Result<()> {
    if lambda_rate > 0.0 && lambda_rate.is_finite() {
        Ok(())
    } else {
        Err(Error::ConfigInvalid(format!("rate {lambda_rate} must be positive")))
    }
}

impl BudgetState {
    /// Builds the state from explicit series elements. Zero elements are dropped.
    pub fn from_series<I>(values: I, tail_mass: f64, lambda_rate: f64) -> Result<Self>
    where
        I: IntoIterator<Item = f64>,
    {
        check_rate(lambda_rate)?;
        let mut remaining = BTreeSet::new();
        let mut remaining_sum = 0.0;
        for (i, v) in values.into_iter().enumerate() {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::ConfigInvalid(format!("series element {v} is not a budget")));
            }
            if v > 0.0 {
                remaining.insert((v.to_bits(), i as u64));
                remaining_sum += v;
            }
        }
        Ok(Self {
            remaining,
            remaining_sum,
            consumed_sum: 0.0,
            tail_mass: tail_mass.max(0.0),
            lambda_rate,
        })
    }

    /// Materializes the first `horizon` slot costs of `schedule`.
    pub fn from_schedule(schedule: &OptimalSchedule, horizon: u64, lambda_rate: f64) -> Result<Self> {
        let costs: Vec<f64> = schedule.costs(horizon).collect();
        let head: f64 = costs.iter().rev().sum();
        let tail = schedule.total() - head;
        Self::from_series(costs, tail, lambda_rate)
    }

    pub fn lambda_rate(&self) -> f64 {
        self.lambda_rate
    }

    pub fn consumed_sum(&self) -> f64 {
        self.consumed_sum
    }

    /// Σ of unconsumed materialized elements.
    pub fn remaining_sum(&self) -> f64 {
        self.remaining_sum
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Unconsumed budget including the analytic tail.
    pub fn remaining_mass(&self) -> f64 {
        self.remaining_sum + self.tail_mass
    }

    pub fn remaining_len(&self) -> usize {
        self.remaining.len()
    }

    pub fn is_exhausted(&self) -> bool {
        self.remaining.is_empty()
    }

    pub fn remaining_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.remaining.iter().map(|&(bits, _)| f64::from_bits(bits))
    }

    /// Removes and returns the element closest to `target` (lower one on ties).
    pub fn take_nearest(&mut self, target: f64) -> Result<f64> {
        let key = (target.max(0.0).to_bits(), 0);
        let above = self.remaining.range(key..).next().copied();
        let below = self.remaining.range(..key).next_back().copied();
        let pick = match (below, above) {
            (None, None) => return Err(Error::BudgetExhausted),
            (Some(b), None) => b,
            (None, Some(a)) => a,
            (Some(b), Some(a)) => {
                let db = target - f64::from_bits(b.0);
                let da = f64::from_bits(a.0) - target;
                if da < db {
                    a
                } else {
                    b
                }
            }
        };
        self.remaining.remove(&pick);
        let v = f64::from_bits(pick.0);
        self.remaining_sum -= v;
        self.consumed_sum += v;
        Ok(v)
    }

    /// Draws `S ~ Exp(Λ)` and consumes the closest remaining element.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<BudgetDraw> {
        if self.remaining.is_empty() {
            return Err(Error::BudgetExhausted);
        }
        let u = 1.0 - rng.random::<f64>();
        let proposal = -u.ln() / self.lambda_rate;
        let budget = self.take_nearest(proposal)?;
        Ok(BudgetDraw { proposal, budget })
    }
}

/// [`BudgetState::sample`] with a generator seeded from `rng_seed`.
pub fn rba_sample(state: &mut BudgetState, rng_seed: u64) -> Result<f64> {
    state.sample(&mut stream_rng(rng_seed, 0)).map(|d| d.budget)
}

/// Series elements split by value into small, medium and large queues.
#[derive(Debug, Clone)]
pub struct RangeQueues {
    queues: [VecDeque<f64>; 3],
    consumed_sum: f64,
}

impl RangeQueues {
    pub const SMALL_SHARE: f64 = 0.5;
    pub const MEDIUM_SHARE: f64 = 0.3;

    /// Bottom half of the values by size go to `small`, the next 30% to
    /// `medium`, the rest to `large`. Each queue keeps series order.
    pub fn from_series(values: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let n = values.len();
        let small_end = (n as f64 * Self::SMALL_SHARE).round() as usize;
        let medium_end = (n as f64 * (Self::SMALL_SHARE + Self::MEDIUM_SHARE)).round() as usize;
        let mut bucket = vec![0u8; n];
        for (rank, &i) in order.iter().enumerate() {
            bucket[i] = if rank < small_end {
                0
            } else if rank < medium_end {
                1
            } else {
                2
            };
        }
        let mut queues: [VecDeque<f64>; 3] = Default::default();
        for (i, &v) in values.iter().enumerate() {
            queues[bucket[i] as usize].push_back(v);
        }
        Self {
            queues,
            consumed_sum: 0.0,
        }
    }

    pub fn from_queues(small: Vec<f64>, medium: Vec<f64>, large: Vec<f64>) -> Self {
        Self {
            queues: [small.into(), medium.into(), large.into()],
            consumed_sum: 0.0,
        }
    }

    pub fn small(&self) -> &VecDeque<f64> {
        &self.queues[0]
    }

    pub fn medium(&self) -> &VecDeque<f64> {
        &self.queues[1]
    }

    pub fn large(&self) -> &VecDeque<f64> {
        &self.queues[2]
    }

    pub fn consumed_sum(&self) -> f64 {
        self.consumed_sum
    }

    pub fn len(&self) -> usize {
        self.queues.iter().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Dequeues from a uniformly chosen non-empty queue; returns the queue
    /// index (0 small, 1 medium, 2 large) with the value.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(usize, f64)> {
        let live: Vec<usize> = (0..3).filter(|&i| !self.queues[i].is_empty()).collect();
        if live.is_empty() {
            return Err(Error::BudgetExhausted);
        }
        let q = live[rng.random_range(0..live.len())];
        let v = self.queues[q].pop_front().expect("queue checked non-empty");
        self.consumed_sum += v;
        Ok((q, v))
    }
}

pub fn rba_range_sample(queues: &mut RangeQueues, rng_seed: u64) -> Result<f64> {
    queues.sample(&mut stream_rng(rng_seed, 0)).map(|(_, v)| v)
}
