//! The append-only privacy ledger and closed-form privacy/utility bounds.

use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::budget::{li2, slot_cost, EtaPair};
use crate::error::{Error, Result};
use crate::pdf::SensitivityBound;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerEntry {
    pub slot: u64,
    pub etas: EtaPair,
    /// Number of mechanism pairs charged at `etas` in this slot.
    pub parts: u32,
    pub cost: f64,
    pub cumulative: f64,
}

/// Read handle on a ledger's cumulative cost, usable from other threads.
#[derive(Debug, Clone)]
pub struct CumulativeReader(Arc<AtomicU64>);

impl CumulativeReader {
    pub fn get(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Acquire))
    }
}

/// Compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug)]
pub struct PrivacyLedger {
    entries: Vec<LedgerEntry>,
    epsilon_total: f64,
    mu: f64,
    running: Neumaier,
    shared: Arc<AtomicU64>,
    restarts: u32,
}

impl PrivacyLedger {
    pub fn new(epsilon_total: f64, mu: f64) -> Result<Self> {
        if !(epsilon_total >= 0.0 && epsilon_total.is_finite()) {
            return Err(Error::ConfigInvalid(format!("epsilon {epsilon_total} must be >= 0")));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::ConfigInvalid(format!("mu {mu} must be positive")));
        }
        Ok(Self {
            entries: Vec::new(),
            epsilon_total,
            mu,
            running: Neumaier::default(),
            shared: Arc::new(AtomicU64::new(0f64.to_bits())),
            restarts: 0,
        })
    }

    pub fn record(&mut self, t: u64, etas: EtaPair) -> Result<&LedgerEntry> {
        self.record_parts(t, etas, 1)
    }

    /// Charges `parts` mechanism pairs at the same rates in one slot.
    pub fn record_parts(&mut self, t: u64, etas: EtaPair, parts: u32) -> Result<&LedgerEntry> {
        if let Some(last) = self.entries.last() {
            if t <= last.slot {
                return Err(Error::ConfigInvalid(format!(
                    "slot {t} does not follow recorded slot {}",
                    last.slot
                )));
            }
        }
        EtaPair::new(etas.eta_q, etas.eta_a)?;
        let cost = parts as f64 * slot_cost(etas, self.mu);
        let mut next = self.running;
        next.add(cost);
        let cumulative = next.value();
        if cumulative > self.epsilon_total {
            return Err(Error::BudgetOverflow {
                slot: t,
                cumulative: self.cumulative(),
                cost,
                total: self.epsilon_total,
            });
        }
        self.running = next;
        self.shared.store(cumulative.to_bits(), Ordering::Release);
        self.entries.push(LedgerEntry {
            slot: t,
            etas,
            parts,
            cost,
            cumulative,
        });
        Ok(self.entries.last().expect("just pushed"))
    }

    pub fn cumulative(&self) -> f64 {
        self.running.value()
    }

    pub fn remaining(&self) -> f64 {
        (self.epsilon_total - self.cumulative()).max(0.0)
    }

    pub fn epsilon_total(&self) -> f64 {
        self.epsilon_total
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn last_slot(&self) -> Option<u64> {
        self.entries.last().map(|e| e.slot)
    }

    pub fn restarts(&self) -> u32 {
        self.restarts
    }

    pub fn reader(&self) -> CumulativeReader {
        CumulativeReader(Arc::clone(&self.shared))
    }

    /// Clears all entries and the running total.
    pub fn reset(&mut self) {
        self.restarts += 1;
        log::warn!(
            "privacy ledger restart #{} after {} entries, cumulative {}",
            self.restarts,
            self.entries.len(),
            self.cumulative()
        );
        self.entries.clear();
        self.running = Neumaier::default();
        self.shared.store(0f64.to_bits(), Ordering::Release);
    }

    /// CSV with header `slot,eta_q,eta_a,cost,cumulative`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "slot,eta_q,eta_a,cost,cumulative")?;
        for e in &self.entries {
            writeln!(
                w,
                "{},{},{},{},{}",
                e.slot, e.etas.eta_q, e.etas.eta_a, e.cost, e.cumulative
            )?;
        }
        Ok(())
    }
}

/// Log of the bound on the probability that the final release misses the
/// truth by more than `λ + μ`. Exponentiate to get the probability bound.
pub fn utility_loss_bound(history: &[EtaPair]) -> f64 {
    0.25 * history
        .iter()
        .map(|p| (-4.0 * p.eta_q * p.eta_q).ln_1p() + (-4.0 * p.eta_a * p.eta_a).ln_1p())
        .sum::<f64>()
}

/// Extremes of a learning-rate sequence and the series constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesBounds {
    m: f64,
    big_m: f64,
    zeta: f64,
    mu: f64,
}

impl SeriesBounds {
    pub fn new(m: f64, big_m: f64, zeta: f64, mu: f64) -> Result<Self> {
        if !(0.0 <= m && m <= big_m && big_m <= 1.0) {
            return Err(Error::ConfigInvalid(format!(
                "need 0 <= m <= M <= 1, got m={m}, M={big_m}"
            )));
        }
        if !(zeta > 0.0 && mu > 0.0) {
            return Err(Error::ConfigInvalid("zeta and mu must be positive".into()));
        }
        Ok(Self { m, big_m, zeta, mu })
    }

    pub fn delta_q(&self) -> f64 {
        SensitivityBound::DELTA_Q
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoreticalBounds {
    pub loss_lower_bound: f64,
    pub privacy_lower_bound: f64,
    /// Whether the given budget reaches the privacy lower bound.
    pub budget_sufficient: bool,
}

pub fn theoretical_bounds(b: &SeriesBounds, eps: f64) -> TheoreticalBounds {
    let l = |z: f64| li2(z).expect("arguments lie in [0, 1]");
    let (m, big_m) = (b.m, b.big_m);
    let loss = (l(big_m * big_m) - l(m * m) + 4.0 * l(m) - 4.0 * l(big_m)) / (4.0 * b.zeta);
    let privacy = 2.0 * b.delta_q() / (b.mu * b.zeta) * (l(big_m * big_m) - l(m * m));
    TheoreticalBounds {
        loss_lower_bound: loss,
        privacy_lower_bound: privacy,
        budget_sufficient: eps >= privacy,
    }
}
