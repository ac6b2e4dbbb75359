//! Learning-rate schedules and the per-slot privacy cost of a learning rate.

use crate::error::{Error, Result};
use crate::pdf::SensitivityBound;

use super::li2::{li2_inv, li2_unchecked, LI2_ONE};

/// Parameters of the decaying learning-rate series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecaySeriesConfig {
    epsilon_total: f64,
    zeta: f64,
    mu: f64,
}

impl DecaySeriesConfig {
    /// `epsilon_total = 0` is accepted and yields an all-zero schedule.
    pub fn new(epsilon_total: f64, zeta: f64, mu: f64) -> Result<Self> {
        if !(epsilon_total >= 0.0 && epsilon_total.is_finite()) {
            return Err(Error::ConfigInvalid(format!(
                "epsilon {epsilon_total} must be finite and >= 0"
            )));
        }
        if !(zeta > 0.0 && zeta < 1.0) {
            return Err(Error::ConfigInvalid(format!("zeta {zeta} must lie in (0, 1)")));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::ConfigInvalid(format!("mu {mu} must be positive")));
        }
        Ok(Self {
            epsilon_total,
            zeta,
            mu,
        })
    }

    pub fn epsilon_total(&self) -> f64 {
        self.epsilon_total
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn delta_q(&self) -> f64 {
        SensitivityBound::DELTA_Q
    }

    /// `Δ_Q / (μ ζ)`.
    pub fn c_constant(&self) -> f64 {
        self.delta_q() / (self.mu * self.zeta)
    }

    /// `Li2⁻¹(π²/6 − ε/C)`, with the argument clamped at zero.
    pub fn m_squared(&self) -> f64 {
        let arg = (LI2_ONE - self.epsilon_total / self.c_constant()).clamp(0.0, LI2_ONE);
        li2_inv(arg).expect("argument clamped into the domain")
    }

    fn with_epsilon(&self, epsilon_total: f64) -> Self {
        Self { epsilon_total, ..*self }
    }
}

fn exponent(t: u64, m_squared: f64, zeta: f64) -> f64 {
    let t = t as f64;
    let one_minus_pow = if m_squared == 0.0 {
        1.0
    } else {
        -(t * m_squared.ln()).exp_m1()
    };
    one_minus_pow / (t * t * zeta)
}

fn eta_of_exponent(x: f64) -> f64 {
    // (e^x − 1) / (2 (e^x + 1))
    0.5 * (0.5 * x).tanh()
}

/// Learning rate at slot `t ≥ 1` from the closed-form optimal series.
pub fn optimal_eta(t: u64, cfg: &DecaySeriesConfig) -> Result<f64> {
    if t == 0 {
        return Err(Error::ConfigInvalid("slots are numbered from 1".into()));
    }
    Ok(eta_of_exponent(exponent(t, cfg.m_squared(), cfg.zeta)))
}

/// Learning rates of the query side and the synopsis side for one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaPair {
    pub eta_q: f64,
    pub eta_a: f64,
}

impl EtaPair {
    pub fn new(eta_q: f64, eta_a: f64) -> Result<Self> {
        for eta in [eta_q, eta_a] {
            if !(0.0..0.5).contains(&eta) {
                return Err(Error::ConfigInvalid(format!("eta {eta} must lie in [0, 0.5)")));
            }
        }
        Ok(Self { eta_q, eta_a })
    }

    pub fn symmetric(eta: f64) -> Result<Self> {
        Self::new(eta, eta)
    }

    pub const ZERO: EtaPair = EtaPair { eta_q: 0.0, eta_a: 0.0 };
}

/// `ln((1 + 2η) / (1 − 2η))`.
fn log_odds(eta: f64) -> f64 {
    (2.0 * eta).ln_1p() - (-2.0 * eta).ln_1p()
}

/// Exponential-update coefficient `½ ln((1 + 2η) / (1 − 2η))`.
pub fn alpha(eta: f64) -> f64 {
    0.5 * log_odds(eta)
}

/// Privacy cost of running one slot at `etas`.
pub fn slot_cost(etas: EtaPair, mu: f64) -> f64 {
    4.0 / mu * (log_odds(etas.eta_a) + log_odds(etas.eta_q))
}

/// Symmetric pair whose [`slot_cost`] equals `eps_slot`.
pub fn eta_from_slot_budget(eps_slot: f64, mu: f64) -> EtaPair {
    let eps_slot = eps_slot.max(0.0);
    let eta = eta_of_exponent(mu * eps_slot / 8.0);
    EtaPair { eta_q: eta, eta_a: eta }
}

/// The optimal series calibrated so that both mechanisms together spend at
/// most `epsilon_total` over the infinite horizon.
///
/// Each side is given the learning rate of the closed-form series at a
/// quarter of the budget: half for each side, and the two-sided slot cost
/// charges each side twice what the series constant assumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalSchedule {
    cfg: DecaySeriesConfig,
    m_squared: f64,
}

impl OptimalSchedule {
    pub const SHARE: f64 = 0.25;

    pub fn new(cfg: DecaySeriesConfig) -> Self {
        let per_side = cfg.with_epsilon(cfg.epsilon_total * Self::SHARE);
        Self {
            cfg,
            m_squared: per_side.m_squared(),
        }
    }

    pub fn config(&self) -> &DecaySeriesConfig {
        &self.cfg
    }

    pub fn m_squared(&self) -> f64 {
        self.m_squared
    }

    pub fn eta(&self, t: u64) -> f64 {
        assert!(t >= 1, "slots are numbered from 1");
        eta_of_exponent(exponent(t, self.m_squared, self.cfg.zeta))
    }

    pub fn pair(&self, t: u64) -> EtaPair {
        let eta = self.eta(t);
        EtaPair { eta_q: eta, eta_a: eta }
    }

    pub fn slot_cost(&self, t: u64) -> f64 {
        slot_cost(self.pair(t), self.cfg.mu)
    }

    /// Limit of the cumulative cost as the horizon grows without bound.
    pub fn total(&self) -> f64 {
        let mass = if self.m_squared == 0.0 {
            LI2_ONE
        } else {
            LI2_ONE - li2_unchecked(self.m_squared)
        };
        8.0 / (self.cfg.mu * self.cfg.zeta) * mass
    }

    /// Costs for slots `1..=horizon`.
    pub fn costs(&self, horizon: u64) -> impl Iterator<Item = f64> + '_ {
        (1..=horizon).map(move |t| self.slot_cost(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_config() {
        assert!(DecaySeriesConfig::new(-1.0, 0.1, 0.1).is_err());
        assert!(DecaySeriesConfig::new(1.0, 0.0, 0.1).is_err());
        assert!(DecaySeriesConfig::new(1.0, 1.0, 0.1).is_err());
        assert!(DecaySeriesConfig::new(1.0, 0.1, 0.0).is_err());
        assert!(optimal_eta(0, &DecaySeriesConfig::new(1.0, 0.1, 0.1).unwrap()).is_err());
    }

    #[test]
    fn zero_budget_gives_zero_rate() {
        let cfg = DecaySeriesConfig::new(0.0, 0.1, 0.1).unwrap();
        assert_eq!(cfg.m_squared(), 1.0);
        for t in [1, 2, 100] {
            assert_eq!(optimal_eta(t, &cfg).unwrap(), 0.0);
        }
    }

    #[test]
    fn rate_decays() {
        let cfg = DecaySeriesConfig::new(2.0, 0.1, 0.1).unwrap();
        let e1 = optimal_eta(1, &cfg).unwrap();
        let e10 = optimal_eta(10, &cfg).unwrap();
        let e10k = optimal_eta(10_000, &cfg).unwrap();
        assert!(e10k < e10 && e10 < e1);
    }

    #[test]
    fn golden_first_rate() {
        // 50-digit reference: m² = Li2⁻¹(π²/6 − 0.01), X = 10 (1 − m²), η = ½ tanh(X/2)
        let cfg = DecaySeriesConfig::new(2.0, 0.1, 0.1).unwrap();
        assert!((cfg.c_constant() - 200.0).abs() < 1e-12);
        let eta = optimal_eta(1, &cfg).unwrap();
        assert!((eta - GOLDEN_ETA_1).abs() < 1e-12, "{eta}");
    }

    const GOLDEN_ETA_1: f64 = 0.003_270_607_985_678_927;

    #[test]
    fn golden_first_rate_oracle() {
        // Independent chain: partial-sum dilogarithm, plain bisection.
        fn li2_sum(z: f64) -> f64 {
            let mut s = 0.0;
            let mut p = 1.0;
            for t in 1..=10_000_000u64 {
                p *= z;
                let term = p / (t as f64 * t as f64);
                s += term;
                if term < 1e-20 {
                    break;
                }
            }
            s
        }
        let target = std::f64::consts::PI.powi(2) / 6.0 - 2.0 / 200.0;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if li2_sum(mid) < target {
                lo = mid
            } else {
                hi = mid
            }
        }
        let m2 = 0.5 * (lo + hi);
        let x = (1.0 - m2) / 0.1;
        let eta = (x.exp() - 1.0) / (2.0 * (x.exp() + 1.0));
        let cfg = DecaySeriesConfig::new(2.0, 0.1, 0.1).unwrap();
        assert!((optimal_eta(1, &cfg).unwrap() - eta).abs() < 1e-12);
    }

    #[test]
    fn slot_cost_examples() {
        assert_eq!(slot_cost(EtaPair::ZERO, 1.0), 0.0);
        let both = EtaPair::symmetric(0.25).unwrap();
        assert!((slot_cost(both, 1.0) - 4.0 * 9f64.ln()).abs() < 1e-12);
        assert!((slot_cost(both, 1.0) - 8.788898309344878).abs() < 1e-12);
        let one = EtaPair::new(0.0, 0.25).unwrap();
        assert!((slot_cost(one, 2.0) - 2.0 * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn eta_pair_bounds() {
        assert!(EtaPair::new(0.5, 0.1).is_err());
        assert!(EtaPair::new(0.1, -0.1).is_err());
        assert!(EtaPair::new(0.0, 0.499).is_ok());
    }

    #[test]
    fn inversion_examples() {
        assert_eq!(eta_from_slot_budget(0.0, 0.3), EtaPair::ZERO);
        let p = eta_from_slot_budget(8.0 * 3f64.ln(), 1.0);
        assert!((p.eta_q - 0.25).abs() < 1e-15 && (p.eta_a - 0.25).abs() < 1e-15);
        let q = eta_from_slot_budget(1e-6, 0.05);
        assert!(q.eta_q > 0.0 && q.eta_q < 0.5);
    }

    #[test]
    fn alpha_is_a_sixteenth_of_mu_eps() {
        let (mu, eps) = (0.05, 0.3);
        let p = eta_from_slot_budget(eps, mu);
        assert!((alpha(p.eta_a) - mu * eps / 16.0).abs() < 1e-15);
    }

    #[test]
    fn schedule_matches_quarter_budget_rates() {
        let cfg = DecaySeriesConfig::new(2.0, 0.1, 0.1).unwrap();
        let sched = OptimalSchedule::new(cfg);
        let quarter = DecaySeriesConfig::new(0.5, 0.1, 0.1).unwrap();
        for t in [1, 7, 1000] {
            assert!((sched.eta(t) - optimal_eta(t, &quarter).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn schedule_total_is_the_budget() {
        for eps in [0.5, 2.0, 10.0] {
            let sched = OptimalSchedule::new(DecaySeriesConfig::new(eps, 0.1, 0.1).unwrap());
            assert!((sched.total() - eps).abs() < 1e-8 * eps, "{} vs {eps}", sched.total());
        }
        // beyond the series capacity the rates saturate and the total is capped
        let big = OptimalSchedule::new(DecaySeriesConfig::new(1e6, 0.1, 0.1).unwrap());
        assert_eq!(big.m_squared(), 0.0);
        assert!(big.total() < 1e6);
    }

    #[test]
    fn partial_sums_stay_below_budget() {
        let sched = OptimalSchedule::new(DecaySeriesConfig::new(2.0, 0.1, 0.1).unwrap());
        let mut cum = 0.0;
        let mut prev = 0.0;
        for c in sched.costs(100_000) {
            cum += c;
            assert!(cum >= prev && cum <= 2.0);
            prev = cum;
        }
    }

    proptest! {
        #[test]
        fn round_trip_on_symmetric_pairs(eps in 0f64..50.0, mu in 1e-3f64..2.0) {
            let p = eta_from_slot_budget(eps, mu);
            prop_assert!((slot_cost(p, mu) - eps).abs() <= 1e-9);
        }

        #[test]
        fn round_trip_from_eta(eta in 0f64..0.49, mu in 1e-3f64..2.0) {
            let p = EtaPair::symmetric(eta).unwrap();
            let back = eta_from_slot_budget(slot_cost(p, mu), mu);
            prop_assert!((back.eta_q - eta).abs() <= 1e-9);
        }

        #[test]
        fn cost_increases_in_each_rate(a in 0f64..0.45, b in 0f64..0.45, d in 1e-6f64..0.04) {
            let base = slot_cost(EtaPair::new(a, b).unwrap(), 0.1);
            prop_assert!(slot_cost(EtaPair::new(a + d, b).unwrap(), 0.1) > base);
            prop_assert!(slot_cost(EtaPair::new(a, b + d).unwrap(), 0.1) > base);
        }

        #[test]
        fn schedule_cumulative_bounded(eps in 0.01f64..20.0, zeta in 0.05f64..0.95, mu in 0.01f64..1.0) {
            let sched = OptimalSchedule::new(DecaySeriesConfig::new(eps, zeta, mu).unwrap());
            let mut cum = 0.0;
            for c in sched.costs(2_000) {
                prop_assert!(c >= 0.0);
                cum += c;
            }
            prop_assert!(cum <= eps);
            prop_assert!(sched.eta(1) < 0.5);
        }
    }
}
