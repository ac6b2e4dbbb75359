//! Run configuration, loadable from a `key = value` file.

use std::path::Path;

use serde::Deserialize;

use crate::boosting::{BoostConfig, ReleaseRule, UpdateRule};
use crate::budget::{DecaySeriesConfig, DEFAULT_HORIZON, DEFAULT_LAMBDA_RATE};
use crate::error::{Error, Result};
use crate::query::{parse_queries, Query};

/// How per-slot budgets are drawn from the series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Allocation {
    /// Exponential proposal, nearest remaining element.
    #[default]
    Nearest,
    /// Uniform choice among small, medium and large queues.
    Range,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum UpdateRuleName {
    Bidirectional,
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ReleaseRuleName {
    HighestWeight,
    Sampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub epsilon: f64,
    pub lambda: f64,
    pub mu: f64,
    pub zeta: f64,
    pub lambda_rate: f64,
    pub horizon: u64,
    pub allocation: Allocation,
    /// Trials per synopsis; the expected slot population.
    pub pool_trials: u64,
    /// `None` picks `min(100_000, 50 k)`.
    pub pool_size: Option<usize>,
    pub sample_count: usize,
    pub queries_per_slot: usize,
    pub queries: Vec<Query>,
    pub forgetting: f64,
    pub weight_floor: f64,
    pub update_rule: UpdateRule,
    pub release_rule: ReleaseRule,
    pub warmup_rounds: u32,
    pub anomaly_quantile: f64,
    pub kl_smoothing: f64,
    pub seed: u64,
    pub restart_on_exhaustion: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let boost = BoostConfig::default();
        Self {
            epsilon: 2.0,
            lambda: boost.lambda,
            mu: boost.mu,
            zeta: 0.1,
            lambda_rate: DEFAULT_LAMBDA_RATE,
            horizon: DEFAULT_HORIZON,
            allocation: Allocation::Nearest,
            pool_trials: 1000,
            pool_size: None,
            sample_count: boost.sample_count,
            queries_per_slot: boost.queries_per_slot,
            queries: vec![Query::distribution(), Query::mean(), Query::median()],
            forgetting: boost.forgetting,
            weight_floor: boost.weight_floor,
            update_rule: boost.update_rule,
            release_rule: boost.release_rule,
            warmup_rounds: 1,
            anomaly_quantile: crate::apps::DEFAULT_ANOMALY_QUANTILE,
            kl_smoothing: crate::pdf::DEFAULT_KL_SMOOTHING,
            seed: 0,
            restart_on_exhaustion: false,
        }
    }
}

/// Every key is optional; absent keys keep their defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    epsilon: Option<f64>,
    lambda: Option<f64>,
    mu: Option<f64>,
    zeta: Option<f64>,
    lambda_rate: Option<f64>,
    horizon: Option<u64>,
    allocation: Option<Allocation>,
    pool_trials: Option<u64>,
    pool_size: Option<usize>,
    sample_count: Option<usize>,
    queries_per_slot: Option<usize>,
    queries: Option<String>,
    forgetting: Option<f64>,
    weight_floor: Option<f64>,
    update_rule: Option<UpdateRuleName>,
    release_rule: Option<ReleaseRuleName>,
    warmup_rounds: Option<u32>,
    anomaly_quantile: Option<f64>,
    kl_smoothing: Option<f64>,
    seed: Option<u64>,
    restart_on_exhaustion: Option<bool>,
}

macro_rules! take {
    ($dst:expr, $src:expr) => {
        if let Some(v) = $src {
            $dst = v;
        }
    };
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let f: ConfigFile = toml::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        let mut c = RunConfig::default();
        take!(c.epsilon, f.epsilon);
        take!(c.lambda, f.lambda);
        take!(c.mu, f.mu);
        take!(c.zeta, f.zeta);
        take!(c.lambda_rate, f.lambda_rate);
        take!(c.horizon, f.horizon);
        take!(c.allocation, f.allocation);
        take!(c.pool_trials, f.pool_trials);
        c.pool_size = f.pool_size.or(c.pool_size);
        take!(c.sample_count, f.sample_count);
        take!(c.queries_per_slot, f.queries_per_slot);
        if let Some(q) = f.queries {
            c.queries = parse_queries(&q)?;
        }
        take!(c.forgetting, f.forgetting);
        take!(c.weight_floor, f.weight_floor);
        if let Some(r) = f.update_rule {
            c.update_rule = match r {
                UpdateRuleName::Bidirectional => UpdateRule::Bidirectional,
                UpdateRuleName::Literal => UpdateRule::Literal,
            };
        }
        if let Some(r) = f.release_rule {
            c.release_rule = match r {
                ReleaseRuleName::HighestWeight => ReleaseRule::HighestWeight,
                ReleaseRuleName::Sampled => ReleaseRule::Sampled,
            };
        }
        take!(c.warmup_rounds, f.warmup_rounds);
        take!(c.anomaly_quantile, f.anomaly_quantile);
        take!(c.kl_smoothing, f.kl_smoothing);
        take!(c.seed, f.seed);
        take!(c.restart_on_exhaustion, f.restart_on_exhaustion);
        Ok(c)
    }

    pub fn boost_config(&self) -> BoostConfig {
        BoostConfig {
            lambda: self.lambda,
            mu: self.mu,
            sample_count: self.sample_count,
            queries_per_slot: self.queries_per_slot,
            forgetting: self.forgetting,
            weight_floor: self.weight_floor,
            update_rule: self.update_rule,
            release_rule: self.release_rule,
        }
    }

    pub fn series_config(&self) -> Result<DecaySeriesConfig> {
        DecaySeriesConfig::new(self.epsilon, self.zeta, self.mu)
    }

    pub fn validate(&self) -> Result<()> {
        self.boost_config().validate()?;
        self.series_config()?;
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if !(self.lambda_rate > 0.0 && self.lambda_rate.is_finite()) {
            return bad(format!("lambda_rate {} must be positive", self.lambda_rate));
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.pool_trials == 0 || self.pool_size == Some(0) {
            return bad("pool_trials and pool_size must be at least 1".into());
        }
        if self.queries.is_empty() {
            return bad("at least one query is required".into());
        }
        if self.warmup_rounds == 0 {
            return bad("warmup_rounds must be at least 1".into());
        }
        if !(self.anomaly_quantile > 0.0 && self.anomaly_quantile < 1.0) {
            return bad(format!("anomaly_quantile {} must lie in (0, 1)", self.anomaly_quantile));
        }
        if !(self.kl_smoothing >= 0.0 && self.kl_smoothing.is_finite()) {
            return bad(format!("kl_smoothing {} must be >= 0", self.kl_smoothing));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(
            (c.lambda, c.mu, c.zeta, c.lambda_rate, c.anomaly_quantile),
            (0.1, 0.05, 0.1, 1e8, 0.95)
        );
    }

    #[test]
    fn file_overrides() {
        let c = RunConfig::from_toml_str(
            "# comment\nepsilon = 5\nqueries = \"point:2,mean\"\nrelease_rule = \"sampled\"\nallocation = \"range\"\nseed = 9\n",
        )
        .unwrap();
        assert_eq!(c.epsilon, 5.0);
        assert_eq!(c.queries, vec![Query::point(2), Query::mean()]);
        assert_eq!(c.release_rule, ReleaseRule::Sampled);
        assert_eq!(c.allocation, Allocation::Range);
        assert_eq!(c.seed, 9);
        assert_eq!(c.mu, 0.05);
    }

    #[test]
    fn unknown_keys_and_bad_values() {
        assert!(RunConfig::from_toml_str("epsilonn = 1").is_err());
        assert!(RunConfig::from_toml_str("queries = \"cube\"").is_err());
        let c = RunConfig::from_toml_str("mu = 0.2").unwrap();
        assert!(c.validate().is_err());
    }
}
