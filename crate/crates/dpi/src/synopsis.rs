//! The data-independent synopsis pool and per-query sampling weights.
//!
//! A pool is built from `(n, k, N, seed)` alone. Each synopsis is a
//! multinomial draw of `n` trials over `k` equally likely categories, scaled
//! by `1/n`, so it lies on the `1/n` lattice of the simplex and sums to one.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::Binomial;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pdf::{ProbabilityVector, SUM_TOLERANCE};
use crate::rng::stream_rng;

/// Pool size used when none is configured.
pub fn default_pool_size(k: usize) -> usize {
    (50 * k).min(100_000)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synopsis {
    id: usize,
    counts: Vec<u32>,
    pdf: ProbabilityVector,
}

impl Synopsis {
    fn from_counts(id: usize, counts: Vec<u32>, n: u64) -> Self {
        let probs = counts.iter().map(|&c| c as f64 / n as f64).collect();
        Self {
            id,
            counts,
            pdf: ProbabilityVector::new(probs).expect("lattice point of the simplex"),
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn pdf(&self) -> &ProbabilityVector {
        &self.pdf
    }

    /// Lattice coordinates: `pdf[i] * n`.
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynopsisPool {
    synopses: Vec<Synopsis>,
    trials: u64,
    domain_size: usize,
    seed: u64,
}

fn check_shape(n: u64, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidDomain("k must be at least 1".into()));
    }
    if n == 0 {
        return Err(Error::InvalidDomain("n must be at least 1".into()));
    }
    if n > u32::MAX as u64 {
        return Err(Error::InvalidDomain(format!("n = {n} is too large")));
    }
    Ok(())
}

fn multinomial_uniform<R: rand::Rng>(n: u64, k: usize, rng: &mut R) -> Vec<u32> {
    let mut left = n;
    let mut counts = Vec::with_capacity(k);
    for j in 0..k {
        let c = if j + 1 == k || left == 0 {
            left
        } else {
            let p = 1.0 / (k - j) as f64;
            Binomial::new(left, p).expect("valid binomial").sample(rng)
        };
        counts.push(c as u32);
        left -= c;
    }
    counts
}

/// Draws `pool_size` synopses without looking at any data.
pub fn generate_pool(n: u64, k: usize, pool_size: usize, seed: u64) -> Result<SynopsisPool> {
    check_shape(n, k)?;
    if pool_size == 0 {
        return Err(Error::InvalidDomain("pool size must be at least 1".into()));
    }
    let synopses = (0..pool_size)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            Synopsis::from_counts(i, multinomial_uniform(n, k, &mut rng), n)
        })
        .collect();
    Ok(SynopsisPool {
        synopses,
        trials: n,
        domain_size: k,
        seed,
    })
}

impl SynopsisPool {
    /// Every lattice point of the `1/n` grid, in lexicographic order of counts.
    pub fn exhaustive(n: u64, k: usize) -> Result<Self> {
        check_shape(n, k)?;
        let mut out = Vec::new();
        let mut cur = vec![0u32; k];
        fn rec(pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if pos + 1 == cur.len() {
                cur[pos] = left;
                out.push(cur.clone());
                return;
            }
            for c in (0..=left).rev() {
                cur[pos] = c;
                rec(pos + 1, left - c, cur, out);
            }
        }
        rec(0, n as u32, &mut cur, &mut out);
        let synopses = out
            .into_iter()
            .enumerate()
            .map(|(i, c)| Synopsis::from_counts(i, c, n))
            .collect();
        Ok(Self {
            synopses,
            trials: n,
            domain_size: k,
            seed: 0,
        })
    }

    pub fn synopses(&self) -> &[Synopsis] {
        &self.synopses
    }

    pub fn get(&self, i: usize) -> &Synopsis {
        &self.synopses[i]
    }

    pub fn len(&self) -> usize {
        self.synopses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.synopses.is_empty()
    }

    pub fn pool_size(&self) -> usize {
        self.synopses.len()
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn precision(&self) -> f64 {
        1.0 / self.trials as f64
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Text form: a `# n=.. k=.. N=.. seed=..` header, then one synopsis per line.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# n={} k={} N={} seed={}",
            self.trials,
            self.domain_size,
            self.synopses.len(),
            self.seed
        )?;
        for s in &self.synopses {
            let line: Vec<String> = s.pdf.probs().iter().map(|p| p.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?.ok_or_else(|| Error::MalformedRow {
            line: 1,
            reason: "missing header".into(),
        })?;
        let (n, k, size, seed) = parse_header(&header)?;
        check_shape(n, k)?;
        let mut synopses = Vec::with_capacity(size);
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i as u64 + 2;
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |reason: String| Error::MalformedRow { line: lineno, reason };
            let mut counts = Vec::with_capacity(k);
            for field in line.split(',') {
                let p: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| malformed(format!("bad probability {field:?}")))?;
                let c = (p * n as f64).round();
                if !(0.0..=n as f64).contains(&c) || (c / n as f64 - p).abs() > 1e-9 {
                    return Err(malformed(format!("{p} is not on the 1/{n} grid")));
                }
                counts.push(c as u32);
            }
            if counts.len() != k {
                return Err(malformed(format!("expected {k} entries, found {}", counts.len())));
            }
            if counts.iter().map(|&c| c as u64).sum::<u64>() != n {
                return Err(malformed("entries do not sum to one".into()));
            }
            synopses.push(Synopsis::from_counts(synopses.len(), counts, n));
        }
        if synopses.len() != size {
            return Err(Error::MalformedRow {
                line: 1,
                reason: format!("header declares {size} synopses, found {}", synopses.len()),
            });
        }
        Ok(Self {
            synopses,
            trials: n,
            domain_size: k,
            seed,
        })
    }
}

fn parse_header(line: &str) -> Result<(u64, usize, usize, u64)> {
    let bad = |reason: &str| Error::MalformedRow {
        line: 1,
        reason: reason.to_string(),
    };
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| bad("header must start with '#'"))?;
    let mut fields: HashMap<&str, &str> = HashMap::new();
    for kv in body.split_whitespace() {
        let (key, value) = kv.split_once('=').ok_or_else(|| bad("expected key=value"))?;
        fields.insert(key, value);
    }
    let get = |key: &str| -> Result<u64> {
        fields
            .get(key)
            .ok_or_else(|| bad(&format!("missing {key}")))?
            .parse()
            .map_err(|_| bad(&format!("bad {key}")))
    };
    Ok((get("n")?, get("k")? as usize, get("N")? as usize, get("seed")?))
}

/// Closed-form entropy of a multinomial with `trials` trials over `k`
/// equally likely categories (large-`trials` approximation).
pub fn entropy_approximation(trials: u64, k: usize) -> f64 {
    let k = k as f64;
    let n = trials as f64;
    (k - 1.0) / 2.0 * (2.0 * std::f64::consts::PI * n * std::f64::consts::E).ln() - k / 2.0 * k.ln()
}

/// Shannon entropy (nats) of the empirical distribution over distinct synopses.
pub fn empirical_pool_entropy(pool: &SynopsisPool) -> f64 {
    let mut freq: HashMap<&[u32], usize> = HashMap::new();
    for s in &pool.synopses {
        *freq.entry(s.counts.as_slice()).or_default() += 1;
    }
    let total = pool.len() as f64;
    -freq
        .values()
        .map(|&c| {
            let p = c as f64 / total;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Per-query synopsis sampling distributions, one row per query.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolWeights {
    rows: Vec<Vec<f64>>,
}

impl PoolWeights {
    pub fn uniform(queries: usize, pool_size: usize) -> Self {
        Self {
            rows: vec![vec![1.0 / pool_size as f64; pool_size]; queries],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let w = Self { rows };
        for q in 0..w.rows.len() {
            w.check_row(q)?;
        }
        Ok(w)
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, q: usize) -> &[f64] {
        &self.rows[q]
    }

    pub(crate) fn row_mut(&mut self, q: usize) -> &mut [f64] {
        &mut self.rows[q]
    }

    pub fn check_row(&self, q: usize) -> Result<()> {
        let row = &self.rows[q];
        let sum: f64 = row.iter().sum();
        if row.iter().any(|w| w.is_nan() || *w < 0.0) || (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::WeightRowUnnormalized { row: q, sum });
        }
        Ok(())
    }
}

/// Draws `count` synopsis indices with replacement from row `q_index`.
pub fn sample_synopses(
    pool: &SynopsisPool,
    weights: &PoolWeights,
    q_index: usize,
    count: usize,
    rng_seed: u64,
) -> Result<Vec<usize>> {
    let mut rng = stream_rng(rng_seed, 0);
    sample_synopses_with(pool, weights, q_index, count, &mut rng)
}

pub(crate) fn sample_synopses_with<R: rand::Rng>(
    pool: &SynopsisPool,
    weights: &PoolWeights,
    q_index: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if q_index >= weights.rows() {
        return Err(Error::InvalidDomain(format!(
            "query index {q_index} out of {} rows",
            weights.rows()
        )));
    }
    let row = weights.row(q_index);
    if row.len() != pool.len() {
        return Err(Error::DomainMismatch {
            left: row.len(),
            right: pool.len(),
        });
    }
    weights.check_row(q_index)?;
    let dist = WeightedIndex::new(row).map_err(|_| Error::WeightRowUnnormalized {
        row: q_index,
        sum: row.iter().sum(),
    })?;
    Ok((0..count).map(|_| dist.sample(rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_category_pool() {
        let pool = generate_pool(7, 1, 20, 3).unwrap();
        assert!(pool.synopses().iter().all(|s| s.pdf().probs() == [1.0]));
    }

    #[test]
    fn rejects_empty_shapes() {
        assert!(matches!(generate_pool(0, 3, 5, 1), Err(Error::InvalidDomain(_))));
        assert!(matches!(generate_pool(3, 0, 5, 1), Err(Error::InvalidDomain(_))));
    }

    #[test]
    fn two_trial_two_category_support() {
        let pool = generate_pool(2, 2, 40_000, 11).unwrap();
        let mut freq = [0usize; 3];
        for s in pool.synopses() {
            freq[s.counts()[0] as usize] += 1;
        }
        let expect = [0.25, 0.5, 0.25];
        for (f, e) in freq.iter().zip(expect) {
            let rate = *f as f64 / 40_000.0;
            assert!((rate - e).abs() < 0.01, "{rate} vs {e}");
        }
    }

    #[test]
    fn half_half_frequency_for_four_trials() {
        let pool = generate_pool(4, 2, 100_000, 5).unwrap();
        let hits = pool.synopses().iter().filter(|s| s.counts() == [2, 2]).count();
        assert!((hits as f64 / 1e5 - 0.375).abs() < 0.01);
    }

    #[test]
    fn deterministic_in_seed() {
        assert_eq!(
            generate_pool(10, 4, 200, 9).unwrap(),
            generate_pool(10, 4, 200, 9).unwrap()
        );
        assert_ne!(
            generate_pool(10, 4, 200, 9).unwrap(),
            generate_pool(10, 4, 200, 10).unwrap()
        );
    }

    #[test]
    fn entropy_approximation_values() {
        assert_eq!(entropy_approximation(50, 1), 0.0);
        // (1/2) ln(200 pi e) - ln 2
        assert!((entropy_approximation(100, 2) - 3.028376445638773).abs() < 1e-12);
        assert!(entropy_approximation(200, 3) > entropy_approximation(100, 3));
    }

    #[test]
    fn empirical_entropy_examples() {
        let pool = generate_pool(3, 1, 50, 0).unwrap();
        assert_eq!(empirical_pool_entropy(&pool), 0.0);
        let two = SynopsisPool {
            synopses: vec![
                Synopsis::from_counts(0, vec![1, 0], 1),
                Synopsis::from_counts(1, vec![0, 1], 1),
            ],
            trials: 1,
            domain_size: 2,
            seed: 0,
        };
        assert!((empirical_pool_entropy(&two) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn empirical_entropy_matches_binomial() {
        let pool = generate_pool(4, 2, 100_000, 21).unwrap();
        let exact: f64 = [1.0, 4.0, 6.0, 4.0, 1.0]
            .iter()
            .map(|c: &f64| -(c / 16.0) * (c / 16.0).ln())
            .sum();
        assert!((empirical_pool_entropy(&pool) - exact).abs() < 0.01);
    }

    #[test]
    fn exhaustive_counts_compositions() {
        // C(n + k - 1, k - 1)
        assert_eq!(SynopsisPool::exhaustive(4, 4).unwrap().len(), 35);
        assert_eq!(SynopsisPool::exhaustive(6, 5).unwrap().len(), 210);
        assert_eq!(SynopsisPool::exhaustive(3, 1).unwrap().len(), 1);
    }

    #[test]
    fn serialization_round_trip() {
        let pool = generate_pool(6, 3, 25, 4).unwrap();
        let mut buf = Vec::new();
        pool.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# n=6 k=3 N=25 seed=4\n"));
        let back = SynopsisPool::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, pool);
    }

    #[test]
    fn read_rejects_off_grid() {
        let text = "# n=4 k=2 N=1 seed=0\n0.3,0.7\n";
        assert!(matches!(
            SynopsisPool::read_from(text.as_bytes()),
            Err(Error::MalformedRow { line: 2, .. })
        ));
    }

    #[test]
    fn point_mass_row_always_draws_it() {
        let pool = generate_pool(5, 3, 4, 0).unwrap();
        let w = PoolWeights::from_rows(vec![vec![1.0, 0.0, 0.0, 0.0]]).unwrap();
        assert!(sample_synopses(&pool, &w, 0, 500, 8).unwrap().iter().all(|&i| i == 0));
    }

    #[test]
    fn uniform_row_frequencies() {
        let pool = generate_pool(5, 3, 10, 0).unwrap();
        let w = PoolWeights::uniform(1, 10);
        let draws = sample_synopses(&pool, &w, 0, 100_000, 77).unwrap();
        let mut freq = [0usize; 10];
        draws.iter().for_each(|&i| freq[i] += 1);
        let sigma = (1e5 * 0.1 * 0.9f64).sqrt();
        for f in freq {
            assert!((f as f64 - 1e4).abs() <= 3.0 * sigma, "{f}");
        }
    }

    #[test]
    fn single_draw_is_reproducible() {
        let pool = generate_pool(5, 3, 50, 0).unwrap();
        let w = PoolWeights::uniform(2, 50);
        assert_eq!(
            sample_synopses(&pool, &w, 1, 1, 123).unwrap(),
            sample_synopses(&pool, &w, 1, 1, 123).unwrap()
        );
    }

    #[test]
    fn unnormalized_row_is_rejected() {
        let pool = generate_pool(5, 3, 2, 0).unwrap();
        let w = PoolWeights {
            rows: vec![vec![0.7, 0.7]],
        };
        assert!(matches!(
            sample_synopses(&pool, &w, 0, 1, 0),
            Err(Error::WeightRowUnnormalized { row: 0, .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn synopses_are_lattice_points(n in 1u64..40, k in 1usize..12, seed in any::<u64>()) {
            let pool = generate_pool(n, k, 30, seed).unwrap();
            let p = pool.precision();
            for s in pool.synopses() {
                prop_assert_eq!(s.pdf().domain_size(), k);
                prop_assert_eq!(s.counts().iter().map(|&c| c as u64).sum::<u64>(), n);
                prop_assert!((s.pdf().probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
                for &x in s.pdf().probs() {
                    prop_assert!(((x / p).round() * p - x).abs() < 1e-12);
                }
            }
        }
    }
}
