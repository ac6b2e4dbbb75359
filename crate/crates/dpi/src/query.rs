//! Statistical queries answered from a released probability vector.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::pdf::{l1_distance, ProbabilityVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryKind {
    Point(usize),
    /// Inclusive bounds.
    Range(usize, usize),
    /// Count in an inclusive range, scaled by the released total.
    Sum(usize, usize),
    Mean,
    Median,
    /// The whole vector; compared in ℓ1.
    Distribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Query {
    pub kind: QueryKind,
    pub released_total: Option<u64>,
}

impl Query {
    pub const fn new(kind: QueryKind) -> Self {
        Self {
            kind,
            released_total: None,
        }
    }

    pub const fn with_total(mut self, total: u64) -> Self {
        self.released_total = Some(total);
        self
    }

    pub fn point(c: usize) -> Self {
        Self::new(QueryKind::Point(c))
    }

    pub fn range(lo: usize, hi: usize) -> Self {
        Self::new(QueryKind::Range(lo, hi))
    }

    pub fn sum(lo: usize, hi: usize, total: u64) -> Self {
        Self::new(QueryKind::Sum(lo, hi)).with_total(total)
    }

    pub fn mean() -> Self {
        Self::new(QueryKind::Mean)
    }

    pub fn median() -> Self {
        Self::new(QueryKind::Median)
    }

    pub fn distribution() -> Self {
        Self::new(QueryKind::Distribution)
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        let check = |lo: usize, hi: usize| {
            if lo <= hi && hi < k {
                Ok(())
            } else {
                Err(Error::InvalidDomain(format!("range {lo}..={hi} outside [0, {k})")))
            }
        };
        match self.kind {
            QueryKind::Point(c) => check(c, c),
            QueryKind::Range(lo, hi) => check(lo, hi),
            QueryKind::Sum(lo, hi) => {
                check(lo, hi)?;
                self.released_total.map(|_| ()).ok_or(Error::MissingTotal)
            }
            _ => Ok(()),
        }
    }

    /// Error of `candidate` against `truth` on a probability scale.
    ///
    /// Scalar answers are divided by their range (`k − 1` for mean and
    /// median, the released total for sums) so that every query's error is
    /// comparable with the same `λ` and `μ`.
    pub fn error(&self, truth: &ProbabilityVector, candidate: &ProbabilityVector) -> Result<f64> {
        if let QueryKind::Distribution = self.kind {
            return l1_distance(truth, candidate);
        }
        let a = eval_query(self, truth)?;
        let b = eval_query(self, candidate)?;
        Ok((a - b).abs() / self.scale(truth.domain_size()))
    }

    pub(crate) fn scale(&self, k: usize) -> f64 {
        match self.kind {
            QueryKind::Mean | QueryKind::Median => (k.max(2) - 1) as f64,
            QueryKind::Sum(..) => self.released_total.unwrap_or(1).max(1) as f64,
            _ => 1.0,
        }
    }

    pub fn is_scalar(&self) -> bool {
        !matches!(self.kind, QueryKind::Distribution)
    }
}

pub fn eval_query(q: &Query, pdf: &ProbabilityVector) -> Result<f64> {
    q.validate(pdf.domain_size())?;
    let p = pdf.probs();
    Ok(match q.kind {
        QueryKind::Point(c) => p[c],
        QueryKind::Range(lo, hi) => p[lo..=hi].iter().sum(),
        QueryKind::Sum(lo, hi) => {
            let total = q.released_total.ok_or(Error::MissingTotal)?;
            total as f64 * p[lo..=hi].iter().sum::<f64>()
        }
        QueryKind::Mean => p.iter().enumerate().map(|(i, x)| i as f64 * x).sum(),
        QueryKind::Median => median_index(p) as f64,
        QueryKind::Distribution => {
            return Err(Error::NotScalar("distribution".into()));
        }
    })
}

fn median_index(p: &[f64]) -> usize {
    let mut cdf = 0.0;
    for (i, x) in p.iter().enumerate() {
        cdf += x;
        if cdf >= 0.5 - 1e-12 {
            return i;
        }
    }
    p.len() - 1
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            QueryKind::Point(c) => write!(f, "point:{c}"),
            QueryKind::Range(lo, hi) => write!(f, "range:{lo}:{hi}"),
            QueryKind::Sum(lo, hi) => match self.released_total {
                Some(n) => write!(f, "sum:{lo}:{hi}:{n}"),
                None => write!(f, "sum:{lo}:{hi}"),
            },
            QueryKind::Mean => f.write_str("mean"),
            QueryKind::Median => f.write_str("median"),
            QueryKind::Distribution => f.write_str("distribution"),
        }
    }
}

impl FromStr for Query {
    type Err = Error;

    /// `distribution`, `mean`, `median`, `point:C`, `range:LO:HI`, `sum:LO:HI:TOTAL`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || Error::ConfigInvalid(format!("unrecognized query {s:?}"));
        let num = |x: &str| x.parse::<usize>().map_err(|_| bad());
        Ok(match parts.as_slice() {
            ["distribution"] => Query::distribution(),
            ["mean"] => Query::mean(),
            ["median"] => Query::median(),
            ["point", c] => Query::point(num(c)?),
            ["range", lo, hi] => Query::range(num(lo)?, num(hi)?),
            ["sum", lo, hi] => Query::new(QueryKind::Sum(num(lo)?, num(hi)?)),
            ["sum", lo, hi, n] => Query::sum(num(lo)?, num(hi)?, num(n)? as u64),
            _ => return Err(bad()),
        })
    }
}

/// Parses a comma-separated query list.
pub fn parse_queries(s: &str) -> Result<Vec<Query>> {
    s.split(',').filter(|x| !x.trim().is_empty()).map(str::parse).collect()
}
