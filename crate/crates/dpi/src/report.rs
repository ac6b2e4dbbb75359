//! CSV and summary exports of a run, the budget trace, and comparison of
//! two release files.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::budget::OptimalSchedule;
use crate::error::{Error, Result};
use crate::pdf::{kl_divergence, mse, ProbabilityVector};
use crate::pipeline::RunReport;

pub const RELEASES_FILE: &str = "releases.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const ANOMALIES_FILE: &str = "anomalies.csv";
pub const ANSWERS_FILE: &str = "answers.csv";
pub const LEDGER_FILE: &str = "ledger.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

/// Linear interpolation between order statistics.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

impl RunReport {
    pub fn write_releases<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "slot,query_id,category,probability")?;
        for s in &self.slots {
            for (q, pdf) in &s.releases {
                for (c, p) in pdf.probs().iter().enumerate() {
                    writeln!(w, "{},{},{},{}", s.slot, q, c, p)?;
                }
            }
        }
        Ok(())
    }

    pub fn write_metrics<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "slot,epsilon,kl_inst,mse_inst,kl_acc,mse_acc,precision,recall")?;
        for s in &self.slots {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                s.slot,
                s.eps,
                opt(s.kl_inst),
                opt(s.mse_inst),
                opt(s.kl_acc),
                opt(s.mse_acc),
                opt(s.precision),
                opt(s.recall)
            )?;
        }
        Ok(())
    }

    pub fn write_anomalies<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "slot,category,score,flagged")?;
        for s in &self.slots {
            for (c, score) in s.anomalies.scores.iter().enumerate() {
                let flag = u8::from(s.anomalies.flagged.contains(&c));
                writeln!(w, "{},{},{},{}", s.slot, c, score, flag)?;
            }
        }
        Ok(())
    }

    pub fn write_answers<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "slot,query_id,query,released,truth")?;
        for s in &self.slots {
            for (q, released, truth) in &s.answers {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    s.slot,
                    q,
                    self.config.queries[*q],
                    released,
                    opt(*truth)
                )?;
            }
        }
        Ok(())
    }

    pub fn write_ledger<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "slot,eta_q,eta_a,cost,cumulative")?;
        for e in &self.ledger {
            writeln!(
                w,
                "{},{},{},{},{}",
                e.slot, e.etas.eta_q, e.etas.eta_a, e.cost, e.cumulative
            )?;
        }
        Ok(())
    }

    /// `key = value` lines.
    pub fn summary(&self) -> String {
        let kl = self.kl_inst();
        let ms = self.mse_inst();
        let last_acc = self.slots.iter().rev().find_map(|s| s.kl_acc.zip(s.mse_acc));
        let precision: Vec<f64> = self.slots.iter().filter_map(|s| s.precision).collect();
        let recall: Vec<f64> = self.slots.iter().filter_map(|s| s.recall).collect();
        let rows: Vec<(&str, String)> = vec![
            ("slots", self.slots.len().to_string()),
            ("empty_slots", self.slots.iter().filter(|s| s.empty).count().to_string()),
            ("domain_size", self.domain_size.to_string()),
            ("pool_size", self.pool_size.to_string()),
            ("epsilon", self.config.epsilon.to_string()),
            ("consumed", self.consumed.to_string()),
            ("ledger_cumulative", self.ledger_cumulative.to_string()),
            ("remaining_mass", self.remaining_mass.to_string()),
            ("restarts", self.restarts.to_string()),
            ("kl_inst_mean", opt(mean(&kl))),
            ("kl_inst_p50", opt(percentile(&kl, 0.5))),
            ("kl_inst_p95", opt(percentile(&kl, 0.95))),
            ("mse_inst_mean", opt(mean(&ms))),
            ("mse_inst_p50", opt(percentile(&ms, 0.5))),
            ("mse_inst_p95", opt(percentile(&ms, 0.95))),
            ("kl_acc_final", opt(last_acc.map(|a| a.0))),
            ("mse_acc_final", opt(last_acc.map(|a| a.1))),
            ("precision_mean", opt(mean(&precision))),
            ("recall_mean", opt(mean(&recall))),
        ];
        rows.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Writes every export file into `dir`, creating it if needed.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let open = |name: &str| -> Result<BufWriter<File>> { Ok(BufWriter::new(File::create(dir.join(name))?)) };
        self.write_releases(open(RELEASES_FILE)?)?;
        self.write_metrics(open(METRICS_FILE)?)?;
        self.write_anomalies(open(ANOMALIES_FILE)?)?;
        self.write_answers(open(ANSWERS_FILE)?)?;
        self.write_ledger(open(LEDGER_FILE)?)?;
        open(SUMMARY_FILE)?.write_all(self.summary().as_bytes())?;
        Ok(())
    }
}

/// `slot,eta,slot_cost,cumulative,remaining` for slots `1..=slots`.
pub fn write_budget_trace<W: Write>(mut w: W, schedule: &OptimalSchedule, slots: u64) -> Result<()> {
    writeln!(w, "slot,eta,slot_cost,cumulative,remaining")?;
    let eps = schedule.config().epsilon_total();
    let mut cumulative = 0.0;
    for t in 1..=slots {
        let cost = schedule.slot_cost(t);
        cumulative += cost;
        writeln!(
            w,
            "{},{},{},{},{}",
            t,
            schedule.eta(t),
            cost,
            cumulative,
            eps - cumulative
        )?;
    }
    Ok(())
}

/// Per-slot published vectors from a `slot,query_id,category,probability`
/// file; several queries in one slot are mixed with equal weight.
pub fn read_releases<R: Read>(reader: R) -> Result<BTreeMap<usize, ProbabilityVector>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::MalformedRow {
        line: 1,
        reason: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != ["slot", "query_id", "category", "probability"] {
        return Err(Error::MalformedRow {
            line: 1,
            reason: "expected header slot,query_id,category,probability".into(),
        });
    }
    let mut cells: BTreeMap<usize, BTreeMap<usize, Vec<(usize, f64)>>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| {
            rec.get(i).ok_or_else(|| Error::MalformedRow {
                line,
                reason: "missing field".into(),
            })
        };
        let bad = |what: &str| Error::MalformedRow {
            line,
            reason: format!("bad {what}"),
        };
        let slot: usize = field(0)?.parse().map_err(|_| bad("slot"))?;
        let q: usize = field(1)?.parse().map_err(|_| bad("query_id"))?;
        let c: usize = field(2)?.parse().map_err(|_| bad("category"))?;
        let p: f64 = field(3)?.parse().map_err(|_| bad("probability"))?;
        cells.entry(slot).or_default().entry(q).or_default().push((c, p));
    }
    let mut out = BTreeMap::new();
    for (slot, queries) in cells {
        let mut parts = Vec::new();
        for (_, entries) in queries {
            let k = entries.iter().map(|(c, _)| c + 1).max().unwrap_or(0);
            let mut probs = vec![0.0; k];
            for (c, p) in entries {
                probs[c] = p;
            }
            parts.push(ProbabilityVector::new(probs).map_err(|e| e.at_slot(slot))?);
        }
        let refs: Vec<&ProbabilityVector> = parts.iter().collect();
        out.insert(slot, ProbabilityVector::mixture(&refs).map_err(|e| e.at_slot(slot))?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotComparison {
    pub slot: usize,
    pub mse: f64,
    pub kl: f64,
}

/// MSE and KL(reference ‖ candidate) for every slot present in both.
pub fn compare_releases(
    reference: &BTreeMap<usize, ProbabilityVector>,
    candidate: &BTreeMap<usize, ProbabilityVector>,
    smoothing: f64,
) -> Result<Vec<SlotComparison>> {
    reference
        .iter()
        .filter_map(|(slot, a)| candidate.get(slot).map(|b| (slot, a, b)))
        .map(|(&slot, a, b)| {
            Ok(SlotComparison {
                slot,
                mse: mse(a, b).map_err(|e| e.at_slot(slot))?,
                kl: kl_divergence(a, b, smoothing).map_err(|e| e.at_slot(slot))?,
            })
        })
        .collect()
}
