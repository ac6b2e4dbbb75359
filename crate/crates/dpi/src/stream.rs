//! Slotted count streams: CSV ingestion and the synthetic generator.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::pdf::CountVector;
use crate::rng::stream_rng;

pub const STREAM_HEADER: [&str; 3] = ["slot", "category", "count"];

/// Variances `1, 4, 9, …, 100`.
pub const DEFAULT_VARIANCES: [f64; 10] = [1.0, 4.0, 9.0, 16.0, 25.0, 36.0, 49.0, 64.0, 81.0, 100.0];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamSlot {
    pub t: usize,
    pub counts: CountVector,
}

pub fn parse_stream(path: &Path) -> Result<Vec<StreamSlot>> {
    read_stream(File::open(path)?)
}

/// Reads `slot,category,count` rows. Missing pairs count as zero; the domain
/// size is one past the largest category seen.
pub fn read_stream<R: Read>(reader: R) -> Result<Vec<StreamSlot>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Ok(Vec::new()),
        Some(r) => r.map_err(|e| csv_error(e, 1))?,
    };
    if header.iter().collect::<Vec<_>>() != STREAM_HEADER {
        return Err(Error::MalformedRow {
            line: 1,
            reason: format!("expected header {:?}", STREAM_HEADER.join(",")),
        });
    }

    let mut cells: BTreeMap<usize, BTreeMap<usize, u64>> = BTreeMap::new();
    let mut k = 0usize;
    for rec in records {
        let rec = rec.map_err(|e| csv_error(e, 0))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |reason: String| Error::MalformedRow { line, reason };
        if rec.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", rec.len())));
        }
        let slot: usize = rec[0].parse().map_err(|_| bad(format!("bad slot {:?}", &rec[0])))?;
        let cat: usize = rec[1].parse().map_err(|_| bad(format!("bad category {:?}", &rec[1])))?;
        let count: u64 = rec[2].parse().map_err(|_| bad(format!("bad count {:?}", &rec[2])))?;
        if cells.entry(slot).or_default().insert(cat, count).is_some() {
            return Err(bad(format!("duplicate row for slot {slot}, category {cat}")));
        }
        k = k.max(cat + 1);
    }

    let mut out = Vec::with_capacity(cells.len());
    for (expected, (slot, row)) in cells.into_iter().enumerate() {
        if slot != expected {
            return Err(Error::NonContiguousSlots { expected, found: slot });
        }
        let mut counts = vec![0u64; k];
        for (c, n) in row {
            counts[c] = n;
        }
        out.push(StreamSlot {
            t: slot,
            counts: CountVector::new(counts),
        });
    }
    Ok(out)
}

fn csv_error(e: csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::MalformedRow {
            line,
            reason: format!("{other:?}"),
        },
    }
}

/// Writes every `(slot, category)` pair, zeros included.
pub fn write_stream<W: Write>(mut w: W, slots: &[StreamSlot]) -> Result<()> {
    writeln!(w, "{}", STREAM_HEADER.join(","))?;
    for s in slots {
        for (c, n) in s.counts.counts().iter().enumerate() {
            writeln!(w, "{},{},{}", s.t, c, n)?;
        }
    }
    Ok(())
}

/// Each slot picks one variance from `variance_set`; every item's count is a
/// rounded Normal(mean, variance) draw clamped at zero.
pub fn gen_synthetic(
    slots: usize,
    items: usize,
    mean: f64,
    variance_set: &[f64],
    seed: u64,
) -> Result<Vec<StreamSlot>> {
    if slots == 0 || items == 0 {
        return Err(Error::ConfigInvalid("slots and items must be at least 1".into()));
    }
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::ConfigInvalid(format!("mean {mean} must be positive")));
    }
    if variance_set.is_empty() || variance_set.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::ConfigInvalid(
            "variances must be a non-empty set of finite values >= 0".into(),
        ));
    }
    let out = (0..slots)
        .map(|t| {
            let mut rng = stream_rng(seed, t as u64);
            let var = variance_set[rng.random_range(0..variance_set.len())];
            let normal = Normal::new(mean, var.sqrt()).expect("finite parameters");
            let counts = (0..items)
                .map(|_| normal.sample(&mut rng).round().max(0.0) as u64)
                .collect();
            StreamSlot {
                t,
                counts: CountVector::new(counts),
            }
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(s: &str) -> Result<Vec<StreamSlot>> {
        read_stream(s.as_bytes())
    }

    #[test]
    fn grouping() {
        let s = parse("slot,category,count\n0,0,2\n0,1,3\n1,0,1\n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].counts.counts(), &[2, 3]);
        assert_eq!(s[1].counts.counts(), &[1, 0]);
    }

    #[test]
    fn header_only_and_empty() {
        assert!(parse("slot,category,count\n").unwrap().is_empty());
        assert!(parse("").unwrap().is_empty());
    }

    #[test]
    fn malformed_rows() {
        let err = parse("slot,category,count\n0,0,2\n0,1,-3\n").unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 3, .. }), "{err:?}");
        assert!(matches!(
            parse("slot,cat,count\n"),
            Err(Error::MalformedRow { line: 1, .. })
        ));
        assert!(matches!(
            parse("slot,category,count\n0,1\n"),
            Err(Error::MalformedRow { line: 2, .. })
        ));
        assert!(matches!(
            parse("slot,category,count\n0,0,1\n0,0,2\n"),
            Err(Error::MalformedRow { line: 3, .. })
        ));
    }

    #[test]
    fn gaps_are_rejected() {
        assert!(matches!(
            parse("slot,category,count\n0,0,1\n2,0,1\n"),
            Err(Error::NonContiguousSlots { expected: 1, found: 2 })
        ));
        assert!(matches!(
            parse("slot,category,count\n1,0,1\n"),
            Err(Error::NonContiguousSlots { expected: 0, found: 1 })
        ));
    }

    #[test]
    fn degenerate_variance() {
        let s = gen_synthetic(3, 5, 42.4, &[0.0], 1).unwrap();
        assert!(s.iter().all(|x| x.counts.counts().iter().all(|&c| c == 42)));
    }

    #[test]
    fn slot_means_concentrate() {
        let s = gen_synthetic(50, 100, 100.0, &DEFAULT_VARIANCES, 3).unwrap();
        for slot in s {
            let m = slot.counts.total() as f64 / 100.0;
            assert!((m - 100.0).abs() <= 3.0 * 10.0 / 10.0, "{m}");
        }
    }

    #[test]
    fn larger_domains() {
        let s = gen_synthetic(2, 10_000, 1000.0, &DEFAULT_VARIANCES, 8).unwrap();
        assert_eq!(s[1].counts.domain_size(), 10_000);
        assert_eq!(
            gen_synthetic(2, 1000, 1000.0, &DEFAULT_VARIANCES, 8).unwrap()[0]
                .counts
                .domain_size(),
            1000
        );
    }

    #[test]
    fn bad_generator_arguments() {
        assert!(gen_synthetic(0, 1, 1.0, &[1.0], 0).is_err());
        assert!(gen_synthetic(1, 1, 0.0, &[1.0], 0).is_err());
        assert!(gen_synthetic(1, 1, 1.0, &[], 0).is_err());
    }

    proptest! {
        #[test]
        fn write_then_parse_is_identity(rows in prop::collection::vec(prop::collection::vec(0u64..1000, 4), 0..20)) {
            let slots: Vec<StreamSlot> = rows.into_iter().enumerate()
                .map(|(t, c)| StreamSlot { t, counts: CountVector::new(c) })
                .collect();
            let mut buf = Vec::new();
            write_stream(&mut buf, &slots).unwrap();
            prop_assert_eq!(read_stream(buf.as_slice()).unwrap(), slots);
        }

        #[test]
        fn generator_is_deterministic(seed in any::<u64>()) {
            let a = gen_synthetic(4, 6, 50.0, &DEFAULT_VARIANCES, seed).unwrap();
            let b = gen_synthetic(4, 6, 50.0, &DEFAULT_VARIANCES, seed).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
