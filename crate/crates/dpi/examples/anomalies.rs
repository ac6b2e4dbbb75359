use std::collections::BTreeSet;

use dpi_stream::{hbos_detect, moving_average, precision_recall, ProbabilityVector};

fn main() -> dpi_stream::Result<()> {
    let truth = ProbabilityVector::new(vec![0.002, 0.25, 0.25, 0.25, 0.248])?;
    let released = ProbabilityVector::new(vec![0.004, 0.2, 0.3, 0.006, 0.49])?;

    let t = hbos_detect(&truth, 0.75)?;
    let r = hbos_detect(&released, 0.75)?;
    println!(
        "truth scores {:?} threshold {:.3} flagged {:?}",
        t.scores, t.threshold, t.flagged
    );
    println!(
        "release scores {:?} threshold {:.3} flagged {:?}",
        r.scores, r.threshold, r.flagged
    );
    let (p, rc) = precision_recall(&r.flagged, &t.flagged);
    println!("precision {p} recall {rc}");

    let empty = BTreeSet::new();
    println!(
        "nothing predicted, nothing true: {:?}",
        precision_recall(&empty, &empty)
    );
    println!("moving average: {:?}", moving_average(&[1.0, 2.0, 3.0, 10.0], 2)?);
    Ok(())
}
