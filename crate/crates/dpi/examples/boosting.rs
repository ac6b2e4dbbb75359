//! Repeated boosting steps on one fixed slot. The weight of the synopsis
//! closest to the data grows with every round.

use std::sync::Arc;

use dpi_stream::{dpi_step, BoostConfig, CountVector, DpiState, PrivacyLedger, Query, SynopsisPool};

fn main() -> dpi_stream::Result<()> {
    let pool = Arc::new(SynopsisPool::exhaustive(4, 3)?);
    let cfg = BoostConfig::new(0.2, 0.1)?;
    let ledger = PrivacyLedger::new(50.0, cfg.mu)?;
    let mut state = DpiState::new(pool.clone(), vec![Query::distribution(), Query::mean()], ledger, cfg)?;

    let slot = CountVector::new(vec![10, 20, 10]);
    for round in 0..20u64 {
        let out = dpi_step(&mut state, &slot, 2.0, round)?;
        let r = &out.releases[0];
        println!(
            "round {:>2}: query {} synopsis {:?} scores {:?}",
            out.round,
            r.query_id,
            pool.get(r.synopsis_id).counts(),
            out.query_scores
        );
    }
    let row = state.pool_weights().row(0);
    let best = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
    println!(
        "heaviest synopsis for the distribution query: {:?}",
        pool.get(best).counts()
    );
    println!("budget spent: {:.4}", state.ledger().cumulative());
    Ok(())
}
