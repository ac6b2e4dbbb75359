use dpi_stream::{
    theoretical_bounds, utility_loss_bound, DecaySeriesConfig, OptimalSchedule, PrivacyLedger, SeriesBounds,
};

fn main() -> dpi_stream::Result<()> {
    let (eps, zeta, mu) = (2.0, 0.1, 0.1);
    let schedule = OptimalSchedule::new(DecaySeriesConfig::new(eps, zeta, mu)?);
    let mut ledger = PrivacyLedger::new(eps, mu)?;
    let reader = ledger.reader();
    let mut history = Vec::new();
    for t in 1..=10 {
        let pair = schedule.pair(t);
        let e = ledger.record(t, pair)?;
        println!("slot {t:>2}: cost {:.3e} cumulative {:.6}", e.cost, e.cumulative);
        history.push(pair);
    }
    println!(
        "shared reader sees {:.6}, remaining {:.6}",
        reader.get(),
        ledger.remaining()
    );
    println!(
        "log utility bound after 10 slots = {:.3e}",
        utility_loss_bound(&history)
    );

    let bounds = SeriesBounds::new(schedule.eta(10), schedule.eta(1), zeta, mu)?;
    let tb = theoretical_bounds(&bounds, eps);
    println!("{tb:?}");

    let mut csv = Vec::new();
    ledger.write_csv(&mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}
