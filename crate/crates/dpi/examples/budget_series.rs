//! The learning-rate schedule and its bounded total cost.

use dpi_stream::{li2, li2_inv, DecaySeriesConfig, OptimalSchedule};

fn main() -> dpi_stream::Result<()> {
    for z in [0.1, 0.5, 0.9, 1.0] {
        let y = li2(z)?;
        println!("Li2({z}) = {y:.12}  inverse {:.12}", li2_inv(y)?);
    }

    let cfg = DecaySeriesConfig::new(2.0, 0.1, 0.1)?;
    let schedule = OptimalSchedule::new(cfg);
    println!("C = {:.4}, m^2 = {:.6e}", cfg.c_constant(), schedule.m_squared());
    let mut cumulative = 0.0;
    for t in 1..=1_000_000u64 {
        cumulative += schedule.slot_cost(t);
        if t.is_power_of_two() || t == 1_000_000 {
            println!("t={t:>7} eta={:.3e} cumulative={cumulative:.9}", schedule.eta(t));
        }
    }
    println!("series total = {:.12}", schedule.total());
    Ok(())
}
