use dpi_stream::budget::{BudgetState, RangeQueues, DEFAULT_LAMBDA_RATE};
use dpi_stream::rng::stream_rng;
use dpi_stream::{DecaySeriesConfig, OptimalSchedule};

fn main() -> dpi_stream::Result<()> {
    for eps in [2.0, 10.0] {
        let schedule = OptimalSchedule::new(DecaySeriesConfig::new(eps, 0.1, 0.05)?);
        let mut state = BudgetState::from_schedule(&schedule, 100_000, DEFAULT_LAMBDA_RATE)?;
        let mut rng = stream_rng(3, 0);
        let mut spent = 0.0;
        for _ in 0..500 {
            spent += state.sample(&mut rng)?.budget;
        }
        println!(
            "eps={eps:<4} spent {spent:.3e} over 500 slots, remaining mass {:.6}",
            state.remaining_mass()
        );

        // Same series, three queues by size.
        let values: Vec<f64> = schedule.costs(10_000).collect();
        let mut queues = RangeQueues::from_series(&values);
        let mut hits = [0usize; 3];
        for _ in 0..500 {
            hits[queues.sample(&mut rng)?.0] += 1;
        }
        println!("  range allocation picks small/medium/large = {hits:?}");
    }
    Ok(())
}
