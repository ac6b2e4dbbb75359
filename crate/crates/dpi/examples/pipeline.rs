//! A synthetic stream run end to end. Pass a directory to keep the exports.

use dpi_stream::{gen_synthetic, run_pipeline, RunConfig, DEFAULT_VARIANCES};

fn main() -> dpi_stream::Result<()> {
    let stream = gen_synthetic(200, 20, 100.0, &DEFAULT_VARIANCES, 11)?;
    let cfg = RunConfig {
        epsilon: 2.0,
        pool_trials: 2000,
        seed: 11,
        ..RunConfig::default()
    };
    let report = run_pipeline(&cfg, &stream)?;
    print!("{}", report.summary());
    for s in report.slots.iter().step_by(50) {
        println!(
            "slot {:>3}: eps {:.2e} kl {:.4} mse {:.2e} flagged {:?}",
            s.slot,
            s.eps,
            s.kl_inst.unwrap_or(f64::NAN),
            s.mse_inst.unwrap_or(f64::NAN),
            s.anomalies.flagged
        );
    }
    if let Some(dir) = std::env::args().nth(1) {
        report.write_dir(dir.as_ref())?;
        println!("exports written to {dir}");
    }
    Ok(())
}
