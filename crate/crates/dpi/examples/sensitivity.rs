//! Normalized outputs bound the ℓ1 change caused by one user at 2.

use dpi_stream::{kl_divergence, l1_distance, mse, normalize, CountVector, SensitivityBound};

fn main() -> dpi_stream::Result<()> {
    let before = CountVector::new(vec![40, 25, 20, 15]);
    let mut after = before.clone();
    after.add(&CountVector::new(vec![0, 0, 0, 1]))?;

    let p = normalize(&before)?;
    let q = normalize(&after)?;
    println!("p = {:?}", p.probs());
    println!("q = {:?}", q.probs());
    println!("l1  = {:.6}", l1_distance(&p, &q)?);
    println!("mse = {:.3e}", mse(&p, &q)?);
    println!("kl  = {:.3e}", kl_divergence(&p, &q, 1e-6)?);

    let a = normalize(&CountVector::new(vec![1, 0]))?;
    let b = normalize(&CountVector::new(vec![0, 1]))?;
    println!(
        "worst case l1 = {} (bound {})",
        l1_distance(&a, &b)?,
        SensitivityBound.delta_q()
    );
    Ok(())
}
