use dpi_stream::{empirical_pool_entropy, entropy_approximation, generate_pool, SynopsisPool};

fn main() -> dpi_stream::Result<()> {
    // Every composition of 4 trials over 3 categories.
    let full = SynopsisPool::exhaustive(4, 3)?;
    println!("exhaustive n=4 k=3: {} synopses", full.len());
    for s in full.synopses().iter().take(5) {
        println!("  #{:<2} counts {:?} pdf {:?}", s.id(), s.counts(), s.pdf().probs());
    }

    for (n, k) in [(6, 2), (8, 5), (2, 10)] {
        let pool = generate_pool(n, k, 10_000, 7)?;
        let h = empirical_pool_entropy(&pool);
        let approx = entropy_approximation(n, k);
        println!(
            "n={n:<2} k={k:<2} precision {:.3}  entropy {h:.4}  approx {approx:.4}  ratio {:.3}",
            pool.precision(),
            h / approx
        );
    }

    let pool = generate_pool(8, 3, 4, 1)?;
    let mut text = Vec::new();
    pool.write_to(&mut text)?;
    print!("{}", String::from_utf8_lossy(&text));
    Ok(())
}
