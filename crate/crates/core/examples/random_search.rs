// Randomized search for a von Neumann violation among 2×2 and 3×3 tuples.

use polypick::vn::{random_search, SearchConfig};

pub fn run_example() -> polypick::Result<()> {
    let config = SearchConfig { sizes: vec![2, 3], d: 3, trials: 40, max_degree: 3, seed: 7, grid: Some(12), threads: 0 };
    let report = random_search(&config)?;
    println!("{} trials, {} skipped, max ratio {:.9}", report.trials, report.skipped, report.max_ratio);
    for (n, h) in &report.histogram {
        println!("  {n}×{n}: {} trials, max {:.6}", h.trials, h.max_ratio);
    }
    if let Some(w) = &report.witness {
        println!("largest ratio at trial {}", w.trial);
    }
    assert!(report.holds(1e-6));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
