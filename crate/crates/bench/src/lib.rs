//! Benchmark-only crate: see `benches/hot_paths.rs`. Shared helpers for the
//! benchmarks live here so the bench target stays a thin driver.

use longtail::data::{sample_gaussian_mixture, GaussianMixtureSpec};
use longtail::LabeledDataset;

/// A small 3-class mixture matching the shape the training benchmarks use.
pub fn bench_mixture(seed: u64, per_class: usize) -> LabeledDataset {
    let k = 3;
    let means = (0..k)
        .map(|c| {
            let angle = std::f64::consts::TAU * c as f64 / k as f64;
            vec![angle.cos(), angle.sin()]
        })
        .collect();
    sample_gaussian_mixture(
        &GaussianMixtureSpec {
            num_classes: k,
            dim: 2,
            means,
            stddev: 0.6,
            seed,
        },
        &vec![per_class; k],
    )
    .expect("valid mixture spec")
}
