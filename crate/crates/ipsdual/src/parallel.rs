//! Replica-parallel estimation. Samples are collected in replica order and
//! reduced sequentially, so the result does not depend on the thread count.

use ipsdual_core::error::Result;
use ipsdual_core::mc::Estimate;
use rayon::prelude::*;

/// Mean and standard error of `f(r)` over replicas `0..replicas`.
pub fn par_estimate<F>(replicas: u64, seed: u64, f: F) -> Result<Estimate>
where
    F: Fn(u64) -> Result<f64> + Sync + Send,
{
    let samples = (0..replicas).into_par_iter().map(f).collect::<Result<Vec<f64>>>()?;
    Estimate::from_samples(&samples, seed)
}

/// Componentwise estimates of a vector-valued observable of length `dim`.
pub fn par_estimate_vec<F>(replicas: u64, seed: u64, dim: usize, f: F) -> Result<Vec<Estimate>>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync + Send,
{
    let samples = (0..replicas).into_par_iter().map(f).collect::<Result<Vec<Vec<f64>>>>()?;
    (0..dim)
        .map(|k| {
            let column: Vec<f64> = samples.iter().map(|s| s[k]).collect();
            Estimate::from_samples(&column, seed)
        })
        .collect()
}

/// Runs `f` on a dedicated pool of `threads` workers (0 = rayon default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if threads == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}
