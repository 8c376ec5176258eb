//! End-to-end experiments: toy posterior recovery at a single observation
//! and the 1-D denoising benchmark, plus metrics and report writers.

mod bench;
mod toy;

pub use bench::{
    run_denoise_benchmark, BenchConfig, BenchRow, BenchTrainSettings, BenchmarkTable, Precision,
    TraceColumn,
};
pub use toy::{run_toy_posterior, MlpSettings, RouteResult, ToyArtifacts, ToyConfig, ToyCurves, ToyReport};

use crate::Real;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Prior(#[from] crate::prior::PriorError),
    #[error(transparent)]
    Oracle(#[from] crate::oracle::OracleError),
    #[error(transparent)]
    Recursion(#[from] crate::recursion::RecursionError),
    #[error(transparent)]
    Reconstruct(#[from] crate::reconstruct::ReconstructError),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error("training failed: {0}")]
    Train(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("serialization failed: {0}")]
    Serde(#[from] serde_json::Error),
}

/// `(psnr_db, mse)` for signals normalized to a peak of 1. PSNR is capped at
/// 100 dB once the MSE drops below 1e-10.
pub fn metrics<R: Real>(estimate: &[R], truth: &[R]) -> Result<(f64, f64), HarnessError> {
    if estimate.len() != truth.len() {
        return Err(HarnessError::LengthMismatch(estimate.len(), truth.len()));
    }
    if estimate.is_empty() {
        return Err(HarnessError::LengthMismatch(0, 0));
    }
    let mse = estimate
        .iter()
        .zip(truth)
        .map(|(&a, &b)| (a.to64() - b.to64()).powi(2))
        .sum::<f64>()
        / estimate.len() as f64;
    let psnr = if mse < 1e-10 { 100.0 } else { 10.0 * (1.0 / mse).log10() };
    Ok((psnr, mse))
}

/// Writes through a temp file in the same directory then renames, so
/// readers never observe partial output.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

/// Serializes any JSON value into `<dir>/manifest.json` atomically.
pub fn write_manifest(dir: &Path, manifest: &serde_json::Value) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    let bytes = serde_json::to_vec_pretty(manifest)?;
    atomic_write(&dir.join("manifest.json"), &bytes)?;
    Ok(())
}
