//! Full-reference quality metrics.
//!
//! SSIM here is the global index: means, variances and the covariance are
//! taken over the whole image with `1/(mn - 1)` normalization. It is not the
//! windowed SSIM of most imaging toolkits and gives different numbers.

use crate::error::{DestripeError, Result};
use crate::imagecore::ImageMatrix;

pub const DEFAULT_K1: f64 = 0.01;
pub const DEFAULT_K2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub mse: f64,
    /// `+inf` for identical images.
    pub psnr: f64,
    pub ssim: f64,
}

pub fn mse(u: &ImageMatrix, v: &ImageMatrix) -> Result<f64> {
    u.check_same_shape(v, "mse")?;
    if u.is_empty() {
        return Err(DestripeError::InvalidParameter("mse of an empty image".into()));
    }
    let sum: f64 = u
        .as_slice()
        .iter()
        .zip(v.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / u.len() as f64)
}

/// `10 log10(peak^2 / mse)`; identical images give `f64::INFINITY`.
pub fn psnr(u: &ImageMatrix, v: &ImageMatrix, peak: f64) -> Result<f64> {
    if !(peak.is_finite() && peak > 0.0) {
        return Err(DestripeError::InvalidParameter(format!("peak must be positive, got {peak}")));
    }
    let e = mse(u, v)?;
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / e).log10())
}

/// Global SSIM with `L` taken from `u.peak()`.
pub fn ssim(u: &ImageMatrix, v: &ImageMatrix) -> Result<f64> {
    ssim_with(u, v, DEFAULT_K1, DEFAULT_K2, u.peak())
}

pub fn ssim_with(u: &ImageMatrix, v: &ImageMatrix, k1: f64, k2: f64, peak: f64) -> Result<f64> {
    u.check_same_shape(v, "ssim")?;
    let n = u.len();
    if n < 2 {
        return Err(DestripeError::InvalidParameter(
            "ssim needs at least two pixels".into(),
        ));
    }
    if !(peak > 0.0 && k1 > 0.0 && k2 > 0.0) {
        return Err(DestripeError::InvalidParameter(format!(
            "ssim constants must be positive (k1 {k1}, k2 {k2}, L {peak})"
        )));
    }
    let (a, b) = (u.as_slice(), v.as_slice());
    let mu_u = a.iter().sum::<f64>() / n as f64;
    let mu_v = b.iter().sum::<f64>() / n as f64;
    let (mut var_u, mut var_v, mut cov) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - mu_u, y - mu_v);
        var_u += dx * dx;
        var_v += dy * dy;
        cov += dx * dy;
    }
    let norm = 1.0 / (n - 1) as f64;
    let (var_u, var_v, cov) = (var_u * norm, var_v * norm, cov * norm);
    let c1 = (k1 * peak).powi(2);
    let c2 = (k2 * peak).powi(2);
    Ok((2.0 * mu_u * mu_v + c1) * (2.0 * cov + c2)
        / ((mu_u * mu_u + mu_v * mu_v + c1) * (var_u + var_v + c2)))
}

/// All three metrics of `estimate` against `reference`, with the peak of
/// `reference`.
pub fn evaluate(estimate: &ImageMatrix, reference: &ImageMatrix) -> Result<MetricReport> {
    let peak = reference.peak();
    Ok(MetricReport {
        mse: mse(estimate, reference)?,
        psnr: psnr(estimate, reference, peak)?,
        ssim: ssim_with(reference, estimate, DEFAULT_K1, DEFAULT_K2, peak)?,
    })
}
