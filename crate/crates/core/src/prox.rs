//! Proximal operators of the destriping regularizers.
//!
//! `Prox_{w f}(y) = argmin_x { w f(x) + 1/2 ||x - y||^2 }`. The 1-D total
//! variation prox uses Condat's direct taut-string style scan, which is exact
//! and runs in linear time on typical inputs. The column/row TV proxes, the
//! composed prox of `p1 + 1/(2 sigma_tilde) ||. - s_k||^2` and the shifted
//! group soft-threshold are all built on top of it.

use crate::error::{dim_err, DestripeError, Result};
use crate::imagecore::ImageMatrix;

/// A prox step `sigma` paired with a regularizer scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxWeight {
    pub sigma: f64,
    pub weight: f64,
}

impl ProxWeight {
    pub fn new(sigma: f64, weight: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(DestripeError::InvalidParameter(format!(
                "prox step must be positive, got {sigma}"
            )));
        }
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(DestripeError::InvalidParameter(format!(
                "prox weight must be nonnegative, got {weight}"
            )));
        }
        Ok(Self { sigma, weight })
    }

    /// The threshold `sigma * weight` handed to the underlying prox.
    pub fn effective(&self) -> f64 {
        self.sigma * self.weight
    }
}

fn check_weight(w: f64, op: &'static str) -> Result<()> {
    if !w.is_finite() {
        return Err(DestripeError::NonFinite(op));
    }
    if w < 0.0 {
        return Err(DestripeError::InvalidParameter(format!(
            "{op}: weight must be nonnegative, got {w}"
        )));
    }
    Ok(())
}

/// Exact solution of `argmin_x w * sum |x_{i+1} - x_i| + 1/2 ||x - y||^2`,
/// written into `out` (same length as `y`).
pub fn tv1d_prox_into(y: &[f64], w: f64, out: &mut [f64]) {
    let width = y.len();
    assert_eq!(out.len(), width, "tv1d_prox_into: output length");
    if width == 0 {
        return;
    }
    if width == 1 || w == 0.0 || y.iter().all(|&v| v == y[0]) {
        out.copy_from_slice(y);
        return;
    }
    let lambda = w;
    let twolambda = 2.0 * lambda;
    let minlambda = -lambda;
    // k: current sample, k0: start of the current segment,
    // kplus/kminus: last positions where umax = -lambda / umin = lambda.
    let (mut k, mut k0, mut kplus, mut kminus) = (0usize, 0usize, 0usize, 0usize);
    // u is the running dual variable; [vmin, vmax] bounds the segment value.
    let mut umin = lambda;
    let mut umax = minlambda;
    let mut vmin = y[0] - lambda;
    let mut vmax = y[0] + lambda;
    loop {
        while k == width - 1 {
            if umin < 0.0 {
                // vmin too high: negative jump
                loop {
                    out[k0] = vmin;
                    k0 += 1;
                    if k0 > kminus {
                        break;
                    }
                }
                vmin = y[k0];
                kminus = k0;
                k = k0;
                umin = lambda;
                umax = vmin + umin - vmax;
            } else if umax > 0.0 {
                // vmax too low: positive jump
                loop {
                    out[k0] = vmax;
                    k0 += 1;
                    if k0 > kplus {
                        break;
                    }
                }
                vmax = y[k0];
                kplus = k0;
                k = k0;
                umax = minlambda;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / (k - k0 + 1) as f64;
                loop {
                    out[k0] = vmin;
                    k0 += 1;
                    if k0 > k {
                        break;
                    }
                }
                return;
            }
        }
        umin += y[k + 1] - vmin;
        if umin < minlambda {
            loop {
                out[k0] = vmin;
                k0 += 1;
                if k0 > kminus {
                    break;
                }
            }
            vmin = y[k0];
            kplus = k0;
            kminus = k0;
            k = k0;
            vmax = vmin + twolambda;
            umin = lambda;
            umax = minlambda;
            continue;
        }
        umax += y[k + 1] - vmax;
        if umax > lambda {
            loop {
                out[k0] = vmax;
                k0 += 1;
                if k0 > kplus {
                    break;
                }
            }
            vmax = y[k0];
            kplus = k0;
            kminus = k0;
            k = k0;
            vmin = vmax - twolambda;
            umin = lambda;
            umax = minlambda;
        } else {
            k += 1;
            if umin >= lambda {
                kminus = k;
                vmin += (umin - lambda) / (k - k0 + 1) as f64;
                umin = lambda;
            }
            if umax <= minlambda {
                kplus = k;
                vmax += (umax + lambda) / (k - k0 + 1) as f64;
                umax = minlambda;
            }
        }
    }
}

/// Allocating wrapper around [`tv1d_prox_into`] with argument checks.
pub fn tv1d_prox(y: &[f64], w: f64) -> Result<Vec<f64>> {
    check_weight(w, "tv1d_prox")?;
    if y.is_empty() {
        return Err(dim_err("tv1d_prox", "empty input"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(DestripeError::NonFinite("tv1d_prox"));
    }
    let mut out = vec![0.0; y.len()];
    tv1d_prox_into(y, w, &mut out);
    Ok(out)
}

/// Prox of `w * ||D_y .||_{1,1}`: the 1-D TV prox applied to every column.
pub fn prox_p1(s: &ImageMatrix, weight: f64) -> Result<ImageMatrix> {
    check_weight(weight, "prox_p1")?;
    let mut out = s.clone();
    if weight == 0.0 || s.rows() < 2 {
        return Ok(out);
    }
    let mut col = Vec::with_capacity(s.rows());
    let mut res = vec![0.0; s.rows()];
    for j in 0..s.cols() {
        s.column_into(j, &mut col);
        tv1d_prox_into(&col, weight, &mut res);
        out.set_column(j, &res);
    }
    Ok(out)
}

/// Prox of `w * ||D_x .||_{1,1}`: the 1-D TV prox applied to every row.
pub fn prox_p2(u: &ImageMatrix, weight: f64) -> Result<ImageMatrix> {
    check_weight(weight, "prox_p2")?;
    let mut out = u.clone();
    if weight == 0.0 || u.cols() < 2 {
        return Ok(out);
    }
    for i in 0..u.rows() {
        tv1d_prox_into(u.row(i), weight, out.row_mut(i));
    }
    Ok(out)
}

/// `Prox_{sigma p1_hat}(s)` where `p1_hat = p1 + 1/(2 sigma_tilde) ||. - s_k||^2`.
///
/// The two quadratics merge into one centred at
/// `s_hat = sigma_hat (s / sigma + s_k / sigma_tilde)` with step
/// `sigma_hat = sigma sigma_tilde / (sigma + sigma_tilde)`. An infinite
/// `sigma_tilde` drops the proximal term.
pub fn prox_p1_hat(
    s: &ImageMatrix,
    sigma: f64,
    sigma_tilde: f64,
    s_k: &ImageMatrix,
    lambda1: f64,
) -> Result<ImageMatrix> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(DestripeError::InvalidParameter(format!(
            "prox_p1_hat: sigma must be positive, got {sigma}"
        )));
    }
    if !(sigma_tilde > 0.0) || sigma_tilde.is_nan() {
        return Err(DestripeError::InvalidParameter(format!(
            "prox_p1_hat: sigma_tilde must be positive, got {sigma_tilde}"
        )));
    }
    if sigma_tilde.is_infinite() {
        return prox_p1(s, sigma * lambda1);
    }
    s.check_same_shape(s_k, "prox_p1_hat")?;
    let sigma_hat = sigma * sigma_tilde / (sigma + sigma_tilde);
    let (a, b) = (sigma_hat / sigma, sigma_hat / sigma_tilde);
    let s_hat = s.zip_map(s_k, |x, y| a * x + b * y);
    prox_p1(&s_hat, sigma_hat * lambda1)
}

/// `Prox_{sigma p3_hat}(s)` with `p3_hat(v) = sum_i (lambda3 - g_h[i]) ||v(:,i)||`:
/// a block soft-threshold of each column at `sigma (lambda3 - g_h[i])`.
pub fn prox_p3_hat(s: &ImageMatrix, sigma: f64, lambda3: f64, g_h: &[f64]) -> Result<ImageMatrix> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(DestripeError::InvalidParameter(format!(
            "prox_p3_hat: sigma must be positive, got {sigma}"
        )));
    }
    if g_h.len() != s.cols() {
        return Err(dim_err(
            "prox_p3_hat",
            format!("{} gradient entries for {} columns", g_h.len(), s.cols()),
        ));
    }
    if let Some((i, g)) = g_h
        .iter()
        .enumerate()
        .find(|(_, &g)| !(0.0..=lambda3).contains(&g))
    {
        return Err(DestripeError::Contract(format!(
            "prox_p3_hat: g_h[{i}] = {g} outside [0, {lambda3}]"
        )));
    }
    let norms = crate::imagecore::column_norms(s);
    let factors: Vec<f64> = norms
        .iter()
        .zip(g_h)
        .map(|(&nrm, &g)| {
            let w = sigma * (lambda3 - g);
            if w == 0.0 {
                1.0
            } else if nrm <= w {
                0.0
            } else {
                1.0 - w / nrm
            }
        })
        .collect();
    let mut out = s.clone();
    for i in 0..out.rows() {
        for (v, c) in out.row_mut(i).iter_mut().zip(&factors) {
            *v *= c;
        }
    }
    Ok(out)
}

/// Conjugate prox through the Moreau identity.
///
/// Given `prox = Prox_{sigma f}`, returns `(x - prox(x)) / sigma`, which is
/// `Prox_{f*/sigma}(x / sigma)`.
pub fn conjugate_prox_via_moreau<F>(prox: F, x: &ImageMatrix, sigma: f64) -> Result<ImageMatrix>
where
    F: FnOnce(&ImageMatrix) -> Result<ImageMatrix>,
{
    Ok(moreau_split(prox, x, sigma)?.1)
}

/// Returns both `Prox_{sigma f}(x)` and the conjugate part `(x - prox) / sigma`.
pub fn moreau_split<F>(prox: F, x: &ImageMatrix, sigma: f64) -> Result<(ImageMatrix, ImageMatrix)>
where
    F: FnOnce(&ImageMatrix) -> Result<ImageMatrix>,
{
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(DestripeError::InvalidParameter(format!(
            "moreau: sigma must be positive, got {sigma}"
        )));
    }
    let p = prox(x)?;
    x.check_same_shape(&p, "moreau")?;
    let inv = 1.0 / sigma;
    let conj = x.zip_map(&p, |a, b| inv * (a - b));
    Ok((p, conj))
}
