//! SCAD concave parts, the three convex regularizers and the nonconvex
//! objective built from their difference.
//!
//! The SCAD penalty is written in DC form `lambda*|t| - q(t)`, where `q` is
//! the convex, continuously differentiable function evaluated by
//! [`scad_value`]. The destriping model applies it to the vertical
//! differences of the stripe component, the horizontal differences of the
//! clean image and the column norms of the stripe component.

use crate::error::{dim_err, DestripeError, Result};
use crate::imagecore::{column_norms, diff_x, diff_x_adjoint, diff_y, diff_y_adjoint, ImageMatrix};

pub const DEFAULT_ALPHA: f64 = 3.7;

/// Regularization weights and the SCAD shape parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Weight of `||D_y s||_1` (vertical smoothness of the stripes).
    pub lambda1: f64,
    /// Weight of `||D_x u||_1` (horizontal smoothness of the clean image).
    pub lambda2: f64,
    /// Weight of `||s||_{2,1}` (column group sparsity).
    pub lambda3: f64,
    pub alpha: f64,
}

impl ModelParams {
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64) -> Result<Self> {
        Self::with_alpha(lambda1, lambda2, lambda3, DEFAULT_ALPHA)
    }

    pub fn with_alpha(lambda1: f64, lambda2: f64, lambda3: f64, alpha: f64) -> Result<Self> {
        let p = Self {
            lambda1,
            lambda2,
            lambda3,
            alpha,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(DestripeError::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.alpha.is_finite() && self.alpha > 2.0) {
            return Err(DestripeError::InvalidParameter(format!(
                "alpha must exceed 2, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// The same model with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            lambda1: self.lambda1 * factor,
            lambda2: self.lambda2 * factor,
            lambda3: self.lambda3 * factor,
            alpha: self.alpha,
        }
    }

    /// `p1(s) = lambda1 * ||D_y s||_{1,1}`
    pub fn p1(&self, s: &ImageMatrix) -> Result<f64> {
        Ok(self.lambda1 * diff_y(s)?.norm_l1())
    }

    /// `p2(u) = lambda2 * ||D_x u||_{1,1}`, taken on the clean image `u = f - s`.
    pub fn p2(&self, u: &ImageMatrix) -> Result<f64> {
        Ok(self.lambda2 * diff_x(u)?.norm_l1())
    }

    /// `p3(v) = lambda3 * ||v||_{2,1}`
    pub fn p3(&self, v: &ImageMatrix) -> f64 {
        self.lambda3 * v.norm_l21()
    }
}

fn check_scad_args(alpha: f64, lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(DestripeError::InvalidParameter(format!(
            "SCAD lambda must be positive, got {lambda}"
        )));
    }
    if !(alpha.is_finite() && alpha > 2.0) {
        return Err(DestripeError::InvalidParameter(format!(
            "SCAD alpha must exceed 2, got {alpha}"
        )));
    }
    Ok(())
}

#[inline]
fn scad_value_unchecked(t: f64, alpha: f64, lambda: f64) -> f64 {
    let a = t.abs();
    if a <= lambda {
        0.0
    } else if a <= alpha * lambda {
        (a - lambda) * (a - lambda) / (2.0 * (alpha - 1.0))
    } else {
        lambda * a - 0.5 * (alpha + 1.0) * lambda * lambda
    }
}

#[inline]
fn scad_grad_unchecked(t: f64, alpha: f64, lambda: f64) -> f64 {
    let a = t.abs();
    if a <= lambda {
        0.0
    } else if a <= alpha * lambda {
        t.signum() * (a - lambda) / (alpha - 1.0)
    } else {
        lambda * t.signum()
    }
}

/// `lambda*|t| - q(t)`: the SCAD penalty itself, evaluated per branch so that
/// it stays nonnegative without cancellation.
#[inline]
fn scad_penalty_unchecked(t: f64, alpha: f64, lambda: f64) -> f64 {
    let a = t.abs();
    if a <= lambda {
        lambda * a
    } else if a <= alpha * lambda {
        lambda * a - (a - lambda) * (a - lambda) / (2.0 * (alpha - 1.0))
    } else {
        0.5 * (alpha + 1.0) * lambda * lambda
    }
}

/// Concave-part value `q^scad(t; alpha, lambda)`.
pub fn scad_value(t: f64, alpha: f64, lambda: f64) -> Result<f64> {
    check_scad_args(alpha, lambda)?;
    if !t.is_finite() {
        return Err(DestripeError::NonFinite("scad_value"));
    }
    Ok(scad_value_unchecked(t, alpha, lambda))
}

/// `q_{alpha,lambda}(x) = sum_i q^scad(x_i)`.
pub fn scad_sum(x: &[f64], alpha: f64, lambda: f64) -> Result<f64> {
    check_scad_args(alpha, lambda)?;
    if x.iter().any(|t| !t.is_finite()) {
        return Err(DestripeError::NonFinite("scad_sum"));
    }
    Ok(x.iter().map(|&t| scad_value_unchecked(t, alpha, lambda)).sum())
}

/// Elementwise gradient of `q_{alpha,lambda}`. Every entry has magnitude at
/// most `lambda`.
pub fn scad_gradient(x: &[f64], alpha: f64, lambda: f64) -> Result<Vec<f64>> {
    check_scad_args(alpha, lambda)?;
    Ok(x.iter().map(|&t| scad_grad_unchecked(t, alpha, lambda)).collect())
}

fn scad_gradient_matrix(x: &ImageMatrix, alpha: f64, lambda: f64) -> ImageMatrix {
    x.map(|t| scad_grad_unchecked(t, alpha, lambda))
}

fn scad_penalty_sum(x: &[f64], alpha: f64, lambda: f64) -> f64 {
    x.iter().map(|&t| scad_penalty_unchecked(t, alpha, lambda)).sum()
}

/// Gradients of the concave parts, frozen at the current outer iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizationGradients {
    /// Gradient of `q1(s) = q(D_y s)` with respect to `s`.
    pub g1: ImageMatrix,
    /// Gradient of `q2(u) = q(D_x u)` with respect to `u`, at `u = f - s_k`.
    pub g2: ImageMatrix,
    /// Gradient of `q` at the column norms `h(s_k)`; entries lie in `[0, lambda3]`.
    pub g_h: Vec<f64>,
}

impl LinearizationGradients {
    /// All-zero gradients, which turn the subproblem into the convex model.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            g1: ImageMatrix::zeros(rows, cols),
            g2: ImageMatrix::zeros(rows, cols),
            g_h: vec![0.0; cols],
        }
    }
}

pub fn linearization_gradients(
    s_k: &ImageMatrix,
    f: &ImageMatrix,
    params: &ModelParams,
) -> Result<LinearizationGradients> {
    s_k.check_same_shape(f, "linearization_gradients")?;
    params.validate()?;
    let a = params.alpha;
    let g1 = diff_y_adjoint(&scad_gradient_matrix(&diff_y(s_k)?, a, params.lambda1))?;
    let u_k = f.sub(s_k);
    let g2 = diff_x_adjoint(&scad_gradient_matrix(&diff_x(&u_k)?, a, params.lambda2))?;
    let g_h = scad_gradient(&column_norms(s_k), a, params.lambda3)?;
    Ok(LinearizationGradients { g1, g2, g_h })
}

/// `q1(s) + q2(f - s) + q3(s)`, the concave part `Q`.
pub fn concave_part(s: &ImageMatrix, f: &ImageMatrix, params: &ModelParams) -> Result<f64> {
    s.check_same_shape(f, "concave_part")?;
    let a = params.alpha;
    let q1 = scad_sum(diff_y(s)?.as_slice(), a, params.lambda1)?;
    let q2 = scad_sum(diff_x(&f.sub(s))?.as_slice(), a, params.lambda2)?;
    let q3 = scad_sum(&column_norms(s), a, params.lambda3)?;
    Ok(q1 + q2 + q3)
}

/// The nonconvex objective `g(s) = P(s) - Q(s)`.
pub fn objective_g(s: &ImageMatrix, f: &ImageMatrix, params: &ModelParams) -> Result<f64> {
    s.check_same_shape(f, "objective_g")?;
    params.validate()?;
    if !s.is_finite() || !f.is_finite() {
        return Err(DestripeError::NonFinite("objective_g"));
    }
    let a = params.alpha;
    let t1 = scad_penalty_sum(diff_y(s)?.as_slice(), a, params.lambda1);
    let t2 = scad_penalty_sum(diff_x(&f.sub(s))?.as_slice(), a, params.lambda2);
    let t3 = scad_penalty_sum(&column_norms(s), a, params.lambda3);
    Ok(t1 + t2 + t3)
}

/// The convex model `p1(s) + p2(f - s) + p3(s)`.
pub fn convex_objective(s: &ImageMatrix, f: &ImageMatrix, params: &ModelParams) -> Result<f64> {
    s.check_same_shape(f, "convex_objective")?;
    if f.rows() < 2 || f.cols() < 2 {
        return Err(dim_err("convex_objective", "need at least 2x2"));
    }
    Ok(params.p1(s)? + params.p2(&f.sub(s))? + params.p3(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scad_value_examples() {
        assert_eq!(scad_value(0.5, 3.7, 1.0).unwrap(), 0.0);
        let v = scad_value(2.0, 3.7, 1.0).unwrap();
        assert!((v - 1.0 / 5.4).abs() < 1e-15);
        // both outer branches agree at the upper breakpoint
        let t: f64 = 3.7;
        let mid = (t - 1.0) * (t - 1.0) / (2.0 * 2.7);
        let last = t - 0.5 * 4.7;
        assert!((mid - 1.35).abs() < 1e-12);
        assert!((last - 1.35).abs() < 1e-12);
        assert!((scad_value(3.7, 3.7, 1.0).unwrap() - 1.35).abs() < 1e-12);
    }

    #[test]
    fn scad_value_rejects_bad_input() {
        assert!(matches!(
            scad_value(f64::NAN, 3.7, 1.0),
            Err(DestripeError::NonFinite(_))
        ));
        assert!(scad_value(1.0, 2.0, 1.0).is_err());
        assert!(scad_value(1.0, 3.7, 0.0).is_err());
    }

    #[test]
    fn scad_gradient_examples() {
        let g = scad_gradient(&[0.3, 2.0, 10.0, -2.0, -10.0], 3.7, 1.0).unwrap();
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 1.0 / 2.7).abs() < 1e-15);
        assert_eq!(g[2], 1.0);
        assert!((g[3] + 1.0 / 2.7).abs() < 1e-15);
        assert_eq!(g[4], -1.0);
    }

    #[test]
    fn model_params_validation() {
        assert!(ModelParams::new(1.0, 1.0, 1.0).is_ok());
        assert!(ModelParams::new(0.0, 1.0, 1.0).is_err());
        assert!(ModelParams::with_alpha(1.0, 1.0, 1.0, 2.0).is_err());
        assert!(ModelParams::with_alpha(1.0, 1.0, 1.0, 2.5).is_ok());
    }

    #[test]
    fn gradients_vanish_at_zero() {
        let p = ModelParams::new(0.5, 0.7, 0.9).unwrap();
        let z = ImageMatrix::zeros(4, 3);
        let g = linearization_gradients(&z, &z, &p).unwrap();
        assert_eq!(g, LinearizationGradients::zeros(4, 3));

        // small horizontal variation of f stays in the first SCAD branch
        let f = ImageMatrix::from_fn(4, 3, |i, j| 0.1 * ((i + 2 * j) % 3) as f64);
        let g = linearization_gradients(&z, &f, &p).unwrap();
        assert_eq!(g.g2.norm_inf(), 0.0);
    }

    #[test]
    fn g_h_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = ModelParams::new(0.3, 0.3, 0.4).unwrap();
        let s = ImageMatrix::from_fn(6, 9, |_, _| rng.gen_range(-1.0..1.0));
        let f = ImageMatrix::from_fn(6, 9, |_, _| rng.gen_range(-1.0..1.0));
        let g = linearization_gradients(&s, &f, &p).unwrap();
        assert!(g.g_h.iter().all(|&v| (0.0..=p.lambda3).contains(&v)));
    }

    #[test]
    fn objective_examples() {
        let p = ModelParams::new(0.5, 0.7, 0.9).unwrap();
        let z = ImageMatrix::zeros(5, 4);
        assert_eq!(objective_g(&z, &z, &p).unwrap(), 0.0);
        assert_eq!(convex_objective(&z, &z, &p).unwrap(), 0.0);

        // at s = 0 only the p2/q2 pair depends on f
        let f = ImageMatrix::from_fn(5, 4, |i, j| (i * j) as f64 * 0.6 - 1.0);
        let expected: f64 = diff_x(&f)
            .unwrap()
            .as_slice()
            .iter()
            .map(|&t| p.lambda2 * t.abs() - scad_value(t, p.alpha, p.lambda2).unwrap())
            .sum();
        assert!((objective_g(&z, &f, &p).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn convex_objective_constant_rows() {
        // f with constant rows, s = f: the horizontal term vanishes
        let p = ModelParams::new(0.5, 0.7, 0.9).unwrap();
        let f = ImageMatrix::from_fn(4, 3, |i, _| (i * i) as f64 - 1.5);
        let expected = p.lambda3 * f.norm_l21() + p.lambda1 * diff_y(&f).unwrap().norm_l1();
        assert!((convex_objective(&f, &f, &p).unwrap() - expected).abs() < 1e-12);
    }
}
