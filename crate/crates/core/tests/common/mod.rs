//! Slow reference solvers used only to cross-check the library.
#![allow(dead_code)]

use destripe_core::imagecore::{column_norms, ImageMatrix};
use destripe_core::scad::ModelParams;

/// Minimizes `sum_a c_a/2 ||x - y_a||^2 + w * sum_i |x_{i+1} - x_i|` by projected
/// coordinate descent on the dual variable of the difference operator.
///
/// With `b = sum_a c_a y_a` and `C = sum_a c_a` the primal is recovered as
/// `x = (b - D^T p) / C`.
pub fn tv_dual_cd(terms: &[(f64, &[f64])], w: f64) -> Vec<f64> {
    let n = terms[0].1.len();
    let c_total: f64 = terms.iter().map(|t| t.0).sum();
    let mut r = vec![0.0; n];
    for (c, y) in terms {
        for (ri, yi) in r.iter_mut().zip(y.iter()) {
            *ri += c * yi;
        }
    }
    if n == 1 {
        return r.iter().map(|v| v / c_total).collect();
    }
    let mut p = vec![0.0; n - 1];
    for _sweep in 0..2_000_000 {
        let mut max_step: f64 = 0.0;
        // forward then backward sweep to speed up propagation
        for pass in 0..2 {
            for k in 0..n - 1 {
                let i = if pass == 0 { k } else { n - 2 - k };
                let target = (p[i] + (r[i + 1] - r[i]) / 2.0).clamp(-w, w);
                let d = target - p[i];
                if d != 0.0 {
                    p[i] = target;
                    r[i] += d;
                    r[i + 1] -= d;
                    max_step = max_step.max(d.abs());
                }
            }
        }
        if max_step < 1e-14 * (1.0 + w) {
            break;
        }
    }
    r.iter().map(|v| v / c_total).collect()
}

/// Convex model objective evaluated directly from its definition.
pub fn convex_objective_ref(s: &ImageMatrix, f: &ImageMatrix, p: &ModelParams) -> f64 {
    let (m, n) = s.shape();
    let mut t1 = 0.0;
    for i in 0..m - 1 {
        for j in 0..n {
            t1 += (s[(i + 1, j)] - s[(i, j)]).abs();
        }
    }
    let mut t2 = 0.0;
    for i in 0..m {
        for j in 0..n - 1 {
            let u1 = f[(i, j + 1)] - s[(i, j + 1)];
            let u0 = f[(i, j)] - s[(i, j)];
            t2 += (u1 - u0).abs();
        }
    }
    let t3: f64 = column_norms(s).iter().sum();
    p.lambda1 * t1 + p.lambda2 * t2 + p.lambda3 * t3
}

/// Minimizes the convex destriping objective with a first-order primal-dual
/// (Chambolle-Pock) iteration on `K s = (D_y s, D_x s, s)`. Returns the best
/// iterate seen and its objective.
pub fn convex_primal_dual(f: &ImageMatrix, p: &ModelParams, iters: usize) -> (ImageMatrix, f64) {
    let (m, n) = f.shape();
    let step = 1.0 / 3.1; // step^2 * ||K||^2 < 1 with ||K||^2 <= 9
    let mut s = ImageMatrix::zeros(m, n);
    let mut s_bar = s.clone();
    let mut a = vec![0.0; (m - 1) * n];
    let mut b = vec![0.0; m * (n - 1)];
    let mut c = vec![0.0; m * n];
    let fx: Vec<f64> = (0..m)
        .flat_map(|i| (0..n - 1).map(move |j| (i, j)))
        .map(|(i, j)| f[(i, j + 1)] - f[(i, j)])
        .collect();
    let mut best = (s.clone(), convex_objective_ref(&s, f, p));
    for it in 0..iters {
        for i in 0..m - 1 {
            for j in 0..n {
                let k = i * n + j;
                a[k] = (a[k] + step * (s_bar[(i + 1, j)] - s_bar[(i, j)])).clamp(-p.lambda1, p.lambda1);
            }
        }
        for i in 0..m {
            for j in 0..n - 1 {
                let k = i * (n - 1) + j;
                let t = b[k] + step * (s_bar[(i, j + 1)] - s_bar[(i, j)] - fx[k]);
                b[k] = t.clamp(-p.lambda2, p.lambda2);
            }
        }
        for j in 0..n {
            let mut nrm = 0.0;
            for i in 0..m {
                let k = i * n + j;
                c[k] += step * s_bar[(i, j)];
                nrm += c[k] * c[k];
            }
            let nrm = f64::sqrt(nrm);
            if nrm > p.lambda3 {
                for i in 0..m {
                    c[i * n + j] *= p.lambda3 / nrm;
                }
            }
        }
        let prev = s.clone();
        for i in 0..m {
            for j in 0..n {
                let mut kt = c[i * n + j];
                if i > 0 {
                    kt += a[(i - 1) * n + j];
                }
                if i < m - 1 {
                    kt -= a[i * n + j];
                }
                if j > 0 {
                    kt += b[i * (n - 1) + j - 1];
                }
                if j < n - 1 {
                    kt -= b[i * (n - 1) + j];
                }
                s[(i, j)] -= step * kt;
            }
        }
        s_bar = s.zip_map(&prev, |x, y| 2.0 * x - y);
        if it % 50 == 0 || it + 1 == iters {
            let obj = convex_objective_ref(&s, f, p);
            if obj < best.1 {
                best = (s.clone(), obj);
            }
        }
    }
    best
}
