use destripe_core::scad::{
    concave_part, convex_objective, linearization_gradients, objective_g, scad_gradient, scad_value,
    DEFAULT_ALPHA,
};
use destripe_core::{ImageMatrix, ModelParams};
use proptest::prelude::*;

#[test]
fn continuous_at_both_breakpoints() {
    let a = DEFAULT_ALPHA;
    for lambda in [0.3, 1.0, 2.5, 40.0] {
        for t in [lambda, a * lambda] {
            for sign in [1.0, -1.0] {
                let x = sign * t;
                let inner = scad_value(x * (1.0 - 1e-15), a, lambda).unwrap();
                let outer = scad_value(x * (1.0 + 1e-15), a, lambda).unwrap();
                let at = scad_value(x, a, lambda).unwrap();
                assert!((inner - at).abs() <= 1e-12 * (1.0 + at), "lambda {lambda} t {x}");
                assert!((outer - at).abs() <= 1e-12 * (1.0 + at), "lambda {lambda} t {x}");
            }
        }
    }
    // Middle branch and outer branch agree at alpha * lambda.
    let mid = (a - 1.0) * (a - 1.0) / (2.0 * (a - 1.0));
    let out = a - 0.5 * (a + 1.0);
    assert!((mid - 1.35).abs() < 1e-12 && (out - 1.35).abs() < 1e-12);
    assert!((scad_value(3.7, a, 1.0).unwrap() - 1.35).abs() < 1e-12);
}

#[test]
fn rejects_bad_shape_parameters() {
    assert!(scad_value(1.0, 2.0, 1.0).is_err());
    assert!(scad_value(1.0, 3.7, 0.0).is_err());
    assert!(scad_value(f64::NAN, 3.7, 1.0).is_err());
}

fn away_from_breaks(t: f64, lambda: f64) -> bool {
    let a = t.abs();
    (a - lambda).abs() > 1e-3 && (a - DEFAULT_ALPHA * lambda).abs() > 1e-3 && a > 1e-3
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn gradient_matches_central_differences(t in -20.0..20.0f64, lambda in 0.1..4.0f64) {
        prop_assume!(away_from_breaks(t, lambda));
        let h = 1e-6;
        let fd = (scad_value(t + h, DEFAULT_ALPHA, lambda).unwrap()
            - scad_value(t - h, DEFAULT_ALPHA, lambda).unwrap()) / (2.0 * h);
        let g = scad_gradient(&[t], DEFAULT_ALPHA, lambda).unwrap()[0];
        prop_assert!((g - fd).abs() <= 1e-5 * (1.0 + g.abs()), "g {} fd {}", g, fd);
        prop_assert!(g.abs() <= lambda);
    }

    #[test]
    fn concave_part_is_dominated(t in -20.0..20.0f64, lambda in 0.1..4.0f64) {
        let q = scad_value(t, DEFAULT_ALPHA, lambda).unwrap();
        prop_assert!(q >= 0.0 && q <= lambda * t.abs() + 1e-12);
    }
}

#[test]
fn objective_splits_into_convex_minus_concave() {
    let f = ImageMatrix::from_fn(6, 5, |i, j| ((7 * i + 3 * j) % 11) as f64);
    let s = ImageMatrix::from_fn(6, 5, |i, j| if j % 2 == 0 { 2.0 + 0.1 * i as f64 } else { 0.0 });
    let p = ModelParams::new(0.7, 1.0, 1.3).unwrap();
    let g = objective_g(&s, &f, &p).unwrap();
    let dc = convex_objective(&s, &f, &p).unwrap() - concave_part(&s, &f, &p).unwrap();
    assert!((g - dc).abs() <= 1e-10 * (1.0 + g.abs()));
}

#[test]
fn linearization_gradient_is_directional_derivative() {
    let f = ImageMatrix::from_fn(7, 6, |i, j| ((5 * i + 2 * j) % 9) as f64 * 0.8);
    let s = ImageMatrix::from_fn(7, 6, |i, j| ((i * j) % 4) as f64 * 0.9 - 1.0);
    let d = ImageMatrix::from_fn(7, 6, |i, j| ((3 * i + j) % 5) as f64 - 2.0);
    let p = ModelParams::new(0.5, 1.0, 0.8).unwrap();
    let gr = linearization_gradients(&s, &f, &p).unwrap();
    // dQ/ds = g1 - g2 + v * g_h where v is the unit column direction.
    let norms = destripe_core::imagecore::column_norms(&s);
    let mut grad = gr.g1.sub(&gr.g2);
    for i in 0..7 {
        for j in 0..6 {
            grad.row_mut(i)[j] += gr.g_h[j] * s[(i, j)] / norms[j];
        }
    }
    let h = 1e-7;
    let fd = (concave_part(&s.add(&d.scale(h)), &f, &p).unwrap()
        - concave_part(&s.sub(&d.scale(h)), &f, &p).unwrap())
        / (2.0 * h);
    let an = grad.dot(&d);
    assert!((fd - an).abs() <= 1e-5 * (1.0 + an.abs()), "fd {fd} analytic {an}");
}
