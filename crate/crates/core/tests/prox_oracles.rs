mod common;

use common::tv_dual_cd;
use destripe_core::imagecore::column_norms;
use destripe_core::prox::{moreau_split, prox_p1, prox_p1_hat, prox_p2, prox_p3_hat, tv1d_prox};
use destripe_core::ImageMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> ImageMatrix {
    ImageMatrix::from_fn(m, n, |_, _| rng.gen_range(-2.0..2.0))
}

#[test]
fn condat_matches_dual_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let n = rng.gen_range(1..=64);
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let w = rng.gen_range(0.0..2.0);
        let fast = tv1d_prox(&y, w).unwrap();
        let slow = tv_dual_cd(&[(1.0, &y)], w);
        let err = fast.iter().zip(&slow).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(err < 1e-6, "n={n} w={w} err={err}");
    }
}

#[test]
fn p1_hat_matches_two_quadratic_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..50 {
        let (m, n) = (rng.gen_range(2..=8), rng.gen_range(1..=6));
        let s = random_matrix(&mut rng, m, n);
        let sk = random_matrix(&mut rng, m, n);
        let (sigma, sigma_t) = if case == 0 { (1.0, 1.0) } else { (rng.gen_range(0.2..3.0), rng.gen_range(0.2..3.0)) };
        let lambda = rng.gen_range(0.0..1.5);
        let got = prox_p1_hat(&s, sigma, sigma_t, &sk, lambda).unwrap();
        for j in 0..n {
            let (a, b) = (s.column(j), sk.column(j));
            let want = tv_dual_cd(&[(1.0 / sigma, &a), (1.0 / sigma_t, &b)], lambda);
            for i in 0..m {
                assert!((got[(i, j)] - want[i]).abs() < 1e-6, "case {case} ({i},{j})");
            }
        }
    }
}

#[test]
fn p1_hat_limits() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = random_matrix(&mut rng, 6, 4);
    let sk = random_matrix(&mut rng, 6, 4);
    let inf = prox_p1_hat(&s, 0.7, f64::INFINITY, &sk, 0.9).unwrap();
    assert_eq!(inf, prox_p1(&s, 0.7 * 0.9).unwrap());
    // s = s_k collapses the merged centre back to s.
    let same = prox_p1_hat(&s, 0.7, 2.0, &s, 0.9).unwrap();
    let sigma_hat = 0.7 * 2.0 / 2.7;
    assert!(same.max_abs_diff(&prox_p1(&s, sigma_hat * 0.9).unwrap()) < 1e-14);
}

#[test]
fn p2_is_row_tv() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let u = random_matrix(&mut rng, 5, 9);
    let got = prox_p2(&u, 0.4).unwrap();
    for i in 0..5 {
        let want = tv_dual_cd(&[(1.0, u.row(i))], 0.4);
        for j in 0..9 {
            assert!((got[(i, j)] - want[j]).abs() < 1e-6);
        }
    }
}

#[test]
fn p3_hat_shrinks_columns() {
    let s = ImageMatrix::from_rows(&[[3.0, 0.1, 1.0], [4.0, 0.1, 0.0]]);
    let out = prox_p3_hat(&s, 1.0, 2.0, &[0.0, 0.0, 1.5]).unwrap();
    // column 0 has norm 5 -> scaled by 3/5; column 1 vanishes; column 2 uses weight 0.5.
    assert!((out[(0, 0)] - 1.8).abs() < 1e-14 && (out[(1, 0)] - 2.4).abs() < 1e-14);
    assert_eq!(out.column(1), vec![0.0, 0.0]);
    assert!((out[(0, 2)] - 0.5).abs() < 1e-14);
    assert!(prox_p3_hat(&s, 1.0, 2.0, &[0.0, 0.0, 2.5]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tv_prox_preserves_mean(y in prop::collection::vec(-5.0..5.0f64, 1..64), w in 0.0..3.0f64) {
        let x = tv1d_prox(&y, w).unwrap();
        let (my, mx) = (y.iter().sum::<f64>() / y.len() as f64, x.iter().sum::<f64>() / x.len() as f64);
        prop_assert!((my - mx).abs() <= 1e-10);
    }

    #[test]
    fn moreau_reconstruction(data in prop::collection::vec(-5.0..5.0f64, 12..=12), sigma in 0.1..3.0f64, lambda in 0.0..2.0f64) {
        let x = ImageMatrix::from_vec(4, 3, data).unwrap();
        let (p, conj) = moreau_split(|v| prox_p1(v, sigma * lambda), &x, sigma).unwrap();
        let back = p.add(&conj.scale(sigma));
        prop_assert!(back.max_abs_diff(&x) <= 1e-12);
        // The conjugate part is D_y^T q with |q| <= lambda: its running column
        // sums stay inside [-lambda, lambda] and each column sums to zero.
        for j in 0..3 {
            let mut acc = 0.0;
            for i in 0..4 {
                acc += conj[(i, j)];
                prop_assert!(acc.abs() <= lambda + 1e-9);
            }
            prop_assert!(acc.abs() <= 1e-9);
        }
    }

    #[test]
    fn prox_p3_is_nonexpansive(a in prop::collection::vec(-3.0..3.0f64, 12..=12), b in prop::collection::vec(-3.0..3.0f64, 12..=12)) {
        let a = ImageMatrix::from_vec(3, 4, a).unwrap();
        let b = ImageMatrix::from_vec(3, 4, b).unwrap();
        let g = [0.0, 0.2, 0.5, 1.0];
        let pa = prox_p3_hat(&a, 0.8, 1.0, &g).unwrap();
        let pb = prox_p3_hat(&b, 0.8, 1.0, &g).unwrap();
        prop_assert!(pa.sub(&pb).norm() <= a.sub(&b).norm() + 1e-12);
        for (na, nb) in column_norms(&pa).iter().zip(column_norms(&a)) {
            prop_assert!(*na <= nb + 1e-12);
        }
    }
}
