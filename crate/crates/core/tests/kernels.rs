mod common;

use common::*;
use dtc_core::discrete::{self, Alphabet};
use dtc_core::linalg::{self, Frobenius, Matrix};
use dtc_core::solvers::{tmac_update_products, TmacFactors, XUpdate};
use dtc_core::{fold, unfold, DenseTensor, Shape};
use proptest::prelude::*;
use rand::Rng;

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=6, 1..=4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unfold_matches_index_oracle(dims in dims_strategy(), seed in any::<u64>()) {
        let t = random_tensor(&mut rng(seed), &dims);
        for mode in 0..dims.len() {
            let m = unfold(&t, mode).unwrap();
            prop_assert_eq!(max_abs_diff(m.matrix(), &oracle_unfold(&t, mode)), 0.0);
            let back = fold(&m, t.shape()).unwrap();
            prop_assert_eq!(&back, &t);
        }
    }

    #[test]
    fn fold_then_unfold_is_identity(dims in dims_strategy(), seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let shape = Shape::new(dims.clone()).unwrap();
        let mode = pick.index(dims.len());
        let rows = dims[mode];
        let cols = shape.numel() / rows;
        let m = random_matrix(&mut rng(seed), rows, cols);
        let t = fold(&dtc_core::ModeMatrix::new(mode, m.clone()), &shape).unwrap();
        let again = unfold(&t, mode).unwrap();
        prop_assert_eq!(again.matrix(), &m);
    }
}

#[test]
fn svt_agrees_with_independent_shrinkage() {
    let mut r = rng(11);
    for _ in 0..60 {
        let (rows, cols) = (r.gen_range(1..=12), r.gen_range(1..=12));
        let m = random_matrix(&mut r, rows, cols);
        let tau = r.gen_range(0.0..2.5);
        let ours = linalg::svt(&m, tau).unwrap();
        assert!(max_abs_diff(&ours, &oracle_svt(&to_na(&m), tau)) < 1e-10);
        let nuclear = linalg::nuclear_norm(&m).unwrap();
        assert!((nuclear - oracle_nuclear(&to_na(&m))).abs() < 1e-10 * nuclear.max(1.0));
    }
}

#[test]
fn svt_is_the_nuclear_prox() {
    let mut r = rng(12);
    for _ in 0..30 {
        let (rows, cols) = (r.gen_range(2..=8), r.gen_range(2..=8));
        let m = random_matrix(&mut r, rows, cols);
        let tau = r.gen_range(0.1..1.5);
        let z = linalg::svt(&m, tau).unwrap();
        let objective = |c: &Matrix| 0.5 * (c - &m).frob_norm_sq() + tau * oracle_nuclear(&to_na(c));
        let best = objective(&z);
        for k in 0..20 {
            let scale = if k % 2 == 0 { 1e-3 } else { 0.5 };
            let competitor = &z + random_matrix(&mut r, rows, cols) * scale;
            assert!(best <= objective(&competitor) + 1e-12);
        }
    }
}

#[test]
fn least_squares_satisfies_normal_equations() {
    let mut r = rng(13);
    for _ in 0..20 {
        let (m, k, n) = (r.gen_range(3..=9), r.gen_range(1..=3), r.gen_range(3..=9));
        let a = random_matrix(&mut r, m, k);
        let b = random_matrix(&mut r, m, n);
        let y = linalg::least_squares_xy(&a, &b, linalg::Side::Left).unwrap();
        let (na, nb, ny) = (to_na(&a), to_na(&b), to_na(&y));
        let residual = na.transpose() * (&na * &ny - &nb);
        assert!(residual.amax() < 1e-9);
    }
}

#[test]
fn quadratic_transform_is_tight() {
    let mut r = rng(14);
    let alphabet = Alphabet::rgb8();
    let x: Vec<f64> = (0..40).map(|_| r.gen_range(-20.0..280.0)).collect();
    let alpha = 0.01;
    let aux = discrete::update_auxiliaries(&x, &alphabet, alpha).unwrap();
    for (j, &xj) in x.iter().enumerate() {
        let (mut lhs, mut rhs) = (0.0, 0.0);
        for (k, &a) in alphabet.values().iter().enumerate() {
            let d = (xj - a).powi(2);
            let beta = aux.beta_at(k, j);
            lhs += 2.0 * beta * alpha.sqrt() - beta * beta * (d + alpha);
            rhs += alpha / (d + alpha);
        }
        assert!((lhs - rhs).abs() < 1e-12 * rhs.max(1.0));
    }
}

#[test]
fn surrogate_value_tracks_smoothed_count() {
    // At refreshed β the surrogate equals Σ α/(d+α). Expanding it gives
    // 2√α Σβ − Σβ²(a² + α) − h, so the sum below must vanish.
    let mut r = rng(15);
    let alphabet = Alphabet::integer_levels(5).unwrap();
    let alpha = 0.05;
    for _ in 0..50 {
        let x: Vec<f64> = (0..6).map(|_| r.gen_range(-1.0..5.0)).collect();
        let aux = discrete::update_auxiliaries(&x, &alphabet, alpha).unwrap();
        let h = discrete::h_value(&x, &aux).unwrap();
        let mut rest = 0.0;
        for (j, &xj) in x.iter().enumerate() {
            for (k, &a) in alphabet.values().iter().enumerate() {
                let beta = aux.beta_at(k, j);
                let d = (xj - a).powi(2);
                rest += alpha / (d + alpha) - 2.0 * beta * alpha.sqrt() + beta * beta * (a * a + alpha);
            }
        }
        assert!((h + rest).abs() < 1e-9 * (1.0 + h.abs()));
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut r = rng(16);
    for size in [1usize, 2, 3, 8] {
        let alphabet = Alphabet::integer_levels(size).unwrap();
        let x: Vec<f64> = (0..7).map(|_| r.gen_range(-0.5..size as f64)).collect();
        let aux = discrete::update_auxiliaries(&x, &alphabet, 0.01).unwrap();
        let grad = discrete::grad_h(&x, &aux).unwrap();
        let h = 1e-6;
        for j in 0..x.len() {
            let mut up = x.clone();
            let mut down = x.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (discrete::h_value(&up, &aux).unwrap() - discrete::h_value(&down, &aux).unwrap()) / (2.0 * h);
            assert!((fd - grad[j]).abs() <= 1e-6 * grad[j].abs().max(1.0), "{fd} vs {}", grad[j]);
        }
    }
}

#[test]
fn lipschitz_step_descends() {
    let mut r = rng(17);
    for _ in 0..100 {
        let alphabet = Alphabet::integer_levels(r.gen_range(1..=6)).unwrap();
        let x: Vec<f64> = (0..10).map(|_| r.gen_range(-2.0..8.0)).collect();
        let aux = discrete::update_auxiliaries(&x, &alphabet, r.gen_range(0.001..1.0)).unwrap();
        let mu = discrete::lipschitz_step(&aux).unwrap();
        let grad = discrete::grad_h(&x, &aux).unwrap();
        let stepped: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a - mu * g).collect();
        let before = discrete::h_value(&x, &aux).unwrap();
        let after = discrete::h_value(&stepped, &aux).unwrap();
        assert!(after <= before + 1e-12 * before.abs().max(1.0));
    }
}

#[test]
fn tmac_x_updates_give_the_same_products() {
    let mut r = rng(18);
    for _ in 0..10 {
        let dims = [r.gen_range(4..=7), r.gen_range(4..=7), r.gen_range(2..=4)];
        let t = random_tensor(&mut r, &dims);
        let shape = t.shape().clone();
        let ranks: Vec<usize> = (0..3).map(|n| r.gen_range(1..=shape.dim(n).min(3))).collect();
        let factors = TmacFactors {
            x: (0..3).map(|n| random_matrix(&mut r, shape.dim(n), ranks[n])).collect(),
            y: (0..3)
                .map(|n| random_matrix(&mut r, ranks[n], shape.numel() / shape.dim(n)))
                .collect(),
        };
        let (_, simple) = tmac_update_products(&t, &factors, XUpdate::Simplified).unwrap();
        let (_, pinv) = tmac_update_products(&t, &factors, XUpdate::PseudoInverse).unwrap();
        for (a, b) in simple.iter().zip(&pinv) {
            assert!(linalg::frob_dist(a, b) <= 1e-8 * b.frob_norm());
        }
    }
}

#[test]
fn frobenius_is_layout_free() {
    let t: DenseTensor = random_tensor(&mut rng(19), &[3, 4, 5]);
    let direct: f64 = t.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    for mode in 0..3 {
        let m = unfold(&t, mode).unwrap();
        assert!((m.matrix().frob_norm() - direct).abs() < 1e-12 * direct);
    }
    assert!((t.frob_norm() - direct).abs() < 1e-12 * direct);
}
