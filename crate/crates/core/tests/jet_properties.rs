use proptest::prelude::*;
use resmin::expr::{Expr, Field};
use resmin::jets::TaylorJet;
use resmin::network::NetworkParams;

fn sample_expr(a: f64, b: f64, c: f64) -> Expr {
    (a * Expr::x(0) + b * Expr::x(1)).sin() * (c * Expr::x(0)).exp()
        + (Expr::x(0) * Expr::x(1)).tanh()
}

fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

fn fd_hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let d = x.len();
    let mut out = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            let at = |si: f64, sj: f64| {
                let mut p = x.to_vec();
                p[i] += si * h;
                p[j] += sj * h;
                f(&p)
            };
            out[i][j] =
                (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h);
        }
    }
    out
}

proptest! {
    #[test]
    fn expression_jets_match_finite_differences(
        a in -2.0f64..2.0, b in -2.0f64..2.0, c in -1.0f64..1.0,
        x0 in -1.0f64..1.0, x1 in -1.0f64..1.0,
    ) {
        let e = sample_expr(a, b, c);
        let x = [x0, x1];
        let jet = e.jet(&x, 2).unwrap();
        let f = |p: &[f64]| e.eval(p).unwrap();
        prop_assert!((jet.value() - f(&x)).abs() < 1e-14);
        let g = fd_gradient(&f, &x, 1e-5);
        let h = fd_hessian(&f, &x, 1e-4);
        for i in 0..2 {
            prop_assert!((jet.partial(i) - g[i]).abs() < 1e-7, "d{} {} vs {}", i, jet.partial(i), g[i]);
            for j in 0..2 {
                prop_assert!((jet.hess(i, j) - h[i][j]).abs() < 1e-5, "d{}{}", i, j);
            }
        }
    }

    #[test]
    fn third_derivatives_match_differenced_hessians(
        a in -2.0f64..2.0, b in -2.0f64..2.0, x0 in -1.0f64..1.0, x1 in -1.0f64..1.0,
    ) {
        let e = sample_expr(a, b, 0.3);
        let x = [x0, x1];
        let jet = e.jet(&x, 3).unwrap();
        let h = 1e-5;
        for k in 0..2 {
            let mut p = x;
            let mut m = x;
            p[k] += h;
            m[k] -= h;
            let (jp, jm) = (e.jet(&p, 2).unwrap(), e.jet(&m, 2).unwrap());
            for i in 0..2 {
                for j in 0..2 {
                    let fd = (jp.hess(i, j) - jm.hess(i, j)) / (2.0 * h);
                    prop_assert!((jet.third(i, j, k) - fd).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn product_is_commutative_and_obeys_leibniz(
        u in prop::collection::vec(-3.0f64..3.0, 6), v in prop::collection::vec(-3.0f64..3.0, 6),
    ) {
        let mut a = TaylorJet::constant(0.0, 2, 2).unwrap();
        let mut b = a;
        a.coeffs_mut().copy_from_slice(&u);
        b.coeffs_mut().copy_from_slice(&v);
        let ab = a * b;
        let ba = b * a;
        for (x, y) in ab.coeffs().iter().zip(ba.coeffs()) {
            prop_assert!((x - y).abs() <= 1e-14 * x.abs().max(1.0));
        }
        prop_assert!((ab.value() - a.value() * b.value()).abs() < 1e-12);
        for i in 0..2 {
            let leibniz = a.partial(i) * b.value() + a.value() * b.partial(i);
            prop_assert!((ab.partial(i) - leibniz).abs() < 1e-12);
            for j in 0..2 {
                let second = a.hess(i, j) * b.value()
                    + a.partial(i) * b.partial(j)
                    + a.partial(j) * b.partial(i)
                    + a.value() * b.hess(i, j);
                prop_assert!((ab.hess(i, j) - second).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn network_laplacian_matches_finite_differences(seed in 0u64..1000, x0 in -0.9f64..0.9, x1 in -0.9f64..0.9) {
        let net = NetworkParams::xavier(&[2, 6, 6, 1], seed).unwrap();
        let x = [x0, x1];
        let u = net.forward(&TaylorJet::seed_point(&x, 2).unwrap(), None).unwrap();
        let f = |p: &[f64]| net.eval(p);
        prop_assert!((u.value() - f(&x)).abs() < 1e-14);
        let h = fd_hessian(&f, &x, 1e-4);
        prop_assert!((u.laplacian().unwrap() - (h[0][0] + h[1][1])).abs() < 1e-6);
    }
}

#[test]
fn symmetric_slots_agree() {
    let e = sample_expr(0.7, -1.1, 0.4);
    let j = e.jet(&[0.2, -0.3], 3).unwrap();
    assert_eq!(j.hess(0, 1), j.hess(1, 0));
    assert_eq!(j.third(0, 0, 1), j.third(1, 0, 0));
    assert_eq!(j.third(0, 1, 1), j.third(1, 1, 0));
}

#[test]
fn field_and_expr_paths_agree() {
    let e = sample_expr(1.0, 2.0, -0.5);
    let f = resmin::expr::AnalyticField::new(e.clone(), 2);
    let x = [0.4, 0.1];
    assert_eq!(
        f.jet(&x, 2).unwrap().coeffs(),
        e.jet(&x, 2).unwrap().coeffs()
    );
}
