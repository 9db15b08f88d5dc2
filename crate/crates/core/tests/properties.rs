//! Property tests for the invariants of each module.

mod common;

use std::f64::consts::PI;

use proptest::prelude::*;

use tfl_core::analysis::{Abscissa, Metric, RateTable};
use tfl_core::coefficients::{compute_coefficients, read_coefficients_csv, write_coefficients_csv};
use tfl_core::problems::{restrict, sinc_interpolate, TestFunction};
use tfl_core::symbols::{
    continuous_tfl_symbol, discrete_tfl_symbol, generating_function, generating_function_certified,
    laplacian_symbol, symbol_bound,
};
use tfl_core::{
    assemble_operator, gauss_legendre, sphere_rule, GridFunction, LinearOperator, SchemeOrder, TflParams,
    UniformGrid,
};

fn order() -> impl Strategy<Value = SchemeOrder> {
    prop::sample::select(SchemeOrder::ALL.to_vec())
}

fn high_order() -> impl Strategy<Value = SchemeOrder> {
    prop::sample::select(SchemeOrder::HIGH.to_vec())
}

fn alpha() -> impl Strategy<Value = f64> {
    prop_oneof![0.05f64..0.95, 1.05f64..1.95]
}

fn config() -> impl Strategy<Value = (f64, f64, SchemeOrder, usize, usize)> {
    (alpha(), 0.0f64..3.0, order(), 1usize..=2, prop::sample::select(vec![4usize, 8, 16]))
        .prop_map(|(a, l, p, d, n1)| (a, l, p, d, if d == 2 { n1.min(8) } else { n1 }))
}

fn operator_for(alpha: f64, lambda: f64, p: SchemeOrder, d: usize, n1: usize) -> tfl_core::CompositeOperator {
    let h = 2.0 / n1 as f64;
    let grid = UniformGrid::centered(d, 1.0, h).unwrap();
    let params = TflParams::new(alpha, lambda, d, p, h).unwrap();
    let t = compute_coefficients(&params, n1, 256, 12).unwrap();
    assemble_operator(&params, &grid, &t).unwrap()
}

fn vector(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gauss_weights_are_mirror_symmetric(n in 1usize..200) {
        let rule = gauss_legendre(n).unwrap();
        let w = rule.weights();
        let x = rule.nodes();
        for i in 0..n {
            prop_assert_eq!(w[i], w[n - 1 - i]);
            prop_assert_eq!(x[i], -x[n - 1 - i]);
        }
        prop_assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn gauss_rule_is_exact_for_polynomials(n in 1usize..40, k in 0usize..79) {
        prop_assume!(k < 2 * n);
        let rule = gauss_legendre(n).unwrap();
        let v = rule.integrate(0.0, 1.0, |x| x.powi(k as i32));
        prop_assert!((v - 1.0 / (k as f64 + 1.0)).abs() < 1e-13);
    }

    #[test]
    fn sphere_rules_reproduce_the_measure(d in 1usize..=3, order in 10usize..60) {
        let rule = sphere_rule(d, order).unwrap();
        let want = [2.0, 2.0 * PI, 4.0 * PI][d - 1];
        prop_assert!((rule.integrate(|_| 1.0) - want).abs() < 1e-10);
    }

    #[test]
    fn laplacian_symbol_is_squeezed(p in high_order(), frac in -1.0f64..1.0, hk in 2u32..8) {
        let h = 0.5f64.powi(hk as i32);
        let params = TflParams::new(1.0 + 0.5, 0.0, 1, p, h).unwrap();
        let xi = frac * PI / h;
        let psi = laplacian_symbol(xi, &params);
        let xi2 = xi * xi;
        prop_assert!(psi <= xi2 * (1.0 + 1e-12) + 1e-12);
        let lower = if p == SchemeOrder::P4 { 16.0 / (3.0 * PI * PI) } else { 0.6 };
        prop_assert!(psi >= lower * xi2 * (1.0 - 1e-12) - 1e-12, "psi {} xi2 {}", psi, xi2);
        // agrees with the cosine form of the stencil symbol
        let cos_form = common::psi_cosine_form(p.as_u32(), xi * h) / (h * h);
        prop_assert!((psi - cos_form).abs() <= 1e-12 * xi2.max(1.0 / (h * h)));
    }

    #[test]
    fn generating_function_is_even_and_real(
        a in alpha(), l in 0.0f64..3.0, p in order(), d in 1usize..=3,
        eta in prop::collection::vec(-PI..PI, 3),
    ) {
        let params = TflParams::new(a, l, d, p, 1.0 / 16.0).unwrap();
        let rule = sphere_rule(d, 8).unwrap();
        let e = &eta[..d];
        let v = generating_function_certified(e, &params, &rule).unwrap();
        prop_assert!(v.imag_residue <= 1e-12 * v.value.abs().max(1.0));
        for l in 0..d {
            let mut flipped = e.to_vec();
            flipped[l] = -flipped[l];
            let w = generating_function(&flipped, &params, &rule).unwrap();
            prop_assert!((v.value - w).abs() <= 1e-14 * v.value.abs().max(1e-300));
        }
        prop_assert!(v.value >= 0.0);
    }

    #[test]
    fn one_dimensional_symbols_obey_the_bound(
        a in alpha(), l in 0.0f64..3.0, p in high_order(), frac in -1.0f64..1.0,
    ) {
        let h = 1.0 / 32.0;
        let params = TflParams::new(a, l, 1, p, h).unwrap();
        let rule = sphere_rule(1, 1).unwrap();
        let xi = [frac * PI / h];
        let bound = symbol_bound(&xi, l, a);
        prop_assert!(continuous_tfl_symbol(&xi, &params, &rule).unwrap().abs() <= bound * (1.0 + 1e-12));
        prop_assert!(discrete_tfl_symbol(&xi, &params, &rule).unwrap().abs() <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn discrete_symbol_is_nonnegative(a in alpha(), l in 0.0f64..3.0, p in order(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let h = 0.125;
        let params = TflParams::new(a, l, 2, p, h).unwrap();
        let rule = sphere_rule(2, 20).unwrap();
        let s = discrete_tfl_symbol(&[x * PI / h, y * PI / h], &params, &rule).unwrap();
        prop_assert!(s >= -1e-12 * symbol_bound(&[x * PI / h, y * PI / h], l, a));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn operator_is_linear((a, l, p, d, n1) in config(), s in -2.0f64..2.0, t in -2.0f64..2.0, seed in vector(512)) {
        let op = operator_for(a, l, p, d, n1);
        let n = op.grid().len();
        let u = GridFunction::new(op.grid().clone(), seed[..n].to_vec()).unwrap();
        let v = GridFunction::new(op.grid().clone(), seed[256..256 + n].to_vec()).unwrap();
        let combo = v.axpy(s, &u).unwrap().axpy(t - 1.0, &v).unwrap();
        let lhs = op.apply(&combo).unwrap();
        let (au, av) = (op.apply(&u).unwrap(), op.apply(&v).unwrap());
        let rhs = av.axpy(s, &au).unwrap().axpy(t - 1.0, &av).unwrap();
        let scale = au.norm_inf().max(av.norm_inf()) * (1.0 + s.abs() + t.abs());
        prop_assert!(lhs.axpy(-1.0, &rhs).unwrap().norm_inf() <= 1e-12 * scale);
    }

    #[test]
    fn operator_is_symmetric_and_positive((a, l, p, d, n1) in config(), seed in vector(512)) {
        let op = operator_for(a, l, p, d, n1);
        let n = op.grid().len();
        let u = GridFunction::new(op.grid().clone(), seed[..n].to_vec()).unwrap();
        let v = GridFunction::new(op.grid().clone(), seed[256..256 + n].to_vec()).unwrap();
        let (au, av) = (op.apply(&u).unwrap(), op.apply(&v).unwrap());
        let uv = au.inner(&v).unwrap();
        let vu = u.inner(&av).unwrap();
        let scale = au.norm_l2() * v.norm_l2();
        prop_assert!((uv - vu).abs() <= 1e-11 * scale);
        prop_assume!(u.norm_inf() > 0.0);
        prop_assert!(au.inner(&u).unwrap() > 0.0);
    }

    #[test]
    fn bump_is_even_and_restriction_keeps_it(s in 0.5f64..12.0, x in -1.5f64..1.5, y in -1.5f64..1.5) {
        let tf = TestFunction::bump(s).unwrap();
        let v = tf.evaluate(&[x, y]);
        prop_assert_eq!(v, tf.evaluate(&[-x, y]));
        prop_assert_eq!(v, tf.evaluate(&[x, -y]));
        prop_assert!((0.0..=1.0).contains(&v));
        let coarse = UniformGrid::centered(2, 1.0, 0.25).unwrap();
        let fine = coarse.refined(0.0625).unwrap();
        let r = restrict(&tf.sample(&fine), &coarse).unwrap();
        let n = coarse.n_interior();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(r.get(&[i, j]), r.get(&[n - 1 - i, j]));
            }
        }
    }

    #[test]
    fn sinc_interpolation_keeps_symmetry(s in 1.0f64..8.0, ys in prop::collection::vec(-0.999f64..0.999, 1..20)) {
        let tf = TestFunction::bump(s).unwrap();
        let grid = UniformGrid::centered(1, 1.0, 1.0 / 32.0).unwrap();
        let u = tf.sample(&grid);
        let pts: Vec<Vec<f64>> = ys.iter().map(|&y| vec![y]).collect();
        let mirrored: Vec<Vec<f64>> = ys.iter().map(|&y| vec![-y]).collect();
        let a = sinc_interpolate(&u, &pts).unwrap();
        let b = sinc_interpolate(&u, &mirrored).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-14 * x.abs().max(1.0));
        }
    }

    #[test]
    fn grid_function_csv_round_trips(d in 1usize..=3, vals in vector(343)) {
        let grid = UniformGrid::centered(d, 1.0, 0.25).unwrap();
        let u = GridFunction::new(grid.clone(), vals[..grid.len()].to_vec()).unwrap();
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        prop_assert_eq!(GridFunction::read_csv(&buf[..]).unwrap(), u);
    }

    #[test]
    fn rate_table_csv_round_trips(errors in prop::collection::vec(1e-16f64..1.0, 1..8)) {
        let mut t = RateTable::new("prop", Metric::L2, Abscissa::H, serde_json::json!({"seed": 1}));
        for (k, e) in errors.iter().enumerate() {
            t.push(0.5f64.powi(k as i32 + 2), *e, 1024, 20);
        }
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        prop_assert_eq!(&RateTable::read_csv(&buf[..]).unwrap(), &t);
        prop_assert_eq!(&RateTable::from_json(&t.to_json().unwrap()).unwrap(), &t);
    }
}

#[test]
fn coefficient_csv_round_trips() {
    let params = TflParams::new(1.3, 0.7, 2, SchemeOrder::P6, 0.125).unwrap();
    let t = compute_coefficients(&params, 8, 64, 10).unwrap();
    let mut buf = Vec::new();
    write_coefficients_csv(&t, &mut buf).unwrap();
    assert_eq!(read_coefficients_csv(&buf[..]).unwrap(), t);
}
