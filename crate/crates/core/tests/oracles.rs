//! Deterministic checks against independent oracles and reference values.

mod common;

use std::f64::consts::PI;

use nalgebra::DVector;
use tfl_core::analysis::Metric;
use tfl_core::coefficients::{coefficient_self_error_ladder, compute_coefficients, Resolution};
use tfl_core::experiments::{preset, run_experiment, Experiment, PresetOptions, Study};
use tfl_core::operators::DiscreteTfl;
use tfl_core::problems::{manufacture_source, sinc_interpolate, TestFunction};
use tfl_core::{LinearOperator, SchemeOrder, SolverSettings, TflParams, UniformGrid};

#[test]
fn fft_coefficients_match_adaptive_quadrature() {
    for (alpha, lambda, h) in [(0.4, 0.5, 1.0 / 16.0), (1.8, 0.5, 1.0 / 16.0), (1.2, 3.0, 1.0 / 8.0)] {
        for p in SchemeOrder::ALL {
            let params = TflParams::new(alpha, lambda, 1, p, h).unwrap();
            let t = compute_coefficients(&params, 17, 1 << 14, 20).unwrap();
            for j in 0..=16 {
                let oracle = common::coefficient_1d(alpha, lambda, h, p.as_u32(), j);
                let got = t.get(&[j]);
                assert!((got - oracle).abs() < 1e-10, "α={alpha} p={p:?} j={j}: {got} vs {oracle}");
            }
        }
    }
}

#[test]
fn untempered_coefficients_converge_at_the_cusp_rate() {
    // with λ = 0 the generating function has a |η|^α cusp at the origin and
    // the trapezoid rule only converges like N_f^{-(1+α)}
    let alpha = 0.8;
    let params = TflParams::new(alpha, 0.0, 1, SchemeOrder::P4, 0.1).unwrap();
    let reference = compute_coefficients(&params, 4, 1 << 20, 20).unwrap().get(&[2]);
    let errs: Vec<f64> = [1usize << 10, 1 << 12]
        .iter()
        .map(|&nf| (compute_coefficients(&params, 4, nf, 20).unwrap().get(&[2]) - reference).abs())
        .collect();
    let rate = (errs[0] / errs[1]).log2() / 2.0;
    assert!((rate - (1.0 + alpha)).abs() < 0.15, "rate {rate}");
}

#[test]
fn fast_matvec_matches_dense_in_three_dimensions() {
    let h = 0.5;
    let grid = UniformGrid::centered(3, 1.0, h).unwrap();
    for p in [SchemeOrder::P2, SchemeOrder::P8] {
        let params = TflParams::new(0.6, 1.0, 3, p, h).unwrap();
        let t = compute_coefficients(&params, 4, 64, 8).unwrap();
        let dense = common::dense_tfl(&grid, &t);
        let op = DiscreteTfl::new(&grid, &t).unwrap();
        let u: Vec<f64> = (0..grid.len()).map(|k| ((k * 7919) % 13) as f64 / 13.0 - 0.4).collect();
        let fast = op.apply(&tfl_core::GridFunction::new(grid.clone(), u.clone()).unwrap()).unwrap();
        let slow = &dense * DVector::from_column_slice(&u);
        let err = common::max_abs_diff(fast.values(), slow.as_slice());
        assert!(err <= 1e-12 * common::max_abs(slow.as_slice()).max(1.0), "{err}");
    }
}

#[test]
fn self_error_decays_with_climbing_rates() {
    for alpha in [0.4, 1.8] {
        let params = TflParams::new(alpha, 0.5, 2, SchemeOrder::P4, 1.0 / 32.0).unwrap();
        let rows = coefficient_self_error_ladder(&params, 64, 5, 20).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].error < w[0].error);
        }
        let rates: Vec<f64> = rows.iter().filter_map(|r| r.rate).collect();
        for w in rates.windows(2) {
            assert!(w[1] > w[0], "α={alpha}: {rates:?}");
        }
    }
}

#[test]
fn coefficient_self_error_matches_table_1_column() {
    // α = 1.8, p = 4 column at N_f = 2^6 and 2^7
    let params = TflParams::new(1.8, 0.5, 2, SchemeOrder::P4, 1.0 / 32.0).unwrap();
    let rows = coefficient_self_error_ladder(&params, 64, 2, 20).unwrap();
    assert!((rows[0].error / 3.58e-7 - 1.0).abs() < 0.01, "{}", rows[0].error);
    assert!((rows[1].error / 2.02e-8 - 1.0).abs() < 0.01, "{}", rows[1].error);
}

#[test]
fn sinc_reproduces_a_band_limited_signal() {
    let mut previous = f64::INFINITY;
    for k in 5..=7 {
        let h = 0.5f64.powi(k);
        let grid = UniformGrid::centered(1, 1.0, h).unwrap();
        let u = tfl_core::GridFunction::from_fn(&grid, |x| (PI * x[0]).sin());
        let mids: Vec<Vec<f64>> = (0..grid.n_interior() - 1)
            .map(|i| vec![grid.coordinate(0, i) + 0.5 * h])
            .filter(|y| y[0].abs() < 0.5)
            .collect();
        let v = sinc_interpolate(&u, &mids).unwrap();
        let err = mids
            .iter()
            .zip(&v)
            .map(|(y, v)| ((PI * y[0]).sin() - v).abs())
            .fold(0.0, f64::max);
        if k == 5 {
            assert!(err < 1e-3, "{err}");
        }
        assert!(err < previous);
        previous = err;
    }
}

#[test]
fn manufactured_source_settles_under_refinement() {
    let coarse = UniformGrid::centered(1, 1.0, 0.125).unwrap();
    let res = Resolution::fixed(1 << 16, 20);
    for (p, s, alpha) in [(SchemeOrder::P8, 10.0, 0.4), (SchemeOrder::P8, 10.0, 1.8), (SchemeOrder::P6, 10.0, 1.2)] {
        let params = TflParams::new(alpha, 0.5, 1, p, 0.125).unwrap().with_nu(1.0).unwrap();
        let tf = TestFunction::bump(s).unwrap();
        let a = manufacture_source(&tf, &params, &coarse, 0.125 / 16.0, &res).unwrap();
        let b = manufacture_source(&tf, &params, &coarse, 0.125 / 32.0, &res).unwrap();
        let drift = a.axpy(-1.0, &b).unwrap().norm_inf() / a.norm_inf();
        assert!(drift <= 1e-9, "p={p:?} α={alpha}: {drift}");
    }
}

#[test]
fn degenerate_nesting_is_the_operator_itself() {
    let grid = UniformGrid::centered(2, 1.0, 0.125).unwrap();
    let params = TflParams::new(1.2, 0.5, 2, SchemeOrder::P4, 0.125).unwrap().with_nu(1.0).unwrap();
    let res = Resolution::fixed(256, 20);
    let tf = TestFunction::bump(3.0).unwrap();
    let f = manufacture_source(&tf, &params, &grid, 0.125, &res).unwrap();
    let t = res.tensor(&params, grid.n_cells()).unwrap();
    let op = tfl_core::assemble_operator(&params, &grid, &t).unwrap();
    assert_eq!(f, op.apply(&tf.sample(&grid)).unwrap());
}

#[test]
fn nonmesh_rates_follow_the_regularity() {
    // s = 6, α = 1.8: order 4 converges at rate 4 down to h = 2^-8; orders 6
    // and 8 reach rate ≈ 6 before the round-off floor of the 2^-12 source
    let opts = PresetOptions {
        alpha: Some(1.8),
        ..PresetOptions::default()
    };
    for exp in preset("fig5", &opts).unwrap() {
        let t = run_experiment(&exp).into_result().unwrap();
        let rates = t.rates();
        match exp.params.order.as_u32() {
            2 => assert!((rates.last().unwrap() - 2.0).abs() < 0.1, "{rates:?}"),
            4 => assert!((rates.last().unwrap() - 4.0).abs() < 0.3, "{rates:?}"),
            _ => assert!((rates[1] - 6.0).abs() < 0.5, "{rates:?}"),
        }
    }
}

#[test]
fn rate_tables_are_reproducible() {
    let params = TflParams::new(0.8, 0.5, 1, SchemeOrder::P6, 0.25).unwrap().with_nu(1.0).unwrap();
    let exp = Experiment {
        id: "repro".into(),
        study: Study::SolveSelfDifference,
        params,
        laplacian_order: None,
        problem: TestFunction::bump(7.0).unwrap(),
        half_width: 1.0,
        steps: vec![0.25, 0.125, 0.0625],
        metric: Metric::L2,
        reference_h: Some(1.0 / 256.0),
        resolution: Resolution::fixed(1 << 14, 20),
        solver: SolverSettings::default(),
    };
    let a = run_experiment(&exp).into_result().unwrap();
    let b = run_experiment(&exp).into_result().unwrap();
    assert_eq!(a, b);
    let bits = |t: &tfl_core::analysis::RateTable| t.rows.iter().map(|r| r.error.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}
