use std::f64::consts::{E, PI};

use execwell::analysis::solve_trajectory;
use execwell::continuous::{solve_bvp_shooting, ShootingOptions};
use execwell::sweep::{admissible_boundary, lambert_w0, run_sweep, Axis, SweepFamily, SweepMode, SweepSpec};

#[test]
fn lambert_w_inverts_on_log_grid() {
    for k in 0..1000 {
        let x = 10f64.powf(-6.0 + 12.0 * k as f64 / 999.0);
        let w = lambert_w0(x).unwrap();
        assert!((w * w.exp() - x).abs() <= 1e-12 * x, "x={x}");
    }
    for k in 0..200 {
        let x = -1.0 / E + (k as f64 + 1.0) * 1e-3;
        let w = lambert_w0(x).unwrap();
        assert!((w * w.exp() - x).abs() <= 1e-12 * (1.0 + x.abs()), "x={x}");
    }
}

#[test]
fn admissibility_is_monotone_in_the_first_parameter() {
    let families = [SweepFamily::Exponential, SweepFamily::PowerLaw];
    let modes = [SweepMode::DistinctExponents, SweepMode::EqualExponents];
    for family in families {
        for mode in modes {
            for kappa in [0.05, 0.1, 0.5, 1.0, 4.0, 20.0] {
                for j in 0..31 {
                    let second = 3.0 * j as f64 / 30.0;
                    let mut was = true;
                    for i in 0..301 {
                        let a = 3.0 * i as f64 / 300.0;
                        let ok = match mode {
                            SweepMode::DistinctExponents => admissible_boundary(family, mode, a, second, kappa),
                            SweepMode::EqualExponents => admissible_boundary(family, mode, a, a, kappa),
                        };
                        // the singular point α = 2/κ is an isolated hole
                        let singular = mode == SweepMode::EqualExponents && (a - 2.0 / kappa).abs() < 1e-9;
                        if !singular {
                            assert!(!(ok && !was), "{family:?} {mode:?} kappa={kappa} a={a}");
                            was = ok;
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn equal_exponent_rows_match_shooting() {
    let mut spec = SweepSpec::new(SweepFamily::Exponential, SweepMode::EqualExponents);
    spec.axis1 = Some(Axis::linear(0.0, 2.5, 11));
    spec.axis2 = Some(Axis { min: 0.3, max: 10.0, count: 4, log: true });
    let cells = run_sweep(&spec).unwrap();
    let mut compared = 0;
    for c in cells.iter().filter(|c| c.admissible) {
        let m = spec.model(c.param1, c.param2).unwrap();
        let sh = solve_bvp_shooting(&m, &ShootingOptions::default().forced()).unwrap();
        assert!((sh.initial_velocity - c.initial_velocity).abs() <= 1e-5, "{c:?}");
        compared += 1;
    }
    assert!(compared > 30);
    // α = 0 row is TWAP
    for c in cells.iter().filter(|c| c.param1 == 0.0) {
        assert!((c.initial_velocity + 1.0).abs() < 1e-12);
        assert_eq!(c.regime, "linear_twap");
    }
}

#[test]
fn admissible_cells_never_profit() {
    let specs = [
        (SweepFamily::Exponential, SweepMode::EqualExponents, None),
        (SweepFamily::PowerLaw, SweepMode::EqualExponents, None),
        (SweepFamily::PowerLaw, SweepMode::DistinctExponents, Some(0.1)),
        (SweepFamily::PowerLaw, SweepMode::DistinctExponents, Some(1.0)),
    ];
    for (family, mode, kappa) in specs {
        let mut spec = SweepSpec::new(family, mode);
        spec.kappa = kappa;
        spec.grid_m = 1000;
        spec.axis1 = Some(Axis::linear(0.0, 3.0, 16));
        if mode == SweepMode::DistinctExponents {
            spec.axis2 = Some(Axis::linear(0.0, 3.0, 16));
        } else {
            spec.axis2 = Some(Axis { min: 0.05, max: 20.0, count: 16, log: true });
        }
        let cells = run_sweep(&spec).unwrap();
        assert_eq!(cells.len(), 256);
        for c in cells.iter().filter(|c| c.admissible) {
            assert_ne!(c.regime, "failed", "{c:?}");
            assert!(c.excess_cash <= 1e-8, "{family:?} {mode:?} {c:?}");
        }
    }
}

#[test]
fn low_kappa_has_turning_points_inside_the_boundary() {
    let mut spec = SweepSpec::new(SweepFamily::Exponential, SweepMode::DistinctExponents);
    spec.kappa = Some(0.1);
    spec.axis1 = Some(Axis::linear(1.0, 1.9, 4));
    spec.axis2 = Some(Axis::linear(0.0, 0.02, 2));
    let cells = run_sweep(&spec).unwrap();
    let hit = cells
        .iter()
        .find(|c| c.admissible && c.ttpm)
        .expect("a turning-point cell");
    assert_eq!(hit.regime, "concave_one_turning_point");
    assert!(hit.initial_velocity > 0.0);
    assert!(hit.param1 < 2.0 * 0.1 * PI * PI);
}

#[test]
fn sweep_rows_match_direct_solves() {
    let mut spec = SweepSpec::new(SweepFamily::PowerLaw, SweepMode::DistinctExponents);
    spec.kappa = Some(1.0);
    spec.axis1 = Some(Axis::linear(0.5, 1.5, 3));
    spec.axis2 = Some(Axis::linear(0.0, 1.0, 3));
    let cells = run_sweep(&spec).unwrap();
    for (k, c) in cells.iter().enumerate() {
        assert_eq!(c.param1, [0.5, 1.0, 1.5][k / 3]);
        assert_eq!(c.param2, [0.0, 0.5, 1.0][k % 3]);
        let t = solve_trajectory(&spec.model(c.param1, c.param2).unwrap(), spec.grid_m).unwrap();
        assert_eq!(t.initial_velocity, c.initial_velocity);
        assert_eq!(t.cash, c.excess_cash);
    }
}
