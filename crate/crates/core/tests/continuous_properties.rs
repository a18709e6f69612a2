use std::f64::consts::PI;

use proptest::prelude::*;

use execwell::analysis::{detect_ttpm, solve_trajectory};
use execwell::continuous::{
    cash_functional, closed_form, integrate_ivp, solve_bvp_shooting, ShootingOptions, Trajectory,
};
use execwell::discrete::{cost, solve_optimal, ImpactMatrix};
use execwell::{ImpactPath, MarketModel, PathFamily};

fn model(theta: ImpactPath, eta: ImpactPath, horizon: f64, q: f64) -> MarketModel {
    MarketModel::deterministic(theta, eta, horizon, q).unwrap()
}

fn exp_model(bp: f64, ap: f64, btp: f64, atp: f64, q: f64) -> MarketModel {
    model(
        ImpactPath::exponential(bp, ap, 1.0).unwrap(),
        ImpactPath::exponential(btp, atp, 1.0).unwrap(),
        1.0,
        q,
    )
}

#[test]
fn rk4_is_fourth_order() {
    // sin regime with ω = 2: exact ζ̇(0) = −2 cot 2, terminal ζ(T) = 0
    let m = model(
        ImpactPath::linear(5.0, -2.0, 1.0).unwrap(),
        ImpactPath::constant(0.25, 1.0).unwrap(),
        1.0,
        1.0,
    );
    let v0 = -2.0 * 2f64.cos() / 2f64.sin();
    let errors: Vec<f64> = [25, 50, 100, 200]
        .iter()
        .map(|&n| integrate_ivp(&m, v0, n).0[n].abs())
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((3.7..4.3).contains(&order), "{errors:?}");
    }
}

#[test]
fn shooting_converges_under_refinement() {
    let m = exp_model(1.0, 1.5, 1.0, 0.5, 1.0);
    let fine = solve_bvp_shooting(&m, &ShootingOptions { grid: 8000, tol: 1e-12, force: true }).unwrap();
    let mut last = f64::INFINITY;
    for grid in [100, 200, 400] {
        let t = solve_bvp_shooting(&m, &ShootingOptions { grid, tol: 1e-12, force: true }).unwrap();
        let err = (t.initial_velocity - fine.initial_velocity).abs();
        assert!(err < last / 8.0 || err < 1e-11, "grid {grid}: {err} after {last}");
        last = err;
    }
}

#[test]
fn euler_lagrange_residual_is_small() {
    for m in [
        exp_model(1.0, 1.5, 1.0, 0.5, 1.0),
        exp_model(1.0, 0.5, 0.3, 1.2, -2.0),
        model(
            ImpactPath::power_law(1.0, 1.0, 1.0).unwrap(),
            ImpactPath::power_law(0.5, 0.3, 1.0).unwrap(),
            1.0,
            1.0,
        ),
    ] {
        let t = solve_bvp_shooting(&m, &ShootingOptions::default().forced()).unwrap();
        let h = t.step();
        let mut worst = 0.0_f64;
        for k in 1..t.grid() {
            let s = t.times[k];
            let acc = (t.zeta_dot[k + 1] - t.zeta_dot[k - 1]) / (2.0 * h);
            let eta = m.eta.eval(s).unwrap();
            let r = 2.0 * eta * acc + 2.0 * m.eta.deriv(s).unwrap() * t.zeta_dot[k] - m.theta.deriv(s).unwrap() * t.zeta[k];
            worst = worst.max(r.abs());
        }
        assert!(worst < 1e-5 * m.quantity.abs(), "residual {worst}");
        assert!(t.zeta[t.grid()].abs() <= 1e-8 * m.quantity.abs());
    }
}

fn bumped(model: &MarketModel, base: &Trajectory, eps: f64, k: f64) -> f64 {
    let horizon = model.horizon;
    let w = k * PI / horizon;
    let traj = Trajectory {
        times: base.times.clone(),
        zeta: base.times.iter().zip(&base.zeta).map(|(t, z)| z + eps * (w * t).sin()).collect(),
        zeta_dot: base
            .times
            .iter()
            .zip(&base.zeta_dot)
            .map(|(t, v)| v + eps * w * (w * t).cos())
            .collect(),
        initial_velocity: base.initial_velocity + eps * w,
        cash: f64::NAN,
    };
    cash_functional(model, &traj)
}

#[test]
fn optimum_is_a_local_maximum_of_cash() {
    let models = [
        exp_model(1.0, 1.5, 1.0, 0.5, 1.0),
        exp_model(1.0, 1.0, 0.2, 1.0, 1.0),
        model(
            ImpactPath::linear(5.0, -2.0, 1.0).unwrap(),
            ImpactPath::constant(0.25, 1.0).unwrap(),
            1.0,
            1.0,
        ),
        model(
            ImpactPath::linear(1.0, 1.0, 1.0).unwrap(),
            ImpactPath::linear(0.5, 0.25, 1.0).unwrap(),
            1.0,
            -1.5,
        ),
    ];
    for m in &models {
        let t = solve_trajectory(m, 2000).unwrap();
        for k in [1.0, 2.0, 3.0] {
            for eps in [-0.05, 0.05, 0.2] {
                assert!(bumped(m, &t, eps, k) < t.cash, "k={k} eps={eps}");
            }
        }
        let twap = Trajectory::twap(m, 2000).unwrap();
        assert!(t.cash >= twap.cash - 1e-12);
    }
}

#[test]
fn admissible_exponential_inventory_stays_nonnegative() {
    for (ap, atp, kappa) in [(0.5, 0.5, 1.0), (1.5, 0.2, 0.1), (2.5, 1.0, 1.0), (0.2, 2.5, 10.0)] {
        assert!(ap < 2.0 * kappa * PI * PI * f64::exp(-atp));
        let m = exp_model(1.0, ap, kappa, atp, 1.0);
        let t = solve_trajectory(&m, 2000).unwrap();
        assert!(t.zeta.iter().all(|z| *z >= -1e-9), "({ap}, {atp}, {kappa})");
    }
}

#[test]
fn discrete_cost_converges_to_continuous_cost() {
    let m = exp_model(1.0, 1.0, 0.5, 0.7, 1.0);
    let cont = solve_trajectory(&m, 4000).unwrap();
    let mut errors = Vec::new();
    for n in [25, 50, 100, 200, 400] {
        let a = ImpactMatrix::build(&m.discretize(n).unwrap());
        let s = solve_optimal(&a, 1.0).unwrap();
        errors.push((cost(&a, &s).unwrap() + cont.cash).abs());
    }
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    assert!(errors[4] < 5e-3, "{errors:?}");
}

#[test]
fn closed_form_regimes_match_shooting_for_buy_programs() {
    let m = model(
        ImpactPath::constant(1.0, 2.0).unwrap(),
        ImpactPath::exponential(1.0, -0.5, 2.0).unwrap(),
        2.0,
        -3.0,
    );
    let cf = closed_form(&m, 2000).unwrap();
    let sh = solve_bvp_shooting(&m, &ShootingOptions::default()).unwrap();
    let dev = cf.zeta.iter().zip(&sh.zeta).fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
    assert!(dev < 1e-6 * 3.0);
}

fn family() -> impl Strategy<Value = PathFamily> {
    prop_oneof![
        (0.1f64..3.0).prop_map(|value| PathFamily::Constant { value }),
        (1.0f64..3.0, -0.9f64..2.0).prop_map(|(a, b)| PathFamily::Linear { a, b }),
        (0.1f64..3.0, -2.0f64..3.0).prop_map(|(beta, alpha)| PathFamily::Exponential { beta, alpha }),
        (0.1f64..3.0, -2.0f64..3.0).prop_map(|(beta, alpha)| PathFamily::PowerLaw { beta, alpha }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn derivative_matches_finite_differences(f in family(), u in 0.01f64..0.99) {
        let p = ImpactPath::new(f, 1.0).unwrap();
        let h = 1e-5;
        let fd = (p.eval(u + h).unwrap() - p.eval(u - h).unwrap()) / (2.0 * h);
        let d = p.deriv(u).unwrap();
        prop_assert!((fd - d).abs() <= 1e-6 * (1.0 + d.abs()), "{} vs {}", fd, d);
    }

    #[test]
    fn ttpm_is_scale_invariant(w in 0.5f64..3.0, c in 1e-3f64..1e3) {
        let eta = 0.5;
        let b = -2.0 * eta * w * w;
        let m = model(
            ImpactPath::linear(10.0, b, 1.0).unwrap(),
            ImpactPath::constant(eta, 1.0).unwrap(),
            1.0,
            1.0,
        );
        let t = closed_form(&m, 400).unwrap();
        prop_assert_eq!(detect_ttpm(&t), detect_ttpm(&t.scaled(c)));
    }
}
