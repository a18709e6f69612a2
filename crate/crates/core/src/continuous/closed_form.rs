//! Regimes of the Euler-Lagrange problem with analytic solutions.

use serde::{Deserialize, Serialize};

use crate::error::{ExecError, Result};
use crate::impact::{MarketModel, PathFamily};

use super::{check_grid, uniform_grid, Trajectory};

/// Impact configurations with a closed-form optimal schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Constant impacts: `ζ = Q (1 − t/T)`.
    Twap,
    /// Constant permanent impact: `ζ̇ = −Q / (‖η‖₋₁ η_t)`.
    ConstantPermanent,
    /// `θ = a + b t` with `b > 0`, constant `η`: hyperbolic sine.
    LinearIncreasing { gamma: f64 },
    /// `θ = a + b t` with `b < 0`, constant `η`: sine.
    LinearDecreasing { gamma: f64 },
    /// Exponential impacts sharing the decay rate `alpha`, with
    /// `κ = β_tp / (T β_p)`.
    ExponentialEqual { alpha: f64, kappa: f64 },
}

/// Identifies the analytic regime of a model, if any.
pub fn recognize(model: &MarketModel) -> Option<Regime> {
    let (theta, eta) = (&model.theta, &model.eta);
    if theta.is_constant() {
        return Some(if eta.is_constant() {
            Regime::Twap
        } else {
            Regime::ConstantPermanent
        });
    }
    match (theta.family(), eta.family()) {
        (PathFamily::Linear { b, .. }, _) if eta.is_constant() => {
            let gamma = b / (2.0 * eta.value_at(0.0));
            Some(if *b > 0.0 {
                Regime::LinearIncreasing { gamma }
            } else {
                Regime::LinearDecreasing { gamma }
            })
        }
        (
            PathFamily::Exponential { beta: bp, alpha: ap },
            PathFamily::Exponential { beta: btp, alpha: atp },
        ) if (ap - atp).abs() <= 1e-12 * ap.abs().max(1.0) => Some(Regime::ExponentialEqual {
            alpha: *ap,
            kappa: btp / (model.horizon * bp),
        }),
        _ => None,
    }
}

/// Analytic trajectory sampled on `grid` intervals.
pub fn closed_form(model: &MarketModel, grid: usize) -> Result<Trajectory> {
    check_grid(grid)?;
    let regime = recognize(model).ok_or_else(|| {
        ExecError::Unsupported(
            "no closed form: need constant theta, linear theta with constant eta, \
             or exponential impacts with equal decay"
                .into(),
        )
    })?;
    let q = model.quantity;
    let horizon = model.horizon;
    let times = uniform_grid(horizon, grid);
    let (zeta, zeta_dot): (Vec<f64>, Vec<f64>) = match regime {
        Regime::Twap => times.iter().map(|t| (q * (1.0 - t / horizon), -q / horizon)).unzip(),
        Regime::ConstantPermanent => {
            let eta = &model.eta;
            let norm = eta.reciprocal_integral(horizon)?;
            times
                .iter()
                .map(|&t| {
                    let r = eta.reciprocal_integral(t).expect("grid inside horizon");
                    (q * (1.0 - r / norm), -q / (norm * eta.value_at(t)))
                })
                .unzip()
        }
        Regime::LinearIncreasing { gamma } => {
            let s = gamma.sqrt();
            times
                .iter()
                .map(|&t| {
                    let (sh, ch) = hyperbolic_ratio(s, horizon - t, horizon);
                    (q * sh, -q * s * ch)
                })
                .unzip()
        }
        Regime::LinearDecreasing { gamma } => {
            let w = gamma.abs().sqrt();
            let denom = (w * horizon).sin();
            if denom.abs() < 1e-10 {
                return Err(ExecError::Singular(format!(
                    "sin(sqrt|gamma| T) = {denom:e}: no optimal schedule"
                )));
            }
            times
                .iter()
                .map(|&t| {
                    let x = w * (horizon - t);
                    (q * x.sin() / denom, -q * w * x.cos() / denom)
                })
                .unzip()
        }
        Regime::ExponentialEqual { alpha, kappa } => exponential_equal(q, horizon, alpha, kappa, &times)?,
    };
    Ok(Trajectory::from_samples(model, zeta, zeta_dot))
}

/// `(sinh(s x) / sinh(s X), cosh(s x) / sinh(s X))` without overflow.
fn hyperbolic_ratio(s: f64, x: f64, total: f64) -> (f64, f64) {
    if s * total < 20.0 {
        let d = (s * total).sinh();
        return ((s * x).sinh() / d, (s * x).cosh() / d);
    }
    let lead = (s * (x - total)).exp();
    let denom = 1.0 - (-2.0 * s * total).exp();
    let tail = (-2.0 * s * x).exp();
    (lead * (1.0 - tail) / denom, lead * (1.0 + tail) / denom)
}

/// `ζ̈ = (α/T) ζ̇ − α/(2κT²) ζ`: characteristic roots `(α ± d) / 2T` with
/// `d² = α² − 2α/κ`. Written as `ζ = Q e^{αt/2T} S(T−t) / S(T)` where `S`
/// is `sinh`, `sin` or linear according to the sign of `d²`.
fn exponential_equal(q: f64, horizon: f64, alpha: f64, kappa: f64, times: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let disc = alpha * alpha - 2.0 * alpha / kappa;
    let rate = 0.5 * alpha / horizon;
    let k = 0.5 * disc.abs().sqrt() / horizon;
    let scaled = k * horizon;
    let oscillatory = disc < 0.0 && scaled > 1e-8;
    if oscillatory && scaled.sin().abs() < 1e-10 {
        return Err(ExecError::Singular(format!(
            "sin(sqrt(2 alpha/kappa - alpha^2) / 2) vanishes at alpha = {alpha}, kappa = {kappa}"
        )));
    }
    let out = times
        .iter()
        .map(|&t| {
            let x = horizon - t;
            let growth = (rate * t).exp();
            // shape = S(x)/S(T), slope = S'(x)/S(T)
            let (shape, slope) = if disc > 0.0 && scaled > 1e-8 {
                let (sh, ch) = hyperbolic_ratio(k, x, horizon);
                (sh, k * ch)
            } else if oscillatory {
                let d = scaled.sin();
                ((k * x).sin() / d, k * (k * x).cos() / d)
            } else {
                (x / horizon, 1.0 / horizon)
            };
            (q * growth * shape, q * growth * (rate * shape - slope))
        })
        .unzip();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuous::{solve_bvp_shooting, ShootingOptions};
    use crate::impact::ImpactPath;
    use approx::assert_relative_eq;

    fn model(theta: ImpactPath, eta: ImpactPath, horizon: f64, q: f64) -> MarketModel {
        MarketModel::deterministic(theta, eta, horizon, q).unwrap()
    }

    #[test]
    fn twap() {
        let m = model(
            ImpactPath::constant(1.0, 2.0).unwrap(),
            ImpactPath::constant(3.0, 2.0).unwrap(),
            2.0,
            4.0,
        );
        let t = closed_form(&m, 10).unwrap();
        assert_eq!(recognize(&m), Some(Regime::Twap));
        for (time, z) in t.times.iter().zip(&t.zeta) {
            assert_relative_eq!(*z, 4.0 * (1.0 - time / 2.0), epsilon = 1e-15);
        }
        assert!(t.zeta_dot.iter().all(|v| *v == -2.0));
    }

    #[test]
    fn sin_regime_initial_velocity() {
        let m = model(
            ImpactPath::linear(5.0, -2.0, 1.0).unwrap(),
            ImpactPath::constant(0.25, 1.0).unwrap(),
            1.0,
            1.0,
        );
        let t = closed_form(&m, 100).unwrap();
        let want = -2.0 * 2f64.cos() / 2f64.sin();
        assert_relative_eq!(t.initial_velocity, want, epsilon = 1e-14);
        assert_relative_eq!(want, 0.915_3, epsilon = 1e-4);
        // onset threshold π²η/(2T²)
        assert!(2.0 > std::f64::consts::PI.powi(2) * 0.25 / 2.0);
    }

    #[test]
    fn sin_regime_singular_points() {
        let eta = 0.25;
        let b = -2.0 * std::f64::consts::PI.powi(2) * eta;
        let m = model(
            ImpactPath::linear(10.0, b, 1.0).unwrap(),
            ImpactPath::constant(eta, 1.0).unwrap(),
            1.0,
            1.0,
        );
        assert!(matches!(closed_form(&m, 100), Err(ExecError::Singular(_))));
    }

    #[test]
    fn unsupported_regime() {
        let m = model(
            ImpactPath::linear(2.0, -1.0, 1.0).unwrap(),
            ImpactPath::linear(1.0, 0.5, 1.0).unwrap(),
            1.0,
            1.0,
        );
        assert!(matches!(closed_form(&m, 100), Err(ExecError::Unsupported(_))));
    }

    #[test]
    fn exponential_equal_oscillatory_branch() {
        let m = model(
            ImpactPath::exponential(1.0, 1.0, 1.0).unwrap(),
            ImpactPath::exponential(1.0, 1.0, 1.0).unwrap(),
            1.0,
            1.0,
        );
        assert_eq!(recognize(&m), Some(Regime::ExponentialEqual { alpha: 1.0, kappa: 1.0 }));
        let t = closed_form(&m, 2000).unwrap();
        assert_eq!(t.zeta[0], 1.0);
        assert!(t.zeta[2000].abs() < 1e-15);
        let s = solve_bvp_shooting(&m, &ShootingOptions::default()).unwrap();
        let dev = t.zeta.iter().zip(&s.zeta).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(dev < 1e-6, "{dev}");
    }

    #[test]
    fn exponential_equal_repeated_root() {
        // α = 2/κ: ζ = Q (1 − t/T) e^{αt/2T}, which also solves the BVP
        let (alpha, kappa, horizon) = (0.8, 2.5, 1.3);
        let m = model(
            ImpactPath::exponential(1.0, alpha, horizon).unwrap(),
            ImpactPath::exponential(kappa * horizon, alpha, horizon).unwrap(),
            horizon,
            1.0,
        );
        let t = closed_form(&m, 200).unwrap();
        for (time, z) in t.times.iter().zip(&t.zeta) {
            let want = (1.0 - time / horizon) * (alpha * time / (2.0 * horizon)).exp();
            assert_relative_eq!(*z, want, epsilon = 1e-14);
        }
        let s = solve_bvp_shooting(&m, &ShootingOptions::default()).unwrap();
        assert_relative_eq!(s.initial_velocity, t.initial_velocity, epsilon = 1e-7);
    }

    #[test]
    fn exponential_equal_near_repeated_root_is_continuous() {
        let horizon = 1.0;
        let kappa = 2.5;
        let at = |alpha: f64| {
            let m = model(
                ImpactPath::exponential(1.0, alpha, horizon).unwrap(),
                ImpactPath::exponential(kappa, alpha, horizon).unwrap(),
                horizon,
                1.0,
            );
            closed_form(&m, 100).unwrap().initial_velocity
        };
        assert_relative_eq!(at(0.8 - 1e-9), at(0.8), epsilon = 1e-7);
        assert_relative_eq!(at(0.8 + 1e-9), at(0.8), epsilon = 1e-7);
    }

    #[test]
    fn large_sinh_argument_does_not_overflow() {
        let m = model(
            ImpactPath::linear(1.0, 2000.0, 1.0).unwrap(),
            ImpactPath::constant(1e-3, 1.0).unwrap(),
            1.0,
            1.0,
        );
        let t = closed_form(&m, 100).unwrap();
        assert!(t.zeta.iter().chain(&t.zeta_dot).all(|v| v.is_finite()));
        assert_eq!(t.zeta[100], 0.0);
        assert_relative_eq!(t.zeta[0], 1.0, epsilon = 1e-15);
    }
}
