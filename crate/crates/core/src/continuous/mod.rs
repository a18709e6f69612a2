//! Continuous-time execution.
//!
//! An inventory path `ζ` from `ζ(0) = Q` to `ζ(T) = 0` earns the excess cash
//! `C(ζ) = ∫ (θ ζ̇ ζ − η ζ̇²) dt`, which is maximized. Extremals solve
//! `2η ζ̈ + 2η̇ ζ̇ − θ̇ ζ = 0`; [`shooting`] integrates that boundary-value
//! problem numerically and [`closed_form`] evaluates the regimes with
//! analytic solutions.

pub mod closed_form;
pub mod shooting;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ExecError, Result};
use crate::impact::MarketModel;
use crate::quad::{simpson, simpson_fn};

pub use closed_form::{closed_form, recognize, Regime};
pub use shooting::{integrate_ivp, solve_bvp_shooting, ShootingOptions};

/// Inventory and velocity sampled on a uniform grid of `M + 1` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub zeta: Vec<f64>,
    pub zeta_dot: Vec<f64>,
    pub initial_velocity: f64,
    /// Excess cash `C(ζ)` by Simpson quadrature on the grid.
    pub cash: f64,
}

impl Trajectory {
    pub(crate) fn from_samples(model: &MarketModel, zeta: Vec<f64>, zeta_dot: Vec<f64>) -> Self {
        let m = zeta.len() - 1;
        let times = uniform_grid(model.horizon, m);
        let initial_velocity = zeta_dot[0];
        let mut traj = Trajectory {
            times,
            zeta,
            zeta_dot,
            initial_velocity,
            cash: 0.0,
        };
        traj.cash = cash_functional(model, &traj);
        traj
    }

    /// Constant-speed schedule `ζ(t) = Q (1 − t/T)`.
    pub fn twap(model: &MarketModel, grid: usize) -> Result<Self> {
        check_grid(grid)?;
        let (q, horizon) = (model.quantity, model.horizon);
        let zeta = uniform_grid(horizon, grid)
            .iter()
            .map(|t| q * (1.0 - t / horizon))
            .collect();
        Ok(Self::from_samples(model, zeta, vec![-q / horizon; grid + 1]))
    }

    /// Number of intervals `M`.
    pub fn grid(&self) -> usize {
        self.times.len() - 1
    }

    pub fn step(&self) -> f64 {
        self.times[self.times.len() - 1] / self.grid() as f64
    }

    pub fn quantity(&self) -> f64 {
        self.zeta[0]
    }

    /// Multiplies inventory and velocity by `c`; cash scales by `c²`.
    pub fn scaled(&self, c: f64) -> Self {
        Trajectory {
            times: self.times.clone(),
            zeta: self.zeta.iter().map(|v| c * v).collect(),
            zeta_dot: self.zeta_dot.iter().map(|v| c * v).collect(),
            initial_velocity: c * self.initial_velocity,
            cash: c * c * self.cash,
        }
    }
}

pub(crate) fn uniform_grid(horizon: f64, m: usize) -> Vec<f64> {
    let h = horizon / m as f64;
    (0..=m)
        .map(|k| if k == m { horizon } else { k as f64 * h })
        .collect()
}

pub(crate) fn check_grid(grid: usize) -> Result<()> {
    if grid < 2 || grid % 2 != 0 {
        return Err(ExecError::invalid("grid", "must be an even number of intervals"));
    }
    Ok(())
}

/// `C(ζ) = ∫₀ᵀ (θ ζ̇ ζ − η ζ̇²) dt` by composite Simpson on the trajectory grid.
pub fn cash_functional(model: &MarketModel, traj: &Trajectory) -> f64 {
    let integrand: Vec<f64> = traj
        .times
        .iter()
        .zip(traj.zeta.iter().zip(&traj.zeta_dot))
        .map(|(&t, (&z, &v))| model.theta.value_at(t) * v * z - model.eta.value_at(t) * v * v)
        .collect();
    simpson(&integrand, traj.step())
}

/// Sufficient condition for a unique extremal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExistenceCertificate {
    /// `½ ∫ |θ̇ / η| dt`
    pub integral_theta: f64,
    /// `∫ |η̇ / η| dt`
    pub integral_eta: f64,
    /// `ln 3`, the supremum of `ln(1 + 2λ)` over `λ ∈ (0, 1)`.
    pub bound: f64,
    pub satisfied: bool,
}

pub fn check_existence_uniqueness(model: &MarketModel, quad_points: usize) -> Result<ExistenceCertificate> {
    if quad_points < 64 {
        return Err(ExecError::invalid("quad_points", "need at least 64"));
    }
    let (theta, eta) = (&model.theta, &model.eta);
    let integral_theta = 0.5
        * simpson_fn(
            |t| (theta.deriv_at(t) / eta.value_at(t)).abs(),
            0.0,
            model.horizon,
            quad_points,
        );
    let integral_eta = simpson_fn(
        |t| (eta.deriv_at(t) / eta.value_at(t)).abs(),
        0.0,
        model.horizon,
        quad_points,
    );
    let bound = 3f64.ln();
    Ok(ExistenceCertificate {
        integral_theta,
        integral_eta,
        bound,
        satisfied: integral_theta.max(integral_eta) < bound,
    })
}

/// `√γ T < π` certifies that the extremal is a maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderCertificate {
    pub eta_bar: f64,
    pub theta_bar: f64,
    pub gamma: f64,
    pub sqrt_gamma_t: f64,
    pub weakly_well_posed: bool,
}

pub fn check_second_order(model: &MarketModel) -> SecondOrderCertificate {
    let s = model.summary_gamma(10_001);
    let sqrt_gamma_t = s.gamma.sqrt() * model.horizon;
    SecondOrderCertificate {
        eta_bar: s.eta_bar,
        theta_bar: s.theta_bar,
        gamma: s.gamma,
        sqrt_gamma_t,
        weakly_well_posed: sqrt_gamma_t < PI,
    }
}

/// Analytic excess cash of the optimal schedule under `θ = a + b t`
/// (`b < 0`) and constant `η`:
/// `C = Q²/2 · (−a + b cot(√|γ| T) / √|γ|)`, `γ = b / (2η)`.
///
/// The cotangent takes `√|γ| T`; this is the usual formula with `T = 1`.
/// At `b = 0` the continuous extension `−Q²/2 · (a + 2η/T)` is returned.
pub fn excess_cash_linear(a: f64, b: f64, eta: f64, horizon: f64, quantity: f64) -> Result<f64> {
    if !(eta > 0.0 && horizon > 0.0) {
        return Err(ExecError::invalid("eta", "eta and T must be positive"));
    }
    if b > 0.0 {
        return Err(ExecError::invalid("b", "permanent impact must be non-increasing"));
    }
    if !(a > b.abs() * horizon) {
        return Err(ExecError::invalid("a", "need a > |b| T for positive impact"));
    }
    let half_q2 = 0.5 * quantity * quantity;
    if b == 0.0 {
        return Ok(half_q2 * (-a - 2.0 * eta / horizon));
    }
    let omega = (b.abs() / (2.0 * eta)).sqrt();
    let arg = omega * horizon;
    if arg.sin().abs() < 1e-10 {
        return Err(ExecError::Singular(format!(
            "sin(sqrt|gamma| T) vanishes at |b| = {}",
            b.abs()
        )));
    }
    Ok(half_q2 * (-a + b * arg.cos() / arg.sin() / omega))
}
