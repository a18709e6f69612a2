//! Shooting on the initial velocity.
//!
//! The Euler-Lagrange equation is integrated as the first-order system
//! `(ζ, ζ̇)' = (ζ̇, −(η̇/η) ζ̇ + (θ̇/2η) ζ)` with classical RK4 on `M` fixed
//! steps, and `ζ̇(0)` is bisected until the terminal inventory vanishes.

use crate::error::{ExecError, Result};
use crate::impact::MarketModel;

use super::{check_existence_uniqueness, check_grid, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingOptions {
    /// RK4 steps `M`; must be even and at least 100.
    pub grid: usize,
    /// Terminal tolerance relative to `|Q|`.
    pub tol: f64,
    /// Solve even when the existence certificate fails.
    pub force: bool,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions {
            grid: 2000,
            tol: 1e-8,
            force: false,
        }
    }
}

impl ShootingOptions {
    pub fn with_grid(grid: usize) -> Self {
        ShootingOptions {
            grid,
            ..Self::default()
        }
    }

    pub fn forced(self) -> Self {
        ShootingOptions { force: true, ..self }
    }
}

const MAX_DOUBLINGS: u32 = 10;
const MAX_BISECTIONS: u32 = 200;

/// ODE coefficients on the node and midpoint grid: `ζ̈ = damp·ζ̇ + pull·ζ`.
struct Coefficients {
    damp: Vec<f64>,
    pull: Vec<f64>,
    h: f64,
}

impl Coefficients {
    fn new(model: &MarketModel, grid: usize) -> Self {
        let h = model.horizon / grid as f64;
        let (theta, eta) = (&model.theta, &model.eta);
        let mut damp = Vec::with_capacity(2 * grid + 1);
        let mut pull = Vec::with_capacity(2 * grid + 1);
        for k in 0..=2 * grid {
            let t = (k as f64 * 0.5 * h).min(model.horizon);
            let e = eta.value_at(t);
            damp.push(-eta.deriv_at(t) / e);
            pull.push(theta.deriv_at(t) / (2.0 * e));
        }
        Coefficients { damp, pull, h }
    }

    #[inline]
    fn rhs(&self, idx: usize, z: f64, v: f64) -> (f64, f64) {
        (v, self.damp[idx] * v + self.pull[idx] * z)
    }

    /// One RK4 step from node `k`.
    #[inline]
    fn step(&self, k: usize, z: f64, v: f64) -> (f64, f64) {
        let h = self.h;
        let (i0, im, i1) = (2 * k, 2 * k + 1, 2 * k + 2);
        let (a1, b1) = self.rhs(i0, z, v);
        let (a2, b2) = self.rhs(im, z + 0.5 * h * a1, v + 0.5 * h * b1);
        let (a3, b3) = self.rhs(im, z + 0.5 * h * a2, v + 0.5 * h * b2);
        let (a4, b4) = self.rhs(i1, z + h * a3, v + h * b3);
        (
            z + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
            v + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
        )
    }

    fn grid(&self) -> usize {
        (self.damp.len() - 1) / 2
    }

    fn terminal(&self, z0: f64, v0: f64) -> f64 {
        let (mut z, mut v) = (z0, v0);
        for k in 0..self.grid() {
            (z, v) = self.step(k, z, v);
        }
        z
    }

    fn path(&self, z0: f64, v0: f64) -> (Vec<f64>, Vec<f64>) {
        let m = self.grid();
        let mut zeta = Vec::with_capacity(m + 1);
        let mut zeta_dot = Vec::with_capacity(m + 1);
        let (mut z, mut v) = (z0, v0);
        zeta.push(z);
        zeta_dot.push(v);
        for k in 0..m {
            (z, v) = self.step(k, z, v);
            zeta.push(z);
            zeta_dot.push(v);
        }
        (zeta, zeta_dot)
    }
}

/// Integrates the initial-value problem `ζ(0) = Q`, `ζ̇(0) = v0` on `grid`
/// RK4 steps and returns inventory and velocity samples.
pub fn integrate_ivp(model: &MarketModel, v0: f64, grid: usize) -> (Vec<f64>, Vec<f64>) {
    Coefficients::new(model, grid.max(1)).path(model.quantity, v0)
}

/// Solves the boundary-value problem by bisection on `ζ̇(0)`.
pub fn solve_bvp_shooting(model: &MarketModel, opts: &ShootingOptions) -> Result<Trajectory> {
    check_grid(opts.grid)?;
    if opts.grid < 100 {
        return Err(ExecError::invalid("grid", "need at least 100 steps"));
    }
    if !(opts.tol > 0.0 && opts.tol.is_finite()) {
        return Err(ExecError::invalid("tol", "must be positive"));
    }
    if !opts.force {
        let cert = check_existence_uniqueness(model, opts.grid.max(64))?;
        if !cert.satisfied {
            return Err(ExecError::NotCertified {
                integral_theta: cert.integral_theta,
                integral_eta: cert.integral_eta,
            });
        }
    }
    let q = model.quantity;
    let coeffs = Coefficients::new(model, opts.grid);
    if q == 0.0 {
        let n = opts.grid + 1;
        return Ok(Trajectory::from_samples(model, vec![0.0; n], vec![0.0; n]));
    }

    let target = opts.tol * q.abs();
    let scale = 10.0 * q.abs() / model.horizon;
    let (mut lo, mut hi) = (-scale, scale);
    let (mut f_lo, mut f_hi) = (coeffs.terminal(q, lo), coeffs.terminal(q, hi));
    let mut doublings = 0;
    while f_lo.signum() == f_hi.signum() && f_lo.abs() > target && f_hi.abs() > target {
        if doublings == MAX_DOUBLINGS || !(f_lo.is_finite() && f_hi.is_finite()) {
            return Err(ExecError::BracketFailure { doublings });
        }
        lo *= 2.0;
        hi *= 2.0;
        f_lo = coeffs.terminal(q, lo);
        f_hi = coeffs.terminal(q, hi);
        doublings += 1;
    }

    let v0 = if f_lo.abs() <= target {
        lo
    } else if f_hi.abs() <= target {
        hi
    } else {
        let mut found = None;
        let mut residual = f64::INFINITY;
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            let f_mid = coeffs.terminal(q, mid);
            residual = f_mid.abs();
            if residual <= target {
                found = Some(mid);
                break;
            }
            if f_mid.signum() == f_lo.signum() {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
            }
            if mid == lo && mid == hi {
                break;
            }
        }
        found.ok_or(ExecError::ToleranceFailure {
            iterations: MAX_BISECTIONS,
            residual,
        })?
    };

    let (zeta, zeta_dot) = coeffs.path(q, v0);
    Ok(Trajectory::from_samples(model, zeta, zeta_dot))
}
