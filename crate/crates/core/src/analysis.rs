//! Shape, manipulation and well-posedness reports, plus a Monte-Carlo check
//! of the deterministic cash.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuous::{
    check_existence_uniqueness, check_second_order, closed_form, recognize, solve_bvp_shooting, ShootingOptions,
    Trajectory,
};
use crate::discrete::{
    is_b_matrix, is_diagonally_dominant, is_spd, solve_optimal, DiscreteStrategy, ImpactMatrix,
};
use crate::error::{ExecError, Result};
use crate::impact::MarketModel;

/// Relative dead zone for velocity signs in continuous time, in `|Q|/T`.
pub const VELOCITY_TOL: f64 = 1e-6;
/// Relative dead zone for trade signs in discrete time, in `|Q|`.
pub const TRADE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    ConvexMonotone,
    LinearTwap,
    ConcaveMonotone,
    ConcaveOneTurningPoint,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WellPosedness {
    Strong,
    Weak,
    IllPosed,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub shape: Shape,
    pub ttpm: bool,
    /// The trader can profit from impact: negative discrete cost, or
    /// positive continuous excess cash.
    pub negative_cost: bool,
    pub wellposedness: WellPosedness,
    pub turning_points: usize,
    /// Which tests fired, in cascade order.
    pub reasons: Vec<String>,
}

/// Sign pattern of a schedule: whether any trade runs against the program
/// and how many strict sign changes occur outside the dead zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TtpmReport {
    pub ttpm: bool,
    pub turning_points: usize,
}

/// `expected` is the sign every trade should carry, or 0 for a round trip.
fn sign_pattern(values: &[f64], expected: f64, threshold: f64) -> TtpmReport {
    let mut last = 0.0;
    let mut turning_points = 0;
    let mut ttpm = false;
    for &v in values {
        if v.abs() <= threshold || v == 0.0 {
            continue;
        }
        let s = v.signum();
        if last != 0.0 && s != last {
            turning_points += 1;
        }
        last = s;
        if expected != 0.0 && s != expected {
            ttpm = true;
        }
    }
    TtpmReport { ttpm, turning_points }
}

fn sign_of(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum()
    }
}

/// Continuous schedules: a sell (`Q > 0`) should never have `ζ̇ > 0`.
pub fn detect_ttpm(traj: &Trajectory) -> TtpmReport {
    let q = traj.quantity();
    let horizon = traj.times[traj.grid()];
    sign_pattern(&traj.zeta_dot, -sign_of(q), VELOCITY_TOL * q.abs() / horizon)
}

/// Discrete schedules: every trade should share the sign of `Q`.
pub fn detect_ttpm_discrete(s: &DiscreteStrategy) -> TtpmReport {
    sign_pattern(&s.xi, sign_of(s.quantity), TRADE_TOL * s.quantity.abs())
}

fn shape_from_curvature(curvature: impl Iterator<Item = f64>, tol: f64, ttpm: TtpmReport) -> Shape {
    let (mut convex, mut concave) = (true, true);
    for c in curvature {
        convex &= c >= -tol;
        concave &= c <= tol;
    }
    match (convex, concave, ttpm.ttpm) {
        (true, true, false) => Shape::LinearTwap,
        (true, false, false) => Shape::ConvexMonotone,
        (false, true, false) => Shape::ConcaveMonotone,
        (false, true, true) | (true, true, true) if ttpm.turning_points == 1 => Shape::ConcaveOneTurningPoint,
        _ => Shape::Other,
    }
}

/// Curvature test on `sign(Q) ζ̈`, estimated from velocity differences, with
/// dead zone `10⁻⁶ |Q| / T²`.
pub fn classify_shape(traj: &Trajectory) -> Shape {
    let q = traj.quantity();
    let h = traj.step();
    let horizon = traj.times[traj.grid()];
    let s = q.signum();
    let curvature = traj.zeta_dot.windows(2).map(|w| s * (w[1] - w[0]) / h);
    shape_from_curvature(curvature, VELOCITY_TOL * q.abs() / (horizon * horizon), detect_ttpm(traj))
}

/// Curvature of the remaining-inventory sequence `Q − Σ_{j≤i} ξ_j`.
pub fn classify_shape_discrete(s: &DiscreteStrategy) -> Shape {
    let sign = s.quantity.signum();
    let curvature = s.xi.windows(2).map(|w| -sign * (w[1] - w[0]));
    shape_from_curvature(curvature, TRADE_TOL * s.quantity.abs(), detect_ttpm_discrete(s))
}

/// Time resolution for [`classify_wellposedness`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    /// `N` trading intervals.
    Discrete(usize),
    /// `M` ODE steps.
    Continuous(usize),
}

pub fn classify_wellposedness(model: &MarketModel, resolution: Resolution) -> Result<RegimeReport> {
    match resolution {
        Resolution::Discrete(n) => classify_discrete(model, n),
        Resolution::Continuous(m) => classify_continuous(model, m),
    }
}

fn classify_discrete(model: &MarketModel, n: usize) -> Result<RegimeReport> {
    let grid = model.discretize(n)?;
    let a = ImpactMatrix::build(&grid);
    let q = model.quantity;
    let mut reasons = Vec::new();
    let negative_cost = admits_negative_cost(&a, q);
    if negative_cost {
        reasons.push("a schedule with negative cost exists".to_string());
    }
    let b = is_b_matrix(&a);
    let dd = is_diagonally_dominant(&grid);
    let spd = is_spd(&a);

    if !spd.spd {
        reasons.push(format!(
            "Cholesky fails at row {}: saddle point, no minimizer",
            spd.failed_row.unwrap_or(0)
        ));
        return Ok(RegimeReport {
            shape: Shape::Other,
            ttpm: false,
            negative_cost,
            wellposedness: WellPosedness::IllPosed,
            turning_points: 0,
            reasons,
        });
    }
    let strategy = solve_optimal(&a, q)?;
    let pattern = detect_ttpm_discrete(&strategy);
    let shape = classify_shape_discrete(&strategy);
    let mut wellposedness = if b.is_b_matrix {
        reasons.push("B-matrix".to_string());
        WellPosedness::Strong
    } else {
        if dd.dominant {
            reasons.push("diagonally dominant".to_string());
        }
        reasons.push("positive definite".to_string());
        WellPosedness::Weak
    };
    if wellposedness == WellPosedness::Strong && pattern.ttpm {
        reasons.push("optimal trades change sign despite the B-matrix test".to_string());
        wellposedness = WellPosedness::Weak;
    }
    if pattern.ttpm {
        reasons.push(format!("{} sign change(s) in the optimal trades", pattern.turning_points));
    }
    Ok(RegimeReport {
        shape,
        ttpm: pattern.ttpm,
        negative_cost,
        wellposedness,
        turning_points: pattern.turning_points,
        reasons,
    })
}

/// Whether `inf { ½ ξᵀAξ : Σξ = Q }` is negative. Cost is unbounded below
/// when `A` has a negative direction orthogonal to `1`; otherwise the
/// constrained minimizer is found from the KKT system.
pub fn admits_negative_cost(a: &ImpactMatrix, quantity: f64) -> bool {
    let n = a.dim();
    let m = a.entries();
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let projector = DMatrix::<f64>::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    let restricted = &projector * m * &projector;
    let eig = SymmetricEigen::new(restricted);
    if eig.eigenvalues.min() < -1e-12 * scale {
        return true;
    }
    if quantity == 0.0 {
        return false;
    }
    let mut kkt = DMatrix::<f64>::zeros(n + 1, n + 1);
    kkt.view_mut((0, 0), (n, n)).copy_from(m);
    for i in 0..n {
        kkt[(i, n)] = 1.0;
        kkt[(n, i)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n + 1);
    rhs[n] = quantity;
    match kkt.lu().solve(&rhs) {
        Some(sol) => {
            let xi = sol.rows(0, n);
            let cost = 0.5 * xi.dot(&(m * xi));
            cost < -1e-12 * scale * quantity * quantity
        }
        None => false,
    }
}

/// Solves for the optimal trajectory, by closed form when the regime has
/// one, otherwise by shooting without the existence gate.
pub fn solve_trajectory(model: &MarketModel, grid: usize) -> Result<Trajectory> {
    if recognize(model).is_some() {
        closed_form(model, grid)
    } else {
        solve_bvp_shooting(model, &ShootingOptions::with_grid(grid).forced())
    }
}

/// Excess cash above which a schedule counts as profitable.
fn cash_threshold(model: &MarketModel) -> f64 {
    let s = model.summary_gamma(257);
    let level = model.theta.value_at(0.0).max(model.theta.value_at(model.horizon))
        + s.eta_bar.max(model.eta.value_at(0.0)) / model.horizon;
    1e-9 * model.quantity * model.quantity * level
}

fn classify_continuous(model: &MarketModel, grid: usize) -> Result<RegimeReport> {
    let mut reasons = Vec::new();
    let existence = check_existence_uniqueness(model, grid.max(64))?;
    let second = check_second_order(model);
    if existence.satisfied {
        reasons.push("existence and uniqueness certificate holds".to_string());
    } else {
        reasons.push(format!(
            "existence certificate fails: max({:.6}, {:.6}) >= ln 3",
            existence.integral_theta, existence.integral_eta
        ));
    }
    if second.weakly_well_posed {
        reasons.push(format!("sqrt(gamma) T = {:.6} < pi", second.sqrt_gamma_t));
    } else {
        reasons.push(format!("sqrt(gamma) T = {:.6} >= pi", second.sqrt_gamma_t));
    }

    let traj = match solve_trajectory(model, grid) {
        Ok(t) => t,
        Err(e @ (ExecError::BracketFailure { .. } | ExecError::Singular(_))) => {
            reasons.push(format!("no extremal: {e}"));
            return Ok(RegimeReport {
                shape: Shape::Other,
                ttpm: false,
                negative_cost: false,
                wellposedness: WellPosedness::IllPosed,
                turning_points: 0,
                reasons,
            });
        }
        Err(e @ ExecError::ToleranceFailure { .. }) => {
            reasons.push(format!("solver did not converge: {e}"));
            return Ok(RegimeReport {
                shape: Shape::Other,
                ttpm: false,
                negative_cost: false,
                wellposedness: WellPosedness::Undetermined,
                turning_points: 0,
                reasons,
            });
        }
        Err(e) => return Err(e),
    };
    let pattern = detect_ttpm(&traj);
    let negative_cost = traj.cash > cash_threshold(model);
    if negative_cost {
        reasons.push(format!("positive excess cash {:e}", traj.cash));
    }
    if pattern.ttpm {
        reasons.push(format!("{} velocity sign change(s)", pattern.turning_points));
    }
    let wellposedness = match (existence.satisfied && second.weakly_well_posed, pattern.ttpm) {
        (true, false) => WellPosedness::Strong,
        (true, true) => WellPosedness::Weak,
        (false, _) => WellPosedness::Undetermined,
    };
    Ok(RegimeReport {
        shape: classify_shape(&traj),
        ttpm: pattern.ttpm,
        negative_cost,
        wellposedness,
        turning_points: pattern.turning_points,
        reasons,
    })
}

/// Number of independent RNG streams; fixed so results do not depend on
/// the worker count.
const SHARDS: usize = 64;

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        Moments {
            n,
            mean: self.mean + delta * w,
            m2: self.m2 + other.m2 + delta * delta * self.n as f64 * w,
        }
    }

    fn merge_all(mut parts: Vec<Moments>) -> Moments {
        while parts.len() > 1 {
            parts = parts
                .chunks(2)
                .map(|c| if c.len() == 2 { c[0].merge(c[1]) } else { c[0] })
                .collect();
        }
        parts.pop().unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean_is: f64,
    pub stderr: f64,
    pub paths: u64,
}

/// Simulates `dS = θ ζ̇ dt + σ dW` from `S₀ = 0` and the cash account
/// `dX = −ζ̇ (S + η ζ̇) dt` along `traj`, with Gaussian increments for the
/// noise and the trapezoidal rule for the drift. Returns the sample mean
/// and standard error of `X_T − Q S₀`.
pub fn monte_carlo_is(model: &MarketModel, traj: &Trajectory, paths: u64, seed: u64) -> Result<MonteCarloEstimate> {
    if paths < 100 {
        return Err(ExecError::invalid("paths", "need at least 100"));
    }
    let m = traj.grid();
    let h = traj.step();
    let sqrt_h = h.sqrt();
    let theta_v: Vec<f64> = traj
        .times
        .iter()
        .zip(&traj.zeta_dot)
        .map(|(&t, &v)| model.theta.value_at(t) * v)
        .collect();
    let eta_v: Vec<f64> = traj
        .times
        .iter()
        .zip(&traj.zeta_dot)
        .map(|(&t, &v)| model.eta.value_at(t) * v)
        .collect();
    let noise: Vec<f64> = traj.times[..m].iter().map(|&t| model.sigma_at(t) * sqrt_h).collect();
    let deterministic = noise.iter().all(|s| *s == 0.0);
    let v = &traj.zeta_dot;

    let simulate = |rng: &mut ChaCha8Rng| {
        let (mut s, mut x) = (0.0, 0.0);
        let mut flow = -v[0] * (s + eta_v[0]);
        for k in 0..m {
            let shock = if deterministic {
                0.0
            } else {
                let z: f64 = StandardNormal.sample(rng);
                noise[k] * z
            };
            s += 0.5 * h * (theta_v[k] + theta_v[k + 1]) + shock;
            let next = -v[k + 1] * (s + eta_v[k + 1]);
            x += 0.5 * h * (flow + next);
            flow = next;
        }
        x
    };

    let shards: Vec<Moments> = (0..SHARDS)
        .into_par_iter()
        .map(|shard| {
            let count = paths / SHARDS as u64 + u64::from((shard as u64) < paths % SHARDS as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard as u64);
            let mut acc = Moments::default();
            for _ in 0..count {
                acc.push(simulate(&mut rng));
            }
            acc
        })
        .collect();
    let total = Moments::merge_all(shards);
    let variance = if total.n > 1 { total.m2 / (total.n - 1) as f64 } else { 0.0 };
    Ok(MonteCarloEstimate {
        mean_is: total.mean,
        stderr: (variance.max(0.0) / total.n as f64).sqrt(),
        paths: total.n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::impact::{ImpactPath, PathFamily};

    fn model(theta: ImpactPath, eta: ImpactPath, horizon: f64, q: f64) -> MarketModel {
        MarketModel::deterministic(theta, eta, horizon, q).unwrap()
    }

    fn constant(theta: f64, eta: f64) -> MarketModel {
        model(
            ImpactPath::constant(theta, 1.0).unwrap(),
            ImpactPath::constant(eta, 1.0).unwrap(),
            1.0,
            1.0,
        )
    }

    fn sin_regime() -> MarketModel {
        model(
            ImpactPath::linear(5.0, -2.0, 1.0).unwrap(),
            ImpactPath::constant(0.25, 1.0).unwrap(),
            1.0,
            1.0,
        )
    }

    #[test]
    fn ttpm_examples() {
        let m = constant(1.0, 1.0);
        let twap = Trajectory::twap(&m, 100).unwrap();
        assert_eq!(detect_ttpm(&twap), TtpmReport { ttpm: false, turning_points: 0 });

        let t = closed_form(&sin_regime(), 2000).unwrap();
        assert!(t.initial_velocity > 0.9);
        assert_eq!(detect_ttpm(&t), TtpmReport { ttpm: true, turning_points: 1 });

        let s = DiscreteStrategy::new(vec![0.2, 0.6, 0.2], 1.0).unwrap();
        assert_eq!(detect_ttpm_discrete(&s), TtpmReport { ttpm: false, turning_points: 0 });
        let s = DiscreteStrategy::new(vec![-0.2, 1.4, -0.2], 1.0).unwrap();
        assert_eq!(detect_ttpm_discrete(&s), TtpmReport { ttpm: true, turning_points: 2 });
    }

    #[test]
    fn ttpm_for_buy_programs() {
        let t = closed_form(&sin_regime().with_quantity(-2.0).unwrap(), 2000).unwrap();
        assert_eq!(detect_ttpm(&t), TtpmReport { ttpm: true, turning_points: 1 });
        assert_eq!(classify_shape(&t), Shape::ConcaveOneTurningPoint);
    }

    #[test]
    fn dead_zone_suppresses_dust() {
        let m = constant(1.0, 1.0);
        let mut t = Trajectory::twap(&m, 10).unwrap();
        t.zeta_dot[5] = 1e-7;
        assert!(!detect_ttpm(&t).ttpm);
        t.zeta_dot[5] = 1e-5;
        assert!(detect_ttpm(&t).ttpm);
    }

    #[test]
    fn shapes() {
        let inc = model(
            ImpactPath::linear(1.0, 1.0, 1.0).unwrap(),
            ImpactPath::constant(0.5, 1.0).unwrap(),
            1.0,
            1.0,
        );
        assert_eq!(classify_shape(&closed_form(&inc, 2000).unwrap()), Shape::ConvexMonotone);
        let dec = model(
            ImpactPath::linear(2.0, -1.0, 1.0).unwrap(),
            ImpactPath::constant(0.5, 1.0).unwrap(),
            1.0,
            1.0,
        );
        assert!(1.0 < std::f64::consts::PI.powi(2) * 0.5 / 2.0);
        assert_eq!(classify_shape(&closed_form(&dec, 2000).unwrap()), Shape::ConcaveMonotone);
        let twap = constant(1.0, 1.0);
        assert_eq!(classify_shape(&closed_form(&twap, 2000).unwrap()), Shape::LinearTwap);
    }

    #[test]
    fn discrete_cascade() {
        let r = classify_wellposedness(&constant(1.0, 1.0), Resolution::Discrete(4)).unwrap();
        assert_eq!(r.wellposedness, WellPosedness::Strong);
        assert!(!r.ttpm && !r.negative_cost);
        assert_eq!(r.shape, Shape::LinearTwap);

        let saddle = model(
            ImpactPath::tabulated(vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 3.0, 2.0, 2.0], 3.0).unwrap(),
            ImpactPath::tabulated(vec![0.0, 1.0, 2.0, 3.0], vec![2.0, 2.0, 1.05, 1.05], 3.0).unwrap(),
            3.0,
            1.0,
        );
        let grid = saddle.discretize(3).unwrap();
        assert_eq!(grid.theta, vec![1.0, 3.0, 2.0]);
        assert_eq!(grid.eta, vec![2.0, 2.0, 1.05]);
        let r = classify_wellposedness(&saddle, Resolution::Discrete(3)).unwrap();
        assert_eq!(r.wellposedness, WellPosedness::IllPosed);
        assert!(r.negative_cost);
    }

    #[test]
    fn negative_cost_oracle() {
        // 2×2: A = [[2a, c], [c, 2b]]; along ξ = (1, −1) the cost is a + b − c
        let a = ImpactMatrix::from_rows(&[&[1.0, 1.2], &[1.2, 1.0]]).unwrap();
        assert!(admits_negative_cost(&a, 0.0));
        let a = ImpactMatrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]).unwrap();
        assert!(!admits_negative_cost(&a, 1.0));
        // positive on 1⊥ but 1ᵀA⁻¹1 < 0: constrained minimum Q²/(2·1ᵀA⁻¹1)
        let a = ImpactMatrix::from_rows(&[&[-1.0, 0.0], &[0.0, 3.0]]).unwrap();
        let inv_sum = -1.0 + 1.0 / 3.0;
        assert!(inv_sum < 0.0);
        assert!(admits_negative_cost(&a, 1.0));
    }

    #[test]
    fn continuous_cascade() {
        let r = classify_wellposedness(&constant(1.0, 1.0), Resolution::Continuous(2000)).unwrap();
        assert_eq!(r.wellposedness, WellPosedness::Strong);
        assert_eq!(r.shape, Shape::LinearTwap);

        // ω² = 0.2 at T = 4: onset π²/32 < 0.2, existence 0.8 < ln 3, √γT ≈ 1.79
        let weak = model(
            ImpactPath::linear(2.0, -0.4, 4.0).unwrap(),
            ImpactPath::constant(1.0, 4.0).unwrap(),
            4.0,
            1.0,
        );
        let r = classify_wellposedness(&weak, Resolution::Continuous(2000)).unwrap();
        assert_eq!(r.wellposedness, WellPosedness::Weak, "{r:?}");
        assert!(r.ttpm);
        assert_eq!(r.shape, Shape::ConcaveOneTurningPoint);

        let eta = 0.25;
        let b = -2.0 * std::f64::consts::PI.powi(2) * eta;
        let resonant = model(
            ImpactPath::linear(10.0, b, 1.0).unwrap(),
            ImpactPath::constant(eta, 1.0).unwrap(),
            1.0,
            1.0,
        );
        let r = classify_wellposedness(&resonant, Resolution::Continuous(2000)).unwrap();
        assert_eq!(r.wellposedness, WellPosedness::IllPosed);

        let r = classify_wellposedness(&sin_regime(), Resolution::Continuous(2000)).unwrap();
        assert_eq!(r.wellposedness, WellPosedness::Undetermined);
        assert!(r.ttpm);
    }

    #[test]
    fn monte_carlo_deterministic() {
        let m = model(
            ImpactPath::linear(1.0, 1.0, 1.0).unwrap(),
            ImpactPath::constant(0.5, 1.0).unwrap(),
            1.0,
            1.0,
        );
        let t = closed_form(&m, 2000).unwrap();
        let est = monte_carlo_is(&m, &t, 256, 7).unwrap();
        assert!((est.mean_is - t.cash).abs() < 1e-6, "{} vs {}", est.mean_is, t.cash);
        assert_eq!(est.stderr, 0.0);

        let zero = m.with_quantity(0.0).unwrap();
        let t = closed_form(&zero, 100).unwrap();
        let est = monte_carlo_is(&zero, &t, 100, 1).unwrap();
        assert_eq!((est.mean_is, est.stderr), (0.0, 0.0));
        assert!(monte_carlo_is(&zero, &t, 99, 1).is_err());
    }

    #[test]
    fn monte_carlo_noisy_twap() {
        let m = MarketModel::new(
            ImpactPath::constant(1.0, 1.0).unwrap(),
            ImpactPath::constant(1.0, 1.0).unwrap(),
            Some(ImpactPath::volatility(PathFamily::Constant { value: 0.1 }, 1.0).unwrap()),
            1.0,
            1.0,
        )
        .unwrap();
        let t = Trajectory::twap(&m, 200).unwrap();
        let a = monte_carlo_is(&m, &t, 20_000, 3).unwrap();
        let b = monte_carlo_is(&m, &t, 20_000, 3).unwrap();
        assert_eq!(a, b);
        assert!((a.mean_is + 1.5).abs() < 3.0 * a.stderr, "{a:?}");
        // Var ∫ σ ζ dW = σ² ∫ (1 − t)² dt = σ²/3
        let sd = (0.01f64 / 3.0).sqrt();
        assert!((a.stderr * (20_000f64).sqrt() / sd - 1.0).abs() < 0.05);
    }

    #[test]
    fn moments_merge_matches_direct() {
        let xs: Vec<f64> = (0..37).map(|k| (k as f64 * 0.7).sin()).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|x| all.push(*x));
        let parts = xs
            .chunks(5)
            .map(|c| {
                let mut m = Moments::default();
                c.iter().for_each(|x| m.push(*x));
                m
            })
            .collect();
        let merged = Moments::merge_all(parts);
        assert!((merged.mean - all.mean).abs() < 1e-14);
        assert!((merged.m2 - all.m2).abs() < 1e-12);
    }
}
