//! Time-varying impact paths and the market model built from them.
//!
//! A path is one of a handful of parametric families, or a table of knots
//! with piecewise-linear interpolation. Every path lives on `[0, T]` and is
//! validated at construction: impact paths must be strictly positive there,
//! volatility paths only non-negative.

use serde::{Deserialize, Serialize};

use crate::error::{ExecError, Result};

/// Relative slack allowed on the `[0, T]` domain check, for grid points that
/// land a rounding error past an endpoint.
const DOMAIN_SLACK: f64 = 1e-12;

/// Parametric family of an impact path, as it appears in model JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum PathFamily {
    Constant {
        #[serde(alias = "c")]
        value: f64,
    },
    /// `a + b t`
    Linear { a: f64, b: f64 },
    /// `beta * exp(-alpha t / T)`
    Exponential { beta: f64, alpha: f64 },
    /// `beta * (1 + t / T)^(-alpha)`
    PowerLaw { beta: f64, alpha: f64 },
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sign {
    Positive,
    NonNegative,
}

/// A validated function of time on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactPath {
    family: PathFamily,
    horizon: f64,
}

impl ImpactPath {
    /// Builds a strictly positive path (permanent or temporary impact).
    pub fn new(family: PathFamily, horizon: f64) -> Result<Self> {
        Self::validated(family, horizon, Sign::Positive, "path")
    }

    /// Builds a volatility path, which may vanish.
    pub fn volatility(family: PathFamily, horizon: f64) -> Result<Self> {
        Self::validated(family, horizon, Sign::NonNegative, "sigma")
    }

    pub fn constant(value: f64, horizon: f64) -> Result<Self> {
        Self::new(PathFamily::Constant { value }, horizon)
    }

    pub fn linear(a: f64, b: f64, horizon: f64) -> Result<Self> {
        Self::new(PathFamily::Linear { a, b }, horizon)
    }

    pub fn exponential(beta: f64, alpha: f64, horizon: f64) -> Result<Self> {
        Self::new(PathFamily::Exponential { beta, alpha }, horizon)
    }

    pub fn power_law(beta: f64, alpha: f64, horizon: f64) -> Result<Self> {
        Self::new(PathFamily::PowerLaw { beta, alpha }, horizon)
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<f64>, horizon: f64) -> Result<Self> {
        Self::new(PathFamily::Tabulated { times, values }, horizon)
    }

    fn validated(family: PathFamily, horizon: f64, sign: Sign, field: &str) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(ExecError::invalid("T", "horizon must be finite and positive"));
        }
        let ok = |v: f64| match sign {
            Sign::Positive => v > 0.0,
            Sign::NonNegative => v >= 0.0,
        };
        let need = match sign {
            Sign::Positive => "strictly positive",
            Sign::NonNegative => "non-negative",
        };
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ExecError::invalid(format!("{field}.{name}"), "must be finite"))
            }
        };
        match &family {
            PathFamily::Constant { value } => {
                finite("value", *value)?;
                if !ok(*value) {
                    return Err(ExecError::invalid(format!("{field}.value"), format!("must be {need}")));
                }
            }
            PathFamily::Linear { a, b } => {
                finite("a", *a)?;
                finite("b", *b)?;
                if !ok(*a) || !ok(a + b * horizon) {
                    return Err(ExecError::invalid(
                        format!("{field}.b"),
                        format!("a + b t must be {need} on [0, T]"),
                    ));
                }
            }
            PathFamily::Exponential { beta, alpha } | PathFamily::PowerLaw { beta, alpha } => {
                finite("beta", *beta)?;
                finite("alpha", *alpha)?;
                if !ok(*beta) {
                    return Err(ExecError::invalid(format!("{field}.beta"), format!("must be {need}")));
                }
            }
            PathFamily::Tabulated { times, values } => {
                if times.len() != values.len() {
                    return Err(ExecError::invalid(
                        format!("{field}.values"),
                        "times and values must have equal length",
                    ));
                }
                if times.len() < 2 {
                    return Err(ExecError::invalid(format!("{field}.times"), "need at least two knots"));
                }
                if times.iter().chain(values).any(|v| !v.is_finite()) {
                    return Err(ExecError::invalid(format!("{field}.times"), "knots must be finite"));
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(ExecError::invalid(format!("{field}.times"), "must be strictly increasing"));
                }
                let slack = 1e-9 * horizon;
                if times[0].abs() > slack || (times[times.len() - 1] - horizon).abs() > slack {
                    return Err(ExecError::invalid(format!("{field}.times"), "must span exactly [0, T]"));
                }
                // piecewise-linear between knots: the sign on [0, T] is decided by the knots
                if values.iter().any(|v| !ok(*v)) {
                    return Err(ExecError::invalid(format!("{field}.values"), format!("must be {need}")));
                }
            }
        }
        Ok(ImpactPath { family, horizon })
    }

    pub fn family(&self) -> &PathFamily {
        &self.family
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn check_domain(&self, t: f64) -> Result<f64> {
        let slack = DOMAIN_SLACK * self.horizon;
        if !(t >= -slack && t <= self.horizon + slack) {
            return Err(ExecError::Domain {
                t,
                horizon: self.horizon,
            });
        }
        Ok(t.clamp(0.0, self.horizon))
    }

    /// Value of the path at `t`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let t = self.check_domain(t)?;
        Ok(self.value_at(t))
    }

    /// Time derivative at `t`: analytic for parametric families, central
    /// differences with step `T * 1e-6` for tables (one-sided at the ends).
    pub fn deriv(&self, t: f64) -> Result<f64> {
        let t = self.check_domain(t)?;
        Ok(self.deriv_at(t))
    }

    pub(crate) fn value_at(&self, t: f64) -> f64 {
        let horizon = self.horizon;
        match &self.family {
            PathFamily::Constant { value } => *value,
            PathFamily::Linear { a, b } => a + b * t,
            PathFamily::Exponential { beta, alpha } => beta * (-alpha * t / horizon).exp(),
            PathFamily::PowerLaw { beta, alpha } => beta * (1.0 + t / horizon).powf(-alpha),
            PathFamily::Tabulated { times, values } => interpolate(times, values, t),
        }
    }

    pub(crate) fn deriv_at(&self, t: f64) -> f64 {
        let horizon = self.horizon;
        match &self.family {
            PathFamily::Constant { .. } => 0.0,
            PathFamily::Linear { b, .. } => *b,
            PathFamily::Exponential { beta, alpha } => -alpha / horizon * beta * (-alpha * t / horizon).exp(),
            PathFamily::PowerLaw { beta, alpha } => {
                -alpha / horizon * beta * (1.0 + t / horizon).powf(-alpha - 1.0)
            }
            PathFamily::Tabulated { .. } => {
                let h = horizon * 1e-6;
                if t - h < 0.0 {
                    (self.value_at(t + h) - self.value_at(t)) / h
                } else if t + h > horizon {
                    (self.value_at(t) - self.value_at(t - h)) / h
                } else {
                    (self.value_at(t + h) - self.value_at(t - h)) / (2.0 * h)
                }
            }
        }
    }

    /// True when the path does not vary in time.
    pub fn is_constant(&self) -> bool {
        match &self.family {
            PathFamily::Constant { .. } => true,
            PathFamily::Linear { b, .. } => *b == 0.0,
            PathFamily::Exponential { alpha, .. } | PathFamily::PowerLaw { alpha, .. } => *alpha == 0.0,
            PathFamily::Tabulated { values, .. } => values.windows(2).all(|w| w[0] == w[1]),
        }
    }

    /// Exact minimum over `[0, T]`, when the family admits one in closed form.
    /// Every supported family is monotone between knots, so extrema sit at
    /// the endpoints or knots.
    pub fn min_value(&self) -> f64 {
        match &self.family {
            PathFamily::Tabulated { values, .. } => values.iter().copied().fold(f64::INFINITY, f64::min),
            _ => self.value_at(0.0).min(self.value_at(self.horizon)),
        }
    }

    /// `max_t -d/dt path`, or `None` when only a grid scan can tell.
    fn max_negative_slope_exact(&self) -> Option<f64> {
        match &self.family {
            PathFamily::Tabulated { .. } => None,
            // -deriv is monotone in t for every parametric family
            _ => Some((-self.deriv_at(0.0)).max(-self.deriv_at(self.horizon))),
        }
    }

    /// `∫_0^t ds / path(s)`, in closed form for every family.
    pub fn reciprocal_integral(&self, t: f64) -> Result<f64> {
        let t = self.check_domain(t)?;
        let horizon = self.horizon;
        Ok(match &self.family {
            PathFamily::Constant { value } => t / value,
            PathFamily::Linear { a, b } => {
                if *b == 0.0 {
                    t / a
                } else {
                    ((a + b * t) / a).ln() / b
                }
            }
            PathFamily::Exponential { beta, alpha } => {
                if *alpha == 0.0 {
                    t / beta
                } else {
                    horizon * (alpha * t / horizon).exp_m1() / (alpha * beta)
                }
            }
            PathFamily::PowerLaw { beta, alpha } => {
                let u = t / horizon;
                if (alpha + 1.0).abs() < 1e-14 {
                    horizon * u.ln_1p() / beta
                } else {
                    horizon * ((alpha + 1.0) * u.ln_1p()).exp_m1() / ((alpha + 1.0) * beta)
                }
            }
            PathFamily::Tabulated { times, values } => {
                let mut acc = 0.0;
                for k in 0..times.len() - 1 {
                    let (t0, t1) = (times[k], times[k + 1]);
                    if t0 >= t {
                        break;
                    }
                    let end = t.min(t1);
                    let (v0, v1) = (values[k], values[k + 1]);
                    let slope = (v1 - v0) / (t1 - t0);
                    let v_end = v0 + slope * (end - t0);
                    acc += if slope.abs() < 1e-300 {
                        (end - t0) / v0
                    } else {
                        (v_end / v0).ln() / slope
                    };
                }
                acc
            }
        })
    }
}

fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    let k = match times.partition_point(|&x| x <= t) {
        0 => 0,
        k if k >= times.len() => times.len() - 2,
        k => k - 1,
    };
    let (t0, t1) = (times[k], times[k + 1]);
    let w = (t - t0) / (t1 - t0);
    values[k] + w * (values[k + 1] - values[k])
}

/// Permanent and temporary impact, optional volatility, horizon and size.
///
/// In continuous time `Q > 0` is a sell program: inventory runs from `Q`
/// down to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpec", into = "ModelSpec")]
pub struct MarketModel {
    pub theta: ImpactPath,
    pub eta: ImpactPath,
    pub sigma: Option<ImpactPath>,
    pub horizon: f64,
    pub quantity: f64,
}

/// Wire form of [`MarketModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "Q")]
    pub quantity: f64,
    pub theta: PathFamily,
    pub eta: PathFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<PathFamily>,
}

impl TryFrom<ModelSpec> for MarketModel {
    type Error = ExecError;

    fn try_from(spec: ModelSpec) -> Result<Self> {
        let horizon = spec.horizon;
        let tag = |e: ExecError, prefix: &str| match e {
            ExecError::Invalid { field, reason } => ExecError::Invalid {
                field: field.replacen("path", prefix, 1),
                reason,
            },
            other => other,
        };
        let theta = ImpactPath::new(spec.theta, horizon).map_err(|e| tag(e, "theta"))?;
        let eta = ImpactPath::new(spec.eta, horizon).map_err(|e| tag(e, "eta"))?;
        let sigma = spec
            .sigma
            .map(|f| ImpactPath::volatility(f, horizon))
            .transpose()?;
        MarketModel::new(theta, eta, sigma, horizon, spec.quantity)
    }
}

impl From<MarketModel> for ModelSpec {
    fn from(m: MarketModel) -> Self {
        ModelSpec {
            horizon: m.horizon,
            quantity: m.quantity,
            theta: m.theta.family,
            eta: m.eta.family,
            sigma: m.sigma.map(|s| s.family),
        }
    }
}

impl MarketModel {
    pub fn new(
        theta: ImpactPath,
        eta: ImpactPath,
        sigma: Option<ImpactPath>,
        horizon: f64,
        quantity: f64,
    ) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(ExecError::invalid("T", "must be finite and positive"));
        }
        if !quantity.is_finite() {
            return Err(ExecError::invalid("Q", "must be finite"));
        }
        for (name, path) in [("theta", Some(&theta)), ("eta", Some(&eta)), ("sigma", sigma.as_ref())] {
            if let Some(p) = path {
                if p.horizon != horizon {
                    return Err(ExecError::invalid(name, "horizon differs from model T"));
                }
            }
        }
        Ok(MarketModel {
            theta,
            eta,
            sigma,
            horizon,
            quantity,
        })
    }

    /// Model without volatility.
    pub fn deterministic(theta: ImpactPath, eta: ImpactPath, horizon: f64, quantity: f64) -> Result<Self> {
        Self::new(theta, eta, None, horizon, quantity)
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn with_quantity(&self, quantity: f64) -> Result<Self> {
        Self::new(self.theta.clone(), self.eta.clone(), self.sigma.clone(), self.horizon, quantity)
    }

    pub fn sigma_at(&self, t: f64) -> f64 {
        self.sigma.as_ref().map_or(0.0, |s| s.value_at(t.clamp(0.0, self.horizon)))
    }

    /// Left-endpoint sampling on `N` intervals, with temporary impact scaled
    /// by `N / T` so that discrete and continuous costs agree as `N` grows.
    pub fn discretize(&self, n: usize) -> Result<DiscreteImpactGrid> {
        if n == 0 {
            return Err(ExecError::invalid("N", "need at least one interval"));
        }
        let dt = self.horizon / n as f64;
        let theta = (0..n).map(|i| self.theta.value_at(i as f64 * dt)).collect();
        let eta = (0..n).map(|i| self.eta.value_at(i as f64 * dt) / dt).collect();
        DiscreteImpactGrid::new(theta, eta, self.horizon, self.quantity)
    }

    /// `(eta_bar, theta_bar, gamma)` for the second-order and positivity
    /// certificates. Parametric families use exact extrema; tables scan a
    /// uniform grid of `samples` points.
    pub fn summary_gamma(&self, samples: usize) -> GammaSummary {
        let samples = samples.max(2);
        let horizon = self.horizon;
        let eta_bar = self.eta.min_value();
        let slope = self.theta.max_negative_slope_exact().unwrap_or_else(|| {
            (0..samples)
                .map(|k| -self.theta.deriv_at(k as f64 * horizon / (samples - 1) as f64))
                .fold(f64::NEG_INFINITY, f64::max)
        });
        let scale = self.theta.value_at(0.0).max(self.theta.value_at(horizon)) / horizon;
        let floor = 1e-12 * scale;
        let theta_bar = slope.max(floor);
        GammaSummary {
            eta_bar,
            theta_bar,
            gamma: theta_bar / (2.0 * eta_bar),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaSummary {
    pub eta_bar: f64,
    pub theta_bar: f64,
    pub gamma: f64,
}

/// Per-interval impacts of the discrete problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteImpactGrid {
    pub theta: Vec<f64>,
    pub eta: Vec<f64>,
    pub horizon: f64,
    pub quantity: f64,
}

impl DiscreteImpactGrid {
    pub fn new(theta: Vec<f64>, eta: Vec<f64>, horizon: f64, quantity: f64) -> Result<Self> {
        if theta.is_empty() {
            return Err(ExecError::invalid("theta", "need at least one interval"));
        }
        if theta.len() != eta.len() {
            return Err(ExecError::DimensionMismatch {
                expected: theta.len(),
                got: eta.len(),
            });
        }
        if let Some(i) = theta.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(ExecError::invalid(format!("theta[{i}]"), "must be finite and positive"));
        }
        if let Some(i) = eta.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(ExecError::invalid(format!("eta[{i}]"), "must be finite and positive"));
        }
        if !quantity.is_finite() {
            return Err(ExecError::invalid("Q", "must be finite"));
        }
        Ok(DiscreteImpactGrid {
            theta,
            eta,
            horizon,
            quantity,
        })
    }

    /// Grid on a unit horizon, for the matrix-level examples.
    pub fn from_impacts(theta: &[f64], eta: &[f64], quantity: f64) -> Result<Self> {
        Self::new(theta.to_vec(), eta.to_vec(), 1.0, quantity)
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}
