//! Phase diagrams over exponential and power-law impact parameters.
//!
//! Permanent impact is `β_p f(α_p)` and temporary impact `β_tp f(α_tp)` with
//! `β_tp = T κ β_p`, where `f` is `exp(−α t/T)` or `(1 + t/T)^(−α)`. In the
//! equal-exponent modes both paths share `α` and the second axis is `κ`.

use std::f64::consts::{E, LN_2, PI};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{classify_shape, detect_ttpm, solve_trajectory};
use crate::error::{ExecError, Result};
use crate::impact::{ImpactPath, MarketModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepFamily {
    Exponential,
    #[serde(alias = "power_law")]
    PowerLaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    DistinctExponents,
    EqualExponents,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default)]
    pub log: bool,
}

impl Axis {
    pub fn linear(min: f64, max: f64, count: usize) -> Self {
        Axis {
            min,
            max,
            count,
            log: false,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.count;
        (0..n)
            .map(|k| {
                let w = k as f64 / (n - 1) as f64;
                if k == n - 1 {
                    self.max
                } else if self.log {
                    (self.min.ln() + w * (self.max.ln() - self.min.ln())).exp()
                } else {
                    self.min + w * (self.max - self.min)
                }
            })
            .collect()
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.count < 2 {
            return Err(ExecError::invalid(format!("{name}.count"), "need at least 2 points"));
        }
        if !(self.min.is_finite() && self.max.is_finite()) || self.min > self.max {
            return Err(ExecError::invalid(name, "range must be finite with min <= max"));
        }
        if self.log && self.min <= 0.0 {
            return Err(ExecError::invalid(format!("{name}.min"), "log axis needs a positive minimum"));
        }
        Ok(())
    }
}

fn default_grid() -> usize {
    2000
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub family: SweepFamily,
    pub mode: SweepMode,
    /// Impact ratio for the distinct-exponent modes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// `α_p`, or `α` in the equal modes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis1: Option<Axis>,
    /// `α_tp`, or `κ` in the equal modes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis2: Option<Axis>,
    #[serde(rename = "grid_M", default = "default_grid")]
    pub grid_m: usize,
    #[serde(rename = "Q", default = "one")]
    pub quantity: f64,
    #[serde(rename = "T", default = "one")]
    pub horizon: f64,
    #[serde(default = "one")]
    pub beta_p: f64,
    /// Solve cells outside the admissible region as well.
    #[serde(default)]
    pub force: bool,
}

impl SweepSpec {
    pub fn new(family: SweepFamily, mode: SweepMode) -> Self {
        SweepSpec {
            family,
            mode,
            kappa: None,
            axis1: None,
            axis2: None,
            grid_m: default_grid(),
            quantity: 1.0,
            horizon: 1.0,
            beta_p: 1.0,
            force: false,
        }
    }

    pub fn axes(&self) -> (Axis, Axis) {
        let first = self.axis1.unwrap_or(Axis::linear(0.0, 3.0, 101));
        let second = self.axis2.unwrap_or(match self.mode {
            SweepMode::DistinctExponents => Axis::linear(0.0, 3.0, 101),
            SweepMode::EqualExponents => Axis {
                min: 0.05,
                max: 20.0,
                count: 101,
                log: true,
            },
        });
        (first, second)
    }

    pub fn validate(&self) -> Result<()> {
        let (a1, a2) = self.axes();
        a1.validate("axis1")?;
        a2.validate("axis2")?;
        match self.mode {
            SweepMode::DistinctExponents => match self.kappa {
                Some(k) if k > 0.0 && k.is_finite() => {}
                Some(_) => return Err(ExecError::invalid("kappa", "must be positive")),
                None => return Err(ExecError::invalid("kappa", "required for distinct exponents")),
            },
            SweepMode::EqualExponents => {
                if a2.min <= 0.0 {
                    return Err(ExecError::invalid("axis2.min", "kappa must be positive"));
                }
            }
        }
        if self.grid_m < 100 || self.grid_m % 2 != 0 {
            return Err(ExecError::invalid("grid_M", "must be even and at least 100"));
        }
        if !self.quantity.is_finite() {
            return Err(ExecError::invalid("Q", "must be finite"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(ExecError::invalid("T", "must be positive"));
        }
        if !(self.beta_p > 0.0 && self.beta_p.is_finite()) {
            return Err(ExecError::invalid("beta_p", "must be positive"));
        }
        Ok(())
    }

    /// `(α_p, α_tp, κ)` of the cell at `(param1, param2)`.
    fn exponents(&self, p1: f64, p2: f64) -> (f64, f64, f64) {
        match self.mode {
            SweepMode::DistinctExponents => (p1, p2, self.kappa.unwrap_or(f64::NAN)),
            SweepMode::EqualExponents => (p1, p1, p2),
        }
    }

    /// Market model of one cell.
    pub fn model(&self, p1: f64, p2: f64) -> Result<MarketModel> {
        let (ap, atp, kappa) = self.exponents(p1, p2);
        let (t, bp) = (self.horizon, self.beta_p);
        let btp = t * kappa * bp;
        let (theta, eta) = match self.family {
            SweepFamily::Exponential => (ImpactPath::exponential(bp, ap, t)?, ImpactPath::exponential(btp, atp, t)?),
            SweepFamily::PowerLaw => (ImpactPath::power_law(bp, ap, t)?, ImpactPath::power_law(btp, atp, t)?),
        };
        MarketModel::deterministic(theta, eta, t, self.quantity)
    }

    pub fn admissible(&self, p1: f64, p2: f64) -> bool {
        let (ap, atp, kappa) = self.exponents(p1, p2);
        admissible_boundary(self.family, self.mode, ap, atp, kappa)
    }
}

/// Strict admissibility of exponential or power-law impacts.
///
/// Distinct exponents bound `α_p` in terms of `α_tp`; equal exponents read
/// `α_p = α_tp = α` and also exclude the singular point `α = 2/κ`.
pub fn admissible_boundary(family: SweepFamily, mode: SweepMode, alpha_p: f64, alpha_tp: f64, kappa: f64) -> bool {
    let two_pi2 = 2.0 * PI * PI;
    match (family, mode) {
        (SweepFamily::Exponential, SweepMode::DistinctExponents) => alpha_p < two_pi2 * kappa * (-alpha_tp).exp(),
        (SweepFamily::PowerLaw, SweepMode::DistinctExponents) => {
            alpha_p < PI * PI * kappa * 2f64.powf(1.0 - alpha_tp)
        }
        (family, SweepMode::EqualExponents) => {
            let alpha = alpha_p;
            let below = match family {
                SweepFamily::Exponential => alpha * alpha.exp() < two_pi2 * kappa,
                SweepFamily::PowerLaw => match lambert_w0(two_pi2 * kappa / LN_2) {
                    Ok(w) => alpha < w,
                    Err(_) => false,
                },
            };
            below && (alpha - 2.0 / kappa).abs() > 1e-12 * (2.0 / kappa).max(1.0)
        }
    }
}

/// Principal branch of the Lambert W function, `W e^W = x`, for `x ≥ −1/e`.
pub fn lambert_w0(x: f64) -> Result<f64> {
    let branch = -1.0 / E;
    if x.is_nan() || x < branch {
        return Err(ExecError::invalid("x", "Lambert W0 needs x >= -1/e"));
    }
    if x == branch {
        return Ok(-1.0);
    }
    if x == 0.0 || x.is_infinite() {
        return Ok(x);
    }
    let mut w = if x < -0.25 {
        // expansion about the branch point
        let p = (2.0 * (E * x + 1.0)).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x < 3.0 {
        x.ln_1p()
    } else {
        let l = x.ln();
        l - l.ln()
    };
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-300 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let next = w - f / denom;
        let done = (next - w).abs() <= 4.0 * f64::EPSILON * next.abs().max(1e-300);
        w = next;
        if done {
            break;
        }
    }
    Ok(w)
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub param1: f64,
    pub param2: f64,
    pub admissible: bool,
    #[serde(with = "nan_as_null")]
    pub initial_velocity: f64,
    #[serde(with = "nan_as_null")]
    pub excess_cash: f64,
    /// Shape label, `"failed"` when the solver gave up, or `"skipped"`.
    pub regime: String,
    pub ttpm: bool,
    pub turning_points: usize,
}

impl SweepCell {
    fn empty(param1: f64, param2: f64, admissible: bool, regime: &str) -> Self {
        SweepCell {
            param1,
            param2,
            admissible,
            initial_velocity: f64::NAN,
            excess_cash: f64::NAN,
            regime: regime.to_string(),
            ttpm: false,
            turning_points: 0,
        }
    }
}

fn shape_label(shape: crate::analysis::Shape) -> String {
    serde_json::to_value(shape)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_else(|| "other".to_string())
}

fn run_cell(spec: &SweepSpec, p1: f64, p2: f64) -> SweepCell {
    let admissible = spec.admissible(p1, p2);
    if !admissible && !spec.force {
        return SweepCell::empty(p1, p2, false, "skipped");
    }
    let traj = spec.model(p1, p2).and_then(|m| solve_trajectory(&m, spec.grid_m));
    match traj {
        Ok(t) if t.cash.is_finite() && t.initial_velocity.is_finite() => {
            let pattern = detect_ttpm(&t);
            SweepCell {
                param1: p1,
                param2: p2,
                admissible,
                initial_velocity: t.initial_velocity,
                excess_cash: t.cash,
                regime: shape_label(classify_shape(&t)),
                ttpm: pattern.ttpm,
                turning_points: pattern.turning_points,
            }
        }
        _ => SweepCell::empty(p1, p2, admissible, "failed"),
    }
}

/// Evaluates every cell, in parallel; the result is row-major with `axis1`
/// varying slowest.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepCell>> {
    spec.validate()?;
    let (a1, a2) = spec.axes();
    let (v1, v2) = (a1.values(), a2.values());
    let cells = (0..v1.len() * v2.len())
        .into_par_iter()
        .map(|k| run_cell(spec, v1[k / v2.len()], v2[k % v2.len()]))
        .collect();
    Ok(cells)
}

fn csv_number(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn write_csv(cells: &[SweepCell], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "param1,param2,admissible,initial_velocity,excess_cash,regime")?;
    for c in cells {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            csv_number(c.param1),
            csv_number(c.param2),
            u8::from(c.admissible),
            csv_number(c.initial_velocity),
            csv_number(c.excess_cash),
            c.regime
        )?;
    }
    Ok(())
}

pub fn write_json(cells: &[SweepCell], mut out: impl Write) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut out, cells)?;
    writeln!(out)
}
