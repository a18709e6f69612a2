//! Discrete-time execution: the impact matrix, its closed-form optimum, and
//! the structural certificates (Cholesky, diagonal dominance, B-matrix).
//!
//! Trading `ξ_i` shares in interval `i` costs `½ ξᵀ A ξ` in expected
//! implementation shortfall (up to the constant `Q S₀`), where `A` carries
//! `2η_i` on the diagonal and `θ_min(i,j)` off it. Costs are minimized.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ExecError, Result};
use crate::impact::DiscreteImpactGrid;

/// Symmetric `N × N` matrix of the discrete quadratic cost.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactMatrix {
    entries: DMatrix<f64>,
}

impl ImpactMatrix {
    /// `A[i][i] = 2 η_i`, `A[i][j] = θ_min(i,j)`.
    pub fn build(grid: &DiscreteImpactGrid) -> Self {
        let n = grid.len();
        let entries = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                2.0 * grid.eta[i]
            } else {
                grid.theta[i.min(j)]
            }
        });
        ImpactMatrix { entries }
    }

    /// Wraps an arbitrary square matrix, e.g. for certificate tests.
    /// Symmetry is required since every certificate here assumes it.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(ExecError::invalid("A", "must be square and non-empty"));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(ExecError::invalid("A", "entries must be finite"));
        }
        if entries != entries.transpose() {
            return Err(ExecError::invalid("A", "must be symmetric"));
        }
        Ok(ImpactMatrix { entries })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(ExecError::invalid("A", "must be square"));
        }
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn scaled(&self, c: f64) -> Self {
        ImpactMatrix {
            entries: &self.entries * c,
        }
    }

    fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn quadratic(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.entries[(i, j)] * x[j];
            }
            acc += x[i] * row;
        }
        0.5 * acc
    }
}

/// Shares per interval; the entries sum to `quantity`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteStrategy {
    pub xi: Vec<f64>,
    pub quantity: f64,
}

impl DiscreteStrategy {
    pub fn new(xi: Vec<f64>, quantity: f64) -> Result<Self> {
        let sum: f64 = xi.iter().sum();
        if (sum - quantity).abs() > 1e-9 * (1.0 + quantity.abs()) {
            return Err(ExecError::invalid(
                "xi",
                format!("trades sum to {sum}, expected {quantity}"),
            ));
        }
        Ok(DiscreteStrategy { xi, quantity })
    }

    pub fn twap(n: usize, quantity: f64) -> Self {
        DiscreteStrategy {
            xi: vec![quantity / n as f64; n],
            quantity,
        }
    }
}

/// `½ ξᵀ A ξ`.
pub fn cost(a: &ImpactMatrix, s: &DiscreteStrategy) -> Result<f64> {
    if s.xi.len() != a.dim() {
        return Err(ExecError::DimensionMismatch {
            expected: a.dim(),
            got: s.xi.len(),
        });
    }
    Ok(a.quadratic(&s.xi))
}

/// Outcome of a Cholesky attempt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpdCertificate {
    pub spd: bool,
    /// Smallest pivot computed before success or breakdown.
    pub smallest_pivot: f64,
    pub threshold: f64,
    /// Zero-based row where the factorization broke down.
    pub failed_row: Option<usize>,
}

struct Cholesky {
    lower: DMatrix<f64>,
}

impl Cholesky {
    fn factor(a: &ImpactMatrix) -> (Option<Cholesky>, SpdCertificate) {
        let n = a.dim();
        let threshold = 1e-12 * a.max_abs();
        let mut lower = DMatrix::zeros(n, n);
        let mut smallest = f64::INFINITY;
        for j in 0..n {
            let mut pivot = a.get(j, j);
            for k in 0..j {
                pivot -= lower[(j, k)] * lower[(j, k)];
            }
            smallest = smallest.min(pivot);
            if !(pivot > threshold) {
                let cert = SpdCertificate {
                    spd: false,
                    smallest_pivot: smallest,
                    threshold,
                    failed_row: Some(j),
                };
                return (None, cert);
            }
            let d = pivot.sqrt();
            lower[(j, j)] = d;
            for i in j + 1..n {
                let mut v = a.get(i, j);
                for k in 0..j {
                    v -= lower[(i, k)] * lower[(j, k)];
                }
                lower[(i, j)] = v / d;
            }
        }
        let cert = SpdCertificate {
            spd: true,
            smallest_pivot: smallest,
            threshold,
            failed_row: None,
        };
        (Some(Cholesky { lower }), cert)
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let l = &self.lower;
        let mut y = rhs.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= l[(i, k)] * y[k];
            }
            y[i] /= l[(i, i)];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= l[(k, i)] * y[k];
            }
            y[i] /= l[(i, i)];
        }
        y
    }
}

/// Cholesky test with pivot threshold `1e-12 · max|A|`.
pub fn is_spd(a: &ImpactMatrix) -> SpdCertificate {
    Cholesky::factor(a).1
}

/// Closed-form minimizer `ξ⋆ = Q A⁻¹1 / (1ᵀ A⁻¹ 1)` of the cost on `Σξ = Q`.
pub fn solve_optimal(a: &ImpactMatrix, quantity: f64) -> Result<DiscreteStrategy> {
    let (chol, cert) = Cholesky::factor(a);
    let chol = chol.ok_or(ExecError::NotSpd {
        row: cert.failed_row.unwrap_or(0),
        pivot: cert.smallest_pivot,
        threshold: cert.threshold,
    })?;
    let n = a.dim();
    if quantity == 0.0 {
        return Ok(DiscreteStrategy {
            xi: vec![0.0; n],
            quantity,
        });
    }
    let w = chol.solve(&vec![1.0; n]);
    let total: f64 = w.iter().sum();
    let xi: Vec<f64> = w.iter().map(|v| quantity * v / total).collect();
    debug_assert!({
        let lambda = quantity / total;
        let r = a.entries() * DVector::from_column_slice(&xi);
        r.iter().all(|v| (v - lambda).abs() <= 1e-8 * (1.0 + lambda.abs()) * a.max_abs())
    });
    DiscreteStrategy::new(xi, quantity)
}

/// Strict row-wise diagonal dominance of `A`, written on the impacts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagonalDominance {
    pub dominant: bool,
    /// Zero-based first row where `2η_i > Σ_{j<i} θ_j + (N−i) θ_i` fails.
    pub first_violation_row: Option<usize>,
    /// `min_i (2η_i − off-diagonal row sum)`.
    pub min_margin: f64,
}

pub fn is_diagonally_dominant(grid: &DiscreteImpactGrid) -> DiagonalDominance {
    let n = grid.len();
    let mut prefix = 0.0;
    let mut first = None;
    let mut min_margin = f64::INFINITY;
    for i in 0..n {
        let off = prefix + (n - 1 - i) as f64 * grid.theta[i];
        let margin = 2.0 * grid.eta[i] - off;
        min_margin = min_margin.min(margin);
        if first.is_none() && !(2.0 * grid.eta[i] > off) {
            first = Some(i);
        }
        prefix += grid.theta[i];
    }
    DiagonalDominance {
        dominant: first.is_none(),
        first_violation_row: first,
        min_margin,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BMatrixCertificate {
    pub is_b_matrix: bool,
    /// Zero-based first row where `mean(row) > max(0, off-diagonals)` fails.
    pub first_violation: Option<usize>,
    /// `min_i (row mean − max(0, off-diagonal max))`.
    pub min_margin: f64,
}

/// Row test: `(1/n) Σ_k a_ik > max{0, a_ij : j ≠ i}` for every row.
pub fn is_b_matrix(a: &ImpactMatrix) -> BMatrixCertificate {
    let n = a.dim();
    let mut first = None;
    let mut min_margin = f64::INFINITY;
    for i in 0..n {
        let row = a.entries().row(i);
        let mean = row.sum() / n as f64;
        let bound = (0..n)
            .filter(|&j| j != i)
            .map(|j| row[j])
            .fold(0.0, f64::max);
        min_margin = min_margin.min(mean - bound);
        if first.is_none() && !(mean > bound) {
            first = Some(i);
        }
    }
    BMatrixCertificate {
        is_b_matrix: first.is_none(),
        first_violation: first,
        min_margin,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SufficientBMatrix {
    pub holds: bool,
    /// `2 min η_i`
    pub lhs: f64,
    /// `max{θ_1, θ_N} − N min_l (θ_{l+1} − θ_l)`
    pub rhs: f64,
}

/// Restrictive inequality on non-increasing permanent impact,
/// `2 min η ≥ max{θ_1, θ_N} − N min_l (θ_{l+1} − θ_l)`.
pub fn check_bmatrix_sufficient(grid: &DiscreteImpactGrid) -> Result<SufficientBMatrix> {
    let n = grid.len();
    let theta = &grid.theta;
    if theta.windows(2).any(|w| w[1] > w[0]) {
        return Err(ExecError::NotApplicable(
            "permanent impact is not non-increasing".into(),
        ));
    }
    let lhs = 2.0 * grid.eta.iter().copied().fold(f64::INFINITY, f64::min);
    // empty for N = 1
    let min_step = theta
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0_f64, f64::min);
    let rhs = theta[0].max(theta[n - 1]) - n as f64 * min_step;
    Ok(SufficientBMatrix {
        holds: lhs >= rhs,
        lhs,
        rhs,
    })
}

/// Search settings for [`brute_force_optimum`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteForce {
    /// Half-width `w` of the box `[Q/N − w, Q/N + w]^N`.
    pub halfwidth: f64,
    /// Points per free coordinate of the exhaustive grid (`N ≤ 4`).
    pub grid_points: usize,
    /// Random feasible samples for `N > 4`.
    pub random_points: usize,
    pub seed: u64,
}

impl BruteForce {
    pub fn for_quantity(quantity: f64) -> Self {
        BruteForce {
            halfwidth: 5.0 * quantity.abs().max(f64::MIN_POSITIVE),
            grid_points: 201,
            random_points: 1_000_000,
            seed: 0x5eed,
        }
    }
}

const SHARDS: usize = 32;

/// Best strategy found on `Σξ = Q` inside the box. Independent of
/// [`solve_optimal`]; meant for tests and manipulation searches.
pub fn brute_force_optimum(a: &ImpactMatrix, quantity: f64, search: &BruteForce) -> DiscreteStrategy {
    let n = a.dim();
    let center = quantity / n as f64;
    let (lo, hi) = (center - search.halfwidth, center + search.halfwidth);
    if n == 1 {
        return DiscreteStrategy {
            xi: vec![quantity],
            quantity,
        };
    }
    let best = if n <= 4 {
        exhaustive(a, quantity, lo, hi, search.grid_points.max(2))
    } else {
        random_search(a, quantity, lo, hi, search)
    };
    let polished = polish(a, quantity, lo, hi, &best);
    let pick = if a.quadratic(&polished) <= a.quadratic(&best) {
        polished
    } else {
        best
    };
    DiscreteStrategy {
        xi: pick,
        quantity,
    }
}

fn exhaustive(a: &ImpactMatrix, quantity: f64, lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let n = a.dim();
    let free = n - 1;
    let step = (hi - lo) / (points - 1) as f64;
    let total = points.pow(free as u32);
    (0..total)
        .into_par_iter()
        .filter_map(|mut idx| {
            let mut x = vec![0.0; n];
            for slot in x.iter_mut().take(free) {
                *slot = lo + (idx % points) as f64 * step;
                idx /= points;
            }
            x[n - 1] = quantity - x[..free].iter().sum::<f64>();
            (x[n - 1] >= lo - 1e-12 && x[n - 1] <= hi + 1e-12).then(|| {
                let c = a.quadratic(&x);
                (c, x)
            })
        })
        .min_by(|p, q| p.0.total_cmp(&q.0))
        .map(|(_, x)| x)
        .unwrap_or_else(|| vec![quantity / n as f64; n])
}

fn random_search(a: &ImpactMatrix, quantity: f64, lo: f64, hi: f64, search: &BruteForce) -> Vec<f64> {
    let n = a.dim();
    let per_shard = search.random_points.div_ceil(SHARDS);
    (0..SHARDS)
        .into_par_iter()
        .map(|shard| {
            let mut rng = ChaCha8Rng::seed_from_u64(search.seed.wrapping_add(shard as u64));
            let mut best = vec![quantity / n as f64; n];
            let mut best_cost = a.quadratic(&best);
            let mut x = vec![0.0; n];
            for _ in 0..per_shard {
                for v in x.iter_mut() {
                    *v = rng.random_range(lo..hi);
                }
                let shift = (quantity - x.iter().sum::<f64>()) / n as f64;
                x.iter_mut().for_each(|v| *v += shift);
                if x.iter().any(|v| *v < lo || *v > hi) {
                    continue;
                }
                let c = a.quadratic(&x);
                if c < best_cost {
                    best_cost = c;
                    best.copy_from_slice(&x);
                }
            }
            (best_cost, best)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .min_by(|p, q| p.0.total_cmp(&q.0))
        .map(|(_, x)| x)
        .expect("at least one shard")
}

/// Projected gradient on the hyperplane, clipped to the box.
fn polish(a: &ImpactMatrix, quantity: f64, lo: f64, hi: f64, start: &[f64]) -> Vec<f64> {
    let n = a.dim();
    let lipschitz = (0..n)
        .map(|i| a.entries().row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if lipschitz == 0.0 {
        return start.to_vec();
    }
    let step = 1.0 / lipschitz;
    let mut x = start.to_vec();
    for _ in 0..5000 {
        let g = a.entries() * DVector::from_column_slice(&x);
        let mean = g.mean();
        let mut next: Vec<f64> = x
            .iter()
            .zip(g.iter())
            .map(|(xi, gi)| (xi - step * (gi - mean)).clamp(lo, hi))
            .collect();
        // restore the constraint on the coordinates that are not pinned
        for _ in 0..n {
            let gap = quantity - next.iter().sum::<f64>();
            if gap.abs() <= 1e-15 * (1.0 + quantity.abs()) {
                break;
            }
            let free: Vec<usize> = (0..n)
                .filter(|&i| if gap > 0.0 { next[i] < hi } else { next[i] > lo })
                .collect();
            if free.is_empty() {
                break;
            }
            let share = gap / free.len() as f64;
            for i in free {
                next[i] = (next[i] + share).clamp(lo, hi);
            }
        }
        let moved = x
            .iter()
            .zip(&next)
            .fold(0.0_f64, |m, (p, q)| m.max((p - q).abs()));
        x = next;
        if moved < 1e-15 * (1.0 + quantity.abs()) {
            break;
        }
    }
    let gap = quantity - x.iter().sum::<f64>();
    if gap.abs() > 1e-9 * (1.0 + quantity.abs()) {
        return start.to_vec();
    }
    x
}
