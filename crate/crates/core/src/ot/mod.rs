//! Discrete optimal transport between equal-size uniform empirical measures
//! under the quadratic cost `c(x, y) = ½‖x − y‖²`.
//!
//! Sign conventions follow the Kantorovich dual used throughout the crate:
//! source potentials `φ`, target potentials `ψ`, feasibility
//! `ψ_j − φ_i ≤ c_ij`, objective `mean(ψ) − mean(φ)`. With these signs the
//! transport map of a potential is `T(x) = x + ∇φ(x)`.

mod assignment;

use std::io::Write;

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{squared_distance, Matrix};
use crate::par;

pub use assignment::{assign, Assignment};

/// Feasibility tolerance used by the invariant checks.
pub const FEAS_TOL: f64 = 1e-9;

/// `m` points in `R^d`, each carrying mass `1/m`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    points: Matrix,
}

impl DiscreteMeasure {
    pub fn new(points: Matrix) -> Result<Self> {
        if points.rows() == 0 {
            return Err(Error::Empty("measure has no points"));
        }
        if points.cols() == 0 {
            return Err(Error::Empty("points have dimension 0"));
        }
        if !points.all_finite() {
            return Err(Error::NonFinite("measure points"));
        }
        Ok(Self { points })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn mass_per_point(&self) -> f64 {
        1.0 / self.len() as f64
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn into_points(self) -> Matrix {
        self.points
    }
}

/// Square matrix of nonnegative, finite transport costs.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    m: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::Empty("cost matrix"));
        }
        let mut entries = Vec::with_capacity(m * m);
        for row in &rows {
            if row.len() != m {
                return Err(Error::NonSquare {
                    rows: m,
                    cols: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::from_entries(m, entries)
    }

    pub fn from_entries(m: usize, entries: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::Empty("cost matrix"));
        }
        if entries.len() != m * m {
            return Err(Error::NonSquare {
                rows: m,
                cols: entries.len() / m,
            });
        }
        for (k, &value) in entries.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidCost {
                    row: k / m,
                    col: k % m,
                    value,
                });
            }
        }
        Ok(Self { m, entries })
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.m..(i + 1) * self.m]
    }

    pub fn transpose(&self) -> Self {
        let m = self.m;
        let entries = (0..m * m).map(|k| self.get(k % m, k / m)).collect();
        Self { m, entries }
    }
}

/// Optimal dual values: `source[i] = φ_i`, `target[j] = ψ_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualPotentials {
    pub source: Vec<f64>,
    pub target: Vec<f64>,
    pub objective: f64,
}

impl DualPotentials {
    /// Largest violation of `ψ_j − φ_i ≤ c_ij` (≤ 0 when strictly feasible).
    pub fn max_violation(&self, cost: &CostMatrix) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for (i, phi) in self.source.iter().enumerate() {
            for (j, psi) in self.target.iter().enumerate() {
                worst = worst.max(psi - phi - cost.get(i, j));
            }
        }
        worst
    }

    pub fn shifted(&self, k: f64) -> Self {
        Self {
            source: self.source.iter().map(|v| v + k).collect(),
            target: self.target.iter().map(|v| v + k).collect(),
            objective: self.objective,
        }
    }
}

/// Dense coupling `ρ`, row-major `m × m`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    m: usize,
    coupling: Vec<f64>,
    pub cost: f64,
}

impl TransportPlan {
    pub fn size(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.coupling[i * self.m + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.coupling
            .chunks(self.m)
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.m)
            .map(|j| (0..self.m).map(|i| self.get(i, j)).sum())
            .collect()
    }

    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.coupling
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(move |(k, &v)| (k / self.m, k % self.m, v))
    }
}

/// `σ: i ↦ j`, total over source indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matching {
    pub sigma: Vec<usize>,
}

impl Matching {
    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.sigma.len()];
        for &j in &self.sigma {
            if j >= seen.len() || std::mem::replace(&mut seen[j], true) {
                return false;
            }
        }
        true
    }
}

/// Everything one exact solve produces.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub assignment: Assignment,
    pub plan: TransportPlan,
    pub potentials: DualPotentials,
}

/// `c[i][j] = ½‖x_i − y_j‖²`.
pub fn cost_matrix(src: &DiscreteMeasure, tgt: &DiscreteMeasure) -> Result<CostMatrix> {
    ensure_dim(src.dim(), tgt.dim())?;
    if src.len() != tgt.len() {
        return Err(Error::SizeMismatch {
            left: src.len(),
            right: tgt.len(),
        });
    }
    let m = src.len();
    let mut entries = vec![0.0; m * m];
    par::for_each_chunk_mut(&mut entries, m, |i, row| {
        let x = src.point(i);
        for (j, c) in row.iter_mut().enumerate() {
            *c = 0.5 * squared_distance(x, tgt.point(j));
        }
    });
    Ok(CostMatrix { m, entries })
}

/// Solves primal and dual together.
pub fn solve(cost: &CostMatrix) -> Solution {
    let assignment = assign(cost);
    let plan = plan_from_assignment(cost, &assignment);
    let potentials = centered_potentials(cost, &assignment.row_to_col);
    Solution {
        assignment,
        plan,
        potentials,
    }
}

pub fn solve_primal(cost: &CostMatrix) -> TransportPlan {
    plan_from_assignment(cost, &assign(cost))
}

/// Optimal dual potentials, gauge-fixed so that `φ_0 = 0`.
///
/// The returned pair lies in the relative interior of the optimal dual face:
/// a constraint `ψ_j − φ_i ≤ c_ij` is tight only if `(i, j)` belongs to every
/// optimal assignment. For points in general position the optimal assignment
/// is unique, so the only tight pairs are the matched ones and the ordering
/// function recovers the assignment without ties.
pub fn solve_dual(cost: &CostMatrix) -> DualPotentials {
    centered_potentials(cost, &assign(cost).row_to_col)
}

/// Independent optimal solves, possibly in parallel.
pub fn solve_many(costs: &[CostMatrix]) -> Vec<Solution> {
    par::map(costs, solve)
}

fn plan_from_assignment(cost: &CostMatrix, a: &Assignment) -> TransportPlan {
    let m = cost.size();
    let mass = 1.0 / m as f64;
    let mut coupling = vec![0.0; m * m];
    for (i, &j) in a.row_to_col.iter().enumerate() {
        coupling[i * m + j] = mass;
    }
    let cost = a
        .row_to_col
        .iter()
        .enumerate()
        .map(|(i, &j)| cost.get(i, j) * mass)
        .sum();
    TransportPlan { m, coupling, cost }
}

/// Given an optimal permutation, every optimal dual is determined by `φ`
/// subject to the difference constraints `φ_k − φ_i ≤ w_ik` with
/// `w_ik = c[i][π(k)] − c[k][π(k)]`. With `d` the all-pairs shortest path
/// lengths of `w`, both `φ = d(r, ·)` and `φ = −d(·, r)` are feasible for every
/// root `r`; averaging all `2m` of them leaves positive slack on every
/// constraint that lies on no zero-length cycle.
fn centered_potentials(cost: &CostMatrix, perm: &[usize]) -> DualPotentials {
    let m = cost.size();
    let mut dist = vec![0.0; m * m];
    for i in 0..m {
        for k in 0..m {
            dist[i * m + k] = if i == k {
                0.0
            } else {
                cost.get(i, perm[k]) - cost.get(k, perm[k])
            };
        }
    }
    for via in 0..m {
        for i in 0..m {
            let d_iv = dist[i * m + via];
            for k in 0..m {
                let through = d_iv + dist[via * m + k];
                if through < dist[i * m + k] {
                    dist[i * m + k] = through;
                }
            }
        }
    }
    let scale = 1.0 / (2 * m) as f64;
    let mut phi: Vec<f64> = (0..m)
        .map(|k| {
            let into: f64 = (0..m).map(|r| dist[r * m + k]).sum();
            let out_of: f64 = dist[k * m..(k + 1) * m].iter().sum();
            (into - out_of) * scale
        })
        .collect();
    let gauge = phi[0];
    for v in &mut phi {
        *v -= gauge;
    }
    let psi = c_transform_unchecked(&phi, cost);
    let objective = mean(&psi) - mean(&phi);
    DualPotentials {
        source: phi,
        target: psi,
        objective,
    }
}

/// `ψ_j = min_i (c_ij + φ_i)`.
pub fn c_transform(phi: &[f64], cost: &CostMatrix) -> Result<Vec<f64>> {
    if phi.len() != cost.size() {
        return Err(Error::SizeMismatch {
            left: phi.len(),
            right: cost.size(),
        });
    }
    Ok(c_transform_unchecked(phi, cost))
}

fn c_transform_unchecked(phi: &[f64], cost: &CostMatrix) -> Vec<f64> {
    let m = cost.size();
    (0..m)
        .map(|j| {
            (0..m)
                .map(|i| cost.get(i, j) + phi[i])
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// `σ(i) = argmin_j ½‖x_i − y_j‖² + φ_i − ψ_j`, lowest `j` on ties.
pub fn ordering(
    src: &DiscreteMeasure,
    tgt: &DiscreteMeasure,
    pot: &DualPotentials,
) -> Result<Matching> {
    ensure_dim(src.dim(), tgt.dim())?;
    if src.len() != tgt.len() {
        return Err(Error::SizeMismatch {
            left: src.len(),
            right: tgt.len(),
        });
    }
    if pot.source.len() != src.len() || pot.target.len() != tgt.len() {
        return Err(Error::SizeMismatch {
            left: src.len(),
            right: pot.source.len(),
        });
    }
    let sigma = par::map_range(src.len(), |i| {
        let x = src.point(i);
        argmin(
            (0..tgt.len())
                .map(|j| 0.5 * squared_distance(x, tgt.point(j)) + pot.source[i] - pot.target[j]),
        )
    });
    Ok(Matching { sigma })
}

/// Same as [`ordering`] with a precomputed cost matrix.
pub fn ordering_from_cost(cost: &CostMatrix, pot: &DualPotentials) -> Result<Matching> {
    if pot.source.len() != cost.size() || pot.target.len() != cost.size() {
        return Err(Error::SizeMismatch {
            left: cost.size(),
            right: pot.source.len(),
        });
    }
    let sigma = (0..cost.size())
        .map(|i| {
            argmin(
                cost.row(i)
                    .iter()
                    .zip(&pot.target)
                    .map(|(c, psi)| c + pot.source[i] - psi),
            )
        })
        .collect();
    Ok(Matching { sigma })
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (j, v) in values.enumerate() {
        if v < best.1 {
            best = (j, v);
        }
    }
    best.0
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Debug dump: one `i,j,cost,rho` row per cell.
pub fn write_instance_csv(
    cost: &CostMatrix,
    plan: &TransportPlan,
    mut out: impl Write,
) -> std::io::Result<()> {
    writeln!(out, "i,j,cost,rho")?;
    for i in 0..cost.size() {
        for j in 0..cost.size() {
            writeln!(out, "{i},{j},{},{}", cost.get(i, j), plan.get(i, j))?;
        }
    }
    Ok(())
}
