//! Discrete static shakedown: find the largest load factor `alpha` for which
//! a residual stress field `rho` exists with
//!
//! ```text
//! C rho = 0                                          (self-equilibrium)
//! von_mises(alpha * sigmaE_{i,k} + rho_i) <= sigmaY_i  for every point i, vertex k
//! ```
//!
//! Stresses are plane-stress Voigt triples `(sxx, syy, txy)` in MPa. The
//! feasibility problem for fixed `alpha` is the intersection of a linear
//! subspace with one ellipsoid per (point, vertex); it is solved by cyclic
//! projections and the factor is found by doubling then bisection. The
//! feasible set in `alpha` is an interval containing 0 since every
//! constraint set is convex and contains `(0, 0)`.

mod oracle;
mod projection;

use std::path::Path;

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

pub use oracle::brute_force_factor;

use crate::error::{Error, Result};
use projection::{EllipsoidProjector, NullSpaceProjector};

/// Plane-stress components `(sxx, syy, txy)`, MPa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct StressVec(pub [f64; 3]);

impl StressVec {
    pub const ZERO: StressVec = StressVec([0.0; 3]);

    pub fn new(sxx: f64, syy: f64, txy: f64) -> Self {
        StressVec([sxx, syy, txy])
    }

    pub fn scaled(self, c: f64) -> Self {
        StressVec(self.0.map(|v| v * c))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    fn vector(self) -> Vector3<f64> {
        Vector3::from(self.0)
    }
}

impl From<[f64; 3]> for StressVec {
    fn from(v: [f64; 3]) -> Self {
        StressVec(v)
    }
}

impl From<StressVec> for [f64; 3] {
    fn from(s: StressVec) -> Self {
        s.0
    }
}

impl std::ops::Add for StressVec {
    type Output = StressVec;

    fn add(self, rhs: StressVec) -> StressVec {
        StressVec([
            self.0[0] + rhs.0[0],
            self.0[1] + rhs.0[1],
            self.0[2] + rhs.0[2],
        ])
    }
}

/// Plane-stress von Mises equivalent stress.
pub fn von_mises(s: StressVec) -> f64 {
    let [x, y, t] = s.0;
    (x * x - x * y + y * y + 3.0 * t * t).max(0.0).sqrt()
}

/// `f(sigma, sigmaY) = von_mises(sigma) - sigmaY`.
pub fn yield_function(s: StressVec, yield_strength: f64) -> f64 {
    von_mises(s) - yield_strength
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussPointData {
    /// Elastic stress at this point under each load vertex.
    #[serde(rename = "sigma_e")]
    pub elastic_stress_per_vertex: Vec<StressVec>,
    #[serde(rename = "sigma_y")]
    pub yield_strength: f64,
}

/// Rows of the discrete equilibrium operator over the stacked residual
/// components `(rho_1, ..., rho_NG)`; no rows means unconstrained residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EquilibriumOperator {
    pub rows: Vec<Vec<f64>>,
    pub count: usize,
}

impl EquilibriumOperator {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        EquilibriumOperator {
            count: rows.len(),
            rows,
        }
    }

    pub fn unconstrained() -> Self {
        Self::default()
    }

    /// Identity rows on the components of the listed points: forces their
    /// residual stress to zero.
    pub fn pin_points(points: usize, pinned: &[usize]) -> Self {
        let mut rows = Vec::new();
        for &i in pinned {
            for c in 0..3 {
                let mut row = vec![0.0; 3 * points];
                row[3 * i + c] = 1.0;
                rows.push(row);
            }
        }
        Self::new(rows)
    }

    /// `max |C rho|`.
    pub fn residual_norm(&self, rho: &[StressVec]) -> f64 {
        self.rows
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(j, c)| c * rho[j / 3].0[j % 3])
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShakedownInstance {
    pub points: Vec<GaussPointData>,
    #[serde(default)]
    pub equilibrium: EquilibriumOperator,
}

impl ShakedownInstance {
    pub fn new(points: Vec<GaussPointData>, equilibrium: EquilibriumOperator) -> Result<Self> {
        let inst = ShakedownInstance {
            points,
            equilibrium,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Instance(m));
        let Some(first) = self.points.first() else {
            return bad("no Gauss points".into());
        };
        let nv = first.elastic_stress_per_vertex.len();
        if nv == 0 {
            return bad("no load vertices".into());
        }
        for (i, p) in self.points.iter().enumerate() {
            if p.elastic_stress_per_vertex.len() != nv {
                return bad(format!(
                    "point {i} has {} vertices, expected {nv}",
                    p.elastic_stress_per_vertex.len()
                ));
            }
            if !(p.yield_strength > 0.0 && p.yield_strength.is_finite()) {
                return bad(format!("point {i}: yield strength must be positive"));
            }
            if p.elastic_stress_per_vertex
                .iter()
                .flat_map(|s| s.0)
                .any(|v| !v.is_finite())
            {
                return bad(format!("point {i}: non-finite elastic stress"));
            }
        }
        let cols = 3 * self.points.len();
        if self.equilibrium.count != self.equilibrium.rows.len() {
            return bad(format!(
                "equilibrium count {} but {} rows",
                self.equilibrium.count,
                self.equilibrium.rows.len()
            ));
        }
        for (r, row) in self.equilibrium.rows.iter().enumerate() {
            if row.len() != cols {
                return bad(format!(
                    "equilibrium row {r} has {} columns, expected {cols}",
                    row.len()
                ));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return bad(format!("equilibrium row {r} is not finite"));
            }
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.points[0].elastic_stress_per_vertex.len()
    }

    pub fn max_yield_strength(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.yield_strength)
            .fold(0.0, f64::max)
    }

    /// Largest factor with zero residual stress, `min sigmaY / von_mises(sigmaE)`.
    pub fn elastic_limit(&self) -> Option<f64> {
        self.points
            .iter()
            .flat_map(|p| {
                p.elastic_stress_per_vertex
                    .iter()
                    .map(move |&s| (p.yield_strength, von_mises(s)))
            })
            .filter(|&(_, vm)| vm > 0.0)
            .map(|(sy, vm)| sy / vm)
            .reduce(f64::min)
    }

    /// Every elastic stress multiplied by `c`.
    pub fn scaled(&self, c: f64) -> ShakedownInstance {
        ShakedownInstance {
            points: self
                .points
                .iter()
                .map(|p| GaussPointData {
                    elastic_stress_per_vertex: p
                        .elastic_stress_per_vertex
                        .iter()
                        .map(|s| s.scaled(c))
                        .collect(),
                    yield_strength: p.yield_strength,
                })
                .collect(),
            equilibrium: self.equilibrium.clone(),
        }
    }

    /// True when `rho = -alpha sigmaE` certifies every `alpha`: each point
    /// sees one stress at all vertices and that field is self-equilibrated.
    pub fn is_unbounded(&self) -> bool {
        let scale = self
            .points
            .iter()
            .flat_map(|p| p.elastic_stress_per_vertex.iter().map(|&s| von_mises(s)))
            .fold(0.0, f64::max);
        let uniform = self.points.iter().all(|p| {
            let first = p.elastic_stress_per_vertex[0];
            p.elastic_stress_per_vertex.iter().all(|s| {
                s.0.iter()
                    .zip(first.0)
                    .all(|(a, b)| (a - b).abs() <= 1e-12 * scale)
            })
        });
        if !uniform {
            return false;
        }
        let field: Vec<StressVec> = self
            .points
            .iter()
            .map(|p| p.elastic_stress_per_vertex[0])
            .collect();
        let row_scale = self
            .equilibrium
            .rows
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        self.equilibrium.residual_norm(&field)
            <= 1e-12 * scale * row_scale * field.len().max(1) as f64 * 3.0
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: ShakedownInstance =
            serde_json::from_str(text).map_err(|e| Error::Instance(e.to_string()))?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Independent re-check of a candidate `(alpha, rho)` straight from the
/// constraint definitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub max_equilibrium_residual: f64,
    /// `max_{i,k} von_mises(alpha sigmaE_{i,k} + rho_i) - sigmaY_i`.
    pub max_yield_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn check_certificate(
    inst: &ShakedownInstance,
    alpha: f64,
    residual: &[StressVec],
    tol: f64,
) -> FeasibilityReport {
    let max_equilibrium_residual = if residual.len() == inst.points.len() {
        inst.equilibrium.residual_norm(residual)
    } else {
        f64::INFINITY
    };
    let max_yield_violation = inst
        .points
        .iter()
        .zip(residual)
        .flat_map(|(p, &rho)| {
            p.elastic_stress_per_vertex
                .iter()
                .map(move |&s| yield_function(s.scaled(alpha) + rho, p.yield_strength))
        })
        .fold(f64::NEG_INFINITY, f64::max);
    FeasibilityReport {
        max_equilibrium_residual,
        max_yield_violation,
        tolerance: tol,
        passed: max_equilibrium_residual <= tol && max_yield_violation <= tol,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Relative bracket width at which bisection stops.
    pub tol_bisect: f64,
    /// Absolute constraint tolerance in MPa.
    pub tol_feas: f64,
    /// Projection sweeps per feasibility query.
    pub max_iter: usize,
}

impl SolverSettings {
    pub fn for_instance(inst: &ShakedownInstance) -> Self {
        SolverSettings {
            tol_bisect: 1e-3,
            tol_feas: 1e-6 * inst.max_yield_strength(),
            max_iter: 10_000,
        }
    }
}

/// Cyclic-projection feasibility solver with precomputed projectors.
pub struct FeasibilitySolver<'a> {
    inst: &'a ShakedownInstance,
    ellipsoid: EllipsoidProjector,
    null_space: NullSpaceProjector,
}

impl<'a> FeasibilitySolver<'a> {
    pub fn new(inst: &'a ShakedownInstance) -> Self {
        FeasibilitySolver {
            inst,
            ellipsoid: EllipsoidProjector::new(),
            null_space: NullSpaceProjector::new(&inst.equilibrium.rows, 3 * inst.points.len()),
        }
    }

    /// Searches for a residual field certifying `alpha`; `None` when none was
    /// found within `max_iter` sweeps or the iterates stalled outside the set.
    pub fn solve(&self, alpha: f64, tol: f64, max_iter: usize) -> Option<Vec<StressVec>> {
        let ng = self.inst.points.len();
        if alpha == 0.0 {
            return Some(vec![StressVec::ZERO; ng]);
        }
        let shifts: Vec<Vec<Vector3<f64>>> = self
            .inst
            .points
            .iter()
            .map(|p| {
                p.elastic_stress_per_vertex
                    .iter()
                    .map(|s| s.vector() * alpha)
                    .collect()
            })
            .collect();
        let scale = self.inst.max_yield_strength();
        let mut rho = DVector::<f64>::zeros(3 * ng);
        for _ in 0..max_iter.max(1) {
            let prev = rho.clone();
            for (i, p) in self.inst.points.iter().enumerate() {
                let mut r = Vector3::new(rho[3 * i], rho[3 * i + 1], rho[3 * i + 2]);
                for shift in &shifts[i] {
                    r = self.ellipsoid.project(r + shift, p.yield_strength) - shift;
                }
                rho.fixed_rows_mut::<3>(3 * i).copy_from(&r);
            }
            self.null_space.project(&mut rho);
            let field = to_field(&rho);
            if check_certificate(self.inst, alpha, &field, tol).passed {
                return Some(field);
            }
            let moved = (&rho - &prev).amax();
            if moved <= 1e-13 * scale {
                return None;
            }
        }
        None
    }
}

fn to_field(rho: &DVector<f64>) -> Vec<StressVec> {
    rho.as_slice()
        .chunks(3)
        .map(|c| StressVec([c[0], c[1], c[2]]))
        .collect()
}

pub fn feasible(
    inst: &ShakedownInstance,
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Option<Vec<StressVec>>> {
    inst.validate()?;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!(
            "load factor {alpha} must be finite and >= 0"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(
            "feasibility tolerance must be positive".into(),
        ));
    }
    Ok(FeasibilitySolver::new(inst).solve(alpha, tol, max_iter))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShakedownSolution {
    pub alpha: f64,
    pub residual: Vec<StressVec>,
    pub elastic_limit: f64,
    /// Smallest factor the solver failed to certify; near the boundary the
    /// projections may stall below the true factor.
    pub alpha_upper: f64,
    pub feasibility_queries: usize,
}

const MAX_DOUBLINGS: usize = 60;

/// Largest certified load factor by doubling from the elastic limit and
/// bisecting to relative width `tol_bisect`.
pub fn shakedown_factor(
    inst: &ShakedownInstance,
    settings: &SolverSettings,
) -> Result<ShakedownSolution> {
    inst.validate()?;
    if !(settings.tol_bisect > 0.0 && settings.tol_feas > 0.0) {
        return Err(Error::Domain("tolerances must be positive".into()));
    }
    let elastic_limit = inst
        .elastic_limit()
        .ok_or_else(|| Error::Unbounded("all elastic stresses are zero".into()))?;
    if inst.is_unbounded() {
        return Err(Error::Unbounded(
            "every point sees one self-equilibrated stress at all vertices".into(),
        ));
    }
    let solver = FeasibilitySolver::new(inst);
    let mut queries = 0;
    let mut query = |alpha: f64| {
        queries += 1;
        solver.solve(alpha, settings.tol_feas, settings.max_iter)
    };

    let mut lo = elastic_limit;
    let mut cert = vec![StressVec::ZERO; inst.points.len()];
    let mut hi = 2.0 * lo;
    let mut doublings = 0;
    while let Some(c) = query(hi) {
        lo = hi;
        cert = c;
        hi *= 2.0;
        doublings += 1;
        if doublings >= MAX_DOUBLINGS {
            return Err(Error::Unbounded(format!(
                "still feasible at alpha = {lo:e}; residual stresses can absorb every load vertex"
            )));
        }
    }
    while hi - lo > settings.tol_bisect * lo {
        let mid = 0.5 * (lo + hi);
        match query(mid) {
            Some(c) => {
                lo = mid;
                cert = c;
            }
            None => hi = mid,
        }
    }
    debug_assert!(lo <= hi);
    Ok(ShakedownSolution {
        alpha: lo,
        residual: cert,
        elastic_limit,
        alpha_upper: hi,
        feasibility_queries: queries,
    })
}
