//! Brute-force reference for small instances whose equilibrium rows only pin
//! individual residual components.
//!
//! With such rows the points decouple and the factor is the minimum of the
//! per-point factors. For one point, write `e = rho + alpha sigmaE_1` on the
//! free components. For fixed `e` each vertex constraint is a quadratic
//! inequality in `alpha`, so the admissible `alpha` form an interval that is
//! computed exactly; the outer maximisation over `e` runs over a grid with
//! spacing `grid_step * sigmaY` covering the vertex-1 yield ellipse. Every
//! grid point yields an admissible pair, so the result never exceeds the
//! true factor and increases as the grid is refined by halving.

use nalgebra::Vector3;
use rayon::prelude::*;

use super::projection::von_mises_form;
use super::ShakedownInstance;
use crate::error::{Error, Result};

const MAX_POINTS: usize = 2;
const MAX_VERTICES: usize = 2;

/// Reference shakedown factor; `grid_step` is a fraction of each point's
/// yield strength.
pub fn brute_force_factor(inst: &ShakedownInstance, grid_step: f64) -> Result<f64> {
    inst.validate()?;
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(Error::Domain(format!(
            "grid_step {grid_step} must lie in (0, 1]"
        )));
    }
    if inst.points.len() > MAX_POINTS || inst.vertex_count() > MAX_VERTICES {
        return Err(Error::OracleScope(format!(
            "oracle handles at most {MAX_POINTS} points and {MAX_VERTICES} vertices"
        )));
    }
    let mut pinned = vec![[false; 3]; inst.points.len()];
    for (r, row) in inst.equilibrium.rows.iter().enumerate() {
        let nz: Vec<usize> = (0..row.len()).filter(|&j| row[j] != 0.0).collect();
        match nz.as_slice() {
            [] => {}
            [j] => pinned[j / 3][j % 3] = true,
            _ => {
                return Err(Error::OracleScope(format!(
                    "equilibrium row {r} couples several components"
                )))
            }
        }
    }
    let factors: Vec<f64> = inst
        .points
        .iter()
        .zip(&pinned)
        .map(|(p, pins)| {
            let vertices: Vec<Vector3<f64>> = p
                .elastic_stress_per_vertex
                .iter()
                .map(|s| Vector3::from(s.0))
                .collect();
            point_factor(&vertices, pins, p.yield_strength, grid_step)
        })
        .collect();
    let bounded: Vec<f64> = factors.into_iter().filter(|a| a.is_finite()).collect();
    bounded
        .into_iter()
        .reduce(f64::min)
        .ok_or_else(|| Error::Unbounded("every point admits arbitrarily large factors".into()))
}

fn point_factor(vertices: &[Vector3<f64>], pinned: &[bool; 3], sy: f64, grid_step: f64) -> f64 {
    let q = von_mises_form();
    let free: Vec<usize> = (0..3).filter(|&c| !pinned[c]).collect();
    // vertex k stress = a(e) + alpha b_k, a carries the free components of e
    let first = vertices[0];
    let b: Vec<Vector3<f64>> = vertices
        .iter()
        .map(|v| Vector3::from_fn(|c, _| if pinned[c] { v[c] } else { v[c] - first[c] }))
        .collect();
    let qb: Vec<Vector3<f64>> = b.iter().map(|bk| q * bk).collect();
    let qbb: Vec<f64> = b.iter().zip(&qb).map(|(bk, qbk)| bk.dot(qbk)).collect();

    let h = grid_step * sy;
    let axis = |c: usize| -> Vec<f64> {
        let bound = if c == 2 {
            sy / 3f64.sqrt()
        } else {
            2.0 * sy / 3f64.sqrt()
        };
        let n = (bound / h).floor() as i64;
        (-n..=n).map(|j| j as f64 * h).collect()
    };
    let axes: Vec<Vec<f64>> = free.iter().map(|&c| axis(c)).collect();
    let sy2 = sy * sy;

    let best_at = |a: Vector3<f64>| -> f64 {
        let qa = q * a;
        let caa = a.dot(&qa) - sy2;
        let mut lo = 0.0f64;
        let mut hi = f64::INFINITY;
        for k in 0..b.len() {
            match quadratic_interval(qbb[k], a.dot(&qb[k]), caa) {
                Some((l, u)) => {
                    lo = lo.max(l);
                    hi = hi.min(u);
                }
                None => return f64::NEG_INFINITY,
            }
            if lo > hi {
                return f64::NEG_INFINITY;
            }
        }
        hi
    };

    let assemble = |vals: &[f64]| -> Vector3<f64> {
        let mut a = Vector3::zeros();
        for (&c, &v) in free.iter().zip(vals) {
            a[c] = v;
        }
        a
    };

    match axes.len() {
        0 => best_at(Vector3::zeros()),
        1 => axes[0]
            .iter()
            .map(|&x| best_at(assemble(&[x])))
            .fold(f64::NEG_INFINITY, f64::max),
        2 => axes[0]
            .par_iter()
            .map(|&x| {
                axes[1]
                    .iter()
                    .map(|&y| best_at(assemble(&[x, y])))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .reduce(|| f64::NEG_INFINITY, f64::max),
        _ => axes[0]
            .par_iter()
            .map(|&x| {
                let mut best = f64::NEG_INFINITY;
                for &y in &axes[1] {
                    for &z in &axes[2] {
                        best = best.max(best_at(assemble(&[x, y, z])));
                    }
                }
                best
            })
            .reduce(|| f64::NEG_INFINITY, f64::max),
    }
}

/// `{ alpha >= 0 : A alpha^2 + 2 B alpha + C <= 0 }` for `A >= 0`, as a
/// closed interval, or `None` when empty.
fn quadratic_interval(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    let (lo, hi) = if a <= 0.0 {
        if b == 0.0 {
            if c <= 0.0 {
                (0.0, f64::INFINITY)
            } else {
                return None;
            }
        } else if b > 0.0 {
            (0.0, -c / (2.0 * b))
        } else {
            (-c / (2.0 * b), f64::INFINITY)
        }
    } else {
        let disc = b * b - a * c;
        if disc < 0.0 {
            return None;
        }
        let root = disc.sqrt();
        ((-b - root) / a, (-b + root) / a)
    };
    let lo = lo.max(0.0);
    (lo <= hi).then_some((lo, hi))
}
