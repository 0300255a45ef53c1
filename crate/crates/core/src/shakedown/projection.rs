//! Euclidean projections used by the alternating-projection feasibility solver.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};

/// Quadratic form of the squared plane-stress von Mises stress,
/// `q(s) = sxx^2 - sxx syy + syy^2 + 3 txy^2 = s^T Q s`.
pub(crate) fn von_mises_form() -> Matrix3<f64> {
    Matrix3::new(1.0, -0.5, 0.0, -0.5, 1.0, 0.0, 0.0, 0.0, 3.0)
}

/// Projection onto `{ y : y^T Q y <= r^2 }` via the eigenbasis of `Q`.
///
/// The minimizer of `|y - z|^2` on the boundary satisfies
/// `y = (I + lambda Q)^{-1} z`; in eigen-coordinates the constraint becomes
/// `phi(lambda) = sum_j q_j z_j^2 / (1 + lambda q_j)^2 = r^2`, decreasing and
/// convex in `lambda >= 0`, solved by Newton from the left.
#[derive(Debug, Clone)]
pub(crate) struct EllipsoidProjector {
    basis: Matrix3<f64>,
    eig: Vector3<f64>,
}

impl EllipsoidProjector {
    pub(crate) fn new() -> Self {
        let SymmetricEigen {
            eigenvectors,
            eigenvalues,
        } = SymmetricEigen::new(von_mises_form());
        debug_assert!(eigenvalues.iter().all(|&q| q > 0.0));
        EllipsoidProjector {
            basis: eigenvectors,
            eig: eigenvalues,
        }
    }

    pub(crate) fn project(&self, z: Vector3<f64>, radius: f64) -> Vector3<f64> {
        let r2 = radius * radius;
        let zt = self.basis.transpose() * z;
        let phi = |lam: f64| -> (f64, f64) {
            let mut val = 0.0;
            let mut der = 0.0;
            for j in 0..3 {
                let q = self.eig[j];
                let den = 1.0 + lam * q;
                let t = q * zt[j] * zt[j] / (den * den);
                val += t;
                der -= 2.0 * q * t / den;
            }
            (val - r2, der)
        };
        let (f0, _) = phi(0.0);
        if f0 <= 0.0 {
            return z;
        }
        let mut lam = 0.0;
        for _ in 0..100 {
            let (f, df) = phi(lam);
            if f <= 1e-14 * r2 {
                break;
            }
            let step = f / df;
            lam -= step;
            if step.abs() <= 1e-15 * lam.abs().max(1e-300) {
                break;
            }
        }
        let yt = Vector3::from_fn(|j, _| zt[j] / (1.0 + lam * self.eig[j]));
        self.basis * yt
    }
}

/// Orthogonal projector onto the null space of an `m x n` matrix.
#[derive(Debug, Clone)]
pub(crate) struct NullSpaceProjector {
    /// Orthonormal rows spanning the row space; empty when unconstrained.
    row_basis: Option<DMatrix<f64>>,
}

impl NullSpaceProjector {
    pub(crate) fn new(rows: &[Vec<f64>], columns: usize) -> Self {
        if rows.is_empty() {
            return NullSpaceProjector { row_basis: None };
        }
        let c = DMatrix::from_fn(rows.len(), columns, |i, j| rows[i][j]);
        let svd = c.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let smax = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
        let tol = smax * (columns.max(rows.len()) as f64) * f64::EPSILON * 16.0;
        let keep: Vec<usize> = svd
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > tol)
            .map(|(i, _)| i)
            .collect();
        if keep.is_empty() {
            return NullSpaceProjector { row_basis: None };
        }
        let basis = DMatrix::from_fn(keep.len(), columns, |i, j| v_t[(keep[i], j)]);
        NullSpaceProjector {
            row_basis: Some(basis),
        }
    }

    pub(crate) fn project(&self, x: &mut DVector<f64>) {
        if let Some(b) = &self.row_basis {
            let coeffs = b * &*x;
            *x -= b.transpose() * coeffs;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(v: &Vector3<f64>) -> f64 {
        (v.transpose() * von_mises_form() * v)[0]
    }

    #[test]
    fn ellipsoid_projection_is_optimal() {
        let p = EllipsoidProjector::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let z = Vector3::from_fn(|_, _| rng.random_range(-600.0..600.0));
            let r = rng.random_range(50.0..300.0);
            let y = p.project(z, r);
            if q(&z) <= r * r {
                assert_eq!(y, z);
                continue;
            }
            assert!((q(&y).sqrt() - r).abs() < 1e-9 * r);
            // optimality: z - y is along the outward normal Q y
            let normal = von_mises_form() * y;
            let d = z - y;
            let cos = d.dot(&normal) / (d.norm() * normal.norm());
            assert!((cos - 1.0).abs() < 1e-9, "cos = {cos}");
            // no random boundary point is closer
            for _ in 0..20 {
                let dir = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
                let w = dir * (r / q(&dir).sqrt());
                assert!((z - w).norm() >= d.norm() - 1e-9);
            }
        }
    }

    #[test]
    fn null_space_projection() {
        let rows = vec![
            vec![1.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, -1.0],
            vec![2.0, 2.0, 0.0, 0.0],
        ];
        let p = NullSpaceProjector::new(&rows, 4);
        let mut x = DVector::from_vec(vec![3.0, 1.0, -2.0, 5.0]);
        p.project(&mut x);
        assert!((x[0] + x[1]).abs() < 1e-12);
        assert!((x[2] - x[3]).abs() < 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[2] - 1.5).abs() < 1e-12);
        let before = x.clone();
        p.project(&mut x);
        assert!((x - before).norm() < 1e-12);

        let free = NullSpaceProjector::new(&[], 3);
        let mut y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        free.project(&mut y);
        assert_eq!(y.as_slice(), &[1.0, 2.0, 3.0]);
    }
}
