//! Small dense solvers used by the regression engine.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Reciprocal condition number below which a system counts as singular.
pub const RCOND_FLOOR: f64 = 1e-12;

/// Reciprocal condition number of the symmetric 2x2 matrix `[[a, b], [b, d]]`
/// after unit-diagonal equilibration.
pub fn rcond_sym2(a: f64, b: f64, d: f64) -> f64 {
    if !(a > 0.0 && d > 0.0) {
        return 0.0;
    }
    let r = (b / (a.sqrt() * d.sqrt())).abs().min(1.0);
    (1.0 - r) / (1.0 + r)
}

/// Cramer's rule for `[[a, b], [b, d]] x = rhs`.
pub fn solve_sym2(a: f64, b: f64, d: f64, rhs: [f64; 2]) -> [f64; 2] {
    let det = a * d - b * b;
    [
        (rhs[0] * d - b * rhs[1]) / det,
        (a * rhs[1] - b * rhs[0]) / det,
    ]
}

/// Symmetric positive semidefinite solve with a rank check.
///
/// The matrix is equilibrated to unit diagonal, its eigenvalues give the
/// reciprocal condition number, and the solve goes through the eigenbasis.
#[derive(Debug, Clone)]
pub struct SymSolver {
    scale: DVector<f64>,
    eigen: SymmetricEigen<f64, nalgebra::Dyn>,
    pub rcond: f64,
}

impl SymSolver {
    pub fn new(m: &DMatrix<f64>) -> Self {
        let p = m.nrows();
        let scale = DVector::from_fn(p, |i, _| {
            let d = m[(i, i)];
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        });
        let eq = DMatrix::from_fn(p, p, |i, j| m[(i, j)] * scale[i] * scale[j]);
        let eigen = SymmetricEigen::new(eq);
        let max = eigen.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let min = eigen
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let rcond = if scale.iter().any(|&s| s == 0.0) || max <= 0.0 {
            0.0
        } else {
            (min / max).max(0.0)
        };
        Self {
            scale,
            eigen,
            rcond,
        }
    }

    pub fn is_singular(&self) -> bool {
        self.rcond < RCOND_FLOOR
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let b = rhs.component_mul(&self.scale);
        let v = &self.eigen.eigenvectors;
        let mut c = v.transpose() * b;
        for (ci, li) in c.iter_mut().zip(self.eigen.eigenvalues.iter()) {
            *ci /= li;
        }
        (v * c).component_mul(&self.scale)
    }
}
