//! Real `2p x 2p` block representation `[[A, -B], [B, A]]` of a complex
//! `p x p` matrix `A + iB`.
//!
//! The map is an injective ring homomorphism, so inverses and products can
//! be taken on either side. A Hermitian input gives a symmetric block matrix
//! whose eigenvalues are those of the complex matrix, each twice.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, SddError};

/// Tolerance used by [`recover`] when checking block structure.
pub const STRUCTURE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedMatrix {
    matrix: DMatrix<f64>,
    p: usize,
}

impl ExpandedMatrix {
    /// Wraps a real matrix after checking its block structure.
    pub fn from_real(matrix: DMatrix<f64>, tol: f64) -> Result<Self> {
        let p = half_dim(&matrix)?;
        let dev = structure_deviation(&matrix, p);
        if dev > tol {
            return Err(SddError::BlockStructure {
                max_deviation: dev,
                tolerance: tol,
            });
        }
        Ok(Self { matrix, p })
    }

    pub fn zeros(p: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(2 * p, 2 * p),
            p,
        }
    }

    pub fn identity(p: usize) -> Self {
        Self {
            matrix: DMatrix::identity(2 * p, 2 * p),
            p,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// Channel count of the complex matrix represented.
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn dim(&self) -> usize {
        2 * self.p
    }

    /// The `A + iB` this matrix represents, read from the left block column.
    pub fn to_complex(&self) -> DMatrix<Complex64> {
        let p = self.p;
        DMatrix::from_fn(p, p, |i, j| {
            Complex64::new(self.matrix[(i, j)], self.matrix[(i + p, j)])
        })
    }
}

fn half_dim(m: &DMatrix<f64>) -> Result<usize> {
    let (r, c) = m.shape();
    if r != c || r % 2 != 0 || r == 0 {
        return Err(SddError::Argument(format!(
            "expected a square matrix of even dimension, got {r}x{c}"
        )));
    }
    Ok(r / 2)
}

/// Largest violation of `S11 = S22` and `S12 = -S21`.
fn structure_deviation(m: &DMatrix<f64>, p: usize) -> f64 {
    let mut dev = 0.0f64;
    for j in 0..p {
        for i in 0..p {
            dev = dev.max((m[(i, j)] - m[(i + p, j + p)]).abs());
            dev = dev.max((m[(i, j + p)] + m[(i + p, j)]).abs());
        }
    }
    dev
}

pub fn expand(f: &DMatrix<Complex64>) -> ExpandedMatrix {
    let p = f.nrows();
    assert_eq!(p, f.ncols(), "expand needs a square matrix");
    let mut m = DMatrix::zeros(2 * p, 2 * p);
    for j in 0..p {
        for i in 0..p {
            let z = f[(i, j)];
            m[(i, j)] = z.re;
            m[(i + p, j + p)] = z.re;
            m[(i + p, j)] = z.im;
            m[(i, j + p)] = -z.im;
        }
    }
    ExpandedMatrix { matrix: m, p }
}

/// Reads `S[0..p, 0..p] + i S[p..2p, 0..p]` after checking block structure
/// to within [`STRUCTURE_TOL`].
pub fn recover(s: &DMatrix<f64>) -> Result<DMatrix<Complex64>> {
    Ok(ExpandedMatrix::from_real(s.clone(), STRUCTURE_TOL)?.to_complex())
}

/// Nearest block-structured matrix: averages the paired blocks.
pub fn project_block_structure(s: &DMatrix<f64>) -> Result<ExpandedMatrix> {
    let p = half_dim(s)?;
    let mut m = DMatrix::zeros(2 * p, 2 * p);
    for j in 0..p {
        for i in 0..p {
            let a = 0.5 * (s[(i, j)] + s[(i + p, j + p)]);
            let b = 0.5 * (s[(i + p, j)] - s[(i, j + p)]);
            m[(i, j)] = a;
            m[(i + p, j + p)] = a;
            m[(i + p, j)] = b;
            m[(i, j + p)] = -b;
        }
    }
    Ok(ExpandedMatrix { matrix: m, p })
}
