//! Dense linear algebra over the exact and float scalar backends.

mod mat;
mod scalar;
mod smith;

use thiserror::Error;

pub use mat::Mat;
pub use scalar::{
    exact, format_rational, parse_rational, rational, Exact, Float, Rational, Scalar, DEFAULT_TOL,
};
pub use smith::{smith_normal_form, SmithForm};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinalgError {
    #[error("matrix must have positive dimensions")]
    EmptyMatrix,
    #[error("shape error: {0}")]
    Shape(String),
    #[error("expected a square matrix, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("matrix is singular")]
    Singular,
}

pub fn kernel_basis<S: Scalar>(m: &Mat<S>) -> Vec<Vec<S>> {
    m.kernel_basis()
}

pub fn has_eigenvalue_one<S: Scalar>(m: &Mat<S>) -> Result<bool, LinalgError> {
    m.has_eigenvalue_one()
}

/// Kernel of a homogeneous constraint matrix together with the dimension of
/// its image under projection onto a subset of coordinates.
#[derive(Clone, Debug)]
pub struct AffineSolution<S> {
    pub basis: Vec<Vec<S>>,
    pub projection_dim: usize,
}

pub fn solve_affine<S: Scalar>(k: &Mat<S>, selector: &[usize]) -> AffineSolution<S> {
    solve_affine_tol(k, selector, DEFAULT_TOL)
}

pub fn solve_affine_tol<S: Scalar>(k: &Mat<S>, selector: &[usize], tol: f64) -> AffineSolution<S> {
    let basis = k.kernel_basis_tol(tol);
    let projection_dim = if basis.is_empty() || selector.is_empty() {
        0
    } else {
        Mat::from_fn(basis.len(), selector.len(), |i, j| {
            basis[i][selector[j]].clone()
        })
        .rank_tol(tol)
    };
    AffineSolution {
        basis,
        projection_dim,
    }
}
