use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_traits::Zero;

use super::scalar::{Scalar, DEFAULT_TOL};
use super::LinalgError;

/// Dense row-major matrix.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone> Mat<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::EmptyMatrix);
        }
        if data.len() != rows * cols {
            return Err(LinalgError::Shape(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self, LinalgError> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(LinalgError::Shape("ragged rows".into()));
        }
        Self::new(n, m, rows.into_iter().flatten().collect())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn column(values: Vec<T>) -> Self {
        let n = values.len();
        Self::new(n, 1, values).expect("non-empty column")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn map<U: Clone>(&self, f: impl Fn(&T) -> U) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: fmt::Debug> fmt::Debug for Mat<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[i * self.cols..(i + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| S::zero())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { S::one() } else { S::zero() })
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn is_negligible(&self, tol: f64) -> bool {
        self.data.iter().all(|x| x.is_negligible(tol))
    }

    pub fn scale(&self, c: &S) -> Self {
        self.map(|x| x.clone() * c.clone())
    }

    /// Largest entry modulus.
    pub fn max_modulus(&self) -> f64 {
        self.data.iter().map(Scalar::modulus).fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(v.len(), self.cols, "dimension mismatch in mul_vec");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(S::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
            })
            .collect()
    }

    /// Row echelon reduction in place. Returns the pivot columns.
    ///
    /// Float matrices are row-normalised first and entries with modulus at or
    /// below `tol` are treated as zero; exact matrices ignore `tol`.
    fn reduce(&mut self, tol: f64) -> Vec<usize> {
        if !S::EXACT {
            for i in 0..self.rows {
                let norm = self.row(i).iter().map(Scalar::modulus).fold(0.0, f64::max);
                if norm > 0.0 {
                    let inv = S::one() / S::from_f64(norm);
                    for j in 0..self.cols {
                        self[(i, j)] = self[(i, j)].clone() * inv.clone();
                    }
                }
            }
        }
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..self.cols {
            if row == self.rows {
                break;
            }
            let candidate = if S::EXACT {
                (row..self.rows).find(|&i| !self[(i, col)].is_zero())
            } else {
                (row..self.rows)
                    .filter(|&i| !self[(i, col)].is_negligible(tol))
                    .max_by(|&a, &b| {
                        self[(a, col)]
                            .modulus()
                            .total_cmp(&self[(b, col)].modulus())
                    })
            };
            let Some(p) = candidate else {
                for i in row..self.rows {
                    self[(i, col)] = S::zero();
                }
                continue;
            };
            if p != row {
                for j in 0..self.cols {
                    self.data.swap(p * self.cols + j, row * self.cols + j);
                }
            }
            let inv = S::one() / self[(row, col)].clone();
            for j in col..self.cols {
                self[(row, j)] = self[(row, j)].clone() * inv.clone();
            }
            for i in 0..self.rows {
                if i == row || self[(i, col)].is_zero() {
                    continue;
                }
                let factor = self[(i, col)].clone();
                for j in col..self.cols {
                    let delta = factor.clone() * self[(row, j)].clone();
                    self[(i, j)] = self[(i, j)].clone() - delta;
                }
                self[(i, col)] = S::zero();
            }
            pivots.push(col);
            row += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        self.rank_tol(DEFAULT_TOL)
    }

    pub fn rank_tol(&self, tol: f64) -> usize {
        self.clone().reduce(tol).len()
    }

    pub fn kernel_basis(&self) -> Vec<Vec<S>> {
        self.kernel_basis_tol(DEFAULT_TOL)
    }

    /// Basis of the right null space, one vector per free column.
    pub fn kernel_basis_tol(&self, tol: f64) -> Vec<Vec<S>> {
        let mut reduced = self.clone();
        let pivots = reduced.reduce(tol);
        let mut is_pivot = vec![None; self.cols];
        for (r, &c) in pivots.iter().enumerate() {
            is_pivot[c] = Some(r);
        }
        (0..self.cols)
            .filter(|&c| is_pivot[c].is_none())
            .map(|free| {
                let mut v = vec![S::zero(); self.cols];
                v[free] = S::one();
                for (c, slot) in is_pivot.iter().enumerate() {
                    if let Some(r) = slot {
                        v[c] = -reduced[(*r, free)].clone();
                    }
                }
                v
            })
            .collect()
    }

    pub fn determinant(&self) -> Result<S, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare(self.rows, self.cols));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut det = S::one();
        for col in 0..n {
            let Some(p) = (col..n).find(|&i| !a[(i, col)].is_negligible(0.0)) else {
                return Ok(S::zero());
            };
            if p != col {
                for j in 0..n {
                    a.data.swap(p * n + j, col * n + j);
                }
                det = -det;
            }
            let pivot = a[(col, col)].clone();
            det = det * pivot.clone();
            for i in col + 1..n {
                if a[(i, col)].is_zero() {
                    continue;
                }
                let factor = a[(i, col)].clone() / pivot.clone();
                for j in col..n {
                    let delta = factor.clone() * a[(col, j)].clone();
                    a[(i, j)] = a[(i, j)].clone() - delta;
                }
            }
        }
        Ok(det)
    }

    /// Inverse via Gauss-Jordan on `[M | I]`; `None` when singular.
    pub fn inverse(&self) -> Option<Self> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        let mut aug = Self::from_fn(n, 2 * n, |i, j| {
            if j < n {
                self[(i, j)].clone()
            } else if j - n == i {
                S::one()
            } else {
                S::zero()
            }
        });
        let pivots = aug.reduce(DEFAULT_TOL);
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return None;
        }
        Some(Self::from_fn(n, n, |i, j| aug[(i, j + n)].clone()))
    }

    /// Solves `self * x = b` for square invertible `self`.
    pub fn solve(&self, b: &Self) -> Option<Self> {
        self.inverse().map(|inv| &inv * b)
    }

    pub fn has_eigenvalue_one(&self) -> Result<bool, LinalgError> {
        self.has_eigenvalue_one_tol(DEFAULT_TOL)
    }

    pub fn has_eigenvalue_one_tol(&self, tol: f64) -> Result<bool, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare(self.rows, self.cols));
        }
        Ok(S::unit_eigenvalue(self, tol))
    }

    pub fn convert<U: Scalar>(&self, f: impl Fn(&S) -> U) -> Mat<U> {
        self.map(f)
    }

    pub fn to_c64(&self) -> Mat<super::Float> {
        self.map(Scalar::to_c64)
    }
}

impl<S: Scalar> Mul for &Mat<S> {
    type Output = Mat<S>;

    fn mul(self, rhs: &Mat<S>) -> Mat<S> {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in product");
        let mut out = Mat::<S>::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = &rhs[(k, j)];
                    if b.is_zero() {
                        continue;
                    }
                    out[(i, j)] = out[(i, j)].clone() + a.clone() * b.clone();
                }
            }
        }
        out
    }
}

impl<S: Scalar> Add for &Mat<S> {
    type Output = Mat<S>;

    fn add(self, rhs: &Mat<S>) -> Mat<S> {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "shape mismatch"
        );
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        }
    }
}

impl<S: Scalar> Sub for &Mat<S> {
    type Output = Mat<S>;

    fn sub(self, rhs: &Mat<S>) -> Mat<S> {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "shape mismatch"
        );
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        }
    }
}

impl<S: Scalar> Neg for &Mat<S> {
    type Output = Mat<S>;

    fn neg(self) -> Mat<S> {
        self.map(|x| -x.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::scalar::{exact, Exact, Float};

    fn ex(rows: &[&[i64]]) -> Mat<Exact> {
        Mat::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&v| exact(v, 1)).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn identity_has_trivial_kernel() {
        assert!(Mat::<Exact>::identity(2).kernel_basis().is_empty());
    }

    #[test]
    fn zero_matrix_kernel_is_everything() {
        let k = Mat::<Exact>::zeros(2, 2).kernel_basis();
        assert_eq!(k.len(), 2);
        let basis = Mat::from_rows(k).unwrap();
        assert_eq!(basis.rank(), 2);
    }

    #[test]
    fn rank_one_kernel() {
        let k = ex(&[&[1, 1], &[1, 1]]).kernel_basis();
        assert_eq!(k, vec![vec![exact(-1, 1), exact(1, 1)]]);
    }

    #[test]
    fn eigenvalue_one_examples() {
        assert!(Mat::<Exact>::identity(3).has_eigenvalue_one().unwrap());
        assert!(!Mat::<Exact>::identity(3)
            .scale(&exact(2, 1))
            .has_eigenvalue_one()
            .unwrap());
        assert!(ex(&[&[0, 1], &[1, 0]]).has_eigenvalue_one().unwrap());
        assert!(matches!(
            Mat::<Exact>::zeros(2, 3).has_eigenvalue_one(),
            Err(LinalgError::NotSquare(2, 3))
        ));
    }

    #[test]
    fn float_eigenvalue_one_uses_singular_values() {
        let m = Mat::from_rows(vec![
            vec![Float::new(0.0, 0.0), Float::new(1.0, 0.0)],
            vec![Float::new(1.0, 0.0), Float::new(0.0, 0.0)],
        ])
        .unwrap();
        assert!(m.has_eigenvalue_one().unwrap());
        let m2 = Mat::<Float>::identity(2).scale(&Float::new(1.0 + 1e-6, 0.0));
        assert!(!m2.has_eigenvalue_one().unwrap());
    }

    #[test]
    fn inverse_and_determinant() {
        let m = ex(&[&[2, 1], &[1, 1]]);
        assert_eq!(m.determinant().unwrap(), exact(1, 1));
        let inv = m.inverse().unwrap();
        assert_eq!(&m * &inv, Mat::identity(2));
        assert!(ex(&[&[1, 2], &[2, 4]]).inverse().is_none());
    }

    #[test]
    fn float_rank_respects_tolerance() {
        let m = Mat::from_rows(vec![
            vec![Float::new(1.0, 0.0), Float::new(1.0, 0.0)],
            vec![Float::new(1.0, 0.0), Float::new(1.0 + 1e-13, 0.0)],
        ])
        .unwrap();
        assert_eq!(m.rank(), 1);
        assert_eq!(m.kernel_basis().len(), 1);
    }
}
