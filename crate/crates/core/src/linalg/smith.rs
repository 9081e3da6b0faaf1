use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::{LinalgError, Mat};

/// `U * M * V = S` with `U`, `V` unimodular and `S` diagonal, positive,
/// each diagonal entry dividing the next.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmithForm {
    pub u: Mat<BigInt>,
    pub s: Mat<BigInt>,
    pub v: Mat<BigInt>,
}

impl SmithForm {
    pub fn diagonal(&self) -> Vec<BigInt> {
        (0..self.s.rows()).map(|i| self.s[(i, i)].clone()).collect()
    }
}

fn int_identity(n: usize) -> Mat<BigInt> {
    Mat::from_fn(n, n, |i, j| {
        if i == j {
            BigInt::one()
        } else {
            BigInt::zero()
        }
    })
}

fn swap_rows(m: &mut Mat<BigInt>, a: usize, b: usize) {
    if a == b {
        return;
    }
    for j in 0..m.cols() {
        let tmp = m[(a, j)].clone();
        m[(a, j)] = m[(b, j)].clone();
        m[(b, j)] = tmp;
    }
}

fn swap_cols(m: &mut Mat<BigInt>, a: usize, b: usize) {
    if a == b {
        return;
    }
    for i in 0..m.rows() {
        let tmp = m[(i, a)].clone();
        m[(i, a)] = m[(i, b)].clone();
        m[(i, b)] = tmp;
    }
}

/// row[target] += factor * row[source]
fn add_row(m: &mut Mat<BigInt>, target: usize, source: usize, factor: &BigInt) {
    for j in 0..m.cols() {
        let delta = &m[(source, j)] * factor;
        m[(target, j)] += delta;
    }
}

/// col[target] += factor * col[source]
fn add_col(m: &mut Mat<BigInt>, target: usize, source: usize, factor: &BigInt) {
    for i in 0..m.rows() {
        let delta = &m[(i, source)] * factor;
        m[(i, target)] += delta;
    }
}

pub fn smith_normal_form(m: &Mat<BigInt>) -> Result<SmithForm, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare(m.rows(), m.cols()));
    }
    let n = m.rows();
    let mut a = m.clone();
    let mut u = int_identity(n);
    let mut v = int_identity(n);

    for t in 0..n {
        loop {
            let pivot = (t..n)
                .flat_map(|i| (t..n).map(move |j| (i, j)))
                .filter(|&(i, j)| !a[(i, j)].is_zero())
                .min_by_key(|&(i, j)| a[(i, j)].abs());
            let Some((pi, pj)) = pivot else {
                return Err(LinalgError::Singular);
            };
            swap_rows(&mut a, t, pi);
            swap_rows(&mut u, t, pi);
            swap_cols(&mut a, t, pj);
            swap_cols(&mut v, t, pj);

            let mut clean = true;
            for i in t + 1..n {
                let q = a[(i, t)].div_floor(&a[(t, t)]);
                if !q.is_zero() {
                    add_row(&mut a, i, t, &-&q);
                    add_row(&mut u, i, t, &-&q);
                }
                clean &= a[(i, t)].is_zero();
            }
            for j in t + 1..n {
                let q = a[(t, j)].div_floor(&a[(t, t)]);
                if !q.is_zero() {
                    add_col(&mut a, j, t, &-&q);
                    add_col(&mut v, j, t, &-&q);
                }
                clean &= a[(t, j)].is_zero();
            }
            if !clean {
                continue;
            }
            let offender = (t + 1..n)
                .flat_map(|i| (t + 1..n).map(move |j| (i, j)))
                .find(|&(i, j)| !a[(i, j)].is_multiple_of(&a[(t, t)]));
            match offender {
                Some((i, _)) => {
                    add_row(&mut a, t, i, &BigInt::one());
                    add_row(&mut u, t, i, &BigInt::one());
                }
                None => break,
            }
        }
        if a[(t, t)].is_negative() {
            for j in 0..n {
                a[(t, j)] = -a[(t, j)].clone();
                u[(t, j)] = -u[(t, j)].clone();
            }
        }
    }
    Ok(SmithForm { u, s: a, v })
}
