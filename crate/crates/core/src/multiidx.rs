//! Degree-graded monomial coordinates.
//!
//! Multi-indices of a fixed degree are ordered lexicographically descending
//! on `(α₁, …, α_d)`, so in two variables degree 2 reads `x², xy, y²`. Every
//! block matrix in the crate inherits this ordering.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::crystal::{CrystalElement, CrystalTriple};
use crate::linalg::{Mat, Rational, Scalar};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MultiIdxError {
    #[error("block degree t={t} exceeds s={s}")]
    DegreeOrder { s: usize, t: usize },
    #[error("expected a point of dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("collection has degrees below {have}, degree {need} requested")]
    MissingDegree { have: usize, need: usize },
    #[error("block for degree {degree} must be {rows}x{cols}")]
    BlockShape {
        degree: usize,
        rows: usize,
        cols: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn degree(&self) -> usize {
        self.0.iter().map(|&a| a as usize).sum()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dominates(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a >= b)
    }
}

/// All multi-indices of one degree, in the global order.
#[derive(Clone, Debug)]
pub struct GradedBasis {
    dim: usize,
    degree: usize,
    indices: Vec<MultiIndex>,
    position: HashMap<MultiIndex, usize>,
}

impl GradedBasis {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.position.get(alpha).copied()
    }
}

/// `d_s = C(s+d−1, d−1)`.
pub fn graded_dim(d: usize, s: usize) -> usize {
    binomial((s + d - 1) as u64, (d - 1) as u64) as usize
}

pub fn enumerate_degree(d: usize, s: usize) -> GradedBasis {
    assert!(d >= 1, "dimension must be positive");
    let mut indices = Vec::with_capacity(graded_dim(d, s));
    let mut current = vec![0u32; d];
    fill(&mut current, 0, s as u32, &mut indices);
    let position = indices
        .iter()
        .enumerate()
        .map(|(i, a)| (a.clone(), i))
        .collect();
    GradedBasis {
        dim: d,
        degree: s,
        indices,
        position,
    }
}

fn fill(current: &mut Vec<u32>, slot: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    if slot + 1 == current.len() {
        current[slot] = remaining;
        out.push(MultiIndex(current.clone()));
        return;
    }
    for a in (0..=remaining).rev() {
        current[slot] = a;
        fill(current, slot + 1, remaining - a, out);
    }
}

pub(crate) fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

fn powers<S: Scalar>(x: &S, max: usize) -> Vec<S> {
    let mut out = Vec::with_capacity(max + 1);
    out.push(S::one());
    for i in 0..max {
        out.push(out[i].clone() * x.clone());
    }
    out
}

fn monomial<S: Scalar>(pows: &[Vec<S>], alpha: &MultiIndex) -> S {
    alpha
        .0
        .iter()
        .enumerate()
        .fold(S::one(), |acc, (i, &a)| acc * pows[i][a as usize].clone())
}

/// `X_[s](x) = [x^α]_{|α|=s}`.
pub fn eval_x<S: Scalar>(s: usize, x: &[S]) -> Vec<S> {
    let basis = enumerate_degree(x.len(), s);
    let pows: Vec<Vec<S>> = x.iter().map(|xi| powers(xi, s)).collect();
    basis.indices().iter().map(|a| monomial(&pows, a)).collect()
}

/// `A_[s]` with `X_[s](Ax) = A_[s] X_[s](x)`, by expanding `∏ (Ax)_i^{α_i}`.
pub fn build_a_s<S: Scalar>(a: &Mat<S>, s: usize) -> Mat<S> {
    let d = a.rows();
    assert!(a.is_square(), "A must be square");
    let basis = enumerate_degree(d, s);
    let mut out = Mat::zeros(basis.len(), basis.len());
    for (row, alpha) in basis.indices().iter().enumerate() {
        let mut poly: BTreeMap<Vec<u32>, S> = BTreeMap::new();
        poly.insert(vec![0; d], S::one());
        for (i, &ai) in alpha.0.iter().enumerate() {
            for _ in 0..ai {
                let mut next: BTreeMap<Vec<u32>, S> = BTreeMap::new();
                for (exp, c) in &poly {
                    for j in 0..d {
                        if a[(i, j)].is_zero() {
                            continue;
                        }
                        let mut e = exp.clone();
                        e[j] += 1;
                        let term = c.clone() * a[(i, j)].clone();
                        let slot = next.entry(e).or_insert_with(S::zero);
                        *slot = slot.clone() + term;
                    }
                }
                poly = next;
            }
        }
        for (exp, c) in poly {
            let col = basis
                .position(&MultiIndex(exp))
                .expect("homogeneous degree");
            out[(row, col)] = c;
        }
    }
    out
}

/// `Q_[s,t](y)` with `X_[s](x − y) = Σ_t Q_[s,t](y) X_[t](x)`; entry
/// `(α, β)` is `binom(α, β)·(−y)^{α−β}` for `β ≤ α`.
pub fn build_q_st<S: Scalar>(y: &[S], s: usize, t: usize) -> Result<Mat<S>, MultiIdxError> {
    if t > s {
        return Err(MultiIdxError::DegreeOrder { s, t });
    }
    let d = y.len();
    let rows = enumerate_degree(d, s);
    let cols = enumerate_degree(d, t);
    let pows: Vec<Vec<S>> = y.iter().map(|yi| powers(&-yi.clone(), s - t)).collect();
    let mut out = Mat::zeros(rows.len(), cols.len());
    for (i, alpha) in rows.indices().iter().enumerate() {
        for (j, beta) in cols.indices().iter().enumerate() {
            if !alpha.dominates(beta) {
                continue;
            }
            let mut c = S::one();
            for k in 0..d {
                let (a, b) = (alpha.0[k], beta.0[k]);
                c = c
                    * S::from_i64(binomial(a as u64, b as u64) as i64)
                    * pows[k][(a - b) as usize].clone();
            }
            out[(i, j)] = c;
        }
    }
    Ok(out)
}

/// `Q̃_[s,t](γ) = Q_[s,t](R·l)·(b⁻¹)_[t]` for `γ = (b, l)`, exact.
pub fn build_q_tilde(
    triple: &CrystalTriple,
    gamma: &CrystalElement,
    s: usize,
    t: usize,
) -> Result<Mat<Rational>, MultiIdxError> {
    let l = triple.lattice().point(&gamma.k);
    let q = build_q_st(&l, s, t)?;
    let b_inv = triple.group().element(triple.group().inverse(gamma.g));
    Ok(&q * &build_a_s(b_inv, t))
}

/// Blocks `v_[0], …, v_[p−1]`, block `s` being `d_s × r`.
#[derive(Clone, Debug, PartialEq)]
pub struct VCollection<S> {
    dim: usize,
    r: usize,
    blocks: Vec<Mat<S>>,
}

impl<S: Scalar> VCollection<S> {
    pub fn new(dim: usize, r: usize, blocks: Vec<Mat<S>>) -> Result<Self, MultiIdxError> {
        for (s, b) in blocks.iter().enumerate() {
            let rows = graded_dim(dim, s);
            if b.rows() != rows || b.cols() != r {
                return Err(MultiIdxError::BlockShape {
                    degree: s,
                    rows,
                    cols: r,
                });
            }
        }
        Ok(Self { dim, r, blocks })
    }

    /// Reassembles blocks from a flat vector laid out degree by degree,
    /// row-major within each block.
    pub fn from_flat(dim: usize, r: usize, degrees: usize, flat: &[S]) -> Self {
        let mut offset = 0;
        let blocks = (0..degrees)
            .map(|s| {
                let rows = graded_dim(dim, s);
                let block = Mat::from_fn(rows, r, |i, j| flat[offset + i * r + j].clone());
                offset += rows * r;
                block
            })
            .collect();
        Self { dim, r, blocks }
    }

    pub fn flatten(&self) -> Vec<S> {
        self.blocks
            .iter()
            .flat_map(|b| b.as_slice().iter().cloned())
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Number of stored degrees, i.e. the accuracy this collection witnesses.
    pub fn degrees(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, s: usize) -> &Mat<S> {
        &self.blocks[s]
    }

    pub fn blocks(&self) -> &[Mat<S>] {
        &self.blocks
    }

    pub fn block_mut(&mut self, s: usize) -> &mut Mat<S> {
        &mut self.blocks[s]
    }

    pub fn scale(&self, c: &S) -> Self {
        Self {
            dim: self.dim,
            r: self.r,
            blocks: self.blocks.iter().map(|b| b.scale(c)).collect(),
        }
    }

    pub fn truncate(&self, degrees: usize) -> Self {
        Self {
            dim: self.dim,
            r: self.r,
            blocks: self.blocks[..degrees.min(self.blocks.len())].to_vec(),
        }
    }

    pub fn convert<U: Scalar>(&self, f: impl Fn(&S) -> U) -> VCollection<U> {
        VCollection {
            dim: self.dim,
            r: self.r,
            blocks: self.blocks.iter().map(|b| b.convert(&f)).collect(),
        }
    }
}

/// Cached graded operators of a triple (and optionally a dilation) in one
/// scalar backend.
#[derive(Clone, Debug)]
pub struct GradedOps<S> {
    dim: usize,
    max_degree: usize,
    basis: Mat<S>,
    a_s: Vec<Mat<S>>,
    b_s: Vec<Vec<Mat<S>>>,
    b_inv_s: Vec<Vec<Mat<S>>>,
}

impl<S: Scalar> GradedOps<S> {
    pub fn new(triple: &CrystalTriple, a: Option<&Mat<Rational>>, max_degree: usize) -> Self {
        let d = triple.dim();
        let conv = |m: &Mat<Rational>| m.convert(S::from_rational);
        let a_s = match a {
            Some(a) => (0..=max_degree).map(|s| conv(&build_a_s(a, s))).collect(),
            None => Vec::new(),
        };
        let group = triple.group();
        let per_element = |idx: usize| -> Vec<Mat<S>> {
            (0..=max_degree)
                .map(|s| conv(&build_a_s(group.element(idx), s)))
                .collect()
        };
        let b_s: Vec<Vec<Mat<S>>> = (0..group.order()).map(per_element).collect();
        let b_inv_s = (0..group.order())
            .map(|i| b_s[group.inverse(i)].clone())
            .collect();
        Self {
            dim: d,
            max_degree,
            basis: conv(triple.lattice().basis()),
            a_s,
            b_s,
            b_inv_s,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// `A_[s]`; panics when the cache was built without a dilation.
    pub fn a_s(&self, s: usize) -> &Mat<S> {
        &self.a_s[s]
    }

    /// `(g_i)_[s]`.
    pub fn b_s(&self, g: usize, s: usize) -> &Mat<S> {
        &self.b_s[g][s]
    }

    /// Translation vector `R·k` in this backend.
    pub fn point(&self, k: &[i64]) -> Vec<S> {
        let kv: Vec<S> = k.iter().map(|&x| S::from_i64(x)).collect();
        self.basis.mul_vec(&kv)
    }

    /// `Q_[s,t](R·k)`.
    pub fn q_lattice(&self, k: &[i64], s: usize, t: usize) -> Mat<S> {
        build_q_st(&self.point(k), s, t).expect("t ≤ s")
    }

    pub fn q_tilde(&self, gamma: &CrystalElement, s: usize, t: usize) -> Mat<S> {
        &self.q_lattice(&gamma.k, s, t) * &self.b_inv_s[gamma.g][t]
    }

    /// `y_[s](γ) = Σ_t Q̃_[s,t](γ) v_[t]`.
    pub fn eval_y(
        &self,
        gamma: &CrystalElement,
        v: &VCollection<S>,
        s: usize,
    ) -> Result<Mat<S>, MultiIdxError> {
        if s >= v.degrees() {
            return Err(MultiIdxError::MissingDegree {
                have: v.degrees(),
                need: s,
            });
        }
        let mut acc = Mat::zeros(graded_dim(self.dim, s), v.r());
        for t in 0..=s {
            acc = &acc + &(&self.q_tilde(gamma, s, t) * v.block(t));
        }
        Ok(acc)
    }
}

/// `y_[s](γ)` over a triple, building the operators on the fly.
pub fn eval_y<S: Scalar>(
    triple: &CrystalTriple,
    gamma: &CrystalElement,
    v: &VCollection<S>,
    s: usize,
) -> Result<Mat<S>, MultiIdxError> {
    GradedOps::<S>::new(triple, None, s).eval_y(gamma, v, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{catalog_group, CrystalTriple, Lattice};
    use crate::linalg::rational;

    fn q(rows: &[&[i64]]) -> Mat<Rational> {
        Mat::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&v| rational(v, 1)).collect())
                .collect(),
        )
        .unwrap()
    }

    fn qv(xs: &[i64]) -> Vec<Rational> {
        xs.iter().map(|&x| rational(x, 1)).collect()
    }

    #[test]
    fn degree_counts_and_order() {
        assert_eq!(enumerate_degree(2, 3).len(), 4);
        assert_eq!(enumerate_degree(1, 7).len(), 1);
        assert_eq!(enumerate_degree(3, 2).len(), 6);
        let b = enumerate_degree(2, 2);
        let exps: Vec<Vec<u32>> = b.indices().iter().map(|a| a.0.clone()).collect();
        assert_eq!(exps, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(graded_dim(3, 4), 15);
    }

    #[test]
    fn monomial_values() {
        assert_eq!(eval_x(0, &qv(&[5, -2])), qv(&[1]));
        assert_eq!(eval_x(1, &qv(&[5, -2])), qv(&[5, -2]));
        assert_eq!(eval_x(2, &qv(&[2, 3])), qv(&[4, 6, 9]));
    }

    #[test]
    fn symmetric_power_examples() {
        let two = q(&[&[2, 0], &[0, 2]]);
        assert_eq!(build_a_s(&two, 2), Mat::identity(3).scale(&rational(4, 1)));
        let shear = q(&[&[1, 1], &[0, 1]]);
        assert_eq!(build_a_s(&shear, 1), shear);
        assert_eq!(
            build_a_s(&shear, 2),
            q(&[&[1, 2, 1], &[0, 1, 1], &[0, 0, 1]])
        );
        assert_eq!(build_a_s(&shear, 0), Mat::identity(1));
    }

    #[test]
    fn shifted_monomial_blocks() {
        let y = qv(&[3, -1]);
        assert_eq!(build_q_st(&y, 2, 2).unwrap(), Mat::identity(3));
        let top = build_q_st(&y, 2, 0).unwrap();
        assert_eq!(top.col(0), eval_x(2, &y));
        let one_d = build_q_st(&qv(&[5]), 2, 1).unwrap();
        assert_eq!(one_d, q(&[&[-10]]));
        assert_eq!(
            build_q_st(&y, 1, 2).unwrap_err(),
            MultiIdxError::DegreeOrder { s: 1, t: 2 }
        );
    }

    #[test]
    fn q_tilde_examples() {
        let t = catalog_group("pm", 2).unwrap();
        let tau = CrystalElement::translation(vec![2, -1]);
        assert_eq!(
            build_q_tilde(&t, &tau, 2, 1).unwrap(),
            build_q_st(&qv(&[2, -1]), 2, 1).unwrap()
        );
        let flip = CrystalElement::new(1, vec![0, 0]);
        assert!(build_q_tilde(&t, &flip, 3, 1).unwrap().is_zero());
        let s_inv = t.group().element(t.group().inverse(1));
        assert_eq!(build_q_tilde(&t, &flip, 2, 2).unwrap(), build_a_s(s_inv, 2));
    }

    #[test]
    fn y_examples() {
        let t = CrystalTriple::translations(Lattice::standard(1));
        let v = VCollection::new(1, 1, vec![q(&[&[1]]), q(&[&[0]])]).unwrap();
        let tau = CrystalElement::translation(vec![1]);
        assert_eq!(eval_y(&t, &tau, &v, 0).unwrap(), q(&[&[1]]));
        assert_eq!(eval_y(&t, &tau, &v, 1).unwrap(), q(&[&[-1]]));
        assert_eq!(eval_y(&t, &t.identity(), &v, 1).unwrap(), q(&[&[0]]));
        assert!(eval_y(&t, &tau, &v, 2).is_err());
    }

    #[test]
    fn flat_round_trip() {
        let v = VCollection::new(
            2,
            2,
            vec![
                q(&[&[1, 2]]),
                q(&[&[3, 4], &[5, 6]]),
                q(&[&[7, 8], &[9, 10], &[11, 12]]),
            ],
        )
        .unwrap();
        let flat = v.flatten();
        assert_eq!(VCollection::from_flat(2, 2, 3, &flat), v);
    }
}
