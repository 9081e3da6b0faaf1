//! Splitting crystal groups `Γ = G ⋉ Λ`.
//!
//! Lattice points are carried as integer coordinates `k` relative to the
//! lattice basis `R`; the true translation vector is `R·k`. An element
//! `(g, k)` acts as `x ↦ g(x + R·k)`, so composition reads
//! `(g_j, l)·(g_i, k) = (g_j g_i, k + g_i⁻¹(l))`.

mod catalog;
mod dilation;

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{Mat, Rational};

pub use catalog::{catalog_elements, catalog_group, catalog_names, generate_group};
pub use dilation::{quotient_representatives, Dilation, EXPANSIVE_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrystalError {
    #[error("lattice basis must be a square invertible matrix")]
    SingularLattice,
    #[error("point group element {0} has the wrong dimension")]
    Dimension(usize),
    #[error("point group element {0} is not orthogonal")]
    NonOrthogonal(usize),
    #[error("point group element {0} does not preserve the lattice")]
    LatticeNotPreserved(usize),
    #[error("point group must list the identity first")]
    IdentityNotFirst,
    #[error("point group element {0} is listed twice")]
    Duplicate(usize),
    #[error("point group not closed: {0}")]
    NotClosed(String),
    #[error("point group generation exceeded {0} elements")]
    GroupTooLarge(usize),
    #[error("unknown catalog group '{name}' in dimension {dim}")]
    UnknownCatalog { name: String, dim: usize },
    #[error("element does not belong to this triple: {0}")]
    ForeignElement(String),
    #[error("dilation is not expansive (smallest eigenvalue modulus {0})")]
    NotExpansive(f64),
    #[error("dilation does not map the lattice into itself")]
    NonIntegerLattice,
    #[error("conjugate of point element {0} by the dilation leaves the point group")]
    ConjugateLeavesGroup(usize),
    #[error("dilation has the wrong shape or is singular")]
    BadDilation,
}

/// Element `(g, k)` of a splitting crystal group.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CrystalElement {
    pub g: usize,
    pub k: Vec<i64>,
}

impl CrystalElement {
    pub fn new(g: usize, k: Vec<i64>) -> Self {
        Self { g, k }
    }

    pub fn translation(k: Vec<i64>) -> Self {
        Self { g: 0, k }
    }

    pub fn is_translation(&self) -> bool {
        self.g == 0
    }
}

/// `ℒ = R·ℤ^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    basis: Mat<Rational>,
    inverse: Mat<Rational>,
}

impl Lattice {
    pub fn new(basis: Mat<Rational>) -> Result<Self, CrystalError> {
        if !basis.is_square() {
            return Err(CrystalError::SingularLattice);
        }
        let inverse = basis.inverse().ok_or(CrystalError::SingularLattice)?;
        Ok(Self { basis, inverse })
    }

    pub fn standard(dim: usize) -> Self {
        Self::new(Mat::identity(dim)).expect("identity basis")
    }

    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn basis(&self) -> &Mat<Rational> {
        &self.basis
    }

    pub fn inverse(&self) -> &Mat<Rational> {
        &self.inverse
    }

    pub fn covolume(&self) -> Rational {
        self.basis.determinant().expect("square").abs()
    }

    /// Translation vector `R·k`.
    pub fn point(&self, k: &[i64]) -> Vec<Rational> {
        let kq: Vec<Rational> = k
            .iter()
            .map(|&x| Rational::from_integer(x.into()))
            .collect();
        self.basis.mul_vec(&kq)
    }

    /// Expresses `R⁻¹ B R` as an integer matrix, if it is one.
    pub fn integer_form(&self, b: &Mat<Rational>) -> Option<Mat<i64>> {
        let conj = &(&self.inverse * b) * &self.basis;
        to_int_matrix(&conj)
    }
}

pub(crate) fn to_int_matrix(m: &Mat<Rational>) -> Option<Mat<i64>> {
    let mut out = Vec::with_capacity(m.rows() * m.cols());
    for x in m.as_slice() {
        if !x.is_integer() {
            return None;
        }
        out.push(x.to_integer().to_i64()?);
    }
    Mat::new(m.rows(), m.cols(), out).ok()
}

pub(crate) fn to_f64_matrix(m: &Mat<Rational>) -> Mat<f64> {
    m.map(|x| x.to_f64().unwrap_or(f64::NAN))
}

pub(crate) fn int_apply(m: &Mat<i64>, k: &[i64]) -> Vec<i64> {
    (0..m.rows())
        .map(|i| m.row(i).iter().zip(k).map(|(a, b)| a * b).sum())
        .collect()
}

pub(crate) fn int_to_big(m: &Mat<i64>) -> Mat<BigInt> {
    m.map(|&x| BigInt::from(x))
}

/// Finite orthogonal group preserving the lattice, with `g₀ = Id`.
#[derive(Clone, Debug)]
pub struct PointGroup {
    elements: Vec<Mat<Rational>>,
    int_forms: Vec<Mat<i64>>,
    products: Vec<Vec<usize>>,
    inverses: Vec<usize>,
}

impl PointGroup {
    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn element(&self, i: usize) -> &Mat<Rational> {
        &self.elements[i]
    }

    pub fn elements(&self) -> &[Mat<Rational>] {
        &self.elements
    }

    /// `R⁻¹ g_i R`.
    pub fn int_form(&self, i: usize) -> &Mat<i64> {
        &self.int_forms[i]
    }

    /// Index of `g_i g_j`.
    pub fn product(&self, i: usize, j: usize) -> usize {
        self.products[i][j]
    }

    pub fn inverse(&self, i: usize) -> usize {
        self.inverses[i]
    }

    pub fn index_of(&self, m: &Mat<Rational>) -> Option<usize> {
        self.elements.iter().position(|g| g == m)
    }
}

/// A validated splitting crystal triple `(Γ, G, Λ)`.
#[derive(Clone, Debug)]
pub struct CrystalTriple {
    lattice: Lattice,
    group: PointGroup,
    volume: Rational,
    basis_f64: Mat<f64>,
    elements_f64: Vec<Mat<f64>>,
}

/// Checks the point group against the lattice and builds its tables.
pub fn validate_triple(
    lattice: Lattice,
    elements: Vec<Mat<Rational>>,
) -> Result<CrystalTriple, CrystalError> {
    let d = lattice.dim();
    let id = Mat::<Rational>::identity(d);
    if elements.first() != Some(&id) {
        return Err(CrystalError::IdentityNotFirst);
    }
    let mut int_forms = Vec::with_capacity(elements.len());
    for (i, g) in elements.iter().enumerate() {
        if g.rows() != d || g.cols() != d {
            return Err(CrystalError::Dimension(i));
        }
        if &g.transpose() * g != id {
            return Err(CrystalError::NonOrthogonal(i));
        }
        if elements[..i].contains(g) {
            return Err(CrystalError::Duplicate(i));
        }
        let form = lattice
            .integer_form(g)
            .ok_or(CrystalError::LatticeNotPreserved(i))?;
        // the inverse must map the lattice into itself as well
        if lattice.integer_form(&g.transpose()).is_none() {
            return Err(CrystalError::LatticeNotPreserved(i));
        }
        int_forms.push(form);
    }
    let index: HashMap<&Mat<Rational>, usize> =
        elements.iter().enumerate().map(|(i, g)| (g, i)).collect();
    let r = elements.len();
    let mut products = vec![vec![0; r]; r];
    for i in 0..r {
        for j in 0..r {
            let prod = &elements[i] * &elements[j];
            products[i][j] = *index
                .get(&prod)
                .ok_or_else(|| CrystalError::NotClosed(format!("g{i}·g{j} is missing")))?;
        }
    }
    let mut inverses = vec![0; r];
    for i in 0..r {
        inverses[i] = (0..r)
            .find(|&j| products[i][j] == 0)
            .ok_or_else(|| CrystalError::NotClosed(format!("g{i} has no inverse")))?;
    }
    let volume = lattice.covolume() / Rational::from_integer(BigInt::from(r));
    let basis_f64 = to_f64_matrix(lattice.basis());
    let elements_f64 = elements.iter().map(to_f64_matrix).collect();
    Ok(CrystalTriple {
        basis_f64,
        elements_f64,
        lattice,
        group: PointGroup {
            elements,
            int_forms,
            products,
            inverses,
        },
        volume,
    })
}

impl CrystalTriple {
    /// Translation-only triple on the same lattice.
    pub fn translations(lattice: Lattice) -> Self {
        let d = lattice.dim();
        validate_triple(lattice, vec![Mat::identity(d)]).expect("trivial group is valid")
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn group(&self) -> &PointGroup {
        &self.group
    }

    pub fn order(&self) -> usize {
        self.group.order()
    }

    /// Volume of a fundamental domain, `|det R| / |G|`.
    pub fn volume(&self) -> &Rational {
        &self.volume
    }

    pub fn identity(&self) -> CrystalElement {
        CrystalElement::translation(vec![0; self.dim()])
    }

    pub fn contains(&self, gamma: &CrystalElement) -> bool {
        gamma.g < self.order() && gamma.k.len() == self.dim()
    }

    pub fn check(&self, gamma: &CrystalElement) -> Result<(), CrystalError> {
        if self.contains(gamma) {
            Ok(())
        } else {
            Err(CrystalError::ForeignElement(format!("{gamma:?}")))
        }
    }

    /// `outer ∘ inner`.
    pub fn compose(&self, outer: &CrystalElement, inner: &CrystalElement) -> CrystalElement {
        let g_inv = self.group.int_form(self.group.inverse(inner.g));
        let shifted = int_apply(g_inv, &outer.k);
        CrystalElement {
            g: self.group.product(outer.g, inner.g),
            k: inner.k.iter().zip(&shifted).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn checked_compose(
        &self,
        outer: &CrystalElement,
        inner: &CrystalElement,
    ) -> Result<CrystalElement, CrystalError> {
        self.check(outer)?;
        self.check(inner)?;
        Ok(self.compose(outer, inner))
    }

    /// `(g, k)⁻¹ = (g⁻¹, −g(k))`.
    pub fn inverse(&self, gamma: &CrystalElement) -> CrystalElement {
        let moved = int_apply(self.group.int_form(gamma.g), &gamma.k);
        CrystalElement {
            g: self.group.inverse(gamma.g),
            k: moved.into_iter().map(|x| -x).collect(),
        }
    }

    /// `γ(x) = g(x + R·k)` on rational points.
    pub fn apply(&self, gamma: &CrystalElement, x: &[Rational]) -> Vec<Rational> {
        let shift = self.lattice.point(&gamma.k);
        let moved: Vec<Rational> = x.iter().zip(&shift).map(|(a, b)| a + b).collect();
        self.group.element(gamma.g).mul_vec(&moved)
    }

    /// Float version of [`apply`](Self::apply), for cascade sampling.
    pub fn apply_f64(&self, gamma: &CrystalElement, x: &[f64]) -> Vec<f64> {
        let r = &self.basis_f64;
        let g = &self.elements_f64[gamma.g];
        let d = self.dim();
        let moved: Vec<f64> = (0..d)
            .map(|i| x[i] + (0..d).map(|j| r[(i, j)] * gamma.k[j] as f64).sum::<f64>())
            .collect();
        (0..d)
            .map(|i| (0..d).map(|j| g[(i, j)] * moved[j]).sum())
            .collect()
    }

    pub fn basis_f64(&self) -> &Mat<f64> {
        &self.basis_f64
    }

    pub fn element_f64(&self, i: usize) -> &Mat<f64> {
        &self.elements_f64[i]
    }

    /// All elements `(g, k)` with `‖k‖_∞ ≤ radius`.
    pub fn ball(&self, radius: i64) -> Vec<CrystalElement> {
        let d = self.dim();
        let mut points = vec![Vec::new()];
        for _ in 0..d {
            points = points
                .into_iter()
                .flat_map(|p: Vec<i64>| {
                    (-radius..=radius).map(move |c| {
                        let mut q = p.clone();
                        q.push(c);
                        q
                    })
                })
                .collect();
        }
        (0..self.order())
            .flat_map(|g| {
                points
                    .iter()
                    .map(move |k| CrystalElement::new(g, k.clone()))
            })
            .collect()
    }
}
