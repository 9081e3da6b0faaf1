//! Refinement masks `γ ↦ d_γ` and the (Γ, A)-symmetry correspondence
//! between scalar crystal masks and matrix lattice masks.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::crystal::{int_apply, CrystalElement, CrystalTriple, Dilation};
use crate::linalg::{Mat, Rational, Scalar};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MaskError {
    #[error("mask multiplicity must be positive")]
    ZeroMultiplicity,
    #[error("coefficient at {element} is {rows}x{cols}, expected {r}x{r}")]
    CoefficientShape {
        element: String,
        rows: usize,
        cols: usize,
        r: usize,
    },
    #[error("element {0} appears twice")]
    Duplicate(String),
    #[error("element {0} does not belong to the triple")]
    ForeignElement(String),
    #[error("expected multiplicity {expected}, got {got}")]
    Multiplicity { expected: usize, got: usize },
    #[error("matrix masks must live on the translation subgroup")]
    NotTranslation,
}

/// Finitely supported coefficients, stored in canonical order (point index,
/// then lexicographic on `k`). Exact zeros are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask<S> {
    dim: usize,
    r: usize,
    coefficients: BTreeMap<CrystalElement, Mat<S>>,
}

impl<S: Scalar> Mask<S> {
    pub fn new(
        dim: usize,
        r: usize,
        entries: impl IntoIterator<Item = (CrystalElement, Mat<S>)>,
    ) -> Result<Self, MaskError> {
        if r == 0 {
            return Err(MaskError::ZeroMultiplicity);
        }
        let mut coefficients = BTreeMap::new();
        for (gamma, c) in entries {
            if gamma.k.len() != dim {
                return Err(MaskError::ForeignElement(format!("{gamma:?}")));
            }
            if c.rows() != r || c.cols() != r {
                return Err(MaskError::CoefficientShape {
                    element: format!("{gamma:?}"),
                    rows: c.rows(),
                    cols: c.cols(),
                    r,
                });
            }
            if coefficients.contains_key(&gamma) {
                return Err(MaskError::Duplicate(format!("{gamma:?}")));
            }
            if !c.is_zero() {
                coefficients.insert(gamma, c);
            }
        }
        Ok(Self {
            dim,
            r,
            coefficients,
        })
    }

    /// Scalar mask from `(element, coefficient)` pairs.
    pub fn scalar(
        dim: usize,
        entries: impl IntoIterator<Item = (CrystalElement, S)>,
    ) -> Result<Self, MaskError> {
        Self::new(
            dim,
            1,
            entries
                .into_iter()
                .map(|(g, c)| (g, Mat::from_fn(1, 1, |_, _| c.clone()))),
        )
    }

    /// Scalar mask over the translation subgroup from consecutive coefficients
    /// at `τ_0, τ_1, …` in one dimension.
    pub fn from_1d(coefs: &[S]) -> Self {
        Self::scalar(
            1,
            coefs
                .iter()
                .enumerate()
                .map(|(k, c)| (CrystalElement::translation(vec![k as i64]), c.clone())),
        )
        .expect("well-formed 1d mask")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = &CrystalElement> {
        self.coefficients.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CrystalElement, &Mat<S>)> {
        self.coefficients.iter()
    }

    pub fn get(&self, gamma: &CrystalElement) -> Option<&Mat<S>> {
        self.coefficients.get(gamma)
    }

    /// Stored matrix, or zero off the support.
    pub fn coefficient(&self, gamma: &CrystalElement) -> Mat<S> {
        self.get(gamma)
            .cloned()
            .unwrap_or_else(|| Mat::zeros(self.r, self.r))
    }

    /// `Σ_γ d_γ`.
    pub fn total(&self) -> Mat<S> {
        self.coefficients
            .values()
            .fold(Mat::zeros(self.r, self.r), |acc, c| &acc + c)
    }

    pub fn check_triple(&self, triple: &CrystalTriple) -> Result<(), MaskError> {
        if triple.dim() != self.dim {
            return Err(MaskError::ForeignElement(format!(
                "mask of dimension {} on a {}-dimensional triple",
                self.dim,
                triple.dim()
            )));
        }
        match self.support().find(|g| !triple.contains(g)) {
            Some(g) => Err(MaskError::ForeignElement(format!("{g:?}"))),
            None => Ok(()),
        }
    }

    pub fn convert<U: Scalar>(&self, f: impl Fn(&S) -> U) -> Mask<U> {
        Mask {
            dim: self.dim,
            r: self.r,
            coefficients: self
                .coefficients
                .iter()
                .map(|(g, c)| (g.clone(), c.convert(&f)))
                .collect(),
        }
    }

    pub fn scale(&self, c: &S) -> Self {
        Mask::new(
            self.dim,
            self.r,
            self.coefficients
                .iter()
                .map(|(g, m)| (g.clone(), m.scale(c))),
        )
        .expect("scaling keeps shapes")
    }

    /// Largest `‖k‖_∞` over the support.
    pub fn radius(&self) -> i64 {
        self.support()
            .flat_map(|g| g.k.iter().map(|x| x.abs()))
            .max()
            .unwrap_or(0)
    }
}

/// `L_{γ,σ} = d_{AγA⁻¹σ⁻¹}`.
pub fn transfer_entry<S: Scalar>(
    mask: &Mask<S>,
    triple: &CrystalTriple,
    dilation: &Dilation,
    gamma: &CrystalElement,
    sigma: &CrystalElement,
) -> Mat<S> {
    let index = triple.compose(&dilation.conj(gamma), &triple.inverse(sigma));
    mask.coefficient(&index)
}

/// Columns `σ` where row `γ` of the transfer matrix can be nonzero:
/// `σ = α⁻¹·AγA⁻¹` for `α` in the support.
pub fn transfer_row_support<S: Scalar>(
    mask: &Mask<S>,
    triple: &CrystalTriple,
    dilation: &Dilation,
    gamma: &CrystalElement,
) -> Vec<CrystalElement> {
    let conj = dilation.conj(gamma);
    mask.support()
        .map(|alpha| triple.compose(&triple.inverse(alpha), &conj))
        .collect()
}

/// Permutations tying a scalar Γ-mask to its matrix Λ-mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymmetryData {
    pub h: Vec<usize>,
    pub rho: Vec<Vec<usize>>,
    pub order: usize,
}

impl SymmetryData {
    pub fn new(dilation: &Dilation) -> Self {
        Self {
            h: dilation.h().to_vec(),
            rho: dilation.rho().to_vec(),
            order: dilation.h().len(),
        }
    }
}

/// `c̃^k_{ij} = c_{(g_{h_i}⁻¹ g_j, g_j⁻¹(k))}`, a mask over the translation
/// subgroup with multiplicity `|G|`.
pub fn lift_scalar_to_matrix<S: Scalar>(
    mask: &Mask<S>,
    triple: &CrystalTriple,
    dilation: &Dilation,
) -> Result<Mask<S>, MaskError> {
    if mask.r() != 1 {
        return Err(MaskError::Multiplicity {
            expected: 1,
            got: mask.r(),
        });
    }
    mask.check_triple(triple)?;
    let group = triple.group();
    let r = group.order();
    let h = dilation.h();
    let ks: BTreeSet<Vec<i64>> = mask
        .support()
        .flat_map(|gamma| (0..r).map(move |j| int_apply(group.int_form(j), &gamma.k)))
        .collect();
    let entries = ks.into_iter().map(|k| {
        let c = Mat::from_fn(r, r, |i, j| {
            let g = group.product(group.inverse(h[i]), j);
            let l = int_apply(group.int_form(group.inverse(j)), &k);
            mask.coefficient(&CrystalElement::new(g, l))[(0, 0)].clone()
        });
        (CrystalElement::translation(k), c)
    });
    Mask::new(triple.dim(), r, entries)
}

/// `c_{(g_i, l)} = c̃^{g_i(l)}_{0,i}`.
pub fn extract_scalar<S: Scalar>(
    matrix_mask: &Mask<S>,
    triple: &CrystalTriple,
) -> Result<Mask<S>, MaskError> {
    let group = triple.group();
    let r = group.order();
    if matrix_mask.r() != r {
        return Err(MaskError::Multiplicity {
            expected: r,
            got: matrix_mask.r(),
        });
    }
    if matrix_mask.support().any(|g| !g.is_translation()) {
        return Err(MaskError::NotTranslation);
    }
    let entries: Vec<(CrystalElement, S)> = matrix_mask
        .iter()
        .flat_map(|(tau, c)| {
            (0..r).map(move |i| {
                let l = int_apply(group.int_form(group.inverse(i)), &tau.k);
                (CrystalElement::new(i, l), c[(0, i)].clone())
            })
        })
        .collect();
    Mask::scalar(triple.dim(), entries)
}

/// `c^k_{ij} = c^{g_{h_i}⁻¹(k)}_{0,ρ_i(j)}` at every stored `k` and its
/// point-group images.
pub fn check_gamma_a_symmetry<S: Scalar>(
    matrix_mask: &Mask<S>,
    triple: &CrystalTriple,
    dilation: &Dilation,
) -> Result<bool, MaskError> {
    let group = triple.group();
    let sym = SymmetryData::new(dilation);
    if matrix_mask.r() != sym.order {
        return Err(MaskError::Multiplicity {
            expected: sym.order,
            got: matrix_mask.r(),
        });
    }
    if matrix_mask.support().any(|g| !g.is_translation()) {
        return Err(MaskError::NotTranslation);
    }
    let ks: BTreeSet<Vec<i64>> = matrix_mask
        .support()
        .flat_map(|tau| (0..sym.order).map(move |g| int_apply(group.int_form(g), &tau.k)))
        .collect();
    for k in ks {
        let here = matrix_mask.coefficient(&CrystalElement::translation(k.clone()));
        for i in 0..sym.order {
            let moved = int_apply(group.int_form(group.inverse(sym.h[i])), &k);
            let there = matrix_mask.coefficient(&CrystalElement::translation(moved));
            for j in 0..sym.order {
                if here[(i, j)] != there[(0, sym.rho[i][j])] {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// `Σ_γ |c_γ|² < m`, exact for exact backends.
pub fn l2_budget<S: Scalar>(mask: &Mask<S>, m: usize) -> bool {
    let total = mask
        .iter()
        .flat_map(|(_, c)| c.as_slice().iter().map(|x| x.norm_sqr()))
        .fold(S::zero(), |acc, x| acc + x);
    match total.real_rational() {
        Some(q) => q < Rational::from_integer(m.into()),
        None => total.modulus() < m as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{catalog_group, Lattice};
    use crate::linalg::{exact, rational, Exact};

    fn tau(k: i64) -> CrystalElement {
        CrystalElement::translation(vec![k])
    }

    fn two() -> Mat<Rational> {
        Mat::from_rows(vec![vec![rational(2, 1)]]).unwrap()
    }

    fn hat() -> Mask<Exact> {
        Mask::from_1d(&[exact(1, 2), exact(1, 1), exact(1, 2)])
    }

    #[test]
    fn coefficient_lookup() {
        let m = hat();
        assert_eq!(
            m.coefficient(&tau(1)),
            Mat::from_fn(1, 1, |_, _| exact(1, 1))
        );
        assert!(m.coefficient(&tau(5)).is_zero());
        let t = CrystalTriple::translations(Lattice::standard(1));
        // d_{γ⁻¹} summed over γ ∈ {τ₀, τ₋₂} gives c₀ + c₂
        let even: Exact = [tau(0), tau(-2)]
            .iter()
            .map(|g| m.coefficient(&t.inverse(g))[(0, 0)].clone())
            .fold(exact(0, 1), |a, b| a + b);
        assert_eq!(even, exact(1, 1));
    }

    #[test]
    fn zeros_are_dropped_and_duplicates_rejected() {
        let m = Mask::from_1d(&[exact(1, 1), exact(0, 1), exact(1, 1)]);
        assert_eq!(m.len(), 2);
        let dup = Mask::scalar(1, vec![(tau(0), exact(1, 1)), (tau(0), exact(2, 1))]);
        assert!(matches!(dup, Err(MaskError::Duplicate(_))));
    }

    #[test]
    fn haar_transfer_entries() {
        let t = CrystalTriple::translations(Lattice::standard(1));
        let dil = Dilation::new(two(), &t).unwrap();
        let haar = Mask::from_1d(&[exact(1, 1), exact(1, 1)]);
        assert!(transfer_entry(&haar, &t, &dil, &tau(0), &tau(1)).is_zero());
        assert_eq!(
            transfer_entry(&haar, &t, &dil, &tau(0), &tau(0)),
            Mat::identity(1)
        );
        assert_eq!(
            transfer_entry(&haar, &t, &dil, &t.identity(), &t.identity()),
            haar.coefficient(&t.identity())
        );
    }

    #[test]
    fn transfer_row_support_is_local() {
        let t = catalog_group("pm", 2).unwrap();
        let a = Mat::from_rows(vec![
            vec![rational(2, 1), rational(0, 1)],
            vec![rational(0, 1), rational(2, 1)],
        ])
        .unwrap();
        let dil = Dilation::new(a, &t).unwrap();
        let mask = Mask::scalar(
            2,
            vec![
                (CrystalElement::new(0, vec![0, 0]), exact(1, 1)),
                (CrystalElement::new(1, vec![1, 0]), exact(2, 1)),
                (CrystalElement::new(1, vec![0, 1]), exact(1, 1)),
            ],
        )
        .unwrap();
        let gamma = CrystalElement::new(1, vec![1, -1]);
        let predicted: BTreeSet<_> = transfer_row_support(&mask, &t, &dil, &gamma)
            .into_iter()
            .collect();
        for sigma in t.ball(4) {
            let nonzero = !transfer_entry(&mask, &t, &dil, &gamma, &sigma).is_zero();
            assert_eq!(nonzero, predicted.contains(&sigma), "{sigma:?}");
        }
    }

    #[test]
    fn p1m_lift_example() {
        let t = catalog_group("p1m", 1).unwrap();
        let dil = Dilation::new(two(), &t).unwrap();
        let mask = Mask::scalar(
            1,
            vec![
                (CrystalElement::new(0, vec![0]), exact(1, 1)),
                (CrystalElement::new(1, vec![2]), exact(3, 4)),
                (CrystalElement::new(0, vec![-1]), exact(-1, 5)),
            ],
        )
        .unwrap();
        let lifted = lift_scalar_to_matrix(&mask, &t, &dil).unwrap();
        assert_eq!(lifted.r(), 2);
        assert_eq!(lifted.coefficient(&tau(0))[(0, 0)], exact(1, 1));
        assert!(check_gamma_a_symmetry(&lifted, &t, &dil).unwrap());
        assert_eq!(extract_scalar(&lifted, &t).unwrap(), mask);
    }

    #[test]
    fn trivial_group_lift_is_identity() {
        let t = CrystalTriple::translations(Lattice::standard(1));
        let dil = Dilation::new(two(), &t).unwrap();
        let lifted = lift_scalar_to_matrix(&hat(), &t, &dil).unwrap();
        assert_eq!(lifted, hat());
        assert_eq!(extract_scalar(&hat(), &t).unwrap(), hat());
        assert!(check_gamma_a_symmetry(&hat(), &t, &dil).unwrap());
    }

    #[test]
    fn perturbed_lift_breaks_symmetry() {
        let t = catalog_group("pm", 2).unwrap();
        let a = Mat::from_rows(vec![
            vec![rational(2, 1), rational(0, 1)],
            vec![rational(0, 1), rational(2, 1)],
        ])
        .unwrap();
        let dil = Dilation::new(a, &t).unwrap();
        let mask = Mask::scalar(
            2,
            vec![
                (CrystalElement::new(0, vec![0, 0]), exact(1, 1)),
                (CrystalElement::new(1, vec![1, 1]), exact(1, 2)),
            ],
        )
        .unwrap();
        let lifted = lift_scalar_to_matrix(&mask, &t, &dil).unwrap();
        assert!(check_gamma_a_symmetry(&lifted, &t, &dil).unwrap());
        let mut entries: Vec<_> = lifted.iter().map(|(g, c)| (g.clone(), c.clone())).collect();
        entries[0].1[(1, 1)] = entries[0].1[(1, 1)].clone() + exact(1, 7);
        let broken = Mask::new(2, 2, entries).unwrap();
        assert!(!check_gamma_a_symmetry(&broken, &t, &dil).unwrap());
        assert!(matches!(
            lift_scalar_to_matrix(&lifted, &t, &dil),
            Err(MaskError::Multiplicity {
                expected: 1,
                got: 2
            })
        ));
    }

    #[test]
    fn l2_budget_examples() {
        assert!(!l2_budget(&Mask::from_1d(&[exact(1, 1), exact(1, 1)]), 2));
        assert!(l2_budget(&hat(), 2));
        assert!(l2_budget(&Mask::<Exact>::from_1d(&[]), 2));
    }
}
