use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};

use super::{
    int_apply, int_to_big, to_f64_matrix, to_int_matrix, CrystalElement, CrystalError,
    CrystalTriple,
};
use crate::linalg::{smith_normal_form, Mat, Rational, SmithForm};

/// Eigenvalue moduli must exceed `1 + EXPANSIVE_TOL`.
pub const EXPANSIVE_TOL: f64 = 1e-9;

/// A Γ-admissible expanding dilation together with its coset data.
#[derive(Clone, Debug)]
pub struct Dilation {
    a: Mat<Rational>,
    a_inv: Mat<Rational>,
    m: usize,
    lattice_map: Mat<i64>,
    lattice_map_inv: Mat<Rational>,
    smith: SmithForm,
    moduli: Vec<i64>,
    residue_index: HashMap<Vec<i64>, usize>,
    digits: Vec<CrystalElement>,
    h: Vec<usize>,
    h_inv: Vec<usize>,
    rho: Vec<Vec<usize>>,
    min_eigen_modulus: f64,
    contraction_norm: f64,
}

impl Dilation {
    /// Validates `A` against the triple: expansive, `R⁻¹AR` integral and
    /// `A G A⁻¹ = G`.
    pub fn new(a: Mat<Rational>, triple: &CrystalTriple) -> Result<Self, CrystalError> {
        let d = triple.dim();
        if a.rows() != d || a.cols() != d {
            return Err(CrystalError::BadDilation);
        }
        let a_inv = a.inverse().ok_or(CrystalError::BadDilation)?;

        let af = to_f64_matrix(&a);
        let eig = nalgebra::DMatrix::from_fn(d, d, |i, j| af[(i, j)]).complex_eigenvalues();
        let min_eigen_modulus = eig.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        if min_eigen_modulus <= 1.0 + EXPANSIVE_TOL {
            return Err(CrystalError::NotExpansive(min_eigen_modulus));
        }
        let contraction_norm = inverse_power_norm(&to_f64_matrix(&a_inv), 64);

        let lattice = triple.lattice();
        let lattice_map = lattice
            .integer_form(&a)
            .ok_or(CrystalError::NonIntegerLattice)?;
        let lattice_map_inv = lattice.inverse() * &(&a_inv * lattice.basis());

        let group = triple.group();
        let mut h = Vec::with_capacity(group.order());
        for i in 0..group.order() {
            let conj = &(&a * group.element(i)) * &a_inv;
            h.push(
                group
                    .index_of(&conj)
                    .ok_or(CrystalError::ConjugateLeavesGroup(i))?,
            );
        }
        let mut h_inv = vec![0; h.len()];
        for (i, &hi) in h.iter().enumerate() {
            h_inv[hi] = i;
        }
        let rho = (0..group.order())
            .map(|i| {
                (0..group.order())
                    .map(|j| group.product(group.inverse(h[i]), j))
                    .collect()
            })
            .collect();

        let smith =
            smith_normal_form(&int_to_big(&lattice_map)).map_err(|_| CrystalError::BadDilation)?;
        let moduli: Vec<i64> = smith
            .diagonal()
            .iter()
            .map(|x| x.to_i64().expect("small modulus"))
            .collect();
        let m = moduli.iter().product::<i64>() as usize;
        let reps = representatives_from_smith(&smith, &moduli);
        let u = smith.u.map(|x| x.to_i64().expect("small transform"));
        let mut residue_index = HashMap::with_capacity(m);
        for (i, rep) in reps.iter().enumerate() {
            residue_index.insert(residue(&u, &moduli, rep), i);
        }
        let digits = reps.into_iter().map(CrystalElement::translation).collect();

        Ok(Self {
            a,
            a_inv,
            m,
            lattice_map,
            lattice_map_inv,
            smith,
            moduli,
            residue_index,
            digits,
            h,
            h_inv,
            rho,
            min_eigen_modulus,
            contraction_norm,
        })
    }

    pub fn matrix(&self) -> &Mat<Rational> {
        &self.a
    }

    pub fn inverse_matrix(&self) -> &Mat<Rational> {
        &self.a_inv
    }

    /// `m = |det A|`, the number of cosets of `AΓA⁻¹` in `Γ`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// `M = R⁻¹ A R`.
    pub fn lattice_map(&self) -> &Mat<i64> {
        &self.lattice_map
    }

    pub fn smith(&self) -> &SmithForm {
        &self.smith
    }

    pub fn digits(&self) -> &[CrystalElement] {
        &self.digits
    }

    /// `g_{h(i)} = A g_i A⁻¹`.
    pub fn h(&self) -> &[usize] {
        &self.h
    }

    /// `g_{ρ_i(j)} = g_{h(i)}⁻¹ g_j`.
    pub fn rho(&self) -> &[Vec<usize>] {
        &self.rho
    }

    pub fn min_eigen_modulus(&self) -> f64 {
        self.min_eigen_modulus
    }

    /// Spectral norm of `A⁻⁶⁴`, recorded as a contraction diagnostic.
    pub fn contraction_norm(&self) -> f64 {
        self.contraction_norm
    }

    /// Class of a lattice vector in `ℤ^d / Mℤ^d`.
    pub fn lattice_coset(&self, w: &[i64]) -> usize {
        let u = self.smith.u.map(|x| x.to_i64().expect("small transform"));
        self.residue_index[&residue(&u, &self.moduli, w)]
    }

    /// Unique `i` with `γ_i⁻¹ γ ∈ AΓA⁻¹`.
    ///
    /// Digits are pure translations and `g` preserves `AΛ`, so the class is
    /// that of `g(k)` modulo `Mℤ^d`.
    pub fn coset_index(&self, gamma: &CrystalElement, triple: &CrystalTriple) -> usize {
        let moved = int_apply(triple.group().int_form(gamma.g), &gamma.k);
        self.lattice_coset(&moved)
    }

    /// `AγA⁻¹ = (A g A⁻¹, M k)`.
    pub fn conj(&self, gamma: &CrystalElement) -> CrystalElement {
        CrystalElement {
            g: self.h[gamma.g],
            k: int_apply(&self.lattice_map, &gamma.k),
        }
    }

    /// `A⁻¹γA` when it lies in Γ, i.e. when `γ ∈ AΓA⁻¹`.
    pub fn deconj(&self, gamma: &CrystalElement) -> Option<CrystalElement> {
        let kq: Vec<Rational> = gamma
            .k
            .iter()
            .map(|&x| Rational::from_integer(BigInt::from(x)))
            .collect();
        let pre = self.lattice_map_inv.mul_vec(&kq);
        let k = pre
            .iter()
            .map(|x| {
                if x.is_integer() {
                    x.to_integer().to_i64()
                } else {
                    None
                }
            })
            .collect::<Option<Vec<i64>>>()?;
        Some(CrystalElement {
            g: self.h_inv[gamma.g],
            k,
        })
    }

    pub fn in_conjugate_subgroup(&self, gamma: &CrystalElement) -> bool {
        self.deconj(gamma).is_some()
    }
}

fn residue(u: &Mat<i64>, moduli: &[i64], w: &[i64]) -> Vec<i64> {
    int_apply(u, w)
        .into_iter()
        .zip(moduli)
        .map(|(x, &s)| x.rem_euclid(s))
        .collect()
}

fn representatives_from_smith(smith: &SmithForm, moduli: &[i64]) -> Vec<Vec<i64>> {
    let u_inv = smith
        .u
        .map(|x| Rational::from_integer(x.clone()))
        .inverse()
        .expect("unimodular");
    let u_inv = to_int_matrix(&u_inv).expect("unimodular inverse is integral");
    let d = moduli.len();
    let total: i64 = moduli.iter().product();
    (0..total)
        .map(|mut idx| {
            let mut c = vec![0i64; d];
            for (slot, &s) in c.iter_mut().zip(moduli) {
                *slot = idx % s;
                idx /= s;
            }
            int_apply(&u_inv, &c)
        })
        .collect()
}

/// Representatives of `ℤ^d / Mℤ^d` read off the Smith form of `M`; the zero
/// vector comes first.
pub fn quotient_representatives(m: &Mat<i64>) -> Result<Vec<Vec<i64>>, CrystalError> {
    let smith = smith_normal_form(&int_to_big(m)).map_err(|_| CrystalError::BadDilation)?;
    let moduli: Vec<i64> = smith
        .diagonal()
        .iter()
        .map(|x| x.abs().to_i64().expect("small modulus"))
        .collect();
    Ok(representatives_from_smith(&smith, &moduli))
}

fn inverse_power_norm(a_inv: &Mat<f64>, n: u32) -> f64 {
    let d = a_inv.rows();
    let base = nalgebra::DMatrix::from_fn(d, d, |i, j| a_inv[(i, j)]);
    let mut acc = nalgebra::DMatrix::<f64>::identity(d, d);
    for _ in 0..n {
        acc = &acc * &base;
    }
    acc.singular_values().max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{catalog_group, Lattice};
    use crate::linalg::rational;

    fn q(rows: &[&[i64]]) -> Mat<Rational> {
        Mat::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&v| rational(v, 1)).collect())
                .collect(),
        )
        .unwrap()
    }

    fn pm() -> CrystalTriple {
        catalog_group("pm", 2).unwrap()
    }

    #[test]
    fn pm_with_doubling_is_admissible() {
        let t = pm();
        let dil = Dilation::new(q(&[&[2, 0], &[0, 2]]), &t).unwrap();
        assert_eq!(dil.m(), 4);
        assert_eq!(dil.h(), &[0, 1]);
        assert_eq!(dil.rho(), &[vec![0, 1], vec![1, 0]]);
        let digits: Vec<Vec<i64>> = dil.digits().iter().map(|g| g.k.clone()).collect();
        assert_eq!(digits, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![1, 1]]);
    }

    #[test]
    fn non_expansive_rejected() {
        let t = pm();
        assert!(matches!(
            Dilation::new(q(&[&[1, 0], &[0, 1]]), &t),
            Err(CrystalError::NotExpansive(_))
        ));
        assert!(matches!(
            Dilation::new(q(&[&[1, 0], &[0, 2]]), &t),
            Err(CrystalError::NotExpansive(_))
        ));
    }

    #[test]
    fn conjugate_must_stay_in_group() {
        // the quincunx rotation-dilation moves the mirror y -> -y to a
        // diagonal mirror that pm does not contain
        let t = pm();
        assert!(matches!(
            Dilation::new(q(&[&[1, -1], &[1, 1]]), &t),
            Err(CrystalError::ConjugateLeavesGroup(1))
        ));
    }

    #[test]
    fn non_integral_lattice_map_rejected() {
        let t = CrystalTriple::translations(Lattice::standard(1));
        let a = Mat::from_rows(vec![vec![rational(5, 2)]]).unwrap();
        assert_eq!(
            Dilation::new(a, &t).unwrap_err(),
            CrystalError::NonIntegerLattice
        );
    }

    #[test]
    fn one_dimensional_digits() {
        let t = CrystalTriple::translations(Lattice::standard(1));
        let dil = Dilation::new(q(&[&[2]]), &t).unwrap();
        let digits: Vec<Vec<i64>> = dil.digits().iter().map(|g| g.k.clone()).collect();
        assert_eq!(digits, vec![vec![0], vec![1]]);
        assert_eq!(
            dil.coset_index(&CrystalElement::translation(vec![5]), &t),
            1
        );
        assert_eq!(
            dil.coset_index(&CrystalElement::translation(vec![-4]), &t),
            0
        );
    }

    #[test]
    fn smith_representatives() {
        let reps = quotient_representatives(&Mat::from_rows(vec![vec![1, 1], vec![0, 3]]).unwrap())
            .unwrap();
        assert_eq!(reps.len(), 3);
        assert_eq!(reps[0], vec![0, 0]);
        let unimodular =
            quotient_representatives(&Mat::from_rows(vec![vec![1, 1], vec![0, 1]]).unwrap())
                .unwrap();
        assert_eq!(unimodular, vec![vec![0, 0]]);
    }

    #[test]
    fn pm_coset_and_conjugation_examples() {
        let t = pm();
        let dil = Dilation::new(q(&[&[2, 0], &[0, 2]]), &t).unwrap();
        let gamma = CrystalElement::new(1, vec![1, 0]);
        assert_eq!(dil.coset_index(&gamma, &t), 1);
        assert_eq!(dil.conj(&gamma), CrystalElement::new(1, vec![2, 0]));
        assert_eq!(dil.conj(&t.identity()), t.identity());
        assert_eq!(
            dil.conj(&CrystalElement::translation(vec![3, -1])),
            CrystalElement::translation(vec![6, -2])
        );
        for (i, digit) in dil.digits().iter().enumerate() {
            assert_eq!(dil.coset_index(digit, &t), i);
        }
    }

    #[test]
    fn conjugation_matches_pointwise_map() {
        let t = pm();
        let a = q(&[&[2, 0], &[0, 2]]);
        let dil = Dilation::new(a.clone(), &t).unwrap();
        let a_inv = a.inverse().unwrap();
        let gamma = CrystalElement::new(1, vec![1, 0]);
        let conj = dil.conj(&gamma);
        for (x, y) in [(1, 2), (-3, 5), (0, 7)] {
            let p = vec![rational(x, 3), rational(y, 5)];
            let direct = a.mul_vec(&t.apply(&gamma, &a_inv.mul_vec(&p)));
            assert_eq!(t.apply(&conj, &p), direct);
        }
    }
}
