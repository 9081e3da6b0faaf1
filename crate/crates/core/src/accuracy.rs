//! Accuracy of refinable functions from finitely many linear conditions on
//! the mask.
//!
//! For digits `γ_i` and cosets `Γ_i = γ_i AΓA⁻¹`, accuracy `p` is
//! equivalent to the existence of `v_[0], …, v_[p−1]` with `v_0 ≠ 0`,
//! `v_0 f̂(0) ≠ 0` and, for every `s < p` and every `i`,
//!
//! `v_[s] = Σ_{γ∈Γ_i} Σ_{t≤s} Q̃_[s,t](γ⁻¹) A_[t] v_[t] d_{γ⁻¹}`.

use serde::Serialize;
use thiserror::Error;

use crate::cascade::{cascade_integral, CascadeOptions};
use crate::crystal::{CrystalElement, CrystalTriple, Dilation};
use crate::linalg::{solve_affine_tol, Float, Mat, Rational, Scalar, DEFAULT_TOL};
use crate::mask::{Mask, MaskError};
use crate::multiidx::{enumerate_degree, graded_dim, GradedOps, MultiIndex, VCollection};

/// Tolerance of the cascade-integral gate.
pub const GATE_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AccuracyError {
    #[error("p_max must be at least 1")]
    PMax,
    #[error("the sufficient test needs a scalar mask, got multiplicity {0}")]
    NotScalar(usize),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error("collection has {have} degrees, {need} needed")]
    MissingDegree { have: usize, need: usize },
    #[error("digit index {0} out of range")]
    Digit(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ConditionD,
    Sufficient,
}

/// Direction of `f̂(0)`: the eigenvalue-one eigenspace of `(1/m) Σ_γ d_γ`.
#[derive(Clone, Debug, PartialEq)]
pub enum Fhat0<S> {
    /// One-dimensional eigenspace, first nonzero entry scaled to 1.
    Direction(Vec<S>),
    /// No eigenvalue one, so `f̂(0) = 0` for every solution.
    Vanishing,
    /// Eigenspace of dimension ≥ 2.
    Indeterminate(usize),
}

pub fn fhat0<S: Scalar>(mask: &Mask<S>, m: usize) -> Fhat0<S> {
    let r = mask.r();
    let shifted = &mask.total().scale(&(S::one() / S::from_i64(m as i64))) - &Mat::identity(r);
    let basis = shifted.kernel_basis_tol(DEFAULT_TOL);
    match basis.len() {
        0 => Fhat0::Vanishing,
        1 => Fhat0::Direction(normalize_first(&basis[0])),
        n => Fhat0::Indeterminate(n),
    }
}

fn normalize_first<S: Scalar>(v: &[S]) -> Vec<S> {
    match v.iter().find(|x| !x.is_negligible(DEFAULT_TOL)) {
        Some(pivot) => {
            let inv = S::one() / pivot.clone();
            v.iter().map(|x| x.clone() * inv.clone()).collect()
        }
        None => v.to_vec(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateSource {
    Eigenvector,
    CascadeIntegral,
    Vanishing,
    /// Indeterminate eigenspace and no converged cascade to fall back on.
    Unavailable,
}

#[derive(Clone, Debug)]
pub struct AccuracyCertificate<S> {
    pub p: usize,
    pub p_max: usize,
    pub witness: Option<VCollection<S>>,
    pub method: Method,
    /// `v_0 f̂(0)` for the witness.
    pub gate: Option<Float>,
    pub gate_source: GateSource,
    /// Kernel dimension of the stacked system through each degree.
    pub kernel_dims: Vec<usize>,
    /// Dimension of the kernel's projection onto the `v_0` coordinates.
    pub projection_dims: Vec<usize>,
    pub first_failing_degree: Option<usize>,
}

/// Mask terms grouped by coset: `(α, d_α)` with `α⁻¹ ∈ Γ_i`.
struct Setup<'a, S> {
    triple: &'a CrystalTriple,
    dilation: &'a Dilation,
    mask: &'a Mask<S>,
    ops: GradedOps<S>,
    terms: Vec<Vec<(CrystalElement, Mat<S>)>>,
}

impl<'a, S: Scalar> Setup<'a, S> {
    fn new(
        mask: &'a Mask<S>,
        triple: &'a CrystalTriple,
        dilation: &'a Dilation,
        max_degree: usize,
    ) -> Result<Self, AccuracyError> {
        mask.check_triple(triple)?;
        let ops = GradedOps::new(triple, Some(dilation.matrix()), max_degree);
        let mut terms = vec![Vec::new(); dilation.m()];
        for (alpha, d) in mask.iter() {
            let sigma = triple.inverse(alpha);
            terms[dilation.coset_index(&sigma, triple)].push((alpha.clone(), d.clone()));
        }
        Ok(Self {
            triple,
            dilation,
            mask,
            ops,
            terms,
        })
    }

    /// `Q̃_[s,t](α) A_[t]`.
    fn b_block(&self, alpha: &CrystalElement, s: usize, t: usize) -> Mat<S> {
        &self.ops.q_tilde(alpha, s, t) * self.ops.a_s(t)
    }

    fn residual(&self, v: &VCollection<S>, s: usize, i: usize) -> Mat<S> {
        let mut acc = v.block(s).clone();
        for (alpha, d) in &self.terms[i] {
            for t in 0..=s {
                let term = &(&self.b_block(alpha, s, t) * v.block(t)) * d;
                acc = &acc - &term;
            }
        }
        acc
    }

    /// Rows of the homogeneous system contributed by degree `s`, over
    /// `n_cols` unknowns laid out as in [`VCollection::flatten`].
    fn degree_rows(&self, s: usize, offsets: &[usize], n_cols: usize) -> Vec<Vec<S>> {
        let r = self.mask.r();
        let ds = graded_dim(self.triple.dim(), s);
        let mut rows = Vec::with_capacity(self.terms.len() * ds * r);
        for coset in &self.terms {
            let mut block = vec![vec![S::zero(); n_cols]; ds * r];
            for a in 0..ds {
                for c in 0..r {
                    block[a * r + c][offsets[s] + a * r + c] = S::one();
                }
            }
            for (alpha, d) in coset {
                for t in 0..=s {
                    let bm = self.b_block(alpha, s, t);
                    let dt = graded_dim(self.triple.dim(), t);
                    for a in 0..ds {
                        for b in 0..dt {
                            let coef = &bm[(a, b)];
                            if coef.is_zero() {
                                continue;
                            }
                            for e in 0..r {
                                for c in 0..r {
                                    let col = offsets[t] + b * r + e;
                                    let delta = coef.clone() * d[(e, c)].clone();
                                    let slot = &mut block[a * r + c][col];
                                    *slot = slot.clone() - delta;
                                }
                            }
                        }
                    }
                }
            }
            rows.extend(block);
        }
        rows
    }
}

/// `v_[s] − Σ_{γ∈Γ_i} Σ_t Q̃_[s,t](γ⁻¹) A_[t] v_[t] d_{γ⁻¹}`.
pub fn condition_d_residual<S: Scalar>(
    mask: &Mask<S>,
    triple: &CrystalTriple,
    dilation: &Dilation,
    v: &VCollection<S>,
    s: usize,
    i: usize,
) -> Result<Mat<S>, AccuracyError> {
    if s >= v.degrees() {
        return Err(AccuracyError::MissingDegree {
            have: v.degrees(),
            need: s + 1,
        });
    }
    if i >= dilation.m() {
        return Err(AccuracyError::Digit(i));
    }
    Ok(Setup::new(mask, triple, dilation, s)?.residual(v, s, i))
}

/// Largest `p ≤ p_max` for which condition (d) has a solution passing the
/// `v_0 f̂(0) ≠ 0` gate, together with a witness.
pub fn max_accuracy<S: Scalar>(
    mask: &Mask<S>,
    triple: &CrystalTriple,
    dilation: &Dilation,
    p_max: usize,
) -> Result<AccuracyCertificate<S>, AccuracyError> {
    max_accuracy_with(mask, triple, dilation, p_max, &CascadeOptions::default())
}

/// As [`max_accuracy`], with explicit options for the cascade fallback of
/// the gate.
pub fn max_accuracy_with<S: Scalar>(
    mask: &Mask<S>,
    triple: &CrystalTriple,
    dilation: &Dilation,
    p_max: usize,
    cascade: &CascadeOptions,
) -> Result<AccuracyCertificate<S>, AccuracyError> {
    if p_max < 1 {
        return Err(AccuracyError::PMax);
    }
    let setup = Setup::new(mask, triple, dilation, p_max - 1)?;
    let d = triple.dim();
    let r = mask.r();
    let mut offsets = Vec::with_capacity(p_max + 1);
    offsets.push(0);
    for s in 0..p_max {
        offsets.push(offsets[s] + graded_dim(d, s) * r);
    }
    let n_cols = offsets[p_max];

    let gate = Gate::new(mask, triple, dilation, cascade);
    let selector: Vec<usize> = (0..r).collect();
    let mut rows: Vec<Vec<S>> = Vec::new();
    let mut cert = AccuracyCertificate {
        p: 0,
        p_max,
        witness: None,
        method: Method::ConditionD,
        gate: None,
        gate_source: gate.source(),
        kernel_dims: Vec::new(),
        projection_dims: Vec::new(),
        first_failing_degree: None,
    };
    for s in 0..p_max {
        rows.extend(setup.degree_rows(s, &offsets, n_cols));
        let width = offsets[s + 1];
        let system = Mat::from_fn(rows.len(), width, |i, j| rows[i][j].clone());
        let sol = solve_affine_tol(&system, &selector, DEFAULT_TOL);
        cert.kernel_dims.push(sol.basis.len());
        cert.projection_dims.push(sol.projection_dim);
        let found = if sol.projection_dim == 0 {
            None
        } else {
            sol.basis.iter().find_map(|vec| {
                let scaled = scale_by_first_v0(vec, r);
                gate.value(&scaled[..r]).map(|g| (scaled, g))
            })
        };
        match found {
            Some((vec, g)) => {
                cert.p = s + 1;
                cert.gate = Some(g);
                cert.witness = Some(VCollection::from_flat(d, r, s + 1, &vec));
            }
            None => {
                cert.first_failing_degree = Some(s);
                break;
            }
        }
    }
    Ok(cert)
}

fn scale_by_first_v0<S: Scalar>(vec: &[S], r: usize) -> Vec<S> {
    match vec[..r].iter().find(|x| !x.is_negligible(DEFAULT_TOL)) {
        Some(pivot) => {
            let inv = S::one() / pivot.clone();
            vec.iter().map(|x| x.clone() * inv.clone()).collect()
        }
        None => vec.to_vec(),
    }
}

enum Gate<S> {
    Direction(Vec<S>),
    Integral(Vec<Float>),
    Closed(GateSource),
}

impl<S: Scalar> Gate<S> {
    fn new(
        mask: &Mask<S>,
        triple: &CrystalTriple,
        dilation: &Dilation,
        cascade: &CascadeOptions,
    ) -> Self {
        match fhat0(mask, dilation.m()) {
            Fhat0::Direction(f) => Gate::Direction(f),
            Fhat0::Vanishing => Gate::Closed(GateSource::Vanishing),
            Fhat0::Indeterminate(_) => match cascade_integral(mask, triple, dilation, cascade) {
                Some(integral) => Gate::Integral(integral),
                None => Gate::Closed(GateSource::Unavailable),
            },
        }
    }

    fn source(&self) -> GateSource {
        match self {
            Gate::Direction(_) => GateSource::Eigenvector,
            Gate::Integral(_) => GateSource::CascadeIntegral,
            Gate::Closed(src) => *src,
        }
    }

    /// `v_0 f̂(0)` when it passes the gate.
    fn value(&self, v0: &[S]) -> Option<Float> {
        match self {
            Gate::Direction(f) => {
                let g = v0
                    .iter()
                    .zip(f)
                    .fold(S::zero(), |acc, (a, b)| acc + a.clone() * b.clone());
                (!g.is_negligible(DEFAULT_TOL)).then(|| g.to_c64())
            }
            Gate::Integral(f) => {
                let scale = v0.iter().map(|x| x.modulus()).fold(0.0, f64::max);
                if scale == 0.0 {
                    return None;
                }
                let g: Float = v0.iter().zip(f).map(|(a, b)| a.to_c64() * b).sum();
                (g.norm() / scale > GATE_TOL).then_some(g)
            }
            Gate::Closed(_) => None,
        }
    }
}

/// One row of the moment table of the sufficient test.
#[derive(Clone, Debug)]
pub struct Moment<S> {
    pub b: usize,
    pub alpha: MultiIndex,
    /// `Σ_{l∈Λ_i} (R·l)^α c_{(b,l)⁻¹}` per coset `i`.
    pub coset_sums: Vec<S>,
    /// Common value `β_{b,α}` when all coset sums agree.
    pub beta: Option<S>,
}

#[derive(Clone, Debug)]
pub struct EigenFlag {
    pub s: usize,
    pub has_eigenvalue_one: bool,
}

#[derive(Clone, Debug)]
pub struct SufficientReport<S> {
    pub p: usize,
    pub sum_total: S,
    pub sum_ok: bool,
    pub moments: Vec<Moment<S>>,
    pub moments_ok: bool,
    /// Eigenvalue-one tests for `1 ≤ s < p`; at `s = 0` the matrix is the
    /// scalar `Σ_b β_{b,0} = 1`, so that degree is skipped.
    pub eigen_flags: Vec<EigenFlag>,
    pub eigen_ok: bool,
    /// `Σ_{l∈Λ_i} c_{(b⁻¹,l)}` agrees with `β_{b,0}` and the blocks
    /// `M_[s,t]` agree across cosets.
    pub reconciliation_ok: bool,
    pub v_chain: Option<VCollection<S>>,
    /// The chain solves condition (d) exactly (within tolerance for floats).
    pub chain_verified: Option<bool>,
    pub pass: bool,
}

/// Sufficient conditions for accuracy `p` of a scalar mask, plus the
/// explicit chain `v_[s] = (I − M_[s,s]A_[s])⁻¹ Σ_{t<s} M_[s,t] A_[t] v_[t]`.
pub fn sufficient_check<S: Scalar>(
    mask: &Mask<S>,
    triple: &CrystalTriple,
    dilation: &Dilation,
    p: usize,
) -> Result<SufficientReport<S>, AccuracyError> {
    if mask.r() != 1 {
        return Err(AccuracyError::NotScalar(mask.r()));
    }
    if p < 1 {
        return Err(AccuracyError::PMax);
    }
    let setup = Setup::new(mask, triple, dilation, p - 1)?;
    let ops = &setup.ops;
    let group = triple.group();
    let m = dilation.m();
    let d = triple.dim();
    let sum_total = mask.total()[(0, 0)].clone();
    let sum_ok = (sum_total.clone() - S::from_i64(m as i64)).is_negligible(DEFAULT_TOL);

    // condition (ii): sums of c_{(b,l)⁻¹} over each lattice coset
    let mut moments = Vec::new();
    for b in 0..group.order() {
        let mut by_coset: Vec<Vec<(Vec<i64>, S)>> = vec![Vec::new(); m];
        for (e, coef) in mask.iter() {
            let inv = triple.inverse(e);
            if inv.g == b {
                by_coset[dilation.lattice_coset(&inv.k)].push((inv.k, coef[(0, 0)].clone()));
            }
        }
        for s in 0..p {
            let basis = enumerate_degree(d, s);
            for (idx, alpha) in basis.indices().iter().enumerate() {
                let coset_sums: Vec<S> = by_coset
                    .iter()
                    .map(|entries| {
                        entries.iter().fold(S::zero(), |acc, (k, coef)| {
                            let x = crate::multiidx::eval_x(s, &ops.point(k));
                            acc + x[idx].clone() * coef.clone()
                        })
                    })
                    .collect();
                let beta = all_equal(&coset_sums).then(|| coset_sums[0].clone());
                moments.push(Moment {
                    b,
                    alpha: alpha.clone(),
                    coset_sums,
                    beta,
                });
            }
        }
    }
    let moments_ok = moments.iter().all(|mo| mo.beta.is_some());
    let beta0: Vec<S> = (0..group.order())
        .map(|b| {
            moments
                .iter()
                .find(|mo| mo.b == b && mo.alpha.degree() == 0)
                .and_then(|mo| mo.beta.clone())
                .unwrap_or_else(S::zero)
        })
        .collect();

    // condition (iii) for 1 ≤ s < p
    let mut eigen_flags = Vec::new();
    for s in 1..p {
        let ds = graded_dim(d, s);
        let total = (0..group.order()).fold(Mat::zeros(ds, ds), |acc, b| {
            &acc + &(&ops.b_s(b, s).scale(&beta0[b]) * ops.a_s(s))
        });
        let has = total.has_eigenvalue_one_tol(DEFAULT_TOL).expect("square");
        eigen_flags.push(EigenFlag {
            s,
            has_eigenvalue_one: has,
        });
    }
    let eigen_ok = eigen_flags.iter().all(|f| !f.has_eigenvalue_one);
    let pass = sum_ok && moments_ok && eigen_ok;

    // M_[s,t] = Σ_b [Σ_{l∈Λ_i} Q_[s,t](R·l) c_{(b⁻¹,l)}] b_[t], per coset
    let m_block = |i: usize, s: usize, t: usize| -> Mat<S> {
        let mut acc = Mat::zeros(graded_dim(d, s), graded_dim(d, t));
        for (e, coef) in mask.iter() {
            if dilation.lattice_coset(&e.k) != i {
                continue;
            }
            let b = group.inverse(e.g);
            let term = &ops.q_lattice(&e.k, s, t).scale(&coef[(0, 0)]) * ops.b_s(b, t);
            acc = &acc + &term;
        }
        acc
    };
    let mut reconciliation_ok = true;
    for b in 0..group.order() {
        let binv = group.inverse(b);
        for i in 0..m {
            let direct = mask
                .iter()
                .filter(|(e, _)| e.g == binv && dilation.lattice_coset(&e.k) == i)
                .fold(S::zero(), |acc, (_, coef)| acc + coef[(0, 0)].clone());
            if moments_ok && !(direct - beta0[b].clone()).is_negligible(DEFAULT_TOL) {
                reconciliation_ok = false;
            }
        }
    }
    let mut blocks: Vec<Vec<Mat<S>>> = Vec::with_capacity(p);
    for s in 0..p {
        let mut row = Vec::with_capacity(s + 1);
        for t in 0..=s {
            let first = m_block(0, s, t);
            if (1..m).any(|i| !(&m_block(i, s, t) - &first).is_negligible(DEFAULT_TOL)) {
                reconciliation_ok = false;
            }
            row.push(first);
        }
        blocks.push(row);
    }

    let mut v_chain = None;
    let mut chain_verified = None;
    if pass && reconciliation_ok {
        let mut vs: Vec<Mat<S>> = vec![Mat::identity(1)];
        let mut ok = true;
        for s in 1..p {
            let ds = graded_dim(d, s);
            let lhs = &Mat::identity(ds) - &(&blocks[s][s] * ops.a_s(s));
            let rhs = (0..s).fold(Mat::zeros(ds, 1), |acc, t| {
                &acc + &(&(&blocks[s][t] * ops.a_s(t)) * &vs[t])
            });
            match lhs.solve(&rhs) {
                Some(v) => vs.push(v),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            let v = VCollection::new(d, 1, vs).expect("chain blocks are shaped by degree");
            let verified =
                (0..p).all(|s| (0..m).all(|i| setup.residual(&v, s, i).is_negligible(DEFAULT_TOL)));
            chain_verified = Some(verified);
            v_chain = Some(v);
        } else {
            chain_verified = Some(false);
        }
    }

    Ok(SufficientReport {
        p,
        sum_total,
        sum_ok,
        moments,
        moments_ok,
        eigen_flags,
        eigen_ok,
        reconciliation_ok,
        v_chain,
        chain_verified,
        pass,
    })
}

fn all_equal<S: Scalar>(xs: &[S]) -> bool {
    xs.windows(2)
        .all(|w| (w[0].clone() - w[1].clone()).is_negligible(DEFAULT_TOL))
}

/// Residual of one condition at one element and degree.
#[derive(Clone, Debug)]
pub struct EquivalenceResidual {
    /// `'b'` for a sampled element, `'c'` for a digit.
    pub condition: char,
    pub sigma: CrystalElement,
    pub s: usize,
    pub max_modulus: f64,
}

#[derive(Clone, Debug)]
pub struct EquivalenceReport {
    /// Largest `s` checked plus one.
    pub degrees: usize,
    pub condition_d_holds: bool,
    pub max_b: f64,
    pub max_c: f64,
    pub nonzero: Vec<EquivalenceResidual>,
    pub all_zero: bool,
}

/// Residual of `y_[s](σ) = A_[s] Σ_γ y_[s](γ) d_{AγA⁻¹σ⁻¹}`; only `γ` with
/// `AγA⁻¹ = ασ` for `α` in the support contribute.
fn transfer_residual<S: Scalar>(
    setup: &Setup<'_, S>,
    v: &VCollection<S>,
    sigma: &CrystalElement,
    s: usize,
) -> Mat<S> {
    let ops = &setup.ops;
    let mut sum = Mat::zeros(graded_dim(setup.triple.dim(), s), v.r());
    for (alpha, d) in setup.mask.iter() {
        let target = setup.triple.compose(alpha, sigma);
        if let Some(gamma) = setup.dilation.deconj(&target) {
            let y = ops.eval_y(&gamma, v, s).expect("degree present");
            sum = &sum + &(&y * d);
        }
    }
    let lhs = ops.eval_y(sigma, v, s).expect("degree present");
    &lhs - &(ops.a_s(s) * &sum)
}

/// Checks the transfer-operator form of the accuracy conditions at sampled
/// elements and at all digits, for every degree of `v`.
pub fn verify_equivalence<S: Scalar>(
    mask: &Mask<S>,
    triple: &CrystalTriple,
    dilation: &Dilation,
    v: &VCollection<S>,
    sample: &[CrystalElement],
) -> Result<EquivalenceReport, AccuracyError> {
    let p = v.degrees();
    if p == 0 {
        return Err(AccuracyError::MissingDegree { have: 0, need: 1 });
    }
    let setup = Setup::new(mask, triple, dilation, p - 1)?;
    let condition_d_holds = (0..p)
        .all(|s| (0..dilation.m()).all(|i| setup.residual(v, s, i).is_negligible(DEFAULT_TOL)));
    let mut report = EquivalenceReport {
        degrees: p,
        condition_d_holds,
        max_b: 0.0,
        max_c: 0.0,
        nonzero: Vec::new(),
        all_zero: true,
    };
    let checks = sample
        .iter()
        .map(|g| ('b', g))
        .chain(dilation.digits().iter().map(|g| ('c', g)));
    for (condition, sigma) in checks {
        for s in 0..p {
            let res = transfer_residual(&setup, v, sigma, s);
            let size = res.max_modulus();
            if condition == 'b' {
                report.max_b = report.max_b.max(size);
            } else {
                report.max_c = report.max_c.max(size);
            }
            if !res.is_negligible(DEFAULT_TOL) {
                report.all_zero = false;
                report.nonzero.push(EquivalenceResidual {
                    condition,
                    sigma: sigma.clone(),
                    s,
                    max_modulus: size,
                });
            }
        }
    }
    Ok(report)
}

/// Convenience: the rational dilation matrix `A` as an `n×n` diagonal.
pub fn scalar_dilation(dim: usize, factor: i64) -> Mat<Rational> {
    Mat::identity(dim).scale(&Rational::from_integer(factor.into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{catalog_group, Lattice};
    use crate::linalg::{exact, Exact};

    fn line() -> (CrystalTriple, Dilation) {
        let t = CrystalTriple::translations(Lattice::standard(1));
        let dil = Dilation::new(scalar_dilation(1, 2), &t).unwrap();
        (t, dil)
    }

    fn mask(coefs: &[(i64, i64)]) -> Mask<Exact> {
        Mask::from_1d(&coefs.iter().map(|&(n, d)| exact(n, d)).collect::<Vec<_>>())
    }

    fn hat() -> Mask<Exact> {
        mask(&[(1, 2), (1, 1), (1, 2)])
    }

    fn haar() -> Mask<Exact> {
        mask(&[(1, 1), (1, 1)])
    }

    fn ones3() -> Mask<Exact> {
        mask(&[(1, 1), (1, 1), (1, 1)])
    }

    fn v1d(blocks: &[i64]) -> VCollection<Exact> {
        VCollection::new(
            1,
            1,
            blocks
                .iter()
                .map(|&x| Mat::from_fn(1, 1, |_, _| exact(x, 1)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn residual_examples() {
        let (t, dil) = line();
        let v = v1d(&[1, 1]);
        for i in 0..2 {
            assert!(condition_d_residual(&hat(), &t, &dil, &v, 0, i)
                .unwrap()
                .is_zero());
        }
        assert!(condition_d_residual(&hat(), &t, &dil, &v, 1, 0)
            .unwrap()
            .is_zero());
        // s = 0: v₀ (1 − Σ_{γ∈Γ_i} d_{γ⁻¹})
        let r0 = condition_d_residual(&ones3(), &t, &dil, &v1d(&[1]), 0, 0).unwrap();
        assert_eq!(r0[(0, 0)], exact(-1, 1));
        let r1 = condition_d_residual(&ones3(), &t, &dil, &v1d(&[1]), 0, 1).unwrap();
        assert_eq!(r1[(0, 0)], exact(0, 1));
    }

    #[test]
    fn classical_accuracies() {
        let (t, dil) = line();
        let hat_cert = max_accuracy(&hat(), &t, &dil, 5).unwrap();
        assert_eq!(hat_cert.p, 2);
        assert_eq!(hat_cert.witness.unwrap(), v1d(&[1, 1]));
        assert_eq!(max_accuracy(&haar(), &t, &dil, 5).unwrap().p, 1);
        let zero = max_accuracy(&ones3(), &t, &dil, 5).unwrap();
        assert_eq!(zero.p, 0);
        assert_eq!(zero.first_failing_degree, Some(0));
        assert!(zero.witness.is_none());
        let b4 = mask(&[(1, 8), (1, 2), (3, 4), (1, 2), (1, 8)]);
        assert_eq!(max_accuracy(&b4, &t, &dil, 6).unwrap().p, 4);
        // twice the B-spline mask: coset sums 2, not 1
        let doubled = mask(&[(1, 4), (1, 1), (3, 2), (1, 1), (1, 4)]);
        assert_eq!(max_accuracy(&doubled, &t, &dil, 6).unwrap().p, 0);
        assert_eq!(
            max_accuracy(&hat(), &t, &dil, 0).unwrap_err(),
            AccuracyError::PMax
        );
    }

    #[test]
    fn fhat0_examples() {
        assert_eq!(fhat0(&hat(), 2), Fhat0::Direction(vec![exact(1, 1)]));
        assert_eq!(fhat0(&ones3(), 2), Fhat0::Vanishing);
        let t = catalog_group("pm", 2).unwrap();
        let dil = Dilation::new(scalar_dilation(2, 2), &t).unwrap();
        // tensor hat weights split evenly between Id and the mirror
        let coefs = [(0, 1), (1, 2), (2, 1)];
        let mut entries = Vec::new();
        for &(x, cx) in &coefs {
            for &(y, cy) in &[(-1i64, 1i64), (0, 2), (1, 1)] {
                for g in 0..2 {
                    entries.push((CrystalElement::new(g, vec![x, y]), exact(cx * cy, 8)));
                }
            }
        }
        let scalar = Mask::scalar(2, entries).unwrap();
        let lifted = crate::mask::lift_scalar_to_matrix(&scalar, &t, &dil).unwrap();
        match fhat0(&lifted, dil.m()) {
            Fhat0::Direction(f) => assert_eq!(f, vec![exact(1, 1), exact(1, 1)]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sufficient_examples() {
        let (t, dil) = line();
        let rep = sufficient_check(&hat(), &t, &dil, 2).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.moments[0].beta, Some(exact(1, 1)));
        assert_eq!(rep.moments[1].beta, Some(exact(-1, 1)));
        assert_eq!(rep.moments[1].coset_sums, vec![exact(-1, 1), exact(-1, 1)]);
        assert_eq!(rep.eigen_flags.len(), 1);
        assert!(rep.reconciliation_ok);
        assert_eq!(rep.v_chain.unwrap(), v1d(&[1, 1]));
        assert_eq!(rep.chain_verified, Some(true));

        let rep = sufficient_check(&haar(), &t, &dil, 1).unwrap();
        assert!(rep.pass && rep.eigen_flags.is_empty());

        let rep = sufficient_check(&ones3(), &t, &dil, 1).unwrap();
        assert!(!rep.sum_ok && !rep.pass);

        let lifted_like = Mask::new(1, 2, vec![(t.identity(), Mat::<Exact>::identity(2))]).unwrap();
        assert_eq!(
            sufficient_check(&lifted_like, &t, &dil, 1).unwrap_err(),
            AccuracyError::NotScalar(2)
        );
    }

    #[test]
    fn equivalence_examples() {
        let (t, dil) = line();
        let cert = max_accuracy(&hat(), &t, &dil, 4).unwrap();
        let v = cert.witness.unwrap();
        let sample: Vec<_> = (-3..=3)
            .map(|k| CrystalElement::translation(vec![k]))
            .collect();
        let rep = verify_equivalence(&hat(), &t, &dil, &v, &sample).unwrap();
        assert!(rep.all_zero && rep.condition_d_holds);

        let rep = verify_equivalence(&haar(), &t, &dil, &v1d(&[1]), &sample).unwrap();
        assert!(rep.all_zero);

        let perturbed = v1d(&[1, 2]);
        let rep = verify_equivalence(&hat(), &t, &dil, &perturbed, &sample).unwrap();
        assert!(!rep.all_zero && !rep.condition_d_holds);
    }

    #[test]
    fn scaling_preserves_residuals() {
        let (t, dil) = line();
        let v = max_accuracy(&hat(), &t, &dil, 4).unwrap().witness.unwrap();
        let scaled = v.scale(&exact(-7, 3));
        for s in 0..2 {
            for i in 0..2 {
                assert!(condition_d_residual(&hat(), &t, &dil, &scaled, s, i)
                    .unwrap()
                    .is_zero());
            }
        }
    }

    #[test]
    fn float_backend_agrees() {
        let (t, dil) = line();
        let b4 = mask(&[(1, 8), (1, 2), (3, 4), (1, 2), (1, 8)]).convert(|x| x.to_c64());
        assert_eq!(max_accuracy(&b4, &t, &dil, 6).unwrap().p, 4);
    }
}
