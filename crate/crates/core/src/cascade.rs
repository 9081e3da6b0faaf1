//! Floating-point cascade oracle.
//!
//! Iterates `f_{k+1}(x) = Σ_γ d_γ f_k(γ⁻¹(Ax))` on a dyadic grid and then
//! tests polynomial reproduction `G_[s](x) = Σ_γ y_[s](γ) f(γ(x)) = C·X_[s](x)`
//! directly, independently of the exact solver.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::accuracy::{fhat0, max_accuracy_with, AccuracyError, Fhat0};
use crate::crystal::{int_apply, to_f64_matrix, CrystalElement, CrystalTriple, Dilation};
use crate::linalg::{Float, Mat, Scalar};
use crate::mask::Mask;
use crate::multiidx::{eval_x, graded_dim, GradedOps, VCollection};

/// Nodes snapped to the grid when within this many grid steps.
const NODE_SNAP: f64 = 1e-9;
const SUPPORT_STEPS: usize = 64;
const MAX_NODES: usize = 1 << 26;

/// Residual below which a reproduced degree counts as reproduced.
pub const REPRODUCTION_TOL: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum CascadeError {
    #[error("grid would need {0} nodes")]
    GridTooLarge(usize),
    #[error(transparent)]
    Accuracy(#[from] AccuracyError),
    #[error("could not write field: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CascadeOptions {
    pub iterations: usize,
    /// Grid spacing is `2^{-grid_exponent}`.
    pub grid_exponent: u32,
    /// Sup-difference between the last two iterates counted as converged.
    pub tolerance: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for CascadeOptions {
    fn default() -> Self {
        Self {
            iterations: 12,
            grid_exponent: 8,
            tolerance: 1e-6,
            samples: 32,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SupportEstimate {
    /// Fixed box of `K ↦ bbox(∪_γ A⁻¹γ(K))`.
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Box with the safety margin; the grid covers it.
    pub grid_lo: Vec<f64>,
    pub grid_hi: Vec<f64>,
    pub radius: f64,
    pub diverged: bool,
}

/// Affine map `x ↦ lin·x + off` in ambient coordinates.
#[derive(Clone, Debug)]
struct Affine {
    lin: Vec<f64>,
    off: Vec<f64>,
}

impl Affine {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        (0..d)
            .map(|i| self.off[i] + (0..d).map(|j| self.lin[i * d + j] * x[j]).sum::<f64>())
            .collect()
    }
}

/// `γ(x) = g(x + R·k)` as an affine map.
fn element_affine(triple: &CrystalTriple, gamma: &CrystalElement) -> Affine {
    let d = triple.dim();
    let g = triple.element_f64(gamma.g);
    let off = triple.apply_f64(gamma, &vec![0.0; d]);
    Affine {
        lin: (0..d * d).map(|i| g[(i / d, i % d)]).collect(),
        off,
    }
}

/// `x ↦ γ⁻¹(Ax)`.
fn refinement_affine(triple: &CrystalTriple, a: &Mat<f64>, gamma: &CrystalElement) -> Affine {
    let d = triple.dim();
    let inner = element_affine(triple, &triple.inverse(gamma));
    let lin = (0..d * d)
        .map(|idx| {
            let (i, j) = (idx / d, idx % d);
            (0..d).map(|k| inner.lin[i * d + k] * a[(k, j)]).sum()
        })
        .collect();
    Affine {
        lin,
        off: inner.off,
    }
}

fn corners(lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    let d = lo.len();
    (0..1usize << d)
        .map(|mask| {
            (0..d)
                .map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] })
                .collect()
        })
        .collect()
}

fn bbox(points: impl Iterator<Item = Vec<f64>>, d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in points {
        for i in 0..d {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    (lo, hi)
}

/// Box containing the support of any compactly supported solution.
pub fn estimate_support<S: Scalar>(
    mask: &Mask<S>,
    triple: &CrystalTriple,
    dilation: &Dilation,
    grid_exponent: u32,
) -> SupportEstimate {
    let d = triple.dim();
    let a_inv = to_f64_matrix(dilation.inverse_matrix());
    let maps: Vec<Affine> = mask
        .support()
        .map(|gamma| {
            let e = element_affine(triple, gamma);
            // A⁻¹γ
            let lin = (0..d * d)
                .map(|idx| {
                    let (i, j) = (idx / d, idx % d);
                    (0..d).map(|k| a_inv[(i, k)] * e.lin[k * d + j]).sum()
                })
                .collect();
            let off = (0..d)
                .map(|i| (0..d).map(|k| a_inv[(i, k)] * e.off[k]).sum())
                .collect();
            Affine { lin, off }
        })
        .collect();
    let mut lo = vec![-1.0; d];
    let mut hi = vec![1.0; d];
    let mut grew_every_step = !maps.is_empty();
    if !maps.is_empty() {
        for _ in 0..SUPPORT_STEPS {
            let cs = corners(&lo, &hi);
            let (nlo, nhi) = bbox(maps.iter().flat_map(|m| cs.iter().map(|c| m.apply(c))), d);
            let old: f64 = (0..d).map(|i| hi[i] - lo[i]).sum();
            let new: f64 = (0..d).map(|i| nhi[i] - nlo[i]).sum();
            grew_every_step &= new > old * (1.0 + 1e-12);
            lo = nlo;
            hi = nhi;
        }
    }
    let h = (-(grid_exponent as f64)).exp2();
    let grid_lo: Vec<f64> = (0..d).map(|i| lo[i] - (hi[i] - lo[i]) / 2.0 - h).collect();
    let grid_hi: Vec<f64> = (0..d).map(|i| hi[i] + (hi[i] - lo[i]) / 2.0 + h).collect();
    let radius = grid_lo
        .iter()
        .chain(&grid_hi)
        .map(|x| x.abs())
        .fold(0.0, f64::max);
    SupportEstimate {
        lo,
        hi,
        grid_lo,
        grid_hi,
        radius,
        diverged: grew_every_step,
    }
}

/// Samples of an `r`-vector function on the nodes `h·j`, `lo ≤ j < lo + shape`;
/// zero elsewhere.
#[derive(Clone, Debug)]
pub struct GridField {
    dim: usize,
    r: usize,
    h: f64,
    lo: Vec<i64>,
    shape: Vec<usize>,
    values: Vec<Float>,
}

impl GridField {
    fn zeros(
        dim: usize,
        r: usize,
        grid_exponent: u32,
        lo: &[f64],
        hi: &[f64],
    ) -> Result<Self, CascadeError> {
        let h = (-(grid_exponent as f64)).exp2();
        let lo_idx: Vec<i64> = lo.iter().map(|x| (x / h).floor() as i64).collect();
        let shape: Vec<usize> = hi
            .iter()
            .zip(&lo_idx)
            .map(|(x, l)| ((x / h).ceil() as i64 - l + 1) as usize)
            .collect();
        let nodes = shape.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
        match nodes {
            Some(n) if n <= MAX_NODES => Ok(Self {
                dim,
                r,
                h,
                lo: lo_idx,
                shape,
                values: vec![Float::new(0.0, 0.0); n * r],
            }),
            _ => Err(CascadeError::GridTooLarge(nodes.unwrap_or(usize::MAX))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn node_count(&self) -> usize {
        self.values.len() / self.r
    }

    pub fn values(&self) -> &[Float] {
        &self.values
    }

    fn node_index(&self, j: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for i in 0..self.dim {
            let off = j[i] - self.lo[i];
            if off < 0 || off as usize >= self.shape[i] {
                return None;
            }
            idx = idx * self.shape[i] + off as usize;
        }
        Some(idx)
    }

    fn node_coords(&self, mut idx: usize) -> Vec<i64> {
        let mut j = vec![0i64; self.dim];
        for i in (0..self.dim).rev() {
            j[i] = self.lo[i] + (idx % self.shape[i]) as i64;
            idx /= self.shape[i];
        }
        j
    }

    /// Ambient coordinates of node `idx`.
    pub fn node_point(&self, idx: usize) -> Vec<f64> {
        self.node_coords(idx)
            .into_iter()
            .map(|j| j as f64 * self.h)
            .collect()
    }

    pub fn node_value(&self, idx: usize) -> &[Float] {
        &self.values[idx * self.r..(idx + 1) * self.r]
    }

    /// Multilinear interpolation; exact at nodes, zero off the grid.
    pub fn value_at(&self, x: &[f64]) -> Vec<Float> {
        let mut out = vec![Float::new(0.0, 0.0); self.r];
        self.accumulate_at(x, Float::new(1.0, 0.0), &mut out);
        out
    }

    fn accumulate_at(&self, x: &[f64], weight: Float, out: &mut [Float]) {
        let d = self.dim;
        let mut base = vec![0i64; d];
        let mut frac = vec![0.0; d];
        for i in 0..d {
            let t = x[i] / self.h;
            let fl = t.floor();
            let mut f = t - fl;
            base[i] = fl as i64;
            if f < NODE_SNAP {
                f = 0.0;
            } else if f > 1.0 - NODE_SNAP {
                f = 0.0;
                base[i] += 1;
            }
            frac[i] = f;
        }
        let moving: Vec<usize> = (0..d).filter(|&i| frac[i] != 0.0).collect();
        let mut j = base.clone();
        for corner in 0..1usize << moving.len() {
            let mut w = 1.0;
            for (bit, &i) in moving.iter().enumerate() {
                if corner >> bit & 1 == 1 {
                    j[i] = base[i] + 1;
                    w *= frac[i];
                } else {
                    j[i] = base[i];
                    w *= 1.0 - frac[i];
                }
            }
            if let Some(idx) = self.node_index(&j) {
                for (o, v) in out.iter_mut().zip(self.node_value(idx)) {
                    *o += weight * w * v;
                }
            }
        }
    }

    /// Riemann sum `h^d Σ f(node)`, exact for the multilinear interpolant.
    pub fn integral(&self) -> Vec<Float> {
        let mut total = vec![Float::new(0.0, 0.0); self.r];
        for chunk in self.values.chunks(self.r) {
            for (t, v) in total.iter_mut().zip(chunk) {
                *t += v;
            }
        }
        let vol = self.h.powi(self.dim as i32);
        total.into_iter().map(|t| t * vol).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// CSV with one row per node: coordinates, then real and imaginary parts.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        let mut header: Vec<String> = (0..self.dim).map(|i| format!("x{i}")).collect();
        for c in 0..self.r {
            header.push(format!("re{c}"));
            header.push(format!("im{c}"));
        }
        writeln!(out, "{}", header.join(","))?;
        for idx in 0..self.node_count() {
            let mut row: Vec<String> = self.node_point(idx).iter().map(|x| x.to_string()).collect();
            for v in self.node_value(idx) {
                row.push(v.re.to_string());
                row.push(v.im.to_string());
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedKind {
    /// Interpolated eigenvector of the refinement operator on lattice samples.
    LatticeSamples,
    /// Indicator of the unit cell times the `f̂(0)` direction.
    Indicator,
}

#[derive(Clone, Debug)]
pub struct CascadeResult {
    pub field: GridField,
    pub support: SupportEstimate,
    pub seed: SeedKind,
    pub iterations: usize,
    /// `‖f_n − f_{n−1}‖_∞` on the grid.
    pub last_difference: f64,
    pub converged: bool,
    /// The final field vanishes identically.
    pub degenerate: bool,
}

struct Refinement {
    maps: Vec<Affine>,
    coefs: Vec<Vec<Float>>,
}

impl Refinement {
    fn new<S: Scalar>(mask: &Mask<S>, triple: &CrystalTriple, dilation: &Dilation) -> Self {
        let a = to_f64_matrix(dilation.matrix());
        let mut maps = Vec::with_capacity(mask.len());
        let mut coefs = Vec::with_capacity(mask.len());
        for (gamma, c) in mask.iter() {
            maps.push(refinement_affine(triple, &a, gamma));
            coefs.push(c.as_slice().iter().map(|x| x.to_c64()).collect());
        }
        Self { maps, coefs }
    }

    /// `Σ_γ d_γ f(γ⁻¹(Ax))`.
    fn apply_at(&self, field: &GridField, x: &[f64], out: &mut [Float]) {
        let r = field.r;
        let mut read = vec![Float::new(0.0, 0.0); r];
        for (map, c) in self.maps.iter().zip(&self.coefs) {
            read.iter_mut().for_each(|v| *v = Float::new(0.0, 0.0));
            field.accumulate_at(&map.apply(x), Float::new(1.0, 0.0), &mut read);
            for i in 0..r {
                for j in 0..r {
                    out[i] += c[i * r + j] * read[j];
                }
            }
        }
    }

    fn step(&self, field: &GridField) -> GridField {
        let mut next = field.clone();
        let r = field.r;
        next.values
            .par_chunks_mut(r)
            .enumerate()
            .for_each(|(idx, out)| {
                out.iter_mut().for_each(|v| *v = Float::new(0.0, 0.0));
                let x = field.node_point(idx);
                self.apply_at(field, &x, out);
            });
        next
    }
}

fn max_difference(a: &GridField, b: &GridField) -> f64 {
    a.values
        .par_iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).norm())
        .reduce(|| 0.0, f64::max)
}

/// Values at lattice points from the eigenvalue-one eigenvector of the
/// refinement operator restricted to lattice points in the support box,
/// when that eigenvector is unique and has nonzero sum.
fn lattice_seed<S: Scalar>(
    mask: &Mask<S>,
    triple: &CrystalTriple,
    dilation: &Dilation,
    support: &SupportEstimate,
) -> Option<HashMap<Vec<i64>, Vec<Float>>> {
    let d = triple.dim();
    let r = mask.r();
    let r_inv = to_f64_matrix(triple.lattice().inverse());
    let cs: Vec<Vec<f64>> = corners(&support.lo, &support.hi)
        .into_iter()
        .map(|c| {
            (0..d)
                .map(|i| (0..d).map(|j| r_inv[(i, j)] * c[j]).sum())
                .collect()
        })
        .collect();
    let (klo, khi) = bbox(cs.into_iter(), d);
    let mut points: Vec<Vec<i64>> = vec![Vec::new()];
    for i in 0..d {
        let lo = (klo[i] - 1e-9).ceil() as i64;
        let hi = (khi[i] + 1e-9).floor() as i64;
        points = points
            .into_iter()
            .flat_map(|p| {
                (lo..=hi).map(move |x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    let n = points.len();
    if n == 0 || n * r > 4096 {
        return None;
    }
    let index: HashMap<&Vec<i64>, usize> = points.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let group = triple.group();
    let lattice_map = dilation.lattice_map();
    let mut t = Mat::<Float>::zeros(n * r, n * r);
    for (row, j) in points.iter().enumerate() {
        let aj = int_apply(lattice_map, j);
        for (gamma, c) in mask.iter() {
            // γ⁻¹(y) = g'(y + R·k') in lattice coordinates
            let inv = triple.inverse(gamma);
            let shifted: Vec<i64> = aj.iter().zip(&inv.k).map(|(a, b)| a + b).collect();
            let y = int_apply(group.int_form(inv.g), &shifted);
            if let Some(&col) = index.get(&y) {
                for a in 0..r {
                    for b in 0..r {
                        t[(row * r + a, col * r + b)] += c[(a, b)].to_c64();
                    }
                }
            }
        }
    }
    let shifted = &t - &Mat::identity(n * r);
    let basis = shifted.kernel_basis_tol(1e-9);
    if basis.len() != 1 {
        return None;
    }
    let v = &basis[0];
    let mut sums = vec![Float::new(0.0, 0.0); r];
    for i in 0..n {
        for c in 0..r {
            sums[c] += v[i * r + c];
        }
    }
    let pivot = *sums.iter().max_by(|a, b| a.norm().total_cmp(&b.norm()))?;
    if pivot.norm() < 1e-9 {
        return None;
    }
    Some(
        points
            .into_iter()
            .enumerate()
            .map(|(i, p)| (p, (0..r).map(|c| v[i * r + c] / pivot).collect()))
            .collect(),
    )
}

fn seed_field<S: Scalar>(
    field: &mut GridField,
    mask: &Mask<S>,
    triple: &CrystalTriple,
    dilation: &Dilation,
    support: &SupportEstimate,
) -> SeedKind {
    let d = triple.dim();
    let r = mask.r();
    let r_inv = to_f64_matrix(triple.lattice().inverse());
    let to_lattice = |x: &[f64]| -> Vec<f64> {
        (0..d)
            .map(|i| (0..d).map(|j| r_inv[(i, j)] * x[j]).sum())
            .collect()
    };
    if let Some(samples) = lattice_seed(mask, triple, dilation, support) {
        let r_f = field.r;
        let values: Vec<Float> = (0..field.node_count())
            .into_par_iter()
            .flat_map_iter(|idx| {
                let u = to_lattice(&field.node_point(idx));
                let base: Vec<i64> = u.iter().map(|x| x.floor() as i64).collect();
                let mut out = vec![Float::new(0.0, 0.0); r_f];
                for corner in 0..1usize << d {
                    let mut w = 1.0;
                    let mut j = base.clone();
                    for i in 0..d {
                        let f = u[i] - base[i] as f64;
                        if corner >> i & 1 == 1 {
                            j[i] += 1;
                            w *= f;
                        } else {
                            w *= 1.0 - f;
                        }
                    }
                    if w == 0.0 {
                        continue;
                    }
                    if let Some(v) = samples.get(&j) {
                        for (o, x) in out.iter_mut().zip(v) {
                            *o += x * w;
                        }
                    }
                }
                out
            })
            .collect();
        field.values = values;
        return SeedKind::LatticeSamples;
    }

    let direction: Vec<Float> = match fhat0(mask, dilation.m()) {
        Fhat0::Direction(f) => f.iter().map(|x| x.to_c64()).collect(),
        _ => {
            let shifted = &mask
                .total()
                .convert(|x| x.to_c64())
                .scale(&Float::new(1.0 / dilation.m() as f64, 0.0))
                - &Mat::identity(r);
            shifted
                .kernel_basis_tol(1e-9)
                .into_iter()
                .next()
                .unwrap_or_else(|| vec![Float::new(1.0, 0.0); r])
        }
    };
    let scale = direction.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let direction: Vec<Float> = direction.iter().map(|x| x / scale).collect();
    for idx in 0..field.node_count() {
        let u = to_lattice(&field.node_point(idx));
        // snap before testing the half-open cell
        let inside = u.iter().all(|&x| {
            let x = (x * 1e9).round() / 1e9;
            (0.0..1.0).contains(&x)
        });
        if inside {
            field.values[idx * r..(idx + 1) * r].copy_from_slice(&direction);
        }
    }
    SeedKind::Indicator
}

/// Runs the cascade from the default seed.
pub fn cascade_iterate<S: Scalar>(
    mask: &Mask<S>,
    triple: &CrystalTriple,
    dilation: &Dilation,
    options: &CascadeOptions,
) -> Result<CascadeResult, CascadeError> {
    let support = estimate_support(mask, triple, dilation, options.grid_exponent);
    let mut field = GridField::zeros(
        triple.dim(),
        mask.r(),
        options.grid_exponent,
        &support.grid_lo,
        &support.grid_hi,
    )?;
    let seed = if mask.is_empty() {
        SeedKind::Indicator
    } else {
        seed_field(&mut field, mask, triple, dilation, &support)
    };
    let refinement = Refinement::new(mask, triple, dilation);
    let mut last_difference = f64::INFINITY;
    for _ in 0..options.iterations.max(1) {
        let next = refinement.step(&field);
        last_difference = max_difference(&next, &field);
        field = next;
        if !last_difference.is_finite() {
            break;
        }
    }
    let degenerate = field.sup_norm() == 0.0;
    Ok(CascadeResult {
        converged: last_difference < options.tolerance,
        field,
        support,
        seed,
        iterations: options.iterations.max(1),
        last_difference,
        degenerate,
    })
}

/// `∫f` from a converged cascade.
pub fn cascade_integral<S: Scalar>(
    mask: &Mask<S>,
    triple: &CrystalTriple,
    dilation: &Dilation,
    options: &CascadeOptions,
) -> Option<Vec<Float>> {
    let res = cascade_iterate(mask, triple, dilation, options).ok()?;
    (res.converged && !res.degenerate).then(|| res.field.integral())
}

/// `max_x |f(x) − Σ_γ d_γ f(γ⁻¹(Ax))|` over grid nodes.
pub fn refinement_residual<S: Scalar>(
    field: &GridField,
    mask: &Mask<S>,
    triple: &CrystalTriple,
    dilation: &Dilation,
) -> f64 {
    let refinement = Refinement::new(mask, triple, dilation);
    let next = refinement.step(field);
    max_difference(&next, field)
}

/// Random grid nodes in the unit cell `R·[0,1)^d`; nodes avoid interpolation
/// error in the reproduction sums.
pub fn sample_points(
    field: &GridField,
    triple: &CrystalTriple,
    n: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let d = triple.dim();
    let basis = triple.basis_f64();
    let h = field.spacing();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            (0..d)
                .map(|i| {
                    let x: f64 = (0..d).map(|j| basis[(i, j)] * u[j]).sum();
                    (x / h).floor() * h
                })
                .collect()
        })
        .collect()
}

/// Elements `γ` with `γ(x)` inside the grid box, paired with `f(γ(x))`.
fn contributions(
    field: &GridField,
    triple: &CrystalTriple,
    support: &SupportEstimate,
    x: &[f64],
) -> Vec<(CrystalElement, Vec<Float>)> {
    let d = triple.dim();
    let r_inv = to_f64_matrix(triple.lattice().inverse());
    let cs = corners(&support.grid_lo, &support.grid_hi);
    let mut out = Vec::new();
    for g in 0..triple.order() {
        let gm = triple.element_f64(g);
        // x + R·k ∈ gᵀ(box)
        let pre: Vec<Vec<f64>> = cs
            .iter()
            .map(|c| {
                let back: Vec<f64> = (0..d)
                    .map(|i| (0..d).map(|j| gm[(j, i)] * c[j]).sum())
                    .collect();
                let shifted: Vec<f64> = back.iter().zip(x).map(|(b, xi)| b - xi).collect();
                (0..d)
                    .map(|i| (0..d).map(|j| r_inv[(i, j)] * shifted[j]).sum())
                    .collect()
            })
            .collect();
        let (klo, khi) = bbox(pre.into_iter(), d);
        let mut ks: Vec<Vec<i64>> = vec![Vec::new()];
        for i in 0..d {
            let lo = klo[i].floor() as i64;
            let hi = khi[i].ceil() as i64;
            ks = ks
                .into_iter()
                .flat_map(|p| {
                    (lo..=hi).map(move |v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        for k in ks {
            let gamma = CrystalElement::new(g, k);
            let f = field.value_at(&triple.apply_f64(&gamma, x));
            if f.iter().any(|v| v.norm() > 0.0) {
                out.push((gamma, f));
            }
        }
    }
    out
}

/// `G_[s](x) = Σ_γ y_[s](γ) f(γ(x))`.
pub fn eval_g(
    result: &CascadeResult,
    triple: &CrystalTriple,
    ops: &GradedOps<Float>,
    v: &VCollection<Float>,
    s: usize,
    x: &[f64],
) -> Vec<Float> {
    let ds = graded_dim(triple.dim(), s);
    let mut g = vec![Float::new(0.0, 0.0); ds];
    for (gamma, f) in contributions(&result.field, triple, &result.support, x) {
        let y = ops.eval_y(&gamma, v, s).expect("degree present");
        let fy = y.mul_vec(&f);
        for (acc, val) in g.iter_mut().zip(fy) {
            *acc += val;
        }
    }
    g
}

#[derive(Clone, Debug, Serialize)]
pub struct ReproductionReport {
    pub s: usize,
    pub c_estimate: [f64; 2],
    pub max_residual: f64,
    pub samples: usize,
    pub reproduced: bool,
}

/// Compares `G_[s]` with `C·X_[s]` at the sample points; `C` is estimated
/// from the points when `s = 0` and `c` is `None`.
pub fn reproduce(
    result: &CascadeResult,
    triple: &CrystalTriple,
    v: &VCollection<Float>,
    s: usize,
    points: &[Vec<f64>],
    c: Option<Float>,
) -> ReproductionReport {
    let ops = GradedOps::<Float>::new(triple, None, s);
    let values: Vec<Vec<Float>> = points
        .par_iter()
        .map(|x| eval_g(result, triple, &ops, v, s, x))
        .collect();
    let c = c.unwrap_or_else(|| {
        let total: Float = values.iter().map(|g| g[0]).sum();
        total / points.len().max(1) as f64
    });
    let max_residual = points
        .iter()
        .zip(&values)
        .map(|(x, g)| {
            let xs = eval_x(
                s,
                &x.iter().map(|&t| Float::new(t, 0.0)).collect::<Vec<_>>(),
            );
            g.iter()
                .zip(&xs)
                .map(|(gi, xi)| (gi - c * xi).norm())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    ReproductionReport {
        s,
        c_estimate: [c.re, c.im],
        max_residual,
        samples: points.len(),
        reproduced: max_residual < REPRODUCTION_TOL,
    }
}

/// `max |G_[s](Ax) − A_[s] G_[s](x)|` over the points.
pub fn covariance_residual(
    result: &CascadeResult,
    triple: &CrystalTriple,
    dilation: &Dilation,
    v: &VCollection<Float>,
    s: usize,
    points: &[Vec<f64>],
) -> f64 {
    let ops = GradedOps::<Float>::new(triple, Some(dilation.matrix()), s);
    let a = to_f64_matrix(dilation.matrix());
    let d = triple.dim();
    points
        .par_iter()
        .map(|x| {
            let ax: Vec<f64> = (0..d)
                .map(|i| (0..d).map(|j| a[(i, j)] * x[j]).sum())
                .collect();
            let lhs = eval_g(result, triple, &ops, v, s, &ax);
            let rhs = ops.a_s(s).mul_vec(&eval_g(result, triple, &ops, v, s, x));
            lhs.iter()
                .zip(&rhs)
                .map(|(l, r)| (l - r).norm())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// The two printed forms of the reproduction constant, from `∫f`.
#[derive(Clone, Debug, Serialize)]
pub struct ConstantForms {
    pub estimated: [f64; 2],
    /// `v_0 f̂(0) / |P|`.
    pub gate_over_volume: [f64; 2],
    /// `|P| / (v_0 f̂(0))`.
    pub volume_over_gate: [f64; 2],
    pub matching: Option<&'static str>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EmpiricalReport {
    pub accuracy: usize,
    pub solver_p: usize,
    pub converged: bool,
    pub last_difference: f64,
    pub seed: SeedKind,
    pub degenerate: bool,
    pub reports: Vec<ReproductionReport>,
    /// Degrees whose `v_[s]` were fitted by least squares rather than taken
    /// from the solver witness.
    pub fitted_from: usize,
    pub constant: Option<ConstantForms>,
}

/// Least-squares `v_[s]` for `G_[s] ≈ C·X_[s]`, lower degrees fixed.
fn fit_degree(
    result: &CascadeResult,
    triple: &CrystalTriple,
    v: &VCollection<Float>,
    s: usize,
    points: &[Vec<f64>],
    c: Float,
) -> Mat<Float> {
    let d = triple.dim();
    let r = v.r();
    let ds = graded_dim(d, s);
    let ops = GradedOps::<Float>::new(triple, None, s);
    let mut trial = v.blocks().to_vec();
    trial.push(Mat::zeros(ds, r));
    let base = VCollection::new(d, r, trial).expect("shapes by degree");
    let n_unknown = ds * r;
    let mut rows: Vec<Vec<Float>> = Vec::new();
    let mut rhs: Vec<Float> = Vec::new();
    for x in points {
        let known = eval_g(result, triple, &ops, &base, s, x);
        let xs = eval_x(
            s,
            &x.iter().map(|&t| Float::new(t, 0.0)).collect::<Vec<_>>(),
        );
        let mut block = vec![vec![Float::new(0.0, 0.0); n_unknown]; ds];
        for (gamma, f) in contributions(&result.field, triple, &result.support, x) {
            let b = ops.q_tilde(&gamma, s, s);
            for a in 0..ds {
                for bb in 0..ds {
                    for e in 0..r {
                        block[a][bb * r + e] += b[(a, bb)] * f[e];
                    }
                }
            }
        }
        for a in 0..ds {
            rows.push(block[a].clone());
            rhs.push(c * xs[a] - known[a]);
        }
    }
    let lhs = DMatrix::from_fn(rows.len(), n_unknown, |i, j| rows[i][j]);
    let b = DMatrix::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    let sol = lhs
        .svd(true, true)
        .solve(&b, 1e-12)
        .unwrap_or_else(|_| DMatrix::zeros(n_unknown, 1));
    Mat::from_fn(ds, r, |i, j| sol[(i * r + j, 0)])
}

/// `v_0` making `Σ_γ v_0 f(γx)` constant, for masks without a witness.
fn fit_v0(
    result: &CascadeResult,
    triple: &CrystalTriple,
    points: &[Vec<f64>],
) -> Option<Mat<Float>> {
    let r = result.field.r();
    let phis: Vec<Vec<Float>> = points
        .iter()
        .map(|x| {
            let mut phi = vec![Float::new(0.0, 0.0); r];
            for (_, f) in contributions(&result.field, triple, &result.support, x) {
                for (p, v) in phi.iter_mut().zip(f) {
                    *p += v;
                }
            }
            phi
        })
        .collect();
    let n = phis.len() as f64;
    let mean: Vec<Float> = (0..r)
        .map(|c| phis.iter().map(|p| p[c]).sum::<Float>() / n)
        .collect();
    let dev = DMatrix::from_fn(phis.len(), r, |i, c| phis[i][c] - mean[c]);
    let svd = dev.svd(false, true);
    let v_t = svd.v_t?;
    let (best, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    // rows of v_t are conjugated right singular vectors
    let v0: Vec<Float> = (0..r).map(|c| v_t[(best, c)].conj()).collect();
    let gate: Float = v0.iter().zip(&mean).map(|(a, b)| a * b).sum();
    if gate.norm() < 1e-9 {
        return None;
    }
    Some(Mat::from_fn(1, r, |_, c| v0[c] / gate))
}

/// Largest `p ≤ p_max` whose degrees `s < p` are all reproduced by the
/// converged cascade within [`REPRODUCTION_TOL`].
pub fn empirical_accuracy<S: Scalar>(
    mask: &Mask<S>,
    triple: &CrystalTriple,
    dilation: &Dilation,
    p_max: usize,
    options: &CascadeOptions,
) -> Result<EmpiricalReport, CascadeError> {
    let cert = max_accuracy_with(mask, triple, dilation, p_max, options)?;
    let result = cascade_iterate(mask, triple, dilation, options)?;
    let witness = cert.witness.map(|w| w.convert(|x| x.to_c64()));
    Ok(assess_reproduction(
        &result,
        triple,
        witness.as_ref(),
        p_max,
        options,
    ))
}

/// Reproduction tests on an existing cascade run. Degrees covered by the
/// witness use it; later degrees are fitted.
pub fn assess_reproduction(
    result: &CascadeResult,
    triple: &CrystalTriple,
    witness: Option<&VCollection<Float>>,
    p_max: usize,
    options: &CascadeOptions,
) -> EmpiricalReport {
    let solver_p = witness.map_or(0, |w| w.degrees());
    let mut report = EmpiricalReport {
        accuracy: 0,
        solver_p,
        converged: result.converged,
        last_difference: result.last_difference,
        seed: result.seed,
        degenerate: result.degenerate,
        reports: Vec::new(),
        fitted_from: solver_p,
        constant: None,
    };
    if !result.converged || result.degenerate {
        return report;
    }
    let d = triple.dim();
    let r = result.field.r();
    let points = sample_points(&result.field, triple, options.samples, options.seed);
    let mut blocks: Vec<Mat<Float>> = Vec::new();
    let mut c = None;
    for s in 0..p_max {
        let v_prefix = VCollection::new(d, r, blocks.clone()).expect("shapes by degree");
        let block = match witness {
            Some(w) if s < w.degrees() => w.block(s).clone(),
            _ if s == 0 => match fit_v0(result, triple, &points) {
                Some(v0) => v0,
                None => break,
            },
            _ => fit_degree(
                result,
                triple,
                &v_prefix,
                s,
                &points,
                c.expect("set at s = 0"),
            ),
        };
        blocks.push(block);
        let v = VCollection::new(d, r, blocks.clone()).expect("shapes by degree");
        let rep = reproduce(result, triple, &v, s, &points, c);
        if s == 0 {
            let est = Float::new(rep.c_estimate[0], rep.c_estimate[1]);
            c = Some(est);
            report.constant = Some(constant_forms(result, triple, &v, est));
        }
        let ok = rep.reproduced;
        report.reports.push(rep);
        if !ok {
            break;
        }
        report.accuracy = s + 1;
    }
    report
}

fn constant_forms(
    result: &CascadeResult,
    triple: &CrystalTriple,
    v: &VCollection<Float>,
    estimated: Float,
) -> ConstantForms {
    let integral = result.field.integral();
    let gate: Float = v
        .block(0)
        .as_slice()
        .iter()
        .zip(&integral)
        .map(|(a, b)| a * b)
        .sum();
    let volume = triple.volume().to_c64();
    let proof = gate / volume;
    let statement = volume / gate;
    let close = |z: Float| (z - estimated).norm() <= 1e-3 * estimated.norm().max(1e-12);
    let matching = match (close(proof), close(statement)) {
        (true, true) => Some("both"),
        (true, false) => Some("gate-over-volume"),
        (false, true) => Some("volume-over-gate"),
        (false, false) => None,
    };
    ConstantForms {
        estimated: [estimated.re, estimated.im],
        gate_over_volume: [proof.re, proof.im],
        volume_over_gate: [statement.re, statement.im],
        matching,
    }
}
