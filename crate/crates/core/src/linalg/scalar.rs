//! Scalar backends shared by every matrix in the crate.
//!
//! Three implementations exist: [`Rational`] for real group data (lattice
//! bases, point-group matrices, dilations), [`Exact`] for complex-rational
//! mask arithmetic and [`Float`] for complex double precision. The exact
//! types never round, so their zero test ignores the tolerance argument.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::Mat;

/// Arbitrary-precision real rational.
pub type Rational = BigRational;
/// Complex number with arbitrary-precision rational parts.
pub type Exact = Complex<BigRational>;
/// Complex double-precision float.
pub type Float = Complex64;

/// Absolute tolerance used by the float backend when no other is configured.
pub const DEFAULT_TOL: f64 = 1e-9;

pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Zero
    + One
{
    /// `true` for backends without rounding.
    const EXACT: bool;

    fn from_rational(q: &Rational) -> Self;

    fn from_f64(x: f64) -> Self;

    fn from_i64(v: i64) -> Self {
        Self::from_rational(&Rational::from_integer(BigInt::from(v)))
    }

    /// Zero test. Exact backends ignore `tol`.
    fn is_negligible(&self, tol: f64) -> bool;

    fn modulus(&self) -> f64;

    /// Squared modulus, kept exact where the backend allows it.
    fn norm_sqr(&self) -> Self;

    fn to_c64(&self) -> Float;

    /// Real part if the value is real, exactly for exact backends and within
    /// `tol` for floats.
    fn as_real(&self, tol: f64) -> Option<f64>;

    /// Exact real value, if the backend is exact and the value is real.
    fn real_rational(&self) -> Option<Rational> {
        None
    }

    /// Eigenvalue-one test on a square matrix. The default goes through the
    /// rank of `M - I`; the float backend overrides it with a singular value
    /// test.
    fn unit_eigenvalue(m: &Mat<Self>, tol: f64) -> bool {
        let n = m.rows();
        let shifted = m - &Mat::identity(n);
        shifted.rank_tol(tol) < n
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_rational(q: &Rational) -> Self {
        q.clone()
    }

    fn from_f64(x: f64) -> Self {
        Rational::from_float(x).expect("finite float")
    }

    fn is_negligible(&self, _tol: f64) -> bool {
        self.is_zero()
    }

    fn modulus(&self) -> f64 {
        self.abs().to_f64().unwrap_or(f64::INFINITY)
    }

    fn norm_sqr(&self) -> Self {
        self * self
    }

    fn to_c64(&self) -> Float {
        Complex64::new(self.to_f64().unwrap_or(f64::NAN), 0.0)
    }

    fn as_real(&self, _tol: f64) -> Option<f64> {
        self.to_f64()
    }

    fn real_rational(&self) -> Option<Rational> {
        Some(self.clone())
    }
}

impl Scalar for Exact {
    const EXACT: bool = true;

    fn from_rational(q: &Rational) -> Self {
        Complex::new(q.clone(), Rational::zero())
    }

    fn from_f64(x: f64) -> Self {
        Complex::new(
            Rational::from_float(x).expect("finite float"),
            Rational::zero(),
        )
    }

    fn is_negligible(&self, _tol: f64) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    fn modulus(&self) -> f64 {
        self.to_c64().norm()
    }

    fn norm_sqr(&self) -> Self {
        Complex::new(&self.re * &self.re + &self.im * &self.im, Rational::zero())
    }

    fn to_c64(&self) -> Float {
        Complex64::new(
            self.re.to_f64().unwrap_or(f64::NAN),
            self.im.to_f64().unwrap_or(f64::NAN),
        )
    }

    fn as_real(&self, _tol: f64) -> Option<f64> {
        if self.im.is_zero() {
            self.re.to_f64()
        } else {
            None
        }
    }

    fn real_rational(&self) -> Option<Rational> {
        self.im.is_zero().then(|| self.re.clone())
    }
}

impl Scalar for Float {
    const EXACT: bool = false;

    fn from_rational(q: &Rational) -> Self {
        Complex64::new(q.to_f64().unwrap_or(f64::NAN), 0.0)
    }

    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }

    fn is_negligible(&self, tol: f64) -> bool {
        self.norm() <= tol
    }

    fn modulus(&self) -> f64 {
        self.norm()
    }

    fn norm_sqr(&self) -> Self {
        Complex64::new(Complex::norm_sqr(self), 0.0)
    }

    fn to_c64(&self) -> Float {
        *self
    }

    fn as_real(&self, tol: f64) -> Option<f64> {
        (self.im.abs() <= tol).then_some(self.re)
    }

    fn unit_eigenvalue(m: &Mat<Self>, tol: f64) -> bool {
        let n = m.rows();
        let shifted = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            let one = if i == j { 1.0 } else { 0.0 };
            m[(i, j)] - Complex64::new(one, 0.0)
        });
        let sv = shifted.singular_values();
        sv.iter().fold(f64::INFINITY, |acc, &s| acc.min(s)) < tol
    }
}

/// Parses `"p/q"`, `"p"` or a plain decimal such as `"0.25"` into an exact
/// rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Ok(q) = text.parse::<Rational>() {
        return Some(q);
    }
    let (sign, body) = match text.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, text.strip_prefix('+').unwrap_or(text)),
    };
    let (int_part, frac_part) = body.split_once('.')?;
    if frac_part.is_empty() && int_part.is_empty() {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let numer: BigInt = digits.parse().ok()?;
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    Some(Rational::new(numer * sign, denom))
}

/// Canonical text form of a rational: `"p/q"`, or `"p"` for integers.
pub fn format_rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn rational(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn exact(numer: i64, denom: i64) -> Exact {
    Exact::from_rational(&rational(numer, denom))
}
