//! Special functions and log-space arithmetic.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Floating-point scalar the library is generic over.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + std::iter::Sum
    + 'static
{
    /// Absolute tolerance on the sum of a probability vector.
    fn prob_tol() -> Self;

    /// Converts an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("representable literal")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("representable count")
    }
}

impl Real for f64 {
    fn prob_tol() -> Self {
        1e-12
    }
}

impl Real for f32 {
    fn prob_tol() -> Self {
        1e-5
    }
}

/// Finite stand-in for +∞ in KL divergences and for −∞ in vacuous log terms.
pub const KL_SENTINEL: f64 = 1e300;

const ASYMPTOTIC_SHIFT: f64 = 6.0;

// B_{2k} / (2k) for k = 1..6
const DIGAMMA_SERIES: [f64; 6] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
];

/// The digamma function ψ(x) for x > 0.
///
/// Shifts the argument up to x ≥ 6 with ψ(x) = ψ(x + 1) − 1/x, then sums
/// ψ(x) ≈ ln x − 1/(2x) − Σ_k B_{2k} / (2k x^{2k}). Absolute error is below
/// 1e-10 over the whole positive axis.
pub fn digamma<F: Real>(x: F) -> Result<F> {
    if !(x > F::zero()) || !x.is_finite() {
        return Err(Error::domain(format!("digamma requires x > 0, got {x}")));
    }
    let mut x = x;
    let mut acc = F::zero();
    let shift = F::lit(ASYMPTOTIC_SHIFT);
    while x < shift {
        acc = acc - x.recip();
        x = x + F::one();
    }
    let inv2 = (x * x).recip();
    let mut pow = inv2;
    let mut series = F::zero();
    for &c in DIGAMMA_SERIES.iter() {
        series = series + F::lit(c) * pow;
        pow = pow * inv2;
    }
    Ok(acc + x.ln() - F::lit(0.5) / x - series)
}

/// ln Σ exp(v_i), shifted by the maximum so large inputs do not overflow.
pub fn log_sum_exp<F: Real>(v: &[F]) -> Result<F> {
    let max = v
        .iter()
        .copied()
        .fold(None, |m: Option<F>, x| Some(m.map_or(x, |m| m.max(x))))
        .ok_or_else(|| Error::domain("log_sum_exp of an empty vector"))?;
    if max == F::neg_infinity() || !max.is_finite() {
        return Ok(max);
    }
    let sum: F = v.iter().map(|&x| (x - max).exp()).sum();
    Ok(max + sum.ln())
}

/// Replaces log-weights with their normalized probabilities, in place.
///
/// The result is renormalized once more after exponentiation so the row sums
/// to one within [`Real::prob_tol`].
pub fn softmax_in_place<F: Real>(v: &mut [F]) -> Result<()> {
    let lse = log_sum_exp(v)?;
    if !lse.is_finite() {
        return Err(Error::Numeric(format!(
            "softmax normalizer is not finite ({lse})"
        )));
    }
    for x in v.iter_mut() {
        *x = (*x - lse).exp();
    }
    let total: F = v.iter().copied().sum();
    for x in v.iter_mut() {
        *x = *x / total;
    }
    Ok(())
}

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax<F: PartialOrd + Copy>(v: &[F]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// KL(p ‖ q) = Σ p_i ln(p_i / q_i), with 0 ln(0/x) = 0.
///
/// Returns [`KL_SENTINEL`] when q vanishes somewhere on p's support.
pub fn kl_divergence<F: Real>(p: &[F], q: &[F]) -> Result<F> {
    if p.len() != q.len() {
        return Err(Error::domain(format!(
            "kl_divergence length mismatch: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    let mut acc = F::zero();
    for (&pi, &qi) in p.iter().zip(q) {
        if pi <= F::zero() {
            continue;
        }
        if qi <= F::zero() {
            return Ok(F::lit(KL_SENTINEL));
        }
        acc = acc + pi * (pi / qi).ln();
    }
    // rounding can leave a tiny negative for p == q
    Ok(acc.max(F::zero()))
}

/// A probability vector with at least two entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<F>", into = "Vec<F>", bound = "F: Real")]
pub struct ProbVector<F: Real>(Vec<F>);

impl<F: Real> ProbVector<F> {
    pub fn new(entries: Vec<F>) -> Result<Self> {
        check_simplex(&entries)?;
        Ok(Self(entries))
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(vec![F::one() / F::of_usize(k); k])
    }

    pub fn as_slice(&self) -> &[F] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> F {
        self.0.iter().copied().fold(F::infinity(), F::min)
    }
}

impl<F: Real> TryFrom<Vec<F>> for ProbVector<F> {
    type Error = Error;

    fn try_from(v: Vec<F>) -> Result<Self> {
        Self::new(v)
    }
}

impl<F: Real> From<ProbVector<F>> for Vec<F> {
    fn from(p: ProbVector<F>) -> Self {
        p.0
    }
}

impl<F: Real> std::ops::Deref for ProbVector<F> {
    type Target = [F];

    fn deref(&self) -> &[F] {
        &self.0
    }
}

pub(crate) fn check_simplex<F: Real>(v: &[F]) -> Result<()> {
    if v.len() < 2 {
        return Err(Error::domain(format!(
            "probability vector needs at least 2 entries, got {}",
            v.len()
        )));
    }
    if let Some(x) = v.iter().find(|x| !(**x >= F::zero() && **x <= F::one())) {
        return Err(Error::domain(format!("probability entry {x} outside [0, 1]")));
    }
    let total: F = v.iter().copied().sum();
    if (total - F::one()).abs() > F::prob_tol() {
        return Err(Error::domain(format!(
            "probability vector sums to {total}, not 1"
        )));
    }
    Ok(())
}
