//! Theoretical error bounds of VBEM and its constrained variant, and their
//! comparison with what a fit actually achieved.
//!
//! Every quantity is evaluated exactly as written, including regimes where
//! the bound says nothing. Such values are tagged `vacuous` instead of being
//! clamped away: a probability bound ≥ 1, a parameter bound ≥ 1 (all
//! parameters are probabilities), or a logarithm of a non-positive number,
//! which is replaced by the finite sentinel −[`KL_SENTINEL`].
//!
//! Two exponents for the label bound are available. [`ExponentForm::Theorem`]
//! uses U = D + f_π(ε_π) + M f_γ(ε_γ) with D = D_π + M D_γ / 2;
//! [`ExponentForm::Lemma`] uses U = D_π + 2 f_π(ε_π) + M (D_γ / 2 + 2 f_γ(ε_γ)).
//! They differ by the factor 2 on the f terms.

use serde::{Deserialize, Serialize};

use crate::aggregators::{FitResult, ModelParams};
use crate::constraints::ConstraintSet;
use crate::model::{GroundTruth, PriorConfig};
use crate::numerics::{kl_divergence, ProbVector, Real, KL_SENTINEL};
use crate::synth::CrowdSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ExponentForm {
    #[default]
    #[serde(rename = "theorem_form")]
    Theorem,
    #[serde(rename = "lemma_form")]
    Lemma,
}

/// A bound value and whether it is vacuous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct Tagged<F: Real> {
    pub value: F,
    pub vacuous: bool,
}

impl<F: Real> Tagged<F> {
    fn finite(value: F) -> Self {
        Self { value, vacuous: false }
    }

    /// A bound on a quantity that lives in [0, 1].
    fn unit_bound(value: F) -> Self {
        let value = clamp_sentinel(value);
        Self {
            value,
            vacuous: !(value < F::one()),
        }
    }
}

fn clamp_sentinel<F: Real>(x: F) -> F {
    let s = F::lit(KL_SENTINEL);
    if x.is_nan() {
        s
    } else {
        x.max(-s).min(s)
    }
}

/// D_π = min over ordered pairs k ≠ k' of ln(π*_k / π*_{k'}).
pub fn d_pi<F: Real>(pi_star: &[F]) -> Result<F> {
    if pi_star.iter().any(|p| !(*p > F::zero())) {
        return Err(Error::domain("D_pi needs strictly positive class priors"));
    }
    let max = pi_star.iter().copied().fold(F::neg_infinity(), F::max);
    let min = pi_star.iter().copied().fold(F::infinity(), F::min);
    // the minimizing ordered pair puts the smallest prior on top
    Ok((min / max).ln())
}

/// D_γ = min_{k≠k'} (1/M) Σ_m μ_m KL(γ_k^*(m) ‖ γ_{k'}^*(m)).
pub fn d_gamma<F: Real>(gamma_star: &[Vec<ProbVector<F>>], mu: &[F]) -> Result<F> {
    if gamma_star.len() != mu.len() || gamma_star.is_empty() {
        return Err(Error::domain("D_gamma needs one response rate per annotator"));
    }
    let k = gamma_star[0].len();
    let m = F::of_usize(gamma_star.len());
    let mut best = F::infinity();
    for a in 0..k {
        for b in 0..k {
            if a == b {
                continue;
            }
            let mut acc = F::zero();
            for (mat, &mu_m) in gamma_star.iter().zip(mu) {
                acc = acc + mu_m * kl_divergence(&mat[a], &mat[b])?;
            }
            best = best.min(acc / m);
        }
    }
    Ok(clamp_sentinel(best))
}

fn log_margin<F: Real>(eps: F, rho: F, mass: F) -> Tagged<F> {
    let two = F::lit(2.0);
    let arg = (rho - eps) / rho - (two * rho * mass).recip();
    if arg > F::zero() && arg.is_finite() {
        Tagged::finite(arg.ln())
    } else {
        Tagged {
            value: -F::lit(KL_SENTINEL),
            vacuous: true,
        }
    }
}

/// f_π(ε) = ln((ρ_π − ε)/ρ_π − 1 / (2 ρ_π (N + ᾱ₀))).
pub fn f_pi<F: Real>(eps: F, rho_pi: F, n_items: usize, alpha0_bar: F) -> Tagged<F> {
    log_margin(eps, rho_pi, F::of_usize(n_items) + alpha0_bar)
}

/// f_γ(ε) = ln((ρ_γ − ε)/ρ_γ − 1 / (2 ρ_γ β̄₀)).
pub fn f_gamma<F: Real>(eps: F, rho_gamma: F, beta0_bar: F) -> Tagged<F> {
    log_margin(eps, rho_gamma, beta0_bar)
}

/// Constraint counts of one item, as used by W_n.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemConstraintCounts {
    pub must_link: usize,
    pub cannot_link: usize,
    /// min_k of the number of cannot-link partners whose true class is k.
    pub cannot_link_min: usize,
}

impl ItemConstraintCounts {
    pub fn is_constrained(&self) -> bool {
        self.must_link + self.cannot_link > 0
    }
}

/// Per-item N_ML,n, N_CL,n and N_CL,n,min from a constraint set and truth.
pub fn item_constraint_counts(
    cs: &ConstraintSet,
    truth: &GroundTruth,
    n_classes: usize,
) -> Result<Vec<ItemConstraintCounts>> {
    let n = truth.len();
    let mut counts = vec![ItemConstraintCounts::default(); n];
    let mut cl_by_class = vec![vec![0usize; n_classes]; n];
    for p in cs.must_link() {
        if p.second() >= n {
            return Err(Error::domain("constraint refers to an item beyond the truth vector"));
        }
        counts[p.first()].must_link += 1;
        counts[p.second()].must_link += 1;
    }
    for p in cs.cannot_link() {
        let (a, b) = (p.first(), p.second());
        if b >= n {
            return Err(Error::domain("constraint refers to an item beyond the truth vector"));
        }
        let (ya, yb) = truth
            .get(a)
            .zip(truth.get(b))
            .ok_or_else(|| Error::precondition(format!("unknown truth on cannot-link ({a}, {b})")))?;
        counts[a].cannot_link += 1;
        counts[b].cannot_link += 1;
        cl_by_class[a][yb] += 1;
        cl_by_class[b][ya] += 1;
    }
    for (c, by_class) in counts.iter_mut().zip(&cl_by_class) {
        c.cannot_link_min = by_class.iter().copied().min().unwrap_or(0);
    }
    Ok(counts)
}

/// Everything the bounds depend on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct BoundInputs<F: Real> {
    pub spec: CrowdSpec<F>,
    pub priors: PriorConfig<F>,
    /// ε_{π,t−1}: error of E[π] entering the iteration.
    pub eps_pi: F,
    /// ε_{γ,t−1}: error of E[Γ] entering the iteration.
    pub eps_gamma: F,
    /// ε_{q,t−1}: label error entering the iteration (used by W_n).
    pub eps_q: F,
    pub eta: F,
    /// One entry per item, or empty when there are no constraints.
    pub constraint_counts: Vec<ItemConstraintCounts>,
    pub form: ExponentForm,
}

impl<F: Real> BoundInputs<F> {
    pub fn new(spec: CrowdSpec<F>, priors: PriorConfig<F>) -> Self {
        Self {
            spec,
            priors,
            eps_pi: F::zero(),
            eps_gamma: F::zero(),
            eps_q: F::zero(),
            eta: F::zero(),
            constraint_counts: Vec::new(),
            form: ExponentForm::Theorem,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.priors
            .check_dims(self.spec.n_annotators, self.spec.n_classes)?;
        for (name, v) in [
            ("eps_pi", self.eps_pi),
            ("eps_gamma", self.eps_gamma),
            ("eps_q", self.eps_q),
            ("eta", self.eta),
        ] {
            if !(v >= F::zero()) {
                return Err(Error::domain(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !self.constraint_counts.is_empty() && self.constraint_counts.len() != self.spec.n_items {
            return Err(Error::domain(format!(
                "{} constraint count entries for {} items",
                self.constraint_counts.len(),
                self.spec.n_items
            )));
        }
        Ok(())
    }

    /// ᾱ₀ = Σ_k α_{0,k}.
    pub fn alpha0_bar(&self) -> F {
        self.priors.alpha0().iter().copied().sum()
    }

    /// β̄₀_k^(m) = Σ_ℓ β_{0,k,ℓ}^(m).
    pub fn beta0_bar(&self, m: usize, k: usize) -> F {
        self.priors.beta0(m, k).iter().copied().sum()
    }

    /// Smallest β̄₀ over all annotators and rows; f_γ is evaluated at it.
    pub fn beta0_bar_min(&self) -> F {
        let mut best = F::infinity();
        for m in 0..self.spec.n_annotators {
            for k in 0..self.spec.n_classes {
                best = best.min(self.beta0_bar(m, k));
            }
        }
        best
    }

    fn counts(&self, item: usize) -> ItemConstraintCounts {
        self.constraint_counts.get(item).copied().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct LabelErrorBound<F: Real> {
    pub d_pi: F,
    pub d_gamma: F,
    /// D = D_π + M D_γ / 2.
    pub d: F,
    pub f_pi: Tagged<F>,
    pub f_gamma: Tagged<F>,
    pub u: F,
    /// ε_q = K exp(−U), capped at 1.
    pub eps_q: Tagged<F>,
    pub w_n: Vec<F>,
    /// K exp(−U − η W_n) per item, capped at 1.
    pub tilde_eps_q: Vec<Tagged<F>>,
}

impl<F: Real> LabelErrorBound<F> {
    /// max_n of the per-item bound over constrained items (ε_q if none).
    pub fn tilde_max(&self, counts: &[ItemConstraintCounts]) -> Tagged<F> {
        let mut out: Option<Tagged<F>> = None;
        for (t, c) in self.tilde_eps_q.iter().zip(counts) {
            if c.is_constrained() && out.is_none_or(|o| t.value > o.value) {
                out = Some(*t);
            }
        }
        out.unwrap_or(self.eps_q)
    }
}

/// Keeps the raw value (sentinel-capped) and flags it when it says nothing.
fn capped_probability<F: Real>(raw: F, inputs_vacuous: bool) -> Tagged<F> {
    Tagged {
        value: clamp_sentinel(raw),
        vacuous: inputs_vacuous || !(raw < F::one()),
    }
}

/// Label error bounds ε_q (unconstrained items) and ε̃_q per item.
pub fn label_error_bound<F: Real>(inputs: &BoundInputs<F>) -> Result<LabelErrorBound<F>> {
    inputs.validate()?;
    let spec = &inputs.spec;
    let m = F::of_usize(spec.n_annotators);
    let k = F::of_usize(spec.n_classes);
    let two = F::lit(2.0);
    let dpi = d_pi(&spec.pi_star)?;
    let dgamma = d_gamma(&spec.gamma_star, &spec.mu)?;
    let d = dpi + m * dgamma / two;
    let fpi = f_pi(inputs.eps_pi, spec.rho_pi(), spec.n_items, inputs.alpha0_bar());
    let fgamma = f_gamma(inputs.eps_gamma, spec.rho_gamma(), inputs.beta0_bar_min());
    let u = match inputs.form {
        ExponentForm::Theorem => d + fpi.value + m * fgamma.value,
        ExponentForm::Lemma => dpi + two * fpi.value + m * (dgamma / two + two * fgamma.value),
    };
    let u = clamp_sentinel(u);
    let f_vacuous = fpi.vacuous || fgamma.vacuous;
    let eps_q = capped_probability(k * (-u).exp(), f_vacuous);

    let eps_prev = inputs.eps_q;
    let mut w_n = Vec::with_capacity(spec.n_items);
    let mut tilde = Vec::with_capacity(spec.n_items);
    for n in 0..spec.n_items {
        let c = inputs.counts(n);
        let w = F::of_usize(c.must_link) * (F::one() - two * eps_prev)
            - two * F::of_usize(c.cannot_link) * eps_prev
            + F::of_usize(c.cannot_link_min);
        tilde.push(capped_probability(k * (-u - inputs.eta * w).exp(), f_vacuous));
        w_n.push(w);
    }
    Ok(LabelErrorBound {
        d_pi: dpi,
        d_gamma: dgamma,
        d,
        f_pi: fpi,
        f_gamma: fgamma,
        u,
        eps_q,
        w_n,
        tilde_eps_q: tilde,
    })
}

/// Inputs of the parameter bounds beyond [`BoundInputs`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct ParameterArgs<F: Real> {
    /// ε_{q,t} for unconstrained items.
    pub eps_q: F,
    /// ε̃_{q,t} for constrained items.
    pub tilde_eps_q: F,
    /// g_π(ν); no closed form is known, so it is supplied by the caller.
    pub g_pi: F,
    /// g_γ(ν), likewise.
    pub g_gamma: F,
    /// Ñ_C: items in at least one constraint.
    pub n_constrained: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct ParameterBounds<F: Real> {
    /// Per class k.
    pub eps_pi: Vec<Tagged<F>>,
    /// Per [m][k][k'].
    pub eps_gamma: Vec<Vec<Vec<Tagged<F>>>>,
}

/// Parameter error bounds with constraints:
///
/// ε_{π,k} = (Ñ ε̃ + N̄ ε + N g_π + α_{0,k} + ρ_π ᾱ₀) / (N + ᾱ₀)
///
/// ε_{γ,k,k'}^(m) = (2N g_γ + 2Ñ ε̃ + 2N̄ ε + β_{0,k,k'} + β̄_{0,k})
///               / (N μ_m π*_k − N g_γ / γ*_{k,k'} − Ñ ε̃ − N̄ ε + β̄_k)
///
/// β̄_k in the denominator is taken as the prior row sum β̄_{0,k}^(m).
pub fn parameter_error_bounds<F: Real>(
    inputs: &BoundInputs<F>,
    args: &ParameterArgs<F>,
) -> Result<ParameterBounds<F>> {
    inputs.validate()?;
    let spec = &inputs.spec;
    if args.n_constrained > spec.n_items {
        return Err(Error::domain("more constrained items than items"));
    }
    let n = F::of_usize(spec.n_items);
    let n_tilde = F::of_usize(args.n_constrained);
    let n_bar = F::of_usize(spec.n_items - args.n_constrained);
    let two = F::lit(2.0);
    let alpha0_bar = inputs.alpha0_bar();
    let rho_pi = spec.rho_pi();
    let label_mass = n_tilde * args.tilde_eps_q + n_bar * args.eps_q;

    let eps_pi = inputs
        .priors
        .alpha0()
        .iter()
        .map(|&a0| {
            Tagged::unit_bound((label_mass + n * args.g_pi + a0 + rho_pi * alpha0_bar) / (n + alpha0_bar))
        })
        .collect();

    let eps_gamma = (0..spec.n_annotators)
        .map(|m| {
            (0..spec.n_classes)
                .map(|k| {
                    let beta0 = inputs.priors.beta0(m, k);
                    let row_bar = inputs.beta0_bar(m, k);
                    (0..spec.n_classes)
                        .map(|k2| {
                            let num = two * n * args.g_gamma
                                + two * n_tilde * args.tilde_eps_q
                                + two * n_bar * args.eps_q
                                + beta0[k2]
                                + row_bar;
                            let den = n * spec.mu[m] * spec.pi_star[k]
                                - n * args.g_gamma / spec.gamma(m, k, k2)
                                - n_tilde * args.tilde_eps_q
                                - n_bar * args.eps_q
                                + row_bar;
                            ratio_bound(num, den)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(ParameterBounds { eps_pi, eps_gamma })
}

/// Parameter error bounds without constraints:
///
/// ε_{π,k} = (N (ε_q + g_π) + α_{0,k} + ρ_π ᾱ₀) / (N + ᾱ₀)
///
/// ε_{γ,k,k'}^(m) = (2N (g_γ + ε_q) + β_{0,k,k'} + β̄_{0,k})
///               / (N μ_m π*_k − N g_γ / γ*_{k,k'} − N ε_q + β̄_k)
///
/// Products are distributed in the same order as the constrained form, so
/// with no constrained items the two agree bit for bit.
pub fn unconstrained_parameter_error_bounds<F: Real>(
    inputs: &BoundInputs<F>,
    eps_q: F,
    g_pi: F,
    g_gamma: F,
) -> Result<ParameterBounds<F>> {
    inputs.validate()?;
    let spec = &inputs.spec;
    let n = F::of_usize(spec.n_items);
    let two = F::lit(2.0);
    let alpha0_bar = inputs.alpha0_bar();
    let rho_pi = spec.rho_pi();
    let eps_pi = inputs
        .priors
        .alpha0()
        .iter()
        .map(|&a0| Tagged::unit_bound((n * eps_q + n * g_pi + a0 + rho_pi * alpha0_bar) / (n + alpha0_bar)))
        .collect();
    let eps_gamma = (0..spec.n_annotators)
        .map(|m| {
            (0..spec.n_classes)
                .map(|k| {
                    let row_bar = inputs.beta0_bar(m, k);
                    (0..spec.n_classes)
                        .map(|k2| {
                            let num = two * n * g_gamma + two * n * eps_q + inputs.priors.beta0(m, k)[k2] + row_bar;
                            let den = n * spec.mu[m] * spec.pi_star[k]
                                - n * g_gamma / spec.gamma(m, k, k2)
                                - n * eps_q
                                + row_bar;
                            ratio_bound(num, den)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(ParameterBounds { eps_pi, eps_gamma })
}

fn ratio_bound<F: Real>(num: F, den: F) -> Tagged<F> {
    if den > F::zero() {
        Tagged::unit_bound(num / den)
    } else {
        Tagged {
            value: F::lit(KL_SENTINEL),
            vacuous: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct NuReport<F: Real> {
    pub nu: F,
    /// The three summands, in printed order.
    pub terms: [F; 3],
    /// ν ≥ 1: the probability statement is empty.
    pub vacuous: bool,
    /// −M D_γ / (33 ln ρ_γ) is positive (happens whenever ρ_γ < 1 and
    /// D_γ > 0), so the first term is at least KN.
    pub first_exponent_positive: bool,
}

/// The failure probability ν of the concentration events:
///
/// ν = KN exp(−M D_γ / (33 ln ρ_γ))
///   + Σ_{m,k,k'} 4 exp(−N t_{k,k'}^(m)² / (3 π*_k μ_m γ*_{k,k'}^(m)))
///   + Σ_k 2 exp(−N r_k² / (3 π*_k))
///
/// `t` is [m][k][k'] with 0 ≤ t ≤ μ_m π*_k γ*_{k,k'}^(m); `r` has 0 ≤ r_k ≤ π*_k.
#[allow(clippy::needless_range_loop)]
pub fn nu_probability<F: Real>(spec: &CrowdSpec<F>, t: &[Vec<Vec<F>>], r: &[F]) -> Result<NuReport<F>> {
    spec.validate()?;
    let (mm, kk) = (spec.n_annotators, spec.n_classes);
    if t.len() != mm || t.iter().any(|mat| mat.len() != kk || mat.iter().any(|row| row.len() != kk)) {
        return Err(Error::domain(format!("t must be {mm}×{kk}×{kk}")));
    }
    if r.len() != kk {
        return Err(Error::domain(format!("r must have {kk} entries")));
    }
    let n = F::of_usize(spec.n_items);
    let three = F::lit(3.0);
    for m in 0..mm {
        for k in 0..kk {
            for k2 in 0..kk {
                let cap = spec.mu[m] * spec.pi_star[k] * spec.gamma(m, k, k2);
                let v = t[m][k][k2];
                if !(v >= F::zero() && v <= cap) {
                    return Err(Error::domain(format!(
                        "t[{m}][{k}][{k2}] = {v} outside [0, {cap}]"
                    )));
                }
            }
        }
    }
    for (k, &rk) in r.iter().enumerate() {
        if !(rk >= F::zero() && rk <= spec.pi_star[k]) {
            return Err(Error::domain(format!("r[{k}] = {rk} outside [0, {}]", spec.pi_star[k])));
        }
    }

    let dgamma = d_gamma(&spec.gamma_star, &spec.mu)?;
    let ln_rho = spec.rho_gamma().ln();
    let exponent = -(F::of_usize(mm) * dgamma) / (F::lit(33.0) * ln_rho);
    let first = clamp_sentinel(F::of_usize(kk) * n * exponent.exp());

    let mut second = F::zero();
    for m in 0..mm {
        for k in 0..kk {
            for k2 in 0..kk {
                let v = t[m][k][k2];
                let denom = three * spec.pi_star[k] * spec.mu[m] * spec.gamma(m, k, k2);
                second = second + F::lit(4.0) * (-(n * v * v) / denom).exp();
            }
        }
    }
    let mut third = F::zero();
    for (k, &rk) in r.iter().enumerate() {
        third = third + F::lit(2.0) * (-(n * rk * rk) / (three * spec.pi_star[k])).exp();
    }
    let nu = clamp_sentinel(first + second + third);
    Ok(NuReport {
        nu,
        terms: [first, second, third],
        vacuous: !(nu < F::one()),
        first_exponent_positive: exponent > F::zero(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundStatus {
    Held,
    Violated,
    HeldVacuously,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct Empirical<F: Real> {
    /// max_n max_k |q(y_n = k) − 1(y_n = k)| over items with known truth.
    pub max_label_error: F,
    /// max_k |E[π_k] − π*_k|.
    pub max_pi_error: Option<F>,
    /// max |E[γ] − γ*|.
    pub max_gamma_error: Option<F>,
    pub label_status: BoundStatus,
    pub pi_status: Option<BoundStatus>,
    pub gamma_status: Option<BoundStatus>,
}

/// Theoretical quantities for one iteration and, once filled, the observed errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct BoundReport<F: Real> {
    pub form: ExponentForm,
    #[serde(rename = "D_pi")]
    pub d_pi: F,
    #[serde(rename = "D_gamma")]
    pub d_gamma: F,
    #[serde(rename = "D")]
    pub d: F,
    pub f_pi: Tagged<F>,
    pub f_gamma: Tagged<F>,
    #[serde(rename = "U")]
    pub u: F,
    pub eps_q_bound: Tagged<F>,
    #[serde(rename = "W_n")]
    pub w_n: Vec<F>,
    pub tilde_eps_q: Vec<Tagged<F>>,
    pub eps_pi_bound: Vec<Tagged<F>>,
    pub eps_gamma_bound: Vec<Vec<Vec<Tagged<F>>>>,
    pub nu: Option<F>,
    pub nu_terms: Option<[F; 3]>,
    pub nu_first_exponent_positive: Option<bool>,
    pub inputs: ReportInputs<F>,
    pub empirical: Option<Empirical<F>>,
}

/// The scalar inputs a report was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct ReportInputs<F: Real> {
    pub eps_pi: F,
    pub eps_gamma: F,
    pub eps_q: F,
    pub eta: F,
    pub rho_pi: F,
    pub rho_gamma: F,
    pub alpha0_bar: F,
    pub beta0_bar_min: F,
    pub g_pi: F,
    pub g_gamma: F,
    pub n_constrained: usize,
    /// Infinite KL divergences are reported as this finite value.
    pub kl_sentinel: f64,
}

/// Optional (t, r) arguments of [`nu_probability`].
pub type NuArgs<F> = (Vec<Vec<Vec<F>>>, Vec<F>);

/// Evaluates every bound for one set of inputs.
pub fn bound_report<F: Real>(
    inputs: &BoundInputs<F>,
    g_pi: F,
    g_gamma: F,
    nu_args: Option<&NuArgs<F>>,
) -> Result<BoundReport<F>> {
    let label = label_error_bound(inputs)?;
    let n_constrained = inputs
        .constraint_counts
        .iter()
        .filter(|c| c.is_constrained())
        .count();
    let tilde_max = label.tilde_max(&inputs.constraint_counts);
    // a label error never exceeds 1, whatever a vacuous bound says
    let params = parameter_error_bounds(
        inputs,
        &ParameterArgs {
            eps_q: label.eps_q.value.min(F::one()),
            tilde_eps_q: tilde_max.value.min(F::one()),
            g_pi,
            g_gamma,
            n_constrained,
        },
    )?;
    let nu = nu_args
        .map(|(t, r)| nu_probability(&inputs.spec, t, r))
        .transpose()?;
    Ok(BoundReport {
        form: inputs.form,
        d_pi: label.d_pi,
        d_gamma: label.d_gamma,
        d: label.d,
        f_pi: label.f_pi,
        f_gamma: label.f_gamma,
        u: label.u,
        eps_q_bound: label.eps_q,
        w_n: label.w_n,
        tilde_eps_q: label.tilde_eps_q,
        eps_pi_bound: params.eps_pi,
        eps_gamma_bound: params.eps_gamma,
        nu: nu.as_ref().map(|v| v.nu),
        nu_terms: nu.as_ref().map(|v| v.terms),
        nu_first_exponent_positive: nu.as_ref().map(|v| v.first_exponent_positive),
        inputs: ReportInputs {
            eps_pi: inputs.eps_pi,
            eps_gamma: inputs.eps_gamma,
            eps_q: inputs.eps_q,
            eta: inputs.eta,
            rho_pi: inputs.spec.rho_pi(),
            rho_gamma: inputs.spec.rho_gamma(),
            alpha0_bar: inputs.alpha0_bar(),
            beta0_bar_min: inputs.beta0_bar_min(),
            g_pi,
            g_gamma,
            n_constrained,
            kl_sentinel: KL_SENTINEL,
        },
        empirical: None,
    })
}

/// max_k |π̂_k − π*_k| and max |γ̂ − γ*| of a fit's parameter estimates.
pub fn parameter_errors<F: Real>(params: &ModelParams<F>, spec: &CrowdSpec<F>) -> Result<Option<(F, F)>> {
    let (Some(pi), Some(gamma)) = (params.pi(), params.gamma()) else {
        return Ok(None);
    };
    if pi.len() != spec.n_classes || gamma.len() != spec.n_annotators {
        return Err(Error::domain("fit parameters do not match the crowd dimensions"));
    }
    let pi_err = pi
        .iter()
        .zip(spec.pi_star.iter())
        .map(|(a, b)| (*a - *b).abs())
        .fold(F::zero(), F::max);
    let mut gamma_err = F::zero();
    for (m, mat) in gamma.iter().enumerate() {
        for (k, row) in mat.iter().enumerate() {
            for (k2, &g) in row.iter().enumerate() {
                gamma_err = gamma_err.max((g - spec.gamma(m, k, k2)).abs());
            }
        }
    }
    Ok(Some((pi_err, gamma_err)))
}

/// max_n max_k |q(y_n = k) − 1(y_n = k)| per item (None where truth is unknown).
pub fn label_errors<F: Real>(fit: &FitResult<F>, truth: &GroundTruth) -> Result<Vec<Option<F>>> {
    if fit.posterior.n_items() != truth.len() {
        return Err(Error::domain(format!(
            "fit has {} items, truth has {}",
            fit.posterior.n_items(),
            truth.len()
        )));
    }
    Ok(fit
        .posterior
        .rows()
        .zip(truth.labels())
        .map(|(row, y)| {
            y.map(|y| {
                row.iter()
                    .enumerate()
                    .map(|(k, &q)| if k == y { (F::one() - q).abs() } else { q.abs() })
                    .fold(F::zero(), F::max)
            })
        })
        .collect())
}

/// Fills the empirical errors of `fit` into `report` and judges each bound.
pub fn empirical_vs_bound<F: Real>(
    fit: &FitResult<F>,
    truth: &GroundTruth,
    spec: &CrowdSpec<F>,
    report: &BoundReport<F>,
) -> Result<BoundReport<F>> {
    if report.tilde_eps_q.len() != truth.len() || spec.n_items != truth.len() {
        return Err(Error::domain("report, truth and crowd disagree on the item count"));
    }
    let errors = label_errors(fit, truth)?;
    let max_label_error = errors.iter().flatten().copied().fold(F::zero(), F::max);

    let mut any_checked = false;
    let mut violated = false;
    for (err, bound) in errors.iter().zip(&report.tilde_eps_q) {
        if let (Some(e), false) = (err, bound.vacuous) {
            any_checked = true;
            violated |= *e > bound.value;
        }
    }
    let label_status = judge(any_checked, violated);

    let (mut max_pi_error, mut max_gamma_error, mut pi_status, mut gamma_status) = (None, None, None, None);
    if let (Some(pi), Some(gamma)) = (fit.params.pi(), fit.params.gamma()) {
        if let Some((pe, ge)) = parameter_errors(&fit.params, spec)? {
            max_pi_error = Some(pe);
            max_gamma_error = Some(ge);
        }
        let (mut checked, mut bad) = (false, false);
        for (k, b) in report.eps_pi_bound.iter().enumerate() {
            if !b.vacuous {
                checked = true;
                bad |= (pi[k] - spec.pi_star[k]).abs() > b.value;
            }
        }
        pi_status = Some(judge(checked, bad));
        let (mut checked, mut bad) = (false, false);
        for (m, mat) in report.eps_gamma_bound.iter().enumerate() {
            for (k, row) in mat.iter().enumerate() {
                for (k2, b) in row.iter().enumerate() {
                    if !b.vacuous {
                        checked = true;
                        bad |= (gamma[m][k][k2] - spec.gamma(m, k, k2)).abs() > b.value;
                    }
                }
            }
        }
        gamma_status = Some(judge(checked, bad));
    }
    let mut out = report.clone();
    out.empirical = Some(Empirical {
        max_label_error,
        max_pi_error,
        max_gamma_error,
        label_status,
        pi_status,
        gamma_status,
    });
    Ok(out)
}

fn judge(any_checked: bool, violated: bool) -> BoundStatus {
    match (any_checked, violated) {
        (_, true) => BoundStatus::Violated,
        (true, false) => BoundStatus::Held,
        (false, false) => BoundStatus::HeldVacuously,
    }
}
