//! Closed-form constants and envelopes for the moment bounds, the tail
//! bounds and the truncation-convergence construction.
//!
//! Throughout `r = β/α`. Every envelope comes in two forms: a `*_formula`
//! function that evaluates the expression for any inputs, and a checked
//! function that refuses to return a value outside the region where the
//! bound is claimed.

use statrs::function::gamma::gamma;

use crate::coefficients::{linear_growth_const, lip_n, Coefficient, CoefficientSpec};
use crate::error::{Error, Result};
use crate::kernel::ModelParams;
use crate::specfun::cstar;

/// Rate used for `C_{α,β,γ}` when `L_b = 0`, where `γ = 2L_b` degenerates.
pub const DEFAULT_GAMMA_FALLBACK: f64 = 1.0;

/// Default value of the order parameter `c`.
pub const DEFAULT_C: f64 = 4.0;

/// Inputs of [`ModelConstants`] that come from the coefficients and data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantInputs {
    pub l_b: f64,
    pub l_sigma: f64,
    /// `Lip_{e^N}(b)` at the level of interest.
    pub l_nb: f64,
    /// `Lip_{e^N}(σ)` at the level of interest.
    pub l_nsigma: f64,
    pub u0_sup: f64,
    pub sigma_sup: Option<f64>,
}

/// All derived constants for one model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConstants {
    pub params: ModelParams,
    pub l_b: f64,
    pub l_sigma: f64,
    pub l_nb: f64,
    pub l_nsigma: f64,
    pub u0_sup: f64,
    pub sigma_sup: Option<f64>,
    /// `C★`
    pub cstar: f64,
    /// `Γ(1 - r)`
    pub gamma_r: f64,
    /// `C₀ = 4(‖u₀‖_∞ + 1)`
    pub c0: f64,
    /// `C_# = 4√(C★ Γ(1-r))`
    pub chash: f64,
    /// Rate `γ` entering `C_{α,β,γ}`: `2L_b`, or the fallback when `L_b = 0`.
    pub gamma_bounded: f64,
    /// `C_{α,β,γ} = ((1-r)/(2γ))^{(1-r)/2} e^{-(1-r)/2}`
    pub c_abg: f64,
    /// `C⋆ = max(2, 4 C_{α,β,γ} √C★ / √(1-r))`
    pub cstar_big: f64,
}

impl ModelConstants {
    pub fn new(params: ModelParams, inputs: ConstantInputs) -> Result<Self> {
        Self::with_cstar(params, inputs, cstar(params.alpha(), params.beta())?.value)
    }

    /// Same as [`ModelConstants::new`] with `C★` supplied.
    pub fn with_cstar(params: ModelParams, inputs: ConstantInputs, cstar: f64) -> Result<Self> {
        let ConstantInputs {
            l_b,
            l_sigma,
            l_nb,
            l_nsigma,
            u0_sup,
            sigma_sup,
        } = inputs;
        for (name, v) in [
            ("L_b", l_b),
            ("L_sigma", l_sigma),
            ("L_N,b", l_nb),
            ("L_N,sigma", l_nsigma),
            ("u0_sup", u0_sup),
            ("sigma_sup", sigma_sup.unwrap_or(0.0)),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if !(cstar > 0.0 && cstar.is_finite()) {
            return Err(Error::Domain(format!("C★ must be positive, got {cstar}")));
        }
        let r = params.ratio();
        let gamma_r = gamma(1.0 - r);
        let gamma_bounded = if l_b > 0.0 {
            2.0 * l_b
        } else {
            DEFAULT_GAMMA_FALLBACK
        };
        let c_abg = c_abg(r, gamma_bounded);
        Ok(Self {
            params,
            l_b,
            l_sigma,
            l_nb,
            l_nsigma,
            u0_sup,
            sigma_sup,
            cstar,
            gamma_r,
            c0: 4.0 * (u0_sup + 1.0),
            chash: 4.0 * (cstar * gamma_r).sqrt(),
            gamma_bounded,
            c_abg,
            cstar_big: cstar_big(cstar, r, c_abg),
        })
    }

    /// Constants for concrete coefficients, with the Lipschitz constants
    /// taken at truncation level `level`.
    pub fn from_coefficients(
        params: ModelParams,
        b: &CoefficientSpec,
        sigma: &CoefficientSpec,
        u0_sup: f64,
        level: f64,
    ) -> Result<Self> {
        const SCAN: f64 = 1e4;
        const RESOLUTION: usize = 4000;
        let inputs = ConstantInputs {
            l_b: linear_growth_const(b, SCAN)?,
            l_sigma: linear_growth_const(sigma, SCAN)?,
            l_nb: lip_n(b, level.exp(), RESOLUTION),
            l_nsigma: lip_n(sigma, level.exp(), RESOLUTION),
            u0_sup,
            sigma_sup: sigma.sup_norm(),
        };
        Self::new(params, inputs)
    }

    pub fn ratio(&self) -> f64 {
        self.params.ratio()
    }

    /// `C★ Γ(1-r)`
    pub fn cg(&self) -> f64 {
        self.cstar * self.gamma_r
    }

    /// `A₀ = max(4, C_# L_σ/√(C★Γ(1-r)), (C★Γ(1-r))^{-2})`
    pub fn a0(&self) -> f64 {
        let cg = self.cg();
        4f64.max(self.chash * self.l_sigma / cg.sqrt())
            .max(cg.powi(-2))
    }

    /// Smallest `k` for which the linear-growth moment bound is claimed.
    pub fn min_moment_order(&self) -> f64 {
        if self.l_sigma > 0.0 {
            2f64.max(self.l_b.powf(1.0 - self.ratio()) / (self.l_sigma * self.l_sigma))
        } else {
            f64::INFINITY
        }
    }

    /// `u0_sup + sigma_sup + 1`
    fn data_scale(&self) -> Result<f64> {
        let s = self.sigma_sup.ok_or_else(|| {
            Error::Precondition("bound needs a bounded diffusion coefficient".into())
        })?;
        Ok(self.u0_sup + s + 1.0)
    }
}

/// `((1-r)/(2γ))^{(1-r)/2} e^{-(1-r)/2}`, the constant `C(a, b)` of
/// `t^a e^{-bt} ≤ (a/b)^a e^{-a}` at `a = (1-r)/2`, `b = γ`.
pub fn c_abg(r: f64, gamma: f64) -> f64 {
    let a = (1.0 - r) / 2.0;
    (a / gamma).powf(a) * (-a).exp()
}

/// `max(2, 4 C_{α,β,γ} √C★ / √(1-r))`
pub fn cstar_big(cstar: f64, r: f64, c_abg: f64) -> f64 {
    2f64.max(4.0 * c_abg * cstar.sqrt() / (1.0 - r).sqrt())
}

/// `C₀^k exp(4 (C_# L_σ)^{2/(1-r)} k^{1+1/(1-r)} t)`
pub fn moment_linear_formula(c0: f64, chash: f64, l_sigma: f64, r: f64, k: f64, t: f64) -> f64 {
    let q = 1.0 / (1.0 - r);
    c0.powf(k) * (4.0 * (chash * l_sigma).powf(2.0 * q) * k.powf(1.0 + q) * t).exp()
}

/// Moment envelope for `L_σ > 0`.
pub fn moment_bound_linear(consts: &ModelConstants, k: f64, t: f64) -> Result<f64> {
    if !(consts.l_sigma > 0.0) {
        return Err(Error::Precondition(
            "linear-growth moment bound needs L_sigma > 0".into(),
        ));
    }
    let k_min = consts.min_moment_order();
    if !(k >= k_min) {
        return Err(Error::Precondition(format!(
            "moment order {k} below max(2, L_b^(1-r)/L_sigma^2) = {k_min}"
        )));
    }
    if !(t > 0.0) {
        return Err(Error::Precondition(format!(
            "time must be positive, got {t}"
        )));
    }
    Ok(moment_linear_formula(
        consts.c0,
        consts.chash,
        consts.l_sigma,
        consts.ratio(),
        k,
        t,
    ))
}

/// `C⋆^k e^{kγt} (u0 + σ + 1)^k k^{k/2}`; with `γ = 2L_b` this is the
/// bounded-diffusion envelope.
pub fn moment_bounded_formula(cstar_big: f64, gamma: f64, scale: f64, k: f64, t: f64) -> f64 {
    (cstar_big * scale).powf(k) * (k * gamma * t).exp() * k.powf(k / 2.0)
}

/// Moment envelope for bounded `σ`.
pub fn moment_bound_bounded_sigma(consts: &ModelConstants, k: f64, t: f64) -> Result<f64> {
    let scale = consts.data_scale()?;
    if !(k >= 2.0) {
        return Err(Error::Precondition(format!("moment order {k} below 2")));
    }
    if !(t >= 0.0) {
        return Err(Error::Precondition(format!(
            "time must be non-negative, got {t}"
        )));
    }
    Ok(moment_bounded_formula(
        consts.cstar_big,
        consts.gamma_bounded,
        scale,
        k,
        t,
    ))
}

/// `4 log C₀ ∨ 8 C_#^{2/(1-r)} t max(2^{1/(1-r)} L_σ^{2/(1-r)}, L_b)`; with
/// `t = T` this is `c_T`.
pub fn tail_linear_threshold(consts: &ModelConstants, t: f64) -> f64 {
    let q = 1.0 / (1.0 - consts.ratio());
    let growth = 2f64.powf(q) * consts.l_sigma.powf(2.0 * q);
    (4.0 * consts.c0.ln()).max(8.0 * consts.chash.powf(2.0 * q) * t * growth.max(consts.l_b))
}

/// `exp(-N^{2-r} / ((C_# L_σ)² (8t)^{1-r}))`
pub fn tail_linear_formula(chash: f64, l_sigma: f64, r: f64, n: f64, t: f64) -> f64 {
    (-n.powf(2.0 - r) / ((chash * l_sigma).powi(2) * (8.0 * t).powf(1.0 - r))).exp()
}

/// Tail envelope for `P(|u_{N+1}(t,x)| ≥ e^N)` when `L_σ > 0`.
pub fn tail_bound_linear(consts: &ModelConstants, n: f64, t: f64) -> Result<f64> {
    if !(consts.l_sigma > 0.0) {
        return Err(Error::Precondition(
            "linear-growth tail bound needs L_sigma > 0".into(),
        ));
    }
    let threshold = tail_linear_threshold(consts, t);
    if !(n >= threshold) {
        return Err(Error::Precondition(format!(
            "level {n} below the validity threshold {threshold}"
        )));
    }
    Ok(tail_linear_formula(
        consts.chash,
        consts.l_sigma,
        consts.ratio(),
        n,
        t,
    ))
}

/// `1/2 + log C⋆ + 2L_b t + log(u0 + σ + 1)`
pub fn tail_bounded_threshold(consts: &ModelConstants, t: f64) -> Result<f64> {
    Ok(0.5 + consts.cstar_big.ln() + 2.0 * consts.l_b * t + consts.data_scale()?.ln())
}

/// `exp(-e^{2N - 4L_b t} / (e C⋆² scale²))`
pub fn tail_bounded_formula(cstar_big: f64, scale: f64, l_b: f64, n: f64, t: f64) -> f64 {
    (-(2.0 * n - 4.0 * l_b * t).exp() / (std::f64::consts::E * (cstar_big * scale).powi(2))).exp()
}

/// Tail envelope for bounded `σ`.
pub fn tail_bound_bounded_sigma(consts: &ModelConstants, n: f64, t: f64) -> Result<f64> {
    let threshold = tail_bounded_threshold(consts, t)?;
    if !(n >= threshold) {
        return Err(Error::Precondition(format!(
            "level {n} below the validity threshold {threshold}"
        )));
    }
    Ok(tail_bounded_formula(
        consts.cstar_big,
        consts.data_scale()?,
        consts.l_b,
        n,
        t,
    ))
}

/// `16 (C★Γ(1-r))^{1/(1-r)} A₀^{2/(1-r)} c^{1/(1-r)} L_{N,σ}^{2/(1-r)}`
pub fn gamma_choice_formula(cg: f64, r: f64, a0: f64, c: f64, l_nsigma: f64) -> f64 {
    let q = 1.0 / (1.0 - r);
    16.0 * cg.powf(q) * a0.powf(2.0 * q) * c.powf(q) * l_nsigma.powf(2.0 * q)
}

/// Rate `γ` of the convergence construction.
pub fn gamma_choice(consts: &ModelConstants, c: f64) -> Result<f64> {
    if !(c >= 1.0) {
        return Err(Error::Precondition(format!(
            "order parameter c must be >= 1, got {c}"
        )));
    }
    if !(consts.l_nsigma > 0.0) {
        return Err(Error::Precondition(
            "gamma choice needs L_N,sigma > 0".into(),
        ));
    }
    Ok(gamma_choice_formula(
        consts.cg(),
        consts.ratio(),
        consts.a0(),
        c,
        consts.l_nsigma,
    ))
}

/// `N_T` and `c_T` of the convergence construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceThreshold {
    pub n_t: f64,
    pub c_t: f64,
}

pub fn convergence_threshold(
    consts: &ModelConstants,
    c: f64,
    t_end: f64,
) -> Result<ConvergenceThreshold> {
    if !(c >= 1.0) {
        return Err(Error::Precondition(format!(
            "order parameter c must be >= 1, got {c}"
        )));
    }
    let r = consts.ratio();
    let n_t = c.powf(1.0 / (1.0 - r))
        * (consts.chash * consts.l_sigma).powf(2.0 / (2.0 - r))
        * (consts.cg() * consts.a0().powi(2)).powf(1.0 / ((1.0 - r) * (2.0 - r)))
        * t_end
        / (1.0 - r).powf(1.0 / (2.0 - r));
    Ok(ConvergenceThreshold {
        n_t,
        c_t: tail_linear_threshold(consts, t_end),
    })
}

/// `L_b/γ + 4√(C★Γ(1-r)k) L_σ/(2γ)^{(1-r)/2}` at
/// `γ = 4(4√(C★Γ(1-r)k) L_σ)^{2/(1-r)}`, the contraction factor of the
/// linear-growth moment argument.
pub fn contraction_constant(consts: &ModelConstants, k: f64) -> Result<f64> {
    if !(consts.l_sigma > 0.0) {
        return Err(Error::Precondition(
            "contraction factor needs L_sigma > 0".into(),
        ));
    }
    let r = consts.ratio();
    let x = 4.0 * (consts.cg() * k).sqrt() * consts.l_sigma;
    let gamma = 4.0 * x.powf(2.0 / (1.0 - r));
    Ok(consts.l_b / gamma + x / (2.0 * gamma).powf((1.0 - r) / 2.0))
}

/// Default `K₀` of the bounded-diffusion convergence estimate:
/// `2L_b e^{2L_b T} C⋆ √k (u0 + σ + 1) T + ‖σ‖_∞`.
pub fn k0_default(consts: &ModelConstants, k: f64, t_end: f64) -> Result<f64> {
    let scale = consts.data_scale()?;
    let sigma = consts.sigma_sup.unwrap_or(0.0);
    Ok(2.0
        * consts.l_b
        * (2.0 * consts.l_b * t_end).exp()
        * consts.cstar_big
        * k.sqrt()
        * scale
        * t_end
        + sigma)
}

/// `N₀ = inf{N > 1 : Lip_{e^N}(σ) > 1}`, scanned in steps of `step` up to
/// `max_level` and refined by bisection; `None` if no level qualifies.
pub fn n0<C: Coefficient + ?Sized>(sigma: &C, step: f64, max_level: f64) -> Option<f64> {
    const RESOLUTION: usize = 2000;
    let above = |n: f64| lip_n(sigma, n.exp(), RESOLUTION) > 1.0;
    if above(1.0) {
        return Some(1.0);
    }
    let mut lo = 1.0;
    let mut hi = lo + step;
    while !above(hi) {
        if hi >= max_level {
            return None;
        }
        lo = hi;
        hi += step;
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if above(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Outcome of checking the transfer lemma on sampled data.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferVerdict {
    /// Grid times `T` where `sup_{t≤T} e^{-at} f(t) ≤ e^{-aT} g(T)` fails.
    pub hypothesis_failures: Vec<f64>,
    /// Grid times `T` where `sup_{t≤T} f(t) ≤ g(T)` fails.
    pub conclusion_failures: Vec<f64>,
}

impl TransferVerdict {
    pub fn hypothesis_holds(&self) -> bool {
        self.hypothesis_failures.is_empty()
    }

    pub fn conclusion_holds(&self) -> bool {
        self.conclusion_failures.is_empty()
    }

    /// The lemma is consistent with the data unless the hypothesis holds
    /// and the conclusion fails.
    pub fn consistent(&self) -> bool {
        !self.hypothesis_holds() || self.conclusion_holds()
    }
}

/// Check both sides of the transfer lemma on samples `(t_i, f(t_i))` with
/// `0 < t_i < T₀`, at every sample time.
pub fn lemma25_transfer(
    samples: &[(f64, f64)],
    g: impl Fn(f64) -> f64,
    a: f64,
    t0: f64,
) -> TransferVerdict {
    let mut pts: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|&(t, _)| t > 0.0 && t < t0)
        .collect();
    pts.sort_by(|x, y| x.0.total_cmp(&y.0));
    let tol = |v: f64| 1e-12 * v.abs().max(1e-300);
    let mut hypothesis_failures = Vec::new();
    let mut conclusion_failures = Vec::new();
    let mut sup_weighted = f64::NEG_INFINITY;
    let mut sup_plain = f64::NEG_INFINITY;
    for &(t, f) in &pts {
        sup_weighted = sup_weighted.max((-a * t).exp() * f);
        sup_plain = sup_plain.max(f);
        let gt = g(t);
        let rhs = (-a * t).exp() * gt;
        if sup_weighted > rhs + tol(rhs) {
            hypothesis_failures.push(t);
        }
        if sup_plain > gt + tol(gt) {
            conclusion_failures.push(t);
        }
    }
    TransferVerdict {
        hypothesis_failures,
        conclusion_failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSTAR_2_05: f64 = 0.217_451_929_993_410_4;

    fn consts(l_b: f64, l_sigma: f64, u0: f64, sigma_sup: Option<f64>) -> ModelConstants {
        let p = ModelParams::new(2.0, 0.5).unwrap();
        let inputs = ConstantInputs {
            l_b,
            l_sigma,
            l_nb: l_b,
            l_nsigma: l_sigma,
            u0_sup: u0,
            sigma_sup,
        };
        ModelConstants::with_cstar(p, inputs, CSTAR_2_05).unwrap()
    }

    #[test]
    fn basic_constants() {
        let c = consts(0.0, 1.0, 0.0, None);
        assert_eq!(c.c0, 4.0);
        let g = gamma(0.75);
        assert!((c.chash - 4.0 * (CSTAR_2_05 * g).sqrt()).abs() < 1e-14);
        let c = consts(1.0, 1.0, 1.0, Some(1.0));
        assert_eq!(c.gamma_bounded, 2.0);
        let want = (0.75f64 / 4.0).powf(0.375) * (-0.375f64).exp();
        assert!((c.c_abg - want).abs() < 1e-15);
    }

    #[test]
    fn moment_linear_structure() {
        let c = consts(0.0, 1.0, 0.0, None);
        let b1 = moment_bound_linear(&c, 2.0, 1.0).unwrap();
        let want = 16.0 * (4.0 * c.chash.powf(8.0 / 3.0) * 2f64.powf(7.0 / 3.0)).exp();
        assert!((b1 / want - 1.0).abs() < 1e-12);
        let b2 = moment_bound_linear(&c, 2.0, 2.0).unwrap();
        assert!((b2 / (16.0 * (b1 / 16.0).powi(2)) - 1.0).abs() < 1e-12);
        let tiny = moment_bound_linear(&c, 2.0, 1e-12).unwrap();
        assert!((tiny - 16.0).abs() < 1e-6);
        assert!(moment_bound_linear(&c, 1.5, 1.0).is_err());
        assert!(moment_bound_linear(&consts(0.0, 0.0, 0.0, Some(0.0)), 2.0, 1.0).is_err());
    }

    #[test]
    fn moment_bounded_structure() {
        let c = consts(0.0, 0.0, 0.0, Some(0.0));
        let at0 = moment_bound_bounded_sigma(&c, 2.0, 0.0).unwrap();
        assert!((at0 - c.cstar_big.powi(2) * 2.0).abs() < 1e-12);
        let c = consts(1.0, 0.0, 0.0, Some(0.0));
        let ratio = moment_bound_bounded_sigma(&c, 2.0, 1.0).unwrap()
            / moment_bound_bounded_sigma(&c, 2.0, 0.0).unwrap();
        assert!((ratio - 4f64.exp()).abs() < 1e-9);
        assert!(moment_bound_bounded_sigma(&consts(0.0, 1.0, 0.0, None), 2.0, 1.0).is_err());
    }

    #[test]
    fn tail_linear_structure() {
        let c = consts(0.0, 1.0, 0.0, None);
        let t = 1.0;
        let n0 = tail_linear_threshold(&c, t);
        let v = tail_bound_linear(&c, n0, t).unwrap();
        assert!(v > 0.0 && v < 1.0);
        assert!(tail_bound_linear(&c, 0.9 * n0, t).is_err());
        // r = 0.5: doubling N scales the exponent by 2^{1.5}
        let p = ModelParams::new(1.5, 0.75).unwrap();
        let a = tail_linear_formula(2.0, 1.0, p.ratio(), 10.0, 1.0).ln();
        let b = tail_linear_formula(2.0, 1.0, p.ratio(), 20.0, 1.0).ln();
        assert!((b / a - 2f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn tail_linear_at_sigma_threshold_is_exp_minus_two_n() {
        // when the L_σ branch sets the threshold the exponent is exactly 2N
        let c = consts(0.0, 1.0, 0.0, None);
        let n = 200.0;
        let q = 1.0 / (1.0 - c.ratio());
        let t = n / (8.0 * c.chash.powf(2.0 * q) * 2f64.powf(q));
        assert!((tail_linear_threshold(&c, t) - n).abs() < 1e-9 * n);
        let v = tail_bound_linear(&c, n * (1.0 + 1e-12), t).unwrap();
        assert!((v.ln() + 2.0 * n).abs() < 1e-6 * n);
    }

    #[test]
    fn tail_bounded_structure() {
        let v = tail_bounded_formula(2.0, 1.0, 0.0, 2.0, 1.0);
        assert!((v - (-(3f64.exp()) / 4.0).exp()).abs() < 1e-15);
        let a = tail_bounded_formula(2.0, 1.0, 0.0, 3.0, 1.0).ln();
        let b = tail_bounded_formula(2.0, 1.0, 0.0, 4.0, 1.0).ln();
        assert!((b / a - 2f64.exp()).abs() < 1e-12);
        let c = consts(0.5, 0.0, 0.0, Some(1.0));
        let n0 = tail_bounded_threshold(&c, 1.0).unwrap();
        let at = tail_bound_bounded_sigma(&c, n0, 1.0).unwrap();
        assert!((at - (-1f64).exp()).abs() < 1e-12);
        assert!(tail_bound_bounded_sigma(&c, n0 - 0.1, 1.0).is_err());
    }

    #[test]
    fn gamma_choice_structure() {
        let r = 0.5;
        let cg = 0.3;
        let g = gamma_choice_formula(cg, r, 4.0, 1.0, 1.0);
        assert!((g - 16.0 * cg * cg * 256.0).abs() < 1e-9);
        let g2 = gamma_choice_formula(cg, r, 4.0, 2.0, 1.0);
        assert!((g2 / g - 4.0).abs() < 1e-12);
        assert!(gamma_choice_formula(cg, r, 4.0, 1.0, 1.5) > g);
        let c = consts(1.0, 1.0, 0.0, None);
        assert!(gamma_choice(&c, 0.5).is_err());
        assert!(gamma_choice(&c, 2.0).unwrap() > 0.0);
    }

    #[test]
    fn thresholds_scale_with_horizon() {
        let c = consts(1.0, 1.0, 0.0, None);
        let a = convergence_threshold(&c, 2.0, 1.0).unwrap();
        let b = convergence_threshold(&c, 2.0, 3.0).unwrap();
        assert!((b.n_t / a.n_t - 3.0).abs() < 1e-12);
        // L_b dominant
        let c = consts(1e3, 0.1, 0.0, None);
        let q = 1.0 / (1.0 - c.ratio());
        let th = convergence_threshold(&c, 2.0, 1.0).unwrap();
        assert!((th.c_t - 8.0 * c.chash.powf(2.0 * q) * 1e3).abs() < 1e-9 * th.c_t);
    }

    #[test]
    fn contraction_second_term_is_universal() {
        let c = consts(0.0, 1.3, 0.0, None);
        let v = contraction_constant(&c, 2.0).unwrap();
        assert!((v - 8f64.powf(-0.375)).abs() < 1e-14);
    }

    #[test]
    fn n0_levels() {
        let half = CoefficientSpec::linear(0.5).unwrap();
        assert_eq!(n0(&half, 0.5, 20.0), None);
        let two = CoefficientSpec::linear(2.0).unwrap();
        assert_eq!(n0(&two, 0.5, 20.0), Some(1.0));
        let sine = CoefficientSpec::bounded_sine(1.0, 1.0).unwrap();
        assert_eq!(n0(&sine, 0.5, 20.0), None);
        let ll = CoefficientSpec::loglip(1.3).unwrap();
        let n = n0(&ll, 0.5, 20.0).unwrap();
        assert!(n >= 1.0);
        assert!(lip_n(&ll, (n + 1e-6).exp(), 2000) > 1.0);
    }

    #[test]
    fn transfer_lemma_examples() {
        let constant: Vec<(f64, f64)> = (1..10).map(|i| (i as f64 * 0.1, 2.0)).collect();
        let v = lemma25_transfer(&constant, |_| 2.0, 1.0, 1.0);
        assert!(v.conclusion_holds() && v.consistent());

        let expo: Vec<(f64, f64)> = (1..10)
            .map(|i| (i as f64 * 0.1, (i as f64 * 0.1).exp()))
            .collect();
        let v = lemma25_transfer(&expo, f64::exp, 1.0, 1.0);
        assert!(v.hypothesis_holds() && v.conclusion_holds());

        let lin: Vec<(f64, f64)> = (1..10).map(|i| (i as f64 * 0.1, i as f64 * 0.1)).collect();
        let v = lemma25_transfer(&lin, |t| t / 2.0, 1.0, 1.0);
        assert!(!v.hypothesis_holds());
        assert!(v.hypothesis_failures.contains(&0.1));
    }
}
