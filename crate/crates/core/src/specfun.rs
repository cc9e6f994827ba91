//! Gamma, the one-parameter Mittag-Leffler function on the real line, and the
//! kernel L² constant C★.
//!
//! `E_β(z) = Σ_{ℓ≥0} z^ℓ / Γ(1 + βℓ)` is evaluated in one of four regimes:
//!
//! * `β = 1`: `E_1(z) = e^z`.
//! * Power series, for `z ≥ 0` and for small negative `z` as long as the
//!   accumulated rounding (`ε · Σ|terms|`) stays below `series_tol` relative
//!   to the result.
//! * Algebraic asymptotic expansion
//!   `E_β(-s) ≈ Σ_{m=1}^{M} (-1)^{m+1} s^{-m} / Γ(1-βm)` for
//!   `s ≥ regime_switch_z`, truncated at the smallest term, accepted only when
//!   that term is below `series_tol` relative to the result.
//! * Otherwise the positive integral representation
//!   `E_β(-s) = (s sin βπ / βπ) ∫_0^∞ exp(-y^{1/β}) / (y² + 2sy cos βπ + s²) dy`,
//!   which has no cancellation for any `s > 0`.

use std::f64::consts::PI;

use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::quad::{integrate_breaks, QuadConfig};

/// Euler gamma function for positive arguments.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma_fn requires x > 0, got {x}")));
    }
    if x == x.floor() && x <= 21.0 {
        // exact factorials
        return Ok((1..x as u64).map(|k| k as f64).product());
    }
    Ok(gamma(x))
}

/// `1/Γ(x)` on the whole real line; zero at the poles.
pub(crate) fn rgamma(x: f64) -> f64 {
    if x > 0.0 {
        if x > 170.0 {
            (-ln_gamma(x)).exp()
        } else {
            1.0 / gamma(x)
        }
    } else if x == x.floor() {
        0.0
    } else {
        // reflection: 1/Γ(x) = sin(πx) Γ(1-x) / π
        let g = 1.0 - x;
        let sin = (PI * x).sin();
        if g > 170.0 {
            sin * (ln_gamma(g).exp()) / PI
        } else {
            sin * gamma(g) / PI
        }
    }
}

/// Evaluation policy for [`MittagLeffler`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlEvalConfig {
    pub series_tol: f64,
    pub series_max_terms: usize,
    pub regime_switch_z: f64,
}

impl Default for MlEvalConfig {
    fn default() -> Self {
        Self {
            series_tol: 1e-14,
            series_max_terms: 1000,
            regime_switch_z: 15.0,
        }
    }
}

impl MlEvalConfig {
    pub fn new(series_tol: f64, series_max_terms: usize, regime_switch_z: f64) -> Result<Self> {
        let cfg = Self {
            series_tol,
            series_max_terms,
            regime_switch_z,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.series_tol > 0.0 && self.series_tol <= 1e-6) {
            return Err(Error::Domain(format!(
                "series_tol must lie in (0, 1e-6], got {}",
                self.series_tol
            )));
        }
        if self.series_max_terms < 50 {
            return Err(Error::Domain(format!(
                "series_max_terms must be at least 50, got {}",
                self.series_max_terms
            )));
        }
        if !(self.regime_switch_z > 0.0) {
            return Err(Error::Domain(format!(
                "regime_switch_z must be positive, got {}",
                self.regime_switch_z
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlRegime {
    Exponential,
    Series,
    Asymptotic,
    Integral,
}

/// `E_β` for a fixed order `β ∈ (0, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct MittagLeffler {
    beta: f64,
    cfg: MlEvalConfig,
}

/// Below this value of `s^{1/β}` the series is attempted for `E_β(-s)`;
/// beyond it `Σ|terms| ≈ e^{s^{1/β}}/β` already costs several digits.
const SERIES_ATTEMPT_LIMIT: f64 = 6.0;

/// `exp(-y^{1/β})` is below 1e-19 past `y^{1/β} = 44`.
const INTEGRAL_CUTOFF: f64 = 44.0;

impl MittagLeffler {
    pub fn new(beta: f64, cfg: MlEvalConfig) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::Domain(format!(
                "Mittag-Leffler order must lie in (0, 1], got {beta}"
            )));
        }
        cfg.validate()?;
        Ok(Self { beta, cfg })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn config(&self) -> &MlEvalConfig {
        &self.cfg
    }

    pub fn eval(&self, z: f64) -> Result<f64> {
        self.eval_with_regime(z).map(|(v, _)| v)
    }

    /// Value together with the regime that produced it.
    pub fn eval_with_regime(&self, z: f64) -> Result<(f64, MlRegime)> {
        if z.is_nan() {
            return Err(Error::Domain("Mittag-Leffler argument is NaN".into()));
        }
        if z == 0.0 {
            return Ok((1.0, MlRegime::Series));
        }
        if self.beta == 1.0 {
            return Ok((z.exp(), MlRegime::Exponential));
        }
        if z > 0.0 {
            return self.series(z).map(|(v, _)| (v, MlRegime::Series));
        }
        let s = -z;
        if s.powf(1.0 / self.beta) <= SERIES_ATTEMPT_LIMIT && s <= self.cfg.regime_switch_z {
            if let Ok((v, abs_sum)) = self.series(z) {
                if f64::EPSILON * abs_sum <= self.cfg.series_tol * v.abs() {
                    return Ok((v, MlRegime::Series));
                }
            }
        }
        if s >= self.cfg.regime_switch_z {
            if let Some((v, err)) = self.asymptotic(s) {
                if err <= self.cfg.series_tol * v.abs() {
                    return Ok((v, MlRegime::Asymptotic));
                }
            }
        }
        self.integral(s).map(|v| (v, MlRegime::Integral))
    }

    /// Power series. Returns the sum and `Σ|terms|`.
    pub fn series(&self, z: f64) -> Result<(f64, f64)> {
        let mut sum = 1.0;
        let mut abs_sum = 1.0;
        let mut last = 1.0;
        let ln_abs = z.abs().ln();
        for l in 1..self.cfg.series_max_terms {
            let lf = l as f64;
            let arg = 1.0 + self.beta * lf;
            let mag = if arg < 170.0 {
                z.abs().powi(l as i32) / gamma(arg)
            } else {
                (lf * ln_abs - ln_gamma(arg)).exp()
            };
            let term = if z < 0.0 && l % 2 == 1 { -mag } else { mag };
            sum += term;
            abs_sum += mag;
            last = term;
            if !sum.is_finite() {
                break;
            }
            // terms decrease monotonically once βℓ exceeds |z|^{1/β}
            if mag <= 0.1 * self.cfg.series_tol * sum.abs()
                && lf * self.beta > z.abs().powf(1.0 / self.beta)
            {
                return Ok((sum, abs_sum));
            }
        }
        Err(Error::NonConvergence {
            terms: self.cfg.series_max_terms,
            partial_sum: sum,
            last_term: last,
        })
    }

    /// Optimally truncated asymptotic expansion of `E_β(-s)`; returns the
    /// value and the magnitude bound of the first omitted term.
    pub fn asymptotic(&self, s: f64) -> Option<(f64, f64)> {
        if self.beta >= 1.0 || s <= 0.0 {
            return None;
        }
        let ln_s = s.ln();
        // |Γ(βm)| s^{-m} / π bounds |s^{-m}/Γ(1-βm)| from above.
        let bound = |m: usize| (ln_gamma(self.beta * m as f64) - m as f64 * ln_s).exp() / PI;
        let mut sum = 0.0;
        let mut m = 1;
        let mut current = bound(1);
        loop {
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            sum += sign * rgamma(1.0 - self.beta * m as f64) * (-(m as f64) * ln_s).exp();
            let next = bound(m + 1);
            if next >= current || m >= 200 {
                return Some((sum, next));
            }
            current = next;
            m += 1;
        }
    }

    /// Integral representation of `E_β(-s)` for `0 < β < 1`, `s > 0`.
    pub fn integral(&self, s: f64) -> Result<f64> {
        let beta = self.beta;
        if !(beta < 1.0) || !(s > 0.0) {
            return Err(Error::Domain(format!(
                "integral representation needs beta < 1 and s > 0 (beta={beta}, s={s})"
            )));
        }
        let (sin_bp, cos_bp) = (beta * PI).sin_cos();
        let upper = INTEGRAL_CUTOFF.powf(beta);
        let inv_beta = 1.0 / beta;
        let decay = |y: f64| (-y.powf(inv_beta)).exp();
        let qcfg = QuadConfig {
            abs_tol: 0.0,
            rel_tol: self.cfg.series_tol.max(1e-13),
            max_intervals: 4000,
        };
        let marks = [0.1 * s, s, 0.25 * upper];

        if cos_bp >= 0.0 {
            let integrand = |y: f64| decay(y) / (y * y + 2.0 * s * y * cos_bp + s * s);
            let mut breaks = vec![0.0];
            breaks.extend(marks.iter().copied().filter(|&p| p < upper));
            breaks.push(upper);
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            let r = integrate_breaks(integrand, &breaks, &qcfg)?;
            return Ok(s * sin_bp / (beta * PI) * r.value);
        }

        // β > 1/2: the denominator is (y-p)² + w²; y = p + w tan θ removes it.
        let (p, w) = (-s * cos_bp, s * sin_bp);
        let theta = |y: f64| ((y - p) / w).atan();
        let integrand = |t: f64| decay((p + w * t.tan()).max(0.0));
        let mut breaks = vec![theta(0.0), 0.0];
        breaks.extend(marks.iter().filter(|&&y| y < upper).map(|&y| theta(y)));
        breaks.push(theta(upper));
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let r = integrate_breaks(integrand, &breaks, &qcfg)?;
        Ok(r.value / (beta * PI))
    }
}

/// `E_β(z)` with the default evaluation policy.
pub fn mittag_leffler(beta: f64, z: f64) -> Result<f64> {
    MittagLeffler::new(beta, MlEvalConfig::default())?.eval(z)
}

/// C★ with its quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CStar {
    pub value: f64,
    pub error: f64,
}

/// Default absolute and relative tolerance for [`cstar`].
pub const CSTAR_TOL: f64 = 1e-10;

/// Beyond `s = w^α` of this size the tail of `∫ E_β²(-w^α) dw` is integrated
/// term by term from the asymptotic expansion.
const CSTAR_TAIL_S: f64 = 60.0;

/// `C★ = (2/α)(2π)^{-1} ∫_0^∞ z^{1/α-1} E_β²(-z) dz` in one spatial dimension.
pub fn cstar(alpha: f64, beta: f64) -> Result<CStar> {
    cstar_with_tol(alpha, beta, CSTAR_TOL)
}

pub fn cstar_with_tol(alpha: f64, beta: f64, tol: f64) -> Result<CStar> {
    if !(alpha > 0.5 && alpha <= 2.0) {
        return Err(Error::Domain(format!(
            "C★ needs alpha in (1/2, 2] for d = 1, got {alpha}"
        )));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Domain(format!(
            "C★ needs beta in (0, 1], got {beta}"
        )));
    }
    if beta >= alpha {
        return Err(Error::Domain(format!(
            "C★ needs beta/alpha < 1, got beta={beta}, alpha={alpha}"
        )));
    }
    let ml = MittagLeffler::new(beta, MlEvalConfig::default())?;
    let qcfg = QuadConfig {
        abs_tol: tol,
        rel_tol: tol,
        max_intervals: 4000,
    };
    // z = w^α turns z^{1/α-1} dz into α dw, so C★ = (1/π) ∫_0^∞ E_β²(-w^α) dw.
    let s_max = if beta == 1.0 { 45.0 } else { CSTAR_TAIL_S };
    let w_max = s_max.powf(1.0 / alpha);
    let mut breaks = vec![0.0];
    for s in [1e-3, 1e-2, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0] {
        if s < s_max {
            breaks.push(s.powf(1.0 / alpha));
        }
    }
    breaks.push(w_max);

    let mut failure = None;
    let r = integrate_breaks(
        |w| match ml.eval(-w.powf(alpha)) {
            Ok(e) => e * e,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        &breaks,
        &qcfg,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let body = r?;

    let (tail, tail_err) = if beta == 1.0 {
        (0.0, 0.0)
    } else {
        asymptotic_square_tail(alpha, beta, w_max)
    };
    Ok(CStar {
        value: (body.value + tail) / PI,
        error: (body.error + tail_err) / PI,
    })
}

/// `∫_W^∞ E_β²(-w^α) dw` from the first few asymptotic coefficients.
fn asymptotic_square_tail(alpha: f64, beta: f64, w: f64) -> (f64, f64) {
    const TERMS: usize = 8;
    let coeff: Vec<f64> = (1..=TERMS)
        .map(|m| {
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            sign * rgamma(1.0 - beta * m as f64)
        })
        .collect();
    let mut tail = 0.0;
    let mut last_order = 0.0;
    for (i, ci) in coeff.iter().enumerate() {
        for (j, cj) in coeff.iter().enumerate() {
            let p = alpha * (i + j + 2) as f64;
            let piece = ci * cj * w.powf(1.0 - p) / (p - 1.0);
            tail += piece;
            if i + j + 2 == 2 * TERMS {
                last_order += piece.abs();
            }
        }
    }
    (tail, last_order)
}
