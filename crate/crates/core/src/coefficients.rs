//! Drift and diffusion coefficients, their truncations `ψ_N`, and numerical
//! growth and Lipschitz constants.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::kernel::ModelParams;

/// Largest truncation level for which `e^N` is a finite double.
pub const MAX_TRUNCATION_LEVEL: f64 = 700.0;

/// Built-in coefficient families. All are time independent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoefficientSpec {
    /// `λx`
    Linear { lambda: f64 },
    /// `λx + μ`
    Affine { lambda: f64, mu: f64 },
    /// `A sin(ωx)`
    BoundedSine { amplitude: f64, omega: f64 },
    /// `x sin((log(1 + x²))^p)`, locally but not globally Lipschitz.
    LogLip { p: f64 },
}

/// Scalar function of the space variable with a known derivative.
pub trait Coefficient {
    fn value(&self, x: f64) -> f64;

    fn derivative(&self, x: f64) -> f64;

    /// `limsup_{|x|→∞} |ψ(x)|/(1+|x|)` when known in closed form.
    fn growth_limit(&self) -> Option<f64> {
        None
    }

    /// Points where the derivative may jump.
    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// `log(1 + x²)` without overflow.
fn log1p_sq(x: f64) -> f64 {
    if x.abs() > 1e150 {
        2.0 * x.abs().ln()
    } else {
        (x * x).ln_1p()
    }
}

impl CoefficientSpec {
    pub fn linear(lambda: f64) -> Result<Self> {
        finite("lambda", lambda)?;
        Ok(Self::Linear { lambda })
    }

    pub fn affine(lambda: f64, mu: f64) -> Result<Self> {
        finite("lambda", lambda)?;
        finite("mu", mu)?;
        Ok(Self::Affine { lambda, mu })
    }

    pub fn bounded_sine(amplitude: f64, omega: f64) -> Result<Self> {
        finite("amplitude", amplitude)?;
        finite("omega", omega)?;
        Ok(Self::BoundedSine { amplitude, omega })
    }

    pub fn loglip(p: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::Domain(format!(
                "loglip exponent must exceed 1, got {p}"
            )));
        }
        Ok(Self::LogLip { p })
    }

    /// `ψ ≡ 0`.
    pub fn zero() -> Self {
        Self::Linear { lambda: 0.0 }
    }

    /// Build from a family name and its named parameters.
    pub fn from_family(family: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let allowed: &[&str] = match family {
            "linear" => &["lambda"],
            "affine" => &["lambda", "mu"],
            "bounded_sine" => &["amplitude", "omega"],
            "loglip" => &["p"],
            other => {
                return Err(Error::Config(format!(
                    "unknown coefficient family `{other}` (expected linear, affine, bounded_sine or loglip)"
                )))
            }
        };
        if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Config(format!(
                "unknown parameter `{k}` for family `{family}`"
            )));
        }
        let get = |k: &str| {
            params
                .get(k)
                .copied()
                .ok_or_else(|| Error::Config(format!("family `{family}` needs parameter `{k}`")))
        };
        let spec = match family {
            "linear" => Self::linear(get("lambda")?),
            "affine" => Self::affine(get("lambda")?, get("mu")?),
            "bounded_sine" => Self::bounded_sine(get("amplitude")?, get("omega")?),
            _ => Self::loglip(get("p")?),
        };
        spec.map_err(|e| Error::Config(e.to_string()))
    }

    pub fn family(&self) -> &'static str {
        match self {
            Self::Linear { .. } => "linear",
            Self::Affine { .. } => "affine",
            Self::BoundedSine { .. } => "bounded_sine",
            Self::LogLip { .. } => "loglip",
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let pairs: Vec<(&str, f64)> = match *self {
            Self::Linear { lambda } => vec![("lambda", lambda)],
            Self::Affine { lambda, mu } => vec![("lambda", lambda), ("mu", mu)],
            Self::BoundedSine { amplitude, omega } => {
                vec![("amplitude", amplitude), ("omega", omega)]
            }
            Self::LogLip { p } => vec![("p", p)],
        };
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn time_dependent(&self) -> bool {
        false
    }

    /// `ψ(t, x)`.
    pub fn eval(&self, _t: f64, x: f64) -> f64 {
        self.value(x)
    }

    /// `sup |ψ|` for bounded families.
    pub fn sup_norm(&self) -> Option<f64> {
        match *self {
            Self::Linear { lambda: 0.0 } => Some(0.0),
            Self::Affine { lambda: 0.0, mu } => Some(mu.abs()),
            Self::BoundedSine { amplitude, omega } => {
                Some(if omega == 0.0 { 0.0 } else { amplitude.abs() })
            }
            _ => None,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.sup_norm().is_some()
    }

    /// Global Lipschitz constant when one exists in closed form.
    pub fn global_lipschitz(&self) -> Option<f64> {
        match *self {
            Self::Linear { lambda } | Self::Affine { lambda, .. } => Some(lambda.abs()),
            Self::BoundedSine { amplitude, omega } => Some((amplitude * omega).abs()),
            Self::LogLip { .. } => None,
        }
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {v}")))
    }
}

impl fmt::Display for CoefficientSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Linear { lambda } => write!(f, "linear(lambda={lambda})"),
            Self::Affine { lambda, mu } => write!(f, "affine(lambda={lambda}, mu={mu})"),
            Self::BoundedSine { amplitude, omega } => {
                write!(f, "bounded_sine(amplitude={amplitude}, omega={omega})")
            }
            Self::LogLip { p } => write!(f, "loglip(p={p})"),
        }
    }
}

impl Coefficient for CoefficientSpec {
    fn value(&self, x: f64) -> f64 {
        match *self {
            Self::Linear { lambda } => lambda * x,
            Self::Affine { lambda, mu } => lambda * x + mu,
            Self::BoundedSine { amplitude, omega } => amplitude * (omega * x).sin(),
            Self::LogLip { p } => x * log1p_sq(x).powf(p).sin(),
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        match *self {
            Self::Linear { lambda } | Self::Affine { lambda, .. } => lambda,
            Self::BoundedSine { amplitude, omega } => amplitude * omega * (omega * x).cos(),
            Self::LogLip { p } => {
                if x == 0.0 {
                    return 0.0;
                }
                let l = log1p_sq(x);
                let g = l.powf(p);
                // x · d/dx log(1+x²) = 2x²/(1+x²)
                let x_dl = 2.0 / (1.0 + 1.0 / (x * x));
                g.sin() + g.cos() * p * l.powf(p - 1.0) * x_dl
            }
        }
    }

    fn growth_limit(&self) -> Option<f64> {
        Some(match *self {
            Self::Linear { lambda } | Self::Affine { lambda, .. } => lambda.abs(),
            Self::BoundedSine { .. } => 0.0,
            Self::LogLip { .. } => 1.0,
        })
    }
}

/// `ψ_N(x) = ψ(clamp(x, -e^N, e^N))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedCoefficient {
    base: CoefficientSpec,
    level: f64,
    cutoff: f64,
}

pub fn truncate(spec: &CoefficientSpec, n: f64) -> Result<TruncatedCoefficient> {
    if !(n > 0.0) {
        return Err(Error::Domain(format!(
            "truncation level must be positive, got {n}"
        )));
    }
    if n > MAX_TRUNCATION_LEVEL {
        return Err(Error::TruncationOverflow(n));
    }
    Ok(TruncatedCoefficient {
        base: *spec,
        level: n,
        cutoff: n.exp(),
    })
}

impl TruncatedCoefficient {
    pub fn base(&self) -> &CoefficientSpec {
        &self.base
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    /// `e^N`.
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn eval(&self, _t: f64, x: f64) -> f64 {
        self.value(x)
    }
}

impl Coefficient for TruncatedCoefficient {
    fn value(&self, x: f64) -> f64 {
        self.base.value(x.clamp(-self.cutoff, self.cutoff))
    }

    fn derivative(&self, x: f64) -> f64 {
        if x.abs() <= self.cutoff {
            self.base.derivative(x)
        } else {
            0.0
        }
    }

    fn growth_limit(&self) -> Option<f64> {
        Some(0.0)
    }

    fn kinks(&self) -> Vec<f64> {
        vec![-self.cutoff, self.cutoff]
    }
}

/// Sample points `±sinh(u)` with `u` uniform on `[0, asinh(n)]`, plus kinks.
fn scan_points<C: Coefficient + ?Sized>(c: &C, n: f64, resolution: usize) -> Vec<f64> {
    let top = n.asinh();
    let steps = (resolution.max(1000) as f64).max(2000.0 * top).ceil() as usize;
    let mut xs = Vec::with_capacity(2 * steps + 8);
    for i in 0..=steps {
        let x = (top * i as f64 / steps as f64).sinh().min(n);
        xs.push(x);
        if i > 0 {
            xs.push(-x);
        }
    }
    xs.extend(c.kinks().into_iter().filter(|k| k.abs() <= n));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// `Lip_n(ψ) = sup_{x≠y ∈ [-n,n]} |ψ(x)-ψ(y)|/|x-y|`.
///
/// Maximum of `|ψ'|` over an `asinh`-spaced grid with golden-section
/// refinement around the largest local maxima, together with the slopes
/// between adjacent samples.
pub fn lip_n<C: Coefficient + ?Sized>(c: &C, n: f64, resolution: usize) -> f64 {
    if !(n > 0.0) {
        return 0.0;
    }
    let xs = scan_points(c, n, resolution);
    let d: Vec<f64> = xs.iter().map(|&x| c.derivative(x).abs()).collect();
    let mut best = d.iter().copied().fold(0.0, f64::max);
    for w in xs.windows(2) {
        let h = w[1] - w[0];
        if h > 0.0 {
            best = best.max((c.value(w[1]) - c.value(w[0])).abs() / h);
        }
    }

    let mut peaks: Vec<usize> = (1..xs.len() - 1)
        .filter(|&i| d[i] >= d[i - 1] && d[i] >= d[i + 1])
        .collect();
    peaks.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    peaks.truncate(64);
    let kinks = c.kinks();
    for i in peaks {
        let (lo, hi) = (xs[i - 1], xs[i + 1]);
        if kinks.iter().any(|k| *k > lo && *k < hi) {
            continue;
        }
        best = best.max(golden_max(|x| c.derivative(x).abs(), lo, hi));
    }
    best
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        if (b - a).abs() <= 1e-15 * (a.abs() + b.abs()) {
            break;
        }
    }
    fc.max(fd)
}

/// `L_ψ = sup_x |ψ(x)|/(1+|x|)` over a log-spaced grid up to `scan_limit`,
/// combined with the closed-form limit at infinity when the family has one.
pub fn linear_growth_const<C: Coefficient + ?Sized>(c: &C, scan_limit: f64) -> Result<f64> {
    if !(scan_limit >= 1e3) || !scan_limit.is_finite() {
        return Err(Error::Precondition(format!(
            "scan limit must be at least 1e3, got {scan_limit}"
        )));
    }
    const PER_DECADE: usize = 4000;
    let lo = -6.0;
    let hi = scan_limit.log10();
    let steps = ((hi - lo) * PER_DECADE as f64).ceil() as usize;
    let mut xs = vec![0.0];
    for i in 0..=steps {
        let x = 10f64.powf(lo + (hi - lo) * i as f64 / steps as f64);
        xs.push(x);
        xs.push(-x);
    }
    xs.extend(c.kinks().into_iter().filter(|k| k.abs() <= scan_limit));

    let ratio = |x: f64| c.value(x).abs() / (1.0 + x.abs());
    let mut sup: f64 = 0.0;
    let mut sup_inner: f64 = 0.0;
    for &x in &xs {
        let r = ratio(x);
        if !r.is_finite() {
            return Err(Error::Domain(format!(
                "coefficient is not finite at x = {x}"
            )));
        }
        sup = sup.max(r);
        if x.abs() <= 0.1 * scan_limit {
            sup_inner = sup_inner.max(r);
        }
    }
    match c.growth_limit() {
        Some(limit) => Ok(sup.max(limit)),
        None => {
            if sup > 1.01 * sup_inner && ratio(scan_limit).max(ratio(-scan_limit)) >= sup * 0.999 {
                return Err(Error::Domain(format!(
                    "linear growth ratio still increasing at x = {scan_limit}: {sup_inner:e} -> {sup:e}"
                )));
            }
            Ok(sup)
        }
    }
}

/// Which branch of the Lipschitz growth assumption applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthCase {
    /// `σ` unbounded: `L_{N,σ} = o(N^{(1-r)(2-r)/2})`.
    LinearGrowth,
    /// `σ` bounded: `L_{N,σ} = o(e^{N(1-r)})`.
    BoundedSigma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub case: GrowthCase,
    pub levels: Vec<f64>,
    pub lip_sigma: Vec<f64>,
    pub lip_b: Vec<f64>,
    /// `L_{N,σ}` divided by the rate it must beat.
    pub sigma_ratio: Vec<f64>,
    /// `L_{N,b} / L_{N,σ}^{2/(1-r)}`.
    pub drift_ratio: Vec<f64>,
    /// `(1-r)(2-r)/2`, the polynomial rate in the unbounded case.
    pub threshold_exponent: f64,
    /// Least-squares slope of `log L_{N,σ}` against `log N`.
    pub fitted_exponent: f64,
    pub sigma_ratio_decreasing: bool,
    pub drift_ratio_bounded: bool,
    pub admissible: bool,
}

/// Grid resolution used by [`check_assumption3`].
const ADMISSIBILITY_RESOLUTION: usize = 4000;

pub fn check_assumption3(
    b: &CoefficientSpec,
    sigma: &CoefficientSpec,
    params: &ModelParams,
    levels: &[f64],
) -> Result<AdmissibilityReport> {
    if levels.len() < 4 {
        return Err(Error::Precondition(format!(
            "need at least 4 truncation levels, got {}",
            levels.len()
        )));
    }
    if levels.windows(2).any(|w| !(w[1] > w[0])) || !(levels[0] > 0.0) {
        return Err(Error::Precondition(
            "truncation levels must be positive and increasing".into(),
        ));
    }
    if levels.iter().any(|&n| n > MAX_TRUNCATION_LEVEL) {
        return Err(Error::TruncationOverflow(*levels.last().unwrap()));
    }
    let r = params.ratio();
    let case = if sigma.is_bounded() {
        GrowthCase::BoundedSigma
    } else {
        GrowthCase::LinearGrowth
    };
    let threshold_exponent = (1.0 - r) * (2.0 - r) / 2.0;

    let lip = |c: &CoefficientSpec, n: f64| lip_n(c, n.exp(), ADMISSIBILITY_RESOLUTION);
    let lip_sigma: Vec<f64> = levels.iter().map(|&n| lip(sigma, n)).collect();
    let lip_b: Vec<f64> = levels.iter().map(|&n| lip(b, n)).collect();
    let sigma_ratio: Vec<f64> = levels
        .iter()
        .zip(&lip_sigma)
        .map(|(&n, &l)| match case {
            GrowthCase::LinearGrowth => l / n.powf(threshold_exponent),
            GrowthCase::BoundedSigma => l / (n * (1.0 - r)).exp(),
        })
        .collect();
    let drift_ratio: Vec<f64> = lip_b
        .iter()
        .zip(&lip_sigma)
        .map(|(&lb, &ls)| {
            if lb == 0.0 {
                0.0
            } else {
                lb / ls.powf(2.0 / (1.0 - r))
            }
        })
        .collect();

    let fitted_exponent = log_log_slope(levels, &lip_sigma);
    let half = levels.len() / 2;
    let top = &sigma_ratio[half..];
    let sigma_ratio_decreasing = top.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    let lower_max = drift_ratio[..half].iter().copied().fold(0.0, f64::max);
    let drift_ratio_bounded = drift_ratio.iter().all(|v| v.is_finite())
        && drift_ratio[half..]
            .iter()
            .all(|&v| v <= lower_max * (1.0 + 1e-6) || v == 0.0);
    Ok(AdmissibilityReport {
        case,
        levels: levels.to_vec(),
        lip_sigma,
        lip_b,
        sigma_ratio,
        drift_ratio,
        threshold_exponent,
        fitted_exponent,
        sigma_ratio_decreasing,
        drift_ratio_bounded,
        admissible: sigma_ratio_decreasing && drift_ratio_bounded,
    })
}

fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
