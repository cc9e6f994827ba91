//! Monte Carlo estimates of moments, tail probabilities and truncation
//! differences, checked against the envelopes of [`crate::bounds`].

use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::bounds::{
    moment_bound_bounded_sigma, moment_bound_linear, tail_bound_bounded_sigma, tail_bound_linear,
    ModelConstants,
};
use crate::error::{Error, Result};
use crate::solver::{replica_seed, FieldPath, GridSpec, HistoryOrder, Problem, SolverOptions};

/// Confidence level of every interval in this module.
pub const CONFIDENCE: f64 = 0.99;

/// Default number of bootstrap resamples.
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Default seed of the bootstrap generator.
pub const BOOTSTRAP_SEED: u64 = 0x5EED_B007;

/// Header of the report CSV.
pub const CSV_HEADER: &str = "quantity,t,x,k_or_N,estimate,ci_lo,ci_hi,envelope,verdict";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Moment,
    Tail,
    Convergence,
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quantity::Moment => "moment",
            Quantity::Tail => "tail",
            Quantity::Convergence => "convergence",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
    /// The envelope is not claimed at this probe.
    NotAsserted,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
            Verdict::NotAsserted => "not-asserted",
        })
    }
}

/// One-sided comparison of an interval with an upper envelope.
pub fn verdict(ci_lo: f64, ci_hi: f64, envelope: f64) -> Verdict {
    if ci_hi <= envelope {
        Verdict::Pass
    } else if ci_lo > envelope {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    }
}

/// Grid point at which an ensemble is sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub n: usize,
    pub j: usize,
    pub t: f64,
    pub x: f64,
}

impl Probe {
    pub fn at(grid: &GridSpec, n: usize, j: usize) -> Result<Self> {
        if n > grid.nt() || j >= grid.nx() {
            return Err(Error::Precondition(format!(
                "probe ({n}, {j}) outside the {}x{} grid",
                grid.nt(),
                grid.nx()
            )));
        }
        Ok(Self {
            n,
            j,
            t: grid.time(n),
            x: grid.space().x(j),
        })
    }

    /// Nearest grid point to `(t, x)`; logs a warning when it moves.
    pub fn snap(grid: &GridSpec, t: f64, x: f64) -> Result<Self> {
        if !(t > 0.0 && t <= grid.t_end() * (1.0 + 1e-12)) {
            return Err(Error::Precondition(format!(
                "probe time {t} outside (0, {}]",
                grid.t_end()
            )));
        }
        let n = ((t / grid.dt()).round() as usize).clamp(1, grid.nt());
        let j = grid.space().index_of(x);
        let p = Self::at(grid, n, j)?;
        if (p.t - t).abs() > 1e-9 * t.max(1.0) || (p.x - x).abs() > 1e-9 * x.abs().max(1.0) {
            log::warn!("probe ({t}, {x}) snapped to grid point ({}, {})", p.t, p.x);
        }
        Ok(p)
    }
}

/// Point estimate with a confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// All samples identical, so the interval has zero width.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            resamples: BOOTSTRAP_RESAMPLES,
            level: CONFIDENCE,
            seed: BOOTSTRAP_SEED,
        }
    }
}

/// Percentile bootstrap interval for `stat(samples)`.
pub fn bootstrap<F>(samples: &[f64], stat: F, cfg: &BootstrapConfig) -> Result<Estimate>
where
    F: Fn(&[f64]) -> f64,
{
    if samples.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if cfg.resamples < 2 || !(cfg.level > 0.0 && cfg.level < 1.0) {
        return Err(Error::Precondition(format!(
            "bootstrap needs >= 2 resamples and a level in (0,1), got {} and {}",
            cfg.resamples, cfg.level
        )));
    }
    let value = stat(samples);
    if samples.iter().all(|&v| v == samples[0]) {
        log::warn!(
            "degenerate ensemble: all {} samples identical",
            samples.len()
        );
        return Ok(Estimate {
            value,
            ci_lo: value,
            ci_hi: value,
            degenerate: true,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = samples.len();
    let mut buf = vec![0.0; n];
    let mut stats: Vec<f64> = (0..cfg.resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = samples[rng.random_range(0..n)];
            }
            stat(&buf)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let a = (1.0 - cfg.level) / 2.0;
    let b = cfg.resamples as f64;
    let lo = ((a * b).floor() as usize).min(cfg.resamples - 1);
    let hi = (((1.0 - a) * b).ceil() as usize)
        .saturating_sub(1)
        .min(cfg.resamples - 1);
    Ok(Estimate {
        value,
        ci_lo: stats[lo].min(value),
        ci_hi: stats[hi].max(value),
        degenerate: false,
    })
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// `mean |u|^k` with a bootstrap interval.
pub fn estimate_moments(samples: &[f64], k: f64) -> Result<Estimate> {
    estimate_moments_with(samples, k, &BootstrapConfig::default())
}

pub fn estimate_moments_with(samples: &[f64], k: f64, cfg: &BootstrapConfig) -> Result<Estimate> {
    if !(k > 0.0) {
        return Err(Error::Precondition(format!(
            "moment order must be positive, got {k}"
        )));
    }
    let powers: Vec<f64> = samples.iter().map(|u| u.abs().powf(k)).collect();
    bootstrap(&powers, mean, cfg)
}

/// Two-sided Clopper-Pearson interval for `events` successes in `trials`.
pub fn clopper_pearson(events: usize, trials: usize, level: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if events > trials {
        return Err(Error::Precondition(format!(
            "{events} events in {trials} trials"
        )));
    }
    let a = (1.0 - level) / 2.0;
    let (x, n) = (events as f64, trials as f64);
    let beta = |p: f64, q: f64| {
        Beta::new(p, q).map_err(|e| Error::Precondition(format!("beta distribution: {e}")))
    };
    let lo = match events {
        0 => 0.0,
        e if e == trials => a.powf(1.0 / n),
        _ => beta(x, n - x + 1.0)?.inverse_cdf(a),
    };
    let hi = match events {
        0 => 1.0 - a.powf(1.0 / n),
        e if e == trials => 1.0,
        _ => beta(x + 1.0, n - x)?.inverse_cdf(1.0 - a),
    };
    Ok((lo, hi))
}

/// Empirical `P(|u| ≥ e^N)` with a Clopper-Pearson interval.
pub fn estimate_tail(samples: &[f64], level: f64) -> Result<Estimate> {
    if samples.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let cut = level.exp();
    let events = samples.iter().filter(|u| u.abs() >= cut).count();
    let value = events as f64 / samples.len() as f64;
    if samples.iter().all(|&u| u == samples[0]) {
        return Ok(Estimate {
            value,
            ci_lo: value,
            ci_hi: value,
            degenerate: true,
        });
    }
    if samples.len() < 10_000 {
        log::warn!("tail estimate from only {} replicas", samples.len());
    }
    let (ci_lo, ci_hi) = clopper_pearson(events, samples.len(), CONFIDENCE)?;
    Ok(Estimate {
        value,
        ci_lo,
        ci_hi,
        degenerate: false,
    })
}

/// Row of the verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub quantity: Quantity,
    pub t: f64,
    pub x: f64,
    /// Moment order `k` or truncation level `N`.
    pub order: f64,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub envelope: Option<f64>,
    pub verdict: Verdict,
    pub note: Option<String>,
}

impl BoundReport {
    fn compare(
        quantity: Quantity,
        probe: &Probe,
        order: f64,
        est: Estimate,
        env: Result<f64>,
    ) -> Result<Self> {
        let (envelope, verdict, note) = match env {
            Ok(e) => (Some(e), verdict(est.ci_lo, est.ci_hi, e), None),
            Err(Error::Precondition(msg)) => (None, Verdict::NotAsserted, Some(msg)),
            Err(e) => return Err(e),
        };
        Ok(Self {
            quantity,
            t: probe.t,
            x: probe.x,
            order,
            estimate: est.value,
            ci_lo: est.ci_lo,
            ci_hi: est.ci_hi,
            envelope,
            verdict,
            note,
        })
    }

    pub fn csv_row(&self) -> String {
        let env = self.envelope.map(fmt_num).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.quantity,
            fmt_num(self.t),
            fmt_num(self.x),
            fmt_num(self.order),
            fmt_num(self.estimate),
            fmt_num(self.ci_lo),
            fmt_num(self.ci_hi),
            env,
            self.verdict
        )
    }
}

/// Compare `mean |u|^k` at `probe` with the moment envelope; the bounded
/// part is used when `σ` is bounded.
pub fn check_moment_bounds(
    samples: &[f64],
    consts: &ModelConstants,
    k: f64,
    probe: &Probe,
) -> Result<BoundReport> {
    let est = estimate_moments(samples, k)?;
    let env = match consts.sigma_sup {
        Some(_) => moment_bound_bounded_sigma(consts, k, probe.t),
        None => moment_bound_linear(consts, k, probe.t),
    };
    BoundReport::compare(Quantity::Moment, probe, k, est, env)
}

/// Compare `P(|u_{N+1}| ≥ e^N)` at `probe` with the tail envelope.
pub fn check_tail_bounds(
    samples: &[f64],
    consts: &ModelConstants,
    level: f64,
    probe: &Probe,
) -> Result<BoundReport> {
    let est = estimate_tail(samples, level)?;
    let env = match consts.sigma_sup {
        Some(_) => tail_bound_bounded_sigma(consts, level, probe.t),
        None => tail_bound_linear(consts, level, probe.t),
    };
    BoundReport::compare(Quantity::Tail, probe, level, est, env)
}

/// Shortest round-trip form, switching to exponent notation far from 1.
pub fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e7).contains(&a) || !v.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

pub fn write_csv<W: Write>(mut w: W, reports: &[BoundReport]) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in reports {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Differences between coupled truncation levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub levels: Vec<f64>,
    pub k: f64,
    /// `d_N = max_{n,j} (mean |u_{N+1} - u_N|^k)^{1/k}`.
    pub d: Vec<f64>,
    /// Grid point `(n, j)` attaining each `d_N`.
    pub argmax: Vec<(usize, usize)>,
    /// Largest `|u_{N+1}|` over the ensemble, per level.
    pub sup_abs: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub first_vanishing: Option<f64>,
    pub nonincreasing: bool,
    /// Least-squares slope of `log d_N` against `N^{2-r}` over positive `d_N`.
    pub fitted_slope: Option<f64>,
}

impl ConvergenceReport {
    /// Nonincreasing with zeros from the first vanishing level on.
    pub fn structure_holds(&self) -> bool {
        let zeros_stay = match self.d.iter().position(|&d| d == 0.0) {
            Some(i) => self.d[i..].iter().all(|&d| d == 0.0),
            None => true,
        };
        self.nonincreasing && zeros_stay
    }

    pub fn reports(&self, grid: &GridSpec) -> Vec<BoundReport> {
        let ok = self.structure_holds();
        self.levels
            .iter()
            .zip(&self.d)
            .zip(&self.argmax)
            .map(|((&n, &d), &(i, j))| BoundReport {
                quantity: Quantity::Convergence,
                t: grid.time(i),
                x: grid.space().x(j),
                order: n,
                estimate: d,
                ci_lo: d,
                ci_hi: d,
                envelope: None,
                verdict: if ok { Verdict::Pass } else { Verdict::Fail },
                note: None,
            })
            .collect()
    }
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Replicas per sequential block; blocks are summed in order so the result
/// does not depend on the thread count.
const BLOCK: usize = 16;

/// Coupled-noise study of `u_{N+1} - u_N` for each `N` in `levels`.
pub fn convergence_study(
    problem: &Problem,
    levels: &[f64],
    k: f64,
    base_seed: u64,
    replicas: usize,
) -> Result<ConvergenceReport> {
    if replicas == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if levels.is_empty() || levels.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Precondition(
            "levels must be nonempty and increasing".into(),
        ));
    }
    if !(k >= 1.0) {
        return Err(Error::Precondition(format!("need k >= 1, got {k}")));
    }
    let ratio = problem.kernel.params().ratio();
    let nt = problem.grid.nt();
    let nx = problem.grid.nx();
    let m = levels.len();
    let cells = (nt + 1) * nx;

    struct Acc {
        sums: Vec<Vec<f64>>,
        sup: Vec<f64>,
    }
    let replica = |r: usize| -> Result<Acc> {
        let seed = replica_seed(base_seed, r as u64);
        let mut sums = vec![vec![0.0; cells]; m];
        let mut sup = vec![0.0; m];
        for (i, &n) in levels.iter().enumerate() {
            let lo = problem.path(Some(n), seed)?;
            let hi = problem.path(Some(n + 1.0), seed)?;
            check_coupling(&lo, &hi, n)?;
            sup[i] = hi.sup_abs();
            for (s, (a, b)) in sums[i]
                .iter_mut()
                .zip(lo.values.iter().flatten().zip(hi.values.iter().flatten()))
            {
                *s += (b - a).abs().powf(k);
            }
        }
        Ok(Acc { sums, sup })
    };
    let blocks: Vec<Acc> = (0..replicas.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = Acc {
                sums: vec![vec![0.0; cells]; m],
                sup: vec![0.0; m],
            };
            for r in b * BLOCK..((b + 1) * BLOCK).min(replicas) {
                let one = replica(r)?;
                for i in 0..m {
                    for (s, v) in acc.sums[i].iter_mut().zip(&one.sums[i]) {
                        *s += v;
                    }
                    acc.sup[i] = acc.sup[i].max(one.sup[i]);
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let mut d = vec![0.0; m];
    let mut argmax = vec![(0, 0); m];
    let mut sup_abs = vec![0.0; m];
    for i in 0..m {
        let mut total = vec![0.0; cells];
        for b in &blocks {
            for (t, v) in total.iter_mut().zip(&b.sums[i]) {
                *t += v;
            }
            sup_abs[i] = f64::max(sup_abs[i], b.sup[i]);
        }
        for (c, &s) in total.iter().enumerate() {
            let v = (s / replicas as f64).powf(1.0 / k);
            if v > d[i] {
                d[i] = v;
                argmax[i] = (c / nx, c % nx);
            }
        }
    }

    let partial_sums = d
        .iter()
        .scan(0.0, |acc, &v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    let first_vanishing = d.iter().position(|&v| v == 0.0).map(|i| levels[i]);
    let nonincreasing = d.windows(2).all(|w| w[1] <= w[0]);
    let (xs, ys): (Vec<f64>, Vec<f64>) = levels
        .iter()
        .zip(&d)
        .filter(|(_, &v)| v > 0.0)
        .map(|(&n, &v)| (n.powf(2.0 - ratio), v.ln()))
        .unzip();
    Ok(ConvergenceReport {
        levels: levels.to_vec(),
        k,
        d,
        argmax,
        sup_abs,
        partial_sums,
        first_vanishing,
        nonincreasing,
        fitted_slope: least_squares_slope(&xs, &ys),
    })
}

/// `lo` at level `N` and `hi` at a higher level, same noise, must agree on
/// every row up to and including the first exit of `lo` from `(-e^N, e^N)`.
pub fn check_coupling(lo: &FieldPath, hi: &FieldPath, level: f64) -> Result<()> {
    let last = lo.first_exit(level).unwrap_or(lo.values.len() - 1);
    for n in 0..=last {
        if lo.values[n] != hi.values[n] {
            return Err(Error::Coupling(format!(
                "paths with seeds {} and {} differ at step {n} before leaving level {level}",
                lo.seed, hi.seed
            )));
        }
    }
    Ok(())
}

/// Sup differences between runs that are mathematically identical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniquenessReport {
    pub level: f64,
    /// Path sup at `level`.
    pub sup_abs: f64,
    /// Forward against reverse accumulation of the history sum.
    pub reorder_diff: f64,
    /// Level `N` against level `N + 5`.
    pub level_diff: f64,
}

impl UniquenessReport {
    pub fn max_diff(&self) -> f64 {
        self.reorder_diff.max(self.level_diff)
    }
}

pub fn uniqueness_probe(problem: &Problem, level: f64, seed: u64) -> Result<UniquenessReport> {
    let with = |history| Problem {
        options: SolverOptions { history },
        ..problem.clone()
    };
    let fwd = with(HistoryOrder::Forward);
    let a = fwd.path(Some(level), seed)?;
    let b = with(HistoryOrder::Reverse).path(Some(level), seed)?;
    let c = fwd.path(Some(level + 5.0), seed)?;
    if a.sup_abs() >= level.exp() {
        log::warn!("uniqueness probe: truncation at level {level} is active on the path");
    }
    Ok(UniquenessReport {
        level,
        sup_abs: a.sup_abs(),
        reorder_diff: a.sup_diff(&b),
        level_diff: a.sup_diff(&c),
    })
}

/// `max_{n,j} |coarse[n][j] - fine[2n][j]|` for a fine path with half the
/// time step on the same spatial grid.
pub fn refinement_difference(coarse: &FieldPath, fine: &FieldPath) -> Result<f64> {
    if fine.values.len() != 2 * coarse.values.len() - 1 || fine.grid.nx() != coarse.grid.nx() {
        return Err(Error::Precondition(
            "fine path is not a time refinement of the coarse one".into(),
        ));
    }
    Ok(coarse
        .values
        .iter()
        .enumerate()
        .flat_map(|(n, row)| row.iter().zip(&fine.values[2 * n]))
        .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::ConstantInputs;
    use crate::coefficients::CoefficientSpec;
    use crate::kernel::{KernelOptions, ModelParams};
    use crate::solver::solver_kernel;

    #[test]
    fn verdict_logic() {
        assert_eq!(verdict(1.0, 2.0, 3.0), Verdict::Pass);
        assert_eq!(verdict(1.0, 3.0, 3.0), Verdict::Pass);
        assert_eq!(verdict(1.0, 4.0, 3.0), Verdict::Inconclusive);
        assert_eq!(verdict(3.5, 4.0, 3.0), Verdict::Fail);
    }

    #[test]
    fn constant_samples() {
        let s = vec![2.0; 50];
        let e = estimate_moments(&s, 3.0).unwrap();
        assert_eq!(e.value, 8.0);
        assert!(e.degenerate);
        assert_eq!((e.ci_lo, e.ci_hi), (8.0, 8.0));
    }

    #[test]
    fn bootstrap_is_reproducible_and_covers() {
        let s: Vec<f64> = (0..500)
            .map(|i| ((i * 7919) % 1000) as f64 / 1000.0)
            .collect();
        let a = estimate_moments(&s, 2.0).unwrap();
        let b = estimate_moments(&s, 2.0).unwrap();
        assert_eq!(a, b);
        assert!(a.ci_lo < a.value && a.value < a.ci_hi);
        assert!((a.value - 1.0 / 3.0).abs() < 0.01);
        let four = estimate_moments(&s, 4.0).unwrap();
        assert!(four.value >= a.value * a.value);
    }

    #[test]
    fn clopper_pearson_edges() {
        let (lo, hi) = clopper_pearson(0, 10_000, 0.99).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - (1.0 - 0.005f64.powf(1e-4))).abs() < 1e-15);
        assert!((hi * 1e4 - 5.3).abs() < 0.01);
        let (lo, hi) = clopper_pearson(10, 10, 0.99).unwrap();
        assert_eq!(hi, 1.0);
        assert!(lo > 0.5);
        let (lo, hi) = clopper_pearson(50, 100, 0.99).unwrap();
        assert!((lo - (1.0 - hi)).abs() < 1e-9);
        assert!(lo < 0.5 && hi > 0.5);
    }

    #[test]
    fn tail_estimates() {
        let ones = vec![1.0; 100];
        let e = estimate_tail(&ones, 1.0).unwrap();
        assert!(e.degenerate && e.value == 0.0 && e.ci_hi == 0.0);
        let e = estimate_tail(&ones, -1.0).unwrap();
        assert!(e.degenerate && e.ci_lo == 1.0);
        let s: Vec<f64> = (0..1000).map(|i| i as f64 / 100.0).collect();
        let a = estimate_tail(&s, 1.0).unwrap().value;
        let b = estimate_tail(&s, 2.0).unwrap().value;
        assert!(a >= b && a <= 1.0);
    }

    fn linear_constants() -> ModelConstants {
        let inputs = ConstantInputs {
            l_b: 0.0,
            l_sigma: 1.0,
            l_nb: 0.0,
            l_nsigma: 1.0,
            u0_sup: 0.0,
            sigma_sup: None,
        };
        ModelConstants::with_cstar(ModelParams::new(2.0, 0.5).unwrap(), inputs, 0.2174519).unwrap()
    }

    #[test]
    fn fabricated_ensemble_fails() {
        let grid = GridSpec::new(1.0, 16, 8.0, 16).unwrap();
        let probe = Probe::at(&grid, 1, 8).unwrap();
        let c = linear_constants();
        let env = moment_bound_linear(&c, 2.0, probe.t).unwrap();
        let big = vec![2.0 * env.sqrt(); 200];
        let r = check_moment_bounds(&big, &c, 2.0, &probe).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        let zero = vec![0.0; 200];
        let r = check_moment_bounds(&zero, &c, 2.0, &probe).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        let r = check_moment_bounds(&zero, &c, 1.5, &probe).unwrap();
        assert_eq!(r.verdict, Verdict::NotAsserted);
        let r = check_tail_bounds(&zero, &c, 1.0, &probe).unwrap();
        assert_eq!(r.verdict, Verdict::NotAsserted);
    }

    #[test]
    fn csv_layout() {
        let grid = GridSpec::new(1.0, 16, 8.0, 16).unwrap();
        let probe = Probe::at(&grid, 16, 8).unwrap();
        let r = check_moment_bounds(&[0.0; 10], &linear_constants(), 1.0, &probe).unwrap();
        let mut out = Vec::new();
        write_csv(&mut out, &[r]).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "moment,1,0,1,0,0,0,,not-asserted");
    }

    #[test]
    fn snapping() {
        let grid = GridSpec::new(1.0, 16, 8.0, 16).unwrap();
        let p = Probe::snap(&grid, 0.26, 0.1).unwrap();
        assert_eq!((p.n, p.j), (4, 8));
        assert!(Probe::snap(&grid, 0.0, 0.0).is_err());
    }

    fn small_problem<'a>(
        kernel: &'a crate::kernel::KernelTable,
        grid: GridSpec,
        sigma: CoefficientSpec,
        u0: f64,
    ) -> Problem<'a> {
        Problem {
            grid,
            b: CoefficientSpec::zero(),
            sigma,
            u0: vec![u0; grid.nx()],
            kernel,
            options: SolverOptions::default(),
        }
    }

    #[test]
    fn linear_coefficients_converge_immediately() {
        let params = ModelParams::new(2.0, 0.5).unwrap();
        let grid = GridSpec::new(0.5, 8, 16.0, 64).unwrap();
        let opts = KernelOptions {
            tail_mass_tol: 1e-3,
            ..KernelOptions::default()
        };
        let kernel = solver_kernel(&params, &grid, &opts).unwrap();
        let p = small_problem(&kernel, grid, CoefficientSpec::linear(1.0).unwrap(), 0.5);
        let sup = p.path(None, replica_seed(3, 0)).unwrap().sup_abs();
        let level = sup.ln().ceil() + 3.0;
        let rep = convergence_study(&p, &[level, level + 1.0], 2.0, 3, 1).unwrap();
        assert_eq!(rep.d, vec![0.0, 0.0]);
        assert_eq!(rep.first_vanishing, Some(level));
        assert!(rep.structure_holds());
    }

    #[test]
    fn uniqueness_of_identical_runs() {
        let params = ModelParams::new(1.5, 0.75).unwrap();
        let grid = GridSpec::new(0.5, 16, 8.0, 64).unwrap();
        let opts = KernelOptions {
            tail_mass_tol: 0.05,
            ..KernelOptions::default()
        };
        let kernel = solver_kernel(&params, &grid, &opts).unwrap();
        let p = small_problem(&kernel, grid, CoefficientSpec::loglip(1.3).unwrap(), 1.0);
        let r = uniqueness_probe(&p, 8.0, 11).unwrap();
        assert!(r.reorder_diff <= 1e-10, "{r:?}");
        assert_eq!(r.level_diff, 0.0);
        let same = p.path(Some(8.0), 11).unwrap();
        assert_eq!(same.sup_diff(&p.path(Some(8.0), 11).unwrap()), 0.0);
    }

    #[test]
    fn time_refinement_ratio() {
        let params = ModelParams::new(2.0, 1.0).unwrap();
        let run = |nt: usize| {
            let grid = GridSpec::new(1.0, nt, 16.0, 64).unwrap();
            let kernel = solver_kernel(&params, &grid, &KernelOptions::default()).unwrap();
            let p = Problem {
                grid,
                b: CoefficientSpec::bounded_sine(1.0, 1.0).unwrap(),
                sigma: CoefficientSpec::zero(),
                u0: grid.space().xs().iter().map(|x| (-x * x).exp()).collect(),
                kernel: &kernel,
                options: SolverOptions::default(),
            };
            p.path(None, 0).unwrap()
        };
        let (a, b, c) = (run(16), run(32), run(64));
        let ratio = refinement_difference(&a, &b).unwrap() / refinement_difference(&b, &c).unwrap();
        assert!((1.5..=3.0).contains(&ratio), "ratio {ratio}");
    }
}
