//! Monte Carlo simulation of the mild formulation
//!
//! `u(t) = G_t ⋆ u₀ + ∫_0^t G_{t-s} ⋆ b(u(s)) ds + ∫_0^t G_{t-s} ⊛ σ(u(s)) W(ds)`
//!
//! on a uniform space-time grid with left-endpoint forcing. The scheme keeps
//! the whole forcing history in Fourier space, so step `m` costs `O(m·nx)`
//! on top of one FFT pair.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use realfft::num_complex::Complex;

use crate::coefficients::{truncate, Coefficient, CoefficientSpec, TruncatedCoefficient};
use crate::error::{Error, Result};
use crate::kernel::{
    build_kernel_table_with, KernelOptions, KernelTable, ModelParams, SpatialGrid,
};

/// Space-time grid: `t_n = n·dt`, `n = 0..=nt`, on the periodic box of
/// [`SpatialGrid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    t_end: f64,
    nt: usize,
    space: SpatialGrid,
}

impl GridSpec {
    pub fn new(t_end: f64, nt: usize, half_width: f64, nx: usize) -> Result<Self> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "horizon must be positive, got {t_end}"
            )));
        }
        if nt < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 time steps, got {nt}"
            )));
        }
        if nx < 16 || !nx.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "nx must be a power of two and at least 16, got {nx}"
            )));
        }
        Ok(Self {
            t_end,
            nt,
            space: SpatialGrid::new(half_width, nx)?,
        })
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn nx(&self) -> usize {
        self.space.nx()
    }

    pub fn half_width(&self) -> f64 {
        self.space.half_width()
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.nt as f64
    }

    pub fn dx(&self) -> f64 {
        self.space.dx()
    }

    pub fn space(&self) -> &SpatialGrid {
        &self.space
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    /// `dt, 2dt, …, T`: the times a solver kernel table must cover.
    pub fn kernel_times(&self) -> Vec<f64> {
        (1..=self.nt).map(|n| self.time(n)).collect()
    }

    /// Whether `C★ dt^{1-r}/(1-r) < 1`, i.e. a single step of unit noise
    /// has variance below one.
    pub fn single_step_variance_ok(&self, cstar: f64, ratio: f64) -> bool {
        cstar * self.dt().powf(1.0 - ratio) / (1.0 - ratio) < 1.0
    }

    /// Same grid with `dt` and `dx` halved.
    pub fn refined(&self) -> Result<Self> {
        Self::new(self.t_end, 2 * self.nt, self.half_width(), 2 * self.nx())
    }
}

/// Kernel table at the solver times on the solver grid.
pub fn solver_kernel(
    params: &ModelParams,
    grid: &GridSpec,
    opts: &KernelOptions,
) -> Result<KernelTable> {
    build_kernel_table_with(params, &grid.kernel_times(), grid.space(), opts)
}

/// Space-time white noise increments `ΔW[n][j] ~ N(0, dt·dx)` for
/// `n = 0..nt`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub seed: u64,
    nt: usize,
    nx: usize,
    increments: Vec<f64>,
}

impl NoisePath {
    pub fn row(&self, n: usize) -> &[f64] {
        &self.increments[n * self.nx..(n + 1) * self.nx]
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }
}

pub fn sample_noise(grid: &GridSpec, seed: u64) -> NoisePath {
    let sd = (grid.dt() * grid.dx()).sqrt();
    let mut increments = Vec::with_capacity(grid.nt() * grid.nx());
    for n in 0..grid.nt() {
        increments.extend(noise_block(seed, n, 0, grid.nx(), sd));
    }
    NoisePath {
        seed,
        nt: grid.nt(),
        nx: grid.nx(),
        increments,
    }
}

/// Standard normals `j0..j1` of row `n` scaled by `sd`.
///
/// Row `n` is ChaCha stream `n` under key `seed`; normal pair `p` uses words
/// `4p..4p+4`, so any block is generated without touching the rest.
pub fn noise_block(seed: u64, n: usize, j0: usize, j1: usize, sd: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n as u64);
    let mut out = Vec::with_capacity(j1.saturating_sub(j0));
    let mut p = j0 / 2;
    rng.set_word_pos(4 * p as u128);
    while p * 2 < j1 {
        let a = ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let b = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let r = (-2.0 * a.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * b).sin_cos();
        for (j, z) in [(2 * p, r * c), (2 * p + 1, r * s)] {
            if j >= j0 && j < j1 {
                out.push(sd * z);
            }
        }
        p += 1;
    }
    out
}

/// Seed of replica `r`: one SplitMix64 output from `base`.
pub fn replica_seed(base: u64, r: u64) -> u64 {
    let mut z = base.wrapping_add((r.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One realisation `u[n][j]` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPath {
    pub grid: GridSpec,
    pub values: Vec<Vec<f64>>,
    pub truncation_level: Option<f64>,
    pub seed: u64,
}

impl FieldPath {
    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n]
    }

    pub fn sup_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    /// `max_{n,j} |u[n][j] - v[n][j]|`.
    pub fn sup_diff(&self, other: &FieldPath) -> f64 {
        self.values
            .iter()
            .flatten()
            .zip(other.values.iter().flatten())
            .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()))
    }

    /// First step whose row leaves `(-e^N, e^N)`; rows up to and including
    /// it are unaffected by truncation at level `N`.
    pub fn first_exit(&self, level: f64) -> Option<usize> {
        let c = level.exp();
        self.values
            .iter()
            .position(|row| row.iter().any(|v| v.abs() > c))
    }
}

/// Order in which the history sum is accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HistoryOrder {
    #[default]
    Forward,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolverOptions {
    pub history: HistoryOrder,
}

enum Coef {
    Plain(CoefficientSpec),
    Truncated(TruncatedCoefficient),
}

impl Coef {
    fn new(spec: &CoefficientSpec, level: Option<f64>) -> Result<Self> {
        Ok(match level {
            Some(n) => Coef::Truncated(truncate(spec, n)?),
            None => Coef::Plain(*spec),
        })
    }

    #[inline]
    fn value(&self, x: f64) -> f64 {
        match self {
            Coef::Plain(c) => c.value(x),
            Coef::Truncated(c) => c.value(x),
        }
    }
}

fn check_inputs(u0: &[f64], grid: &GridSpec, kernel: &KernelTable) -> Result<()> {
    if u0.len() != grid.nx() {
        return Err(Error::LengthMismatch {
            expected: grid.nx(),
            got: u0.len(),
        });
    }
    if kernel.grid() != grid.space() {
        return Err(Error::KernelGridMismatch(format!(
            "kernel grid {:?} vs simulation grid {:?}",
            kernel.grid(),
            grid.space()
        )));
    }
    let times = kernel.times();
    if times.len() < grid.nt() {
        return Err(Error::KernelGridMismatch(format!(
            "kernel has {} times, solver needs {}",
            times.len(),
            grid.nt()
        )));
    }
    for n in 1..=grid.nt() {
        let t = grid.time(n);
        if (times[n - 1] - t).abs() > 1e-9 * t {
            return Err(Error::KernelGridMismatch(format!(
                "kernel time {} at index {} differs from t = {t}",
                times[n - 1],
                n - 1
            )));
        }
    }
    Ok(())
}

/// Core time stepper. `noise(n)` returns row `n` of the increments.
#[allow(clippy::too_many_arguments)]
fn run(
    u0: &[f64],
    b: &CoefficientSpec,
    sigma: &CoefficientSpec,
    level: Option<f64>,
    grid: &GridSpec,
    noise: &mut dyn FnMut(usize) -> Vec<f64>,
    kernel: &KernelTable,
    opts: &SolverOptions,
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    check_inputs(u0, grid, kernel)?;
    let bn = Coef::new(b, level)?;
    let sn = Coef::new(sigma, level)?;
    let noise_free = matches!(sigma.sup_norm(), Some(s) if s == 0.0);
    let spectral = kernel.spectral();
    let nt = steps.min(grid.nt());
    let nx = grid.nx();
    let dt = grid.dt();
    let inv_dx = 1.0 / grid.dx();

    let u0_hat = spectral.forward(u0)?;
    let mut history: Vec<Vec<Complex<f64>>> = Vec::with_capacity(nt);
    let mut values = Vec::with_capacity(nt + 1);
    values.push(u0.to_vec());
    let mut forcing = vec![0.0; nx];
    let mut acc = vec![Complex::new(0.0, 0.0); u0_hat.len()];

    for m in 1..=nt {
        let prev = &values[m - 1];
        if noise_free {
            for (f, &u) in forcing.iter_mut().zip(prev) {
                *f = bn.value(u) * dt;
            }
        } else {
            let dw = noise(m - 1);
            for ((f, &u), &w) in forcing.iter_mut().zip(prev).zip(&dw) {
                *f = bn.value(u) * dt + sn.value(u) * w * inv_dx;
            }
        }
        history.push(spectral.forward(&forcing)?);

        let s0 = kernel.symbol(m - 1);
        for ((a, &u), &s) in acc.iter_mut().zip(&u0_hat).zip(s0) {
            *a = u * s;
        }
        let mut add = |n: usize| {
            let s = kernel.symbol(m - n - 1);
            for ((a, &f), &g) in acc.iter_mut().zip(&history[n]).zip(s) {
                *a += f * g;
            }
        };
        match opts.history {
            HistoryOrder::Forward => (0..m).for_each(&mut add),
            HistoryOrder::Reverse => (0..m).rev().for_each(&mut add),
        }
        let row = spectral.inverse(&acc)?;
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: m, index: j });
        }
        values.push(row);
    }
    Ok(values)
}

/// Truncated scheme with `b_N`, `σ_N`.
pub fn evolve_truncated(
    u0: &[f64],
    b: &CoefficientSpec,
    sigma: &CoefficientSpec,
    level: f64,
    grid: &GridSpec,
    noise: &NoisePath,
    kernel: &KernelTable,
) -> Result<FieldPath> {
    evolve_with(
        u0,
        b,
        sigma,
        Some(level),
        grid,
        noise,
        kernel,
        &SolverOptions::default(),
    )
}

/// Untruncated scheme.
pub fn evolve(
    u0: &[f64],
    b: &CoefficientSpec,
    sigma: &CoefficientSpec,
    grid: &GridSpec,
    noise: &NoisePath,
    kernel: &KernelTable,
) -> Result<FieldPath> {
    evolve_with(
        u0,
        b,
        sigma,
        None,
        grid,
        noise,
        kernel,
        &SolverOptions::default(),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn evolve_with(
    u0: &[f64],
    b: &CoefficientSpec,
    sigma: &CoefficientSpec,
    level: Option<f64>,
    grid: &GridSpec,
    noise: &NoisePath,
    kernel: &KernelTable,
    opts: &SolverOptions,
) -> Result<FieldPath> {
    if noise.nt < grid.nt() || noise.nx != grid.nx() {
        return Err(Error::LengthMismatch {
            expected: grid.nt() * grid.nx(),
            got: noise.increments.len(),
        });
    }
    let values = run(
        u0,
        b,
        sigma,
        level,
        grid,
        &mut |n| noise.row(n).to_vec(),
        kernel,
        opts,
        grid.nt(),
    )?;
    Ok(FieldPath {
        grid: *grid,
        values,
        truncation_level: level,
        seed: noise.seed,
    })
}

/// Everything needed to simulate paths apart from the noise.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub grid: GridSpec,
    pub b: CoefficientSpec,
    pub sigma: CoefficientSpec,
    pub u0: Vec<f64>,
    pub kernel: &'a KernelTable,
    pub options: SolverOptions,
}

impl Problem<'_> {
    /// One path driven by the noise of `seed`, generated row by row.
    pub fn path(&self, level: Option<f64>, seed: u64) -> Result<FieldPath> {
        self.path_until(level, seed, self.grid.nt())
    }

    /// Rows `0..=steps` of [`Problem::path`].
    pub fn path_until(&self, level: Option<f64>, seed: u64, steps: usize) -> Result<FieldPath> {
        let sd = (self.grid.dt() * self.grid.dx()).sqrt();
        let nx = self.grid.nx();
        let values = run(
            &self.u0,
            &self.b,
            &self.sigma,
            level,
            &self.grid,
            &mut |n| noise_block(seed, n, 0, nx, sd),
            self.kernel,
            &self.options,
            steps,
        )?;
        Ok(FieldPath {
            grid: self.grid,
            values,
            truncation_level: level,
            seed,
        })
    }

    /// Replicas `0..replicas` with seeds [`replica_seed`]`(base_seed, r)`,
    /// reduced to `f(path)` in parallel; the output order is the replica
    /// order regardless of scheduling.
    pub fn map_replicas<T, F>(
        &self,
        level: Option<f64>,
        base_seed: u64,
        replicas: usize,
        f: F,
    ) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(FieldPath) -> T + Sync + Send,
    {
        (0..replicas as u64)
            .into_par_iter()
            .map(|r| self.path(level, replica_seed(base_seed, r)).map(&f))
            .collect()
    }

    pub fn ensemble(
        &self,
        level: Option<f64>,
        base_seed: u64,
        replicas: usize,
    ) -> Result<Vec<FieldPath>> {
        self.map_replicas(level, base_seed, replicas, |p| p)
    }

    /// Values at grid points `(n, j)` for every replica, `[probe][replica]`.
    pub fn probe_samples(
        &self,
        level: Option<f64>,
        base_seed: u64,
        replicas: usize,
        probes: &[(usize, usize)],
    ) -> Result<Vec<Vec<f64>>> {
        let steps = probes.iter().map(|&(n, _)| n).max().unwrap_or(0);
        if steps > self.grid.nt() {
            return Err(Error::Precondition(format!(
                "probe step {steps} beyond nt = {}",
                self.grid.nt()
            )));
        }
        let rows: Vec<Vec<f64>> = (0..replicas as u64)
            .into_par_iter()
            .map(|r| {
                let p = self.path_until(level, replica_seed(base_seed, r), steps)?;
                Ok(probes.iter().map(|&(n, j)| p.values[n][j]).collect())
            })
            .collect::<Result<_>>()?;
        Ok((0..probes.len())
            .map(|i| rows.iter().map(|r| r[i]).collect())
            .collect())
    }
}

/// Empirical `N_{k,T,γ} = max_{0<t_n≤T, j} e^{-γ t_n} (mean |u(t_n,x_j)|^k)^{1/k}`.
pub fn weighted_norm_estimate(
    ensemble: &[FieldPath],
    k: f64,
    gamma: f64,
    t_end: f64,
) -> Result<f64> {
    let first = ensemble.first().ok_or(Error::EmptyEnsemble)?;
    if !(k >= 1.0) || !(gamma >= 0.0) {
        return Err(Error::Precondition(format!(
            "need k >= 1 and gamma >= 0, got k={k}, gamma={gamma}"
        )));
    }
    if ensemble.iter().any(|p| p.grid != first.grid) {
        return Err(Error::Precondition(
            "ensemble paths live on different grids".into(),
        ));
    }
    if ensemble.len() < 100 {
        log::warn!("weighted norm from only {} paths", ensemble.len());
    }
    let grid = first.grid;
    let mut best: f64 = 0.0;
    for n in 1..=grid.nt() {
        let t = grid.time(n);
        if t > t_end * (1.0 + 1e-12) {
            break;
        }
        let w = (-gamma * t).exp();
        for j in 0..grid.nx() {
            let m = ensemble
                .iter()
                .map(|p| p.values[n][j].abs().powf(k))
                .sum::<f64>()
                / ensemble.len() as f64;
            best = best.max(w * m.powf(1.0 / k));
        }
    }
    Ok(best)
}
