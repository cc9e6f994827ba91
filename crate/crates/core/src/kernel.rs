//! The space-time fractional heat kernel `G_t(x)` on a periodic grid.
//!
//! `G_t` has Fourier symbol `E_β(-t^β |ξ|^α)`. A [`KernelTable`] stores the
//! symbol on the dual grid of a uniform periodic grid together with the
//! kernel values obtained by discrete Fourier inversion, so that
//! `Σ_j G_t(x_j) dx = 1` holds to rounding.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};
use crate::specfun::{MittagLeffler, MlEvalConfig};

/// Orders of the equation in one spatial dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    alpha: f64,
    beta: f64,
}

impl ModelParams {
    /// `α ∈ (1/2, 2]`, `β ∈ (0, 1]`, `β < α`.
    ///
    /// With `d = 1` the condition `d < min(2, 1/β)·α` is exactly
    /// `α > 1/2` and `β < α`. `β = 1` gives the classical heat equation.
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::Domain(format!(
                "alpha must lie in (0, 2], got {alpha}"
            )));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::Domain(format!(
                "beta must lie in (0, 1], got {beta}"
            )));
        }
        if !(2.0 * alpha > 1.0) {
            return Err(Error::Domain(format!(
                "d = 1 requires alpha > 1/2, got {alpha}"
            )));
        }
        if !(beta < alpha) {
            return Err(Error::Domain(format!(
                "d = 1 requires beta < alpha, got beta={beta}, alpha={alpha}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        1
    }

    /// `β/α`.
    pub fn ratio(&self) -> f64 {
        self.beta / self.alpha
    }
}

/// Uniform periodic grid `x_j = -L + j·dx`, `dx = 2L/nx`, `j = 0..nx`.
///
/// `x = 0` sits at `j = nx/2`, and `x_{nx-j} = -x_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    half_width: f64,
    nx: usize,
}

impl SpatialGrid {
    pub fn new(half_width: f64, nx: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        if nx < 4 || !nx.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "need an even number of at least 4 points, got {nx}"
            )));
        }
        Ok(Self { half_width, nx })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.nx as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|j| self.x(j)).collect()
    }

    /// Index of `x = 0`.
    pub fn center(&self) -> usize {
        self.nx / 2
    }

    /// Nearest grid index to `x`, wrapped into the box.
    pub fn index_of(&self, x: f64) -> usize {
        let k = ((x + self.half_width) / self.dx()).round() as i64;
        k.rem_euclid(self.nx as i64) as usize
    }

    /// Number of non-negative wavenumbers `ξ_k = πk/L`, `k = 0..=nx/2`.
    pub fn n_freq(&self) -> usize {
        self.nx / 2 + 1
    }

    pub fn wavenumber(&self, k: usize) -> f64 {
        PI * k as f64 / self.half_width
    }

    /// Highest resolved wavenumber `π/dx`.
    pub fn nyquist(&self) -> f64 {
        self.wavenumber(self.nx / 2)
    }
}

/// `E_β(-t^β |ξ|^α)`.
pub fn kernel_symbol(params: &ModelParams, t: f64, xi: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!(
            "kernel time must be positive, got {t}"
        )));
    }
    let ml = MittagLeffler::new(params.beta, MlEvalConfig::default())?;
    symbol_with(&ml, params, t, xi)
}

fn symbol_with(ml: &MittagLeffler, params: &ModelParams, t: f64, xi: f64) -> Result<f64> {
    let s = t.powf(params.beta) * xi.abs().powf(params.alpha);
    ml.eval(-s)
}

/// Forward and inverse real FFT plans of one length.
#[derive(Clone)]
pub struct Spectral {
    n: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral").field("n", &self.n).finish()
    }
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        let mut planner = RealFftPlanner::<f64>::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalised DFT of a real sequence, non-negative frequencies only.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<Complex<f64>>> {
        let mut buf = input.to_vec();
        let mut out = self.forward.make_output_vec();
        self.forward
            .process(&mut buf, &mut out)
            .map_err(|e| Error::Fft(e.to_string()))?;
        Ok(out)
    }

    /// Inverse of [`Spectral::forward`] including the `1/n` factor.
    pub fn inverse(&self, spectrum: &[Complex<f64>]) -> Result<Vec<f64>> {
        let mut buf = spectrum.to_vec();
        buf[0].im = 0.0;
        if let Some(last) = buf.last_mut() {
            if self.n.is_multiple_of(2) {
                last.im = 0.0;
            }
        }
        let mut out = self.inverse.make_output_vec();
        self.inverse
            .process(&mut buf, &mut out)
            .map_err(|e| Error::Fft(e.to_string()))?;
        let scale = 1.0 / self.n as f64;
        out.iter_mut().for_each(|v| *v *= scale);
        Ok(out)
    }
}

/// Tuning for [`build_kernel_table_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelOptions {
    pub ml: MlEvalConfig,
    /// Largest admissible kernel mass outside `[-L, L]` at the last time.
    pub tail_mass_tol: f64,
    /// Symbol value at the Nyquist wavenumber above which aliasing is reported.
    pub nyquist_tol: f64,
    /// Most negative kernel value tolerated before reporting ringing.
    pub negativity_tol: f64,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self {
            ml: MlEvalConfig::default(),
            tail_mass_tol: 1e-6,
            nyquist_tol: 1e-8,
            negativity_tol: 1e-8,
        }
    }
}

/// Resolution problems found while building a table. They do not stop the
/// build.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelWarning {
    /// The symbol has not decayed at the Nyquist wavenumber.
    Aliasing { t: f64, symbol_at_nyquist: f64 },
    /// Gibbs ringing pushed kernel values below zero.
    Negative { t: f64, min_value: f64 },
}

impl fmt::Display for KernelWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelWarning::Aliasing {
                t,
                symbol_at_nyquist,
            } => write!(
                f,
                "aliasing: symbol {symbol_at_nyquist:.3e} at the Nyquist wavenumber for t = {t}"
            ),
            KernelWarning::Negative { t, min_value } => {
                write!(f, "ringing: kernel minimum {min_value:.3e} at t = {t}")
            }
        }
    }
}

/// Kernel values and symbols on a fixed grid at a list of times.
#[derive(Debug, Clone)]
pub struct KernelTable {
    params: ModelParams,
    grid: SpatialGrid,
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    symbols: Vec<Vec<f64>>,
    tail_mass: f64,
    warnings: Vec<KernelWarning>,
    spectral: Spectral,
}

/// [`build_kernel_table_with`] with default options.
pub fn build_kernel_table(
    params: &ModelParams,
    times: &[f64],
    grid: &SpatialGrid,
) -> Result<KernelTable> {
    build_kernel_table_with(params, times, grid, &KernelOptions::default())
}

pub fn build_kernel_table_with(
    params: &ModelParams,
    times: &[f64],
    grid: &SpatialGrid,
    opts: &KernelOptions,
) -> Result<KernelTable> {
    if times.is_empty() {
        return Err(Error::InvalidGrid("no kernel times".into()));
    }
    if !(times[0] > 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid(
            "kernel times must be positive and strictly increasing".into(),
        ));
    }
    let ml = MittagLeffler::new(params.beta, opts.ml)?;
    let spectral = Spectral::new(grid.nx());

    let t_max = *times.last().unwrap();
    let tail_mass = tail_mass_estimate(&ml, params, grid, t_max)?;
    if !(tail_mass <= opts.tail_mass_tol) {
        return Err(Error::GridTooNarrow {
            tail_mass,
            tolerance: opts.tail_mass_tol,
            half_width: grid.half_width(),
        });
    }

    let mut values = Vec::with_capacity(times.len());
    let mut symbols = Vec::with_capacity(times.len());
    let mut warnings = Vec::new();
    for &t in times {
        let sym = symbol_row(&ml, params, grid, t)?;
        let row = invert(&spectral, grid, &sym)?;

        let nyq = *sym.last().unwrap();
        if nyq.abs() > opts.nyquist_tol {
            warnings.push(KernelWarning::Aliasing {
                t,
                symbol_at_nyquist: nyq,
            });
        }
        let min = row.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -opts.negativity_tol {
            warnings.push(KernelWarning::Negative { t, min_value: min });
        }
        values.push(row);
        symbols.push(sym);
    }
    let worst = |pick: fn(&KernelWarning) -> Option<f64>| {
        let vals: Vec<f64> = warnings.iter().filter_map(pick).collect();
        (!vals.is_empty()).then(|| (vals.len(), vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))))
    };
    if let Some((count, v)) = worst(|w| match w {
        KernelWarning::Aliasing {
            symbol_at_nyquist, ..
        } => Some(*symbol_at_nyquist),
        _ => None,
    }) {
        log::warn!(
            "aliasing at {count} of {} times: Nyquist symbol up to {v:.3e}",
            times.len()
        );
    }
    if let Some((count, v)) = worst(|w| match w {
        KernelWarning::Negative { min_value, .. } => Some(*min_value),
        _ => None,
    }) {
        log::warn!(
            "ringing at {count} of {} times: kernel minimum down to -{v:.3e}",
            times.len()
        );
    }
    Ok(KernelTable {
        params: *params,
        grid: *grid,
        times: times.to_vec(),
        values,
        symbols,
        tail_mass,
        warnings,
        spectral,
    })
}

fn symbol_row(
    ml: &MittagLeffler,
    params: &ModelParams,
    grid: &SpatialGrid,
    t: f64,
) -> Result<Vec<f64>> {
    (0..grid.n_freq())
        .map(|k| symbol_with(ml, params, t, grid.wavenumber(k)))
        .collect()
}

/// `G(x_j) = (1/2L) Σ_k S_k e^{iξ_k x_j}`; the shift to `x_0 = -L` is the
/// factor `(-1)^k`.
fn invert(spectral: &Spectral, grid: &SpatialGrid, sym: &[f64]) -> Result<Vec<f64>> {
    let spec: Vec<Complex<f64>> = sym
        .iter()
        .enumerate()
        .map(|(k, &s)| Complex::new(if k % 2 == 0 { s } else { -s }, 0.0))
        .collect();
    let mut row = spectral.inverse(&spec)?;
    // inverse() divides by nx; the kernel needs 1/(2L) = 1/(nx dx)
    let scale = 1.0 / grid.dx();
    let n = row.len();
    for v in row.iter_mut() {
        *v *= scale;
    }
    // exact mirror symmetry about x = 0
    for j in 1..n / 2 {
        let m = 0.5 * (row[j] + row[n - j]);
        row[j] = m;
        row[n - j] = m;
    }
    Ok(row)
}

/// Kernel mass outside `[-L, L]` at time `t`.
///
/// The kernel is rebuilt on the doubled box `[-2L, 2L)` at the same spacing
/// and the mass in `L ≤ |x| < 2L` is rescaled by `1/(1 - 2^{-α})`, which is
/// exact for a `|x|^{-1-α}` tail and conservative for lighter tails.
pub fn tail_mass_estimate(
    ml: &MittagLeffler,
    params: &ModelParams,
    grid: &SpatialGrid,
    t: f64,
) -> Result<f64> {
    let wide = SpatialGrid::new(2.0 * grid.half_width(), 2 * grid.nx())?;
    let spectral = Spectral::new(wide.nx());
    let sym = symbol_row(ml, params, &wide, t)?;
    let row = invert(&spectral, &wide, &sym)?;
    let l = grid.half_width();
    let outer: f64 = row
        .iter()
        .enumerate()
        .filter(|(j, _)| wide.x(*j).abs() >= l * (1.0 - 1e-12))
        .map(|(_, g)| g.abs())
        .sum::<f64>()
        * wide.dx();
    Ok(outer / (1.0 - 2f64.powf(-params.alpha)))
}

impl KernelTable {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n]
    }

    /// Symbol `E_β(-t_n^β ξ_k^α)` for `k = 0..=nx/2`.
    pub fn symbol(&self, n: usize) -> &[f64] {
        &self.symbols[n]
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn warnings(&self) -> &[KernelWarning] {
        &self.warnings
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// Index of `t` in the table, matching to a relative `1e-9`.
    pub fn time_index(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * s.abs().max(t.abs()))
            .ok_or_else(|| Error::Precondition(format!("time {t} is not in the kernel table")))
    }

    pub fn mass(&self, n: usize) -> f64 {
        self.values[n].iter().sum::<f64>() * self.grid.dx()
    }

    /// `max_j |G(x_j) - G(-x_j)|`.
    pub fn symmetry_residual(&self, n: usize) -> f64 {
        let row = &self.values[n];
        let nx = row.len();
        (1..nx)
            .map(|j| (row[j] - row[nx - j]).abs())
            .fold(0.0, f64::max)
    }
}

/// `Σ_j G_t(x_j)² dx`.
pub fn kernel_l2_norm(table: &KernelTable, t: f64) -> Result<f64> {
    let n = table.time_index(t)?;
    Ok(table.row(n).iter().map(|g| g * g).sum::<f64>() * table.grid.dx())
}

/// Constants of the two-sided bound
/// `c1 (t^{-β/α} ∧ t^β/|x|^{1+α}) ≤ G_t(x) ≤ c2 (t^{-β/α} ∧ t^β/|x|^{1+α})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelCertificate {
    pub c1_hat: f64,
    pub c2_hat: f64,
    /// False at `α = 2`, where the kernel decays faster than any power and
    /// `c1_hat` only reflects the width of the grid.
    pub lower_reliable: bool,
    pub points: usize,
}

/// Largest `c2_hat` accepted by [`kernel_bounds_certificate`].
pub const CERTIFICATE_MAX_C2: f64 = 1e3;

/// Tightest constants over all grid points with `G > 1e-10`.
pub fn kernel_bounds_certificate(table: &KernelTable) -> Result<KernelCertificate> {
    let alpha = table.params.alpha;
    let beta = table.params.beta;
    let r = table.params.ratio();
    let mut c1 = f64::INFINITY;
    let mut c2: f64 = 0.0;
    let mut points = 0;
    for (n, &t) in table.times.iter().enumerate() {
        let near = t.powf(-r);
        for (j, &g) in table.values[n].iter().enumerate() {
            if !(g > 1e-10) {
                continue;
            }
            let x = table.grid.x(j).abs();
            let far = if x > 0.0 {
                t.powf(beta) / x.powf(1.0 + alpha)
            } else {
                f64::INFINITY
            };
            let env = near.min(far);
            let ratio = g / env;
            c1 = c1.min(ratio);
            c2 = c2.max(ratio);
            points += 1;
        }
    }
    if points < 2 {
        return Err(Error::Certificate(format!(
            "only {points} grid points carry kernel mass above 1e-10"
        )));
    }
    if !c2.is_finite() || c2 > CERTIFICATE_MAX_C2 {
        return Err(Error::Certificate(format!(
            "upper constant {c2:e} exceeds {CERTIFICATE_MAX_C2:e}"
        )));
    }
    Ok(KernelCertificate {
        c1_hat: c1,
        c2_hat: c2,
        lower_reliable: alpha < 2.0,
        points,
    })
}

/// Periodic convolution `Σ_j G_{t_n}(x - y_j) f(y_j) dx` on the table grid.
pub fn convolve(table: &KernelTable, t_index: usize, field: &[f64]) -> Result<Vec<f64>> {
    let nx = table.grid.nx();
    if field.len() != nx {
        return Err(Error::LengthMismatch {
            expected: nx,
            got: field.len(),
        });
    }
    if t_index >= table.times.len() {
        return Err(Error::Precondition(format!(
            "time index {t_index} out of range for {} kernel times",
            table.times.len()
        )));
    }
    let mut spec = table.spectral.forward(field)?;
    for (c, s) in spec.iter_mut().zip(&table.symbols[t_index]) {
        *c *= *s;
    }
    table.spectral.inverse(&spec)
}
