//! Subcommands of the `fracspde` binary.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::bounds::{
    contraction_constant, convergence_threshold, gamma_choice, k0_default, n0,
    tail_bounded_threshold, tail_linear_threshold, ModelConstants,
};
use crate::coefficients::lip_n;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{read_ensemble, write_replica, EnsembleHeader};
use crate::kernel::{build_kernel_table_with, kernel_l2_norm, KernelTable};
use crate::solver::{replica_seed, solver_kernel, FieldPath, Problem, SolverOptions};
use crate::specfun::cstar;
use crate::verify::{
    check_moment_bounds, check_tail_bounds, convergence_study, mean, variance, write_csv,
    BoundReport, Probe, Verdict,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

/// Studies run by `verify`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    Moments,
    Tails,
    Converge,
    All,
}

impl Study {
    fn includes(self, s: Study) -> bool {
        self == Study::All || self == s
    }
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(out)?;
    Ok(BufWriter::new(File::create(out.join(name))?))
}

/// Level at which Lipschitz constants enter the constants table.
fn reference_level(cfg: &RunConfig) -> f64 {
    cfg.truncation.n_list.first().copied().unwrap_or(1.0)
}

pub fn model_constants(cfg: &RunConfig, level: f64) -> Result<ModelConstants> {
    ModelConstants::from_coefficients(
        cfg.params()?,
        &cfg.b()?,
        &cfg.sigma()?,
        cfg.u0_sup()?,
        level,
    )
}

/// `constants`: every derived constant as `name,value`.
pub fn cmd_constants(cfg: &RunConfig, out: Option<&Path>) -> Result<Vec<(String, f64)>> {
    let c = model_constants(cfg, reference_level(cfg))?;
    let sigma = cfg.sigma()?;
    let b = cfg.b()?;
    let t_end = cfg.grid.t_end;
    let k = cfg.probes.moment_orders.first().copied().unwrap_or(2.0);
    let mut rows: Vec<(String, f64)> = vec![
        ("alpha".into(), c.params.alpha()),
        ("beta".into(), c.params.beta()),
        ("r".into(), c.ratio()),
        ("C_star".into(), c.cstar),
        ("Gamma(1-r)".into(), c.gamma_r),
        ("L_b".into(), c.l_b),
        ("L_sigma".into(), c.l_sigma),
        ("u0_sup".into(), c.u0_sup),
        ("C0".into(), c.c0),
        ("C_hash".into(), c.chash),
        ("gamma_bounded".into(), c.gamma_bounded),
        ("C_abg".into(), c.c_abg),
        ("C_bigstar".into(), c.cstar_big),
        ("A0".into(), c.a0()),
        ("c".into(), cfg.constants.c),
        ("k".into(), k),
        ("T".into(), t_end),
    ];
    if let Some(s) = c.sigma_sup {
        rows.push(("sigma_sup".into(), s));
        let k0 = match cfg.constants.k0 {
            Some(v) => v,
            None => k0_default(&c, k, t_end)?,
        };
        rows.push(("K0".into(), k0));
        rows.push((
            "tail_threshold_bounded(T)".into(),
            tail_bounded_threshold(&c, t_end)?,
        ));
    }
    if c.l_sigma > 0.0 {
        rows.push(("k_min".into(), c.min_moment_order()));
        rows.push(("contraction(k)".into(), contraction_constant(&c, k)?));
        rows.push((
            "tail_threshold_linear(T)".into(),
            tail_linear_threshold(&c, t_end),
        ));
        let th = convergence_threshold(&c, cfg.constants.c, t_end)?;
        rows.push(("N_T".into(), th.n_t));
        rows.push(("c_T".into(), th.c_t));
    }
    rows.push((
        "N_0".into(),
        n0(&sigma, 0.25, 50.0).unwrap_or(f64::INFINITY),
    ));
    for &n in &cfg.truncation.n_list {
        let level = ModelConstants {
            l_nb: lip_n(&b, n.exp(), 4000),
            l_nsigma: lip_n(&sigma, n.exp(), 4000),
            ..c
        };
        rows.push((format!("L_N,b(N={n})"), level.l_nb));
        rows.push((format!("L_N,sigma(N={n})"), level.l_nsigma));
        if level.l_nsigma > 0.0 {
            rows.push((
                format!("gamma(N={n})"),
                gamma_choice(&level, cfg.constants.c)?,
            ));
        }
    }
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (name, v) in &rows {
        println!("{name:<width$}  {v:.10e}");
    }
    if let Some(out) = out {
        let mut w = create(out, "constants.csv")?;
        writeln!(w, "name,value")?;
        for (name, v) in &rows {
            writeln!(w, "\"{name}\",{v}")?;
        }
        w.flush()?;
    }
    Ok(rows)
}

/// Result of the kernel identity checks for one table row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelCheck {
    pub t: f64,
    pub mass: f64,
    pub symmetry: f64,
    pub l2: f64,
    pub l2_expected: f64,
    pub l2_closed_form: Option<f64>,
    pub pass: bool,
}

pub const MASS_TOL: f64 = 1e-4;
pub const SYMMETRY_TOL: f64 = 1e-10;
pub const L2_REL_TOL: f64 = 1e-2;
pub const L2_GAUSSIAN_TOL: f64 = 1e-4;

pub fn kernel_checks(table: &KernelTable, cstar_value: f64) -> Result<Vec<KernelCheck>> {
    let p = table.params();
    let gaussian = p.alpha() == 2.0 && p.beta() == 1.0;
    table
        .times()
        .iter()
        .enumerate()
        .map(|(n, &t)| {
            let mass = table.mass(n);
            let symmetry = table.symmetry_residual(n);
            let l2 = kernel_l2_norm(table, t)?;
            let l2_expected = cstar_value * t.powf(-p.ratio());
            let l2_closed_form = gaussian.then(|| (8.0 * std::f64::consts::PI * t).powf(-0.5));
            let pass = (mass - 1.0).abs() <= MASS_TOL
                && symmetry < SYMMETRY_TOL
                && ((l2 - l2_expected) / l2_expected).abs() <= L2_REL_TOL
                && l2_closed_form.is_none_or(|g| ((l2 - g) / g).abs() <= L2_GAUSSIAN_TOL);
            Ok(KernelCheck {
                t,
                mass,
                symmetry,
                l2,
                l2_expected,
                l2_closed_form,
                pass,
            })
        })
        .collect()
}

/// `kernel`: tabulate `G` at the solver times, run the identity checks and
/// dump `kernel.csv` and `kernel_checks.csv`.
pub fn cmd_kernel(cfg: &RunConfig, out: Option<&Path>) -> Result<Vec<KernelCheck>> {
    let params = cfg.params()?;
    let grid = cfg.grid_spec()?;
    let table = build_kernel_table_with(
        &params,
        &grid.kernel_times(),
        grid.space(),
        &cfg.kernel_options(),
    )?;
    let cs = cstar(params.alpha(), params.beta())?.value;
    let checks = kernel_checks(&table, cs)?;
    println!("t,mass,symmetry_residual,l2,l2_expected,l2_closed_form,status");
    let line = |c: &KernelCheck| {
        format!(
            "{},{},{},{},{},{},{}",
            c.t,
            c.mass,
            c.symmetry,
            c.l2,
            c.l2_expected,
            c.l2_closed_form.map(|v| v.to_string()).unwrap_or_default(),
            if c.pass { "pass" } else { "fail" }
        )
    };
    for c in &checks {
        println!("{}", line(c));
    }
    if let Some(out) = out {
        let mut w = create(out, "kernel_checks.csv")?;
        writeln!(
            w,
            "t,mass,symmetry_residual,l2,l2_expected,l2_closed_form,status"
        )?;
        for c in &checks {
            writeln!(w, "{}", line(c))?;
        }
        w.flush()?;
        let mut w = create(out, "kernel.csv")?;
        writeln!(w, "t,x,G")?;
        let xs = grid.space().xs();
        for (n, &t) in table.times().iter().enumerate() {
            for (x, g) in xs.iter().zip(table.row(n)) {
                writeln!(w, "{t},{x},{g}")?;
            }
        }
        w.flush()?;
    }
    Ok(checks)
}

fn problem<'a>(cfg: &RunConfig, kernel: &'a KernelTable) -> Result<Problem<'a>> {
    Ok(Problem {
        grid: cfg.grid_spec()?,
        b: cfg.b()?,
        sigma: cfg.sigma()?,
        u0: cfg.initial_values()?,
        kernel,
        options: SolverOptions::default(),
    })
}

fn probes(cfg: &RunConfig) -> Result<Vec<Probe>> {
    let grid = cfg.grid_spec()?;
    let mut out = Vec::new();
    for &t in &cfg.probes.times {
        for &x in &cfg.probes.positions {
            out.push(Probe::snap(&grid, t, x)?);
        }
    }
    Ok(out)
}

fn level_name(level: Option<f64>) -> String {
    match level {
        Some(n) => format!("ensemble_N{n}.bin"),
        None => "ensemble.bin".into(),
    }
}

/// Replicas per parallel batch while streaming to disk.
const SIM_BATCH: usize = 64;

/// `simulate`: one ensemble file per truncation level (a single untruncated
/// file when the level list is empty) and `summary.csv` with moments at
/// the probes.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let params = cfg.params()?;
    let grid = cfg.grid_spec()?;
    let kernel = solver_kernel(&params, &grid, &cfg.kernel_options())?;
    let problem = problem(cfg, &kernel)?;
    let probes = probes(cfg)?;
    let hash = cfg.hash()?;
    let replicas = cfg.ensemble.replicas;
    let base = cfg.ensemble.base_seed;
    let levels: Vec<Option<f64>> = if cfg.truncation.n_list.is_empty() {
        vec![None]
    } else {
        cfg.truncation.n_list.iter().map(|&n| Some(n)).collect()
    };
    let mut files = Vec::new();
    let mut summary = create(out, "summary.csv")?;
    writeln!(summary, "level,t,x,k,moment,mean,variance")?;
    for level in levels {
        let name = level_name(level);
        let mut w = create(out, &name)?;
        EnsembleHeader {
            config_hash: hash,
            base_seed: base,
            level,
            replicas: replicas as u64,
            rows: grid.nt() as u64 + 1,
            nx: grid.nx() as u64,
        }
        .write(&mut w)?;
        let mut samples = vec![Vec::with_capacity(replicas); probes.len()];
        for start in (0..replicas).step_by(SIM_BATCH) {
            let end = (start + SIM_BATCH).min(replicas);
            let batch: Vec<FieldPath> = (start..end)
                .into_par_iter()
                .map(|r| problem.path(level, replica_seed(base, r as u64)))
                .collect::<Result<_>>()?;
            for path in &batch {
                write_replica(&mut w, path.seed, &path.values)?;
                for (s, p) in samples.iter_mut().zip(&probes) {
                    s.push(path.values[p.n][p.j]);
                }
            }
        }
        w.flush()?;
        let lvl = level
            .map(|n| n.to_string())
            .unwrap_or_else(|| "none".into());
        for (s, p) in samples.iter().zip(&probes) {
            for &k in &cfg.probes.moment_orders {
                let m = mean(&s.iter().map(|u| u.abs().powf(k)).collect::<Vec<_>>());
                writeln!(
                    summary,
                    "{lvl},{},{},{k},{m},{},{}",
                    p.t,
                    p.x,
                    mean(s),
                    variance(s)
                )?;
            }
        }
        files.push(out.join(name));
    }
    summary.flush()?;
    Ok(files)
}

/// Samples at each probe, `[probe][replica]`, read from an ensemble file.
fn samples_from_file(path: &Path, cfg: &RunConfig, probes: &[Probe]) -> Result<Vec<Vec<f64>>> {
    let mut r = BufReader::new(File::open(path)?);
    let (header, reps) = read_ensemble(&mut r)?;
    let grid = cfg.grid_spec()?;
    if header.rows != grid.nt() as u64 + 1 || header.nx != grid.nx() as u64 {
        return Err(Error::Config(format!(
            "ensemble file {} has a {}x{} grid, config has {}x{}",
            path.display(),
            header.rows,
            header.nx,
            grid.nt() + 1,
            grid.nx()
        )));
    }
    if header.config_hash != cfg.hash()? {
        log::warn!(
            "ensemble file {} was produced by a different config",
            path.display()
        );
    }
    Ok(probes
        .iter()
        .map(|p| reps.iter().map(|(_, rows)| rows[p.n][p.j]).collect())
        .collect())
}

/// `verify`: run the requested studies, write `report.csv` and return the
/// rows. A supplied ensemble file replaces simulation in the moment and tail
/// studies.
pub fn cmd_verify(
    cfg: &RunConfig,
    which: Study,
    out: Option<&Path>,
    ensemble: Option<&Path>,
) -> Result<Vec<BoundReport>> {
    let params = cfg.params()?;
    let grid = cfg.grid_spec()?;
    let kernel = solver_kernel(&params, &grid, &cfg.kernel_options())?;
    let problem = problem(cfg, &kernel)?;
    let consts = model_constants(cfg, reference_level(cfg))?;
    let probes = probes(cfg)?;
    let replicas = cfg.ensemble.replicas;
    let base = cfg.ensemble.base_seed;
    let coords: Vec<(usize, usize)> = probes.iter().map(|p| (p.n, p.j)).collect();
    let mut reports = Vec::new();

    if which.includes(Study::Moments) {
        let samples = match ensemble {
            Some(path) => samples_from_file(path, cfg, &probes)?,
            None => problem.probe_samples(None, base, replicas, &coords)?,
        };
        for (s, p) in samples.iter().zip(&probes) {
            for &k in &cfg.probes.moment_orders {
                reports.push(check_moment_bounds(s, &consts, k, p)?);
            }
        }
    }

    if which.includes(Study::Tails) {
        let file_samples = match ensemble {
            Some(path) => Some(samples_from_file(path, cfg, &probes)?),
            None => None,
        };
        for (i, p) in probes.iter().enumerate() {
            let level = match consts.sigma_sup {
                Some(_) => tail_bounded_threshold(&consts, p.t)?,
                None => tail_linear_threshold(&consts, p.t),
            };
            let samples = match &file_samples {
                Some(s) => s[i].clone(),
                None => {
                    // past e^709 the truncation is vacuous in f64
                    let sim = Some(level + 1.0).filter(|n| n.exp().is_finite());
                    problem
                        .probe_samples(sim, base, replicas, &[(p.n, p.j)])?
                        .remove(0)
                }
            };
            reports.push(check_tail_bounds(&samples, &consts, level, p)?);
        }
    }

    if which.includes(Study::Converge) {
        let levels = &cfg.truncation.n_list;
        if levels.is_empty() {
            return Err(Error::Config(
                "convergence study needs truncation.N_list".into(),
            ));
        }
        let k = cfg.probes.moment_orders.first().copied().unwrap_or(2.0);
        let study = convergence_study(&problem, levels, k, base, replicas)?;
        if consts.l_sigma > 0.0 {
            let th = convergence_threshold(&consts, cfg.constants.c, grid.t_end())?;
            log::info!(
                "theory thresholds (reported only): N_T = {}, c_T = {}",
                th.n_t,
                th.c_t
            );
        }
        log::info!(
            "convergence: d_N = {:?}, first vanishing level {:?}, fitted slope {:?}, partial sums {:?}",
            study.d,
            study.first_vanishing,
            study.fitted_slope,
            study.partial_sums
        );
        reports.extend(study.reports(&grid));
    }

    let mut stdout = std::io::stdout().lock();
    write_csv(&mut stdout, &reports)?;
    if let Some(out) = out {
        let mut w = create(out, "report.csv")?;
        write_csv(&mut w, &reports)?;
        w.flush()?;
    }
    Ok(reports)
}

/// Exit code of a finished `verify`.
pub fn verify_exit_code(reports: &[BoundReport]) -> i32 {
    if reports.iter().any(|r| r.verdict == Verdict::Fail) {
        EXIT_FAIL
    } else {
        EXIT_PASS
    }
}
