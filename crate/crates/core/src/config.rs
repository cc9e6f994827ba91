//! Run configuration read from TOML.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coefficients::CoefficientSpec;
use crate::error::{Error, Result};
use crate::kernel::{KernelOptions, ModelParams};
use crate::solver::GridSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    #[serde(default)]
    pub kernel: KernelSection,
    pub coefficients: CoefficientsSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub truncation: TruncationSection,
    #[serde(default)]
    pub probes: ProbesSection,
    #[serde(default)]
    pub constants: ConstantsSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "T")]
    pub t_end: f64,
    pub nt: usize,
    pub half_width: f64,
    pub nx: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub tail_mass_tol: f64,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            tail_mass_tol: KernelOptions::default().tail_mass_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientEntry {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsSection {
    pub b: CoefficientEntry,
    pub sigma: CoefficientEntry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    /// `values = [c]`
    Constant,
    /// `values = [mass]`: a discrete delta of the given mass at `x = 0`.
    Spike,
    /// `values` lists `u0(x_j)` for every grid point.
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub kind: InitialKind,
    #[serde(default)]
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub replicas: usize,
    pub base_seed: u64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            replicas: 100,
            base_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSection {
    #[serde(rename = "N_list", default)]
    pub n_list: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbesSection {
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default = "default_positions")]
    pub positions: Vec<f64>,
    #[serde(default = "default_orders")]
    pub moment_orders: Vec<f64>,
}

fn default_positions() -> Vec<f64> {
    vec![0.0]
}

fn default_orders() -> Vec<f64> {
    vec![2.0]
}

impl Default for ProbesSection {
    fn default() -> Self {
        Self {
            times: vec![],
            positions: default_positions(),
            moment_orders: default_orders(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSection {
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(rename = "K0", default, skip_serializing_if = "Option::is_none")]
    pub k0: Option<f64>,
}

fn default_c() -> f64 {
    crate::bounds::DEFAULT_C
}

impl Default for ConstantsSection {
    fn default() -> Self {
        Self {
            c: default_c(),
            k0: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> Result<[u8; 32]> {
        Ok(Sha256::digest(self.to_toml()?.as_bytes()).into())
    }

    pub fn validate(&self) -> Result<()> {
        let as_config = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        self.params().map_err(as_config)?;
        let grid = self.grid_spec().map_err(as_config)?;
        self.b().map_err(as_config)?;
        self.sigma().map_err(as_config)?;
        self.initial_values().map_err(as_config)?;
        if !(self.kernel.tail_mass_tol > 0.0) {
            return Err(Error::Config(
                "kernel.tail_mass_tol must be positive".into(),
            ));
        }
        if self.ensemble.replicas == 0 {
            return Err(Error::Config("ensemble.replicas must be at least 1".into()));
        }
        let n = &self.truncation.n_list;
        if n.iter().any(|v| !(v.is_finite() && *v > 0.0)) || n.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config(
                "truncation.N_list must be positive and increasing".into(),
            ));
        }
        for &t in &self.probes.times {
            if !(t > 0.0 && t <= grid.t_end() * (1.0 + 1e-12)) {
                return Err(Error::Config(format!("probe time {t} outside (0, T]")));
            }
        }
        for &x in &self.probes.positions {
            if !(x.abs() <= grid.half_width()) {
                return Err(Error::Config(format!("probe position {x} outside the box")));
            }
        }
        if self.probes.moment_orders.iter().any(|&k| !(k >= 1.0)) {
            return Err(Error::Config("moment orders must be >= 1".into()));
        }
        if !(self.constants.c >= 1.0) {
            return Err(Error::Config("constants.c must be >= 1".into()));
        }
        if matches!(self.constants.k0, Some(k) if !(k > 0.0)) {
            return Err(Error::Config("constants.K0 must be positive".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.model.alpha, self.model.beta)
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        let g = &self.grid;
        GridSpec::new(g.t_end, g.nt, g.half_width, g.nx)
    }

    pub fn kernel_options(&self) -> KernelOptions {
        KernelOptions {
            tail_mass_tol: self.kernel.tail_mass_tol,
            ..KernelOptions::default()
        }
    }

    pub fn b(&self) -> Result<CoefficientSpec> {
        let e = &self.coefficients.b;
        CoefficientSpec::from_family(&e.family, &e.params)
    }

    pub fn sigma(&self) -> Result<CoefficientSpec> {
        let e = &self.coefficients.sigma;
        CoefficientSpec::from_family(&e.family, &e.params)
    }

    pub fn initial_values(&self) -> Result<Vec<f64>> {
        let grid = self.grid_spec()?;
        let nx = grid.nx();
        let v = &self.initial.values;
        let one = |what: &str| -> Result<f64> {
            match v.as_slice() {
                [] => Ok(if what == "spike" { 1.0 } else { 0.0 }),
                [c] if c.is_finite() => Ok(*c),
                _ => Err(Error::Config(format!(
                    "initial kind {what} takes one finite value"
                ))),
            }
        };
        match self.initial.kind {
            InitialKind::Constant => Ok(vec![one("constant")?; nx]),
            InitialKind::Spike => {
                let mut u = vec![0.0; nx];
                u[grid.space().center()] = one("spike")? / grid.dx();
                Ok(u)
            }
            InitialKind::Table => {
                if v.len() != nx {
                    return Err(Error::Config(format!(
                        "initial table has {} values, grid has {nx} points",
                        v.len()
                    )));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Config("initial table has non-finite values".into()));
                }
                Ok(v.clone())
            }
        }
    }

    pub fn u0_sup(&self) -> Result<f64> {
        Ok(self
            .initial_values()?
            .iter()
            .fold(0.0, |m: f64, v| m.max(v.abs())))
    }
}
