//! TOML run configuration. Complex numbers are `[re, im]` pairs; unknown
//! keys are rejected.

use std::path::{Path, PathBuf};

use gradedchain::chain::ChainSpec;
use gradedchain::{Complex64, LiftConvention, ModelSpec};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub chain: ChainSection,
    pub bethe: Option<BetheSection>,
    pub spectrum: Option<SpectrumSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Lift {
    Exchange,
    Diagonal,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub m: usize,
    pub n: usize,
    pub multiplicities: Vec<usize>,
    pub q_re: f64,
    #[serde(default)]
    pub q_im: f64,
    #[serde(default = "default_lift")]
    pub lift_convention: Lift,
}

fn default_lift() -> Lift {
    Lift::Exchange
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub p0: usize,
    #[serde(default = "default_true")]
    pub homogeneous: bool,
    #[serde(default)]
    pub inhomogeneities: Vec<[f64; 2]>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetheSection {
    pub magnon_counts: Vec<usize>,
    /// One seed configuration: per level, `[re, im]` per magnon.
    #[serde(default)]
    pub seeds: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    pub final_branch: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_newton_tol")]
    pub tol: f64,
    #[serde(default)]
    pub mu_grid: Vec<[f64; 2]>,
    pub pseudo_vacuum_labels: Option<Vec<usize>>,
}

fn default_max_iter() -> usize {
    200
}

fn default_newton_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Hamiltonian,
    Transfer,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub operator: OperatorKind,
    pub mu: Option<[f64; 2]>,
    pub degeneracy_tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    #[serde(default = "default_format")]
    pub format: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { path: None, format: default_format() }
    }
}

fn default_format() -> String {
    "json".into()
}

pub fn complex(pair: [f64; 2]) -> Complex64 {
    Complex64::new(pair[0], pair[1])
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.output.format != "json" {
            return Err(CliError::Config(format!(
                "unsupported output format {:?}; only \"json\" is available",
                cfg.output.format
            )));
        }
        Ok(cfg)
    }

    pub fn model_spec(&self) -> Result<ModelSpec, CliError> {
        let m = &self.model;
        let lift = match m.lift_convention {
            Lift::Exchange => LiftConvention::Exchange,
            Lift::Diagonal => LiftConvention::Diagonal,
        };
        Ok(ModelSpec::new(m.m, m.n, m.multiplicities.clone(), Complex64::new(m.q_re, m.q_im), lift)?)
    }

    pub fn chain_spec(&self) -> Result<ChainSpec, CliError> {
        let model = self.model_spec()?;
        let c = &self.chain;
        if c.homogeneous {
            if !c.inhomogeneities.is_empty() {
                return Err(CliError::Config(
                    "chain.inhomogeneities must be empty when chain.homogeneous = true".into(),
                ));
            }
            Ok(ChainSpec::homogeneous(model, c.p0)?)
        } else {
            if c.inhomogeneities.len() != c.p0 {
                return Err(CliError::Config(format!(
                    "chain.inhomogeneities has {} entries, expected p0 = {}",
                    c.inhomogeneities.len(),
                    c.p0
                )));
            }
            Ok(ChainSpec::new(model, c.inhomogeneities.iter().copied().map(complex).collect())?)
        }
    }
}
