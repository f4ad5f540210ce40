use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cont::ContinuationSettings;
use crate::model::{build_bernoulli_beam, build_coupled_oscillators, example1_oscillators, MechSystem};
use crate::model::ingest::load_mech_system;
use crate::po::{Mesh, PoOptions};
use crate::spectral::ResonanceSettings;
use crate::tor2::TorusOptions;
use crate::verify::VerifySettings;
use crate::{Error, Result};

pub const CONFIG_VERSION: u32 = 1;

/// Named model builders with their parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum Builder {
    Example1,
    CoupledOscillators { c1: f64, c2: f64, b1: f64, b2: f64, f1: f64, f2: f64 },
    BernoulliBeam { n_elements: usize, k_l: f64, k_nl: f64, alpha: f64, beta: f64 },
}

/// Matrix Market files for `M`, `C`, `K` plus the force document.
/// Relative paths resolve against the config file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFiles {
    pub m: PathBuf,
    pub c: PathBuf,
    pub k: PathBuf,
    pub force: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSource {
    Builder(Builder),
    Files(SystemFiles),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Equilibrium,
    Po,
    Torus2,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Equilibrium => "equilibrium",
            Stage::Po => "po",
            Stage::Torus2 => "torus2",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "equilibrium" | "eq" => Ok(Stage::Equilibrium),
            "po" => Ok(Stage::Po),
            "torus2" | "tor" => Ok(Stage::Torus2),
            _ => Err(Error::Config(format!("unknown stage '{s}' (equilibrium, po, torus2)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TorusStage {
    /// Points on the invariant circle are `2 n_h + 1`.
    pub n_h: usize,
    /// Perturbation of the switch off a TR point.
    pub delta: f64,
    /// Lifted samples per excitation period.
    pub n_t: usize,
    pub options: TorusOptions,
}

impl Default for TorusStage {
    fn default() -> Self {
        Self { n_h: 10, delta: 1e-3, n_t: 10, options: TorusOptions::default() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyStage {
    /// Cycles of the periodic-orbit stage to check, by excitation frequency.
    pub omegas: Vec<f64>,
    pub settings: VerifySettings,
}

impl Default for VerifyStage {
    fn default() -> Self {
        Self { omegas: Vec::new(), settings: VerifySettings::default() }
    }
}

/// One JSON document describing a run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    pub system: SystemSource,
    #[serde(default = "default_modes")]
    pub modes: Vec<usize>,
    #[serde(default = "default_order")]
    pub order: u32,
    pub omega_range: (f64, f64),
    pub eps: f64,
    #[serde(default = "default_stages")]
    pub stages: Vec<Stage>,
    /// Displacement DOFs reported as `amp_<dof>`.
    #[serde(default = "default_outputs")]
    pub outputs: Vec<usize>,
    /// Lifted samples per excitation period for amplitudes.
    #[serde(default = "default_n_pt")]
    pub n_pt: usize,
    #[serde(default)]
    pub omega_ref: Option<f64>,
    #[serde(default)]
    pub resonance: ResonanceSettings,
    #[serde(default)]
    pub continuation: ContinuationSettings,
    #[serde(default)]
    pub po: PoOptions,
    #[serde(default)]
    pub mesh: Mesh,
    #[serde(default)]
    pub torus: TorusStage,
    #[serde(default)]
    pub verify: VerifyStage,
    /// Directory the relative paths in `system` resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_modes() -> Vec<usize> {
    vec![0]
}
fn default_order() -> u32 {
    3
}
fn default_stages() -> Vec<Stage> {
    vec![Stage::Equilibrium]
}
fn default_outputs() -> Vec<usize> {
    vec![0]
}
fn default_n_pt() -> usize {
    64
}

impl Config {
    /// Example 1 over `[0.7, 1.1]` at `eps = 0.01`, both modes, order 3.
    pub fn example1() -> Self {
        Self {
            version: CONFIG_VERSION,
            system: SystemSource::Builder(Builder::Example1),
            modes: vec![0, 1],
            order: 3,
            omega_range: (0.7, 1.1),
            eps: 0.01,
            stages: default_stages(),
            outputs: vec![0, 1],
            n_pt: default_n_pt(),
            omega_ref: None,
            resonance: ResonanceSettings::default(),
            continuation: ContinuationSettings::default(),
            po: PoOptions::default(),
            mesh: Mesh::default(),
            torus: TorusStage::default(),
            verify: VerifyStage::default(),
            base_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_json(&std::fs::read_to_string(path)?)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.version != CONFIG_VERSION {
            return bad(format!("config version {} not supported (expected {CONFIG_VERSION})", self.version));
        }
        let (lo, hi) = self.omega_range;
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
            return bad(format!("omega_range [{lo}, {hi}] must satisfy 0 < lo < hi"));
        }
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return bad(format!("eps = {} must be finite and nonnegative", self.eps));
        }
        if self.modes.is_empty() {
            return bad("no master modes".into());
        }
        if self.order < 2 {
            return bad(format!("order {} below 2", self.order));
        }
        if self.outputs.is_empty() || self.n_pt == 0 {
            return bad("need at least one output DOF and n_pt > 0".into());
        }
        let mut st = self.stages.clone();
        st.sort();
        st.dedup();
        if st.len() != self.stages.len() {
            return bad("repeated stage".into());
        }
        self.continuation.validate()?;
        Ok(())
    }

    pub fn build_system(&self) -> Result<MechSystem> {
        let mech = match &self.system {
            SystemSource::Builder(Builder::Example1) => example1_oscillators(),
            SystemSource::Builder(Builder::CoupledOscillators { c1, c2, b1, b2, f1, f2 }) => {
                build_coupled_oscillators(*c1, *c2, *b1, *b2, *f1, *f2)?
            }
            SystemSource::Builder(Builder::BernoulliBeam { n_elements, k_l, k_nl, alpha, beta }) => {
                build_bernoulli_beam(*n_elements, *k_l, *k_nl, *alpha, *beta)?
            }
            SystemSource::Files(f) => {
                let at = |p: &PathBuf| match &self.base_dir {
                    Some(d) if p.is_relative() => d.join(p),
                    _ => p.clone(),
                };
                load_mech_system(at(&f.m), at(&f.c), at(&f.k), at(&f.force))?
            }
        };
        let n = mech.m.nrows();
        if let Some(&d) = self.outputs.iter().find(|&&d| d >= n) {
            return Err(Error::Config(format!("output DOF {d} out of range for {n} DOFs")));
        }
        Ok(mech)
    }
}
