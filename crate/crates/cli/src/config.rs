use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use subtaylor::mc::McConfig;
use subtaylor::{GroupElement, HeisenbergStructure, HoloPoly, C64};

pub const DEFAULT_SEED: u64 = 20_240_611;
pub const SEED_ENV: &str = "SUBTAYLOR_SEED";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StructureSpec {
    Abelian {
        n: usize,
    },
    Heisenberg {
        pairs: usize,
    },
    Weighted {
        n: usize,
        #[serde(rename = "N")]
        center: usize,
        weights: Vec<f64>,
        seed: u64,
    },
    /// The same document shape that `HeisenbergStructure::to_json` writes.
    Inline {
        n: usize,
        #[serde(rename = "N")]
        center: usize,
        omega: Vec<[f64; 2]>,
        #[serde(default)]
        label: Option<String>,
    },
    File {
        path: PathBuf,
    },
}

impl StructureSpec {
    pub fn build(&self, base_dir: &Path) -> Result<Arc<HeisenbergStructure>> {
        let s = match self {
            StructureSpec::Abelian { n } => HeisenbergStructure::abelian(*n),
            StructureSpec::Heisenberg { pairs } => HeisenbergStructure::standard_heisenberg(*pairs),
            StructureSpec::Weighted { n, center, weights, seed } => {
                HeisenbergStructure::weighted_family(*n, *center, weights, *seed)?
            }
            StructureSpec::Inline { n, center, omega, label } => {
                let doc = serde_json::json!({
                    "n": n,
                    "N": center,
                    "omega": omega,
                    "label": label.clone().unwrap_or_else(|| "inline".into()),
                });
                HeisenbergStructure::from_json(&doc.to_string())?
            }
            StructureSpec::File { path } => {
                let full = base_dir.join(path);
                let text = std::fs::read_to_string(&full)
                    .with_context(|| format!("reading structure file {}", full.display()))?;
                HeisenbergStructure::from_json(&text)?
            }
        };
        Ok(Arc::new(s))
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McFields {
    pub steps: Option<usize>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub streams: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub w: Vec<[f64; 2]>,
    #[serde(default)]
    pub c: Vec<[f64; 2]>,
}

impl TargetSpec {
    pub fn to_element(&self, s: &HeisenbergStructure) -> Result<GroupElement> {
        let unpack = |v: &[[f64; 2]]| v.iter().map(|p| C64::new(p[0], p[1])).collect::<Vec<_>>();
        let mut c = unpack(&self.c);
        if c.is_empty() {
            c = vec![C64::new(0.0, 0.0); s.center_dim()];
        }
        let g = GroupElement::new(unpack(&self.w), c);
        s.check_element(&g)?;
        Ok(g)
    }
}

/// One experiment description. Every field is optional; each subcommand
/// fills the gaps with its own defaults.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub structure: Option<StructureSpec>,
    pub experiment: Option<String>,
    pub polynomials: Vec<String>,
    pub t: Vec<f64>,
    pub mc: McFields,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub epsilons: Vec<f64>,
    pub rank: Option<usize>,
    pub targets: Vec<TargetSpec>,
    pub grid: Option<usize>,
    pub witness_csv: Option<PathBuf>,
    pub threshold: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// A configuration with command-line and environment overrides applied.
pub struct Resolved {
    pub cfg: RunConfig,
    pub base_dir: PathBuf,
    pub seed: u64,
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl Resolved {
    pub fn new(
        cfg: RunConfig,
        base_dir: PathBuf,
        flag_seed: Option<u64>,
        flag_out: Option<PathBuf>,
        flag_format: Option<Format>,
    ) -> Result<Self> {
        let env_seed = match std::env::var(SEED_ENV) {
            Ok(v) => Some(v.trim().parse::<u64>().with_context(|| format!("{SEED_ENV} must be an unsigned integer"))?),
            Err(_) => None,
        };
        let seed = env_seed.or(flag_seed).or(cfg.mc.seed).unwrap_or(DEFAULT_SEED);
        let format = flag_format.or(cfg.format).unwrap_or_default();
        let out = flag_out.or_else(|| cfg.out.clone());
        Ok(Self { cfg, base_dir, seed, format, out })
    }

    pub fn check_experiment(&self, name: &str) -> Result<()> {
        match &self.cfg.experiment {
            Some(e) if e != name => bail!("config describes experiment '{e}', not '{name}'"),
            _ => Ok(()),
        }
    }

    pub fn structure_or(&self, default: StructureSpec) -> Result<Arc<HeisenbergStructure>> {
        self.cfg.structure.as_ref().unwrap_or(&default).build(&self.base_dir)
    }

    pub fn polynomials(&self, s: &Arc<HeisenbergStructure>, defaults: &[&str]) -> Result<Vec<HoloPoly>> {
        let literals: Vec<String> = if self.cfg.polynomials.is_empty() {
            defaults.iter().map(|d| d.to_string()).collect()
        } else {
            self.cfg.polynomials.clone()
        };
        if literals.is_empty() {
            bail!("no polynomial literals given");
        }
        literals
            .iter()
            .map(|l| HoloPoly::parse(s.clone(), l).with_context(|| format!("parsing polynomial '{l}'")))
            .collect()
    }

    pub fn times(&self, default: &[f64]) -> Vec<f64> {
        if self.cfg.t.is_empty() {
            default.to_vec()
        } else {
            self.cfg.t.clone()
        }
    }

    pub fn mc(&self, t: f64, steps: usize, samples: usize) -> Result<McConfig> {
        let m = &self.cfg.mc;
        Ok(McConfig::new(
            t,
            m.steps.unwrap_or(steps),
            m.samples.unwrap_or(samples),
            self.seed,
            m.streams.unwrap_or(8),
        )?)
    }

    pub fn threshold(&self) -> f64 {
        self.cfg.threshold.unwrap_or(3.0)
    }
}
