use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataio::{self, DatasetBundle};
use crate::error::{Error, Result};
use crate::model::Architecture;
use crate::scalar::Real;

/// Where the training data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Synthetic {
        k: usize,
        dim: usize,
        n_per_cluster: usize,
        separation: f64,
        seed: u64,
    },
    /// One or more IDX image files (e.g. train and test splits), concatenated.
    Idx {
        parts: Vec<IdxPart>,
    },
    Matrix {
        manifest: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdxPart {
    pub images: PathBuf,
    #[serde(default)]
    pub labels: Option<PathBuf>,
}

impl DatasetSpec {
    pub fn load<T: Real>(&self) -> Result<DatasetBundle<T>> {
        match self {
            DatasetSpec::Synthetic {
                k,
                dim,
                n_per_cluster,
                separation,
                seed,
            } => Ok(dataio::make_synthetic_gmm(
                *k,
                *dim,
                *n_per_cluster,
                *separation,
                *seed,
            )?),
            DatasetSpec::Idx { parts } => {
                let mut out: Option<DatasetBundle<T>> = None;
                for part in parts {
                    let b = dataio::load_idx(&part.images, part.labels.as_deref())?;
                    out = Some(match out {
                        None => b,
                        Some(acc) => acc.concat(&b)?,
                    });
                }
                out.ok_or_else(|| Error::Config("idx dataset needs at least one part".into()))
            }
            DatasetSpec::Matrix { manifest } => Ok(dataio::load_matrix(manifest)?),
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match self {
            DatasetSpec::Synthetic { .. } => {}
            DatasetSpec::Idx { parts } => {
                for part in parts {
                    fix(&mut part.images);
                    if let Some(l) = &mut part.labels {
                        fix(l);
                    }
                }
            }
            DatasetSpec::Matrix { manifest } => fix(manifest),
        }
    }
}

/// A loss term that can be switched off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Term {
    Mi,
    Lp,
}

impl Term {
    pub fn name(self) -> &'static str {
        match self {
            Term::Mi => "mi",
            Term::Lp => "lp",
        }
    }
}

impl std::str::FromStr for Term {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mi" => Ok(Term::Mi),
            "lp" => Ok(Term::Lp),
            other => Err(Error::Config(format!(
                "unknown ablation term `{other}` (expected mi or lp)"
            ))),
        }
    }
}

/// Parses a comma-separated list such as `mi,lp`. An empty string or
/// `none` means nothing is disabled.
pub fn parse_ablation(s: &str) -> Result<Vec<Term>> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    let mut out = s
        .split(',')
        .map(str::parse)
        .collect::<Result<Vec<Term>>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

/// The four ablation variants, named by the terms they keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Full,
    GlobalLocal,
    GlobalMi,
    GlobalOnly,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::GlobalLocal,
        Variant::GlobalMi,
        Variant::GlobalOnly,
    ];

    pub fn disabled(self) -> Vec<Term> {
        match self {
            Variant::Full => vec![],
            Variant::GlobalLocal => vec![Term::Mi],
            Variant::GlobalMi => vec![Term::Lp],
            Variant::GlobalOnly => vec![Term::Mi, Term::Lp],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::GlobalLocal => "lg+lp",
            Variant::GlobalMi => "lg+mi",
            Variant::GlobalOnly => "lg",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}` (full, lg+lp, lg+mi, lg)")))
    }
}

/// Hidden-layer widths; input and output sizes come from the data and config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HiddenLayers {
    pub encoder: Vec<usize>,
    pub discriminator: Vec<usize>,
    pub mapper: Vec<usize>,
}

impl Default for HiddenLayers {
    fn default() -> Self {
        Self {
            encoder: vec![500, 500, 2000],
            discriminator: vec![256],
            mapper: vec![256, 256, 256],
        }
    }
}

fn default_latent() -> usize {
    10
}
fn default_perplexity() -> f64 {
    30.0
}
fn default_decay() -> f64 {
    0.95
}
fn default_interval() -> usize {
    10
}
fn default_pretrain() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub dataset: DatasetSpec,
    pub k: usize,
    #[serde(default = "default_latent")]
    pub latent_dim: usize,
    #[serde(default = "default_latent")]
    pub out_dim: usize,
    pub alpha0: f64,
    pub alpha1: f64,
    #[serde(default = "default_perplexity")]
    pub perplexity: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    #[serde(default = "default_decay")]
    pub lr_decay: f64,
    #[serde(default = "default_interval")]
    pub lr_decay_interval: usize,
    #[serde(default)]
    pub seed: u64,
    /// Terms switched off for this run.
    #[serde(default)]
    pub ablation: Vec<Term>,
    #[serde(default = "default_pretrain")]
    pub pretrain_epochs: usize,
    #[serde(default)]
    pub hidden: HiddenLayers,
    /// Free-form provenance note; ignored by training and the config hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

const BATCH_NOTE: &str =
    "per-dataset setting batch 800; the shared setting for all datasets states batch 1000";

impl TrainConfig {
    /// Reads a JSON config. Relative dataset paths are resolved against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: TrainConfig = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if let Some(base) = path.parent() {
            cfg.dataset.resolve_paths(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("config serialises");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.latent_dim == 0 || self.out_dim == 0 {
            return bad("latent_dim and out_dim must be positive".into());
        }
        if !(self.alpha0 >= 0.0 && self.alpha1 >= 0.0)
            || !self.alpha0.is_finite()
            || !self.alpha1.is_finite()
        {
            return bad(format!(
                "alpha0 and alpha1 must be finite and >= 0 (got {}, {})",
                self.alpha0, self.alpha1
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.enabled(Term::Lp) && self.batch_size < 3 {
            return bad(format!(
                "batch_size {} too small for the locality term (needs >= 3)",
                self.batch_size
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive (got {})", self.lr));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) || self.lr_decay_interval == 0 {
            return bad("lr_decay must lie in (0, 1] and lr_decay_interval be >= 1".into());
        }
        if self.perplexity.is_nan() || self.perplexity <= 1.0 {
            return bad(format!(
                "perplexity must exceed 1 (got {})",
                self.perplexity
            ));
        }
        Ok(())
    }

    pub fn enabled(&self, term: Term) -> bool {
        !self.ablation.contains(&term)
    }

    pub fn with_variant(&self, v: Variant) -> Self {
        Self {
            ablation: v.disabled(),
            ..self.clone()
        }
    }

    /// Learning rate used during (zero-based) epoch `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.lr_decay.powi((epoch / self.lr_decay_interval) as i32)
    }

    pub fn architecture(&self, input_dim: usize) -> Architecture {
        Architecture {
            input_dim,
            latent_dim: self.latent_dim,
            clusters: self.k,
            out_dim: self.out_dim,
            encoder_hidden: self.hidden.encoder.clone(),
            discriminator_hidden: self.hidden.discriminator.clone(),
            mapper_hidden: self.hidden.mapper.clone(),
        }
    }

    pub fn ablation_names(&self) -> Vec<String> {
        let mut v = self.ablation.clone();
        v.sort();
        v.dedup();
        v.into_iter().map(|t| t.name().to_string()).collect()
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form
    /// (without the note).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.note = None;
        c.ablation.sort();
        c.ablation.dedup();
        let json = serde_json::to_string(&c).expect("config serialises");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Built-in presets: `synthetic`, `mnist`, `fashion-mnist`, `reuters10k`,
    /// `reuters`. Dataset paths for the real corpora are placeholders under
    /// `data/`.
    pub fn preset(name: &str) -> Result<Self> {
        let idx = |train: &str, test: &str| DatasetSpec::Idx {
            parts: [train, test]
                .iter()
                .map(|stem| IdxPart {
                    images: PathBuf::from(format!("data/{stem}-images-idx3-ubyte")),
                    labels: Some(PathBuf::from(format!("data/{stem}-labels-idx1-ubyte"))),
                })
                .collect(),
        };
        let base = |dataset, alpha0, alpha1, batch_size, epochs, lr| TrainConfig {
            dataset,
            k: 10,
            latent_dim: 10,
            out_dim: 10,
            alpha0,
            alpha1,
            perplexity: 30.0,
            batch_size,
            epochs,
            lr,
            lr_decay: 0.95,
            lr_decay_interval: 10,
            seed: 0,
            ablation: vec![],
            pretrain_epochs: 50,
            hidden: HiddenLayers::default(),
            note: None,
        };
        let cfg = match name {
            "synthetic" => TrainConfig {
                k: 4,
                epochs: 50,
                pretrain_epochs: 10,
                hidden: HiddenLayers {
                    encoder: vec![64, 64],
                    discriminator: vec![32],
                    mapper: vec![32, 32],
                },
                ..base(
                    DatasetSpec::Synthetic {
                        k: 4,
                        dim: 20,
                        n_per_cluster: 500,
                        separation: 10.0,
                        seed: 0,
                    },
                    1.0,
                    1e-4,
                    200,
                    50,
                    2e-3,
                )
            },
            "mnist" => TrainConfig {
                note: Some(BATCH_NOTE.into()),
                ..base(idx("train", "t10k"), 1.0, 1e-4, 800, 300, 2e-3)
            },
            "fashion-mnist" => TrainConfig {
                note: Some(BATCH_NOTE.into()),
                ..base(
                    idx("fashion/train", "fashion/t10k"),
                    1.0,
                    1e-4,
                    800,
                    300,
                    2e-3,
                )
            },
            "reuters10k" => TrainConfig {
                k: 4,
                note: Some(
                    "per-dataset setting alpha0 = 1e-2; the shared setting for all datasets \
                     states alpha0 = 1"
                        .into(),
                ),
                ..base(
                    DatasetSpec::Matrix {
                        manifest: PathBuf::from("data/reuters10k.json"),
                    },
                    1e-2,
                    1e-3,
                    1000,
                    50,
                    2e-4,
                )
            },
            "reuters" => TrainConfig {
                k: 4,
                note: Some(
                    "per-dataset setting alpha1 = 1e-2; the shared setting for all datasets \
                     states alpha1 = 1e-3"
                        .into(),
                ),
                ..base(
                    DatasetSpec::Matrix {
                        manifest: PathBuf::from("data/reuters.json"),
                    },
                    1.0,
                    1e-2,
                    1000,
                    300,
                    2e-4,
                )
            },
            other => return Err(Error::Config(format!(
                "unknown preset `{other}` (synthetic, mnist, fashion-mnist, reuters10k, reuters)"
            ))),
        };
        Ok(cfg)
    }
}
