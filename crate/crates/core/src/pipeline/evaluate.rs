use std::str::FromStr;

use ndarray::{Array2, Axis};

use super::config::{Term, TrainConfig};
use crate::cluster::{self, EmbeddingStats, EvalReport};
use crate::dataio::DatasetBundle;
use crate::error::{Error, Result};
use crate::locality::map_points;
use crate::model::LpvdnModel;
use crate::scalar::{to_f64, Real};
use crate::vade::{encode, EVAL_CHUNK};

/// K-means restarts used for every reported score.
pub const EVAL_RESTARTS: usize = 10;

/// Which representation to read out of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Embedding {
    /// Encoder mean.
    MuTilde,
    /// Locality mapper output.
    OPrime,
}

impl FromStr for Embedding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mu_tilde" => Ok(Embedding::MuTilde),
            "o_prime" => Ok(Embedding::OPrime),
            other => Err(Error::Config(format!(
                "unknown embedding `{other}` (mu_tilde or o_prime)"
            ))),
        }
    }
}

pub fn embed<T: Real>(model: &LpvdnModel<T>, x: &Array2<T>, which: Embedding) -> Result<Array2<T>> {
    let mut parts = Vec::new();
    for chunk in x.axis_chunks_iter(Axis(0), EVAL_CHUNK) {
        let mu = encode(model, &chunk.to_owned())?.mu_tilde;
        parts.push(match which {
            Embedding::MuTilde => mu,
            Embedding::OPrime => map_points(model, &mu)?,
        });
    }
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    Ok(ndarray::concatenate(Axis(0), &views).expect("same width"))
}

/// K-means on `points` and, when labels exist, ACC/NMI/ARI against them.
pub fn score_embedding<T: Real>(
    points: &Array2<T>,
    labels: Option<&[usize]>,
    k: usize,
    seed: u64,
) -> Result<(Option<[f64; 3]>, EmbeddingStats)> {
    let km = cluster::kmeans(points.view(), k, EVAL_RESTARTS, seed)?;
    let mut sizes = vec![0; k];
    for &a in &km.assignments {
        sizes[a] += 1;
    }
    let stats = EmbeddingStats {
        n: points.nrows(),
        dim: points.ncols(),
        inertia: to_f64(km.inertia),
        cluster_sizes: sizes,
    };
    let metrics = match labels {
        Some(l) => Some([
            cluster::accuracy(l, &km.assignments)?,
            cluster::nmi(l, &km.assignments)?,
            cluster::ari(l, &km.assignments)?,
        ]),
        None => None,
    };
    Ok((metrics, stats))
}

/// Encodes the data, maps it through the locality network and clusters the
/// result. Runs with the locality term disabled never train the mapper, so
/// they are scored on the encoder mean instead. Metrics are omitted for
/// unlabeled data.
pub fn evaluate_model<T: Real>(
    model: &LpvdnModel<T>,
    data: &DatasetBundle<T>,
    config: &TrainConfig,
) -> Result<EvalReport> {
    if data.dim() != model.arch.input_dim {
        return Err(Error::Config(format!(
            "dataset has {} features but the model expects {}",
            data.dim(),
            model.arch.input_dim
        )));
    }
    let which = if config.enabled(Term::Lp) {
        Embedding::OPrime
    } else {
        Embedding::MuTilde
    };
    let o = embed(model, &data.x, which)?;
    let (metrics, stats) =
        score_embedding(&o, data.labels.as_deref(), model.clusters(), config.seed)?;
    Ok(EvalReport {
        acc: metrics.map(|m| m[0]),
        nmi: metrics.map(|m| m[1]),
        ari: metrics.map(|m| m[2]),
        seed: config.seed,
        config_hash: config.hash(),
        ablation: config.ablation_names(),
        embedding: if metrics.is_none() { Some(stats) } else { None },
    })
}
