use std::path::Path;

use serde::Serialize;

use super::config::{TrainConfig, Variant};
use super::evaluate::{embed, Embedding};
use super::train::fit;
use crate::dataio::{corrupt_gaussian, DatasetBundle};
use crate::error::{Error, Result};
use crate::model::LpvdnModel;
use crate::scalar::Real;

/// One row of the noise-robustness table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub variant: String,
    pub seed: u64,
    pub acc: Option<f64>,
    pub nmi: Option<f64>,
    pub ari: Option<f64>,
}

/// Trains and evaluates every `(sigma, variant, seed)` combination on a
/// corrupted copy of `data`. Rows come back in that nesting order. The
/// corruption depends on `(sigma, seed)` only, so variants see identical
/// inputs.
pub fn noise_sweep<T: Real>(
    config: &TrainConfig,
    data: &DatasetBundle<T>,
    sigmas: &[f64],
    variants: &[Variant],
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    if sigmas.is_empty() || variants.is_empty() || seeds.is_empty() {
        return Err(Error::Config(
            "noise sweep needs sigmas, variants and seeds".into(),
        ));
    }
    if let Some(s) = sigmas.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return Err(Error::Config(format!(
            "noise sigma must be finite and >= 0 (got {s})"
        )));
    }
    let mut rows = Vec::with_capacity(sigmas.len() * variants.len() * seeds.len());
    for &sigma in sigmas {
        for &seed in seeds {
            let noisy = data.with_x(corrupt_gaussian(&data.x, sigma, seed));
            for &variant in variants {
                let cfg = TrainConfig {
                    seed,
                    ..config.with_variant(variant)
                };
                let out = fit(&cfg, &noisy)?;
                log::info!(
                    "sigma={sigma} variant={variant} seed={seed} acc={:?}",
                    out.report.acc
                );
                rows.push(SweepRow {
                    sigma,
                    variant: variant.name().to_string(),
                    seed,
                    acc: out.report.acc,
                    nmi: out.report.nmi,
                    ari: out.report.ari,
                });
            }
        }
    }
    rows.sort_by(|a, b| {
        a.sigma
            .total_cmp(&b.sigma)
            .then_with(|| variant_rank(&a.variant).cmp(&variant_rank(&b.variant)))
            .then(a.seed.cmp(&b.seed))
    });
    Ok(rows)
}

fn variant_rank(name: &str) -> usize {
    Variant::ALL
        .iter()
        .position(|v| v.name() == name)
        .unwrap_or(usize::MAX)
}

/// CSV with header `sigma,variant,seed,acc,nmi,ari`; missing metrics are
/// left empty.
pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

/// Writes `index,label,e0,..,e{d-1}`, one row per sample. The label column
/// is empty for unlabeled data.
pub fn export_embeddings<T: Real>(
    model: &LpvdnModel<T>,
    data: &DatasetBundle<T>,
    which: Embedding,
    path: &Path,
) -> Result<()> {
    let e = embed(model, &data.x, which)?;
    let mut w = csv::Writer::from_path(path).map_err(|err| csv_err(path, err))?;
    let mut header = vec!["index".to_string(), "label".to_string()];
    header.extend((0..e.ncols()).map(|j| format!("e{j}")));
    w.write_record(&header).map_err(|err| csv_err(path, err))?;
    for (i, row) in e.rows().into_iter().enumerate() {
        let mut rec = vec![
            i.to_string(),
            data.labels
                .as_ref()
                .map_or(String::new(), |l| l[i].to_string()),
        ];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|err| csv_err(path, err))?;
    }
    w.flush().map_err(|err| Error::io(path, err))
}
