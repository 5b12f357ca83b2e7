use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use super::checkpoint::save_checkpoint;
use super::config::{Term, TrainConfig};
use super::evaluate::evaluate_model;
use crate::cluster::EvalReport;
use crate::dataio::{minibatches, DatasetBundle};
use crate::diffcore::{Adam, Gradients, Tape, Var};
use crate::error::{Error, Result};
use crate::locality::{
    effective_perplexity, high_affinities, low_affinities_vars, lp_loss_vars, map_points_vars,
};
use crate::midisc::{derangement, mi_loss_vars};
use crate::model::LpvdnModel;
use crate::rng;
use crate::scalar::{lit, to_f64, Real};
use crate::vade::{self, check_global_loss, global_loss_from_input, PretrainReport};

/// Scalar values of every loss term for one batch. Disabled terms are 0.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub lg: f64,
    pub mi: f64,
    pub lp: f64,
    pub total: f64,
}

/// Random inputs of one step: reparameterisation noise and the negative
/// pairing permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct StepNoise<T: Real> {
    pub eps: Array2<T>,
    pub neg_perm: Vec<usize>,
}

impl<T: Real> StepNoise<T> {
    pub fn draw<R: Rng + ?Sized>(b: usize, latent_dim: usize, rng: &mut R) -> Self {
        let eps = Array2::from_shape_simple_fn((b, latent_dim), || {
            lit::<T>(rng.sample::<f64, _>(StandardNormal))
        });
        let neg_perm = derangement(b, rng);
        Self { eps, neg_perm }
    }
}

/// Tape variables of the composed objective.
#[derive(Debug, Clone, Copy)]
pub struct LossVars {
    pub lg: Var,
    pub mi: Option<Var>,
    pub lp: Option<Var>,
    pub total: Var,
}

/// Builds `mean L_G + alpha0 L_MI + alpha1 L_LP` on `tape`. Disabled terms
/// add no nodes. The locality term is skipped for batches of fewer than 3.
pub fn total_loss_vars<T: Real>(
    model: &LpvdnModel<T>,
    tape: &mut Tape<'_, T>,
    x: &Array2<T>,
    noise: &StepNoise<T>,
    config: &TrainConfig,
) -> Result<LossVars> {
    total_loss_vars_with(model, tape, x, noise, config, None)
}

/// As [`total_loss_vars`], but with the input affinities `P` supplied by the
/// caller instead of recomputed from the batch. Since `P` carries no
/// gradient, finite-difference checks must hold it fixed this way.
pub fn total_loss_vars_with<T: Real>(
    model: &LpvdnModel<T>,
    tape: &mut Tape<'_, T>,
    x: &Array2<T>,
    noise: &StepNoise<T>,
    config: &TrainConfig,
    affinities: Option<&Array2<f64>>,
) -> Result<LossVars> {
    let (terms, enc, z) = global_loss_from_input(model, tape, x, &noise.eps)?;
    check_global_loss(tape, &terms)?;
    let lg = tape.mean(terms.total);
    let mut total = lg;
    let mut mi = None;
    if config.enabled(Term::Mi) {
        let v = mi_loss_vars(model, tape, x, z, &noise.neg_perm)?;
        let w = tape.scale(v, lit(config.alpha0));
        total = tape.add(total, w)?;
        mi = Some(v);
    }
    let mut lp = None;
    let b = x.nrows();
    if config.enabled(Term::Lp) && b >= 3 {
        let p = match affinities {
            Some(p) => p.clone(),
            None => high_affinities(
                tape.value(enc.mu),
                effective_perplexity(config.perplexity, b),
            )?,
        };
        let o = map_points_vars(model, tape, enc.mu)?;
        let q = low_affinities_vars(tape, o)?;
        let v = lp_loss_vars(tape, &p, q)?;
        let w = tape.scale(v, lit(config.alpha1));
        total = tape.add(total, w)?;
        lp = Some(v);
    }
    let out = LossVars { lg, mi, lp, total };
    let br = breakdown(tape, &out);
    for (name, v) in [
        ("lg", br.lg),
        ("mi", br.mi),
        ("lp", br.lp),
        ("total", br.total),
    ] {
        if !v.is_finite() {
            return Err(Error::NonFiniteLoss {
                term: name,
                detail: format!("lg={} mi={} lp={} total={}", br.lg, br.mi, br.lp, br.total),
            });
        }
    }
    Ok(out)
}

pub fn breakdown<T: Real>(tape: &Tape<'_, T>, v: &LossVars) -> LossBreakdown {
    let get = |o: Option<Var>| o.map_or(0.0, |v| to_f64(tape.scalar(v)));
    LossBreakdown {
        lg: to_f64(tape.scalar(v.lg)),
        mi: get(v.mi),
        lp: get(v.lp),
        total: to_f64(tape.scalar(v.total)),
    }
}

/// Composed loss for plain inputs.
pub fn total_loss<T: Real>(
    model: &LpvdnModel<T>,
    x: &Array2<T>,
    noise: &StepNoise<T>,
    config: &TrainConfig,
) -> Result<LossBreakdown> {
    let mut tape = Tape::new(&model.store);
    let v = total_loss_vars(model, &mut tape, x, noise, config)?;
    Ok(breakdown(&tape, &v))
}

/// Loss and parameter gradients for one batch.
pub fn loss_and_gradients<T: Real>(
    model: &LpvdnModel<T>,
    x: &Array2<T>,
    noise: &StepNoise<T>,
    config: &TrainConfig,
) -> Result<(LossBreakdown, Gradients<T>)> {
    let mut tape = Tape::new(&model.store);
    let v = total_loss_vars(model, &mut tape, x, noise, config)?;
    let grads = tape.backward(v.total)?;
    Ok((breakdown(&tape, &v), grads))
}

/// Per-epoch means of each term.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lg: f64,
    pub mi: f64,
    pub lp: f64,
    pub total: f64,
    pub lr: f64,
}

impl EpochLog {
    pub fn line(&self) -> String {
        format!(
            "epoch={} lg={:.6} mi={:.6} lp={:.6} total={:.6} lr={:.6e}",
            self.epoch, self.lg, self.mi, self.lp, self.total, self.lr
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T: Real> {
    pub model: LpvdnModel<T>,
    pub pretrain: PretrainReport,
    pub history: Vec<EpochLog>,
    pub report: EvalReport,
}

/// Pretraining followed by joint training. Nothing touches the disk.
pub fn fit<T: Real>(config: &TrainConfig, data: &DatasetBundle<T>) -> Result<TrainOutcome<T>> {
    let mut log = |_: &EpochLog| Ok(());
    fit_with(config, data, &mut log).map_err(|(e, _)| e)
}

type Failure<T> = (Error, Option<Box<LpvdnModel<T>>>);

/// Training core. On a numerical failure the model in its last finite
/// state is handed back alongside the error.
fn fit_with<T: Real>(
    config: &TrainConfig,
    data: &DatasetBundle<T>,
    on_epoch: &mut dyn FnMut(&EpochLog) -> Result<()>,
) -> std::result::Result<TrainOutcome<T>, Failure<T>> {
    config.validate().map_err(|e| (e, None))?;
    if data.n() < config.k {
        return Err((
            Error::Config(format!(
                "dataset has {} rows but k = {}",
                data.n(),
                config.k
            )),
            None,
        ));
    }
    let mut model = LpvdnModel::<T>::new(config.architecture(data.dim()), config.seed);
    let batch_size = config.batch_size.min(data.n());
    let pretrain = vade::pretrain(
        &mut model,
        data,
        config.pretrain_epochs,
        config.lr,
        batch_size,
        config.seed,
    )
    .map_err(|e| (e, None))?;
    log::info!(
        "pretraining done; GMM fit after {} EM steps",
        pretrain.gmm.log_likelihood.len()
    );

    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let lr = config.lr_at(epoch);
        let adam = Adam::new(lit::<T>(lr));
        let shuffle_seed = rng::stream(config.seed, rng::SHUFFLE, epoch as u64).random::<u64>();
        let mut step_rng = rng::stream(config.seed, rng::EPOCH, epoch as u64);
        let mut sums = LossBreakdown::default();
        for (b, idx) in minibatches(data.n(), batch_size, shuffle_seed)
            .iter()
            .enumerate()
        {
            let x = data.select_rows(idx);
            let noise = StepNoise::draw(idx.len(), config.latent_dim, &mut step_rng);
            let step = loss_and_gradients(&model, &x, &noise, config).and_then(|(br, g)| {
                model.store.zero_grad();
                model.store.accumulate(&g);
                adam.step(&mut model.store)?;
                Ok(br)
            });
            let br = match step {
                Ok(br) => br,
                Err(e) if e.is_numerical() => {
                    let cause = e.to_string();
                    log::error!("epoch {epoch} batch {b}: {cause}");
                    return Err((
                        Error::Diverged {
                            epoch,
                            batch: b,
                            cause,
                        },
                        Some(Box::new(model)),
                    ));
                }
                Err(e) => return Err((e, None)),
            };
            let w = idx.len() as f64;
            sums.lg += br.lg * w;
            sums.mi += br.mi * w;
            sums.lp += br.lp * w;
            sums.total += br.total * w;
        }
        let n = data.n() as f64;
        let entry = EpochLog {
            epoch,
            lg: sums.lg / n,
            mi: sums.mi / n,
            lp: sums.lp / n,
            total: sums.total / n,
            lr,
        };
        log::info!("{}", entry.line());
        on_epoch(&entry).map_err(|e| (e, None))?;
        history.push(entry);
    }
    model.store.zero_grad();
    let report = evaluate_model(&model, data, config).map_err(|e| (e, None))?;
    Ok(TrainOutcome {
        model,
        pretrain,
        history,
        report,
    })
}

/// Full training run writing `checkpoint.json`, `checkpoint.bin`,
/// `report.json` and `train.log` into `out_dir`.
///
/// On divergence the last finite state is checkpointed and the error is
/// returned.
pub fn train<T: Real>(
    config: &TrainConfig,
    data: &DatasetBundle<T>,
    out_dir: &Path,
) -> Result<TrainOutcome<T>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let log_path = out_dir.join("train.log");
    let mut log_file = fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut on_epoch = |e: &EpochLog| -> Result<()> {
        writeln!(log_file, "{}", e.line()).map_err(|err| Error::io(&log_path, err))
    };
    match fit_with(config, data, &mut on_epoch) {
        Ok(outcome) => {
            save_checkpoint(&outcome.model, config, out_dir, config.epochs)?;
            write_report(&outcome.report, &out_dir.join("report.json"))?;
            Ok(outcome)
        }
        Err((err, Some(model))) => {
            let epochs_done = match &err {
                Error::Diverged { epoch, .. } => *epoch,
                _ => 0,
            };
            save_checkpoint(&model, config, out_dir, epochs_done)?;
            Err(err)
        }
        Err((err, None)) => Err(err),
    }
}

pub fn write_report(report: &EvalReport, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report).expect("report serialises");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
