use ndarray::{Array2, Axis};

use super::gmm::{fit_diag_gmm, GmmFit};
use super::{
    decode_vars, encode, encode_vars, prior_vars, responsibilities_vars, LOG_VAR_MAX, LOG_VAR_MIN,
};
use crate::dataio::{minibatches, DatasetBundle};
use crate::diffcore::{Adam, Tape};
use crate::error::{Error, Result};
use crate::model::LpvdnModel;
use crate::rng;
use crate::scalar::{lit, to_f64, Real};

const EM_MAX_ITER: usize = 200;
const EM_TOL: f64 = 1e-8;
/// Rows pushed through the network at once when embedding a whole dataset.
pub(crate) const EVAL_CHUNK: usize = 1024;

#[derive(Debug, Clone)]
pub struct PretrainReport {
    /// Mean reconstruction BCE per epoch.
    pub epoch_losses: Vec<f64>,
    pub gmm: GmmFit,
}

/// Autoencoder pretraining followed by a GMM fit on the latent means.
///
/// The encoder/decoder pair is trained on BCE reconstruction with the
/// deterministic code `z = mu`. EM on all `mu` then initialises the prior.
/// Optimizer state is reset afterwards.
pub fn pretrain<T: Real>(
    model: &mut LpvdnModel<T>,
    data: &DatasetBundle<T>,
    epochs: usize,
    lr: f64,
    batch_size: usize,
    seed: u64,
) -> Result<PretrainReport> {
    let adam = Adam::new(lit::<T>(lr));
    let batch_size = batch_size.min(data.n()).max(1);
    let mut epoch_losses = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let batches = minibatches(
            data.n(),
            batch_size,
            seed ^ ((epoch as u64) << 20) ^ rng::PRETRAIN,
        );
        let mut total = 0.0;
        for (b, idx) in batches.iter().enumerate() {
            let x = data.select_rows(idx);
            model.store.zero_grad();
            let (loss, grads) = {
                let mut tape = Tape::new(&model.store);
                let xv = tape.constant(x.clone());
                let enc = encode_vars(model, &mut tape, xv)?;
                let mu_x = decode_vars(model, &mut tape, enc.mu)?;
                let log_mu = tape.ln(mu_x);
                let neg = tape.neg(mu_x);
                let one_minus = tape.add_scalar(neg, T::one());
                let log_one_minus = tape.ln(one_minus);
                let xc = tape.constant(x.clone());
                let omx = tape.constant(x.mapv(|v| T::one() - v));
                let a = tape.mul(xc, log_mu)?;
                let c = tape.mul(omx, log_one_minus)?;
                let ll = tape.add(a, c)?;
                let rows = tape.sum_cols(ll);
                let mean = tape.mean(rows);
                let loss = tape.neg(mean);
                let value = to_f64(tape.scalar(loss));
                if !value.is_finite() {
                    return Err(Error::Diverged {
                        epoch,
                        batch: b,
                        cause: "pretraining reconstruction loss is not finite".into(),
                    });
                }
                (value, tape.backward(loss)?)
            };
            model.store.accumulate(&grads);
            adam.step(&mut model.store)?;
            total += loss * idx.len() as f64;
        }
        epoch_losses.push(total / data.n() as f64);
        log::debug!("pretrain epoch {epoch}: bce {:.6}", total / data.n() as f64);
    }
    model.store.zero_grad();
    model.store.reset_optimizer_state();

    let mu = latent_means(model, &data.x)?;
    let gmm = fit_diag_gmm(mu.view(), model.clusters(), EM_MAX_ITER, EM_TOL, seed)?;
    init_prior_from_fit(model, &gmm);
    init_log_var_head(model, &gmm);
    Ok(PretrainReport { epoch_losses, gmm })
}

/// Copies a GMM fit into the model's prior parameters.
pub fn init_prior_from_fit<T: Real>(model: &mut LpvdnModel<T>, fit: &GmmFit) {
    let prior = model.prior;
    let logits = Array2::from_shape_fn((1, fit.weights.len()), |(_, c)| {
        lit::<T>(fit.weights[c].max(1e-300).ln())
    });
    model.store.get_mut(prior.logits_pi).value = logits;
    model.store.get_mut(prior.mu_c).value = fit.means.mapv(lit::<T>);
    model.store.get_mut(prior.log_var_c).value = fit
        .variances
        .mapv(|v| lit::<T>(v.ln().clamp(LOG_VAR_MIN, LOG_VAR_MAX)));
}

/// Points the encoder's log-variance head at the mixture's average
/// within-component variance: its weights are zeroed and its bias set to
/// `ln sum_c pi_c var_cj`. Pretraining never trains this head, and leaving
/// it at random weights gives posterior variances far larger than the
/// fitted components.
pub fn init_log_var_head<T: Real>(model: &mut LpvdnModel<T>, fit: &GmmFit) {
    let j = model.latent_dim();
    let last = *model.encoder.layers().last().expect("encoder has layers");
    let w = &mut model.store.get_mut(last.weight).value;
    w.slice_mut(ndarray::s![.., j..]).fill(T::zero());
    let b = &mut model.store.get_mut(last.bias).value;
    for d in 0..j {
        let avg: f64 = (0..fit.weights.len())
            .map(|c| fit.weights[c] * fit.variances[[c, d]])
            .sum();
        b[[0, j + d]] = lit(avg.ln().clamp(LOG_VAR_MIN, LOG_VAR_MAX));
    }
}

/// Encoder means for every row, computed in chunks.
pub(crate) fn latent_means<T: Real>(model: &LpvdnModel<T>, x: &Array2<T>) -> Result<Array2<T>> {
    let mut parts = Vec::new();
    for chunk in x.axis_chunks_iter(Axis(0), EVAL_CHUNK) {
        parts.push(encode(model, &chunk.to_owned())?.mu_tilde);
    }
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    Ok(ndarray::concatenate(Axis(0), &views).expect("same width"))
}

/// Argmax of the responsibilities at `z = mu` for every row.
pub fn gmm_assignments<T: Real>(model: &LpvdnModel<T>, x: &Array2<T>) -> Result<Vec<usize>> {
    let mu = latent_means(model, x)?;
    let mut out = Vec::with_capacity(mu.nrows());
    for chunk in mu.axis_chunks_iter(Axis(0), EVAL_CHUNK) {
        let mut tape = Tape::new(&model.store);
        let z = tape.constant(chunk.to_owned());
        let prior = prior_vars(model, &mut tape)?;
        let g = responsibilities_vars(&mut tape, z, prior)?;
        for row in tape.value(g).axis_iter(Axis(0)) {
            let best = row
                .iter()
                .enumerate()
                .fold(
                    (0, T::neg_infinity()),
                    |a, (i, &v)| if v > a.1 { (i, v) } else { a },
                );
            out.push(best.0);
        }
    }
    Ok(out)
}
