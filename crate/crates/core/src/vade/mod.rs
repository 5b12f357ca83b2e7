//! Global structure model: a VAE whose latent prior is a trainable diagonal
//! Gaussian mixture.
//!
//! Per sample, with encoder output `(mu, log_var)`, latent draw
//! `z = mu + exp(log_var / 2) * eps`, reconstruction `mu_x = decoder(z)` and
//! responsibilities `gamma_c = q(c | z)`, the loss is
//!
//! ```text
//! L_G = BCE(x, mu_x)
//!     + 1/2 sum_c gamma_c sum_j (log var_c + var / var_c + (mu - mu_c)^2 / var_c)
//!     - sum_c gamma_c log(pi_c / gamma_c)
//!     - 1/2 sum_j (1 + log var)
//! ```
//!
//! Gradients flow through `gamma` (it is a differentiable function of `z`).

mod gmm;
mod pretrain;

pub use gmm::{fit_diag_gmm, GmmFit, EM_MAX_RETRIES};
pub(crate) use pretrain::EVAL_CHUNK;
pub use pretrain::{
    gmm_assignments, init_log_var_head, init_prior_from_fit, pretrain, PretrainReport,
};

use ndarray::Array2;

use crate::diffcore::{DiffError, Tape, Var};
use crate::error::{Error, Result};
use crate::model::LpvdnModel;
use crate::scalar::{lit, Real};

/// Bounds applied to every log-variance before exponentiation.
pub const LOG_VAR_MIN: f64 = -10.0;
pub const LOG_VAR_MAX: f64 = 10.0;
/// Reconstructions are kept inside `[RECON_EPS, 1 - RECON_EPS]`.
pub const RECON_EPS: f64 = 1e-7;
/// Lower floor on each responsibility before renormalisation.
pub const GAMMA_FLOOR: f64 = 1e-10;

/// Encoder heads as tape variables (`B x J` each).
#[derive(Debug, Clone, Copy)]
pub struct EncodedVars {
    pub mu: Var,
    pub log_var: Var,
}

/// Encoder heads as plain arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput<T: Real> {
    pub mu_tilde: Array2<T>,
    pub log_var_tilde: Array2<T>,
}

/// Prior parameters on a tape: `log_pi` is `1 x K`, the others `K x J`.
#[derive(Debug, Clone, Copy)]
pub struct PriorVars {
    pub log_pi: Var,
    pub mu_c: Var,
    pub log_var_c: Var,
}

/// Per-sample pieces of `L_G`, each `B x 1`.
#[derive(Debug, Clone, Copy)]
pub struct GlobalLossVars {
    pub reconstruction: Var,
    pub gaussian_kl: Var,
    pub categorical_kl: Var,
    pub entropy: Var,
    pub total: Var,
}

pub fn encode_vars<T: Real>(
    model: &LpvdnModel<T>,
    tape: &mut Tape<'_, T>,
    x: Var,
) -> Result<EncodedVars, DiffError> {
    let j = model.latent_dim();
    let h = model.encoder.forward(tape, x)?;
    let mu = tape.slice_cols(h, 0, j)?;
    let raw = tape.slice_cols(h, j, j)?;
    let log_var = tape.clamp(raw, lit(LOG_VAR_MIN), lit(LOG_VAR_MAX));
    Ok(EncodedVars { mu, log_var })
}

/// Reparameterised draw `mu + exp(log_var / 2) * eps`.
pub fn sample_latent_vars<T: Real>(
    tape: &mut Tape<'_, T>,
    enc: EncodedVars,
    eps: Var,
) -> Result<Var, DiffError> {
    let half = tape.scale(enc.log_var, lit(0.5));
    let std = tape.exp(half);
    let noise = tape.mul(std, eps)?;
    tape.add(enc.mu, noise)
}

/// Decoder mean, sigmoid output clamped into `[1e-7, 1 - 1e-7]`.
pub fn decode_vars<T: Real>(
    model: &LpvdnModel<T>,
    tape: &mut Tape<'_, T>,
    z: Var,
) -> Result<Var, DiffError> {
    let logits = model.decoder.forward(tape, z)?;
    let mu_x = tape.sigmoid(logits);
    Ok(tape.clamp(mu_x, lit(RECON_EPS), lit(1.0 - RECON_EPS)))
}

pub fn prior_vars<T: Real>(
    model: &LpvdnModel<T>,
    tape: &mut Tape<'_, T>,
) -> Result<PriorVars, DiffError> {
    let logits = tape.param(model.prior.logits_pi);
    let lse = tape.log_sum_exp_rows(logits);
    let log_pi = tape.sub(logits, lse)?;
    let mu_c = tape.param(model.prior.mu_c);
    let raw = tape.param(model.prior.log_var_c);
    let log_var_c = tape.clamp(raw, lit(LOG_VAR_MIN), lit(LOG_VAR_MAX));
    Ok(PriorVars {
        log_pi,
        mu_c,
        log_var_c,
    })
}

/// `log pi_c + log N(z; mu_c, diag var_c)` for every sample and component
/// (`B x K`).
pub fn log_joint_vars<T: Real>(
    tape: &mut Tape<'_, T>,
    z: Var,
    prior: PriorVars,
) -> Result<Var, DiffError> {
    let j = tape.shape(z).1;
    let neg_lv = tape.neg(prior.log_var_c);
    let precision = tape.exp(neg_lv);
    let maha = tape.weighted_sq_dist(z, prior.mu_c, precision)?;
    let lv_rows = tape.sum_cols(prior.log_var_c);
    let log_det = tape.transpose(lv_rows);
    let quad = tape.add(maha, log_det)?;
    let half = tape.scale(quad, lit(-0.5));
    let with_pi = tape.add(half, prior.log_pi)?;
    let norm = -0.5 * j as f64 * (2.0 * std::f64::consts::PI).ln();
    Ok(tape.add_scalar(with_pi, lit(norm)))
}

/// Responsibilities `q(c | z)` (`B x K`): log-space softmax, each entry
/// floored at 1e-10, rows renormalised.
pub fn responsibilities_vars<T: Real>(
    tape: &mut Tape<'_, T>,
    z: Var,
    prior: PriorVars,
) -> Result<Var, DiffError> {
    let log_joint = log_joint_vars(tape, z, prior)?;
    let lse = tape.log_sum_exp_rows(log_joint);
    let log_gamma = tape.sub(log_joint, lse)?;
    let gamma = tape.exp(log_gamma);
    let floored = tape.clamp(gamma, lit(GAMMA_FLOOR), T::infinity());
    let total = tape.sum_cols(floored);
    tape.div(floored, total)
}

/// Per-sample `L_G` split into its four terms.
pub fn global_loss_vars<T: Real>(
    tape: &mut Tape<'_, T>,
    x: &Array2<T>,
    enc: EncodedVars,
    mu_x: Var,
    gamma: Var,
    prior: PriorVars,
) -> Result<GlobalLossVars, DiffError> {
    // Reconstruction: -sum_d x log mu_x + (1 - x) log(1 - mu_x)
    let xv = tape.constant(x.clone());
    let one_minus_x = tape.constant(x.mapv(|v| T::one() - v));
    let log_mu = tape.ln(mu_x);
    let neg_mu = tape.neg(mu_x);
    let one_minus_mu = tape.add_scalar(neg_mu, T::one());
    let log_one_minus = tape.ln(one_minus_mu);
    let a = tape.mul(xv, log_mu)?;
    let b = tape.mul(one_minus_x, log_one_minus)?;
    let ll = tape.add(a, b)?;
    let ll_rows = tape.sum_cols(ll);
    let reconstruction = tape.neg(ll_rows);

    // 1/2 sum_c gamma_c sum_j (log var_c + var / var_c + (mu - mu_c)^2 / var_c)
    let neg_lv_c = tape.neg(prior.log_var_c);
    let precision = tape.exp(neg_lv_c);
    let var = tape.exp(enc.log_var);
    let prec_t = tape.transpose(precision);
    let trace = tape.matmul(var, prec_t)?;
    let maha = tape.weighted_sq_dist(enc.mu, prior.mu_c, precision)?;
    let lv_rows = tape.sum_cols(prior.log_var_c);
    let log_det = tape.transpose(lv_rows);
    let inner = tape.add(trace, maha)?;
    let inner = tape.add(inner, log_det)?;
    let weighted = tape.mul(gamma, inner)?;
    let g_rows = tape.sum_cols(weighted);
    let gaussian_kl = tape.scale(g_rows, lit(0.5));

    // -sum_c gamma_c log(pi_c / gamma_c) = sum_c gamma_c (log gamma_c - log pi_c)
    let log_gamma = tape.ln(gamma);
    let diff = tape.sub(log_gamma, prior.log_pi)?;
    let cat = tape.mul(gamma, diff)?;
    let categorical_kl = tape.sum_cols(cat);

    // -1/2 sum_j (1 + log var)
    let lv_sum = tape.sum_cols(enc.log_var);
    let j = tape.shape(enc.log_var).1 as f64;
    let shifted = tape.add_scalar(lv_sum, lit(j));
    let entropy = tape.scale(shifted, lit(-0.5));

    let total = tape.add(reconstruction, gaussian_kl)?;
    let total = tape.add(total, categorical_kl)?;
    let total = tape.add(total, entropy)?;
    Ok(GlobalLossVars {
        reconstruction,
        gaussian_kl,
        categorical_kl,
        entropy,
        total,
    })
}

/// Fails with the name of the first `L_G` term holding a non-finite value.
pub fn check_global_loss<T: Real>(tape: &Tape<'_, T>, terms: &GlobalLossVars) -> Result<()> {
    for (name, v) in [
        ("reconstruction", terms.reconstruction),
        ("gaussian_kl", terms.gaussian_kl),
        ("categorical_kl", terms.categorical_kl),
        ("entropy", terms.entropy),
    ] {
        let values = tape.value(v);
        if let Some(bad) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteLoss {
                term: name,
                detail: format!("sample {bad} has value {}", values[[bad, 0]]),
            });
        }
    }
    Ok(())
}

/// Full `L_G` pipeline for a batch: encode, sample with the given `eps`,
/// decode, responsibilities, loss. Returns the per-sample loss var.
pub fn global_loss_from_input<T: Real>(
    model: &LpvdnModel<T>,
    tape: &mut Tape<'_, T>,
    x: &Array2<T>,
    eps: &Array2<T>,
) -> Result<(GlobalLossVars, EncodedVars, Var), DiffError> {
    let xv = tape.constant(x.clone());
    let enc = encode_vars(model, tape, xv)?;
    let e = tape.constant(eps.clone());
    let z = sample_latent_vars(tape, enc, e)?;
    let mu_x = decode_vars(model, tape, z)?;
    let prior = prior_vars(model, tape)?;
    let gamma = responsibilities_vars(tape, z, prior)?;
    let terms = global_loss_vars(tape, x, enc, mu_x, gamma, prior)?;
    Ok((terms, enc, z))
}

/// Encoder heads for every row of `x`.
pub fn encode<T: Real>(
    model: &LpvdnModel<T>,
    x: &Array2<T>,
) -> Result<EncoderOutput<T>, DiffError> {
    let mut tape = Tape::new(&model.store);
    let xv = tape.constant(x.clone());
    let enc = encode_vars(model, &mut tape, xv)?;
    Ok(EncoderOutput {
        mu_tilde: tape.value(enc.mu).clone(),
        log_var_tilde: tape.value(enc.log_var).clone(),
    })
}

/// Reparameterised sample for plain arrays.
pub fn sample_latent<T: Real>(enc: &EncoderOutput<T>, eps: &Array2<T>) -> Array2<T> {
    let half = lit::<T>(0.5);
    let std = enc.log_var_tilde.mapv(|lv| (lv * half).exp());
    &enc.mu_tilde + &(std * eps)
}

pub fn decode<T: Real>(model: &LpvdnModel<T>, z: &Array2<T>) -> Result<Array2<T>, DiffError> {
    let mut tape = Tape::new(&model.store);
    let zv = tape.constant(z.clone());
    let out = decode_vars(model, &mut tape, zv)?;
    Ok(tape.value(out).clone())
}

pub fn responsibilities<T: Real>(
    model: &LpvdnModel<T>,
    z: &Array2<T>,
) -> Result<Array2<T>, DiffError> {
    let mut tape = Tape::new(&model.store);
    let zv = tape.constant(z.clone());
    let prior = prior_vars(model, &mut tape)?;
    let g = responsibilities_vars(&mut tape, zv, prior)?;
    Ok(tape.value(g).clone())
}

/// Per-sample `L_G` values for `x` under fixed noise `eps`.
pub fn global_loss<T: Real>(
    model: &LpvdnModel<T>,
    x: &Array2<T>,
    eps: &Array2<T>,
) -> Result<Vec<T>> {
    let mut tape = Tape::new(&model.store);
    let (terms, _, _) = global_loss_from_input(model, &mut tape, x, eps)?;
    check_global_loss(&tape, &terms)?;
    Ok(tape.value(terms.total).iter().copied().collect())
}
