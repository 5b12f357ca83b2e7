//! The trainable unit: encoder, decoder, GMM prior, embedding discriminator
//! and locality mapper, all living in one [`ParamStore`].

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diffcore::{Mlp, ParamId, ParamStore};
use crate::rng;
use crate::scalar::{lit, Real};

/// Layer widths of every sub-network.
///
/// The encoder is `input - encoder_hidden.. - 2*latent` (the last layer
/// carries both the mean and log-variance heads); the decoder mirrors it as
/// `latent - reversed(encoder_hidden).. - input`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub input_dim: usize,
    pub latent_dim: usize,
    pub clusters: usize,
    pub out_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub mapper_hidden: Vec<usize>,
}

impl Architecture {
    /// Widths used for the image and text benchmarks:
    /// `D-500-500-2000-J`, `(J+D)-256-1`, `J-256-256-256-J_out`.
    pub fn standard(input_dim: usize, latent_dim: usize, out_dim: usize, clusters: usize) -> Self {
        Self {
            input_dim,
            latent_dim,
            clusters,
            out_dim,
            encoder_hidden: vec![500, 500, 2000],
            discriminator_hidden: vec![256],
            mapper_hidden: vec![256, 256, 256],
        }
    }

    pub fn encoder_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim];
        s.extend(&self.encoder_hidden);
        s.push(2 * self.latent_dim);
        s
    }

    pub fn decoder_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.latent_dim];
        s.extend(self.encoder_hidden.iter().rev());
        s.push(self.input_dim);
        s
    }

    pub fn discriminator_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.latent_dim + self.input_dim];
        s.extend(&self.discriminator_hidden);
        s.push(1);
        s
    }

    pub fn mapper_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.latent_dim];
        s.extend(&self.mapper_hidden);
        s.push(self.out_dim);
        s
    }

    /// Human-readable form such as `encoder 784-500-500-2000-20`.
    pub fn describe(&self) -> String {
        let fmt = |v: Vec<usize>| v.iter().map(usize::to_string).collect::<Vec<_>>().join("-");
        format!(
            "encoder {} / decoder {} / discriminator {} / mapper {} / K={}",
            fmt(self.encoder_sizes()),
            fmt(self.decoder_sizes()),
            fmt(self.discriminator_sizes()),
            fmt(self.mapper_sizes()),
            self.clusters
        )
    }
}

/// Trainable mixture prior: `pi = softmax(logits_pi)`, means `K x J`,
/// log-variances `K x J`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GmmPrior {
    pub logits_pi: ParamId,
    pub mu_c: ParamId,
    pub log_var_c: ParamId,
}

#[derive(Debug, Clone)]
pub struct LpvdnModel<T: Real> {
    pub arch: Architecture,
    pub store: ParamStore<T>,
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub prior: GmmPrior,
    pub discriminator: Mlp,
    pub mapper: Mlp,
}

impl<T: Real> LpvdnModel<T> {
    /// Fresh model with randomly initialised weights. Parameter order (and
    /// thus checkpoint layout) is encoder, decoder, prior, discriminator,
    /// mapper.
    pub fn new(arch: Architecture, seed: u64) -> Self {
        let mut rng = rng::stream(seed, rng::WEIGHT_INIT, 0);
        let mut store = ParamStore::new();
        let encoder = Mlp::new(&mut store, "encoder", &arch.encoder_sizes(), &mut rng);
        let decoder = Mlp::new(&mut store, "decoder", &arch.decoder_sizes(), &mut rng);
        let (k, j) = (arch.clusters, arch.latent_dim);
        let prior = GmmPrior {
            logits_pi: store.add("prior.logits_pi", Array2::zeros((1, k))),
            mu_c: store.add(
                "prior.mu_c",
                Array2::from_shape_simple_fn((k, j), || {
                    lit::<T>(rng.sample::<f64, _>(StandardNormal))
                }),
            ),
            log_var_c: store.add("prior.log_var_c", Array2::zeros((k, j))),
        };
        let discriminator = Mlp::new(
            &mut store,
            "discriminator",
            &arch.discriminator_sizes(),
            &mut rng,
        );
        let mapper = Mlp::new(&mut store, "mapper", &arch.mapper_sizes(), &mut rng);
        Self {
            arch,
            store,
            encoder,
            decoder,
            prior,
            discriminator,
            mapper,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.latent_dim
    }

    pub fn clusters(&self) -> usize {
        self.arch.clusters
    }

    /// Mixture weights `softmax(logits_pi)`.
    pub fn mixture_weights(&self) -> Vec<T> {
        let logits = self.store.value(self.prior.logits_pi);
        let lse = crate::scalar::log_sum_exp(logits.iter().copied());
        logits.iter().map(|&l| (l - lse).exp()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_shapes() {
        let a = Architecture::standard(784, 10, 10, 10);
        assert_eq!(a.encoder_sizes(), vec![784, 500, 500, 2000, 20]);
        assert_eq!(a.decoder_sizes(), vec![10, 2000, 500, 500, 784]);
        assert_eq!(a.discriminator_sizes(), vec![794, 256, 1]);
        assert_eq!(a.mapper_sizes(), vec![10, 256, 256, 256, 10]);
    }

    #[test]
    fn constructed_layers_match_architecture() {
        let a = Architecture {
            input_dim: 6,
            latent_dim: 3,
            clusters: 2,
            out_dim: 2,
            encoder_hidden: vec![5, 4],
            discriminator_hidden: vec![7],
            mapper_hidden: vec![4],
        };
        let m = LpvdnModel::<f64>::new(a.clone(), 0);
        assert_eq!(m.encoder.sizes(), a.encoder_sizes());
        assert_eq!(m.decoder.sizes(), a.decoder_sizes());
        assert_eq!(m.discriminator.sizes(), a.discriminator_sizes());
        assert_eq!(m.mapper.sizes(), a.mapper_sizes());
        assert_eq!(m.store.value(m.prior.mu_c).dim(), (2, 3));
        let pi = m.mixture_weights();
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
