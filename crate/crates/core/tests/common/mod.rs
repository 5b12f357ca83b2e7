#![allow(dead_code)]

use lpvdn::model::{Architecture, LpvdnModel};
use lpvdn::pipeline::{HiddenLayers, TrainConfig};
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn toy_arch(d: usize, j: usize, k: usize) -> Architecture {
    Architecture {
        input_dim: d,
        latent_dim: j,
        clusters: k,
        out_dim: 2,
        encoder_hidden: vec![5],
        discriminator_hidden: vec![4],
        mapper_hidden: vec![4],
    }
}

pub fn uniform(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut r = lpvdn::rng::stream(seed, 1000, 0);
    Array2::from_shape_simple_fn((rows, cols), || r.random::<f64>())
}

pub fn normal(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut r = lpvdn::rng::stream(seed, 1001, 0);
    Array2::from_shape_simple_fn((rows, cols), || r.sample::<f64, _>(StandardNormal))
}

/// Model whose prior means are spread out so responsibilities are not flat.
pub fn toy_model(d: usize, j: usize, k: usize, seed: u64) -> LpvdnModel<f64> {
    let mut m = LpvdnModel::new(toy_arch(d, j, k), seed);
    let prior = m.prior;
    m.store.get_mut(prior.mu_c).value = normal(k, j, seed + 50) * 0.5;
    m.store.get_mut(prior.log_var_c).value = normal(k, j, seed + 51) * 0.3;
    m.store.get_mut(prior.logits_pi).value = normal(1, k, seed + 52) * 0.5;
    m
}

/// Small, fast configuration on a 2-blob problem.
pub fn tiny_config() -> TrainConfig {
    let mut c = TrainConfig::preset("synthetic").unwrap();
    c.dataset = lpvdn::pipeline::DatasetSpec::Synthetic {
        k: 2,
        dim: 6,
        n_per_cluster: 40,
        separation: 8.0,
        seed: 1,
    };
    c.k = 2;
    c.latent_dim = 3;
    c.out_dim = 2;
    c.perplexity = 5.0;
    c.batch_size = 20;
    c.epochs = 3;
    c.pretrain_epochs = 3;
    c.alpha1 = 1e-2;
    c.hidden = HiddenLayers {
        encoder: vec![8],
        discriminator: vec![8],
        mapper: vec![8],
    };
    c
}
