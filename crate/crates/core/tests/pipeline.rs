mod common;

use common::{tiny_config, toy_model, uniform};
use lpvdn::cluster::accuracy;
use lpvdn::diffcore::{grad_check, Tape};
use lpvdn::locality::{high_affinities, low_affinities, lp_loss, map_points};
use lpvdn::midisc::{mi_loss, PairBatch};
use lpvdn::pipeline::{
    embed, evaluate_model, export_embeddings, fit, load_checkpoint, noise_sweep, score_embedding,
    total_loss, total_loss_vars, total_loss_vars_with, train, Embedding, StepNoise, Term,
    TrainConfig, Variant,
};
use lpvdn::vade::{encode, global_loss, sample_latent};
use lpvdn::Dataset;

fn toy_config() -> TrainConfig {
    let mut c = tiny_config();
    c.alpha0 = 0.7;
    c.alpha1 = 0.3;
    c.perplexity = 2.0;
    c
}

fn fixed_noise(b: usize, j: usize) -> StepNoise<f64> {
    StepNoise {
        eps: common::normal(b, j, 40),
        neg_perm: vec![1, 2, 3, 0],
    }
}

#[test]
fn composed_loss_equals_sum_of_module_oracles() {
    let m = toy_model(6, 3, 2, 41);
    let x = uniform(4, 6, 42);
    let noise = fixed_noise(4, 3);
    let cfg = toy_config();
    let got = total_loss(&m, &x, &noise, &cfg).unwrap();

    let lg: f64 = global_loss(&m, &x, &noise.eps).unwrap().iter().sum::<f64>() / 4.0;
    let enc = encode(&m, &x).unwrap();
    let z = sample_latent(&enc, &noise.eps);
    let mi = mi_loss(
        &m,
        &PairBatch::new(x.clone(), z, noise.neg_perm.clone()).unwrap(),
    )
    .unwrap();
    let p = high_affinities(&enc.mu_tilde, 2.0).unwrap();
    let q = low_affinities(&map_points(&m, &enc.mu_tilde).unwrap()).unwrap();
    let lp = lp_loss(&p, &q).unwrap();

    assert!((got.lg - lg).abs() < 1e-12);
    assert!((got.mi - mi).abs() < 1e-12);
    assert!((got.lp - lp).abs() < 1e-12);
    assert!((got.total - (lg + 0.7 * mi + 0.3 * lp)).abs() < 1e-12);
}

#[test]
fn disabling_a_term_matches_zero_weight_bit_for_bit() {
    let m = toy_model(6, 3, 2, 43);
    let x = uniform(4, 6, 44);
    let noise = fixed_noise(4, 3);
    let cfg = toy_config();
    for (term, zero) in [(Term::Mi, 0), (Term::Lp, 1)] {
        let mut off = cfg.clone();
        off.ablation = vec![term];
        let mut weightless = cfg.clone();
        if zero == 0 {
            weightless.alpha0 = 0.0;
        } else {
            weightless.alpha1 = 0.0;
        }
        let a = total_loss(&m, &x, &noise, &off).unwrap();
        let b = total_loss(&m, &x, &noise, &weightless).unwrap();
        assert_eq!(a.total.to_bits(), b.total.to_bits());
    }
    let mut none = cfg.clone();
    none.alpha0 = 0.0;
    none.alpha1 = 0.0;
    let only = total_loss(&m, &x, &noise, &none).unwrap();
    assert_eq!(only.total, only.lg);
}

#[test]
fn disabled_terms_build_no_nodes() {
    let m = toy_model(6, 3, 2, 45);
    let x = uniform(4, 6, 46);
    let noise = fixed_noise(4, 3);
    let mut cfg = toy_config();
    let count = |cfg: &TrainConfig| {
        let mut tape = Tape::new(&m.store);
        total_loss_vars(&m, &mut tape, &x, &noise, cfg).unwrap();
        tape.len()
    };
    let full = count(&cfg);
    cfg.ablation = vec![Term::Mi, Term::Lp];
    let bare = count(&cfg);
    assert!(bare < full);
    let mut tape = Tape::new(&m.store);
    let v = total_loss_vars(&m, &mut tape, &x, &noise, &cfg).unwrap();
    assert!(v.mi.is_none() && v.lp.is_none());
}

#[test]
fn doubling_alpha1_adds_one_lp() {
    let m = toy_model(6, 3, 2, 47);
    let x = uniform(4, 6, 48);
    let noise = fixed_noise(4, 3);
    let cfg = toy_config();
    let mut twice = cfg.clone();
    twice.alpha1 *= 2.0;
    let a = total_loss(&m, &x, &noise, &cfg).unwrap();
    let b = total_loss(&m, &x, &noise, &twice).unwrap();
    assert!((b.total - a.total - cfg.alpha1 * a.lp).abs() < 1e-12);
}

#[test]
fn composed_gradient_matches_finite_differences() {
    let mut m = toy_model(6, 3, 2, 49);
    let x = uniform(5, 6, 50);
    let noise = StepNoise {
        eps: common::normal(5, 3, 51),
        neg_perm: vec![2, 0, 4, 1, 3],
    };
    let cfg = toy_config();
    let model = m.clone();
    let mu = encode(&m, &x).unwrap().mu_tilde;
    let p = high_affinities(&mu, 2.0).unwrap();
    let rep = grad_check(&mut m.store, 1e-6, 8, |tape| {
        Ok(
            total_loss_vars_with(&model, tape, &x, &noise, &cfg, Some(&p))
                .map_err(|e| lpvdn::diffcore::DiffError::Shape {
                    op: "total",
                    detail: e.to_string(),
                })?
                .total,
        )
    })
    .unwrap();
    assert!(rep.max_relative_error < 1e-4, "{rep:?}");
}

#[test]
fn locality_term_reaches_the_encoder() {
    let m = toy_model(6, 3, 2, 52);
    let x = uniform(6, 6, 53);
    let noise = StepNoise {
        eps: common::normal(6, 3, 54),
        neg_perm: vec![1, 2, 3, 4, 5, 0],
    };
    let mut cfg = toy_config();
    cfg.ablation = vec![Term::Mi];
    let mut tape = Tape::new(&m.store);
    let v = total_loss_vars(&m, &mut tape, &x, &noise, &cfg).unwrap();
    let grads = tape.backward(v.lp.unwrap()).unwrap();
    let first = m.encoder.layers()[0].weight;
    let g = grads.get(first).expect("encoder receives gradient");
    assert!(g.iter().any(|&v| v != 0.0));
    assert!(grads.get(m.prior.mu_c).is_none());
}

#[test]
fn zero_epochs_checkpoints_the_pretrained_model() {
    let mut cfg = tiny_config();
    cfg.epochs = 0;
    let data: Dataset = cfg.dataset.load().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = train(&cfg, &data, dir.path()).unwrap();
    let (back, manifest) = load_checkpoint::<f64>(dir.path()).unwrap();
    assert_eq!(manifest.epochs_completed, 0);
    let mut pre = lpvdn::model::LpvdnModel::<f64>::new(cfg.architecture(data.dim()), cfg.seed);
    lpvdn::vade::pretrain(
        &mut pre,
        &data,
        cfg.pretrain_epochs,
        cfg.lr,
        cfg.batch_size,
        cfg.seed,
    )
    .unwrap();
    for ((a, b), c) in pre
        .store
        .iter()
        .zip(back.store.iter())
        .zip(out.model.store.iter())
    {
        assert_eq!(a.value, b.value, "{}", a.name);
        assert_eq!(a.value, c.value);
    }
    assert!(std::fs::read_to_string(dir.path().join("train.log"))
        .unwrap()
        .is_empty());
}

#[test]
fn same_seed_same_report() {
    let cfg = tiny_config();
    let data: Dataset = cfg.dataset.load().unwrap();
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    train(&cfg, &data, d1.path()).unwrap();
    train(&cfg, &data, d2.path()).unwrap();
    for f in ["report.json", "checkpoint.bin", "train.log"] {
        assert_eq!(
            std::fs::read(d1.path().join(f)).unwrap(),
            std::fs::read(d2.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn training_log_has_one_line_per_epoch_and_decays_lr() {
    let mut cfg = tiny_config();
    cfg.epochs = 12;
    cfg.lr_decay_interval = 5;
    let data: Dataset = cfg.dataset.load().unwrap();
    let out = fit(&cfg, &data).unwrap();
    assert_eq!(out.history.len(), 12);
    for e in &out.history {
        assert_eq!(e.lr, cfg.lr * 0.95f64.powi((e.epoch / 5) as i32));
        assert!(e.lg.is_finite() && e.mi > 0.0 && e.lp >= 0.0);
    }
}

#[test]
fn untrained_model_still_reports() {
    let cfg = tiny_config();
    let data: Dataset = cfg.dataset.load().unwrap();
    let m = lpvdn::model::LpvdnModel::<f64>::new(cfg.architecture(data.dim()), 5);
    let r = evaluate_model(&m, &data, &cfg).unwrap();
    for v in [r.acc, r.nmi] {
        let v = v.unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
    assert!(r.embedding.is_none());
    let unlabeled = Dataset::new("u", data.x.clone(), None).unwrap();
    let r = evaluate_model(&m, &unlabeled, &cfg).unwrap();
    assert!(r.acc.is_none() && r.nmi.is_none() && r.ari.is_none());
    let stats = r.embedding.unwrap();
    assert_eq!(stats.cluster_sizes.iter().sum::<usize>(), data.n());
}

#[test]
fn exported_embeddings_reproduce_the_reported_accuracy() {
    let mut cfg = tiny_config();
    cfg.out_dim = 2;
    let data: Dataset = cfg.dataset.load().unwrap();
    let out = fit(&cfg, &data).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.csv");
    export_embeddings(&out.model, &data, Embedding::OPrime, &path).unwrap();
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["index", "label", "e0", "e1"]
    );
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        labels.push(rec[1].parse::<usize>().unwrap());
        rows.push([
            rec[2].parse::<f64>().unwrap(),
            rec[3].parse::<f64>().unwrap(),
        ]);
    }
    assert_eq!(rows.len(), data.n());
    let emb = ndarray::Array2::from_shape_fn((rows.len(), 2), |(i, j)| rows[i][j]);
    assert_eq!(emb, embed(&out.model, &data.x, Embedding::OPrime).unwrap());
    let (m, _) = score_embedding(&emb, Some(&labels), cfg.k, cfg.seed).unwrap();
    assert!((m.unwrap()[0] - out.report.acc.unwrap()).abs() < 1e-12);
}

#[test]
fn noise_sweep_shape_and_clean_row() {
    let cfg = tiny_config();
    let data: Dataset = cfg.dataset.load().unwrap();
    let rows = noise_sweep(
        &cfg,
        &data,
        &[0.0, 0.3],
        &[Variant::Full, Variant::GlobalOnly],
        &[cfg.seed],
    )
    .unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0].sigma, 0.0);
    assert_eq!(rows[0].variant, "full");
    let plain = fit(&cfg, &data).unwrap();
    assert_eq!(rows[0].acc, plain.report.acc);
    assert_eq!(rows[0].ari, plain.report.ari);
    let lg = fit(&cfg.with_variant(Variant::GlobalOnly), &data).unwrap();
    assert_eq!(rows[1].acc, lg.report.acc);
    assert!(noise_sweep(&cfg, &data, &[], &[Variant::Full], &[0]).is_err());
    assert!(noise_sweep(&cfg, &data, &[-0.1], &[Variant::Full], &[0]).is_err());
}

#[test]
fn synthetic_smoke_run_writes_outputs() {
    let mut cfg = TrainConfig::preset("synthetic").unwrap();
    cfg.epochs = 30;
    let data: Dataset = cfg.dataset.load().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = train(&cfg, &data, dir.path()).unwrap();
    for f in [
        "checkpoint.json",
        "checkpoint.bin",
        "report.json",
        "train.log",
    ] {
        assert!(dir.path().join(f).exists());
    }
    assert_eq!(
        std::fs::read_to_string(dir.path().join("train.log"))
            .unwrap()
            .lines()
            .count(),
        30
    );
    let acc = out.report.acc.unwrap();
    assert!(acc > 0.9, "{acc}");
    let labels = data.labels.as_ref().unwrap();
    let pred = lpvdn::vade::gmm_assignments(&out.model, &data.x).unwrap();
    assert!(accuracy(labels, &pred).unwrap() > 0.9);
}
