use lpvdn::cluster::{accuracy, kmeans};
use lpvdn::dataio::{load_idx, make_synthetic_gmm, write_idx, write_matrix};
use lpvdn::pipeline::{DatasetSpec, IdxPart, TrainConfig};
use lpvdn::Dataset;

#[test]
fn blobs_are_separable_by_plain_kmeans() {
    let data = make_synthetic_gmm::<f64>(4, 20, 500, 10.0, 0).unwrap();
    assert_eq!((data.n(), data.dim()), (2000, 20));
    assert!(data.x.iter().all(|&v| (0.0..=1.0).contains(&v)));
    let km = kmeans(data.x.view(), 4, 10, 0).unwrap();
    let acc = accuracy(data.labels.as_ref().unwrap(), &km.assignments).unwrap();
    assert!(acc >= 0.99, "{acc}");
}

#[test]
fn idx_parts_are_concatenated_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let a = make_synthetic_gmm::<f64>(2, 4, 3, 5.0, 1).unwrap();
    let b = make_synthetic_gmm::<f64>(2, 4, 2, 5.0, 2).unwrap();
    for (name, d) in [("a", &a), ("b", &b)] {
        let lbl = dir.path().join(format!("{name}-lbl"));
        write_idx(
            d,
            2,
            2,
            &dir.path().join(format!("{name}-img")),
            Some(lbl.as_path()),
        )
        .unwrap();
    }
    let spec = DatasetSpec::Idx {
        parts: ["a", "b"]
            .iter()
            .map(|n| IdxPart {
                images: format!("{n}-img").into(),
                labels: Some(format!("{n}-lbl").into()),
            })
            .collect(),
    };
    let mut cfg = TrainConfig::preset("synthetic").unwrap();
    cfg.dataset = spec;
    let path = dir.path().join("cfg.json");
    cfg.save(&path).unwrap();
    let loaded = TrainConfig::load(&path).unwrap();
    let data: Dataset = loaded.dataset.load().unwrap();
    assert_eq!(data.n(), 10);
    let first: Dataset =
        load_idx(&dir.path().join("a-img"), Some(&dir.path().join("a-lbl"))).unwrap();
    assert_eq!(data.x.slice(ndarray::s![..6, ..]), first.x);
    assert_eq!(
        &data.labels.as_ref().unwrap()[..6],
        &first.labels.unwrap()[..]
    );
}

#[test]
fn matrix_dataset_through_config() {
    let dir = tempfile::tempdir().unwrap();
    let data = make_synthetic_gmm::<f64>(3, 5, 4, 5.0, 3).unwrap();
    write_matrix(&data, &dir.path().join("m.json")).unwrap();
    let mut cfg = TrainConfig::preset("synthetic").unwrap();
    cfg.dataset = DatasetSpec::Matrix {
        manifest: "m.json".into(),
    };
    let path = dir.path().join("cfg.json");
    cfg.save(&path).unwrap();
    let back: Dataset = TrainConfig::load(&path).unwrap().dataset.load().unwrap();
    assert_eq!(back.labels, data.labels);
    for (a, b) in back.x.iter().zip(data.x.iter()) {
        assert_eq!(*a, *b as f32 as f64);
    }
}
