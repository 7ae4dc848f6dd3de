use std::fs;
use std::path::Path;

use malelm::seed::rng_from_seed;
use malelm::{
    bytes_to_image, class_weights, load_corpus, stratified_split, train_ensemble, ElmConfig, ElmModel, Ensemble,
    Error, FanIn, Featurization, GrayImage, ResizeMethod, Samples,
};
use rand::Rng;

/// Two byte-level "families": one dominated by low bytes, one by high bytes.
fn write_corpus(root: &Path, per_class: usize) {
    let mut rng = rng_from_seed(11);
    for (class, range) in [("famA", 0u8..96), ("famB", 160u8..255)] {
        let dir = root.join(class);
        fs::create_dir_all(&dir).unwrap();
        for i in 0..per_class {
            let len = rng.random_range(2_000..12_000);
            let range = range.clone();
            let bytes: Vec<u8> = (0..len).map(|_| rng.random_range(range.clone())).collect();
            let img = bytes_to_image(&bytes).unwrap();
            let file = fs::File::create(dir.join(format!("{i:03}.png"))).unwrap();
            img.write_png(file).unwrap();
        }
    }
}

#[test]
fn corpus_to_saved_ensemble_and_back() {
    let tmp = tempfile::tempdir().unwrap();
    write_corpus(tmp.path(), 20);
    fs::write(tmp.path().join("famA").join("broken.png"), b"not an image").unwrap();

    let feat = Featurization::vector(256);
    let data: Samples = load_corpus(tmp.path(), &feat).unwrap();
    assert_eq!(data.class_names(), ["famA", "famB"]);
    assert_eq!(data.class_counts(), [20, 20], "undecodable file is skipped");
    assert_eq!(data.feature_dim(), 256);
    assert!(data.features().iter().all(|v| (0.0..=1.0).contains(v)));

    let (train, test) = stratified_split(&data, 0.25, 5).unwrap();
    assert_eq!((train.len(), test.len()), (30, 10));

    let weights = class_weights::<f64>(train.catalog()).unwrap();
    let cfg = ElmConfig::default().with_neurons(64).with_fan_in(FanIn::Sparse(8));
    let ens = train_ensemble(&train, &cfg, 5, 9, Some(&weights)).unwrap();
    let ev = ens.evaluate_members(&test, 1).unwrap();
    assert_eq!(ev.ensemble_accuracy, 1.0);

    let path = tmp.path().join("committee.elme");
    fs::write(&path, ens.to_bytes().unwrap()).unwrap();
    let back = Ensemble::<f64>::from_bytes(&fs::read(&path).unwrap()).unwrap();
    assert_eq!(back.len(), 5);
    assert_eq!(back.base_seed(), 9);
    assert_eq!(
        back.predict_batch(test.features(), 1).unwrap(),
        ens.predict_batch(test.features(), 1).unwrap()
    );
}

#[test]
fn image_featurization_loads_and_trains() {
    let tmp = tempfile::tempdir().unwrap();
    write_corpus(tmp.path(), 8);
    let feat = Featurization::Image {
        width: 16,
        height: 16,
        method: ResizeMethod::Nearest,
    };
    let data = load_corpus::<f32>(tmp.path(), &feat).unwrap();
    assert_eq!(data.feature_dim(), 256);
    let model = ElmModel::train(&data, &ElmConfig::default().with_neurons(32).with_seed(2), None).unwrap();
    assert_eq!(model.accuracy(data.features(), data.labels()).unwrap(), 1.0);

    let restored = ElmModel::<f32>::from_bytes(&model.to_bytes().unwrap()).unwrap();
    assert_eq!(restored, model);
}

#[test]
fn class_of_only_bad_files_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    write_corpus(tmp.path(), 3);
    let bad = tmp.path().join("famC");
    fs::create_dir(&bad).unwrap();
    fs::write(bad.join("x.png"), b"garbage").unwrap();
    let err = load_corpus::<f64>(tmp.path(), &Featurization::vector(64)).unwrap_err();
    assert!(matches!(err, Error::EmptyClass(ref name) if name == "famC"), "{err}");
}

#[test]
fn missing_root_and_empty_class_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let err = load_corpus::<f64>(tmp.path().join("nope"), &Featurization::vector(8)).unwrap_err();
    assert!(matches!(err, Error::MissingRoot(_)));

    fs::create_dir(tmp.path().join("empty")).unwrap();
    let err = load_corpus::<f64>(tmp.path(), &Featurization::vector(8)).unwrap_err();
    assert!(matches!(err, Error::EmptyClass(_)));
}

#[test]
fn png_written_by_imaging_decodes_to_same_pixels() {
    let bytes: Vec<u8> = (0..=255u8).cycle().take(10 * 1024 + 7).collect();
    let img = bytes_to_image(&bytes).unwrap();
    let mut png = Vec::new();
    img.write_png(&mut png).unwrap();
    let back = GrayImage::decode(&png).unwrap();
    assert_eq!(back, img);
    assert_eq!(&back.pixels()[..bytes.len()], &bytes[..]);
}
