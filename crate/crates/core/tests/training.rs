use affcorr::acpnet::{AcpModel, ArchConfig, Architecture};
use affcorr::dataset::{CorrespondencePair, DatasetSplit};
use affcorr::io::FeatureStore;
use affcorr::training::{
    evaluate_correspondence, init_model, retrieval_scores, retrieve, score_pairs, train, train_probe, ProbeConfig, ProbeSample, Stores,
    TrainConfig,
};
use affcorr::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const IMG_DIM: usize = 16;

fn tiny_arch() -> Architecture {
    ArchConfig { image_dim: IMG_DIM, embed_dim: 16, image_hidden: vec![24], music_hidden: vec![32, 24, 16], fusion_hidden: vec![24, 12, 8] }
        .architecture()
        .unwrap()
}

struct Fixture {
    images: FeatureStore,
    music: FeatureStore,
    classes: Vec<(String, usize)>,
    segments: Vec<(String, usize)>,
}

/// Class-clustered vectors: images `img<c>_<i>`, segments `song<c>_<i>#0`.
fn fixture(per_class: usize, spread: f32, seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let img_centers: Vec<Vec<f32>> = (0..3).map(|_| (0..IMG_DIM).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let mus_centers: Vec<Vec<f32>> = (0..3).map(|_| (0..193).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let mut images = FeatureStore::new(IMG_DIM);
    let mut music = FeatureStore::new(193);
    let (mut classes, mut segments) = (Vec::new(), Vec::new());
    for c in 0..3 {
        for i in 0..per_class {
            let id = format!("img{c}_{i}");
            let v: Vec<f32> = img_centers[c].iter().map(|m| m + spread * rng.random_range(-1.0..1.0)).collect();
            images.push(id.clone(), &v).unwrap();
            classes.push((id, c));
            let sid = format!("song{c}_{i}#0");
            let v: Vec<f32> = mus_centers[c].iter().map(|m| m + spread * rng.random_range(-1.0..1.0)).collect();
            music.push(sid.clone(), &v).unwrap();
            segments.push((sid, c));
        }
    }
    Fixture { images, music, classes, segments }
}

fn all_pairs(f: &Fixture, keep: impl Fn(usize, usize) -> bool) -> Vec<CorrespondencePair> {
    let mut out = Vec::new();
    for (i, (img, ci)) in f.classes.iter().enumerate() {
        for (s, (seg, cs)) in f.segments.iter().enumerate() {
            if keep(i, s) {
                out.push(CorrespondencePair { image_id: img.clone(), segment_id: seg.clone(), label: ci == cs });
            }
        }
    }
    out
}

fn split_of(train: Vec<CorrespondencePair>, val: Vec<CorrespondencePair>, test: Vec<CorrespondencePair>) -> DatasetSplit {
    DatasetSplit { seed: 0, train, val, test, songs: Default::default(), images: Default::default(), discarded: 0 }
}

fn balanced_split(f: &Fixture) -> DatasetSplit {
    let pairs = all_pairs(f, |_, _| true);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (i, p) in pairs.into_iter().enumerate() {
        match i % 5 {
            0 => val.push(p),
            1 => test.push(p),
            _ => train.push(p),
        }
    }
    split_of(train, val, test)
}

#[test]
fn zero_learning_rate_stops_after_patience() {
    let f = fixture(4, 0.1, 1);
    let split = balanced_split(&f);
    let cfg = TrainConfig { lr: 0.0, patience: 3, max_epochs: 20, seed: 5, ..TrainConfig::default() };
    let out = train(init_model(&tiny_arch(), 5).unwrap(), &split, &Stores::new(&f.images, &f.music), &cfg).unwrap();
    let r = &out.report;
    assert_eq!(r.epochs.len(), 4);
    assert!(r.stopped_early);
    assert_eq!(r.best_epoch, 1);
    assert!(r.epochs.iter().all(|e| e.val_accuracy == r.epochs[0].val_accuracy));
}

#[test]
fn overfits_small_separable_set() {
    let f = fixture(4, 0.05, 2);
    // 32 pairs: 16 true, 16 false.
    let mut trues = all_pairs(&f, |_, _| true).into_iter().filter(|p| p.label).take(16).collect::<Vec<_>>();
    let falses = all_pairs(&f, |_, _| true).into_iter().filter(|p| !p.label).step_by(5).take(16);
    trues.extend(falses);
    assert_eq!(trues.len(), 32);
    let split = split_of(trues.clone(), trues.clone(), trues.clone());
    let cfg = TrainConfig { lr: 1e-3, patience: 50, max_epochs: 50, batch_size: 8, dropout: 0.0, seed: 3, ..TrainConfig::default() };
    let stores = Stores::new(&f.images, &f.music);
    let out = train(init_model(&tiny_arch(), 3).unwrap(), &split, &stores, &cfg).unwrap();
    let acc = evaluate_correspondence(&out.model, &trues, &stores).unwrap();
    assert!(acc.accuracy >= 31.0 / 32.0, "train accuracy {}", acc.accuracy);
}

#[test]
fn same_seed_same_losses() {
    let f = fixture(4, 0.3, 3);
    let split = balanced_split(&f);
    let stores = Stores::new(&f.images, &f.music);
    let cfg = TrainConfig { lr: 1e-3, max_epochs: 4, patience: 4, batch_size: 16, seed: 9, ..TrainConfig::default() };
    let a = train(init_model(&tiny_arch(), 1).unwrap(), &split, &stores, &cfg).unwrap();
    let mut shuffled = split.clone();
    shuffled.train.reverse();
    let b = train(init_model(&tiny_arch(), 1).unwrap(), &shuffled, &stores, &cfg).unwrap();
    let bits = |o: &affcorr::training::TrainOutcome| o.report.epochs.iter().map(|e| e.train_loss.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(a.model, b.model);
}

#[test]
fn best_model_reproduces_best_val_accuracy() {
    let f = fixture(4, 0.3, 4);
    let split = balanced_split(&f);
    let stores = Stores::new(&f.images, &f.music);
    let cfg = TrainConfig { lr: 1e-3, max_epochs: 8, patience: 3, batch_size: 16, seed: 2, ..TrainConfig::default() };
    let out = train(init_model(&tiny_arch(), 2).unwrap(), &split, &stores, &cfg).unwrap();
    let r = &out.report;
    let max = r.epochs.iter().map(|e| e.val_accuracy).fold(f64::MIN, f64::max);
    assert_eq!(r.best_val_accuracy, max);
    assert!(r.best_epoch <= r.epochs.len());
    assert_eq!(evaluate_correspondence(&out.model, &split.val, &stores).unwrap().accuracy, max);
    assert_eq!(evaluate_correspondence(&out.model, &split.test, &stores).unwrap(), r.test);
}

#[test]
fn missing_ids_are_data_errors() {
    let f = fixture(2, 0.1, 5);
    let mut split = balanced_split(&f);
    split.val[0].segment_id = "nowhere#0".into();
    let err = train(init_model(&tiny_arch(), 0).unwrap(), &split, &Stores::new(&f.images, &f.music), &TrainConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Data(_)), "{err}");
}

#[test]
fn evaluation_matches_manual_scoring_and_complements() {
    let f = fixture(4, 0.5, 6);
    let stores = Stores::new(&f.images, &f.music);
    let model = init_model(&tiny_arch(), 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pool = all_pairs(&f, |_, _| true);
    let pairs: Vec<CorrespondencePair> = (0..20).map(|_| pool[rng.random_range(0..pool.len())].clone()).collect();
    let scores = score_pairs(&model, &pairs, &stores).unwrap();
    let mut correct = 0;
    for (p, s) in pairs.iter().zip(&scores) {
        let pred = model.acp_forward(f.images.get(&p.image_id).unwrap(), f.music.get(&p.segment_id).unwrap()).unwrap();
        assert_eq!(pred.p_true.to_bits(), s.to_bits());
        correct += ((pred.p_true > 0.5) == p.label) as usize;
    }
    let report = evaluate_correspondence(&model, &pairs, &stores).unwrap();
    assert_eq!(report.accuracy, correct as f64 / 20.0);
    let flipped: Vec<_> = pairs.iter().map(|p| CorrespondencePair { label: !p.label, ..p.clone() }).collect();
    let flipped_acc = evaluate_correspondence(&model, &flipped, &stores).unwrap().accuracy;
    assert!((flipped_acc - (1.0 - report.accuracy)).abs() < 1e-12);
    assert!(matches!(evaluate_correspondence(&model, &[], &stores), Err(Error::InvalidInput(_))));
}

#[test]
fn constant_true_model_scores_half_on_balanced_set() {
    let f = fixture(2, 0.1, 7);
    let mut model = AcpModel::<f32>::zeros(&tiny_arch()).unwrap();
    // Only the last fusion bias is non-zero: logits are always (0, 1).
    let last = model.params_mut().pop().unwrap();
    last[1] = 1.0;
    let trues = all_pairs(&f, |_, _| true).into_iter().filter(|p| p.label).take(5);
    let falses = all_pairs(&f, |_, _| true).into_iter().filter(|p| !p.label).take(5);
    let pairs: Vec<_> = trues.chain(falses).collect();
    let r = evaluate_correspondence(&model, &pairs, &Stores::new(&f.images, &f.music)).unwrap();
    assert_eq!(r.accuracy, 0.5);
    assert_eq!(r.confusion.false_pos, 5);
}

#[test]
fn retrieval_is_sorted_pairwise_scores() {
    let f = fixture(5, 0.5, 8);
    let model = init_model(&tiny_arch(), 4).unwrap();
    let query = f.images.row(0);
    let hits = retrieve(&model, query, &f.music, f.music.len()).unwrap();
    let mut ids: Vec<_> = hits.iter().map(|h| h.segment_id.clone()).collect();
    ids.sort();
    let mut all = f.music.ids().to_vec();
    all.sort();
    assert_eq!(ids, all);
    for w in hits.windows(2) {
        assert!(w[0].p_true > w[1].p_true || (w[0].p_true == w[1].p_true && w[0].segment_id < w[1].segment_id));
    }
    let scores = retrieval_scores(&model, query, &f.music).unwrap();
    for (i, (id, feat)) in f.music.iter().enumerate() {
        let p = model.acp_forward(query, feat).unwrap().p_true;
        assert_eq!(p.to_bits(), scores[i].to_bits(), "{id}");
    }
    assert!(matches!(retrieve(&model, query, &FeatureStore::new(193), 0), Err(Error::InvalidInput(_))));
    assert!(retrieve(&model, query, &f.music, f.music.len() + 1).is_err());
}

#[test]
fn retrieval_ties_break_by_id() {
    let model = AcpModel::<f32>::zeros(&tiny_arch()).unwrap();
    let mut lib = FeatureStore::new(193);
    for id in ["c#0", "a#0", "b#0"] {
        lib.push(id, &[0.0; 193]).unwrap();
    }
    let hits = retrieve(&model, &[0.0; IMG_DIM], &lib, 3).unwrap();
    let ids: Vec<_> = hits.iter().map(|h| h.segment_id.as_str()).collect();
    assert_eq!(ids, ["a#0", "b#0", "c#0"]);
}

fn cluster_samples(per_class: usize, spread: f32, seed: u64) -> Vec<ProbeSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f32>> = (0..3).map(|_| (0..1024).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    let mut out = Vec::new();
    for c in 0..3 {
        for i in 0..per_class {
            let embedding = centers[c].iter().map(|m| m + spread * rng.random_range(-1.0..1.0)).collect();
            out.push(ProbeSample { embedding, class: c, group: format!("g{c}_{}", i / 2) });
        }
    }
    out
}

#[test]
fn probe_separates_clusters() {
    let samples = cluster_samples(40, 0.5, 1);
    let out = train_probe(&samples, 3, &ProbeConfig { epochs: 30, ..ProbeConfig::default() }).unwrap();
    assert_eq!(out.dims(), vec![1024, 512, 32, 3]);
    assert!(out.heldout_samples > 0);
    assert!(out.heldout_accuracy >= 0.95, "{}", out.heldout_accuracy);
}

#[test]
fn probe_on_constant_embeddings_learns_the_majority() {
    let mut samples = Vec::new();
    for (c, n) in [(0, 30), (1, 10), (2, 10)] {
        for i in 0..n {
            samples.push(ProbeSample { embedding: vec![0.5; 1024], class: c, group: format!("{c}_{i}") });
        }
    }
    let out = train_probe(&samples, 3, &ProbeConfig { epochs: 100, ..ProbeConfig::default() }).unwrap();
    assert!((out.heldout_accuracy - out.majority_baseline).abs() < 1e-12);
    assert!((out.heldout_accuracy - 0.6).abs() < 0.1);
}

#[test]
fn probe_rejects_single_class() {
    let samples: Vec<_> = cluster_samples(5, 0.1, 2).into_iter().filter(|s| s.class == 0).collect();
    assert!(matches!(train_probe(&samples, 3, &ProbeConfig::default()), Err(Error::InvalidInput(_))));
}
