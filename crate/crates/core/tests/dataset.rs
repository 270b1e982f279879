use std::collections::{HashMap, HashSet};
use std::path::Path;

use affcorr::dataset::{
    classify_tag, generate_pairs, label_song, regroup_image_label, resolve_song_label, segment_song, split_dataset, Blocklist, ClassCounts,
    EmotionClass, LabeledImage, LabeledSegment, PairConfig, Partition, SplitRatios,
};
use affcorr::io::{read_pairs, write_images, write_songs, FeatureStore, ImageEntry, SongEntry};
use affcorr::pipeline::{build_dataset, BuildOptions, Dataset, DatasetSummary, FEATURES_FILE};
use affcorr::synth::{plan, SyntheticSpec};
use affcorr::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use EmotionClass::*;

#[test]
fn image_regrouping_table() {
    for (label, class) in [
        ("awe", Positive),
        ("amusement", Positive),
        ("excitement", Positive),
        ("contentment", Neutral),
        ("fear", Negative),
        ("disgust", Negative),
        ("anger", Negative),
        ("sadness", Negative),
    ] {
        assert_eq!(regroup_image_label(label).unwrap(), class, "{label}");
    }
    assert!(matches!(regroup_image_label("boredom"), Err(Error::InvalidInput(_))));
}

#[test]
fn example_tags_and_resolution() {
    let none = Blocklist::default();
    assert_eq!(classify_tag("makes me sad", &none), Some(Negative));
    assert_eq!(classify_tag("cool and relaxing music", &none), Some(Neutral));
    assert_eq!(classify_tag("happysad", &none), None);
    let counts = |positive, neutral, negative| ClassCounts { positive, neutral, negative };
    assert_eq!(resolve_song_label(&counts(1, 0, 3)).unwrap(), Negative);
    assert_eq!(resolve_song_label(&counts(2, 2, 0)).unwrap(), Positive);
    assert_eq!(resolve_song_label(&counts(0, 1, 1)).unwrap(), Neutral);
    assert!(matches!(resolve_song_label(&counts(0, 0, 0)), Err(Error::NoLabel)));
}

#[test]
fn song_segmentation_examples() {
    assert_eq!(segment_song(185.0, 60.0).len(), 3);
    assert!(segment_song(59.0, 60.0).is_empty());
    assert_eq!(segment_song(120.0, 60.0), vec![(0.0, 60.0), (60.0, 120.0)]);
}

fn corpus(n_songs: usize, n_images: usize, seed: u64) -> (Vec<LabeledImage>, Vec<LabeledSegment>, HashMap<String, String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let images = (0..n_images).map(|i| LabeledImage { id: format!("img{i:03}"), class: ALL3[i % 3] }).collect();
    let mut segments = Vec::new();
    let mut song_of = HashMap::new();
    for s in 0..n_songs {
        let class = ALL3[s % 3];
        for k in 0..rng.random_range(1..4) {
            let id = format!("song{s:03}#{k}");
            song_of.insert(id.clone(), format!("song{s:03}"));
            segments.push(LabeledSegment { id, song_id: format!("song{s:03}"), class });
        }
    }
    (images, segments, song_of)
}

const ALL3: [EmotionClass; 3] = EmotionClass::ALL;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pair_labels_follow_classes_and_splits_are_song_disjoint(
        n_songs in 10usize..30,
        n_images in 10usize..40,
        true_per_segment in 1usize..5,
        seed in any::<u64>(),
    ) {
        let (images, segments, song_of) = corpus(n_songs, n_images, seed);
        let img_class: HashMap<_, _> = images.iter().map(|i| (i.id.clone(), i.class)).collect();
        let seg_class: HashMap<_, _> = segments.iter().map(|s| (s.id.clone(), s.class)).collect();
        let cfg = PairConfig { true_per_segment, false_ratio: 1.0, seed };
        let pairs = generate_pairs(&images, &segments, &cfg).unwrap();
        for p in &pairs {
            prop_assert_eq!(p.label, img_class[&p.image_id] == seg_class[&p.segment_id]);
        }
        let n_true = pairs.iter().filter(|p| p.label).count();
        prop_assert_eq!(pairs.len() - n_true, n_true);

        let split = split_dataset(&pairs, &song_of, &SplitRatios::default(), seed).unwrap();
        let mut seen_songs: HashMap<String, Partition> = HashMap::new();
        let mut seen_images: HashMap<String, Partition> = HashMap::new();
        for part in Partition::ALL {
            for p in split.pairs(part) {
                let song = &song_of[&p.segment_id];
                prop_assert_eq!(*seen_songs.entry(song.clone()).or_insert(part), part);
                prop_assert_eq!(*seen_images.entry(p.image_id.clone()).or_insert(part), part);
            }
        }
        let kept = split.train.len() + split.val.len() + split.test.len();
        prop_assert_eq!(kept + split.discarded, pairs.len());
        prop_assert_eq!(split_dataset(&pairs, &song_of, &SplitRatios::default(), seed).unwrap(), split);
    }

    #[test]
    fn song_label_ignores_tag_order(tags in prop::collection::vec("[a-z ]{0,12}(happy|calm|sad|pain|relax)?[a-z]{0,4}", 1..8), seed in any::<u64>()) {
        let none = Blocklist::default();
        let mut shuffled = tags.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let a = label_song(&tags, &none).ok();
        let b = label_song(&shuffled, &none).ok();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn synthetic_labels_follow_priors() {
    let priors = [0.5, 0.3, 0.2];
    let spec = SyntheticSpec { n_songs: 3000, n_images: 3000, priors, seed: 17, ..SyntheticSpec::default() };
    let plan = plan(&spec).unwrap();
    let mut songs = [0usize; 3];
    let mut images = [0usize; 3];
    plan.songs.iter().for_each(|s| songs[s.class.index()] += 1);
    plan.images.iter().for_each(|i| images[i.label.class().index()] += 1);
    for counts in [songs, images] {
        for (c, p) in counts.iter().zip(priors) {
            let n = 3000.0;
            let sd = (n * p * (1.0 - p)).sqrt();
            assert!((*c as f64 - n * p).abs() < 4.0 * sd, "{counts:?} vs {priors:?}");
        }
    }
    for s in &plan.songs {
        assert_eq!(label_song(&s.tags, &Blocklist::default()).unwrap(), s.class, "{:?}", s.tags);
    }
}

// Builds a dataset from precomputed features, skipping audio entirely.
fn write_corpus(dir: &Path) -> BuildOptions {
    let mut songs = Vec::new();
    let mut features = FeatureStore::new(193);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tags = [["so happy"], ["calm down"], ["sad song"]];
    for s in 0..12 {
        let duration = 60.0 * (1 + s % 3) as f64 + 5.0;
        songs.push(SongEntry {
            id: format!("s{s:02}"),
            tags: tags[s % 3].iter().map(|t| t.to_string()).collect(),
            duration_s: duration,
            wav_path: None,
        });
        for k in 0..(1 + s % 3) {
            let v: Vec<f32> = (0..193).map(|_| rng.random_range(-1.0..1.0)).collect();
            features.push(format!("s{s:02}#{k}"), &v).unwrap();
        }
    }
    songs.push(SongEntry { id: "untagged".into(), tags: vec!["rock".into()], duration_s: 200.0, wav_path: None });
    songs.push(SongEntry { id: "brief".into(), tags: vec!["happy".into()], duration_s: 30.0, wav_path: None });
    let labels = ["awe", "contentment", "fear", "amusement", "sadness", "anger"];
    let images: Vec<ImageEntry> = (0..30)
        .map(|i| ImageEntry { id: format!("i{i:02}"), original_label: labels[i % labels.len()].into(), embedding_index: 29 - i })
        .collect();
    let mut emb = FeatureStore::new(8);
    for i in 0..30 {
        emb.push(format!("row{i}"), &[i as f32; 8]).unwrap();
    }
    write_songs(&dir.join("songs.json"), &songs).unwrap();
    write_images(&dir.join("images.json"), &images).unwrap();
    features.write(&dir.join("feat.afcf")).unwrap();
    emb.write(&dir.join("emb.afcf")).unwrap();
    BuildOptions {
        songs: dir.join("songs.json"),
        images: dir.join("images.json"),
        embeddings: dir.join("emb.afcf"),
        features: Some(dir.join("feat.afcf")),
        blocklist: None,
        pairs: PairConfig { true_per_segment: 3, false_ratio: 1.0, seed: 2 },
        split: SplitRatios::default(),
        feature_config: Default::default(),
        segments: Default::default(),
        out: dir.join("out"),
    }
}

#[test]
fn build_dataset_labels_excludes_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let opts = write_corpus(dir.path());
    let summary: DatasetSummary = build_dataset(&opts).unwrap();
    assert_eq!(summary.songs_total, 14);
    assert_eq!(summary.songs_used, 12);
    let excluded: Vec<&str> = summary.excluded_songs.iter().map(|e| e.id.as_str()).collect();
    assert_eq!(excluded, ["brief", "untagged"]);
    assert_eq!(summary.segments, 24);
    assert_eq!(summary.pairs, 2 * summary.true_pairs);

    let data = Dataset::load(&opts.out).unwrap();
    // embedding_index is honored
    assert_eq!(data.images.require("i00").unwrap(), &[29.0; 8]);
    let train: HashSet<_> = data.split.train.iter().map(|p| p.segment_id.clone()).collect();
    let test: HashSet<_> = data.split.test.iter().map(|p| p.segment_id.clone()).collect();
    assert!(train.is_disjoint(&test));
    assert_eq!(read_pairs(&opts.out.join("pairs.csv")).unwrap().len(), summary.pairs);

    let first = std::fs::read(opts.out.join(FEATURES_FILE)).unwrap();
    let pairs = std::fs::read(opts.out.join("pairs.csv")).unwrap();
    build_dataset(&opts).unwrap();
    assert_eq!(std::fs::read(opts.out.join(FEATURES_FILE)).unwrap(), first);
    assert_eq!(std::fs::read(opts.out.join("pairs.csv")).unwrap(), pairs);
}

#[test]
fn blocklist_can_drop_a_songs_only_tag() {
    let dir = tempfile::tempdir().unwrap();
    let mut opts = write_corpus(dir.path());
    std::fs::write(dir.path().join("block.txt"), "# comment\nso happy\n").unwrap();
    opts.blocklist = Some(dir.path().join("block.txt"));
    let summary = build_dataset(&opts).unwrap();
    // the four "so happy" songs lose their label
    assert_eq!(summary.songs_used, 8);
}
