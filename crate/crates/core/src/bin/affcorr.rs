use std::path::{Path, PathBuf};
use std::process::ExitCode;

use affcorr::acpnet::{load_checkpoint, save_checkpoint, AcpTarget, CheckpointMeta, Modality};
use affcorr::io::{read_labels, read_pairs, read_songs, FeatureStore, RunConfig};
use affcorr::neural::{grad_check, GradCheckOptions};
use affcorr::pipeline::{
    build_dataset, extract_features, probe_classes, probe_samples, AudioSource, BuildOptions, Dataset, FEATURES_FILE, IMAGE_STORE_FILE,
};
use affcorr::synth::{write_synthetic, SyntheticSpec};
use affcorr::training::{evaluate_correspondence, init_model, retrieve, train, train_probe, Stores};
use affcorr::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "affcorr", version, about = "Affective correspondence between music and images")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract 193-d segment features from WAV files into a feature store.
    ExtractFeatures {
        /// Songs manifest; its wav_path entries are analyzed.
        #[arg(long, conflicts_with = "wavs")]
        songs: Option<PathBuf>,
        /// WAV files to analyze; the file stem becomes the song id.
        wavs: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label songs and images, sample pairs and split them into partitions.
    BuildDataset {
        #[arg(long)]
        songs: PathBuf,
        #[arg(long)]
        images: PathBuf,
        /// Image embedding store; defaults to embeddings.afcf next to the image manifest.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Precomputed segment features (otherwise extracted from the WAVs).
        #[arg(long)]
        features: Option<PathBuf>,
        /// Tags to ignore, one per line.
        #[arg(long)]
        blocklist: Option<PathBuf>,
        #[arg(long)]
        false_ratio: Option<f64>,
        #[arg(long)]
        true_per_segment: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic corpus: manifests, WAVs and image embeddings.
    GenSynthetic {
        /// TOML file with generator settings (keys of the synthetic spec).
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        songs: Option<usize>,
        #[arg(long)]
        images: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the correspondence network on a dataset directory.
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Correspondence accuracy of a checkpoint on a pair list.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        /// Defaults to images.afcf next to the pair list.
        #[arg(long)]
        images: Option<PathBuf>,
        /// Defaults to features.afcf next to the pair list.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Train an emotion probe on frozen embeddings of one modality.
    Probe {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        modality: Modality,
        /// CSV with columns id,label[,group].
        #[arg(long)]
        labels: PathBuf,
        /// Input store; defaults to the modality's store next to the labels.
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Rank library segments for a query image.
    Retrieve {
        #[arg(long)]
        ckpt: PathBuf,
        /// Image id in the embedding store.
        #[arg(long)]
        query: String,
        /// Defaults to images.afcf next to the library.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        library: PathBuf,
        #[arg(short, default_value_t = 10)]
        k: usize,
    },
    /// Compare analytic and finite-difference gradients of the full network.
    GradCheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        pairs: usize,
        /// Coordinates sampled per parameter tensor (all when omitted).
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Error> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(name)
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::ExtractFeatures { songs, wavs, config, out } => {
            let cfg = load_config(config.as_deref())?;
            let sources: Vec<AudioSource> = match songs {
                Some(manifest) => read_songs(&manifest)?
                    .into_iter()
                    .map(|s| {
                        let path = s.wav_path.ok_or_else(|| Error::Data(format!("song {} has no wav_path", s.id)))?;
                        Ok(AudioSource { path: sibling(&manifest, "").join(path), song_id: s.id })
                    })
                    .collect::<Result<_, Error>>()?,
                None => wavs
                    .iter()
                    .map(|p| {
                        let stem = p
                            .file_stem()
                            .and_then(|s| s.to_str())
                            .ok_or_else(|| Error::InvalidInput(format!("bad file name {}", p.display())))?;
                        Ok(AudioSource { song_id: stem.to_string(), path: p.clone() })
                    })
                    .collect::<Result<_, Error>>()?,
            };
            if sources.is_empty() {
                return Err(Error::InvalidInput("no input files".into()));
            }
            let ex = extract_features(&sources, &cfg.features, &cfg.segments)?;
            for (id, e) in &ex.failures {
                log::warn!("{id}: {e}");
            }
            for id in &ex.too_short {
                log::warn!("{id}: shorter than one segment");
            }
            if ex.store.is_empty() {
                return Err(Error::Data("no file produced any segment".into()));
            }
            ex.store.write(&out)?;
            log::info!("wrote {} segments from {} files to {}", ex.store.len(), sources.len() - ex.failures.len(), out.display());
        }
        Command::BuildDataset { songs, images, embeddings, features, blocklist, false_ratio, true_per_segment, seed, config, out } => {
            let cfg = load_config(config.as_deref())?;
            let mut pairs = cfg.pairs;
            if let Some(r) = false_ratio {
                pairs.false_ratio = r;
            }
            if let Some(n) = true_per_segment {
                pairs.true_per_segment = n;
            }
            if let Some(s) = seed {
                pairs.seed = s;
            }
            let embeddings = embeddings.unwrap_or_else(|| sibling(&images, "embeddings.afcf"));
            let opts = BuildOptions {
                songs,
                images,
                embeddings,
                features,
                blocklist,
                pairs,
                split: cfg.split,
                feature_config: cfg.features,
                segments: cfg.segments,
                out: out.clone(),
            };
            let s = build_dataset(&opts)?;
            println!(
                "songs {} used / {} total, segments {}, images {}, pairs {} ({} true), train/val/test {}/{}/{}, discarded {}",
                s.songs_used,
                s.songs_total,
                s.segments,
                s.images,
                s.pairs,
                s.true_pairs,
                s.partition_pairs[0],
                s.partition_pairs[1],
                s.partition_pairs[2],
                s.discarded_pairs
            );
        }
        Command::GenSynthetic { spec, songs, images, seed, out } => {
            let mut s: SyntheticSpec = match spec {
                Some(p) => toml::from_str(&std::fs::read_to_string(p)?)?,
                None => SyntheticSpec::default(),
            };
            if let Some(n) = songs {
                s.n_songs = n;
            }
            if let Some(n) = images {
                s.n_images = n;
            }
            if let Some(v) = seed {
                s.seed = v;
            }
            let plan = write_synthetic(&s, &out)?;
            println!("wrote {} songs and {} images to {}", plan.songs.len(), plan.images.len(), out.display());
        }
        Command::Train { dataset, config, seed, out } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            let dataset = dataset.or(cfg.paths.dataset.clone()).ok_or_else(|| Error::InvalidInput("--dataset is required".into()))?;
            let out = out.or(cfg.paths.out.clone()).ok_or_else(|| Error::InvalidInput("--out is required".into()))?;
            let mut arch_cfg = cfg.arch.clone();
            let data = Dataset::load(&dataset)?;
            arch_cfg.image_dim = data.images.dim();
            let arch = arch_cfg.architecture()?;
            let outcome = train(init_model(&arch, cfg.train.seed)?, &data.split, &data.stores(), &cfg.train)?;
            std::fs::create_dir_all(&out)?;
            let meta = CheckpointMeta { seed: cfg.train.seed, epoch: outcome.report.best_epoch as u32 };
            save_checkpoint(&out.join("model.ckpt"), &outcome.model, meta)?;
            let table = outcome.report.to_table();
            std::fs::write(out.join("report.txt"), &table)?;
            affcorr::io::write_json_file(&out.join("report.json"), &outcome.report)?;
            print!("{table}");
        }
        Command::Eval { ckpt, pairs, images, features } => {
            let (model, _) = load_checkpoint(&ckpt)?;
            let list = read_pairs(&pairs)?;
            let images = FeatureStore::read(&images.unwrap_or_else(|| sibling(&pairs, IMAGE_STORE_FILE)))?;
            let music = FeatureStore::read(&features.unwrap_or_else(|| sibling(&pairs, FEATURES_FILE)))?;
            let report = evaluate_correspondence(&model, &list, &Stores::new(&images, &music))?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Probe { ckpt, modality, labels, store, config } => {
            let cfg = load_config(config.as_deref())?;
            let (model, _) = load_checkpoint(&ckpt)?;
            let rows = read_labels(&labels)?;
            let default_store = match modality {
                Modality::Music => FEATURES_FILE,
                Modality::Image => IMAGE_STORE_FILE,
            };
            let store = FeatureStore::read(&store.unwrap_or_else(|| sibling(&labels, default_store)))?;
            let samples = probe_samples(&model, modality, &rows, &store)?;
            let out = train_probe(&samples, probe_classes(modality), &cfg.probe)?;
            let dims = out.dims().iter().map(|d| d.to_string()).collect::<Vec<_>>().join("-");
            println!("probe {dims}");
            println!("train accuracy    {:.4} ({} samples)", out.train_accuracy, out.train_samples);
            println!("held-out accuracy {:.4} ({} samples)", out.heldout_accuracy, out.heldout_samples);
            println!("majority baseline {:.4}", out.majority_baseline);
        }
        Command::Retrieve { ckpt, query, embeddings, library, k } => {
            let (model, _) = load_checkpoint(&ckpt)?;
            let images = FeatureStore::read(&embeddings.unwrap_or_else(|| sibling(&library, IMAGE_STORE_FILE)))?;
            let lib = FeatureStore::read(&library)?;
            for hit in retrieve(&model, images.require(&query)?, &lib, k)? {
                println!("{}\t{:.6}", hit.segment_id, hit.p_true);
            }
        }
        Command::GradCheck { config, pairs, samples, seed, tolerance } => {
            let cfg = load_config(config.as_deref())?;
            let arch = cfg.arch.architecture()?;
            let mut target = AcpTarget::random(&arch, pairs, seed)?;
            let opts = GradCheckOptions { max_per_tensor: samples, seed, ..GradCheckOptions::default() };
            let report = grad_check(&mut target, &opts)?;
            println!("architecture {arch}");
            println!("checked {} coordinates, skipped {} at ReLU kinks", report.checked, report.skipped_kinks);
            let worst = report.worst.as_ref().map(|(t, i)| format!("{t}[{i}]")).unwrap_or_default();
            println!("max relative error {:.3e} at {worst}", report.max_rel_error);
            if report.max_rel_error >= tolerance {
                return Err(Error::Data(format!("gradient error {:.3e} exceeds {tolerance:e}", report.max_rel_error)));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = std::env::var("AFCORR_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidInput(_) | Error::Config(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
