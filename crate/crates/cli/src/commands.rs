//! One function per subcommand. Each resolves and validates everything it
//! needs before touching the output directory.

use crate::config::{ConfigError, RunConfig};
use anyhow::{Context, Result};
use latentreg_core::attention::{attention_map, overlay, write_overlays, AttentionMap};
use latentreg_core::dataio::{generate_annulus_dataset, save_dataset, Dataset};
use latentreg_core::generate::{empirical_dim_range, interpolate_row, scan_attribute, write_grid, TraversalGrid};
use latentreg_core::losses::AttributeMapping;
use latentreg_core::metrics::{interpretability_dims, MetricsReport};
use latentreg_core::model::Vae;
use latentreg_core::render::{scatter, RgbImage};
use latentreg_core::train::{
    encode_dataset, evaluate, hyperparameter_sweep, split, train_with, write_log_csv, write_validation_csv,
    Checkpoint,
};
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize)]
pub struct DatasetSummary {
    pub samples: usize,
    pub class_counts: [usize; 2],
    /// `[min, max]` per attribute.
    pub attribute_ranges: Vec<(String, [f64; 2])>,
}

pub fn summarize(dataset: &Dataset) -> DatasetSummary {
    let (c0, c1) = dataset.class_counts();
    let a = dataset.attribute_matrix();
    let attribute_ranges = dataset
        .attribute_names()
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let col = a.column(j);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (name.clone(), [lo, hi])
        })
        .collect();
    DatasetSummary {
        samples: dataset.len(),
        class_counts: [c0, c1],
        attribute_ranges,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn synth(config: &RunConfig) -> Result<()> {
    let dataset = generate_annulus_dataset(&config.data.synth)?;
    let dir = config.data_dir();
    if dir.exists() {
        // Stale volumes from a larger cohort would otherwise linger.
        fs::remove_dir_all(&dir).with_context(|| format!("clearing {}", dir.display()))?;
    }
    save_dataset(&dataset, &dir)?;
    let summary = summarize(&dataset);
    write_json(&config.output_dir.join("synth_summary.json"), &summary)?;
    println!("{} samples in {}", summary.samples, dir.display());
    println!("class 0: {}, class 1: {}", summary.class_counts[0], summary.class_counts[1]);
    for (name, [lo, hi]) in &summary.attribute_ranges {
        println!("{name}: [{lo:.4}, {hi:.4}]");
    }
    Ok(())
}

/// Train/test split of the configured dataset.
fn load_split(config: &RunConfig, data_dir: &Path) -> Result<(Dataset, Dataset)> {
    let dataset = config.load_data(data_dir)?;
    Ok(split(&dataset, config.train.split_fraction, config.train.seed)?)
}

pub fn train(config: &RunConfig) -> Result<()> {
    let (train_set, test_set) = load_split(config, &config.data_dir())?;
    let mapping = config.mapping_for(&train_set)?;
    let model = Vae::<f32>::new(config.model.clone(), config.train.seed)?;
    let out = &config.output_dir;
    fs::create_dir_all(out)?;
    write_json(&out.join("config.json"), config)?;
    let outcome = train_with(model, &train_set, Some(&test_set), &mapping, &config.train, &mut |row| {
        let l = &row.losses;
        eprintln!(
            "epoch {:>4}  recon {:.4}  kl {:.4}  mlp {:.4}  ar {:.4}  total {:.4}",
            row.epoch, l.recon, l.kl, l.mlp, l.ar, l.total
        );
    })?;
    outcome.last.save(&out.join("checkpoint"))?;
    if let Some(best) = &outcome.best {
        best.save(&out.join("best"))?;
    }
    write_log_csv(&outcome.log, &out.join("train_log.csv"))?;
    write_validation_csv(&outcome.log, &out.join("validation.csv"))?;
    println!("trained {} epochs; checkpoint in {}", outcome.log.len(), out.join("checkpoint").display());
    Ok(())
}

/// A checkpoint with the data it is applied to.
pub struct Loaded {
    pub checkpoint: Checkpoint,
    pub dataset: Dataset,
}

impl Loaded {
    pub fn model(&self) -> &Vae<f32> {
        &self.checkpoint.model
    }

    pub fn mapping(&self) -> &AttributeMapping {
        &self.checkpoint.manifest.mapping
    }

    /// The mapping when the model was trained with attribute regularization.
    pub fn active_mapping(&self) -> Option<&AttributeMapping> {
        self.model().config().toggles.use_ar.then(|| self.mapping())
    }

    pub fn sample(&self, id: &str) -> Result<&latentreg_core::dataio::Sample> {
        self.dataset
            .samples()
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| ConfigError::Invalid(format!("no sample with id `{id}`")).into())
    }

    /// Latent dimension for `attribute`: the mapped one, or the dimension of
    /// highest mutual information for models without regularization.
    pub fn dimension_of(&self, attribute: &str) -> Result<usize> {
        if let Some(m) = self.active_mapping() {
            return m
                .dim_of(attribute)
                .ok_or_else(|| ConfigError::Invalid(format!("attribute `{attribute}` is not mapped")).into());
        }
        let col = self.dataset.attribute_index(attribute).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let enc = encode_dataset(self.model(), &self.dataset, false)?;
        let dims = interpretability_dims(&enc.mu, &self.dataset.attribute_matrix(), self.dataset.attribute_names(), None)?;
        Ok(dims[col])
    }
}

/// Which part of the dataset a checkpoint command reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Part {
    /// The held-out split, reproduced from the training configuration.
    Test,
    Train,
    All,
}

pub fn load(config: &RunConfig, checkpoint: &Path, data: Option<&Path>, part: Part) -> Result<Loaded> {
    let checkpoint = Checkpoint::load(checkpoint).with_context(|| format!("loading checkpoint {}", checkpoint.display()))?;
    let data_dir = data.map(Path::to_path_buf).unwrap_or_else(|| config.data_dir());
    let run = RunConfig {
        model: checkpoint.manifest.model.clone(),
        ..config.clone()
    };
    let full = run.load_data(&data_dir)?;
    if full.attribute_names() != checkpoint.manifest.attribute_names.as_slice() {
        return Err(ConfigError::Invalid(format!(
            "dataset attributes {:?} differ from the checkpoint's {:?}",
            full.attribute_names(),
            checkpoint.manifest.attribute_names
        ))
        .into());
    }
    let dataset = match part {
        Part::All => full,
        Part::Train | Part::Test => {
            let t = &checkpoint.manifest.train;
            let (train, test) = split(&full, t.split_fraction, t.seed)?;
            if part == Part::Train { train } else { test }
        }
    };
    Ok(Loaded { checkpoint, dataset })
}

pub fn eval(loaded: &Loaded, out: &Path) -> Result<MetricsReport> {
    let report = evaluate(loaded.model(), &loaded.dataset, loaded.active_mapping())?;
    fs::create_dir_all(out)?;
    write_json(&out.join("metrics.json"), &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(report)
}

pub struct TraverseArgs<'a> {
    pub between: Option<(&'a str, &'a str)>,
    pub scan: &'a [String],
    pub sample: Option<&'a str>,
    pub steps: usize,
    pub coverage: f64,
    pub attend: bool,
    pub alpha: f64,
}

fn middle_slice(map: &AttentionMap, volume: &latentreg_core::dataio::Volume, alpha: f64) -> Result<RgbImage> {
    let slices = overlay(map, volume, alpha)?;
    Ok(slices[slices.len() / 2].clone())
}

pub fn traverse(loaded: &Loaded, args: &TraverseArgs<'_>, out: &Path) -> Result<Vec<PathBuf>> {
    if args.between.is_none() && args.scan.is_empty() {
        return Err(ConfigError::Invalid("traverse needs --between or --scan".into()).into());
    }
    if args.steps < 2 {
        return Err(ConfigError::Invalid("--steps must be at least 2".into()).into());
    }
    let model = loaded.model();
    let code = |id: &str| -> Result<Vec<f64>> {
        let s = loaded.sample(id)?;
        let (mu, _) = model.encode_volumes(&[&s.volume])?;
        Ok(mu.row(0).iter().map(|&v| v as f64).collect())
    };
    // Resolve everything before writing.
    let between = match args.between {
        Some((a, b)) => Some((a, b, code(a)?, code(b)?)),
        None => None,
    };
    let dims: Vec<(String, usize)> = args
        .scan
        .iter()
        .map(|a| Ok((a.clone(), loaded.dimension_of(a)?)))
        .collect::<Result<_>>()?;
    let base_id = match args.sample {
        Some(id) => id.to_string(),
        None => loaded
            .dataset
            .samples()
            .first()
            .map(|s| s.id.clone())
            .context("empty dataset")?,
    };
    let base = if dims.is_empty() { None } else { Some(code(&base_id)?) };

    let dir = out.join("traverse");
    fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    if let Some((a, b, za, zb)) = between {
        let row = interpolate_row(model, &za, &zb, args.steps, &format!("{a}->{b}"))?;
        let stem = format!("interp_{a}_{b}");
        write_grid(&TraversalGrid { rows: vec![row] }, &[], &dir, &stem)?;
        written.push(dir.join(format!("{stem}.png")));
    }
    if let Some(z) = base {
        let mut grid = TraversalGrid::default();
        let mut overlays = Vec::new();
        for (attr, dim) in &dims {
            let range = empirical_dim_range(model, &loaded.dataset, *dim, args.coverage)?;
            // A dimension-only mapping lets unregularized models be scanned too.
            let single = AttributeMapping::new(vec![(attr.clone(), *dim)])?;
            let row = scan_attribute(model, &z, attr, &single, range, args.steps)?;
            if args.attend {
                let tiles = row
                    .volumes
                    .iter()
                    .map(|v| middle_slice(&attention_map(model, v, *dim, None)?, v, args.alpha))
                    .collect::<Result<Vec<_>>>()?;
                overlays.push(tiles);
            }
            grid.rows.push(row);
        }
        let stem = format!("scan_{base_id}");
        write_grid(&grid, &overlays, &dir, &stem)?;
        written.push(dir.join(format!("{stem}.png")));
    }
    for p in &written {
        println!("{}", p.display());
    }
    Ok(written)
}

pub fn attend(loaded: &Loaded, ids: &[String], attributes: &[String], alpha: f64, out: &Path) -> Result<Vec<PathBuf>> {
    let attributes: Vec<String> = if attributes.is_empty() {
        loaded.mapping().entries().iter().map(|(a, _)| a.clone()).collect()
    } else {
        attributes.to_vec()
    };
    let mut jobs = Vec::new();
    for id in ids {
        let sample = loaded.sample(id)?;
        for attr in &attributes {
            jobs.push((sample, attr, loaded.dimension_of(attr)?));
        }
    }
    let dir = out.join("attention");
    let mut written = Vec::new();
    for (sample, attr, dim) in jobs {
        let mut map = attention_map(loaded.model(), &sample.volume, dim, None)?;
        map.attribute_name = attr.clone();
        written.extend(write_overlays(&map, &sample.volume, alpha, &sample.id, &dir)?);
    }
    println!("{} overlay images in {}", written.len(), dir.display());
    Ok(written)
}

pub fn project(loaded: &Loaded, attr_x: &str, attr_y: &str, out: &Path) -> Result<PathBuf> {
    let (dx, dy) = (loaded.dimension_of(attr_x)?, loaded.dimension_of(attr_y)?);
    let enc = encode_dataset(loaded.model(), &loaded.dataset, false)?;
    let mut csv = format!("id,z{dx}_{attr_x},z{dy}_{attr_y},label\n");
    let mut points = Vec::with_capacity(loaded.dataset.len());
    for (i, s) in loaded.dataset.samples().iter().enumerate() {
        let (x, y) = (enc.mu[[i, dx]], enc.mu[[i, dy]]);
        writeln!(csv, "{},{x},{y},{}", s.id, s.label)?;
        points.push((x, y, s.label));
    }
    fs::create_dir_all(out)?;
    let stem = format!("projection_{attr_x}_{attr_y}");
    let path = out.join(format!("{stem}.csv"));
    fs::write(&path, csv)?;
    scatter(&points, 400).write_png(&out.join(format!("{stem}.png")))?;
    println!("{}", path.display());
    Ok(path)
}

pub fn sweep(config: &RunConfig) -> Result<PathBuf> {
    let (train_set, test_set) = load_split(config, &config.data_dir())?;
    let mapping = config.mapping_for(&train_set)?;
    let grid = config.sweep.grid();
    let out = &config.output_dir;
    fs::create_dir_all(out)?;
    let mut csv = String::from("beta,gamma,delta,interpretability,image_mi\n");
    let rows = hyperparameter_sweep(&config.model, &config.train, &grid, &train_set, &test_set, &mapping, &mut |r| {
        eprintln!(
            "beta {} gamma {} delta {}: interpretability {:.4}, image_mi {:.4}",
            r.beta, r.gamma, r.delta, r.interpretability, r.image_mi
        );
    })?;
    for r in &rows {
        writeln!(csv, "{},{},{},{},{}", r.beta, r.gamma, r.delta, r.interpretability, r.image_mi)?;
    }
    let path = out.join("sweep.csv");
    fs::write(&path, csv)?;
    let points: Vec<_> = rows.iter().map(|r| (r.interpretability, r.image_mi, 0)).collect();
    scatter(&points, 400).write_png(&out.join("sweep.png"))?;
    println!("{}", path.display());
    Ok(path)
}
