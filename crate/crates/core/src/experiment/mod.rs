//! Seeded, reproducible studies driven by an [`ExperimentConfig`].
//!
//! Each study is a pure function of the config. Trials run on the current
//! rayon pool and are collected in a fixed order, so the written files are
//! byte-identical across runs and thread counts.

mod adapt;
mod bounce;
pub mod config;
mod press;
mod train;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use adapt::{adapt_study, AdaptRow, AdaptStudy};
pub use bounce::{
    bounce_study, frames_in_contact, localize_study, BounceFrameRow, BounceStudy, BounceSummaryRow,
    LocalizeRow, LocalizeStudy, LocalizeSummaryRow,
};
pub use config::ExperimentConfig;
pub use press::{
    classify_study, spearman, support_study, ClassifyRow, ClassifyStudy, ClassifySummaryRow,
    SupportRow, SupportStudy, SupportSummaryRow,
};
pub use train::{train_dictionary, TrainingRun};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::firmware::SensingMatrix;
use crate::tactile::TactileFrame;

/// The CLI subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    DictTrain,
    ClassifySweep,
    SupportSweep,
    Bounce,
    Localize,
    Adapt,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::DictTrain,
        Command::ClassifySweep,
        Command::SupportSweep,
        Command::Bounce,
        Command::Localize,
        Command::Adapt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::DictTrain => "dict-train",
            Command::ClassifySweep => "classify-sweep",
            Command::SupportSweep => "support-sweep",
            Command::Bounce => "bounce",
            Command::Localize => "localize",
            Command::Adapt => "adapt",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Independent RNG stream for one trial, keyed by the master seed and a path
/// of indices. The same key always yields the same stream.
pub fn trial_rng(master_seed: u32, key: &[u64]) -> ChaCha8Rng {
    // splitmix64 finalizer folded over the key
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    let mut h = mix(u64::from(master_seed));
    for &k in key {
        h = mix(h ^ k);
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// RMS of the noiseless measurements of `frames` through `phi`.
pub fn typical_measurement(phi: &SensingMatrix, frames: &[TactileFrame], feedback: f64) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for f in frames {
        let x = nalgebra::DVector::from_column_slice(f.conductance()) * -feedback;
        let y = phi.weights() * x;
        sum += y.norm_squared();
        count += y.len();
    }
    if count == 0 {
        0.0
    } else {
        (sum / count as f64).sqrt()
    }
}

/// First stream row sampled at or after time `t`.
pub(crate) fn row_at(t: f64, clock_hz: f64) -> usize {
    let r = t * clock_hz;
    // absorb rounding in products like 0.005 * 70000
    let nearest = r.round();
    if (r - nearest).abs() < 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        r.ceil() as usize
    }
}

pub(crate) fn load_dictionary(cfg: &ExperimentConfig) -> Result<Dictionary> {
    let path = cfg.dictionary_path();
    let mut file = fs::File::open(&path).map_err(|e| {
        Error::Config(format!(
            "cannot open dictionary {} ({e}); run dict-train first",
            path.display()
        ))
    })?;
    let d = crate::io::read_dictionary(&mut file)?;
    if d.n() != cfg.geometry.len() {
        return Err(Error::Config(format!(
            "dictionary atoms have {} entries, grid has {} pixels",
            d.n(),
            cfg.geometry.len()
        )));
    }
    Ok(d)
}

/// Bytes of each output file, in write order.
#[derive(Debug, Clone, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn add_csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        self.add(name, bytes);
        Ok(())
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    pub fn files(&self) -> &[(String, Vec<u8>)] {
        &self.files
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }
}

#[derive(Debug, Clone, Serialize)]
struct ManifestEntry {
    file: String,
    sha256: String,
}

#[derive(Debug, Clone, Serialize)]
struct Manifest {
    command: String,
    version: String,
    master_seed: u32,
    config_sha256: String,
    outputs: Vec<ManifestEntry>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the effective config, independent of where outputs go.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let mut c = cfg.clone();
    c.out_dir = PathBuf::new();
    Ok(sha256_hex(c.to_toml_string()?.as_bytes()))
}

/// Runs one command and returns its files, manifest last.
pub fn run(command: Command, cfg: &ExperimentConfig) -> Result<Outputs> {
    cfg.validate()?;
    let mut out = match command {
        Command::DictTrain => train::run(cfg)?,
        Command::ClassifySweep => press::run_classify(cfg)?,
        Command::SupportSweep => press::run_support(cfg)?,
        Command::Bounce => bounce::run_bounce(cfg)?,
        Command::Localize => bounce::run_localize(cfg)?,
        Command::Adapt => adapt::run(cfg)?,
    };
    let manifest = Manifest {
        command: command.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        master_seed: cfg.master_seed,
        config_sha256: config_hash(cfg)?,
        outputs: out
            .files
            .iter()
            .map(|(n, b)| ManifestEntry {
                file: n.clone(),
                sha256: sha256_hex(b),
            })
            .collect(),
    };
    out.add_json(&format!("{}.manifest.json", command.name()), &manifest)?;
    Ok(out)
}

/// Writes `outputs` under `dir`, creating it if needed.
pub fn write_outputs(outputs: &Outputs, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    outputs
        .files
        .iter()
        .map(|(name, bytes)| {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, bytes)?;
            Ok(path)
        })
        .collect()
}

/// Runs a command on a pool of `jobs` threads (all cores when `None`) and
/// writes the results to the config's output directory.
pub fn run_and_write(command: Command, cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<Vec<PathBuf>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::Config("--jobs must be positive".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    let outputs = pool.install(|| run(command, cfg))?;
    write_outputs(&outputs, &cfg.out_dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn trial_streams_are_keyed() {
        let a: u64 = trial_rng(1, &[2, 3]).random();
        assert_eq!(a, trial_rng(1, &[2, 3]).random::<u64>());
        assert_ne!(a, trial_rng(1, &[3, 2]).random::<u64>());
        assert_ne!(a, trial_rng(2, &[2, 3]).random::<u64>());
    }

    #[test]
    fn row_lookup() {
        assert_eq!(row_at(0.005, 70_000.0), 350);
        assert_eq!(row_at(0.0, 70_000.0), 0);
        assert_eq!(row_at(1.5 / 70_000.0, 70_000.0), 2);
    }
}
