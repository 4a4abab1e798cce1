use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{ExperimentConfig, Outputs};
use crate::dictionary::{ksvd, preprocess, Dictionary, KsvdOutcome, TrainingCorpus};
use crate::error::Result;
use crate::io::{write_atoms_csv, write_dictionary};
use crate::scenarios::synthetic_corpus;

/// A trained dictionary and the corpus bookkeeping behind it.
#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub dictionary: Dictionary,
    pub raw_frames: usize,
    pub kept_frames: usize,
    pub outcome: KsvdOutcome,
}

#[derive(Serialize)]
struct LogRow {
    sweep: usize,
    error_before: f64,
    error_after: f64,
}

fn corpus_digest(corpus: &TrainingCorpus) -> String {
    let mut h = Sha256::new();
    for f in corpus.frames() {
        for v in f.conductance() {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(&h.finalize()[..8])
}

/// Builds the synthetic corpus, filters it, and runs K-SVD.
pub fn train_dictionary(cfg: &ExperimentConfig) -> Result<TrainingRun> {
    let d = &cfg.dictionary;
    let raw = synthetic_corpus(
        &cfg.geometry,
        &cfg.circuit,
        &cfg.shape_specs(),
        d.max_shift,
        &d.load_levels,
        &cfg.bounce.ball,
        d.blob_spacing,
    )?;
    let corpus = preprocess(&raw, d.amp_threshold, d.coherence_threshold)?;
    let outcome = ksvd(&corpus, &cfg.ksvd_params())?;
    let mut meta = outcome.dictionary.meta().clone();
    meta.corpus_id = format!("synthetic-{}", corpus_digest(&corpus));
    let dictionary = Dictionary::new(outcome.dictionary.atoms().clone(), meta)?;
    Ok(TrainingRun {
        dictionary,
        raw_frames: raw.len(),
        kept_frames: corpus.len(),
        outcome,
    })
}

pub(super) fn run(cfg: &ExperimentConfig) -> Result<Outputs> {
    let run = train_dictionary(cfg)?;
    let mut out = Outputs::default();

    let mut dict = Vec::new();
    write_dictionary(&mut dict, &run.dictionary)?;
    // absolute paths name a pre-trained dictionary elsewhere; keep the
    // fresh one inside the output directory
    let path = &cfg.dictionary.path;
    let name = if path.is_relative() {
        path.to_string_lossy().into_owned()
    } else {
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dictionary.spts".into())
    };
    out.add(name, dict);

    let log: Vec<LogRow> = run
        .outcome
        .sweeps
        .iter()
        .enumerate()
        .map(|(i, &(b, a))| LogRow {
            sweep: i + 1,
            error_before: b,
            error_after: a,
        })
        .collect();
    out.add_csv("train_log.csv", &log)?;

    let mut atoms = Vec::new();
    write_atoms_csv(&mut atoms, &run.dictionary, &cfg.geometry)?;
    out.add("atoms.csv", atoms);

    #[derive(Serialize)]
    struct Summary<'a> {
        corpus_id: &'a str,
        raw_frames: usize,
        kept_frames: usize,
        atoms: usize,
        sparsity: usize,
        sweeps: usize,
        replaced_atoms: usize,
        final_error: Option<f64>,
    }
    out.add_json(
        "train_summary.json",
        &Summary {
            corpus_id: &run.dictionary.meta().corpus_id,
            raw_frames: run.raw_frames,
            kept_frames: run.kept_frames,
            atoms: run.dictionary.k(),
            sparsity: run.dictionary.train_sparsity(),
            sweeps: run.outcome.sweeps.len(),
            replaced_atoms: run.outcome.replaced_atoms,
            final_error: run.outcome.sweeps.last().map(|s| s.1),
        },
    )?;
    Ok(out)
}
