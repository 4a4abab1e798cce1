//! Training-set filtering and K-SVD dictionary learning.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::recovery::{omp, SparseCode};
use crate::tactile::TactileFrame;

/// Tolerance on atom norms.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryMeta {
    pub corpus_id: String,
    pub corpus_size: usize,
    pub train_sparsity: usize,
    /// Sweeps actually run.
    pub iterations: usize,
    pub seed: u64,
    /// Total squared representation error after each sweep.
    pub errors: Vec<f64>,
}

/// Unit-norm atoms stored as the columns of an N x K matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: DMatrix<f64>,
    meta: DictionaryMeta,
}

impl Dictionary {
    /// Validates unit-norm, finite atoms.
    pub fn new(atoms: DMatrix<f64>, meta: DictionaryMeta) -> Result<Self> {
        if atoms.ncols() == 0 || atoms.nrows() == 0 {
            return Err(domain("dictionary needs at least one atom"));
        }
        for (j, col) in atoms.column_iter().enumerate() {
            if col.iter().any(|v| !v.is_finite()) {
                return Err(domain(format!("atom {j} has non-finite entries")));
            }
            if (col.norm() - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(domain(format!("atom {j} has norm {}", col.norm())));
            }
        }
        Ok(Self { atoms, meta })
    }

    /// Normalizes each column; fails on a zero column.
    pub fn from_columns(mut atoms: DMatrix<f64>, meta: DictionaryMeta) -> Result<Self> {
        for (j, mut col) in atoms.column_iter_mut().enumerate() {
            let n = col.norm();
            if !(n > 0.0) {
                return Err(domain(format!("atom {j} is zero")));
            }
            col /= n;
        }
        Self::new(atoms, meta)
    }

    pub fn n(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn k(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn atom(&self, j: usize) -> DVector<f64> {
        self.atoms.column(j).into_owned()
    }

    pub fn meta(&self) -> &DictionaryMeta {
        &self.meta
    }

    pub fn train_sparsity(&self) -> usize {
        self.meta.train_sparsity
    }
}

/// Frames used to learn a dictionary, optionally labeled by source.
#[derive(Debug, Clone, Default)]
pub struct TrainingCorpus {
    frames: Vec<TactileFrame>,
    labels: Vec<Option<String>>,
}

impl TrainingCorpus {
    pub fn new(frames: Vec<TactileFrame>) -> Result<Self> {
        let labels = vec![None; frames.len()];
        Self::with_labels(frames, labels)
    }

    pub fn with_labels(frames: Vec<TactileFrame>, labels: Vec<Option<String>>) -> Result<Self> {
        if frames.len() != labels.len() {
            return Err(domain("label count differs from frame count"));
        }
        if let Some(first) = frames.first() {
            let n = first.conductance().len();
            if frames.iter().any(|f| f.conductance().len() != n) {
                return Err(domain("corpus frames differ in pixel count"));
            }
        }
        Ok(Self { frames, labels })
    }

    pub fn push(&mut self, frame: TactileFrame, label: Option<String>) -> Result<()> {
        if let Some(first) = self.frames.first() {
            if first.conductance().len() != frame.conductance().len() {
                return Err(domain("corpus frames differ in pixel count"));
            }
        }
        self.frames.push(frame);
        self.labels.push(label);
        Ok(())
    }

    pub fn frames(&self) -> &[TactileFrame] {
        &self.frames
    }

    pub fn labels(&self) -> &[Option<String>] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Pixel count, or `None` for an empty corpus.
    pub fn n(&self) -> Option<usize> {
        self.frames.first().map(|f| f.conductance().len())
    }

    fn matrix(&self) -> DMatrix<f64> {
        let n = self.n().unwrap_or(0);
        DMatrix::from_fn(n, self.len(), |i, l| self.frames[l].conductance()[i])
    }
}

/// Absolute cosine similarity; two zero vectors count as identical.
fn coherence(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    match (na > 0.0, nb > 0.0) {
        (false, false) => 1.0,
        (true, true) => (a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)).abs(),
        _ => 0.0,
    }
}

/// Drops low-amplitude frames, then greedily drops frames too coherent with
/// an already kept one.
pub fn preprocess(
    corpus: &TrainingCorpus,
    amp_threshold: f64,
    coherence_threshold: f64,
) -> Result<TrainingCorpus> {
    if !(0.0..=1.0).contains(&amp_threshold) || !(0.0..=1.0).contains(&coherence_threshold) {
        return Err(domain("thresholds must lie in [0, 1]"));
    }
    let frame_max = |f: &TactileFrame| f.conductance().iter().copied().fold(0.0, f64::max);
    let corpus_max = corpus.frames.iter().map(frame_max).fold(0.0, f64::max);
    let floor = amp_threshold * corpus_max;

    let mut kept = TrainingCorpus::default();
    for (frame, label) in corpus.frames.iter().zip(&corpus.labels) {
        let peak = frame_max(frame);
        if peak < floor || (amp_threshold > 0.0 && peak <= 0.0) {
            continue;
        }
        let redundant = kept
            .frames
            .iter()
            .any(|k| coherence(k.conductance(), frame.conductance()) > coherence_threshold);
        if !redundant {
            kept.push(frame.clone(), label.clone())?;
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(kept)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KsvdParams {
    pub atoms: usize,
    pub sparsity: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Stop once a sweep improves the error by less than this fraction.
    pub min_improvement: f64,
}

impl Default for KsvdParams {
    fn default() -> Self {
        Self {
            atoms: 100,
            sparsity: 30,
            iterations: 30,
            seed: 0,
            min_improvement: 1e-4,
        }
    }
}

/// Result of [`ksvd`] plus per-sweep diagnostics.
#[derive(Debug, Clone)]
pub struct KsvdOutcome {
    pub dictionary: Dictionary,
    /// `(error before atom updates, error after)` for each sweep.
    pub sweeps: Vec<(f64, f64)>,
    pub replaced_atoms: usize,
}

fn normalized(v: DVector<f64>) -> Option<DVector<f64>> {
    let n = v.norm();
    (n > 0.0 && n.is_finite()).then(|| v / n)
}

fn initial_atoms(x: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = x.nrows();
    let mut order: Vec<usize> = (0..x.ncols()).collect();
    order.shuffle(rng);
    let mut atoms: Vec<DVector<f64>> = Vec::with_capacity(k);
    for l in order {
        if atoms.len() == k {
            break;
        }
        if let Some(a) = normalized(x.column(l).into_owned()) {
            if !atoms.contains(&a) {
                atoms.push(a);
            }
        }
    }
    while atoms.len() < k {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        if let Some(a) = normalized(v) {
            atoms.push(a);
        }
    }
    DMatrix::from_columns(&atoms)
}

/// Dominant left singular vector of `e` by power iteration on `e e^T`,
/// started from `start`. The Rayleigh quotient never decreases, so the
/// returned rank-one fit is at least as good as the one through `start`.
pub(crate) fn dominant_left_singular(e: &DMatrix<f64>, start: &DVector<f64>) -> DVector<f64> {
    let mut u = match normalized(start.clone()) {
        Some(u) => u,
        None => DVector::from_element(e.nrows(), 1.0 / (e.nrows() as f64).sqrt()),
    };
    let mut prev = 0.0;
    for _ in 0..1000 {
        let v = e.tr_mul(&u);
        let energy = v.norm_squared();
        let w = e * v;
        match normalized(w) {
            Some(next) => u = next,
            None => break,
        }
        if (energy - prev).abs() <= 1e-15 * energy {
            break;
        }
        prev = energy;
    }
    u
}

fn total_error(residuals: &DMatrix<f64>) -> f64 {
    residuals.norm_squared()
}

/// K-SVD: alternate OMP sparse coding of every training frame with rank-one
/// updates of each atom over the frames that use it.
pub fn ksvd(corpus: &TrainingCorpus, params: &KsvdParams) -> Result<KsvdOutcome> {
    if params.atoms == 0 || params.sparsity == 0 {
        return Err(domain("atom count and sparsity must be positive"));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let x = corpus.matrix();
    let (n, l) = x.shape();
    let k = params.atoms;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut d = initial_atoms(&x, k, &mut rng);

    let mut sweeps = Vec::new();
    let mut errors = Vec::new();
    let mut replaced_atoms = 0;
    let mut last_error: Option<f64> = None;
    // roundoff allowance once the corpus is represented almost exactly
    let slack = x.norm_squared() * 1e-24;

    for _ in 0..params.iterations {
        let codes: Vec<SparseCode> = (0..l)
            .into_par_iter()
            .map(|j| omp(&d, &x.column(j).into_owned(), params.sparsity))
            .collect::<Result<_>>()?;

        // coefficient rows: for each atom, (signal, coefficient) pairs
        let mut usage: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
        let mut residuals = x.clone();
        for (j, code) in codes.iter().enumerate() {
            for (&i, &c) in code.indices.iter().zip(&code.coefficients) {
                usage[i].push((j, c));
                let mut col = residuals.column_mut(j);
                col.axpy(-c, &d.column(i), 1.0);
            }
        }
        let before = total_error(&residuals);
        let mut used_for_replacement = vec![false; l];

        for atom in 0..k {
            if usage[atom].is_empty() {
                let worst = (0..l)
                    .filter(|&j| !used_for_replacement[j])
                    .map(|j| (j, residuals.column(j).norm_squared()))
                    .filter(|&(_, e)| e > 0.0)
                    .fold(None, |best: Option<(usize, f64)>, cur| match best {
                        Some(b) if b.1 >= cur.1 => Some(b),
                        _ => Some(cur),
                    });
                if let Some((j, _)) = worst {
                    if let Some(a) = normalized(x.column(j).into_owned()) {
                        if !d.column_iter().any(|c| c == a) {
                            used_for_replacement[j] = true;
                            d.set_column(atom, &a);
                            replaced_atoms += 1;
                        }
                    }
                }
                continue;
            }
            let cols: Vec<usize> = usage[atom].iter().map(|&(j, _)| j).collect();
            let current = d.column(atom).into_owned();
            let mut e = DMatrix::zeros(n, cols.len());
            for (p, &(j, c)) in usage[atom].iter().enumerate() {
                let mut col = e.column_mut(p);
                col.copy_from(&residuals.column(j));
                col.axpy(c, &current, 1.0);
            }
            let mut u = dominant_left_singular(&e, &current);
            if u.sum() < 0.0 {
                u = -u;
            }
            let coeffs = e.tr_mul(&u);
            for (p, &j) in cols.iter().enumerate() {
                let mut col = residuals.column_mut(j);
                col.copy_from(&e.column(p));
                col.axpy(-coeffs[p], &u, 1.0);
                usage[atom][p].1 = coeffs[p];
            }
            d.set_column(atom, &u);
        }

        let after = total_error(&residuals);
        if after > before * (1.0 + 1e-9) + slack {
            return Err(Error::Numerical(format!(
                "atom update increased representation error from {before} to {after}"
            )));
        }
        sweeps.push((before, after));
        errors.push(after);

        let reference = last_error.unwrap_or(before);
        last_error = Some(after);
        if after == 0.0 || (reference > 0.0 && (reference - after) / reference < params.min_improvement) {
            break;
        }
    }

    let meta = DictionaryMeta {
        corpus_id: String::new(),
        corpus_size: l,
        train_sparsity: params.sparsity,
        iterations: sweeps.len(),
        seed: params.seed,
        errors,
    };
    let dictionary = Dictionary::from_columns(d, meta)?;
    Ok(KsvdOutcome {
        dictionary,
        sweeps,
        replaced_atoms,
    })
}

/// OMP code of `x` over the atoms of `psi`.
pub fn sparse_code(psi: &Dictionary, x: &DVector<f64>, s: usize) -> Result<SparseCode> {
    omp(psi.atoms(), x, s)
}
