//! Indentation studies: object classification and support recovery.

use rayon::prelude::*;
use serde::Serialize;

use super::{load_dictionary, row_at, trial_rng, typical_measurement, ExperimentConfig, Outputs};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::firmware::SensingMatrix;
use crate::frontend::{acquire, frame_rate, AcquisitionConfig};
use crate::perception::{center_of_mass, classify, localization_error, support_accuracy, vote, ObjectLibrary};
use crate::recovery::{reconstruct, Reconstruction};
use crate::scenarios::{press_event, raster_baseline, shape_library, ShapeSpec, Transduced};
use crate::tactile::{transduce, TactileFrame};

const JITTER_STREAM: u64 = 1;
const CLASSIFY_STREAM: u64 = 2;
const SUPPORT_STREAM: u64 = 3;

struct Bench<'a> {
    cfg: &'a ExperimentConfig,
    specs: Vec<ShapeSpec>,
    library: ObjectLibrary,
    psi: Dictionary,
    phi: SensingMatrix,
    acq: AcquisitionConfig,
    typical: f64,
}

impl<'a> Bench<'a> {
    fn new(cfg: &'a ExperimentConfig, psi: Dictionary, max_m: usize, frames: usize) -> Result<Self> {
        let specs = cfg.shape_specs();
        let library = shape_library(&cfg.geometry, &specs, &cfg.circuit)?;
        let n = cfg.geometry.len();
        let rows = row_at(cfg.press.rise, cfg.acquisition.clock_hz) + max_m * frames;
        let phi = SensingMatrix::from_master_seed(cfg.master_seed, rows.max(n), n, cfg.circuit.supply)?;
        let exemplars: Vec<TactileFrame> = library.exemplars().map(|(_, f)| f.clone()).collect();
        let typical = typical_measurement(&phi.prefix(n)?, &exemplars, cfg.circuit.feedback_resistance);
        let acq = cfg.acquisition.frontend(cfg.acquisition.noise_for(typical));
        Ok(Self {
            cfg,
            specs,
            library,
            psi,
            phi,
            acq,
            typical,
        })
    }

    /// The shape pressed in trial `t` of object `o`; shared by every study
    /// and every M so sweeps compare like with like.
    fn trial_shape(&self, o: usize, t: usize) -> ShapeSpec {
        let p = &self.cfg.press;
        let mut rng = trial_rng(self.cfg.master_seed, &[JITTER_STREAM, o as u64, t as u64]);
        self.specs[o].jittered(&mut rng, p.center_jitter, p.peak_jitter, &self.cfg.geometry)
    }

    /// Ground truth at full load and `count` consecutive reconstructions of
    /// `m` samples each, starting when the load reaches its hold level.
    fn hold_frames(
        &self,
        shape: &ShapeSpec,
        m: usize,
        count: usize,
        key: &[u64],
    ) -> Result<(TactileFrame, Vec<Reconstruction>)> {
        let cfg = self.cfg;
        let truth = transduce(&shape.render(&cfg.geometry)?, &cfg.circuit)?;
        let p = &cfg.press;
        let event = press_event(shape, &cfg.geometry, p.rise, p.hold, p.release)?;
        let r0 = row_at(event.hold_start(), self.acq.clock_hz);
        let scene = Transduced {
            source: event,
            circuit: cfg.circuit,
        };
        let mut rng = trial_rng(cfg.master_seed, key);
        let mut recons = Vec::with_capacity(count);
        for j in 0..count {
            let start = r0 + j * m;
            let phi = self.phi.slice_rows(start..start + m)?;
            let y = acquire(&scene, &phi, &cfg.circuit, &self.acq, &mut rng)?;
            recons.push(reconstruct(&phi, &self.psi, &y, &cfg.geometry, &cfg.circuit)?);
        }
        Ok((truth, recons))
    }

    fn com_error(&self, estimate: &TactileFrame, truth: &TactileFrame) -> Result<Option<f64>> {
        let rest = self.cfg.circuit.rest_conductance();
        let t = center_of_mass(truth, rest)?;
        match center_of_mass(estimate, rest) {
            Ok(e) => Ok(Some(localization_error(e, t))),
            Err(Error::NoContact) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Domain("spearman needs two equal series of length >= 2".into()));
    }
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, my) = (mean(rx.iter().copied()), mean(ry.iter().copied()));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (vx * vy).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifyRow {
    pub label: String,
    pub trial: usize,
    pub m: usize,
    pub fps: f64,
    pub frame_time_s: f64,
    pub predicted: String,
    pub correct: bool,
    /// Fraction of the vote window's frames labeled correctly on their own.
    pub frame_accuracy: f64,
    /// Acquisition time from hold onset until the running vote first names
    /// the right object.
    pub first_correct_s: Option<f64>,
    pub raster_predicted: String,
    pub raster_correct: bool,
    pub support_accuracy: f64,
    pub support_iou: f64,
    pub com_error: Option<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifySummaryRow {
    pub m: usize,
    pub fps: f64,
    pub accuracy: f64,
    pub frame_accuracy: f64,
    pub raster_accuracy: f64,
    pub mean_first_correct_s: Option<f64>,
    pub support_accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyStudy {
    pub noise_sigma: f64,
    pub typical_measurement: f64,
    pub summary: Vec<ClassifySummaryRow>,
    #[serde(skip)]
    pub rows: Vec<ClassifyRow>,
}

impl ClassifyStudy {
    pub fn accuracy_at(&self, m: usize) -> Option<f64> {
        self.summary.iter().find(|r| r.m == m).map(|r| r.accuracy)
    }
}

/// Press every object `trials` times per sweep value, reconstruct a window
/// of hold-phase frames, label each frame and vote.
pub fn classify_study(cfg: &ExperimentConfig, psi: Dictionary) -> Result<ClassifyStudy> {
    let c = &cfg.classify;
    let max_m = *c.m_sweep.iter().max().expect("validated sweep");
    let bench = Bench::new(cfg, psi, max_m, c.vote_window)?;
    let n = cfg.geometry.len();

    let jobs: Vec<(usize, usize, usize)> = c
        .m_sweep
        .iter()
        .enumerate()
        .flat_map(|(mi, _)| (0..bench.specs.len()).flat_map(move |o| (0..c.trials).map(move |t| (mi, o, t))))
        .collect();

    let rows: Vec<ClassifyRow> = jobs
        .par_iter()
        .map(|&(mi, o, t)| -> Result<ClassifyRow> {
            let m = c.m_sweep[mi];
            let shape = bench.trial_shape(o, t);
            let label = shape.label();
            let key = [CLASSIFY_STREAM, m as u64, o as u64, t as u64];
            let (truth, recons) = bench.hold_frames(&shape, m, c.vote_window, &key)?;

            let labels: Vec<&str> = recons
                .iter()
                .map(|r| classify(&r.frame, &bench.library))
                .collect::<Result<_>>()?;
            let predicted = vote(&labels)?.to_string();
            let frame_accuracy = labels.iter().filter(|&&l| l == label).count() as f64 / labels.len() as f64;
            let mut first_correct = None;
            for j in 0..labels.len() {
                if vote(&labels[..=j])? == label {
                    first_correct = Some((j + 1) as f64 * m as f64 / bench.acq.clock_hz);
                    break;
                }
            }

            let (raster, _) = raster_baseline(&truth, m.min(n), &bench.acq)?;
            let raster_predicted = classify(&raster, &bench.library)?.to_string();
            let metrics = support_accuracy(&recons[0].frame, &truth, cfg.support.threshold)?;
            Ok(ClassifyRow {
                correct: predicted == label,
                raster_correct: raster_predicted == label,
                label,
                trial: t,
                m,
                fps: frame_rate(m, &bench.acq)?,
                frame_time_s: m as f64 / bench.acq.clock_hz,
                predicted,
                frame_accuracy,
                first_correct_s: first_correct,
                raster_predicted,
                support_accuracy: metrics.accuracy,
                support_iou: metrics.iou,
                com_error: bench.com_error(&recons[0].frame, &truth)?,
                residual: recons[0].residual_norm,
            })
        })
        .collect::<Result<_>>()?;

    let summary = c
        .m_sweep
        .iter()
        .map(|&m| -> Result<ClassifySummaryRow> {
            let at: Vec<&ClassifyRow> = rows.iter().filter(|r| r.m == m).collect();
            let firsts: Vec<f64> = at.iter().filter_map(|r| r.first_correct_s).collect();
            Ok(ClassifySummaryRow {
                m,
                fps: frame_rate(m, &bench.acq)?,
                accuracy: mean(at.iter().map(|r| f64::from(u8::from(r.correct)))),
                frame_accuracy: mean(at.iter().map(|r| r.frame_accuracy)),
                raster_accuracy: mean(at.iter().map(|r| f64::from(u8::from(r.raster_correct)))),
                mean_first_correct_s: (!firsts.is_empty()).then(|| mean(firsts.iter().copied())),
                support_accuracy: mean(at.iter().map(|r| r.support_accuracy)),
            })
        })
        .collect::<Result<_>>()?;

    Ok(ClassifyStudy {
        noise_sigma: bench.acq.noise_sigma,
        typical_measurement: bench.typical,
        summary,
        rows,
    })
}

pub(super) fn run_classify(cfg: &ExperimentConfig) -> Result<Outputs> {
    let study = classify_study(cfg, load_dictionary(cfg)?)?;
    let mut out = Outputs::default();
    out.add_csv("classify.csv", &study.rows)?;
    out.add_csv("classify_summary.csv", &study.summary)?;
    out.add_json("classify_summary.json", &study)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportRow {
    pub label: String,
    pub trial: usize,
    pub m: usize,
    pub contact_fraction: f64,
    pub small: bool,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub iou: f64,
    pub com_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportSummaryRow {
    pub m: usize,
    pub accuracy: f64,
    pub small_accuracy: f64,
    pub large_accuracy: f64,
    pub recall: f64,
    pub iou: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SupportStudy {
    pub noise_sigma: f64,
    pub typical_measurement: f64,
    /// Rank correlation between M and mean accuracy.
    pub spearman: f64,
    /// Smallest M at which each group's mean accuracy reaches the target.
    pub small_reaches_target_at: Option<usize>,
    pub large_reaches_target_at: Option<usize>,
    pub summary: Vec<SupportSummaryRow>,
    #[serde(skip)]
    pub rows: Vec<SupportRow>,
}

/// Support recovery of the first hold-phase frame across the sweep, split by
/// contact area.
pub fn support_study(cfg: &ExperimentConfig, psi: Dictionary) -> Result<SupportStudy> {
    let s = &cfg.support;
    let max_m = *s.m_sweep.iter().max().expect("validated sweep");
    let bench = Bench::new(cfg, psi, max_m, 1)?;
    let n = cfg.geometry.len() as f64;

    let jobs: Vec<(usize, usize, usize)> = s
        .m_sweep
        .iter()
        .enumerate()
        .flat_map(|(mi, _)| (0..bench.specs.len()).flat_map(move |o| (0..s.trials).map(move |t| (mi, o, t))))
        .collect();

    let rows: Vec<SupportRow> = jobs
        .par_iter()
        .map(|&(mi, o, t)| -> Result<SupportRow> {
            let m = s.m_sweep[mi];
            let shape = bench.trial_shape(o, t);
            let key = [SUPPORT_STREAM, m as u64, o as u64, t as u64];
            let (truth, recons) = bench.hold_frames(&shape, m, 1, &key)?;
            let metrics = support_accuracy(&recons[0].frame, &truth, s.threshold)?;
            let area = shape.render(&cfg.geometry)?.contact_area() as f64 / n;
            Ok(SupportRow {
                label: shape.label(),
                trial: t,
                m,
                contact_fraction: area,
                small: area < s.small_area_fraction,
                accuracy: metrics.accuracy,
                precision: metrics.precision,
                recall: metrics.recall,
                iou: metrics.iou,
                com_error: bench.com_error(&recons[0].frame, &truth)?,
            })
        })
        .collect::<Result<_>>()?;

    let summary: Vec<SupportSummaryRow> = s
        .m_sweep
        .iter()
        .map(|&m| {
            let at: Vec<&SupportRow> = rows.iter().filter(|r| r.m == m).collect();
            SupportSummaryRow {
                m,
                accuracy: mean(at.iter().map(|r| r.accuracy)),
                small_accuracy: mean(at.iter().filter(|r| r.small).map(|r| r.accuracy)),
                large_accuracy: mean(at.iter().filter(|r| !r.small).map(|r| r.accuracy)),
                recall: mean(at.iter().map(|r| r.recall)),
                iou: mean(at.iter().map(|r| r.iou)),
            }
        })
        .collect();

    let ms: Vec<f64> = summary.iter().map(|r| r.m as f64).collect();
    let acc: Vec<f64> = summary.iter().map(|r| r.accuracy).collect();
    let rho = if ms.len() >= 2 { spearman(&ms, &acc)? } else { f64::NAN };
    let mut by_m: Vec<&SupportSummaryRow> = summary.iter().collect();
    by_m.sort_by_key(|r| r.m);
    let reach = |f: fn(&SupportSummaryRow) -> f64| by_m.iter().find(|r| f(r) >= s.target_accuracy).map(|r| r.m);

    Ok(SupportStudy {
        noise_sigma: bench.acq.noise_sigma,
        typical_measurement: bench.typical,
        spearman: rho,
        small_reaches_target_at: reach(|r| r.small_accuracy),
        large_reaches_target_at: reach(|r| r.large_accuracy),
        summary,
        rows,
    })
}

pub(super) fn run_support(cfg: &ExperimentConfig) -> Result<Outputs> {
    let study = support_study(cfg, load_dictionary(cfg)?)?;
    let mut out = Outputs::default();
    out.add_csv("support.csv", &study.rows)?;
    out.add_csv("support_summary.csv", &study.summary)?;
    out.add_json("support_summary.json", &study)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(r > 0.9 && r < 1.0);
        assert!(spearman(&[1.0], &[1.0]).is_err());
    }
}
