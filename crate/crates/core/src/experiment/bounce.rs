//! Ball-impact studies: temporal resolution and contact localization.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{load_dictionary, row_at, trial_rng, typical_measurement, ExperimentConfig, Outputs};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::firmware::SensingMatrix;
use crate::frontend::{acquire, frame_rate, AcquisitionConfig, FrameSource};
use crate::perception::{center_of_mass, delta_pressure, localization_error};
use crate::recovery::reconstruct;
use crate::scenarios::{bounce_event, BounceEvent, BounceSpec, PressureSource, Transduced};
use crate::tactile::{transduce, TactileFrame};

const BOUNCE_STREAM: u64 = 4;
const LOCALIZE_STREAM: u64 = 5;
const CENTER_STREAM: u64 = 6;

/// A reconstruction whose peak exceeds this fraction of the ball's peak
/// pressure counts as having noticed the impact.
const DETECTION_FRACTION: f64 = 0.1;

/// Indices of the `m`-sample frames, counted from stream row 0, that lie
/// entirely inside `[onset, onset + duration]`.
pub fn frames_in_contact(m: usize, onset: f64, duration: f64, clock_hz: f64) -> Vec<usize> {
    let first = onset * clock_hz;
    let last = (onset + duration) * clock_hz;
    let eps = 1e-9 * last.max(1.0);
    (0..)
        .take_while(|&j| ((j + 1) * m) as f64 <= last + eps)
        .filter(|&j| (j * m) as f64 >= first - eps)
        .collect()
}

struct Track<'a> {
    cfg: &'a ExperimentConfig,
    psi: Dictionary,
    phi: SensingMatrix,
    acq: AcquisitionConfig,
    typical: f64,
}

impl<'a> Track<'a> {
    fn new(cfg: &'a ExperimentConfig, psi: Dictionary, max_m: usize) -> Result<Self> {
        let n = cfg.geometry.len();
        let b = &cfg.bounce;
        let end = b.ball.onset + 2.0 * b.margin + b.ball.contact_duration;
        let rows = row_at(end, cfg.acquisition.clock_hz) + max_m;
        let phi = SensingMatrix::from_master_seed(cfg.master_seed, rows.max(n), n, cfg.circuit.supply)?;
        let ev = bounce_event(&b.ball, &cfg.geometry)?;
        let peak = transduce(&ev.pressure_at(b.ball.onset + b.ball.contact_duration / 2.0), &cfg.circuit)?;
        let typical = typical_measurement(&phi.prefix(n)?, &[peak], cfg.circuit.feedback_resistance);
        let acq = cfg.acquisition.frontend(cfg.acquisition.noise_for(typical));
        Ok(Self {
            cfg,
            psi,
            phi,
            acq,
            typical,
        })
    }

    fn event(&self, center: (f64, f64)) -> Result<BounceEvent> {
        let b = &self.cfg.bounce;
        let spec = BounceSpec {
            contact_center: center,
            onset: b.ball.onset + b.margin,
            ..b.ball.clone()
        };
        bounce_event(&spec, &self.cfg.geometry)
    }

    /// Reconstructs frame `j` of `m` samples from the scene.
    fn frame(
        &self,
        scene: &Transduced<BounceEvent>,
        m: usize,
        j: usize,
        rng: &mut impl Rng,
    ) -> Result<TactileFrame> {
        let phi = self.phi.slice_rows(j * m..(j + 1) * m)?;
        let y = acquire(scene, &phi, &self.cfg.circuit, &self.acq, rng)?;
        Ok(reconstruct(&phi, &self.psi, &y, &self.cfg.geometry, &self.cfg.circuit)?.frame)
    }

    fn max_pressure(&self, frame: &TactileFrame) -> f64 {
        let peak = frame.conductance().iter().copied().fold(0.0, f64::max);
        self.cfg.circuit.pressure_from_conductance(peak)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BounceFrameRow {
    pub m: usize,
    pub frame: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub in_contact: bool,
    pub true_max_pressure: f64,
    pub max_pressure: f64,
    pub com_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BounceSummaryRow {
    pub m: usize,
    pub fps: f64,
    pub frames_in_contact: usize,
    /// Mean per-pixel conductance change between consecutive in-contact
    /// reconstructions.
    pub delta_conductance: Option<f64>,
    /// Mean absolute change of the reconstructed peak pressure between
    /// consecutive in-contact frames, pascals.
    pub delta_max_pressure: Option<f64>,
    pub true_delta_max_pressure: Option<f64>,
    /// End of the first frame whose reconstruction notices the impact,
    /// measured from first contact.
    pub detection_delay_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BounceStudy {
    pub noise_sigma: f64,
    pub typical_measurement: f64,
    pub summary: Vec<BounceSummaryRow>,
    #[serde(skip)]
    pub frames: Vec<BounceFrameRow>,
}

impl BounceStudy {
    pub fn at(&self, m: usize) -> Option<&BounceSummaryRow> {
        self.summary.iter().find(|r| r.m == m)
    }
}

fn mean_abs_step(values: &[f64]) -> Option<f64> {
    (values.len() >= 2).then(|| {
        values.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (values.len() - 1) as f64
    })
}

/// Continuous acquisition across one bounce, chunked into frames of each M.
pub fn bounce_study(cfg: &ExperimentConfig, psi: Dictionary) -> Result<BounceStudy> {
    let b = &cfg.bounce;
    let max_m = *b.m_values.iter().max().expect("validated sweep");
    let track = Track::new(cfg, psi, max_m)?;
    let event = track.event(b.ball.contact_center)?;
    let (onset, _) = event.contact_window();
    let clock = track.acq.clock_hz;
    let end = onset + b.ball.contact_duration + b.margin;
    let scene = Transduced {
        source: event,
        circuit: cfg.circuit,
    };
    let rest = cfg.circuit.rest_conductance();

    let per_m: Vec<(Vec<BounceFrameRow>, BounceSummaryRow, Vec<TactileFrame>)> = b
        .m_values
        .par_iter()
        .map(|&m| -> Result<_> {
            let contact = frames_in_contact(m, onset, b.ball.contact_duration, clock);
            let count = ((end * clock + 1e-9) / m as f64).floor() as usize;
            let mut rng = trial_rng(cfg.master_seed, &[BOUNCE_STREAM, m as u64]);
            let mut rows = Vec::with_capacity(count);
            let mut in_contact_frames = Vec::new();
            for j in 0..count {
                let frame = track.frame(&scene, m, j, &mut rng)?;
                let (t0, t1) = ((j * m) as f64 / clock, ((j + 1) * m) as f64 / clock);
                let truth = scene.frame_at((t0 + t1) / 2.0);
                let in_contact = contact.contains(&j);
                let com_error = match (center_of_mass(&frame, rest), in_contact) {
                    (Ok(c), true) => Some(localization_error(c, b.ball.contact_center)),
                    (Ok(_), false) | (Err(Error::NoContact), _) => None,
                    (Err(e), _) => return Err(e),
                };
                rows.push(BounceFrameRow {
                    m,
                    frame: j,
                    t_start: t0,
                    t_end: t1,
                    in_contact,
                    true_max_pressure: track.max_pressure(&truth),
                    max_pressure: track.max_pressure(&frame),
                    com_error,
                });
                if in_contact {
                    in_contact_frames.push(frame);
                }
            }
            let inside: Vec<&BounceFrameRow> = rows.iter().filter(|r| r.in_contact).collect();
            let recon_peaks: Vec<f64> = inside.iter().map(|r| r.max_pressure).collect();
            let true_peaks: Vec<f64> = inside.iter().map(|r| r.true_max_pressure).collect();
            let detection = rows
                .iter()
                .find(|r| r.t_end > onset && r.max_pressure >= DETECTION_FRACTION * b.ball.peak_pressure)
                .map(|r| r.t_end - onset);
            let summary = BounceSummaryRow {
                m,
                fps: frame_rate(m, &track.acq)?,
                frames_in_contact: contact.len(),
                delta_conductance: delta_pressure(&in_contact_frames).ok(),
                delta_max_pressure: mean_abs_step(&recon_peaks),
                true_delta_max_pressure: mean_abs_step(&true_peaks),
                detection_delay_s: detection,
            };
            Ok((rows, summary, in_contact_frames))
        })
        .collect::<Result<_>>()?;

    let mut frames = Vec::new();
    let mut summary = Vec::new();
    for (rows, s, _) in per_m {
        frames.extend(rows);
        summary.push(s);
    }
    Ok(BounceStudy {
        noise_sigma: track.acq.noise_sigma,
        typical_measurement: track.typical,
        summary,
        frames,
    })
}

#[derive(Serialize)]
struct TraceRow {
    t: f64,
    true_max_pressure: f64,
    max_pressure: f64,
}

pub(super) fn run_bounce(cfg: &ExperimentConfig) -> Result<Outputs> {
    let study = bounce_study(cfg, load_dictionary(cfg)?)?;
    let mut out = Outputs::default();
    out.add_csv("bounce_frames.csv", &study.frames)?;
    out.add_csv("bounce_summary.csv", &study.summary)?;
    for &m in &cfg.bounce.m_values {
        let trace: Vec<TraceRow> = study
            .frames
            .iter()
            .filter(|r| r.m == m)
            .map(|r| TraceRow {
                t: (r.t_start + r.t_end) / 2.0,
                true_max_pressure: r.true_max_pressure,
                max_pressure: r.max_pressure,
            })
            .collect();
        out.add_csv(&format!("bounce_trace_m{m:03}.csv"), &trace)?;
    }
    out.add_json("bounce_summary.json", &study)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizeRow {
    pub trial: usize,
    pub m: usize,
    pub center_row: f64,
    pub center_col: f64,
    pub frames: usize,
    pub skipped: usize,
    pub mean_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizeSummaryRow {
    pub m: usize,
    pub mean_error: f64,
    pub std_error: f64,
    pub trials: usize,
    pub skipped_frames: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalizeStudy {
    pub noise_sigma: f64,
    pub typical_measurement: f64,
    pub summary: Vec<LocalizeSummaryRow>,
    #[serde(skip)]
    pub rows: Vec<LocalizeRow>,
}

impl LocalizeStudy {
    pub fn mean_error_at(&self, m: usize) -> Option<f64> {
        self.summary.iter().find(|r| r.m == m).map(|r| r.mean_error)
    }
}

/// Bounces at random contact points; CoM of every in-contact reconstruction
/// against the true contact point.
pub fn localize_study(cfg: &ExperimentConfig, psi: Dictionary) -> Result<LocalizeStudy> {
    let l = &cfg.localize;
    let b = &cfg.bounce;
    let max_m = *l.m_sweep.iter().max().expect("validated sweep");
    let track = Track::new(cfg, psi, max_m)?;
    let clock = track.acq.clock_hz;
    let rest = cfg.circuit.rest_conductance();

    let centers: Vec<(f64, f64)> = (0..l.trials)
        .map(|t| {
            let mut rng = trial_rng(cfg.master_seed, &[CENTER_STREAM, t as u64]);
            let mut draw = |c: f64| {
                if l.center_spread > 0.0 {
                    c + rng.random_range(-l.center_spread..=l.center_spread)
                } else {
                    c
                }
            };
            let (r, c) = b.ball.contact_center;
            (draw(r), draw(c))
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..l.m_sweep.len())
        .flat_map(|mi| (0..l.trials).map(move |t| (mi, t)))
        .collect();
    let rows: Vec<LocalizeRow> = jobs
        .par_iter()
        .map(|&(mi, t)| -> Result<LocalizeRow> {
            let m = l.m_sweep[mi];
            let center = centers[t];
            let event = track.event(center)?;
            let (onset, _) = event.contact_window();
            let scene = Transduced {
                source: event,
                circuit: cfg.circuit,
            };
            let mut rng = trial_rng(cfg.master_seed, &[LOCALIZE_STREAM, m as u64, t as u64]);
            let mut errors = Vec::new();
            let mut skipped = 0;
            let contact = frames_in_contact(m, onset, b.ball.contact_duration, clock);
            for &j in &contact {
                let frame = track.frame(&scene, m, j, &mut rng)?;
                match center_of_mass(&frame, rest) {
                    Ok(c) => errors.push(localization_error(c, center)),
                    Err(Error::NoContact) => skipped += 1,
                    Err(e) => return Err(e),
                }
            }
            Ok(LocalizeRow {
                trial: t,
                m,
                center_row: center.0,
                center_col: center.1,
                frames: errors.len(),
                skipped,
                mean_error: (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64),
            })
        })
        .collect::<Result<_>>()?;

    let summary = l
        .m_sweep
        .iter()
        .map(|&m| {
            let at: Vec<&LocalizeRow> = rows.iter().filter(|r| r.m == m).collect();
            let errs: Vec<f64> = at.iter().filter_map(|r| r.mean_error).collect();
            let mean = if errs.is_empty() {
                f64::NAN
            } else {
                errs.iter().sum::<f64>() / errs.len() as f64
            };
            let var = if errs.len() > 1 {
                errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (errs.len() - 1) as f64
            } else {
                0.0
            };
            LocalizeSummaryRow {
                m,
                mean_error: mean,
                std_error: var.sqrt(),
                trials: errs.len(),
                skipped_frames: at.iter().map(|r| r.skipped).sum(),
            }
        })
        .collect();

    Ok(LocalizeStudy {
        noise_sigma: track.acq.noise_sigma,
        typical_measurement: track.typical,
        summary,
        rows,
    })
}

pub(super) fn run_localize(cfg: &ExperimentConfig) -> Result<Outputs> {
    let study = localize_study(cfg, load_dictionary(cfg)?)?;
    let mut out = Outputs::default();
    out.add_csv("localize.csv", &study.rows)?;
    out.add_csv("localize_summary.csv", &study.summary)?;
    out.add_json("localize_summary.json", &study)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contact_frame_counts() {
        assert_eq!(frames_in_contact(25, 0.0, 0.008, 70_000.0).len(), 22);
        assert_eq!(frames_in_contact(25, 0.001, 0.008, 70_000.0), (3..25).collect::<Vec<_>>());
        assert_eq!(frames_in_contact(100, 0.0, 0.008, 70_000.0).len(), 5);
        assert!(frames_in_contact(1000, 0.0, 0.008, 70_000.0).is_empty());
    }
}
