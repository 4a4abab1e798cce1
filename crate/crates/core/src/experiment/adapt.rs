//! Progressive reconstruction from growing prefixes of one stream.

use serde::Serialize;

use super::{load_dictionary, row_at, trial_rng, typical_measurement, ExperimentConfig, Outputs};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::firmware::SensingMatrix;
use crate::frontend::{acquire, FrameSource};
use crate::io::write_reconstruction;
use crate::perception::{center_of_mass, localization_error, support_accuracy};
use crate::recovery::{adaptive_reconstruct, Reconstruction};
use crate::scenarios::{bounce_event, press_event, BounceSpec, Transduced};
use crate::tactile::{transduce, TactileFrame};

const ADAPT_STREAM: u64 = 7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptRow {
    pub m: usize,
    pub elapsed_s: f64,
    pub residual: f64,
    pub support_accuracy: f64,
    pub iou: f64,
    pub com_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct AdaptStudy {
    pub scene: String,
    pub truth: TactileFrame,
    pub rows: Vec<AdaptRow>,
    pub reconstructions: Vec<Reconstruction>,
}

/// Streams the configured scene, then decodes each prefix in the schedule.
/// Shapes are captured from the start of the hold phase; the ball stream is
/// centered on peak load.
pub fn adapt_study(cfg: &ExperimentConfig, psi: Dictionary) -> Result<AdaptStudy> {
    let a = &cfg.adapt;
    let n = cfg.geometry.len();
    let last = *a.schedule.last().expect("validated schedule");
    let clock = cfg.acquisition.clock_hz;
    let mut rng = trial_rng(cfg.master_seed, &[ADAPT_STREAM]);

    let (scene, start, truth): (Box<dyn FrameSource>, usize, TactileFrame) = if a.scene == "ball" {
        let ev = bounce_event(
            &BounceSpec {
                onset: cfg.bounce.ball.onset + cfg.bounce.margin,
                ..cfg.bounce.ball.clone()
            },
            &cfg.geometry,
        )?;
        let (t0, t1) = ev.contact_window();
        let peak_t = (t0 + t1) / 2.0;
        let start = row_at(peak_t, clock).saturating_sub(last / 2);
        let scene = Transduced {
            source: ev,
            circuit: cfg.circuit,
        };
        let truth = scene.frame_at(peak_t);
        (Box::new(scene), start, truth)
    } else {
        let shape = cfg
            .shape_specs()
            .into_iter()
            .find(|s| s.label() == a.scene)
            .ok_or_else(|| Error::Config(format!("unknown adapt scene {}", a.scene)))?;
        let p = &cfg.press;
        let ev = press_event(&shape, &cfg.geometry, p.rise, p.hold, p.release)?;
        let start = row_at(ev.hold_start(), clock);
        let truth = transduce(ev.peak_map(), &cfg.circuit)?;
        (
            Box::new(Transduced {
                source: ev,
                circuit: cfg.circuit,
            }),
            start,
            truth,
        )
    };

    let stream = SensingMatrix::from_master_seed(cfg.master_seed, (start + last).max(n), n, cfg.circuit.supply)?;
    let typical = typical_measurement(&stream.prefix(n)?, std::slice::from_ref(&truth), cfg.circuit.feedback_resistance);
    let acq = cfg.acquisition.frontend(cfg.acquisition.noise_for(typical));
    let phi = stream.slice_rows(start..start + last)?;
    let y = acquire(scene.as_ref(), &phi, &cfg.circuit, &acq, &mut rng)?;
    let recons = adaptive_reconstruct(&phi, &psi, &y, &a.schedule, &cfg.geometry, &cfg.circuit)?;

    let rest = cfg.circuit.rest_conductance();
    let true_com = center_of_mass(&truth, rest)?;
    let rows = recons
        .iter()
        .map(|r| -> Result<AdaptRow> {
            let metrics = support_accuracy(&r.frame, &truth, a.threshold)?;
            let com_error = match center_of_mass(&r.frame, rest) {
                Ok(c) => Some(localization_error(c, true_com)),
                Err(Error::NoContact) => None,
                Err(e) => return Err(e),
            };
            Ok(AdaptRow {
                m: r.m_used,
                elapsed_s: r.m_used as f64 / clock,
                residual: r.residual_norm,
                support_accuracy: metrics.accuracy,
                iou: metrics.iou,
                com_error,
            })
        })
        .collect::<Result<_>>()?;
    Ok(AdaptStudy {
        scene: a.scene.clone(),
        truth,
        rows,
        reconstructions: recons,
    })
}

pub(super) fn run(cfg: &ExperimentConfig) -> Result<Outputs> {
    let study = adapt_study(cfg, load_dictionary(cfg)?)?;
    let mut out = Outputs::default();
    for r in &study.reconstructions {
        let mut bytes = Vec::new();
        write_reconstruction(&mut bytes, r)?;
        out.add(format!("adapt_m{:03}.jsonl", r.m_used), bytes);
    }
    let mut truth = Vec::new();
    crate::io::write_frame(&mut truth, &study.truth)?;
    out.add("adapt_truth.jsonl", truth);
    out.add_csv("adapt.csv", &study.rows)?;
    Ok(out)
}
