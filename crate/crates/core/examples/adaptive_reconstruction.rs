//! Decode a T-shaped press and a ball impact from growing measurement
//! prefixes and print the ball frame at a few stages.

use spts::experiment::{adapt_study, train_dictionary, ExperimentConfig};
use spts::tactile::TactileFrame;

fn show(frame: &TactileFrame) {
    let g = frame.geometry();
    let max = frame.conductance().iter().cloned().fold(0.0, f64::max);
    for r in 0..g.rows {
        let line: String = (0..g.cols)
            .map(|c| {
                let v = frame.conductance()[r * g.cols + c] / max;
                match v {
                    v if v > 0.6 => '#',
                    v if v > 0.3 => '+',
                    v if v > 0.1 => '.',
                    _ => ' ',
                }
            })
            .collect();
        println!("  |{line}|");
    }
}

fn main() -> spts::Result<()> {
    let mut cfg = ExperimentConfig::with_seed(1);
    cfg.adapt.schedule = vec![3, 5, 8, 10, 15, 25, 50, 100];
    let psi = train_dictionary(&cfg)?.dictionary;
    for scene in ["ball", "T"] {
        cfg.adapt.scene = scene.into();
        let study = adapt_study(&cfg, psi.clone())?;
        println!("scene {scene}");
        println!("   M  elapsed   support   IoU");
        for r in &study.rows {
            println!("{:4} {:6.3} ms {:8.3} {:6.3}", r.m, r.elapsed_s * 1e3, r.support_accuracy, r.iou);
        }
    }
    cfg.adapt.scene = "ball".into();
    let study = adapt_study(&cfg, psi)?;
    for m in [5, 15, 50] {
        if let Some(rec) = study.reconstructions.iter().find(|r| r.m_used == m) {
            println!("M = {m}");
            show(&rec.frame);
        }
    }
    println!("truth");
    show(&study.truth);
    Ok(())
}
