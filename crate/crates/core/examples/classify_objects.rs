//! Classification sweep over M for the 17 synthetic objects, with the
//! down-sampled raster scan alongside.

use spts::experiment::{classify_study, train_dictionary, ExperimentConfig};

fn main() -> spts::Result<()> {
    let cfg = ExperimentConfig::with_seed(1);
    let psi = train_dictionary(&cfg)?.dictionary;
    let study = classify_study(&cfg, psi)?;
    println!("noise sigma {:.3e} V", study.noise_sigma);
    println!("   M      FPS  voted  per-frame  raster  first correct");
    for r in &study.summary {
        let first = r
            .mean_first_correct_s
            .map(|t| format!("{:.2} ms", t * 1e3))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:4} {:8.0} {:6.3} {:10.3} {:7.3}  {first}",
            r.m, r.fps, r.accuracy, r.frame_accuracy, r.raster_accuracy
        );
    }
    Ok(())
}
