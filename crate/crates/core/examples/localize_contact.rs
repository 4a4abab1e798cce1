//! Center-of-mass localization error against M over seeded ball impacts.

use spts::experiment::{localize_study, train_dictionary, ExperimentConfig};

fn main() -> spts::Result<()> {
    let cfg = ExperimentConfig::with_seed(1);
    let psi = train_dictionary(&cfg)?.dictionary;
    let study = localize_study(&cfg, psi)?;
    println!("   M  mean error (px)  std   skipped frames");
    for r in &study.summary {
        println!("{:4} {:15.3} {:6.3} {:8}", r.m, r.mean_error, r.std_error, r.skipped_frames);
    }
    Ok(())
}
