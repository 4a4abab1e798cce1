//! An 8 ms ball impact seen at three frame sizes.

use spts::experiment::{bounce_study, train_dictionary, ExperimentConfig};

fn main() -> spts::Result<()> {
    let cfg = ExperimentConfig::with_seed(1);
    let psi = train_dictionary(&cfg)?.dictionary;
    let study = bounce_study(&cfg, psi)?;
    println!("   M  frames  mean dP/frame (Pa)  true dP/frame (Pa)");
    for r in &study.summary {
        let f = |v: Option<f64>| v.map(|v| format!("{v:18.0}")).unwrap_or_else(|| format!("{:>18}", "-"));
        println!(
            "{:4} {:7} {} {}",
            r.m,
            r.frames_in_contact,
            f(r.delta_max_pressure),
            f(r.true_delta_max_pressure)
        );
    }
    Ok(())
}
