//! Train the default tactile dictionary and show how the K-SVD sweeps went.
//! Pass a path to also write the SPTSDIC1 file.

use spts::experiment::{train_dictionary, ExperimentConfig};
use spts::io::write_dictionary;

fn main() -> spts::Result<()> {
    let cfg = ExperimentConfig::with_seed(1);
    let run = train_dictionary(&cfg)?;
    let d = &run.dictionary;
    println!(
        "corpus {} frames, {} after filtering; {} atoms of {} pixels",
        run.raw_frames,
        run.kept_frames,
        d.k(),
        d.n()
    );
    for (i, (before, after)) in run.outcome.sweeps.iter().enumerate() {
        println!("sweep {i:2}: error {before:.4e} -> {after:.4e}");
    }
    println!("replaced atoms: {}", run.outcome.replaced_atoms);

    if let Some(path) = std::env::args().nth(1) {
        let mut f = std::fs::File::create(&path)?;
        write_dictionary(&mut f, d)?;
        println!("wrote {path}");
    }
    Ok(())
}
