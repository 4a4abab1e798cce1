//! Recover a 4-sparse vector from 30 random projections.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use spts::recovery::omp_with_report;

fn main() -> spts::Result<()> {
    let (m, k, s) = (30, 60, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut a = DMatrix::from_fn(m, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    for mut c in a.column_iter_mut() {
        c.normalize_mut();
    }
    let mut x = DVector::zeros(k);
    for j in [3, 17, 40, 52] {
        x[j] = rng.random_range(1.0..3.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
    }
    let y = &a * &x;

    let (code, report) = omp_with_report(&a, &y, s)?;
    println!("true support  [3, 17, 40, 52]");
    let mut found = code.indices.clone();
    found.sort_unstable();
    println!("found support {found:?}");
    println!("residual per iteration:");
    for (i, r) in report.residual_norms.iter().enumerate() {
        println!("  {i}: {r:.3e}");
    }
    let err = (code.to_dense(k) - &x).norm() / x.norm();
    println!("relative coefficient error {err:.2e}");
    Ok(())
}
