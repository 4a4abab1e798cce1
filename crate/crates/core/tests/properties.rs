use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use spts::dictionary::{ksvd, preprocess, KsvdParams, TrainingCorpus};
use spts::firmware::{assign_seeds, generate_sensing_matrix, lcg_step, SensingMatrix};
use spts::recovery::{omp_with_report, sparsity_target};
use spts::tactile::{GridGeometry, TactileFrame};

fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).abs()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn lcg_matches_wide_arithmetic(seed in any::<u32>()) {
        let wide = (1_664_525u64 * u64::from(seed) + 1_013_904_223) % (1u64 << 32);
        prop_assert_eq!(u64::from(lcg_step(seed)), wide);
    }

    #[test]
    fn weights_stay_within_supply(master in any::<u32>(), n in 1usize..40, m in 1usize..40) {
        let phi = generate_sensing_matrix(&assign_seeds(master, n).unwrap(), m, 3.3).unwrap();
        prop_assert!(phi.weights().iter().all(|w| (-3.3..3.3).contains(w)));
    }

    #[test]
    fn stream_rows_shift_by_one_tick(master in any::<u32>(), m in 2usize..30) {
        // taxel k's row i+1 equals taxel k's LCG advanced once more
        let long = SensingMatrix::from_master_seed(master, m, 5, 3.3).unwrap();
        let tail = long.slice_rows(1..m).unwrap();
        let head = long.prefix(m - 1).unwrap();
        prop_assert_eq!(tail.weights().rows(0, m - 1), long.weights().rows(1, m - 1));
        prop_assert_eq!(head.weights().rows(0, m - 1), long.weights().rows(0, m - 1));
        prop_assert_eq!(tail.row_offset(), 1);
    }

    #[test]
    fn omp_trace_invariants(seed in 0u64..10_000, m in 4usize..20, k in 4usize..30, s in 1usize..6) {
        let a = gaussian(m, k, seed);
        let y = DVector::from_column_slice(gaussian(m, 1, seed + 1).as_slice());
        let (code, report) = omp_with_report(&a, &y, s).unwrap();
        prop_assert!(code.support_len() <= s.min(m).min(k));
        let mut idx = code.indices.clone();
        idx.sort_unstable();
        idx.dedup();
        prop_assert_eq!(idx.len(), code.support_len());
        for w in report.residual_norms.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
        }
        let fit = &a * code.to_dense(k);
        let r = (&y - fit).norm();
        prop_assert!((r - report.final_residual()).abs() <= 1e-9 * (1.0 + y.norm()));
    }

    #[test]
    fn sparsity_target_rounds(m in 1usize..500) {
        let s = sparsity_target(m).unwrap();
        prop_assert_eq!(s, ((m as f64 / 4.0).round() as usize).max(1));
    }

    #[test]
    fn preprocess_output_is_incoherent(seed in 0u64..1000, count in 2usize..25, th in 0.5f64..0.99) {
        let g = GridGeometry::new(3, 3).unwrap();
        let raw = gaussian(9, count, seed).map(f64::abs);
        let frames = raw
            .column_iter()
            .map(|c| TactileFrame::new(g, c.iter().copied().collect(), 0.0).unwrap())
            .collect();
        let kept = preprocess(&TrainingCorpus::new(frames).unwrap(), 0.0, th).unwrap();
        let f = kept.frames();
        for i in 0..f.len() {
            for j in 0..i {
                prop_assert!(cosine(f[i].conductance(), f[j].conductance()) <= th + 1e-9);
            }
        }
    }

    #[test]
    fn ksvd_atoms_unit_norm_and_sweeps_monotone(seed in 0u64..200, count in 6usize..30, k in 2usize..8) {
        let g = GridGeometry::new(4, 4).unwrap();
        let raw = gaussian(16, count, seed).map(f64::abs);
        let frames = raw
            .column_iter()
            .map(|c| TactileFrame::new(g, c.iter().copied().collect(), 0.0).unwrap())
            .collect();
        let params = KsvdParams { atoms: k, sparsity: 2, iterations: 6, seed, min_improvement: 0.0 };
        let out = ksvd(&TrainingCorpus::new(frames).unwrap(), &params).unwrap();
        for c in out.dictionary.atoms().column_iter() {
            prop_assert!((c.norm() - 1.0).abs() < 1e-9);
        }
        // an exactly representable corpus leaves only roundoff in the error
        let slack = raw.norm_squared() * 1e-24;
        for &(before, after) in &out.sweeps {
            prop_assert!(after <= before * (1.0 + 1e-9) + slack);
        }
    }
}
