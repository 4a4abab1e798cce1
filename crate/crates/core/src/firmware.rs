//! Emulation of the per-taxel weight generator firmware.
//!
//! Every taxel runs the same 32-bit LCG from its own seed. On each clock tick
//! all generators advance once, the low 24 bits of the new state drive the
//! DAC (`0..supply`), and the analog stage maps that to a bipolar weight
//! `2u - supply`. Row `i` of the sensing matrix holds the weights after
//! `i + 1` advances, so the distributed seeds are never emitted themselves.

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

pub const LCG_MULTIPLIER: u32 = 1_664_525;
pub const LCG_INCREMENT: u32 = 1_013_904_223;
/// Divisor of the DAC fraction, 2^24.
pub const FRACTION_DIVISOR: u32 = 1 << 24;

/// One LCG advance, modulo 2^32.
#[inline]
pub fn lcg_step(seed: u32) -> u32 {
    seed.wrapping_mul(LCG_MULTIPLIER).wrapping_add(LCG_INCREMENT)
}

/// DAC output for an LCG state: the low 24 bits as a fraction of `supply`.
#[inline]
pub fn unipolar_voltage(seed: u32, supply: f64) -> f64 {
    let fraction = f64::from(seed % FRACTION_DIVISOR) / f64::from(FRACTION_DIVISOR);
    supply * fraction
}

/// Level shift of a DAC voltage into `[-supply, +supply]`.
pub fn bipolar_weight(unipolar: f64, supply: f64) -> Result<f64> {
    if !(0.0..=supply).contains(&unipolar) {
        return Err(domain(format!(
            "unipolar voltage {unipolar} outside [0, {supply}]"
        )));
    }
    Ok(2.0 * unipolar - supply)
}

/// Seeds handed to each taxel at start-up.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedTable {
    pub master_seed: u32,
    pub seeds: Vec<u32>,
}

impl SeedTable {
    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }
}

/// Pixel `k` receives the `(k+1)`-th iterate of the LCG orbit of `master_seed`.
/// The orbit has full period, so seeds are distinct for any realistic `n`.
pub fn assign_seeds(master_seed: u32, n: usize) -> Result<SeedTable> {
    if n == 0 {
        return Err(domain("seed table needs at least one pixel"));
    }
    let seeds = std::iter::successors(Some(lcg_step(master_seed)), |&s| Some(lcg_step(s)))
        .take(n)
        .collect();
    Ok(SeedTable { master_seed, seeds })
}

/// The M x N matrix of bipolar weights (volts). Row `i` is the pattern driven
/// during measurement `row_offset + i` of the clock stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    weights: DMatrix<f64>,
    seed_table: SeedTable,
    supply: f64,
    row_offset: usize,
}

/// Generates `m` clocked weight rows for the taxels of `table`.
pub fn generate_sensing_matrix(table: &SeedTable, m: usize, supply: f64) -> Result<SensingMatrix> {
    if m == 0 {
        return Err(domain("sensing matrix needs at least one measurement"));
    }
    if table.is_empty() {
        return Err(domain("seed table is empty"));
    }
    if !(supply > 0.0 && supply.is_finite()) {
        return Err(domain(format!("supply must be positive, got {supply}")));
    }
    let n = table.len();
    let mut weights = DMatrix::zeros(m, n);
    for (k, &seed) in table.seeds.iter().enumerate() {
        let mut state = seed;
        for i in 0..m {
            state = lcg_step(state);
            weights[(i, k)] = 2.0 * unipolar_voltage(state, supply) - supply;
        }
    }
    Ok(SensingMatrix {
        weights,
        seed_table: table.clone(),
        supply,
        row_offset: 0,
    })
}

impl SensingMatrix {
    /// Convenience: seed table from `master_seed`, then `m` rows.
    pub fn from_master_seed(master_seed: u32, m: usize, n: usize, supply: f64) -> Result<Self> {
        generate_sensing_matrix(&assign_seeds(master_seed, n)?, m, supply)
    }

    /// Wraps raw weights, e.g. read back from disk.
    pub fn from_parts(weights: DMatrix<f64>, seed_table: SeedTable, supply: f64) -> Result<Self> {
        if weights.ncols() != seed_table.len() {
            return Err(domain("weight columns do not match seed table"));
        }
        Ok(Self {
            weights,
            seed_table,
            supply,
            row_offset: 0,
        })
    }

    pub fn m(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n(&self) -> usize {
        self.weights.ncols()
    }

    pub fn supply(&self) -> f64 {
        self.supply
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn seed_table(&self) -> &SeedTable {
        &self.seed_table
    }

    /// Index of this matrix's first row within the generator's clock stream.
    pub fn row_offset(&self) -> usize {
        self.row_offset
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.weights.row(i).iter().copied().collect()
    }

    /// Copies a block of consecutive rows.
    pub fn slice_rows(&self, rows: Range<usize>) -> Result<Self> {
        if rows.start >= rows.end || rows.end > self.m() {
            return Err(domain(format!(
                "row range {rows:?} invalid for a {}-row matrix",
                self.m()
            )));
        }
        Ok(Self {
            weights: self.weights.rows(rows.start, rows.len()).into_owned(),
            seed_table: self.seed_table.clone(),
            supply: self.supply,
            row_offset: self.row_offset + rows.start,
        })
    }

    /// First `m` rows.
    pub fn prefix(&self, m: usize) -> Result<Self> {
        self.slice_rows(0..m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Arbitrary-precision-free reference: u128 arithmetic never overflows
    /// for a 32-bit state times a 21-bit multiplier.
    fn reference_step(s: u128) -> u128 {
        (1_664_525u128 * s + 1_013_904_223u128) % (1u128 << 32)
    }

    #[test]
    fn lcg_examples() {
        assert_eq!(lcg_step(0), 1_013_904_223);
        assert_eq!(lcg_step(1), 1_015_568_748);
        assert_eq!(lcg_step(1_013_904_223), 1_196_435_762);
        for s in [0u32, 1, 12345, u32::MAX, 0xdead_beef] {
            assert_eq!(u128::from(lcg_step(s)), reference_step(u128::from(s)));
        }
    }

    #[test]
    fn unipolar_examples() {
        assert_eq!(unipolar_voltage(0, 3.3), 0.0);
        assert!((unipolar_voltage(1 << 23, 3.3) - 1.65).abs() < 1e-15);
        assert_eq!(unipolar_voltage(1 << 24, 3.3), 0.0);
        assert!(unipolar_voltage(u32::MAX, 3.3) < 3.3);
    }

    #[test]
    fn bipolar_examples() {
        assert!((bipolar_weight(0.0, 3.3).unwrap() + 3.3).abs() < 1e-15);
        assert!((bipolar_weight(3.3, 3.3).unwrap() - 3.3).abs() < 1e-15);
        assert!(bipolar_weight(1.65, 3.3).unwrap().abs() < 1e-15);
        assert!(bipolar_weight(-0.1, 3.3).is_err());
        assert!(bipolar_weight(3.4, 3.3).is_err());
    }

    #[test]
    fn seed_examples() {
        let t = assign_seeds(0, 2).unwrap();
        assert_eq!(t.seeds, vec![1_013_904_223, 1_196_435_762]);
        assert_eq!(assign_seeds(99, 1).unwrap().seeds, vec![lcg_step(99)]);
        assert_eq!(assign_seeds(7, 50).unwrap(), assign_seeds(7, 50).unwrap());
        assert!(assign_seeds(0, 0).is_err());
        let big = assign_seeds(3, 1000).unwrap();
        let mut s = big.seeds.clone();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 1000);
    }

    #[test]
    fn first_weight_trace() {
        let t = assign_seeds(0, 2).unwrap();
        let phi = generate_sensing_matrix(&t, 1, 3.3).unwrap();
        assert_eq!(phi.seed_table().seeds[0], 1_013_904_223);
        assert_eq!(1_196_435_762u32 % (1 << 24), 5_253_426);
        let fraction: f64 = 5_253_426.0 / 16_777_216.0;
        assert!((fraction - 0.313_129).abs() < 1e-6);
        let w = phi.weights()[(0, 0)];
        assert!((w - (2.0 * 3.3 * fraction - 3.3)).abs() < 1e-15);
        assert!((w + 1.233_351).abs() < 1e-6);
        assert!(generate_sensing_matrix(&t, 0, 3.3).is_err());
    }

    #[test]
    fn entries_bounded_and_centered() {
        let phi = SensingMatrix::from_master_seed(11, 1000, 100, 3.3).unwrap();
        assert!(phi.weights().iter().all(|w| w.is_finite() && w.abs() <= 3.3));
        let mean = phi.weights().mean();
        assert!(mean.abs() < 0.05 * 3.3, "mean {mean}");
        for i in 0..phi.m() {
            let row_mean = phi.weights().row(i).mean();
            assert!(row_mean.abs() < 1.0, "row {i} mean {row_mean}");
        }
    }

    #[test]
    fn prefix_property() {
        let long = SensingMatrix::from_master_seed(5, 40, 100, 3.3).unwrap();
        let short = SensingMatrix::from_master_seed(5, 13, 100, 3.3).unwrap();
        assert_eq!(long.prefix(13).unwrap().weights(), short.weights());
        let block = long.slice_rows(10..20).unwrap();
        assert_eq!(block.row_offset(), 10);
        assert_eq!(block.row(0), long.row(10));
        assert!(long.slice_rows(5..5).is_err());
        assert!(long.slice_rows(30..41).is_err());
    }

    #[test]
    fn columns_decorrelated() {
        let phi = SensingMatrix::from_master_seed(2024, 200, 100, 3.3).unwrap();
        let w = phi.weights();
        let centered: Vec<Vec<f64>> = (0..100)
            .map(|k| {
                let col: Vec<f64> = w.column(k).iter().copied().collect();
                let mean = col.iter().sum::<f64>() / col.len() as f64;
                col.iter().map(|v| v - mean).collect()
            })
            .collect();
        let mut worst = 0.0f64;
        for a in 0..100 {
            for b in (a + 1)..100 {
                let dot: f64 = centered[a].iter().zip(&centered[b]).map(|(x, y)| x * y).sum();
                let na: f64 = centered[a].iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb: f64 = centered[b].iter().map(|x| x * x).sum::<f64>().sqrt();
                worst = worst.max((dot / (na * nb)).abs());
            }
        }
        assert!(worst < 0.5, "max column correlation {worst}");
    }
}
