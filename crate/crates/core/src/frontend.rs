//! Summing amplifier and ADC model.

use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::firmware::SensingMatrix;
use crate::tactile::{CircuitParams, TactileFrame};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcquisitionConfig {
    /// Shared measurement clock, hertz. One weight pattern per tick.
    pub clock_hz: f64,
    pub adc_bits: u32,
    /// ADC full scale is `[-adc_range, +adc_range]` volts.
    pub adc_range: f64,
    /// Std-dev of additive Gaussian noise at the amplifier output, volts.
    pub noise_sigma: f64,
    /// Amplifier rails, volts.
    pub saturation: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            clock_hz: 70_000.0,
            adc_bits: 12,
            adc_range: 10.0,
            noise_sigma: 0.0,
            saturation: 10.0,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clock_hz > 0.0 && self.clock_hz.is_finite()) {
            return Err(domain(format!("clock_hz must be positive, got {}", self.clock_hz)));
        }
        if !(1..=24).contains(&self.adc_bits) {
            return Err(domain(format!("adc_bits must be in 1..=24, got {}", self.adc_bits)));
        }
        if !(self.adc_range > 0.0 && self.adc_range.is_finite()) {
            return Err(domain("adc_range must be positive"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(domain("noise_sigma must be non-negative"));
        }
        if !(self.saturation > 0.0) {
            return Err(domain("saturation must be positive"));
        }
        Ok(())
    }

    /// Width of one ADC code, volts.
    pub fn lsb(&self) -> f64 {
        2.0 * self.adc_range / f64::from(1u32 << self.adc_bits)
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / self.clock_hz
    }
}

/// A time-stamped run of amplifier output samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector {
    values: Vec<f64>,
    timestamps: Vec<f64>,
    /// Rows of the weight stream that produced these samples.
    rows: Range<usize>,
}

impl MeasurementVector {
    pub fn new(values: Vec<f64>, timestamps: Vec<f64>, first_row: usize) -> Result<Self> {
        if values.len() != timestamps.len() {
            return Err(domain("values and timestamps differ in length"));
        }
        if timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(domain("timestamps must be strictly increasing"));
        }
        let rows = first_row..first_row + values.len();
        Ok(Self {
            values,
            timestamps,
            rows,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn rows(&self) -> Range<usize> {
        self.rows.clone()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Samples `range` (local indices), keeping their stream row ids.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.len() {
            return Err(domain(format!(
                "sample range {range:?} invalid for {} samples",
                self.len()
            )));
        }
        Ok(Self {
            values: self.values[range.clone()].to_vec(),
            timestamps: self.timestamps[range.clone()].to_vec(),
            rows: self.rows.start + range.start..self.rows.start + range.end,
        })
    }

    pub fn prefix(&self, m: usize) -> Result<Self> {
        self.slice(0..m)
    }

    pub fn rms(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }
}

/// Anything that yields the tactile state at time `t`.
pub trait FrameSource {
    fn frame_at(&self, t: f64) -> TactileFrame;
}

impl FrameSource for TactileFrame {
    fn frame_at(&self, t: f64) -> TactileFrame {
        self.clone().with_timestamp(t)
    }
}

impl<F> FrameSource for F
where
    F: Fn(f64) -> TactileFrame,
{
    fn frame_at(&self, t: f64) -> TactileFrame {
        self(t)
    }
}

/// Ideal inverting summer: `V_out = -R_f * sum_k w_k C_k`.
pub fn measure_once(weights: &[f64], frame: &TactileFrame, params: &CircuitParams) -> Result<f64> {
    let c = frame.conductance();
    if weights.len() != c.len() {
        return Err(domain(format!(
            "{} weights for a {}-pixel frame",
            weights.len(),
            c.len()
        )));
    }
    let dot: f64 = weights.iter().zip(c).map(|(w, g)| w * g).sum();
    Ok(-params.feedback_resistance * dot)
}

/// Mid-rise uniform quantizer over `[-adc_range, adc_range]` after clamping
/// to the rails. Decision thresholds sit on multiples of the LSB and ties go
/// away from zero; an exact zero input has no direction and stays at zero.
pub fn quantize(v: f64, cfg: &AcquisitionConfig) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    let v = v.clamp(-cfg.saturation, cfg.saturation);
    let step = cfg.lsb();
    let top = cfg.adc_range - 0.5 * step;
    let magnitude = ((v.abs() / step).floor() + 0.5) * step;
    magnitude.min(top).copysign(v)
}

/// Clocks the weight rows of `phi` against a (possibly moving) scene.
///
/// Sample `i` is taken at `(phi.row_offset() + i) / clock_hz` using row `i`.
pub fn acquire<S, R>(
    scene: &S,
    phi: &SensingMatrix,
    circuit: &CircuitParams,
    cfg: &AcquisitionConfig,
    rng: &mut R,
) -> Result<MeasurementVector>
where
    S: FrameSource + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    let noise = if cfg.noise_sigma > 0.0 {
        Some(Normal::new(0.0, cfg.noise_sigma).map_err(|e| domain(e.to_string()))?)
    } else {
        None
    };
    let m = phi.m();
    let mut values = Vec::with_capacity(m);
    let mut timestamps = Vec::with_capacity(m);
    let w = phi.weights();
    for i in 0..m {
        let t = (phi.row_offset() + i) as f64 / cfg.clock_hz;
        let frame = scene.frame_at(t);
        let c = frame.conductance();
        if c.len() != phi.n() {
            return Err(domain(format!(
                "scene has {} pixels, sensing matrix {}",
                c.len(),
                phi.n()
            )));
        }
        let dot: f64 = (0..phi.n()).map(|k| w[(i, k)] * c[k]).sum();
        let mut v = -circuit.feedback_resistance * dot;
        if let Some(n) = &noise {
            v += n.sample(rng);
        }
        values.push(quantize(v, cfg));
        timestamps.push(t);
    }
    MeasurementVector::new(values, timestamps, phi.row_offset())
}

/// Effective reconstruction rate when each frame uses `m` samples.
pub fn frame_rate(m: usize, cfg: &AcquisitionConfig) -> Result<f64> {
    if m == 0 {
        return Err(domain("frame needs at least one measurement"));
    }
    Ok(cfg.clock_hz / m as f64)
}
