//! Grid geometry, tactile frames and the pressure to conductance transduction.
//!
//! Pixels are ordered row-major everywhere: sensing-matrix columns, dictionary
//! rows and frame vectors all share the index `row * cols + col`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Rectangular taxel grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridGeometry {
    pub rows: usize,
    pub cols: usize,
    /// Taxel spacing in meters.
    #[serde(default = "default_pitch")]
    pub pitch: f64,
}

fn default_pitch() -> f64 {
    0.015
}

impl Default for GridGeometry {
    fn default() -> Self {
        Self {
            rows: 10,
            cols: 10,
            pitch: default_pitch(),
        }
    }
}

impl GridGeometry {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        let g = Self {
            rows,
            cols,
            pitch: default_pitch(),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(domain(format!(
                "grid must have at least one row and column, got {}x{}",
                self.rows, self.cols
            )));
        }
        if !(self.pitch > 0.0 && self.pitch.is_finite()) {
            return Err(domain(format!("pitch must be positive, got {}", self.pitch)));
        }
        Ok(())
    }

    /// Pixel count N.
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Inverse of [`linear_index`].
    pub fn coords(&self, index: usize) -> Result<(usize, usize)> {
        if index >= self.len() {
            return Err(domain(format!(
                "index {index} outside grid of {} pixels",
                self.len()
            )));
        }
        Ok((index / self.cols, index % self.cols))
    }
}

/// Row-major linear index of `(row, col)`.
pub fn linear_index(row: usize, col: usize, geometry: &GridGeometry) -> Result<usize> {
    if row >= geometry.rows || col >= geometry.cols {
        return Err(domain(format!(
            "cell ({row}, {col}) outside {}x{} grid",
            geometry.rows, geometry.cols
        )));
    }
    Ok(row * geometry.cols + col)
}

/// Electrical parameters of the summing stage and the piezoresistive layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CircuitParams {
    /// Summing amplifier feedback resistor, ohms.
    pub feedback_resistance: f64,
    /// Pixel supply, volts. Weights span `[-supply, +supply]`.
    pub supply: f64,
    /// Unloaded taxel resistance, ohms.
    pub rest_resistance: f64,
    /// Fully compressed taxel resistance, ohms.
    pub min_resistance: f64,
    /// Pressure constant of the exponential resistance decay, pascals.
    pub pressure_scale: f64,
}

impl Default for CircuitParams {
    fn default() -> Self {
        Self {
            feedback_resistance: 4700.0,
            supply: 3.3,
            rest_resistance: 1e6,
            min_resistance: 1e3,
            pressure_scale: 1e4,
        }
    }
}

impl CircuitParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("feedback_resistance", self.feedback_resistance),
            ("supply", self.supply),
            ("rest_resistance", self.rest_resistance),
            ("min_resistance", self.min_resistance),
            ("pressure_scale", self.pressure_scale),
        ];
        for (name, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.min_resistance >= self.rest_resistance {
            return Err(domain("min_resistance must be below rest_resistance"));
        }
        Ok(())
    }

    /// Conductance of an untouched taxel.
    pub fn rest_conductance(&self) -> f64 {
        1.0 / self.rest_resistance
    }

    /// Taxel resistance under pressure `p` (pascals).
    pub fn resistance_at(&self, p: f64) -> f64 {
        self.min_resistance
            + (self.rest_resistance - self.min_resistance) * (-p / self.pressure_scale).exp()
    }

    /// Inverse of the transduction curve. Conductances at or below rest map to
    /// zero pressure; at or above saturation to infinity.
    pub fn pressure_from_conductance(&self, conductance: f64) -> f64 {
        if conductance <= self.rest_conductance() {
            return 0.0;
        }
        let r = 1.0 / conductance;
        if r <= self.min_resistance {
            return f64::INFINITY;
        }
        let frac = (r - self.min_resistance) / (self.rest_resistance - self.min_resistance);
        -self.pressure_scale * frac.ln()
    }
}

/// C = 1/R.
pub fn to_conductance(resistance: f64) -> Result<f64> {
    if !(resistance > 0.0 && resistance.is_finite()) {
        return Err(domain(format!(
            "resistance must be positive and finite, got {resistance}"
        )));
    }
    Ok(1.0 / resistance)
}

fn check_values(name: &str, values: &[f64], geometry: &GridGeometry) -> Result<()> {
    geometry.validate()?;
    if values.len() != geometry.len() {
        return Err(domain(format!(
            "{name} has {} values, grid needs {}",
            values.len(),
            geometry.len()
        )));
    }
    if let Some((i, v)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
    {
        return Err(domain(format!("{name}[{i}] = {v} is negative or not finite")));
    }
    Ok(())
}

/// Per-taxel conductances (siemens) at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct TactileFrame {
    geometry: GridGeometry,
    conductance: Vec<f64>,
    timestamp: f64,
}

impl TactileFrame {
    pub fn new(geometry: GridGeometry, conductance: Vec<f64>, timestamp: f64) -> Result<Self> {
        check_values("conductance", &conductance, &geometry)?;
        Ok(Self {
            geometry,
            conductance,
            timestamp,
        })
    }

    pub fn zeros(geometry: GridGeometry) -> Self {
        Self {
            geometry,
            conductance: vec![0.0; geometry.len()],
            timestamp: 0.0,
        }
    }

    /// Every pixel at the rest conductance of `circuit`.
    pub fn at_rest(geometry: GridGeometry, circuit: &CircuitParams) -> Self {
        Self {
            geometry,
            conductance: vec![circuit.rest_conductance(); geometry.len()],
            timestamp: 0.0,
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn conductance(&self) -> &[f64] {
        &self.conductance
    }

    pub fn timestamp(&self) -> f64 {
        self.timestamp
    }

    pub fn with_timestamp(mut self, t: f64) -> Self {
        self.timestamp = t;
        self
    }

    pub fn at(&self, row: usize, col: usize) -> Result<f64> {
        Ok(self.conductance[linear_index(row, col, &self.geometry)?])
    }

    /// Multiplies every conductance by a non-negative factor.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.geometry,
            self.conductance.iter().map(|c| c * factor).collect(),
            self.timestamp,
        )
    }

    pub fn norm(&self) -> f64 {
        self.conductance.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.conductance
    }
}

/// Ground-truth pressure field (pascals).
#[derive(Debug, Clone, PartialEq)]
pub struct PressureMap {
    geometry: GridGeometry,
    pressure: Vec<f64>,
}

impl PressureMap {
    pub fn new(geometry: GridGeometry, pressure: Vec<f64>) -> Result<Self> {
        check_values("pressure", &pressure, &geometry)?;
        Ok(Self { geometry, pressure })
    }

    pub fn zeros(geometry: GridGeometry) -> Self {
        Self {
            geometry,
            pressure: vec![0.0; geometry.len()],
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn pressure(&self) -> &[f64] {
        &self.pressure
    }

    pub fn max(&self) -> f64 {
        self.pressure.iter().copied().fold(0.0, f64::max)
    }

    /// Number of pixels carrying any pressure.
    pub fn contact_area(&self) -> usize {
        self.pressure.iter().filter(|p| **p > 0.0).count()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.geometry,
            self.pressure.iter().map(|p| p * factor).collect(),
        )
    }
}

/// Maps a pressure field to taxel conductances through
/// `R(p) = R_min + (R_off - R_min) exp(-p / p0)`.
pub fn transduce(p: &PressureMap, params: &CircuitParams) -> Result<TactileFrame> {
    params.validate()?;
    let conductance = p
        .pressure
        .iter()
        .map(|&pa| 1.0 / params.resistance_at(pa))
        .collect();
    TactileFrame::new(p.geometry, conductance, 0.0)
}
