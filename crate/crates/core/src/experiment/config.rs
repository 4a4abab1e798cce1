//! TOML experiment configuration.
//!
//! Every section is optional and falls back to the defaults below; unknown
//! keys are rejected. See `configs/default.toml` for a complete example.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dictionary::KsvdParams;
use crate::error::{Error, Result};
use crate::frontend::AcquisitionConfig;
use crate::scenarios::{default_shapes, BounceSpec, ShapeSpec};
use crate::tactile::{CircuitParams, GridGeometry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcquisitionSection {
    pub clock_hz: f64,
    pub adc_bits: u32,
    pub adc_range: f64,
    pub saturation: f64,
    /// Noise as a fraction of the RMS noiseless measurement of the study's
    /// reference scenes.
    pub noise_fraction: f64,
    /// Absolute noise in volts; overrides `noise_fraction` when set.
    pub noise_sigma: Option<f64>,
}

impl Default for AcquisitionSection {
    fn default() -> Self {
        let a = AcquisitionConfig::default();
        Self {
            clock_hz: a.clock_hz,
            adc_bits: a.adc_bits,
            adc_range: a.adc_range,
            saturation: a.saturation,
            noise_fraction: 0.01,
            noise_sigma: None,
        }
    }
}

impl AcquisitionSection {
    /// Front-end settings with the given noise level.
    pub fn frontend(&self, noise_sigma: f64) -> AcquisitionConfig {
        AcquisitionConfig {
            clock_hz: self.clock_hz,
            adc_bits: self.adc_bits,
            adc_range: self.adc_range,
            noise_sigma,
            saturation: self.saturation,
        }
    }

    /// Noise for scenes whose noiseless measurements have RMS `typical`.
    pub fn noise_for(&self, typical: f64) -> f64 {
        self.noise_sigma.unwrap_or(self.noise_fraction * typical)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DictionarySection {
    /// Dictionary file. Relative paths resolve against the output directory.
    pub path: PathBuf,
    pub atoms: usize,
    pub sparsity: usize,
    pub iterations: usize,
    /// K-SVD seed; derived from the master seed when absent.
    pub seed: Option<u64>,
    pub min_improvement: f64,
    pub amp_threshold: f64,
    pub coherence_threshold: f64,
    /// Training shapes are replicated at every integer shift up to this.
    pub max_shift: i32,
    /// Load levels (fractions of peak) for training frames.
    pub load_levels: Vec<f64>,
    /// Distance in pixels between training contact-blob centers.
    pub blob_spacing: f64,
}

impl Default for DictionarySection {
    fn default() -> Self {
        let k = KsvdParams::default();
        Self {
            path: PathBuf::from("dictionary.spts"),
            atoms: k.atoms,
            sparsity: k.sparsity,
            iterations: k.iterations,
            seed: None,
            min_improvement: k.min_improvement,
            amp_threshold: 0.1,
            coherence_threshold: 0.95,
            max_shift: 0,
            load_levels: vec![1.0],
            blob_spacing: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PressSection {
    pub rise: f64,
    pub hold: f64,
    pub release: f64,
    /// Per-trial center jitter, pixels per axis.
    pub center_jitter: f64,
    /// Per-trial relative peak jitter.
    pub peak_jitter: f64,
}

impl Default for PressSection {
    fn default() -> Self {
        Self {
            rise: 0.005,
            hold: 0.04,
            release: 0.005,
            center_jitter: 0.5,
            peak_jitter: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifySection {
    pub m_sweep: Vec<usize>,
    pub trials: usize,
    /// Frames per majority vote.
    pub vote_window: usize,
}

impl Default for ClassifySection {
    fn default() -> Self {
        Self {
            m_sweep: vec![13, 20, 25, 50, 100],
            trials: 10,
            vote_window: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SupportSection {
    pub m_sweep: Vec<usize>,
    pub trials: usize,
    /// Binarization level as a fraction of each frame's maximum.
    pub threshold: f64,
    /// Shapes covering less than this fraction of the array count as small.
    pub small_area_fraction: f64,
    /// Accuracy that counts as "reached" when locating the plateau.
    pub target_accuracy: f64,
}

impl Default for SupportSection {
    fn default() -> Self {
        Self {
            m_sweep: (1..=10).map(|k| 5 * k).collect(),
            trials: 10,
            threshold: 0.3,
            small_area_fraction: 0.4,
            target_accuracy: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BounceSection {
    pub ball: BounceSpec,
    pub m_values: Vec<usize>,
    /// Recording time before and after contact, seconds.
    pub margin: f64,
}

impl Default for BounceSection {
    fn default() -> Self {
        Self {
            ball: BounceSpec::default(),
            m_values: vec![25, 50, 100],
            margin: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalizeSection {
    pub m_sweep: Vec<usize>,
    pub trials: usize,
    /// Contact centers are drawn uniformly within this many pixels of the
    /// array center on each axis.
    pub center_spread: f64,
}

impl Default for LocalizeSection {
    fn default() -> Self {
        Self {
            m_sweep: vec![3, 5, 7, 10, 15, 20, 25, 30, 40, 50],
            trials: 50,
            center_spread: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptSection {
    /// A shape label from the library, or `ball` for the bounce scene.
    pub scene: String,
    pub schedule: Vec<usize>,
    pub threshold: f64,
}

impl Default for AdaptSection {
    fn default() -> Self {
        let mut schedule: Vec<usize> = (2..=15).collect();
        schedule.extend((20..=100).step_by(10));
        Self {
            scene: "T".into(),
            schedule,
            threshold: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u32,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Permit sweep values above the pixel count.
    #[serde(default)]
    pub allow_overcomplete: bool,
    #[serde(default)]
    pub geometry: GridGeometry,
    #[serde(default)]
    pub circuit: CircuitParams,
    #[serde(default)]
    pub acquisition: AcquisitionSection,
    #[serde(default)]
    pub dictionary: DictionarySection,
    /// Object library; the 17 default shapes when empty.
    #[serde(default)]
    pub shapes: Vec<ShapeSpec>,
    #[serde(default)]
    pub press: PressSection,
    #[serde(default)]
    pub classify: ClassifySection,
    #[serde(default)]
    pub support: SupportSection,
    #[serde(default)]
    pub bounce: BounceSection,
    #[serde(default)]
    pub localize: LocalizeSection,
    #[serde(default)]
    pub adapt: AdaptSection,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("spts-out")
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    /// Defaults for everything except the seed.
    pub fn with_seed(master_seed: u32) -> Self {
        Self {
            master_seed,
            out_dir: default_out_dir(),
            allow_overcomplete: false,
            geometry: GridGeometry::default(),
            circuit: CircuitParams::default(),
            acquisition: AcquisitionSection::default(),
            dictionary: DictionarySection::default(),
            shapes: Vec::new(),
            press: PressSection::default(),
            classify: ClassifySection::default(),
            support: SupportSection::default(),
            bounce: BounceSection::default(),
            localize: LocalizeSection::default(),
            adapt: AdaptSection::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file. A relative `out_dir` resolves
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if cfg.out_dir.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.out_dir = dir.join(&cfg.out_dir);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    /// Configured shapes, or the default library for this geometry.
    pub fn shape_specs(&self) -> Vec<ShapeSpec> {
        if self.shapes.is_empty() {
            default_shapes(&self.geometry)
        } else {
            self.shapes.clone()
        }
    }

    pub fn ksvd_params(&self) -> KsvdParams {
        let d = &self.dictionary;
        KsvdParams {
            atoms: d.atoms,
            sparsity: d.sparsity,
            iterations: d.iterations,
            seed: d.seed.unwrap_or(u64::from(self.master_seed)),
            min_improvement: d.min_improvement,
        }
    }

    pub fn dictionary_path(&self) -> PathBuf {
        if self.dictionary.path.is_relative() {
            self.out_dir.join(&self.dictionary.path)
        } else {
            self.dictionary.path.clone()
        }
    }

    fn check_sweep(&self, name: &str, sweep: &[usize]) -> Result<()> {
        let n = self.geometry.len();
        if sweep.is_empty() {
            return Err(config_err(format!("{name} is empty")));
        }
        for &m in sweep {
            if m == 0 || (m > n && !self.allow_overcomplete) {
                return Err(config_err(format!(
                    "{name} value {m} outside 1..={n} (set allow_overcomplete to exceed N)"
                )));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| config_err(e.to_string());
        self.geometry.validate().map_err(wrap)?;
        self.circuit.validate().map_err(wrap)?;
        let a = &self.acquisition;
        a.frontend(a.noise_sigma.unwrap_or(0.0)).validate().map_err(wrap)?;
        if !(a.noise_fraction >= 0.0 && a.noise_fraction.is_finite()) {
            return Err(config_err("acquisition.noise_fraction must be non-negative"));
        }

        let d = &self.dictionary;
        if d.atoms == 0 || d.sparsity == 0 {
            return Err(config_err("dictionary.atoms and dictionary.sparsity must be positive"));
        }
        if !(0.0..=1.0).contains(&d.amp_threshold) || !(0.0..=1.0).contains(&d.coherence_threshold) {
            return Err(config_err("dictionary thresholds must lie in [0, 1]"));
        }
        if d.max_shift < 0 {
            return Err(config_err("dictionary.max_shift must be non-negative"));
        }
        if d.load_levels.is_empty() || d.load_levels.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(config_err("dictionary.load_levels must be positive"));
        }
        if !(d.blob_spacing > 0.0 && d.blob_spacing.is_finite()) {
            return Err(config_err("dictionary.blob_spacing must be positive"));
        }

        let specs = self.shape_specs();
        for (i, s) in specs.iter().enumerate() {
            s.render(&self.geometry).map_err(wrap)?;
            if specs[..i].iter().any(|o| o.label() == s.label()) {
                return Err(config_err(format!("duplicate shape label {}", s.label())));
            }
        }

        let p = &self.press;
        if [p.rise, p.hold, p.release, p.center_jitter, p.peak_jitter]
            .iter()
            .any(|v| !(*v >= 0.0 && v.is_finite()))
        {
            return Err(config_err("press durations and jitters must be non-negative"));
        }
        if p.peak_jitter >= 1.0 {
            return Err(config_err("press.peak_jitter must be below 1"));
        }

        self.check_sweep("classify.m_sweep", &self.classify.m_sweep)?;
        if self.classify.trials == 0 || self.classify.vote_window == 0 {
            return Err(config_err("classify.trials and classify.vote_window must be positive"));
        }
        let hold_rows = (p.hold * a.clock_hz).floor() as usize;
        let longest = self.classify.m_sweep.iter().max().copied().unwrap_or(1);
        if longest * self.classify.vote_window > hold_rows {
            return Err(config_err(format!(
                "press.hold too short for {} frames of {longest} measurements",
                self.classify.vote_window
            )));
        }

        self.check_sweep("support.m_sweep", &self.support.m_sweep)?;
        let s = &self.support;
        if s.trials == 0 {
            return Err(config_err("support.trials must be positive"));
        }
        for (name, v) in [
            ("support.threshold", s.threshold),
            ("support.small_area_fraction", s.small_area_fraction),
            ("support.target_accuracy", s.target_accuracy),
            ("adapt.threshold", self.adapt.threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(config_err(format!("{name} must lie in [0, 1]")));
            }
        }

        crate::scenarios::bounce_event(&self.bounce.ball, &self.geometry).map_err(wrap)?;
        self.check_sweep("bounce.m_values", &self.bounce.m_values)?;
        if !(self.bounce.margin >= 0.0 && self.bounce.margin.is_finite()) {
            return Err(config_err("bounce.margin must be non-negative"));
        }

        self.check_sweep("localize.m_sweep", &self.localize.m_sweep)?;
        if self.localize.trials == 0 {
            return Err(config_err("localize.trials must be positive"));
        }
        let (cr, cc) = self.bounce.ball.contact_center;
        let spread = self.localize.center_spread;
        let inside = |c: f64, dim: usize| c - spread >= 0.0 && c + spread <= (dim - 1) as f64;
        if !(spread >= 0.0) || !inside(cr, self.geometry.rows) || !inside(cc, self.geometry.cols) {
            return Err(config_err("localize.center_spread takes contacts off the grid"));
        }

        self.check_sweep("adapt.schedule", &self.adapt.schedule)?;
        if self.adapt.schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config_err("adapt.schedule must be strictly increasing"));
        }
        if self.adapt.scene != "ball" && !specs.iter().any(|s| s.label() == self.adapt.scene) {
            return Err(config_err(format!(
                "adapt.scene {} is neither `ball` nor a shape label",
                self.adapt.scene
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::from_toml_str("master_seed = 3").unwrap();
        assert_eq!(cfg, ExperimentConfig::with_seed(3));
        assert_eq!(cfg.shape_specs().len(), 17);
        assert_eq!(cfg.ksvd_params().seed, 3);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml_str("master_seed = 1\nfoo = 2").is_err());
        assert!(ExperimentConfig::from_toml_str("master_seed = 1\n[classify]\nvotes = 2").is_err());
        assert!(ExperimentConfig::from_toml_str("[classify]\ntrials = 2").is_err());
    }

    #[test]
    fn sweep_bounds() {
        let bad = "master_seed = 1\n[support]\nm_sweep = [5, 101]";
        assert!(matches!(ExperimentConfig::from_toml_str(bad), Err(Error::Config(_))));
        let ok = "master_seed = 1\nallow_overcomplete = true\n[support]\nm_sweep = [5, 101]";
        assert!(ExperimentConfig::from_toml_str(ok).is_ok());
        assert!(ExperimentConfig::from_toml_str("master_seed = 1\n[adapt]\nschedule = [5, 5]").is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::with_seed(9);
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }
}
