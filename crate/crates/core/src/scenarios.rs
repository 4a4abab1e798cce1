//! Synthetic ground truth: parametric object shapes, press and bounce events,
//! training corpora and the interpolated raster-scan baseline.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dictionary::TrainingCorpus;
use crate::error::{domain, Result};
use crate::frontend::{AcquisitionConfig, FrameSource};
use crate::perception::ObjectLibrary;
use crate::tactile::{transduce, CircuitParams, GridGeometry, PressureMap, TactileFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeKind {
    Disk,
    Square,
    Rect,
    T,
    L,
    Cross,
    Ring,
    Triangle,
    BarH,
    BarV,
    SmallDisk,
    LargeDisk,
    U,
    H,
    PlusSmall,
    Corner,
    Dot,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 17] = [
        ShapeKind::Disk,
        ShapeKind::Square,
        ShapeKind::Rect,
        ShapeKind::T,
        ShapeKind::L,
        ShapeKind::Cross,
        ShapeKind::Ring,
        ShapeKind::Triangle,
        ShapeKind::BarH,
        ShapeKind::BarV,
        ShapeKind::SmallDisk,
        ShapeKind::LargeDisk,
        ShapeKind::U,
        ShapeKind::H,
        ShapeKind::PlusSmall,
        ShapeKind::Corner,
        ShapeKind::Dot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Disk => "disk",
            ShapeKind::Square => "square",
            ShapeKind::Rect => "rect",
            ShapeKind::T => "T",
            ShapeKind::L => "L",
            ShapeKind::Cross => "cross",
            ShapeKind::Ring => "ring",
            ShapeKind::Triangle => "triangle",
            ShapeKind::BarH => "bar-h",
            ShapeKind::BarV => "bar-v",
            ShapeKind::SmallDisk => "small-disk",
            ShapeKind::LargeDisk => "large-disk",
            ShapeKind::U => "U",
            ShapeKind::H => "H",
            ShapeKind::PlusSmall => "plus-small",
            ShapeKind::Corner => "corner",
            ShapeKind::Dot => "dot",
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A shape pressed into the array with uniform pressure over its footprint.
///
/// The footprint lives in a `height x width` box centered at `center`
/// (pixel-center coordinates). A pixel is inside the box when
/// `center - size/2 <= coord < center + size/2` on both axes; curved kinds
/// use the inscribed ellipse instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    pub center: (f64, f64),
    pub height: f64,
    pub width: f64,
    /// Stroke width for T, L, U, H, cross, ring and plus shapes.
    #[serde(default = "default_thickness")]
    pub thickness: f64,
    pub peak_pressure: f64,
    /// Library label; defaults to the kind name.
    #[serde(default)]
    pub label: Option<String>,
}

fn default_thickness() -> f64 {
    2.0
}

/// Default peak contact pressure for objects, pascals.
pub const DEFAULT_PEAK_PRESSURE: f64 = 3e4;

impl ShapeSpec {
    pub fn new(kind: ShapeKind, center: (f64, f64), height: f64, width: f64) -> Self {
        Self {
            kind,
            center,
            height,
            width,
            thickness: default_thickness(),
            peak_pressure: DEFAULT_PEAK_PRESSURE,
            label: None,
        }
    }

    pub fn with_thickness(mut self, t: f64) -> Self {
        self.thickness = t;
        self
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.kind.name().to_string())
    }

    fn contains(&self, u: f64, v: f64) -> bool {
        let (hh, hw, t) = (self.height / 2.0, self.width / 2.0, self.thickness);
        let in_box = (-hh..hh).contains(&u) && (-hw..hw).contains(&v);
        let ellipse = |a: f64, b: f64| a > 0.0 && b > 0.0 && (u / a).powi(2) + (v / b).powi(2) <= 1.0;
        let stem_v = (-t / 2.0..t / 2.0).contains(&v);
        let stem_u = (-t / 2.0..t / 2.0).contains(&u);
        match self.kind {
            ShapeKind::Disk | ShapeKind::SmallDisk | ShapeKind::LargeDisk => ellipse(hh, hw),
            ShapeKind::Square | ShapeKind::Rect | ShapeKind::BarH | ShapeKind::BarV => in_box,
            ShapeKind::Corner | ShapeKind::Dot => in_box,
            ShapeKind::T => in_box && (u < -hh + t || stem_v),
            ShapeKind::L => in_box && (v < -hw + t || u >= hh - t),
            ShapeKind::U => in_box && (v < -hw + t || v >= hw - t || u >= hh - t),
            ShapeKind::H => in_box && (v < -hw + t || v >= hw - t || stem_u),
            ShapeKind::PlusSmall => in_box && (stem_u || stem_v),
            ShapeKind::Cross => {
                in_box && ((u - v).abs() <= t / 2.0 || (u + v).abs() <= t / 2.0)
            }
            ShapeKind::Ring => ellipse(hh, hw) && !ellipse(hh - t, hw - t),
            ShapeKind::Triangle => in_box && v.abs() <= hw * (u + hh) / self.height,
        }
    }

    fn check_fits(&self, geometry: &GridGeometry) -> Result<()> {
        let fits = |c: f64, size: f64, dim: usize| {
            c - size / 2.0 >= -0.5 - 1e-12 && c + size / 2.0 <= dim as f64 - 0.5 + 1e-12
        };
        if !(self.height > 0.0 && self.width > 0.0) {
            return Err(domain(format!("{} has non-positive size", self.label())));
        }
        if !fits(self.center.0, self.height, geometry.rows)
            || !fits(self.center.1, self.width, geometry.cols)
        {
            return Err(domain(format!(
                "{} footprint exceeds the {}x{} grid",
                self.label(),
                geometry.rows,
                geometry.cols
            )));
        }
        Ok(())
    }

    /// Pressure map at peak load.
    pub fn render(&self, geometry: &GridGeometry) -> Result<PressureMap> {
        self.check_fits(geometry)?;
        if !(self.peak_pressure >= 0.0 && self.peak_pressure.is_finite()) {
            return Err(domain("peak pressure must be non-negative"));
        }
        let mut p = vec![0.0; geometry.len()];
        for r in 0..geometry.rows {
            for c in 0..geometry.cols {
                if self.contains(r as f64 - self.center.0, c as f64 - self.center.1) {
                    p[r * geometry.cols + c] = self.peak_pressure;
                }
            }
        }
        if p.iter().all(|&x| x == 0.0) && self.peak_pressure > 0.0 {
            return Err(domain(format!("{} covers no pixel", self.label())));
        }
        PressureMap::new(*geometry, p)
    }

    /// Copy moved by `(dr, dc)` pixels.
    pub fn shifted(&self, dr: f64, dc: f64) -> Self {
        Self {
            center: (self.center.0 + dr, self.center.1 + dc),
            ..self.clone()
        }
    }

    /// Per-trial variation: center moved by up to `center_jitter` pixels per
    /// axis (kept inside the grid) and peak scaled by up to `peak_jitter`.
    pub fn jittered<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        center_jitter: f64,
        peak_jitter: f64,
        geometry: &GridGeometry,
    ) -> Self {
        let mut draw = |a: f64| if a > 0.0 { rng.random_range(-a..=a) } else { 0.0 };
        let dr = draw(center_jitter);
        let dc = draw(center_jitter);
        let scale = 1.0 + draw(peak_jitter);
        let clamp = |c: f64, size: f64, dim: usize| {
            let lo = size / 2.0 - 0.5;
            let hi = dim as f64 - 0.5 - size / 2.0;
            if lo <= hi {
                c.clamp(lo, hi)
            } else {
                c
            }
        };
        Self {
            center: (
                clamp(self.center.0 + dr, self.height, geometry.rows),
                clamp(self.center.1 + dc, self.width, geometry.cols),
            ),
            peak_pressure: self.peak_pressure * scale,
            ..self.clone()
        }
    }
}

/// The 17 stand-in objects, laid out for a 10 x 10 array and scaled to other
/// grid sizes. Several cover at least 40% of the array.
pub fn default_shapes(geometry: &GridGeometry) -> Vec<ShapeSpec> {
    use ShapeKind::*;
    let sr = geometry.rows as f64 / 10.0;
    let sc = geometry.cols as f64 / 10.0;
    let spec = |kind, (r, c): (f64, f64), (h, w): (f64, f64), t: f64| {
        ShapeSpec::new(kind, ((r + 0.5) * sr - 0.5, (c + 0.5) * sc - 0.5), h * sr, w * sc)
            .with_thickness(t * sr.min(sc))
    };
    vec![
        spec(Disk, (4.5, 4.5), (6.0, 6.0), 2.0),
        spec(Square, (4.5, 4.5), (4.0, 4.0), 2.0),
        spec(Rect, (4.0, 4.5), (3.0, 8.0), 2.0),
        spec(T, (4.0, 4.5), (7.0, 8.0), 2.0),
        spec(L, (4.0, 4.5), (7.0, 6.0), 2.0),
        spec(Cross, (4.5, 4.5), (8.0, 8.0), 2.2),
        spec(Ring, (4.5, 4.5), (9.0, 9.0), 1.6),
        spec(Triangle, (4.5, 4.5), (8.0, 8.0), 2.0),
        spec(BarH, (4.5, 4.5), (2.0, 8.0), 2.0),
        spec(BarV, (4.5, 4.5), (8.0, 2.0), 2.0),
        spec(SmallDisk, (4.5, 4.5), (4.0, 4.0), 2.0),
        spec(LargeDisk, (4.5, 4.5), (10.0, 10.0), 2.0),
        spec(U, (4.5, 4.5), (8.0, 8.0), 2.0),
        spec(H, (4.5, 4.5), (8.0, 8.0), 2.0),
        spec(PlusSmall, (4.0, 4.0), (5.0, 5.0), 1.0),
        spec(Corner, (8.0, 8.0), (3.0, 3.0), 2.0),
        spec(Dot, (4.0, 4.0), (1.0, 1.0), 2.0),
    ]
}

/// Renders and transduces every spec into a single-exemplar library.
pub fn shape_library(
    geometry: &GridGeometry,
    specs: &[ShapeSpec],
    circuit: &CircuitParams,
) -> Result<ObjectLibrary> {
    let mut library = ObjectLibrary::new();
    for (i, s) in specs.iter().enumerate() {
        if specs[..i].iter().any(|o| o.label() == s.label()) {
            return Err(domain(format!("duplicate shape label {}", s.label())));
        }
        library.add(s.label(), transduce(&s.render(geometry)?, circuit)?)?;
    }
    Ok(library)
}

/// Anything that yields a ground-truth pressure field at time `t`.
pub trait PressureSource {
    fn pressure_at(&self, t: f64) -> PressureMap;
}

/// Presents a pressure source as conductance frames.
#[derive(Debug, Clone)]
pub struct Transduced<S> {
    pub source: S,
    pub circuit: CircuitParams,
}

impl<S: PressureSource> FrameSource for Transduced<S> {
    fn frame_at(&self, t: f64) -> TactileFrame {
        let p = self.source.pressure_at(t);
        // circuit was validated when the scene was built
        transduce(&p, &self.circuit)
            .expect("validated circuit")
            .with_timestamp(t)
    }
}

/// Trapezoidal indentation of one shape.
#[derive(Debug, Clone)]
pub struct PressEvent {
    pub shape: ShapeSpec,
    pub onset: f64,
    pub rise: f64,
    pub hold: f64,
    pub release: f64,
    peak: PressureMap,
}

pub fn press_event(
    shape: &ShapeSpec,
    geometry: &GridGeometry,
    rise: f64,
    hold: f64,
    release: f64,
) -> Result<PressEvent> {
    if [rise, hold, release].iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
        return Err(domain("press durations must be non-negative"));
    }
    if rise + hold + release <= 0.0 {
        return Err(domain("press must last a positive time"));
    }
    Ok(PressEvent {
        shape: shape.clone(),
        onset: 0.0,
        rise,
        hold,
        release,
        peak: shape.render(geometry)?,
    })
}

impl PressEvent {
    pub fn with_onset(mut self, onset: f64) -> Self {
        self.onset = onset;
        self
    }

    /// Load fraction in `[0, 1]`.
    pub fn envelope(&self, t: f64) -> f64 {
        let tau = t - self.onset;
        if tau < 0.0 {
            0.0
        } else if tau < self.rise {
            tau / self.rise
        } else if tau <= self.rise + self.hold {
            1.0
        } else if tau < self.rise + self.hold + self.release {
            1.0 - (tau - self.rise - self.hold) / self.release
        } else {
            0.0
        }
    }

    pub fn peak_map(&self) -> &PressureMap {
        &self.peak
    }

    pub fn duration(&self) -> f64 {
        self.rise + self.hold + self.release
    }

    /// Start of the hold phase.
    pub fn hold_start(&self) -> f64 {
        self.onset + self.rise
    }
}

impl PressureSource for PressEvent {
    fn pressure_at(&self, t: f64) -> PressureMap {
        let e = self.envelope(t);
        if e == 1.0 {
            return self.peak.clone();
        }
        self.peak.scaled(e).expect("envelope is non-negative")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BounceSpec {
    /// Seconds in contact.
    pub contact_duration: f64,
    pub peak_pressure: f64,
    /// `(row, col)` in pixel coordinates.
    pub contact_center: (f64, f64),
    /// Contact radius at peak load, pixels.
    pub max_radius: f64,
    /// Gaussian spread of the pressure profile, pixels.
    pub sigma: f64,
    /// Time of first contact.
    pub onset: f64,
}

impl Default for BounceSpec {
    fn default() -> Self {
        Self {
            contact_duration: 0.008,
            peak_pressure: DEFAULT_PEAK_PRESSURE,
            contact_center: (4.5, 4.5),
            max_radius: 3.0,
            sigma: 1.5,
            onset: 0.0,
        }
    }
}

/// A ball hitting the array: half-sine load with a Gaussian footprint whose
/// radius grows with the cube root of the load.
#[derive(Debug, Clone)]
pub struct BounceEvent {
    pub spec: BounceSpec,
    geometry: GridGeometry,
}

pub fn bounce_event(spec: &BounceSpec, geometry: &GridGeometry) -> Result<BounceEvent> {
    geometry.validate()?;
    if !(spec.contact_duration > 0.0) {
        return Err(domain("contact duration must be positive"));
    }
    if !(spec.peak_pressure >= 0.0 && spec.max_radius > 0.0 && spec.sigma > 0.0) {
        return Err(domain("bounce pressure, radius and sigma must be positive"));
    }
    let (r, c) = spec.contact_center;
    if !(r >= 0.0 && r <= (geometry.rows - 1) as f64 && c >= 0.0 && c <= (geometry.cols - 1) as f64) {
        return Err(domain("contact center outside the grid"));
    }
    Ok(BounceEvent {
        spec: spec.clone(),
        geometry: *geometry,
    })
}

impl BounceEvent {
    pub fn envelope(&self, t: f64) -> f64 {
        let tau = t - self.spec.onset;
        if tau <= 0.0 || tau >= self.spec.contact_duration {
            0.0
        } else {
            (PI * tau / self.spec.contact_duration).sin()
        }
    }

    pub fn contact_radius(&self, t: f64) -> f64 {
        self.spec.max_radius * self.envelope(t).cbrt()
    }

    pub fn contact_window(&self) -> (f64, f64) {
        (self.spec.onset, self.spec.onset + self.spec.contact_duration)
    }
}

impl PressureSource for BounceEvent {
    fn pressure_at(&self, t: f64) -> PressureMap {
        let g = self.geometry;
        let env = self.envelope(t);
        if env == 0.0 {
            return PressureMap::zeros(g);
        }
        let radius = self.contact_radius(t);
        let (cr, cc) = self.spec.contact_center;
        let two_s2 = 2.0 * self.spec.sigma * self.spec.sigma;
        let p = (0..g.len())
            .map(|i| {
                let (r, c) = ((i / g.cols) as f64, (i % g.cols) as f64);
                let d2 = (r - cr).powi(2) + (c - cc).powi(2);
                if d2.sqrt() <= radius {
                    self.spec.peak_pressure * env * (-d2 / two_s2).exp()
                } else {
                    0.0
                }
            })
            .collect();
        PressureMap::new(g, p).expect("finite pressure")
    }
}

/// Training frames: every shape at every in-grid integer shift of up to
/// `max_shift` pixels and each of `load_levels`, plus Gaussian contact blobs
/// on a lattice of centers `blob_spacing` pixels apart.
pub fn synthetic_corpus(
    geometry: &GridGeometry,
    circuit: &CircuitParams,
    specs: &[ShapeSpec],
    max_shift: i32,
    load_levels: &[f64],
    blob: &BounceSpec,
    blob_spacing: f64,
) -> Result<TrainingCorpus> {
    if !(blob_spacing > 0.0 && blob_spacing.is_finite()) {
        return Err(domain(format!("blob spacing {blob_spacing} must be positive")));
    }
    let mut corpus = TrainingCorpus::default();
    for spec in specs {
        for dr in -max_shift..=max_shift {
            for dc in -max_shift..=max_shift {
                let moved = spec.shifted(f64::from(dr), f64::from(dc));
                let Ok(map) = moved.render(geometry) else { continue };
                for &level in load_levels {
                    let frame = transduce(&map.scaled(level)?, circuit)?;
                    corpus.push(frame, Some(spec.label()))?;
                }
            }
        }
    }
    let steps = |dim: usize| {
        let count = ((dim - 1) as f64 / blob_spacing + 1e-9).floor() as usize + 1;
        (0..count).map(|i| i as f64 * blob_spacing).collect::<Vec<_>>()
    };
    for &r in &steps(geometry.rows) {
        for &c in &steps(geometry.cols) {
            for &level in load_levels {
                let spec = BounceSpec {
                    contact_center: (r, c),
                    peak_pressure: blob.peak_pressure * level,
                    ..blob.clone()
                };
                let ev = bounce_event(&spec, geometry)?;
                let t = spec.onset + spec.contact_duration / 2.0;
                corpus.push(transduce(&ev.pressure_at(t), circuit)?, Some("contact".into()))?;
            }
        }
    }
    Ok(corpus)
}

/// Sample lattice `(rows, cols)` with the most points not exceeding `m`,
/// preferring the grid's aspect ratio.
fn raster_lattice(geometry: &GridGeometry, m: usize) -> (usize, usize) {
    let aspect = geometry.rows as f64 / geometry.cols as f64;
    let mut best = (1, 1);
    let mut best_score = (0usize, f64::NEG_INFINITY);
    for gr in 1..=geometry.rows.min(m) {
        let gc = (m / gr).min(geometry.cols);
        if gc == 0 {
            continue;
        }
        let score = (gr * gc, -((gr as f64 / gc as f64) / aspect).ln().abs());
        if score.0 > best_score.0 || (score.0 == best_score.0 && score.1 > best_score.1) {
            best = (gr, gc);
            best_score = score;
        }
    }
    best
}

fn lattice_positions(count: usize, dim: usize) -> Vec<usize> {
    if count == 1 {
        return vec![(dim - 1) / 2];
    }
    (0..count)
        .map(|i| ((i * (dim - 1)) as f64 / (count - 1) as f64).round() as usize)
        .collect()
}

/// Linear interpolation weights of `x` between sorted sample positions.
fn bracket(positions: &[usize], x: usize) -> (usize, usize, f64) {
    if x <= positions[0] {
        return (0, 0, 0.0);
    }
    let last = positions.len() - 1;
    if x >= positions[last] {
        return (last, last, 0.0);
    }
    let hi = positions.iter().position(|&p| p >= x).unwrap();
    if positions[hi] == x {
        return (hi, hi, 0.0);
    }
    let lo = hi - 1;
    let w = (x - positions[lo]) as f64 / (positions[hi] - positions[lo]) as f64;
    (lo, hi, w)
}

/// Down-sampled raster scan: reads `m` pixels on a uniform lattice and
/// bilinearly interpolates the rest. Returns the estimate and the scan time
/// at one pixel per clock tick.
pub fn raster_baseline(
    truth: &TactileFrame,
    m: usize,
    cfg: &AcquisitionConfig,
) -> Result<(TactileFrame, f64)> {
    let g = *truth.geometry();
    if m == 0 || m > g.len() {
        return Err(domain(format!("raster sample count {m} outside 1..={}", g.len())));
    }
    let (gr, gc) = raster_lattice(&g, m);
    let rows = lattice_positions(gr, g.rows);
    let cols = lattice_positions(gc, g.cols);
    let sample = |i: usize, j: usize| truth.conductance()[rows[i] * g.cols + cols[j]];
    let mut out = vec![0.0; g.len()];
    for r in 0..g.rows {
        let (r0, r1, wr) = bracket(&rows, r);
        for c in 0..g.cols {
            let (c0, c1, wc) = bracket(&cols, c);
            let top = sample(r0, c0) * (1.0 - wc) + sample(r0, c1) * wc;
            let bottom = sample(r1, c0) * (1.0 - wc) + sample(r1, c1) * wc;
            out[r * g.cols + c] = top * (1.0 - wr) + bottom * wr;
        }
    }
    let frame = TactileFrame::new(g, out, truth.timestamp())?;
    Ok((frame, m as f64 / cfg.clock_hz))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::center_of_mass;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn g() -> GridGeometry {
        GridGeometry::default()
    }

    #[test]
    fn dot_is_one_pixel() {
        let dot = default_shapes(&g()).into_iter().find(|s| s.kind == ShapeKind::Dot).unwrap();
        assert_eq!(dot.render(&g()).unwrap().contact_area(), 1);
    }

    #[test]
    fn square_area() {
        let sq = ShapeSpec::new(ShapeKind::Square, (3.0, 3.0), 4.0, 4.0);
        let map = sq.render(&g()).unwrap();
        assert_eq!(map.contact_area(), 16);
        assert!(map.max() == DEFAULT_PEAK_PRESSURE);
    }

    #[test]
    fn footprint_outside_grid_rejected() {
        let sq = ShapeSpec::new(ShapeKind::Square, (8.5, 8.5), 4.0, 4.0);
        assert!(sq.render(&g()).is_err());
        assert!(shape_library(&g(), &[sq], &CircuitParams::default()).is_err());
    }

    #[test]
    fn default_library_is_distinct() {
        let specs = default_shapes(&g());
        assert_eq!(specs.len(), 17);
        let maps: Vec<PressureMap> = specs.iter().map(|s| s.render(&g()).unwrap()).collect();
        for (i, a) in maps.iter().enumerate() {
            for b in &maps[i + 1..] {
                let same = a
                    .pressure()
                    .iter()
                    .zip(b.pressure())
                    .all(|(x, y)| (*x > 0.0) == (*y > 0.0));
                assert!(!same);
            }
        }
        let large = maps.iter().filter(|m| m.contact_area() * 10 >= 4 * g().len()).count();
        let small = maps.len() - large;
        assert!(large >= 3 && small >= 3, "large {large} small {small}");
        let lib = shape_library(&g(), &specs, &CircuitParams::default()).unwrap();
        assert_eq!(lib.labels().len(), 17);
    }

    #[test]
    fn jitter_keeps_shapes_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for s in default_shapes(&g()) {
            for _ in 0..20 {
                let j = s.jittered(&mut rng, 0.5, 0.1, &g());
                assert!(j.render(&g()).is_ok(), "{}", s.label());
                assert!((j.peak_pressure / s.peak_pressure - 1.0).abs() <= 0.1 + 1e-12);
            }
        }
    }

    #[test]
    fn press_envelope() {
        let sq = ShapeSpec::new(ShapeKind::Square, (3.0, 3.0), 4.0, 4.0);
        let ev = press_event(&sq, &g(), 0.01, 0.02, 0.01).unwrap().with_onset(0.005);
        assert_eq!(ev.pressure_at(0.0).max(), 0.0);
        assert_eq!(ev.pressure_at(0.02), *ev.peak_map());
        let half = ev.pressure_at(0.01);
        assert!((half.max() - 0.5 * DEFAULT_PEAK_PRESSURE).abs() < 1e-9);
        assert_eq!(ev.pressure_at(0.05).max(), 0.0);
        // continuity at the phase boundaries, maximum equals the peak
        let mut top: f64 = 0.0;
        let mut prev = 0.0;
        for i in 0..=5000 {
            let e = ev.envelope(i as f64 * 1e-5);
            assert!((e - prev).abs() <= 1e-5 / 0.01 + 1e-12);
            prev = e;
            top = top.max(e);
        }
        assert_eq!(top, 1.0);
        assert!(press_event(&sq, &g(), 0.0, 0.0, 0.0).is_err());
        assert!(press_event(&sq, &g(), -1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn bounce_boundaries_and_peak() {
        let spec = BounceSpec {
            contact_center: (5.0, 4.0),
            ..Default::default()
        };
        let ev = bounce_event(&spec, &g()).unwrap();
        assert_eq!(ev.pressure_at(0.0).max(), 0.0);
        assert_eq!(ev.pressure_at(0.008).max(), 0.0);
        let mid = ev.pressure_at(0.004);
        assert!((mid.pressure()[54] - spec.peak_pressure).abs() < 1e-9);
        assert!((mid.max() - spec.peak_pressure).abs() < 1e-9);
        assert!(bounce_event(&BounceSpec { contact_center: (12.0, 1.0), ..Default::default() }, &g()).is_err());
    }

    #[test]
    fn bounce_centroid_is_contact_center() {
        let circuit = CircuitParams::default();
        for center in [(4.5, 4.5), (5.0, 5.0), (3.0, 6.0)] {
            let spec = BounceSpec { contact_center: center, ..Default::default() };
            let scene = Transduced { source: bounce_event(&spec, &g()).unwrap(), circuit };
            for k in 1..20 {
                let t = 0.008 * k as f64 / 20.0;
                let (r, c) = center_of_mass(&scene.frame_at(t), circuit.rest_conductance()).unwrap();
                assert!((r - center.0).abs() < 1e-9 && (c - center.1).abs() < 1e-9, "{center:?} t={t}");
            }
        }
    }

    #[test]
    fn bounce_impulse_is_linear_in_peak() {
        let impulse = |peak: f64| {
            let ev = bounce_event(&BounceSpec { peak_pressure: peak, ..Default::default() }, &g()).unwrap();
            (0..800).map(|i| ev.pressure_at(i as f64 * 1e-5).pressure().iter().sum::<f64>()).sum::<f64>()
        };
        let a = impulse(1e4);
        let b = impulse(3e4);
        assert!((b / a - 3.0).abs() < 1e-12);
    }

    #[test]
    fn raster_full_copy_and_degenerate() {
        let cfg = AcquisitionConfig::default();
        let lib = shape_library(&g(), &default_shapes(&g()), &CircuitParams::default()).unwrap();
        let (_, truth) = lib.exemplars().nth(3).unwrap();
        let (copy, t) = raster_baseline(truth, 100, &cfg).unwrap();
        assert_eq!(copy.conductance(), truth.conductance());
        assert!((t - 100.0 / 70_000.0).abs() < 1e-15);
        let (one, _) = raster_baseline(truth, 1, &cfg).unwrap();
        let v = one.conductance()[0];
        assert!(one.conductance().iter().all(|&x| x == v));
        assert!(raster_baseline(truth, 0, &cfg).is_err());
        assert!(raster_baseline(truth, 101, &cfg).is_err());
    }

    #[test]
    fn raster_constant_is_exact() {
        let cfg = AcquisitionConfig::default();
        let flat = TactileFrame::new(g(), vec![3.5e-6; 100], 0.0).unwrap();
        for m in 1..=100 {
            let (est, _) = raster_baseline(&flat, m, &cfg).unwrap();
            assert!(est.conductance().iter().all(|&x| (x - 3.5e-6).abs() < 1e-18), "m={m}");
        }
    }

    #[test]
    fn raster_error_shrinks_on_smooth_frames() {
        let cfg = AcquisitionConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ms = [4usize, 9, 16, 25, 36, 49, 64, 81, 100];
        let mut mean_err = vec![0.0; ms.len()];
        for _ in 0..40 {
            let (cr, cc): (f64, f64) = (rng.random_range(2.0..7.0), rng.random_range(2.0..7.0));
            let sigma: f64 = rng.random_range(1.5..3.0);
            let values = (0..g().len())
                .map(|i| {
                    let (r, c) = g().coords(i).unwrap();
                    let d2 = (r as f64 - cr).powi(2) + (c as f64 - cc).powi(2);
                    1e-4 * (-d2 / (2.0 * sigma * sigma)).exp()
                })
                .collect();
            let truth = TactileFrame::new(g(), values, 0.0).unwrap();
            for (k, &m) in ms.iter().enumerate() {
                let (est, _) = raster_baseline(&truth, m, &cfg).unwrap();
                let err: f64 = est.conductance().iter().zip(truth.conductance()).map(|(a, b)| (a - b).powi(2)).sum();
                mean_err[k] += err.sqrt() / 40.0;
            }
        }
        for w in mean_err.windows(2) {
            assert!(w[1] <= w[0] * 1.05, "{mean_err:?}");
        }
        assert_eq!(*mean_err.last().unwrap(), 0.0);
    }

    #[test]
    fn corpus_is_labeled_and_uniform() {
        let corpus = synthetic_corpus(
            &g(),
            &CircuitParams::default(),
            &default_shapes(&g()),
            2,
            &[1.0],
            &BounceSpec::default(),
            1.0,
        )
        .unwrap();
        assert!(corpus.len() > 100);
        assert!(corpus.labels().iter().all(|l| l.is_some()));
    }
}
