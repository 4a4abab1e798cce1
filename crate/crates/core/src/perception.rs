//! Classification, support scoring, localization and dynamic-event metrics
//! on reconstructed frames.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::tactile::TactileFrame;

/// Labeled exemplar frames. Labels keep the order of first appearance, which
/// also decides classification ties.
#[derive(Debug, Clone, Default)]
pub struct ObjectLibrary {
    entries: Vec<(usize, TactileFrame)>,
    labels: Vec<String>,
}

impl ObjectLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, label: impl Into<String>, exemplar: TactileFrame) -> Result<()> {
        if let Some((_, first)) = self.entries.first() {
            if first.geometry() != exemplar.geometry() {
                return Err(domain("exemplar geometry differs from library"));
            }
        }
        let label = label.into();
        let idx = match self.labels.iter().position(|l| *l == label) {
            Some(i) => i,
            None => {
                self.labels.push(label);
                self.labels.len() - 1
            }
        };
        self.entries.push((idx, exemplar));
        Ok(())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn exemplars(&self) -> impl Iterator<Item = (&str, &TactileFrame)> {
        self.entries
            .iter()
            .map(|(i, f)| (self.labels[*i].as_str(), f))
    }

    /// First exemplar registered under `label`.
    pub fn exemplar(&self, label: &str) -> Option<&TactileFrame> {
        let idx = self.labels.iter().position(|l| l == label)?;
        self.entries.iter().find(|(i, _)| *i == idx).map(|(_, f)| f)
    }
}

fn unit_scaled(values: &[f64]) -> Vec<f64> {
    let n = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        values.iter().map(|v| v / n).collect()
    } else {
        values.to_vec()
    }
}

/// Squared distances closer than this count as ties, so that rescaling a
/// frame cannot flip the label through rounding.
const TIE_TOLERANCE: f64 = 1e-12;

/// Nearest exemplar after scaling both frames to unit norm.
pub fn classify<'a>(frame: &TactileFrame, library: &'a ObjectLibrary) -> Result<&'a str> {
    if library.is_empty() {
        return Err(domain("object library is empty"));
    }
    let probe = unit_scaled(frame.conductance());
    let mut best: Option<(f64, usize)> = None;
    for (label_idx, exemplar) in &library.entries {
        if exemplar.geometry() != frame.geometry() {
            return Err(domain("frame geometry differs from library"));
        }
        let e = unit_scaled(exemplar.conductance());
        let d2: f64 = probe.iter().zip(&e).map(|(a, b)| (a - b) * (a - b)).sum();
        let better = match best {
            None => true,
            Some((bd, bi)) => d2 < bd - TIE_TOLERANCE || (d2 <= bd + TIE_TOLERANCE && *label_idx < bi),
        };
        if better {
            best = Some((d2, *label_idx));
        }
    }
    Ok(&library.labels[best.unwrap().1])
}

/// Most frequent element; ties go to the one seen first.
pub fn vote<T: PartialEq + Clone>(window: &[T]) -> Result<T> {
    if window.is_empty() {
        return Err(domain("cannot vote on an empty window"));
    }
    let mut tallies: Vec<(&T, usize)> = Vec::new();
    for item in window {
        match tallies.iter_mut().find(|(t, _)| *t == item) {
            Some((_, n)) => *n += 1,
            None => tallies.push((item, 1)),
        }
    }
    let mut winner = tallies[0];
    for &(t, n) in &tallies[1..] {
        if n > winner.1 {
            winner = (t, n);
        }
    }
    Ok(winner.0.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportMetrics {
    /// Fraction of pixels where both maps agree.
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub iou: f64,
    /// Conductance above which a truth pixel counts as in contact.
    pub threshold_used: f64,
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_negative: usize,
}

/// Contact map: pixels at or above `threshold` times the frame's own maximum.
/// An all-zero frame has no contact.
pub fn binarize(frame: &TactileFrame, threshold: f64) -> (Vec<bool>, f64) {
    let max = frame.conductance().iter().copied().fold(0.0, f64::max);
    let level = threshold * max;
    let map = frame
        .conductance()
        .iter()
        .map(|&c| max > 0.0 && c > 0.0 && c >= level)
        .collect();
    (map, level)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Pixel-wise comparison of binarized contact maps.
pub fn support_accuracy(
    recon: &TactileFrame,
    truth: &TactileFrame,
    threshold: f64,
) -> Result<SupportMetrics> {
    if recon.geometry() != truth.geometry() {
        return Err(domain("frames differ in geometry"));
    }
    let (r, _) = binarize(recon, threshold);
    let (t, level) = binarize(truth, threshold);
    let (mut tp, mut fp, mut fnn, mut tn) = (0, 0, 0, 0);
    for (a, b) in r.iter().zip(&t) {
        match (a, b) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnn += 1,
            (false, false) => tn += 1,
        }
    }
    let n = r.len();
    // 0/0 only when neither map has contact; any miss makes the ratio 0.
    let guarded = |num: usize, den: usize| {
        if den == 0 && (tp + fp + fnn) > 0 {
            0.0
        } else {
            ratio(num, den)
        }
    };
    Ok(SupportMetrics {
        accuracy: (tp + tn) as f64 / n as f64,
        precision: guarded(tp, tp + fp),
        recall: guarded(tp, tp + fnn),
        iou: ratio(tp, tp + fp + fnn),
        threshold_used: level,
        true_positive: tp,
        false_positive: fp,
        false_negative: fnn,
        true_negative: tn,
    })
}

/// Intensity-weighted centroid `(row, col)` of conductance above `rest`.
pub fn center_of_mass(frame: &TactileFrame, rest: f64) -> Result<(f64, f64)> {
    let g = frame.geometry();
    let (mut total, mut rsum, mut csum) = (0.0, 0.0, 0.0);
    for (i, &c) in frame.conductance().iter().enumerate() {
        let w = (c - rest).max(0.0);
        if w > 0.0 {
            let (r, col) = (i / g.cols, i % g.cols);
            total += w;
            rsum += w * r as f64;
            csum += w * col as f64;
        }
    }
    if !(total > 0.0) {
        return Err(Error::NoContact);
    }
    Ok((rsum / total, csum / total))
}

/// Euclidean distance in pixel units.
pub fn localization_error(estimate: (f64, f64), truth: (f64, f64)) -> f64 {
    (estimate.0 - truth.0).hypot(estimate.1 - truth.1)
}

/// Mean over consecutive frame pairs of the mean absolute per-pixel change.
pub fn delta_pressure(frames: &[TactileFrame]) -> Result<f64> {
    if frames.len() < 2 {
        return Err(domain("need at least two frames"));
    }
    let g = frames[0].geometry();
    if frames.iter().any(|f| f.geometry() != g) {
        return Err(domain("frames differ in geometry"));
    }
    let total: f64 = frames
        .windows(2)
        .map(|w| {
            let a = w[0].conductance();
            let b = w[1].conductance();
            a.iter().zip(b).map(|(x, y)| (y - x).abs()).sum::<f64>() / a.len() as f64
        })
        .sum();
    Ok(total / (frames.len() - 1) as f64)
}

/// `(timestamp, max intensity above rest)` per frame.
pub fn max_pressure_trace(frames: &[TactileFrame], rest: f64) -> Vec<(f64, f64)> {
    frames
        .iter()
        .map(|f| {
            let peak = f
                .conductance()
                .iter()
                .map(|c| (c - rest).max(0.0))
                .fold(0.0, f64::max);
            (f.timestamp(), peak)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tactile::GridGeometry;
    use proptest::prelude::*;

    fn grid() -> GridGeometry {
        GridGeometry::default()
    }

    fn frame_with(pixels: &[(usize, usize, f64)]) -> TactileFrame {
        let g = grid();
        let mut v = vec![0.0; g.len()];
        for &(r, c, x) in pixels {
            v[r * g.cols + c] = x;
        }
        TactileFrame::new(g, v, 0.0).unwrap()
    }

    fn library() -> ObjectLibrary {
        let mut lib = ObjectLibrary::new();
        lib.add("a", frame_with(&[(0, 0, 1.0)])).unwrap();
        lib.add("b", frame_with(&[(0, 1, 1.0)])).unwrap();
        lib.add("c", frame_with(&[(5, 5, 1.0), (5, 6, 1.0)])).unwrap();
        lib
    }

    #[test]
    fn classify_examples() {
        let lib = library();
        let c = lib.exemplar("c").unwrap().clone();
        assert_eq!(classify(&c, &lib).unwrap(), "c");
        assert_eq!(classify(&c.scaled(2.0).unwrap(), &lib).unwrap(), "c");
        let tie = frame_with(&[(0, 0, 3.0), (0, 1, 3.0)]);
        assert_eq!(classify(&tie, &lib).unwrap(), "a");
        assert!(classify(&tie, &ObjectLibrary::new()).is_err());
    }

    #[test]
    fn vote_examples() {
        assert_eq!(vote(&vec!["x"; 20]).unwrap(), "x");
        let mut w = vec!["A"; 11];
        w.extend(vec!["B"; 9]);
        assert_eq!(vote(&w).unwrap(), "A");
        let mut w: Vec<&str> = (0..20).map(|i| if i % 2 == 0 { "A" } else { "B" }).collect();
        assert_eq!(vote(&w).unwrap(), "A");
        w.reverse();
        assert_eq!(vote(&w).unwrap(), "B");
        assert!(vote::<&str>(&[]).is_err());
    }

    #[test]
    fn support_examples() {
        let a = frame_with(&[(1, 1, 1.0), (1, 2, 1.0)]);
        let m = support_accuracy(&a, &a, 0.3).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.iou, 1.0);

        let g = grid();
        let half: Vec<f64> = (0..g.len()).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let other: Vec<f64> = half.iter().map(|v| 1.0 - v).collect();
        let m = support_accuracy(
            &TactileFrame::new(g, half, 0.0).unwrap(),
            &TactileFrame::new(g, other, 0.0).unwrap(),
            0.5,
        )
        .unwrap();
        assert_eq!(m.accuracy, 0.0);

        let b = frame_with(&[(1, 1, 1.0), (1, 2, 1.0), (7, 7, 1.0)]);
        let m = support_accuracy(&b, &a, 0.3).unwrap();
        assert!((m.accuracy - 0.99).abs() < 1e-12);
        assert_eq!(m.false_positive, 1);
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.recall, 1.0);

        let zero = TactileFrame::zeros(g);
        let m = support_accuracy(&zero, &zero, 0.3).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.iou), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn com_examples() {
        assert_eq!(center_of_mass(&frame_with(&[(3, 4, 2.0)]), 0.0).unwrap(), (3.0, 4.0));
        assert_eq!(
            center_of_mass(&frame_with(&[(2, 2, 1.0), (4, 2, 1.0)]), 0.0).unwrap(),
            (3.0, 2.0)
        );
        assert_eq!(
            center_of_mass(&frame_with(&[(0, 0, 1.0), (4, 0, 3.0)]), 0.0).unwrap(),
            (3.0, 0.0)
        );
        let rest = TactileFrame::new(grid(), vec![1e-6; 100], 0.0).unwrap();
        assert!(matches!(center_of_mass(&rest, 1e-6), Err(Error::NoContact)));
    }

    #[test]
    fn localization_examples() {
        assert_eq!(localization_error((1.0, 1.0), (1.0, 1.0)), 0.0);
        assert_eq!(localization_error((0.0, 0.0), (3.0, 4.0)), 5.0);
        assert_eq!(localization_error((1.5, 2.0), (1.5, 4.5)), 2.5);
    }

    #[test]
    fn delta_examples() {
        let g = grid();
        let f = |v: f64, t: f64| TactileFrame::new(g, vec![v; g.len()], t).unwrap();
        assert_eq!(delta_pressure(&[f(1.0, 0.0), f(1.0, 1.0)]).unwrap(), 0.0);
        assert!((delta_pressure(&[f(1.0, 0.0), f(1.5, 1.0)]).unwrap() - 0.5).abs() < 1e-15);
        assert!((delta_pressure(&[f(0.0, 0.0), f(2.0, 1.0), f(0.0, 2.0)]).unwrap() - 2.0).abs() < 1e-15);
        assert!(delta_pressure(&[f(0.0, 0.0)]).is_err());
    }

    #[test]
    fn trace_examples() {
        let g = grid();
        let rest: Vec<TactileFrame> = (0..3).map(|_| TactileFrame::new(g, vec![1e-6; 100], 0.0).unwrap()).collect();
        assert!(max_pressure_trace(&rest, 1e-6).iter().all(|&(_, p)| p == 0.0));
        let peak = frame_with(&[(2, 2, 7.0)]).with_timestamp(0.001);
        assert_eq!(max_pressure_trace(&[peak], 0.0), vec![(0.001, 7.0)]);
    }

    fn arb_frame() -> impl Strategy<Value = TactileFrame> {
        proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.0], 100)
            .prop_map(|v| TactileFrame::new(GridGeometry::default(), v, 0.0).unwrap())
    }

    proptest! {
        #[test]
        fn classify_scale_invariant(f in arb_frame(), s in 0.01f64..100.0) {
            let lib = library();
            prop_assert_eq!(classify(&f, &lib).unwrap(), classify(&f.scaled(s).unwrap(), &lib).unwrap());
        }

        #[test]
        fn support_symmetries(a in arb_frame(), b in arb_frame(), th in 0.0f64..1.0) {
            let ab = support_accuracy(&a, &b, th).unwrap();
            let ba = support_accuracy(&b, &a, th).unwrap();
            prop_assert_eq!(ab.accuracy, ba.accuracy);
            prop_assert_eq!(ab.precision, ba.recall);
            prop_assert!((0.0..=1.0).contains(&ab.iou));
        }

        #[test]
        fn vote_returns_member(w in proptest::collection::vec(0u8..4, 1..40)) {
            let v = vote(&w).unwrap();
            prop_assert!(w.contains(&v));
            let count = w.iter().filter(|x| **x == v).count();
            if let Some(maj) = (0u8..4).find(|c| w.iter().filter(|x| *x == c).count() * 2 > w.len()) {
                prop_assert_eq!(v, maj);
            }
            prop_assert!((0u8..4).all(|c| w.iter().filter(|x| **x == c).count() <= count));
        }

        #[test]
        fn com_translates(pix in proptest::collection::vec((0usize..5, 0usize..5, 0.1f64..5.0), 1..6),
                          dr in 0usize..5, dc in 0usize..5) {
            let base = frame_with(&pix);
            let moved: Vec<(usize, usize, f64)> = pix.iter().map(|&(r, c, v)| (r + dr, c + dc, v)).collect();
            let (r0, c0) = center_of_mass(&base, 0.0).unwrap();
            let (r1, c1) = center_of_mass(&frame_with(&moved), 0.0).unwrap();
            prop_assert!((r1 - r0 - dr as f64).abs() < 1e-9);
            prop_assert!((c1 - c0 - dc as f64).abs() < 1e-9);
            let rmin = pix.iter().map(|p| p.0).min().unwrap() as f64;
            let rmax = pix.iter().map(|p| p.0).max().unwrap() as f64;
            prop_assert!(r0 >= rmin - 1e-9 && r0 <= rmax + 1e-9);
        }

        #[test]
        fn localization_is_metric(a in (0.0f64..10.0, 0.0f64..10.0), b in (0.0f64..10.0, 0.0f64..10.0),
                                  c in (0.0f64..10.0, 0.0f64..10.0)) {
            let ab = localization_error(a, b);
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, localization_error(b, a));
            prop_assert!(ab <= localization_error(a, c) + localization_error(c, b) + 1e-12);
        }
    }
}
