//! Tolerance-based matching of detected feature points against ground
//! truth, and the precision/recall scores built on it.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Wave class of a feature point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureLabel {
    R,
    P,
    Q,
    S,
    T,
}

impl FeatureLabel {
    pub const ALL: [FeatureLabel; 5] = [
        FeatureLabel::R,
        FeatureLabel::P,
        FeatureLabel::Q,
        FeatureLabel::S,
        FeatureLabel::T,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeaturePoint {
    pub time_s: f64,
    pub label: FeatureLabel,
}

/// A set of labeled time points, kept sorted by label then time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeaturePointSet {
    points: Vec<FeaturePoint>,
}

impl FeaturePointSet {
    pub fn new(mut points: Vec<FeaturePoint>) -> Self {
        debug_assert!(points.iter().all(|p| p.time_s >= 0.0));
        points.sort_by(|a, b| a.label.cmp(&b.label).then(a.time_s.total_cmp(&b.time_s)));
        FeaturePointSet { points }
    }

    pub fn points(&self) -> &[FeaturePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn with_label(&self, label: FeatureLabel) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.points
            .iter()
            .enumerate()
            .filter(move |(_, p)| p.label == label)
            .map(|(i, p)| (i, p.time_s))
    }
}

/// One-to-one pairing between detected and truth points within a tolerance.
/// Indices refer into the respective [`FeaturePointSet`] point slices.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_detected: Vec<usize>,
    pub unmatched_truth: Vec<usize>,
    pub tolerance_s: f64,
}

/// Greedy nearest-neighbor one-to-one matching per label: candidate pairs
/// are processed in increasing time-distance order and taken when both ends
/// are still free. No accepted pair exceeds the tolerance.
pub fn match_points(
    detected: &FeaturePointSet,
    truth: &FeaturePointSet,
    tolerance_s: f64,
) -> Matching {
    assert!(tolerance_s > 0.0, "tolerance must be positive");
    let mut pairs = Vec::new();
    let mut det_used = vec![false; detected.len()];
    let mut truth_used = vec![false; truth.len()];

    for label in FeatureLabel::ALL {
        let det: Vec<(usize, f64)> = detected.with_label(label).collect();
        let tru: Vec<(usize, f64)> = truth.with_label(label).collect();
        let mut candidates = Vec::new();
        for &(di, dt) in &det {
            for &(ti, tt) in &tru {
                let dist = (dt - tt).abs();
                if dist <= tolerance_s {
                    candidates.push((dist, di, ti));
                }
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        for (_, di, ti) in candidates {
            if !det_used[di] && !truth_used[ti] {
                det_used[di] = true;
                truth_used[ti] = true;
                pairs.push((di, ti));
            }
        }
    }

    Matching {
        pairs,
        unmatched_detected: (0..detected.len()).filter(|&i| !det_used[i]).collect(),
        unmatched_truth: (0..truth.len()).filter(|&i| !truth_used[i]).collect(),
        tolerance_s,
    }
}

/// Matched fraction of all detections; vacuously 1 with no detections.
pub fn precision(m: &Matching) -> f64 {
    let detected = m.pairs.len() + m.unmatched_detected.len();
    if detected == 0 {
        1.0
    } else {
        m.pairs.len() as f64 / detected as f64
    }
}

/// Matched fraction of all truth points; vacuously 1 with empty truth.
pub fn recall(m: &Matching) -> f64 {
    let truth = m.pairs.len() + m.unmatched_truth.len();
    if truth == 0 {
        1.0
    } else {
        m.pairs.len() as f64 / truth as f64
    }
}

/// Matching tolerances per label family: R-peaks are matched tighter than
/// the other waves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelTolerances {
    pub r_s: f64,
    pub wave_s: f64,
}

impl Default for LabelTolerances {
    fn default() -> Self {
        LabelTolerances {
            r_s: 0.050,
            wave_s: 0.080,
        }
    }
}

impl LabelTolerances {
    pub fn for_label(&self, label: FeatureLabel) -> f64 {
        match label {
            FeatureLabel::R => self.r_s,
            _ => self.wave_s,
        }
    }
}

/// Matched/detected/truth tallies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MatchCounts {
    pub matched: usize,
    pub detected: usize,
    pub truth: usize,
}

impl MatchCounts {
    pub fn precision(&self) -> f64 {
        if self.detected == 0 {
            1.0
        } else {
            self.matched as f64 / self.detected as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.truth == 0 {
            1.0
        } else {
            self.matched as f64 / self.truth as f64
        }
    }
}

/// Precision/recall overall and per label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub precision: f64,
    pub recall: f64,
    pub per_label: BTreeMap<FeatureLabel, (f64, f64)>,
    pub counts: MatchCounts,
    pub per_label_counts: BTreeMap<FeatureLabel, MatchCounts>,
}

/// Matches each label at its own tolerance and aggregates the tallies.
pub fn score(
    detected: &FeaturePointSet,
    truth: &FeaturePointSet,
    tolerances: &LabelTolerances,
) -> EvalResult {
    let mut per_label = BTreeMap::new();
    let mut per_label_counts = BTreeMap::new();
    let mut total = MatchCounts::default();
    for label in FeatureLabel::ALL {
        let det = FeaturePointSet::new(
            detected
                .points()
                .iter()
                .filter(|p| p.label == label)
                .copied()
                .collect(),
        );
        let tru = FeaturePointSet::new(
            truth
                .points()
                .iter()
                .filter(|p| p.label == label)
                .copied()
                .collect(),
        );
        if det.is_empty() && tru.is_empty() {
            continue;
        }
        let m = match_points(&det, &tru, tolerances.for_label(label));
        let counts = MatchCounts {
            matched: m.pairs.len(),
            detected: det.len(),
            truth: tru.len(),
        };
        per_label.insert(label, (counts.precision(), counts.recall()));
        per_label_counts.insert(label, counts);
        total.matched += counts.matched;
        total.detected += counts.detected;
        total.truth += counts.truth;
    }
    EvalResult {
        precision: total.precision(),
        recall: total.recall(),
        per_label,
        counts: total,
        per_label_counts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(times: &[f64], label: FeatureLabel) -> FeaturePointSet {
        FeaturePointSet::new(
            times
                .iter()
                .map(|&t| FeaturePoint { time_s: t, label })
                .collect(),
        )
    }

    #[test]
    fn identical_sets_match_perfectly() {
        let s = set(&[0.5, 1.3, 2.0], FeatureLabel::R);
        let m = match_points(&s, &s, 0.05);
        assert_eq!(m.pairs.len(), 3);
        assert!(m.unmatched_detected.is_empty());
        assert!(m.unmatched_truth.is_empty());
        assert_eq!(precision(&m), 1.0);
        assert_eq!(recall(&m), 1.0);
    }

    #[test]
    fn empty_detections_leave_truth_unmatched() {
        let detected = FeaturePointSet::default();
        let truth = set(&[0.1, 0.2, 0.3, 0.4, 0.5], FeatureLabel::R);
        let m = match_points(&detected, &truth, 0.05);
        assert!(m.pairs.is_empty());
        assert_eq!(m.unmatched_truth.len(), 5);
        assert_eq!(precision(&m), 1.0); // vacuous
        assert_eq!(recall(&m), 0.0);
    }

    #[test]
    fn nearest_detection_wins() {
        // Exhaustive one-to-one oracle agrees: pairing 1.01<->1.00 has total
        // distance 0.01, the alternative 1.04<->1.00 has 0.04.
        let detected = set(&[1.01, 1.04], FeatureLabel::R);
        let truth = set(&[1.00], FeatureLabel::R);
        let m = match_points(&detected, &truth, 0.05);
        assert_eq!(m.pairs.len(), 1);
        let (di, ti) = m.pairs[0];
        assert_eq!(detected.points()[di].time_s, 1.01);
        assert_eq!(truth.points()[ti].time_s, 1.00);
        assert_eq!(m.unmatched_detected.len(), 1);
    }

    #[test]
    fn labels_never_cross_match() {
        let detected = set(&[1.0], FeatureLabel::P);
        let truth = set(&[1.0], FeatureLabel::T);
        let m = match_points(&detected, &truth, 0.5);
        assert!(m.pairs.is_empty());
    }

    #[test]
    fn precision_recall_ratios() {
        let m = Matching {
            pairs: (0..8).map(|i| (i, i)).collect(),
            unmatched_detected: vec![8, 9],
            unmatched_truth: vec![],
            tolerance_s: 0.05,
        };
        assert!((precision(&m) - 0.8).abs() < 1e-12);
        assert_eq!(recall(&m), 1.0);

        let m = Matching {
            pairs: (0..15).map(|i| (i, i)).collect(),
            unmatched_detected: vec![],
            unmatched_truth: (15..20).collect(),
            tolerance_s: 0.05,
        };
        assert_eq!(precision(&m), 1.0);
        assert!((recall(&m) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn vacuous_conventions() {
        let empty = FeaturePointSet::default();
        let m = match_points(&empty, &empty, 0.05);
        assert_eq!(precision(&m), 1.0);
        assert_eq!(recall(&m), 1.0);
    }

    #[test]
    fn score_uses_per_label_tolerances() {
        // 60 ms error: inside the 80 ms wave tolerance, outside the 50 ms
        // R tolerance.
        let detected = FeaturePointSet::new(vec![
            FeaturePoint { time_s: 1.06, label: FeatureLabel::R },
            FeaturePoint { time_s: 1.26, label: FeatureLabel::T },
        ]);
        let truth = FeaturePointSet::new(vec![
            FeaturePoint { time_s: 1.0, label: FeatureLabel::R },
            FeaturePoint { time_s: 1.2, label: FeatureLabel::T },
        ]);
        let result = score(&detected, &truth, &LabelTolerances::default());
        assert_eq!(result.per_label[&FeatureLabel::R], (0.0, 0.0));
        assert_eq!(result.per_label[&FeatureLabel::T], (1.0, 1.0));
        assert_eq!(result.counts.matched, 1);
        assert_eq!(result.counts.detected, 2);
    }
}
