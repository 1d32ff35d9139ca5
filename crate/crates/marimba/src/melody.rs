//! Melodies, motifs, and frequency estimates.
//!
//! A melody is what a long trajectory sounds like: the strictly increasing
//! sequence of (label, time) crossings of the labeled multicurve. Motif
//! frequencies are the ergodic averages that make melodies comparable
//! across surfaces; in particular the frequency of a single label recovers
//! the curve's length via `length = pi^2 |chi| * frequency`.

use crate::flow::Crossing;
use crate::numeric::inverse_normal_cdf;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MelodyError {
    #[error("empty crossing log")]
    EmptyLog,
    #[error("shift amount outside [0, horizon)")]
    OutOfRange,
    #[error("label {0:?} is not in the melody's label set")]
    UnknownLabel(String),
    #[error("length recovery needs negative Euler characteristic")]
    NonNegativeChi,
    #[error("melodies use different label sets")]
    LabelMismatch,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Melody {
    /// (label, time), strictly increasing in time.
    pub notes: Vec<(String, f64)>,
    /// Total observed time; no information past it.
    pub horizon: f64,
    /// Declared label set (every note label belongs to it, not every label
    /// has to sound).
    pub labels: BTreeSet<String>,
}

/// A rhythmic pattern: after a note labeled `labels[0]`, the next k notes
/// carry `labels[1..]` at gaps inside the closed windows
/// `[offsets[i], offsets[i] + epsilon]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Motif {
    pub labels: Vec<String>,
    /// Strictly increasing positive gaps from the anchor note; one fewer
    /// than `labels`. Empty for a degenerate (single-note) motif.
    pub offsets: Vec<f64>,
    pub epsilon: f64,
}

impl Motif {
    pub fn degenerate(label: &str) -> Self {
        Motif { labels: vec![label.to_string()], offsets: Vec::new(), epsilon: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn check(&self) {
        assert_eq!(self.labels.len(), self.offsets.len() + 1);
        let mut prev = 0.0;
        for &o in &self.offsets {
            assert!(o > prev, "offsets must be strictly increasing and positive");
            prev = o;
        }
        if !self.offsets.is_empty() {
            assert!(self.epsilon > 0.0, "epsilon must be positive for nondegenerate motifs");
        }
    }

    /// Total window extent, the lead time an occurrence needs before the
    /// horizon.
    fn span(&self) -> f64 {
        self.offsets.last().map_or(0.0, |t| t + self.epsilon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyEstimate {
    /// Occurrences per unit time.
    pub value: f64,
    pub count: usize,
    pub horizon: f64,
    /// Poisson-style heuristic, value / sqrt(count).
    pub std_error: f64,
}

impl FrequencyEstimate {
    fn new(count: usize, horizon: f64) -> Self {
        let value = count as f64 / horizon;
        // Floor of one count in the error so that zero counts still carry
        // an uncertainty scale.
        let std_error = (count.max(1) as f64).sqrt() / horizon;
        FrequencyEstimate { value, count, horizon, std_error }
    }
}

impl Melody {
    pub fn from_crossings(
        crossings: &[Crossing],
        horizon: f64,
        labels: impl IntoIterator<Item = String>,
    ) -> Result<Melody, MelodyError> {
        if crossings.is_empty() {
            return Err(MelodyError::EmptyLog);
        }
        let labels: BTreeSet<String> = labels.into_iter().collect();
        Ok(Melody {
            notes: crossings.iter().map(|c| (c.label.clone(), c.t)).collect(),
            horizon,
            labels,
        })
    }

    /// Drop the first `s` units of time and rebase the clock.
    pub fn shift(&self, s: f64) -> Result<Melody, MelodyError> {
        if !(0.0..self.horizon).contains(&s) {
            return Err(MelodyError::OutOfRange);
        }
        Ok(Melody {
            notes: self
                .notes
                .iter()
                .filter(|(_, t)| *t > s)
                .map(|(l, t)| (l.clone(), t - s))
                .collect(),
            horizon: self.horizon - s,
            labels: self.labels.clone(),
        })
    }

    /// Does the motif start at note index j? The motif's k follow-up notes
    /// must be exactly the next k melody entries, with closed gap windows.
    pub fn motif_played_at(&self, motif: &Motif, j: usize) -> bool {
        motif.check();
        if self.notes[j].0 != motif.labels[0] {
            return false;
        }
        let t0 = self.notes[j].1;
        for (i, off) in motif.offsets.iter().enumerate() {
            let Some((label, t)) = self.notes.get(j + 1 + i) else { return false };
            if *label != motif.labels[i + 1] {
                return false;
            }
            let gap = t - t0;
            if gap < *off || gap > off + motif.epsilon {
                return false;
            }
        }
        true
    }

    /// Occurrences per unit time over the effective horizon (anchors whose
    /// window would outrun the observed time are excluded on both sides of
    /// the division, so truncation does not bias the estimate).
    pub fn motif_frequency(&self, motif: &Motif) -> FrequencyEstimate {
        motif.check();
        let effective = self.horizon - motif.span();
        let count = (0..self.notes.len())
            .filter(|&j| self.notes[j].1 <= effective && self.motif_played_at(motif, j))
            .count();
        FrequencyEstimate::new(count, effective)
    }

    pub fn note_frequency(&self, label: &str) -> Result<FrequencyEstimate, MelodyError> {
        if !self.labels.contains(label) {
            return Err(MelodyError::UnknownLabel(label.to_string()));
        }
        let count = self.notes.iter().filter(|(l, _)| l == label).count();
        Ok(FrequencyEstimate::new(count, self.horizon))
    }

    /// Gaps between consecutive notes of the given label (all notes when
    /// `label` is None).
    pub fn gaps(&self, label: Option<&str>) -> Vec<f64> {
        let times: Vec<f64> = self
            .notes
            .iter()
            .filter(|(l, _)| label.map_or(true, |x| l == x))
            .map(|(_, t)| *t)
            .collect();
        times.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LengthEstimate {
    pub value: f64,
    pub std_error: f64,
    /// True when the frequency was exactly zero, which on a genuine
    /// marimba means the trace was too short: every label sounds
    /// eventually.
    pub degenerate: bool,
}

/// `length = pi^2 |chi| * frequency`.
pub fn length_from_frequency(f: &FrequencyEstimate, chi: i64) -> Result<LengthEstimate, MelodyError> {
    if chi >= 0 {
        return Err(MelodyError::NonNegativeChi);
    }
    let scale = std::f64::consts::PI.powi(2) * chi.unsigned_abs() as f64;
    Ok(LengthEstimate {
        value: scale * f.value,
        std_error: scale * f.std_error,
        degenerate: f.count == 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Consistent,
    Distinguished,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MotifComparison {
    pub motif: Motif,
    pub freq_a: FrequencyEstimate,
    pub freq_b: FrequencyEstimate,
    pub z: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsomelodyReport {
    pub comparisons: Vec<MotifComparison>,
    /// Two-sided threshold after Bonferroni correction over the battery.
    pub threshold: f64,
    pub verdict: Verdict,
    /// Index of the motif with the largest |z| when distinguished.
    pub witness: Option<usize>,
}

impl IsomelodyReport {
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str("motif                                    freq A        freq B        z\n");
        for c in &self.comparisons {
            let name = if c.motif.offsets.is_empty() {
                format!("[{}]", c.motif.labels[0])
            } else {
                format!(
                    "[{} @ {:?} eps {:.4}]",
                    c.motif.labels.join(","),
                    c.motif.offsets.iter().map(|o| (o * 1e4).round() / 1e4).collect::<Vec<_>>(),
                    c.motif.epsilon
                )
            };
            out.push_str(&format!(
                "{:<40} {:<13.6e} {:<13.6e} {:+.3}\n",
                name, c.freq_a.value, c.freq_b.value, c.z
            ));
        }
        out.push_str(&format!(
            "threshold |z| = {:.3}  verdict: {:?}\n",
            self.threshold, self.verdict
        ));
        out
    }
}

/// Compare two melodies over a battery of motifs. Frequencies that differ
/// by more than the Bonferroni-adjusted z threshold distinguish the
/// marimbas; otherwise the melodies are consistent with being isomelodic
/// at this horizon.
pub fn isomelody_report(
    a: &Melody,
    b: &Melody,
    battery: &[Motif],
    alpha: f64,
) -> Result<IsomelodyReport, MelodyError> {
    if a.labels != b.labels {
        return Err(MelodyError::LabelMismatch);
    }
    let m = battery.len().max(1);
    let threshold = inverse_normal_cdf(1.0 - alpha / (2.0 * m as f64));
    let mut comparisons = Vec::with_capacity(battery.len());
    let mut worst: Option<(usize, f64)> = None;
    for (i, motif) in battery.iter().enumerate() {
        let fa = a.motif_frequency(motif);
        let fb = b.motif_frequency(motif);
        let denom = (fa.std_error.powi(2) + fb.std_error.powi(2)).sqrt();
        let z = if fa.count == 0 && fb.count == 0 {
            0.0
        } else {
            (fa.value - fb.value) / denom
        };
        if worst.map_or(true, |(_, w)| z.abs() > w) {
            worst = Some((i, z.abs()));
        }
        comparisons.push(MotifComparison { motif: motif.clone(), freq_a: fa, freq_b: fb, z });
    }
    let distinguished = worst.map_or(false, |(_, w)| w > threshold);
    Ok(IsomelodyReport {
        comparisons,
        threshold,
        verdict: if distinguished { Verdict::Distinguished } else { Verdict::Consistent },
        witness: if distinguished { worst.map(|(i, _)| i) } else { None },
    })
}

/// Standard battery built from melody A: every degenerate motif, plus all
/// ordered label pairs at gap quantiles 10%..90% with epsilon equal to one
/// quantile step.
pub fn default_battery(a: &Melody) -> Vec<Motif> {
    let mut battery: Vec<Motif> = a.labels.iter().map(|l| Motif::degenerate(l)).collect();
    let mut gaps = a.gaps(None);
    if gaps.len() < 10 {
        return battery;
    }
    gaps.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let q = |p: f64| gaps[((gaps.len() - 1) as f64 * p) as usize];
    let quantiles: Vec<f64> = (1..=9).map(|i| q(i as f64 / 10.0)).collect();
    let eps = (q(0.9) - q(0.1)) / 8.0;
    if !(eps > 0.0) {
        return battery;
    }
    for l0 in &a.labels {
        for l1 in &a.labels {
            for &off in &quantiles {
                battery.push(Motif {
                    labels: vec![l0.clone(), l1.clone()],
                    offsets: vec![off],
                    epsilon: eps,
                });
            }
        }
    }
    battery
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{sample_liouville, trace, TraceConfig};
    use crate::spec::genus2_theta;
    use crate::surface::build_surface;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn melody_of(lengths: [f64; 3], t: f64, seed: u64) -> Melody {
        let s = build_surface(&genus2_theta(
            lengths,
            [0.2, -0.35, 0.5],
            &[(0, "C4"), (1, "E4"), (2, "G4")],
        ))
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = sample_liouville(&s, &mut rng);
        let tr = trace(&s, start, &TraceConfig::for_time(t)).unwrap();
        Melody::from_crossings(
            &tr.crossings,
            t,
            ["C4", "E4", "G4"].map(String::from),
        )
        .unwrap()
    }

    #[test]
    fn shift_is_a_flow() {
        let m = melody_of([0.8, 1.0, 1.3], 500.0, 1);
        let a = m.shift(10.0).unwrap().shift(20.0).unwrap();
        let b = m.shift(30.0).unwrap();
        assert_eq!(a.notes.len(), b.notes.len());
        for (x, y) in a.notes.iter().zip(&b.notes) {
            assert_eq!(x.0, y.0);
            assert!((x.1 - y.1).abs() < 1e-12);
        }
        let zero = m.shift(0.0).unwrap();
        assert_eq!(zero.notes.len(), m.notes.len());
        assert!(m.shift(m.horizon).is_err());
    }

    #[test]
    fn degenerate_motif_counts_label_occurrences() {
        let m = melody_of([0.8, 1.0, 1.3], 500.0, 1);
        let f = m.motif_frequency(&Motif::degenerate("C4"));
        let nf = m.note_frequency("C4").unwrap();
        assert_eq!(f.count, nf.count);
        assert!((f.value - nf.value).abs() < 1e-15);
        let total: usize = ["C4", "E4", "G4"]
            .iter()
            .map(|l| m.note_frequency(l).unwrap().count)
            .sum();
        assert_eq!(total, m.notes.len());
        assert_eq!(
            m.note_frequency("Z9"),
            Err(MelodyError::UnknownLabel("Z9".into()))
        );
    }

    #[test]
    fn closed_window_includes_right_endpoint() {
        let notes = vec![("a".to_string(), 1.0), ("b".to_string(), 2.5)];
        let m = Melody {
            notes,
            horizon: 10.0,
            labels: ["a", "b"].map(String::from).into_iter().collect(),
        };
        let hit = Motif {
            labels: vec!["a".into(), "b".into()],
            offsets: vec![1.0],
            epsilon: 0.5,
        };
        assert!(m.motif_played_at(&hit, 0));
        let miss = Motif {
            labels: vec!["a".into(), "b".into()],
            offsets: vec![1.0],
            epsilon: 0.4999,
        };
        assert!(!m.motif_played_at(&miss, 0));
        let wrong_label = Motif {
            labels: vec!["a".into(), "a".into()],
            offsets: vec![1.5],
            epsilon: 0.5,
        };
        assert!(!m.motif_played_at(&wrong_label, 0));
    }

    #[test]
    fn epsilon_monotonicity() {
        let m = melody_of([0.8, 1.0, 1.3], 2000.0, 4);
        for (l0, l1) in [("C4", "E4"), ("G4", "C4"), ("E4", "E4")] {
            for off in [0.5, 1.0, 2.0] {
                let mut prev = 0;
                for eps in [0.1, 0.3, 0.8, 2.0] {
                    let f = m.motif_frequency(&Motif {
                        labels: vec![l0.into(), l1.into()],
                        offsets: vec![off],
                        epsilon: eps,
                    });
                    assert!(f.count >= prev);
                    prev = f.count;
                }
            }
        }
    }

    #[test]
    fn known_length_one_frequency() {
        // A curve of length 1 on a genus-2 surface sounds at frequency
        // 1/(2 pi^2) = 0.0506606.
        let m = melody_of([1.0, 0.8, 1.3], 200000.0, 3);
        let f = m.note_frequency("C4").unwrap();
        let expect = 1.0 / (2.0 * std::f64::consts::PI.powi(2));
        assert!(
            (f.value - expect).abs() < 4.0 * f.std_error,
            "f = {}, expected {expect}",
            f.value
        );
        assert!((f.value - expect).abs() / expect < 0.03);
    }

    #[test]
    fn length_recovery_within_two_percent() {
        let m = melody_of([0.8, 1.0, 1.3], 1e6, 5);
        for (label, len) in [("C4", 0.8), ("E4", 1.0), ("G4", 1.3)] {
            let f = m.note_frequency(label).unwrap();
            let est = length_from_frequency(&f, -2).unwrap();
            assert!(!est.degenerate);
            assert!(
                (est.value - len).abs() / len < 0.02,
                "{label}: {} vs {len}",
                est.value
            );
        }
    }

    #[test]
    fn seed_independence_of_estimates() {
        let a = melody_of([0.8, 1.0, 1.3], 100000.0, 21);
        let b = melody_of([0.8, 1.0, 1.3], 100000.0, 22);
        for label in ["C4", "E4", "G4"] {
            let fa = a.note_frequency(label).unwrap();
            let fb = b.note_frequency(label).unwrap();
            let z = (fa.value - fb.value)
                / (fa.std_error.powi(2) + fb.std_error.powi(2)).sqrt();
            assert!(z.abs() < 4.0, "{label}: z = {z}");
        }
    }

    #[test]
    fn self_comparison_is_consistent() {
        let m = melody_of([0.8, 1.0, 1.3], 20000.0, 8);
        let battery = default_battery(&m);
        assert!(battery.len() > 3);
        let rep = isomelody_report(&m, &m, &battery, 0.01).unwrap();
        assert_eq!(rep.verdict, Verdict::Consistent);
        assert!(rep.comparisons.iter().all(|c| c.z == 0.0));
    }

    #[test]
    fn different_lengths_are_distinguished_by_a_degenerate_motif() {
        let a = melody_of([1.0, 0.9, 1.3], 100000.0, 31);
        let b = melody_of([1.2, 0.9, 1.3], 100000.0, 32);
        let battery = default_battery(&a);
        let rep = isomelody_report(&a, &b, &battery, 0.01).unwrap();
        assert_eq!(rep.verdict, Verdict::Distinguished);
        let w = rep.witness.unwrap();
        // The strongest witness can be any motif, but the degenerate C4
        // motif must be over threshold by itself.
        assert!(rep.comparisons[w].z.abs() > rep.threshold);
        let c4 = rep
            .comparisons
            .iter()
            .find(|c| c.motif.offsets.is_empty() && c.motif.labels[0] == "C4")
            .unwrap();
        assert!(c4.z.abs() > rep.threshold);
    }

    #[test]
    fn shift_covariance_of_occurrences() {
        let m = melody_of([0.8, 1.0, 1.3], 3000.0, 13);
        let motif = Motif {
            labels: vec!["C4".into(), "E4".into()],
            offsets: vec![1.0],
            epsilon: 1.5,
        };
        let s = 500.0;
        let shifted = m.shift(s).unwrap();
        let direct: Vec<f64> = (0..shifted.notes.len())
            .filter(|&j| shifted.motif_played_at(&motif, j))
            .map(|j| shifted.notes[j].1)
            .collect();
        let original: Vec<f64> = (0..m.notes.len())
            .filter(|&j| m.notes[j].1 > s && m.motif_played_at(&motif, j))
            .map(|j| m.notes[j].1 - s)
            .collect();
        assert_eq!(direct.len(), original.len());
        for (x, y) in direct.iter().zip(&original) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
