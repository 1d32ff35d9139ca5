//! Marimba specifications: pants decomposition data, cuff gluings with
//! length and twist, and note labels on a subset of the gluing curves.
//!
//! The on-disk format is TOML. Unknown keys are rejected so that typos in
//! hand-written specs fail loudly.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("spec parse error: {0}")]
    Parse(String),
    #[error("pants {pants} slot {slot} referenced by gluing {gluing} does not exist")]
    BadSlot { gluing: usize, pants: usize, slot: usize },
    #[error("pants {pants} slot {slot} is glued more than once")]
    SlotReused { pants: usize, slot: usize },
    #[error("pants {pants} slot {slot} is not glued; marimbas are closed surfaces")]
    SlotUnglued { pants: usize, slot: usize },
    #[error("gluing {0} identifies a slot with itself")]
    SelfGluedSlot(usize),
    #[error("gluing {gluing} has non-positive cuff length {length}")]
    NonPositiveLength { gluing: usize, length: f64 },
    #[error("gluing {gluing} has non-finite twist")]
    BadTwist { gluing: usize },
    #[error("gamma entry references unknown gluing {0}")]
    UnknownGluing(usize),
    #[error("note label {0:?} used for more than one gamma component")]
    DuplicateLabel(String),
    #[error("the glued surface is disconnected")]
    Disconnected,
    #[error("spec has no pants")]
    Empty,
    #[error("symmetric family parameter {0} must be positive and finite")]
    BadFamilyParameter(&'static str),
}

/// One pair of pants. Cuff lengths live on the gluings; a pants declaration
/// only carries an optional name.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PantsDecl {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

/// A cuff gluing between two pants slots. `a` is the minus slot and `b` the
/// plus slot of the Fenchel-Nielsen shift convention.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GluingDecl {
    /// (pants index, slot index 0..3)
    pub a: (usize, usize),
    pub b: (usize, usize),
    pub length: f64,
    pub twist: f64,
}

/// Parameters of the two-curve symmetric family used by the half-twist
/// construction (genus-2 surfaces assembled from the cell-level double
/// cover of the pants with cuffs l_alpha/2, l_alpha/2, l_beta).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SymmetricFamilyParams {
    pub l_alpha: f64,
    pub l_beta: f64,
    pub twist_alpha: f64,
    pub twist_beta: f64,
    pub label_alpha: String,
    pub label_beta: String,
}

impl SymmetricFamilyParams {
    pub fn validate(&self) -> Result<(), SpecError> {
        if !(self.l_alpha > 0.0 && self.l_alpha.is_finite()) {
            return Err(SpecError::BadFamilyParameter("l_alpha"));
        }
        if !(self.l_beta > 0.0 && self.l_beta.is_finite()) {
            return Err(SpecError::BadFamilyParameter("l_beta"));
        }
        if !self.twist_alpha.is_finite() {
            return Err(SpecError::BadFamilyParameter("twist_alpha"));
        }
        if !self.twist_beta.is_finite() {
            return Err(SpecError::BadFamilyParameter("twist_beta"));
        }
        Ok(())
    }
}

/// A closed hyperbolic surface given by Fenchel-Nielsen pants data, plus a
/// labeled multicurve Gamma drawn from the gluing curves.
///
/// `gamma` maps gluing indices (as strings, a TOML-table restriction) to
/// note labels. `allow_shared_labels` is set by the cyclic cover
/// construction, whose lifted components deliberately share the base label.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MarimbaSpec {
    #[serde(default)]
    pub pants: Vec<PantsDecl>,
    #[serde(default)]
    pub gluings: Vec<GluingDecl>,
    #[serde(default)]
    pub gamma: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_shared_labels: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetric_family: Option<SymmetricFamilyParams>,
}

impl MarimbaSpec {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        let spec: MarimbaSpec =
            toml::from_str(text).map_err(|e| SpecError::Parse(e.to_string()))?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("spec serialization cannot fail")
    }

    /// SHA-256 of the canonical serialization, recorded in crossing log
    /// headers so a log can be matched to the instrument that produced it.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.to_toml().as_bytes());
        let out = h.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Gamma as (gluing index, label) pairs, sorted by gluing index.
    pub fn gamma_entries(&self) -> Result<Vec<(usize, String)>, SpecError> {
        let mut out = Vec::new();
        for (k, v) in &self.gamma {
            let idx: usize = k
                .parse()
                .map_err(|_| SpecError::Parse(format!("gamma key {k:?} is not a gluing index")))?;
            out.push((idx, v.clone()));
        }
        out.sort();
        Ok(out)
    }

    /// Cuff lengths of the three slots of each pants.
    pub fn pants_cuff_lengths(&self) -> Result<Vec<[f64; 3]>, SpecError> {
        let mut lens = vec![[f64::NAN; 3]; self.pants.len()];
        for (gi, g) in self.gluings.iter().enumerate() {
            for &(p, s) in [&g.a, &g.b] {
                if p >= self.pants.len() || s >= 3 {
                    return Err(SpecError::BadSlot { gluing: gi, pants: p, slot: s });
                }
                if !lens[p][s].is_nan() {
                    return Err(SpecError::SlotReused { pants: p, slot: s });
                }
                lens[p][s] = g.length;
            }
        }
        for (p, l) in lens.iter().enumerate() {
            for (s, v) in l.iter().enumerate() {
                if v.is_nan() {
                    return Err(SpecError::SlotUnglued { pants: p, slot: s });
                }
            }
        }
        Ok(lens)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if let Some(fam) = &self.symmetric_family {
            fam.validate()?;
            if self.pants.is_empty() {
                return Ok(());
            }
        }
        if self.pants.is_empty() {
            return Err(SpecError::Empty);
        }
        for (gi, g) in self.gluings.iter().enumerate() {
            if g.a == g.b {
                return Err(SpecError::SelfGluedSlot(gi));
            }
            if !(g.length > 0.0 && g.length.is_finite()) {
                return Err(SpecError::NonPositiveLength { gluing: gi, length: g.length });
            }
            if !g.twist.is_finite() {
                return Err(SpecError::BadTwist { gluing: gi });
            }
        }
        self.pants_cuff_lengths()?;
        let entries = self.gamma_entries()?;
        let mut seen = std::collections::BTreeSet::new();
        for (idx, label) in &entries {
            if *idx >= self.gluings.len() {
                return Err(SpecError::UnknownGluing(*idx));
            }
            if !seen.insert(label.clone()) && !self.allow_shared_labels {
                return Err(SpecError::DuplicateLabel(label.clone()));
            }
        }
        // Connectivity of the pants graph.
        let n = self.pants.len();
        let mut adj = vec![Vec::new(); n];
        for g in &self.gluings {
            adj[g.a.0].push(g.b.0);
            adj[g.b.0].push(g.a.0);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(p) = stack.pop() {
            for &q in &adj[p] {
                if !seen[q] {
                    seen[q] = true;
                    stack.push(q);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(SpecError::Disconnected);
        }
        Ok(())
    }

    /// Euler characteristic: each pants contributes -1; the symmetric
    /// family builds four hexagon cells, also chi = -2.
    pub fn euler_characteristic(&self) -> i64 {
        if self.pants.is_empty() && self.symmetric_family.is_some() {
            -2
        } else {
            -(self.pants.len() as i64)
        }
    }
}

/// Convenience constructor used throughout the tests: the genus-2 "theta"
/// pattern with two pants glued along all three cuffs.
pub fn genus2_theta(lengths: [f64; 3], twists: [f64; 3], labels: &[(usize, &str)]) -> MarimbaSpec {
    MarimbaSpec {
        pants: vec![PantsDecl::default(), PantsDecl::default()],
        gluings: (0..3)
            .map(|i| GluingDecl { a: (0, i), b: (1, i), length: lengths[i], twist: twists[i] })
            .collect(),
        gamma: labels.iter().map(|(i, l)| (i.to_string(), l.to_string())).collect(),
        allow_shared_labels: false,
        symmetric_family: None,
    }
}

/// Genus-2 "handle" pattern: each pants has two of its own slots glued
/// together (a handle), and the remaining slots are glued to each other by
/// a separating curve.
pub fn genus2_handles(
    handle_a: (f64, f64),
    handle_b: (f64, f64),
    waist: (f64, f64),
    labels: &[(usize, &str)],
) -> MarimbaSpec {
    MarimbaSpec {
        pants: vec![PantsDecl::default(), PantsDecl::default()],
        gluings: vec![
            GluingDecl { a: (0, 0), b: (0, 1), length: handle_a.0, twist: handle_a.1 },
            GluingDecl { a: (1, 0), b: (1, 1), length: handle_b.0, twist: handle_b.1 },
            GluingDecl { a: (0, 2), b: (1, 2), length: waist.0, twist: waist.1 },
        ],
        gamma: labels.iter().map(|(i, l)| (i.to_string(), l.to_string())).collect(),
        allow_shared_labels: false,
        symmetric_family: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_toml() {
        let spec = genus2_theta([0.8, 1.0, 1.3], [0.2, -0.4, 0.7], &[(0, "C4"), (1, "E4")]);
        let text = spec.to_toml();
        let back = MarimbaSpec::parse(&text).unwrap();
        assert_eq!(spec, back);
        assert_eq!(spec.content_hash(), back.content_hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "[[pants]]\nnmae = \"typo\"\n";
        assert!(matches!(MarimbaSpec::parse(text), Err(SpecError::Parse(_))));
    }

    #[test]
    fn validation_catches_structural_errors() {
        let mut spec = genus2_theta([0.8, 1.0, 1.3], [0.0; 3], &[(0, "C4")]);
        spec.validate().unwrap();
        assert_eq!(spec.euler_characteristic(), -2);

        spec.gluings[0].length = -1.0;
        assert!(matches!(spec.validate(), Err(SpecError::NonPositiveLength { .. })));
        spec.gluings[0].length = 0.8;

        spec.gamma.insert("1".into(), "C4".into());
        assert!(matches!(spec.validate(), Err(SpecError::DuplicateLabel(_))));
        spec.gamma.remove("1");

        spec.gamma.insert("9".into(), "Z9".into());
        assert!(matches!(spec.validate(), Err(SpecError::UnknownGluing(9))));
        spec.gamma.remove("9");

        spec.gluings[2].a = (0, 0);
        assert!(matches!(spec.validate(), Err(SpecError::SlotReused { .. })));
    }

    #[test]
    fn disconnected_specs_are_rejected() {
        // Two separate genus-2 surfaces in one file.
        let a = genus2_theta([1.0; 3], [0.0; 3], &[]);
        let mut spec = a.clone();
        spec.pants.extend(a.pants.clone());
        for g in &a.gluings {
            spec.gluings.push(GluingDecl {
                a: (g.a.0 + 2, g.a.1),
                b: (g.b.0 + 2, g.b.1),
                length: g.length,
                twist: g.twist,
            });
        }
        assert!(matches!(spec.validate(), Err(SpecError::Disconnected)));
    }

    #[test]
    fn handle_pattern_validates() {
        let spec = genus2_handles((0.9, 0.1), (1.1, -0.2), (1.4, 0.3), &[(2, "D4")]);
        spec.validate().unwrap();
    }
}
