//! The four FH risk stages and their two-level hierarchy.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// FH risk stage, ordered by severity. The discriminant is the class index
/// used by every four-way model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FHLabel {
    Unlikely = 0,
    Possible = 1,
    Probable = 2,
    Definite = 3,
}

/// Stage-1 route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Superclass {
    Healthy = 0,
    Patient = 1,
}

impl FHLabel {
    pub const ALL: [FHLabel; 4] = [
        FHLabel::Unlikely,
        FHLabel::Possible,
        FHLabel::Probable,
        FHLabel::Definite,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL.get(i).copied().ok_or(Error::Label {
            label: i,
            classes: 4,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            FHLabel::Unlikely => "Unlikely",
            FHLabel::Possible => "Possible",
            FHLabel::Probable => "Probable",
            FHLabel::Definite => "Definite",
        }
    }

    pub fn superclass(self) -> Superclass {
        match self {
            FHLabel::Definite | FHLabel::Probable => Superclass::Patient,
            FHLabel::Possible | FHLabel::Unlikely => Superclass::Healthy,
        }
    }

    /// Binary index inside the superclass; 1 marks the rarer subclass
    /// (Definite among patients, Possible among healthy).
    pub fn sub_index(self) -> usize {
        match self {
            FHLabel::Definite | FHLabel::Possible => 1,
            FHLabel::Probable | FHLabel::Unlikely => 0,
        }
    }

    /// Inverse of ([`FHLabel::superclass`], [`FHLabel::sub_index`]).
    pub fn from_route(route: Superclass, sub_index: usize) -> Self {
        match (route, sub_index) {
            (Superclass::Patient, 1) => FHLabel::Definite,
            (Superclass::Patient, _) => FHLabel::Probable,
            (Superclass::Healthy, 1) => FHLabel::Possible,
            (Superclass::Healthy, _) => FHLabel::Unlikely,
        }
    }
}

impl Superclass {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        if i == 1 {
            Superclass::Patient
        } else {
            Superclass::Healthy
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Superclass::Healthy => "Healthy",
            Superclass::Patient => "Patient",
        }
    }

    /// Subclass names in binary-index order.
    pub fn members(self) -> [FHLabel; 2] {
        match self {
            Superclass::Patient => [FHLabel::Probable, FHLabel::Definite],
            Superclass::Healthy => [FHLabel::Unlikely, FHLabel::Possible],
        }
    }
}

impl fmt::Display for FHLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Superclass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FHLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FHLabel::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Domain(format!("unknown FH label {s:?}")))
    }
}

/// Splits a four-way label into the Stage-1 route and the Stage-2 binary target.
pub fn derive_stage_labels(y: FHLabel) -> (Superclass, usize) {
    (y.superclass(), y.sub_index())
}

/// Dutch score thresholds: `> 8` Definite, `[5, 8]` Probable, `[3, 5)` Possible,
/// `< 3` Unlikely.
pub fn dutch_score_to_label(score: f64) -> Result<FHLabel> {
    if !(score >= 0.0) || !score.is_finite() {
        return Err(Error::Domain(format!("Dutch score must be a finite value >= 0, got {score}")));
    }
    Ok(if score > 8.0 {
        FHLabel::Definite
    } else if score >= 5.0 {
        FHLabel::Probable
    } else if score >= 3.0 {
        FHLabel::Possible
    } else {
        FHLabel::Unlikely
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_labels() {
        assert_eq!(derive_stage_labels(FHLabel::Definite), (Superclass::Patient, 1));
        assert_eq!(derive_stage_labels(FHLabel::Probable), (Superclass::Patient, 0));
        assert_eq!(derive_stage_labels(FHLabel::Possible), (Superclass::Healthy, 1));
        assert_eq!(derive_stage_labels(FHLabel::Unlikely), (Superclass::Healthy, 0));
        let pairs: std::collections::HashSet<_> =
            FHLabel::ALL.iter().map(|&l| derive_stage_labels(l)).collect();
        assert_eq!(pairs.len(), 4);
        for l in FHLabel::ALL {
            let (route, sub) = derive_stage_labels(l);
            assert_eq!(FHLabel::from_route(route, sub), l);
            assert_eq!(route.members()[sub], l);
        }
    }

    #[test]
    fn dutch_thresholds() {
        assert_eq!(dutch_score_to_label(9.0).unwrap(), FHLabel::Definite);
        assert_eq!(dutch_score_to_label(6.0).unwrap(), FHLabel::Probable);
        assert_eq!(dutch_score_to_label(2.0).unwrap(), FHLabel::Unlikely);
        assert_eq!(dutch_score_to_label(8.0).unwrap(), FHLabel::Probable);
        assert_eq!(dutch_score_to_label(5.0).unwrap(), FHLabel::Probable);
        assert_eq!(dutch_score_to_label(3.0).unwrap(), FHLabel::Possible);
        assert_eq!(dutch_score_to_label(4.999).unwrap(), FHLabel::Possible);
        assert_eq!(dutch_score_to_label(0.0).unwrap(), FHLabel::Unlikely);
        assert!(matches!(dutch_score_to_label(-0.5), Err(Error::Domain(_))));
        assert!(dutch_score_to_label(f64::NAN).is_err());
    }

    #[test]
    fn parse_names() {
        assert_eq!("definite".parse::<FHLabel>().unwrap(), FHLabel::Definite);
        assert!("maybe".parse::<FHLabel>().is_err());
    }
}
