//! Verification records shared by every check.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::GridSpec;
use crate::hexfloat::serde_hex;

/// One inequality or identity check: `pass = lhs ≤ rhs + tolerance`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckReport {
    pub name: String,
    #[serde(with = "serde_hex")]
    pub lhs: f64,
    #[serde(with = "serde_hex")]
    pub rhs: f64,
    #[serde(with = "serde_hex")]
    pub slack: f64,
    pub resolution: Vec<usize>,
    #[serde(with = "serde_hex")]
    pub tolerance: f64,
    pub pass: bool,
    /// False when a precondition of the check failed; `pass` is then vacuous.
    #[serde(default = "yes")]
    pub applicable: bool,
    /// Auxiliary quantities (corrected bounds, residuals, ...).
    #[serde(default, with = "hex_map")]
    pub extra: BTreeMap<String, f64>,
    #[serde(default)]
    pub notes: String,
}

fn yes() -> bool {
    true
}

impl CheckReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        CheckReport {
            name: name.into(),
            lhs,
            rhs,
            slack: rhs - lhs,
            resolution: vec![],
            tolerance,
            pass: lhs <= rhs + tolerance,
            applicable: true,
            extra: BTreeMap::new(),
            notes: String::new(),
        }
    }

    /// A report whose precondition failed.
    pub fn not_applicable(name: impl Into<String>, notes: impl Into<String>) -> Self {
        let mut r = CheckReport::new(name, 0.0, 0.0, 0.0);
        r.applicable = false;
        r.notes = notes.into();
        r
    }

    /// A job that errored before producing numbers.
    pub fn failed(name: impl Into<String>, notes: impl Into<String>) -> Self {
        // zeros keep the record serializable; `pass` carries the verdict
        let mut r = CheckReport::new(name, 0.0, 0.0, 0.0);
        r.pass = false;
        r.notes = notes.into();
        r
    }

    pub fn with_grid(mut self, grid: &GridSpec) -> Self {
        self.resolution = grid.shape.clone();
        self
    }

    pub fn with_extra(mut self, key: &str, value: f64) -> Self {
        self.extra.insert(key.into(), value);
        self
    }

    pub fn with_notes(mut self, notes: impl Into<String>) -> Self {
        let notes = notes.into();
        if self.notes.is_empty() {
            self.notes = notes;
        } else {
            self.notes = format!("{}; {}", self.notes, notes);
        }
        self
    }

    /// Re-evaluates `pass` against a different right-hand side, keeping `rhs` for reference.
    pub fn judge_against(mut self, bound: f64) -> Self {
        self.pass = self.lhs <= bound + self.tolerance;
        self
    }
}

mod hex_map {
    use std::collections::BTreeMap;

    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::hexfloat::{format_hex, parse_hex};

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        let out: BTreeMap<&str, String> = m.iter().map(|(k, v)| (k.as_str(), format_hex(*v))).collect();
        out.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        let raw = BTreeMap::<String, String>::deserialize(d)?;
        raw.into_iter()
            .map(|(k, v)| parse_hex(&v).map(|x| (k, x)).map_err(D::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_flag_and_slack() {
        let r = CheckReport::new("x", 1.0, 2.0, 0.0);
        assert!(r.pass && r.slack == 1.0);
        let r = CheckReport::new("x", 2.0, 1.0, 0.5);
        assert!(!r.pass && r.slack == -1.0);
        let r = CheckReport::new("x", 2.0, 1.0, 1.0);
        assert!(r.pass);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let r = CheckReport::new("x", 0.1, 1.0 / 3.0, 1e-9)
            .with_extra("rhs_corrected", std::f64::consts::PI)
            .with_notes("n");
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("0x1."));
        let back: CheckReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }
}
