use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Outcome of one identity, inequality or bound verification.
///
/// `pass` holds exactly when `worst_violation ≤ threshold`. A NaN violation is
/// recorded as `+∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub sample_count: usize,
    pub worst_violation: f64,
    pub worst_location: Vec<f64>,
    pub threshold: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

impl CheckReport {
    /// Reduce `(violation, location)` samples to the worst one. Ties keep the
    /// earliest sample.
    pub fn from_samples<I>(name: impl Into<String>, threshold: f64, samples: I) -> Self
    where
        I: IntoIterator<Item = (f64, Vec<f64>)>,
    {
        let mut count = 0;
        let mut worst = f64::NEG_INFINITY;
        let mut location = Vec::new();
        for (v, loc) in samples {
            let v = if v.is_nan() { f64::INFINITY } else { v };
            if count == 0 || v > worst {
                worst = v;
                location = loc;
            }
            count += 1;
        }
        if count == 0 {
            worst = 0.0;
        }
        CheckReport {
            name: name.into(),
            sample_count: count,
            worst_violation: worst,
            worst_location: location,
            threshold,
            pass: worst <= threshold,
            seed: None,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.metadata.insert(key.into(), value.to_string());
        self
    }

    /// Fold another report of the same check into this one, keeping the worse sample.
    pub fn merge(mut self, other: CheckReport) -> Self {
        if other.worst_violation > self.worst_violation {
            self.worst_violation = other.worst_violation;
            self.worst_location = other.worst_location;
        }
        self.sample_count += other.sample_count;
        self.pass = self.worst_violation <= self.threshold;
        self
    }

    /// Force a failure that is not captured by the sampled violation
    /// (e.g. a precondition that did not hold).
    pub fn fail_with(mut self, reason: impl ToString) -> Self {
        self.pass = false;
        self.metadata.insert("failure".into(), reason.to_string());
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worst_sample_and_ties() {
        let r = CheckReport::from_samples(
            "x",
            0.5,
            vec![(0.1, vec![0.0]), (0.4, vec![1.0]), (0.4, vec![2.0])],
        );
        assert_eq!(r.worst_violation, 0.4);
        assert_eq!(r.worst_location, vec![1.0]);
        assert!(r.pass);
        let r = CheckReport::from_samples("x", 0.5, vec![(f64::NAN, vec![3.0])]);
        assert!(!r.pass);
        assert_eq!(r.worst_violation, f64::INFINITY);
    }
}
