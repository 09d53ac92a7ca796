use serde::{Deserialize, Serialize};

use super::KappaBounds;

/// `κ(ℓ)` as an exact value or an interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KappaValue {
    Exact(f64),
    Bounds { lower: f64, upper: f64 },
}

impl KappaValue {
    /// Tightest integer interval containing `κ`.
    pub fn integer_range(&self) -> (u64, u64) {
        match *self {
            KappaValue::Exact(k) => (k.ceil().max(0.0) as u64, k.floor().max(0.0) as u64),
            KappaValue::Bounds { lower, upper } => {
                (lower.ceil().max(0.0) as u64, upper.floor().max(0.0) as u64)
            }
        }
    }
}

impl From<KappaBounds> for KappaValue {
    /// A missing lower bound is replaced by the trivial bound 0.
    fn from(b: KappaBounds) -> Self {
        KappaValue::Bounds {
            lower: b.lower.unwrap_or(0.0).max(0.0),
            upper: b.upper,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Uniqueness holds for every admissible `κ`.
    Unique,
    /// The sufficient condition fails for every admissible `κ`.
    NotGuaranteed,
    /// The interval for `κ` straddles the threshold.
    Indeterminate,
}

/// Smallest measurement counts satisfying each regime, as integer ranges
/// `[for κ at its lower end, for κ at its upper end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    /// `m ≥ κ` (cosupport known).
    pub known_min_m: [u64; 2],
    /// `m ≥ 2κ` (cosupport unknown).
    pub unknown_min_m: [u64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniquenessVerdict {
    pub kappa: KappaValue,
    pub m: usize,
    pub known_unique: Verdict,
    pub unknown_unique: Verdict,
    pub thresholds: Thresholds,
}

fn classify(lo: u64, hi: u64, m: u64) -> Verdict {
    if hi <= m {
        Verdict::Unique
    } else if lo > m {
        Verdict::NotGuaranteed
    } else {
        Verdict::Indeterminate
    }
}

/// Uniqueness of an `ℓ`-cosparse solution of `y = Mx` with `m` measurements:
/// `κ ≤ m` when the cosupport is known, `κ ≤ m/2` when it is not.
pub fn uniqueness_verdict(kappa: KappaValue, m: usize) -> UniquenessVerdict {
    let (lo, hi) = kappa.integer_range();
    let mm = m as u64;
    UniquenessVerdict {
        kappa,
        m,
        known_unique: classify(lo, hi, mm),
        unknown_unique: classify(2 * lo, 2 * hi, mm),
        thresholds: Thresholds {
            known_min_m: [lo, hi],
            unknown_min_m: [2 * lo, 2 * hi],
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{kappa_dif_bounds, kappa_general_position};

    #[test]
    fn general_position_examples() {
        let v = uniqueness_verdict(KappaValue::Exact(kappa_general_position(200, 180) as f64), 50);
        assert_eq!(v.known_unique, Verdict::Unique);
        assert_eq!(v.unknown_unique, Verdict::Unique);
        let v = uniqueness_verdict(KappaValue::Exact(kappa_general_position(200, 180) as f64), 30);
        assert_eq!(v.known_unique, Verdict::Unique);
        assert_eq!(v.unknown_unique, Verdict::NotGuaranteed);
        let v = uniqueness_verdict(KappaValue::Exact(kappa_general_position(200, 150) as f64), 49);
        assert_eq!(v.known_unique, Verdict::NotGuaranteed);
    }

    #[test]
    fn phantom_interval() {
        let kappa: KappaValue = kappa_dif_bounds(65536, 128014).unwrap().into();
        assert_eq!(kappa.integer_range(), (1276, 1529));
        let v = uniqueness_verdict(kappa, 3032);
        assert_eq!(v.known_unique, Verdict::Unique);
        assert_eq!(v.unknown_unique, Verdict::Indeterminate);
        assert_eq!(v.thresholds.unknown_min_m, [2552, 3058]);
        assert_eq!(uniqueness_verdict(kappa, 3058).unknown_unique, Verdict::Unique);
        assert_eq!(uniqueness_verdict(kappa, 2551).unknown_unique, Verdict::NotGuaranteed);
    }

    #[test]
    fn monotone_in_m() {
        let rank = |v: Verdict| match v {
            Verdict::NotGuaranteed => 0,
            Verdict::Indeterminate => 1,
            Verdict::Unique => 2,
        };
        for kappa in [KappaValue::Exact(7.0), KappaValue::Bounds { lower: 3.2, upper: 9.5 }] {
            let mut prev = (0, 0);
            for m in 0..40 {
                let v = uniqueness_verdict(kappa, m);
                let cur = (rank(v.known_unique), rank(v.unknown_unique));
                assert!(cur.0 >= prev.0 && cur.1 >= prev.1);
                prev = cur;
            }
        }
    }

    #[test]
    fn json_shape() {
        let v = uniqueness_verdict(KappaValue::Bounds { lower: 9.0, upper: 12.0 }, 20);
        let json = serde_json::to_value(v).unwrap();
        assert_eq!(json["kappa"]["lower"], 9.0);
        assert_eq!(json["known_unique"], "unique");
        assert_eq!(json["unknown_unique"], "indeterminate");
        assert_eq!(json["thresholds"]["unknown_min_m"][1], 24);
        let exact = serde_json::to_value(uniqueness_verdict(KappaValue::Exact(4.0), 3)).unwrap();
        assert_eq!(exact["kappa"], 4.0);
    }
}
