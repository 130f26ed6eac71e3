//! Rating remapping and weight normalization.
//!
//! Ratings from differently anchored scales (0–3, 1–10) are shifted so the
//! floor is always 0. Importance weights are elicited on whatever free scale a
//! respondent prefers and rescaled proportionally to a fixed total.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ScaleDef;

/// Tolerance on sums of normalized weights, relative to the target total.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScaleError {
    #[error("value {value} outside scale {name} [{min}, {max}]")]
    OutOfRange {
        value: i64,
        name: String,
        min: i64,
        max: i64,
    },
    #[error("all weights are zero")]
    AllZeroWeights,
    #[error("weight for {0} is negative")]
    NegativeWeight(String),
    #[error("weight for {0} is not a finite number")]
    NonFiniteWeight(String),
    #[error("target total must be positive and finite, got {0}")]
    InvalidTarget(f64),
    #[error("criterion order does not match weight keys")]
    OrderMismatch,
    #[error("weights sum to {sum}, expected {expected}")]
    UnnormalizedWeights { sum: f64, expected: f64 },
}

impl ScaleError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::OutOfRange { .. } => "OUT_OF_RANGE",
            Self::AllZeroWeights => "ALL_ZERO_WEIGHTS",
            Self::NegativeWeight(_) => "NEGATIVE_WEIGHT",
            Self::NonFiniteWeight(_) => "NON_FINITE_WEIGHT",
            Self::InvalidTarget(_) => "INVALID_TARGET",
            Self::OrderMismatch => "ORDER_MISMATCH",
            Self::UnnormalizedWeights { .. } => "UNNORMALIZED_WEIGHTS",
        }
    }
}

/// Shift a raw rating so the scale floor maps to 0.
pub fn remap_rating(value: i64, scale: &ScaleDef) -> Result<u32, ScaleError> {
    if !scale.contains(value) {
        return Err(ScaleError::OutOfRange {
            value,
            name: scale.name.clone(),
            min: scale.min,
            max: scale.max,
        });
    }
    Ok((value - scale.min) as u32)
}

/// Inverse of [`remap_rating`].
pub fn unmap_rating(canonical: u32, scale: &ScaleDef) -> Result<i64, ScaleError> {
    let value = scale.min + i64::from(canonical);
    if !scale.contains(value) {
        return Err(ScaleError::OutOfRange {
            value,
            name: scale.name.clone(),
            min: scale.min,
            max: scale.max,
        });
    }
    Ok(value)
}

/// Check a raw weight map: finite, nonnegative, not all zero. Returns the sum.
pub fn check_raw_weights(raw: &BTreeMap<String, f64>) -> Result<f64, ScaleError> {
    let mut sum = 0.0;
    for (id, &w) in raw {
        if !w.is_finite() {
            return Err(ScaleError::NonFiniteWeight(id.clone()));
        }
        if w < 0.0 {
            return Err(ScaleError::NegativeWeight(id.clone()));
        }
        sum += w;
    }
    if sum <= 0.0 {
        return Err(ScaleError::AllZeroWeights);
    }
    Ok(sum)
}

/// Rescale weights proportionally so they total `target_total`.
pub fn normalize_weights(
    raw: &BTreeMap<String, f64>,
    target_total: f64,
) -> Result<BTreeMap<String, f64>, ScaleError> {
    if !(target_total.is_finite() && target_total > 0.0) {
        return Err(ScaleError::InvalidTarget(target_total));
    }
    let sum = check_raw_weights(raw)?;
    Ok(raw
        .iter()
        .map(|(id, &w)| (id.clone(), w * target_total / sum))
        .collect())
}

/// A respondent's weights in raw form and normalized to 100 and to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightVector {
    pub respondent_id: String,
    pub raw: BTreeMap<String, f64>,
    pub normalized_100: BTreeMap<String, f64>,
    pub normalized_1: BTreeMap<String, f64>,
}

impl WeightVector {
    pub fn from_raw(
        respondent_id: impl Into<String>,
        raw: BTreeMap<String, f64>,
    ) -> Result<Self, ScaleError> {
        let normalized_100 = normalize_weights(&raw, 100.0)?;
        let normalized_1 = normalize_weights(&raw, 1.0)?;
        Ok(Self {
            respondent_id: respondent_id.into(),
            raw,
            normalized_100,
            normalized_1,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfilePoint {
    /// 1-based position in the criterion order.
    pub index: usize,
    pub criterion: String,
    pub cumulative_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightProfile {
    pub respondent: String,
    pub points: Vec<ProfilePoint>,
}

impl WeightProfile {
    pub fn final_percent(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.cumulative_percent)
    }
}

/// Cumulative percentage curve of normalized-to-100 weights in a fixed order.
pub fn weight_profile(
    respondent: impl Into<String>,
    normalized_100: &BTreeMap<String, f64>,
    criterion_order: &[String],
) -> Result<WeightProfile, ScaleError> {
    let order_keys: BTreeSet<&str> = criterion_order.iter().map(String::as_str).collect();
    if order_keys.len() != criterion_order.len()
        || order_keys.len() != normalized_100.len()
        || !normalized_100
            .keys()
            .all(|k| order_keys.contains(k.as_str()))
    {
        return Err(ScaleError::OrderMismatch);
    }
    let total: f64 = normalized_100.values().sum();
    if (total - 100.0).abs() > 100.0 * NORMALIZATION_TOLERANCE {
        return Err(ScaleError::UnnormalizedWeights {
            sum: total,
            expected: 100.0,
        });
    }

    let mut running = 0.0;
    let points = criterion_order
        .iter()
        .enumerate()
        .map(|(i, id)| {
            running += normalized_100[id];
            ProfilePoint {
                index: i + 1,
                criterion: id.clone(),
                cumulative_percent: running,
            }
        })
        .collect();
    Ok(WeightProfile {
        respondent: respondent.into(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }

    #[test]
    fn ten_point_remaps_to_zero_floor() {
        let s = ScaleDef::harm_ten_point();
        assert_eq!(remap_rating(1, &s).unwrap(), 0);
        assert_eq!(remap_rating(10, &s).unwrap(), 9);
        assert_eq!(remap_rating(0, &ScaleDef::harm_four_point()).unwrap(), 0);
    }

    #[test]
    fn remap_rejects_out_of_range() {
        let s = ScaleDef::harm_four_point();
        assert_eq!(remap_rating(4, &s).unwrap_err().code(), "OUT_OF_RANGE");
        assert_eq!(remap_rating(-1, &s).unwrap_err().code(), "OUT_OF_RANGE");
        assert!(unmap_rating(4, &s).is_err());
    }

    #[test]
    fn proportional_scaling() {
        let out = normalize_weights(&map(&[("a", 1.0), ("b", 3.0)]), 100.0).unwrap();
        assert_eq!(out, map(&[("a", 25.0), ("b", 75.0)]));
        let out = normalize_weights(&map(&[("a", 10.0), ("b", 30.0)]), 100.0).unwrap();
        assert_eq!(out, map(&[("a", 25.0), ("b", 75.0)]));
    }

    #[test]
    fn equal_weights_split_evenly() {
        let raw: BTreeMap<String, f64> = (1..=21).map(|i| (format!("Q{i}"), 7.0)).collect();
        let out = normalize_weights(&raw, 100.0).unwrap();
        for v in out.values() {
            assert!((v - 100.0 / 21.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_entries_allowed_but_not_all_zero() {
        assert!(normalize_weights(&map(&[("a", 0.0), ("b", 2.0)]), 100.0).is_ok());
        let err = normalize_weights(&map(&[("a", 0.0), ("b", 0.0)]), 100.0).unwrap_err();
        assert_eq!(err.code(), "ALL_ZERO_WEIGHTS");
        let err = normalize_weights(&map(&[("a", -1.0), ("b", 2.0)]), 100.0).unwrap_err();
        assert_eq!(err.code(), "NEGATIVE_WEIGHT");
        let err = normalize_weights(&map(&[("a", f64::NAN)]), 100.0).unwrap_err();
        assert_eq!(err.code(), "NON_FINITE_WEIGHT");
        assert!(normalize_weights(&map(&[("a", 1.0)]), 0.0).is_err());
    }

    #[test]
    fn profile_cumulative_sum() {
        let w = map(&[("a", 50.0), ("b", 30.0), ("c", 20.0)]);
        let order = ["a", "b", "c"].map(String::from);
        let p = weight_profile("x", &w, &order).unwrap();
        let cum: Vec<f64> = p.points.iter().map(|p| p.cumulative_percent).collect();
        assert_eq!(cum, [50.0, 80.0, 100.0]);
        assert_eq!(p.points[2].index, 3);
    }

    #[test]
    fn profile_single_criterion() {
        let p = weight_profile("x", &map(&[("a", 100.0)]), &["a".to_string()]).unwrap();
        assert_eq!(p.points.len(), 1);
        assert_eq!(p.final_percent(), 100.0);
    }

    #[test]
    fn equal_profile_is_a_straight_line() {
        let raw: BTreeMap<String, f64> = (1..=21).map(|i| (format!("Q{i}"), 1.0)).collect();
        let order: Vec<String> = (1..=21).map(|i| format!("Q{i}")).collect();
        let n = normalize_weights(&raw, 100.0).unwrap();
        let p = weight_profile("x", &n, &order).unwrap();
        for pt in &p.points {
            assert!((pt.cumulative_percent - pt.index as f64 * 100.0 / 21.0).abs() < 1e-9);
        }
    }

    #[test]
    fn profile_order_mismatch() {
        let w = map(&[("a", 50.0), ("b", 50.0)]);
        let err = weight_profile("x", &w, &["a".to_string()]).unwrap_err();
        assert_eq!(err.code(), "ORDER_MISMATCH");
        let err = weight_profile("x", &w, &["a".into(), "c".into()]).unwrap_err();
        assert_eq!(err.code(), "ORDER_MISMATCH");
        let err = weight_profile("x", &w, &["a".into(), "a".into()]).unwrap_err();
        assert_eq!(err.code(), "ORDER_MISMATCH");
    }

    fn raw_weights() -> impl Strategy<Value = BTreeMap<String, f64>> {
        prop::collection::vec(0.0f64..1000.0, 1..25)
            .prop_filter("nonzero total", |v| v.iter().sum::<f64>() > 0.0)
            .prop_map(|v| {
                v.into_iter()
                    .enumerate()
                    .map(|(i, w)| (format!("c{i}"), w))
                    .collect()
            })
    }

    proptest! {
        #[test]
        fn remap_roundtrip(min in -20i64..20, span in 1i64..30, offset in 0i64..30) {
            let scale = ScaleDef::new("s", min, min + span, "lo", "hi");
            let value = min + offset.min(span);
            let canonical = remap_rating(value, &scale).unwrap();
            prop_assert!(canonical <= scale.canonical_max());
            prop_assert_eq!(unmap_rating(canonical, &scale).unwrap(), value);
        }

        #[test]
        fn normalization_is_scale_invariant(raw in raw_weights(), c in 1e-3f64..1e3) {
            let scaled: BTreeMap<String, f64> = raw.iter().map(|(k, v)| (k.clone(), v * c)).collect();
            let a = normalize_weights(&raw, 100.0).unwrap();
            let b = normalize_weights(&scaled, 100.0).unwrap();
            for (k, va) in &a {
                prop_assert!((va - b[k]).abs() <= 1e-9 * va.abs().max(1e-300));
            }
            let total: f64 = a.values().sum();
            prop_assert!((total - 100.0).abs() <= 100.0 * 1e-9);
            let unit = normalize_weights(&raw, 1.0).unwrap();
            for (k, v) in &unit {
                prop_assert!((v - a[k] / 100.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn profiles_are_monotone_and_end_at_100(raw in raw_weights()) {
            let order: Vec<String> = raw.keys().cloned().collect();
            let n = normalize_weights(&raw, 100.0).unwrap();
            let p = weight_profile("x", &n, &order).unwrap();
            for w in p.points.windows(2) {
                prop_assert!(w[1].cumulative_percent >= w[0].cumulative_percent);
            }
            prop_assert!((p.final_percent() - 100.0).abs() <= 1e-9);
        }
    }
}
