//! Scalar reward composition from the five objective terms.
//!
//! The environment reports every term as a non-negative magnitude and the
//! composition subtracts the penalty terms itself:
//!
//! ```text
//! r = w_r * R - w_o * O - w_s * S - w_q * Q + w_f * F
//! ```
//!
//! Weights are therefore required to be non-negative. [`WeightVector`] cannot
//! be constructed with a negative component, which rules out the
//! double-negation bug (a negative outage weight rewarding outages).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::satenv::RewardTerms;

pub const WEIGHT_MIN: f64 = 0.01;
pub const WEIGHT_MAX: f64 = 2.0;
pub const WEIGHT_NAMES: [&str; 5] = ["sum_rate", "outage", "switching", "queue", "fairness"];

/// Reward weights `[w_r, w_o, w_s, w_q, w_f]`.
///
/// Serialized as a 5-element JSON array in that order. Deserialization runs
/// the same validation as [`WeightVector::new`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 5]", into = "[f64; 5]")]
pub struct WeightVector([f64; 5]);

impl WeightVector {
    pub fn new(values: [f64; 5]) -> Result<Self> {
        for (name, &v) in WEIGHT_NAMES.iter().zip(values.iter()) {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("weight {name}")));
            }
            if v < 0.0 {
                return Err(Error::SignConvention { name, value: v });
            }
        }
        Ok(WeightVector(values))
    }

    /// Validate and clip into `[WEIGHT_MIN, WEIGHT_MAX]` in one go.
    pub fn clamped(values: [f64; 5]) -> Result<Self> {
        Ok(Self::new(values)?.clamp())
    }

    pub fn splat(v: f64) -> Result<Self> {
        Self::new([v; 5])
    }

    pub fn as_array(&self) -> [f64; 5] {
        self.0
    }

    pub fn get(&self, index: usize) -> f64 {
        self.0[index]
    }

    pub fn sum_rate(&self) -> f64 {
        self.0[0]
    }
    pub fn outage(&self) -> f64 {
        self.0[1]
    }
    pub fn switching(&self) -> f64 {
        self.0[2]
    }
    pub fn queue(&self) -> f64 {
        self.0[3]
    }
    pub fn fairness(&self) -> f64 {
        self.0[4]
    }

    /// Clip every component into `[0.01, 2.0]`.
    pub fn clamp(&self) -> WeightVector {
        WeightVector(self.0.map(|v| v.clamp(WEIGHT_MIN, WEIGHT_MAX)))
    }

    pub fn is_clamp_valid(&self) -> bool {
        self.0.iter().all(|v| (WEIGHT_MIN..=WEIGHT_MAX).contains(v))
    }

    /// Replace one component, keeping the sign convention.
    pub fn with_component(&self, index: usize, value: f64) -> Result<WeightVector> {
        let mut values = self.0;
        values[index] = value;
        WeightVector::new(values)
    }

    /// Component-wise product, used to apply an intent bias.
    pub fn hadamard(&self, other: &WeightVector) -> WeightVector {
        let mut out = self.0;
        for (o, b) in out.iter_mut().zip(other.0.iter()) {
            *o *= b;
        }
        WeightVector(out)
    }

    pub fn scale(&self, alpha: f64) -> Result<WeightVector> {
        WeightVector::new(self.0.map(|v| v * alpha))
    }

    /// Largest absolute component difference.
    pub fn linf_distance(&self, other: &WeightVector) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Linear blend `self + t * (other - self)`, `t` in `[0, 1]`.
    pub fn lerp(&self, other: &WeightVector, t: f64) -> WeightVector {
        let t = t.clamp(0.0, 1.0);
        if t == 1.0 {
            return *other;
        }
        let mut out = self.0;
        for (o, b) in out.iter_mut().zip(other.0.iter()) {
            *o += t * (b - *o);
        }
        // Convex combination of non-negative vectors stays non-negative.
        WeightVector(out)
    }
}

impl TryFrom<[f64; 5]> for WeightVector {
    type Error = Error;

    fn try_from(values: [f64; 5]) -> Result<Self> {
        WeightVector::new(values)
    }
}

impl From<WeightVector> for [f64; 5] {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

/// `w_r * R - w_o * O - w_s * S - w_q * Q + w_f * F`.
pub fn compose(w: &WeightVector, t: &RewardTerms) -> f64 {
    w.sum_rate() * t.sum_rate_norm - w.outage() * t.outage_count - w.switching() * t.switching
        - w.queue() * t.queue_overflow
        + w.fairness() * t.fairness
}

/// Limit each component to within `pct` (relative) of `current`, then apply
/// the absolute clamp.
pub fn relative_clamp(proposed: &WeightVector, current: &WeightVector, pct: f64) -> WeightVector {
    let mut out = proposed.0;
    for (p, &c) in out.iter_mut().zip(current.0.iter()) {
        let lo = c * (1.0 - pct);
        let hi = c * (1.0 + pct);
        *p = p.clamp(lo.min(hi), hi.max(lo));
    }
    WeightVector(out).clamp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn terms(r: f64, o: f64, s: f64, q: f64, f: f64) -> RewardTerms {
        RewardTerms {
            sum_rate_norm: r,
            outage_count: o,
            switching: s,
            queue_overflow: q,
            fairness: f,
        }
    }

    #[test]
    fn compose_examples() {
        let w = WeightVector::new([1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(compose(&w, &terms(0.5, 3.0, 1.0, 2.0, 0.7)), 0.5);
        let ones = WeightVector::splat(1.0).unwrap();
        assert_eq!(compose(&ones, &terms(1.0, 1.0, 1.0, 1.0, 1.0)), -1.0);
    }

    #[test]
    fn negative_weight_is_rejected() {
        let err = WeightVector::new([1.0, -0.5, 0.3, 0.5, 0.5]).unwrap_err();
        assert!(matches!(err, Error::SignConvention { name: "outage", .. }));
        assert!(WeightVector::new([f64::NAN, 1.0, 1.0, 1.0, 1.0]).is_err());
        assert!(serde_json::from_str::<WeightVector>("[1,1,-1,1,1]").is_err());
    }

    #[test]
    fn clamp_examples() {
        let w = WeightVector::new([0.0, 3.0, 1.0, 1.0, 1.0]).unwrap().clamp();
        assert_eq!(w.as_array(), [0.01, 2.0, 1.0, 1.0, 1.0]);
        let inside = WeightVector::new([0.5, 1.0, 0.3, 1.9, 0.01]).unwrap();
        assert_eq!(inside.clamp(), inside);
        assert_eq!(WeightVector::splat(5.0).unwrap().clamp().as_array(), [2.0; 5]);
    }

    #[test]
    fn relative_clamp_examples() {
        let cur = WeightVector::splat(0.5).unwrap();
        let prop = WeightVector::splat(1.0).unwrap();
        let out = relative_clamp(&prop, &cur, 0.3);
        for v in out.as_array() {
            assert!((v - 0.65).abs() < 1e-12);
        }
        assert_eq!(relative_clamp(&cur, &cur, 0.3), cur);

        let base = [1.0, 0.9, 0.615, 0.5, 0.8];
        let prop = WeightVector::new([1.0, 0.9, 0.96, 0.5, 0.8]).unwrap();
        let out = relative_clamp(&prop, &WeightVector::new(base).unwrap(), 0.3);
        assert!((out.switching() - 0.7995).abs() < 1e-12);
        let mut admitted = base;
        admitted[2] = 0.80;
        let out = relative_clamp(&prop, &WeightVector::new(admitted).unwrap(), 0.3);
        assert!((out.switching() - 0.96).abs() < 1e-12);
    }

    #[test]
    fn json_is_a_five_element_array() {
        let w = WeightVector::new([1.2, 1.0, 0.3, 0.5, 0.5]).unwrap();
        assert_eq!(serde_json::to_string(&w).unwrap(), "[1.2,1.0,0.3,0.5,0.5]");
    }

    fn arb_weights() -> impl Strategy<Value = WeightVector> {
        prop::array::uniform5(0.0..5.0f64).prop_map(|a| WeightVector::new(a).unwrap())
    }

    fn arb_terms() -> impl Strategy<Value = RewardTerms> {
        (0.0..1.0f64, 0.0..19.0f64, 0.0..2.0f64, 0.0..10.0f64, 0.05..1.0f64)
            .prop_map(|(r, o, s, q, f)| terms(r, o.floor(), s, q, f))
    }

    proptest! {
        #[test]
        fn compose_is_homogeneous(w in arb_weights(), t in arb_terms(), alpha in 0.0..4.0f64) {
            let lhs = compose(&w.scale(alpha).unwrap(), &t);
            let rhs = alpha * compose(&w, &t);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }

        #[test]
        fn clamp_is_idempotent_and_bounded(w in arb_weights()) {
            let c = w.clamp();
            prop_assert_eq!(c.clamp(), c);
            prop_assert!(c.is_clamp_valid());
        }

        #[test]
        fn outage_strictly_penalized(w in arb_weights(), t in arb_terms(), extra in 0.5..5.0f64) {
            prop_assume!(w.outage() > 0.0);
            let mut worse = t;
            worse.outage_count += extra;
            prop_assert!(compose(&w, &worse) < compose(&w, &t));
        }

        #[test]
        fn any_negative_component_rejected(mut a in prop::array::uniform5(-3.0..3.0f64), idx in 0usize..5) {
            a[idx] = -a[idx].abs() - 1e-6;
            prop_assert!(WeightVector::new(a).is_err());
        }

        #[test]
        fn relative_clamp_band(p in arb_weights(), c in prop::array::uniform5(0.05..1.5f64), pct in 0.05..0.5f64) {
            let cur = WeightVector::new(c).unwrap();
            let out = relative_clamp(&p, &cur, pct);
            for i in 0..5 {
                let v = out.get(i);
                let lo = (c[i] * (1.0 - pct)).clamp(WEIGHT_MIN, WEIGHT_MAX);
                let hi = (c[i] * (1.0 + pct)).clamp(WEIGHT_MIN, WEIGHT_MAX);
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
    }
}
