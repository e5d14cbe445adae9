//! Loop activities and the inequalities relating them.
//!
//! All evaluations take the scalar weighted length X = Σ_y h_y ℓ_y(γ) and
//! factor out the largest exponential, so nothing overflows for X up to
//! several hundred.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Spin quantum number S, stored as the integer 2S ≥ 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Spin(u32);

impl Spin {
    pub const HALF: Spin = Spin(1);
    pub const ONE: Spin = Spin(2);

    pub fn from_twice(twice: u32) -> Result<Self> {
        if twice == 0 {
            return Err(Error::pre("2S must be a positive integer (theta = 2S+1 >= 2)"));
        }
        Ok(Spin(twice))
    }

    pub fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    /// θ = 2S + 1, the number of local states.
    pub fn theta(self) -> usize {
        self.0 as usize + 1
    }

    /// Magnetic quantum numbers −S, −S+1, …, S.
    pub fn values(self) -> impl Iterator<Item = f64> {
        let s = self.value();
        (0..=self.0).map(move |j| j as f64 - s)
    }

    /// S(S+1).
    pub fn casimir(self) -> f64 {
        let s = self.value();
        s * (s + 1.0)
    }
}

impl TryFrom<u32> for Spin {
    type Error = Error;
    fn try_from(v: u32) -> Result<Self> {
        Spin::from_twice(v)
    }
}

impl From<Spin> for u32 {
    fn from(s: Spin) -> u32 {
        s.0
    }
}

/// Non-negative transverse field, one entry per site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Field(Vec<f64>);

impl Field {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::pre(format!("field entries must be finite and >= 0, got {v}")));
        }
        Ok(Field(values))
    }

    pub fn uniform(sites: usize, h: f64) -> Self {
        Field::new(vec![h; sites]).expect("uniform field must be non-negative")
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Σ_y h_y ℓ_y for a length profile.
    pub fn weigh(&self, lengths: &[f64]) -> f64 {
        self.0.iter().zip(lengths).map(|(h, l)| h * l).sum()
    }
}

impl TryFrom<Vec<f64>> for Field {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Field::new(v)
    }
}

impl From<Field> for Vec<f64> {
    fn from(f: Field) -> Vec<f64> {
        f.0
    }
}

/// Σ_a e^{aX} divided by e^{SX}: Σ_{j=0}^{2S} e^{−jX}.
#[inline]
fn activity_scaled(spin: Spin, x: f64) -> f64 {
    let q = (-x).exp();
    let mut term = 1.0;
    let mut sum = 0.0;
    for _ in 0..=spin.0 {
        sum += term;
        term *= q;
    }
    sum
}

/// ln z_h(γ) for weighted length `x`.
#[inline]
pub fn ln_loop_activity(spin: Spin, x: f64) -> f64 {
    spin.value() * x + activity_scaled(spin, x).ln()
}

/// z_h(γ) = Σ_{a=−S}^{S} exp(a X).
pub fn loop_activity(spin: Spin, x: f64) -> f64 {
    (spin.value() * x).exp() * activity_scaled(spin, x)
}

/// z_h(γ) from an explicit length profile.
pub fn loop_activity_of(spin: Spin, field: &Field, lengths: &[f64]) -> f64 {
    loop_activity(spin, field.weigh(lengths))
}

/// z̃ divided by e^{S(X⁺+X⁻)}.
#[inline]
fn split_activity_scaled(spin: Spin, plus: f64, minus: f64) -> f64 {
    let s = spin.value();
    let c = spin.casimir();
    let mut sum = 0.0;
    for j in 0..spin.0 {
        let a = j as f64 - s;
        let coeff = c - a * (a + 1.0);
        let e1 = ((a + 1.0 - s) * plus + (a - s) * minus).exp();
        let e2 = ((a - s) * plus + (a + 1.0 - s) * minus).exp();
        sum += coeff * (e1 + e2);
    }
    0.25 * sum
}

/// z̃_h(γ_{0,x}) from the weighted arc lengths X⁺ = Σ h ℓ⁺ and X⁻ = Σ h ℓ⁻.
pub fn split_activity(spin: Spin, plus: f64, minus: f64) -> f64 {
    (spin.value() * (plus + minus)).exp() * split_activity_scaled(spin, plus, minus)
}

/// z̃_h(γ_{0,x}) / z_h(γ_{0,x}), evaluated without forming either factor.
#[inline]
pub fn split_ratio(spin: Spin, plus: f64, minus: f64) -> f64 {
    split_activity_scaled(spin, plus, minus) / activity_scaled(spin, plus + minus)
}

/// Σ_{a=−S}^{S−1} (S(S+1) − a(a+1)) by direct summation.
pub fn spin_factor_sum(spin: Spin) -> f64 {
    let c = spin.casimir();
    let s = spin.value();
    (0..spin.0).map(|j| j as f64 - s).map(|a| c - a * (a + 1.0)).sum()
}

/// Four times [`spin_factor_sum`], in exact integer arithmetic.
pub fn spin_factor_sum_quadrupled(spin: Spin) -> i64 {
    let s2 = spin.0 as i64;
    // 4(S(S+1) − a(a+1)) = s2(s2+2) − a2(a2+2) with a2 = 2a.
    (0..s2).map(|j| 2 * j - s2).map(|a2| s2 * (s2 + 2) - a2 * (a2 + 2)).sum()
}

/// Closed form ⅔ S(S+1)(2S+1) as an exact fraction (numerator, denominator).
pub fn spin_factor_closed_form(spin: Spin) -> (i64, i64) {
    let s2 = spin.0 as i64;
    // ⅔ · (s2/2)(s2/2 + 1)(s2 + 1) = s2(s2+2)(s2+1) / 6
    (s2 * (s2 + 2) * (s2 + 1), 6)
}

/// ⅓ S(S+1)(2S+1), the prefactor of the loop-measure bound on ⟨S¹₀S¹ₓ⟩.
pub fn bound_prefactor(spin: Spin) -> f64 {
    spin.casimir() * spin.theta() as f64 / 3.0
}

/// z(γ₁ ∪ γ₂) / (z(γ₁) z(γ₂)) for disjoint pieces with weighted lengths x1, x2.
pub fn merge_ratio(spin: Spin, x1: f64, x2: f64) -> f64 {
    activity_scaled(spin, x1 + x2) / (activity_scaled(spin, x1) * activity_scaled(spin, x2))
}

/// Right side of the bound z̃ ≤ ⅙S(S+1)(2S+1) e^{SX} (e^{−X⁺} + e^{−X⁻}).
pub fn split_activity_upper_bound(spin: Spin, plus: f64, minus: f64) -> f64 {
    let pref = spin.casimir() * spin.theta() as f64 / 6.0;
    pref * (spin.value() * (plus + minus)).exp() * ((-plus).exp() + (-minus).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_activity_is_theta() {
        for twice in 1..6 {
            let s = Spin::from_twice(twice).unwrap();
            assert_eq!(loop_activity(s, 0.0), s.theta() as f64);
        }
    }

    #[test]
    fn half_spin_activity() {
        let z = loop_activity(Spin::HALF, 1.0);
        assert!((z - 2.0 * 0.5f64.cosh()).abs() < 1e-14);
        assert!((z - 2.25525).abs() < 1e-5);
    }

    #[test]
    fn spin_one_at_ln2() {
        assert!((loop_activity(Spin::ONE, 2f64.ln()) - 3.5).abs() < 1e-14);
    }

    #[test]
    fn split_activity_examples() {
        assert!((split_activity(Spin::HALF, 0.0, 0.0) - 0.5).abs() < 1e-15);
        for (p, m) in [(0.3, 1.7), (2.0, 0.1), (5.0, 5.0)] {
            let want = 0.5 * ((p - m) / 2.0f64).cosh();
            assert!((split_activity(Spin::HALF, p, m) - want).abs() < 1e-12 * want.max(1.0));
        }
        assert!((split_activity(Spin::ONE, 0.0, 0.0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn spin_factor_sums() {
        assert_eq!(spin_factor_sum(Spin::HALF), 1.0);
        assert_eq!(spin_factor_sum(Spin::ONE), 4.0);
        assert_eq!(spin_factor_sum(Spin::from_twice(3).unwrap()), 10.0);
    }

    #[test]
    fn merge_ratio_examples() {
        for twice in 1..4 {
            let s = Spin::from_twice(twice).unwrap();
            let inv = 1.0 / s.theta() as f64;
            assert!((merge_ratio(s, 0.0, 0.0) - inv).abs() < 1e-15);
            assert!((merge_ratio(s, 3.2, 0.0) - inv).abs() < 1e-15);
        }
        assert!((merge_ratio(Spin::HALF, 10.0, 10.0) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn no_overflow_at_large_x() {
        let z = ln_loop_activity(Spin::from_twice(3).unwrap(), 600.0);
        assert!(z.is_finite() && (z - 900.0).abs() < 1e-9);
        assert!(split_ratio(Spin::ONE, 400.0, 300.0).is_finite());
        assert!(merge_ratio(Spin::ONE, 700.0, 700.0).is_finite());
    }

    #[test]
    fn rejects_zero_spin_and_negative_field() {
        assert!(Spin::from_twice(0).is_err());
        assert!(Field::new(vec![1.0, -0.1]).is_err());
        assert!(Field::new(vec![f64::NAN]).is_err());
    }
}
