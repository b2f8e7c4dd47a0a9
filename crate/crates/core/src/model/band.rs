use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed frequency interval `{w : (w - w1)(w - w2) <= 0}` with `w1 < w2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BandJson", into = "BandJson")]
pub struct FrequencyBand {
    w1: f64,
    w2: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BandJson {
    pub w1: f64,
    pub w2: f64,
}

impl FrequencyBand {
    pub fn new(w1: f64, w2: f64) -> Result<Self> {
        if !(w1.is_finite() && w2.is_finite() && w1 < w2) {
            return Err(Error::InvalidBand { w1, w2 });
        }
        Ok(Self { w1, w2 })
    }

    /// `[-w, w]`, the low-frequency band.
    pub fn symmetric(w: f64) -> Result<Self> {
        Self::new(-w, w)
    }

    pub fn lower(&self) -> f64 {
        self.w1
    }

    pub fn upper(&self) -> f64 {
        self.w2
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.w1 + self.w2)
    }

    pub fn product(&self) -> f64 {
        self.w1 * self.w2
    }

    pub fn width(&self) -> f64 {
        self.w2 - self.w1
    }

    /// `(w - w1)(w - w2)`; non-positive exactly on the band.
    pub fn characteristic(&self, w: f64) -> f64 {
        (w - self.w1) * (w - self.w2)
    }

    pub fn contains(&self, w: f64) -> bool {
        self.characteristic(w) <= 0.0
    }

    pub fn contains_interior(&self, w: f64) -> bool {
        self.characteristic(w) < 0.0
    }

    pub fn is_centered(&self) -> bool {
        self.w1 == -self.w2
    }
}

impl TryFrom<BandJson> for FrequencyBand {
    type Error = Error;

    fn try_from(value: BandJson) -> Result<Self> {
        FrequencyBand::new(value.w1, value.w2)
    }
}

impl From<FrequencyBand> for BandJson {
    fn from(b: FrequencyBand) -> Self {
        BandJson { w1: b.w1, w2: b.w2 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn rejects_degenerate() {
        assert!(FrequencyBand::new(1.0, 1.0).is_err());
        assert!(FrequencyBand::new(2.0, 1.0).is_err());
        assert!(FrequencyBand::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn derived_quantities() {
        let b = FrequencyBand::new(-3.0, 3.0).unwrap();
        assert_eq!(b.center(), 0.0);
        assert_eq!(-b.product(), 9.0);
        assert!(b.is_centered());
    }

    #[test]
    fn membership_matches_characteristic_sign() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let b = FrequencyBand::new(-0.7, 2.3).unwrap();
        for _ in 0..1000 {
            let w: f64 = rng.gen_range(-5.0..5.0);
            let inside = w >= b.lower() && w <= b.upper();
            assert_eq!(b.contains(w), inside);
            assert_eq!(b.contains(w), (w - b.lower()) * (w - b.upper()) <= 0.0);
        }
        assert!(b.contains(b.lower()) && !b.contains_interior(b.lower()));
    }
}
