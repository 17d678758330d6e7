//! Exact non-negative rationals over integer pixel counts.
//!
//! IoU scores and growth ratios are always quotients of pixel counts, so they
//! fit in `u64` and compare exactly via `u128` cross-multiplication. Sums of
//! scores (list objectives, Hungarian potentials) go through [`BigRational`].

use num_bigint::BigInt;
use num_rational::BigRational;
use std::cmp::Ordering;
use std::fmt;

/// A non-negative rational `num / den` on pixel counts. Zero is `0/1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PixelRatio {
    num: u64,
    den: u64,
}

impl PixelRatio {
    pub const ZERO: PixelRatio = PixelRatio { num: 0, den: 1 };
    pub const ONE: PixelRatio = PixelRatio { num: 1, den: 1 };

    /// `num / den`; a zero denominator is only allowed with a zero numerator
    /// (0/0 is defined as 0).
    pub fn new(num: u64, den: u64) -> PixelRatio {
        if num == 0 {
            return PixelRatio::ZERO;
        }
        assert!(den > 0, "nonzero numerator over zero denominator");
        let g = gcd(num, den);
        PixelRatio {
            num: num / g,
            den: den / g,
        }
    }

    pub fn numer(&self) -> u64 {
        self.num
    }

    pub fn denom(&self) -> u64 {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn to_big(&self) -> BigRational {
        BigRational::new(BigInt::from(self.num), BigInt::from(self.den))
    }
}

impl PartialOrd for PixelRatio {
    fn partial_cmp(&self, other: &PixelRatio) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PixelRatio {
    fn cmp(&self, other: &PixelRatio) -> Ordering {
        let lhs = self.num as u128 * other.den as u128;
        let rhs = other.num as u128 * self.den as u128;
        lhs.cmp(&rhs)
    }
}

impl fmt::Display for PixelRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// A growth ratio `r = Δx/Δy`, with `+∞` for Δy = 0, Δx > 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrowthRatio {
    Finite(PixelRatio),
    Infinite,
}

impl GrowthRatio {
    pub fn new(delta_x: u64, delta_y: u64) -> GrowthRatio {
        if delta_y == 0 && delta_x > 0 {
            GrowthRatio::Infinite
        } else {
            // Δx = Δy = 0 is treated as ratio 0 by convention.
            GrowthRatio::Finite(PixelRatio::new(delta_x, delta_y.max(1)))
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, GrowthRatio::Infinite)
    }

    /// Compare against an IoU value; `+∞` exceeds every finite ratio.
    pub fn cmp_ratio(&self, iou: &PixelRatio) -> Ordering {
        match self {
            GrowthRatio::Infinite => Ordering::Greater,
            GrowthRatio::Finite(r) => r.cmp(iou),
        }
    }
}

impl PartialOrd for GrowthRatio {
    fn partial_cmp(&self, other: &GrowthRatio) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GrowthRatio {
    fn cmp(&self, other: &GrowthRatio) -> Ordering {
        match (self, other) {
            (GrowthRatio::Infinite, GrowthRatio::Infinite) => Ordering::Equal,
            (GrowthRatio::Infinite, GrowthRatio::Finite(_)) => Ordering::Greater,
            (GrowthRatio::Finite(_), GrowthRatio::Infinite) => Ordering::Less,
            (GrowthRatio::Finite(a), GrowthRatio::Finite(b)) => a.cmp(b),
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_ordering_is_exact() {
        // 1/3 < 33333333/100000000 would be wrong; cross multiplication keeps it right.
        let a = PixelRatio::new(1, 3);
        let b = PixelRatio::new(33333333, 100000000);
        assert!(a > b);
        assert_eq!(PixelRatio::new(2, 4), PixelRatio::new(1, 2));
    }

    #[test]
    fn zero_cases() {
        assert_eq!(PixelRatio::new(0, 0), PixelRatio::ZERO);
        assert!(PixelRatio::ZERO.is_zero());
    }

    #[test]
    fn growth_ratio_infinite_sorts_above_finite() {
        let inf = GrowthRatio::new(3, 0);
        let fin = GrowthRatio::new(100, 1);
        assert!(inf > fin);
        assert_eq!(GrowthRatio::new(0, 0), GrowthRatio::Finite(PixelRatio::ZERO));
    }
}
