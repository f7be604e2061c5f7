//! Nonnegative magnitudes in base-2 log scale.
//!
//! Staircase weights live at radii like 2^(-256) where measures and dual
//! integrals leave the representable range of `f64` long before the
//! quantities of interest (ratios, slopes, capacities) do. All internal
//! accumulation therefore carries `log2` of a nonnegative value; exact zero
//! and infinity are `-inf` / `+inf` in the exponent.

use std::f64::consts::LN_2;

/// A nonnegative real stored as its base-2 logarithm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mag {
    log2: f64,
}

impl Mag {
    pub const ZERO: Mag = Mag {
        log2: f64::NEG_INFINITY,
    };
    pub const ONE: Mag = Mag { log2: 0.0 };
    pub const INFINITY: Mag = Mag {
        log2: f64::INFINITY,
    };

    /// Wraps a raw base-2 exponent.
    pub fn from_log2(log2: f64) -> Mag {
        debug_assert!(!log2.is_nan());
        Mag { log2 }
    }

    /// Converts a nonnegative `f64`. Negative input is a caller bug.
    pub fn from_f64(x: f64) -> Mag {
        assert!(x >= 0.0, "Mag::from_f64 on negative value {x}");
        Mag { log2: x.log2() }
    }

    pub fn log2(self) -> f64 {
        self.log2
    }

    /// Natural logarithm of the value.
    pub fn ln(self) -> f64 {
        self.log2 * LN_2
    }

    /// May underflow to 0 or overflow to `inf`; the exponent is authoritative.
    pub fn to_f64(self) -> f64 {
        self.log2.exp2()
    }

    pub fn is_zero(self) -> bool {
        self.log2 == f64::NEG_INFINITY
    }

    pub fn is_infinite(self) -> bool {
        self.log2 == f64::INFINITY
    }

    pub fn is_finite_positive(self) -> bool {
        self.log2.is_finite()
    }

    pub fn mul(self, rhs: Mag) -> Mag {
        // 0 * inf has no meaning for the integrals built here.
        debug_assert!(
            !(self.is_zero() && rhs.is_infinite()) && !(self.is_infinite() && rhs.is_zero())
        );
        Mag {
            log2: self.log2 + rhs.log2,
        }
    }

    pub fn div(self, rhs: Mag) -> Mag {
        debug_assert!(!(self.is_zero() && rhs.is_zero()) && !(self.is_infinite() && rhs.is_infinite()));
        Mag {
            log2: self.log2 - rhs.log2,
        }
    }

    /// `self^e` with the usual limit conventions: `0^e` is 0 for e > 0 and
    /// infinite for e < 0, and symmetrically for infinity.
    pub fn powf(self, e: f64) -> Mag {
        if e == 0.0 {
            return Mag::ONE;
        }
        Mag {
            log2: self.log2 * e,
        }
    }

    pub fn add(self, rhs: Mag) -> Mag {
        let (hi, lo) = if self.log2 >= rhs.log2 {
            (self.log2, rhs.log2)
        } else {
            (rhs.log2, self.log2)
        };
        if hi == f64::NEG_INFINITY {
            return Mag::ZERO;
        }
        if hi == f64::INFINITY {
            return Mag::INFINITY;
        }
        let d = lo - hi; // <= 0
        Mag {
            log2: hi + (d * LN_2).exp().ln_1p() / LN_2,
        }
    }

    pub fn max(self, rhs: Mag) -> Mag {
        if self.log2 >= rhs.log2 {
            self
        } else {
            rhs
        }
    }

    pub fn min(self, rhs: Mag) -> Mag {
        if self.log2 <= rhs.log2 {
            self
        } else {
            rhs
        }
    }
}

impl PartialOrd for Mag {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.log2.partial_cmp(&other.log2)
    }
}

/// Streaming sum of magnitudes, rescaled so the running maximum sits at
/// exponent zero.
#[derive(Clone, Debug)]
pub struct MagSum {
    max_log2: f64,
    acc: f64,
}

impl MagSum {
    pub fn new() -> MagSum {
        MagSum {
            max_log2: f64::NEG_INFINITY,
            acc: 0.0,
        }
    }

    pub fn add(&mut self, m: Mag) {
        if m.is_zero() {
            return;
        }
        if m.log2 == f64::INFINITY {
            self.max_log2 = f64::INFINITY;
            self.acc = 1.0;
            return;
        }
        if self.max_log2 == f64::INFINITY {
            return;
        }
        if m.log2 <= self.max_log2 {
            self.acc += (m.log2 - self.max_log2).exp2();
        } else {
            self.acc = self.acc * (self.max_log2 - m.log2).exp2() + 1.0;
            self.max_log2 = m.log2;
        }
    }

    pub fn total(&self) -> Mag {
        if self.max_log2 == f64::NEG_INFINITY {
            return Mag::ZERO;
        }
        if self.max_log2 == f64::INFINITY {
            return Mag::INFINITY;
        }
        Mag::from_log2(self.max_log2 + self.acc.log2())
    }
}

impl Default for MagSum {
    fn default() -> Self {
        Self::new()
    }
}

/// log2(1 - 2^(-d)) for d > 0, stable for both tiny and large d.
pub fn log2_one_minus_exp2_neg(d: f64) -> f64 {
    debug_assert!(d > 0.0);
    // 1 - 2^(-d) = -expm1(-d ln 2)
    (-(-d * LN_2).exp_m1()).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn add_spanning_many_scales() {
        let a = Mag::from_log2(-900.0);
        let b = Mag::from_log2(-900.0);
        let s = a.add(b);
        assert_relative_eq!(s.log2(), -899.0, epsilon = 1e-12);

        let mut sum = MagSum::new();
        for k in 0..100 {
            sum.add(Mag::from_log2(-2000.0 - k as f64));
        }
        // geometric series sum 2^-2000 * (2 - 2^-99)
        assert_relative_eq!(sum.total().log2(), -2000.0 + 2.0f64.log2(), epsilon = 1e-9);
    }

    #[test]
    fn zero_and_infinity_absorb() {
        assert!(Mag::ZERO.add(Mag::ZERO).is_zero());
        assert!(Mag::INFINITY.add(Mag::from_f64(3.0)).is_infinite());
        assert!(Mag::ZERO.powf(-2.0).is_infinite());
        assert!(Mag::ZERO.powf(2.0).is_zero());
        assert_eq!(Mag::from_f64(0.0).log2(), f64::NEG_INFINITY);
    }

    #[test]
    fn one_minus_exp2_neg_stable() {
        assert_relative_eq!(log2_one_minus_exp2_neg(1.0), (0.5f64).log2());
        // tiny d: 1 - 2^-d ~ d ln2
        let d = 1e-14;
        assert_relative_eq!(
            log2_one_minus_exp2_neg(d),
            (d * LN_2).log2(),
            epsilon = 1e-9
        );
        assert_eq!(log2_one_minus_exp2_neg(10_000.0), 0.0);
    }
}
