//! Exact arithmetic over Q(sqrt(r)): numbers of the form `a + b*sqrt(r)`
//! with rational `a`, `b` and a fixed non-square radicand `r`.
//!
//! The canonical mechanism parameters are irrational (e.g. beta =
//! (sqrt 5 - 1)/2), and branch conditions like `rho >= beta` or `c > tau`
//! are discontinuous, so deciding them in floating point could flip a
//! branch near equality and silently break the truthfulness checks. All
//! parameter-dependent quantities are therefore carried as `Surd` values
//! and compared exactly.
//!
//! A single computation only ever mixes one radicand with plain rationals
//! (`r == 0` encodes a rational); mixing two distinct radicands is a
//! programming error and panics.

use crate::num::{pow2_neg, rat_to_f64, Rat};
use num_bigint::BigInt;
use num_integer::Roots;
use num_traits::{One, Signed, Zero};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, PartialEq, Eq)]
pub struct Surd {
    a: Rat,
    b: Rat,
    /// Radicand; 0 means the value is the rational `a` (then `b = 0`).
    r: u64,
}

impl Surd {
    pub fn from_rat(a: Rat) -> Self {
        Surd { a, b: Rat::zero(), r: 0 }
    }

    pub fn from_int(n: i64) -> Self {
        Surd::from_rat(crate::num::rint(n))
    }

    /// `a + b*sqrt(r)`. Perfect-square radicands collapse to rationals.
    pub fn new(a: Rat, b: Rat, r: u64) -> Self {
        if b.is_zero() || r == 0 {
            return Surd { a, b: Rat::zero(), r: 0 };
        }
        let s = r.sqrt();
        if s * s == r {
            return Surd { a: a + b * crate::num::rint(s as i64), b: Rat::zero(), r: 0 };
        }
        Surd { a, b, r }
    }

    pub fn sqrt_int(r: u64) -> Self {
        Surd::new(Rat::zero(), Rat::one(), r)
    }

    pub fn zero() -> Self {
        Surd::from_rat(Rat::zero())
    }

    pub fn one() -> Self {
        Surd::from_rat(Rat::one())
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    pub fn as_rat(&self) -> Option<&Rat> {
        if self.b.is_zero() {
            Some(&self.a)
        } else {
            None
        }
    }

    pub fn rational_part(&self) -> &Rat {
        &self.a
    }

    pub fn radical_coeff(&self) -> &Rat {
        &self.b
    }

    pub fn radicand(&self) -> u64 {
        self.r
    }

    fn join(&self, other: &Surd) -> u64 {
        match (self.r, other.r) {
            (0, r) | (r, 0) => r,
            (r1, r2) => {
                assert_eq!(r1, r2, "mixed radicands sqrt({r1}) and sqrt({r2})");
                r1
            }
        }
    }

    pub fn sign(&self) -> Ordering {
        let sa = if self.a.is_zero() {
            Ordering::Equal
        } else if self.a.is_positive() {
            Ordering::Greater
        } else {
            Ordering::Less
        };
        if self.b.is_zero() {
            return sa;
        }
        let sb = if self.b.is_positive() { Ordering::Greater } else { Ordering::Less };
        if sa == Ordering::Equal {
            return sb;
        }
        if sa == sb {
            return sa;
        }
        // a and b*sqrt(r) have opposite signs: compare a^2 vs b^2 r.
        let lhs = &self.a * &self.a;
        let rhs = &self.b * &self.b * crate::num::rint(self.r as i64);
        match lhs.cmp(&rhs) {
            Ordering::Greater => sa,
            Ordering::Less => sb,
            Ordering::Equal => Ordering::Equal,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.sign() == Ordering::Greater
    }

    pub fn is_negative(&self) -> bool {
        self.sign() == Ordering::Less
    }

    pub fn abs(&self) -> Surd {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }

    pub fn recip(&self) -> Surd {
        assert!(!self.is_zero(), "division by zero surd");
        if self.b.is_zero() {
            return Surd::from_rat(self.a.recip());
        }
        // 1/(a + b sqrt r) = (a - b sqrt r) / (a^2 - b^2 r)
        let denom = &self.a * &self.a - &self.b * &self.b * crate::num::rint(self.r as i64);
        Surd::new(&self.a / &denom, -(&self.b / &denom), self.r)
    }

    pub fn to_f64(&self) -> f64 {
        rat_to_f64(&self.a) + rat_to_f64(&self.b) * (self.r as f64).sqrt()
    }

    /// Rational enclosure `(lo, hi)` with `hi - lo <= 2^-bits`.
    pub fn enclose(&self, bits: u32) -> (Rat, Rat) {
        if self.b.is_zero() {
            return (self.a.clone(), self.a.clone());
        }
        // Integer sqrt of r * 4^k gives sqrt(r) within 2^-k.
        let k = bits + 4 + (self.b.numer().bits() / 2) as u32;
        let scaled = BigInt::from(self.r) << (2 * k);
        let s = scaled.sqrt();
        let lo_s = Rat::new(s.clone(), BigInt::one() << k);
        let hi_s = Rat::new(s + BigInt::one(), BigInt::one() << k);
        let (t1, t2) = (&self.b * lo_s, &self.b * hi_s);
        let (blo, bhi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        (&self.a + blo, &self.a + bhi)
    }

    /// Rational approximation with |approx - self| <= err, err <= 2^-bits.
    pub fn approx_rat(&self, bits: u32) -> (Rat, Rat) {
        let (lo, hi) = self.enclose(bits + 1);
        let mid = (&lo + &hi) / crate::num::rint(2);
        let err = (&hi - &lo) / crate::num::rint(2);
        (mid, err.max(pow2_neg(bits + 1)))
    }
}

impl fmt::Debug for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_zero() {
            write!(f, "{}", crate::num::fmt_rat(&self.a))
        } else if self.a.is_zero() {
            write!(f, "{}*sqrt({})", crate::num::fmt_rat(&self.b), self.r)
        } else {
            write!(
                f,
                "{} + {}*sqrt({})",
                crate::num::fmt_rat(&self.a),
                crate::num::fmt_rat(&self.b),
                self.r
            )
        }
    }
}

impl PartialOrd for Surd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Surd {
    fn cmp(&self, other: &Self) -> Ordering {
        (self - other).sign()
    }
}

impl From<Rat> for Surd {
    fn from(a: Rat) -> Self {
        Surd::from_rat(a)
    }
}

impl From<&Rat> for Surd {
    fn from(a: &Rat) -> Self {
        Surd::from_rat(a.clone())
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Surd {
            type Output = Surd;
            fn $method(self, rhs: Surd) -> Surd {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Surd> for Surd {
            type Output = Surd;
            fn $method(self, rhs: &Surd) -> Surd {
                (&self).$method(rhs)
            }
        }
        impl $trait<Surd> for &Surd {
            type Output = Surd;
            fn $method(self, rhs: Surd) -> Surd {
                self.$method(&rhs)
            }
        }
    };
}

impl Add<&Surd> for &Surd {
    type Output = Surd;
    fn add(self, rhs: &Surd) -> Surd {
        let r = self.join(rhs);
        Surd::new(&self.a + &rhs.a, &self.b + &rhs.b, r)
    }
}
forward_binop!(Add, add);

impl Sub<&Surd> for &Surd {
    type Output = Surd;
    fn sub(self, rhs: &Surd) -> Surd {
        let r = self.join(rhs);
        Surd::new(&self.a - &rhs.a, &self.b - &rhs.b, r)
    }
}
forward_binop!(Sub, sub);

impl Mul<&Surd> for &Surd {
    type Output = Surd;
    fn mul(self, rhs: &Surd) -> Surd {
        let r = self.join(rhs);
        let rr = crate::num::rint(r as i64);
        Surd::new(
            &self.a * &rhs.a + &self.b * &rhs.b * rr,
            &self.a * &rhs.b + &self.b * &rhs.a,
            r,
        )
    }
}
forward_binop!(Mul, mul);

impl Div<&Surd> for &Surd {
    type Output = Surd;
    fn div(self, rhs: &Surd) -> Surd {
        self * rhs.recip()
    }
}
forward_binop!(Div, div);

impl Neg for &Surd {
    type Output = Surd;
    fn neg(self) -> Surd {
        Surd::new(-self.a.clone(), -self.b.clone(), self.r)
    }
}

impl Neg for Surd {
    type Output = Surd;
    fn neg(self) -> Surd {
        -&self
    }
}

/// A rational strictly between `lo` and `hi` (requires `lo < hi`), kept
/// small by trying coarse dyadic grids first.
pub fn rational_between(lo: &Surd, hi: &Surd) -> Rat {
    assert!(lo < hi, "empty interval");
    if let (Some(l), Some(h)) = (lo.as_rat(), hi.as_rat()) {
        return (l + h) / crate::num::rint(2);
    }
    let mut bits = 4u32;
    loop {
        let (_, l_hi) = lo.enclose(bits);
        let (h_lo, _) = hi.enclose(bits);
        if l_hi < h_lo {
            // Round the midpoint to the 2^-bits grid so denominators stay small.
            let mid = crate::num::round_dyadic(&((&l_hi + &h_lo) / crate::num::rint(2)), bits + 2);
            let cand = Surd::from_rat(mid.clone());
            if &cand > lo && &cand < hi {
                return mid;
            }
        }
        bits *= 2;
        assert!(bits < 1 << 20, "rational_between failed to converge");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rat;

    fn phi_pair() -> (Surd, Surd) {
        // alpha = (3 - sqrt 5)/2, beta = (sqrt 5 - 1)/2
        let alpha = Surd::new(rat(3, 2), rat(-1, 2), 5);
        let beta = Surd::new(rat(-1, 2), rat(1, 2), 5);
        (alpha, beta)
    }

    #[test]
    fn golden_ratio_identities() {
        let (alpha, beta) = phi_pair();
        let one = Surd::one();
        // alpha (1 + beta) = 1 - alpha = beta
        assert_eq!(&alpha * (&one + &beta), &one - &alpha);
        assert_eq!(&one - &alpha, beta);
        // (1 + beta)/beta = 1/alpha
        assert_eq!((&one + &beta) / &beta, alpha.recip());
    }

    #[test]
    fn ordering_and_sign() {
        let (alpha, beta) = phi_pair();
        assert!(alpha < beta);
        assert!(alpha.is_positive());
        assert!((&alpha - &beta).is_negative());
        assert_eq!(Surd::sqrt_int(4), Surd::from_int(2));
        assert!(Surd::sqrt_int(2) > Surd::from_rat(rat(7, 5)));
        assert!(Surd::sqrt_int(2) < Surd::from_rat(rat(3, 2)));
    }

    #[test]
    fn approx_within_bound() {
        let x = Surd::new(rat(1, 3), rat(2, 7), 12);
        let (approx, err) = x.approx_rat(100);
        // the enclosure brackets the true value, exactly
        assert!(Surd::from_rat(&approx - &err) <= x);
        assert!(x <= Surd::from_rat(&approx + &err));
        assert!(err <= pow2_neg(100));
    }

    #[test]
    fn between_finds_rational() {
        let lo = Surd::sqrt_int(2);
        let hi = Surd::from_rat(rat(3, 2));
        let m = rational_between(&lo, &hi);
        assert!(Surd::from_rat(m.clone()) > lo && Surd::from_rat(m) < hi);
        let lo = Surd::new(rat(1, 1), rat(-1, 2), 5);
        let hi = Surd::new(rat(1, 1), rat(1, 7), 5);
        let m = rational_between(&lo, &hi);
        assert!(Surd::from_rat(m.clone()) > lo && Surd::from_rat(m) < hi);
    }

    #[test]
    #[should_panic(expected = "mixed radicands")]
    fn mixing_radicands_panics() {
        let _ = Surd::sqrt_int(2) + Surd::sqrt_int(3);
    }
}
