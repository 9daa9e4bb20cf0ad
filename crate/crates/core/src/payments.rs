//! Allocation curves and the threshold payment rule.
//!
//! A winning agent's payment is `b_i x_i(b_i) + integral_{b_i}^inf x_i(u) du`
//! over the curve u -> x_i(u, c_-i) obtained by re-running the allocation
//! rule with agent i's declared cost replaced by u. Since an agent declaring
//! above the budget always loses, the integral effectively stops at
//! u_max <= B.
//!
//! Curves are piecewise with segment values a + b u + d/u. The polynomial
//! parts integrate exactly in the parameter field; the d ln(u_hi/u_lo) part
//! is the one transcendental quantity in the crate and is computed with a
//! rigorously tracked absolute error bound.

use crate::instance::{AgentId, Instance};
use crate::mechanisms::{MechanismError, MechanismParams};
use crate::num::{ln_rat, pow2_neg, rat_to_f64, Rat};
use crate::surd::Surd;
use num_traits::{Signed, Zero};

#[derive(Debug, thiserror::Error)]
pub enum PaymentError {
    #[error(transparent)]
    Curve(#[from] crate::curve::CurveError),
    #[error("mechanism failed during curve construction: {0}")]
    Mechanism(Box<MechanismError>),
}

impl From<MechanismError> for PaymentError {
    fn from(e: MechanismError) -> Self {
        PaymentError::Mechanism(Box::new(e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SegmentForm {
    Const,
    Affine,
    Hyperbolic,
}

/// One piece of an allocation curve: x(u) = a + b u + d/u on [u_lo, u_hi).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub u_lo: Surd,
    pub u_hi: Surd,
    pub a: Surd,
    pub b: Surd,
    pub d: Surd,
    /// False when the left boundary was isolated numerically rather than
    /// solved exactly; the isolation width is folded into the curve slack.
    pub exact_lo: bool,
}

impl Segment {
    pub fn form(&self) -> SegmentForm {
        if self.b.is_zero() && self.d.is_zero() {
            SegmentForm::Const
        } else if self.d.is_zero() {
            SegmentForm::Affine
        } else {
            SegmentForm::Hyperbolic
        }
    }

    pub fn value_at(&self, u: &Surd) -> Surd {
        let mut v = &self.a + &self.b * u;
        if !self.d.is_zero() {
            v = v + &self.d / u;
        }
        v
    }

    /// Exact check that the segment never increases on [u_lo, u_hi]. The
    /// derivative b - d/u^2 is monotone in u, so it peaks at an endpoint.
    pub fn is_nonincreasing(&self) -> bool {
        if self.b.is_zero() && self.d.is_zero() {
            return true;
        }
        let deriv_at = |u: &Surd| &self.b - &self.d / (u * u);
        let check_hi = !deriv_at(&self.u_hi).is_positive();
        if self.u_lo.is_zero() {
            // d = 0 on segments touching zero; derivative is constant b.
            return check_hi;
        }
        let check_lo = !deriv_at(&self.u_lo).is_positive();
        if self.d.is_negative() {
            check_lo
        } else {
            check_hi
        }
    }
}

/// The full curve u -> x_i(u, c_-i) on [0, u_max], non-increasing, with
/// x = 0 beyond u_max.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AllocationCurve {
    pub agent: AgentId,
    pub segments: Vec<Segment>,
    pub u_max: Surd,
    /// Number of boundaries that were isolated rather than solved exactly.
    pub inexact_boundaries: usize,
    /// Upper bound on the total integration error those boundaries cause.
    pub boundary_slack: Rat,
}

impl AllocationCurve {
    pub fn empty(agent: AgentId) -> Self {
        AllocationCurve {
            agent,
            segments: vec![],
            u_max: Surd::zero(),
            inexact_boundaries: 0,
            boundary_slack: Rat::zero(),
        }
    }

    /// Value at u. At an interior boundary the left segment wins (the limit
    /// from below), matching the closed upper endpoints of the mechanism's
    /// comparisons; beyond u_max the value is zero.
    pub fn value_at(&self, u: &Surd) -> Surd {
        if u > &self.u_max || self.segments.is_empty() {
            return Surd::zero();
        }
        let mut idx = 0;
        for (i, seg) in self.segments.iter().enumerate() {
            if &seg.u_lo < u {
                idx = i;
            } else {
                break;
            }
        }
        self.segments[idx].value_at(u)
    }

    /// All interior and exterior breakpoints, ascending.
    pub fn breakpoints(&self) -> Vec<Surd> {
        let mut out: Vec<Surd> = self.segments.iter().map(|s| s.u_lo.clone()).collect();
        if let Some(last) = self.segments.last() {
            out.push(last.u_hi.clone());
        }
        out
    }
}

/// The largest declared cost at which the agent still wins: the curve's
/// u_max after trailing zero segments were trimmed at construction.
pub fn threshold_bid(curve: &AllocationCurve) -> Surd {
    curve.u_max.clone()
}

/// A computed payment: a rational approximation of the true value together
/// with a guaranteed absolute error bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Payment {
    pub value: Rat,
    pub error_bound: Rat,
}

impl Payment {
    pub fn zero() -> Payment {
        Payment { value: Rat::zero(), error_bound: Rat::zero() }
    }

    pub fn value_f64(&self) -> f64 {
        rat_to_f64(&self.value)
    }

    pub fn error_f64(&self) -> f64 {
        rat_to_f64(&self.error_bound)
    }
}

const INTEGRAL_BITS: u32 = 140;

/// Integral of one segment's form over [lo, hi] within the segment.
fn segment_integral(seg: &Segment, lo: &Surd, hi: &Surd) -> (Rat, Rat) {
    debug_assert!(lo < hi);
    let two = Surd::from_int(2);
    let poly = &seg.a * (hi - lo) + &seg.b * ((hi * hi - lo * lo) / &two);
    let (mut value, mut err) = poly.approx_rat(INTEGRAL_BITS);
    if !seg.d.is_zero() {
        let (term, term_err) = log_term(&seg.d, lo, hi);
        value += term;
        err += term_err;
    }
    (value, err)
}

/// Closed-form integral of the curve over [from, u_max]: rectangles and
/// triangles exactly, plus d ln(hi/lo) for the hyperbolic parts with a
/// tracked error bound.
pub fn integrate_tail(curve: &AllocationCurve, from: &Rat) -> Payment {
    TailTable::new(curve).tail(from)
}

/// Precomputed suffix integrals over a curve, so repeated tail queries (the
/// truthfulness deviation grid) cost at most one fresh logarithm each.
pub struct TailTable<'c> {
    curve: &'c AllocationCurve,
    /// suffix[i] = integral over segments i.., with its error bound.
    suffix: Vec<(Rat, Rat)>,
}

impl<'c> TailTable<'c> {
    pub fn new(curve: &'c AllocationCurve) -> TailTable<'c> {
        let mut suffix = vec![(Rat::zero(), Rat::zero()); curve.segments.len() + 1];
        for (i, seg) in curve.segments.iter().enumerate().rev() {
            let (v, e) = segment_integral(seg, &seg.u_lo, &seg.u_hi);
            suffix[i] = (&suffix[i + 1].0 + v, &suffix[i + 1].1 + e);
        }
        TailTable { curve, suffix }
    }

    pub fn tail(&self, from: &Rat) -> Payment {
        let from = Surd::from_rat(from.clone());
        let slack = self.curve.boundary_slack.clone();
        if self.curve.segments.is_empty() || from >= self.curve.u_max {
            return Payment { value: Rat::zero(), error_bound: slack };
        }
        if from <= self.curve.segments[0].u_lo {
            let (v, e) = self.suffix[0].clone();
            return Payment { value: v, error_bound: e + slack };
        }
        let idx = self
            .curve
            .segments
            .iter()
            .position(|s| from < s.u_hi)
            .expect("from below u_max");
        let seg = &self.curve.segments[idx];
        let lo = seg.u_lo.clone().max(from);
        let (mut value, mut err) = self.suffix[idx + 1].clone();
        if lo < seg.u_hi {
            let (v, e) = segment_integral(seg, &lo, &seg.u_hi);
            value += v;
            err += e;
        }
        Payment { value, error_bound: err + slack }
    }
}

/// d * ln(hi/lo) with a rigorous absolute error bound.
fn log_term(d: &Surd, lo: &Surd, hi: &Surd) -> (Rat, Rat) {
    debug_assert!(lo.is_positive() && hi > lo);
    let ratio = hi / lo;
    let (r_approx, r_err) = ratio.approx_rat(INTEGRAL_BITS);
    // |ln r - ln r_approx| <= |r - r_approx| / min(r, r_approx)
    let floor = &r_approx - &r_err;
    debug_assert!(floor.is_positive(), "ratio approximation too coarse");
    let lip_err = &r_err / floor;
    let (ln_val, ln_err) = ln_rat(&r_approx, INTEGRAL_BITS);
    let (d_approx, d_err) = d.approx_rat(INTEGRAL_BITS);
    let value = &d_approx * &ln_val;
    let bound = d_approx.abs() * (&ln_err + &lip_err)
        + &d_err * (ln_val.abs() + ln_err + lip_err)
        + pow2_neg(INTEGRAL_BITS);
    (value, bound)
}

/// Threshold payments for every agent: p_i = c_i x_i + tail integral for
/// winners, zero for losers.
pub fn payment_vector(
    instance: &Instance,
    params: &MechanismParams,
) -> Result<Vec<Payment>, PaymentError> {
    payment_vector_with(instance, params, &crate::curve::CurveConfig::default())
}

pub fn payment_vector_with(
    instance: &Instance,
    params: &MechanismParams,
    config: &crate::curve::CurveConfig,
) -> Result<Vec<Payment>, PaymentError> {
    let allocation = crate::mechanisms::allocate(instance, params)?;
    let mut payments = vec![Payment::zero(); instance.n()];
    for agent in &instance.agents {
        if !allocation.x[agent.id].is_positive() {
            continue;
        }
        let curve = crate::curve::allocation_curve_with(instance, params, agent.id, config)?;
        let tail = integrate_tail(&curve, &agent.cost);
        let (base, base_err) =
            (Surd::from_rat(agent.cost.clone()) * &allocation.x[agent.id]).approx_rat(INTEGRAL_BITS);
        payments[agent.id] = Payment {
            value: base + tail.value,
            error_bound: base_err + tail.error_bound,
        };
    }
    Ok(payments)
}

/// Independent numeric cross-check: adaptive Simpson quadrature over the
/// same panels, evaluated in floating point. Never touches `ln`.
pub fn quadrature_tail(curve: &AllocationCurve, from: f64) -> f64 {
    let mut total = 0.0;
    for seg in &curve.segments {
        let lo = seg.u_lo.to_f64().max(from);
        let hi = seg.u_hi.to_f64();
        if lo >= hi {
            continue;
        }
        let a = seg.a.to_f64();
        let b = seg.b.to_f64();
        let d = seg.d.to_f64();
        let f = |u: f64| a + b * u + if d == 0.0 { 0.0 } else { d / u };
        total += adaptive_simpson(&f, lo, hi, 1e-13 * (hi - lo).max(1.0), 40);
    }
    total
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let m = 0.5 * (a + b);
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }
    let whole = simpson(f, lo, hi);
    let m = 0.5 * (lo + hi);
    let left = simpson(f, lo, m);
    let right = simpson(f, m, hi);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        left + right + (left + right - whole) / 15.0
    } else {
        adaptive_simpson(f, lo, m, tol / 2.0, depth - 1)
            + adaptive_simpson(f, m, hi, tol / 2.0, depth - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{rat, rint};

    fn seg(lo: i64, hi: i64, a: Rat, b: Rat, d: Rat) -> Segment {
        Segment {
            u_lo: Surd::from_int(lo),
            u_hi: Surd::from_int(hi),
            a: Surd::from_rat(a),
            b: Surd::from_rat(b),
            d: Surd::from_rat(d),
            exact_lo: true,
        }
    }

    fn curve_of(segments: Vec<Segment>) -> AllocationCurve {
        let u_max = segments.last().unwrap().u_hi.clone();
        AllocationCurve {
            agent: 0,
            segments,
            u_max,
            inexact_boundaries: 0,
            boundary_slack: Rat::zero(),
        }
    }

    #[test]
    fn rectangle_integrates_exactly() {
        let c = curve_of(vec![seg(0, 10, rint(1), rint(0), rint(0))]);
        let p = integrate_tail(&c, &rint(0));
        assert!((p.value - rint(10)).abs() <= p.error_bound);
        let p = integrate_tail(&c, &rint(4));
        assert!((p.value - rint(6)).abs() <= p.error_bound);
    }

    #[test]
    fn triangle_integrates_exactly() {
        // x(u) = 1 - u/10 on [0, 10]: area 5
        let c = curve_of(vec![seg(0, 10, rint(1), rat(-1, 10), rint(0))]);
        let p = integrate_tail(&c, &rint(0));
        assert!((p.value - rint(5)).abs() <= p.error_bound);
    }

    #[test]
    fn hyperbolic_integrates_to_log() {
        // x(u) = 2/u on [2, 4]: integral 2 ln 2
        let c = curve_of(vec![seg(2, 4, rint(0), rint(0), rint(2))]);
        let p = integrate_tail(&c, &rint(2));
        let expect = 2.0 * std::f64::consts::LN_2;
        assert!((p.value_f64() - expect).abs() < 1e-12);
        assert!(p.error_bound < rat(1, 1_000_000_000));
        // quadrature agrees
        let q = quadrature_tail(&c, 2.0);
        assert!((q - expect).abs() < 1e-10);
    }

    #[test]
    fn tail_from_midpoint_of_segment() {
        let c = curve_of(vec![seg(0, 10, rint(1), rint(0), rint(0))]);
        let p = integrate_tail(&c, &rat(15, 2));
        assert!((p.value - rat(5, 2)).abs() <= p.error_bound);
    }

    #[test]
    fn segment_monotonicity_check() {
        assert!(seg(0, 10, rint(1), rint(0), rint(0)).is_nonincreasing());
        assert!(seg(1, 10, rint(0), rint(0), rint(2)).is_nonincreasing());
        assert!(seg(0, 10, rint(1), rat(-1, 10), rint(0)).is_nonincreasing());
        assert!(!seg(0, 10, rint(0), rat(1, 10), rint(0)).is_nonincreasing());
        // b > 0 compensated by d on a bounded interval: u^2 <= d/b keeps it
        // non-increasing up to u = 3 but not to u = 10
        assert!(seg(1, 3, rint(0), rat(1, 10), rint(1)).is_nonincreasing());
        assert!(!seg(1, 10, rint(0), rat(1, 10), rint(1)).is_nonincreasing());
    }

    #[test]
    fn value_at_uses_left_segment_on_boundary() {
        let c = curve_of(vec![
            seg(0, 4, rint(1), rint(0), rint(0)),
            seg(4, 10, rat(1, 2), rint(0), rint(0)),
        ]);
        assert_eq!(c.value_at(&Surd::from_int(2)), Surd::from_rat(rint(1)));
        assert_eq!(c.value_at(&Surd::from_int(4)), Surd::from_rat(rint(1)));
        assert_eq!(c.value_at(&Surd::from_int(5)), Surd::from_rat(rat(1, 2)));
        assert_eq!(c.value_at(&Surd::from_int(11)), Surd::zero());
    }

    #[test]
    fn threshold_is_u_max() {
        let c = curve_of(vec![seg(0, 10, rint(1), rint(0), rint(0))]);
        assert_eq!(threshold_bid(&c), Surd::from_int(10));
    }
}
