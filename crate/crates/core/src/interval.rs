//! Interval arithmetic with two endpoint modes.
//!
//! `Interval::Exact` carries arbitrary-precision rational endpoints and every
//! operation on two exact operands is exact. `Interval::Float` carries `f64`
//! endpoints; every operation widens its result by at least one ulp on each
//! side, so the true real result set is always contained in the output.
//! Mixing the two modes promotes the exact operand to an outward float
//! enclosure.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IntervalError {
    #[error("division by an interval containing zero")]
    DivisionByIntervalContainingZero,
    #[error("invalid interval: lower endpoint exceeds upper endpoint")]
    Inverted,
    #[error("invalid rational literal `{0}`")]
    BadRational(String),
    #[error("invalid interval endpoint `{0}`")]
    BadEndpoint(String),
}

/// Arbitrary-precision rational in lowest terms with positive denominator.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(BigRational);

impl Rational {
    pub fn new(numer: i64, denom: i64) -> Self {
        assert!(denom != 0, "zero denominator");
        Rational(BigRational::new(numer.into(), denom.into()))
    }

    pub fn from_integer(n: i64) -> Self {
        Rational(BigRational::from_integer(n.into()))
    }

    pub fn from_bigint(n: BigInt) -> Self {
        Rational(BigRational::from_integer(n))
    }

    pub fn from_ratio(r: BigRational) -> Self {
        Rational(r)
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    /// Exact value of a finite double.
    pub fn from_f64(x: f64) -> Option<Self> {
        BigRational::from_float(x).map(Rational)
    }

    pub fn as_ratio(&self) -> &BigRational {
        &self.0
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    pub fn recip(&self) -> Self {
        Rational(self.0.recip())
    }

    pub fn pow(&self, n: u32) -> Self {
        Rational(num_traits::pow(self.0.clone(), n as usize))
    }

    pub fn floor(&self) -> BigInt {
        self.0.floor().to_integer()
    }

    /// Nearest double (not a bound; see [`Rational::to_f64_bounds`]).
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Doubles `(lo, hi)` with `lo <= self <= hi`, tight to one ulp.
    pub fn to_f64_bounds(&self) -> (f64, f64) {
        let x = self.to_f64();
        if !x.is_finite() {
            return if self.is_negative() {
                (f64::NEG_INFINITY, f64::MIN)
            } else {
                (f64::MAX, f64::INFINITY)
            };
        }
        let mut lo = x;
        while self.cmp_f64(lo) == Ordering::Less {
            lo = lo.next_down();
        }
        let mut hi = x;
        while self.cmp_f64(hi) == Ordering::Greater {
            hi = hi.next_up();
        }
        (lo, hi)
    }

    /// Exact comparison of `self` against a double.
    pub fn cmp_f64(&self, x: f64) -> Ordering {
        if x == f64::INFINITY {
            return Ordering::Less;
        }
        if x == f64::NEG_INFINITY {
            return Ordering::Greater;
        }
        match BigRational::from_float(x) {
            Some(r) => self.0.cmp(&r),
            None => Ordering::Less,
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

macro_rules! rational_binop {
    ($tr:ident, $method:ident) => {
        impl std::ops::$tr<&Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational(std::ops::$tr::$method(&self.0, &rhs.0))
            }
        }
        impl std::ops::$tr<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(std::ops::$tr::$method(self.0, rhs.0))
            }
        }
    };
}
rational_binop!(Add, add);
rational_binop!(Sub, sub);
rational_binop!(Mul, mul);
rational_binop!(Div, div);

impl std::ops::Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl std::ops::Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl FromStr for Rational {
    type Err = IntervalError;

    /// Accepts `p`, `p/q` and decimal literals such as `-0.125` or `1e-3`;
    /// decimals are converted exactly.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || IntervalError::BadRational(s.to_string());
        let t = s.trim();
        if t.is_empty() {
            return Err(bad());
        }
        if let Some((p, q)) = t.split_once('/') {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            return Ok(Rational(BigRational::new(p, q)));
        }
        parse_decimal(t).ok_or_else(bad)
    }
}

fn parse_decimal(t: &str) -> Option<Rational> {
    let (neg, body) = match t.as_bytes().first()? {
        b'-' => (true, &t[1..]),
        b'+' => (false, &t[1..]),
        _ => (false, t),
    };
    let (mantissa, exp) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], body[i + 1..].parse::<i32>().ok()?),
        None => (body, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((a, b)) => (a, b),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut numer: BigInt = digits.parse().ok()?;
    if neg {
        numer = -numer;
    }
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let r = if scale >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Some(Rational(r))
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        match v {
            serde_json::Value::String(s) => s.parse().map_err(D::Error::custom),
            serde_json::Value::Number(n) => n.to_string().parse().map_err(D::Error::custom),
            other => Err(D::Error::custom(format!("expected rational, got {other}"))),
        }
    }
}

/// Greatest integer `r` with `r*r <= n` for nonnegative `n`.
pub fn isqrt(n: &BigInt) -> BigInt {
    n.sqrt()
}

// ---------------------------------------------------------------------------
// Outward-rounded double helpers

#[inline]
pub(crate) fn dn(x: f64) -> f64 {
    if x.is_nan() {
        f64::NEG_INFINITY
    } else {
        x.next_down()
    }
}

#[inline]
pub(crate) fn up(x: f64) -> f64 {
    if x.is_nan() {
        f64::INFINITY
    } else {
        x.next_up()
    }
}

fn min4(v: [f64; 4]) -> f64 {
    v.into_iter().fold(f64::INFINITY, f64::min)
}

fn max4(v: [f64; 4]) -> f64 {
    v.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Lower bound on `x^n` for `x >= 0`.
fn pow_dn(x: f64, n: u32) -> f64 {
    let mut acc = 1.0f64;
    for _ in 0..n {
        acc = dn(acc * x).max(0.0);
    }
    acc
}

/// Upper bound on `x^n` for `x >= 0`.
fn pow_up(x: f64, n: u32) -> f64 {
    let mut acc = 1.0f64;
    for _ in 0..n {
        acc = up(acc * x);
    }
    acc
}

// ---------------------------------------------------------------------------

/// Closed interval `[lo, hi]`.
#[derive(Clone, Debug, PartialEq)]
pub enum Interval {
    Exact { lo: Rational, hi: Rational },
    Float { lo: f64, hi: f64 },
}

impl Interval {
    pub fn exact(lo: Rational, hi: Rational) -> Result<Self, IntervalError> {
        if lo > hi {
            return Err(IntervalError::Inverted);
        }
        Ok(Interval::Exact { lo, hi })
    }

    pub fn float(lo: f64, hi: f64) -> Result<Self, IntervalError> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(IntervalError::Inverted);
        }
        Ok(Interval::Float { lo, hi })
    }

    pub fn point(r: Rational) -> Self {
        Interval::Exact { lo: r.clone(), hi: r }
    }

    /// Shorthand for `[a/b, c/d]` in exact mode; panics if inverted.
    pub fn rat(a: i64, b: i64, c: i64, d: i64) -> Self {
        Interval::exact(Rational::new(a, b), Rational::new(c, d)).expect("inverted interval")
    }

    pub fn unit() -> Self {
        Interval::Exact { lo: Rational::zero(), hi: Rational::one() }
    }

    /// Outward enclosure of a single double value (itself).
    pub fn from_f64(x: f64) -> Self {
        Interval::Float { lo: x, hi: x }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Interval::Exact { .. })
    }

    /// Lower endpoint rounded down to a double.
    pub fn lo_f64(&self) -> f64 {
        match self {
            Interval::Exact { lo, .. } => lo.to_f64_bounds().0,
            Interval::Float { lo, .. } => *lo,
        }
    }

    /// Upper endpoint rounded up to a double.
    pub fn hi_f64(&self) -> f64 {
        match self {
            Interval::Exact { hi, .. } => hi.to_f64_bounds().1,
            Interval::Float { hi, .. } => *hi,
        }
    }

    pub fn exact_bounds(&self) -> Option<(&Rational, &Rational)> {
        match self {
            Interval::Exact { lo, hi } => Some((lo, hi)),
            Interval::Float { .. } => None,
        }
    }

    /// Same set in float mode (outward).
    pub fn to_float(&self) -> Interval {
        Interval::Float { lo: self.lo_f64(), hi: self.hi_f64() }
    }

    fn float_pair(&self) -> (f64, f64) {
        (self.lo_f64(), self.hi_f64())
    }

    pub fn mid_f64(&self) -> f64 {
        let (a, b) = self.float_pair();
        a + (b - a) / 2.0
    }

    pub fn width(&self) -> Interval {
        match self {
            Interval::Exact { lo, hi } => Interval::point(hi - lo),
            Interval::Float { lo, hi } => Interval::Float { lo: dn(hi - lo).max(0.0), hi: up(hi - lo) },
        }
    }

    /// Upper bound on the width as a double.
    pub fn width_f64(&self) -> f64 {
        self.width().hi_f64()
    }

    pub fn contains_zero(&self) -> bool {
        match self {
            Interval::Exact { lo, hi } => !lo.is_positive() && !hi.is_negative(),
            Interval::Float { lo, hi } => *lo <= 0.0 && *hi >= 0.0,
        }
    }

    /// True when `lo > 0`.
    pub fn is_positive(&self) -> bool {
        match self {
            Interval::Exact { lo, .. } => lo.is_positive(),
            Interval::Float { lo, .. } => *lo > 0.0,
        }
    }

    /// True when `hi < 0`.
    pub fn is_negative(&self) -> bool {
        match self {
            Interval::Exact { hi, .. } => hi.is_negative(),
            Interval::Float { hi, .. } => *hi < 0.0,
        }
    }

    /// Exact test `r ∈ [lo, hi]`.
    pub fn contains_rational(&self, r: &Rational) -> bool {
        match self {
            Interval::Exact { lo, hi } => lo <= r && r <= hi,
            Interval::Float { lo, hi } => {
                r.cmp_f64(*lo) != Ordering::Less && r.cmp_f64(*hi) != Ordering::Greater
            }
        }
    }

    pub fn contains_f64(&self, x: f64) -> bool {
        match self {
            Interval::Exact { lo, hi } => {
                lo.cmp_f64(x) != Ordering::Greater && hi.cmp_f64(x) != Ordering::Less
            }
            Interval::Float { lo, hi } => *lo <= x && x <= *hi,
        }
    }

    /// `self ⊆ other`, decided soundly (exactly when both are exact).
    pub fn subset_of(&self, other: &Interval) -> bool {
        le(other, Side::Lo, self, Side::Lo) && le(self, Side::Hi, other, Side::Hi)
    }

    /// The two intervals share at least one point.
    pub fn intersects(&self, other: &Interval) -> bool {
        le(self, Side::Lo, other, Side::Hi) && le(other, Side::Lo, self, Side::Hi)
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        match (self, other) {
            (Interval::Exact { lo: a, hi: b }, Interval::Exact { lo: c, hi: d }) => Interval::Exact {
                lo: a.clone().min(c.clone()),
                hi: b.clone().max(d.clone()),
            },
            _ => Interval::Float {
                lo: self.lo_f64().min(other.lo_f64()),
                hi: self.hi_f64().max(other.hi_f64()),
            },
        }
    }

    pub fn intersection(&self, other: &Interval) -> Option<Interval> {
        if !self.intersects(other) {
            return None;
        }
        Some(match (self, other) {
            (Interval::Exact { lo: a, hi: b }, Interval::Exact { lo: c, hi: d }) => Interval::Exact {
                lo: a.clone().max(c.clone()),
                hi: b.clone().min(d.clone()),
            },
            _ => {
                let lo = self.lo_f64().max(other.lo_f64());
                let hi = self.hi_f64().min(other.hi_f64());
                Interval::Float { lo: lo.min(hi), hi: hi.max(lo) }
            }
        })
    }

    /// Splits at the midpoint (exact midpoint in exact mode).
    pub fn bisect(&self) -> (Interval, Interval) {
        match self {
            Interval::Exact { lo, hi } => {
                let mid = (lo + hi) / Rational::from_integer(2);
                (
                    Interval::Exact { lo: lo.clone(), hi: mid.clone() },
                    Interval::Exact { lo: mid, hi: hi.clone() },
                )
            }
            Interval::Float { lo, hi } => {
                let mid = lo + (hi - lo) / 2.0;
                (Interval::Float { lo: *lo, hi: mid }, Interval::Float { lo: mid, hi: *hi })
            }
        }
    }

    pub fn neg(&self) -> Interval {
        match self {
            Interval::Exact { lo, hi } => Interval::Exact { lo: -hi, hi: -lo },
            Interval::Float { lo, hi } => Interval::Float { lo: -hi, hi: -lo },
        }
    }

    pub fn abs(&self) -> Interval {
        if self.contains_zero() {
            match self {
                Interval::Exact { lo, hi } => Interval::Exact { lo: Rational::zero(), hi: lo.abs().max(hi.abs()) },
                Interval::Float { lo, hi } => Interval::Float { lo: 0.0, hi: lo.abs().max(hi.abs()) },
            }
        } else if self.is_negative() {
            self.neg()
        } else {
            self.clone()
        }
    }

    pub fn add(&self, other: &Interval) -> Interval {
        match (self, other) {
            (Interval::Exact { lo: a, hi: b }, Interval::Exact { lo: c, hi: d }) => {
                Interval::Exact { lo: a + c, hi: b + d }
            }
            _ => {
                let (a, b) = self.float_pair();
                let (c, d) = other.float_pair();
                Interval::Float { lo: dn(a + c), hi: up(b + d) }
            }
        }
    }

    pub fn sub(&self, other: &Interval) -> Interval {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Interval) -> Interval {
        match (self, other) {
            (Interval::Exact { lo: a, hi: b }, Interval::Exact { lo: c, hi: d }) => {
                if !a.is_negative() && !c.is_negative() {
                    return Interval::Exact { lo: a * c, hi: b * d };
                }
                let p = [a * c, a * d, b * c, b * d];
                let lo = p.iter().min().cloned().expect("nonempty");
                let hi = p.iter().max().cloned().expect("nonempty");
                Interval::Exact { lo, hi }
            }
            _ => {
                let (a, b) = self.float_pair();
                let (c, d) = other.float_pair();
                let p = [a * c, a * d, b * c, b * d];
                Interval::Float { lo: dn(min4(p)), hi: up(max4(p)) }
            }
        }
    }

    pub fn div(&self, other: &Interval) -> Result<Interval, IntervalError> {
        if other.contains_zero() {
            return Err(IntervalError::DivisionByIntervalContainingZero);
        }
        Ok(match (self, other) {
            (Interval::Exact { .. }, Interval::Exact { lo: c, hi: d }) => {
                self.mul(&Interval::Exact { lo: d.recip(), hi: c.recip() })
            }
            _ => {
                let (a, b) = self.float_pair();
                let (c, d) = other.float_pair();
                let q = [a / c, a / d, b / c, b / d];
                Interval::Float { lo: dn(min4(q)), hi: up(max4(q)) }
            }
        })
    }

    /// Integer power with the tight even-power rule.
    pub fn pow(&self, n: u32) -> Interval {
        if n == 0 {
            return Interval::point(Rational::one());
        }
        match self {
            Interval::Exact { lo, hi } => {
                if n % 2 == 1 || !lo.is_negative() {
                    Interval::Exact { lo: lo.pow(n), hi: hi.pow(n) }
                } else if hi.is_negative() {
                    Interval::Exact { lo: hi.pow(n), hi: lo.pow(n) }
                } else {
                    Interval::Exact { lo: Rational::zero(), hi: lo.abs().max(hi.abs()).pow(n) }
                }
            }
            Interval::Float { lo, hi } => {
                let (lo, hi) = (*lo, *hi);
                if n % 2 == 1 {
                    let l = if lo >= 0.0 { pow_dn(lo, n) } else { -pow_up(-lo, n) };
                    let h = if hi >= 0.0 { pow_up(hi, n) } else { -pow_dn(-hi, n) };
                    Interval::Float { lo: l, hi: h }
                } else if lo >= 0.0 {
                    Interval::Float { lo: pow_dn(lo, n), hi: pow_up(hi, n) }
                } else if hi <= 0.0 {
                    Interval::Float { lo: pow_dn(-hi, n), hi: pow_up(-lo, n) }
                } else {
                    Interval::Float { lo: 0.0, hi: pow_up(lo.abs().max(hi.abs()), n) }
                }
            }
        }
    }

    /// Outward enclosure of `sqrt`; requires `lo >= 0`.
    pub fn sqrt(&self) -> Interval {
        let (a, b) = self.float_pair();
        Interval::Float { lo: dn(a.max(0.0).sqrt()).max(0.0), hi: up(b.max(0.0).sqrt()) }
    }
}

#[derive(Clone, Copy)]
enum Side {
    Lo,
    Hi,
}

/// Sound `x.side <= y.side` (false when undecidable).
fn le(x: &Interval, sx: Side, y: &Interval, sy: Side) -> bool {
    match (x, y) {
        (Interval::Exact { lo: a, hi: b }, Interval::Exact { lo: c, hi: d }) => {
            let l = match sx {
                Side::Lo => a,
                Side::Hi => b,
            };
            let r = match sy {
                Side::Lo => c,
                Side::Hi => d,
            };
            l <= r
        }
        (Interval::Exact { lo, hi }, _) => {
            let l = match sx {
                Side::Lo => lo,
                Side::Hi => hi,
            };
            let r = match sy {
                Side::Lo => y.lo_f64(),
                Side::Hi => y.hi_f64(),
            };
            l.cmp_f64(r) != Ordering::Greater
        }
        (_, Interval::Exact { lo, hi }) => {
            let l = match sx {
                Side::Lo => x.lo_f64(),
                Side::Hi => x.hi_f64(),
            };
            let r = match sy {
                Side::Lo => lo,
                Side::Hi => hi,
            };
            r.cmp_f64(l) != Ordering::Less
        }
        _ => {
            let l = match sx {
                Side::Lo => x.lo_f64(),
                Side::Hi => x.hi_f64(),
            };
            let r = match sy {
                Side::Lo => y.lo_f64(),
                Side::Hi => y.hi_f64(),
            };
            l <= r
        }
    }
}

/// Strict `a.hi < b.lo`, decided soundly.
pub fn strictly_before(a: &Interval, b: &Interval) -> bool {
    !le(b, Side::Lo, a, Side::Hi)
}

fn cmp_lo(a: &Interval, b: &Interval) -> Ordering {
    match (a, b) {
        (Interval::Exact { lo: x, .. }, Interval::Exact { lo: y, .. }) => x.cmp(y),
        _ => a.lo_f64().total_cmp(&b.lo_f64()),
    }
}

/// Minimal sorted list of pairwise-disjoint closed intervals with the same
/// union as the input. Touching intervals are merged. If any input is in
/// float mode the whole result is in float mode.
pub fn union_normalize(intervals: &[Interval]) -> Vec<Interval> {
    let all_exact = intervals.iter().all(Interval::is_exact);
    let mut items: Vec<Interval> = if all_exact {
        intervals.to_vec()
    } else {
        intervals.iter().map(Interval::to_float).collect()
    };
    items.sort_by(cmp_lo);
    merge_sorted(items)
}

/// Merges an already-sorted (by lower endpoint) list in place.
pub fn merge_sorted(items: Vec<Interval>) -> Vec<Interval> {
    let mut out: Vec<Interval> = Vec::with_capacity(items.len() / 4 + 1);
    for iv in items {
        match out.last_mut() {
            Some(last) if le(&iv, Side::Lo, last, Side::Hi) => {
                if !le(&iv, Side::Hi, last, Side::Hi) {
                    *last = last.hull(&iv);
                }
            }
            _ => out.push(iv),
        }
    }
    out
}

/// Sorts by lower endpoint with the comparator used by `union_normalize`.
pub fn sort_by_lo(items: &mut [Interval]) {
    items.sort_by(cmp_lo);
}

/// Open gaps between consecutive components of a normalized list.
pub fn gaps_between(normalized: &[Interval]) -> Vec<Interval> {
    normalized
        .windows(2)
        .map(|w| match (&w[0], &w[1]) {
            (Interval::Exact { hi, .. }, Interval::Exact { lo, .. }) => {
                Interval::Exact { lo: hi.clone(), hi: lo.clone() }
            }
            (a, b) => Interval::Float { lo: a.hi_f64(), hi: b.lo_f64() },
        })
        .collect()
}

/// Outward total length of a list of disjoint intervals.
pub fn total_length(normalized: &[Interval]) -> Interval {
    normalized
        .iter()
        .fold(Interval::point(Rational::zero()), |acc, iv| acc.add(&iv.width()))
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Interval::Exact { lo, hi } => write!(f, "[{lo}, {hi}]"),
            Interval::Float { lo, hi } => write!(f, "[{lo:?}, {hi:?}]"),
        }
    }
}

/// Endpoint string: rationals as `p/q`, doubles in shortest round-trip
/// form that always carries a `.`, an exponent, or `inf`.
pub fn float_string(x: f64) -> String {
    format!("{x:?}")
}

fn parse_endpoint(s: &str) -> Result<Endpoint, IntervalError> {
    let t = s.trim();
    let is_float = t.contains(['.', 'e', 'E']) || t.contains("inf") || t.contains("NaN");
    if is_float {
        t.parse::<f64>()
            .map(Endpoint::Float)
            .map_err(|_| IntervalError::BadEndpoint(s.to_string()))
    } else {
        t.parse::<Rational>().map(Endpoint::Exact)
    }
}

enum Endpoint {
    Exact(Rational),
    Float(f64),
}

impl Interval {
    /// Endpoint strings in the JSON encoding.
    pub fn endpoint_strings(&self) -> (String, String) {
        match self {
            Interval::Exact { lo, hi } => (lo.to_string(), hi.to_string()),
            Interval::Float { lo, hi } => (float_string(*lo), float_string(*hi)),
        }
    }

    pub fn from_endpoint_strings(lo: &str, hi: &str) -> Result<Interval, IntervalError> {
        match (parse_endpoint(lo)?, parse_endpoint(hi)?) {
            (Endpoint::Exact(a), Endpoint::Exact(b)) => Interval::exact(a, b),
            (a, b) => {
                let lo = match a {
                    Endpoint::Exact(r) => r.to_f64_bounds().0,
                    Endpoint::Float(x) => x,
                };
                let hi = match b {
                    Endpoint::Exact(r) => r.to_f64_bounds().1,
                    Endpoint::Float(x) => x,
                };
                Interval::float(lo, hi)
            }
        }
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let (a, b) = self.endpoint_strings();
        [a, b].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v: Vec<serde_json::Value> = Vec::deserialize(d)?;
        if v.len() != 2 {
            return Err(D::Error::custom("interval must be a two-element array"));
        }
        let s = |x: &serde_json::Value| match x {
            serde_json::Value::String(s) => Ok(s.clone()),
            serde_json::Value::Number(n) => Ok(n.to_string()),
            _ => Err(D::Error::custom("interval endpoint must be a string or number")),
        };
        Interval::from_endpoint_strings(&s(&v[0])?, &s(&v[1])?).map_err(D::Error::custom)
    }
}

/// Interval written as `{"lo": .., "hi": ..}` in reports.
#[derive(Clone, Debug, PartialEq)]
pub struct LoHi(pub Interval);

impl Serialize for LoHi {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let (a, b) = self.0.endpoint_strings();
        let mut st = s.serialize_struct("LoHi", 2)?;
        st.serialize_field("lo", &a)?;
        st.serialize_field("hi", &b)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for LoHi {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            lo: String,
            hi: String,
        }
        let r = Raw::deserialize(d)?;
        Interval::from_endpoint_strings(&r.lo, &r.hi).map(LoHi).map_err(D::Error::custom)
    }
}

/// Serde adapter writing an `Interval` field as `{"lo": .., "hi": ..}`.
pub mod lohi {
    use super::{Interval, LoHi};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(iv: &Interval, s: S) -> Result<S::Ok, S::Error> {
        LoHi(iv.clone()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Interval, D::Error> {
        LoHi::deserialize(d).map(|x| x.0)
    }
}

// ---------------------------------------------------------------------------

/// Quadratic surd `a + b·√c` with rational `a`, `b` and square-free `c ≥ 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuadSurd {
    pub a: Rational,
    pub b: Rational,
    pub c: BigInt,
}

impl QuadSurd {
    /// `a + b·√n`, pulling square factors out of `n`.
    pub fn new(a: Rational, b: Rational, n: BigInt) -> Self {
        assert!(!n.is_negative(), "negative radicand");
        if n.is_zero() {
            return QuadSurd { a, b: Rational::zero(), c: BigInt::one() };
        }
        let (outer, inner) = square_free(n);
        let b = b * Rational::from_bigint(outer);
        if inner.is_one() {
            return QuadSurd { a: a + b, b: Rational::zero(), c: BigInt::one() };
        }
        QuadSurd { a, b, c: inner }
    }

    pub fn rational(a: Rational) -> Self {
        QuadSurd { a, b: Rational::zero(), c: BigInt::one() }
    }

    pub fn add_rational(&self, r: &Rational) -> Self {
        QuadSurd { a: &self.a + r, b: self.b.clone(), c: self.c.clone() }
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    /// Outward enclosure; exact when the surd is rational.
    pub fn enclosure(&self) -> Interval {
        if self.b.is_zero() {
            return Interval::point(self.a.clone());
        }
        let root = sqrt_enclosure(&self.c);
        Interval::point(self.a.clone()).add(&Interval::point(self.b.clone()).mul(&root))
    }

    pub fn to_f64(&self) -> f64 {
        self.enclosure().mid_f64()
    }
}

impl fmt::Display for QuadSurd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_zero() {
            return write!(f, "{}", self.a);
        }
        // Common denominator form (p + q√c)/d.
        let d = self.a.denom().lcm(self.b.denom());
        let dr = Rational::from_bigint(d.clone());
        let p = (&self.a * &dr).numer().clone();
        let q = (&self.b * &dr).numer().clone();
        let qs = if q.is_one() {
            String::new()
        } else if q == -BigInt::one() {
            "-".to_string()
        } else {
            q.to_string()
        };
        let sign = if q.is_negative() || p.is_zero() { "" } else { "+" };
        let head = if p.is_zero() { String::new() } else { p.to_string() };
        if d.is_one() {
            write!(f, "{head}{sign}{qs}√{}", self.c)
        } else {
            write!(f, "({head}{sign}{qs}√{})/{d}", self.c)
        }
    }
}

fn square_free(mut n: BigInt) -> (BigInt, BigInt) {
    let mut outer = BigInt::one();
    let mut p = BigInt::from(2);
    while &p * &p <= n {
        let sq = &p * &p;
        while (&n % &sq).is_zero() {
            n /= &sq;
            outer *= &p;
        }
        p += 1;
    }
    (outer, n)
}

/// Outward enclosure of `√n` checked exactly against `n`.
pub fn sqrt_enclosure(n: &BigInt) -> Interval {
    let nr = Rational::from_bigint(n.clone());
    let guess = n.to_f64().unwrap_or(f64::INFINITY).sqrt();
    let sq_cmp = |x: f64| Rational::from_f64(x).map(|r| (&r * &r).cmp(&nr)).unwrap_or(Ordering::Greater);
    let mut lo = guess;
    while sq_cmp(lo) == Ordering::Greater {
        lo = lo.next_down();
    }
    let mut hi = guess;
    while sq_cmp(hi) == Ordering::Less {
        hi = hi.next_up();
    }
    Interval::Float { lo, hi }
}

/// Outward enclosure of an integer that may exceed 2^53.
pub fn int_enclosure(n: i128) -> Interval {
    Interval::point(Rational::from_bigint(BigInt::from(n)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    #[test]
    fn add_examples() {
        assert_eq!(Interval::rat(0, 1, 1, 3).add(&Interval::rat(2, 3, 1, 1)), Interval::rat(2, 3, 4, 3));
        assert_eq!(Interval::unit().add(&Interval::unit()), Interval::rat(0, 1, 2, 1));
        let third = Interval::rat(1, 3, 1, 3);
        assert_eq!(third.add(&third.neg()), Interval::rat(0, 1, 0, 1));
    }

    #[test]
    fn mul_div_pow_examples() {
        let right = Interval::rat(2, 3, 1, 1);
        assert_eq!(right.mul(&right), Interval::rat(4, 9, 1, 1));
        assert_eq!(Interval::rat(-1, 1, 1, 1).pow(2), Interval::rat(0, 1, 1, 1));
        assert_eq!(right.div(&right).unwrap(), Interval::rat(2, 3, 3, 2));
        assert_eq!(
            right.div(&Interval::rat(-1, 1, 1, 1)),
            Err(IntervalError::DivisionByIntervalContainingZero)
        );
        assert_eq!(Interval::rat(-2, 1, -1, 1).pow(3), Interval::rat(-8, 1, -1, 1));
        assert_eq!(Interval::rat(-2, 1, -1, 1).pow(2), Interval::rat(1, 1, 4, 1));
    }

    #[test]
    fn union_examples() {
        let merged = union_normalize(&[Interval::rat(0, 1, 1, 2), Interval::rat(1, 2, 1, 1)]);
        assert_eq!(merged, vec![Interval::unit()]);
        let kept = union_normalize(&[Interval::rat(4, 9, 1, 1), Interval::rat(0, 1, 1, 3)]);
        assert_eq!(kept, vec![Interval::rat(0, 1, 1, 3), Interval::rat(4, 9, 1, 1)]);
    }

    #[test]
    fn level_one_products_of_middle_third() {
        // The four products of the first-level bridges, enumerated by hand.
        let l = Interval::rat(0, 1, 1, 3);
        let rgt = Interval::rat(2, 3, 1, 1);
        let prods = [l.mul(&l), l.mul(&rgt), rgt.mul(&l), rgt.mul(&rgt)];
        assert_eq!(union_normalize(&prods), vec![Interval::rat(0, 1, 1, 3), Interval::rat(4, 9, 1, 1)]);
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(r("0.1"), Rational::new(1, 10));
        assert_eq!(r("-1.25"), Rational::new(-5, 4));
        assert_eq!(r("2/6"), Rational::new(1, 3));
        assert_eq!(r("1e-3"), Rational::new(1, 1000));
        assert_eq!(r("7"), Rational::from_integer(7));
        assert!("1/0".parse::<Rational>().is_err());
        assert!("x".parse::<Rational>().is_err());
        assert_eq!(Rational::new(-2, 4).to_string(), "-1/2");
    }

    #[test]
    fn rational_f64_bounds_bracket() {
        for s in ["1/3", "1/10", "-2/7", "123456789/1000"] {
            let q = r(s);
            let (lo, hi) = q.to_f64_bounds();
            assert!(q.cmp_f64(lo) != Ordering::Less && q.cmp_f64(hi) != Ordering::Greater);
            assert!(hi.next_down() <= lo);
        }
    }

    #[test]
    fn surd_enclosure_and_display() {
        let s = QuadSurd::new(Rational::new(-1, 2), Rational::new(1, 14), BigInt::from(77));
        assert_eq!(s.to_string(), "(-7+√77)/14");
        let e = s.enclosure();
        assert!(e.contains_f64((77f64.sqrt() - 7.0) / 14.0));
        assert!(e.width_f64() < 1e-15);
        let k = QuadSurd::new(Rational::zero(), Rational::one(), BigInt::from(12));
        assert_eq!(k.b, Rational::from_integer(2));
        assert_eq!(k.c, BigInt::from(3));
        let sq = QuadSurd::new(Rational::one(), Rational::one(), BigInt::from(9));
        assert!(sq.is_rational());
        assert_eq!(sq.a, Rational::from_integer(4));
    }

    #[test]
    fn json_roundtrip() {
        let e = Interval::rat(1, 3, 2, 3);
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(s, r#"["1/3","2/3"]"#);
        assert_eq!(serde_json::from_str::<Interval>(&s).unwrap(), e);
        let f = Interval::float(0.1, 2.0).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"["0.1","2.0"]"#);
        assert_eq!(serde_json::from_str::<Interval>(&s).unwrap(), f);
    }

    #[test]
    fn mixed_mode_is_outward() {
        let e = Interval::point(Rational::new(1, 10));
        let f = Interval::from_f64(0.2);
        let s = e.add(&f);
        assert!(!s.is_exact());
        assert!(s.contains_rational(&(Rational::new(1, 10) + Rational::from_f64(0.2).unwrap())));
    }
}
