//! Cantor-set descriptions and their level-n bridges and gaps.

use std::fmt;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::{dn, up, Interval, QuadSurd, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CantorError {
    #[error("invalid set description: {0}")]
    InvalidSpec(String),
    #[error("gap tree specifies {available} levels, {requested} requested")]
    DepthExceedsTree { requested: u32, available: u32 },
    #[error("malformed set description: {0}")]
    Malformed(String),
}

/// Post-map `x ↦ a·x + b`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Affine {
    pub a: Rational,
    pub b: Rational,
}

impl Affine {
    pub fn identity() -> Affine {
        Affine { a: Rational::one(), b: Rational::zero() }
    }

    pub fn apply(&self, iv: &Interval) -> Interval {
        let a = Interval::point(self.a.clone());
        let b = Interval::point(self.b.clone());
        a.mul(iv).add(&b)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Affine) -> Affine {
        Affine { a: &self.a * &inner.a, b: &(&self.a * &inner.b) + &self.b }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SetKind {
    /// Attractor of `λx` and `λx + 1 − λ`.
    HomogeneousIfs { lambda: Rational },
    /// Attractor of `λ₁x` and `λ₂x + 1 − λ₂`.
    TwoMapIfs { lambda1: Rational, lambda2: Rational },
    /// `[t; a₁, a₂, …]` with every `aᵢ` in `digits`.
    ContinuedFraction { t: i64, digits: Vec<u32> },
    /// Finite binary gap tree: `nodes` lists gaps in heap order (node `k`
    /// splits into `2k+1` and `2k+2`).
    GapTree { root: Interval, nodes: Vec<Interval> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CantorSpec {
    #[serde(flatten)]
    pub kind: SetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affine: Option<Affine>,
}

/// A gap removed at one construction step, with the two child bridges
/// flanking it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub gap: Interval,
    pub left: Interval,
    pub right: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeLevel {
    pub depth: u32,
    /// Sorted, pairwise disjoint. Continued-fraction bridges are outer
    /// enclosures.
    pub bridges: Vec<Interval>,
    /// Gaps removed at step `depth` (empty at depth 0). Continued-fraction
    /// gaps are inner enclosures: every point listed is outside the set.
    pub gaps: Vec<Gap>,
}

fn invalid(msg: impl Into<String>) -> CantorError {
    CantorError::InvalidSpec(msg.into())
}

impl CantorSpec {
    pub fn new(kind: SetKind) -> Result<CantorSpec, CantorError> {
        let spec = CantorSpec { kind, affine: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn homogeneous(lambda: Rational) -> Result<CantorSpec, CantorError> {
        CantorSpec::new(SetKind::HomogeneousIfs { lambda })
    }

    pub fn two_map(lambda1: Rational, lambda2: Rational) -> Result<CantorSpec, CantorError> {
        CantorSpec::new(SetKind::TwoMapIfs { lambda1, lambda2 })
    }

    pub fn continued_fraction(t: i64, digits: &[u32]) -> Result<CantorSpec, CantorError> {
        CantorSpec::new(SetKind::ContinuedFraction { t, digits: digits.to_vec() })
    }

    pub fn gap_tree(root: Interval, nodes: Vec<Interval>) -> Result<CantorSpec, CantorError> {
        CantorSpec::new(SetKind::GapTree { root, nodes })
    }

    /// The middle-third Cantor set.
    pub fn middle_third() -> CantorSpec {
        CantorSpec::homogeneous(Rational::new(1, 3)).expect("valid")
    }

    pub fn from_json(text: &str) -> Result<CantorSpec, CantorError> {
        let mut spec: CantorSpec =
            serde_json::from_str(text).map_err(|e| CantorError::Malformed(e.to_string()))?;
        if let SetKind::ContinuedFraction { digits, .. } = &mut spec.kind {
            digits.sort_unstable();
            digits.dedup();
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    pub fn validate(&self) -> Result<(), CantorError> {
        let zero = Rational::zero();
        let one = Rational::one();
        match &self.kind {
            SetKind::HomogeneousIfs { lambda } => {
                if !(lambda > &zero && lambda < &Rational::new(1, 2)) {
                    return Err(invalid("homogeneous IFS needs 0 < λ < 1/2"));
                }
            }
            SetKind::TwoMapIfs { lambda1, lambda2 } => {
                if !(lambda2 > &zero && lambda2 <= lambda1 && lambda1 < &one && &(lambda1 + lambda2) < &one) {
                    return Err(invalid("two-map IFS needs 0 < λ₂ ≤ λ₁ < 1 and λ₁ + λ₂ < 1"));
                }
            }
            SetKind::ContinuedFraction { digits, .. } => {
                if digits.iter().any(|&d| d == 0) {
                    return Err(invalid("partial quotients must be positive"));
                }
                let mut sorted = digits.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() < 2 {
                    return Err(invalid("digit set needs at least two elements"));
                }
                if sorted.len() != digits.len() {
                    return Err(invalid("digits must be distinct"));
                }
                if *sorted.last().expect("nonempty") > 1 << 20 {
                    return Err(invalid("digits above 2^20 are not supported"));
                }
            }
            SetKind::GapTree { root, nodes } => {
                let Some((rlo, rhi)) = root.exact_bounds() else {
                    return Err(invalid("gap tree endpoints must be rational"));
                };
                if rlo >= rhi {
                    return Err(invalid("gap tree root must have positive length"));
                }
                let mut bridges = vec![(rlo.clone(), rhi.clone())];
                for (k, gap) in nodes.iter().enumerate() {
                    let Some((glo, ghi)) = gap.exact_bounds() else {
                        return Err(invalid("gap tree endpoints must be rational"));
                    };
                    let (blo, bhi) = bridges[k].clone();
                    if !(&blo < glo && glo < ghi && ghi < &bhi) {
                        return Err(invalid(format!("gap {k} must lie strictly inside its bridge")));
                    }
                    bridges.push((blo, glo.clone()));
                    bridges.push((ghi.clone(), bhi));
                }
            }
        }
        if let Some(aff) = &self.affine {
            if aff.a.is_zero() {
                return Err(invalid("affine post-map needs a ≠ 0"));
            }
        }
        Ok(())
    }

    /// `x ↦ a·x + b` applied after any existing post-map.
    pub fn apply_affine(&self, a: Rational, b: Rational) -> Result<CantorSpec, CantorError> {
        if a.is_zero() {
            return Err(invalid("affine post-map needs a ≠ 0"));
        }
        let outer = Affine { a, b };
        let affine = match &self.affine {
            Some(inner) => outer.compose(inner),
            None => outer,
        };
        let affine = (affine != Affine::identity()).then_some(affine);
        Ok(CantorSpec { kind: self.kind.clone(), affine })
    }

    pub fn affine(&self) -> Affine {
        self.affine.clone().unwrap_or_else(Affine::identity)
    }

    /// Whether bridge endpoints are exact rationals.
    pub fn is_exact(&self) -> bool {
        !matches!(self.kind, SetKind::ContinuedFraction { .. })
    }

    /// Levels available (`None` means unbounded).
    pub fn available_depth(&self) -> Option<u32> {
        match &self.kind {
            SetKind::GapTree { nodes, .. } => {
                let mut depth = 0u32;
                while (1usize << (depth + 1)) - 1 <= nodes.len() {
                    depth += 1;
                }
                Some(depth)
            }
            _ => None,
        }
    }

    /// Convex hull before the affine post-map.
    fn base_hull(&self) -> Interval {
        match &self.kind {
            SetKind::HomogeneousIfs { .. } | SetKind::TwoMapIfs { .. } => Interval::unit(),
            SetKind::GapTree { root, .. } => root.clone(),
            SetKind::ContinuedFraction { t, digits } => {
                let (m, big_m) = cf_tail_extremes(digits);
                let t = Rational::from_integer(*t);
                m.add_rational(&t).enclosure().hull(&big_m.add_rational(&t).enclosure())
            }
        }
    }

    pub fn hull(&self) -> Interval {
        self.map_interval(&self.base_hull())
    }

    /// Closed-form hull endpoints for continued-fraction sets.
    pub fn cf_hull_surds(&self) -> Option<(QuadSurd, QuadSurd)> {
        let SetKind::ContinuedFraction { t, digits } = &self.kind else {
            return None;
        };
        let (m, big_m) = cf_tail_extremes(digits);
        let t = Rational::from_integer(*t);
        let map = |s: QuadSurd| {
            let aff = self.affine();
            QuadSurd { a: &(&s.a * &aff.a) + &aff.b, b: &s.b * &aff.a, c: s.c }
        };
        let (lo, hi) = (map(m.add_rational(&t)), map(big_m.add_rational(&t)));
        if self.affine().a.is_negative() {
            Some((hi, lo))
        } else {
            Some((lo, hi))
        }
    }

    fn map_interval(&self, iv: &Interval) -> Interval {
        match &self.affine {
            Some(aff) => aff.apply(iv),
            None => iv.clone(),
        }
    }

    pub fn level_bridges(&self, depth: u32) -> Result<BridgeLevel, CantorError> {
        if let Some(avail) = self.available_depth() {
            if depth > avail {
                return Err(CantorError::DepthExceedsTree { requested: depth, available: avail });
            }
        }
        let mut level = match &self.kind {
            SetKind::ContinuedFraction { t, digits } => cf_level(*t, digits, depth),
            _ => self.tree_level(depth),
        };
        if self.affine.is_some() {
            let flip = self.affine().a.is_negative();
            level.bridges = level.bridges.iter().map(|b| self.map_interval(b)).collect();
            level.gaps = level
                .gaps
                .iter()
                .map(|g| {
                    let (left, right) = (self.map_interval(&g.left), self.map_interval(&g.right));
                    let gap = self.map_interval(&g.gap);
                    if flip {
                        Gap { gap, left: right, right: left }
                    } else {
                        Gap { gap, left, right }
                    }
                })
                .collect();
            if flip {
                level.bridges.reverse();
                level.gaps.reverse();
            }
        }
        Ok(level)
    }

    /// Splits a tree-variant bridge; `node` is its heap index.
    fn split(&self, lo: &Rational, hi: &Rational, node: usize) -> (Rational, Rational) {
        let len = hi - lo;
        match &self.kind {
            SetKind::HomogeneousIfs { lambda } => (lo + &(lambda * &len), hi - &(lambda * &len)),
            SetKind::TwoMapIfs { lambda1, lambda2 } => (lo + &(lambda1 * &len), hi - &(lambda2 * &len)),
            SetKind::GapTree { nodes, .. } => {
                let (g, h) = nodes[node].exact_bounds().expect("validated");
                (g.clone(), h.clone())
            }
            SetKind::ContinuedFraction { .. } => unreachable!("not a binary tree"),
        }
    }

    fn tree_level(&self, depth: u32) -> BridgeLevel {
        let base = self.base_hull();
        let (lo, hi) = base.exact_bounds().expect("tree variants are exact");
        let mut bridges = vec![(lo.clone(), hi.clone())];
        let mut gaps = Vec::new();
        for level in 0..depth {
            let first = (1usize << level) - 1;
            let mut next = Vec::with_capacity(bridges.len() * 2);
            gaps.clear();
            for (k, (a, b)) in bridges.iter().enumerate() {
                let (g, h) = self.split(a, b, first + k);
                let left = Interval::Exact { lo: a.clone(), hi: g.clone() };
                let right = Interval::Exact { lo: h.clone(), hi: b.clone() };
                gaps.push(Gap { gap: Interval::Exact { lo: g.clone(), hi: h.clone() }, left, right });
                next.push((a.clone(), g));
                next.push((h, b.clone()));
            }
            bridges = next;
        }
        BridgeLevel {
            depth,
            bridges: bridges.into_iter().map(|(lo, hi)| Interval::Exact { lo, hi }).collect(),
            gaps,
        }
    }
}

impl fmt::Display for CantorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            SetKind::HomogeneousIfs { lambda } => write!(f, "K({lambda})")?,
            SetKind::TwoMapIfs { lambda1, lambda2 } => write!(f, "K({lambda1},{lambda2})")?,
            SetKind::ContinuedFraction { t, digits } => {
                let contiguous = digits.first() == Some(&1)
                    && digits.windows(2).all(|w| w[1] == w[0] + 1);
                if contiguous {
                    write!(f, "F{t}({})", digits.len())?;
                } else {
                    let list: Vec<String> = digits.iter().map(u32::to_string).collect();
                    write!(f, "F{t}{{{}}}", list.join(","))?;
                }
            }
            SetKind::GapTree { root, nodes } => write!(f, "tree{root}/{}", nodes.len())?,
        }
        if let Some(aff) = &self.affine {
            write!(f, "·{}+{}", aff.a, aff.b)?;
        }
        Ok(())
    }
}

/// Parses a set description: a JSON object, or one of the aliases `C`,
/// `C+1`, `K(λ)`, `K(λ₁,λ₂)`, `F<t>(<m>)`, `F(<m>)`.
pub fn parse_set(text: &str) -> Result<CantorSpec, CantorError> {
    let s = text.trim();
    if s.starts_with('{') {
        return CantorSpec::from_json(s);
    }
    let bad = || CantorError::Malformed(format!("unrecognized set `{s}`"));
    let rat = |x: &str| x.trim().parse::<Rational>().map_err(|_| bad());
    if s == "C" {
        return Ok(CantorSpec::middle_third());
    }
    if let Some(shift) = s.strip_prefix("C+") {
        return CantorSpec::middle_third().apply_affine(Rational::one(), rat(shift)?);
    }
    if let Some(inner) = s.strip_prefix("K(").and_then(|r| r.strip_suffix(')')) {
        let parts: Vec<&str> = inner.split(',').collect();
        return match parts.as_slice() {
            [l] => CantorSpec::homogeneous(rat(l)?),
            [l1, l2] => CantorSpec::two_map(rat(l1)?, rat(l2)?),
            _ => Err(bad()),
        };
    }
    if let Some(rest) = s.strip_prefix('F') {
        let open = rest.find('(').ok_or_else(bad)?;
        let t: i64 = if open == 0 { 0 } else { rest[..open].parse().map_err(|_| bad())? };
        let m: u32 = rest[open + 1..].strip_suffix(')').ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let digits: Vec<u32> = (1..=m).collect();
        return CantorSpec::continued_fraction(t, &digits);
    }
    Err(bad())
}

// ---------------------------------------------------------------------------
// Continued fractions

/// `(m_B, M_B)`: the infimum and supremum of `[0; a₁, a₂, …]` with every
/// `aᵢ ∈ B`, as exact quadratic surds.
pub fn cf_tail_extremes(digits: &[u32]) -> (QuadSurd, QuadSurd) {
    let lo = *digits.iter().min().expect("nonempty digit set");
    let hi = *digits.iter().max().expect("nonempty digit set");
    (period_two(hi, lo), period_two(lo, hi))
}

/// Value of `[0; a, b, a, b, …]`: the positive root of `a·x² + ab·x − b = 0`.
fn period_two(a: u32, b: u32) -> QuadSurd {
    let (a, b) = (a as i64, b as i64);
    let disc = BigInt::from(a * a * b * b + 4 * a * b);
    QuadSurd::new(Rational::new(-b, 2), Rational::new(1, 2 * a), disc)
}

/// Hull of `G(l)`, the numbers `[0; a₁, …]` (finite or infinite) with all
/// `aᵢ ≥ l`.
pub fn g_set_hull(l: u32) -> Interval {
    assert!(l >= 1);
    Interval::Exact { lo: Rational::zero(), hi: Rational::new(1, l as i64) }
}

/// Outward-rounded double interval for the hot continued-fraction loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Fi {
    pub lo: f64,
    pub hi: f64,
}

impl Fi {
    pub fn of(iv: &Interval) -> Fi {
        Fi { lo: iv.lo_f64(), hi: iv.hi_f64() }
    }

    pub fn to_interval(self) -> Interval {
        Interval::Float { lo: self.lo, hi: self.hi }
    }
}

/// Convergent state of a digit prefix: `g(y) = (p + y·p1)/(q + y·q1)` maps
/// a tail value `y` to `[0; a₁, …, aₙ + …]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Mobius {
    pub p: i128,
    pub p1: i128,
    pub q: i128,
    pub q1: i128,
}

impl Mobius {
    pub const IDENTITY: Mobius = Mobius { p: 0, p1: 1, q: 1, q1: 0 };

    pub fn push(self, a: u32) -> Mobius {
        let a = a as i128;
        Mobius { p: a * self.p + self.p1, p1: self.p, q: a * self.q + self.q1, q1: self.q }
    }

    /// Enclosure of `g` over `y ⊂ [0, ∞)`.
    pub fn eval(self, y: Fi) -> Fi {
        const EXACT: i128 = 1 << 53;
        assert!(self.q < EXACT && self.p < EXACT, "convergent exceeds exact double range");
        if self.p1 * self.q - self.p * self.q1 >= 0 {
            Fi { lo: self.at(y.lo, false), hi: self.at(y.hi, true) }
        } else {
            Fi { lo: self.at(y.hi, false), hi: self.at(y.lo, true) }
        }
    }

    /// One-sided bound on `g(y)` at a double `y ≥ 0`.
    fn at(self, y: f64, upper: bool) -> f64 {
        let (p, p1, q, q1) = (self.p as f64, self.p1 as f64, self.q as f64, self.q1 as f64);
        if upper {
            up(up(p + up(y * p1)) / dn(q + dn(y * q1)))
        } else {
            dn(dn(p + dn(y * p1)).max(0.0) / up(q + up(y * q1)))
        }
    }
}

/// A cylinder of the tail set: bridge endpoints as enclosures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Cylinder {
    pub lo: Fi,
    pub hi: Fi,
}

impl Cylinder {
    pub fn outer(&self) -> Fi {
        Fi { lo: self.lo.lo, hi: self.hi.hi }
    }
}

/// Enclosures of `m_B` and `M_B`.
pub(crate) fn tail_enclosures(digits: &[u32]) -> (Fi, Fi) {
    let (m, big_m) = cf_tail_extremes(digits);
    (Fi::of(&m.enclosure()), Fi::of(&big_m.enclosure()))
}

pub(crate) fn cylinder(g: Mobius, m: Fi, big_m: Fi) -> Cylinder {
    let a = g.eval(m);
    let b = g.eval(big_m);
    if a.lo + a.hi <= b.lo + b.hi {
        Cylinder { lo: a, hi: b }
    } else {
        Cylinder { lo: b, hi: a }
    }
}

/// Depth-`n` cylinders of the tail set, sorted left to right.
pub(crate) fn tail_cylinders(digits: &[u32], depth: u32) -> Vec<Cylinder> {
    let (m, big_m) = tail_enclosures(digits);
    let mut maps = vec![Mobius::IDENTITY];
    for _ in 0..depth {
        maps = maps.iter().flat_map(|g| digits.iter().map(move |&a| g.push(a))).collect();
    }
    let mut cyl: Vec<Cylinder> = maps.into_iter().map(|g| cylinder(g, m, big_m)).collect();
    cyl.sort_by(|x, y| x.lo.lo.total_cmp(&y.lo.lo));
    cyl
}

fn cf_level(t: i64, digits: &[u32], depth: u32) -> BridgeLevel {
    let (m, big_m) = tail_enclosures(digits);
    let shift = Interval::point(Rational::from_integer(t));
    let to_iv = |f: Fi| f.to_interval().add(&shift);
    let mut parents = vec![Mobius::IDENTITY];
    for _ in 1..depth {
        parents = parents.iter().flat_map(|g| digits.iter().map(move |&a| g.push(a))).collect();
    }
    let mut bridges = Vec::new();
    let mut gaps = Vec::new();
    if depth == 0 {
        bridges.push(to_iv(cylinder(Mobius::IDENTITY, m, big_m).outer()));
    } else {
        for g in parents {
            let mut kids: Vec<Cylinder> = digits.iter().map(|&a| cylinder(g.push(a), m, big_m)).collect();
            kids.sort_by(|x, y| x.lo.lo.total_cmp(&y.lo.lo));
            for w in kids.windows(2) {
                let (left, right) = (to_iv(w[0].outer()), to_iv(w[1].outer()));
                let gap = Interval::Float { lo: left.hi_f64(), hi: right.lo_f64() };
                gaps.push(Gap { gap, left, right });
            }
            bridges.extend(kids.iter().map(|c| to_iv(c.outer())));
        }
    }
    bridges.sort_by(|x, y| x.lo_f64().total_cmp(&y.lo_f64()));
    gaps.sort_by(|x, y| x.gap.lo_f64().total_cmp(&y.gap.lo_f64()));
    BridgeLevel { depth, bridges, gaps }
}
