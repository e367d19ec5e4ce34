//! Finite-depth oracle over `f(K_1, …, K_d)`: image enclosures, certified
//! gaps, miss certificates and windowed covering of the line by
//! continued-fraction pieces.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cantor::{CantorError, CantorSpec, SetKind};
use crate::expr::{Compiled, Function, SearchLimits};
use crate::interval::{lohi, Rational, strictly_before, total_length, union_normalize, Interval, IntervalError};
use crate::theorem::{check_scaled, predicted_hull, CheckOptions, ConditionReport, TheoremError, Verdict};

pub const DEFAULT_BUDGET: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("{boxes} boxes exceed the budget of {budget}; lower the depth or raise --budget")]
    BoxBudgetExceeded { boxes: u64, budget: u64 },
    #[error("expression has arity {expected} but {got} sets were given")]
    ArityMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Cantor(#[from] CantorError),
    #[error(transparent)]
    Interval(#[from] IntervalError),
    #[error(transparent)]
    Theorem(#[from] TheoremError),
    #[error("piece t = {t} is not certified to be an interval (check verdict: {verdict})")]
    PieceNotInterval { t: i64, verdict: Verdict, report: Box<ConditionReport> },
    #[error("invalid request: {0}")]
    Invalid(String),
}

/// Box budget: `THICKLAB_BUDGET` if set and valid, else 2^24.
pub fn budget_from_env() -> u64 {
    std::env::var("THICKLAB_BUDGET")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_BUDGET)
}

#[derive(Debug, Clone)]
pub struct CoverOptions {
    pub budget: u64,
    /// Evaluate with outward-rounded doubles instead of exact rationals.
    pub float: bool,
    /// Drop boxes on which a denominator encloses zero instead of failing.
    /// The resulting enclosure only covers the remaining boxes.
    pub excise_zero_denominators: bool,
    /// Extra points or intervals known to be in the image (e.g. `{0}`).
    pub extra_atoms: Vec<Interval>,
    /// Restricts gap reporting.
    pub window: Option<Interval>,
}

impl Default for CoverOptions {
    fn default() -> Self {
        CoverOptions {
            budget: budget_from_env(),
            float: false,
            excise_zero_denominators: false,
            extra_atoms: Vec::new(),
            window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    pub depth: u32,
    /// Normalized superset of the image.
    pub enclosure: Vec<Interval>,
    /// Outer enclosure of `[min f, max f]` over the hull box.
    #[serde(rename = "hull_H")]
    pub hull_h: Interval,
    /// Open intervals inside `H` (and the window, if any) that contain no
    /// image point. Each one certifies that the image is not all of `H`.
    #[serde(rename = "gaps_in_H")]
    pub gaps_in_h: Vec<Interval>,
    #[serde(with = "lohi")]
    pub total_length: Interval,
    pub boxes_evaluated: u64,
    /// Boxes dropped because a denominator enclosed zero.
    #[serde(default)]
    pub excised_boxes: u64,
}

impl CoverReport {
    pub fn has_gaps(&self) -> bool {
        !self.gaps_in_h.is_empty()
    }
}

/// Total length of the enclosure: an upper bound on the image's measure.
pub fn measure_estimate(report: &CoverReport) -> Interval {
    report.total_length.clone()
}

fn check_arity(f: &Function, n: usize) -> Result<(), VerifyError> {
    if f.arity() != n {
        return Err(VerifyError::ArityMismatch { expected: f.arity(), got: n });
    }
    Ok(())
}

fn levels(specs: &[CantorSpec], depth: u32, float: bool) -> Result<Vec<Vec<Interval>>, VerifyError> {
    specs
        .iter()
        .map(|s| {
            let b = s.level_bridges(depth)?.bridges;
            Ok(if float { b.iter().map(Interval::to_float).collect() } else { b })
        })
        .collect()
}

fn decode(mut idx: u64, radix: &[usize], lists: &[Vec<Interval>]) -> Vec<Interval> {
    let mut out = Vec::with_capacity(radix.len());
    for (k, r) in radix.iter().enumerate().rev() {
        let r = *r as u64;
        out.push(lists[k][(idx % r) as usize].clone());
        idx /= r;
    }
    out.reverse();
    out
}

fn box_count(lists: &[Vec<Interval>]) -> u64 {
    lists.iter().fold(1u64, |acc, l| acc.saturating_mul(l.len() as u64))
}

fn lo_corner(bx: &[Interval]) -> Vec<Interval> {
    bx.iter()
        .map(|iv| match iv {
            Interval::Exact { lo, .. } => Interval::point(lo.clone()),
            Interval::Float { lo, .. } => Interval::Float { lo: *lo, hi: *lo },
        })
        .collect()
}

struct ChunkOut {
    parts: Vec<Interval>,
    excised: u64,
    attained: Option<Interval>,
}

/// Encloses `f` over every tuple of depth-`depth` bridges.
pub fn image_cover(
    f: &Function,
    specs: &[CantorSpec],
    depth: u32,
    opts: &CoverOptions,
) -> Result<CoverReport, VerifyError> {
    check_arity(f, specs.len())?;
    let float = opts.float || specs.iter().any(|s| !s.is_exact());
    let lists = levels(specs, depth, opts.float)?;
    let total = box_count(&lists);
    if total > opts.budget {
        return Err(VerifyError::BoxBudgetExceeded { boxes: total, budget: opts.budget });
    }
    let hulls: Vec<Interval> = specs.iter().map(CantorSpec::hull).collect();
    let (hull_h, inner) = if f.expr.contains_division() {
        match f.eval_interval(&hulls) {
            Ok(_) => predicted_hull(f, &hulls, SearchLimits::default()),
            Err(_) => (Interval::Float { lo: f64::NEG_INFINITY, hi: f64::INFINITY }, None),
        }
    } else {
        predicted_hull(f, &hulls, SearchLimits::default())
    };
    let track_attained = inner.is_none();
    let prog = Compiled::new(&f.expr, float);
    let radix: Vec<usize> = lists.iter().map(Vec::len).collect();
    const CHUNK: u64 = 1 << 14;
    let chunks: Vec<u64> = (0..total.div_ceil(CHUNK)).collect();
    let outs: Vec<Result<ChunkOut, VerifyError>> = chunks
        .par_iter()
        .map(|&c| {
            let mut parts = Vec::with_capacity(CHUNK as usize);
            let mut excised = 0;
            let mut attained: Option<Interval> = None;
            for idx in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let bx = decode(idx, &radix, &lists);
                match prog.eval(&bx) {
                    Ok(v) => parts.push(v),
                    Err(IntervalError::DivisionByIntervalContainingZero) if opts.excise_zero_denominators => {
                        excised += 1;
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                }
                if track_attained {
                    if let Ok(v) = prog.eval(&lo_corner(&bx)) {
                        attained = Some(match attained {
                            Some(a) => a.hull(&v),
                            None => v,
                        });
                    }
                }
            }
            Ok(ChunkOut { parts: union_normalize(&parts), excised, attained })
        })
        .collect();
    let mut parts = opts.extra_atoms.clone();
    let mut excised = 0;
    let mut attained: Option<Interval> = None;
    for out in outs {
        let out = out?;
        parts.extend(out.parts);
        excised += out.excised;
        if let Some(v) = out.attained {
            attained = Some(match attained {
                Some(a) => a.hull(&v),
                None => v,
            });
        }
    }
    let enclosure = union_normalize(&parts);
    // Certified part of H: attained values only.
    let certified = inner.or_else(|| attained.and_then(|a| inner_span(&a)));
    let range = match (&certified, &opts.window) {
        (Some(c), Some(w)) => c.intersection(w),
        (Some(c), None) => Some(c.clone()),
        (None, Some(w)) => Some(w.clone()),
        (None, None) => None,
    };
    let gaps_in_h = range.map(|r| uncovered(&enclosure, &r)).unwrap_or_default();
    Ok(CoverReport {
        depth,
        total_length: total_length(&enclosure),
        enclosure,
        hull_h,
        gaps_in_h,
        boxes_evaluated: total - excised,
        excised_boxes: excised,
    })
}

/// `[hi of lo-end, lo of hi-end]` of a hull of point enclosures: the values
/// certainly between two attained values.
fn inner_span(a: &Interval) -> Option<Interval> {
    match a {
        Interval::Exact { .. } => Some(a.clone()),
        Interval::Float { lo, hi } => Interval::float(lo.next_up(), hi.next_down()).ok(),
    }
}

/// Open intervals of `range` not covered by the normalized `enclosure`.
pub fn uncovered(enclosure: &[Interval], range: &Interval) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut cursor = endpoint_lo(range);
    for comp in enclosure {
        if strictly_before(&cursor, &endpoint_lo(comp)) {
            let gap = cursor.hull(&endpoint_lo(comp));
            if let Some(g) = gap.intersection(range) {
                if strictly_before(&endpoint_lo(&g), &endpoint_hi(&g)) {
                    out.push(g);
                }
            }
        }
        if strictly_before(&cursor, &endpoint_hi(comp)) {
            cursor = endpoint_hi(comp);
        }
        if !strictly_before(&cursor, &endpoint_hi(range)) {
            return out;
        }
    }
    if strictly_before(&cursor, &endpoint_hi(range)) {
        out.push(cursor.hull(&endpoint_hi(range)));
    }
    out
}

fn endpoint_lo(iv: &Interval) -> Interval {
    match iv {
        Interval::Exact { lo, .. } => Interval::point(lo.clone()),
        Interval::Float { lo, .. } => Interval::Float { lo: *lo, hi: *lo },
    }
}

fn endpoint_hi(iv: &Interval) -> Interval {
    match iv {
        Interval::Exact { hi, .. } => Interval::point(hi.clone()),
        Interval::Float { hi, .. } => Interval::Float { lo: *hi, hi: *hi },
    }
}

// ---------------------------------------------------------------------------
// Miss certificates

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissCertificate {
    pub value_z: Interval,
    /// Smallest uniform depth at which every bridge box excludes `z`.
    pub depth: u32,
    pub boxes_checked: u64,
    /// Boxes at the depth limit dropped because a denominator enclosed
    /// zero; a certificate with excised boxes is conditional on them.
    pub excised_boxes: u64,
    pub statement: String,
}

/// Outcome of a certificate search; `NotFound` is inconclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CertifyOutcome {
    Certified(MissCertificate),
    NotFound { max_depth: u32, boxes_checked: u64 },
}

fn branching(spec: &CantorSpec) -> usize {
    match &spec.kind {
        SetKind::ContinuedFraction { digits, .. } => digits.len(),
        _ => 2,
    }
}

/// Searches for a depth at which every bridge box excludes `z`, descending
/// only into boxes whose enclosure still contains `z`.
pub fn find_miss_certificate(
    f: &Function,
    specs: &[CantorSpec],
    z: &Interval,
    max_depth: u32,
    opts: &CoverOptions,
) -> Result<CertifyOutcome, VerifyError> {
    check_arity(f, specs.len())?;
    let float = opts.float || specs.iter().any(|s| !s.is_exact()) || !z.is_exact();
    let all: Vec<Vec<Vec<Interval>>> = (0..=max_depth)
        .map(|n| levels(specs, n, opts.float))
        .collect::<Result<_, _>>()?;
    let fan: Vec<usize> = specs.iter().map(branching).collect();
    let prog = Compiled::new(&f.expr, float);
    let d = specs.len();
    let mut stack: Vec<(Vec<usize>, u32)> = vec![(vec![0; d], 0)];
    let mut checked = 0u64;
    let mut excised = 0u64;
    let mut deepest = 0u32;
    while let Some((idx, depth)) = stack.pop() {
        checked += 1;
        if checked > opts.budget {
            return Err(VerifyError::BoxBudgetExceeded { boxes: checked, budget: opts.budget });
        }
        let bx: Vec<Interval> = idx.iter().enumerate().map(|(k, &j)| all[depth as usize][k][j].clone()).collect();
        let contains = match prog.eval(&bx) {
            Ok(v) => v.intersects(z),
            Err(IntervalError::DivisionByIntervalContainingZero) => {
                if depth == max_depth && opts.excise_zero_denominators {
                    excised += 1;
                    deepest = deepest.max(depth);
                    continue;
                }
                true
            }
            Err(e) => return Err(e.into()),
        };
        if !contains {
            deepest = deepest.max(depth);
            continue;
        }
        if depth == max_depth {
            return Ok(CertifyOutcome::NotFound { max_depth, boxes_checked: checked });
        }
        // Children in mixed radix, pushed in reverse for left-first order.
        let counts: Vec<usize> = fan.clone();
        let total: usize = counts.iter().product();
        for c in (0..total).rev() {
            let mut rem = c;
            let mut child = vec![0usize; d];
            for k in (0..d).rev() {
                child[k] = idx[k] * counts[k] + rem % counts[k];
                rem /= counts[k];
            }
            stack.push((child, depth + 1));
        }
    }
    let statement = format!(
        "for every depth-{deepest} bridge box P, z is outside the enclosure of f over P{}",
        if excised > 0 { format!(" ({excised} boxes with a zero denominator excised)") } else { String::new() }
    );
    Ok(CertifyOutcome::Certified(MissCertificate {
        value_z: z.clone(),
        depth: deepest,
        boxes_checked: checked,
        excised_boxes: excised,
        statement,
    }))
}

// ---------------------------------------------------------------------------
// Covering the line with continued-fraction pieces

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub t: i64,
    /// Outer enclosure of the piece's hull.
    pub outer: Interval,
    /// Certified sub-interval of the piece (attained endpoints).
    pub inner: Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineVerdict {
    CoversWindow,
    Uncovered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineCoverReport {
    pub verdict: LineVerdict,
    pub window: Interval,
    pub pieces: Vec<Piece>,
    /// `(t, t', overlap certified)` for consecutive pieces.
    pub overlaps: Vec<(i64, i64, bool)>,
    /// Parts of the window not certified to be covered.
    pub uncovered: Vec<Interval>,
}

fn with_t(spec: &CantorSpec, t: i64) -> Result<CantorSpec, VerifyError> {
    match &spec.kind {
        SetKind::ContinuedFraction { digits, .. } => {
            let mut s = CantorSpec::continued_fraction(t, digits)?;
            s.affine = spec.affine.clone();
            Ok(s)
        }
        _ => Err(VerifyError::Invalid("the varying argument must be a continued-fraction set".into())),
    }
}

/// Hull of the piece with integer part `t` in the varying argument.
pub fn piece_hull(f: &Function, specs: &[CantorSpec]) -> (Interval, Option<Interval>) {
    let hulls: Vec<Interval> = specs.iter().map(CantorSpec::hull).collect();
    predicted_hull(f, &hulls, SearchLimits::default())
}

/// Range of integer parts scanned for pieces meeting the window.
pub const T_SCAN: i64 = 1000;

/// Covers `window` by the pieces `f(K_1, …, F_t(B), …, K_d)` over integer
/// `t`, where `specs[varying]` supplies `B`. Each piece must pass the
/// (hull-scaled) derivative-ratio check before it is used as an interval.
pub fn real_line_cover(
    f: &Function,
    specs: &[CantorSpec],
    varying: usize,
    window: &Interval,
    check: &CheckOptions,
) -> Result<LineCoverReport, VerifyError> {
    check_arity(f, specs.len())?;
    if varying >= specs.len() {
        return Err(VerifyError::Invalid("varying index out of range".into()));
    }
    let mut pieces = Vec::new();
    for t in -T_SCAN..=T_SCAN {
        let mut family = specs.to_vec();
        family[varying] = with_t(&specs[varying], t)?;
        let hulls: Vec<Interval> = family.iter().map(CantorSpec::hull).collect();
        let Ok(naive) = f.eval_interval(&hulls) else { continue };
        if !naive.intersects(window) {
            continue;
        }
        let report = check_scaled(f, &family, check)?;
        if report.verdict != Verdict::Pass {
            return Err(VerifyError::PieceNotInterval { t, verdict: report.verdict, report: Box::new(report) });
        }
        let Some(inner) = report.hull_inner.clone() else {
            return Err(VerifyError::PieceNotInterval { t, verdict: Verdict::Inconclusive, report: Box::new(report) });
        };
        pieces.push(Piece { t, outer: report.predicted_hull.clone(), inner });
    }
    pieces.sort_by(|a, b| a.inner.lo_f64().total_cmp(&b.inner.lo_f64()));
    let overlaps = pieces
        .windows(2)
        .map(|w| (w[0].t, w[1].t, !strictly_before(&endpoint_hi(&w[0].inner), &endpoint_lo(&w[1].inner))))
        .collect();
    let inner_union = union_normalize(&pieces.iter().map(|p| p.inner.clone()).collect::<Vec<_>>());
    let uncovered = uncovered(&inner_union, window);
    Ok(LineCoverReport {
        verdict: if uncovered.is_empty() { LineVerdict::CoversWindow } else { LineVerdict::Uncovered },
        window: window.clone(),
        pieces,
        overlaps,
        uncovered,
    })
}

// ---------------------------------------------------------------------------
// Quotients of homogeneous sets

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotientCover {
    pub depth: u32,
    pub window: Interval,
    /// Enclosure of `R ÷ R` for the right copy `R = λK_λ + 1 − λ`.
    pub copy_enclosure: Vec<Interval>,
    /// Predicted components `λ^m [1−λ, 1/(1−λ)]` meeting the window.
    pub components: Vec<Interval>,
    /// Scaled copies of the enclosure, clipped to the window.
    pub enclosure: Vec<Interval>,
    /// Every enclosure piece lies inside a predicted component.
    pub contained: bool,
    /// Parts of components inside the window missed by the enclosure.
    pub uncovered: Vec<Interval>,
}

/// `K_λ ÷ K_λ` over a positive window via `K_λ \ {0} = ⋃_{j≥0} λ^j R`,
/// which gives `K_λ ÷ K_λ = {0} ∪ ⋃_{m∈ℤ} λ^m (R ÷ R)`. No bridge of `R`
/// touches zero.
pub fn quotient_cover(
    lambda: &Rational,
    depth: u32,
    window: &Interval,
    opts: &CoverOptions,
) -> Result<QuotientCover, VerifyError> {
    if !window.is_positive() || !window.is_exact() {
        return Err(VerifyError::Invalid("quotient window must be exact and positive".into()));
    }
    let one = Rational::one();
    let right = CantorSpec::homogeneous(lambda.clone())?.apply_affine(lambda.clone(), &one - lambda)?;
    let f = Function::parse_arity("x/y", 2).expect("static expression");
    let copy = image_cover(&f, &[right.clone(), right], depth, opts)?;
    let r = &one - lambda;
    let base = Interval::exact(r.clone(), r.recip()).expect("1 − λ < 1/(1 − λ)");
    let mut components = Vec::new();
    let mut pieces = Vec::new();
    for m in -200i32..=200 {
        let s = if m >= 0 { lambda.pow(m as u32) } else { lambda.recip().pow((-m) as u32) };
        let scale = Interval::point(s);
        let comp = base.mul(&scale);
        if !comp.intersects(window) {
            continue;
        }
        components.push(comp);
        for e in &copy.enclosure {
            if let Some(c) = e.mul(&scale).intersection(window) {
                pieces.push(c);
            }
        }
    }
    let components = union_normalize(&components);
    let enclosure = union_normalize(&pieces);
    let contained = enclosure.iter().all(|p| components.iter().any(|c| p.subset_of(c)));
    let uncovered = components
        .iter()
        .filter_map(|c| c.intersection(window))
        .flat_map(|c| uncovered(&enclosure, &c))
        .collect();
    Ok(QuotientCover { depth, window: window.clone(), copy_enclosure: copy.enclosure, components, enclosure, contained, uncovered })
}
