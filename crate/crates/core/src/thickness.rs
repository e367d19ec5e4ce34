//! Newhouse thickness: closed forms for the IFS families, enumeration for
//! gap trees, and certified two-sided bounds for continued-fraction sets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cantor::{cylinder, tail_enclosures, tail_cylinders, CantorError, CantorSpec, Cylinder, Fi, Mobius, SetKind};
use crate::interval::{dn, lohi, up, Interval, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ThicknessError {
    #[error("closed form not available for this set kind; use finite enumeration")]
    UnsupportedVariant,
    #[error("thickness enumeration needs depth >= 1")]
    DepthZero,
    #[error(transparent)]
    Cantor(#[from] CantorError),
}

/// The bridge split attaining the reported minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    /// Construction step at which the gap is removed (1 = first split).
    pub step: u32,
    pub left: Interval,
    pub gap: Interval,
    pub right: Interval,
    #[serde(with = "lohi")]
    pub ratio: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThicknessReport {
    #[serde(rename = "tau", with = "lohi")]
    pub value: Interval,
    pub exact: bool,
    #[serde(rename = "depth")]
    pub depth_used: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl ThicknessReport {
    /// Conservative thickness for certification (the lower end).
    pub fn lower(&self) -> Interval {
        lower_end(&self.value)
    }

    /// Optimistic thickness (the upper end).
    pub fn upper(&self) -> Interval {
        upper_end(&self.value)
    }
}

fn lower_end(iv: &Interval) -> Interval {
    match iv {
        Interval::Exact { lo, .. } => Interval::point(lo.clone()),
        Interval::Float { lo, .. } => Interval::Float { lo: *lo, hi: *lo },
    }
}

fn upper_end(iv: &Interval) -> Interval {
    match iv {
        Interval::Exact { hi, .. } => Interval::point(hi.clone()),
        Interval::Float { hi, .. } => Interval::Float { lo: *hi, hi: *hi },
    }
}

/// Closed-form thickness of the IFS families.
pub fn thickness_exact(spec: &CantorSpec) -> Result<ThicknessReport, ThicknessError> {
    let value = match &spec.kind {
        SetKind::HomogeneousIfs { lambda } => {
            lambda / &(&Rational::one() - &(lambda * &Rational::from_integer(2)))
        }
        SetKind::TwoMapIfs { lambda1, lambda2 } => lambda2 / &(&(&Rational::one() - lambda1) - lambda2),
        _ => return Err(ThicknessError::UnsupportedVariant),
    };
    let level = spec.level_bridges(1)?;
    let g = &level.gaps[0];
    Ok(ThicknessReport {
        value: Interval::point(value.clone()),
        exact: true,
        depth_used: 0,
        witness: Some(Witness {
            step: 1,
            left: g.left.clone(),
            gap: g.gap.clone(),
            right: g.right.clone(),
            ratio: Interval::point(value),
        }),
    })
}

/// Thickness from the construction to `depth` steps.
///
/// IFS and gap-tree sets use the binary tree directly and are exact.
/// Continued-fraction sets get an upper bound from the ordered gaps of the
/// depth-`depth` cylinders and a lower bound from one self-similar
/// generation over all Möbius distortions.
pub fn thickness_finite(spec: &CantorSpec, depth: u32) -> Result<ThicknessReport, ThicknessError> {
    if depth == 0 {
        return Err(ThicknessError::DepthZero);
    }
    match &spec.kind {
        SetKind::ContinuedFraction { t, digits } => Ok(cf_thickness(spec, *t, digits, depth)),
        _ => tree_thickness(spec, depth),
    }
}

fn tree_thickness(spec: &CantorSpec, depth: u32) -> Result<ThicknessReport, ThicknessError> {
    let mut best: Option<(Rational, Witness)> = None;
    for step in 1..=depth {
        let level = spec.level_bridges(step)?;
        for g in &level.gaps {
            let w = |iv: &Interval| {
                let (lo, hi) = iv.exact_bounds().expect("tree variants are exact");
                hi - lo
            };
            let r = w(&g.left).min(w(&g.right)) / w(&g.gap);
            if best.as_ref().is_none_or(|(b, _)| r < *b) {
                let witness = Witness {
                    step,
                    left: g.left.clone(),
                    gap: g.gap.clone(),
                    right: g.right.clone(),
                    ratio: Interval::point(r.clone()),
                };
                best = Some((r, witness));
            }
        }
    }
    let (value, witness) = best.expect("depth >= 1 yields a gap");
    Ok(ThicknessReport {
        value: Interval::point(value),
        exact: matches!(spec.kind, SetKind::HomogeneousIfs { .. } | SetKind::TwoMapIfs { .. }),
        depth_used: depth,
        witness: Some(witness),
    })
}

// ---------------------------------------------------------------------------
// Continued fractions

fn sub_dn(a: f64, b: f64) -> f64 {
    dn(a - b)
}

fn sub_up(a: f64, b: f64) -> f64 {
    up(a - b)
}

struct OrderedGap {
    lo: Fi,
    hi: Fi,
    len_lo: f64,
    len_hi: f64,
}

/// Upper bound from the gaps between consecutive depth-`n` cylinders: each
/// walk only passes gaps that are certainly shorter, so every bridge found
/// contains the true one.
fn cf_upper(cyl: &[Cylinder]) -> (f64, usize) {
    let gaps: Vec<OrderedGap> = cyl
        .windows(2)
        .map(|w| OrderedGap {
            lo: w[0].hi,
            hi: w[1].lo,
            len_lo: sub_dn(w[1].lo.lo, w[0].hi.hi).max(0.0),
            len_hi: sub_up(w[1].lo.hi, w[0].hi.lo),
        })
        .collect();
    let mut best = (f64::INFINITY, 0);
    for (k, g) in gaps.iter().enumerate() {
        if g.len_lo <= 0.0 {
            continue;
        }
        let mut j = k;
        while j > 0 && gaps[j - 1].len_lo < g.len_hi {
            j -= 1;
        }
        let left_end = if j == 0 { cyl[0].lo } else { gaps[j - 1].hi };
        let left = sub_up(g.lo.hi, left_end.lo);
        let mut j = k + 1;
        while j < gaps.len() && gaps[j].len_lo < g.len_hi {
            j += 1;
        }
        let right_end = if j == gaps.len() { cyl[cyl.len() - 1].hi } else { gaps[j].lo };
        let right = sub_up(right_end.hi, g.hi.lo);
        let ratio = up(left.min(right) / g.len_lo);
        if ratio < best.0 {
            best = (ratio, k);
        }
    }
    best
}

/// `ℓ_r([y1, y2]) = (y2 − y1)/((1 + y1·r)(1 + y2·r))`, the length of the
/// image of `[y1, y2]` under a prefix map with `q_{n−1}/q_n = r`, up to the
/// common factor `q_n^{-2}`.
fn ell(y1: Fi, y2: Fi, r: Fi) -> Fi {
    let num_lo = sub_dn(y2.lo, y1.hi).max(0.0);
    let num_hi = sub_up(y2.hi, y1.lo);
    let f_lo = |y: f64| dn(1.0 + dn(y * r.lo));
    let f_hi = |y: f64| up(1.0 + up(y * r.hi));
    let den_lo = dn(f_lo(y1.lo) * f_lo(y2.lo));
    let den_hi = up(f_hi(y1.hi) * f_hi(y2.hi));
    Fi { lo: dn(num_lo / den_hi), hi: up(num_hi / den_lo) }
}

/// Lower bound on `ℓ_r([x1, x2]) / ℓ_r([g1, g2])` over the r-box.
fn ratio_lower(x1: Fi, x2: Fi, g1: Fi, g2: Fi, r: Fi) -> f64 {
    let num = sub_dn(x2.lo, x1.hi).max(0.0);
    let gap = sub_up(g2.hi, g1.lo);
    let f_lo = |y: f64| dn(1.0 + dn(y * r.lo));
    let f_hi = |y: f64| up(1.0 + up(y * r.hi));
    let distort = dn(dn(f_lo(g1.lo) * f_lo(g2.lo)) / up(f_hi(x1.hi) * f_hi(x2.hi)));
    dn(dn(num / gap) * distort)
}

struct Walker<'a> {
    digits: &'a [u32],
    m: Fi,
    big_m: Fi,
    r: Fi,
    thr: f64,
    max_depth: u32,
}

impl Walker<'_> {
    fn children(&self, g: Mobius) -> Vec<(Mobius, Cylinder)> {
        let mut kids: Vec<(Mobius, Cylinder)> =
            self.digits.iter().map(|&a| (g.push(a), cylinder(g.push(a), self.m, self.big_m))).collect();
        kids.sort_by(|x, y| x.1.lo.lo.total_cmp(&y.1.lo.lo));
        kids
    }

    fn passes(&self, lo: Fi, hi: Fi) -> bool {
        ell(lo, hi, self.r).hi < self.thr
    }

    /// Walks leftwards across `kids[..=from]`; returns the leftmost point
    /// reached if blocked.
    fn walk_left(&self, kids: &[(Mobius, Cylinder)], from: usize, depth: u32) -> Option<Fi> {
        for k in (0..=from).rev() {
            let (g, c) = kids[k];
            if let Some(stop) = self.enter_left(g, c, depth) {
                return Some(stop);
            }
            if k > 0 && !self.passes(kids[k - 1].1.hi, c.lo) {
                return Some(c.lo);
            }
        }
        None
    }

    fn enter_left(&self, g: Mobius, c: Cylinder, depth: u32) -> Option<Fi> {
        if self.passes(c.lo, c.hi) {
            return None;
        }
        if depth >= self.max_depth {
            return Some(c.hi);
        }
        let kids = self.children(g);
        self.walk_left(&kids, kids.len() - 1, depth + 1)
    }

    fn walk_right(&self, kids: &[(Mobius, Cylinder)], from: usize, depth: u32) -> Option<Fi> {
        for k in from..kids.len() {
            let (g, c) = kids[k];
            if let Some(stop) = self.enter_right(g, c, depth) {
                return Some(stop);
            }
            if k + 1 < kids.len() && !self.passes(c.hi, kids[k + 1].1.lo) {
                return Some(c.hi);
            }
        }
        None
    }

    fn enter_right(&self, g: Mobius, c: Cylinder, depth: u32) -> Option<Fi> {
        if self.passes(c.lo, c.hi) {
            return None;
        }
        if depth >= self.max_depth {
            return Some(c.lo);
        }
        let kids = self.children(g);
        self.walk_right(&kids, 0, depth + 1)
    }
}

/// Lower bound on the thickness ratio of every gap `g_w(u)` whose prefix
/// has `q_{n−1}/q_n ∈ r`. Walks stop at the prefix cylinder's ends, which
/// can only shorten bridges.
fn cf_lower_box(digits: &[u32], m: Fi, big_m: Fi, r: Fi) -> f64 {
    let root = Walker { digits, m, big_m, r, thr: 0.0, max_depth: 0 };
    let kids = root.children(Mobius::IDENTITY);
    let hull = cylinder(Mobius::IDENTITY, m, big_m);
    let mut best = f64::INFINITY;
    for k in 0..kids.len() - 1 {
        let (g1, g2) = (kids[k].1.hi, kids[k + 1].1.lo);
        let thr = ell(g1, g2, r).lo;
        let w = Walker { digits, m, big_m, r, thr, max_depth: 24 };
        let left_stop = w.walk_left(&kids, k, 1).unwrap_or(hull.lo);
        let right_stop = w.walk_right(&kids, k + 1, 1).unwrap_or(hull.hi);
        let left = ratio_lower(left_stop, g1, g1, g2, r);
        let right = ratio_lower(g2, right_stop, g1, g2, r);
        best = best.min(left.min(right));
    }
    best
}

/// Branch and bound over `r ∈ {0} ∪ [1/(max B + 1), 1/min B]`.
fn cf_lower(digits: &[u32], tol: f64, max_boxes: usize) -> f64 {
    let (m, big_m) = tail_enclosures(digits);
    let lo_d = *digits.iter().min().expect("nonempty") as f64;
    let hi_d = *digits.iter().max().expect("nonempty") as f64;
    let zero = Fi { lo: 0.0, hi: 0.0 };
    let at_zero = cf_lower_box(digits, m, big_m, zero);
    let root = Fi { lo: dn(1.0 / (hi_d + 1.0)), hi: up(1.0 / lo_d) };
    let mut leaves = vec![(root, cf_lower_box(digits, m, big_m, root))];
    let mut sampled = at_zero;
    let mut boxes = 1usize;
    loop {
        let (idx, &(bx, lb)) = leaves
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .expect("nonempty");
        let mid = 0.5 * (bx.lo + bx.hi);
        sampled = sampled.min(cf_lower_box(digits, m, big_m, Fi { lo: mid, hi: mid }));
        if lb >= sampled.min(at_zero) - tol || boxes >= max_boxes || bx.hi - bx.lo < 1e-12 {
            break;
        }
        leaves.swap_remove(idx);
        for half in [Fi { lo: bx.lo, hi: mid }, Fi { lo: mid, hi: bx.hi }] {
            leaves.push((half, cf_lower_box(digits, m, big_m, half)));
            boxes += 1;
        }
    }
    let box_min = leaves.iter().map(|l| l.1).fold(f64::INFINITY, f64::min);
    box_min.min(at_zero)
}

fn cf_thickness(spec: &CantorSpec, t: i64, digits: &[u32], depth: u32) -> ThicknessReport {
    let mut upper = f64::INFINITY;
    let mut witness = None;
    for n in 1..=depth {
        let cyl = tail_cylinders(digits, n);
        let (u, k) = cf_upper(&cyl);
        if u < upper {
            upper = u;
            let shift = Interval::point(Rational::from_integer(t));
            let aff = spec.affine();
            let map = |f: Fi| aff.apply(&f.to_interval().add(&shift));
            let gap = Interval::Float { lo: cyl[k].hi.hi, hi: cyl[k + 1].lo.lo };
            let (mut left, mut right) = (map(cyl[k].outer()), map(cyl[k + 1].outer()));
            let mut gap = map(Fi::of(&gap));
            if aff.a.is_negative() {
                std::mem::swap(&mut left, &mut right);
            }
            gap = Interval::Float { lo: left.hi_f64().max(gap.lo_f64()), hi: right.lo_f64().min(gap.hi_f64()) };
            witness = Some(Witness { step: n, left, gap, right, ratio: Interval::Float { lo: 0.0, hi: u } });
        }
    }
    let lower = cf_lower(digits, 1e-9, 4096).min(upper);
    if let Some(w) = witness.as_mut() {
        w.ratio = Interval::Float { lo: lower, hi: upper };
    }
    ThicknessReport {
        value: Interval::Float { lo: lower, hi: upper },
        exact: false,
        depth_used: depth,
        witness,
    }
}

/// Best available thickness: closed form where one exists, otherwise
/// [`thickness_finite`] at `depth`.
pub fn thickness(spec: &CantorSpec, depth: u32) -> Result<ThicknessReport, ThicknessError> {
    match thickness_exact(spec) {
        Ok(r) => Ok(r),
        Err(ThicknessError::UnsupportedVariant) => {
            let avail = spec.available_depth().map_or(depth, |a| a.min(depth));
            thickness_finite(spec, avail.max(1))
        }
        Err(e) => Err(e),
    }
}

/// Astels' normalized thickness `τ/(τ+1)` in plain interval arithmetic.
pub fn astels_gamma(tau: &Interval) -> Interval {
    let one = Interval::point(Rational::one());
    tau.div(&tau.add(&one)).expect("tau > 0")
}

/// `dim_H(K_λ × K_λ) = 2·log 2 / (−log λ)`.
pub fn dim_product_diagnostic(lambda: &Rational) -> f64 {
    2.0 * std::f64::consts::LN_2 / -lambda.to_f64().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: i64, b: i64) -> Rational {
        Rational::new(a, b)
    }

    #[test]
    fn exact_examples() {
        let c = CantorSpec::middle_third();
        assert_eq!(thickness_exact(&c).unwrap().value, Interval::point(Rational::one()));
        let k = CantorSpec::homogeneous(q(3, 10)).unwrap();
        assert_eq!(thickness_exact(&k).unwrap().value, Interval::point(q(3, 4)));
        let two = CantorSpec::two_map(q(1, 2), q(1, 5)).unwrap();
        assert_eq!(thickness_exact(&two).unwrap().value, Interval::point(q(2, 3)));
        let cf = CantorSpec::continued_fraction(0, &[1, 2]).unwrap();
        assert_eq!(thickness_exact(&cf), Err(ThicknessError::UnsupportedVariant));
    }

    #[test]
    fn finite_matches_exact() {
        for spec in [
            CantorSpec::middle_third(),
            CantorSpec::homogeneous(q(2, 5)).unwrap(),
            CantorSpec::two_map(q(1, 2), q(1, 5)).unwrap(),
        ] {
            let exact = thickness_exact(&spec).unwrap().value;
            for n in 1..=5 {
                let r = thickness_finite(&spec, n).unwrap();
                assert!(r.exact);
                assert_eq!(r.value, exact);
            }
        }
    }

    #[test]
    fn gap_tree_example() {
        let tree = CantorSpec::gap_tree(Interval::unit(), vec![Interval::rat(1, 4, 1, 2)]).unwrap();
        let r = thickness_finite(&tree, 1).unwrap();
        assert_eq!(r.value, Interval::point(Rational::one()));
        assert!(!r.exact);
        assert!(matches!(thickness_finite(&tree, 2), Err(ThicknessError::Cantor(_))));
    }

    #[test]
    fn f7_brackets_closed_form() {
        let spec = CantorSpec::continued_fraction(1, &[1, 2, 3, 4, 5, 6, 7]).unwrap();
        let target = (42.0 + 24.0 * 77f64.sqrt()) / 91.0;
        for n in 1..=3 {
            let r = thickness_finite(&spec, n).unwrap();
            assert!(r.value.lo_f64() <= target && target <= r.value.hi_f64(), "{:?}", r.value);
            assert!(r.value.width_f64() < 1e-6, "{:?}", r.value);
        }
    }

    #[test]
    fn cf_upper_nonincreasing() {
        let spec = CantorSpec::continued_fraction(0, &[1, 2, 3, 4]).unwrap();
        let mut prev = f64::INFINITY;
        for n in 1..=5 {
            let hi = thickness_finite(&spec, n).unwrap().value.hi_f64();
            assert!(hi <= prev);
            prev = hi;
        }
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(astels_gamma(&Interval::point(Rational::one())), Interval::point(q(1, 2)));
        let lam = q(2, 5);
        let tau = thickness_exact(&CantorSpec::homogeneous(lam.clone()).unwrap()).unwrap().value;
        assert_eq!(astels_gamma(&tau), Interval::point(&lam / &(&Rational::one() - &lam)));
        let g = astels_gamma(&Interval::rat(27, 10, 28, 10));
        assert_eq!(g, Interval::rat(27, 38, 28, 37));
    }

    #[test]
    fn dimension_examples() {
        assert!((dim_product_diagnostic(&q(1, 4)) - 1.0).abs() < 1e-15);
        assert!((dim_product_diagnostic(&q(1, 3)) - 1.2618595071429148).abs() < 1e-12);
        assert!(dim_product_diagnostic(&q(1, 5)) < 1.0);
    }

    #[test]
    fn report_json() {
        let r = thickness_exact(&CantorSpec::middle_third()).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.starts_with(r#"{"tau":{"lo":"1","hi":"1"},"exact":true,"depth":0"#), "{text}");
        let back: ThicknessReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }
}
