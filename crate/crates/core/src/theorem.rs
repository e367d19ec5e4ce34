//! Mechanical checks of the derivative-ratio condition
//! `1/τ(K_i) ≤ |∂_{x_i} f / ∂_z f| ≤ τ(K_d)` and of the parameter systems
//! for products and quotients of two-map Cantor sets.

use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cantor::CantorSpec;
use crate::expr::{bound_abs_ratio, eval_f64, split_box, Compiled, Expr, Function, RatioBound, SearchLimits};
use crate::interval::{strictly_before, union_normalize, Interval, LoHi, Rational};
use crate::thickness::{dim_product_diagnostic, thickness, ThicknessError, ThicknessReport};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TheoremError {
    #[error("expression has arity {expected} but {got} sets were given")]
    ArityMismatch { expected: usize, got: usize },
    #[error("set {index} has hull {hull}, not [0,1]; compose f with the affine maps first")]
    HullNotNormalized { index: usize, hull: String },
    #[error(transparent)]
    Thickness(#[from] ThicknessError),
    #[error("parameter constraint violated: {0}")]
    ParameterConstraintViolated(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("no witness found: {0}")]
    NoWitnessFound(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    /// Joins per-part verdicts: any fail fails, else any inconclusive.
    pub fn join(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Pass,
        }
    }

    /// CLI exit code: 0 pass, 1 fail, 2 inconclusive.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive => 2,
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableCheck {
    pub i: usize,
    /// Certified required range; absent when it is empty.
    pub required: Option<LoHi>,
    /// Certified enclosure of the (scaled) ratio; absent when `∂_z f`
    /// could not be separated from zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub achieved: Option<LoHi>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub verdict: Verdict,
    pub per_variable: Vec<VariableCheck>,
    /// Outer enclosure of `[min f, max f]` over the domain box.
    #[serde(rename = "H")]
    pub predicted_hull: Interval,
    /// Certified sub-interval of `H` (the attained corner values) when `f`
    /// is monotone in every variable.
    #[serde(rename = "H_inner", default, skip_serializing_if = "Option::is_none")]
    pub hull_inner: Option<Interval>,
    pub tau: Vec<LoHi>,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_witness: Option<Vec<Interval>>,
}

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    pub limits: SearchLimits,
    /// Enumeration depth for sets without a closed-form thickness.
    pub thickness_depth: u32,
    /// Boxes spent looking for a failure witness.
    pub witness_budget: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { limits: SearchLimits::default(), thickness_depth: 3, witness_budget: 20_000 }
    }
}

fn one() -> Interval {
    Interval::point(Rational::one())
}

fn recip(iv: &Interval) -> Option<Interval> {
    if !iv.is_positive() {
        return None;
    }
    one().div(iv).ok()
}

fn endpoint(iv: &Interval, upper: bool) -> Interval {
    match iv {
        Interval::Exact { lo, hi } => Interval::point(if upper { hi.clone() } else { lo.clone() }),
        Interval::Float { lo, hi } => {
            let x = if upper { *hi } else { *lo };
            Interval::Float { lo: x, hi: x }
        }
    }
}

/// `[1/τ_i, τ_d]` from thickness enclosures: with the lower ends (and the
/// reciprocal rounded up) when `optimistic` is false, so the range is
/// certified; with the upper ends otherwise. `None` when empty.
fn range_between(tau_i: &Interval, tau_d: &Interval, optimistic: bool) -> Option<Interval> {
    let a = endpoint(tau_i, optimistic);
    let b = endpoint(tau_d, optimistic);
    let lo = endpoint(&recip(&a)?, !optimistic);
    if strictly_before(&b, &lo) {
        return None;
    }
    Some(lo.hull(&b))
}

struct Condition<'a> {
    f: &'a Function,
    dom: Vec<Interval>,
    scale: Vec<Interval>,
    /// Certified ranges (pass when the achieved ratio lies inside).
    required: Vec<Option<Interval>>,
    /// Optimistic ranges (fail when a box's ratio lies outside); `None`
    /// when even the optimistic range is empty.
    relaxed: Vec<Option<Interval>>,
}

/// Best-first search for a box whose scaled ratio enclosure lies entirely
/// outside `range`.
fn find_outside(
    num: &Expr,
    den: &Expr,
    dom: &[Interval],
    scale: &Interval,
    range: &Interval,
    budget: usize,
) -> Option<Vec<Interval>> {
    struct Item {
        score: f64,
        id: usize,
        bx: Vec<Interval>,
        depth: u32,
    }
    impl PartialEq for Item {
        fn eq(&self, o: &Self) -> bool {
            self.cmp(o) == std::cmp::Ordering::Equal
        }
    }
    impl Eq for Item {}
    impl PartialOrd for Item {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Item {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            self.score.total_cmp(&o.score).then_with(|| o.id.cmp(&self.id))
        }
    }
    let float_mode = dom.iter().any(|iv| !iv.is_exact());
    let num_c = Compiled::new(num, float_mode);
    let den_c = Compiled::new(den, float_mode);
    let (lo, hi) = (range.lo_f64(), range.hi_f64());
    let s_mid = scale.mid_f64();
    let score = |bx: &[Interval]| {
        let p: Vec<f64> = bx.iter().map(Interval::mid_f64).collect();
        let r = s_mid * (eval_f64(num, &p) / eval_f64(den, &p)).abs();
        if r.is_nan() {
            f64::NEG_INFINITY
        } else {
            (r - hi).max(lo - r)
        }
    };
    let mut heap = BinaryHeap::new();
    heap.push(Item { score: score(dom), id: 0, bx: dom.to_vec(), depth: 0 });
    let mut next_id = 1;
    let mut spent = 0;
    while let Some(item) = heap.pop() {
        spent += 1;
        if spent > budget {
            break;
        }
        if let (Ok(d), Ok(n)) = (den_c.eval(&item.bx), num_c.eval(&item.bx)) {
            if !d.contains_zero() {
                if let Ok(q) = n.abs().div(&d.abs()) {
                    let enc = scale.mul(&q);
                    if strictly_before(range, &enc) || strictly_before(&enc, range) {
                        return Some(item.bx);
                    }
                }
            }
        }
        if item.depth < 64 {
            let (a, b) = split_box(&item.bx);
            for half in [a, b] {
                heap.push(Item { score: score(&half), id: next_id, bx: half, depth: item.depth + 1 });
                next_id += 1;
            }
        }
    }
    None
}

impl Condition<'_> {
    fn run(&self, opts: &CheckOptions) -> (Verdict, Vec<VariableCheck>, Option<Vec<Interval>>) {
        let z = self.f.z_index();
        let den = self.f.partial(z);
        let mut verdict = Verdict::Pass;
        let mut checks = Vec::new();
        let mut witness = None;
        for i in 0..z {
            let scale = &self.scale[i];
            let achieved = match bound_abs_ratio(self.f, i, &self.dom, opts.limits) {
                RatioBound::Bounded(e) => Some(scale.mul(&e.bound)),
                RatioBound::DerivativeSignAmbiguous { .. } => None,
            };
            let pass = match (&achieved, &self.required[i]) {
                (Some(a), Some(req)) => a.subset_of(req),
                _ => false,
            };
            let v = if pass {
                Verdict::Pass
            } else {
                let num = self.f.partial(i);
                let found = match &self.relaxed[i] {
                    Some(range) => find_outside(&num, &den, &self.dom, scale, range, opts.witness_budget),
                    None => Some(self.dom.clone()),
                };
                match found {
                    Some(bx) => {
                        if witness.is_none() {
                            witness = Some(bx);
                        }
                        Verdict::Fail
                    }
                    None => Verdict::Inconclusive,
                }
            };
            verdict = verdict.join(v);
            let required = self.required[i].clone().map(LoHi);
            checks.push(VariableCheck { i, required, achieved: achieved.map(LoHi), verdict: v });
        }
        (verdict, checks, witness)
    }
}

/// Enclosure of `[min f, max f]` over `dom`, plus the certified attained
/// sub-interval when every partial derivative has constant sign.
pub fn predicted_hull(f: &Function, dom: &[Interval], limits: SearchLimits) -> (Interval, Option<Interval>) {
    let signs: Option<Vec<bool>> = (0..f.arity())
        .map(|j| {
            let d = f.eval_partial(j, dom).ok()?;
            if d.contains_zero() {
                if d.lo_f64() == 0.0 && d.hi_f64() == 0.0 {
                    return Some(true);
                }
                None
            } else {
                Some(d.is_positive())
            }
        })
        .collect();
    if let Some(signs) = signs {
        let corner = |maximize: bool| -> Vec<Interval> {
            dom.iter().zip(&signs).map(|(iv, &inc)| endpoint(iv, inc == maximize)).collect()
        };
        if let (Ok(lo), Ok(hi)) = (f.eval_interval(&corner(false)), f.eval_interval(&corner(true))) {
            let outer = endpoint(&lo, false).hull(&endpoint(&hi, true));
            let inner = if strictly_before(&endpoint(&hi, false), &endpoint(&lo, true)) {
                None
            } else {
                Some(endpoint(&lo, true).hull(&endpoint(&hi, false)))
            };
            return (outer, inner);
        }
    }
    match crate::expr::bound_range(&f.expr, dom, limits) {
        crate::expr::SearchOutcome::Bounded(e) => (e.bound, None),
        crate::expr::SearchOutcome::Undetermined { .. } => {
            let naive = f.eval_interval(dom).unwrap_or(Interval::Float { lo: f64::NEG_INFINITY, hi: f64::INFINITY });
            (naive, None)
        }
    }
}

fn thicknesses(specs: &[CantorSpec], depth: u32) -> Result<Vec<ThicknessReport>, TheoremError> {
    specs.iter().map(|s| thickness(s, depth).map_err(TheoremError::from)).collect()
}

fn check_arity(f: &Function, n: usize) -> Result<(), TheoremError> {
    if f.arity() != n || n < 2 {
        return Err(TheoremError::ArityMismatch { expected: f.arity(), got: n });
    }
    Ok(())
}

fn report(
    cond: Condition<'_>,
    taus: &[Interval],
    warnings: Vec<String>,
    opts: &CheckOptions,
) -> ConditionReport {
    let (verdict, per_variable, failure_witness) = cond.run(opts);
    let (predicted_hull, hull_inner) = predicted_hull(cond.f, &cond.dom, opts.limits);
    ConditionReport {
        verdict,
        per_variable,
        predicted_hull,
        hull_inner,
        tau: taus.iter().cloned().map(LoHi).collect(),
        warnings,
        failure_witness,
    }
}

/// Checks the condition for sets whose hulls are all `[0, 1]`.
pub fn check_main(f: &Function, specs: &[CantorSpec], opts: &CheckOptions) -> Result<ConditionReport, TheoremError> {
    check_arity(f, specs.len())?;
    for (index, s) in specs.iter().enumerate() {
        let h = s.hull();
        if h != Interval::unit() {
            return Err(TheoremError::HullNotNormalized { index, hull: h.to_string() });
        }
    }
    check_scaled(f, specs, opts)
}

/// The same check for arbitrary hulls: the theorem is applied to `f`
/// composed with the affine maps `[0,1] → hull(K_i)`, which multiplies the
/// `i`-th ratio by `|hull(K_i)| / |hull(K_d)|`.
pub fn check_scaled(f: &Function, specs: &[CantorSpec], opts: &CheckOptions) -> Result<ConditionReport, TheoremError> {
    check_arity(f, specs.len())?;
    let reports = thicknesses(specs, opts.thickness_depth)?;
    let taus: Vec<Interval> = reports.iter().map(|r| r.value.clone()).collect();
    let dom: Vec<Interval> = specs.iter().map(CantorSpec::hull).collect();
    let z = f.z_index();
    let wz = dom[z].width();
    let scale = (0..z).map(|i| dom[i].width().div(&wz).expect("hulls have positive width")).collect();
    let cond = Condition {
        f,
        dom,
        scale,
        required: (0..z).map(|i| range_between(&taus[i], &taus[z], false)).collect(),
        relaxed: (0..z).map(|i| range_between(&taus[i], &taus[z], true)).collect(),
    };
    let mut warnings = Vec::new();
    if reports.iter().any(|r| !r.exact) {
        warnings.push("some thicknesses are certified bounds rather than exact values".to_string());
    }
    Ok(report(cond, &taus, warnings, opts))
}

/// Homogeneous refinement: both variables range over `K_λ` and the required
/// range is `[(1−2λ)/λ, 1/(1−2λ)]`. `domain` restricts the box (default
/// `[0,1]^d`).
pub fn check_main1(
    f: &Function,
    lambda: &Rational,
    domain: Option<Vec<Interval>>,
    opts: &CheckOptions,
) -> Result<ConditionReport, TheoremError> {
    let half = Rational::new(1, 2);
    if !(lambda.is_positive() && lambda < &half) {
        return Err(TheoremError::PreconditionViolated("need 0 < λ < 1/2".into()));
    }
    let d = f.arity();
    let dom = domain.unwrap_or_else(|| vec![Interval::unit(); d]);
    if dom.len() != d {
        return Err(TheoremError::ArityMismatch { expected: d, got: dom.len() });
    }
    let gap = &Rational::one() - &(lambda * &Rational::from_integer(2));
    // Empty for λ < 1/4, where no f can satisfy the condition.
    let range = Interval::exact(&gap / lambda, gap.recip()).ok();
    let tau = Interval::point(lambda / &gap);
    let mut warnings = Vec::new();
    let dim = dim_product_diagnostic(lambda);
    if lambda < &Rational::new(1, 4) {
        warnings.push(format!(
            "dim_H(K_λ × K_λ) = {dim:.4} < 1: f(K_λ, K_λ) has measure zero and cannot be an interval"
        ));
    }
    let z = d - 1;
    let cond = Condition {
        f,
        dom,
        scale: vec![one(); z],
        required: vec![range.clone(); z],
        relaxed: vec![range; z],
    };
    Ok(report(cond, &vec![tau; d], warnings, opts))
}

// ---------------------------------------------------------------------------
// Products and quotients

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub i: usize,
    /// `(1−2λ_i)/λ_i ≤ 1−λ_d`
    pub lower: (Rational, Rational),
    /// `1/(1−λ_i) ≤ λ_d/(1−2λ_d)`
    pub upper: (Rational, Rational),
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicationReport {
    pub verdict: Verdict,
    pub inequalities: Vec<InequalityCheck>,
    pub delta: Rational,
    pub eta: Rational,
    pub contains_zero: bool,
    /// `U` over exponents `0..=k_max`, normalized. Empty unless the system holds.
    pub pieces: Vec<Interval>,
}

/// Checks the product system for `K_{λ_1}^{ε_1} ⋯ K_{λ_d}^{ε_d}` and
/// materializes the predicted set `U` over a finite exponent window.
pub fn check_multiplication(
    lambdas: &[Rational],
    epsilons: &[i32],
    k_max: u32,
) -> Result<MultiplicationReport, TheoremError> {
    let d = lambdas.len();
    if d < 2 || epsilons.len() != d {
        return Err(TheoremError::PreconditionViolated("need d >= 2 parameters and matching signs".into()));
    }
    let half = Rational::new(1, 2);
    if lambdas.iter().any(|l| !(l.is_positive() && l < &half)) {
        return Err(TheoremError::PreconditionViolated("need 0 < λ_i < 1/2".into()));
    }
    if epsilons.iter().any(|e| e.abs() != 1) {
        return Err(TheoremError::PreconditionViolated("signs must be ±1".into()));
    }
    let one = Rational::one();
    let two = Rational::from_integer(2);
    let ld = &lambdas[d - 1];
    let mut inequalities = Vec::new();
    for (i, li) in lambdas[..d - 1].iter().enumerate() {
        let lower = (&(&one - &(&two * li)) / li, &one - ld);
        let upper = ((&one - li).recip(), ld / &(&one - &(&two * ld)));
        let holds = lower.0 <= lower.1 && upper.0 <= upper.1;
        inequalities.push(InequalityCheck { i, lower, upper, holds });
    }
    let holds = inequalities.iter().all(|c| c.holds);
    let mut delta = one.clone();
    let mut eta = one.clone();
    for (l, e) in lambdas.iter().zip(epsilons) {
        if *e == 1 {
            delta = &delta * &(&one - l);
        } else {
            eta = &eta / &(&one - l);
        }
    }
    let contains_zero = epsilons.contains(&1);
    let mut pieces = Vec::new();
    if holds {
        let mut ks = vec![0u32; d];
        loop {
            let mut s = one.clone();
            for ((l, e), k) in lambdas.iter().zip(epsilons).zip(&ks) {
                let p = l.pow(*k);
                s = if *e == 1 { &s * &p } else { &s / &p };
            }
            pieces.push(Interval::exact(&s * &delta, &s * &eta).expect("δ ≤ η"));
            let mut j = 0;
            while j < d && ks[j] == k_max {
                ks[j] = 0;
                j += 1;
            }
            if j == d {
                break;
            }
            ks[j] += 1;
        }
        if contains_zero {
            pieces.push(Interval::point(Rational::zero()));
        }
        pieces = union_normalize(&pieces);
    }
    Ok(MultiplicationReport {
        verdict: if holds { Verdict::Pass } else { Verdict::Fail },
        inequalities,
        delta,
        eta,
        contains_zero,
        pieces,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisionReport {
    pub holds: bool,
    /// `(1−λ₂)²`
    pub threshold: Rational,
    pub predicted: String,
    /// `(λ₁, (1−λ₂)²)`, missed by `K·K` when the condition fails.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product_gap: Option<Interval>,
    /// `(λ₁/(1−λ₂), 1−λ₂)`, missed by `K÷K` when the condition fails.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quotient_gap: Option<Interval>,
}

/// For the two-map set `K` with parameters `λ₁ ≥ λ₂`: `K·K = [0,1]` and
/// `K÷K = ℝ` exactly when `λ₁ ≥ (1−λ₂)²`.
pub fn check_division(lambda1: &Rational, lambda2: &Rational) -> Result<DivisionReport, TheoremError> {
    let one = Rational::one();
    if !(lambda2.is_positive() && lambda2 <= lambda1 && lambda1 < &one && &(lambda1 + lambda2) < &one) {
        return Err(TheoremError::ParameterConstraintViolated(format!(
            "need 0 < λ₂ ≤ λ₁ < 1 and λ₁ + λ₂ < 1 (got λ₁ = {lambda1}, λ₂ = {lambda2})"
        )));
    }
    let r = &one - lambda2;
    let threshold = &r * &r;
    let holds = lambda1 >= &threshold;
    if holds {
        return Ok(DivisionReport {
            holds,
            threshold,
            predicted: "K·K = [0,1] and K÷K = ℝ".into(),
            product_gap: None,
            quotient_gap: None,
        });
    }
    Ok(DivisionReport {
        holds,
        predicted: "K·K and K÷K both have gaps".into(),
        product_gap: Some(Interval::exact(lambda1.clone(), threshold.clone()).expect("λ₁ < (1−λ₂)²")),
        quotient_gap: Some(Interval::exact(lambda1 / &r, r.clone()).expect("λ₁ < (1−λ₂)²")),
        threshold,
    })
}

// ---------------------------------------------------------------------------
// Nonlinear witnesses

/// Simplest rational (smallest denominator) in the open interval `(lo, hi)`.
pub fn simplest_between(lo: &Rational, hi: &Rational) -> Rational {
    assert!(lo < hi);
    let fl = Rational::from_bigint(lo.floor());
    let next = &fl + &Rational::one();
    if &next < hi {
        return next;
    }
    if &fl == lo {
        // (fl, hi) with hi ≤ fl + 1: the largest unit fraction below hi − fl.
        let k = (hi - &fl).recip().floor() + 1;
        return &fl + &Rational::from_bigint(k).recip();
    }
    let inner = simplest_between(&(hi - &fl).recip(), &(lo - &fl).recip());
    &fl + &inner.recip()
}

fn rational_floor_of(iv: &Interval) -> Rational {
    match iv {
        Interval::Exact { lo, .. } => lo.clone(),
        Interval::Float { lo, .. } => Rational::from_f64(*lo).expect("finite"),
    }
}

/// A nonlinear `f(x, y)` satisfying the condition for any sets with
/// thicknesses in `tau1`, `tau2` (needs `τ₁·τ₂ > 1`).
pub fn exists_nonlinear_f(tau1: &Interval, tau2: &Interval, limits: SearchLimits) -> Result<Function, TheoremError> {
    let t1 = rational_floor_of(tau1);
    let t2 = rational_floor_of(tau2);
    let one = Rational::one();
    if !(t1.is_positive() && t2.is_positive()) || &t1 * &t2 <= one {
        return Err(TheoremError::PreconditionViolated("need certified τ₁·τ₂ > 1".into()));
    }
    let names = crate::expr::default_names(2);
    let text = if t1 > one && t2 > one {
        let pick = |t: &Rational| {
            let quarter = &(t - &one) / &Rational::from_integer(4);
            if tau1.is_exact() && tau2.is_exact() {
                quarter
            } else {
                simplest_between(&(&(t - &one) / &Rational::from_integer(5)), &(&(t - &one) / &Rational::from_integer(3)))
            }
        };
        let (alpha, beta) = (pick(&t2), pick(&t1));
        format!("{alpha}*x^2 + {beta}*y^2 + x + y")
    } else {
        let c = simplest_between(&t1.recip(), &t2);
        let bound = &(&(&c * &Rational::from_integer(2)) + &Rational::from_integer(2)) / &(&t2 - &c);
        let zeta = Rational::from_bigint(bound.floor()) + Rational::from_integer(2);
        if zeta > Rational::from_integer(1_000_000) || c.denom() > &num_bigint::BigInt::from(1_000_000) {
            return Err(TheoremError::NoWitnessFound("τ₁·τ₂ too close to 1".into()));
        }
        let gamma = &c * &(&Rational::from_integer(2) + &zeta);
        format!("x^2 + y^2 + {gamma}*x + {zeta}*y")
    };
    let f = Function::parse(&text, &names).expect("generated text parses");
    let required = range_between(tau1, tau2, false)
        .ok_or_else(|| TheoremError::NoWitnessFound("empty required range".into()))?;
    match bound_abs_ratio(&f, 0, &[Interval::unit(), Interval::unit()], limits) {
        RatioBound::Bounded(e) if e.bound.subset_of(&required) => Ok(f),
        _ => Err(TheoremError::NoWitnessFound(format!("candidate {text} did not validate"))),
    }
}
