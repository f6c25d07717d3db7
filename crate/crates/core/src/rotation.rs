//! Rotation numbers, continued fractions, and parameter tuning.
//!
//! Convention: an irrational rho in (0, 1) is expanded as
//! rho = 1 / (a0 + 1 / (a1 + ...)) with partial quotients a_k >= 1. Return
//! times obey q_0 = 1, q_1 = a_0, q_{k+1} = a_k q_k + q_{k-1}; the numerators
//! p_k satisfy the same recursion from p_0 = 0, p_1 = 1, and p_d / q_d is the
//! value of the depth-d expansion.
//!
//! The tuner never estimates rho numerically to decide a bisection step.
//! For a monotone degree-one lift, |F^n(x) - x - n rho(F)| <= 1 for all n, so
//! the drift F^j(0) - j rho* crossing +-1.5 is an exact certificate that
//! rho(F) lies above resp. below rho*. Winding counts are accumulated in
//! integer arithmetic so the certificate is immune to float accumulation.

use crate::circle::frac;
use crate::error::{Error, Result};
use crate::maps::MapSpec;
use serde::{Deserialize, Serialize};

/// Depth cap for continued-fraction expansion of a float input.
pub const MAX_CF_DEPTH: usize = 25;

/// Largest certification orbit (q_d points) the tuner will materialize.
pub const ORBIT_CAP: usize = 200_000;

/// Convergents p_k / q_k of a finite continued fraction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Convergents {
    pub quotients: Vec<u32>,
    pub p: Vec<u64>,
    pub q: Vec<u64>,
}

impl Convergents {
    pub fn new(quotients: &[u32]) -> Result<Convergents> {
        if quotients.is_empty() {
            return Err(Error::Domain("empty continued fraction".into()));
        }
        if let Some(bad) = quotients.iter().find(|&&a| a == 0) {
            return Err(Error::Domain(format!(
                "partial quotients must be positive, got {bad}"
            )));
        }
        let d = quotients.len();
        let mut p: Vec<u64> = Vec::with_capacity(d + 1);
        let mut q: Vec<u64> = Vec::with_capacity(d + 1);
        p.push(0);
        q.push(1);
        p.push(1);
        q.push(u64::from(quotients[0]));
        for k in 1..d {
            let a = u64::from(quotients[k]);
            let pn = a
                .checked_mul(p[k])
                .and_then(|t| t.checked_add(p[k - 1]))
                .ok_or_else(|| Error::Domain("convergent numerator overflow".into()))?;
            let qn = a
                .checked_mul(q[k])
                .and_then(|t| t.checked_add(q[k - 1]))
                .ok_or_else(|| Error::Domain("convergent denominator overflow".into()))?;
            p.push(pn);
            q.push(qn);
        }
        Ok(Convergents {
            quotients: quotients.to_vec(),
            p,
            q,
        })
    }

    pub fn depth(&self) -> usize {
        self.quotients.len()
    }

    /// Final numerator p_d.
    pub fn numerator(&self) -> u64 {
        *self.p.last().unwrap()
    }

    /// Final denominator q_d.
    pub fn denominator(&self) -> u64 {
        *self.q.last().unwrap()
    }

    /// p_d / q_d as a float.
    pub fn value(&self) -> f64 {
        self.numerator() as f64 / self.denominator() as f64
    }
}

/// [1, 1, 1, ...]: golden-mean combinatorics, q_k the Fibonacci numbers.
pub fn golden_quotients(depth: usize) -> Vec<u32> {
    vec![1; depth]
}

/// [2, 2, 2, ...]: silver-mean combinatorics.
pub fn silver_quotients(depth: usize) -> Vec<u32> {
    vec![2; depth]
}

/// Continued-fraction expansion of rho in (0, 1) by the Gauss map,
/// truncated at `depth` (capped at `MAX_CF_DEPTH`).
///
/// Rejects inputs whose expansion terminates (to working precision) before
/// `depth` quotients: the remainder collapsing below 1e-12 means the input is
/// indistinguishable from a rational at that depth.
pub fn continued_fraction(rho: f64, depth: usize) -> Result<Vec<u32>> {
    if !rho.is_finite() || rho <= 0.0 || rho >= 1.0 {
        return Err(Error::Domain(format!(
            "continued fraction input must lie in (0, 1), got {rho}"
        )));
    }
    let depth = depth.min(MAX_CF_DEPTH);
    if depth == 0 {
        return Err(Error::Domain("requested depth 0".into()));
    }
    let mut x = rho;
    let mut quotients = Vec::with_capacity(depth);
    for k in 0..depth {
        if x < 1e-12 {
            return Err(Error::NearRational(format!(
                "expansion of {rho} terminates after {k} quotients"
            )));
        }
        let inv = 1.0 / x;
        let a = inv.floor();
        if !(1.0..1e9).contains(&a) {
            return Err(Error::NearRational(format!(
                "partial quotient {a:.3e} at index {k} exceeds working precision"
            )));
        }
        quotients.push(a as u32);
        x = inv - a;
    }
    Ok(quotients)
}

/// Rotation number estimate (F^N(x0) - x0) / N with the integer winding
/// accumulated exactly. Returns (estimate, error_bound); for a circle
/// homeomorphism |F^N(x) - x - N rho| <= 1, so the bound is 1/N and it is
/// independent of x0.
pub fn rotation_number(spec: &MapSpec, x0: f64, iterations: usize) -> Result<(f64, f64)> {
    if iterations < 1_000 {
        return Err(Error::Domain(format!(
            "need at least 1000 iterations for a meaningful bound, got {iterations}"
        )));
    }
    let x0 = frac(x0);
    let mut x = x0;
    let mut winding: i64 = 0;
    for _ in 0..iterations {
        let fx = spec.lift(x);
        let w = fx.floor();
        winding += w as i64;
        x = frac(fx - w);
    }
    let estimate = (winding as f64 + x - x0) / iterations as f64;
    Ok((estimate, 1.0 / iterations as f64))
}

/// Which side of a reference value rho* the map's rotation number lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoSide {
    Below,
    Above,
}

/// Run the drift certificate up to `budget` steps. Returns the certified
/// side as soon as |F^j(0) - j rho*| > 1.5, plus the final drift either way.
fn drift_side(spec: &MapSpec, rho_star: f64, budget: usize) -> (Option<RhoSide>, f64) {
    let mut x = 0.0f64;
    let mut winding: i64 = 0;
    let mut drift = 0.0f64;
    for j in 1..=budget {
        let fx = spec.lift(x);
        let w = fx.floor();
        winding += w as i64;
        x = frac(fx - w);
        drift = winding as f64 + x - j as f64 * rho_star;
        if drift > 1.5 {
            return (Some(RhoSide::Above), drift);
        }
        if drift < -1.5 {
            return (Some(RhoSide::Below), drift);
        }
    }
    (None, drift)
}

const DECIDE_BUDGETS: [usize; 2] = [200_000, 2_000_000];

/// Certified side decision with escalating budgets. `None` means the drift
/// stayed bounded for the full budget: rho(F) is too close to rho* for the
/// certificate to fire, which near a mode-locking tongue is a feature, not
/// an error.
fn certified_side(spec: &MapSpec, rho_star: f64) -> Option<RhoSide> {
    for budget in DECIDE_BUDGETS {
        let (side, _) = drift_side(spec, rho_star, budget);
        if side.is_some() {
            return side;
        }
    }
    None
}

/// Result of tuning a family to prescribed combinatorics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneResult {
    pub spec: MapSpec,
    pub theta: f64,
    /// Target p_d / q_d.
    pub rho_target: f64,
    pub p: u64,
    pub q: u64,
    pub bisection_steps: u32,
    /// Max over sample points of |F^q(x) - x - p|.
    pub periodic_residual: f64,
    /// min(max g, -min g) for g = F^q - id - p over the sample grid. A
    /// positive margin exhibits a sign change of g, hence a fixed point of
    /// F^q - p, hence rho(F) = p/q exactly; families without a tongue
    /// (rigid rotations) report a nonpositive margin.
    pub tongue_margin: f64,
}

impl TuneResult {
    /// Whether the rotation number is pinned to p/q by a robust sign change
    /// of the return displacement.
    pub fn rho_is_exactly_target(&self) -> bool {
        self.tongue_margin > 1e-9
    }

    /// Upper bound on |rho(F) - p/q|: essentially exact inside a certified
    /// tongue, otherwise the residual certificate from the decision budget
    /// (the drift stayed bounded for the full budget).
    pub fn rho_gap_bound(&self) -> f64 {
        if self.rho_is_exactly_target() {
            1e-14
        } else {
            2.5 / DECIDE_BUDGETS[1] as f64
        }
    }
}

/// g(x0) = F^q(x0) - x0 - p, winding accumulated in integers.
fn return_displacement(spec: &MapSpec, p: u64, q: u64, x0: f64) -> f64 {
    let mut x = x0;
    let mut winding: i64 = 0;
    for _ in 0..q {
        let fx = spec.lift(x);
        let w = fx.floor();
        winding += w as i64;
        x = frac(fx - w);
    }
    winding as f64 + x - x0 - p as f64
}

/// (min, max) over `samples` grid base points of g = F^q - id - p, each
/// sharpened by a local ternary search (the extremes near a tongue edge live
/// in a narrow bump a bare grid can miss).
pub fn displacement_range(spec: &MapSpec, p: u64, q: u64, samples: usize) -> (f64, f64) {
    let g = |x0: f64| return_displacement(spec, p, q, x0);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut arg_lo = 0.0;
    let mut arg_hi = 0.0;
    for i in 0..samples {
        let x0 = i as f64 / samples as f64;
        let v = g(x0);
        if v < lo {
            lo = v;
            arg_lo = x0;
        }
        if v > hi {
            hi = v;
            arg_hi = x0;
        }
    }
    let step = 1.0 / samples as f64;
    hi = hi.max(refine_extreme(&g, arg_hi - step, arg_hi + step, true));
    lo = lo.min(refine_extreme(&g, arg_lo - step, arg_lo + step, false));
    (lo, hi)
}

/// Ternary search for a local extreme of g on [a, b].
fn refine_extreme(g: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, maximize: bool) -> f64 {
    let h = |x: f64| if maximize { -g(x) } else { g(x) };
    let mut best = h(0.5 * (a + b));
    for _ in 0..22 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        let h1 = h(m1);
        let h2 = h(m2);
        best = best.min(h1).min(h2);
        if h1 < h2 {
            b = m2;
        } else {
            a = m1;
        }
    }
    if maximize {
        -best
    } else {
        best
    }
}

/// Certify that the q points f^j(0), j < q, are cyclically ordered exactly
/// like the rigid rotation by p/q: the sort permutations must coincide.
/// This is a purely combinatorial check, independent of how theta was found.
pub fn certify_cyclic_order(spec: &MapSpec, p: u64, q: u64) -> Result<()> {
    let n = usize::try_from(q).map_err(|_| Error::Domain("q does not fit usize".into()))?;
    if n > ORBIT_CAP {
        return Err(Error::OrbitBudget {
            needed: n,
            cap: ORBIT_CAP,
        });
    }
    if n < 2 {
        return Ok(());
    }
    let mut orbit = Vec::with_capacity(n);
    let mut x = 0.0f64;
    for _ in 0..n {
        orbit.push(x);
        x = spec.eval_circle(x);
    }
    let mut min_gap = f64::INFINITY;
    let mut sorted: Vec<usize> = (0..n).collect();
    sorted.sort_by(|&i, &j| orbit[i].total_cmp(&orbit[j]));
    for w in sorted.windows(2) {
        min_gap = min_gap.min(orbit[w[1]] - orbit[w[0]]);
    }
    if min_gap <= 0.0 {
        return Err(Error::Certification(format!(
            "orbit of length {n} has coincident points (min gap {min_gap:.3e})"
        )));
    }

    // Rigid reference: f^j(0) = j p / q mod 1 sorts like the integer keys
    // (j p) mod q, computed exactly.
    let mut reference: Vec<usize> = (0..n).collect();
    let key = |j: usize| -> u64 { ((j as u128 * p as u128) % q as u128) as u64 };
    reference.sort_by_key(|&j| key(j));

    if sorted != reference {
        return Err(Error::Certification(format!(
            "orbit cyclic order does not match the rotation by {p}/{q}"
        )));
    }
    Ok(())
}

const BRACKET_WIDTH_TOL: f64 = 1e-13;
const MAX_BISECTION_STEPS: u32 = 200;

/// Extreme (max or min over x) of g_theta = F_theta^q - id - p: grid scan
/// plus local ternary refinement around the best grid point.
fn extreme_displacement(spec: &MapSpec, p: u64, q: u64, maximize: bool) -> f64 {
    let g = |x0: f64| return_displacement(spec, p, q, x0);
    let samples = 64;
    let mut best = if maximize {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    };
    let mut arg = 0.0;
    for i in 0..samples {
        let x0 = i as f64 / samples as f64;
        let v = g(x0);
        if (maximize && v > best) || (!maximize && v < best) {
            best = v;
            arg = x0;
        }
    }
    let step = 1.0 / samples as f64;
    let refined = refine_extreme(&g, arg - step, arg + step, maximize);
    if maximize {
        best.max(refined)
    } else {
        best.min(refined)
    }
}

/// Tune theta so the family realizes the combinatorics of the given partial
/// quotients. Two phases:
///
/// 1. Bisection on theta driven by the exact drift certificate against
///    rho* = p_d / q_d. Only certified decisions move the bracket; the first
///    undecidable midpoint means the bracket has shrunk to the scale of the
///    mode-locking tongue of p/q.
/// 2. Both tongue edges are located by bisection: g_theta = F_theta^q - id - p
///    is pointwise strictly increasing in theta, so max_x g and min_x g are
///    monotone and their zeros are exactly the tongue edges. The returned
///    theta is the edge midpoint, with a certified sign change of g when the
///    tongue has positive width (every critical family; rigid rotations have
///    width zero and skip to the bracket midpoint).
///
/// The template's theta is ignored; its family and perturbation are kept.
/// `tol` bounds the final bracket width; anything below 1e-14 is rejected
/// as beyond working precision. At least 8 partial quotients are required
/// so the certified combinatorics pin theta meaningfully.
pub fn tune_parameter(template: &MapSpec, quotients: &[u32], tol: f64) -> Result<TuneResult> {
    if quotients.len() < 8 {
        return Err(Error::Domain(format!(
            "need at least 8 partial quotients to tune, got {}",
            quotients.len()
        )));
    }
    if !(tol >= 1e-14) {
        return Err(Error::Domain(format!(
            "bracket tolerance {tol:.3e} is below working precision 1e-14"
        )));
    }
    let conv = Convergents::new(quotients)?;
    let p = conv.numerator();
    let q = conv.denominator();
    if q as usize > ORBIT_CAP {
        return Err(Error::OrbitBudget {
            needed: q as usize,
            cap: ORBIT_CAP,
        });
    }
    if p >= q {
        return Err(Error::Domain(format!(
            "target rotation number {p}/{q} is not in (0, 1)"
        )));
    }
    let rho_star = conv.value();

    let report = template.verify_critical_cubic();
    if !report.monotone {
        return Err(Error::Domain(
            "lift is not monotone; rotation number is undefined".into(),
        ));
    }

    // Phase 1. rho(F_theta) is monotone nondecreasing in theta, 0 at
    // theta = 0 and approaching 1 as theta -> 1, so [0, 1) brackets every
    // target.
    // Internal width target: never coarser than the generic tongue scale,
    // otherwise a loose tol would leave the bracket midpoint outside a
    // narrow tongue and the combinatorial certification would fail.
    let width_target = tol.min(BRACKET_WIDTH_TOL);

    let mut lo = 0.0f64;
    let mut hi = 1.0 - 1e-12;
    let mut steps = 0u32;
    while hi - lo > width_target && steps < MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        match certified_side(&template.with_theta(mid)?, rho_star) {
            Some(RhoSide::Below) => lo = mid,
            Some(RhoSide::Above) => hi = mid,
            None => break,
        }
        steps += 1;
    }

    // Phase 2: tongue edges inside [lo, hi]. Invariants from phase 1:
    // max g(lo) < 0 (rho below target forbids a sign change) and
    // min g(hi) > 0, so each monotone edge function brackets its zero.
    let theta = if hi - lo > width_target {
        let mut a = lo;
        let mut b = hi;
        while b - a > width_target && steps < MAX_BISECTION_STEPS {
            let mid = 0.5 * (a + b);
            let mg = extreme_displacement(&template.with_theta(mid)?, p, q, true);
            if mg < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
            steps += 1;
        }
        let left_edge = 0.5 * (a + b);
        let left_width = b - a;
        let mut a = lo;
        let mut b = hi;
        while b - a > width_target && steps < MAX_BISECTION_STEPS {
            let mid = 0.5 * (a + b);
            let mg = extreme_displacement(&template.with_theta(mid)?, p, q, false);
            if mg < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
            steps += 1;
        }
        let right_edge = 0.5 * (a + b);
        let width = left_width.max(b - a);
        if width > tol {
            return Err(Error::NoConvergence {
                steps: steps as usize,
                width,
            });
        }
        0.5 * (left_edge + right_edge)
    } else {
        0.5 * (lo + hi)
    };
    let spec = template.with_theta(theta)?;

    certify_cyclic_order(&spec, p, q)?;
    let (lo_disp, hi_disp) = displacement_range(&spec, p, q, 64);
    let periodic_residual = lo_disp.abs().max(hi_disp.abs());
    let tongue_margin = hi_disp.min(-lo_disp);

    Ok(TuneResult {
        spec,
        theta,
        rho_target: rho_star,
        p,
        q,
        bisection_steps: steps,
        periodic_residual,
        tongue_margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::MapSpec;

    #[test]
    fn golden_convergents_are_fibonacci() {
        let c = Convergents::new(&golden_quotients(6)).unwrap();
        assert_eq!(c.q, vec![1, 1, 2, 3, 5, 8, 13]);
        assert_eq!(c.p, vec![0, 1, 1, 2, 3, 5, 8]);
        let golden = (5.0f64.sqrt() - 1.0) / 2.0;
        assert!((c.value() - golden).abs() < 0.01);
    }

    #[test]
    fn silver_convergents() {
        let c = Convergents::new(&silver_quotients(3)).unwrap();
        assert_eq!(c.q, vec![1, 2, 5, 12]);
        assert_eq!(c.p, vec![0, 1, 2, 5]);
    }

    #[test]
    fn short_expansion_value() {
        // 1/(3 + 1/7) = 7/22.
        let c = Convergents::new(&[3, 7]).unwrap();
        assert_eq!(c.numerator(), 7);
        assert_eq!(c.denominator(), 22);
    }

    #[test]
    fn zero_quotient_rejected() {
        assert!(Convergents::new(&[1, 0, 1]).is_err());
        assert!(Convergents::new(&[]).is_err());
    }

    /// Oracle: Euclid's algorithm in u128 on a 30-digit rational
    /// approximation of 1/pi. The first partial quotients of 1/pi are
    /// whatever long division says they are; the float path must agree.
    #[test]
    fn reciprocal_pi_expansion_matches_long_division() {
        // floor(pi * 10^29): 1/pi ~= 10^29 / den.
        let den: u128 = 314159265358979323846264338327;
        let num: u128 = 100_000_000_000_000_000_000_000_000_000;
        let mut a = den;
        let mut b = num;
        let mut euclid = Vec::new();
        while b != 0 && euclid.len() < 8 {
            euclid.push((a / b) as u32);
            let r = a % b;
            a = b;
            b = r;
        }
        assert_eq!(&euclid[..4], &[3, 7, 15, 1]);

        let float_cf = continued_fraction(1.0 / std::f64::consts::PI, 4).unwrap();
        assert_eq!(float_cf, vec![3, 7, 15, 1]);
    }

    #[test]
    fn golden_float_expansion_is_all_ones() {
        let golden = (5.0f64.sqrt() - 1.0) / 2.0;
        let cf = continued_fraction(golden, 25).unwrap();
        assert_eq!(cf, vec![1; 25]);
    }

    #[test]
    fn rational_input_rejected() {
        match continued_fraction(0.5, 3) {
            Err(Error::NearRational(_)) => {}
            other => panic!("expected NearRational, got {other:?}"),
        }
        assert!(continued_fraction(1.5, 3).is_err());
        assert!(continued_fraction(0.0, 3).is_err());
    }

    #[test]
    fn depth_is_capped() {
        let golden = (5.0f64.sqrt() - 1.0) / 2.0;
        let cf = continued_fraction(golden, 100).unwrap();
        assert_eq!(cf.len(), MAX_CF_DEPTH);
    }

    #[test]
    fn rigid_rotation_number_recovered() {
        let spec = MapSpec::rigid_rotation(0.371).unwrap();
        let (rho, bound) = rotation_number(&spec, 0.0, 100_000).unwrap();
        assert_eq!(bound, 1e-5);
        assert!((rho - 0.371).abs() < bound);
        // The estimate is independent of the starting point up to the bound.
        let (rho2, _) = rotation_number(&spec, 0.77, 100_000).unwrap();
        assert!((rho - rho2).abs() < 2.0 * bound);
        assert!(rotation_number(&spec, 0.0, 999).is_err());
    }

    #[test]
    fn rotation_number_monotone_in_theta_for_arnold() {
        // The devil's staircase is nondecreasing; estimates carry a 1/N
        // truncation each, so allow that much slack between grid neighbors.
        let n = 2_000;
        let slack = 2.5 / n as f64;
        let mut prev = 0.0f64;
        for i in 0..=400 {
            let theta = i as f64 / 401.0;
            let (rho, _) = rotation_number(&MapSpec::arnold(theta).unwrap(), 0.0, n).unwrap();
            assert!(
                rho >= prev - slack,
                "rho({theta}) = {rho} dipped below {prev}"
            );
            prev = rho;
        }
    }

    /// Oracle: best approximations by brute force. For the rigid rotation by
    /// rho every convergent denominator q_k beats all smaller denominators:
    /// |q_k rho - p_k| < |q rho - p| for 1 <= q < q_k and any integer p.
    #[test]
    fn convergents_are_best_approximations() {
        for (rho, cf) in [
            ((5.0f64.sqrt() - 1.0) / 2.0, golden_quotients(14)),
            (2.0f64.sqrt() - 1.0, silver_quotients(9)),
            (1.0 / std::f64::consts::PI, continued_fraction(1.0 / std::f64::consts::PI, 7).unwrap()),
        ] {
            let conv = Convergents::new(&cf).unwrap();
            for k in 1..cf.len() {
                let qk = conv.q[k + 1];
                let pk = conv.p[k + 1];
                if qk > 10_000 {
                    break;
                }
                let err_k = (qk as f64 * rho - pk as f64).abs();
                for q in 1..qk {
                    let p = (q as f64 * rho).round();
                    let err = (q as f64 * rho - p).abs();
                    assert!(
                        err_k < err,
                        "rho={rho}: q_{k}={qk} not better than q={q}"
                    );
                }
            }
        }
    }

    #[test]
    fn drift_certificate_decides_quickly_far_from_target() {
        let spec = MapSpec::rigid_rotation(0.5).unwrap();
        let (side, _) = drift_side(&spec, 0.618, 1000);
        assert_eq!(side, Some(RhoSide::Below));
        let (side, _) = drift_side(&spec, 0.382, 1000);
        assert_eq!(side, Some(RhoSide::Above));
    }

    #[test]
    fn tune_rigid_rotation_hits_target() {
        let template = MapSpec::rigid_rotation(0.0).unwrap();
        let result = tune_parameter(&template, &golden_quotients(10), 1e-12).unwrap();
        // For the rigid family theta IS the rotation number, and there is no
        // tongue to land in.
        assert!((result.theta - result.rho_target).abs() < 1e-9);
        assert!(!result.rho_is_exactly_target());
    }

    #[test]
    fn tune_arnold_golden_certifies() {
        let template = MapSpec::arnold(0.0).unwrap();
        let result = tune_parameter(&template, &golden_quotients(10), 1e-12).unwrap();
        assert_eq!(result.q, 89);
        assert_eq!(result.p, 55);
        // The classical golden-mean Arnold parameter is near 0.6066.
        assert!((result.theta - 0.6066).abs() < 0.01, "theta = {}", result.theta);
        // A critical family mode-locks: the tuner lands inside the 55/89
        // tongue and the sign change of F^q - id - p pins rho exactly.
        assert!(result.rho_is_exactly_target(), "{result:?}");
    }

    #[test]
    fn certification_rejects_wrong_combinatorics() {
        let template = MapSpec::arnold(0.0).unwrap();
        let tuned = tune_parameter(&template, &golden_quotients(8), 1e-12).unwrap();
        // Silver combinatorics at comparable denominator: 12/29.
        let err = certify_cyclic_order(&tuned.spec, 12, 29).unwrap_err();
        assert!(matches!(err, Error::Certification(_)), "{err:?}");
    }

    #[test]
    fn orbit_cap_enforced() {
        let template = MapSpec::rigid_rotation(0.0).unwrap();
        // Silver at depth 25 has q > 10^9.
        let err = tune_parameter(&template, &silver_quotients(25), 1e-12).unwrap_err();
        assert!(matches!(err, Error::OrbitBudget { .. }), "{err:?}");
    }

    #[test]
    fn tune_preconditions_enforced() {
        let template = MapSpec::arnold(0.0).unwrap();
        assert!(tune_parameter(&template, &golden_quotients(7), 1e-12).is_err());
        assert!(tune_parameter(&template, &golden_quotients(10), 1e-15).is_err());
        assert!(tune_parameter(&template, &golden_quotients(10), f64::NAN).is_err());
    }

    #[test]
    fn perturbation_shifts_the_tuned_parameter() {
        let tol = 1e-12;
        let plain = tune_parameter(&MapSpec::arnold(0.0).unwrap(), &golden_quotients(9), tol)
            .unwrap();
        let bent = tune_parameter(
            &MapSpec::perturbed_arnold(0.0, 0.03).unwrap(),
            &golden_quotients(9),
            tol,
        )
        .unwrap();
        assert!(
            (plain.theta - bent.theta).abs() > 10.0 * tol,
            "theta {} vs {}",
            plain.theta,
            bent.theta
        );
    }

    /// Round trip: expand a random irrational, rebuild the convergent, and
    /// the depth-d value must sit within 1/q_d^2 of the input.
    #[test]
    fn expansion_round_trip_on_random_inputs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let mut tested = 0;
        while tested < 100 {
            let rho: f64 = rng.gen_range(0.01..0.99);
            let cf = match continued_fraction(rho, 12) {
                Ok(cf) => cf,
                // A float can land indistinguishably close to a rational.
                Err(_) => continue,
            };
            let conv = Convergents::new(&cf).unwrap();
            // Certify at the deepest convergent whose q^2 stays above float
            // resolution of rho itself; beyond q ~ 10^8 the bound 1/q^2
            // drops under the 1-ulp noise of the input.
            let k = (1..conv.q.len())
                .rev()
                .find(|&k| conv.q[k] <= 1_000_000)
                .unwrap();
            let (p, q) = (conv.p[k] as f64, conv.q[k] as f64);
            assert!(
                (p / q - rho).abs() <= 1.0 / (q * q),
                "rho = {rho}: |{p}/{q} - rho| > 1/q^2"
            );
            tested += 1;
        }
    }
}
