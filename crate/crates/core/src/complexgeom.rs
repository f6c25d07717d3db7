//! Complex a-priori geometry for critical circle maps.
//!
//! Four instruments, all phrased as plain numerics over explicitly sampled
//! points:
//!
//! * Poincare neighborhoods of a real interval (the locus from which the
//!   interval subtends at least a given visual angle) and how badly an
//!   analytic map distorts them (`quasi_invariance_measure`);
//! * cubic lower growth of renormalized return maps away from the critical
//!   point (`cubic_growth_check`);
//! * contraction of the inverse branch of the return composition toward the
//!   critical value, fitted as a linear bound in rescaled distances
//!   (`inverse_branch_contraction_fit`);
//! * a separation-over-diameter lower bound for the modulus of an annulus
//!   (`modulus_lower_bound`).

use crate::error::{Error, Result};
use crate::fit::{linear_fit, FitResult};
use crate::maps::MapSpec;
use crate::partition::return_structure;
use crate::renorm::normalized_pair;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Longest interval `quasi_invariance_measure` accepts: the distortion
/// statement is local, and pushing a fat neighborhood through the map mixes
/// in curvature effects the measurement is not trying to see.
pub const MAX_QUASI_INTERVAL: f64 = 0.05;

/// Minimum retained sample count for the growth and contraction fits.
pub const MIN_RETAINED: usize = 50;
const MIN_BRANCH_SURVIVORS: usize = 30;

/// Distance from z to the real segment [lo, hi].
fn dist_to_segment(z: Complex64, lo: f64, hi: f64) -> f64 {
    let x = z.re.clamp(lo, hi);
    (z - Complex64::new(x, 0.0)).norm()
}

/// Visual angle subtended by the real interval (a, b) at a non-real point.
pub fn visual_angle(interval: (f64, f64), z: Complex64) -> Result<f64> {
    let (a, b) = interval;
    if z.im == 0.0 {
        return Err(Error::Domain(
            "visual angle undefined on the real axis".into(),
        ));
    }
    let num = Complex64::new(a, 0.0) - z;
    let den = Complex64::new(b, 0.0) - z;
    Ok((num / den).arg().abs())
}

/// The locus where the interval subtends visual angle > theta: two open
/// disk segments glued along the interval. Each half is the part of a disk
/// of radius |J| / (2 sin theta) on its side of the axis; theta = pi/2
/// degenerates to the disk with the interval as diameter.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PoincareRegion {
    a: f64,
    b: f64,
    theta: f64,
    center_upper: Complex64,
    radius: f64,
}

pub fn poincare_region(interval: (f64, f64), theta: f64) -> Result<PoincareRegion> {
    let (a, b) = interval;
    if !(b > a) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!(
            "need a nondegenerate interval, got ({a}, {b})"
        )));
    }
    if !(theta > 0.0 && theta <= PI / 2.0) {
        return Err(Error::Domain(format!(
            "visual angle must lie in (0, pi/2], got {theta}"
        )));
    }
    let half = (b - a) / 2.0;
    Ok(PoincareRegion {
        a,
        b,
        theta,
        center_upper: Complex64::new((a + b) / 2.0, half * theta.cos() / theta.sin()),
        radius: half / theta.sin(),
    })
}

impl PoincareRegion {
    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn center_upper(&self) -> Complex64 {
        self.center_upper
    }

    /// Membership in the open complex part; real points (including the
    /// interval itself) report false.
    pub fn contains(&self, z: Complex64) -> bool {
        if z.im == 0.0 {
            return false;
        }
        let c = if z.im > 0.0 {
            self.center_upper
        } else {
            self.center_upper.conj()
        };
        (z - c).norm() < self.radius
    }

    /// Interior points of the upper boundary arc, where the subtended angle
    /// equals theta exactly.
    pub fn boundary_samples(&self, count: usize) -> Vec<Complex64> {
        let lo = self.theta - PI / 2.0;
        let hi = 3.0 * PI / 2.0 - self.theta;
        (0..count)
            .map(|k| {
                let t = (k + 1) as f64 / (count + 1) as f64;
                let phi = lo + t * (hi - lo);
                self.center_upper + self.radius * Complex64::new(phi.cos(), phi.sin())
            })
            .collect()
    }
}

/// How much visual angle the map can steal from a Poincare neighborhood of
/// a short interval, after renormalizing the image back onto the interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuasiInvariance {
    pub theta: f64,
    /// theta minus the smallest subtended angle over pushed boundary
    /// points; 0 for affine maps, growing with distortion.
    pub loss: f64,
    pub min_image_angle: f64,
    pub excluded: usize,
    pub used: usize,
}

/// Push the boundary of the theta-neighborhood of `interval` through the
/// lift, pull the image interval back onto `interval` by the affine map
/// matching endpoints, and record the worst loss of visual angle. The map
/// must be a diffeomorphism on the interval (no critical point inside).
pub fn quasi_invariance_measure(
    spec: &MapSpec,
    interval: (f64, f64),
    theta: f64,
    samples: usize,
) -> Result<QuasiInvariance> {
    let (a, b) = interval;
    let region = poincare_region(interval, theta)?;
    if b - a > MAX_QUASI_INTERVAL {
        return Err(Error::Domain(format!(
            "interval length {:.3e} exceeds {MAX_QUASI_INTERVAL}",
            b - a
        )));
    }
    if samples < 16 {
        return Err(Error::Domain(format!(
            "need at least 16 boundary samples, got {samples}"
        )));
    }
    let deriv_floor = (0..=200)
        .map(|k| spec.lift_deriv(a + (b - a) * k as f64 / 200.0))
        .fold(f64::INFINITY, f64::min);
    if deriv_floor <= 1e-6 {
        return Err(Error::Domain(format!(
            "map is not a diffeomorphism on the interval (min derivative {deriv_floor:.3e})"
        )));
    }
    let fa = spec.lift(a);
    let fb = spec.lift(b);
    let scale = (b - a) / (fb - fa);

    let mut excluded = 0usize;
    let mut min_angle = f64::INFINITY;
    let mut used = 0usize;
    for w in region.boundary_samples(samples) {
        let image = match spec.lift_complex(w) {
            Ok(z) => Complex64::new(a, 0.0) + (z - fa) * scale,
            Err(_) => {
                excluded += 1;
                continue;
            }
        };
        // Reality of the lift keeps the upper half-plane upper; a sample
        // collapsing onto the axis means precision is gone, not geometry.
        if image.im <= 0.0 {
            excluded += 1;
            continue;
        }
        min_angle = min_angle.min(visual_angle(interval, image)?);
        used += 1;
    }
    if excluded * 10 > samples {
        return Err(Error::TooFewSamples {
            got: used,
            need: samples - samples / 10,
            context: "pushed boundary samples excluded".into(),
        });
    }
    Ok(QuasiInvariance {
        theta,
        loss: theta - min_angle,
        min_image_angle: min_angle,
        excluded,
        used,
    })
}

/// Result of a cubic lower-growth measurement.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CubicGrowth {
    /// min |map(z)| / |z|^3 over retained samples: the growth constant.
    pub c_min: f64,
    pub c_max: f64,
    pub retained: usize,
    pub examined: usize,
}

/// Measure min |map(z)| / |z|^3 over random samples with inner < |z| <=
/// 2 * inner, retaining only samples the map keeps below `cap` in modulus
/// (and discarding samples where the map itself fails). Generic so the
/// measurement can be calibrated on known maps: z -> z^3 yields exactly 1.
pub fn cubic_growth_core<F>(
    map: F,
    inner: f64,
    cap: f64,
    samples: usize,
    seed: u64,
) -> Result<CubicGrowth>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    if !(inner > 0.0) || !(cap > 0.0) {
        return Err(Error::Domain(format!(
            "need positive inner radius and cap, got {inner}, {cap}"
        )));
    }
    if samples < MIN_RETAINED {
        return Err(Error::Domain(format!(
            "need at least {MIN_RETAINED} samples, got {samples}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c_min = f64::INFINITY;
    let mut c_max = 0.0f64;
    let mut retained = 0usize;
    for _ in 0..samples {
        // Uniform in area over the annulus inner < |z| <= 2 inner.
        let r2 = rng.gen_range(inner * inner..4.0 * inner * inner);
        let phi = rng.gen_range(0.0..2.0 * PI);
        let z = r2.sqrt() * Complex64::new(phi.cos(), phi.sin());
        let val = match map(z) {
            Ok(v) => v,
            Err(_) => continue,
        };
        if val.norm() >= cap {
            continue;
        }
        let ratio = val.norm() / z.norm().powi(3);
        c_min = c_min.min(ratio);
        c_max = c_max.max(ratio);
        retained += 1;
    }
    if retained < MIN_RETAINED {
        return Err(Error::TooFewSamples {
            got: retained,
            need: MIN_RETAINED,
            context: "cubic growth sampling".into(),
        });
    }
    Ok(CubicGrowth {
        c_min,
        c_max,
        retained,
        examined: samples,
    })
}

/// Cubic lower growth of the level-n renormalized return map around its
/// critical point at 0, in normalized coordinates.
pub fn cubic_growth_check(
    spec: &MapSpec,
    quotients: &[u32],
    level: usize,
    inner: f64,
    cap: f64,
    samples: usize,
    seed: u64,
) -> Result<CubicGrowth> {
    if !spec.verify_critical_cubic().passes() {
        return Err(Error::Domain(
            "cubic growth needs a map with a cubic critical point".into(),
        ));
    }
    let np = normalized_pair(spec, quotients, level)?;
    cubic_growth_core(|z| np.eta_hat_complex(z), inner, cap, samples, seed)
}

/// Linear bound fitted to the contraction of the return composition's
/// inverse branch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InverseBranchFit {
    /// Fitted slope: rescaled image distance per unit rescaled source
    /// distance.
    pub b1: f64,
    /// Fitted intercept.
    pub b2: f64,
    pub fit: FitResult,
    /// (distance from sample to the central interval, distance from its
    /// pullback to the image of the central interval), both rescaled.
    pub points: Vec<(f64, f64)>,
    pub survivors: usize,
    pub examined: usize,
}

/// How close (in lift coordinates) a shadow point must come to a critical
/// point before the single-step inversion switches from plain Newton to
/// the cube-root branch seed.
const NEAR_CRITICAL: f64 = 0.2;

/// Invert one lift step: solve lift(w) = target for the branch germinated
/// at the real anchor. Away from critical points plain Newton from the
/// anchor suffices; near one, the local cubic model picks the branch (the
/// principal cube root rotated onto the anchor's side), because the
/// preimage of a target at distance d from the critical value spreads to
/// distance ~ d^(1/3), far outside any Newton basin around the anchor.
fn invert_lift_step(spec: &MapSpec, anchor: f64, target: Complex64) -> Result<Complex64> {
    let crit = anchor.round();
    let clearance = (anchor - crit).abs();
    if clearance == 0.0 {
        return Err(Error::InverseBranch(
            "shadow sits on a critical point".into(),
        ));
    }
    let mut w = if clearance > NEAR_CRITICAL {
        Complex64::new(anchor, 0.0)
    } else {
        let c3 = spec.derivative(0.0, 3).expect("order 3 valid") / 6.0;
        let sigma = (anchor - crit).signum();
        let tau = sigma * (target - spec.lift(crit)) / c3;
        if tau.im == 0.0 && tau.re <= 0.0 {
            return Err(Error::InverseBranch(
                "target sits across the critical value on the real axis".into(),
            ));
        }
        crit + sigma * tau.powf(1.0 / 3.0)
    };
    let mut converged = false;
    for _ in 0..60 {
        let fw = spec.lift_complex(w)?;
        if (fw - target).norm() <= 1e-13 * (1.0 + target.norm()) {
            converged = true;
            break;
        }
        let dw = spec.lift_deriv_complex(w)?;
        if dw.norm() < 1e-14 {
            return Err(Error::InverseBranch(
                "derivative vanished during pullback".into(),
            ));
        }
        w -= (fw - target) / dw;
        // A full unit of drift means Newton hopped to another fundamental
        // domain: a different branch.
        if (w - anchor).norm() > 0.7 {
            return Err(Error::InverseBranch(
                "pullback escaped the branch's fundamental domain".into(),
            ));
        }
    }
    if !converged {
        let round_trip = (spec.lift_complex(w)? - target).norm();
        if round_trip > 1e-9 * (1.0 + target.norm()) {
            return Err(Error::InverseBranch(format!(
                "no convergence (residual {round_trip:.3e})"
            )));
        }
    }
    Ok(w)
}

/// Pull one point back along the inverse branch of the (steps)-fold lift
/// composition shadowing the given real orbit. shadow[j] is the real lift
/// position after j steps; z sits near shadow[steps] and the returned point
/// near shadow[1] (the branch never crosses the critical step 0 -> 1).
/// Each step works in the deck-translated chart centered at the shadow, so
/// precision does not degrade with the lift's winding.
fn pull_back_along_shadow(spec: &MapSpec, shadow: &[f64], mut z: Complex64) -> Result<Complex64> {
    for j in (2..shadow.len()).rev() {
        let deck = shadow[j].round();
        let w = invert_lift_step(spec, shadow[j - 1] - deck, z - deck)
            .map_err(|e| Error::InverseBranch(format!("step {j}: {e}")))?;
        z = w + deck;
    }
    Ok(z)
}

/// Sample points around the critical point at the scale of level
/// `level - back`, pull each back along the inverse branch of the
/// level-`level` return composition, and fit the rescaled image distance
/// against the rescaled source distance. The slope/intercept pair bounds
/// how the branch contracts complex neighborhoods of the central interval
/// onto neighborhoods of its image.
pub fn inverse_branch_contraction_fit(
    spec: &MapSpec,
    quotients: &[u32],
    level: usize,
    back: usize,
    samples: usize,
    seed: u64,
) -> Result<InverseBranchFit> {
    if !spec.verify_critical_cubic().passes() {
        return Err(Error::Domain(
            "inverse-branch contraction needs a cubic critical point".into(),
        ));
    }
    if back == 0 || back >= level {
        return Err(Error::Domain(format!(
            "need 0 < back < level, got back = {back}, level = {level}"
        )));
    }
    if samples < MIN_BRANCH_SURVIVORS * 2 {
        return Err(Error::Domain(format!(
            "need at least {} samples, got {samples}",
            MIN_BRANCH_SURVIVORS * 2
        )));
    }
    let rs = return_structure(spec, quotients, level)?;
    let conv = rs.convergents();
    let q_cur = conv.q[level] as usize;
    let q_next = conv.q[level + 1] as usize;
    let delta_cur = rs.delta(level)?;
    let delta_next = rs.delta(level + 1)?;

    // Real orbit shadow of the central interval's midpoint, in lift
    // coordinates.
    let mut shadow = Vec::with_capacity(q_next + 1);
    shadow.push(delta_cur / 2.0);
    for j in 0..q_next {
        shadow.push(spec.lift(shadow[j]));
    }
    let deck = shadow[q_next].round();

    // Sampling disk: the two-sided return interval of the coarser level
    // `level - back`, one endpoint forward (delta at m + 1), one backward.
    let m = level - back;
    let e1 = rs.delta(m + 1)?;
    let steps_back = (conv.q[m + 1] - conv.q[m]) as usize;
    let mut w = 0.0f64;
    for _ in 0..steps_back {
        w = spec.invert_lift(w);
    }
    let e2 = w - w.round();
    if e1 * e2 >= 0.0 {
        return Err(Error::Certification(format!(
            "sampling diameter endpoints {e1:.3e}, {e2:.3e} on the same side of the critical point"
        )));
    }
    let (lo, hi) = (e1.min(e2), e1.max(e2));
    let center = (lo + hi) / 2.0;
    let radius = (hi - lo) / 2.0;

    // Real anchors inside the image of the central interval's forward
    // endpoint arc keep the fit pinned near the origin.
    let r1 = delta_next;
    let r2 = {
        let end = rs.orbit()[q_cur + q_next];
        crate::circle::signed_offset(end, 0.0)
    };
    let (alo, ahi) = (r1.min(r2), r1.max(r2));
    let n_real = samples / 5;

    let i_lo = delta_cur.min(0.0);
    let i_hi = delta_cur.max(0.0);
    let f_lo = spec.lift(0.0).min(spec.lift(delta_cur));
    let f_hi = spec.lift(0.0).max(spec.lift(delta_cur));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut examined = 0usize;
    let push_sample = |z: Complex64, xs: &mut Vec<f64>, ys: &mut Vec<f64>| {
        if let Ok(back_pt) = pull_back_along_shadow(spec, &shadow, z + deck) {
            xs.push(dist_to_segment(z, i_lo, i_hi) / (i_hi - i_lo));
            ys.push(dist_to_segment(back_pt, f_lo, f_hi) / (f_hi - f_lo));
        }
    };
    for k in 0..n_real {
        let t = (k + 1) as f64 / (n_real + 1) as f64;
        let z = Complex64::new(alo + t * (ahi - alo), 0.0);
        examined += 1;
        push_sample(z, &mut xs, &mut ys);
    }
    for _ in n_real..samples {
        let r = radius * rng.gen::<f64>().sqrt();
        let phi = rng.gen_range(0.0..2.0 * PI);
        let z = Complex64::new(center + r * phi.cos(), r * phi.sin());
        if z.im.abs() < 1e-3 * radius {
            continue;
        }
        examined += 1;
        push_sample(z, &mut xs, &mut ys);
    }
    if xs.len() < MIN_BRANCH_SURVIVORS {
        return Err(Error::TooFewSamples {
            got: xs.len(),
            need: MIN_BRANCH_SURVIVORS,
            context: "inverse-branch pullbacks".into(),
        });
    }
    let fit = linear_fit(&xs, &ys)?;
    let survivors = xs.len();
    Ok(InverseBranchFit {
        b1: fit.slope,
        b2: fit.intercept,
        fit,
        points: xs.into_iter().zip(ys).collect(),
        survivors,
        examined,
    })
}

/// Lower bound for the modulus of an annulus from the separation between
/// its two boundary components and its outer diameter. Conservative on
/// round annuli by roughly a factor of two, and capped at 4 / pi / 4.
pub fn modulus_lower_bound(separation: f64, diameter: f64) -> Result<f64> {
    if !(separation > 0.0) || !(diameter > 0.0) {
        return Err(Error::Domain(format!(
            "separation and diameter must be positive, got {separation}, {diameter}"
        )));
    }
    if separation > diameter {
        return Err(Error::Domain(format!(
            "separation {separation} exceeds diameter {diameter}"
        )));
    }
    Ok(4.0 / PI * (separation / diameter).powi(2))
}
