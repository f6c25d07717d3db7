//! Rigidity observables: orbit-matched conjugacies and their distortion.
//!
//! Two maps tuned to the same irrational rotation number are conjugate, and
//! the conjugacy h sending one critical orbit to the other is pinned down on
//! finitely many points by h(f^i(c_f)) = g^i(c_g). Everything here works
//! with that finite pairing directly: quasisymmetric distortion is measured
//! on near-symmetric triples snapped to orbit points, and the smoothness of
//! h at the critical point is observed through convergence of the ratios of
//! corresponding closest-return intervals. No interpolation of h is ever
//! performed; interpolating would inject smoothness the data does not have.

use crate::circle::{circle_dist, signed_offset};
use crate::error::{Error, Result};
use crate::fit::{linear_fit, FitResult};
use crate::maps::MapSpec;
use crate::partition::return_structure;
use serde::{Deserialize, Serialize};

/// Finest precision at which ratio differences are still meaningful.
const RATIO_FLOOR: f64 = 1e-13;

/// Relative tolerance when snapping a symmetric triple arm to an orbit
/// point; coarser matches are rejected.
const SNAP_REL: f64 = 0.1;

/// The finite conjugacy between two critical orbits with the same
/// combinatorics: pairs (x_i, y_i) = (f^i(c), g^i(c)) sorted by the circle
/// order of the x side, certified to preserve cyclic order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitConjugacy {
    pairs: Vec<(f64, f64)>,
    level: usize,
}

impl OrbitConjugacy {
    /// Pairs (x, h(x)) in circle order, starting at (0, 0).
    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn level(&self) -> usize {
        self.level
    }
}

/// Match the critical orbits of f and g through level n: both maps must be
/// tuned to the rotation number of `quotients` (their closest returns are
/// re-certified here), and the pairing by iterate index must preserve
/// cyclic order, which is exactly combinatorial equivalence of the orbits.
pub fn orbit_conjugacy(
    f: &MapSpec,
    g: &MapSpec,
    quotients: &[u32],
    n: usize,
) -> Result<OrbitConjugacy> {
    let rf = return_structure(f, quotients, n)?;
    let rg = return_structure(g, quotients, n)?;
    let count = rf.orbit().len() - 1;

    let mut pairs: Vec<(f64, f64)> = rf
        .orbit()
        .iter()
        .take(count)
        .copied()
        .zip(rg.orbit().iter().take(count).copied())
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Both orbits start at the critical point 0, the minimum of either
    // coordinate in [0, 1), so cyclic order is preserved iff the y side is
    // strictly increasing after the sort by x.
    for w in pairs.windows(2) {
        if w[1].1 <= w[0].1 {
            return Err(Error::Certification(format!(
                "orbit pairing reverses cyclic order between x = {:.6} and x = {:.6}",
                w[0].0, w[1].0
            )));
        }
    }
    Ok(OrbitConjugacy { pairs, level: n })
}

/// Quasisymmetric distortion of the finite conjugacy over `scales` dyadic
/// scales t = 2^-2, ..., 2^-(scales+1): the worst ratio of the h-image
/// lengths of the two arms of a symmetric triple (x - t, x, x + t), with
/// each arm snapped to the nearest orbit point and the measured ratio
/// normalized by the realized arm ratio on the source side. The
/// normalization cancels the snapping asymmetry, so the identity pairing
/// scores exactly 1; scales with no admissible triple are skipped.
pub fn qs_distortion(oc: &OrbitConjugacy, scales: usize) -> Result<f64> {
    if oc.pairs.len() < 100 {
        return Err(Error::TooFewSamples {
            got: oc.pairs.len(),
            need: 100,
            context: "symmetric-triple distortion".into(),
        });
    }
    // Sorted x with paired images; binary search snaps a target to the
    // circle-nearest orbit point.
    let xs: Vec<f64> = oc.pairs.iter().map(|p| p.0).collect();
    let snap = |target: f64| -> usize {
        let t = target.rem_euclid(1.0);
        let k = xs.partition_point(|&v| v < t);
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for idx in [k % xs.len(), (k + xs.len() - 1) % xs.len()] {
            let d = circle_dist(xs[idx], t);
            if d < best_d {
                best_d = d;
                best = idx;
            }
        }
        best
    };

    let mut worst = 1.0f64;
    for j in 0..scales {
        let t = 0.25 * 0.5f64.powi(j as i32);
        let mut found = false;
        for (i, &(x, hx)) in oc.pairs.iter().enumerate() {
            let up = snap(x + t);
            let dn = snap(x - t);
            if up == i || dn == i || up == dn {
                continue;
            }
            let (xu, hu) = oc.pairs[up];
            let (xd, hd) = oc.pairs[dn];
            let tu = signed_offset(xu, x);
            let td = -signed_offset(xd, x);
            if (tu - t).abs() > SNAP_REL * t || (td - t).abs() > SNAP_REL * t {
                continue;
            }
            let hu_len = signed_offset(hu, hx);
            let hd_len = -signed_offset(hd, hx);
            if hu_len <= 0.0 || hd_len <= 0.0 {
                continue;
            }
            found = true;
            // Ratio of image arms over ratio of realized source arms.
            let r = (hu_len / hd_len) / (tu / td);
            worst = worst.max(r.max(1.0 / r));
        }
        let _ = found;
    }
    Ok(worst)
}

/// Closest-return interval ratios s_k = |I_{k+1}| / |I_k| for k <= n_hi.
/// For the rigid rotation of continued-fraction angle these equal the
/// Gauss-map tail values exactly; for critical maps they settle toward a
/// combinatorics-dependent limit as renormalization converges.
pub fn scaling_ratios(f: &MapSpec, quotients: &[u32], n_hi: usize) -> Result<Vec<f64>> {
    let rs = return_structure(f, quotients, n_hi)?;
    (0..=n_hi).map(|k| rs.scaling_ratio(k)).collect()
}

/// Fit the decay of |rho_n - rho_{n+1}| where rho_n = |I_n(g)| / |I_n(f)|
/// is the ratio of corresponding closest-return intervals. If the
/// conjugacy is differentiable at the critical point with Holder
/// derivative, rho_n converges geometrically and the fitted slope of
/// log-differences against n is negative; the slope is the desk-scale
/// rigidity exponent. Levels whose difference sits below the precision
/// floor are excluded.
pub fn rigidity_fit(
    f: &MapSpec,
    g: &MapSpec,
    quotients: &[u32],
    n_lo: usize,
    n_hi: usize,
) -> Result<FitResult> {
    if n_hi < n_lo + 4 {
        return Err(Error::Domain(format!(
            "rigidity fit needs n_hi >= n_lo + 4, got [{n_lo}, {n_hi}]"
        )));
    }
    let rf = return_structure(f, quotients, n_hi + 1)?;
    let rg = return_structure(g, quotients, n_hi + 1)?;
    let rho = |k: usize| -> Result<f64> {
        let df = rf.delta(k)?.abs();
        let dg = rg.delta(k)?.abs();
        if df == 0.0 {
            return Err(Error::Degenerate(format!("interval I_{k} of f vanishes")));
        }
        Ok(dg / df)
    };
    let mut ns = Vec::new();
    let mut logs = Vec::new();
    for n in n_lo..=n_hi {
        let d = (rho(n)? - rho(n + 1)?).abs();
        if d > RATIO_FLOOR {
            ns.push(n as f64);
            logs.push(d.ln());
        }
    }
    if ns.len() < 4 {
        return Err(Error::TooFewSamples {
            got: ns.len(),
            need: 4,
            context: "ratio differences above the precision floor \
                      (identical maps difference out exactly)"
                .into(),
        });
    }
    linear_fit(&ns, &logs)
}
