//! Renormalization of commuting pairs around the critical point.
//!
//! At level n the pair of return maps (F^{q_{n+1}} - p_{n+1}, F^{q_n} - p_n)
//! acts on the two sides of the critical point c = 0. Rescaling by
//! Lambda(x) = delta_n x (an orientation flip when delta_n < 0) produces the
//! normalized pair
//!
//!   eta(x) on [0, 1]   with eta(0) = -s, and
//!   xi(x)  on [-s, 0]  with xi(0) = 1,
//!
//! where s = |delta_{n+1} / delta_n| is the scaling ratio. Renormalizing
//! again at level n + 1 gives the orbit of the pair under the
//! renormalization operator; distances between normalized pairs of different
//! maps contracting along levels is the numerical signature of renormalization
//! convergence.
//!
//! All return-map iteration keeps the working point in [-1/2, 1/2) with the
//! integer part carried separately: near the critical point the interesting
//! offsets are ~|delta_n|, and reducing symmetrically preserves their full
//! relative precision.

use crate::error::{Error, Result};
use crate::fit::{linear_fit, FitResult};
use crate::maps::MapSpec;
use crate::partition::{return_structure, ReturnStructure};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Commutation residual above this is a precision failure at construction.
const COMMUTATION_TOL: f64 = 1e-7;

/// Smallest admissible comparison grid.
pub const MIN_GRID: usize = 64;

/// Default comparison grid for pair distances.
pub const DEFAULT_GRID: usize = 256;

/// F^steps(u) as a lift value, with the integer part accumulated exactly and
/// the working point reduced to [-1/2, 1/2) every step.
fn iterate_lift(spec: &MapSpec, u: f64, steps: usize) -> f64 {
    let mut m: i64 = u.round() as i64;
    let mut y = u - m as f64;
    for _ in 0..steps {
        let fy = spec.lift(y);
        let k = fy.round();
        m += k as i64;
        y = fy - k;
    }
    m as f64 + y
}

/// Complex analogue of `iterate_lift`: the real part is reduced mod 1
/// symmetrically (the lift commutes with unit translation), the annulus
/// bound is enforced on every step.
fn iterate_lift_complex(spec: &MapSpec, z: Complex64, steps: usize) -> Result<Complex64> {
    Ok(iterate_lift_complex_with_deriv(spec, z, steps)?.0)
}

/// (F^steps(z), (F^steps)'(z)) by the chain rule along the reduced orbit;
/// the deck translations have derivative 1 and do not disturb the product.
fn iterate_lift_complex_with_deriv(
    spec: &MapSpec,
    z: Complex64,
    steps: usize,
) -> Result<(Complex64, Complex64)> {
    let mut m: i64 = z.re.round() as i64;
    let mut w = Complex64::new(z.re - m as f64, z.im);
    let mut deriv = Complex64::new(1.0, 0.0);
    for step in 0..steps {
        deriv *= spec.lift_deriv_complex(w)?;
        let fw = spec.lift_complex_at_step(w, step)?;
        let k = fw.re.round();
        m += k as i64;
        w = Complex64::new(fw.re - k, fw.im);
    }
    Ok((Complex64::new(m as f64 + w.re, w.im), deriv))
}

/// The level-n commuting pair of return maps, before rescaling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommutingPair {
    spec: MapSpec,
    level: usize,
    q_cur: usize,
    p_cur: i64,
    q_next: usize,
    p_next: i64,
    delta_cur: f64,
    delta_next: f64,
    /// Largest normalized commutation defect observed at construction.
    pub commutation_residual: f64,
}

/// Build the level-n commuting pair from a certified return structure and
/// verify that the two return maps commute numerically: both composition
/// orders realize F^{q_n + q_{n+1}} and may differ only by rounding, checked
/// at the critical point and eight interior samples of the short side.
pub fn commuting_pair(rs: &ReturnStructure) -> Result<CommutingPair> {
    let n = rs.level();
    let conv = rs.convergents();
    let spec = *rs.spec();
    let pair = CommutingPair {
        spec,
        level: n,
        q_cur: conv.q[n] as usize,
        p_cur: conv.p[n] as i64,
        q_next: conv.q[n + 1] as usize,
        p_next: conv.p[n + 1] as i64,
        delta_cur: rs.delta(n)?,
        delta_next: rs.delta(n + 1)?,
        commutation_residual: 0.0,
    };
    if pair.delta_cur == 0.0 || pair.delta_next == 0.0 {
        return Err(Error::Degenerate(format!(
            "vanishing closest-return offset at level {n}"
        )));
    }

    let scale = pair.delta_cur.abs();
    let mut residual = 0.0f64;
    for i in 0..=8 {
        // Samples span the xi side [delta_{n+1}, 0], c itself included.
        let u = pair.delta_next * (i as f64 / 8.0);
        let a = iterate_lift(&spec, iterate_lift(&spec, u, pair.q_cur), pair.q_next);
        let b = iterate_lift(&spec, iterate_lift(&spec, u, pair.q_next), pair.q_cur);
        residual = residual.max((a - b).abs() / scale);
    }
    if residual > COMMUTATION_TOL {
        return Err(Error::Precision(format!(
            "commutation residual {residual:.3e} at level {n} exceeds {COMMUTATION_TOL:.1e}"
        )));
    }
    Ok(CommutingPair {
        commutation_residual: residual,
        ..pair
    })
}

impl CommutingPair {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn spec(&self) -> &MapSpec {
        &self.spec
    }

    /// eta-tilde(u) = F^{q_{n+1}}(u) - p_{n+1} in lift coordinates.
    fn eta_raw(&self, u: f64) -> f64 {
        iterate_lift(&self.spec, u, self.q_next) - self.p_next as f64
    }

    /// xi-tilde(u) = F^{q_n}(u) - p_n in lift coordinates.
    fn xi_raw(&self, u: f64) -> f64 {
        iterate_lift(&self.spec, u, self.q_cur) - self.p_cur as f64
    }
}

/// The rescaled pair: eta on [0, 1], xi on [-s, 0].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalizedPair {
    pair: CommutingPair,
    s: f64,
}

/// Rescale a commuting pair by Lambda(x) = delta_n x.
pub fn renormalize(pair: &CommutingPair) -> NormalizedPair {
    let s = (pair.delta_next / pair.delta_cur).abs();
    NormalizedPair {
        pair: pair.clone(),
        s,
    }
}

/// Domain slack for normalized evaluations: points this far outside are
/// still accepted (endpoint rounding), anything worse is a domain error.
const DOMAIN_SLACK: f64 = 1e-9;

impl NormalizedPair {
    /// Scaling ratio s = |delta_{n+1} / delta_n|.
    pub fn ratio(&self) -> f64 {
        self.s
    }

    pub fn level(&self) -> usize {
        self.pair.level
    }

    pub fn spec(&self) -> &MapSpec {
        &self.pair.spec
    }

    pub fn commutation_residual(&self) -> f64 {
        self.pair.commutation_residual
    }

    /// -1 when the rescaling Lambda reverses orientation (delta_n < 0).
    pub fn parity(&self) -> i32 {
        if self.pair.delta_cur < 0.0 {
            -1
        } else {
            1
        }
    }

    /// eta(x) = eta-tilde(delta_n x) / delta_n on [0, 1]; eta(0) = -s.
    pub fn eta_hat(&self, x: f64) -> Result<f64> {
        if !(-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&x) {
            return Err(Error::Domain(format!(
                "eta domain is [0, 1], got {x}"
            )));
        }
        let d = self.pair.delta_cur;
        Ok(self.pair.eta_raw(d * x) / d)
    }

    /// xi(x) = xi-tilde(delta_n x) / delta_n on [-s, 0]; xi(0) = 1.
    pub fn xi_hat(&self, x: f64) -> Result<f64> {
        if !(-self.s - DOMAIN_SLACK..=DOMAIN_SLACK).contains(&x) {
            return Err(Error::Domain(format!(
                "xi domain is [-{}, 0], got {x}",
                self.s
            )));
        }
        let d = self.pair.delta_cur;
        Ok(self.pair.xi_raw(d * x) / d)
    }

    /// Complex continuation of eta across the rescaled annulus.
    pub fn eta_hat_complex(&self, z: Complex64) -> Result<Complex64> {
        let d = self.pair.delta_cur;
        let w = iterate_lift_complex(&self.pair.spec, d * z, self.pair.q_next)?;
        Ok((w - self.pair.p_next as f64) / d)
    }

    /// Complex continuation of xi.
    pub fn xi_hat_complex(&self, z: Complex64) -> Result<Complex64> {
        let d = self.pair.delta_cur;
        let w = iterate_lift_complex(&self.pair.spec, d * z, self.pair.q_cur)?;
        Ok((w - self.pair.p_cur as f64) / d)
    }

    /// eta'(z), exact chain product (the rescaling factors cancel).
    pub fn eta_hat_deriv_complex(&self, z: Complex64) -> Result<Complex64> {
        let d = self.pair.delta_cur;
        Ok(iterate_lift_complex_with_deriv(&self.pair.spec, d * z, self.pair.q_next)?.1)
    }

    /// xi'(z), exact chain product.
    pub fn xi_hat_deriv_complex(&self, z: Complex64) -> Result<Complex64> {
        let d = self.pair.delta_cur;
        Ok(iterate_lift_complex_with_deriv(&self.pair.spec, d * z, self.pair.q_cur)?.1)
    }
}

/// C0 distance between two normalized pairs:
/// |s_p - s_q| + max over [0, 1] of |eta_p - eta_q|
///             + max over [-min(s_p, s_q), 0] of |xi_p - xi_q|,
/// each sup over `grid` + 1 equally spaced points.
pub fn pair_distance(p: &NormalizedPair, q: &NormalizedPair, grid: usize) -> Result<f64> {
    if grid < MIN_GRID {
        return Err(Error::Domain(format!(
            "comparison grid must have at least {MIN_GRID} points, got {grid}"
        )));
    }
    let mut d = (p.ratio() - q.ratio()).abs();
    let mut eta_sup = 0.0f64;
    for i in 0..=grid {
        let x = i as f64 / grid as f64;
        eta_sup = eta_sup.max((p.eta_hat(x)? - q.eta_hat(x)?).abs());
    }
    let s = p.ratio().min(q.ratio());
    let mut xi_sup = 0.0f64;
    for i in 0..=grid {
        let x = -s * (i as f64 / grid as f64);
        xi_sup = xi_sup.max((p.xi_hat(x)? - q.xi_hat(x)?).abs());
    }
    d += eta_sup + xi_sup;
    Ok(d)
}

/// Normalized pair of `spec` at one level, straight from the certified
/// return structure.
pub fn normalized_pair(spec: &MapSpec, quotients: &[u32], level: usize) -> Result<NormalizedPair> {
    let rs = return_structure(spec, quotients, level)?;
    Ok(renormalize(&commuting_pair(&rs)?))
}

/// Distances d_n between the renormalizations of two maps over a level
/// range, with the geometric decay fit log d_n ~ slope * n + intercept.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceData {
    /// (level, d_n) for the usable levels.
    pub distances: Vec<(usize, f64)>,
    /// Levels dropped because d_n was exactly zero.
    pub excluded: Vec<usize>,
    pub fit: FitResult,
}

/// Measure renormalization convergence between two maps of the same
/// combinatorial class. Both maps must pass the critical-cubic gate: the
/// theory concerns maps with a genuine cubic critical point, and a rigid
/// rotation sneaking in here would "converge" for the wrong reason.
pub fn convergence_rate(
    f: &MapSpec,
    g: &MapSpec,
    quotients: &[u32],
    n_lo: usize,
    n_hi: usize,
    grid: usize,
) -> Result<ConvergenceData> {
    if f == g {
        return Err(Error::Degenerate(
            "identical maps: all renormalization distances vanish".into(),
        ));
    }
    for (name, spec) in [("first", f), ("second", g)] {
        let report = spec.verify_critical_cubic();
        if !report.passes() {
            return Err(Error::Domain(format!(
                "{name} map fails the critical-cubic gate: {report:?}"
            )));
        }
    }
    if n_lo > n_hi {
        return Err(Error::Domain(format!("empty level range {n_lo}..={n_hi}")));
    }
    let mut distances = Vec::new();
    let mut excluded = Vec::new();
    for n in n_lo..=n_hi {
        let np_f = normalized_pair(f, quotients, n)?;
        let np_g = normalized_pair(g, quotients, n)?;
        let d = pair_distance(&np_f, &np_g, grid)?;
        if d == 0.0 {
            excluded.push(n);
        } else {
            distances.push((n, d));
        }
    }
    let xs: Vec<f64> = distances.iter().map(|&(n, _)| n as f64).collect();
    let ys: Vec<f64> = distances.iter().map(|&(_, d)| d.ln()).collect();
    let fit = linear_fit(&xs, &ys).map_err(|e| match e {
        Error::TooFewSamples { got, need, .. } => Error::TooFewSamples {
            got,
            need,
            context: "usable renormalization levels".into(),
        },
        other => other,
    })?;
    Ok(ConvergenceData {
        distances,
        excluded,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotation::{golden_quotients, tune_parameter};

    const GOLDEN: f64 = 0.618033988749894848;

    fn golden_rotation_pair(level: usize) -> NormalizedPair {
        let spec = MapSpec::rigid_rotation(GOLDEN).unwrap();
        normalized_pair(&spec, &golden_quotients(14), level).unwrap()
    }

    /// Oracle: for the rigid golden rotation every level renormalizes to the
    /// same affine pair eta(x) = x - gamma, xi(x) = x + 1, s = gamma.
    #[test]
    fn golden_rotation_renormalizes_to_affine_fixed_point() {
        for level in [4, 7] {
            let np = golden_rotation_pair(level);
            assert!((np.ratio() - GOLDEN).abs() < 1e-10, "s at level {level}");
            for i in 0..=32 {
                let x = i as f64 / 32.0;
                let eta = np.eta_hat(x).unwrap();
                assert!(
                    (eta - (x - GOLDEN)).abs() < 1e-9,
                    "eta({x}) = {eta} at level {level}"
                );
                let y = -np.ratio() * (i as f64 / 32.0);
                let xi = np.xi_hat(y).unwrap();
                assert!(
                    (xi - (y + 1.0)).abs() < 1e-9,
                    "xi({y}) = {xi} at level {level}"
                );
            }
        }
    }

    #[test]
    fn boundary_values_are_exact() {
        let np = golden_rotation_pair(6);
        assert!((np.eta_hat(0.0).unwrap() + np.ratio()).abs() < 1e-13);
        assert!((np.xi_hat(0.0).unwrap() - 1.0).abs() < 1e-13);
        // Both maps agree at the far ends: eta(1) = xi(-s) is the image of
        // the full return F^{q_n + q_{n+1}}.
        let t0 = np.eta_hat(1.0).unwrap();
        let t1 = np.xi_hat(-np.ratio()).unwrap();
        assert!((t0 - t1).abs() < 1e-12, "{t0} vs {t1}");
    }

    /// eta(1) must equal the affinely rescaled stored orbit point: the
    /// composite return F^{q_n + q_{n+1}}(0) read off the certified orbit
    /// table, not recomputed through the pair.
    #[test]
    fn compositional_exactness_against_orbit_table() {
        let spec = MapSpec::rigid_rotation(GOLDEN).unwrap();
        let quotients = golden_quotients(14);
        for level in [3, 6, 9] {
            let rs = return_structure(&spec, &quotients, level).unwrap();
            let conv = rs.convergents();
            let qn = conv.q[level] as usize;
            let qn1 = conv.q[level + 1] as usize;
            let pn = conv.p[level] as f64;
            let pn1 = conv.p[level + 1] as f64;
            // Independent pass: unreduced lift value of x_{q_n + q_{n+1}}.
            let mut u = 0.0f64;
            for _ in 0..qn + qn1 {
                u = spec.lift(u);
            }
            let expected = (u - pn - pn1) / rs.delta(level).unwrap();
            let np = renormalize(&commuting_pair(&rs).unwrap());
            let got = np.eta_hat(1.0).unwrap();
            assert!(
                (got - expected).abs() < 1e-9,
                "level {level}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn parity_alternates_with_level() {
        let a = golden_rotation_pair(5);
        let b = golden_rotation_pair(6);
        assert_eq!(a.parity() * b.parity(), -1);
    }

    #[test]
    fn rigid_fixed_point_distance_is_zero_across_two_levels() {
        // Per-step rounding accumulates like q_{n+1} * eps / |delta_n|, so
        // the cleanest comparison uses moderate levels.
        let a = golden_rotation_pair(5);
        let b = golden_rotation_pair(7);
        let d = pair_distance(&a, &b, DEFAULT_GRID).unwrap();
        assert!(d <= 1e-12, "d = {d:.3e}");
    }

    #[test]
    fn commutation_residual_is_tiny_for_healthy_pairs() {
        let np = golden_rotation_pair(8);
        assert!(np.commutation_residual() < 1e-10);
        let tuned =
            tune_parameter(&MapSpec::arnold(0.0).unwrap(), &golden_quotients(10), 1e-12).unwrap();
        let rs = return_structure(&tuned.spec, &golden_quotients(10), 7).unwrap();
        let pair = commuting_pair(&rs).unwrap();
        assert!(pair.commutation_residual < 1e-8, "{}", pair.commutation_residual);
    }

    #[test]
    fn domain_violations_rejected() {
        let np = golden_rotation_pair(5);
        assert!(np.eta_hat(1.5).is_err());
        assert!(np.eta_hat(-0.2).is_err());
        assert!(np.xi_hat(0.3).is_err());
        assert!(np.xi_hat(-np.ratio() - 0.1).is_err());
        let other = golden_rotation_pair(6);
        assert!(pair_distance(&np, &other, 32).is_err());
    }

    #[test]
    fn convergence_gates() {
        let quotients = golden_quotients(9);
        let arnold = MapSpec::arnold(0.6066).unwrap();
        // Identical maps are rejected outright.
        let err = convergence_rate(&arnold, &arnold, &quotients, 3, 8, 64).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)), "{err:?}");
        // A rigid rotation is not in the critical class.
        let rot = MapSpec::rigid_rotation(GOLDEN).unwrap();
        let err = convergence_rate(&arnold, &rot, &quotients, 3, 8, 64).unwrap_err();
        assert!(matches!(err, Error::Domain(_)), "{err:?}");
    }

    #[test]
    fn tuned_critical_maps_contract_along_levels() {
        // Tune well past the deepest renormalization level: a tuned map is
        // mode-locked at p_d/q_d exactly, and within ~2 levels of the tuning
        // depth the rational endgame distorts the return geometry.
        let quotients = golden_quotients(12);
        let f = tune_parameter(&MapSpec::arnold(0.0).unwrap(), &quotients, 1e-12)
            .unwrap()
            .spec;
        let g = tune_parameter(
            &MapSpec::perturbed_arnold(0.0, 0.03).unwrap(),
            &quotients,
            1e-12,
        )
        .unwrap()
        .spec;
        let data = convergence_rate(&f, &g, &quotients, 3, 8, 64).unwrap();
        assert_eq!(data.distances.len(), 6);
        // The approach to the fixed point oscillates with parity at early
        // levels, so the robust contraction statement is along level pairs:
        // d_{n+2} < d_n for every n.
        for w in data.distances.windows(3).step_by(1) {
            assert!(
                w[2].1 < w[0].1,
                "d_{} = {} did not drop below d_{} = {}",
                w[2].0,
                w[2].1,
                w[0].0,
                w[0].1
            );
        }
        assert!(data.fit.slope < 0.0, "slope {}", data.fit.slope);
        // Doubling the grid barely moves a healthy distance.
        let a = normalized_pair(&f, &quotients, 6).unwrap();
        let b = normalized_pair(&g, &quotients, 6).unwrap();
        let d1 = pair_distance(&a, &b, 256).unwrap();
        let d2 = pair_distance(&a, &b, 512).unwrap();
        assert!((d1 - d2).abs() / d1 < 0.05, "{d1} vs {d2}");
    }

    #[test]
    fn complex_evaluation_matches_real_on_axis() {
        let np = golden_rotation_pair(6);
        for i in 1..8 {
            let x = i as f64 / 8.0;
            let z = Complex64::new(x, 0.0);
            let w = np.eta_hat_complex(z).unwrap();
            assert!((w.re - np.eta_hat(x).unwrap()).abs() < 1e-12);
            assert!(w.im.abs() < 1e-14);
        }
        // Schwarz reflection: conjugate inputs map to conjugate outputs.
        let z = Complex64::new(0.4, 0.2);
        let w = np.eta_hat_complex(z).unwrap();
        let wc = np.eta_hat_complex(z.conj()).unwrap();
        assert!((w - wc.conj()).norm() < 1e-12);
    }

    /// Oracle: chain-rule derivatives against central differences.
    #[test]
    fn complex_derivatives_match_finite_differences() {
        let quotients = [1u32; 12];
        let template = MapSpec::arnold(0.5).unwrap();
        let spec = tune_parameter(&template, &quotients, 1e-9).unwrap().spec;
        let np = normalized_pair(&spec, &quotients, 5).unwrap();
        let h = 1e-6;
        for z in [
            Complex64::new(0.35, 0.15),
            Complex64::new(0.8, -0.3),
            Complex64::new(-0.2, 0.4),
        ] {
            let exact = np.eta_hat_deriv_complex(z).unwrap();
            let fd = (np.eta_hat_complex(z + h).unwrap() - np.eta_hat_complex(z - h).unwrap())
                / (2.0 * h);
            assert!(
                (exact - fd).norm() < 1e-4 * (1.0 + exact.norm()),
                "eta' at {z}: {exact} vs {fd}"
            );
            let exact = np.xi_hat_deriv_complex(z).unwrap();
            let fd = (np.xi_hat_complex(z + h).unwrap() - np.xi_hat_complex(z - h).unwrap())
                / (2.0 * h);
            assert!(
                (exact - fd).norm() < 1e-4 * (1.0 + exact.norm()),
                "xi' at {z}: {exact} vs {fd}"
            );
        }
    }
}
