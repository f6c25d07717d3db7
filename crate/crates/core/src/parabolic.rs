//! Almost parabolic interval maps and their passage geometry.
//!
//! phi_eps(x) = x + eps + x^2 on J = [-1/2, 1/2] drifts slowly through the
//! bottleneck at 0: the fundamental domain Delta = [x_0, phi(x_0)] with
//! x_0 = -1/2 tiles [x_0, x_a] by its forward images, where a is the passage
//! time (~ pi / sqrt(eps)). Everything downstream is phrased in normalized
//! coordinates sending [x_0, x_a] to [0, 1].
//!
//! The tile lengths obey the bottleneck law |phi^j(Delta)| ~ C / m(j)^2 with
//! m(j) = min(j + 1, a - j); `yoccoz_profile` measures the optimal C. The
//! complex extension has the exact fixed-point pair z = +-i sqrt(eps), whose
//! height ties the passage time to the residue: a * Im z_+ ~ pi.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Admissible drift range; outside it the passage is either too long to
/// resolve or not parabolic-like at all.
pub const EPS_RANGE: (f64, f64) = (1e-5, 1e-2);

/// Iteration cap for complex escape times.
pub const ESCAPE_CAP: usize = 10_000;

/// Half-width of the target neighborhood of [0, 1], normalized coordinates.
pub const TARGET_PAD: f64 = 0.15;

/// The working complex domain: the closed upper half-disk of this radius
/// (original coordinates) around 0.
pub const DOMAIN_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlmostParabolic {
    eps: f64,
    /// Orbit x_0 = -1/2, x_{j+1} = phi(x_j), up to x_a (inclusive).
    orbit: Vec<f64>,
    /// Passage time: the largest j with phi^{j-1}(Delta) inside J.
    a: usize,
    /// Floor of the two end-tile lengths, normalized: the membership
    /// constant of the bounded-geometry family this map belongs to.
    sigma: f64,
}

/// Build the almost parabolic map for a drift in `EPS_RANGE`.
pub fn make_almost_parabolic(eps: f64) -> Result<AlmostParabolic> {
    if !(EPS_RANGE.0..=EPS_RANGE.1).contains(&eps) {
        return Err(Error::Domain(format!(
            "eps = {eps:.3e} outside admissible range [{:.0e}, {:.0e}]",
            EPS_RANGE.0, EPS_RANGE.1
        )));
    }
    let phi = |x: f64| x + eps + x * x;
    let mut orbit = vec![-0.5f64];
    loop {
        let x = *orbit.last().unwrap();
        let next = phi(x);
        if next > 0.5 {
            break;
        }
        orbit.push(next);
        if orbit.len() > 200_000 {
            return Err(Error::NoConvergence {
                steps: orbit.len(),
                width: 0.5 - next,
            });
        }
    }
    // orbit = [x_0, ..., x_a]; tiles [x_j, x_{j+1}] for j < a all sit in J.
    let a = orbit.len() - 1;
    if a < 2 {
        return Err(Error::Degenerate(format!(
            "passage time {a} too short at eps = {eps:.3e}"
        )));
    }
    let span = orbit[a] - orbit[0];
    let first = (orbit[1] - orbit[0]) / span;
    let last = (orbit[a] - orbit[a - 1]) / span;
    Ok(AlmostParabolic {
        eps,
        orbit,
        a,
        sigma: first.min(last),
    })
}

impl AlmostParabolic {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Passage time a: the number of fundamental-domain tiles.
    pub fn passage_time(&self) -> usize {
        self.a
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// phi in original coordinates.
    pub fn phi(&self, x: f64) -> f64 {
        x + self.eps + x * x
    }

    pub fn phi_complex(&self, z: Complex64) -> Complex64 {
        z + self.eps + z * z
    }

    /// Tiled interval [x_0, x_a] in original coordinates.
    pub fn span(&self) -> (f64, f64) {
        (self.orbit[0], self.orbit[self.a])
    }

    /// Orbit points x_0..=x_a (tile endpoints), original coordinates.
    pub fn orbit(&self) -> &[f64] {
        &self.orbit
    }

    /// Affine chart sending [x_0, x_a] to [0, 1].
    pub fn normalize(&self, x: f64) -> f64 {
        let (lo, hi) = self.span();
        (x - lo) / (hi - lo)
    }

    pub fn denormalize(&self, t: f64) -> f64 {
        let (lo, hi) = self.span();
        lo + t * (hi - lo)
    }

    pub fn normalize_complex(&self, z: Complex64) -> Complex64 {
        let (lo, hi) = self.span();
        (z - lo) / (hi - lo)
    }

    pub fn denormalize_complex(&self, z: Complex64) -> Complex64 {
        let (lo, hi) = self.span();
        z * (hi - lo) + lo
    }

    /// Fundamental domain Delta = [x_0, x_1], normalized.
    pub fn fundamental_domain(&self) -> (f64, f64) {
        (0.0, self.normalize(self.orbit[1]))
    }
}

/// One tile of the passage profile.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProfileRow {
    pub j: usize,
    /// Normalized tile length |phi^j(Delta)| / |[x_0, x_a]|.
    pub length: f64,
    /// Bottleneck depth m(j) = min(j + 1, a - j).
    pub m: usize,
    /// length * m(j)^2; the bottleneck law says this is ~ constant.
    pub product: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct YoccozProfile {
    pub rows: Vec<ProfileRow>,
    /// Smallest C with length * m^2 in [1/C, C] for every tile.
    pub c_fit: f64,
}

/// Measure the bottleneck law over all tiles.
pub fn yoccoz_profile(ap: &AlmostParabolic) -> YoccozProfile {
    let a = ap.a;
    let span = ap.orbit[a] - ap.orbit[0];
    let mut rows = Vec::with_capacity(a);
    let mut c_fit = 1.0f64;
    for j in 0..a {
        let length = (ap.orbit[j + 1] - ap.orbit[j]) / span;
        let m = (j + 1).min(a - j);
        let product = length * (m * m) as f64;
        c_fit = c_fit.max(product).max(1.0 / product);
        rows.push(ProfileRow {
            j,
            length,
            m,
            product,
        });
    }
    YoccozProfile { rows, c_fit }
}

/// The complex fixed-point pair of phi_eps.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FixedPoints {
    /// z_+ = i sqrt(eps), original coordinates.
    pub z_plus: Complex64,
    pub z_minus: Complex64,
    pub z_plus_normalized: Complex64,
    /// max |phi(z) - z| over the pair.
    pub residual: f64,
    /// a * Im z_+; the passage-time/residue relation makes this ~ pi.
    pub check: f64,
    /// |phi'(z_+)| = sqrt(1 + 4 eps) > 1: the pair is not attracting, the
    /// passage is slow because the multiplier is on the unit-circle scale.
    pub multiplier_modulus: f64,
}

pub fn complex_fixed_points(ap: &AlmostParabolic) -> FixedPoints {
    let r = ap.eps.sqrt();
    let z_plus = Complex64::new(0.0, r);
    let z_minus = Complex64::new(0.0, -r);
    let residual = (ap.phi_complex(z_plus) - z_plus)
        .norm()
        .max((ap.phi_complex(z_minus) - z_minus).norm());
    let multiplier = Complex64::new(1.0, 2.0 * r);
    FixedPoints {
        z_plus,
        z_minus,
        z_plus_normalized: ap.normalize_complex(z_plus),
        residual,
        check: ap.a as f64 * r,
        multiplier_modulus: multiplier.norm(),
    }
}

/// Distance from z to the segment [0, 1] on the real axis.
fn dist_to_unit_segment(z: Complex64) -> f64 {
    let x = z.re.clamp(0.0, 1.0);
    (z - Complex64::new(x, 0.0)).norm()
}

/// Iterate the complex extension from a normalized starting point in the
/// upper half-disk until the orbit enters the `pad`-neighborhood of the
/// normalized segment [0, 1] (`None` selects `TARGET_PAD`). Returns the
/// entry step, or `Ok(None)` when `ESCAPE_CAP` steps pass without entry
/// (the point is stuck spiraling near the fixed-point pair; that regime
/// needs pad below the fixed-point height sqrt(eps)). The target test runs
/// before the domain test, so orbits that exit along the real axis count
/// as arrivals; leaving the half-disk anywhere else is a `LeftDomain`
/// error.
pub fn escape_time(
    ap: &AlmostParabolic,
    z_normalized: Complex64,
    pad: Option<f64>,
) -> Result<Option<usize>> {
    let pad = pad.unwrap_or(TARGET_PAD);
    if !(pad > 0.0 && pad <= 0.5) {
        return Err(Error::Domain(format!(
            "target pad must lie in (0, 1/2], got {pad}"
        )));
    }
    let mut z = ap.denormalize_complex(z_normalized);
    if z.im <= 0.0 {
        return Err(Error::Domain(format!(
            "need a starting point in the open upper half-plane, got Im = {}",
            z.im
        )));
    }
    if z.norm() > DOMAIN_RADIUS {
        return Err(Error::Domain(format!(
            "starting point |z| = {:.3} outside the working half-disk",
            z.norm()
        )));
    }
    for step in 0..=ESCAPE_CAP {
        if dist_to_unit_segment(ap.normalize_complex(z)) < pad {
            return Ok(Some(step));
        }
        if z.norm() > DOMAIN_RADIUS {
            return Err(Error::LeftDomain { step });
        }
        z = ap.phi_complex(z);
    }
    Ok(None)
}
