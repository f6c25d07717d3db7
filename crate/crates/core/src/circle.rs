//! Circle (R/Z) and cylinder arithmetic shared by the dynamical modules.
//!
//! Orbit geometry lives on the unit circle; renormalization work happens in
//! lift coordinates near the critical point. The helpers here keep the two
//! views consistent: `frac`/`signed_offset` for positions, `Arc` for
//! positively-oriented circular intervals, `cyl_dist` for the cylinder metric
//! induced by the covering C -> C/Z.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Fractional part in [0, 1).
pub fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    // x slightly below an integer can round to 1.0.
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Distance on R/Z: length of the shorter arc between a and b.
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = frac(a - b);
    d.min(1.0 - d)
}

/// Representative of x - base in (-1/2, 1/2].
pub fn signed_offset(x: f64, base: f64) -> f64 {
    let d = frac(x - base);
    if d > 0.5 {
        d - 1.0
    } else {
        d
    }
}

/// Distance on the cylinder C/Z: min over integer shifts of |z - w + k|.
pub fn cyl_dist(z: Complex64, w: Complex64) -> f64 {
    let dx = signed_offset(z.re, w.re);
    let dy = z.im - w.im;
    (dx * dx + dy * dy).sqrt()
}

/// Positively-oriented closed arc on R/Z: starts at `start`, runs
/// counterclockwise for `len`. Endpoints carry orientation, so an arc and its
/// complement are distinct objects with the same endpoint set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    start: f64,
    len: f64,
}

impl Arc {
    /// Arc running positively from a to b (length frac(b - a)).
    pub fn from_endpoints(a: f64, b: f64) -> Arc {
        Arc {
            start: frac(a),
            len: frac(b - a),
        }
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        frac(self.start + self.len)
    }

    pub fn len(&self) -> f64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0.0
    }

    pub fn midpoint(&self) -> f64 {
        frac(self.start + 0.5 * self.len)
    }

    /// Offset of p from the arc's start, unrolled to [-tol-ish, 1): values
    /// just below the start (mod 1) come back slightly negative so endpoint
    /// tolerance behaves symmetrically.
    fn unrolled(&self, p: f64, tol: f64) -> f64 {
        let t = frac(p - self.start);
        if t > 1.0 - tol {
            t - 1.0
        } else {
            t
        }
    }

    pub fn contains(&self, p: f64, tol: f64) -> bool {
        let t = self.unrolled(p, tol);
        t >= -tol && t <= self.len + tol
    }

    /// Whole-arc containment with endpoint tolerance.
    pub fn contains_arc(&self, other: &Arc, tol: f64) -> bool {
        let t = self.unrolled(other.start, tol);
        t >= -tol && t + other.len <= self.len + tol
    }

    /// Interior overlap (beyond endpoint tolerance) with another arc.
    pub fn overlaps_interior(&self, other: &Arc, tol: f64) -> bool {
        // Compare in the unrolled coordinate anchored at self.start.
        let t = self.unrolled(other.start, tol);
        let (lo, hi) = (t, t + other.len);
        lo < self.len - tol && hi > tol
    }
}
