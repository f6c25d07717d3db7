//! Real-analytic circle map families and their lifts.
//!
//! Everything downstream works through `MapSpec`: a family tag plus its
//! parameters. Lifts are degree-one real-analytic maps F: R -> R with
//! F(x + 1) = F(x) + 1; the Arnold-type families have a single cubic critical
//! point at x = 0 on the circle. Complex evaluation is restricted to the
//! annulus |Im z| < `ANNULUS_HALF_HEIGHT`, the common analyticity strip all
//! families share by construction.

use crate::circle::frac;
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Half-height of the analyticity annulus used for all complex evaluation.
pub const ANNULUS_HALF_HEIGHT: f64 = 1.0;

/// Largest admissible |b| for the perturbed family.
pub const MAX_PERTURBATION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapFamily {
    /// F(x) = x + theta. No critical point; the comparison baseline.
    RigidRotation,
    /// F(x) = x + theta - sin(2 pi x) / (2 pi). Cubic critical point at 0.
    Arnold,
    /// Arnold plus b sin^3(2 pi x). Keeps the cubic point at 0; F' factors
    /// as sin^2(pi x) (2 + 24 pi b cos^2(pi x) cos(2 pi x)).
    PerturbedArnold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    family: MapFamily,
    theta: f64,
    b: f64,
}

/// Point on the cylinder C/Z: x is the circle coordinate in [0, 1), y the
/// height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderPoint {
    pub x: f64,
    pub y: f64,
}

impl CylinderPoint {
    pub fn new(x: f64, y: f64) -> CylinderPoint {
        CylinderPoint { x: frac(x), y }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }

    pub fn from_complex(z: Complex64) -> CylinderPoint {
        CylinderPoint::new(z.re, z.im)
    }
}

impl MapSpec {
    pub fn rigid_rotation(theta: f64) -> Result<MapSpec> {
        MapSpec::validate(MapFamily::RigidRotation, theta, 0.0)
    }

    pub fn arnold(theta: f64) -> Result<MapSpec> {
        MapSpec::validate(MapFamily::Arnold, theta, 0.0)
    }

    pub fn perturbed_arnold(theta: f64, b: f64) -> Result<MapSpec> {
        MapSpec::validate(MapFamily::PerturbedArnold, theta, b)
    }

    pub fn new(family: MapFamily, theta: f64, b: f64) -> Result<MapSpec> {
        MapSpec::validate(family, theta, b)
    }

    fn validate(family: MapFamily, theta: f64, b: f64) -> Result<MapSpec> {
        if !theta.is_finite() || !(0.0..1.0).contains(&theta) {
            return Err(Error::InvalidSpec(format!(
                "theta must lie in [0, 1), got {theta}"
            )));
        }
        if !b.is_finite() {
            return Err(Error::InvalidSpec("perturbation must be finite".into()));
        }
        if family != MapFamily::PerturbedArnold && b != 0.0 {
            return Err(Error::InvalidSpec(
                "perturbation parameter only applies to the perturbed family".into(),
            ));
        }
        if b.abs() > MAX_PERTURBATION {
            return Err(Error::InvalidSpec(format!(
                "|b| = {} exceeds the admissible bound {}",
                b.abs(),
                MAX_PERTURBATION
            )));
        }
        Ok(MapSpec { family, theta, b })
    }

    pub fn family(&self) -> MapFamily {
        self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn perturbation(&self) -> f64 {
        self.b
    }

    /// Same family and b, different theta. Used by the tuner.
    pub fn with_theta(&self, theta: f64) -> Result<MapSpec> {
        MapSpec::validate(self.family, theta, self.b)
    }

    /// Whether the family has the cubic critical point at x = 0.
    pub fn has_cubic_point(&self) -> bool {
        self.family != MapFamily::RigidRotation
    }

    /// Lift F(x).
    pub fn lift(&self, x: f64) -> f64 {
        match self.family {
            MapFamily::RigidRotation => x + self.theta,
            MapFamily::Arnold => x + self.theta - (2.0 * PI * x).sin() / (2.0 * PI),
            MapFamily::PerturbedArnold => {
                let s = (2.0 * PI * x).sin();
                x + self.theta - s / (2.0 * PI) + self.b * s * s * s
            }
        }
    }

    /// F'(x), analytic.
    pub fn lift_deriv(&self, x: f64) -> f64 {
        match self.family {
            MapFamily::RigidRotation => 1.0,
            MapFamily::Arnold => 1.0 - (2.0 * PI * x).cos(),
            MapFamily::PerturbedArnold => {
                let u = 2.0 * PI * x;
                1.0 - u.cos() + 6.0 * PI * self.b * u.sin() * u.sin() * u.cos()
            }
        }
    }

    /// Closed-form derivative of the lift, orders 1 through 3.
    pub fn derivative(&self, x: f64, order: u8) -> Result<f64> {
        let u = 2.0 * PI * x;
        let (s, c) = u.sin_cos();
        let b = self.b;
        match (self.family, order) {
            (_, 0) | (_, 4..) => Err(Error::Domain(format!(
                "derivative order must be 1, 2, or 3, got {order}"
            ))),
            (MapFamily::RigidRotation, 1) => Ok(1.0),
            (MapFamily::RigidRotation, _) => Ok(0.0),
            (MapFamily::Arnold, 1) => Ok(1.0 - c),
            (MapFamily::Arnold, 2) => Ok(2.0 * PI * s),
            (MapFamily::Arnold, 3) => Ok(4.0 * PI * PI * c),
            (MapFamily::PerturbedArnold, 1) => Ok(1.0 - c + 6.0 * PI * b * s * s * c),
            (MapFamily::PerturbedArnold, 2) => {
                Ok(2.0 * PI * s + 12.0 * PI * PI * b * s * (2.0 * c * c - s * s))
            }
            (MapFamily::PerturbedArnold, 3) => Ok(4.0 * PI * PI * c
                + 24.0 * PI.powi(3) * b * c * (2.0 * c * c - 7.0 * s * s)),
        }
    }

    /// Complex lift on the annulus |Im z| < ANNULUS_HALF_HEIGHT (unreduced).
    pub fn lift_complex(&self, z: Complex64) -> Result<Complex64> {
        self.lift_complex_at_step(z, 0)
    }

    /// Same as `lift_complex`, reporting the orbit step in the escape error.
    pub fn lift_complex_at_step(&self, z: Complex64, step: usize) -> Result<Complex64> {
        if z.im.abs() >= ANNULUS_HALF_HEIGHT {
            return Err(Error::AnnulusEscape { step, im: z.im });
        }
        Ok(match self.family {
            MapFamily::RigidRotation => z + self.theta,
            MapFamily::Arnold => z + self.theta - (2.0 * PI * z).sin() / (2.0 * PI),
            MapFamily::PerturbedArnold => {
                let s = (2.0 * PI * z).sin();
                z + self.theta - s / (2.0 * PI) + self.b * s * s * s
            }
        })
    }

    /// Complex derivative F'(z) on the annulus.
    pub fn lift_deriv_complex(&self, z: Complex64) -> Result<Complex64> {
        if z.im.abs() >= ANNULUS_HALF_HEIGHT {
            return Err(Error::AnnulusEscape { step: 0, im: z.im });
        }
        Ok(match self.family {
            MapFamily::RigidRotation => Complex64::new(1.0, 0.0),
            MapFamily::Arnold => 1.0 - (2.0 * PI * z).cos(),
            MapFamily::PerturbedArnold => {
                let u = 2.0 * PI * z;
                1.0 - u.cos() + 6.0 * PI * self.b * u.sin() * u.sin() * u.cos()
            }
        })
    }

    /// Map on the cylinder: evaluate the lift and reduce the real part.
    pub fn eval_complex(&self, p: CylinderPoint) -> Result<CylinderPoint> {
        let w = self.lift_complex(p.to_complex())?;
        Ok(CylinderPoint::from_complex(w))
    }

    /// One application on the circle.
    pub fn eval_circle(&self, x: f64) -> f64 {
        frac(self.lift(frac(x)))
    }

    /// Bounds on the displacement F(x) - x; used to bracket the real inverse.
    fn displacement_bounds(&self) -> (f64, f64) {
        match self.family {
            MapFamily::RigidRotation => (self.theta, self.theta),
            MapFamily::Arnold => (self.theta - 0.5 / PI, self.theta + 0.5 / PI),
            MapFamily::PerturbedArnold => (
                self.theta - 0.5 / PI - self.b.abs(),
                self.theta + 0.5 / PI + self.b.abs(),
            ),
        }
    }

    /// Real inverse of the lift: the unique x with F(x) = y. Bisection on the
    /// monotone lift, polished by Newton where the derivative is healthy.
    pub fn invert_lift(&self, y: f64) -> f64 {
        let (dmin, dmax) = self.displacement_bounds();
        let mut lo = y - dmax - 1e-9;
        let mut hi = y - dmin + 1e-9;
        for _ in 0..90 {
            let mid = 0.5 * (lo + hi);
            if self.lift(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..3 {
            let d = self.lift_deriv(x);
            if d > 1e-9 {
                let step = (self.lift(x) - y) / d;
                let xn = x - step;
                if xn >= lo - 1e-12 && xn <= hi + 1e-12 {
                    x = xn;
                }
            }
        }
        x
    }

    /// Criticality and monotonicity report: derivative values at 0 come from
    /// the closed forms, monotonicity from a uniform grid of at least 10^4
    /// points. A cubic point demands F'(0) and F''(0) vanish to 1e-12 while
    /// F'''(0) stays strictly positive.
    pub fn verify_critical_cubic(&self) -> CriticalCubicReport {
        let d1 = self.derivative(0.0, 1).expect("order 1 valid");
        let d2 = self.derivative(0.0, 2).expect("order 2 valid");
        let d3 = self.derivative(0.0, 3).expect("order 3 valid");

        let n = 10_000;
        let mut min_derivative = f64::INFINITY;
        for i in 0..n {
            let x = i as f64 / n as f64;
            min_derivative = min_derivative.min(self.lift_deriv(x));
        }
        let monotone = min_derivative >= -1e-12;
        let cubic_at_zero = d1.abs() <= 1e-12 && d2.abs() <= 1e-12 && d3 > 0.0;
        CriticalCubicReport {
            cubic_at_zero,
            monotone,
            d1,
            d2,
            d3,
            min_derivative,
        }
    }
}

/// Output of `verify_critical_cubic`. `passes` is the gate used by the
/// renormalization convergence experiment: a monotone lift with an honest
/// cubic point at zero.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CriticalCubicReport {
    pub cubic_at_zero: bool,
    pub monotone: bool,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub min_derivative: f64,
}

impl CriticalCubicReport {
    pub fn passes(&self) -> bool {
        self.cubic_at_zero && self.monotone
    }
}
