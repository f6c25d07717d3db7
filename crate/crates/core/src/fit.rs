use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Least-squares line through (x_i, y_i), the common currency for every
/// "slope of log-quantity vs level" measurement in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n_points: usize,
}

/// Minimum number of points for any fit reported by the crate.
pub const MIN_FIT_POINTS: usize = 4;

/// Ordinary least squares of y on x. Requires at least [`MIN_FIT_POINTS`]
/// points and a non-degenerate x spread.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    if xs.len() != ys.len() {
        return Err(Error::Domain(format!(
            "mismatched fit inputs: {} xs vs {} ys",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len();
    if n < MIN_FIT_POINTS {
        return Err(Error::TooFewSamples {
            got: n,
            need: MIN_FIT_POINTS,
            context: "linear fit".into(),
        });
    }
    if xs.iter().any(|v| !v.is_finite()) || ys.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite value in fit input".into()));
    }

    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::Degenerate("all fit abscissae identical".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    // Constant data is fit exactly by the horizontal line.
    let r2 = if syy == 0.0 {
        1.0
    } else {
        let ss_res = syy - slope * sxy;
        1.0 - ss_res / syy
    };
    Ok(FitResult {
        slope,
        intercept,
        r2,
        n_points: n,
    })
}
