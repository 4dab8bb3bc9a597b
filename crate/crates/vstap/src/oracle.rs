//! Monte Carlo cross-checks for the closed-form bivariate quantities.
//!
//! These estimators share nothing with the quadrature kernels: they draw
//! correlated Gaussian pairs directly and tabulate sample statistics, so
//! agreement within a few standard errors is independent evidence of
//! correctness.

use crate::bvn::Rect;
use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

impl McEstimate {
    /// Absolute distance to a reference in units of standard error.
    pub fn sigmas_from(&self, reference: f64) -> f64 {
        if self.std_error > 0.0 {
            (self.value - reference).abs() / self.std_error
        } else if self.value == reference {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

fn check_mc_inputs(rho: f64, samples: usize) -> Result<()> {
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidInput(format!(
            "correlation {rho} must lie strictly inside (-1, 1)"
        )));
    }
    if samples < 2 {
        return Err(Error::InsufficientData(format!(
            "Monte Carlo needs at least 2 samples, got {samples}"
        )));
    }
    Ok(())
}

/// Monte Carlo correlation of (f1(Z1), f2(Z2)) for a standard bivariate
/// normal pair with correlation rho.
///
/// Streaming accumulation; the standard error uses the asymptotic
/// (1 - r^2) / sqrt(n) approximation for a correlation estimate.
pub fn mc_transformed_corr<F1, F2, R>(
    f1: F1,
    f2: F2,
    rho: f64,
    samples: usize,
    rng: &mut R,
) -> Result<McEstimate>
where
    F1: Fn(f64) -> f64,
    F2: Fn(f64) -> f64,
    R: Rng + ?Sized,
{
    check_mc_inputs(rho, samples)?;
    let root = (1.0 - rho * rho).sqrt();
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..samples {
        let g1: f64 = rng.sample(StandardNormal);
        let g2: f64 = rng.sample(StandardNormal);
        let z2 = rho * g1 + root * g2;
        let x = f1(g1);
        let y = f2(z2);
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    let n = samples as f64;
    let vx = sxx / n - (sx / n) * (sx / n);
    let vy = syy / n - (sy / n) * (sy / n);
    if vx <= 0.0 || vy <= 0.0 {
        return Err(Error::DegenerateInput(
            "transformed sample is constant; correlation undefined".into(),
        ));
    }
    let cov = sxy / n - (sx / n) * (sy / n);
    let r = (cov / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0);
    Ok(McEstimate {
        value: r,
        std_error: (1.0 - r * r) / n.sqrt(),
    })
}

/// Monte Carlo estimates of a rectangle's mass and conditional moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McTruncatedMoments {
    /// Draws that landed in the rectangle.
    pub accepted: usize,
    pub prob: McEstimate,
    pub mean_x: McEstimate,
    pub mean_y: McEstimate,
    pub cross: McEstimate,
}

/// Rejection-samples the rectangle and tabulates conditional moments with
/// standard errors. Fails if fewer than `min_accepted` draws land inside.
pub fn mc_trunc_moments<R: Rng + ?Sized>(
    rect: &Rect,
    rho: f64,
    samples: usize,
    min_accepted: usize,
    rng: &mut R,
) -> Result<McTruncatedMoments> {
    check_mc_inputs(rho, samples)?;
    let root = (1.0 - rho * rho).sqrt();
    let (x_lo, x_hi) = rect.x_bounds();
    let (y_lo, y_hi) = rect.y_bounds();
    let mut accepted = 0usize;
    let (mut sx, mut sxx) = (0.0, 0.0);
    let (mut sy, mut syy) = (0.0, 0.0);
    let (mut sc, mut scc) = (0.0, 0.0);
    for _ in 0..samples {
        let g1: f64 = rng.sample(StandardNormal);
        let g2: f64 = rng.sample(StandardNormal);
        let z2 = rho * g1 + root * g2;
        if g1 > x_lo && g1 <= x_hi && z2 > y_lo && z2 <= y_hi {
            accepted += 1;
            sx += g1;
            sxx += g1 * g1;
            sy += z2;
            syy += z2 * z2;
            let c = g1 * z2;
            sc += c;
            scc += c * c;
        }
    }
    if accepted < min_accepted.max(2) {
        return Err(Error::InsufficientAcceptance {
            accepted,
            required: min_accepted.max(2),
        });
    }
    let n = samples as f64;
    let a = accepted as f64;
    let p = a / n;
    let moment = |s: f64, ss: f64| -> McEstimate {
        let mean = s / a;
        let var = (ss / a - mean * mean).max(0.0);
        McEstimate {
            value: mean,
            std_error: (var / a).sqrt(),
        }
    };
    Ok(McTruncatedMoments {
        accepted,
        prob: McEstimate {
            value: p,
            std_error: (p * (1.0 - p) / n).sqrt(),
        },
        mean_x: moment(sx, sxx),
        mean_y: moment(sy, syy),
        cross: moment(sc, scc),
    })
}
