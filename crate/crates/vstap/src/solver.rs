//! Inversion of the transformed-pair correlation: given a target correlation
//! for two transformed variables, find the Gaussian correlation that the
//! transform pair maps onto it.

use crate::bvn;
use crate::error::{Error, Result};
use crate::marginal::{EmpiricalMarginal, PiecewiseTransform};

/// Largest Gaussian correlation magnitude the solver will return; keeps the
/// orthant kernel away from its singular limit.
pub const RHO_CAP: f64 = 0.99999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Residual below tolerance.
    Converged,
    /// Iteration budget exhausted; `solution` is the best iterate seen.
    MaxIterations,
    /// Target lies outside what the transform pair can reach; `solution`
    /// saturates at the nearer correlation cap.
    Infeasible,
}

/// Outcome of one correlation inversion.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolveReport {
    pub solution: f64,
    pub iterations: usize,
    pub used_binary_search: bool,
    /// Signed residual: achieved minus target correlation.
    pub residual: f64,
    pub status: SolveStatus,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Residual tolerance on the transformed-correlation scale.
    pub eps: f64,
    pub max_iter: usize,
    /// Initial iterate; defaults to the target itself.
    pub start: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            max_iter: 200,
            start: None,
        }
    }
}

/// Solves psi(r) = target for the Gaussian correlation r, where psi is the
/// correlation of the transformed pair.
///
/// Fixed-point iteration r <- r + (target - psi(r)) converges whenever the
/// transform attenuates correlation (0 < psi' <= 1, the case for monotone
/// transforms). Near the correlation caps a one-time monotonicity probe
/// guards against numerical non-monotonicity and falls back to bisection
/// when a bracketing sign change exists.
pub fn solve_gaussian_corr(
    t1: &PiecewiseTransform,
    t2: &PiecewiseTransform,
    target: f64,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    if !target.is_finite() || target.abs() > 1.0 {
        return Err(Error::InvalidInput(format!(
            "target correlation {target} outside [-1, 1]"
        )));
    }
    let psi = |r: f64| bvn::psi_eval(t1, t2, r);
    let lo_val = psi(-RHO_CAP)?;
    let hi_val = psi(RHO_CAP)?;
    if target > hi_val + opts.eps {
        return Ok(SolveReport {
            solution: RHO_CAP,
            iterations: 0,
            used_binary_search: false,
            residual: hi_val - target,
            status: SolveStatus::Infeasible,
        });
    }
    if target < lo_val - opts.eps {
        return Ok(SolveReport {
            solution: -RHO_CAP,
            iterations: 0,
            used_binary_search: false,
            residual: lo_val - target,
            status: SolveStatus::Infeasible,
        });
    }

    let mut r = opts.start.unwrap_or(target).clamp(-RHO_CAP, RHO_CAP);
    let mut best = (f64::INFINITY, r);
    let mut probed_monotone = false;
    let mut iterations = 0usize;
    while iterations < opts.max_iter {
        iterations += 1;
        let p = psi(r)?;
        let resid = p - target;
        if resid.abs() < best.0 {
            best = (resid.abs(), r);
        }
        if resid.abs() < opts.eps {
            return Ok(SolveReport {
                solution: r,
                iterations,
                used_binary_search: false,
                residual: resid,
                status: SolveStatus::Converged,
            });
        }
        let r_next = (r + (target - p)).clamp(-RHO_CAP, RHO_CAP);
        if r_next.abs() > 0.9 && !probed_monotone {
            probed_monotone = true;
            let d = 1e-3;
            let up = psi((r_next + d).min(RHO_CAP))?;
            let dn = psi((r_next - d).max(-RHO_CAP))?;
            if up < dn {
                // psi is locally decreasing; fixed-point steps are unsafe,
                // bisect between moderate and extreme correlation instead
                let s = if r_next < 0.0 { -1.0 } else { 1.0 };
                let (mut a, mut b) = (0.9 * s, s * RHO_CAP);
                let fa = psi(a)? - target;
                let fb = psi(b)? - target;
                if fa * fb <= 0.0 {
                    let mut flo = fa;
                    while iterations < opts.max_iter {
                        iterations += 1;
                        let mid = 0.5 * (a + b);
                        let fm = psi(mid)? - target;
                        if fm.abs() < best.0 {
                            best = (fm.abs(), mid);
                        }
                        if fm.abs() < opts.eps || (b - a).abs() < 1e-6 {
                            let status = if fm.abs() < opts.eps {
                                SolveStatus::Converged
                            } else {
                                SolveStatus::MaxIterations
                            };
                            return Ok(SolveReport {
                                solution: mid,
                                iterations,
                                used_binary_search: true,
                                residual: fm,
                                status,
                            });
                        }
                        if flo * fm <= 0.0 {
                            b = mid;
                        } else {
                            a = mid;
                            flo = fm;
                        }
                    }
                    let p_best = psi(best.1)? - target;
                    return Ok(SolveReport {
                        solution: best.1,
                        iterations,
                        used_binary_search: true,
                        residual: p_best,
                        status: SolveStatus::MaxIterations,
                    });
                }
                // no bracketing sign change; resume fixed-point iteration
            }
        }
        r = r_next;
    }
    let residual = psi(best.1)? - target;
    Ok(SolveReport {
        solution: best.1,
        iterations,
        used_binary_search: false,
        residual,
        status: SolveStatus::MaxIterations,
    })
}

/// Pearson correlation with mean-centered sums; scale-divisor free.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "correlation needs at least 2 points, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite value in correlation input".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (xv, yv) in x.iter().zip(y) {
        let (dx, dy) = (xv - mx, yv - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::DegenerateInput(
            "constant series has no defined correlation".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Range of correlations attainable between two given marginals: the Pearson
/// correlation of the comonotone coupling (both sorted ascending) and of the
/// antimonotone coupling (one reversed). Requires equal sample sizes.
pub fn feasible_bounds(
    mi: &EmpiricalMarginal,
    mj: &EmpiricalMarginal,
) -> Result<(f64, f64)> {
    if mi.n() != mj.n() {
        return Err(Error::InvalidInput(format!(
            "marginal sample sizes differ: {} vs {}",
            mi.n(),
            mj.n()
        )));
    }
    let upper = pearson(mi.values(), mj.values())?;
    let reversed: Vec<f64> = mj.values().iter().rev().copied().collect();
    let lower = pearson(mi.values(), &reversed)?;
    Ok((lower, upper))
}
