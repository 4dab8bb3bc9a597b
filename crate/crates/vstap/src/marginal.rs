//! Empirical marginal distributions and the piecewise-linear approximation
//! of the Gaussian-to-target marginal transform.

use crate::error::{Error, Result};
use crate::gauss;
use serde::{Deserialize, Serialize};

/// A continuous marginal distribution represented by its sorted sample.
///
/// Quantiles interpolate linearly between order statistics placed at the
/// plotting positions (i - 0.5)/n and clamp at the sample extremes; the CDF
/// is the inverse of that curve, with tied values receiving their averaged
/// rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMarginal {
    values: Vec<f64>,
    mean: f64,
    sd: f64,
}

impl EmpiricalMarginal {
    /// Builds a marginal from a sample in any order.
    pub fn new(sample: &[f64]) -> Result<Self> {
        if sample.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "marginal needs at least 2 observations, got {}",
                sample.len()
            )));
        }
        if let Some(bad) = sample.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "marginal sample contains non-finite value {bad}"
            )));
        }
        let mut values = sample.to_vec();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Ok(Self {
            values,
            mean,
            sd: var.sqrt(),
        })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Sorted sample values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Standard deviation with divisor n, matching the lagged-correlation
    /// estimator so that solved and target correlations share one scale.
    pub fn sd(&self) -> f64 {
        self.sd
    }

    /// Plotting-position CDF, strictly inside (0, 1).
    ///
    /// Sample points map to (rank - 0.5)/n with ties averaged; other points
    /// interpolate linearly, and points beyond the extremes clamp to the
    /// first/last plotting position.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::InvalidInput(format!("cdf of non-finite value {x}")));
        }
        let n = self.values.len();
        let nf = n as f64;
        let lt = self.values.partition_point(|v| *v < x);
        let le = self.values.partition_point(|v| *v <= x);
        if le > lt {
            // x is a sample value; averaged 1-based rank of the tie group
            let rank = lt as f64 + (le - lt + 1) as f64 / 2.0;
            return Ok((rank - 0.5) / nf);
        }
        if lt == 0 {
            return Ok(0.5 / nf);
        }
        if lt == n {
            return Ok((nf - 0.5) / nf);
        }
        let (v0, v1) = (self.values[lt - 1], self.values[lt]);
        let p0 = (lt as f64 - 0.5) / nf;
        Ok(p0 + (x - v0) / (v1 - v0) / nf)
    }

    /// Plotting-position quantile with linear interpolation, clamped to the
    /// sample range. `p` must lie strictly inside (0, 1).
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidInput(format!(
                "quantile level {p} outside (0, 1)"
            )));
        }
        let n = self.values.len();
        let pos = p * n as f64 - 0.5;
        if pos <= 0.0 {
            return Ok(self.values[0]);
        }
        if pos >= (n - 1) as f64 {
            return Ok(self.values[n - 1]);
        }
        let lo = pos.floor() as usize;
        let frac = pos - lo as f64;
        Ok(self.values[lo] * (1.0 - frac) + self.values[lo + 1] * frac)
    }

    /// Normal scores of the sorted sample: z_(i) = Phi^-1((rank_i - 0.5)/n)
    /// with tie groups sharing their averaged rank.
    pub fn normal_scores(&self) -> Vec<f64> {
        let n = self.values.len();
        let nf = n as f64;
        let mut z = vec![0.0; n];
        let mut i = 0;
        while i < n {
            let mut j = i + 1;
            while j < n && self.values[j] == self.values[i] {
                j += 1;
            }
            // averaged 1-based rank of the group [i, j)
            let rank = (i + 1 + j) as f64 / 2.0;
            let zi = gauss::inv_cdf((rank - 0.5) / nf);
            z[i..j].iter_mut().for_each(|v| *v = zi);
            i = j;
        }
        z
    }

    /// Maps arbitrary points through the plotting-position CDF onto the
    /// Gaussian axis. For the marginal's own sample this yields its normal
    /// scores in the given order.
    pub fn normal_scores_of(&self, x: &[f64]) -> Result<Vec<f64>> {
        x.iter()
            .map(|&v| Ok(gauss::inv_cdf(self.cdf(v)?)))
            .collect()
    }

    /// Fits the piecewise-linear Gaussian-to-target transform with m
    /// equiprobable segments.
    ///
    /// Each segment gets an independent least-squares line through the
    /// (normal score, value) pairs falling in it; negative slopes collapse
    /// to a constant at the segment mean. Empty segments (possible under
    /// heavy ties) anchor at the segment's central quantile.
    pub fn fit_piecewise(&self, m: usize) -> Result<PiecewiseTransform> {
        if m < 2 {
            return Err(Error::InvalidInput(format!("segment count {m} < 2")));
        }
        let n = self.values.len();
        if n < 2 * m {
            return Err(Error::InsufficientData(format!(
                "need at least {} observations for {m} segments, got {n}",
                2 * m
            )));
        }
        let breakpoints = standard_breakpoints(m);
        let z = self.normal_scores();
        let mut intercepts = vec![0.0; m];
        let mut slopes = vec![0.0; m];
        let mut start = 0usize;
        for k in 0..m {
            // z is non-decreasing; segment k covers z in (a_{k-1}, a_k]
            let mut end = start;
            if k + 1 == m {
                end = n;
            } else {
                let hi = breakpoints[k];
                while end < n && z[end] <= hi {
                    end += 1;
                }
            }
            if end == start {
                intercepts[k] = self.quantile((k as f64 + 0.5) / m as f64)?;
                slopes[k] = 0.0;
                continue;
            }
            let (zz, xx) = (&z[start..end], &self.values[start..end]);
            let cnt = (end - start) as f64;
            let zbar = zz.iter().sum::<f64>() / cnt;
            let xbar = xx.iter().sum::<f64>() / cnt;
            let den: f64 = zz.iter().map(|v| (v - zbar) * (v - zbar)).sum();
            if den <= 0.0 {
                intercepts[k] = xbar;
            } else {
                let num: f64 = zz
                    .iter()
                    .zip(xx)
                    .map(|(zv, xv)| (zv - zbar) * (xv - xbar))
                    .sum();
                let b = num / den;
                if b < 0.0 {
                    intercepts[k] = xbar;
                } else {
                    slopes[k] = b;
                    intercepts[k] = xbar - b * zbar;
                }
            }
            start = end;
        }
        PiecewiseTransform::from_parts(breakpoints, intercepts, slopes)
    }
}

/// Breakpoints Phi^-1(k/m), k = 1..m-1, dividing the Gaussian axis into m
/// equiprobable segments.
pub fn standard_breakpoints(m: usize) -> Vec<f64> {
    (1..m).map(|k| gauss::inv_cdf(k as f64 / m as f64)).collect()
}

/// Monotone piecewise-linear map from the standard Gaussian axis to a target
/// marginal: x = c_{k0} + c_{k1} z on segment k, with the outermost segments
/// extending to +-infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseTransform {
    breakpoints: Vec<f64>,
    intercepts: Vec<f64>,
    slopes: Vec<f64>,
}

impl PiecewiseTransform {
    /// Assembles a transform from raw parts, validating the invariants:
    /// strictly increasing finite breakpoints, non-negative slopes, and one
    /// more segment than breakpoints.
    pub fn from_parts(
        breakpoints: Vec<f64>,
        intercepts: Vec<f64>,
        slopes: Vec<f64>,
    ) -> Result<Self> {
        if intercepts.len() != slopes.len() || intercepts.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidInput(format!(
                "inconsistent piecewise sizes: {} breakpoints, {} intercepts, {} slopes",
                breakpoints.len(),
                intercepts.len(),
                slopes.len()
            )));
        }
        if intercepts.is_empty() {
            return Err(Error::InvalidInput("transform needs at least one segment".into()));
        }
        if breakpoints.iter().any(|b| !b.is_finite())
            || breakpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidInput(
                "breakpoints must be finite and strictly increasing".into(),
            ));
        }
        if slopes.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidInput("slopes must be non-negative".into()));
        }
        if intercepts.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("intercepts must be finite".into()));
        }
        Ok(Self {
            breakpoints,
            intercepts,
            slopes,
        })
    }

    pub fn segment_count(&self) -> usize {
        self.intercepts.len()
    }

    /// Inner breakpoints a_1 < ... < a_{m-1}.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Index of the segment containing z (segment k is (a_{k-1}, a_k]).
    pub fn segment_of(&self, z: f64) -> usize {
        self.breakpoints.partition_point(|a| *a < z)
    }

    /// Evaluates the transform at z.
    pub fn apply(&self, z: f64) -> f64 {
        let k = self.segment_of(z);
        self.intercepts[k] + self.slopes[k] * z
    }

    /// The identity map on every segment of the standard equiprobable grid;
    /// useful as the Gaussian-marginal reference transform.
    pub fn identity(m: usize) -> Result<Self> {
        Self::from_parts(standard_breakpoints(m), vec![0.0; m], vec![1.0; m])
    }
}

/// Ordinal (first-occurrence) 1-based ranks; deterministic under ties.
pub fn ordinal_ranks(x: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap().then(a.cmp(&b)));
    let mut ranks = vec![0usize; x.len()];
    for (r, &i) in idx.iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

/// Reorders the target's sorted values so the output's ranks equal
/// `source_ranks` (a 1-based permutation). The output is exactly a
/// permutation of the target sample.
pub fn rank_remap(source_ranks: &[usize], target: &EmpiricalMarginal) -> Result<Vec<f64>> {
    let n = target.n();
    if source_ranks.len() != n {
        return Err(Error::InvalidInput(format!(
            "rank vector length {} does not match target sample size {n}",
            source_ranks.len()
        )));
    }
    let mut seen = vec![false; n];
    for &r in source_ranks {
        if r < 1 || r > n || seen[r - 1] {
            return Err(Error::InvalidInput(format!(
                "source_ranks is not a permutation of 1..={n} (offending rank {r})"
            )));
        }
        seen[r - 1] = true;
    }
    Ok(source_ranks.iter().map(|&r| target.values()[r - 1]).collect())
}
