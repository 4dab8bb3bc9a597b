//! Lagged auto- and cross-correlation sets: estimation from multichannel
//! series, assembly into the stacked correlation matrix, and repair of
//! indefinite sets onto the positive-definite cone.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Eigenvalue floor used when projecting an indefinite correlation matrix.
pub const DEFAULT_EIG_FLOOR: f64 = 1e-6;
/// Default bound on repair rounds.
pub const DEFAULT_MAX_REPAIR_ROUNDS: usize = 50;

/// Correlations r(i, j, tau) = Corr(X_{i,t}, X_{j,t-tau}) for channels
/// i, j < K and lags 0 <= tau <= P.
///
/// Invariants: r(i, i, 0) = 1 and the lag-0 block is symmetric; `set`
/// maintains both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaggedCorrelationSet {
    k: usize,
    p: usize,
    data: Vec<f64>,
}

/// Outcome of a positive-definiteness repair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepairReport {
    /// Rounds applied; 0 means the input was already acceptable.
    pub rounds: usize,
    /// Smallest eigenvalue of the final assembled matrix.
    pub min_eigenvalue: f64,
}

impl LaggedCorrelationSet {
    /// All-zero correlations except the unit diagonal at lag 0.
    pub fn new_zero(k: usize, p: usize) -> Self {
        let mut s = Self {
            k,
            p,
            data: vec![0.0; k * k * (p + 1)],
        };
        for i in 0..k {
            let at = s.idx(i, i, 0);
            s.data[at] = 1.0;
        }
        s
    }

    /// Builds a set entry by entry from a function of (i, j, tau).
    pub fn from_fn(k: usize, p: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut s = Self::new_zero(k, p);
        for i in 0..k {
            for j in 0..k {
                for tau in 0..=p {
                    s.set(i, j, tau, f(i, j, tau));
                }
            }
        }
        s
    }

    fn idx(&self, i: usize, j: usize, tau: usize) -> usize {
        (i * self.k + j) * (self.p + 1) + tau
    }

    pub fn channels(&self) -> usize {
        self.k
    }

    pub fn max_lag(&self) -> usize {
        self.p
    }

    pub fn get(&self, i: usize, j: usize, tau: usize) -> f64 {
        self.data[self.idx(i, j, tau)]
    }

    /// Sets r(i, j, tau). Lag-0 writes mirror to (j, i, 0) and the unit
    /// diagonal is left untouched.
    pub fn set(&mut self, i: usize, j: usize, tau: usize, value: f64) {
        if tau == 0 {
            if i == j {
                return;
            }
            let jj = self.idx(j, i, 0);
            self.data[jj] = value;
        }
        let ii = self.idx(i, j, tau);
        self.data[ii] = value;
    }

    /// Estimates all lagged correlations from K channels of equal length n.
    ///
    /// The estimator uses full-series means and divisor-n standard
    /// deviations for every lag, so r(i, i, 0) = 1 exactly and all entries
    /// stay within [-1, 1].
    pub fn estimate(series: &[Vec<f64>], p: usize) -> Result<Self> {
        let k = series.len();
        if k == 0 {
            return Err(Error::InvalidInput("no channels given".into()));
        }
        let n = series[0].len();
        if series.iter().any(|s| s.len() != n) {
            return Err(Error::InvalidInput("channel lengths differ".into()));
        }
        if n <= 4 * (p + 1) {
            return Err(Error::InsufficientData(format!(
                "need more than {} observations for max lag {p}, got {n}",
                4 * (p + 1)
            )));
        }
        for (c, s) in series.iter().enumerate() {
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "channel {c} contains non-finite values"
                )));
            }
        }
        let nf = n as f64;
        let means: Vec<f64> = series.iter().map(|s| s.iter().sum::<f64>() / nf).collect();
        let mut sds = Vec::with_capacity(k);
        for (c, s) in series.iter().enumerate() {
            let var = s.iter().map(|v| (v - means[c]) * (v - means[c])).sum::<f64>() / nf;
            if var <= 0.0 {
                return Err(Error::DegenerateInput(format!("channel {c} is constant")));
            }
            sds.push(var.sqrt());
        }
        let mut out = Self::new_zero(k, p);
        for i in 0..k {
            for j in 0..k {
                for tau in 0..=p {
                    if i == j && tau == 0 {
                        continue;
                    }
                    let mut acc = 0.0;
                    for t in tau..n {
                        acc += (series[i][t] - means[i]) * (series[j][t - tau] - means[j]);
                    }
                    let r = (acc / nf) / (sds[i] * sds[j]);
                    let ii = out.idx(i, j, tau);
                    out.data[ii] = r.clamp(-1.0, 1.0);
                }
            }
        }
        Ok(out)
    }

    /// Correlation matrix of the stacked vector (X_t, X_{t-1}, .., X_{t-P}):
    /// block (u, v) is R(v - u) with R(-tau) = R(tau)'. Symmetric by
    /// construction.
    pub fn assemble(&self) -> DMatrix<f64> {
        let size = self.k * (self.p + 1);
        let mut m = DMatrix::zeros(size, size);
        for u in 0..=self.p {
            for v in 0..=self.p {
                let tau = v as isize - u as isize;
                for i in 0..self.k {
                    for j in 0..self.k {
                        let val = if tau >= 0 {
                            self.get(i, j, tau as usize)
                        } else {
                            self.get(j, i, (-tau) as usize)
                        };
                        m[(u * self.k + i, v * self.k + j)] = val;
                    }
                }
            }
        }
        m
    }

    /// Rebuilds a set from a full stacked matrix by averaging every entry
    /// over the positions that must be structurally equal.
    fn average_from_full(mat: &DMatrix<f64>, k: usize, p: usize) -> Self {
        let mut sums = vec![0.0; k * k * (p + 1)];
        let mut counts = vec![0usize; k * k * (p + 1)];
        let out = Self::new_zero(k, p);
        for u in 0..=p {
            for v in 0..=p {
                let tau = v as isize - u as isize;
                for i in 0..k {
                    for j in 0..k {
                        let (ci, cj, ct) = if tau > 0 {
                            (i, j, tau as usize)
                        } else if tau < 0 {
                            (j, i, (-tau) as usize)
                        } else {
                            (i.min(j), i.max(j), 0)
                        };
                        let id = out.idx(ci, cj, ct);
                        sums[id] += mat[(u * k + i, v * k + j)];
                        counts[id] += 1;
                    }
                }
            }
        }
        let mut s = Self::new_zero(k, p);
        for i in 0..k {
            for j in 0..k {
                for tau in 0..=p {
                    if i == j && tau == 0 {
                        continue;
                    }
                    let id = s.idx(i, j, tau);
                    if counts[id] > 0 {
                        s.data[id] = (sums[id] / counts[id] as f64).clamp(-1.0, 1.0);
                    } else {
                        // canonical mirror of a lag-0 entry, fill from it
                        let mirror = s.idx(j, i, tau);
                        s.data[id] = (sums[mirror] / counts[mirror] as f64).clamp(-1.0, 1.0);
                    }
                }
            }
        }
        s
    }

    /// Projects the set onto (near) positive definiteness.
    ///
    /// Each round clips eigenvalues of the assembled matrix at `floor`,
    /// rescales to a unit diagonal, then averages structurally equal
    /// entries so the result is again a valid lagged set. Succeeds once the
    /// smallest eigenvalue reaches floor/2; fails after `max_rounds`.
    pub fn psd_repair(&self, floor: f64, max_rounds: usize) -> Result<(Self, RepairReport)> {
        let mut current = self.clone();
        let mut rounds = 0usize;
        loop {
            let mat = current.assemble();
            let min_eig = mat.clone().symmetric_eigen().eigenvalues.min();
            if min_eig >= floor / 2.0 {
                return Ok((
                    current,
                    RepairReport {
                        rounds,
                        min_eigenvalue: min_eig,
                    },
                ));
            }
            if rounds == max_rounds {
                return Err(Error::RepairFailed {
                    rounds,
                    min_eigenvalue: min_eig,
                });
            }
            rounds += 1;
            let se = mat.symmetric_eigen();
            let clipped = se.eigenvalues.map(|l| l.max(floor));
            let mut fixed =
                &se.eigenvectors * DMatrix::from_diagonal(&clipped) * se.eigenvectors.transpose();
            let scale: Vec<f64> = (0..fixed.nrows()).map(|i| fixed[(i, i)].sqrt()).collect();
            for r in 0..fixed.nrows() {
                for c in 0..fixed.ncols() {
                    fixed[(r, c)] /= scale[r] * scale[c];
                }
            }
            let sym = (&fixed + fixed.transpose()) * 0.5;
            current = Self::average_from_full(&sym, self.k, self.p);
        }
    }
}
