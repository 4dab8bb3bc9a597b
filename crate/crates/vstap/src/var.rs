//! Zero-mean vector autoregression: stationarity-checked construction,
//! coefficient recovery from lagged correlations, simulation, and the
//! model-implied correlation structure.

use crate::error::{Error, Result};
use crate::lagcorr::LaggedCorrelationSet;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// A stationary VAR(P) process X_t = sum_s A_s X_{t-s} + e_t with
/// e_t ~ N(0, noise_cov). Construction enforces stationarity.
#[derive(Debug, Clone, PartialEq)]
pub struct VarModel {
    k: usize,
    coeffs: Vec<DMatrix<f64>>,
    noise_cov: DMatrix<f64>,
    spectral_radius: f64,
}

/// Companion-form matrix of a coefficient sequence: top block row holds
/// A_1..A_P, the subdiagonal holds identities.
fn companion_of(coeffs: &[DMatrix<f64>], k: usize) -> DMatrix<f64> {
    let p = coeffs.len();
    let kp = k * p;
    let mut f = DMatrix::zeros(kp, kp);
    for (s, a) in coeffs.iter().enumerate() {
        f.view_mut((0, s * k), (k, k)).copy_from(a);
    }
    for s in 0..p.saturating_sub(1) {
        f.view_mut(((s + 1) * k, s * k), (k, k))
            .copy_from(&DMatrix::identity(k, k));
    }
    f
}

/// Largest eigenvalue magnitude of the companion matrix; the process is
/// stationary iff this is below 1. An empty sequence has radius 0.
pub fn spectral_radius_of(coeffs: &[DMatrix<f64>]) -> f64 {
    if coeffs.is_empty() {
        return 0.0;
    }
    let k = coeffs[0].nrows();
    companion_of(coeffs, k)
        .complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}

impl VarModel {
    /// Validates shapes, symmetry and positive semidefiniteness of the noise
    /// covariance, and stationarity of the coefficients.
    pub fn new(coeffs: Vec<DMatrix<f64>>, noise_cov: DMatrix<f64>) -> Result<Self> {
        let k = noise_cov.nrows();
        if k == 0 || noise_cov.ncols() != k {
            return Err(Error::InvalidInput(format!(
                "noise covariance must be square and non-empty, got {}x{}",
                noise_cov.nrows(),
                noise_cov.ncols()
            )));
        }
        if noise_cov.iter().any(|v| !v.is_finite())
            || coeffs.iter().any(|a| a.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidInput("model contains non-finite entries".into()));
        }
        for (s, a) in coeffs.iter().enumerate() {
            if a.nrows() != k || a.ncols() != k {
                return Err(Error::InvalidInput(format!(
                    "coefficient matrix {} is {}x{}, expected {k}x{k}",
                    s + 1,
                    a.nrows(),
                    a.ncols()
                )));
            }
        }
        let asym = (&noise_cov - noise_cov.transpose()).abs().max();
        if asym > 1e-8 * noise_cov.abs().max().max(1.0) {
            return Err(Error::InvalidInput(
                "noise covariance is not symmetric".into(),
            ));
        }
        let noise_cov = (&noise_cov + noise_cov.transpose()) * 0.5;
        let min_eig = noise_cov.clone().symmetric_eigen().eigenvalues.min();
        if min_eig < -1e-8 * noise_cov.abs().max().max(1.0) {
            return Err(Error::InvalidInput(format!(
                "noise covariance is not positive semidefinite (min eigenvalue {min_eig:.3e})"
            )));
        }
        let spectral_radius = spectral_radius_of(&coeffs);
        if spectral_radius >= 1.0 {
            return Err(Error::NonStationary { spectral_radius });
        }
        Ok(Self {
            k,
            coeffs,
            noise_cov,
            spectral_radius,
        })
    }

    pub fn channels(&self) -> usize {
        self.k
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    pub fn noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    /// Replaces the noise covariance, revalidating the model.
    pub fn with_noise_cov(&self, noise_cov: DMatrix<f64>) -> Result<Self> {
        Self::new(self.coeffs.clone(), noise_cov)
    }

    fn innovation_factor(&self) -> DMatrix<f64> {
        match self.noise_cov.clone().cholesky() {
            Some(ch) => ch.l(),
            None => {
                // semidefinite or numerically indefinite: eigen square root
                let se = self.noise_cov.clone().symmetric_eigen();
                let sq = se.eigenvalues.map(|l| l.max(0.0).sqrt());
                &se.eigenvectors * DMatrix::from_diagonal(&sq)
            }
        }
    }

    /// Simulates n steps after discarding `burn_in` steps from a zero
    /// initial state. Returns one vector per channel.
    ///
    /// Innovations are noise_cov^{1/2} z with z drawn elementwise from the
    /// standard normal, so output is deterministic for a seeded generator.
    pub fn simulate<R: Rng + ?Sized>(
        &self,
        n: usize,
        burn_in: usize,
        rng: &mut R,
    ) -> Result<Vec<Vec<f64>>> {
        if n == 0 {
            return Err(Error::InvalidInput("simulation length must be positive".into()));
        }
        let k = self.k;
        let p = self.coeffs.len();
        let b = self.innovation_factor();
        let mut out = vec![Vec::with_capacity(n); k];
        let mut hist: Vec<DVector<f64>> = vec![DVector::zeros(k); p.max(1)];
        let mut z = DVector::zeros(k);
        for t in 0..burn_in + n {
            for j in 0..k {
                z[j] = rng.sample(StandardNormal);
            }
            let mut x = &b * &z;
            for s in 1..=p {
                // hist is a ring: slot (t - s) mod p
                let idx = (t + p - s) % p.max(1);
                x += &self.coeffs[s - 1] * &hist[idx];
            }
            if t >= burn_in {
                for j in 0..k {
                    out[j].push(x[j]);
                }
            }
            if p > 0 {
                hist[t % p] = x;
            }
        }
        Ok(out)
    }

    /// Stationary autocovariance sequence Gamma(0..max_lag), where
    /// Gamma(tau) = Cov(X_t, X_{t-tau}).
    ///
    /// Gamma(0..P-1) solve the discrete Lyapunov equation of the companion
    /// form; higher lags follow the coefficient recursion.
    pub fn autocovariances(&self, max_lag: usize) -> Result<Vec<DMatrix<f64>>> {
        let k = self.k;
        let p = self.coeffs.len();
        let mut gammas: Vec<DMatrix<f64>>;
        if p == 0 {
            gammas = vec![self.noise_cov.clone()];
        } else {
            let kp = k * p;
            let f = companion_of(&self.coeffs, k);
            let mut q = DMatrix::zeros(kp, kp);
            q.view_mut((0, 0), (k, k)).copy_from(&self.noise_cov);
            let big = DMatrix::identity(kp * kp, kp * kp) - f.kronecker(&f);
            let qvec = DVector::from_column_slice(q.as_slice());
            let svec = big.lu().solve(&qvec).ok_or_else(|| {
                Error::NumericallySingular(
                    "stationary covariance equations are singular".into(),
                )
            })?;
            let s = DMatrix::from_column_slice(kp, kp, svec.as_slice());
            let s = (&s + s.transpose()) * 0.5;
            gammas = (0..p)
                .map(|tau| s.view((0, tau * k), (k, k)).into_owned())
                .collect();
        }
        for tau in gammas.len()..=max_lag {
            let mut g = DMatrix::zeros(k, k);
            for s in 1..=p {
                g += &self.coeffs[s - 1] * &gammas[tau - s];
            }
            gammas.push(g);
        }
        gammas.truncate(max_lag + 1);
        Ok(gammas)
    }

    /// Model-implied lagged correlations up to max_lag.
    pub fn theoretical_correlations(&self, max_lag: usize) -> Result<LaggedCorrelationSet> {
        let gammas = self.autocovariances(max_lag)?;
        let k = self.k;
        let mut d = Vec::with_capacity(k);
        for i in 0..k {
            let v = gammas[0][(i, i)];
            if !(v > 0.0) {
                return Err(Error::DegenerateInput(format!(
                    "channel {i} has non-positive stationary variance {v:.3e}"
                )));
            }
            d.push(v.sqrt());
        }
        Ok(LaggedCorrelationSet::from_fn(k, max_lag, |i, j, tau| {
            if i == j && tau == 0 {
                1.0
            } else {
                (gammas[tau][(i, j)] / (d[i] * d[j])).clamp(-1.0, 1.0)
            }
        }))
    }
}

/// Recovers the VAR(P) whose implied correlations match the given lagged
/// set: solves the stacked lag equations for the coefficients, then sets the
/// noise covariance to the lag-0 residual (clipped to the PSD cone).
pub fn yule_walker(corr: &LaggedCorrelationSet) -> Result<VarModel> {
    let k = corr.channels();
    let p = corr.max_lag();
    let r: Vec<DMatrix<f64>> = (0..=p)
        .map(|tau| DMatrix::from_fn(k, k, |i, j| corr.get(i, j, tau)))
        .collect();
    if p == 0 {
        return VarModel::new(vec![], r[0].clone());
    }
    let kp = k * p;
    let mut g = DMatrix::zeros(kp, kp);
    for s in 1..=p {
        for t in 1..=p {
            let tau = t as isize - s as isize;
            let block = if tau >= 0 {
                r[tau as usize].clone()
            } else {
                r[(-tau) as usize].transpose()
            };
            g.view_mut(((s - 1) * k, (t - 1) * k), (k, k)).copy_from(&block);
        }
    }
    let mut c = DMatrix::zeros(k, kp);
    for t in 1..=p {
        c.view_mut((0, (t - 1) * k), (k, k)).copy_from(&r[t]);
    }
    let x = g.lu().solve(&c.transpose()).ok_or_else(|| {
        Error::NumericallySingular("stacked lag-equation matrix is singular".into())
    })?;
    let a_all = x.transpose();
    let coeffs: Vec<DMatrix<f64>> = (0..p)
        .map(|s| a_all.view((0, s * k), (k, k)).into_owned())
        .collect();
    let mut sigma = r[0].clone();
    for s in 1..=p {
        sigma -= &coeffs[s - 1] * r[s].transpose();
    }
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    let se = sigma.symmetric_eigen();
    let clipped = se.eigenvalues.map(|l| l.max(0.0));
    let sigma = &se.eigenvectors * DMatrix::from_diagonal(&clipped) * se.eigenvectors.transpose();
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    VarModel::new(coeffs, sigma)
}
