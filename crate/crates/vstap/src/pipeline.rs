//! The end-to-end generator: fit a model from multichannel data (or from
//! explicit correlation targets), then produce series of arbitrary length
//! whose marginals and lagged correlation structure match the targets.
//!
//! Generation simulates a Gaussian vector autoregression and pushes each
//! channel through a static marginal transform, so arbitrarily long output
//! costs one VAR step plus one transform evaluation per sample.

use crate::bvn;
use crate::error::{Error, Result};
use crate::lagcorr::{
    LaggedCorrelationSet, RepairReport, DEFAULT_EIG_FLOOR, DEFAULT_MAX_REPAIR_ROUNDS,
};
use crate::marginal::{ordinal_ranks, rank_remap, EmpiricalMarginal, PiecewiseTransform};
use crate::solver::{solve_gaussian_corr, SolveOptions, SolveReport, SolveStatus, RHO_CAP};
use crate::var::{yule_walker, VarModel};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959963984540054;

/// Warm-up steps discarded before collecting simulated output.
pub fn default_burn_in(order: usize) -> usize {
    1000.max(50 * order)
}

/// How generated Gaussian values are mapped onto the target marginals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformMode {
    /// Rank-remap onto the fitted sample: output length equal to the fit
    /// length reproduces the sample values exactly (as a multiset); other
    /// lengths draw from the interpolated sample quantiles.
    ExactMarginal,
    /// Apply the fitted piecewise-linear transform pointwise.
    PiecewiseMarginal,
}

/// Fit configuration.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Largest lag whose correlations are matched (the VAR order).
    pub max_lag: usize,
    /// Segments in each marginal transform.
    pub segments: usize,
    pub solve: SolveOptions,
    pub eig_floor: f64,
    pub max_repair_rounds: usize,
}

impl FitOptions {
    pub fn new(max_lag: usize) -> Self {
        Self {
            max_lag,
            segments: 20,
            solve: SolveOptions::default(),
            eig_floor: DEFAULT_EIG_FLOOR,
            max_repair_rounds: DEFAULT_MAX_REPAIR_ROUNDS,
        }
    }
}

/// One correlation inversion within a fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairLagSolve {
    pub i: usize,
    pub j: usize,
    pub tau: usize,
    pub target: f64,
    pub report: SolveReport,
}

/// Diagnostics collected while fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub pair_solves: Vec<PairLagSolve>,
    pub target_repair: RepairReport,
    pub gaussian_repair: RepairReport,
    pub spectral_radius: f64,
}

/// A fitted generator: per-channel marginals and transforms plus the
/// Gaussian autoregression that carries the dependence structure.
#[derive(Debug, Clone)]
pub struct VstapModel {
    channel_names: Vec<String>,
    marginals: Vec<EmpiricalMarginal>,
    transforms: Vec<PiecewiseTransform>,
    target_corr: LaggedCorrelationSet,
    gaussian_corr: LaggedCorrelationSet,
    var: VarModel,
    fit_report: FitReport,
}

impl VstapModel {
    /// Reassembles a model from stored parts, revalidating cross-field
    /// consistency.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        channel_names: Vec<String>,
        marginals: Vec<EmpiricalMarginal>,
        transforms: Vec<PiecewiseTransform>,
        target_corr: LaggedCorrelationSet,
        gaussian_corr: LaggedCorrelationSet,
        var: VarModel,
        fit_report: FitReport,
    ) -> Result<Self> {
        let k = marginals.len();
        if k == 0 {
            return Err(Error::InvalidInput("model has no channels".into()));
        }
        if channel_names.len() != k || transforms.len() != k {
            return Err(Error::InvalidInput(format!(
                "inconsistent channel counts: {} names, {k} marginals, {} transforms",
                channel_names.len(),
                transforms.len()
            )));
        }
        let n = marginals[0].n();
        if marginals.iter().any(|m| m.n() != n) {
            return Err(Error::InvalidInput(
                "marginal sample sizes differ between channels".into(),
            ));
        }
        if target_corr.channels() != k
            || gaussian_corr.channels() != k
            || target_corr.max_lag() != gaussian_corr.max_lag()
        {
            return Err(Error::InvalidInput(
                "correlation sets do not match the channel count or each other".into(),
            ));
        }
        if var.channels() != k || var.order() != gaussian_corr.max_lag() {
            return Err(Error::InvalidInput(format!(
                "autoregression shape ({} channels, order {}) does not match \
                 the correlation sets ({k} channels, max lag {})",
                var.channels(),
                var.order(),
                gaussian_corr.max_lag()
            )));
        }
        Ok(Self {
            channel_names,
            marginals,
            transforms,
            target_corr,
            gaussian_corr,
            var,
            fit_report,
        })
    }

    pub fn channels(&self) -> usize {
        self.marginals.len()
    }

    /// Length of the sample the model was fitted on.
    pub fn n_fit(&self) -> usize {
        self.marginals[0].n()
    }

    pub fn max_lag(&self) -> usize {
        self.target_corr.max_lag()
    }

    pub fn segment_count(&self) -> usize {
        self.transforms[0].segment_count()
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn marginals(&self) -> &[EmpiricalMarginal] {
        &self.marginals
    }

    pub fn transforms(&self) -> &[PiecewiseTransform] {
        &self.transforms
    }

    /// Correlation targets the fit matched (after any repair).
    pub fn target_corr(&self) -> &LaggedCorrelationSet {
        &self.target_corr
    }

    /// Solved Gaussian-scale correlations (after any repair).
    pub fn gaussian_corr(&self) -> &LaggedCorrelationSet {
        &self.gaussian_corr
    }

    pub fn var(&self) -> &VarModel {
        &self.var
    }

    pub fn fit_report(&self) -> &FitReport {
        &self.fit_report
    }

    /// Generates n observations per channel from the given seed.
    pub fn generate(&self, n: usize, mode: TransformMode, seed: u64) -> Result<Vec<Vec<f64>>> {
        if n == 0 {
            return Err(Error::InvalidInput("output length must be positive".into()));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let burn_in = default_burn_in(self.var.order());
        let z = self.var.simulate(n, burn_in, &mut rng)?;
        let mut out = Vec::with_capacity(self.channels());
        for (i, zi) in z.iter().enumerate() {
            let xi = match mode {
                TransformMode::PiecewiseMarginal => {
                    zi.iter().map(|&v| self.transforms[i].apply(v)).collect()
                }
                TransformMode::ExactMarginal => {
                    let ranks = ordinal_ranks(zi);
                    if n == self.marginals[i].n() {
                        // direct remap keeps the output an exact permutation
                        // of the fitted sample
                        rank_remap(&ranks, &self.marginals[i])?
                    } else {
                        ranks
                            .iter()
                            .map(|&r| {
                                self.marginals[i].quantile((r as f64 - 0.5) / n as f64)
                            })
                            .collect::<Result<Vec<_>>>()?
                    }
                }
            };
            out.push(xi);
        }
        Ok(out)
    }

    /// A surrogate series: same length as the fitted data, each channel an
    /// exact permutation of its original sample, with the dependence
    /// structure regenerated from the model.
    pub fn surrogate(&self, seed: u64) -> Result<Vec<Vec<f64>>> {
        self.generate(self.n_fit(), TransformMode::ExactMarginal, seed)
    }
}

fn effective_names(k: usize, channel_names: Option<&[String]>) -> Result<Vec<String>> {
    match channel_names {
        Some(ns) => {
            if ns.len() != k {
                return Err(Error::InvalidInput(format!(
                    "{} channel names for {k} channels",
                    ns.len()
                )));
            }
            Ok(ns.to_vec())
        }
        None => Ok((0..k).map(|i| format!("ch{i}")).collect()),
    }
}

fn check_channels(series: &[Vec<f64>], names: &[String]) -> Result<()> {
    if series.is_empty() {
        return Err(Error::InvalidInput("no channels given".into()));
    }
    let n = series[0].len();
    if series.iter().any(|s| s.len() != n) {
        return Err(Error::InvalidInput("channel lengths differ".into()));
    }
    for (name, s) in names.iter().zip(series) {
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "channel {name} contains non-finite values"
            )));
        }
        if let Some(first) = s.first() {
            if s.iter().all(|v| v == first) {
                return Err(Error::DegenerateInput(format!("channel {name} is constant")));
            }
        }
    }
    Ok(())
}

/// Fits a model to multichannel data: correlation targets are estimated
/// from the series itself up to `opts.max_lag`.
pub fn fit_vstap(
    series: &[Vec<f64>],
    channel_names: Option<&[String]>,
    opts: &FitOptions,
) -> Result<VstapModel> {
    let names = effective_names(series.len(), channel_names)?;
    check_channels(series, &names)?;
    let targets = LaggedCorrelationSet::estimate(series, opts.max_lag)?;
    fit_vstap_with_targets(series, &targets, Some(&names), opts)
}

/// Fits a model from per-channel marginal samples and explicit correlation
/// targets (whose max lag sets the autoregression order).
pub fn fit_vstap_with_targets(
    samples: &[Vec<f64>],
    targets: &LaggedCorrelationSet,
    channel_names: Option<&[String]>,
    opts: &FitOptions,
) -> Result<VstapModel> {
    let k = samples.len();
    if k == 0 {
        return Err(Error::InvalidInput("no channels given".into()));
    }
    if targets.channels() != k {
        return Err(Error::InvalidInput(format!(
            "targets cover {} channels but {k} samples were given",
            targets.channels()
        )));
    }
    let n = samples[0].len();
    if samples.iter().any(|s| s.len() != n) {
        return Err(Error::InvalidInput("channel lengths differ".into()));
    }
    let names = effective_names(k, channel_names)?;
    let p = targets.max_lag();

    let mut marginals = Vec::with_capacity(k);
    let mut transforms = Vec::with_capacity(k);
    for (i, s) in samples.iter().enumerate() {
        let m = EmpiricalMarginal::new(s)?;
        if m.sd() <= 0.0 {
            return Err(Error::DegenerateInput(format!(
                "channel {} is constant",
                names[i]
            )));
        }
        transforms.push(m.fit_piecewise(opts.segments)?);
        marginals.push(m);
    }

    let (target_corr, target_repair) =
        targets.psd_repair(opts.eig_floor, opts.max_repair_rounds)?;

    let mut gaussian = LaggedCorrelationSet::new_zero(k, p);
    let mut pair_solves = Vec::new();
    for tau in 0..=p {
        for i in 0..k {
            for j in 0..k {
                if tau == 0 && i >= j {
                    continue;
                }
                let target = target_corr.get(i, j, tau);
                let report =
                    solve_gaussian_corr(&transforms[i], &transforms[j], target, &opts.solve)?;
                if report.status == SolveStatus::Infeasible {
                    let lower = bvn::psi_eval(&transforms[i], &transforms[j], -RHO_CAP)?;
                    let upper = bvn::psi_eval(&transforms[i], &transforms[j], RHO_CAP)?;
                    return Err(Error::Infeasible {
                        i,
                        j,
                        tau,
                        target,
                        lower,
                        upper,
                    });
                }
                gaussian.set(i, j, tau, report.solution);
                pair_solves.push(PairLagSolve {
                    i,
                    j,
                    tau,
                    target,
                    report,
                });
            }
        }
    }

    let (gaussian_corr, gaussian_repair) =
        gaussian.psd_repair(opts.eig_floor, opts.max_repair_rounds)?;
    let var = yule_walker(&gaussian_corr)?;
    let fit_report = FitReport {
        pair_solves,
        target_repair,
        gaussian_repair,
        spectral_radius: var.spectral_radius(),
    };
    VstapModel::from_parts(
        names,
        marginals,
        transforms,
        target_corr,
        gaussian_corr,
        var,
        fit_report,
    )
}

/// 95% confidence interval for a correlation estimated from n points, via
/// the variance-stabilizing arc-tangent transform.
pub fn fisher_ci(r: f64, n: usize) -> Result<(f64, f64)> {
    if !r.is_finite() || r.abs() > 1.0 {
        return Err(Error::InvalidInput(format!(
            "correlation {r} outside [-1, 1]"
        )));
    }
    if r.abs() == 1.0 {
        return Err(Error::DegenerateInput(
            "correlation of magnitude 1 has no finite stabilized transform".into(),
        ));
    }
    if n < 4 {
        return Err(Error::InsufficientData(format!(
            "confidence interval needs at least 4 points, got {n}"
        )));
    }
    let z = r.atanh();
    let half = Z_95 / ((n - 3) as f64).sqrt();
    Ok(((z - half).tanh(), (z + half).tanh()))
}
