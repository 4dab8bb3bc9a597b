//! End-to-end acceptance suite. Each numbered check prints one PASS/FAIL
//! line with its measured values; the test fails if any check fails.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;
use std::time::Instant;
use vstap::bvn::{self, Rect};
use vstap::marginal::standard_breakpoints;
use vstap::oracle;
use vstap::pipeline::{fisher_ci, fit_vstap, fit_vstap_with_targets, FitOptions};
use vstap::solver::{solve_gaussian_corr, SolveOptions, SolveStatus};
use vstap::var::{spectral_radius_of, yule_walker};
use vstap::{EmpiricalMarginal, Error, LaggedCorrelationSet, TransformMode, VarModel};

struct Criterion {
    name: &'static str,
    pass: bool,
    details: String,
}

fn fail(name: &'static str, e: Error) -> Criterion {
    Criterion {
        name,
        pass: false,
        details: format!("errored: {e}"),
    }
}

/// Linear-interpolation percentile of a sorted slice, q in [0, 1].
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
}

fn uniform_channels(k: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..k).map(|_| (0..n).map(|_| rng.gen::<f64>()).collect()).collect()
}

fn li_triple_targets() -> LaggedCorrelationSet {
    let mut t = LaggedCorrelationSet::new_zero(3, 0);
    t.set(0, 1, 0, -0.4);
    t.set(0, 2, 0, 0.2);
    t.set(1, 2, 0, 0.8);
    t
}

/// Exact Gaussian-scale correlation matching a uniform-pair correlation.
fn uniform_pair_exact(r: f64) -> f64 {
    2.0 * (PI * r / 6.0).sin()
}

// ------------------------------------------------------------ fixtures

fn var2_model() -> VarModel {
    let a1 = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.4, 0.5]);
    let a2 = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.25, 0.0]);
    let noise = DMatrix::from_row_slice(2, 2, &[0.09, 0.0, 0.0, 0.04]);
    VarModel::new(vec![a1, a2], noise).unwrap()
}

/// Stationary mean induced by the intercept vector (0.02, 0.03).
fn var2_mean() -> Vec<f64> {
    let m = var2_model();
    let mut lhs = DMatrix::identity(2, 2);
    for a in m.coeffs() {
        lhs -= a;
    }
    let c = DVector::from_column_slice(&[0.02, 0.03]);
    let mu = lhs.lu().solve(&c).unwrap();
    vec![mu[0], mu[1]]
}

fn var5_model() -> VarModel {
    let mut a1 = DMatrix::zeros(5, 5);
    a1[(0, 0)] = 0.4;
    a1[(0, 4)] = 0.4;
    a1[(1, 1)] = 0.4;
    a1[(2, 2)] = 0.5;
    a1[(4, 4)] = 0.7;
    a1[(4, 3)] = -0.4;
    let mut a2 = DMatrix::zeros(5, 5);
    a2[(0, 0)] = -0.5;
    a2[(1, 4)] = 0.4;
    a2[(2, 2)] = -0.7;
    a2[(3, 0)] = 0.4;
    a2[(3, 1)] = 0.3;
    a2[(4, 4)] = -0.5;
    let mut a3 = DMatrix::zeros(5, 5);
    a3[(2, 4)] = -0.3;
    a3[(3, 3)] = 0.8;
    let mut a4 = DMatrix::zeros(5, 5);
    a4[(1, 0)] = -0.3;
    VarModel::new(vec![a1, a2, a3, a4], DMatrix::identity(5, 5)).unwrap()
}

/// Simulates the generating process, adds the stationary mean, and applies
/// the power marginal transform x = s^a per channel.
fn transformed_realization(
    model: &VarModel,
    mean: &[f64],
    a: u32,
    n: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let z = model.simulate(n, 1000, &mut rng).unwrap();
    z.iter()
        .enumerate()
        .map(|(i, ch)| ch.iter().map(|v| (v + mean[i]).powi(a as i32)).collect())
        .collect()
}

// ------------------------------------------------------- checks 1 and 2

fn criterion_1() -> Criterion {
    let name = "uniform-triple Gaussian-scale solve";
    let t0 = Instant::now();
    let samples = uniform_channels(3, 100_000, 101);
    let model = match fit_vstap_with_targets(&samples, &li_triple_targets(), None, &FitOptions::new(0)) {
        Ok(m) => m,
        Err(e) => return fail(name, e),
    };
    let mut worst = 0.0f64;
    for s in &model.fit_report().pair_solves {
        worst = worst.max((s.report.solution - uniform_pair_exact(s.target)).abs());
    }
    let secs = t0.elapsed().as_secs_f64();
    Criterion {
        name,
        pass: worst < 5e-3 && secs < 10.0,
        details: format!(
            "worst |solved - 2sin(pi r/6)| = {worst:.2e} (limit 5e-3), {secs:.2} s (limit 10 s)"
        ),
    }
}

fn criterion_2() -> Criterion {
    let name = "indefinite triple repair";
    let mut set = LaggedCorrelationSet::new_zero(3, 0);
    set.set(0, 1, 0, uniform_pair_exact(-0.4));
    set.set(0, 2, 0, uniform_pair_exact(0.2));
    set.set(1, 2, 0, uniform_pair_exact(0.8));
    let (repaired, report) = match set.psd_repair(1e-6, 50) {
        Ok(r) => r,
        Err(e) => return fail(name, e),
    };
    let worst = [
        (repaired.get(0, 1, 0), -0.4122),
        (repaired.get(0, 2, 0), 0.2062),
        (repaired.get(1, 2, 0), 0.8065),
    ]
    .iter()
    .map(|(got, want)| (got - want).abs())
    .fold(0.0f64, f64::max);
    let min_eig = repaired
        .assemble()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    Criterion {
        name,
        pass: worst < 5e-3 && min_eig > 0.0 && report.rounds <= 20,
        details: format!(
            "worst |repaired - reference| = {worst:.2e} (limit 5e-3), min eigenvalue {min_eig:.2e}, {} rounds (limit 20)",
            report.rounds
        ),
    }
}

// --------------------------------------------------------------- check 3

fn criterion_3() -> Criterion {
    let name = "cubic correlation transform closed form";
    let mut rng = ChaCha20Rng::seed_from_u64(42);
    let sample: Vec<f64> = (0..4096)
        .map(|_| {
            let g: f64 = rng.sample(StandardNormal);
            g * g * g
        })
        .collect();
    let run = || -> Result<(f64, f64), Error> {
        let t = EmpiricalMarginal::new(&sample)?.fit_piecewise(20)?;
        let mut mc_rng = ChaCha20Rng::seed_from_u64(4242);
        let mut worst_cf = 0.0f64;
        let mut worst_sigma = 0.0f64;
        for step in 0..7 {
            let rho = -0.9 + 0.3 * step as f64;
            let psi = bvn::psi_eval(&t, &t, rho)?;
            worst_cf = worst_cf.max((psi - (0.4 * rho.powi(3) + 0.6 * rho)).abs());
            // the oracle pushes the same fitted transform through brute
            // force, isolating the closed-form evaluation from fit error
            let mc = oracle::mc_transformed_corr(
                |z| t.apply(z),
                |z| t.apply(z),
                rho,
                10_000_000,
                &mut mc_rng,
            )?;
            worst_sigma = worst_sigma.max(mc.sigmas_from(psi));
        }
        Ok((worst_cf, worst_sigma))
    };
    match run() {
        Ok((worst_cf, worst_sigma)) => Criterion {
            name,
            pass: worst_cf < 0.02 && worst_sigma <= 3.0,
            details: format!(
                "worst |psi - (0.4 rho^3 + 0.6 rho)| = {worst_cf:.4} (limit 0.02); worst MC deviation {worst_sigma:.2} standard errors (limit 3)"
            ),
        },
        Err(e) => fail(name, e),
    }
}

// --------------------------------------------------- checks 4 and 5

struct CoverageStats {
    covered: usize,
    cells: usize,
    ratio: f64,
    worst_cell_ratio: f64,
}

/// Fits one observed realization, regenerates `b` series, and tabulates how
/// many cells' observed correlations fall inside the generated 2.5-97.5%
/// band, plus band widths relative to the Fisher interval width.
fn coverage_run(
    gen_model: &VarModel,
    mean: &[f64],
    a: u32,
    max_lag: usize,
    fit_seed: u64,
    gen_seed0: u64,
    b: usize,
    top_cells: Option<usize>,
) -> Result<CoverageStats, Error> {
    let n = 1024;
    let observed = transformed_realization(gen_model, mean, a, n, fit_seed);
    let k = observed.len();
    let model = fit_vstap(&observed, None, &FitOptions::new(max_lag))?;
    let r_obs = LaggedCorrelationSet::estimate(&observed, max_lag)?;

    let mut ests = Vec::with_capacity(b);
    for r in 0..b {
        let out = model.generate(n, TransformMode::PiecewiseMarginal, gen_seed0 + r as u64)?;
        ests.push(LaggedCorrelationSet::estimate(&out, max_lag)?);
    }

    // every (i, j, tau) cell; lag-0 mirrors deduplicated to i <= j
    let mut cells: Vec<(usize, usize, usize)> = Vec::new();
    for tau in 0..=max_lag {
        for i in 0..k {
            for j in 0..k {
                if tau == 0 && i > j {
                    continue;
                }
                cells.push((i, j, tau));
            }
        }
    }
    if let Some(m) = top_cells {
        cells.retain(|&(i, j, tau)| !(i == j && tau == 0));
        cells.sort_by(|&a, &b| {
            let ra = r_obs.get(a.0, a.1, a.2).abs();
            let rb = r_obs.get(b.0, b.1, b.2).abs();
            rb.partial_cmp(&ra).unwrap()
        });
        cells.truncate(m);
    }

    let mut covered = 0usize;
    let mut band_sum = 0.0f64;
    let mut fisher_sum = 0.0f64;
    let mut worst_cell_ratio = 0.0f64;
    for &(i, j, tau) in &cells {
        let r = r_obs.get(i, j, tau);
        if i == j && tau == 0 {
            covered += 1; // both sides exactly 1 by construction
            continue;
        }
        let mut vals: Vec<f64> = ests.iter().map(|e| e.get(i, j, tau)).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let lo = percentile(&vals, 0.025);
        let hi = percentile(&vals, 0.975);
        if lo <= r && r <= hi {
            covered += 1;
        }
        let (flo, fhi) = fisher_ci(r, n)?;
        band_sum += hi - lo;
        fisher_sum += fhi - flo;
        worst_cell_ratio = worst_cell_ratio.max((hi - lo) / (fhi - flo));
    }
    Ok(CoverageStats {
        covered,
        cells: cells.len(),
        ratio: band_sum / fisher_sum,
        worst_cell_ratio,
    })
}

fn criterion_4() -> Criterion {
    let name = "two-channel figure-level coverage";
    let t0 = Instant::now();
    let model = var2_model();
    let mean = var2_mean();
    let mut details = Vec::new();
    let mut pass = true;
    for (a, fit_seed, gen_seed0) in [(3u32, 7u64, 1000u64), (2, 8, 1500)] {
        match coverage_run(&model, &mean, a, 5, fit_seed, gen_seed0, 100, None) {
            Ok(s) => {
                let need = (0.8 * s.cells as f64).ceil() as usize;
                let ok = s.covered >= need && s.ratio >= 0.5 && s.ratio <= 2.0;
                pass &= ok;
                details.push(format!(
                    "a={a}: {}/{} cells in band (need {need}), width ratio {:.2} (per-cell worst {:.2})",
                    s.covered, s.cells, s.ratio, s.worst_cell_ratio
                ));
            }
            Err(e) => {
                pass = false;
                details.push(format!("a={a}: errored: {e}"));
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    pass &= secs < 300.0;
    details.push(format!("{secs:.1} s (limit 300 s)"));
    Criterion {
        name,
        pass,
        details: details.join("; "),
    }
}

fn criterion_5() -> Criterion {
    let name = "five-channel coverage of the 4 largest correlations";
    let model = var5_model();
    let mean = vec![0.0; 5];
    let mut details = Vec::new();
    let mut pass = true;
    for (a, fit_seed, gen_seed0) in [(3u32, 55u64, 2000u64), (2, 56, 2500)] {
        match coverage_run(&model, &mean, a, 5, fit_seed, gen_seed0, 100, Some(4)) {
            Ok(s) => {
                let need = (0.8 * s.cells as f64).ceil() as usize;
                let ok = s.covered >= need && s.ratio >= 0.5 && s.ratio <= 2.0;
                pass &= ok;
                details.push(format!(
                    "a={a}: {}/{} top cells in band (need {need}), width ratio {:.2}",
                    s.covered, s.cells, s.ratio
                ));
            }
            Err(e) => {
                pass = false;
                details.push(format!("a={a}: errored: {e}"));
            }
        }
    }
    Criterion {
        name,
        pass,
        details: details.join("; "),
    }
}

// --------------------------------------------------------------- check 6

fn criterion_6() -> Criterion {
    let name = "truncated-moment oracle equivalence";
    let run = || -> Result<(f64, f64), Error> {
        let edges = [f64::NEG_INFINITY, -0.5, 0.5, f64::INFINITY];
        let mut rng = ChaCha20Rng::seed_from_u64(606);
        let mut worst_sigma = 0.0f64;
        for rho in [-0.8, -0.4, 0.0, 0.4, 0.8] {
            for xi in 0..3 {
                for yi in 0..3 {
                    let rect = Rect::new(edges[xi], edges[xi + 1], edges[yi], edges[yi + 1])?;
                    let exact = bvn::trunc_moments(&rect, rho)?;
                    let mc = oracle::mc_trunc_moments(&rect, rho, 2_000_000, 50, &mut rng)?;
                    for (got, est) in [
                        (exact.prob, mc.prob),
                        (exact.mean_x, mc.mean_x),
                        (exact.mean_y, mc.mean_y),
                        (exact.cross, mc.cross),
                    ] {
                        worst_sigma = worst_sigma.max(est.sigmas_from(got));
                    }
                }
            }
        }

        // total expectation over the equiprobable transform grid: cell
        // probabilities weight conditional cross moments back to rho itself
        let mut corners = vec![f64::NEG_INFINITY];
        corners.extend(standard_breakpoints(20));
        corners.push(f64::INFINITY);
        let mut worst_identity = 0.0f64;
        for rho in [-0.9, 0.0, 0.5] {
            let mut total = 0.0;
            for k in 0..corners.len() - 1 {
                for l in 0..corners.len() - 1 {
                    let rect = Rect::new(corners[k], corners[k + 1], corners[l], corners[l + 1])?;
                    match bvn::trunc_moments(&rect, rho) {
                        Ok(m) => total += m.prob * m.cross,
                        Err(Error::DegenerateRegion(_)) => continue,
                        Err(e) => return Err(e),
                    }
                }
            }
            worst_identity = worst_identity.max((total - rho).abs());
        }
        Ok((worst_sigma, worst_identity))
    };
    match run() {
        Ok((worst_sigma, worst_identity)) => Criterion {
            name,
            pass: worst_sigma <= 4.0 && worst_identity < 1e-8,
            details: format!(
                "45-cell grid worst deviation {worst_sigma:.2} MC standard errors (limit 4); total-expectation identity off by {worst_identity:.1e} (limit 1e-8)"
            ),
        },
        Err(e) => fail(name, e),
    }
}

// --------------------------------------------------------------- check 7

fn criterion_7() -> Criterion {
    let name = "lag-equation round trip on random models";
    let mut rng = ChaCha20Rng::seed_from_u64(777);
    let run = |rng: &mut ChaCha20Rng| -> Result<f64, Error> {
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let k = rng.gen_range(1..=5);
            let p = rng.gen_range(1..=4);
            let target_sr = rng.gen_range(0.3..0.9);
            let mut coeffs;
            loop {
                coeffs = (0..p)
                    .map(|_| DMatrix::from_fn(k, k, |_, _| rng.gen_range(-0.6..0.6)))
                    .collect::<Vec<_>>();
                let sr0 = spectral_radius_of(&coeffs);
                if sr0 > 1e-9 {
                    let scale = target_sr / sr0;
                    for (s, a) in coeffs.iter_mut().enumerate() {
                        *a *= scale.powi(s as i32 + 1);
                    }
                    break;
                }
            }
            let b = DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal));
            let noise = &b * b.transpose() + DMatrix::identity(k, k) * 0.5;
            let model = VarModel::new(coeffs, noise)?;

            let theo = model.theoretical_correlations(p)?;
            let recovered = yule_walker(&theo)?;
            let gamma0 = &model.autocovariances(0)?[0];
            let d = DVector::from_iterator(k, (0..k).map(|i| gamma0[(i, i)].sqrt()));
            let dm = DMatrix::from_diagonal(&d);
            let dinv = DMatrix::from_diagonal(&d.map(|v| 1.0 / v));
            for s in 0..p {
                let back = &dm * &recovered.coeffs()[s] * &dinv;
                worst = worst.max((back - &model.coeffs()[s]).abs().max());
            }
            let noise_back = &dm * recovered.noise_cov() * &dm;
            worst = worst.max((noise_back - model.noise_cov()).abs().max());
        }
        Ok(worst)
    };
    match run(&mut rng) {
        Ok(worst) => Criterion {
            name,
            pass: worst < 1e-8,
            details: format!("worst coefficient error {worst:.1e} over 50 models (limit 1e-8)"),
        },
        Err(e) => fail(name, e),
    }
}

// --------------------------------------------------------------- check 8

fn criterion_8() -> Criterion {
    let name = "surrogate marginal permutation contract";
    let mut rng = ChaCha20Rng::seed_from_u64(888);
    let run = |rng: &mut ChaCha20Rng| -> Result<usize, Error> {
        let mut checked = 0usize;
        for trial in 0..20u64 {
            let k = rng.gen_range(1..=4);
            let n = rng.gen_range(50..=400);
            let p = rng.gen_range(1..=2);
            let data: Vec<Vec<f64>> = (0..k)
                .map(|c| {
                    (0..n)
                        .map(|_| {
                            let g: f64 = rng.sample(StandardNormal);
                            match (trial as usize + c) % 4 {
                                0 => g,
                                1 => g * g * g,
                                2 => g.exp(),
                                _ => g * g,
                            }
                        })
                        .collect()
                })
                .collect();
            let model = fit_vstap(&data, None, &FitOptions::new(p))?;
            let surr = model.surrogate(trial)?;
            for c in 0..k {
                let mut got = surr[c].clone();
                got.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mut want = data[c].clone();
                want.sort_by(|a, b| a.partial_cmp(b).unwrap());
                if got != want {
                    return Err(Error::InvalidInput(format!(
                        "trial {trial} channel {c}: surrogate is not a permutation"
                    )));
                }
                checked += 1;
            }
        }
        Ok(checked)
    };
    match run(&mut rng) {
        Ok(channels) => Criterion {
            name,
            pass: true,
            details: format!("{channels} channels across 20 random inputs, all exact permutations"),
        },
        Err(e) => fail(name, e),
    }
}

// --------------------------------------------------------------- check 9

fn criterion_9() -> Criterion {
    let name = "runtime sanity";
    let run = || -> Result<(f64, f64), Error> {
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let mut draw = |f: fn(f64) -> f64| -> Result<_, Error> {
            let s: Vec<f64> = (0..1024)
                .map(|_| f(rng.sample::<f64, _>(StandardNormal)))
                .collect();
            EmpiricalMarginal::new(&s)?.fit_piecewise(20)
        };
        let t1 = draw(|g| g * g * g)?;
        let t2 = draw(|g| g.exp())?;
        let t0 = Instant::now();
        let rep = solve_gaussian_corr(&t1, &t2, 0.4, &SolveOptions::default())?;
        let solve_secs = t0.elapsed().as_secs_f64();
        if rep.status != SolveStatus::Converged {
            return Err(Error::InvalidInput(format!("solve ended as {:?}", rep.status)));
        }

        let observed = transformed_realization(&var5_model(), &[0.0; 5], 3, 1024, 61);
        let t0 = Instant::now();
        fit_vstap(&observed, None, &FitOptions::new(5))?;
        let fit_secs = t0.elapsed().as_secs_f64();
        Ok((solve_secs, fit_secs))
    };
    match run() {
        Ok((solve_secs, fit_secs)) => Criterion {
            name,
            pass: solve_secs < 1.0 && fit_secs < 60.0,
            details: format!(
                "single solve {solve_secs:.3} s (limit 1 s); five-channel order-5 fit {fit_secs:.2} s (limit 60 s)"
            ),
        },
        Err(e) => fail(name, e),
    }
}

#[test]
fn acceptance() {
    let checks = [
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
    ];
    let mut lines = Vec::new();
    for (idx, c) in checks.iter().enumerate() {
        let line = format!(
            "criterion {}: {} - {} ({})",
            idx + 1,
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.details
        );
        println!("{line}");
        lines.push(line);
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    assert!(failed == 0, "{failed} criteria failed:\n{}", lines.join("\n"));
}
