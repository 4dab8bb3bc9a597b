//! Univariate standard Gaussian helpers shared across the crate.

use statrs::function::erf;

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;
const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal density; zero at infinite arguments.
pub fn pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// x * pdf(x), with the limit 0 at x = ±inf made explicit so corner terms
/// built on infinite breakpoints vanish instead of producing NaN.
pub fn x_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    x * pdf(x)
}

/// Standard normal CDF via the complementary error function (accurate in
/// both tails). Uses libm's erfc, which is good to about an ulp; the statrs
/// one only reaches ~1e-11 absolute, too coarse for the orthant tables.
pub fn cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal inverse CDF. `p` must lie strictly inside (0, 1).
///
/// One Newton step against the high-accuracy `cdf` polishes the library
/// inverse down to an ulp or two, so cdf and inv_cdf agree as inverses.
pub fn inv_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let x0 = -SQRT_2 * erf::erfc_inv(2.0 * p);
    let d = pdf(x0);
    if d > 0.0 {
        let x1 = x0 - (cdf(x0) - p) / d;
        if x1.is_finite() {
            return x1;
        }
    }
    x0
}

/// Bivariate standard normal density with correlation `rho`; zero when
/// either coordinate is infinite.
pub fn pdf2(x: f64, y: f64, rho: f64) -> f64 {
    if x.is_infinite() || y.is_infinite() {
        return 0.0;
    }
    let om = 1.0 - rho * rho;
    (-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * om)).exp() / (2.0 * std::f64::consts::PI * om.sqrt())
}
