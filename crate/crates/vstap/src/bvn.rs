//! Bivariate normal orthant probabilities, moments over truncated
//! rectangles, and the correlation of two piecewise-linearly transformed
//! jointly Gaussian variables.
//!
//! The orthant kernel is a port of Genz's Gauss-Legendre scheme for the
//! bivariate normal CDF (TVPACK's BVND), accurate to about 1e-15.

use crate::error::{Error, Result};
use crate::gauss;
use crate::marginal::PiecewiseTransform;
use std::f64::consts::PI;

/// Regions with less than this probability mass cannot support stable
/// normalized moments.
pub const DEGENERATE_PROB_FLOOR: f64 = 1e-14;

// Gauss-Legendre half-rules (weight, negative abscissa); the symmetric
// counterpart is generated in the loops.
const GL6: [(f64, f64); 3] = [
    (0.1713244923791705, -0.9324695142031522),
    (0.3607615730481384, -0.6612093864662647),
    (0.4679139345726904, -0.2386191860831970),
];
const GL12: [(f64, f64); 6] = [
    (0.04717533638651177, -0.9815606342467191),
    (0.1069393259953183, -0.9041172563704750),
    (0.1600783285433464, -0.7699026741943050),
    (0.2031674267230659, -0.5873179542866171),
    (0.2334925365383547, -0.3678314989981802),
    (0.2491470458134029, -0.1252334085114692),
];
const GL20: [(f64, f64); 10] = [
    (0.01761400713915212, -0.9931285991850949),
    (0.04060142980038694, -0.9639719272779138),
    (0.06267204833410906, -0.9122344282513259),
    (0.08327674157670475, -0.8391169718222188),
    (0.1019301198172404, -0.7463319064601508),
    (0.1181945319615184, -0.6360536807265150),
    (0.1316886384491766, -0.5108670019508271),
    (0.1420961093183821, -0.3737060887154196),
    (0.1491729864726037, -0.2277858511416451),
    (0.1527533871307259, -0.07652652113349733),
];

fn quad_for(r: f64) -> &'static [(f64, f64)] {
    let a = r.abs();
    if a < 0.3 {
        &GL6
    } else if a < 0.75 {
        &GL12
    } else {
        &GL20
    }
}

/// P(Z1 > h, Z2 > k) for finite h, k and |r| < 1.
fn bvnd_finite(dh: f64, dk: f64, r: f64) -> f64 {
    let quad = quad_for(r);
    let h = dh;
    let mut k = dk;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        if r != 0.0 {
            let hs = (h * h + k * k) / 2.0;
            let asr = r.asin();
            for &(w, x) in quad {
                for is in [-1.0f64, 1.0] {
                    let sn = (asr * (is * x + 1.0) / 2.0).sin();
                    bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
                }
            }
            bvn = bvn * asr / (4.0 * PI);
        }
        bvn += gauss::cdf(-h) * gauss::cdf(-k);
    } else {
        // tail expansion around |r| = 1 with quadrature correction
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if r.abs() < 1.0 {
            let a_s = (1.0 - r) * (1.0 + r);
            let mut a = a_s.sqrt();
            let bs = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 16.0;
            let mut asr = -(bs / a_s + hk) / 2.0;
            if asr > -100.0 {
                bvn = a
                    * asr.exp()
                    * (1.0 - c * (bs - a_s) * (1.0 - d * bs / 5.0) / 3.0
                        + c * d * a_s * a_s / 5.0);
            }
            if -hk < 100.0 {
                let b = bs.sqrt();
                bvn -= (-hk / 2.0).exp()
                    * gauss::SQRT_2PI
                    * gauss::cdf(-b / a)
                    * b
                    * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
            }
            a /= 2.0;
            for &(w, x) in quad {
                for is in [-1.0f64, 1.0] {
                    let xs = (a * (is * x + 1.0)) * (a * (is * x + 1.0));
                    let rs = (1.0 - xs).sqrt();
                    asr = -(bs / xs + hk) / 2.0;
                    if asr > -100.0 {
                        let sp = 1.0 + c * xs * (1.0 + d * xs);
                        let ep = (-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs;
                        bvn += a * w * asr.exp() * (ep - sp);
                    }
                }
            }
            bvn = -bvn / (2.0 * PI);
        }
        if r > 0.0 {
            bvn += gauss::cdf(-h.max(k));
        } else {
            bvn = -bvn;
            if k > h {
                bvn += gauss::cdf(k) - gauss::cdf(h);
            }
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// P(Z1 > h, Z2 > k); bounds may be infinite, the trivial cases reduce to
/// univariate tail probabilities.
fn bvn_upper(h: f64, k: f64, rho: f64) -> f64 {
    if (h.is_infinite() && h > 0.0) || (k.is_infinite() && k > 0.0) {
        return 0.0;
    }
    if h.is_infinite() {
        return gauss::cdf(-k);
    }
    if k.is_infinite() {
        return gauss::cdf(-h);
    }
    bvnd_finite(h, k, rho)
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidInput(format!(
            "correlation {rho} must lie strictly inside (-1, 1)"
        )));
    }
    Ok(())
}

/// Upper-orthant probability P(Z1 > h, Z2 > k) for a standard bivariate
/// normal pair with correlation `rho`. Bounds may be +-infinity.
pub fn bvn_upper_prob(h: f64, k: f64, rho: f64) -> Result<f64> {
    if h.is_nan() || k.is_nan() {
        return Err(Error::InvalidInput("orthant bound is NaN".into()));
    }
    check_rho(rho)?;
    Ok(bvn_upper(h, k, rho))
}

/// P(Z2 > b | Z1 = a) for finite a; b may be infinite.
fn q_cond(a: f64, b: f64, rho: f64) -> f64 {
    if b.is_infinite() {
        return if b > 0.0 { 0.0 } else { 1.0 };
    }
    gauss::cdf(-(b - rho * a) / (1.0 - rho * rho).sqrt())
}

/// An axis-aligned rectangle (x_lo, x_hi] x (y_lo, y_hi]; bounds may be
/// infinite but each pair must be strictly ordered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Rect {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Result<Self> {
        if [x_lo, x_hi, y_lo, y_hi].iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidInput("rectangle bound is NaN".into()));
        }
        if !(x_lo < x_hi) || !(y_lo < y_hi) {
            return Err(Error::InvalidInput(format!(
                "rectangle bounds must be strictly ordered: x ({x_lo}, {x_hi}], y ({y_lo}, {y_hi}]"
            )));
        }
        Ok(Self {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
        })
    }

    pub fn full_plane() -> Self {
        Self {
            x_lo: f64::NEG_INFINITY,
            x_hi: f64::INFINITY,
            y_lo: f64::NEG_INFINITY,
            y_hi: f64::INFINITY,
        }
    }

    pub fn x_bounds(&self) -> (f64, f64) {
        (self.x_lo, self.x_hi)
    }

    pub fn y_bounds(&self) -> (f64, f64) {
        (self.y_lo, self.y_hi)
    }
}

/// P((Z1, Z2) in rect) by four-corner differencing of the orthant kernel.
pub fn rect_prob(rect: &Rect, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    let p = bvn_upper(rect.x_lo, rect.y_lo, rho) - bvn_upper(rect.x_hi, rect.y_lo, rho)
        - bvn_upper(rect.x_lo, rect.y_hi, rho)
        + bvn_upper(rect.x_hi, rect.y_hi, rho);
    Ok(p.clamp(0.0, 1.0))
}

/// Moments of a standard bivariate normal pair conditioned on a rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedMoments {
    /// Mass of the rectangle.
    pub prob: f64,
    /// E[Z1 | rect]
    pub mean_x: f64,
    /// E[Z2 | rect]
    pub mean_y: f64,
    /// E[Z1 Z2 | rect]
    pub cross: f64,
}

/// First and cross moments of (Z1, Z2) restricted to a rectangle, normalized
/// by the rectangle's mass. Rectangles with mass below
/// [`DEGENERATE_PROB_FLOOR`] are rejected.
pub fn trunc_moments(rect: &Rect, rho: f64) -> Result<TruncatedMoments> {
    check_rho(rho)?;
    let corners = [
        (rect.x_lo, rect.y_lo, 1.0),
        (rect.x_lo, rect.y_hi, -1.0),
        (rect.x_hi, rect.y_lo, -1.0),
        (rect.x_hi, rect.y_hi, 1.0),
    ];
    let mut p = 0.0;
    let mut m10 = 0.0;
    let mut m01 = 0.0;
    let mut m11 = 0.0;
    for (xu, yv, s) in corners {
        let l = bvn_upper(xu, yv, rho);
        let fx = gauss::pdf(xu);
        let fy = gauss::pdf(yv);
        // q factors always appear multiplied by a density that vanishes at
        // infinite corners, so they are zeroed there rather than evaluated
        let qx = if xu.is_finite() { q_cond(xu, yv, rho) } else { 0.0 };
        let qy = if yv.is_finite() { q_cond(yv, xu, rho) } else { 0.0 };
        p += s * l;
        m10 += s * (fx * qx + rho * fy * qy);
        m01 += s * (fy * qy + rho * fx * qx);
        m11 += s * (rho * l
            + (1.0 - rho * rho) * gauss::pdf2(xu, yv, rho)
            + rho * gauss::x_pdf(xu) * qx
            + rho * gauss::x_pdf(yv) * qy);
    }
    if p < DEGENERATE_PROB_FLOOR {
        return Err(Error::DegenerateRegion(format!(
            "rectangle mass {p:.3e} below {DEGENERATE_PROB_FLOOR:.0e}"
        )));
    }
    Ok(TruncatedMoments {
        prob: p,
        mean_x: m10 / p,
        mean_y: m01 / p,
        cross: m11 / p,
    })
}

/// Corner tables over the (m+1) x (m+1) grid spanned by a transform's
/// breakpoints padded with +-infinity. Entry (i, j) holds the unnormalized
/// upper-orthant quantities at (c_i, c_j): mass, E[Z1; .], E[Z2; .],
/// E[Z1 Z2; .]. Cell values follow by four-corner differencing.
struct CornerTables {
    nc: usize,
    l: Vec<f64>,
    t1: Vec<f64>,
    t2: Vec<f64>,
    t3: Vec<f64>,
}

impl CornerTables {
    fn cell(&self, table: &[f64], k: usize, l: usize) -> f64 {
        let nc = self.nc;
        table[k * nc + l] - table[(k + 1) * nc + l] - table[k * nc + l + 1]
            + table[(k + 1) * nc + l + 1]
    }
}

fn psi_tables(breakpoints: &[f64], rho: f64) -> CornerTables {
    let nc = breakpoints.len() + 2;
    let mut c = Vec::with_capacity(nc);
    c.push(f64::NEG_INFINITY);
    c.extend_from_slice(breakpoints);
    c.push(f64::INFINITY);
    let mut l = vec![0.0; nc * nc];
    let mut t1 = vec![0.0; nc * nc];
    let mut t2 = vec![0.0; nc * nc];
    let mut t3 = vec![0.0; nc * nc];
    let omr2 = 1.0 - rho * rho;
    for i in 0..nc {
        for j in 0..nc {
            let (ck, cl) = (c[i], c[j]);
            let lv = bvn_upper(ck, cl, rho);
            let fk = gauss::pdf(ck);
            let fl = gauss::pdf(cl);
            let qkl = if ck.is_finite() { q_cond(ck, cl, rho) } else { 0.0 };
            let qlk = if cl.is_finite() { q_cond(cl, ck, rho) } else { 0.0 };
            let idx = i * nc + j;
            l[idx] = lv;
            t1[idx] = fk * qkl + rho * fl * qlk;
            t2[idx] = fl * qlk + rho * fk * qkl;
            t3[idx] = rho * lv
                + omr2 * gauss::pdf2(ck, cl, rho)
                + rho * gauss::x_pdf(ck) * qkl
                + rho * gauss::x_pdf(cl) * qlk;
        }
    }
    CornerTables { nc, l, t1, t2, t3 }
}

/// Mean and standard deviation of T(Z) for Z standard normal and T a
/// piecewise-linear transform, from closed-form truncated Gaussian moments.
pub fn transform_moments(t: &PiecewiseTransform) -> (f64, f64) {
    let m = t.segment_count();
    let bp = t.breakpoints();
    let mut mean = 0.0;
    let mut second = 0.0;
    for k in 0..m {
        let lo = if k == 0 { f64::NEG_INFINITY } else { bp[k - 1] };
        let hi = if k + 1 == m { f64::INFINITY } else { bp[k] };
        let p = gauss::cdf(hi) - gauss::cdf(lo);
        let mz = gauss::pdf(lo) - gauss::pdf(hi);
        let sz = p + gauss::x_pdf(lo) - gauss::x_pdf(hi);
        let (c0, c1) = (t.intercepts()[k], t.slopes()[k]);
        mean += c0 * p + c1 * mz;
        second += c0 * c0 * p + 2.0 * c0 * c1 * mz + c1 * c1 * sz;
    }
    let var = (second - mean * mean).max(0.0);
    (mean, var.sqrt())
}

/// Correlation of (T1(Z1), T2(Z2)) where (Z1, Z2) is standard bivariate
/// normal with correlation `rho` and T1, T2 are piecewise-linear transforms
/// sharing one breakpoint grid.
///
/// The expectation decomposes exactly over grid cells into closed-form
/// truncated moments, so the result is deterministic and smooth in `rho`.
pub fn psi_eval(t1: &PiecewiseTransform, t2: &PiecewiseTransform, rho: f64) -> Result<f64> {
    if t1.breakpoints() != t2.breakpoints() {
        return Err(Error::InvalidInput(
            "transforms must share identical breakpoints".into(),
        ));
    }
    check_rho(rho)?;
    let (mu1, sd1) = transform_moments(t1);
    let (mu2, sd2) = transform_moments(t2);
    if sd1 <= 0.0 || sd2 <= 0.0 {
        return Err(Error::DegenerateInput(
            "transform is constant under the Gaussian law; correlation undefined".into(),
        ));
    }
    let tables = psi_tables(t1.breakpoints(), rho);
    let m = t1.segment_count();
    let mut e_xy = 0.0;
    for k in 0..m {
        let (a0, a1) = (t1.intercepts()[k], t1.slopes()[k]);
        for l in 0..m {
            let (b0, b1) = (t2.intercepts()[l], t2.slopes()[l]);
            let p = tables.cell(&tables.l, k, l);
            let mx = tables.cell(&tables.t1, k, l);
            let my = tables.cell(&tables.t2, k, l);
            let mxy = tables.cell(&tables.t3, k, l);
            e_xy += a0 * b0 * p + a1 * b0 * mx + a0 * b1 * my + a1 * b1 * mxy;
        }
    }
    Ok(((e_xy - mu1 * mu2) / (sd1 * sd2)).clamp(-1.0, 1.0))
}
