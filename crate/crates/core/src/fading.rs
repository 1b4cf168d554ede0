//! Rayleigh block-fading statistics.
//!
//! All four link power gains are exponential. The modified SNIRs
//! `alpha = s11/s21` and `beta = s22/s12` are ratios of independent
//! exponentials, and the exact SNIR of either link under constant powers is
//! `q1*x1 / (q2*x2 + q3)` for exponential `x1, x2`; [`RatioLaw`] gives the
//! closed-form law of that quantity.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Mean channel gains and receiver noise power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainModel {
    mean_s11: f64,
    mean_s22: f64,
    mean_s12: f64,
    mean_s21: f64,
    noise_power: f64,
    alpha_scale: f64,
    beta_scale: f64,
}

impl GainModel {
    pub fn new(
        mean_s11: f64,
        mean_s22: f64,
        mean_s12: f64,
        mean_s21: f64,
        noise_power: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("mean_s11", mean_s11),
            ("mean_s22", mean_s22),
            ("mean_s12", mean_s12),
            ("mean_s21", mean_s21),
            ("noise_power", noise_power),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(GainModel {
            mean_s11,
            mean_s22,
            mean_s12,
            mean_s21,
            noise_power,
            alpha_scale: mean_s11 / mean_s21,
            beta_scale: mean_s22 / mean_s12,
        })
    }

    /// Means derived from transmitter geometry.
    pub fn from_geometry(geometry: &PathLossGeometry, noise_power: f64) -> Result<Self> {
        let m = pathloss_means(geometry)?;
        GainModel::new(m.s11, m.s22, m.s12, m.s21, noise_power)
    }

    pub fn mean_s11(&self) -> f64 {
        self.mean_s11
    }
    pub fn mean_s22(&self) -> f64 {
        self.mean_s22
    }
    pub fn mean_s12(&self) -> f64 {
        self.mean_s12
    }
    pub fn mean_s21(&self) -> f64 {
        self.mean_s21
    }
    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }
    /// `A = s11_mean / s21_mean`, the scale of `alpha`.
    pub fn alpha_scale(&self) -> f64 {
        self.alpha_scale
    }
    /// `B = s22_mean / s12_mean`, the scale of `beta`.
    pub fn beta_scale(&self) -> f64 {
        self.beta_scale
    }

    /// `P(alpha * beta <= t)`.
    pub fn product_cdf(&self, t: f64) -> f64 {
        normalized_product_cdf(t / (self.alpha_scale * self.beta_scale))
    }

    /// Inverse of [`GainModel::product_cdf`].
    pub fn product_quantile(&self, q: f64) -> f64 {
        self.alpha_scale * self.beta_scale * normalized_product_quantile(q)
    }

    /// `P(beta / alpha <= w)`.
    pub fn radial_cdf(&self, w: f64) -> f64 {
        normalized_product_cdf(w * self.alpha_scale / self.beta_scale)
    }

    /// Inverse of [`GainModel::radial_cdf`].
    pub fn radial_quantile(&self, q: f64) -> f64 {
        self.beta_scale / self.alpha_scale * normalized_product_quantile(q)
    }
}

/// CDF of `rho = alpha * beta / (A * B)`:
/// `G(r) = r * (r - 1 - ln r) / (r - 1)^2`.
///
/// `ln(alpha/A)` and `ln(beta/B)` are symmetric about zero, so the same law
/// also describes `(beta/alpha) * (A/B)`.
pub fn normalized_product_cdf(r: f64) -> f64 {
    if !(r > 0.0) {
        return 0.0;
    }
    if r.is_infinite() {
        return 1.0;
    }
    let d = r - 1.0;
    if d.abs() < 1e-3 {
        // r (d - ln(1+d)) / d^2 expanded about d = 0.
        return r * (0.5 - d / 3.0 + d * d / 4.0 - d * d * d / 5.0);
    }
    let g = (r / d) * ((d - r.ln()) / d);
    g.clamp(0.0, 1.0)
}

/// Inverse of [`normalized_product_cdf`], by bisection on `ln r`.
pub fn normalized_product_quantile(q: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    if q >= 1.0 {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (-700.0f64, 700.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normalized_product_cdf(mid.exp()) < q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// Law of `y = q1*x1 / (q2*x2 + q3)` for independent exponential `x1, x2`
/// with means `mean1, mean2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioLaw {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub mean1: f64,
    pub mean2: f64,
}

impl RatioLaw {
    pub fn new(q1: f64, q2: f64, q3: f64, mean1: f64, mean2: f64) -> Result<Self> {
        if !(q2 > 0.0) {
            return Err(Error::domain(format!("q2 must be positive, got {q2}")));
        }
        Self::link(q1, q2, q3, mean1, mean2)
    }

    /// Like [`RatioLaw::new`] but admits `q2 = 0`, i.e. an interference-free
    /// link whose SNIR is plain exponential.
    pub(crate) fn link(q1: f64, q2: f64, q3: f64, mean1: f64, mean2: f64) -> Result<Self> {
        if !(q1 > 0.0) || !(mean1 > 0.0) || !(mean2 > 0.0) {
            return Err(Error::domain(format!(
                "ratio law needs q1, mean1, mean2 > 0 (got {q1}, {mean1}, {mean2})"
            )));
        }
        if !(q2 >= 0.0) || !(q3 >= 0.0) {
            return Err(Error::domain(format!(
                "ratio law needs q2, q3 >= 0 (got {q2}, {q3})"
            )));
        }
        Ok(RatioLaw {
            q1,
            q2,
            q3,
            mean1,
            mean2,
        })
    }

    pub fn pdf(&self, y0: f64) -> f64 {
        if y0 < 0.0 {
            return 0.0;
        }
        let (i1, i2) = (1.0 / self.mean1, 1.0 / self.mean2);
        let first = i1 * i2 * self.q3 / (i2 * self.q1 + i1 * y0 * self.q2);
        let denom = i2 + i1 * y0 * self.q2 / self.q1;
        let second = self.q2 / self.q1 * i2 * i1 / (denom * denom);
        (first + second) * (-i1 * y0 * self.q3 / self.q1).exp()
    }

    pub fn cdf(&self, y0: f64) -> f64 {
        1.0 - self.ccdf(y0)
    }

    /// `P(y > y0)`, accurate in the upper tail.
    pub fn ccdf(&self, y0: f64) -> f64 {
        if y0 <= 0.0 {
            return 1.0;
        }
        if y0.is_infinite() {
            return 0.0;
        }
        let (i1, i2) = (1.0 / self.mean1, 1.0 / self.mean2);
        (-i1 * y0 * self.q3 / self.q1).exp() * i2 / (i2 + i1 * y0 * self.q2 / self.q1)
    }

    pub fn sample(&self, x1: f64, x2: f64) -> f64 {
        self.q1 * x1 / (self.q2 * x2 + self.q3)
    }
}

/// Density of `q1*x1 / (q2*x2 + q3)` at `y0`.
pub fn ratio_pdf(y0: f64, q1: f64, q2: f64, q3: f64, mean1: f64, mean2: f64) -> Result<f64> {
    if !(y0 >= 0.0) {
        return Err(Error::domain(format!("y0 must be nonnegative, got {y0}")));
    }
    Ok(RatioLaw::new(q1, q2, q3, mean1, mean2)?.pdf(y0))
}

/// CDF of `q1*x1 / (q2*x2 + q3)` at `y0`.
pub fn ratio_cdf(y0: f64, q1: f64, q2: f64, q3: f64, mean1: f64, mean2: f64) -> Result<f64> {
    if !(y0 >= 0.0) {
        return Err(Error::domain(format!("y0 must be nonnegative, got {y0}")));
    }
    Ok(RatioLaw::new(q1, q2, q3, mean1, mean2)?.cdf(y0))
}

/// Large-scale path loss with transceivers on the corners of a rectangle:
/// direct distances 1, cross distances `sqrt(1 + d^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossGeometry {
    pub s0: f64,
    pub exponent: f64,
    pub tx_separation: f64,
}

impl PathLossGeometry {
    pub fn new(s0: f64, exponent: f64, tx_separation: f64) -> Result<Self> {
        if !(s0 > 0.0) || !(exponent > 0.0) || !(tx_separation >= 0.0) {
            return Err(Error::domain(format!(
                "path loss needs s0 > 0, exponent > 0, separation >= 0 (got {s0}, {exponent}, {tx_separation})"
            )));
        }
        Ok(PathLossGeometry {
            s0,
            exponent,
            tx_separation,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanGains {
    pub s11: f64,
    pub s22: f64,
    pub s12: f64,
    pub s21: f64,
}

pub fn pathloss_means(geometry: &PathLossGeometry) -> Result<MeanGains> {
    let g = PathLossGeometry::new(geometry.s0, geometry.exponent, geometry.tx_separation)?;
    let d2 = g.tx_separation * g.tx_separation;
    let cross = g.s0 / (1.0 + d2).powf(g.exponent / 2.0);
    Ok(MeanGains {
        s11: g.s0,
        s22: g.s0,
        s12: cross,
        s21: cross,
    })
}

/// Gains of one fading block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockGains {
    pub s11: f64,
    pub s12: f64,
    pub s21: f64,
    pub s22: f64,
}

impl BlockGains {
    pub fn alpha(&self) -> f64 {
        self.s11 / self.s21
    }
    pub fn beta(&self) -> f64 {
        self.s22 / self.s12
    }
}

/// Independent substream per gain. Each draw consumes exactly one `u64`
/// (two ChaCha words), so any block can be reached by seeking.
#[derive(Debug, Clone)]
pub struct GainStreams {
    s11: ChaCha8Rng,
    s12: ChaCha8Rng,
    s21: ChaCha8Rng,
    s22: ChaCha8Rng,
}

const STREAM_S11: u64 = 0x11;
const STREAM_S12: u64 = 0x12;
const STREAM_S21: u64 = 0x21;
const STREAM_S22: u64 = 0x22;

impl GainStreams {
    pub fn new(seed: u64) -> Self {
        Self::at_block(seed, 0)
    }

    /// Streams positioned at the start of block `block`.
    pub fn at_block(seed: u64, block: u64) -> Self {
        let make = |id: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng.set_word_pos(2 * block as u128);
            rng
        };
        GainStreams {
            s11: make(STREAM_S11),
            s12: make(STREAM_S12),
            s21: make(STREAM_S21),
            s22: make(STREAM_S22),
        }
    }
}

/// Exponential draw with the given mean by inversion of one `u64`.
fn exponential(rng: &mut ChaCha8Rng, mean: f64) -> f64 {
    let u = ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    -mean * u.ln()
}

pub fn sample_block_gains(model: &GainModel, streams: &mut GainStreams) -> BlockGains {
    BlockGains {
        s11: exponential(&mut streams.s11, model.mean_s11),
        s12: exponential(&mut streams.s12, model.mean_s12),
        s21: exponential(&mut streams.s21, model.mean_s21),
        s22: exponential(&mut streams.s22, model.mean_s22),
    }
}
