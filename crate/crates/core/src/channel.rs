//! Complex AWGN channel and the amplitude (Rician) channel law.
//!
//! The noise convention throughout the crate is that `n0` is the variance of
//! the complex noise sample, so each quadrature component has variance
//! `n0 / 2`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Result};

/// A complex baseband sample (channel input or output).
pub type ComplexSample = Complex64;

/// Arguments at or above this value use the large-argument expansion.
pub const BESSEL_CROSSOVER: f64 = 30.0;

/// Peak/average power constraints and noise level of the CAWGN channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub n0: f64,
    pub peak_m: f64,
    pub avg_power: f64,
}

impl ChannelParams {
    pub fn new(n0: f64, peak_m: f64, avg_power: f64) -> Result<Self> {
        let params = Self {
            n0,
            peak_m,
            avg_power,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n0.is_finite() && self.n0 > 0.0) {
            return domain(format!("n0 must be positive, got {}", self.n0));
        }
        if !(self.peak_m.is_finite() && self.peak_m > 0.0) {
            return domain(format!("peak must be positive, got {}", self.peak_m));
        }
        if !(self.avg_power > 0.0 && self.avg_power <= self.peak_m * self.peak_m) {
            return domain(format!(
                "average power {} must lie in (0, peak^2 = {}]",
                self.avg_power,
                self.peak_m * self.peak_m
            ));
        }
        Ok(())
    }

    /// Standard deviation of one noise component.
    pub fn sigma(&self) -> f64 {
        (self.n0 / 2.0).sqrt()
    }
}

/// Natural log of the modified Bessel function `I0(z)` for `z >= 0`.
///
/// Below [`BESSEL_CROSSOVER`] the power series is summed directly. Above it
/// the exponential growth is factored out analytically,
/// `ln I0(z) = z - ln(2 pi z)/2 + ln(1 + 1/(8z) + 9/(2 (8z)^2) + ...)`,
/// so nothing overflows for arguments in the thousands.
pub fn log_bessel_i0(z: f64) -> Result<f64> {
    if !z.is_finite() || z < 0.0 {
        return domain(format!("log_bessel_i0 needs a finite z >= 0, got {z}"));
    }
    if z < BESSEL_CROSSOVER {
        Ok(series_i0(z).ln())
    } else {
        Ok(z - 0.5 * (2.0 * PI * z).ln() + hankel_correction(z).ln())
    }
}

fn series_i0(z: f64) -> f64 {
    let q = 0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term < sum * 1e-17 {
            return sum;
        }
        k += 1.0;
    }
}

// Sum of ((2k-1)!!)^2 / (k! (8z)^k); the terms keep shrinking well past
// k = 10 for z >= 30.
fn hankel_correction(z: f64) -> f64 {
    let x = 1.0 / (8.0 * z);
    let mut coeff = 1.0;
    let mut pow = 1.0;
    let mut sum = 1.0;
    for k in 1..=12 {
        let odd = (2 * k - 1) as f64;
        coeff *= odd * odd / k as f64;
        pow *= x;
        sum += coeff * pow;
    }
    sum
}

/// Log of the Rician amplitude density `f(r | a)` of `|Y|` given `|X| = a`.
///
/// Returns `-inf` at `r = 0`, where the density vanishes.
pub fn rician_log_density(r: f64, a: f64, n0: f64) -> Result<f64> {
    if !(r.is_finite() && r >= 0.0 && a.is_finite() && a >= 0.0) {
        return domain(format!("rician density needs r, a >= 0 (r={r}, a={a})"));
    }
    if !(n0.is_finite() && n0 > 0.0) {
        return domain(format!("n0 must be positive, got {n0}"));
    }
    if r == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let bessel = log_bessel_i0(2.0 * r * a / n0)?;
    Ok((2.0 * r / n0).ln() - (r * r + a * a) / n0 + bessel)
}

/// Passes `x` through the channel: adds circular Gaussian noise of total
/// variance `params.n0`.
pub fn add_noise<R: Rng + ?Sized>(
    x: ComplexSample,
    params: &ChannelParams,
    rng: &mut R,
) -> ComplexSample {
    add_noise_n0(x, params.n0, rng)
}

pub(crate) fn add_noise_n0<R: Rng + ?Sized>(
    x: ComplexSample,
    n0: f64,
    rng: &mut R,
) -> ComplexSample {
    let sigma = (n0 / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    x + ComplexSample::new(sigma * re, sigma * im)
}
