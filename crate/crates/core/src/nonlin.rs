//! Memoryless power-series device models and intermodulation arithmetic.
//!
//! A passive tag's diode is modeled as a truncated power series: the output
//! voltage is `sum_n a_n * v^n` of the input voltage `v`. Driving such a
//! device with multiple tones produces intermodulation products at integer
//! combinations of the tone frequencies; the relative strength of those
//! products is the device's fingerprint. This module provides:
//!
//! * [`DeviceModel`] — a named coefficient vector with evaluation, waveform
//!   response, random perturbation (to mint distinguishable device clones),
//!   and a bandpass envelope response for constellation studies,
//! * closed-form small-signal quantities ([`fundamental_amplitude`],
//!   [`fundamental_gain`], [`im3_amplitude`]) used as analytic cross-checks
//!   of the FFT pipeline,
//! * [`im_products`] — the frequency lattice `|m*f1 ± n*f2|` with product
//!   order `m + n`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from device-model construction and perturbation.
#[derive(Debug, Error, PartialEq)]
pub enum NonlinError {
    /// A device model needs at least one coefficient.
    #[error("device model '{device_id}' has no coefficients")]
    EmptyCoefficients { device_id: String },
    /// Coefficients must be finite numbers.
    #[error("device model '{device_id}' has a non-finite coefficient at degree {degree}")]
    NonFiniteCoefficient { device_id: String, degree: usize },
    /// Perturbation fractions are relative and must lie in `[0, 1)`.
    #[error("perturbation fraction {fraction} outside [0, 1)")]
    InvalidPerturbationFraction { fraction: f64 },
    /// The intermodulation lattice needs two distinct positive tones.
    #[error("invalid tone pair: f1 = {f1_hz} Hz, f2 = {f2_hz} Hz (need 0 < f1 < f2)")]
    InvalidTonePair { f1_hz: f64, f2_hz: f64 },
    /// Product order zero would make the lattice empty.
    #[error("max intermodulation order must be at least 1, got {max_order}")]
    InvalidMaxOrder { max_order: usize },
}

/// A power-series device: output is `sum_n coefficients[n] * input^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceModel {
    /// Human-readable identifier carried through datasets and reports.
    pub device_id: String,
    /// Power-series coefficients, index = degree (index 0 is the DC term).
    pub coefficients: Vec<f64>,
}

impl DeviceModel {
    /// Creates a device model, validating the coefficient vector.
    pub fn new(device_id: impl Into<String>, coefficients: Vec<f64>) -> Result<Self, NonlinError> {
        let device_id = device_id.into();
        if coefficients.is_empty() {
            return Err(NonlinError::EmptyCoefficients { device_id });
        }
        if let Some(degree) = coefficients.iter().position(|c| !c.is_finite()) {
            return Err(NonlinError::NonFiniteCoefficient { device_id, degree });
        }
        Ok(Self {
            device_id,
            coefficients,
        })
    }

    /// The odd-order compressive amplifier curve used as the base tag model:
    /// gain 1 at small drive, graceful gain compression toward full scale.
    /// Coefficients: a1 = 1, a3 = -0.333, a5 = 0.133, a7 = -0.05, a9 = 0.022,
    /// all even-order terms zero.
    pub fn reference_amplifier(device_id: impl Into<String>) -> Self {
        Self {
            device_id: device_id.into(),
            coefficients: vec![0.0, 1.0, 0.0, -0.333, 0.0, 0.133, 0.0, -0.05, 0.0, 0.022],
        }
    }

    /// Coefficient of the given degree, zero when beyond the series length.
    pub fn coefficient(&self, degree: usize) -> f64 {
        self.coefficients.get(degree).copied().unwrap_or(0.0)
    }

    /// Evaluates the power series at `v`.
    pub fn eval(&self, v: f64) -> f64 {
        eval_polynomial(&self.coefficients, v)
    }

    /// Applies the device pointwise to a waveform (memoryless response).
    pub fn respond(&self, waveform: &[f64]) -> Vec<f64> {
        waveform.iter().map(|&v| self.eval(v)).collect()
    }

    /// Mint a perturbed clone: every coefficient of degree >= `min_degree`
    /// is scaled by `1 + u` with `u` uniform in `[-fraction, +fraction]`,
    /// drawn deterministically from `seed`. Lower-degree coefficients (and
    /// structural zeros, since the perturbation is multiplicative) are
    /// untouched, so clones share small-signal gain and differ only in their
    /// distortion signature.
    pub fn perturbed(
        &self,
        new_id: impl Into<String>,
        fraction: f64,
        min_degree: usize,
        seed: u64,
    ) -> Result<DeviceModel, NonlinError> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(NonlinError::InvalidPerturbationFraction { fraction });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coefficients = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(degree, &a)| {
                if degree < min_degree {
                    a
                } else {
                    // Draw for every eligible degree, including zeros, so the
                    // stream position of each coefficient is independent of
                    // the values of the others.
                    let u: f64 = rng.gen_range(-fraction..=fraction);
                    a * (1.0 + u)
                }
            })
            .collect();
        DeviceModel::new(new_id, coefficients)
    }

    /// Bandpass envelope amplitude: the output envelope when the device is
    /// driven by a narrowband signal of envelope `r`, keeping only in-band
    /// (odd-order) contributions. Each odd degree `n` contributes
    /// `a_n * C(n, (n-1)/2) / 2^(n-1) * r^n`; even-order products land out of
    /// band and are removed by the bandpass assumption.
    pub fn envelope_amplitude(&self, r: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .skip(1)
            .step_by(2)
            .map(|(n, &a)| a * odd_envelope_coefficient(n) * r.powi(n as i32))
            .sum()
    }
}

/// `C(n, (n-1)/2) / 2^(n-1)` for odd `n`: the fraction of the n-th-order
/// product that falls back on the carrier under narrowband excitation.
fn odd_envelope_coefficient(n: usize) -> f64 {
    debug_assert!(n % 2 == 1, "envelope coefficients exist for odd orders");
    let k = (n - 1) / 2;
    let mut binom = 1.0;
    for i in 0..k {
        binom = binom * (n - i) as f64 / (i + 1) as f64;
    }
    binom / 2f64.powi(n as i32 - 1)
}

/// Evaluates `sum_n coefficients[n] * v^n` by Horner's rule.
pub fn eval_polynomial(coefficients: &[f64], v: f64) -> f64 {
    coefficients
        .iter()
        .rev()
        .fold(0.0, |acc, &c| acc * v + c)
}

/// Amplitude of the fundamental when a cubic-limited device (`a1`, `a3`)
/// is driven by a single tone of amplitude `amplitude`:
/// `a1 * A + (3/4) * a3 * A^3`.
pub fn fundamental_amplitude(a1: f64, a3: f64, amplitude: f64) -> f64 {
    a1 * amplitude + 0.75 * a3 * amplitude.powi(3)
}

/// Effective gain at the fundamental for the same device:
/// `a1 + (3/4) * a3 * A^2`. Multiplying by `amplitude` recovers
/// [`fundamental_amplitude`].
pub fn fundamental_gain(a1: f64, a3: f64, amplitude: f64) -> f64 {
    a1 + 0.75 * a3 * amplitude * amplitude
}

/// Closed-form amplitude of the third-order intermodulation products
/// (`2*f1 - f2` and `2*f2 - f1`) of a cubic device driven by tones of
/// amplitudes `a` (at the doubled tone) and `b`: `(3/4) * |a3| * a^2 * b`.
pub fn im3_amplitude(a3: f64, a: f64, b: f64) -> f64 {
    0.75 * a3.abs() * a * a * b
}

/// One entry of the intermodulation lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ImProduct {
    /// Absolute product frequency `|m*f1 ± n*f2|` in Hz.
    pub frequency_hz: f64,
    /// Multiplier of `f1` in the representation of lowest order.
    pub m: usize,
    /// Multiplier of `f2` in the representation of lowest order.
    pub n: usize,
    /// Product order `m + n`.
    pub order: usize,
}

/// Enumerates intermodulation product frequencies `|m*f1 ± n*f2|` up to
/// `max_order = m + n`, deduplicated by frequency keeping the lowest-order
/// representation, sorted by ascending frequency. Harmonics (`n = 0` or
/// `m = 0`) are included; DC coincidences are kept at frequency zero.
pub fn im_products(
    f1_hz: f64,
    f2_hz: f64,
    max_order: usize,
) -> Result<Vec<ImProduct>, NonlinError> {
    if !(f1_hz > 0.0 && f2_hz > f1_hz && f1_hz.is_finite() && f2_hz.is_finite()) {
        return Err(NonlinError::InvalidTonePair { f1_hz, f2_hz });
    }
    if max_order == 0 {
        return Err(NonlinError::InvalidMaxOrder { max_order });
    }
    let mut products: Vec<ImProduct> = Vec::new();
    for m in 0..=max_order {
        for n in 0..=(max_order - m) {
            if m + n == 0 {
                continue;
            }
            for sign in [1.0, -1.0] {
                if n == 0 && sign < 0.0 {
                    continue; // |m*f1 - 0| duplicates the positive branch
                }
                let frequency_hz = (m as f64 * f1_hz + sign * n as f64 * f2_hz).abs();
                let order = m + n;
                match products.iter_mut().find(|p| p.frequency_hz == frequency_hz) {
                    Some(existing) => {
                        if order < existing.order {
                            *existing = ImProduct {
                                frequency_hz,
                                m,
                                n,
                                order,
                            };
                        }
                    }
                    None => products.push(ImProduct {
                        frequency_hz,
                        m,
                        n,
                        order,
                    }),
                }
            }
        }
    }
    products.sort_by(|a, b| a.frequency_hz.partial_cmp(&b.frequency_hz).unwrap());
    Ok(products)
}
