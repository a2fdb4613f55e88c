//! Two-tone synthesis, channel effects, and FFT spectrum estimation.
//!
//! The interrogation waveform is a pair of equal-spaced tones placed on FFT
//! bin centers (coherent sampling), so peak magnitudes can be read off single
//! bins without window scalloping. The receive path applies an amplitude
//! scale, a sparse FIR multipath filter, and seeded Gaussian noise; spectra
//! are one-sided magnitude estimates in dB relative to full scale, averaged
//! over consecutive segments.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use thiserror::Error;

/// Magnitudes below this floor are clamped; it bounds the dynamic range of
/// reported spectra and keeps log scaling away from -inf on empty bins.
pub const DB_FLOOR: f64 = -160.0;

/// Errors from synthesis, channel application, and spectrum estimation.
#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    /// Tone frequencies must satisfy `0 < f1 < f2`.
    #[error("invalid tone pair: f1 = {f1_hz} Hz, f2 = {f2_hz} Hz (need 0 < f1 < f2)")]
    InvalidTonePair { f1_hz: f64, f2_hz: f64 },
    /// Sampling keeps no information above the Nyquist frequency.
    #[error("tone at {frequency_hz} Hz is at or beyond Nyquist ({nyquist_hz} Hz)")]
    ToneBeyondNyquist { frequency_hz: f64, nyquist_hz: f64 },
    /// Tone amplitudes must be non-negative.
    #[error("tone amplitude {value} is negative")]
    NegativeAmplitude { value: f64 },
    /// The combined excitation must fit within full scale.
    #[error("combined tone amplitude {total} exceeds full scale 1.0")]
    AmplitudeOverflow { total: f64 },
    /// Sample rate must be a positive finite number.
    #[error("invalid sample rate {value}")]
    InvalidSampleRate { value: f64 },
    /// An empty waveform has no spectrum.
    #[error("waveform is empty")]
    EmptyWaveform,
    /// Spectrum estimation needs at least one full segment.
    #[error("waveform of {len} samples is shorter than one FFT segment of {nfft}")]
    WaveformTooShort { len: usize, nfft: usize },
    /// The FFT length must be even (one-sided spectra need a Nyquist bin)
    /// and at least two.
    #[error("invalid FFT length {nfft}: need an even length >= 2")]
    InvalidNfft { nfft: usize },
    /// The channel FIR needs at least one tap.
    #[error("channel has no FIR taps")]
    NoChannelTaps,
    /// Channel amplitude scale must be positive.
    #[error("channel amplitude scale {value} must be positive")]
    InvalidChannelScale { value: f64 },
    /// Noise level cannot be negative.
    #[error("noise standard deviation {value} is negative")]
    NegativeNoise { value: f64 },
    /// Constellation distortion needs symbols and a positive drive level.
    #[error("constellation drive level {value} must be positive")]
    InvalidDrive { value: f64 },
    /// An empty symbol set cannot be distorted.
    #[error("constellation symbol set is empty")]
    EmptyConstellation,
}

/// Two-tone excitation plan: frequencies, amplitudes, and sampling grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPlan {
    /// Lower tone frequency in Hz.
    pub f1_hz: f64,
    /// Upper tone frequency in Hz.
    pub f2_hz: f64,
    /// Amplitude of the lower tone, full scale = 1.0.
    pub amp1: f64,
    /// Amplitude of the upper tone, full scale = 1.0.
    pub amp2: f64,
    /// Sample rate in Hz.
    pub sample_rate_hz: f64,
    /// Number of samples to synthesize.
    pub num_samples: usize,
}

impl Default for BandPlan {
    /// Frequency-scaled default plan: 19.5 and 20.5 kHz tones sampled at
    /// 1.024 MHz. With a 4096-point FFT the bin width is 250 Hz, both tones
    /// sit exactly on bin centers (bins 78 and 82), and the third-order
    /// products land on bins 74 and 86.
    fn default() -> Self {
        Self {
            f1_hz: 19_500.0,
            f2_hz: 20_500.0,
            amp1: 0.4,
            amp2: 0.4,
            sample_rate_hz: 1_024_000.0,
            num_samples: 16_384,
        }
    }
}

impl BandPlan {
    /// RMS of the clean excitation, `sqrt((amp1^2 + amp2^2) / 2)`.
    pub fn reference_rms(&self) -> f64 {
        (0.5 * (self.amp1 * self.amp1 + self.amp2 * self.amp2)).sqrt()
    }

    fn validate(&self) -> Result<(), SynthError> {
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(SynthError::InvalidSampleRate {
                value: self.sample_rate_hz,
            });
        }
        if !(self.f1_hz > 0.0 && self.f2_hz > self.f1_hz) {
            return Err(SynthError::InvalidTonePair {
                f1_hz: self.f1_hz,
                f2_hz: self.f2_hz,
            });
        }
        let nyquist = self.sample_rate_hz / 2.0;
        for f in [self.f1_hz, self.f2_hz] {
            if f >= nyquist {
                return Err(SynthError::ToneBeyondNyquist {
                    frequency_hz: f,
                    nyquist_hz: nyquist,
                });
            }
        }
        for a in [self.amp1, self.amp2] {
            if a < 0.0 {
                return Err(SynthError::NegativeAmplitude { value: a });
            }
        }
        if self.amp1 + self.amp2 > 1.0 {
            return Err(SynthError::AmplitudeOverflow {
                total: self.amp1 + self.amp2,
            });
        }
        if self.num_samples == 0 {
            return Err(SynthError::EmptyWaveform);
        }
        Ok(())
    }
}

/// Synthesizes `amp1*cos(2*pi*f1*t) + amp2*cos(2*pi*f2*t)` on the plan's
/// sampling grid. Rejects tones at or beyond Nyquist and excitations that
/// would clip full scale.
pub fn synthesize_two_tone(plan: &BandPlan) -> Result<Vec<f64>, SynthError> {
    plan.validate()?;
    let w1 = 2.0 * std::f64::consts::PI * plan.f1_hz / plan.sample_rate_hz;
    let w2 = 2.0 * std::f64::consts::PI * plan.f2_hz / plan.sample_rate_hz;
    Ok((0..plan.num_samples)
        .map(|i| {
            let t = i as f64;
            plan.amp1 * (w1 * t).cos() + plan.amp2 * (w2 * t).cos()
        })
        .collect())
}

/// Receive-path model: amplitude scale, sparse FIR multipath, seeded noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    /// Free-space amplitude scale applied to the filtered signal.
    pub amplitude_scale: f64,
    /// FIR taps as `(sample lag, coefficient)`; the identity channel is
    /// `[(0, 1.0)]`.
    pub taps: Vec<(usize, f64)>,
    /// Standard deviation of added white Gaussian noise (0 disables it).
    pub noise_std: f64,
    /// Seed of the noise stream; same seed, same noise.
    pub noise_seed: u64,
}

impl Channel {
    /// A noiseless, unscaled, single-tap channel.
    pub fn identity() -> Self {
        Self {
            amplitude_scale: 1.0,
            taps: vec![(0, 1.0)],
            noise_std: 0.0,
            noise_seed: 0,
        }
    }
}

/// Noise standard deviation that yields the requested SNR against a signal
/// of the given mean power: `sigma = sqrt(power / 10^(snr_db / 10))`.
pub fn noise_std_for_snr(signal_power: f64, snr_db: f64) -> f64 {
    (signal_power / 10f64.powf(snr_db / 10.0)).sqrt()
}

/// Applies the channel: `y[i] = scale * sum_j c_j * w[i - lag_j] + n[i]`,
/// treating samples before the start as zero. With `noise_std = 0`,
/// `taps = [(0, 1.0)]`, and `amplitude_scale = s`, the output is exactly
/// `s * w` sample for sample.
pub fn apply_channel(waveform: &[f64], channel: &Channel) -> Result<Vec<f64>, SynthError> {
    if waveform.is_empty() {
        return Err(SynthError::EmptyWaveform);
    }
    if channel.taps.is_empty() {
        return Err(SynthError::NoChannelTaps);
    }
    if !(channel.amplitude_scale > 0.0 && channel.amplitude_scale.is_finite()) {
        return Err(SynthError::InvalidChannelScale {
            value: channel.amplitude_scale,
        });
    }
    if channel.noise_std < 0.0 {
        return Err(SynthError::NegativeNoise {
            value: channel.noise_std,
        });
    }
    let mut out = vec![0.0; waveform.len()];
    for &(lag, coef) in &channel.taps {
        for i in lag..waveform.len() {
            out[i] += coef * waveform[i - lag];
        }
    }
    for y in &mut out {
        *y *= channel.amplitude_scale;
    }
    if channel.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(channel.noise_seed);
        let normal = Normal::new(0.0, channel.noise_std).expect("validated noise std");
        for y in &mut out {
            *y += normal.sample(&mut rng);
        }
    }
    Ok(out)
}

/// Analysis window applied per FFT segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    /// No weighting; exact amplitude and Parseval behavior for coherent tones.
    Rectangular,
    /// Periodic Hann; for a tone on bin center the response is confined to
    /// the center bin (full amplitude) and its two neighbors (half), with
    /// exact nulls beyond.
    Hann,
}

impl Window {
    fn coefficients(self, nfft: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; nfft],
            Window::Hann => (0..nfft)
                .map(|i| {
                    let x = 2.0 * std::f64::consts::PI * i as f64 / nfft as f64;
                    0.5 * (1.0 - x.cos())
                })
                .collect(),
        }
    }
}

/// Spectrum estimation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumParams {
    /// FFT segment length; the waveform is split into `len / nfft` segments.
    pub nfft: usize,
    /// Analysis window.
    pub window: Window,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        Self {
            nfft: 4096,
            window: Window::Hann,
        }
    }
}

/// One-sided magnitude spectrum in dB relative to full scale.
///
/// A full-scale coherent tone (amplitude 1.0 on a bin center) reads 0 dB at
/// its bin. Magnitudes are averaged linearly across segments before the dB
/// conversion, and clamped at [`DB_FLOOR`].
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Bin magnitudes in dBFS, length `nfft / 2 + 1` (DC through Nyquist).
    pub magnitudes_db: Vec<f64>,
    /// Width of one bin in Hz.
    pub bin_hz: f64,
    /// Sample rate the waveform was captured at.
    pub sample_rate_hz: f64,
    /// FFT segment length used.
    pub nfft: usize,
    /// Number of averaged segments.
    pub num_segments: usize,
    /// Window applied per segment.
    pub window: Window,
    /// Level of full scale in dB (0 = amplitudes are relative to 1.0).
    pub reference_level_db: f64,
}

impl Spectrum {
    /// Nearest bin index for a frequency, if within DC..Nyquist.
    pub fn bin_of(&self, frequency_hz: f64) -> Option<usize> {
        if frequency_hz < 0.0 {
            return None;
        }
        let bin = (frequency_hz / self.bin_hz).round() as usize;
        (bin < self.magnitudes_db.len()).then_some(bin)
    }

    /// Center frequency of a bin in Hz.
    pub fn frequency_of(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz
    }

    /// Magnitude in dB at the bin nearest to `frequency_hz`.
    pub fn magnitude_db_at(&self, frequency_hz: f64) -> Option<f64> {
        self.bin_of(frequency_hz).map(|b| self.magnitudes_db[b])
    }

    /// Mean-square signal power reconstructed from the one-sided spectrum:
    /// `mag_0^2 + mag_Nyq^2 + 0.5 * sum(interior mag_k^2)`. Under a
    /// rectangular window this equals the time-domain mean square of the
    /// waveform (Parseval); window weighting redistributes power, so only
    /// use this check with [`Window::Rectangular`].
    pub fn total_power(&self) -> f64 {
        let linear: Vec<f64> = self
            .magnitudes_db
            .iter()
            .map(|&db| 10f64.powf(db / 20.0))
            .collect();
        let last = linear.len() - 1;
        let mut power = linear[0] * linear[0] + linear[last] * linear[last];
        for &m in &linear[1..last] {
            power += 0.5 * m * m;
        }
        power
    }
}

thread_local! {
    // rustfft caches plans per planner; one planner per thread avoids
    // re-deriving twiddle tables on every call.
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Estimates a one-sided magnitude spectrum by segment-averaged FFT.
///
/// The waveform is split into `floor(len / nfft)` consecutive segments; each
/// is windowed and transformed, magnitudes are normalized by the window's
/// coherent gain (so a bin-centered tone of amplitude `A` reads `A`), and
/// averaged across segments in linear magnitude.
pub fn compute_spectrum(
    waveform: &[f64],
    sample_rate_hz: f64,
    params: &SpectrumParams,
) -> Result<Spectrum, SynthError> {
    if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
        return Err(SynthError::InvalidSampleRate {
            value: sample_rate_hz,
        });
    }
    let nfft = params.nfft;
    if nfft < 2 || nfft % 2 != 0 {
        return Err(SynthError::InvalidNfft { nfft });
    }
    if waveform.is_empty() {
        return Err(SynthError::EmptyWaveform);
    }
    if waveform.len() < nfft {
        return Err(SynthError::WaveformTooShort {
            len: waveform.len(),
            nfft,
        });
    }
    let num_segments = waveform.len() / nfft;
    let window = params.window.coefficients(nfft);
    let coherent_gain: f64 = window.iter().sum();
    let half = nfft / 2;
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(nfft));
    let mut avg = vec![0.0; half + 1];
    let mut buf = vec![Complex::new(0.0, 0.0); nfft];
    for seg in 0..num_segments {
        let sl = &waveform[seg * nfft..(seg + 1) * nfft];
        for (b, (&x, &w)) in buf.iter_mut().zip(sl.iter().zip(&window)) {
            *b = Complex::new(x * w, 0.0);
        }
        fft.process(&mut buf);
        for (k, a) in avg.iter_mut().enumerate() {
            // One-sided amplitude: interior bins carry both halves of the
            // conjugate-symmetric spectrum, DC and Nyquist only one.
            let scale = if k == 0 || k == half { 1.0 } else { 2.0 };
            *a += scale * buf[k].norm() / coherent_gain;
        }
    }
    let inv = 1.0 / num_segments as f64;
    let magnitudes_db = avg
        .iter()
        .map(|&m| (20.0 * (m * inv).log10()).max(DB_FLOOR))
        .collect();
    Ok(Spectrum {
        magnitudes_db,
        bin_hz: sample_rate_hz / nfft as f64,
        sample_rate_hz,
        nfft,
        num_segments,
        window: params.window,
        reference_level_db: 0.0,
    })
}

/// The 16 ideal 16-QAM symbols, scaled to unit mean power. Three envelope
/// rings: four inner points, eight mid points, four corner points.
pub fn qam16_symbols() -> Vec<(f64, f64)> {
    let norm = 10f64.sqrt();
    let levels = [-3.0, -1.0, 1.0, 3.0];
    let mut symbols = Vec::with_capacity(16);
    for &re in &levels {
        for &im in &levels {
            symbols.push((re / norm, im / norm));
        }
    }
    symbols
}

/// Passes a constellation through the device's bandpass envelope response at
/// the given drive level, then renormalizes to the input's mean power.
///
/// Each symbol keeps its phase; its envelope `r = |s| * drive` maps to the
/// device's envelope output, so outer rings compress more than inner rings.
/// The final renormalization models the receiver's average-power scaling and
/// leaves only the relative (shape) distortion.
pub fn distort_constellation(
    device: &crate::nonlin::DeviceModel,
    symbols: &[(f64, f64)],
    drive: f64,
) -> Result<Vec<(f64, f64)>, SynthError> {
    if symbols.is_empty() {
        return Err(SynthError::EmptyConstellation);
    }
    if !(drive > 0.0 && drive.is_finite()) {
        return Err(SynthError::InvalidDrive { value: drive });
    }
    let mut out: Vec<(f64, f64)> = symbols
        .iter()
        .map(|&(re, im)| {
            let r = (re * re + im * im).sqrt();
            if r == 0.0 {
                return (0.0, 0.0);
            }
            let gain = device.envelope_amplitude(r * drive) / (r * drive);
            (re * gain, im * gain)
        })
        .collect();
    let power_in: f64 =
        symbols.iter().map(|&(re, im)| re * re + im * im).sum::<f64>() / symbols.len() as f64;
    let power_out: f64 =
        out.iter().map(|&(re, im)| re * re + im * im).sum::<f64>() / out.len() as f64;
    if power_out > 0.0 {
        let scale = (power_in / power_out).sqrt();
        for (re, im) in &mut out {
            *re *= scale;
            *im *= scale;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlin::{im3_amplitude, DeviceModel};

    fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
        assert!((a - b).abs() <= tol, "{what}: {a} vs {b} (tol {tol})");
    }

    fn single_tone_plan(amp: f64) -> BandPlan {
        BandPlan {
            amp1: amp,
            amp2: 0.0,
            ..BandPlan::default()
        }
    }

    #[test]
    fn default_plan_is_coherent() {
        let plan = BandPlan::default();
        let bin_hz = plan.sample_rate_hz / 4096.0;
        assert_close(bin_hz, 250.0, 1e-12, "bin width");
        assert_close(plan.f1_hz / bin_hz, 78.0, 1e-12, "f1 on bin center");
        assert_close(plan.f2_hz / bin_hz, 82.0, 1e-12, "f2 on bin center");
    }

    #[test]
    fn coherent_tone_reads_its_amplitude_on_one_bin() {
        let plan = single_tone_plan(0.5);
        let w = synthesize_two_tone(&plan).unwrap();
        let spec = compute_spectrum(&w, plan.sample_rate_hz, &SpectrumParams::default()).unwrap();
        let peak = spec.magnitude_db_at(plan.f1_hz).unwrap();
        // 20*log10(0.5) frozen.
        assert_close(peak, -6.020_599_913_279_624, 1e-9, "peak level");
        let bin = spec.bin_of(plan.f1_hz).unwrap();
        // Periodic Hann: neighbors at exactly half amplitude, nulls beyond.
        assert_close(
            spec.magnitudes_db[bin + 1],
            peak - 6.020_599_913_279_624,
            1e-9,
            "first neighbor at half amplitude",
        );
        assert!(
            spec.magnitudes_db[bin + 2] < -150.0,
            "second neighbor should be at the floor, got {}",
            spec.magnitudes_db[bin + 2]
        );
    }

    #[test]
    fn segment_count_and_rejects() {
        let plan = BandPlan::default();
        let w = synthesize_two_tone(&plan).unwrap();
        let spec = compute_spectrum(&w, plan.sample_rate_hz, &SpectrumParams::default()).unwrap();
        assert_eq!(spec.num_segments, 4, "16384 samples over 4096-point FFTs");
        assert_eq!(spec.magnitudes_db.len(), 2049, "one-sided bin count");

        let short = vec![0.0; 100];
        assert!(matches!(
            compute_spectrum(&short, 1024.0, &SpectrumParams::default()),
            Err(SynthError::WaveformTooShort { .. })
        ));
        assert!(matches!(
            compute_spectrum(
                &w,
                plan.sample_rate_hz,
                &SpectrumParams {
                    nfft: 7,
                    window: Window::Hann
                }
            ),
            Err(SynthError::InvalidNfft { nfft: 7 })
        ));
    }

    #[test]
    fn tone_beyond_nyquist_is_rejected() {
        let plan = BandPlan {
            f2_hz: 512_000.0, // exactly Nyquist for 1.024 MHz
            ..BandPlan::default()
        };
        assert!(matches!(
            synthesize_two_tone(&plan),
            Err(SynthError::ToneBeyondNyquist { .. })
        ));
    }

    #[test]
    fn overfull_excitation_is_rejected() {
        let plan = BandPlan {
            amp1: 0.6,
            amp2: 0.5,
            ..BandPlan::default()
        };
        assert!(matches!(
            synthesize_two_tone(&plan),
            Err(SynthError::AmplitudeOverflow { .. })
        ));
    }

    #[test]
    fn parseval_holds_under_rectangular_window() {
        let plan = BandPlan::default();
        let w = synthesize_two_tone(&plan).unwrap();
        let params = SpectrumParams {
            nfft: 4096,
            window: Window::Rectangular,
        };
        let spec = compute_spectrum(&w, plan.sample_rate_hz, &params).unwrap();
        let time_power = w.iter().map(|x| x * x).sum::<f64>() / w.len() as f64;
        let freq_power = spec.total_power();
        assert!(
            (freq_power - time_power).abs() <= 1e-3 * time_power,
            "Parseval mismatch: time {time_power} vs freq {freq_power}"
        );
        // Two tones at 0.4: mean power (0.4^2 + 0.4^2)/2 = 0.16.
        assert_close(time_power, 0.16, 1e-12, "two-tone mean power");
    }

    #[test]
    fn channel_identity_scale_halves_exactly() {
        let w = vec![1.0, -0.5, 0.25, 0.125];
        let ch = Channel {
            amplitude_scale: 0.5,
            ..Channel::identity()
        };
        let y = apply_channel(&w, &ch).unwrap();
        assert_eq!(y, vec![0.5, -0.25, 0.125, 0.0625], "exact halving");
    }

    #[test]
    fn channel_fir_delays_by_tap_lag() {
        let w = vec![1.0, 2.0, 3.0, 4.0];
        let ch = Channel {
            taps: vec![(1, 1.0)],
            ..Channel::identity()
        };
        let y = apply_channel(&w, &ch).unwrap();
        assert_eq!(y, vec![0.0, 1.0, 2.0, 3.0], "one-sample delay");
    }

    #[test]
    fn channel_noise_is_seeded_and_calibrated() {
        let w = vec![0.0; 65_536];
        let ch = Channel {
            noise_std: 0.1,
            noise_seed: 7,
            ..Channel::identity()
        };
        let a = apply_channel(&w, &ch).unwrap();
        let b = apply_channel(&w, &ch).unwrap();
        assert_eq!(a, b, "same seed must reproduce the same noise");
        let other = apply_channel(
            &w,
            &Channel {
                noise_seed: 8,
                ..ch.clone()
            },
        )
        .unwrap();
        assert_ne!(a, other, "different seeds must differ");
        let measured = (a.iter().map(|x| x * x).sum::<f64>() / a.len() as f64).sqrt();
        assert!(
            (measured - 0.1).abs() <= 0.005,
            "sample std {measured} should be within 5% of 0.1"
        );
    }

    #[test]
    fn channel_rejects_invalid_parameters() {
        let w = vec![1.0];
        assert!(matches!(
            apply_channel(
                &w,
                &Channel {
                    taps: vec![],
                    ..Channel::identity()
                }
            ),
            Err(SynthError::NoChannelTaps)
        ));
        assert!(matches!(
            apply_channel(
                &w,
                &Channel {
                    amplitude_scale: 0.0,
                    ..Channel::identity()
                }
            ),
            Err(SynthError::InvalidChannelScale { .. })
        ));
        assert!(matches!(
            apply_channel(
                &w,
                &Channel {
                    noise_std: -1.0,
                    ..Channel::identity()
                }
            ),
            Err(SynthError::NegativeNoise { .. })
        ));
    }

    #[test]
    fn noise_std_for_snr_matches_definition() {
        // signal power 0.25, SNR 30 dB -> sigma = sqrt(0.25 / 1000).
        assert_close(
            noise_std_for_snr(0.25, 30.0),
            0.015_811_388_300_841_896,
            1e-15,
            "sigma from SNR",
        );
    }

    #[test]
    fn cubic_device_produces_third_order_products_at_closed_form_level() {
        // Pure cubic device: the spectrum must show products at 2f1-f2 and
        // 2f2-f1 whose amplitude matches (3/4)|a3| A^2 B with coherent
        // sampling to numerical accuracy.
        let plan = BandPlan::default();
        let device = DeviceModel::new("cubic", vec![0.0, 0.0, 0.0, -0.333]).unwrap();
        let w = synthesize_two_tone(&plan).unwrap();
        let y = device.respond(&w);
        let spec = compute_spectrum(&y, plan.sample_rate_hz, &SpectrumParams::default()).unwrap();
        let expected_db = 20.0 * im3_amplitude(-0.333, plan.amp1, plan.amp2).log10();
        let low = spec
            .magnitude_db_at(2.0 * plan.f1_hz - plan.f2_hz)
            .unwrap();
        let high = spec
            .magnitude_db_at(2.0 * plan.f2_hz - plan.f1_hz)
            .unwrap();
        assert_close(low, expected_db, 1e-6, "lower third-order product");
        assert_close(high, expected_db, 1e-6, "upper third-order product");
    }

    #[test]
    fn cubic_fundamental_includes_cross_compression() {
        // At f1 a cubic device contributes a3*(3A^3/4 + 3AB^2/2).
        let plan = BandPlan::default();
        let a3 = -0.333;
        let device = DeviceModel::new("cubic", vec![0.0, 0.0, 0.0, a3]).unwrap();
        let w = synthesize_two_tone(&plan).unwrap();
        let y = device.respond(&w);
        let spec = compute_spectrum(&y, plan.sample_rate_hz, &SpectrumParams::default()).unwrap();
        let (a, b) = (plan.amp1, plan.amp2);
        let expected = (a3 * (0.75 * a.powi(3) + 1.5 * a * b * b)).abs();
        let got = spec.magnitude_db_at(plan.f1_hz).unwrap();
        assert_close(got, 20.0 * expected.log10(), 1e-6, "fundamental of cubic");
    }

    #[test]
    fn constellation_outer_ring_compresses_more() {
        let device = DeviceModel::reference_amplifier("ref");
        let symbols = qam16_symbols();
        let power_in: f64 =
            symbols.iter().map(|(re, im)| re * re + im * im).sum::<f64>() / 16.0;
        assert_close(power_in, 1.0, 1e-12, "unit mean power in");

        let out = distort_constellation(&device, &symbols, 0.8).unwrap();
        let power_out: f64 = out.iter().map(|(re, im)| re * re + im * im).sum::<f64>() / 16.0;
        assert_close(power_out, 1.0, 1e-12, "mean power preserved");

        // Relative radial change per ring: corners must shrink relative to
        // the inner ring after power renormalization.
        let ring_gain = |sel: fn(f64) -> bool| -> f64 {
            let mut gains = Vec::new();
            for (s, o) in symbols.iter().zip(&out) {
                let r_in = (s.0 * s.0 + s.1 * s.1).sqrt();
                if sel(r_in) {
                    let r_out = (o.0 * o.0 + o.1 * o.1).sqrt();
                    gains.push(r_out / r_in);
                }
            }
            gains.iter().sum::<f64>() / gains.len() as f64
        };
        let inner = ring_gain(|r| r < 0.5); // |(1,1)|/sqrt(10) = 0.447
        let corner = ring_gain(|r| r > 1.2); // |(3,3)|/sqrt(10) = 1.342
        assert!(
            corner < inner,
            "corner ring gain {corner} should be below inner ring gain {inner}"
        );
    }

    #[test]
    fn constellation_rejects_bad_inputs() {
        let device = DeviceModel::reference_amplifier("ref");
        assert!(matches!(
            distort_constellation(&device, &[], 0.5),
            Err(SynthError::EmptyConstellation)
        ));
        assert!(matches!(
            distort_constellation(&device, &qam16_symbols(), 0.0),
            Err(SynthError::InvalidDrive { .. })
        ));
    }
}
