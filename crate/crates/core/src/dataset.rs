//! Scenario simulation and dataset preparation.
//!
//! A measurement campaign places two (or more) tag devices at grid positions,
//! interrogates each with the two-tone excitation, and records the spectral
//! peak features of the returned signal. Three scenarios are modeled:
//!
//! * `static` — every capture at the reference position P1,
//! * `small` — five positions jittered within a centimeter or so of P1,
//! * `large` — five spread-out positions on a 60 x 60 cm grid.
//!
//! Per position the receive path gets a free-space amplitude scale
//! (`d_ref / d` from a fixed transceiver), a sparse multipath FIR whose
//! strength grows with displacement from P1, and per-capture Gaussian noise.
//! The receiver auto-ranges (AGC): the captured waveform is renormalized to
//! the reference RMS before the FFT, as a real acquisition chain would, so
//! position expresses itself as multipath tilt and SNR change rather than a
//! bulk level shift.
//!
//! The module also provides the dataset utilities the study needs: stratified
//! train/test splitting, seeded per-class subsampling, K-means labeling with
//! a deterministic cluster convention, and SMOTE oversampling.

use crate::features::{extract_features_in_band, FeatureError};
use crate::nonlin::DeviceModel;
use crate::seed::SeedPath;
use crate::synth::{
    apply_channel, compute_spectrum, noise_std_for_snr, synthesize_two_tone, BandPlan, Channel,
    Spectrum, SpectrumParams, SynthError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

/// Tag positions in cm on the measurement grid: P1 through P5. P1 is the
/// reference position all perturbations are measured against.
pub const GRID_POSITIONS: [(f64, f64); 5] = [
    (30.0, 20.0),
    (43.0, 45.0),
    (17.0, 45.0),
    (30.0, 55.0),
    (53.0, 53.0),
];

/// Fixed transceiver location in the same frame, 50 cm in front of the grid
/// edge. Its distance to P1 (exactly 70 cm) is the free-space reference.
pub const TRANSCEIVER_POSITION: (f64, f64) = (30.0, -50.0);

/// Displacement from P1 (in cm) at which multipath reaches full strength.
const MULTIPATH_SATURATION_CM: f64 = 20.0;

/// Errors from scenario generation and dataset preparation.
#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    /// At least one device is required.
    #[error("no devices given")]
    NoDevices,
    /// Device identifiers key the provenance records and must be unique.
    #[error("duplicate device id '{device_id}'")]
    DuplicateDeviceId { device_id: String },
    /// Each position needs at least one capture.
    #[error("samples per position must be at least 1")]
    NoSamples,
    /// Averaging needs at least one capture.
    #[error("average count must be at least 1")]
    NoAverages,
    /// The split fraction must leave both sides non-empty.
    #[error("test fraction {value} outside (0, 1)")]
    InvalidTestFraction { value: f64 },
    /// A class is too small for the requested operation.
    #[error("class {class} has only {size} samples, need at least {need}")]
    ClassTooSmall {
        class: usize,
        size: usize,
        need: usize,
    },
    /// Requested more rows per class than the source provides.
    #[error("class {class} has {have} rows, cannot draw {want}")]
    SubsampleTooLarge {
        class: usize,
        have: usize,
        want: usize,
    },
    /// Clustering needs at least as many rows as clusters.
    #[error("k-means with k = {k} needs at least {k} rows, got {rows}")]
    TooFewRows { k: usize, rows: usize },
    /// Clustering with zero clusters is meaningless.
    #[error("k-means needs k >= 1")]
    ZeroClusters,
    /// Rows must agree on dimension.
    #[error("row {row} has {got} features, expected {expected}")]
    RaggedRows {
        row: usize,
        got: usize,
        expected: usize,
    },
    /// Input rows are required.
    #[error("input is empty")]
    EmptyInput,
    /// Labels must pair with rows.
    #[error("{rows} rows but {labels} labels")]
    LabelMismatch { rows: usize, labels: usize },
    /// Propagated synthesis error.
    #[error(transparent)]
    Synth(#[from] SynthError),
    /// Propagated feature-extraction error.
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// The three measurement scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// All captures at the reference position P1.
    Static,
    /// Five positions jittered within `jitter_cm` of P1.
    Small,
    /// The five spread-out grid positions P1..P5.
    Large,
}

impl Scenario {
    /// Stable lowercase name used in seeds, file names, and reports.
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Static => "static",
            Scenario::Small => "small",
            Scenario::Large => "large",
        }
    }

    /// All scenarios in canonical order.
    pub fn all() -> [Scenario; 3] {
        [Scenario::Static, Scenario::Small, Scenario::Large]
    }

    /// Tag positions for this scenario. Jittered positions are drawn
    /// deterministically from the master seed.
    pub fn positions(self, jitter_cm: f64, master_seed: u64) -> Vec<(f64, f64)> {
        match self {
            Scenario::Static => vec![GRID_POSITIONS[0]],
            Scenario::Small => (0..GRID_POSITIONS.len())
                .map(|i| {
                    let seed = SeedPath::new(master_seed)
                        .with_str("jitter")
                        .with_u64(i as u64)
                        .seed();
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let (x, y) = GRID_POSITIONS[0];
                    (
                        x + rng.gen_range(-jitter_cm..=jitter_cm),
                        y + rng.gen_range(-jitter_cm..=jitter_cm),
                    )
                })
                .collect(),
            Scenario::Large => GRID_POSITIONS.to_vec(),
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "static" => Ok(Scenario::Static),
            "small" => Ok(Scenario::Small),
            "large" => Ok(Scenario::Large),
            other => Err(format!(
                "unknown scenario '{other}' (expected static, small, or large)"
            )),
        }
    }
}

/// Simulation parameters shared by all scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Two-tone excitation plan.
    pub band: BandPlan,
    /// FFT length and window for spectrum estimation.
    pub spectrum: SpectrumParams,
    /// Receiver SNR in dB, referenced to the clean excitation power at P1.
    pub snr_db: f64,
    /// Multipath tap magnitude at full displacement (0 disables multipath).
    pub multipath_strength: f64,
    /// Sample lag of the first echo; taps sit at lags 0, D, and 2D.
    pub multipath_delay: usize,
    /// Receiver auto-ranging: renormalize captured RMS to the reference RMS.
    pub agc: bool,
    /// Number of spectral peaks per feature vector.
    pub peak_count: usize,
    /// Minimum peak separation in bins.
    pub min_separation_bins: usize,
    /// Receiver analysis band in Hz; peaks are only searched inside it.
    /// Mirrors the IF bandpass of a real capture chain and keeps the
    /// out-of-band products near the harmonics out of the feature vector.
    pub analysis_band_hz: (f64, f64),
    /// Captures per device per position.
    pub samples_per_position: usize,
    /// Position jitter half-range for the small scenario, in cm.
    pub jitter_cm: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            band: BandPlan::default(),
            spectrum: SpectrumParams::default(),
            snr_db: 30.0,
            multipath_strength: 0.015,
            multipath_delay: 64,
            agc: true,
            peak_count: 4,
            min_separation_bins: 2,
            analysis_band_hz: (17_000.0, 23_000.0),
            samples_per_position: 1001,
            jitter_cm: 1.0,
        }
    }
}

/// Where one sample came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleInfo {
    /// Index of the device in the generator's device list (ground truth).
    pub device_index: usize,
    /// Device identifier.
    pub device_id: String,
    /// Scenario the sample belongs to.
    pub scenario: Scenario,
    /// Position index within the scenario.
    pub position_index: usize,
    /// Tag position in cm.
    pub position_cm: (f64, f64),
    /// Capture index at that position.
    pub sample_index: usize,
}

/// A generated dataset: feature rows, ground-truth device labels, provenance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    /// Peak-magnitude feature vectors, one row per capture.
    pub features: Vec<Vec<f64>>,
    /// Ground-truth device index per row.
    pub labels: Vec<usize>,
    /// Provenance per row.
    pub info: Vec<SampleInfo>,
}

impl Dataset {
    /// Number of rows.
    pub fn len(&self) -> usize {
        self.features.len()
    }

    /// True when the dataset has no rows.
    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            info: indices.iter().map(|&i| self.info[i].clone()).collect(),
        }
    }

    /// Concatenation of several datasets, preserving order.
    pub fn concat(parts: &[&Dataset]) -> Dataset {
        let mut out = Dataset::default();
        for p in parts {
            out.features.extend(p.features.iter().cloned());
            out.labels.extend(p.labels.iter().copied());
            out.info.extend(p.info.iter().cloned());
        }
        out
    }
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Receive-path description for one position: free-space scale and FIR taps.
fn position_channel(
    params: &SimParams,
    scenario: Scenario,
    position_index: usize,
    position: (f64, f64),
    master_seed: u64,
) -> (f64, Vec<(usize, f64)>) {
    let d_ref = distance(GRID_POSITIONS[0], TRANSCEIVER_POSITION);
    let scale = d_ref / distance(position, TRANSCEIVER_POSITION);
    let displacement = distance(position, GRID_POSITIONS[0]);
    let strength =
        params.multipath_strength * (displacement / MULTIPATH_SATURATION_CM).min(1.0);
    if strength == 0.0 {
        return (scale, vec![(0, 1.0)]);
    }
    let seed = SeedPath::new(master_seed)
        .with_str("multipath")
        .with_str(scenario.name())
        .with_u64(position_index as u64)
        .seed();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = params.multipath_delay.max(1);
    let c1 = strength * rng.gen_range(-1.0..=1.0);
    let c2 = strength * rng.gen_range(-1.0..=1.0);
    (scale, vec![(0, 1.0), (d, c1), (2 * d, c2)])
}

/// Receiver auto-ranging: rescale the waveform to the given RMS.
fn apply_agc(waveform: &mut [f64], target_rms: f64) {
    let rms = (waveform.iter().map(|x| x * x).sum::<f64>() / waveform.len() as f64).sqrt();
    if rms > 0.0 {
        let g = target_rms / rms;
        for x in waveform.iter_mut() {
            *x *= g;
        }
    }
}

fn check_devices(devices: &[DeviceModel]) -> Result<(), DatasetError> {
    if devices.is_empty() {
        return Err(DatasetError::NoDevices);
    }
    for (i, d) in devices.iter().enumerate() {
        if devices[..i].iter().any(|e| e.device_id == d.device_id) {
            return Err(DatasetError::DuplicateDeviceId {
                device_id: d.device_id.clone(),
            });
        }
    }
    Ok(())
}

/// Simulates one capture and returns its spectrum.
fn capture_spectrum(
    tag_output: &[f64],
    params: &SimParams,
    scale: f64,
    taps: &[(usize, f64)],
    noise_std: f64,
    noise_seed: u64,
) -> Result<Spectrum, SynthError> {
    let channel = Channel {
        amplitude_scale: scale,
        taps: taps.to_vec(),
        noise_std,
        noise_seed,
    };
    let mut received = apply_channel(tag_output, &channel)?;
    if params.agc {
        apply_agc(&mut received, params.band.reference_rms());
    }
    compute_spectrum(&received, params.band.sample_rate_hz, &params.spectrum)
}

/// Generates the dataset for one scenario: every device at every scenario
/// position, `samples_per_position` captures each.
///
/// Rows are ordered position-major, then device, then capture index, and the
/// result is bit-identical for identical inputs: every random stream (jitter,
/// multipath, noise) is derived from the master seed and the sample's
/// coordinates, never from global state or thread scheduling.
pub fn generate_scenario(
    devices: &[DeviceModel],
    scenario: Scenario,
    params: &SimParams,
    master_seed: u64,
) -> Result<Dataset, DatasetError> {
    let positions = scenario.positions(params.jitter_cm, master_seed);
    generate_at_positions(devices, scenario, &positions, params, master_seed)
}

/// [`generate_scenario`] with an explicit position list, for measurement
/// campaigns that place the tags somewhere other than the scenario's
/// standard layout. Seeds are keyed by position index, so the standard
/// layout passed explicitly reproduces [`generate_scenario`] exactly.
pub fn generate_at_positions(
    devices: &[DeviceModel],
    scenario: Scenario,
    positions: &[(f64, f64)],
    params: &SimParams,
    master_seed: u64,
) -> Result<Dataset, DatasetError> {
    check_devices(devices)?;
    if params.samples_per_position == 0 {
        return Err(DatasetError::NoSamples);
    }
    if positions.is_empty() {
        return Err(DatasetError::EmptyInput);
    }
    let excitation = synthesize_two_tone(&params.band)?;
    let tag_outputs: Vec<Vec<f64>> = devices.iter().map(|d| d.respond(&excitation)).collect();
    let noise_std = noise_std_for_snr(
        params.band.reference_rms().powi(2),
        params.snr_db,
    );
    let channels: Vec<(f64, Vec<(usize, f64)>)> = positions
        .iter()
        .enumerate()
        .map(|(i, &p)| position_channel(params, scenario, i, p, master_seed))
        .collect();

    // Flat row coordinates in deterministic order.
    let coords: Vec<(usize, usize, usize)> = (0..positions.len())
        .flat_map(|p| {
            (0..devices.len()).flat_map(move |d| {
                (0..params.samples_per_position).map(move |s| (p, d, s))
            })
        })
        .collect();

    let rows: Result<Vec<Vec<f64>>, DatasetError> = coords
        .par_iter()
        .map(|&(p, d, s)| {
            let (scale, taps) = &channels[p];
            let noise_seed = SeedPath::new(master_seed)
                .with_str("noise")
                .with_str(scenario.name())
                .with_str(&devices[d].device_id)
                .with_u64(p as u64)
                .with_u64(s as u64)
                .seed();
            let spectrum =
                capture_spectrum(&tag_outputs[d], params, *scale, taps, noise_std, noise_seed)?;
            Ok(extract_features_in_band(
                &spectrum,
                params.peak_count,
                params.min_separation_bins,
                params.analysis_band_hz.0,
                params.analysis_band_hz.1,
            )?)
        })
        .collect();
    let features = rows?;

    let mut labels = Vec::with_capacity(coords.len());
    let mut info = Vec::with_capacity(coords.len());
    for &(p, d, s) in &coords {
        labels.push(d);
        info.push(SampleInfo {
            device_index: d,
            device_id: devices[d].device_id.clone(),
            scenario,
            position_index: p,
            position_cm: positions[p],
            sample_index: s,
        });
    }
    Ok(Dataset {
        features,
        labels,
        info,
    })
}

/// Noise-averaged spectrum of one device at the reference position P1.
///
/// Averages `averages` independent captures (fresh noise each, identity
/// multipath, unit scale) in linear magnitude, exactly as a spectrum
/// analyzer's trace averaging would. Used for spectrum comparisons between
/// devices, where averaging suppresses the noise floor jitter.
pub fn averaged_static_spectrum(
    device: &DeviceModel,
    params: &SimParams,
    averages: usize,
    master_seed: u64,
) -> Result<Spectrum, DatasetError> {
    if averages == 0 {
        return Err(DatasetError::NoAverages);
    }
    let excitation = synthesize_two_tone(&params.band)?;
    let tag_output = device.respond(&excitation);
    let noise_std = noise_std_for_snr(params.band.reference_rms().powi(2), params.snr_db);
    let mut acc: Vec<f64> = Vec::new();
    let mut template = None;
    for a in 0..averages {
        let noise_seed = SeedPath::new(master_seed)
            .with_str("avg-noise")
            .with_str(&device.device_id)
            .with_u64(a as u64)
            .seed();
        let spectrum = capture_spectrum(
            &tag_output,
            params,
            1.0,
            &[(0, 1.0)],
            noise_std,
            noise_seed,
        )?;
        if acc.is_empty() {
            acc = vec![0.0; spectrum.magnitudes_db.len()];
        }
        for (sum, &db) in acc.iter_mut().zip(&spectrum.magnitudes_db) {
            *sum += 10f64.powf(db / 20.0);
        }
        template = Some(spectrum);
    }
    let mut spectrum = template.expect("averages >= 1");
    let inv = 1.0 / averages as f64;
    for (db, &sum) in spectrum.magnitudes_db.iter_mut().zip(&acc) {
        *db = (20.0 * (sum * inv).log10()).max(crate::synth::DB_FLOOR);
    }
    spectrum.num_segments *= averages;
    Ok(spectrum)
}

/// Train/test split indices, both sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    /// Row indices of the training side.
    pub train: Vec<usize>,
    /// Row indices of the test side.
    pub test: Vec<usize>,
}

/// Stratified train/test split: per ground-truth class, a seeded shuffle
/// sets aside `round(test_fraction * class_size)` rows (at least 1, at most
/// `class_size - 1`) for testing. Deterministic for identical inputs.
pub fn split_train_test(
    dataset: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<Split, DatasetError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DatasetError::InvalidTestFraction {
            value: test_fraction,
        });
    }
    if dataset.is_empty() {
        return Err(DatasetError::EmptyInput);
    }
    let mut by_class: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, &c) in dataset.labels.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    let mut classes: Vec<usize> = by_class.keys().copied().collect();
    classes.sort_unstable();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in classes {
        let mut idx = by_class.remove(&class).expect("listed class");
        if idx.len() < 2 {
            return Err(DatasetError::ClassTooSmall {
                class,
                size: idx.len(),
                need: 2,
            });
        }
        let class_seed = SeedPath::new(seed)
            .with_str("split")
            .with_u64(class as u64)
            .seed();
        shuffle(&mut idx, class_seed);
        let want = (test_fraction * idx.len() as f64).round() as usize;
        let n_test = want.clamp(1, idx.len() - 1);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// Seeded Fisher-Yates shuffle.
fn shuffle(indices: &mut [usize], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..indices.len()).rev() {
        let j = rng.gen_range(0..=i);
        indices.swap(i, j);
    }
}

/// Draws `per_class` rows per ground-truth class from `indices` with a
/// seeded shuffle; the result is sorted ascending. Errors if a class has
/// fewer than `per_class` rows among `indices`.
pub fn subsample_per_class(
    dataset: &Dataset,
    indices: &[usize],
    per_class: usize,
    seed: u64,
) -> Result<Vec<usize>, DatasetError> {
    let mut by_class: HashMap<usize, Vec<usize>> = HashMap::new();
    for &i in indices {
        by_class.entry(dataset.labels[i]).or_default().push(i);
    }
    let mut classes: Vec<usize> = by_class.keys().copied().collect();
    classes.sort_unstable();
    let mut out = Vec::with_capacity(per_class * classes.len());
    for class in classes {
        let mut idx = by_class.remove(&class).expect("listed class");
        if idx.len() < per_class {
            return Err(DatasetError::SubsampleTooLarge {
                class,
                have: idx.len(),
                want: per_class,
            });
        }
        let class_seed = SeedPath::new(seed)
            .with_str("subsample")
            .with_u64(class as u64)
            .seed();
        shuffle(&mut idx, class_seed);
        out.extend_from_slice(&idx[..per_class]);
    }
    out.sort_unstable();
    Ok(out)
}

/// K-means clustering result.
#[derive(Debug, Clone, PartialEq)]
pub struct KmeansResult {
    /// Cluster index per row.
    pub assignments: Vec<usize>,
    /// Final cluster centroids.
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after each assignment step, starting
    /// with the initial assignment. Non-increasing by construction.
    pub wcss_history: Vec<f64>,
}

fn check_rows(rows: &[Vec<f64>]) -> Result<usize, DatasetError> {
    let first = rows.first().ok_or(DatasetError::EmptyInput)?;
    let dim = first.len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != dim {
            return Err(DatasetError::RaggedRows {
                row: i,
                got: r.len(),
                expected: dim,
            });
        }
    }
    Ok(dim)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's K-means with K-means++ seeding.
///
/// Iterates assignment and centroid updates until the within-cluster sum of
/// squares changes by less than `tol` (relative to its magnitude) or
/// `max_iter` iterations. An emptied cluster is reseeded to the point
/// farthest from its centroid. Deterministic for a given seed; assignment
/// ties go to the lower cluster index.
pub fn kmeans(
    rows: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<KmeansResult, DatasetError> {
    if k == 0 {
        return Err(DatasetError::ZeroClusters);
    }
    check_rows(rows)?;
    if rows.len() < k {
        return Err(DatasetError::TooFewRows { k, rows: rows.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SeedPath::new(seed).with_str("kmeans").seed());

    // K-means++ seeding: first centroid uniform, the rest by squared-distance
    // weighted draws.
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(rows[rng.gen_range(0..rows.len())].clone());
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen_range(0.0..total);
            let mut chosen = rows.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            // All points coincide with chosen centroids; any point works.
            rng.gen_range(0..rows.len())
        };
        centroids.push(rows[next].clone());
        for (i, r) in rows.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, centroids.last().unwrap()));
        }
    }

    let dim = rows[0].len();
    let mut assignments = vec![0usize; rows.len()];
    let mut wcss_history = Vec::new();
    let mut prev_wcss = f64::INFINITY;
    for _ in 0..max_iter {
        // Assignment step; ties to the lower cluster index.
        let mut wcss = 0.0;
        for (i, r) in rows.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = sq_dist(r, &centroids[0]);
            for (c, cent) in centroids.iter().enumerate().skip(1) {
                let d = sq_dist(r, cent);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            assignments[i] = best;
            wcss += best_d;
        }
        wcss_history.push(wcss);
        if prev_wcss.is_finite() && (prev_wcss - wcss).abs() <= tol * prev_wcss.abs().max(1.0) {
            break;
        }
        prev_wcss = wcss;

        // Update step.
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (r, &a) in rows.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, &x) in sums[a].iter_mut().zip(r) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Reseed an emptied cluster to the point farthest from its
                // current centroid.
                let far = (0..rows.len())
                    .max_by(|&a, &b| {
                        sq_dist(&rows[a], &centroids[assignments[a]])
                            .partial_cmp(&sq_dist(&rows[b], &centroids[assignments[b]]))
                            .unwrap()
                    })
                    .expect("non-empty rows");
                centroids[c] = rows[far].clone();
            } else {
                for (cent, &s) in centroids[c].iter_mut().zip(&sums[c]) {
                    *cent = s / counts[c] as f64;
                }
            }
        }
    }
    Ok(KmeansResult {
        assignments,
        centroids,
        wcss_history,
    })
}

/// Two-cluster K-means labeling with a deterministic label convention:
/// cluster 0 is the one whose centroid has the lower first-feature mean.
pub fn kmeans_label(rows: &[Vec<f64>], seed: u64) -> Result<KmeansResult, DatasetError> {
    let mut result = kmeans(rows, 2, seed, 300, 1e-6)?;
    if result.centroids[0][0] > result.centroids[1][0] {
        result.centroids.swap(0, 1);
        for a in &mut result.assignments {
            *a = 1 - *a;
        }
    }
    Ok(result)
}

/// How one synthetic SMOTE row was generated: `base + mix * (neighbor - base)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoteRecord {
    /// Row index of the base sample (in the output ordering, where original
    /// rows keep their positions).
    pub base_index: usize,
    /// Row index of the chosen neighbor.
    pub neighbor_index: usize,
    /// Interpolation coefficient in `[0, 1)`.
    pub mix: f64,
}

/// SMOTE output: original rows first, synthetic rows appended.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoteOutput {
    /// Feature rows (originals then synthetics).
    pub features: Vec<Vec<f64>>,
    /// Class labels aligned with `features`.
    pub labels: Vec<usize>,
    /// True for synthetic rows.
    pub synthetic: Vec<bool>,
    /// Generation record per synthetic row, in creation order.
    pub records: Vec<SmoteRecord>,
}

/// SMOTE oversampling: brings every class up to the majority count by
/// interpolating between a random class member and one of its `k` nearest
/// same-class neighbors, `x_new = x + u * (x_nn - x)` with `u` uniform in
/// `[0, 1)`. `k` is clamped to `class_size - 1`; a class that needs
/// synthetics must have at least 2 members. Deterministic per seed.
pub fn smote_balance(
    rows: &[Vec<f64>],
    labels: &[usize],
    k: usize,
    seed: u64,
) -> Result<SmoteOutput, DatasetError> {
    check_rows(rows)?;
    if rows.len() != labels.len() {
        return Err(DatasetError::LabelMismatch {
            rows: rows.len(),
            labels: labels.len(),
        });
    }
    let mut by_class: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, &c) in labels.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    let majority = by_class.values().map(Vec::len).max().unwrap_or(0);
    let mut classes: Vec<usize> = by_class.keys().copied().collect();
    classes.sort_unstable();

    let mut features = rows.to_vec();
    let mut out_labels = labels.to_vec();
    let mut synthetic = vec![false; rows.len()];
    let mut records = Vec::new();

    for class in classes {
        let members = &by_class[&class];
        let deficit = majority - members.len();
        if deficit == 0 {
            continue;
        }
        if members.len() < 2 {
            return Err(DatasetError::ClassTooSmall {
                class,
                size: members.len(),
                need: 2,
            });
        }
        let k_eff = k.min(members.len() - 1).max(1);
        let class_seed = SeedPath::new(seed)
            .with_str("smote")
            .with_u64(class as u64)
            .seed();
        let mut rng = ChaCha8Rng::seed_from_u64(class_seed);
        // Neighbor lists are computed lazily per base row and cached.
        let mut nn_cache: HashMap<usize, Vec<usize>> = HashMap::new();
        for _ in 0..deficit {
            let base = members[rng.gen_range(0..members.len())];
            let neighbors = nn_cache.entry(base).or_insert_with(|| {
                let mut others: Vec<(f64, usize)> = members
                    .iter()
                    .filter(|&&i| i != base)
                    .map(|&i| (sq_dist(&rows[base], &rows[i]), i))
                    .collect();
                // Distance ties resolve to the smaller row index.
                others.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                others.into_iter().take(k_eff).map(|(_, i)| i).collect()
            });
            let neighbor = neighbors[rng.gen_range(0..neighbors.len())];
            let mix: f64 = rng.gen_range(0.0..1.0);
            let row: Vec<f64> = rows[base]
                .iter()
                .zip(&rows[neighbor])
                .map(|(&b, &n)| b + mix * (n - b))
                .collect();
            features.push(row);
            out_labels.push(class);
            synthetic.push(true);
            records.push(SmoteRecord {
                base_index: base,
                neighbor_index: neighbor,
                mix,
            });
        }
    }
    Ok(SmoteOutput {
        features,
        labels: out_labels,
        synthetic,
        records,
    })
}
