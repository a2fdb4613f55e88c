//! Run configuration: a TOML document mirroring every knob of the pipeline.
//!
//! Every field has a default, so an empty file (or no `--config` at all) runs
//! the standard campaign. Seeds are explicit integers — nothing is drawn from
//! the clock — and the canonical serialization of a config doubles as its
//! identity: the manifest's `config_sha256` is the SHA-256 of exactly the
//! `config.toml` the command writes next to its outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tagprint_core::dataset::{Scenario, SimParams};
use tagprint_core::ml::study::StudyConfig;
use tagprint_core::ml::{Algorithm, Hyperparams};
use tagprint_core::nonlin::DeviceModel;
use tagprint_core::synth::{BandPlan, SpectrumParams, Window};

use crate::CliError;

/// Side of the square tag-placement grid, in cm. Positions supplied in a
/// config must lie inside `[0, GRID_SIDE_CM]` on both axes.
pub const GRID_SIDE_CM: f64 = 60.0;

/// Complete description of a run. Field order matters for TOML output:
/// scalar and array fields first, then the `[band]` table, then the
/// `[[devices]]` array of tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Root seed; every random stream in every command derives from it.
    pub master_seed: u64,
    /// Output directory; overridden by `--out`. Excluded from the config
    /// hash — it changes where files land, not what they contain.
    pub out_dir: PathBuf,
    /// Fraction of each scenario held out for testing.
    pub test_fraction: f64,
    /// Per-class training rows drawn per scenario in the enlarged regimes.
    pub increased_per_class: usize,
    /// Nearest-neighbor count for minority oversampling.
    pub smote_k: usize,
    /// Number of principal components in projection outputs.
    pub pca_components: usize,
    /// Captures averaged per device for spectrum outputs.
    pub averages: usize,
    /// Envelope drive level for the constellation command.
    pub constellation_drive: f64,
    /// Relative coefficient perturbation when deriving devices from seeds.
    pub perturb_fraction: f64,
    /// Lowest polynomial degree the perturbation touches.
    pub perturb_min_degree: usize,
    /// Receiver SNR in dB at the reference position.
    pub snr_db: f64,
    /// Multipath tap magnitude at full displacement (0 disables multipath).
    pub multipath_strength: f64,
    /// Sample lag of the first echo.
    pub multipath_delay: usize,
    /// Receiver auto-ranging on/off.
    pub agc: bool,
    /// Captures per device per position.
    pub samples_per_position: usize,
    /// Position jitter half-range for the small scenario, in cm.
    pub jitter_cm: f64,
    /// Spectral peaks per feature vector.
    pub peak_count: usize,
    /// Minimum peak separation in bins.
    pub min_separation_bins: usize,
    /// Receiver analysis band `[low_hz, high_hz]`.
    pub analysis_band_hz: [f64; 2],
    /// FFT segment length.
    pub nfft: usize,
    /// Analysis window.
    pub window: Window,
    /// Seeds for deriving perturbed devices from the reference amplifier;
    /// ignored when `devices` is given explicitly.
    pub device_seeds: Vec<u64>,
    /// Scenarios the simulate command generates, in order.
    pub scenarios: Vec<Scenario>,
    /// Classifiers the study trains.
    pub classifiers: Vec<Algorithm>,
    /// Tag placements for the large scenario, overriding the standard
    /// layout; applies to simulate and pca. Each entry is `[x_cm, y_cm]`
    /// inside the 60 x 60 cm grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 2]>>,
    /// Two-tone excitation plan.
    pub band: BandPlan,
    /// Explicit device models `{device_id, coefficients}`; when empty, the
    /// devices are derived from `device_seeds`.
    pub devices: Vec<DeviceModel>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sim = SimParams::default();
        Self {
            master_seed: 42,
            out_dir: PathBuf::from("out"),
            test_fraction: 0.1,
            increased_per_class: 907,
            smote_k: 5,
            pca_components: 2,
            averages: 100,
            constellation_drive: 1.0,
            perturb_fraction: 0.05,
            perturb_min_degree: 2,
            snr_db: sim.snr_db,
            multipath_strength: sim.multipath_strength,
            multipath_delay: sim.multipath_delay,
            agc: sim.agc,
            samples_per_position: sim.samples_per_position,
            jitter_cm: sim.jitter_cm,
            peak_count: sim.peak_count,
            min_separation_bins: sim.min_separation_bins,
            analysis_band_hz: [sim.analysis_band_hz.0, sim.analysis_band_hz.1],
            nfft: sim.spectrum.nfft,
            window: sim.spectrum.window,
            device_seeds: vec![1, 9],
            scenarios: Scenario::all().to_vec(),
            classifiers: Algorithm::ALL.to_vec(),
            positions: None,
            band: sim.band,
            devices: Vec::new(),
        }
    }
}

/// Command-line overrides applied on top of the loaded config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub scenario: Option<Scenario>,
    pub classifiers: Option<Vec<Algorithm>>,
    pub snr_db: Option<f64>,
    pub perturb_frac: Option<f64>,
}

impl RunConfig {
    /// Reads and parses a TOML config file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        toml::from_str(&text).map_err(|e| {
            let msg = e.to_string().replace('\n', "; ");
            CliError::Validation(format!("invalid config {}: {msg}", path.display()))
        })
    }

    /// Applies command-line overrides. The scenario override narrows the
    /// simulate scenario list and selects the pca scenario.
    pub fn apply(&mut self, ov: &Overrides) {
        if let Some(out) = &ov.out {
            self.out_dir = out.clone();
        }
        if let Some(seed) = ov.seed {
            self.master_seed = seed;
        }
        if let Some(scenario) = ov.scenario {
            self.scenarios = vec![scenario];
        }
        if let Some(classifiers) = &ov.classifiers {
            self.classifiers = classifiers.clone();
        }
        if let Some(snr) = ov.snr_db {
            self.snr_db = snr;
        }
        if let Some(frac) = ov.perturb_frac {
            self.perturb_fraction = frac;
        }
    }

    /// Checks every field range that does not require running the pipeline.
    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Validation(msg));
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return fail(format!(
                "test_fraction {} must be strictly between 0 and 1",
                self.test_fraction
            ));
        }
        if self.averages == 0 {
            return fail("averages must be at least 1".into());
        }
        if self.samples_per_position == 0 {
            return fail("samples_per_position must be at least 1".into());
        }
        if self.increased_per_class == 0 {
            return fail("increased_per_class must be at least 1".into());
        }
        if self.smote_k == 0 {
            return fail("smote_k must be at least 1".into());
        }
        if self.peak_count == 0 {
            return fail("peak_count must be at least 1".into());
        }
        if self.min_separation_bins == 0 {
            return fail("min_separation_bins must be at least 1".into());
        }
        if self.pca_components == 0 || self.pca_components > self.peak_count {
            return fail(format!(
                "pca_components {} must be between 1 and peak_count {}",
                self.pca_components, self.peak_count
            ));
        }
        if !(self.constellation_drive > 0.0 && self.constellation_drive.is_finite()) {
            return fail(format!(
                "constellation_drive {} must be positive and finite",
                self.constellation_drive
            ));
        }
        if !(0.0..1.0).contains(&self.perturb_fraction) {
            return fail(format!(
                "perturb_fraction {} must be in [0, 1)",
                self.perturb_fraction
            ));
        }
        if !self.snr_db.is_finite() {
            return fail(format!("snr_db {} must be finite", self.snr_db));
        }
        if !(self.multipath_strength >= 0.0 && self.multipath_strength.is_finite()) {
            return fail(format!(
                "multipath_strength {} must be non-negative and finite",
                self.multipath_strength
            ));
        }
        if !(self.jitter_cm >= 0.0 && self.jitter_cm.is_finite()) {
            return fail(format!(
                "jitter_cm {} must be non-negative and finite",
                self.jitter_cm
            ));
        }
        let [low, high] = self.analysis_band_hz;
        if !(low >= 0.0 && high > low) {
            return fail(format!(
                "analysis_band_hz [{low}, {high}] must satisfy 0 <= low < high"
            ));
        }
        self.validate_band()?;
        if self.scenarios.is_empty() {
            return fail("scenarios must not be empty".into());
        }
        for (i, s) in self.scenarios.iter().enumerate() {
            if self.scenarios[..i].contains(s) {
                return fail(format!("scenario '{s}' listed more than once"));
            }
        }
        if self.classifiers.is_empty() {
            return fail("classifiers must not be empty".into());
        }
        for (i, c) in self.classifiers.iter().enumerate() {
            if self.classifiers[..i].contains(c) {
                return fail(format!("classifier '{c}' listed more than once"));
            }
        }
        if let Some(positions) = &self.positions {
            if positions.is_empty() {
                return fail("positions override must not be empty".into());
            }
            for &[x, y] in positions {
                let inside = (0.0..=GRID_SIDE_CM).contains(&x)
                    && (0.0..=GRID_SIDE_CM).contains(&y)
                    && x.is_finite()
                    && y.is_finite();
                if !inside {
                    return fail(format!(
                        "position ({x}, {y}) lies outside the {GRID_SIDE_CM} x \
                         {GRID_SIDE_CM} cm measurement grid"
                    ));
                }
            }
        }
        if self.devices.is_empty() && self.device_seeds.is_empty() {
            return fail("either devices or device_seeds must be given".into());
        }
        for (i, &s) in self.device_seeds.iter().enumerate() {
            if self.device_seeds[..i].contains(&s) {
                return fail(format!("device seed {s} listed more than once"));
            }
        }
        for device in &self.devices {
            validate_device_id(&device.device_id)?;
        }
        Ok(())
    }

    /// Mirrors the synthesis-side excitation checks so a bad band plan fails
    /// at config time rather than mid-run.
    fn validate_band(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Validation(msg));
        let b = &self.band;
        if !(b.sample_rate_hz > 0.0 && b.sample_rate_hz.is_finite()) {
            return fail(format!("sample_rate_hz {} must be positive", b.sample_rate_hz));
        }
        if !(b.f1_hz > 0.0 && b.f2_hz > b.f1_hz) {
            return fail(format!(
                "tones must satisfy 0 < f1_hz < f2_hz, got {} and {}",
                b.f1_hz, b.f2_hz
            ));
        }
        let nyquist = b.sample_rate_hz / 2.0;
        if b.f2_hz >= nyquist {
            return fail(format!(
                "tone {} Hz is at or above the Nyquist frequency {} Hz",
                b.f2_hz, nyquist
            ));
        }
        if b.amp1 < 0.0 || b.amp2 < 0.0 {
            return fail(format!(
                "tone amplitudes must be non-negative, got {} and {}",
                b.amp1, b.amp2
            ));
        }
        if b.amp1 + b.amp2 > 1.0 {
            return fail(format!(
                "tone amplitudes sum to {}, exceeding full scale 1.0",
                b.amp1 + b.amp2
            ));
        }
        if b.num_samples == 0 {
            return fail("num_samples must be at least 1".into());
        }
        if self.nfft < 2 {
            return fail(format!("nfft {} must be at least 2", self.nfft));
        }
        if b.num_samples < self.nfft {
            return fail(format!(
                "num_samples {} is shorter than one FFT segment of {}",
                b.num_samples, self.nfft
            ));
        }
        Ok(())
    }

    /// Simulation parameters assembled from the flat fields.
    pub fn sim_params(&self) -> SimParams {
        SimParams {
            band: self.band.clone(),
            spectrum: SpectrumParams {
                nfft: self.nfft,
                window: self.window,
            },
            snr_db: self.snr_db,
            multipath_strength: self.multipath_strength,
            multipath_delay: self.multipath_delay,
            agc: self.agc,
            peak_count: self.peak_count,
            min_separation_bins: self.min_separation_bins,
            analysis_band_hz: (self.analysis_band_hz[0], self.analysis_band_hz[1]),
            samples_per_position: self.samples_per_position,
            jitter_cm: self.jitter_cm,
        }
    }

    /// The device roster: explicit models if given, otherwise one perturbed
    /// copy of the reference amplifier per seed, named `tag-1`, `tag-2`, ...
    pub fn device_models(&self) -> Result<Vec<DeviceModel>, CliError> {
        if !self.devices.is_empty() {
            let mut out = Vec::with_capacity(self.devices.len());
            for d in &self.devices {
                // Re-run the model's own validation on hand-written entries.
                out.push(
                    DeviceModel::new(d.device_id.clone(), d.coefficients.clone())
                        .map_err(|e| CliError::Validation(e.to_string()))?,
                );
            }
            return Ok(out);
        }
        let reference = DeviceModel::reference_amplifier("reference");
        self.device_seeds
            .iter()
            .enumerate()
            .map(|(i, &seed)| {
                reference
                    .perturbed(
                        format!("tag-{}", i + 1),
                        self.perturb_fraction,
                        self.perturb_min_degree,
                        seed,
                    )
                    .map_err(|e| CliError::Validation(e.to_string()))
            })
            .collect()
    }

    /// Study configuration; the study requires exactly two devices.
    pub fn study_config(&self) -> Result<StudyConfig, CliError> {
        let devices = self.device_models()?;
        if devices.len() != 2 {
            return Err(CliError::Validation(format!(
                "the study requires exactly 2 devices, got {}",
                devices.len()
            )));
        }
        Ok(StudyConfig {
            devices,
            params: self.sim_params(),
            master_seed: self.master_seed,
            test_fraction: self.test_fraction,
            increased_per_class: self.increased_per_class,
            smote_k: self.smote_k,
            pca_components: self.pca_components,
            algorithms: self.classifiers.clone(),
            hyper: Hyperparams::default(),
        })
    }

    /// Tag placements for a scenario, honoring the large-scenario override.
    pub fn positions_for(&self, scenario: Scenario) -> Vec<(f64, f64)> {
        match (&self.positions, scenario) {
            (Some(list), Scenario::Large) => {
                list.iter().map(|&[x, y]| (x, y)).collect()
            }
            _ => scenario.positions(self.jitter_cm, self.master_seed),
        }
    }

    /// Canonical TOML form: the config as run, with the output directory
    /// normalized away so the hash identifies the data, not its destination.
    pub fn canonical_toml(&self) -> String {
        let mut canon = self.clone();
        canon.out_dir = RunConfig::default().out_dir;
        toml::to_string_pretty(&canon).expect("config serializes")
    }
}

/// Device ids become file names and CSV cells, so restrict them to a safe
/// charset: letters, digits, dot, dash, underscore.
pub fn validate_device_id(id: &str) -> Result<(), CliError> {
    let ok = !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_'));
    if ok {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "device id '{id}' must be non-empty and use only letters, digits, \
             dot, dash, or underscore"
        )))
    }
}
