//! The five subcommands: simulate, study, spectrum, constellation, pca.
//!
//! Each command resolves the device roster, runs the corresponding pipeline
//! stage, and writes plot-ready CSV plus a manifest. All files go through
//! [`OutputSet`], so they are atomic, hashed, and listed in `manifest.json`.
//! Every command also writes the canonical `config.toml` and the resolved
//! `devices.toml`, which together are enough to reproduce the run.

use serde::Serialize;
use tagprint_core::dataset::{
    averaged_static_spectrum, generate_at_positions, Dataset, Scenario,
};
use tagprint_core::features::{detect_peaks_in_band, Pca, Standardizer};
use tagprint_core::ml::study::run_study;
use tagprint_core::nonlin::DeviceModel;
use tagprint_core::synth::{distort_constellation, qam16_symbols, Spectrum};

use crate::config::RunConfig;
use crate::output::{fmt_f64, CsvDoc, OutputSet};
use crate::CliError;

/// Wrapper giving `devices.toml` its `[[devices]]` table layout.
#[derive(Serialize)]
struct DevicesDoc<'a> {
    devices: &'a [DeviceModel],
}

/// Opens the output set and writes the two reproduction files every command
/// emits: the canonical config and the resolved device models.
fn open_outputs(
    cfg: &RunConfig,
    devices: &[DeviceModel],
) -> Result<(OutputSet, String), CliError> {
    let canonical = cfg.canonical_toml();
    let sha = crate::output::sha256_hex(canonical.as_bytes());
    let mut out = OutputSet::create(&cfg.out_dir)?;
    out.write_text("config.toml", &canonical, None)?;
    let doc = toml::to_string_pretty(&DevicesDoc { devices })
        .expect("device models serialize");
    out.write_text("devices.toml", &doc, None)?;
    Ok((out, sha))
}

/// Generates one scenario dataset, honoring the large-scenario placement
/// override from the config.
fn generate(
    cfg: &RunConfig,
    devices: &[DeviceModel],
    scenario: Scenario,
) -> Result<Dataset, CliError> {
    let params = cfg.sim_params();
    let positions = cfg.positions_for(scenario);
    generate_at_positions(devices, scenario, &positions, &params, cfg.master_seed)
        .map_err(|e| CliError::Runtime(e.to_string()))
}

/// Header `peak1_db..peakK_db` for a feature width of `k`.
fn peak_columns(k: usize) -> String {
    (1..=k)
        .map(|i| format!("peak{i}_db"))
        .collect::<Vec<_>>()
        .join(",")
}

/// `simulate`: one dataset CSV per requested scenario.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let devices = cfg.device_models()?;
    let (mut out, sha) = open_outputs(cfg, &devices)?;
    for &scenario in &cfg.scenarios {
        let ds = generate(cfg, &devices, scenario)?;
        let width = ds.features.first().map_or(cfg.peak_count, Vec::len);
        let header = format!(
            "{},label,scenario,position,device_id,is_synthetic",
            peak_columns(width)
        );
        let mut doc = CsvDoc::new(&header);
        for ((row, &label), info) in
            ds.features.iter().zip(&ds.labels).zip(&ds.info)
        {
            let mut cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
            cells.push(label.to_string());
            cells.push(info.scenario.name().to_string());
            cells.push(info.position_index.to_string());
            cells.push(info.device_id.clone());
            cells.push("0".to_string());
            doc.row(cells);
        }
        out.write_text(
            &format!("dataset_{}.csv", scenario.name()),
            doc.text(),
            Some(doc.rows()),
        )?;
    }
    out.finish("simulate", &sha, cfg.master_seed)
}

/// Writes the averaged spectrum and detected-peak table for one device.
/// Returns the averaged spectrum for further use.
fn write_device_spectrum(
    out: &mut OutputSet,
    cfg: &RunConfig,
    device: &DeviceModel,
) -> Result<Spectrum, CliError> {
    let params = cfg.sim_params();
    let spectrum = averaged_static_spectrum(device, &params, cfg.averages, cfg.master_seed)
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut doc = CsvDoc::new("bin,frequency_hz,magnitude_db");
    for (bin, &db) in spectrum.magnitudes_db.iter().enumerate() {
        doc.row([
            bin.to_string(),
            fmt_f64(spectrum.frequency_of(bin)),
            fmt_f64(db),
        ]);
    }
    out.write_text(
        &format!("spectrum_{}.csv", device.device_id),
        doc.text(),
        Some(doc.rows()),
    )?;

    let peaks = detect_peaks_in_band(
        &spectrum,
        cfg.peak_count,
        cfg.min_separation_bins,
        cfg.analysis_band_hz[0],
        cfg.analysis_band_hz[1],
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut doc = CsvDoc::new("peak,bin,frequency_hz,magnitude_db");
    for (i, p) in peaks.iter().enumerate() {
        doc.row([
            (i + 1).to_string(),
            p.bin.to_string(),
            fmt_f64(p.frequency_hz),
            fmt_f64(p.magnitude_db),
        ]);
    }
    out.write_text(
        &format!("peaks_{}.csv", device.device_id),
        doc.text(),
        Some(doc.rows()),
    )?;
    Ok(spectrum)
}

/// Writes the per-bin difference series between the first two devices.
fn write_difference(
    out: &mut OutputSet,
    first: (&DeviceModel, &Spectrum),
    second: (&DeviceModel, &Spectrum),
) -> Result<(), CliError> {
    let header = format!(
        "bin,frequency_hz,{}_db,{}_db,difference_db",
        first.0.device_id, second.0.device_id
    );
    let mut doc = CsvDoc::new(&header);
    for (bin, (&a, &b)) in first
        .1
        .magnitudes_db
        .iter()
        .zip(&second.1.magnitudes_db)
        .enumerate()
    {
        doc.row([
            bin.to_string(),
            fmt_f64(first.1.frequency_of(bin)),
            fmt_f64(a),
            fmt_f64(b),
            fmt_f64(a - b),
        ]);
    }
    out.write_text("difference.csv", doc.text(), Some(doc.rows()))
}

/// `spectrum`: averaged spectra with peak tables, plus the difference series
/// when at least two devices are configured.
pub fn cmd_spectrum(cfg: &RunConfig) -> Result<(), CliError> {
    let devices = cfg.device_models()?;
    let (mut out, sha) = open_outputs(cfg, &devices)?;
    let mut spectra = Vec::with_capacity(devices.len());
    for device in &devices {
        spectra.push(write_device_spectrum(&mut out, cfg, device)?);
    }
    if devices.len() >= 2 {
        write_difference(
            &mut out,
            (&devices[0], &spectra[0]),
            (&devices[1], &spectra[1]),
        )?;
    }
    out.finish("spectrum", &sha, cfg.master_seed)
}

/// `study`: the full training/evaluation grid with report, projections, and
/// example spectra.
pub fn cmd_study(cfg: &RunConfig) -> Result<(), CliError> {
    let study_cfg = cfg.study_config()?;
    let devices = study_cfg.devices.clone();
    let (mut out, sha) = open_outputs(cfg, &devices)?;

    let report = run_study(&study_cfg).map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut doc = CsvDoc::new(
        "regime,classifier,test_scenario,accuracy,\
         true0_pred0,true0_pred1,true1_pred0,true1_pred1",
    );
    for cell in &report.cells {
        let c = &cell.metrics.confusion;
        doc.row([
            cell.regime.name().to_string(),
            cell.algorithm.name().to_string(),
            cell.test_scenario.name().to_string(),
            fmt_f64(cell.metrics.accuracy),
            c[0][0].to_string(),
            c[0][1].to_string(),
            c[1][0].to_string(),
            c[1][1].to_string(),
        ]);
    }
    out.write_text("report.csv", doc.text(), Some(doc.rows()))?;

    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    out.write_text("report.json", &json, None)?;

    for regime in &report.regimes {
        let width = regime
            .pca_points
            .first()
            .map_or(cfg.pca_components, |p| p.coords.len());
        let pcs = (1..=width)
            .map(|i| format!("pc{i}"))
            .collect::<Vec<_>>()
            .join(",");
        let mut doc = CsvDoc::new(&format!("{pcs},label,cluster,scenario,position"));
        for p in &regime.pca_points {
            let mut cells: Vec<String> =
                p.coords.iter().map(|&v| fmt_f64(v)).collect();
            cells.push(p.label.to_string());
            cells.push(p.cluster.to_string());
            cells.push(p.scenario.name().to_string());
            cells.push(p.position.to_string());
            doc.row(cells);
        }
        out.write_text(
            &format!("pca_{}.csv", regime.regime.name()),
            doc.text(),
            Some(doc.rows()),
        )?;
    }

    for device in &devices {
        write_device_spectrum(&mut out, cfg, device)?;
    }
    out.finish("study", &sha, cfg.master_seed)
}

/// `constellation`: ideal and envelope-distorted 16-QAM symbols per device.
pub fn cmd_constellation(cfg: &RunConfig) -> Result<(), CliError> {
    let devices = cfg.device_models()?;
    let (mut out, sha) = open_outputs(cfg, &devices)?;
    let symbols = qam16_symbols();
    for device in &devices {
        let distorted = distort_constellation(device, &symbols, cfg.constellation_drive)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        let mut doc = CsvDoc::new("symbol,ideal_i,ideal_q,distorted_i,distorted_q");
        for (i, (&(ii, iq), &(di, dq))) in
            symbols.iter().zip(&distorted).enumerate()
        {
            doc.row([
                i.to_string(),
                fmt_f64(ii),
                fmt_f64(iq),
                fmt_f64(di),
                fmt_f64(dq),
            ]);
        }
        out.write_text(
            &format!("constellation_{}.csv", device.device_id),
            doc.text(),
            Some(doc.rows()),
        )?;
    }
    out.finish("constellation", &sha, cfg.master_seed)
}

/// `pca`: standardized principal-component projection of one scenario.
///
/// The scenario comes from `--scenario`, defaulting to the first entry of the
/// config's scenario list.
pub fn cmd_pca(cfg: &RunConfig, scenario: Scenario) -> Result<(), CliError> {
    let devices = cfg.device_models()?;
    let (mut out, sha) = open_outputs(cfg, &devices)?;
    let ds = generate(cfg, &devices, scenario)?;
    let standardizer =
        Standardizer::fit(&ds.features).map_err(|e| CliError::Runtime(e.to_string()))?;
    let z = standardizer
        .transform(&ds.features)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let pca =
        Pca::fit(&z, cfg.pca_components).map_err(|e| CliError::Runtime(e.to_string()))?;
    let projected = pca.project(&z).map_err(|e| CliError::Runtime(e.to_string()))?;

    let pcs = (1..=cfg.pca_components)
        .map(|i| format!("pc{i}"))
        .collect::<Vec<_>>()
        .join(",");
    let mut doc =
        CsvDoc::new(&format!("{pcs},label,device_id,position,x_cm,y_cm"));
    for ((coords, &label), info) in projected.iter().zip(&ds.labels).zip(&ds.info) {
        let mut cells: Vec<String> = coords.iter().map(|&v| fmt_f64(v)).collect();
        cells.push(label.to_string());
        cells.push(info.device_id.clone());
        cells.push(info.position_index.to_string());
        cells.push(fmt_f64(info.position_cm.0));
        cells.push(fmt_f64(info.position_cm.1));
        doc.row(cells);
    }
    out.write_text(
        &format!("pca_{}.csv", scenario.name()),
        doc.text(),
        Some(doc.rows()),
    )?;

    let mut doc = CsvDoc::new("component,explained_variance");
    for (i, &v) in pca.explained_variance.iter().enumerate() {
        doc.row([(i + 1).to_string(), fmt_f64(v)]);
    }
    out.write_text("pca_variance.csv", doc.text(), Some(doc.rows()))?;
    out.finish("pca", &sha, cfg.master_seed)
}
