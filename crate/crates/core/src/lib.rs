//! Simulation and classification toolkit for RF tag fingerprinting.
//!
//! The crate models passive nonlinear tags as perturbed power-series devices,
//! synthesizes the spectra such tags return under a two-tone interrogation,
//! and distinguishes devices by the intermodulation structure of those
//! spectra. It is organised as a pipeline:
//!
//! 1. [`nonlin`] — memoryless power-series device models and their
//!    intermodulation arithmetic,
//! 2. [`synth`] — waveform synthesis, channel effects, and FFT spectra,
//! 3. [`features`] — peak extraction, standardization, and PCA,
//! 4. [`dataset`] — scenario generation (fixed and perturbed tag positions),
//!    K-means labeling, and SMOTE balancing,
//! 5. [`ml`] — seven from-scratch classifiers plus the study driver that
//!    reproduces the full train/evaluate grid.
//!
//! Everything downstream of a master seed is deterministic: rerunning any
//! pipeline stage with the same configuration yields bit-identical output.

pub mod dataset;
pub mod features;
pub mod linalg;
pub mod ml;
pub mod nonlin;
pub mod seed;
pub mod synth;
