//! Feature extraction from spectra: peak picking, standardization, PCA.
//!
//! A fingerprint feature vector is the dB magnitude of the `k` strongest
//! well-separated spectral peaks, reported in ascending frequency order so a
//! given vector slot always refers to the same spectral line. Standardization
//! and a small from-scratch PCA (Jacobi eigendecomposition of the covariance)
//! support the classifier stages and the cluster-visualization outputs.

use crate::linalg::{symmetric_eigen, LinalgError, Matrix};
use crate::synth::Spectrum;
use thiserror::Error;

/// Errors from feature extraction and the fitted transforms.
#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    /// Peak picking needs a positive peak count.
    #[error("peak count must be positive")]
    ZeroPeakCount,
    /// Peak separation of zero would select adjacent bins of one peak.
    #[error("minimum peak separation must be at least 1 bin")]
    ZeroSeparation,
    /// The spectrum cannot host the requested number of separated peaks.
    #[error("found only {found} separated peaks, requested {requested}")]
    NotEnoughPeaks { requested: usize, found: usize },
    /// Fitting needs at least one row.
    #[error("cannot fit on an empty sample set")]
    EmptySampleSet,
    /// All rows must share the feature dimension.
    #[error("row {row} has {got} features, expected {expected}")]
    RaggedRows {
        row: usize,
        got: usize,
        expected: usize,
    },
    /// A constant column cannot be scaled to unit variance.
    #[error("feature column {column} is constant; standardization is undefined")]
    ConstantColumn { column: usize },
    /// Transform input must match the fitted dimension.
    #[error("input has {got} features but the transform was fitted on {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    /// Requested more principal components than the data supports.
    #[error("requested {requested} components but the data has rank {rank}")]
    RankDeficient { requested: usize, rank: usize },
    /// Eigendecomposition failure bubbled up from the solver.
    #[error("covariance eigendecomposition failed: {0}")]
    Eigen(#[from] LinalgError),
}

/// One detected spectral peak.
#[derive(Debug, Clone, PartialEq)]
pub struct Peak {
    /// Bin index in the one-sided spectrum.
    pub bin: usize,
    /// Bin center frequency in Hz.
    pub frequency_hz: f64,
    /// Magnitude in dBFS.
    pub magnitude_db: f64,
}

/// Picks the `count` strongest peaks at least `min_separation_bins` apart
/// across the whole spectrum, returned in ascending frequency order.
///
/// Selection is greedy by descending magnitude: a bin is accepted when it is
/// at least the separation away from every accepted bin. DC and Nyquist are
/// excluded. With a Hann window and bin-centered tones a separation of 2
/// suffices; wider windows or off-grid tones need more.
pub fn detect_peaks(
    spectrum: &Spectrum,
    count: usize,
    min_separation_bins: usize,
) -> Result<Vec<Peak>, FeatureError> {
    detect_peaks_in_band(spectrum, count, min_separation_bins, 0.0, f64::INFINITY)
}

/// [`detect_peaks`] restricted to bins whose center frequency lies within
/// `[low_hz, high_hz]`.
///
/// An intermodulation measurement only observes the receiver's analysis
/// band; distortion products around the harmonics (for example `2*f1 + f2`,
/// which a cubic device emits at exactly the same amplitude as `2*f1 - f2`)
/// must not compete with the in-band peaks.
pub fn detect_peaks_in_band(
    spectrum: &Spectrum,
    count: usize,
    min_separation_bins: usize,
    low_hz: f64,
    high_hz: f64,
) -> Result<Vec<Peak>, FeatureError> {
    if count == 0 {
        return Err(FeatureError::ZeroPeakCount);
    }
    if min_separation_bins == 0 {
        return Err(FeatureError::ZeroSeparation);
    }
    let n = spectrum.magnitudes_db.len();
    let mut order: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&b| {
            let f = spectrum.frequency_of(b);
            f >= low_hz && f <= high_hz
        })
        .collect();
    order.sort_by(|&a, &b| {
        spectrum.magnitudes_db[b]
            .partial_cmp(&spectrum.magnitudes_db[a])
            .unwrap()
            .then(a.cmp(&b)) // deterministic on exact ties: lower bin first
    });
    let mut chosen: Vec<usize> = Vec::with_capacity(count);
    for bin in order {
        if chosen
            .iter()
            .all(|&c| bin.abs_diff(c) >= min_separation_bins)
        {
            chosen.push(bin);
            if chosen.len() == count {
                break;
            }
        }
    }
    if chosen.len() < count {
        return Err(FeatureError::NotEnoughPeaks {
            requested: count,
            found: chosen.len(),
        });
    }
    chosen.sort_unstable();
    Ok(chosen
        .into_iter()
        .map(|bin| Peak {
            bin,
            frequency_hz: spectrum.frequency_of(bin),
            magnitude_db: spectrum.magnitudes_db[bin],
        })
        .collect())
}

/// Extracts the feature vector: dB magnitudes of the detected peaks in
/// ascending frequency order.
pub fn extract_features(
    spectrum: &Spectrum,
    count: usize,
    min_separation_bins: usize,
) -> Result<Vec<f64>, FeatureError> {
    Ok(detect_peaks(spectrum, count, min_separation_bins)?
        .into_iter()
        .map(|p| p.magnitude_db)
        .collect())
}

/// [`extract_features`] restricted to an analysis band.
pub fn extract_features_in_band(
    spectrum: &Spectrum,
    count: usize,
    min_separation_bins: usize,
    low_hz: f64,
    high_hz: f64,
) -> Result<Vec<f64>, FeatureError> {
    Ok(
        detect_peaks_in_band(spectrum, count, min_separation_bins, low_hz, high_hz)?
            .into_iter()
            .map(|p| p.magnitude_db)
            .collect(),
    )
}

fn check_rows(rows: &[Vec<f64>]) -> Result<usize, FeatureError> {
    let first = rows.first().ok_or(FeatureError::EmptySampleSet)?;
    let dim = first.len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != dim {
            return Err(FeatureError::RaggedRows {
                row: i,
                got: r.len(),
                expected: dim,
            });
        }
    }
    Ok(dim)
}

/// Per-column zero-mean unit-variance scaler (population variance, divisor
/// `N`). Fitted once on a reference split and reused everywhere so train and
/// test land in the same coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    /// Per-column means of the fitting set.
    pub means: Vec<f64>,
    /// Per-column population standard deviations of the fitting set.
    pub stds: Vec<f64>,
}

impl Standardizer {
    /// Fits means and population standard deviations on `rows`. A constant
    /// column is an error (its rescaling would be undefined), reported with
    /// its column index.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self, FeatureError> {
        let dim = check_rows(rows)?;
        let n = rows.len() as f64;
        let mut means = vec![0.0; dim];
        for r in rows {
            for (m, &x) in means.iter_mut().zip(r) {
                *m += x;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut vars = vec![0.0; dim];
        for r in rows {
            for ((v, &m), &x) in vars.iter_mut().zip(&means).zip(r) {
                let d = x - m;
                *v += d * d;
            }
        }
        let mut stds = Vec::with_capacity(dim);
        for (column, v) in vars.iter().enumerate() {
            let std = (v / n).sqrt();
            if std == 0.0 {
                return Err(FeatureError::ConstantColumn { column });
            }
            stds.push(std);
        }
        Ok(Self { means, stds })
    }

    /// Maps one row into standardized coordinates.
    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if row.len() != self.means.len() {
            return Err(FeatureError::DimensionMismatch {
                got: row.len(),
                expected: self.means.len(),
            });
        }
        Ok(row
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(&x, (&m, &s))| (x - m) / s)
            .collect())
    }

    /// Maps many rows into standardized coordinates.
    pub fn transform(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, FeatureError> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }

    /// Inverts [`Self::transform_row`] exactly up to rounding.
    pub fn inverse_transform_row(&self, row: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if row.len() != self.means.len() {
            return Err(FeatureError::DimensionMismatch {
                got: row.len(),
                expected: self.means.len(),
            });
        }
        Ok(row
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(&z, (&m, &s))| z * s + m)
            .collect())
    }
}

/// Principal component analysis fitted on centered data.
#[derive(Debug, Clone)]
pub struct Pca {
    /// Column means of the fitting set.
    pub mean: Vec<f64>,
    /// Principal directions as matrix columns (d x k), unit length,
    /// orthogonal, ordered by descending explained variance. Sign convention:
    /// the entry of largest magnitude in each component is positive.
    pub components: Matrix,
    /// Explained variances (covariance eigenvalues), descending.
    pub explained_variance: Vec<f64>,
}

impl Pca {
    /// Fits a `k`-component PCA: center, form the population covariance,
    /// eigendecompose, keep the top `k` directions. Directions whose
    /// eigenvalue is numerically zero mean the data has lower rank than
    /// requested, which is an error.
    pub fn fit(rows: &[Vec<f64>], k: usize) -> Result<Self, FeatureError> {
        let dim = check_rows(rows)?;
        if k > dim {
            return Err(FeatureError::RankDeficient {
                requested: k,
                rank: dim,
            });
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, &x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut cov = Matrix::zeros(dim, dim);
        for r in rows {
            for i in 0..dim {
                let di = r[i] - mean[i];
                for j in i..dim {
                    let dj = r[j] - mean[j];
                    let v = cov.get(i, j) + di * dj;
                    cov.set(i, j, v);
                }
            }
        }
        for i in 0..dim {
            for j in i..dim {
                let v = cov.get(i, j) / n;
                cov.set(i, j, v);
                cov.set(j, i, v);
            }
        }
        let eig = symmetric_eigen(&cov)?;
        let tol = eig.values.first().copied().unwrap_or(0.0).max(0.0) * 1e-12;
        let rank = eig.values.iter().filter(|&&v| v > tol).count();
        if k > rank {
            return Err(FeatureError::RankDeficient { requested: k, rank });
        }
        let mut components = Matrix::zeros(dim, k);
        for c in 0..k {
            // Sign convention: orient each direction so its largest-magnitude
            // entry is positive, making fitted components reproducible.
            let mut dominant = 0usize;
            for r in 1..dim {
                if eig.vectors.get(r, c).abs() > eig.vectors.get(dominant, c).abs() {
                    dominant = r;
                }
            }
            let flip = if eig.vectors.get(dominant, c) < 0.0 {
                -1.0
            } else {
                1.0
            };
            for r in 0..dim {
                components.set(r, c, flip * eig.vectors.get(r, c));
            }
        }
        Ok(Self {
            mean,
            components,
            explained_variance: eig.values[..k].to_vec(),
        })
    }

    /// Projects one row onto the fitted components.
    pub fn project_row(&self, row: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if row.len() != self.mean.len() {
            return Err(FeatureError::DimensionMismatch {
                got: row.len(),
                expected: self.mean.len(),
            });
        }
        let centered: Vec<f64> = row.iter().zip(&self.mean).map(|(&x, &m)| x - m).collect();
        Ok((0..self.components.cols())
            .map(|c| {
                (0..centered.len())
                    .map(|r| centered[r] * self.components.get(r, c))
                    .sum()
            })
            .collect())
    }

    /// Projects many rows onto the fitted components.
    pub fn project(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, FeatureError> {
        rows.iter().map(|r| self.project_row(r)).collect()
    }
}
