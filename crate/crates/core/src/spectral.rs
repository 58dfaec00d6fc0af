//! Domain types shared by the whole pipeline: the wavelength grid and its
//! pixel calibration, acquired spectrum images, substance optics profiles,
//! sample recipes and labeled datasets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Edge length of a canonical acquisition frame, in pixels.
pub const IMAGE_SIZE: usize = 150;
/// Color channels per pixel.
pub const CHANNELS: usize = 3;
/// Flattened length of a canonical frame: 150 × 150 × 3.
pub const FEATURE_LEN: usize = IMAGE_SIZE * IMAGE_SIZE * CHANNELS;

/// Round half-up: 74.5 → 75. Callers only pass non-negative values.
#[inline]
pub fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

/// Linear wavelength↔column calibration over the visible band.
///
/// The physical grating equation is slightly nonlinear across 390–700 nm,
/// but the deviation stays below one pixel at this resolution, so columns
/// map affinely onto wavelength. See [`crate::sim::GRATING_LINES_PER_MM`]
/// for the retained grating constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WavelengthGrid {
    pub lambda_min_nm: f64,
    pub lambda_max_nm: f64,
    pub columns: usize,
}

impl Default for WavelengthGrid {
    fn default() -> Self {
        WavelengthGrid {
            lambda_min_nm: 390.0,
            lambda_max_nm: 700.0,
            columns: IMAGE_SIZE,
        }
    }
}

impl WavelengthGrid {
    pub fn new(lambda_min_nm: f64, lambda_max_nm: f64, columns: usize) -> Result<Self> {
        let grid = WavelengthGrid {
            lambda_min_nm,
            lambda_max_nm,
            columns,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lambda_min_nm.is_finite() || !self.lambda_max_nm.is_finite() {
            return Err(Error::config("wavelength bounds must be finite"));
        }
        if self.lambda_min_nm >= self.lambda_max_nm {
            return Err(Error::config(format!(
                "lambda_min_nm ({}) must be < lambda_max_nm ({})",
                self.lambda_min_nm, self.lambda_max_nm
            )));
        }
        if self.columns < 2 {
            return Err(Error::config(format!(
                "grid needs at least 2 columns, got {}",
                self.columns
            )));
        }
        Ok(())
    }

    /// Wavelength span represented by one column, in nm/pixel.
    pub fn resolution_nm_per_px(&self) -> f64 {
        (self.lambda_max_nm - self.lambda_min_nm) / (self.columns - 1) as f64
    }

    /// Map a wavelength to its column: the affine position rounded half-up.
    pub fn wavelength_to_column(&self, lambda_nm: f64) -> Result<usize> {
        if !(lambda_nm >= self.lambda_min_nm && lambda_nm <= self.lambda_max_nm) {
            return Err(Error::Range {
                what: "wavelength (nm)",
                value: lambda_nm,
                lo: self.lambda_min_nm,
                hi: self.lambda_max_nm,
            });
        }
        let span = self.lambda_max_nm - self.lambda_min_nm;
        let pos = (lambda_nm - self.lambda_min_nm) / span * (self.columns - 1) as f64;
        Ok(round_half_up(pos) as usize)
    }

    /// Inverse calibration: center wavelength of a column.
    pub fn column_to_wavelength(&self, column: usize) -> Result<f64> {
        if column >= self.columns {
            return Err(Error::Range {
                what: "column",
                value: column as f64,
                lo: 0.0,
                hi: (self.columns - 1) as f64,
            });
        }
        Ok(self.lambda_min_nm + column as f64 * self.resolution_nm_per_px())
    }
}

/// An 8-bit RGB raster, row-major and channel-interleaved.
///
/// Canonical acquisition frames are 150×150; arbitrary sizes exist so larger
/// captures can be ingested and cropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpectrumImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl SpectrumImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::config("image dimensions must be non-zero"));
        }
        let expected = width * height * CHANNELS;
        if data.len() != expected {
            return Err(Error::shape(
                format!("{width}x{height}x{CHANNELS} = {expected} bytes"),
                format!("{} bytes", data.len()),
            ));
        }
        Ok(SpectrumImage {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        CHANNELS
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// True for the canonical 150×150×3 acquisition frame.
    pub fn is_canonical(&self) -> bool {
        self.width == IMAGE_SIZE && self.height == IMAGE_SIZE
    }

    /// Flat index of (row, col, channel).
    #[inline]
    pub fn index(&self, row: usize, col: usize, channel: usize) -> usize {
        (row * self.width + col) * CHANNELS + channel
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> u8 {
        self.data[self.index(row, col, channel)]
    }
}

/// One Gaussian absorption feature: peak base-10 absorbance `strength` at
/// `center_nm` with width `sigma_nm`. Strengths fold in the optical path
/// length, so recipes stay unit-free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorptionBand {
    pub center_nm: f64,
    pub sigma_nm: f64,
    pub strength: f64,
}

impl AbsorptionBand {
    pub fn validate(&self) -> Result<()> {
        if !(300.0..=800.0).contains(&self.center_nm) {
            return Err(Error::Range {
                what: "band center (nm)",
                value: self.center_nm,
                lo: 300.0,
                hi: 800.0,
            });
        }
        if !(self.sigma_nm > 0.0) {
            return Err(Error::config(format!(
                "band sigma must be > 0, got {}",
                self.sigma_nm
            )));
        }
        if !(self.strength >= 0.0) {
            return Err(Error::config(format!(
                "band strength must be >= 0, got {}",
                self.strength
            )));
        }
        Ok(())
    }

    /// Absorbance contribution at `lambda_nm`.
    #[inline]
    pub fn absorbance_at(&self, lambda_nm: f64) -> f64 {
        let d = lambda_nm - self.center_nm;
        self.strength * (-d * d / (2.0 * self.sigma_nm * self.sigma_nm)).exp()
    }
}

/// Narrow re-emission feature. The emission of a mixture component is
/// `weight × intensity × gauss(λ)` and is active only while the component's
/// weight exceeds `threshold` — some substances only glow near full
/// concentration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Luminescence {
    pub center_nm: f64,
    pub width_nm: f64,
    pub intensity: f64,
    #[serde(default)]
    pub threshold: f64,
}

impl Luminescence {
    pub fn validate(&self) -> Result<()> {
        if !(self.width_nm > 0.0) {
            return Err(Error::config("luminescence width must be > 0"));
        }
        if !(self.intensity >= 0.0) {
            return Err(Error::config("luminescence intensity must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::config("luminescence threshold must be in [0, 1]"));
        }
        Ok(())
    }

    #[inline]
    pub fn emission_at(&self, lambda_nm: f64) -> f64 {
        let d = lambda_nm - self.center_nm;
        self.intensity * (-d * d / (2.0 * self.width_nm * self.width_nm)).exp()
    }
}

/// Optical description of one pure substance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubstanceProfile {
    pub name: String,
    #[serde(default)]
    pub bands: Vec<AbsorptionBand>,
    /// Unitless broadening coefficient; 0 = no broadening.
    #[serde(default)]
    pub scattering: f64,
    #[serde(default)]
    pub luminescence: Option<Luminescence>,
}

impl SubstanceProfile {
    /// A fully transparent, non-scattering substance.
    pub fn transparent(name: &str) -> Self {
        SubstanceProfile {
            name: name.to_string(),
            bands: Vec::new(),
            scattering: 0.0,
            luminescence: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for band in &self.bands {
            band.validate()?;
        }
        if !(self.scattering >= 0.0) {
            return Err(Error::config(format!(
                "scattering must be >= 0, got {} for {}",
                self.scattering, self.name
            )));
        }
        if let Some(lum) = &self.luminescence {
            lum.validate()?;
        }
        Ok(())
    }

    /// Summed absorbance of all bands at `lambda_nm`.
    pub fn absorbance_at(&self, lambda_nm: f64) -> f64 {
        self.bands.iter().map(|b| b.absorbance_at(lambda_nm)).sum()
    }
}

/// A contaminant mixed into a sample at `dose` (fraction of full strength).
#[derive(Debug, Clone, PartialEq)]
pub struct Contaminant {
    pub substance: SubstanceProfile,
    pub dose: f64,
}

/// A prepared sample: base substance at `api_fraction`, the rest made up
/// with `filler`, plus an optional contaminant.
///
/// `dilution_percent`, when set, is the percentage of the base substance
/// that was **replaced** by filler: 25 means `api_fraction` 0.75. It is the
/// regression target and is carried through manifests.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecipe {
    pub label: String,
    pub substance: SubstanceProfile,
    pub api_fraction: f64,
    pub filler: SubstanceProfile,
    pub contaminant: Option<Contaminant>,
    pub dilution_percent: Option<f64>,
}

impl SampleRecipe {
    pub fn validate(&self) -> Result<()> {
        if self.label.is_empty() {
            return Err(Error::config("recipe label must be non-empty"));
        }
        if !(0.0..=1.0).contains(&self.api_fraction) {
            return Err(Error::Range {
                what: "api_fraction",
                value: self.api_fraction,
                lo: 0.0,
                hi: 1.0,
            });
        }
        self.substance.validate()?;
        self.filler.validate()?;
        if let Some(c) = &self.contaminant {
            if !(c.dose >= 0.0) {
                return Err(Error::config(format!(
                    "contaminant dose must be >= 0, got {}",
                    c.dose
                )));
            }
            c.substance.validate()?;
        }
        if let Some(p) = self.dilution_percent {
            if !(0.0..=100.0).contains(&p) {
                return Err(Error::Range {
                    what: "dilution_percent",
                    value: p,
                    lo: 0.0,
                    hi: 100.0,
                });
            }
        }
        Ok(())
    }
}

/// An in-memory labeled image collection: the working set for training and
/// evaluation. `labels` index into `label_set`.
#[derive(Debug, Clone, Default)]
pub struct LabeledDataset {
    pub label_set: Vec<String>,
    pub images: Vec<SpectrumImage>,
    pub labels: Vec<usize>,
    pub dilution_percent: Vec<Option<f64>>,
    pub seeds: Vec<u64>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.images.len();
        if self.labels.len() != n || self.dilution_percent.len() != n || self.seeds.len() != n {
            return Err(Error::config("dataset columns have inconsistent lengths"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for label in &self.label_set {
            if !seen.insert(label.clone()) {
                return Err(Error::config(format!("duplicate label {label:?}")));
            }
        }
        if let Some(first) = self.images.first() {
            let (w, h) = (first.width(), first.height());
            for (i, img) in self.images.iter().enumerate() {
                if img.width() != w || img.height() != h {
                    return Err(Error::config(format!(
                        "image {i} is {}x{}, expected {w}x{h}",
                        img.width(),
                        img.height()
                    )));
                }
            }
        }
        for (i, &label) in self.labels.iter().enumerate() {
            if label >= self.label_set.len() {
                return Err(Error::config(format!(
                    "item {i} has label index {label} outside the label set"
                )));
            }
        }
        Ok(())
    }

    /// True when every item carries a dilution target.
    pub fn has_dilution_targets(&self) -> bool {
        !self.is_empty() && self.dilution_percent.iter().all(|d| d.is_some())
    }
}
