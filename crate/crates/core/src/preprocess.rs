//! From acquired frames to model-ready features: cropping, pixel
//! normalization, stratified splitting, and the feature access layer the
//! trainers run on.

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::spectral::{LabeledDataset, SpectrumImage, CHANNELS, IMAGE_SIZE};

/// `NORM[v] = v / 255` for every byte value; indexing this is bit-identical
/// to dividing on the fly.
pub static NORM: [f64; 256] = {
    let mut lut = [0.0; 256];
    let mut i = 0;
    while i < 256 {
        lut[i] = i as f64 / 255.0;
        i += 1;
    }
    lut
};

/// A flattened, normalized frame: row-major, channel-interleaved pixel
/// values divided by 255. Canonical frames yield 67,500 values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Flatten a frame in storage order and scale each byte by 1/255.
pub fn flatten_normalize(img: &SpectrumImage) -> FeatureVector {
    FeatureVector(img.data().iter().map(|&v| NORM[v as usize]).collect())
}

/// Flatten without normalization (raw 0–255 values as floats), for models
/// trained with the preprocessing flag off.
pub fn flatten_raw(img: &SpectrumImage) -> FeatureVector {
    FeatureVector(img.data().iter().map(|&v| v as f64).collect())
}

/// Pixel-exact crop of a canonical 150×150 window out of a larger capture.
pub fn crop(raw: &SpectrumImage, x: usize, y: usize, width: usize, height: usize) -> Result<SpectrumImage> {
    if width != IMAGE_SIZE || height != IMAGE_SIZE {
        return Err(Error::config(format!(
            "crop window must be {IMAGE_SIZE}x{IMAGE_SIZE}, got {width}x{height}"
        )));
    }
    if x + width > raw.width() || y + height > raw.height() {
        return Err(Error::Range {
            what: "crop window",
            value: (x + width).max(y + height) as f64,
            lo: 0.0,
            hi: raw.width().min(raw.height()) as f64,
        });
    }
    let mut data = Vec::with_capacity(width * height * CHANNELS);
    for row in y..y + height {
        let start = raw.index(row, x, 0);
        data.extend_from_slice(&raw.data()[start..start + width * CHANNELS]);
    }
    SpectrumImage::new(width, height, data)
}

/// Train/test membership, as indices into the source dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPair {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified split: per class (in label-set order), shuffle that class's
/// items with one shared stream seeded by `seed`, then take
/// `max(1, floor(n · train_fraction))` for train and the rest for test.
/// Output index lists are sorted.
pub fn stratified_split(
    labels: &[usize],
    n_classes: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<SplitPair> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Range {
            what: "train_fraction",
            value: train_fraction,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &label) in labels.iter().enumerate() {
        if label >= n_classes {
            return Err(Error::input(format!(
                "label index {label} outside {n_classes} classes"
            )));
        }
        by_class[label].push(i);
    }

    let mut rng = Stream::from_seed(seed);
    let mut split = SplitPair {
        train: Vec::new(),
        test: Vec::new(),
    };
    for (class, mut idx) in by_class.into_iter().enumerate() {
        if idx.len() < 2 {
            return Err(Error::config(format!(
                "class {class} has {} item(s); stratified split needs at least 2",
                idx.len()
            )));
        }
        rng.shuffle(&mut idx);
        let n_train = ((idx.len() as f64 * train_fraction).floor() as usize).max(1);
        split.train.extend_from_slice(&idx[..n_train]);
        split.test.extend_from_slice(&idx[n_train..]);
    }
    split.train.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Split a dataset by its labels.
pub fn split_dataset(ds: &LabeledDataset, train_fraction: f64, seed: u64) -> Result<SplitPair> {
    stratified_split(&ds.labels, ds.label_set.len(), train_fraction, seed)
}

/// Row-addressable feature storage the trainers iterate over. Implementors
/// must be cheap to read repeatedly; all of training's inner loops go
/// through `dot` and `axpy`.
pub trait FeatureSource: Sync {
    fn count(&self) -> usize;
    fn dim(&self) -> usize;
    /// Dot product of row `row` with `w` (`w.len() == dim`).
    fn dot(&self, row: usize, w: &[f64]) -> f64;
    /// `out += alpha * x_row`.
    fn axpy(&self, row: usize, alpha: f64, out: &mut [f64]);
    /// Materialize row `row` into `out`.
    fn copy_row(&self, row: usize, out: &mut [f64]);
}

/// Dense row-major feature matrix (toy problems, tests).
pub struct DenseFeatures {
    dim: usize,
    data: Vec<f64>,
}

impl DenseFeatures {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::shape(
                format!("multiple of dim {dim}"),
                format!("{} values", data.len()),
            ));
        }
        Ok(DenseFeatures { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::shape(format!("{dim} columns"), format!("{}", row.len())));
            }
            data.extend_from_slice(row);
        }
        DenseFeatures::new(dim, data)
    }

    fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }
}

impl FeatureSource for DenseFeatures {
    fn count(&self) -> usize {
        self.data.len() / self.dim
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn dot(&self, row: usize, w: &[f64]) -> f64 {
        dot_f64(self.row(row), w)
    }

    fn axpy(&self, row: usize, alpha: f64, out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(self.row(row)) {
            *o += alpha * x;
        }
    }

    fn copy_row(&self, row: usize, out: &mut [f64]) {
        out.copy_from_slice(self.row(row));
    }
}

/// Feature view over images kept in their 8-bit form; values are scaled
/// through [`NORM`] on the fly (or taken raw when `normalize` is off), so a
/// 67,500-feature dataset costs one byte per feature to hold.
pub struct PixelFeatures<'a> {
    images: Vec<&'a SpectrumImage>,
    normalize: bool,
}

impl<'a> PixelFeatures<'a> {
    pub fn new(images: Vec<&'a SpectrumImage>, normalize: bool) -> Result<Self> {
        let dim = match images.first() {
            Some(img) => img.data().len(),
            None => return Err(Error::input("empty feature set")),
        };
        for img in &images {
            if img.data().len() != dim {
                return Err(Error::shape(format!("{dim} pixels"), format!("{}", img.data().len())));
            }
        }
        Ok(PixelFeatures { images, normalize })
    }

    /// View of selected items of a dataset.
    pub fn from_dataset(ds: &'a LabeledDataset, indices: &[usize], normalize: bool) -> Result<Self> {
        PixelFeatures::new(indices.iter().map(|&i| &ds.images[i]).collect(), normalize)
    }

    #[inline]
    fn value(&self, byte: u8) -> f64 {
        if self.normalize {
            NORM[byte as usize]
        } else {
            byte as f64
        }
    }
}

impl FeatureSource for PixelFeatures<'_> {
    fn count(&self) -> usize {
        self.images.len()
    }

    fn dim(&self) -> usize {
        self.images[0].data().len()
    }

    fn dot(&self, row: usize, w: &[f64]) -> f64 {
        let px = self.images[row].data();
        if self.normalize {
            dot_u8_norm(px, w)
        } else {
            dot_u8_raw(px, w)
        }
    }

    fn axpy(&self, row: usize, alpha: f64, out: &mut [f64]) {
        let px = self.images[row].data();
        for (o, &p) in out.iter_mut().zip(px) {
            *o += alpha * self.value(p);
        }
    }

    fn copy_row(&self, row: usize, out: &mut [f64]) {
        for (o, &p) in out.iter_mut().zip(self.images[row].data()) {
            *o = self.value(p);
        }
    }
}

/// Eight-lane dot product. Plain mul+add per lane (no FMA contraction), so
/// results are reproducible across machines; the lane split only changes the
/// summation tree, which is fixed by this code, not by the platform.
fn dot_f64(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let chunks = a.len() / 8;
    for i in 0..chunks {
        let pa = &a[i * 8..i * 8 + 8];
        let pb = &b[i * 8..i * 8 + 8];
        for lane in 0..8 {
            acc[lane] += pa[lane] * pb[lane];
        }
    }
    let mut tail = 0.0;
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    (((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))) + tail
}

fn dot_u8_norm(px: &[u8], w: &[f64]) -> f64 {
    debug_assert_eq!(px.len(), w.len());
    let mut acc = [0.0f64; 8];
    let chunks = px.len() / 8;
    for i in 0..chunks {
        let pp = &px[i * 8..i * 8 + 8];
        let pw = &w[i * 8..i * 8 + 8];
        for lane in 0..8 {
            acc[lane] += NORM[pp[lane] as usize] * pw[lane];
        }
    }
    let mut tail = 0.0;
    for i in chunks * 8..px.len() {
        tail += NORM[px[i] as usize] * w[i];
    }
    (((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))) + tail
}

fn dot_u8_raw(px: &[u8], w: &[f64]) -> f64 {
    debug_assert_eq!(px.len(), w.len());
    let mut acc = [0.0f64; 8];
    let chunks = px.len() / 8;
    for i in 0..chunks {
        let pp = &px[i * 8..i * 8 + 8];
        let pw = &w[i * 8..i * 8 + 8];
        for lane in 0..8 {
            acc[lane] += pp[lane] as f64 * pw[lane];
        }
    }
    let mut tail = 0.0;
    for i in chunks * 8..px.len() {
        tail += px[i] as f64 * w[i];
    }
    (((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))) + tail
}
