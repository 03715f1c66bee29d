//! Dataset ingestion, synthetic two-view generation, train/validation
//! splitting and the binary model container.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::baselines::{cca_from_covariances, CCASolution};
use crate::error::{CcaError, Result};
use crate::kernel::{gram, KernelKind, KernelModel};
use crate::linalg::orthonormal_basis;
use crate::pipeline::Variant;
use crate::model::{CanonicalPair, Hyperparams, RowPenalty, TwoViewDataset, ViewMatrix};

// ---------------------------------------------------------------------------
// Delimiter-separated files

/// Reads a samples-per-row numeric table into a `d x n` view.
pub fn load_dsv(path: impl AsRef<Path>, delimiter: u8) -> Result<ViewMatrix> {
    let text = fs::read(path)?;
    parse_dsv(&text, delimiter)
}

pub fn parse_dsv(bytes: &[u8], delimiter: u8) -> Result<ViewMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut values: Vec<f64> = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| CcaError::CorruptFile(e.to_string()))?;
        let line = record.position().map_or(rows + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(CcaError::RaggedRows {
                    line,
                    expected: w,
                    found: record.len(),
                })
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| CcaError::NonNumericField {
                line,
                field: field.to_string(),
            })?;
            values.push(v);
        }
        rows += 1;
    }
    let cols = width.ok_or(CcaError::EmptyInput)?;
    let samples = DMatrix::from_row_slice(rows, cols, &values);
    ViewMatrix::from_samples(&samples)
}

/// Writes a `d x n` matrix as one sample per line with shortest round-trip
/// decimal formatting.
pub fn save_dsv(path: impl AsRef<Path>, data: &DMatrix<f64>, delimiter: u8) -> Result<()> {
    let mut out = Vec::with_capacity(data.len() * 20);
    let sep = delimiter as char;
    for col in data.column_iter() {
        let mut first = true;
        for v in col.iter() {
            if !first {
                out.push(sep as u8);
            }
            first = false;
            write!(out, "{v:?}")?;
        }
        out.push(b'\n');
    }
    fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// MNIST IDX images

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
const MNIST_SIDE: usize = 28;
const HALF: usize = MNIST_SIDE / 2;

/// Loads an IDX image file, scales pixels to `[0, 1]`, and splits every image
/// into its left 14 columns (view `x`) and right 14 columns (view `y`).
///
/// Features within a half are ordered row by row.
pub fn load_mnist_halves(images_path: impl AsRef<Path>) -> Result<TwoViewDataset> {
    parse_mnist_halves(&fs::read(images_path)?)
}

pub fn parse_mnist_halves(bytes: &[u8]) -> Result<TwoViewDataset> {
    let word = |i: usize| -> Result<u32> {
        bytes
            .get(4 * i..4 * i + 4)
            .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or_else(|| CcaError::TruncatedFile("IDX header is shorter than 16 bytes".into()))
    };
    let magic = word(0)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(CcaError::BadMagic(magic));
    }
    let count = word(1)? as usize;
    let (rows, cols) = (word(2)? as usize, word(3)? as usize);
    if rows != MNIST_SIDE || cols != MNIST_SIDE {
        return Err(CcaError::CorruptFile(format!("expected 28x28 images, found {rows}x{cols}")));
    }
    let pixels = &bytes[16..];
    let need = count * rows * cols;
    if pixels.len() < need {
        return Err(CcaError::TruncatedFile(format!(
            "{count} images need {need} pixel bytes, found {}",
            pixels.len()
        )));
    }
    if count == 0 {
        return Err(CcaError::EmptyInput);
    }
    let feat = MNIST_SIDE * HALF;
    let mut left = DMatrix::zeros(feat, count);
    let mut right = DMatrix::zeros(feat, count);
    for img in 0..count {
        let base = img * MNIST_SIDE * MNIST_SIDE;
        for r in 0..MNIST_SIDE {
            for c in 0..MNIST_SIDE {
                let v = pixels[base + r * MNIST_SIDE + c] as f64 / 255.0;
                if c < HALF {
                    left[(r * HALF + c, img)] = v;
                } else {
                    right[(r * HALF + c - HALF, img)] = v;
                }
            }
        }
    }
    TwoViewDataset::from_matrices(left, right)
}

// ---------------------------------------------------------------------------
// Synthetic data

/// Recipe for a synthetic two-view problem with planted canonical structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d1: usize,
    pub d2: usize,
    pub k_true: usize,
    /// Planted canonical correlations, descending, each in `(0, 1]`.
    pub correlations: Vec<f64>,
    pub noise_scale: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(CcaError::InvalidSpec(m));
        if self.n < 2 || self.d1 == 0 || self.d2 == 0 {
            return bad(format!("need n >= 2 and positive dimensions, got n={} d1={} d2={}", self.n, self.d1, self.d2));
        }
        if self.k_true == 0 || self.k_true > self.d1.min(self.d2) {
            return bad(format!("k_true = {} must lie in 1..=min(d1, d2)", self.k_true));
        }
        if self.correlations.len() != self.k_true {
            return bad(format!("{} correlations for k_true = {}", self.correlations.len(), self.k_true));
        }
        if self.correlations.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
            return bad("correlations must lie in (0, 1]".into());
        }
        if self.correlations.windows(2).any(|w| w[1] > w[0]) {
            return bad("correlations must be sorted descending".into());
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return bad("noise_scale must be finite and non-negative".into());
        }
        Ok(())
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random mixing `Q1 diag(s) Q2^T` with singular values spread over `[0.5, 2]`.
fn mixing(d: usize, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    let q1 = orthonormal_basis(&gaussian(d, d, rng))?;
    let q2 = orthonormal_basis(&gaussian(d, d, rng))?;
    let s = DVector::from_fn(d, |i, _| {
        let t = if d == 1 { 0.0 } else { i as f64 / (d - 1) as f64 };
        0.5 * 4f64.powf(t)
    });
    Ok(q1 * DMatrix::from_diagonal(&s) * q2.transpose())
}

/// Draws a two-view dataset whose population canonical correlations are
/// `spec.correlations` before noise.
///
/// Each view is a mixing matrix applied to unit-variance latent factors: the
/// first `k_true` factors of the two views have correlations
/// `spec.correlations`, the rest are independent. Isotropic noise of scale
/// `noise_scale` is added on top. The returned solution is the exact
/// population CCA of the resulting covariances, noise included.
pub fn synth_two_view(spec: &SyntheticSpec) -> Result<(TwoViewDataset, CCASolution)> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let a = mixing(spec.d1, &mut rng)?;
    let b = mixing(spec.d2, &mut rng)?;
    let k = spec.k_true;

    let shared = gaussian(k, spec.n, &mut rng);
    let mut latent_x = gaussian(spec.d1, spec.n, &mut rng);
    let mut latent_y = gaussian(spec.d2, spec.n, &mut rng);
    for (i, &rho) in spec.correlations.iter().enumerate() {
        let (s, e) = (rho.sqrt(), (1.0 - rho).sqrt());
        let z = shared.row(i).into_owned();
        let row_x = &z * s + latent_x.row(i) * e;
        let row_y = &z * s + latent_y.row(i) * e;
        latent_x.set_row(i, &row_x);
        latent_y.set_row(i, &row_y);
    }
    let noise_x = gaussian(spec.d1, spec.n, &mut rng);
    let noise_y = gaussian(spec.d2, spec.n, &mut rng);
    let x = &a * latent_x + noise_x * spec.noise_scale;
    let y = &b * latent_y + noise_y * spec.noise_scale;

    let sigma2 = spec.noise_scale * spec.noise_scale;
    let cov_x = &a * a.transpose() + DMatrix::<f64>::identity(spec.d1, spec.d1) * sigma2;
    let cov_y = &b * b.transpose() + DMatrix::<f64>::identity(spec.d2, spec.d2) * sigma2;
    let rho = DMatrix::from_diagonal(&DVector::from_column_slice(&spec.correlations));
    let cov_xy = a.columns(0, k) * rho * b.columns(0, k).transpose();
    let truth = cca_from_covariances(&cov_x, &cov_y, &cov_xy, k, 0.0, 0.0)?;

    Ok((TwoViewDataset::from_matrices(x, y)?, truth))
}

/// Appends independent Gaussian features of standard deviation `scale` to
/// both views.
pub fn append_noise_features(
    ds: &TwoViewDataset,
    extra_x: usize,
    extra_y: usize,
    scale: f64,
    seed: u64,
) -> Result<TwoViewDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx = gaussian(extra_x, ds.n(), &mut rng) * scale;
    let ny = gaussian(extra_y, ds.n(), &mut rng) * scale;
    TwoViewDataset::new(ds.x.stack_features(&nx)?, ds.y.stack_features(&ny)?)
}

/// Seeded random split into `(train, validation)` with
/// `round(fraction * n)` validation samples (at least one on each side).
///
/// Both halves keep the original sample order.
pub fn split_train_validation(
    ds: &TwoViewDataset,
    fraction: f64,
    seed: u64,
) -> Result<(TwoViewDataset, TwoViewDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CcaError::InvalidFraction(fraction));
    }
    let (train, valid) = split_indices(ds.n(), fraction, seed)?;
    Ok((ds.select_samples(&train), ds.select_samples(&valid)))
}

/// Index sets behind [`split_train_validation`].
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CcaError::InvalidFraction(fraction));
    }
    if n < 2 {
        return Err(CcaError::DegenerateInput(format!("cannot split {n} samples")));
    }
    let n_valid = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut valid = order[..n_valid].to_vec();
    let mut train = order[n_valid..].to_vec();
    valid.sort_unstable();
    train.sort_unstable();
    Ok((train, valid))
}

// ---------------------------------------------------------------------------
// Model container
//
// Layout (all integers and floats little-endian):
//   magic        8 bytes  "RMENCCA\0"
//   version      u32      MODEL_VERSION
//   kind         u8       0 = linear pair, 1 = kernel
//   variant      u8       0 = rmen, 1 = men, 2 = appgrad, 3 = closed-form,
//                         4 = kernel-rmen
//   hyperparams  lambda1 f64, lambda2 f64, eta f64, gamma f64, zeta f64,
//                k u64, max_iters u64, tol f64, batch_size u64 (0 = none),
//                seed u64, row_penalty u8 (0 = l21, 1 = frobenius)
//   means_x      vector
//   means_y      vector
//   linear body  U matrix, V matrix
//   kernel body  kernel_x, kernel_y, train_x matrix, train_y matrix,
//                W_x matrix, W_y matrix
// vector = u64 length, then the values
// matrix = u64 rows, u64 cols, then rows*cols values in column-major order
// kernel = u8 tag (0 = gaussian, 1 = linear), f64 width (0 for linear)

pub const MODEL_MAGIC: &[u8; 8] = b"RMENCCA\0";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelBody {
    Linear {
        pair: CanonicalPair,
    },
    Kernel {
        kind_x: KernelKind,
        kind_y: KernelKind,
        train_x: DMatrix<f64>,
        train_y: DMatrix<f64>,
        w_x: DMatrix<f64>,
        w_y: DMatrix<f64>,
    },
}

/// Everything needed to project new samples with a fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub variant: Variant,
    pub hyperparams: Hyperparams,
    pub means_x: DVector<f64>,
    pub means_y: DVector<f64>,
    pub body: ModelBody,
}

impl ModelFile {
    pub fn from_kernel(hp: &Hyperparams, means_x: DVector<f64>, means_y: DVector<f64>, model: &KernelModel) -> Self {
        Self {
            variant: Variant::KernelRmen,
            hyperparams: hp.clone(),
            means_x,
            means_y,
            body: ModelBody::Kernel {
                kind_x: model.gram_x.kind,
                kind_y: model.gram_y.kind,
                train_x: model.gram_x.train_points.clone(),
                train_y: model.gram_y.train_points.clone(),
                w_x: model.w_x.clone(),
                w_y: model.w_y.clone(),
            },
        }
    }

    /// Rebuilds the kernel model, recomputing the training Gram matrices.
    pub fn kernel_model(&self) -> Result<Option<KernelModel>> {
        let ModelBody::Kernel {
            kind_x,
            kind_y,
            train_x,
            train_y,
            w_x,
            w_y,
        } = &self.body
        else {
            return Ok(None);
        };
        Ok(Some(KernelModel {
            w_x: w_x.clone(),
            w_y: w_y.clone(),
            gram_x: gram(&ViewMatrix::new(train_x.clone())?, *kind_x)?,
            gram_y: gram(&ViewMatrix::new(train_y.clone())?, *kind_y)?,
        }))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MODEL_MAGIC);
        w.u32(MODEL_VERSION);
        let hp = &self.hyperparams;
        w.u8(matches!(self.body, ModelBody::Kernel { .. }) as u8);
        w.u8(Variant::ALL.iter().position(|v| *v == self.variant).expect("listed variant") as u8);
        for v in [hp.lambda1, hp.lambda2, hp.eta, hp.gamma, hp.zeta] {
            w.f64(v);
        }
        w.u64(hp.k as u64);
        w.u64(hp.max_iters as u64);
        w.f64(hp.tol);
        w.u64(hp.batch_size.unwrap_or(0) as u64);
        w.u64(hp.seed);
        w.u8(match hp.row_penalty {
            RowPenalty::L21 => 0,
            RowPenalty::Frobenius => 1,
        });
        w.vector(&self.means_x);
        w.vector(&self.means_y);
        match &self.body {
            ModelBody::Linear { pair } => {
                w.matrix(&pair.u);
                w.matrix(&pair.v);
            }
            ModelBody::Kernel {
                kind_x,
                kind_y,
                train_x,
                train_y,
                w_x,
                w_y,
            } => {
                w.kernel(kind_x);
                w.kernel(kind_y);
                for m in [train_x, train_y, w_x, w_y] {
                    w.matrix(m);
                }
            }
        }
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MODEL_MAGIC {
            return Err(CcaError::CorruptFile("missing model magic".into()));
        }
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(CcaError::VersionMismatch {
                found: version,
                expected: MODEL_VERSION,
            });
        }
        let kind = r.u8()?;
        let tag = r.u8()?;
        let variant = *Variant::ALL
            .get(tag as usize)
            .ok_or_else(|| CcaError::CorruptFile(format!("unknown variant tag {tag}")))?;
        if (variant == Variant::KernelRmen) != (kind == 1) {
            return Err(CcaError::CorruptFile("variant does not match the model kind".into()));
        }
        let mut hp = Hyperparams {
            lambda1: r.f64()?,
            lambda2: r.f64()?,
            eta: r.f64()?,
            gamma: r.f64()?,
            zeta: r.f64()?,
            ..Hyperparams::default()
        };
        hp.k = r.u64()? as usize;
        hp.max_iters = r.u64()? as usize;
        hp.tol = r.f64()?;
        hp.batch_size = match r.u64()? {
            0 => None,
            m => Some(m as usize),
        };
        hp.seed = r.u64()?;
        hp.row_penalty = match r.u8()? {
            0 => RowPenalty::L21,
            1 => RowPenalty::Frobenius,
            t => return Err(CcaError::CorruptFile(format!("unknown row penalty tag {t}"))),
        };
        let means_x = r.vector()?;
        let means_y = r.vector()?;
        let body = match kind {
            0 => {
                let u = r.matrix()?;
                let v = r.matrix()?;
                if u.nrows() != means_x.len() || v.nrows() != means_y.len() || u.ncols() != v.ncols() {
                    return Err(CcaError::CorruptFile("pair shape does not match the stored means".into()));
                }
                ModelBody::Linear {
                    pair: CanonicalPair { u, v },
                }
            }
            1 => {
                let kind_x = r.kernel()?;
                let kind_y = r.kernel()?;
                let train_x = r.matrix()?;
                let train_y = r.matrix()?;
                let w_x = r.matrix()?;
                let w_y = r.matrix()?;
                let n = train_x.ncols();
                if train_y.ncols() != n
                    || w_x.nrows() != n
                    || w_y.nrows() != n
                    || w_x.ncols() != w_y.ncols()
                    || train_x.nrows() != means_x.len()
                    || train_y.nrows() != means_y.len()
                {
                    return Err(CcaError::CorruptFile("kernel model shapes are inconsistent".into()));
                }
                ModelBody::Kernel {
                    kind_x,
                    kind_y,
                    train_x,
                    train_y,
                    w_x,
                    w_y,
                }
            }
            t => return Err(CcaError::CorruptFile(format!("unknown model kind {t}"))),
        };
        if r.pos != bytes.len() {
            return Err(CcaError::CorruptFile(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self {
            variant,
            hyperparams: hp,
            means_x,
            means_y,
            body,
        })
    }
}

pub fn save_model(path: impl AsRef<Path>, model: &ModelFile) -> Result<()> {
    fs::write(path, model.to_bytes())?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    ModelFile::from_bytes(&fs::read(path)?)
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn vector(&mut self, v: &DVector<f64>) {
        self.u64(v.len() as u64);
        v.iter().for_each(|&x| self.f64(x));
    }
    fn matrix(&mut self, m: &DMatrix<f64>) {
        self.u64(m.nrows() as u64);
        self.u64(m.ncols() as u64);
        m.iter().for_each(|&x| self.f64(x));
    }
    fn kernel(&mut self, k: &KernelKind) {
        match *k {
            KernelKind::Gaussian { width } => {
                self.u8(0);
                self.f64(width);
            }
            KernelKind::Linear => {
                self.u8(1);
                self.f64(0.0);
            }
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| CcaError::CorruptFile(format!("unexpected end of file at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn len(&mut self, elems: u64) -> Result<usize> {
        let remaining = (self.bytes.len() - self.pos) as u64 / 8;
        if elems > remaining {
            return Err(CcaError::CorruptFile(format!("length {elems} exceeds the file size")));
        }
        Ok(elems as usize)
    }
    fn vector(&mut self) -> Result<DVector<f64>> {
        let raw = self.u64()?;
        let len = self.len(raw)?;
        let values = (0..len).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(values))
    }
    fn matrix(&mut self) -> Result<DMatrix<f64>> {
        let rows = self.u64()?;
        let cols = self.u64()?;
        let total = self.len(rows.checked_mul(cols).ok_or_else(|| CcaError::CorruptFile("matrix size overflows".into()))?)?;
        let values = (0..total).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_vec(rows as usize, cols as usize, values))
    }
    fn kernel(&mut self) -> Result<KernelKind> {
        let tag = self.u8()?;
        let width = self.f64()?;
        match tag {
            0 => Ok(KernelKind::Gaussian { width }),
            1 => Ok(KernelKind::Linear),
            t => Err(CcaError::CorruptFile(format!("unknown kernel tag {t}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dsv_small_and_errors() {
        let v = parse_dsv(b"1,2\n3,4\n", b',').unwrap();
        assert_eq!((v.n(), v.d()), (2, 2));
        assert_eq!(v.data(), &DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 4.0]));
        assert!(matches!(parse_dsv(b"", b','), Err(CcaError::EmptyInput)));
        assert!(matches!(
            parse_dsv(b"1,2\n3\n", b','),
            Err(CcaError::RaggedRows { line: 2, expected: 2, found: 1 })
        ));
        match parse_dsv(b"1\t2\n3\tx\n", b'\t') {
            Err(CcaError::NonNumericField { line, field }) => {
                assert_eq!(line, 2);
                assert_eq!(field, "x");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dsv_round_trip_is_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = gaussian(50, 100, &mut rng).map(|v| v * 1e3 / 7.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        save_dsv(&path, &m, b',').unwrap();
        let back = load_dsv(&path, b',').unwrap();
        assert_eq!(back.data(), &m);
    }

    fn idx_bytes(images: &[[u8; 784]]) -> Vec<u8> {
        let mut out = Vec::new();
        for w in [IDX_IMAGE_MAGIC, images.len() as u32, 28, 28] {
            out.extend_from_slice(&w.to_be_bytes());
        }
        for img in images {
            out.extend_from_slice(img);
        }
        out
    }

    #[test]
    fn mnist_split_and_errors() {
        let mut img = [0u8; 784];
        for (i, p) in img.iter_mut().enumerate() {
            *p = (i % 251) as u8;
        }
        let bytes = idx_bytes(&[img, [0u8; 784]]);
        let ds = parse_mnist_halves(&bytes).unwrap();
        assert_eq!((ds.n(), ds.x.d(), ds.y.d()), (2, 392, 392));
        // Pixel (row 3, col 20) lands in the right half at 3 * 14 + 6.
        assert_eq!(ds.y.data()[(3 * 14 + 6, 0)], img[3 * 28 + 20] as f64 / 255.0);
        assert_eq!(ds.x.data()[(5 * 14 + 2, 0)], img[5 * 28 + 2] as f64 / 255.0);
        assert!(ds.x.data().column(1).iter().all(|&v| v == 0.0));
        assert!(ds.y.data().column(1).iter().all(|&v| v == 0.0));
        // Independent byte-level checksum of the first image.
        let raw: f64 = bytes[16..16 + 784].iter().map(|&b| b as f64 / 255.0).sum();
        let split: f64 = ds.x.data().column(0).sum() + ds.y.data().column(0).sum();
        assert!((raw - split).abs() < 1e-9);

        let mut bad = bytes.clone();
        bad[3] = 0x01;
        assert!(matches!(parse_mnist_halves(&bad), Err(CcaError::BadMagic(0x801))));
        assert!(matches!(
            parse_mnist_halves(&bytes[..bytes.len() - 1]),
            Err(CcaError::TruncatedFile(_))
        ));
        assert!(matches!(parse_mnist_halves(&bytes[..10]), Err(CcaError::TruncatedFile(_))));
    }

    #[test]
    fn synth_is_seeded_and_checked() {
        let spec = SyntheticSpec {
            n: 50,
            d1: 4,
            d2: 3,
            k_true: 2,
            correlations: vec![0.9, 0.5],
            noise_scale: 0.1,
            seed: 11,
        };
        let (a, _) = synth_two_view(&spec).unwrap();
        let (b, _) = synth_two_view(&spec).unwrap();
        assert_eq!(a, b);
        let unsorted = SyntheticSpec {
            correlations: vec![0.5, 0.9],
            ..spec.clone()
        };
        assert!(matches!(synth_two_view(&unsorted), Err(CcaError::InvalidSpec(_))));
        let too_many = SyntheticSpec {
            k_true: 4,
            correlations: vec![0.9; 4],
            ..spec
        };
        assert!(matches!(synth_two_view(&too_many), Err(CcaError::InvalidSpec(_))));
    }

    #[test]
    fn split_sizes_and_partition() {
        let ds = TwoViewDataset::from_matrices(
            DMatrix::from_fn(2, 100, |i, j| (i * 100 + j) as f64),
            DMatrix::from_fn(1, 100, |_, j| j as f64),
        )
        .unwrap();
        let (train, valid) = split_train_validation(&ds, 0.2, 3).unwrap();
        assert_eq!((train.n(), valid.n()), (80, 20));
        // Pairing preserved: y carries the original sample index.
        for j in 0..valid.n() {
            let idx = valid.y.data()[(0, j)] as usize;
            assert_eq!(valid.x.data()[(0, j)], idx as f64);
        }
        let (ti, vi) = split_indices(100, 0.2, 3).unwrap();
        let mut all: Vec<usize> = ti.iter().chain(&vi).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(split_indices(2, 0.5, 0).unwrap().0.len(), 1);
        assert!(matches!(split_indices(10, 1.0, 0), Err(CcaError::InvalidFraction(_))));
        assert!(matches!(split_indices(10, 0.0, 0), Err(CcaError::InvalidFraction(_))));
    }

    #[test]
    fn model_round_trip_and_corruption() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = ModelFile {
            variant: Variant::Men,
            hyperparams: Hyperparams {
                batch_size: Some(32),
                row_penalty: RowPenalty::Frobenius,
                ..Hyperparams::with_k(2)
            },
            means_x: DVector::from_vec(vec![0.1, 0.2, 0.3]),
            means_y: DVector::from_vec(vec![-1.0, 1.0]),
            body: ModelBody::Linear {
                pair: CanonicalPair {
                    u: gaussian(3, 2, &mut rng),
                    v: gaussian(2, 2, &mut rng),
                },
            },
        };
        let bytes = model.to_bytes();
        assert_eq!(&bytes[..8], MODEL_MAGIC);
        assert_eq!(ModelFile::from_bytes(&bytes).unwrap(), model);
        assert!(matches!(
            ModelFile::from_bytes(&bytes[..bytes.len() - 3]),
            Err(CcaError::CorruptFile(_))
        ));
        let mut wrong = bytes.clone();
        wrong[8] = 9;
        assert!(matches!(
            ModelFile::from_bytes(&wrong),
            Err(CcaError::VersionMismatch { found: 9, .. })
        ));
        let mut extra = bytes;
        extra.push(0);
        assert!(matches!(ModelFile::from_bytes(&extra), Err(CcaError::CorruptFile(_))));
    }
}
