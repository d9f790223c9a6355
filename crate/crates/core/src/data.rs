//! Sparse design matrices, LibSVM ingestion and synthetic dataset generation.
//!
//! Feature indices are 1-based in LibSVM text files and 0-based in memory.
//! Rows are always stored sparse; parameter vectors are dense slices.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Sparse vector in canonical form: strictly increasing indices, no stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    indices: Vec<usize>,
    values: Vec<f64>,
    dim: usize,
}

impl SparseVector {
    /// Builds a canonical sparse vector. Explicit zeros are dropped.
    pub fn new(indices: Vec<usize>, values: Vec<f64>, dim: usize) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: indices.len(),
                found: values.len(),
            });
        }
        for w in indices.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidArgument(format!(
                    "sparse indices must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        if let Some(&last) = indices.last() {
            if last >= dim {
                return Err(Error::IndexOutOfRange { index: last, len: dim });
            }
        }
        let (indices, values) = indices
            .into_iter()
            .zip(values)
            .filter(|&(_, v)| v != 0.0)
            .unzip();
        Ok(Self { indices, values, dim })
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, v))
            .unzip();
        Self {
            indices,
            values,
            dim: dense.len(),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            indices: Vec::new(),
            values: Vec::new(),
            dim,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Inner product with a dense vector of matching length.
    pub fn dot(&self, w: &[f64]) -> Result<f64> {
        if w.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: w.len(),
            });
        }
        Ok(self.dot_unchecked(w))
    }

    /// Inner product with `w`, which must cover every stored index.
    #[inline]
    pub fn dot_unchecked(&self, w: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * w[i]).sum()
    }

    /// `out += scale * self`.
    #[inline]
    pub fn axpy_into(&self, scale: f64, out: &mut [f64]) {
        for (i, v) in self.iter() {
            out[i] += scale * v;
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.axpy_into(1.0, &mut out);
        out
    }

    fn scaled(&self, factor: f64) -> Self {
        Self::new(
            self.indices.clone(),
            self.values.iter().map(|v| v * factor).collect(),
            self.dim,
        )
        .expect("scaling preserves canonical form")
    }
}

/// Free-function form of [`SparseVector::dot`].
pub fn dot(v: &SparseVector, w: &[f64]) -> Result<f64> {
    v.dot(w)
}

/// Immutable labelled sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<SparseVector>,
    labels: Vec<f64>,
    d: usize,
    r: f64,
}

impl Dataset {
    pub fn new(rows: Vec<SparseVector>, labels: Vec<f64>, d: usize) -> Result<Self> {
        if rows.is_empty() || d == 0 {
            return Err(Error::InvalidArgument(
                "dataset needs at least one row and one feature".into(),
            ));
        }
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: labels.len(),
            });
        }
        if let Some(bad) = rows.iter().find(|row| row.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.dim(),
            });
        }
        if let Some(&bad) = labels.iter().find(|y| !y.is_finite()) {
            return Err(Error::InvalidLabel {
                label: bad,
                reason: "labels must be finite".into(),
            });
        }
        let r = rows.iter().map(SparseVector::norm).fold(0.0, f64::max);
        Ok(Self { rows, labels, d, r })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Largest Euclidean row norm.
    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn rows(&self) -> &[SparseVector] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &SparseVector {
        &self.rows[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(SparseVector::nnz).sum()
    }

    /// Maps labels onto contiguous class ids `0..k`.
    ///
    /// `{-1, +1}` maps to `{0, 1}`; otherwise labels must be integers forming
    /// a contiguous range starting at the smallest observed label.
    pub fn class_ids(&self) -> Result<(Vec<usize>, usize)> {
        for &y in &self.labels {
            if y.fract() != 0.0 {
                return Err(Error::InvalidLabel {
                    label: y,
                    reason: "class labels must be integers".into(),
                });
            }
        }
        let observed: BTreeSet<i64> = self.labels.iter().map(|&y| y as i64).collect();
        if observed.iter().all(|&y| y == -1 || y == 1) {
            let ids = self.labels.iter().map(|&y| usize::from(y > 0.0)).collect();
            return Ok((ids, 2));
        }
        let min = *observed.iter().next().expect("non-empty dataset");
        let k = observed.len();
        for (expected, &y) in (min..).zip(observed.iter()) {
            if y != expected {
                return Err(Error::InvalidLabel {
                    label: expected as f64,
                    reason: format!("classes must be contiguous from {min}; {expected} is missing"),
                });
            }
        }
        let ids = self.labels.iter().map(|&y| (y as i64 - min) as usize).collect();
        Ok((ids, k))
    }

    /// Number of distinct classes under [`Dataset::class_ids`].
    pub fn num_classes(&self) -> Result<usize> {
        self.class_ids().map(|(_, k)| k)
    }

    /// Copy with every row divided by `r`, so the largest row norm becomes 1.
    pub fn scaled_to_unit_radius(&self) -> Self {
        if self.r == 0.0 {
            return self.clone();
        }
        let factor = 1.0 / self.r;
        let rows = self.rows.iter().map(|row| row.scaled(factor)).collect();
        Self::new(rows, self.labels.clone(), self.d).expect("scaling preserves shape")
    }

    pub fn with_labels(&self, labels: Vec<f64>) -> Result<Self> {
        Self::new(self.rows.clone(), labels, self.d)
    }

    /// Binary `{-1, +1}` labels from the sign of the current real labels.
    pub fn binarized(&self) -> Self {
        let labels = self
            .labels
            .iter()
            .map(|&y| if y > 0.0 { 1.0 } else { -1.0 })
            .collect();
        self.with_labels(labels).expect("same shape")
    }

    /// `k` roughly balanced classes `0..k` by rank of the current real labels.
    pub fn discretized(&self, k: usize) -> Result<Self> {
        if k < 2 || k > self.n() {
            return Err(Error::InvalidArgument(format!(
                "cannot split {} samples into {k} classes",
                self.n()
            )));
        }
        let mut order: Vec<usize> = (0..self.n()).collect();
        order.sort_by(|&a, &b| self.labels[a].total_cmp(&self.labels[b]).then(a.cmp(&b)));
        let mut labels = vec![0.0; self.n()];
        for (rank, &i) in order.iter().enumerate() {
            labels[i] = (rank * k / self.n()) as f64;
        }
        self.with_labels(labels)
    }

    /// First `n` rows.
    pub fn head(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n() {
            return Err(Error::InvalidArgument(format!(
                "head({n}) out of range for {} rows",
                self.n()
            )));
        }
        Self::new(self.rows[..n].to_vec(), self.labels[..n].to_vec(), self.d)
    }
}

/// Reads a LibSVM file; names ending in `.gz` are decompressed on the fly.
pub fn load_libsvm(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let gz = path.extension().is_some_and(|ext| ext == "gz");
    if gz {
        read_libsvm(BufReader::new(GzDecoder::new(file)), expected_dim)
    } else {
        read_libsvm(BufReader::new(file), expected_dim)
    }
}

/// Parses LibSVM text: `label idx:val idx:val ...` with 1-based increasing
/// indices. Blank lines and `#` comments are skipped.
pub fn read_libsvm(reader: impl BufRead, expected_dim: Option<usize>) -> Result<Dataset> {
    if expected_dim == Some(0) {
        return Err(Error::InvalidArgument("expected dimension must be positive".into()));
    }
    let mut parsed: Vec<(Vec<usize>, Vec<f64>)> = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: lineno, message };
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a token");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| parse_err(format!("bad label {label_tok:?}")))?;
        if !label.is_finite() {
            return Err(parse_err(format!("non-finite label {label_tok:?}")));
        }
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(format!("feature {tok:?} is not idx:val")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(format!("bad feature index {idx:?}")))?;
            if idx == 0 {
                return Err(parse_err("feature indices are 1-based".into()));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| parse_err(format!("bad feature value {val:?}")))?;
            if !val.is_finite() {
                return Err(parse_err(format!("non-finite feature value {val}")));
            }
            if let Some(&prev) = indices.last() {
                if idx - 1 <= prev {
                    return Err(parse_err(format!(
                        "feature indices must be strictly increasing ({} then {idx})",
                        prev + 1
                    )));
                }
            }
            if let Some(dim) = expected_dim {
                if idx > dim {
                    return Err(parse_err(format!(
                        "feature index {idx} exceeds expected dimension {dim}"
                    )));
                }
            }
            max_index = max_index.max(idx);
            indices.push(idx - 1);
            values.push(val);
        }
        parsed.push((indices, values));
        labels.push(label);
    }

    if parsed.is_empty() {
        return Err(Error::InvalidArgument("LibSVM input contains no samples".into()));
    }
    let d = expected_dim.unwrap_or(max_index).max(1);
    let rows = parsed
        .into_iter()
        .map(|(idx, val)| SparseVector::new(idx, val, d))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(rows, labels, d)
}

/// Writes `data` in LibSVM text format with 1-based indices. Floats use the
/// shortest representation that parses back to the same value.
pub fn write_libsvm(data: &Dataset, mut out: impl Write) -> Result<()> {
    for (row, y) in data.rows().iter().zip(data.labels()) {
        write!(out, "{y}")?;
        for (i, v) in row.iter() {
            write!(out, " {}:{v}", i + 1)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads a whole LibSVM document from a string.
pub fn parse_libsvm(text: &str, expected_dim: Option<usize>) -> Result<Dataset> {
    read_libsvm(text.as_bytes(), expected_dim)
}

/// Reads an arbitrary stream fully (used for piped input).
pub fn read_libsvm_from(mut reader: impl Read, expected_dim: Option<usize>) -> Result<Dataset> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    parse_libsvm(&text, expected_dim)
}

/// Synthetic regression data with exact or near duplicates.
///
/// `n / duplication` base rows are drawn from a standard Gaussian. Row `i` is
/// base row `i % (n / duplication)` plus Gaussian noise of scale `noise`, so
/// with zero noise row `i` equals row `i + n / duplication`. Labels come from
/// a planted Gaussian linear model plus label noise of the same scale.
pub fn synthesize_redundant(
    n: usize,
    d: usize,
    duplication: usize,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 || d == 0 || duplication == 0 {
        return Err(Error::InvalidArgument(
            "n, d and duplication must be positive".into(),
        ));
    }
    if n % duplication != 0 {
        return Err(Error::InvalidArgument(format!(
            "n = {n} is not divisible by duplication = {duplication}"
        )));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise must be nonnegative, got {noise}")));
    }
    let base_count = n / duplication;
    let mut base_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(1);
    let mut model_rng = ChaCha8Rng::seed_from_u64(seed);
    model_rng.set_stream(2);

    let gauss = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let base: Vec<Vec<f64>> = (0..base_count)
        .map(|_| (0..d).map(|_| gauss(&mut base_rng)).collect())
        .collect();
    let planted: Vec<f64> = (0..d).map(|_| gauss(&mut model_rng)).collect();

    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = base[i % base_count].clone();
        if noise > 0.0 {
            for v in &mut x {
                *v += noise * gauss(&mut noise_rng);
            }
        }
        let clean: f64 = x.iter().zip(&planted).map(|(a, b)| a * b).sum();
        let y = if noise > 0.0 {
            clean + noise * gauss(&mut noise_rng)
        } else {
            clean
        };
        rows.push(SparseVector::from_dense(&x));
        labels.push(y);
    }
    Dataset::new(rows, labels, d)
}
