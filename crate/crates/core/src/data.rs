//! Dataset synthesis and imbalance carving.
//!
//! A [`LabeledDataset`] is a dense row-major feature matrix with one integer
//! class label per row. Two count generators produce the per-class sample
//! profiles used throughout: [`long_tailed_counts`] decays exponentially
//! across the class index and [`step_counts`] splits classes into a frequent
//! half and a rare half. [`subsample`] carves a balanced pool down to a
//! prescribed profile, and [`sample_gaussian_mixture`] synthesizes labeled
//! point clouds. CSV I/O uses a fixed `f0..f{D-1},label` header.
//!
//! Class index order is the imbalance order: class 0 is the most frequent.
//! All randomized operations are pure functions of their seed (ChaCha8).

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Nudge added before flooring generator counts. `powf` may round a
/// mathematically integral product slightly below the integer (for example
/// 90·9^(−1/2) can evaluate just under 30.0), which would floor one unit too
/// low. Counts are at most 10^6, so a genuine fractional part is never this
/// close to the next integer.
const FLOOR_NUDGE: f64 = 1e-9;

/// Dense labeled dataset: `len()` rows of `dim()` features plus a class label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    dim: usize,
    num_classes: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
}

impl LabeledDataset {
    /// Creates an empty dataset with the given feature width and class count.
    pub fn new(dim: usize, num_classes: usize) -> Self {
        Self {
            dim,
            num_classes,
            features: Vec::new(),
            labels: Vec::new(),
        }
    }

    /// Builds a dataset from a flat row-major feature buffer and labels.
    pub fn from_parts(
        dim: usize,
        num_classes: usize,
        features: Vec<f64>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if features.len() != labels.len() * dim {
            return Err(Error::ShapeMismatch(format!(
                "{} feature values do not fill {} rows of width {}",
                features.len(),
                labels.len(),
                dim
            )));
        }
        for (i, &label) in labels.iter().enumerate() {
            if label >= num_classes {
                return Err(Error::InvalidArgument(format!(
                    "label {label} at row {i} out of range for {num_classes} classes"
                )));
            }
        }
        Ok(Self {
            dim,
            num_classes,
            features,
            labels,
        })
    }

    /// Appends one sample.
    pub fn push(&mut self, feature: &[f64], label: usize) -> Result<()> {
        if feature.len() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "feature width {} does not match dataset width {}",
                feature.len(),
                self.dim
            )));
        }
        if label >= self.num_classes {
            return Err(Error::ClassOutOfRange {
                index: label,
                num_classes: self.num_classes,
            });
        }
        self.features.extend_from_slice(feature);
        self.labels.push(label);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Feature row `i`.
    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Label of row `i`.
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Number of samples per class, indexed by class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes];
        for &label in &self.labels {
            counts[label] += 1;
        }
        counts
    }

    /// Returns the same rows with the class count widened to `num_classes`.
    /// Useful after CSV ingestion, where the class count is inferred from the
    /// labels actually present.
    pub fn with_num_classes(mut self, num_classes: usize) -> Result<Self> {
        if let Some(&max) = self.labels.iter().max() {
            if max >= num_classes {
                return Err(Error::InvalidArgument(format!(
                    "label {max} out of range for {num_classes} classes"
                )));
            }
        }
        self.num_classes = num_classes;
        Ok(self)
    }
}

/// Which imbalance profile a spec describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImbalanceKind {
    LongTailed,
    Step,
}

/// Imbalance profile: `ratio` (ρ) is most-frequent over least-frequent count,
/// `n_max` the count of the most frequent class.
#[derive(Debug, Clone, PartialEq)]
pub struct ImbalanceSpec {
    pub kind: ImbalanceKind,
    pub ratio: f64,
    pub n_max: usize,
}

impl ImbalanceSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.ratio.is_finite() || self.ratio < 1.0 {
            return Err(Error::InvalidSpec(format!(
                "imbalance ratio must be a finite value >= 1, got {}",
                self.ratio
            )));
        }
        if (self.n_max as f64) < self.ratio.ceil() {
            return Err(Error::InvalidSpec(format!(
                "n_max {} is too small for ratio {}: the rarest class would be empty",
                self.n_max, self.ratio
            )));
        }
        Ok(())
    }

    /// Per-class counts for `num_classes` classes under this profile.
    pub fn counts(&self, num_classes: usize) -> Result<Vec<usize>> {
        match self.kind {
            ImbalanceKind::LongTailed => long_tailed_counts(num_classes, self),
            ImbalanceKind::Step => step_counts(num_classes, self),
        }
    }
}

fn check_generator_args(num_classes: usize, spec: &ImbalanceSpec, kind: ImbalanceKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::InvalidSpec(format!(
            "spec kind {:?} does not match requested generator {:?}",
            spec.kind, kind
        )));
    }
    if num_classes < 2 {
        return Err(Error::InvalidSpec(format!(
            "imbalance profiles need at least 2 classes, got {num_classes}"
        )));
    }
    spec.validate()
}

/// Long-tailed counts: `counts[k] = floor(n_max · ratio^(−k/(K−1)))`.
///
/// Class 0 keeps `n_max` samples and class K−1 keeps `floor(n_max/ratio)`;
/// counts are monotone non-increasing. Flooring (not rounding) keeps the
/// realized max/min ratio from falling below `ratio`.
pub fn long_tailed_counts(num_classes: usize, spec: &ImbalanceSpec) -> Result<Vec<usize>> {
    check_generator_args(num_classes, spec, ImbalanceKind::LongTailed)?;
    let span = (num_classes - 1) as f64;
    let mut counts = Vec::with_capacity(num_classes);
    for k in 0..num_classes {
        let factor = spec.ratio.powf(-(k as f64) / span);
        let count = (spec.n_max as f64 * factor + FLOOR_NUDGE).floor() as usize;
        if count == 0 {
            return Err(Error::InvalidSpec(format!(
                "ratio {} with n_max {} leaves class {k} empty",
                spec.ratio, spec.n_max
            )));
        }
        counts.push(count);
    }
    Ok(counts)
}

/// Step counts: the first `ceil(K/2)` classes keep `n_max` samples, the rest
/// keep `floor(n_max/ratio)`.
pub fn step_counts(num_classes: usize, spec: &ImbalanceSpec) -> Result<Vec<usize>> {
    check_generator_args(num_classes, spec, ImbalanceKind::Step)?;
    let n_low = (spec.n_max as f64 / spec.ratio + FLOOR_NUDGE).floor() as usize;
    if n_low == 0 {
        return Err(Error::InvalidSpec(format!(
            "ratio {} with n_max {} leaves the rare classes empty",
            spec.ratio, spec.n_max
        )));
    }
    let frequent = num_classes.div_ceil(2);
    Ok((0..num_classes)
        .map(|k| if k < frequent { spec.n_max } else { n_low })
        .collect())
}

/// Selects `counts[k]` samples of each class uniformly without replacement,
/// deterministically under `seed`. Selected rows keep their original relative
/// order within each class and are emitted grouped by class.
pub fn subsample(dataset: &LabeledDataset, counts: &[usize], seed: u64) -> Result<LabeledDataset> {
    if counts.len() != dataset.num_classes() {
        return Err(Error::ShapeMismatch(format!(
            "{} target counts for {} classes",
            counts.len(),
            dataset.num_classes()
        )));
    }
    let available = dataset.class_counts();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = LabeledDataset::new(dataset.dim(), dataset.num_classes());
    for (class, &want) in counts.iter().enumerate() {
        if want > available[class] {
            return Err(Error::InsufficientSamples {
                class,
                requested: want,
                available: available[class],
            });
        }
        let mut rows: Vec<usize> = (0..dataset.len())
            .filter(|&i| dataset.label(i) == class)
            .collect();
        rows.shuffle(&mut rng);
        rows.truncate(want);
        rows.sort_unstable();
        for row in rows {
            out.push(dataset.feature(row), class)?;
        }
    }
    Ok(out)
}

/// Isotropic Gaussian mixture source: class `k` is an isotropic normal with
/// the given standard deviation centered at `means[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureSpec {
    pub num_classes: usize,
    pub dim: usize,
    pub means: Vec<Vec<f64>>,
    pub stddev: f64,
    pub seed: u64,
}

impl GaussianMixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 {
            return Err(Error::InvalidSpec("mixture needs at least one class".into()));
        }
        if self.means.len() != self.num_classes {
            return Err(Error::InvalidSpec(format!(
                "{} means for {} classes",
                self.means.len(),
                self.num_classes
            )));
        }
        for (k, mean) in self.means.iter().enumerate() {
            if mean.len() != self.dim {
                return Err(Error::InvalidSpec(format!(
                    "mean of class {k} has width {}, expected {}",
                    mean.len(),
                    self.dim
                )));
            }
            if mean.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidSpec(format!("mean of class {k} is not finite")));
            }
        }
        if !self.stddev.is_finite() || self.stddev <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "stddev must be a finite value > 0, got {}",
                self.stddev
            )));
        }
        Ok(())
    }
}

/// Draws `counts_per_class[k]` samples of each class. Deterministic under the
/// spec seed: samples are drawn class by class, coordinate by coordinate, from
/// a single ChaCha8 stream.
pub fn sample_gaussian_mixture(
    spec: &GaussianMixtureSpec,
    counts_per_class: &[usize],
) -> Result<LabeledDataset> {
    spec.validate()?;
    if counts_per_class.len() != spec.num_classes {
        return Err(Error::ShapeMismatch(format!(
            "{} counts for {} classes",
            counts_per_class.len(),
            spec.num_classes
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = LabeledDataset::new(spec.dim, spec.num_classes);
    let mut row = vec![0.0; spec.dim];
    for (class, &count) in counts_per_class.iter().enumerate() {
        let mean = &spec.means[class];
        for _ in 0..count {
            for (x, &m) in row.iter_mut().zip(mean.iter()) {
                let z: f64 = rng.sample(StandardNormal);
                *x = m + spec.stddev * z;
            }
            out.push(&row, class)?;
        }
    }
    Ok(out)
}

/// Writes `f0..f{D-1},label` CSV with LF line endings. Floats use the
/// shortest representation that round-trips, so `load_csv` restores them
/// bit-exactly.
pub fn save_csv(dataset: &LabeledDataset, path: &Path) -> Result<()> {
    let mut text = String::new();
    for d in 0..dataset.dim() {
        let _ = write!(text, "f{d},");
    }
    text.push_str("label\n");
    for i in 0..dataset.len() {
        for x in dataset.feature(i) {
            let _ = write!(text, "{x},");
        }
        let _ = writeln!(text, "{}", dataset.label(i));
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Reads a CSV written by [`save_csv`]. The class count is inferred as
/// `max(label) + 1`; widen it with [`LabeledDataset::with_num_classes`] when
/// a split may be missing classes. Parse errors carry the 1-based line number.
pub fn load_csv(path: &Path) -> Result<LabeledDataset> {
    let text = std::fs::read_to_string(path)?;
    let path_str = path.display().to_string();
    let parse_err = |line: usize, message: String| Error::CsvParse {
        path: path_str.clone(),
        line,
        message,
    };

    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?;
    let fields: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    if fields.len() < 2 || *fields.last().unwrap() != "label" {
        return Err(parse_err(1, "missing label column (expected header f0..f{D-1},label)".into()));
    }
    let dim = fields.len() - 1;
    for (d, field) in fields[..dim].iter().enumerate() {
        if *field != format!("f{d}") {
            return Err(parse_err(
                1,
                format!("unexpected header field {field:?}, expected \"f{d}\""),
            ));
        }
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (index, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let lineno = index + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != dim + 1 {
            return Err(parse_err(
                lineno,
                format!("inconsistent row width: expected {} cells, got {}", dim + 1, cells.len()),
            ));
        }
        for cell in &cells[..dim] {
            let value: f64 = cell
                .parse()
                .map_err(|_| parse_err(lineno, format!("non-numeric cell {cell:?}")))?;
            features.push(value);
        }
        let label: usize = cells[dim]
            .parse()
            .map_err(|_| parse_err(lineno, format!("label must be a nonnegative integer, got {:?}", cells[dim])))?;
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(parse_err(1, "no data rows".into()));
    }
    let num_classes = labels.iter().max().copied().map_or(0, |m| m + 1);
    LabeledDataset::from_parts(dim, num_classes, features, labels)
}
