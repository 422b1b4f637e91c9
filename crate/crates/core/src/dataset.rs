//! Tabular expression data: loading, discretization, fold planning and
//! synthetic generation.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::{index, SliceRandom};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Samples × genes expression matrix with dense class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    name: String,
    values: Array2<f64>,
    labels: Vec<usize>,
    gene_names: Vec<String>,
    class_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, checking shape, finiteness and class coverage.
    pub fn new(
        name: impl Into<String>,
        values: Array2<f64>,
        labels: Vec<usize>,
        gene_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let d = Self::from_parts(name.into(), values, labels, gene_names, class_names)?;
        if d.class_names.len() < 2 {
            return Err(Error::SingleClass {
                found: d.class_names.len(),
            });
        }
        let counts = d.class_counts();
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(Error::InvalidDataset(format!(
                "class {:?} has no samples",
                d.class_names[c]
            )));
        }
        Ok(d)
    }

    // Shape and value checks only; row subsets may miss some classes.
    fn from_parts(
        name: String,
        values: Array2<f64>,
        labels: Vec<usize>,
        gene_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let (rows, cols) = values.dim();
        if labels.len() != rows {
            return Err(Error::InvalidDataset(format!(
                "{} labels for {rows} samples",
                labels.len()
            )));
        }
        if gene_names.len() != cols {
            return Err(Error::InvalidDataset(format!(
                "{} gene names for {cols} genes",
                gene_names.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::InvalidDataset(format!(
                "label {bad} outside [0, {})",
                class_names.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite expression value".into()));
        }
        Ok(Self {
            name,
            values,
            labels,
            gene_names,
            class_names,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn gene_names(&self) -> &[String] {
        &self.gene_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_genes(&self) -> usize {
        self.values.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Copies the given rows, keeping the full class universe.
    pub fn take_rows(&self, rows: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            values: self.values.select(Axis(0), rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            gene_names: self.gene_names.clone(),
            class_names: self.class_names.clone(),
        }
    }

    /// Copies the given columns in the given order.
    pub fn take_columns(&self, cols: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            values: self.values.select(Axis(1), cols),
            labels: self.labels.clone(),
            gene_names: cols.iter().map(|&c| self.gene_names[c].clone()).collect(),
            class_names: self.class_names.clone(),
        }
    }
}

/// A 0/1 selection over candidate genes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<bool>", into = "Vec<bool>")]
pub struct GeneMask {
    bits: Vec<bool>,
    selected_count: usize,
}

impl From<Vec<bool>> for GeneMask {
    fn from(bits: Vec<bool>) -> Self {
        let selected_count = bits.iter().filter(|&&b| b).count();
        Self {
            bits,
            selected_count,
        }
    }
}

impl From<GeneMask> for Vec<bool> {
    fn from(m: GeneMask) -> Self {
        m.bits
    }
}

impl GeneMask {
    pub fn new(bits: Vec<bool>) -> Self {
        bits.into()
    }

    pub fn all(len: usize) -> Self {
        vec![true; len].into()
    }

    pub fn none(len: usize) -> Self {
        vec![false; len].into()
    }

    pub fn from_indices(len: usize, indices: &[usize]) -> Self {
        let mut bits = vec![false; len];
        for &i in indices {
            bits[i] = true;
        }
        bits.into()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// True when no gene is selected (the mask itself may be non-empty).
    pub fn none_selected(&self) -> bool {
        self.selected_count == 0
    }

    pub fn selected_count(&self) -> usize {
        self.selected_count
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        if self.bits[i] != value {
            self.bits[i] = value;
            if value {
                self.selected_count += 1;
            } else {
                self.selected_count -= 1;
            }
        }
    }

    pub fn indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    /// Bit pattern packed into words, suitable as a cache key.
    pub fn packed(&self) -> Vec<u64> {
        self.bits
            .chunks(64)
            .map(|chunk| {
                chunk
                    .iter()
                    .enumerate()
                    .fold(0u64, |w, (i, &b)| w | (u64::from(b) << i))
            })
            .collect()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

impl std::fmt::Display for GeneMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Column keeps only the selected genes, in their original order.
pub fn subset(d: &Dataset, mask: &GeneMask) -> Result<Dataset> {
    if mask.len() != d.n_genes() {
        return Err(Error::LengthMismatch {
            left: mask.len(),
            right: d.n_genes(),
        });
    }
    if mask.none_selected() {
        return Err(Error::EmptyMask);
    }
    Ok(d.take_columns(&mask.indices()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[derive(Default)]
pub enum LabelColumn {
    #[default]
    Last,
    Index(usize),
    Name(String),
}


impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    /// Integers select by zero-based index, `last` the final column,
    /// anything else a header name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(if s.eq_ignore_ascii_case("last") {
            Self::Last
        } else if let Ok(i) = s.parse() {
            Self::Index(i)
        } else {
            Self::Name(s.to_string())
        })
    }
}

#[derive(Clone, Debug, Default)]
pub struct CsvOptions {
    pub label_column: LabelColumn,
}

pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(file, &name, options).map_err(|e| match e {
        Error::EmptyFile { .. } => Error::EmptyFile {
            path: path.to_path_buf(),
        },
        other => other,
    })
}

/// Parses CSV from any reader. Row numbers in errors are 1-based file lines.
pub fn read_csv(reader: impl Read, name: &str, options: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r?,
        None => {
            return Err(Error::EmptyFile {
                path: name.into(),
            })
        }
    };
    let width = header.len();
    let label_col = match &options.label_column {
        LabelColumn::Last => width - 1,
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(i) => return Err(Error::UnknownLabelColumn(i.to_string())),
        LabelColumn::Name(n) => header
            .iter()
            .position(|h| h.trim() == n)
            .ok_or_else(|| Error::UnknownLabelColumn(n.clone()))?,
    };
    let gene_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_col)
        .map(|(_, h)| h.trim().to_string())
        .collect();

    let mut flat = Vec::new();
    let mut labels = Vec::new();
    let mut class_index: HashMap<String, usize> = HashMap::new();
    let mut class_names = Vec::new();
    for (r, record) in records.enumerate() {
        let record = record?;
        let line = r + 2;
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        if record.len() != width {
            return Err(Error::MalformedRow {
                row: line,
                expected: width,
                found: record.len(),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            if c == label_col {
                let key = cell.trim().to_string();
                let next = class_names.len();
                let idx = *class_index.entry(key.clone()).or_insert_with(|| {
                    class_names.push(key);
                    next
                });
                labels.push(idx);
            } else {
                let v: f64 = cell.trim().parse().map_err(|_| Error::NonNumericCell {
                    row: line,
                    column: c + 1,
                    value: cell.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(Error::NonNumericCell {
                        row: line,
                        column: c + 1,
                        value: cell.to_string(),
                    });
                }
                flat.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyFile {
            path: name.into(),
        });
    }
    if class_names.len() < 2 {
        return Err(Error::SingleClass {
            found: class_names.len(),
        });
    }
    let values = Array2::from_shape_vec((labels.len(), gene_names.len()), flat)
        .map_err(|e| Error::InvalidDataset(e.to_string()))?;
    Dataset::new(name, values, labels, gene_names, class_names)
}

/// Writes gene columns followed by a `class` column. Values use the
/// shortest representation that parses back to the same double.
pub fn write_csv(d: &Dataset, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = d.gene_names.iter().map(String::as_str).collect();
    header.push("class");
    w.write_record(&header)?;
    for (row, &label) in d.values.rows().into_iter().zip(&d.labels) {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        rec.push(d.class_names[label].clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(d, std::io::BufWriter::new(file))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum Discretization {
    EqualWidth { bins: usize },
    MeanSigma { t: f64 },
}

impl Default for Discretization {
    fn default() -> Self {
        Self::MeanSigma { t: 0.5 }
    }
}

/// Per-gene integer levels, stored column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretizedDataset {
    pub levels: Vec<Vec<usize>>,
    pub n_levels_per_gene: Vec<usize>,
    pub source_ref: String,
}

impl DiscretizedDataset {
    pub fn n_genes(&self) -> usize {
        self.levels.len()
    }

    pub fn n_samples(&self) -> usize {
        self.levels.first().map_or(0, Vec::len)
    }

    pub fn column(&self, j: usize) -> &[usize] {
        &self.levels[j]
    }
}

pub fn discretize(d: &Dataset, policy: Discretization) -> Result<DiscretizedDataset> {
    match policy {
        Discretization::EqualWidth { bins } if bins < 2 => {
            return Err(Error::InvalidParameter(format!(
                "equal_width needs at least 2 bins, got {bins}"
            )))
        }
        Discretization::MeanSigma { t } if !(t > 0.0) => {
            return Err(Error::InvalidParameter(format!(
                "mean_sigma needs t > 0, got {t}"
            )))
        }
        _ => {}
    }
    let (levels, n_levels_per_gene) = d
        .values
        .columns()
        .into_iter()
        .map(|col| {
            let col: Vec<f64> = col.to_vec();
            discretize_column(&col, policy)
        })
        .unzip();
    Ok(DiscretizedDataset {
        levels,
        n_levels_per_gene,
        source_ref: d.name.clone(),
    })
}

fn discretize_column(col: &[f64], policy: Discretization) -> (Vec<usize>, usize) {
    let min = col.iter().copied().fold(f64::INFINITY, f64::min);
    let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if col.is_empty() || min == max {
        return (vec![0; col.len()], 1);
    }
    match policy {
        Discretization::EqualWidth { bins } => {
            let width = (max - min) / bins as f64;
            let levels = col
                .iter()
                .map(|&v| (((v - min) / width).floor() as usize).min(bins - 1))
                .collect();
            (levels, bins)
        }
        Discretization::MeanSigma { t } => {
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            let (lo, hi) = (mean - t * sd, mean + t * sd);
            let levels = col
                .iter()
                .map(|&v| {
                    if v < lo {
                        0
                    } else if v > hi {
                        2
                    } else {
                        1
                    }
                })
                .collect();
            (levels, 3)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
    pub k: usize,
    pub seed: u64,
}

/// Stratified k-fold split. Each class is shuffled with the seed and dealt
/// round-robin across folds, continuing from where the previous class
/// stopped so fold sizes stay balanced.
pub fn stratified_k_fold(d: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    stratified_k_fold_labels(d.labels(), d.class_names(), k, seed)
}

pub(crate) fn stratified_k_fold_labels(
    labels: &[usize],
    class_names: &[String],
    k: usize,
    seed: u64,
) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be >= 2, got {k}")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); class_names.len()];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    for (c, members) in by_class.iter().enumerate() {
        if members.len() < k {
            return Err(Error::ClassTooSmall {
                class: class_names[c].clone(),
                count: members.len(),
                folds: k,
            });
        }
    }
    let mut rng = rng::stream(seed, &[rng::label_of("stratified_k_fold")]);
    let mut tests: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut offset = 0;
    for mut members in by_class {
        members.shuffle(&mut rng);
        for (j, idx) in members.iter().enumerate() {
            tests[(offset + j) % k].push(*idx);
        }
        offset = (offset + members.len()) % k;
    }
    let n = labels.len();
    let folds = tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let mut in_test = vec![false; n];
            for &i in &test {
                in_test[i] = true;
            }
            let train = (0..n).filter(|&i| !in_test[i]).collect();
            Fold { train, test }
        })
        .collect();
    Ok(FoldPlan { folds, k, seed })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub n_informative: usize,
    pub n_noise: usize,
    pub n_classes: usize,
    pub separation: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_samples: 100,
            n_informative: 5,
            n_noise: 45,
            n_classes: 2,
            separation: 3.0,
            seed: 1,
        }
    }
}

/// Generates a dataset with planted informative genes.
///
/// Classes are balanced and shuffled. Each informative gene draws
/// `N(mu_c, 1)` where the class means sit `separation` apart in a
/// per-gene random order; noise genes draw `N(0, 1)` regardless of class.
/// Informative columns are scattered at random positions, reported in the
/// returned ground-truth mask.
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<(Dataset, GeneMask)> {
    if spec.n_informative == 0 || spec.n_noise == 0 {
        return Err(Error::InvalidParameter(
            "informative and noise gene counts must be positive".into(),
        ));
    }
    if spec.n_classes < 2 {
        return Err(Error::InvalidParameter("need at least 2 classes".into()));
    }
    if spec.n_samples < spec.n_classes {
        return Err(Error::InvalidParameter(
            "need at least one sample per class".into(),
        ));
    }
    if !(spec.separation > 0.0 && spec.separation.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "separation must be positive, got {}",
            spec.separation
        )));
    }
    let mut rng = rng::stream(spec.seed, &[rng::label_of("make_synthetic")]);
    let n_genes = spec.n_informative + spec.n_noise;

    let mut labels: Vec<usize> = (0..spec.n_samples).map(|i| i % spec.n_classes).collect();
    labels.shuffle(&mut rng);

    let mut informative = index::sample(&mut rng, n_genes, spec.n_informative).into_vec();
    informative.sort_unstable();
    let truth = GeneMask::from_indices(n_genes, &informative);

    let centre = (spec.n_classes - 1) as f64 / 2.0;
    let mut values = Array2::<f64>::zeros((spec.n_samples, n_genes));
    for j in 0..n_genes {
        let means: Option<Vec<f64>> = truth.get(j).then(|| {
            let mut order: Vec<usize> = (0..spec.n_classes).collect();
            order.shuffle(&mut rng);
            order
                .into_iter()
                .map(|p| (p as f64 - centre) * spec.separation)
                .collect()
        });
        for i in 0..spec.n_samples {
            let z: f64 = StandardNormal.sample(&mut rng);
            values[[i, j]] = means.as_ref().map_or(0.0, |m| m[labels[i]]) + z;
        }
    }
    let gene_names = (0..n_genes).map(|j| format!("g{j:04}")).collect();
    let class_names = (0..spec.n_classes).map(|c| format!("class{c}")).collect();
    let name = format!("synthetic-{}", spec.seed);
    let d = Dataset::new(name, values, labels, gene_names, class_names)?;
    Ok((d, truth))
}
