//! Labeled feature datasets, corpus loading, stratified splits and class weights.

use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::warn;
use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{Featurization, GrayImage};
use crate::scalar::Real;
use crate::seed::{derive_seed, rng_from_seed};

/// Families of the Malimg corpus and their sample counts.
pub const MALIMG_FAMILIES: [(&str, usize); 25] = [
    ("Adialer.C", 125),
    ("Agent.FYI", 116),
    ("Allaple.A", 2949),
    ("Allaple.L", 1591),
    ("Alueron.gen!J", 198),
    ("Autorun.K", 106),
    ("C2Lop.P", 146),
    ("C2Lop.gen!G", 200),
    ("Dialplatform.B", 177),
    ("Dontovo.A", 162),
    ("Fakerean", 381),
    ("Instantaccess", 431),
    ("Lolyda.AA1", 213),
    ("Lolyda.AA2", 184),
    ("Lolyda.AA3", 123),
    ("Lolyda.AT", 159),
    ("Malex.gen!J", 136),
    ("Obfuscator.AD", 142),
    ("Rbot!gen", 158),
    ("Skintrim.N", 80),
    ("Swizzor.gen!E", 128),
    ("Swizzor.gen!I", 132),
    ("VB.AT", 408),
    ("Wintrim.BX", 97),
    ("Yuner.A", 800),
];

pub const MALIMG_TOTAL: usize = 9342;

/// Class names (sorted, unique) with per-class sample counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCatalog {
    names: Vec<String>,
    counts: Vec<usize>,
}

impl ClassCatalog {
    pub fn new(names: Vec<String>, counts: Vec<usize>) -> Result<Self> {
        if names.len() != counts.len() {
            return Err(Error::DimensionMismatch {
                context: "catalog counts vs names",
                expected: names.len(),
                actual: counts.len(),
            });
        }
        if names.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("class names", "must be unique and sorted"));
        }
        Ok(Self { names, counts })
    }

    /// Sorts `(name, count)` pairs into a catalog.
    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let mut v: Vec<(String, usize)> = pairs.into_iter().map(|(n, c)| (n.into(), c)).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        let (names, counts) = v.into_iter().unzip();
        Self::new(names, counts)
    }

    pub fn malimg() -> Self {
        Self::from_pairs(MALIMG_FAMILIES).expect("static table is valid")
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.binary_search_by(|n| n.as_str().cmp(name)).ok()
    }
}

/// `c_j = sqrt(S / S_j)`: rarer classes get larger weights.
pub fn class_weights<T: Real>(catalog: &ClassCatalog) -> Result<Vec<T>> {
    let total = catalog.total() as f64;
    catalog
        .names
        .iter()
        .zip(&catalog.counts)
        .map(|(name, &count)| {
            if count == 0 {
                Err(Error::EmptyClass(name.clone()))
            } else {
                Ok(T::from_f64_lossy((total / count as f64).sqrt()))
            }
        })
        .collect()
}

/// Writes `class,count,weight` rows.
pub fn write_manifest<W: Write>(catalog: &ClassCatalog, out: W) -> Result<()> {
    let weights = class_weights::<f64>(catalog)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["class", "count", "weight"])?;
    for ((name, count), weight) in catalog.names.iter().zip(&catalog.counts).zip(weights) {
        w.write_record([name.clone(), count.to_string(), format!("{weight:.6}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Feature matrix (one row per sample) with labels and a class catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    features: Array2<T>,
    labels: Vec<usize>,
    catalog: ClassCatalog,
}

impl<T: Real> Dataset<T> {
    pub fn new(features: Array2<T>, labels: Vec<usize>, catalog: ClassCatalog) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "labels vs feature rows",
                expected: features.nrows(),
                actual: labels.len(),
            });
        }
        if features.ncols() == 0 {
            return Err(Error::invalid("feature_dim", "must be positive"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= catalog.len()) {
            return Err(Error::invalid(
                "label",
                format!("label {bad} out of range for {} classes", catalog.len()),
            ));
        }
        let features = if features.is_standard_layout() {
            features
        } else {
            features.as_standard_layout().into_owned()
        };
        Ok(Self {
            features,
            labels,
            catalog,
        })
    }

    /// Builds the catalog from the label counts.
    pub fn from_labeled(features: Array2<T>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        let mut counts = vec![0; class_names.len()];
        for &l in &labels {
            if l < counts.len() {
                counts[l] += 1;
            }
        }
        let catalog = ClassCatalog::new(class_names, counts)?;
        Self::new(features, labels, catalog)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, T> {
        self.features.view()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn catalog(&self) -> &ClassCatalog {
        &self.catalog
    }

    pub fn class_names(&self) -> &[String] {
        self.catalog.names()
    }

    pub fn num_classes(&self) -> usize {
        self.catalog.len()
    }

    pub fn sample(&self, i: usize) -> (&[T], usize) {
        (
            self.features.row(i).to_slice().expect("standard layout"),
            self.labels[i],
        )
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[T], usize)> + '_ {
        (0..self.len()).map(move |i| self.sample(i))
    }

    /// Sample counts actually present, per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Catalog whose counts are the ones present in this dataset.
    pub fn observed_catalog(&self) -> ClassCatalog {
        ClassCatalog {
            names: self.catalog.names.clone(),
            counts: self.class_counts(),
        }
    }

    /// Rows at `indices`, in that order, sharing this dataset's catalog.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            catalog: self.catalog.clone(),
        }
    }

    /// Rows of one sample, as a view.
    pub fn row(&self, i: usize) -> ArrayView1<'_, T> {
        self.features.row(i)
    }
}

/// Per-class test counts: `round(f · S_j)`, kept within `[1, S_j − 1]`.
fn test_count(class_size: usize, fraction: f64) -> usize {
    ((fraction * class_size as f64).round() as usize).clamp(1, class_size - 1)
}

/// Splits every class independently into train and test parts.
///
/// Class `j` is shuffled with a ChaCha8 stream seeded by
/// `derive_seed(seed, j)`; its first `round(test_fraction · S_j)` shuffled
/// members go to the test set. Both outputs keep the input's sample order
/// and catalog.
pub fn stratified_split<T: Real>(
    dataset: &Dataset<T>,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid("test-fraction", format!("{test_fraction} is outside (0, 1)")));
    }
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes()];
    for (i, &l) in dataset.labels.iter().enumerate() {
        per_class[l].push(i);
    }
    let mut train = Vec::with_capacity(dataset.len());
    let mut test = Vec::new();
    for (j, mut members) in per_class.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::TooFewSamples {
                class: dataset.class_names()[j].clone(),
                count: members.len(),
                required: 2,
            });
        }
        let n_test = test_count(members.len(), test_fraction);
        members.shuffle(&mut rng_from_seed(derive_seed(seed, j as u64)));
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((dataset.subset(&train), dataset.subset(&test)))
}

fn is_hidden(path: &Path) -> bool {
    path.file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.starts_with('.'))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| !is_hidden(p))
        .collect();
    entries.sort();
    Ok(entries)
}

/// Loads `<root>/<class>/<image>` into a dataset.
///
/// Class indices follow lexicographic directory-name order. Images that fail
/// to decode are skipped with a warning; a class left with no images is an
/// error.
pub fn load_corpus<T: Real>(root: impl AsRef<Path>, featurization: &Featurization) -> Result<Dataset<T>> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::MissingRoot(root.to_path_buf()));
    }
    featurization.validate()?;
    let class_dirs: Vec<PathBuf> = sorted_entries(root)?.into_iter().filter(|p| p.is_dir()).collect();
    if class_dirs.is_empty() {
        return Err(Error::EmptyDataset("corpus has no class directories"));
    }
    let names: Vec<String> = class_dirs
        .iter()
        .map(|p| p.file_name().expect("dir entry").to_string_lossy().into_owned())
        .collect();

    let mut jobs = Vec::new();
    for (label, dir) in class_dirs.iter().enumerate() {
        let files: Vec<PathBuf> = sorted_entries(dir)?.into_iter().filter(|p| p.is_file()).collect();
        if files.is_empty() {
            return Err(Error::EmptyClass(names[label].clone()));
        }
        jobs.extend(files.into_iter().map(|f| (label, f)));
    }

    let decoded: Vec<Option<(usize, Vec<T>)>> = jobs
        .par_iter()
        .map(|(label, path)| {
            let feature = GrayImage::open(path).and_then(|img| featurization.apply::<T>(&img));
            match feature {
                Ok(v) => Some((*label, v.into_values())),
                Err(e) => {
                    warn!("skipping {}: {e}", path.display());
                    None
                }
            }
        })
        .collect();

    let dim = featurization.dim();
    let mut data = Vec::with_capacity(decoded.len() * dim);
    let mut labels = Vec::with_capacity(decoded.len());
    for (label, values) in decoded.into_iter().flatten() {
        data.extend(values);
        labels.push(label);
    }
    let mut counts = vec![0usize; names.len()];
    for &l in &labels {
        counts[l] += 1;
    }
    if let Some(j) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyClass(names[j].clone()));
    }
    let catalog = ClassCatalog::new(names, counts)?;
    check_malimg_totals(&catalog);
    let features = Array2::from_shape_vec((labels.len(), dim), data).expect("rows have featurization dim");
    Dataset::new(features, labels, catalog)
}

/// Warns when a corpus that looks like the full Malimg tree has unexpected counts.
pub fn check_malimg_totals(catalog: &ClassCatalog) -> bool {
    let expected: HashSet<&str> = MALIMG_FAMILIES.iter().map(|(n, _)| *n).collect();
    let found: HashSet<&str> = catalog.names().iter().map(String::as_str).collect();
    if expected != found {
        return true;
    }
    let reference = ClassCatalog::malimg();
    let mut ok = true;
    for ((name, &got), &want) in catalog.names().iter().zip(catalog.counts()).zip(reference.counts()) {
        if got != want {
            warn!("Malimg family {name}: {got} samples, reference table lists {want}");
            ok = false;
        }
    }
    if catalog.total() != MALIMG_TOTAL {
        warn!("Malimg corpus total {} differs from {MALIMG_TOTAL}", catalog.total());
        ok = false;
    }
    ok
}
