//! CSV ingestion and quantile binning.
//!
//! Raw features are stored column-major. [`quantize`] turns every column into
//! small-integer bin indices; bin `b` of a feature holds the values in
//! `(edges[b - 1], edges[b]]`, and the last bin holds everything above the
//! final edge. A split "bin ≤ b" is therefore the raw test "value ≤ edges[b]".

use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_MAX_BINS: usize = 255;
pub const MAX_BINS_LIMIT: usize = 65535;

#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset<T> {
    /// `columns[f][i]` is feature `f` of row `i`.
    pub columns: Vec<Vec<T>>,
    pub targets: Vec<T>,
    pub feature_names: Vec<String>,
}

impl<T: Scalar> RawDataset<T> {
    /// Builds a dataset from column-major features, validating shape and finiteness.
    pub fn new(columns: Vec<Vec<T>>, targets: Vec<T>, feature_names: Vec<String>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::NoFeatures);
        }
        if targets.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if feature_names.len() != columns.len() {
            return Err(Error::LengthMismatch {
                what: "feature_names",
                found: feature_names.len(),
                expected: columns.len(),
            });
        }
        for (f, col) in columns.iter().enumerate() {
            if col.len() != targets.len() {
                return Err(Error::LengthMismatch {
                    what: "feature column",
                    found: col.len(),
                    expected: targets.len(),
                });
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::MissingValue { row, column: f });
            }
        }
        Ok(RawDataset {
            columns,
            targets,
            feature_names,
        })
    }

    /// Builds a dataset from row-major features with generated names `f0, f1, ...`.
    pub fn from_rows(rows: &[Vec<T>], targets: Vec<T>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut columns = vec![Vec::with_capacity(rows.len()); d];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::RaggedRow {
                    row: i,
                    found: row.len(),
                    expected: d,
                });
            }
            for (f, &v) in row.iter().enumerate() {
                columns[f].push(v);
            }
        }
        let names = (0..d).map(|f| format!("f{f}")).collect();
        Self::new(columns, targets, names)
    }

    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    /// Copies row `i` into `buf`.
    pub fn row_into(&self, i: usize, buf: &mut Vec<T>) {
        buf.clear();
        buf.extend(self.columns.iter().map(|c| c[i]));
    }

    /// Fails unless every target is exactly 0 or 1.
    pub fn check_binary_targets(&self) -> Result<()> {
        match self
            .targets
            .iter()
            .position(|&y| y != T::zero() && y != T::one())
        {
            Some(row) => Err(Error::NonBinaryTarget {
                row,
                value: self.targets[row].as_f64(),
            }),
            None => Ok(()),
        }
    }
}

/// Target column selector: zero-based index or header name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetColumn {
    Index(usize),
    Name(String),
}

impl FromStr for TargetColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => TargetColumn::Index(i),
            Err(_) => TargetColumn::Name(s.to_string()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    #[default]
    Reject,
    ImputeMedian,
}

#[derive(Debug, Clone, Copy)]
pub struct CsvOptions {
    pub has_header: bool,
    pub missing: MissingPolicy,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            has_header: true,
            missing: MissingPolicy::Reject,
        }
    }
}

pub fn load_csv<T: Scalar>(
    path: impl AsRef<Path>,
    target: &TargetColumn,
    options: CsvOptions,
) -> Result<RawDataset<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, target, options)
}

fn parse_cell(cell: &str, row: usize, column: usize) -> Result<Option<f64>> {
    let cell = cell.trim();
    if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_nan() => Ok(None),
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::NonNumeric {
            row,
            column,
            value: cell.to_string(),
        }),
    }
}

/// Parses comma-delimited numeric text. Row numbers in errors count data rows from 0.
pub fn read_csv<T: Scalar, R: Read>(
    reader: R,
    target: &TargetColumn,
    options: CsvOptions,
) -> Result<RawDataset<T>> {
    read_table(reader, Some(target), options)
}

/// Loads a file in which every column is a feature. Targets are set to zero.
pub fn load_features_csv<T: Scalar>(path: impl AsRef<Path>, options: CsvOptions) -> Result<RawDataset<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_table(file, None, options)
}

fn read_table<T: Scalar, R: Read>(
    reader: R,
    target: Option<&TargetColumn>,
    options: CsvOptions,
) -> Result<RawDataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .flexible(true)
        .from_reader(reader);

    let header: Option<Vec<String>> = if options.has_header {
        Some(rdr.headers()?.iter().map(|h| h.trim().to_string()).collect())
    } else {
        None
    };

    let mut width = header.as_ref().map(Vec::len);
    let mut cells: Vec<Vec<Option<f64>>> = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRow {
                row,
                found: record.len(),
                expected,
            });
        }
        let parsed = record
            .iter()
            .enumerate()
            .map(|(c, cell)| parse_cell(cell, row, c))
            .collect::<Result<Vec<_>>>()?;
        cells.push(parsed);
    }
    let width = width.unwrap_or(0);
    if cells.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let target_idx = match target {
        None => None,
        Some(TargetColumn::Index(i)) if *i < width => Some(*i),
        Some(TargetColumn::Index(i)) => return Err(Error::MissingTarget(i.to_string())),
        Some(TargetColumn::Name(name)) => Some(
            header
                .as_ref()
                .and_then(|h| h.iter().position(|c| c == name))
                .ok_or_else(|| Error::MissingTarget(name.clone()))?,
        ),
    };
    let n_features = width - usize::from(target_idx.is_some());
    if n_features == 0 {
        return Err(Error::NoFeatures);
    }

    let targets = match target_idx {
        Some(t) => cells
            .iter()
            .enumerate()
            .map(|(row, r)| r[t].map(T::lit).ok_or(Error::MissingValue { row, column: t }))
            .collect::<Result<Vec<_>>>()?,
        None => vec![T::zero(); cells.len()],
    };

    let mut columns = Vec::with_capacity(n_features);
    let mut names = Vec::with_capacity(n_features);
    for c in (0..width).filter(|&c| Some(c) != target_idx) {
        let mut col: Vec<Option<f64>> = cells.iter().map(|r| r[c]).collect();
        if let Some(row) = col.iter().position(Option::is_none) {
            match options.missing {
                MissingPolicy::Reject => return Err(Error::MissingValue { row, column: c }),
                MissingPolicy::ImputeMedian => {
                    let mut present: Vec<f64> = col.iter().flatten().copied().collect();
                    if present.is_empty() {
                        return Err(Error::MissingValue { row, column: c });
                    }
                    let fill = median(&mut present);
                    col.iter_mut().for_each(|v| {
                        v.get_or_insert(fill);
                    });
                }
            }
        }
        columns.push(col.into_iter().map(|v| T::lit(v.unwrap())).collect());
        names.push(match &header {
            Some(h) => h[c].clone(),
            None => format!("f{c}"),
        });
    }
    RawDataset::new(columns, targets, names)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// One column of bin indices; one byte per row when the feature has at most 256 bins.
#[derive(Debug, Clone, PartialEq)]
pub enum BinColumn {
    Narrow(Vec<u8>),
    Wide(Vec<u16>),
}

impl BinColumn {
    fn from_indices(indices: Vec<usize>, n_bins: usize) -> Self {
        if n_bins <= 256 {
            BinColumn::Narrow(indices.into_iter().map(|b| b as u8).collect())
        } else {
            BinColumn::Wide(indices.into_iter().map(|b| b as u16).collect())
        }
    }

    #[inline]
    pub fn get(&self, row: usize) -> usize {
        match self {
            BinColumn::Narrow(v) => v[row] as usize,
            BinColumn::Wide(v) => v[row] as usize,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            BinColumn::Narrow(v) => v.len(),
            BinColumn::Wide(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinnedDataset<T> {
    pub columns: Vec<BinColumn>,
    /// Per feature, strictly increasing split values; `n_bins[f] == bin_edges[f].len() + 1`.
    pub bin_edges: Vec<Vec<T>>,
    pub n_bins: Vec<usize>,
    n_rows: usize,
}

impl<T: Scalar> BinnedDataset<T> {
    /// Bins `raw` with previously computed edges (e.g. test data with training edges).
    pub fn with_edges(raw: &RawDataset<T>, bin_edges: &[Vec<T>]) -> Result<Self> {
        if bin_edges.len() != raw.n_features() {
            return Err(Error::DimensionMismatch {
                expected: bin_edges.len(),
                found: raw.n_features(),
            });
        }
        let n_bins: Vec<usize> = bin_edges.iter().map(|e| e.len() + 1).collect();
        let columns = raw
            .columns
            .iter()
            .zip(bin_edges)
            .zip(&n_bins)
            .map(|((col, edges), &nb)| {
                BinColumn::from_indices(col.iter().map(|&v| bin_of(edges, v)).collect(), nb)
            })
            .collect();
        Ok(BinnedDataset {
            columns,
            bin_edges: bin_edges.to_vec(),
            n_bins,
            n_rows: raw.n_rows(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn bin(&self, feature: usize, row: usize) -> usize {
        self.columns[feature].get(row)
    }

    pub fn row_bins(&self, row: usize) -> Vec<usize> {
        self.columns.iter().map(|c| c.get(row)).collect()
    }

    pub fn bin_value(&self, feature: usize, value: T) -> usize {
        bin_of(&self.bin_edges[feature], value)
    }
}

/// Smallest `b` with `value <= edges[b]`, or `edges.len()` if there is none.
#[inline]
pub fn bin_of<T: Scalar>(edges: &[T], value: T) -> usize {
    edges.partition_point(|&e| e < value)
}

/// Quantile-bins every feature of `raw` into at most `max_bins` bins.
pub fn quantize<T: Scalar>(raw: &RawDataset<T>, max_bins: usize) -> Result<BinnedDataset<T>> {
    if !(2..=MAX_BINS_LIMIT).contains(&max_bins) {
        return Err(Error::InvalidParameter(format!(
            "max_bins must be in [2, {MAX_BINS_LIMIT}], got {max_bins}"
        )));
    }
    let edges: Vec<Vec<T>> = raw
        .columns
        .iter()
        .map(|col| quantile_edges(col, max_bins))
        .collect();
    BinnedDataset::with_edges(raw, &edges)
}

/// A value strictly below `b` and no smaller than `a`, for `a < b`.
fn split_point<T: Scalar>(a: T, b: T) -> T {
    let mid = a + (b - a) / T::lit(2.0);
    if mid < b {
        mid
    } else {
        a
    }
}

/// Equal-population edges. Features with at most `max_bins` distinct values get
/// one bin per distinct value.
pub fn quantile_edges<T: Scalar>(values: &[T], max_bins: usize) -> Vec<T> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite features"));
    let mut distinct = sorted.clone();
    distinct.dedup();

    if distinct.len() <= max_bins {
        return distinct.windows(2).map(|w| split_point(w[0], w[1])).collect();
    }

    let n = sorted.len();
    let mut edges = Vec::with_capacity(max_bins - 1);
    for j in 1..max_bins {
        let cut = (j * n + max_bins / 2) / max_bins;
        if cut == 0 || cut >= n {
            continue;
        }
        let (a, b) = (sorted[cut - 1], sorted[cut]);
        if a < b {
            edges.push(split_point(a, b));
        } else {
            // A run of equal values straddles the cut; close the bin after the run.
            let end = sorted.partition_point(|&v| v <= a);
            if end < n {
                edges.push(split_point(a, sorted[end]));
            }
        }
    }
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup();
    edges
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn csv_of(text: &str, target: TargetColumn) -> Result<RawDataset<f64>> {
        read_csv(text.as_bytes(), &target, CsvOptions::default())
    }

    #[test]
    fn parses_small_file() {
        let ds = csv_of("f,y\n1,0\n2,1\n3,0", TargetColumn::Index(1)).unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.n_features(), 1);
        assert_eq!(ds.targets, vec![0.0, 1.0, 0.0]);
        assert_eq!(ds.feature_names, vec!["f".to_string()]);
    }

    #[test]
    fn target_by_name_matches_index() {
        let text = "a,y,b\n1,0,5\n2,1,6\n3,0,7";
        let by_name = csv_of(text, TargetColumn::Name("y".into())).unwrap();
        let by_index = csv_of(text, TargetColumn::Index(1)).unwrap();
        assert_eq!(by_name, by_index);
        assert_eq!(by_name.columns, vec![vec![1.0, 2.0, 3.0], vec![5.0, 6.0, 7.0]]);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(
            csv_of("f,y\n1,0\nx,1", TargetColumn::Index(1)),
            Err(Error::NonNumeric { row: 1, column: 0, .. })
        ));
        assert!(matches!(
            csv_of("f,y\n1,0\n2", TargetColumn::Index(1)),
            Err(Error::RaggedRow { row: 1, .. })
        ));
        assert!(matches!(
            csv_of("f,y\n1,0", TargetColumn::Name("z".into())),
            Err(Error::MissingTarget(_))
        ));
        assert!(matches!(
            csv_of("f,y\n1,0", TargetColumn::Index(5)),
            Err(Error::MissingTarget(_))
        ));
        assert!(matches!(
            csv_of("f,y\n,0\n2,1", TargetColumn::Index(1)),
            Err(Error::MissingValue { row: 0, column: 0 })
        ));
        assert!(matches!(
            load_csv::<f64>("/nonexistent/file.csv", &TargetColumn::Index(0), CsvOptions::default()),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn median_imputation() {
        let opts = CsvOptions {
            has_header: false,
            missing: MissingPolicy::ImputeMedian,
        };
        let ds: RawDataset<f64> =
            read_csv("1,0\nNaN,1\n4,0\n10,1".as_bytes(), &TargetColumn::Index(1), opts).unwrap();
        assert_eq!(ds.columns[0], vec![1.0, 4.0, 4.0, 10.0]);
        assert_eq!(ds.feature_names, vec!["f0".to_string()]);
    }

    #[test]
    fn binary_target_check() {
        let ds = csv_of("f,y\n1,0\n2,2", TargetColumn::Index(1)).unwrap();
        assert!(matches!(ds.check_binary_targets(), Err(Error::NonBinaryTarget { row: 1, .. })));
    }

    #[test]
    fn two_distinct_values_give_two_bins() {
        let edges = quantile_edges(&[1.0, 1.0, 2.0, 2.0], 255);
        assert_eq!(edges.len(), 1);
        assert!(1.0 <= edges[0] && edges[0] < 2.0);
    }

    #[test]
    fn constant_feature_single_bin() {
        let raw = RawDataset::from_rows(&[vec![5.0], vec![5.0], vec![5.0]], vec![0.0; 3]).unwrap();
        for max_bins in [2, 16, 255] {
            let b = quantize(&raw, max_bins).unwrap();
            assert_eq!(b.n_bins, vec![1]);
            assert!((0..3).all(|i| b.bin(0, i) == 0));
        }
    }

    #[test]
    fn few_distinct_values_reproduced() {
        let values = [3.0, 1.0, 2.0, 3.0, 7.0, 1.0];
        let edges = quantile_edges(&values, 4);
        assert_eq!(edges.len(), 3);
        let bins: Vec<usize> = values.iter().map(|&v| bin_of(&edges, v)).collect();
        assert_eq!(bins, vec![2, 0, 1, 2, 3, 0]);
    }

    #[test]
    fn uniform_population_per_bin() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let values: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        // Oracle: rank-based quantile cut points computed directly on the sorted sample.
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let oracle_counts: Vec<usize> = (0..16)
            .map(|b| (b + 1) * 1000 / 16 - b * 1000 / 16)
            .collect();
        let edges = quantile_edges(&values, 16);
        assert_eq!(edges.len(), 15);
        let mut counts = vec![0usize; 16];
        values.iter().for_each(|&v| counts[bin_of(&edges, v)] += 1);
        for (c, o) in counts.iter().zip(&oracle_counts) {
            assert!(c.abs_diff(*o) <= 2, "{counts:?}");
            assert!(c.abs_diff(1000 / 16) <= 2);
        }
    }

    #[test]
    fn rejects_bad_max_bins() {
        let raw = RawDataset::from_rows(&[vec![1.0]], vec![0.0]).unwrap();
        assert!(quantize(&raw, 1).is_err());
        assert!(quantize(&raw, 65536).is_err());
    }

    #[test]
    fn wide_columns_above_256_bins() {
        let rows: Vec<Vec<f64>> = (0..1000).map(|i| vec![i as f64]).collect();
        let raw = RawDataset::from_rows(&rows, vec![0.0; 1000]).unwrap();
        let b = quantize(&raw, 1000).unwrap();
        assert!(matches!(b.columns[0], BinColumn::Wide(_)));
        assert_eq!(b.n_bins[0], 1000);
        assert_eq!(b.bin(0, 999), 999);
        let b = quantize(&raw, 255).unwrap();
        assert!(matches!(b.columns[0], BinColumn::Narrow(_)));
    }

    mod props {
        use super::*;
        use proptest::prelude::{any, prop, prop_assert, prop_assert_eq, proptest};

        proptest! {
            #[test]
            fn monotone_and_reproducible(values in prop::collection::vec(-1e3f64..1e3, 1..400), max_bins in 2usize..64) {
                let edges = quantile_edges(&values, max_bins);
                prop_assert!(edges.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(edges.len() < max_bins);
                let mut sorted = values.clone();
                sorted.sort_by(f64::total_cmp);
                let bins: Vec<usize> = sorted.iter().map(|&v| bin_of(&edges, v)).collect();
                prop_assert!(bins.windows(2).all(|w| w[0] <= w[1]));

                // Representative points of each bin fall back into that bin.
                let nb = edges.len() + 1;
                for b in 0..nb {
                    let rep = match (b.checked_sub(1).map(|i| edges[i]), edges.get(b)) {
                        (None, None) => 0.0,
                        (None, Some(&hi)) => hi - 1.0,
                        (Some(lo), None) => lo + 1.0,
                        (Some(lo), Some(&hi)) => {
                            let mid = lo + (hi - lo) * 0.5;
                            if mid > lo { mid } else { hi }
                        }
                    };
                    prop_assert_eq!(bin_of(&edges, rep), b);
                }
            }

            #[test]
            fn continuous_population_bounded(seed in any::<u64>(), n in 50usize..2000, max_bins in 2usize..40) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let values: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                let edges = quantile_edges(&values, max_bins);
                let nb = edges.len() + 1;
                let mut counts = vec![0usize; nb];
                values.iter().for_each(|&v| counts[bin_of(&edges, v)] += 1);
                prop_assert!(counts.iter().all(|&c| c * nb <= 2 * n), "{:?}", counts);
            }
        }
    }
}
