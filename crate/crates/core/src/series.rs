//! Uniformly sampled scalar series and the elementary operations on them.

use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A uniformly sampled, finite, non-empty scalar series.
///
/// `start_index` is the sample index of the first value in the series it was
/// cut from, so windows keep their position in the parent series. `dt` is the
/// sampling interval in the caller's time unit (quarter-years by default).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    start_index: usize,
    dt: f64,
    label: String,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyColumn);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            values,
            start_index: 0,
            dt: 1.0,
            label: String::new(),
        })
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sampling interval must be positive, got {dt}"
            )));
        }
        self.dt = dt;
        Ok(self)
    }

    pub fn with_start_index(mut self, start_index: usize) -> Self {
        self.start_index = start_index;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn start_index(&self) -> usize {
        self.start_index
    }

    /// Index one past the last sample, in parent-series coordinates.
    pub fn end_index(&self) -> usize {
        self.start_index + self.values.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn mean(&self) -> f64 {
        crate::stats::mean(&self.values)
    }

    /// Biased (divide by N) variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / self.len() as f64
    }

    /// A copy with the same metadata and new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Ok(Self {
            start_index: self.start_index,
            dt: self.dt,
            label: self.label.clone(),
            ..Self::new(values)?
        })
    }

    pub fn demeaned(&self) -> Self {
        let m = self.mean();
        Self {
            values: self.values.iter().map(|v| v - m).collect(),
            start_index: self.start_index,
            dt: self.dt,
            label: self.label.clone(),
        }
    }

    pub fn is_constant(&self) -> bool {
        let first = self.values[0];
        self.values.iter().all(|&v| v == first)
    }
}

/// Window length and step, both in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub length: usize,
    pub step: usize,
}

impl WindowSpec {
    pub fn new(length: usize, step: usize) -> Self {
        Self { length, step }
    }

    pub fn validate(&self, series_len: usize) -> Result<()> {
        if self.length == 0 || self.step == 0 {
            return Err(Error::InvalidArgument(
                "window length and step must be at least 1".into(),
            ));
        }
        if self.length > series_len {
            return Err(Error::TooShort {
                needed: self.length,
                got: series_len,
            });
        }
        Ok(())
    }

    /// Number of windows over a series of `series_len` samples.
    pub fn count(&self, series_len: usize) -> usize {
        if self.length == 0 || self.step == 0 || self.length > series_len {
            return 0;
        }
        (series_len - self.length) / self.step + 1
    }
}

/// Column selection for [`load_csv`]: by header name or zero-based index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Column {
    Name(String),
    Index(usize),
}

impl Default for Column {
    fn default() -> Self {
        Column::Index(0)
    }
}

impl FromStr for Column {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.trim().parse::<usize>() {
            Ok(i) => Column::Index(i),
            Err(_) => Column::Name(s.trim().to_string()),
        })
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Column::Name(n) => write!(f, "{n:?}"),
            Column::Index(i) => write!(f, "#{i}"),
        }
    }
}

/// Reads one column of a CSV file as a [`TimeSeries`] with sampling interval `dt`.
///
/// A first row whose selected cell is not numeric is treated as a header.
/// Errors name the 1-based line of the offending cell.
pub fn load_csv(path: impl AsRef<Path>, column: &Column, dt: f64) -> Result<TimeSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let series = read_csv(file, column, dt)?;
    Ok(if series.label().is_empty() {
        series.with_label(label)
    } else {
        series
    })
}

/// [`load_csv`] over any reader.
pub fn read_csv<R: Read>(reader: R, column: &Column, dt: f64) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut values = Vec::new();
    let mut col_idx: Option<usize> = match column {
        Column::Index(i) => Some(*i),
        Column::Name(_) => None,
    };
    let mut label = String::new();

    for (line, record) in rdr.records().enumerate() {
        let row = line + 1;
        let record = record.map_err(|e| Error::Csv {
            row,
            message: e.to_string(),
        })?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        if line == 0 {
            let header_like = match column {
                Column::Name(name) => {
                    let idx = record.iter().position(|c| c == name);
                    match idx {
                        Some(i) => {
                            col_idx = Some(i);
                            label = name.clone();
                            true
                        }
                        None => return Err(Error::MissingColumn(name.clone())),
                    }
                }
                Column::Index(i) => match record.get(*i) {
                    Some(cell) if cell.parse::<f64>().is_err() => {
                        label = cell.to_string();
                        true
                    }
                    _ => false,
                },
            };
            if header_like {
                continue;
            }
        }
        let idx = col_idx.expect("column index resolved on the first row");
        let cell = record.get(idx).ok_or_else(|| Error::Csv {
            row,
            message: format!("row has no column {idx}"),
        })?;
        let v: f64 = cell.parse().map_err(|_| Error::Parse {
            row,
            value: cell.to_string(),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                row,
                value: cell.to_string(),
            });
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::EmptyColumn);
    }
    Ok(TimeSeries::new(values)?.with_dt(dt)?.with_label(label))
}

/// `out[i] = in[i + lag] - in[i]`.
pub fn difference(series: &TimeSeries, lag: usize) -> Result<TimeSeries> {
    if lag == 0 {
        return Err(Error::InvalidArgument("lag must be at least 1".into()));
    }
    if lag >= series.len() {
        return Err(Error::TooShort {
            needed: lag + 1,
            got: series.len(),
        });
    }
    let v = series.values();
    let out = v.iter().zip(&v[lag..]).map(|(a, b)| b - a).collect();
    series.with_values(out)
}

pub fn sliding_windows(series: &TimeSeries, spec: WindowSpec) -> Result<Vec<TimeSeries>> {
    spec.validate(series.len())?;
    let v = series.values();
    (0..spec.count(series.len()))
        .map(|w| {
            let start = w * spec.step;
            Ok(series
                .with_values(v[start..start + spec.length].to_vec())?
                .with_start_index(series.start_index() + start))
        })
        .collect()
}

/// Mean-subtracted, biased autocorrelation for lags `0..=max_lag`.
pub fn autocorrelation(series: &TimeSeries, max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if max_lag >= n {
        return Err(Error::TooShort {
            needed: max_lag + 1,
            got: n,
        });
    }
    let m = series.mean();
    let d: Vec<f64> = series.values().iter().map(|v| v - m).collect();
    let c0: f64 = d.iter().map(|v| v * v).sum();
    if c0 <= 0.0 || series.is_constant() {
        return Err(Error::ConstantSeries);
    }
    Ok((0..=max_lag)
        .map(|k| {
            if k == 0 {
                1.0
            } else {
                d.iter().zip(&d[k..]).map(|(a, b)| a * b).sum::<f64>() / c0
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ts(v: &[f64]) -> TimeSeries {
        TimeSeries::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(matches!(TimeSeries::new(vec![]), Err(Error::EmptyColumn)));
        assert!(matches!(
            TimeSeries::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite(1))
        ));
        assert!(ts(&[1.0]).with_dt(0.0).is_err());
    }

    #[test]
    fn csv_plain_column() {
        let s = read_csv("10\n12\n11\n".as_bytes(), &Column::Index(0), 1.0).unwrap();
        assert_eq!(s.values(), &[10.0, 12.0, 11.0]);
    }

    #[test]
    fn csv_named_column_with_header() {
        let data = "t,stock\n0,5.5\n1,6.5\n2,7\n";
        let s = read_csv(data.as_bytes(), &"stock".parse().unwrap(), 0.25).unwrap();
        assert_eq!(s.values(), &[5.5, 6.5, 7.0]);
        assert_eq!(s.dt(), 0.25);
        assert_eq!(s.label(), "stock");
    }

    #[test]
    fn csv_header_autodetected_for_index() {
        let data = "t,stock\n0,5.5\n1,6.5\n";
        let s = read_csv(data.as_bytes(), &Column::Index(1), 1.0).unwrap();
        assert_eq!(s.values(), &[5.5, 6.5]);
    }

    #[test]
    fn csv_bad_cell_names_row() {
        let data = "x\n1\n2\n3\n4\n5\nabc\n7\n";
        let err = read_csv(data.as_bytes(), &Column::Index(0), 1.0).unwrap_err();
        match err {
            Error::Parse { row, value } => {
                assert_eq!(row, 7);
                assert_eq!(value, "abc");
            }
            e => panic!("unexpected {e}"),
        }
        assert!(err_msg(data).contains("row 7"));
    }

    fn err_msg(data: &str) -> String {
        read_csv(data.as_bytes(), &Column::Index(0), 1.0)
            .unwrap_err()
            .to_string()
    }

    #[test]
    fn csv_missing_and_empty() {
        assert!(matches!(
            read_csv("a,b\n1,2\n".as_bytes(), &"c".parse().unwrap(), 1.0),
            Err(Error::MissingColumn(_))
        ));
        assert!(matches!(
            read_csv("stock\n".as_bytes(), &"stock".parse().unwrap(), 1.0),
            Err(Error::EmptyColumn)
        ));
        assert!(matches!(
            load_csv("/nonexistent/file.csv", &Column::Index(0), 1.0),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn difference_examples() {
        assert_eq!(
            difference(&ts(&[10.0, 12.0, 11.0]), 1).unwrap().values(),
            &[2.0, -1.0]
        );
        assert_eq!(
            difference(&ts(&[3.0; 4]), 1).unwrap().values(),
            &[0.0, 0.0, 0.0]
        );
        let levels: Vec<f64> = (0..156).map(|i| (i as f64 * 0.7).sin()).collect();
        assert_eq!(difference(&ts(&levels), 1).unwrap().len(), 155);
        assert!(difference(&ts(&[1.0, 2.0]), 2).is_err());
    }

    #[test]
    fn window_examples() {
        let s = ts(&vec![0.0; 155]);
        assert_eq!(sliding_windows(&s, WindowSpec::new(131, 1)).unwrap().len(), 25);
        assert_eq!(sliding_windows(&s, WindowSpec::new(155, 1)).unwrap().len(), 1);
        let s10 = ts(&(0..10).map(f64::from).collect::<Vec<_>>());
        let w = sliding_windows(&s10, WindowSpec::new(4, 3)).unwrap();
        let starts: Vec<usize> = w.iter().map(|w| w.start_index()).collect();
        assert_eq!(starts, vec![0, 3, 6]);
        assert_eq!(w[2].values(), &[6.0, 7.0, 8.0, 9.0]);
        assert!(sliding_windows(&s10, WindowSpec::new(11, 1)).is_err());
        assert!(sliding_windows(&s10, WindowSpec::new(4, 0)).is_err());
    }

    #[test]
    fn window_count_formula_exhaustive() {
        for len in 1..=50usize {
            let s = ts(&vec![1.0; len]);
            for length in 1..=len {
                for step in 1..=len {
                    let w = sliding_windows(&s, WindowSpec::new(length, step)).unwrap();
                    assert_eq!(w.len(), (len - length) / step + 1);
                    for (k, win) in w.iter().enumerate() {
                        assert_eq!(win.start_index(), k * step);
                        assert_eq!(win.len(), length);
                    }
                }
            }
        }
    }

    #[test]
    fn acf_alternating() {
        let v: Vec<f64> = (0..200).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let acf = autocorrelation(&ts(&v), 3).unwrap();
        assert_eq!(acf[0], 1.0);
        assert!((acf[1] + 1.0).abs() < 0.01);
        assert!(matches!(
            autocorrelation(&ts(&[2.0; 10]), 3),
            Err(Error::ConstantSeries)
        ));
        assert!(autocorrelation(&ts(&[1.0, 2.0]), 2).is_err());
    }

    proptest! {
        #[test]
        fn difference_inverts_cumsum(
            start in -100.0f64..100.0,
            steps in proptest::collection::vec(-10.0f64..10.0, 1..200),
        ) {
            let mut levels = vec![start];
            for s in &steps {
                let last = *levels.last().unwrap();
                levels.push(last + s);
            }
            let d = difference(&ts(&levels), 1).unwrap();
            for (a, b) in d.values().iter().zip(&steps) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn acf_bounded(v in proptest::collection::vec(-1e3f64..1e3, 3..300)) {
            let s = ts(&v);
            prop_assume!(!s.is_constant());
            let acf = autocorrelation(&s, s.len() - 1).unwrap();
            prop_assert_eq!(acf[0], 1.0);
            for a in acf {
                prop_assert!(a.abs() <= 1.0 + 1e-12);
            }
        }
    }
}
