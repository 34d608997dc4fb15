//! Empirical group-mean matrices that feed the rate regressions.
//!
//! * η: mean publications in interval `j` for researchers with exactly `i`
//!   publications before it (`i = 1..=K`).
//! * ξ: mean new coauthors in interval `j` for researchers with exactly `m`
//!   publications in it (`m = 1..=M`).

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{DatasetSlice, WindowSpec};
use crate::Real;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("{0} matrix has no populated group; check the training window")]
    Empty(&'static str),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed matrix file: {0}")]
    Malformed(String),
}

/// Group means with their group sizes, indexed from 1 in both directions.
/// A cell with count 0 is missing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupMeans<T> {
    pub rows: usize,
    pub cols: usize,
    values: Vec<T>,
    counts: Vec<u64>,
}

pub type EtaMatrix<T> = GroupMeans<T>;
pub type XiMatrix<T> = GroupMeans<T>;

impl<T: Real> GroupMeans<T> {
    /// Builds a grid from row-major sums and counts.
    pub fn from_sums(rows: usize, cols: usize, sums: &[u64], counts: Vec<u64>) -> Self {
        let values = sums
            .iter()
            .zip(&counts)
            .map(|(&s, &c)| if c > 0 { T::of(s as f64) / T::of(c as f64) } else { T::zero() })
            .collect();
        GroupMeans { rows, cols, values, counts }
    }

    /// Builds a grid from explicit cells; `None` marks a missing entry.
    pub fn from_cells(rows: usize, cols: usize, cells: impl Fn(usize, usize) -> Option<(T, u64)>) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        let mut counts = Vec::with_capacity(rows * cols);
        for i in 1..=rows {
            for j in 1..=cols {
                match cells(i, j) {
                    Some((v, c)) if c > 0 => {
                        values.push(v);
                        counts.push(c);
                    }
                    _ => {
                        values.push(T::zero());
                        counts.push(0);
                    }
                }
            }
        }
        GroupMeans { rows, cols, values, counts }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        assert!(i >= 1 && i <= self.rows && j >= 1 && j <= self.cols, "cell ({i}, {j}) out of range");
        (i - 1) * self.cols + (j - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> Option<T> {
        let k = self.idx(i, j);
        (self.counts[k] > 0).then(|| self.values[k])
    }

    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[self.idx(i, j)]
    }

    pub fn is_empty(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    pub fn column_count(&self, j: usize) -> u64 {
        (1..=self.rows).map(|i| self.count(i, j)).sum()
    }

    /// Writes `label` (e.g. `i/j`) then column indices as the header; missing cells are empty.
    pub fn write_values_csv<W: Write>(&self, w: W, label: &str) -> Result<(), MatrixError> {
        self.write_csv(w, label, |i, j| self.get(i, j).map(|v| v.to_string()).unwrap_or_default())
    }

    pub fn write_counts_csv<W: Write>(&self, w: W, label: &str) -> Result<(), MatrixError> {
        self.write_csv(w, label, |i, j| self.count(i, j).to_string())
    }

    fn write_csv<W: Write>(&self, w: W, label: &str, cell: impl Fn(usize, usize) -> String) -> Result<(), MatrixError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec![label.to_string()];
        header.extend((1..=self.cols).map(|j| j.to_string()));
        out.write_record(&header)?;
        for i in 1..=self.rows {
            let mut row = vec![i.to_string()];
            row.extend((1..=self.cols).map(|j| cell(i, j)));
            out.write_record(&row)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads a grid back from a values file and a counts file written by this type.
    pub fn read_csv<R1: Read, R2: Read>(values: R1, counts: R2) -> Result<Self, MatrixError> {
        let vals = read_table(values)?;
        let cnts = read_table(counts)?;
        if vals.len() != cnts.len() || vals.first().map(Vec::len) != cnts.first().map(Vec::len) {
            return Err(MatrixError::Malformed("values and counts differ in shape".into()));
        }
        let rows = vals.len();
        let cols = vals.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows * cols);
        let mut counts = Vec::with_capacity(rows * cols);
        for (vr, cr) in vals.iter().zip(&cnts) {
            for (v, c) in vr.iter().zip(cr) {
                let c: u64 = c.parse().map_err(|_| MatrixError::Malformed(format!("bad count {c:?}")))?;
                let v = if v.is_empty() {
                    T::zero()
                } else {
                    T::of(v.parse::<f64>().map_err(|_| MatrixError::Malformed(format!("bad value {v:?}")))?)
                };
                values.push(v);
                counts.push(c);
            }
        }
        Ok(GroupMeans { rows, cols, values, counts })
    }
}

/// Rows of a labelled grid file, without the header row and the index column.
pub(crate) fn read_table<R: Read>(r: R) -> Result<Vec<Vec<String>>, MatrixError> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let width = reader.headers()?.len();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.len() != width {
            return Err(MatrixError::Malformed(format!("row has {} fields, expected {width}", rec.len())));
        }
        rows.push(rec.iter().skip(1).map(str::to_string).collect());
    }
    Ok(rows)
}

/// η over the training slice: `K` rows by `L` columns.
pub fn compute_eta<T: Real>(training: &DatasetSlice, spec: &WindowSpec) -> Result<EtaMatrix<T>, MatrixError> {
    let (k, l) = (spec.fit_history, spec.fit_intervals);
    let columns: Vec<(Vec<u64>, Vec<u64>)> = (1..=l)
        .into_par_iter()
        .map(|j| {
            let mut sums = vec![0u64; k];
            let mut counts = vec![0u64; k];
            let before = spec.t(j - 1);
            for s in &training.members {
                let i = s.pubs_between(spec.history_start - 1, before) as usize;
                if (1..=k).contains(&i) {
                    sums[i - 1] += u64::from(spec.pubs_in(s, j));
                    counts[i - 1] += 1;
                }
            }
            (sums, counts)
        })
        .collect();
    let m = assemble(k, l, columns);
    if m.is_empty() {
        return Err(MatrixError::Empty("eta"));
    }
    Ok(m)
}

/// ξ over the training slice: `M` rows by `L` columns.
pub fn compute_xi<T: Real>(training: &DatasetSlice, spec: &WindowSpec) -> Result<XiMatrix<T>, MatrixError> {
    let (mm, l) = (spec.max_annual, spec.fit_intervals);
    let columns: Vec<(Vec<u64>, Vec<u64>)> = (1..=l)
        .into_par_iter()
        .map(|j| {
            let mut sums = vec![0u64; mm];
            let mut counts = vec![0u64; mm];
            for s in &training.members {
                let m = spec.pubs_in(s, j) as usize;
                if (1..=mm).contains(&m) {
                    sums[m - 1] += u64::from(spec.new_coauthors_in(s, j));
                    counts[m - 1] += 1;
                }
            }
            (sums, counts)
        })
        .collect();
    let m = assemble(mm, l, columns);
    if m.is_empty() {
        return Err(MatrixError::Empty("xi"));
    }
    Ok(m)
}

fn assemble<T: Real>(rows: usize, cols: usize, columns: Vec<(Vec<u64>, Vec<u64>)>) -> GroupMeans<T> {
    let mut sums = vec![0u64; rows * cols];
    let mut counts = vec![0u64; rows * cols];
    for (j, (cs, cc)) in columns.into_iter().enumerate() {
        for i in 0..rows {
            sums[i * cols + j] = cs[i];
            counts[i * cols + j] = cc[i];
        }
    }
    GroupMeans::from_sums(rows, cols, &sums, counts)
}
