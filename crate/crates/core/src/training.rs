//! Full rate surfaces from the empirical group means.
//!
//! λ (`I × J`, publications) is assembled in five passes over η:
//!
//! 1. each row `i <= K` gets a log-linear time fit over the observed
//!    intervals and is extended to all `J` intervals;
//! 2. each observed column `j <= L` gets a log-log fit in `i` and is extended
//!    to rows `K+1..=I`;
//! 3. rows beyond `K` are refit in time on the values from pass 2;
//! 4. columns beyond `L` are refit in `log i` on the values from pass 1;
//! 5. the corner block `i > K, j > L` is the mean of the two extrapolations.
//!
//! ζ (`M × J`, new coauthors) is one log-linear time fit per row of ξ.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::WindowSpec;
use crate::glm::{coefficient_chi2_test, fit_log_linear, FitError, FitMethod, LogLinearFit};
use crate::matrices::{read_table, EtaMatrix, MatrixError, XiMatrix};
use crate::Real;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("row {index} of the {matrix} matrix cannot be fitted: {source}")]
    Row { matrix: &'static str, index: usize, source: FitError },
    #[error("column {index} of the {matrix} matrix cannot be fitted: {source}")]
    Column { matrix: &'static str, index: usize, source: FitError },
    #[error("{0}")]
    Shape(String),
    #[error(transparent)]
    Io(#[from] MatrixError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOptions {
    pub method: FitMethod,
    /// Fall back to the other regression direction for rows or columns with
    /// fewer than two usable points instead of failing.
    pub lenient: bool,
}

/// Which step of the assembly produced a λ cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellSource {
    ObservedFit,
    RowExtrapolated,
    ColumnExtrapolated,
    Averaged,
    /// Loaded from a file or built directly.
    External,
}

impl CellSource {
    pub fn code(self) -> &'static str {
        match self {
            CellSource::ObservedFit => "observed-fit",
            CellSource::RowExtrapolated => "row-extrapolated",
            CellSource::ColumnExtrapolated => "column-extrapolated",
            CellSource::Averaged => "averaged",
            CellSource::External => "external",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaMatrix<T> {
    pub rows: usize,
    pub cols: usize,
    values: Vec<T>,
    sources: Vec<CellSource>,
    /// `(alpha_i, beta_i)` per row.
    pub row_fits: Vec<Option<LogLinearFit<T>>>,
    /// `(mu_j, nu_j)` per column.
    pub col_fits: Vec<Option<LogLinearFit<T>>>,
    /// Rows `i <= K` that were filled from the column fits.
    pub fallback_rows: Vec<usize>,
    /// Columns `j <= L` whose log-log fit came from the row fits.
    pub fallback_cols: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZetaMatrix<T> {
    pub rows: usize,
    pub cols: usize,
    values: Vec<T>,
    /// `(intercept, time slope)` per row.
    pub fits: Vec<Option<LogLinearFit<T>>>,
    /// p-value for a zero time slope, per row.
    pub significance: Vec<Option<T>>,
    /// `(row, donor row)` for rows that copied another row's fit.
    pub borrowed: Vec<(usize, usize)>,
}

fn cell(cols: usize, i: usize, j: usize) -> usize {
    (i - 1) * cols + (j - 1)
}

impl<T: Real> LambdaMatrix<T> {
    /// A matrix with given values and no fit metadata.
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let values = (1..=rows).flat_map(|i| (1..=cols).map(move |j| (i, j))).map(|(i, j)| f(i, j)).collect();
        LambdaMatrix {
            rows,
            cols,
            values,
            sources: vec![CellSource::External; rows * cols],
            row_fits: vec![None; rows],
            col_fits: vec![None; cols],
            fallback_rows: Vec::new(),
            fallback_cols: Vec::new(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        assert!(i >= 1 && i <= self.rows && j >= 1 && j <= self.cols, "cell ({i}, {j}) out of range");
        self.values[cell(self.cols, i, j)]
    }

    pub fn source(&self, i: usize, j: usize) -> CellSource {
        self.sources[cell(self.cols, i, j)]
    }

    fn set(&mut self, i: usize, j: usize, v: T, s: CellSource) {
        let k = cell(self.cols, i, j);
        self.values[k] = v;
        self.sources[k] = s;
    }

    pub fn write_values_csv<W: Write>(&self, w: W) -> Result<(), MatrixError> {
        write_grid(w, "i/j", self.rows, self.cols, |i, j| self.get(i, j).to_string())
    }

    pub fn write_sources_csv<W: Write>(&self, w: W) -> Result<(), MatrixError> {
        write_grid(w, "i/j", self.rows, self.cols, |i, j| self.source(i, j).code().to_string())
    }

    pub fn write_coefficients_csv<W: Write>(&self, w: W) -> Result<(), MatrixError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["direction", "index", "intercept", "slope", "slope_se", "slope_p_value", "n_points"])?;
        for (direction, fits) in [("row", &self.row_fits), ("column", &self.col_fits)] {
            for (idx, fit) in fits.iter().enumerate() {
                if let Some(f) = fit {
                    out.write_record(coef_record(direction, idx + 1, f))?;
                }
            }
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_values_csv<R: Read>(r: R) -> Result<Self, MatrixError> {
        let (rows, cols, values) = read_grid(r)?;
        Ok(Self::from_fn(rows, cols, |i, j| values[cell(cols, i, j)]))
    }
}

impl<T: Real> ZetaMatrix<T> {
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let values = (1..=rows).flat_map(|i| (1..=cols).map(move |j| (i, j))).map(|(i, j)| f(i, j)).collect();
        ZetaMatrix {
            rows,
            cols,
            values,
            fits: vec![None; rows],
            significance: vec![None; rows],
            borrowed: Vec::new(),
        }
    }

    pub fn get(&self, m: usize, j: usize) -> T {
        assert!(m >= 1 && m <= self.rows && j >= 1 && j <= self.cols, "cell ({m}, {j}) out of range");
        self.values[cell(self.cols, m, j)]
    }

    pub fn write_values_csv<W: Write>(&self, w: W) -> Result<(), MatrixError> {
        write_grid(w, "m/j", self.rows, self.cols, |i, j| self.get(i, j).to_string())
    }

    pub fn write_coefficients_csv<W: Write>(&self, w: W) -> Result<(), MatrixError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["m", "intercept", "slope", "slope_se", "slope_p_value", "chi2_p_value", "n_points", "borrowed_from"])?;
        for m in 1..=self.rows {
            let donor = self.borrowed.iter().find(|b| b.0 == m).map(|b| b.1.to_string()).unwrap_or_default();
            let sig = self.significance[m - 1].map(|p| p.to_string()).unwrap_or_default();
            match &self.fits[m - 1] {
                Some(f) => out.write_record([
                    m.to_string(),
                    f.intercept.to_string(),
                    f.slope.to_string(),
                    f.slope_se.to_string(),
                    f.slope_p_value.to_string(),
                    sig,
                    f.n_points.to_string(),
                    donor,
                ])?,
                None => out.write_record([m.to_string(), String::new(), String::new(), String::new(), String::new(), sig, "0".into(), donor])?,
            }
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_values_csv<R: Read>(r: R) -> Result<Self, MatrixError> {
        let (rows, cols, values) = read_grid(r)?;
        Ok(Self::from_fn(rows, cols, |i, j| values[cell(cols, i, j)]))
    }
}

fn coef_record<T: Real>(direction: &str, index: usize, f: &LogLinearFit<T>) -> Vec<String> {
    vec![
        direction.to_string(),
        index.to_string(),
        f.intercept.to_string(),
        f.slope.to_string(),
        f.slope_se.to_string(),
        f.slope_p_value.to_string(),
        f.n_points.to_string(),
    ]
}

fn write_grid<W: Write>(w: W, label: &str, rows: usize, cols: usize, f: impl Fn(usize, usize) -> String) -> Result<(), MatrixError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec![label.to_string()];
    header.extend((1..=cols).map(|j| j.to_string()));
    out.write_record(&header)?;
    for i in 1..=rows {
        let mut row = vec![i.to_string()];
        row.extend((1..=cols).map(|j| f(i, j)));
        out.write_record(&row)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn read_grid<T: Real, R: Read>(r: R) -> Result<(usize, usize, Vec<T>), MatrixError> {
    let table = read_table(r)?;
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(MatrixError::Malformed("empty rate matrix".into()));
    }
    let mut values = Vec::with_capacity(rows * cols);
    for row in &table {
        for v in row {
            let x: f64 = v.parse().map_err(|_| MatrixError::Malformed(format!("bad rate {v:?}")))?;
            if !(x > 0.0) {
                return Err(MatrixError::Malformed(format!("rate {x} is not positive")));
            }
            values.push(T::of(x));
        }
    }
    Ok((rows, cols, values))
}

/// Time regressors `t_j - t_1` for `j = 1..=J`.
fn offsets<T: Real>(spec: &WindowSpec) -> Vec<T> {
    (1..=spec.intervals()).map(|j| T::of(spec.offset(j))).collect()
}

fn log_index<T: Real>(i: usize) -> T {
    T::of_usize(i).ln()
}

/// Builds the full `I × J` λ surface from η.
pub fn fit_lambda<T: Real>(eta: &EtaMatrix<T>, spec: &WindowSpec, opts: TrainOptions) -> Result<LambdaMatrix<T>, TrainError> {
    let (big_i, big_j, k, l) = (spec.max_history, spec.intervals(), spec.fit_history, spec.fit_intervals);
    if eta.rows != k || eta.cols != l {
        return Err(TrainError::Shape(format!("eta is {}x{}, window expects {k}x{l}", eta.rows, eta.cols)));
    }
    let x: Vec<T> = offsets(spec);
    let mut lam = LambdaMatrix::from_fn(big_i, big_j, |_, _| T::nan());

    // Pass 1: time fits on observed rows.
    for i in 1..=k {
        let y: Vec<T> = (1..=l).map(|j| eta.get(i, j).unwrap_or_else(T::zero)).collect();
        let w: Vec<T> = (1..=l).map(|j| T::of(eta.count(i, j) as f64)).collect();
        match fit_log_linear(&x[..l], &y, Some(&w), opts.method) {
            Ok(fit) => {
                for j in 1..=big_j {
                    let src = if j <= l { CellSource::ObservedFit } else { CellSource::RowExtrapolated };
                    lam.set(i, j, fit.value(x[j - 1]), src);
                }
                lam.row_fits[i - 1] = Some(fit);
            }
            Err(_) if opts.lenient => lam.fallback_rows.push(i),
            Err(source) => return Err(TrainError::Row { matrix: "eta", index: i, source }),
        }
    }
    let fitted_rows: Vec<usize> = (1..=k).filter(|i| lam.row_fits[i - 1].is_some()).collect();

    // Pass 2: log-log fits on observed columns.
    let idx: Vec<usize> = (1..=k).collect();
    for j in 1..=l {
        let y: Vec<T> = idx.iter().map(|&i| eta.get(i, j).unwrap_or_else(T::zero)).collect();
        let w: Vec<T> = idx.iter().map(|&i| T::of(eta.count(i, j) as f64)).collect();
        let xs: Vec<T> = idx.iter().map(|&i| log_index(i)).collect();
        match fit_log_linear(&xs, &y, Some(&w), opts.method) {
            Ok(fit) => lam.col_fits[j - 1] = Some(fit),
            Err(_) if opts.lenient => {
                let fit = column_from_rows(&lam, &fitted_rows, x[j - 1], opts.method)
                    .map_err(|source| TrainError::Column { matrix: "eta", index: j, source })?;
                lam.col_fits[j - 1] = Some(fit);
                lam.fallback_cols.push(j);
            }
            Err(source) => return Err(TrainError::Column { matrix: "eta", index: j, source }),
        }
    }

    // Rows filled from the column fits: everything past K plus lenient fallbacks.
    let extrapolated_rows: Vec<usize> = lam.fallback_rows.iter().copied().chain(k + 1..=big_i).collect();
    for &i in &extrapolated_rows {
        let mut y = Vec::with_capacity(l);
        for j in 1..=l {
            let col = lam.col_fits[j - 1].as_ref().expect("every observed column has a fit");
            let v = col.value(log_index(i));
            lam.set(i, j, v, CellSource::ColumnExtrapolated);
            y.push(v);
        }
        // Pass 3: time fit on the extrapolated values.
        let fit = fit_log_linear(&x[..l], &y, None, opts.method)
            .map_err(|source| TrainError::Row { matrix: "lambda", index: i, source })?;
        lam.row_fits[i - 1] = Some(fit);
    }

    // Pass 4: log-log fits for unobserved columns on the row-fit values.
    for j in l + 1..=big_j {
        let fit = column_from_rows(&lam, &fitted_rows, x[j - 1], opts.method)
            .map_err(|source| TrainError::Column { matrix: "lambda", index: j, source })?;
        lam.col_fits[j - 1] = Some(fit);
    }

    // Pass 5: average the two extrapolations in the corner block.
    for &i in &extrapolated_rows {
        let row = lam.row_fits[i - 1].expect("pass 3 fitted this row");
        for j in l + 1..=big_j {
            let col = lam.col_fits[j - 1].expect("pass 4 fitted this column");
            let v = (row.value(x[j - 1]) + col.value(log_index(i))) / T::of(2.0);
            lam.set(i, j, v, CellSource::Averaged);
        }
    }
    Ok(lam)
}

/// Log-log fit over rows `rows` using each row's time-model value at `xj`.
fn column_from_rows<T: Real>(lam: &LambdaMatrix<T>, rows: &[usize], xj: T, method: FitMethod) -> Result<LogLinearFit<T>, FitError> {
    let xs: Vec<T> = rows.iter().map(|&i| log_index(i)).collect();
    let ys: Vec<T> = rows
        .iter()
        .map(|&i| lam.row_fits[i - 1].as_ref().expect("fitted row").value(xj))
        .collect();
    fit_log_linear(&xs, &ys, None, method)
}

/// Builds the `M × J` ζ surface from ξ.
pub fn fit_zeta<T: Real>(xi: &XiMatrix<T>, spec: &WindowSpec, opts: TrainOptions) -> Result<ZetaMatrix<T>, TrainError> {
    let (mm, big_j, l) = (spec.max_annual, spec.intervals(), spec.fit_intervals);
    if xi.rows != mm || xi.cols != l {
        return Err(TrainError::Shape(format!("xi is {}x{}, window expects {mm}x{l}", xi.rows, xi.cols)));
    }
    let x: Vec<T> = offsets(spec);
    let mut zeta = ZetaMatrix::from_fn(mm, big_j, |_, _| T::nan());
    let mut missing = Vec::new();
    for m in 1..=mm {
        let y: Vec<T> = (1..=l).map(|j| xi.get(m, j).unwrap_or_else(T::zero)).collect();
        let w: Vec<T> = (1..=l).map(|j| T::of(xi.count(m, j) as f64)).collect();
        match fit_log_linear(&x[..l], &y, Some(&w), opts.method) {
            Ok(fit) => {
                zeta.significance[m - 1] = Some(coefficient_chi2_test(&fit).unwrap_or(fit.slope_p_value));
                zeta.fits[m - 1] = Some(fit);
            }
            Err(_) if opts.lenient => missing.push(m),
            Err(source) => return Err(TrainError::Row { matrix: "xi", index: m, source }),
        }
    }
    for m in missing {
        let donor = (1..m)
            .rev()
            .find(|&d| zeta.fits[d - 1].is_some())
            .or_else(|| (m + 1..=mm).find(|&d| zeta.fits[d - 1].is_some()))
            .ok_or(TrainError::Row { matrix: "xi", index: m, source: FitError::InsufficientPoints { usable: 0 } })?;
        zeta.fits[m - 1] = zeta.fits[donor - 1];
        zeta.borrowed.push((m, donor));
    }
    for m in 1..=mm {
        let fit = zeta.fits[m - 1].expect("every row fitted or borrowed");
        for j in 1..=big_j {
            zeta.values[cell(big_j, m, j)] = fit.value(x[j - 1]);
        }
    }
    Ok(zeta)
}
