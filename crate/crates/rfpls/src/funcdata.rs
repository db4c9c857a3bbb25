//! Discretized functional data: evaluation grids, samples of curves, and the
//! CSV exchange format used by the command-line tools.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Result, RfplsError};

/// A strictly increasing evaluation grid with at least two points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    points: Vec<f64>,
}

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(RfplsError::invalid(format!(
                "a grid needs at least 2 points, got {}",
                points.len()
            )));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.is_finite() {
                return Err(RfplsError::invalid(format!(
                    "grid point {i} is not finite"
                )));
            }
        }
        for i in 1..points.len() {
            if points[i] <= points[i - 1] {
                return Err(RfplsError::invalid(format!(
                    "grid must be strictly increasing, violated at index {i}"
                )));
            }
        }
        Ok(Grid { points })
    }

    /// `p` equally spaced points covering `[a, b]`.
    pub fn uniform(a: f64, b: f64, p: usize) -> Result<Self> {
        if p < 2 {
            return Err(RfplsError::invalid("uniform grid needs at least 2 points"));
        }
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(RfplsError::invalid("uniform grid needs finite a < b"));
        }
        let step = (b - a) / (p as f64 - 1.0);
        let mut points: Vec<f64> = (0..p).map(|i| a + step * i as f64).collect();
        // Pin the endpoint exactly so domain checks never trip on round-off.
        points[p - 1] = b;
        Grid::new(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        *self.points.last().expect("grid is nonempty")
    }

    /// Trapezoid quadrature weights: interior point `j` gets
    /// `(t[j+1] - t[j-1]) / 2`, the endpoints get their half-intervals.
    pub fn quadrature_weights(&self) -> Array1<f64> {
        let p = self.points.len();
        let mut w = Array1::zeros(p);
        w[0] = (self.points[1] - self.points[0]) / 2.0;
        w[p - 1] = (self.points[p - 1] - self.points[p - 2]) / 2.0;
        for j in 1..p - 1 {
            w[j] = (self.points[j + 1] - self.points[j - 1]) / 2.0;
        }
        w
    }
}

/// Approximate L2 norm of a curve sampled on `grid`, using trapezoid weights:
/// `sqrt(sum_j v_j^2 * w_j)`.
pub fn riemann_l2_norm(values: ArrayView1<f64>, grid: &Grid) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(RfplsError::dims(format!(
            "curve has {} values but grid has {} points",
            values.len(),
            grid.len()
        )));
    }
    let w = grid.quadrature_weights();
    Ok(values
        .iter()
        .zip(w.iter())
        .map(|(v, w)| v * v * w)
        .sum::<f64>()
        .sqrt())
}

/// A sample of `n` curves observed on a common grid; row `i` of `values` is
/// curve `i` evaluated at the grid points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionalSample {
    pub grid: Grid,
    pub values: Array2<f64>,
    pub label: String,
}

impl FunctionalSample {
    pub fn new(grid: Grid, values: Array2<f64>, label: impl Into<String>) -> Result<Self> {
        if values.ncols() != grid.len() {
            return Err(RfplsError::dims(format!(
                "values have {} columns but grid has {} points",
                values.ncols(),
                grid.len()
            )));
        }
        if values.nrows() == 0 {
            return Err(RfplsError::invalid("a sample needs at least one curve"));
        }
        if let Some((idx, _)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let (r, c) = (idx / values.ncols(), idx % values.ncols());
            return Err(RfplsError::invalid(format!(
                "curve value at row {r}, column {c} is not finite"
            )));
        }
        Ok(FunctionalSample {
            grid,
            values,
            label: label.into(),
        })
    }

    pub fn n_curves(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.values.ncols()
    }
}

/// Subtracts the cross-sectional mean curve from every row. Returns the
/// centered sample and the mean curve that was removed.
pub fn center_functions(sample: &FunctionalSample) -> (FunctionalSample, Array1<f64>) {
    let mean = sample
        .values
        .mean_axis(Axis(0))
        .expect("sample has at least one curve");
    let mut centered = sample.values.clone();
    for mut row in centered.rows_mut() {
        row -= &mean;
    }
    (
        FunctionalSample {
            grid: sample.grid.clone(),
            values: centered,
            label: sample.label.clone(),
        },
        mean,
    )
}

/// Denominator floor for percentage errors where the true curve passes
/// through zero.
pub const APE_DENOMINATOR_FLOOR: f64 = 1e-8;

/// Per-curve L2 norms of the pointwise relative error
/// `|truth - pred| / max(|truth|, floor)` on `grid`.
pub fn percentage_error_norms(
    truth: ndarray::ArrayView2<f64>,
    pred: ndarray::ArrayView2<f64>,
    grid: &Grid,
) -> Result<Vec<f64>> {
    if truth.dim() != pred.dim() {
        return Err(RfplsError::dims(format!(
            "truth is {:?} but predictions are {:?}",
            truth.dim(),
            pred.dim()
        )));
    }
    let n = truth.nrows();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let ratio = Array1::from_iter(
            truth
                .row(i)
                .iter()
                .zip(pred.row(i).iter())
                .map(|(y, f)| (y - f).abs() / y.abs().max(APE_DENOMINATOR_FLOOR)),
        );
        out.push(riemann_l2_norm(ratio.view(), grid)?);
    }
    Ok(out)
}

/// Per-curve L2 norms of the pointwise absolute error `|truth - pred|`.
pub fn absolute_error_norms(
    truth: ndarray::ArrayView2<f64>,
    pred: ndarray::ArrayView2<f64>,
    grid: &Grid,
) -> Result<Vec<f64>> {
    if truth.dim() != pred.dim() {
        return Err(RfplsError::dims(format!(
            "truth is {:?} but predictions are {:?}",
            truth.dim(),
            pred.dim()
        )));
    }
    let n = truth.nrows();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let diff = Array1::from_iter(
            truth
                .row(i)
                .iter()
                .zip(pred.row(i).iter())
                .map(|(y, f)| (y - f).abs()),
        );
        out.push(riemann_l2_norm(diff.view(), grid)?);
    }
    Ok(out)
}

/// Formats a float with 17 significant digits, enough to round-trip `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Reads a curve CSV. The header row is `grid,<t_1>,...,<t_p>`; every
/// following row is `<curve_id>,<y_1>,...,<y_p>`. Returns the sample (labeled
/// with the file stem) and the curve ids in file order.
pub fn read_curves_csv(path: &Path) -> Result<(FunctionalSample, Vec<String>)> {
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => RfplsError::Io {
                path: path_str.clone(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => RfplsError::parse(path_str.clone(), None, e.to_string()),
        })?;

    let mut records = reader.records();
    let header = match records.next() {
        Some(Ok(rec)) => rec,
        Some(Err(e)) => return Err(RfplsError::parse(path_str, Some("row 1".into()), e.to_string())),
        None => return Err(RfplsError::parse(path_str, None, "file is empty")),
    };
    if header.len() < 3 {
        return Err(RfplsError::parse(
            path_str,
            Some("row 1".into()),
            "header must be 'grid' followed by at least two grid points",
        ));
    }
    // The first header cell is "grid", optionally followed by
    // whitespace-separated annotations (prediction bands record alpha and B
    // there) which are ignored on read.
    let first_cell = header.get(0).unwrap_or("").trim();
    if first_cell.split_whitespace().next() != Some("grid") {
        return Err(RfplsError::parse(
            path_str,
            Some("row 1".into()),
            format!("header must start with 'grid', found '{first_cell}'"),
        ));
    }
    let mut grid_points = Vec::with_capacity(header.len() - 1);
    for (j, cell) in header.iter().enumerate().skip(1) {
        let v: f64 = cell.trim().parse().map_err(|_| {
            RfplsError::parse(
                path_str.clone(),
                Some(format!("row 1, column {}", j + 1)),
                format!("grid value '{cell}' is not a number"),
            )
        })?;
        grid_points.push(v);
    }
    let grid = Grid::new(grid_points)?;
    let p = grid.len();

    let mut ids = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    for (idx, record) in records.enumerate() {
        let row_no = idx + 2;
        let record = record.map_err(|e| {
            RfplsError::parse(path_str.clone(), Some(format!("row {row_no}")), e.to_string())
        })?;
        if record.len() != p + 1 {
            return Err(RfplsError::parse(
                path_str,
                Some(format!("row {row_no}")),
                format!("expected {} fields, found {}", p + 1, record.len()),
            ));
        }
        ids.push(record.get(0).unwrap_or("").trim().to_string());
        for (j, cell) in record.iter().enumerate().skip(1) {
            let v: f64 = cell.trim().parse().map_err(|_| {
                RfplsError::parse(
                    path_str.clone(),
                    Some(format!("row {row_no}, column {}", j + 1)),
                    format!("curve value '{cell}' is not a number"),
                )
            })?;
            rows.push(v);
        }
    }
    if ids.is_empty() {
        return Err(RfplsError::parse(path_str, None, "no curve rows after the header"));
    }
    let values = Array2::from_shape_vec((ids.len(), p), rows)
        .expect("row-major layout from parser is consistent");
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "curves".into());
    Ok((FunctionalSample::new(grid, values, label)?, ids))
}

/// Writes a curve CSV in the format accepted by [`read_curves_csv`], printing
/// floats with 17 significant digits. `ids` may be empty, in which case rows
/// are numbered from 1.
pub fn write_curves_csv(path: &Path, sample: &FunctionalSample, ids: &[String]) -> Result<()> {
    write_curves_csv_annotated(path, sample, ids, "")
}

/// Like [`write_curves_csv`] but appends a whitespace-separated annotation to
/// the first header cell (readers ignore it); prediction bands record their
/// level and replicate count this way.
pub fn write_curves_csv_annotated(
    path: &Path,
    sample: &FunctionalSample,
    ids: &[String],
    annotation: &str,
) -> Result<()> {
    let path_str = path.display().to_string();
    if !ids.is_empty() && ids.len() != sample.n_curves() {
        return Err(RfplsError::dims(format!(
            "{} ids for {} curves",
            ids.len(),
            sample.n_curves()
        )));
    }
    let mut writer = csv::Writer::from_path(path).map_err(|e| RfplsError::Io {
        path: path_str.clone(),
        source: std::io::Error::other(e.to_string()),
    })?;
    let first_cell = if annotation.is_empty() {
        "grid".to_string()
    } else {
        format!("grid {annotation}")
    };
    let mut header = vec![first_cell];
    header.extend(sample.grid.points().iter().map(|v| format_float(*v)));
    writer
        .write_record(&header)
        .map_err(|e| RfplsError::Io {
            path: path_str.clone(),
            source: std::io::Error::other(e.to_string()),
        })?;
    for (i, row) in sample.values.rows().into_iter().enumerate() {
        let id = if ids.is_empty() {
            (i + 1).to_string()
        } else {
            ids[i].clone()
        };
        let mut record = vec![id];
        record.extend(row.iter().map(|v| format_float(*v)));
        writer.write_record(&record).map_err(|e| RfplsError::Io {
            path: path_str.clone(),
            source: std::io::Error::other(e.to_string()),
        })?;
    }
    writer.flush().map_err(|e| RfplsError::Io {
        path: path_str,
        source: e,
    })?;
    Ok(())
}
