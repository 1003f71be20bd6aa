use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Paired features and multivariate targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Matrix,
    pub targets: Matrix,
    pub feature_names: Vec<String>,
    pub target_names: Vec<String>,
    /// Where the rows came from, e.g. `"data.csv/calib"`. Used to detect
    /// a score function calibrated on its own fitting data.
    pub origin: String,
}

impl Dataset {
    pub fn new(features: Matrix, targets: Matrix, origin: impl Into<String>) -> Result<Self> {
        let feature_names = (0..features.ncols()).map(|i| format!("x{i}")).collect();
        let target_names = (0..targets.ncols()).map(|i| format!("y{i}")).collect();
        Self::with_names(features, targets, feature_names, target_names, origin)
    }

    pub fn with_names(
        features: Matrix,
        targets: Matrix,
        feature_names: Vec<String>,
        target_names: Vec<String>,
        origin: impl Into<String>,
    ) -> Result<Self> {
        if features.nrows() != targets.nrows() {
            return Err(Error::Dimension(format!(
                "{} feature rows but {} target rows",
                features.nrows(),
                targets.nrows()
            )));
        }
        if features.nrows() == 0 || features.ncols() == 0 || targets.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "dataset needs n, p, d >= 1 (got n={}, p={}, d={})",
                features.nrows(),
                features.ncols(),
                targets.ncols()
            )));
        }
        if feature_names.len() != features.ncols() || target_names.len() != targets.ncols() {
            return Err(Error::Dimension("column names do not match matrix widths".into()));
        }
        if !features.is_finite() || !targets.is_finite() {
            return Err(Error::Param("dataset contains non-finite values".into()));
        }
        Ok(Self {
            features,
            targets,
            feature_names,
            target_names,
            origin: origin.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_targets(&self) -> usize {
        self.targets.ncols()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn y(&self, i: usize) -> &[f64] {
        self.targets.row(i)
    }

    /// Rows `idx` as a new dataset tagged with `origin`. Panics on an empty index set.
    pub fn subset(&self, idx: &[usize], origin: impl Into<String>) -> Self {
        Self {
            features: self.features.select_rows(idx),
            targets: self.targets.select_rows(idx),
            feature_names: self.feature_names.clone(),
            target_names: self.target_names.clone(),
            origin: origin.into(),
        }
    }
}

/// Reads a CSV with a header row whose trailing `d_out` columns are targets.
pub fn load_dataset_csv(path: impl AsRef<Path>, d_out: usize) -> Result<Dataset> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    if d_out == 0 {
        return Err(Error::Param("d_out must be positive".into()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(File::open(path)?);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let ncols = header.len();
    if ncols <= d_out {
        return Err(Error::Dimension(format!(
            "{ncols} columns cannot hold {d_out} targets and at least one feature"
        )));
    }
    let p = ncols - d_out;
    let mut feats = Vec::new();
    let mut targs = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != ncols {
            return Err(Error::Parse {
                row,
                col: rec.len().min(ncols),
                msg: format!("expected {ncols} fields, found {}", rec.len()),
            });
        }
        for (col, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                col,
                msg: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    col,
                    msg: format!("non-finite value {cell:?}"),
                });
            }
            if col < p {
                feats.push(v);
            } else {
                targs.push(v);
            }
        }
    }
    let n = feats.len() / p;
    Dataset::with_names(
        Matrix::from_vec(n, p, feats)?,
        Matrix::from_vec(n, d_out, targs)?,
        header[..p].to_vec(),
        header[p..].to_vec(),
        path.display().to_string(),
    )
}

/// Writes features followed by targets, with a header row.
pub fn write_dataset_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ds.feature_names.iter().chain(&ds.target_names))?;
    for i in 0..ds.len() {
        // `{:?}` prints the shortest representation that parses back exactly
        let rec: Vec<String> = ds.x(i).iter().chain(ds.y(i)).map(|v| format!("{v:?}")).collect();
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_shape() {
        let f = write_tmp("a,b,c\n1,2,3\n4,5,6\n7,8,9\n1,1,1\n0,0,0\n");
        let ds = load_dataset_csv(f.path(), 2).unwrap();
        assert_eq!((ds.len(), ds.n_features(), ds.n_targets()), (5, 1, 2));
        assert_eq!(ds.target_names, vec!["b", "c"]);
        assert_eq!(ds.y(1), &[5.0, 6.0]);
    }

    #[test]
    fn nan_cell_reports_row() {
        let f = write_tmp("a,b,c\n1,2,3\n4,NaN,6\n");
        match load_dataset_csv(f.path(), 2) {
            Err(Error::Parse { row, col, .. }) => assert_eq!((row, col), (1, 1)),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn text_cell_rejected() {
        let f = write_tmp("a,b\n1,2\nfoo,3\n");
        assert!(matches!(load_dataset_csv(f.path(), 1), Err(Error::Parse { row: 1, col: 0, .. })));
    }

    #[test]
    fn too_few_columns() {
        let f = write_tmp("a,b\n1,2\n");
        assert!(matches!(load_dataset_csv(f.path(), 2), Err(Error::Dimension(_))));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_dataset_csv("/definitely/not/here.csv", 1),
            Err(Error::FileNotFound(_))
        ));
    }

    #[test]
    fn round_trip() {
        let feats = Matrix::from_rows(&[[0.1, 1e-300], [std::f64::consts::PI, -2.5]]).unwrap();
        let targs = Matrix::from_rows(&[[1.0 / 3.0], [-7e12]]).unwrap();
        let ds = Dataset::new(feats, targs, "mem").unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_dataset_csv(&ds, f.path()).unwrap();
        let back = load_dataset_csv(f.path(), 1).unwrap();
        for (a, b) in ds.features.as_slice().iter().zip(back.features.as_slice()) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        for (a, b) in ds.targets.as_slice().iter().zip(back.targets.as_slice()) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}
