use std::path::Path;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use super::calibrate::CalibratedPredictor;
use super::score::ScoreModel;
use crate::error::{Error, Result};

/// Closed polygon outlining a two-dimensional prediction region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region2D {
    pub center: Vec<f64>,
    pub alpha: f64,
    /// First vertex repeated at the end.
    pub contour: Vec<[f64; 2]>,
    pub method: String,
    /// Set when the pulled-back vertices were not already in angular order,
    /// i.e. the outline may self-intersect.
    pub reordered: bool,
}

impl Region2D {
    /// Shoelace area of the polygon.
    pub fn area(&self) -> f64 {
        polygon_area(&self.contour)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["y0", "y1"])?;
        for v in &self.contour {
            w.write_record([format!("{:?}", v[0]), format!("{:?}", v[1])])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv_vertices(path: impl AsRef<Path>) -> Result<Vec<[f64; 2]>> {
        let mut r = csv::Reader::from_path(path)?;
        let mut out = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |col: usize| -> Result<f64> {
                rec.get(col)
                    .and_then(|c| c.trim().parse().ok())
                    .ok_or_else(|| Error::Parse {
                        row,
                        col,
                        msg: "expected a number".into(),
                    })
            };
            out.push([parse(0)?, parse(1)?]);
        }
        Ok(out)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

pub fn polygon_area(v: &[[f64; 2]]) -> f64 {
    let mut a = 0.0;
    for w in v.windows(2) {
        a += w[0][0] * w[1][1] - w[1][0] * w[0][1];
    }
    0.5 * a.abs()
}

fn ellipse(center: &[f64], shape: Matrix2<f64>, radius: f64, n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let p = shape * nalgebra::Vector2::new(radius * t.cos(), radius * t.sin());
            [center[0] + p[0], center[1] + p[1]]
        })
        .collect()
}

fn close(mut v: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    if let Some(&first) = v.first() {
        v.push(first);
    }
    v
}

/// Outline of the prediction region at `x` for a two-dimensional response.
///
/// OT-CP regions are obtained by pulling the sphere of radius `r` back
/// through the inverse entropic map and shifting by `y_hat(x)`. Baselines
/// have analytic shapes: a disc (L2), an ellipse (Mahalanobis) or a box (M-CP).
pub fn region_contour_2d(pred: &CalibratedPredictor, x: &[f64], n_angles: usize) -> Result<Region2D> {
    if pred.score_fn.n_targets() != 2 {
        return Err(Error::Dimension(format!(
            "contours need a 2-d response, predictor has d={}",
            pred.score_fn.n_targets()
        )));
    }
    if pred.interval.is_some() {
        return Err(Error::Method("contours are defined for threshold predictors only".into()));
    }
    let n = n_angles.max(8);
    let r = pred.threshold;
    let method = pred.score_fn.kind().name().to_owned();
    let mut reordered = false;
    let vertices = match &pred.score_fn.model {
        ScoreModel::MergeL2 { regressor } => {
            finite_radius(r)?;
            ellipse(&regressor.predict(x)?, Matrix2::identity(), r, n)
        }
        ScoreModel::MergeMahalanobis { regressor, whitener } => {
            finite_radius(r)?;
            let w = Matrix2::new(whitener.get(0, 0), whitener.get(0, 1), whitener.get(1, 0), whitener.get(1, 1));
            let shape = w
                .try_inverse()
                .ok_or_else(|| Error::Singular(w.determinant()))?;
            ellipse(&regressor.predict(x)?, shape, r, n)
        }
        ScoreModel::McpMax { quantiles } => {
            finite_radius(r)?;
            let (lo, hi) = quantiles.predict_bounds(x)?;
            let (x0, x1, y0, y1) = (lo[0] - r, hi[0] + r, lo[1] - r, hi[1] + r);
            if x0 > x1 || y0 > y1 {
                return Err(Error::Method(format!("empty M-CP region at threshold {r}")));
            }
            let (xm, ym) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
            vec![[x0, y0], [xm, y0], [x1, y0], [x1, ym], [x1, y1], [xm, y1], [x0, y1], [x0, ym]]
        }
        ScoreModel::Otcp { regressor, map } => {
            // ranks never exceed 1, so any threshold >= 1 admits everything;
            // the unit sphere is then the outermost meaningful shell
            let radius = r.min(1.0);
            let center = regressor.predict(x)?;
            let mut pts = Vec::with_capacity(n);
            for k in 0..n {
                let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                let z = map.inverse(&[radius * t.cos(), radius * t.sin()])?;
                pts.push([center[0] + z[0], center[1] + z[1]]);
            }
            let (sorted, changed) = angular_sort(pts);
            if changed {
                log::warn!("otcp contour at x={x:?} is not star-shaped in shell order");
            }
            reordered = changed;
            sorted
        }
        ScoreModel::AbsUnivariate { .. } => {
            return Err(Error::Method("abs_univariate has no 2-d region".into()));
        }
    };
    if vertices.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
        return Err(Error::Param("contour has non-finite vertices".into()));
    }
    Ok(Region2D {
        center: x.to_vec(),
        alpha: pred.alpha,
        contour: close(vertices),
        method,
        reordered,
    })
}

fn finite_radius(r: f64) -> Result<()> {
    if r.is_finite() {
        Ok(())
    } else {
        Err(Error::Method("threshold is infinite: the region is the whole plane".into()))
    }
}

/// Sorts vertices by angle around their centroid; reports whether the order changed.
fn angular_sort(pts: Vec<[f64; 2]>) -> (Vec<[f64; 2]>, bool) {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    let angle = |p: &[f64; 2]| (p[1] - cy).atan2(p[0] - cx);
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by(|&a, &b| angle(&pts[a]).total_cmp(&angle(&pts[b])).then(a.cmp(&b)));
    // the input is a cyclic sequence: it is in order if some rotation matches
    let start = idx.iter().position(|&i| i == 0).unwrap_or(0);
    let in_order = (0..idx.len()).all(|k| idx[(start + k) % idx.len()] == k);
    (idx.into_iter().map(|i| pts[i]).collect(), !in_order)
}
