//! Layout evaluation against ground truth: floor and volume IoU, depth
//! errors, corner error and pixel error.
//!
//! IoU areas come from scanline rasterization. Each of `resolution` rows over
//! the union bounding box contributes the exact length of its interior
//! intervals, so the error is bounded by the perimeter times the row height.

use pathfinding::kuhn_munkres::kuhn_munkres_min;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{project_column, BoundarySamples, HorizonDepth, LongitudeGrid, Point2, RatioValue};
use crate::polygon::{area, bounds, distance_to_segment, intersection_length, scanline_intervals, total_length};

pub const DEFAULT_RESOLUTION: usize = 512;
pub const DEFAULT_CORNER_TOLERANCE: f64 = 0.05;
pub const DEFAULT_DELTA: f64 = 1.25;

fn check_polygon(poly: &[Point2], what: &str) -> Result<()> {
    if poly.len() < 3 {
        return Err(invalid(format!("{what} polygon has {} vertices", poly.len())));
    }
    if poly.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
        return Err(invalid(format!("{what} polygon has non-finite vertices")));
    }
    if area(poly) < 1e-12 {
        return Err(invalid(format!("{what} polygon has zero area")));
    }
    Ok(())
}

/// Rasterized `(intersection, union)` areas of two polygons.
pub fn overlap_areas(a: &[Point2], b: &[Point2], resolution: usize) -> Result<(f64, f64)> {
    check_polygon(a, "first")?;
    check_polygon(b, "second")?;
    if resolution == 0 {
        return Err(invalid("resolution must be positive"));
    }
    let (lo_a, hi_a) = bounds(a);
    let (lo_b, hi_b) = bounds(b);
    let lo = lo_a[1].min(lo_b[1]);
    let hi = hi_a[1].max(hi_b[1]);
    let dy = (hi - lo) / resolution as f64;
    let (mut inter, mut union) = (0.0, 0.0);
    for row in 0..resolution {
        let y = lo + (row as f64 + 0.5) * dy;
        let ia = scanline_intervals(a, y);
        let ib = scanline_intervals(b, y);
        let i = intersection_length(&ia, &ib);
        inter += i;
        union += total_length(&ia) + total_length(&ib) - i;
    }
    Ok((inter * dy, union * dy))
}

/// Floor-shape IoU.
pub fn iou2d(pred: &[Point2], gt: &[Point2], resolution: usize) -> Result<f64> {
    let (i, u) = overlap_areas(pred, gt, resolution)?;
    Ok(if u > 0.0 { (i / u).clamp(0.0, 1.0) } else { 0.0 })
}

/// IoU of the two footprints extruded to their room heights.
pub fn iou3d(pred: &[Point2], pred_height: f64, gt: &[Point2], gt_height: f64, resolution: usize) -> Result<f64> {
    if !(pred_height > 0.0 && gt_height > 0.0) {
        return Err(invalid(format!("room heights must be > 0, got {pred_height} and {gt_height}")));
    }
    let (a, _) = overlap_areas(pred, gt, resolution)?;
    let inter = a * pred_height.min(gt_height);
    let union = area(pred) * pred_height + area(gt) * gt_height - inter;
    Ok((inter / union).clamp(0.0, 1.0))
}

fn shared_pairs(d: &HorizonDepth, d_hat: &HorizonDepth) -> Result<Vec<(f64, f64)>> {
    if d.width() != d_hat.width() {
        return Err(invalid(format!("widths differ: {} vs {}", d.width(), d_hat.width())));
    }
    let pairs: Vec<(f64, f64)> = (0..d.width())
        .filter_map(|i| Some((d.get(i)?, d_hat.get(i)?)))
        .collect();
    if pairs.is_empty() {
        return Err(invalid("no column is valid in both sequences"));
    }
    Ok(pairs)
}

pub fn rmse(d: &HorizonDepth, d_hat: &HorizonDepth) -> Result<f64> {
    let pairs = shared_pairs(d, d_hat)?;
    let mse = pairs.iter().map(|(a, b)| (a - b).powi(2)).sum::<f64>() / pairs.len() as f64;
    Ok(mse.sqrt())
}

/// Fraction of shared columns with `max(d/d̂, d̂/d) < threshold`.
pub fn delta_acc(d: &HorizonDepth, d_hat: &HorizonDepth, threshold: f64) -> Result<f64> {
    let pairs = shared_pairs(d, d_hat)?;
    let hits = pairs
        .iter()
        .filter(|(a, b)| (a / b).max(b / a) < threshold)
        .count();
    Ok(hits as f64 / pairs.len() as f64)
}

/// Boundary polygon of a depth sequence in the view frame, meters.
pub fn boundary_polygon(d: &HorizonDepth, camera_height: f64, grid: &LongitudeGrid) -> Result<Vec<Point2>> {
    grid.check_width(d.width(), "horizon depth")?;
    Ok(d
        .iter_valid()
        .map(|(i, v)| {
            let t = grid.angle(i);
            [camera_height * v * t.sin(), camera_height * v * t.cos()]
        })
        .collect())
}

/// A layout corner and the column of the sample it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corner {
    pub point: Point2,
    pub column: usize,
}

fn douglas_peucker(pts: &[Point2], first: usize, last: usize, tol: f64, keep: &mut [bool]) {
    let mut stack = vec![(first, last)];
    while let Some((a, b)) = stack.pop() {
        if b <= a + 1 {
            continue;
        }
        let (mut worst, mut dist) = (a, -1.0);
        for i in a + 1..b {
            let d = distance_to_segment(pts[i % pts.len()], pts[a % pts.len()], pts[b % pts.len()]);
            if d > dist {
                worst = i;
                dist = d;
            }
        }
        if dist > tol {
            keep[worst % pts.len()] = true;
            stack.push((a, worst));
            stack.push((worst, b));
        }
    }
}

/// Simplifies the closed boundary to its corners.
///
/// Douglas–Peucker runs on the two halves split at the first sample and the
/// sample farthest from it; a second pass drops kept vertices that lie within
/// `tolerance` of the line through their neighbours. `tolerance ≤ 0` keeps
/// every sample.
pub fn extract_corners(s: &BoundarySamples, tolerance: f64) -> Result<Vec<Corner>> {
    let samples: Vec<(usize, Point2)> = s.iter_valid().collect();
    if samples.len() < 8 {
        return Err(invalid(format!("need at least 8 valid samples, got {}", samples.len())));
    }
    let all = || samples.iter().map(|&(column, point)| Corner { point, column }).collect();
    if tolerance <= 0.0 {
        return Ok(all());
    }
    let pts: Vec<Point2> = samples.iter().map(|s| s.1).collect();
    let n = pts.len();
    let far = (1..n)
        .max_by(|&i, &j| {
            let di = (pts[i][0] - pts[0][0]).hypot(pts[i][1] - pts[0][1]);
            let dj = (pts[j][0] - pts[0][0]).hypot(pts[j][1] - pts[0][1]);
            di.total_cmp(&dj)
        })
        .unwrap_or(n / 2);
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[far] = true;
    douglas_peucker(&pts, 0, far, tolerance, &mut keep);
    douglas_peucker(&pts, far, n, tolerance, &mut keep);

    let mut idx: Vec<usize> = (0..n).filter(|&i| keep[i]).collect();
    while idx.len() > 3 {
        let m = idx.len();
        let (pos, dev) = (0..m)
            .map(|k| {
                let d = distance_to_segment(pts[idx[k]], pts[idx[(k + m - 1) % m]], pts[idx[(k + 1) % m]]);
                (k, d)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty");
        if dev >= tolerance {
            break;
        }
        idx.remove(pos);
    }
    Ok(idx
        .into_iter()
        .map(|i| Corner {
            point: samples[i].1,
            column: samples[i].0,
        })
        .collect())
}

/// Pixel coordinates `(u, v)` of a corner's floor and ceiling projections.
///
/// `p` is in the camera frame, normalized by camera height.
pub fn corner_pixels(p: Point2, image_w: usize, image_h: usize, r: RatioValue) -> Result<(Point2, Point2)> {
    let theta = p[0].atan2(p[1]);
    let u = (theta / std::f64::consts::TAU + 0.5) * image_w as f64;
    let rows = project_column(p[0].hypot(p[1]), r, image_h)?;
    Ok(([u, rows.floor], [u, rows.ceiling]))
}

fn pixel_distance(a: Point2, b: Point2, image_w: f64) -> f64 {
    let du = (a[0] - b[0]).abs().rem_euclid(image_w);
    du.min(image_w - du).hypot(a[1] - b[1])
}

/// Sum of optimally matched distances, one `penalty` per unmatched point.
pub fn matched_distance(pred: &[Point2], gt: &[Point2], image_w: f64, penalty: f64) -> f64 {
    let n = pred.len().max(gt.len());
    if n == 0 {
        return 0.0;
    }
    let cost = |i: usize, j: usize| {
        if i < pred.len() && j < gt.len() {
            pixel_distance(pred[i], gt[j], image_w)
        } else {
            penalty
        }
    };
    // the solver needs an ordered weight type: match on micro-pixels
    let fixed = Matrix::from_fn(n, n, |(i, j)| (cost(i, j) * 1e6).round() as i64);
    let (_, assignment) = kuhn_munkres_min(&fixed);
    assignment.iter().enumerate().map(|(i, &j)| cost(i, j)).sum()
}

/// Corner error as a fraction of the image diagonal.
///
/// Floor and ceiling projections are matched separately; every unmatched
/// corner costs one diagonal.
pub fn corner_error(
    pred: &[Point2],
    gt: &[Point2],
    image_w: usize,
    image_h: usize,
    r: RatioValue,
) -> Result<f64> {
    if pred.is_empty() || gt.is_empty() {
        return Err(invalid("corner lists must be non-empty"));
    }
    let project = |set: &[Point2]| -> Result<(Vec<Point2>, Vec<Point2>)> {
        let mut floor = Vec::with_capacity(set.len());
        let mut ceiling = Vec::with_capacity(set.len());
        for &p in set {
            let (f, c) = corner_pixels(p, image_w, image_h, r)?;
            floor.push(f);
            ceiling.push(c);
        }
        Ok((floor, ceiling))
    };
    let (pf, pc) = project(pred)?;
    let (gf, gc) = project(gt)?;
    let diag = (image_w as f64).hypot(image_h as f64);
    let w = image_w as f64;
    let total = matched_distance(&pf, &gf, w, diag) + matched_distance(&pc, &gc, w, diag);
    let terms = 2 * pred.len().max(gt.len());
    Ok(total / terms as f64 / diag)
}

/// Pixels of each class in a column: `(ceiling count, first floor row)`.
fn class_split(depth: f64, r: RatioValue, image_h: usize) -> Result<(i64, i64)> {
    let rows = project_column(depth, r, image_h)?;
    let h = image_h as i64;
    // pixel v is ceiling when v + 0.5 < ceiling row, floor when v + 0.5 > floor row
    let ceiling = ((rows.ceiling - 0.5).ceil() as i64).clamp(0, h);
    let first_floor = ((rows.floor - 0.5).floor() as i64 + 1).clamp(0, h);
    Ok((ceiling, first_floor.max(ceiling)))
}

/// Fraction of ceiling/wall/floor pixels that disagree, over columns valid in both.
pub fn pixel_error(
    d_pred: &HorizonDepth,
    r_pred: RatioValue,
    d_gt: &HorizonDepth,
    r_gt: RatioValue,
    image_h: usize,
) -> Result<f64> {
    if image_h == 0 {
        return Err(invalid("image height must be positive"));
    }
    let pairs = shared_pairs(d_pred, d_gt)?;
    let mut wrong = 0i64;
    for (p, g) in &pairs {
        let (cp, fp) = class_split(*p, r_pred, image_h)?;
        let (cg, fg) = class_split(*g, r_gt, image_h)?;
        wrong += (cp - cg).abs() + (fp - fg).abs();
    }
    Ok(wrong as f64 / (pairs.len() * image_h) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub resolution: usize,
    pub corner_tolerance: f64,
    pub image_height: usize,
    pub delta: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            resolution: DEFAULT_RESOLUTION,
            corner_tolerance: DEFAULT_CORNER_TOLERANCE,
            image_height: 512,
            delta: DEFAULT_DELTA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricReport {
    pub iou2d: f64,
    pub iou3d: f64,
    pub rmse: f64,
    pub delta1: f64,
    pub corner_error: f64,
    pub pixel_error: f64,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "scenario,view,iou2d,iou3d,rmse,delta1,ce,pe";

    pub fn csv_row(&self, scenario: &str, view: &str) -> String {
        format!(
            "{scenario},{view},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.iou2d, self.iou3d, self.rmse, self.delta1, self.corner_error, self.pixel_error
        )
    }

    /// Field-wise mean.
    pub fn mean(reports: &[MetricReport]) -> Option<MetricReport> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let avg = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        Some(MetricReport {
            iou2d: avg(|r| r.iou2d),
            iou3d: avg(|r| r.iou3d),
            rmse: avg(|r| r.rmse),
            delta1: avg(|r| r.delta1),
            corner_error: avg(|r| r.corner_error),
            pixel_error: avg(|r| r.pixel_error),
        })
    }
}

/// Scores a predicted view against ground truth seen from the same camera.
pub fn evaluate(
    pred: &HorizonDepth,
    r_pred: RatioValue,
    gt: &HorizonDepth,
    r_gt: RatioValue,
    camera_height: f64,
    grid: &LongitudeGrid,
    opts: &EvalOptions,
) -> Result<MetricReport> {
    let poly_p = boundary_polygon(pred, camera_height, grid)?;
    let poly_g = boundary_polygon(gt, camera_height, grid)?;
    let room = |r: RatioValue| camera_height * (1.0 + r.get());
    let samples = |d: &HorizonDepth| BoundarySamples {
        points: grid
            .angles()
            .iter()
            .zip(d.depths())
            .map(|(t, v)| [v * t.sin(), v * t.cos()])
            .collect(),
        valid: d.valid().to_vec(),
        frame: crate::geometry::Frame::View,
    };
    let tol = opts.corner_tolerance / camera_height;
    let corners = |d: &HorizonDepth| -> Result<Vec<Point2>> {
        Ok(extract_corners(&samples(d), tol)?.into_iter().map(|c| c.point).collect())
    };
    Ok(MetricReport {
        iou2d: iou2d(&poly_p, &poly_g, opts.resolution)?,
        iou3d: iou3d(&poly_p, room(r_pred), &poly_g, room(r_gt), opts.resolution)?,
        rmse: rmse(pred, gt)?,
        delta1: delta_acc(pred, gt, opts.delta)?,
        corner_error: corner_error(&corners(pred)?, &corners(gt)?, grid.width(), opts.image_height, r_gt)?,
        pixel_error: pixel_error(pred, r_pred, gt, r_gt, opts.image_height)?,
    })
}
