//! Feature-level multi-view perception with 1D cost volumes.
//!
//! For a reference view, every view's horizon-depth points are moved into the
//! reference frame. Each point selects one reference column (by longitude)
//! and one depth plane (by its normalized distance). A view's features are
//! placed in the selected cells, and the cost of a cell is the per-channel
//! variance of the features of the views that reached it. The plane with the
//! lowest cost in a column gives the cost-volume depth.

use std::fmt::Write as _;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::exec::{map_range, Execution};
use crate::geometry::{d2l, CameraPose, HorizonDepth, LongitudeGrid, Point2, Points3D};
use crate::simulator::{mix_seed, render_depth, streams, RoomScene};

/// Per-view feature sequence, `channels × width`, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    channels: usize,
    width: usize,
    values: Vec<f64>,
    pub view: usize,
}

impl FeatureSequence {
    pub fn new(channels: usize, width: usize, values: Vec<f64>, view: usize) -> Result<Self> {
        if channels == 0 || values.len() != channels * width {
            return Err(invalid(format!(
                "feature grid of {} values does not match {channels} × {width}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("feature values must be finite"));
        }
        Ok(Self {
            channels,
            width,
            values,
            view,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, channel: usize, column: usize) -> f64 {
        self.values[channel * self.width + column]
    }

    pub fn column(&self, column: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.channels).map(move |c| self.get(c, column))
    }
}

/// Which coordinate of an aligned point selects its depth plane.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlaneMode {
    /// Floor-plane distance `√(x² + z²)`.
    #[default]
    Radial,
    /// Forward coordinate `max(z, 0)`.
    StrictZ,
}

/// `count` planes splitting normalized depth `[0, 1)`, with `d_max` meters mapping to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthPlanes {
    count: usize,
    d_max: f64,
    pub mode: PlaneMode,
}

impl DepthPlanes {
    pub const DEFAULT_COUNT: usize = 64;

    pub fn new(count: usize, d_max: f64) -> Result<Self> {
        if count < 2 {
            return Err(invalid(format!("need at least 2 depth planes, got {count}")));
        }
        if !(d_max.is_finite() && d_max > 0.0) {
            return Err(invalid(format!("dMax must be > 0, got {d_max}")));
        }
        Ok(Self {
            count,
            d_max,
            mode: PlaneMode::Radial,
        })
    }

    /// Default normalization: twice the largest room extent.
    pub fn for_scene(count: usize, scene: &RoomScene) -> Result<Self> {
        Self::new(count, 2.0 * scene.polygon.max_extent())
    }

    pub fn with_mode(mut self, mode: PlaneMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    /// Plane thickness in meters.
    pub fn plane_width(&self) -> f64 {
        self.d_max / self.count as f64
    }

    /// Metric distance of the center of plane `k`.
    pub fn center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) / self.count as f64 * self.d_max
    }

    /// Plane containing normalized coordinate `u`, if `0 ≤ u < 1`.
    pub fn plane_of(&self, u: f64) -> Option<usize> {
        if !(0.0..1.0).contains(&u) {
            return None;
        }
        Some(((u * self.count as f64).floor() as usize).min(self.count - 1))
    }

    /// Normalized plane coordinate of a reference-frame point (camera-height units).
    pub fn coordinate(&self, p: Point2, ref_height: f64) -> f64 {
        let d = match self.mode {
            PlaneMode::Radial => p[0].hypot(p[1]),
            PlaneMode::StrictZ => p[1].max(0.0),
        };
        d * ref_height / self.d_max
    }
}

/// Lifts every view's horizon depth into the reference view's frame.
///
/// Output points are normalized by the reference camera height and keep `y = 1`.
pub fn align_points(
    depths: &[HorizonDepth],
    poses: &[CameraPose],
    reference: usize,
    grid: &LongitudeGrid,
) -> Result<Vec<Points3D>> {
    if depths.len() != poses.len() {
        return Err(invalid("depth and pose counts differ"));
    }
    let Some(ref_pose) = poses.get(reference) else {
        return Err(invalid(format!("unknown reference view {reference}")));
    };
    let h_ref = ref_pose.height();
    depths
        .iter()
        .zip(poses)
        .enumerate()
        .map(|(v, (d, pose))| {
            let s = d2l(d, pose, grid)?;
            let points = s
                .points
                .iter()
                .map(|&p| {
                    if v == reference {
                        [p[0] / h_ref, 1.0, p[1] / h_ref]
                    } else {
                        let q = ref_pose.to_view(pose.to_world(p));
                        [q[0] / h_ref, 1.0, q[1] / h_ref]
                    }
                })
                .collect();
            Ok(Points3D {
                points,
                valid: s.valid,
            })
        })
        .collect()
}

/// Variance cost volume for one reference view, `channels × width × planes`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVolume {
    channels: usize,
    width: usize,
    planes: usize,
    ref_height: f64,
    values: Vec<f64>,
    contributors: Vec<u32>,
}

impl CostVolume {
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn planes(&self) -> usize {
        self.planes
    }

    pub fn ref_height(&self) -> f64 {
        self.ref_height
    }

    /// Cost of one channel; `+∞` where no view contributed.
    pub fn cost(&self, channel: usize, column: usize, plane: usize) -> f64 {
        self.values[(channel * self.width + column) * self.planes + plane]
    }

    /// Number of views that reached cell `(column, plane)`.
    pub fn contributors(&self, column: usize, plane: usize) -> usize {
        self.contributors[column * self.planes + plane] as usize
    }

    pub fn is_supported(&self, column: usize, plane: usize) -> bool {
        self.contributors(column, plane) > 0
    }

    /// Channel-mean cost of a cell.
    pub fn reduced_cost(&self, column: usize, plane: usize) -> f64 {
        if !self.is_supported(column, plane) {
            return f64::INFINITY;
        }
        (0..self.channels).map(|c| self.cost(c, column, plane)).sum::<f64>() / self.channels as f64
    }

    /// Most views reaching any cell of `column`.
    pub fn column_support(&self, column: usize) -> usize {
        (0..self.planes).map(|k| self.contributors(column, k)).max().unwrap_or(0)
    }

    /// Lowest-cost plane of a column, restricted to the best-supported cells
    /// (multi-view cells when any exist). Ties go to the lower index.
    pub fn argmin(&self, column: usize) -> Option<(usize, f64)> {
        let need = if self.column_support(column) >= 2 { 2 } else { 1 };
        let mut best: Option<(usize, f64)> = None;
        for k in 0..self.planes {
            if self.contributors(column, k) < need {
                continue;
            }
            let c = self.reduced_cost(column, k);
            if best.is_none_or(|(_, b)| c < b) {
                best = Some((k, c));
            }
        }
        best
    }

    /// CSV summary: `column,argmin_plane,min_cost,support`.
    ///
    /// Columns without any contributor report plane `-1` and cost `inf`.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("column,argmin_plane,min_cost,support\n");
        for i in 0..self.width {
            match self.argmin(i) {
                Some((k, c)) => {
                    let _ = writeln!(out, "{i},{k},{c:.6},{}", self.contributors(i, k));
                }
                None => {
                    let _ = writeln!(out, "{i},-1,inf,0");
                }
            }
        }
        out
    }
}

/// Builds the variance cost volume of a reference view.
///
/// `aligned[v]` are view `v`'s points in the reference frame (see
/// [`align_points`]); `ref_height` is the reference camera height in meters.
/// When several columns of one view land in the same cell their features are
/// averaged first, so each view contributes one vector per cell. A cell's cost
/// is the population variance over the contributing views.
pub fn build_cost_volume(
    features: &[FeatureSequence],
    aligned: &[Points3D],
    planes: &DepthPlanes,
    grid: &LongitudeGrid,
    ref_height: f64,
) -> Result<CostVolume> {
    build_cost_volume_with(features, aligned, planes, grid, ref_height, Execution::default())
}

pub fn build_cost_volume_with(
    features: &[FeatureSequence],
    aligned: &[Points3D],
    planes: &DepthPlanes,
    grid: &LongitudeGrid,
    ref_height: f64,
    exec: Execution,
) -> Result<CostVolume> {
    if features.len() < 2 || aligned.len() != features.len() {
        return Err(invalid(format!(
            "cost volume needs ≥ 2 views with features and points, got {} and {}",
            features.len(),
            aligned.len()
        )));
    }
    let w = grid.width();
    let channels = features[0].channels();
    for (f, a) in features.iter().zip(aligned) {
        grid.check_width(f.width(), "feature sequence")?;
        grid.check_width(a.width(), "aligned points")?;
        if f.channels() != channels {
            return Err(invalid("all views must have the same channel count"));
        }
    }
    if !(ref_height > 0.0) {
        return Err(invalid("reference height must be > 0"));
    }

    // (plane, view, source column) entries grouped by reference column
    let mut by_column: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); w];
    for (v, pts) in aligned.iter().enumerate() {
        for (src, p) in pts.iter_valid() {
            let q = [p[0], p[2]];
            if !(q[0].is_finite() && q[1].is_finite()) || (q[0] == 0.0 && q[1] == 0.0) {
                continue;
            }
            if let Some(k) = planes.plane_of(planes.coordinate(q, ref_height)) {
                by_column[grid.column_of_point(q)].push((k, v, src));
            }
        }
    }

    let d = planes.count();
    let columns = map_range(exec, w, |j| {
        let mut entries = by_column[j].clone();
        entries.sort_unstable();
        let mut cost = vec![f64::INFINITY; channels * d];
        let mut count = vec![0u32; d];
        let mut means: Vec<Vec<f64>> = Vec::new();
        let mut start = 0;
        while start < entries.len() {
            let k = entries[start].0;
            let mut end = start;
            while end < entries.len() && entries[end].0 == k {
                end += 1;
            }
            // per-view mean feature within the cell
            means.clear();
            let mut s = start;
            while s < end {
                let v = entries[s].1;
                let mut e = s;
                let mut acc = vec![0.0; channels];
                while e < end && entries[e].1 == v {
                    for (c, a) in acc.iter_mut().enumerate() {
                        *a += features[v].get(c, entries[e].2);
                    }
                    e += 1;
                }
                let n = (e - s) as f64;
                means.push(acc.into_iter().map(|a| a / n).collect());
                s = e;
            }
            let nv = means.len() as f64;
            for c in 0..channels {
                if means.iter().all(|m| m[c] == means[0][c]) {
                    // the rounded mean of equal values can differ from them
                    cost[c * d + k] = 0.0;
                    continue;
                }
                let mean = means.iter().map(|m| m[c]).sum::<f64>() / nv;
                let var = means.iter().map(|m| (m[c] - mean).powi(2)).sum::<f64>() / nv;
                cost[c * d + k] = var;
            }
            count[k] = means.len() as u32;
            start = end;
        }
        (cost, count)
    });

    let mut values = vec![f64::INFINITY; channels * w * d];
    let mut contributors = vec![0u32; w * d];
    for (j, (cost, count)) in columns.into_iter().enumerate() {
        for c in 0..channels {
            let dst = (c * w + j) * d;
            values[dst..dst + d].copy_from_slice(&cost[c * d..(c + 1) * d]);
        }
        contributors[j * d..(j + 1) * d].copy_from_slice(&count);
    }
    Ok(CostVolume {
        channels,
        width: w,
        planes: d,
        ref_height,
        values,
        contributors,
    })
}

/// Argmin depth per column, normalized by the reference camera height.
pub fn extract_depth(c: &CostVolume, planes: &DepthPlanes) -> Result<HorizonDepth> {
    if planes.count() != c.planes() {
        return Err(invalid("plane count does not match the cost volume"));
    }
    let mut depths = vec![0.0; c.width()];
    let mut valid = vec![false; c.width()];
    for i in 0..c.width() {
        if let Some((k, _)) = c.argmin(i) {
            depths[i] = planes.center(k) / c.ref_height();
            valid[i] = true;
        }
    }
    HorizonDepth::new(depths, valid)
}

/// Convex combination `alpha·d_cost + (1 − alpha)·d`, falling back to whichever side is valid.
pub fn fuse_depth(d_cost: &HorizonDepth, d: &HorizonDepth, alpha: f64) -> Result<HorizonDepth> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    fuse_depth_weighted(d_cost, d, &vec![alpha; d.width()])
}

/// Per-column fusion weights on the cost-volume depth.
pub fn fuse_depth_weighted(d_cost: &HorizonDepth, d: &HorizonDepth, alpha: &[f64]) -> Result<HorizonDepth> {
    if d_cost.width() != d.width() || alpha.len() != d.width() {
        return Err(invalid("fusion inputs differ in width"));
    }
    if let Some(a) = alpha.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(invalid(format!("alpha must lie in [0, 1], got {a}")));
    }
    let mut depths = vec![0.0; d.width()];
    let mut valid = vec![false; d.width()];
    for i in 0..d.width() {
        let v = match (d_cost.get(i), d.get(i)) {
            (Some(c), Some(p)) => Some(alpha[i] * c + (1.0 - alpha[i]) * p),
            (Some(c), None) => Some(c),
            (None, Some(p)) => Some(p),
            (None, None) => None,
        };
        if let Some(v) = v {
            depths[i] = v;
            valid[i] = true;
        }
    }
    HorizonDepth::new(depths, valid)
}

/// Confidence weights `s / (s + 1)` from per-column view support.
pub fn confidence_weights(c: &CostVolume) -> Vec<f64> {
    (0..c.width())
        .map(|i| {
            let s = c.argmin(i).map(|(k, _)| c.contributors(i, k)).unwrap_or(0) as f64;
            s / (s + 1.0)
        })
        .collect()
}

/// How synthetic features are produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum FeatureMode {
    /// Smooth functions of the world point each column sees.
    Geometric,
    /// Geometric features plus i.i.d. Gaussian noise per view.
    Random { sigma: f64 },
}

/// Channel `c` of the synthetic feature field at world point `q` (meters).
pub fn feature_field(c: usize, q: Point2) -> f64 {
    let k = c as f64;
    let fx = 0.9 + 0.37 * k;
    let fz = 1.3 - 0.21 * k;
    let phase = 0.7 * k;
    (fx * q[0] + fz * q[1] + phase).sin() + 0.5 * (0.5 * fz * q[0] - 0.8 * fx * q[1]).cos()
}

/// Stand-in backbone features for every view of a scene.
pub fn synth_features(
    scene: &RoomScene,
    grid: &LongitudeGrid,
    channels: usize,
    mode: FeatureMode,
    seed: u64,
) -> Result<Vec<FeatureSequence>> {
    if channels == 0 {
        return Err(invalid("need at least one feature channel"));
    }
    let w = grid.width();
    scene
        .poses
        .iter()
        .enumerate()
        .map(|(v, pose)| {
            let d = render_depth(&scene.polygon, pose, grid)?;
            let s = d2l(&d, pose, grid)?;
            let world: Vec<Point2> = s.points.iter().map(|&p| pose.to_world(p)).collect();
            let mut values = Vec::with_capacity(channels * w);
            for c in 0..channels {
                values.extend(world.iter().map(|&q| feature_field(c, q)));
            }
            if let FeatureMode::Random { sigma } = mode {
                let normal = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
                let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(mix_seed(
                    seed,
                    streams::FEATURES,
                    v as u64,
                ));
                for x in &mut values {
                    *x += normal.sample(&mut rng);
                }
            }
            FeatureSequence::new(channels, w, values, v)
        })
        .collect()
}
