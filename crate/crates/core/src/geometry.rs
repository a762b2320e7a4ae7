//! Coordinate conventions and conversions for the horizon-depth representation.
//!
//! Conventions used throughout the crate:
//!
//! * The panorama is split into `W` longitude columns; column `i` looks along
//!   `θ_i = ((i + 0.5) / W − 0.5)·2π`.
//! * A column's floor-plane direction in the camera frame is `(sin θ, cos θ)`
//!   in `(x, z)` coordinates.
//! * 3D points are normalized by camera height with `y` pointing toward the
//!   floor, so floor points sit on `y = 1` and ceiling points on `y = −r`.
//! * Poses are gravity aligned: yaw `ψ`, planar translation and a metric
//!   camera height. View → world applies `Rot(ψ)·p + t` with
//!   `Rot(ψ) = [[cos ψ, sin ψ], [−sin ψ, cos ψ]]`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LayoutError, Result};
use crate::stats;

/// A planar point `(x, z)` in meters (or camera-height units where noted).
pub type Point2 = [f64; 2];
/// A 3D point `(x, y, z)` in camera-height units.
pub type Point3 = [f64; 3];

/// Uniform longitude sampling of an equirectangular panorama.
#[derive(Debug, Clone, PartialEq)]
pub struct LongitudeGrid {
    angles: Vec<f64>,
}

impl LongitudeGrid {
    pub const MIN_WIDTH: usize = 4;

    pub fn new(width: usize) -> Result<Self> {
        if width < Self::MIN_WIDTH {
            return Err(invalid(format!(
                "longitude grid needs at least {} columns, got {width}",
                Self::MIN_WIDTH
            )));
        }
        let w = width as f64;
        let angles = (0..width)
            .map(|i| ((i as f64 + 0.5) / w - 0.5) * TAU)
            .collect();
        Ok(Self { angles })
    }

    pub fn width(&self) -> usize {
        self.angles.len()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn angle(&self, column: usize) -> f64 {
        self.angles[column]
    }

    /// Angular spacing between adjacent columns.
    pub fn spacing(&self) -> f64 {
        TAU / self.width() as f64
    }

    /// Column whose half-open bin `[lo, hi)` contains `angle` (radians, any range).
    ///
    /// An angle on a bin boundary goes to the upper column, so straight ahead
    /// lands in column `W / 2`.
    pub fn column_of_angle(&self, angle: f64) -> usize {
        let w = self.width();
        let j = ((angle / TAU + 0.5) * w as f64).floor() as i64;
        j.rem_euclid(w as i64) as usize
    }

    /// Column seen along the floor-plane point `(x, z)` in the camera frame.
    pub fn column_of_point(&self, p: Point2) -> usize {
        self.column_of_angle(p[0].atan2(p[1]))
    }

    pub fn check_width(&self, width: usize, what: &str) -> Result<()> {
        if width != self.width() {
            return Err(invalid(format!(
                "{what} has width {width}, grid has {}",
                self.width()
            )));
        }
        Ok(())
    }
}

/// Coordinate frame tag of planar boundary samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    View,
    World,
}

/// Per-column wall distance normalized by camera height, plus a validity mask.
///
/// Invalid columns store `0.0` and must not be used as depths.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonDepth {
    depths: Vec<f64>,
    valid: Vec<bool>,
}

impl HorizonDepth {
    pub fn new(depths: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        if depths.len() != valid.len() {
            return Err(invalid(format!(
                "depths ({}) and valid mask ({}) differ in length",
                depths.len(),
                valid.len()
            )));
        }
        let mut depths = depths;
        for (i, (d, &ok)) in depths.iter_mut().zip(&valid).enumerate() {
            if ok {
                if !(d.is_finite() && *d > 0.0) {
                    return Err(invalid(format!("column {i}: valid depth {d} must be finite and > 0")));
                }
            } else {
                *d = 0.0;
            }
        }
        Ok(Self { depths, valid })
    }

    /// All columns valid.
    pub fn from_depths(depths: Vec<f64>) -> Result<Self> {
        let valid = vec![true; depths.len()];
        Self::new(depths, valid)
    }

    /// A sequence with every column invalid.
    pub fn all_invalid(width: usize) -> Self {
        Self {
            depths: vec![0.0; width],
            valid: vec![false; width],
        }
    }

    pub fn width(&self) -> usize {
        self.depths.len()
    }

    /// Raw storage; entries of invalid columns are `0.0`.
    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.valid[i]
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.valid[i].then(|| self.depths[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn all_valid(&self) -> bool {
        self.valid.iter().all(|&v| v)
    }

    /// `(column, depth)` for valid columns.
    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.depths
            .iter()
            .zip(&self.valid)
            .enumerate()
            .filter_map(|(i, (&d, &v))| v.then_some((i, d)))
    }

    /// Cyclic column shift: `out[i] = self[(i + k) mod W]`.
    ///
    /// Rotating a camera's yaw by `k` columns (`2πk/W`) shifts its horizon
    /// depth this way.
    pub fn shifted(&self, k: isize) -> Self {
        let w = self.width() as isize;
        let idx = |i: usize| (i as isize + k).rem_euclid(w) as usize;
        Self {
            depths: (0..self.width()).map(|i| self.depths[idx(i)]).collect(),
            valid: (0..self.width()).map(|i| self.valid[idx(i)]).collect(),
        }
    }

    /// Multiplies every valid depth by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            depths: self.depths.iter().map(|d| d * factor).collect(),
            valid: self.valid.clone(),
        }
    }

    pub fn to_record(&self) -> HorizonDepthRecord {
        HorizonDepthRecord {
            width: self.width(),
            depths: self.depths.clone(),
            valid: self.valid.clone(),
            frame: Frame::View,
            ratio: None,
        }
    }
}

/// JSON form of a horizon-depth sequence.
///
/// Field order is fixed: `width`, `depths`, `valid`, `frame`. The optional
/// trailing `ratio` is written only for per-view prediction files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonDepthRecord {
    pub width: usize,
    pub depths: Vec<f64>,
    pub valid: Vec<bool>,
    pub frame: Frame,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
}

impl TryFrom<HorizonDepthRecord> for HorizonDepth {
    type Error = LayoutError;

    fn try_from(r: HorizonDepthRecord) -> Result<Self> {
        if r.width != r.depths.len() {
            return Err(invalid(format!(
                "width {} does not match {} depths",
                r.width,
                r.depths.len()
            )));
        }
        if r.frame != Frame::View {
            return Err(invalid("horizon depth must be in the view frame"));
        }
        HorizonDepth::new(r.depths, r.valid)
    }
}

impl From<HorizonDepth> for HorizonDepthRecord {
    fn from(d: HorizonDepth) -> Self {
        d.to_record()
    }
}

impl Serialize for HorizonDepth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_record().serialize(s)
    }
}

impl<'de> Deserialize<'de> for HorizonDepth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = HorizonDepthRecord::deserialize(d)?;
        HorizonDepth::try_from(rec).map_err(serde::de::Error::custom)
    }
}

/// Ceiling-to-camera over camera-to-floor height ratio.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct RatioValue(f64);

impl RatioValue {
    pub fn new(r: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(invalid(format!("ratio must be finite and > 0, got {r}")));
        }
        Ok(Self(r))
    }

    /// Ratio for a room of height `room_height` seen from `camera_height`.
    pub fn from_heights(room_height: f64, camera_height: f64) -> Result<Self> {
        if !(camera_height > 0.0 && room_height > camera_height) {
            return Err(invalid(format!(
                "need 0 < camera height ({camera_height}) < room height ({room_height})"
            )));
        }
        Self::new((room_height - camera_height) / camera_height)
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for RatioValue {
    type Error = LayoutError;
    fn try_from(r: f64) -> Result<Self> {
        Self::new(r)
    }
}

impl From<RatioValue> for f64 {
    fn from(r: RatioValue) -> f64 {
        r.0
    }
}

/// Per-column planar boundary points in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySamples {
    pub points: Vec<Point2>,
    pub valid: Vec<bool>,
    pub frame: Frame,
}

impl BoundarySamples {
    pub fn width(&self) -> usize {
        self.points.len()
    }

    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, Point2)> + '_ {
        self.points
            .iter()
            .zip(&self.valid)
            .enumerate()
            .filter_map(|(i, (&p, &v))| v.then_some((i, p)))
    }

    pub fn valid_points(&self) -> Vec<Point2> {
        self.iter_valid().map(|(_, p)| p).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct BoundarySamplesRecord {
    width: usize,
    points: Vec<Point2>,
    valid: Vec<bool>,
    frame: Frame,
}

impl Serialize for BoundarySamples {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BoundarySamplesRecord {
            width: self.width(),
            points: self.points.clone(),
            valid: self.valid.clone(),
            frame: self.frame,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BoundarySamples {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = BoundarySamplesRecord::deserialize(d)?;
        if r.width != r.points.len() || r.width != r.valid.len() {
            return Err(serde::de::Error::custom("boundary sample lengths disagree with width"));
        }
        Ok(Self {
            points: r.points,
            valid: r.valid,
            frame: r.frame,
        })
    }
}

/// Per-column 3D points in camera-height units, camera at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Points3D {
    pub points: Vec<Point3>,
    pub valid: Vec<bool>,
}

impl Points3D {
    pub fn width(&self) -> usize {
        self.points.len()
    }

    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, Point3)> + '_ {
        self.points
            .iter()
            .zip(&self.valid)
            .enumerate()
            .filter_map(|(i, (&p, &v))| v.then_some((i, p)))
    }
}

/// Gravity-aligned camera pose: yaw, planar translation (meters) and height (meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRecord", into = "PoseRecord")]
pub struct CameraPose {
    yaw: f64,
    translation: Point2,
    height: f64,
}

#[derive(Serialize, Deserialize)]
struct PoseRecord {
    yaw: f64,
    t: Point2,
    h: f64,
}

impl TryFrom<PoseRecord> for CameraPose {
    type Error = LayoutError;
    fn try_from(r: PoseRecord) -> Result<Self> {
        CameraPose::new(r.yaw, r.t, r.h)
    }
}

impl From<CameraPose> for PoseRecord {
    fn from(p: CameraPose) -> Self {
        PoseRecord {
            yaw: p.yaw,
            t: p.translation,
            h: p.height,
        }
    }
}

/// Wraps an angle into `(−π, π]`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

impl CameraPose {
    pub fn new(yaw: f64, translation: Point2, height: f64) -> Result<Self> {
        if !(height.is_finite() && height > 0.0) {
            return Err(invalid(format!("camera height must be > 0, got {height}")));
        }
        if !(yaw.is_finite() && translation.iter().all(|v| v.is_finite())) {
            return Err(invalid("pose yaw and translation must be finite"));
        }
        Ok(Self {
            yaw: normalize_angle(yaw),
            translation,
            height,
        })
    }

    /// Origin, zero yaw, unit height.
    pub fn identity() -> Self {
        Self {
            yaw: 0.0,
            translation: [0.0, 0.0],
            height: 1.0,
        }
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn translation(&self) -> Point2 {
        self.translation
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn with_height(self, height: f64) -> Result<Self> {
        Self::new(self.yaw, self.translation, height)
    }

    pub fn with_yaw(self, yaw: f64) -> Self {
        Self {
            yaw: normalize_angle(yaw),
            ..self
        }
    }

    /// View frame → world frame.
    pub fn to_world(&self, p: Point2) -> Point2 {
        let (s, c) = self.yaw.sin_cos();
        [
            c * p[0] + s * p[1] + self.translation[0],
            -s * p[0] + c * p[1] + self.translation[1],
        ]
    }

    /// World frame → view frame.
    pub fn to_view(&self, p: Point2) -> Point2 {
        let (s, c) = self.yaw.sin_cos();
        let x = p[0] - self.translation[0];
        let z = p[1] - self.translation[1];
        [c * x - s * z, s * x + c * z]
    }

    /// World-frame unit direction of a view-frame longitude.
    pub fn world_direction(&self, theta: f64) -> Point2 {
        let a = theta + self.yaw;
        [a.sin(), a.cos()]
    }

    /// Planar inverse: maps world points back into this view.
    ///
    /// The returned pose satisfies `inv.to_world(p) == self.to_view(p)`.
    pub fn inverse(&self) -> Self {
        let t = self.to_view([0.0, 0.0]);
        Self {
            yaw: normalize_angle(-self.yaw),
            translation: t,
            height: self.height,
        }
    }

    /// `self ∘ other`: first `other.to_world`, then `self.to_world`. Height is taken from `other`.
    pub fn compose(&self, other: &CameraPose) -> Self {
        Self {
            yaw: normalize_angle(self.yaw + other.yaw),
            translation: self.to_world(other.translation),
            height: other.height,
        }
    }
}

/// Direction of a planar frame change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToWorld,
    ToView,
}

/// How several depth candidates falling into one column bin are reduced.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinAggregation {
    #[default]
    Median,
    /// Smallest depth, i.e. the visible surface.
    Nearest,
}

impl BinAggregation {
    pub fn reduce(self, candidates: &[f64]) -> Option<f64> {
        if candidates.is_empty() {
            return None;
        }
        match self {
            BinAggregation::Median => stats::median(candidates),
            BinAggregation::Nearest => candidates.iter().copied().reduce(f64::min),
        }
    }
}

/// Lifts horizon depth onto the floor plane `y = 1`.
pub fn depth_to_points(d: &HorizonDepth, grid: &LongitudeGrid) -> Result<Points3D> {
    grid.check_width(d.width(), "horizon depth")?;
    let points = grid
        .angles()
        .iter()
        .zip(d.depths())
        .zip(d.valid())
        .map(|((&t, &depth), &v)| {
            if v {
                [depth * t.sin(), 1.0, depth * t.cos()]
            } else {
                [0.0, 1.0, 0.0]
            }
        })
        .collect();
    Ok(Points3D {
        points,
        valid: d.valid().to_vec(),
    })
}

/// Moves floor points to the ceiling plane `y = −r`, keeping `x` and `z`.
pub fn ceiling_points(p: &Points3D, r: RatioValue) -> Result<Points3D> {
    if let Some((i, q)) = p.iter_valid().find(|(_, q)| q[1] != 1.0) {
        return Err(invalid(format!("column {i} is not a floor point (y = {})", q[1])));
    }
    let points = p.points.iter().map(|q| [q[0], -r.get(), q[2]]).collect();
    Ok(Points3D {
        points,
        valid: p.valid.clone(),
    })
}

/// Depth-to-layout: metric floor-plane boundary points in the view frame.
pub fn d2l(d: &HorizonDepth, pose: &CameraPose, grid: &LongitudeGrid) -> Result<BoundarySamples> {
    grid.check_width(d.width(), "horizon depth")?;
    let h = pose.height();
    let points = grid
        .angles()
        .iter()
        .zip(d.depths())
        .map(|(&t, &depth)| [h * depth * t.sin(), h * depth * t.cos()])
        .collect();
    Ok(BoundarySamples {
        points,
        valid: d.valid().to_vec(),
        frame: Frame::View,
    })
}

/// Moves boundary samples between the view frame of `pose` and the world frame.
pub fn transform_samples(
    s: &BoundarySamples,
    pose: &CameraPose,
    direction: Direction,
) -> Result<BoundarySamples> {
    let (expected, target) = match direction {
        Direction::ToWorld => (Frame::View, Frame::World),
        Direction::ToView => (Frame::World, Frame::View),
    };
    if s.frame != expected {
        return Err(invalid(format!(
            "samples are in the {:?} frame, cannot apply {direction:?}",
            s.frame
        )));
    }
    let points = s
        .points
        .iter()
        .map(|&p| match direction {
            Direction::ToWorld => pose.to_world(p),
            Direction::ToView => pose.to_view(p),
        })
        .collect();
    Ok(BoundarySamples {
        points,
        valid: s.valid.clone(),
        frame: target,
    })
}

/// Bins view-frame metric points into grid columns, collecting normalized depth candidates.
///
/// Points at the camera center or with non-finite coordinates are ignored.
pub fn bin_candidates<I>(points: I, camera_height: f64, grid: &LongitudeGrid) -> Vec<Vec<f64>>
where
    I: IntoIterator<Item = Point2>,
{
    let mut bins = vec![Vec::new(); grid.width()];
    for p in points {
        if !(p[0].is_finite() && p[1].is_finite()) {
            continue;
        }
        let r = p[0].hypot(p[1]);
        if r <= 0.0 {
            continue;
        }
        bins[grid.column_of_point(p)].push(r / camera_height);
    }
    bins
}

/// Layout-to-depth: re-bins view-frame boundary points into horizon depth.
///
/// Columns that receive no point are invalid.
pub fn l2d(
    s: &BoundarySamples,
    pose: &CameraPose,
    grid: &LongitudeGrid,
    agg: BinAggregation,
) -> Result<HorizonDepth> {
    if s.frame != Frame::View {
        return Err(invalid("l2d expects view-frame samples"));
    }
    let bins = bin_candidates(s.iter_valid().map(|(_, p)| p), pose.height(), grid);
    let mut depths = vec![0.0; grid.width()];
    let mut valid = vec![false; grid.width()];
    for (j, b) in bins.iter().enumerate() {
        if let Some(v) = agg.reduce(b) {
            depths[j] = v;
            valid[j] = true;
        }
    }
    HorizonDepth::new(depths, valid)
}

/// Floor and ceiling boundary rows of one panorama column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageRows {
    pub floor: f64,
    pub ceiling: f64,
}

impl ImageRows {
    pub fn horizon(image_height: usize) -> f64 {
        0.5 * image_height as f64
    }
}

/// Image rows of the floor and ceiling boundary for one column.
///
/// Rows grow downward; row 0 is the zenith.
pub fn project_column(depth: f64, r: RatioValue, image_height: usize) -> Result<ImageRows> {
    if !(depth.is_finite() && depth > 0.0) {
        return Err(LayoutError::NumericDomain(format!(
            "cannot project non-positive depth {depth}"
        )));
    }
    let h = image_height as f64;
    let lat_floor = -(1.0 / depth).atan();
    let lat_ceil = (r.get() / depth).atan();
    Ok(ImageRows {
        floor: (0.5 - lat_floor / PI) * h,
        ceiling: (0.5 - lat_ceil / PI) * h,
    })
}

/// Projects every valid column; invalid columns yield `None`.
pub fn project_to_image(
    d: &HorizonDepth,
    r: RatioValue,
    image_height: usize,
) -> Result<Vec<Option<ImageRows>>> {
    if image_height == 0 {
        return Err(invalid("image height must be positive"));
    }
    (0..d.width())
        .map(|i| d.get(i).map(|v| project_column(v, r, image_height)).transpose())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pose(yaw: f64, t: Point2, h: f64) -> CameraPose {
        CameraPose::new(yaw, t, h).unwrap()
    }

    #[test]
    fn grid_of_four() {
        let g = LongitudeGrid::new(4).unwrap();
        let expected = [-0.75 * PI, -0.25 * PI, 0.25 * PI, 0.75 * PI];
        for (a, e) in g.angles().iter().zip(expected) {
            assert_relative_eq!(*a, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn grid_center_column() {
        let g = LongitudeGrid::new(1024).unwrap();
        assert_relative_eq!(g.angle(512), PI / 1024.0, epsilon = 1e-15);
        let span = g.angle(1023) - g.angle(0);
        assert_relative_eq!(span, TAU * 1023.0 / 1024.0, epsilon = 1e-12);
        assert!(g.angle(0) > -PI && g.angle(1023) < PI);
        assert!(g.angles().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn grid_rejects_narrow() {
        assert!(matches!(LongitudeGrid::new(3), Err(LayoutError::InvalidArgument(_))));
    }

    #[test]
    fn column_binning_wraps_and_matches_centers() {
        let g = LongitudeGrid::new(16).unwrap();
        for (i, &a) in g.angles().iter().enumerate() {
            assert_eq!(g.column_of_angle(a), i);
            assert_eq!(g.column_of_angle(a + TAU), i);
        }
        // boundaries go to the upper column, ±π to column 0
        assert_eq!(g.column_of_angle(PI), 0);
        assert_eq!(g.column_of_angle(-PI), 0);
        assert_eq!(g.column_of_point([0.0, 2.0]), 8);
        assert_eq!(g.column_of_angle(TAU / 16.0), 9);
        assert_eq!(g.column_of_angle(TAU / 16.0 - 1e-12), 8);
    }

    #[test]
    fn polar_warp_examples() {
        let g = LongitudeGrid::new(4).unwrap();
        let one = |d: f64, t: f64| [d * t.sin(), 1.0, d * t.cos()];
        assert_eq!(one(1.0, 0.0), [0.0, 1.0, 1.0]);
        let p = one(2f64.sqrt(), PI / 4.0);
        assert_relative_eq!(p[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(p[2], 1.0, epsilon = 1e-12);
        let p = one(2.0, PI / 2.0);
        assert_relative_eq!(p[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(p[2], 0.0, epsilon = 1e-12);

        let d = HorizonDepth::from_depths(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let pts = depth_to_points(&d, &g).unwrap();
        for ((i, q), t) in pts.iter_valid().zip(g.angles()) {
            assert_eq!(q[1], 1.0);
            assert_relative_eq!(q[0], d.depths()[i] * t.sin());
        }
        let short = HorizonDepth::from_depths(vec![1.0; 3]).unwrap();
        assert!(depth_to_points(&short, &g).is_err());
    }

    #[test]
    fn ceiling_examples() {
        let p = Points3D {
            points: vec![[0.0, 1.0, 1.0], [2.0, 1.0, 0.0]],
            valid: vec![true, true],
        };
        let c = ceiling_points(&p, RatioValue::new(0.5).unwrap()).unwrap();
        assert_eq!(c.points[0], [0.0, -0.5, 1.0]);
        let c = ceiling_points(&p, RatioValue::new(1.3).unwrap()).unwrap();
        assert_eq!(c.points[1], [2.0, -1.3, 0.0]);
        let bad = Points3D {
            points: vec![[0.0, 0.5, 1.0]],
            valid: vec![true],
        };
        assert!(ceiling_points(&bad, RatioValue::new(1.0).unwrap()).is_err());
    }

    #[test]
    fn d2l_scales_by_height() {
        let g = LongitudeGrid::new(1024).unwrap();
        let mut depths = vec![1.0; 1024];
        depths[512] = 1.25;
        let d = HorizonDepth::from_depths(depths).unwrap();
        let s = d2l(&d, &pose(0.0, [0.0, 0.0], 1.6), &g).unwrap();
        // column 512 sits at θ = π/1024, not exactly 0
        let t = g.angle(512);
        assert_relative_eq!(s.points[512][0], 2.0 * t.sin(), epsilon = 1e-12);
        assert_relative_eq!(s.points[512][1], 2.0 * t.cos(), epsilon = 1e-12);
        assert_relative_eq!(s.points[512][0].hypot(s.points[512][1]), 2.0, epsilon = 1e-12);
        assert_eq!(s.frame, Frame::View);
    }

    #[test]
    fn pose_rejects_bad_height() {
        assert!(CameraPose::new(0.0, [0.0, 0.0], 0.0).is_err());
        assert!(CameraPose::new(0.0, [0.0, 0.0], -1.0).is_err());
    }

    #[test]
    fn transform_examples() {
        let s = BoundarySamples {
            points: vec![[1.0, 0.0], [1.0, 2.0]],
            valid: vec![true, true],
            frame: Frame::View,
        };
        let id = transform_samples(&s, &CameraPose::identity(), Direction::ToWorld).unwrap();
        assert_eq!(id.points, s.points);
        let rot = transform_samples(&s, &pose(PI / 2.0, [0.0, 0.0], 1.0), Direction::ToWorld).unwrap();
        assert_relative_eq!(rot.points[0][0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(rot.points[0][1], -1.0, epsilon = 1e-15);
        let tr = transform_samples(&s, &pose(0.0, [3.0, 4.0], 1.0), Direction::ToWorld).unwrap();
        assert_eq!(tr.points[1], [4.0, 6.0]);
        assert_eq!(tr.frame, Frame::World);
        assert!(transform_samples(&s, &CameraPose::identity(), Direction::ToView).is_err());
    }

    #[test]
    fn l2d_single_point_and_aggregation() {
        let g = LongitudeGrid::new(1024).unwrap();
        let p = pose(0.0, [0.0, 0.0], 1.6);
        let s = BoundarySamples {
            points: vec![[0.0, 2.0]],
            valid: vec![true],
            frame: Frame::View,
        };
        let d = l2d(&s, &p, &g, BinAggregation::Median).unwrap();
        assert_eq!(d.valid_count(), 1);
        assert_relative_eq!(d.get(512).unwrap(), 1.25, epsilon = 1e-12);

        let unit = CameraPose::identity();
        let s = BoundarySamples {
            points: vec![[0.0, 1.0], [0.0, 3.0]],
            valid: vec![true, true],
            frame: Frame::View,
        };
        assert_eq!(l2d(&s, &unit, &g, BinAggregation::Median).unwrap().get(512), Some(2.0));
        assert_eq!(l2d(&s, &unit, &g, BinAggregation::Nearest).unwrap().get(512), Some(1.0));

        let empty = BoundarySamples {
            points: vec![],
            valid: vec![],
            frame: Frame::View,
        };
        assert_eq!(l2d(&empty, &unit, &g, BinAggregation::Median).unwrap().valid_count(), 0);
    }

    #[test]
    fn projection_examples() {
        let r1 = RatioValue::new(1.0).unwrap();
        let rows = project_column(1.0, r1, 512).unwrap();
        assert_relative_eq!(rows.floor, 384.0, epsilon = 1e-9);
        assert_relative_eq!(rows.ceiling, 128.0, epsilon = 1e-9);
        let far = project_column(1e12, r1, 512).unwrap();
        assert_relative_eq!(far.floor, 256.0, epsilon = 1e-6);
        assert_relative_eq!(far.ceiling, 256.0, epsilon = 1e-6);
        let half = project_column(1.0, RatioValue::new(0.5).unwrap(), 512).unwrap();
        // (0.5 − atan(0.5)/π)·512
        assert_relative_eq!(half.ceiling, 180.437_187_762_978, epsilon = 1e-9);
        assert!(matches!(project_column(0.0, r1, 512), Err(LayoutError::NumericDomain(_))));
    }

    #[test]
    fn json_field_order() {
        let d = HorizonDepth::new(vec![1.5, 0.0, 2.0, 1.0], vec![true, false, true, true]).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(
            s,
            r#"{"width":4,"depths":[1.5,0.0,2.0,1.0],"valid":[true,false,true,true],"frame":"view"}"#
        );
        let back: HorizonDepth = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
        let p = pose(0.5, [1.0, 2.0], 1.6);
        let js = serde_json::to_string(&p).unwrap();
        assert_eq!(js, r#"{"yaw":0.5,"t":[1.0,2.0],"h":1.6}"#);
    }

    proptest! {
        #[test]
        fn round_trip_identity(
            seed_depths in proptest::collection::vec(0.2f64..20.0, 256),
            yaw in -PI..PI, tx in -5.0f64..5.0, tz in -5.0f64..5.0, h in 0.5f64..2.5,
        ) {
            let g = LongitudeGrid::new(256).unwrap();
            let d = HorizonDepth::from_depths(seed_depths).unwrap();
            let p = pose(yaw, [tx, tz], h);
            let back = l2d(&d2l(&d, &p, &g).unwrap(), &p, &g, BinAggregation::Median).unwrap();
            for (i, v) in d.iter_valid() {
                prop_assert!((back.get(i).unwrap() - v).abs() < 1e-9);
            }
        }

        #[test]
        fn pose_group(
            yaw in -10.0f64..10.0, tx in -50.0f64..50.0, tz in -50.0f64..50.0,
            x in -20.0f64..20.0, z in -20.0f64..20.0,
        ) {
            let p = pose(yaw, [tx, tz], 1.0);
            let q = p.to_view(p.to_world([x, z]));
            prop_assert!((q[0] - x).abs() < 1e-12 && (q[1] - z).abs() < 1e-12);
            let inv = p.inverse();
            let a = inv.to_world([x, z]);
            let b = p.to_view([x, z]);
            prop_assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
            let id = p.compose(&inv);
            let c = id.to_world([x, z]);
            prop_assert!((c[0] - x).abs() < 1e-12 && (c[1] - z).abs() < 1e-12);
            prop_assert!(p.yaw() > -PI && p.yaw() <= PI);
        }

        #[test]
        fn floor_norm_equals_depth(d in 0.01f64..100.0, i in 0usize..512) {
            let g = LongitudeGrid::new(512).unwrap();
            let t = g.angle(i);
            let (x, z) = (d * t.sin(), d * t.cos());
            prop_assert!((x.hypot(z) - d).abs() <= 1e-12 * d.max(1.0));
        }

        #[test]
        fn floor_row_moves_toward_horizon(d in 0.05f64..50.0, k in 1.001f64..5.0, r in 0.1f64..3.0) {
            let r = RatioValue::new(r).unwrap();
            let near = project_column(d, r, 512).unwrap();
            let far = project_column(d * k, r, 512).unwrap();
            let hz = ImageRows::horizon(512);
            prop_assert!(far.floor - hz < near.floor - hz);
            prop_assert!(near.ceiling < hz && hz < near.floor);
        }
    }
}
