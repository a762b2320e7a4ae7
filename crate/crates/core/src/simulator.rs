//! Synthetic rooms, camera placement, exact horizon-depth rendering and
//! prediction-like corruption.
//!
//! Everything here is a deterministic function of a 64-bit seed. Per-view and
//! per-room random streams are derived with [`mix_seed`], so rendering views
//! in parallel gives the same bytes as rendering them in order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LayoutError, Result};
use crate::exec::{map_range, Execution};
use crate::geometry::{CameraPose, HorizonDepth, LongitudeGrid, Point2, RatioValue};
use crate::polygon;

/// Default camera height in meters.
pub const DEFAULT_CAMERA_HEIGHT: f64 = 1.6;

/// Depth multiplier applied by an `inflate` occlusion arc.
pub const INFLATE_FACTOR: f64 = 1.5;

const MAX_ATTEMPTS: usize = 1000;

/// SplitMix64 finalizer over `(seed, stream, index)`.
pub fn mix_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random stream tags passed to [`mix_seed`].
pub mod streams {
    pub const ROOM: u64 = 1;
    pub const CAMERAS: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const FEATURES: u64 = 4;
    pub const RATIO: u64 = 5;
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Simple, counter-clockwise room footprint in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point2>", into = "Vec<Point2>")]
pub struct FloorPolygon {
    vertices: Vec<Point2>,
}

impl FloorPolygon {
    pub fn new(vertices: Vec<Point2>) -> Result<Self> {
        if vertices.len() < 4 {
            return Err(invalid(format!(
                "floor polygon needs at least 4 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("floor polygon has non-finite vertices"));
        }
        if !polygon::is_simple(&vertices) {
            return Err(invalid("floor polygon is not simple"));
        }
        let mut vertices = vertices;
        let a = polygon::signed_area(&vertices);
        if a == 0.0 {
            return Err(invalid("floor polygon has zero area"));
        }
        if a < 0.0 {
            vertices.reverse();
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned `a × b` rectangle centered at the origin (`a` along x).
    pub fn rectangle(a: f64, b: f64) -> Result<Self> {
        let (hx, hz) = (0.5 * a, 0.5 * b);
        Self::new(vec![[-hx, -hz], [hx, -hz], [hx, hz], [-hx, hz]])
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        polygon::area(&self.vertices)
    }

    pub fn contains(&self, p: Point2) -> bool {
        polygon::contains(&self.vertices, p)
    }

    pub fn clearance(&self, p: Point2) -> f64 {
        polygon::distance_to_boundary(&self.vertices, p)
    }

    /// Longest side of the bounding box.
    pub fn max_extent(&self) -> f64 {
        let (lo, hi) = polygon::bounds(&self.vertices);
        (hi[0] - lo[0]).max(hi[1] - lo[1])
    }

    /// All edges axis aligned.
    pub fn is_manhattan(&self) -> bool {
        polygon::edges(&self.vertices).all(|(a, b)| a[0] == b[0] || a[1] == b[1])
    }
}

impl TryFrom<Vec<Point2>> for FloorPolygon {
    type Error = LayoutError;
    fn try_from(v: Vec<Point2>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FloorPolygon> for Vec<Point2> {
    fn from(p: FloorPolygon) -> Self {
        p.vertices
    }
}

/// A room footprint with flat floor and ceiling, plus the cameras observing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RoomScene {
    pub polygon: FloorPolygon,
    pub room_height: f64,
    pub poses: Vec<CameraPose>,
    pub seed: u64,
}

impl RoomScene {
    /// Ground-truth ratio seen from view `v`.
    pub fn ratio(&self, v: usize) -> Result<RatioValue> {
        RatioValue::from_heights(self.room_height, self.poses[v].height())
    }

    pub fn render_views(&self, grid: &LongitudeGrid, exec: Execution) -> Result<Vec<HorizonDepth>> {
        map_range(exec, self.poses.len(), |v| {
            render_depth(&self.polygon, &self.poses[v], grid)
        })
        .into_iter()
        .collect()
    }
}

/// Parameters of the random room generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RoomSpec {
    /// Inclusive corner-count range.
    pub corner_count: (usize, usize),
    /// Inclusive range of bounding-box side lengths in meters.
    pub extent: (f64, f64),
    pub manhattan: bool,
    /// Inclusive room-height range in meters.
    #[serde(default = "RoomSpec::default_height")]
    pub height: (f64, f64),
}

impl RoomSpec {
    fn default_height() -> (f64, f64) {
        (2.6, 3.2)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.corner_count;
        if lo < 4 || hi < lo {
            return Err(invalid(format!("corner count range ({lo}, {hi}) must satisfy 4 ≤ lo ≤ hi")));
        }
        let (a, b) = self.extent;
        if !(a > 0.0 && b >= a && b.is_finite()) {
            return Err(invalid(format!("extent range ({a}, {b}) must satisfy 0 < lo ≤ hi")));
        }
        let (h0, h1) = self.height;
        if !(h0 > 0.0 && h1 >= h0 && h1.is_finite()) {
            return Err(invalid(format!("height range ({h0}, {h1}) must satisfy 0 < lo ≤ hi")));
        }
        Ok(())
    }
}

impl Default for RoomSpec {
    fn default() -> Self {
        Self {
            corner_count: (4, 8),
            extent: (3.5, 8.0),
            manhattan: true,
            height: Self::default_height(),
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Draws `n` strictly increasing values in `(lo, hi)` with pairwise gap ≥ `gap`.
fn sorted_with_gap(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64, gap: f64) -> Option<Vec<f64>> {
    for _ in 0..MAX_ATTEMPTS {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
        v.sort_by(f64::total_cmp);
        let ok = v.windows(2).all(|w| w[1] - w[0] >= gap) && v.first().is_none_or(|&x| x - lo >= gap);
        if ok {
            return Some(v);
        }
    }
    None
}

/// Rectangle with staircase notches cut into its corners; `steps[c]` notches at corner `c`.
fn manhattan_polygon(rng: &mut ChaCha8Rng, width: f64, depth: f64, steps: [usize; 4]) -> Option<Vec<Point2>> {
    let (x0, x1, z0, z1) = (-0.5 * width, 0.5 * width, -0.5 * depth, 0.5 * depth);
    // corner origin, axis signs, and whether the boundary arrives along u = 0
    let corners = [
        ([x0, z0], [1.0, 1.0], true),
        ([x1, z0], [-1.0, 1.0], false),
        ([x1, z1], [-1.0, -1.0], true),
        ([x0, z1], [1.0, -1.0], false),
    ];
    let mut out = Vec::new();
    for (c, &(origin, sign, forward)) in corners.iter().enumerate() {
        let s = steps[c];
        if s == 0 {
            out.push(origin);
            continue;
        }
        let min_gap = 0.15_f64.min(0.35 * width / (s as f64 + 1.0));
        let us = sorted_with_gap(rng, s, 0.0, 0.4 * width, min_gap)?;
        let min_gap = 0.15_f64.min(0.35 * depth / (s as f64 + 1.0));
        let mut vs = sorted_with_gap(rng, s, 0.0, 0.4 * depth, min_gap)?;
        vs.reverse();
        let mut local = vec![[0.0, vs[0]]];
        for k in 0..s {
            local.push([us[k], vs[k]]);
            local.push([us[k], if k + 1 < s { vs[k + 1] } else { 0.0 }]);
        }
        if !forward {
            local.reverse();
        }
        out.extend(
            local
                .into_iter()
                .map(|[u, v]| [origin[0] + sign[0] * u, origin[1] + sign[1] * v]),
        );
    }
    Some(out)
}

/// Star-shaped polygon around the origin with `n` vertices.
fn star_polygon(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> Option<Vec<Point2>> {
    let tau = std::f64::consts::TAU;
    let gap = 0.25 * tau / n as f64;
    let offset = rng.random_range(0.0..tau);
    let mut angles = sorted_with_gap(rng, n, 0.0, tau - gap, gap)?;
    for a in &mut angles {
        *a += offset;
    }
    let r = 0.5 * extent;
    Some(
        angles
            .into_iter()
            .map(|a| {
                let rad = rng.random_range(0.6 * r..=r);
                [rad * a.sin(), rad * a.cos()]
            })
            .collect(),
    )
}

/// Generates a room footprint and height; the scene has no cameras yet.
pub fn generate_room(spec: &RoomSpec, seed: u64) -> Result<RoomScene> {
    spec.validate()?;
    let mut rng = rng(mix_seed(seed, streams::ROOM, 0));
    let (lo, hi) = spec.corner_count;
    let choices: Vec<usize> = (lo..=hi)
        .filter(|n| !spec.manhattan || n % 2 == 0)
        .collect();
    if choices.is_empty() {
        return Err(LayoutError::GenerationFailure(format!(
            "no even corner count in [{lo}, {hi}] for a Manhattan room"
        )));
    }
    for _ in 0..MAX_ATTEMPTS {
        let n = choices[rng.random_range(0..choices.len())];
        let verts = if spec.manhattan {
            let width = uniform(&mut rng, spec.extent);
            let depth = uniform(&mut rng, spec.extent);
            let mut steps = [0usize; 4];
            for _ in 0..(n - 4) / 2 {
                steps[rng.random_range(0..4)] += 1;
            }
            manhattan_polygon(&mut rng, width, depth, steps)
        } else {
            let extent = uniform(&mut rng, spec.extent);
            star_polygon(&mut rng, n, extent)
        };
        let Some(verts) = verts else { continue };
        if let Ok(polygon) = FloorPolygon::new(verts) {
            let room_height = uniform(&mut rng, spec.height);
            return Ok(RoomScene {
                polygon,
                room_height,
                poses: Vec::new(),
                seed,
            });
        }
    }
    Err(LayoutError::GenerationFailure(format!(
        "could not generate a room for {spec:?} after {MAX_ATTEMPTS} attempts"
    )))
}

/// How cameras are scattered inside a room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PlacementSpec {
    pub count: usize,
    /// Minimum distance to every wall, meters.
    #[serde(default = "PlacementSpec::default_clearance")]
    pub min_clearance: f64,
    /// Minimum distance between two cameras, meters.
    #[serde(default = "PlacementSpec::default_separation")]
    pub min_separation: f64,
    /// Inclusive camera-height range, meters.
    #[serde(default = "PlacementSpec::default_height")]
    pub height: (f64, f64),
}

impl PlacementSpec {
    fn default_clearance() -> f64 {
        0.5
    }
    fn default_separation() -> f64 {
        0.3
    }
    fn default_height() -> (f64, f64) {
        (DEFAULT_CAMERA_HEIGHT, DEFAULT_CAMERA_HEIGHT)
    }

    pub fn new(count: usize) -> Self {
        Self {
            count,
            min_clearance: Self::default_clearance(),
            min_separation: Self::default_separation(),
            height: Self::default_height(),
        }
    }

    pub fn with_clearance(mut self, c: f64) -> Self {
        self.min_clearance = c;
        self
    }
}

/// Places `spec.count` cameras; the first goes to the area centroid when it is admissible.
pub fn place_cameras(scene: &RoomScene, spec: &PlacementSpec, seed: u64) -> Result<Vec<CameraPose>> {
    if spec.count == 0 {
        return Err(invalid("need at least one camera"));
    }
    let (h0, h1) = spec.height;
    if !(h0 > 0.0 && h1 >= h0 && h1 < scene.room_height) {
        return Err(invalid(format!(
            "camera heights ({h0}, {h1}) must lie in (0, room height {})",
            scene.room_height
        )));
    }
    let mut rng = rng(mix_seed(seed, streams::CAMERAS, 0));
    let poly = &scene.polygon;
    let (lo, hi) = polygon::bounds(poly.vertices());
    let admissible = |p: Point2, placed: &[CameraPose]| {
        poly.contains(p)
            && poly.clearance(p) >= spec.min_clearance
            && placed.iter().all(|q| {
                let t = q.translation();
                (t[0] - p[0]).hypot(t[1] - p[1]) >= spec.min_separation
            })
    };
    let mut poses: Vec<CameraPose> = Vec::with_capacity(spec.count);
    let c = polygon::centroid(poly.vertices());
    if admissible(c, &poses) {
        let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        poses.push(CameraPose::new(yaw, c, uniform(&mut rng, spec.height))?);
    }
    while poses.len() < spec.count {
        let mut placed = false;
        for _ in 0..10 * MAX_ATTEMPTS {
            let p = [rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1])];
            if admissible(p, &poses) {
                let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                poses.push(CameraPose::new(yaw, p, uniform(&mut rng, spec.height))?);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(LayoutError::GenerationFailure(format!(
                "could only place {} of {} cameras",
                poses.len(),
                spec.count
            )));
        }
    }
    Ok(poses)
}

/// Exact horizon depth by casting each column's ray against the footprint.
pub fn render_depth(poly: &FloorPolygon, pose: &CameraPose, grid: &LongitudeGrid) -> Result<HorizonDepth> {
    let origin = pose.translation();
    if !poly.contains(origin) || poly.clearance(origin) <= 1e-9 {
        return Err(invalid(format!("camera at {origin:?} is not strictly inside the room")));
    }
    let depths = grid
        .angles()
        .iter()
        .map(|&t| {
            polygon::ray_cast(poly.vertices(), origin, pose.world_direction(t))
                .map(|d| d / pose.height())
                .ok_or_else(|| LayoutError::NumericDomain(format!("ray at θ = {t} escaped the room")))
        })
        .collect::<Result<Vec<_>>>()?;
    HorizonDepth::from_depths(depths)
}

/// Closed-form wall distance (meters) inside an `a × b` rectangle centered at the origin.
pub fn rect_depth_analytic(a: f64, b: f64, offset: Point2, theta: f64) -> Result<f64> {
    let (hx, hz) = (0.5 * a, 0.5 * b);
    if !(offset[0].abs() < hx && offset[1].abs() < hz) {
        return Err(invalid(format!("offset {offset:?} is not strictly inside {a} × {b}")));
    }
    let dir = [theta.sin(), theta.cos()];
    let mut best = f64::INFINITY;
    for (k, half) in [(0, hx), (1, hz)] {
        if dir[k] != 0.0 {
            for wall in [half, -half] {
                let t = (wall - offset[k]) / dir[k];
                if t > 0.0 {
                    best = best.min(t);
                }
            }
        }
    }
    Ok(best)
}

/// What an occlusion arc does to the affected columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OcclusionMode {
    Drop,
    Inflate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct OcclusionArc {
    pub start_fraction: f64,
    pub length_fraction: f64,
    pub mode: OcclusionMode,
}

impl OcclusionArc {
    /// Affected columns, wrapping around the seam.
    pub fn columns(&self, width: usize) -> impl Iterator<Item = usize> {
        let start = (self.start_fraction * width as f64).floor() as usize;
        let len = (self.length_fraction * width as f64).round() as usize;
        (start..start + len).map(move |i| i % width)
    }
}

/// Corruption model standing in for network prediction errors.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default)]
    pub multiplicative_sigma: f64,
    #[serde(default)]
    pub smoothing_half_width: usize,
    #[serde(default)]
    pub occlusion_arcs: Vec<OcclusionArc>,
    #[serde(default)]
    pub global_scale_sigma: f64,
    /// Log-normal sigma applied to predicted ratios.
    #[serde(default)]
    pub ratio_sigma: f64,
}

impl NoiseSpec {
    pub fn multiplicative(sigma: f64) -> Self {
        Self {
            multiplicative_sigma: sigma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("multiplicativeSigma", self.multiplicative_sigma),
            ("globalScaleSigma", self.global_scale_sigma),
            ("ratioSigma", self.ratio_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{name} must be ≥ 0, got {v}")));
            }
        }
        for arc in &self.occlusion_arcs {
            if !(0.0..1.0).contains(&arc.start_fraction) || !(0.0..0.5).contains(&arc.length_fraction) {
                return Err(invalid(format!(
                    "occlusion arc {arc:?} needs start in [0, 1) and length in [0, 0.5)"
                )));
            }
        }
        Ok(())
    }
}

/// Applies multiplicative noise, a global scale error and occlusion arcs.
///
/// Columns that were invalid on input stay invalid.
pub fn corrupt(d: &HorizonDepth, spec: &NoiseSpec, seed: u64) -> Result<HorizonDepth> {
    spec.validate()?;
    let w = d.width();
    let mut rng = rng(seed);
    let scale = LogNormal::new(0.0, spec.global_scale_sigma)
        .map_err(|e| invalid(e.to_string()))?
        .sample(&mut rng);
    let normal = Normal::new(0.0, spec.multiplicative_sigma).map_err(|e| invalid(e.to_string()))?;
    let eps: Vec<f64> = (0..w).map(|_| normal.sample(&mut rng)).collect();
    let k = spec.smoothing_half_width as isize;
    let smoothed: Vec<f64> = if k == 0 {
        eps
    } else {
        (0..w as isize)
            .map(|i| {
                let sum: f64 = (-k..=k).map(|j| eps[(i + j).rem_euclid(w as isize) as usize]).sum();
                sum / (2 * k + 1) as f64
            })
            .collect()
    };
    let mut depths: Vec<f64> = d
        .depths()
        .iter()
        .zip(&smoothed)
        .map(|(&v, &e)| v * scale * (1.0 + e).max(1e-3))
        .collect();
    let mut valid = d.valid().to_vec();
    for arc in &spec.occlusion_arcs {
        for i in arc.columns(w) {
            match arc.mode {
                OcclusionMode::Drop => valid[i] = false,
                OcclusionMode::Inflate => depths[i] *= INFLATE_FACTOR,
            }
        }
    }
    HorizonDepth::new(depths, valid)
}

/// Multiplies a ratio by a log-normal factor.
pub fn corrupt_ratio(r: RatioValue, sigma: f64, seed: u64) -> Result<RatioValue> {
    let f = LogNormal::new(0.0, sigma)
        .map_err(|e| invalid(e.to_string()))?
        .sample(&mut rng(seed));
    RatioValue::new(r.get() * f)
}
