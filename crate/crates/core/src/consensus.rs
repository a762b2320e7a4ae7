//! Multi-view pseudo-label generation.
//!
//! Every view's horizon depth is lifted to floor-plane boundary points, moved
//! to the world frame with its pose, and re-expressed in each reference view.
//! There the points are binned by column and reduced to one robust depth per
//! column, together with the spread of the candidates (`σ`) and how many
//! candidates supported it. Columns with too little support are filled by
//! interpolating the boundary between their valid neighbours.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::exec::{map_range, Execution};
use crate::geometry::{bin_candidates, d2l, CameraPose, HorizonDepth, LongitudeGrid, Point2};
use crate::stats;

/// Lower clamp applied to `σ` before it is squared into a loss weight.
pub const SIGMA_FLOOR: f64 = 1e-3;

/// Robust per-column reduction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    Median,
    /// Reject candidates farther than `mad_k · MAD` from the median, then average.
    MeanAfterMad,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Median => "median",
            Strategy::MeanAfterMad => "mean_after_mad",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ColumnAggregation {
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default = "ColumnAggregation::default_mad_k")]
    pub mad_k: f64,
    #[serde(default = "ColumnAggregation::default_min_support")]
    pub min_support: usize,
}

impl ColumnAggregation {
    fn default_mad_k() -> f64 {
        2.5
    }
    fn default_min_support() -> usize {
        2
    }

    pub fn with_strategy(strategy: Strategy) -> Self {
        Self {
            strategy,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mad_k.is_finite() && self.mad_k > 0.0) {
            return Err(invalid(format!("madK must be > 0, got {}", self.mad_k)));
        }
        if self.min_support == 0 {
            return Err(invalid("minSupport must be at least 1"));
        }
        Ok(())
    }
}

impl Default for ColumnAggregation {
    fn default() -> Self {
        Self {
            strategy: Strategy::Median,
            mad_k: Self::default_mad_k(),
            min_support: Self::default_min_support(),
        }
    }
}

/// Reduced value of one column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnEstimate {
    pub value: f64,
    pub sigma: f64,
    pub support: usize,
}

impl ColumnEstimate {
    pub const EMPTY: Self = Self {
        value: 0.0,
        sigma: 0.0,
        support: 0,
    };

    pub fn is_valid(&self) -> bool {
        self.support > 0
    }
}

/// Reduces the depth candidates of one column.
///
/// Candidates are sorted first, so the result does not depend on input order.
pub fn aggregate_column(candidates: &[f64], cfg: &ColumnAggregation) -> ColumnEstimate {
    if candidates.is_empty() {
        return ColumnEstimate::EMPTY;
    }
    let sorted = stats::sorted(candidates);
    let median = stats::median_sorted(&sorted);
    match cfg.strategy {
        Strategy::Median => ColumnEstimate {
            value: median,
            sigma: stats::population_std(&sorted),
            support: sorted.len(),
        },
        Strategy::MeanAfterMad => {
            let limit = cfg.mad_k * stats::mad(&sorted, median);
            let kept: Vec<f64> = sorted
                .iter()
                .copied()
                .filter(|c| (c - median).abs() <= limit)
                .collect();
            // at least the median's neighbourhood survives; guard ties at MAD = 0 anyway
            let kept = if kept.is_empty() { vec![median] } else { kept };
            ColumnEstimate {
                value: stats::mean(&kept),
                sigma: stats::population_std(&kept),
                support: kept.len(),
            }
        }
    }
}

/// Options for a full pseudo-labelling run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ConsensusConfig {
    #[serde(flatten)]
    pub aggregation: ColumnAggregation,
    /// Number of refinement passes; each pass feeds its labels back as inputs.
    #[serde(default = "ConsensusConfig::default_iterations")]
    pub iterations: usize,
    /// Whether a reference view's own prediction votes in its consensus.
    #[serde(default = "ConsensusConfig::default_include_reference")]
    pub include_reference: bool,
}

impl ConsensusConfig {
    fn default_iterations() -> usize {
        1
    }
    fn default_include_reference() -> bool {
        true
    }

    pub fn validate(&self) -> Result<()> {
        self.aggregation.validate()?;
        if self.iterations == 0 {
            return Err(invalid("iterations must be at least 1"));
        }
        Ok(())
    }
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        Self {
            aggregation: ColumnAggregation::default(),
            iterations: 1,
            include_reference: true,
        }
    }
}

impl From<ColumnAggregation> for ConsensusConfig {
    fn from(aggregation: ColumnAggregation) -> Self {
        Self {
            aggregation,
            ..Self::default()
        }
    }
}

/// Pseudo-label of one view.
///
/// `support[i] == 0` marks a column that fell short of the minimum support and
/// was filled by interpolation; `sigma` there is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabel {
    pub depth: HorizonDepth,
    pub sigma: Vec<f64>,
    pub support: Vec<usize>,
}

impl PseudoLabel {
    /// `σ` clamped to [`SIGMA_FLOOR`], ready for inverse-variance weighting.
    pub fn clamped_sigma(&self) -> Vec<f64> {
        self.sigma.iter().map(|s| s.max(SIGMA_FLOOR)).collect()
    }

    /// Depth with interpolated columns marked invalid, for use as supervision.
    ///
    /// Filled columns carry `σ = 0`, which would otherwise give them the
    /// largest possible weight.
    pub fn supervised_depth(&self) -> HorizonDepth {
        let valid: Vec<bool> = self.support.iter().map(|&s| s > 0).collect();
        HorizonDepth::new(self.depth.depths().to_vec(), valid).expect("filled depths are valid")
    }
}

/// Pseudo-labels for every view of a room.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabelSet {
    pub labels: Vec<PseudoLabel>,
    pub strategy: Strategy,
    pub iterations: usize,
}

impl PseudoLabelSet {
    pub fn depths(&self) -> Vec<HorizonDepth> {
        self.labels.iter().map(|l| l.depth.clone()).collect()
    }

    pub fn record(&self, view: usize) -> PseudoLabelRecord {
        let l = &self.labels[view];
        PseudoLabelRecord {
            depths: l.depth.depths().to_vec(),
            sigma: l.sigma.clone(),
            support: l.support.clone(),
            strategy: self.strategy,
            iterations: self.iterations,
        }
    }
}

/// JSON form of one view's pseudo-label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelRecord {
    pub depths: Vec<f64>,
    pub sigma: Vec<f64>,
    pub support: Vec<usize>,
    pub strategy: Strategy,
    pub iterations: usize,
}

impl PseudoLabelRecord {
    pub fn to_depth(&self) -> Result<HorizonDepth> {
        HorizonDepth::from_depths(self.depths.clone())
    }
}

fn check_inputs(depths: &[HorizonDepth], poses: &[CameraPose], grid: &LongitudeGrid) -> Result<()> {
    if depths.len() != poses.len() {
        return Err(invalid(format!(
            "{} depth sequences but {} poses",
            depths.len(),
            poses.len()
        )));
    }
    if depths.len() < 2 {
        return Err(invalid(format!("consensus needs at least 2 views, got {}", depths.len())));
    }
    for (v, d) in depths.iter().enumerate() {
        grid.check_width(d.width(), &format!("view {v}"))?;
    }
    Ok(())
}

/// World-frame boundary points of every valid column of every view.
fn world_points(depths: &[HorizonDepth], poses: &[CameraPose], grid: &LongitudeGrid) -> Result<Vec<Vec<Point2>>> {
    depths
        .iter()
        .zip(poses)
        .map(|(d, p)| {
            let s = d2l(d, p, grid)?;
            Ok(s.iter_valid().map(|(_, q)| p.to_world(q)).collect())
        })
        .collect()
}

/// One consensus pass for the reference view `reference`.
fn label_for_view(
    reference: usize,
    world: &[Vec<Point2>],
    poses: &[CameraPose],
    grid: &LongitudeGrid,
    cfg: &ConsensusConfig,
) -> Result<PseudoLabel> {
    let pose = &poses[reference];
    let points = world
        .iter()
        .enumerate()
        .filter(|(u, _)| cfg.include_reference || *u != reference)
        .flat_map(|(_, pts)| pts.iter().map(|&q| pose.to_view(q)));
    let bins = bin_candidates(points, pose.height(), grid);

    let w = grid.width();
    let mut depths = vec![0.0; w];
    let mut valid = vec![false; w];
    let mut sigma = vec![0.0; w];
    let mut support = vec![0; w];
    for (j, cands) in bins.iter().enumerate() {
        let est = aggregate_column(cands, &cfg.aggregation);
        // below minimum support the column is filled later, like an empty one
        if est.support >= cfg.aggregation.min_support {
            sigma[j] = est.sigma;
            support[j] = est.support;
            depths[j] = est.value;
            valid[j] = true;
        }
    }
    let raw = HorizonDepth::new(depths, valid)?;
    if raw.valid_count() == 0 {
        return Err(invalid(format!("view {reference}: no column reached the minimum support")));
    }
    let depth = fill_invalid(&raw, grid)?;
    Ok(PseudoLabel { depth, sigma, support })
}

/// A single consensus pass over all reference views.
pub fn consensus_pass(
    depths: &[HorizonDepth],
    poses: &[CameraPose],
    grid: &LongitudeGrid,
    cfg: &ConsensusConfig,
    exec: Execution,
) -> Result<Vec<PseudoLabel>> {
    check_inputs(depths, poses, grid)?;
    cfg.validate()?;
    let world = world_points(depths, poses, grid)?;
    map_range(exec, depths.len(), |v| label_for_view(v, &world, poses, grid, cfg))
        .into_iter()
        .collect()
}

/// Runs `n` consensus passes, returning the labels after every pass.
pub fn pseudo_label_iterations(
    depths: &[HorizonDepth],
    poses: &[CameraPose],
    grid: &LongitudeGrid,
    cfg: &ConsensusConfig,
    n: usize,
    exec: Execution,
) -> Result<Vec<PseudoLabelSet>> {
    let mut out: Vec<PseudoLabelSet> = Vec::with_capacity(n);
    let mut inputs = depths.to_vec();
    for k in 1..=n {
        let labels = consensus_pass(&inputs, poses, grid, cfg, exec)?;
        inputs = labels.iter().map(|l| l.depth.clone()).collect();
        out.push(PseudoLabelSet {
            labels,
            strategy: cfg.aggregation.strategy,
            iterations: k,
        });
    }
    Ok(out)
}

/// Pseudo-labels after `cfg.iterations` passes.
pub fn generate_pseudo_labels(
    depths: &[HorizonDepth],
    poses: &[CameraPose],
    grid: &LongitudeGrid,
    cfg: &ConsensusConfig,
) -> Result<PseudoLabelSet> {
    generate_pseudo_labels_with(depths, poses, grid, cfg, Execution::default())
}

pub fn generate_pseudo_labels_with(
    depths: &[HorizonDepth],
    poses: &[CameraPose],
    grid: &LongitudeGrid,
    cfg: &ConsensusConfig,
    exec: Execution,
) -> Result<PseudoLabelSet> {
    cfg.validate()?;
    let mut all = pseudo_label_iterations(depths, poses, grid, cfg, cfg.iterations, exec)?;
    Ok(all.pop().expect("at least one iteration"))
}

/// Fills invalid runs by intersecting each column's ray with the chord between
/// the nearest valid boundary points on either side (circularly).
///
/// Straight walls are recovered exactly. When the chord cannot be hit (gaps of
/// half a turn or more), depth is interpolated linearly in angle instead.
pub fn fill_invalid(d: &HorizonDepth, grid: &LongitudeGrid) -> Result<HorizonDepth> {
    grid.check_width(d.width(), "horizon depth")?;
    let w = d.width();
    let valid_cols: Vec<usize> = d.iter_valid().map(|(i, _)| i).collect();
    if valid_cols.is_empty() {
        return Err(invalid("cannot fill a sequence with no valid column"));
    }
    if valid_cols.len() == w {
        return Ok(d.clone());
    }
    let point = |i: usize| {
        let t = grid.angle(i);
        let v = d.depths()[i];
        [v * t.sin(), v * t.cos()]
    };
    let mut depths = d.depths().to_vec();
    for (k, &a) in valid_cols.iter().enumerate() {
        let b = valid_cols[(k + 1) % valid_cols.len()];
        let gap = (b + w - a - 1) % w;
        if gap == 0 && valid_cols.len() > 1 {
            continue;
        }
        let gap = if valid_cols.len() == 1 { w - 1 } else { gap };
        let (pa, pb) = (point(a), point(b));
        let (da, db) = (d.depths()[a], d.depths()[b]);
        for step in 1..=gap {
            let j = (a + step) % w;
            let t = grid.angle(j);
            let dir = [t.sin(), t.cos()];
            let chord = [pb[0] - pa[0], pb[1] - pa[1]];
            let denom = dir[0] * chord[1] - dir[1] * chord[0];
            let hit = (denom.abs() > 1e-12)
                .then(|| (pa[0] * chord[1] - pa[1] * chord[0]) / denom)
                .filter(|r| r.is_finite() && *r > 0.0);
            depths[j] = hit.unwrap_or_else(|| {
                let f = step as f64 / (gap + 1) as f64;
                da + f * (db - da)
            });
        }
    }
    HorizonDepth::from_depths(depths)
}
