//! End-to-end scenario runner.
//!
//! A run generates rooms and cameras, renders ground truth, corrupts it into
//! stand-in predictions, builds consensus pseudo-labels, refines each view
//! with a cost volume and scores everything against ground truth. All
//! artifacts are written atomically under the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::consensus::{generate_pseudo_labels_with, ConsensusConfig, PseudoLabelSet};
use crate::cost_volume::{
    align_points, build_cost_volume_with, confidence_weights, extract_depth, fuse_depth, fuse_depth_weighted,
    synth_features, DepthPlanes, FeatureMode, PlaneMode,
};
use crate::error::{LayoutError, Result};
use crate::exec::{map_range, with_threads, Execution};
use crate::geometry::{CameraPose, HorizonDepth, HorizonDepthRecord, LongitudeGrid, Point2, RatioValue};
use crate::metrics::{boundary_polygon, evaluate, EvalOptions, MetricReport};
use crate::objectives::{loss_parts, LossParts, LossWeights};
use crate::simulator::{
    corrupt, corrupt_ratio, generate_room, mix_seed, place_cameras, streams, NoiseSpec, PlacementSpec, RoomScene,
    RoomSpec, DEFAULT_CAMERA_HEIGHT,
};
use crate::stats::median;
use crate::svg::FloorPlan;

/// Depth-plane normalization: automatic from the room, or fixed meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DMax {
    #[default]
    #[serde(with = "auto_keyword")]
    Auto,
    Meters(f64),
}

mod auto_keyword {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("auto")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == "auto" {
            Ok(())
        } else {
            Err(D::Error::custom(format!("expected \"auto\" or a number, got \"{s}\"")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fusion {
    /// One `alpha` for every column.
    #[default]
    Scalar,
    /// `support / (support + 1)` per column.
    Confidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct CostVolumeConfig {
    pub planes: usize,
    pub d_max: DMax,
    pub alpha: f64,
    pub fusion: Fusion,
    pub plane_mode: PlaneMode,
    pub channels: usize,
    pub features: FeatureMode,
}

impl Default for CostVolumeConfig {
    fn default() -> Self {
        Self {
            planes: DepthPlanes::DEFAULT_COUNT,
            d_max: DMax::Auto,
            alpha: 0.5,
            fusion: Fusion::Scalar,
            plane_mode: PlaneMode::Radial,
            channels: 8,
            features: FeatureMode::Geometric,
        }
    }
}

fn default_rooms() -> usize {
    1
}
fn default_views() -> usize {
    8
}
fn default_width() -> usize {
    1024
}
fn default_camera_height() -> (f64, f64) {
    (DEFAULT_CAMERA_HEIGHT, DEFAULT_CAMERA_HEIGHT)
}
fn default_clearance() -> f64 {
    0.5
}
fn default_separation() -> f64 {
    0.3
}
fn default_outputs() -> PathBuf {
    PathBuf::from("out")
}

/// Everything a run needs; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    #[serde(default = "default_rooms")]
    pub rooms: usize,
    #[serde(default)]
    pub room: RoomSpec,
    #[serde(default = "default_views")]
    pub view_count: usize,
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default = "default_camera_height")]
    pub camera_height: (f64, f64),
    #[serde(default = "default_clearance")]
    pub min_clearance: f64,
    #[serde(default = "default_separation")]
    pub min_separation: f64,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub consensus: ConsensusConfig,
    #[serde(default)]
    pub cost_volume: CostVolumeConfig,
    #[serde(default)]
    pub weights: LossWeights,
    #[serde(default = "default_outputs")]
    pub outputs: PathBuf,
}

fn config_error(path: &str, err: LayoutError) -> LayoutError {
    let message = match err {
        LayoutError::InvalidArgument(m) => m,
        other => other.to_string(),
    };
    LayoutError::Config {
        path: path.to_owned(),
        message,
    }
}

impl ScenarioConfig {
    /// A config with every optional field at its default.
    pub fn with_seed(seed: u64) -> Self {
        serde_json::from_value(serde_json::json!({ "seed": seed })).expect("defaults deserialize")
    }

    /// Parses and validates JSON, naming the offending key on failure.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| LayoutError::Config {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| LayoutError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.rooms == 0 {
            return Err(config_error("rooms", crate::error::invalid("need at least one room")));
        }
        self.room.validate().map_err(|e| config_error("room", e))?;
        if self.view_count < 2 {
            return Err(config_error(
                "viewCount",
                crate::error::invalid(format!("need at least 2 views, got {}", self.view_count)),
            ));
        }
        LongitudeGrid::new(self.width).map_err(|e| config_error("width", e))?;
        let (h0, h1) = self.camera_height;
        if !(h0 > 0.0 && h1 >= h0 && h1 < self.room.height.0) {
            return Err(config_error(
                "cameraHeight",
                crate::error::invalid(format!(
                    "range ({h0}, {h1}) must be positive and below the lowest room height {}",
                    self.room.height.0
                )),
            ));
        }
        if !(self.min_clearance >= 0.0 && self.min_separation >= 0.0) {
            return Err(config_error(
                "minClearance",
                crate::error::invalid("clearance and separation must be ≥ 0"),
            ));
        }
        self.noise.validate().map_err(|e| config_error("noise", e))?;
        self.consensus.validate().map_err(|e| config_error("consensus", e))?;
        self.weights.validate().map_err(|e| config_error("weights", e))?;
        let cv = &self.cost_volume;
        let check = |ok: bool, key: &str, msg: String| {
            if ok {
                Ok(())
            } else {
                Err(config_error(&format!("costVolume.{key}"), crate::error::invalid(msg)))
            }
        };
        check(cv.planes >= 2, "planes", format!("need at least 2 planes, got {}", cv.planes))?;
        check((0.0..=1.0).contains(&cv.alpha), "alpha", format!("alpha must lie in [0, 1], got {}", cv.alpha))?;
        check(cv.channels >= 1, "channels", "need at least one channel".into())?;
        if let DMax::Meters(m) = cv.d_max {
            check(m.is_finite() && m > 0.0, "dMax", format!("dMax must be > 0, got {m}"))?;
        }
        if let FeatureMode::Random { sigma } = cv.features {
            check(sigma.is_finite() && sigma >= 0.0, "features", format!("sigma must be ≥ 0, got {sigma}"))?;
        }
        Ok(())
    }

    pub fn grid(&self) -> LongitudeGrid {
        LongitudeGrid::new(self.width).expect("validated width")
    }

    pub fn placement(&self) -> PlacementSpec {
        PlacementSpec {
            count: self.view_count,
            min_clearance: self.min_clearance,
            min_separation: self.min_separation,
            height: self.camera_height,
        }
    }

    pub fn room_seed(&self, room: usize) -> u64 {
        mix_seed(self.seed, streams::ROOM, room as u64)
    }
}

/// How far a run goes; every stage writes its own artifacts plus those before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Scene,
    Render,
    Corrupt,
    Consensus,
    CostVolume,
    Evaluate,
}

/// Everything computed for one room.
#[derive(Debug, Clone)]
pub struct RoomRun {
    pub index: usize,
    pub scene: RoomScene,
    pub gt: Vec<HorizonDepth>,
    pub gt_ratio: Vec<RatioValue>,
    pub noisy: Vec<HorizonDepth>,
    pub noisy_ratio: Vec<RatioValue>,
    pub pseudo: Option<PseudoLabelSet>,
    pub pseudo_ratio: Vec<RatioValue>,
    pub cost: Vec<HorizonDepth>,
    pub cost_summaries: Vec<String>,
    pub fused: Vec<HorizonDepth>,
    pub metrics: Vec<(&'static str, Vec<MetricReport>)>,
    pub losses: Vec<(&'static str, LossParts)>,
}

impl RoomRun {
    pub fn name(&self) -> String {
        room_name(self.index)
    }
}

pub fn room_name(index: usize) -> String {
    format!("room{index:03}")
}

/// Room height consensus: median of each view's estimate, re-expressed per view.
pub fn consensus_ratios(ratios: &[RatioValue], poses: &[CameraPose]) -> Result<Vec<RatioValue>> {
    let heights: Vec<f64> = ratios
        .iter()
        .zip(poses)
        .map(|(r, p)| p.height() * (1.0 + r.get()))
        .collect();
    let room = median(&heights).ok_or_else(|| crate::error::invalid("no ratios to combine"))?;
    poses.iter().map(|p| RatioValue::from_heights(room, p.height())).collect()
}

/// Runs one room up to `stage`.
pub fn run_room(cfg: &ScenarioConfig, index: usize, stage: Stage, exec: Execution) -> Result<RoomRun> {
    let grid = cfg.grid();
    let seed = cfg.room_seed(index);
    let mut scene = generate_room(&cfg.room, seed)?;
    scene.poses = place_cameras(&scene, &cfg.placement(), seed)?;
    let mut run = RoomRun {
        index,
        scene,
        gt: Vec::new(),
        gt_ratio: Vec::new(),
        noisy: Vec::new(),
        noisy_ratio: Vec::new(),
        pseudo: None,
        pseudo_ratio: Vec::new(),
        cost: Vec::new(),
        cost_summaries: Vec::new(),
        fused: Vec::new(),
        metrics: Vec::new(),
        losses: Vec::new(),
    };
    if stage < Stage::Render {
        return Ok(run);
    }
    let views = run.scene.poses.len();
    run.gt = run.scene.render_views(&grid, exec)?;
    run.gt_ratio = (0..views).map(|v| run.scene.ratio(v)).collect::<Result<_>>()?;
    if stage < Stage::Corrupt {
        return Ok(run);
    }
    for v in 0..views {
        let noise_seed = mix_seed(seed, streams::NOISE, v as u64);
        run.noisy.push(corrupt(&run.gt[v], &cfg.noise, noise_seed)?);
        let ratio_seed = mix_seed(seed, streams::RATIO, v as u64);
        run.noisy_ratio.push(corrupt_ratio(run.gt_ratio[v], cfg.noise.ratio_sigma, ratio_seed)?);
    }
    if stage < Stage::Consensus {
        return Ok(run);
    }
    let pseudo = generate_pseudo_labels_with(&run.noisy, &run.scene.poses, &grid, &cfg.consensus, exec)?;
    run.pseudo_ratio = consensus_ratios(&run.noisy_ratio, &run.scene.poses)?;
    run.pseudo = Some(pseudo);
    if stage < Stage::CostVolume {
        return Ok(run);
    }
    let cv = &cfg.cost_volume;
    let d_max = match cv.d_max {
        DMax::Auto => 2.0 * run.scene.polygon.max_extent(),
        DMax::Meters(m) => m,
    };
    let planes = DepthPlanes::new(cv.planes, d_max)?.with_mode(cv.plane_mode);
    let features = synth_features(&run.scene, &grid, cv.channels, cv.features, seed)?;
    for v in 0..views {
        let aligned = align_points(&run.noisy, &run.scene.poses, v, &grid)?;
        let volume = build_cost_volume_with(&features, &aligned, &planes, &grid, run.scene.poses[v].height(), exec)?;
        let d_cost = extract_depth(&volume, &planes)?;
        let fused = match cv.fusion {
            Fusion::Scalar => fuse_depth(&d_cost, &run.noisy[v], cv.alpha)?,
            Fusion::Confidence => fuse_depth_weighted(&d_cost, &run.noisy[v], &confidence_weights(&volume))?,
        };
        run.cost_summaries.push(volume.summary_csv());
        run.cost.push(d_cost);
        run.fused.push(fused);
    }
    if stage < Stage::Evaluate {
        return Ok(run);
    }
    let opts = EvalOptions {
        image_height: cfg.width / 2,
        ..EvalOptions::default()
    };
    let pseudo = run.pseudo.as_ref().expect("consensus ran");
    let pseudo_depths = pseudo.depths();
    let variants: [(&'static str, &[HorizonDepth], &[RatioValue]); 3] = [
        ("noisy", &run.noisy, &run.noisy_ratio),
        ("pseudo", &pseudo_depths, &run.pseudo_ratio),
        ("fused", &run.fused, &run.noisy_ratio),
    ];
    for (name, depths, ratios) in variants {
        let reports = (0..views)
            .map(|v| {
                evaluate(
                    &depths[v],
                    ratios[v],
                    &run.gt[v],
                    run.gt_ratio[v],
                    run.scene.poses[v].height(),
                    &grid,
                    &opts,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        run.metrics.push((name, reports));
    }
    for (name, depths) in [("noisy", &run.noisy), ("fused", &run.fused)] {
        let mut sum = LossParts::default();
        for v in 0..views {
            let label = &pseudo.labels[v];
            let p = loss_parts(
                &depths[v],
                run.noisy_ratio[v],
                &label.supervised_depth(),
                run.pseudo_ratio[v],
                &label.clamped_sigma(),
                &grid,
            )?;
            sum.ln += p.ln / views as f64;
            sum.lg += p.lg / views as f64;
            sum.ld += p.ld / views as f64;
            sum.lr += p.lr / views as f64;
        }
        run.losses.push((name, sum));
    }
    Ok(run)
}

/// Summary of a finished run.
#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub out_dir: PathBuf,
    pub rooms: Vec<RoomRun>,
    pub metrics_csv: String,
    pub losses_csv: String,
}

impl PipelineReport {
    /// Mean metrics of one variant over all rooms and views.
    pub fn mean(&self, variant: &str) -> Option<MetricReport> {
        let all: Vec<MetricReport> = self
            .rooms
            .iter()
            .flat_map(|r| r.metrics.iter().filter(|(n, _)| *n == variant).flat_map(|(_, m)| m.clone()))
            .collect();
        MetricReport::mean(&all)
    }
}

/// Writes `bytes` to a sibling temp file, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| LayoutError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn depth_record(d: &HorizonDepth, r: Option<RatioValue>) -> HorizonDepthRecord {
    let mut rec = d.to_record();
    rec.ratio = r.map(RatioValue::get);
    rec
}

fn world_outline(d: &HorizonDepth, pose: &CameraPose, grid: &LongitudeGrid) -> Result<Vec<Point2>> {
    Ok(boundary_polygon(d, pose.height(), grid)?
        .into_iter()
        .map(|p| pose.to_world(p))
        .collect())
}

fn floor_plan(run: &RoomRun, grid: &LongitudeGrid) -> Result<String> {
    let poses = &run.scene.poses;
    let outlines = |depths: &[HorizonDepth]| -> Result<Vec<Vec<Point2>>> {
        depths.iter().zip(poses).map(|(d, p)| world_outline(d, p, grid)).collect()
    };
    let mut plan = FloorPlan::new(format!("{} floor plan", run.name()))
        .layer("ground truth", "blue", 2.5, vec![run.scene.polygon.vertices().to_vec()]);
    if !run.noisy.is_empty() {
        plan = plan.layer("noisy", "gray", 0.6, outlines(&run.noisy)?);
    }
    if let Some(p) = &run.pseudo {
        plan = plan.layer("pseudo-label", "green", 0.8, outlines(&p.depths())?);
    }
    if !run.fused.is_empty() {
        plan = plan.layer("fused", "red", 0.8, outlines(&run.fused)?);
    }
    Ok(plan
        .markers(poses.iter().map(|p| p.translation()).collect())
        .to_svg(600.0))
}

fn write_room(run: &RoomRun, dir: &Path, grid: &LongitudeGrid) -> Result<()> {
    let room = dir.join(run.name());
    write_json(&room.join("scene.json"), &run.scene)?;
    let view = |kind: &str, v: usize| room.join(kind).join(format!("view{v:02}.json"));
    for (v, d) in run.gt.iter().enumerate() {
        write_json(&view("gt", v), &depth_record(d, Some(run.gt_ratio[v])))?;
    }
    for (v, d) in run.noisy.iter().enumerate() {
        write_json(&view("noisy", v), &depth_record(d, Some(run.noisy_ratio[v])))?;
    }
    if let Some(p) = &run.pseudo {
        for (v, l) in p.labels.iter().enumerate() {
            write_json(&view("pseudo", v), &depth_record(&l.depth, Some(run.pseudo_ratio[v])))?;
            write_json(&view("labels", v), &p.record(v))?;
        }
    }
    for (v, d) in run.fused.iter().enumerate() {
        write_json(&view("fused", v), &depth_record(d, Some(run.noisy_ratio[v])))?;
        write_atomic(
            &room.join("costvolume").join(format!("view{v:02}.csv")),
            run.cost_summaries[v].as_bytes(),
        )?;
    }
    if !run.gt.is_empty() {
        write_atomic(&room.join("floorplan.svg"), floor_plan(run, grid)?.as_bytes())?;
    }
    Ok(())
}

fn metrics_csv(rooms: &[RoomRun]) -> String {
    let mut out = String::from(MetricReport::CSV_HEADER);
    out.push('\n');
    for run in rooms {
        for (variant, reports) in &run.metrics {
            for (v, m) in reports.iter().enumerate() {
                out.push_str(&m.csv_row(&format!("{}:{variant}", run.name()), &v.to_string()));
                out.push('\n');
            }
        }
    }
    for variant in ["noisy", "pseudo", "fused"] {
        let all: Vec<MetricReport> = rooms
            .iter()
            .flat_map(|r| r.metrics.iter().filter(|(n, _)| *n == variant).flat_map(|(_, m)| m.clone()))
            .collect();
        if let Some(m) = MetricReport::mean(&all) {
            out.push_str(&m.csv_row(&format!("all:{variant}"), "mean"));
            out.push('\n');
        }
    }
    out
}

fn losses_csv(rooms: &[RoomRun], w: &LossWeights) -> String {
    let mut out = String::from("scenario,ln,lg,ld,lr,total\n");
    for run in rooms {
        for (variant, p) in &run.losses {
            out.push_str(&format!(
                "{}:{variant},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                run.name(),
                p.ln,
                p.lg,
                p.ld,
                p.lr,
                p.total(w)
            ));
        }
    }
    out
}

/// Runs every room up to `stage` and writes the artifacts under `cfg.outputs`.
pub fn run_stage(cfg: &ScenarioConfig, stage: Stage, threads: Option<usize>) -> Result<PipelineReport> {
    cfg.validate()?;
    let dir = cfg.outputs.clone();
    fs::create_dir_all(&dir).map_err(|source| LayoutError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let exec = Execution::Parallel;
    let rooms = with_threads(threads, || {
        map_range(exec, cfg.rooms, |r| run_room(cfg, r, stage, exec))
            .into_iter()
            .collect::<Result<Vec<_>>>()
    })?;
    let grid = cfg.grid();
    write_atomic(&dir.join("config.json"), format!("{}\n", cfg.to_json()).as_bytes())?;
    for run in &rooms {
        write_room(run, &dir, &grid)?;
    }
    let metrics = metrics_csv(&rooms);
    let losses = losses_csv(&rooms, &cfg.weights);
    if stage == Stage::Evaluate {
        write_atomic(&dir.join("metrics.csv"), metrics.as_bytes())?;
        write_atomic(&dir.join("losses.csv"), losses.as_bytes())?;
    }
    Ok(PipelineReport {
        out_dir: dir,
        rooms,
        metrics_csv: metrics,
        losses_csv: losses,
    })
}

/// Full run: every stage, metrics and losses.
pub fn run_pipeline(cfg: &ScenarioConfig, threads: Option<usize>) -> Result<PipelineReport> {
    run_stage(cfg, Stage::Evaluate, threads)
}

/// Result of comparing a prediction directory with a ground-truth directory.
#[derive(Debug, Clone)]
pub struct EvalSummary {
    pub rows: Vec<(String, MetricReport)>,
    pub skipped: Vec<String>,
    pub csv: String,
}

fn read_depth(path: &Path) -> Result<(HorizonDepth, Option<f64>)> {
    let text = fs::read_to_string(path).map_err(|source| LayoutError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let rec: HorizonDepthRecord = serde_json::from_str(&text)?;
    let ratio = rec.ratio;
    Ok((HorizonDepth::try_from(rec)?, ratio))
}

fn json_files(dir: &Path) -> Result<Vec<String>> {
    let entries = fs::read_dir(dir).map_err(|source| LayoutError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n.ends_with(".json"))
        .collect();
    names.sort();
    Ok(names)
}

/// Scores every prediction file against the same-named ground-truth file.
///
/// Depths are read in camera-height units; corner tolerance assumes the
/// default camera height. A prediction without a ratio borrows the ground
/// truth's, and ground truth without a ratio is skipped. Writes
/// `metrics.csv` into `out` with one row per matched file and a mean row.
pub fn eval_command(pred_dir: &Path, gt_dir: &Path, out: &Path) -> Result<EvalSummary> {
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for name in json_files(pred_dir)? {
        let gt_path = gt_dir.join(&name);
        if !gt_path.is_file() {
            log::warn!("no ground truth for {name}, skipping");
            skipped.push(name);
            continue;
        }
        let (pred, pred_ratio) = read_depth(&pred_dir.join(&name))?;
        let (gt, gt_ratio) = read_depth(&gt_path)?;
        let Some(gt_ratio) = gt_ratio else {
            log::warn!("ground truth {name} has no ratio, skipping");
            skipped.push(name);
            continue;
        };
        let grid = LongitudeGrid::new(gt.width())?;
        let r_gt = RatioValue::new(gt_ratio)?;
        let r_pred = RatioValue::new(pred_ratio.unwrap_or(gt_ratio))?;
        let opts = EvalOptions {
            image_height: gt.width() / 2,
            ..EvalOptions::default()
        };
        let m = evaluate(&pred, r_pred, &gt, r_gt, DEFAULT_CAMERA_HEIGHT, &grid, &opts)?;
        rows.push((name.trim_end_matches(".json").to_owned(), m));
    }
    if rows.is_empty() {
        return Err(LayoutError::EmptyInput(format!(
            "no prediction in {} matches a file in {}",
            pred_dir.display(),
            gt_dir.display()
        )));
    }
    let mut csv = String::from(MetricReport::CSV_HEADER);
    csv.push('\n');
    for (name, m) in &rows {
        csv.push_str(&m.csv_row(name, "0"));
        csv.push('\n');
    }
    let reports: Vec<MetricReport> = rows.iter().map(|r| r.1).collect();
    let mean = MetricReport::mean(&reports).expect("non-empty");
    csv.push_str(&mean.csv_row("mean", "all"));
    csv.push('\n');
    write_atomic(&out.join("metrics.csv"), csv.as_bytes())?;
    Ok(EvalSummary { rows, skipped, csv })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_a_minimal_config() {
        let cfg = ScenarioConfig::from_json(r#"{"seed": 3}"#).unwrap();
        assert_eq!(cfg, ScenarioConfig::with_seed(3));
        assert_eq!(cfg.view_count, 8);
        assert_eq!(cfg.cost_volume.d_max, DMax::Auto);
        let back = ScenarioConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_report_their_path() {
        let err = ScenarioConfig::from_json(r#"{"seed": 1, "costVolume": {"planez": 3}}"#).unwrap_err();
        match err {
            LayoutError::Config { path, .. } => assert_eq!(path, "costVolume.planez"),
            other => panic!("unexpected {other:?}"),
        }
        let err = ScenarioConfig::from_json(r#"{"seed": 1, "noise": {"sigma": 3}}"#).unwrap_err();
        assert!(matches!(err, LayoutError::Config { ref path, .. } if path.starts_with("noise")));
        assert!(ScenarioConfig::from_json(r#"{"seed": 1, "bogus": true}"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{"seed": 1, "consensus": {"bogus": 1}}"#).is_err());
    }

    #[test]
    fn semantic_errors_are_config_errors() {
        let err = ScenarioConfig::from_json(r#"{"seed": 1, "viewCount": 1}"#).unwrap_err();
        assert!(matches!(err, LayoutError::Config { ref path, .. } if path == "viewCount"));
        let err = ScenarioConfig::from_json(r#"{"seed": 1, "costVolume": {"alpha": 2}}"#).unwrap_err();
        assert!(matches!(err, LayoutError::Config { ref path, .. } if path == "costVolume.alpha"));
    }

    #[test]
    fn d_max_accepts_auto_or_meters() {
        let cfg = ScenarioConfig::from_json(r#"{"seed": 1, "costVolume": {"dMax": 12.5}}"#).unwrap();
        assert_eq!(cfg.cost_volume.d_max, DMax::Meters(12.5));
        let cfg = ScenarioConfig::from_json(r#"{"seed": 1, "costVolume": {"dMax": "auto"}}"#).unwrap();
        assert_eq!(cfg.cost_volume.d_max, DMax::Auto);
        assert!(ScenarioConfig::from_json(r#"{"seed": 1, "costVolume": {"dMax": "big"}}"#).is_err());
        assert!(cfg.to_json().contains(r#""dMax": "auto""#));
    }

    #[test]
    fn ratio_consensus_recovers_shared_room_height() {
        let poses = [
            CameraPose::new(0.0, [0.0, 0.0], 1.5).unwrap(),
            CameraPose::new(0.0, [1.0, 0.0], 1.7).unwrap(),
            CameraPose::new(0.0, [0.0, 1.0], 1.6).unwrap(),
        ];
        let ratios: Vec<RatioValue> = poses
            .iter()
            .map(|p| RatioValue::from_heights(2.8, p.height()).unwrap())
            .collect();
        let out = consensus_ratios(&ratios, &poses).unwrap();
        for (a, b) in out.iter().zip(&ratios) {
            assert!((a.get() - b.get()).abs() < 1e-12);
        }
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.txt");
        write_atomic(&p, b"x").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"x");
        assert!(!dir.path().join("a/b.txt.tmp").exists());
    }
}
