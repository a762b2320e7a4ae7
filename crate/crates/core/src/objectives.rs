//! Scalar training objectives: segmentation BCE, σ-weighted layout losses
//! against pseudo-labels, and the ceiling-3D ratio loss.
//!
//! Nothing here trains; the functions score a prediction against a target so
//! the pipeline can report the fine-tuning objective per scenario.

use serde::{Deserialize, Serialize};

use crate::consensus::SIGMA_FLOOR;
use crate::error::{invalid, Result};
use crate::geometry::{ceiling_points, depth_to_points, HorizonDepth, LongitudeGrid, Point2, RatioValue};

const BCE_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct LossWeights {
    pub mu: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            mu: 0.75,
            lambda1: 0.1,
            lambda2: 0.9,
            lambda3: 0.08,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mu", self.mu),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("loss weight {name} must be ≥ 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Binary cross-entropy, predictions clamped away from 0 and 1.
pub fn bce(pred: &[f64], gt: &[f64]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(invalid(format!("bce: {} predictions vs {} targets", pred.len(), gt.len())));
    }
    if pred.is_empty() {
        return Err(invalid("bce of an empty sequence"));
    }
    let sum: f64 = pred
        .iter()
        .zip(gt)
        .map(|(&p, &g)| {
            let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
            g * p.ln() + (1.0 - g) * (1.0 - p).ln()
        })
        .sum();
    Ok(-sum / pred.len() as f64)
}

pub fn pretrain_loss(l_seg: f64, l_lay: f64, w: &LossWeights) -> f64 {
    w.mu * l_seg + l_lay
}

/// `x / max(σ, floor)²` element-wise.
pub fn sigma_weight(x: &[f64], sigma: &[f64], floor: f64) -> Result<Vec<f64>> {
    if x.len() != sigma.len() {
        return Err(invalid(format!("{} values vs {} sigmas", x.len(), sigma.len())));
    }
    Ok(x.iter().zip(sigma).map(|(v, s)| v / s.max(floor).powi(2)).collect())
}

fn inverse_variance(sigma: &[f64]) -> Vec<f64> {
    sigma.iter().map(|s| 1.0 / s.max(SIGMA_FLOOR).powi(2)).collect()
}

fn shared_mask(d: &HorizonDepth, d_hat: &HorizonDepth, sigma: &[f64]) -> Result<Vec<bool>> {
    if d.width() != d_hat.width() || sigma.len() != d.width() {
        return Err(invalid(format!(
            "widths differ: {}, {} and {} sigmas",
            d.width(),
            d_hat.width(),
            sigma.len()
        )));
    }
    let mask: Vec<bool> = (0..d.width()).map(|i| d.is_valid(i) && d_hat.is_valid(i)).collect();
    if !mask.iter().any(|&m| m) {
        return Err(invalid("prediction and target share no valid column"));
    }
    Ok(mask)
}

/// L1 distance between σ²-weighted depths, averaged over shared valid columns.
pub fn weighted_depth_loss(d: &HorizonDepth, d_hat: &HorizonDepth, sigma: &[f64]) -> Result<f64> {
    let mask = shared_mask(d, d_hat, sigma)?;
    let w = inverse_variance(sigma);
    let (mut sum, mut n) = (0.0, 0usize);
    for i in (0..d.width()).filter(|&i| mask[i]) {
        sum += (d.depths()[i] * w[i] - d_hat.depths()[i] * w[i]).abs();
        n += 1;
    }
    Ok(sum / n as f64)
}

/// Unit normal of the floor segment `a → b`, `None` when degenerate.
fn segment_normal(a: Point2, b: Point2) -> Option<Point2> {
    let e = [b[0] - a[0], b[1] - a[1]];
    let len = e[0].hypot(e[1]);
    (len > 1e-12).then(|| [e[1] / len, -e[0] / len])
}

/// Per-segment normals of prediction and target. Segment `i` joins columns `i` and `i + 1`.
fn paired_normals(
    d: &HorizonDepth,
    d_hat: &HorizonDepth,
    mask: &[bool],
    grid: &LongitudeGrid,
) -> Result<Vec<Option<(Point2, Point2)>>> {
    let w = d.width();
    let has_run = (0..w).any(|i| mask[i] && mask[(i + 1) % w] && mask[(i + 2) % w]);
    if !has_run {
        return Err(invalid("normal losses need 3 consecutive valid columns"));
    }
    let p = depth_to_points(d, grid)?;
    let q = depth_to_points(d_hat, grid)?;
    let flat = |p: [f64; 3]| [p[0], p[2]];
    Ok((0..w)
        .map(|i| {
            let j = (i + 1) % w;
            if !(mask[i] && mask[j]) {
                return None;
            }
            let n = segment_normal(flat(p.points[i]), flat(p.points[j]));
            let m = segment_normal(flat(q.points[i]), flat(q.points[j]));
            match (n, m) {
                (Some(n), Some(m)) => Some((n, m)),
                _ => {
                    log::debug!("skipping zero-length boundary segment at column {i}");
                    None
                }
            }
        })
        .collect())
}

/// σ-weighted cosine dissimilarity of boundary normals.
pub fn normal_loss(d: &HorizonDepth, d_hat: &HorizonDepth, sigma: &[f64], grid: &LongitudeGrid) -> Result<f64> {
    let mask = shared_mask(d, d_hat, sigma)?;
    let normals = paired_normals(d, d_hat, &mask, grid)?;
    let w = inverse_variance(sigma);
    let (mut sum, mut n) = (0.0, 0usize);
    for (i, pair) in normals.iter().enumerate() {
        if let Some((a, b)) = pair {
            // 1 − ⟨a, b⟩ for unit vectors, exact zero when a == b
            sum += w[i] * 0.5 * ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2));
            n += 1;
        }
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

fn turn_angle(a: Point2, b: Point2) -> f64 {
    (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1])
}

/// σ-weighted L1 difference of the turning angle between adjacent normals.
pub fn normal_gradient_loss(
    d: &HorizonDepth,
    d_hat: &HorizonDepth,
    sigma: &[f64],
    grid: &LongitudeGrid,
) -> Result<f64> {
    let mask = shared_mask(d, d_hat, sigma)?;
    let normals = paired_normals(d, d_hat, &mask, grid)?;
    let w = inverse_variance(sigma);
    let width = d.width();
    let (mut sum, mut n) = (0.0, 0usize);
    for i in 0..width {
        let j = (i + 1) % width;
        if let (Some((a, a_hat)), Some((b, b_hat))) = (normals[i], normals[j]) {
            // the shared column of both segments carries the weight
            sum += w[j] * (turn_angle(a, b) - turn_angle(a_hat, b_hat)).abs();
            n += 1;
        }
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// Ratio loss on ceiling boundary points: `(1/3N) Σ_axes Σ_cols |Δ| / σ²`.
pub fn ceiling3d_loss(
    d: &HorizonDepth,
    r_pred: RatioValue,
    d_pseudo: &HorizonDepth,
    r_pseudo: RatioValue,
    sigma: &[f64],
    grid: &LongitudeGrid,
) -> Result<f64> {
    let mask = shared_mask(d, d_pseudo, sigma)?;
    let p = ceiling_points(&depth_to_points(d, grid)?, r_pred)?;
    let q = ceiling_points(&depth_to_points(d_pseudo, grid)?, r_pseudo)?;
    let w = inverse_variance(sigma);
    let (mut sum, mut n) = (0.0, 0usize);
    for i in (0..d.width()).filter(|&i| mask[i]) {
        sum += (0..3).map(|k| (p.points[i][k] - q.points[i][k]).abs()).sum::<f64>() * w[i];
        n += 1;
    }
    Ok(sum / (3 * n) as f64)
}

/// Components of the fine-tuning objective.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub ln: f64,
    pub lg: f64,
    pub ld: f64,
    pub lr: f64,
}

impl LossParts {
    pub fn total(&self, w: &LossWeights) -> f64 {
        finetune_loss(self, w)
    }
}

pub fn finetune_loss(parts: &LossParts, w: &LossWeights) -> f64 {
    w.lambda1 * (parts.ln + parts.lg) + (w.lambda2 * parts.ld + w.lambda3 * parts.lr)
}

/// All four fine-tuning terms of a prediction against a pseudo-label.
pub fn loss_parts(
    d: &HorizonDepth,
    r_pred: RatioValue,
    d_pseudo: &HorizonDepth,
    r_pseudo: RatioValue,
    sigma: &[f64],
    grid: &LongitudeGrid,
) -> Result<LossParts> {
    Ok(LossParts {
        ln: normal_loss(d, d_pseudo, sigma, grid)?,
        lg: normal_gradient_loss(d, d_pseudo, sigma, grid)?,
        ld: weighted_depth_loss(d, d_pseudo, sigma)?,
        lr: ceiling3d_loss(d, r_pred, d_pseudo, r_pseudo, sigma, grid)?,
    })
}

/// Supervised layout loss: the fine-tuning combination with unit σ.
pub fn layout_loss(
    d: &HorizonDepth,
    r_pred: RatioValue,
    d_gt: &HorizonDepth,
    r_gt: RatioValue,
    grid: &LongitudeGrid,
    w: &LossWeights,
) -> Result<f64> {
    let ones = vec![1.0; d.width()];
    Ok(loss_parts(d, r_pred, d_gt, r_gt, &ones, grid)?.total(w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(w: usize) -> LongitudeGrid {
        LongitudeGrid::new(w).unwrap()
    }

    fn square(w: usize, half: f64) -> HorizonDepth {
        let g = grid(w);
        HorizonDepth::from_depths(
            g.angles()
                .iter()
                .map(|t| half / t.sin().abs().max(t.cos().abs()))
                .collect(),
        )
        .unwrap()
    }

    fn r(v: f64) -> RatioValue {
        RatioValue::new(v).unwrap()
    }

    #[test]
    fn bce_examples() {
        assert_relative_eq!(bce(&[0.5; 4], &[1.0, 0.0, 1.0, 0.0]).unwrap(), 2f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(bce(&[0.9], &[1.0]).unwrap(), -(0.9f64.ln()), epsilon = 1e-12);
        assert_relative_eq!(bce(&[0.9], &[1.0]).unwrap(), 0.105_360_515_657_826_3, epsilon = 1e-12);
        let perfect = bce(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!(perfect > 0.0 && perfect < 2e-7);
        assert!(bce(&[0.5], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn weight_constants() {
        let w = LossWeights::default();
        assert_eq!(pretrain_loss(0.0, 0.3, &w), 0.3);
        assert_eq!(pretrain_loss(1.0, 0.0, &w), 0.75);
        assert_relative_eq!(
            pretrain_loss(2.0, 0.5, &w) - pretrain_loss(1.0, 0.5, &w),
            pretrain_loss(1.0, 0.5, &w) - pretrain_loss(0.0, 0.5, &w)
        );
        let ones = LossParts {
            ln: 1.0,
            lg: 1.0,
            ld: 1.0,
            lr: 1.0,
        };
        assert_eq!(finetune_loss(&ones, &w), 1.18);
        assert_eq!(finetune_loss(&LossParts::default(), &w), 0.0);
        assert!(LossWeights { mu: -1.0, ..w }.validate().is_err());
    }

    #[test]
    fn sigma_weight_examples() {
        assert_eq!(sigma_weight(&[1.0, 2.0], &[1.0, 1.0], 1e-3).unwrap(), vec![1.0, 2.0]);
        assert_eq!(sigma_weight(&[4.0], &[2.0], 1e-3).unwrap(), vec![1.0]);
        let z = sigma_weight(&[1.0], &[0.0], 1e-3).unwrap()[0];
        assert!(z.is_finite());
        assert_relative_eq!(z, 1e6, max_relative = 1e-12);
        assert!(sigma_weight(&[1.0], &[], 1e-3).is_err());
    }

    #[test]
    fn depth_loss_examples() {
        let d = square(64, 1.0);
        let ones = vec![1.0; 64];
        assert_eq!(weighted_depth_loss(&d, &d, &ones).unwrap(), 0.0);
        let shifted = HorizonDepth::from_depths(d.depths().iter().map(|v| v + 0.3).collect()).unwrap();
        assert_relative_eq!(weighted_depth_loss(&shifted, &d, &ones).unwrap(), 0.3, epsilon = 1e-12);
        let twos = vec![2.0; 64];
        assert_relative_eq!(
            weighted_depth_loss(&shifted, &d, &twos).unwrap(),
            0.3 / 4.0,
            epsilon = 1e-12
        );
        let none = HorizonDepth::all_invalid(64);
        assert!(weighted_depth_loss(&d, &none, &ones).is_err());
    }

    #[test]
    fn normal_losses_examples() {
        let g = grid(128);
        let d = square(128, 1.0);
        let ones = vec![1.0; 128];
        assert_eq!(normal_loss(&d, &d, &ones, &g).unwrap(), 0.0);
        assert_eq!(normal_gradient_loss(&d, &d, &ones, &g).unwrap(), 0.0);

        let big = d.scaled(2.0);
        assert!(normal_loss(&big, &d, &ones, &g).unwrap() < 1e-12);
        assert!(normal_gradient_loss(&big, &d, &ones, &g).unwrap() < 1e-12);
        assert!(weighted_depth_loss(&big, &d, &ones).unwrap() > 0.0);

        let rect = HorizonDepth::from_depths(
            g.angles()
                .iter()
                .map(|t| (1.0 / t.sin().abs()).min(2.0 / t.cos().abs()))
                .collect(),
        )
        .unwrap();
        let ln = normal_loss(&rect, &d, &ones, &g).unwrap();
        let lg = normal_gradient_loss(&rect, &d, &ones, &g).unwrap();
        assert!(ln > 0.0 && lg > 0.0);
        assert_relative_eq!(normal_loss(&rect.shifted(17), &d.shifted(17), &ones, &g).unwrap(), ln, epsilon = 1e-12);
        assert_relative_eq!(
            normal_gradient_loss(&rect.shifted(17), &d.shifted(17), &ones, &g).unwrap(),
            lg,
            epsilon = 1e-12
        );
    }

    #[test]
    fn normal_losses_need_a_run_of_three() {
        let g = grid(8);
        let mut valid = vec![false; 8];
        valid[2] = true;
        valid[3] = true;
        let d = HorizonDepth::new(vec![1.0; 8], valid).unwrap();
        assert!(normal_loss(&d, &d, &[1.0; 8], &g).is_err());
        assert!(normal_gradient_loss(&d, &d, &[1.0; 8], &g).is_err());
    }

    #[test]
    fn ceiling_examples() {
        let g = grid(32);
        let d = square(32, 1.5);
        let ones = vec![1.0; 32];
        assert_eq!(ceiling3d_loss(&d, r(0.8), &d, r(0.8), &ones, &g).unwrap(), 0.0);
        assert_relative_eq!(
            ceiling3d_loss(&d, r(1.0), &d, r(0.5), &ones, &g).unwrap(),
            0.5 / 3.0,
            epsilon = 1e-12
        );
        let mut last = 0.0;
        for k in 0..10 {
            let l = ceiling3d_loss(&d, r(0.5 + 0.1 * k as f64), &d, r(0.5), &ones, &g).unwrap();
            assert!(l >= last);
            last = l;
        }
        let halves = vec![0.5; 32];
        assert_relative_eq!(
            ceiling3d_loss(&d, r(1.0), &d, r(0.5), &halves, &g).unwrap(),
            4.0 * 0.5 / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn layout_loss_is_zero_on_target() {
        let g = grid(64);
        let d = square(64, 1.2);
        let w = LossWeights::default();
        assert_eq!(layout_loss(&d, r(0.7), &d, r(0.7), &g, &w).unwrap(), 0.0);
        assert!(layout_loss(&d.scaled(1.1), r(0.7), &d, r(0.7), &g, &w).unwrap() > 0.0);
    }
}
