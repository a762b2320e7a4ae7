mod common;

use common::{noisy, render, room};
use mvlayout::cost_volume::{
    align_points, build_cost_volume_with, extract_depth, fuse_depth, synth_features, CostVolume, DepthPlanes,
    FeatureMode,
};
use mvlayout::simulator::{RoomScene, RoomSpec};
use mvlayout::{Execution, HorizonDepth, LongitudeGrid};
use proptest::prelude::*;

fn volume(scene: &RoomScene, depths: &[HorizonDepth], grid: &LongitudeGrid, mode: FeatureMode) -> (CostVolume, DepthPlanes) {
    let planes = DepthPlanes::for_scene(64, scene).unwrap();
    let features = synth_features(scene, grid, 4, mode, scene.seed).unwrap();
    let aligned = align_points(depths, &scene.poses, 0, grid).unwrap();
    let h = scene.poses[0].height();
    (build_cost_volume_with(&features, &aligned, &planes, grid, h, Execution::Sequential).unwrap(), planes)
}

/// Min and max true depth (meters) inside each column's wedge, from a finer render of view 0.
fn wedge_ranges(scene: &RoomScene, grid: &LongitudeGrid, sub: usize) -> Vec<(f64, f64)> {
    let fine = LongitudeGrid::new(grid.width() * sub).unwrap();
    let h = scene.poses[0].height();
    let d = mvlayout::simulator::render_depth(&scene.polygon, &scene.poses[0], &fine).unwrap();
    d.depths()
        .chunks(sub)
        .map(|c| {
            let lo = c.iter().cloned().fold(f64::INFINITY, f64::min) * h;
            let hi = c.iter().cloned().fold(0.0, f64::max) * h;
            (lo, hi)
        })
        .collect()
}

// Compared with the depth at the column center, extraction can miss by more
// than half a plane: at grazing angles the wall's depth varies across one
// column by more than a plane width. The plane center is always within half a
// plane of some true depth inside the column's wedge.
#[test]
fn noiseless_extraction_is_within_half_a_plane_of_the_wedge() {
    let grid = LongitudeGrid::new(512).unwrap();
    for spec in [RoomSpec::default(), common::four_corner()] {
        for seed in 0..10 {
            let scene = room(&spec, seed, 6);
            let gt = render(&scene, &grid);
            let (c, planes) = volume(&scene, &gt, &grid, FeatureMode::Geometric);
            let d = extract_depth(&c, &planes).unwrap();
            let h = scene.poses[0].height();
            let wedges = wedge_ranges(&scene, &grid, 32);
            let width = planes.plane_width();
            for i in 0..grid.width() {
                let Some((k, _)) = c.argmin(i) else { continue };
                if c.contributors(i, k) < 2 {
                    continue;
                }
                let got = d.get(i).unwrap() * h;
                let (lo, hi) = wedges[i];
                assert!(got >= lo - 0.5 * width - 1e-9 && got <= hi + 0.5 * width + 1e-9,
                    "seed {seed} column {i}: {got} outside [{lo}, {hi}] ± {}", 0.5 * width);
                let center = gt[0].get(i).unwrap() * h;
                assert!((got - center).abs() < width, "seed {seed} column {i}");
            }
        }
    }
}

fn assert_cells_sound(c: &CostVolume) {
    for ch in 0..c.channels() {
        for i in 0..c.width() {
            for k in 0..c.planes() {
                let v = c.cost(ch, i, k);
                if c.contributors(i, k) == 0 {
                    assert_eq!(v, f64::INFINITY);
                } else {
                    assert!(v >= 0.0 && v.is_finite());
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn cells_are_nonnegative_and_empty_cells_infinite(seed in 0u64..500, sigma in 0.0f64..0.1, fs in 0.0f64..0.5) {
        let grid = LongitudeGrid::new(256).unwrap();
        let scene = room(&RoomSpec::default(), seed, 4);
        let inputs = noisy(&render(&scene, &grid), sigma, seed);
        let mode = if fs > 0.0 { FeatureMode::Random { sigma: fs } } else { FeatureMode::Geometric };
        let (c, _) = volume(&scene, &inputs, &grid, mode);
        assert_cells_sound(&c);
    }

    #[test]
    fn reordering_source_views_leaves_the_volume_unchanged(seed in 0u64..500, rot in 1usize..4) {
        let grid = LongitudeGrid::new(256).unwrap();
        let scene = room(&RoomSpec::default(), seed, 4);
        let inputs = noisy(&render(&scene, &grid), 0.03, seed);
        let planes = DepthPlanes::for_scene(64, &scene).unwrap();
        let features = synth_features(&scene, &grid, 3, FeatureMode::Random { sigma: 0.1 }, seed).unwrap();
        let aligned = align_points(&inputs, &scene.poses, 0, &grid).unwrap();
        let h = scene.poses[0].height();
        let base = build_cost_volume_with(&features, &aligned, &planes, &grid, h, Execution::Sequential).unwrap();

        // keep the reference first, rotate the others
        let order: Vec<usize> = std::iter::once(0).chain((0..3).map(|j| 1 + (j + rot) % 3)).collect();
        let f: Vec<_> = order.iter().map(|&v| features[v].clone()).collect();
        let a: Vec<_> = order.iter().map(|&v| aligned[v].clone()).collect();
        let perm = build_cost_volume_with(&f, &a, &planes, &grid, h, Execution::Sequential).unwrap();
        for ch in 0..3 {
            for i in 0..grid.width() {
                for k in 0..64 {
                    prop_assert_eq!(base.contributors(i, k), perm.contributors(i, k));
                    let (x, y) = (base.cost(ch, i, k), perm.cost(ch, i, k));
                    if x.is_finite() {
                        prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{} vs {}", x, y);
                    } else {
                        prop_assert_eq!(x, y);
                    }
                }
            }
        }
    }

    #[test]
    fn fusion_stays_between_its_inputs(
        a in proptest::collection::vec(0.1f64..20.0, 8),
        b in proptest::collection::vec(0.1f64..20.0, 8),
        alpha in 0.0f64..=1.0,
    ) {
        let dc = HorizonDepth::from_depths(a.clone()).unwrap();
        let d = HorizonDepth::from_depths(b.clone()).unwrap();
        let f = fuse_depth(&dc, &d, alpha).unwrap();
        for i in 0..8 {
            let v = f.get(i).unwrap();
            prop_assert!(v >= a[i].min(b[i]) && v <= a[i].max(b[i]));
        }
    }
}

#[test]
fn variance_is_zero_exactly_where_views_agree() {
    let grid = LongitudeGrid::new(256).unwrap();
    let mut scene = room(&RoomSpec::default(), 7, 1);
    scene.poses = vec![scene.poses[0]; 3];
    let gt = render(&scene, &grid);
    let (c, _) = volume(&scene, &gt, &grid, FeatureMode::Geometric);
    let mut cells = 0;
    for i in 0..grid.width() {
        for k in 0..c.planes() {
            if c.contributors(i, k) > 0 {
                cells += 1;
                assert_eq!(c.contributors(i, k), 3);
                for ch in 0..c.channels() {
                    assert_eq!(c.cost(ch, i, k), 0.0);
                }
            }
        }
    }
    assert!(cells >= grid.width());

    // one view's features perturbed: every cell it shares becomes positive
    let planes = DepthPlanes::for_scene(64, &scene).unwrap();
    let mut features = synth_features(&scene, &grid, 2, FeatureMode::Geometric, 0).unwrap();
    features[2] = synth_features(&scene, &grid, 2, FeatureMode::Random { sigma: 0.2 }, 1).unwrap().remove(2);
    let aligned = align_points(&gt, &scene.poses, 0, &grid).unwrap();
    let c = build_cost_volume_with(&features, &aligned, &planes, &grid, scene.poses[0].height(), Execution::Sequential).unwrap();
    for i in 0..grid.width() {
        for k in 0..c.planes() {
            if c.contributors(i, k) == 3 {
                assert!((0..2).all(|ch| c.cost(ch, i, k) > 0.0));
            }
        }
    }
}

#[test]
fn sequential_and_parallel_agree_bitwise() {
    let grid = LongitudeGrid::new(512).unwrap();
    let scene = room(&RoomSpec::default(), 9, 6);
    let inputs = noisy(&render(&scene, &grid), 0.05, 9);
    let planes = DepthPlanes::for_scene(64, &scene).unwrap();
    let features = synth_features(&scene, &grid, 4, FeatureMode::Geometric, 0).unwrap();
    let aligned = align_points(&inputs, &scene.poses, 0, &grid).unwrap();
    let h = scene.poses[0].height();
    let a = build_cost_volume_with(&features, &aligned, &planes, &grid, h, Execution::Sequential).unwrap();
    let b = build_cost_volume_with(&features, &aligned, &planes, &grid, h, Execution::Parallel).unwrap();
    assert_eq!(a.summary_csv(), b.summary_csv());
    assert_eq!(extract_depth(&a, &planes).unwrap(), extract_depth(&b, &planes).unwrap());
}
