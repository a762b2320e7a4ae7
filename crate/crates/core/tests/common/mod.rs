#![allow(dead_code)]

use mvlayout::simulator::{corrupt, generate_room, place_cameras, NoiseSpec, PlacementSpec, RoomScene, RoomSpec};
use mvlayout::{Execution, HorizonDepth, LongitudeGrid};

/// Seeded room with `views` cameras.
pub fn room(spec: &RoomSpec, seed: u64, views: usize) -> RoomScene {
    let mut scene = generate_room(spec, seed).unwrap();
    scene.poses = place_cameras(&scene, &PlacementSpec::new(views), seed).unwrap();
    scene
}

pub fn four_corner() -> RoomSpec {
    RoomSpec {
        corner_count: (4, 4),
        ..RoomSpec::default()
    }
}

pub fn render(scene: &RoomScene, grid: &LongitudeGrid) -> Vec<HorizonDepth> {
    scene.render_views(grid, Execution::Sequential).unwrap()
}

pub fn noisy(gt: &[HorizonDepth], sigma: f64, seed: u64) -> Vec<HorizonDepth> {
    gt.iter()
        .enumerate()
        .map(|(v, d)| corrupt(d, &NoiseSpec::multiplicative(sigma), seed * 1000 + v as u64).unwrap())
        .collect()
}
