//! Planar polygon primitives: area, containment, ray casting and scanline coverage.
//!
//! Polygons are vertex slices, implicitly closed.

use crate::geometry::Point2;

const PARALLEL_EPS: f64 = 1e-12;

fn cross(a: Point2, b: Point2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn sub(a: Point2, b: Point2) -> Point2 {
    [a[0] - b[0], a[1] - b[1]]
}

/// Iterator over closed-polygon edges `(a, b)`.
pub fn edges(poly: &[Point2]) -> impl Iterator<Item = (Point2, Point2)> + '_ {
    let n = poly.len();
    (0..n).map(move |i| (poly[i], poly[(i + 1) % n]))
}

/// Signed shoelace area; positive for counter-clockwise order in `(x, z)`.
pub fn signed_area(poly: &[Point2]) -> f64 {
    0.5 * edges(poly).map(|(a, b)| cross(a, b)).sum::<f64>()
}

pub fn area(poly: &[Point2]) -> f64 {
    signed_area(poly).abs()
}

/// Area centroid. Falls back to the vertex mean for degenerate polygons.
pub fn centroid(poly: &[Point2]) -> Point2 {
    let a = signed_area(poly);
    if a.abs() < 1e-15 {
        let n = poly.len() as f64;
        let sx: f64 = poly.iter().map(|p| p[0]).sum();
        let sz: f64 = poly.iter().map(|p| p[1]).sum();
        return [sx / n, sz / n];
    }
    let (mut cx, mut cz) = (0.0, 0.0);
    for (p, q) in edges(poly) {
        let c = cross(p, q);
        cx += (p[0] + q[0]) * c;
        cz += (p[1] + q[1]) * c;
    }
    [cx / (6.0 * a), cz / (6.0 * a)]
}

/// Crossing-number point-in-polygon test. Boundary points may go either way.
pub fn contains(poly: &[Point2], p: Point2) -> bool {
    let mut inside = false;
    for (a, b) in edges(poly) {
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

pub fn distance_to_segment(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    (p[0] - q[0]).hypot(p[1] - q[1])
}

pub fn distance_to_boundary(poly: &[Point2], p: Point2) -> f64 {
    edges(poly)
        .map(|(a, b)| distance_to_segment(p, a, b))
        .fold(f64::INFINITY, f64::min)
}

/// Ray parameter `t > 0` where `origin + t·dir` meets segment `[a, b]`, if any.
///
/// Rays parallel to the segment (|dir × (b − a)| < 1e-12) never hit it; the
/// adjacent edges report the same parameter at a shared vertex.
pub fn ray_segment_hit(origin: Point2, dir: Point2, a: Point2, b: Point2) -> Option<f64> {
    let e = sub(b, a);
    let denom = cross(dir, e);
    if denom.abs() < PARALLEL_EPS {
        return None;
    }
    let ao = sub(a, origin);
    let t = cross(ao, e) / denom;
    let u = cross(ao, dir) / denom;
    (t > 0.0 && (0.0..=1.0).contains(&u)).then_some(t)
}

/// Nearest positive ray hit against all polygon edges.
pub fn ray_cast(poly: &[Point2], origin: Point2, dir: Point2) -> Option<f64> {
    edges(poly)
        .filter_map(|(a, b)| ray_segment_hit(origin, dir, a, b))
        .reduce(f64::min)
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    cross(sub(b, a), sub(c, a))
}

/// True when the closed segments `[p1, p2]` and `[q1, q2]` intersect properly
/// (crossing interiors) or touch collinearly.
pub fn segments_intersect(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |a: Point2, b: Point2, p: Point2| {
        p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
    };
    (d1 == 0.0 && on(q1, q2, p1))
        || (d2 == 0.0 && on(q1, q2, p2))
        || (d3 == 0.0 && on(p1, p2, q1))
        || (d4 == 0.0 && on(p1, p2, q2))
}

/// No two non-adjacent edges intersect and no vertex repeats.
pub fn is_simple(poly: &[Point2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if poly[i] == poly[j] {
                return false;
            }
        }
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Axis-aligned bounding box `(min, max)`.
pub fn bounds(poly: &[Point2]) -> (Point2, Point2) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in poly {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

/// Sorted, merged interior intervals of `poly` along the horizontal line `z`.
pub fn scanline_intervals(poly: &[Point2], z: f64) -> Vec<(f64, f64)> {
    let mut xs: Vec<f64> = edges(poly)
        .filter(|(a, b)| (a[1] > z) != (b[1] > z))
        .map(|(a, b)| a[0] + (z - a[1]) / (b[1] - a[1]) * (b[0] - a[0]))
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.chunks_exact(2).map(|c| (c[0], c[1])).collect()
}

/// Total length of the intersection of two sorted disjoint interval lists.
pub fn intersection_length(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (mut i, mut j, mut total) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if hi > lo {
            total += hi - lo;
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

pub fn total_length(a: &[(f64, f64)]) -> f64 {
    a.iter().map(|(lo, hi)| hi - lo).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x0: f64, z0: f64, s: f64) -> Vec<Point2> {
        vec![[x0, z0], [x0 + s, z0], [x0 + s, z0 + s], [x0, z0 + s]]
    }

    #[test]
    fn area_and_centroid() {
        let sq = square(1.0, 2.0, 2.0);
        assert_eq!(signed_area(&sq), 4.0);
        assert_eq!(centroid(&sq), [2.0, 3.0]);
        let mut cw = sq.clone();
        cw.reverse();
        assert_eq!(signed_area(&cw), -4.0);
    }

    #[test]
    fn containment() {
        let sq = square(0.0, 0.0, 1.0);
        assert!(contains(&sq, [0.5, 0.5]));
        assert!(!contains(&sq, [1.5, 0.5]));
        assert!((distance_to_boundary(&sq, [0.5, 0.25]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ray_hits_nearest_edge() {
        let sq = square(-2.0, -2.0, 4.0);
        assert_eq!(ray_cast(&sq, [0.0, 0.0], [0.0, 1.0]), Some(2.0));
        let d = std::f64::consts::FRAC_1_SQRT_2;
        let t = ray_cast(&sq, [0.0, 0.0], [d, d]).unwrap();
        assert!((t - 8f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn simplicity() {
        assert!(is_simple(&square(0.0, 0.0, 1.0)));
        let bowtie = vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(!is_simple(&bowtie));
    }

    #[test]
    fn scanline_coverage() {
        let l = vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]];
        assert_eq!(scanline_intervals(&l, 0.5), vec![(0.0, 2.0)]);
        assert_eq!(scanline_intervals(&l, 1.5), vec![(0.0, 1.0)]);
        let a = [(0.0, 2.0)];
        let b = [(1.0, 3.0)];
        assert_eq!(intersection_length(&a, &b), 1.0);
    }
}
