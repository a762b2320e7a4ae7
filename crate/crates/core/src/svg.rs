//! Minimal SVG floor-plan plots.

use std::fmt::Write as _;

use crate::geometry::Point2;

#[derive(Debug, Clone)]
struct Layer {
    label: String,
    color: String,
    stroke: f64,
    polygons: Vec<Vec<Point2>>,
}

/// Closed outlines drawn in layers, plus camera markers, in world meters.
#[derive(Debug, Clone, Default)]
pub struct FloorPlan {
    title: String,
    layers: Vec<Layer>,
    markers: Vec<Point2>,
}

impl FloorPlan {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            ..Self::default()
        }
    }

    pub fn layer(mut self, label: &str, color: &str, stroke: f64, polygons: Vec<Vec<Point2>>) -> Self {
        self.layers.push(Layer {
            label: label.to_owned(),
            color: color.to_owned(),
            stroke,
            polygons,
        });
        self
    }

    pub fn markers(mut self, points: Vec<Point2>) -> Self {
        self.markers = points;
        self
    }

    fn extent(&self) -> Option<(Point2, Point2)> {
        let pts = self
            .layers
            .iter()
            .flat_map(|l| l.polygons.iter().flatten())
            .chain(&self.markers);
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut any = false;
        for p in pts.filter(|p| p[0].is_finite() && p[1].is_finite()) {
            any = true;
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        any.then_some((lo, hi))
    }

    /// Renders to an SVG document `size` pixels wide.
    pub fn to_svg(&self, size: f64) -> String {
        let (lo, hi) = self.extent().unwrap_or(([-1.0, -1.0], [1.0, 1.0]));
        let margin = 30.0;
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-6);
        let scale = (size - 2.0 * margin) / span;
        let height = (hi[1] - lo[1]) * scale + 2.0 * margin + 20.0 * self.layers.len() as f64;
        // world z grows upward on the page
        let map = |p: Point2| {
            (
                margin + (p[0] - lo[0]) * scale,
                margin + (hi[1] - p[1]) * scale,
            )
        };
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0}" height="{height:.0}" viewBox="0 0 {size:.0} {height:.0}">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{margin}" y="18" font-family="sans-serif" font-size="14">{}</text>"#,
            escape(&self.title)
        );
        for layer in &self.layers {
            let _ = writeln!(s, r#"<g id="{}" fill="none" stroke="{}" stroke-width="{}" stroke-linejoin="round">"#,
                escape(&layer.label), layer.color, layer.stroke);
            for poly in layer.polygons.iter().filter(|p| p.len() >= 2) {
                let pts: Vec<String> = poly
                    .iter()
                    .map(|&p| {
                        let (x, y) = map(p);
                        format!("{x:.2},{y:.2}")
                    })
                    .collect();
                let _ = writeln!(s, r#"<polygon points="{}"/>"#, pts.join(" "));
            }
            let _ = writeln!(s, "</g>");
        }
        for &m in &self.markers {
            let (x, y) = map(m);
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="black"/>"#);
        }
        let legend_top = (hi[1] - lo[1]) * scale + 2.0 * margin;
        for (k, layer) in self.layers.iter().enumerate() {
            let y = legend_top + 20.0 * k as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{margin}" y1="{y:.0}" x2="{:.0}" y2="{y:.0}" stroke="{}" stroke-width="3"/><text x="{:.0}" y="{:.0}" font-family="sans-serif" font-size="12">{}</text>"#,
                margin + 24.0,
                layer.color,
                margin + 30.0,
                y + 4.0,
                escape(&layer.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
