//! Output emission: CSV/JSON text helpers, the run manifest carrying the
//! config hash, and a deliberately minimal SVG writer (boundary polyline
//! plus color-mapped field dots) for static result displays.

use std::path::Path;

use serde::Serialize;

use crate::geometry::{BoundaryMapper, BoundaryShape, PolarField};
use crate::grid::{AngularGrid, RadialGrid};
use crate::Result;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Manifest entry for one emitted file.
#[derive(Debug, Clone, Serialize)]
pub struct ManifestFile {
    pub name: String,
    pub kind: String,
}

/// Run manifest written next to every output set.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub toolkit_version: String,
    pub config_hash: String,
    pub command: String,
    pub files: Vec<ManifestFile>,
}

impl Manifest {
    pub fn new(command: &str, config_hash: &str) -> Self {
        Self {
            toolkit_version: TOOLKIT_VERSION.to_string(),
            config_hash: config_hash.to_string(),
            command: command.to_string(),
            files: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, kind: &str) {
        self.files.push(ManifestFile { name: name.to_string(), kind: kind.to_string() });
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serialization");
        std::fs::write(dir.join("manifest.json"), text)?;
        Ok(())
    }
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

fn color_map(t: f64) -> (u8, u8, u8) {
    // blue (low) to red (high) through grey
    let t = t.clamp(0.0, 1.0);
    let r = (255.0 * t) as u8;
    let b = (255.0 * (1.0 - t)) as u8;
    let g = (120.0 * (1.0 - (2.0 * t - 1.0).abs())) as u8;
    (r, g, b)
}

/// Minimal SVG: boundary polyline, subsampled field dots colored by
/// value, and a small legend with the value range.
pub fn svg_shape_field(
    shape: &BoundaryShape,
    field: &PolarField,
    grid: &RadialGrid,
    ang: &AngularGrid,
    title: &str,
) -> Result<String> {
    let mapper = BoundaryMapper::new(shape, 1.0)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 0..=256 {
        let phi = 2.0 * std::f64::consts::PI * k as f64 / 256.0;
        let q = shape.radius_at(phi);
        xs.push(q * phi.cos());
        ys.push(q * phi.sin());
    }
    let extent = xs
        .iter()
        .chain(ys.iter())
        .fold(0.0_f64, |a, v| a.max(v.abs()))
        * 1.15;
    let size = 420.0;
    let scale = size / (2.0 * extent);
    let to_px = |x: f64, y: f64| (size / 2.0 + x * scale, size / 2.0 - y * scale);

    let (lo, hi) = field
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = (hi - lo).max(1e-300);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n",
        size as u32 + 120,
        size as u32 + 40
    ));
    svg.push_str(&format!(
        "<text x=\"10\" y=\"18\" font-family=\"monospace\" font-size=\"13\">{title}</text>\n"
    ));

    // field dots (subsampled)
    let r_step = (grid.n / 24).max(1);
    let p_step = (ang.n / 48).max(1);
    for i in (0..grid.n).step_by(r_step) {
        for k in (0..ang.n).step_by(p_step) {
            let (x, y) = mapper.point(grid.centers()[i], ang.nodes()[k]);
            let (px, py) = to_px(x, y);
            let (r, g, b) = color_map((field.at(i, k) - lo) / span);
            svg.push_str(&format!(
                "<circle cx=\"{px:.1}\" cy=\"{py:.1}\" r=\"3.4\" fill=\"rgb({r},{g},{b})\"/>\n"
            ));
        }
    }

    // boundary polyline
    let mut points = String::new();
    for (x, y) in xs.iter().zip(&ys) {
        let (px, py) = to_px(*x, *y);
        points.push_str(&format!("{px:.1},{py:.1} "));
    }
    svg.push_str(&format!(
        "<polyline points=\"{points}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n"
    ));

    // legend
    let lx = size + 20.0;
    for j in 0..40 {
        let t = 1.0 - j as f64 / 39.0;
        let (r, g, b) = color_map(t);
        svg.push_str(&format!(
            "<rect x=\"{lx:.0}\" y=\"{:.0}\" width=\"18\" height=\"6\" fill=\"rgb({r},{g},{b})\"/>\n",
            40.0 + 6.0 * j as f64
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.0}\" y=\"46\" font-family=\"monospace\" font-size=\"11\">{hi:.4}</text>\n",
        lx + 22.0
    ));
    svg.push_str(&format!(
        "<text x=\"{:.0}\" y=\"{:.0}\" font-family=\"monospace\" font-size=\"11\">{lo:.4}</text>\n",
        lx + 22.0,
        40.0 + 6.0 * 40.0
    ));
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_contains_expected_elements() {
        let shape = BoundaryShape::new(1.0, vec![0.0, 0.0, 0.1], 0.0).unwrap();
        let grid = RadialGrid::new(24, 1.0).unwrap();
        let ang = AngularGrid::new(32).unwrap();
        let field = PolarField::from_fn(&grid, &ang, |r, phi| r * phi.cos());
        let svg = svg_shape_field(&shape, &field, &grid, &ang, "test").unwrap();
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("<circle"));
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
