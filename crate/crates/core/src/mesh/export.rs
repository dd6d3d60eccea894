//! SVG, legacy VTK and JSON writers. Every writer is byte-deterministic.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BlockComplex, MeshError, QuadMesh};
use crate::geom::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExportFormat {
    Svg,
    Vtk,
    Json,
}

struct Frame {
    min: Point,
    max: Point,
    scale: f64,
}

const CANVAS: f64 = 480.0;
const MARGIN: f64 = 10.0;

impl Frame {
    fn new<'a>(points: impl Iterator<Item = &'a Point>) -> Self {
        let (mut min, mut max) = (Point::new(f64::INFINITY, f64::INFINITY), Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for p in points {
            min = Point::new(min.x.min(p.x), min.y.min(p.y));
            max = Point::new(max.x.max(p.x), max.y.max(p.y));
        }
        if !min.x.is_finite() {
            (min, max) = (Point::new(0.0, 0.0), Point::new(1.0, 1.0));
        }
        let span = (max.x - min.x).max(max.y - min.y).max(f64::MIN_POSITIVE);
        Self {
            min,
            max,
            scale: (CANVAS - 2.0 * MARGIN) / span,
        }
    }

    /// SVG coordinates with y pointing down.
    fn map(&self, p: Point) -> (f64, f64) {
        (
            MARGIN + (p.x - self.min.x) * self.scale,
            MARGIN + (self.max.y - p.y) * self.scale,
        )
    }

    fn size(&self) -> (f64, f64) {
        (
            2.0 * MARGIN + (self.max.x - self.min.x) * self.scale,
            2.0 * MARGIN + (self.max.y - self.min.y) * self.scale,
        )
    }

    fn header(&self) -> String {
        let (w, h) = self.size();
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
             <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w:.3}\" height=\"{h:.3}\" viewBox=\"0 0 {w:.3} {h:.3}\">\n"
        )
    }

    fn points(&self, pts: impl Iterator<Item = Point>) -> String {
        pts.map(|p| {
            let (x, y) = self.map(p);
            format!("{x:.3},{y:.3}")
        })
        .collect::<Vec<_>>()
        .join(" ")
    }
}

/// One `<polygon>` per block and one `<line>` per internal segment.
pub fn decomposition_svg(complex: &BlockComplex) -> String {
    let frame = Frame::new(complex.blocks.iter().flat_map(|b| [&b.min, &b.max]));
    let mut out = frame.header();
    out.push_str("<g id=\"blocks\" fill=\"#dce6f2\" stroke=\"#1f3b5c\" stroke-width=\"1.5\">\n");
    for b in &complex.blocks {
        let _ = writeln!(
            out,
            "<polygon id=\"{}\" points=\"{}\"/>",
            escape(&b.id),
            frame.points(b.imprinted.iter().copied())
        );
    }
    out.push_str("</g>\n<g id=\"interfaces\" stroke=\"#c0392b\" stroke-width=\"2\">\n");
    for s in complex.internal_segments() {
        let ((x1, y1), (x2, y2)) = (frame.map(s.a), frame.map(s.b));
        let _ = writeln!(out, "<line x1=\"{x1:.3}\" y1=\"{y1:.3}\" x2=\"{x2:.3}\" y2=\"{y2:.3}\"/>");
    }
    out.push_str("</g>\n</svg>\n");
    out
}

/// One `<polygon>` per quad.
pub fn mesh_svg(mesh: &QuadMesh) -> String {
    let frame = Frame::new(mesh.nodes.iter());
    let mut out = frame.header();
    out.push_str("<g id=\"quads\" fill=\"#eef3e2\" stroke=\"#2d4a14\" stroke-width=\"0.75\">\n");
    for q in &mesh.quads {
        let _ = writeln!(out, "<polygon points=\"{}\"/>", frame.points(q.iter().map(|&i| mesh.nodes[i])));
    }
    out.push_str("</g>\n</svg>\n");
    out
}

/// Legacy ASCII unstructured grid of quads (cell type 9).
pub fn mesh_vtk(mesh: &QuadMesh) -> String {
    let mut out = String::from("# vtk DataFile Version 3.0\nblockmind quad mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {} double", mesh.nodes.len());
    for p in &mesh.nodes {
        let _ = writeln!(out, "{:?} {:?} 0", p.x, p.y);
    }
    let _ = writeln!(out, "CELLS {} {}", mesh.quads.len(), mesh.quads.len() * 5);
    for q in &mesh.quads {
        let _ = writeln!(out, "4 {} {} {} {}", q[0], q[1], q[2], q[3]);
    }
    let _ = writeln!(out, "CELL_TYPES {}", mesh.quads.len());
    for _ in &mesh.quads {
        out.push_str("9\n");
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// What to export.
#[derive(Clone, Copy, Debug)]
pub enum Exportable<'a> {
    Decomposition(&'a BlockComplex),
    Mesh(&'a QuadMesh),
}

/// Decomposition blocks as VTK polygon cells (type 7) over their imprinted
/// loops.
pub fn decomposition_vtk(complex: &BlockComplex) -> String {
    let mut out = String::from("# vtk DataFile Version 3.0\nblockmind block decomposition\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let total: usize = complex.blocks.iter().map(|b| b.imprinted.len()).sum();
    let _ = writeln!(out, "POINTS {total} double");
    for p in complex.blocks.iter().flat_map(|b| &b.imprinted) {
        let _ = writeln!(out, "{:?} {:?} 0", p.x, p.y);
    }
    let _ = writeln!(out, "CELLS {} {}", complex.blocks.len(), total + complex.blocks.len());
    let mut next = 0;
    for b in &complex.blocks {
        let ids: Vec<String> = (next..next + b.imprinted.len()).map(|i| i.to_string()).collect();
        let _ = writeln!(out, "{} {}", b.imprinted.len(), ids.join(" "));
        next += b.imprinted.len();
    }
    let _ = writeln!(out, "CELL_TYPES {}", complex.blocks.len());
    for _ in &complex.blocks {
        out.push_str("7\n");
    }
    out
}

pub fn render(item: Exportable<'_>, format: ExportFormat) -> Result<String, MeshError> {
    Ok(match (format, item) {
        (ExportFormat::Svg, Exportable::Mesh(m)) => mesh_svg(m),
        (ExportFormat::Svg, Exportable::Decomposition(c)) => decomposition_svg(c),
        (ExportFormat::Vtk, Exportable::Mesh(m)) => mesh_vtk(m),
        (ExportFormat::Vtk, Exportable::Decomposition(c)) => decomposition_vtk(c),
        (ExportFormat::Json, Exportable::Mesh(m)) => serde_json::to_string_pretty(m)? + "\n",
        (ExportFormat::Json, Exportable::Decomposition(c)) => serde_json::to_string_pretty(c)? + "\n",
    })
}

pub fn write_export(path: &Path, item: Exportable<'_>, format: ExportFormat) -> Result<(), MeshError> {
    let text = render(item, format)?;
    crate::io_util::write_atomic(path, text.as_bytes()).map_err(|source| MeshError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::RectilinearPolygon;
    use crate::mesh::mapped_mesh;

    fn square() -> BlockComplex {
        let r = RectilinearPolygon::rectangle("a", Point::new(0., 0.), Point::new(1., 1.)).unwrap();
        BlockComplex::from_blocks(&[r]).unwrap()
    }

    #[test]
    fn single_quad_vtk() {
        let m = mapped_mesh(&square(), 2.0).unwrap();
        let vtk = mesh_vtk(&m);
        assert!(vtk.contains("POINTS 4 double\n"));
        assert!(vtk.contains("CELLS 1 5\n"));
        assert!(vtk.ends_with("CELL_TYPES 1\n9\n"));
        assert_eq!(vtk, mesh_vtk(&m.clone()));
    }

    #[test]
    fn two_block_svg_counts() {
        let blocks = [
            RectilinearPolygon::rectangle("a", Point::new(0., 0.), Point::new(2., 1.)).unwrap(),
            RectilinearPolygon::rectangle("b", Point::new(0., 1.), Point::new(1., 2.)).unwrap(),
        ];
        let svg = decomposition_svg(&BlockComplex::from_blocks(&blocks).unwrap());
        assert_eq!(svg.matches("<polygon").count(), 2);
        assert_eq!(svg.matches("<line").count(), 1);
    }

    #[test]
    fn files_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let c = square();
        let m = mapped_mesh(&c, 0.3).unwrap();
        for fmt in [ExportFormat::Svg, ExportFormat::Vtk, ExportFormat::Json] {
            let (a, b) = (dir.path().join("a"), dir.path().join("b"));
            for item in [Exportable::Mesh(&m), Exportable::Decomposition(&c)] {
                write_export(&a, item, fmt).unwrap();
                write_export(&b, item, fmt).unwrap();
                assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
            }
        }
    }
}
