//! Fixed-size local observation at a model vertex.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geom::{metrics, GeomError, Point, RectilinearPolygon};

pub const OBS_DIM: usize = 9;

/// Offsets to the two loop neighbours and the centroid (normalized by the
/// bounding-box diagonal), the interior angle, and the normalized
/// bounding-box extents.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalObservation {
    /// Towards the counter-clockwise previous vertex.
    pub v1: Point,
    /// Towards the counter-clockwise next vertex.
    pub v2: Point,
    pub vc: Point,
    /// Interior angle in radians: `π/2` or `3π/2` for rectilinear loops.
    pub angle: f64,
    /// `(W, H) / max(W, H)` of the bounding box.
    pub aspect: [f64; 2],
}

impl LocalObservation {
    pub fn to_array(&self) -> [f64; OBS_DIM] {
        [
            self.v1.x,
            self.v1.y,
            self.v2.x,
            self.v2.y,
            self.vc.x,
            self.vc.y,
            self.angle,
            self.aspect[0],
            self.aspect[1],
        ]
    }
}

pub fn observe(poly: &RectilinearPolygon, vertex_index: usize) -> Result<LocalObservation, GeomError> {
    if vertex_index >= poly.len() {
        return Err(GeomError::VertexOutOfRange {
            index: vertex_index,
            len: poly.len(),
        });
    }
    let m = metrics(poly)?;
    let diag = m.bbox.diagonal();
    let p = poly.vertex(vertex_index);
    let rel = |q: Point| q.sub(p).scale(1.0 / diag);
    let (w, h) = (m.bbox.width(), m.bbox.height());
    let longest = w.max(h);
    Ok(LocalObservation {
        v1: rel(poly.vertex(poly.prev_index(vertex_index))),
        v2: rel(poly.vertex(poly.next_index(vertex_index))),
        vc: rel(m.centroid),
        angle: if poly.is_reflex(vertex_index) { 1.5 * PI } else { 0.5 * PI },
        aspect: [w / longest, h / longest],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn poly(pts: &[(f64, f64)]) -> RectilinearPolygon {
        RectilinearPolygon::new("s", pts.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn unit_square_corner() {
        let sq = poly(&[(0., 0.), (1., 0.), (1., 1.), (0., 1.)]);
        let o = observe(&sq, 0).unwrap();
        assert!(close(o.v1.x, 0.0) && close(o.v1.y, 1.0 / SQRT_2));
        assert!(close(o.v2.x, 1.0 / SQRT_2) && close(o.v2.y, 0.0));
        assert!(close(o.vc.x, 0.5 / SQRT_2) && close(o.vc.y, 0.5 / SQRT_2));
        assert!(close(o.angle, PI / 2.0));
        assert_eq!(o.aspect, [1.0, 1.0]);
    }

    #[test]
    fn l_shape_reentrant_corner() {
        let l = poly(&[(0., 0.), (2., 0.), (2., 1.), (1., 1.), (1., 2.), (0., 2.)]);
        let o = observe(&l, 3).unwrap();
        assert!(close(o.angle, 1.5 * PI));
        let expected = (5.0 / 6.0 - 1.0) / (2.0 * SQRT_2);
        assert!(close(o.vc.x, expected) && close(o.vc.y, expected));
        assert!((expected - -0.0589).abs() < 1e-4);
        assert_eq!(o.aspect, [1.0, 1.0]);
    }

    #[test]
    fn elongated_aspect() {
        let r = poly(&[(0., 0.), (4., 0.), (4., 1.), (0., 1.)]);
        for i in 0..4 {
            assert_eq!(observe(&r, i).unwrap().aspect, [1.0, 0.25]);
        }
    }

    #[test]
    fn out_of_range() {
        let sq = poly(&[(0., 0.), (1., 0.), (1., 1.), (0., 1.)]);
        assert!(observe(&sq, 4).is_err());
    }
}
