use serde::{Deserialize, Serialize};

use super::{GeomError, Point, REL_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: Point,
    pub max: Point,
}

impl BoundingBox {
    pub fn of(points: &[Point]) -> Self {
        let mut min = Point::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeMetrics {
    pub area: f64,
    pub centroid: Point,
    pub bbox: BoundingBox,
    /// Longest over shortest bounding-box side, always `>= 1`.
    pub aspect_ratio: f64,
}

/// A simple, closed, counter-clockwise loop of axis-aligned edges with no
/// collinear vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectilinearPolygon {
    id: String,
    vertices: Vec<Point>,
}

impl RectilinearPolygon {
    /// Validates and normalizes a vertex loop.
    ///
    /// Duplicate and collinear vertices are dropped, nearly-aligned edges are
    /// snapped onto their axis, and clockwise input is reversed. The first
    /// surviving vertex keeps its position at the head of the loop.
    pub fn new(id: impl Into<String>, vertices: Vec<Point>) -> Result<Self, GeomError> {
        if vertices.len() < 4 {
            return Err(GeomError::TooFewVertices(vertices.len()));
        }
        let tol = REL_TOL * BoundingBox::of(&vertices).diagonal().max(f64::MIN_POSITIVE);
        let mut pts = vertices;
        snap_edges(&mut pts, tol)?;
        let mut pts = simplify_loop(pts, tol);
        if pts.len() < 4 {
            return Err(GeomError::TooFewVertices(pts.len()));
        }
        let area2 = signed_area2(&pts);
        if area2.abs() <= tol * tol {
            return Err(GeomError::DegenerateShape(area2.abs() / 2.0));
        }
        if area2 < 0.0 {
            pts[1..].reverse();
        }
        let poly = Self {
            id: id.into(),
            vertices: pts,
        };
        poly.check_invariants(tol)?;
        Ok(poly)
    }

    pub(crate) fn from_trusted(id: String, vertices: Vec<Point>) -> Self {
        Self { id, vertices }
    }

    /// Axis-aligned rectangle with corners `min` and `max`.
    pub fn rectangle(id: impl Into<String>, min: Point, max: Point) -> Result<Self, GeomError> {
        Self::new(
            id,
            vec![min, Point::new(max.x, min.y), max, Point::new(min.x, max.y)],
        )
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex(&self, i: usize) -> Point {
        self.vertices[i]
    }

    pub fn prev_index(&self, i: usize) -> usize {
        (i + self.len() - 1) % self.len()
    }

    pub fn next_index(&self, i: usize) -> usize {
        (i + 1) % self.len()
    }

    /// Iterator over `(start, end)` edges in loop order.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn bbox(&self) -> BoundingBox {
        BoundingBox::of(&self.vertices)
    }

    pub fn tolerance(&self) -> f64 {
        REL_TOL * self.bbox().diagonal()
    }

    pub fn area(&self) -> f64 {
        signed_area2(&self.vertices) / 2.0
    }

    /// A reflex vertex turns right in a counter-clockwise loop.
    pub fn is_reflex(&self, i: usize) -> bool {
        let a = self.vertices[self.prev_index(i)];
        let b = self.vertices[i];
        let c = self.vertices[self.next_index(i)];
        super::orient(a, b, c) < 0.0
    }

    pub fn translate(&self, t: Point) -> Self {
        Self {
            id: self.id.clone(),
            vertices: self.vertices.iter().map(|p| p.add(t)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        assert!(s > 0.0, "scale factor must be positive");
        Self {
            id: self.id.clone(),
            vertices: self.vertices.iter().map(|p| p.scale(s)).collect(),
        }
    }

    /// Mirror image across the vertical line `x = axis`.
    ///
    /// The loop is reversed to stay counter-clockwise and rotated so that
    /// vertex `i` of the result is the image of vertex `i` of `self`.
    pub fn reflect_x(&self, axis: f64) -> Self {
        let vertices = self
            .vertices
            .iter()
            .map(|p| Point::new(2.0 * axis - p.x, p.y))
            .collect();
        Self {
            id: self.id.clone(),
            vertices,
        }
        .reversed_in_place_order()
    }

    fn reversed_in_place_order(mut self) -> Self {
        // Reversing indices 1.. keeps vertex 0 fixed; every vertex keeps its
        // index up to the permutation i -> n - i.
        self.vertices[1..].reverse();
        self
    }

    /// Index of the image of vertex `i` under [`reflect_x`](Self::reflect_x).
    pub fn reflected_index(&self, i: usize) -> usize {
        (self.len() - i) % self.len()
    }

    /// Even-odd point containment. Points on the boundary give an
    /// unspecified answer.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if x > p.x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Distance from `p` to the polygon boundary.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.edges()
            .map(|(a, b)| segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    fn check_invariants(&self, tol: f64) -> Result<(), GeomError> {
        let n = self.len();
        for (i, (a, b)) in self.edges().enumerate() {
            let horizontal = (a.y - b.y).abs() <= tol;
            let vertical = (a.x - b.x).abs() <= tol;
            if horizontal == vertical {
                return Err(GeomError::NotAxisAligned(i));
            }
        }
        for i in 0..n {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
                let (c, d) = (self.vertices[j], self.vertices[(j + 1) % n]);
                if boxes_touch(a, b, c, d, tol) {
                    return Err(GeomError::SelfIntersecting);
                }
            }
        }
        Ok(())
    }
}

pub fn metrics(poly: &RectilinearPolygon) -> Result<ShapeMetrics, GeomError> {
    let bbox = poly.bbox();
    let diag = bbox.diagonal();
    let area = poly.area();
    if !(area > REL_TOL * diag * diag) {
        return Err(GeomError::DegenerateShape(area));
    }
    let (mut cx, mut cy) = (0.0, 0.0);
    for (a, b) in poly.edges() {
        let cross = a.x * b.y - b.x * a.y;
        cx += (a.x + b.x) * cross;
        cy += (a.y + b.y) * cross;
    }
    let centroid = Point::new(cx / (6.0 * area), cy / (6.0 * area));
    let (w, h) = (bbox.width(), bbox.height());
    Ok(ShapeMetrics {
        area,
        centroid,
        bbox,
        aspect_ratio: w.max(h) / w.min(h),
    })
}

/// Four vertices in a simplified rectilinear loop means a rectangle.
pub fn is_quad(poly: &RectilinearPolygon) -> bool {
    poly.len() == 4
}

pub(crate) fn signed_area2(pts: &[Point]) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum()
}

fn snap_edges(pts: &mut [Point], tol: f64) -> Result<(), GeomError> {
    let n = pts.len();
    for i in 0..n {
        let j = (i + 1) % n;
        let (a, b) = (pts[i], pts[j]);
        let dx = (a.x - b.x).abs();
        let dy = (a.y - b.y).abs();
        if dx <= tol && dy > tol {
            pts[j].x = a.x;
        } else if dy <= tol && dx > tol {
            pts[j].y = a.y;
        } else if dx > tol && dy > tol {
            return Err(GeomError::NotAxisAligned(i));
        }
    }
    // The closing edge may have been disturbed by the wrap-around snap.
    let (a, b) = (pts[n - 1], pts[0]);
    if (a.x - b.x).abs() > tol && (a.y - b.y).abs() > tol {
        return Err(GeomError::NotAxisAligned(n - 1));
    }
    Ok(())
}

/// Removes repeated points and vertices whose two edges are parallel
/// (straight continuations and back-tracking spikes alike).
pub(crate) fn simplify_loop(mut pts: Vec<Point>, tol: f64) -> Vec<Point> {
    loop {
        let n = pts.len();
        if n < 3 {
            return pts;
        }
        let mut keep = Vec::with_capacity(n);
        let mut changed = false;
        for i in 0..n {
            let a = pts[(i + n - 1) % n];
            let b = pts[i];
            let c = pts[(i + 1) % n];
            let repeated = b.dist(c) <= tol;
            let parallel = super::orient(a, b, c).abs() <= tol * (a.dist(b) + b.dist(c));
            if repeated || parallel {
                changed = true;
                // Drop one vertex per pass so neighbours are re-evaluated.
                keep.extend_from_slice(&pts[i + 1..]);
                break;
            }
            keep.push(b);
        }
        if !changed {
            return pts;
        }
        pts = keep;
    }
}

fn boxes_touch(a: Point, b: Point, c: Point, d: Point, tol: f64) -> bool {
    let (ax0, ax1) = (a.x.min(b.x), a.x.max(b.x));
    let (ay0, ay1) = (a.y.min(b.y), a.y.max(b.y));
    let (cx0, cx1) = (c.x.min(d.x), c.x.max(d.x));
    let (cy0, cy1) = (c.y.min(d.y), c.y.max(d.y));
    ax0 <= cx1 + tol && cx0 <= ax1 + tol && ay0 <= cy1 + tol && cy0 <= ay1 + tol
}

pub(crate) fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.x * ab.x + ab.y * ab.y;
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2).clamp(0.0, 1.0);
    p.dist(a.add(ab.scale(t)))
}
