//! Rectilinear geometry kernel.
//!
//! Shapes are simple, counter-clockwise, axis-aligned vertex loops. Cuts are
//! infinite axis-parallel lines through a model vertex; the resulting parts
//! are recovered on a compressed cell grid built from the shape's own
//! coordinates, so no new coordinate values are ever synthesized.

mod cut;
mod graph;
mod grid;
mod io;
mod polygon;
mod triangulate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cut::cut;
pub use graph::{NodeKind, ShapeGraph};
pub use grid::{CellGrid, Region};
pub use io::{load_shape, save_shape, ShapeFile, ShapeFileError};
pub use polygon::{is_quad, metrics, BoundingBox, RectilinearPolygon, ShapeMetrics};
pub use triangulate::triangulate;

/// Relative tolerance applied to the bounding-box diagonal.
pub const REL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("polygon needs at least 4 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("edge {0} is not axis-aligned")]
    NotAxisAligned(usize),
    #[error("polygon boundary self-intersects")]
    SelfIntersecting,
    #[error("degenerate shape (area {0:e})")]
    DegenerateShape(f64),
    #[error("vertex index {index} out of range ({len} vertices)")]
    VertexOutOfRange { index: usize, len: usize },
    #[error("region is not simply connected")]
    NotSimplyConnected,
    #[error("triangulation failed: {0}")]
    TriangulationFailure(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    pub fn add(self, other: Point) -> Point {
        Point::new(self.x + other.x, self.y + other.y)
    }

    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        self.sub(other).norm()
    }
}

impl From<[f64; 2]> for Point {
    fn from(p: [f64; 2]) -> Self {
        Point::new(p[0], p[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Twice the signed area of triangle `abc`; positive for a left turn.
pub(crate) fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Orientation of a cut line. `XAxis` cuts run parallel to the x axis (the
/// line `y = vertex.y`), `YAxis` cuts run parallel to the y axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    XAxis,
    YAxis,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::XAxis, Direction::YAxis];

    pub fn index(self) -> usize {
        match self {
            Direction::XAxis => 0,
            Direction::YAxis => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Direction::XAxis
        } else {
            Direction::YAxis
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutAction {
    pub vertex_index: usize,
    pub direction: Direction,
}

impl CutAction {
    pub fn new(vertex_index: usize, direction: Direction) -> Self {
        Self {
            vertex_index,
            direction,
        }
    }
}
