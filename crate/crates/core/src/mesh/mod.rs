//! Reassembly of decomposed blocks into one model with internal interfaces,
//! and conforming mapped quad meshing.

mod export;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Episode;
use crate::geom::{is_quad, Point, RectilinearPolygon};

pub use export::{decomposition_svg, decomposition_vtk, mesh_svg, mesh_vtk, render, write_export, ExportFormat, Exportable};

/// Iterations allowed when reconciling division counts across blocks.
const MAX_RECONCILE_STEPS: usize = 100_000;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("{0} part(s) are not rectangles")]
    NonQuadBlocks(usize),
    #[error("block {block} has {first} divisions on one side and {second} on the opposite side")]
    SizeMismatch { block: String, first: usize, second: usize },
    #[error("mesh size must be positive, got {0}")]
    InvalidSize(f64),
    #[error("incidence audit failed: {0}")]
    Incidence(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

/// A boundary piece between two consecutive imprinted points, stored with
/// its endpoints in lexicographic order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
    /// Indices of the blocks whose loop contains this segment.
    pub blocks: Vec<usize>,
}

impl Segment {
    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }

    pub fn is_internal(&self) -> bool {
        self.blocks.len() == 2
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: String,
    pub min: Point,
    pub max: Point,
    /// CCW loop starting at `min`, including every imprinted point.
    pub imprinted: Vec<Point>,
    /// Segment indices of the bottom, right, top and left sides, each in
    /// loop order.
    pub sides: [Vec<usize>; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockComplex {
    pub blocks: Vec<Block>,
    pub segments: Vec<Segment>,
}

type Key = (u64, u64);

fn key(p: Point) -> Key {
    // Normalise -0.0 so that equal coordinates share a key.
    ((p.x + 0.0).to_bits(), (p.y + 0.0).to_bits())
}

fn ordered(p: Point, q: Point) -> (Point, Point) {
    if (p.x, p.y) <= (q.x, q.y) {
        (p, q)
    } else {
        (q, p)
    }
}

impl BlockComplex {
    pub fn area(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| (b.max.x - b.min.x) * (b.max.y - b.min.y))
            .sum()
    }

    pub fn internal_segments(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(|s| s.is_internal())
    }

    /// Blocks sorted by id with every other block's corners inserted into
    /// their sides.
    pub fn from_blocks(parts: &[RectilinearPolygon]) -> Result<Self, MeshError> {
        let bad = parts.iter().filter(|p| !is_quad(p)).count();
        if bad > 0 {
            return Err(MeshError::NonQuadBlocks(bad));
        }
        let mut parts: Vec<&RectilinearPolygon> = parts.iter().collect();
        parts.sort_by(|a, b| a.id().cmp(b.id()));
        let rects: Vec<(Point, Point)> = parts.iter().map(|p| (p.bbox().min, p.bbox().max)).collect();
        let corners: Vec<Point> = rects
            .iter()
            .flat_map(|&(lo, hi)| [lo, Point::new(hi.x, lo.y), hi, Point::new(lo.x, hi.y)])
            .collect();

        let mut segments: Vec<Segment> = Vec::new();
        let mut index: HashMap<(Key, Key), usize> = HashMap::new();
        let mut blocks = Vec::with_capacity(parts.len());
        for (bi, (part, &(lo, hi))) in parts.iter().zip(&rects).enumerate() {
            let c = [lo, Point::new(hi.x, lo.y), hi, Point::new(lo.x, hi.y)];
            let mut imprinted = Vec::new();
            let mut sides: [Vec<usize>; 4] = Default::default();
            for (s, side) in sides.iter_mut().enumerate() {
                let (p, q) = (c[s], c[(s + 1) % 4]);
                let pts = side_points(p, q, &corners);
                for w in pts.windows(2) {
                    let (a, b) = ordered(w[0], w[1]);
                    let id = *index.entry((key(a), key(b))).or_insert_with(|| {
                        segments.push(Segment { a, b, blocks: vec![] });
                        segments.len() - 1
                    });
                    segments[id].blocks.push(bi);
                    side.push(id);
                }
                imprinted.extend_from_slice(&pts[..pts.len() - 1]);
            }
            blocks.push(Block {
                id: part.id().to_string(),
                min: lo,
                max: hi,
                imprinted,
                sides,
            });
        }
        if let Some(s) = segments.iter().find(|s| s.blocks.len() > 2) {
            return Err(MeshError::Incidence(format!(
                "segment {:?}-{:?} touches {} blocks",
                s.a,
                s.b,
                s.blocks.len()
            )));
        }
        Ok(Self { blocks, segments })
    }
}

/// Corners lying on the closed side `p → q`, in order from `p`.
fn side_points(p: Point, q: Point, corners: &[Point]) -> Vec<Point> {
    let horizontal = p.y == q.y;
    let (lo, hi) = if horizontal {
        (p.x.min(q.x), p.x.max(q.x))
    } else {
        (p.y.min(q.y), p.y.max(q.y))
    };
    let mut ts: Vec<f64> = corners
        .iter()
        .filter(|c| {
            if horizontal {
                c.y == p.y && c.x > lo && c.x < hi
            } else {
                c.x == p.x && c.y > lo && c.y < hi
            }
        })
        .map(|c| if horizontal { c.x } else { c.y })
        .collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let ascending = if horizontal { q.x > p.x } else { q.y > p.y };
    if !ascending {
        ts.reverse();
    }
    let mut pts = vec![p];
    pts.extend(ts.into_iter().map(|t| if horizontal { Point::new(t, p.y) } else { Point::new(p.x, t) }));
    pts.push(q);
    pts
}

/// Rebuilds the decomposed model of a complete episode.
pub fn imprint_and_merge(episode: &Episode) -> Result<BlockComplex, MeshError> {
    if !episode.queue.is_empty() {
        return Err(MeshError::NonQuadBlocks(episode.queue.len()));
    }
    BlockComplex::from_blocks(&episode.finished_quads)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadMesh {
    pub nodes: Vec<Point>,
    /// Counter-clockwise node indices.
    pub quads: Vec<[usize; 4]>,
}

/// Interval count per segment: `max(1, round(L / h))`, then raised where
/// needed until opposite sides of every block agree.
pub fn segment_divisions(complex: &BlockComplex, h: f64) -> Result<Vec<usize>, MeshError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(MeshError::InvalidSize(h));
    }
    let mut n: Vec<usize> = complex
        .segments
        .iter()
        .map(|s| ((s.length() / h).round() as usize).max(1))
        .collect();
    for _ in 0..MAX_RECONCILE_STEPS {
        let mut changed = false;
        for b in &complex.blocks {
            for (s1, s2) in [(0, 2), (1, 3)] {
                let c1: usize = b.sides[s1].iter().map(|&i| n[i]).sum();
                let c2: usize = b.sides[s2].iter().map(|&i| n[i]).sum();
                if c1 == c2 {
                    continue;
                }
                let short = if c1 < c2 { s1 } else { s2 };
                // Refine the segment currently holding the longest intervals.
                let &seg = b.sides[short]
                    .iter()
                    .max_by(|&&i, &&j| {
                        let (li, lj) = (complex.segments[i].length() / n[i] as f64, complex.segments[j].length() / n[j] as f64);
                        li.total_cmp(&lj).then(j.cmp(&i))
                    })
                    .expect("sides are non-empty");
                n[seg] += c1.abs_diff(c2).min(1);
                changed = true;
            }
        }
        if !changed {
            return Ok(n);
        }
    }
    let b = complex
        .blocks
        .iter()
        .find(|b| {
            let sum = |s: usize| b.sides[s].iter().map(|&i| n[i]).sum::<usize>();
            sum(0) != sum(2) || sum(1) != sum(3)
        })
        .expect("reconciliation stopped early");
    let sum = |s: usize| b.sides[s].iter().map(|&i| n[i]).sum::<usize>();
    Err(MeshError::SizeMismatch {
        block: b.id.clone(),
        first: sum(0),
        second: sum(2),
    })
}

/// Subdivision points of a segment from `a` to `b`, both ends included.
fn subdivide(s: &Segment, n: usize) -> Vec<Point> {
    (0..=n)
        .map(|k| {
            if k == 0 {
                s.a
            } else if k == n {
                s.b
            } else {
                let t = k as f64 / n as f64;
                Point::new(s.a.x + (s.b.x - s.a.x) * t, s.a.y + (s.b.y - s.a.y) * t)
            }
        })
        .collect()
}

/// Coordinates along a block side (x for horizontal sides, y for vertical),
/// from the low end to the high end.
fn side_coords(complex: &BlockComplex, ids: &[usize], n: &[usize], horizontal: bool) -> Vec<f64> {
    let mut pts: Vec<Point> = ids
        .iter()
        .flat_map(|&i| subdivide(&complex.segments[i], n[i]))
        .collect();
    let coord = |p: &Point| if horizontal { p.x } else { p.y };
    pts.sort_by(|p, q| coord(p).total_cmp(&coord(q)));
    pts.dedup_by(|p, q| coord(p) == coord(q));
    pts.iter().map(coord).collect()
}

/// Point where the line from `(b, y0)` to `(t, y1)` meets the line from `(x0, l)` to `(x1, r)`.
fn grid_point(lo: Point, hi: Point, b: f64, t: f64, l: f64, r: f64) -> Point {
    let (w, h) = (hi.x - lo.x, hi.y - lo.y);
    // Parametrise x = b + (t − b)·v, y = l + (r − l)·u with u, v in [0, 1].
    let (u0, v0) = ((b - lo.x) / w, (l - lo.y) / h);
    let (du, dv) = ((t - b) / w, (r - l) / h);
    let v = (v0 + dv * u0) / (1.0 - dv * du);
    let u = u0 + du * v;
    Point::new(lo.x + u * w, lo.y + v * h)
}

/// Tensor-grid mesh of every block, glued along shared segments.
pub fn mapped_mesh(complex: &BlockComplex, h: f64) -> Result<QuadMesh, MeshError> {
    let n = segment_divisions(complex, h)?;
    let mut nodes: Vec<Point> = Vec::new();
    let mut ids: BTreeMap<Key, usize> = BTreeMap::new();
    let mut node = |p: Point, nodes: &mut Vec<Point>| -> usize {
        *ids.entry(key(p)).or_insert_with(|| {
            nodes.push(p);
            nodes.len() - 1
        })
    };
    let mut quads = Vec::new();
    for b in &complex.blocks {
        let bottom = side_coords(complex, &b.sides[0], &n, true);
        let top = side_coords(complex, &b.sides[2], &n, true);
        let right = side_coords(complex, &b.sides[1], &n, false);
        let left = side_coords(complex, &b.sides[3], &n, false);
        if bottom.len() != top.len() || left.len() != right.len() {
            return Err(MeshError::SizeMismatch {
                block: b.id.clone(),
                first: bottom.len().min(left.len()) - 1,
                second: top.len().min(right.len()) - 1,
            });
        }
        let (nx, ny) = (bottom.len(), left.len());
        let mut grid = vec![0usize; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let p = if j == 0 {
                    Point::new(bottom[i], b.min.y)
                } else if j == ny - 1 {
                    Point::new(top[i], b.max.y)
                } else if i == 0 {
                    Point::new(b.min.x, left[j])
                } else if i == nx - 1 {
                    Point::new(b.max.x, right[j])
                } else {
                    grid_point(b.min, b.max, bottom[i], top[i], left[j], right[j])
                };
                grid[j * nx + i] = node(p, &mut nodes);
            }
        }
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                quads.push([
                    grid[j * nx + i],
                    grid[j * nx + i + 1],
                    grid[(j + 1) * nx + i + 1],
                    grid[(j + 1) * nx + i],
                ]);
            }
        }
    }
    Ok(QuadMesh { nodes, quads })
}

/// Default mesh size for a model: a tenth of its bounding-box diagonal.
pub fn default_mesh_size(model: &RectilinearPolygon) -> f64 {
    0.1 * model.bbox().diagonal()
}

/// Conformity and quality figures of a quad mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshAudit {
    pub interior_edges: usize,
    pub boundary_edges: usize,
    /// Edges used by more than two quads, or by one quad away from the model
    /// boundary.
    pub bad_edges: usize,
    /// Smallest corner cross product over all quads; positive means every
    /// corner turns counter-clockwise.
    pub min_corner_jacobian: f64,
    pub area_error: f64,
}

impl MeshAudit {
    pub fn is_conforming(&self) -> bool {
        self.bad_edges == 0 && self.min_corner_jacobian > 0.0 && self.area_error < 1e-9
    }
}

impl QuadMesh {
    pub fn area(&self) -> f64 {
        self.quads
            .iter()
            .map(|q| {
                let p: Vec<Point> = q.iter().map(|&i| self.nodes[i]).collect();
                0.5 * (0..4)
                    .map(|k| p[k].x * p[(k + 1) % 4].y - p[(k + 1) % 4].x * p[k].y)
                    .sum::<f64>()
            })
            .sum()
    }

    pub fn audit(&self, model: &RectilinearPolygon) -> MeshAudit {
        let mut uses: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut min_j = f64::INFINITY;
        for q in &self.quads {
            for k in 0..4 {
                let (a, b) = (q[k], q[(k + 1) % 4]);
                *uses.entry((a.min(b), a.max(b))).or_default() += 1;
                let (p0, p1, p2) = (self.nodes[q[(k + 3) % 4]], self.nodes[a], self.nodes[b]);
                let cross = (p1.x - p0.x) * (p2.y - p1.y) - (p1.y - p0.y) * (p2.x - p1.x);
                min_j = min_j.min(cross);
            }
        }
        let tol = model.tolerance();
        let mut audit = MeshAudit {
            interior_edges: 0,
            boundary_edges: 0,
            bad_edges: 0,
            min_corner_jacobian: min_j,
            area_error: (self.area() - model.area()).abs() / model.area(),
        };
        for (&(a, b), &count) in &uses {
            let mid = self.nodes[a].add(self.nodes[b]).scale(0.5);
            match count {
                2 => audit.interior_edges += 1,
                1 if model.boundary_distance(mid) <= tol => audit.boundary_edges += 1,
                _ => audit.bad_edges += 1,
            }
        }
        audit
    }
}
