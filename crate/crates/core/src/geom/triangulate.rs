use std::collections::{BTreeMap, BTreeSet};

use super::{orient, GeomError, NodeKind, Point, RectilinearPolygon, ShapeGraph};

/// Conforming triangulation of `poly` for the value network.
///
/// Boundary edges are split into equal segments no longer than
/// `target_edge`; interior Steiner points are placed on a lattice of about
/// that spacing, then edges are flipped until the triangulation is
/// Delaunay with respect to the fixed boundary. Nodes `0..poly.len()` are
/// the model vertices in loop order.
pub fn triangulate(poly: &RectilinearPolygon, target_edge: f64) -> Result<ShapeGraph, GeomError> {
    if !(target_edge > 0.0 && target_edge.is_finite()) {
        return Err(GeomError::TriangulationFailure(format!(
            "target edge length must be positive, got {target_edge}"
        )));
    }
    if poly.len() < 4 || poly.area() <= 0.0 {
        return Err(GeomError::TriangulationFailure("invalid polygon".into()));
    }
    let bbox = poly.bbox();
    let diag = bbox.diagonal();
    let area_tol = 1e-12 * diag * diag;

    let n = poly.len();
    let mut pos: Vec<Point> = poly.vertices().to_vec();
    let mut kinds = vec![NodeKind::ModelVertex; n];
    let mut ring = Vec::new();
    for (i, (a, b)) in poly.edges().enumerate() {
        ring.push(i);
        let segments = ((a.dist(b) / target_edge) - 1e-9).ceil().max(1.0) as usize;
        for k in 1..segments {
            let t = k as f64 / segments as f64;
            ring.push(pos.len());
            pos.push(a.add(b.sub(a).scale(t)));
            kinds.push(NodeKind::Boundary);
        }
    }

    let boundary: BTreeSet<(usize, usize)> = (0..ring.len())
        .map(|i| {
            let (u, v) = (ring[i], ring[(i + 1) % ring.len()]);
            (u.min(v), u.max(v))
        })
        .collect();
    let mut tris = ear_clip(&pos, ring, area_tol)?;

    let nx = (bbox.width() / target_edge).round().max(1.0) as usize;
    let ny = (bbox.height() / target_edge).round().max(1.0) as usize;
    for j in 1..ny {
        for i in 1..nx {
            let p = Point::new(
                bbox.min.x + bbox.width() * i as f64 / nx as f64,
                bbox.min.y + bbox.height() * j as f64 / ny as f64,
            );
            if poly.contains(p) && poly.boundary_distance(p) >= 0.5 * target_edge {
                let id = pos.len();
                pos.push(p);
                if insert_point(&pos, &mut tris, id, area_tol) {
                    kinds.push(NodeKind::Interior);
                } else {
                    pos.pop();
                }
            }
        }
    }

    delaunay_flips(&pos, &mut tris, &boundary, area_tol * diag * diag)?;

    let mut edges: Vec<(usize, usize)> = tris
        .iter()
        .flat_map(|t| (0..3).map(move |k| (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]))))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    let scale = 1.0 / (2.0 * target_edge * std::f64::consts::SQRT_2);
    let mut directed = Vec::with_capacity(2 * edges.len());
    let mut edge_attrs = Vec::with_capacity(2 * edges.len());
    for &(u, v) in &edges {
        for (s, t) in [(u, v), (v, u)] {
            let d = pos[t].sub(pos[s]);
            directed.push((s, t));
            edge_attrs.push([
                (d.x * scale + 0.5).clamp(0.0, 1.0),
                (d.y * scale + 0.5).clamp(0.0, 1.0),
            ]);
        }
    }
    let model_vertex_map = (0..pos.len()).map(|i| (i < n).then_some(i)).collect();
    Ok(ShapeGraph {
        node_positions: pos,
        node_types: kinds,
        triangles: tris,
        edges,
        directed,
        edge_attrs,
        model_vertex_map,
    })
}

fn ear_clip(pos: &[Point], mut ring: Vec<usize>, tol: f64) -> Result<Vec<[usize; 3]>, GeomError> {
    let mut tris = Vec::with_capacity(ring.len());
    while ring.len() > 3 {
        let m = ring.len();
        let mut best: Option<(usize, f64)> = None;
        for i in 0..m {
            let (ia, ib, ic) = (ring[(i + m - 1) % m], ring[i], ring[(i + 1) % m]);
            let (a, b, c) = (pos[ia], pos[ib], pos[ic]);
            if orient(a, b, c) <= tol {
                continue;
            }
            let blocked = ring.iter().any(|&j| {
                j != ia
                    && j != ib
                    && j != ic
                    && orient(a, b, pos[j]) >= -tol
                    && orient(b, c, pos[j]) >= -tol
                    && orient(c, a, pos[j]) >= -tol
            });
            if blocked {
                continue;
            }
            let q = min_angle(a, b, c);
            if best.is_none_or(|(_, bq)| q > bq) {
                best = Some((i, q));
            }
        }
        let (i, _) = best.ok_or_else(|| GeomError::TriangulationFailure("no ear found".into()))?;
        tris.push([ring[(i + m - 1) % m], ring[i], ring[(i + 1) % m]]);
        ring.remove(i);
    }
    if orient(pos[ring[0]], pos[ring[1]], pos[ring[2]]) <= tol {
        return Err(GeomError::TriangulationFailure("degenerate final triangle".into()));
    }
    tris.push([ring[0], ring[1], ring[2]]);
    Ok(tris)
}

fn min_angle(a: Point, b: Point, c: Point) -> f64 {
    let ang = |p: Point, q: Point, r: Point| {
        let u = q.sub(p);
        let v = r.sub(p);
        (u.x * v.y - u.y * v.x).abs().atan2(u.x * v.x + u.y * v.y)
    };
    ang(a, b, c).min(ang(b, c, a)).min(ang(c, a, b))
}

/// Splits the triangle (or pair of triangles, for a point on a shared
/// edge) containing node `id`. Returns false if no containing triangle was
/// found.
fn insert_point(pos: &[Point], tris: &mut Vec<[usize; 3]>, id: usize, tol: f64) -> bool {
    let p = pos[id];
    for t in 0..tris.len() {
        let [a, b, c] = tris[t];
        let o = [
            orient(pos[a], pos[b], p),
            orient(pos[b], pos[c], p),
            orient(pos[c], pos[a], p),
        ];
        if o.iter().any(|&x| x < -tol) {
            continue;
        }
        let on_edge: Vec<usize> = (0..3).filter(|&k| o[k].abs() <= tol).collect();
        match on_edge.as_slice() {
            [] => {
                tris[t] = [a, b, id];
                tris.push([b, c, id]);
                tris.push([c, a, id]);
                return true;
            }
            [k] => {
                let corners = [a, b, c];
                let (u, v, w) = (corners[*k], corners[(k + 1) % 3], corners[(k + 2) % 3]);
                let Some(other) = tris
                    .iter()
                    .position(|s| (0..3).any(|j| s[j] == v && s[(j + 1) % 3] == u))
                else {
                    return false;
                };
                let s = tris[other];
                let j = (0..3).find(|&j| s[j] == v && s[(j + 1) % 3] == u).expect("shared edge");
                let x = s[(j + 2) % 3];
                tris[t] = [u, id, w];
                tris.push([id, v, w]);
                tris[other] = [v, id, x];
                tris.push([id, u, x]);
                return true;
            }
            _ => return false,
        }
    }
    false
}

fn incircle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let (adx, ady) = (a.x - d.x, a.y - d.y);
    let (bdx, bdy) = (b.x - d.x, b.y - d.y);
    let (cdx, cdy) = (c.x - d.x, c.y - d.y);
    (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
        + (bdx * bdx + bdy * bdy) * (cdx * ady - adx * cdy)
        + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady)
}

fn delaunay_flips(
    pos: &[Point],
    tris: &mut [[usize; 3]],
    fixed: &BTreeSet<(usize, usize)>,
    circle_tol: f64,
) -> Result<(), GeomError> {
    let limit = 50 * tris.len() * tris.len() + 100;
    for _ in 0..limit {
        let mut owners: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
        for (t, tri) in tris.iter().enumerate() {
            for k in 0..3 {
                let (u, v) = (tri[k], tri[(k + 1) % 3]);
                owners.entry((u.min(v), u.max(v))).or_default().push((t, k));
            }
        }
        let mut flipped = false;
        for (key, own) in &owners {
            if own.len() != 2 || fixed.contains(key) {
                continue;
            }
            let (t1, k1) = own[0];
            let (t2, k2) = own[1];
            let (a, b, c) = (tris[t1][k1], tris[t1][(k1 + 1) % 3], tris[t1][(k1 + 2) % 3]);
            let d = tris[t2][(k2 + 2) % 3];
            if incircle(pos[a], pos[b], pos[c], pos[d]) <= circle_tol {
                continue;
            }
            if orient(pos[a], pos[d], pos[c]) <= 0.0 || orient(pos[d], pos[b], pos[c]) <= 0.0 {
                continue;
            }
            tris[t1] = [a, d, c];
            tris[t2] = [d, b, c];
            flipped = true;
            break;
        }
        if !flipped {
            return Ok(());
        }
    }
    Err(GeomError::TriangulationFailure("edge flipping did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

/// Both endpoints lie on the same polygon edge.
fn is_boundary_pair(poly: &RectilinearPolygon, pos: &[Point], u: usize, v: usize) -> bool {
    let tol = poly.tolerance();
    poly.edges().any(|(a, b)| {
        crate::geom::polygon::segment_distance(pos[u], a, b) <= tol
            && crate::geom::polygon::segment_distance(pos[v], a, b) <= tol
    })
}

    fn square() -> RectilinearPolygon {
        RectilinearPolygon::rectangle("sq", Point::new(0., 0.), Point::new(1., 1.)).unwrap()
    }

    fn l_shape() -> RectilinearPolygon {
        let pts = [(0., 0.), (2., 0.), (2., 1.), (1., 1.), (1., 2.), (0., 2.)];
        RectilinearPolygon::new("L", pts.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap()
    }

    fn tri_area(g: &ShapeGraph) -> f64 {
        g.triangles
            .iter()
            .map(|t| orient(g.node_positions[t[0]], g.node_positions[t[1]], g.node_positions[t[2]]) / 2.0)
            .sum()
    }

    #[test]
    fn coarse_square() {
        let g = triangulate(&square(), 2.0).unwrap();
        assert_eq!(g.node_count(), 4);
        assert!(g.node_types.iter().all(|&k| k == NodeKind::ModelVertex));
        assert_eq!(g.triangles.len(), 2);
        assert_eq!(g.edges.len(), 5);
        assert_eq!(g.directed.len(), 10);
    }

    #[test]
    fn refined_square_tags() {
        let g = triangulate(&square(), 0.5).unwrap();
        for (i, p) in g.node_positions.iter().enumerate() {
            let on_boundary = p.x == 0.0 || p.x == 1.0 || p.y == 0.0 || p.y == 1.0;
            let corner = (p.x == 0.0 || p.x == 1.0) && (p.y == 0.0 || p.y == 1.0);
            let expected = match (corner, on_boundary) {
                (true, _) => NodeKind::ModelVertex,
                (false, true) => NodeKind::Boundary,
                _ => NodeKind::Interior,
            };
            assert_eq!(g.node_types[i], expected, "node {i} at {p:?}");
        }
        // Centre point lies on the ear-clip diagonal and must still go in.
        assert!(g.node_types.contains(&NodeKind::Interior));
        assert!((tri_area(&g) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn l_shape_model_vertices() {
        for h in [0.1, 0.37, 1.0, 5.0] {
            let g = triangulate(&l_shape(), h).unwrap();
            let model = g.node_types.iter().filter(|&&k| k == NodeKind::ModelVertex).count();
            assert_eq!(model, 6);
            assert_eq!(g.model_nodes(), (0..6).collect::<Vec<_>>());
            assert!((tri_area(&g) - 3.0).abs() < 1e-9 * 3.0);
            assert!(g.triangles.iter().all(|t| orient(
                g.node_positions[t[0]],
                g.node_positions[t[1]],
                g.node_positions[t[2]]
            ) > 0.0));
        }
    }

    #[test]
    fn boundary_segments_respect_target() {
        let g = triangulate(&l_shape(), 0.3).unwrap();
        for &(u, v) in &g.edges {
            let both_on_boundary = g.node_types[u] != NodeKind::Interior && g.node_types[v] != NodeKind::Interior;
            if both_on_boundary && is_boundary_pair(&l_shape(), &g.node_positions, u, v) {
                assert!(g.node_positions[u].dist(g.node_positions[v]) <= 0.3 + 1e-12);
            }
        }
    }

    #[test]
    fn edge_attributes_in_unit_square() {
        let g = triangulate(&l_shape(), 0.4).unwrap();
        assert_eq!(g.edge_attrs.len(), g.directed.len());
        for a in &g.edge_attrs {
            assert!((0.0..=1.0).contains(&a[0]) && (0.0..=1.0).contains(&a[1]));
        }
    }

    #[test]
    fn rejects_nonpositive_target() {
        assert!(triangulate(&square(), 0.0).is_err());
        assert!(triangulate(&square(), f64::NAN).is_err());
    }
}
