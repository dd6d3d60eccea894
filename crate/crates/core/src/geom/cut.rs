use super::grid::CellGrid;
use super::{CutAction, Direction, GeomError, RectilinearPolygon, REL_TOL};

/// Splits `poly` with the infinite axis-parallel line through the chosen
/// vertex.
///
/// Returns every resulting part, each simplified, counter-clockwise and
/// ordered by its lowest-then-leftmost corner. A line that misses the open
/// interior returns `[poly.clone()]`.
pub fn cut(poly: &RectilinearPolygon, action: CutAction) -> Result<Vec<RectilinearPolygon>, GeomError> {
    if action.vertex_index >= poly.len() {
        return Err(GeomError::VertexOutOfRange {
            index: action.vertex_index,
            len: poly.len(),
        });
    }
    let v = poly.vertex(action.vertex_index);
    let grid = CellGrid::from_polygon(poly);
    let wall = match action.direction {
        Direction::XAxis => (true, grid.line_index(v.y, true)),
        Direction::YAxis => (false, grid.line_index(v.x, false)),
    };
    let regions = grid.components(Some(wall));
    if regions.len() <= 1 {
        return Ok(vec![poly.clone()]);
    }
    let diag = poly.bbox().diagonal();
    let mut parts = Vec::with_capacity(regions.len());
    for region in &regions {
        let area = grid.area(region);
        if area <= REL_TOL * diag * diag {
            return Err(GeomError::DegenerateShape(area));
        }
        parts.push(grid.trace(region)?);
    }
    parts.sort_by(|a, b| {
        (a[0].y, a[0].x)
            .partial_cmp(&(b[0].y, b[0].x))
            .expect("finite coordinates")
    });
    Ok(parts
        .into_iter()
        .enumerate()
        .map(|(i, pts)| RectilinearPolygon::from_trusted(format!("{}.{}", poly.id(), i), pts))
        .collect())
}
