//! Compressed cell grids over the distinct coordinates of a rectilinear
//! region. Every cell is either fully inside or fully outside, which makes
//! cutting, union and boundary tracing exact.

use std::collections::VecDeque;

use super::{GeomError, Point, RectilinearPolygon};

/// A set of cells over the grid spanned by `xs` and `ys`.
#[derive(Clone, Debug)]
pub struct CellGrid {
    xs: Vec<f64>,
    ys: Vec<f64>,
    inside: Vec<bool>,
}

/// A subset of the cells of a [`CellGrid`], stored as a membership mask.
#[derive(Clone, Debug)]
pub struct Region {
    mask: Vec<bool>,
}

impl Region {
    pub fn cell_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

impl CellGrid {
    pub fn from_polygon(poly: &RectilinearPolygon) -> Self {
        let tol = poly.tolerance();
        let xs = distinct(poly.vertices().iter().map(|p| p.x), tol);
        let ys = distinct(poly.vertices().iter().map(|p| p.y), tol);
        let mut grid = Self::empty(xs, ys);
        for b in 0..grid.ny() {
            for a in 0..grid.nx() {
                let c = grid.cell_center(a, b);
                let idx = b * grid.nx() + a;
                grid.inside[idx] = poly.contains(c);
            }
        }
        grid
    }

    /// Union of axis-aligned rectangles given as `(min, max)` corners.
    pub fn from_rects(rects: &[(Point, Point)]) -> Self {
        let coords = |f: fn(&Point) -> f64| {
            distinct(rects.iter().flat_map(|(a, b)| [f(a), f(b)]), 0.0)
        };
        let mut grid = Self::empty(coords(|p| p.x), coords(|p| p.y));
        for b in 0..grid.ny() {
            for a in 0..grid.nx() {
                let c = grid.cell_center(a, b);
                let idx = b * grid.nx() + a;
                grid.inside[idx] = rects
                    .iter()
                    .any(|(lo, hi)| c.x > lo.x && c.x < hi.x && c.y > lo.y && c.y < hi.y);
            }
        }
        grid
    }

    fn empty(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len().saturating_sub(1) * ys.len().saturating_sub(1);
        Self {
            xs,
            ys,
            inside: vec![false; n],
        }
    }

    pub fn nx(&self) -> usize {
        self.xs.len().saturating_sub(1)
    }

    pub fn ny(&self) -> usize {
        self.ys.len().saturating_sub(1)
    }

    fn cell_center(&self, a: usize, b: usize) -> Point {
        Point::new(
            0.5 * (self.xs[a] + self.xs[a + 1]),
            0.5 * (self.ys[b] + self.ys[b + 1]),
        )
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn area(&self, region: &Region) -> f64 {
        let mut area = 0.0;
        for b in 0..self.ny() {
            for a in 0..self.nx() {
                if region.mask[b * self.nx() + a] {
                    area += (self.xs[a + 1] - self.xs[a]) * (self.ys[b + 1] - self.ys[b]);
                }
            }
        }
        area
    }

    /// Index of the grid line closest to `value` along x (`horizontal ==
    /// false`) or y (`horizontal == true`).
    pub fn line_index(&self, value: f64, horizontal: bool) -> usize {
        let coords = if horizontal { &self.ys } else { &self.xs };
        let mut best = 0;
        for (i, c) in coords.iter().enumerate() {
            if (c - value).abs() < (coords[best] - value).abs() {
                best = i;
            }
        }
        best
    }

    /// Edge-connected components of the inside cells. When `wall` is given
    /// as `(horizontal, line)`, cells on opposite sides of that grid line
    /// are never connected.
    pub fn components(&self, wall: Option<(bool, usize)>) -> Vec<Region> {
        let (nx, ny) = (self.nx(), self.ny());
        let mut label = vec![usize::MAX; nx * ny];
        let mut regions = Vec::new();
        for start in 0..nx * ny {
            if !self.inside[start] || label[start] != usize::MAX {
                continue;
            }
            let id = regions.len();
            let mut mask = vec![false; nx * ny];
            let mut queue = VecDeque::from([start]);
            label[start] = id;
            while let Some(c) = queue.pop_front() {
                mask[c] = true;
                let (a, b) = (c % nx, c / nx);
                let mut visit = |na: usize, nb: usize| {
                    let n = nb * nx + na;
                    if self.inside[n] && label[n] == usize::MAX {
                        label[n] = id;
                        queue.push_back(n);
                    }
                };
                let blocked_x = |to: usize| matches!(wall, Some((false, line)) if line == to);
                let blocked_y = |to: usize| matches!(wall, Some((true, line)) if line == to);
                if a > 0 && !blocked_x(a) {
                    visit(a - 1, b);
                }
                if a + 1 < nx && !blocked_x(a + 1) {
                    visit(a + 1, b);
                }
                if b > 0 && !blocked_y(b) {
                    visit(a, b - 1);
                }
                if b + 1 < ny && !blocked_y(b + 1) {
                    visit(a, b + 1);
                }
            }
            regions.push(Region { mask });
        }
        regions
    }

    fn member(&self, region: &Region, a: isize, b: isize) -> bool {
        a >= 0
            && b >= 0
            && (a as usize) < self.nx()
            && (b as usize) < self.ny()
            && region.mask[b as usize * self.nx() + a as usize]
    }

    /// True if two cells of the region touch only at a corner, which would
    /// make the traced boundary non-simple.
    pub fn has_pinch(&self, region: &Region) -> bool {
        for b in 0..=self.ny() as isize {
            for a in 0..=self.nx() as isize {
                let ll = self.member(region, a - 1, b - 1);
                let lr = self.member(region, a, b - 1);
                let ul = self.member(region, a - 1, b);
                let ur = self.member(region, a, b);
                if (ll && ur && !lr && !ul) || (lr && ul && !ll && !ur) {
                    return true;
                }
            }
        }
        false
    }

    /// True if some cell outside the region cannot reach the grid border.
    pub fn has_hole(&self, region: &Region) -> bool {
        let (nx, ny) = (self.nx() as isize, self.ny() as isize);
        let w = (nx + 2) as usize;
        let h = (ny + 2) as usize;
        let mut seen = vec![false; w * h];
        let mut queue = VecDeque::from([(-1isize, -1isize)]);
        seen[0] = true;
        while let Some((a, b)) = queue.pop_front() {
            for (da, db) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let (na, nb) = (a + da, b + db);
                if na < -1 || nb < -1 || na > nx || nb > ny {
                    continue;
                }
                let idx = (nb + 1) as usize * w + (na + 1) as usize;
                if seen[idx] || self.member(region, na, nb) {
                    continue;
                }
                seen[idx] = true;
                queue.push_back((na, nb));
            }
        }
        (0..ny).any(|b| {
            (0..nx).any(|a| {
                !self.member(region, a, b) && !seen[(b + 1) as usize * w + (a + 1) as usize]
            })
        })
    }

    /// Counter-clockwise outer boundary of a simply connected, pinch-free
    /// region, starting at its lowest-then-leftmost corner, with collinear
    /// vertices removed.
    pub fn trace(&self, region: &Region) -> Result<Vec<Point>, GeomError> {
        let nx = self.nx();
        let stride = nx + 1;
        let node = |a: usize, b: usize| b * stride + a;
        let mut next = vec![usize::MAX; stride * (self.ny() + 1)];
        let mut edge_count = 0usize;
        let mut link = |from: usize, to: usize| -> Result<(), GeomError> {
            if next[from] != usize::MAX {
                return Err(GeomError::SelfIntersecting);
            }
            next[from] = to;
            edge_count += 1;
            Ok(())
        };
        for b in 0..self.ny() {
            for a in 0..nx {
                if !region.mask[b * nx + a] {
                    continue;
                }
                let (ai, bi) = (a as isize, b as isize);
                if !self.member(region, ai, bi - 1) {
                    link(node(a, b), node(a + 1, b))?;
                }
                if !self.member(region, ai + 1, bi) {
                    link(node(a + 1, b), node(a + 1, b + 1))?;
                }
                if !self.member(region, ai, bi + 1) {
                    link(node(a + 1, b + 1), node(a, b + 1))?;
                }
                if !self.member(region, ai - 1, bi) {
                    link(node(a, b + 1), node(a, b))?;
                }
            }
        }
        let start = (0..next.len())
            .find(|&i| next[i] != usize::MAX)
            .ok_or(GeomError::DegenerateShape(0.0))?;
        let mut corners = Vec::new();
        let mut cur = start;
        loop {
            corners.push(cur);
            cur = next[cur];
            if cur == usize::MAX {
                return Err(GeomError::SelfIntersecting);
            }
            if cur == start {
                break;
            }
            if corners.len() > edge_count {
                return Err(GeomError::SelfIntersecting);
            }
        }
        if corners.len() != edge_count {
            return Err(GeomError::NotSimplyConnected);
        }
        let n = corners.len();
        let pt = |i: usize| Point::new(self.xs[i % stride], self.ys[i / stride]);
        let mut out = Vec::new();
        for k in 0..n {
            let prev = pt(corners[(k + n - 1) % n]);
            let here = pt(corners[k]);
            let nxt = pt(corners[(k + 1) % n]);
            let straight = (prev.x == here.x && here.x == nxt.x) || (prev.y == here.y && here.y == nxt.y);
            if !straight {
                out.push(here);
            }
        }
        // Row-major start search already gives the lowest row; rotate so the
        // first kept corner is the lowest-then-leftmost one.
        let first = (0..out.len())
            .min_by(|&i, &j| {
                (out[i].y, out[i].x)
                    .partial_cmp(&(out[j].y, out[j].x))
                    .expect("finite coordinates")
            })
            .unwrap_or(0);
        out.rotate_left(first);
        Ok(out)
    }
}

fn distinct(values: impl Iterator<Item = f64>, tol: f64) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    let mut out: Vec<f64> = Vec::with_capacity(v.len());
    for x in v {
        match out.last() {
            Some(&last) if (x - last).abs() <= tol => {}
            _ => out.push(x),
        }
    }
    out
}
