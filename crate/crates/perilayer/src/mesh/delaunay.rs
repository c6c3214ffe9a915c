//! Incremental Bowyer–Watson Delaunay triangulation with exact predicates and
//! a quadtree-driven point generator for constrained regions.
//!
//! Constraint segments are recovered by construction: every interior point
//! that would lie inside the diametral circle of a boundary segment is
//! discarded, so each segment is a Gabriel edge and therefore belongs to the
//! Delaunay triangulation of the final point set.

use std::collections::HashMap;

use robust::{incircle, orient2d, Coord};

use crate::error::{Error, Result};
use crate::geometry::{distance_to_segment, Point};

const NONE: usize = usize::MAX;

fn c(p: Point) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

fn orient(a: Point, b: Point, p: Point) -> f64 {
    orient2d(c(a), c(b), c(p))
}

/// Delaunay triangulation of a point set. Returns counter-clockwise triangles
/// indexing into `points`. Duplicate points are an error.
pub fn delaunay(points: &[Point]) -> Result<Vec<[usize; 3]>> {
    let n = points.len();
    if n < 3 {
        return Err(Error::Mesh("need at least three points".into()));
    }
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for p in points {
        xmin = xmin.min(p[0]);
        xmax = xmax.max(p[0]);
        ymin = ymin.min(p[1]);
        ymax = ymax.max(p[1]);
    }
    let span = (xmax - xmin).max(ymax - ymin).max(1e-12);
    let cx = 0.5 * (xmin + xmax);
    let cy = 0.5 * (ymin + ymax);
    let big = 64.0 * span;
    let mut pts: Vec<Point> = points.to_vec();
    pts.push([cx - big, cy - big]);
    pts.push([cx + big, cy - big]);
    pts.push([cx, cy + big]);

    let mut tri: Vec<[usize; 3]> = vec![[n, n + 1, n + 2]];
    let mut nbr: Vec<[usize; 3]> = vec![[NONE; 3]];
    let mut alive: Vec<bool> = vec![true];
    let mut last = 0usize;

    let order = hilbert_order(points, xmin, ymin, span);
    let mut stack = Vec::new();
    let mut cavity = Vec::new();
    let mut in_cavity: Vec<bool> = vec![false];
    let mut boundary: Vec<(usize, usize, usize)> = Vec::new();

    for &ip in &order {
        let p = pts[ip];
        // Visibility walk to the triangle containing p.
        let mut t = last;
        if !alive[t] {
            t = alive.iter().rposition(|&a| a).unwrap();
        }
        let mut steps = 0usize;
        'walk: loop {
            steps += 1;
            if steps > 4 * tri.len() + 100 {
                return Err(Error::Mesh("point location did not terminate".into()));
            }
            let v = tri[t];
            for k in 0..3 {
                let a = pts[v[(k + 1) % 3]];
                let b = pts[v[(k + 2) % 3]];
                if orient(a, b, p) < 0.0 {
                    let nt = nbr[t][k];
                    if nt == NONE {
                        return Err(Error::Mesh("point outside the super triangle".into()));
                    }
                    t = nt;
                    continue 'walk;
                }
            }
            break;
        }
        let v = tri[t];
        for &k in &v {
            if pts[k] == p {
                return Err(Error::Mesh(format!("duplicate point {:?}", p)));
            }
        }
        // Cavity of triangles whose circumcircle contains p.
        cavity.clear();
        stack.clear();
        stack.push(t);
        in_cavity[t] = true;
        while let Some(s) = stack.pop() {
            cavity.push(s);
            for k in 0..3 {
                let nt = nbr[s][k];
                if nt != NONE && !in_cavity[nt] {
                    let w = tri[nt];
                    if incircle(c(pts[w[0]]), c(pts[w[1]]), c(pts[w[2]]), c(p)) > 0.0 {
                        in_cavity[nt] = true;
                        stack.push(nt);
                    }
                }
            }
        }
        // Boundary edges of the cavity, oriented counter-clockwise.
        boundary.clear();
        for &s in &cavity {
            for k in 0..3 {
                let nt = nbr[s][k];
                if nt == NONE || !in_cavity[nt] {
                    boundary.push((tri[s][(k + 1) % 3], tri[s][(k + 2) % 3], nt));
                }
            }
        }
        for &s in &cavity {
            alive[s] = false;
            in_cavity[s] = false;
        }
        // Fan new triangles from p.
        let mut by_start: HashMap<usize, usize> = HashMap::with_capacity(boundary.len());
        let mut by_end: HashMap<usize, usize> = HashMap::with_capacity(boundary.len());
        let first = tri.len();
        for (j, &(a, b, outside)) in boundary.iter().enumerate() {
            let id = first + j;
            tri.push([ip, a, b]);
            nbr.push([outside, NONE, NONE]);
            alive.push(true);
            in_cavity.push(false);
            if outside != NONE {
                for k in 0..3 {
                    let w = tri[outside];
                    if w[(k + 1) % 3] == b && w[(k + 2) % 3] == a {
                        nbr[outside][k] = id;
                    }
                }
            }
            by_start.insert(a, id);
            by_end.insert(b, id);
        }
        for j in 0..boundary.len() {
            let id = first + j;
            let [_, a, b] = tri[id];
            // Edge (b, p) is opposite vertex a; shared with the triangle starting at b.
            nbr[id][1] = *by_start
                .get(&b)
                .ok_or_else(|| Error::Mesh("open cavity".into()))?;
            // Edge (p, a) is opposite vertex b; shared with the triangle ending at a.
            nbr[id][2] = *by_end
                .get(&a)
                .ok_or_else(|| Error::Mesh("open cavity".into()))?;
        }
        last = first;
    }

    let mut out = Vec::new();
    for (t, v) in tri.iter().enumerate() {
        if alive[t] && v.iter().all(|&k| k < n) {
            out.push(*v);
        }
    }
    Ok(out)
}

fn hilbert_order(points: &[Point], xmin: f64, ymin: f64, span: f64) -> Vec<usize> {
    let side = (1u64 << 16) as f64 - 1.0;
    let mut keys: Vec<(u64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let x = (((p[0] - xmin) / span) * side) as u64;
            let y = (((p[1] - ymin) / span) * side) as u64;
            (hilbert_d(16, x, y), i)
        })
        .collect();
    keys.sort_unstable();
    keys.into_iter().map(|(_, i)| i).collect()
}

fn hilbert_d(order: u32, mut x: u64, mut y: u64) -> u64 {
    let n = 1u64 << order;
    let mut d = 0u64;
    let mut s = n / 2;
    while s > 0 {
        let rx = ((x & s) > 0) as u64;
        let ry = ((y & s) > 0) as u64;
        d += s * s * ((3 * rx) ^ ry);
        if ry == 0 {
            if rx == 1 {
                x = s - 1 - x.min(s - 1);
                y = s - 1 - y.min(s - 1);
            }
            std::mem::swap(&mut x, &mut y);
        }
        s /= 2;
    }
    d
}

/// A planar region described by closed boundary loops, a membership test and
/// a target element size.
pub struct Region<'a> {
    /// Closed boundary loops (outer boundary and hole boundaries). Consecutive
    /// points of each loop are joined by a constraint segment.
    pub loops: Vec<Vec<Point>>,
    /// Open polylines that must appear as edges (not closed).
    pub polylines: Vec<Vec<Point>>,
    /// True for points strictly inside the region.
    pub inside: &'a dyn Fn(Point) -> bool,
    /// Target element size.
    pub size: &'a dyn Fn(Point) -> f64,
    /// Bounding box `[xmin, xmax, ymin, ymax]`.
    pub bbox: [f64; 4],
}

/// Result of meshing a region: the boundary points come first, in loop order
/// followed by polyline order, then generated interior points.
pub struct RegionMesh {
    pub points: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_count: usize,
}

struct SegmentGrid {
    segs: Vec<(Point, Point)>,
    cells: HashMap<(i64, i64), Vec<usize>>,
    cell: f64,
}

impl SegmentGrid {
    fn new(segs: Vec<(Point, Point)>, cell: f64) -> Self {
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, (a, b)) in segs.iter().enumerate() {
            let i0 = (a[0].min(b[0]) / cell).floor() as i64;
            let i1 = (a[0].max(b[0]) / cell).floor() as i64;
            let j0 = (a[1].min(b[1]) / cell).floor() as i64;
            let j1 = (a[1].max(b[1]) / cell).floor() as i64;
            for ii in i0..=i1 {
                for jj in j0..=j1 {
                    cells.entry((ii, jj)).or_default().push(i);
                }
            }
        }
        SegmentGrid { segs, cells, cell }
    }

    /// True if `p` is closer than `r` to some segment or lies inside the
    /// diametral circle of some segment.
    fn encroaches(&self, p: Point, r: f64) -> bool {
        let reach = r.max(self.cell);
        let i0 = ((p[0] - reach) / self.cell).floor() as i64;
        let i1 = ((p[0] + reach) / self.cell).floor() as i64;
        let j0 = ((p[1] - reach) / self.cell).floor() as i64;
        let j1 = ((p[1] + reach) / self.cell).floor() as i64;
        for ii in i0..=i1 {
            for jj in j0..=j1 {
                if let Some(list) = self.cells.get(&(ii, jj)) {
                    for &s in list {
                        let (a, b) = self.segs[s];
                        if distance_to_segment(p, a, b) < r {
                            return true;
                        }
                        let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                        let half = 0.5 * ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
                        let d = ((p[0] - m[0]).powi(2) + (p[1] - m[1]).powi(2)).sqrt();
                        if d < half * 1.05 {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

/// Meshes a region: generates interior points on a size-driven quadtree,
/// discards points encroaching on boundary segments, triangulates and keeps
/// the triangles whose centroid lies inside the region. Every boundary
/// segment is checked to be present in the result.
pub fn mesh_region(region: &Region) -> Result<RegionMesh> {
    let mut points: Vec<Point> = Vec::new();
    let mut segments: Vec<(usize, usize)> = Vec::new();
    for lp in &region.loops {
        let start = points.len();
        for (k, p) in lp.iter().enumerate() {
            points.push(*p);
            segments.push((start + k, start + (k + 1) % lp.len()));
        }
    }
    for pl in &region.polylines {
        let start = points.len();
        for (k, p) in pl.iter().enumerate() {
            points.push(*p);
            if k + 1 < pl.len() {
                segments.push((start + k, start + k + 1));
            }
        }
    }
    // Polylines may share endpoints with loops: merge exact duplicates.
    let mut canonical: Vec<usize> = (0..points.len()).collect();
    {
        let mut seen: HashMap<(u64, u64), usize> = HashMap::new();
        for i in 0..points.len() {
            let key = (points[i][0].to_bits(), points[i][1].to_bits());
            match seen.get(&key) {
                Some(&j) => canonical[i] = j,
                None => {
                    seen.insert(key, i);
                }
            }
        }
    }
    let boundary_count = points.len();
    let seg_pts: Vec<(Point, Point)> = segments
        .iter()
        .map(|&(a, b)| (points[a], points[b]))
        .collect();
    let min_seg = seg_pts
        .iter()
        .map(|(a, b)| ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt())
        .fold(f64::INFINITY, f64::min);
    let grid = SegmentGrid::new(seg_pts, (4.0 * min_seg).max(1e-6));

    let interior = quadtree_points(region);
    let mut all: Vec<Point> = Vec::with_capacity(boundary_count + interior.len());
    all.extend_from_slice(&points);
    for p in interior {
        let s = (region.size)(p);
        if (region.inside)(p) && !grid.encroaches(p, 0.55 * s) {
            all.push(p);
        }
    }
    // Delaunay on the unique points.
    let mut unique_index: Vec<usize> = Vec::with_capacity(all.len());
    let mut unique_pts: Vec<Point> = Vec::with_capacity(all.len());
    let mut back: Vec<usize> = Vec::with_capacity(all.len());
    for i in 0..all.len() {
        if i < boundary_count && canonical[i] != i {
            unique_index.push(unique_index[canonical[i]]);
        } else {
            unique_index.push(unique_pts.len());
            unique_pts.push(all[i]);
            back.push(i);
        }
    }
    let tris = delaunay(&unique_pts)?;
    let mut kept: Vec<[usize; 3]> = Vec::new();
    for t in tris {
        let a = unique_pts[t[0]];
        let b = unique_pts[t[1]];
        let cc = unique_pts[t[2]];
        let g = [(a[0] + b[0] + cc[0]) / 3.0, (a[1] + b[1] + cc[1]) / 3.0];
        if (region.inside)(g) {
            kept.push([back[t[0]], back[t[1]], back[t[2]]]);
        }
    }
    // Constraint recovery check.
    let mut edges: std::collections::HashSet<(usize, usize)> = std::collections::HashSet::new();
    for t in &kept {
        for k in 0..3 {
            let a = t[k];
            let b = t[(k + 1) % 3];
            edges.insert((a.min(b), a.max(b)));
        }
    }
    for &(a, b) in &segments {
        let (a, b) = (back[unique_index[a]], back[unique_index[b]]);
        if !edges.contains(&(a.min(b), a.max(b))) {
            return Err(Error::Mesh(format!(
                "constraint segment {:?}-{:?} missing from the triangulation",
                all[a], all[b]
            )));
        }
    }
    // Remap boundary duplicates to their canonical copy; drop unused points.
    let mut used = vec![false; all.len()];
    for t in &kept {
        for &k in t {
            used[k] = true;
        }
    }
    for i in 0..boundary_count {
        used[i] = true;
    }
    let mut remap = vec![NONE; all.len()];
    let mut out_pts = Vec::new();
    for i in 0..all.len() {
        if used[i] {
            remap[i] = out_pts.len();
            out_pts.push(all[i]);
        }
    }
    let triangles = kept
        .into_iter()
        .map(|t| [remap[t[0]], remap[t[1]], remap[t[2]]])
        .collect();
    Ok(RegionMesh {
        points: out_pts,
        triangles,
        boundary_count,
    })
}

fn quadtree_points(region: &Region) -> Vec<Point> {
    let [xmin, xmax, ymin, ymax] = region.bbox;
    let side = (xmax - xmin).max(ymax - ymin);
    const MAX_DEPTH: u32 = 22;
    let unit = side / (1u64 << MAX_DEPTH) as f64;
    let mut corners: std::collections::BTreeSet<(u64, u64)> = std::collections::BTreeSet::new();
    // Each cell is (ix, iy, depth) with integer coordinates at MAX_DEPTH.
    let mut stack = vec![(0u64, 0u64, 0u32)];
    while let Some((ix, iy, d)) = stack.pop() {
        let len = 1u64 << (MAX_DEPTH - d);
        let x0 = xmin + ix as f64 * unit;
        let y0 = ymin + iy as f64 * unit;
        let sz = len as f64 * unit;
        if x0 > xmax || y0 > ymax {
            continue;
        }
        let center = [x0 + 0.5 * sz, y0 + 0.5 * sz];
        let target = [
            center,
            [x0, y0],
            [x0 + sz, y0],
            [x0, y0 + sz],
            [x0 + sz, y0 + sz],
        ]
        .iter()
        .map(|&p| (region.size)(p))
        .fold(f64::INFINITY, f64::min);
        if sz > target && d < MAX_DEPTH {
            let half = len / 2;
            stack.push((ix, iy, d + 1));
            stack.push((ix + half, iy, d + 1));
            stack.push((ix, iy + half, d + 1));
            stack.push((ix + half, iy + half, d + 1));
        } else {
            for (dx, dy) in [(0, 0), (len, 0), (0, len), (len, len)] {
                corners.insert((ix + dx, iy + dy));
            }
        }
    }
    corners
        .into_iter()
        .map(|(i, j)| [xmin + i as f64 * unit, ymin + j as f64 * unit])
        .filter(|p| p[0] > xmin && p[0] < xmax && p[1] > ymin && p[1] < ymax)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_delaunay(points: &[Point], tris: &[[usize; 3]]) -> bool {
        for t in tris {
            for (i, p) in points.iter().enumerate() {
                if t.contains(&i) {
                    continue;
                }
                if incircle(c(points[t[0]]), c(points[t[1]]), c(points[t[2]]), c(*p)) > 0.0 {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn square_with_center() {
        let pts = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]];
        let t = delaunay(&pts).unwrap();
        assert_eq!(t.len(), 4);
        for tri in &t {
            assert!(orient(pts[tri[0]], pts[tri[1]], pts[tri[2]]) > 0.0);
        }
    }

    #[test]
    fn pseudo_random_points_are_delaunay() {
        let mut pts = Vec::new();
        let mut s = 12345u64;
        for _ in 0..300 {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let x = (s >> 11) as f64 / (1u64 << 53) as f64;
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let y = (s >> 11) as f64 / (1u64 << 53) as f64;
            pts.push([x, y]);
        }
        let t = delaunay(&pts).unwrap();
        assert!(is_delaunay(&pts, &t));
        let area: f64 = t
            .iter()
            .map(|v| 0.5 * orient(pts[v[0]], pts[v[1]], pts[v[2]]))
            .sum();
        assert!(area > 0.9 && area < 1.0);
    }

    #[test]
    fn grid_points_cocircular() {
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                pts.push([i as f64, j as f64]);
            }
        }
        let t = delaunay(&pts).unwrap();
        assert_eq!(t.len(), 2 * 81);
    }

    #[test]
    fn duplicate_point_rejected() {
        let pts = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]];
        assert!(delaunay(&pts).is_err());
    }

    #[test]
    fn region_with_hole_recovers_constraints() {
        let n = 40;
        let hole: Vec<Point> = (0..n)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                [0.5 + 0.2 * t.cos(), 0.5 + 0.2 * t.sin()]
            })
            .collect();
        let mut outer = Vec::new();
        let m = 10;
        for k in 0..m {
            outer.push([k as f64 / m as f64, 0.0]);
        }
        for k in 0..m {
            outer.push([1.0, k as f64 / m as f64]);
        }
        for k in 0..m {
            outer.push([1.0 - k as f64 / m as f64, 1.0]);
        }
        for k in 0..m {
            outer.push([0.0, 1.0 - k as f64 / m as f64]);
        }
        let hole_c = hole.clone();
        let inside = move |p: Point| {
            p[0] > 0.0
                && p[0] < 1.0
                && p[1] > 0.0
                && p[1] < 1.0
                && !crate::geometry::point_in_polygon(p, &hole_c)
        };
        let size = |p: Point| {
            let d = ((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2)).sqrt() - 0.2;
            (0.03 + 0.3 * d.max(0.0)).min(0.1)
        };
        let r = Region {
            loops: vec![outer, hole],
            polylines: vec![],
            inside: &inside,
            size: &size,
            bbox: [0.0, 1.0, 0.0, 1.0],
        };
        let m = mesh_region(&r).unwrap();
        let area: f64 = m
            .triangles
            .iter()
            .map(|v| 0.5 * orient(m.points[v[0]], m.points[v[1]], m.points[v[2]]))
            .sum();
        let poly_area = crate::geometry::polygon_area(&r.loops[1]);
        assert!((area - (1.0 - poly_area)).abs() < 1e-12);
    }
}
