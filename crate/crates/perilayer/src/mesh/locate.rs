//! Point location on a triangulation through a uniform bucket grid.

use super::Mesh;
use crate::geometry::Point;

/// Triangle containing a point and the barycentric coordinates of the point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointLocation {
    pub triangle: usize,
    pub bary: [f64; 3],
}

/// Bucket grid over triangle bounding boxes.
#[derive(Debug, Clone)]
pub struct Locator {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl Locator {
    pub fn new(mesh: &Mesh) -> Self {
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for p in &mesh.vertices {
            xmin = xmin.min(p[0]);
            xmax = xmax.max(p[0]);
            ymin = ymin.min(p[1]);
            ymax = ymax.max(p[1]);
        }
        let area = ((xmax - xmin) * (ymax - ymin)).max(1e-30);
        let n = mesh.triangles.len().max(1) as f64;
        let cell = (area / n).sqrt() * 2.0;
        let nx = (((xmax - xmin) / cell).ceil() as usize).max(1);
        let ny = (((ymax - ymin) / cell).ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let ps = [
                mesh.vertices[tri[0]],
                mesh.vertices[tri[1]],
                mesh.vertices[tri[2]],
            ];
            let bx0 = ps.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let bx1 = ps.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            let by0 = ps.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
            let by1 = ps.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
            let i0 = (((bx0 - xmin) / cell).floor() as usize).min(nx - 1);
            let i1 = (((bx1 - xmin) / cell).floor() as usize).min(nx - 1);
            let j0 = (((by0 - ymin) / cell).floor() as usize).min(ny - 1);
            let j1 = (((by1 - ymin) / cell).floor() as usize).min(ny - 1);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(t as u32);
                }
            }
        }
        Locator {
            origin: [xmin, ymin],
            cell,
            nx,
            ny,
            buckets,
        }
    }

    /// Locates `p`, accepting points within a relative tolerance of a triangle.
    pub fn locate(&self, mesh: &Mesh, p: Point) -> Option<PointLocation> {
        self.locate_filtered(mesh, p, |_| true)
    }

    /// Locates `p` among the triangles accepted by `filter`. The triangle
    /// with the largest minimum barycentric coordinate wins, so points on
    /// shared edges are assigned deterministically.
    pub fn locate_filtered(
        &self,
        mesh: &Mesh,
        p: Point,
        filter: impl Fn(usize) -> bool,
    ) -> Option<PointLocation> {
        let fi = (p[0] - self.origin[0]) / self.cell;
        let fj = (p[1] - self.origin[1]) / self.cell;
        if fi < -1e-9 || fj < -1e-9 || fi > self.nx as f64 + 1e-9 || fj > self.ny as f64 + 1e-9 {
            return None;
        }
        let i = (fi.floor().max(0.0) as usize).min(self.nx - 1);
        let j = (fj.floor().max(0.0) as usize).min(self.ny - 1);
        let mut best: Option<PointLocation> = None;
        let mut best_score = -1e-9;
        for &t in &self.buckets[j * self.nx + i] {
            let t = t as usize;
            if !filter(t) {
                continue;
            }
            let bary = barycentric(mesh, t, p);
            let score = bary[0].min(bary[1]).min(bary[2]);
            if score > best_score {
                best_score = score;
                best = Some(PointLocation { triangle: t, bary });
            }
        }
        best
    }

    /// Like [`Locator::locate`], but a point slightly outside the mesh (for
    /// instance between a curved boundary and its polygon) is snapped to the
    /// closest triangle of the neighbouring buckets with clamped barycentric
    /// coordinates.
    pub fn locate_nearest(&self, mesh: &Mesh, p: Point) -> Option<PointLocation> {
        if let Some(loc) = self.locate(mesh, p) {
            return Some(loc);
        }
        let fi = ((p[0] - self.origin[0]) / self.cell).floor() as i64;
        let fj = ((p[1] - self.origin[1]) / self.cell).floor() as i64;
        let mut best: Option<(f64, PointLocation)> = None;
        for j in fj - 1..=fj + 1 {
            for i in fi - 1..=fi + 1 {
                if i < 0 || j < 0 || i >= self.nx as i64 || j >= self.ny as i64 {
                    continue;
                }
                for &t in &self.buckets[j as usize * self.nx + i as usize] {
                    let t = t as usize;
                    let bary = barycentric(mesh, t, p);
                    let score = bary[0].min(bary[1]).min(bary[2]);
                    if best.as_ref().map_or(true, |(s, _)| score > *s) {
                        best = Some((score, PointLocation { triangle: t, bary }));
                    }
                }
            }
        }
        best.map(|(_, mut loc)| {
            let mut sum = 0.0;
            for b in loc.bary.iter_mut() {
                *b = b.max(0.0);
                sum += *b;
            }
            for b in loc.bary.iter_mut() {
                *b /= sum;
            }
            loc
        })
    }

    /// P1 interpolation of nodal `values` at `p`.
    pub fn interpolate(&self, mesh: &Mesh, values: &[f64], p: Point) -> Option<f64> {
        self.locate(mesh, p).map(|loc| {
            let v = mesh.triangles[loc.triangle];
            loc.bary[0] * values[v[0]] + loc.bary[1] * values[v[1]] + loc.bary[2] * values[v[2]]
        })
    }
}

/// Barycentric coordinates of `p` with respect to triangle `t`.
pub fn barycentric(mesh: &Mesh, t: usize, p: Point) -> [f64; 3] {
    let v = mesh.triangles[t];
    let a = mesh.vertices[v[0]];
    let b = mesh.vertices[v[1]];
    let c = mesh.vertices[v[2]];
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (p[1] - a[1]) * (c[0] - a[0])) / det;
    let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])) / det;
    [1.0 - l1 - l2, l1, l2]
}
