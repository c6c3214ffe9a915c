//! Tagged P1 triangulations of the perforated domain, the split limit
//! domain, the truncated periodicity band and truncated corner sectors.

mod builders;
pub mod delaunay;
mod locate;
mod vtk;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

pub use builders::{
    layer_cell_count, mesh_band, mesh_limit_split, mesh_perforated, mesh_sector, BandSpec, SectorSpec,
};
pub use locate::{Locator, PointLocation};
pub use vtk::{read_vtk, write_vtk};

/// Tag carried by a boundary edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeTag {
    Dirichlet,
    Hole,
    PeriodicLeft,
    PeriodicRight,
    BandTop,
    BandBottom,
    InterfaceTop,
    InterfaceBottom,
    OuterArc,
}

impl EdgeTag {
    pub const ALL: [EdgeTag; 9] = [
        EdgeTag::Dirichlet,
        EdgeTag::Hole,
        EdgeTag::PeriodicLeft,
        EdgeTag::PeriodicRight,
        EdgeTag::BandTop,
        EdgeTag::BandBottom,
        EdgeTag::InterfaceTop,
        EdgeTag::InterfaceBottom,
        EdgeTag::OuterArc,
    ];

    /// Stable integer code used in the ASCII export.
    pub fn code(self) -> u8 {
        EdgeTag::ALL.iter().position(|&t| t == self).unwrap() as u8
    }

    /// Inverse of [`EdgeTag::code`].
    pub fn from_code(code: u8) -> Option<EdgeTag> {
        EdgeTag::ALL.get(code as usize).copied()
    }
}

/// A P1 triangulation with boundary tags and node pairings.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Tag of each boundary edge, keyed by the sorted vertex pair.
    pub edge_tags: BTreeMap<[usize; 2], EdgeTag>,
    /// (left node, right node) pairs of a periodic band.
    pub periodic_pairs: Vec<(usize, usize)>,
    /// (top copy, bottom copy) pairs of doubled interface nodes.
    pub interface_pairs: Vec<(usize, usize)>,
    /// Nodes flagged as re-entrant corner copies.
    pub corner_nodes: Vec<usize>,
    pub h_target: f64,
}

/// Sorted edge key.
pub fn edge_key(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

/// Signed area of a triangle (positive for counter-clockwise order).
pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

/// Shape quality inradius/circumradius, equal to 1/2 for an equilateral triangle.
pub fn triangle_quality(a: Point, b: Point, c: Point) -> f64 {
    let la = ((b[0] - c[0]).powi(2) + (b[1] - c[1]).powi(2)).sqrt();
    let lb = ((a[0] - c[0]).powi(2) + (a[1] - c[1]).powi(2)).sqrt();
    let lc = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let area = signed_area(a, b, c).abs();
    let s = 0.5 * (la + lb + lc);
    let inradius = area / s;
    let circumradius = la * lb * lc / (4.0 * area);
    inradius / circumradius
}

impl Mesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Coordinates of the three vertices of triangle `t`.
    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let v = self.triangles[t];
        [
            self.vertices[v[0]],
            self.vertices[v[1]],
            self.vertices[v[2]],
        ]
    }

    /// Centroid of triangle `t`.
    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangle_points(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Area of triangle `t`.
    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    /// Edge → number of adjacent triangles.
    pub fn edge_counts(&self) -> HashMap<[usize; 2], u32> {
        let mut m: HashMap<[usize; 2], u32> = HashMap::with_capacity(3 * self.triangles.len());
        for t in &self.triangles {
            for k in 0..3 {
                *m.entry(edge_key(t[k], t[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        m
    }

    /// Sorted list of edges adjacent to exactly one triangle.
    pub fn boundary_edges(&self) -> Vec<[usize; 2]> {
        let mut v: Vec<[usize; 2]> = self
            .edge_counts()
            .into_iter()
            .filter(|&(_, c)| c == 1)
            .map(|(e, _)| e)
            .collect();
        v.sort_unstable();
        v
    }

    /// Edges carrying a given tag.
    pub fn edges_with_tag(&self, tag: EdgeTag) -> Vec<[usize; 2]> {
        self.edge_tags
            .iter()
            .filter(|(_, &t)| t == tag)
            .map(|(e, _)| *e)
            .collect()
    }

    /// Sorted, deduplicated nodes lying on edges with the given tag.
    pub fn nodes_with_tag(&self, tag: EdgeTag) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .edges_with_tag(tag)
            .into_iter()
            .flat_map(|e| e.into_iter())
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Minimum triangle quality (inradius/circumradius).
    pub fn min_quality(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle_points(t);
                triangle_quality(a, b, c)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Total area.
    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    /// Number of distinct edges.
    pub fn num_edges(&self) -> usize {
        self.edge_counts().len()
    }

    /// Number of closed loops formed by the edges carrying `tag`.
    pub fn count_loops(&self, tag: EdgeTag) -> usize {
        let edges = self.edges_with_tag(tag);
        let mut parent: HashMap<usize, usize> = HashMap::new();
        fn find(p: &mut HashMap<usize, usize>, x: usize) -> usize {
            let mut r = x;
            while p[&r] != r {
                r = p[&r];
            }
            let mut y = x;
            while p[&y] != r {
                let n = p[&y];
                p.insert(y, r);
                y = n;
            }
            r
        }
        for e in &edges {
            parent.entry(e[0]).or_insert(e[0]);
            parent.entry(e[1]).or_insert(e[1]);
        }
        for e in &edges {
            let a = find(&mut parent, e[0]);
            let b = find(&mut parent, e[1]);
            if a != b {
                parent.insert(a, b);
            }
        }
        let keys: Vec<usize> = parent.keys().copied().collect();
        let mut roots: Vec<usize> = keys.into_iter().map(|k| find(&mut parent, k)).collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }

    /// Structural audit: positive areas, manifold edges, complete and
    /// boundary-only tags, no hanging nodes and exact pairing coordinates.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        for (t, v) in self.triangles.iter().enumerate() {
            if v.iter().any(|&k| k >= n) {
                return Err(Error::Mesh(format!(
                    "triangle {} references a missing vertex",
                    t
                )));
            }
            if !(self.area(t) > 0.0) {
                return Err(Error::Mesh(format!("triangle {} has non-positive area", t)));
            }
        }
        let counts = self.edge_counts();
        for (e, c) in &counts {
            if *c > 2 {
                return Err(Error::Mesh(format!(
                    "edge {:?} shared by {} triangles",
                    e, c
                )));
            }
            if *c == 1 && !self.edge_tags.contains_key(e) {
                return Err(Error::Mesh(format!(
                    "boundary edge {:?} ({:?}-{:?}) has no tag",
                    e, self.vertices[e[0]], self.vertices[e[1]]
                )));
            }
        }
        for e in self.edge_tags.keys() {
            if counts.get(e) != Some(&1) {
                return Err(Error::Mesh(format!(
                    "tagged edge {:?} is not a boundary edge",
                    e
                )));
            }
        }
        self.check_hanging_nodes()?;
        for &(a, b) in &self.periodic_pairs {
            if (self.vertices[a][1] - self.vertices[b][1]).abs() > 1e-12 {
                return Err(Error::Mesh(format!(
                    "periodic pair ({}, {}) height mismatch",
                    a, b
                )));
            }
        }
        for &(a, b) in &self.interface_pairs {
            if self.vertices[a] != self.vertices[b] {
                return Err(Error::Mesh(format!(
                    "interface pair ({}, {}) not coincident",
                    a, b
                )));
            }
        }
        Ok(())
    }

    fn check_hanging_nodes(&self) -> Result<()> {
        let bnd = self.boundary_edges();
        let mut bnodes: Vec<usize> = bnd.iter().flat_map(|e| e.iter().copied()).collect();
        bnodes.sort_unstable();
        bnodes.dedup();
        if bnd.is_empty() {
            return Ok(());
        }
        let mean_len = bnd
            .iter()
            .map(|e| crate::geometry::dist(self.vertices[e[0]], self.vertices[e[1]]))
            .sum::<f64>()
            / bnd.len() as f64;
        let cell = mean_len.max(1e-9);
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for &v in &bnodes {
            let p = self.vertices[v];
            grid.entry(((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64))
                .or_default()
                .push(v);
        }
        for e in &bnd {
            let a = self.vertices[e[0]];
            let b = self.vertices[e[1]];
            let len = crate::geometry::dist(a, b);
            let i0 = (a[0].min(b[0]) / cell).floor() as i64;
            let i1 = (a[0].max(b[0]) / cell).floor() as i64;
            let j0 = (a[1].min(b[1]) / cell).floor() as i64;
            let j1 = (a[1].max(b[1]) / cell).floor() as i64;
            for i in i0..=i1 {
                for j in j0..=j1 {
                    if let Some(list) = grid.get(&(i, j)) {
                        for &v in list {
                            if v == e[0] || v == e[1] {
                                continue;
                            }
                            let p = self.vertices[v];
                            if p == a || p == b {
                                continue;
                            }
                            let cross =
                                (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
                            let t = ((p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1]))
                                / (len * len);
                            if cross.abs() <= 1e-12 * len * len && t > 1e-9 && t < 1.0 - 1e-9 {
                                return Err(Error::Mesh(format!("hanging node at {:?}", p)));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Triangles adjacent to each vertex.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut v = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &k in tri {
                v[k].push(t);
            }
        }
        v
    }

    /// Mirror image under x ↦ −x; triangle orientation is restored and the
    /// left/right periodic tags are swapped.
    pub fn mirrored(&self) -> Mesh {
        let vertices = self.vertices.iter().map(|p| [-p[0], p[1]]).collect();
        let triangles = self.triangles.iter().map(|t| [t[0], t[2], t[1]]).collect();
        let edge_tags = self
            .edge_tags
            .iter()
            .map(|(e, t)| {
                let t = match t {
                    EdgeTag::PeriodicLeft => EdgeTag::PeriodicRight,
                    EdgeTag::PeriodicRight => EdgeTag::PeriodicLeft,
                    other => *other,
                };
                (*e, t)
            })
            .collect();
        Mesh {
            vertices,
            triangles,
            edge_tags,
            periodic_pairs: self.periodic_pairs.iter().map(|&(a, b)| (b, a)).collect(),
            interface_pairs: self.interface_pairs.clone(),
            corner_nodes: self.corner_nodes.clone(),
            h_target: self.h_target,
        }
    }
}
