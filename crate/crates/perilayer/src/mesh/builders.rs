//! Mesh builders. Rectangular parts are covered by a structured lattice with
//! integer node keys; the neighbourhood of each hole is a rectangular block
//! whose perimeter nodes are lattice nodes and whose interior is meshed by
//! the Delaunay region mesher. Meshes of the same domain with and without
//! holes therefore share every node away from the layer.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::delaunay::{mesh_region, Region};
use super::{edge_key, signed_area, EdgeTag, Mesh};
use crate::error::{Error, Result};
use crate::geometry::{dist, Corner, DomainSpec, PeriodicityCell, Point};

/// Truncated periodicity band (0,1)×(−L_band, L_band).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub cell: PeriodicityCell,
    pub l_band: f64,
    pub h: f64,
}

/// Truncated corner sector of radius `r_max` with unit-spaced holes along
/// the layer ray.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorSpec {
    pub corner: Corner,
    pub r_max: f64,
    pub cell: PeriodicityCell,
    pub h_near: f64,
    pub h_far: f64,
}

impl SectorSpec {
    /// Number of holes along the layer ray.
    pub fn hole_count(&self) -> usize {
        if self.cell.is_empty() {
            0
        } else {
            (self.r_max.floor() as usize).saturating_sub(2)
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
struct Key {
    ix: i64,
    iy: i64,
    side: u8,
}

#[derive(Default)]
struct Assembler {
    vertices: Vec<Point>,
    keyed: HashMap<Key, usize>,
    triangles: Vec<[usize; 3]>,
}

impl Assembler {
    fn keyed_node(&mut self, key: Key, p: Point) -> usize {
        if let Some(&i) = self.keyed.get(&key) {
            return i;
        }
        let i = self.vertices.len();
        self.vertices.push(p);
        self.keyed.insert(key, i);
        i
    }

    fn free_node(&mut self, p: Point) -> usize {
        self.vertices.push(p);
        self.vertices.len() - 1
    }

    fn triangle(&mut self, a: usize, b: usize, c: usize) {
        if signed_area(self.vertices[a], self.vertices[b], self.vertices[c]) > 0.0 {
            self.triangles.push([a, b, c]);
        } else {
            self.triangles.push([a, c, b]);
        }
    }

    /// Two triangles for the quad with corners (ll, lr, ur, ul). The
    /// diagonal runs from lower-left to upper-right when `slash` is true.
    fn quad(&mut self, ll: usize, lr: usize, ur: usize, ul: usize, slash: bool) {
        if slash {
            self.triangle(ll, lr, ur);
            self.triangle(ll, ur, ul);
        } else {
            self.triangle(ll, lr, ul);
            self.triangle(lr, ur, ul);
        }
    }

    /// Tags boundary edges with `classify` (called with pre-compaction
    /// indices), drops vertices not referenced by any triangle and remaps the
    /// node pairings.
    fn finish(
        self,
        h: f64,
        classify: impl Fn(&[Point], usize, usize) -> Option<EdgeTag>,
        periodic_pairs: Vec<(usize, usize)>,
        interface_pairs: Vec<(usize, usize)>,
        corner_nodes: Vec<usize>,
    ) -> Result<Mesh> {
        let raw = Mesh {
            vertices: self.vertices,
            triangles: self.triangles,
            edge_tags: BTreeMap::new(),
            periodic_pairs: Vec::new(),
            interface_pairs: Vec::new(),
            corner_nodes: Vec::new(),
            h_target: h,
        };
        let mut tags = Vec::new();
        for e in raw.boundary_edges() {
            let tag = classify(&raw.vertices, e[0], e[1]).ok_or_else(|| {
                Error::Mesh(format!(
                    "cannot classify boundary edge {:?}-{:?}",
                    raw.vertices[e[0]], raw.vertices[e[1]]
                ))
            })?;
            tags.push((e, tag));
        }
        let mut used = vec![false; raw.vertices.len()];
        for t in &raw.triangles {
            for &k in t {
                used[k] = true;
            }
        }
        let mut remap = vec![usize::MAX; raw.vertices.len()];
        let mut vertices = Vec::new();
        for (i, p) in raw.vertices.iter().enumerate() {
            if used[i] {
                remap[i] = vertices.len();
                vertices.push(*p);
            }
        }
        let triangles = raw
            .triangles
            .iter()
            .map(|t| [remap[t[0]], remap[t[1]], remap[t[2]]])
            .collect();
        let edge_tags = tags
            .into_iter()
            .map(|(e, t)| (edge_key(remap[e[0]], remap[e[1]]), t))
            .collect();
        let pair_map = |v: Vec<(usize, usize)>| -> Vec<(usize, usize)> {
            v.into_iter()
                .filter(|&(a, b)| used[a] && used[b])
                .map(|(a, b)| (remap[a], remap[b]))
                .collect()
        };
        Ok(Mesh {
            vertices,
            triangles,
            edge_tags,
            periodic_pairs: pair_map(periodic_pairs),
            interface_pairs: pair_map(interface_pairs),
            corner_nodes: corner_nodes
                .into_iter()
                .filter(|&c| used[c])
                .map(|c| remap[c])
                .collect(),
            h_target: h,
        })
    }
}

/// Uniform subdivision of [a, b] into n pieces with coordinates computed so
/// that symmetric intervals produce exactly mirrored nodes.
fn subdivide(a: f64, b: f64, n: usize) -> Vec<f64> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (0..=n)
        .map(|i| {
            let k = 2 * i as i64 - n as i64;
            if i == 0 {
                a
            } else if i == n {
                b
            } else {
                mid + half * (k as f64) / (n as f64)
            }
        })
        .collect()
}

fn cells(len: f64, h: f64) -> usize {
    ((len / h) - 1e-9).ceil().max(1.0) as usize
}

/// Structured lattice of the domain Ω: x nodes on [−L_top, L_top] with
/// breakpoints at ±L, y nodes on [−H_B, H_T] with a row at 0.
struct DomainLattice {
    xs: Vec<f64>,
    /// Index of x = −L and of x = +L.
    i_minus: usize,
    i_plus: usize,
    /// y coordinate of row `iy` for iy ∈ [−n_b, n_t].
    ys_top: Vec<f64>,
    ys_bot: Vec<f64>,
}

impl DomainLattice {
    fn new(d: &DomainSpec, h: f64, multiple_of: usize) -> Self {
        let n_side = cells(d.l_top - d.l, h);
        let mut n_mid = cells(2.0 * d.l, h);
        if n_mid % multiple_of != 0 {
            n_mid += multiple_of - n_mid % multiple_of;
        }
        let right: Vec<f64> = subdivide(d.l, d.l_top, n_side);
        let mid = subdivide(-d.l, d.l, n_mid);
        let mut xs: Vec<f64> = right.iter().rev().map(|x| -x).collect();
        xs.extend_from_slice(&mid[1..n_mid]);
        xs.extend_from_slice(&right);
        let i_minus = n_side;
        let i_plus = n_side + n_mid;
        let n_t = cells(d.h_t, h);
        let n_b = cells(d.h_b, h);
        let ys_top = (0..=n_t).map(|j| d.h_t * j as f64 / n_t as f64).collect();
        let ys_bot = (0..=n_b)
            .map(|j| -(d.h_b * j as f64 / n_b as f64))
            .collect();
        DomainLattice {
            xs,
            i_minus,
            i_plus,
            ys_top,
            ys_bot,
        }
    }

    fn n_t(&self) -> i64 {
        self.ys_top.len() as i64 - 1
    }

    fn n_b(&self) -> i64 {
        self.ys_bot.len() as i64 - 1
    }

    fn y(&self, iy: i64) -> f64 {
        if iy >= 0 {
            self.ys_top[iy as usize]
        } else {
            self.ys_bot[(-iy) as usize]
        }
    }

    fn point(&self, ix: i64, iy: i64) -> Point {
        [self.xs[ix as usize], self.y(iy)]
    }

    /// Lattice quads of Ω as (ix, iy) lower-left indices.
    fn quads(&self) -> Vec<(i64, i64)> {
        let mut q = Vec::new();
        for iy in -self.n_b()..0 {
            for ix in self.i_minus as i64..self.i_plus as i64 {
                q.push((ix, iy));
            }
        }
        for iy in 0..self.n_t() {
            for ix in 0..(self.xs.len() as i64 - 1) {
                q.push((ix, iy));
            }
        }
        q
    }

    fn slash(&self, ix: i64) -> bool {
        0.5 * (self.xs[ix as usize] + self.xs[ix as usize + 1]) < 0.0
    }
}

fn classify_domain<'a>(
    d: &'a DomainSpec,
    holes: &[bool],
) -> impl Fn(&[Point], usize, usize) -> Option<EdgeTag> + 'a {
    let holes = holes.to_vec();
    move |v: &[Point], a: usize, b: usize| {
        if a < holes.len() && b < holes.len() && holes[a] && holes[b] {
            return Some(EdgeTag::Hole);
        }
        let m = [0.5 * (v[a][0] + v[b][0]), 0.5 * (v[a][1] + v[b][1])];
        let on_outer = (m[1] == d.h_t)
            || (m[1] == -d.h_b)
            || (m[1] > 0.0 && m[0].abs() == d.l_top)
            || (m[1] < 0.0 && m[0].abs() == d.l)
            || (m[1] == 0.0 && m[0].abs() > d.l);
        if on_outer {
            Some(EdgeTag::Dirichlet)
        } else {
            None
        }
    }
}

/// Mesh of the limit domain Ω with every node on Γ duplicated (the two
/// re-entrant corner nodes included and flagged). Triangles above Γ use the
/// top copies, triangles below use the bottom copies.
pub fn mesh_limit_split(domain: &DomainSpec, h: f64) -> Result<Mesh> {
    domain.validate()?;
    if !(h > 0.0) {
        return Err(Error::Config("mesh size must be positive".into()));
    }
    let lat = DomainLattice::new(domain, h, 1);
    build_domain_mesh(domain, &lat, h, true, None)
}

/// Mesh of the perforated domain Ω^δ with q = 2L/δ scaled hole copies.
pub fn mesh_perforated(
    domain: &DomainSpec,
    cell: &PeriodicityCell,
    delta: f64,
    h: f64,
) -> Result<Mesh> {
    domain.validate()?;
    cell.validate()?;
    let q = layer_cell_count(domain, delta)?;
    if delta >= domain.h_b.min(domain.h_t) {
        return Err(Error::Geometry(format!(
            "delta = {} must be smaller than min(H_B, H_T)",
            delta
        )));
    }
    if !(h > 0.0) {
        return Err(Error::Config("mesh size must be positive".into()));
    }
    let lat = DomainLattice::new(domain, h, q);
    build_domain_mesh(domain, &lat, h, false, Some((cell, delta, q)))
}

/// Number of layer cells q = 2L/δ, which must be a positive integer.
pub fn layer_cell_count(domain: &DomainSpec, delta: f64) -> Result<usize> {
    if !(delta > 0.0) {
        return Err(Error::Config("delta must be positive".into()));
    }
    let q = 2.0 * domain.l / delta;
    let qr = q.round();
    if qr < 1.0 || (q - qr).abs() > 1e-9 * q.max(1.0) {
        return Err(Error::Config(format!(
            "2L/delta = {} is not a positive integer",
            q
        )));
    }
    Ok(qr as usize)
}

fn build_domain_mesh(
    domain: &DomainSpec,
    lat: &DomainLattice,
    h: f64,
    split: bool,
    layer: Option<(&PeriodicityCell, f64, usize)>,
) -> Result<Mesh> {
    let mut asm = Assembler::default();
    let key = |ix: i64, iy: i64, bottom: bool| Key {
        ix,
        iy,
        side: if split && bottom && iy == 0 { 1 } else { 0 },
    };
    // Lattice nodes in a fixed order so node numbering is deterministic and
    // shared between mesh variants.
    for iy in (-lat.n_b()..=lat.n_t()).rev() {
        let (x0, x1) = if iy < 0 {
            (lat.i_minus as i64, lat.i_plus as i64)
        } else {
            (0, lat.xs.len() as i64 - 1)
        };
        for ix in x0..=x1 {
            asm.keyed_node(key(ix, iy, false), lat.point(ix, iy));
        }
        if iy == 0 && split {
            for ix in lat.i_minus as i64..=lat.i_plus as i64 {
                asm.keyed_node(key(ix, 0, true), lat.point(ix, 0));
            }
        }
    }

    // Template blocks around each layer cell.
    let mut blocks: Vec<(i64, i64, i64, i64)> = Vec::new();
    let mut hole_flags: Vec<bool> = Vec::new();
    if let Some((cell, delta, q)) = layer {
        if let Some(bbox) = cell.hole_bbox() {
            let m = (lat.i_plus - lat.i_minus) / q;
            let hy_t = lat.ys_top[1];
            let hy_b = -lat.ys_bot[1];
            let jt = ((bbox[3] * delta).max(0.0) / hy_t).ceil() as i64 + 2;
            let jb = ((-bbox[2] * delta).max(0.0) / hy_b).ceil() as i64 + 2;
            if jt >= lat.n_t() || jb >= lat.n_b() {
                return Err(Error::Geometry(
                    "layer cells do not fit inside the domain".into(),
                ));
            }
            let template = layer_template(lat, cell, delta, m, jt, jb)?;
            for l in 0..q {
                let i0 = lat.i_minus as i64 + (l * m) as i64;
                blocks.push((i0, i0 + m as i64, -jb, jt));
                let x_l = -domain.l + delta * l as f64;
                let mut ids = Vec::with_capacity(template.points.len());
                for (k, p) in template.points.iter().enumerate() {
                    let id = if let Some(&(di, iy)) =
                        template.lattice_keys.get(k).and_then(|o| o.as_ref())
                    {
                        asm.keyed_node(key(i0 + di, iy, false), lat.point(i0 + di, iy))
                    } else {
                        let id = asm.free_node([x_l + delta * p[0], delta * p[1]]);
                        if hole_flags.len() < asm.vertices.len() {
                            hole_flags.resize(asm.vertices.len(), false);
                        }
                        hole_flags[id] = template.on_hole[k];
                        id
                    };
                    ids.push(id);
                }
                for t in &template.triangles {
                    asm.triangle(ids[t[0]], ids[t[1]], ids[t[2]]);
                }
            }
        }
    }
    hole_flags.resize(asm.vertices.len(), false);

    let in_block = |ix: i64, iy: i64| {
        blocks
            .iter()
            .any(|&(x0, x1, y0, y1)| ix >= x0 && ix < x1 && iy >= y0 && iy < y1)
    };
    for (ix, iy) in lat.quads() {
        if in_block(ix, iy) {
            continue;
        }
        let bottom = iy < 0;
        let ll = asm.keyed[&key(ix, iy, bottom)];
        let lr = asm.keyed[&key(ix + 1, iy, bottom)];
        let ur = asm.keyed[&key(ix + 1, iy + 1, bottom)];
        let ul = asm.keyed[&key(ix, iy + 1, bottom)];
        asm.quad(ll, lr, ur, ul, lat.slash(ix));
    }

    let mut interface_pairs = Vec::new();
    let mut corner_nodes = Vec::new();
    let mut bottom_copies: Vec<bool> = vec![false; asm.vertices.len()];
    if split {
        for ix in lat.i_minus as i64..=lat.i_plus as i64 {
            let t = asm.keyed[&key(ix, 0, false)];
            let b = asm.keyed[&key(ix, 0, true)];
            interface_pairs.push((t, b));
            bottom_copies[b] = true;
            if ix == lat.i_minus as i64 || ix == lat.i_plus as i64 {
                corner_nodes.push(t);
                corner_nodes.push(b);
            }
        }
    }
    let outer = classify_domain(domain, &hole_flags);
    let l = domain.l;
    asm.finish(
        h,
        |v, a, b| {
            if let Some(t) = outer(v, a, b) {
                return Some(t);
            }
            let m = [0.5 * (v[a][0] + v[b][0]), 0.5 * (v[a][1] + v[b][1])];
            if split && m[1] == 0.0 && m[0].abs() < l {
                return Some(if bottom_copies[a] {
                    EdgeTag::InterfaceBottom
                } else {
                    EdgeTag::InterfaceTop
                });
            }
            None
        },
        Vec::new(),
        interface_pairs,
        corner_nodes,
    )
}

struct Template {
    /// Reference coordinates ((0,1) across the cell, y scaled by 1/δ).
    points: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    /// Lattice offset (di, iy) for perimeter points.
    lattice_keys: Vec<Option<(i64, i64)>>,
    on_hole: Vec<bool>,
}

fn hole_segment_length(cell: &PeriodicityCell, block_size: f64, min_segments: f64) -> f64 {
    block_size.min(cell.hole_perimeter() / min_segments)
}

fn layer_template(
    lat: &DomainLattice,
    cell: &PeriodicityCell,
    delta: f64,
    m: usize,
    jt: i64,
    jb: i64,
) -> Result<Template> {
    // Perimeter loop in lattice offsets, counter-clockwise from (0, −jb).
    let mut keys: Vec<(i64, i64)> = Vec::new();
    for di in 0..m as i64 {
        keys.push((di, -jb));
    }
    for iy in -jb..jt {
        keys.push((m as i64, iy));
    }
    for di in (1..=m as i64).rev() {
        keys.push((di, jt));
    }
    for iy in ((-jb + 1)..=jt).rev() {
        keys.push((0, iy));
    }
    let i0 = lat.i_minus as i64;
    let x0 = lat.xs[i0 as usize];
    let perimeter: Vec<Point> = keys
        .iter()
        .map(|&(di, iy)| [(lat.xs[(i0 + di) as usize] - x0) / delta, lat.y(iy) / delta])
        .collect();
    let block = (1.0 / m as f64)
        .min(lat.ys_top[1] / delta)
        .min(-lat.ys_bot[1] / delta);
    let seg = hole_segment_length(cell, block, 48.0);
    let hole = cell
        .hole_polygon(seg)
        .ok_or_else(|| Error::Mesh("template requested for an empty cell".into()))?;
    let y_top = lat.y(jt) / delta;
    let y_bot = lat.y(-jb) / delta;
    let cellc = cell.clone();
    let hole_poly = hole.clone();
    let inside = move |p: Point| {
        p[0] > 0.0
            && p[0] < 1.0
            && p[1] > y_bot
            && p[1] < y_top
            && !crate::geometry::point_in_polygon(p, &hole_poly)
    };
    let size = move |p: Point| (seg + 0.3 * cellc.hole_distance(p).max(0.0)).min(block);
    let region = Region {
        loops: vec![perimeter.clone(), hole.clone()],
        polylines: vec![],
        inside: &inside,
        size: &size,
        bbox: [0.0, 1.0, y_bot, y_top],
    };
    let rm = mesh_region(&region)?;
    let np = perimeter.len();
    let nh = hole.len();
    let mut lattice_keys = vec![None; rm.points.len()];
    let mut on_hole = vec![false; rm.points.len()];
    for k in 0..np {
        lattice_keys[k] = Some(keys[k]);
    }
    for k in np..np + nh {
        on_hole[k] = true;
    }
    Ok(Template {
        points: rm.points,
        triangles: rm.triangles,
        lattice_keys,
        on_hole,
    })
}

/// Mesh of the truncated band ((0,1)×(−L_band, L_band)) minus the hole, with
/// node-matched vertical sides registered as periodic pairs.
pub fn mesh_band(spec: &BandSpec) -> Result<Mesh> {
    spec.cell.validate()?;
    if !(spec.l_band > 2.0) {
        return Err(Error::Config(format!(
            "L_band = {} must exceed 2",
            spec.l_band
        )));
    }
    if !(spec.h > 0.0 && spec.h <= 0.5) {
        return Err(Error::Config(format!(
            "band mesh size {} out of range",
            spec.h
        )));
    }
    let nx = cells(1.0, spec.h);
    let xs = subdivide(0.0, 1.0, nx);
    let ny_half = cells(spec.l_band, spec.h) as i64;
    let y = |j: i64| spec.l_band * j as f64 / ny_half as f64;
    let mut asm = Assembler::default();
    for j in (-ny_half..=ny_half).rev() {
        for (i, &x) in xs.iter().enumerate() {
            asm.keyed_node(
                Key {
                    ix: i as i64,
                    iy: j,
                    side: 0,
                },
                [x, y(j)],
            );
        }
    }
    let mut block: Option<(i64, i64)> = None;
    let mut hole_flags = vec![false; asm.vertices.len()];
    if let Some(bbox) = spec.cell.hole_bbox() {
        let hy = spec.l_band / ny_half as f64;
        let jt = (bbox[3].max(0.0) / hy).ceil() as i64 + 2;
        let jb = ((-bbox[2]).max(0.0) / hy).ceil() as i64 + 2;
        if jt >= ny_half || jb >= ny_half {
            return Err(Error::Geometry(
                "hole does not fit inside the truncated band".into(),
            ));
        }
        block = Some((-jb, jt));
        let mut keys: Vec<(i64, i64)> = Vec::new();
        for i in 0..nx as i64 {
            keys.push((i, -jb));
        }
        for j in -jb..jt {
            keys.push((nx as i64, j));
        }
        for i in (1..=nx as i64).rev() {
            keys.push((i, jt));
        }
        for j in ((-jb + 1)..=jt).rev() {
            keys.push((0, j));
        }
        let perimeter: Vec<Point> = keys.iter().map(|&(i, j)| [xs[i as usize], y(j)]).collect();
        let block_h = (1.0 / nx as f64).min(hy);
        let seg = hole_segment_length(&spec.cell, block_h.min(0.025) / 4.0, 64.0);
        let hole = spec.cell.hole_polygon(seg).unwrap();
        let (y0, y1) = (y(-jb), y(jt));
        let hole_poly = hole.clone();
        let inside = move |p: Point| {
            p[0] > 0.0
                && p[0] < 1.0
                && p[1] > y0
                && p[1] < y1
                && !crate::geometry::point_in_polygon(p, &hole_poly)
        };
        let cellc = spec.cell.clone();
        let size = move |p: Point| (seg + 0.25 * cellc.hole_distance(p).max(0.0)).min(block_h);
        let region = Region {
            loops: vec![perimeter.clone(), hole.clone()],
            polylines: vec![],
            inside: &inside,
            size: &size,
            bbox: [0.0, 1.0, y0, y1],
        };
        let rm = mesh_region(&region)?;
        let mut ids = Vec::with_capacity(rm.points.len());
        for (k, p) in rm.points.iter().enumerate() {
            if k < keys.len() {
                let (i, j) = keys[k];
                ids.push(
                    asm.keyed[&Key {
                        ix: i,
                        iy: j,
                        side: 0,
                    }],
                );
            } else {
                let id = asm.free_node(*p);
                hole_flags.resize(asm.vertices.len(), false);
                hole_flags[id] = k < keys.len() + hole.len();
                ids.push(id);
            }
        }
        for t in &rm.triangles {
            asm.triangle(ids[t[0]], ids[t[1]], ids[t[2]]);
        }
    }
    hole_flags.resize(asm.vertices.len(), false);
    for j in -ny_half..ny_half {
        if let Some((b0, b1)) = block {
            if j >= b0 && j < b1 {
                continue;
            }
        }
        for i in 0..nx as i64 {
            let k = |i: i64, j: i64| {
                asm.keyed[&Key {
                    ix: i,
                    iy: j,
                    side: 0,
                }]
            };
            let (ll, lr, ur, ul) = (k(i, j), k(i + 1, j), k(i + 1, j + 1), k(i, j + 1));
            asm.quad(ll, lr, ur, ul, true);
        }
    }
    let mut periodic_pairs = Vec::new();
    for j in -ny_half..=ny_half {
        periodic_pairs.push((
            asm.keyed[&Key {
                ix: 0,
                iy: j,
                side: 0,
            }],
            asm.keyed[&Key {
                ix: nx as i64,
                iy: j,
                side: 0,
            }],
        ));
    }
    let lb = spec.l_band;
    asm.finish(
        spec.h,
        |v, a, b| {
            let (p, q) = (v[a], v[b]);
            if p[0] == 0.0 && q[0] == 0.0 {
                Some(EdgeTag::PeriodicLeft)
            } else if p[0] == 1.0 && q[0] == 1.0 {
                Some(EdgeTag::PeriodicRight)
            } else if p[1] == lb && q[1] == lb {
                Some(EdgeTag::BandTop)
            } else if p[1] == -lb && q[1] == -lb {
                Some(EdgeTag::BandBottom)
            } else if hole_flags[a] && hole_flags[b] {
                Some(EdgeTag::Hole)
            } else {
                None
            }
        },
        periodic_pairs,
        Vec::new(),
        Vec::new(),
    )
}

/// Mesh of the truncated holed sector. The plus sector (θ ∈ (0, 3π/2)) is
/// meshed directly; the minus sector is the mirror image of the plus sector
/// built with the mirrored cell.
pub fn mesh_sector(spec: &SectorSpec) -> Result<Mesh> {
    if spec.r_max < 8.0 {
        return Err(Error::Config(format!(
            "R_max = {} must be at least 8",
            spec.r_max
        )));
    }
    if !(spec.h_near > 0.0 && spec.h_far >= spec.h_near) {
        return Err(Error::Config(
            "sector mesh sizes need 0 < h_near <= h_far".into(),
        ));
    }
    spec.cell.validate()?;
    match spec.corner {
        Corner::Plus => mesh_plus_sector(spec.r_max, &spec.cell, spec.h_near, spec.h_far),
        Corner::Minus => {
            let m = mesh_plus_sector(spec.r_max, &spec.cell.mirrored(), spec.h_near, spec.h_far)?;
            Ok(m.mirrored())
        }
    }
}

fn mesh_plus_sector(r: f64, cell: &PeriodicityCell, h_near: f64, h_far: f64) -> Result<Mesh> {
    let n_holes = if cell.is_empty() {
        0
    } else {
        (r.floor() as usize).saturating_sub(2)
    };
    let grad = 0.25;
    let strip_end = -(n_holes as f64) - 1.0;
    let dist_refined = move |p: Point| -> f64 {
        let dx = if p[0] > 0.0 {
            p[0]
        } else if p[0] < strip_end {
            strip_end - p[0]
        } else {
            0.0
        };
        let dy = (p[1].abs() - if n_holes > 0 { 1.0 } else { 0.0 }).max(0.0);
        if n_holes == 0 {
            (p[0] * p[0] + p[1] * p[1]).sqrt()
        } else {
            (dx * dx + dy * dy).sqrt()
        }
    };
    let size = move |p: Point| (h_near + grad * dist_refined(p)).min(h_far);

    // Boundary: wall θ = 0, arc, wall θ = 3π/2.
    let walk = |from: Point, to: Point| -> Vec<Point> {
        let mut pts = vec![from];
        let len = dist(from, to);
        let dir = [(to[0] - from[0]) / len, (to[1] - from[1]) / len];
        let mut t = 0.0;
        loop {
            let p = [from[0] + t * dir[0], from[1] + t * dir[1]];
            let s = size(p);
            t += s;
            if t >= len - 0.5 * s {
                break;
            }
            pts.push([from[0] + t * dir[0], from[1] + t * dir[1]]);
        }
        pts
    };
    let mut outer: Vec<Point> = Vec::new();
    let mut seg_kind: Vec<EdgeTag> = Vec::new();
    let wall1 = walk([0.0, 0.0], [r, 0.0]);
    for p in &wall1 {
        outer.push(*p);
        seg_kind.push(EdgeTag::Dirichlet);
    }
    let arc_len = 1.5 * PI * r;
    let mut t = 0.0;
    loop {
        let th = t / r;
        if t > 0.0 {
            outer.push([r * th.cos(), r * th.sin()]);
        } else {
            outer.push([r, 0.0]);
        }
        seg_kind.push(EdgeTag::OuterArc);
        let s = size([r * th.cos(), r * th.sin()]);
        t += s;
        if t >= arc_len - 0.5 * s {
            break;
        }
    }
    let wall2 = walk([0.0, -r], [0.0, 0.0]);
    for p in &wall2 {
        outer.push(*p);
        seg_kind.push(EdgeTag::Dirichlet);
    }
    let outer_fixed: Vec<Point> = outer
        .iter()
        .map(|p| {
            [
                if p[0].abs() < 1e-12 { 0.0 } else { p[0] },
                if p[1].abs() < 1e-12 { 0.0 } else { p[1] },
            ]
        })
        .collect();

    let mut loops = vec![outer_fixed.clone()];
    let mut holes: Vec<Vec<Point>> = Vec::new();
    let seg = hole_segment_length(cell, h_near, 96.0);
    if let Some(poly) = cell.hole_polygon(seg) {
        for l in 1..=n_holes {
            let shifted: Vec<Point> = poly.iter().map(|p| [p[0] - l as f64, p[1]]).collect();
            holes.push(shifted.clone());
            loops.push(shifted);
        }
    }
    let holes_c = holes.clone();
    let cellc = cell.clone();
    let inside = move |p: Point| {
        let rr = (p[0] * p[0] + p[1] * p[1]).sqrt();
        if rr >= r * (1.0 - 1e-9) {
            return false;
        }
        let mut th = p[1].atan2(p[0]);
        if th < 0.0 {
            th += 2.0 * PI;
        }
        if !(th > 0.0 && th < 1.5 * PI) {
            return false;
        }
        // Inside the arc polygon as well.
        if !crate::geometry::point_in_polygon(p, &outer_fixed) {
            return false;
        }
        !holes_c
            .iter()
            .any(|hp| crate::geometry::point_in_polygon(p, hp))
    };
    let hole_size = move |p: Point| {
        let base = size(p);
        if n_holes == 0 || p[0] > 0.5 || p[0] < strip_end || p[1].abs() > 1.5 {
            return base;
        }
        let l = (-p[0]).ceil().max(1.0);
        let local = [p[0] + l, p[1]];
        (seg + 0.3 * cellc.hole_distance(local).max(0.0)).min(base)
    };
    let region = Region {
        loops,
        polylines: vec![],
        inside: &inside,
        size: &hole_size,
        bbox: [-r, r, -r, r],
    };
    let rm = mesh_region(&region)?;
    let n_outer = seg_kind.len();
    let mut seg_tags: HashMap<[usize; 2], EdgeTag> = HashMap::new();
    for k in 0..n_outer {
        seg_tags.insert(edge_key(k, (k + 1) % n_outer), seg_kind[k]);
    }
    let mut start = n_outer;
    for hp in &holes {
        for k in 0..hp.len() {
            seg_tags.insert(
                edge_key(start + k, start + (k + 1) % hp.len()),
                EdgeTag::Hole,
            );
        }
        start += hp.len();
    }
    let mut asm = Assembler::default();
    for p in &rm.points {
        asm.free_node(*p);
    }
    for t in &rm.triangles {
        asm.triangle(t[0], t[1], t[2]);
    }
    asm.finish(
        h_near,
        |_, a, b| seg_tags.get(&edge_key(a, b)).copied(),
        Vec::new(),
        Vec::new(),
        Vec::new(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SourceSpec;

    fn bench_domain() -> DomainSpec {
        DomainSpec {
            l: 1.0,
            l_top: 1.5,
            h_b: 0.75,
            h_t: 0.75,
            source: SourceSpec {
                center: [0.0, 0.4],
                radius: 0.2,
                amplitude: 1.0,
            },
        }
    }

    #[test]
    fn subdivide_is_symmetric() {
        let xs = subdivide(-1.0, 1.0, 7);
        for i in 0..=7 {
            assert_eq!(xs[i], -xs[7 - i]);
        }
    }

    #[test]
    fn empty_band_is_structured() {
        let m = mesh_band(&BandSpec {
            cell: PeriodicityCell::empty(),
            l_band: 4.0,
            h: 0.25,
        })
        .unwrap();
        m.validate().unwrap();
        assert_eq!(m.edges_with_tag(EdgeTag::Hole).len(), 0);
        assert_eq!(
            m.periodic_pairs.len(),
            m.nodes_with_tag(EdgeTag::PeriodicLeft).len()
        );
        assert_eq!(m.num_vertices(), 5 * 33);
    }

    #[test]
    fn disk_band_has_one_hole_loop() {
        let m = mesh_band(&BandSpec {
            cell: PeriodicityCell::centered_disk(0.25),
            l_band: 4.0,
            h: 0.1,
        })
        .unwrap();
        m.validate().unwrap();
        assert_eq!(m.count_loops(EdgeTag::Hole), 1);
        // Euler characteristic of a disk with one hole is zero.
        let chi = m.num_vertices() as i64 - m.num_edges() as i64 + m.num_triangles() as i64;
        assert_eq!(chi, 0);
        assert!(m.min_quality() >= 0.15, "quality {}", m.min_quality());
    }

    #[test]
    fn split_mesh_pairs_gamma_nodes() {
        let d = bench_domain();
        let m = mesh_limit_split(&d, 1.0 / 16.0).unwrap();
        m.validate().unwrap();
        assert_eq!(m.interface_pairs.len(), 33);
        assert_eq!(m.corner_nodes.len(), 4);
        let area: f64 = m.total_area();
        assert!((area - (3.0 * 0.75 + 2.0 * 0.75)).abs() < 1e-12);
    }

    #[test]
    fn perforated_mesh_counts_holes() {
        let d = bench_domain();
        let m =
            mesh_perforated(&d, &PeriodicityCell::centered_disk(0.25), 0.25, 1.0 / 32.0).unwrap();
        m.validate().unwrap();
        assert_eq!(m.count_loops(EdgeTag::Hole), 8);
        assert!(m.min_quality() >= 0.15, "quality {}", m.min_quality());
    }

    #[test]
    fn perforated_rejects_non_integer_cell_count() {
        let d = bench_domain();
        let e = mesh_perforated(&d, &PeriodicityCell::centered_disk(0.25), 0.3, 0.05).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn empty_perforated_matches_split_lattice() {
        let d = bench_domain();
        let a = mesh_perforated(&d, &PeriodicityCell::empty(), 0.25, 1.0 / 16.0).unwrap();
        let b = mesh_limit_split(&d, 1.0 / 16.0).unwrap();
        assert_eq!(a.num_triangles(), b.num_triangles());
        assert!(a.edge_tags.values().all(|&t| t == EdgeTag::Dirichlet));
    }

    #[test]
    fn sector_hole_count() {
        let spec = SectorSpec {
            corner: Corner::Plus,
            r_max: 16.0,
            cell: PeriodicityCell::centered_disk(0.25),
            h_near: 0.1,
            h_far: 1.0,
        };
        let m = mesh_sector(&spec).unwrap();
        m.validate().unwrap();
        assert_eq!(m.count_loops(EdgeTag::Hole), 14);
        let minus = mesh_sector(&SectorSpec {
            corner: Corner::Minus,
            ..spec
        })
        .unwrap();
        minus.validate().unwrap();
        assert_eq!(minus.count_loops(EdgeTag::Hole), 14);
    }
}
