//! P1 finite-element kernel: assembly, affine node constraints (Dirichlet,
//! periodic, interface jumps), sparse SPD solves, norms and traces.

mod post;
pub mod quadrature;
mod solver;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Point, SourceSpec};
use crate::mesh::{EdgeTag, Mesh};

pub use post::{
    energy_identity_gap, gradient, interface_nodes, recover_gradient, subdomain_norms,
    trace_normal_derivative, trace_on_gamma, Norms, Side,
};
pub use solver::{Factorization, SolverKind};
use quadrature::{gauss_legendre, TriangleRule};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an `n × n` matrix, summing duplicate entries.
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in t {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix {
            n,
            indptr,
            indices,
            values,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.indptr[i]..self.indptr[i + 1])
                    .map(|k| self.values[k] * x[self.indices[k]])
                    .sum()
            })
            .collect()
    }

    /// Entry (i, j), zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.indices[self.indptr[i]..self.indptr[i + 1]];
        match row.binary_search(&j) {
            Ok(k) => self.values[self.indptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Largest |a_ij − a_ji| relative to the largest |a_ij|.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..self.n {
            for k in self.indptr[i]..self.indptr[i + 1] {
                let j = self.indices[k];
                scale = scale.max(self.values[k].abs());
                worst = worst.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    /// Row sums.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.values[self.indptr[i]..self.indptr[i + 1]].iter().sum())
            .collect()
    }

    /// Bilinear form xᵀ A y.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.matvec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

/// Gradients of the three P1 basis functions on triangle `t` and its area.
pub fn element_gradients(mesh: &Mesh, t: usize) -> Result<([[f64; 2]; 3], f64)> {
    let [a, b, c] = mesh.triangle_points(t);
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let area = 0.5 * det;
    if !(area > 0.0) || !area.is_finite() {
        return Err(Error::Assembly(format!("degenerate triangle {}", t)));
    }
    let g = [
        [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
        [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
        [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
    ];
    Ok((g, area))
}

/// Stiffness matrix ∫∇φ_i·∇φ_j (exact for P1).
pub fn stiffness(mesh: &Mesh) -> Result<CsrMatrix> {
    let mut t = Vec::with_capacity(9 * mesh.triangles.len());
    for (e, tri) in mesh.triangles.iter().enumerate() {
        let (g, area) = element_gradients(mesh, e)?;
        for i in 0..3 {
            for j in 0..3 {
                t.push((tri[i], tri[j], area * (g[i][0] * g[j][0] + g[i][1] * g[j][1])));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(mesh.vertices.len(), t))
}

/// Consistent mass matrix ∫φ_iφ_j.
pub fn mass(mesh: &Mesh) -> CsrMatrix {
    let mut t = Vec::with_capacity(9 * mesh.triangles.len());
    for (e, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.area(e);
        for i in 0..3 {
            for j in 0..3 {
                let m = if i == j { area / 6.0 } else { area / 12.0 };
                t.push((tri[i], tri[j], m));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.vertices.len(), t)
}

/// Load vector ∫ f φ_i by the given triangle rule.
pub fn load_vector(mesh: &Mesh, f: &dyn Fn(Point) -> f64, rule: &TriangleRule) -> Vec<f64> {
    let mut b = vec![0.0; mesh.vertices.len()];
    for (e, tri) in mesh.triangles.iter().enumerate() {
        let [p0, p1, p2] = mesh.triangle_points(e);
        let area = mesh.area(e);
        for (l, w) in rule.bary.iter().zip(&rule.weights) {
            let x = [
                l[0] * p0[0] + l[1] * p1[0] + l[2] * p2[0],
                l[0] * p0[1] + l[1] * p1[1] + l[2] * p2[1],
            ];
            let fx = f(x);
            if fx != 0.0 {
                for k in 0..3 {
                    b[tri[k]] += area * w * fx * l[k];
                }
            }
        }
    }
    b
}

/// Load vector of a piecewise-constant function given per triangle.
pub fn load_piecewise_constant(mesh: &Mesh, values: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0; mesh.vertices.len()];
    for (e, tri) in mesh.triangles.iter().enumerate() {
        let a = mesh.area(e) / 3.0 * values[e];
        for &k in tri {
            b[k] += a;
        }
    }
    b
}

/// Edge load ∫_edges h φ_i with an n-point Gauss rule per edge.
pub fn edge_load(mesh: &Mesh, edges: &[[usize; 2]], h: &dyn Fn(Point) -> f64, n_gauss: usize) -> Vec<f64> {
    let (x, w) = gauss_legendre(n_gauss);
    let mut b = vec![0.0; mesh.vertices.len()];
    for e in edges {
        let a = mesh.vertices[e[0]];
        let c = mesh.vertices[e[1]];
        let len = crate::geometry::dist(a, c);
        for (xi, wi) in x.iter().zip(&w) {
            let s = 0.5 * (xi + 1.0);
            let p = [a[0] + s * (c[0] - a[0]), a[1] + s * (c[1] - a[1])];
            let v = 0.5 * wi * len * h(p);
            b[e[0]] += v * (1.0 - s);
            b[e[1]] += v * s;
        }
    }
    b
}

/// Affine node constraints. Each node is free, fixed to a value, or linked
/// to another node by `u_i = u_j + offset`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Constraints {
    fixed: Vec<Option<f64>>,
    link: Vec<Option<(usize, f64)>>,
}

/// Resolved constraints: dof index of each node (`None` for fixed nodes) and
/// the affine offset, so that `u_i = x[dof_i] + offset_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMap {
    pub dof: Vec<Option<usize>>,
    pub offset: Vec<f64>,
    pub n_dofs: usize,
}

impl Constraints {
    pub fn new(n: usize) -> Self {
        Constraints {
            fixed: vec![None; n],
            link: vec![None; n],
        }
    }

    pub fn fix(&mut self, node: usize, value: f64) {
        self.fixed[node] = Some(value);
    }

    pub fn is_fixed(&self, node: usize) -> bool {
        self.fixed[node].is_some()
    }

    pub fn link(&mut self, slave: usize, master: usize, offset: f64) -> Result<()> {
        if slave == master {
            return Err(Error::Assembly("node linked to itself".into()));
        }
        if self.link[slave].is_some() {
            return Err(Error::Assembly(format!("node {} linked twice", slave)));
        }
        self.link[slave] = Some((master, offset));
        Ok(())
    }

    pub fn num_fixed(&self) -> usize {
        self.fixed.iter().filter(|f| f.is_some()).count()
    }

    pub fn num_linked(&self) -> usize {
        self.link.iter().filter(|f| f.is_some()).count()
    }

    /// Resolves link chains into a dof numbering and offsets.
    pub fn resolve(&self) -> Result<NodeMap> {
        let n = self.fixed.len();
        let mut root = vec![usize::MAX; n];
        let mut off = vec![0.0; n];
        for i in 0..n {
            let mut chain = Vec::new();
            let mut j = i;
            let mut acc = 0.0;
            while let Some((m, o)) = self.link[j] {
                if self.fixed[j].is_some() {
                    break;
                }
                chain.push(j);
                if chain.len() > n {
                    return Err(Error::Assembly("cyclic node links".into()));
                }
                acc += o;
                j = m;
            }
            root[i] = j;
            off[i] = acc;
        }
        let mut dof = vec![None; n];
        let mut offset = vec![0.0; n];
        let mut n_dofs = 0;
        let mut root_dof = vec![usize::MAX; n];
        for i in 0..n {
            let r = root[i];
            if self.fixed[r].is_none() && root_dof[r] == usize::MAX && r == i {
                root_dof[r] = n_dofs;
                n_dofs += 1;
            }
        }
        for i in 0..n {
            let r = root[i];
            match self.fixed[r] {
                Some(v) => {
                    offset[i] = v + off[i];
                }
                None => {
                    if root_dof[r] == usize::MAX {
                        root_dof[r] = n_dofs;
                        n_dofs += 1;
                    }
                    dof[i] = Some(root_dof[r]);
                    offset[i] = off[i];
                }
            }
        }
        Ok(NodeMap { dof, offset, n_dofs })
    }
}

/// Node-level linear system with its constraints.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub mesh: Arc<Mesh>,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub constraints: Constraints,
    pub log: Vec<String>,
}

/// Nodal field on a mesh.
#[derive(Debug, Clone)]
pub struct Field {
    pub mesh: Arc<Mesh>,
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.vertices.len();
        Field {
            mesh,
            values: vec![0.0; n],
        }
    }

    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(Point) -> f64) -> Self {
        let values = mesh.vertices.iter().map(|&p| f(p)).collect();
        Field { mesh, values }
    }
}

/// Assembles stiffness and source load (degree-5 rule). `None` means f = 0.
pub fn assemble(mesh: &Arc<Mesh>, source: Option<&SourceSpec>) -> Result<SparseSystem> {
    assemble_with_rule(mesh, source, &TriangleRule::degree5())
}

/// Assembly with an explicit load quadrature rule.
pub fn assemble_with_rule(mesh: &Arc<Mesh>, source: Option<&SourceSpec>, rule: &TriangleRule) -> Result<SparseSystem> {
    let matrix = stiffness(mesh)?;
    let rhs = match source {
        Some(s) => load_vector(mesh, &|x| s.value(x), rule),
        None => vec![0.0; mesh.vertices.len()],
    };
    Ok(SparseSystem {
        mesh: mesh.clone(),
        matrix,
        rhs,
        constraints: Constraints::new(mesh.vertices.len()),
        log: Vec::new(),
    })
}

impl SparseSystem {
    /// System with a prescribed node-level right-hand side.
    pub fn with_rhs(mesh: &Arc<Mesh>, rhs: Vec<f64>) -> Result<Self> {
        let mut s = assemble(mesh, None)?;
        if rhs.len() != s.rhs.len() {
            return Err(Error::Assembly("rhs length mismatch".into()));
        }
        s.rhs = rhs;
        Ok(s)
    }

    /// Fixes every node on edges carrying `tag` to `values(x)`.
    pub fn apply_dirichlet(&mut self, tag: EdgeTag, values: &dyn Fn(Point) -> f64) -> Result<()> {
        let nodes = self.mesh.nodes_with_tag(tag);
        if nodes.is_empty() {
            return Err(Error::Assembly(format!("no edges tagged {:?}", tag)));
        }
        for &i in &nodes {
            let v = values(self.mesh.vertices[i]);
            if !v.is_finite() {
                return Err(Error::Assembly(format!("non-finite Dirichlet value at node {}", i)));
            }
            self.constraints.fix(i, v);
        }
        self.log.push(format!("dirichlet {:?}: {} nodes", tag, nodes.len()));
        Ok(())
    }

    /// Fixes one node (used to remove a constant kernel).
    pub fn pin(&mut self, node: usize, value: f64) {
        self.constraints.fix(node, value);
        self.log.push(format!("pin node {}", node));
    }

    /// Master–slave elimination u_right = u_left.
    pub fn apply_periodic(&mut self, pairs: &[(usize, usize)]) -> Result<()> {
        for &(l, r) in pairs {
            let (pl, pr) = (self.mesh.vertices[l], self.mesh.vertices[r]);
            if (pl[1] - pr[1]).abs() > 1e-12 {
                return Err(Error::Assembly(format!("inconsistent periodic pair ({}, {})", l, r)));
            }
            self.constraints.link(r, l, 0.0)?;
        }
        self.log.push(format!("periodic: {} pairs", pairs.len()));
        Ok(())
    }

    /// Imposes [u] = g strongly (top copy = bottom copy + g) and [∂₂u] = h
    /// weakly through the interface load −∫_Γ h φ. Corner nodes that are
    /// already fixed are skipped.
    pub fn apply_interface_jump(&mut self, g: &dyn Fn(f64) -> f64, h: &dyn Fn(f64) -> f64) -> Result<()> {
        let mesh = self.mesh.clone();
        if mesh.interface_pairs.is_empty() {
            return Err(Error::Assembly("mesh has no doubled interface nodes".into()));
        }
        for &(t, b) in &mesh.interface_pairs {
            if self.constraints.is_fixed(t) && self.constraints.is_fixed(b) {
                continue;
            }
            let x1 = mesh.vertices[t][0];
            let gv = g(x1);
            if !gv.is_finite() {
                return Err(Error::Assembly(format!("jump data not finite at x1 = {}", x1)));
            }
            self.constraints.link(t, b, gv)?;
        }
        let edges = mesh.edges_with_tag(EdgeTag::InterfaceBottom);
        let bad = std::cell::Cell::new(None);
        let load = edge_load(
            &mesh,
            &edges,
            &|p| {
                let v = h(p[0]);
                if !v.is_finite() {
                    bad.set(Some(p[0]));
                }
                v
            },
            4,
        );
        if let Some(x) = bad.get() {
            return Err(Error::Assembly(format!("flux jump data not finite at x1 = {}", x)));
        }
        for (r, l) in self.rhs.iter_mut().zip(load) {
            *r -= l;
        }
        self.log.push(format!("interface jump: {} pairs", mesh.interface_pairs.len()));
        Ok(())
    }

    /// Resolves constraints and factorizes the reduced matrix.
    pub fn factorize(&self) -> Result<Factorization> {
        Factorization::new(&self.matrix, self.constraints.resolve()?)
    }

    /// Solves the constrained system.
    pub fn solve(&self) -> Result<Field> {
        let f = self.factorize()?;
        self.solve_with(&f)
    }

    /// Solves with an existing factorization of a system with the same
    /// constraint structure.
    pub fn solve_with(&self, f: &Factorization) -> Result<Field> {
        let map = self.constraints.resolve()?;
        if map.dof != f.map.dof {
            return Err(Error::Assembly("factorization does not match the constraint structure".into()));
        }
        let values = f.solve(&self.matrix, &self.rhs, &map.offset)?;
        Ok(Field {
            mesh: self.mesh.clone(),
            values,
        })
    }
}
