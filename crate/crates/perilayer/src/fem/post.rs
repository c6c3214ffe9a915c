//! Post-processing of nodal fields: norms, traces and gradient recovery.

use super::{element_gradients, CsrMatrix};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::mesh::Mesh;

/// Norms of a P1 field over a set of triangles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub h1_semi: f64,
    pub h1: f64,
}

/// Side of the doubled interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Top,
    Bottom,
}

/// Exact P1 norms over the triangles whose barycenter satisfies `select`.
pub fn subdomain_norms(mesh: &Mesh, values: &[f64], select: &dyn Fn(Point) -> bool) -> Result<Norms> {
    let mut l2 = 0.0;
    let mut semi = 0.0;
    let mut count = 0usize;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if !select(mesh.centroid(t)) {
            continue;
        }
        count += 1;
        let (g, area) = element_gradients(mesh, t)?;
        let u = [values[tri[0]], values[tri[1]], values[tri[2]]];
        let sum = u[0] + u[1] + u[2];
        let sq = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
        l2 += area / 12.0 * (sq + sum * sum);
        let gx = g[0][0] * u[0] + g[1][0] * u[1] + g[2][0] * u[2];
        let gy = g[0][1] * u[0] + g[1][1] * u[1] + g[2][1] * u[2];
        semi += area * (gx * gx + gy * gy);
    }
    if count == 0 {
        return Err(Error::Numerical("norm region contains no triangles".into()));
    }
    Ok(Norms {
        l2: l2.sqrt(),
        h1_semi: semi.sqrt(),
        h1: (l2 + semi).sqrt(),
    })
}

/// Constant gradient of a P1 field on triangle `t`.
pub fn gradient(mesh: &Mesh, values: &[f64], t: usize) -> Result<[f64; 2]> {
    let (g, _) = element_gradients(mesh, t)?;
    let tri = mesh.triangles[t];
    let mut out = [0.0; 2];
    for k in 0..3 {
        out[0] += g[k][0] * values[tri[k]];
        out[1] += g[k][1] * values[tri[k]];
    }
    Ok(out)
}

/// Relative energy-identity gap |uᵀKu − bᵀu| / uᵀKu for a solution with
/// homogeneous constraints.
pub fn energy_identity_gap(k: &CsrMatrix, u: &[f64], b: &[f64]) -> f64 {
    let a = k.bilinear(u, u);
    let f: f64 = b.iter().zip(u).map(|(p, q)| p * q).sum();
    if a == 0.0 {
        f.abs()
    } else {
        (a - f).abs() / a
    }
}

/// Interface nodes of one side as `(x1, node)` sorted by `x1`.
pub fn interface_nodes(mesh: &Mesh, side: Side) -> Vec<(f64, usize)> {
    let mut v: Vec<(f64, usize)> = mesh
        .interface_pairs
        .iter()
        .map(|&(t, b)| {
            let n = if side == Side::Top { t } else { b };
            (mesh.vertices[n][0], n)
        })
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

/// Piecewise-linear trace of a field on one side of the interface at `x1`.
pub fn trace_on_gamma(mesh: &Mesh, values: &[f64], side: Side, x1: f64) -> Result<f64> {
    let nodes = interface_nodes(mesh, side);
    interpolate_sorted(&nodes.iter().map(|&(x, n)| (x, values[n])).collect::<Vec<_>>(), x1)
}

/// Linear interpolation in a table sorted by abscissa.
pub fn interpolate_sorted(table: &[(f64, f64)], x: f64) -> Result<f64> {
    if table.len() < 2 {
        return Err(Error::Numerical("trace table too short".into()));
    }
    let (x0, xn) = (table[0].0, table[table.len() - 1].0);
    let tol = 1e-12 * (xn - x0).abs().max(1.0);
    if x < x0 - tol || x > xn + tol {
        return Err(Error::Numerical(format!("trace point {} outside [{}, {}]", x, x0, xn)));
    }
    let k = table.partition_point(|p| p.0 <= x).clamp(1, table.len() - 1);
    let (a, b) = (table[k - 1], table[k]);
    let s = (x - a.0) / (b.0 - a.0);
    Ok(a.1 + s * (b.1 - a.1))
}

/// One-sided normal derivative ∂₂u at every interface node of `side`,
/// recovered by a quadratic least-squares fit over the two-ring patch.
pub fn trace_normal_derivative(mesh: &Mesh, values: &[f64], side: Side) -> Result<Vec<(f64, f64)>> {
    let vt = mesh.vertex_triangles();
    interface_nodes(mesh, side)
        .into_iter()
        .map(|(x, n)| Ok((x, recover_gradient(mesh, &vt, values, n)?[1])))
        .collect()
}

/// Gradient at node `n` from a quadratic least-squares fit over its two-ring.
/// Falls back to a linear fit when the patch is too small.
pub fn recover_gradient(mesh: &Mesh, vt: &[Vec<usize>], values: &[f64], n: usize) -> Result<[f64; 2]> {
    let mut ring: Vec<usize> = vec![n];
    for _ in 0..2 {
        let mut next = ring.clone();
        for &v in &ring {
            for &t in &vt[v] {
                next.extend_from_slice(&mesh.triangles[t]);
            }
        }
        next.sort_unstable();
        next.dedup();
        ring = next;
    }
    let x0 = mesh.vertices[n];
    let h = ring
        .iter()
        .map(|&v| crate::geometry::dist(mesh.vertices[v], x0))
        .fold(0.0, f64::max);
    if h == 0.0 {
        return Err(Error::Numerical(format!("isolated node {}", n)));
    }
    for nb in [6usize, 3] {
        if ring.len() < nb + 1 {
            continue;
        }
        let mut ata = vec![[0.0f64; 6]; 6];
        let mut atb = [0.0f64; 6];
        for &v in &ring {
            let dx = (mesh.vertices[v][0] - x0[0]) / h;
            let dy = (mesh.vertices[v][1] - x0[1]) / h;
            let row = [1.0, dx, dy, dx * dx, dx * dy, dy * dy];
            for i in 0..nb {
                for j in 0..nb {
                    ata[i][j] += row[i] * row[j];
                }
                atb[i] += row[i] * values[v];
            }
        }
        if let Some(c) = solve_small(&ata, &atb, nb) {
            return Ok([c[1] / h, c[2] / h]);
        }
    }
    Err(Error::Numerical(format!("gradient recovery failed at node {}", n)))
}

fn solve_small(a: &[[f64; 6]], b: &[f64; 6], n: usize) -> Option<[f64; 6]> {
    let mut m = [[0.0f64; 7]; 6];
    for i in 0..n {
        m[i][..n].copy_from_slice(&a[i][..n]);
        m[i][6] = b[i];
    }
    let scale = (0..n).map(|i| m[i][i].abs()).fold(0.0, f64::max);
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c].abs() < 1e-10 * scale {
            return None;
        }
        m.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = m[r][c] / m[c][c];
                for k in c..7 {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
    }
    let mut x = [0.0; 6];
    for i in 0..n {
        x[i] = m[i][6] / m[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn square(n: usize) -> Mesh {
        let mut vertices = Vec::new();
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
            }
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut triangles = Vec::new();
        for j in 0..n {
            for i in 0..n {
                triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        Mesh {
            vertices,
            triangles,
            edge_tags: BTreeMap::new(),
            periodic_pairs: vec![],
            interface_pairs: vec![],
            corner_nodes: vec![],
            h_target: 1.0 / n as f64,
        }
    }

    #[test]
    fn norms_of_x1_on_unit_square() {
        let m = square(5);
        let u: Vec<f64> = m.vertices.iter().map(|p| p[0]).collect();
        let n = subdomain_norms(&m, &u, &|_| true).unwrap();
        assert!((n.h1_semi - 1.0).abs() < 1e-13);
        assert!((n.l2 - (1.0f64 / 3.0).sqrt()).abs() < 1e-13);
        assert!((n.h1 - (4.0f64 / 3.0).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn empty_selection_is_an_error() {
        let m = square(2);
        let u = vec![0.0; m.vertices.len()];
        assert!(subdomain_norms(&m, &u, &|_| false).is_err());
    }

    #[test]
    fn quadratic_gradient_recovered_exactly() {
        let m = square(8);
        let u: Vec<f64> = m
            .vertices
            .iter()
            .map(|p| 1.0 + 2.0 * p[0] - p[1] + p[0] * p[1] + 3.0 * p[1] * p[1])
            .collect();
        let vt = m.vertex_triangles();
        for n in [0usize, 4, 40, 80] {
            let p = m.vertices[n];
            let g = recover_gradient(&m, &vt, &u, n).unwrap();
            assert!((g[0] - (2.0 + p[1])).abs() < 1e-9);
            assert!((g[1] - (-1.0 + p[0] + 6.0 * p[1])).abs() < 1e-9);
        }
    }

    #[test]
    fn sorted_interpolation() {
        let t = [(0.0, 0.0), (1.0, 2.0), (2.0, 0.0)];
        assert!((interpolate_sorted(&t, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((interpolate_sorted(&t, 2.0).unwrap()).abs() < 1e-15);
        assert!(interpolate_sorted(&t, 2.5).is_err());
    }
}
