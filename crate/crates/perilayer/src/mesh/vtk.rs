//! Legacy-VTK ASCII export and import of meshes with nodal scalar fields.
//!
//! Layout: `POINTS` (z = 0), `CELLS` with triangles (type 5) followed by
//! tagged boundary edges (type 3), `CELL_TYPES`, a `CELL_DATA` integer array
//! `tag` (−1 for triangles, the edge tag code otherwise) and `POINT_DATA`
//! scalar arrays. Node pairings are stored in `FIELD` blocks so that a
//! written mesh reads back identically.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{EdgeTag, Mesh};
use crate::error::{Error, Result};

/// Writes `mesh` and named nodal fields to a legacy-VTK ASCII file.
pub fn write_vtk(path: &Path, mesh: &Mesh, fields: &[(&str, &[f64])]) -> Result<()> {
    std::fs::write(path, to_vtk_string(mesh, fields)?)?;
    Ok(())
}

fn to_vtk_string(mesh: &Mesh, fields: &[(&str, &[f64])]) -> Result<String> {
    let mut s = String::new();
    let nv = mesh.vertices.len();
    let nt = mesh.triangles.len();
    let ne = mesh.edge_tags.len();
    writeln!(s, "# vtk DataFile Version 3.0").unwrap();
    writeln!(s, "perilayer mesh h_target={:e}", mesh.h_target).unwrap();
    writeln!(s, "ASCII").unwrap();
    writeln!(s, "DATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(s, "POINTS {} double", nv).unwrap();
    for p in &mesh.vertices {
        writeln!(s, "{:e} {:e} 0", p[0], p[1]).unwrap();
    }
    writeln!(s, "CELLS {} {}", nt + ne, 4 * nt + 3 * ne).unwrap();
    for t in &mesh.triangles {
        writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    for e in mesh.edge_tags.keys() {
        writeln!(s, "2 {} {}", e[0], e[1]).unwrap();
    }
    writeln!(s, "CELL_TYPES {}", nt + ne).unwrap();
    for _ in 0..nt {
        writeln!(s, "5").unwrap();
    }
    for _ in 0..ne {
        writeln!(s, "3").unwrap();
    }
    writeln!(s, "CELL_DATA {}", nt + ne).unwrap();
    writeln!(s, "SCALARS tag int 1").unwrap();
    writeln!(s, "LOOKUP_TABLE default").unwrap();
    for _ in 0..nt {
        writeln!(s, "-1").unwrap();
    }
    for t in mesh.edge_tags.values() {
        writeln!(s, "{}", t.code()).unwrap();
    }
    writeln!(s, "POINT_DATA {}", nv).unwrap();
    for (name, values) in fields {
        if values.len() != nv {
            return Err(Error::Mesh(format!(
                "field {} has {} values for {} vertices",
                name,
                values.len(),
                nv
            )));
        }
        writeln!(s, "SCALARS {} double 1", name).unwrap();
        writeln!(s, "LOOKUP_TABLE default").unwrap();
        for v in *values {
            writeln!(s, "{:e}", v).unwrap();
        }
    }
    let pair_block = |s: &mut String, name: &str, pairs: &[(usize, usize)]| {
        writeln!(s, "FIELD {} 1", name).unwrap();
        writeln!(s, "pairs 2 {} int", pairs.len()).unwrap();
        for (a, b) in pairs {
            writeln!(s, "{} {}", a, b).unwrap();
        }
    };
    pair_block(&mut s, "periodic_pairs", &mesh.periodic_pairs);
    pair_block(&mut s, "interface_pairs", &mesh.interface_pairs);
    let corners: Vec<(usize, usize)> = mesh.corner_nodes.iter().map(|&c| (c, c)).collect();
    pair_block(&mut s, "corner_nodes", &corners);
    Ok(s)
}

/// Reads a file produced by [`write_vtk`]. Returns the mesh and its fields.
pub fn read_vtk(path: &Path) -> Result<(Mesh, Vec<(String, Vec<f64>)>)> {
    let text = std::fs::read_to_string(path)?;
    parse_vtk(&text)
}

fn parse_vtk(text: &str) -> Result<(Mesh, Vec<(String, Vec<f64>)>)> {
    let bad = |m: &str| Error::Mesh(format!("malformed mesh file: {}", m));
    let mut lines = text.lines();
    let mut next = || lines.next().ok_or_else(|| bad("unexpected end of file"));
    let header = next()?;
    if !header.starts_with("# vtk") {
        return Err(bad("missing header"));
    }
    let title = next()?;
    let h_target = title
        .split("h_target=")
        .nth(1)
        .and_then(|v| v.trim().parse::<f64>().ok())
        .unwrap_or(0.0);
    next()?;
    next()?;
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad(s));
    let fl = |s: &str| s.parse::<f64>().map_err(|_| bad(s));
    let pts_line = next()?;
    let nv = num(pts_line
        .split_whitespace()
        .nth(1)
        .ok_or_else(|| bad("POINTS"))?)?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let l = next()?;
        let mut it = l.split_whitespace();
        let x = fl(it.next().ok_or_else(|| bad("x"))?)?;
        let y = fl(it.next().ok_or_else(|| bad("y"))?)?;
        vertices.push([x, y]);
    }
    let cells_line = next()?;
    let nc = num(cells_line
        .split_whitespace()
        .nth(1)
        .ok_or_else(|| bad("CELLS"))?)?;
    let mut cells: Vec<Vec<usize>> = Vec::with_capacity(nc);
    for _ in 0..nc {
        let l = next()?;
        let v: Vec<usize> = l
            .split_whitespace()
            .skip(1)
            .map(num)
            .collect::<Result<_>>()?;
        cells.push(v);
    }
    next()?;
    for _ in 0..nc {
        next()?;
    }
    next()?;
    next()?;
    next()?;
    let mut tags: Vec<i64> = Vec::with_capacity(nc);
    for _ in 0..nc {
        tags.push(next()?.trim().parse::<i64>().map_err(|_| bad("tag"))?);
    }
    let mut triangles = Vec::new();
    let mut edge_tags = BTreeMap::new();
    for (c, t) in cells.iter().zip(&tags) {
        if *t < 0 {
            if c.len() != 3 {
                return Err(bad("triangle arity"));
            }
            triangles.push([c[0], c[1], c[2]]);
        } else {
            let tag = EdgeTag::from_code(*t as u8).ok_or_else(|| bad("unknown tag"))?;
            edge_tags.insert([c[0], c[1]], tag);
        }
    }
    next()?;
    let mut fields = Vec::new();
    let mut periodic_pairs = Vec::new();
    let mut interface_pairs = Vec::new();
    let mut corner_nodes = Vec::new();
    while let Ok(l) = next() {
        let parts: Vec<&str> = l.split_whitespace().collect();
        match parts.first() {
            Some(&"SCALARS") => {
                let name = parts.get(1).ok_or_else(|| bad("field name"))?.to_string();
                next()?;
                let mut vals = Vec::with_capacity(nv);
                for _ in 0..nv {
                    vals.push(fl(next()?.trim())?);
                }
                fields.push((name, vals));
            }
            Some(&"FIELD") => {
                let name = parts.get(1).ok_or_else(|| bad("field block"))?.to_string();
                let info = next()?;
                let count = num(info
                    .split_whitespace()
                    .nth(2)
                    .ok_or_else(|| bad("pair count"))?)?;
                let mut pairs = Vec::with_capacity(count);
                for _ in 0..count {
                    let l = next()?;
                    let v: Vec<usize> = l.split_whitespace().map(num).collect::<Result<_>>()?;
                    pairs.push((v[0], v[1]));
                }
                match name.as_str() {
                    "periodic_pairs" => periodic_pairs = pairs,
                    "interface_pairs" => interface_pairs = pairs,
                    "corner_nodes" => corner_nodes = pairs.into_iter().map(|p| p.0).collect(),
                    _ => return Err(bad("unknown field block")),
                }
            }
            None => {}
            _ => return Err(bad(l)),
        }
    }
    Ok((
        Mesh {
            vertices,
            triangles,
            edge_tags,
            periodic_pairs,
            interface_pairs,
            corner_nodes,
            h_target,
        },
        fields,
    ))
}
