//! Legacy ASCII VTK 3.0 unstructured-grid output and a matching reader.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::mesh::TriMesh;
use crate::state::DiscreteState;

/// Cell type codes for triangles and tetrahedra.
pub const VTK_TRIANGLE: u8 = 5;
pub const VTK_TETRA: u8 = 10;

fn num(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").unwrap();
}

fn vector_array(out: &mut String, name: &str, values: impl Iterator<Item = [f64; 3]>) {
    writeln!(out, "VECTORS {name} double").unwrap();
    for v in values {
        num(out, v[0]);
        out.push(' ');
        num(out, v[1]);
        out.push(' ');
        num(out, v[2]);
        out.push('\n');
    }
}

fn scalar_array(out: &mut String, name: &str, values: &[f64]) {
    writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
    for &v in values {
        num(out, v);
        out.push('\n');
    }
}

/// Renders the state as a VTK document. Velocities are the nodal values,
/// padded with zeros in 2-D.
pub fn vtk_string(state: &DiscreteState, mesh: &TriMesh) -> String {
    let n = mesh.n_nodes();
    let ne = mesh.n_elements();
    let npe = mesh.npe();
    let mut out = String::with_capacity(200 * n);
    writeln!(out, "# vtk DataFile Version 3.0").unwrap();
    writeln!(out, "nematic state t={:.16e} step={}", state.t, state.step_index).unwrap();
    writeln!(out, "ASCII\nDATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(out, "POINTS {n} double").unwrap();
    for x in &mesh.nodes {
        num(&mut out, x[0]);
        out.push(' ');
        num(&mut out, x[1]);
        out.push(' ');
        num(&mut out, x[2]);
        out.push('\n');
    }
    writeln!(out, "CELLS {ne} {}", ne * (npe + 1)).unwrap();
    for e in 0..ne {
        write!(out, "{npe}").unwrap();
        for &z in mesh.element(e) {
            write!(out, " {z}").unwrap();
        }
        out.push('\n');
    }
    let ct = if mesh.dim == 3 { VTK_TETRA } else { VTK_TRIANGLE };
    writeln!(out, "CELL_TYPES {ne}").unwrap();
    for _ in 0..ne {
        writeln!(out, "{ct}").unwrap();
    }
    writeln!(out, "POINT_DATA {n}").unwrap();
    let as3 = |v: &crate::Vec3| [v.x, v.y, v.z];
    vector_array(&mut out, "velocity", state.velocity.nodal.iter().map(as3));
    vector_array(&mut out, "director", state.director.values.iter().map(as3));
    vector_array(&mut out, "q", state.q.iter().map(as3));
    scalar_array(&mut out, "n_plus", &state.n_plus.values);
    scalar_array(&mut out, "n_minus", &state.n_minus.values);
    scalar_array(&mut out, "phi", &state.phi.values);
    scalar_array(&mut out, "pressure", &state.pressure.values);
    out
}

pub fn write_vtk(state: &DiscreteState, mesh: &TriMesh, path: &Path) -> std::io::Result<()> {
    fs::write(path, vtk_string(state, mesh))
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VtkError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unexpected end of file while reading {0}")]
    Truncated(&'static str),
}

/// Parsed contents of a legacy unstructured-grid file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VtkDocument {
    pub title: String,
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub scalars: BTreeMap<String, Vec<f64>>,
    pub vectors: BTreeMap<String, Vec<[f64; 3]>>,
}

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &'static str) -> Result<&'a str, VtkError> {
        loop {
            let (i, l) = self.it.next().ok_or(VtkError::Truncated(what))?;
            self.line = i + 1;
            if !l.trim().is_empty() {
                return Ok(l.trim());
            }
        }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, VtkError> {
        Err(VtkError::Syntax {
            line: self.line,
            message: message.into(),
        })
    }

    fn numbers<T: std::str::FromStr>(&mut self, what: &'static str, count: usize) -> Result<Vec<T>, VtkError> {
        let l = self.next(what)?;
        let v: Result<Vec<T>, _> = l.split_whitespace().map(str::parse).collect();
        match v {
            Ok(v) if v.len() == count => Ok(v),
            Ok(v) => self.err(format!("{what}: expected {count} values, found {}", v.len())),
            Err(_) => self.err(format!("{what}: malformed number")),
        }
    }

    fn header(&mut self, keyword: &str, what: &'static str) -> Result<Vec<&'a str>, VtkError> {
        let l = self.next(what)?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.first() != Some(&keyword) {
            return self.err(format!("expected `{keyword}`, found `{l}`"));
        }
        Ok(toks)
    }

    fn count(&self, tok: Option<&&str>) -> Result<usize, VtkError> {
        match tok.and_then(|t| t.parse().ok()) {
            Some(n) => Ok(n),
            None => self.err("expected a count"),
        }
    }
}

/// Parses a document written by [`write_vtk`]: one point, cell or array
/// entry per line.
pub fn read_vtk(text: &str) -> Result<VtkDocument, VtkError> {
    let mut r = Lines {
        it: text.lines().enumerate(),
        line: 0,
    };
    if r.next("version")? != "# vtk DataFile Version 3.0" {
        return r.err("bad version line");
    }
    let mut doc = VtkDocument {
        title: r.next("title")?.to_string(),
        ..VtkDocument::default()
    };
    if r.next("format")? != "ASCII" {
        return r.err("only ASCII is supported");
    }
    if r.next("dataset")? != "DATASET UNSTRUCTURED_GRID" {
        return r.err("expected DATASET UNSTRUCTURED_GRID");
    }
    let toks = r.header("POINTS", "points")?;
    let n = r.count(toks.get(1))?;
    if toks.get(2) != Some(&"double") || toks.len() != 3 {
        return r.err("POINTS must be `POINTS <n> double`");
    }
    for _ in 0..n {
        let p = r.numbers::<f64>("point", 3)?;
        doc.points.push([p[0], p[1], p[2]]);
    }
    let toks = r.header("CELLS", "cells")?;
    let ne = r.count(toks.get(1))?;
    let size = r.count(toks.get(2))?;
    let mut seen = 0;
    for _ in 0..ne {
        let l = r.next("cell")?;
        let v: Vec<usize> = match l.split_whitespace().map(str::parse).collect() {
            Ok(v) => v,
            Err(_) => return r.err("malformed cell"),
        };
        if v.is_empty() || v[0] + 1 != v.len() {
            return r.err("cell vertex count mismatch");
        }
        if v[1..].iter().any(|&z| z >= n) {
            return r.err("cell references a missing point");
        }
        seen += v.len();
        doc.cells.push(v[1..].to_vec());
    }
    if seen != size {
        return r.err(format!("CELLS size {size} but {seen} entries"));
    }
    let toks = r.header("CELL_TYPES", "cell types")?;
    if r.count(toks.get(1))? != ne {
        return r.err("CELL_TYPES count differs from CELLS");
    }
    for c in 0..ne {
        let t = r.numbers::<u8>("cell type", 1)?[0];
        let expect = match t {
            VTK_TRIANGLE => 3,
            VTK_TETRA => 4,
            _ => return r.err(format!("unsupported cell type {t}")),
        };
        if doc.cells[c].len() != expect {
            return r.err("cell type does not match vertex count");
        }
        doc.cell_types.push(t);
    }
    let toks = r.header("POINT_DATA", "point data")?;
    if r.count(toks.get(1))? != n {
        return r.err("POINT_DATA count differs from POINTS");
    }
    loop {
        let l = match r.next("array") {
            Ok(l) => l,
            Err(VtkError::Truncated(_)) => break,
            Err(e) => return Err(e),
        };
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks.as_slice() {
            ["SCALARS", name, "double", "1"] | ["SCALARS", name, "double"] => {
                let name = name.to_string();
                if r.next("lookup table")? != "LOOKUP_TABLE default" {
                    return r.err("expected LOOKUP_TABLE default");
                }
                let mut v = Vec::with_capacity(n);
                for _ in 0..n {
                    v.push(r.numbers::<f64>("scalar", 1)?[0]);
                }
                if doc.scalars.insert(name, v).is_some() {
                    return r.err("duplicate array name");
                }
            }
            ["VECTORS", name, "double"] => {
                let name = name.to_string();
                let mut v = Vec::with_capacity(n);
                for _ in 0..n {
                    let p = r.numbers::<f64>("vector", 3)?;
                    v.push([p[0], p[1], p[2]]);
                }
                if doc.vectors.insert(name, v).is_some() {
                    return r.err("duplicate array name");
                }
            }
            _ => return r.err(format!("unexpected `{l}`")),
        }
    }
    Ok(doc)
}
