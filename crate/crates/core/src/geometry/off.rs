//! OFF-style text meshes.
//!
//! ```text
//! OFF
//! nv nt 0
//! x y z        (nv lines)
//! 3 i j k      (nt lines, 0-based)
//! ```
//!
//! Tokens are whitespace separated and `#` starts a comment.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use super::SurfaceMesh;
use crate::error::{Error, Result};

pub fn load_mesh(path: impl AsRef<Path>) -> Result<SurfaceMesh> {
    let text = std::fs::read_to_string(path)?;
    parse_off(&text)
}

pub fn parse_off(text: &str) -> Result<SurfaceMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let err = |line: usize, message: String| Error::MeshParse { line, message };

    let (line, header) = lines.next().ok_or_else(|| err(0, "empty file".into()))?;
    // some writers put the counts on the header line
    let mut header_tokens = header.split_whitespace();
    if header_tokens.next() != Some("OFF") {
        return Err(err(line, format!("expected `OFF`, found `{header}`")));
    }
    let rest: Vec<&str> = header_tokens.collect();
    let (line, counts) = if rest.is_empty() {
        let (line, l) = lines
            .next()
            .ok_or_else(|| err(line, "missing counts line".into()))?;
        (line, l.split_whitespace().collect::<Vec<_>>())
    } else {
        (line, rest)
    };
    if counts.len() < 2 {
        return Err(err(line, "counts line needs `nv nt [ne]`".into()));
    }
    let parse_usize = |tok: &str, line: usize| {
        tok.parse::<usize>()
            .map_err(|_| err(line, format!("expected a non-negative integer, found `{tok}`")))
    };
    let nv = parse_usize(counts[0], line)?;
    let nt = parse_usize(counts[1], line)?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, l) = lines
            .next()
            .ok_or_else(|| err(line, format!("expected {nv} vertices, file ended")))?;
        let xyz: Vec<f64> = l
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| err(line, format!("bad coordinate `{t}`")))
            })
            .collect::<Result<_>>()?;
        if xyz.len() != 3 {
            return Err(err(line, format!("vertex needs 3 coordinates, found {}", xyz.len())));
        }
        vertices.push(Vector3::new(xyz[0], xyz[1], xyz[2]));
    }

    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (line, l) = lines
            .next()
            .ok_or_else(|| err(line, format!("expected {nt} faces, file ended")))?;
        let idx: Vec<usize> = l
            .split_whitespace()
            .map(|t| parse_usize(t, line))
            .collect::<Result<_>>()?;
        if idx.first() != Some(&3) || idx.len() != 4 {
            return Err(err(line, "only triangular faces `3 i j k` are supported".into()));
        }
        if let Some(&bad) = idx[1..].iter().find(|&&i| i >= nv) {
            return Err(err(line, format!("vertex index {bad} out of range (nv = {nv})")));
        }
        triangles.push([idx[1], idx[2], idx[3]]);
    }
    if let Some((line, l)) = lines.next() {
        return Err(err(line, format!("unexpected trailing content `{l}`")));
    }
    SurfaceMesh::new(vertices, triangles)
}

pub fn write_off(mesh: &SurfaceMesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "OFF");
    let _ = writeln!(out, "{} {} 0", mesh.vertices().len(), mesh.num_triangles());
    for v in mesh.vertices() {
        let _ = writeln!(out, "{:.17e} {:.17e} {:.17e}", v.x, v.y, v.z);
    }
    for [a, b, c] in mesh.triangles() {
        let _ = writeln!(out, "3 {a} {b} {c}");
    }
    out
}
