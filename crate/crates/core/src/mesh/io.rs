//! ASCII mesh file input and output (OFF, OBJ, PLY).

use std::fs;
use std::io::Write as _;
use std::path::Path;

use nalgebra::Point3;

use super::{MeshError, SurfaceMesh};

/// Supported ASCII mesh file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
    Ply,
}

impl MeshFormat {
    /// Infer the format from a file extension.
    pub fn from_path(path: &Path) -> Result<Self, MeshError> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("off") => Ok(Self::Off),
            Some("obj") => Ok(Self::Obj),
            Some("ply") => Ok(Self::Ply),
            other => Err(MeshError::UnsupportedFormat(
                other.unwrap_or("<no extension>").to_string(),
            )),
        }
    }
}

/// Load and validate a mesh in the given format.
pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<SurfaceMesh, MeshError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let (vertices, triangles) = match format {
        MeshFormat::Off => parse_off(&text)?,
        MeshFormat::Obj => parse_obj(&text)?,
        MeshFormat::Ply => parse_ply(&text)?,
    };
    SurfaceMesh::new(vertices, triangles)
}

/// Write a mesh in the requested format.
pub fn save_mesh(
    mesh: &SurfaceMesh,
    path: impl AsRef<Path>,
    format: MeshFormat,
) -> Result<(), MeshError> {
    let mut out = String::new();
    match format {
        MeshFormat::Off => {
            out.push_str("OFF\n");
            out.push_str(&format!("{} {} {}\n", mesh.n_vertices(), mesh.n_triangles(), 0));
            for v in mesh.vertices() {
                out.push_str(&format!("{} {} {}\n", v.x, v.y, v.z));
            }
            for t in mesh.triangles() {
                out.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
            }
        }
        MeshFormat::Obj => {
            for v in mesh.vertices() {
                out.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
            }
            for t in mesh.triangles() {
                out.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
            }
        }
        MeshFormat::Ply => {
            out.push_str("ply\nformat ascii 1.0\n");
            out.push_str(&format!("element vertex {}\n", mesh.n_vertices()));
            out.push_str("property double x\nproperty double y\nproperty double z\n");
            out.push_str(&format!("element face {}\n", mesh.n_triangles()));
            out.push_str("property list uchar int vertex_indices\nend_header\n");
            for v in mesh.vertices() {
                out.push_str(&format!("{} {} {}\n", v.x, v.y, v.z));
            }
            for t in mesh.triangles() {
                out.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
            }
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

fn parse_f64(tok: &str, what: &str) -> Result<f64, MeshError> {
    tok.parse::<f64>().map_err(|_| MeshError::Parse(format!("bad {what}: {tok:?}")))
}

fn parse_usize(tok: &str, what: &str) -> Result<usize, MeshError> {
    tok.parse::<usize>().map_err(|_| MeshError::Parse(format!("bad {what}: {tok:?}")))
}

/// Lines with content, comments (# ...) stripped.
fn content_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().filter_map(|l| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some(l)
    })
}

fn parse_off(text: &str) -> Result<(Vec<Point3<f64>>, Vec<[usize; 3]>), MeshError> {
    let mut lines = content_lines(text);
    let header = lines.next().ok_or_else(|| MeshError::Parse("empty OFF file".into()))?;
    if header != "OFF" {
        return Err(MeshError::Parse(format!("expected OFF header, got {header:?}")));
    }
    let counts = lines.next().ok_or_else(|| MeshError::Parse("missing OFF counts".into()))?;
    let mut it = counts.split_whitespace();
    let nv = parse_usize(it.next().unwrap_or(""), "vertex count")?;
    let nf = parse_usize(it.next().unwrap_or(""), "face count")?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let line = lines.next().ok_or_else(|| MeshError::Parse("truncated vertex list".into()))?;
        let mut it = line.split_whitespace();
        let x = parse_f64(it.next().unwrap_or(""), "coordinate")?;
        let y = parse_f64(it.next().unwrap_or(""), "coordinate")?;
        let z = parse_f64(it.next().unwrap_or(""), "coordinate")?;
        vertices.push(Point3::new(x, y, z));
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let line = lines.next().ok_or_else(|| MeshError::Parse("truncated face list".into()))?;
        let mut it = line.split_whitespace();
        let n = parse_usize(it.next().unwrap_or(""), "face size")?;
        if n != 3 {
            return Err(MeshError::Parse(format!("only triangles supported, got {n}-gon")));
        }
        let a = parse_usize(it.next().unwrap_or(""), "face index")?;
        let b = parse_usize(it.next().unwrap_or(""), "face index")?;
        let c = parse_usize(it.next().unwrap_or(""), "face index")?;
        triangles.push([a, b, c]);
    }
    Ok((vertices, triangles))
}

fn parse_obj(text: &str) -> Result<(Vec<Point3<f64>>, Vec<[usize; 3]>), MeshError> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for line in content_lines(text) {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let x = parse_f64(it.next().unwrap_or(""), "coordinate")?;
                let y = parse_f64(it.next().unwrap_or(""), "coordinate")?;
                let z = parse_f64(it.next().unwrap_or(""), "coordinate")?;
                vertices.push(Point3::new(x, y, z));
            }
            Some("f") => {
                let idx = it
                    .map(|tok| {
                        let first = tok.split('/').next().unwrap_or("");
                        parse_usize(first, "face index")
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if idx.len() != 3 {
                    return Err(MeshError::Parse(format!(
                        "only triangles supported, got {}-gon",
                        idx.len()
                    )));
                }
                if idx.iter().any(|&i| i == 0) {
                    return Err(MeshError::Parse("OBJ indices are 1-based".into()));
                }
                triangles.push([idx[0] - 1, idx[1] - 1, idx[2] - 1]);
            }
            _ => {} // normals, texture coords, groups: ignored
        }
    }
    Ok((vertices, triangles))
}

fn parse_ply(text: &str) -> Result<(Vec<Point3<f64>>, Vec<[usize; 3]>), MeshError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(MeshError::Parse("missing ply magic".into()));
    }
    let mut nv = None;
    let mut nf = None;
    let mut current = None;
    // Property order of the vertex element; x, y, z must be present.
    let mut vertex_props: Vec<String> = Vec::new();
    for line in lines.by_ref() {
        let line = line.trim();
        let mut it = line.split_whitespace();
        match it.next() {
            Some("format") => {
                if it.next() != Some("ascii") {
                    return Err(MeshError::UnsupportedFormat("binary PLY".into()));
                }
            }
            Some("comment") => {}
            Some("element") => {
                let kind = it.next().unwrap_or("");
                let count = parse_usize(it.next().unwrap_or(""), "element count")?;
                current = Some(kind.to_string());
                match kind {
                    "vertex" => nv = Some(count),
                    "face" => nf = Some(count),
                    _ => {
                        return Err(MeshError::Parse(format!("unsupported PLY element {kind:?}")))
                    }
                }
            }
            Some("property") => {
                if current.as_deref() == Some("vertex") {
                    let name = line.split_whitespace().last().unwrap_or("").to_string();
                    vertex_props.push(name);
                }
            }
            Some("end_header") => break,
            other => {
                return Err(MeshError::Parse(format!("unexpected header line {other:?}")));
            }
        }
    }
    let nv = nv.ok_or_else(|| MeshError::Parse("PLY header missing vertex element".into()))?;
    let nf = nf.ok_or_else(|| MeshError::Parse("PLY header missing face element".into()))?;
    let coord_cols: Vec<usize> = ["x", "y", "z"]
        .iter()
        .map(|n| {
            vertex_props
                .iter()
                .position(|p| p == n)
                .ok_or_else(|| MeshError::Parse(format!("PLY vertex element missing {n}")))
        })
        .collect::<Result<_, _>>()?;

    let mut body = lines.filter(|l| !l.trim().is_empty());
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let line = body.next().ok_or_else(|| MeshError::Parse("truncated vertex list".into()))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let mut coords = [0.0; 3];
        for (k, &col) in coord_cols.iter().enumerate() {
            coords[k] = parse_f64(toks.get(col).copied().unwrap_or(""), "coordinate")?;
        }
        vertices.push(Point3::new(coords[0], coords[1], coords[2]));
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let line = body.next().ok_or_else(|| MeshError::Parse("truncated face list".into()))?;
        let mut it = line.split_whitespace();
        let n = parse_usize(it.next().unwrap_or(""), "face size")?;
        if n != 3 {
            return Err(MeshError::Parse(format!("only triangles supported, got {n}-gon")));
        }
        let a = parse_usize(it.next().unwrap_or(""), "face index")?;
        let b = parse_usize(it.next().unwrap_or(""), "face index")?;
        let c = parse_usize(it.next().unwrap_or(""), "face index")?;
        triangles.push([a, b, c]);
    }
    Ok((vertices, triangles))
}
