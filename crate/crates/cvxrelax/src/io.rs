//! Plain-text import and export: meshes, nodal fields, sphere samples,
//! constraint rows, and polytopes as OFF or OBJ.

use crate::bodies::Polytope;
use crate::constraints::ConstraintBlock;
use crate::error::{Error, Result};
use crate::mesh::SimplicialMesh;
use crate::sphere::SphereMesh;
use std::io::{BufRead, Write};

fn parse_err(msg: &str) -> Error {
    Error::InvalidInput(format!("parse error: {msg}"))
}

/// One value per line, full precision.
pub fn write_field(mut w: impl Write, values: &[f64]) -> Result<()> {
    for v in values {
        writeln!(w, "{v:.17e}")?;
    }
    Ok(())
}

/// Reads a field written by [`write_field`]; blank lines and `#` comments are skipped.
pub fn read_field(r: impl BufRead) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        out.push(t.parse().map_err(|_| parse_err(t))?);
    }
    Ok(out)
}

/// Mesh format: a header `dim nv ns`, then `nv` coordinate lines, then `ns`
/// simplex lines of `dim + 1` vertex indices.
pub fn write_mesh(mut w: impl Write, mesh: &SimplicialMesh) -> Result<()> {
    writeln!(w, "{} {} {}", mesh.dim(), mesh.num_vertices(), mesh.num_simplices())?;
    for i in 0..mesh.num_vertices() {
        let line: Vec<String> = mesh.vertex(i).iter().map(|c| format!("{c:.17e}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    for s in 0..mesh.num_simplices() {
        let line: Vec<String> = mesh.simplex(s).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_mesh(r: impl BufRead) -> Result<SimplicialMesh> {
    let mut tokens = Vec::new();
    for line in r.lines() {
        let line = line?;
        tokens.extend(line.split_whitespace().map(str::to_string));
    }
    let mut it = tokens.into_iter();
    let mut next = |what: &str| it.next().ok_or_else(|| parse_err(what));
    let dim: usize = next("dim")?.parse().map_err(|_| parse_err("dim"))?;
    let nv: usize = next("nv")?.parse().map_err(|_| parse_err("nv"))?;
    let ns: usize = next("ns")?.parse().map_err(|_| parse_err("ns"))?;
    let mut coords = Vec::with_capacity(nv * dim);
    for _ in 0..nv * dim {
        coords.push(next("coordinate")?.parse().map_err(|_| parse_err("coordinate"))?);
    }
    let mut simplices = Vec::with_capacity(ns * (dim + 1));
    for _ in 0..ns * (dim + 1) {
        simplices.push(next("index")?.parse().map_err(|_| parse_err("index"))?);
    }
    SimplicialMesh::new(dim, coords, simplices)
}

/// `x,y,z,value` rows for sphere directions.
pub fn write_sphere_csv(mut w: impl Write, sphere: &SphereMesh, values: &[f64]) -> Result<()> {
    writeln!(w, "x,y,z,value")?;
    for (i, d) in sphere.directions().iter().enumerate() {
        writeln!(w, "{:.17e},{:.17e},{:.17e},{:.17e}", d[0], d[1], d[2], values[i])?;
    }
    Ok(())
}

/// `block,cone,row,col,weight,offset` triplets of every constraint row.
pub fn write_block_triplets(mut w: impl Write, blocks: &[ConstraintBlock]) -> Result<()> {
    writeln!(w, "block,cone,row,col,weight,offset")?;
    for (b, blk) in blocks.iter().enumerate() {
        for (r, row) in blk.rows.iter().enumerate() {
            for (c, v) in row.iter() {
                writeln!(w, "{b},{},{r},{c},{v:.17e},{:.17e}", blk.cone.tag(), row.offset)?;
            }
        }
    }
    Ok(())
}

pub fn write_off(mut w: impl Write, p: &Polytope) -> Result<()> {
    writeln!(w, "OFF")?;
    writeln!(w, "{} {} 0", p.vertices.len(), p.faces.len())?;
    for v in &p.vertices {
        writeln!(w, "{:.17e} {:.17e} {:.17e}", v[0], v[1], v[2])?;
    }
    for f in &p.faces {
        let idx: Vec<String> = f.iter().map(|i| i.to_string()).collect();
        writeln!(w, "{} {}", f.len(), idx.join(" "))?;
    }
    Ok(())
}

pub fn write_obj(mut w: impl Write, p: &Polytope) -> Result<()> {
    for v in &p.vertices {
        writeln!(w, "v {:.17e} {:.17e} {:.17e}", v[0], v[1], v[2])?;
    }
    for f in &p.faces {
        let idx: Vec<String> = f.iter().map(|i| (i + 1).to_string()).collect();
        writeln!(w, "f {}", idx.join(" "))?;
    }
    Ok(())
}

/// Reads an OFF file (faces kept as given).
pub fn read_off(r: impl BufRead) -> Result<Polytope> {
    let mut tokens = Vec::new();
    for line in r.lines() {
        let line = line?;
        let t = line.split('#').next().unwrap_or("");
        tokens.extend(t.split_whitespace().map(str::to_string));
    }
    let mut it = tokens.into_iter();
    if it.next().as_deref() != Some("OFF") {
        return Err(parse_err("missing OFF header"));
    }
    let mut num = |what: &str| -> Result<f64> {
        it.next().ok_or_else(|| parse_err(what))?.parse::<f64>().map_err(|_| parse_err(what))
    };
    let nv = num("vertex count")? as usize;
    let nf = num("face count")? as usize;
    num("edge count")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        vertices.push([num("x")?, num("y")?, num("z")?]);
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let k = num("face size")? as usize;
        let f = (0..k).map(|_| num("face index").map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        if f.iter().any(|&i| i >= nv) {
            return Err(parse_err("face index out of range"));
        }
        faces.push(f);
    }
    Ok(Polytope { dim: 3, vertices, faces })
}
