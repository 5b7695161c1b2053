//! ASCII mesh files and legacy VTK export.
//!
//! ```text
//! transreg-mesh 1
//! <dim> <vertices> <cells>
//! <x> <y> [<z>]          one line per vertex
//! <i> <j> <k> [<l>]      one line per cell
//! ```
//! Coordinates use the shortest decimal form that parses back to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::flowmap::{QualityReport, SimplicialMesh};

pub const MESH_HEADER: &str = "transreg-mesh 1";
pub const VTK_VERSION_LINE: &str = "# vtk DataFile Version 3.0";

pub fn mesh_to_string(mesh: &SimplicialMesh<f64>) -> String {
    let d = mesh.dim();
    let mut s = String::new();
    let _ = writeln!(s, "{MESH_HEADER}");
    let _ = writeln!(s, "{} {} {}", d, mesh.num_vertices(), mesh.num_cells());
    for p in mesh.vertices() {
        let line: Vec<String> = p[..d].iter().map(|x| format!("{x:?}")).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    for c in mesh.cells() {
        let line: Vec<String> = c.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s
}

pub fn parse_mesh(text: &str) -> Result<SimplicialMesh<f64>> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let bad = |m: String| Error::Format(m);
    if lines.next() != Some(MESH_HEADER) {
        return Err(bad(format!("mesh file must start with '{MESH_HEADER}'")));
    }
    let counts: Vec<usize> = lines
        .next()
        .ok_or_else(|| bad("missing counts line".into()))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad(format!("bad count '{t}'"))))
        .collect::<Result<_>>()?;
    if counts.len() != 3 {
        return Err(bad("counts line needs dim, vertices, cells".into()));
    }
    let (d, nv, nc) = (counts[0], counts[1], counts[2]);
    if d != 2 && d != 3 {
        return Err(bad(format!("mesh dimension must be 2 or 3, got {d}")));
    }
    let mut vertices = Vec::with_capacity(nv);
    for k in 0..nv {
        let line = lines
            .next()
            .ok_or_else(|| bad(format!("missing vertex {k}")))?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| bad(format!("bad coordinate '{t}' in vertex {k}")))
            })
            .collect::<Result<_>>()?;
        if vals.len() != d {
            return Err(bad(format!(
                "vertex {k} has {} coordinates, expected {d}",
                vals.len()
            )));
        }
        let mut p = [0.0; 3];
        p[..d].copy_from_slice(&vals);
        vertices.push(p);
    }
    let mut cells = Vec::with_capacity(nc);
    for k in 0..nc {
        let line = lines
            .next()
            .ok_or_else(|| bad(format!("missing cell {k}")))?;
        let idx: Vec<usize> = line
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| bad(format!("bad index '{t}' in cell {k}")))
            })
            .collect::<Result<_>>()?;
        cells.push(idx);
    }
    if lines.next().is_some() {
        return Err(bad("trailing data after the last cell".into()));
    }
    SimplicialMesh::new(d, vertices, cells).map_err(|e| bad(e.to_string()))
}

pub fn write_mesh(path: &Path, mesh: &SimplicialMesh<f64>) -> Result<()> {
    fs::write(path, mesh_to_string(mesh))?;
    Ok(())
}

pub fn read_mesh(path: &Path) -> Result<SimplicialMesh<f64>> {
    parse_mesh(&fs::read_to_string(path)?)
}

/// Legacy ASCII VTK unstructured grid, with the radius ratio as cell data when
/// a quality report is given.
pub fn mesh_to_vtk(mesh: &SimplicialMesh<f64>, quality: Option<&QualityReport<f64>>) -> String {
    let d = mesh.dim();
    let mut s = String::new();
    let _ = writeln!(s, "{VTK_VERSION_LINE}");
    let _ = writeln!(s, "transreg mesh");
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.num_vertices());
    for p in mesh.vertices() {
        let _ = writeln!(
            s,
            "{:?} {:?} {:?}",
            p[0],
            p[1],
            if d == 3 { p[2] } else { 0.0 }
        );
    }
    let _ = writeln!(
        s,
        "CELLS {} {}",
        mesh.num_cells(),
        mesh.num_cells() * (d + 2)
    );
    for c in mesh.cells() {
        let idx: Vec<String> = c.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{} {}", d + 1, idx.join(" "));
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.num_cells());
    let ty = if d == 2 { 5 } else { 10 };
    for _ in 0..mesh.num_cells() {
        let _ = writeln!(s, "{ty}");
    }
    if let Some(q) = quality {
        let _ = writeln!(s, "CELL_DATA {}", mesh.num_cells());
        let _ = writeln!(s, "SCALARS radius_ratio double 1");
        let _ = writeln!(s, "LOOKUP_TABLE default");
        for r in &q.radius_ratios {
            let _ = writeln!(s, "{r:?}");
        }
    }
    s
}

pub fn write_vtk(
    path: &Path,
    mesh: &SimplicialMesh<f64>,
    quality: Option<&QualityReport<f64>>,
) -> Result<()> {
    fs::write(path, mesh_to_vtk(mesh, quality))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowmap::{ball_mesh, mesh_quality};

    #[test]
    fn ascii_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        for dim in [2usize, 3] {
            let center = vec![1.0 / 3.0; dim];
            let m = ball_mesh(dim, &center, 0.1 + 1e-17, 2).unwrap();
            let p = dir.path().join("m.mesh");
            write_mesh(&p, &m).unwrap();
            assert_eq!(read_mesh(&p).unwrap(), m);
        }
    }

    #[test]
    fn malformed_meshes_are_rejected() {
        assert!(parse_mesh("mesh 1\n2 0 0\n").is_err());
        assert!(parse_mesh("transreg-mesh 1\n2 1 1\n0 0\n0 0 5\n").is_err());
        assert!(parse_mesh("transreg-mesh 1\n2 1 0\n0 x\n").is_err());
        assert!(parse_mesh("transreg-mesh 1\n2 3 1\n0 0\n1 0\n0 1\n0 1 2\n").is_ok());
    }

    #[test]
    fn vtk_layout() {
        let m = ball_mesh(2, &[0.0, 0.0], 1.0, 1).unwrap();
        let q = mesh_quality(&m);
        let text = mesh_to_vtk(&m, Some(&q));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], VTK_VERSION_LINE);
        assert_eq!(lines[4], format!("POINTS {} double", m.num_vertices()));
        assert!(text.contains(&format!("CELLS {} {}", m.num_cells(), 4 * m.num_cells())));
        assert!(text.contains("SCALARS radius_ratio double 1"));
    }
}
