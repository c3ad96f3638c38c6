//! File helpers: atomic writes and legacy ASCII VTK output.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Nodal or element data attached to a VTK file.
pub enum VtkData<'a> {
    Scalar(&'a str, &'a [f64]),
    Vector(&'a str, &'a [[f64; 2]]),
}

/// Legacy ASCII unstructured grid. `title` must be a single line.
pub fn write_vtk(mesh: &Mesh, title: &str, point_data: &[VtkData<'_>], cell_data: &[VtkData<'_>]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{}", title.replace('\n', " "));
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.num_nodes());
    for p in mesh.nodes() {
        let _ = writeln!(s, "{} {} 0", p[0], p[1]);
    }
    let nt = mesh.num_triangles();
    let _ = writeln!(s, "CELLS {} {}", nt, 4 * nt);
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        let _ = writeln!(s, "5");
    }
    let section = |s: &mut String, header: &str, n: usize, data: &[VtkData<'_>]| {
        if data.is_empty() {
            return;
        }
        let _ = writeln!(s, "{header} {n}");
        for d in data {
            match d {
                VtkData::Scalar(name, v) => {
                    let _ = writeln!(s, "SCALARS {name} double 1");
                    let _ = writeln!(s, "LOOKUP_TABLE default");
                    for x in v.iter() {
                        let _ = writeln!(s, "{x}");
                    }
                }
                VtkData::Vector(name, v) => {
                    let _ = writeln!(s, "VECTORS {name} double");
                    for x in v.iter() {
                        let _ = writeln!(s, "{} {} 0", x[0], x[1]);
                    }
                }
            }
        }
    };
    section(&mut s, "POINT_DATA", mesh.num_nodes(), point_data);
    section(&mut s, "CELL_DATA", nt, cell_data);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square;

    #[test]
    fn vtk_layout() {
        let m = unit_square();
        let u = [0.0, 1.0, 2.0, 3.0];
        let text = write_vtk(&m, "test", &[VtkData::Scalar("u", &u)], &[]);
        assert!(text.starts_with("# vtk DataFile Version 3.0\ntest\nASCII\n"));
        assert!(text.contains("CELLS 2 8\n"));
        assert!(text.contains("POINT_DATA 4\nSCALARS u double 1\nLOOKUP_TABLE default\n0\n1\n2\n3\n"));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
