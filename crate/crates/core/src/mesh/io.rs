//! Plain-text mesh format.
//!
//! ```text
//! mesh 2d v1
//! nodes N
//! x y            (N lines)
//! triangles M
//! i j k [marker] (M lines)
//! boundary B
//! i j TAG        (B lines, TAG in EPI | ENDO_LV | ENDO_RV)
//! ```
//!
//! Indices are zero-based. Coordinates are written with the shortest
//! representation that round-trips exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{BoundaryEdge, BoundaryRegion, Mesh};
use crate::error::{Error, Result};

const HEADER: &str = "mesh 2d v1";

pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{HEADER}");
    let _ = writeln!(s, "nodes {}", mesh.num_nodes());
    for p in mesh.nodes() {
        let _ = writeln!(s, "{} {}", p[0], p[1]);
    }
    let _ = writeln!(s, "triangles {}", mesh.num_triangles());
    let markers = mesh.element_markers();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        match markers {
            Some(m) => {
                let _ = writeln!(s, "{} {} {} {}", tri[0], tri[1], tri[2], m[t]);
            }
            None => {
                let _ = writeln!(s, "{} {} {}", tri[0], tri[1], tri[2]);
            }
        }
    }
    let _ = writeln!(s, "boundary {}", mesh.boundary_edges().len());
    for e in mesh.boundary_edges() {
        let _ = writeln!(s, "{} {} {}", e.nodes[0], e.nodes[1], e.region);
    }
    s
}

pub fn save_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_atomic(path.as_ref(), write_mesh(mesh).as_bytes())
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_mesh(&text, path)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    path: PathBuf,
    last: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            msg: msg.into(),
        }
    }

    /// Next non-blank line with its 1-based number.
    fn next(&mut self) -> Result<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            let t = l.trim();
            if !t.is_empty() {
                return Ok((i + 1, t));
            }
        }
        Err(self.err(self.last + 1, "unexpected end of file"))
    }

    fn section(&mut self, name: &str) -> Result<usize> {
        let (no, l) = self.next()?;
        let mut it = l.split_whitespace();
        if it.next() != Some(name) {
            return Err(self.err(no, format!("expected '{name} <count>'")));
        }
        let count = it
            .next()
            .and_then(|c| c.parse::<usize>().ok())
            .ok_or_else(|| self.err(no, format!("bad count in '{name}' section")))?;
        if it.next().is_some() {
            return Err(self.err(no, "trailing tokens"));
        }
        Ok(count)
    }
}

fn parse_tok<T: std::str::FromStr>(lines: &Lines<'_>, no: usize, tok: Option<&str>, what: &str) -> Result<T> {
    tok.and_then(|t| t.parse::<T>().ok())
        .ok_or_else(|| lines.err(no, format!("expected {what}")))
}

/// Parses the text format; `path` is only used in error messages.
pub fn read_mesh(text: &str, path: impl AsRef<Path>) -> Result<Mesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        path: path.as_ref().to_path_buf(),
        last: 0,
    };
    let (no, header) = lines.next()?;
    if header.split_whitespace().collect::<Vec<_>>().join(" ") != HEADER {
        return Err(lines.err(no, format!("expected header '{HEADER}'")));
    }

    let n = lines.section("nodes")?;
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let (no, l) = lines.next()?;
        let mut it = l.split_whitespace();
        let x: f64 = parse_tok(&lines, no, it.next(), "x coordinate")?;
        let y: f64 = parse_tok(&lines, no, it.next(), "y coordinate")?;
        if it.next().is_some() {
            return Err(lines.err(no, "trailing tokens"));
        }
        nodes.push([x, y]);
    }

    let m = lines.section("triangles")?;
    let mut triangles = Vec::with_capacity(m);
    let mut markers: Vec<i32> = Vec::new();
    for k in 0..m {
        let (no, l) = lines.next()?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 3 && toks.len() != 4 {
            return Err(lines.err(no, "expected 'i j k' or 'i j k marker'"));
        }
        let tri = [
            parse_tok(&lines, no, Some(toks[0]), "node index")?,
            parse_tok(&lines, no, Some(toks[1]), "node index")?,
            parse_tok(&lines, no, Some(toks[2]), "node index")?,
        ];
        if toks.len() == 4 {
            if markers.len() != k {
                return Err(lines.err(no, "element markers must be given for all triangles or none"));
            }
            markers.push(parse_tok(&lines, no, Some(toks[3]), "integer marker")?);
        } else if !markers.is_empty() {
            return Err(lines.err(no, "element markers must be given for all triangles or none"));
        }
        triangles.push(tri);
    }

    let b = lines.section("boundary")?;
    let mut boundary = Vec::with_capacity(b);
    for _ in 0..b {
        let (no, l) = lines.next()?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(lines.err(no, "expected 'i j TAG'"));
        }
        let i: usize = parse_tok(&lines, no, Some(toks[0]), "node index")?;
        let j: usize = parse_tok(&lines, no, Some(toks[1]), "node index")?;
        let region: BoundaryRegion = toks[2]
            .parse()
            .map_err(|_| lines.err(no, format!("unknown boundary tag '{}'", toks[2])))?;
        boundary.push(BoundaryEdge { nodes: [i, j], region });
    }
    let markers = if markers.is_empty() { None } else { Some(markers) };
    Mesh::new(nodes, triangles, boundary, markers)
}
