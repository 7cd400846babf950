//! Plain-text mesh files.
//!
//! ```text
//! # comment lines and blank lines are ignored
//! dim n_vertices n_simplices
//! x y            (one line per vertex)
//! 1 2 3          (one line per simplex, 1-based vertex indices)
//! boundary       (optional; followed by 1-based boundary vertex indices)
//! 4 5 6
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::SimplicialMesh;
use crate::error::{Error, Result};

pub fn load_mesh(path: impl AsRef<Path>) -> Result<SimplicialMesh> {
    let path = path.as_ref();
    let file = File::open(path)?;
    read_mesh(BufReader::new(file), path)
}

pub fn save_mesh(mesh: &SimplicialMesh, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_mesh(mesh, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Writes the mesh with an explicit boundary section. Coordinates use the
/// shortest representation that parses back to the same value.
pub fn write_mesh<W: Write>(mesh: &SimplicialMesh, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{} {} {}", mesh.dim(), mesh.n_vertices(), mesh.n_simplices())?;
    for v in 0..mesh.n_vertices() {
        let line: Vec<String> = mesh.vertex(v).iter().map(|x| format!("{x:?}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    for s in mesh.simplices() {
        let line: Vec<String> = s.iter().map(|v| (v + 1).to_string()).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    writeln!(out, "boundary")?;
    for v in mesh.n_interior()..mesh.n_vertices() {
        writeln!(out, "{}", v + 1)?;
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    number: usize,
    path: PathBuf,
}

impl<R: BufRead> Lines<R> {
    /// Next line that is neither blank nor a comment.
    fn next_content(&mut self) -> Result<Option<(usize, String)>> {
        for line in self.inner.by_ref() {
            self.number += 1;
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Ok(Some((self.number, t.to_string())));
        }
        Ok(None)
    }

    fn require(&mut self, what: &str) -> Result<(usize, String)> {
        match self.next_content()? {
            Some(l) => Ok(l),
            None => Err(self.error(self.number, format!("unexpected end of file, expected {what}"))),
        }
    }

    fn error(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }
}

fn parse_fields<T: std::str::FromStr>(text: &str, count: usize) -> std::result::Result<Vec<T>, String> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != count {
        return Err(format!("expected {count} fields, found {}", fields.len()));
    }
    fields
        .iter()
        .map(|f| f.parse::<T>().map_err(|_| format!("cannot parse `{f}`")))
        .collect()
}

/// Parses a mesh; `source` only labels error messages.
pub fn read_mesh<R: BufRead>(reader: R, source: impl AsRef<Path>) -> Result<SimplicialMesh> {
    let mut lines = Lines {
        inner: reader.lines(),
        number: 0,
        path: source.as_ref().to_path_buf(),
    };
    let (ln, header) = lines.require("header `dim n_vertices n_simplices`")?;
    let h: Vec<usize> = parse_fields(&header, 3).map_err(|m| lines.error(ln, m))?;
    let (dim, nv, ns) = (h[0], h[1], h[2]);
    if !(1..=3).contains(&dim) {
        return Err(lines.error(ln, format!("dimension must be 1, 2 or 3, got {dim}")));
    }

    let mut coords = Vec::with_capacity(nv * dim);
    for _ in 0..nv {
        let (ln, text) = lines.require("vertex coordinates")?;
        let x: Vec<f64> = parse_fields(&text, dim).map_err(|m| lines.error(ln, m))?;
        coords.extend(x);
    }
    let mut simplices = Vec::with_capacity(ns * (dim + 1));
    for _ in 0..ns {
        let (ln, text) = lines.require("simplex vertex indices")?;
        let s: Vec<usize> = parse_fields(&text, dim + 1).map_err(|m| lines.error(ln, m))?;
        for v in s {
            if v == 0 || v > nv {
                return Err(lines.error(ln, format!("vertex index {v} outside 1..={nv}")));
            }
            simplices.push(v - 1);
        }
    }

    let boundary = match lines.next_content()? {
        None => None,
        Some((_, text)) if text == "boundary" => {
            let mut list = Vec::new();
            while let Some((ln, text)) = lines.next_content()? {
                for f in text.split_whitespace() {
                    let v: usize = f
                        .parse()
                        .map_err(|_| lines.error(ln, format!("cannot parse `{f}`")))?;
                    if v == 0 || v > nv {
                        return Err(lines.error(ln, format!("vertex index {v} outside 1..={nv}")));
                    }
                    list.push(v - 1);
                }
            }
            Some(list)
        }
        Some((ln, text)) => {
            return Err(lines.error(ln, format!("unexpected content `{text}` after the simplices")))
        }
    };
    SimplicialMesh::new(dim, coords, simplices, boundary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_ball_mesh;

    fn parse(text: &str) -> Result<SimplicialMesh> {
        read_mesh(text.as_bytes(), "inline")
    }

    #[test]
    fn two_triangle_square() {
        let m = parse("# unit square\n2 4 2\n0 0\n1 0\n1 1\n0 1\n\n1 2 3\n1 3 4\n").unwrap();
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_interior(), 0);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse("2 3 1\n0 0\n1 zero\n0 1\n1 2 3\n").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("zero"));
            }
            other => panic!("unexpected {other}"),
        }
        let err = parse("2 3 1\n0 0\n1 0\n0 1\n1 2 7\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 5, .. }));
        let err = parse("2 3 2\n0 0\n1 0\n0 1\n1 2 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn repeated_vertex_is_degenerate() {
        let err = parse("2 3 1\n0 0\n1 0\n0 1\n1 2 2\n").unwrap_err();
        assert!(matches!(err, Error::DegenerateSimplex { index: 0, .. }));
    }

    #[test]
    fn round_trip_is_exact() {
        for (dim, h) in [(2, 0.3), (3, 0.5)] {
            let m = generate_ball_mesh(dim, h).unwrap();
            let mut buf = Vec::new();
            write_mesh(&m, &mut buf).unwrap();
            let back = read_mesh(buf.as_slice(), "buffer").unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn file_round_trip() {
        let m = generate_ball_mesh(2, 0.4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("disk.mesh");
        save_mesh(&m, &path).unwrap();
        assert_eq!(load_mesh(&path).unwrap(), m);
    }
}
