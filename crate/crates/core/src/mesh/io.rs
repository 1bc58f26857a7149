//! `GFLOW-MESH v1` text format:
//!
//! ```text
//! GFLOW-MESH v1
//! <vertex count>
//! <triangle count>
//! x y boundary_flag      (one per vertex, 17 significant digits)
//! v0 v1 v2               (one per triangle)
//! ```

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use super::{longest_edge, Mesh, Point2};
use crate::error::{Error, Result};

pub const MESH_HEADER: &str = "GFLOW-MESH v1";

/// Formats a real with 17 significant digits, enough to round-trip an `f64`.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Line-oriented reader that reports parse failures with their location.
pub struct LineReader<R> {
    inner: R,
    path: PathBuf,
    line: usize,
    buf: String,
}

impl<R: BufRead> LineReader<R> {
    pub fn new(inner: R, path: impl Into<PathBuf>) -> Self {
        LineReader {
            inner,
            path: path.into(),
            line: 0,
            buf: String::new(),
        }
    }

    pub fn error(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: self.line,
            msg: msg.into(),
        }
    }

    pub fn next_line(&mut self) -> Result<&str> {
        self.buf.clear();
        let n = self
            .inner
            .read_line(&mut self.buf)
            .map_err(|e| Error::io(&self.path, e))?;
        self.line += 1;
        if n == 0 {
            return Err(self.error("unexpected end of file"));
        }
        Ok(self.buf.trim_end_matches(['\n', '\r']))
    }

    pub fn expect_line(&mut self, expected: &str) -> Result<()> {
        let line = self.next_line()?;
        if line != expected {
            let msg = format!("expected `{expected}`, found `{line}`");
            return Err(self.error(msg));
        }
        Ok(())
    }

    pub fn parse_line<T: std::str::FromStr>(&mut self) -> Result<T> {
        let line = self.next_line()?.trim().to_string();
        line.parse()
            .map_err(|_| self.error(format!("cannot parse `{line}`")))
    }

    /// Splits the next line into exactly `N` whitespace-separated fields.
    pub fn fields<const N: usize>(&mut self) -> Result<[String; N]> {
        let line = self.next_line()?.to_string();
        let parts: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        parts
            .try_into()
            .map_err(|_| self.error(format!("expected {N} fields in `{line}`")))
    }

    pub fn parse_field<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse()
            .map_err(|_| self.error(format!("cannot parse `{s}`")))
    }
}

impl Mesh {
    pub fn write_ascii(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "{MESH_HEADER}")?;
        writeln!(w, "{}", self.n_vertices())?;
        writeln!(w, "{}", self.n_triangles())?;
        for (p, &b) in self.vertices.iter().zip(&self.boundary_vertex) {
            writeln!(w, "{} {} {}", fmt_real(p.x), fmt_real(p.y), u8::from(b))?;
        }
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    /// Reads a mesh block. Neighbors are rebuilt and refinement edges reset
    /// to the longest edge of each triangle.
    pub fn read_ascii<R: BufRead>(reader: &mut LineReader<R>) -> Result<Mesh> {
        reader.expect_line(MESH_HEADER)?;
        let nv: usize = reader.parse_line()?;
        let nt: usize = reader.parse_line()?;
        let mut vertices = Vec::with_capacity(nv);
        let mut boundary = Vec::with_capacity(nv);
        for _ in 0..nv {
            let [x, y, b] = reader.fields::<3>()?;
            let p = Point2::new(reader.parse_field(&x)?, reader.parse_field(&y)?);
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(reader.error("vertex coordinates must be finite"));
            }
            vertices.push(p);
            boundary.push(match b.as_str() {
                "0" => false,
                "1" => true,
                other => return Err(reader.error(format!("bad boundary flag `{other}`"))),
            });
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let f = reader.fields::<3>()?;
            let t = [
                reader.parse_field(&f[0])?,
                reader.parse_field(&f[1])?,
                reader.parse_field(&f[2])?,
            ];
            triangles.push(t);
        }
        let refinement_edge = triangles
            .iter()
            .map(|t: &[usize; 3]| {
                if t.iter().all(|&v| v < nv) {
                    longest_edge(&t.map(|v| vertices[v]))
                } else {
                    0
                }
            })
            .collect();
        Mesh::assemble(vertices, triangles, Some(boundary), refinement_edge, vec![0; nt])
            .map_err(|e| reader.error(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_ascii(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Mesh> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = LineReader::new(std::io::BufReader::new(file), path);
        Mesh::read_ascii(&mut reader)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_initial, refine_twice, DomainId};

    #[test]
    fn text_round_trip_is_exact() {
        let m = generate_initial(DomainId::Square0To2Pi, 3).unwrap();
        let (m, _) = refine_twice(&m, &[0, 5, 9]).unwrap();
        let mut first = Vec::new();
        m.write_ascii(&mut first).unwrap();
        let mut reader = LineReader::new(first.as_slice(), "mem");
        let back = Mesh::read_ascii(&mut reader).unwrap();
        let mut second = Vec::new();
        back.write_ascii(&mut second).unwrap();
        assert_eq!(first, second);
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.neighbors(), m.neighbors());
        assert_eq!(back.boundary_vertex(), m.boundary_vertex());
    }

    #[test]
    fn header_and_counts() {
        let m = generate_initial(DomainId::UnitSquare, 1).unwrap();
        let mut out = Vec::new();
        m.write_ascii(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(&lines[..3], &["GFLOW-MESH v1", "4", "2"]);
        assert_eq!(lines[3], "0.0000000000000000e0 0.0000000000000000e0 1");
        assert_eq!(lines.len(), 3 + 4 + 2);
    }

    #[test]
    fn malformed_input_reports_line() {
        let text = "GFLOW-MESH v1\n3\n1\n0 0 1\n1 0 1\n0 x 1\n0 1 2\n";
        let mut reader = LineReader::new(text.as_bytes(), "bad.mesh");
        match Mesh::read_ascii(&mut reader) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
