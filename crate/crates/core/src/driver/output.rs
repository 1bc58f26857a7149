//! Run artifacts: `run.csv`, `state.gflow` and a legacy VTK file.
//!
//! ```text
//! GFLOW-STATE v1
//! <GFLOW-MESH v1 block>
//! values
//! <one value per mesh vertex, zero on the boundary>
//! eigenvalue <e>
//! energy <E>
//! ```

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use super::RunRecord;
use crate::error::{Error, Result};
use crate::mesh::{fmt_real, LineReader, Mesh};

pub const STATE_HEADER: &str = "GFLOW-STATE v1";
pub const CSV_HEADER: &str = "N,dofs,gfi_steps,energy,eigenvalue,estimator,inc,deltaE,wall_ms";

/// A converged state as stored on disk.
#[derive(Clone, Debug)]
pub struct SavedState {
    pub mesh: Mesh,
    /// Value at every mesh vertex.
    pub values: Vec<f64>,
    pub eigenvalue: f64,
    pub energy: f64,
}

impl SavedState {
    pub fn write(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "{STATE_HEADER}")?;
        self.mesh.write_ascii(w)?;
        writeln!(w, "values")?;
        for v in &self.values {
            writeln!(w, "{}", fmt_real(*v))?;
        }
        writeln!(w, "eigenvalue {}", fmt_real(self.eigenvalue))?;
        writeln!(w, "energy {}", fmt_real(self.energy))
    }

    pub fn read<R: BufRead>(reader: &mut LineReader<R>) -> Result<SavedState> {
        reader.expect_line(STATE_HEADER)?;
        let mesh = Mesh::read_ascii(reader)?;
        reader.expect_line("values")?;
        let mut values = Vec::with_capacity(mesh.n_vertices());
        for _ in 0..mesh.n_vertices() {
            let v: f64 = reader.parse_line()?;
            if !v.is_finite() {
                return Err(reader.error("values must be finite"));
            }
            values.push(v);
        }
        let mut tagged = |tag: &str| -> Result<f64> {
            let [k, v] = reader.fields::<2>()?;
            if k != tag {
                return Err(reader.error(format!("expected `{tag}`, found `{k}`")));
            }
            reader.parse_field(&v)
        };
        let eigenvalue = tagged("eigenvalue")?;
        let energy = tagged("energy")?;
        Ok(SavedState {
            mesh,
            values,
            eigenvalue,
            energy,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, |w| self.write(w))
    }

    pub fn load(path: &Path) -> Result<SavedState> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = LineReader::new(std::io::BufReader::new(file), path);
        SavedState::read(&mut reader)
    }
}

type FileWriter = std::io::BufWriter<std::fs::File>;

pub(crate) fn write_file(path: &Path, f: impl FnOnce(&mut FileWriter) -> std::io::Result<()>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn write_csv(records: &[RunRecord], w: &mut dyn Write) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.loop_index,
            r.n_dofs,
            r.gfi_steps,
            fmt_real(r.energy),
            fmt_real(r.eigenvalue),
            fmt_real(r.estimator),
            fmt_real(r.inc),
            fmt_real(r.delta_e),
            r.wall_ms
        )?;
    }
    Ok(())
}

/// Legacy ASCII VTK unstructured grid with the point field `psi`.
pub fn write_vtk(mesh: &Mesh, values: &[f64], w: &mut dyn Write) -> std::io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "gflow solution")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.n_vertices())?;
    for p in mesh.vertices() {
        writeln!(w, "{} {} 0", fmt_real(p.x), fmt_real(p.y))?;
    }
    let nt = mesh.n_triangles();
    writeln!(w, "CELLS {} {}", nt, 4 * nt)?;
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(w, "5")?;
    }
    writeln!(w, "POINT_DATA {}", mesh.n_vertices())?;
    writeln!(w, "SCALARS psi double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in values {
        writeln!(w, "{}", fmt_real(*v))?;
    }
    Ok(())
}

/// Writes `run.csv`, `state.gflow` and `mesh_and_solution.vtk` into `dir`,
/// returning the state file path.
pub fn emit_outputs(records: &[RunRecord], state: &SavedState, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join("run.csv"), |w| write_csv(records, w))?;
    let state_path = dir.join("state.gflow");
    state.save(&state_path)?;
    write_file(&dir.join("mesh_and_solution.vtk"), |w| {
        write_vtk(&state.mesh, &state.values, w)
    })?;
    Ok(state_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_initial, refine_twice, DomainId};

    fn sample_state() -> SavedState {
        let m = generate_initial(DomainId::LShape, 2).unwrap();
        let (m, _) = refine_twice(&m, &[1, 4]).unwrap();
        let values = m
            .vertices()
            .iter()
            .zip(m.boundary_vertex())
            .map(|(p, &b)| if b { 0.0 } else { (p.x * 1.3).sin() / 3.0 + p.y.exp() })
            .collect();
        SavedState {
            mesh: m,
            values,
            eigenvalue: 1.0 / 3.0,
            energy: std::f64::consts::PI * 1e-7,
        }
    }

    #[test]
    fn state_round_trip_is_exact() {
        let s = sample_state();
        let mut a = Vec::new();
        s.write(&mut a).unwrap();
        let back = SavedState::read(&mut LineReader::new(a.as_slice(), "mem")).unwrap();
        assert_eq!(back.values, s.values);
        assert_eq!(back.eigenvalue, s.eigenvalue);
        assert_eq!(back.energy, s.energy);
        let mut b = Vec::new();
        back.write(&mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn truncated_state_is_an_error() {
        let s = sample_state();
        let mut a = Vec::new();
        s.write(&mut a).unwrap();
        let text = String::from_utf8(a).unwrap();
        let cut: String = text.lines().take(text.lines().count() - 1).collect::<Vec<_>>().join("\n");
        assert!(matches!(
            SavedState::read(&mut LineReader::new(cut.as_bytes(), "mem")),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn csv_header_only_when_empty() {
        let mut out = Vec::new();
        write_csv(&[], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn vtk_counts() {
        let s = sample_state();
        let mut out = Vec::new();
        write_vtk(&s.mesh, &s.values, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains(&format!("POINTS {} double", s.mesh.n_vertices())));
        assert!(text.contains(&format!("CELLS {} {}", s.mesh.n_triangles(), 4 * s.mesh.n_triangles())));
        assert!(text.contains(&format!("POINT_DATA {}", s.mesh.n_vertices())));
        assert!(text.contains("SCALARS psi double 1"));
    }

    #[test]
    fn emit_writes_three_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = emit_outputs(&[], &sample_state(), dir.path()).unwrap();
        assert!(path.exists());
        assert!(dir.path().join("run.csv").exists());
        assert!(dir.path().join("mesh_and_solution.vtk").exists());
    }
}
