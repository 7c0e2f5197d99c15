//! Legacy-format ASCII VTK export of a mesh with named nodal fields.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::Mesh;
use crate::error::{Error, Result};

const VTK_QUAD: u8 = 9;

/// Write `mesh` and `fields` (name, nodal values) as an unstructured grid.
pub fn write_vtk(path: &Path, mesh: &Mesh, title: &str, fields: &[(&str, &[f64])]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_vtk_to(&mut w, mesh, title, fields)?;
    w.flush()?;
    Ok(())
}

pub fn write_vtk_to<W: Write>(w: &mut W, mesh: &Mesh, title: &str, fields: &[(&str, &[f64])]) -> Result<()> {
    for (name, values) in fields {
        if values.len() != mesh.num_nodes() {
            return Err(Error::FieldLength { expected: mesh.num_nodes(), got: values.len() });
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::Mesh(format!("invalid VTK field name `{name}`")));
        }
    }
    // The title line must be a single line of at most 256 characters.
    let title: String = title.replace(['\n', '\r'], " ").chars().take(255).collect();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.num_nodes())?;
    for x in mesh.nodes() {
        writeln!(w, "{:.16e} {:.16e} 0", x[0], x[1])?;
    }
    let ne = mesh.num_elements();
    writeln!(w, "CELLS {} {}", ne, 5 * ne)?;
    for c in mesh.elements() {
        writeln!(w, "4 {} {} {} {}", c[0], c[1], c[2], c[3])?;
    }
    writeln!(w, "CELL_TYPES {ne}")?;
    for _ in 0..ne {
        writeln!(w, "{VTK_QUAD}")?;
    }
    if !fields.is_empty() {
        writeln!(w, "POINT_DATA {}", mesh.num_nodes())?;
        for (name, values) in fields {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in *values {
                writeln!(w, "{v:.16e}")?;
            }
        }
    }
    Ok(())
}
