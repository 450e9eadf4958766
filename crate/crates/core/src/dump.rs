//! Field snapshots: legacy VTK `STRUCTURED_POINTS` and flat CSV.

use std::io::{self, Write};

use crate::fields::{ScalarField, SimState};
use crate::geometry::Grid;

/// Value written for lattice cells outside the domain.
pub const INACTIVE_SENTINEL: f64 = -1e30;

/// Writes the state's fields as cell data on the full lattice.
pub fn write_vtk<W: Write>(state: &SimState, out: &mut W) -> io::Result<()> {
    let mut named: Vec<(&str, &ScalarField)> = vec![("u", &state.u), ("v", &state.v)];
    if let Some(w) = &state.w {
        named.push(("w", w));
    }
    write_vtk_fields(state.grid(), &named, &format!("chemotaxis t={:.14e} step={}", state.t, state.step), out)
}

pub fn write_vtk_fields<W: Write>(
    grid: &Grid,
    fields: &[(&str, &ScalarField)],
    title: &str,
    out: &mut W,
) -> io::Result<()> {
    let mut cells = [1usize; 3];
    let mut origin = [0.0; 3];
    let mut spacing = [1.0; 3];
    for axis in 0..grid.dim() {
        cells[axis] = grid.cells_per_axis()[axis];
        origin[axis] = grid.lower()[axis];
        spacing[axis] = grid.spacing()[axis];
    }
    // A flat third axis has one point layer so the cell count stays nx*ny.
    let points: Vec<usize> = (0..3)
        .map(|a| if a < grid.dim() { cells[a] + 1 } else { 1 })
        .collect();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{}", title.replace('\n', " "))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET STRUCTURED_POINTS")?;
    writeln!(out, "DIMENSIONS {} {} {}", points[0], points[1], points[2])?;
    writeln!(out, "ORIGIN {:.14e} {:.14e} {:.14e}", origin[0], origin[1], origin[2])?;
    writeln!(out, "SPACING {:.14e} {:.14e} {:.14e}", spacing[0], spacing[1], spacing[2])?;
    writeln!(out, "CELL_DATA {}", grid.num_lattice_cells())?;
    for (name, field) in fields {
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        let values = field.values();
        for lin in 0..grid.num_lattice_cells() {
            let x = grid.active_of_lattice(lin).map_or(INACTIVE_SENTINEL, |c| values[c]);
            writeln!(out, "{x:.14e}")?;
        }
    }
    Ok(())
}

/// One row per active cell: `cell, x, y[, z], <name>`.
pub fn write_field_csv<W: Write>(field: &ScalarField, name: &str, out: &mut W) -> io::Result<()> {
    let grid = field.grid();
    let axes = ["x", "y", "z"];
    writeln!(out, "cell,{},{name}", axes[..grid.dim()].join(","))?;
    for (c, value) in field.values().iter().enumerate() {
        let x = grid.center(c);
        write!(out, "{c}")?;
        for coord in &x[..grid.dim()] {
            write!(out, ",{coord:.14e}")?;
        }
        writeln!(out, ",{value:.14e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, DomainSpec};
    use std::sync::Arc;

    #[test]
    fn vtk_layout_with_mask() {
        let g = Arc::new(build_grid(&DomainSpec::disk([0.0, 0.0], 1.0), &[4, 4]).unwrap());
        let n = g.num_active();
        let f = ScalarField::from_values(Arc::clone(&g), (0..n).map(|i| i as f64).collect()).unwrap();
        let s = SimState::new(f.clone(), f, None).unwrap();
        let mut buf = Vec::new();
        write_vtk(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert_eq!(lines[4], "DIMENSIONS 5 5 1");
        assert_eq!(lines[7], "CELL_DATA 16");
        assert_eq!(lines[8], "SCALARS u double 1");
        let u: Vec<f64> = lines[10..26].iter().map(|l| l.parse().unwrap()).collect();
        // Corner cells of the 4x4 lattice lie outside the unit disk.
        assert_eq!(u[0], INACTIVE_SENTINEL);
        assert_eq!(u[3], INACTIVE_SENTINEL);
        assert_eq!(u.iter().filter(|&&x| x != INACTIVE_SENTINEL).count(), n);
        assert_eq!(lines.iter().filter(|l| l.starts_with("SCALARS")).count(), 2);
    }

    #[test]
    fn csv_rows() {
        let g = Arc::new(build_grid(&DomainSpec::boxed(&[0.0; 3], &[1.0; 3]), &[2, 2, 2]).unwrap());
        let f = ScalarField::constant(Arc::clone(&g), 0.5);
        let mut buf = Vec::new();
        write_field_csv(&f, "u", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("cell,x,y,z,u"));
        let first: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(first, vec![0.0, 0.25, 0.25, 0.25, 0.5]);
        assert_eq!(text.lines().count(), 9);
    }
}
