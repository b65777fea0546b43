use std::io::{self, Write};

use faer::sparse::SparseColMat;

use super::solve::StokesSolution;
use super::space::TaylorHoodSpace;

/// VTK cell type of the 10-node tetrahedron; its edge order matches ours.
const VTK_QUADRATIC_TETRA: u32 = 24;

/// Legacy ASCII VTK unstructured grid with P2 velocity and pressure at the nodes.
/// Edge-node pressure is the mean of the two endpoint values.
pub fn write_vtk<W: Write>(space: &TaylorHoodSpace, solution: &StokesSolution, out: &mut W) -> io::Result<()> {
    let n_nodes = space.n_nodes();
    let n_tets = space.mesh.tets.len();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "cell flow solution")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {n_nodes} double")?;
    for k in 0..n_nodes {
        let [x, y, z] = space.node_position(k);
        writeln!(out, "{x:.17e} {y:.17e} {z:.17e}")?;
    }
    writeln!(out, "CELLS {n_tets} {}", 11 * n_tets)?;
    for nodes in &space.tet_nodes {
        write!(out, "10")?;
        for n in nodes {
            write!(out, " {n}")?;
        }
        writeln!(out)?;
    }
    writeln!(out, "CELL_TYPES {n_tets}")?;
    for _ in 0..n_tets {
        writeln!(out, "{VTK_QUADRATIC_TETRA}")?;
    }
    writeln!(out, "POINT_DATA {n_nodes}")?;
    writeln!(out, "VECTORS velocity double")?;
    for u in space.nodal_velocity(&solution.velocity) {
        writeln!(out, "{:.17e} {:.17e} {:.17e}", u[0], u[1], u[2])?;
    }
    let p = space.nodal_pressure(&solution.pressure);
    writeln!(out, "SCALARS pressure double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for v in &p {
        writeln!(out, "{v:.17e}")?;
    }
    for [a, b] in &space.edges {
        writeln!(out, "{:.17e}", 0.5 * (p[*a as usize] + p[*b as usize]))?;
    }
    Ok(())
}

/// Matrix Market coordinate dump (1-based, general storage).
pub fn write_matrix_market<W: Write>(matrix: &SparseColMat<usize, f64>, out: &mut W) -> io::Result<()> {
    let m = matrix.as_ref();
    let (cp, ri, val) = (m.col_ptr(), m.row_idx(), m.val());
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", m.nrows(), m.ncols(), val.len())?;
    for j in 0..m.ncols() {
        for k in cp[j]..cp[j + 1] {
            writeln!(out, "{} {} {:.17e}", ri[k] + 1, j + 1, val[k])?;
        }
    }
    Ok(())
}

/// Matrix Market dense column vector.
pub fn write_vector_market<W: Write>(v: &[f64], out: &mut W) -> io::Result<()> {
    writeln!(out, "%%MatrixMarket matrix array real general")?;
    writeln!(out, "{} 1", v.len())?;
    for x in v {
        writeln!(out, "{x:.17e}")?;
    }
    Ok(())
}
