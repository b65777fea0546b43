use std::io::{self, Write};

use super::{FacetTag, Mesh3D};

/// Physical group of the tetrahedra in exported meshes.
pub const FLUID_PHYSICAL_ID: u32 = 10;

/// Writes the mesh as ASCII Gmsh MSH 2.2 with physical groups for every tag.
pub fn write_msh<W: Write>(mesh: &Mesh3D, mut out: W) -> io::Result<()> {
    writeln!(out, "$MeshFormat\n2.2 0 8\n$EndMeshFormat")?;
    writeln!(out, "$PhysicalNames")?;
    writeln!(out, "{}", FacetTag::BOUNDARY.len() + 1)?;
    for tag in FacetTag::BOUNDARY {
        writeln!(out, "2 {} \"{}\"", tag.physical_id(), tag.name())?;
    }
    writeln!(out, "3 {FLUID_PHYSICAL_ID} \"FLUID\"")?;
    writeln!(out, "$EndPhysicalNames")?;

    writeln!(out, "$Nodes\n{}", mesh.vertices.len())?;
    for (i, p) in mesh.vertices.iter().enumerate() {
        writeln!(out, "{} {:.17e} {:.17e} {:.17e}", i + 1, p[0], p[1], p[2])?;
    }
    writeln!(out, "$EndNodes")?;

    writeln!(out, "$Elements\n{}", mesh.boundary_facets.len() + mesh.tets.len())?;
    let mut id = 1;
    for f in &mesh.boundary_facets {
        let g = f.tag.physical_id();
        let [a, b, c] = f.vertices;
        writeln!(out, "{id} 2 2 {g} {g} {} {} {}", a + 1, b + 1, c + 1)?;
        id += 1;
    }
    for t in &mesh.tets {
        let [a, b, c, d] = *t;
        writeln!(
            out,
            "{id} 4 2 {FLUID_PHYSICAL_ID} {FLUID_PHYSICAL_ID} {} {} {} {}",
            a + 1,
            b + 1,
            c + 1,
            d + 1
        )?;
        id += 1;
    }
    writeln!(out, "$EndElements")?;
    Ok(())
}
