use std::collections::HashMap;

use super::triangulate::Mesh2D;
use super::{Facet, FacetTag, Mesh3D};
use crate::error::MeshError;

const SNAP_TOL: f64 = 1e-12;

/// Extrudes a cross-section into `n_layers` prism layers over `z ∈ [0, 1]` and
/// splits each prism into three tetrahedra.
///
/// The split of a prism over the triangle with sorted vertex ids `a < b < c`
/// uses the diagonal from the lower-numbered bottom vertex to the
/// higher-numbered top vertex on each quadrilateral face, so neighbouring
/// prisms agree on their shared faces.
pub fn extrude_to_tets(mesh2d: &Mesh2D, n_layers: usize) -> Result<Mesh3D, MeshError> {
    if n_layers == 0 {
        return Err(MeshError::InvalidResolution("n_layers must be positive".into()));
    }
    let n2 = mesh2d.vertices.len();
    let mut vertices = Vec::with_capacity((n_layers + 1) * n2);
    for k in 0..=n_layers {
        let z = k as f64 / n_layers as f64;
        vertices.extend(mesh2d.vertices.iter().map(|p| [p[0], p[1], z]));
    }

    let mut tets = Vec::with_capacity(3 * n_layers * mesh2d.triangles.len());
    for k in 0..n_layers {
        let lo = (k * n2) as u32;
        let hi = ((k + 1) * n2) as u32;
        for tri in &mesh2d.triangles {
            let mut s = *tri;
            s.sort_unstable();
            let [a, b, c] = s;
            for t in [
                [a + lo, b + lo, c + lo, c + hi],
                [a + lo, b + lo, b + hi, c + hi],
                [a + lo, a + hi, b + hi, c + hi],
            ] {
                tets.push(t);
            }
        }
    }
    for (i, t) in tets.iter_mut().enumerate() {
        let v = signed_volume(&vertices, t);
        if v < 0.0 {
            t.swap(1, 2);
        }
        if v.abs() <= 1e-15 {
            return Err(MeshError::OrientationFailure { tet: i, volume: v });
        }
    }

    let boundary_facets = tag_boundary(&vertices, &tets)?;
    let periodic_x = pair_sides(&mut vertices, 0)?;
    let periodic_y = pair_sides(&mut vertices, 1)?;
    Ok(Mesh3D::from_parts(vertices, tets, boundary_facets, periodic_x, periodic_y))
}

pub(crate) fn signed_volume(vertices: &[[f64; 3]], t: &[u32; 4]) -> f64 {
    let [p0, p1, p2, p3] = t.map(|i| vertices[i as usize]);
    let a = [p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]];
    let b = [p2[0] - p0[0], p2[1] - p0[1], p2[2] - p0[2]];
    let c = [p3[0] - p0[0], p3[1] - p0[1], p3[2] - p0[2]];
    (a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])) / 6.0
}

fn tag_boundary(vertices: &[[f64; 3]], tets: &[[u32; 4]]) -> Result<Vec<Facet>, MeshError> {
    let mut count: HashMap<[u32; 3], u32> = HashMap::with_capacity(2 * tets.len());
    for t in tets {
        for skip in 0..4 {
            let mut f = [0u32; 3];
            let mut j = 0;
            for (i, &v) in t.iter().enumerate() {
                if i != skip {
                    f[j] = v;
                    j += 1;
                }
            }
            f.sort_unstable();
            *count.entry(f).or_insert(0) += 1;
        }
    }
    let mut facets: Vec<Facet> = count
        .into_iter()
        .filter(|&(_, c)| c == 1)
        .map(|(f, _)| Facet {
            vertices: f,
            tag: classify(vertices, &f),
        })
        .collect();
    facets.sort_unstable_by_key(|f| f.vertices);
    Ok(facets)
}

fn classify(vertices: &[[f64; 3]], f: &[u32; 3]) -> FacetTag {
    let p = f.map(|i| vertices[i as usize]);
    let all = |axis: usize, value: f64| p.iter().all(|q| q[axis] == value);
    if all(2, 0.0) {
        FacetTag::Bottom
    } else if all(2, 1.0) {
        FacetTag::Top
    } else if all(0, -0.5) {
        FacetTag::XLo
    } else if all(0, 0.5) {
        FacetTag::XHi
    } else if all(1, -0.5) {
        FacetTag::YLo
    } else if all(1, 0.5) {
        FacetTag::YHi
    } else {
        FacetTag::Obstacle
    }
}

fn key(a: f64, b: f64) -> (i64, i64) {
    ((a / SNAP_TOL).round() as i64, (b / SNAP_TOL).round() as i64)
}

/// Pairs vertices on `axis = -1/2` with those on `axis = +1/2` and snaps the
/// image coordinates so that the pair differs by exactly the unit vector.
fn pair_sides(vertices: &mut [[f64; 3]], axis: usize) -> Result<Vec<(u32, u32)>, MeshError> {
    let other = 1 - axis;
    let near = |x: f64, v: f64| (x - v).abs() <= SNAP_TOL;
    let mut hi: HashMap<(i64, i64), u32> = HashMap::new();
    for (i, p) in vertices.iter().enumerate() {
        if near(p[axis], 0.5) && hi.insert(key(p[other], p[2]), i as u32).is_some() {
            return Err(MeshError::Pairing(format!("duplicate vertex on side {axis}+ at {p:?}")));
        }
    }
    let mut pairs = Vec::with_capacity(hi.len());
    for (i, p) in vertices.iter().enumerate() {
        if near(p[axis], -0.5) {
            match hi.remove(&key(p[other], p[2])) {
                Some(j) => pairs.push((i as u32, j)),
                None => {
                    return Err(MeshError::Pairing(format!(
                        "vertex {i} at {p:?} has no periodic image along axis {axis}"
                    )))
                }
            }
        }
    }
    if let Some((_, j)) = hi.into_iter().min_by_key(|&(_, j)| j) {
        return Err(MeshError::Pairing(format!(
            "vertex {j} at {:?} has no periodic preimage along axis {axis}",
            vertices[j as usize]
        )));
    }
    for &(i, j) in &pairs {
        let mut q = vertices[i as usize];
        q[axis] = -0.5;
        vertices[i as usize] = q;
        q[axis] = 0.5;
        vertices[j as usize] = q;
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_two_triangles_one_layer() {
        let m = extrude_to_tets(&Mesh2D::unit_square(), 1).unwrap();
        assert_eq!(m.tets.len(), 6);
        assert_eq!(m.vertices.len(), 8);
        assert!((m.volume() - 1.0).abs() < 1e-12);
        for t in 0..m.tets.len() {
            assert!(m.tet_volume(t) > 0.0);
        }
        assert_eq!(m.periodic_x.len(), 4);
        assert_eq!(m.periodic_y.len(), 4);
    }

    #[test]
    fn mismatched_sides_rejected() {
        let mesh2d = Mesh2D {
            vertices: vec![[-0.5, -0.5], [0.5, -0.5], [0.5, 0.1], [-0.5, 0.5], [0.5, 0.5]],
            triangles: vec![[0, 1, 2], [0, 2, 3], [2, 4, 3]],
        };
        assert!(matches!(extrude_to_tets(&mesh2d, 2), Err(MeshError::Pairing(_))));
    }

    #[test]
    fn degenerate_prism_rejected() {
        let mesh2d = Mesh2D {
            vertices: vec![[0.0, 0.0], [0.1, 0.0], [0.2, 0.0]],
            triangles: vec![[0, 1, 2]],
        };
        assert!(matches!(
            extrude_to_tets(&mesh2d, 1),
            Err(MeshError::OrientationFailure { .. })
        ));
    }
}
