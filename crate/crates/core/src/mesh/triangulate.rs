use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use super::polygon::Polygon2D;
use crate::error::MeshError;

/// Minimum triangle angle enforced by Delaunay refinement, in degrees.
const ANGLE_LIMIT_DEG: f64 = 15.0;
/// Lattice points closer than this multiple of `h` to the inclusion are dropped.
const OBSTACLE_GAP: f64 = 1.0;
/// Lattice points closer than this multiple of the side spacing to `∂Z'` are dropped.
const SIDE_GAP: f64 = 0.45;

/// Triangulation of the cross-section `Z' \ T'`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh2D {
    pub vertices: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[u32; 3]>,
}

impl Mesh2D {
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i as usize]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut min = 180.0f64;
        for tri in &self.triangles {
            let p = tri.map(|i| self.vertices[i as usize]);
            for k in 0..3 {
                let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
                let u = [b[0] - a[0], b[1] - a[1]];
                let w = [c[0] - a[0], c[1] - a[1]];
                let cos = (u[0] * w[0] + u[1] * w[1]) / (u[0].hypot(u[1]) * w[0].hypot(w[1]));
                min = min.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        min
    }

    /// Two-triangle mesh of the full square, split along the `(-,-)`–`(+,+)` diagonal.
    pub fn unit_square() -> Self {
        Self {
            vertices: vec![[-0.5, -0.5], [0.5, -0.5], [-0.5, 0.5], [0.5, 0.5]],
            triangles: vec![[0, 1, 3], [0, 3, 2]],
        }
    }
}

/// Shared 1D distribution on each side of `Z'`: `n` equal segments.
fn side_points(n: usize) -> Vec<f64> {
    (0..=n).map(|k| -0.5 + k as f64 / n as f64).collect()
}

/// Constrained Delaunay triangulation of `Z' \ polygon` with target edge length `h`.
///
/// All four sides of the square share the same point distribution, so opposite
/// sides match exactly under translation. Interior points come from a
/// triangular lattice of spacing `h`; refinement only inserts points away from
/// the constrained edges.
pub fn triangulate_cross_section(polygon: Option<&Polygon2D>, h: f64) -> Result<Mesh2D, MeshError> {
    if !(h.is_finite() && h > 0.0 && h <= 1.0) {
        return Err(MeshError::InvalidResolution(format!("h must lie in (0, 1], got {h}")));
    }
    if let Some(poly) = polygon {
        if !poly.is_simple() {
            return Err(MeshError::MeshFailure("inclusion polygon is not simple".into()));
        }
        if poly.max_abs_coordinate() >= 0.5 {
            return Err(MeshError::MeshFailure("inclusion polygon leaves the cell".into()));
        }
        if poly.signed_area() <= 0.0 {
            return Err(MeshError::MeshFailure("inclusion polygon is not counter-clockwise".into()));
        }
    }

    let n = ((1.0 / h).round() as usize).max(1);
    let s = side_points(n);
    let mut points: Vec<[f64; 2]> = Vec::new();
    // Square boundary, counter-clockwise from (-1/2, -1/2).
    for &x in &s[..n] {
        points.push([x, -0.5]);
    }
    for &y in &s[..n] {
        points.push([0.5, y]);
    }
    for &x in s[1..].iter().rev() {
        points.push([x, 0.5]);
    }
    for &y in s[1..].iter().rev() {
        points.push([-0.5, y]);
    }
    let n_square = points.len();
    let mut edges: Vec<[usize; 2]> = (0..n_square).map(|i| [i, (i + 1) % n_square]).collect();

    if let Some(poly) = polygon {
        let base = points.len();
        points.extend_from_slice(&poly.vertices);
        let m = poly.len();
        edges.extend((0..m).map(|i| [base + i, base + (i + 1) % m]));
    }

    let dx = 1.0 / n as f64;
    let ny = ((1.0 / (h * 3f64.sqrt() / 2.0)).round() as usize).max(1);
    let dy = 1.0 / ny as f64;
    for j in 1..ny {
        let y = -0.5 + j as f64 * dy;
        let shift = if j % 2 == 1 { 0.5 } else { 0.0 };
        for i in 0..=n {
            let x = -0.5 + (i as f64 + shift) * dx;
            if (0.5 - x.abs()).min(0.5 - y.abs()) < SIDE_GAP * dx {
                continue;
            }
            if let Some(poly) = polygon {
                if poly.contains([x, y]) || poly.boundary_distance([x, y]) < OBSTACLE_GAP * h {
                    continue;
                }
            }
            points.push([x, y]);
        }
    }

    let vertices: Vec<Point2<f64>> = points.iter().map(|p| Point2::new(p[0], p[1])).collect();
    let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::bulk_load_cdt(vertices, edges)
        .map_err(|e| MeshError::MeshFailure(format!("constrained triangulation failed: {e:?}")))?;
    let result = cdt.refine(
        RefinementParameters::<f64>::new()
            .keep_constraint_edges()
            .exclude_outer_faces(true)
            .with_angle_limit(AngleLimit::from_deg(ANGLE_LIMIT_DEG)),
    );
    if !result.refinement_complete {
        return Err(MeshError::MeshFailure("Delaunay refinement did not complete".into()));
    }

    let raw: Vec<[f64; 2]> = cdt
        .vertices()
        .map(|v| {
            let p = v.position();
            [p.x, p.y]
        })
        .collect();
    let mut triangles = Vec::new();
    for face in cdt.inner_faces() {
        if result.excluded_faces.contains(&face.fix()) {
            continue;
        }
        let ids = face.vertices().map(|v| v.fix().index() as u32);
        if let Some(poly) = polygon {
            let c = ids.iter().fold([0.0, 0.0], |acc, &i| {
                let p = raw[i as usize];
                [acc[0] + p[0] / 3.0, acc[1] + p[1] / 3.0]
            });
            if poly.contains(c) {
                continue;
            }
        }
        triangles.push(ids);
    }

    let mesh = renumber(Mesh2D {
        vertices: raw,
        triangles,
    });
    for t in 0..mesh.triangles.len() {
        let area = mesh.triangle_area(t);
        if !(area > 1e-14) {
            return Err(MeshError::MeshFailure(format!("triangle {t} has area {area:e}")));
        }
    }
    Ok(mesh)
}

/// Sorts vertices by `(y, x)` and drops unused ones.
///
/// The extrusion splits prisms by global vertex order; with this ordering the
/// order along every side of the square is the same on opposite sides, so the
/// lateral diagonals of paired faces coincide.
fn renumber(mesh: Mesh2D) -> Mesh2D {
    let mut used = vec![false; mesh.vertices.len()];
    for t in &mesh.triangles {
        for &i in t {
            used[i as usize] = true;
        }
    }
    let mut order: Vec<usize> = (0..mesh.vertices.len()).filter(|&i| used[i]).collect();
    order.sort_by(|&a, &b| {
        let (p, q) = (mesh.vertices[a], mesh.vertices[b]);
        p[1].total_cmp(&q[1]).then(p[0].total_cmp(&q[0]))
    });
    let mut new_id = vec![u32::MAX; mesh.vertices.len()];
    for (k, &old) in order.iter().enumerate() {
        new_id[old] = k as u32;
    }
    Mesh2D {
        vertices: order.iter().map(|&i| mesh.vertices[i]).collect(),
        triangles: mesh
            .triangles
            .iter()
            .map(|t| t.map(|i| new_id[i as usize]))
            .collect(),
    }
}
