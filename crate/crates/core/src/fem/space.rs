use std::collections::HashMap;

use super::quadrature::{P2Reference, LOCAL_EDGES, NQ};
use crate::error::FemError;
use crate::mesh::{FacetTag, Mesh3D};

/// Marker for a node without an unknown (wall node).
pub const PINNED: u32 = u32::MAX;

/// Dof counts before and after constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct DofCounts {
    /// Vertices plus edges.
    pub raw_velocity_nodes: usize,
    /// Raw nodes that are periodic images of another node.
    pub slave_velocity_nodes: usize,
    /// Master nodes pinned by the wall condition.
    pub dirichlet_nodes: usize,
    /// `3 × free nodes`.
    pub velocity: usize,
    pub raw_pressure_nodes: usize,
    pub slave_pressure_nodes: usize,
    pub pressure: usize,
}

/// Element geometry: barycentric gradients and volume.
#[derive(Debug, Clone, Copy)]
pub struct TetGeometry {
    pub grad: [[f64; 3]; 4],
    pub volume: f64,
}

/// Taylor–Hood P2/P1 space on a periodic cell with wall conditions.
///
/// Velocity unknowns are interleaved (`3 × free node + component`), followed
/// by the pressure unknowns and one multiplier for the pressure mean.
pub struct TaylorHoodSpace {
    pub mesh: Mesh3D,
    /// Sorted vertex pairs; edge `e` is P2 node `n_vertices + e`.
    pub edges: Vec<[u32; 2]>,
    /// Local P2 nodes of every tet: four vertices then the six edges in [`LOCAL_EDGES`] order.
    pub tet_nodes: Vec<[u32; 10]>,
    /// Raw P2 node to its periodic master.
    pub node_master: Vec<u32>,
    /// Raw P2 node to its free-node index, or [`PINNED`].
    pub node_free: Vec<u32>,
    /// Vertex to its pressure unknown.
    pub pressure_index: Vec<u32>,
    pub geometry: Vec<TetGeometry>,
    pub reference: P2Reference,
    pub counts: DofCounts,
    pub(crate) pattern: KktPattern,
}

/// Compressed-column sparsity of the full KKT matrix.
pub(crate) struct KktPattern {
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
}

impl TaylorHoodSpace {
    pub fn n_vertices(&self) -> usize {
        self.mesh.vertices.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.vertices.len() + self.edges.len()
    }

    pub fn n_velocity(&self) -> usize {
        self.counts.velocity
    }

    pub fn n_pressure(&self) -> usize {
        self.counts.pressure
    }

    /// Size of the KKT system: velocity, pressure and one multiplier.
    pub fn n_total(&self) -> usize {
        self.counts.velocity + self.counts.pressure + 1
    }

    pub fn n_quadrature_points(&self) -> usize {
        self.mesh.tets.len() * NQ
    }

    /// Coordinates of a raw P2 node.
    pub fn node_position(&self, node: usize) -> [f64; 3] {
        let nv = self.n_vertices();
        if node < nv {
            self.mesh.vertices[node]
        } else {
            let [a, b] = self.edges[node - nv].map(|v| self.mesh.vertices[v as usize]);
            [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])]
        }
    }

    /// Physical coordinates of quadrature point `q` of tet `t`.
    pub fn quadrature_point(&self, t: usize, q: usize) -> [f64; 3] {
        let l = self.reference.rule.points[q];
        let mut x = [0.0; 3];
        for (k, &v) in self.mesh.tets[t].iter().enumerate() {
            let p = self.mesh.vertices[v as usize];
            for d in 0..3 {
                x[d] += l[k] * p[d];
            }
        }
        x
    }

    /// Per-raw-node velocity from free unknowns (pinned nodes are zero).
    pub fn nodal_velocity(&self, velocity: &[f64]) -> Vec<[f64; 3]> {
        self.node_free
            .iter()
            .map(|&f| {
                if f == PINNED {
                    [0.0; 3]
                } else {
                    let i = 3 * f as usize;
                    [velocity[i], velocity[i + 1], velocity[i + 2]]
                }
            })
            .collect()
    }

    /// Per-vertex pressure from pressure unknowns.
    pub fn nodal_pressure(&self, pressure: &[f64]) -> Vec<f64> {
        self.pressure_index.iter().map(|&i| pressure[i as usize]).collect()
    }

    /// Interpolates a vector field at every raw node and returns free unknowns.
    ///
    /// Values at pinned nodes are dropped, values at periodic images come from the master.
    pub fn interpolate_velocity(&self, field: impl Fn([f64; 3]) -> [f64; 3]) -> Vec<f64> {
        let mut u = vec![0.0; self.n_velocity()];
        for node in 0..self.n_nodes() {
            if self.node_master[node] as usize != node {
                continue;
            }
            let f = self.node_free[node];
            if f == PINNED {
                continue;
            }
            let v = field(self.node_position(node));
            u[3 * f as usize..3 * f as usize + 3].copy_from_slice(&v);
        }
        u
    }

    /// Constant field at every quadrature point.
    pub fn constant_field(&self, value: f64) -> Vec<f64> {
        vec![value; self.n_quadrature_points()]
    }
}

fn find_master(start: u32, maps: &[&HashMap<u32, u32>]) -> u32 {
    let mut m = start;
    'outer: loop {
        for map in maps {
            if let Some(&lo) = map.get(&m) {
                m = lo;
                continue 'outer;
            }
        }
        return m;
    }
}

/// Builds the Taylor–Hood space on `mesh`.
pub fn build_space(mesh: Mesh3D) -> Result<TaylorHoodSpace, FemError> {
    let nv = mesh.vertices.len();

    let mut edge_id: HashMap<[u32; 2], u32> = HashMap::with_capacity(7 * nv);
    let mut edges: Vec<[u32; 2]> = Vec::new();
    let mut tet_nodes = Vec::with_capacity(mesh.tets.len());
    for t in &mesh.tets {
        let mut nodes = [0u32; 10];
        nodes[..4].copy_from_slice(t);
        for (e, [i, j]) in LOCAL_EDGES.iter().copied().enumerate() {
            let key = if t[i] < t[j] { [t[i], t[j]] } else { [t[j], t[i]] };
            let id = *edge_id.entry(key).or_insert_with(|| {
                edges.push(key);
                (edges.len() - 1) as u32
            });
            nodes[4 + e] = nv as u32 + id;
        }
        tet_nodes.push(nodes);
    }
    let n_nodes = nv + edges.len();

    // Vertex identification: images on the upper sides map to the lower sides.
    let x_map: HashMap<u32, u32> = mesh.periodic_x.iter().map(|&(lo, hi)| (hi, lo)).collect();
    let y_map: HashMap<u32, u32> = mesh.periodic_y.iter().map(|&(lo, hi)| (hi, lo)).collect();
    let on_side = |v: u32, axis: usize, value: f64| mesh.vertices[v as usize][axis] == value;
    for v in 0..nv as u32 {
        if on_side(v, 0, 0.5) && !x_map.contains_key(&v) {
            return Err(FemError::PairingIncomplete(format!("vertex {v} on X_HI has no partner")));
        }
        if on_side(v, 1, 0.5) && !y_map.contains_key(&v) {
            return Err(FemError::PairingIncomplete(format!("vertex {v} on Y_HI has no partner")));
        }
    }
    let mut node_master: Vec<u32> = (0..nv as u32).map(|v| find_master(v, &[&x_map, &y_map])).collect();

    // Edges move as a whole: only an edge lying in an upper side is shifted.
    for (e, &[a, b]) in edges.iter().enumerate() {
        let (mut a, mut b) = (a, b);
        loop {
            if on_side(a, 0, 0.5) && on_side(b, 0, 0.5) {
                (a, b) = (x_map[&a], x_map[&b]);
            } else if on_side(a, 1, 0.5) && on_side(b, 1, 0.5) {
                (a, b) = (y_map[&a], y_map[&b]);
            } else {
                break;
            }
        }
        let key = if a < b { [a, b] } else { [b, a] };
        let master = match edge_id.get(&key) {
            Some(&id) => nv as u32 + id,
            None => {
                return Err(FemError::PairingIncomplete(format!(
                    "edge {:?} has no periodic image",
                    edges[e]
                )))
            }
        };
        node_master.push(master);
    }

    let mut pinned = vec![false; n_nodes];
    for f in &mesh.boundary_facets {
        if !f.tag.is_wall() {
            continue;
        }
        let [a, b, c] = f.vertices;
        for v in [a, b, c] {
            pinned[v as usize] = true;
        }
        for [p, q] in [[a, b], [b, c], [a, c]] {
            let key = if p < q { [p, q] } else { [q, p] };
            pinned[nv + edge_id[&key] as usize] = true;
        }
    }
    for n in 0..n_nodes {
        if pinned[n] {
            pinned[node_master[n] as usize] = true;
        }
    }

    let mut node_free = vec![PINNED; n_nodes];
    let mut n_free = 0u32;
    let mut dirichlet_nodes = 0;
    let mut slave_velocity_nodes = 0;
    for n in 0..n_nodes {
        if node_master[n] as usize != n {
            slave_velocity_nodes += 1;
        } else if pinned[n] {
            dirichlet_nodes += 1;
        } else {
            node_free[n] = n_free;
            n_free += 1;
        }
    }
    for n in 0..n_nodes {
        node_free[n] = node_free[node_master[n] as usize];
    }

    let mut pressure_index = vec![u32::MAX; nv];
    let mut n_p = 0u32;
    for v in 0..nv {
        if node_master[v] as usize == v {
            pressure_index[v] = n_p;
            n_p += 1;
        }
    }
    for v in 0..nv {
        pressure_index[v] = pressure_index[node_master[v] as usize];
    }

    let geometry = mesh.tets.iter().map(|t| tet_geometry(&mesh.vertices, t)).collect();

    let counts = DofCounts {
        raw_velocity_nodes: n_nodes,
        slave_velocity_nodes,
        dirichlet_nodes,
        velocity: 3 * n_free as usize,
        raw_pressure_nodes: nv,
        slave_pressure_nodes: nv - n_p as usize,
        pressure: n_p as usize,
    };
    let pattern = build_pattern(&tet_nodes, &node_free, &pressure_index, &mesh.tets, counts);

    Ok(TaylorHoodSpace {
        mesh,
        edges,
        tet_nodes,
        node_master,
        node_free,
        pressure_index,
        geometry,
        reference: P2Reference::new(),
        counts,
        pattern,
    })
}

fn tet_geometry(vertices: &[[f64; 3]], t: &[u32; 4]) -> TetGeometry {
    let [p0, p1, p2, p3] = t.map(|i| vertices[i as usize]);
    let c = |p: [f64; 3]| [p[0] - p0[0], p[1] - p0[1], p[2] - p0[2]];
    let (a, b, d) = (c(p1), c(p2), c(p3));
    // Rows of J⁻¹ with J = [a b d] are the cross products divided by det J.
    let cross = |u: [f64; 3], v: [f64; 3]| [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    let bd = cross(b, d);
    let det = a[0] * bd[0] + a[1] * bd[1] + a[2] * bd[2];
    let g1 = bd.map(|x| x / det);
    let g2 = cross(d, a).map(|x| x / det);
    let g3 = cross(a, b).map(|x| x / det);
    let g0 = [-(g1[0] + g2[0] + g3[0]), -(g1[1] + g2[1] + g3[1]), -(g1[2] + g2[2] + g3[2])];
    TetGeometry {
        grad: [g0, g1, g2, g3],
        volume: det / 6.0,
    }
}

fn build_pattern(
    tet_nodes: &[[u32; 10]],
    node_free: &[u32],
    pressure_index: &[u32],
    tets: &[[u32; 4]],
    counts: DofCounts,
) -> KktPattern {
    let nf = counts.velocity / 3;
    let np = counts.pressure;
    let nu = counts.velocity;
    let mut vv: Vec<Vec<u32>> = vec![Vec::new(); nf];
    let mut vp: Vec<Vec<u32>> = vec![Vec::new(); nf];
    let mut pv: Vec<Vec<u32>> = vec![Vec::new(); np];
    for (nodes, t) in tet_nodes.iter().zip(tets) {
        let free: Vec<u32> = nodes
            .iter()
            .map(|&n| node_free[n as usize])
            .filter(|&f| f != PINNED)
            .collect();
        let ps = t.map(|v| pressure_index[v as usize]);
        for &i in &free {
            vv[i as usize].extend_from_slice(&free);
            vp[i as usize].extend_from_slice(&ps);
        }
        for &p in &ps {
            pv[p as usize].extend_from_slice(&free);
        }
    }
    for list in vv.iter_mut().chain(vp.iter_mut()).chain(pv.iter_mut()) {
        list.sort_unstable();
        list.dedup();
    }

    let mut col_ptr = Vec::with_capacity(nu + np + 2);
    let mut row_idx = Vec::new();
    col_ptr.push(0);
    for node in 0..nf {
        for _c in 0..3 {
            for &j in &vv[node] {
                row_idx.extend_from_slice(&[3 * j as usize, 3 * j as usize + 1, 3 * j as usize + 2]);
            }
            row_idx.extend(vp[node].iter().map(|&p| nu + p as usize));
            col_ptr.push(row_idx.len());
        }
    }
    for p in 0..np {
        for &j in &pv[p] {
            row_idx.extend_from_slice(&[3 * j as usize, 3 * j as usize + 1, 3 * j as usize + 2]);
        }
        row_idx.push(nu + p);
        row_idx.push(nu + np);
        col_ptr.push(row_idx.len());
    }
    row_idx.extend(nu..=nu + np);
    col_ptr.push(row_idx.len());
    KktPattern { col_ptr, row_idx }
}

/// Tags of the boundary facets whose vertices are all pinned.
pub fn wall_tags(space: &TaylorHoodSpace) -> Vec<FacetTag> {
    let mut tags: Vec<FacetTag> = Vec::new();
    for f in &space.mesh.boundary_facets {
        let pins = f
            .vertices
            .iter()
            .all(|&v| space.node_free[v as usize] == PINNED);
        if pins && !tags.contains(&f.tag) {
            tags.push(f.tag);
        }
    }
    tags.sort();
    tags
}
