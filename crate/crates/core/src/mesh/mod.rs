//! Tetrahedral meshes of the fluid part of the unit cell `Z = Z' × (0, 1)`.

mod extrude;
mod gmsh;
mod polygon;
mod triangulate;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use extrude::extrude_to_tets;
pub use gmsh::write_msh;
pub use polygon::{
    build_inclusion_polygon, build_inclusion_polygon_with_clearance, InclusionShape, Polygon2D, DEFAULT_CLEARANCE,
};
pub use triangulate::{triangulate_cross_section, Mesh2D};

use crate::error::MeshError;

pub const DEFAULT_N_SEG: usize = 64;
pub const DEFAULT_H: f64 = 0.08;
pub const DEFAULT_N_LAYERS: usize = 8;

/// Boundary label of a triangular facet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FacetTag {
    Obstacle,
    Bottom,
    Top,
    XLo,
    XHi,
    YLo,
    YHi,
    Interior,
}

impl FacetTag {
    pub const BOUNDARY: [FacetTag; 7] = [
        FacetTag::Obstacle,
        FacetTag::Bottom,
        FacetTag::Top,
        FacetTag::XLo,
        FacetTag::XHi,
        FacetTag::YLo,
        FacetTag::YHi,
    ];

    /// Physical group id used in exported meshes.
    pub fn physical_id(self) -> u32 {
        match self {
            FacetTag::Obstacle => 1,
            FacetTag::Bottom => 2,
            FacetTag::Top => 3,
            FacetTag::XLo => 4,
            FacetTag::XHi => 5,
            FacetTag::YLo => 6,
            FacetTag::YHi => 7,
            FacetTag::Interior => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FacetTag::Obstacle => "OBSTACLE",
            FacetTag::Bottom => "BOTTOM",
            FacetTag::Top => "TOP",
            FacetTag::XLo => "X_LO",
            FacetTag::XHi => "X_HI",
            FacetTag::YLo => "Y_LO",
            FacetTag::YHi => "Y_HI",
            FacetTag::Interior => "INTERIOR",
        }
    }

    /// Velocity is pinned to zero on these facets.
    pub fn is_wall(self) -> bool {
        matches!(self, FacetTag::Obstacle | FacetTag::Bottom | FacetTag::Top)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Facet {
    /// Sorted vertex ids.
    pub vertices: [u32; 3],
    pub tag: FacetTag,
}

/// Tagged tetrahedral mesh of `Z_f` with lateral periodic vertex pairs.
#[derive(Debug, Clone)]
pub struct Mesh3D {
    pub vertices: Vec<[f64; 3]>,
    pub tets: Vec<[u32; 4]>,
    /// Boundary facets, each with a non-interior tag.
    pub boundary_facets: Vec<Facet>,
    /// `(v, w)` with `w = v + (1, 0, 0)`.
    pub periodic_x: Vec<(u32, u32)>,
    /// `(v, w)` with `w = v + (0, 1, 0)`.
    pub periodic_y: Vec<(u32, u32)>,
    facet_index: HashMap<[u32; 3], usize>,
}

impl Mesh3D {
    pub fn from_parts(
        vertices: Vec<[f64; 3]>,
        tets: Vec<[u32; 4]>,
        boundary_facets: Vec<Facet>,
        periodic_x: Vec<(u32, u32)>,
        periodic_y: Vec<(u32, u32)>,
    ) -> Self {
        let facet_index = boundary_facets
            .iter()
            .enumerate()
            .map(|(i, f)| (f.vertices, i))
            .collect();
        Self {
            vertices,
            tets,
            boundary_facets,
            periodic_x,
            periodic_y,
            facet_index,
        }
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        extrude::signed_volume(&self.vertices, &self.tets[t])
    }

    pub fn volume(&self) -> f64 {
        (0..self.tets.len()).map(|t| self.tet_volume(t)).sum()
    }

    /// Tag of the facet with the given vertices (any order); `Interior` if not on the boundary.
    pub fn facet_tag(&self, face: [u32; 3]) -> FacetTag {
        let mut f = face;
        f.sort_unstable();
        self.facet_index
            .get(&f)
            .map_or(FacetTag::Interior, |&i| self.boundary_facets[i].tag)
    }

    pub fn facet_area(&self, f: &Facet) -> f64 {
        let [a, b, c] = f.vertices.map(|i| self.vertices[i as usize]);
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let n = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
        0.5 * (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt()
    }

    /// Total area of the facets carrying `tag`.
    pub fn tag_area(&self, tag: FacetTag) -> f64 {
        self.boundary_facets
            .iter()
            .filter(|f| f.tag == tag)
            .map(|f| self.facet_area(f))
            .sum()
    }

    /// Restores the internal facet lookup after `boundary_facets` was edited.
    pub fn reindex_facets(&mut self) {
        self.facet_index = self
            .boundary_facets
            .iter()
            .enumerate()
            .map(|(i, f)| (f.vertices, i))
            .collect();
    }

    pub fn report(&self) -> MeshReport {
        let vols: Vec<f64> = (0..self.tets.len()).map(|t| self.tet_volume(t)).collect();
        MeshReport {
            n_vertices: self.vertices.len(),
            n_tets: self.tets.len(),
            n_boundary_facets: self.boundary_facets.len(),
            volume: vols.iter().sum(),
            min_tet_volume: vols.iter().copied().fold(f64::INFINITY, f64::min),
            max_tet_volume: vols.iter().copied().fold(0.0, f64::max),
            obstacle_area: self.tag_area(FacetTag::Obstacle),
            n_periodic_x: self.periodic_x.len(),
            n_periodic_y: self.periodic_y.len(),
            min_triangle_angle_deg: None,
        }
    }
}

/// Summary statistics written next to exported meshes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshReport {
    pub n_vertices: usize,
    pub n_tets: usize,
    pub n_boundary_facets: usize,
    pub volume: f64,
    pub min_tet_volume: f64,
    pub max_tet_volume: f64,
    pub obstacle_area: f64,
    pub n_periodic_x: usize,
    pub n_periodic_y: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub min_triangle_angle_deg: Option<f64>,
}

/// Parametric description of a reference cell and its mesh resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub shape: InclusionShape,
    #[serde(default = "default_n_seg")]
    pub n_seg: usize,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_n_layers")]
    pub n_layers: usize,
    #[serde(default = "default_clearance")]
    pub clearance: f64,
}

fn default_n_seg() -> usize {
    DEFAULT_N_SEG
}
fn default_h() -> f64 {
    DEFAULT_H
}
fn default_n_layers() -> usize {
    DEFAULT_N_LAYERS
}
fn default_clearance() -> f64 {
    DEFAULT_CLEARANCE
}

impl CellSpec {
    /// Cell with default resolution.
    pub fn new(shape: InclusionShape) -> Self {
        Self {
            shape,
            n_seg: DEFAULT_N_SEG,
            h: DEFAULT_H,
            n_layers: DEFAULT_N_LAYERS,
            clearance: DEFAULT_CLEARANCE,
        }
    }

    pub fn with_resolution(mut self, h: f64, n_layers: usize) -> Self {
        self.h = h;
        self.n_layers = n_layers;
        self
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        if self.n_seg < 16 {
            return Err(MeshError::InvalidResolution(format!("n_seg must be at least 16, got {}", self.n_seg)));
        }
        if self.n_layers < 4 {
            return Err(MeshError::InvalidResolution(format!(
                "n_layers must be at least 4, got {}",
                self.n_layers
            )));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(MeshError::InvalidResolution(format!("h must be positive, got {}", self.h)));
        }
        if !(self.clearance >= 0.0 && self.clearance < 0.5) {
            return Err(MeshError::InvalidResolution(format!(
                "clearance must lie in [0, 1/2), got {}",
                self.clearance
            )));
        }
        self.shape.validate(self.clearance)
    }

    pub fn polygon(&self) -> Result<Option<Polygon2D>, MeshError> {
        build_inclusion_polygon_with_clearance(&self.shape, self.n_seg, self.clearance)
    }

    /// `1 - area(polygon)`, the exact volume of the discrete fluid cell.
    pub fn fluid_volume(&self) -> Result<f64, MeshError> {
        Ok(1.0 - self.polygon()?.map_or(0.0, |p| p.area()))
    }
}

/// Polygon, cross-section and extrusion in one call.
pub fn build_cell_mesh(spec: &CellSpec) -> Result<Mesh3D, MeshError> {
    spec.validate()?;
    let polygon = spec.polygon()?;
    let mesh2d = triangulate_cross_section(polygon.as_ref(), spec.h)?;
    extrude_to_tets(&mesh2d, spec.n_layers)
}
