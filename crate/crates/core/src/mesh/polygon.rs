use serde::{Deserialize, Serialize};

use crate::error::MeshError;

/// Default clearance between the inclusion and the cell boundary.
pub const DEFAULT_CLEARANCE: f64 = 0.05;

/// Cross-section `T'` of the solid cylinder, centred at the origin of `Z' = (-1/2, 1/2)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InclusionShape {
    /// No obstacle: the cell is a plane channel.
    Empty,
    Disk {
        radius: f64,
    },
    Ellipse {
        semi_major: f64,
        semi_minor: f64,
        /// Rotation of the major axis with respect to the `x₁` axis, in radians.
        #[serde(default)]
        angle: f64,
    },
}

impl InclusionShape {
    /// The four reference inclusions `E1`-`E4`.
    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_uppercase().as_str() {
            "E1" => Some(Self::Disk { radius: 0.1 }),
            "E2" => Some(Self::Ellipse {
                semi_major: 0.3,
                semi_minor: 0.1,
                angle: 0.0,
            }),
            "E3" => Some(Self::Ellipse {
                semi_major: 0.3,
                semi_minor: 0.1,
                angle: std::f64::consts::FRAC_PI_2,
            }),
            "E4" => Some(Self::Disk { radius: 0.3 }),
            "NONE" | "EMPTY" => Some(Self::Empty),
            _ => None,
        }
    }

    /// Half-widths of the axis-aligned bounding box of the exact shape.
    pub fn half_extent(&self) -> [f64; 2] {
        match *self {
            Self::Empty => [0.0, 0.0],
            Self::Disk { radius } => [radius, radius],
            Self::Ellipse {
                semi_major: a,
                semi_minor: b,
                angle,
            } => {
                let (s, c) = angle.sin_cos();
                [
                    (a * a * c * c + b * b * s * s).sqrt(),
                    (a * a * s * s + b * b * c * c).sqrt(),
                ]
            }
        }
    }

    pub fn validate(&self, clearance: f64) -> Result<(), MeshError> {
        match *self {
            Self::Empty => return Ok(()),
            Self::Disk { radius } => {
                if !(radius.is_finite() && radius > 0.0) {
                    return Err(MeshError::InvalidShape(format!("radius must be positive, got {radius}")));
                }
            }
            Self::Ellipse {
                semi_major,
                semi_minor,
                angle,
            } => {
                if !(semi_minor.is_finite() && semi_minor > 0.0 && semi_major >= semi_minor && semi_major.is_finite()) {
                    return Err(MeshError::InvalidShape(format!(
                        "need semi_major >= semi_minor > 0, got {semi_major}, {semi_minor}"
                    )));
                }
                if !angle.is_finite() {
                    return Err(MeshError::InvalidShape("angle must be finite".into()));
                }
            }
        }
        let [ex, ey] = self.half_extent();
        let extent = ex.max(ey);
        let limit = 0.5 - clearance;
        if extent >= limit {
            return Err(MeshError::ClearanceViolation { extent, limit });
        }
        Ok(())
    }

    /// Exact area of the analytic shape.
    pub fn area(&self) -> f64 {
        match *self {
            Self::Empty => 0.0,
            Self::Disk { radius } => std::f64::consts::PI * radius * radius,
            Self::Ellipse {
                semi_major,
                semi_minor,
                ..
            } => std::f64::consts::PI * semi_major * semi_minor,
        }
    }

    fn boundary_point(&self, t: f64) -> [f64; 2] {
        match *self {
            Self::Empty => [0.0, 0.0],
            Self::Disk { radius } => [radius * t.cos(), radius * t.sin()],
            Self::Ellipse {
                semi_major,
                semi_minor,
                angle,
            } => {
                let (x, y) = (semi_major * t.cos(), semi_minor * t.sin());
                let (s, c) = angle.sin_cos();
                [c * x - s * y, s * x + c * y]
            }
        }
    }
}

/// Closed polygon stored without repeating the first vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon2D {
    pub vertices: Vec<[f64; 2]>,
}

impl Polygon2D {
    pub fn new(vertices: Vec<[f64; 2]>) -> Self {
        Self { vertices }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Signed area (positive for counter-clockwise orientation).
    pub fn signed_area(&self) -> f64 {
        0.5 * self
            .edges()
            .map(|(a, b)| a[0] * b[1] - b[0] * a[1])
            .sum::<f64>()
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| dist(a, b)).sum()
    }

    /// Even-odd point containment.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Distance from `p` to the polygon boundary.
    pub fn boundary_distance(&self, p: [f64; 2]) -> f64 {
        self.edges()
            .map(|(a, b)| segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// True when no two non-adjacent edges intersect and no vertex repeats.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if self.vertices[i] == self.vertices[j] {
                    return false;
                }
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
                let (c, d) = (self.vertices[j], self.vertices[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }

    /// Largest coordinate magnitude over the vertices.
    pub fn max_abs_coordinate(&self) -> f64 {
        self.vertices
            .iter()
            .flat_map(|v| [v[0].abs(), v[1].abs()])
            .fold(0.0, f64::max)
    }
}

/// Samples `n_seg` points of the analytic boundary at equal parameter steps.
///
/// Returns `None` for [`InclusionShape::Empty`].
pub fn build_inclusion_polygon(shape: &InclusionShape, n_seg: usize) -> Result<Option<Polygon2D>, MeshError> {
    build_inclusion_polygon_with_clearance(shape, n_seg, DEFAULT_CLEARANCE)
}

pub fn build_inclusion_polygon_with_clearance(
    shape: &InclusionShape,
    n_seg: usize,
    clearance: f64,
) -> Result<Option<Polygon2D>, MeshError> {
    shape.validate(clearance)?;
    if matches!(shape, InclusionShape::Empty) {
        return Ok(None);
    }
    if n_seg < 3 {
        return Err(MeshError::InvalidShape(format!("need at least 3 segments, got {n_seg}")));
    }
    let vertices = (0..n_seg)
        .map(|k| shape.boundary_point(2.0 * std::f64::consts::PI * k as f64 / n_seg as f64))
        .collect();
    let poly = Polygon2D::new(vertices);
    let limit = 0.5 - clearance;
    let extent = poly.max_abs_coordinate();
    if extent >= limit {
        return Err(MeshError::ClearanceViolation { extent, limit });
    }
    Ok(Some(poly))
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub(crate) fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(p, [a[0] + t * dx, a[1] + t * dy])
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}
