use serde::{Deserialize, Serialize};

use super::{Facet, Mesh};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

/// Marker names of the four outer sides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryMarkers {
    pub bottom: String,
    pub right: String,
    pub top: String,
    pub left: String,
}

impl Default for BoundaryMarkers {
    fn default() -> Self {
        Self { bottom: "bottom".into(), right: "right".into(), top: "top".into(), left: "left".into() }
    }
}

impl BoundaryMarkers {
    fn get(&self, side: Side) -> &str {
        match side {
            Side::Bottom => &self.bottom,
            Side::Right => &self.right,
            Side::Top => &self.top,
            Side::Left => &self.left,
        }
    }
}

/// Re-marks the part of a side whose facet midpoints fall in `[from, to]`
/// (x for bottom/top, y for left/right).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideSegment {
    pub side: Side,
    pub from: f64,
    pub to: f64,
    pub marker: String,
}

/// Box in which element extents are capped at `size = [hx, hy]`. Sizes grow
/// geometrically away from the box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Refinement {
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub size: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoidShape {
    Disk { center: [f64; 2], radius: f64 },
    Rect { min: [f64; 2], max: [f64; 2] },
}

impl VoidShape {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match self {
            VoidShape::Disk { center, radius } => {
                (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2) < radius * radius
            }
            VoidShape::Rect { min, max } => p[0] > min[0] && p[0] < max[0] && p[1] > min[1] && p[1] < max[1],
        }
    }
}

/// Elements whose centroid lies inside `shape` are removed; exposed facets
/// get `marker`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Void {
    pub shape: VoidShape,
    pub marker: String,
}

fn default_growth() -> f64 {
    1.2
}

/// Serializable description of a graded rectangular mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectMeshSpec {
    pub width: f64,
    pub height: f64,
    /// Base number of elements along x; refinement adds more.
    pub nx: usize,
    pub ny: usize,
    #[serde(default)]
    pub markers: BoundaryMarkers,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<SideSegment>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub refine: Vec<Refinement>,
    /// Coordinates that must appear as grid lines.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub anchors_x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub anchors_y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub voids: Vec<Void>,
    #[serde(default = "default_growth")]
    pub growth: f64,
}

impl RectMeshSpec {
    pub fn uniform(width: f64, height: f64, nx: usize, ny: usize) -> Self {
        Self {
            width,
            height,
            nx,
            ny,
            markers: BoundaryMarkers::default(),
            segments: Vec::new(),
            refine: Vec::new(),
            anchors_x: Vec::new(),
            anchors_y: Vec::new(),
            voids: Vec::new(),
            growth: default_growth(),
        }
    }

    /// Every marker name the built mesh will carry, in id order.
    pub fn marker_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        let sides = [&self.markers.bottom, &self.markers.right, &self.markers.top, &self.markers.left];
        for n in
            sides.into_iter().chain(self.segments.iter().map(|s| &s.marker)).chain(self.voids.iter().map(|v| &v.marker))
        {
            if !names.contains(n) {
                names.push(n.clone());
            }
        }
        names
    }

    pub fn build(&self) -> Result<Mesh> {
        if !(self.width > 0.0 && self.height > 0.0) || !self.width.is_finite() || !self.height.is_finite() {
            return Err(Error::Mesh(format!("dimensions must be positive, got {} x {}", self.width, self.height)));
        }
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::Mesh("nx and ny must be at least 1".into()));
        }
        if !(self.growth > 1.0) {
            return Err(Error::Mesh("growth factor must exceed 1".into()));
        }
        for r in &self.refine {
            if !(r.size[0] > 0.0 && r.size[1] > 0.0) || r.min[0] > r.max[0] || r.min[1] > r.max[1] {
                return Err(Error::Mesh("refinement box needs positive sizes and min <= max".into()));
            }
        }
        let ax: Vec<_> = self.refine.iter().map(|r| (r.min[0], r.max[0], r.size[0])).collect();
        let ay: Vec<_> = self.refine.iter().map(|r| (r.min[1], r.max[1], r.size[1])).collect();
        let xs = axis_coords(self.width, self.nx, &ax, &self.anchors_x, self.growth)?;
        let ys = axis_coords(self.height, self.ny, &ay, &self.anchors_y, self.growth)?;
        self.assemble(&xs, &ys)
    }

    fn assemble(&self, xs: &[f64], ys: &[f64]) -> Result<Mesh> {
        let (nx, ny) = (xs.len() - 1, ys.len() - 1);
        let names = self.marker_names();
        let id = |n: &str| names.iter().position(|m| m == n).unwrap_or(0);

        // Which void (if any) swallowed each structured element.
        let mut removed_by: Vec<Option<usize>> = vec![None; nx * ny];
        let mut void_hits = vec![0usize; self.voids.len()];
        for j in 0..ny {
            for i in 0..nx {
                let c = [0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])];
                if let Some(v) = self.voids.iter().position(|v| v.shape.contains(c)) {
                    removed_by[j * nx + i] = Some(v);
                    void_hits[v] += 1;
                }
            }
        }
        if let Some(v) = void_hits.iter().position(|&h| h == 0) {
            return Err(Error::Mesh(format!("void `{}` removes no elements", self.voids[v].marker)));
        }

        let grid_node = |i: usize, j: usize| j * (nx + 1) + i;
        let mut new_index = vec![usize::MAX; (nx + 1) * (ny + 1)];
        for j in 0..ny {
            for i in 0..nx {
                if removed_by[j * nx + i].is_none() {
                    for n in [grid_node(i, j), grid_node(i + 1, j), grid_node(i + 1, j + 1), grid_node(i, j + 1)] {
                        new_index[n] = 0;
                    }
                }
            }
        }
        let mut nodes = Vec::new();
        for j in 0..=ny {
            for i in 0..=nx {
                let g = grid_node(i, j);
                if new_index[g] == 0 {
                    new_index[g] = nodes.len();
                    nodes.push([xs[i], ys[j]]);
                }
            }
        }

        let side_marker = |side: Side, along: f64| -> usize {
            self.segments
                .iter()
                .rev()
                .find(|s| s.side == side && along >= s.from && along <= s.to)
                .map_or_else(|| id(self.markers.get(side)), |s| id(&s.marker))
        };

        let mut elements = Vec::new();
        let mut facets = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                if removed_by[j * nx + i].is_some() {
                    continue;
                }
                let e = elements.len();
                let conn = [grid_node(i, j), grid_node(i + 1, j), grid_node(i + 1, j + 1), grid_node(i, j + 1)]
                    .map(|g| new_index[g]);
                elements.push(conn);
                let neighbours = [
                    (Side::Bottom, (j > 0).then(|| (i, j - 1))),
                    (Side::Right, (i + 1 < nx).then(|| (i + 1, j))),
                    (Side::Top, (j + 1 < ny).then(|| (i, j + 1))),
                    (Side::Left, (i > 0).then(|| (i - 1, j))),
                ];
                for (k, (side, nb)) in neighbours.into_iter().enumerate() {
                    let marker = match nb {
                        None => {
                            let along = match side {
                                Side::Bottom | Side::Top => 0.5 * (xs[i] + xs[i + 1]),
                                Side::Left | Side::Right => 0.5 * (ys[j] + ys[j + 1]),
                            };
                            Some(side_marker(side, along))
                        }
                        Some((ni, nj)) => removed_by[nj * nx + ni].map(|v| id(&self.voids[v].marker)),
                    };
                    if let Some(marker) = marker {
                        facets.push(Facet { nodes: [conn[k], conn[(k + 1) % 4]], element: e, marker });
                    }
                }
            }
        }
        Mesh::from_parts(nodes, elements, facets, names)
    }
}

/// Uniform rectangle `[0,width]×[0,height]` with `nx×ny` elements.
pub fn build_rect_mesh(width: f64, height: f64, nx: usize, ny: usize, markers: BoundaryMarkers) -> Result<Mesh> {
    RectMeshSpec { markers, ..RectMeshSpec::uniform(width, height, nx, ny) }.build()
}

/// Grid-line coordinates along one axis.
fn axis_coords(length: f64, n: usize, refine: &[(f64, f64, f64)], anchors: &[f64], growth: f64) -> Result<Vec<f64>> {
    let h0 = length / n as f64;
    if refine.is_empty() && anchors.is_empty() {
        let mut xs: Vec<f64> = (0..=n).map(|i| i as f64 * h0).collect();
        xs[n] = length;
        return Ok(xs);
    }
    let size = |x: f64| {
        refine.iter().fold(h0, |h, &(a, b, s)| {
            let d = if x < a {
                a - x
            } else if x > b {
                x - b
            } else {
                0.0
            };
            h.min(s + (growth - 1.0) * d)
        })
    };
    let tol = 1e-12 * length;
    let mut breaks: Vec<f64> = vec![0.0, length];
    for &x in anchors.iter().chain(refine.iter().flat_map(|r| [&r.0, &r.1])) {
        if !x.is_finite() {
            return Err(Error::Mesh("non-finite anchor coordinate".into()));
        }
        if x > tol && x < length - tol {
            breaks.push(x);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= tol);

    let mut xs = vec![0.0];
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut pts = vec![a];
        let mut x = a;
        while x < b - tol {
            let step = size(x).min(size((x + size(x)).min(b)));
            x += step;
            pts.push(x);
        }
        // Shrink the marched points to end exactly at b.
        let scale = (b - a) / (x - a);
        xs.extend(pts[1..].iter().map(|p| a + (p - a) * scale));
        *xs.last_mut().unwrap() = b;
        if xs.len() > 2_000_000 {
            return Err(Error::Mesh("refinement produces too many grid lines".into()));
        }
    }
    Ok(xs)
}
