//! Structured bilinear-quadrilateral meshes.
//!
//! Meshes are tensor-product grids over a rectangle, optionally graded
//! towards refinement boxes and with elements removed inside voids (rebars,
//! wires, notches). A one-dimensional problem is a single row of elements
//! whose lateral facets carry zero-flux markers.

mod builder;
mod sparse;
pub mod vtk;

pub use builder::{build_rect_mesh, BoundaryMarkers, RectMeshSpec, Refinement, Side, SideSegment, Void, VoidShape};
pub use sparse::{CscMatrix, SparsityPattern};

use std::sync::Arc;

use crate::error::{Error, Result};

/// Number of quadrature points per element (2×2 Gauss).
pub const QP_PER_ELEMENT: usize = 4;

const GAUSS: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)
const REF_NODES: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// Quadrature point data of one element, in physical coordinates.
#[derive(Clone, Copy, Debug)]
pub struct QuadPoint {
    pub shape: [f64; 4],
    pub grad: [[f64; 2]; 4],
    /// Gauss weight times the Jacobian determinant.
    pub weight: f64,
    pub coord: [f64; 2],
}

/// A boundary edge, oriented counter-clockwise with respect to its element.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Facet {
    pub nodes: [usize; 2],
    pub element: usize,
    pub marker: usize,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; 4]>,
    facets: Vec<Facet>,
    markers: Vec<String>,
    quad: Vec<[QuadPoint; QP_PER_ELEMENT]>,
    extents: Vec<[f64; 2]>,
}

fn shape_at(xi: f64, eta: f64) -> ([f64; 4], [[f64; 2]; 4]) {
    let mut n = [0.0; 4];
    let mut dn = [[0.0; 2]; 4];
    for (a, r) in REF_NODES.iter().enumerate() {
        n[a] = 0.25 * (1.0 + r[0] * xi) * (1.0 + r[1] * eta);
        dn[a] = [0.25 * r[0] * (1.0 + r[1] * eta), 0.25 * r[1] * (1.0 + r[0] * xi)];
    }
    (n, dn)
}

impl Mesh {
    /// Assemble a mesh from raw parts. Elements must be counter-clockwise.
    pub fn from_parts(
        nodes: Vec<[f64; 2]>,
        elements: Vec<[usize; 4]>,
        facets: Vec<Facet>,
        markers: Vec<String>,
    ) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::Mesh("mesh has no elements".into()));
        }
        let mut quad = Vec::with_capacity(elements.len());
        let mut extents = Vec::with_capacity(elements.len());
        for (e, conn) in elements.iter().enumerate() {
            if conn.iter().any(|&n| n >= nodes.len()) {
                return Err(Error::Mesh(format!("element {e} references a missing node")));
            }
            let xs: [[f64; 2]; 4] = conn.map(|n| nodes[n]);
            let mut qps = [QuadPoint { shape: [0.0; 4], grad: [[0.0; 2]; 4], weight: 0.0, coord: [0.0; 2] }; 4];
            for (q, qp) in qps.iter_mut().enumerate() {
                let (xi, eta) = (REF_NODES[q][0] * GAUSS, REF_NODES[q][1] * GAUSS);
                let (n, dn) = shape_at(xi, eta);
                let mut jac = [[0.0; 2]; 2];
                let mut coord = [0.0; 2];
                for a in 0..4 {
                    for i in 0..2 {
                        coord[i] += n[a] * xs[a][i];
                        for j in 0..2 {
                            jac[i][j] += xs[a][i] * dn[a][j];
                        }
                    }
                }
                let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
                if !(det > 0.0) {
                    return Err(Error::Mesh(format!("element {e} has non-positive Jacobian {det:e}")));
                }
                let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
                let mut grad = [[0.0; 2]; 4];
                for a in 0..4 {
                    grad[a] =
                        [dn[a][0] * inv[0][0] + dn[a][1] * inv[1][0], dn[a][0] * inv[0][1] + dn[a][1] * inv[1][1]];
                }
                *qp = QuadPoint { shape: n, grad, weight: det, coord };
            }
            quad.push(qps);
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for x in xs {
                for i in 0..2 {
                    lo[i] = lo[i].min(x[i]);
                    hi[i] = hi[i].max(x[i]);
                }
            }
            extents.push([hi[0] - lo[0], hi[1] - lo[1]]);
        }
        for f in &facets {
            if f.marker >= markers.len() || f.element >= elements.len() {
                return Err(Error::Mesh("facet references a missing marker or element".into()));
            }
        }
        Ok(Self { nodes, elements, facets, markers, quad, extents })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 4]] {
        &self.elements
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn markers(&self) -> &[String] {
        &self.markers
    }

    pub fn quad_points(&self, element: usize) -> &[QuadPoint; QP_PER_ELEMENT] {
        &self.quad[element]
    }

    /// Bounding-box extents `[hx, hy]` of an element.
    pub fn element_extent(&self, element: usize) -> [f64; 2] {
        self.extents[element]
    }

    /// Characteristic element size `H_e`: the larger bounding-box extent.
    pub fn element_size(&self, element: usize) -> f64 {
        let [hx, hy] = self.extents[element];
        hx.max(hy)
    }

    pub fn max_element_size(&self) -> f64 {
        (0..self.num_elements()).map(|e| self.element_size(e)).fold(0.0, f64::max)
    }

    pub fn marker_id(&self, name: &str) -> Result<usize> {
        self.markers.iter().position(|m| m == name).ok_or_else(|| Error::UnknownMarker(name.to_string()))
    }

    /// Facets carrying the given marker.
    pub fn marker_facets(&self, name: &str) -> Result<Vec<Facet>> {
        let id = self.marker_id(name)?;
        Ok(self.facets.iter().copied().filter(|f| f.marker == id).collect())
    }

    /// Sorted, de-duplicated nodes lying on facets with the given marker.
    pub fn boundary_nodes(&self, name: &str) -> Result<Vec<usize>> {
        let mut nodes: Vec<usize> = self.marker_facets(name)?.iter().flat_map(|f| f.nodes).collect();
        nodes.sort_unstable();
        nodes.dedup();
        Ok(nodes)
    }

    pub fn area(&self) -> f64 {
        self.quad.iter().flat_map(|q| q.iter()).map(|qp| qp.weight).sum()
    }

    /// `∫ N_i dV` for every node (row sums of the consistent mass matrix).
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.num_nodes()];
        for (e, conn) in self.elements.iter().enumerate() {
            for qp in &self.quad[e] {
                for a in 0..4 {
                    m[conn[a]] += qp.shape[a] * qp.weight;
                }
            }
        }
        m
    }

    fn check_len(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.num_nodes() {
            return Err(Error::FieldLength { expected: self.num_nodes(), got: field.len() });
        }
        Ok(())
    }

    /// Integral of the bilinear interpolant of a nodal field.
    pub fn integrate_scalar(&self, field: &[f64]) -> Result<f64> {
        self.check_len(field)?;
        let mut total = 0.0;
        for (e, conn) in self.elements.iter().enumerate() {
            for qp in &self.quad[e] {
                let v: f64 = (0..4).map(|a| qp.shape[a] * field[conn[a]]).sum();
                total += v * qp.weight;
            }
        }
        Ok(total)
    }

    /// Integral of a pointwise expression evaluated at quadrature points.
    pub fn integrate_fn(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        self.quad.iter().flat_map(|q| q.iter()).map(|qp| f(qp.coord) * qp.weight).sum()
    }

    /// Gradient of the interpolated nodal field at each quadrature point.
    pub fn gradient_at_quadrature(&self, field: &[f64]) -> Result<Vec<[[f64; 2]; QP_PER_ELEMENT]>> {
        self.check_len(field)?;
        Ok(self
            .elements
            .iter()
            .enumerate()
            .map(|(e, conn)| {
                let mut out = [[0.0; 2]; QP_PER_ELEMENT];
                for (q, qp) in self.quad[e].iter().enumerate() {
                    for a in 0..4 {
                        out[q][0] += qp.grad[a][0] * field[conn[a]];
                        out[q][1] += qp.grad[a][1] * field[conn[a]];
                    }
                }
                out
            })
            .collect())
    }

    /// Node-to-node adjacency through shared elements, each list sorted and
    /// including the node itself.
    pub fn node_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes()];
        for conn in &self.elements {
            for &a in conn {
                adj[a].extend_from_slice(conn);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Locate a point: returns the element and the shape-function values there.
    pub fn locate(&self, point: [f64; 2]) -> Option<(usize, [f64; 4])> {
        let tol = 1e-9;
        for (e, conn) in self.elements.iter().enumerate() {
            let xs = conn.map(|n| self.nodes[n]);
            let (lo, hi) = xs.iter().fold(([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]), |(lo, hi), x| {
                ([lo[0].min(x[0]), lo[1].min(x[1])], [hi[0].max(x[0]), hi[1].max(x[1])])
            });
            let pad = tol * (hi[0] - lo[0]).max(hi[1] - lo[1]);
            if point[0] < lo[0] - pad || point[0] > hi[0] + pad || point[1] < lo[1] - pad || point[1] > hi[1] + pad {
                continue;
            }
            // Newton inversion of the bilinear map.
            let (mut xi, mut eta) = (0.0, 0.0);
            for _ in 0..20 {
                let (n, dn) = shape_at(xi, eta);
                let mut r = [-point[0], -point[1]];
                let mut j = [[0.0; 2]; 2];
                for a in 0..4 {
                    for i in 0..2 {
                        r[i] += n[a] * xs[a][i];
                        j[i][0] += xs[a][i] * dn[a][0];
                        j[i][1] += xs[a][i] * dn[a][1];
                    }
                }
                let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                let dxi = (j[1][1] * r[0] - j[0][1] * r[1]) / det;
                let deta = (-j[1][0] * r[0] + j[0][0] * r[1]) / det;
                xi -= dxi;
                eta -= deta;
                if dxi.abs() + deta.abs() < 1e-14 {
                    break;
                }
            }
            if xi.abs() <= 1.0 + 1e-9 && eta.abs() <= 1.0 + 1e-9 {
                return Some((e, shape_at(xi.clamp(-1.0, 1.0), eta.clamp(-1.0, 1.0)).0));
            }
        }
        None
    }

    /// Bilinear interpolation of a nodal field at a point.
    pub fn interpolate(&self, field: &[f64], point: [f64; 2]) -> Option<f64> {
        let (e, n) = self.locate(point)?;
        Some((0..4).map(|a| n[a] * field[self.elements[e][a]]).sum())
    }

    /// Index of the node closest to a point.
    pub fn nearest_node(&self, point: [f64; 2]) -> usize {
        let d2 = |x: &[f64; 2]| (x[0] - point[0]).powi(2) + (x[1] - point[1]).powi(2);
        (0..self.num_nodes()).min_by(|&a, &b| d2(&self.nodes[a]).total_cmp(&d2(&self.nodes[b]))).unwrap_or(0)
    }

    /// Distance from every node to the nearest facet with the given marker.
    pub fn distance_to_marker(&self, name: &str) -> Result<Vec<f64>> {
        let facets = self.marker_facets(name)?;
        if facets.is_empty() {
            return Err(Error::UnknownMarker(name.to_string()));
        }
        Ok(self
            .nodes
            .iter()
            .map(|x| {
                facets
                    .iter()
                    .map(|f| point_segment_distance(*x, self.nodes[f.nodes[0]], self.nodes[f.nodes[1]]))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect())
    }

    /// Unique element edges as node pairs (smaller index first).
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut edges: Vec<[usize; 2]> = self
            .elements
            .iter()
            .flat_map(|c| {
                (0..4).map(move |a| {
                    let (i, j) = (c[a], c[(a + 1) % 4]);
                    [i.min(j), i.max(j)]
                })
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Scalar Galerkin mass matrix (consistent or row-sum lumped).
    pub fn assemble_mass(&self, lumped: bool) -> CscMatrix {
        let pattern = Arc::new(SparsityPattern::for_mesh(self, 1));
        let mut m = CscMatrix::zeros(pattern);
        if lumped {
            for (i, v) in self.lumped_mass().into_iter().enumerate() {
                m.add(i, i, v);
            }
            return m;
        }
        for (e, conn) in self.elements.iter().enumerate() {
            for qp in &self.quad[e] {
                for a in 0..4 {
                    for b in 0..4 {
                        m.add(conn[a], conn[b], qp.shape[a] * qp.shape[b] * qp.weight);
                    }
                }
            }
        }
        m
    }

    /// Scalar stiffness `∫ κ ∇N_i·∇N_j` with a coefficient per quadrature point
    /// (`coefficient.len() == QP_PER_ELEMENT * num_elements`), or unit
    /// coefficient when `None`.
    pub fn assemble_stiffness(&self, coefficient: Option<&[f64]>) -> Result<CscMatrix> {
        if let Some(c) = coefficient {
            if c.len() != QP_PER_ELEMENT * self.num_elements() {
                return Err(Error::FieldLength { expected: QP_PER_ELEMENT * self.num_elements(), got: c.len() });
            }
        }
        let pattern = Arc::new(SparsityPattern::for_mesh(self, 1));
        let mut k = CscMatrix::zeros(pattern);
        for (e, conn) in self.elements.iter().enumerate() {
            for (q, qp) in self.quad[e].iter().enumerate() {
                let kappa = coefficient.map_or(1.0, |c| c[e * QP_PER_ELEMENT + q]);
                for a in 0..4 {
                    for b in 0..4 {
                        let g = qp.grad[a][0] * qp.grad[b][0] + qp.grad[a][1] * qp.grad[b][1];
                        k.add(conn[a], conn[b], kappa * g * qp.weight);
                    }
                }
            }
        }
        Ok(k)
    }
}

pub fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 { (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let c = [a[0] + t * ab[0], a[1] + t * ab[1]];
    ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_square_single_element() {
        let m = build_rect_mesh(1.0, 1.0, 1, 1, BoundaryMarkers::default()).unwrap();
        assert_eq!(m.num_nodes(), 4);
        assert_eq!(m.num_elements(), 1);
        assert_eq!(m.facets().len(), 4);
        let mut ids: Vec<usize> = m.facets().iter().map(|f| f.marker).collect();
        ids.sort_unstable();
        assert_eq!(ids, vec![0, 1, 2, 3]);
    }

    #[test]
    fn uniform_element_size() {
        let m = build_rect_mesh(0.1, 0.1, 100, 100, BoundaryMarkers::default()).unwrap();
        assert_eq!(m.num_nodes(), 101 * 101);
        assert_relative_eq!(m.max_element_size(), 1e-3, max_relative = 1e-12);
    }

    #[test]
    fn area_and_lumped_mass() {
        let m = build_rect_mesh(0.05, 0.05, 7, 5, BoundaryMarkers::default()).unwrap();
        assert_relative_eq!(m.integrate_scalar(&vec![1.0; m.num_nodes()]).unwrap(), 2.5e-3, max_relative = 1e-12);
        let mass = m.assemble_mass(false);
        let sums = mass.row_sums();
        for (a, b) in sums.iter().zip(m.lumped_mass()) {
            assert_relative_eq!(*a, b, max_relative = 1e-12);
        }
        assert_relative_eq!(sums.iter().sum::<f64>(), 2.5e-3, max_relative = 1e-12);
    }

    #[test]
    fn stiffness_is_symmetric_psd_with_zero_row_sums() {
        let m = build_rect_mesh(1.0, 2.0, 3, 4, BoundaryMarkers::default()).unwrap();
        let k = m.assemble_stiffness(None).unwrap();
        let d = k.to_dense();
        let n = d.len();
        for i in 0..n {
            assert!(d[i].iter().sum::<f64>().abs() < 1e-12);
            for j in 0..n {
                assert!((d[i][j] - d[j][i]).abs() < 1e-14);
            }
        }
        // x^T K x >= 0 for a few deterministic vectors
        for s in 0..5 {
            let x: Vec<f64> = (0..n).map(|i| ((i * 7 + s * 13) % 11) as f64 - 5.0).collect();
            let kx = k.matvec(&x);
            assert!(x.iter().zip(&kx).map(|(a, b)| a * b).sum::<f64>() >= -1e-12);
        }
    }

    #[test]
    fn linear_field_energy_and_patch_test() {
        let m = build_rect_mesh(1.0, 1.0, 6, 6, BoundaryMarkers::default()).unwrap();
        let u: Vec<f64> = m.nodes().iter().map(|x| x[0]).collect();
        let k = m.assemble_stiffness(None).unwrap();
        let ku = k.matvec(&u);
        let energy = 0.5 * u.iter().zip(&ku).map(|(a, b)| a * b).sum::<f64>();
        assert_relative_eq!(energy, 0.5, max_relative = 1e-12);

        let f: Vec<f64> = m.nodes().iter().map(|x| 2.0 * x[0] - 3.0 * x[1] + 1.0).collect();
        for g in m.gradient_at_quadrature(&f).unwrap() {
            for q in g {
                assert_relative_eq!(q[0], 2.0, max_relative = 1e-12);
                assert_relative_eq!(q[1], -3.0, max_relative = 1e-12);
            }
        }
        let v = m.interpolate(&f, [0.31, 0.77]).unwrap();
        assert_relative_eq!(v, 2.0 * 0.31 - 3.0 * 0.77 + 1.0, max_relative = 1e-12);
    }

    #[test]
    fn field_length_mismatch() {
        let m = build_rect_mesh(1.0, 1.0, 2, 2, BoundaryMarkers::default()).unwrap();
        assert!(matches!(m.integrate_scalar(&[1.0; 3]), Err(Error::FieldLength { .. })));
    }

    #[test]
    fn distance_to_marker() {
        let m = build_rect_mesh(1.0, 1.0, 4, 4, BoundaryMarkers::default()).unwrap();
        let d = m.distance_to_marker("left").unwrap();
        for (x, d) in m.nodes().iter().zip(d) {
            assert_relative_eq!(d, x[0], epsilon = 1e-14);
        }
        assert!(m.distance_to_marker("nope").is_err());
    }
}
