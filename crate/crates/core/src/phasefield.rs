//! Prescribed cracks: a smooth phase field `φ` obtained from a screened
//! Poisson problem, and the laminar-flow (cubic law) permeability it induces.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constitutive::{bulk_permeability, MaterialParams};
use crate::error::{Error, Result};
use crate::linalg::LinearSolver;
use crate::mesh::{point_segment_distance, CscMatrix, Mesh, SparsityPattern, QP_PER_ELEMENT};

pub type Tensor2 = [[f64; 2]; 2];

/// Where `φ = 1` is pinned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrackSeeds {
    /// Straight segments `[[x0, y0], [x1, y1]]`; nodes on (or within half a
    /// local element of) a segment become seeds.
    Segments(Vec<[[f64; 2]; 2]>),
    /// Explicit node indices.
    Nodes(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrackSpec {
    pub seeds: CrackSeeds,
    /// Regularization length scale ℓ (m).
    pub ell: f64,
    /// Prescribed crack opening (m).
    pub w_cr: f64,
    #[serde(default = "default_phi_t")]
    pub phi_t: f64,
}

fn default_phi_t() -> f64 {
    0.5
}

impl CrackSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.ell > 0.0) || !self.ell.is_finite() {
            return Err(Error::param("ell", "must be positive"));
        }
        if !(self.w_cr >= 0.0) || !self.w_cr.is_finite() {
            return Err(Error::param("w_cr", "must be non-negative"));
        }
        if !(self.phi_t > 0.0 && self.phi_t < 1.0) {
            return Err(Error::param("phi_t", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Resolve the seeds to sorted mesh nodes.
    pub fn seed_nodes(&self, mesh: &Mesh) -> Result<Vec<usize>> {
        let mut nodes = match &self.seeds {
            CrackSeeds::Nodes(n) => {
                if let Some(&bad) = n.iter().find(|&&i| i >= mesh.num_nodes()) {
                    return Err(Error::PhaseField(format!("seed node {bad} does not exist")));
                }
                n.clone()
            }
            CrackSeeds::Segments(segs) => {
                let reach = node_reach(mesh);
                (0..mesh.num_nodes())
                    .filter(|&i| segs.iter().any(|s| point_segment_distance(mesh.nodes()[i], s[0], s[1]) <= reach[i]))
                    .collect()
            }
        };
        nodes.sort_unstable();
        nodes.dedup();
        if nodes.is_empty() {
            return Err(Error::PhaseField("crack has no seed nodes; the regularization problem is singular".into()));
        }
        Ok(nodes)
    }
}

/// Half the smallest extent of the elements touching each node (slightly
/// inflated so a segment midway between grid lines catches both).
fn node_reach(mesh: &Mesh) -> Vec<f64> {
    let mut r = vec![f64::INFINITY; mesh.num_nodes()];
    for (e, conn) in mesh.elements().iter().enumerate() {
        let [hx, hy] = mesh.element_extent(e);
        for &n in conn {
            r[n] = r[n].min(0.501 * hx.min(hy));
        }
    }
    r
}

/// Solve `φ − ℓ²Δφ = 0` with `φ = 1` on the seeds and natural conditions on
/// the boundary; the result is clamped to `[0, 1]`.
pub fn regularize_crack(mesh: &Mesh, spec: &CrackSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let seeds = spec.seed_nodes(mesh)?;
    let pattern = Arc::new(SparsityPattern::for_mesh(mesh, 1));
    let mut a = CscMatrix::zeros(pattern);
    let l2 = spec.ell * spec.ell;
    for (e, conn) in mesh.elements().iter().enumerate() {
        for qp in mesh.quad_points(e) {
            for i in 0..4 {
                for j in 0..4 {
                    let g = qp.grad[i][0] * qp.grad[j][0] + qp.grad[i][1] * qp.grad[j][1];
                    a.add(conn[i], conn[j], (qp.shape[i] * qp.shape[j] + l2 * g) * qp.weight);
                }
            }
        }
    }
    let mut rhs = vec![0.0; mesh.num_nodes()];
    for &s in &seeds {
        a.set_identity_row(s);
        rhs[s] = 1.0;
    }
    LinearSolver::new().solve(&a, &mut rhs)?;
    for &s in &seeds {
        rhs[s] = 1.0;
    }
    rhs.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok(rhs)
}

/// Crack opening: `w_cr` where `φ ≥ φ_t`, zero elsewhere.
pub fn crack_opening(phi: f64, spec: &CrackSpec) -> f64 {
    if phi >= spec.phi_t {
        spec.w_cr
    } else {
        0.0
    }
}

/// Crack contribution `φ (w²/12)(I − n⊗n)` with `n = ∇φ/|∇φ|`; zero where
/// `|∇φ| < 1e-8/ℓ`.
pub fn crack_permeability(phi: f64, grad_phi: [f64; 2], spec: &CrackSpec) -> Tensor2 {
    let w = crack_opening(phi, spec);
    let g = grad_phi[0].hypot(grad_phi[1]);
    if w == 0.0 || phi <= 0.0 || g < 1e-8 / spec.ell {
        return [[0.0; 2]; 2];
    }
    let n = [grad_phi[0] / g, grad_phi[1] / g];
    let kc = phi * w * w / 12.0;
    [[kc * (1.0 - n[0] * n[0]), -kc * n[0] * n[1]], [-kc * n[1] * n[0], kc * (1.0 - n[1] * n[1])]]
}

/// Total intrinsic permeability `k_m(θ) I + K_c` at one point.
pub fn permeability_tensor(
    theta: f64,
    phi: f64,
    grad_phi: [f64; 2],
    spec: &CrackSpec,
    params: &MaterialParams,
) -> Result<Tensor2> {
    let km = bulk_permeability(theta, params)?;
    let mut k = crack_permeability(phi, grad_phi, spec);
    k[0][0] += km;
    k[1][1] += km;
    Ok(k)
}

/// Regularized cracks of a scenario, evaluated once at setup.
#[derive(Clone, Debug)]
pub struct CrackField {
    /// Pointwise maximum of the individual phase fields (nodal).
    pub phi: Vec<f64>,
    /// Summed crack permeability per quadrature point.
    pub k_crack: Vec<Tensor2>,
    /// `φ` interpolated to quadrature points.
    pub phi_qp: Vec<f64>,
}

impl CrackField {
    pub fn none(mesh: &Mesh) -> Self {
        let nq = mesh.num_elements() * QP_PER_ELEMENT;
        Self { phi: vec![0.0; mesh.num_nodes()], k_crack: vec![[[0.0; 2]; 2]; nq], phi_qp: vec![0.0; nq] }
    }

    pub fn build(mesh: &Mesh, cracks: &[CrackSpec]) -> Result<Self> {
        let mut out = Self::none(mesh);
        for spec in cracks {
            let phi = regularize_crack(mesh, spec)?;
            let grads = mesh.gradient_at_quadrature(&phi)?;
            for (e, conn) in mesh.elements().iter().enumerate() {
                for (q, qp) in mesh.quad_points(e).iter().enumerate() {
                    let v: f64 = (0..4).map(|a| qp.shape[a] * phi[conn[a]]).sum();
                    let kc = crack_permeability(v, grads[e][q], spec);
                    let idx = e * QP_PER_ELEMENT + q;
                    for i in 0..2 {
                        for j in 0..2 {
                            out.k_crack[idx][i][j] += kc[i][j];
                        }
                    }
                    out.phi_qp[idx] = out.phi_qp[idx].max(v);
                }
            }
            for (a, b) in out.phi.iter_mut().zip(&phi) {
                *a = a.max(*b);
            }
        }
        Ok(out)
    }
}
