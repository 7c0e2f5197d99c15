//! Fully implicit time integration of the coupled moisture / CO₂ /
//! Ca(OH)₂ system.
//!
//! Each step solves one monolithic Newton problem with an analytic
//! Jacobian; failed steps are retried with a smaller time step.

mod assembly;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constitutive::{
    carbonation_front, ph_from_caoh2, porosity, saturation_from_humidity, IsothermBranch, MaterialParams, S_MIN,
};
use crate::error::{Error, Result};
use crate::linalg::LinearSolver;
use crate::mesh::{CscMatrix, Mesh, SparsityPattern};
use crate::phasefield::CrackField;

use assembly::{C, CH, S};

/// Nodal state of the three primary unknowns at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub t: f64,
    /// Liquid saturation.
    pub s: Vec<f64>,
    /// Gaseous CO₂ concentration, mol/m³ of gas-filled pore space.
    pub c: Vec<f64>,
    /// Ca(OH)₂ concentration, mol/m³.
    pub ch: Vec<f64>,
}

impl FieldState {
    pub fn uniform(n: usize, s: f64, c: f64, ch: f64) -> Self {
        Self { t: 0.0, s: vec![s; n], c: vec![c; n], ch: vec![ch; n] }
    }

    pub fn num_nodes(&self) -> usize {
        self.s.len()
    }

    /// Carbonation front variable per node.
    pub fn varphi(&self, params: &MaterialParams) -> Vec<f64> {
        self.ch.iter().map(|&ch| carbonation_front(ch, params.c_caoh2_0)).collect()
    }

    pub fn ph(&self) -> Vec<f64> {
        self.ch.iter().map(|&ch| ph_from_caoh2(ch)).collect()
    }

    /// Porosity per node given the initial porosity field.
    pub fn theta(&self, theta0: &[f64], params: &MaterialParams) -> Vec<f64> {
        self.ch
            .iter()
            .zip(theta0)
            .map(|(&ch, &t0)| porosity(t0, params.theta_c, carbonation_front(ch, params.c_caoh2_0)))
            .collect()
    }

    fn check_finite(&self) -> bool {
        self.s.iter().chain(&self.c).chain(&self.ch).all(|v| v.is_finite())
    }
}

/// Unknown a boundary condition acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unknown {
    Saturation,
    Co2,
}

/// Prescribed boundary value, possibly time dependent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryValue {
    Constant(f64),
    /// Saturation in equilibrium with a relative humidity (sorption isotherm).
    Humidity(f64),
    /// CO₂ concentration of air with this CO₂ volume fraction (ideal gas).
    VolumeFraction(f64),
    /// `mean + amplitude·sin(2π t / period + phase)`, `t` and `period` in s.
    Sinusoid {
        mean: f64,
        amplitude: f64,
        period: f64,
        phase: f64,
    },
}

impl BoundaryValue {
    pub fn eval(&self, t: f64, params: &MaterialParams) -> Result<f64> {
        Ok(match *self {
            BoundaryValue::Constant(v) => v,
            BoundaryValue::Humidity(h) => saturation_from_humidity(h, params)?.value(),
            BoundaryValue::VolumeFraction(f) => params.co2_from_volume_fraction(f),
            BoundaryValue::Sinusoid { mean, amplitude, period, phase } => {
                mean + amplitude * (2.0 * std::f64::consts::PI * t / period + phase).sin()
            }
        })
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            BoundaryValue::Constant(v) => v.is_finite(),
            BoundaryValue::Humidity(h) => h > 0.0 && h <= 1.0,
            BoundaryValue::VolumeFraction(f) => (0.0..=1.0).contains(&f),
            BoundaryValue::Sinusoid { mean, amplitude, period, phase } => {
                mean.is_finite() && amplitude.is_finite() && period > 0.0 && phase.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Scenario(format!("invalid boundary value {self:?}")))
        }
    }
}

/// Dirichlet condition on all nodes of a marker. Markers without a
/// condition for an unknown are zero-flux for it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryCondition {
    pub marker: String,
    pub unknown: Unknown,
    pub value: BoundaryValue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeStepPlan {
    pub t_end: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Tolerance on the scaled nodal residual (max norm).
    pub newton_tol: f64,
    /// Tolerance on the scaled Newton update (max norm).
    pub newton_step_tol: f64,
    pub newton_max_iter: usize,
    pub growth: f64,
    pub shrink: f64,
}

impl Default for TimeStepPlan {
    fn default() -> Self {
        Self {
            t_end: 0.0,
            dt_init: 1.0,
            dt_min: 1e-6,
            dt_max: 86_400.0,
            newton_tol: 1e-8,
            newton_step_tol: 1e-10,
            newton_max_iter: 25,
            growth: 1.2,
            shrink: 0.5,
        }
    }
}

impl TimeStepPlan {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::param("time_plan", m.to_string()));
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be finite and non-negative");
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return bad("require 0 < dt_min <= dt_init <= dt_max");
        }
        if !(self.newton_tol > 0.0 && self.newton_step_tol > 0.0) || self.newton_max_iter == 0 {
            return bad("tolerances must be positive and newton_max_iter >= 1");
        }
        if !(self.growth >= 1.0 && self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("require growth >= 1 and 0 < shrink < 1");
        }
        Ok(())
    }
}

/// Treatment of the water storage term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassLumping {
    #[default]
    Lumped,
    /// Consistent (Galerkin) mass for the water storage term only.
    Consistent,
}

pub type SourceFn = Arc<dyn Fn([f64; 2], f64) -> f64 + Send + Sync>;

/// A discretized problem ready for time integration.
#[derive(Clone)]
pub struct Problem {
    pub mesh: Mesh,
    pub params: MaterialParams,
    pub branch: IsothermBranch,
    /// Initial (uncarbonated) porosity per node.
    pub theta0: Vec<f64>,
    pub cracks: CrackField,
    pub bcs: Vec<BoundaryCondition>,
    pub carbonation: bool,
    pub storage: MassLumping,
    /// Volumetric water source `f(x, t)` added to the water balance
    /// (verification only).
    pub water_source: Option<SourceFn>,
    lumped: Vec<f64>,
    bc_nodes: Vec<Vec<usize>>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("nodes", &self.mesh.num_nodes())
            .field("elements", &self.mesh.num_elements())
            .field("branch", &self.branch)
            .field("carbonation", &self.carbonation)
            .field("bcs", &self.bcs)
            .finish_non_exhaustive()
    }
}

impl Problem {
    pub fn new(
        mesh: Mesh,
        params: MaterialParams,
        branch: IsothermBranch,
        theta0: Vec<f64>,
        cracks: CrackField,
        bcs: Vec<BoundaryCondition>,
        carbonation: bool,
    ) -> Result<Self> {
        params.validate()?;
        if theta0.len() != mesh.num_nodes() {
            return Err(Error::FieldLength { expected: mesh.num_nodes(), got: theta0.len() });
        }
        if let Some(t) = theta0.iter().find(|&&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::param("theta_0", format!("nodal porosity {t} outside (0, 1)")));
        }
        if cracks.phi.len() != mesh.num_nodes() {
            return Err(Error::FieldLength { expected: mesh.num_nodes(), got: cracks.phi.len() });
        }
        let mut bc_nodes = Vec::with_capacity(bcs.len());
        for (k, bc) in bcs.iter().enumerate() {
            bc.value.validate()?;
            if bcs[..k].iter().any(|o| o.marker == bc.marker && o.unknown == bc.unknown) {
                return Err(Error::Scenario(format!(
                    "marker `{}` has more than one {:?} condition",
                    bc.marker, bc.unknown
                )));
            }
            bc_nodes.push(mesh.boundary_nodes(&bc.marker)?);
        }
        let lumped = mesh.lumped_mass();
        Ok(Self {
            mesh,
            params,
            branch,
            theta0,
            cracks,
            bcs,
            carbonation,
            storage: MassLumping::Lumped,
            water_source: None,
            lumped,
            bc_nodes,
        })
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped
    }

    /// Dirichlet values `(node, unknown, value)` at time `t`, in condition
    /// order (later conditions win at shared nodes).
    pub fn dirichlet_values(&self, t: f64) -> Result<Vec<(usize, Unknown, f64)>> {
        let mut out = Vec::new();
        for (bc, nodes) in self.bcs.iter().zip(&self.bc_nodes) {
            let mut v = bc.value.eval(t, &self.params)?;
            if bc.unknown == Unknown::Saturation {
                v = v.clamp(S_MIN, 1.0 - S_MIN);
            } else {
                v = v.max(0.0);
            }
            out.extend(nodes.iter().map(|&n| (n, bc.unknown, v)));
        }
        Ok(out)
    }

    /// Total water volume `Σ m_i θ_i S_i` (lumped quadrature).
    pub fn water_content(&self, state: &FieldState) -> f64 {
        let th = state.theta(&self.theta0, &self.params);
        self.lumped.iter().zip(&th).zip(&state.s).map(|((m, t), s)| m * t * s).sum()
    }

    /// Overwrite Dirichlet nodes of `state` with the boundary values at `state.t`.
    pub fn apply_dirichlet(&self, state: &mut FieldState) -> Result<()> {
        for (n, u, v) in self.dirichlet_values(state.t)? {
            match u {
                Unknown::Saturation => state.s[n] = v,
                Unknown::Co2 => state.c[n] = v,
            }
        }
        Ok(())
    }

    /// Per-field implicit-Euler residuals (Dirichlet rows not substituted).
    pub fn residual(&self, new: &FieldState, old: &FieldState) -> Result<Residuals> {
        self.check_state(new)?;
        self.check_state(old)?;
        let dt = new.t - old.t;
        let n = self.mesh.num_nodes();
        let mut r = vec![0.0; 3 * n];
        assembly::assemble(self, 3, new, old, dt, &mut r, None);
        Ok(Residuals {
            water: (0..n).map(|i| r[3 * i + S]).collect(),
            co2: (0..n).map(|i| r[3 * i + C]).collect(),
            caoh2: (0..n).map(|i| r[3 * i + CH]).collect(),
        })
    }

    /// Analytic Jacobian of the full three-field residual (dense, rows and
    /// columns interleaved per node), without Dirichlet substitution.
    pub fn jacobian(&self, new: &FieldState, old: &FieldState) -> Result<Vec<Vec<f64>>> {
        self.check_state(new)?;
        let n = self.mesh.num_nodes();
        let mut j = CscMatrix::zeros(Arc::new(SparsityPattern::for_mesh(&self.mesh, 3)));
        let mut r = vec![0.0; 3 * n];
        assembly::assemble(self, 3, new, old, new.t - old.t, &mut r, Some(&mut j));
        Ok(j.to_dense())
    }

    /// Central finite-difference Jacobian, column by column, with relative
    /// perturbation `eps`.
    pub fn jacobian_fd(&self, new: &FieldState, old: &FieldState, eps: f64) -> Result<Vec<Vec<f64>>> {
        self.check_state(new)?;
        let n = self.mesh.num_nodes();
        let u0 = assembly::pack(new, 3);
        let dt = new.t - old.t;
        let mut jac = vec![vec![0.0; 3 * n]; 3 * n];
        let mut rp = vec![0.0; 3 * n];
        let mut rm = vec![0.0; 3 * n];
        for col in 0..3 * n {
            let h = eps
                * u0[col].abs().max(match col % 3 {
                    S => 1e-2,
                    C => 1e-3,
                    _ => 1e-2 * self.params.c_caoh2_0,
                });
            let mut u = u0.clone();
            u[col] = u0[col] + h;
            assembly::assemble(self, 3, &assembly::unpack(&u, 3, new, new.t), old, dt, &mut rp, None);
            u[col] = u0[col] - h;
            assembly::assemble(self, 3, &assembly::unpack(&u, 3, new, new.t), old, dt, &mut rm, None);
            for row in 0..3 * n {
                jac[row][col] = (rp[row] - rm[row]) / (2.0 * h);
            }
        }
        Ok(jac)
    }

    /// Column-wise relative mismatch between the analytic Jacobian and
    /// central finite differences, over the given columns only (interleaved
    /// `node * 3 + field` numbering). Suitable for large meshes.
    pub fn jacobian_spot_check(&self, new: &FieldState, old: &FieldState, columns: &[usize], eps: f64) -> Result<f64> {
        self.check_state(new)?;
        let n = 3 * self.mesh.num_nodes();
        if let Some(&bad) = columns.iter().find(|&&c| c >= n) {
            return Err(Error::param("column", format!("{bad} out of range 0..{n}")));
        }
        let mut jac = CscMatrix::zeros(Arc::new(SparsityPattern::for_mesh(&self.mesh, 3)));
        let u0 = assembly::pack(new, 3);
        let dt = new.t - old.t;
        let mut rp = vec![0.0; n];
        let mut rm = vec![0.0; n];
        assembly::assemble(self, 3, new, old, dt, &mut rp, Some(&mut jac));
        let mut worst: f64 = 0.0;
        for &col in columns {
            let h = eps
                * u0[col].abs().max(match col % 3 {
                    S => 1e-2,
                    C => 1e-3,
                    _ => 1e-2 * self.params.c_caoh2_0,
                });
            let mut u = u0.clone();
            u[col] = u0[col] + h;
            assembly::assemble(self, 3, &assembly::unpack(&u, 3, new, new.t), old, dt, &mut rp, None);
            u[col] = u0[col] - h;
            assembly::assemble(self, 3, &assembly::unpack(&u, 3, new, new.t), old, dt, &mut rm, None);
            let (mut diff, mut scale): (f64, f64) = (0.0, 0.0);
            for row in 0..n {
                let fd = (rp[row] - rm[row]) / (2.0 * h);
                scale = scale.max(fd.abs());
                diff = diff.max((jac.get(row, col) - fd).abs());
            }
            if scale > 0.0 {
                worst = worst.max(diff / scale);
            } else if diff > 0.0 {
                worst = f64::INFINITY;
            }
        }
        Ok(worst)
    }

    fn check_state(&self, s: &FieldState) -> Result<()> {
        let n = self.mesh.num_nodes();
        for len in [s.s.len(), s.c.len(), s.ch.len()] {
            if len != n {
                return Err(Error::FieldLength { expected: n, got: len });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Residuals {
    pub water: Vec<f64>,
    pub co2: Vec<f64>,
    pub caoh2: Vec<f64>,
}

/// Largest column-wise relative deviation between two dense Jacobians:
/// `max_j ‖A[:,j] − B[:,j]‖∞ / ‖B[:,j]‖∞` over columns with non-zero `B`.
pub fn jacobian_mismatch(analytic: &[Vec<f64>], reference: &[Vec<f64>]) -> f64 {
    let n = reference.len();
    let mut worst: f64 = 0.0;
    for col in 0..n {
        let scale = (0..n).map(|r| reference[r][col].abs()).fold(0.0, f64::max);
        let diff = (0..n).map(|r| (analytic[r][col] - reference[r][col]).abs()).fold(0.0, f64::max);
        if scale > 0.0 {
            worst = worst.max(diff / scale);
        } else if diff > 0.0 {
            worst = f64::INFINITY;
        }
    }
    worst
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolverStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub newton_iterations: usize,
    /// Largest post-solve clamp applied to an accepted state.
    pub max_clamp: f64,
    /// Accepted steps in which a negative concentration had to be lifted to zero.
    pub negative_concentration_clamps: usize,
    pub water_only_steps: usize,
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: FieldState,
    pub newton_iterations: usize,
    pub clamp: f64,
    pub water_only: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepFailure {
    NoConvergence { iterations: usize, residual: f64 },
    NonFinite,
    Linear(String),
}

struct Workspace {
    nf: usize,
    jac: CscMatrix,
    solver: LinearSolver,
}

/// Advances a [`Problem`] one implicit step at a time.
pub struct Stepper<'a> {
    problem: &'a Problem,
    plan: TimeStepPlan,
    workspaces: Vec<Workspace>,
    pub stats: SolverStats,
}

impl<'a> Stepper<'a> {
    pub fn new(problem: &'a Problem, plan: TimeStepPlan) -> Result<Self> {
        plan.validate()?;
        Ok(Self { problem, plan, workspaces: Vec::new(), stats: SolverStats::default() })
    }

    pub fn plan(&self) -> &TimeStepPlan {
        &self.plan
    }

    fn take_workspace(&mut self, nf: usize) -> Workspace {
        if let Some(k) = self.workspaces.iter().position(|w| w.nf == nf) {
            return self.workspaces.swap_remove(k);
        }
        let pattern = Arc::new(SparsityPattern::for_mesh(&self.problem.mesh, nf));
        Workspace { nf, jac: CscMatrix::zeros(pattern), solver: LinearSolver::new() }
    }

    /// One implicit-Euler step of size `dt` from `old`.
    pub fn step(&mut self, old: &FieldState, dt: f64) -> Result<std::result::Result<StepOutcome, StepFailure>> {
        let p = self.problem;
        let dir = p.dirichlet_values(old.t + dt)?;
        let inert = old.c.iter().all(|&c| c == 0.0) && dir.iter().all(|&(_, u, v)| u != Unknown::Co2 || v == 0.0);
        let nf = if p.carbonation && !inert { 3 } else { 1 };
        let mut ws = self.take_workspace(nf);
        let out = newton(p, &self.plan, &mut ws, old, dt, &dir);
        self.workspaces.push(ws);
        Ok(out.map(|(state, iters, clamp, negative)| {
            self.stats.newton_iterations += iters;
            self.stats.max_clamp = self.stats.max_clamp.max(clamp);
            if negative {
                self.stats.negative_concentration_clamps += 1;
            }
            StepOutcome { state, newton_iterations: iters, clamp, water_only: nf == 1 }
        }))
    }

    /// Integrate from `initial` to `plan.t_end`, landing exactly on every
    /// time in `output_times`. `observer(state, is_output_time)` is called
    /// for the initial state and after every accepted step.
    pub fn integrate(
        &mut self,
        initial: FieldState,
        output_times: &[f64],
        dump_dir: Option<&Path>,
        mut observer: impl FnMut(&FieldState, bool) -> Result<()>,
    ) -> Result<FieldState> {
        let mut outs: Vec<f64> = output_times.iter().copied().filter(|t| t.is_finite()).collect();
        outs.sort_by(f64::total_cmp);
        outs.dedup();
        let t_end = self.plan.t_end;
        let eps = 1e-9 * t_end.max(1.0);
        let mut state = initial;
        let is_out = |t: f64| outs.iter().any(|o| (o - t).abs() <= eps);
        observer(&state, is_out(state.t))?;
        let mut dt = self.plan.dt_init;
        while state.t < t_end - eps {
            let next = outs.iter().copied().find(|&o| o > state.t + eps).unwrap_or(t_end).min(t_end);
            let remaining = next - state.t;
            let clipped = dt >= remaining - eps;
            let dt_try = if clipped { remaining } else { dt };
            match self.step(&state, dt_try)? {
                Ok(out) => {
                    self.stats.accepted_steps += 1;
                    if out.water_only {
                        self.stats.water_only_steps += 1;
                    }
                    let mut new = out.state;
                    if clipped {
                        new.t = next;
                    }
                    if !new.check_finite() {
                        return Err(Error::Scenario("non-finite state after accepted step".into()));
                    }
                    state = new;
                    observer(&state, is_out(state.t))?;
                    if !clipped || dt_try >= dt {
                        dt = (dt * self.plan.growth).min(self.plan.dt_max);
                    }
                }
                Err(_) => {
                    self.stats.rejected_steps += 1;
                    dt = dt_try * self.plan.shrink;
                    if dt < self.plan.dt_min {
                        let dump = dump_dir.and_then(|d| dump_state(d, &self.problem.mesh, &state).ok());
                        return Err(Error::StepUnderflow { t: state.t, dt, dump });
                    }
                }
            }
        }
        Ok(state)
    }
}

type NewtonResult = std::result::Result<(FieldState, usize, f64, bool), StepFailure>;

fn newton(
    p: &Problem,
    plan: &TimeStepPlan,
    ws: &mut Workspace,
    old: &FieldState,
    dt: f64,
    dir: &[(usize, Unknown, f64)],
) -> NewtonResult {
    let par = &p.params;
    let t_new = old.t + dt;
    let nf = ws.nf;

    let theta_ref = p.theta0.iter().cloned().fold(0.0, f64::max);
    let c_scale =
        dir.iter().filter(|d| d.1 == Unknown::Co2).map(|d| d.2).chain(old.c.iter().copied()).fold(0.0, f64::max);
    let c_scale = if c_scale > 0.0 { c_scale } else { 1.0 };
    let res_scale = [theta_ref, theta_ref * c_scale, par.c_caoh2_0];
    let upd_scale = [1.0, c_scale, par.c_caoh2_0];

    let mut u = assembly::pack(old, nf);
    let mut dof_dir: Vec<(usize, f64)> = Vec::new();
    for &(n, unk, v) in dir {
        match unk {
            Unknown::Saturation => dof_dir.push((n * nf + S, v)),
            Unknown::Co2 if nf == 3 => dof_dir.push((n * nf + C, v)),
            Unknown::Co2 => {}
        }
    }
    for &(d, v) in &dof_dir {
        u[d] = v;
    }
    let mut is_dir = vec![false; u.len()];
    for &(d, _) in &dof_dir {
        is_dir[d] = true;
    }

    let m = &p.lumped;
    let mut res = vec![0.0; u.len()];
    let mut last_clamp = 0.0;
    let mut negative = false;
    let mut residual = f64::INFINITY;
    for iter in 0..=plan.newton_max_iter {
        let state = assembly::unpack(&u, nf, old, t_new);
        assembly::assemble(p, nf, &state, old, dt, &mut res, Some(&mut ws.jac));
        for &(d, v) in &dof_dir {
            res[d] = u[d] - v;
            ws.jac.set_identity_row(d);
        }
        residual = 0.0;
        for (k, r) in res.iter().enumerate() {
            let f = k % nf;
            let scaled = if is_dir[k] { r.abs() / upd_scale[f] } else { r.abs() * dt / (m[k / nf] * res_scale[f]) };
            residual = residual.max(scaled);
        }
        if !residual.is_finite() {
            return Err(StepFailure::NonFinite);
        }
        if residual <= plan.newton_tol {
            return Ok((state, iter, last_clamp, negative));
        }
        if iter == plan.newton_max_iter {
            break;
        }
        let mut delta: Vec<f64> = res.iter().map(|r| -r).collect();
        if let Err(e) = ws.solver.solve(&ws.jac, &mut delta) {
            return Err(StepFailure::Linear(e.to_string()));
        }
        // Limit saturation updates to keep iterates in the basin.
        let max_ds = (0..u.len() / nf).map(|i| delta[i * nf + S].abs()).fold(0.0, f64::max);
        let lambda = if max_ds > 0.5 { 0.5 / max_ds } else { 1.0 };
        let mut step_norm: f64 = 0.0;
        last_clamp = 0.0;
        negative = false;
        for (k, d) in delta.iter().enumerate() {
            let f = k % nf;
            let raw = u[k] + lambda * d;
            let clamped = match f {
                S => raw.clamp(S_MIN, 1.0 - S_MIN),
                C => raw.max(0.0),
                _ => raw.clamp(0.0, par.c_caoh2_0),
            };
            if clamped != raw {
                last_clamp = f64::max(last_clamp, (clamped - raw).abs() / upd_scale[f]);
                if f != S && raw < -1e-12 * upd_scale[f] {
                    negative = true;
                }
            }
            step_norm = step_norm.max((clamped - u[k]).abs() / upd_scale[f]);
            u[k] = clamped;
        }
        if !u.iter().all(|v| v.is_finite()) {
            return Err(StepFailure::NonFinite);
        }
        if lambda == 1.0 && step_norm <= plan.newton_step_tol {
            let state = assembly::unpack(&u, nf, old, t_new);
            return Ok((state, iter + 1, last_clamp, negative));
        }
    }
    Err(StepFailure::NoConvergence { iterations: plan.newton_max_iter, residual })
}

/// Write a diagnostic CSV of the last good state; returns its path.
pub fn dump_state(dir: &Path, mesh: &Mesh, state: &FieldState) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("abort_state.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["x [m]", "y [m]", "saturation [-]", "co2 [mol/m3]", "caoh2 [mol/m3]"])?;
    for (i, x) in mesh.nodes().iter().enumerate() {
        w.write_record([x[0], x[1], state.s[i], state.c[i], state.ch[i]].map(|v| format!("{v:.16e}")))?;
    }
    w.flush()?;
    Ok(path)
}
