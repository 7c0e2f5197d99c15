//! Self-check suite on tiny meshes: identities and invariants that must
//! hold for any correct build, cheap enough to run from the command line.

use std::time::Instant;

use crate::constitutive::{capillary_pressure, saturation_from_humidity, IsothermBranch, MaterialParams, Saturation};
use crate::error::Result;
use crate::mesh::{Mesh, RectMeshSpec};
use crate::phasefield::{CrackField, CrackSeeds, CrackSpec};
use crate::solver::{
    jacobian_mismatch, BoundaryCondition, BoundaryValue, FieldState, Problem, Stepper, TimeStepPlan, Unknown,
};

/// Outcome of one check.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type CheckFn = fn(usize) -> Result<(bool, String)>;

const CHECKS: [(&str, CheckFn); 8] = [
    ("isotherm_round_trip", isotherm_round_trip),
    ("uniform_state_is_steady", uniform_state_is_steady),
    ("jacobian_matches_finite_differences", jacobian_matches_fd),
    ("zero_flux_conserves_water", zero_flux_conserves_water),
    ("wetting_obeys_maximum_principle", wetting_obeys_maximum_principle),
    ("dirichlet_values_held", dirichlet_values_held),
    ("concentrations_stay_in_range", concentrations_stay_in_range),
    ("phase_field_bounded", phase_field_bounded),
];

/// Run every check on an `n × n` mesh. Errors inside a check count as a
/// failure of that check.
pub fn run_suite(n: usize) -> Vec<Check> {
    CHECKS
        .iter()
        .map(|(name, f)| {
            let t0 = Instant::now();
            let (passed, detail) = match f(n.max(2)) {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            Check { name, passed, detail, seconds: t0.elapsed().as_secs_f64() }
        })
        .collect()
}

const SIDE: f64 = 0.004;

fn square(n: usize) -> Result<Mesh> {
    RectMeshSpec::uniform(SIDE, SIDE, n, n).build()
}

fn problem(n: usize, bcs: Vec<BoundaryCondition>, carbonation: bool, cracks: &[CrackSpec]) -> Result<Problem> {
    let mesh = square(n)?;
    let nn = mesh.num_nodes();
    let cr = if cracks.is_empty() { CrackField::none(&mesh) } else { CrackField::build(&mesh, cracks)? };
    Problem::new(mesh, MaterialParams::wetting(), IsothermBranch::Wetting, vec![0.15; nn], cr, bcs, carbonation)
}

fn diagonal_crack() -> CrackSpec {
    CrackSpec { seeds: CrackSeeds::Segments(vec![[[0.0, 0.0], [SIDE, SIDE]]]), ell: SIDE / 4.0, w_cr: 1e-5, phi_t: 0.5 }
}

/// Smooth, non-uniform state for the checks.
fn wavy(mesh: &Mesh, params: &MaterialParams, t: f64) -> FieldState {
    let f = |x: &[f64; 2]| (x[0] / SIDE * 2.1).sin() * (x[1] / SIDE * 1.3).cos();
    let nodes = mesh.nodes();
    FieldState {
        t,
        s: nodes.iter().map(|x| 0.5 + 0.2 * f(x)).collect(),
        c: nodes.iter().map(|x| 2.0 + f(x)).collect(),
        ch: nodes.iter().map(|x| params.c_caoh2_0 * (0.6 + 0.3 * f(x))).collect(),
    }
}

fn dirichlet(marker: &str, unknown: Unknown, v: f64) -> BoundaryCondition {
    BoundaryCondition { marker: marker.into(), unknown, value: BoundaryValue::Constant(v) }
}

fn tight_plan(t_end: f64) -> TimeStepPlan {
    TimeStepPlan { t_end, dt_init: t_end / 8.0, dt_max: t_end / 8.0, newton_tol: 1e-13, ..TimeStepPlan::default() }
}

fn isotherm_round_trip(_: usize) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for p in [MaterialParams::wetting(), MaterialParams::drying()] {
        for k in 1..100 {
            let h = k as f64 / 100.0;
            let s = saturation_from_humidity(h, &p)?;
            let pc = capillary_pressure(s, &p)?;
            let h_back = (-pc * p.molar_mass_water / (p.rho_l * p.gas_constant * p.temperature)).exp();
            worst = worst.max(((h_back - h) / h).abs());
        }
        let s = Saturation::new(0.5)?;
        let back = saturation_from_humidity(
            (-capillary_pressure(s, &p)? * p.molar_mass_water / (p.rho_l * p.gas_constant * p.temperature)).exp(),
            &p,
        )?;
        worst = worst.max((back.value() - 0.5).abs() / 0.5);
    }
    Ok((worst <= 1e-10, format!("max relative error {worst:.3e} (limit 1e-10)")))
}

fn uniform_state_is_steady(n: usize) -> Result<(bool, String)> {
    let p = problem(n, vec![dirichlet("left", Unknown::Saturation, 0.6)], false, &[diagonal_crack()])?;
    let init = FieldState::uniform(p.mesh.num_nodes(), 0.6, 0.0, p.params.c_caoh2_0);
    let mut st = Stepper::new(&p, tight_plan(1000.0))?;
    let end = st.integrate(init.clone(), &[], None, |_, _| Ok(()))?;
    let worst = end.s.iter().map(|s| (s - 0.6).abs()).fold(0.0, f64::max);
    Ok((worst <= 1e-12, format!("max |S - S0| {worst:.3e} (limit 1e-12)")))
}

fn jacobian_matches_fd(n: usize) -> Result<(bool, String)> {
    let p = problem(n, vec![], true, &[diagonal_crack()])?;
    let old = wavy(&p.mesh, &p.params, 0.0);
    let mut new = wavy(&p.mesh, &p.params, 60.0);
    new.s.iter_mut().for_each(|s| *s += 0.01);
    new.ch.iter_mut().for_each(|c| *c *= 0.95);
    let err = jacobian_mismatch(&p.jacobian(&new, &old)?, &p.jacobian_fd(&new, &old, 1e-6)?);
    Ok((err <= 1e-5, format!("max column mismatch {err:.3e} (limit 1e-5)")))
}

fn zero_flux_conserves_water(n: usize) -> Result<(bool, String)> {
    let p = problem(n, vec![], false, &[diagonal_crack()])?;
    let mut state = wavy(&p.mesh, &p.params, 0.0);
    let mut st = Stepper::new(&p, tight_plan(3600.0))?;
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let w0 = p.water_content(&state);
        let next = match st.step(&state, 600.0)? {
            Ok(o) => o.state,
            Err(f) => return Ok((false, format!("step failed: {f:?}"))),
        };
        worst = worst.max((p.water_content(&next) - w0).abs() / w0);
        state = next;
    }
    Ok((worst <= 1e-10, format!("max relative change per step {worst:.3e} (limit 1e-10)")))
}

fn wetting_obeys_maximum_principle(n: usize) -> Result<(bool, String)> {
    let (s0, s_bar) = (0.3, 0.9);
    let p = problem(n, vec![dirichlet("left", Unknown::Saturation, s_bar)], false, &[])?;
    let init = FieldState::uniform(p.mesh.num_nodes(), s0, 0.0, p.params.c_caoh2_0);
    let mut st = Stepper::new(&p, TimeStepPlan { t_end: 1e5, dt_init: 1.0, dt_max: 1e4, ..TimeStepPlan::default() })?;
    let mut violation: f64 = 0.0;
    st.integrate(init, &[], None, |s, _| {
        for &v in &s.s {
            violation = violation.max(s0 - v).max(v - s_bar);
        }
        Ok(())
    })?;
    Ok((violation <= 1e-9, format!("max excursion outside [{s0}, {s_bar}] {violation:.3e} (limit 1e-9)")))
}

fn dirichlet_values_held(n: usize) -> Result<(bool, String)> {
    let bcs = vec![dirichlet("left", Unknown::Saturation, 0.8), dirichlet("left", Unknown::Co2, 8.0)];
    let p = problem(n, bcs, true, &[])?;
    let init = FieldState::uniform(p.mesh.num_nodes(), 0.5, 0.0, p.params.c_caoh2_0);
    let mut st = Stepper::new(&p, TimeStepPlan { t_end: 600.0, dt_init: 10.0, ..TimeStepPlan::default() })?;
    let end = st.integrate(init, &[], None, |_, _| Ok(()))?;
    let nodes = p.mesh.boundary_nodes("left")?;
    let worst = nodes.iter().map(|&i| (end.s[i] - 0.8).abs().max((end.c[i] - 8.0).abs() / 8.0)).fold(0.0, f64::max);
    Ok((worst == 0.0, format!("max deviation {worst:.3e} (must be exact)")))
}

fn concentrations_stay_in_range(n: usize) -> Result<(bool, String)> {
    let bcs = vec![dirichlet("left", Unknown::Saturation, 0.6), dirichlet("left", Unknown::Co2, 8.3)];
    let p = problem(n, bcs, true, &[diagonal_crack()])?;
    let c0 = p.params.c_caoh2_0;
    let init = FieldState::uniform(p.mesh.num_nodes(), 0.6, 0.0, c0);
    let mut st =
        Stepper::new(&p, TimeStepPlan { t_end: 86_400.0, dt_init: 1.0, dt_max: 3600.0, ..TimeStepPlan::default() })?;
    let mut ok = true;
    st.integrate(init, &[], None, |s, _| {
        ok &= s.c.iter().all(|&c| c >= 0.0) && s.ch.iter().all(|&c| (0.0..=c0).contains(&c));
        ok &= s.s.iter().all(|&v| v > 0.0 && v < 1.0);
        Ok(())
    })?;
    Ok((ok, format!("{} negative-concentration clamps", st.stats.negative_concentration_clamps)))
}

fn phase_field_bounded(n: usize) -> Result<(bool, String)> {
    let mesh = square(n)?;
    let crack = diagonal_crack();
    let field = CrackField::build(&mesh, std::slice::from_ref(&crack))?;
    let seeds = crack.seed_nodes(&mesh)?;
    let bounded = field.phi.iter().all(|p| (0.0..=1.0).contains(p));
    let pinned = seeds.iter().all(|&i| field.phi[i] == 1.0);
    Ok((bounded && pinned && !seeds.is_empty(), format!("{} seed nodes, φ ∈ [0, 1]: {bounded}", seeds.len())))
}
