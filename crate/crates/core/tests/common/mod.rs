//! Verification experiments shared by the integration test targets.
//!
//! Each function runs one experiment and returns what it measured, so the
//! focused tests and the acceptance suite can apply their own limits and
//! report the numbers.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use carbsim::constitutive::{
    bulk_permeability, capillary_pressure, co2_diffusivity, corrosion_current_density, d2pc_ds2, dkr_ds, dpc_ds,
    kelvin_pc, moisture_conductance, neutralization_rate, ph_from_caoh2, porosity_from_front, relative_permeability,
    saturation_from_humidity,
};
use carbsim::mesh::Mesh;
use carbsim::phasefield::{CrackField, CrackSeeds, CrackSpec};
use carbsim::solver::{jacobian_mismatch, MassLumping};
use carbsim::{
    BoundaryCondition, BoundaryValue, FieldState, IsothermBranch, MaterialParams, Problem, RectMeshSpec, Saturation,
    Stepper, TimeStepPlan, Unknown,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// Relative difference, falling back to the absolute one at a zero reference.
pub fn rel_diff(value: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        value.abs()
    } else {
        ((value - reference) / reference).abs()
    }
}

/// Observed convergence orders between consecutive `(step, error)` pairs.
pub fn observed_orders(ladder: &[(f64, f64)]) -> Vec<f64> {
    ladder.windows(2).map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln()).collect()
}

// ---------------------------------------------------------------------------
// Closed-form material laws

#[derive(Clone, Debug)]
pub struct OracleRow {
    pub law: String,
    pub branch: String,
    pub x: Vec<f64>,
    pub value: f64,
}

/// Reference values of the material laws from the arbitrary-precision oracle.
pub fn constitutive_oracle() -> Vec<OracleRow> {
    let mut r = csv::Reader::from_path(data_file("constitutive_oracle.csv")).expect("oracle file");
    r.records()
        .map(|rec| {
            let rec = rec.expect("oracle row");
            OracleRow {
                law: rec[0].to_string(),
                branch: rec[1].to_string(),
                x: (2..5).filter_map(|k| rec[k].parse().ok()).collect(),
                value: rec[5].parse().expect("oracle value"),
            }
        })
        .collect()
}

pub fn params_for(branch: &str) -> MaterialParams {
    match branch {
        "drying" => MaterialParams::drying(),
        _ => MaterialParams::wetting(),
    }
}

/// Evaluate the law named by an oracle row at the row's inputs.
pub fn evaluate_law(row: &OracleRow) -> carbsim::Result<f64> {
    let p = params_for(&row.branch);
    let x = &row.x;
    Ok(match row.law.as_str() {
        "capillary_pressure" => capillary_pressure(Saturation::new(x[0])?, &p)?,
        "dpc_ds" => dpc_ds(Saturation::new(x[0])?, &p)?,
        "relative_permeability" => relative_permeability(Saturation::new(x[0])?, &p),
        "saturation_from_humidity" => saturation_from_humidity(x[0], &p)?.value(),
        "bulk_permeability" => bulk_permeability(x[0], &p)?,
        "kelvin_pc" => kelvin_pc(x[0], &p)?,
        "co2_diffusivity" => co2_diffusivity(x[0], Saturation::new(x[1])?, x[2]),
        "neutralization_rate" => neutralization_rate(x[0], x[1], &p),
        "corrosion_current_density" => corrosion_current_density(x[0], x[1], &p),
        "ph" => ph_from_caoh2(x[0]),
        "porosity_from_front" => porosity_from_front(x[0], &p),
        other => panic!("oracle row for unknown law {other:?}"),
    })
}

/// Largest relative deviation from the oracle, the row where it occurs and
/// the number of rows checked.
pub fn oracle_mismatch() -> (f64, String, usize) {
    let rows = constitutive_oracle();
    let mut worst = (0.0, String::new());
    for row in &rows {
        let got = evaluate_law(row).unwrap_or_else(|e| panic!("{row:?}: {e}"));
        let d = rel_diff(got, row.value);
        if d > worst.0 || d.is_nan() {
            worst = (d, format!("{} ({}) at {:?}", row.law, row.branch, row.x));
        }
    }
    (worst.0, worst.1, rows.len())
}

/// Largest relative mismatch between the analytic derivatives and central
/// differences with step 1e-7, on 50 points in (0.05, 0.95), both branches.
pub fn derivative_mismatch() -> (f64, String) {
    let h = 1e-7;
    let mut worst = (0.0, String::new());
    for (name, p) in [("wetting", MaterialParams::wetting()), ("drying", MaterialParams::drying())] {
        let sat = |s: f64| Saturation::new(s).unwrap();
        let pc = |s: f64| capillary_pressure(sat(s), &p).unwrap();
        let dpc = |s: f64| dpc_ds(sat(s), &p).unwrap();
        let kr = |s: f64| relative_permeability(sat(s), &p);
        let g = |s: f64| moisture_conductance(s, &p).0;
        for k in 0..50 {
            let s = 0.05 + 0.9 * (k as f64 + 0.5) / 50.0;
            let central = |f: &dyn Fn(f64) -> f64| (f(s + h) - f(s - h)) / (2.0 * h);
            let checks = [
                ("dpc_ds", dpc(s), central(&pc)),
                ("d2pc_ds2", d2pc_ds2(sat(s), &p).unwrap(), central(&dpc)),
                ("dkr_ds", dkr_ds(sat(s), &p).unwrap(), central(&kr)),
                ("conductance", moisture_conductance(s, &p).1, central(&g)),
            ];
            for (law, analytic, fd) in checks {
                let d = rel_diff(analytic, fd);
                if d > worst.0 {
                    worst = (d, format!("{law} ({name}) at s={s}"));
                }
            }
        }
    }
    worst
}

/// Largest relative deviation of `capillary_pressure(saturation_from_humidity(h))`
/// from the Kelvin pressure for h ∈ {0.10, 0.11, …, 0.99}, both branches.
pub fn isotherm_round_trip() -> f64 {
    let mut worst: f64 = 0.0;
    for p in [MaterialParams::wetting(), MaterialParams::drying()] {
        for k in 10..100 {
            let h = k as f64 / 100.0;
            let pc = capillary_pressure(saturation_from_humidity(h, &p).unwrap(), &p).unwrap();
            worst = worst.max(rel_diff(pc, kelvin_pc(h, &p).unwrap()));
        }
    }
    worst
}

/// Humidities in (0.01, 0.99) where the wetting and drying isotherms cross,
/// located by bisection.
pub fn isotherm_crossings() -> Vec<f64> {
    let (w, d) = (MaterialParams::wetting(), MaterialParams::drying());
    let gap =
        |h: f64| saturation_from_humidity(h, &w).unwrap().value() - saturation_from_humidity(h, &d).unwrap().value();
    let grid: Vec<f64> = (1..=99).map(|k| k as f64 / 100.0).collect();
    let mut out = Vec::new();
    for pair in grid.windows(2) {
        let (mut a, mut b) = (pair[0], pair[1]);
        if gap(a).signum() == gap(b).signum() {
            continue;
        }
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if gap(m).signum() == gap(a).signum() {
                a = m;
            } else {
                b = m;
            }
        }
        out.push(0.5 * (a + b));
    }
    out
}

// ---------------------------------------------------------------------------
// Manufactured solutions

/// Exact solution `S(x, t)` with its time derivative, gradient and Laplacian.
pub type Exact = Arc<dyn Fn([f64; 2], f64) -> (f64, f64, [f64; 2], f64) + Send + Sync>;

pub const MMS_THETA: f64 = 0.15;
pub const MMS_SIDE: f64 = 0.01;

/// Moisture diffusivity `g(S)·K/θ` of the manufactured problems at S = 0.5.
pub fn mms_diffusivity() -> f64 {
    let p = MaterialParams::wetting();
    moisture_conductance(0.5, &p).0 * bulk_permeability(MMS_THETA, &p).unwrap() / MMS_THETA
}

/// Water source that makes `exact` solve `θ ∂S/∂t − ∇·(g(S) K ∇S) = f`.
fn manufactured_source(exact: Exact, p: &MaterialParams) -> carbsim::solver::SourceFn {
    let k = bulk_permeability(MMS_THETA, p).unwrap();
    let p = p.clone();
    Arc::new(move |x, t| {
        let (s, s_t, grad, lap) = exact(x, t);
        let (g, dg) = moisture_conductance(s, &p);
        MMS_THETA * s_t - k * (dg * (grad[0] * grad[0] + grad[1] * grad[1]) + g * lap)
    })
}

/// L2 norm of `field − exact` over the mesh (2×2 Gauss).
pub fn l2_error(mesh: &Mesh, field: &[f64], exact: impl Fn([f64; 2]) -> f64) -> f64 {
    let mut e2 = 0.0;
    for (e, conn) in mesh.elements().iter().enumerate() {
        for qp in mesh.quad_points(e) {
            let uh: f64 = (0..4).map(|a| qp.shape[a] * field[conn[a]]).sum();
            e2 += (uh - exact(qp.coord)).powi(2) * qp.weight;
        }
    }
    e2.sqrt()
}

/// Integrate the forced water equation with a fixed step and return the
/// L2 error at `t_end`. Every side is held at the exact (constant) value 0.5.
fn run_manufactured(mesh: Mesh, sides: &[&str], exact: Exact, t_end: f64, dt: f64, storage: MassLumping) -> f64 {
    let params = MaterialParams::wetting();
    let nn = mesh.num_nodes();
    let bcs = sides
        .iter()
        .map(|m| BoundaryCondition {
            marker: m.to_string(),
            unknown: Unknown::Saturation,
            value: BoundaryValue::Constant(0.5),
        })
        .collect();
    let cracks = CrackField::none(&mesh);
    let mut p =
        Problem::new(mesh, params.clone(), IsothermBranch::Wetting, vec![MMS_THETA; nn], cracks, bcs, false).unwrap();
    p.storage = storage;
    p.water_source = Some(manufactured_source(exact.clone(), &params));
    let s0: Vec<f64> = p.mesh.nodes().iter().map(|&x| exact(x, 0.0).0).collect();
    let init = FieldState { t: 0.0, s: s0, c: vec![0.0; nn], ch: vec![params.c_caoh2_0; nn] };
    let plan = TimeStepPlan {
        t_end,
        dt_init: dt,
        dt_min: dt * 1e-3,
        dt_max: dt,
        newton_tol: 1e-12,
        newton_step_tol: 1e-14,
        growth: 1.0,
        ..TimeStepPlan::default()
    };
    let mut st = Stepper::new(&p, plan).unwrap();
    let end = st.integrate(init, &[], None, |_, _| Ok(())).unwrap();
    assert_eq!(st.stats.rejected_steps, 0, "manufactured run rejected steps");
    l2_error(&p.mesh, &end.s, |x| exact(x, t_end).0)
}

/// Spatial ladder: `S = 0.5 + 0.2·sin(πx/L)·sin(πy/L)·(1 − t/2τ)` on an
/// `n × n` square. Linear in time, so implicit Euler adds no time error and
/// the L2 error is purely spatial. Returns `(h, error)` per level.
pub fn mms_space_ladder(levels: &[usize]) -> Vec<(f64, f64)> {
    let l = MMS_SIDE;
    let tau = l * l / (2.0 * PI * PI * mms_diffusivity());
    let k = PI / l;
    let exact: Exact = Arc::new(move |x: [f64; 2], t: f64| {
        let (sx, cx, sy, cy) = ((k * x[0]).sin(), (k * x[0]).cos(), (k * x[1]).sin(), (k * x[1]).cos());
        let a = 0.2 * (1.0 - t / (2.0 * tau));
        let a_t = -0.2 / (2.0 * tau);
        (0.5 + a * sx * sy, a_t * sx * sy, [a * k * cx * sy, a * k * sx * cy], -2.0 * k * k * a * sx * sy)
    });
    levels
        .iter()
        .map(|&n| {
            let mesh = RectMeshSpec::uniform(l, l, n, n).build().unwrap();
            let err = run_manufactured(
                mesh,
                &["left", "right", "bottom", "top"],
                exact.clone(),
                tau,
                tau / 4.0,
                MassLumping::Lumped,
            );
            (l / n as f64, err)
        })
        .collect()
}

/// Temporal ladder: `S = 0.5 + 0.2·sin(πx/L)·e^{−t/τ}` on a finely resolved
/// strip, integrated to `τ` with `steps` fixed steps. Returns `(dt, error)`.
pub fn mms_time_ladder(steps: &[usize]) -> Vec<(f64, f64)> {
    let l = MMS_SIDE;
    let tau = l * l / (PI * PI * mms_diffusivity());
    let k = PI / l;
    let exact: Exact = Arc::new(move |x: [f64; 2], t: f64| {
        let a = 0.2 * (-t / tau).exp();
        let (sx, cx) = ((k * x[0]).sin(), (k * x[0]).cos());
        (0.5 + a * sx, -a / tau * sx, [a * k * cx, 0.0], -k * k * a * sx)
    });
    let nx = 400;
    steps
        .iter()
        .map(|&m| {
            let mesh = RectMeshSpec::uniform(l, l / nx as f64, nx, 1).build().unwrap();
            let dt = tau / m as f64;
            (dt, run_manufactured(mesh, &["left", "right"], exact.clone(), tau, dt, MassLumping::Lumped))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Discrete invariants

fn crack_across(side: f64, ell: f64) -> CrackSpec {
    CrackSpec {
        seeds: CrackSeeds::Segments(vec![[[0.0, 0.1 * side], [side, 0.9 * side]]]),
        ell,
        w_cr: 5e-6,
        phi_t: 0.5,
    }
}

/// Smooth non-uniform state on a square of side `side`.
pub fn wavy_state(mesh: &Mesh, params: &MaterialParams, side: f64, t: f64) -> FieldState {
    let f = |x: &[f64; 2]| (x[0] / side * 2.1).sin() * (x[1] / side * 1.3).cos();
    let nodes = mesh.nodes();
    FieldState {
        t,
        s: nodes.iter().map(|x| 0.5 + 0.2 * f(x)).collect(),
        c: nodes.iter().map(|x| 2.0 + f(x)).collect(),
        ch: nodes.iter().map(|x| params.c_caoh2_0 * (0.6 + 0.3 * f(x))).collect(),
    }
}

/// Largest relative change of the total water content over single steps of
/// a cracked square with zero flux everywhere (carbonation off).
pub fn zero_flux_water_drift() -> f64 {
    let side = 0.02;
    let mut spec = RectMeshSpec::uniform(side, side, 16, 16);
    spec.refine.push(carbsim::mesh::Refinement {
        min: [0.0, 0.0],
        max: [side / 2.0, side],
        size: [side / 40.0, side / 40.0],
    });
    let mesh = spec.build().unwrap();
    let cracks = CrackField::build(&mesh, &[crack_across(side, side / 20.0)]).unwrap();
    let params = MaterialParams::wetting();
    let theta0: Vec<f64> = mesh.nodes().iter().map(|x| 0.12 + 0.04 * x[0] / side).collect();
    let p = Problem::new(mesh, params.clone(), IsothermBranch::Wetting, theta0, cracks, vec![], false).unwrap();
    let mut state = wavy_state(&p.mesh, &params, side, 0.0);
    let plan = TimeStepPlan { t_end: 1e6, newton_tol: 1e-11, newton_step_tol: 1e-14, ..TimeStepPlan::default() };
    let mut st = Stepper::new(&p, plan).unwrap();
    let mut worst: f64 = 0.0;
    for dt in [1.0, 10.0, 100.0, 1e3, 1e4, 1e5] {
        let w0 = p.water_content(&state);
        let next = st.step(&state, dt).unwrap().expect("step converges").state;
        worst = worst.max(rel_diff(p.water_content(&next), w0));
        state = next;
    }
    worst
}

/// Largest column-relative mismatch between the analytic and the
/// finite-difference Jacobian on 3×3-element random states with all three
/// unknowns active, one state per seed.
///
/// A crack adds a water flux many orders larger than the Ca(OH)₂ coupling
/// of the water rows, and the difference quotient of that coupling drowns
/// in round-off once the flux is large enough. The fixture crack is
/// therefore narrow (5 µm), and cracked states are only used on the
/// wetting branch, whose bulk permeability keeps the coupling resolvable.
pub fn jacobian_random_mismatch(seeds: std::ops::Range<u64>, branch: IsothermBranch, cracked: bool) -> f64 {
    let side = 0.003;
    let mesh = RectMeshSpec::uniform(side, side, 3, 3).build().unwrap();
    let nn = mesh.num_nodes();
    let cracks = if cracked {
        CrackField::build(&mesh, &[crack_across(side, side / 3.0)]).unwrap()
    } else {
        CrackField::none(&mesh)
    };
    let mut worst: f64 = 0.0;
    for seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = MaterialParams::for_branch(branch);
        let c0 = params.c_caoh2_0;
        let theta0: Vec<f64> = (0..nn).map(|_| rng.random_range(0.12..0.2)).collect();
        let bcs = vec![
            BoundaryCondition {
                marker: "left".into(),
                unknown: Unknown::Saturation,
                value: BoundaryValue::Constant(0.7),
            },
            BoundaryCondition { marker: "left".into(), unknown: Unknown::Co2, value: BoundaryValue::Constant(5.0) },
        ];
        let p = Problem::new(mesh.clone(), params, branch, theta0, cracks.clone(), bcs, true).unwrap();
        let mut draw = |lo: f64, hi: f64| -> Vec<f64> { (0..nn).map(|_| rng.random_range(lo..hi)).collect() };
        let old = FieldState { t: 0.0, s: draw(0.2, 0.8), c: draw(0.5, 8.0), ch: draw(0.2 * c0, c0) };
        let new = FieldState { t: 30.0, s: draw(0.2, 0.8), c: draw(0.5, 8.0), ch: draw(0.1 * c0, 0.9 * c0) };
        let analytic = p.jacobian(&new, &old).unwrap();
        let fd = p.jacobian_fd(&new, &old, 1e-6).unwrap();
        worst = worst.max(jacobian_mismatch(&analytic, &fd));
    }
    worst
}

/// Jacobian mismatch over every configuration the finite-difference oracle
/// can resolve: both branches uncracked, and the wetting branch cracked.
pub fn jacobian_mismatch_all() -> f64 {
    [
        jacobian_random_mismatch(0..4, IsothermBranch::Wetting, false),
        jacobian_random_mismatch(4..8, IsothermBranch::Drying, false),
        jacobian_random_mismatch(8..12, IsothermBranch::Wetting, true),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Closed carbonating cell

#[derive(Clone, Copy, Debug)]
pub struct CellRecord {
    pub t: f64,
    pub co2: f64,
    pub caoh2: f64,
    pub saturation: f64,
}

/// Reference trajectory of the closed cell from the adaptive ODE oracle.
pub fn carbonation_cell_oracle() -> Vec<CellRecord> {
    let mut r = csv::Reader::from_path(data_file("carbonation_0d_oracle.csv")).expect("oracle file");
    r.deserialize::<(f64, f64, f64, f64)>()
        .map(|row| {
            let (t, co2, caoh2, saturation) = row.expect("oracle row");
            CellRecord { t, co2, caoh2, saturation }
        })
        .collect()
}

/// Closed single-element cell: S = 0.6, 20 % CO₂ in the pore gas and the
/// full Ca(OH)₂ inventory at t = 0, no boundary conditions.
pub fn carbonation_cell() -> (Problem, FieldState) {
    let mesh = RectMeshSpec::uniform(0.01, 0.01, 1, 1).build().unwrap();
    let params = MaterialParams::wetting();
    let c = params.co2_from_volume_fraction(0.2);
    let init = FieldState::uniform(4, 0.6, c, params.c_caoh2_0);
    let cracks = CrackField::none(&mesh);
    let p = Problem::new(mesh, params.clone(), IsothermBranch::Wetting, vec![params.theta_0; 4], cracks, vec![], true)
        .unwrap();
    (p, init)
}

/// Simulate the closed cell and return its node-0 state at each of `times`.
/// Every node must carry the same value (the cell is spatially uniform).
pub fn simulate_cell(times: &[f64], dt_init: f64, dt_max: f64, growth: f64) -> Vec<CellRecord> {
    let (p, init) = carbonation_cell();
    let t_end = times.iter().cloned().fold(0.0, f64::max);
    let plan = TimeStepPlan {
        t_end,
        dt_init,
        dt_min: dt_init * 1e-6,
        dt_max,
        growth,
        newton_tol: 1e-13,
        newton_step_tol: 1e-15,
        newton_max_iter: 40,
        ..TimeStepPlan::default()
    };
    let mut st = Stepper::new(&p, plan).unwrap();
    let eps = 1e-9 * t_end.max(1.0);
    let mut out = Vec::new();
    st.integrate(init, times, None, |s, _| {
        if times.iter().any(|&t| (t - s.t).abs() <= eps) {
            for v in [&s.s, &s.c, &s.ch] {
                let spread = v.iter().map(|&x| (x - v[0]).abs()).fold(0.0, f64::max);
                assert!(spread <= 1e-12 * v[0].abs().max(1e-30), "closed cell lost uniformity at t={}", s.t);
            }
            out.push(CellRecord { t: s.t, co2: s.c[0], caoh2: s.ch[0], saturation: s.s[0] });
        }
        Ok(())
    })
    .unwrap();
    out
}
