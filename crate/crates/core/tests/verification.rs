mod common;

use carbsim::cases::{case1_drying, case4_carbonation, case5_cyclic, DAY};
use carbsim::constitutive::saturation_from_humidity;
use carbsim::phasefield::{regularize_crack, CrackField, CrackSeeds, CrackSpec};
use carbsim::{
    run_scenario, BoundaryCondition, BoundaryValue, FieldState, IsothermBranch, MaterialParams, Problem, RectMeshSpec,
    RunOptions, Stepper, TimeStepPlan, Unknown,
};
use common::*;

#[test]
fn manufactured_solution_converges_second_order_in_space() {
    let ladder = mms_space_ladder(&[8, 16, 32, 64]);
    let orders = observed_orders(&ladder);
    assert!(orders.iter().all(|&p| p >= 1.8), "{ladder:?} → {orders:?}");
}

#[test]
fn manufactured_solution_converges_first_order_in_time() {
    let ladder = mms_time_ladder(&[8, 16, 32, 64]);
    let orders = observed_orders(&ladder);
    assert!(orders.iter().all(|&p| p >= 0.9), "{ladder:?} → {orders:?}");
}

#[test]
fn zero_flux_steps_conserve_water() {
    let drift = zero_flux_water_drift();
    assert!(drift <= 1e-10, "{drift:e}");
}

#[test]
fn analytic_jacobian_matches_finite_differences_on_random_states() {
    let worst = jacobian_mismatch_all();
    assert!(worst <= 1e-5, "{worst:e}");
}

#[test]
fn closed_cell_matches_ode_oracle_over_56_days() {
    let oracle: Vec<CellRecord> = carbonation_cell_oracle().into_iter().filter(|r| r.t >= DAY).collect();
    assert_eq!(oracle.len(), 56);
    let times: Vec<f64> = oracle.iter().map(|r| r.t).collect();
    let sim = simulate_cell(&times, 1e-5, DAY, 1.2);
    assert_eq!(sim.len(), oracle.len());
    let c0 = MaterialParams::wetting().c_caoh2_0;
    for (a, b) in sim.iter().zip(&oracle) {
        assert!((a.caoh2 - b.caoh2).abs() / c0 <= 1e-6, "{a:?} vs {b:?}");
        assert!(rel_diff(a.co2, b.co2) <= 1e-6, "{a:?} vs {b:?}");
        assert!(rel_diff(a.saturation, b.saturation) <= 1e-6, "{a:?} vs {b:?}");
    }
}

#[test]
fn closed_cell_transient_converges_first_order_to_the_oracle() {
    let t = 5e-3;
    let reference = carbonation_cell_oracle().into_iter().find(|r| r.t == t).expect("oracle row at 5 ms");
    let ladder: Vec<(f64, f64)> = [10, 20, 40, 80]
        .iter()
        .map(|&n| {
            let dt = t / n as f64;
            let sim = simulate_cell(&[t], dt, dt, 1.0);
            (dt, (sim[0].caoh2 - reference.caoh2).abs())
        })
        .collect();
    let orders = observed_orders(&ladder);
    assert!(orders.iter().all(|&p| p >= 0.9), "{ladder:?} → {orders:?}");
}

#[test]
fn closed_cell_conserves_water_and_carbon() {
    let (p, init) = carbonation_cell();
    let sim = simulate_cell(&[1.0], 1e-4, 0.1, 1.2);
    let theta = |ch: f64| p.params.theta_0 + (1.0 - ch / p.params.c_caoh2_0) * (p.params.theta_c - p.params.theta_0);
    let (s0, c0, ch0) = (init.s[0], init.c[0], init.ch[0]);
    let end = sim[0];
    let water0 = theta(ch0) * s0;
    assert!(rel_diff(theta(end.caoh2) * end.saturation, water0) <= 1e-12);
    // CO₂ in the gas minus Ca(OH)₂ is invariant under the reaction
    let carbon = |c: f64, ch: f64| (theta(ch) - water0) * c - ch;
    assert!(rel_diff(carbon(end.co2, end.caoh2), carbon(c0, ch0)) <= 1e-10);
}

/// Isotropic square with one Dirichlet side, optionally on a graded mesh.
/// (Crack tensors are strongly anisotropic; bilinear elements then lose the
/// M-matrix property, so the principle is only asserted for isotropic media.)
fn isotropic_problem(n: usize, s_bar: f64, graded: bool) -> Problem {
    let side = 0.01;
    let mut spec = RectMeshSpec::uniform(side, side, n, n);
    if graded {
        spec.growth = 1.15;
        spec.refine.push(carbsim::mesh::Refinement {
            min: [0.0, 0.0],
            max: [side / 4.0, side],
            size: [side / (4.0 * n as f64), side / n as f64],
        });
    }
    let mesh = spec.build().unwrap();
    let nn = mesh.num_nodes();
    let bc = BoundaryCondition {
        marker: "left".into(),
        unknown: Unknown::Saturation,
        value: BoundaryValue::Constant(s_bar),
    };
    let cracks = CrackField::none(&mesh);
    Problem::new(mesh, MaterialParams::wetting(), IsothermBranch::Wetting, vec![0.15; nn], cracks, vec![bc], false)
        .unwrap()
}

#[test]
fn saturation_respects_the_discrete_maximum_principle() {
    for (s0, s_bar, graded) in [(0.3f64, 0.95, false), (0.3, 0.95, true), (0.8, 0.2, true)] {
        let p = isotropic_problem(16, s_bar, graded);
        let (lo, hi) = (s0.min(s_bar), s0.max(s_bar));
        let init = FieldState::uniform(p.mesh.num_nodes(), s0, 0.0, p.params.c_caoh2_0);
        let plan = TimeStepPlan { t_end: 1e5, dt_init: 0.1, dt_max: 1e4, ..TimeStepPlan::default() };
        let mut st = Stepper::new(&p, plan).unwrap();
        let mut violation: f64 = 0.0;
        st.integrate(init, &[], None, |s, _| {
            violation = s.s.iter().fold(violation, |v, &x| v.max(lo - x).max(x - hi));
            Ok(())
        })
        .unwrap();
        assert!(violation <= 1e-8, "s0={s0} s̄={s_bar} graded={graded}: {violation:e}");
    }
}

#[test]
fn carbonation_is_monotone_at_every_node() {
    let mut sc = case4_carbonation(0.6);
    sc.time.t_end = 7.0 * DAY;
    sc.snapshot_times.clear();
    let (p, init) = sc.setup().unwrap();
    let mut st = Stepper::new(&p, sc.time.clone()).unwrap();
    let mut prev = init.clone();
    let mut worst_rise: f64 = 0.0;
    st.integrate(init, &[], None, |s, _| {
        for (new, old) in s.ch.iter().zip(&prev.ch) {
            worst_rise = worst_rise.max(new - old);
        }
        prev = s.clone();
        Ok(())
    })
    .unwrap();
    assert!(worst_rise <= 1e-14 * p.params.c_caoh2_0, "Ca(OH)₂ rose by {worst_rise:e}");
    assert_eq!(st.stats.negative_concentration_clamps, 0);
    assert!(st.stats.accepted_steps > 10);
}

#[test]
fn inert_carbonation_reproduces_water_transport_bitwise() {
    let plain = case1_drying();
    let mut with_chem = plain.clone();
    with_chem.carbonation = true;
    let a = run_scenario(&plain, &RunOptions::default()).unwrap();
    let b = run_scenario(&with_chem, &RunOptions::default()).unwrap();
    assert_eq!(a.final_state.s, b.final_state.s);
    assert_eq!(a.probes.series("mass_loss"), b.probes.series("mass_loss"));
}

#[test]
fn case1_first_step_holds_boundary_saturation() {
    let sc = case1_drying();
    let (p, init) = sc.setup().unwrap();
    let mut st = Stepper::new(&p, sc.time.clone()).unwrap();
    let out = st.step(&init, sc.time.dt_init).unwrap().expect("first step converges");
    assert!(out.newton_iterations <= sc.time.newton_max_iter);
    let s_bar = saturation_from_humidity(0.5, &MaterialParams::drying()).unwrap().value();
    for n in p.mesh.boundary_nodes("exposed").unwrap() {
        assert_eq!(out.state.s[n], s_bar);
    }
}

/// Phase field of a straight crack through a strip, sampled 2ℓ from the
/// crack, against the exact solution of `φ − ℓ²φ'' = 0` with natural ends.
fn phase_field_probe_error(elements_per_ell: usize) -> (f64, f64) {
    let ell = 1e-3;
    let (width, x0) = (20.0 * ell, 5.0 * ell);
    let n = 20 * elements_per_ell;
    let mesh = RectMeshSpec::uniform(width, ell, n, 1).build().unwrap();
    let spec = CrackSpec { seeds: CrackSeeds::Segments(vec![[[x0, 0.0], [x0, ell]]]), ell, w_cr: 1e-5, phi_t: 0.5 };
    let phi = regularize_crack(&mesh, &spec).unwrap();
    let x = x0 + 2.0 * ell;
    let exact = ((width - x) / ell).cosh() / ((width - x0) / ell).cosh();
    let got = mesh.interpolate(&phi, [x, 0.5 * ell]).unwrap();
    (ell / elements_per_ell as f64, (got - exact).abs())
}

#[test]
fn phase_field_converges_second_order_beyond_one_seventh_ell() {
    let ladder: Vec<(f64, f64)> = [7, 14, 28, 56].iter().map(|&k| phase_field_probe_error(k)).collect();
    let orders = observed_orders(&ladder);
    assert!(orders.iter().all(|&p| p >= 1.8), "{ladder:?} → {orders:?}");
    // self-convergence: successive refinements change the probe value less each time
    let diffs: Vec<f64> = ladder.windows(2).map(|w| (w[0].1 - w[1].1).abs()).collect();
    assert!(diffs.windows(2).all(|d| d[1] < d[0]), "{diffs:?}");
}

fn case5_coarse(boundary: Option<f64>) -> Vec<f64> {
    let mut sc = case5_cyclic(false);
    sc.mesh.nx = 25;
    sc.mesh.ny = 25;
    sc.probes.clear();
    if let Some(s) = boundary {
        sc.boundary[0].value = BoundaryValue::Constant(s);
    }
    let r = run_scenario(&sc, &RunOptions::default()).unwrap();
    r.final_state.varphi(&r.problem.params)
}

#[test]
fn cyclic_wetting_carbonates_like_the_wet_bound() {
    let cyclic = case5_coarse(None);
    let dry = case5_coarse(Some(0.4));
    let wet = case5_coarse(Some(0.8));
    assert!(cyclic.iter().zip(&dry).all(|(c, d)| *c >= d - 1e-9));
    let mesh = case5_cyclic(false);
    let mut spec = mesh.mesh;
    spec.nx = 25;
    spec.ny = 25;
    let mesh = spec.build().unwrap();
    let diff: Vec<f64> = cyclic.iter().zip(&wet).map(|(c, w)| c - w).collect();
    let norm = |v: &[f64]| l2_error(&mesh, v, |_| 0.0);
    assert!(norm(&diff) <= 0.1 * norm(&wet), "{} vs {}", norm(&diff), norm(&wet));
}
