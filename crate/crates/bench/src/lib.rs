//! Shared fixtures for the solver benchmarks: case-study problems with a
//! state one step into the run.

use carbsim::cases::{case3_cracked_wetting, case4_carbonation, case5_cyclic};
use carbsim::{FieldState, Problem, Scenario};

/// A problem with the state at the start of a step and a trial state at its
/// end, both away from uniform so every term of the residual is active.
pub struct Fixture {
    pub name: &'static str,
    pub problem: Problem,
    pub old: FieldState,
    pub new: FieldState,
}

/// Step size the trial state is taken at.
pub const STEP: f64 = 600.0;

pub fn fixture(name: &'static str, scenario: &Scenario) -> Fixture {
    let (problem, old) = scenario.setup().expect("preset scenarios are valid");
    let mut new = old.clone();
    new.t = old.t + STEP;
    for (i, s) in new.s.iter_mut().enumerate() {
        *s = (*s + 1e-3 * ((i % 7) as f64 - 3.0)).clamp(1e-3, 0.999);
    }
    for (i, c) in new.c.iter_mut().enumerate() {
        *c += 1e-2 * (i % 5) as f64;
    }
    problem.apply_dirichlet(&mut new).expect("fields match the mesh");
    Fixture { name, problem, old, new }
}

/// One-dimensional carbonation column (200 elements, three fields).
pub fn column() -> Fixture {
    fixture("case4_rh70", &case4_carbonation(0.7))
}

/// Reinforced section with a rebar hole (50 × 50 elements, three fields).
pub fn section() -> Fixture {
    fixture("case5", &case5_cyclic(false))
}

/// The same section with two refined cracks.
pub fn cracked_section() -> Fixture {
    fixture("case5_cracked", &case5_cyclic(true))
}

/// Scenarios whose mesh and crack field construction is benchmarked.
pub fn geometry_scenarios() -> Vec<(&'static str, Scenario)> {
    vec![("case3", case3_cracked_wetting()), ("case5_cracked", case5_cyclic(true))]
}
