//! Scenario description, the five built-in case studies and their
//! observables.

mod observables;
mod presets;

pub use observables::{
    carbonation_depth, corrosion_onset_time, depassivation_caoh2, front_depth, relative_mass_loss, threshold_depth,
    wet_region_extents,
};
pub use presets::{
    case1_drying, case2_wetting, case3, case3_cracked_wetting, case4_carbonation, case5_cyclic, preset, preset_by_name,
    CASE4_RH_LEVELS, CASE5_POINT_A, DAY, HOUR, PRESET_NAMES,
};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::constitutive::{corrosion_current_density, ph_from_caoh2, IsothermBranch, MaterialParams, PH_DEPASSIVATION};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, RectMeshSpec};
use crate::phasefield::{CrackField, CrackSpec};
use crate::solver::{BoundaryCondition, BoundaryValue, FieldState, Problem, SolverStats, Stepper, TimeStepPlan};

macro_rules! material_spec {
    ($($field:ident),* $(,)?) => {
        /// Isotherm branch plus optional overrides of individual constants.
        #[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct MaterialSpec {
            pub branch: IsothermBranch,
            $(
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub $field: Option<f64>,
            )*
        }

        impl MaterialSpec {
            pub fn new(branch: IsothermBranch) -> Self {
                Self { branch, $($field: None,)* }
            }

            /// Branch defaults with overrides applied, validated.
            pub fn resolve(&self) -> Result<MaterialParams> {
                let mut p = MaterialParams::for_branch(self.branch);
                $(
                    if let Some(v) = self.$field {
                        p.$field = v;
                    }
                )*
                p.validate()?;
                Ok(p)
            }
        }
    };
}

material_spec!(
    alpha,
    beta,
    perm_const,
    viscosity,
    rho_s,
    rho_l,
    molar_mass_water,
    gas_constant,
    temperature,
    p_atm,
    theta_0,
    theta_c,
    henry,
    k_n,
    c_oh_eq,
    c_caoh2_0,
    i_max,
    k_fit,
    theta_crit,
    phi_t,
);

/// Porosity varying linearly from `surface` at the marked facets to the
/// bulk `theta_0` at distance `thickness`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradedPorosity {
    pub marker: String,
    pub thickness: f64,
    pub surface: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConditions {
    /// Uniform initial saturation, directly or via relative humidity.
    pub saturation: BoundaryValue,
    #[serde(default)]
    pub co2: f64,
    /// Initial Ca(OH)₂; defaults to the material's `c_caoh2_0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caoh2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    /// Relative water mass loss, %.
    MassLoss,
    /// Total water volume `∫θS dV`, m³ per metre of thickness.
    WaterContent,
    Saturation {
        point: [f64; 2],
    },
    Ph {
        point: [f64; 2],
    },
    /// Corrosion current density, µA/cm², zero while the pH at the point
    /// is above the depassivation threshold. `theta` overrides the local
    /// porosity in the current-density law.
    CorrosionCurrent {
        point: [f64; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<f64>,
    },
    /// Depth reached by pH ≤ 9 from the marked surface, m.
    CarbonationDepth {
        marker: String,
    },
    /// Depth reached by carbonation front ≥ 0.5 from the marked surface, m.
    FrontDepth {
        marker: String,
    },
}

impl ProbeKind {
    pub fn unit(&self) -> &'static str {
        match self {
            ProbeKind::MassLoss => "%",
            ProbeKind::WaterContent => "m2",
            ProbeKind::Saturation { .. } | ProbeKind::Ph { .. } => "-",
            ProbeKind::CorrosionCurrent { .. } => "uA/cm2",
            ProbeKind::CarbonationDepth { .. } | ProbeKind::FrontDepth { .. } => "m",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub name: String,
    pub kind: ProbeKind,
    /// Write this probe only at the snapshot times instead of after every
    /// accepted step.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub at_snapshots: bool,
}

/// Complete description of one simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub mesh: RectMeshSpec,
    pub material: MaterialSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graded_porosity: Option<GradedPorosity>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cracks: Vec<CrackSpec>,
    pub initial: InitialConditions,
    #[serde(default)]
    pub boundary: Vec<BoundaryCondition>,
    pub time: TimeStepPlan,
    #[serde(default)]
    pub carbonation: bool,
    #[serde(default)]
    pub probes: Vec<ProbeSpec>,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

impl Scenario {
    /// Build the mesh, cracks and problem, and the initial state.
    pub fn setup(&self) -> Result<(Problem, FieldState)> {
        let params = self.material.resolve()?;
        let mesh = self.mesh.build()?;
        let theta0 = self.porosity_field(&mesh, &params)?;
        for c in &self.cracks {
            c.validate()?;
        }
        let cracks = CrackField::build(&mesh, &self.cracks)?;
        let s0 = self.initial.saturation.eval(0.0, &params)?;
        if !(0.0..=1.0).contains(&s0) {
            return Err(Error::Scenario(format!("initial saturation {s0} outside [0, 1]")));
        }
        let ch0 = self.initial.caoh2.unwrap_or(params.c_caoh2_0);
        if !(self.initial.co2 >= 0.0) || !(0.0..=params.c_caoh2_0).contains(&ch0) {
            return Err(Error::Scenario("initial concentrations out of range".into()));
        }
        let n = mesh.num_nodes();
        let problem =
            Problem::new(mesh, params, self.material.branch, theta0, cracks, self.boundary.clone(), self.carbonation)?;
        let s0 = s0.clamp(crate::constitutive::S_MIN, 1.0 - crate::constitutive::S_MIN);
        let state = FieldState::uniform(n, s0, self.initial.co2, ch0);
        for p in &self.probes {
            if let ProbeKind::CarbonationDepth { marker } | ProbeKind::FrontDepth { marker } = &p.kind {
                problem.mesh.marker_id(marker)?;
            }
        }
        Ok((problem, state))
    }

    fn porosity_field(&self, mesh: &Mesh, params: &MaterialParams) -> Result<Vec<f64>> {
        let Some(g) = &self.graded_porosity else {
            return Ok(vec![params.theta_0; mesh.num_nodes()]);
        };
        if !(g.thickness > 0.0 && g.surface > params.theta_c && g.surface < 1.0) {
            return Err(Error::Scenario("graded porosity needs thickness > 0 and theta_c < surface < 1".into()));
        }
        let d = mesh.distance_to_marker(&g.marker)?;
        Ok(d.iter()
            .map(|&d| {
                let f = (d / g.thickness).min(1.0);
                g.surface + f * (params.theta_0 - g.surface)
            })
            .collect())
    }
}

/// Time series of all probes of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProbeSeries {
    pub names: Vec<String>,
    pub units: Vec<&'static str>,
    pub records: Vec<ProbeRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeRecord {
    pub t: f64,
    pub values: Vec<f64>,
}

impl ProbeSeries {
    /// Values of one probe with their times.
    pub fn series(&self, name: &str) -> Option<(Vec<f64>, Vec<f64>)> {
        let k = self.names.iter().position(|n| n == name)?;
        Some((self.records.iter().map(|r| r.t).collect(), self.records.iter().map(|r| r.values[k]).collect()))
    }
}

/// Value at the point, falling back to the nearest node when the point
/// lies in a removed (void) region.
fn point_value(mesh: &Mesh, field: &[f64], point: [f64; 2]) -> f64 {
    mesh.interpolate(field, point).unwrap_or_else(|| field[mesh.nearest_node(point)])
}

pub fn evaluate_probe(probe: &ProbeKind, problem: &Problem, state: &FieldState, state0: &FieldState) -> Result<f64> {
    let mesh = &problem.mesh;
    Ok(match probe {
        ProbeKind::MassLoss => relative_mass_loss(problem, state, state0)?,
        ProbeKind::WaterContent => problem.water_content(state),
        ProbeKind::Saturation { point } => point_value(mesh, &state.s, *point),
        ProbeKind::Ph { point } => ph_from_caoh2(point_value(mesh, &state.ch, *point)),
        ProbeKind::CorrosionCurrent { point, theta } => {
            if ph_from_caoh2(point_value(mesh, &state.ch, *point)) > PH_DEPASSIVATION {
                0.0
            } else {
                let th = match theta {
                    Some(t) => *t,
                    None => point_value(mesh, &state.theta(&problem.theta0, &problem.params), *point),
                };
                corrosion_current_density(th, point_value(mesh, &state.s, *point), &problem.params)
            }
        }
        ProbeKind::CarbonationDepth { marker } => carbonation_depth(mesh, state, marker)?,
        ProbeKind::FrontDepth { marker } => front_depth(mesh, state, marker, &problem.params)?,
    })
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Where to write the diagnostic state if the time step underflows.
    pub dump_dir: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct SimulationResult {
    pub problem: Problem,
    pub initial: FieldState,
    pub probes: ProbeSeries,
    /// States at the scenario's snapshot times, in time order.
    pub snapshots: Vec<FieldState>,
    pub final_state: FieldState,
    pub stats: SolverStats,
}

/// Run a scenario to its end time, recording probes after every accepted
/// step and full states at the snapshot times.
pub fn run_scenario(scenario: &Scenario, options: &RunOptions) -> Result<SimulationResult> {
    let (problem, initial) = scenario.setup()?;
    let mut probes = ProbeSeries {
        names: scenario.probes.iter().map(|p| p.name.clone()).collect(),
        units: scenario.probes.iter().map(|p| p.kind.unit()).collect(),
        records: Vec::new(),
    };
    let mut snapshots = Vec::new();
    let mut stepper = Stepper::new(&problem, scenario.time.clone())?;
    let final_state =
        stepper.integrate(initial.clone(), &scenario.snapshot_times, options.dump_dir.as_deref(), |st, out| {
            let values = scenario
                .probes
                .iter()
                .map(|p| evaluate_probe(&p.kind, &problem, st, &initial))
                .collect::<Result<Vec<_>>>()?;
            probes.records.push(ProbeRecord { t: st.t, values });
            if out {
                snapshots.push(st.clone());
            }
            Ok(())
        })?;
    let stats = stepper.stats.clone();
    Ok(SimulationResult { problem, initial, probes, snapshots, final_state, stats })
}
