//! The five built-in case studies.
//!
//! Geometry is in metres and time in seconds. Every preset can be exported
//! to the config format and edited from there.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::{GradedPorosity, InitialConditions, MaterialSpec, ProbeKind, ProbeSpec, Scenario};
use crate::constitutive::{IsothermBranch, S_MIN};
use crate::error::{Error, Result};
use crate::mesh::{BoundaryMarkers, RectMeshSpec, Refinement, Void, VoidShape};
use crate::phasefield::{CrackSeeds, CrackSpec};
use crate::solver::{BoundaryCondition, BoundaryValue, TimeStepPlan, Unknown};

pub const HOUR: f64 = 3600.0;
pub const DAY: f64 = 86_400.0;

/// Relative humidities of the carbonation sweep.
pub const CASE4_RH_LEVELS: [f64; 6] = [0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Rebar-surface point nearest the exposed corner (45° on the Ø16 bar
/// centred in the 50 mm section).
pub const CASE5_POINT_A: [f64; 2] = [0.025 - 0.008 * FRAC_1_SQRT_2, 0.025 - 0.008 * FRAC_1_SQRT_2];

const S_FULL: f64 = 1.0 - S_MIN;

fn markers(bottom: &str, right: &str, top: &str, left: &str) -> BoundaryMarkers {
    BoundaryMarkers { bottom: bottom.into(), right: right.into(), top: top.into(), left: left.into() }
}

fn dirichlet(marker: &str, unknown: Unknown, value: BoundaryValue) -> BoundaryCondition {
    BoundaryCondition { marker: marker.into(), unknown, value }
}

fn probe(name: &str, kind: ProbeKind) -> ProbeSpec {
    ProbeSpec { name: name.into(), kind, at_snapshots: false }
}

fn snapshot_probe(name: &str, kind: ProbeKind) -> ProbeSpec {
    ProbeSpec { at_snapshots: true, ..probe(name, kind) }
}

/// Look a preset up by case number. `rh` applies to case 4, `cracked` to case 5.
pub fn preset(case: u8, cracked: bool, rh: Option<f64>) -> Result<Scenario> {
    match case {
        1 => Ok(case1_drying()),
        2 => Ok(case2_wetting()),
        3 => Ok(case3_cracked_wetting()),
        4 => Ok(case4_carbonation(rh.unwrap_or(0.7))),
        5 => Ok(case5_cyclic(cracked)),
        _ => Err(Error::Scenario(format!("no case {case}; expected 1..=5"))),
    }
}

/// Names accepted by [`preset_by_name`], besides `case4_rh<NN>` for any
/// humidity in percent.
pub const PRESET_NAMES: [&str; 6] = ["case1", "case2", "case3", "case4", "case5", "case5_cracked"];

/// Look a preset up by name: `case1`…`case5`, `case5_cracked`, and
/// `case4_rh<NN>` (`case4` alone means 70 %).
pub fn preset_by_name(name: &str) -> Result<Scenario> {
    if let Some(pct) = name.strip_prefix("case4_rh") {
        let rh: f64 = pct.parse().map_err(|_| Error::Scenario(format!("bad humidity in preset name {name:?}")))?;
        if !(rh > 0.0 && rh < 100.0) {
            return Err(Error::Scenario(format!("humidity in {name:?} must lie in (0, 100) %")));
        }
        return Ok(case4_carbonation(rh / 100.0));
    }
    match name {
        "case1" => Ok(case1_drying()),
        "case2" => Ok(case2_wetting()),
        "case3" => Ok(case3_cracked_wetting()),
        "case4" => Ok(case4_carbonation(0.7)),
        "case5" => Ok(case5_cyclic(false)),
        "case5_cracked" => Ok(case5_cyclic(true)),
        _ => Err(Error::Scenario(format!("unknown preset {name:?}; expected one of {PRESET_NAMES:?} or case4_rh<NN>"))),
    }
}

/// Drying of a 100 mm cement-paste cylinder through both flat faces,
/// simulated along its axis. 87 % → 50 % relative humidity.
pub fn case1_drying() -> Scenario {
    let mut mesh = RectMeshSpec::uniform(0.1, 0.001, 100, 1);
    mesh.markers = markers("lateral", "exposed", "lateral", "exposed");
    let mut material = MaterialSpec::new(IsothermBranch::Drying);
    material.theta_0 = Some(0.12);
    Scenario {
        name: "case1".into(),
        mesh,
        material,
        graded_porosity: None,
        cracks: vec![],
        initial: InitialConditions { saturation: BoundaryValue::Humidity(0.87), co2: 0.0, caoh2: None },
        boundary: vec![dirichlet("exposed", Unknown::Saturation, BoundaryValue::Humidity(0.5))],
        time: TimeStepPlan {
            t_end: 400.0 * DAY,
            dt_init: 60.0,
            dt_min: 1e-3,
            dt_max: 5.0 * DAY,
            ..TimeStepPlan::default()
        },
        carbonation: false,
        probes: vec![probe("mass_loss", ProbeKind::MassLoss)],
        snapshot_times: vec![400.0 * DAY],
    }
}

/// Capillary uptake of a 32 mm × 2 mm mortar section with two embedded
/// wires, each surrounded by a 0.3 mm porous layer (70 % → 15 %), standing
/// in water. Initial state in equilibrium with 53 % relative humidity.
pub fn case2_wetting() -> Scenario {
    let (r, x_wire) = (0.4e-3, 1.0e-3);
    let wires = [10e-3, 22e-3];
    let mut mesh = RectMeshSpec::uniform(2e-3, 32e-3, 20, 320);
    mesh.markers = markers("water", "side", "side", "side");
    mesh.anchors_x = vec![x_wire - r, x_wire, x_wire + r];
    for y in wires {
        mesh.anchors_y.extend([y - r, y, y + r]);
        mesh.voids.push(Void { shape: VoidShape::Disk { center: [x_wire, y], radius: r }, marker: "wire".into() });
        mesh.refine.push(Refinement {
            min: [0.0, y - r - 0.4e-3],
            max: [2e-3, y + r + 0.4e-3],
            size: [0.05e-3, 0.05e-3],
        });
    }
    let mut material = MaterialSpec::new(IsothermBranch::Wetting);
    material.theta_0 = Some(0.15);
    let upper = [x_wire, wires[1] - r];
    Scenario {
        name: "case2".into(),
        mesh,
        material,
        graded_porosity: Some(GradedPorosity { marker: "wire".into(), thickness: 0.3e-3, surface: 0.70 }),
        cracks: vec![],
        initial: InitialConditions { saturation: BoundaryValue::Humidity(0.53), co2: 0.0, caoh2: None },
        boundary: vec![dirichlet("water", Unknown::Saturation, BoundaryValue::Constant(S_FULL))],
        time: TimeStepPlan { t_end: 2.0 * HOUR, dt_init: 1e-2, dt_min: 1e-7, dt_max: 60.0, ..TimeStepPlan::default() },
        carbonation: false,
        probes: vec![probe("saturation_upper_wire", ProbeKind::Saturation { point: upper })],
        snapshot_times: vec![0.5 * HOUR, 1.0 * HOUR, 2.0 * HOUR],
    }
}

/// Geometry of the cracked wetting test, shared with the acceptance checks.
pub mod case3 {
    /// Crack line position.
    pub const CRACK_X: f64 = 0.05;
    /// Bottom of the notch (crack mouth).
    pub const NOTCH_BOTTOM: f64 = 0.095;
    pub const NOTCH_HALF_WIDTH: f64 = 1.5e-3;
    pub const CRACK_LENGTH: f64 = 34.3e-3;
    pub const ELL: f64 = 0.043e-3;
    pub const W_CR: f64 = 0.043e-3;
}

/// Water uptake of a 100 × 100 mm concrete section through a notch and a
/// 34.3 mm × 43 µm crack below it; the top face sees 65 % humidity.
pub fn case3_cracked_wetting() -> Scenario {
    use case3::*;
    let mut mesh = RectMeshSpec::uniform(0.1, 0.1, 100, 100);
    mesh.markers = markers("sealed", "sealed", "top", "sealed");
    mesh.anchors_x = vec![CRACK_X - NOTCH_HALF_WIDTH, CRACK_X, CRACK_X + NOTCH_HALF_WIDTH];
    mesh.anchors_y = vec![NOTCH_BOTTOM - CRACK_LENGTH, NOTCH_BOTTOM];
    mesh.refine.push(Refinement {
        min: [CRACK_X - 5.0 * ELL, NOTCH_BOTTOM - CRACK_LENGTH],
        max: [CRACK_X + 5.0 * ELL, 0.1],
        size: [ELL / 5.0, 1e-3],
    });
    mesh.voids.push(Void {
        shape: VoidShape::Rect {
            min: [CRACK_X - NOTCH_HALF_WIDTH, NOTCH_BOTTOM],
            max: [CRACK_X + NOTCH_HALF_WIDTH, 0.2],
        },
        marker: "notch".into(),
    });
    let mut material = MaterialSpec::new(IsothermBranch::Wetting);
    material.theta_0 = Some(0.12);
    let crack = CrackSpec {
        seeds: CrackSeeds::Segments(vec![[[CRACK_X, NOTCH_BOTTOM], [CRACK_X, NOTCH_BOTTOM - CRACK_LENGTH]]]),
        ell: ELL,
        w_cr: W_CR,
        phi_t: 0.5,
    };
    Scenario {
        name: "case3".into(),
        mesh,
        material,
        graded_porosity: None,
        cracks: vec![crack],
        initial: InitialConditions { saturation: BoundaryValue::Humidity(0.5), co2: 0.0, caoh2: None },
        boundary: vec![
            dirichlet("notch", Unknown::Saturation, BoundaryValue::Constant(S_FULL)),
            dirichlet("top", Unknown::Saturation, BoundaryValue::Humidity(0.65)),
        ],
        time: TimeStepPlan { t_end: 7.0 * HOUR, dt_init: 1e-3, dt_min: 1e-8, dt_max: 300.0, ..TimeStepPlan::default() },
        carbonation: false,
        probes: vec![],
        snapshot_times: [0.03, 1.0, 2.0, 3.0, 5.0, 7.0].iter().map(|h| h * HOUR).collect(),
    }
}

/// Accelerated carbonation (20 % CO₂) of a 100 mm cube exposed on two
/// opposite faces, simulated through half the thickness at relative
/// humidity `rh`.
pub fn case4_carbonation(rh: f64) -> Scenario {
    let mut mesh = RectMeshSpec::uniform(0.05, 0.25e-3, 200, 1);
    mesh.markers = markers("lateral", "symmetry", "lateral", "exposed");
    let mut material = MaterialSpec::new(IsothermBranch::Wetting);
    material.theta_0 = Some(0.26);
    material.temperature = Some(293.0);
    Scenario {
        name: format!("case4_rh{}", (rh * 1e8).round() / 1e6),
        mesh,
        material,
        graded_porosity: None,
        cracks: vec![],
        initial: InitialConditions { saturation: BoundaryValue::Humidity(rh), co2: 0.0, caoh2: None },
        boundary: vec![
            dirichlet("exposed", Unknown::Saturation, BoundaryValue::Humidity(rh)),
            dirichlet("exposed", Unknown::Co2, BoundaryValue::VolumeFraction(0.2)),
        ],
        time: TimeStepPlan {
            t_end: 56.0 * DAY,
            dt_init: 1.0,
            dt_min: 1e-6,
            dt_max: 0.25 * DAY,
            ..TimeStepPlan::default()
        },
        carbonation: true,
        probes: vec![
            snapshot_probe("carbonation_depth", ProbeKind::CarbonationDepth { marker: "exposed".into() }),
            snapshot_probe("front_depth", ProbeKind::FrontDepth { marker: "exposed".into() }),
        ],
        snapshot_times: vec![28.0 * DAY, 56.0 * DAY],
    }
}

/// Reinforced 50 × 50 mm section (Ø16 bar) with two exposed faces under
/// cyclic boundary saturation between 40 % and 80 % (14-day period);
/// optionally with two 15 mm cracks from the exposed faces.
pub fn case5_cyclic(cracked: bool) -> Scenario {
    let mut mesh = RectMeshSpec::uniform(0.05, 0.05, 50, 50);
    mesh.markers = markers("exposed", "sealed", "sealed", "exposed");
    mesh.voids.push(Void { shape: VoidShape::Disk { center: [0.025, 0.025], radius: 0.008 }, marker: "rebar".into() });
    let ell = 0.5e-3;
    let mut cracks = vec![];
    if cracked {
        mesh.anchors_x.push(0.025);
        mesh.anchors_y.push(0.025);
        mesh.refine.push(Refinement {
            min: [0.025 - 2.0 * ell, 0.0],
            max: [0.025 + 2.0 * ell, 0.017],
            size: [ell / 5.0, 1e-3],
        });
        mesh.refine.push(Refinement {
            min: [0.0, 0.025 - 2.0 * ell],
            max: [0.017, 0.025 + 2.0 * ell],
            size: [1e-3, ell / 5.0],
        });
        cracks.push(CrackSpec {
            seeds: CrackSeeds::Segments(vec![[[0.025, 0.0], [0.025, 0.015]], [[0.0, 0.025], [0.015, 0.025]]]),
            ell,
            w_cr: 0.1e-3,
            phi_t: 0.5,
        });
    }
    let mut material = MaterialSpec::new(IsothermBranch::Wetting);
    material.theta_0 = Some(0.16);
    let cycle = BoundaryValue::Sinusoid { mean: 0.6, amplitude: 0.2, period: 14.0 * DAY, phase: 1.5 * PI };
    Scenario {
        name: if cracked { "case5_cracked".into() } else { "case5".into() },
        mesh,
        material,
        graded_porosity: None,
        cracks,
        initial: InitialConditions { saturation: BoundaryValue::Constant(0.4), co2: 0.0, caoh2: None },
        boundary: vec![
            dirichlet("exposed", Unknown::Saturation, cycle),
            dirichlet("exposed", Unknown::Co2, BoundaryValue::VolumeFraction(4e-4)),
        ],
        time: TimeStepPlan {
            t_end: 120.0 * DAY,
            dt_init: 1.0,
            dt_min: 1e-6,
            dt_max: 0.25 * DAY,
            ..TimeStepPlan::default()
        },
        carbonation: true,
        probes: vec![
            probe("ph_a", ProbeKind::Ph { point: CASE5_POINT_A }),
            probe("saturation_a", ProbeKind::Saturation { point: CASE5_POINT_A }),
            probe("corrosion_current_a", ProbeKind::CorrosionCurrent { point: CASE5_POINT_A, theta: Some(0.16) }),
            probe("carbonation_depth", ProbeKind::CarbonationDepth { marker: "exposed".into() }),
        ],
        snapshot_times: vec![120.0 * DAY],
    }
}
