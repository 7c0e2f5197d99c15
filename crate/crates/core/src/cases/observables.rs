//! Post-processing quantities measured on simulated states.

use crate::constitutive::{MaterialParams, PH_DEPASSIVATION};
use crate::error::{Error, Result};
use crate::mesh::{point_segment_distance, Mesh};
use crate::solver::{FieldState, Problem};

/// Water mass lost since `state0`, in percent of the initial water content.
pub fn relative_mass_loss(problem: &Problem, state: &FieldState, state0: &FieldState) -> Result<f64> {
    let w0 = problem.water_content(state0);
    if !(w0 > 0.0) {
        return Err(Error::Scenario("initial water content is zero".into()));
    }
    Ok(100.0 * (w0 - problem.water_content(state)) / w0)
}

/// Ca(OH)₂ concentration at which the pore solution reaches the
/// depassivation pH.
pub fn depassivation_caoh2() -> f64 {
    10f64.powf(PH_DEPASSIVATION - 14.0) / 2e3
}

/// Largest distance from the `exposed` facets reached by the region where
/// `ch ≤ threshold`, with linear interpolation of the crossing along mesh
/// edges. Zero if no node is below the threshold.
pub fn threshold_depth(mesh: &Mesh, ch: &[f64], exposed: &str, threshold: f64) -> Result<f64> {
    if ch.len() != mesh.num_nodes() {
        return Err(Error::FieldLength { expected: mesh.num_nodes(), got: ch.len() });
    }
    let facets = mesh.marker_facets(exposed)?;
    if facets.is_empty() {
        return Err(Error::UnknownMarker(exposed.to_string()));
    }
    let dist = |p: [f64; 2]| {
        facets
            .iter()
            .map(|f| point_segment_distance(p, mesh.nodes()[f.nodes[0]], mesh.nodes()[f.nodes[1]]))
            .fold(f64::INFINITY, f64::min)
    };
    let mut depth: f64 = 0.0;
    for (i, x) in mesh.nodes().iter().enumerate() {
        if ch[i] <= threshold {
            depth = depth.max(dist(*x));
        }
    }
    for [a, b] in mesh.edges() {
        let (lo, hi) = if ch[a] <= threshold && ch[b] > threshold {
            (a, b)
        } else if ch[b] <= threshold && ch[a] > threshold {
            (b, a)
        } else {
            continue;
        };
        let t = (threshold - ch[lo]) / (ch[hi] - ch[lo]);
        let (p, q) = (mesh.nodes()[lo], mesh.nodes()[hi]);
        depth = depth.max(dist([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]));
    }
    Ok(depth)
}

/// Carbonation depth: reach of the region with pH at or below the
/// depassivation threshold.
pub fn carbonation_depth(mesh: &Mesh, state: &FieldState, exposed: &str) -> Result<f64> {
    threshold_depth(mesh, &state.ch, exposed, depassivation_caoh2())
}

/// Depth of the region where the carbonation front variable is at least 0.5.
pub fn front_depth(mesh: &Mesh, state: &FieldState, exposed: &str, params: &MaterialParams) -> Result<f64> {
    threshold_depth(mesh, &state.ch, exposed, 0.5 * params.c_caoh2_0)
}

/// First time the pH series drops to `threshold` or below, interpolated
/// linearly between records; `None` if never reached.
pub fn corrosion_onset_time(times: &[f64], ph: &[f64], threshold: f64) -> Option<f64> {
    let k = ph.iter().position(|&v| v <= threshold)?;
    if k == 0 {
        return Some(times[0]);
    }
    let (t0, t1, p0, p1) = (times[k - 1], times[k], ph[k - 1], ph[k]);
    Some(t0 + (t1 - t0) * (p0 - threshold) / (p0 - p1))
}

/// Extents of the region `S > threshold` measured from `origin`: the
/// largest reach along the unit `direction` and the largest distance
/// perpendicular to it.
pub fn wet_region_extents(
    mesh: &Mesh,
    s: &[f64],
    threshold: f64,
    origin: [f64; 2],
    direction: [f64; 2],
) -> Result<(f64, f64)> {
    if s.len() != mesh.num_nodes() {
        return Err(Error::FieldLength { expected: mesh.num_nodes(), got: s.len() });
    }
    let n = direction[0].hypot(direction[1]);
    let d = [direction[0] / n, direction[1] / n];
    let (mut along, mut across): (f64, f64) = (0.0, 0.0);
    for (x, &v) in mesh.nodes().iter().zip(s) {
        if v > threshold {
            let r = [x[0] - origin[0], x[1] - origin[1]];
            along = along.max(r[0] * d[0] + r[1] * d[1]);
            across = across.max((r[0] * d[1] - r[1] * d[0]).abs());
        }
    }
    Ok((along, across))
}
