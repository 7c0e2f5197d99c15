//! Residual and Jacobian of the implicit-Euler system.
//!
//! Unknowns are interleaved per node: `S` (always), then `c` and `c_ch`
//! when the chemistry is active (`nf = 3`). In water-only mode (`nf = 1`)
//! the chemistry fields are frozen at their old values.

use super::{FieldState, MassLumping, Problem};
use crate::constitutive::{co2_diffusivity_with_derivs, moisture_conductance};
use crate::mesh::{CscMatrix, QP_PER_ELEMENT};

pub(crate) const S: usize = 0;
pub(crate) const C: usize = 1;
pub(crate) const CH: usize = 2;

/// Split an interleaved vector into nodal fields, taking frozen chemistry
/// from `frozen` when `nf == 1`.
pub(crate) fn unpack(u: &[f64], nf: usize, frozen: &FieldState, t: f64) -> FieldState {
    let n = frozen.s.len();
    let s: Vec<f64> = (0..n).map(|i| u[i * nf + S]).collect();
    if nf == 1 {
        return FieldState { t, s, c: frozen.c.clone(), ch: frozen.ch.clone() };
    }
    FieldState { t, s, c: (0..n).map(|i| u[i * nf + C]).collect(), ch: (0..n).map(|i| u[i * nf + CH]).collect() }
}

pub(crate) fn pack(state: &FieldState, nf: usize) -> Vec<f64> {
    let n = state.s.len();
    let mut u = vec![0.0; n * nf];
    for i in 0..n {
        u[i * nf + S] = state.s[i];
        if nf == 3 {
            u[i * nf + C] = state.c[i];
            u[i * nf + CH] = state.ch[i];
        }
    }
    u
}

/// Assemble the residual (without Dirichlet rows applied) and, optionally,
/// its analytic Jacobian. `new` holds the current iterate at time `t_new`.
pub(crate) fn assemble(
    p: &Problem,
    nf: usize,
    new: &FieldState,
    old: &FieldState,
    dt: f64,
    res: &mut [f64],
    mut jac: Option<&mut CscMatrix>,
) {
    let mesh = &p.mesh;
    let par = &p.params;
    let kr = par.reaction_constant();
    let c0 = par.c_caoh2_0;
    let chem = nf == 3;
    res.iter_mut().for_each(|r| *r = 0.0);
    if let Some(j) = jac.as_deref_mut() {
        j.clear();
    }

    let theta = |ch: f64, i: usize| p.theta0[i] + (1.0 - ch / c0) * (par.theta_c - p.theta0[i]);
    let th_new: Vec<f64> = (0..new.s.len()).map(|i| theta(new.ch[i], i)).collect();
    // dθ/dc_ch, constant per node
    let dth: Vec<f64> = p.theta0.iter().map(|t0| (t0 - par.theta_c) / c0).collect();

    // Nodal terms: storage (lumped) and reaction sink.
    for (i, &m) in p.lumped.iter().enumerate() {
        let th_old = theta(old.ch[i], i);
        let (s, s_old) = (new.s[i], old.s[i]);
        let r = i * nf;
        if p.storage == MassLumping::Lumped {
            res[r + S] += m * (th_new[i] * s - th_old * s_old) / dt;
        }
        if let (Some(j), MassLumping::Lumped) = (jac.as_deref_mut(), p.storage) {
            j.add(r + S, r + S, m * th_new[i] / dt);
            if chem {
                j.add(r + S, r + CH, m * s * dth[i] / dt);
            }
        }
        if !chem {
            continue;
        }
        let (c, ch) = (new.c[i], new.ch[i]);
        let th = th_new[i];
        let sink = th * s * kr * c * ch;
        res[r + C] += m * (th * (1.0 - s) * c - th_old * (1.0 - s_old) * old.c[i]) / dt + m * sink;
        res[r + CH] += m * ((ch - old.ch[i]) / dt + sink);
        if let Some(j) = jac.as_deref_mut() {
            let ds = th * kr * c * ch;
            let dc = th * s * kr * ch;
            let dch = kr * s * c * (th + ch * dth[i]);
            j.add(r + C, r + C, m * (th * (1.0 - s) / dt + dc));
            j.add(r + C, r + S, m * (-th * c / dt + ds));
            j.add(r + C, r + CH, m * ((1.0 - s) * c * dth[i] / dt + dch));
            j.add(r + CH, r + CH, m * (1.0 / dt + dch));
            j.add(r + CH, r + S, m * ds);
            j.add(r + CH, r + C, m * dc);
        }
    }

    let nl = 4 * nf;
    let mut lr = [0.0; 12];
    let mut lj = [[0.0; 12]; 12];
    for (e, conn) in mesh.elements().iter().enumerate() {
        lr[..nl].iter_mut().for_each(|v| *v = 0.0);
        if jac.is_some() {
            lj[..nl].iter_mut().for_each(|row| row[..nl].iter_mut().for_each(|v| *v = 0.0));
        }
        let s_e = conn.map(|n| new.s[n]);
        let c_e = conn.map(|n| new.c[n]);
        let th_e = conn.map(|n| th_new[n]);
        let dth_e = conn.map(|n| dth[n]);
        for (q, qp) in mesh.quad_points(e).iter().enumerate() {
            let w = qp.weight;
            let nsh = &qp.shape;
            let gr = &qp.grad;
            let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
            let interp = |v: &[f64; 4]| (0..4).map(|a| nsh[a] * v[a]).sum::<f64>();
            let grad = |v: &[f64; 4]| {
                let mut g = [0.0; 2];
                for a in 0..4 {
                    g[0] += gr[a][0] * v[a];
                    g[1] += gr[a][1] * v[a];
                }
                g
            };
            let sq = interp(&s_e);
            let thq = interp(&th_e);
            let gs = grad(&s_e);
            let idx = e * QP_PER_ELEMENT + q;
            let kc = p.cracks.k_crack[idx];
            let km = crate::constitutive::bulk_perm_raw(thq, par);
            let dkm = crate::constitutive::dbulk_perm_raw(thq, par);
            let kmat = [[km + kc[0][0], kc[0][1]], [kc[1][0], km + kc[1][1]]];
            let kv = |v: [f64; 2]| [kmat[0][0] * v[0] + kmat[0][1] * v[1], kmat[1][0] * v[0] + kmat[1][1] * v[1]];
            let (g, dg) = moisture_conductance(sq, par);
            let kgs = kv(gs);

            // Consistent storage (verification option).
            if p.storage == MassLumping::Consistent {
                let s_old_q = interp(&conn.map(|n| old.s[n]));
                let th_old_q = interp(&conn.map(|n| theta(old.ch[n], n)));
                let st = (thq * sq - th_old_q * s_old_q) / dt;
                for a in 0..4 {
                    lr[a * nf + S] += nsh[a] * st * w;
                    if jac.is_some() {
                        for b in 0..4 {
                            lj[a * nf + S][b * nf + S] += nsh[a] * thq * nsh[b] / dt * w;
                            if chem {
                                lj[a * nf + S][b * nf + CH] += nsh[a] * sq * nsh[b] * dth_e[b] / dt * w;
                            }
                        }
                    }
                }
            }

            if let Some(src) = &p.water_source {
                let f = src(qp.coord, new.t);
                for a in 0..4 {
                    lr[a * nf + S] -= f * nsh[a] * w;
                }
            }

            for a in 0..4 {
                lr[a * nf + S] += g * dot(kgs, gr[a]) * w;
            }
            if jac.is_some() {
                for a in 0..4 {
                    let ga = dot(kgs, gr[a]);
                    let gsa = dot(gs, gr[a]);
                    for b in 0..4 {
                        lj[a * nf + S][b * nf + S] += (dg * nsh[b] * ga + g * dot(kv(gr[b]), gr[a])) * w;
                        if chem {
                            lj[a * nf + S][b * nf + CH] += g * dkm * gsa * nsh[b] * dth_e[b] * w;
                        }
                    }
                }
            }

            if chem {
                let gc = grad(&c_e);
                let (d, d_th, d_s) = co2_diffusivity_with_derivs(thq, sq, p.cracks.phi_qp[idx]);
                for a in 0..4 {
                    lr[a * nf + C] += d * dot(gc, gr[a]) * w;
                }
                if jac.is_some() {
                    for a in 0..4 {
                        let gca = dot(gc, gr[a]);
                        for b in 0..4 {
                            lj[a * nf + C][b * nf + C] += d * dot(gr[b], gr[a]) * w;
                            lj[a * nf + C][b * nf + S] += d_s * nsh[b] * gca * w;
                            lj[a * nf + C][b * nf + CH] += d_th * nsh[b] * dth_e[b] * gca * w;
                        }
                    }
                }
            }
        }
        for a in 0..4 {
            for f in 0..nf {
                res[conn[a] * nf + f] += lr[a * nf + f];
            }
        }
        if let Some(j) = jac.as_deref_mut() {
            for a in 0..4 {
                for f in 0..nf {
                    for b in 0..4 {
                        for g in 0..nf {
                            let v = lj[a * nf + f][b * nf + g];
                            if v != 0.0 {
                                j.add(conn[a] * nf + f, conn[b] * nf + g, v);
                            }
                        }
                    }
                }
            }
        }
    }
}
