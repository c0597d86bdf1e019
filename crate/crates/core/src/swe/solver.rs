use crate::error::{Error, Result};

use super::{BasinSpec, BoundaryKind, SimConfig, SimState};
use super::forcing::{bottom_friction_coeff, tidal_elevation};

/// Cell data as seen from one face: `qn` is the face-normal discharge and
/// `qt` the tangential one.
#[derive(Clone, Copy)]
struct Side {
    depth: f64,
    xi: f64,
    h_b: f64,
    qn: f64,
    qt: f64,
}

struct FaceFlux {
    mass: f64,
    mom_n: f64,
    mom_t: f64,
    /// Hydrostatic correction for the left / right cell.
    corr_l: f64,
    corr_r: f64,
}

/// Rusanov flux between hydrostatically reconstructed states.
fn face_flux(l: Side, r: Side, g: f64) -> FaceFlux {
    let hb_face = l.h_b.min(r.h_b);
    let hl = (l.xi + hb_face).max(0.0);
    let hr = (r.xi + hb_face).max(0.0);
    let (ul, vl) = (l.qn / l.depth, l.qt / l.depth);
    let (ur, vr) = (r.qn / r.depth, r.qt / r.depth);
    let (ql, qr) = (hl * ul, hr * ur);
    let (tl, tr) = (hl * vl, hr * vr);
    let half_g = 0.5 * g;
    let a = (ul.abs() + (g * hl).sqrt()).max(ur.abs() + (g * hr).sqrt());
    FaceFlux {
        mass: 0.5 * (ql + qr) - 0.5 * a * (hr - hl),
        mom_n: 0.5 * ((ql * ul + half_g * hl * hl) + (qr * ur + half_g * hr * hr))
            - 0.5 * a * (qr - ql),
        mom_t: 0.5 * (ql * vl + qr * vr) - 0.5 * a * (tr - tl),
        corr_l: half_g * (l.depth * l.depth - hl * hl),
        corr_r: half_g * (r.depth * r.depth - hr * hr),
    }
}

fn ghost(inner: Side, kind: BoundaryKind, tide: f64, h_min: f64) -> Side {
    match kind {
        BoundaryKind::Land => Side {
            qn: -inner.qn,
            ..inner
        },
        BoundaryKind::Open => {
            let depth = (inner.h_b + tide).max(h_min);
            Side {
                depth,
                xi: depth - inner.h_b,
                h_b: inner.h_b,
                qn: inner.qn,
                qt: inner.qt,
            }
        }
    }
}

struct Fields<'a> {
    xi: &'a [f64],
    u: &'a [f64],
    v: &'a [f64],
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Axis {
    X,
    Y,
}

/// One-directional flux divergence `dW/dt` for all water cells.
fn rhs(
    f: &Fields,
    base: &SimState,
    cfg: &SimConfig,
    t: f64,
    axis: Axis,
    out: (&mut [f64], &mut [f64], &mut [f64]),
) {
    let (nx, ny) = (cfg.nx, cfg.ny);
    let (dxi, du, dv) = out;
    dxi.fill(0.0);
    du.fill(0.0);
    dv.fill(0.0);
    let tide = if cfg.boundary.has_open() {
        tidal_elevation(t / 3600.0, &cfg.constituents)
    } else {
        0.0
    };
    let mask = &base.mask;
    let normal_is_x = axis == Axis::X;
    let side = |i: usize| {
        let (qn, qt) = if normal_is_x {
            (f.u[i], f.v[i])
        } else {
            (f.v[i], f.u[i])
        };
        Side {
            depth: base.h_b[i] + f.xi[i],
            xi: f.xi[i],
            h_b: base.h_b[i],
            qn,
            qt,
        }
    };
    // Faces along the sweep: face k of line l sits between cells k-1 and k.
    let (lines, cells, inv_h) = match axis {
        Axis::X => (ny, nx, 1.0 / cfg.dx),
        Axis::Y => (nx, ny, 1.0 / cfg.dy),
    };
    let index = |line: usize, k: usize| match axis {
        Axis::X => line * nx + k,
        Axis::Y => k * nx + line,
    };
    let (low_edge, high_edge) = match axis {
        Axis::X => (cfg.boundary.west, cfg.boundary.east),
        Axis::Y => (cfg.boundary.south, cfg.boundary.north),
    };
    let (dn, dt_) = match axis {
        Axis::X => (du, dv),
        Axis::Y => (dv, du),
    };
    for line in 0..lines {
        for k in 0..=cells {
            let li = (k > 0).then(|| index(line, k - 1)).filter(|&i| mask[i]);
            let ri = (k < cells).then(|| index(line, k)).filter(|&i| mask[i]);
            let (l, r) = match (li, ri) {
                (None, None) => continue,
                (Some(a), Some(b)) => (side(a), side(b)),
                (Some(a), None) => {
                    let kind = if k == cells { high_edge } else { BoundaryKind::Land };
                    let s = side(a);
                    (s, ghost(s, kind, tide, cfg.h_min))
                }
                (None, Some(b)) => {
                    let kind = if k == 0 { low_edge } else { BoundaryKind::Land };
                    let s = side(b);
                    (ghost(s, kind, tide, cfg.h_min), s)
                }
            };
            let fl = face_flux(l, r, cfg.g);
            if let Some(a) = li {
                dxi[a] -= fl.mass * inv_h;
                dn[a] -= (fl.mom_n + fl.corr_l) * inv_h;
                dt_[a] -= fl.mom_t * inv_h;
            }
            if let Some(b) = ri {
                dxi[b] += fl.mass * inv_h;
                dn[b] += (fl.mom_n + fl.corr_r) * inv_h;
                dt_[b] += fl.mom_t * inv_h;
            }
        }
    }
}

/// Two-stage SSP Runge–Kutta for the one-directional flux update over
/// `[t, t + dt]`, in place on water cells.
fn sweep(
    fields: &mut (Vec<f64>, Vec<f64>, Vec<f64>),
    base: &SimState,
    cfg: &SimConfig,
    t: f64,
    dt: f64,
    axis: Axis,
) {
    let n = fields.0.len();
    let (mut k_xi, mut k_u, mut k_v) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let clamp = |xi: f64, i: usize| {
        if base.h_b[i] + xi < cfg.h_min {
            cfg.h_min - base.h_b[i]
        } else {
            xi
        }
    };
    rhs(
        &Fields {
            xi: &fields.0,
            u: &fields.1,
            v: &fields.2,
        },
        base,
        cfg,
        t,
        axis,
        (&mut k_xi, &mut k_u, &mut k_v),
    );
    let mut stage = fields.clone();
    for i in 0..n {
        if base.mask[i] {
            stage.0[i] = clamp(stage.0[i] + dt * k_xi[i], i);
            stage.1[i] += dt * k_u[i];
            stage.2[i] += dt * k_v[i];
        }
    }
    rhs(
        &Fields {
            xi: &stage.0,
            u: &stage.1,
            v: &stage.2,
        },
        base,
        cfg,
        t + dt,
        axis,
        (&mut k_xi, &mut k_u, &mut k_v),
    );
    for i in 0..n {
        if base.mask[i] {
            fields.0[i] = clamp(0.5 * fields.0[i] + 0.5 * (stage.0[i] + dt * k_xi[i]), i);
            fields.1[i] = 0.5 * fields.1[i] + 0.5 * (stage.1[i] + dt * k_u[i]);
            fields.2[i] = 0.5 * fields.2[i] + 0.5 * (stage.2[i] + dt * k_v[i]);
        }
    }
}

/// Largest directional Courant number over water cells, with its location
/// and wave speed.
pub fn courant_number(state: &SimState, cfg: &SimConfig) -> (f64, usize, f64) {
    let mut worst = (0.0, 0, 0.0);
    for i in 0..state.xi.len() {
        if !state.mask[i] {
            continue;
        }
        let h = state.depth(i);
        let c = (cfg.g * h.max(0.0)).sqrt();
        let sx = state.u[i].abs() / h + c;
        let sy = state.v[i].abs() / h + c;
        let cn = (sx * cfg.dt / cfg.dx).max(sy * cfg.dt / cfg.dy);
        if !(cn <= worst.0) {
            worst = (cn, i, sx.max(sy));
        }
    }
    worst
}

/// Σ ξ·dx·dy over water cells.
pub fn total_mass(state: &SimState, cfg: &SimConfig) -> f64 {
    state
        .xi
        .iter()
        .zip(&state.mask)
        .filter(|(_, &m)| m)
        .map(|(x, _)| x)
        .sum::<f64>()
        * cfg.dx
        * cfg.dy
}

fn check_finite(state: &SimState) -> Result<()> {
    for (name, g) in [("xi", &state.xi), ("U", &state.u), ("V", &state.v)] {
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                stage: "swe step".into(),
                detail: format!(
                    "{name} at cell (row {}, col {}) at t = {} s",
                    i / state.nx,
                    i % state.nx,
                    state.t
                ),
            });
        }
    }
    Ok(())
}

/// Advances `state` by one time step.
pub fn step(state: &SimState, cfg: &SimConfig) -> Result<SimState> {
    let n = cfg.nx * cfg.ny;
    if state.xi.len() != n || state.nx != cfg.nx || state.ny != cfg.ny {
        return Err(Error::Shape(format!(
            "state is {}x{}, config expects {}x{}",
            state.ny, state.nx, cfg.ny, cfg.nx
        )));
    }
    check_finite(state)?;
    let (cn, at, speed) = courant_number(state, cfg);
    if !(cn < 1.0) {
        return Err(Error::Cfl {
            row: at / cfg.nx,
            col: at % cfg.nx,
            courant: cn,
            speed,
        });
    }
    let dt = cfg.dt;
    // Strang splitting: half x-sweep, full y-sweep, half x-sweep.
    let mut fields = (state.xi.clone(), state.u.clone(), state.v.clone());
    sweep(&mut fields, state, cfg, state.t, 0.5 * dt, Axis::X);
    sweep(&mut fields, state, cfg, state.t, dt, Axis::Y);
    sweep(&mut fields, state, cfg, state.t + 0.5 * dt, 0.5 * dt, Axis::X);
    let (xs, ustar, vstar) = fields;

    let mut next = state.clone();
    next.t = state.t + dt;
    let b = dt * cfg.f_c;
    for i in 0..n {
        if !state.mask[i] {
            next.xi[i] = 0.0;
            next.u[i] = 0.0;
            next.v[i] = 0.0;
            continue;
        }
        let (xi, us, vs) = (xs[i], ustar[i], vstar[i]);
        let depth = state.h_b[i] + xi;
        let tau = bottom_friction_coeff(us.hypot(vs), depth, cfg.c_f)?;
        // Implicit friction + Coriolis: [[a, -b], [b, a]] q = q*.
        let a = 1.0 + dt * tau;
        let det = a * a + b * b;
        next.xi[i] = xi;
        next.u[i] = (a * us + b * vs) / det;
        next.v[i] = (a * vs - b * us) / det;
    }
    check_finite(&next)?;
    Ok(next)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub frames: usize,
    pub steps: usize,
    pub initial_mass: f64,
    pub final_mass: f64,
    pub max_courant: f64,
    pub min_depth: f64,
}

/// Runs the simulation, handing every output frame (including `t = 0`) to `sink`.
pub fn run_with(
    cfg: &SimConfig,
    basin: &BasinSpec,
    seed: u64,
    mut sink: impl FnMut(&SimState) -> Result<()>,
) -> Result<RunSummary> {
    cfg.validate()?;
    let mut state = basin.build(cfg, seed)?;
    let steps = cfg.n_steps();
    let initial_mass = total_mass(&state, cfg);
    let mut summary = RunSummary {
        frames: 0,
        steps,
        initial_mass,
        final_mass: initial_mass,
        max_courant: 0.0,
        min_depth: f64::INFINITY,
    };
    let observe = |s: &SimState, summary: &mut RunSummary| {
        for i in 0..s.xi.len() {
            if s.mask[i] {
                summary.min_depth = summary.min_depth.min(s.depth(i));
            }
        }
    };
    observe(&state, &mut summary);
    sink(&state)?;
    summary.frames += 1;
    for k in 1..=steps {
        summary.max_courant = summary.max_courant.max(courant_number(&state, cfg).0);
        let mut next = step(&state, cfg)?;
        // Avoid drift from repeated addition.
        next.t = k as f64 * cfg.dt;
        state = next;
        observe(&state, &mut summary);
        if k % cfg.output_stride == 0 {
            sink(&state)?;
            summary.frames += 1;
        }
    }
    summary.final_mass = total_mass(&state, cfg);
    Ok(summary)
}

/// Runs the simulation and collects every output frame.
pub fn run(cfg: &SimConfig, basin: &BasinSpec, seed: u64) -> Result<Vec<SimState>> {
    let mut frames = Vec::new();
    run_with(cfg, basin, seed, |s| {
        frames.push(s.clone());
        Ok(())
    })?;
    Ok(frames)
}
