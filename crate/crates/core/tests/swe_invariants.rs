use downscaler_core::swe::{
    self, csf, BasinKind, BasinSpec, BoundaryLayout, InitialCondition, SimConfig, SimState,
};

fn closed(n: usize, dt: f64) -> SimConfig {
    SimConfig {
        nx: n,
        ny: n,
        dx: 10_000.0 / n as f64,
        dy: 10_000.0 / n as f64,
        dt,
        t_end: 0.0,
        f_c: 3.19e-5,
        c_f: 0.009,
        boundary: BoundaryLayout::closed(),
        ..SimConfig::tidal_bay_coarse()
    }
}

fn bump() -> InitialCondition {
    InitialCondition::GaussianBump {
        amplitude: 0.2,
        x0: 0.4,
        y0: 0.55,
        sigma: 0.08,
    }
}

fn advance(mut s: SimState, cfg: &SimConfig, steps: usize) -> SimState {
    for _ in 0..steps {
        s = swe::step(&s, cfg).unwrap();
    }
    s
}

#[test]
fn still_water_stays_still() {
    let cfg = closed(16, 20.0);
    let basin = BasinSpec {
        basin: BasinKind::Flat { depth: 1.5 },
        initial: InitialCondition::Rest { level: 0.0 },
    };
    let s0 = basin.build(&cfg, 0).unwrap();
    let s = advance(s0, &cfg, 200);
    for g in [&s.xi, &s.u, &s.v] {
        assert!(g.iter().all(|v| v.abs() <= 1e-12));
    }
}

#[test]
fn lake_at_rest_over_slope() {
    let cfg = closed(32, 20.0);
    let basin = BasinSpec {
        basin: BasinKind::TidalBay,
        initial: InitialCondition::Rest { level: 0.1 },
    };
    let s = advance(basin.build(&cfg, 0).unwrap(), &cfg, 100);
    let qmax = s.u.iter().chain(&s.v).fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(qmax <= 1e-10, "max |q| = {qmax:e}");
}

#[test]
fn closed_basin_conserves_mass() {
    let cfg = closed(32, 20.0);
    let basin = BasinSpec {
        basin: BasinKind::IslandBay,
        initial: bump(),
    };
    let s0 = basin.build(&cfg, 0).unwrap();
    let m0 = swe::total_mass(&s0, &cfg);
    let s = advance(s0, &cfg, 1000);
    let drift = ((swe::total_mass(&s, &cfg) - m0) / m0).abs();
    assert!(drift <= 1e-8, "relative drift {drift:e}");
}

#[test]
fn mirror_symmetry_without_rotation() {
    let mut cfg = closed(24, 20.0);
    cfg.f_c = 0.0;
    cfg.boundary = BoundaryLayout::open_west();
    cfg.boundary.south = swe::BoundaryKind::Open;
    let basin = BasinSpec {
        basin: BasinKind::LinearSlope {
            west_depth: 2.0,
            east_depth: 0.7,
        },
        initial: bump(),
    };
    let s0 = basin.build(&cfg, 0).unwrap();
    let mut mcfg = cfg.clone();
    mcfg.boundary = cfg.boundary.mirrored_x();
    let a = advance(s0.clone(), &cfg, 150);
    let b = advance(s0.mirrored_x(), &mcfg, 150).mirrored_x();
    for (x, y) in a.xi.iter().zip(&b.xi).chain(a.u.iter().zip(&b.u)).chain(a.v.iter().zip(&b.v)) {
        assert!((x - y).abs() <= 1e-10);
    }
}

/// Block average of a fine grid onto a grid `factor` times coarser.
fn restrict(g: &[f64], n_fine: usize, factor: usize) -> Vec<f64> {
    let n = n_fine / factor;
    let mut out = vec![0.0; n * n];
    for r in 0..n_fine {
        for c in 0..n_fine {
            out[(r / factor) * n + c / factor] += g[r * n_fine + c];
        }
    }
    out.iter().map(|v| v / (factor * factor) as f64).collect()
}

#[test]
fn refinement_reduces_error() {
    let basin = BasinSpec {
        basin: BasinKind::Flat { depth: 1.0 },
        initial: InitialCondition::GaussianBump {
            amplitude: 0.05,
            x0: 0.5,
            y0: 0.5,
            sigma: 0.12,
        },
    };
    let t_final = 1200.0;
    let solve = |n: usize, dt: f64| {
        let mut cfg = closed(n, dt);
        cfg.c_f = 0.0;
        let steps = (t_final / dt).round() as usize;
        advance(basin.build(&cfg, 0).unwrap(), &cfg, steps)
    };
    let reference = solve(64, 10.0);
    let err = |n: usize, dt: f64| {
        let s = solve(n, dt);
        let r = restrict(&reference.xi, 64, 64 / n);
        (s.xi.iter().zip(&r).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (n * n) as f64).sqrt()
    };
    let e_coarse = err(16, 40.0);
    let e_fine = err(32, 20.0);
    assert!(e_fine / e_coarse < 1.0, "{e_fine:e} / {e_coarse:e}");
}

#[test]
fn frame_count_and_determinism() {
    let mut cfg = SimConfig::tidal_bay_coarse();
    cfg.nx = 16;
    cfg.ny = 16;
    cfg.dx = 625.0;
    cfg.dy = 625.0;
    cfg.t_end = 10.0 * cfg.dt;
    cfg.output_stride = 5;
    let basin = BasinSpec::tidal_bay();
    let a = swe::run(&cfg, &basin, 1).unwrap();
    assert_eq!(a.len(), 3);
    assert_eq!(a.iter().map(|s| s.t).collect::<Vec<_>>(), vec![0.0, 100.0, 200.0]);
    let b = swe::run(&cfg, &basin, 1).unwrap();
    assert_eq!(a, b);

    let fine = swe::run(&cfg.refined(), &basin, 1).unwrap();
    assert_eq!(fine.len(), 2 * a.len() - 1);
}

#[test]
fn cfl_violation_is_reported() {
    let mut cfg = closed(8, 2000.0);
    cfg.t_end = 2000.0;
    let basin = BasinSpec {
        basin: BasinKind::Flat { depth: 2.0 },
        initial: InitialCondition::Rest { level: 0.0 },
    };
    let err = swe::run(&cfg, &basin, 0).unwrap_err();
    assert!(matches!(err, downscaler_core::Error::Cfl { .. }), "{err}");
}

#[test]
fn csf_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = SimConfig::tidal_bay_coarse();
    cfg.nx = 8;
    cfg.ny = 8;
    cfg.dx = 1250.0;
    cfg.dy = 1250.0;
    cfg.t_end = 4.0 * cfg.dt;
    cfg.output_stride = 2;
    let basin = BasinSpec::tidal_bay();
    let (meta, summary) = csf::run_to_csf(&cfg, &basin, 0, dir.path()).unwrap();
    assert_eq!(meta.n_frames, 3);
    assert_eq!(summary.frames, 3);
    let frames = swe::run(&cfg, &basin, 0).unwrap();
    let read = csf::CsfDir::open(dir.path()).unwrap();
    assert_eq!(read.meta, meta);
    for (k, f) in frames.iter().enumerate() {
        let g = read.frame(k).unwrap();
        assert_eq!(g.t, f.t);
        for (a, b) in g.xi.iter().zip(&f.xi) {
            assert_eq!(*a, *b as f32 as f64);
        }
    }
}
