use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{tidal_elevation, SimConfig, SimState};

/// Bathymetry and land layout of a built-in synthetic basin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BasinKind {
    /// All water; depth falls linearly from 2 m at the west edge to 0.5 m at the east edge.
    TidalBay,
    /// Tidal bay with a rectangular island in the middle of the domain.
    IslandBay,
    Flat { depth: f64 },
    LinearSlope { west_depth: f64, east_depth: f64 },
}

/// Initial surface elevation; velocities always start at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialCondition {
    /// Still water at the open-boundary tide level at t = 0.
    TideLevel,
    Rest {
        level: f64,
    },
    /// Gaussian hump; centre and width are fractions of the domain extent.
    GaussianBump {
        amplitude: f64,
        x0: f64,
        y0: f64,
        sigma: f64,
    },
    /// `count` Gaussian humps with seeded random centres and signs.
    RandomBumps {
        count: usize,
        amplitude: f64,
        sigma: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasinSpec {
    pub basin: BasinKind,
    pub initial: InitialCondition,
}

impl BasinSpec {
    pub fn tidal_bay() -> Self {
        BasinSpec {
            basin: BasinKind::TidalBay,
            initial: InitialCondition::TideLevel,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.basin {
            BasinKind::TidalBay => "tidal-bay",
            BasinKind::IslandBay => "island-bay",
            BasinKind::Flat { .. } => "flat",
            BasinKind::LinearSlope { .. } => "linear-slope",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        let basin = match name {
            "tidal-bay" => BasinKind::TidalBay,
            "island-bay" => BasinKind::IslandBay,
            other => return Err(Error::Config(format!("unknown basin '{other}'"))),
        };
        Ok(BasinSpec {
            basin,
            initial: InitialCondition::TideLevel,
        })
    }

    /// Builds the initial state for `cfg`'s grid. `seed` only matters for
    /// randomized initial conditions.
    pub fn build(&self, cfg: &SimConfig, seed: u64) -> Result<SimState> {
        let (nx, ny) = (cfg.nx, cfg.ny);
        let n = nx * ny;
        let lx = cfg.dx * nx as f64;
        let ly = cfg.dy * ny as f64;
        let mut h_b = vec![0.0; n];
        let mut mask = vec![true; n];
        let slope = |x: f64, west: f64, east: f64| west + (east - west) * x / lx;
        for r in 0..ny {
            let yf = (r as f64 + 0.5) / ny as f64;
            for c in 0..nx {
                let x = (c as f64 + 0.5) * cfg.dx;
                let xf = x / lx;
                let i = r * nx + c;
                h_b[i] = match self.basin {
                    BasinKind::TidalBay | BasinKind::IslandBay => slope(x, 2.0, 0.5),
                    BasinKind::Flat { depth } => depth,
                    BasinKind::LinearSlope {
                        west_depth,
                        east_depth,
                    } => slope(x, west_depth, east_depth),
                };
                if self.basin == BasinKind::IslandBay
                    && (0.45..0.6).contains(&xf)
                    && (0.3..0.7).contains(&yf)
                {
                    mask[i] = false;
                }
            }
        }

        let mut xi = vec![0.0; n];
        match &self.initial {
            InitialCondition::TideLevel => xi.fill(tidal_elevation(0.0, &cfg.constituents)),
            InitialCondition::Rest { level } => xi.fill(*level),
            InitialCondition::GaussianBump {
                amplitude,
                x0,
                y0,
                sigma,
            } => {
                let bump = gaussian(*amplitude, x0 * lx, y0 * ly, sigma * lx.max(ly));
                fill_with(&mut xi, cfg, |x, y| bump(x, y));
            }
            InitialCondition::RandomBumps {
                count,
                amplitude,
                sigma,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let bumps: Vec<_> = (0..*count)
                    .map(|_| {
                        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                        gaussian(
                            sign * amplitude,
                            rng.gen_range(0.2..0.8) * lx,
                            rng.gen_range(0.2..0.8) * ly,
                            sigma * lx.max(ly),
                        )
                    })
                    .collect();
                fill_with(&mut xi, cfg, |x, y| bumps.iter().map(|b| b(x, y)).sum());
            }
        }

        for i in 0..n {
            if !mask[i] {
                xi[i] = 0.0;
            } else if h_b[i] + xi[i] < cfg.h_min {
                return Err(Error::Config(format!(
                    "initial total depth {} below h_min at cell {i}",
                    h_b[i] + xi[i]
                )));
            }
        }
        Ok(SimState {
            nx,
            ny,
            xi,
            u: vec![0.0; n],
            v: vec![0.0; n],
            h_b,
            mask,
            t: 0.0,
        })
    }
}

fn gaussian(a: f64, cx: f64, cy: f64, s: f64) -> impl Fn(f64, f64) -> f64 {
    move |x, y| a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp()
}

fn fill_with(xi: &mut [f64], cfg: &SimConfig, f: impl Fn(f64, f64) -> f64) {
    for r in 0..cfg.ny {
        for c in 0..cfg.nx {
            xi[r * cfg.nx + c] = f((c as f64 + 0.5) * cfg.dx, (r as f64 + 0.5) * cfg.dy);
        }
    }
}
