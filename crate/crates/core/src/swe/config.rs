use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::forcing::default_constituents;

/// One harmonic term `amplitude·cos(t/period + phase)`, `t` in hours.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constituent {
    pub amplitude: f64,
    pub period: f64,
    pub phase: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Open,
    Land,
}

/// Boundary tag per domain edge. West is column 0, south is row 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryLayout {
    pub west: BoundaryKind,
    pub east: BoundaryKind,
    pub south: BoundaryKind,
    pub north: BoundaryKind,
}

impl BoundaryLayout {
    pub fn closed() -> Self {
        BoundaryLayout {
            west: BoundaryKind::Land,
            east: BoundaryKind::Land,
            south: BoundaryKind::Land,
            north: BoundaryKind::Land,
        }
    }

    pub fn open_west() -> Self {
        BoundaryLayout {
            west: BoundaryKind::Open,
            ..Self::closed()
        }
    }

    /// The layout seen after mirroring the domain left-right.
    pub fn mirrored_x(self) -> Self {
        BoundaryLayout {
            west: self.east,
            east: self.west,
            ..self
        }
    }

    pub fn has_open(&self) -> bool {
        [self.west, self.east, self.south, self.north].contains(&BoundaryKind::Open)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub nx: usize,
    pub ny: usize,
    /// Cell size in metres.
    pub dx: f64,
    pub dy: f64,
    /// Time step in seconds.
    pub dt: f64,
    /// Simulated duration in seconds.
    pub t_end: f64,
    #[serde(default = "default_g")]
    pub g: f64,
    /// Coriolis coefficient (1/s).
    pub f_c: f64,
    /// Quadratic bottom-friction coefficient.
    pub c_f: f64,
    #[serde(default = "default_h_min")]
    pub h_min: f64,
    pub output_stride: usize,
    pub constituents: Vec<Constituent>,
    pub boundary: BoundaryLayout,
}

fn default_g() -> f64 {
    9.81
}

fn default_h_min() -> f64 {
    0.05
}

/// Coriolis parameter of the Bahamas test case.
pub const F_C_BAHAMAS: f64 = 3.19e-5;
/// Bottom friction coefficient of the Bahamas test case.
pub const C_F_BAHAMAS: f64 = 0.009;

impl Default for SimConfig {
    fn default() -> Self {
        Self::tidal_bay_coarse()
    }
}

impl SimConfig {
    /// The coarse "tidal-bay" setup: 64×64 cells over 10 km × 10 km, 20 s steps,
    /// 24 simulated hours, west edge open to the tide.
    pub fn tidal_bay_coarse() -> Self {
        let n = 64;
        SimConfig {
            nx: n,
            ny: n,
            dx: 10_000.0 / n as f64,
            dy: 10_000.0 / n as f64,
            dt: 20.0,
            t_end: 24.0 * 3600.0,
            g: default_g(),
            f_c: F_C_BAHAMAS,
            c_f: C_F_BAHAMAS,
            h_min: default_h_min(),
            output_stride: 10,
            constituents: default_constituents(),
            boundary: BoundaryLayout::open_west(),
        }
    }

    /// Doubles the cell counts and halves cell size and time step. The output
    /// stride (in steps) is kept, so frames come twice as often in time.
    pub fn refined(&self) -> Self {
        SimConfig {
            nx: self.nx * 2,
            ny: self.ny * 2,
            dx: self.dx / 2.0,
            dy: self.dy / 2.0,
            dt: self.dt / 2.0,
            ..self.clone()
        }
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.nx < 4 || self.ny < 4 {
            return fail(format!("grid {}x{} must be at least 4x4", self.nx, self.ny));
        }
        for (name, v) in [("dx", self.dx), ("dy", self.dy), ("dt", self.dt), ("g", self.g)] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.h_min > 0.0) {
            return fail(format!("h_min must be positive, got {}", self.h_min));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return fail(format!("t_end must be non-negative, got {}", self.t_end));
        }
        if !(self.c_f >= 0.0 && self.f_c.is_finite()) {
            return fail("c_f must be non-negative and f_c finite".into());
        }
        if self.output_stride == 0 {
            return fail("output_stride must be at least 1".into());
        }
        for (i, c) in self.constituents.iter().enumerate() {
            if !(c.amplitude >= 0.0 && c.amplitude.is_finite()) {
                return fail(format!("constituent {i}: amplitude must be >= 0"));
            }
            if !(c.period > 0.0 && c.period.is_finite()) {
                return fail(format!("constituent {i}: period must be > 0"));
            }
            if !c.phase.is_finite() {
                return fail(format!("constituent {i}: phase must be finite"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refined_halves_dt_and_cell_size() {
        let c = SimConfig::tidal_bay_coarse();
        let f = c.refined();
        assert_eq!(f.dt, c.dt / 2.0);
        assert_eq!((f.nx, f.ny), (128, 128));
        assert_eq!(f.n_steps(), 2 * c.n_steps());
        assert_eq!(c.n_steps(), 4320);
        assert_eq!(f.n_steps(), 8640);
    }

    #[test]
    fn rejects_zero_period() {
        let mut c = SimConfig::tidal_bay_coarse();
        c.constituents[2].period = 0.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_tiny_grid_and_negative_amplitude() {
        let mut c = SimConfig::tidal_bay_coarse();
        c.nx = 3;
        assert!(c.validate().is_err());
        let mut c = SimConfig::tidal_bay_coarse();
        c.constituents[0].amplitude = -0.1;
        assert!(c.validate().is_err());
    }
}
