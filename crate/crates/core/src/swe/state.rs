/// Physical fields on the grid at one instant. Grids are row-major
/// `(ny, nx)`; row 0 is the southern edge and column 0 the western edge.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub nx: usize,
    pub ny: usize,
    /// Surface elevation above datum (m).
    pub xi: Vec<f64>,
    /// Depth-integrated velocity components (m²/s).
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Bathymetric depth below datum (m).
    pub h_b: Vec<f64>,
    /// `true` on water cells.
    pub mask: Vec<bool>,
    /// Time (s).
    pub t: f64,
}

impl SimState {
    pub fn idx(&self, row: usize, col: usize) -> usize {
        row * self.nx + col
    }

    pub fn depth(&self, i: usize) -> f64 {
        self.h_b[i] + self.xi[i]
    }

    pub fn water_cells(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Left-right mirror image: columns reversed, `U` negated.
    pub fn mirrored_x(&self) -> SimState {
        let flip = |g: &[f64], neg: bool| -> Vec<f64> {
            let mut out = vec![0.0; g.len()];
            for r in 0..self.ny {
                for c in 0..self.nx {
                    let v = g[r * self.nx + c];
                    out[r * self.nx + (self.nx - 1 - c)] = if neg { -v } else { v };
                }
            }
            out
        };
        let mut mask = vec![false; self.mask.len()];
        for r in 0..self.ny {
            for c in 0..self.nx {
                mask[r * self.nx + (self.nx - 1 - c)] = self.mask[r * self.nx + c];
            }
        }
        SimState {
            nx: self.nx,
            ny: self.ny,
            xi: flip(&self.xi, false),
            u: flip(&self.u, true),
            v: flip(&self.v, false),
            h_b: flip(&self.h_b, false),
            mask,
            t: self.t,
        }
    }
}
