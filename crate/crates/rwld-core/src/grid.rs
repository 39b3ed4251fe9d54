use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Uniform space-time grid on `[-L, L] x [0, T]`.
///
/// Space carries `nx + 1` nodes `x_j = -L + j dx` with `dx = 2L/nx`; time
/// carries `nt + 1` nodes `t_i = i dt` with `dt = T/nt`. The CFL-like
/// constraint `dt <= dx` keeps the discrete light cone of the explicit wave
/// scheme inside one spatial cell per step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub l: f64,
    pub nx: usize,
    pub t: f64,
    pub nt: usize,
}

impl Grid {
    pub fn new(l: f64, nx: usize, t: f64, nt: usize) -> Result<Self, CoreError> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(CoreError::InvalidParameter(format!("L must be positive, got {l}")));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(CoreError::InvalidParameter(format!("T must be positive, got {t}")));
        }
        if nx < 8 || nt < 8 {
            return Err(CoreError::InvalidParameter(format!(
                "need nx >= 8 and nt >= 8, got nx={nx}, nt={nt}"
            )));
        }
        let g = Grid { l, nx, t, nt };
        if g.dt() > g.dx() * (1.0 + 1e-12) {
            return Err(CoreError::InvalidParameter(format!(
                "dt = {} exceeds dx = {}; the explicit scheme needs dt <= dx",
                g.dt(),
                g.dx()
            )));
        }
        Ok(g)
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        2.0 * self.l / self.nx as f64
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.t / self.nt as f64
    }

    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        -self.l + self.dx() * j as f64
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        self.dt() * i as f64
    }

    /// Whether the truncated domain contains the full light cone of data
    /// supported in `[-r, r]`: solutions vanish outside `|x| <= r + t`, and
    /// the drift windows reach one cone further, hence `L >= 2T + r`.
    pub fn covers_light_cone(&self, support_radius: f64) -> bool {
        self.l >= 2.0 * self.t + support_radius
    }
}

/// Values on the spatial nodes of a [`Grid`], length `nx + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: &Grid) -> Self {
        GridFunction { values: vec![0.0; grid.nx + 1] }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        GridFunction {
            values: (0..=grid.nx).map(|j| f(grid.node(j))).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Trapezoid integral over `[-L, L]`.
    pub fn integral(&self, grid: &Grid) -> f64 {
        let v = &self.values;
        let inner: f64 = v[1..v.len() - 1].iter().sum();
        grid.dx() * (inner + 0.5 * (v[0] + v[v.len() - 1]))
    }

    /// Trapezoid `L^2` norm squared.
    pub fn l2_norm_sq(&self, grid: &Grid) -> f64 {
        let v = &self.values;
        let inner: f64 = v[1..v.len() - 1].iter().map(|a| a * a).sum();
        grid.dx() * (inner + 0.5 * (v[0] * v[0] + v[v.len() - 1] * v[v.len() - 1]))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Space-time field on the full node lattice, `(nt + 1) x (nx + 1)`,
/// row-major in time.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub nt: usize,
    pub nx: usize,
    pub data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Field {
            nt: grid.nt,
            nx: grid.nx,
            data: vec![0.0; (grid.nt + 1) * (grid.nx + 1)],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Field::zeros(grid);
        for i in 0..=grid.nt {
            for j in 0..=grid.nx {
                out.data[i * (grid.nx + 1) + j] = f(grid.time(i), grid.node(j));
            }
        }
        out
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.nx + 1) + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * (self.nx + 1) + j]
    }

    /// Borrow the spatial slice at time index `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * (self.nx + 1)..(i + 1) * (self.nx + 1)]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * (self.nx + 1)..(i + 1) * (self.nx + 1)]
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute entry of `self - other`.
    pub fn sup_distance(&self, other: &Field) -> f64 {
        assert_eq!(self.data.len(), other.data.len(), "field shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// First non-finite entry as `(time index, space index)`, if any.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|p| (p / (self.nx + 1), p % (self.nx + 1)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(Grid::new(-1.0, 64, 1.0, 64).is_err());
        assert!(Grid::new(4.0, 4, 1.0, 64).is_err());
        assert!(Grid::new(4.0, 64, 1.0, 4).is_err());
        // dt = 1/8 > dx = 2*0.5/64
        assert!(Grid::new(0.5, 64, 1.0, 8).is_err());
        assert!(Grid::new(4.0, 64, 1.0, 64).is_ok());
    }

    #[test]
    fn grid_geometry() {
        let g = Grid::new(4.0, 64, 1.0, 64).unwrap();
        assert_eq!(g.dx(), 0.125);
        assert_eq!(g.dt(), 1.0 / 64.0);
        assert_eq!(g.node(0), -4.0);
        assert_eq!(g.node(64), 4.0);
        assert_eq!(g.node(32), 0.0);
        assert!(g.covers_light_cone(1.0));
        assert!(!g.covers_light_cone(2.5));
    }

    #[test]
    fn trapezoid_integral_of_linear_function() {
        let g = Grid::new(2.0, 16, 1.0, 16).unwrap();
        let f = GridFunction::from_fn(&g, |x| x + 1.0);
        // int_{-2}^{2} (x+1) dx = 4, exact for trapezoid on a linear integrand
        assert!((f.integral(&g) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn field_layout_round_trip() {
        let g = Grid::new(2.0, 8, 1.0, 8).unwrap();
        let f = Field::from_fn(&g, |t, x| t * 10.0 + x);
        assert_eq!(f.at(3, 0), 30.0 / 64.0 * 8.0 - 2.0);
        assert_eq!(f.row(5).len(), 9);
        assert!(f.all_finite());
        let mut h = f.clone();
        *h.at_mut(2, 2) = f64::NAN;
        assert_eq!(h.first_non_finite(), Some((2, 2)));
    }
}
