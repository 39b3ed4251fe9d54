//! Drift evaluation shared by the controlled stochastic scheme and the
//! deterministic skeleton solver.
//!
//! At output time t_i and node x_j the drift reads
//!
//! ```text
//! sum_{m < i} dt * < G(t_i - t_m, x_j - .) phi_m, g_m >
//! ```
//!
//! with phi_m(y) = sigma(t_m, y, u(t_m, y)) and g_m the control row of slab
//! m. The pairing is the rough inner product (difference form) when the
//! mollification parameter is zero and the mollified kernel form otherwise.
//! Both solvers run through the same per-slab tables and the same left-point
//! time rule, so the zero-noise controlled scheme and the skeleton map
//! perform identical arithmetic.
//!
//! Per-slab preparation is what makes repeated evaluation cheap. The Green's
//! function is half the indicator of the light cone, so every spatial
//! integral against it is a difference of running integrals. For the rough
//! pairing the lag-h correlations
//!
//! ```text
//! R_ab(h) = int a(y + h) b(y) dy,   a = G(tau, x_j - .) phi,   b = g,
//! ```
//!
//! become clipped prefix lookups: with C_k the running integral of
//! phi(. + k dx) g(.) and D_k that of phi(.) g(. + k dx),
//!
//! ```text
//! R_ab(k dx) = (C_k(x_j + tau - k dx) - C_k(x_j - tau - k dx)) / 2,
//! R_ba(k dx) = (D_k(x_j + tau) - D_k(x_j - tau)) / 2,
//! ```
//!
//! and the difference-form lag curve A(h) = 2 R_ab(0) - R_ab(h) - R_ba(h)
//! feeds the singular product-integration rule. A is even in h, so only
//! non-negative lags are tabulated.

use crate::error::CoreError;
use crate::fracspace::mollifier_f_eps;
use crate::grid::Grid;
use crate::hurst::HurstParam;
use crate::quad::SingularLagRule;

pub(crate) struct DriftEngine {
    nx: usize,
    dx: f64,
    c2: f64,
    mode: Mode,
}

enum Mode {
    /// Difference-form pairing with product-integration lag weights.
    Rough { rule: SingularLagRule },
    /// Kernel-form pairing through the mollifier lag table
    /// fe[k] = f_eps(k dx), with the pairing scale 2 pi c1 folded in later.
    Mollified { fe: Vec<f64>, scale: f64 },
}

impl DriftEngine {
    pub(crate) fn new(hp: &HurstParam, grid: &Grid, eps_mollify: f64) -> Result<Self, CoreError> {
        if !eps_mollify.is_finite() || eps_mollify < 0.0 {
            return Err(CoreError::InvalidParameter(format!(
                "mollification parameter must be finite and >= 0, got {eps_mollify}"
            )));
        }
        let dx = grid.dx();
        let mode = if eps_mollify == 0.0 {
            // The correlations vanish once the shifted cone slice clears the
            // domain, which happens past 2 L + T; the rule's sampled range
            // must reach that far so the analytic tail takes over exactly.
            let k_max = grid.nx + (grid.t / dx).ceil() as usize + 1;
            Mode::Rough {
                rule: SingularLagRule::new(k_max, dx, hp.lag_exponent()),
            }
        } else {
            let mut fe = Vec::with_capacity(grid.nx + 1);
            for k in 0..=grid.nx {
                fe.push(mollifier_f_eps(k as f64 * dx, eps_mollify, hp)?);
            }
            Mode::Mollified {
                fe,
                scale: 2.0 * std::f64::consts::PI * hp.c1,
            }
        };
        Ok(DriftEngine {
            nx: grid.nx,
            dx,
            c2: hp.c2,
            mode,
        })
    }

    /// Prepare the per-slab tables for sigma row `phi` and control row `g`,
    /// both sampled on the nx + 1 spatial nodes.
    pub(crate) fn slab(&self, phi: &[f64], g: &[f64]) -> SlabTable<'_> {
        assert_eq!(phi.len(), self.nx + 1);
        assert_eq!(g.len(), self.nx + 1);
        if g.iter().all(|&v| v == 0.0) || phi.iter().all(|&v| v == 0.0) {
            return SlabTable {
                engine: self,
                kind: SlabKind::Zero,
            };
        }
        let nx = self.nx;
        let dx = self.dx;
        let stride = nx + 2;
        match &self.mode {
            Mode::Rough { rule } => {
                let nk = rule.weights.len();
                let mut c = vec![0.0; nk * stride];
                let mut d = vec![0.0; nk * stride];
                for k in 0..nk {
                    let base = k * stride;
                    let mut acc_c = 0.0;
                    let mut acc_d = 0.0;
                    for q in 0..=nx {
                        let shifted_phi = if q + k <= nx { phi[q + k] } else { 0.0 };
                        let shifted_g = if q + k <= nx { g[q + k] } else { 0.0 };
                        acc_c += dx * shifted_phi * g[q];
                        acc_d += dx * phi[q] * shifted_g;
                        c[base + q + 1] = acc_c;
                        d[base + q + 1] = acc_d;
                    }
                }
                SlabTable {
                    engine: self,
                    kind: SlabKind::Rough { c, d, stride },
                }
            }
            Mode::Mollified { fe, scale } => {
                let mut q = vec![0.0; stride];
                let mut acc = 0.0;
                for w in 0..=nx {
                    let mut conv = 0.0;
                    for (y, &gy) in g.iter().enumerate() {
                        conv += fe[w.abs_diff(y)] * gy;
                    }
                    acc += dx * scale * phi[w] * (conv * dx);
                    q[w + 1] = acc;
                }
                SlabTable {
                    engine: self,
                    kind: SlabKind::Mollified { q },
                }
            }
        }
    }
}

pub(crate) struct SlabTable<'a> {
    engine: &'a DriftEngine,
    kind: SlabKind,
}

enum SlabKind {
    Zero,
    Rough {
        c: Vec<f64>,
        d: Vec<f64>,
        stride: usize,
    },
    Mollified {
        q: Vec<f64>,
    },
}

impl SlabTable<'_> {
    /// Pairing of G(tau, x_j - .) phi against g in the slab's inner product.
    pub(crate) fn pairing(&self, tau: f64, j: usize) -> f64 {
        let e = self.engine;
        let span = tau / e.dx;
        let hi = j as f64 + span;
        let lo = j as f64 - span;
        match &self.kind {
            SlabKind::Zero => 0.0,
            SlabKind::Rough { c, d, stride } => {
                let rule = match &e.mode {
                    Mode::Rough { rule } => rule,
                    Mode::Mollified { .. } => unreachable!(),
                };
                let l2 = 0.5 * (prefix_at(&c[..*stride], hi) - prefix_at(&c[..*stride], lo));
                let mut lag_sum = 0.0;
                for (k, &w) in rule.weights.iter().enumerate().skip(1) {
                    let base = k * stride;
                    let kf = k as f64;
                    let crow = &c[base..base + stride];
                    let drow = &d[base..base + stride];
                    let r_ab = 0.5 * (prefix_at(crow, hi - kf) - prefix_at(crow, lo - kf));
                    let r_ba = 0.5 * (prefix_at(drow, hi) - prefix_at(drow, lo));
                    lag_sum += w * (2.0 * l2 - r_ab - r_ba);
                }
                2.0 * e.c2 * (lag_sum + 2.0 * l2 * rule.tail_weight())
            }
            SlabKind::Mollified { q } => 0.5 * (prefix_at(q, hi) - prefix_at(q, lo)),
        }
    }
}

/// Accumulate the drift at (t_i, x_j) from the slab tables of rows 0..i,
/// with the left-point dt weight applied once at the end. Both solvers call
/// this with `&tables[..i]` so their arithmetic agrees term for term.
pub(crate) fn drift_at(tables: &[SlabTable<'_>], dt: f64, i: usize, j: usize) -> f64 {
    let mut acc = 0.0;
    for (m, table) in tables.iter().enumerate() {
        let tau = (i - m) as f64 * dt;
        acc += table.pairing(tau, j);
    }
    dt * acc
}

/// Linear interpolation of a running-integral table at a fractional cell
/// index, clamped to the table's range (the integrand vanishes outside).
fn prefix_at(table: &[f64], idx: f64) -> f64 {
    if idx <= 0.0 {
        return 0.0;
    }
    let top = (table.len() - 1) as f64;
    if idx >= top {
        return table[table.len() - 1];
    }
    let fl = idx.floor();
    let q = fl as usize;
    table[q] + (idx - fl) * (table[q + 1] - table[q])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fracspace::{h_eps_inner, h_inner_difference};
    use crate::grid::GridFunction;

    fn bump(x: f64) -> f64 {
        if x.abs() < 1.0 {
            (1.0 - 1.0 / (1.0 - x * x)).exp()
        } else {
            0.0
        }
    }

    /// The slab pairing at (tau, j) must agree with the generic inner
    /// product of a(y) = G(tau, x_j - y) phi(y) against g.
    #[test]
    fn rough_pairing_matches_generic_inner_product() {
        let grid = Grid::new(2.0, 512, 1.0, 512).unwrap();
        let hp = HurstParam::new(0.35).unwrap();
        let engine = DriftEngine::new(&hp, &grid, 0.0).unwrap();

        let phi_fn = |x: f64| bump(x) * (1.0 + 0.3 * x);
        let g_fn = |x: f64| bump(x + 0.4) - 0.5 * bump(x - 0.3);
        let phi: Vec<f64> = (0..=grid.nx).map(|q| phi_fn(grid.node(q))).collect();
        let g: Vec<f64> = (0..=grid.nx).map(|q| g_fn(grid.node(q))).collect();
        let table = engine.slab(&phi, &g);

        let gfun = GridFunction {
            values: g.clone(),
        };
        for &(tau, j) in &[(0.5, 256usize), (0.25, 192), (0.9, 320), (0.7, 256)] {
            let xj = grid.node(j);
            let a = GridFunction::from_fn(&grid, |y| {
                if (xj - y).abs() < tau {
                    0.5 * phi_fn(y)
                } else {
                    0.0
                }
            });
            let want = h_inner_difference(&a, &gfun, &hp, &grid);
            let got = table.pairing(tau, j);
            let scale = want.abs().max(1e-3);
            assert!(
                (got - want).abs() <= 0.04 * scale,
                "tau={tau} j={j}: slab pairing {got} vs direct {want}"
            );
        }
    }

    /// Same agreement for the mollified pairing, against the spectral
    /// evaluation of the damped inner product.
    #[test]
    fn mollified_pairing_matches_spectral_inner_product() {
        let grid = Grid::new(2.0, 1024, 1.0, 1024).unwrap();
        let hp = HurstParam::new(0.4).unwrap();
        let eps = 0.25;
        let engine = DriftEngine::new(&hp, &grid, eps).unwrap();

        let phi_fn = |x: f64| bump(x) * (1.0 - 0.2 * x);
        let g_fn = |x: f64| bump(1.5 * x);
        let phi: Vec<f64> = (0..=grid.nx).map(|q| phi_fn(grid.node(q))).collect();
        let g: Vec<f64> = (0..=grid.nx).map(|q| g_fn(grid.node(q))).collect();
        let table = engine.slab(&phi, &g);

        let gfun = GridFunction { values: g.clone() };
        for &(tau, j) in &[(0.6, 512usize), (0.3, 400), (1.0, 600)] {
            let xj = grid.node(j);
            let a = GridFunction::from_fn(&grid, |y| {
                if (xj - y).abs() < tau {
                    0.5 * phi_fn(y)
                } else {
                    0.0
                }
            });
            let want = h_eps_inner(&a, &gfun, &hp, &grid, eps);
            let got = table.pairing(tau, j);
            let scale = want.abs().max(1e-3);
            assert!(
                (got - want).abs() <= 0.03 * scale,
                "tau={tau} j={j}: mollified pairing {got} vs spectral {want}"
            );
        }
    }

    /// Zero control rows short-circuit to an exact zero pairing.
    #[test]
    fn zero_rows_give_exact_zero() {
        let grid = Grid::new(1.0, 16, 1.0, 16).unwrap();
        let hp = HurstParam::new(0.3).unwrap();
        let engine = DriftEngine::new(&hp, &grid, 0.0).unwrap();
        let phi = vec![1.0; grid.nx + 1];
        let zeros = vec![0.0; grid.nx + 1];
        let table = engine.slab(&phi, &zeros);
        for j in 0..=grid.nx {
            assert_eq!(table.pairing(0.5, j), 0.0);
        }
        let table = engine.slab(&zeros, &phi);
        assert_eq!(table.pairing(0.25, 8), 0.0);
    }

    /// The pairing is bilinear in both slab rows.
    #[test]
    fn pairing_is_bilinear() {
        let grid = Grid::new(2.0, 64, 1.0, 64).unwrap();
        let hp = HurstParam::new(0.3).unwrap();
        let engine = DriftEngine::new(&hp, &grid, 0.0).unwrap();
        let phi: Vec<f64> = (0..=grid.nx).map(|q| bump(grid.node(q))).collect();
        let g: Vec<f64> = (0..=grid.nx).map(|q| bump(grid.node(q) - 0.5)).collect();
        let g2: Vec<f64> = (0..=grid.nx).map(|q| bump(2.0 * grid.node(q))).collect();

        let base = engine.slab(&phi, &g).pairing(0.5, 30);
        let other = engine.slab(&phi, &g2).pairing(0.5, 30);
        let combo: Vec<f64> = g
            .iter()
            .zip(&g2)
            .map(|(&a, &b)| 2.0 * a - 0.5 * b)
            .collect();
        let got = engine.slab(&phi, &combo).pairing(0.5, 30);
        assert!((got - (2.0 * base - 0.5 * other)).abs() < 1e-12);

        let phi_scaled: Vec<f64> = phi.iter().map(|&v| 3.0 * v).collect();
        let scaled = engine.slab(&phi_scaled, &g).pairing(0.5, 30);
        assert!((scaled - 3.0 * base).abs() < 1e-12);
    }

    /// Mollified pairings converge to the rough one as eps decreases.
    #[test]
    fn mollified_pairing_approaches_rough() {
        let grid = Grid::new(2.0, 128, 1.0, 128).unwrap();
        let hp = HurstParam::new(0.4).unwrap();
        let phi: Vec<f64> = (0..=grid.nx).map(|q| bump(grid.node(q))).collect();
        let g: Vec<f64> = (0..=grid.nx).map(|q| bump(grid.node(q) + 0.3)).collect();

        let rough = DriftEngine::new(&hp, &grid, 0.0).unwrap();
        let reference = rough.slab(&phi, &g).pairing(0.6, 64);
        let mut gaps = Vec::new();
        for eps in [0.5, 0.05, 0.005] {
            let engine = DriftEngine::new(&hp, &grid, eps).unwrap();
            let value = engine.slab(&phi, &g).pairing(0.6, 64);
            gaps.push((value - reference).abs());
        }
        assert!(
            gaps[2] < gaps[0],
            "gaps {gaps:?} do not shrink toward the rough pairing"
        );
        assert!(gaps[2] <= 0.05 * reference.abs().max(1e-6));
    }

    #[test]
    fn negative_mollification_rejected() {
        let grid = Grid::new(1.0, 16, 1.0, 16).unwrap();
        let hp = HurstParam::new(0.3).unwrap();
        assert!(DriftEngine::new(&hp, &grid, -1.0).is_err());
        assert!(DriftEngine::new(&hp, &grid, f64::NAN).is_err());
    }
}
