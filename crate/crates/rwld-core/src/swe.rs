//! Explicit scheme for the stochastic wave equation with noise white in time
//! and fractional in space, plus the controlled variant that adds a drift
//! through the fractional inner product.
//!
//! The mild solution is discretized on the space-time grid as
//!
//! ```text
//! u(t_i, x_j) = I0(t_i, x_j)
//!             + sqrt(eps) sum_{m < i} sum_k G((i - m) dt, x_j - x_k)
//!                     sigma(t_m, x_k, u(t_m, x_k)) dW(m, k)
//! ```
//!
//! with G half the indicator of the light cone, left-point (predictable)
//! sigma evaluation, and dW the Gaussian increment panel of cell (m, k). The
//! controlled equation adds the drift of [`crate::drift`], evaluated with
//! the same left-point time rule.

use crate::drift::{drift_at, DriftEngine, SlabTable};
use crate::error::CoreError;
use crate::grid::{Field, Grid};
use crate::hurst::HurstParam;
use crate::noise::NoiseField;
use crate::skeleton::Control;

/// Multiplicative noise coefficient sigma(t, x, u) with the derivative
/// bounds of the standing hypothesis: sigma(t, x, 0) = 0 and the partial
/// derivatives in u and x bounded by `lipschitz_const`.
pub struct DiffusionCoefficient {
    sigma_fn: Box<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>,
    du_fn: Box<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>,
    dxu_fn: Box<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>,
    pub lipschitz_const: f64,
    label: String,
}

impl DiffusionCoefficient {
    pub fn new(
        sigma_fn: Box<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>,
        du_fn: Box<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>,
        dxu_fn: Box<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>,
        lipschitz_const: f64,
        label: impl Into<String>,
    ) -> Self {
        DiffusionCoefficient {
            sigma_fn,
            du_fn,
            dxu_fn,
            lipschitz_const,
            label: label.into(),
        }
    }

    /// sigma(u) = c u.
    pub fn linear(c: f64) -> Self {
        DiffusionCoefficient::new(
            Box::new(move |_, _, u| c * u),
            Box::new(move |_, _, _| c),
            Box::new(|_, _, _| 0.0),
            c.abs(),
            format!("linear(c={c})"),
        )
    }

    /// sigma(u) = c u / (1 + u^2); the derivative in u is bounded by c.
    pub fn damped(c: f64) -> Self {
        DiffusionCoefficient::new(
            Box::new(move |_, _, u| c * u / (1.0 + u * u)),
            Box::new(move |_, _, u| {
                let d = 1.0 + u * u;
                c * (1.0 - u * u) / (d * d)
            }),
            Box::new(|_, _, _| 0.0),
            c.abs(),
            format!("damped(c={c})"),
        )
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64, u: f64) -> f64 {
        (self.sigma_fn)(t, x, u)
    }

    #[inline]
    pub fn du(&self, t: f64, x: f64, u: f64) -> f64 {
        (self.du_fn)(t, x, u)
    }

    #[inline]
    pub fn dxu(&self, t: f64, x: f64, u: f64) -> f64 {
        (self.dxu_fn)(t, x, u)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Sampled check of the standing hypothesis on a small lattice of
    /// (t, x, u) triples: sigma vanishes at u = 0, both declared partial
    /// derivatives stay within the Lipschitz constant, and difference
    /// quotients in u do too.
    pub fn validate_hypothesis(&self, grid: &Grid) -> Result<(), CoreError> {
        let c = self.lipschitz_const;
        if !c.is_finite() || c < 0.0 {
            return Err(CoreError::InvalidParameter(format!(
                "lipschitz constant must be finite and >= 0, got {c}"
            )));
        }
        let slack = 1e-9 * (1.0 + c);
        let ts = [0.0, 0.5 * grid.t, grid.t];
        let xs = [-grid.l, -0.5 * grid.l, 0.0, 0.5 * grid.l, grid.l];
        let us = [-2.0, -1.0, -0.5, -0.1, 0.0, 0.1, 0.5, 1.0, 2.0];
        for &t in &ts {
            for &x in &xs {
                let at_zero = self.eval(t, x, 0.0);
                if at_zero.abs() > 1e-12 {
                    return Err(CoreError::InvalidParameter(format!(
                        "sigma({t}, {x}, 0) = {at_zero}, expected 0"
                    )));
                }
                for &u in &us {
                    let du = self.du(t, x, u);
                    let dxu = self.dxu(t, x, u);
                    if !du.is_finite() || du.abs() > c + slack {
                        return Err(CoreError::InvalidParameter(format!(
                            "d sigma / du = {du} at ({t}, {x}, {u}) exceeds bound {c}"
                        )));
                    }
                    if !dxu.is_finite() || dxu.abs() > c + slack {
                        return Err(CoreError::InvalidParameter(format!(
                            "d sigma / dx = {dxu} at ({t}, {x}, {u}) exceeds bound {c}"
                        )));
                    }
                    for &v in &us {
                        if u == v {
                            continue;
                        }
                        let gap = (self.eval(t, x, u) - self.eval(t, x, v)).abs();
                        if gap > (c + slack) * (u - v).abs() {
                            return Err(CoreError::InvalidParameter(format!(
                                "sigma not {c}-Lipschitz between u = {u} and u = {v} at ({t}, {x})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Initial displacement and velocity with their declared regularity.
pub struct InitialData {
    u0_fn: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    v0_fn: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub holder_alpha: f64,
    pub support_radius: f64,
}

/// Smooth compactly supported reference profile exp(1 - 1/(1 - x^2)) on
/// |x| < 1, with value 1 at the origin.
pub fn bump_profile(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

impl InitialData {
    pub fn new(
        u0_fn: Box<dyn Fn(f64) -> f64 + Send + Sync>,
        v0_fn: Box<dyn Fn(f64) -> f64 + Send + Sync>,
        holder_alpha: f64,
        support_radius: f64,
    ) -> Result<Self, CoreError> {
        if !(holder_alpha > 0.0 && holder_alpha <= 1.0) {
            return Err(CoreError::InvalidParameter(format!(
                "holder exponent must lie in (0, 1], got {holder_alpha}"
            )));
        }
        if !support_radius.is_finite() || support_radius < 0.0 {
            return Err(CoreError::InvalidParameter(format!(
                "support radius must be finite and >= 0, got {support_radius}"
            )));
        }
        Ok(InitialData {
            u0_fn,
            v0_fn,
            holder_alpha,
            support_radius,
        })
    }

    pub fn zero() -> Self {
        InitialData::new(Box::new(|_| 0.0), Box::new(|_| 0.0), 1.0, 0.0).unwrap()
    }

    /// Bump displacement, zero velocity.
    pub fn bump() -> Self {
        InitialData::new(Box::new(bump_profile), Box::new(|_| 0.0), 1.0, 1.0).unwrap()
    }

    #[inline]
    pub fn u0(&self, x: f64) -> f64 {
        (self.u0_fn)(x)
    }

    #[inline]
    pub fn v0(&self, x: f64) -> f64 {
        (self.v0_fn)(x)
    }

    /// Sampled sanity check: both profiles vanish outside the declared
    /// support and are finite, and u0's Hölder quotients at the declared
    /// exponent are bounded on the sampled pairs.
    pub fn validate(&self, grid: &Grid) -> Result<(), CoreError> {
        let n = 64;
        let reach = self.support_radius + grid.t + 1.0;
        let mut worst_quotient: f64 = 0.0;
        for a in 0..=n {
            let x = -reach + 2.0 * reach * a as f64 / n as f64;
            let u = self.u0(x);
            let v = self.v0(x);
            if !u.is_finite() || !v.is_finite() {
                return Err(CoreError::InvalidParameter(format!(
                    "initial data not finite at x = {x}"
                )));
            }
            if x.abs() > self.support_radius + 1e-9 && (u != 0.0 || v != 0.0) {
                return Err(CoreError::InvalidParameter(format!(
                    "initial data nonzero at x = {x}, outside declared support {}",
                    self.support_radius
                )));
            }
            let y = x + 0.5 * reach / n as f64;
            let q = (self.u0(y) - u).abs() / (y - x).abs().powf(self.holder_alpha);
            worst_quotient = worst_quotient.max(q);
        }
        if !worst_quotient.is_finite() {
            return Err(CoreError::InvalidParameter(
                "u0 Hölder quotient diverges on the sampled pairs".into(),
            ));
        }
        Ok(())
    }
}

/// Output of the solvers: the field plus scheme provenance.
pub struct SolveResult {
    pub u: Field,
    pub scheme_meta: String,
    pub seed: Option<u64>,
}

/// d'Alembert evolution of the initial data alone:
/// I0(t, x) = (u0(x + t) + u0(x - t)) / 2 + (1/2) int_{x-t}^{x+t} v0(y) dy,
/// with the velocity integral by composite trapezoid.
pub fn initial_term_i0(data: &InitialData, grid: &Grid) -> Field {
    let dx = grid.dx();
    Field::from_fn(grid, |t, x| {
        let wave = 0.5 * (data.u0(x + t) + data.u0(x - t));
        if t == 0.0 {
            return wave;
        }
        let a = x - t;
        let b = x + t;
        let panels = (2.0 * (b - a) / dx).ceil().max(8.0) as usize;
        let h = (b - a) / panels as f64;
        let mut sum = 0.5 * (data.v0(a) + data.v0(b));
        for k in 1..panels {
            sum += data.v0(a + k as f64 * h);
        }
        wave + 0.5 * h * sum
    })
}

/// Largest node offset d with d * dx strictly inside the cone of radius tau,
/// for every lag 1..=nt. Entry 0 is unused.
fn cone_offsets(grid: &Grid) -> Vec<i64> {
    let dx = grid.dx();
    let dt = grid.dt();
    let mut out = vec![0i64; grid.nt + 1];
    for (lag, slot) in out.iter_mut().enumerate().skip(1) {
        let tau = lag as f64 * dt;
        let mut d = (tau / dx).ceil() as i64 - 1;
        while d >= 0 && d as f64 * dx >= tau {
            d -= 1;
        }
        while (d + 1) as f64 * dx < tau {
            d += 1;
        }
        *slot = d;
    }
    out
}

/// Shared forward sweep. `eps` scales the noise (skipped entirely at 0 so
/// the zero-noise solve returns I0 verbatim); `control` adds the drift.
fn forward_scheme(
    data: &InitialData,
    sigma: &DiffusionCoefficient,
    eps: f64,
    dw: Option<&NoiseField>,
    control: Option<(&Control, &DriftEngine)>,
    grid: &Grid,
) -> Result<Field, CoreError> {
    let i0 = initial_term_i0(data, grid);
    forward_prepared(sigma, eps, dw, control, grid, &i0)
}

/// Forward sweep against a precomputed I0, the entry point for Monte Carlo
/// loops that share the initial term across replicates.
pub(crate) fn forward_prepared(
    sigma: &DiffusionCoefficient,
    eps: f64,
    dw: Option<&NoiseField>,
    control: Option<(&Control, &DriftEngine)>,
    grid: &Grid,
    i0: &Field,
) -> Result<Field, CoreError> {
    let nx = grid.nx;
    let nt = grid.nt;
    let dt = grid.dt();
    let sqrt_eps = eps.sqrt();
    let offsets = cone_offsets(grid);

    let mut u = i0.clone();
    // Per-slab tables, filled as rows become final: sigma row phi_m, the
    // noise prefix P_m of phi_m * dW_m over cells, and the drift slab table.
    let mut noise_prefix: Vec<Vec<f64>> = Vec::with_capacity(nt);
    let mut slabs: Vec<SlabTable<'_>> = Vec::with_capacity(nt);

    for i in 1..=nt {
        let m = i - 1;
        let t_m = grid.time(m);
        let phi: Vec<f64> = (0..=nx)
            .map(|q| sigma.eval(t_m, grid.node(q), u.at(m, q)))
            .collect();
        if eps > 0.0 {
            let dw = dw.expect("checked by callers");
            let row = dw.row(m);
            let mut prefix = vec![0.0; nx + 1];
            let mut acc = 0.0;
            for k in 0..nx {
                acc += phi[k] * row[k];
                prefix[k + 1] = acc;
            }
            noise_prefix.push(prefix);
        }
        if let Some((g, engine)) = control {
            slabs.push(engine.slab(&phi, g.row(m)));
        }

        for j in 0..=nx {
            let base = u.at(i, j);
            let mut val = base;
            if let Some((_, _)) = control {
                let drift = drift_at(&slabs[..i], dt, i, j);
                if drift != 0.0 {
                    val += drift;
                }
            }
            if eps > 0.0 {
                let mut acc = 0.0;
                for (m2, prefix) in noise_prefix.iter().enumerate() {
                    let d = offsets[i - m2];
                    if d < 0 {
                        continue;
                    }
                    let klo = (j as i64 - d).max(0) as usize;
                    let khi = ((j as i64 + d).min(nx as i64 - 1)) as usize;
                    if klo <= khi {
                        acc += 0.5 * (prefix[khi + 1] - prefix[klo]);
                    }
                }
                val += sqrt_eps * acc;
            }
            *u.at_mut(i, j) = val;
        }
        if let Some(j_bad) = u.row(i).iter().position(|v| !v.is_finite()) {
            return Err(CoreError::Numerical(format!(
                "solution not finite at time index {i}, node {j_bad}"
            )));
        }
    }
    Ok(u)
}

pub(crate) fn check_solver_inputs(
    data: &InitialData,
    eps: f64,
    dw: Option<&NoiseField>,
    grid: &Grid,
) -> Result<(), CoreError> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(CoreError::InvalidParameter(format!(
            "noise intensity eps must be finite and >= 0, got {eps}"
        )));
    }
    if !grid.covers_light_cone(data.support_radius) {
        return Err(CoreError::InvalidParameter(format!(
            "domain half-width {} too small for support radius {} and horizon {}",
            grid.l, data.support_radius, grid.t
        )));
    }
    if eps > 0.0 {
        match dw {
            None => {
                return Err(CoreError::InvalidParameter(
                    "eps > 0 requires a noise field".into(),
                ))
            }
            Some(w) => {
                if w.nt != grid.nt || w.nx != grid.nx {
                    return Err(CoreError::InvalidParameter(format!(
                        "noise field is {}x{}, grid needs {}x{}",
                        w.nt, w.nx, grid.nt, grid.nx
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Explicit solve of the stochastic equation at noise intensity `eps`
/// against the increment panel `dw`. At eps = 0 the result is I0 verbatim.
pub fn solve_swe(
    data: &InitialData,
    sigma: &DiffusionCoefficient,
    eps: f64,
    dw: &NoiseField,
    grid: &Grid,
) -> Result<SolveResult, CoreError> {
    check_solver_inputs(data, eps, Some(dw), grid)?;
    let u = forward_scheme(data, sigma, eps, Some(dw), None, grid)?;
    Ok(SolveResult {
        u,
        scheme_meta: format!(
            "explicit-walsh left-point nt={} nx={} eps={} sigma={}",
            grid.nt,
            grid.nx,
            eps,
            sigma.label()
        ),
        seed: None,
    })
}

/// Controlled solve: noise at intensity `eps` (omit `dw` only when eps = 0)
/// plus the drift of control `g` through the pairing at `eps_mollify`
/// (0 for the rough inner product). At eps = 0 this is the forward
/// evaluation of the skeleton equation.
#[allow(clippy::too_many_arguments)]
pub fn solve_controlled(
    data: &InitialData,
    sigma: &DiffusionCoefficient,
    eps: f64,
    dw: Option<&NoiseField>,
    g: &Control,
    eps_mollify: f64,
    hp: &HurstParam,
    grid: &Grid,
) -> Result<SolveResult, CoreError> {
    check_solver_inputs(data, eps, dw, grid)?;
    if g.nt() != grid.nt || g.nx() != grid.nx {
        return Err(CoreError::InvalidParameter(format!(
            "control is {}x{}, grid needs {}x{}",
            g.nt(),
            g.nx(),
            grid.nt,
            grid.nx
        )));
    }
    let engine = DriftEngine::new(hp, grid, eps_mollify)?;
    let u = forward_scheme(data, sigma, eps, dw, Some((g, &engine)), grid)?;
    Ok(SolveResult {
        u,
        scheme_meta: format!(
            "controlled left-point nt={} nx={} eps={} eps_mollify={} sigma={}",
            grid.nt,
            grid.nx,
            eps,
            eps_mollify,
            sigma.label()
        ),
        seed: None,
    })
}

/// Dyadic Hölder probe along one axis: sup difference per dyadic lag, the
/// worst quotient against step^gamma, and the log-log fitted exponent.
pub struct HolderReport {
    pub gamma: f64,
    pub time_max_quotient: f64,
    pub space_max_quotient: f64,
    /// Least-squares slope of log sup-difference vs log separation; NaN
    /// when fewer than two lags have a nonzero difference.
    pub time_fitted_exponent: f64,
    pub space_fitted_exponent: f64,
}

fn axis_probe(sup_diffs: &[(f64, f64)], gamma: f64) -> (f64, f64) {
    let mut max_q: f64 = 0.0;
    let mut pts = Vec::new();
    for &(step, sup) in sup_diffs {
        if sup > 0.0 {
            max_q = max_q.max(sup / step.powf(gamma));
            pts.push((step.ln(), sup.ln()));
        }
    }
    if pts.len() < 2 {
        return (max_q, f64::NAN);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (max_q, sxy / sxx)
}

/// Measure Hölder regularity of a field by dyadic increments in each axis.
pub fn holder_probe(u: &Field, gamma: f64, grid: &Grid) -> Result<HolderReport, CoreError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(CoreError::InvalidParameter(format!(
            "probe exponent must lie in (0, 1), got {gamma}"
        )));
    }
    if u.nt != grid.nt || u.nx != grid.nx {
        return Err(CoreError::InvalidParameter(
            "field does not match the grid".into(),
        ));
    }
    let mut time_sups = Vec::new();
    let mut lag = 1;
    while lag <= grid.nt / 4 {
        let mut sup: f64 = 0.0;
        for i in 0..=grid.nt - lag {
            for j in 0..=grid.nx {
                sup = sup.max((u.at(i + lag, j) - u.at(i, j)).abs());
            }
        }
        time_sups.push((lag as f64 * grid.dt(), sup));
        lag *= 2;
    }
    let mut space_sups = Vec::new();
    let mut lag = 1;
    while lag <= grid.nx / 4 {
        let mut sup: f64 = 0.0;
        for i in 0..=grid.nt {
            let row = u.row(i);
            for j in 0..=grid.nx - lag {
                sup = sup.max((row[j + lag] - row[j]).abs());
            }
        }
        space_sups.push((lag as f64 * grid.dx(), sup));
        lag *= 2;
    }
    let (tq, te) = axis_probe(&time_sups, gamma);
    let (xq, xe) = axis_probe(&space_sups, gamma);
    Ok(HolderReport {
        gamma,
        time_max_quotient: tq,
        space_max_quotient: xq,
        time_fitted_exponent: te,
        space_fitted_exponent: xe,
    })
}
