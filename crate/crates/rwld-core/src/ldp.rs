//! Large-deviation artifacts for the small-noise family: rate-function
//! upper bounds by penalized control optimization, Monte Carlo tail
//! estimates along an eps ladder, and the probe comparing controlled
//! solutions against their skeletons.

use crate::error::CoreError;
use crate::fracspace::dc_metric;
use crate::grid::{Field, Grid};
use crate::hurst::HurstParam;
use crate::noise::{NoiseSampler, NoiseSpec, SamplingMethod};
use crate::skeleton::{solve_skeleton, Control};
use crate::swe::{forward_prepared, initial_term_i0, DiffusionCoefficient, InitialData};
use crate::drift::DriftEngine;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// u(T, x*) >= level.
    TerminalPointLevel,
    /// max over the node set, over all output times, >= level.
    SupLevel,
}

/// Closed target set for the rate function and the tail estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub kind: EventKind,
    pub x_star: f64,
    pub level: f64,
    #[serde(default)]
    pub nodes: Vec<usize>,
}

impl EventSpec {
    pub fn terminal_point(x_star: f64, level: f64) -> Self {
        EventSpec {
            kind: EventKind::TerminalPointLevel,
            x_star,
            level,
            nodes: Vec::new(),
        }
    }

    pub fn sup_level(nodes: Vec<usize>, level: f64) -> Self {
        EventSpec {
            kind: EventKind::SupLevel,
            x_star: 0.0,
            level,
            nodes,
        }
    }

    /// Index of the grid node x* refers to; x* must sit on a node.
    pub fn node_index(&self, grid: &Grid) -> Result<usize, CoreError> {
        let pos = (self.x_star + grid.l) / grid.dx();
        let j = pos.round();
        if (pos - j).abs() > 1e-9 || j < 0.0 || j > grid.nx as f64 {
            return Err(CoreError::InvalidParameter(format!(
                "x* = {} is not a grid node",
                self.x_star
            )));
        }
        Ok(j as usize)
    }

    pub fn validate(&self, grid: &Grid) -> Result<(), CoreError> {
        if !self.level.is_finite() {
            return Err(CoreError::InvalidParameter(format!(
                "event level must be finite, got {}",
                self.level
            )));
        }
        match self.kind {
            EventKind::TerminalPointLevel => {
                self.node_index(grid)?;
            }
            EventKind::SupLevel => {
                if self.nodes.is_empty() {
                    return Err(CoreError::InvalidParameter(
                        "sup-level event needs a nonempty node set".into(),
                    ));
                }
                if let Some(&bad) = self.nodes.iter().find(|&&j| j > grid.nx) {
                    return Err(CoreError::InvalidParameter(format!(
                        "node index {bad} outside the grid"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The scalar the event thresholds; call after `validate`.
    pub fn functional(&self, u: &Field, grid: &Grid) -> f64 {
        match self.kind {
            EventKind::TerminalPointLevel => {
                let j = self.node_index(grid).expect("validated event");
                u.at(grid.nt, j)
            }
            EventKind::SupLevel => {
                let mut sup = f64::NEG_INFINITY;
                for i in 0..=grid.nt {
                    let row = u.row(i);
                    for &j in &self.nodes {
                        sup = sup.max(row[j]);
                    }
                }
                sup
            }
        }
    }

    pub fn hit(&self, u: &Field, grid: &Grid) -> bool {
        self.functional(u, grid) >= self.level
    }
}

/// Penalty-method configuration for [`rate_minimize`]. The control ansatz
/// is a coarse lattice of `nc_t` x `nc_x` coefficients, bilinearly
/// prolongated to the solver grid; stage k minimizes
/// energy + mu0 4^k shortfall^2 by finite-difference gradient descent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptConfig {
    pub nc_t: usize,
    pub nc_x: usize,
    pub mu0: f64,
    pub stages: usize,
    pub iters_per_stage: usize,
    pub step0: f64,
    pub fd_step: f64,
    pub constraint_tol: f64,
    pub eps_mollify: f64,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            nc_t: 6,
            nc_x: 6,
            mu0: 8.0,
            stages: 5,
            iters_per_stage: 10,
            step0: 0.5,
            fd_step: 1e-4,
            constraint_tol: 1e-3,
            eps_mollify: 0.0,
        }
    }
}

impl OptConfig {
    fn validate(&self) -> Result<(), CoreError> {
        if self.nc_t == 0 || self.nc_x == 0 || self.nc_t > 12 || self.nc_x > 12 {
            return Err(CoreError::InvalidParameter(format!(
                "control ansatz {}x{} outside 1..=12 per axis",
                self.nc_t, self.nc_x
            )));
        }
        for (name, v) in [
            ("mu0", self.mu0),
            ("step0", self.step0),
            ("fd_step", self.fd_step),
            ("constraint_tol", self.constraint_tol),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(CoreError::InvalidParameter(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        if self.stages == 0 || self.iters_per_stage == 0 {
            return Err(CoreError::InvalidParameter(
                "stages and iters_per_stage must be at least 1".into(),
            ));
        }
        if !self.eps_mollify.is_finite() || self.eps_mollify < 0.0 {
            return Err(CoreError::InvalidParameter(format!(
                "eps_mollify must be finite and >= 0, got {}",
                self.eps_mollify
            )));
        }
        Ok(())
    }
}

/// Result of the rate minimization; `energy` is an upper bound on the rate
/// function value (infinite when no feasible control was found).
#[derive(Serialize)]
pub struct RateResult {
    pub event: EventSpec,
    #[serde(skip_serializing)]
    pub g_star: Control,
    pub energy: f64,
    pub constraint_residual: f64,
    pub feasible: bool,
    /// Best penalized objective at the end of each stage.
    pub trace: Vec<f64>,
}

/// Bilinear prolongation from the coarse coefficient lattice to the
/// control grid.
struct Prolongation {
    nc_x: usize,
    t_w: Vec<(usize, f64)>,
    x_w: Vec<(usize, f64)>,
}

impl Prolongation {
    fn new(nc_t: usize, nc_x: usize, grid: &Grid) -> Self {
        let axis = |pos: f64, nc: usize| -> (usize, f64) {
            if nc == 1 {
                return (0, 0.0);
            }
            let scaled = pos * (nc - 1) as f64;
            let idx = (scaled.floor() as usize).min(nc - 2);
            (idx, scaled - idx as f64)
        };
        let t_w = (0..grid.nt)
            .map(|m| axis(grid.time(m) / grid.t, nc_t))
            .collect();
        let x_w = (0..=grid.nx)
            .map(|q| axis((grid.node(q) + grid.l) / (2.0 * grid.l), nc_x))
            .collect();
        Prolongation { nc_x, t_w, x_w }
    }

    fn control(&self, theta: &[f64], grid: &Grid) -> Control {
        let mut g = Control::zeros(grid);
        for m in 0..grid.nt {
            let (a, ft) = self.t_w[m];
            let row = g.row_mut(m);
            for (q, slot) in row.iter_mut().enumerate() {
                let (b, fx) = self.x_w[q];
                let at = |aa: usize, bb: usize| theta[aa * self.nc_x + bb];
                let lo = at(a, b) * (1.0 - fx)
                    + if fx > 0.0 { at(a, b + 1) * fx } else { 0.0 };
                let hi = if ft > 0.0 {
                    at(a + 1, b) * (1.0 - fx)
                        + if fx > 0.0 { at(a + 1, b + 1) * fx } else { 0.0 }
                } else {
                    0.0
                };
                *slot = lo * (1.0 - ft) + hi * ft;
            }
        }
        g
    }
}

/// Upper-bound the rate function at the event by exterior-penalty descent
/// over the coarse control ansatz, then a feasibility polish that scales
/// the control to the smallest multiple meeting the event.
pub fn rate_minimize(
    event: &EventSpec,
    data: &InitialData,
    sigma: &DiffusionCoefficient,
    hp: &HurstParam,
    grid: &Grid,
    cfg: &OptConfig,
) -> Result<RateResult, CoreError> {
    cfg.validate()?;
    event.validate(grid)?;
    if !grid.covers_light_cone(data.support_radius) {
        return Err(CoreError::InvalidParameter(format!(
            "domain half-width {} too small for support radius {} and horizon {}",
            grid.l, data.support_radius, grid.t
        )));
    }
    let i0 = initial_term_i0(data, grid);
    if event.functional(&i0, grid) >= event.level {
        // The zero control already attains the event.
        return Ok(RateResult {
            event: event.clone(),
            g_star: Control::zeros(grid),
            energy: 0.0,
            constraint_residual: 0.0,
            feasible: true,
            trace: Vec::new(),
        });
    }

    let engine = DriftEngine::new(hp, grid, cfg.eps_mollify)?;
    let skeleton_value = |g: &Control| -> Result<f64, CoreError> {
        let u = forward_prepared(sigma, 0.0, None, Some((g, &engine)), grid, &i0)?;
        Ok(event.functional(&u, grid))
    };
    // (objective, energy, shortfall) of a coefficient vector under penalty mu.
    let evaluate = |theta: &[f64], mu: f64, prol: &Prolongation| -> Result<(f64, f64, f64), CoreError> {
        let g = prol.control(theta, grid);
        let energy = g.energy(hp, grid);
        let shortfall = (event.level - skeleton_value(&g)?).max(0.0);
        Ok((energy + mu * shortfall * shortfall, energy, shortfall))
    };

    let prol = Prolongation::new(cfg.nc_t, cfg.nc_x, grid);
    let dim = cfg.nc_t * cfg.nc_x;
    let mut theta = vec![0.0; dim];
    let mut trace = Vec::with_capacity(cfg.stages);
    for stage in 0..cfg.stages {
        let mu = cfg.mu0 * 4f64.powi(stage as i32);
        let mut step = cfg.step0;
        let mut f_base = evaluate(&theta, mu, &prol)?.0;
        for _ in 0..cfg.iters_per_stage {
            let mut grad = vec![0.0; dim];
            let mut gnorm_sq = 0.0;
            for idx in 0..dim {
                let saved = theta[idx];
                theta[idx] = saved + cfg.fd_step;
                let f_plus = evaluate(&theta, mu, &prol)?.0;
                theta[idx] = saved;
                let gi = (f_plus - f_base) / cfg.fd_step;
                grad[idx] = gi;
                gnorm_sq += gi * gi;
            }
            if gnorm_sq.sqrt() < 1e-12 {
                break;
            }
            let mut advanced = false;
            for _ in 0..24 {
                let trial: Vec<f64> = theta
                    .iter()
                    .zip(&grad)
                    .map(|(&t, &g)| t - step * g)
                    .collect();
                let f_trial = evaluate(&trial, mu, &prol)?.0;
                if f_trial < f_base {
                    theta = trial;
                    f_base = f_trial;
                    step *= 1.5;
                    advanced = true;
                    break;
                }
                step *= 0.5;
            }
            if !advanced {
                break;
            }
        }
        trace.push(f_base);
    }

    // Feasibility polish: the smallest multiple of the found control that
    // meets the event keeps the upper-bound property and removes both the
    // penalty's residual shortfall and any overshoot.
    let g_raw = prol.control(&theta, grid);
    let scan_points = 33;
    let mut lo = 0.0;
    let mut hi = f64::NAN;
    for s in 0..=scan_points {
        let c = 2.0 * s as f64 / scan_points as f64;
        if skeleton_value(&g_raw.scaled(c))? >= event.level {
            hi = c;
            break;
        }
        lo = c;
    }
    if hi.is_nan() {
        let shortfall = (event.level - skeleton_value(&g_raw.scaled(2.0))?).max(0.0);
        return Ok(RateResult {
            event: event.clone(),
            g_star: g_raw,
            energy: f64::INFINITY,
            constraint_residual: shortfall,
            feasible: false,
            trace,
        });
    }
    for _ in 0..24 {
        let mid = 0.5 * (lo + hi);
        if skeleton_value(&g_raw.scaled(mid))? >= event.level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let g_star = g_raw.scaled(hi);
    let residual = (event.level - skeleton_value(&g_star)?).max(0.0);
    let energy = g_star.energy(hp, grid);
    Ok(RateResult {
        event: event.clone(),
        g_star,
        energy,
        constraint_residual: residual,
        feasible: residual <= cfg.constraint_tol,
        trace,
    })
}

/// One eps rung of the tail estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailRow {
    pub eps: f64,
    pub n: usize,
    pub hits: u64,
    pub p_hat: f64,
    pub se: f64,
    pub r_hat: f64,
    pub zero_hits: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailEstimate {
    pub rows: Vec<TailRow>,
}

/// Monte Carlo tail probabilities along a decreasing eps ladder with one
/// shared noise panel (common random numbers across rungs and, via the
/// replicate-indexed generator, across runs with the same seed). p_hat
/// carries the Laplace correction (hits + 1/2) / (n + 1) so r_hat =
/// -eps log p_hat survives zero-hit cells, which are flagged.
#[allow(clippy::too_many_arguments)]
pub fn mc_tail(
    event: &EventSpec,
    data: &InitialData,
    sigma: &DiffusionCoefficient,
    hp: &HurstParam,
    grid: &Grid,
    eps_ladder: &[f64],
    n_samples: usize,
    seed: u64,
    method: SamplingMethod,
) -> Result<TailEstimate, CoreError> {
    event.validate(grid)?;
    if n_samples < 1000 {
        return Err(CoreError::InvalidParameter(format!(
            "tail estimation needs at least 1000 samples, got {n_samples}"
        )));
    }
    if eps_ladder.is_empty()
        || eps_ladder.iter().any(|&e| !e.is_finite() || e <= 0.0)
        || eps_ladder.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(CoreError::InvalidParameter(
            "eps ladder must be strictly decreasing and positive".into(),
        ));
    }
    if !grid.covers_light_cone(data.support_radius) {
        return Err(CoreError::InvalidParameter(format!(
            "domain half-width {} too small for support radius {} and horizon {}",
            grid.l, data.support_radius, grid.t
        )));
    }
    let spec = NoiseSpec {
        hp: *hp,
        grid: *grid,
        seed,
        method,
    };
    let sampler = NoiseSampler::new(&spec)?;
    let i0 = initial_term_i0(data, grid);
    let mut hits = vec![0u64; eps_ladder.len()];
    for rep in 0..n_samples {
        let dw = sampler.sample(rep as u64);
        for (slot, &eps) in hits.iter_mut().zip(eps_ladder) {
            let u = forward_prepared(sigma, eps, Some(&dw), None, grid, &i0)?;
            if event.hit(&u, grid) {
                *slot += 1;
            }
        }
    }
    let rows = eps_ladder
        .iter()
        .zip(&hits)
        .map(|(&eps, &h)| {
            let p_hat = (h as f64 + 0.5) / (n_samples as f64 + 1.0);
            TailRow {
                eps,
                n: n_samples,
                hits: h,
                p_hat,
                se: (p_hat * (1.0 - p_hat) / n_samples as f64).sqrt(),
                r_hat: -eps * p_hat.ln(),
                zero_hits: h == 0,
            }
        })
        .collect();
    Ok(TailEstimate { rows })
}

/// Canonical exceedance thresholds for [`condition_b_probe`].
pub const CONDITION_B_DELTAS: [f64; 3] = [0.1, 0.05, 0.01];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionBReport {
    pub eps: Vec<f64>,
    pub deltas: Vec<f64>,
    /// exceed_prob[e][d] = empirical P(d_C > deltas[d]) at eps[e].
    pub exceed_prob: Vec<Vec<f64>>,
    pub n_samples: usize,
}

/// For each eps, Monte Carlo over the noise of the path distance between
/// the controlled solution and the skeleton of the same control. All
/// controls must share the energy ball S^`n_bound`. An eps of exactly 0 is
/// allowed as the degenerate rung: there the controlled solve IS the
/// skeleton and every exceedance probability is 0.
#[allow(clippy::too_many_arguments)]
pub fn condition_b_probe(
    g_family: &[Control],
    eps_ladder: &[f64],
    data: &InitialData,
    sigma: &DiffusionCoefficient,
    hp: &HurstParam,
    grid: &Grid,
    n_samples: usize,
    n_bound: f64,
    deltas: &[f64],
    seed: u64,
    method: SamplingMethod,
) -> Result<ConditionBReport, CoreError> {
    if g_family.len() != eps_ladder.len() || g_family.is_empty() {
        return Err(CoreError::InvalidParameter(
            "control family and eps ladder must have equal nonzero length".into(),
        ));
    }
    if eps_ladder.iter().any(|&e| !e.is_finite() || e < 0.0)
        || eps_ladder.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(CoreError::InvalidParameter(
            "eps ladder must be strictly decreasing and nonnegative".into(),
        ));
    }
    if deltas.iter().any(|&d| d.is_nan() || d <= 0.0) {
        return Err(CoreError::InvalidParameter(
            "exceedance thresholds must be positive".into(),
        ));
    }
    for (idx, g) in g_family.iter().enumerate() {
        if !g.in_s_n(n_bound, hp, grid) {
            return Err(CoreError::InvalidParameter(format!(
                "control {idx} leaves the energy ball S^{n_bound}"
            )));
        }
    }
    if !grid.covers_light_cone(data.support_radius) {
        return Err(CoreError::InvalidParameter(format!(
            "domain half-width {} too small for support radius {} and horizon {}",
            grid.l, data.support_radius, grid.t
        )));
    }

    let i0 = initial_term_i0(data, grid);
    let engine = DriftEngine::new(hp, grid, 0.0)?;
    let spec = NoiseSpec {
        hp: *hp,
        grid: *grid,
        seed,
        method,
    };
    let sampler = NoiseSampler::new(&spec)?;
    let mut exceed = vec![vec![0.0; deltas.len()]; eps_ladder.len()];
    for (e_idx, (&eps, g)) in eps_ladder.iter().zip(g_family).enumerate() {
        let (u_bar, _) = solve_skeleton(data, sigma, g, hp, grid, 0.0, 0.0, grid.nt + 5)?;
        if eps == 0.0 {
            let u_tilde = forward_prepared(sigma, 0.0, None, Some((g, &engine)), grid, &i0)?;
            let d = dc_metric(&u_tilde, &u_bar, grid);
            for (d_idx, &delta) in deltas.iter().enumerate() {
                exceed[e_idx][d_idx] = if d > delta { 1.0 } else { 0.0 };
            }
            continue;
        }
        let mut counts = vec![0usize; deltas.len()];
        for rep in 0..n_samples {
            let dw = sampler.sample(rep as u64);
            let u_tilde =
                forward_prepared(sigma, eps, Some(&dw), Some((g, &engine)), grid, &i0)?;
            let d = dc_metric(&u_tilde, &u_bar, grid);
            for (slot, &delta) in counts.iter_mut().zip(deltas) {
                if d > delta {
                    *slot += 1;
                }
            }
        }
        for (slot, &c) in exceed[e_idx].iter_mut().zip(&counts) {
            *slot = c as f64 / n_samples as f64;
        }
    }
    Ok(ConditionBReport {
        eps: eps_ladder.to_vec(),
        deltas: deltas.to_vec(),
        exceed_prob: exceed,
        n_samples,
    })
}
