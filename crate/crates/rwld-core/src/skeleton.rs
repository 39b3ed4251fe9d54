//! Deterministic skeleton equation: Picard iteration for the controlled
//! wave equation with the noise replaced by a control paired through the
//! fractional inner product, plus the probes the large-deviation analysis
//! rests on (uniqueness residuals, mollified families, weak convergence).

use crate::drift::{drift_at, DriftEngine};
use crate::error::CoreError;
use crate::fracspace::{dc_metric, frac_seminorm_aggregate, h_inner_difference, zp_norm};
use crate::grid::{Field, Grid, GridFunction};
use crate::hurst::HurstParam;
use crate::quad::SingularLagRule;
use crate::swe::{bump_profile, initial_term_i0, DiffusionCoefficient, InitialData};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Piecewise-constant-in-time control: one spatial row per time slab
/// `[t_m, t_{m+1})`, each sampled on the nx + 1 nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Control {
    nt: usize,
    nx: usize,
    data: Vec<f64>,
}

impl Control {
    pub fn zeros(grid: &Grid) -> Self {
        Control {
            nt: grid.nt,
            nx: grid.nx,
            data: vec![0.0; grid.nt * (grid.nx + 1)],
        }
    }

    /// Sample `f(t_m, x_q)` at the slab left points.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut g = Control::zeros(grid);
        for m in 0..grid.nt {
            let t = grid.time(m);
            for q in 0..=grid.nx {
                g.data[m * (grid.nx + 1) + q] = f(t, grid.node(q));
            }
        }
        g
    }

    /// Time-constant bump profile scaled so the control energy
    /// `int_0^T ||g(t)||^2 dt` equals `target` exactly.
    pub fn bump_with_energy(
        target: f64,
        hp: &HurstParam,
        grid: &Grid,
    ) -> Result<Self, CoreError> {
        if !target.is_finite() || target < 0.0 {
            return Err(CoreError::InvalidParameter(format!(
                "control energy target must be finite and >= 0, got {target}"
            )));
        }
        if target == 0.0 {
            return Ok(Control::zeros(grid));
        }
        let psi = GridFunction::from_fn(grid, bump_profile);
        let norm_sq = h_inner_difference(&psi, &psi, hp, grid);
        if norm_sq <= 0.0 {
            return Err(CoreError::Numerical(format!(
                "bump profile has nonpositive squared norm {norm_sq} on this grid"
            )));
        }
        let scale = (target / (grid.t * norm_sq)).sqrt();
        Ok(Control::from_fn(grid, |_, x| scale * bump_profile(x)))
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn row(&self, m: usize) -> &[f64] {
        assert!(m < self.nt);
        &self.data[m * (self.nx + 1)..(m + 1) * (self.nx + 1)]
    }

    pub fn row_mut(&mut self, m: usize) -> &mut [f64] {
        assert!(m < self.nt);
        &mut self.data[m * (self.nx + 1)..(m + 1) * (self.nx + 1)]
    }

    pub fn scaled(&self, factor: f64) -> Control {
        Control {
            nt: self.nt,
            nx: self.nx,
            data: self.data.iter().map(|&v| factor * v).collect(),
        }
    }

    /// Half the time integral of the squared fractional norm,
    /// `(1/2) sum_m dt ||g(t_m, .)||^2`, the quantity the rate function
    /// accumulates.
    pub fn energy(&self, hp: &HurstParam, grid: &Grid) -> f64 {
        assert_eq!(self.nt, grid.nt);
        assert_eq!(self.nx, grid.nx);
        let dt = grid.dt();
        let mut total = 0.0;
        for m in 0..self.nt {
            let row = GridFunction {
                values: self.row(m).to_vec(),
            };
            total += dt * h_inner_difference(&row, &row, hp, grid);
        }
        0.5 * total
    }

    /// Membership in the energy ball S^N: `int ||g||^2 dt <= N`.
    pub fn in_s_n(&self, n: f64, hp: &HurstParam, grid: &Grid) -> bool {
        2.0 * self.energy(hp, grid) <= n
    }

    pub fn save(&self, path: &Path, grid: &Grid) -> Result<(), CoreError> {
        assert_eq!(self.nt, grid.nt);
        assert_eq!(self.nx, grid.nx);
        crate::io::write_raw(path, "control", grid, &self.data)
    }

    pub fn load(path: &Path) -> Result<(Self, Grid), CoreError> {
        let (data, grid) = crate::io::read_raw(path, "control", |g| g.nt * (g.nx + 1))?;
        Ok((
            Control {
                nt: grid.nt,
                nx: grid.nx,
                data,
            },
            grid,
        ))
    }
}

/// Per-iteration record of the Picard run: the iterate fields and the two
/// distance components between consecutive iterates, sup-in-time L2 and
/// sup-in-time fractional seminorm.
#[derive(Debug)]
pub struct PicardTrace {
    pub sup_l2: Vec<f64>,
    pub seminorm: Vec<f64>,
    pub iterates: Vec<Field>,
    pub iterations: usize,
}

impl PicardTrace {
    /// Combined distance per iteration, the quantity tested against tol.
    pub fn distances(&self) -> Vec<f64> {
        self.sup_l2
            .iter()
            .zip(&self.seminorm)
            .map(|(a, b)| a + b)
            .collect()
    }
}

/// One application of the Picard map: I0 plus the drift of the previous
/// iterate, left-point in time, with the pairing chosen by `engine`.
fn picard_map(
    i0: &Field,
    cur: &Field,
    sigma: &DiffusionCoefficient,
    g: &Control,
    engine: &DriftEngine,
    grid: &Grid,
) -> Result<Field, CoreError> {
    let nx = grid.nx;
    let nt = grid.nt;
    let dt = grid.dt();
    let tables: Vec<_> = (0..nt)
        .map(|m| {
            let t_m = grid.time(m);
            let phi: Vec<f64> = (0..=nx)
                .map(|q| sigma.eval(t_m, grid.node(q), cur.at(m, q)))
                .collect();
            engine.slab(&phi, g.row(m))
        })
        .collect();
    let mut next = i0.clone();
    for i in 1..=nt {
        for j in 0..=nx {
            let drift = drift_at(&tables[..i], dt, i, j);
            if drift != 0.0 {
                *next.at_mut(i, j) += drift;
            }
        }
        if let Some(j_bad) = next.row(i).iter().position(|v| !v.is_finite()) {
            return Err(CoreError::Numerical(format!(
                "Picard iterate not finite at time index {i}, node {j_bad}"
            )));
        }
    }
    Ok(next)
}

fn iterate_distance(a: &Field, b: &Field, hp: &HurstParam, grid: &Grid) -> (f64, f64) {
    let mut sup_l2: f64 = 0.0;
    let mut sup_semi: f64 = 0.0;
    for i in 0..=grid.nt {
        let diff = GridFunction {
            values: a
                .row(i)
                .iter()
                .zip(b.row(i))
                .map(|(x, y)| x - y)
                .collect(),
        };
        sup_l2 = sup_l2.max(diff.l2_norm_sq(grid).sqrt());
        sup_semi = sup_semi.max(frac_seminorm_aggregate(&diff, hp, grid));
    }
    (sup_l2, sup_semi)
}

/// Picard iteration for the skeleton equation, started from I0.
#[allow(clippy::too_many_arguments)]
pub fn solve_skeleton(
    data: &InitialData,
    sigma: &DiffusionCoefficient,
    g: &Control,
    hp: &HurstParam,
    grid: &Grid,
    eps_mollify: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(Field, PicardTrace), CoreError> {
    solve_skeleton_with_init(data, sigma, g, hp, grid, eps_mollify, tol, max_iter, None)
}

/// Picard iteration from an arbitrary initial iterate (defaults to I0).
/// Converges when consecutive iterates are within `tol` in the combined
/// sup-L2 + seminorm distance; otherwise reports the distance trace.
#[allow(clippy::too_many_arguments)]
pub fn solve_skeleton_with_init(
    data: &InitialData,
    sigma: &DiffusionCoefficient,
    g: &Control,
    hp: &HurstParam,
    grid: &Grid,
    eps_mollify: f64,
    tol: f64,
    max_iter: usize,
    init: Option<&Field>,
) -> Result<(Field, PicardTrace), CoreError> {
    if !tol.is_finite() || tol < 0.0 {
        return Err(CoreError::InvalidParameter(format!(
            "tolerance must be finite and >= 0, got {tol}"
        )));
    }
    if max_iter == 0 {
        return Err(CoreError::InvalidParameter(
            "max_iter must be at least 1".into(),
        ));
    }
    if g.nt() != grid.nt || g.nx() != grid.nx {
        return Err(CoreError::InvalidParameter(format!(
            "control is {}x{}, grid needs {}x{}",
            g.nt(),
            g.nx(),
            grid.nt,
            grid.nx
        )));
    }
    if !grid.covers_light_cone(data.support_radius) {
        return Err(CoreError::InvalidParameter(format!(
            "domain half-width {} too small for support radius {} and horizon {}",
            grid.l, data.support_radius, grid.t
        )));
    }
    let engine = DriftEngine::new(hp, grid, eps_mollify)?;
    let i0 = initial_term_i0(data, grid);
    let mut cur = match init {
        Some(f) => {
            if f.nt != grid.nt || f.nx != grid.nx {
                return Err(CoreError::InvalidParameter(
                    "initial iterate does not match the grid".into(),
                ));
            }
            f.clone()
        }
        None => i0.clone(),
    };
    let mut trace = PicardTrace {
        sup_l2: Vec::new(),
        seminorm: Vec::new(),
        iterates: Vec::new(),
        iterations: 0,
    };
    for _ in 0..max_iter {
        let next = picard_map(&i0, &cur, sigma, g, &engine, grid)?;
        let (dl2, dsem) = iterate_distance(&next, &cur, hp, grid);
        trace.sup_l2.push(dl2);
        trace.seminorm.push(dsem);
        trace.iterates.push(next.clone());
        trace.iterations += 1;
        cur = next;
        if dl2 + dsem <= tol {
            return Ok((cur, trace));
        }
    }
    let distances = trace.distances();
    Err(CoreError::NoConvergence {
        iterations: trace.iterations,
        last_distance: *distances.last().unwrap(),
        trace: distances,
    })
}

/// Per-time Gronwall residuals between two fields: S1(t_i) is the squared
/// L2 distance of the rows, S2(t_i) the squared in-domain fractional
/// seminorm of their difference (lag pairs confined to the grid, so a
/// constant difference contributes nothing).
pub fn uniqueness_residual(
    u: &Field,
    v: &Field,
    hp: &HurstParam,
    grid: &Grid,
) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(u.nt, grid.nt);
    assert_eq!(u.nx, grid.nx);
    assert_eq!(v.nt, grid.nt);
    assert_eq!(v.nx, grid.nx);
    let dx = grid.dx();
    let rule = SingularLagRule::new(grid.nx, dx, hp.lag_exponent());
    let mut s1 = Vec::with_capacity(grid.nt + 1);
    let mut s2 = Vec::with_capacity(grid.nt + 1);
    for i in 0..=grid.nt {
        let d: Vec<f64> = u
            .row(i)
            .iter()
            .zip(v.row(i))
            .map(|(a, b)| a - b)
            .collect();
        let df = GridFunction { values: d.clone() };
        s1.push(df.l2_norm_sq(grid));
        let mut samples = vec![0.0; grid.nx + 1];
        for (k, slot) in samples.iter_mut().enumerate().skip(1) {
            let mut acc = 0.0;
            for j in 0..=grid.nx - k {
                let inc = d[j + k] - d[j];
                acc += inc * inc;
            }
            *slot = acc * dx;
        }
        s2.push(2.0 * hp.c2 * rule.apply(&samples));
    }
    (s1, s2)
}

/// Solutions of the mollified skeleton family against the rough limit.
pub struct MollifiedFamilyReport {
    pub eps_list: Vec<f64>,
    /// d_C(u_eps, u_0) per entry of `eps_list`.
    pub d_c: Vec<f64>,
    /// Z^2 norm of each mollified solution, same order.
    pub z2: Vec<f64>,
    /// Z^2 norm of the rough (eps = 0) solution.
    pub z2_rough: f64,
}

/// Solve the skeleton equation for each mollification level and compare
/// with the rough solution in the path metric and the Z^2 norm.
#[allow(clippy::too_many_arguments)]
pub fn mollified_family_probe(
    data: &InitialData,
    sigma: &DiffusionCoefficient,
    g: &Control,
    hp: &HurstParam,
    grid: &Grid,
    eps_list: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<MollifiedFamilyReport, CoreError> {
    if eps_list.iter().any(|&e| e.is_nan() || e <= 0.0) {
        return Err(CoreError::InvalidParameter(
            "mollification list must be strictly positive; the rough solve is implicit".into(),
        ));
    }
    let (rough, _) = solve_skeleton(data, sigma, g, hp, grid, 0.0, tol, max_iter)?;
    let z2_rough = zp_norm(&rough, 2.0, hp, grid);
    let mut d_c = Vec::with_capacity(eps_list.len());
    let mut z2 = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let (u_eps, _) = solve_skeleton(data, sigma, g, hp, grid, eps, tol, max_iter)?;
        d_c.push(dc_metric(&u_eps, &rough, grid));
        z2.push(zp_norm(&u_eps, 2.0, hp, grid));
    }
    Ok(MollifiedFamilyReport {
        eps_list: eps_list.to_vec(),
        d_c,
        z2,
        z2_rough,
    })
}

/// Skeleton solutions along a weakly-null oscillation family.
pub struct WeakConvergenceReport {
    pub modes: Vec<u32>,
    /// d_C(u^{g_n}, u^g) per mode.
    pub d_c: Vec<f64>,
    /// Control energy per mode (the base control's energy comes first).
    pub base_energy: f64,
    pub energies: Vec<f64>,
}

/// Perturb `g` by psi(x) sin(n pi t / T) per mode n and measure how the
/// skeleton solution drifts from the unperturbed one. For even modes on a
/// time-constant base control the perturbation adds the same energy for
/// every mode (discrete orthogonality), isolating the weak-convergence
/// effect.
#[allow(clippy::too_many_arguments)]
pub fn weak_convergence_probe(
    data: &InitialData,
    sigma: &DiffusionCoefficient,
    g: &Control,
    psi: &GridFunction,
    modes: &[u32],
    hp: &HurstParam,
    grid: &Grid,
    eps_mollify: f64,
    tol: f64,
    max_iter: usize,
) -> Result<WeakConvergenceReport, CoreError> {
    if psi.len() != grid.nx + 1 {
        return Err(CoreError::InvalidParameter(
            "oscillation profile does not match the grid".into(),
        ));
    }
    let (base, _) = solve_skeleton(data, sigma, g, hp, grid, eps_mollify, tol, max_iter)?;
    let base_energy = g.energy(hp, grid);
    let mut d_c = Vec::with_capacity(modes.len());
    let mut energies = Vec::with_capacity(modes.len());
    for &n in modes {
        let mut g_n = g.clone();
        for m in 0..grid.nt {
            let phase = (n as f64 * std::f64::consts::PI * grid.time(m) / grid.t).sin();
            for (slot, &p) in g_n.row_mut(m).iter_mut().zip(&psi.values) {
                *slot += phase * p;
            }
        }
        energies.push(g_n.energy(hp, grid));
        let (u_n, _) = solve_skeleton(data, sigma, &g_n, hp, grid, eps_mollify, tol, max_iter)?;
        d_c.push(dc_metric(&u_n, &base, grid));
    }
    Ok(WeakConvergenceReport {
        modes: modes.to_vec(),
        d_c,
        base_energy,
        energies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::swe::solve_controlled;

    fn hp04() -> HurstParam {
        HurstParam::new(0.4).unwrap()
    }

    fn grid32() -> Grid {
        Grid::new(4.0, 32, 1.0, 32).unwrap()
    }

    #[test]
    fn zero_control_returns_initial_term() {
        let grid = grid32();
        let hp = hp04();
        let data = InitialData::bump();
        let sigma = DiffusionCoefficient::linear(2.25);
        let g = Control::zeros(&grid);
        let (u, trace) =
            solve_skeleton(&data, &sigma, &g, &hp, &grid, 0.0, 1e-8, 60).unwrap();
        assert_eq!(u, initial_term_i0(&data, &grid));
        assert_eq!(trace.iterations, 1);
        assert_eq!(trace.distances()[0], 0.0);
    }

    #[test]
    fn converged_solution_is_a_fixed_point() {
        let grid = grid32();
        let hp = hp04();
        let data = InitialData::bump();
        let sigma = DiffusionCoefficient::linear(2.25);
        let g = Control::bump_with_energy(0.861, &hp, &grid).unwrap();
        let tol = 1e-9;
        let (u, trace) =
            solve_skeleton(&data, &sigma, &g, &hp, &grid, 0.0, tol, 60).unwrap();
        assert!(trace.iterations < 60);
        let last = trace.distances().last().copied().unwrap();
        assert!(last <= tol);

        let (_, re_trace) = solve_skeleton_with_init(
            &data,
            &sigma,
            &g,
            &hp,
            &grid,
            0.0,
            f64::MAX,
            1,
            Some(&u),
        )
        .unwrap();
        let residual = re_trace.distances()[0];
        assert!(
            residual <= 5.0 * tol,
            "fixed-point residual {residual} exceeds 5 tol"
        );
    }

    #[test]
    fn picard_limit_matches_forward_controlled_solve() {
        let grid = grid32();
        let hp = hp04();
        let data = InitialData::bump();
        let sigma = DiffusionCoefficient::linear(2.25);
        let g = Control::bump_with_energy(0.861, &hp, &grid).unwrap();
        // tol 0 runs to exact stationarity: the Picard map is nilpotent in
        // the time index, so iterates freeze row by row.
        let (u, trace) =
            solve_skeleton(&data, &sigma, &g, &hp, &grid, 0.0, 0.0, grid.nt + 5).unwrap();
        assert!(trace.iterations <= grid.nt + 2);
        let forward = solve_controlled(&data, &sigma, 0.0, None, &g, 0.0, &hp, &grid).unwrap();
        assert_eq!(u, forward.u);
    }

    #[test]
    fn picard_distances_contract() {
        let grid = grid32();
        let hp = hp04();
        let data = InitialData::bump();
        let sigma = DiffusionCoefficient::linear(2.25);
        let g = Control::bump_with_energy(0.861, &hp, &grid).unwrap();
        let (_, trace) =
            solve_skeleton(&data, &sigma, &g, &hp, &grid, 0.0, 1e-10, 60).unwrap();
        let d = trace.distances();
        assert!(d.len() >= 4, "expected several iterations, got {d:?}");
        for n in 1..d.len() - 1 {
            assert!(
                d[n + 1] < d[n],
                "distances not decreasing at step {n}: {d:?}"
            );
        }
    }

    #[test]
    fn different_initializations_share_the_limit() {
        let grid = grid32();
        let hp = hp04();
        let data = InitialData::bump();
        let sigma = DiffusionCoefficient::linear(2.25);
        let g = Control::bump_with_energy(0.861, &hp, &grid).unwrap();
        let (u_a, _) =
            solve_skeleton(&data, &sigma, &g, &hp, &grid, 0.0, 0.0, grid.nt + 5).unwrap();
        let mut init = initial_term_i0(&data, &grid);
        for i in 0..=grid.nt {
            for j in 0..=grid.nx {
                *init.at_mut(i, j) += bump_profile(grid.node(j) / 2.0);
            }
        }
        let (u_b, _) = solve_skeleton_with_init(
            &data,
            &sigma,
            &g,
            &hp,
            &grid,
            0.0,
            0.0,
            grid.nt + 5,
            Some(&init),
        )
        .unwrap();
        let (s1, s2) = uniqueness_residual(&u_a, &u_b, &hp, &grid);
        let worst = s1
            .iter()
            .zip(&s2)
            .map(|(a, b)| a + b)
            .fold(0.0f64, f64::max);
        assert_eq!(worst, 0.0);
    }

    #[test]
    fn uniqueness_residual_constant_difference() {
        let grid = grid32();
        let hp = hp04();
        let u = Field::from_fn(&grid, |t, x| (x - t).sin());
        let mut v = u.clone();
        for i in 0..=grid.nt {
            for j in 0..=grid.nx {
                *v.at_mut(i, j) += 2.5;
            }
        }
        let (s1, s2) = uniqueness_residual(&u, &v, &hp, &grid);
        for i in 0..=grid.nt {
            assert!((s1[i] - 2.5 * 2.5 * 2.0 * grid.l).abs() < 1e-9);
            assert!(s2[i].abs() < 1e-15);
        }
        let (s1, s2) = uniqueness_residual(&u, &u, &hp, &grid);
        assert!(s1.iter().all(|&v| v == 0.0));
        assert!(s2.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn control_energy_and_membership() {
        let grid = grid32();
        let hp = hp04();
        let g = Control::bump_with_energy(0.861, &hp, &grid).unwrap();
        let energy = g.energy(&hp, &grid);
        assert!((2.0 * energy - 0.861).abs() < 1e-9 * 0.861);
        assert!(g.in_s_n(1.0, &hp, &grid));
        assert!(!g.in_s_n(0.5, &hp, &grid));
        assert_eq!(Control::zeros(&grid).energy(&hp, &grid), 0.0);
        assert!(Control::bump_with_energy(-1.0, &hp, &grid).is_err());
    }

    #[test]
    fn weak_convergence_probe_behaves() {
        let grid = grid32();
        let hp = hp04();
        let data = InitialData::bump();
        let sigma = DiffusionCoefficient::linear(2.25);
        let g = Control::bump_with_energy(0.861, &hp, &grid).unwrap();
        let psi = GridFunction::from_fn(&grid, bump_profile);
        // Modes stay below nt / 2: at nt = 32 a mode-32 oscillation would
        // alias to zero on the slab lattice.
        let report = weak_convergence_probe(
            &data,
            &sigma,
            &g,
            &psi,
            &[2, 4, 8],
            &hp,
            &grid,
            0.0,
            1e-10,
            60,
        )
        .unwrap();
        let e0 = report.energies[0];
        for &e in &report.energies {
            assert!(
                (e - e0).abs() <= 1e-9 * e0,
                "oscillation energies differ: {:?}",
                report.energies
            );
        }
        assert!(report.energies[0] > report.base_energy);
        assert!(
            report.d_c[0] > report.d_c[1] && report.d_c[1] > report.d_c[2],
            "d_C not strictly decreasing over modes: {:?}",
            report.d_c
        );
    }

    #[test]
    fn mollified_family_converges_to_rough() {
        let grid = grid32();
        let hp = hp04();
        let data = InitialData::bump();
        let sigma = DiffusionCoefficient::linear(2.25);
        let g = Control::bump_with_energy(0.861, &hp, &grid).unwrap();
        let report = mollified_family_probe(
            &data,
            &sigma,
            &g,
            &hp,
            &grid,
            &[0.5, 0.1, 0.02],
            1e-9,
            60,
        )
        .unwrap();
        assert!(
            report.d_c[0] > report.d_c[1] && report.d_c[1] > report.d_c[2],
            "d_C not decreasing along the mollified family: {:?}",
            report.d_c
        );
        let mut all = report.z2.clone();
        all.push(report.z2_rough);
        let max = all.iter().cloned().fold(f64::MIN, f64::max);
        let min = all.iter().cloned().fold(f64::MAX, f64::min);
        assert!(
            (max - min) / min <= 0.2,
            "Z^2 norms vary more than 20%: {all:?}"
        );
        assert!(mollified_family_probe(
            &data, &sigma, &g, &hp, &grid, &[0.5, 0.0], 1e-9, 60
        )
        .is_err());
    }

    #[test]
    fn non_convergence_reports_trace() {
        let grid = grid32();
        let hp = hp04();
        let data = InitialData::bump();
        let sigma = DiffusionCoefficient::linear(2.25);
        let g = Control::bump_with_energy(0.861, &hp, &grid).unwrap();
        let err = solve_skeleton(&data, &sigma, &g, &hp, &grid, 0.0, 1e-12, 2).unwrap_err();
        match err {
            CoreError::NoConvergence {
                iterations,
                last_distance,
                trace,
            } => {
                assert_eq!(iterations, 2);
                assert_eq!(trace.len(), 2);
                assert!(last_distance > 1e-12);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn control_round_trips() {
        let grid = grid32();
        let hp = hp04();
        let g = Control::bump_with_energy(0.5, &hp, &grid).unwrap();
        let dir = std::env::temp_dir().join("rwld-skeleton-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("control.rwld");
        g.save(&path, &grid).unwrap();
        let (g2, grid2) = Control::load(&path).unwrap();
        assert_eq!(g, g2);
        assert_eq!(grid, grid2);
        std::fs::remove_file(&path).ok();

        let json = serde_json::to_string(&g).unwrap();
        let g3: Control = serde_json::from_str(&json).unwrap();
        assert_eq!(g, g3);
    }
}
