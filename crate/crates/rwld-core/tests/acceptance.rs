//! Acceptance gate: one test per shipped guarantee. Each test prints a
//! single pass/fail line with the measured value and its pinned tolerance,
//! written straight to stdout so the line survives harness capture.

use rwld_core::fracspace::{h_eps_inner, h_inner_difference, h_inner_fourier, mollifier_f_eps_origin};
use rwld_core::kernels::{frac_integral_box, frac_integral_d, frac_integral_d_quadrature, verify_decomposition};
use rwld_core::ldp::{condition_b_probe, mc_tail, rate_minimize, EventSpec, OptConfig, CONDITION_B_DELTAS};
use rwld_core::noise::{build_spatial_covariance, walsh_integral, NoiseSampler, NoiseSpec, SamplingMethod};
use rwld_core::quad::gamma;
use rwld_core::skeleton::{solve_skeleton, solve_skeleton_with_init, uniqueness_residual, weak_convergence_probe, Control};
use rwld_core::swe::{bump_profile, initial_term_i0, solve_controlled, solve_swe, DiffusionCoefficient, InitialData};
use rwld_core::{Field, Grid, GridFunction, HurstParam};

/// Emit the one-line verdict for a criterion and fail the test on a miss.
/// Direct stdout writes bypass the harness capture, so the line shows up
/// in plain `cargo test` output for passing tests too.
fn verdict(number: usize, name: &str, ok: bool, detail: &str) {
    use std::io::Write;
    {
        let mut out = std::io::stdout().lock();
        writeln!(
            out,
            "acceptance {number:02} {name}: {} ({detail})",
            if ok { "PASS" } else { "FAIL" }
        )
        .unwrap();
    }
    assert!(ok, "acceptance {number:02} {name}: FAIL ({detail})");
}

fn hp(h: f64) -> HurstParam {
    HurstParam::new(h).unwrap()
}

/// Reference configuration used by the solver-level criteria: rough noise
/// at H = 0.4, bump initial displacement at rest, linear diffusion with
/// slope 2.25, unit horizon on a light-cone-covering domain.
fn standard_case() -> (InitialData, DiffusionCoefficient, HurstParam, Grid) {
    (
        InitialData::bump(),
        DiffusionCoefficient::linear(2.25),
        hp(0.4),
        Grid::new(4.0, 64, 1.0, 64).unwrap(),
    )
}

/// The standard control: time-constant bump profile scaled to total
/// energy 0.861, squarely inside the unit energy ball.
fn standard_control(hp: &HurstParam, grid: &Grid) -> Control {
    Control::bump_with_energy(0.861, hp, grid).unwrap()
}

fn indicator(grid: &Grid, hi: f64) -> GridFunction {
    GridFunction::from_fn(grid, |y| if (0.0..=hi).contains(&y) { 1.0 } else { 0.0 })
}

#[test]
fn a01_fbm_norm_law() {
    let fourier_grid = Grid::new(4.0, 32768, 1.0, 4096).unwrap();
    let diff_grid = Grid::new(4.0, 8192, 1.0, 1024).unwrap();
    let mut worst_fourier: f64 = 0.0;
    let mut worst_diff: f64 = 0.0;
    for h in [0.3, 0.4] {
        let hp = hp(h);
        for x in [0.5f64, 1.0, 2.0] {
            let want = x.powf(2.0 * hp.h);
            let ind_f = indicator(&fourier_grid, x);
            let got_f = h_inner_fourier(&ind_f, &ind_f, &hp, &fourier_grid);
            worst_fourier = worst_fourier.max(((got_f - want) / want).abs());
            let ind_d = indicator(&diff_grid, x);
            let got_d = h_inner_difference(&ind_d, &ind_d, &hp, &diff_grid);
            worst_diff = worst_diff.max(((got_d - want) / want).abs());
        }
    }
    verdict(
        1,
        "fbm-norm-law",
        worst_fourier <= 0.01 && worst_diff <= 0.02,
        &format!("fourier rel {worst_fourier:.2e} <= 1e-2, difference rel {worst_diff:.2e} <= 2e-2"),
    );
}

#[test]
fn a02_noise_covariance() {
    let hp = hp(0.3);
    let grid = Grid::new(2.0, 64, 1.0, 16).unwrap();
    let n_rows = 100_000usize;
    let spec = NoiseSpec {
        hp,
        grid,
        seed: 41,
        method: SamplingMethod::ExactCholesky,
    };
    let sampler = NoiseSampler::new(&spec).unwrap();
    let n = grid.nx;
    let mut acc = vec![0.0f64; n * n];
    let reps = n_rows.div_ceil(grid.nt);
    let mut rows = 0usize;
    for rep in 0..reps {
        let dw = sampler.sample(rep as u64);
        for i in 0..grid.nt {
            let w = dw.row(i);
            for j in 0..n {
                for k in j..n {
                    acc[j * n + k] += w[j] * w[k];
                }
            }
            rows += 1;
        }
    }
    let q = build_spatial_covariance(&grid, &hp);
    let dt = grid.dt();
    let mut z_max: f64 = 0.0;
    let mut adj_emp_max = f64::NEG_INFINITY;
    let mut adj_q_max = f64::NEG_INFINITY;
    for j in 0..n {
        for k in j..n {
            let emp = acc[j * n + k] / rows as f64;
            let want = dt * q.at(j, k);
            let var = dt * dt * (q.at(j, j) * q.at(k, k) + q.at(j, k) * q.at(j, k));
            let z = (emp - want).abs() / (var / rows as f64).sqrt();
            z_max = z_max.max(z);
            if k == j + 1 {
                adj_emp_max = adj_emp_max.max(emp);
                adj_q_max = adj_q_max.max(want);
            }
        }
    }
    verdict(
        2,
        "noise-covariance",
        z_max <= 4.0 && adj_q_max < 0.0 && adj_emp_max < 0.0,
        &format!(
            "{rows} rows, worst z {z_max:.2} <= 4, adjacent cov {adj_q_max:.2e} and empirical {adj_emp_max:.2e} both < 0"
        ),
    );
}

#[test]
fn a03_walsh_isometry() {
    let hp = hp(0.4);
    let grid = Grid::new(2.0, 16, 1.0, 16).unwrap();
    // cell-aligned rectangles [0,t1) x [0,x1): the discrete second moment
    // is exactly t1 x1^{2H} because the spatial increments telescope
    let rects = [(0.25, 0.5), (0.5, 1.0), (1.0, 2.0), (1.0, 1.0), (0.5, 0.25)];
    let fields: Vec<Field> = rects
        .iter()
        .map(|&(t1, x1)| {
            Field::from_fn(&grid, |t, x| {
                if t < t1 - 1e-12 && (-1e-12..x1 - 1e-12).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            })
        })
        .collect();
    let n_samples = 100_000usize;
    let spec = NoiseSpec {
        hp,
        grid,
        seed: 31,
        method: SamplingMethod::ExactCholesky,
    };
    let sampler = NoiseSampler::new(&spec).unwrap();
    let mut acc = vec![0.0f64; rects.len()];
    for rep in 0..n_samples {
        let dw = sampler.sample(rep as u64);
        for (slot, f) in acc.iter_mut().zip(&fields) {
            let i = walsh_integral(f, &dw);
            *slot += i * i;
        }
    }
    let mut z_max: f64 = 0.0;
    for (&(t1, x1), &sum_sq) in rects.iter().zip(&acc) {
        let m2 = sum_sq / n_samples as f64;
        let want = t1 * x1.powf(2.0 * hp.h);
        let se = want * (2.0 / n_samples as f64).sqrt();
        z_max = z_max.max((m2 - want).abs() / se);
    }
    verdict(
        3,
        "walsh-isometry",
        z_max <= 4.0,
        &format!("5 rectangles at {n_samples} shared samples, worst z {z_max:.2} <= 4"),
    );
}

#[test]
fn a04_kernel_difference_integral() {
    let hp03 = hp(0.3);
    let ts = [0.25f64, 0.5, 1.0, 2.0];
    let mut closed_rel: f64 = 0.0;
    let mut quad_rel: f64 = 0.0;
    for &t in &ts {
        let want = (2.0 * t).powf(2.0 * hp03.h) / (2.0 * hp03.h * (1.0 - 2.0 * hp03.h));
        let closed = frac_integral_d(t, &hp03).unwrap();
        closed_rel = closed_rel.max(((closed - want) / want).abs());
        let quad = frac_integral_d_quadrature(t, &hp03).unwrap();
        quad_rel = quad_rel.max(((quad - closed) / closed).abs());
    }
    let mut slope_gap: f64 = 0.0;
    for h in [0.3, 0.4] {
        let hp_h = hp(h);
        let logs: Vec<(f64, f64)> = ts
            .iter()
            .map(|&t| (t.ln(), frac_integral_box(t, &hp_h).unwrap().ln()))
            .collect();
        let mx = logs.iter().map(|p| p.0).sum::<f64>() / logs.len() as f64;
        let my = logs.iter().map(|p| p.1).sum::<f64>() / logs.len() as f64;
        let slope = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<f64>();
        slope_gap = slope_gap.max((slope - (4.0 * h - 1.0)).abs());
    }
    verdict(
        4,
        "kernel-difference-integral",
        closed_rel <= 1e-9 && quad_rel <= 0.02 && slope_gap <= 0.05,
        &format!(
            "closed rel {closed_rel:.1e} <= 1e-9, quadrature rel {quad_rel:.1e} <= 2e-2, slope gap {slope_gap:.1e} <= 5e-2"
        ),
    );
}

#[test]
fn a05_kernel_decomposition() {
    // 3 x 3 x 3 geometry lattice: cone height, intermediate-time placement,
    // interior evaluation offset; every (alpha, beta) pair on {.3,.5,.7}^2.
    // Placements are generic: at the exactly balanced point (t-r = r-s
    // with x = y) the two singular cross-convolutions are individually
    // log-divergent and the identity holds only as a continuous extension.
    let mut worst: f64 = 0.0;
    for dt_s in [0.5, 1.0, 2.0] {
        for theta in [0.25, 0.55, 0.75] {
            for ratio in [0.0, 0.4, 0.8] {
                let (t, s) = (dt_s, 0.0);
                let r = s + theta * (t - s);
                let (x, y) = (ratio * (t - s), 0.0);
                for alpha in [0.3, 0.5, 0.7] {
                    for beta in [0.3, 0.5, 0.7] {
                        let res =
                            verify_decomposition(t, s, r, x, y, alpha, beta, 1024).unwrap();
                        worst = worst.max(res);
                    }
                }
            }
        }
    }
    verdict(
        5,
        "kernel-decomposition",
        worst <= 0.005,
        &format!("243 configurations, worst residual {worst:.2e} <= 5e-3 (1% of the cone height 1/2)"),
    );
}

#[test]
fn a06_mollifier_family() {
    let grid = Grid::new(4.0, 1024, 1.0, 128).unwrap();
    let corpus: Vec<GridFunction> = vec![
        GridFunction::from_fn(&grid, bump_profile),
        GridFunction::from_fn(&grid, |x| bump_profile(x - 0.5)),
        GridFunction::from_fn(&grid, |x| bump_profile(2.0 * x)),
        GridFunction::from_fn(&grid, |x| bump_profile(x + 1.5) + bump_profile(x - 1.5)),
        GridFunction::from_fn(&grid, |x| (1.0 - x.abs()).max(0.0)),
        GridFunction::from_fn(&grid, |x| (-x * x).exp()),
        GridFunction::from_fn(&grid, |x| if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 }),
        GridFunction::from_fn(&grid, |x| if (-0.5..=0.5).contains(&x) { 1.0 } else { 0.0 }),
        GridFunction::from_fn(&grid, |x| if (0.0..=2.0).contains(&x) { (std::f64::consts::PI * x).sin() } else { 0.0 }),
        GridFunction::from_fn(&grid, |x| if (0.0..=1.0).contains(&x) { x } else { 0.0 }),
    ];
    let eps_grid = [0.0, 0.25, 1.0, 4.0];
    let mut worst_increase = f64::NEG_INFINITY;
    for h in [0.3, 0.45] {
        let hp_h = hp(h);
        for phi in &corpus {
            let scale = h_inner_fourier(phi, phi, &hp_h, &grid).abs().max(1e-300);
            let mut prev = f64::INFINITY;
            for &eps in &eps_grid {
                let v = h_eps_inner(phi, phi, &hp_h, &grid, eps);
                worst_increase = worst_increase.max((v - prev) / scale);
                prev = v;
            }
        }
    }
    let mut origin_rel: f64 = 0.0;
    for h in [0.3, 0.45] {
        let hp_h = hp(h);
        for eps in [0.25, 1.0, 4.0] {
            let got = mollifier_f_eps_origin(eps, &hp_h);
            let want = gamma(1.0 - h) / (2.0 * std::f64::consts::PI * eps.powf(1.0 - h));
            origin_rel = origin_rel.max(((got - want) / want).abs());
        }
    }
    verdict(
        6,
        "mollifier-family",
        worst_increase <= 1e-12 && origin_rel <= 1e-6,
        &format!(
            "10-profile corpus largest normalized increase {worst_increase:.1e} <= 1e-12, origin rel {origin_rel:.1e} <= 1e-6"
        ),
    );
}

#[test]
fn a07_picard_convergence() {
    let (data, sigma, hp, grid) = standard_case();
    let g = standard_control(&hp, &grid);
    let (_, trace) = solve_skeleton(&data, &sigma, &g, &hp, &grid, 0.0, 1e-8, 60).unwrap();
    let d = trace.distances();
    let final_d = *d.last().unwrap();
    // contraction ratios over the positive prefix; super-linear decay
    // shows as ratios that themselves shrink
    let positive: Vec<f64> = d.iter().copied().take_while(|&v| v > 0.0).collect();
    let ratios: Vec<f64> = positive.windows(2).map(|w| w[1] / w[0]).collect();
    let tail = &ratios[ratios.len().saturating_sub(3)..];
    let superlinear = tail.len() >= 2
        && tail.windows(2).all(|w| w[1] < w[0])
        && tail.iter().all(|&r| r < 1.0);
    verdict(
        7,
        "picard-convergence",
        trace.iterations <= 60 && final_d <= 1e-8 && superlinear,
        &format!(
            "{} iterations, final distance {final_d:.1e} <= 1e-8, tail contraction ratios {:?} strictly shrinking",
            trace.iterations,
            tail.iter().map(|r| format!("{r:.1e}")).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn a08_uniqueness() {
    let (data, sigma, hp, grid) = standard_case();
    let g = standard_control(&hp, &grid);
    let (u1, _) = solve_skeleton(&data, &sigma, &g, &hp, &grid, 0.0, 1e-8, 60).unwrap();
    let zeros = Field::zeros(&grid);
    let (u2, _) = solve_skeleton_with_init(
        &data,
        &sigma,
        &g,
        &hp,
        &grid,
        0.0,
        1e-8,
        60,
        Some(&zeros),
    )
    .unwrap();
    let (s1, s2) = uniqueness_residual(&u1, &u2, &hp, &grid);
    let worst = s1
        .iter()
        .zip(&s2)
        .map(|(a, b)| a + b)
        .fold(0.0f64, f64::max);
    verdict(
        8,
        "uniqueness",
        worst < 1e-12,
        &format!("two initializations, max over time of S1+S2 = {worst:.1e} < 1e-12"),
    );
}

#[test]
fn a09_weak_convergence() {
    let (data, sigma, hp, grid) = standard_case();
    let g = standard_control(&hp, &grid);
    let psi = GridFunction::from_fn(&grid, bump_profile);
    let report = weak_convergence_probe(
        &data,
        &sigma,
        &g,
        &psi,
        &[2, 8, 32],
        &hp,
        &grid,
        0.0,
        1e-8,
        60,
    )
    .unwrap();
    let decreasing = report.d_c.windows(2).all(|w| w[1] < w[0]);
    verdict(
        9,
        "weak-convergence",
        decreasing,
        &format!(
            "d_C over oscillation modes 2/8/32: {} strictly decreasing",
            report
                .d_c
                .iter()
                .map(|v| format!("{v:.2e}"))
                .collect::<Vec<_>>()
                .join(" > ")
        ),
    );
}

#[test]
fn a10_condition_b() {
    let data = InitialData::bump();
    let sigma = DiffusionCoefficient::linear(2.25);
    let hp = hp(0.4);
    let grid = Grid::new(4.0, 32, 1.0, 32).unwrap();
    let g = standard_control(&hp, &grid);
    let eps_ladder = [0.5, 0.1, 0.02];
    let family = vec![g.clone(), g.clone(), g];
    let report = condition_b_probe(
        &family,
        &eps_ladder,
        &data,
        &sigma,
        &hp,
        &grid,
        2000,
        1.0,
        &CONDITION_B_DELTAS,
        23,
        SamplingMethod::ExactCholesky,
    )
    .unwrap();
    let d_idx = CONDITION_B_DELTAS
        .iter()
        .position(|&d| d == 0.05)
        .unwrap();
    let probs: Vec<f64> = report.exceed_prob.iter().map(|row| row[d_idx]).collect();
    let non_increasing = probs.windows(2).all(|w| w[1] <= w[0]);
    verdict(
        10,
        "condition-b",
        non_increasing,
        &format!(
            "P(d_C > 0.05) over eps 0.5/0.1/0.02 at 2000 replicas: {} non-increasing",
            probs
                .iter()
                .map(|p| format!("{p:.3}"))
                .collect::<Vec<_>>()
                .join(" >= ")
        ),
    );
}

#[test]
fn a11_ldp_trend() {
    let (data, sigma, hp, grid) = standard_case();
    let i0 = initial_term_i0(&data, &grid);
    let node = grid.nx / 2;
    let level = i0.at(grid.nt, node) + 0.5;
    let event = EventSpec::terminal_point(0.0, level);
    let rate = rate_minimize(&event, &data, &sigma, &hp, &grid, &OptConfig::default()).unwrap();
    let eps_ladder = [0.5, 0.2, 0.1, 0.05];
    let tail = mc_tail(
        &event,
        &data,
        &sigma,
        &hp,
        &grid,
        &eps_ladder,
        20_000,
        101,
        SamplingMethod::ExactCholesky,
    )
    .unwrap();
    let r_hats: Vec<f64> = tail.rows.iter().map(|r| r.r_hat).collect();
    // r_hat is increasing as a function of eps, so along the decreasing
    // ladder the sequence must fall strictly toward the rate
    let monotone = r_hats.windows(2).all(|w| w[1] < w[0]);
    let final_r = *r_hats.last().unwrap();
    let in_band = final_r >= 0.5 * rate.energy && final_r <= 1.5 * rate.energy;
    let hits: Vec<u64> = tail.rows.iter().map(|r| r.hits).collect();
    verdict(
        11,
        "ldp-trend",
        rate.feasible && monotone && in_band,
        &format!(
            "optimized energy {:.3}, r_hat along eps 0.5/0.2/0.1/0.05 = {:?} (hits {:?}), final {:.3} in [{:.3}, {:.3}]",
            rate.energy,
            r_hats.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>(),
            hits,
            final_r,
            0.5 * rate.energy,
            1.5 * rate.energy
        ),
    );
}

#[test]
fn a12_zero_exactness() {
    let data = InitialData::bump();
    let sigma = DiffusionCoefficient::linear(2.25);
    let hp = hp(0.4);
    let grid = Grid::new(4.0, 16, 1.0, 16).unwrap();
    let i0 = initial_term_i0(&data, &grid);
    let spec = NoiseSpec {
        hp,
        grid,
        seed: 11,
        method: SamplingMethod::ExactCholesky,
    };
    let dw = NoiseSampler::new(&spec).unwrap().sample(0);
    let eps0 = solve_swe(&data, &sigma, 0.0, &dw, &grid).unwrap();
    let zero_noise_gap = eps0.u.sup_distance(&i0);
    let g0 = Control::zeros(&grid);
    let (skel0, _) = solve_skeleton(&data, &sigma, &g0, &hp, &grid, 0.0, 1e-8, 60).unwrap();
    let zero_control_gap = skel0.sup_distance(&i0);
    let g = standard_control(&hp, &grid);
    let (skel, _) = solve_skeleton(&data, &sigma, &g, &hp, &grid, 0.0, 0.0, grid.nt + 5).unwrap();
    let controlled = solve_controlled(&data, &sigma, 0.0, None, &g, 0.0, &hp, &grid).unwrap();
    let controlled_gap = controlled.u.sup_distance(&skel);
    verdict(
        12,
        "zero-exactness",
        zero_noise_gap == 0.0 && zero_control_gap == 0.0 && controlled_gap <= 1e-8,
        &format!(
            "zero-noise gap {zero_noise_gap:.1e} (exact), zero-control gap {zero_control_gap:.1e} (exact), controlled-vs-skeleton gap {controlled_gap:.1e} <= 1e-8"
        ),
    );
}
