//! The compute subcommands: noise, solve, skeleton, rate, ldp-sweep.
//! Each resolves its parameters, runs the corresponding library
//! operation, writes its outputs, and drops a run manifest next to them.
//! Numerical failures still write the manifest, with the error recorded.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rwld_core::io::{write_field, write_field_csv};
use rwld_core::ldp::{mc_tail, rate_minimize, EventSpec, OptConfig, TailEstimate, TailRow};
use rwld_core::noise::{sample_noise_replicate, NoiseField, NoiseSampler, NoiseSpec};
use rwld_core::skeleton::{solve_skeleton, Control, PicardTrace};
use rwld_core::swe::{solve_swe, DiffusionCoefficient, InitialData};
use rwld_core::{CoreError, Grid, HurstParam};

use crate::config::{
    parse_initial_data, parse_sigma, resolve_base, CliError, ConfigDoc, NoiseSpecDoc, Resolved,
};
use crate::manifest::{sibling, ManifestBuilder};

/// On a numerical failure the manifest is still written, carrying the
/// error text; configuration errors propagate without one.
fn finish<T>(
    result: Result<T, CoreError>,
    mani: ManifestBuilder,
    out: &Path,
) -> Result<(T, ManifestBuilder), CliError> {
    match result {
        Ok(v) => Ok((v, mani)),
        Err(e) => {
            let cli: CliError = e.into();
            if matches!(cli, CliError::Numeric(_)) {
                let mut mani = mani;
                mani.error(&cli.message());
                mani.write(out)?;
            }
            Err(cli)
        }
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("JSON encode: {e}")))?;
    std::fs::write(path, text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

fn f64_json(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v)
        .map(serde_json::Value::Number)
        .unwrap_or(serde_json::Value::Null)
}

/// CSV of a noise increment panel: metadata row, then one row per time
/// slab labeled by the slab's left time, columns by the cell's left node.
fn write_noise_csv(path: &Path, dw: &NoiseField, grid: &Grid) -> Result<(), CliError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "l,nx,t,nt")?;
    writeln!(w, "{},{},{},{}", grid.l, grid.nx, grid.t, grid.nt)?;
    let xs: Vec<String> = (0..grid.nx).map(|j| format!("{}", grid.node(j))).collect();
    writeln!(w, "t\\x,{}", xs.join(","))?;
    for i in 0..grid.nt {
        let row: Vec<String> = dw.row(i).iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{},{}", grid.time(i), row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_noise(
    doc: ConfigDoc,
    config_input: Option<&Path>,
    out: &Path,
    csv: bool,
) -> Result<(), CliError> {
    let mut r = resolve_base(doc)?;
    let replicate = *r.doc.replicate.get_or_insert(0);
    let spec = NoiseSpec {
        hp: r.hp,
        grid: r.grid,
        seed: r.seed,
        method: r.method,
    };
    let mut mani = ManifestBuilder::new("noise", r.doc.clone(), r.seed);
    if let Some(p) = config_input {
        mani.input(p)?;
    }
    let (dw, mut mani) = finish(sample_noise_replicate(&spec, replicate), mani, out)?;
    dw.save(out, &r.grid)?;
    mani.output(out);
    let spec_path = sibling(out, "spec.json");
    write_json(
        &spec_path,
        &serde_json::to_value(NoiseSpecDoc::from_spec(&spec))
            .map_err(|e| CliError::Config(format!("spec encode: {e}")))?,
    )?;
    // the spec document is the replay contract; prove it round-trips
    let back: NoiseSpecDoc = serde_json::from_str(
        &std::fs::read_to_string(&spec_path)
            .map_err(|e| CliError::Config(format!("re-read {}: {e}", spec_path.display())))?,
    )
    .map_err(|e| CliError::Config(format!("spec decode: {e}")))?;
    let respec = back.to_spec()?;
    if respec.grid != spec.grid
        || respec.seed != spec.seed
        || respec.method != spec.method
        || respec.hp.h != spec.hp.h
    {
        return Err(CliError::Config(
            "noise spec JSON did not round-trip to the sampled spec".into(),
        ));
    }
    mani.output(&spec_path);
    if csv {
        let csv_path = sibling(out, "csv");
        write_noise_csv(&csv_path, &dw, &r.grid)?;
        mani.output(&csv_path);
    }
    mani.write(out)?;
    Ok(())
}

/// The sigma / initial-data slots shared by solve, skeleton, rate, and
/// ldp-sweep, materialized into the document.
fn resolve_physics(
    r: &mut Resolved,
) -> Result<(DiffusionCoefficient, InitialData, Vec<PathBuf>), CliError> {
    let sigma_text = r.doc.sigma.get_or_insert_with(|| "linear".into()).clone();
    let u0_text = r.doc.u0.get_or_insert_with(|| "bump".into()).clone();
    let v0_text = r.doc.v0.get_or_insert_with(|| "zero".into()).clone();
    let alpha = *r.doc.alpha.get_or_insert(1.0);
    let sigma = parse_sigma(&sigma_text)?;
    let (data, tables) = parse_initial_data(&u0_text, &v0_text, alpha)?;
    sigma.validate_hypothesis(&r.grid)?;
    data.validate(&r.grid)?;
    Ok((sigma, data, tables))
}

pub fn cmd_solve(
    doc: ConfigDoc,
    config_input: Option<&Path>,
    out: &Path,
    csv: bool,
) -> Result<(), CliError> {
    let mut r = resolve_base(doc)?;
    let eps = *r.doc.eps.get_or_insert(0.1);
    let replicate = *r.doc.replicate.get_or_insert(0);
    let (sigma, data, tables) = resolve_physics(&mut r)?;
    let mut mani = ManifestBuilder::new("solve", r.doc.clone(), r.seed);
    if let Some(p) = config_input {
        mani.input(p)?;
    }
    for t in &tables {
        mani.input(t)?;
    }
    let spec = NoiseSpec {
        hp: r.hp,
        grid: r.grid,
        seed: r.seed,
        method: r.method,
    };
    let (dw, mani) = finish(sample_noise_replicate(&spec, replicate), mani, out)?;
    let (result, mut mani) = finish(solve_swe(&data, &sigma, eps, &dw, &r.grid), mani, out)?;
    write_field(out, &result.u, &r.grid)?;
    mani.output(out);
    if csv {
        let csv_path = sibling(out, "csv");
        write_field_csv(&csv_path, &result.u, &r.grid)?;
        mani.output(&csv_path);
    }
    mani.write(out)?;
    Ok(())
}

/// `--g` slot: zero, bump-energy:E, or a control file whose grid must
/// match the run's grid.
fn parse_control(
    text: &str,
    hp: &HurstParam,
    grid: &Grid,
) -> Result<(Control, Option<PathBuf>), CliError> {
    if text == "zero" {
        return Ok((Control::zeros(grid), None));
    }
    if let Some(e_text) = text.strip_prefix("bump-energy:") {
        let energy: f64 = e_text.parse().map_err(|_| {
            CliError::Config(format!("control energy \"{e_text}\" is not a number"))
        })?;
        return Ok((Control::bump_with_energy(energy, hp, grid)?, None));
    }
    let path = PathBuf::from(text);
    let (g, g_grid) = Control::load(&path)?;
    if g_grid != *grid {
        return Err(CliError::Config(format!(
            "control file {} was written on grid L={} nx={} T={} nt={}, run uses L={} nx={} T={} nt={}",
            path.display(),
            g_grid.l,
            g_grid.nx,
            g_grid.t,
            g_grid.nt,
            grid.l,
            grid.nx,
            grid.t,
            grid.nt
        )));
    }
    Ok((g, Some(path)))
}

fn write_trace_csv(path: &Path, trace: &PicardTrace) -> Result<(), CliError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "iter,sup_l2,seminorm,distance")?;
    for (i, (l2, semi)) in trace.sup_l2.iter().zip(&trace.seminorm).enumerate() {
        writeln!(w, "{},{},{},{}", i + 1, l2, semi, l2 + semi)?;
    }
    w.flush()?;
    Ok(())
}

/// A derived output name must stay next to `--out`; reject paths that
/// try to step out of the output directory.
fn confined_sibling(out: &Path, name: &Path, what: &str) -> Result<PathBuf, CliError> {
    if name.components().count() > 1 || name.is_absolute() {
        return Err(CliError::Config(format!(
            "{what} must be a bare file name; it is written next to --out"
        )));
    }
    Ok(out.with_file_name(name))
}

pub fn cmd_skeleton(
    doc: ConfigDoc,
    config_input: Option<&Path>,
    out: &Path,
    csv: bool,
    trace_out: Option<&Path>,
) -> Result<(), CliError> {
    let mut r = resolve_base(doc)?;
    let g_text = r.doc.g.get_or_insert_with(|| "zero".into()).clone();
    let eps_mollify = *r.doc.eps_mollify.get_or_insert(0.0);
    let tol = *r.doc.tol.get_or_insert(1e-8);
    let max_iter = *r.doc.max_iter.get_or_insert(60);
    let (sigma, data, tables) = resolve_physics(&mut r)?;
    let (g, g_file) = parse_control(&g_text, &r.hp, &r.grid)?;
    let trace_path = trace_out
        .map(|p| confined_sibling(out, p, "--trace-out"))
        .transpose()?;
    let mut mani = ManifestBuilder::new("skeleton", r.doc.clone(), r.seed);
    if let Some(p) = config_input {
        mani.input(p)?;
    }
    for t in &tables {
        mani.input(t)?;
    }
    if let Some(p) = &g_file {
        mani.input(p)?;
    }
    let solved = solve_skeleton(
        &data,
        &sigma,
        &g,
        &r.hp,
        &r.grid,
        eps_mollify,
        tol,
        max_iter,
    );
    // Non-convergence carries its distance trace; surface it even though
    // the run fails.
    if let (Err(CoreError::NoConvergence { trace, .. }), Some(tp)) = (&solved, &trace_path) {
        let mut w = std::io::BufWriter::new(std::fs::File::create(tp)?);
        writeln!(w, "iter,distance")?;
        for (i, d) in trace.iter().enumerate() {
            writeln!(w, "{},{}", i + 1, d)?;
        }
        mani.output(tp);
    }
    let ((field, trace), mut mani) = finish(solved, mani, out)?;
    write_field(out, &field, &r.grid)?;
    mani.output(out);
    if csv {
        let csv_path = sibling(out, "csv");
        write_field_csv(&csv_path, &field, &r.grid)?;
        mani.output(&csv_path);
    }
    if let Some(tp) = &trace_path {
        write_trace_csv(tp, &trace)?;
        mani.output(tp);
    }
    mani.write(out)?;
    Ok(())
}

/// Event from the `--x-star` / `--level` / `--sup-nodes` slots.
fn resolve_event(r: &mut Resolved) -> Result<EventSpec, CliError> {
    let level = r.doc.level.ok_or_else(|| {
        CliError::Config("missing required parameter --level (event threshold)".into())
    })?;
    let event = match &r.doc.sup_nodes {
        Some(nodes) if !nodes.is_empty() => EventSpec::sup_level(nodes.clone(), level),
        _ => {
            let x_star = *r.doc.x_star.get_or_insert(0.0);
            EventSpec::terminal_point(x_star, level)
        }
    };
    event.validate(&r.grid)?;
    Ok(event)
}

fn resolve_opt_config(r: &mut Resolved) -> OptConfig {
    let d = OptConfig::default();
    OptConfig {
        nc_t: *r.doc.nc_t.get_or_insert(d.nc_t),
        nc_x: *r.doc.nc_x.get_or_insert(d.nc_x),
        mu0: *r.doc.mu0.get_or_insert(d.mu0),
        stages: *r.doc.stages.get_or_insert(d.stages),
        iters_per_stage: *r.doc.iters_per_stage.get_or_insert(d.iters_per_stage),
        step0: *r.doc.step0.get_or_insert(d.step0),
        fd_step: *r.doc.fd_step.get_or_insert(d.fd_step),
        constraint_tol: *r.doc.constraint_tol.get_or_insert(d.constraint_tol),
        eps_mollify: *r.doc.eps_mollify.get_or_insert(d.eps_mollify),
    }
}

pub fn cmd_rate(doc: ConfigDoc, config_input: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let mut r = resolve_base(doc)?;
    let event = resolve_event(&mut r)?;
    let cfg = resolve_opt_config(&mut r);
    let (sigma, data, tables) = resolve_physics(&mut r)?;
    let mut mani = ManifestBuilder::new("rate", r.doc.clone(), r.seed);
    if let Some(p) = config_input {
        mani.input(p)?;
    }
    for t in &tables {
        mani.input(t)?;
    }
    let (result, mut mani) = finish(
        rate_minimize(&event, &data, &sigma, &r.hp, &r.grid, &cfg),
        mani,
        out,
    )?;
    let gstar_path = sibling(out, "gstar.bin");
    result.g_star.save(&gstar_path, &r.grid)?;
    mani.output(&gstar_path);
    let report = serde_json::json!({
        "event": result.event,
        "energy": f64_json(result.energy),
        "g_star_file": gstar_path.display().to_string(),
        "constraint_residual": f64_json(result.constraint_residual),
        "feasible": result.feasible,
        "trace": result.trace.iter().map(|&v| f64_json(v)).collect::<Vec<_>>(),
    });
    write_json(out, &report)?;
    mani.output(out);
    mani.write(out)?;
    Ok(())
}

/// Replicate-sharded tail estimator, numerically identical to
/// [`mc_tail`]: hit counts are integers accumulated per replicate index,
/// and the per-replicate noise draw depends only on (seed, replicate), so
/// the shard layout cannot change any count.
#[allow(clippy::too_many_arguments)]
fn parallel_tail(
    event: &EventSpec,
    data: &InitialData,
    sigma: &DiffusionCoefficient,
    spec: &NoiseSpec,
    eps_ladder: &[f64],
    n_samples: usize,
    jobs: usize,
) -> Result<TailEstimate, CoreError> {
    let grid = &spec.grid;
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
    let sampler = NoiseSampler::new(spec)?;
    let workers = jobs.clamp(1, n_samples);
    let chunk = n_samples.div_ceil(workers);
    let shard_hits = std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(workers);
        for w in 0..workers {
            let lo = w * chunk;
            let hi = ((w + 1) * chunk).min(n_samples);
            let sampler = &sampler;
            handles.push(scope.spawn(move || -> Result<Vec<u64>, CoreError> {
                let mut local = vec![0u64; eps_ladder.len()];
                for rep in lo..hi {
                    let dw = sampler.sample(rep as u64);
                    for (slot, &eps) in local.iter_mut().zip(eps_ladder) {
                        let res = solve_swe(data, sigma, eps, &dw, grid)?;
                        if event.hit(&res.u, grid) {
                            *slot += 1;
                        }
                    }
                }
                Ok(local)
            }));
        }
        handles
            .into_iter()
            .map(|h| h.join().expect("tail worker panicked"))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let rows = eps_ladder
        .iter()
        .enumerate()
        .map(|(k, &eps)| {
            let h: u64 = shard_hits.iter().map(|shard| shard[k]).sum();
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

pub fn cmd_ldp_sweep(
    doc: ConfigDoc,
    config_input: Option<&Path>,
    out: &Path,
    csv: bool,
    rate_json: Option<&Path>,
) -> Result<(), CliError> {
    let mut r = resolve_base(doc)?;
    let event = resolve_event(&mut r)?;
    let ladder = r
        .doc
        .eps_ladder
        .get_or_insert_with(|| vec![0.5, 0.2, 0.1, 0.05])
        .clone();
    let n_samples = *r.doc.n_samples.get_or_insert(2000);
    let jobs = *r.doc.jobs.get_or_insert_with(|| {
        std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1)
    });
    if jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    let (sigma, data, tables) = resolve_physics(&mut r)?;
    let mut energy = r.doc.energy;
    let mut mani = ManifestBuilder::new("ldp-sweep", r.doc.clone(), r.seed);
    if let Some(p) = config_input {
        mani.input(p)?;
    }
    for t in &tables {
        mani.input(t)?;
    }
    if let Some(p) = rate_json {
        mani.input(p)?;
        if energy.is_none() {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            let value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{} is not JSON: {e}", p.display())))?;
            energy = value.get("energy").and_then(|v| v.as_f64());
        }
    }
    let spec = NoiseSpec {
        hp: r.hp,
        grid: r.grid,
        seed: r.seed,
        method: r.method,
    };
    let estimate = if jobs == 1 {
        mc_tail(
            &event, &data, &sigma, &r.hp, &r.grid, &ladder, n_samples, r.seed, r.method,
        )
    } else {
        parallel_tail(&event, &data, &sigma, &spec, &ladder, n_samples, jobs)
    };
    let (estimate, mut mani) = finish(estimate, mani, out)?;
    let report = serde_json::json!({
        "event": event,
        "ladder": estimate.rows,
        "energy": energy.map(f64_json).unwrap_or(serde_json::Value::Null),
    });
    write_json(out, &report)?;
    mani.output(out);
    if csv {
        let csv_path = sibling(out, "csv");
        let mut w = std::io::BufWriter::new(std::fs::File::create(&csv_path)?);
        writeln!(w, "eps,n,hits,p_hat,se,r_hat,energy")?;
        for row in &estimate.rows {
            let e = energy.map(|v| format!("{v}")).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                row.eps, row.n, row.hits, row.p_hat, row.se, row.r_hat, e
            )?;
        }
        w.flush()?;
        mani.output(&csv_path);
    }
    mani.write(out)?;
    Ok(())
}
