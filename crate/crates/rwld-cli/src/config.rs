//! Parameter resolution: command-line flags override a JSON config file,
//! which overrides built-in defaults. The resolved document, with every
//! default materialized, is what the run manifest records.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rwld_core::io::read_grid_function;
use rwld_core::noise::{NoiseSpec, SamplingMethod};
use rwld_core::swe::{bump_profile, DiffusionCoefficient, InitialData};
use rwld_core::{CoreError, Grid, HurstParam};

/// Process outcome; the exit code is the contract: 2 for configuration
/// problems, 3 for numerical failures (the manifest is still written),
/// 1 for a failed verification run.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Verification,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Verification => 1,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Config(m) => format!("configuration error: {m}"),
            CliError::Numeric(m) => format!("numerical failure: {m}"),
            CliError::Verification => "verification failed".into(),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Numerical(_) | CoreError::NoConvergence { .. } | CoreError::Covariance(_) => {
                CliError::Numeric(e.to_string())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

/// Every tunable parameter, each optional. The JSON config file
/// deserializes into exactly this shape; flags fill the same slots and
/// win where both are given. Fields irrelevant to a subcommand are
/// ignored by it but still recorded.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    #[serde(rename = "H", skip_serializing_if = "Option::is_none")]
    pub hurst: Option<f64>,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nt: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicate: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u0: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_mollify: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup_nodes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_ladder: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nc_t: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nc_x: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stages: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iters_per_stage: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraint_tol: Option<f64>,
}

impl ConfigDoc {
    /// Flags-over-file merge: any slot the flag side filled wins.
    pub fn overlaid_on(self, file: ConfigDoc) -> ConfigDoc {
        ConfigDoc {
            hurst: self.hurst.or(file.hurst),
            l: self.l.or(file.l),
            nx: self.nx.or(file.nx),
            t: self.t.or(file.t),
            nt: self.nt.or(file.nt),
            seed: self.seed.or(file.seed),
            method: self.method.or(file.method),
            replicate: self.replicate.or(file.replicate),
            eps: self.eps.or(file.eps),
            sigma: self.sigma.or(file.sigma),
            u0: self.u0.or(file.u0),
            v0: self.v0.or(file.v0),
            alpha: self.alpha.or(file.alpha),
            g: self.g.or(file.g),
            eps_mollify: self.eps_mollify.or(file.eps_mollify),
            tol: self.tol.or(file.tol),
            max_iter: self.max_iter.or(file.max_iter),
            x_star: self.x_star.or(file.x_star),
            level: self.level.or(file.level),
            sup_nodes: self.sup_nodes.or(file.sup_nodes),
            eps_ladder: self.eps_ladder.or(file.eps_ladder),
            n_samples: self.n_samples.or(file.n_samples),
            energy: self.energy.or(file.energy),
            jobs: self.jobs.or(file.jobs),
            nc_t: self.nc_t.or(file.nc_t),
            nc_x: self.nc_x.or(file.nc_x),
            mu0: self.mu0.or(file.mu0),
            stages: self.stages.or(file.stages),
            iters_per_stage: self.iters_per_stage.or(file.iters_per_stage),
            step0: self.step0.or(file.step0),
            fd_step: self.fd_step.or(file.fd_step),
            constraint_tol: self.constraint_tol.or(file.constraint_tol),
        }
    }
}

/// Load a config document. A run manifest is accepted too: its
/// `resolved_config` object is used, so any manifest replays directly.
pub fn load_config_file(path: &Path) -> Result<ConfigDoc, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("config {} is not JSON: {e}", path.display())))?;
    let doc_value = match value.get("resolved_config") {
        Some(inner) => inner.clone(),
        None => value,
    };
    serde_json::from_value(doc_value)
        .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
}

/// Grid, Hurst index, seed, and sampling method shared by every compute
/// subcommand, with the document fully materialized for the manifest.
pub struct Resolved {
    pub doc: ConfigDoc,
    pub hp: HurstParam,
    pub grid: Grid,
    pub seed: u64,
    pub method: SamplingMethod,
}

pub fn parse_method(name: &str) -> Result<SamplingMethod, CliError> {
    match name {
        "cholesky" | "exact_cholesky" => Ok(SamplingMethod::ExactCholesky),
        "circulant" | "circulant_embedding" => Ok(SamplingMethod::CirculantEmbedding),
        other => Err(CliError::Config(format!(
            "unknown sampling method \"{other}\"; use cholesky or circulant"
        ))),
    }
}

pub fn method_name(method: SamplingMethod) -> &'static str {
    match method {
        SamplingMethod::ExactCholesky => "exact_cholesky",
        SamplingMethod::CirculantEmbedding => "circulant_embedding",
    }
}

/// Materialize the base parameters. `H` has no default: it must come from
/// a flag or the config file. The RWLD_SEED environment variable, when
/// set, overrides every other seed source.
pub fn resolve_base(mut doc: ConfigDoc) -> Result<Resolved, CliError> {
    let h = doc.hurst.ok_or_else(|| {
        CliError::Config(
            "missing required parameter --H (Hurst index); set the flag or the config file's \"H\" entry"
                .into(),
        )
    })?;
    let hp = HurstParam::new(h)?;
    let l = *doc.l.get_or_insert(4.0);
    let nx = *doc.nx.get_or_insert(64);
    let t = *doc.t.get_or_insert(1.0);
    let nt = *doc.nt.get_or_insert(64);
    let grid = Grid::new(l, nx, t, nt)?;
    let seed = match std::env::var("RWLD_SEED") {
        Ok(text) => text.trim().parse::<u64>().map_err(|_| {
            CliError::Config(format!("RWLD_SEED must be an unsigned integer, got \"{text}\""))
        })?,
        Err(_) => doc.seed.unwrap_or(0),
    };
    doc.seed = Some(seed);
    let method_name_owned = doc
        .method
        .get_or_insert_with(|| "exact_cholesky".to_string())
        .clone();
    let method = parse_method(&method_name_owned)?;
    doc.method = Some(method_name(method).to_string());
    Ok(Resolved {
        doc,
        hp,
        grid,
        seed,
        method,
    })
}

/// Built-in diffusion coefficients: `linear[:C]` is sigma(u) = C u and
/// `damped[:C]` is sigma(u) = C u / (1 + u^2), both C-Lipschitz with
/// sigma(0) = 0. Default C = 1.
pub fn parse_sigma(text: &str) -> Result<DiffusionCoefficient, CliError> {
    let (family, c) = match text.split_once(':') {
        Some((fam, c_text)) => {
            let c: f64 = c_text.parse().map_err(|_| {
                CliError::Config(format!("sigma constant \"{c_text}\" is not a number"))
            })?;
            (fam, c)
        }
        None => (text, 1.0),
    };
    if !c.is_finite() {
        return Err(CliError::Config(format!("sigma constant {c} must be finite")));
    }
    match family {
        "linear" => Ok(DiffusionCoefficient::linear(c)),
        "damped" => Ok(DiffusionCoefficient::damped(c)),
        other => Err(CliError::Config(format!(
            "unknown sigma \"{other}\"; use linear[:C] or damped[:C]"
        ))),
    }
}

/// One initial-data component: its profile closure, support radius, and
/// the table file backing it, if any.
struct ProfileSpec {
    f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    support: f64,
    table: Option<PathBuf>,
}

fn parse_profile(text: &str, what: &str) -> Result<ProfileSpec, CliError> {
    match text {
        "zero" => Ok(ProfileSpec {
            f: Box::new(|_| 0.0),
            support: 0.0,
            table: None,
        }),
        "bump" => Ok(ProfileSpec {
            f: Box::new(bump_profile),
            support: 1.0,
            table: None,
        }),
        other => match other.strip_prefix("table:") {
            Some(path_text) => {
                let path = PathBuf::from(path_text);
                let (profile, table_grid) = read_grid_function(&path)?;
                let values = profile.values;
                let l = table_grid.l;
                let dx = table_grid.dx();
                let interp = move |x: f64| -> f64 {
                    if x <= -l || x >= l {
                        return 0.0;
                    }
                    let pos = (x + l) / dx;
                    let j = pos.floor() as usize;
                    let frac = pos - j as f64;
                    if j + 1 >= values.len() {
                        return values[values.len() - 1];
                    }
                    values[j] * (1.0 - frac) + values[j + 1] * frac
                };
                Ok(ProfileSpec {
                    f: Box::new(interp),
                    support: l,
                    table: Some(path),
                })
            }
            None => Err(CliError::Config(format!(
                "unknown {what} \"{other}\"; use zero, bump, or table:FILE"
            ))),
        },
    }
}

/// Initial data from the `--u0` / `--v0` slots plus any table files that
/// were read (for manifest hashing).
pub fn parse_initial_data(
    u0_text: &str,
    v0_text: &str,
    alpha: f64,
) -> Result<(InitialData, Vec<PathBuf>), CliError> {
    let u0 = parse_profile(u0_text, "u0")?;
    let v0 = parse_profile(v0_text, "v0")?;
    let mut tables = Vec::new();
    if let Some(p) = u0.table {
        tables.push(p);
    }
    if let Some(p) = v0.table {
        tables.push(p);
    }
    let support = u0.support.max(v0.support);
    let data = InitialData::new(u0.f, v0.f, alpha, support)?;
    Ok((data, tables))
}

/// The one-line JSON document a noise draw round-trips through.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpecDoc {
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub nx: usize,
    #[serde(rename = "T")]
    pub t: f64,
    pub nt: usize,
    pub seed: u64,
    pub method: String,
}

impl NoiseSpecDoc {
    pub fn from_spec(spec: &NoiseSpec) -> Self {
        NoiseSpecDoc {
            h: spec.hp.h,
            l: spec.grid.l,
            nx: spec.grid.nx,
            t: spec.grid.t,
            nt: spec.grid.nt,
            seed: spec.seed,
            method: method_name(spec.method).to_string(),
        }
    }

    pub fn to_spec(&self) -> Result<NoiseSpec, CliError> {
        Ok(NoiseSpec {
            hp: HurstParam::new(self.h)?,
            grid: Grid::new(self.l, self.nx, self.t, self.nt)?,
            seed: self.seed,
            method: parse_method(&self.method)?,
        })
    }
}
