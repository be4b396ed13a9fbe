use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Map, Value};

use nilmix::equidistribution::{box_rate_experiment, dichotomy_probe, spread_translations, unstable_experiment};
use nilmix::equidistribution::{BoxMap, BoxRateConfig, UnstableChart, UnstableConfig};
use nilmix::error::{Error, Result};
use nilmix::estimate::McConfig;
use nilmix::nilmanifold::Nilmanifold;
use nilmix::observables::{Observable, ObservableSpec};
use nilmix::report::{ExperimentReport, FitModel};
use nilmix::spectral::{diophantine_constant, factor_table, jordan_split, Automorphism, ErgodicityCertificate};
use nilmix::stochastics::{
    clt_experiment, coboundary_test, donsker_paths, green_kubo, mixing_experiment, multimix_experiment, reference_mean,
    CltConfig, CoboundaryTestConfig, MixingConfig, MultiMixConfig, OrbitEngine, WindowRule, DEFAULT_HORIZON,
};

use crate::config::{point_or_origin, ExperimentConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Check,
    Mixing,
    Multimix,
    Equid,
    Unstable,
    Clt,
    Donsker,
    Coboundary,
    Diophantine,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Check,
        Command::Mixing,
        Command::Multimix,
        Command::Equid,
        Command::Unstable,
        Command::Clt,
        Command::Donsker,
        Command::Coboundary,
        Command::Diophantine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Mixing => "mixing",
            Command::Multimix => "multimix",
            Command::Equid => "equid",
            Command::Unstable => "unstable",
            Command::Clt => "clt",
            Command::Donsker => "donsker",
            Command::Coboundary => "coboundary",
            Command::Diophantine => "diophantine",
        }
    }

    /// Commands that iterate `α` and are meaningless without ergodicity.
    fn needs_ergodic(self) -> bool {
        matches!(
            self,
            Command::Mixing | Command::Multimix | Command::Unstable | Command::Clt | Command::Donsker | Command::Coboundary
        )
    }
}

impl std::str::FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command {s:?}"))
    }
}

/// Exit status 1: the configuration or the definitions it names are rejected.
pub fn is_validation_error(e: &Error) -> bool {
    matches!(
        e,
        Error::MalformedAlgebra(_)
            | Error::AntisymmetryViolation { .. }
            | Error::JacobiViolation { .. }
            | Error::NotNilpotent { .. }
            | Error::BasisNotMalcevOrdered(_)
            | Error::LatticeNotSubgroup(_)
            | Error::BracketNotPreserved { .. }
            | Error::LatticeNotPreserved { .. }
            | Error::NotUnimodular { .. }
            | Error::NotErgodic { .. }
            | Error::DimensionMismatch { .. }
            | Error::Config(_)
    )
}

/// Overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Result of one invocation.
#[derive(Debug)]
pub struct Outcome {
    pub exit_code: i32,
    /// Text for stdout.
    pub message: String,
    pub csv: Option<PathBuf>,
    pub summary: Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockRow {
    pub eigenvalue: (f64, f64),
    pub modulus: f64,
    pub size: usize,
    pub kind: String,
    pub factor: String,
    pub class: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub dim: usize,
    pub step: usize,
    pub lcs_dims: Vec<usize>,
    pub abelian_rank: usize,
    pub charpoly_factors: Vec<(String, u32)>,
    pub ergodicity: ErgodicityCertificate,
    /// Numerical root-of-unity probe agrees with the exact certificate.
    pub probe_agrees: bool,
    pub jordan_blocks: Vec<BlockRow>,
    /// Set when the real Jordan split could not be computed.
    pub jordan_error: Option<String>,
    pub central_basis: Vec<Vec<f64>>,
}

fn classify(modulus: f64) -> &'static str {
    if (modulus - 1.0).abs() <= 1e-9 {
        "central"
    } else if modulus > 1.0 {
        "unstable"
    } else {
        "stable"
    }
}

pub fn check_report(aut: &Automorphism) -> CheckReport {
    let alg = aut.manifold().algebra();
    let ergodicity = aut.ergodicity();
    let probe_agrees = aut.root_of_unity_probe() != ergodicity.ergodic;
    let (jordan_blocks, jordan_error, central_basis) = match jordan_split(aut) {
        Ok(split) => (
            split
                .blocks
                .iter()
                .map(|b| BlockRow {
                    eigenvalue: b.eigenvalue,
                    modulus: b.modulus(),
                    size: b.size,
                    kind: format!("{:?}", b.kind),
                    factor: b.factor.clone(),
                    class: classify(b.modulus()),
                })
                .collect(),
            None,
            split.central_basis.clone(),
        ),
        Err(e) => (Vec::new(), Some(e.to_string()), Vec::new()),
    };
    CheckReport {
        dim: alg.dim(),
        step: alg.step(),
        lcs_dims: alg.lcs_dims(),
        abelian_rank: alg.abelian_rank(),
        charpoly_factors: factor_table(aut.charpoly()),
        ergodicity,
        probe_agrees,
        jordan_blocks,
        jordan_error,
        central_basis,
    }
}

fn render_check(r: &CheckReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "dimension      {}", r.dim);
    let _ = writeln!(s, "step           {}", r.step);
    let _ = writeln!(s, "lcs dims       {:?}", r.lcs_dims);
    let _ = writeln!(s, "abelian rank   {}", r.abelian_rank);
    let factors: Vec<String> = r.charpoly_factors.iter().map(|(f, m)| if *m == 1 { format!("({f})") } else { format!("({f})^{m}") }).collect();
    let _ = writeln!(s, "charpoly       {}", factors.join(" "));
    let _ = writeln!(s, "ergodic        {}", r.ergodicity.ergodic);
    if let Some(n) = r.ergodicity.dividing_order {
        let _ = writeln!(s, "  cyclotomic factor of order {n} divides the abelianized charpoly");
    }
    let _ = writeln!(s, "  numerical probe agrees: {}", r.probe_agrees);
    if let Some(e) = &r.jordan_error {
        let _ = writeln!(s, "jordan split failed: {e}");
    } else {
        let _ = writeln!(s, "{:>24} {:>10} {:>4}  {:<8} {:<9} factor", "eigenvalue", "|λ|", "size", "kind", "class");
        for b in &r.jordan_blocks {
            let ev = if b.eigenvalue.1 == 0.0 {
                format!("{:.9}", b.eigenvalue.0)
            } else {
                format!("{:.6}{:+.6}i", b.eigenvalue.0, b.eigenvalue.1)
            };
            let _ = writeln!(s, "{ev:>24} {:>10.6} {:>4}  {:<8} {:<9} {}", b.modulus, b.size, b.kind, b.class, b.factor);
        }
    }
    s
}

struct Context {
    cfg: ExperimentConfig,
    seed: u64,
    workers: usize,
    out: PathBuf,
    manifold: Nilmanifold,
    aut: Automorphism,
}

impl Context {
    fn load(config: &Path, o: &Overrides) -> Result<Self> {
        let cfg = ExperimentConfig::load(config)?;
        let seed = o.seed.unwrap_or(cfg.seed);
        let workers = o.workers.unwrap_or(cfg.workers);
        if workers == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        let out = o.out.clone().unwrap_or_else(|| cfg.out.clone());
        let manifold = cfg.manifold()?;
        let aut = cfg.automorphism(&manifold)?;
        Ok(Context { cfg, seed, workers, out, manifold, aut })
    }

    fn mc(&self) -> McConfig {
        McConfig::new(self.seed, self.workers)
    }

    fn engine(&self) -> OrbitEngine {
        OrbitEngine::new(&self.aut, self.cfg.horizon.unwrap_or(DEFAULT_HORIZON))
    }

    fn observable(&self, spec: &ObservableSpec) -> Result<Observable> {
        Observable::from_spec(spec, &self.manifold, Some(&self.aut))
    }
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T> {
    s.as_ref().ok_or_else(|| Error::Config(format!("missing [{name}] section")))
}

/// Fit summary shared by the decay experiments.
fn report_summary(r: &ExperimentReport) -> Value {
    let fit = r.fit.as_ref();
    json!({
        "rate": fit.map(|f| f.rate),
        "rho_hat": fit.filter(|f| f.model == FitModel::LogLinear).map(|f| f.rho()),
        "r2": fit.map(|f| f.r2),
        "fit_points": fit.map(|f| f.points),
        "resolved_points": r.resolved_points(),
        "reference": r.reference,
        "flags": r.flags,
        "total_samples": r.total_samples,
    })
}

fn var_se(var: f64, paths: u64) -> f64 {
    if paths < 2 {
        f64::NAN
    } else {
        var * (2.0 / (paths as f64 - 1.0)).sqrt()
    }
}

fn run_experiment(cmd: Command, ctx: &Context) -> Result<(String, Value)> {
    let mc = ctx.mc();
    let cfg = &ctx.cfg;
    match cmd {
        Command::Check => unreachable!("check has no CSV"),
        Command::Mixing => {
            let s = section(&cfg.mixing, "mixing")?;
            let f0 = ctx.observable(&s.f0)?;
            let f1 = ctx.observable(s.f1.as_ref().unwrap_or(&s.f0))?;
            let r = mixing_experiment(
                &ctx.engine(),
                &f0,
                &f1,
                &MixingConfig { schedule: s.schedule.clone(), budget: s.budget.clone(), mc },
            )?;
            Ok((r.to_csv(), report_summary(&r)))
        }
        Command::Multimix => {
            let s = section(&cfg.multimix, "multimix")?;
            let fs = s.observables.iter().map(|o| ctx.observable(o)).collect::<Result<Vec<_>>>()?;
            let r = multimix_experiment(
                &ctx.engine(),
                &fs,
                &MultiMixConfig { gaps: s.gaps.clone(), budget: s.budget.clone(), mc },
            )?;
            Ok((r.to_csv(), report_summary(&r)))
        }
        Command::Equid => {
            let s = section(&cfg.equid, "equid")?;
            let d = ctx.manifold.dim();
            let k = s.directions.len();
            let f = ctx.observable(&s.observable)?;
            let shape = BoxMap::new(
                s.offset.clone().unwrap_or_else(|| vec![0.0; d]),
                s.directions.clone(),
                s.aspect.clone().unwrap_or_else(|| vec![1.0; k]),
            )?;
            let u = s.u.clone().unwrap_or_else(|| vec![0.0; d]);
            let g = point_or_origin(&s.g, d)?;
            let r = box_rate_experiment(
                &f,
                &shape,
                &u,
                &g,
                &BoxRateConfig { schedule: s.schedule.clone(), budget: s.budget.clone(), mc },
            )?;
            let mut summary = report_summary(&r);
            summary["kappa_hat"] = json!(r.fit.as_ref().map(|f| f.rate));
            if let Some(p) = &s.dichotomy {
                let bx = shape.scaled(p.side / shape.min_side())?;
                let rep =
                    dichotomy_probe(&bx, p.delta, p.l1, p.l2, p.multiplier, ctx.manifold.algebra().abelian_rank())?;
                summary["dichotomy"] = serde_json::to_value(&rep).map_err(|e| Error::Io(e.to_string()))?;
            }
            Ok((r.to_csv(), summary))
        }
        Command::Unstable => {
            let s = section(&cfg.unstable, "unstable")?;
            let f = ctx.observable(&s.observable)?;
            let chart = UnstableChart::new(&ctx.aut, s.sides.clone())?;
            let g = point_or_origin(&s.g, ctx.manifold.dim())?;
            let ucfg = UnstableConfig {
                schedule: s.schedule.clone(),
                translations: spread_translations(ctx.manifold.dim(), s.translations),
                budget: s.budget.clone(),
                mc,
            };
            let r = unstable_experiment(&f, &chart, &g, &ucfg)?;
            let mut summary = report_summary(&r);
            summary["unstable_dim"] = json!(chart.dim());
            Ok((r.to_csv(), summary))
        }
        Command::Clt => {
            let s = section(&cfg.clt, "clt")?;
            let f = ctx.observable(&s.observable)?;
            let r = clt_experiment(
                &ctx.engine(),
                &f,
                &CltConfig {
                    schedule: s.schedule.clone(),
                    paths: s.paths,
                    window: s.window,
                    window_rule: s.window_rule,
                    gk_budget: s.gk_budget,
                    mc,
                },
            )?;
            let mut csv = String::from("n,empirical_var,se,ks\n");
            for ((n, v), ks) in r.n_schedule.iter().zip(&r.empirical_variances).zip(&r.ks_statistics) {
                let ks = ks.map_or("NA".to_string(), |k| format!("{k:.6e}"));
                let _ = writeln!(csv, "{n},{v:.12e},{:.6e},{ks}", var_se(*v, r.sample_count));
            }
            let summary = json!({
                "sigma2_hat": r.sigma2_hat,
                "sigma2_se": r.sigma2_se,
                "window": r.green_kubo.window,
                "tail_flag": r.green_kubo.tail_flag,
                "clamped": r.green_kubo.clamped,
                "centering": r.centering,
                "ks": r.ks_statistics.last().copied().flatten(),
                "ks_statistics": r.ks_statistics,
                "paths": r.sample_count,
            });
            Ok((csv, summary))
        }
        Command::Donsker => {
            let s = section(&cfg.donsker, "donsker")?;
            let f = ctx.observable(&s.observable)?;
            let engine = ctx.engine();
            let mean = match f.integral() {
                Some(v) => v,
                None => reference_mean(&f, s.gk_budget.saturating_mul(10), &mc, 0xc0).mean,
            };
            let fc = f.shifted(mean);
            let gk = green_kubo(&engine, &fc, s.window, WindowRule::Adaptive, s.gk_budget, &mc, 0xc1)?;
            let r = donsker_paths(&engine, &fc, s.n, s.paths, &s.grid, gk.sigma2, &mc, 0xc3)?;
            let mut csv = String::from("t,variance,se\n");
            for (t, v) in r.grid.iter().zip(&r.variances) {
                let _ = writeln!(csv, "{t},{v:.12e},{:.6e}", var_se(*v, s.paths));
            }
            let summary = json!({
                "sigma2_hat": r.sigma2,
                "sigma2_se": gk.se,
                "variance_slope": r.variance_slope,
                "increment_correlation": r.increment_correlation,
                "n": r.n,
                "paths": s.paths,
            });
            Ok((csv, summary))
        }
        Command::Coboundary => {
            let s = section(&cfg.coboundary, "coboundary")?;
            let f = ctx.observable(&s.observable)?;
            let t = coboundary_test(
                &ctx.engine(),
                &f,
                &CoboundaryTestConfig {
                    window: s.window,
                    budget: s.budget,
                    solve_terms: s.solve_terms,
                    solve_points: s.solve_points,
                    mc,
                },
            )?;
            let mut csv = String::from("quantity,n,value,se\n");
            let _ = writeln!(csv, "green_kubo,{},{:.12e},{:.6e}", t.window, t.sigma2, t.se);
            for r in &t.residuals {
                let _ = writeln!(csv, "residual_l2,{},{:.12e},NA", r.n, r.residual_l2);
                let _ = writeln!(csv, "residual_sup,{},{:.12e},NA", r.n, r.residual_sup);
            }
            let summary = json!({
                "decision": t.decision.as_str(),
                "sigma2": t.sigma2,
                "se": t.se,
                "window": t.window,
                "residual_l2": t.residuals[0].residual_l2,
                "residual_l2_4n": t.residuals[1].residual_l2,
                "f_sup": t.residuals[0].f_sup,
                "solve_terms": t.residuals[0].n,
            });
            Ok((csv, summary))
        }
        Command::Diophantine => {
            let s = section(&cfg.diophantine, "diophantine")?;
            let w = match &s.direction {
                Some(w) => w.clone(),
                None => leading_unstable_direction(&ctx.aut)?,
            };
            let mut csv = String::from("search_bound,c1_hat,argmin\n");
            let mut last = None;
            for &b in &s.search_bounds {
                let r = diophantine_constant(&w, s.c2, b)?;
                let z: Vec<String> = r.argmin_z.iter().map(i64::to_string).collect();
                let _ = writeln!(csv, "{b},{:.12e},{}", r.c1_hat, z.join(" "));
                last = Some(r);
            }
            let r = last.expect("search bounds are non-empty");
            let summary = json!({
                "direction": r.direction,
                "c2": r.c2,
                "c1_hat": r.c1_hat,
                "argmin_z": r.argmin_z,
                "search_bound": r.search_bound,
                "failure": r.failure,
            });
            Ok((csv, summary))
        }
    }
}

/// First abelian coordinates of the expanding eigenvector of largest modulus.
fn leading_unstable_direction(aut: &Automorphism) -> Result<Vec<f64>> {
    let l = aut.manifold().algebra().abelian_rank();
    let split = jordan_split(aut)?;
    let block = split
        .blocks
        .iter()
        .rev()
        .find(|b| b.modulus() > 1.0 && b.basis.iter().any(|v| v[..l].iter().any(|x| x.abs() > 1e-12)))
        .ok_or_else(|| Error::InvalidParameter("no expanding direction in the abelianization".into()))?;
    // The last chain vector is the eigenvector.
    let v = block.basis.iter().rev().find(|v| v[..l].iter().any(|x| x.abs() > 1e-12)).expect("checked above");
    Ok(v[..l].to_vec())
}

fn merge_summary(path: &Path, key: &str, value: Value) -> Result<()> {
    let mut root = match fs::read_to_string(path) {
        Ok(text) => match serde_json::from_str::<Value>(&text) {
            Ok(Value::Object(m)) => m,
            _ => Map::new(),
        },
        Err(_) => Map::new(),
    };
    root.insert(key.to_string(), value);
    let text = serde_json::to_string_pretty(&Value::Object(root)).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn create_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))
}

/// Runs one command end to end: validation, ergodicity gate, experiment, artifacts.
pub fn execute(cmd: Command, config: &Path, o: &Overrides) -> Result<Outcome> {
    let ctx = Context::load(config, o)?;
    if cmd == Command::Check {
        let report = check_report(&ctx.aut);
        let value = serde_json::to_value(&report).map_err(|e| Error::Io(e.to_string()))?;
        create_out(&ctx.out)?;
        let json_path = ctx.out.join("check.json");
        fs::write(&json_path, serde_json::to_string_pretty(&value).map_err(|e| Error::Io(e.to_string()))? + "\n")
            .map_err(|e| Error::Io(format!("{}: {e}", json_path.display())))?;
        merge_summary(&ctx.out.join("summary.json"), "check", value.clone())?;
        let exit_code = if report.ergodicity.ergodic { 0 } else { 1 };
        return Ok(Outcome { exit_code, message: render_check(&report), csv: None, summary: value });
    }
    if cmd.needs_ergodic() {
        ctx.aut.require_ergodic()?;
    }
    let start = Instant::now();
    let (csv, mut summary) = run_experiment(cmd, &ctx)?;
    summary["seed"] = json!(ctx.seed);
    summary["workers"] = json!(ctx.workers);
    summary["runtime_s"] = json!(start.elapsed().as_secs_f64());
    create_out(&ctx.out)?;
    let csv_path = ctx.out.join(format!("{}_{}.csv", cmd.name(), ctx.seed));
    fs::write(&csv_path, &csv).map_err(|e| Error::Io(format!("{}: {e}", csv_path.display())))?;
    merge_summary(&ctx.out.join("summary.json"), cmd.name(), summary.clone())?;
    let message = format!(
        "{}: wrote {}\n{}",
        cmd.name(),
        csv_path.display(),
        serde_json::to_string_pretty(&summary).unwrap_or_default()
    );
    Ok(Outcome { exit_code: 0, message, csv: Some(csv_path), summary })
}

/// Maps an error onto the documented exit status.
pub fn exit_code(e: &Error) -> i32 {
    if is_validation_error(e) {
        1
    } else {
        2
    }
}
