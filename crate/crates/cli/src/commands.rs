use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use ndarray::Array1;
use serde::Serialize;
use serde_json::json;
use wbary::barycenter::{self, InitMode, SolverOptions};
use wbary::io;
use wbary::measures::WeightedFamily;
use wbary::pipelines::{self, ClassifyConfig, DvqConfig, GaussBenchConfig, SolverSettings, WaspConfig};
use wbary::{rng, synthetic};

use crate::config::{require_dir, require_file, RunConfig};
use crate::error::CliError;

pub struct Context {
    pub dry_run: bool,
    pub out: Option<PathBuf>,
}

impl Context {
    fn out_dir(&self) -> Result<PathBuf, CliError> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("results"));
        fs::create_dir_all(&dir).map_err(|source| CliError::Output { path: dir.display().to_string(), source })?;
        Ok(dir)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|source| CliError::Output { path: path.display().to_string(), source })
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn solver_settings(cfg: &mut RunConfig) -> Result<SolverSettings, CliError> {
    let d = SolverSettings::default();
    Ok(SolverSettings {
        step_size: cfg.get("step_size", d.step_size)?,
        tolerance: cfg.get("tolerance", d.tolerance)?,
        max_iterations: cfg.get("max_iter", d.max_iterations)?,
    })
}

fn solver_json(s: &SolverSettings) -> serde_json::Value {
    json!({ "step_size": s.step_size, "tolerance": s.tolerance, "max_iter": s.max_iterations })
}

pub const OT_HELP: &str = "Prints {\"cost\", \"w2\", \"plan_path\"} as JSON. \
With --plan the transport plan is written as i,j,mass rows; with --out the JSON is also saved as ot.json.";

pub fn ot(source: &Path, target: &Path, plan_path: Option<&Path>, ctx: &Context) -> Result<(), CliError> {
    require_file(source)?;
    require_file(target)?;
    if ctx.dry_run {
        return print_json(&json!({ "command": "ot", "source": source, "target": target, "plan": plan_path }));
    }
    let (mu, nu) = (io::read_measure(source)?, io::read_measure(target)?);
    let plan = wbary::solve_ot(&mu, &nu)?;
    if let Some(p) = plan_path {
        io::write_plan(p, &plan)?;
    }
    let result = json!({ "cost": plan.cost(), "w2": plan.cost().max(0.0).sqrt(), "plan_path": plan_path });
    if ctx.out.is_some() {
        write_json(&ctx.out_dir()?.join("ot.json"), &result)?;
    }
    print_json(&result)
}

pub const BARYCENTER_HELP: &str = "\
Config keys (defaults):
  inputs       comma-separated measure CSV files, appended to positional inputs
  weights      family weights, comma-separated (uniform)
  m            barycenter support size (atom count of the first input)
  init         CSV of starting support points (k-means++ on the pooled supports)
  step_size    0.5
  tolerance    1e-6
  max_iter     200
  seed         0
Writes barycenter.csv and trace.json to --out (default: results).";

#[derive(Serialize)]
struct Trace {
    objective: Vec<f64>,
    residual: Vec<f64>,
    iterations: usize,
    converged: bool,
}

pub fn barycenter(mut positional: Vec<PathBuf>, cfg: &mut RunConfig, ctx: &Context) -> Result<(), CliError> {
    positional.extend(cfg.list::<PathBuf>("inputs", vec![])?);
    let weights = cfg.optional::<String>("weights")?;
    let m = cfg.optional::<usize>("m")?;
    let init = cfg.path("init")?;
    let seed = cfg.get::<u64>("seed", 0)?;
    let solver = solver_settings(cfg)?;
    cfg.finish()?;
    if positional.is_empty() {
        return Err(CliError::Config("no input measures given".into()));
    }
    for p in positional.iter().chain(&init) {
        require_file(p)?;
    }
    let weights = weights
        .map(|w| {
            w.split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| CliError::Config(format!("bad weight {s:?}"))))
                .collect::<Result<Vec<f64>, _>>()
        })
        .transpose()?;
    if let Some(w) = &weights {
        if w.len() != positional.len() {
            return Err(CliError::Config(format!("{} weights for {} inputs", w.len(), positional.len())));
        }
    }
    solver.validate()?;
    if ctx.dry_run {
        return print_json(&json!({
            "command": "barycenter", "inputs": positional, "weights": weights, "m": m,
            "init": init, "seed": seed, "solver": solver_json(&solver),
        }));
    }

    let measures = positional.iter().map(io::read_measure).collect::<Result<Vec<_>, _>>()?;
    let family = WeightedFamily::new(measures, weights.map(Array1::from))?;
    let m = m.unwrap_or_else(|| family.measures()[0].len());
    let mut opts: SolverOptions = solver.options(m, seed);
    if let Some(p) = &init {
        opts = opts.with_init(InitMode::UserSupplied(io::read_points(p)?));
    }
    let state = barycenter::solve(&family, &opts)?;
    info!("barycenter: {} iterations, converged = {}, objective = {:e}", state.iteration, state.converged, state.objective().unwrap_or(f64::NAN));
    let dir = ctx.out_dir()?;
    io::write_measure(dir.join("barycenter.csv"), &state.measure()?)?;
    write_json(
        &dir.join("trace.json"),
        &Trace {
            objective: state.objective_trace.clone(),
            residual: state.residual_trace.clone(),
            iterations: state.iteration,
            converged: state.converged,
        },
    )
}

pub const GAUSS_BENCH_HELP: &str = "\
Config keys (defaults):
  repeats                20
  atom_grid              10,50,150
  samples_per_component  100
  mc_sample_size         100
  mc_repeats             100
  seed                   0
  step_size, tolerance, max_iter   0.5, 1e-6, 200
Writes results.csv to --out (default: results).";

pub fn gauss_bench(cfg: &mut RunConfig, ctx: &Context) -> Result<(), CliError> {
    let d = GaussBenchConfig::default();
    let bench = GaussBenchConfig {
        repeats: cfg.get("repeats", d.repeats)?,
        atom_grid: cfg.list("atom_grid", d.atom_grid)?,
        samples_per_component: cfg.get("samples_per_component", d.samples_per_component)?,
        mc_sample_size: cfg.get("mc_sample_size", d.mc_sample_size)?,
        mc_repeats: cfg.get("mc_repeats", d.mc_repeats)?,
        seed: cfg.get("seed", d.seed)?,
        solver: solver_settings(cfg)?,
    };
    cfg.finish()?;
    bench.validate()?;
    if ctx.dry_run {
        return print_json(&json!({
            "command": "gauss-bench", "repeats": bench.repeats, "atom_grid": bench.atom_grid,
            "samples_per_component": bench.samples_per_component, "mc_sample_size": bench.mc_sample_size,
            "mc_repeats": bench.mc_repeats, "seed": bench.seed, "solver": solver_json(&bench.solver),
        }));
    }
    let records = pipelines::gauss_bench(&bench)?;
    let path = ctx.out_dir()?.join("results.csv");
    io::write_records(&path, &records)?;
    info!("wrote {} records to {}", records.len(), path.display());
    Ok(())
}

pub const WASP_HELP: &str = "\
Config keys (defaults):
  n                 2000
  K_list            2,5,10
  m_list            10,100,200
  repeats           10
  draws_per_subset  200
  mc_sample_size    100
  mc_repeats        100
  seed              0
  step_size, tolerance, max_iter   0.5, 1e-6, 200
Writes results.json to --out (default: results). Each (rep, K) also carries a
raw_subset record scoring the first subset posterior's draws directly.";

pub fn wasp(cfg: &mut RunConfig, ctx: &Context) -> Result<(), CliError> {
    let d = WaspConfig::default();
    let run = WaspConfig {
        n: cfg.get("n", d.n)?,
        k_list: cfg.list("K_list", d.k_list)?,
        m_list: cfg.list("m_list", d.m_list)?,
        repeats: cfg.get("repeats", d.repeats)?,
        draws_per_subset: cfg.get("draws_per_subset", d.draws_per_subset)?,
        mc_sample_size: cfg.get("mc_sample_size", d.mc_sample_size)?,
        mc_repeats: cfg.get("mc_repeats", d.mc_repeats)?,
        seed: cfg.get("seed", d.seed)?,
        solver: solver_settings(cfg)?,
    };
    cfg.finish()?;
    run.validate()?;
    if ctx.dry_run {
        return print_json(&json!({
            "command": "wasp", "n": run.n, "K_list": run.k_list, "m_list": run.m_list, "repeats": run.repeats,
            "draws_per_subset": run.draws_per_subset, "mc_sample_size": run.mc_sample_size,
            "mc_repeats": run.mc_repeats, "seed": run.seed, "solver": solver_json(&run.solver),
        }));
    }
    let records = pipelines::wasp_experiment(&run)?;
    let path = ctx.out_dir()?.join("results.json");
    write_json(&path, &records)?;
    info!("wrote {} records to {}", records.len(), path.display());
    Ok(())
}

pub const CLASSIFY_HELP: &str = "\
Config keys (defaults):
  train_dir   directory of image CSVs with labels.csv (required)
  test_dir    directory of image CSVs with labels.csv (required)
  m_list      10,20,40,80
  bins        256
  seed        0
  step_size, tolerance, max_iter   0.5, 1e-6, 200
Writes metrics.csv to --out (default: results).";

pub fn classify(cfg: &mut RunConfig, ctx: &Context) -> Result<(), CliError> {
    let d = ClassifyConfig::default();
    let train_dir = cfg.required_path("train_dir")?;
    let test_dir = cfg.required_path("test_dir")?;
    let run = ClassifyConfig {
        m_list: cfg.list("m_list", d.m_list)?,
        bins: cfg.get("bins", d.bins)?,
        seed: cfg.get("seed", d.seed)?,
        solver: solver_settings(cfg)?,
    };
    cfg.finish()?;
    require_dir(&train_dir)?;
    require_dir(&test_dir)?;
    run.validate()?;
    if ctx.dry_run {
        return print_json(&json!({
            "command": "classify", "train_dir": train_dir, "test_dir": test_dir, "m_list": run.m_list,
            "bins": run.bins, "seed": run.seed, "solver": solver_json(&run.solver),
        }));
    }
    let train = io::read_image_dataset(&train_dir)?;
    let test = io::read_image_dataset(&test_dir)?;
    let records = pipelines::classify_experiment(&train, &test, &run)?;
    let path = ctx.out_dir()?.join("metrics.csv");
    io::write_records(&path, &records)?;
    info!("wrote {} records to {}", records.len(), path.display());
    Ok(())
}

pub const DVQ_HELP: &str = "\
Config keys (defaults):
  data              point CSV with a header row (required)
  labels            reference label CSV, one label per row under a header (none)
  k_list            3
  S_list            2,5
  summary_fraction  0.1
  seed              0
  step_size, tolerance, max_iter   0.5, 1e-6, 200
Writes results.csv to --out (default: results), with a full-data k-means
baseline per k. ARI and NMI need labels; Silhouette and Calinski-Harabasz are
left empty where undefined.";

pub fn dvq(cfg: &mut RunConfig, ctx: &Context) -> Result<(), CliError> {
    let d = DvqConfig::default();
    let data = cfg.required_path("data")?;
    let labels = cfg.path("labels")?;
    let run = DvqConfig {
        k_list: cfg.list("k_list", d.k_list)?,
        s_list: cfg.list("S_list", d.s_list)?,
        summary_fraction: cfg.get("summary_fraction", d.summary_fraction)?,
        seed: cfg.get("seed", d.seed)?,
        solver: solver_settings(cfg)?,
    };
    cfg.finish()?;
    require_file(&data)?;
    if let Some(l) = &labels {
        require_file(l)?;
    }
    run.validate()?;
    if ctx.dry_run {
        return print_json(&json!({
            "command": "dvq", "data": data, "labels": labels, "k_list": run.k_list, "S_list": run.s_list,
            "summary_fraction": run.summary_fraction, "seed": run.seed, "solver": solver_json(&run.solver),
        }));
    }
    let points = io::read_points(&data)?;
    let truth = labels.map(io::read_labels).transpose()?;
    let records = pipelines::dvq_experiment(points.view(), truth.as_deref(), &run)?;
    let path = ctx.out_dir()?.join("results.csv");
    io::write_records(&path, &records)?;
    info!("wrote {} records to {}", records.len(), path.display());
    Ok(())
}

pub const GENERATE_HELP: &str = "\
Kinds and config keys (defaults):
  glyphs   per_class 50, seed 0: writes train/ and test/ image datasets of
           filled squares and hollow rings
  blobs    n 3000, d 10, k 3, separation 10, seed 0: writes data.csv and
           labels.csv
Output goes to --out (default: results).";

pub fn generate(kind: &str, cfg: &mut RunConfig, ctx: &Context) -> Result<(), CliError> {
    match kind {
        "glyphs" => {
            let per_class: usize = cfg.get("per_class", 50)?;
            let seed: u64 = cfg.get("seed", 0)?;
            cfg.finish()?;
            if per_class == 0 {
                return Err(CliError::Config("per_class must be positive".into()));
            }
            if ctx.dry_run {
                return print_json(&json!({ "command": "generate", "kind": kind, "per_class": per_class, "seed": seed }));
            }
            let dir = ctx.out_dir()?;
            io::write_image_dataset(dir.join("train"), &synthetic::glyph_dataset(per_class, rng::task_seed(seed, &[0])))?;
            io::write_image_dataset(dir.join("test"), &synthetic::glyph_dataset(per_class, rng::task_seed(seed, &[1])))?;
            info!("wrote {} images per split to {}", 2 * per_class, dir.display());
            Ok(())
        }
        "blobs" => {
            let n: usize = cfg.get("n", 3000)?;
            let d: usize = cfg.get("d", 10)?;
            let k: usize = cfg.get("k", 3)?;
            let separation: f64 = cfg.get("separation", 10.0)?;
            let seed: u64 = cfg.get("seed", 0)?;
            cfg.finish()?;
            if ctx.dry_run {
                return print_json(&json!({
                    "command": "generate", "kind": kind, "n": n, "d": d, "k": k, "separation": separation, "seed": seed,
                }));
            }
            let (points, labels) = synthetic::gaussian_blobs(n, d, k, separation, seed)?;
            let dir = ctx.out_dir()?;
            io::write_points(dir.join("data.csv"), &points)?;
            io::write_labels(dir.join("labels.csv"), &labels)?;
            info!("wrote {n} points to {}", dir.display());
            Ok(())
        }
        other => Err(CliError::Config(format!("unknown kind {other:?}; expected glyphs or blobs"))),
    }
}
