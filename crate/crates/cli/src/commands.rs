use std::collections::HashMap;
use std::path::{Path, PathBuf};

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use retention_lab::energy::{compute_energy, EnergyReport, Objective};
use retention_lab::features::FeatureCatalog;
use retention_lab::learn::{cross_validate, iterative_elimination, train, KnnModel};
use retention_lab::policy::{
    label_corpus, parse_mix_manifest, read_dataset_csv, run_exhaustive, run_lars_sampling, run_multiprogrammed,
    run_multiprogrammed_static, run_scart, run_static, savings_report, write_dataset_csv, LabeledTable,
    PolicyConfig, PolicyResult, SavingsReport,
};
use retention_lab::trace::{desk_corpus, parse_trace, write_trace_string, Workload};
use retention_lab::{cachesim, Error, Result, SimStats};

use crate::config::ExperimentConfig;
use crate::output::{emit, write_file, Envelope, Inputs, TOOL, VERSION};
use crate::{Cli, Command, ConfigAction, GlobalArgs, Mode, TraceArgs};

struct Ctx {
    config: ExperimentConfig,
    inputs: Inputs,
}

impl Ctx {
    fn load(global: &GlobalArgs) -> Result<Self> {
        let mut inputs = Inputs::default();
        let mut config = match &global.config {
            Some(p) => ExperimentConfig::parse(&inputs.read_text(p)?)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = global.seed {
            config.seed = seed;
        }
        if let Some(o) = global.objective {
            config.objective = o.into();
        }
        if let Some(j) = global.jobs {
            config.jobs = j;
        }
        config.validate()?;
        Ok(Self { config, inputs })
    }

    fn envelope<T: Serialize>(self, command: &str, result: T, timing: Option<serde_json::Value>) -> Envelope<T> {
        Envelope {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            catalog_version: FeatureCatalog::default().version,
            seed: self.config.seed,
            config: self.config.dump(),
            inputs: self.inputs.into_vec(),
            result,
            timing,
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start {} workers: {e}", self.config.jobs)))
    }

    fn trace(&mut self, path: &Path) -> Result<Workload> {
        let bytes = self.inputs.read(path)?;
        let mut w = parse_trace(bytes.as_slice()).map_err(|e| match e {
            Error::Parse { line, message } => Error::Parse {
                line,
                message: format!("{}: {message}", path.display()),
            },
            other => other,
        })?;
        if w.name.is_empty() {
            w.name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        }
        Ok(w)
    }

    fn trace_paths(&mut self, args: &TraceArgs) -> Result<Vec<PathBuf>> {
        if !args.traces.is_empty() {
            return Ok(args.traces.clone());
        }
        if let Some(m) = &args.manifest {
            let text = self.inputs.read_text(m)?;
            let dir = m.parent().unwrap_or(Path::new(""));
            return Ok(manifest_entries(&text).map(|e| dir.join(e)).collect());
        }
        if self.config.workloads.is_empty() {
            return Err(Error::InvalidParams(
                "no traces: pass paths, --manifest, or set [workloads] paths".into(),
            ));
        }
        Ok(self.config.workloads.iter().map(PathBuf::from).collect())
    }

    fn traces(&mut self, args: &TraceArgs) -> Result<Vec<Workload>> {
        let paths = self.trace_paths(args)?;
        let workloads = paths.iter().map(|p| self.trace(p)).collect::<Result<Vec<_>>>()?;
        for (i, w) in workloads.iter().enumerate() {
            if workloads[..i].iter().any(|o| o.name == w.name) {
                return Err(Error::InvalidParams(format!("workload `{}` given twice", w.name)));
            }
        }
        Ok(workloads)
    }

    fn dataset(&mut self, path: &Path) -> Result<LabeledTable<f64>> {
        let bytes = self.inputs.read(path)?;
        read_dataset_csv(bytes.as_slice(), Some(&FeatureCatalog::default()))
    }

    fn features(&self, names: &[String]) -> Result<Vec<usize>> {
        let catalog = FeatureCatalog::default();
        if names.is_empty() {
            return Ok((0..catalog.len()).collect());
        }
        names
            .iter()
            .map(|n| {
                catalog
                    .index_of(n.trim())
                    .ok_or_else(|| Error::InvalidParams(format!("unknown feature `{n}`")))
            })
            .collect()
    }
}

fn manifest_entries(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
}

pub fn run(cli: Cli) -> Result<()> {
    let mut ctx = Ctx::load(&cli.global)?;
    match cli.command {
        Command::Gen { out, workloads, holdout } => gen(ctx, &out, workloads, holdout),
        Command::Simulate { trace, profile, out } => simulate(ctx, &trace, profile.as_deref(), out.as_ref()),
        Command::Label { traces, out } => {
            let workloads = ctx.traces(&traces)?;
            label(ctx, &workloads, &out)
        }
        Command::Train {
            dataset,
            out,
            features,
            selection,
        } => train_model(ctx, &dataset, &out, &features, selection.as_deref()),
        Command::Xval {
            dataset,
            folds,
            features,
            out,
        } => xval(ctx, &dataset, folds, &features, out.as_ref()),
        Command::SelectFeatures {
            dataset,
            folds,
            repeats,
            out,
            curve,
        } => select_features(ctx, &dataset, folds, repeats, out.as_ref(), curve.as_ref()),
        Command::Policy {
            traces,
            mode,
            profile,
            model,
            mix,
            out,
            csv,
        } => {
            let workloads = ctx.traces(&traces)?;
            policy(
                ctx,
                workloads,
                mode,
                profile.as_deref(),
                model.as_deref(),
                mix.as_deref(),
                out.as_ref(),
                csv.as_ref(),
            )
        }
        Command::Compare {
            baseline,
            results,
            out,
            csv,
        } => compare(ctx, &baseline, &results, out.as_ref(), csv.as_ref()),
        Command::Config {
            action: ConfigAction::Dump { out },
        } => emit(out.as_ref(), &ctx.config.dump()),
    }
}

fn gen(ctx: Ctx, out: &Path, workloads: Option<usize>, holdout: Option<f64>) -> Result<()> {
    let mut spec = ctx.config.corpus_spec();
    if let Some(n) = workloads {
        spec.workloads = n;
    }
    if let Some(h) = holdout {
        if !(0.0..1.0).contains(&h) {
            return Err(Error::InvalidParams(format!("holdout must be in [0, 1), got {h}")));
        }
    }
    let corpus = desk_corpus(&spec)?;
    let mut names = Vec::with_capacity(corpus.len());
    for w in &corpus {
        let file = format!("{}.trace", w.name);
        write_file(&out.join(&file), write_trace_string(w).as_bytes())?;
        names.push(file);
    }
    write_file(&out.join("manifest.txt"), lines(&names).as_bytes())?;
    if let Some(h) = holdout {
        let mut order = names.clone();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
        let n_test = ((order.len() as f64) * h).round() as usize;
        let (test, train) = order.split_at(n_test);
        let sorted = |v: &[String]| {
            let mut v = v.to_vec();
            v.sort();
            v
        };
        write_file(&out.join("train.txt"), lines(&sorted(train)).as_bytes())?;
        write_file(&out.join("test.txt"), lines(&sorted(test)).as_bytes())?;
    }
    info!("wrote {} traces to {}", corpus.len(), out.display());
    Ok(())
}

fn lines(items: &[String]) -> String {
    items.iter().map(|s| format!("{s}\n")).collect()
}

#[derive(Serialize)]
struct SimulateResult {
    workload: String,
    profile: String,
    stats: SimStats,
    energy: EnergyReport<f64>,
}

fn simulate(mut ctx: Ctx, path: &Path, profile: Option<&str>, out: Option<&PathBuf>) -> Result<()> {
    let w = ctx.trace(path)?;
    let name = profile.unwrap_or(&ctx.config.base).to_string();
    let p = ctx.config.profile(&name)?.clone();
    let pl = &ctx.config.platform;
    let stats = cachesim::simulate_with_l2(&w, &pl.l1, &pl.l2, &p, &pl.monitor, &pl.timing)?;
    let energy = compute_energy(&stats, &p, &pl.timing);
    let result = SimulateResult {
        workload: w.name,
        profile: name,
        stats,
        energy,
    };
    emit(out, &ctx.envelope("simulate", result, None).to_json()?)
}

fn label(ctx: Ctx, workloads: &[Workload], out: &Path) -> Result<()> {
    let config = ctx.config.policy()?;
    let tables = label_corpus(workloads, &config, ctx.config.jobs)?;
    let table = LabeledTable::from_tables(&config.catalog, &tables)?;
    let mut buf = Vec::new();
    write_dataset_csv(&table, &mut buf)?;
    write_file(out, &buf)
}

#[derive(Deserialize)]
struct SelectionFile {
    selected: Vec<String>,
}

fn train_model(
    mut ctx: Ctx,
    dataset: &Path,
    out: &Path,
    features: &[String],
    selection: Option<&Path>,
) -> Result<()> {
    let table = ctx.dataset(dataset)?;
    let names = match selection {
        Some(p) => {
            let env: Envelope<SelectionFile> = serde_json::from_str(&ctx.inputs.read_text(p)?)?;
            FeatureCatalog::default().check_version(&env.catalog_version)?;
            env.result.selected
        }
        None => features.to_vec(),
    };
    let selected = ctx.features(&names)?;
    let data = table.to_dataset(ctx.config.objective)?;
    let model = train(&data, ctx.config.k, &selected)?;
    let mut buf = Vec::new();
    model.save(&mut buf)?;
    buf.push(b'\n');
    write_file(out, &buf)
}

fn xval(mut ctx: Ctx, dataset: &Path, folds: usize, features: &[String], out: Option<&PathBuf>) -> Result<()> {
    let table = ctx.dataset(dataset)?;
    let selected = ctx.features(features)?;
    let data = table.to_dataset(ctx.config.objective)?;
    let mut report = cross_validate(&data, ctx.config.k, &selected, folds, ctx.config.seed)?;
    let timing = report.timing.take().map(|t| json!(t));
    let result = json!({
        "objective": ctx.config.objective,
        "k": ctx.config.k,
        "features": selected.iter().map(|&j| FeatureCatalog::default().features[j].name()).collect::<Vec<_>>(),
        "report": report,
    });
    emit(out, &ctx.envelope("xval", result, timing).to_json()?)
}

#[derive(Serialize)]
struct CurvePoint {
    n_features: usize,
    f_score: f64,
    prediction_ops: u64,
    features: Vec<&'static str>,
}

fn select_features(
    mut ctx: Ctx,
    dataset: &Path,
    folds: usize,
    repeats: usize,
    out: Option<&PathBuf>,
    curve_csv: Option<&PathBuf>,
) -> Result<()> {
    let table = ctx.dataset(dataset)?;
    let data = table.to_full_dataset()?;
    let objective = ctx.config.objective;
    let r = iterative_elimination(&data, objective, ctx.config.seed, ctx.config.k, folds, repeats)?;
    let catalog = FeatureCatalog::default();
    let names = |idx: &[usize]| idx.iter().map(|&j| catalog.features[j].name()).collect::<Vec<_>>();
    let curve: Vec<CurvePoint> = r
        .curve
        .iter()
        .map(|p| CurvePoint {
            n_features: p.n_features,
            f_score: p.f_score,
            prediction_ops: p.prediction_ops,
            features: names(&p.features),
        })
        .collect();
    if let Some(path) = curve_csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["n_features", "f_score", "prediction_ops", "features"])?;
        for p in &curve {
            w.write_record([
                p.n_features.to_string(),
                p.f_score.to_string(),
                p.prediction_ops.to_string(),
                p.features.join(" "),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        write_file(path, &bytes)?;
    }
    let timing = json!({
        "mean_prediction_ns": r.curve.iter().map(|p| json!({"n_features": p.n_features, "ns": p.mean_prediction_ns})).collect::<Vec<_>>(),
    });
    let result = json!({
        "objective": objective,
        "selected": names(&r.selected),
        "curve": curve,
    });
    emit(out, &ctx.envelope("select-features", result, Some(timing)).to_json()?)
}

fn load_model(ctx: &mut Ctx, path: &Path) -> Result<KnnModel<f64>> {
    let bytes = ctx.inputs.read(path)?;
    KnnModel::load(bytes.as_slice(), &FeatureCatalog::default())
}

fn static_index(config: &PolicyConfig<f64>, profile: Option<&str>) -> Result<usize> {
    match profile {
        None => Ok(config.base),
        Some(n) => config
            .profile_index(n)
            .ok_or_else(|| Error::InvalidParams(format!("profile `{n}` is not a candidate"))),
    }
}

#[allow(clippy::too_many_arguments)]
fn policy(
    mut ctx: Ctx,
    workloads: Vec<Workload>,
    mode: Mode,
    profile: Option<&str>,
    model: Option<&Path>,
    mix: Option<&Path>,
    out: Option<&PathBuf>,
    csv_out: Option<&PathBuf>,
) -> Result<()> {
    let config = ctx.config.policy()?;
    let model = match (mode, model) {
        (Mode::Scart, Some(p)) => Some(load_model(&mut ctx, p)?),
        (Mode::Scart, None) => return Err(Error::InvalidParams("scart needs --model".into())),
        (_, Some(_)) => return Err(Error::InvalidParams("--model only applies to scart".into())),
        (_, None) => None,
    };
    if profile.is_some() && mode != Mode::Static {
        return Err(Error::InvalidParams("--profile only applies to static".into()));
    }
    let pool = ctx.pool()?;

    let results: Vec<PolicyResult<f64>> = match mix {
        Some(mix_path) => {
            let mixes = parse_mix_manifest(&ctx.inputs.read_text(mix_path)?)?;
            let by_name: HashMap<&str, &Workload> = workloads.iter().map(|w| (w.name.as_str(), w)).collect();
            let groups = mixes
                .iter()
                .map(|m| {
                    m.members
                        .iter()
                        .map(|name| {
                            let w = by_name
                                .get(name.as_str())
                                .ok_or_else(|| Error::InvalidParams(format!("mix `{}`: no workload `{name}`", m.name)))?;
                            Ok(Workload::new(format!("{}/{name}", m.name), w.phases.clone()))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let index = static_index(&config, profile)?;
            let per_mix = pool.install(|| {
                groups
                    .par_iter()
                    .map(|g| match (mode, &model) {
                        (Mode::Scart, Some(m)) => run_multiprogrammed(g, m, &config),
                        (Mode::Static, _) => run_multiprogrammed_static(g, index, &config),
                        _ => Err(Error::InvalidParams("mixes run in static or scart mode".into())),
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            per_mix.into_iter().flatten().collect()
        }
        None => {
            let index = static_index(&config, profile)?;
            pool.install(|| {
                workloads
                    .par_iter()
                    .map(|w| match (mode, &model) {
                        (Mode::Static, _) => run_static(w, &config.retention_set[index], &config),
                        (Mode::Exhaustive, _) => run_exhaustive(w, &config),
                        (Mode::Lars, _) => run_lars_sampling(w, &config),
                        (Mode::Scart, Some(m)) => run_scart(w, m, &config),
                        (Mode::Scart, None) => unreachable!("checked above"),
                    })
                    .collect::<Result<Vec<_>>>()
            })?
        }
    };

    if let Some(path) = csv_out {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "workload",
            "policy",
            "latency_ns",
            "energy_nj",
            "migrations",
            "reverts",
            "overhead_ns",
            "chosen",
        ])?;
        for r in &results {
            w.write_record([
                r.workload.clone(),
                r.policy.clone(),
                r.latency_ns.to_string(),
                r.energy_nj.to_string(),
                r.migrations.to_string(),
                r.reverts.to_string(),
                r.overhead_ns.to_string(),
                r.chosen_names().join(" "),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        write_file(path, &bytes)?;
    }
    emit(out, &ctx.envelope("policy", results, None).to_json()?)
}

fn load_results(ctx: &mut Ctx, path: &Path) -> Result<(String, Vec<PolicyResult<f64>>)> {
    let text = ctx.inputs.read_text(path)?;
    let env: Envelope<serde_json::Value> = serde_json::from_str(&text)?;
    if env.tool != TOOL || env.command != "policy" {
        return Err(Error::Schema(format!(
            "{}: not a policy result (tool `{}`, command `{}`)",
            path.display(),
            env.tool,
            env.command
        )));
    }
    let results: Vec<PolicyResult<f64>> = serde_json::from_value(env.result)?;
    Ok((env.catalog_version, results))
}

#[derive(Serialize)]
struct CompareResult {
    baseline: InputRef,
    reports: Vec<SavingsReport>,
}

#[derive(Serialize)]
struct InputRef {
    path: String,
    objective: Option<Objective>,
}

fn compare(
    mut ctx: Ctx,
    baseline: &Path,
    results: &[PathBuf],
    out: Option<&PathBuf>,
    csv_out: Option<&PathBuf>,
) -> Result<()> {
    let (base_catalog, base) = load_results(&mut ctx, baseline)?;
    let mut reports = Vec::with_capacity(results.len());
    for path in results {
        let (catalog, rs) = load_results(&mut ctx, path)?;
        if catalog != base_catalog {
            return Err(Error::CatalogMismatch {
                expected: base_catalog,
                found: format!("{catalog} in {}", path.display()),
            });
        }
        reports.push(savings_report(&rs, &base)?);
    }
    if let Some(path) = csv_out {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "policy",
            "baseline",
            "workload",
            "baseline_latency_ns",
            "policy_latency_ns",
            "latency_savings_pct",
            "baseline_energy_nj",
            "policy_energy_nj",
            "energy_savings_pct",
        ])?;
        for r in &reports {
            for row in &r.rows {
                w.write_record([
                    r.policy.clone(),
                    r.baseline.clone(),
                    row.workload.clone(),
                    row.baseline_latency_ns.to_string(),
                    row.policy_latency_ns.to_string(),
                    row.latency_savings_pct.to_string(),
                    row.baseline_energy_nj.to_string(),
                    row.policy_energy_nj.to_string(),
                    row.energy_savings_pct.to_string(),
                ])?;
            }
            w.write_record([
                r.policy.clone(),
                r.baseline.clone(),
                "geomean".into(),
                String::new(),
                String::new(),
                r.latency_geomean_savings_pct.to_string(),
                String::new(),
                String::new(),
                r.energy_geomean_savings_pct.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        write_file(path, &bytes)?;
    }
    let result = CompareResult {
        baseline: InputRef {
            path: baseline.display().to_string(),
            objective: base.first().map(|r| r.objective),
        },
        reports,
    };
    emit(out, &ctx.envelope("compare", result, None).to_json()?)
}
