use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use stancebench_core::attacks::{build_attack_set, AttackOptions, KeyboardAdjacency, ParaphraseMap};
use stancebench_core::correctness::{estimate_correctness, read_estimates, read_judgments, write_estimates};
use stancebench_core::evaluate::{aggregate_runs, build_matrix, score_run, LowResourceScore};
use stancebench_core::ingest::{
    apply_assignment, builtin_adapter, generate_split, normalize, subsample_train, write_manifest, AdapterConfig,
    SplitAssignment, SplitManifest,
};
use stancebench_core::metrics::RelativeFormula;
use stancebench_core::modelio::{
    read_prediction_set, request_predictions, write_prediction_set, ClientOptions, Endpoint,
};
use stancebench_core::records::{builtin_scheme, read_jsonl, read_split, split_file_name, write_jsonl, write_splits};
use stancebench_core::report::{render_low_resource, render_report, Style, TableSelection};
use stancebench_core::{AttackKind, AttackSet, DatasetKey, EvalSet, RunConfig, ScoreMatrix, Split, StanceRecord};

use crate::{Cli, Command, DataArgs};

struct Ctx {
    config: RunConfig,
    datasets: Vec<DatasetKey>,
    attacks: Vec<AttackKind>,
    explicit_datasets: bool,
    explicit_attacks: bool,
}

impl Ctx {
    fn data_dir(&self, args: &DataArgs) -> PathBuf {
        args.data.clone().unwrap_or_else(|| self.config.data_dir.clone())
    }

    fn out(&self) -> &Path {
        &self.config.out_dir
    }

    /// Explicit datasets, or those with a file named by `probe` in `dir`.
    fn datasets_with(&self, dir: &Path, probe: impl Fn(DatasetKey) -> String) -> Result<Vec<DatasetKey>> {
        if self.explicit_datasets {
            return Ok(self.datasets.clone());
        }
        let found: Vec<DatasetKey> = DatasetKey::ALL
            .into_iter()
            .filter(|d| dir.join(probe(*d)).exists())
            .collect();
        if found.is_empty() {
            bail!("no dataset inputs found in {}", dir.display());
        }
        Ok(found)
    }
}

fn records_file(dataset: DatasetKey) -> String {
    format!("{dataset}.records.jsonl")
}

fn attack_dir(data: &Path) -> PathBuf {
    data.join("attacks")
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn ratio_value(r: f64) -> Result<f64> {
    let v = if r > 1.0 { r / 100.0 } else { r };
    if !(v > 0.0 && v <= 1.0) {
        bail!("ratio {r} outside (0, 100]");
    }
    Ok(v)
}

fn low_resource_system(system: &str, ratio: f64) -> String {
    format!("{system}@r{}", (ratio * 100.0).round() as u64)
}

pub fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = cli.out {
        config.out_dir = out;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let explicit_datasets = !cli.datasets.is_empty() || !config.datasets.is_empty();
    let datasets = if cli.datasets.is_empty() {
        config.datasets.clone()
    } else {
        cli.datasets
    };
    let explicit_attacks = !cli.attacks.is_empty() || !config.attacks.is_empty();
    let attacks = if cli.attacks.is_empty() {
        config.attacks.clone()
    } else {
        cli.attacks
    };
    let ctx = Ctx {
        config,
        datasets,
        attacks,
        explicit_datasets,
        explicit_attacks,
    };
    match cli.command {
        Command::Ingest(a) => ingest(&ctx, a.raw, &a.data),
        Command::Split(a) => split(&ctx, &a),
        Command::Subsample(a) => subsample(&ctx, &a.data, &a.ratios),
        Command::Attack(a) => attack(&ctx, &a),
        Command::Correctness(a) => correctness(&ctx, &a.data, a.judgments, a.sample_size),
        Command::Predict(a) => predict(&ctx, a),
        Command::Evaluate(a) => evaluate(&ctx, a),
        Command::Report(a) => report(&ctx, a),
    }
}

fn adapter_for(ctx: &Ctx, dataset: DatasetKey) -> Result<AdapterConfig> {
    if let Some(dir) = &ctx.config.adapter_dir {
        let path = dir.join(format!("{dataset}.toml"));
        if path.exists() {
            return AdapterConfig::from_file(&path).with_context(|| format!("loading {}", path.display()));
        }
    }
    Ok(builtin_adapter(dataset))
}

fn ingest(ctx: &Ctx, raw: Option<PathBuf>, data: &DataArgs) -> Result<()> {
    let raw = raw.unwrap_or_else(|| ctx.config.raw_dir.clone());
    let data = ctx.data_dir(data);
    let candidates = if ctx.explicit_datasets {
        ctx.datasets.clone()
    } else {
        DatasetKey::ALL.to_vec()
    };
    let mut done = 0;
    for dataset in candidates {
        let adapter = adapter_for(ctx, dataset)?;
        let dir = raw.join(dataset.as_str());
        if !ctx.explicit_datasets && !adapter.files.iter().all(|f| dir.join(&f.path).exists()) {
            log::info!("{dataset}: raw files not found under {}, skipping", dir.display());
            continue;
        }
        let records = normalize(&adapter, &dir).with_context(|| format!("normalizing {dataset}"))?;
        let path = data.join(records_file(dataset));
        write_jsonl(&path, &records)?;
        log::info!("{dataset}: {} records -> {}", records.len(), path.display());
        done += 1;
    }
    if done == 0 {
        bail!("no raw dataset found under {}", raw.display());
    }
    Ok(())
}

fn split(ctx: &Ctx, args: &DataArgs) -> Result<()> {
    let data = ctx.data_dir(args);
    for dataset in ctx.datasets_with(&data, records_file)? {
        let records: Vec<StanceRecord> = read_jsonl(&data.join(records_file(dataset)))
            .with_context(|| format!("reading {dataset} records; run `ingest` first"))?;
        let adapter = adapter_for(ctx, dataset)?;
        let assignment = generate_split(dataset, &records, &adapter.split, ctx.config.seed)?;
        let assigned = apply_assignment(&records, &assignment)?;
        write_splits(&data, dataset, &assigned)?;
        let manifest = SplitManifest::new(&assignment, &records, adapter.split.is_topic_based());
        write_manifest(&data, &manifest)?;
        let c = manifest.counts;
        log::info!(
            "{dataset}: {} train / {} dev / {} test ({})",
            c.train,
            c.dev,
            c.test,
            manifest.rule
        );
    }
    Ok(())
}

fn read_all_splits(data: &Path, dataset: DatasetKey) -> Result<Vec<StanceRecord>> {
    let mut out = Vec::new();
    for s in Split::ALL {
        out.extend(read_split(data, dataset, s).with_context(|| format!("reading {dataset} {s}; run `split` first"))?);
    }
    Ok(out)
}

fn subsample(ctx: &Ctx, args: &DataArgs, ratios: &[f64]) -> Result<()> {
    let data = ctx.data_dir(args);
    let ratios: Vec<f64> = if ratios.is_empty() {
        ctx.config.ratios.clone()
    } else {
        ratios.to_vec()
    };
    let dir = ctx.out().join("lowresource");
    for dataset in ctx.datasets_with(&data, |d| split_file_name(d, Split::Train))? {
        let records = read_all_splits(&data, dataset)?;
        let assignment = SplitAssignment {
            dataset,
            assignment: records.iter().map(|r| (r.id.clone(), r.split)).collect(),
            seed: ctx.config.seed,
            rule: "loaded".into(),
        };
        for r in &ratios {
            let sample = subsample_train(&assignment, &records, ratio_value(*r)?, ctx.config.seed)?;
            sample.write(&dir)?;
            log::info!("{dataset}: ratio {} -> {} train ids", sample.ratio, sample.ids.len());
        }
    }
    Ok(())
}

fn paraphrase_path(ctx: &Ctx, dataset: DatasetKey) -> Option<PathBuf> {
    ctx.config
        .attack
        .paraphrase_dir
        .as_ref()
        .map(|d| d.join(format!("{dataset}.paraphrase.jsonl")))
}

fn attack(ctx: &Ctx, args: &DataArgs) -> Result<()> {
    let data = ctx.data_dir(args);
    let adjacency = match &ctx.config.attack.keyboard {
        Some(p) => KeyboardAdjacency::from_file(p)?,
        None => KeyboardAdjacency::qwerty(),
    };
    let attacks = if ctx.explicit_attacks {
        ctx.attacks.clone()
    } else {
        AttackKind::ALL.to_vec()
    };
    for dataset in ctx.datasets_with(&data, |d| split_file_name(d, Split::Test))? {
        let test = read_split(&data, dataset, Split::Test).with_context(|| format!("reading {dataset} test split"))?;
        for &attack in &attacks {
            let paraphrases = if attack == AttackKind::Paraphrase {
                match paraphrase_path(ctx, dataset).filter(|p| p.exists()) {
                    Some(p) => Some(ParaphraseMap::from_jsonl(&p)?),
                    None if ctx.explicit_attacks => {
                        bail!("{dataset}: paraphrase attack needs <paraphrase_dir>/{dataset}.paraphrase.jsonl")
                    }
                    None => {
                        log::info!("{dataset}: no paraphrase file, skipping paraphrase attack");
                        continue;
                    }
                }
            } else {
                None
            };
            let options = AttackOptions {
                targets: ctx.config.attack.targets,
                adjacency: adjacency.clone(),
                paraphrases,
                workers: ctx.config.attack.workers,
            };
            let set = build_attack_set(&test, attack, ctx.config.seed, &options)?;
            set.write(&attack_dir(&data))?;
            log::info!("{dataset}: {} {} records", set.records.len(), attack.as_str());
        }
    }
    Ok(())
}

fn load_attack_sets(ctx: &Ctx, data: &Path, attack: AttackKind) -> Result<Vec<AttackSet>> {
    let dir = attack_dir(data);
    let mut sets = Vec::new();
    let datasets = ctx
        .datasets_with(&dir, |d| AttackSet::file_name(d, attack))
        .unwrap_or_default();
    for d in datasets {
        sets.push(AttackSet::read(&dir, d, attack).with_context(|| format!("reading {d} {} set", attack.as_str()))?);
    }
    Ok(sets)
}

fn correctness(ctx: &Ctx, args: &DataArgs, judgments: Option<PathBuf>, sample_size: Option<usize>) -> Result<()> {
    let data = ctx.data_dir(args);
    let judgments = judgments.or_else(|| ctx.config.correctness.judgments.clone());
    let sample_size = sample_size.unwrap_or(ctx.config.correctness.sample_size);
    let attacks = if ctx.explicit_attacks {
        ctx.attacks.clone()
    } else {
        AttackKind::ALL.to_vec()
    };
    let mut estimates = Vec::new();
    for attack in attacks {
        let sets = load_attack_sets(ctx, &data, attack)?;
        if sets.is_empty() {
            if ctx.explicit_attacks {
                bail!("no {} attack sets found; run `attack` first", attack.as_str());
            }
            continue;
        }
        let mut originals = Vec::new();
        for s in &sets {
            originals.extend(read_split(&data, s.dataset, Split::Test)?);
        }
        let judged = match (attack, &judgments) {
            (AttackKind::Paraphrase, Some(p)) => Some(read_judgments(p)?),
            _ => None,
        };
        let est = estimate_correctness(
            attack,
            &sets,
            &originals,
            sample_size,
            ctx.config.seed,
            judged.as_deref(),
        )
        .with_context(|| format!("estimating {} correctness", attack.as_str()))?;
        log::info!(
            "{}: c = {:.4} ({:?}, n = {})",
            attack.as_str(),
            est.c,
            est.method,
            est.sample_size
        );
        estimates.push(est);
    }
    let path = ctx.out().join("correctness.json");
    write_estimates(&path, &estimates)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// Gold records of every eval set available for `dataset`.
fn eval_sets_for(ctx: &Ctx, data: &Path, dataset: DatasetKey) -> Result<Vec<(EvalSet, Vec<StanceRecord>)>> {
    let mut out = vec![(EvalSet::Test, read_split(data, dataset, Split::Test)?)];
    let attacks = if ctx.explicit_attacks {
        ctx.attacks.clone()
    } else {
        AttackKind::ALL.to_vec()
    };
    for a in attacks {
        let dir = attack_dir(data);
        if dir.join(AttackSet::file_name(dataset, a)).exists() {
            out.push((EvalSet::Attack(a), AttackSet::read(&dir, dataset, a)?.records));
        } else if ctx.explicit_attacks {
            bail!("{dataset}: missing {} attack set", a.as_str());
        }
    }
    Ok(out)
}

fn predict(ctx: &Ctx, args: crate::PredictArgs) -> Result<()> {
    let data = ctx.data_dir(&args.data);
    let seeds = if args.seeds.is_empty() {
        ctx.config.seeds.clone()
    } else {
        args.seeds.clone()
    };
    let mut systems = ctx.config.systems.clone();
    if let Some(name) = &args.system {
        systems.retain(|s| &s.name == name);
        if systems.is_empty() {
            systems.push(stancebench_core::config::SystemConfig {
                name: name.clone(),
                endpoint: None,
                fixtures: None,
            });
        }
    }
    if systems.is_empty() {
        bail!("no systems: pass --system or list [[systems]] in the config");
    }
    let options = ClientOptions {
        batch_size: args.batch_size,
        cache_dir: args.cache_dir.clone(),
        ..ClientOptions::default()
    };
    let out = ctx.out().join("predictions");
    let datasets = ctx.datasets_with(&data, |d| split_file_name(d, Split::Test))?;
    for system in &systems {
        for &seed in &seeds {
            for &dataset in &datasets {
                let scheme = builtin_scheme(dataset);
                for (eval_set, records) in eval_sets_for(ctx, &data, dataset)? {
                    let endpoint = if let Some(url) = args.endpoint.clone().or_else(|| system.endpoint.clone()) {
                        Endpoint::Http(url)
                    } else if let Some(dir) = args
                        .fixtures
                        .clone()
                        .or_else(|| system.fixtures.clone())
                        .or_else(|| ctx.config.fixtures.clone())
                    {
                        Endpoint::Fixture(stancebench_core::modelio::prediction_path(
                            &dir,
                            &system.name,
                            seed,
                            dataset,
                            eval_set,
                        ))
                    } else {
                        bail!("system {}: no endpoint or fixture directory", system.name);
                    };
                    let set = request_predictions(&records, eval_set, &endpoint, &system.name, seed, &scheme, &options)
                        .with_context(|| format!("{} seed {seed} {dataset}/{}", system.name, eval_set.as_str()))?;
                    let path = write_prediction_set(&out, &set)?;
                    log::info!("{} labels -> {}", set.labels.len(), path.display());
                }
            }
        }
    }
    Ok(())
}

fn discover_systems(dir: &Path) -> Result<Vec<String>> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| !n.contains('@'))
        .collect();
    names.sort();
    Ok(names)
}

fn evaluate(ctx: &Ctx, args: crate::EvaluateArgs) -> Result<()> {
    let data = ctx.data_dir(&args.data);
    let preds = args.fixtures.clone().unwrap_or_else(|| ctx.out().join("predictions"));
    let seeds = if args.seeds.is_empty() {
        ctx.config.seeds.clone()
    } else {
        args.seeds.clone()
    };
    let systems: Vec<String> = if ctx.config.systems.is_empty() {
        discover_systems(&preds)?
    } else {
        ctx.config.systems.iter().map(|s| s.name.clone()).collect()
    };
    if systems.is_empty() {
        bail!("no systems found in {}", preds.display());
    }
    let datasets = ctx.datasets_with(&data, |d| split_file_name(d, Split::Test))?;

    let mut per_dataset = Vec::new();
    let mut used_attacks = std::collections::BTreeSet::new();
    for system in &systems {
        for &dataset in &datasets {
            let scheme = builtin_scheme(dataset);
            for (eval_set, records) in eval_sets_for(ctx, &data, dataset)? {
                let mut runs = Vec::new();
                for &seed in &seeds {
                    let set = read_prediction_set(&preds, system, seed, eval_set, &records, &scheme)
                        .with_context(|| format!("{system} seed {seed} {dataset}/{}", eval_set.as_str()))?;
                    runs.push(score_run(&records, &set, &scheme)?);
                }
                if let Some(a) = eval_set.attack() {
                    used_attacks.insert(a);
                }
                per_dataset.push(aggregate_runs(system, dataset, eval_set, &runs)?);
            }
        }
    }

    let cpath = args
        .correctness
        .clone()
        .unwrap_or_else(|| ctx.out().join("correctness.json"));
    let correctness: BTreeMap<AttackKind, f64> = if used_attacks.is_empty() {
        BTreeMap::new()
    } else {
        read_estimates(&cpath)
            .with_context(|| format!("reading {}; run `correctness` first", cpath.display()))?
            .into_iter()
            .filter(|(a, _)| used_attacks.contains(a))
            .map(|(a, e)| (a, e.c))
            .collect()
    };
    let matrix = build_matrix(per_dataset, &correctness)?;
    let path = ctx.out().join("scores.json");
    write_json(&path, &matrix)?;
    log::info!("wrote {}", path.display());

    let ratios: Vec<f64> = args.ratios.iter().map(|r| ratio_value(*r)).collect::<Result<_>>()?;
    if !ratios.is_empty() {
        let mut scores = Vec::new();
        for system in &systems {
            for &ratio in &ratios {
                let name = if ratio == 1.0 {
                    system.clone()
                } else {
                    low_resource_system(system, ratio)
                };
                for &dataset in &datasets {
                    let scheme = builtin_scheme(dataset);
                    let records = read_split(&data, dataset, Split::Test)?;
                    let mut runs = Vec::new();
                    for &seed in &seeds {
                        let set = read_prediction_set(&preds, &name, seed, EvalSet::Test, &records, &scheme)
                            .with_context(|| format!("{name} seed {seed} {dataset}/test"))?;
                        runs.push(score_run(&records, &set, &scheme)?);
                    }
                    let agg = aggregate_runs(&name, dataset, EvalSet::Test, &runs)?;
                    scores.push(LowResourceScore {
                        system: system.clone(),
                        dataset,
                        ratio,
                        score: agg.score,
                    });
                }
            }
        }
        let path = ctx.out().join("low_resource.json");
        write_json(&path, &scores)?;
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn report(ctx: &Ctx, args: crate::ReportArgs) -> Result<()> {
    let style: Style = args.style.parse().map_err(anyhow::Error::msg)?;
    if let Some(path) = &args.low_resource {
        let scores: Vec<LowResourceScore> =
            serde_json::from_slice(&std::fs::read(path)?).with_context(|| format!("parsing {}", path.display()))?;
        print!("{}", render_low_resource(&scores, style)?);
        return Ok(());
    }
    let tables: TableSelection = args.table.parse().map_err(anyhow::Error::msg)?;
    let formula = match args.formula.as_str() {
        "parenthesized" => RelativeFormula::Parenthesized,
        "literal" => RelativeFormula::Literal,
        other => bail!("unknown formula `{other}`"),
    };
    let path = args.scores.clone().unwrap_or_else(|| ctx.out().join("scores.json"));
    let matrix: ScoreMatrix =
        serde_json::from_slice(&std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?)
            .with_context(|| format!("parsing {}", path.display()))?;
    print!("{}", render_report(&matrix, style, tables, formula)?);
    Ok(())
}
