//! Subcommand bodies. Each one validates its inputs, computes every output in
//! memory and only then touches the output directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use gripdecode::actuation::{command_for, LookupTable};
use gripdecode::classify::ModelSpec;
use gripdecode::eval::{evaluate_grid, run_ablation, AugmentPlan, EvalConfig};
use gripdecode::features::CspWdConfig;
use gripdecode::layout::{resolve_combination, ElectrodeLayout, LayoutFile, CAP63, HEADSET16};
use gripdecode::preprocess::{self, AugmentConfig, FilterSpec, PreprocessConfig};
use gripdecode::stats::{bootstrap_compare, wilcoxon_signed_rank};
use gripdecode::synth::{generate, SynthSpec};
use gripdecode::{io, EpochSet, Label};
use serde::Serialize;

use crate::config::{CapLayout, EvaluateSection, PreprocessSection, RunConfig};
use crate::report::{self, Outputs, ResultRow, StatsRow};
use crate::UsageError;

#[derive(Debug)]
pub enum Job {
    Synth { output: Option<PathBuf> },
    Preprocess { output: Option<PathBuf> },
    Evaluate,
    Ablate,
    Stats,
    ActuateCheck { labels: Option<Vec<String>> },
}

pub fn execute(cfg: &RunConfig, job: Job) -> Result<()> {
    let written = match job {
        Job::Synth { output } => synth(cfg, output)?,
        Job::Preprocess { output } => preprocess_cmd(cfg, output)?,
        Job::Evaluate => evaluate(cfg)?,
        Job::Ablate => ablate(cfg)?,
        Job::Stats => stats(cfg)?,
        Job::ActuateCheck { labels } => return actuate_check(cfg, labels),
    };
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from(crate::DEFAULT_OUT_DIR))
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{what} {} does not exist", path.display())))
    }
}

fn synth_spec(cfg: &RunConfig) -> Result<SynthSpec> {
    let s = &cfg.synth;
    let names = match s.layout {
        CapLayout::Cap63 => CAP63,
        CapLayout::Headset16 => HEADSET16,
    };
    let spec = SynthSpec::grasp_session(
        names.iter().map(|n| n.to_string()).collect(),
        s.sample_rate,
        s.trials_per_class,
        s.distinct,
        s.rest_gain,
        s.noise_sigma,
        s.seed,
    )
    .map_err(|e| usage(format!("synthetic session: {e}")))?;
    spec.validate().map_err(|e| usage(format!("synthetic session: {e}")))?;
    Ok(spec)
}

fn preprocess_config(p: &PreprocessSection, with_augment: bool) -> PreprocessConfig {
    PreprocessConfig {
        target_rate: p.target_rate,
        notch: p.notch.then(FilterSpec::notch_50hz),
        bandpass: p.bandpass.then(FilterSpec::mu_beta_band),
        augment: if with_augment {
            p.augment_target.map(|t| AugmentConfig::new(t, p.augment_seed))
        } else {
            None
        },
        normalize: p.normalize,
    }
}

/// Human-readable origin of the epochs, recorded in the summary.
fn source_name(cfg: &RunConfig) -> String {
    match &cfg.input.path {
        Some(p) => p.display().to_string(),
        None => format!("synthetic(seed={})", cfg.synth.seed),
    }
}

fn check_source(cfg: &RunConfig) -> Result<()> {
    match &cfg.input.path {
        Some(p) => require_file(p, "input file"),
        None => synth_spec(cfg).map(|_| ()),
    }
}

fn load_data(cfg: &RunConfig) -> Result<EpochSet> {
    let set = match &cfg.input.path {
        Some(p) => io::load_epochs(p).with_context(|| format!("loading {}", p.display()))?,
        None => generate(&synth_spec(cfg)?)?,
    };
    if !cfg.preprocess.enabled {
        return Ok(set);
    }
    Ok(preprocess::run(&set, &preprocess_config(&cfg.preprocess, false))?.set)
}

fn eval_config(e: &EvaluateSection) -> Result<EvalConfig> {
    if e.k < 2 {
        return Err(usage(format!("k = {} folds; at least 2 are needed", e.k)));
    }
    if !(e.alpha > 0.0 && e.alpha < 1.0) {
        return Err(usage(format!("alpha = {} outside (0, 1)", e.alpha)));
    }
    if e.augment_target == Some(0) {
        return Err(usage("augment_target must be positive"));
    }
    Ok(EvalConfig {
        cspwd: CspWdConfig {
            band: e.band,
            ..CspWdConfig::default()
        },
        augment: e.augment_target.map(|t| AugmentPlan {
            order: e.augment_order,
            config: AugmentConfig::new(t, e.augment_seed),
        }),
        k: e.k,
        fold_seed: e.fold_seed,
        alpha: e.alpha,
    })
}

fn model_specs(e: &EvaluateSection) -> Result<Vec<ModelSpec>> {
    Ok(e.model_kinds()?
        .into_iter()
        .map(|k| ModelSpec::new(k).with_seed(e.model_seed))
        .collect())
}

fn synth(cfg: &RunConfig, output: Option<PathBuf>) -> Result<Vec<PathBuf>> {
    let spec = synth_spec(cfg)?;
    let path = output.unwrap_or_else(|| out_dir(cfg).join("synth.eege"));
    let bytes = io::encode_epochs(&generate(&spec)?)?;
    let mut out = Outputs::default();
    out.add(path, bytes);
    out.commit()
}

fn preprocess_cmd(cfg: &RunConfig, output: Option<PathBuf>) -> Result<Vec<PathBuf>> {
    let input = cfg
        .input
        .path
        .as_ref()
        .ok_or_else(|| usage("preprocess needs --input or [input] path"))?;
    require_file(input, "input file")?;
    if cfg.preprocess.augment_target == Some(0) {
        return Err(usage("augment_target must be positive"));
    }
    let set = io::load_epochs(input).with_context(|| format!("loading {}", input.display()))?;
    let processed = preprocess::run(&set, &preprocess_config(&cfg.preprocess, true))?;
    let path = output.unwrap_or_else(|| out_dir(cfg).join("preprocessed.eege"));
    let mut out = Outputs::default();
    out.add(path, io::encode_epochs(&processed.set)?);
    out.commit()
}

#[derive(Serialize)]
struct Summary<'a> {
    source: String,
    n_trials: usize,
    n_channels: usize,
    sample_rate: f64,
    preprocess: Option<&'a PreprocessSection>,
    evaluate: &'a EvaluateSection,
    results: &'a [ResultRow],
}

fn evaluate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let e = &cfg.evaluate;
    let pairs = e.pair_ids()?;
    let specs = model_specs(e)?;
    let ecfg = eval_config(e)?;
    check_source(cfg)?;

    let set = load_data(cfg)?;
    let reports = evaluate_grid(&set, &pairs, &specs, &ecfg)?;
    let rows = report::result_rows(0, &reports);
    let summary = Summary {
        source: source_name(cfg),
        n_trials: set.n_trials(),
        n_channels: set.n_channels(),
        sample_rate: set.sample_rate(),
        preprocess: cfg.preprocess.enabled.then_some(&cfg.preprocess),
        evaluate: e,
        results: &rows,
    };
    let mut json = serde_json::to_vec_pretty(&summary)?;
    json.push(b'\n');

    let dir = out_dir(cfg);
    let mut out = Outputs::default();
    out.add(dir.join("results.csv"), report::to_csv(&rows)?);
    out.add(dir.join("folds.csv"), report::to_csv(&report::fold_rows(0, &reports))?);
    out.add(dir.join("summary.json"), json);
    out.commit()
}

#[derive(Serialize)]
struct AblationCsvRow {
    combination: u8,
    n_channels: usize,
    pair: String,
    model: String,
    accuracy: f64,
    precision: f64,
    f1: f64,
    class_dis: f64,
    drop: f64,
}

fn ablate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let e = &cfg.evaluate;
    let pairs = e.pair_ids()?;
    let specs = model_specs(e)?;
    let ecfg = eval_config(e)?;
    let file = match &cfg.ablate.layout {
        Some(p) => {
            require_file(p, "layout file")?;
            LayoutFile::load(p).map_err(|err| usage(format!("layout file {}: {err}", p.display())))?
        }
        None => LayoutFile::default_cap63(),
    };
    let mut ids = cfg.ablate.combinations.clone();
    ids.dedup();
    if !ids.contains(&0) {
        return Err(usage("combination 0 is required as the baseline"));
    }
    let combos = ids
        .iter()
        .map(|id| {
            file.get(*id)
                .cloned()
                .ok_or_else(|| usage(format!("combination {id} is not defined in the layout file")))
        })
        .collect::<Result<Vec<_>>>()?;
    check_source(cfg)?;

    let set = load_data(cfg)?;
    let layout = ElectrodeLayout::new(set.channels().to_vec(), None)?;
    for c in &combos {
        resolve_combination(&layout, c, cfg.ablate.handedness)
            .map_err(|err| usage(format!("combination {} cannot be resolved on this data: {err}", c.id)))?;
    }
    let table = run_ablation(&set, &combos, cfg.ablate.handedness, &pairs, &specs, &ecfg)?;
    let rows: Vec<AblationCsvRow> = table
        .rows
        .iter()
        .map(|r| AblationCsvRow {
            combination: r.combination,
            n_channels: r.n_channels,
            pair: r.pair.name(),
            model: r.model.name().to_string(),
            accuracy: r.accuracy,
            precision: r.precision,
            f1: r.f1,
            class_dis: r.class_dis,
            drop: r.drop,
        })
        .collect();

    let dir = out_dir(cfg);
    let mut out = Outputs::default();
    out.add(dir.join("ablation.csv"), report::to_csv(&rows)?);
    out.add(dir.join("ablation.svg"), report::ablation_svg(&table).into_bytes());
    out.commit()
}

type RowKey = (u8, String, String, String);

fn keyed(rows: Vec<ResultRow>) -> BTreeMap<RowKey, f64> {
    rows.into_iter()
        .map(|r| ((r.combination, r.pair, r.pipeline, r.model), r.accuracy))
        .collect()
}

fn stats(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let s = &cfg.stats;
    if s.inputs.len() < 2 {
        return Err(usage(format!("stats needs at least 2 result sets, got {}", s.inputs.len())));
    }
    if s.reps == 0 {
        return Err(usage("reps must be at least 1"));
    }
    if s.subset == 0 {
        return Err(usage("subset must be at least 1"));
    }
    for p in &s.inputs {
        require_file(p, "result set")?;
    }
    let sets = s
        .inputs
        .iter()
        .map(|p| report::read_results(p).map(keyed))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut comparison = 0u64;
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            let common: Vec<(&RowKey, f64, f64)> = sets[i]
                .iter()
                .filter_map(|(k, a)| sets[j].get(k).map(|b| (k, *a, *b)))
                .collect();
            if common.is_empty() {
                anyhow::bail!(
                    "{} and {} share no (combination, pair, pipeline, model) rows",
                    s.inputs[i].display(),
                    s.inputs[j].display()
                );
            }
            let mut models: Vec<&str> = common.iter().map(|(k, _, _)| k.3.as_str()).collect();
            models.sort_unstable();
            models.dedup();
            let scopes = std::iter::once(None).chain(models.into_iter().map(Some));
            for scope in scopes {
                let (a, b): (Vec<f64>, Vec<f64>) = common
                    .iter()
                    .filter(|(k, _, _)| scope.is_none_or(|m| k.3 == m))
                    .map(|(_, a, b)| (*a, *b))
                    .unzip();
                let p = wilcoxon_signed_rank(&a, &b)?;
                let boot = (s.subset <= a.len())
                    .then(|| bootstrap_compare(&a, &b, s.reps, s.subset, s.seed.wrapping_add(comparison)))
                    .transpose()?;
                comparison += 1;
                rows.push(StatsRow {
                    set_a: s.inputs[i].display().to_string(),
                    set_b: s.inputs[j].display().to_string(),
                    scope: scope.unwrap_or("all").to_string(),
                    n_paired: a.len(),
                    wilcoxon_p: p,
                    reps: s.reps,
                    subset: s.subset,
                    fraction_significant: boot.as_ref().map(|b| b.fraction_significant),
                    median_p: boot.as_ref().map(|b| b.median_p),
                });
            }
        }
    }
    let mut out = Outputs::default();
    out.add(out_dir(cfg).join("stats.csv"), report::to_csv(&rows)?);
    out.commit()
}

fn actuate_check(cfg: &RunConfig, labels: Option<Vec<String>>) -> Result<()> {
    let table = match &cfg.actuation.table {
        Some(p) => {
            require_file(p, "lookup table")?;
            LookupTable::load(p).map_err(|e| usage(format!("lookup table {}: {e}", p.display())))?
        }
        None => LookupTable::default(),
    };
    let table = table.validate().map_err(|e| usage(format!("lookup table: {e}")))?;
    let labels = match labels {
        Some(names) => names
            .iter()
            .map(|n| n.parse::<Label>().map_err(|e| usage(e.to_string())))
            .collect::<Result<Vec<_>>>()?,
        None => Label::ALL.to_vec(),
    };
    println!("label\tchannel\tmillivolts\tduration_ms\tframe");
    for label in labels {
        let cmd = command_for(label, &table);
        let frame: Vec<String> = cmd.encode()?.iter().map(|b| format!("{b:02x}")).collect();
        println!(
            "{label}\t{:?}\t{}\t{}\t{}",
            cmd.channel,
            cmd.millivolts,
            cmd.duration_ms,
            frame.join(" ")
        );
    }
    Ok(())
}
