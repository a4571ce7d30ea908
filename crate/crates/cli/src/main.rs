use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use vlseg_core::data::synthetic::{blob_samples, quadrant_samples, synthetic_descriptor, write_dataset};
use vlseg_core::data::{builtin, load_triplets, open_dataset, register_dataset, PoolKind, SampleTriplet, Split, SplitSizes, TripletOptions};
use vlseg_core::eval::{
    cross_dataset_eval, evaluate, write_reports_json, write_samples_csv, write_summary_csv,
};
use vlseg_core::experiment::{
    execute_run, load_run_model, run_plan, write_report, ExperimentPlan, FreezeMode, RunConfig, RunOptions, RunSpec,
    TrainData, CONFIG_FILE, RUNS_DIR,
};
use vlseg_core::model::{BackboneProvider, ModelKind, Variant};
use vlseg_core::prompt::{load_attribute_sidecar, write_jsonl, AttributeSet, PromptRecord, PromptType};
use vlseg_core::robust::{default_specs, run_perturbation_suite, PerturbContext, SuiteConfig};
use vlseg_core::train::TrainFile;

#[derive(Parser, Debug)]
#[command(name = "vlseg", version, about = "Prompted medical image segmentation experiments")]
struct Cli {
    /// Directory holding one sub-directory per dataset.
    #[arg(long, global = true, env = "VLSEG_DATA_ROOT", default_value = "data")]
    data_root: PathBuf,

    /// TOML file whose `[<command>]` table supplies defaults for any flag
    /// not given on the command line.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Pool {
    All,
    EndoscopyOnly,
}

impl From<Pool> for PoolKind {
    fn from(p: Pool) -> Self {
        match p {
            Pool::All => PoolKind::All,
            Pool::EndoscopyOnly => PoolKind::EndoscopyOnly,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    NonRadiology,
    Radiology,
    Pooled,
    Full,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SynthKind {
    Blobs,
    Quadrants,
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// clipseg, cris, biomedclipseg, biomedclipseg_d or unet.
    #[arg(long)]
    model: ModelKind,
    /// Training dataset; conflicts with --pool.
    #[arg(long, conflicts_with = "pool")]
    dataset: Option<String>,
    #[arg(long, value_enum)]
    pool: Option<Pool>,
    #[arg(long, default_value = "P1")]
    ptype: PromptType,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    freeze_encoders: bool,
    /// Extra test sets evaluated after training.
    #[arg(long, value_delimiter = ',')]
    test_sets: Vec<String>,
}

impl RunArgs {
    fn spec(&self) -> Result<RunSpec> {
        let data = match (&self.dataset, self.pool) {
            (Some(d), None) => TrainData::Individual(d.clone()),
            (None, Some(p)) => TrainData::Pooled(p.into()),
            _ => bail!("give exactly one of --dataset or --pool"),
        };
        let mut spec = RunSpec::new(self.model, data, self.ptype);
        spec.seed = self.seed;
        spec.extra_test_sets = self.test_sets.clone();
        if self.freeze_encoders {
            spec.freeze = FreezeMode::FrozenEncoders;
        }
        Ok(spec)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write prompts of one dataset split as JSON lines.
    GeneratePrompts {
        #[arg(long)]
        dataset: String,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long)]
        ptype: PromptType,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dataset directory; `<data-root>/<dataset>` when absent.
        #[arg(long)]
        masks: Option<PathBuf>,
        /// Attribute sidecar replacing the dataset's own.
        #[arg(long)]
        sidecar: Option<PathBuf>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finetune one model and evaluate it on the test splits.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Results root; the run lands in `<out>/runs/<run-id>`.
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// TOML file with a `[train]` table.
        #[arg(long)]
        train_config: Option<PathBuf>,
        #[arg(long)]
        max_epochs: Option<usize>,
        /// Pretrained-weights manifest; toy backbones when absent.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Score a trained run on a dataset split.
    Evaluate {
        /// Run directory.
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        dataset: String,
        #[arg(long, default_value = "test")]
        split: Split,
        /// Prompt type; the run's own when absent.
        #[arg(long)]
        ptype: Option<PromptType>,
        #[arg(long, default_value_t = 16)]
        batch_size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a trained run under prompt perturbations.
    PerturbEval {
        #[arg(long)]
        run: PathBuf,
        /// Dataset; the run's first training dataset when absent.
        #[arg(long)]
        dataset: Option<String>,
        /// Suite JSON; every applicable perturbation when absent.
        #[arg(long)]
        suite: Option<PathBuf>,
        #[arg(long, default_value_t = 16)]
        batch_size: usize,
        /// Rows in the worst-drop gallery.
        #[arg(long, default_value_t = 6)]
        gallery: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate runs trained on several datasets against several test sets.
    CrossEval {
        /// Results root holding `runs/`.
        #[arg(long, default_value = "results")]
        root: PathBuf,
        #[arg(long)]
        model: ModelKind,
        #[arg(long, default_value = "P1")]
        ptype: PromptType,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "kvasir_seg,clinicdb,bkai")]
        train_sets: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "kvasir_seg,clinicdb,bkai,cvc300,colondb,etis")]
        test_sets: Vec<String>,
        #[arg(long, default_value_t = 16)]
        batch_size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build tables and charts from a results root.
    Report {
        #[arg(long, default_value = "results")]
        root: PathBuf,
    },
    /// Write an experiment plan, or execute one.
    Plan {
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// VLSM for the non-radiology, radiology and pooled presets.
        #[arg(long, default_value = "clipseg")]
        model: Variant,
        /// Plan JSON to write (with --preset) or to execute (with --execute).
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        execute: bool,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long)]
        max_epochs: Option<usize>,
    },
    /// Write a procedural dataset, for trying the pipeline without real data.
    Synth {
        #[arg(long, value_enum, default_value = "blobs")]
        kind: SynthKind,
        #[arg(long)]
        name: String,
        #[arg(long, default_value_t = 32)]
        side: usize,
        #[arg(long, value_delimiter = ',', default_value = "16,4,4")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Command name as written on the command line, e.g. `perturb-eval`.
fn command_name(args: &[OsString]) -> Option<String> {
    const NAMES: [&str; 8] = [
        "generate-prompts",
        "train",
        "evaluate",
        "perturb-eval",
        "cross-eval",
        "report",
        "plan",
        "synth",
    ];
    args.iter().skip(1).filter_map(|a| a.to_str()).find(|a| NAMES.contains(a)).map(str::to_string)
}

/// Append `--key value` for every config entry whose flag is absent.
fn merge_config(mut args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(pos) = args.iter().position(|a| a == "--config") else {
        return Ok(args);
    };
    let path = args.get(pos + 1).context("--config needs a file")?.clone();
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", Path::new(&path).display()))?;
    let table: toml::Table = toml::from_str(&text)?;
    let Some(cmd) = command_name(&args) else {
        return Ok(args);
    };
    let given: Vec<String> = args.iter().filter_map(|a| a.to_str()).map(str::to_string).collect();
    let mut extra = Vec::new();
    let mut push = |key: &str, value: &toml::Value| -> Result<()> {
        let flag = format!("--{}", key.replace('_', "-"));
        if given.iter().any(|g| g == &flag || g.starts_with(&format!("{flag}="))) {
            return Ok(());
        }
        match value {
            toml::Value::Boolean(true) => extra.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::String(s) => extra.extend([flag, s.clone()]),
            toml::Value::Integer(i) => extra.extend([flag, i.to_string()]),
            toml::Value::Float(f) => extra.extend([flag, f.to_string()]),
            toml::Value::Array(items) => {
                let parts: Vec<String> = items
                    .iter()
                    .map(|v| match v {
                        toml::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                extra.extend([flag, parts.join(",")]);
            }
            other => bail!("unsupported config value for `{key}`: {other}"),
        }
        Ok(())
    };
    if let Some(toml::Value::Table(t)) = table.get(&cmd) {
        for (k, v) in t {
            push(k, v)?;
        }
    }
    for (k, v) in &table {
        if !v.is_table() {
            push(k, v)?;
        }
    }
    args.extend(extra.into_iter().map(OsString::from));
    Ok(args)
}

fn triplet_options(ptype: PromptType, seed: u64) -> TripletOptions {
    let mut o = TripletOptions::new(ptype);
    o.seed = seed;
    o
}

fn load_split(data_root: &Path, dataset: &str, split: Split, options: &TripletOptions) -> Result<Vec<SampleTriplet>> {
    let handle = open_dataset(data_root, dataset).with_context(|| format!("opening dataset {dataset}"))?;
    Ok(load_triplets(&handle, split, options)?)
}

struct PromptSource<'a> {
    dataset: &'a str,
    masks: Option<&'a Path>,
    sidecar: Option<&'a Path>,
}

fn generate_prompts(data_root: &Path, source: PromptSource<'_>, split: Split, ptype: PromptType, seed: u64, out: Option<&Path>) -> Result<()> {
    let mut handle = match source.masks {
        Some(dir) => register_dataset(builtin(source.dataset)?, dir)?,
        None => open_dataset(data_root, source.dataset).with_context(|| format!("opening dataset {}", source.dataset))?,
    };
    if let Some(path) = source.sidecar {
        handle.set_sidecar(load_attribute_sidecar(path)?);
    }
    let triplets = load_triplets(&handle, split, &triplet_options(ptype, seed))?;
    let records: Vec<PromptRecord> = triplets
        .iter()
        .map(|t| PromptRecord {
            sample_id: t.sample_id.clone(),
            class: t.class_name.clone(),
            ptype,
            prompt: t.prompt.clone(),
            attributes: t.plan.as_ref().map(|p| p.attributes.clone()).unwrap_or_else(AttributeSet::new),
        })
        .collect();
    match out {
        Some(path) => write_jsonl(std::fs::File::create(path)?, &records)?,
        None => write_jsonl(std::io::stdout().lock(), &records)?,
    }
    Ok(())
}

fn evaluate_run(data_root: &Path, run: &Path, dataset: &str, split: Split, ptype: Option<PromptType>, batch: usize, out: &Path) -> Result<()> {
    let config = RunConfig::load(run.join(CONFIG_FILE))?;
    let model = load_run_model(run)?;
    let ptype = ptype.unwrap_or(config.run.ptype);
    let triplets = load_split(data_root, dataset, split, &triplet_options(ptype, config.run.seed))?;
    let report = evaluate(model.as_ref(), &triplets, batch)?.with_train_data(config.run.train_data.label());
    std::fs::create_dir_all(out)?;
    write_summary_csv(out.join("summary.csv"), std::slice::from_ref(&report))?;
    write_samples_csv(out.join(format!("{dataset}.csv")), &report)?;
    write_reports_json(out.join("reports.json"), std::slice::from_ref(&report))?;
    println!("{dataset} {ptype}: Dice {:.2} ± {:.2} (n = {})", report.dice_mean, report.dice_std, report.n);
    Ok(())
}

fn perturb_eval(data_root: &Path, run: &Path, dataset: Option<&str>, suite: Option<&Path>, batch: usize, gallery: usize, out: &Path) -> Result<()> {
    let config = RunConfig::load(run.join(CONFIG_FILE))?;
    let model = load_run_model(run)?;
    let members = config.run.train_data.members();
    let dataset = dataset.map(str::to_string).unwrap_or_else(|| members[0].clone());
    let triplets = load_split(data_root, &dataset, Split::Test, &triplet_options(config.run.ptype, config.run.seed))?;
    let ctx = PerturbContext::new(&triplets, config.run.seed);
    let specs = match suite {
        Some(path) => SuiteConfig::load(path)?.specs,
        None => default_specs(&triplets, &ctx.opposites),
    };
    let result = run_perturbation_suite(model.as_ref(), &triplets, &specs, &ctx, batch)?;
    std::fs::create_dir_all(out)?;
    let reports: Vec<_> = result
        .reports()
        .into_iter()
        .map(|r| r.with_train_data(config.run.train_data.label()))
        .collect();
    write_summary_csv(out.join("perturbations.csv"), &reports)?;
    write_reports_json(out.join("perturbations.json"), &reports)?;
    result.write_chart(out.join("relative_change.svg"))?;
    if let Some((worst, _)) = result
        .results
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.points.total_cmp(&b.1.points))
    {
        result.write_gallery(out.join("worst_drop.png"), &triplets, worst, gallery, 96)?;
    }
    for r in &result.results {
        let unit = if r.absolute { "points" } else { "%" };
        println!("{:<36} {:>8.2} {unit}", r.spec.label(), r.change);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cross_eval(
    data_root: &Path,
    root: &Path,
    model: ModelKind,
    ptype: PromptType,
    seed: u64,
    train_sets: &[String],
    test_sets: &[String],
    batch: usize,
    out: &Path,
) -> Result<()> {
    let options = triplet_options(ptype, seed);
    let tests: Vec<(String, Vec<SampleTriplet>)> = test_sets
        .iter()
        .map(|t| Ok((t.clone(), load_split(data_root, t, Split::Test, &options)?)))
        .collect::<Result<_>>()?;
    let matrix = cross_dataset_eval(train_sets, &tests, batch, |train| {
        let mut spec = RunSpec::new(model, TrainData::Individual(train.to_string()), ptype);
        spec.seed = seed;
        let dir = root.join(RUNS_DIR).join(spec.id());
        if !dir.join(CONFIG_FILE).exists() {
            return Ok(None);
        }
        load_run_model(&dir).map(Some)
    })?;
    std::fs::create_dir_all(out)?;
    matrix.write_csv(out.join("cross.csv"))?;
    matrix.write_json(out.join("cross.json"))?;
    println!("{} cells, {} in-distribution", matrix.cells.len(), matrix.in_distribution_count());
    Ok(())
}

fn synth(data_root: &Path, kind: SynthKind, name: &str, side: usize, sizes: &[usize], seed: u64) -> Result<()> {
    let [train, val, test] = sizes else {
        bail!("--sizes needs three counts: train,val,test");
    };
    let total = train + val + test;
    let samples = match kind {
        SynthKind::Blobs => {
            if side % 8 != 0 || side < 16 {
                bail!("blob images need a side that is a multiple of 8, at least 16");
            }
            blob_samples(total, side, seed)
        }
        SynthKind::Quadrants => {
            if side % 16 != 0 || side < 32 {
                bail!("quadrant images need a side that is a multiple of 16, at least 32");
            }
            quadrant_samples(total, side, seed).into_iter().map(|(s, _)| s).collect()
        }
    };
    let descriptor = synthetic_descriptor(name, SplitSizes::new(*train, *val, *test));
    let (a, rest) = samples.split_at(*train);
    let (b, c) = rest.split_at(*val);
    write_dataset(data_root.join(name), &descriptor, &[(Split::Train, a), (Split::Val, b), (Split::Test, c)])?;
    println!("wrote {total} samples to {}", data_root.join(name).display());
    Ok(())
}

fn plan(preset: Option<Preset>, model: Variant, file: &Path, execute: bool, out: &Path, data_root: &Path, max_epochs: Option<usize>) -> Result<()> {
    if let Some(preset) = preset {
        let plan = match preset {
            Preset::NonRadiology => ExperimentPlan::non_radiology(model)?,
            Preset::Radiology => ExperimentPlan::radiology(model)?,
            Preset::Pooled => {
                let mut p = ExperimentPlan::pooled(model, PoolKind::All)?;
                p.extend(ExperimentPlan::pooled(model, PoolKind::EndoscopyOnly)?);
                p
            }
            Preset::Full => ExperimentPlan::full_matrix()?,
        };
        plan.validate()?;
        plan.save(file)?;
        println!("{} runs written to {}", plan.len(), file.display());
    }
    if execute {
        let plan = ExperimentPlan::load(file)?;
        let mut options = RunOptions::new(data_root, out);
        options.max_epochs = max_epochs;
        let summary = run_plan(&plan, &options)?;
        println!(
            "{} trained, {} already complete, {} optimiser steps",
            summary.trained.len(),
            summary.skipped.len(),
            summary.steps
        );
    } else if preset.is_none() {
        bail!("nothing to do: give --preset, --execute or both");
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = merge_config(std::env::args_os().collect())?;
    let cli = Cli::parse_from(args);
    let data_root = cli.data_root.as_path();
    match cli.command {
        Command::GeneratePrompts {
            dataset,
            split,
            ptype,
            seed,
            masks,
            sidecar,
            out,
        } => {
            let source = PromptSource {
                dataset: &dataset,
                masks: masks.as_deref(),
                sidecar: sidecar.as_deref(),
            };
            generate_prompts(data_root, source, split, ptype, seed, out.as_deref())
        }
        Command::Train {
            run,
            out,
            train_config,
            max_epochs,
            weights,
        } => {
            let spec = run.spec()?;
            let mut options = RunOptions::new(data_root, out);
            options.max_epochs = max_epochs;
            if let Some(path) = train_config {
                options.train = Some(TrainFile::load(&path)?.train);
            }
            if let Some(manifest) = weights {
                options.provider = BackboneProvider::Pretrained { manifest };
            }
            let (manifest, _) = execute_run(&spec, &options)?;
            println!(
                "{}: {} epochs, best epoch {}, {} steps",
                manifest.run_id, manifest.epochs, manifest.best_epoch, manifest.steps
            );
            Ok(())
        }
        Command::Evaluate {
            run,
            dataset,
            split,
            ptype,
            batch_size,
            out,
        } => evaluate_run(data_root, &run, &dataset, split, ptype, batch_size, &out),
        Command::PerturbEval {
            run,
            dataset,
            suite,
            batch_size,
            gallery,
            out,
        } => perturb_eval(data_root, &run, dataset.as_deref(), suite.as_deref(), batch_size, gallery, &out),
        Command::CrossEval {
            root,
            model,
            ptype,
            seed,
            train_sets,
            test_sets,
            batch_size,
            out,
        } => cross_eval(data_root, &root, model, ptype, seed, &train_sets, &test_sets, batch_size, &out),
        Command::Report { root } => {
            let files = write_report(&root)?;
            println!("{}", std::fs::read_to_string(&files.markdown)?);
            Ok(())
        }
        Command::Plan {
            preset,
            model,
            file,
            execute,
            out,
            max_epochs,
        } => plan(preset, model, &file, execute, &out, data_root, max_epochs),
        Command::Synth {
            kind,
            name,
            side,
            sizes,
            seed,
        } => synth(data_root, kind, &name, side, &sizes, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(args: &[&str]) -> Vec<OsString> {
        args.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_fills_missing_flags_only() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("cli.toml");
        std::fs::write(
            &cfg,
            "data_root = \"/data\"\n[train]\nmodel = \"cris\"\nptype = \"P6\"\nfreeze_encoders = true\ntest_sets = [\"a\", \"b\"]\n",
        )
        .unwrap();
        let args = os(&["vlseg", "--config", cfg.to_str().unwrap(), "train", "--dataset", "busi", "--ptype", "P2"]);
        let merged = merge_config(args).unwrap();
        let cli = Cli::parse_from(merged);
        assert_eq!(cli.data_root, PathBuf::from("/data"));
        match cli.command {
            Command::Train { run, .. } => {
                assert_eq!(run.model, ModelKind::Vlsm(Variant::Cris));
                assert_eq!(run.ptype, PromptType::P2);
                assert!(run.freeze_encoders);
                assert_eq!(run.test_sets, vec!["a", "b"]);
                assert_eq!(run.spec().unwrap().id(), "cris-frozen-busi-p2-s0");
            }
            other => panic!("unexpected command {other:?}"),
        }
    }

    #[test]
    fn every_verb_parses() {
        for args in [
            vec!["vlseg", "generate-prompts", "--dataset", "busi", "--ptype", "P3"],
            vec!["vlseg", "train", "--model", "unet", "--pool", "endoscopy-only"],
            vec!["vlseg", "evaluate", "--run", "r", "--dataset", "busi", "--out", "o"],
            vec!["vlseg", "perturb-eval", "--run", "r", "--out", "o"],
            vec!["vlseg", "cross-eval", "--model", "clipseg", "--out", "o"],
            vec!["vlseg", "report"],
            vec!["vlseg", "plan", "--preset", "non-radiology", "--file", "p.json"],
            vec!["vlseg", "synth", "--name", "toy"],
        ] {
            Cli::try_parse_from(args.clone()).unwrap_or_else(|e| panic!("{args:?}: {e}"));
        }
    }

    #[test]
    fn run_needs_one_training_source() {
        let cli = Cli::parse_from(["vlseg", "train", "--model", "clipseg"]);
        match cli.command {
            Command::Train { run, .. } => assert!(run.spec().is_err()),
            _ => unreachable!(),
        }
    }
}
