//! `pomrec` command line: train, eval, ablate, synth, export-embeddings.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pomrec_core::data::{LoadReport, TextFormat};
use pomrec_core::model::user_state;
use pomrec_core::synth::{generate, interest_recovery, MixtureKind, SynthSpec};
use pomrec_core::training::{resume_with, FitState};
use pomrec_core::{InteractionStore, ItemId, ModelConfig, Split, UserId, Variant};

use crate::checkpoint::{ModelCheckpoint, RunState};
use crate::config::RunConfig;
use crate::parallel::{par_evaluate, CliObserver};
use crate::report::{self, AblationRun};
use crate::{io, UsageError};

#[derive(Debug, Parser)]
#[command(name = "pomrec", version, about = "Prompt-augmented multi-interest sequential recommendation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model with early stopping on validation NDCG@10.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the validation or test split.
    Eval(EvalArgs),
    /// Train the four variants under shared seeds and tabulate test metrics.
    Ablate(AblateArgs),
    /// Generate a planted-interest dataset, optionally train and score recovery.
    Synth(SynthArgs),
    /// Write item embeddings and per-user interest statistics as CSV.
    ExportEmbeddings(ExportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory [default: $POMREC_OUT_DIR/<command> or runs/<command>].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write zero instead of wall time into training logs.
    #[arg(long)]
    pub no_clock: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    /// `user::item::rating::timestamp`
    Movielens,
    /// Comma separated.
    Csv,
    /// Tab separated.
    Tsv,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Interaction file with user, item, rating, timestamp columns.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// The first line is a header.
    #[arg(long)]
    pub header: bool,
    /// Minimum interactions per user (at least 3).
    #[arg(long)]
    pub user_min: Option<usize>,
    /// Minimum interactions per item; 0 disables item filtering.
    #[arg(long)]
    pub item_min: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Embedding size d.
    #[arg(long)]
    pub d: Option<usize>,
    /// Window length M.
    #[arg(long)]
    pub m: Option<usize>,
    /// Number of interests K.
    #[arg(long)]
    pub k: Option<usize>,
    /// Prompt rows per bank N_p.
    #[arg(long)]
    pub np: Option<usize>,
    /// Dispersion weight λ.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Hidden size d'.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// base, prompt, disp or full.
    #[arg(long)]
    pub variant: Option<Variant>,
}

#[derive(Debug, Clone, Args)]
pub struct OptimArgs {
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// Training seed: initialization, negatives and shuffles.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed of the evaluation candidate sample.
    #[arg(long)]
    pub eval_seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridParam {
    Np,
    K,
    Lambda,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// Continue from a saved `state.json`.
    #[arg(long, conflicts_with = "grid")]
    pub resume: Option<PathBuf>,
    /// Train once per value 1..=5 of this parameter and keep the best.
    #[arg(long, value_enum)]
    pub grid: Option<GridParam>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: Split,
    /// Seed of the candidate sample.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sampled negatives per user.
    #[arg(long)]
    pub negatives: Option<usize>,
    /// Rank against every non-interacted item.
    #[arg(long)]
    pub full_catalog: bool,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// Comma-separated subset of base,prompt,disp,full.
    #[arg(long, value_delimiter = ',', default_value = "base,prompt,disp,full")]
    pub variants: Vec<Variant>,
    /// Number of seeds, counting up from --seed.
    #[arg(long, default_value_t = 3)]
    pub seeds: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MixtureArg {
    Balanced,
    Onehot,
    Dirichlet,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub items: Option<usize>,
    /// Planted interests G.
    #[arg(long)]
    pub interests: Option<usize>,
    #[arg(long)]
    pub pool_size: Option<usize>,
    #[arg(long, value_enum)]
    pub mixture: Option<MixtureArg>,
    /// Dirichlet concentration.
    #[arg(long, default_value_t = 1.0)]
    pub concentration: f64,
    #[arg(long)]
    pub min_len: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Standard deviation of items around a user's centre, in ring steps.
    #[arg(long)]
    pub dispersion: Option<f64>,
    /// Probability of keeping the previous interest.
    #[arg(long)]
    pub stickiness: Option<f64>,
    /// Never redraw the current interest when switching.
    #[arg(long)]
    pub switching: bool,
    /// Seed of the generated world.
    #[arg(long)]
    pub world_seed: Option<u64>,
    /// Train on the generated world.
    #[arg(long)]
    pub train: bool,
    /// Print test metrics and interest purity (implies --train).
    #[arg(long)]
    pub report: bool,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Comma-separated original user ids.
    #[arg(long, value_delimiter = ',')]
    pub users: Vec<String>,
    /// Export interest statistics for every user.
    #[arg(long)]
    pub all_users: bool,
}

/// Parses arguments, runs the command and maps errors to exit codes:
/// 0 success, 1 runtime failure, 2 usage or configuration error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &anyhow::Error) -> i32 {
    use pomrec_core::Error as E;
    for cause in e.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
        if let Some(E::InvalidConfig(_) | E::PoolSizing(_) | E::InterestMismatch { .. } | E::UnknownUser(_)) =
            cause.downcast_ref::<E>()
        {
            return 2;
        }
    }
    1
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Synth(a) => cmd_synth(a),
        Command::ExportEmbeddings(a) => cmd_export(a),
    }
}

fn base_config(command: &str, common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(command, path)?,
        None => RunConfig::new(command),
    };
    if let Some(out) = &common.out {
        cfg.notes.push(format!("--out = {}", out.display()));
        cfg.out_dir = out.clone();
    }
    if common.no_clock {
        cfg.set("no-clock", |c| &mut c.clock, Some(false));
    }
    Ok(cfg)
}

fn apply_data(cfg: &mut RunConfig, a: &DataArgs) {
    if let Some(path) = &a.data {
        cfg.notes.push(format!("--data = {}", path.display()));
        cfg.data.path = Some(path.clone());
    }
    if let Some(format) = a.format {
        let f = match format {
            FormatArg::Movielens => TextFormat::movielens(),
            FormatArg::Csv => TextFormat::csv(false),
            FormatArg::Tsv => TextFormat {
                delimiter: "\t".into(),
                has_header: false,
            },
        };
        cfg.set("format", |c| &mut c.data.format.delimiter, Some(f.delimiter));
    }
    if a.header {
        cfg.set("header", |c| &mut c.data.format.has_header, Some(true));
    }
    cfg.set("user-min", |c| &mut c.data.filter.min_user_interactions, a.user_min);
    cfg.set("item-min", |c| &mut c.data.filter.min_item_interactions, a.item_min);
}

fn apply_model(cfg: &mut RunConfig, a: &ModelArgs) {
    cfg.set("d", |c| &mut c.model.embedding_dim, a.d);
    cfg.set("m", |c| &mut c.model.seq_len, a.m);
    cfg.set("k", |c| &mut c.model.num_interests, a.k);
    cfg.set("np", |c| &mut c.model.num_prompts, a.np);
    cfg.set("lambda", |c| &mut c.model.dispersion_weight, a.lambda);
    // d' follows d unless given
    let hidden = a.hidden.or(a.d.map(|d| 4 * d));
    cfg.set("hidden", |c| &mut c.model.hidden_dim, hidden);
    cfg.set("variant", |c| &mut c.model.variant, a.variant);
}

fn apply_optim(cfg: &mut RunConfig, a: &OptimArgs) {
    cfg.set("batch", |c| &mut c.train.batch_size, a.batch);
    cfg.set("epochs", |c| &mut c.train.max_epochs, a.epochs);
    cfg.set("lr", |c| &mut c.train.learning_rate, a.lr);
    cfg.set("patience", |c| &mut c.train.patience, a.patience);
    cfg.set("eval-every", |c| &mut c.train.eval_every, a.eval_every);
    cfg.set("seed", |c| &mut c.train.seed, a.seed);
    cfg.set("eval-seed", |c| &mut c.eval.seed, a.eval_seed);
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn load_data(cfg: &RunConfig, out: Option<&Path>) -> Result<InteractionStore> {
    let (store, load) = io::load_dataset(cfg.data_path()?, &cfg.data.format, &cfg.data.filter)?;
    report_load(&load);
    if let Some(dir) = out {
        fs::write(dir.join("load_report.json"), serde_json::to_string_pretty(&load)? + "\n")?;
        io::write_id_maps(dir, &store)?;
    }
    Ok(store)
}

fn report_load(load: &LoadReport) {
    eprintln!(
        "loaded {} records: kept {} users, dropped {} users / {} items / {} interactions, {} timestamp ties",
        load.records,
        load.users_seen - load.dropped_users,
        load.dropped_users,
        load.dropped_items,
        load.dropped_interactions,
        load.timestamp_ties
    );
}

/// Trains (or resumes) into `dir`: `state.json` after every epoch, then
/// `best.json`, `train_log.csv` and test metrics of the best checkpoint.
fn train_into(
    cfg: &RunConfig,
    store: &InteractionStore,
    dir: &Path,
    resume: Option<FitState>,
) -> Result<(FitState, pomrec_core::MetricsReport)> {
    prepare_out(dir)?;
    cfg.write(dir)?;
    let state_path = dir.join("state.json");
    let (model, train) = (&cfg.model, &cfg.train);
    let mut obs = CliObserver::new(cfg.clock).on_epoch(|fit: &FitState| {
        let last = fit.log.last().expect("log has the baseline row");
        let ndcg = last.ndcg.map_or_else(|| "-".to_string(), |n| format!("{:.4}", n[1]));
        eprintln!("epoch {:>3}  loss {:.5}  valid ndcg@10 {ndcg}", last.epoch, last.loss);
        RunState {
            config: model.clone(),
            train: train.clone(),
            fit: fit.clone(),
        }
        .save(&state_path)
        .map_err(|e| pomrec_core::Error::InvalidConfig(vec![format!("saving state: {e:#}")]))
    });
    let start = match resume {
        Some(state) => state,
        None => FitState::start(store, model, train, &mut obs)?,
    };
    let fit = resume_with(start, store, model, train, &mut obs)?;
    drop(obs);
    let run = RunState {
        config: model.clone(),
        train: train.clone(),
        fit,
    };
    let best = run.best_model();
    best.save(&dir.join("best.json"))?;
    fs::write(dir.join("train_log.csv"), report::log_csv(&run.fit.log))?;
    let test = par_evaluate(store, &best.params, model, &cfg.eval.options(Some(best.id())))?;
    fs::write(dir.join("test_metrics.json"), report::metrics_json(&test)? + "\n")?;
    fs::write(dir.join("test_metrics.csv"), report::metrics_csv(&test))?;
    Ok((run.fit, test))
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut cfg = base_config("train", &a.common)?;
    apply_data(&mut cfg, &a.data);
    apply_model(&mut cfg, &a.model);
    apply_optim(&mut cfg, &a.optim);
    cfg.eval.split = Split::Test;
    let resume = match &a.resume {
        Some(path) => {
            let saved = RunState::load(path)?;
            if saved.config != cfg.model.resolved().0 || saved.train.seed != cfg.train.seed {
                cfg.notes.push(format!("--resume {}: model config and seed taken from the state file", path.display()));
            }
            cfg.model = saved.config;
            cfg.train.seed = saved.train.seed;
            Some(saved.fit)
        }
        None => None,
    };
    cfg.resolve_variant();
    cfg.validate()?;
    cfg.data_path()?;
    prepare_out(&cfg.out_dir)?;
    let store = load_data(&cfg, Some(&cfg.out_dir))?;

    let Some(param) = a.grid else {
        let (fit, test) = train_into(&cfg, &store, &cfg.out_dir.clone(), resume)?;
        println!(
            "best epoch {} valid ndcg@10 {:.4}; test {}",
            fit.state.best_epoch,
            fit.state.best_metric,
            summary(&test)
        );
        return Ok(());
    };

    let mut table = String::from("value,best_epoch,valid_ndcg10,test_recall5,test_recall10,test_ndcg5,test_ndcg10\n");
    let mut best: Option<(usize, f64)> = None;
    for value in 1..=5usize {
        let mut run = cfg.clone();
        match param {
            GridParam::Np => run.set("grid np", |c| &mut c.model.num_prompts, Some(value)),
            GridParam::K => run.set("grid k", |c| &mut c.model.num_interests, Some(value)),
            GridParam::Lambda => run.set("grid lambda", |c| &mut c.model.dispersion_weight, Some(value as f64)),
        }
        run.resolve_variant();
        run.validate()?;
        let name = format!("{param:?}-{value}").to_lowercase();
        run.out_dir = cfg.out_dir.join(&name);
        let (fit, test) = train_into(&run, &store, &run.out_dir.clone(), None)?;
        let _ = writeln!(
            table,
            "{value},{},{},{},{},{},{}",
            fit.state.best_epoch, fit.state.best_metric, test.recall[0], test.recall[1], test.ndcg[0], test.ndcg[1]
        );
        println!("{name}: valid ndcg@10 {:.4}; test {}", fit.state.best_metric, summary(&test));
        if best.is_none_or(|(_, m)| fit.state.best_metric > m) {
            best = Some((value, fit.state.best_metric));
        }
    }
    fs::write(cfg.out_dir.join("grid.csv"), table)?;
    cfg.write(&cfg.out_dir)?;
    if let Some((value, metric)) = best {
        println!("selected {param:?} = {value} (valid ndcg@10 {metric:.4})");
    }
    Ok(())
}

fn summary(r: &pomrec_core::MetricsReport) -> String {
    format!(
        "recall@5 {:.4} recall@10 {:.4} recall@20 {:.4} ndcg@5 {:.4} ndcg@10 {:.4} ndcg@20 {:.4}",
        r.recall[0], r.recall[1], r.recall[2], r.ndcg[0], r.ndcg[1], r.ndcg[2]
    )
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let mut cfg = base_config("eval", &a.common)?;
    apply_data(&mut cfg, &a.data);
    cfg.set("split", |c| &mut c.eval.split, Some(a.split));
    cfg.set("seed", |c| &mut c.eval.seed, a.seed);
    cfg.set("negatives", |c| &mut c.eval.negatives, a.negatives);
    if a.full_catalog {
        cfg.set("full-catalog", |c| &mut c.eval.full_catalog, Some(true));
    }
    let ckpt = ModelCheckpoint::load(&a.checkpoint)?;
    cfg.model = ckpt.config.clone();
    cfg.train.seed = ckpt.seed;
    cfg.validate()?;
    cfg.data_path()?;
    prepare_out(&cfg.out_dir)?;
    cfg.write(&cfg.out_dir)?;
    let store = load_data(&cfg, None)?;
    if store.num_items() != ckpt.num_items {
        return Err(UsageError(format!(
            "checkpoint {} was trained on {} items but the dataset has {}",
            a.checkpoint.display(),
            ckpt.num_items,
            store.num_items()
        ))
        .into());
    }
    let report = par_evaluate(&store, &ckpt.params, &ckpt.config, &cfg.eval.options(Some(ckpt.id())))?;
    let json = report::metrics_json(&report)?;
    let csv = report::metrics_csv(&report);
    let stem = format!("metrics_{}", report.split);
    fs::write(cfg.out_dir.join(format!("{stem}.json")), json.clone() + "\n")?;
    fs::write(cfg.out_dir.join(format!("{stem}.csv")), &csv)?;
    println!("{json}");
    print!("{csv}");
    if let Err(problems) = report.check_invariants() {
        anyhow::bail!("metric invariants violated: {}", problems.join("; "));
    }
    Ok(())
}

fn cmd_ablate(a: AblateArgs) -> Result<()> {
    let mut cfg = base_config("ablate", &a.common)?;
    apply_data(&mut cfg, &a.data);
    apply_model(&mut cfg, &a.model);
    apply_optim(&mut cfg, &a.optim);
    if a.seeds == 0 {
        return Err(UsageError("--seeds must be at least 1".into()).into());
    }
    cfg.notes.push(format!(
        "variants {}; seeds {}..{}",
        a.variants.iter().map(|v| v.as_str()).collect::<Vec<_>>().join(","),
        cfg.train.seed,
        cfg.train.seed + a.seeds
    ));
    cfg.validate()?;
    cfg.data_path()?;
    prepare_out(&cfg.out_dir)?;
    cfg.write(&cfg.out_dir)?;
    let store = load_data(&cfg, Some(&cfg.out_dir))?;
    let runs = ablate(&cfg, &store, &a.variants, a.seeds)?;
    fs::write(cfg.out_dir.join("ablation.csv"), report::ablation_table_csv(&runs))?;
    fs::write(cfg.out_dir.join("ablation_runs.csv"), report::ablation_runs_csv(&runs))?;
    print!("{}", report::ablation_table_csv(&runs));
    Ok(())
}

/// Trains every variant under every seed, each in `<out>/<variant>-seed<s>`.
pub fn ablate(cfg: &RunConfig, store: &InteractionStore, variants: &[Variant], seeds: u64) -> Result<Vec<AblationRun>> {
    let mut runs = Vec::new();
    for &variant in variants {
        for seed in cfg.train.seed..cfg.train.seed + seeds {
            let mut run = cfg.clone();
            run.notes.clear();
            run.model.variant = variant;
            run.train.seed = seed;
            run.resolve_variant();
            run.out_dir = cfg.out_dir.join(format!("{variant}-seed{seed}"));
            let (fit, test) = train_into(&run, store, &run.out_dir.clone(), None)?;
            eprintln!("{variant} seed {seed}: {}", summary(&test));
            runs.push(AblationRun {
                variant,
                seed,
                best_epoch: fit.state.best_epoch,
                report: test,
            });
        }
    }
    Ok(runs)
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let mut cfg = base_config("synth", &a.common)?;
    let defaults = SynthSpec::default();
    let spec = SynthSpec {
        num_users: a.users.unwrap_or(defaults.num_users),
        num_items: a.items.unwrap_or(defaults.num_items),
        num_interests: a.interests.unwrap_or(defaults.num_interests),
        pool_size: a.pool_size.unwrap_or(defaults.pool_size),
        mixture: match a.mixture {
            None | Some(MixtureArg::Balanced) => MixtureKind::Balanced,
            Some(MixtureArg::Onehot) => MixtureKind::OneHot,
            Some(MixtureArg::Dirichlet) => MixtureKind::Dirichlet {
                concentration: a.concentration,
            },
        },
        min_len: a.min_len.unwrap_or(defaults.min_len),
        max_len: a.max_len.unwrap_or(defaults.max_len),
        dispersion: a.dispersion.unwrap_or(defaults.dispersion),
        stickiness: a.stickiness.unwrap_or(defaults.stickiness),
        switching: a.switching,
        seed: a.world_seed.unwrap_or(defaults.seed),
    };
    let train = a.train || a.report;
    // desk-scale defaults for the model; flags and the config file still win
    if a.common.config.is_none() {
        cfg.model = ModelConfig {
            num_interests: spec.num_interests.min(ModelConfig::MAX_INTERESTS),
            hidden_dim: 32,
            dispersion_weight: 1.0,
            ..ModelConfig::with_dims(16, 10)
        };
        cfg.train.batch_size = 64;
        cfg.train.learning_rate = 1e-2;
        cfg.train.max_epochs = 30;
        cfg.train.patience = 5;
    }
    apply_model(&mut cfg, &a.model);
    apply_optim(&mut cfg, &a.optim);
    cfg.resolve_variant();
    if train {
        cfg.validate()?;
        if cfg.model.num_interests != spec.num_interests {
            return Err(UsageError(format!(
                "purity needs K = G, but --k is {} and --interests is {}",
                cfg.model.num_interests, spec.num_interests
            ))
            .into());
        }
    }
    let world = generate(&spec)?;
    prepare_out(&cfg.out_dir)?;
    let dataset = cfg.out_dir.join("dataset.dat");
    fs::write(&dataset, io::dataset_text(&world.store))?;
    fs::write(cfg.out_dir.join("ground_truth.json"), io::ground_truth_json(&world)? + "\n")?;
    cfg.data.path = Some(dataset.clone());
    cfg.write(&cfg.out_dir)?;
    println!(
        "wrote {} users, {} interactions to {}",
        world.store.num_users(),
        world.store.num_interactions(),
        dataset.display()
    );
    if !train {
        return Ok(());
    }
    let (fit, test) = train_into(&cfg, &world.store, &cfg.out_dir.clone(), None)?;
    let recovery = interest_recovery(&fit.best_params, &cfg.model, &world.store, &world.truth)?;
    fs::write(cfg.out_dir.join("recovery.json"), serde_json::to_string_pretty(&recovery)? + "\n")?;
    println!("best epoch {}; test {}", fit.state.best_epoch, summary(&test));
    println!("purity {:.4} over {} window items", recovery.purity, recovery.items);
    Ok(())
}

fn cmd_export(a: ExportArgs) -> Result<()> {
    let mut cfg = base_config("export-embeddings", &a.common)?;
    apply_data(&mut cfg, &a.data);
    let ckpt = ModelCheckpoint::load(&a.checkpoint)?;
    cfg.model = ckpt.config.clone();
    cfg.data_path()?;
    let store = load_data(&cfg, None)?;
    if store.num_items() != ckpt.num_items {
        return Err(UsageError(format!(
            "checkpoint has {} items but the dataset has {}",
            ckpt.num_items,
            store.num_items()
        ))
        .into());
    }
    let users: Vec<UserId> = if a.all_users {
        store.users().collect()
    } else {
        a.users
            .iter()
            .map(|label| {
                store
                    .find_user(label)
                    .ok_or_else(|| pomrec_core::Error::UnknownUser(label.clone()))
            })
            .collect::<Result<_, _>>()?
    };
    prepare_out(&cfg.out_dir)?;
    cfg.notes.push(format!("exported {} users", users.len()));
    cfg.write(&cfg.out_dir)?;

    let d = ckpt.params.embedding_dim();
    let dims: String = (0..d).map(|j| format!(",e{j}")).collect();
    let mut items = format!("item{dims}\n");
    for i in 0..store.num_items() {
        let item = ItemId::new(i);
        let _ = writeln!(items, "{}{}", store.item_label(item), join_values(ckpt.params.item_embedding(item)?));
    }
    fs::write(cfg.out_dir.join("item_embeddings.csv"), items)?;

    let mut interests = format!("user,kind,interest{dims}\n");
    for &u in &users {
        let (trace, _) = user_state(store.sequence(u), &ckpt.params, &ckpt.config)?;
        for (kind, m) in [("centrality", &trace.centrality), ("dispersion", &trace.dispersion)] {
            for k in 0..m.cols() {
                let _ = writeln!(interests, "{},{kind},{k}{}", store.user_label(u), join_values(&m.column_values(k)));
            }
        }
    }
    fs::write(cfg.out_dir.join("user_interests.csv"), interests)?;
    println!(
        "wrote {} item rows and {} user rows to {}",
        store.num_items(),
        users.len() * 2 * ckpt.config.num_interests,
        cfg.out_dir.display()
    );
    Ok(())
}

fn join_values(values: &[f64]) -> String {
    values.iter().map(|v| format!(",{v}")).collect()
}
