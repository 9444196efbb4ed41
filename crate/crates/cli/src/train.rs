use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::json;

use slacksvm::data::generate::{
    chain_dataset, hierarchy_dataset, separable_multilabel, yeast_style,
};
use slacksvm::data::{load_multilabel, Format, MultiLabelDataset, Split};
use slacksvm::search::{SearchConfig, SearchStrategy};
use slacksvm::training::{
    chain_examples, cutting_plane_train, evaluate_chain, evaluate_hierarchy, evaluate_multilabel,
    multilabel_examples, sgd_train, ChainTask, Checkpoint, CuttingPlaneConfig, HierarchyTask,
    ModelState, MultiLabelTask, Objective, Schedule, SgdConfig, StructuredTask, TrainingExample,
};

use crate::{output, parse_strategy, resolve_format, usage, CliError, SearchArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Trainer {
    Sgd,
    CuttingPlane,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Synthetic {
    /// Linearly separable multi-label data, 10 features, 8 labels.
    Separable,
    /// Noisy multi-label data, 24 features, 14 labels, a quarter held out.
    Yeast,
    /// Tag sequences of length 6 over 3 states.
    Chain,
    /// Ancestor-closed label sets over a 7-node forest.
    Hierarchy,
}

/// Train a model and write `model.json`, `history.jsonl` and `metrics.json`
/// into the output directory.
///
/// Each history line is one JSON object. SGD writes
/// `{"epoch", "objective", "mean_term", "queries"}`; the cutting-plane
/// trainer writes `{"round", "objective", "dual", "search_objective",
/// "added", "working_set", "success_rate", "queries_per_search"}`. With
/// `--timing` both add `"seconds"`. Metrics are computed on the training
/// examples and, when the data has a test split, on the test examples.
#[derive(Args, Debug)]
#[command(verbatim_doc_comment)]
pub struct TrainArgs {
    /// Multi-label dataset (svmlight-multilabel or CSV).
    #[arg(
        long,
        conflicts_with = "synthetic",
        required_unless_present = "synthetic"
    )]
    pub data: Option<PathBuf>,
    /// Dataset format; inferred from the extension when omitted.
    #[arg(long, value_parser = Format::from_str)]
    pub format: Option<Format>,
    /// Generate the training data instead of reading it.
    #[arg(long, value_enum)]
    pub synthetic: Option<Synthetic>,
    /// Number of generated training examples.
    #[arg(long, default_value_t = 200)]
    pub examples: usize,
    #[arg(long, value_enum, default_value_t = Trainer::Sgd)]
    pub trainer: Trainer,
    /// `slack` or `margin` rescaling.
    #[arg(long, default_value = "slack", value_parser = Objective::from_str)]
    pub objective: Objective,
    /// Violation search: angular, bisecting, sarawagi, binary or exhaustive.
    #[arg(long, default_value = "angular", value_parser = parse_strategy)]
    pub strategy: SearchStrategy,
    /// Regularization constant C.
    #[arg(long = "c", default_value_t = 0.01)]
    pub c: f64,
    /// SGD epochs.
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    /// SGD step offset: step t is 1 / (C (t + t0)).
    #[arg(long, default_value_t = 10.0)]
    pub t0: f64,
    /// Cutting plane: add a constraint when it beats the slack by more than this.
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    #[arg(long, default_value_t = 100)]
    pub max_rounds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for per-example searches.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Record wall-clock seconds in the history (makes output run-dependent).
    #[arg(long)]
    pub timing: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub search: SearchArgs,
}

impl TrainArgs {
    fn validate(&self) -> Result<SearchConfig, CliError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(usage(format!("--c must be positive, got {}", self.c)));
        }
        if !(self.eps > 0.0) {
            return Err(usage(format!("--eps must be positive, got {}", self.eps)));
        }
        if !(self.t0 > 0.0) {
            return Err(usage(format!("--t0 must be positive, got {}", self.t0)));
        }
        if self.threads == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        if self.synthetic.is_some() && self.examples == 0 {
            return Err(usage("--examples must be at least 1"));
        }
        self.search.config()
    }
}

fn lines<R: Serialize>(records: &[R]) -> Result<Vec<String>, CliError> {
    Ok(records
        .iter()
        .map(serde_json::to_string)
        .collect::<Result<_, _>>()?)
}

/// Runs the selected trainer; returns the model and the history lines.
fn fit<T: StructuredTask>(
    task: &T,
    data: &[TrainingExample<T::Input, T::Label>],
    a: &TrainArgs,
    search: SearchConfig,
) -> Result<(ModelState, Vec<String>), CliError> {
    let start = ModelState::zeros(task.dim(), a.c);
    match a.trainer {
        Trainer::Sgd => {
            let cfg = SgdConfig {
                objective: a.objective,
                strategy: a.strategy,
                search,
                schedule: Schedule::InverseTime { t0: a.t0 },
                epochs: a.epochs,
                seed: a.seed,
                eval_strategy: None,
                threads: a.threads,
                record_time: a.timing,
            };
            let (model, history) = sgd_train(task, start, data, &cfg)?;
            Ok((model, lines(&history)?))
        }
        Trainer::CuttingPlane => {
            let cfg = CuttingPlaneConfig {
                objective: a.objective,
                strategy: a.strategy,
                search,
                eps: a.eps,
                max_rounds: a.max_rounds,
                threads: a.threads,
                record_time: a.timing,
                ..CuttingPlaneConfig::default()
            };
            let (model, _, history) = cutting_plane_train(task, start, data, &cfg)?;
            Ok((model, lines(&history)?))
        }
    }
}

struct Trained {
    checkpoint: Checkpoint,
    history: Vec<String>,
    metrics: serde_json::Value,
}

fn train_multilabel(
    data: &MultiLabelDataset,
    a: &TrainArgs,
    search: SearchConfig,
) -> Result<Trained, CliError> {
    let train = data.subset(Split::Train);
    let test = data.subset(Split::Test);
    if train.d_labels == 0 || train.d_labels > 64 {
        return Err(anyhow::anyhow!(
            "multi-label training needs 1 to 64 labels, the data has {}",
            train.d_labels
        )
        .into());
    }
    let task = MultiLabelTask::for_dataset(&train);
    let (model, history) = fit(&task, &multilabel_examples(&train), a, search)?;
    let metrics = json!({
        "train": { "examples": train.len(), "report": evaluate_multilabel(&task, &model, &train) },
        "test": (!test.is_empty()).then(|| json!({ "examples": test.len(), "report": evaluate_multilabel(&task, &model, &test) })),
    });
    Ok(Trained {
        checkpoint: Checkpoint::new(task.spec(), model),
        history,
        metrics,
    })
}

fn train_chain(a: &TrainArgs, search: SearchConfig) -> Result<Trained, CliError> {
    let train = chain_dataset(a.examples, 6, 3, 4, a.seed);
    let test = chain_dataset(a.examples.div_ceil(4), 6, 3, 4, a.seed.wrapping_add(1));
    let task = ChainTask::new(3, 4);
    let (model, history) = fit(&task, &chain_examples(&train), a, search)?;
    let metrics = json!({
        "train": { "examples": train.len(), "report": evaluate_chain(&task, &model, &train) },
        "test": { "examples": test.len(), "report": evaluate_chain(&task, &model, &test) },
    });
    Ok(Trained {
        checkpoint: Checkpoint::new(task.spec(), model),
        history,
        metrics,
    })
}

fn train_hierarchy(a: &TrainArgs, search: SearchConfig) -> Result<Trained, CliError> {
    let n_test = a.examples.div_ceil(4);
    let (parents, all) = hierarchy_dataset(a.examples + n_test, 7, 4, a.seed);
    let examples: Vec<_> = all
        .into_iter()
        .enumerate()
        .map(|(id, (x, y))| TrainingExample {
            id,
            x: x.into_iter().enumerate().filter(|p| p.1 != 0.0).collect(),
            y,
        })
        .collect();
    let (train, test) = examples.split_at(a.examples);
    let task = HierarchyTask::new(parents, 4);
    let (model, history) = fit(&task, train, a, search)?;
    let metrics = json!({
        "train": { "examples": train.len(), "report": evaluate_hierarchy(&task, &model, train) },
        "test": { "examples": test.len(), "report": evaluate_hierarchy(&task, &model, test) },
    });
    Ok(Trained {
        checkpoint: Checkpoint::new(task.spec(), model),
        history,
        metrics,
    })
}

pub fn run(a: &TrainArgs) -> Result<(), CliError> {
    let search = a.validate()?;
    let trained = match (&a.data, a.synthetic) {
        (Some(path), _) => {
            let data = load_multilabel(path, resolve_format(path, a.format))
                .map_err(|e| anyhow::anyhow!("cannot load {}: {e}", path.display()))?;
            train_multilabel(&data, a, search)?
        }
        (None, Some(Synthetic::Separable)) => train_multilabel(
            &separable_multilabel(a.examples, 10, 8, 0.1, a.seed),
            a,
            search,
        )?,
        (None, Some(Synthetic::Yeast)) => {
            let n_test = a.examples.div_ceil(4);
            train_multilabel(
                &yeast_style(a.examples + n_test, n_test, 24, 14, a.seed),
                a,
                search,
            )?
        }
        (None, Some(Synthetic::Chain)) => train_chain(a, search)?,
        (None, Some(Synthetic::Hierarchy)) => train_hierarchy(a, search)?,
        (None, None) => return Err(usage("one of --data or --synthetic is required")),
    };
    fs::create_dir_all(&a.out)
        .map_err(|e| anyhow::anyhow!("cannot create {}: {e}", a.out.display()))?;
    trained.checkpoint.save(&a.out.join("model.json"))?;
    let mut w = output(Some(&a.out.join("history.jsonl")))?;
    for line in &trained.history {
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    let mut w = output(Some(&a.out.join("metrics.json")))?;
    writeln!(w, "{}", serde_json::to_string_pretty(&trained.metrics)?)?;
    w.flush()?;
    log::info!(
        "wrote model, {} history records and metrics to {}",
        trained.history.len(),
        a.out.display()
    );
    Ok(())
}
