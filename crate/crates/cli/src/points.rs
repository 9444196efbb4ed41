use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;

use slacksvm::data::generate::adversarial_instance;
use slacksvm::data::{load_multilabel, Format};
use slacksvm::geometry::{LabelPoint, Slope};
use slacksvm::oracle::{Oracle, OracleQuery, StrictSide};
use slacksvm::search::{run_search, SearchStrategy};
use slacksvm::training::{Checkpoint, MultiLabelTask, StructuredTask, TaskSpec};

use crate::{output, resolve_format, usage, CliError, SearchArgs};

fn check_adversarial(eps: f64, h_hat: f64, g_hat: f64) -> Result<(), CliError> {
    if !(h_hat > 0.0 && g_hat > 0.0 && h_hat.is_finite() && g_hat.is_finite()) {
        return Err(usage(format!(
            "--h-hat and --g-hat must be positive, got {h_hat} and {g_hat}"
        )));
    }
    if !(eps > 0.0 && eps < 0.5 * h_hat.min(g_hat)) {
        return Err(usage(format!(
            "--eps must lie in (0, min(h-hat, g-hat) / 2), got {eps}"
        )));
    }
    Ok(())
}

/// Run every search on the three-label instance `(eps, G)`, `(H, eps)`,
/// `(H/2, G/2)` and show how far the multiplier-only searches fall short of
/// the middle label.
#[derive(Args, Debug)]
pub struct DemoArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    /// Largest margin violation `H`.
    #[arg(long, default_value_t = 1.0)]
    pub h_hat: f64,
    /// Largest loss `G`.
    #[arg(long, default_value_t = 1.0)]
    pub g_hat: f64,
    #[command(flatten)]
    pub search: SearchArgs,
}

pub fn demo(a: &DemoArgs) -> Result<(), CliError> {
    check_adversarial(a.eps, a.h_hat, a.g_hat)?;
    let cfg = a.search.config()?;
    let o = adversarial_instance(a.eps, a.h_hat, a.g_hat);
    let star = o.points().iter().map(LabelPoint::phi).fold(0.0, f64::max);
    let mut out = output(None)?;
    writeln!(out, "labels:")?;
    for (i, p) in o.points().iter().enumerate() {
        writeln!(
            out,
            "  {i}: h = {}, g = {}, phi = {:.6e}",
            p.h,
            p.g,
            p.phi()
        )?;
    }
    writeln!(out, "best phi: {star}\n")?;
    writeln!(
        out,
        "{:<11} {:>6} {:>13} {:>8} {:>12}",
        "strategy", "label", "phi", "queries", "phi*/phi"
    )?;
    let mut worst_baseline = 0.0f64;
    for s in [
        SearchStrategy::Sarawagi,
        SearchStrategy::BinaryUpper,
        SearchStrategy::Bisecting,
        SearchStrategy::Angular,
    ] {
        let r = run_search(&o, s, &cfg, 0.0)?;
        let label = r.best_label.map_or("-".to_string(), |l| l.to_string());
        writeln!(
            out,
            "{:<11} {:>6} {:>13.6e} {:>8} {:>12.1}",
            s.name(),
            label,
            r.best_phi,
            r.queries,
            star / r.best_phi
        )?;
        if s != SearchStrategy::Angular {
            worst_baseline = worst_baseline.max(r.best_phi);
        }
    }
    // A slope wedge around the middle label's ray isolates it directly.
    let mid = a.g_hat / a.h_hat;
    let q = OracleQuery::wedge(
        1.0 / mid,
        Slope::Finite(1.1 * mid),
        Slope::Finite(0.9 * mid),
        StrictSide::AlphaStrict,
    );
    if let Some(ans) = o.constrained_lambda_oracle(&q)? {
        writeln!(
            out,
            "\nwedge query on slopes [{:.3}, {:.3}): label {} with phi {}",
            0.9 * mid,
            1.1 * mid,
            ans.label,
            ans.point.phi()
        )?;
    }
    writeln!(
        out,
        "gap between the best label and the best multiplier-only answer: {:.1}x",
        star / worst_baseline
    )?;
    out.flush()?;
    Ok(())
}

/// Write the `(h, g)` image of every label of one example as CSV with the
/// columns `label,h,g,phi`.
///
/// Multi-label labels are written as bit strings, output 0 first. The
/// ground-truth label sits at `(1, 0)` and is left out unless
/// `--include-gold` is given, so a model with `d` outputs yields `2^d - 1`
/// rows.
#[derive(Args, Debug)]
#[command(verbatim_doc_comment)]
pub struct PointsArgs {
    /// Multi-label checkpoint written by `train`.
    #[arg(long, requires = "data", conflicts_with = "adversarial")]
    pub model: Option<PathBuf>,
    /// Dataset holding the example.
    #[arg(long, requires = "model")]
    pub data: Option<PathBuf>,
    #[arg(long, value_parser = Format::from_str)]
    pub format: Option<Format>,
    /// Position of the example in the file.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    /// Emit the three-label instance with this `eps` instead of a model's labels.
    #[arg(long, required_unless_present = "model")]
    pub adversarial: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub h_hat: f64,
    #[arg(long, default_value_t = 1.0)]
    pub g_hat: f64,
    #[arg(long)]
    pub include_gold: bool,
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn model_points(
    a: &PointsArgs,
    model: &PathBuf,
    data: &PathBuf,
) -> Result<Vec<(String, LabelPoint, bool)>, CliError> {
    let ck = Checkpoint::load(model)
        .map_err(|e| anyhow::anyhow!("cannot load {}: {e}", model.display()))?;
    let TaskSpec::MultiLabel {
        d_features,
        d_labels,
        loss_scale,
    } = ck.task
    else {
        return Err(anyhow::anyhow!("emit-points needs a multi-label checkpoint").into());
    };
    let data = load_multilabel(data, resolve_format(data, a.format))
        .map_err(|e| anyhow::anyhow!("cannot load {}: {e}", data.display()))?;
    if data.d_labels != d_labels || data.d_features > d_features {
        return Err(anyhow::anyhow!(
            "data has {} features and {} labels, the model expects {d_features} and {d_labels}",
            data.d_features,
            data.d_labels
        )
        .into());
    }
    let ex = data.examples.get(a.index).ok_or_else(|| {
        anyhow::anyhow!("example {} requested, the data has {}", a.index, data.len())
    })?;
    let task = MultiLabelTask {
        loss_scale,
        ..MultiLabelTask::new(d_features, d_labels)
    };
    let gold = slacksvm::training::mask_from_bits(&ex.labels);
    let backend = task.backend(&ck.model.w, &ex.features, &gold);
    let all = backend
        .enumerate()
        .ok_or_else(|| anyhow::anyhow!("{d_labels} labels are too many to enumerate"))?;
    Ok(all
        .into_iter()
        .map(|ans| {
            let bits: String = (0..d_labels)
                .map(|j| if ans.label >> j & 1 == 1 { '1' } else { '0' })
                .collect();
            (bits, ans.point, ans.label == gold)
        })
        .collect())
}

pub fn emit(a: &PointsArgs) -> Result<(), CliError> {
    let rows = match (&a.model, &a.data, a.adversarial) {
        (Some(model), Some(data), _) => model_points(a, model, data)?,
        (None, _, Some(eps)) => {
            check_adversarial(eps, a.h_hat, a.g_hat)?;
            let o = adversarial_instance(eps, a.h_hat, a.g_hat);
            o.points()
                .iter()
                .enumerate()
                .map(|(i, p)| (i.to_string(), *p, false))
                .collect()
        }
        _ => return Err(usage("give either --model with --data, or --adversarial")),
    };
    let mut w = csv::Writer::from_writer(output(a.out.as_ref())?);
    w.write_record(["label", "h", "g", "phi"])?;
    for (label, p, is_gold) in rows {
        if is_gold && !a.include_gold {
            continue;
        }
        w.write_record([label, p.h.to_string(), p.g.to_string(), p.phi().to_string()])?;
    }
    w.flush()?;
    Ok(())
}
