use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use slacksvm::data::generate::{adversarial_instance, random_instance, PointDistribution};
use slacksvm::oracle::{materialize, EnumerationOracle, MultiLabelOracle, Oracle};
use slacksvm::search::{run_search, SearchConfig, SearchStrategy};

use crate::{output, parse_strategy, usage, CliError, SearchArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Ensemble {
    /// Points spread uniformly over the violating quadrant.
    Uniform,
    /// Points in a few tight clusters.
    Clusters,
    /// Uniform points plus one planted interior optimum.
    Planted,
    /// Three-label instances that defeat every multiplier-only search.
    Adversarial,
    /// Independent binary labels with noisy gold-leaning scores.
    Multilabel,
}

/// Run the violation searches over a seeded ensemble and report, per
/// search, how often it finds a violating label, how often it finds the
/// exact best label, and how many oracle calls it spends.
///
/// The CSV (`--csv`) has the columns
/// `strategy,searches,success_rate,exact_rate,mean_queries,mean_constrained`
/// plus `mean_seconds` with `--timing`. A violation counts as found when
/// its value exceeds `--epsilon-viol`.
#[derive(Args, Debug)]
#[command(verbatim_doc_comment)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = Ensemble::Uniform)]
    pub ensemble: Ensemble,
    #[arg(long, default_value_t = 200)]
    pub instances: usize,
    /// Labels per instance; the number of binary outputs for `multilabel`.
    #[arg(long, default_value_t = 100)]
    pub labels: usize,
    /// Score noise of `multilabel` instances.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Distance of the outer labels from the axes for `adversarial`.
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    /// Comma-separated searches to compare.
    #[arg(long, value_delimiter = ',', default_value = "angular,bisecting,sarawagi,binary", value_parser = parse_strategy)]
    pub strategies: Vec<SearchStrategy>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV output path; `-` writes it to stdout in place of the table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Measure wall-clock time per search.
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Debug, Default, Clone)]
struct Tally {
    searches: usize,
    success: usize,
    exact: usize,
    queries: usize,
    constrained: usize,
    seconds: f64,
}

/// Scores lean toward the gold bits by 0.3 on each output.
fn multilabel_instance(rng: &mut ChaCha8Rng, d: usize, sigma: f64) -> MultiLabelOracle {
    let noise = Normal::new(0.0, sigma).expect("validated sigma");
    let gold: u64 = rng.gen::<u64>() & (u64::MAX >> (64 - d));
    let scores = (0..d)
        .map(|j| noise.sample(rng) + if gold >> j & 1 == 1 { 0.3 } else { -0.3 })
        .collect();
    MultiLabelOracle::new(scores, gold, 1.0 / d as f64)
}

fn best_phi<L: Clone + PartialEq>(o: &EnumerationOracle<L>) -> f64 {
    o.points().iter().map(|p| p.phi()).fold(0.0, f64::max)
}

fn measure<O: Oracle>(
    o: &O,
    star: f64,
    a: &BenchArgs,
    cfg: &SearchConfig,
    tallies: &mut [Tally],
) -> Result<(), CliError> {
    for (s, t) in a.strategies.iter().zip(tallies.iter_mut()) {
        let start = Instant::now();
        let out = run_search(o, *s, cfg, 0.0)?;
        if a.timing {
            t.seconds += start.elapsed().as_secs_f64();
        }
        t.searches += 1;
        t.success += usize::from(out.best_phi > cfg.epsilon_viol);
        t.exact += usize::from(out.best_phi >= star * (1.0 - 1e-9));
        t.queries += out.queries;
        t.constrained += out.constrained_queries;
    }
    Ok(())
}

fn validate(a: &BenchArgs) -> Result<SearchConfig, CliError> {
    if a.instances == 0 {
        return Err(usage("--instances must be at least 1"));
    }
    if a.strategies.is_empty() {
        return Err(usage("--strategies must name at least one search"));
    }
    match a.ensemble {
        Ensemble::Multilabel if !(1..=20).contains(&a.labels) => {
            return Err(usage("--labels must be between 1 and 20 for multilabel (the optimum is found by enumeration)"))
        }
        Ensemble::Multilabel if !(a.sigma > 0.0 && a.sigma.is_finite()) => {
            return Err(usage(format!("--sigma must be positive, got {}", a.sigma)))
        }
        Ensemble::Adversarial if !(a.eps > 0.0 && a.eps < 0.25) => {
            return Err(usage(format!("--eps must lie in (0, 0.25), got {}", a.eps)))
        }
        Ensemble::Uniform | Ensemble::Clusters | Ensemble::Planted if a.labels == 0 => {
            return Err(usage("--labels must be at least 1"))
        }
        _ => {}
    }
    a.search.config()
}

pub fn run(a: &BenchArgs) -> Result<(), CliError> {
    let cfg = validate(a)?;
    let mut tallies = vec![Tally::default(); a.strategies.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    for i in 0..a.instances {
        match a.ensemble {
            Ensemble::Uniform | Ensemble::Clusters | Ensemble::Planted => {
                let dist = match a.ensemble {
                    Ensemble::Uniform => PointDistribution::Uniform,
                    Ensemble::Clusters => PointDistribution::Clusters,
                    _ => PointDistribution::Planted,
                };
                let o = random_instance(
                    a.labels,
                    dist,
                    a.seed.wrapping_mul(1_000_003).wrapping_add(i as u64),
                );
                measure(&o, best_phi(&o), a, &cfg, &mut tallies)?;
            }
            Ensemble::Adversarial => {
                // Scales stay above 4 eps so the instance is well formed.
                let lo = (4.0 * a.eps).max(0.5);
                let o = adversarial_instance(
                    a.eps,
                    rng.gen_range(lo..lo + 2.0),
                    rng.gen_range(lo..lo + 2.0),
                );
                measure(&o, best_phi(&o), a, &cfg, &mut tallies)?;
            }
            Ensemble::Multilabel => {
                let o = multilabel_instance(&mut rng, a.labels, a.sigma);
                let star = best_phi(&materialize(&o).expect("at most 2^20 labels"));
                measure(&o, star, a, &cfg, &mut tallies)?;
            }
        }
    }

    let csv_to_stdout = a.csv.as_ref().is_some_and(|p| p.as_os_str() == "-");
    if !csv_to_stdout {
        print_table(a, &tallies)?;
    }
    if let Some(path) = &a.csv {
        write_csv(path, a, &tallies)?;
    }
    Ok(())
}

fn print_table(a: &BenchArgs, tallies: &[Tally]) -> Result<(), CliError> {
    let mut out = output(None)?;
    writeln!(
        out,
        "{:<11} {:>8} {:>9} {:>9} {:>10} {:>12}{}",
        "strategy",
        "searches",
        "success",
        "exact",
        "queries",
        "constrained",
        if a.timing { "      seconds" } else { "" }
    )?;
    for (s, t) in a.strategies.iter().zip(tallies) {
        let n = t.searches as f64;
        write!(
            out,
            "{:<11} {:>8} {:>8.1}% {:>8.1}% {:>10.2} {:>12.2}",
            s.name(),
            t.searches,
            100.0 * t.success as f64 / n,
            100.0 * t.exact as f64 / n,
            t.queries as f64 / n,
            t.constrained as f64 / n
        )?;
        if a.timing {
            write!(out, " {:>12.3e}", t.seconds / n)?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn write_csv(path: &PathBuf, a: &BenchArgs, tallies: &[Tally]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(output(Some(path))?);
    let mut header = vec![
        "strategy",
        "searches",
        "success_rate",
        "exact_rate",
        "mean_queries",
        "mean_constrained",
    ];
    if a.timing {
        header.push("mean_seconds");
    }
    w.write_record(&header)?;
    for (s, t) in a.strategies.iter().zip(tallies) {
        let n = t.searches as f64;
        let mut row = vec![
            s.name().to_string(),
            t.searches.to_string(),
            (t.success as f64 / n).to_string(),
            (t.exact as f64 / n).to_string(),
            (t.queries as f64 / n).to_string(),
            (t.constrained as f64 / n).to_string(),
        ];
        if a.timing {
            row.push((t.seconds / n).to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
