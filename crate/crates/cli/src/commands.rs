use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use log::info;
use trustwalk_core::evaluation::{self, BaselineEngine, NullEngine, PerfectOracle, RebuildEngine, WalkerEngine};
use trustwalk_core::synthetic::{self, SyntheticConfig};
use trustwalk_core::{
    centrality, io as dataio, predict_or_recommend, walker, Dataset, Error, ItemId, NetworkConfig, PredictionKind,
    Predictor, Result, SocialGraph, TrustNetwork, UserId,
};

use crate::settings::RunConfig;
use crate::EXIT_CANNOT_COVER;

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Directory receiving `network.txt` and `stats.txt`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub user: u32,
    #[arg(long)]
    pub item: u32,
    /// Print every walk as `<walk#> <node,node,...> <outcome>` to stderr.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineChoice {
    /// Walker over the prebuilt network, patched per query.
    Walker,
    /// Walker over a network rebuilt for every query.
    Rebuild,
    /// Pearson-weighted collaborative filtering.
    Baseline,
    /// Reads the held-out rating directly; for testing the harness.
    Oracle,
    /// Never predicts.
    Null,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Share of users whose ratings are held out.
    #[arg(long, default_value_t = 1.0)]
    pub fraction: f64,
    /// Report file; the report is also printed.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EngineChoice::Walker)]
    pub engine: EngineChoice,
    /// Also evaluate the collaborative-filtering baseline.
    #[arg(long)]
    pub baseline: bool,
    /// Neighbors used by the baseline.
    #[arg(long, default_value_t = 20)]
    pub baseline_k: usize,
    /// Cap on held-out ratings.
    #[arg(long)]
    pub max_queries: Option<usize>,
    /// Count fallback recommendations as covered.
    #[arg(long)]
    pub fallback_covers: bool,
}

#[derive(Debug, Args)]
pub struct CentralityArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub users: usize,
    /// Directory receiving `ratings.txt` and `social.txt`.
    #[arg(long)]
    pub out: PathBuf,
}

fn load_dataset(config: &RunConfig) -> Result<Dataset> {
    let path = config.ratings_path()?;
    let (ratings, report) = dataio::load_ratings(path, config.scale)?;
    info!("{}: {} ratings ({} duplicates)", path.display(), ratings.len(), report.duplicates);
    let social = load_social_or_empty(config)?;
    let name = path.file_stem().map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned());
    Ok(Dataset::new(name, ratings, social))
}

fn load_social_or_empty(config: &RunConfig) -> Result<SocialGraph> {
    match &config.social {
        Some(path) => {
            let (social, report) = dataio::load_social(path, config.directed)?;
            info!("{}: {} links, {} self-loops dropped", path.display(), report.records, report.self_loops);
            Ok(social)
        }
        None => Ok(SocialGraph::new(config.directed)),
    }
}

fn build_network(config: &RunConfig, dataset: &Dataset) -> Result<TrustNetwork> {
    let net = TrustNetwork::build(dataset, NetworkConfig { raw_weights: config.raw_weights })?;
    info!("trust network: {} nodes, {} edges", net.num_nodes(), net.num_edges());
    Ok(net)
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(io_err(path))
}

pub fn build(config: &RunConfig, args: &BuildArgs) -> Result<u8> {
    let dataset = load_dataset(config)?;
    let net = build_network(config, &dataset)?;
    create_dir(&args.out)?;
    write_file(&args.out.join("network.txt"), |w| net.write_export(w))?;
    let stats = network_stats(&dataset, &net);
    write_file(&args.out.join("stats.txt"), |w| w.write_all(stats.as_bytes()))?;
    print!("{stats}");
    Ok(0)
}

fn network_stats(dataset: &Dataset, net: &TrustNetwork) -> String {
    let hist: Vec<String> = net.weight_histogram().iter().map(usize::to_string).collect();
    let sparsity = dataset.sparsity().map_or_else(|_| "nan".into(), |s| format!("{s:.4}"));
    format!(
        "nodes {}\nedges {}\nratings {}\nitems {}\nsparsity {}\nweight_histogram {}\n",
        net.num_nodes(),
        net.num_edges(),
        dataset.ratings.len(),
        dataset.ratings.num_items(),
        sparsity,
        hist.join(" ")
    )
}

pub fn predict(config: &RunConfig, args: &PredictArgs) -> Result<u8> {
    let dataset = load_dataset(config)?;
    let (user, item) = (UserId(args.user), ItemId(args.item));
    if !dataset.users().contains(&user) {
        return Err(Error::UnknownUser(user));
    }
    if !dataset.ratings.has_item(item) {
        return Err(Error::UnknownItem(item));
    }
    let net = build_network(config, &dataset)?;
    if args.trace {
        let (_, traces) = walker::predict_traced(user, item, &net, &dataset.ratings, &config.walk)?;
        for (i, t) in traces.iter().enumerate() {
            eprintln!("{}", t.trace_line(i));
        }
    }
    let rec = predict_or_recommend(user, item, &net, &dataset.ratings, &config.walk, &config.rules)?;
    let p = &rec.prediction;
    let value = p.value.map_or_else(|| "-".into(), |v| format!("{v:.4}"));
    println!("{} {} {} {}", p.kind, value, p.walks_run, p.walks_rated);
    match p.kind {
        PredictionKind::CannotCover => {
            eprintln!("cannot cover");
            Ok(EXIT_CANNOT_COVER)
        }
        PredictionKind::Fallback => {
            for r in &rec.fallback {
                println!("{}", r.line());
            }
            Ok(0)
        }
        _ => Ok(0),
    }
}

pub fn evaluate(config: &RunConfig, args: &EvaluateArgs) -> Result<u8> {
    let dataset = load_dataset(config)?;
    let eval = config.eval_config(args.fraction, args.max_queries, args.fallback_covers);
    let network = match args.engine {
        EngineChoice::Walker => Some(build_network(config, &dataset)?),
        _ => None,
    };
    let engine: Box<dyn Predictor + '_> = match args.engine {
        EngineChoice::Walker => Box::new(WalkerEngine { network: network.as_ref().expect("built above"), config: config.walk }),
        EngineChoice::Rebuild => Box::new(RebuildEngine {
            dataset: &dataset,
            network_config: NetworkConfig { raw_weights: config.raw_weights },
            config: config.walk,
        }),
        EngineChoice::Baseline => Box::new(BaselineEngine { k: args.baseline_k }),
        EngineChoice::Oracle => Box::new(PerfectOracle { truth: &dataset.ratings }),
        EngineChoice::Null => Box::new(NullEngine),
    };

    let mut report = String::new();
    let run = evaluation::loo_evaluate(&dataset, &eval, engine.as_ref())?;
    append_report(&mut report, &run.report, run.leak_violations);
    if args.baseline && args.engine != EngineChoice::Baseline {
        let base = evaluation::loo_evaluate(&dataset, &eval, &BaselineEngine { k: args.baseline_k })?;
        report.push('\n');
        append_report(&mut report, &base.report, base.leak_violations);
    }
    if let Some(path) = &args.out {
        write_file(path, |w| w.write_all(report.as_bytes()))?;
    }
    print!("{report}");
    Ok(0)
}

fn append_report(out: &mut String, report: &trustwalk_core::EvalReport, leaks: usize) {
    out.push_str(&report.to_string());
    out.push_str(&format!("{:<12} {:>12}\n", "leaks", leaks));
    out.push_str(&report.machine_line());
    out.push('\n');
}

pub fn centrality(config: &RunConfig, args: &CentralityArgs) -> Result<u8> {
    config.social_path()?;
    let social = load_social_or_empty(config)?;
    let scores = centrality::all_scores(&social);
    let render = |w: &mut dyn Write| -> io::Result<()> {
        for s in &scores {
            writeln!(w, "{} {:.4} {}", s.node, s.impact, s.classic_hindex)?;
        }
        Ok(())
    };
    match &args.out {
        Some(path) => write_file(path, render)?,
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            render(&mut lock).map_err(io_err(Path::new("<stdout>")))?;
        }
    }
    Ok(0)
}

pub fn stats(config: &RunConfig, _args: &StatsArgs) -> Result<u8> {
    let dataset = load_dataset(config)?;
    let sparsity = dataset.sparsity().map_or_else(|_| "nan".into(), |s| format!("{s:.4}"));
    println!("users {}", dataset.users().len());
    println!("raters {}", dataset.ratings.num_users());
    println!("items {}", dataset.ratings.num_items());
    println!("ratings {}", dataset.ratings.len());
    println!("sparsity {sparsity}");
    println!("social_nodes {}", dataset.social.num_nodes());
    println!("social_arcs {}", dataset.social.num_arcs());
    println!("directed {}", dataset.social.is_directed());
    Ok(0)
}

pub fn generate(config: &RunConfig, args: &GenerateArgs) -> Result<u8> {
    if args.users == 0 {
        return Err(Error::Config("--users must be at least 1".into()));
    }
    let cfg = SyntheticConfig { users: args.users, seed: config.seed, ..SyntheticConfig::default() };
    let data = synthetic::generate(&cfg);
    create_dir(&args.out)?;
    dataio::save_ratings(&data.ratings, args.out.join("ratings.txt"))?;
    dataio::save_social(&data.social, args.out.join("social.txt"))?;
    println!("users {} ratings {} social_arcs {}", args.users, data.ratings.len(), data.social.num_arcs());
    Ok(0)
}
