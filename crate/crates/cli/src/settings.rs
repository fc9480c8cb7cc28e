//! Run settings: command-line flags layered over an optional `key = value`
//! file, layered over built-in defaults.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use trustwalk_core::{BiasMode, Error, EvalConfig, RatingScale, Result, RuleConfig, WalkConfig};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// `key = value` file; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub ratings: Option<PathBuf>,
    #[arg(long, global = true)]
    pub social: Option<PathBuf>,
    /// Treat social links as one-way.
    #[arg(long, global = true)]
    pub directed: bool,
    #[arg(long, global = true)]
    pub scale_min: Option<f64>,
    #[arg(long, global = true)]
    pub scale_max: Option<f64>,
    /// Rating granularity; 0 for continuous ratings.
    #[arg(long, global = true)]
    pub scale_step: Option<f64>,
    /// Defaults to scale-max minus scale-min.
    #[arg(long, global = true)]
    pub rmse_max: Option<f64>,
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    #[arg(long, global = true)]
    pub walks: Option<usize>,
    #[arg(long, global = true)]
    pub max_walks: Option<usize>,
    /// Early-stop tolerance on the running mean; 0 runs every walk.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Disable the probabilistic stop rule.
    #[arg(long, global = true)]
    pub no_stop: bool,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `symmetric-cci` or `directional`.
    #[arg(long, global = true)]
    pub bias_mode: Option<String>,
    /// Combine unscaled weight components.
    #[arg(long, global = true)]
    pub raw_weights: bool,
    #[arg(long, global = true)]
    pub min_support: Option<f64>,
    #[arg(long, global = true)]
    pub min_confidence: Option<f64>,
    #[arg(long, global = true)]
    pub top_k: Option<usize>,
    #[arg(long, global = true)]
    pub max_itemset_len: Option<usize>,
    /// Worker threads; output does not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

/// Everything a command needs, with defaults applied.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub ratings: Option<PathBuf>,
    pub social: Option<PathBuf>,
    pub directed: bool,
    pub scale: RatingScale,
    pub walk: WalkConfig,
    pub raw_weights: bool,
    pub rules: RuleConfig,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn eval_config(&self, fraction: f64, max_queries: Option<usize>, fallback_covers: bool) -> EvalConfig {
        EvalConfig { fraction, seed: self.seed, rmse_max: self.scale.rmse_max, max_queries, fallback_covers }
    }

    pub fn ratings_path(&self) -> Result<&Path> {
        self.ratings.as_deref().ok_or_else(|| Error::Config("--ratings is required".into()))
    }

    pub fn social_path(&self) -> Result<&Path> {
        self.social.as_deref().ok_or_else(|| Error::Config("--social is required".into()))
    }
}

/// Parses `key = value` lines. Keys may use `-` or `_`; `#` starts a comment.
pub fn parse_config_file(text: &str, path: &Path) -> Result<HashMap<String, String>> {
    let mut out = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!("{}:{}: expected `key = value`", path.display(), idx + 1)));
        };
        let key = k.trim().replace('-', "_");
        if key.is_empty() {
            return Err(Error::Config(format!("{}:{}: empty key", path.display(), idx + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

const KNOWN_KEYS: &[&str] = &[
    "ratings",
    "social",
    "directed",
    "scale_min",
    "scale_max",
    "scale_step",
    "rmse_max",
    "depth",
    "walks",
    "max_walks",
    "epsilon",
    "no_stop",
    "seed",
    "bias_mode",
    "raw_weights",
    "min_support",
    "min_confidence",
    "top_k",
    "max_itemset_len",
    "threads",
];

struct FileValues {
    map: HashMap<String, String>,
}

impl FileValues {
    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("config key {key}: cannot parse {v:?}"))),
        }
    }

    fn flag(&self, key: &str) -> Result<bool> {
        Ok(self.get::<bool>(key)?.unwrap_or(false))
    }
}

pub fn resolve(flags: &Flags) -> Result<RunConfig> {
    let file = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
            let map = parse_config_file(&text, path)?;
            if let Some(bad) = map.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
                return Err(Error::Config(format!("{}: unknown key {bad:?}", path.display())));
            }
            FileValues { map }
        }
        None => FileValues { map: HashMap::new() },
    };

    let min = flags.scale_min.or(file.get("scale_min")?).unwrap_or(1.0);
    let max = flags.scale_max.or(file.get("scale_max")?).unwrap_or(5.0);
    let step = flags.scale_step.or(file.get("scale_step")?).unwrap_or(1.0);
    let rmse_max = flags.rmse_max.or(file.get("rmse_max")?).unwrap_or(max - min);
    let scale = RatingScale::new(min, max, step, rmse_max)?;

    let seed = flags.seed.or(file.get("seed")?).unwrap_or(DEFAULT_SEED);
    let defaults = WalkConfig::default();
    let bias_mode = match flags.bias_mode.clone().or(file.get("bias_mode")?) {
        Some(s) => s.parse::<BiasMode>()?,
        None => defaults.bias_mode,
    };
    let num_walks = flags.walks.or(file.get("walks")?).unwrap_or(defaults.num_walks);
    let walk = WalkConfig {
        max_depth: flags.depth.or(file.get("depth")?).unwrap_or(defaults.max_depth),
        num_walks,
        convergence_epsilon: flags.epsilon.or(file.get("epsilon")?).unwrap_or(defaults.convergence_epsilon),
        max_walks: flags.max_walks.or(file.get("max_walks")?).unwrap_or(defaults.max_walks.max(num_walks)),
        seed,
        bias_mode,
        stopping: !(flags.no_stop || file.flag("no_stop")?),
    };
    walk.validate()?;

    let rule_defaults = RuleConfig::default();
    let rules = RuleConfig {
        min_support: flags.min_support.or(file.get("min_support")?).unwrap_or(rule_defaults.min_support),
        min_confidence: flags
            .min_confidence
            .or(file.get("min_confidence")?)
            .unwrap_or(rule_defaults.min_confidence),
        top_k: flags.top_k.or(file.get("top_k")?).unwrap_or(rule_defaults.top_k),
        max_itemset_len: flags
            .max_itemset_len
            .or(file.get("max_itemset_len")?)
            .unwrap_or(rule_defaults.max_itemset_len),
    };
    rules.validate()?;

    let threads = flags.threads.or(file.get("threads")?);
    if threads == Some(0) {
        return Err(Error::Config("--threads must be at least 1".into()));
    }

    let ratings = flags.ratings.clone().or(file.get("ratings")?);
    let social = flags.social.clone().or(file.get("social")?);
    for path in ratings.iter().chain(&social) {
        if !path.exists() {
            return Err(Error::Config(format!("{} does not exist", path.display())));
        }
    }

    Ok(RunConfig {
        ratings,
        social,
        directed: flags.directed || file.flag("directed")?,
        scale,
        walk,
        raw_weights: flags.raw_weights || file.flag("raw_weights")?,
        rules,
        seed,
        threads,
    })
}
