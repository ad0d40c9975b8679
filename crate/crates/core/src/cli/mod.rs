//! The `permrank` command-line front end.
//!
//! Exit codes: 0 success, 1 input or validation error, 2 numerical
//! divergence, 3 I/O failure.

mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Command;

use crate::data::{
    generate_synthetic, parse_rankings, parse_ratings, ratings_to_rankings, read_model, write_model,
    write_rankings, IdMap, SynthSpec,
};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::factored_pl::{train_fpl, DampingSchedule, FplModel};
use crate::latent_pl::{em_train, EmConfig};
use crate::loglinear::{
    build_pairwise_params, cd_train, pl_train, metropolis_step, CdConfig, ChainState, EnergyModel, PositionalModel,
    ProposalMix, Structure,
};
use crate::model::{Model, ModelKind};
use crate::optim::{Schedule, Trained};
use crate::pairwise::{train_pairwise, LossKind, RegWeights};
use crate::rng;
use crate::types::{Dataset, FactorPair, ItemId, RankedList, UserId};

use config::{Config, EVALUATE, PREDICT, SAMPLE, SYNTH, TRAIN};

fn command() -> Command {
    Command::new("permrank")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Train, apply, and evaluate permutation models of ranked lists")
        .subcommand_required(true)
        .subcommand(config::subcommand("train", "Fit a model and write it with its objective trace", TRAIN))
        .subcommand(config::subcommand("predict", "Rank candidate items for users", PREDICT))
        .subcommand(config::subcommand("evaluate", "Score held-out list tails", EVALUATE))
        .subcommand(config::subcommand("sample", "Metropolis-Hastings samples from a log-linear model", SAMPLE))
        .subcommand(config::subcommand("synth", "Generate a synthetic dataset and its true model", SYNTH))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Divergence { .. } => 2,
        Error::Io(_) => 3,
        _ => 1,
    }
}

/// Runs the command line and returns the process exit code. Standard output
/// carries results; the resolved configuration and diagnostics go to
/// standard error.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let result = (|| -> Result<String> {
        type Handler = fn(&Config) -> Result<String>;
        let (name, keys, handler): (&'static str, _, Handler) = match name {
            "train" => ("train", TRAIN, cmd_train),
            "predict" => ("predict", PREDICT, cmd_predict),
            "evaluate" => ("evaluate", EVALUATE, cmd_evaluate),
            "sample" => ("sample", SAMPLE, cmd_sample),
            "synth" => ("synth", SYNTH, cmd_synth),
            _ => unreachable!("unknown subcommand"),
        };
        let cfg = Config::resolve(name, keys, sub)?;
        eprint!("{}", cfg.echo());
        handler(&cfg)
    })();
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn with_suffix(path: &str, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{path}{suffix}"))
}

fn load_data(cfg: &Config) -> Result<(Dataset, IdMap)> {
    let text = read(Path::new(cfg.req("in")?))?;
    match cfg.req("input-format")? {
        "rankings" => parse_rankings(&text),
        "ratings" => ratings_to_rankings(&parse_ratings(&text)?),
        other => Err(Error::argument(format!("unknown input format '{other}'"))),
    }
}

fn reg(cfg: &Config) -> Result<RegWeights> {
    RegWeights::new(cfg.get("alpha")?, cfg.get("beta")?)
}

fn trace_text(trace: &[f64]) -> String {
    let mut out = String::from("epoch\tobjective\n");
    for (i, v) in trace.iter().enumerate() {
        let _ = writeln!(out, "{i}\t{v:.12e}");
    }
    out
}

fn loglin_trainer<M: EnergyModel + Clone>(init: M, data: &Dataset, cfg: &Config) -> Result<Trained<M>> {
    match cfg.req("trainer")? {
        "cd" => cd_train(
            init,
            data,
            &CdConfig {
                epochs: cfg.get("epochs")?,
                learning_rate: cfg.get("step")?,
                chain_len: cfg.auto("chain-len")?,
                reg: reg(cfg)?,
                seed: cfg.get("seed")?,
            },
        ),
        "pseudo" => {
            let structure = match cfg.get::<Structure>("structure")? {
                Structure::Sublist(_) => Structure::Sublist(cfg.get("delta")?),
                s => s,
            };
            pl_train(init, data, structure, reg(cfg)?, &schedule(cfg)?)
        }
        other => Err(Error::argument(format!("unknown trainer '{other}'"))),
    }
}

fn schedule(cfg: &Config) -> Result<Schedule> {
    Ok(Schedule {
        iterations: cfg.get("epochs")?,
        step: cfg.get("step")?,
        max_halvings: cfg.get("max-halvings")?,
    })
}

fn cmd_train(cfg: &Config) -> Result<String> {
    let kind: ModelKind = cfg.get("model")?;
    let (data, ids) = load_data(cfg)?;
    let split: f64 = cfg.get("split")?;
    let data = if split > 0.0 { data.split_tails(split)?.0 } else { data };
    let k: usize = cfg.get("k")?;
    let seed: u64 = cfg.get("seed")?;
    let (model, trace) = match kind {
        ModelKind::PairwiseBaseline => {
            let loss: LossKind = cfg.get("loss")?;
            let reg = reg(cfg)?;
            let t = train_pairwise(&data, k, loss, reg, &schedule(cfg)?, seed)?;
            (
                Model::PairwiseBaseline {
                    factors: t.model,
                    loss,
                    reg,
                },
                t.trace,
            )
        }
        ModelKind::FactoredPl => {
            let damping: DampingSchedule = cfg.get("damping")?;
            let t = train_fpl(&data, k, damping, reg(cfg)?, &schedule(cfg)?, seed)?;
            (Model::FactoredPl(t.model), t.trace)
        }
        ModelKind::LatentPl => {
            let em = EmConfig {
                iterations: cfg.get("epochs")?,
                inner_steps: cfg.get("inner-steps")?,
                step: cfg.get("step")?,
                max_halvings: cfg.get("max-halvings")?,
            };
            let t = em_train(&data, k, &em, seed)?;
            (Model::LatentPl(t.model), t.trace)
        }
        ModelKind::LoglinPositional => {
            let init = FactorPair::random(data.num_users(), data.num_items(), k, 0.01, &mut rng::substream(seed, 1))?;
            let t = loglin_trainer(PositionalModel::new(init), &data, cfg)?;
            (Model::LoglinPositional(t.model), t.trace)
        }
        ModelKind::LoglinPairwise => {
            let init = build_pairwise_params(&data, cfg.get("tau")?)?;
            let t = loglin_trainer(init, &data, cfg)?;
            (Model::LoglinPairwise(t.model), t.trace)
        }
    };
    let out = cfg.req("out")?;
    write(Path::new(out), &write_model(&model))?;
    write(&with_suffix(out, ".ids"), &ids.to_text())?;
    Ok(trace_text(&trace))
}

/// A model with the id map that names its users and items.
struct Loaded {
    model: Model,
    ids: IdMap,
}

fn load_model(cfg: &Config) -> Result<Loaded> {
    let path = cfg.req("model")?;
    let model = read_model(&read(Path::new(path))?)?;
    let ids_path = match cfg.req("ids")? {
        "auto" => Some(with_suffix(path, ".ids")).filter(|p| p.exists()),
        p => Some(PathBuf::from(p)),
    };
    let ids = match ids_path {
        Some(p) => IdMap::from_text(&read(&p)?)?,
        None => IdMap::identity(model.num_users().unwrap_or(0), model.num_items()),
    };
    if ids.num_items() != model.num_items() || model.num_users().is_some_and(|n| n != ids.num_users()) {
        return Err(Error::argument("id map does not match the model's dimensions"));
    }
    Ok(Loaded { model, ids })
}

impl Loaded {
    fn user(&self, token: &str) -> Result<UserId> {
        if let Some(u) = self.ids.user(token) {
            return Ok(u);
        }
        // models without user parameters accept any integer user
        match (self.model.num_users(), token.parse::<u32>()) {
            (None, Ok(u)) if u.to_string() == token => Ok(UserId(u)),
            _ => Err(Error::argument(format!("unknown user '{token}'"))),
        }
    }

    fn item(&self, token: &str) -> Result<ItemId> {
        self.ids
            .item(token)
            .ok_or_else(|| Error::argument(format!("unknown item '{token}'")))
    }

    fn items(&self, list: &str) -> Result<Vec<ItemId>> {
        list.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| self.item(t))
            .collect()
    }

    fn labels(&self, items: &[ItemId]) -> String {
        items.iter().map(|&y| self.ids.item_label(y)).collect::<Vec<_>>().join(",")
    }

    /// Re-indexes a dataset parsed with its own id map into this model's ids.
    fn translate(&self, data: &Dataset, data_ids: &IdMap) -> Result<Dataset> {
        let mut lists = Vec::with_capacity(data.lists().len());
        for l in data.lists() {
            let user = self.user(data_ids.user_label(l.user))?;
            let items = l
                .items
                .iter()
                .map(|&y| self.item(data_ids.item_label(y)))
                .collect::<Result<Vec<_>>>()?;
            lists.push(RankedList { user, items });
        }
        let num_users = match self.model.num_users() {
            Some(n) => n,
            None => lists.iter().map(|l| l.user.index() + 1).max().unwrap_or(0),
        };
        Dataset::new(num_users, self.model.num_items(), lists)
    }

    fn seen_lists(&self, cfg: &Config) -> Result<Option<Dataset>> {
        match cfg.str("in") {
            Some(path) => {
                let (data, data_ids) = parse_rankings(&read(Path::new(path))?)?;
                self.translate(&data, &data_ids).map(Some)
            }
            None => Ok(None),
        }
    }
}

fn cmd_predict(cfg: &Config) -> Result<String> {
    let loaded = load_model(cfg)?;
    let seen = loaded.seen_lists(cfg)?;
    let mut queries: Vec<(String, String)> = Vec::new();
    if let Some(path) = cfg.str("queries") {
        for (i, raw) in read(Path::new(path))?.lines().enumerate() {
            let line = raw.trim_end();
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (u, c) = line.split_once('\t').unwrap_or((line, ""));
            if u.trim().is_empty() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "missing user".into(),
                });
            }
            queries.push((u.trim().to_string(), c.to_string()));
        }
    }
    if let Some(u) = cfg.str("user") {
        queries.push((u.to_string(), cfg.str("candidates").unwrap_or("").to_string()));
    }
    if queries.is_empty() && cfg.str("queries").is_none() {
        return Err(Error::argument("predict: give --user or --queries"));
    }
    let mut out = String::new();
    for (token, cands) in queries {
        let user = loaded.user(&token)?;
        let candidates = loaded.items(&cands)?;
        let list = seen.as_ref().and_then(|d| d.list_for(user));
        let seen_items = list.map_or(&[][..], |l| l.items.as_slice());
        let ranked = loaded.model.predict(user, seen_items, &candidates)?;
        let _ = writeln!(out, "{token}\t{}", loaded.labels(&ranked));
    }
    Ok(out)
}

fn cmd_evaluate(cfg: &Config) -> Result<String> {
    let loaded = load_model(cfg)?;
    let (data, data_ids) = load_data(cfg)?;
    let data = loaded.translate(&data, &data_ids)?;
    let report = evaluate(&loaded.model, &data, cfg.get("split")?, cfg.get("ndcg-k")?)?;
    if report.skipped > 0 {
        eprintln!("warning: {} user(s) skipped: fewer than two held-out items", report.skipped);
    }
    match cfg.req("format")? {
        "text" => Ok(report.to_text()),
        "csv" => Ok(report.to_csv()),
        other => Err(Error::argument(format!("unknown report format '{other}'"))),
    }
}

fn cmd_sample(cfg: &Config) -> Result<String> {
    let loaded = load_model(cfg)?;
    let energy = loaded.model.as_energy().ok_or_else(|| {
        Error::argument(format!(
            "{} models are sampled stage-wise (see synth), not by MCMC",
            loaded.model.kind()
        ))
    })?;
    let token = cfg.req("user")?;
    let user = loaded.user(token)?;
    let start = match (cfg.str("items"), loaded.seen_lists(cfg)?) {
        (Some(items), _) => loaded.items(items)?,
        (None, Some(data)) => data
            .list_for(user)
            .map(|l| l.items.clone())
            .ok_or_else(|| Error::argument(format!("user '{token}' has no list in --in")))?,
        (None, None) => return Err(Error::argument("sample: give --items or --in")),
    };
    let proposal = match cfg.req("proposal")? {
        "mix" => ProposalMix {
            sublist_width: cfg.get("delta")?,
            ..ProposalMix::default()
        },
        "swap" => ProposalMix::swap_only(),
        other => return Err(Error::argument(format!("unknown proposal '{other}'"))),
    };
    let steps: usize = cfg.get("steps")?;
    let burn_in: usize = cfg.get("burn-in")?;
    let mut rng = rng::root(cfg.get("seed")?);
    let mut state = ChainState::new(energy, user, start)?;
    for _ in 0..burn_in {
        metropolis_step(energy, &mut state, &proposal, &mut rng);
    }
    let mut out = String::new();
    let _ = writeln!(out, "{}", loaded.labels(state.items()));
    let (before_acc, before_prop) = (state.accepted(), state.proposed());
    for _ in 0..steps {
        metropolis_step(energy, &mut state, &proposal, &mut rng);
        let _ = writeln!(out, "{}", loaded.labels(state.items()));
    }
    let proposed = state.proposed() - before_prop;
    let rate = if proposed == 0 {
        0.0
    } else {
        (state.accepted() - before_acc) as f64 / proposed as f64
    };
    let _ = writeln!(out, "# acceptance_rate = {rate:.6}");
    Ok(out)
}

fn cmd_synth(cfg: &Config) -> Result<String> {
    let spec = SynthSpec {
        num_users: cfg.get("users")?,
        num_items: cfg.get("items")?,
        rank: cfg.get("k")?,
        min_len: cfg.get("min-len")?,
        max_len: cfg.get("max-len")?,
        scale: cfg.get("scale")?,
        seed: cfg.get("seed")?,
    };
    let (data, truth) = generate_synthetic(&spec)?;
    let out = cfg.req("out")?;
    let truth_path = cfg
        .auto::<String>("truth")?
        .map_or_else(|| with_suffix(out, ".truth.model"), PathBuf::from);
    let model = Model::FactoredPl(FplModel {
        factors: truth,
        damping: DampingSchedule::None,
        reg: RegWeights::NONE,
    });
    write(Path::new(out), &write_rankings(&data))?;
    write(&truth_path, &write_model(&model))?;
    Ok(format!(
        "wrote {} lists over {} items to {out}; true model to {}\n",
        data.lists().len(),
        data.num_items(),
        truth_path.display()
    ))
}
