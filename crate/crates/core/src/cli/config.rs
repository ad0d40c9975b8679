//! Resolved run configuration: built-in defaults, then an optional
//! `key = value` file, then command-line flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use clap::{Arg, ArgMatches, Command};

use crate::error::{Error, Result};

/// One configurable key. `default: None` marks a key with no default; it is
/// either required or simply unset.
#[derive(Debug)]
pub(crate) struct Key {
    pub name: &'static str,
    pub default: Option<&'static str>,
    pub required: bool,
    pub help: &'static str,
}

const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key {
        name,
        default: Some(default),
        required: false,
        help,
    }
}

const fn required(name: &'static str, help: &'static str) -> Key {
    Key {
        name,
        default: None,
        required: true,
        help,
    }
}

const fn optional(name: &'static str, help: &'static str) -> Key {
    Key {
        name,
        default: None,
        required: false,
        help,
    }
}

pub(crate) const TRAIN: &[Key] = &[
    required("model", "model kind: pairwise-baseline | factored-pl | latent-pl | loglin-positional | loglin-pairwise"),
    required("in", "training data file"),
    required("out", "model file to write; the id map goes to <out>.ids"),
    key("input-format", "rankings", "rankings | ratings"),
    key("k", "5", "latent dimension (communities for latent-pl)"),
    key("alpha", "0.01", "penalty on W (gamma for loglin-pairwise)"),
    key("beta", "0.01", "penalty on H (lambda for loglin-pairwise)"),
    key("tau", "5", "minimum co-occurrence count for a lambda pair"),
    key("damping", "none", "none | log"),
    key("loss", "logistic", "pairwise-baseline loss: squared | hinge | logistic"),
    key("epochs", "100", "training iterations (EM iterations, CD epochs)"),
    key("step", "0.05", "gradient step size (CD learning rate)"),
    key("max-halvings", "30", "step halvings tried before a phase stalls"),
    key("inner-steps", "3", "latent-pl score steps per M-step"),
    key("trainer", "cd", "log-linear trainer: cd | pseudo"),
    key("chain-len", "auto", "CD swap steps per chain; auto = list length"),
    key("structure", "relocation", "pseudo-likelihood structure: relocation | swapping | sublist"),
    key("delta", "3", "sublist width"),
    key("split", "0", "train on list heads after holding out this tail fraction"),
    key("seed", "0", "random seed"),
];

pub(crate) const PREDICT: &[Key] = &[
    required("model", "model file"),
    key("ids", "auto", "id map file; auto = <model>.ids if present"),
    optional("in", "rankings file giving each user's seen list"),
    optional("user", "single query user"),
    optional("candidates", "comma-separated candidates for --user"),
    optional("queries", "file of 'user<TAB>cand,cand' lines"),
    key("seed", "0", "random seed (prediction is deterministic)"),
];

pub(crate) const EVALUATE: &[Key] = &[
    required("model", "model file"),
    required("in", "data file"),
    key("input-format", "rankings", "rankings | ratings"),
    key("ids", "auto", "id map file; auto = <model>.ids if present"),
    key("split", "0.2", "held-out tail fraction, in (0, 1)"),
    key("ndcg-k", "10", "NDCG cutoff"),
    key("format", "text", "report format: text | csv"),
    key("seed", "0", "random seed (evaluation is deterministic)"),
];

pub(crate) const SAMPLE: &[Key] = &[
    required("model", "log-linear model file"),
    key("ids", "auto", "id map file; auto = <model>.ids if present"),
    required("user", "user whose items are reordered"),
    optional("items", "comma-separated starting order"),
    optional("in", "rankings file; the user's list is the starting order"),
    key("steps", "1000", "retained Metropolis steps"),
    key("burn-in", "0", "discarded steps before the first emitted state"),
    key("proposal", "mix", "mix (70% swap, 20% relocate, 10% sublist) | swap"),
    key("delta", "3", "sublist width for the mix"),
    key("seed", "0", "random seed"),
];

pub(crate) const SYNTH: &[Key] = &[
    required("out", "rankings file to write"),
    key("truth", "auto", "ground-truth model file; auto = <out>.truth.model"),
    key("users", "100", "number of users"),
    key("items", "30", "number of items"),
    key("k", "3", "latent dimension"),
    key("min-len", "10", "shortest list"),
    key("max-len", "10", "longest list"),
    key("scale", "1", "standard deviation of true scores"),
    key("seed", "0", "random seed"),
];

pub(crate) fn subcommand(name: &'static str, about: &'static str, keys: &'static [Key]) -> Command {
    let mut cmd = Command::new(name).about(about).arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .help("flat 'key = value' file; flags override it"),
    );
    for k in keys {
        let help = match k.default {
            Some(d) => format!("{} [default: {d}]", k.help),
            None if k.required => format!("{} [required]", k.help),
            None => k.help.to_string(),
        };
        cmd = cmd.arg(Arg::new(k.name).long(k.name).value_name("VALUE").help(help));
    }
    cmd
}

/// Fully resolved settings of one command, in table order.
#[derive(Debug, Clone)]
pub(crate) struct Config {
    command: &'static str,
    keys: &'static [Key],
    values: BTreeMap<&'static str, String>,
}

fn parse_file(text: &str, keys: &'static [Key]) -> Result<BTreeMap<&'static str, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: "expected 'key = value'".into(),
        })?;
        let k = k.trim();
        let spec = keys.iter().find(|s| s.name == k).ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("unknown key '{k}'"),
        })?;
        out.insert(spec.name, v.trim().to_string());
    }
    Ok(out)
}

impl Config {
    pub fn resolve(command: &'static str, keys: &'static [Key], m: &ArgMatches) -> Result<Self> {
        let mut values: BTreeMap<&'static str, String> =
            keys.iter().filter_map(|k| k.default.map(|d| (k.name, d.to_string()))).collect();
        if let Some(path) = m.get_one::<String>("config") {
            values.extend(parse_file(&std::fs::read_to_string(path)?, keys)?);
        }
        for k in keys {
            if let Some(v) = m.get_one::<String>(k.name) {
                values.insert(k.name, v.clone());
            }
        }
        for k in keys.iter().filter(|k| k.required) {
            if !values.contains_key(k.name) {
                return Err(Error::argument(format!("{command}: missing --{}", k.name)));
            }
        }
        Ok(Config { command, keys, values })
    }

    /// `# key = value` lines for every set key, in table order.
    pub fn echo(&self) -> String {
        let mut out = format!("# command = {}\n", self.command);
        for k in self.keys {
            if let Some(v) = self.values.get(k.name) {
                out.push_str(&format!("# {} = {v}\n", k.name));
            }
        }
        out
    }

    pub fn str(&self, name: &str) -> Option<&str> {
        self.values.get(name).map(String::as_str)
    }

    pub fn req(&self, name: &str) -> Result<&str> {
        self.str(name)
            .ok_or_else(|| Error::argument(format!("{}: missing --{name}", self.command)))
    }

    pub fn get<T>(&self, name: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        let raw = self.req(name)?;
        raw.parse()
            .map_err(|e| Error::argument(format!("--{name} '{raw}': {e}")))
    }

    /// `None` when the value is `auto`.
    pub fn auto<T>(&self, name: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if self.str(name) == Some("auto") {
            Ok(None)
        } else {
            self.get(name).map(Some)
        }
    }
}
