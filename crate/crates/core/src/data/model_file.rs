//! Plain-text model files.
//!
//! ```text
//! PERMRANK-MODEL 1 <kind>
//! key=value ...            dimensions and settings
//! <parameter rows>
//! ```
//!
//! Parameter rows are whitespace-separated decimals with 17 significant
//! digits, so every value reads back bit-identical. Row layout by kind:
//!
//! - `pairwise-baseline`, `factored-pl`, `loglin-positional`: the N rows of
//!   W, then the K rows of H.
//! - `latent-pl`: the N rows of P(z | u), then the K rows of community scores.
//! - `loglin-pairwise`: one row of M gamma values, then one `item item value`
//!   row per lambda entry in ascending key order.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::Lines;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::factored_pl::{DampingSchedule, FplModel};
use crate::latent_pl::MixtureModel;
use crate::loglinear::{PairTable, PairwiseModel, PositionalModel};
use crate::model::{Model, ModelKind};
use crate::pairwise::{LossKind, RegWeights};
use crate::types::{FactorPair, ItemId};

pub const FORMAT_TAG: &str = "PERMRANK-MODEL";
pub const FORMAT_VERSION: u32 = 1;

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_rows(out: &mut String, a: ArrayView2<'_, f64>) {
    for row in a.rows() {
        let cells: Vec<String> = row.iter().map(|&x| num(x)).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
}

fn write_factors(out: &mut String, f: &FactorPair) {
    write_rows(out, f.w.view());
    write_rows(out, f.h.view());
}

fn dims(f: &FactorPair) -> String {
    format!("users={} items={} k={}", f.num_users(), f.num_items(), f.rank())
}

pub fn write_model(model: &Model) -> String {
    let mut out = format!("{FORMAT_TAG} {FORMAT_VERSION} {}\n", model.kind());
    match model {
        Model::PairwiseBaseline { factors, loss, reg } => {
            let _ = writeln!(
                out,
                "{} loss={loss} alpha={} beta={}",
                dims(factors),
                num(reg.alpha),
                num(reg.beta)
            );
            write_factors(&mut out, factors);
        }
        Model::FactoredPl(m) => {
            let _ = writeln!(
                out,
                "{} damping={} alpha={} beta={}",
                dims(&m.factors),
                m.damping,
                num(m.reg.alpha),
                num(m.reg.beta)
            );
            write_factors(&mut out, &m.factors);
        }
        Model::LatentPl(m) => {
            let _ = writeln!(
                out,
                "users={} items={} k={}",
                m.num_users(),
                m.num_items(),
                m.num_communities()
            );
            write_rows(&mut out, m.mixture.view());
            write_rows(&mut out, m.scores.view());
        }
        Model::LoglinPositional(m) => {
            let _ = writeln!(out, "{}", dims(&m.factors));
            write_factors(&mut out, &m.factors);
        }
        Model::LoglinPairwise(m) => {
            let _ = writeln!(out, "items={} pairs={} tau={}", m.gamma.len(), m.lambda.len(), m.tau);
            let cells: Vec<String> = m.gamma.iter().map(|&x| num(x)).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
            for (a, b, v) in m.lambda.entries() {
                let _ = writeln!(out, "{a} {b} {}", num(v));
            }
        }
    }
    out
}

struct Reader<'a> {
    lines: Lines<'a>,
    line: usize,
}

impl<'a> Reader<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str> {
        self.line += 1;
        self.lines
            .next()
            .ok_or_else(|| Error::format(format!("truncated: missing {what} at line {}", self.line)))
    }

    fn floats(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        let line = self.next(what)?;
        let vals = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::format(format!("line {}: unparsable {what}", self.line)))?;
        if vals.len() != count {
            return Err(Error::format(format!(
                "line {}: {what} has {} values, expected {count}",
                self.line,
                vals.len()
            )));
        }
        Ok(vals)
    }

    fn matrix(&mut self, rows: usize, cols: usize, what: &str) -> Result<Array2<f64>> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.floats(cols, what)?);
        }
        Ok(Array2::from_shape_vec((rows, cols), data).expect("shape"))
    }

    fn finish(mut self) -> Result<()> {
        for rest in self.lines.by_ref() {
            self.line += 1;
            if !rest.trim().is_empty() {
                return Err(Error::format(format!("line {}: unexpected trailing content", self.line)));
            }
        }
        Ok(())
    }
}

struct Settings(HashMap<String, String>);

impl Settings {
    fn parse(line: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for field in line.split_whitespace() {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| Error::format(format!("line 2: bad setting '{field}'")))?;
            map.insert(k.to_string(), v.to_string());
        }
        Ok(Settings(map))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .0
            .get(key)
            .ok_or_else(|| Error::format(format!("line 2: missing '{key}'")))?;
        raw.parse()
            .map_err(|_| Error::format(format!("line 2: bad value '{raw}' for '{key}'")))
    }

    fn reg(&self) -> Result<RegWeights> {
        RegWeights::new(self.get("alpha")?, self.get("beta")?).map_err(|e| Error::format(e.to_string()))
    }
}

fn read_factors(r: &mut Reader<'_>, s: &Settings) -> Result<FactorPair> {
    let (n, m, k): (usize, usize, usize) = (s.get("users")?, s.get("items")?, s.get("k")?);
    let w = r.matrix(n, k, "W row")?;
    let h = r.matrix(k, m, "H row")?;
    FactorPair::new(w, h).map_err(|e| Error::format(e.to_string()))
}

pub fn read_model(text: &str) -> Result<Model> {
    let mut r = Reader {
        lines: text.lines(),
        line: 0,
    };
    let header: Vec<&str> = r.next("header")?.split_whitespace().collect();
    if header.len() != 3 || header[0] != FORMAT_TAG {
        return Err(Error::format(format!("line 1: expected '{FORMAT_TAG} <version> <kind>'")));
    }
    if header[1] != FORMAT_VERSION.to_string() {
        return Err(Error::format(format!("unsupported version {}", header[1])));
    }
    let kind: ModelKind = header[2]
        .parse()
        .map_err(|_| Error::format(format!("unknown model kind '{}'", header[2])))?;
    let s = Settings::parse(r.next("settings")?)?;
    let model = match kind {
        ModelKind::PairwiseBaseline => {
            let loss: LossKind = s.get("loss")?;
            let reg = s.reg()?;
            Model::PairwiseBaseline {
                factors: read_factors(&mut r, &s)?,
                loss,
                reg,
            }
        }
        ModelKind::FactoredPl => {
            let damping: DampingSchedule = s.get("damping")?;
            let reg = s.reg()?;
            Model::FactoredPl(FplModel {
                factors: read_factors(&mut r, &s)?,
                damping,
                reg,
            })
        }
        ModelKind::LatentPl => {
            let (n, m, k): (usize, usize, usize) = (s.get("users")?, s.get("items")?, s.get("k")?);
            let mixture = r.matrix(n, k, "mixture row")?;
            let scores = r.matrix(k, m, "community score row")?;
            Model::LatentPl(MixtureModel::new(mixture, scores).map_err(|e| Error::format(e.to_string()))?)
        }
        ModelKind::LoglinPositional => Model::LoglinPositional(PositionalModel::new(read_factors(&mut r, &s)?)),
        ModelKind::LoglinPairwise => {
            let (m, pairs, tau): (usize, usize, usize) = (s.get("items")?, s.get("pairs")?, s.get("tau")?);
            let gamma = r.floats(m, "gamma row")?;
            let mut entries = Vec::with_capacity(pairs);
            for _ in 0..pairs {
                let line = r.next("lambda entry")?;
                let bad = || Error::format(format!("line {}: expected 'item item value'", r.line));
                let f: Vec<&str> = line.split_whitespace().collect();
                if f.len() != 3 {
                    return Err(bad());
                }
                let a: u32 = f[0].parse().map_err(|_| bad())?;
                let b: u32 = f[1].parse().map_err(|_| bad())?;
                let v: f64 = f[2].parse().map_err(|_| bad())?;
                if a as usize >= m || b as usize >= m || a == b || !v.is_finite() {
                    return Err(bad());
                }
                entries.push((ItemId(a), ItemId(b), v));
            }
            if gamma.iter().any(|g| !g.is_finite()) {
                return Err(Error::format("gamma values must be finite"));
            }
            Model::LoglinPairwise(PairwiseModel {
                gamma,
                lambda: PairTable::from_entries(entries).map_err(|e| Error::format(e.to_string()))?,
                tau,
            })
        }
    };
    r.finish()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn factor_round_trip_is_exact() {
        let w = array![[0.1, -1.0 / 3.0], [2.5e-300, 1e10], [-0.0, 7.0]];
        let h = array![[1.0, 2.0, 3.0, 4.0], [0.5, std::f64::consts::PI, -2.0, 1e-7]];
        let m = Model::LoglinPositional(PositionalModel::new(FactorPair::new(w, h).unwrap()));
        let back = read_model(&write_model(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn truncation_is_a_format_error() {
        let w = array![[0.1, 0.2], [0.3, 0.4]];
        let h = array![[1.0, 2.0], [3.0, 4.0]];
        let m = Model::LoglinPositional(PositionalModel::new(FactorPair::new(w, h).unwrap()));
        let text = write_model(&m);
        let cut: Vec<&str> = text.lines().collect();
        let short = cut[..cut.len() - 1].join("\n");
        assert!(matches!(read_model(&short), Err(Error::Format(_))));
    }

    #[test]
    fn version_and_kind_are_checked() {
        assert!(matches!(read_model("PERMRANK-MODEL 2 factored-pl\n"), Err(Error::Format(_))));
        assert!(matches!(read_model("PERMRANK-MODEL 1 mystery\n"), Err(Error::Format(_))));
        assert!(matches!(read_model("OTHER 1 factored-pl\n"), Err(Error::Format(_))));
    }
}
