//! A trained model of any supported kind, behind one prediction interface.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::factored_pl::{sort_by_score, FplModel};
use crate::latent_pl::{self, MixtureModel};
use crate::loglinear::{rank_by_insertion, EnergyModel, PairwiseModel, PositionalModel};
use crate::pairwise::{LossKind, RegWeights};
use crate::scores::user_scores;
use crate::types::{check_distinct, FactorPair, ItemId, RankedList, UserId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    PairwiseBaseline,
    FactoredPl,
    LatentPl,
    LoglinPositional,
    LoglinPairwise,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::PairwiseBaseline,
        ModelKind::FactoredPl,
        ModelKind::LatentPl,
        ModelKind::LoglinPositional,
        ModelKind::LoglinPairwise,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::PairwiseBaseline => "pairwise-baseline",
            ModelKind::FactoredPl => "factored-pl",
            ModelKind::LatentPl => "latent-pl",
            ModelKind::LoglinPositional => "loglin-positional",
            ModelKind::LoglinPairwise => "loglin-pairwise",
        }
    }

    /// Whether the kind is a log-linear energy model (samplable by MCMC).
    pub fn is_loglinear(self) -> bool {
        matches!(self, ModelKind::LoglinPositional | ModelKind::LoglinPairwise)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::argument(format!("unknown model kind '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    PairwiseBaseline {
        factors: FactorPair,
        loss: LossKind,
        reg: RegWeights,
    },
    FactoredPl(FplModel),
    LatentPl(MixtureModel),
    LoglinPositional(PositionalModel),
    LoglinPairwise(PairwiseModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::PairwiseBaseline { .. } => ModelKind::PairwiseBaseline,
            Model::FactoredPl(_) => ModelKind::FactoredPl,
            Model::LatentPl(_) => ModelKind::LatentPl,
            Model::LoglinPositional(_) => ModelKind::LoglinPositional,
            Model::LoglinPairwise(_) => ModelKind::LoglinPairwise,
        }
    }

    /// Number of users the model has parameters for; `None` when it has no
    /// user-specific parameters.
    pub fn num_users(&self) -> Option<usize> {
        match self {
            Model::PairwiseBaseline { factors, .. } => Some(factors.num_users()),
            Model::FactoredPl(m) => Some(m.factors.num_users()),
            Model::LatentPl(m) => Some(m.num_users()),
            Model::LoglinPositional(m) => Some(m.factors.num_users()),
            Model::LoglinPairwise(_) => None,
        }
    }

    pub fn num_items(&self) -> usize {
        match self {
            Model::PairwiseBaseline { factors, .. } => factors.num_items(),
            Model::FactoredPl(m) => m.factors.num_items(),
            Model::LatentPl(m) => m.num_items(),
            Model::LoglinPositional(m) => m.factors.num_items(),
            Model::LoglinPairwise(m) => m.num_items(),
        }
    }

    /// The log-linear view of the model, if it is one.
    pub fn as_energy(&self) -> Option<&dyn EnergyModel> {
        match self {
            Model::LoglinPositional(m) => Some(m),
            Model::LoglinPairwise(m) => Some(m),
            _ => None,
        }
    }

    /// Normalized log-probability of a list, for the Plackett-Luce family
    /// only; `None` for kinds without a tractable likelihood.
    pub fn log_likelihood(&self, list: &RankedList) -> Option<Result<f64>> {
        match self {
            Model::FactoredPl(m) => Some(m.log_likelihood(list)),
            Model::LatentPl(m) => Some(m.log_likelihood(list)),
            _ => None,
        }
    }

    /// Orders `candidates` for `user`, given the items the user has already
    /// ranked. Score-based kinds ignore `seen`; latent-pl and loglin-pairwise
    /// insert each candidate into `seen` independently.
    pub fn predict(&self, user: UserId, seen: &[ItemId], candidates: &[ItemId]) -> Result<Vec<ItemId>> {
        match self {
            Model::PairwiseBaseline { factors, .. } => {
                check_distinct(candidates, factors.num_items())?;
                let s = user_scores(factors, user, candidates)?;
                Ok(sort_by_score(candidates, &s))
            }
            Model::FactoredPl(m) => {
                check_distinct(candidates, m.factors.num_items())?;
                m.predict_sort(user, candidates)
            }
            Model::LatentPl(m) => latent_pl::rank_unseen(m, user, seen, candidates),
            Model::LoglinPositional(m) => {
                check_distinct(candidates, m.factors.num_items())?;
                m.predict_sort(user, candidates)
            }
            Model::LoglinPairwise(m) => rank_by_insertion(m, user, seen, candidates),
        }
    }

    /// Errors unless the model can score `user`.
    pub fn check_user(&self, user: UserId) -> Result<()> {
        match self.num_users() {
            Some(n) if user.index() >= n => Err(Error::Index {
                what: "user",
                index: user.index(),
                size: n,
            }),
            _ => Ok(()),
        }
    }
}
