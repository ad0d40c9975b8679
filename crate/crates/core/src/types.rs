//! Domain types shared by every model family.
//!
//! Positions inside a [`RankedList`] are 0-based; position 0 holds the most
//! preferred item.

use std::fmt;

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result, Violation};

/// Dense item index, `0 <= id < num_items`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ItemId(pub u32);

/// Dense user index, `0 <= id < num_users`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserId(pub u32);

impl ItemId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl UserId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn items(ids: &[u32]) -> Vec<ItemId> {
    ids.iter().copied().map(ItemId).collect()
}

/// Checks the ranked-list invariants: non-empty, no duplicates, every item
/// inside the universe. Reports the first violation found.
pub fn validate_ranked_list(items: &[ItemId], num_items: usize) -> std::result::Result<(), Violation> {
    if items.is_empty() {
        return Err(Violation::Empty);
    }
    let mut seen = vec![false; num_items];
    for (pos, item) in items.iter().enumerate() {
        if item.index() >= num_items {
            return Err(Violation::OutOfRange {
                position: pos + 1,
                item: item.0,
                num_items,
            });
        }
        if seen[item.index()] {
            return Err(Violation::Duplicate {
                position: pos + 1,
                item: item.0,
            });
        }
        seen[item.index()] = true;
    }
    Ok(())
}

/// Checks that `items` has no duplicates and stays in range; an empty slice is fine.
pub(crate) fn check_distinct(items: &[ItemId], num_items: usize) -> Result<()> {
    if items.is_empty() {
        return Ok(());
    }
    validate_ranked_list(items, num_items).map_err(|violation| Error::Validation {
        line: None,
        violation,
    })
}

/// One user's items in decreasing order of preference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedList {
    pub user: UserId,
    pub items: Vec<ItemId>,
}

impl RankedList {
    pub fn new(user: UserId, items: Vec<ItemId>, num_items: usize) -> Result<Self> {
        validate_ranked_list(&items, num_items)
            .map_err(|violation| Error::Validation { line: None, violation })?;
        Ok(RankedList { user, items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Sparse collection of ranked lists, at most one per user, kept sorted by user.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    num_users: usize,
    num_items: usize,
    lists: Vec<RankedList>,
    by_user: Vec<Option<usize>>,
}

impl Dataset {
    pub fn new(num_users: usize, num_items: usize, mut lists: Vec<RankedList>) -> Result<Self> {
        lists.sort_by_key(|l| l.user);
        let mut by_user = vec![None; num_users];
        for (idx, list) in lists.iter().enumerate() {
            let u = list.user.index();
            if u >= num_users {
                return Err(Error::Index {
                    what: "user",
                    index: u,
                    size: num_users,
                });
            }
            if by_user[u].is_some() {
                return Err(Error::argument(format!("user {u} has more than one list")));
            }
            validate_ranked_list(&list.items, num_items)
                .map_err(|violation| Error::Validation { line: None, violation })?;
            by_user[u] = Some(idx);
        }
        Ok(Dataset {
            num_users,
            num_items,
            lists,
            by_user,
        })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn lists(&self) -> &[RankedList] {
        &self.lists
    }

    pub fn list_for(&self, user: UserId) -> Option<&RankedList> {
        self.by_user
            .get(user.index())
            .copied()
            .flatten()
            .map(|i| &self.lists[i])
    }

    /// Splits every list into a head used for training and a held-out tail of
    /// `holdout_len(n, fraction)` items. Lists whose head would be empty are
    /// dropped from the returned training set.
    pub fn split_tails(&self, fraction: f64) -> Result<(Dataset, Vec<(UserId, Vec<ItemId>)>)> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::argument(format!("split fraction {fraction} outside [0, 1)")));
        }
        let mut heads = Vec::new();
        let mut tails = Vec::new();
        for list in &self.lists {
            let held = holdout_len(list.len(), fraction);
            let cut = list.len() - held;
            if cut > 0 {
                heads.push(RankedList {
                    user: list.user,
                    items: list.items[..cut].to_vec(),
                });
            }
            tails.push((list.user, list.items[cut..].to_vec()));
        }
        Ok((Dataset::new(self.num_users, self.num_items, heads)?, tails))
    }
}

/// Number of items held out from the tail of an `n`-item list: `ceil(fraction * n)`.
pub fn holdout_len(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).ceil() as usize).min(n)
}

/// Factored scores `s[u][y] = sum_k W[u][k] * H[k][y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    /// users x K
    pub w: Array2<f64>,
    /// K x items
    pub h: Array2<f64>,
}

impl FactorPair {
    pub fn new(w: Array2<f64>, h: Array2<f64>) -> Result<Self> {
        let f = FactorPair { w, h };
        f.validate()?;
        Ok(f)
    }

    pub fn zeros(num_users: usize, num_items: usize, rank: usize) -> Result<Self> {
        Self::new(
            Array2::zeros((num_users, rank)),
            Array2::zeros((rank, num_items)),
        )
    }

    /// Entries i.i.d. uniform in `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(
        num_users: usize,
        num_items: usize,
        rank: usize,
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        check_rank(rank, num_users, num_items)?;
        let w = Array2::from_shape_fn((num_users, rank), |_| rng.random_range(-scale..=scale));
        let h = Array2::from_shape_fn((rank, num_items), |_| rng.random_range(-scale..=scale));
        Self::new(w, h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.w.ncols() != self.h.nrows() {
            return Err(Error::argument(format!(
                "factor shapes disagree: W is {:?}, H is {:?}",
                self.w.dim(),
                self.h.dim()
            )));
        }
        check_rank(self.rank(), self.num_users(), self.num_items())?;
        if !self.w.iter().chain(self.h.iter()).all(|v| v.is_finite()) {
            return Err(Error::argument("factor entries must be finite"));
        }
        Ok(())
    }

    pub fn num_users(&self) -> usize {
        self.w.nrows()
    }

    pub fn num_items(&self) -> usize {
        self.h.ncols()
    }

    pub fn rank(&self) -> usize {
        self.w.ncols()
    }

    /// Unchecked score of one (user, item) pair.
    pub fn score(&self, user: UserId, item: ItemId) -> f64 {
        let (u, y) = (user.index(), item.index());
        (0..self.rank()).map(|k| self.w[[u, k]] * self.h[[k, y]]).sum()
    }

    pub(crate) fn check_user(&self, user: UserId) -> Result<()> {
        if user.index() >= self.num_users() {
            return Err(Error::Index {
                what: "user",
                index: user.index(),
                size: self.num_users(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_items(&self, items: &[ItemId]) -> Result<()> {
        check_items(items, self.num_items())
    }

    pub(crate) fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.num_users() != self.num_users() || data.num_items() != self.num_items() {
            return Err(Error::argument(format!(
                "dataset is {}x{} but factors are {}x{}",
                data.num_users(),
                data.num_items(),
                self.num_users(),
                self.num_items()
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_items(items: &[ItemId], num_items: usize) -> Result<()> {
    for item in items {
        if item.index() >= num_items {
            return Err(Error::Index {
                what: "item",
                index: item.index(),
                size: num_items,
            });
        }
    }
    Ok(())
}

pub(crate) fn check_rank(rank: usize, num_users: usize, num_items: usize) -> Result<()> {
    if rank == 0 || rank > num_users.min(num_items) {
        return Err(Error::argument(format!(
            "latent dimension {rank} must be in 1..={}",
            num_users.min(num_items)
        )));
    }
    Ok(())
}
