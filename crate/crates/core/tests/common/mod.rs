#![allow(dead_code)]

use ndarray::Array2;
use permrank::latent_pl::MixtureModel;
use permrank::loglinear::{Move, PairTable, PairwiseModel, PositionalModel};
use permrank::rng::{root, StreamRng};
use permrank::types::{Dataset, FactorPair, ItemId, RankedList, UserId};
use rand::seq::{index, SliceRandom};
use rand::Rng;

pub fn rng(seed: u64) -> StreamRng {
    root(seed)
}

pub fn uniform(rng: &mut StreamRng, half_width: f64) -> f64 {
    rng.random_range(-half_width..=half_width)
}

pub fn factors(rng: &mut StreamRng, users: usize, items: usize, k: usize, scale: f64) -> FactorPair {
    FactorPair::random(users, items, k, scale, rng).unwrap()
}

/// `n` distinct items out of `m`, in random order.
pub fn random_list(rng: &mut StreamRng, m: usize, n: usize) -> Vec<ItemId> {
    let mut v: Vec<ItemId> = index::sample(rng, m, n).into_iter().map(|i| ItemId(i as u32)).collect();
    v.shuffle(rng);
    v
}

pub fn dataset(users: usize, items: usize, lists: &[Vec<ItemId>]) -> Dataset {
    let lists = lists
        .iter()
        .enumerate()
        .map(|(u, l)| RankedList::new(UserId(u as u32), l.clone(), items).unwrap())
        .collect();
    Dataset::new(users, items, lists).unwrap()
}

/// One random list of length `n` per user.
pub fn random_dataset(rng: &mut StreamRng, users: usize, items: usize, n: usize) -> Dataset {
    let lists: Vec<Vec<ItemId>> = (0..users).map(|_| random_list(rng, items, n)).collect();
    dataset(users, items, &lists)
}

/// Gamma and a lambda entry for every ordered item pair, all uniform in
/// `[-scale, scale]`.
pub fn pairwise_model(rng: &mut StreamRng, m: usize, scale: f64) -> PairwiseModel {
    let gamma = (0..m).map(|_| uniform(rng, scale)).collect();
    let mut entries = Vec::new();
    for a in 0..m as u32 {
        for b in 0..m as u32 {
            if a != b {
                entries.push((ItemId(a), ItemId(b), uniform(rng, scale)));
            }
        }
    }
    PairwiseModel {
        gamma,
        lambda: PairTable::from_entries(entries).unwrap(),
        tau: 1,
    }
}

pub fn positional_model(rng: &mut StreamRng, users: usize, m: usize, k: usize) -> PositionalModel {
    PositionalModel::new(factors(rng, users, m, k, 1.0))
}

pub fn mixture_model(rng: &mut StreamRng, users: usize, m: usize, k: usize, spread: f64) -> MixtureModel {
    let mut model = MixtureModel::random(users, m, k, rng).unwrap();
    model.scores = Array2::from_shape_fn((k, m), |_| uniform(rng, spread));
    model
}

pub fn naive_pairwise_energy(model: &PairwiseModel, items: &[ItemId]) -> f64 {
    let n = items.len() as f64;
    let mut e = 0.0;
    for (i, a) in items.iter().enumerate() {
        e -= model.gamma[a.index()] * (1.0 - (i + 1) as f64 / n);
        for b in &items[i + 1..] {
            e -= model.lambda.get(*a, *b);
        }
    }
    e
}

pub fn naive_positional_energy(model: &PositionalModel, user: UserId, items: &[ItemId]) -> f64 {
    let n = items.len() as f64;
    items
        .iter()
        .enumerate()
        .map(|(i, &y)| -model.factors.score(user, y) * (1.0 + n - 2.0 * (i + 1) as f64) / n)
        .sum()
}

pub fn applied(items: &[ItemId], mv: &Move) -> Vec<ItemId> {
    let mut v = items.to_vec();
    mv.apply(&mut v);
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveType {
    Relocate,
    Swap,
    Sublist,
}

pub const MOVE_TYPES: [MoveType; 3] = [MoveType::Relocate, MoveType::Swap, MoveType::Sublist];

/// A uniformly drawn valid move of the given type for an `n`-item list
/// (`n >= 2`); sublist widths range over `2..=min(n, 5)`.
pub fn random_move(rng: &mut StreamRng, n: usize, kind: MoveType) -> Move {
    match kind {
        MoveType::Relocate => {
            let from = rng.random_range(0..n);
            let mut to = rng.random_range(0..n - 1);
            if to >= from {
                to += 1;
            }
            Move::Relocate { from, to }
        }
        MoveType::Swap => {
            let l = rng.random_range(0..n - 1);
            let m = rng.random_range(l + 1..n);
            Move::Swap { l, m }
        }
        MoveType::Sublist => {
            let width = rng.random_range(2..=n.min(5));
            let start = rng.random_range(0..=n - width);
            let mut order: Vec<usize> = (0..width).collect();
            order.shuffle(rng);
            Move::SublistPerm { start, order }
        }
    }
}

/// Central differences of `f` at `x` with step `h`.
pub fn finite_diff(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = f(&p);
            p[i] = orig - h;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest `|a - b| / max(|a|, |b|, floor)` over the entries.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}
