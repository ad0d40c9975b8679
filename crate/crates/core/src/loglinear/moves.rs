//! Local moves over a ranked list and the bookkeeping needed to price them.
//!
//! A move never changes which items are in the list, only their order. Two
//! views of a move drive every energy delta:
//!
//! - the items whose position changes (for position-wise potentials), and
//! - the item pairs whose relative order flips (for pairwise potentials).

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::types::ItemId;

/// 0-based positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Move {
    /// Take the item at `from` out and reinsert it so it ends up at `to`.
    Relocate { from: usize, to: usize },
    /// Exchange the items at `l < m`.
    Swap { l: usize, m: usize },
    /// Reorder the window `start..start + order.len()`: new window slot `k`
    /// receives old window slot `order[k]`.
    SublistPerm { start: usize, order: Vec<usize> },
}

impl Move {
    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::argument(msg));
        match self {
            Move::Relocate { from, to } => {
                if *from >= n || *to >= n || from == to {
                    return bad(format!("relocation {from}->{to} invalid for {n} items"));
                }
            }
            Move::Swap { l, m } => {
                if l >= m || *m >= n {
                    return bad(format!("swap ({l}, {m}) invalid for {n} items"));
                }
            }
            Move::SublistPerm { start, order } => {
                let width = order.len();
                if width < 2 || start + width > n {
                    return bad(format!("sublist at {start} of width {width} invalid for {n} items"));
                }
                let mut seen = vec![false; width];
                for &o in order {
                    if o >= width || seen[o] {
                        return bad(format!("sublist ordering {order:?} is not a permutation"));
                    }
                    seen[o] = true;
                }
            }
        }
        Ok(())
    }

    /// Applies the move in place. The move must be valid for `items`.
    pub fn apply(&self, items: &mut [ItemId]) {
        match self {
            Move::Relocate { from, to } => {
                if from < to {
                    items[*from..=*to].rotate_left(1);
                } else {
                    items[*to..=*from].rotate_right(1);
                }
            }
            Move::Swap { l, m } => items.swap(*l, *m),
            Move::SublistPerm { start, order } => {
                let window: Vec<ItemId> = items[*start..*start + order.len()].to_vec();
                for (k, &o) in order.iter().enumerate() {
                    items[start + k] = window[o];
                }
            }
        }
    }

    /// The move that undoes this one.
    pub fn inverse(&self) -> Move {
        match self {
            Move::Relocate { from, to } => Move::Relocate { from: *to, to: *from },
            Move::Swap { l, m } => Move::Swap { l: *l, m: *m },
            Move::SublistPerm { start, order } => {
                let mut inv = vec![0; order.len()];
                for (k, &o) in order.iter().enumerate() {
                    inv[o] = k;
                }
                Move::SublistPerm {
                    start: *start,
                    order: inv,
                }
            }
        }
    }
}

/// Calls `f(item, old_position, new_position)` for every item the move
/// displaces.
pub(crate) fn for_each_displacement(items: &[ItemId], mv: &Move, mut f: impl FnMut(ItemId, usize, usize)) {
    match *mv {
        Move::Relocate { from, to } => {
            f(items[from], from, to);
            if from < to {
                for p in from + 1..=to {
                    f(items[p], p, p - 1);
                }
            } else {
                for p in to..from {
                    f(items[p], p, p + 1);
                }
            }
        }
        Move::Swap { l, m } => {
            f(items[l], l, m);
            f(items[m], m, l);
        }
        Move::SublistPerm { start, ref order } => {
            for (k, &o) in order.iter().enumerate() {
                if k != o {
                    f(items[start + o], start + o, start + k);
                }
            }
        }
    }
}

/// Calls `f(a, b)` for every pair where `a` preceded `b` before the move and
/// follows it afterwards.
pub(crate) fn for_each_flipped_pair(items: &[ItemId], mv: &Move, mut f: impl FnMut(ItemId, ItemId)) {
    match *mv {
        Move::Relocate { from, to } => {
            let moved = items[from];
            if from < to {
                for &c in &items[from + 1..=to] {
                    f(moved, c);
                }
            } else {
                for &c in &items[to..from] {
                    f(c, moved);
                }
            }
        }
        Move::Swap { l, m } => {
            let (a, b) = (items[l], items[m]);
            f(a, b);
            for &c in &items[l + 1..m] {
                f(a, c);
                f(c, b);
            }
        }
        Move::SublistPerm { start, ref order } => {
            // old slots p < q flip when q lands before p
            let width = order.len();
            let mut new_slot = vec![0; width];
            for (k, &o) in order.iter().enumerate() {
                new_slot[o] = k;
            }
            for p in 0..width {
                for q in p + 1..width {
                    if new_slot[q] < new_slot[p] {
                        f(items[start + p], items[start + q]);
                    }
                }
            }
        }
    }
}

/// Mixture of symmetric move proposals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProposalMix {
    pub swap: f64,
    pub relocate: f64,
    pub sublist: f64,
    /// Window width for sublist moves; shortened to the list length when
    /// the list is shorter.
    pub sublist_width: usize,
}

impl Default for ProposalMix {
    fn default() -> Self {
        ProposalMix {
            swap: 0.7,
            relocate: 0.2,
            sublist: 0.1,
            sublist_width: 3,
        }
    }
}

impl ProposalMix {
    pub fn swap_only() -> Self {
        ProposalMix {
            swap: 1.0,
            relocate: 0.0,
            sublist: 0.0,
            sublist_width: 3,
        }
    }

    /// Draws a move for an `n`-item list, or `None` when `n < 2`.
    ///
    /// Each component is symmetric: swaps pick an unordered pair uniformly,
    /// relocations pick an ordered (from, to) pair uniformly, and sublist
    /// moves pick a window uniformly and a uniformly random reordering of it.
    pub fn propose<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Option<Move> {
        if n < 2 {
            return None;
        }
        let total = self.swap + self.relocate + self.sublist;
        let pick = rng.random::<f64>() * total;
        if pick < self.swap {
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            Some(Move::Swap {
                l: a.min(b),
                m: a.max(b),
            })
        } else if pick < self.swap + self.relocate {
            let from = rng.random_range(0..n);
            let mut to = rng.random_range(0..n - 1);
            if to >= from {
                to += 1;
            }
            Some(Move::Relocate { from, to })
        } else {
            let width = self.sublist_width.clamp(2, n);
            let start = rng.random_range(0..=n - width);
            let mut order: Vec<usize> = (0..width).collect();
            order.shuffle(rng);
            Some(Move::SublistPerm { start, order })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::items;

    #[test]
    fn relocation_matches_the_worked_example() {
        // [A,B,C,D,E,F], B moved between E and F
        let mut l = items(&[0, 1, 2, 3, 4, 5]);
        Move::Relocate { from: 1, to: 4 }.apply(&mut l);
        assert_eq!(l, items(&[0, 2, 3, 4, 1, 5]));
        Move::Relocate { from: 4, to: 1 }.apply(&mut l);
        assert_eq!(l, items(&[0, 1, 2, 3, 4, 5]));
    }

    #[test]
    fn swap_matches_the_worked_example() {
        let mut l = items(&[0, 1, 2, 3, 4, 5]);
        Move::Swap { l: 1, m: 4 }.apply(&mut l);
        assert_eq!(l, items(&[0, 4, 2, 3, 1, 5]));
    }

    #[test]
    fn inverse_undoes_every_move() {
        let moves = [
            Move::Relocate { from: 0, to: 3 },
            Move::Relocate { from: 3, to: 1 },
            Move::Swap { l: 0, m: 2 },
            Move::SublistPerm {
                start: 1,
                order: vec![2, 0, 1],
            },
        ];
        for mv in moves {
            let mut l = items(&[7, 8, 9, 10]);
            mv.apply(&mut l);
            mv.inverse().apply(&mut l);
            assert_eq!(l, items(&[7, 8, 9, 10]), "{mv:?}");
        }
    }

    #[test]
    fn invalid_moves_are_rejected() {
        assert!(Move::Swap { l: 2, m: 2 }.validate(4).is_err());
        assert!(Move::Swap { l: 3, m: 1 }.validate(4).is_err());
        assert!(Move::Relocate { from: 0, to: 4 }.validate(4).is_err());
        assert!(Move::SublistPerm {
            start: 2,
            order: vec![0, 1, 2]
        }
        .validate(4)
        .is_err());
        assert!(Move::SublistPerm {
            start: 0,
            order: vec![0, 0]
        }
        .validate(4)
        .is_err());
    }

    #[test]
    fn flipped_pairs_match_brute_force() {
        let mut rng = crate::rng::root(11);
        let mix = ProposalMix {
            swap: 1.0,
            relocate: 1.0,
            sublist: 1.0,
            sublist_width: 4,
        };
        for _ in 0..500 {
            let before = items(&[0, 1, 2, 3, 4, 5, 6]);
            let mv = mix.propose(before.len(), &mut rng).unwrap();
            let mut after = before.clone();
            mv.apply(&mut after);
            let pos = |l: &[ItemId], y: ItemId| l.iter().position(|&x| x == y).unwrap();
            let mut want = Vec::new();
            for i in 0..before.len() {
                for j in i + 1..before.len() {
                    let (a, b) = (before[i], before[j]);
                    if pos(&after, a) > pos(&after, b) {
                        want.push((a, b));
                    }
                }
            }
            let mut got = Vec::new();
            for_each_flipped_pair(&before, &mv, |a, b| got.push((a, b)));
            got.sort();
            want.sort();
            assert_eq!(got, want, "{mv:?}");

            let mut moved = Vec::new();
            for_each_displacement(&before, &mv, |y, old, new| moved.push((y, old, new)));
            for (y, old, new) in moved {
                assert_eq!(pos(&before, y), old);
                assert_eq!(pos(&after, y), new);
            }
        }
    }
}
