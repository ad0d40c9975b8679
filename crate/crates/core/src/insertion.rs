//! Shared ordering rule for insertion-based prediction.

use std::cmp::Ordering;

use crate::types::ItemId;

/// Where a new item lands in a seen list, and how good that placement is
/// (log-probability, or negative energy; higher is better).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub item: ItemId,
    /// 0-based insertion index into the seen list.
    pub position: usize,
    pub score: f64,
}

/// Orders independently placed candidates: by position ascending, then by
/// placement score descending, then by item id ascending.
pub fn rank_placements(mut placements: Vec<Placement>) -> Vec<ItemId> {
    placements.sort_by(|a, b| {
        a.position
            .cmp(&b.position)
            .then(b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal))
            .then(a.item.cmp(&b.item))
    });
    placements.into_iter().map(|p| p.item).collect()
}

/// Index of the first maximum.
pub(crate) fn first_argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_rules() {
        let p = |item, position, score| Placement {
            item: ItemId(item),
            position,
            score,
        };
        let ranked = rank_placements(vec![p(5, 1, -1.0), p(3, 0, -9.0), p(4, 1, -0.5), p(2, 1, -0.5)]);
        assert_eq!(ranked, vec![ItemId(3), ItemId(2), ItemId(4), ItemId(5)]);
    }

    #[test]
    fn argmax_prefers_the_first_tie() {
        assert_eq!(first_argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(first_argmax(&[0.0, 0.0]), 0);
    }
}
