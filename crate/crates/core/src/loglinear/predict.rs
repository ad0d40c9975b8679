use super::{check_list, EnergyModel, Move};
use crate::error::{Error, Result};
use crate::insertion::{rank_placements, Placement};
use crate::types::{check_distinct, check_items, ItemId, UserId};

/// Best insertion of a new item into a seen list.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyInsertion {
    /// 0-based insertion index; ties go to the smallest.
    pub position: usize,
    /// Total energy with the item at `position`.
    pub energy: f64,
    /// Total energy at every insertion index `0..=seen.len()`.
    pub energies: Vec<f64>,
}

/// Places `item` at the lowest-energy slot of `seen`, keeping the seen
/// items' relative order. One full energy evaluation at the front, then one
/// adjacent-swap delta per later slot.
pub fn predict_insert<M: EnergyModel + ?Sized>(
    model: &M,
    user: UserId,
    seen: &[ItemId],
    item: ItemId,
) -> Result<EnergyInsertion> {
    check_list(model, user, seen)?;
    check_items(&[item], model.num_items())?;
    if seen.contains(&item) {
        return Err(Error::argument(format!("item {item} is already in the list")));
    }
    let mut work = Vec::with_capacity(seen.len() + 1);
    work.push(item);
    work.extend_from_slice(seen);
    let mut energies = Vec::with_capacity(work.len());
    energies.push(model.energy(user, &work));
    for j in 0..seen.len() {
        let d = model.delta_energy(user, &work, &Move::Swap { l: j, m: j + 1 });
        energies.push(energies[j] + d);
        work.swap(j, j + 1);
    }
    let mut position = 0;
    for (i, &e) in energies.iter().enumerate() {
        if e < energies[position] {
            position = i;
        }
    }
    Ok(EnergyInsertion {
        position,
        energy: energies[position],
        energies,
    })
}

/// Inserts each candidate independently and orders them by slot, then by
/// lower energy, then by item id.
pub fn rank_by_insertion<M: EnergyModel + ?Sized>(
    model: &M,
    user: UserId,
    seen: &[ItemId],
    candidates: &[ItemId],
) -> Result<Vec<ItemId>> {
    check_distinct(candidates, model.num_items())?;
    let placements = candidates
        .iter()
        .map(|&item| {
            predict_insert(model, user, seen, item).map(|ins| Placement {
                item,
                position: ins.position,
                score: -ins.energy,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rank_placements(placements))
}
