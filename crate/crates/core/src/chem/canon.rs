//! Canonical atom ranking by iterative neighborhood refinement with
//! exhaustive (budgeted) tie-breaking.

use super::writer::write_with_ranks;
use super::Molecule;

/// Leaves explored when breaking ties; past this, the first candidate is taken.
const TIE_BREAK_BUDGET: usize = 64;

/// Canonical ranks: a permutation of `0..n` that depends only on the graph,
/// not on the input atom order.
pub fn canonical_ranks(mol: &Molecule) -> Vec<usize> {
    canonical_order(mol).0
}

pub(crate) fn canonical_order(mol: &Molecule) -> (Vec<usize>, String) {
    let n = mol.atom_count();
    if n == 0 {
        return (Vec::new(), String::new());
    }
    let initial = refine(mol, initial_ranks(mol));
    let mut leaves = 0;
    search(mol, initial, &mut leaves).expect("search visits at least one leaf")
}

fn initial_ranks(mol: &Molecule) -> Vec<usize> {
    let keys: Vec<_> = (0..mol.atom_count())
        .map(|i| {
            let a = &mol.atoms()[i];
            (
                a.element.atomic_number(),
                mol.degree(i),
                mol.total_h(i),
                a.formal_charge,
                a.aromatic,
                a.ring_member,
                a.isotope.unwrap_or(0),
            )
        })
        .collect();
    dense_ranks(&keys)
}

fn dense_ranks<K: Ord + Clone>(keys: &[K]) -> Vec<usize> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("key present"))
        .collect()
}

fn class_count(ranks: &[usize]) -> usize {
    ranks.iter().copied().max().map_or(0, |m| m + 1)
}

/// Refines ranks by sorted neighbor (rank, bond) signatures until stable.
fn refine(mol: &Molecule, mut ranks: Vec<usize>) -> Vec<usize> {
    let mut classes = class_count(&ranks);
    loop {
        let keys: Vec<(usize, Vec<(usize, u64)>)> = (0..mol.atom_count())
            .map(|i| {
                let mut sig: Vec<(usize, u64)> = mol
                    .neighbors(i)
                    .iter()
                    .map(|&(nb, b)| (ranks[nb], mol.bonds()[b].order.code()))
                    .collect();
                sig.sort_unstable();
                (ranks[i], sig)
            })
            .collect();
        let next = dense_ranks(&keys);
        let next_classes = class_count(&next);
        if next_classes == classes {
            return ranks;
        }
        ranks = next;
        classes = next_classes;
    }
}

fn search(mol: &Molecule, ranks: Vec<usize>, leaves: &mut usize) -> Option<(Vec<usize>, String)> {
    let n = ranks.len();
    if class_count(&ranks) == n {
        *leaves += 1;
        let s = write_with_ranks(mol, &ranks);
        return Some((ranks, s));
    }
    // Smallest tied rank value.
    let mut counts = vec![0usize; n];
    for &r in &ranks {
        counts[r] += 1;
    }
    let tied = (0..n).find(|&r| counts[r] > 1).expect("a tie exists");
    let candidates: Vec<usize> = (0..n).filter(|&i| ranks[i] == tied).collect();

    let mut best: Option<(Vec<usize>, String)> = None;
    for (k, &cand) in candidates.iter().enumerate() {
        if k > 0 && *leaves >= TIE_BREAK_BUDGET {
            break;
        }
        let keys: Vec<(usize, u8)> = (0..n)
            .map(|i| (ranks[i], u8::from(!(ranks[i] == tied && i == cand))))
            .collect();
        let split = refine(mol, dense_ranks(&keys));
        if let Some(result) = search(mol, split, leaves) {
            let better = match &best {
                None => true,
                Some((_, s)) => result.1 < *s,
            };
            if better {
                best = Some(result);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    #[test]
    fn ranks_are_a_permutation() {
        let m = parse_smiles("CC(=O)Oc1ccccc1C(=O)O").unwrap();
        let mut r = canonical_ranks(&m);
        r.sort_unstable();
        assert_eq!(r, (0..m.atom_count()).collect::<Vec<_>>());
    }

    #[test]
    fn element_rank_pairs_match_for_reordered_input() {
        let pairs = |s: &str| {
            let m = parse_smiles(s).unwrap();
            let r = canonical_ranks(&m);
            let mut v: Vec<(String, usize)> =
                (0..m.atom_count()).map(|i| (m.atoms()[i].element.to_string(), r[i])).collect();
            v.sort();
            v
        };
        assert_eq!(pairs("CCO"), pairs("OCC"));
    }

    #[test]
    fn benzene_atoms_share_initial_invariant() {
        let m = parse_smiles("c1ccccc1").unwrap();
        let r = refine(&m, initial_ranks(&m));
        assert!(r.iter().all(|&x| x == r[0]));
    }
}
