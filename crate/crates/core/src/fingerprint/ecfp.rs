use std::collections::HashMap;

use super::{Fingerprint, FingerprintConfig, FingerprintError};
use crate::chem::Molecule;
use crate::hash::hash_words;

/// Per-atom initial identifiers over (element, heavy degree, charge, hydrogen
/// count, ring flag, aromatic flag). Hydrogen atoms get `None`.
pub fn atom_invariants(mol: &Molecule, seed: u64) -> Vec<Option<u64>> {
    (0..mol.atom_count())
        .map(|i| {
            let a = &mol.atoms()[i];
            if !a.is_heavy() {
                return None;
            }
            Some(hash_words(
                seed,
                &[
                    a.element.atomic_number() as u64,
                    mol.heavy_degree(i) as u64,
                    (a.formal_charge as i64 + 128) as u64,
                    mol.total_h(i) as u64,
                    a.ring_member as u64,
                    a.aromatic as u64,
                ],
            ))
        })
        .collect()
}

/// Circular fingerprint with the default hash seed.
pub fn ecfp(mol: &Molecule, radius: u32, width: usize) -> Result<Fingerprint, FingerprintError> {
    ecfp_with(mol, &FingerprintConfig { radius, width, ..FingerprintConfig::default() })
}

/// Circular fingerprint: each heavy atom emits one identifier per iteration
/// `0..=radius`; environments covering the same atom set are emitted once,
/// keeping the smallest identifier. Identifiers fold into bits by modulo.
pub fn ecfp_with(mol: &Molecule, config: &FingerprintConfig) -> Result<Fingerprint, FingerprintError> {
    if config.width == 0 {
        return Err(FingerprintError::ZeroWidth);
    }
    let heavy: Vec<usize> = (0..mol.atom_count()).filter(|&i| mol.atoms()[i].is_heavy()).collect();
    if heavy.is_empty() {
        return Err(FingerprintError::NoHeavyAtoms);
    }
    let n = mol.atom_count();
    let set_words = n.div_ceil(64);
    let invariants = atom_invariants(mol, config.seed);

    let mut ids: Vec<u64> = invariants.iter().map(|v| v.unwrap_or(0)).collect();
    let mut sets: Vec<Vec<u64>> = (0..n)
        .map(|i| {
            let mut s = vec![0u64; set_words];
            s[i / 64] |= 1 << (i % 64);
            s
        })
        .collect();

    let mut envs: HashMap<Vec<u64>, u64> = HashMap::new();
    let mut record = |set: &Vec<u64>, id: u64| {
        envs.entry(set.clone())
            .and_modify(|cur| *cur = (*cur).min(id))
            .or_insert(id);
    };
    for &a in &heavy {
        record(&sets[a], ids[a]);
    }

    for iteration in 1..=config.radius as u64 {
        let mut next_ids = ids.clone();
        let mut next_sets = sets.clone();
        for &a in &heavy {
            let mut tuples: Vec<(u64, u64)> = mol
                .neighbors(a)
                .iter()
                .filter(|&&(nb, _)| mol.atoms()[nb].is_heavy())
                .map(|&(nb, b)| (mol.bonds()[b].order.code(), ids[nb]))
                .collect();
            tuples.sort_unstable();
            let mut words = Vec::with_capacity(2 + 2 * tuples.len());
            words.push(iteration);
            words.push(ids[a]);
            for (order, id) in &tuples {
                words.push(*order);
                words.push(*id);
            }
            next_ids[a] = hash_words(config.seed, &words);
            for &(nb, _) in mol.neighbors(a) {
                if mol.atoms()[nb].is_heavy() {
                    for (dst, src) in next_sets[a].iter_mut().zip(&sets[nb]) {
                        *dst |= *src;
                    }
                }
            }
        }
        ids = next_ids;
        sets = next_sets;
        for &a in &heavy {
            record(&sets[a], ids[a]);
        }
    }

    let width = config.width as u64;
    Ok(Fingerprint::from_bits(config.width, envs.values().map(|&id| (id % width) as usize)))
}
