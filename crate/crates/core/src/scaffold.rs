//! Murcko frameworks and scaffold-level deduplication.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::chem::{canonical_smiles, BondOrder, Molecule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaffoldConfig {
    /// Keep atoms double-bonded to the framework (ring carbonyl oxygens etc.).
    pub keep_exocyclic_double_bonds: bool,
}

impl Default for ScaffoldConfig {
    fn default() -> Self {
        ScaffoldConfig { keep_exocyclic_double_bonds: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScaffoldKey {
    pub canonical_string: String,
    pub ring_count: usize,
}

impl ScaffoldKey {
    pub fn is_empty(&self) -> bool {
        self.canonical_string.is_empty()
    }
}

pub fn murcko_scaffold(mol: &Molecule) -> Molecule {
    murcko_scaffold_with(mol, &ScaffoldConfig::default())
}

/// Ring systems plus the linker paths between them. Non-ring atoms of degree
/// one are pruned repeatedly; acyclic molecules give an empty framework.
pub fn murcko_scaffold_with(mol: &Molecule, config: &ScaffoldConfig) -> Molecule {
    let n = mol.atom_count();
    let mut alive: Vec<bool> = mol.atoms().iter().map(|a| a.is_heavy()).collect();
    if !mol.atoms().iter().any(|a| a.ring_member) {
        return mol.subgraph(&[]);
    }
    let live_degree = |alive: &[bool], i: usize| mol.neighbors(i).iter().filter(|&&(nb, _)| alive[nb]).count();
    let mut queue: Vec<usize> = (0..n)
        .filter(|&i| alive[i] && !mol.atoms()[i].ring_member && live_degree(&alive, i) <= 1)
        .collect();
    while let Some(i) = queue.pop() {
        if !alive[i] {
            continue;
        }
        alive[i] = false;
        for &(nb, _) in mol.neighbors(i) {
            if alive[nb] && !mol.atoms()[nb].ring_member && live_degree(&alive, nb) <= 1 {
                queue.push(nb);
            }
        }
    }
    if config.keep_exocyclic_double_bonds {
        let framework = alive.clone();
        for i in 0..n {
            if alive[i] || !mol.atoms()[i].is_heavy() {
                continue;
            }
            let attached = mol.neighbors(i).iter().any(|&(nb, b)| {
                framework[nb] && mol.bonds()[b].order == BondOrder::Double && mol.degree(i) == 1
            });
            if attached {
                alive[i] = true;
            }
        }
    }
    let keep: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
    mol.subgraph(&keep)
}

pub fn scaffold_key(mol: &Molecule) -> ScaffoldKey {
    scaffold_key_with(mol, &ScaffoldConfig::default())
}

pub fn scaffold_key_with(mol: &Molecule, config: &ScaffoldConfig) -> ScaffoldKey {
    let frame = murcko_scaffold_with(mol, config);
    ScaffoldKey { canonical_string: canonical_smiles(&frame), ring_count: frame.ring_count() }
}

/// One representative index per distinct scaffold key, keeping the first
/// occurrence. All acyclic molecules share the empty key.
pub fn scaffold_dedupe(mols: &[Molecule]) -> Vec<usize> {
    let keys: Vec<ScaffoldKey> = mols.iter().map(scaffold_key).collect();
    dedupe_keys(&keys)
}

/// First-occurrence indices of each distinct key.
pub fn dedupe_keys<K: std::hash::Hash + Eq>(keys: &[K]) -> Vec<usize> {
    let mut seen: HashMap<&K, ()> = HashMap::with_capacity(keys.len());
    let mut reps = Vec::new();
    for (i, k) in keys.iter().enumerate() {
        if seen.insert(k, ()).is_none() {
            reps.push(i);
        }
    }
    reps
}
