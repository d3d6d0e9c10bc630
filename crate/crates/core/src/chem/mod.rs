//! Molecular graphs parsed from SMILES strings, and the graph utilities
//! the curation rules need (fragments, element checks, canonical ranks).

mod canon;
mod element;
mod smiles;
mod writer;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use canon::canonical_ranks;
pub use element::{Element, LIGAND_WHITELIST};
pub use smiles::{parse_smiles, parse_smiles_with_warnings, ParseWarning, SmilesError, SmilesErrorKind};
pub use writer::{canonical_smiles, write_smiles};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to the bond-order sum used for hydrogen and valence checks.
    pub fn valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub(crate) fn code(self) -> u64 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    pub aromatic: bool,
    pub formal_charge: i8,
    /// Hydrogens written inside a bracket atom.
    pub explicit_h: u8,
    /// Hydrogens implied by default valence (organic-subset atoms only).
    pub implicit_h: u8,
    pub isotope: Option<u16>,
    /// Whether the atom was (or must be) written in brackets.
    pub bracket: bool,
    pub ring_member: bool,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom {
            element,
            aromatic: false,
            formal_charge: 0,
            explicit_h: 0,
            implicit_h: 0,
            isotope: None,
            bracket: false,
            ring_member: false,
        }
    }

    pub fn is_heavy(&self) -> bool {
        self.element != Element::H
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub atoms: (usize, usize),
    pub order: BondOrder,
}

impl Bond {
    pub fn new(a: usize, b: usize, order: BondOrder) -> Self {
        Bond { atoms: (a, b), order }
    }

    pub fn other(&self, atom: usize) -> usize {
        if self.atoms.0 == atom {
            self.atoms.1
        } else {
            self.atoms.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("bond {0} joins an atom to itself")]
    SelfLoop(usize),
    #[error("bond {0} references a missing atom")]
    MissingAtom(usize),
    #[error("bond {0} duplicates an existing bond")]
    DuplicateBond(usize),
    #[error("aromatic bond {0} joins a non-aromatic atom")]
    AromaticMismatch(usize),
}

/// An atom/bond graph. Construct through [`parse_smiles`] or [`Molecule::from_parts`];
/// ring flags and implicit hydrogens are derived on construction.
#[derive(Clone, PartialEq, Eq)]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    source_text: String,
    adjacency: Vec<Vec<(usize, usize)>>,
    ring_bonds: Vec<bool>,
}

impl fmt::Debug for Molecule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Molecule")
            .field("smiles", &write_smiles(self))
            .field("atoms", &self.atoms.len())
            .field("bonds", &self.bonds.len())
            .finish()
    }
}

impl Molecule {
    /// Validates the graph and derives ring membership and implicit hydrogens.
    pub fn from_parts(
        atoms: Vec<Atom>,
        bonds: Vec<Bond>,
        source_text: impl Into<String>,
    ) -> Result<Molecule, GraphError> {
        let n = atoms.len();
        let mut adjacency = vec![Vec::new(); n];
        for (idx, bond) in bonds.iter().enumerate() {
            let (a, b) = bond.atoms;
            if a >= n || b >= n {
                return Err(GraphError::MissingAtom(idx));
            }
            if a == b {
                return Err(GraphError::SelfLoop(idx));
            }
            if adjacency[a].iter().any(|&(nb, _)| nb == b) {
                return Err(GraphError::DuplicateBond(idx));
            }
            if bond.order == BondOrder::Aromatic && !(atoms[a].aromatic && atoms[b].aromatic) {
                return Err(GraphError::AromaticMismatch(idx));
            }
            adjacency[a].push((b, idx));
            adjacency[b].push((a, idx));
        }
        let ring_bonds = find_ring_bonds(n, &bonds, &adjacency);
        let mut mol = Molecule {
            atoms,
            bonds,
            source_text: source_text.into(),
            adjacency,
            ring_bonds,
        };
        for i in 0..n {
            let in_ring = mol.adjacency[i].iter().any(|&(_, b)| mol.ring_bonds[b]);
            mol.atoms[i].ring_member = in_ring;
            mol.atoms[i].implicit_h = if mol.atoms[i].bracket {
                0
            } else {
                mol.default_implicit_h(i)
            };
        }
        Ok(mol)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `(neighbor, bond index)` pairs of an atom.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a]
            .iter()
            .find(|&&(nb, _)| nb == b)
            .map(|&(_, idx)| &self.bonds[idx])
    }

    pub fn is_ring_bond(&self, bond: usize) -> bool {
        self.ring_bonds[bond]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn heavy_degree(&self, atom: usize) -> usize {
        self.adjacency[atom]
            .iter()
            .filter(|&&(nb, _)| self.atoms[nb].is_heavy())
            .count()
    }

    /// Bracket, implicit, and explicit-neighbor hydrogens combined.
    pub fn total_h(&self, atom: usize) -> u32 {
        let a = &self.atoms[atom];
        let h_neighbors = self.adjacency[atom]
            .iter()
            .filter(|&&(nb, _)| !self.atoms[nb].is_heavy())
            .count() as u32;
        a.explicit_h as u32 + a.implicit_h as u32 + h_neighbors
    }

    pub(crate) fn bond_order_sum(&self, atom: usize) -> u32 {
        self.adjacency[atom]
            .iter()
            .map(|&(_, b)| self.bonds[b].order.valence() as u32)
            .sum()
    }

    /// Implicit hydrogen count from the default valence table; aromatic atoms
    /// reserve one valence unit for the pi system (carbon and boron) or a lone
    /// pair (heteroatoms).
    fn default_implicit_h(&self, atom: usize) -> u8 {
        let a = &self.atoms[atom];
        let valences = a.element.default_valences();
        if valences.is_empty() {
            return 0;
        }
        let sum = self.bond_order_sum(atom);
        if a.aromatic {
            let has_aromatic_bond = self.adjacency[atom]
                .iter()
                .any(|&(_, b)| self.bonds[b].order == BondOrder::Aromatic);
            let used = sum + u32::from(has_aromatic_bond);
            let target = valences[0] as u32;
            return target.saturating_sub(used) as u8;
        }
        match valences.iter().map(|&v| v as u32).find(|&v| v >= sum) {
            Some(v) => (v - sum) as u8,
            None => 0,
        }
    }

    pub(crate) fn exceeds_max_valence(&self, atom: usize) -> bool {
        let a = &self.atoms[atom];
        match a.element.default_valences().last() {
            Some(&max) => self.bond_order_sum(atom) > max as u32,
            None => false,
        }
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.is_heavy()).count()
    }

    /// Connected components as sorted atom-index lists, ordered by lowest member.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut components = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            seen[start] = true;
            let mut comp = Vec::new();
            while let Some(a) = stack.pop() {
                comp.push(a);
                for &(nb, _) in &self.adjacency[a] {
                    if !seen[nb] {
                        seen[nb] = true;
                        stack.push(nb);
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }
        components
    }

    /// Cycle-space dimension (number of independent rings).
    pub fn ring_count(&self) -> usize {
        let components = self.connected_components().len();
        self.bonds.len() + components - self.atoms.len()
    }

    /// Induced subgraph over `keep` (in the given order). Implicit hydrogens of
    /// non-bracket atoms are recomputed; bracket atoms keep their hydrogen count.
    pub fn subgraph(&self, keep: &[usize]) -> Molecule {
        let mut map = vec![usize::MAX; self.atoms.len()];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let atoms = keep.iter().map(|&i| self.atoms[i].clone()).collect();
        let bonds = self
            .bonds
            .iter()
            .filter(|b| map[b.atoms.0] != usize::MAX && map[b.atoms.1] != usize::MAX)
            .map(|b| Bond::new(map[b.atoms.0], map[b.atoms.1], b.order))
            .collect();
        let mut mol = Molecule::from_parts(atoms, bonds, String::new())
            .expect("induced subgraph of a valid molecule is valid");
        mol.source_text = write_smiles(&mol);
        mol
    }

    /// Returns a copy with atoms reordered so that new atom `i` is old atom `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Molecule {
        assert_eq!(order.len(), self.atoms.len(), "permutation length");
        let mut mol = self.subgraph(order);
        mol.source_text = self.source_text.clone();
        mol
    }

    pub fn is_whitelisted(&self) -> bool {
        check_element_whitelist(self)
    }
}

/// Number of non-hydrogen atoms.
pub fn heavy_atom_count(mol: &Molecule) -> usize {
    mol.heavy_atom_count()
}

/// True iff every atom belongs to the 15-element ligand whitelist.
pub fn check_element_whitelist(mol: &Molecule) -> bool {
    mol.atoms.iter().all(|a| a.element.is_whitelisted_ligand_element())
}

/// The connected component with the most heavy atoms; ties go to more bonds,
/// then to the lexicographically smallest canonical SMILES.
pub fn largest_fragment(mol: &Molecule) -> Molecule {
    let components = mol.connected_components();
    if components.len() <= 1 {
        return mol.clone();
    }
    components
        .iter()
        .map(|comp| {
            let frag = mol.subgraph(comp);
            let heavy = frag.heavy_atom_count();
            let bonds = frag.bonds.len();
            let key = canonical_smiles(&frag);
            (heavy, bonds, key, frag)
        })
        .min_by(|x, y| {
            y.0.cmp(&x.0)
                .then_with(|| y.1.cmp(&x.1))
                .then_with(|| x.2.cmp(&y.2))
        })
        .map(|(_, _, key, mut frag)| {
            frag.source_text = key;
            frag
        })
        .expect("multi-fragment molecule has components")
}

/// Canonical string of the largest fragment: the lookup key for a compound.
pub fn canonical_compound(smiles: &str) -> Result<String, SmilesError> {
    Ok(canonical_smiles(&largest_fragment(&parse_smiles(smiles)?)))
}

/// Marks bonds that lie on at least one cycle (i.e. are not bridges).
fn find_ring_bonds(n: usize, bonds: &[Bond], adjacency: &[Vec<(usize, usize)>]) -> Vec<bool> {
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut is_bridge = vec![false; bonds.len()];
    let mut timer = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // (atom, bond used to reach it, next adjacency slot)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(frame) = stack.last_mut() {
            let (v, via, slot) = *frame;
            if slot < adjacency[v].len() {
                frame.2 += 1;
                let (w, b) = adjacency[v][slot];
                if b == via {
                    continue;
                }
                if disc[w] == usize::MAX {
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    stack.push((w, b, 0));
                } else {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let Some(&(parent, _, _)) = stack.last() {
                    low[parent] = low[parent].min(low[v]);
                    if low[v] > disc[parent] {
                        is_bridge[via] = true;
                    }
                }
            }
        }
    }
    is_bridge.iter().map(|&b| !b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heavy_atoms() {
        assert_eq!(heavy_atom_count(&parse_smiles("CCO").unwrap()), 3);
        assert_eq!(heavy_atom_count(&parse_smiles("[H][H]").unwrap()), 0);
        assert_eq!(heavy_atom_count(&parse_smiles("c1ccccc1").unwrap()), 6);
    }

    #[test]
    fn whitelist() {
        assert!(check_element_whitelist(&parse_smiles("CCO").unwrap()));
        assert!(!check_element_whitelist(&parse_smiles("[Si](C)(C)C").unwrap()));
        assert!(check_element_whitelist(&parse_smiles("[Fe]").unwrap()));
    }

    #[test]
    fn largest_fragment_prefers_heavier() {
        let frag = largest_fragment(&parse_smiles("CCO.Cl").unwrap());
        assert_eq!(canonical_smiles(&frag), canonical_smiles(&parse_smiles("CCO").unwrap()));
        let single = parse_smiles("c1ccccc1O").unwrap();
        assert_eq!(largest_fragment(&single), single);
    }

    #[test]
    fn largest_fragment_tie_is_order_independent() {
        let a = largest_fragment(&parse_smiles("CC.OO").unwrap());
        let b = largest_fragment(&parse_smiles("OO.CC").unwrap());
        assert_eq!(canonical_smiles(&a), canonical_smiles(&b));
        assert_eq!(canonical_smiles(&a), "CC");
        let c = largest_fragment(&parse_smiles("CC.OO").unwrap());
        assert_eq!(canonical_smiles(&a), canonical_smiles(&c));
    }

    #[test]
    fn largest_fragment_is_idempotent_and_connected() {
        let m = parse_smiles("[Na+].[O-]C(=O)c1ccccc1.O").unwrap();
        let f = largest_fragment(&m);
        assert_eq!(f.connected_components().len(), 1);
        assert_eq!(canonical_smiles(&largest_fragment(&f)), canonical_smiles(&f));
    }

    #[test]
    fn ring_flags_follow_cycles() {
        let m = parse_smiles("Cc1ccccc1").unwrap();
        assert!(!m.atoms()[0].ring_member);
        assert!(m.atoms()[1..].iter().all(|a| a.ring_member));
        assert_eq!(m.ring_count(), 1);
        let naph = parse_smiles("c1ccc2ccccc2c1").unwrap();
        assert_eq!(naph.ring_count(), 2);
    }

    #[test]
    fn from_parts_rejects_bad_graphs() {
        let atoms = vec![Atom::new(Element::C), Atom::new(Element::C)];
        assert_eq!(
            Molecule::from_parts(atoms.clone(), vec![Bond::new(0, 0, BondOrder::Single)], ""),
            Err(GraphError::SelfLoop(0))
        );
        assert_eq!(
            Molecule::from_parts(
                atoms.clone(),
                vec![Bond::new(0, 1, BondOrder::Single), Bond::new(1, 0, BondOrder::Double)],
                ""
            ),
            Err(GraphError::DuplicateBond(1))
        );
        assert_eq!(
            Molecule::from_parts(atoms.clone(), vec![Bond::new(0, 1, BondOrder::Aromatic)], ""),
            Err(GraphError::AromaticMismatch(0))
        );
        assert_eq!(
            Molecule::from_parts(atoms, vec![Bond::new(0, 5, BondOrder::Single)], ""),
            Err(GraphError::MissingAtom(0))
        );
    }

    #[test]
    fn implicit_hydrogens() {
        let m = parse_smiles("CC(=O)O").unwrap();
        let h: Vec<u32> = (0..m.atom_count()).map(|i| m.total_h(i)).collect();
        assert_eq!(h, vec![3, 0, 0, 1]);
        let benzene = parse_smiles("c1ccccc1").unwrap();
        assert!((0..6).all(|i| benzene.total_h(i) == 1));
        let pyridine = parse_smiles("n1ccccc1").unwrap();
        assert_eq!(pyridine.total_h(0), 0);
        let thiophene = parse_smiles("s1cccc1").unwrap();
        assert_eq!(thiophene.total_h(0), 0);
        let pyrrole = parse_smiles("[nH]1cccc1").unwrap();
        assert_eq!(pyrrole.total_h(0), 1);
        let dmso = parse_smiles("CS(=O)C").unwrap();
        assert_eq!(dmso.total_h(1), 0);
        let explicit = parse_smiles("[H]C([H])([H])[H]").unwrap();
        assert_eq!(explicit.total_h(1), 4);
    }
}
