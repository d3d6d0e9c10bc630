use std::fmt::Write as _;

use super::canon::canonical_order;
use super::{BondOrder, Element, Molecule};

/// Canonical SMILES for `mol`; identical for every atom ordering of the same graph.
pub fn write_smiles(mol: &Molecule) -> String {
    canonical_order(mol).1
}

/// Alias of [`write_smiles`], for call sites where the canonical property matters.
pub fn canonical_smiles(mol: &Molecule) -> String {
    write_smiles(mol)
}

struct RingClosure {
    open: usize,
    close: usize,
    bond: usize,
}

/// Writes SMILES traversing depth-first from the lowest-ranked atom of each
/// fragment, visiting neighbors in rank order.
pub(crate) fn write_with_ranks(mol: &Molecule, ranks: &[usize]) -> String {
    let n = mol.atom_count();
    let mut visited = vec![false; n];
    let mut used_bond = vec![false; mol.bonds().len()];
    let mut children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut closures: Vec<RingClosure> = Vec::new();

    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by_key(|&i| ranks[i]);
    let mut roots = Vec::new();
    for &start in &starts {
        if visited[start] {
            continue;
        }
        roots.push(start);
        dfs(mol, ranks, start, &mut visited, &mut used_bond, &mut children, &mut closures);
    }

    let mut at_atom: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (idx, c) in closures.iter().enumerate() {
        at_atom[c.open].push(idx);
        at_atom[c.close].push(idx);
    }

    let mut out = String::new();
    let mut digits: Vec<Option<u32>> = vec![None; closures.len()];
    let mut in_use: Vec<bool> = vec![false; 100];
    for (k, &root) in roots.iter().enumerate() {
        if k > 0 {
            out.push('.');
        }
        emit(mol, ranks, root, None, &children, &closures, &at_atom, &mut digits, &mut in_use, &mut out);
    }
    out
}

fn dfs(
    mol: &Molecule,
    ranks: &[usize],
    v: usize,
    visited: &mut [bool],
    used_bond: &mut [bool],
    children: &mut [Vec<(usize, usize)>],
    closures: &mut Vec<RingClosure>,
) {
    visited[v] = true;
    let mut nbrs: Vec<(usize, usize)> = mol.neighbors(v).to_vec();
    nbrs.sort_by_key(|&(w, _)| ranks[w]);
    for (w, b) in nbrs {
        if used_bond[b] {
            continue;
        }
        used_bond[b] = true;
        if visited[w] {
            closures.push(RingClosure { open: w, close: v, bond: b });
        } else {
            children[v].push((w, b));
            dfs(mol, ranks, w, visited, used_bond, children, closures);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn emit(
    mol: &Molecule,
    ranks: &[usize],
    v: usize,
    via: Option<usize>,
    children: &[Vec<(usize, usize)>],
    closures: &[RingClosure],
    at_atom: &[Vec<usize>],
    digits: &mut [Option<u32>],
    in_use: &mut [bool],
    out: &mut String,
) {
    if let Some(b) = via {
        out.push_str(bond_symbol(mol, b));
    }
    write_atom(mol, v, out);

    let mut closing: Vec<usize> = at_atom[v].iter().copied().filter(|&c| closures[c].close == v).collect();
    closing.sort_by_key(|&c| digits[c]);
    for c in closing {
        let d = digits[c].expect("ring opened before it closes");
        in_use[d as usize] = false;
        push_ring_digit(d, out);
    }
    let mut opening: Vec<usize> = at_atom[v].iter().copied().filter(|&c| closures[c].open == v).collect();
    opening.sort_by_key(|&c| ranks[closures[c].close]);
    for c in opening {
        let d = (1..100).find(|&d| !in_use[d]).expect("fewer than 100 open rings") as u32;
        in_use[d as usize] = true;
        digits[c] = Some(d);
        out.push_str(bond_symbol(mol, closures[c].bond));
        push_ring_digit(d, out);
    }

    let kids = &children[v];
    for (k, &(w, b)) in kids.iter().enumerate() {
        let last = k + 1 == kids.len();
        if !last {
            out.push('(');
        }
        emit(mol, ranks, w, Some(b), children, closures, at_atom, digits, in_use, out);
        if !last {
            out.push(')');
        }
    }
}

fn push_ring_digit(d: u32, out: &mut String) {
    if d < 10 {
        let _ = write!(out, "{d}");
    } else {
        let _ = write!(out, "%{d:02}");
    }
}

fn bond_symbol(mol: &Molecule, b: usize) -> &'static str {
    let bond = &mol.bonds()[b];
    let (x, y) = bond.atoms;
    let both_aromatic = mol.atoms()[x].aromatic && mol.atoms()[y].aromatic;
    match bond.order {
        BondOrder::Single if both_aromatic => "-",
        BondOrder::Single => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic if mol.is_ring_bond(b) => "",
        BondOrder::Aromatic => ":",
    }
}

fn write_atom(mol: &Molecule, i: usize, out: &mut String) {
    let atom = &mol.atoms()[i];
    let hydrogens = if atom.bracket { atom.explicit_h } else { atom.implicit_h };
    let organic_ok = atom.element.is_organic_subset()
        && (!atom.aromatic || matches!(atom.element, Element::B | Element::C | Element::N | Element::O | Element::P | Element::S));
    let implied = implied_h(mol, i);
    let needs_bracket = !organic_ok
        || atom.formal_charge != 0
        || atom.isotope.is_some()
        || hydrogens != implied;
    let symbol = atom.element.symbol();
    if !needs_bracket {
        push_symbol(symbol, atom.aromatic, out);
        return;
    }
    out.push('[');
    if let Some(iso) = atom.isotope {
        let _ = write!(out, "{iso}");
    }
    push_symbol(symbol, atom.aromatic, out);
    match hydrogens {
        0 => {}
        1 => out.push('H'),
        h => {
            let _ = write!(out, "H{h}");
        }
    }
    match atom.formal_charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        q if q > 0 => {
            let _ = write!(out, "+{q}");
        }
        q => {
            let _ = write!(out, "-{}", -(q as i32));
        }
    }
    out.push(']');
}

/// Hydrogens a reader would infer for this atom written without brackets.
fn implied_h(mol: &Molecule, i: usize) -> u8 {
    let atom = &mol.atoms()[i];
    if atom.bracket {
        let mut probe = atom.clone();
        probe.bracket = false;
        let mut atoms = vec![probe];
        let mut bonds = Vec::new();
        for &(nb, b) in mol.neighbors(i) {
            let mut other = mol.atoms()[nb].clone();
            other.bracket = true;
            atoms.push(other);
            let k = atoms.len() - 1;
            bonds.push(super::Bond::new(0, k, mol.bonds()[b].order));
        }
        match super::Molecule::from_parts(atoms, bonds, "") {
            Ok(m) => m.atoms()[0].implicit_h,
            Err(_) => u8::MAX,
        }
    } else {
        atom.implicit_h
    }
}

fn push_symbol(symbol: &str, aromatic: bool, out: &mut String) {
    if aromatic {
        out.push_str(&symbol.to_ascii_lowercase());
    } else {
        out.push_str(symbol);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn canon(s: &str) -> String {
        write_smiles(&parse_smiles(s).unwrap())
    }

    #[test]
    fn single_atom() {
        assert_eq!(canon("C"), "C");
        assert_eq!(canon("[Fe]"), "[Fe]");
    }

    #[test]
    fn reordered_inputs_agree() {
        assert_eq!(canon("OCC"), canon("CCO"));
        assert_eq!(canon("c1ccccc1C"), canon("Cc1ccccc1"));
        assert_eq!(canon("OC(=O)c1ccccc1OC(C)=O"), canon("CC(=O)Oc1ccccc1C(=O)O"));
    }

    #[test]
    fn brackets_only_when_needed() {
        assert_eq!(canon("[CH4]"), "C");
        assert_eq!(canon("[NH4+]"), "[NH4+]");
        assert_eq!(canon("[CH3]"), "[CH3]");
        assert_eq!(canon("[nH]1cccc1"), canon("c1cc[nH]c1"));
        assert!(canon("[nH]1cccc1").contains("[nH]"));
    }

    #[test]
    fn biaryl_single_bond_is_explicit() {
        let s = canon("c1ccccc1-c1ccccc1");
        assert!(s.contains('-'), "{s}");
        assert_eq!(canon(&s), s);
    }
}
