use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::{Atom, Bond, BondOrder, Element, Molecule};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SmilesErrorKind {
    EmptyInput,
    UnbalancedBranch,
    EmptyBranch,
    UnclosedRing(u32),
    RingBondConflict(u32),
    RingSelfLoop(u32),
    DuplicateBond,
    UnknownElement(String),
    UnexpectedCharacter(char),
    UnterminatedBracket,
    DanglingBond,
    UnsupportedBond(char),
    InvalidAromatic(String),
    ValenceViolation(String),
}

impl fmt::Display for SmilesErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use SmilesErrorKind::*;
        match self {
            EmptyInput => write!(f, "empty structure string"),
            UnbalancedBranch => write!(f, "unbalanced branch parenthesis"),
            EmptyBranch => write!(f, "empty branch"),
            UnclosedRing(n) => write!(f, "ring closure {n} is never closed"),
            RingBondConflict(n) => write!(f, "conflicting bond orders on ring closure {n}"),
            RingSelfLoop(n) => write!(f, "ring closure {n} bonds an atom to itself"),
            DuplicateBond => write!(f, "ring closure duplicates an existing bond"),
            UnknownElement(s) => write!(f, "unknown element symbol '{s}'"),
            UnexpectedCharacter(c) => write!(f, "unexpected character '{c}'"),
            UnterminatedBracket => write!(f, "unterminated bracket atom"),
            DanglingBond => write!(f, "bond symbol without a following atom"),
            UnsupportedBond(c) => write!(f, "unsupported bond symbol '{c}'"),
            InvalidAromatic(s) => write!(f, "'{s}' cannot be aromatic"),
            ValenceViolation(s) => write!(f, "valence exceeded on {s}"),
        }
    }
}

/// A SMILES syntax or chemistry error, located by character offset.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at offset {offset}")]
pub struct SmilesError {
    pub offset: usize,
    pub kind: SmilesErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseWarning {
    pub offset: usize,
    pub message: String,
}

/// Parses a SMILES string; ignored stereo markup is reported through `log`.
pub fn parse_smiles(text: &str) -> Result<Molecule, SmilesError> {
    let (mol, warnings) = parse_smiles_with_warnings(text)?;
    for w in warnings {
        log::warn!("{text}: {} at offset {}", w.message, w.offset);
    }
    Ok(mol)
}

pub fn parse_smiles_with_warnings(text: &str) -> Result<(Molecule, Vec<ParseWarning>), SmilesError> {
    Parser::new(text).run()
}

struct PendingBond {
    order: BondOrder,
    offset: usize,
}

struct OpenRing {
    atom: usize,
    order: Option<BondOrder>,
    offset: usize,
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    atom_offsets: Vec<usize>,
    bonds: Vec<Bond>,
    implicit: Vec<bool>,
    prev: Option<usize>,
    branches: Vec<(Option<usize>, usize, usize)>,
    pending: Option<PendingBond>,
    rings: BTreeMap<u32, OpenRing>,
    warnings: Vec<ParseWarning>,
}

fn err<T>(offset: usize, kind: SmilesErrorKind) -> Result<T, SmilesError> {
    Err(SmilesError { offset, kind })
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            text,
            bytes: text.as_bytes(),
            pos: 0,
            atoms: Vec::new(),
            atom_offsets: Vec::new(),
            bonds: Vec::new(),
            implicit: Vec::new(),
            prev: None,
            branches: Vec::new(),
            pending: None,
            rings: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn warn(&mut self, offset: usize, message: &str) {
        self.warnings.push(ParseWarning { offset, message: message.to_string() });
    }

    fn run(mut self) -> Result<(Molecule, Vec<ParseWarning>), SmilesError> {
        if self.text.trim().is_empty() {
            return err(0, SmilesErrorKind::EmptyInput);
        }
        while let Some(c) = self.peek() {
            let at = self.pos;
            match c {
                b'(' => {
                    if self.prev.is_none() || self.pending.is_some() {
                        return err(at, SmilesErrorKind::UnbalancedBranch);
                    }
                    self.branches.push((self.prev, at, self.atoms.len()));
                    self.pos += 1;
                }
                b')' => {
                    let Some((prev, _, atoms_before)) = self.branches.pop() else {
                        return err(at, SmilesErrorKind::UnbalancedBranch);
                    };
                    if let Some(p) = &self.pending {
                        return err(p.offset, SmilesErrorKind::DanglingBond);
                    }
                    if self.atoms.len() == atoms_before {
                        return err(at, SmilesErrorKind::EmptyBranch);
                    }
                    self.prev = prev;
                    self.pos += 1;
                }
                b'.' => {
                    if let Some(p) = &self.pending {
                        return err(p.offset, SmilesErrorKind::DanglingBond);
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' | b'$' => {
                    if self.pending.is_some() {
                        return err(at, SmilesErrorKind::UnexpectedCharacter(c as char));
                    }
                    let order = match c {
                        b'-' => BondOrder::Single,
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        b':' => BondOrder::Aromatic,
                        b'/' | b'\\' => {
                            self.warn(at, "directional bond treated as single; stereo ignored");
                            BondOrder::Single
                        }
                        _ => return err(at, SmilesErrorKind::UnsupportedBond(c as char)),
                    };
                    self.pending = Some(PendingBond { order, offset: at });
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => self.ring_closure()?,
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.add_atom(atom, at)?;
                }
                _ if c.is_ascii_alphabetic() || c == b'*' => {
                    let atom = self.organic_atom()?;
                    self.add_atom(atom, at)?;
                }
                _ => {
                    let ch = self.text[at..].chars().next().unwrap_or('?');
                    return err(at, SmilesErrorKind::UnexpectedCharacter(ch));
                }
            }
        }
        if let Some(p) = &self.pending {
            return err(p.offset, SmilesErrorKind::DanglingBond);
        }
        if let Some(&(_, offset, _)) = self.branches.first() {
            return err(offset, SmilesErrorKind::UnbalancedBranch);
        }
        if let Some((&num, ring)) = self.rings.iter().min_by_key(|(_, r)| r.offset) {
            return err(ring.offset, SmilesErrorKind::UnclosedRing(num));
        }
        self.finish()
    }

    fn add_atom(&mut self, atom: Atom, offset: usize) -> Result<(), SmilesError> {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        self.atom_offsets.push(offset);
        match self.prev {
            Some(p) => {
                let (order, implicit) = self.resolve_order(p, idx, self.pending.as_ref().map(|b| b.order));
                if let Some(b) = &self.pending {
                    if order == BondOrder::Aromatic && !(self.atoms[p].aromatic && self.atoms[idx].aromatic) {
                        return err(b.offset, SmilesErrorKind::InvalidAromatic(":".into()));
                    }
                }
                self.bonds.push(Bond::new(p, idx, order));
                self.implicit.push(implicit);
                self.pending = None;
            }
            None => {
                if let Some(b) = &self.pending {
                    return err(b.offset, SmilesErrorKind::DanglingBond);
                }
            }
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn resolve_order(&self, a: usize, b: usize, written: Option<BondOrder>) -> (BondOrder, bool) {
        match written {
            Some(order) => (order, false),
            None if self.atoms[a].aromatic && self.atoms[b].aromatic => (BondOrder::Aromatic, true),
            None => (BondOrder::Single, true),
        }
    }

    fn ring_closure(&mut self) -> Result<(), SmilesError> {
        let at = self.pos;
        let num = if self.bytes[at] == b'%' {
            let digits = self.bytes.get(at + 1..at + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    ((d[0] - b'0') * 10 + (d[1] - b'0')) as u32
                }
                _ => return err(at, SmilesErrorKind::UnexpectedCharacter('%')),
            }
        } else {
            self.pos += 1;
            (self.bytes[at] - b'0') as u32
        };
        let Some(current) = self.prev else {
            return err(at, SmilesErrorKind::UnexpectedCharacter(self.bytes[at] as char));
        };
        let written = self.pending.take();
        match self.rings.remove(&num) {
            Some(open) => {
                if open.atom == current {
                    return err(at, SmilesErrorKind::RingSelfLoop(num));
                }
                if self.bonds.iter().any(|b| {
                    (b.atoms.0 == open.atom && b.atoms.1 == current)
                        || (b.atoms.1 == open.atom && b.atoms.0 == current)
                }) {
                    return err(at, SmilesErrorKind::DuplicateBond);
                }
                let explicit = match (open.order, written.as_ref().map(|w| w.order)) {
                    (Some(x), Some(y)) if x != y => {
                        return err(at, SmilesErrorKind::RingBondConflict(num));
                    }
                    (Some(x), _) | (None, Some(x)) => Some(x),
                    (None, None) => None,
                };
                let (order, implicit) = self.resolve_order(open.atom, current, explicit);
                if order == BondOrder::Aromatic
                    && !(self.atoms[open.atom].aromatic && self.atoms[current].aromatic)
                {
                    return err(at, SmilesErrorKind::InvalidAromatic(":".into()));
                }
                self.bonds.push(Bond::new(open.atom, current, order));
                self.implicit.push(implicit);
            }
            None => {
                self.rings.insert(
                    num,
                    OpenRing { atom: current, order: written.map(|w| w.order), offset: at },
                );
            }
        }
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<Atom, SmilesError> {
        let at = self.pos;
        let rest = &self.bytes[at..];
        let (symbol, aromatic, len): (&str, bool, usize) = match rest {
            [b'C', b'l', ..] => ("Cl", false, 2),
            [b'B', b'r', ..] => ("Br", false, 2),
            [b'B', ..] => ("B", false, 1),
            [b'C', ..] => ("C", false, 1),
            [b'N', ..] => ("N", false, 1),
            [b'O', ..] => ("O", false, 1),
            [b'P', ..] => ("P", false, 1),
            [b'S', ..] => ("S", false, 1),
            [b'F', ..] => ("F", false, 1),
            [b'I', ..] => ("I", false, 1),
            [b'b', ..] => ("B", true, 1),
            [b'c', ..] => ("C", true, 1),
            [b'n', ..] => ("N", true, 1),
            [b'o', ..] => ("O", true, 1),
            [b'p', ..] => ("P", true, 1),
            [b's', ..] => ("S", true, 1),
            _ => {
                let end = if rest.len() > 1 && rest[1].is_ascii_lowercase() { 2 } else { 1 };
                let sym = String::from_utf8_lossy(&rest[..end]).into_owned();
                return err(at, SmilesErrorKind::UnknownElement(sym));
            }
        };
        self.pos += len;
        let mut atom = Atom::new(Element::from_symbol(symbol).expect("organic subset symbol"));
        atom.aromatic = aromatic;
        Ok(atom)
    }

    fn read_number(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            None
        } else {
            self.text[start..self.pos].parse().ok()
        }
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        let open = self.pos;
        let Some(close_rel) = self.bytes[open..].iter().position(|&c| c == b']') else {
            return err(open, SmilesErrorKind::UnterminatedBracket);
        };
        let close = open + close_rel;
        self.pos += 1;
        let isotope = self.read_number().map(|n| n.min(u16::MAX as u32) as u16);

        let sym_at = self.pos;
        let rest = &self.bytes[sym_at..close];
        let (element, aromatic, len) = match rest {
            [a, b, ..] if a.is_ascii_lowercase() && b.is_ascii_lowercase() => {
                let two = std::str::from_utf8(&rest[..2]).unwrap_or("");
                match two {
                    "se" => (Element::SE, true, 2),
                    "as" => (Element::AS, true, 2),
                    "te" => (Element::TE, true, 2),
                    _ => self.lower_single(rest[0], sym_at)?,
                }
            }
            [a, ..] if a.is_ascii_lowercase() => self.lower_single(*a, sym_at)?,
            [a, b, ..] if a.is_ascii_uppercase() && b.is_ascii_lowercase() => {
                let two = std::str::from_utf8(&rest[..2]).unwrap_or("");
                match Element::from_symbol(two) {
                    Some(e) => (e, false, 2),
                    None => return err(sym_at, SmilesErrorKind::UnknownElement(two.to_string())),
                }
            }
            [a, ..] if a.is_ascii_uppercase() => {
                let one = (*a as char).to_string();
                match Element::from_symbol(&one) {
                    Some(e) => (e, false, 1),
                    None => return err(sym_at, SmilesErrorKind::UnknownElement(one)),
                }
            }
            [b'*', ..] => return err(sym_at, SmilesErrorKind::UnknownElement("*".into())),
            _ => return err(sym_at, SmilesErrorKind::UnterminatedBracket),
        };
        self.pos += len;

        if self.peek() == Some(b'@') {
            let at = self.pos;
            while self.peek() == Some(b'@') {
                self.pos += 1;
            }
            // @TH1, @AL2, @SP3, @TB10, @OH25
            if matches!(
                self.bytes.get(self.pos..self.pos + 2),
                Some(b"TH" | b"AL" | b"SP" | b"TB" | b"OH")
            ) {
                self.pos += 2;
                self.read_number();
            }
            self.warn(at, "chirality ignored");
        }

        let mut explicit_h = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            explicit_h = self.read_number().map_or(1, |n| n.min(255) as u8);
        }

        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(n) = self.read_number() {
                charge = unit * n as i32;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    self.pos += 1;
                    charge += unit;
                }
            }
        }

        if self.peek() == Some(b':') {
            let at = self.pos;
            self.pos += 1;
            if self.read_number().is_none() {
                return err(at, SmilesErrorKind::UnexpectedCharacter(':'));
            }
        }

        if self.pos != close {
            let ch = self.text[self.pos..].chars().next().unwrap_or('?');
            return err(self.pos, SmilesErrorKind::UnexpectedCharacter(ch));
        }
        self.pos = close + 1;

        let mut atom = Atom::new(element);
        atom.aromatic = aromatic;
        atom.isotope = isotope;
        atom.explicit_h = explicit_h;
        atom.formal_charge = charge.clamp(i8::MIN as i32, i8::MAX as i32) as i8;
        atom.bracket = true;
        Ok(atom)
    }

    fn lower_single(&self, c: u8, at: usize) -> Result<(Element, bool, usize), SmilesError> {
        let e = match c {
            b'b' => Element::B,
            b'c' => Element::C,
            b'n' => Element::N,
            b'o' => Element::O,
            b'p' => Element::P,
            b's' => Element::S,
            _ => return err(at, SmilesErrorKind::InvalidAromatic((c as char).to_string())),
        };
        Ok((e, true, 1))
    }

    fn finish(self) -> Result<(Molecule, Vec<ParseWarning>), SmilesError> {
        let Parser { text, atoms, atom_offsets, mut bonds, implicit, warnings, .. } = self;
        let build = |bonds: Vec<Bond>, atoms: Vec<Atom>| {
            Molecule::from_parts(atoms, bonds, text).expect("parser emits only valid bonds")
        };
        let mut mol = build(bonds.clone(), atoms.clone());
        // An unwritten bond between aromatic atoms that is not in a ring is single (biaryls).
        let mut demoted = false;
        for (idx, bond) in bonds.iter_mut().enumerate() {
            if implicit[idx] && bond.order == BondOrder::Aromatic && !mol.is_ring_bond(idx) {
                bond.order = BondOrder::Single;
                demoted = true;
            }
        }
        if demoted {
            mol = build(bonds, atoms);
        }
        for i in 0..mol.atom_count() {
            if !mol.atoms()[i].bracket && mol.exceeds_max_valence(i) {
                return err(
                    atom_offsets[i],
                    SmilesErrorKind::ValenceViolation(mol.atoms()[i].element.symbol().to_string()),
                );
            }
        }
        Ok((mol, warnings))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kind(s: &str) -> (usize, SmilesErrorKind) {
        let e = parse_smiles(s).unwrap_err();
        (e.offset, e.kind)
    }

    #[test]
    fn ethanol() {
        let m = parse_smiles("CCO").unwrap();
        assert_eq!(m.heavy_atom_count(), 3);
        assert_eq!(m.bonds().len(), 2);
        assert!(m.bonds().iter().all(|b| b.order == BondOrder::Single));
        assert_eq!(m.ring_count(), 0);
    }

    #[test]
    fn benzene() {
        let m = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(m.atom_count(), 6);
        assert!(m.atoms().iter().all(|a| a.aromatic));
        assert_eq!(m.bonds().len(), 6);
        assert!(m.bonds().iter().all(|b| b.order == BondOrder::Aromatic));
        assert_eq!(m.ring_count(), 1);
    }

    #[test]
    fn open_branch_reports_offset() {
        assert_eq!(kind("C("), (1, SmilesErrorKind::UnbalancedBranch));
        assert_eq!(kind("CC)C"), (2, SmilesErrorKind::UnbalancedBranch));
        assert_eq!(kind("C()C"), (2, SmilesErrorKind::EmptyBranch));
    }

    #[test]
    fn ring_errors() {
        assert_eq!(kind("C1CC"), (1, SmilesErrorKind::UnclosedRing(1)));
        assert_eq!(kind("C11"), (2, SmilesErrorKind::RingSelfLoop(1)));
        assert_eq!(kind("C1C1"), (3, SmilesErrorKind::DuplicateBond));
        assert_eq!(kind("C=1CC#1"), (6, SmilesErrorKind::RingBondConflict(1)));
    }

    #[test]
    fn element_errors() {
        assert!(matches!(kind("CXC"), (1, SmilesErrorKind::UnknownElement(_))));
        assert!(matches!(kind("C[Xx]"), (2, SmilesErrorKind::UnknownElement(_))));
        assert!(matches!(kind("[C"), (0, SmilesErrorKind::UnterminatedBracket)));
    }

    #[test]
    fn valence_violation_offset() {
        assert!(matches!(kind("CC(C)(C)(C)(C)C"), (1, SmilesErrorKind::ValenceViolation(_))));
        assert!(matches!(kind("CO(C)C"), (1, SmilesErrorKind::ValenceViolation(_))));
        assert!(parse_smiles("C[N+](C)(C)C").is_ok());
    }

    #[test]
    fn bracket_atoms() {
        let m = parse_smiles("[13CH3][NH3+]").unwrap();
        assert_eq!(m.atoms()[0].isotope, Some(13));
        assert_eq!(m.atoms()[0].explicit_h, 3);
        assert_eq!(m.atoms()[1].formal_charge, 1);
        let m = parse_smiles("[O--]").unwrap();
        assert_eq!(m.atoms()[0].formal_charge, -2);
        let m = parse_smiles("[Fe+3]").unwrap();
        assert_eq!(m.atoms()[0].formal_charge, 3);
        assert_eq!(m.atoms()[0].element, Element::FE);
    }

    #[test]
    fn stereo_is_ignored_with_warning() {
        let (m, w) = parse_smiles_with_warnings("F/C=C/F").unwrap();
        assert_eq!(m.atom_count(), 4);
        assert_eq!(w.len(), 2);
        let (m, w) = parse_smiles_with_warnings("N[C@@H](C)C(=O)O").unwrap();
        assert_eq!(m.atoms()[1].explicit_h, 1);
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn fragments_and_ring_bond_orders() {
        let m = parse_smiles("CCO.Cl").unwrap();
        assert_eq!(m.connected_components().len(), 2);
        let m = parse_smiles("C1=CCCCC1").unwrap();
        assert_eq!(m.ring_count(), 1);
        let m = parse_smiles("C=1CCCCC1").unwrap();
        assert_eq!(m.bond_between(0, 5).unwrap().order, BondOrder::Double);
        let m = parse_smiles("C%12CC%12").unwrap();
        assert_eq!(m.ring_count(), 1);
    }

    #[test]
    fn biaryl_bond_is_single() {
        let m = parse_smiles("c1ccccc1c1ccccc1").unwrap();
        assert_eq!(m.bond_between(5, 6).unwrap().order, BondOrder::Single);
        assert_eq!(m.bond_between(0, 1).unwrap().order, BondOrder::Aromatic);
    }

    #[test]
    fn empty_input() {
        assert_eq!(kind(""), (0, SmilesErrorKind::EmptyInput));
    }

    #[test]
    fn dangling_bonds() {
        assert_eq!(kind("CC="), (2, SmilesErrorKind::DanglingBond));
        assert_eq!(kind("=C"), (0, SmilesErrorKind::DanglingBond));
        assert!(matches!(kind("C$C"), (1, SmilesErrorKind::UnsupportedBond('$'))));
    }
}
