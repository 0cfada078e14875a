//! SMILES reader for the supported subset: organic-subset and bracket atoms
//! with charge, ring closures (digits and `%nn`), branches, and the bond
//! symbols `- = # : / \`. Stereo markers are accepted and discarded, as are
//! bracket hydrogen counts. Isotopes, wildcards, atom classes and multiple
//! fragments are rejected.

use super::{Atom, Bond, BondOrder, Element, MolGraph};
use crate::error::{Error, Result};
use std::collections::BTreeMap;

/// Parses a complete, valid molecule.
pub fn parse_smiles(text: &str) -> Result<MolGraph> {
    let (atoms, bonds) = parse_parts(text)?;
    MolGraph::new(atoms, bonds).map_err(|e| match e {
        Error::InvalidGraph(msg) if msg.contains("duplicate") => Error::Syntax { pos: 0, msg },
        other => other,
    })
}

/// Parses a fragment: structure and valence are checked, but aromatic atoms
/// need not sit on an aromatic ring and the graph may be disconnected.
pub fn parse_fragment(text: &str) -> Result<MolGraph> {
    let (atoms, bonds) = parse_parts(text)?;
    MolGraph::fragment(atoms, bonds)
}

struct PendingRing {
    atom: usize,
    order: Option<BondOrder>,
    pos: usize,
}

struct RawBond {
    a: usize,
    b: usize,
    order: BondOrder,
    implied_aromatic: bool,
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<RawBond>,
    prev: Option<usize>,
    branch_stack: Vec<Option<usize>>,
    pending_bond: Option<(BondOrder, usize)>,
    rings: BTreeMap<u32, PendingRing>,
}

fn syntax(pos: usize, msg: impl Into<String>) -> Error {
    Error::Syntax {
        pos,
        msg: msg.into(),
    }
}

fn parse_parts(text: &str) -> Result<(Vec<Atom>, Vec<Bond>)> {
    let text = text.trim();
    if text.is_empty() {
        return Err(syntax(0, "empty input"));
    }
    let mut p = Parser {
        s: text.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        prev: None,
        branch_stack: Vec::new(),
        pending_bond: None,
        rings: BTreeMap::new(),
    };
    p.run()?;
    Ok(p.finish())
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn run(&mut self) -> Result<()> {
        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'(' => {
                    if self.prev.is_none() {
                        return Err(syntax(start, "branch before any atom"));
                    }
                    if self.pending_bond.is_some() {
                        return Err(syntax(start, "bond symbol before branch"));
                    }
                    self.branch_stack.push(self.prev);
                    self.pos += 1;
                }
                b')' => {
                    let Some(p) = self.branch_stack.pop() else {
                        return Err(syntax(start, "unbalanced ')'"));
                    };
                    if self.pending_bond.is_some() {
                        return Err(syntax(start, "bond symbol before ')'"));
                    }
                    if self.s.get(start.wrapping_sub(1)) == Some(&b'(') {
                        return Err(syntax(start, "empty branch"));
                    }
                    self.prev = p;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if self.pending_bond.is_some() {
                        return Err(syntax(start, "two consecutive bond symbols"));
                    }
                    let order = match c {
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        b':' => BondOrder::Aromatic,
                        _ => BondOrder::Single,
                    };
                    self.pending_bond = Some((order, start));
                    self.pos += 1;
                }
                b'$' => return Err(Error::UnsupportedFeature("quadruple bond '$'".into())),
                b'.' => {
                    return Err(Error::UnsupportedFeature(
                        "multi-fragment SMILES ('.')".into(),
                    ))
                }
                b'*' => return Err(Error::UnsupportedFeature("wildcard atom '*'".into())),
                b'0'..=b'9' | b'%' => self.ring_closure()?,
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.add_atom(atom, start)?;
                }
                _ => {
                    let atom = self.organic_atom()?;
                    self.add_atom(atom, start)?;
                }
            }
        }
        if !self.branch_stack.is_empty() {
            return Err(syntax(self.pos, "unclosed '('"));
        }
        if let Some((_, pos)) = self.pending_bond {
            return Err(syntax(pos, "dangling bond symbol"));
        }
        if let Some((d, r)) = self.rings.iter().next() {
            return Err(syntax(r.pos, format!("unclosed ring bond {d}")));
        }
        Ok(())
    }

    fn add_atom(&mut self, atom: Atom, pos: usize) -> Result<()> {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        if let Some(p) = self.prev {
            let explicit = self.pending_bond.take().map(|(o, _)| o);
            self.push_bond(p, idx, explicit, pos)?;
        } else if let Some((_, bpos)) = self.pending_bond {
            return Err(syntax(bpos, "bond symbol before first atom"));
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn push_bond(
        &mut self,
        a: usize,
        b: usize,
        explicit: Option<BondOrder>,
        pos: usize,
    ) -> Result<()> {
        if a == b {
            return Err(syntax(pos, "ring closure to the same atom"));
        }
        if self
            .bonds
            .iter()
            .any(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a))
        {
            return Err(syntax(pos, "duplicate bond"));
        }
        let both_aromatic = self.atoms[a].aromatic && self.atoms[b].aromatic;
        let (order, implied_aromatic) = match explicit {
            Some(o) => (o, false),
            None if both_aromatic => (BondOrder::Aromatic, true),
            None => (BondOrder::Single, false),
        };
        self.bonds.push(RawBond {
            a,
            b,
            order,
            implied_aromatic,
        });
        Ok(())
    }

    fn ring_closure(&mut self) -> Result<()> {
        let start = self.pos;
        let digit = if self.s[self.pos] == b'%' {
            let d = self
                .s
                .get(self.pos + 1..self.pos + 3)
                .ok_or_else(|| syntax(start, "truncated %nn"))?;
            if !d.iter().all(u8::is_ascii_digit) {
                return Err(syntax(start, "malformed %nn ring bond"));
            }
            self.pos += 3;
            ((d[0] - b'0') * 10 + (d[1] - b'0')) as u32
        } else {
            self.pos += 1;
            (self.s[start] - b'0') as u32
        };
        let Some(cur) = self.prev else {
            return Err(syntax(start, "ring bond before any atom"));
        };
        let order = self.pending_bond.take().map(|(o, _)| o);
        match self.rings.remove(&digit) {
            Some(open) => {
                let explicit = match (open.order, order) {
                    (Some(x), Some(y)) if x != y => {
                        return Err(syntax(start, "conflicting ring bond orders"))
                    }
                    (Some(x), _) | (None, Some(x)) => Some(x),
                    (None, None) => None,
                };
                self.push_bond(open.atom, cur, explicit, start)?;
            }
            None => {
                self.rings.insert(
                    digit,
                    PendingRing {
                        atom: cur,
                        order,
                        pos: start,
                    },
                );
            }
        }
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<Atom> {
        let start = self.pos;
        let c = self.s[self.pos];
        let next = self.s.get(self.pos + 1).copied();
        let (element, aromatic, len) = match (c, next) {
            (b'C', Some(b'l')) => (Element::Cl, false, 2),
            (b'B', Some(b'r')) => (Element::Br, false, 2),
            (b'C', _) => (Element::C, false, 1),
            (b'N', _) => (Element::N, false, 1),
            (b'O', _) => (Element::O, false, 1),
            (b'S', _) => (Element::S, false, 1),
            (b'P', _) => (Element::P, false, 1),
            (b'F', _) => (Element::F, false, 1),
            (b'I', _) => (Element::I, false, 1),
            (b'c', _) => (Element::C, true, 1),
            (b'n', _) => (Element::N, true, 1),
            (b'o', _) => (Element::O, true, 1),
            (b's', _) => (Element::S, true, 1),
            (b'p', _) => (Element::P, true, 1),
            (b'B' | b'b', _) => return Err(Error::UnsupportedFeature("element B".into())),
            _ => {
                return Err(syntax(
                    start,
                    format!("unexpected character '{}'", c as char),
                ))
            }
        };
        self.pos += len;
        Ok(Atom {
            element,
            charge: 0,
            aromatic,
        })
    }

    fn bracket_atom(&mut self) -> Result<Atom> {
        let start = self.pos;
        self.pos += 1;
        if matches!(self.peek(), Some(b'0'..=b'9')) {
            return Err(Error::UnsupportedFeature("isotope label".into()));
        }
        let c = self
            .peek()
            .ok_or_else(|| syntax(start, "unterminated '['"))?;
        if c == b'*' {
            return Err(Error::UnsupportedFeature("wildcard atom '*'".into()));
        }
        let (element, aromatic) = if c.is_ascii_lowercase() {
            self.pos += 1;
            // two-letter aromatic symbols (se, as) are outside the element set
            if let Some(n) = self.peek() {
                if n.is_ascii_lowercase() {
                    return Err(Error::UnsupportedFeature(format!(
                        "element {}{}",
                        c as char, n as char
                    )));
                }
            }
            let sym = (c.to_ascii_uppercase() as char).to_string();
            let e = Element::from_symbol(&sym)
                .filter(|e| e.can_be_aromatic())
                .ok_or_else(|| {
                    Error::UnsupportedFeature(format!("aromatic element {}", c as char))
                })?;
            (e, true)
        } else if c.is_ascii_uppercase() {
            self.pos += 1;
            let mut sym = (c as char).to_string();
            if let Some(n) = self.peek() {
                if n.is_ascii_lowercase() {
                    sym.push(n as char);
                    self.pos += 1;
                }
            }
            let e = Element::from_symbol(&sym)
                .ok_or_else(|| Error::UnsupportedFeature(format!("element {sym}")))?;
            (e, false)
        } else {
            return Err(syntax(self.pos, "expected element symbol"));
        };
        // chirality
        while self.peek() == Some(b'@') {
            self.pos += 1;
        }
        // hydrogen count (discarded)
        if self.peek() == Some(b'H') {
            self.pos += 1;
            while matches!(self.peek(), Some(b'0'..=b'9')) {
                self.pos += 1;
            }
        }
        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(d @ b'0'..=b'9') = self.peek() {
                charge = unit * (d - b'0') as i32;
                self.pos += 1;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    charge += unit;
                    self.pos += 1;
                }
            }
        }
        match self.peek() {
            Some(b']') => self.pos += 1,
            Some(b':') => return Err(Error::UnsupportedFeature("atom class".into())),
            Some(_) => return Err(syntax(self.pos, "unexpected character in bracket atom")),
            None => return Err(syntax(start, "unterminated '['")),
        }
        if !(-2..=2).contains(&charge) {
            return Err(Error::UnsupportedFeature(format!("charge {charge}")));
        }
        Ok(Atom {
            element,
            charge: charge as i8,
            aromatic,
        })
    }

    fn finish(self) -> (Vec<Atom>, Vec<Bond>) {
        let atoms = self.atoms;
        let mut bonds: Vec<Bond> = self
            .bonds
            .iter()
            .map(|b| Bond::new(b.a, b.b, b.order))
            .collect();
        // An implied bond between aromatic atoms that is not on any cycle
        // (e.g. a biaryl link) is single.
        if self.bonds.iter().any(|b| b.implied_aromatic) {
            if let Ok(g) = MolGraph::from_parts_unchecked(atoms.clone(), bonds.clone()) {
                let bridges = g.bridges();
                for (i, raw) in self.bonds.iter().enumerate() {
                    if raw.implied_aromatic && bridges[i] {
                        bonds[i].order = BondOrder::Single;
                    }
                }
            }
        }
        (atoms, bonds)
    }
}
