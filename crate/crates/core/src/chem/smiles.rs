//! SMILES reader.
//!
//! Covers the subset used by drug datasets: organic-subset and bracket atoms,
//! lowercase aromatics, branches, ring closures (`1`-`9`, `%nn`), the bond
//! symbols `- = # : / \` and `.` for disconnected components. Stereo marks
//! and isotopes are read and dropped; aromaticity is taken from the letter case.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::elements::{self, AROMATIC_BRACKET, AROMATIC_ORGANIC, ORGANIC_SUBSET};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Bond-order contribution in units of half a bond.
    fn half_units(self) -> u32 {
        match self {
            BondOrder::Single => 2,
            BondOrder::Double => 4,
            BondOrder::Triple => 6,
            BondOrder::Aromatic => 3,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            BondOrder::Single => '-',
            BondOrder::Double => '=',
            BondOrder::Triple => '#',
            BondOrder::Aromatic => ':',
        }
    }
}

impl fmt::Display for BondOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            BondOrder::Single => "single",
            BondOrder::Double => "double",
            BondOrder::Triple => "triple",
            BondOrder::Aromatic => "aromatic",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    /// Capitalized element symbol (`"C"` for both `C` and `c`).
    pub element: String,
    pub aromatic: bool,
    pub formal_charge: i32,
    /// Hydrogen count written inside a bracket atom.
    pub explicit_h: Option<u32>,
    /// Hydrogens filled from the default valence; zero for bracket atoms.
    pub implicit_h: u32,
}

impl Atom {
    pub fn organic(element: &str, aromatic: bool) -> Self {
        Self {
            element: element.to_string(),
            aromatic,
            formal_charge: 0,
            explicit_h: None,
            implicit_h: 0,
        }
    }

    pub fn total_h(&self) -> u32 {
        self.explicit_h.unwrap_or(self.implicit_h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn connects(&self, x: usize, y: usize) -> bool {
        (self.a == x && self.b == y) || (self.a == y && self.b == x)
    }
}

/// Undirected molecular graph; each bond is stored once.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MolGraph {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
}

impl MolGraph {
    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.bonds
            .iter()
            .filter(|b| b.a == atom || b.b == atom)
            .count()
    }

    pub fn neighbors(&self, atom: usize) -> impl Iterator<Item = usize> + '_ {
        self.bonds.iter().filter_map(move |b| {
            if b.a == atom {
                Some(b.b)
            } else if b.b == atom {
                Some(b.a)
            } else {
                None
            }
        })
    }

    pub fn has_bond(&self, x: usize, y: usize) -> bool {
        self.bonds.iter().any(|b| b.connects(x, y))
    }

    /// Adds a bond after checking the endpoints are distinct, in range and not
    /// already bonded.
    pub fn add_bond(&mut self, a: usize, b: usize, order: BondOrder) -> Result<(), BondError> {
        let n = self.atoms.len();
        if a == b {
            return Err(BondError::SelfLoop(a));
        }
        if a >= n || b >= n {
            return Err(BondError::OutOfRange { a, b, atoms: n });
        }
        if self.has_bond(a, b) {
            return Err(BondError::Duplicate(a, b));
        }
        self.bonds.push(Bond { a, b, order });
        Ok(())
    }

    /// Connected components as sorted atom index lists, ordered by first atom.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut label = vec![usize::MAX; n];
        let mut out = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut stack = vec![start];
            let mut members = Vec::new();
            label[start] = id;
            while let Some(v) = stack.pop() {
                members.push(v);
                for w in self.neighbors(v) {
                    if label[w] == usize::MAX {
                        label[w] = id;
                        stack.push(w);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// Recomputes `implicit_h` for every atom without an explicit hydrogen count.
    pub fn fill_implicit_hydrogens(&mut self) {
        let mut half_units = vec![0u32; self.atoms.len()];
        for bond in &self.bonds {
            half_units[bond.a] += bond.order.half_units();
            half_units[bond.b] += bond.order.half_units();
        }
        for (atom, units) in self.atoms.iter_mut().zip(half_units) {
            atom.implicit_h = match (atom.explicit_h, elements::default_valence(&atom.element)) {
                (None, Some(valence)) => valence.saturating_sub(units / 2),
                _ => 0,
            };
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BondError {
    #[error("atom {0} bonded to itself")]
    SelfLoop(usize),
    #[error("bond {a}-{b} out of range for {atoms} atoms")]
    OutOfRange { a: usize, b: usize, atoms: usize },
    #[error("duplicate bond between atoms {0} and {1}")]
    Duplicate(usize, usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SmilesErrorKind {
    #[error("empty SMILES")]
    Empty,
    #[error("unclosed ring closure {0}")]
    UnclosedRing(u16),
    #[error("unbalanced parentheses")]
    UnbalancedParentheses,
    #[error("empty branch")]
    EmptyBranch,
    #[error("unknown element '{0}'")]
    UnknownElement(String),
    #[error("dangling bond symbol '{0}'")]
    DanglingBond(char),
    #[error("empty bracket atom")]
    EmptyBracket,
    #[error("unterminated bracket atom")]
    UnterminatedBracket,
    #[error("malformed bracket atom: {0}")]
    MalformedBracket(String),
    #[error("ring closure {0} has conflicting bond symbols")]
    RingBondConflict(u16),
    #[error("ring closure {0} without a preceding atom")]
    RingWithoutAtom(u16),
    #[error("{0}")]
    Bond(#[from] BondError),
    #[error("unexpected character '{0}'")]
    Unexpected(char),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{kind} at byte {offset}")]
pub struct SmilesError {
    pub offset: usize,
    pub kind: SmilesErrorKind,
}

impl SmilesError {
    fn new(offset: usize, kind: SmilesErrorKind) -> Self {
        Self { offset, kind }
    }
}

struct OpenRing {
    atom: usize,
    bond: Option<BondOrder>,
    offset: usize,
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    graph: MolGraph,
    prev: Option<usize>,
    branches: Vec<(Option<usize>, usize)>,
    pending: Option<(BondOrder, char, usize)>,
    rings: BTreeMap<u16, OpenRing>,
    /// True right after '(' so that "()" can be rejected.
    branch_opened: bool,
}

/// Parses one SMILES string into a molecular graph with implicit hydrogens filled.
pub fn parse_smiles(text: &str) -> Result<MolGraph, SmilesError> {
    if text.trim().is_empty() {
        return Err(SmilesError::new(0, SmilesErrorKind::Empty));
    }
    let mut parser = Parser {
        text: text.as_bytes(),
        pos: 0,
        graph: MolGraph::default(),
        prev: None,
        branches: Vec::new(),
        pending: None,
        rings: BTreeMap::new(),
        branch_opened: false,
    };
    parser.run()?;
    let mut graph = parser.graph;
    graph.fill_implicit_hydrogens();
    Ok(graph)
}

impl Parser<'_> {
    fn err(&self, offset: usize, kind: SmilesErrorKind) -> SmilesError {
        SmilesError::new(offset, kind)
    }

    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn run(&mut self) -> Result<(), SmilesError> {
        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'(' => {
                    if self.prev.is_none() {
                        return Err(self.err(start, SmilesErrorKind::Unexpected('(')));
                    }
                    if let Some((_, sym, at)) = self.pending {
                        return Err(self.err(at, SmilesErrorKind::DanglingBond(sym)));
                    }
                    self.branches.push((self.prev, start));
                    self.branch_opened = true;
                    self.pos += 1;
                    continue;
                }
                b')' => {
                    if let Some((_, sym, at)) = self.pending {
                        return Err(self.err(at, SmilesErrorKind::DanglingBond(sym)));
                    }
                    if self.branch_opened {
                        return Err(self.err(start, SmilesErrorKind::EmptyBranch));
                    }
                    let (prev, _) = self
                        .branches
                        .pop()
                        .ok_or_else(|| self.err(start, SmilesErrorKind::UnbalancedParentheses))?;
                    self.prev = prev;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    let order = match c {
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        b':' => BondOrder::Aromatic,
                        _ => BondOrder::Single,
                    };
                    if self.pending.is_some() || self.prev.is_none() {
                        return Err(self.err(start, SmilesErrorKind::DanglingBond(c as char)));
                    }
                    self.pending = Some((order, c as char, start));
                    self.pos += 1;
                    continue;
                }
                b'.' => {
                    if let Some((_, sym, at)) = self.pending {
                        return Err(self.err(at, SmilesErrorKind::DanglingBond(sym)));
                    }
                    if self.prev.is_none() {
                        return Err(self.err(start, SmilesErrorKind::Unexpected('.')));
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => self.ring_closure()?,
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.attach(atom, start)?;
                }
                _ => {
                    let atom = self.organic_atom()?;
                    self.attach(atom, start)?;
                }
            }
            self.branch_opened = false;
        }

        let end = self.text.len();
        if let Some((_, sym, at)) = self.pending {
            return Err(self.err(at, SmilesErrorKind::DanglingBond(sym)));
        }
        if let Some(&(_, at)) = self.branches.last() {
            return Err(self.err(at, SmilesErrorKind::UnbalancedParentheses));
        }
        if let Some((&digit, ring)) = self.rings.iter().next() {
            return Err(self.err(ring.offset, SmilesErrorKind::UnclosedRing(digit)));
        }
        if self.graph.atoms.is_empty() {
            return Err(self.err(end, SmilesErrorKind::Empty));
        }
        Ok(())
    }

    fn default_order(&self, a: usize, b: usize) -> BondOrder {
        if self.graph.atoms[a].aromatic && self.graph.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn attach(&mut self, atom: Atom, offset: usize) -> Result<(), SmilesError> {
        self.graph.atoms.push(atom);
        let idx = self.graph.atoms.len() - 1;
        if let Some(prev) = self.prev {
            let order = match self.pending.take() {
                Some((order, _, _)) => order,
                None => self.default_order(prev, idx),
            };
            self.graph
                .add_bond(prev, idx, order)
                .map_err(|e| self.err(offset, e.into()))?;
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn ring_closure(&mut self) -> Result<(), SmilesError> {
        let start = self.pos;
        let digit = if self.text[start] == b'%' {
            let digits = self.text.get(start + 1..start + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    ((d[0] - b'0') * 10 + (d[1] - b'0')) as u16
                }
                _ => return Err(self.err(start, SmilesErrorKind::Unexpected('%'))),
            }
        } else {
            self.pos += 1;
            (self.text[start] - b'0') as u16
        };
        let Some(atom) = self.prev else {
            return Err(self.err(start, SmilesErrorKind::RingWithoutAtom(digit)));
        };
        let bond = self.pending.take().map(|(order, _, _)| order);
        match self.rings.remove(&digit) {
            None => {
                self.rings.insert(
                    digit,
                    OpenRing {
                        atom,
                        bond,
                        offset: start,
                    },
                );
            }
            Some(open) => {
                let order = match (open.bond, bond) {
                    (Some(x), Some(y)) if x != y => {
                        return Err(self.err(start, SmilesErrorKind::RingBondConflict(digit)))
                    }
                    (Some(x), _) | (None, Some(x)) => x,
                    (None, None) => self.default_order(open.atom, atom),
                };
                self.graph
                    .add_bond(open.atom, atom, order)
                    .map_err(|e| self.err(start, e.into()))?;
            }
        }
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<Atom, SmilesError> {
        let start = self.pos;
        let rest = &self.text[start..];
        let c = rest[0];
        if !c.is_ascii_alphabetic() {
            let ch = std::str::from_utf8(rest)
                .ok()
                .and_then(|s| s.chars().next())
                .unwrap_or(c as char);
            return Err(self.err(start, SmilesErrorKind::Unexpected(ch)));
        }
        for two in ["Cl", "Br"] {
            if rest.starts_with(two.as_bytes()) {
                self.pos += 2;
                return Ok(Atom::organic(two, false));
            }
        }
        let one = (c as char).to_string();
        if let Some(&next) = rest.get(1) {
            let two = format!("{}{}", c as char, next as char);
            let aromatic_next = AROMATIC_ORGANIC.contains(&(next as char).to_string().as_str());
            if next.is_ascii_lowercase() && !aromatic_next && elements::is_element(&two) {
                return Err(self.err(start, SmilesErrorKind::UnknownElement(two)));
            }
        }
        self.pos += 1;
        if ORGANIC_SUBSET.contains(&one.as_str()) {
            return Ok(Atom::organic(&one, false));
        }
        if AROMATIC_ORGANIC.contains(&one.as_str()) {
            return Ok(Atom::organic(&one.to_ascii_uppercase(), true));
        }
        // Report the full symbol the user probably meant, e.g. "Na" or "Xy".
        let mut symbol = one;
        if let Some(&next) = self.text.get(self.pos) {
            if next.is_ascii_lowercase() && c.is_ascii_uppercase() {
                symbol.push(next as char);
            }
        }
        Err(self.err(start, SmilesErrorKind::UnknownElement(symbol)))
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        let open = self.pos;
        let close = self.text[open..]
            .iter()
            .position(|&b| b == b']')
            .map(|p| open + p)
            .ok_or_else(|| self.err(open, SmilesErrorKind::UnterminatedBracket))?;
        let body = &self.text[open + 1..close];
        self.pos = close + 1;
        if body.is_empty() {
            return Err(self.err(open, SmilesErrorKind::EmptyBracket));
        }
        let malformed = |what: &str| {
            SmilesError::new(open, SmilesErrorKind::MalformedBracket(what.to_string()))
        };

        let mut i = 0;
        // isotope
        while i < body.len() && body[i].is_ascii_digit() {
            i += 1;
        }
        // element
        let sym_start = i;
        let (element, aromatic) = match body.get(i) {
            Some(c) if c.is_ascii_uppercase() => {
                let two = body
                    .get(i..i + 2)
                    .filter(|s| s[1].is_ascii_lowercase())
                    .and_then(|s| std::str::from_utf8(s).ok())
                    .filter(|s| elements::is_element(s));
                match two {
                    Some(sym) => {
                        i += 2;
                        (sym.to_string(), false)
                    }
                    None => {
                        let sym = (*c as char).to_string();
                        i += 1;
                        if !elements::is_element(&sym) {
                            let mut shown = sym;
                            if let Some(&n) = body.get(i).filter(|n| n.is_ascii_lowercase()) {
                                shown.push(n as char);
                            }
                            return Err(self.err(
                                open + 1 + sym_start,
                                SmilesErrorKind::UnknownElement(shown),
                            ));
                        }
                        (sym, false)
                    }
                }
            }
            Some(c) if c.is_ascii_lowercase() => {
                let two = body
                    .get(i..i + 2)
                    .and_then(|s| std::str::from_utf8(s).ok())
                    .filter(|s| AROMATIC_BRACKET.contains(s));
                let sym = match two {
                    Some(s) => s.to_string(),
                    None => {
                        let s = (*c as char).to_string();
                        if !AROMATIC_BRACKET.contains(&s.as_str()) {
                            return Err(
                                self.err(open + 1 + sym_start, SmilesErrorKind::UnknownElement(s))
                            );
                        }
                        s
                    }
                };
                i += sym.len();
                let mut chars = sym.chars();
                let cap: String = chars
                    .next()
                    .map(|f| f.to_ascii_uppercase())
                    .into_iter()
                    .chain(chars)
                    .collect();
                (cap, true)
            }
            _ => return Err(malformed("missing element symbol")),
        };
        // chirality
        if body.get(i) == Some(&b'@') {
            i += 1;
            if body.get(i) == Some(&b'@') {
                i += 1;
            } else if let Some(class) = body.get(i..i + 2) {
                if [b"TH", b"AL", b"SP", b"TB", b"OH"]
                    .iter()
                    .any(|c| c.as_slice() == class)
                {
                    i += 2;
                    while i < body.len() && body[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
        }
        // hydrogens
        let mut explicit_h = 0u32;
        if body.get(i) == Some(&b'H') {
            i += 1;
            explicit_h = 1;
            let digits_start = i;
            while i < body.len() && body[i].is_ascii_digit() {
                i += 1;
            }
            if i > digits_start {
                explicit_h = parse_number(&body[digits_start..i])
                    .ok_or_else(|| malformed("hydrogen count"))?;
            }
        }
        // charge
        let mut charge = 0i32;
        if let Some(&sign @ (b'+' | b'-')) = body.get(i) {
            let unit = if sign == b'+' { 1 } else { -1 };
            i += 1;
            let digits_start = i;
            while i < body.len() && body[i].is_ascii_digit() {
                i += 1;
            }
            if i > digits_start {
                let n = parse_number(&body[digits_start..i]).ok_or_else(|| malformed("charge"))?;
                charge = unit * n as i32;
            } else {
                charge = unit;
                while body.get(i) == Some(&sign) {
                    charge += unit;
                    i += 1;
                }
            }
        }
        // atom class
        if body.get(i) == Some(&b':') {
            i += 1;
            let digits_start = i;
            while i < body.len() && body[i].is_ascii_digit() {
                i += 1;
            }
            if i == digits_start {
                return Err(malformed("atom class"));
            }
        }
        if i != body.len() {
            let rest = String::from_utf8_lossy(&body[i..]).into_owned();
            return Err(malformed(&format!("trailing '{rest}'")));
        }
        Ok(Atom {
            element,
            aromatic,
            formal_charge: charge,
            explicit_h: Some(explicit_h),
            implicit_h: 0,
        })
    }
}

fn parse_number(digits: &[u8]) -> Option<u32> {
    std::str::from_utf8(digits).ok()?.parse().ok()
}
