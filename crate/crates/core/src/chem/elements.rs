/// Every element symbol of the periodic table, in atomic-number order.
pub const PERIODIC_TABLE: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

/// Atom-symbol vocabulary for the one-hot encoding. The last slot collects
/// every other element.
pub const ATOM_VOCABULARY: [&str; 44] = [
    "C", "N", "O", "S", "F", "Si", "P", "Cl", "Br", "Mg", "Na", "Ca", "Fe", "As", "Al", "I", "B",
    "V", "K", "Tl", "Yb", "Sb", "Sn", "Ag", "Pd", "Co", "Se", "Ti", "Zn", "H", "Li", "Ge", "Cu",
    "Au", "Ni", "Cd", "In", "Mn", "Zr", "Cr", "Pt", "Hg", "Pb", "Unknown",
];

/// Elements that may appear outside brackets.
pub const ORGANIC_SUBSET: [&str; 10] = ["B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"];

/// Lowercase aromatic symbols accepted outside brackets.
pub const AROMATIC_ORGANIC: [&str; 6] = ["b", "c", "n", "o", "p", "s"];

/// Lowercase aromatic symbols accepted inside brackets.
pub const AROMATIC_BRACKET: [&str; 8] = ["b", "c", "n", "o", "p", "s", "se", "as"];

pub fn is_element(symbol: &str) -> bool {
    PERIODIC_TABLE.contains(&symbol)
}

/// Slot of `symbol` in [`ATOM_VOCABULARY`]; other real elements map to the
/// catch-all slot.
pub fn vocabulary_index(symbol: &str) -> Option<usize> {
    if let Some(i) = ATOM_VOCABULARY[..ATOM_VOCABULARY.len() - 1]
        .iter()
        .position(|&s| s == symbol)
    {
        return Some(i);
    }
    is_element(symbol).then_some(ATOM_VOCABULARY.len() - 1)
}

/// Default valence used to fill implicit hydrogens.
pub fn default_valence(symbol: &str) -> Option<u32> {
    match symbol {
        "B" => Some(3),
        "C" => Some(4),
        "N" | "P" => Some(3),
        "O" | "S" => Some(2),
        "F" | "Cl" | "Br" | "I" => Some(1),
        _ => None,
    }
}

/// Valence after accounting for a formal charge: boron gains a bond per
/// negative charge, carbon loses one per unit of either sign, and the
/// electron-rich elements gain one per positive charge.
pub fn charged_valence(symbol: &str, charge: i32) -> Option<u32> {
    let base = default_valence(symbol)? as i32;
    let v = match symbol {
        "B" => base - charge,
        "C" => base - charge.abs(),
        _ => base + charge,
    };
    Some(v.max(0) as u32)
}
