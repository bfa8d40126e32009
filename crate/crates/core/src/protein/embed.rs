use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Twenty standard amino acids followed by the unknown bucket `X`.
pub const RESIDUE_ALPHABET: &str = "ACDEFGHIKLMNPQRSTVWYX";

pub const ONE_HOT_DIM: usize = 21;

const UNKNOWN: usize = 20;
const BOUNDARY: usize = 21;
const SEED_SALT: u64 = 0x6765_6661_656d_6264;

/// How residue embeddings are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingMode {
    /// Precomputed vectors read from `features.tsv`.
    File,
    /// Deterministic context hash, see [`fallback_embed`].
    Fallback,
    /// 21-dimensional residue identity.
    OneHot,
}

impl std::str::FromStr for EmbeddingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "file" => Ok(Self::File),
            "fallback" => Ok(Self::Fallback),
            "one-hot" | "onehot" => Ok(Self::OneHot),
            other => Err(format!("unknown embedding mode '{other}'")),
        }
    }
}

impl std::fmt::Display for EmbeddingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::File => "file",
            Self::Fallback => "fallback",
            Self::OneHot => "one-hot",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSequence {
    pub rows: Vec<Vec<f64>>,
    /// Positions whose letter was outside the alphabet and mapped to `X`.
    pub unknown_positions: Vec<usize>,
}

pub fn residue_index(c: char) -> Option<usize> {
    RESIDUE_ALPHABET.find(c.to_ascii_uppercase())
}

fn codes(sequence: &str) -> (Vec<usize>, Vec<usize>) {
    let mut unknown = Vec::new();
    let codes = sequence
        .chars()
        .enumerate()
        .map(|(i, c)| {
            residue_index(c).unwrap_or_else(|| {
                log::warn!("residue '{c}' at position {i} mapped to X");
                unknown.push(i);
                UNKNOWN
            })
        })
        .collect();
    (codes, unknown)
}

/// Unit-norm vector per residue seeded by `(residue, left neighbor, right neighbor)`.
/// Stands in for a learned language-model embedding; output depends only on the
/// sequence and `dim`.
pub fn fallback_embed(sequence: &str, dim: usize) -> EmbeddedSequence {
    let (codes, unknown_positions) = codes(sequence);
    let rows = (0..codes.len())
        .map(|i| {
            let left = if i == 0 { BOUNDARY } else { codes[i - 1] };
            let right = codes.get(i + 1).copied().unwrap_or(BOUNDARY);
            let key = ((codes[i] * 22 + left) * 22 + right) as u64;
            let mut rng =
                ChaCha8Rng::seed_from_u64(SEED_SALT ^ key.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
            v
        })
        .collect();
    EmbeddedSequence {
        rows,
        unknown_positions,
    }
}

pub fn one_hot_embed(sequence: &str) -> EmbeddedSequence {
    let (codes, unknown_positions) = codes(sequence);
    let rows = codes
        .into_iter()
        .map(|c| {
            let mut v = vec![0.0; ONE_HOT_DIM];
            v[c] = 1.0;
            v
        })
        .collect();
    EmbeddedSequence {
        rows,
        unknown_positions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fallback_is_deterministic() {
        let a = fallback_embed("MKVLAAGIX", 16);
        let b = fallback_embed("MKVLAAGIX", 16);
        assert_eq!(a, b);
    }

    #[test]
    fn fallback_depends_on_context() {
        let e = fallback_embed("AAA", 8);
        assert_ne!(e.rows[1], e.rows[0]);
        assert_ne!(e.rows[1], e.rows[2]);
    }

    #[test]
    fn fallback_rows_are_unit_norm() {
        for row in fallback_embed("ACDEFGHIKLMNPQRSTVWY", 32).rows {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unknown_letters_use_x_bucket() {
        let e = fallback_embed("AZA", 4);
        assert_eq!(e.unknown_positions, vec![1]);
        assert_eq!(e.rows[1], fallback_embed("AXA", 4).rows[1]);
    }

    #[test]
    fn one_hot_rows() {
        let e = one_hot_embed("A");
        assert_eq!(e.rows[0].iter().sum::<f64>(), 1.0);
        assert_eq!(e.rows[0][0], 1.0);
        let e = one_hot_embed("AG");
        let hamming = e.rows[0]
            .iter()
            .zip(&e.rows[1])
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(hamming, 2);
        let dot: f64 = e.rows[0].iter().zip(&e.rows[1]).map(|(a, b)| a * b).sum();
        assert_eq!(dot, 0.0);
    }
}
