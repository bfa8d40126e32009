use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AffinityDataset, SplitError};

/// Which entities must not cross the train/validation/test boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Regime {
    /// Pairs are shuffled freely; drugs and targets recur across splits.
    #[default]
    Warm,
    /// Each unique protein sequence lands in exactly one split.
    ColdTarget,
    /// Each unique SMILES lands in exactly one split.
    ColdDrug,
    /// No drug and no target is shared between splits.
    ColdDrugTarget,
}

impl Regime {
    pub const ALL: [Regime; 4] = [
        Self::Warm,
        Self::ColdTarget,
        Self::ColdDrug,
        Self::ColdDrugTarget,
    ];

    pub fn is_cold(self) -> bool {
        self != Self::Warm
    }
}

impl FromStr for Regime {
    type Err = SplitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('_', "-").as_str() {
            "warm" => Ok(Self::Warm),
            "cold-target" => Ok(Self::ColdTarget),
            "cold-drug" => Ok(Self::ColdDrug),
            "cold-drug-target" => Ok(Self::ColdDrugTarget),
            _ => Err(SplitError::UnknownRegime(s.to_string())),
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Warm => "warm",
            Self::ColdTarget => "cold-target",
            Self::ColdDrug => "cold-drug",
            Self::ColdDrugTarget => "cold-drug-target",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub regime: Regime,
    /// Fraction of all keys held out for testing.
    pub test_fraction: f64,
    /// Fraction of the remaining keys held out for validation.
    pub val_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(regime: Regime, seed: u64) -> Self {
        Self {
            regime,
            test_fraction: 0.2,
            val_fraction: 0.2,
            seed,
        }
    }

    /// `(train, val, test)` key counts for `n` keys: each held-out part is
    /// the rounded fraction but at least one, and training keeps the rest.
    pub fn partition_sizes(&self, n: usize) -> Result<(usize, usize, usize), SplitError> {
        let test = ((self.test_fraction * n as f64).round() as usize).max(1);
        let rest = n.saturating_sub(test);
        let val = ((self.val_fraction * rest as f64).round() as usize).max(1);
        if rest <= val {
            return Err(SplitError::TooFewKeys {
                regime: self.regime,
                keys: n,
            });
        }
        Ok((rest - val, val, test))
    }
}

/// A pair left out of every split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exclusion {
    pub pair: usize,
    pub reason: String,
}

/// Pair indices of each part, ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub excluded: Vec<Exclusion>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn part(&self, part: Part) -> &[usize] {
        match part {
            Part::Train => &self.train,
            Part::Val => &self.val,
            Part::Test => &self.test,
        }
    }
}

impl FromStr for Part {
    type Err = SplitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Self::Train),
            "val" | "valid" | "validation" => Ok(Self::Val),
            "test" => Ok(Self::Test),
            other => Err(SplitError::UnknownPart(other.to_string())),
        }
    }
}

/// Shuffles `keys` and labels each with the part it falls into.
fn assign<K: Clone + Eq + std::hash::Hash>(
    keys: &[K],
    spec: &SplitSpec,
    rng: &mut ChaCha8Rng,
) -> Result<HashMap<K, Part>, SplitError> {
    let (train, val, _) = spec.partition_sizes(keys.len())?;
    let mut shuffled = keys.to_vec();
    shuffled.shuffle(rng);
    Ok(shuffled
        .into_iter()
        .enumerate()
        .map(|(i, k)| {
            let part = if i < train {
                Part::Train
            } else if i < train + val {
                Part::Val
            } else {
                Part::Test
            };
            (k, part)
        })
        .collect())
}

/// Unique values in first-seen order, plus for each id the canonical id
/// that first carried its value.
fn dedup<'a>(
    ids_values: impl Iterator<Item = (&'a str, &'a str)>,
) -> (Vec<&'a str>, HashMap<&'a str, &'a str>) {
    let mut first_by_value: HashMap<&str, &str> = HashMap::new();
    let mut unique = Vec::new();
    let mut canonical = HashMap::new();
    for (id, value) in ids_values {
        let first = *first_by_value.entry(value).or_insert_with(|| {
            unique.push(value);
            id
        });
        canonical.insert(id, first);
    }
    (unique, canonical)
}

/// Seeded split of the dataset's pairs under `spec.regime`.
///
/// Cold regimes key on sequence or SMILES, not on id. Among ids with the
/// same sequence (or SMILES) only the first listed is kept; pairs of the
/// others are excluded and logged. Under the drug-and-target regime, pairs
/// whose drug and target were assigned to different parts are excluded too.
pub fn make_split(dataset: &AffinityDataset, spec: &SplitSpec) -> Result<Split, SplitError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut split = Split::default();
    let place = |split: &mut Split, i: usize, part: Part| match part {
        Part::Train => split.train.push(i),
        Part::Val => split.val.push(i),
        Part::Test => split.test.push(i),
    };

    // Only entities that occur in some pair take part.
    let used_drugs: Vec<(&str, &str)> = dataset
        .drugs
        .iter()
        .filter(|(id, _)| dataset.pairs.iter().any(|p| &p.drug == *id))
        .map(|(id, s)| (id.as_str(), s.as_str()))
        .collect();
    let used_targets: Vec<(&str, &str)> = dataset
        .targets
        .iter()
        .filter(|(id, _)| dataset.pairs.iter().any(|p| &p.target == *id))
        .map(|(id, t)| (id.as_str(), t.sequence.as_str()))
        .collect();

    let (drug_keys, drug_canon) = dedup(used_drugs.iter().copied());
    let (target_keys, target_canon) = dedup(used_targets.iter().copied());
    let drug_smiles: HashMap<&str, &str> = used_drugs.iter().copied().collect();
    let target_seq: HashMap<&str, &str> = used_targets.iter().copied().collect();

    match spec.regime {
        Regime::Warm => {
            let keys: Vec<usize> = (0..dataset.pairs.len()).collect();
            let parts = assign(&keys, spec, &mut rng)?;
            for i in keys {
                place(&mut split, i, parts[&i]);
            }
        }
        Regime::ColdTarget | Regime::ColdDrug | Regime::ColdDrugTarget => {
            let drug_parts = match spec.regime {
                Regime::ColdTarget => None,
                _ => Some(assign(&drug_keys, spec, &mut rng)?),
            };
            let target_parts = match spec.regime {
                Regime::ColdDrug => None,
                _ => Some(assign(&target_keys, spec, &mut rng)?),
            };
            for (i, pair) in dataset.pairs.iter().enumerate() {
                let d = pair.drug.as_str();
                let t = pair.target.as_str();
                if drug_parts.is_some() && drug_canon[d] != d {
                    split.excluded.push(Exclusion {
                        pair: i,
                        reason: format!("drug {d} duplicates the SMILES of {}", drug_canon[d]),
                    });
                    continue;
                }
                if target_parts.is_some() && target_canon[t] != t {
                    split.excluded.push(Exclusion {
                        pair: i,
                        reason: format!(
                            "target {t} duplicates the sequence of {}",
                            target_canon[t]
                        ),
                    });
                    continue;
                }
                let dp = drug_parts.as_ref().map(|m| m[drug_smiles[d]]);
                let tp = target_parts.as_ref().map(|m| m[target_seq[t]]);
                match (dp, tp) {
                    (Some(a), Some(b)) if a != b => split.excluded.push(Exclusion {
                        pair: i,
                        reason: format!("drug {d} is in {a:?} but target {t} is in {b:?}"),
                    }),
                    (Some(p), _) | (None, Some(p)) => place(&mut split, i, p),
                    (None, None) => unreachable!("cold regimes assign at least one entity kind"),
                }
            }
        }
    }

    for (name, part) in [
        ("train", &split.train),
        ("validation", &split.val),
        ("test", &split.test),
    ] {
        if part.is_empty() {
            return Err(SplitError::EmptyPart {
                regime: spec.regime,
                part: name,
            });
        }
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    if !split.excluded.is_empty() {
        log::info!(
            "{} split excluded {} of {} pairs",
            spec.regime,
            split.excluded.len(),
            dataset.pairs.len()
        );
        for e in &split.excluded {
            log::debug!("excluded pair {}: {}", e.pair, e.reason);
        }
    }
    Ok(split)
}
