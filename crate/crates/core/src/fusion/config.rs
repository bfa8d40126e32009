use std::fmt;
use std::str::FromStr;

use super::FusionError;
use crate::chem::DRUG_FEATURE_DIM;

/// Which architecture to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModelKind {
    /// Drug vector joins the protein graph as an attention-wired node.
    #[default]
    Gefa,
    /// Drug and protein encoded separately, joined only at the regression head.
    Glfa,
}

impl FromStr for ModelKind {
    type Err = FusionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gefa" => Ok(Self::Gefa),
            "glfa" => Ok(Self::Glfa),
            other => Err(FusionError::Config(format!("unknown model '{other}'"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gefa => "gefa",
            Self::Glfa => "glfa",
        })
    }
}

/// Weights on the drug–residue edges of the fused graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdgeWeighting {
    /// Learned self-attention over residues.
    #[default]
    Attention,
    /// Every drug–residue edge weighs 1, like a residue–residue edge.
    Uniform,
    /// Every drug–residue edge weighs 0; the fused pass reduces to late fusion.
    Zero,
}

/// Drug vector fed to the regression head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DrugRepresentation {
    /// Transformed drug vector from before fusion only.
    Before,
    /// Refined drug node from the fused graph only.
    After,
    /// Channel-wise max of both.
    #[default]
    Combined,
}

impl FromStr for DrugRepresentation {
    type Err = FusionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "before" => Ok(Self::Before),
            "after" => Ok(Self::After),
            "combined" => Ok(Self::Combined),
            other => Err(FusionError::Config(format!(
                "unknown drug representation '{other}'"
            ))),
        }
    }
}

impl fmt::Display for DrugRepresentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Before => "before",
            Self::After => "after",
            Self::Combined => "combined",
        })
    }
}

/// Component switches. The default is the full early-fusion model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ablation {
    pub edges: EdgeWeighting,
    /// Two GCN layers before the residual block.
    pub gcn_layers: bool,
    pub residual_drug: bool,
    /// Residual block on the protein (or fused) graph.
    pub residual_protein: bool,
    pub drug_rep: DrugRepresentation,
    /// Feed the residual block the raw adjacency instead of the normalized one.
    pub residual_raw_adjacency: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Self {
            edges: EdgeWeighting::Attention,
            gcn_layers: true,
            residual_drug: true,
            residual_protein: true,
            drug_rep: DrugRepresentation::Combined,
            residual_raw_adjacency: false,
        }
    }
}

impl Ablation {
    /// Applies flags such as `no-attention`, `no-gcn2`, `no-res-drug`,
    /// `no-res-protein`, `drug-rep=before` or `residual-raw-adjacency`.
    /// Leading dashes are ignored.
    pub fn from_flags<S: AsRef<str>>(flags: &[S]) -> Result<Self, FusionError> {
        let mut out = Self::default();
        for flag in flags {
            out.apply_flag(flag.as_ref())?;
        }
        Ok(out)
    }

    pub fn apply_flag(&mut self, flag: &str) -> Result<(), FusionError> {
        let flag = flag.trim_start_matches('-');
        match flag.split_once('=') {
            Some(("drug-rep", value)) => self.drug_rep = value.parse()?,
            Some(_) => {
                return Err(FusionError::Config(format!(
                    "unknown ablation flag '{flag}'"
                )))
            }
            None => match flag {
                "no-attention" => self.edges = EdgeWeighting::Uniform,
                "zero-edges" => self.edges = EdgeWeighting::Zero,
                "no-gcn2" => self.gcn_layers = false,
                "no-res-drug" => self.residual_drug = false,
                "no-res-protein" => self.residual_protein = false,
                "residual-raw-adjacency" => self.residual_raw_adjacency = true,
                other => {
                    return Err(FusionError::Config(format!(
                        "unknown ablation flag '{other}'"
                    )))
                }
            },
        }
        Ok(())
    }
}

/// Layer widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub drug_in: usize,
    pub protein_in: usize,
    /// Width of every node state after input projection, and of the pooled
    /// drug and protein vectors.
    pub hidden: usize,
    /// Inner width of the attention scorer.
    pub attention: usize,
    pub predictor: [usize; 2],
    /// Applications of each shared-weight residual block.
    pub residual_repeat: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            drug_in: DRUG_FEATURE_DIM,
            protein_in: 768 + 6,
            hidden: 128,
            attention: 64,
            predictor: [512, 128],
            residual_repeat: 4,
        }
    }
}

impl ModelDims {
    /// Small widths for fast tests and desk-scale experiments.
    pub fn small(protein_in: usize) -> Self {
        Self {
            drug_in: DRUG_FEATURE_DIM,
            protein_in,
            hidden: 8,
            attention: 4,
            predictor: [16, 8],
            residual_repeat: 2,
        }
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        let all = [
            self.drug_in,
            self.protein_in,
            self.hidden,
            self.attention,
            self.predictor[0],
            self.predictor[1],
            self.residual_repeat,
        ];
        if all.contains(&0) {
            return Err(FusionError::Config(format!(
                "model dimensions must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub dims: ModelDims,
    pub ablation: Ablation,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_flags_are_full_model() {
        let a = Ablation::from_flags::<&str>(&[]).unwrap();
        assert_eq!(a, Ablation::default());
        assert_eq!(a.edges, EdgeWeighting::Attention);
        assert_eq!(a.drug_rep, DrugRepresentation::Combined);
    }

    #[test]
    fn flags_toggle_components() {
        let a = Ablation::from_flags(&[
            "--no-attention",
            "--no-gcn2",
            "no-res-drug",
            "--drug-rep=before",
        ])
        .unwrap();
        assert_eq!(a.edges, EdgeWeighting::Uniform);
        assert!(!a.gcn_layers);
        assert!(!a.residual_drug);
        assert!(a.residual_protein);
        assert_eq!(a.drug_rep, DrugRepresentation::Before);
    }

    #[test]
    fn unknown_flag_rejected() {
        assert!(Ablation::from_flags(&["--no-such-thing"]).is_err());
        assert!(Ablation::from_flags(&["--drug-rep=sideways"]).is_err());
        assert!(Ablation::from_flags(&["--foo=bar"]).is_err());
    }

    #[test]
    fn default_dims() {
        let d = ModelDims::default();
        assert_eq!(d.protein_in, 774);
        assert_eq!(d.drug_in, 78);
        assert_eq!(2 * d.hidden, 256);
        assert_eq!(d.predictor, [512, 128]);
    }
}
