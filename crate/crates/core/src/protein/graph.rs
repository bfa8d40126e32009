use super::ProteinError;
use crate::numcore::Tensor;

/// Solvent accessibility bucket derived from a pACC score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SaClass {
    Buried,
    Medium,
    Exposed,
}

impl SaClass {
    pub fn one_hot(self) -> [f64; 3] {
        match self {
            SaClass::Buried => [1.0, 0.0, 0.0],
            SaClass::Medium => [0.0, 1.0, 0.0],
            SaClass::Exposed => [0.0, 0.0, 1.0],
        }
    }
}

/// Buckets a relative accessibility score: 0-10 buried, 11-40 medium, 41-100 exposed.
pub fn classify_sa(pacc: i64) -> Result<SaClass, ProteinError> {
    match pacc {
        0..=10 => Ok(SaClass::Buried),
        11..=40 => Ok(SaClass::Medium),
        41..=100 => Ok(SaClass::Exposed),
        _ => Err(ProteinError::PaccRange(pacc)),
    }
}

pub const SS3_TOLERANCE: f64 = 1e-6;

/// Per-residue input features before graph assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidueFeatures {
    pub embedding: Vec<f64>,
    /// Helix, sheet, coil probabilities.
    pub ss3: [f64; 3],
    pub sa: SaClass,
}

impl ResidueFeatures {
    pub fn new(embedding: Vec<f64>, ss3: [f64; 3], sa: SaClass) -> Result<Self, ProteinError> {
        let sum: f64 = ss3.iter().sum();
        if ss3.iter().any(|&p| p < 0.0 || !p.is_finite()) || (sum - 1.0).abs() > SS3_TOLERANCE {
            return Err(ProteinError::Ss3 { ss3 });
        }
        if embedding.iter().any(|v| !v.is_finite()) {
            return Err(ProteinError::NonFinite);
        }
        Ok(Self { embedding, ss3, sa })
    }

    pub fn width(&self) -> usize {
        self.embedding.len() + 6
    }
}

/// Binary symmetric residue contact matrix with an empty diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContactMap {
    size: usize,
    cells: Vec<bool>,
}

impl ContactMap {
    pub fn empty(size: usize) -> Self {
        Self {
            size,
            cells: vec![false; size * size],
        }
    }

    /// Validates a dense 0/1 matrix. Asymmetric input is rejected, not repaired.
    pub fn from_dense(rows: &[Vec<u8>]) -> Result<Self, ProteinError> {
        let size = rows.len();
        let mut map = Self::empty(size);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != size {
                return Err(ProteinError::ContactShape {
                    row: i,
                    expected: size,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => map.cells[i * size + j] = true,
                    other => return Err(ProteinError::NonBinaryContact { i, j, value: other }),
                }
            }
        }
        map.validate()?;
        Ok(map)
    }

    /// Builds a map from undirected `(i, j)` pairs; each pair sets both directions.
    pub fn from_edges(size: usize, edges: &[(usize, usize)]) -> Result<Self, ProteinError> {
        let mut map = Self::empty(size);
        for &(i, j) in edges {
            if i >= size || j >= size {
                return Err(ProteinError::ContactIndex { i, j, size });
            }
            if i == j {
                return Err(ProteinError::DiagonalContact(i));
            }
            map.cells[i * size + j] = true;
            map.cells[j * size + i] = true;
        }
        Ok(map)
    }

    fn validate(&self) -> Result<(), ProteinError> {
        let n = self.size;
        for i in 0..n {
            if self.cells[i * n + i] {
                return Err(ProteinError::DiagonalContact(i));
            }
            for j in i + 1..n {
                if self.cells[i * n + j] != self.cells[j * n + i] {
                    return Err(ProteinError::AsymmetricContact { i, j });
                }
            }
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.size + j]
    }
}

/// Residue graph: node features and symmetric 0/1 adjacency without self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct ProteinGraph {
    pub sequence: String,
    /// `L × (h_emb + 6)`: embedding, ss3, solvent-accessibility one-hot.
    pub node_features: Tensor,
    /// `L × L`: contacts plus backbone edges `(i, i+1)`.
    pub adjacency: Tensor,
}

impl ProteinGraph {
    pub fn len(&self) -> usize {
        self.adjacency.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature_dim(&self) -> usize {
        self.node_features.shape()[1]
    }

    /// Same protein with residues relabeled so new residue `i` is old residue `perm[i]`.
    /// The result is no longer a chain in index order; it is meant for
    /// equivariance checks.
    pub fn permuted(&self, perm: &[usize]) -> ProteinGraph {
        let chars: Vec<char> = self.sequence.chars().collect();
        ProteinGraph {
            sequence: perm.iter().map(|&p| chars[p]).collect(),
            node_features: self.node_features.permute_rows(perm).expect("perm length"),
            adjacency: self.adjacency.permute_square(perm).expect("perm length"),
        }
    }
}

/// Combines contacts with backbone edges and stacks residue feature rows.
pub fn build_protein_graph(
    sequence: &str,
    contacts: &ContactMap,
    features: &[ResidueFeatures],
) -> Result<ProteinGraph, ProteinError> {
    let len = sequence.chars().count();
    if len != contacts.size() || len != features.len() {
        return Err(ProteinError::LengthMismatch {
            sequence: len,
            contacts: contacts.size(),
            features: features.len(),
        });
    }
    if len == 0 {
        return Err(ProteinError::EmptyProtein);
    }
    let emb = features[0].embedding.len();
    if let Some((residue, f)) = features
        .iter()
        .enumerate()
        .find(|(_, f)| f.embedding.len() != emb)
    {
        return Err(ProteinError::EmbeddingWidth {
            residue,
            expected: emb,
            found: f.embedding.len(),
        });
    }

    let mut adjacency = Tensor::zeros(&[len, len]);
    let adj = adjacency.data_mut();
    for i in 0..len {
        for j in 0..len {
            if contacts.get(i, j) || i + 1 == j || j + 1 == i {
                adj[i * len + j] = 1.0;
            }
        }
    }

    let width = emb + 6;
    let mut data = Vec::with_capacity(len * width);
    for f in features {
        data.extend_from_slice(&f.embedding);
        data.extend_from_slice(&f.ss3);
        data.extend_from_slice(&f.sa.one_hot());
    }
    let node_features = Tensor::new(vec![len, width], data).expect("row width");
    Ok(ProteinGraph {
        sequence: sequence.to_string(),
        node_features,
        adjacency,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feats(n: usize, emb: usize) -> Vec<ResidueFeatures> {
        (0..n)
            .map(|i| {
                ResidueFeatures::new(vec![i as f64; emb], [0.2, 0.3, 0.5], SaClass::Medium).unwrap()
            })
            .collect()
    }

    #[test]
    fn sa_boundaries() {
        assert_eq!(classify_sa(5).unwrap(), SaClass::Buried);
        assert_eq!(classify_sa(10).unwrap(), SaClass::Buried);
        assert_eq!(classify_sa(11).unwrap(), SaClass::Medium);
        assert_eq!(classify_sa(40).unwrap(), SaClass::Medium);
        assert_eq!(classify_sa(41).unwrap(), SaClass::Exposed);
        assert_eq!(classify_sa(100).unwrap(), SaClass::Exposed);
        assert!(classify_sa(-1).is_err());
        assert!(classify_sa(101).is_err());
    }

    #[test]
    fn sa_is_monotone_with_two_changes() {
        let classes: Vec<SaClass> = (0..=100).map(|p| classify_sa(p).unwrap()).collect();
        assert!(classes.windows(2).all(|w| w[0] <= w[1]));
        let changes: Vec<i64> = (1..=100)
            .filter(|&p| classes[p as usize] != classes[p as usize - 1])
            .collect();
        assert_eq!(changes, vec![11, 41]);
    }

    #[test]
    fn ss3_must_be_a_distribution() {
        assert!(ResidueFeatures::new(vec![], [0.5, 0.5, 0.1], SaClass::Buried).is_err());
        assert!(ResidueFeatures::new(vec![], [1.2, -0.2, 0.0], SaClass::Buried).is_err());
        assert!(ResidueFeatures::new(vec![], [0.5, 0.5, 5e-7], SaClass::Buried).is_ok());
    }

    #[test]
    fn backbone_only_graph() {
        let g = build_protein_graph("ACD", &ContactMap::empty(3), &feats(3, 2)).unwrap();
        let expected = Tensor::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        assert_eq!(g.adjacency, expected);
    }

    #[test]
    fn contacts_are_added_symmetrically() {
        let map = ContactMap::from_edges(3, &[(0, 2)]).unwrap();
        let g = build_protein_graph("ACD", &map, &feats(3, 2)).unwrap();
        assert_eq!(g.adjacency.get2(0, 2), 1.0);
        assert_eq!(g.adjacency.get2(2, 0), 1.0);
        assert_eq!(g.adjacency.get2(1, 1), 0.0);
    }

    #[test]
    fn default_row_width() {
        let g = build_protein_graph("AC", &ContactMap::empty(2), &feats(2, 768)).unwrap();
        assert_eq!(g.feature_dim(), 774);
        assert_eq!(
            &g.node_features.row(1)[768..],
            &[0.2, 0.3, 0.5, 0.0, 1.0, 0.0]
        );
    }

    #[test]
    fn length_mismatch_names_all_lengths() {
        let err = build_protein_graph("ACDE", &ContactMap::empty(3), &feats(2, 1)).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains('4') && msg.contains('3') && msg.contains('2'),
            "{msg}"
        );
    }

    #[test]
    fn dense_contact_validation() {
        assert!(ContactMap::from_dense(&[vec![0, 1], vec![0, 0]]).is_err());
        assert!(ContactMap::from_dense(&[vec![1, 0], vec![0, 0]]).is_err());
        assert!(ContactMap::from_dense(&[vec![0, 2], vec![2, 0]]).is_err());
        assert!(ContactMap::from_dense(&[vec![0, 1], vec![1, 0]]).is_ok());
    }
}
