//! Per-target directory layout:
//!
//! * `sequence.txt`: the residue string on one line.
//! * `contact.tsv`: `L` lines of `L` whitespace-separated 0/1 values, or
//!   `contact_edges.tsv`: one `i<TAB>j` residue pair per line.
//! * `features.tsv`: `L` tab-separated lines of embedding reals, three ss3
//!   probabilities and an integer pACC. The embedding columns may be absent
//!   when embeddings are not read from file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{
    build_protein_graph, classify_sa, fallback_embed, one_hot_embed, ContactMap, EmbeddingMode,
    ProteinError, ProteinGraph, ResidueFeatures,
};

pub const SEQUENCE_FILE: &str = "sequence.txt";
pub const CONTACT_FILE: &str = "contact.tsv";
pub const CONTACT_EDGES_FILE: &str = "contact_edges.tsv";
pub const FEATURES_FILE: &str = "features.tsv";

/// One parsed `features.tsv` line.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureLine {
    pub embedding: Vec<f64>,
    pub ss3: [f64; 3],
    pub pacc: i64,
}

fn read(path: &Path) -> Result<String, ProteinError> {
    fs::read_to_string(path).map_err(|e| ProteinError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn parse_err(path: &Path, line: usize, reason: impl Into<String>) -> ProteinError {
    ProteinError::Parse {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

pub fn read_sequence(path: &Path) -> Result<String, ProteinError> {
    let text = read(path)?;
    let seq: String = text.trim().to_string();
    if seq.is_empty() || seq.contains(char::is_whitespace) {
        return Err(parse_err(path, 1, "expected a single residue string"));
    }
    Ok(seq)
}

pub fn parse_dense_contacts(path: &Path, text: &str) -> Result<ContactMap, ProteinError> {
    let mut rows = Vec::new();
    for (line_no, line) in content_lines(text) {
        let row = line
            .split_whitespace()
            .map(|tok| match tok {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                other => Err(parse_err(
                    path,
                    line_no,
                    format!("contact value '{other}' is not 0/1"),
                )),
            })
            .collect::<Result<Vec<u8>, _>>()?;
        rows.push(row);
    }
    ContactMap::from_dense(&rows)
}

pub fn parse_edge_contacts(
    path: &Path,
    text: &str,
    size: usize,
) -> Result<ContactMap, ProteinError> {
    let mut edges = Vec::new();
    for (line_no, line) in content_lines(text) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [i, j] = fields.as_slice() else {
            return Err(parse_err(path, line_no, "expected two residue indices"));
        };
        let i = i
            .parse()
            .map_err(|_| parse_err(path, line_no, format!("bad index '{i}'")))?;
        let j = j
            .parse()
            .map_err(|_| parse_err(path, line_no, format!("bad index '{j}'")))?;
        edges.push((i, j));
    }
    ContactMap::from_edges(size, &edges)
}

pub fn parse_feature_lines(path: &Path, text: &str) -> Result<Vec<FeatureLine>, ProteinError> {
    let mut out = Vec::new();
    for (line_no, line) in content_lines(text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 4 {
            return Err(parse_err(
                path,
                line_no,
                "expected ss3 probabilities and pACC",
            ));
        }
        let (reals, pacc) = fields.split_at(fields.len() - 1);
        let values = reals
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(path, line_no, format!("bad real '{f}'")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        let pacc = pacc[0]
            .trim()
            .parse::<i64>()
            .map_err(|_| parse_err(path, line_no, format!("bad pACC '{}'", pacc[0])))?;
        let split = values.len() - 3;
        out.push(FeatureLine {
            embedding: values[..split].to_vec(),
            ss3: [values[split], values[split + 1], values[split + 2]],
            pacc,
        });
    }
    Ok(out)
}

/// Loads a target directory into a protein graph.
///
/// In [`EmbeddingMode::File`] every row must carry exactly `embedding_dim`
/// embedding values. The other modes ignore file embeddings and derive them
/// from the sequence.
pub fn load_target(
    dir: &Path,
    mode: EmbeddingMode,
    embedding_dim: usize,
) -> Result<ProteinGraph, ProteinError> {
    let sequence = read_sequence(&dir.join(SEQUENCE_FILE))?;
    let len = sequence.chars().count();

    let dense = dir.join(CONTACT_FILE);
    let edges = dir.join(CONTACT_EDGES_FILE);
    let contacts = if dense.exists() {
        parse_dense_contacts(&dense, &read(&dense)?)?
    } else if edges.exists() {
        parse_edge_contacts(&edges, &read(&edges)?, len)?
    } else {
        return Err(ProteinError::Io {
            path: dense,
            reason: "missing contact map".into(),
        });
    };

    let feat_path = dir.join(FEATURES_FILE);
    let lines = parse_feature_lines(&feat_path, &read(&feat_path)?)?;
    let embeddings: Vec<Vec<f64>> = match mode {
        EmbeddingMode::File => {
            if let Some((residue, l)) = lines
                .iter()
                .enumerate()
                .find(|(_, l)| l.embedding.len() != embedding_dim)
            {
                return Err(ProteinError::EmbeddingWidth {
                    residue,
                    expected: embedding_dim,
                    found: l.embedding.len(),
                });
            }
            lines.iter().map(|l| l.embedding.clone()).collect()
        }
        EmbeddingMode::Fallback => fallback_embed(&sequence, embedding_dim).rows,
        EmbeddingMode::OneHot => one_hot_embed(&sequence).rows,
    };
    if lines.len() != len {
        return Err(ProteinError::LengthMismatch {
            sequence: len,
            contacts: contacts.size(),
            features: lines.len(),
        });
    }

    let features = lines
        .into_iter()
        .zip(embeddings)
        .map(|(l, emb)| ResidueFeatures::new(emb, l.ss3, classify_sa(l.pacc)?))
        .collect::<Result<Vec<_>, _>>()?;
    build_protein_graph(&sequence, &contacts, &features)
}

/// Writes a target directory in the layout read by [`load_target`], with a
/// dense contact matrix.
pub fn write_target(
    dir: &Path,
    sequence: &str,
    contacts: &ContactMap,
    lines: &[FeatureLine],
) -> Result<(), ProteinError> {
    let io = |path: PathBuf| {
        move |e: std::io::Error| ProteinError::Io {
            path,
            reason: e.to_string(),
        }
    };
    fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
    fs::write(dir.join(SEQUENCE_FILE), format!("{sequence}\n"))
        .map_err(io(dir.join(SEQUENCE_FILE)))?;

    let mut text = String::new();
    for i in 0..contacts.size() {
        let row: Vec<&str> = (0..contacts.size())
            .map(|j| if contacts.get(i, j) { "1" } else { "0" })
            .collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    fs::write(dir.join(CONTACT_FILE), text).map_err(io(dir.join(CONTACT_FILE)))?;

    let mut text = String::new();
    for l in lines {
        for v in l.embedding.iter().chain(&l.ss3) {
            write!(text, "{v}\t").expect("string write");
        }
        writeln!(text, "{}", l.pacc).expect("string write");
    }
    fs::write(dir.join(FEATURES_FILE), text).map_err(io(dir.join(FEATURES_FILE)))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines(n: usize, emb: usize) -> Vec<FeatureLine> {
        (0..n)
            .map(|i| FeatureLine {
                embedding: vec![0.25 * i as f64; emb],
                ss3: [0.7, 0.2, 0.1],
                pacc: (i * 30) as i64 % 101,
            })
            .collect()
    }

    #[test]
    fn round_trip_through_directory() {
        let dir = tempfile::tempdir().unwrap();
        let contacts = ContactMap::from_edges(4, &[(0, 3)]).unwrap();
        write_target(dir.path(), "MKVL", &contacts, &lines(4, 3)).unwrap();
        let g = load_target(dir.path(), EmbeddingMode::File, 3).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g.feature_dim(), 9);
        assert_eq!(g.adjacency.get2(0, 3), 1.0);
        assert_eq!(g.node_features.row(1)[0], 0.25);

        let g = load_target(dir.path(), EmbeddingMode::OneHot, 0).unwrap();
        assert_eq!(g.feature_dim(), 27);
        let g = load_target(dir.path(), EmbeddingMode::Fallback, 5).unwrap();
        assert_eq!(g.feature_dim(), 11);
    }

    #[test]
    fn file_mode_checks_embedding_width() {
        let dir = tempfile::tempdir().unwrap();
        write_target(dir.path(), "MK", &ContactMap::empty(2), &lines(2, 3)).unwrap();
        assert!(matches!(
            load_target(dir.path(), EmbeddingMode::File, 768),
            Err(ProteinError::EmbeddingWidth {
                expected: 768,
                found: 3,
                ..
            })
        ));
    }

    #[test]
    fn edge_list_contacts() {
        let dir = tempfile::tempdir().unwrap();
        write_target(dir.path(), "MKV", &ContactMap::empty(3), &lines(3, 0)).unwrap();
        fs::remove_file(dir.path().join(CONTACT_FILE)).unwrap();
        fs::write(dir.path().join(CONTACT_EDGES_FILE), "0\t2\n").unwrap();
        let g = load_target(dir.path(), EmbeddingMode::OneHot, 0).unwrap();
        assert_eq!(g.adjacency.get2(2, 0), 1.0);
    }

    #[test]
    fn missing_contact_map_names_directory() {
        let dir = tempfile::tempdir().unwrap();
        write_target(dir.path(), "MK", &ContactMap::empty(2), &lines(2, 0)).unwrap();
        fs::remove_file(dir.path().join(CONTACT_FILE)).unwrap();
        let msg = load_target(dir.path(), EmbeddingMode::OneHot, 0)
            .unwrap_err()
            .to_string();
        assert!(msg.contains(&dir.path().display().to_string()), "{msg}");
    }

    #[test]
    fn bad_ss3_rejected_at_load() {
        let dir = tempfile::tempdir().unwrap();
        let mut l = lines(2, 0);
        l[1].ss3 = [0.5, 0.5, 0.5];
        write_target(dir.path(), "MK", &ContactMap::empty(2), &l).unwrap();
        assert!(matches!(
            load_target(dir.path(), EmbeddingMode::OneHot, 0),
            Err(ProteinError::Ss3 { .. })
        ));
    }
}
