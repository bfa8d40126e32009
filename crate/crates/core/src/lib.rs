//! Drug–target binding affinity regression with graph early fusion.
//!
//! A drug graph is encoded into a single vector that joins the protein
//! residue graph as an extra node, wired to every residue by learned
//! attention weights. The fused graph is encoded again and the result,
//! together with the drug representation, feeds a small regression head.
//! A late-fusion baseline that never mixes the two graphs is included.

pub mod chem;
pub mod cli;
pub mod fusion;
pub mod gnn;
pub mod numcore;
pub mod par;
pub mod protein;
pub mod synth;
pub mod traineval;
