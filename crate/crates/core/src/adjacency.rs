//! Adjacency matrices over conversation trees and their normalizations.
//!
//! Rows follow the chronological tweet ordering of [`crate::conversation::ThreadTree`],
//! so the same index addresses adjacency rows, feature rows and recurrent
//! inputs throughout the pipeline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conversation::ThreadTree;

#[derive(Debug, Error, PartialEq)]
pub enum AdjacencyError {
    #[error("row {0} has zero degree")]
    ZeroDegreeRow(usize),
}

/// Which graph convolution support to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GcnVariant {
    /// Symmetric normalization D^{-1/2} A D^{-1/2}: one-hop support.
    Original,
    /// The squared-plus-identity form (D^{-1/2} A D^{-1/2})^2 + I: two-hop
    /// support with boosted self weight.
    Customized,
}

impl GcnVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            GcnVariant::Original => "original",
            GcnVariant::Customized => "customized",
        }
    }
}

impl std::str::FromStr for GcnVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(GcnVariant::Original),
            "customized" => Ok(GcnVariant::Customized),
            other => Err(format!("unknown gcn variant {other:?}")),
        }
    }
}

/// Binary reply adjacency with self-loops, symmetric by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    size: usize,
    entries: Vec<f64>,
}

impl AdjacencyMatrix {
    /// Build the undirected reply adjacency of a thread, rows in
    /// chronological order; entry (i,j) = 1 iff i = j or i replies j.
    pub fn from_tree(tree: &ThreadTree) -> AdjacencyMatrix {
        let n = tree.len();
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
            if let Some(p) = tree.parent[i] {
                entries[i * n + p] = 1.0;
                entries[p * n + i] = 1.0;
            }
        }
        AdjacencyMatrix { size: n, entries }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Row sums, i.e. node degrees including the self-loop.
    pub fn degrees(&self) -> Vec<f64> {
        (0..self.size)
            .map(|i| self.entries[i * self.size..(i + 1) * self.size].iter().sum())
            .collect()
    }
}

/// A normalized adjacency ready to drive graph convolution layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedAdjacency {
    size: usize,
    entries: Vec<f64>,
    variant: GcnVariant,
}

impl NormalizedAdjacency {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn variant(&self) -> GcnVariant {
        self.variant
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// Normalize an adjacency matrix for the requested variant.
///
/// `Original` is D^{-1/2} A D^{-1/2} with D the degree matrix of A (self-loops
/// included). `Customized` squares that matrix and adds the identity, widening
/// the one-layer receptive field to two hops. The customized form depends only
/// on the thread structure, so it is computed once per thread and reused by
/// every layer.
pub fn normalize(
    adjacency: &AdjacencyMatrix,
    variant: GcnVariant,
) -> Result<NormalizedAdjacency, AdjacencyError> {
    let n = adjacency.size;
    let degrees = adjacency.degrees();
    for (i, d) in degrees.iter().enumerate() {
        if *d <= 0.0 {
            return Err(AdjacencyError::ZeroDegreeRow(i));
        }
    }
    let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut sym = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            sym[i * n + j] = inv_sqrt[i] * adjacency.entries[i * n + j] * inv_sqrt[j];
        }
    }
    let entries = match variant {
        GcnVariant::Original => sym,
        GcnVariant::Customized => {
            let mut squared = vec![0.0; n * n];
            for i in 0..n {
                for k in 0..n {
                    let v = sym[i * n + k];
                    if v == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        squared[i * n + j] += v * sym[k * n + j];
                    }
                }
            }
            for i in 0..n {
                squared[i * n + i] += 1.0;
            }
            squared
        }
    };
    Ok(NormalizedAdjacency {
        size: n,
        entries,
        variant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conversation::{build_tree, Tweet};

    fn chain_thread(parents: &[(&str, Option<&str>)]) -> ThreadTree {
        let tweets: Vec<Tweet> = parents
            .iter()
            .enumerate()
            .map(|(i, (id, parent))| Tweet {
                id: id.to_string(),
                parent_id: parent.map(|p| p.to_string()),
                ts: i as i64,
                text: String::new(),
                stance: None,
            })
            .collect();
        build_tree(&tweets).unwrap()
    }

    fn star3() -> AdjacencyMatrix {
        AdjacencyMatrix::from_tree(&chain_thread(&[
            ("1", None),
            ("2", Some("1")),
            ("3", Some("1")),
        ]))
    }

    #[test]
    fn single_node_adjacency() {
        let adj = AdjacencyMatrix::from_tree(&chain_thread(&[("1", None)]));
        assert_eq!(adj.entries(), &[1.0]);
    }

    #[test]
    fn star_adjacency() {
        let adj = star3();
        let expected = [1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        assert_eq!(adj.entries(), &expected);
    }

    #[test]
    fn path_adjacency() {
        let adj = AdjacencyMatrix::from_tree(&chain_thread(&[
            ("1", None),
            ("2", Some("1")),
            ("3", Some("2")),
        ]));
        let expected = [1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0];
        assert_eq!(adj.entries(), &expected);
    }

    #[test]
    fn single_node_normalizations() {
        let adj = AdjacencyMatrix::from_tree(&chain_thread(&[("1", None)]));
        let orig = normalize(&adj, GcnVariant::Original).unwrap();
        assert!((orig.get(0, 0) - 1.0).abs() < 1e-12);
        let custom = normalize(&adj, GcnVariant::Customized).unwrap();
        assert!((custom.get(0, 0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn star_original_normalization() {
        let norm = normalize(&star3(), GcnVariant::Original).unwrap();
        let inv_sqrt6 = 1.0 / 6.0_f64.sqrt();
        assert!((norm.get(0, 0) - 1.0 / 3.0).abs() < 1e-12);
        assert!((norm.get(1, 1) - 0.5).abs() < 1e-12);
        assert!((norm.get(2, 2) - 0.5).abs() < 1e-12);
        assert!((norm.get(0, 1) - inv_sqrt6).abs() < 1e-12);
        assert!((norm.get(0, 2) - inv_sqrt6).abs() < 1e-12);
        assert_eq!(norm.get(1, 2), 0.0);
    }

    #[test]
    fn star_customized_connects_siblings() {
        let norm = normalize(&star3(), GcnVariant::Customized).unwrap();
        // Siblings are linked through the root with weight (1/sqrt6)^2.
        assert!((norm.get(1, 2) - 1.0 / 6.0).abs() < 1e-12);
        assert!((norm.get(0, 0) - (4.0 / 9.0 + 1.0)).abs() < 1e-12);
    }
}
