//! Theme-labelling engines.
//!
//! Every engine fits transductively on a prepared corpus and emits one
//! [`ScoreVector`](crate::labeling::ScoreVector) per document; each also
//! exposes a per-theme term ranking through [`TopicWords`].

pub mod bertopic;
pub mod corex;
pub mod glda;
pub mod keyword;
pub mod kmeans;
pub mod linear;
pub mod westclass;
pub mod xclass;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::TermId;
use crate::error::Error;
use crate::labeling::DecisionPolicy;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Keyword,
    Corex,
    Glda,
    Westclass,
    Xclass,
    Bertopic,
}

impl EngineKind {
    pub const ALL: [EngineKind; 6] = [
        EngineKind::Keyword,
        EngineKind::Corex,
        EngineKind::Glda,
        EngineKind::Westclass,
        EngineKind::Xclass,
        EngineKind::Bertopic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Keyword => "keyword",
            EngineKind::Corex => "corex",
            EngineKind::Glda => "glda",
            EngineKind::Westclass => "westclass",
            EngineKind::Xclass => "xclass",
            EngineKind::Bertopic => "bertopic",
        }
    }

    pub fn needs_embeddings(self) -> bool {
        matches!(self, EngineKind::Xclass | EngineKind::Bertopic)
    }

    /// Default decision policy; `topics` is the total topic count for
    /// simplex-valued engines.
    pub fn default_policy(self, topics: usize) -> DecisionPolicy {
        match self {
            EngineKind::Glda => DecisionPolicy::simplex(topics),
            EngineKind::Bertopic => DecisionPolicy::Cluster,
            _ => DecisionPolicy::probability(),
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EngineKind::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::param(format!("unknown engine {s:?}")))
    }
}

/// Per-theme term ranking used for keyword tables.
pub trait TopicWords<F: Real> {
    fn n_themes(&self) -> usize;

    /// Terms for `theme` with their association weights, best first.
    fn ranked_terms(&self, theme: usize) -> Vec<(TermId, F)>;

    fn top_terms(&self, theme: usize, n: usize) -> Vec<(TermId, F)> {
        let mut r = self.ranked_terms(theme);
        r.truncate(n);
        r
    }
}

/// Indices sorted by descending weight, ties broken by ascending index.
pub(crate) fn rank_desc<F: Real>(weights: &[F]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..weights.len()).collect();
    idx.sort_by(|&a, &b| {
        weights[b]
            .partial_cmp(&weights[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}
