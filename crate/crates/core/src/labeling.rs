//! Score vectors, label decision policies, and prediction sets.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-theme scores in theme order, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector<F>(pub Vec<F>);

impl<F: Real> ScoreVector<F> {
    pub fn zeros(n: usize) -> Self {
        ScoreVector(vec![F::zero(); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_valid(&self) -> bool {
        self.0.iter().all(|&s| s.is_finite() && s >= F::zero() && s <= F::one())
    }
}

/// Decided themes as sorted theme indices.
pub type LabelSet = BTreeSet<usize>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DecisionPolicy {
    /// Label every theme scoring at least `threshold`.
    Probability { threshold: f64 },
    /// Label themes scoring at least `max(1.2 / topics, floor)`.
    Simplex { topics: usize, floor: f64 },
    /// The single nonzero theme, if any.
    Cluster,
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const SIMPLEX_FLOOR: f64 = 0.15;

impl DecisionPolicy {
    pub fn probability() -> Self {
        DecisionPolicy::Probability {
            threshold: DEFAULT_THRESHOLD,
        }
    }

    pub fn simplex(topics: usize) -> Self {
        DecisionPolicy::Simplex {
            topics,
            floor: SIMPLEX_FLOOR,
        }
    }

    pub fn threshold(&self) -> Option<f64> {
        match *self {
            DecisionPolicy::Probability { threshold } => Some(threshold),
            DecisionPolicy::Simplex { topics, floor } => Some((1.2 / topics.max(1) as f64).max(floor)),
            DecisionPolicy::Cluster => None,
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            DecisionPolicy::Probability { threshold } => format!("probability(tau={threshold})"),
            DecisionPolicy::Simplex { topics, floor } => {
                format!("simplex(K={topics}, floor={floor}, tau={})", self.threshold().unwrap())
            }
            DecisionPolicy::Cluster => "cluster".into(),
        }
    }
}

pub fn decide_labels<F: Real>(scores: &ScoreVector<F>, policy: &DecisionPolicy) -> LabelSet {
    match policy.threshold() {
        Some(tau) => {
            let tau = F::lit(tau);
            scores
                .0
                .iter()
                .enumerate()
                .filter(|(_, &s)| s >= tau)
                .map(|(i, _)| i)
                .collect()
        }
        None => scores
            .0
            .iter()
            .position(|&s| s > F::zero())
            .into_iter()
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocPrediction<F> {
    pub id: String,
    pub scores: ScoreVector<F>,
    pub labels: LabelSet,
}

/// Run metadata written as the first line of every prediction file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub rng_seed: u64,
    pub params: BTreeMap<String, String>,
    pub config_sha256: String,
    pub corpus_sha256: String,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet<F> {
    pub engine: String,
    pub themes: Vec<String>,
    pub policy: DecisionPolicy,
    pub metadata: RunMetadata,
    pub docs: Vec<DocPrediction<F>>,
}

impl<F: Real> PredictionSet<F> {
    /// Decides labels for each `(id, scores)` pair under `policy`.
    pub fn from_scores<I>(engine: &str, themes: Vec<String>, policy: DecisionPolicy, scores: I) -> Self
    where
        I: IntoIterator<Item = (String, ScoreVector<F>)>,
    {
        let docs = scores
            .into_iter()
            .map(|(id, s)| DocPrediction {
                labels: decide_labels(&s, &policy),
                id,
                scores: s,
            })
            .collect();
        PredictionSet {
            engine: engine.to_owned(),
            themes,
            policy,
            metadata: RunMetadata::default(),
            docs,
        }
    }

    pub fn get(&self, id: &str) -> Option<&DocPrediction<F>> {
        self.docs.iter().find(|d| d.id == id)
    }

    /// Label sets keyed by document id, using theme names.
    pub fn label_names(&self) -> BTreeMap<String, BTreeSet<String>> {
        self.docs
            .iter()
            .map(|d| {
                (
                    d.id.clone(),
                    d.labels.iter().map(|&i| self.themes[i].clone()).collect(),
                )
            })
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = json!({
            "meta": {
                "engine": self.engine,
                "themes": self.themes,
                "policy": self.policy,
                "policy_desc": self.policy.describe(),
                "rng_seed": self.metadata.rng_seed,
                "params": self.metadata.params,
                "config_sha256": self.metadata.config_sha256,
                "corpus_sha256": self.metadata.corpus_sha256,
                "warnings": self.metadata.warnings,
            }
        });
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for d in &self.docs {
            let mut scores = Map::new();
            for (name, s) in self.themes.iter().zip(&d.scores.0) {
                scores.insert(name.clone(), json!(s.as_f64()));
            }
            let labels: Vec<&str> = d.labels.iter().map(|&i| self.themes[i].as_str()).collect();
            let rec = json!({
                "id": d.id,
                "engine": self.engine,
                "scores": Value::Object(scores),
                "labels": labels,
            });
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut header: Option<Value> = None;
        let mut raw_docs: Vec<(usize, Value)> = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let v: Value = serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
            if v.get("meta").is_some() {
                header = Some(v["meta"].clone());
            } else {
                raw_docs.push((i + 1, v));
            }
        }
        let meta = header.ok_or_else(|| Error::parse(1, "missing metadata header line"))?;
        let themes: Vec<String> = serde_json::from_value(meta["themes"].clone())?;
        let policy: DecisionPolicy = serde_json::from_value(meta["policy"].clone())?;
        let metadata = RunMetadata {
            rng_seed: meta["rng_seed"].as_u64().unwrap_or(0),
            params: serde_json::from_value(meta["params"].clone()).unwrap_or_default(),
            config_sha256: meta["config_sha256"].as_str().unwrap_or_default().to_owned(),
            corpus_sha256: meta["corpus_sha256"].as_str().unwrap_or_default().to_owned(),
            warnings: serde_json::from_value(meta["warnings"].clone()).unwrap_or_default(),
        };
        let engine = meta["engine"].as_str().unwrap_or_default().to_owned();
        let mut docs = Vec::with_capacity(raw_docs.len());
        for (line, v) in raw_docs {
            let id = v["id"]
                .as_str()
                .ok_or_else(|| Error::parse(line, "missing id"))?
                .to_owned();
            let mut scores = Vec::with_capacity(themes.len());
            for t in &themes {
                let s = v["scores"][t]
                    .as_f64()
                    .ok_or_else(|| Error::parse(line, format!("missing score for {t:?}")))?;
                scores.push(F::lit(s));
            }
            let mut labels = LabelSet::new();
            for l in v["labels"].as_array().ok_or_else(|| Error::parse(line, "missing labels"))? {
                let name = l.as_str().unwrap_or_default();
                let idx = themes
                    .iter()
                    .position(|t| t == name)
                    .ok_or_else(|| Error::UnknownTheme(name.to_owned()))?;
                labels.insert(idx);
            }
            docs.push(DocPrediction {
                id,
                scores: ScoreVector(scores),
                labels,
            });
        }
        Ok(PredictionSet {
            engine,
            themes,
            policy,
            metadata,
            docs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(x: &[f64]) -> ScoreVector<f64> {
        ScoreVector(x.to_vec())
    }

    #[test]
    fn probability_policy() {
        let p = DecisionPolicy::probability();
        assert_eq!(decide_labels(&sv(&[0.9, 0.05, 0.05]), &p), LabelSet::from([0]));
        assert!(decide_labels(&sv(&[0.4, 0.1, 0.49]), &p).is_empty());
        assert_eq!(decide_labels(&sv(&[0.6, 0.7, 0.1]), &p), LabelSet::from([0, 1]));
    }

    #[test]
    fn simplex_policy_uses_topic_count() {
        let p = DecisionPolicy::simplex(8);
        assert!((p.threshold().unwrap() - 0.15).abs() < 1e-15);
        assert!(decide_labels(&sv(&[0.125; 6]), &p).is_empty());
        let p = DecisionPolicy::simplex(4);
        assert!((p.threshold().unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn cluster_policy_picks_nonzero() {
        assert_eq!(decide_labels(&sv(&[0.0, 1.0, 0.0]), &DecisionPolicy::Cluster), LabelSet::from([1]));
        assert!(decide_labels(&sv(&[0.0, 0.0]), &DecisionPolicy::Cluster).is_empty());
    }

    #[test]
    fn jsonl_round_trip() {
        let mut p = PredictionSet::from_scores(
            "keyword",
            vec!["A".into(), "B & C".into()],
            DecisionPolicy::probability(),
            vec![("d1".to_string(), sv(&[1.0, 0.0])), ("d2".to_string(), sv(&[0.25, 0.75]))],
        );
        p.metadata.rng_seed = 7;
        p.metadata.params.insert("k".into(), "v".into());
        let mut buf = Vec::new();
        p.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().next().unwrap().starts_with("{\"meta\""));
        assert!(text.contains("\"scores\":{\"A\":1.0,\"B & C\":0.0}"));
        let back: PredictionSet<f64> = PredictionSet::read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, p);
    }

    proptest! {
        #[test]
        fn raising_threshold_never_adds_labels(
            scores in prop::collection::vec(0.0f64..=1.0, 6),
            a in 0.0f64..=1.0,
            b in 0.0f64..=1.0,
        ) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let s = ScoreVector(scores);
            let l_lo = decide_labels(&s, &DecisionPolicy::Probability { threshold: lo });
            let l_hi = decide_labels(&s, &DecisionPolicy::Probability { threshold: hi });
            prop_assert!(l_hi.is_subset(&l_lo));
        }
    }
}
