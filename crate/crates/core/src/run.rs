//! Fit-and-label runs: parameter overrides, engine dispatch, prediction
//! sets with run metadata, and the saved model file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::Vocabulary;
use crate::embeddings::EmbeddingTable;
use crate::engines::bertopic::{guided_cluster, BertopicModel, BertopicParams};
use crate::engines::corex::{fit_corex, CorexModel, CorexParams};
use crate::engines::glda::{fit_glda, glda_doc_scores, GldaModel, GldaParams};
use crate::engines::keyword::{fit_keyword, KeywordModel};
use crate::engines::westclass::{fit_westclass, StopReason, WestclassModel, WestclassParams};
use crate::engines::xclass::{xclass_fit, XclassModel, XclassParams};
use crate::engines::{EngineKind, TopicWords};
use crate::error::{Error, Result};
use crate::eval::{extract_keywords, KeywordTable};
use crate::labeling::{DecisionPolicy, PredictionSet, RunMetadata, ScoreVector};
use crate::pipeline::PreparedCorpus;
use crate::scalar::Real;
use crate::themes::{hex_digest, ResolvedSeeds};

pub const MODEL_FORMAT: &str = "wstc-model";
pub const MODEL_VERSION: u32 = 1;
pub const DEFAULT_RNG_SEED: u64 = 42;

/// Effective hyperparameters of one engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "engine", content = "params", rename_all = "lowercase")]
pub enum EngineParams {
    Keyword,
    Corex(CorexParams),
    Glda(GldaParams),
    Westclass(WestclassParams),
    Xclass(XclassParams),
    Bertopic(BertopicParams),
}

fn flatten_into(prefix: &str, v: &Value, out: &mut BTreeMap<String, String>) {
    match v {
        Value::Object(m) => {
            for (k, child) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten_into(&key, child, out);
            }
        }
        Value::String(s) => {
            out.insert(prefix.to_owned(), s.clone());
        }
        other => {
            out.insert(prefix.to_owned(), other.to_string());
        }
    }
}

fn set_path(root: &mut Value, key: &str, raw: &str) -> Result<()> {
    let mut slot = &mut *root;
    for part in key.split('.') {
        slot = slot
            .as_object_mut()
            .and_then(|m| m.get_mut(part))
            .ok_or_else(|| Error::param(format!("unknown parameter {key:?}")))?;
    }
    let bad = || Error::param(format!("parameter {key}: cannot parse {raw:?}"));
    *slot = match slot {
        Value::Object(_) | Value::Array(_) | Value::Null => {
            return Err(Error::param(format!("parameter {key:?} is not a scalar")))
        }
        Value::Bool(_) => Value::Bool(raw.parse().map_err(|_| bad())?),
        Value::String(_) => Value::String(raw.to_owned()),
        Value::Number(n) if n.is_u64() => Value::from(raw.parse::<u64>().map_err(|_| bad())?),
        Value::Number(_) => {
            let x: f64 = raw.parse().map_err(|_| bad())?;
            serde_json::Number::from_f64(x).map(Value::Number).ok_or_else(bad)?
        }
    };
    Ok(())
}

fn apply<T: Serialize + DeserializeOwned>(params: &T, overrides: &BTreeMap<String, String>) -> Result<T> {
    let mut v = serde_json::to_value(params)?;
    for (k, raw) in overrides {
        set_path(&mut v, k, raw)?;
    }
    serde_json::from_value(v).map_err(|e| Error::param(e.to_string()))
}

impl EngineParams {
    /// Defaults with every sampling seed set to `rng_seed`.
    pub fn defaults(engine: EngineKind, rng_seed: u64) -> Self {
        match engine {
            EngineKind::Keyword => EngineParams::Keyword,
            EngineKind::Corex => EngineParams::Corex(CorexParams {
                rng_seed,
                ..Default::default()
            }),
            EngineKind::Glda => EngineParams::Glda(GldaParams {
                rng_seed,
                ..Default::default()
            }),
            EngineKind::Westclass => EngineParams::Westclass(WestclassParams::default().with_seed(rng_seed)),
            EngineKind::Xclass => EngineParams::Xclass(XclassParams {
                rng_seed,
                ..Default::default()
            }),
            EngineKind::Bertopic => EngineParams::Bertopic(BertopicParams {
                rng_seed,
                ..Default::default()
            }),
        }
    }

    /// Applies `key=value` overrides; nested fields use dotted keys such as
    /// `self_train.classifier.l2`.
    pub fn with_overrides(self, overrides: &BTreeMap<String, String>) -> Result<Self> {
        Ok(match self {
            EngineParams::Keyword => {
                if let Some(k) = overrides.keys().next() {
                    return Err(Error::param(format!("unknown parameter {k:?}: keyword takes none")));
                }
                EngineParams::Keyword
            }
            EngineParams::Corex(p) => EngineParams::Corex(apply(&p, overrides)?),
            EngineParams::Glda(p) => EngineParams::Glda(apply(&p, overrides)?),
            EngineParams::Westclass(p) => EngineParams::Westclass(apply(&p, overrides)?),
            EngineParams::Xclass(p) => EngineParams::Xclass(apply(&p, overrides)?),
            EngineParams::Bertopic(p) => EngineParams::Bertopic(apply(&p, overrides)?),
        })
    }

    /// Dotted key to value, as recorded in run metadata.
    pub fn flatten(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        if let Ok(v) = serde_json::to_value(self) {
            flatten_into("", &v["params"], &mut out);
        }
        out.remove("");
        out
    }
}

/// Parses `K=V` strings.
pub fn parse_overrides<S: AsRef<str>>(items: &[S]) -> Result<BTreeMap<String, String>> {
    items
        .iter()
        .map(|s| {
            let (k, v) = s
                .as_ref()
                .split_once('=')
                .ok_or_else(|| Error::param(format!("expected K=V, got {:?}", s.as_ref())))?;
            Ok((k.trim().to_owned(), v.trim().to_owned()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelRequest {
    pub engine: EngineKind,
    pub rng_seed: u64,
    /// Replaces the probability threshold, or the floor of the simplex policy.
    pub threshold: Option<f64>,
    pub overrides: BTreeMap<String, String>,
}

impl LabelRequest {
    pub fn new(engine: EngineKind) -> Self {
        LabelRequest {
            engine,
            rng_seed: DEFAULT_RNG_SEED,
            threshold: None,
            overrides: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "lowercase")]
pub enum ModelBody<F> {
    Keyword(KeywordModel),
    Corex(CorexModel<F>),
    Glda(GldaModel<F>),
    Westclass(WestclassModel<F>),
    Xclass(XclassModel<F>),
    Bertopic(BertopicModel<F>),
}

impl<F: Real> ModelBody<F> {
    pub fn topic_words(&self) -> &dyn TopicWords<F> {
        match self {
            ModelBody::Keyword(m) => m,
            ModelBody::Corex(m) => m,
            ModelBody::Glda(m) => m,
            ModelBody::Westclass(m) => m,
            ModelBody::Xclass(m) => m,
            ModelBody::Bertopic(m) => m,
        }
    }
}

/// Versioned JSON envelope around a fitted engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile<F> {
    pub format: String,
    pub version: u32,
    pub engine: EngineKind,
    pub themes: Vec<String>,
    pub vocab: Vocabulary,
    pub seeds: ResolvedSeeds,
    pub policy: DecisionPolicy,
    pub metadata: RunMetadata,
    pub body: ModelBody<F>,
}

impl<F: Real> ModelFile<F> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(s)?;
        if v["format"] != MODEL_FORMAT {
            return Err(Error::parse(1, "not a wstc model file"));
        }
        if v["version"] != MODEL_VERSION {
            return Err(Error::parse(1, format!("unsupported model version {}", v["version"])));
        }
        Ok(serde_json::from_value(v)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(fs::write(path, self.to_json()?)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn keywords(&self, n: usize) -> KeywordTable {
        extract_keywords(self.engine.name(), self.body.topic_words(), &self.vocab, &self.seeds, n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelRun<F> {
    pub predictions: PredictionSet<F>,
    pub model: ModelFile<F>,
}

fn with_threshold(policy: DecisionPolicy, threshold: Option<f64>) -> Result<DecisionPolicy> {
    let Some(t) = threshold else { return Ok(policy) };
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::param("threshold must lie in [0, 1]"));
    }
    match policy {
        DecisionPolicy::Probability { .. } => Ok(DecisionPolicy::Probability { threshold: t }),
        DecisionPolicy::Simplex { topics, .. } => Ok(DecisionPolicy::Simplex { topics, floor: t }),
        DecisionPolicy::Cluster => Err(Error::param("the cluster policy takes no threshold")),
    }
}

/// Fits `request.engine` on `corpus` and labels every input document.
pub fn label<F: Real>(
    corpus: &PreparedCorpus<F>,
    embeddings: Option<&EmbeddingTable<F>>,
    request: &LabelRequest,
) -> Result<LabelRun<F>> {
    let engine = request.engine;
    let table = match (engine.needs_embeddings(), embeddings) {
        (true, None) => return Err(Error::param(format!("engine {engine} requires embeddings"))),
        (_, t) => t,
    };
    let params = EngineParams::defaults(engine, request.rng_seed).with_overrides(&request.overrides)?;
    let seeds = corpus.seeds(engine == EngineKind::Westclass)?;
    let mut warnings = seeds.warnings();
    let n_themes = seeds.len();

    let (body, scores, topics): (ModelBody<F>, Vec<ScoreVector<F>>, usize) = match &params {
        EngineParams::Keyword => {
            let (m, s) = fit_keyword(corpus, &seeds);
            (ModelBody::Keyword(m), s, n_themes)
        }
        EngineParams::Corex(p) => {
            let m = fit_corex(&corpus.tfidf, &seeds, p)?;
            let scorer = m.scorer();
            let s = corpus.encoded.iter().map(|d| scorer.doc_scores(d)).collect();
            let k = m.n_topics;
            (ModelBody::Corex(m), s, k)
        }
        EngineParams::Glda(p) => {
            let m = fit_glda(&corpus.encoded, corpus.vocab.len(), &seeds, p)?;
            let s = (0..corpus.n_docs()).map(|i| glda_doc_scores(&m, i)).collect::<Result<_>>()?;
            let k = m.k;
            (ModelBody::Glda(m), s, k)
        }
        EngineParams::Westclass(p) => {
            let (m, s) = fit_westclass(corpus, &seeds, p)?;
            if m.state.stop == StopReason::MaxRounds {
                warnings.push(format!("westclass: stopped at the round limit ({})", m.state.rounds));
            }
            (ModelBody::Westclass(m), s, n_themes)
        }
        EngineParams::Xclass(p) => {
            let (m, s) = xclass_fit(table.expect("checked above"), corpus, &seeds, p)?;
            (ModelBody::Xclass(m), s, n_themes)
        }
        EngineParams::Bertopic(p) => {
            let (m, s) = guided_cluster(table.expect("checked above"), corpus, &seeds, p)?;
            warnings.extend(m.warnings.iter().cloned());
            let k = m.k();
            (ModelBody::Bertopic(m), s, k)
        }
    };

    let policy = with_threshold(engine.default_policy(topics), request.threshold)?;
    let flat = params.flatten();
    let config = serde_json::json!({
        "engine": engine,
        "themes": corpus.themes.to_tsv(),
        "params": flat,
        "rng_seed": request.rng_seed,
        "policy": policy,
        "stem": corpus.options.stem,
        "spell": corpus.options.spell.is_some(),
    });
    let metadata = RunMetadata {
        rng_seed: request.rng_seed,
        params: flat,
        config_sha256: hex_digest(config.to_string().as_bytes()),
        corpus_sha256: corpus.corpus_sha256.clone(),
        warnings,
    };
    let themes = corpus.themes.names();
    let mut predictions = PredictionSet::from_scores(engine.name(), themes.clone(), policy, corpus.complete_scores(scores));
    predictions.metadata = metadata.clone();
    let model = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        engine,
        themes,
        vocab: corpus.vocab.clone(),
        seeds,
        policy,
        metadata,
        body,
    };
    Ok(LabelRun { predictions, model })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::RawComment;
    use crate::themes::ThemeConfig;

    fn corpus() -> PreparedCorpus<f64> {
        let texts = [
            "the nurse at the hospital was great",
            "my wife and family helped me",
            "nurse care and hospital staff",
            "family support from my wife",
            "pain and tiredness after surgery",
            "the hospital nurse visited",
        ];
        let raws: Vec<RawComment> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| RawComment::new(format!("c{i}"), *t))
            .collect();
        let themes = ThemeConfig::parse("Care\tnurse; hospital\nSocial\twife; family\n").unwrap();
        PreparedCorpus::prepare(&raws, &themes, Default::default(), 1).unwrap()
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let mut o = BTreeMap::new();
        o.insert("self_train.classifier.l2".to_string(), "0.01".to_string());
        o.insert("dim".to_string(), "8".to_string());
        let p = EngineParams::defaults(EngineKind::Westclass, 7).with_overrides(&o).unwrap();
        let EngineParams::Westclass(w) = &p else { panic!() };
        assert_eq!(w.self_train.classifier.l2, 0.01);
        assert_eq!(w.dim, 8);
        assert_eq!(w.pseudo.rng_seed, 7);
        assert_eq!(p.flatten()["self_train.classifier.l2"], "0.01");
    }

    #[test]
    fn bad_overrides_are_parameter_errors() {
        let bad = |k: &str, v: &str| {
            let o = BTreeMap::from([(k.to_string(), v.to_string())]);
            EngineParams::defaults(EngineKind::Corex, 1).with_overrides(&o)
        };
        assert!(matches!(bad("nope", "1"), Err(Error::InvalidParam(_))));
        assert!(matches!(bad("max_iter", "1.5"), Err(Error::InvalidParam(_))));
        assert!(matches!(bad("tol", "x"), Err(Error::InvalidParam(_))));
        assert!(bad("tol", "1e-3").is_ok());
        let o = BTreeMap::from([("k".to_string(), "1".to_string())]);
        assert!(EngineParams::defaults(EngineKind::Keyword, 1).with_overrides(&o).is_err());
        assert!(parse_overrides(&["a=1", "b = x"]).unwrap()["b"] == "x");
        assert!(parse_overrides(&["a"]).is_err());
    }

    #[test]
    fn embedding_engines_require_a_table() {
        let c = corpus();
        for e in [EngineKind::Xclass, EngineKind::Bertopic] {
            assert!(matches!(label(&c, None, &LabelRequest::new(e)), Err(Error::InvalidParam(_))));
        }
    }

    #[test]
    fn keyword_run_carries_metadata_and_round_trips_model() {
        let c = corpus();
        let run = label(&c, None, &LabelRequest::new(EngineKind::Keyword)).unwrap();
        assert_eq!(run.predictions.docs.len(), 6);
        assert_eq!(run.predictions.metadata.rng_seed, DEFAULT_RNG_SEED);
        assert_eq!(run.predictions.metadata.corpus_sha256, c.corpus_sha256);
        assert_eq!(run.predictions.metadata.config_sha256.len(), 64);
        let back = ModelFile::<f64>::from_json(&run.model.to_json().unwrap()).unwrap();
        assert_eq!(back, run.model);
        let table = back.keywords(1);
        assert_eq!(table.keywords.len(), 2);
        assert!(table.keywords.iter().all(|k| k.len() == 1 && k[0].own_seed));
    }

    #[test]
    fn threshold_overrides_policy() {
        let c = corpus();
        let mut req = LabelRequest::new(EngineKind::Keyword);
        req.threshold = Some(0.9);
        let run = label(&c, None, &req).unwrap();
        assert_eq!(run.predictions.policy, DecisionPolicy::Probability { threshold: 0.9 });
        req.threshold = Some(1.5);
        assert!(label(&c, None, &req).is_err());
        assert!(with_threshold(DecisionPolicy::Cluster, Some(0.2)).is_err());
        assert_eq!(
            with_threshold(DecisionPolicy::simplex(8), Some(0.3)).unwrap(),
            DecisionPolicy::Simplex { topics: 8, floor: 0.3 }
        );
    }

    #[test]
    fn model_files_are_versioned() {
        let c = corpus();
        let run = label(&c, None, &LabelRequest::new(EngineKind::Keyword)).unwrap();
        let mut v: Value = serde_json::from_str(&run.model.to_json().unwrap()).unwrap();
        v["version"] = Value::from(99);
        assert!(ModelFile::<f64>::from_json(&v.to_string()).is_err());
        v["format"] = Value::from("other");
        assert!(ModelFile::<f64>::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn every_model_body_round_trips() {
        let c = corpus();
        let mut req = LabelRequest::new(EngineKind::Corex);
        req.overrides = parse_overrides(&["max_iter=20", "length_bins=1"]).unwrap();
        let corex = label(&c, None, &req).unwrap();
        let mut req = LabelRequest::new(EngineKind::Glda);
        req.overrides = parse_overrides(&["iterations=20"]).unwrap();
        let glda = label(&c, None, &req).unwrap();
        for run in [corex, glda] {
            let back = ModelFile::<f64>::from_json(&run.model.to_json().unwrap()).unwrap();
            assert_eq!(back.body, run.model.body);
            assert_eq!(back.keywords(3), run.model.keywords(3));
        }
    }
}
