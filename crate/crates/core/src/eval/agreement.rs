//! Annotation sets, inter-annotator agreement, majority-vote gold and
//! theme prevalence.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{csv_string, LabelMap};
use crate::error::{Error, Result};

/// Binary presence judgements over a complete doc x annotator x theme grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub docs: Vec<String>,
    pub annotators: Vec<String>,
    pub themes: Vec<String>,
    /// Indexed `[doc][annotator][theme]`.
    cells: Vec<Vec<Vec<bool>>>,
}

#[derive(Debug, Deserialize)]
struct AnnotationRow {
    doc_id: String,
    annotator_id: String,
    theme: String,
    present: String,
}

fn index_of(list: &mut Vec<String>, lookup: &mut HashMap<String, usize>, key: &str) -> usize {
    if let Some(&i) = lookup.get(key) {
        return i;
    }
    list.push(key.to_owned());
    lookup.insert(key.to_owned(), list.len() - 1);
    list.len() - 1
}

impl AnnotationSet {
    /// Builds the grid from `(doc, annotator, theme, present)` records.
    /// Ids keep first-seen order. Duplicate or missing cells are errors.
    pub fn from_records<I, S>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S, S, bool)>,
        S: AsRef<str>,
    {
        let (mut docs, mut annotators, mut themes) = (Vec::new(), Vec::new(), Vec::new());
        let (mut di, mut ai, mut ti) = (HashMap::new(), HashMap::new(), HashMap::new());
        let mut seen: BTreeMap<(usize, usize, usize), bool> = BTreeMap::new();
        for (d, a, t, present) in records {
            let key = (
                index_of(&mut docs, &mut di, d.as_ref()),
                index_of(&mut annotators, &mut ai, a.as_ref()),
                index_of(&mut themes, &mut ti, t.as_ref()),
            );
            if seen.insert(key, present).is_some() {
                return Err(Error::Annotation(format!(
                    "duplicate cell ({}, {}, {})",
                    d.as_ref(),
                    a.as_ref(),
                    t.as_ref()
                )));
            }
        }
        if seen.is_empty() {
            return Err(Error::Annotation("no annotations".into()));
        }
        let mut cells = vec![vec![vec![false; themes.len()]; annotators.len()]; docs.len()];
        for d in 0..docs.len() {
            for a in 0..annotators.len() {
                for t in 0..themes.len() {
                    match seen.get(&(d, a, t)) {
                        Some(&v) => cells[d][a][t] = v,
                        None => {
                            return Err(Error::Annotation(format!(
                                "missing cell ({}, {}, {})",
                                docs[d], annotators[a], themes[t]
                            )))
                        }
                    }
                }
            }
        }
        Ok(AnnotationSet {
            docs,
            annotators,
            themes,
            cells,
        })
    }

    /// Parses `doc_id,annotator_id,theme,present` CSV with `present` in {0, 1}.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut records = Vec::new();
        for (i, row) in rdr.deserialize::<AnnotationRow>().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| Error::parse(line, e.to_string()))?;
            let present = match row.present.as_str() {
                "0" => false,
                "1" => true,
                other => return Err(Error::parse(line, format!("present must be 0 or 1, got {other:?}"))),
            };
            records.push((row.doc_id, row.annotator_id, row.theme, present));
        }
        Self::from_records(records)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["doc_id", "annotator_id", "theme", "present"])?;
        for (d, doc) in self.docs.iter().enumerate() {
            for (a, ann) in self.annotators.iter().enumerate() {
                for (t, theme) in self.themes.iter().enumerate() {
                    let v = if self.cells[d][a][t] { "1" } else { "0" };
                    w.write_record([doc.as_str(), ann.as_str(), theme.as_str(), v])?;
                }
            }
        }
        csv_string(w)
    }

    pub fn theme_index(&self, theme: &str) -> Result<usize> {
        self.themes
            .iter()
            .position(|t| t == theme)
            .ok_or_else(|| Error::UnknownTheme(theme.to_owned()))
    }

    pub fn get(&self, doc: usize, annotator: usize, theme: usize) -> bool {
        self.cells[doc][annotator][theme]
    }

    /// One annotator's judgements for a theme, in document order.
    pub fn column(&self, annotator: usize, theme: usize) -> Vec<bool> {
        self.cells.iter().map(|d| d[annotator][theme]).collect()
    }

    /// Per-document rating lists for a theme, as category indices.
    pub fn units(&self, theme: usize) -> Vec<Vec<usize>> {
        self.cells
            .iter()
            .map(|d| d.iter().map(|a| a[theme] as usize).collect())
            .collect()
    }
}

/// Nominal Krippendorff's alpha from per-unit rating lists; missing ratings
/// are simply absent from a unit's list. Units with fewer than two ratings
/// are not pairable and are skipped. With a single observed category the
/// result is 1.
pub fn alpha_from_units(units: &[Vec<usize>]) -> Result<f64> {
    let pairable: Vec<&Vec<usize>> = units.iter().filter(|u| u.len() >= 2).collect();
    if pairable.is_empty() {
        return Err(Error::Annotation("no unit has two or more ratings".into()));
    }
    let n_cat = pairable.iter().flat_map(|u| u.iter()).max().map_or(0, |&m| m + 1);
    let mut o = vec![vec![0.0f64; n_cat]; n_cat];
    for u in &pairable {
        let mut freq = vec![0usize; n_cat];
        for &v in u.iter() {
            freq[v] += 1;
        }
        let w = 1.0 / (u.len() - 1) as f64;
        for c in 0..n_cat {
            for k in 0..n_cat {
                let pairs = if c == k {
                    freq[c] * freq[c].saturating_sub(1)
                } else {
                    freq[c] * freq[k]
                };
                o[c][k] += pairs as f64 * w;
            }
        }
    }
    let marg: Vec<f64> = o.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = marg.iter().sum();
    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..n_cat {
        for k in 0..n_cat {
            if c != k {
                observed += o[c][k];
                expected += marg[c] * marg[k];
            }
        }
    }
    if expected == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - (n - 1.0) * observed / expected)
}

pub fn krippendorff_alpha(annotations: &AnnotationSet, theme: &str) -> Result<f64> {
    if annotations.annotators.len() < 2 {
        return Err(Error::Annotation("alpha needs at least two annotators".into()));
    }
    alpha_from_units(&annotations.units(annotations.theme_index(theme)?))
}

/// Qualitative agreement band. Upper bounds are inclusive at two decimals:
/// moderate is 0.41 to 0.60, substantial 0.61 to 0.80, almost perfect 0.81+.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Band {
    Poor,
    Slight,
    Fair,
    Moderate,
    Substantial,
    AlmostPerfect,
}

impl Band {
    pub fn of(value: f64) -> Band {
        if value < 0.0 {
            Band::Poor
        } else if value <= 0.20 {
            Band::Slight
        } else if value <= 0.40 {
            Band::Fair
        } else if value <= 0.60 {
            Band::Moderate
        } else if value <= 0.80 {
            Band::Substantial
        } else {
            Band::AlmostPerfect
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Band::Poor => "poor",
            Band::Slight => "slight",
            Band::Fair => "fair",
            Band::Moderate => "moderate",
            Band::Substantial => "substantial",
            Band::AlmostPerfect => "almost perfect",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub value: f64,
    pub observed: f64,
    pub expected: f64,
    /// Expected agreement is 1; the value is reported as 1.
    pub degenerate: bool,
    pub band: Band,
}

pub fn cohen_kappa(a1: &[bool], a2: &[bool]) -> Result<Kappa> {
    if a1.len() != a2.len() {
        return Err(Error::Annotation("kappa sequences differ in length".into()));
    }
    if a1.is_empty() {
        return Err(Error::Annotation("kappa needs at least one item".into()));
    }
    let n = a1.len();
    let agree = a1.iter().zip(a2).filter(|(x, y)| x == y).count();
    let pos1 = a1.iter().filter(|&&x| x).count();
    let pos2 = a2.iter().filter(|&&x| x).count();
    // integer numerators keep exact cases exact
    let chance = pos1 * pos2 + (n - pos1) * (n - pos2);
    let nn = n * n;
    let observed = agree as f64 / n as f64;
    let expected = chance as f64 / nn as f64;
    let (value, degenerate) = if chance == nn {
        (1.0, true)
    } else {
        (((agree * n) as f64 - chance as f64) / (nn - chance) as f64, false)
    };
    Ok(Kappa {
        value,
        observed,
        expected,
        degenerate,
        band: Band::of(value),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieRule {
    /// Ties are not allowed; an even annotator count is rejected.
    Reject,
    Absent,
    Present,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub doc: String,
    pub present: bool,
    pub tie: bool,
}

/// Present iff strictly more than half of the annotators mark the theme.
pub fn majority_vote(annotations: &AnnotationSet, theme: &str, rule: TieRule) -> Result<Vec<Vote>> {
    let t = annotations.theme_index(theme)?;
    let m = annotations.annotators.len();
    if m.is_multiple_of(2) && rule == TieRule::Reject {
        return Err(Error::Annotation(format!(
            "{m} annotators can tie; a tie rule is required"
        )));
    }
    Ok(annotations
        .docs
        .iter()
        .enumerate()
        .map(|(d, doc)| {
            let yes = (0..m).filter(|&a| annotations.get(d, a, t)).count();
            let tie = 2 * yes == m;
            let present = if tie { rule == TieRule::Present } else { 2 * yes > m };
            Vote {
                doc: doc.clone(),
                present,
                tie,
            }
        })
        .collect())
}

/// Majority-vote label sets for every document, and the number of ties.
pub fn majority_gold(annotations: &AnnotationSet, rule: TieRule) -> Result<(LabelMap, usize)> {
    let mut gold: LabelMap = annotations.docs.iter().map(|d| (d.clone(), BTreeSet::new())).collect();
    let mut ties = 0;
    for theme in &annotations.themes {
        for v in majority_vote(annotations, theme, rule)? {
            ties += v.tie as usize;
            if v.present {
                gold.get_mut(&v.doc).expect("doc in grid").insert(theme.clone());
            }
        }
    }
    Ok((gold, ties))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prevalence {
    pub n: usize,
    pub themes: Vec<String>,
    /// Percent of documents carrying each theme.
    pub percent: Vec<f64>,
    /// Percent of documents with an empty label set.
    pub none_percent: f64,
}

pub fn prevalence(gold: &LabelMap, themes: &[String]) -> Result<Prevalence> {
    if gold.is_empty() {
        return Err(Error::Annotation("prevalence of an empty gold set".into()));
    }
    let n = gold.len();
    let mut counts = vec![0usize; themes.len()];
    let mut none = 0;
    for labels in gold.values() {
        if labels.is_empty() {
            none += 1;
        }
        for l in labels {
            let i = themes.iter().position(|t| t == l).ok_or_else(|| Error::UnknownTheme(l.clone()))?;
            counts[i] += 1;
        }
    }
    let pct = |c: usize| 100.0 * c as f64 / n as f64;
    Ok(Prevalence {
        n,
        themes: themes.to_vec(),
        percent: counts.into_iter().map(pct).collect(),
        none_percent: pct(none),
    })
}

impl Prevalence {
    /// `Prevalence in sample (n=..)` row with whole percentages.
    pub fn row(&self) -> String {
        let mut cells: Vec<String> = self.percent.iter().map(|p| format!("{p:.0}%")).collect();
        cells.push(format!("{:.0}%", self.none_percent));
        format!("| Prevalence in sample (n={}) | {} |", self.n, cells.join(" | "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairKappa {
    pub first: String,
    pub second: String,
    pub theme: String,
    pub kappa: Kappa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub themes: Vec<String>,
    pub alpha: Vec<f64>,
    pub alpha_band: Vec<Band>,
    pub kappa: Vec<PairKappa>,
    pub prevalence: Option<Prevalence>,
    pub ties: usize,
}

/// Alpha per theme, kappa per annotator pair and theme, and the prevalence
/// of the majority-vote gold under `rule`.
pub fn agreement_report(annotations: &AnnotationSet, rule: TieRule) -> Result<AgreementReport> {
    let mut alpha = Vec::with_capacity(annotations.themes.len());
    let mut kappa = Vec::new();
    for (t, theme) in annotations.themes.iter().enumerate() {
        alpha.push(krippendorff_alpha(annotations, theme)?);
        for a in 0..annotations.annotators.len() {
            for b in a + 1..annotations.annotators.len() {
                kappa.push(PairKappa {
                    first: annotations.annotators[a].clone(),
                    second: annotations.annotators[b].clone(),
                    theme: theme.clone(),
                    kappa: cohen_kappa(&annotations.column(a, t), &annotations.column(b, t))?,
                });
            }
        }
    }
    let majority = if annotations.annotators.len() % 2 == 1 || rule != TieRule::Reject {
        Some(majority_gold(annotations, rule)?)
    } else {
        None
    };
    let (prevalence, ties) = match majority {
        Some((gold, ties)) => (Some(prevalence(&gold, &annotations.themes)?), ties),
        None => (None, 0),
    };
    Ok(AgreementReport {
        themes: annotations.themes.clone(),
        alpha_band: alpha.iter().map(|&a| Band::of(a)).collect(),
        alpha,
        kappa,
        prevalence,
        ties,
    })
}

impl AgreementReport {
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "| | {} | No themes present |", self.themes.join(" | "));
        let _ = writeln!(out, "|---|{}---|", "---|".repeat(self.themes.len()));
        let alphas: Vec<String> = self.alpha.iter().map(|a| format!("{a:.3}")).collect();
        let _ = writeln!(out, "| Agreement (α) | {} | |", alphas.join(" | "));
        let bands: Vec<&str> = self.alpha_band.iter().map(|b| b.name()).collect();
        let _ = writeln!(out, "| Band | {} | |", bands.join(" | "));
        if let Some(p) = &self.prevalence {
            let _ = writeln!(out, "{}", p.row());
        }
        if !self.kappa.is_empty() {
            out.push_str("\n| Annotators | Theme | Cohen κ | Band |\n|---|---|---|---|\n");
            for k in &self.kappa {
                let flag = if k.kappa.degenerate { " (degenerate)" } else { "" };
                let _ = writeln!(
                    out,
                    "| {} / {} | {} | {:.3}{flag} | {} |",
                    k.first, k.second, k.theme, k.kappa.value, k.kappa.band
                );
            }
        }
        if self.ties > 0 {
            let _ = writeln!(out, "\n{} majority-vote ties resolved by the tie rule.", self.ties);
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["statistic", "theme", "first", "second", "value", "band", "degenerate"])?;
        for ((t, a), b) in self.themes.iter().zip(&self.alpha).zip(&self.alpha_band) {
            w.write_record(["alpha", t, "", "", &a.to_string(), b.name(), "false"])?;
        }
        for k in &self.kappa {
            w.write_record([
                "kappa",
                &k.theme,
                &k.first,
                &k.second,
                &k.kappa.value.to_string(),
                k.kappa.band.name(),
                &k.kappa.degenerate.to_string(),
            ])?;
        }
        if let Some(p) = &self.prevalence {
            for (t, v) in p.themes.iter().zip(&p.percent) {
                w.write_record(["prevalence", t, "", "", &v.to_string(), "", "false"])?;
            }
            w.write_record(["prevalence", "", "", "", &p.none_percent.to_string(), "", "false"])?;
        }
        csv_string(w)
    }
}
