//! Text normalisation stages: contraction expansion, tokenisation, stopword
//! removal and stemming.

use std::borrow::Cow;
use std::collections::{HashMap, HashSet};


pub const STOPWORDS_VERSION: &str = "en-179-v1";
pub const CONTRACTIONS_VERSION: &str = "en-126-v1";

const STOPWORDS: &str = include_str!("stopwords.txt");
const CONTRACTIONS: &str = include_str!("contractions.txt");

/// Bound on repeated stemming passes.
const MAX_STEM_PASSES: usize = 8;

pub fn default_stopwords() -> HashSet<String> {
    STOPWORDS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

pub fn default_contractions() -> HashMap<String, String> {
    CONTRACTIONS
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .filter_map(|l| l.split_once('\t'))
        .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
        .collect()
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '\u{2018}' | '`')
}

fn expand_word(word: &str, table: &HashMap<String, String>) -> Option<String> {
    let lower: String = word
        .chars()
        .map(|c| if is_apostrophe(c) { '\'' } else { c })
        .collect::<String>()
        .to_lowercase();
    if let Some(exp) = table.get(&lower) {
        return Some(exp.clone());
    }
    let trimmed = lower.trim_matches('\'');
    if let Some(exp) = table.get(trimmed) {
        return Some(exp.clone());
    }
    if !trimmed.contains('\'') {
        return None;
    }
    // Generic clitics for forms missing from the table.
    const SUFFIXES: [(&str, &str); 7] = [
        ("n't", " not"),
        ("'re", " are"),
        ("'ve", " have"),
        ("'ll", " will"),
        ("'d", " would"),
        ("'m", " am"),
        ("'s", ""),
    ];
    for (suffix, replacement) in SUFFIXES {
        if let Some(stem) = trimmed.strip_suffix(suffix) {
            if !stem.is_empty() {
                return Some(format!("{stem}{replacement}"));
            }
        }
    }
    None
}

/// Replaces contractions with their expansions. Words are maximal runs of
/// alphanumerics and apostrophes; everything else is copied through.
pub fn expand_contractions<'a>(text: &'a str, table: &HashMap<String, String>) -> Cow<'a, str> {
    if table.is_empty() {
        return Cow::Borrowed(text);
    }
    let mut out = String::with_capacity(text.len() + 16);
    let mut word_start: Option<usize> = None;
    let flush = |out: &mut String, word: &str| match expand_word(word, table) {
        Some(exp) => out.push_str(&exp),
        None => out.push_str(word),
    };
    for (i, c) in text.char_indices() {
        let in_word = c.is_alphanumeric() || is_apostrophe(c);
        match (in_word, word_start) {
            (true, None) => word_start = Some(i),
            (false, Some(s)) => {
                flush(&mut out, &text[s..i]);
                out.push(c);
                word_start = None;
            }
            (false, None) => out.push(c),
            (true, Some(_)) => {}
        }
    }
    if let Some(s) = word_start {
        flush(&mut out, &text[s..]);
    }
    Cow::Owned(out)
}

/// Splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Light English suffix stemmer iterated to a fixed point, so stemming an
/// already stemmed token is the identity.
///
/// One pass applies, in order: plural endings, `-ed`/`-ing`, final `y` to
/// `i`, then the endings `-ness`, `-ful`, `-ly` and `-al`. No rule leaves
/// fewer than three characters.
#[derive(Debug, Clone, Copy, Default)]
pub struct TokenStemmer;

const MIN_STEM: usize = 3;

fn has_vowel(s: &str) -> bool {
    s.chars().any(|c| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y'))
}

fn is_consonant(c: char) -> bool {
    c.is_ascii_alphabetic() && !matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

fn strip<'a>(w: &'a str, suffix: &str) -> Option<&'a str> {
    w.strip_suffix(suffix).filter(|s| s.chars().count() >= MIN_STEM)
}

fn plural(w: &str) -> String {
    if let Some(s) = w.strip_suffix("sses") {
        return format!("{s}ss");
    }
    if let Some(s) = w.strip_suffix("ies").filter(|s| s.chars().count() >= 2) {
        return format!("{s}i");
    }
    if w.ends_with('s') && !w.ends_with("ss") && !w.ends_with("us") && !w.ends_with("is") && !w.ends_with("os") {
        if let Some(s) = strip(w, "s") {
            return s.to_owned();
        }
    }
    w.to_owned()
}

fn undouble(s: &str) -> String {
    let cs: Vec<char> = s.chars().collect();
    let n = cs.len();
    if n > MIN_STEM && cs[n - 1] == cs[n - 2] && is_consonant(cs[n - 1]) && !matches!(cs[n - 1], 'l' | 's' | 'z') {
        cs[..n - 1].iter().collect()
    } else {
        s.to_owned()
    }
}

fn verbal(w: &str) -> String {
    if let Some(s) = w.strip_suffix("ied").filter(|s| s.chars().count() >= 2) {
        return format!("{s}i");
    }
    if w.ends_with("eed") {
        return w.to_owned();
    }
    for suffix in ["ing", "ed"] {
        if let Some(s) = strip(w, suffix).filter(|s| has_vowel(s)) {
            return undouble(s);
        }
    }
    w.to_owned()
}

fn final_y(w: &str) -> String {
    let cs: Vec<char> = w.chars().collect();
    let n = cs.len();
    if n >= MIN_STEM && cs[n - 1] == 'y' && is_consonant(cs[n - 2]) {
        let mut s: String = cs[..n - 1].iter().collect();
        s.push('i');
        return s;
    }
    w.to_owned()
}

fn derivational(w: &str) -> String {
    for suffix in ["ness", "ful"] {
        if let Some(s) = strip(w, suffix) {
            return s.to_owned();
        }
    }
    if let Some(s) = w.strip_suffix("ly").filter(|s| s.chars().count() >= 4) {
        return s.to_owned();
    }
    if let Some(s) = w.strip_suffix("al").filter(|s| s.chars().count() >= 5) {
        return s.to_owned();
    }
    w.to_owned()
}

impl TokenStemmer {
    fn pass(&self, w: &str) -> String {
        if !w.chars().all(|c| c.is_ascii_lowercase()) {
            return w.to_owned();
        }
        let w = plural(w);
        let w = verbal(&w);
        let w = final_y(&w);
        derivational(&w)
    }

    pub fn stem(&self, token: &str) -> String {
        let mut current = token.to_owned();
        for _ in 0..MAX_STEM_PASSES {
            let next = self.pass(&current);
            if next == current {
                break;
            }
            current = next;
        }
        current
    }
}

pub fn bigrams(tokens: &[String]) -> Vec<String> {
    tokens.windows(2).map(|w| format!("{} {}", w[0], w[1])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_lists_load() {
        assert_eq!(default_stopwords().len(), 179);
        let c = default_contractions();
        assert!(c.len() >= 120);
        assert_eq!(c["i've"], "i have");
    }

    #[test]
    fn contractions_expand_case_insensitively() {
        let t = default_contractions();
        assert_eq!(expand_contractions("I've been", &t), "i have been");
        assert_eq!(expand_contractions("It\u{2019}s fine.", &t), "it is fine.");
        assert_eq!(expand_contractions("my wife's carer", &t), "my wife carer");
        assert_eq!(expand_contractions("nobody'll know", &t), "nobody will know");
        assert_eq!(expand_contractions("plain text", &t), "plain text");
    }

    #[test]
    fn tokenize_splits_on_non_alphanumerics() {
        assert_eq!(tokenize("bowel-movement, pain!! 43yrs"), vec!["bowel", "movement", "pain", "43yrs"]);
        assert!(tokenize("  ... ").is_empty());
    }

    #[test]
    fn stemmer_reaches_fixed_point() {
        let s = TokenStemmer;
        for w in ["daily", "worried", "peripheral", "neuropathy", "agreed", "generalizations", "movement"] {
            let once = s.stem(w);
            assert_eq!(s.stem(&once), once, "{w}");
        }
        assert_eq!(s.stem("daily"), "daili");
        assert_eq!(s.stem("worried"), "worri");
        assert_eq!(s.stem("movement"), "movement");
        assert_eq!(s.stem("peripheral"), "peripher");
        assert_eq!(s.stem("neuropathy"), "neuropathi");
        assert_eq!(s.stem("activities"), s.stem("activity"));
        assert_eq!(s.stem("walking"), "walk");
        assert_eq!(s.stem("bleeding"), "bleed");
        assert_eq!(s.stem("stopped"), "stop");
        assert_eq!(s.stem("age"), "age");
        assert_eq!(s.stem("nurses"), s.stem("nurse"));
        assert_eq!(s.stem("diagnosis"), "diagnosis");
        assert_eq!(s.stem("43"), "43");
    }
}
