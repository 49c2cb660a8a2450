//! Evaluation: confusion metrics, summaries, agreement statistics,
//! majority-vote gold, prevalence and keyword tables.

pub mod agreement;
pub mod keywords;
pub mod metrics;

pub use agreement::{
    agreement_report, alpha_from_units, cohen_kappa, krippendorff_alpha, majority_gold, majority_vote, prevalence,
    AgreementReport, AnnotationSet, Band, Kappa, Prevalence, TieRule, Vote,
};
pub use keywords::{extract_keywords, render_side_by_side, KeywordEntry, KeywordTable};
pub use metrics::{per_theme_metrics, summarize, ConfusionCounts, LabelMap, MeanStd, MetricsReport, Summary, ThemeMetrics};
