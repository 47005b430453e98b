use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::detector::{cosine_distance, ClassMetrics, EmbeddingProvider};
use crate::extractor::{extract_species, ExtractMode, ExtractorError, LlmBackend, PromptBudget, ResponseCache};
use crate::record::ScoredSentence;
use crate::schema::TraitSchema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpertVerdict {
    CanInfer,
    CannotInfer,
}

/// One expert-judged (trait, snippet) pair as read from the study CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertRow {
    #[serde(rename = "trait")]
    pub trait_name: String,
    pub species: String,
    pub snippet: String,
    pub expert_verdict: ExpertVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FnStudyRecord {
    #[serde(rename = "trait")]
    pub trait_name: String,
    pub species: String,
    pub snippet: String,
    /// The expert judged the trait inferable from the snippet.
    pub gt_found: bool,
    /// The model committed to at least one value of the trait.
    pub llm_found: bool,
}

/// Table of expert verdicts against model answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport {
    /// `counts[gt][llm]`, index 0 = missing, 1 = found.
    pub counts: [[usize; 2]; 2],
    pub found: ClassMetrics,
    pub missing: ClassMetrics,
    pub macro_f1: f64,
}

impl ConfusionReport {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn to_text(&self) -> String {
        let c = &self.counts;
        let mut s = String::new();
        let _ = writeln!(s, "{:<12}{:>14}{:>12}", "", "LLM missing", "LLM found");
        let _ = writeln!(s, "{:<12}{:>14}{:>12}", "GT missing", c[0][0], c[0][1]);
        let _ = writeln!(s, "{:<12}{:>14}{:>12}", "GT found", c[1][0], c[1][1]);
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<12}{:>10}{:>10}{:>10}{:>10}",
            "class", "precision", "recall", "f1", "support"
        );
        for (name, m) in [("missing", &self.missing), ("found", &self.found)] {
            let _ = writeln!(
                s,
                "{:<12}{:>10.3}{:>10.3}{:>10.3}{:>10}",
                name, m.precision, m.recall, m.f1, m.count
            );
        }
        let _ = writeln!(s, "{:<12}{:>30.3}", "macro f1", self.macro_f1);
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("class,precision,recall,f1,support\n");
        for (name, m) in [("missing", &self.missing), ("found", &self.found)] {
            let _ = writeln!(s, "{name},{:.4},{:.4},{:.4},{}", m.precision, m.recall, m.f1, m.count);
        }
        let _ = writeln!(s, "macro,,,{:.4},{}", self.macro_f1, self.total());
        s
    }
}

/// Builds the report straight from the four cell counts.
pub fn confusion_from_counts(counts: [[usize; 2]; 2]) -> Result<ConfusionReport, EvalError> {
    let [[mm, mf], [fm, ff]] = counts;
    if mm + mf + fm + ff == 0 {
        return Err(EvalError::EmptyStudy);
    }
    let found = ClassMetrics::from_counts(ff, mf, fm);
    let missing = ClassMetrics::from_counts(mm, fm, mf);
    Ok(ConfusionReport {
        counts,
        found,
        missing,
        macro_f1: (found.f1 + missing.f1) / 2.0,
    })
}

pub fn binary_confusion(records: &[FnStudyRecord]) -> Result<ConfusionReport, EvalError> {
    let mut counts = [[0usize; 2]; 2];
    for r in records {
        counts[usize::from(r.gt_found)][usize::from(r.llm_found)] += 1;
    }
    confusion_from_counts(counts)
}

pub fn read_expert_rows<R: Read>(reader: R) -> Result<Vec<ExpertRow>, EvalError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for (i, r) in rdr.deserialize::<ExpertRow>().enumerate() {
        let row = r?;
        if row.snippet.trim().is_empty() {
            return Err(EvalError::Malformed(format!(
                "study row {} has an empty snippet",
                i + 1
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_records(records: &[FnStudyRecord]) -> Result<String, EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| EvalError::Malformed(e.to_string()))?).unwrap())
}

/// Asks the model about each expert row with a single-trait prompt over the snippet alone.
pub fn run_fn_study(
    rows: &[ExpertRow],
    schema: &TraitSchema,
    backend: &dyn LlmBackend,
    cache: Option<&ResponseCache>,
    budget: &PromptBudget,
) -> Result<Vec<FnStudyRecord>, EvalError> {
    rows.iter()
        .map(|row| {
            let slice = schema
                .single(&row.trait_name)
                .ok_or_else(|| EvalError::UnknownTrait(row.trait_name.clone()))?;
            let sentence = ScoredSentence::new(&row.species, "", &row.snippet, 1.0)
                .ok_or_else(|| EvalError::Malformed("empty snippet".into()))?;
            let out = extract_species(
                &row.species,
                &[sentence],
                &slice,
                ExtractMode::SingleTrait,
                backend,
                cache,
                budget,
            )?;
            Ok(FnStudyRecord {
                trait_name: row.trait_name.clone(),
                species: row.species.clone(),
                snippet: row.snippet.clone(),
                gt_found: row.expert_verdict == ExpertVerdict::CanInfer,
                llm_found: out.row.iter().any(|c| !c.is_na()),
            })
        })
        .collect()
}

impl From<ExtractorError> for EvalError {
    fn from(e: ExtractorError) -> Self {
        EvalError::Extractor(e.to_string())
    }
}

/// The `k` sentences of the given species closest to the trait name in embedding space.
///
/// Ties are broken by (species, url, sentence).
pub fn select_snippets<'a>(
    trait_name: &str,
    species_pool: &[String],
    sentence_store: &'a [ScoredSentence],
    provider: &dyn EmbeddingProvider,
    k: usize,
) -> Vec<(&'a str, &'a str)> {
    let pool: HashSet<&str> = species_pool.iter().map(String::as_str).collect();
    let query = provider.embed_sparse(trait_name);
    let mut scored: Vec<(f64, &ScoredSentence)> = sentence_store
        .iter()
        .filter(|s| pool.contains(s.species.as_str()))
        .map(|s| (cosine_distance(&query, &provider.embed_sparse(&s.sentence)), s))
        .collect();
    scored.sort_by(|(da, a), (db, b)| {
        da.partial_cmp(db)
            .unwrap_or(Ordering::Equal)
            .then_with(|| (&a.species, &a.url, &a.sentence).cmp(&(&b.species, &b.url, &b.sentence)))
    });
    scored
        .into_iter()
        .take(k)
        .map(|(_, s)| (s.species.as_str(), s.sentence.as_str()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::HashedNgramProvider;
    use crate::extractor::MockLlm;

    #[test]
    fn agreeing_records_score_one() {
        let rec = |gt, llm| FnStudyRecord {
            trait_name: "T".into(),
            species: "S s".into(),
            snippet: "x".into(),
            gt_found: gt,
            llm_found: llm,
        };
        let r = binary_confusion(&[rec(true, true), rec(false, false), rec(true, true)]).unwrap();
        assert_eq!(r.found.f1, 1.0);
        assert_eq!(r.missing.f1, 1.0);
        assert_eq!(r.counts, [[1, 0], [0, 2]]);
        assert!(matches!(binary_confusion(&[]), Err(EvalError::EmptyStudy)));
    }

    #[test]
    fn study_csv_round_trip() {
        let csv = "trait,species,snippet,expert_verdict\nHabit,A b,\"A tall tree, evergreen.\",can_infer\nHabit,A b,Grows in swamps.,cannot_infer\n";
        let rows = read_expert_rows(csv.as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].expert_verdict, ExpertVerdict::CanInfer);
        let schema = TraitSchema::new(vec![("Habit", vec!["Tree", "Liana"])]).unwrap();
        let recs = run_fn_study(&rows, &schema, &MockLlm, None, &PromptBudget::default()).unwrap();
        assert_eq!((recs[0].gt_found, recs[0].llm_found), (true, true));
        assert_eq!((recs[1].gt_found, recs[1].llm_found), (false, false));
        let out = write_records(&recs).unwrap();
        assert!(out.starts_with("trait,species,snippet,gt_found,llm_found\n"));
        assert!(read_expert_rows("trait,species,snippet,expert_verdict\nHabit,A b, ,can_infer\n".as_bytes()).is_err());
        assert!(read_expert_rows("trait,species,snippet,expert_verdict\nHabit,A b,x,maybe\n".as_bytes()).is_err());
    }

    #[test]
    fn snippets_nearest_first_with_stable_ties() {
        let p = HashedNgramProvider::new(1 << 12, 0);
        let s = |sp: &str, url: &str, text: &str| ScoredSentence::new(sp, url, text, 0.9).unwrap();
        let store = vec![
            s("B b", "u2", "Leaf position alternate."),
            s("A a", "u1", "Bark smooth and grey."),
            s("A a", "u1", "Leaf position alternate."),
            s("C c", "u1", "Leaf position alternate."),
        ];
        let pool = vec!["A a".to_string(), "B b".to_string()];
        let got = select_snippets("Leaf position", &pool, &store, &p, 2);
        assert_eq!(
            got,
            [("A a", "Leaf position alternate."), ("B b", "Leaf position alternate.")]
        );
        assert_eq!(select_snippets("Leaf position", &pool, &store, &p, 10).len(), 3);
    }
}
