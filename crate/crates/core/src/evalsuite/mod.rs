//! Automated evaluation: BLEU-4, ROUGE-1/2/L, an embedding F-score with
//! greedy token matching, per-task metric conventions, and the
//! language-fidelity rate used by the zero-shot transfer experiments.

pub mod bleu;
pub mod embed;
pub mod rouge;
pub mod tokenize;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::LanguageTag;
use crate::error::{CoreError, Result};

pub use bleu::bleu4;
pub use embed::{embed_score, Embedder, ModelEmbedder, OneHotEmbedder};
pub use rouge::{lcs_length, rouge, PrecisionRecallF1, RougeVariant};
pub use tokenize::{EvalTokenizer, WhitespacePunctTokenizer};

/// Which metrics a task reports: headline generation and summarization use
/// ROUGE-1/2/L; question and distractor generation use BLEU-4, ROUGE-L,
/// and the embedding F-score. Unrecognized tasks report everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    HeadlineOrSummary,
    QuestionOrDistractor,
    Other,
}

impl TaskKind {
    pub fn from_name(name: &str) -> Self {
        match name.to_ascii_lowercase().as_str() {
            "nhg" | "ats" => TaskKind::HeadlineOrSummary,
            "qg" | "dg" => TaskKind::QuestionOrDistractor,
            _ => TaskKind::Other,
        }
    }

    fn wants_bleu(&self) -> bool {
        !matches!(self, TaskKind::HeadlineOrSummary)
    }

    fn wants_rouge_n(&self) -> bool {
        !matches!(self, TaskKind::QuestionOrDistractor)
    }

    fn wants_embed(&self) -> bool {
        !matches!(self, TaskKind::HeadlineOrSummary)
    }
}

/// Per-(task, language) metric bundle. ROUGE and embedding scores are F1
/// in [0, 1] (conventionally reported x100); BLEU-4 is already on the
/// 0-100 scale. Fields outside the task's convention stay `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub lang: String,
    pub bleu4: Option<f64>,
    pub rouge1: Option<f64>,
    pub rouge2: Option<f64>,
    pub rouge_l: Option<f64>,
    pub embed_f: Option<f64>,
    pub n_examples: usize,
    pub tokenizer_id: String,
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CoreError::io(path.display().to_string(), e))?;
    Ok(text.lines().map(str::to_string).collect())
}

/// Scores an output file against aligned references under the task's
/// metric conventions. Hypotheses that tokenize to nothing score zero on
/// the pairwise metrics.
pub fn evaluate_run(
    outputs_file: &Path,
    references_file: &Path,
    task: &str,
    lang: &LanguageTag,
    embedder: Option<&dyn Embedder>,
    tokenizer: &dyn EvalTokenizer,
) -> Result<EvalReport> {
    let outputs = read_lines(outputs_file)?;
    let references = read_lines(references_file)?;
    if outputs.len() != references.len() {
        return Err(CoreError::Misaligned(format!(
            "{} outputs vs {} references",
            outputs.len(),
            references.len()
        )));
    }
    if outputs.is_empty() {
        return Err(CoreError::EmptyDataset(
            outputs_file.display().to_string(),
        ));
    }
    let kind = TaskKind::from_name(task);

    let mean_pairwise = |f: &dyn Fn(&str, &str) -> Result<f64>| -> Result<f64> {
        let mut total = 0.0;
        for (hyp, reference) in outputs.iter().zip(&references) {
            if tokenizer.tokenize(hyp).is_empty() {
                continue; // counts as zero
            }
            total += f(hyp, reference)?;
        }
        Ok(total / outputs.len() as f64)
    };

    let rouge_f = |variant: RougeVariant| -> Result<f64> {
        mean_pairwise(&|h, r| Ok(rouge(h, r, variant, tokenizer)?.f1))
    };

    let bleu = if kind.wants_bleu() {
        Some(bleu4(&outputs, &references, tokenizer)?)
    } else {
        None
    };
    let (rouge1, rouge2) = if kind.wants_rouge_n() {
        (
            Some(rouge_f(RougeVariant::N1)?),
            Some(rouge_f(RougeVariant::N2)?),
        )
    } else {
        (None, None)
    };
    let rouge_l = Some(rouge_f(RougeVariant::L)?);
    let embed_f = match (kind.wants_embed(), embedder) {
        (true, Some(embedder)) => {
            Some(mean_pairwise(&|h, r| Ok(embed_score(h, r, embedder, tokenizer)?.f1))?)
        }
        _ => None,
    };

    Ok(EvalReport {
        task: task.to_string(),
        lang: lang.code().to_string(),
        bleu4: bleu,
        rouge1,
        rouge2,
        rouge_l,
        embed_f,
        n_examples: outputs.len(),
        tokenizer_id: tokenizer.id().to_string(),
    })
}

/// Fraction of whitespace tokens across all outputs satisfying the
/// target-language predicate. Outputs with no tokens contribute nothing.
pub fn language_fidelity_by(outputs: &[String], is_target: impl Fn(&str) -> bool) -> f64 {
    let mut total = 0usize;
    let mut matching = 0usize;
    for line in outputs {
        for token in line.split_whitespace() {
            total += 1;
            if is_target(token) {
                matching += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        matching as f64 / total as f64
    }
}

/// Vocabulary-membership fidelity for the synthetic disjoint-vocabulary
/// setting.
pub fn language_fidelity(outputs: &[String], target_vocab: &BTreeSet<String>) -> f64 {
    language_fidelity_by(outputs, |t| target_vocab.contains(t))
}
