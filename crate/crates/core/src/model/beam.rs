//! Greedy and beam-search decoding.

use crate::error::{CoreError, Result};
use crate::vocab::EOS_ID;

use super::transformer::{Seq2SeqModel, TaggedSequence};

/// A completed hypothesis: generated tokens (EOS excluded) and the summed
/// token log-probability (EOS included when the hypothesis ended with one).
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<u32>,
    pub score: f64,
    pub ended_with_eos: bool,
}

impl Hypothesis {
    /// Number of scored decoding steps.
    fn steps(&self) -> usize {
        self.tokens.len() + usize::from(self.ended_with_eos)
    }

    fn normalized(&self, length_penalty: Option<f64>) -> f64 {
        match length_penalty {
            Some(alpha) => self.score / (self.steps().max(1) as f64).powf(alpha),
            None => self.score,
        }
    }
}

/// Greedy decoding: the per-step argmax, stopping at EOS or `max_len`.
pub fn greedy_decode(
    model: &Seq2SeqModel,
    input: &TaggedSequence,
    max_len: usize,
) -> Result<Hypothesis> {
    if max_len < 1 {
        return Err(CoreError::InvalidArgument(
            "max_len must be at least 1".to_string(),
        ));
    }
    let enc_out = model.encode(&input.tokens)?;
    let start = input.decoder_start();
    let mut tokens: Vec<u32> = Vec::new();
    let mut score = 0.0;
    let mut ended_with_eos = false;
    for _ in 0..max_len {
        let mut dec_input = Vec::with_capacity(tokens.len() + 1);
        dec_input.push(start);
        dec_input.extend_from_slice(&tokens);
        let lp = model.decode_logprobs(&enc_out, &dec_input)?;
        let last = lp.row(lp.nrows() - 1);
        let (best_id, best_lp) = argmax(last.iter().cloned());
        score += best_lp;
        if best_id == EOS_ID {
            ended_with_eos = true;
            break;
        }
        tokens.push(best_id);
    }
    Ok(Hypothesis {
        tokens,
        score,
        ended_with_eos,
    })
}

fn argmax(values: impl Iterator<Item = f64>) -> (u32, f64) {
    let mut best = (0u32, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i as u32, v);
        }
    }
    best
}

/// Beam search over the full vocabulary. The decoder context starts with
/// the target-language tag; per step, the top `beam_size` candidates
/// (live-hypothesis score plus token log-probability) survive. A candidate
/// choosing EOS completes; hypotheses still live at `max_len` complete
/// as-is. Returns the best completed hypothesis under the optional length
/// penalty `score / steps^alpha`.
pub fn beam_search(
    model: &Seq2SeqModel,
    input: &TaggedSequence,
    beam_size: usize,
    max_len: usize,
    length_penalty: Option<f64>,
) -> Result<Hypothesis> {
    if beam_size < 1 {
        return Err(CoreError::InvalidArgument(
            "beam_size must be at least 1".to_string(),
        ));
    }
    if max_len < 1 {
        return Err(CoreError::InvalidArgument(
            "max_len must be at least 1".to_string(),
        ));
    }
    let enc_out = model.encode(&input.tokens)?;
    let start = input.decoder_start();

    struct Live {
        tokens: Vec<u32>,
        score: f64,
    }
    let mut live = vec![Live {
        tokens: Vec::new(),
        score: 0.0,
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();

    for _ in 0..max_len {
        if live.is_empty() {
            break;
        }
        // (candidate score, source beam, token)
        let mut candidates: Vec<(f64, usize, u32)> = Vec::new();
        for (bi, hyp) in live.iter().enumerate() {
            let mut dec_input = Vec::with_capacity(hyp.tokens.len() + 1);
            dec_input.push(start);
            dec_input.extend_from_slice(&hyp.tokens);
            let lp = model.decode_logprobs(&enc_out, &dec_input)?;
            let last = lp.row(lp.nrows() - 1);
            for (tok, &token_lp) in last.iter().enumerate() {
                candidates.push((hyp.score + token_lp, bi, tok as u32));
            }
        }
        candidates.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| a.2.cmp(&b.2))
                .then_with(|| a.1.cmp(&b.1))
        });
        candidates.truncate(beam_size);

        let mut next_live = Vec::with_capacity(beam_size);
        for (score, bi, tok) in candidates {
            if tok == EOS_ID {
                finished.push(Hypothesis {
                    tokens: live[bi].tokens.clone(),
                    score,
                    ended_with_eos: true,
                });
            } else {
                let mut tokens = live[bi].tokens.clone();
                tokens.push(tok);
                next_live.push(Live { tokens, score });
            }
        }
        live = next_live;
    }
    for hyp in live {
        finished.push(Hypothesis {
            tokens: hyp.tokens,
            score: hyp.score,
            ended_with_eos: false,
        });
    }

    finished
        .into_iter()
        .max_by(|a, b| {
            a.normalized(length_penalty)
                .total_cmp(&b.normalized(length_penalty))
                .then_with(|| b.steps().cmp(&a.steps()).reverse())
                .then_with(|| b.tokens.cmp(&a.tokens))
        })
        .ok_or_else(|| CoreError::InvalidArgument("no hypothesis produced".to_string()))
}
