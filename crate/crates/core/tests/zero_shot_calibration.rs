//! Scratch calibration harness for the two-language zero-shot testbed.
//! Ignored by default; run with `--ignored --nocapture` to print fidelity
//! and ROUGE-L numbers while tuning the testbed configuration.

use std::time::Instant;

use xlgen_core::auxdata::{first_sentence_task, generate_aux_dataset, AuxConfig, PairRecord};
use xlgen_core::corpus::{generate_synthetic_corpus, synthetic_vocabulary, LanguageTag};
use xlgen_core::evalsuite::{
    language_fidelity, rouge, EvalTokenizer, RougeVariant, WhitespacePunctTokenizer,
};
use xlgen_core::model::{beam_search, tag_sequence, EncodedExample, ModelConfig, Seq2SeqModel};
use xlgen_core::training::{
    encode_records, fewshot_finetune, finetune, pretrain_auxiliary, FreezePolicy, TrainConfig,
};
use xlgen_core::vocab::Vocabulary;

const LANG_VOCAB: usize = 40;
const SENT_LEN: (usize, usize) = (3, 6);
const PASSAGE_LEN: (usize, usize) = (3, 6);

struct Testbed {
    vocab: Vocabulary,
    aux_train: Vec<EncodedExample>,
    aux_valid: Vec<EncodedExample>,
    task_a_train: Vec<EncodedExample>,
    task_a_valid: Vec<EncodedExample>,
    task_b_test: Vec<PairRecord>,
    task_b_train: Vec<PairRecord>,
    model_cfg: ModelConfig,
}

fn lang(code: &str) -> LanguageTag {
    LanguageTag::new(code).unwrap()
}

fn build_testbed(seed: u64) -> Testbed {
    let la = lang("aa");
    let lb = lang("bb");
    let corpus_a = generate_synthetic_corpus(&la, LANG_VOCAB, 3000, SENT_LEN, seed * 100 + 1).unwrap();
    let corpus_b = generate_synthetic_corpus(&lb, LANG_VOCAB, 3000, SENT_LEN, seed * 100 + 2).unwrap();
    let vocab = Vocabulary::build(
        &[corpus_a.clone(), corpus_b.clone()],
        &[la.clone(), lb.clone()],
        0,
    )
    .unwrap();

    let aux_cfg = AuxConfig {
        len_range: PASSAGE_LEN,
        fraction: 0.2,
    };
    let aux = generate_aux_dataset(
        &[corpus_a.clone(), corpus_b.clone()],
        1200,
        &aux_cfg,
        seed * 100 + 3,
    )
    .unwrap();
    let aux_records: Vec<PairRecord> = aux.iter().map(|e| e.to_record()).collect();
    let (aux_valid_recs, aux_train_recs) = aux_records.split_at(160);

    let task_a = first_sentence_task(&corpus_a, 1650, PASSAGE_LEN, seed * 100 + 4).unwrap();
    let (task_a_valid_recs, task_a_train_recs) = task_a.split_at(150);
    let task_b_test = first_sentence_task(&corpus_b, 220, PASSAGE_LEN, seed * 100 + 5).unwrap();
    let task_b_train = first_sentence_task(&corpus_b, 1100, PASSAGE_LEN, seed * 100 + 6).unwrap();

    let model_cfg = ModelConfig {
        n_layers: 2,
        n_heads: 4,
        d_model: 64,
        ffn_dim: 256,
        vocab_size: vocab.len(),
        max_positions: 64,
        dropout: 0.1,
        label_smoothing: 0.1,
        extra_layer_norm: true,
    };

    Testbed {
        aux_train: encode_records(aux_train_recs, &vocab).unwrap(),
        aux_valid: encode_records(aux_valid_recs, &vocab).unwrap(),
        task_a_train: encode_records(task_a_train_recs, &vocab).unwrap(),
        task_a_valid: encode_records(task_a_valid_recs, &vocab).unwrap(),
        task_b_test,
        task_b_train,
        vocab,
        model_cfg,
    }
}

fn train_cfg(max_steps: u64, lr: f64, seed: u64) -> TrainConfig {
    TrainConfig {
        lr,
        warmup_steps: 60,
        max_steps,
        batch_tokens: 800,
        dropout_stages: vec![(0, 0.1)],
        eval_interval: 100,
        seed,
        ..TrainConfig::default()
    }
}

/// Decode the language-B test inputs and return (fidelity, mean ROUGE-L x100).
fn decode_and_score(model: &Seq2SeqModel, vocab: &Vocabulary, test: &[PairRecord]) -> (f64, f64) {
    let lb = lang("bb");
    let target_vocab: std::collections::BTreeSet<String> =
        synthetic_vocabulary(&lb, LANG_VOCAB).into_iter().collect();
    let tok = WhitespacePunctTokenizer;
    let mut outputs = Vec::with_capacity(test.len());
    let mut rouge_sum = 0.0;
    for rec in test {
        let src = tag_sequence(vocab, &vocab.encode(&rec.src), &lb, &lb).unwrap();
        let hyp = beam_search(model, &src, 5, 12, None).unwrap();
        let text = vocab.decode(&hyp.tokens);
        rouge_sum += if tok.tokenize(&text).is_empty() {
            0.0
        } else {
            rouge(&text, &rec.tgt, RougeVariant::L, &tok).unwrap().f1
        };
        outputs.push(text);
    }
    (
        language_fidelity(&outputs, &target_vocab),
        100.0 * rouge_sum / test.len() as f64,
    )
}

#[test]
#[ignore = "manual calibration harness"]
fn calibrate_zero_shot_and_few_shot() {
    for seed in [1u64, 2, 3] {
        let t0 = Instant::now();
        let tb = build_testbed(seed);
        let mut base = Seq2SeqModel::init(tb.model_cfg.clone(), seed).unwrap();
        let pre = pretrain_auxiliary(
            &mut base,
            &tb.aux_train,
            Some(&tb.aux_valid),
            &train_cfg(600, 3e-3, seed),
            None,
        )
        .unwrap();
        println!(
            "seed {seed}: pretrain {:.1}s, first loss {:.3}, last loss {:.3}, best val {:?}",
            t0.elapsed().as_secs_f64(),
            pre.trajectory.first().unwrap().loss,
            pre.trajectory.last().unwrap().loss,
            pre.best_val_loss
        );

        for policy_name in ["NONE", "WE_DEC"] {
            let t1 = Instant::now();
            let policy = match policy_name {
                "NONE" => FreezePolicy::none(),
                _ => FreezePolicy::we_dec(),
            };
            let mut model = base.clone_model();
            let (out, mask) = finetune(
                &mut model,
                &tb.task_a_train,
                Some(&tb.task_a_valid),
                &policy,
                None,
                &train_cfg(300, 3e-3, seed + 10),
                None,
            )
            .unwrap();
            let (fidelity, rouge_l) = decode_and_score(&model, &tb.vocab, &tb.task_b_test);
            println!(
                "seed {seed} {policy_name}: ft {:.1}s, train loss {:.3}, val {:?}, B-fidelity {fidelity:.3}, B-rougeL {rouge_l:.1}",
                t1.elapsed().as_secs_f64(),
                out.trajectory.last().unwrap().loss,
                out.best_val_loss,
            );

            if policy_name == "WE_DEC" {
                for n in [100usize, 500, 1000] {
                    let t2 = Instant::now();
                    let mut fs_model = model.clone_model();
                    let recs = &tb.task_b_train[..n];
                    let examples = encode_records(recs, &tb.vocab).unwrap();
                    fewshot_finetune(
                        &mut fs_model,
                        &examples,
                        None,
                        &train_cfg(150, 1e-3, seed + 20),
                        false,
                        &mask,
                        None,
                    )
                    .unwrap();
                    let (fid_n, rouge_n) = decode_and_score(&fs_model, &tb.vocab, &tb.task_b_test);
                    println!(
                        "seed {seed} fewshot n={n}: {:.1}s, fidelity {fid_n:.3}, rougeL {rouge_n:.1}",
                        t2.elapsed().as_secs_f64()
                    );
                }
            }
        }
        println!("seed {seed} total {:.1}s", t0.elapsed().as_secs_f64());
    }
}
