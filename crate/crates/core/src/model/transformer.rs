//! The encoder-decoder model: language-tag conditioning, teacher-forced
//! forward pass, and a hand-written backward pass over the whole stack.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand_chacha::ChaCha12Rng;

use crate::corpus::LanguageTag;
use crate::error::{CoreError, Result};
use crate::rng;
use crate::vocab::Vocabulary;

use super::config::ModelConfig;
use super::layers::{
    dropout_backward, dropout_forward, normal_init, AttentionCache, DropoutCache, FeedForward,
    FeedForwardCache, LayerNorm, LayerNormCache, MultiHeadAttention, Param,
};
use super::math::log_softmax_rows;

const INIT_STD: f64 = 0.02;

/// A token-id sequence carrying its language conditioning. The source side
/// ends with the two tag tokens `<f{src}>`, `<2{tgt}>`; generation starts
/// from `<2{tgt}>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSequence {
    pub tokens: Vec<u32>,
    pub src_lang: LanguageTag,
    pub tgt_lang: LanguageTag,
}

impl TaggedSequence {
    /// The decoder start token, `<2{tgt}>`, always the final source token.
    pub fn decoder_start(&self) -> u32 {
        *self.tokens.last().expect("tagged sequence never empty")
    }

    /// The payload without the two trailing tag tokens.
    pub fn payload(&self) -> &[u32] {
        &self.tokens[..self.tokens.len() - 2]
    }
}

/// Appends `<f{src}>`, `<2{tgt}>` to the payload tokens.
pub fn tag_sequence(
    vocab: &Vocabulary,
    tokens: &[u32],
    src_lang: &LanguageTag,
    tgt_lang: &LanguageTag,
) -> Result<TaggedSequence> {
    let from_id = vocab.from_tag_id(src_lang)?;
    let to_id = vocab.to_tag_id(tgt_lang)?;
    for &t in tokens {
        if vocab.is_tag_id(t) {
            return Err(CoreError::InvalidArgument(format!(
                "payload contains reserved tag id {t}"
            )));
        }
    }
    let mut out = Vec::with_capacity(tokens.len() + 2);
    out.extend_from_slice(tokens);
    out.push(from_id);
    out.push(to_id);
    Ok(TaggedSequence {
        tokens: out,
        src_lang: src_lang.clone(),
        tgt_lang: tgt_lang.clone(),
    })
}

/// A teacher-forcing training pair: tagged source and bare target ids
/// (no start token, no EOS; both are added by the model).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedExample {
    pub src: TaggedSequence,
    pub tgt_ids: Vec<u32>,
}

// ---------------------------------------------------------------------------
// Layer stacks
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct EncoderLayer {
    self_attn: MultiHeadAttention,
    norm1: LayerNorm,
    ffn: FeedForward,
    norm2: LayerNorm,
}

struct EncoderLayerCache {
    ln1: LayerNormCache,
    attn: AttentionCache,
    drop1: DropoutCache,
    ln2: LayerNormCache,
    ffn: FeedForwardCache,
    drop2: DropoutCache,
}

impl EncoderLayer {
    fn init(cfg: &ModelConfig, rng: &mut ChaCha12Rng) -> Self {
        EncoderLayer {
            self_attn: MultiHeadAttention::init(cfg.d_model, cfg.n_heads, INIT_STD, rng),
            norm1: LayerNorm::init(cfg.d_model),
            ffn: FeedForward::init(cfg.d_model, cfg.ffn_dim, INIT_STD, rng),
            norm2: LayerNorm::init(cfg.d_model),
        }
    }

    fn forward(
        &self,
        x: &Array2<f64>,
        dropout: f64,
        rng: &mut Option<&mut ChaCha12Rng>,
    ) -> (Array2<f64>, EncoderLayerCache) {
        let (normed, ln1) = self.norm1.forward(x);
        let (attn_out, attn) = self.self_attn.forward(&normed, &normed, false);
        let (attn_out, drop1) = dropout_forward(attn_out, dropout, rng.as_deref_mut());
        let mid = x + &attn_out;
        let (normed2, ln2) = self.norm2.forward(&mid);
        let (ffn_out, ffn) = self.ffn.forward(&normed2);
        let (ffn_out, drop2) = dropout_forward(ffn_out, dropout, rng.as_deref_mut());
        let out = &mid + &ffn_out;
        (
            out,
            EncoderLayerCache {
                ln1,
                attn,
                drop1,
                ln2,
                ffn,
                drop2,
            },
        )
    }

    fn backward(&mut self, d_out: &Array2<f64>, cache: &EncoderLayerCache) -> Array2<f64> {
        let d_ffn_out = dropout_backward(d_out, &cache.drop2);
        let d_normed2 = self.ffn.backward(&d_ffn_out, &cache.ffn);
        let mut d_mid = d_out.clone();
        d_mid += &self.norm2.backward(&d_normed2, &cache.ln2);

        let d_attn_out = dropout_backward(&d_mid, &cache.drop1);
        let (dq, dkv) = self.self_attn.backward(&d_attn_out, &cache.attn);
        let mut d_x = d_mid;
        d_x += &self.norm1.backward(&(dq + dkv), &cache.ln1);
        d_x
    }

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &Param)) {
        self.self_attn.visit(&format!("{prefix}.self_attn"), f);
        self.norm1.visit(&format!("{prefix}.norm1"), f);
        self.ffn.visit(&format!("{prefix}.ffn"), f);
        self.norm2.visit(&format!("{prefix}.norm2"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Param)) {
        self.self_attn.visit_mut(&format!("{prefix}.self_attn"), f);
        self.norm1.visit_mut(&format!("{prefix}.norm1"), f);
        self.ffn.visit_mut(&format!("{prefix}.ffn"), f);
        self.norm2.visit_mut(&format!("{prefix}.norm2"), f);
    }
}

#[derive(Debug, Clone)]
struct DecoderLayer {
    self_attn: MultiHeadAttention,
    norm1: LayerNorm,
    cross_attn: MultiHeadAttention,
    norm2: LayerNorm,
    ffn: FeedForward,
    norm3: LayerNorm,
}

struct DecoderLayerCache {
    ln1: LayerNormCache,
    self_attn: AttentionCache,
    drop1: DropoutCache,
    ln2: LayerNormCache,
    cross_attn: AttentionCache,
    drop2: DropoutCache,
    ln3: LayerNormCache,
    ffn: FeedForwardCache,
    drop3: DropoutCache,
}

impl DecoderLayer {
    fn init(cfg: &ModelConfig, rng: &mut ChaCha12Rng) -> Self {
        DecoderLayer {
            self_attn: MultiHeadAttention::init(cfg.d_model, cfg.n_heads, INIT_STD, rng),
            norm1: LayerNorm::init(cfg.d_model),
            cross_attn: MultiHeadAttention::init(cfg.d_model, cfg.n_heads, INIT_STD, rng),
            norm2: LayerNorm::init(cfg.d_model),
            ffn: FeedForward::init(cfg.d_model, cfg.ffn_dim, INIT_STD, rng),
            norm3: LayerNorm::init(cfg.d_model),
        }
    }

    fn forward(
        &self,
        x: &Array2<f64>,
        enc_out: &Array2<f64>,
        dropout: f64,
        rng: &mut Option<&mut ChaCha12Rng>,
    ) -> (Array2<f64>, DecoderLayerCache) {
        let (normed, ln1) = self.norm1.forward(x);
        let (sa_out, self_attn) = self.self_attn.forward(&normed, &normed, true);
        let (sa_out, drop1) = dropout_forward(sa_out, dropout, rng.as_deref_mut());
        let a = x + &sa_out;

        let (normed2, ln2) = self.norm2.forward(&a);
        let (ca_out, cross_attn) = self.cross_attn.forward(&normed2, enc_out, false);
        let (ca_out, drop2) = dropout_forward(ca_out, dropout, rng.as_deref_mut());
        let b = &a + &ca_out;

        let (normed3, ln3) = self.norm3.forward(&b);
        let (ffn_out, ffn) = self.ffn.forward(&normed3);
        let (ffn_out, drop3) = dropout_forward(ffn_out, dropout, rng.as_deref_mut());
        let out = &b + &ffn_out;
        (
            out,
            DecoderLayerCache {
                ln1,
                self_attn,
                drop1,
                ln2,
                cross_attn,
                drop2,
                ln3,
                ffn,
                drop3,
            },
        )
    }

    /// Returns `(d_x, d_enc_out)`.
    fn backward(
        &mut self,
        d_out: &Array2<f64>,
        cache: &DecoderLayerCache,
    ) -> (Array2<f64>, Array2<f64>) {
        let d_ffn_out = dropout_backward(d_out, &cache.drop3);
        let d_normed3 = self.ffn.backward(&d_ffn_out, &cache.ffn);
        let mut d_b = d_out.clone();
        d_b += &self.norm3.backward(&d_normed3, &cache.ln3);

        let d_ca_out = dropout_backward(&d_b, &cache.drop2);
        let (d_normed2, d_enc) = self.cross_attn.backward(&d_ca_out, &cache.cross_attn);
        let mut d_a = d_b;
        d_a += &self.norm2.backward(&d_normed2, &cache.ln2);

        let d_sa_out = dropout_backward(&d_a, &cache.drop1);
        let (dq, dkv) = self.self_attn.backward(&d_sa_out, &cache.self_attn);
        let mut d_x = d_a;
        d_x += &self.norm1.backward(&(dq + dkv), &cache.ln1);
        (d_x, d_enc)
    }

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &Param)) {
        self.self_attn.visit(&format!("{prefix}.self_attn"), f);
        self.norm1.visit(&format!("{prefix}.norm1"), f);
        self.cross_attn.visit(&format!("{prefix}.cross_attn"), f);
        self.norm2.visit(&format!("{prefix}.norm2"), f);
        self.ffn.visit(&format!("{prefix}.ffn"), f);
        self.norm3.visit(&format!("{prefix}.norm3"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Param)) {
        self.self_attn.visit_mut(&format!("{prefix}.self_attn"), f);
        self.norm1.visit_mut(&format!("{prefix}.norm1"), f);
        self.cross_attn.visit_mut(&format!("{prefix}.cross_attn"), f);
        self.norm2.visit_mut(&format!("{prefix}.norm2"), f);
        self.ffn.visit_mut(&format!("{prefix}.ffn"), f);
        self.norm3.visit_mut(&format!("{prefix}.norm3"), f);
    }
}

// ---------------------------------------------------------------------------
// Embedding caches
// ---------------------------------------------------------------------------

struct EmbedCache {
    ids: Vec<u32>,
    norm: Option<LayerNormCache>,
    drop: DropoutCache,
}

/// Full activation cache of one teacher-forced example, consumed by
/// [`Seq2SeqModel::backward_example`].
pub struct ForwardCache {
    src_embed: EmbedCache,
    enc_layers: Vec<EncoderLayerCache>,
    enc_final: Option<LayerNormCache>,
    enc_out: Array2<f64>,
    tgt_embed: EmbedCache,
    dec_layers: Vec<DecoderLayerCache>,
    dec_final: Option<LayerNormCache>,
    dec_out: Array2<f64>,
}

// ---------------------------------------------------------------------------
// The model
// ---------------------------------------------------------------------------

/// Parameters are grouped by name: `word_embeddings` (shared by encoder and
/// decoder inputs), `encoder.*` (positions, norms, `encoder.layers.{i}.*`),
/// `decoder.*`, and `output_projection`. Freeze policies and the optimizer
/// address parameters through these names.
pub struct Seq2SeqModel {
    pub cfg: ModelConfig,
    word_embeddings: Param, // (V, d)
    encoder_positions: Param,
    decoder_positions: Param,
    encoder_emb_norm: Option<LayerNorm>,
    decoder_emb_norm: Option<LayerNorm>,
    encoder_layers: Vec<EncoderLayer>,
    decoder_layers: Vec<DecoderLayer>,
    encoder_final_norm: Option<LayerNorm>,
    decoder_final_norm: Option<LayerNorm>,
    output_projection: Param, // (d, V)
}

impl Seq2SeqModel {
    pub fn init(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut r = rng::stream(seed, "model_init", 0, 0);
        let d = cfg.d_model;
        let norm_pair = |on: bool, d: usize| if on { Some(LayerNorm::init(d)) } else { None };
        Ok(Seq2SeqModel {
            word_embeddings: Param::new(normal_init(cfg.vocab_size, d, INIT_STD, &mut r)),
            encoder_positions: Param::new(normal_init(cfg.max_positions, d, INIT_STD, &mut r)),
            decoder_positions: Param::new(normal_init(cfg.max_positions, d, INIT_STD, &mut r)),
            encoder_emb_norm: norm_pair(cfg.extra_layer_norm, d),
            decoder_emb_norm: norm_pair(cfg.extra_layer_norm, d),
            encoder_layers: (0..cfg.n_layers)
                .map(|_| EncoderLayer::init(&cfg, &mut r))
                .collect(),
            decoder_layers: (0..cfg.n_layers)
                .map(|_| DecoderLayer::init(&cfg, &mut r))
                .collect(),
            encoder_final_norm: norm_pair(cfg.extra_layer_norm, d),
            decoder_final_norm: norm_pair(cfg.extra_layer_norm, d),
            output_projection: Param::new(normal_init(d, cfg.vocab_size, INIT_STD, &mut r)),
            cfg,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.cfg.vocab_size
    }

    /// The word-embedding row of a token id, as a plain vector.
    pub fn word_embedding_row(&self, id: u32) -> Result<Vec<f64>> {
        if id as usize >= self.cfg.vocab_size {
            return Err(CoreError::TokenOutOfRange {
                id,
                vocab: self.cfg.vocab_size,
            });
        }
        Ok(self.word_embeddings.value.row(id as usize).to_vec())
    }

    /// Zeroes the output projection; the resulting distribution is uniform.
    pub fn zero_output_projection(&mut self) {
        self.output_projection.value.fill(0.0);
    }

    fn check_ids(&self, ids: &[u32]) -> Result<()> {
        if ids.len() > self.cfg.max_positions {
            return Err(CoreError::SequenceTooLong {
                len: ids.len(),
                max: self.cfg.max_positions,
            });
        }
        for &id in ids {
            if id as usize >= self.cfg.vocab_size {
                return Err(CoreError::TokenOutOfRange {
                    id,
                    vocab: self.cfg.vocab_size,
                });
            }
        }
        Ok(())
    }

    fn embed(
        &self,
        ids: &[u32],
        positions: &Param,
        emb_norm: &Option<LayerNorm>,
        dropout: f64,
        rng: &mut Option<&mut ChaCha12Rng>,
    ) -> (Array2<f64>, EmbedCache) {
        let d = self.cfg.d_model;
        let scale = (d as f64).sqrt();
        let mut h = Array2::zeros((ids.len(), d));
        for (t, &id) in ids.iter().enumerate() {
            let e = self.word_embeddings.value.row(id as usize);
            let p = positions.value.row(t);
            let mut row = h.row_mut(t);
            for j in 0..d {
                row[j] = e[j] * scale + p[j];
            }
        }
        let (h, norm) = match emb_norm {
            Some(n) => {
                let (y, c) = n.forward(&h);
                (y, Some(c))
            }
            None => (h, None),
        };
        let (h, drop) = dropout_forward(h, dropout, rng.as_deref_mut());
        (
            h,
            EmbedCache {
                ids: ids.to_vec(),
                norm,
                drop,
            },
        )
    }

    fn embed_backward(
        &mut self,
        d_h: &Array2<f64>,
        cache: &EmbedCache,
        encoder_side: bool,
    ) {
        let d_h = dropout_backward(d_h, &cache.drop);
        let d_h = match (&cache.norm, encoder_side) {
            (Some(c), true) => self
                .encoder_emb_norm
                .as_mut()
                .expect("norm cache implies norm")
                .backward(&d_h, c),
            (Some(c), false) => self
                .decoder_emb_norm
                .as_mut()
                .expect("norm cache implies norm")
                .backward(&d_h, c),
            (None, _) => d_h,
        };
        let scale = (self.cfg.d_model as f64).sqrt();
        let positions = if encoder_side {
            &mut self.encoder_positions
        } else {
            &mut self.decoder_positions
        };
        for (t, &id) in cache.ids.iter().enumerate() {
            let row = d_h.row(t);
            {
                let mut pg = positions.grad.row_mut(t);
                pg += &row;
            }
            let mut eg = self.word_embeddings.grad.row_mut(id as usize);
            eg.scaled_add(scale, &row);
        }
    }

    /// Encoder forward in eval mode (no dropout, no caches kept).
    pub fn encode(&self, src_ids: &[u32]) -> Result<Array2<f64>> {
        let (out, _) = self.encode_cached(src_ids, 0.0, &mut None)?;
        Ok(out)
    }

    fn encode_cached(
        &self,
        src_ids: &[u32],
        dropout: f64,
        rng: &mut Option<&mut ChaCha12Rng>,
    ) -> Result<(Array2<f64>, (EmbedCache, Vec<EncoderLayerCache>, Option<LayerNormCache>))> {
        self.check_ids(src_ids)?;
        if src_ids.is_empty() {
            return Err(CoreError::InvalidArgument(
                "empty source sequence".to_string(),
            ));
        }
        let (mut h, embed) =
            self.embed(src_ids, &self.encoder_positions, &self.encoder_emb_norm, dropout, rng);
        let mut layer_caches = Vec::with_capacity(self.encoder_layers.len());
        for layer in &self.encoder_layers {
            let (next, cache) = layer.forward(&h, dropout, rng);
            h = next;
            layer_caches.push(cache);
        }
        let final_cache = match &self.encoder_final_norm {
            Some(n) => {
                let (y, c) = n.forward(&h);
                h = y;
                Some(c)
            }
            None => None,
        };
        Ok((h, (embed, layer_caches, final_cache)))
    }

    /// Decoder + projection in eval mode: log-probabilities per position.
    pub fn decode_logprobs(&self, enc_out: &Array2<f64>, dec_input: &[u32]) -> Result<Array2<f64>> {
        let (dec_out, _) = self.decode_cached(enc_out, dec_input, 0.0, &mut None)?;
        let logits = dec_out.dot(&self.output_projection.value);
        Ok(log_softmax_rows(&logits))
    }

    #[allow(clippy::type_complexity)]
    fn decode_cached(
        &self,
        enc_out: &Array2<f64>,
        dec_input: &[u32],
        dropout: f64,
        rng: &mut Option<&mut ChaCha12Rng>,
    ) -> Result<(Array2<f64>, (EmbedCache, Vec<DecoderLayerCache>, Option<LayerNormCache>))> {
        self.check_ids(dec_input)?;
        if dec_input.is_empty() {
            return Err(CoreError::InvalidArgument(
                "empty decoder input".to_string(),
            ));
        }
        let (mut h, embed) =
            self.embed(dec_input, &self.decoder_positions, &self.decoder_emb_norm, dropout, rng);
        let mut layer_caches = Vec::with_capacity(self.decoder_layers.len());
        for layer in &self.decoder_layers {
            let (next, cache) = layer.forward(&h, enc_out, dropout, rng);
            h = next;
            layer_caches.push(cache);
        }
        let final_cache = match &self.decoder_final_norm {
            Some(n) => {
                let (y, c) = n.forward(&h);
                h = y;
                Some(c)
            }
            None => None,
        };
        Ok((h, (embed, layer_caches, final_cache)))
    }

    /// Teacher-forced forward for one example. The decoder input is
    /// `[ <2tgt> , tgt...]` and positions predict `[tgt..., <eos>]`.
    /// Returns per-position log-probabilities `(|tgt|+1, V)` and the
    /// activation cache for [`Self::backward_example`].
    pub fn forward_example(
        &self,
        example: &EncodedExample,
        dropout: f64,
        mut rng: Option<&mut ChaCha12Rng>,
    ) -> Result<(Array2<f64>, ForwardCache)> {
        let (enc_out, (src_embed, enc_layers, enc_final)) =
            self.encode_cached(&example.src.tokens, dropout, &mut rng)?;
        let dec_input = decoder_input(example);
        let (dec_out, (tgt_embed, dec_layers, dec_final)) =
            self.decode_cached(&enc_out, &dec_input, dropout, &mut rng)?;
        let logits = dec_out.dot(&self.output_projection.value);
        let log_probs = log_softmax_rows(&logits);
        Ok((
            log_probs,
            ForwardCache {
                src_embed,
                enc_layers,
                enc_final,
                enc_out,
                tgt_embed,
                dec_layers,
                dec_final,
                dec_out,
            },
        ))
    }

    /// Eval-mode log-probabilities for a batch, one matrix per example.
    pub fn forward_batch(&self, examples: &[EncodedExample]) -> Result<Vec<Array2<f64>>> {
        examples
            .iter()
            .map(|ex| self.forward_example(ex, 0.0, None).map(|(lp, _)| lp))
            .collect()
    }

    /// Accumulates parameter gradients for one example given the gradient
    /// of the loss w.r.t. the output logits.
    pub fn backward_example(&mut self, d_logits: &Array2<f64>, cache: ForwardCache) {
        // Output projection.
        self.output_projection.grad += &cache.dec_out.t().dot(d_logits);
        let mut d_dec = d_logits.dot(&self.output_projection.value.t());

        if let Some(n) = self.decoder_final_norm.as_mut() {
            let c = cache.dec_final.as_ref().expect("final norm cache");
            d_dec = n.backward(&d_dec, c);
        }

        let mut d_enc_total: Array2<f64> = Array2::zeros(cache.enc_out.raw_dim());
        for (layer, lcache) in self
            .decoder_layers
            .iter_mut()
            .zip(cache.dec_layers.iter())
            .rev()
        {
            let (dx, d_enc) = layer.backward(&d_dec, lcache);
            d_dec = dx;
            d_enc_total += &d_enc;
        }
        self.embed_backward(&d_dec, &cache.tgt_embed, false);

        let mut d_enc = d_enc_total;
        if let Some(n) = self.encoder_final_norm.as_mut() {
            let c = cache.enc_final.as_ref().expect("final norm cache");
            d_enc = n.backward(&d_enc, c);
        }
        for (layer, lcache) in self
            .encoder_layers
            .iter_mut()
            .zip(cache.enc_layers.iter())
            .rev()
        {
            d_enc = layer.backward(&d_enc, lcache);
        }
        self.embed_backward(&d_enc, &cache.src_embed, true);
    }

    // -- parameter access ---------------------------------------------------

    pub fn visit_params(&self, f: &mut dyn FnMut(String, &Param)) {
        f("word_embeddings".to_string(), &self.word_embeddings);
        f("encoder.positions".to_string(), &self.encoder_positions);
        if let Some(n) = &self.encoder_emb_norm {
            n.visit("encoder.emb_norm", f);
        }
        for (i, layer) in self.encoder_layers.iter().enumerate() {
            layer.visit(&format!("encoder.layers.{i}"), f);
        }
        if let Some(n) = &self.encoder_final_norm {
            n.visit("encoder.final_norm", f);
        }
        f("decoder.positions".to_string(), &self.decoder_positions);
        if let Some(n) = &self.decoder_emb_norm {
            n.visit("decoder.emb_norm", f);
        }
        for (i, layer) in self.decoder_layers.iter().enumerate() {
            layer.visit(&format!("decoder.layers.{i}"), f);
        }
        if let Some(n) = &self.decoder_final_norm {
            n.visit("decoder.final_norm", f);
        }
        f("output_projection".to_string(), &self.output_projection);
    }

    pub fn visit_params_mut(&mut self, f: &mut dyn FnMut(String, &mut Param)) {
        f("word_embeddings".to_string(), &mut self.word_embeddings);
        f("encoder.positions".to_string(), &mut self.encoder_positions);
        if let Some(n) = &mut self.encoder_emb_norm {
            n.visit_mut("encoder.emb_norm", f);
        }
        for (i, layer) in self.encoder_layers.iter_mut().enumerate() {
            layer.visit_mut(&format!("encoder.layers.{i}"), f);
        }
        if let Some(n) = &mut self.encoder_final_norm {
            n.visit_mut("encoder.final_norm", f);
        }
        f("decoder.positions".to_string(), &mut self.decoder_positions);
        if let Some(n) = &mut self.decoder_emb_norm {
            n.visit_mut("decoder.emb_norm", f);
        }
        for (i, layer) in self.decoder_layers.iter_mut().enumerate() {
            layer.visit_mut(&format!("decoder.layers.{i}"), f);
        }
        if let Some(n) = &mut self.decoder_final_norm {
            n.visit_mut("decoder.final_norm", f);
        }
        f("output_projection".to_string(), &mut self.output_projection);
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        self.visit_params(&mut |name, _| names.push(name));
        names
    }

    pub fn n_params(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, p| n += p.n_elements());
        n
    }

    pub fn zero_grads(&mut self) {
        self.visit_params_mut(&mut |_, p| p.zero_grad());
    }

    /// Copies all parameter values into a name-indexed map.
    pub fn snapshot(&self) -> BTreeMap<String, Array2<f64>> {
        let mut map = BTreeMap::new();
        self.visit_params(&mut |name, p| {
            map.insert(name, p.value.clone());
        });
        map
    }

    /// Restores parameter values from a snapshot; missing or mismatched
    /// names are an error.
    pub fn load_snapshot(&mut self, snapshot: &BTreeMap<String, Array2<f64>>) -> Result<()> {
        let mut err = None;
        self.visit_params_mut(&mut |name, p| {
            if err.is_some() {
                return;
            }
            match snapshot.get(&name) {
                Some(v) if v.raw_dim() == p.value.raw_dim() => p.value.assign(v),
                Some(_) => err = Some(CoreError::ShapeMismatch(name)),
                None => err = Some(CoreError::CheckpointFormat(format!("missing tensor {name}"))),
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Deep copy of the model (parameters and config).
    pub fn clone_model(&self) -> Self {
        Seq2SeqModel {
            cfg: self.cfg.clone(),
            word_embeddings: self.word_embeddings.clone(),
            encoder_positions: self.encoder_positions.clone(),
            decoder_positions: self.decoder_positions.clone(),
            encoder_emb_norm: self.encoder_emb_norm.clone(),
            decoder_emb_norm: self.decoder_emb_norm.clone(),
            encoder_layers: self.encoder_layers.clone(),
            decoder_layers: self.decoder_layers.clone(),
            encoder_final_norm: self.encoder_final_norm.clone(),
            decoder_final_norm: self.decoder_final_norm.clone(),
            output_projection: self.output_projection.clone(),
        }
    }
}

/// `[ <2tgt>, tgt... ]` — teacher-forcing decoder input.
pub fn decoder_input(example: &EncodedExample) -> Vec<u32> {
    let mut v = Vec::with_capacity(example.tgt_ids.len() + 1);
    v.push(example.src.decoder_start());
    v.extend_from_slice(&example.tgt_ids);
    v
}

/// `[ tgt..., <eos> ]` — the positions scored by the decoder.
pub fn decoder_targets(example: &EncodedExample, eos_id: u32) -> Vec<u32> {
    let mut v = Vec::with_capacity(example.tgt_ids.len() + 1);
    v.extend_from_slice(&example.tgt_ids);
    v.push(eos_id);
    v
}
