//! BERT-architecture encoder with an MLM head and a K-way classification
//! head, with hand-written reverse-mode gradients.
//!
//! All parameters live in one flat `Vec<f64>` described by a [`Layout`]:
//! encoder parameters first, then the MLM head, then the classifier. Linear
//! weights are stored `d_in × d_out`; the MLM decoder and the classifier are
//! stored `out × hidden`.

use std::ops::Range;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ops::{
    gelu, gelu_grad, gemm, layer_norm, layer_norm_backward, linear, linear_backward,
    softmax_in_place, LayerNormCache,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub hidden_size: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub intermediate_size: usize,
    pub max_positions: usize,
    pub type_vocab_size: usize,
    pub layer_norm_eps: f64,
    pub dropout: f64,
    pub num_classes: usize,
}

impl ModelConfig {
    /// 2 layers, hidden 32, 2 heads.
    pub fn tiny(vocab_size: usize, num_classes: usize, max_positions: usize) -> Self {
        ModelConfig {
            vocab_size,
            hidden_size: 32,
            num_layers: 2,
            num_heads: 2,
            intermediate_size: 64,
            max_positions,
            type_vocab_size: 2,
            layer_norm_eps: 1e-12,
            dropout: 0.1,
            num_classes,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_size / self.num_heads
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub offset: usize,
    pub len: usize,
}

impl Slot {
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Debug, Clone)]
pub struct LayerSlots {
    pub q_w: Slot,
    pub q_b: Slot,
    pub k_w: Slot,
    pub k_b: Slot,
    pub v_w: Slot,
    pub v_b: Slot,
    pub o_w: Slot,
    pub o_b: Slot,
    pub ln1_g: Slot,
    pub ln1_b: Slot,
    pub ff1_w: Slot,
    pub ff1_b: Slot,
    pub ff2_w: Slot,
    pub ff2_b: Slot,
    pub ln2_g: Slot,
    pub ln2_b: Slot,
}

#[derive(Debug, Clone)]
pub struct Layout {
    pub word: Slot,
    pub pos: Slot,
    pub typ: Slot,
    pub emb_ln_g: Slot,
    pub emb_ln_b: Slot,
    pub layers: Vec<LayerSlots>,
    pub mlm_w: Slot,
    pub mlm_b: Slot,
    pub mlm_ln_g: Slot,
    pub mlm_ln_b: Slot,
    pub dec_w: Slot,
    pub dec_b: Slot,
    pub cls_w: Slot,
    pub cls_b: Slot,
    pub total: usize,
    /// `(name, slot, is_layer_norm_gain)` for every tensor, in storage order.
    pub named: Vec<(String, Slot, bool)>,
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let h = cfg.hidden_size;
        let mut named = Vec::new();
        let mut offset = 0;
        let mut slot = |name: String, len: usize, gain: bool| {
            let s = Slot { offset, len };
            offset += len;
            named.push((name, s, gain));
            s
        };
        let word = slot("embeddings.word".into(), cfg.vocab_size * h, false);
        let pos = slot("embeddings.position".into(), cfg.max_positions * h, false);
        let typ = slot("embeddings.token_type".into(), cfg.type_vocab_size * h, false);
        let emb_ln_g = slot("embeddings.ln.gain".into(), h, true);
        let emb_ln_b = slot("embeddings.ln.bias".into(), h, false);
        let mut layers = Vec::new();
        for l in 0..cfg.num_layers {
            let p = |n: &str| format!("layer{l}.{n}");
            let i = cfg.intermediate_size;
            layers.push(LayerSlots {
                q_w: slot(p("query.weight"), h * h, false),
                q_b: slot(p("query.bias"), h, false),
                k_w: slot(p("key.weight"), h * h, false),
                k_b: slot(p("key.bias"), h, false),
                v_w: slot(p("value.weight"), h * h, false),
                v_b: slot(p("value.bias"), h, false),
                o_w: slot(p("attn_out.weight"), h * h, false),
                o_b: slot(p("attn_out.bias"), h, false),
                ln1_g: slot(p("attn_ln.gain"), h, true),
                ln1_b: slot(p("attn_ln.bias"), h, false),
                ff1_w: slot(p("ffn_in.weight"), h * i, false),
                ff1_b: slot(p("ffn_in.bias"), i, false),
                ff2_w: slot(p("ffn_out.weight"), i * h, false),
                ff2_b: slot(p("ffn_out.bias"), h, false),
                ln2_g: slot(p("ffn_ln.gain"), h, true),
                ln2_b: slot(p("ffn_ln.bias"), h, false),
            });
        }
        let mlm_w = slot("mlm.transform.weight".into(), h * h, false);
        let mlm_b = slot("mlm.transform.bias".into(), h, false);
        let mlm_ln_g = slot("mlm.ln.gain".into(), h, true);
        let mlm_ln_b = slot("mlm.ln.bias".into(), h, false);
        let dec_w = slot("mlm.decoder.weight".into(), cfg.vocab_size * h, false);
        let dec_b = slot("mlm.decoder.bias".into(), cfg.vocab_size, false);
        let cls_w = slot("classifier.weight".into(), cfg.num_classes * h, false);
        let cls_b = slot("classifier.bias".into(), cfg.num_classes, false);
        Layout {
            word,
            pos,
            typ,
            emb_ln_g,
            emb_ln_b,
            layers,
            mlm_w,
            mlm_b,
            mlm_ln_g,
            mlm_ln_b,
            dec_w,
            dec_b,
            cls_w,
            cls_b,
            total: offset,
            named,
        }
    }

    pub fn encoder_range(&self) -> Range<usize> {
        0..self.mlm_w.offset
    }

    pub fn mlm_range(&self) -> Range<usize> {
        self.mlm_w.offset..self.cls_w.offset
    }

    pub fn classifier_range(&self) -> Range<usize> {
        self.cls_w.offset..self.total
    }
}

/// Per-sequence activations kept for the backward pass.
pub struct EncoderCache {
    emb_ln: LayerNormCache,
    emb_mask: Option<Vec<f64>>,
    layers: Vec<LayerCache>,
}

struct LayerCache {
    x_in: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    probs: Vec<f64>,
    ctx: Vec<f64>,
    attn_mask: Option<Vec<f64>>,
    ln1: LayerNormCache,
    x1: Vec<f64>,
    ff_pre: Vec<f64>,
    ff_act: Vec<f64>,
    ff_mask: Option<Vec<f64>>,
    ln2: LayerNormCache,
}

pub struct MlmCache {
    rows: Vec<f64>,
    pre: Vec<f64>,
    ln: LayerNormCache,
    normed: Vec<f64>,
}

fn split_mut2(buf: &mut [f64], a: Slot, b: Slot) -> (&mut [f64], &mut [f64]) {
    debug_assert!(a.offset + a.len <= b.offset);
    let (left, right) = buf.split_at_mut(b.offset);
    (&mut left[a.range()], &mut right[..b.len])
}

fn dropout_mask(rng: &mut ChaCha8Rng, len: usize, p: f64) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
        .collect()
}

fn apply_mask(x: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        for (v, s) in x.iter_mut().zip(m) {
            *v *= s;
        }
    }
}

/// Splits `[T, H]` into `[heads, T, dh]`.
fn split_heads(x: &[f64], t: usize, heads: usize, dh: usize) -> Vec<f64> {
    let h = heads * dh;
    let mut out = vec![0.0; x.len()];
    for head in 0..heads {
        for r in 0..t {
            let src = &x[r * h + head * dh..r * h + (head + 1) * dh];
            out[(head * t + r) * dh..(head * t + r + 1) * dh].copy_from_slice(src);
        }
    }
    out
}

fn merge_heads(x: &[f64], t: usize, heads: usize, dh: usize) -> Vec<f64> {
    let h = heads * dh;
    let mut out = vec![0.0; x.len()];
    for head in 0..heads {
        for r in 0..t {
            out[r * h + head * dh..r * h + (head + 1) * dh]
                .copy_from_slice(&x[(head * t + r) * dh..(head * t + r + 1) * dh]);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub cfg: ModelConfig,
    pub layout: Layout,
    pub params: Vec<f64>,
}

impl PartialEq for Layout {
    fn eq(&self, other: &Self) -> bool {
        self.total == other.total && self.named == other.named
    }
}

impl Model {
    /// Truncated-normal-free BERT-style initialization: N(0, 0.02) weights,
    /// zero biases, unit layer-norm gains.
    pub fn init(cfg: ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let layout = Layout::new(&cfg);
        let normal = Normal::new(0.0, 0.02).expect("valid std");
        let mut params = vec![0.0; layout.total];
        for (name, slot, gain) in &layout.named {
            if *gain {
                params[slot.range()].fill(1.0);
            } else if name.ends_with("weight")
                || name.starts_with("embeddings.word")
                || name.starts_with("embeddings.position")
                || name.starts_with("embeddings.token_type")
            {
                for p in &mut params[slot.range()] {
                    *p = normal.sample(rng);
                }
            }
        }
        Model {
            cfg,
            layout,
            params,
        }
    }

    pub fn from_params(cfg: ModelConfig, params: Vec<f64>) -> Option<Self> {
        let layout = Layout::new(&cfg);
        (layout.total == params.len()).then_some(Model {
            cfg,
            layout,
            params,
        })
    }

    fn p(&self, s: Slot) -> &[f64] {
        &self.params[s.range()]
    }

    /// Re-initializes the classifier head: zero bias, N(0, 0.02) weights.
    pub fn reset_classifier(&mut self, rng: &mut ChaCha8Rng) {
        let normal = Normal::new(0.0, 0.02).expect("valid std");
        let (w, b) = (self.layout.cls_w, self.layout.cls_b);
        for p in &mut self.params[w.range()] {
            *p = normal.sample(rng);
        }
        self.params[b.range()].fill(0.0);
    }

    /// Final hidden states `[T, H]`; dropout is applied iff `rng` is given.
    pub fn encode(&self, ids: &[u32], mut rng: Option<&mut ChaCha8Rng>) -> (Vec<f64>, EncoderCache) {
        let cfg = &self.cfg;
        let (h, t) = (cfg.hidden_size, ids.len());
        assert!(t <= cfg.max_positions, "sequence longer than position table");
        let lay = &self.layout;
        let word = self.p(lay.word);
        let pos = self.p(lay.pos);
        let typ = &self.p(lay.typ)[..h];
        let mut e = vec![0.0; t * h];
        for (r, &id) in ids.iter().enumerate() {
            let w = &word[id as usize * h..(id as usize + 1) * h];
            let p = &pos[r * h..(r + 1) * h];
            for j in 0..h {
                e[r * h + j] = w[j] + p[j] + typ[j];
            }
        }
        let (mut x, emb_ln) =
            layer_norm(&e, self.p(lay.emb_ln_g), self.p(lay.emb_ln_b), h, cfg.layer_norm_eps);
        let p_drop = cfg.dropout;
        let mask = |rng: &mut Option<&mut ChaCha8Rng>, len: usize| {
            rng.as_deref_mut()
                .filter(|_| p_drop > 0.0)
                .map(|r| dropout_mask(r, len, p_drop))
        };
        let emb_mask = mask(&mut rng, t * h);
        apply_mask(&mut x, &emb_mask);

        let heads = cfg.num_heads;
        let dh = cfg.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let mut layers = Vec::with_capacity(cfg.num_layers);
        for ls in &lay.layers {
            let x_in = x;
            let q = split_heads(&linear(&x_in, self.p(ls.q_w), self.p(ls.q_b), t, h, h), t, heads, dh);
            let k = split_heads(&linear(&x_in, self.p(ls.k_w), self.p(ls.k_b), t, h, h), t, heads, dh);
            let v = split_heads(&linear(&x_in, self.p(ls.v_w), self.p(ls.v_b), t, h, h), t, heads, dh);
            let mut probs = vec![0.0; heads * t * t];
            let mut ctx_h = vec![0.0; heads * t * dh];
            for head in 0..heads {
                let qs = &q[head * t * dh..(head + 1) * t * dh];
                let ks = &k[head * t * dh..(head + 1) * t * dh];
                let vs = &v[head * t * dh..(head + 1) * t * dh];
                let ps = &mut probs[head * t * t..(head + 1) * t * t];
                gemm(false, true, t, t, dh, qs, ks, ps, false);
                for row in ps.chunks_mut(t) {
                    for s in row.iter_mut() {
                        *s *= scale;
                    }
                    softmax_in_place(row);
                }
                gemm(false, false, t, dh, t, ps, vs, &mut ctx_h[head * t * dh..(head + 1) * t * dh], false);
            }
            let ctx = merge_heads(&ctx_h, t, heads, dh);
            let mut attn = linear(&ctx, self.p(ls.o_w), self.p(ls.o_b), t, h, h);
            let attn_mask = mask(&mut rng, t * h);
            apply_mask(&mut attn, &attn_mask);
            let r1: Vec<f64> = x_in.iter().zip(&attn).map(|(a, b)| a + b).collect();
            let (x1, ln1) = layer_norm(&r1, self.p(ls.ln1_g), self.p(ls.ln1_b), h, cfg.layer_norm_eps);
            let i = cfg.intermediate_size;
            let ff_pre = linear(&x1, self.p(ls.ff1_w), self.p(ls.ff1_b), t, h, i);
            let ff_act: Vec<f64> = ff_pre.iter().map(|&z| gelu(z)).collect();
            let mut ff = linear(&ff_act, self.p(ls.ff2_w), self.p(ls.ff2_b), t, i, h);
            let ff_mask = mask(&mut rng, t * h);
            apply_mask(&mut ff, &ff_mask);
            let r2: Vec<f64> = x1.iter().zip(&ff).map(|(a, b)| a + b).collect();
            let (out, ln2) = layer_norm(&r2, self.p(ls.ln2_g), self.p(ls.ln2_b), h, cfg.layer_norm_eps);
            layers.push(LayerCache {
                x_in,
                q,
                k,
                v,
                probs,
                ctx,
                attn_mask,
                ln1,
                x1,
                ff_pre,
                ff_act,
                ff_mask,
                ln2,
            });
            x = out;
        }
        (
            x,
            EncoderCache {
                emb_ln,
                emb_mask,
                layers,
            },
        )
    }

    /// Accumulates parameter gradients given `d_hidden` (`[T, H]`).
    pub fn encode_backward(&self, ids: &[u32], cache: &EncoderCache, d_hidden: Vec<f64>, grads: &mut [f64]) {
        let cfg = &self.cfg;
        let (h, t) = (cfg.hidden_size, ids.len());
        let heads = cfg.num_heads;
        let dh = cfg.head_dim();
        let i = cfg.intermediate_size;
        let scale = 1.0 / (dh as f64).sqrt();
        let lay = &self.layout;
        let mut dx = d_hidden;
        for (ls, c) in lay.layers.iter().zip(&cache.layers).rev() {
            let dr2 = {
                let (dg, db) = split_mut2(grads, ls.ln2_g, ls.ln2_b);
                layer_norm_backward(&dx, &c.ln2, self.p(ls.ln2_g), h, dg, db)
            };
            let mut dx1 = dr2.clone();
            let mut dff = dr2;
            apply_mask(&mut dff, &c.ff_mask);
            let dact = {
                let (dw, db) = split_mut2(grads, ls.ff2_w, ls.ff2_b);
                linear_backward(&c.ff_act, self.p(ls.ff2_w), &dff, t, i, h, dw, db)
            };
            let dpre: Vec<f64> = dact.iter().zip(&c.ff_pre).map(|(g, &z)| g * gelu_grad(z)).collect();
            let dx1_ff = {
                let (dw, db) = split_mut2(grads, ls.ff1_w, ls.ff1_b);
                linear_backward(&c.x1, self.p(ls.ff1_w), &dpre, t, h, i, dw, db)
            };
            for (a, b) in dx1.iter_mut().zip(&dx1_ff) {
                *a += b;
            }
            let dr1 = {
                let (dg, db) = split_mut2(grads, ls.ln1_g, ls.ln1_b);
                layer_norm_backward(&dx1, &c.ln1, self.p(ls.ln1_g), h, dg, db)
            };
            let mut dx_in = dr1.clone();
            let mut dattn = dr1;
            apply_mask(&mut dattn, &c.attn_mask);
            let dctx = {
                let (dw, db) = split_mut2(grads, ls.o_w, ls.o_b);
                linear_backward(&c.ctx, self.p(ls.o_w), &dattn, t, h, h, dw, db)
            };
            let dctx_h = split_heads(&dctx, t, heads, dh);
            let mut dq = vec![0.0; t * h];
            let mut dk = vec![0.0; t * h];
            let mut dv = vec![0.0; t * h];
            let mut dprobs = vec![0.0; t * t];
            for head in 0..heads {
                let r = head * t * dh..(head + 1) * t * dh;
                let ps = &c.probs[head * t * t..(head + 1) * t * t];
                let dc = &dctx_h[r.clone()];
                gemm(false, true, t, t, dh, dc, &c.v[r.clone()], &mut dprobs, false);
                gemm(true, false, t, dh, t, ps, dc, &mut dv[r.clone()], false);
                for (prow, drow) in ps.chunks(t).zip(dprobs.chunks_mut(t)) {
                    let dot: f64 = prow.iter().zip(drow.iter()).map(|(p, d)| p * d).sum();
                    for (d, p) in drow.iter_mut().zip(prow) {
                        *d = p * (*d - dot) * scale;
                    }
                }
                gemm(false, false, t, dh, t, &dprobs, &c.k[r.clone()], &mut dq[r.clone()], false);
                gemm(true, false, t, dh, t, &dprobs, &c.q[r.clone()], &mut dk[r.clone()], false);
            }
            for (d, (w, b)) in [
                (merge_heads(&dq, t, heads, dh), (ls.q_w, ls.q_b)),
                (merge_heads(&dk, t, heads, dh), (ls.k_w, ls.k_b)),
                (merge_heads(&dv, t, heads, dh), (ls.v_w, ls.v_b)),
            ] {
                let (dw, db) = split_mut2(grads, w, b);
                let g = linear_backward(&c.x_in, self.p(w), &d, t, h, h, dw, db);
                for (a, b) in dx_in.iter_mut().zip(&g) {
                    *a += b;
                }
            }
            dx = dx_in;
        }
        apply_mask(&mut dx, &cache.emb_mask);
        let de = {
            let (dg, db) = split_mut2(grads, lay.emb_ln_g, lay.emb_ln_b);
            layer_norm_backward(&dx, &cache.emb_ln, self.p(lay.emb_ln_g), h, dg, db)
        };
        for (r, &id) in ids.iter().enumerate() {
            let row = &de[r * h..(r + 1) * h];
            for j in 0..h {
                grads[lay.word.offset + id as usize * h + j] += row[j];
                grads[lay.pos.offset + r * h + j] += row[j];
                grads[lay.typ.offset + j] += row[j];
            }
        }
    }

    /// MLM-head logits over the vocabulary at the selected rows of `hidden`.
    pub fn mlm_logits(&self, hidden: &[f64], positions: &[usize]) -> (Vec<f64>, MlmCache) {
        let h = self.cfg.hidden_size;
        let v = self.cfg.vocab_size;
        let n = positions.len();
        let lay = &self.layout;
        let mut rows = Vec::with_capacity(n * h);
        for &p in positions {
            rows.extend_from_slice(&hidden[p * h..(p + 1) * h]);
        }
        let pre = linear(&rows, self.p(lay.mlm_w), self.p(lay.mlm_b), n, h, h);
        let act: Vec<f64> = pre.iter().map(|&z| gelu(z)).collect();
        let (normed, ln) = layer_norm(&act, self.p(lay.mlm_ln_g), self.p(lay.mlm_ln_b), h, self.cfg.layer_norm_eps);
        let mut logits = Vec::with_capacity(n * v);
        for _ in 0..n {
            logits.extend_from_slice(self.p(lay.dec_b));
        }
        gemm(false, true, n, v, h, &normed, self.p(lay.dec_w), &mut logits, true);
        (
            logits,
            MlmCache {
                rows,
                pre,
                ln,
                normed,
            },
        )
    }

    /// Returns the gradient w.r.t. the selected hidden rows (`[n, H]`).
    pub fn mlm_backward(&self, cache: &MlmCache, d_logits: &[f64], grads: &mut [f64]) -> Vec<f64> {
        let h = self.cfg.hidden_size;
        let v = self.cfg.vocab_size;
        let n = d_logits.len() / v;
        let lay = &self.layout;
        {
            let (dw, db) = split_mut2(grads, lay.dec_w, lay.dec_b);
            gemm(true, false, v, h, n, d_logits, &cache.normed, dw, true);
            for r in 0..n {
                for (acc, g) in db.iter_mut().zip(&d_logits[r * v..(r + 1) * v]) {
                    *acc += g;
                }
            }
        }
        let mut dnormed = vec![0.0; n * h];
        gemm(false, false, n, h, v, d_logits, self.p(lay.dec_w), &mut dnormed, false);
        let dact = {
            let (dg, db) = split_mut2(grads, lay.mlm_ln_g, lay.mlm_ln_b);
            layer_norm_backward(&dnormed, &cache.ln, self.p(lay.mlm_ln_g), h, dg, db)
        };
        let dpre: Vec<f64> = dact.iter().zip(&cache.pre).map(|(g, &z)| g * gelu_grad(z)).collect();
        let (dw, db) = split_mut2(grads, lay.mlm_w, lay.mlm_b);
        linear_backward(&cache.rows, self.p(lay.mlm_w), &dpre, n, h, h, dw, db)
    }

    /// Classifier logits `W_c h + b_c` for one hidden vector.
    pub fn classifier_logits(&self, h_vec: &[f64]) -> Vec<f64> {
        let k = self.cfg.num_classes;
        let h = self.cfg.hidden_size;
        let mut logits = self.p(self.layout.cls_b).to_vec();
        gemm(false, true, 1, k, h, h_vec, self.p(self.layout.cls_w), &mut logits, true);
        logits
    }

    /// Returns the gradient w.r.t. `h_vec`.
    pub fn classifier_backward(&self, h_vec: &[f64], d_logits: &[f64], grads: &mut [f64]) -> Vec<f64> {
        let k = self.cfg.num_classes;
        let h = self.cfg.hidden_size;
        let lay = &self.layout;
        {
            let (dw, db) = split_mut2(grads, lay.cls_w, lay.cls_b);
            gemm(true, false, k, h, 1, d_logits, h_vec, dw, true);
            for (acc, g) in db.iter_mut().zip(d_logits) {
                *acc += g;
            }
        }
        let mut dh = vec![0.0; h];
        gemm(false, false, 1, h, k, d_logits, self.p(lay.cls_w), &mut dh, false);
        dh
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn layout_is_contiguous_and_grouped() {
        let cfg = ModelConfig::tiny(50, 3, 16);
        let lay = Layout::new(&cfg);
        let mut expect = 0;
        for (_, s, _) in &lay.named {
            assert_eq!(s.offset, expect);
            expect += s.len;
        }
        assert_eq!(expect, lay.total);
        assert_eq!(lay.encoder_range().end, lay.mlm_range().start);
        assert_eq!(lay.classifier_range().len(), 3 * 32 + 3);
    }

    #[test]
    fn hidden_states_are_finite_and_shaped() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Model::init(ModelConfig::tiny(20, 2, 8), &mut rng);
        let (hidden, _) = m.encode(&[2, 5, 6, 3], None);
        assert_eq!(hidden.len(), 4 * 32);
        assert!(hidden.iter().all(|v| v.is_finite()));
    }
}
