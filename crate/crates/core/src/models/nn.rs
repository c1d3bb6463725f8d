//! Neural building blocks with hand-written backward passes.
//!
//! Everything is generic over [`Real`] so the same code runs in `f32` for
//! training and in `f64` for gradient checking. Sequences are stored in time
//! order as `Vec<Vec<F>>`; matrices are row-major slices.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{PAD_ID, UNK_ID};
use crate::predictions::Head;
use crate::rng::Rng;

pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Send
    + Sync
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

#[inline]
pub fn cst<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("representable constant")
}

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("sequence lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("attention over a fully masked sequence")]
    AllMasked,
}

pub fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |s, (x, y)| s + *x * *y)
}

/// out += W x
fn gemv<F: Real>(w: &[F], x: &[F], out: &mut [F]) {
    for (o, row) in out.iter_mut().zip(w.chunks_exact(x.len())) {
        *o += dot(row, x);
    }
}

/// dx += Wᵀ dy
fn gemv_t<F: Real>(w: &[F], dy: &[F], dx: &mut [F]) {
    let cols = dx.len();
    for (&g, row) in dy.iter().zip(w.chunks_exact(cols)) {
        if g != F::zero() {
            for (d, v) in dx.iter_mut().zip(row) {
                *d += g * *v;
            }
        }
    }
}

/// dW += dy xᵀ
fn ger<F: Real>(dw: &mut [F], dy: &[F], x: &[F]) {
    for (&g, row) in dy.iter().zip(dw.chunks_exact_mut(x.len())) {
        if g != F::zero() {
            for (r, v) in row.iter_mut().zip(x) {
                *r += g * *v;
            }
        }
    }
}

fn add_into<F: Real>(acc: &mut [F], v: &[F]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += *b;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellKind {
    Lstm,
    Gru,
}

impl CellKind {
    pub fn gates(self) -> usize {
        match self {
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
        }
    }
}

/// Recurrent cell weights. LSTM gate blocks are ordered `[i, f, g, o]`, GRU
/// blocks `[z, r, n]`; `wx` is `G·H × D`, `wh` is `G·H × H`, `b` is `G·H`.
#[derive(Debug, Clone, Copy)]
pub struct RnnWeights<'a, F> {
    pub kind: CellKind,
    pub wx: &'a [F],
    pub wh: &'a [F],
    pub b: &'a [F],
    pub hidden: usize,
}

#[derive(Debug, Clone)]
pub struct StepCache<F> {
    /// Activated gates, `G·H`.
    gates: Vec<F>,
    /// LSTM cell state and its tanh (empty for GRU).
    c: Vec<F>,
    tc: Vec<F>,
    h: Vec<F>,
}

fn step<F: Real>(w: &RnnWeights<F>, x: &[F], h_prev: &[F], c_prev: &[F]) -> StepCache<F> {
    let hn = w.hidden;
    match w.kind {
        CellKind::Lstm => {
            let mut a = w.b.to_vec();
            gemv(w.wx, x, &mut a);
            gemv(w.wh, h_prev, &mut a);
            for (k, v) in a.iter_mut().enumerate() {
                *v = if k / hn == 2 { v.tanh() } else { sigmoid(*v) };
            }
            let mut c = vec![F::zero(); hn];
            let mut tc = vec![F::zero(); hn];
            let mut h = vec![F::zero(); hn];
            for j in 0..hn {
                let (i, f, g, o) = (a[j], a[hn + j], a[2 * hn + j], a[3 * hn + j]);
                c[j] = f * c_prev[j] + i * g;
                tc[j] = c[j].tanh();
                h[j] = o * tc[j];
            }
            StepCache { gates: a, c, tc, h }
        }
        CellKind::Gru => {
            let mut a = w.b.to_vec();
            gemv(w.wx, x, &mut a);
            let mut ah = vec![F::zero(); 2 * hn];
            gemv(&w.wh[..2 * hn * hn], h_prev, &mut ah);
            for j in 0..2 * hn {
                a[j] = sigmoid(a[j] + ah[j]);
            }
            let rh: Vec<F> = (0..hn).map(|j| a[hn + j] * h_prev[j]).collect();
            gemv(&w.wh[2 * hn * hn..], &rh, &mut a[2 * hn..]);
            let mut h = vec![F::zero(); hn];
            for j in 0..hn {
                let n = a[2 * hn + j].tanh();
                a[2 * hn + j] = n;
                let z = a[j];
                h[j] = z * h_prev[j] + (F::one() - z) * n;
            }
            StepCache {
                gates: a,
                c: Vec::new(),
                tc: Vec::new(),
                h,
            }
        }
    }
}

/// One LSTM step: returns `(h, c)`.
pub fn lstm_cell<F: Real>(x: &[F], h_prev: &[F], c_prev: &[F], w: &RnnWeights<F>) -> (Vec<F>, Vec<F>) {
    debug_assert_eq!(w.kind, CellKind::Lstm);
    let s = step(w, x, h_prev, c_prev);
    (s.h, s.c)
}

/// One GRU step: `h = z⊙h_prev + (1−z)⊙n` with `n = tanh(Wn x + Un(r⊙h_prev) + bn)`.
pub fn gru_cell<F: Real>(x: &[F], h_prev: &[F], w: &RnnWeights<F>) -> Vec<F> {
    debug_assert_eq!(w.kind, CellKind::Gru);
    step(w, x, h_prev, &[]).h
}

pub struct RnnGrads<'a, F> {
    pub wx: &'a mut [F],
    pub wh: &'a mut [F],
    pub b: &'a mut [F],
}

/// Gradient of one step. Returns `(dh_prev, dc_prev)`; accumulates weight
/// gradients and `dx`.
#[allow(clippy::too_many_arguments)]
fn step_backward<F: Real>(
    w: &RnnWeights<F>,
    x: &[F],
    h_prev: &[F],
    c_prev: &[F],
    s: &StepCache<F>,
    dh: &[F],
    dc_next: &[F],
    g: &mut RnnGrads<F>,
    dx: &mut [F],
) -> (Vec<F>, Vec<F>) {
    let hn = w.hidden;
    let one = F::one();
    let a = &s.gates;
    let mut da = vec![F::zero(); w.kind.gates() * hn];
    let mut dh_prev = vec![F::zero(); hn];
    let mut dc_prev = Vec::new();
    match w.kind {
        CellKind::Lstm => {
            dc_prev = vec![F::zero(); hn];
            for j in 0..hn {
                let (i, f, gg, o) = (a[j], a[hn + j], a[2 * hn + j], a[3 * hn + j]);
                let dc = dc_next[j] + dh[j] * o * (one - s.tc[j] * s.tc[j]);
                da[j] = dc * gg * i * (one - i);
                da[hn + j] = dc * c_prev[j] * f * (one - f);
                da[2 * hn + j] = dc * i * (one - gg * gg);
                da[3 * hn + j] = dh[j] * s.tc[j] * o * (one - o);
                dc_prev[j] = dc * f;
            }
            ger(g.wh, &da, h_prev);
            gemv_t(w.wh, &da, &mut dh_prev);
        }
        CellKind::Gru => {
            let mut drh = vec![F::zero(); hn];
            for j in 0..hn {
                let (z, n) = (a[j], a[2 * hn + j]);
                da[2 * hn + j] = dh[j] * (one - z) * (one - n * n);
                da[j] = dh[j] * (h_prev[j] - n) * z * (one - z);
                dh_prev[j] = dh[j] * z;
            }
            gemv_t(&w.wh[2 * hn * hn..], &da[2 * hn..], &mut drh);
            let rh: Vec<F> = (0..hn).map(|j| a[hn + j] * h_prev[j]).collect();
            for j in 0..hn {
                let r = a[hn + j];
                da[hn + j] = drh[j] * h_prev[j] * r * (one - r);
                dh_prev[j] += drh[j] * r;
            }
            ger(&mut g.wh[..2 * hn * hn], &da[..2 * hn], h_prev);
            ger(&mut g.wh[2 * hn * hn..], &da[2 * hn..], &rh);
            gemv_t(&w.wh[..2 * hn * hn], &da[..2 * hn], &mut dh_prev);
        }
    }
    ger(g.wx, &da, x);
    add_into(g.b, &da);
    gemv_t(w.wx, &da, dx);
    (dh_prev, dc_prev)
}

/// Cached run of a cell over a sequence; `steps[t]` is the state at time `t`
/// regardless of processing direction.
#[derive(Debug, Clone)]
pub struct RnnTrace<F> {
    reverse: bool,
    steps: Vec<StepCache<F>>,
}

impl<F: Real> RnnTrace<F> {
    pub fn h(&self, t: usize) -> &[F] {
        &self.steps[t].h
    }

    pub fn hs(&self) -> Vec<Vec<F>> {
        self.steps.iter().map(|s| s.h.clone()).collect()
    }

    /// State after the last processed step.
    pub fn final_h(&self) -> &[F] {
        if self.reverse {
            self.h(0)
        } else {
            self.h(self.steps.len() - 1)
        }
    }

    fn order(&self) -> Vec<usize> {
        let t = self.steps.len();
        if self.reverse {
            (0..t).rev().collect()
        } else {
            (0..t).collect()
        }
    }
}

pub fn rnn_forward<F: Real>(w: &RnnWeights<F>, xs: &[Vec<F>], reverse: bool) -> RnnTrace<F> {
    let hn = w.hidden;
    let zeros = vec![F::zero(); hn];
    let mut slots: Vec<Option<StepCache<F>>> = vec![None; xs.len()];
    let mut prev: Option<usize> = None;
    let order: Vec<usize> = if reverse {
        (0..xs.len()).rev().collect()
    } else {
        (0..xs.len()).collect()
    };
    for t in order {
        let (h_prev, c_prev) = match prev {
            Some(p) => {
                let s = slots[p].as_ref().expect("previous step computed");
                (s.h.as_slice(), s.c.as_slice())
            }
            None => (zeros.as_slice(), zeros.as_slice()),
        };
        let s = step(w, &xs[t], h_prev, c_prev);
        slots[t] = Some(s);
        prev = Some(t);
    }
    RnnTrace {
        reverse,
        steps: slots.into_iter().map(|s| s.expect("every step computed")).collect(),
    }
}

/// Backpropagation through time. `dhs[t]` is the loss gradient w.r.t. the
/// output state at time `t`; input gradients are added to `dxs`.
pub fn rnn_backward<F: Real>(
    w: &RnnWeights<F>,
    xs: &[Vec<F>],
    trace: &RnnTrace<F>,
    dhs: &[Vec<F>],
    g: &mut RnnGrads<F>,
    dxs: &mut [Vec<F>],
) {
    let hn = w.hidden;
    let zeros = vec![F::zero(); hn];
    let order = trace.order();
    let mut dh_carry = vec![F::zero(); hn];
    let mut dc_carry = vec![F::zero(); hn];
    for k in (0..order.len()).rev() {
        let t = order[k];
        let (h_prev, c_prev) = if k == 0 {
            (zeros.as_slice(), zeros.as_slice())
        } else {
            let p = &trace.steps[order[k - 1]];
            (p.h.as_slice(), if p.c.is_empty() { zeros.as_slice() } else { p.c.as_slice() })
        };
        let mut dh = dhs[t].clone();
        add_into(&mut dh, &dh_carry);
        let (dhp, dcp) = step_backward(w, &xs[t], h_prev, c_prev, &trace.steps[t], &dh, &dc_carry, g, &mut dxs[t]);
        dh_carry = dhp;
        if w.kind == CellKind::Lstm {
            dc_carry = dcp;
        }
    }
}

/// Elementwise mean of a forward sequence and a backward sequence already
/// realigned to time order.
pub fn bidirectional_combine<F: Real>(forward: &[Vec<F>], backward: &[Vec<F>]) -> Result<Vec<Vec<F>>, NnError> {
    if forward.len() != backward.len() {
        return Err(NnError::LengthMismatch(forward.len(), backward.len()));
    }
    let half = cst::<F>(0.5);
    forward
        .iter()
        .zip(backward)
        .map(|(f, b)| {
            if f.len() != b.len() {
                return Err(NnError::LengthMismatch(f.len(), b.len()));
            }
            Ok(f.iter().zip(b).map(|(x, y)| (*x + *y) * half).collect())
        })
        .collect()
}

/// Attention weights: `w` is `A × D`, `b` and `ctx` have length `A`.
#[derive(Debug, Clone, Copy)]
pub struct AttentionWeights<'a, F> {
    pub w: &'a [F],
    pub b: &'a [F],
    pub ctx: &'a [F],
}

#[derive(Debug, Clone)]
pub struct AttentionCache<F> {
    u: Vec<Vec<F>>,
    alpha: Vec<F>,
}

fn attention_forward<F: Real>(
    hs: &[Vec<F>],
    mask: &[bool],
    w: &AttentionWeights<F>,
) -> Result<(Vec<F>, AttentionCache<F>), NnError> {
    if hs.len() != mask.len() {
        return Err(NnError::LengthMismatch(hs.len(), mask.len()));
    }
    let mut u = vec![Vec::new(); hs.len()];
    let mut e = vec![F::neg_infinity(); hs.len()];
    for t in 0..hs.len() {
        if mask[t] {
            let mut a = w.b.to_vec();
            gemv(w.w, &hs[t], &mut a);
            a.iter_mut().for_each(|v| *v = v.tanh());
            e[t] = dot(&a, w.ctx);
            u[t] = a;
        }
    }
    let max = e
        .iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|(v, _)| *v)
        .fold(None, |m: Option<F>, v| Some(m.map_or(v, |m| m.max(v))))
        .ok_or(NnError::AllMasked)?;
    let mut alpha: Vec<F> = e
        .iter()
        .zip(mask)
        .map(|(v, m)| if *m { (*v - max).exp() } else { F::zero() })
        .collect();
    let z: F = alpha.iter().copied().sum();
    alpha.iter_mut().for_each(|a| *a /= z);
    let d = hs[0].len();
    let mut pooled = vec![F::zero(); d];
    for (h, a) in hs.iter().zip(&alpha) {
        if *a != F::zero() {
            pooled.iter_mut().zip(h).for_each(|(p, v)| *p += *a * *v);
        }
    }
    Ok((pooled, AttentionCache { u, alpha }))
}

/// `u_t = tanh(W h_t + b)`, `α = softmax_t(u_t · ctx)` over unmasked positions,
/// pooled `= Σ α_t h_t`. Returns `(pooled, α)` with `α_t = 0` where masked.
pub fn attention_pool<F: Real>(
    hs: &[Vec<F>],
    mask: &[bool],
    w: &AttentionWeights<F>,
) -> Result<(Vec<F>, Vec<F>), NnError> {
    attention_forward(hs, mask, w).map(|(p, c)| (p, c.alpha))
}

pub struct AttentionGrads<'a, F> {
    pub w: &'a mut [F],
    pub b: &'a mut [F],
    pub ctx: &'a mut [F],
}

fn attention_backward<F: Real>(
    hs: &[Vec<F>],
    w: &AttentionWeights<F>,
    cache: &AttentionCache<F>,
    dpooled: &[F],
    g: &mut AttentionGrads<F>,
    dhs: &mut [Vec<F>],
) {
    let dalpha: Vec<F> = hs.iter().map(|h| dot(h, dpooled)).collect();
    let mean: F = cache.alpha.iter().zip(&dalpha).map(|(a, d)| *a * *d).sum();
    for t in 0..hs.len() {
        let a = cache.alpha[t];
        if cache.u[t].is_empty() {
            continue;
        }
        dhs[t].iter_mut().zip(dpooled).for_each(|(d, p)| *d += a * *p);
        let de = a * (dalpha[t] - mean);
        let u = &cache.u[t];
        g.ctx.iter_mut().zip(u).for_each(|(c, v)| *c += de * *v);
        let dpre: Vec<F> = u
            .iter()
            .zip(w.ctx)
            .map(|(v, c)| de * *c * (F::one() - *v * *v))
            .collect();
        ger(g.w, &dpre, &hs[t]);
        add_into(g.b, &dpre);
        gemv_t(w.w, &dpre, &mut dhs[t]);
    }
}

/// Filters of one width: `w` is `maps × width·D`, `b` has length `maps`.
#[derive(Debug, Clone, Copy)]
pub struct ConvWeights<'a, F> {
    pub width: usize,
    pub w: &'a [F],
    pub b: &'a [F],
}

#[derive(Debug, Clone)]
pub struct ConvCache<F> {
    argmax: Vec<usize>,
    pre: Vec<F>,
}

fn conv_forward<F: Real>(xs: &[Vec<F>], f: &ConvWeights<F>) -> (Vec<F>, ConvCache<F>) {
    assert!(xs.len() >= f.width, "sequence shorter than filter width");
    let d = xs[0].len();
    let maps = f.b.len();
    let mut out = vec![F::zero(); maps];
    let mut argmax = vec![0; maps];
    let mut pre = vec![F::zero(); maps];
    for m in 0..maps {
        let row = &f.w[m * f.width * d..(m + 1) * f.width * d];
        let mut best = F::neg_infinity();
        for p in 0..=xs.len() - f.width {
            let mut a = f.b[m];
            for k in 0..f.width {
                a += dot(&row[k * d..(k + 1) * d], &xs[p + k]);
            }
            if a > best {
                best = a;
                argmax[m] = p;
            }
        }
        pre[m] = best;
        out[m] = best.max(F::zero());
    }
    (out, ConvCache { argmax, pre })
}

/// Per filter: ReLU of the width-w convolution, max over time; concatenated
/// across widths in the given order. Requires `xs.len() ≥` every width.
pub fn conv_maxpool<F: Real>(xs: &[Vec<F>], filters: &[ConvWeights<F>]) -> Vec<F> {
    filters.iter().flat_map(|f| conv_forward(xs, f).0).collect()
}

fn conv_backward<F: Real>(
    xs: &[Vec<F>],
    f: &ConvWeights<F>,
    cache: &ConvCache<F>,
    dout: &[F],
    dw: &mut [F],
    db: &mut [F],
    dxs: &mut [Vec<F>],
) {
    let d = xs[0].len();
    for m in 0..f.b.len() {
        if cache.pre[m] <= F::zero() || dout[m] == F::zero() {
            continue;
        }
        let g = dout[m];
        let p = cache.argmax[m];
        db[m] += g;
        let off = m * f.width * d;
        for k in 0..f.width {
            let wrow = &f.w[off + k * d..off + (k + 1) * d];
            let dwrow = &mut dw[off + k * d..off + (k + 1) * d];
            for j in 0..d {
                dwrow[j] += g * xs[p + k][j];
                dxs[p + k][j] += g * wrow[j];
            }
        }
    }
}

/// Replaces each non-padding id by the unknown id with probability `rate`
/// when training; identity otherwise.
pub fn spatial_word_dropout(ids: &[u32], rate: f64, rng: &mut Rng, training: bool) -> Vec<u32> {
    if !training || rate <= 0.0 {
        return ids.to_vec();
    }
    ids.iter()
        .map(|&id| {
            if id != PAD_ID && rng.random_bool(rate) {
                UNK_ID
            } else {
                id
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Lstm,
    BiLstm,
    BiGru,
    BiGruAttention,
    Cnn,
}

impl Arch {
    fn cell(self) -> CellKind {
        match self {
            Arch::Lstm | Arch::BiLstm => CellKind::Lstm,
            _ => CellKind::Gru,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub arch: Arch,
    pub vocab: usize,
    pub dim: usize,
    /// Recurrent units per direction.
    pub hidden: usize,
    pub widths: Vec<usize>,
    pub maps: usize,
    pub classes: usize,
    pub head: Head,
}

impl NetShape {
    fn pooled_dim(&self) -> usize {
        match self.arch {
            Arch::Cnn => self.widths.len() * self.maps,
            _ => self.hidden,
        }
    }

    /// Tensor names and shapes; the embedding comes first, the output layer last.
    pub fn layout(&self) -> Vec<(String, usize, usize)> {
        let mut t = vec![("embedding".to_string(), self.vocab, self.dim)];
        let g = self.arch.cell().gates() * self.hidden;
        let rnn = |t: &mut Vec<(String, usize, usize)>, p: &str| {
            t.push((format!("{p}.wx"), g, self.dim));
            t.push((format!("{p}.wh"), g, self.hidden));
            t.push((format!("{p}.b"), g, 1));
        };
        match self.arch {
            Arch::Lstm => rnn(&mut t, "lstm"),
            Arch::BiLstm | Arch::BiGru | Arch::BiGruAttention => {
                rnn(&mut t, "fwd");
                rnn(&mut t, "bwd");
                if self.arch == Arch::BiGruAttention {
                    t.push(("att.w".into(), self.hidden, self.hidden));
                    t.push(("att.b".into(), self.hidden, 1));
                    t.push(("att.ctx".into(), self.hidden, 1));
                }
            }
            Arch::Cnn => {
                for w in &self.widths {
                    t.push((format!("conv{w}.w"), self.maps, w * self.dim));
                    t.push((format!("conv{w}.b"), self.maps, 1));
                }
            }
        }
        t.push(("out.w".into(), self.classes, self.pooled_dim()));
        t.push(("out.b".into(), self.classes, 1));
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor<F> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<F>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network<F> {
    pub shape: NetShape,
    pub tensors: Vec<Tensor<F>>,
    /// Embedding rows excluded from updates (row 0 always).
    pub frozen: Vec<bool>,
}

/// Gradients: dense per tensor (index 0 unused) plus sparse embedding rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<F> {
    pub dense: Vec<Vec<F>>,
    pub emb: BTreeMap<u32, Vec<F>>,
}

impl<F: Real> Grads<F> {
    pub fn zeros(net: &Network<F>) -> Self {
        let mut dense: Vec<Vec<F>> = net.tensors.iter().map(|t| vec![F::zero(); t.data.len()]).collect();
        dense[0] = Vec::new();
        Self {
            dense,
            emb: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, other: &Grads<F>) {
        for (a, b) in self.dense.iter_mut().zip(&other.dense) {
            add_into(a, b);
        }
        for (k, v) in &other.emb {
            match self.emb.get_mut(k) {
                Some(a) => add_into(a, v),
                None => {
                    self.emb.insert(*k, v.clone());
                }
            }
        }
    }

    pub fn scale(&mut self, s: F) {
        for v in self.dense.iter_mut().chain(self.emb.values_mut()) {
            v.iter_mut().for_each(|x| *x *= s);
        }
    }
}

#[derive(Debug, Clone)]
enum Enc<F> {
    Uni(RnnTrace<F>),
    Bi(RnnTrace<F>, RnnTrace<F>),
    Att(RnnTrace<F>, RnnTrace<F>, Vec<Vec<F>>, AttentionCache<F>),
    Cnn(Vec<ConvCache<F>>),
}

/// Cached forward pass for one sample.
#[derive(Debug, Clone)]
pub struct Pass<F> {
    ids: Vec<u32>,
    xs: Vec<Vec<F>>,
    enc: Enc<F>,
    mask: Option<Vec<F>>,
    feat: Vec<F>,
    pub logits: Vec<F>,
}

/// Training-time stochasticity for one forward pass.
pub struct Dropout<'a> {
    pub rng: &'a mut Rng,
    pub word_rate: f64,
    pub rate: f64,
}

/// Ids up to the first padding position; a lone unknown id for empty input.
pub fn effective_ids(ids: &[u32]) -> Vec<u32> {
    let v: Vec<u32> = ids.iter().take_while(|&&i| i != PAD_ID).copied().collect();
    if v.is_empty() {
        vec![UNK_ID]
    } else {
        v
    }
}

fn glorot<F: Real>(rng: &mut Rng, n: usize, fan_in: usize, fan_out: usize) -> Vec<F> {
    let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| cst(rng.random_range(-s..s))).collect()
}

impl<F: Real> Network<F> {
    /// Random initialization; embedding rows U(−0.05, 0.05) with the padding row zero.
    pub fn init(shape: NetShape, rng: &mut Rng) -> Self {
        let tensors = shape
            .layout()
            .into_iter()
            .map(|(name, rows, cols)| {
                let n = rows * cols;
                let data = if name == "embedding" {
                    let mut d: Vec<F> = (0..n).map(|_| cst(rng.random_range(-0.05..0.05))).collect();
                    d[..cols].iter_mut().for_each(|v| *v = F::zero());
                    d
                } else if name.ends_with(".b") || name == "att.b" {
                    let mut d = vec![F::zero(); n];
                    if shape.arch.cell() == CellKind::Lstm && shape.arch != Arch::Cnn && name != "out.b" {
                        // forget-gate bias 1
                        let h = shape.hidden;
                        d[h..2 * h].iter_mut().for_each(|v| *v = F::one());
                    }
                    d
                } else if name == "att.ctx" {
                    glorot(rng, n, rows, 1)
                } else {
                    glorot(rng, n, cols, rows)
                };
                Tensor { name, rows, cols, data }
            })
            .collect();
        let mut frozen = vec![false; shape.vocab];
        frozen[PAD_ID as usize] = true;
        Self { shape, tensors, frozen }
    }

    pub fn cast<G: Real>(&self) -> Network<G> {
        Network {
            shape: self.shape.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    name: t.name.clone(),
                    rows: t.rows,
                    cols: t.cols,
                    data: t.data.iter().map(|v| cst(v.to_f64().unwrap_or(0.0))).collect(),
                })
                .collect(),
            frozen: self.frozen.clone(),
        }
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor<F>> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut Tensor<F>> {
        self.tensors.iter_mut().find(|t| t.name == name)
    }

    pub fn embedding_row(&self, id: u32) -> &[F] {
        let d = self.shape.dim;
        &self.tensors[0].data[id as usize * d..(id as usize + 1) * d]
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    fn rnn(&self, first: usize) -> RnnWeights<'_, F> {
        RnnWeights {
            kind: self.shape.arch.cell(),
            wx: &self.tensors[first].data,
            wh: &self.tensors[first + 1].data,
            b: &self.tensors[first + 2].data,
            hidden: self.shape.hidden,
        }
    }

    fn attention(&self) -> AttentionWeights<'_, F> {
        AttentionWeights {
            w: &self.tensors[7].data,
            b: &self.tensors[8].data,
            ctx: &self.tensors[9].data,
        }
    }

    fn conv(&self, i: usize) -> ConvWeights<'_, F> {
        ConvWeights {
            width: self.shape.widths[i],
            w: &self.tensors[1 + 2 * i].data,
            b: &self.tensors[2 + 2 * i].data,
        }
    }

    /// Forward pass over padded or unpadded ids; `dropout` enables training mode.
    pub fn forward(&self, ids: &[u32], dropout: Option<Dropout<'_>>) -> Pass<F> {
        let mut ids = effective_ids(ids);
        let mut post = None;
        if let Some(dr) = dropout {
            ids = spatial_word_dropout(&ids, dr.word_rate, dr.rng, true);
            if dr.rate > 0.0 {
                let keep = 1.0 - dr.rate;
                let scale = cst::<F>(1.0 / keep);
                post = Some(
                    (0..self.shape.pooled_dim())
                        .map(|_| if dr.rng.random_bool(keep) { scale } else { F::zero() })
                        .collect::<Vec<F>>(),
                );
            }
        }
        let mut xs: Vec<Vec<F>> = ids.iter().map(|&i| self.embedding_row(i).to_vec()).collect();
        let (enc, pooled) = match self.shape.arch {
            Arch::Lstm => {
                let tr = rnn_forward(&self.rnn(1), &xs, false);
                let p = tr.final_h().to_vec();
                (Enc::Uni(tr), p)
            }
            Arch::BiLstm | Arch::BiGru => {
                let f = rnn_forward(&self.rnn(1), &xs, false);
                let b = rnn_forward(&self.rnn(4), &xs, true);
                let p = bidirectional_combine(&[f.final_h().to_vec()], &[b.final_h().to_vec()])
                    .expect("equal hidden sizes")
                    .remove(0);
                (Enc::Bi(f, b), p)
            }
            Arch::BiGruAttention => {
                let f = rnn_forward(&self.rnn(1), &xs, false);
                let b = rnn_forward(&self.rnn(4), &xs, true);
                let s = bidirectional_combine(&f.hs(), &b.hs()).expect("equal lengths");
                let mask = vec![true; s.len()];
                let (p, cache) = attention_forward(&s, &mask, &self.attention()).expect("non-empty sequence");
                (Enc::Att(f, b, s, cache), p)
            }
            Arch::Cnn => {
                let wmax = self.shape.widths.iter().copied().max().unwrap_or(1);
                while xs.len() < wmax {
                    xs.push(vec![F::zero(); self.shape.dim]);
                }
                let mut caches = Vec::new();
                let mut p = Vec::new();
                for i in 0..self.shape.widths.len() {
                    let (o, c) = conv_forward(&xs, &self.conv(i));
                    p.extend(o);
                    caches.push(c);
                }
                (Enc::Cnn(caches), p)
            }
        };
        let feat: Vec<F> = match &post {
            Some(m) => pooled.iter().zip(m).map(|(a, b)| *a * *b).collect(),
            None => pooled,
        };
        let n = self.tensors.len();
        let mut logits = self.tensors[n - 1].data.clone();
        gemv(&self.tensors[n - 2].data, &feat, &mut logits);
        Pass {
            ids,
            xs,
            enc,
            mask: post,
            feat,
            logits,
        }
    }

    /// Accumulates the gradient of a loss with `dlogits` into `g`.
    pub fn backward(&self, pass: &Pass<F>, dlogits: &[F], g: &mut Grads<F>) {
        let n = self.tensors.len();
        ger(&mut g.dense[n - 2], dlogits, &pass.feat);
        add_into(&mut g.dense[n - 1], dlogits);
        let mut dpool = vec![F::zero(); self.shape.pooled_dim()];
        gemv_t(&self.tensors[n - 2].data, dlogits, &mut dpool);
        if let Some(m) = &pass.mask {
            dpool.iter_mut().zip(m).for_each(|(d, k)| *d *= *k);
        }
        let d = self.shape.dim;
        let t_len = pass.xs.len();
        let mut dxs = vec![vec![F::zero(); d]; t_len];
        let hz = || vec![vec![F::zero(); self.shape.hidden]; t_len];
        match &pass.enc {
            Enc::Uni(tr) => {
                let mut dhs = hz();
                dhs[t_len - 1] = dpool;
                self.rnn_back(1, &pass.xs, tr, &dhs, g, &mut dxs);
            }
            Enc::Bi(f, b) => {
                let half: Vec<F> = dpool.iter().map(|v| *v * cst(0.5)).collect();
                let mut df = hz();
                df[t_len - 1] = half.clone();
                let mut db = hz();
                db[0] = half;
                self.rnn_back(1, &pass.xs, f, &df, g, &mut dxs);
                self.rnn_back(4, &pass.xs, b, &db, g, &mut dxs);
            }
            Enc::Att(f, b, s, cache) => {
                let mut ds = hz();
                {
                    let (head, tail) = g.dense.split_at_mut(8);
                    let (gb, rest) = tail.split_at_mut(1);
                    let mut ag = AttentionGrads {
                        w: &mut head[7],
                        b: &mut gb[0],
                        ctx: &mut rest[0],
                    };
                    attention_backward(s, &self.attention(), cache, &dpool, &mut ag, &mut ds);
                }
                let half: Vec<Vec<F>> = ds
                    .iter()
                    .map(|v| v.iter().map(|x| *x * cst(0.5)).collect())
                    .collect();
                self.rnn_back(1, &pass.xs, f, &half, g, &mut dxs);
                self.rnn_back(4, &pass.xs, b, &half, g, &mut dxs);
            }
            Enc::Cnn(caches) => {
                let mut off = 0;
                for (i, c) in caches.iter().enumerate() {
                    let maps = self.shape.maps;
                    let (lo, hi) = g.dense.split_at_mut(2 + 2 * i);
                    conv_backward(
                        &pass.xs,
                        &self.conv(i),
                        c,
                        &dpool[off..off + maps],
                        &mut lo[1 + 2 * i],
                        &mut hi[0],
                        &mut dxs,
                    );
                    off += maps;
                }
            }
        }
        for (t, &id) in pass.ids.iter().enumerate() {
            let row = g.emb.entry(id).or_insert_with(|| vec![F::zero(); d]);
            add_into(row, &dxs[t]);
        }
    }

    fn rnn_back(
        &self,
        first: usize,
        xs: &[Vec<F>],
        tr: &RnnTrace<F>,
        dhs: &[Vec<F>],
        g: &mut Grads<F>,
        dxs: &mut [Vec<F>],
    ) {
        let (_, rest) = g.dense.split_at_mut(first);
        let (a, rest) = rest.split_at_mut(1);
        let (b, c) = rest.split_at_mut(1);
        let mut rg = RnnGrads {
            wx: &mut a[0],
            wh: &mut b[0],
            b: &mut c[0],
        };
        rnn_backward(&self.rnn(first), xs, tr, dhs, &mut rg, dxs);
    }
}

/// Loss of one sample and its gradient w.r.t. the logits. Sigmoid heads use
/// binary cross-entropy averaged over classes; softmax heads categorical
/// cross-entropy.
pub fn loss_and_grad<F: Real>(head: Head, logits: &[F], gold: &[bool]) -> (F, Vec<F>) {
    match head {
        Head::SigmoidPerClass => {
            let k = cst::<F>(logits.len() as f64);
            let mut loss = F::zero();
            let grad = logits
                .iter()
                .zip(gold)
                .map(|(&z, &y)| {
                    let y = if y { F::one() } else { F::zero() };
                    loss += z.max(F::zero()) - y * z + (F::one() + (-z.abs()).exp()).ln();
                    (sigmoid(z) - y) / k
                })
                .collect();
            (loss / k, grad)
        }
        Head::Softmax => {
            let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
            let exps: Vec<F> = logits.iter().map(|z| (*z - max).exp()).collect();
            let z: F = exps.iter().copied().sum();
            let target = gold.iter().position(|g| *g).unwrap_or(0);
            let loss = z.ln() + max - logits[target];
            let grad = exps
                .iter()
                .enumerate()
                .map(|(c, e)| *e / z - if c == target { F::one() } else { F::zero() })
                .collect();
            (loss, grad)
        }
    }
}

/// Class probabilities in `f64`.
pub fn probabilities<F: Real>(head: Head, logits: &[F]) -> Vec<f64> {
    let z: Vec<f64> = logits.iter().map(|v| v.to_f64().unwrap_or(0.0)).collect();
    match head {
        Head::SigmoidPerClass => z.into_iter().map(sigmoid).collect(),
        Head::Softmax => {
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with lazy (touched-rows-only) updates of the embedding matrix.
pub struct Adam {
    cfg: AdamConfig,
    t: i32,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl Adam {
    pub fn new(net: &Network<f32>, cfg: AdamConfig) -> Self {
        let zeros: Vec<Vec<f32>> = net.tensors.iter().map(|t| vec![0.0; t.data.len()]).collect();
        Self {
            cfg,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, net: &mut Network<f32>, g: &Grads<f32>) {
        self.t += 1;
        let (b1, b2) = (self.cfg.beta1, self.cfg.beta2);
        let lr_t = (self.cfg.lr * (1.0 - b2.powi(self.t)).sqrt() / (1.0 - b1.powi(self.t))) as f32;
        let (b1, b2, eps) = (b1 as f32, b2 as f32, self.cfg.eps as f32);
        let update = |p: &mut [f32], m: &mut [f32], v: &mut [f32], g: &[f32]| {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                p[i] -= lr_t * m[i] / (v[i].sqrt() + eps);
            }
        };
        for k in 1..net.tensors.len() {
            update(&mut net.tensors[k].data, &mut self.m[k], &mut self.v[k], &g.dense[k]);
        }
        let d = net.shape.dim;
        for (&row, grad) in &g.emb {
            let r = row as usize;
            if net.frozen[r] {
                continue;
            }
            let span = r * d..(r + 1) * d;
            update(
                &mut net.tensors[0].data[span.clone()],
                &mut self.m[0][span.clone()],
                &mut self.v[0][span],
                grad,
            );
        }
    }
}
