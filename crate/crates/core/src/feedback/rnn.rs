//! Recurrent feedback policy: a pre-norm residual stack of GRU and SwiGLU
//! sublayers running along the physical qubit chain.
//!
//! Site `p` carries the input `[s_p, a_p]`: `a_p = 1` marks an ancilla and
//! `s_p = +1 / −1` its outcome `0 / 1`, while system sites are `[0, 0]`. A
//! linear or width-5 convolutional front-end lifts the input to `d_h`
//! features, then every layer applies
//!
//! ```text
//! x ← x + GRU(RMSNorm(x))
//! x ← x + SwiGLU(RMSNorm(x))
//! ```
//!
//! followed by a final RMSNorm. Each feedback block on physical qubits
//! `(p, q)` reads its angles as `H_L h_p + H_R h_q + b`.
//!
//! The GRU uses the reset/update gate formulation
//!
//! ```text
//! r = σ(W_ir x + b_ir + W_hr h + b_hr)
//! z = σ(W_iz x + b_iz + W_hz h + b_hz)
//! n = tanh(W_in x + b_in + r ⊙ (W_hn h + b_hn))
//! h' = (1 − z) ⊙ n + z ⊙ h
//! ```
//!
//! with `h = 0` before the first site. The bidirectional variant also runs a
//! second GRU from the right end and projects the concatenated states back
//! to `d_h`. Gradients are computed by hand (backpropagation through the
//! chain).

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::feedback::{per_block_angles, FeedbackContext, MeasurementRecord};
use crate::qsim::Role;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"FVQCRNN1";
const NORM_EPS: f64 = 1e-6;
const INPUT_DIM: usize = 2;
const CONV_WIDTH: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Uni,
    Bi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrontEnd {
    Linear,
    Conv5,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RnnConfig {
    /// Number of (GRU, SwiGLU) layer pairs.
    pub depth: usize,
    pub hidden: usize,
    pub direction: Direction,
    pub front_end: FrontEnd,
    /// Angles per feedback block.
    pub n_out: usize,
}

impl RnnConfig {
    /// SwiGLU inner width: `8/3 · d_h` rounded to a multiple of 4.
    pub fn ff_dim(&self) -> usize {
        let raw = 8.0 * self.hidden as f64 / 3.0;
        ((raw / 4.0).round() as usize * 4).max(4)
    }

    pub fn n_weights(&self) -> usize {
        Net::new(self).size
    }
}

/// `y = W x (+ b)` with `W` stored row-major at `w`.
#[derive(Clone, Copy, Debug)]
struct Dense {
    w: usize,
    b: Option<usize>,
    rows: usize,
    cols: usize,
}

impl Dense {
    fn fwd(&self, p: &[f64], x: &[f64], y: &mut [f64]) {
        let w = &p[self.w..self.w + self.rows * self.cols];
        for (r, yr) in y.iter_mut().enumerate().take(self.rows) {
            let row = &w[r * self.cols..(r + 1) * self.cols];
            *yr = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                + self.b.map_or(0.0, |b| p[b + r]);
        }
    }

    /// Accumulates parameter gradients and `dx += Wᵀ dy`.
    fn bwd(&self, p: &[f64], x: &[f64], dy: &[f64], g: &mut [f64], dx: &mut [f64]) {
        for r in 0..self.rows {
            let d = dy[r];
            if d == 0.0 {
                continue;
            }
            let off = self.w + r * self.cols;
            for c in 0..self.cols {
                g[off + c] += d * x[c];
                dx[c] += d * p[off + c];
            }
            if let Some(b) = self.b {
                g[b + r] += d;
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Gru {
    wi: Dense,
    wh: Dense,
}

#[derive(Clone, Debug)]
struct Layer {
    norm1: usize,
    fwd: Gru,
    bwd: Option<(Gru, Dense)>,
    norm2: usize,
    w1: Dense,
    w3: Dense,
    w2: Dense,
}

/// Parameter layout of the network.
#[derive(Clone, Debug)]
struct Net {
    d: usize,
    dff: usize,
    n_out: usize,
    front: Dense,
    conv: bool,
    layers: Vec<Layer>,
    norm_f: usize,
    head_l: Dense,
    head_r: Dense,
    head_b: usize,
    size: usize,
    /// `(offset, len, fan_in)` of every matrix drawn at initialization.
    init: Vec<(usize, usize, usize)>,
    /// `(offset, len)` of every RMSNorm gain.
    gains: Vec<(usize, usize)>,
}

impl Net {
    fn new(cfg: &RnnConfig) -> Self {
        let d = cfg.hidden;
        let dff = cfg.ff_dim();
        let mut size = 0;
        let mut init = Vec::new();
        let mut gains = Vec::new();
        let mut dense = |rows: usize, cols: usize, bias: bool, random: bool| {
            let w = size;
            size += rows * cols;
            if random {
                init.push((w, rows * cols, cols));
            }
            let b = bias.then(|| {
                let b = size;
                size += rows;
                b
            });
            Dense { w, b, rows, cols }
        };
        let conv = cfg.front_end == FrontEnd::Conv5;
        let front_cols = if conv { INPUT_DIM * CONV_WIDTH } else { INPUT_DIM };
        let front = dense(d, front_cols, true, true);
        let mut layers = Vec::new();
        for _ in 0..cfg.depth {
            let gru = |dense: &mut dyn FnMut(usize, usize, bool, bool) -> Dense| Gru {
                wi: dense(3 * d, d, true, true),
                wh: dense(3 * d, d, true, true),
            };
            let fwd = gru(&mut dense);
            let bwd = (cfg.direction == Direction::Bi).then(|| {
                let g = gru(&mut dense);
                (g, dense(d, 2 * d, true, true))
            });
            let w1 = dense(dff, d, false, true);
            let w3 = dense(dff, d, false, true);
            let w2 = dense(d, dff, false, true);
            layers.push(Layer {
                norm1: 0,
                fwd,
                bwd,
                norm2: 0,
                w1,
                w3,
                w2,
            });
        }
        let head_l = dense(cfg.n_out, d, false, false);
        let head_r = dense(cfg.n_out, d, false, false);
        let head_b = size;
        size += cfg.n_out;
        for l in &mut layers {
            l.norm1 = size;
            gains.push((size, d));
            size += d;
            l.norm2 = size;
            gains.push((size, d));
            size += d;
        }
        let norm_f = size;
        gains.push((size, d));
        size += d;
        Self {
            d,
            dff,
            n_out: cfg.n_out,
            front,
            conv,
            layers,
            norm_f,
            head_l,
            head_r,
            head_b,
            size,
            init,
            gains,
        }
    }
}

/// Per-site cache of one GRU pass.
struct GruTrace {
    h: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    n: Vec<Vec<f64>>,
    ghn: Vec<Vec<f64>>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn gru_forward(p: &[f64], g: &Gru, xs: &[Vec<f64>], reverse: bool) -> GruTrace {
    let d = g.wh.cols;
    let len = xs.len();
    let mut t = GruTrace {
        h: vec![vec![0.0; d]; len],
        r: vec![vec![0.0; d]; len],
        z: vec![vec![0.0; d]; len],
        n: vec![vec![0.0; d]; len],
        ghn: vec![vec![0.0; d]; len],
    };
    let mut h = vec![0.0; d];
    let mut gi = vec![0.0; 3 * d];
    let mut gh = vec![0.0; 3 * d];
    for step in 0..len {
        let s = if reverse { len - 1 - step } else { step };
        g.wi.fwd(p, &xs[s], &mut gi);
        g.wh.fwd(p, &h, &mut gh);
        for k in 0..d {
            let r = sigmoid(gi[k] + gh[k]);
            let z = sigmoid(gi[d + k] + gh[d + k]);
            let n = (gi[2 * d + k] + r * gh[2 * d + k]).tanh();
            t.r[s][k] = r;
            t.z[s][k] = z;
            t.n[s][k] = n;
            t.ghn[s][k] = gh[2 * d + k];
            h[k] = (1.0 - z) * n + z * h[k];
        }
        t.h[s].copy_from_slice(&h);
    }
    t
}

/// Backpropagates `dh[s]` (gradient w.r.t. the output at site `s`) through
/// one GRU pass, accumulating into `g` and `dx`.
fn gru_backward(
    p: &[f64],
    gru: &Gru,
    xs: &[Vec<f64>],
    t: &GruTrace,
    dh: &[Vec<f64>],
    reverse: bool,
    g: &mut [f64],
    dx: &mut [Vec<f64>],
) {
    let d = gru.wh.cols;
    let len = xs.len();
    let mut carry = vec![0.0; d];
    let mut dgi = vec![0.0; 3 * d];
    let mut dgh = vec![0.0; 3 * d];
    let zero = vec![0.0; d];
    for step in (0..len).rev() {
        let s = if reverse { len - 1 - step } else { step };
        let prev = if step == 0 {
            &zero
        } else if reverse {
            &t.h[s + 1]
        } else {
            &t.h[s - 1]
        };
        let mut dprev = vec![0.0; d];
        for k in 0..d {
            let dhk = dh[s][k] + carry[k];
            let (r, z, n) = (t.r[s][k], t.z[s][k], t.n[s][k]);
            let dn = dhk * (1.0 - z);
            let dz = dhk * (prev[k] - n);
            dprev[k] = dhk * z;
            let dan = dn * (1.0 - n * n);
            let dr = dan * t.ghn[s][k];
            let dar = dr * r * (1.0 - r);
            let daz = dz * z * (1.0 - z);
            dgi[k] = dar;
            dgi[d + k] = daz;
            dgi[2 * d + k] = dan;
            dgh[k] = dar;
            dgh[d + k] = daz;
            dgh[2 * d + k] = dan * r;
        }
        gru.wi.bwd(p, &xs[s], &dgi, g, &mut dx[s]);
        gru.wh.bwd(p, prev, &dgh, g, &mut dprev);
        carry = dprev;
    }
}

fn rms_forward(p: &[f64], gain: usize, x: &[f64]) -> (Vec<f64>, f64) {
    let d = x.len();
    let inv = 1.0 / (x.iter().map(|v| v * v).sum::<f64>() / d as f64 + NORM_EPS).sqrt();
    ((0..d).map(|k| p[gain + k] * x[k] * inv).collect(), inv)
}

fn rms_backward(p: &[f64], gain: usize, x: &[f64], inv: f64, dy: &[f64], g: &mut [f64], dx: &mut [f64]) {
    let d = x.len();
    let mut dot = 0.0;
    for k in 0..d {
        g[gain + k] += dy[k] * x[k] * inv;
        dot += p[gain + k] * dy[k] * x[k];
    }
    let c = inv * inv * inv * dot / d as f64;
    for k in 0..d {
        dx[k] += inv * p[gain + k] * dy[k] - c * x[k];
    }
}

struct LayerTrace {
    x_in: Vec<Vec<f64>>,
    n1: Vec<Vec<f64>>,
    inv1: Vec<f64>,
    fwd: GruTrace,
    bwd: Option<GruTrace>,
    x_mid: Vec<Vec<f64>>,
    n2: Vec<Vec<f64>>,
    inv2: Vec<f64>,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

struct Trace {
    inputs: Vec<Vec<f64>>,
    layers: Vec<LayerTrace>,
    x_last: Vec<Vec<f64>>,
    inv_f: Vec<f64>,
    hf: Vec<Vec<f64>>,
}

fn silu(a: f64) -> f64 {
    a * sigmoid(a)
}

/// Learned recurrent feedback policy.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnPolicy {
    config: RnnConfig,
    weights: Vec<f64>,
}

impl RnnPolicy {
    pub fn init<R: Rng>(config: RnnConfig, rng: &mut R) -> Result<Self> {
        if config.depth == 0 || config.hidden == 0 || config.n_out == 0 {
            return Err(Error::InvalidSpec("RNN depth, width and output must be positive".into()));
        }
        let net = Net::new(&config);
        let mut w = vec![0.0; net.size];
        for &(off, len, fan_in) in &net.init {
            let a = 1.0 / (fan_in as f64).sqrt();
            for v in &mut w[off..off + len] {
                *v = rng.random_range(-a..a);
            }
        }
        for &(off, len) in &net.gains {
            w[off..off + len].iter_mut().for_each(|v| *v = 1.0);
        }
        Ok(Self { config, weights: w })
    }

    pub fn from_weights(config: RnnConfig, weights: Vec<f64>) -> Result<Self> {
        let n = config.n_weights();
        if weights.len() != n {
            return Err(Error::Shape(format!("{} weights for a network of {n}", weights.len())));
        }
        Ok(Self { config, weights })
    }

    pub fn config(&self) -> &RnnConfig {
        &self.config
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Output-head bias, shared by every block.
    pub fn head_bias_mut(&mut self) -> &mut [f64] {
        let net = Net::new(&self.config);
        &mut self.weights[net.head_b..net.head_b + net.n_out]
    }

    fn site_inputs(ctx: FeedbackContext<'_>, m: &MeasurementRecord) -> Result<Vec<[f64; 2]>> {
        if m.positions() != ctx.layout.ancilla_qubits() {
            return Err(Error::Shape("record does not match the layout's ancillas".into()));
        }
        let mut inputs = vec![[0.0; 2]; ctx.layout.n_qubits()];
        let mut k = 0;
        for (q, role) in ctx.layout.roles().iter().enumerate() {
            if *role == Role::Ancilla {
                inputs[q] = [if m.bits()[k] { -1.0 } else { 1.0 }, 1.0];
                k += 1;
            }
        }
        Ok(inputs)
    }

    fn blocks(&self, ctx: FeedbackContext<'_>) -> Result<Vec<(usize, usize, usize)>> {
        let per = per_block_angles(ctx.u2)?;
        if per != self.config.n_out {
            return Err(Error::Shape(format!(
                "network emits {} angles per block, circuit blocks take {per}",
                self.config.n_out
            )));
        }
        let sys = ctx.layout.system_qubits();
        if ctx.u2.n_qubits() != sys.len() {
            return Err(Error::Shape("feedback circuit does not match the system register".into()));
        }
        Ok(ctx
            .u2
            .blocks()
            .iter()
            .map(|b| (sys[b.qubits.0], sys[b.qubits.1], b.slot_offset))
            .collect())
    }

    fn forward(&self, net: &Net, raw: &[[f64; 2]]) -> Trace {
        let p = &self.weights;
        let len = raw.len();
        let d = net.d;
        let inputs: Vec<Vec<f64>> = (0..len)
            .map(|s| {
                if net.conv {
                    let mut w = vec![0.0; INPUT_DIM * CONV_WIDTH];
                    for o in 0..CONV_WIDTH {
                        let src = s as isize + o as isize - (CONV_WIDTH / 2) as isize;
                        if (0..len as isize).contains(&src) {
                            w[o * INPUT_DIM..(o + 1) * INPUT_DIM].copy_from_slice(&raw[src as usize]);
                        }
                    }
                    w
                } else {
                    raw[s].to_vec()
                }
            })
            .collect();
        let mut x: Vec<Vec<f64>> = inputs
            .iter()
            .map(|i| {
                let mut y = vec![0.0; d];
                net.front.fwd(p, i, &mut y);
                y
            })
            .collect();
        let mut layers = Vec::with_capacity(net.layers.len());
        for l in &net.layers {
            let x_in = x.clone();
            let (n1, inv1): (Vec<_>, Vec<_>) = x.iter().map(|v| rms_forward(p, l.norm1, v)).unzip();
            let fwd = gru_forward(p, &l.fwd, &n1, false);
            let bwd = l.bwd.as_ref().map(|(g, _)| gru_forward(p, g, &n1, true));
            for s in 0..len {
                match (&l.bwd, &bwd) {
                    (Some((_, proj)), Some(bt)) => {
                        let cat = [fwd.h[s].as_slice(), bt.h[s].as_slice()].concat();
                        let mut y = vec![0.0; d];
                        proj.fwd(p, &cat, &mut y);
                        x[s].iter_mut().zip(&y).for_each(|(a, b)| *a += b);
                    }
                    _ => x[s].iter_mut().zip(&fwd.h[s]).for_each(|(a, b)| *a += b),
                }
            }
            let x_mid = x.clone();
            let (n2, inv2): (Vec<_>, Vec<_>) = x.iter().map(|v| rms_forward(p, l.norm2, v)).unzip();
            let mut aa = Vec::with_capacity(len);
            let mut bb = Vec::with_capacity(len);
            for s in 0..len {
                let mut a = vec![0.0; net.dff];
                let mut b = vec![0.0; net.dff];
                l.w1.fwd(p, &n2[s], &mut a);
                l.w3.fwd(p, &n2[s], &mut b);
                let m: Vec<f64> = a.iter().zip(&b).map(|(a, b)| silu(*a) * b).collect();
                let mut y = vec![0.0; d];
                l.w2.fwd(p, &m, &mut y);
                x[s].iter_mut().zip(&y).for_each(|(u, v)| *u += v);
                aa.push(a);
                bb.push(b);
            }
            layers.push(LayerTrace {
                x_in,
                n1,
                inv1,
                fwd,
                bwd,
                x_mid,
                n2,
                inv2,
                a: aa,
                b: bb,
            });
        }
        let (hf, inv_f): (Vec<_>, Vec<_>) = x.iter().map(|v| rms_forward(p, net.norm_f, v)).unzip();
        Trace {
            inputs,
            layers,
            x_last: x,
            inv_f,
            hf,
        }
    }

    pub fn eval(&self, ctx: FeedbackContext<'_>, m: &MeasurementRecord) -> Result<Vec<f64>> {
        let raw = Self::site_inputs(ctx, m)?;
        let blocks = self.blocks(ctx)?;
        let net = Net::new(&self.config);
        let tr = self.forward(&net, &raw);
        let p = &self.weights;
        let mut out = vec![0.0; ctx.u2.n_params()];
        let mut yl = vec![0.0; net.n_out];
        let mut yr = vec![0.0; net.n_out];
        for (a, b, off) in blocks {
            net.head_l.fwd(p, &tr.hf[a], &mut yl);
            net.head_r.fwd(p, &tr.hf[b], &mut yr);
            for k in 0..net.n_out {
                out[off + k] = yl[k] + yr[k] + p[net.head_b + k];
            }
        }
        Ok(out)
    }

    pub fn backprop(
        &self,
        ctx: FeedbackContext<'_>,
        m: &MeasurementRecord,
        d_angles: &[f64],
        grad: &mut [f64],
    ) -> Result<()> {
        let raw = Self::site_inputs(ctx, m)?;
        let blocks = self.blocks(ctx)?;
        let net = Net::new(&self.config);
        let tr = self.forward(&net, &raw);
        let p = &self.weights;
        let len = raw.len();
        let d = net.d;
        let mut dhf = vec![vec![0.0; d]; len];
        for (a, b, off) in blocks {
            let dy = &d_angles[off..off + net.n_out];
            net.head_l.bwd(p, &tr.hf[a], dy, grad, &mut dhf[a]);
            net.head_r.bwd(p, &tr.hf[b], dy, grad, &mut dhf[b]);
            for k in 0..net.n_out {
                grad[net.head_b + k] += dy[k];
            }
        }
        let mut dx = vec![vec![0.0; d]; len];
        for s in 0..len {
            rms_backward(p, net.norm_f, &tr.x_last[s], tr.inv_f[s], &dhf[s], grad, &mut dx[s]);
        }
        for (l, lt) in net.layers.iter().zip(&tr.layers).rev() {
            // SwiGLU sublayer: dx flows through the residual and the branch
            let mut dn2 = vec![vec![0.0; d]; len];
            for s in 0..len {
                let m: Vec<f64> = lt.a[s].iter().zip(&lt.b[s]).map(|(a, b)| silu(*a) * b).collect();
                let mut dm = vec![0.0; net.dff];
                l.w2.bwd(p, &m, &dx[s], grad, &mut dm);
                let mut da = vec![0.0; net.dff];
                let mut db = vec![0.0; net.dff];
                for k in 0..net.dff {
                    let a = lt.a[s][k];
                    let sg = sigmoid(a);
                    db[k] = dm[k] * a * sg;
                    da[k] = dm[k] * lt.b[s][k] * sg * (1.0 + a * (1.0 - sg));
                }
                l.w1.bwd(p, &lt.n2[s], &da, grad, &mut dn2[s]);
                l.w3.bwd(p, &lt.n2[s], &db, grad, &mut dn2[s]);
            }
            for s in 0..len {
                let mut add = vec![0.0; d];
                rms_backward(p, l.norm2, &lt.x_mid[s], lt.inv2[s], &dn2[s], grad, &mut add);
                dx[s].iter_mut().zip(&add).for_each(|(u, v)| *u += v);
            }
            // GRU sublayer
            let mut dn1 = vec![vec![0.0; d]; len];
            match (&l.bwd, &lt.bwd) {
                (Some((gb, proj)), Some(bt)) => {
                    let mut dhf_ = vec![vec![0.0; d]; len];
                    let mut dhb_ = vec![vec![0.0; d]; len];
                    for s in 0..len {
                        let cat = [lt.fwd.h[s].as_slice(), bt.h[s].as_slice()].concat();
                        let mut dcat = vec![0.0; 2 * d];
                        proj.bwd(p, &cat, &dx[s], grad, &mut dcat);
                        dhf_[s].copy_from_slice(&dcat[..d]);
                        dhb_[s].copy_from_slice(&dcat[d..]);
                    }
                    gru_backward(p, &l.fwd, &lt.n1, &lt.fwd, &dhf_, false, grad, &mut dn1);
                    gru_backward(p, gb, &lt.n1, bt, &dhb_, true, grad, &mut dn1);
                }
                _ => gru_backward(p, &l.fwd, &lt.n1, &lt.fwd, &dx, false, grad, &mut dn1),
            }
            for s in 0..len {
                let mut add = vec![0.0; d];
                rms_backward(p, l.norm1, &lt.x_in[s], lt.inv1[s], &dn1[s], grad, &mut add);
                dx[s].iter_mut().zip(&add).for_each(|(u, v)| *u += v);
            }
        }
        let mut sink = vec![0.0; net.front.cols];
        for s in 0..len {
            net.front.bwd(p, &tr.inputs[s], &dx[s], grad, &mut sink);
        }
        Ok(())
    }

    /// Binary layout: the 8-byte magic `FVQCRNN1`; `u32` depth, hidden,
    /// direction (0 uni, 1 bi), front-end (0 linear, 1 conv5) and outputs per
    /// block; `u64` weight count; then the weights as `f64`. Everything is
    /// little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        let c = &self.config;
        for v in [
            c.depth as u32,
            c.hidden as u32,
            (c.direction == Direction::Bi) as u32,
            (c.front_end == FrontEnd::Conv5) as u32,
            c.n_out as u32,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.weights.len() as u64).to_le_bytes())?;
        for x in &self.weights {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Parse("not an RNN policy file".into()));
        }
        let mut u = [0u32; 5];
        for v in &mut u {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *v = u32::from_le_bytes(b);
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        let config = RnnConfig {
            depth: u[0] as usize,
            hidden: u[1] as usize,
            direction: if u[2] == 1 { Direction::Bi } else { Direction::Uni },
            front_end: if u[3] == 1 { FrontEnd::Conv5 } else { FrontEnd::Linear },
            n_out: u[4] as usize,
        };
        if n != config.n_weights() {
            return Err(Error::Parse(format!("weight count {n} does not match the header")));
        }
        let mut weights = vec![0.0; n];
        for w in &mut weights {
            r.read_exact(&mut b8)?;
            *w = f64::from_le_bytes(b8);
        }
        Ok(Self { config, weights })
    }

    /// Mirror-symmetric weights for testing: backward GRU equal to the
    /// forward one, symmetric projection halves and equal head matrices.
    #[doc(hidden)]
    pub fn symmetrize(&mut self) {
        let net = Net::new(&self.config);
        let w = &mut self.weights;
        for l in &net.layers {
            if let Some((gb, proj)) = &l.bwd {
                for (src, dst) in [(l.fwd.wi, gb.wi), (l.fwd.wh, gb.wh)] {
                    let n = src.rows * src.cols;
                    w.copy_within(src.w..src.w + n, dst.w);
                    if let (Some(a), Some(b)) = (src.b, dst.b) {
                        w.copy_within(a..a + src.rows, b);
                    }
                }
                for r in 0..proj.rows {
                    let row = proj.w + r * proj.cols;
                    w.copy_within(row..row + net.d, row + net.d);
                }
            }
        }
        let n = net.head_l.rows * net.head_l.cols;
        w.copy_within(net.head_l.w..net.head_l.w + n, net.head_r.w);
    }
}
