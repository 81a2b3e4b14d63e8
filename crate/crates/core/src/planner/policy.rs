//! Linear actor-critic with an action-validity head.
//!
//! Logits `u = W x + b`, validity logits `z = V x + c`, value
//! `v = w_v . x + b_v`. With gating on, the policy is
//! `softmax(u + log sigmoid(z))`, so a confident "invalid" prediction
//! suppresses the action.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::action::NUM_ACTIONS;

const A: usize = NUM_ACTIONS;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("feature dimension {got}, parameters expect {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad parameter file: {0}")]
    Format(String),
}

/// Flat parameter vector: `W (A x D)`, `b (A)`, `w_v (D)`, `b_v`,
/// `V (A x D)`, `c (A)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    pub dim: usize,
    /// Multiply validity log-probabilities into the policy.
    pub gate: bool,
    pub theta: Vec<f64>,
}

impl PolicyParams {
    pub fn zeros(dim: usize, gate: bool) -> Self {
        PolicyParams {
            dim,
            gate,
            theta: vec![0.0; Self::len_for(dim)],
        }
    }

    pub fn len_for(dim: usize) -> usize {
        2 * A * dim + 2 * A + dim + 1
    }

    fn off_b(&self) -> usize {
        A * self.dim
    }
    fn off_wv(&self) -> usize {
        A * self.dim + A
    }
    fn off_bv(&self) -> usize {
        A * self.dim + A + self.dim
    }
    fn off_v(&self) -> usize {
        A * self.dim + A + self.dim + 1
    }
    fn off_c(&self) -> usize {
        2 * A * self.dim + A + self.dim + 1
    }

    pub fn forward(&self, x: &[f64]) -> Result<PolicyOutput, PolicyError> {
        if x.len() != self.dim {
            return Err(PolicyError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let d = self.dim;
        let t = &self.theta;
        let mut u = [0.0; A];
        let mut z = [0.0; A];
        for i in 0..A {
            u[i] = t[self.off_b() + i] + dot(&t[i * d..(i + 1) * d], x);
            let vo = self.off_v() + i * d;
            z[i] = t[self.off_c() + i] + dot(&t[vo..vo + d], x);
        }
        let value = t[self.off_bv()] + dot(&t[self.off_wv()..self.off_wv() + d], x);
        let mut s = u;
        if self.gate {
            for i in 0..A {
                s[i] += log_sigmoid(z[i]);
            }
        }
        let log_pi = log_softmax(&s);
        let pi = log_pi.map(f64::exp);
        Ok(PolicyOutput {
            logits: s,
            log_pi,
            pi,
            value,
            validity_logits: z,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyOutput {
    /// Final (gated) logits.
    pub logits: [f64; A],
    pub log_pi: [f64; A],
    pub pi: [f64; A],
    pub value: f64,
    pub validity_logits: [f64; A],
}

impl PolicyOutput {
    pub fn entropy(&self) -> f64 {
        -self
            .pi
            .iter()
            .zip(&self.log_pi)
            .map(|(p, l)| p * l)
            .sum::<f64>()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for i in 1..A {
            if self.logits[i] > self.logits[best] {
                best = i;
            }
        }
        best
    }

    pub fn predicted_valid(&self, i: usize) -> bool {
        self.validity_logits[i] > 0.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `log(sigmoid(z))`, stable for large |z|.
pub fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn log_softmax(s: &[f64; A]) -> [f64; A] {
    let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + s.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    s.map(|v| v - lse)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub value: f64,
    pub entropy: f64,
    /// Weight of the validity cross-entropy; zero disables it.
    pub validity: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            value: 0.5,
            entropy: 0.01,
            validity: 1.0,
        }
    }
}

/// One training sample. `advantage` and `ret` are constants of the loss.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub action: usize,
    pub advantage: f64,
    pub ret: f64,
    pub valid: [bool; A],
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub validity: f64,
    pub total: f64,
}

fn bce(z: f64, y: bool) -> f64 {
    // -[y log s + (1-y) log(1-s)], with log(1 - sigmoid(z)) = log_sigmoid(-z)
    if y {
        -log_sigmoid(z)
    } else {
        -log_sigmoid(-z)
    }
}

/// Loss of one sample:
/// `-A log pi_a + c_v/2 (R - v)^2 - beta H(pi) + eta sum_i BCE(sigmoid(z_i), y_i)`.
pub fn sample_loss(
    params: &PolicyParams,
    s: &Sample,
    w: &LossWeights,
) -> Result<LossTerms, PolicyError> {
    let out = params.forward(&s.x)?;
    let policy = -s.advantage * out.log_pi[s.action];
    let value = 0.5 * w.value * (s.ret - out.value).powi(2);
    let entropy = out.entropy();
    let validity: f64 = (0..A)
        .map(|i| bce(out.validity_logits[i], s.valid[i]))
        .sum();
    let total = policy + value - w.entropy * entropy + w.validity * validity;
    Ok(LossTerms {
        policy,
        value,
        entropy,
        validity,
        total,
    })
}

/// Add the gradient of [`sample_loss`] into `grad` and return the loss.
pub fn accumulate_gradient(
    params: &PolicyParams,
    s: &Sample,
    w: &LossWeights,
    grad: &mut [f64],
) -> Result<LossTerms, PolicyError> {
    let out = params.forward(&s.x)?;
    let d = params.dim;
    let h = out.entropy();
    let mut gs = [0.0; A];
    for i in 0..A {
        let delta = if i == s.action { 1.0 } else { 0.0 };
        gs[i] = -s.advantage * (delta - out.pi[i]) + w.entropy * out.pi[i] * (out.log_pi[i] + h);
    }
    let mut gz = [0.0; A];
    for i in 0..A {
        let sig = sigmoid(out.validity_logits[i]);
        let y = if s.valid[i] { 1.0 } else { 0.0 };
        gz[i] = w.validity * (sig - y);
        if params.gate {
            gz[i] += gs[i] * (1.0 - sig);
        }
    }
    let gv = -w.value * (s.ret - out.value);
    for i in 0..A {
        if gs[i] != 0.0 {
            for (g, x) in grad[i * d..(i + 1) * d].iter_mut().zip(&s.x) {
                *g += gs[i] * x;
            }
        }
        grad[params.off_b() + i] += gs[i];
        let vo = params.off_v() + i * d;
        for (g, x) in grad[vo..vo + d].iter_mut().zip(&s.x) {
            *g += gz[i] * x;
        }
        grad[params.off_c() + i] += gz[i];
    }
    for (g, x) in grad[params.off_wv()..params.off_wv() + d]
        .iter_mut()
        .zip(&s.x)
    {
        *g += gv * x;
    }
    grad[params.off_bv()] += gv;
    sample_loss(params, s, w)
}

/// Adam with global-norm gradient clipping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_norm: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64, clip_norm: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Apply one update; returns the pre-clip gradient norm.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) -> f64 {
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let scale = if self.clip_norm > 0.0 && norm > self.clip_norm {
            self.clip_norm / norm
        } else {
            1.0
        };
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..theta.len() {
            let g = grad[i] * scale;
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            theta[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
        norm
    }
}

const MAGIC: &[u8; 8] = b"GRIDQAP\0";
pub const PARAMS_FORMAT_VERSION: u32 = 1;

/// JSON header of a parameter file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsHeader {
    pub format_version: u32,
    pub dim: usize,
    pub actions: usize,
    pub gate: bool,
    pub count: usize,
    /// Free-form provenance (feature kind, training config, ...).
    #[serde(default)]
    pub meta: serde_json::Value,
}

/// `MAGIC`, header length (u32 LE), JSON header, then `count` f64 LE values.
pub fn write_params(
    out: &mut impl Write,
    p: &PolicyParams,
    meta: serde_json::Value,
) -> Result<(), PolicyError> {
    let header = ParamsHeader {
        format_version: PARAMS_FORMAT_VERSION,
        dim: p.dim,
        actions: A,
        gate: p.gate,
        count: p.theta.len(),
        meta,
    };
    let json = serde_json::to_vec(&header).map_err(|e| PolicyError::Format(e.to_string()))?;
    out.write_all(MAGIC)?;
    out.write_all(&(json.len() as u32).to_le_bytes())?;
    out.write_all(&json)?;
    for v in &p.theta {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_params(input: &mut impl Read) -> Result<(PolicyParams, ParamsHeader), PolicyError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(PolicyError::Format("bad magic".into()));
    }
    let mut len = [0u8; 4];
    input.read_exact(&mut len)?;
    let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
    input.read_exact(&mut json)?;
    let header: ParamsHeader =
        serde_json::from_slice(&json).map_err(|e| PolicyError::Format(e.to_string()))?;
    if header.format_version != PARAMS_FORMAT_VERSION || header.actions != A {
        return Err(PolicyError::Format(format!(
            "unsupported version {} / {} actions",
            header.format_version, header.actions
        )));
    }
    if header.count != PolicyParams::len_for(header.dim) {
        return Err(PolicyError::Format("count does not match dim".into()));
    }
    let mut theta = Vec::with_capacity(header.count);
    let mut buf = [0u8; 8];
    for _ in 0..header.count {
        input.read_exact(&mut buf)?;
        theta.push(f64::from_le_bytes(buf));
    }
    Ok((
        PolicyParams {
            dim: header.dim,
            gate: header.gate,
            theta,
        },
        header,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_params_give_uniform_policy() {
        let p = PolicyParams::zeros(7, false);
        let out = p.forward(&[0.3; 7]).unwrap();
        for &pi in &out.pi {
            assert!((pi - 1.0 / 32.0).abs() < 1e-12);
        }
        assert!((out.entropy() - (32f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn shifting_logits_leaves_policy_unchanged() {
        let mut p = PolicyParams::zeros(3, false);
        for (i, t) in p.theta.iter_mut().enumerate() {
            *t = ((i * 37) % 11) as f64 * 0.1 - 0.5;
        }
        let x = [0.5, -1.0, 2.0];
        let a = p.forward(&x).unwrap();
        let off = p.off_b();
        for i in 0..A {
            p.theta[off + i] += 3.7;
        }
        let b = p.forward(&x).unwrap();
        for i in 0..A {
            assert!((a.pi[i] - b.pi[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = PolicyParams::zeros(4, true);
        assert!(matches!(
            p.forward(&[1.0; 3]),
            Err(PolicyError::DimensionMismatch {
                expected: 4,
                got: 3
            })
        ));
    }

    #[test]
    fn params_round_trip() {
        let mut p = PolicyParams::zeros(5, true);
        for (i, t) in p.theta.iter_mut().enumerate() {
            *t = (i as f64).sin();
        }
        let mut buf = Vec::new();
        write_params(&mut buf, &p, serde_json::json!({"k": 1})).unwrap();
        let (q, h) = read_params(&mut buf.as_slice()).unwrap();
        assert_eq!(p, q);
        assert_eq!(h.meta["k"], 1);
        buf[0] = b'X';
        assert!(read_params(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn adam_descends_a_quadratic() {
        let mut theta = vec![3.0, -2.0];
        let mut opt = Adam::new(2, 0.1, 0.0);
        for _ in 0..500 {
            let g = theta.clone();
            opt.step(&mut theta, &g);
        }
        assert!(theta.iter().all(|t| t.abs() < 1e-2));
    }
}
