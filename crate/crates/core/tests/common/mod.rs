//! Test-only oracles and input generators. Nothing here calls the library's
//! entropy, median, sigmoid, top-k or scoring code.
#![allow(dead_code)]

use adaptive_cs::backend::{Backend, TokenId};
use adaptive_cs::prob::ProbabilityDistribution;
use adaptive_cs::rng::SampleRng;

/// Dirichlet-like random distribution; `sharpness` > 1 concentrates mass.
pub fn random_dist(rng: &mut SampleRng, n: usize, sharpness: f64) -> ProbabilityDistribution {
    let w: Vec<f64> = (0..n)
        .map(|_| (-(1.0 - rng.next_unit()).ln()).powf(sharpness))
        .collect();
    ProbabilityDistribution::from_weights(w).unwrap()
}

pub fn random_unit(rng: &mut SampleRng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| 2.0 * rng.next_unit() - 1.0).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

pub fn random_prompt(rng: &mut SampleRng, vocab: usize, len: usize) -> Vec<TokenId> {
    (0..len)
        .map(|_| TokenId((rng.next_unit() * vocab as f64) as u32))
        .collect()
}

pub fn oracle_entropy(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &x in p {
        if x > 0.0 {
            h -= x * x.ln();
        }
    }
    h
}

pub fn oracle_median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    Some(if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    })
}

pub fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Indices of the `k` largest masses; ties to the lower index.
pub fn oracle_topk(p: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[b].partial_cmp(&p[a]).unwrap().then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// One step of the oracle trace.
#[derive(Debug, Clone)]
pub struct OracleStep {
    pub chosen: u32,
    pub full_entropy: f64,
    pub topk_entropy: f64,
    pub delta_t: f64,
    pub delta_tk: f64,
    pub k_t: usize,
    pub alpha_t: f64,
    pub model_confidence: f64,
    pub penalty: f64,
}

/// Straight-line adaptive contrastive search. Only `Backend::step` is used.
pub fn oracle_acs(
    backend: &dyn Backend,
    prompt: &[TokenId],
    q: f64,
    steps: usize,
    double_exp: bool,
) -> Vec<OracleStep> {
    let eps = 1e-6;
    let mut ctx: Vec<TokenId> = prompt.to_vec();
    let mut reps: Vec<Vec<f64>> = (1..=prompt.len())
        .map(|j| {
            backend
                .step(&prompt[..j])
                .unwrap()
                .last_representation
                .values()
                .to_vec()
        })
        .collect();
    let mut full_hist: Vec<f64> = Vec::new();
    let mut topk_hist: Vec<f64> = Vec::new();
    let mut out = Vec::new();
    for _ in 0..steps {
        let p = backend.step(&ctx).unwrap().dist.probs().to_vec();
        let v = p.len() as f64;

        let h = oracle_entropy(&p);
        let med = oracle_median(&full_hist).unwrap_or(h);
        let r = ((h - med) / v.ln()).max(-1.0 + eps).min(1.0 - eps);
        let delta_t = q * 0.5 * ((1.0 + r) / (1.0 - r)).ln();
        let k = (10.0 * delta_t.exp() / (delta_t.exp() + 1.0) + 5.0).round() as usize;

        let top = oracle_topk(&p, k);
        let mass: f64 = top.iter().map(|&i| p[i]).sum();
        let renorm: Vec<f64> = top.iter().map(|&i| p[i] / mass).collect();
        let hk = oracle_entropy(&renorm);
        let normalized = hk / (k as f64).ln();
        let medk = oracle_median(&topk_hist).unwrap_or(normalized);
        let rk = (normalized - medk).max(-1.0 + eps).min(1.0 - eps);
        let delta_tk = q * 0.5 * ((1.0 + rk) / (1.0 - rk)).ln();
        let arg = if double_exp {
            delta_tk.signum() * (delta_tk.abs().min(30.0).exp() - 1.0)
        } else {
            delta_tk
        };
        let alpha = 1.0 / (1.0 + (-arg).exp());

        let mut best: Option<(f64, usize, f64, Vec<f64>)> = None;
        let mut by_id = top.clone();
        by_id.sort();
        for &cand in &by_id {
            let mut ext = ctx.clone();
            ext.push(TokenId(cand as u32));
            let h_v = backend
                .step(&ext)
                .unwrap()
                .last_representation
                .values()
                .to_vec();
            let pen = reps
                .iter()
                .map(|c| oracle_cosine(&h_v, c))
                .fold(f64::NEG_INFINITY, f64::max);
            let score = (1.0 - alpha) * p[cand] - alpha * pen;
            if best.as_ref().is_none_or(|b| score > b.0) {
                best = Some((score, cand, pen, h_v));
            }
        }
        let (_, chosen, pen, h_v) = best.unwrap();
        full_hist.push(h);
        topk_hist.push(normalized);
        ctx.push(TokenId(chosen as u32));
        reps.push(h_v);
        out.push(OracleStep {
            chosen: chosen as u32,
            full_entropy: h,
            topk_entropy: hk,
            delta_t,
            delta_tk,
            k_t: k,
            alpha_t: alpha,
            model_confidence: p[chosen],
            penalty: pen,
        });
    }
    out
}

/// Recomputes the synthetic model from its documented procedure.
pub mod synthetic_oracle {
    const GAMMA: u64 = 0x9E3779B97F4A7C15;

    pub fn splitmix(z: u64) -> u64 {
        let mut z = z.wrapping_add(GAMMA);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    fn unit(z: u64) -> f64 {
        (z >> 11) as f64 / 9007199254740992.0
    }

    pub fn probs(vocab: usize, seed: u64, bias: f64, ctx: &[u32]) -> Vec<f64> {
        let window = &ctx[ctx.len().saturating_sub(4)..];
        let mut h = splitmix(seed ^ 0x243F6A8885A308D3);
        for &t in window {
            h = splitmix(h ^ (t as u64 + 1));
        }
        let s = 1.0 + 7.0 * unit(splitmix(h ^ 0x13198A2E03707344));
        let logits: Vec<f64> = (0..vocab as u64)
            .map(|v| s * (2.0 * unit(splitmix(h ^ (v + 1).wrapping_mul(GAMMA))) - 1.0))
            .collect();
        let m = logits.iter().cloned().fold(f64::MIN, f64::max);
        let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
        let z: f64 = e.iter().sum();
        let last = *ctx.last().unwrap() as usize;
        let mut p: Vec<f64> = e.iter().map(|x| (1.0 - bias) * x / z).collect();
        p[last] += bias;
        let total: f64 = p.iter().sum();
        p.iter().map(|x| x / total).collect()
    }

    pub fn representation(dim: usize, seed: u64, ctx: &[u32]) -> Vec<f64> {
        let n = ctx.len();
        let prev = if n >= 2 { ctx[n - 2] as u64 + 1 } else { 0 };
        let r = splitmix(
            splitmix(splitmix(seed ^ 0xA4093822299F31D0) ^ prev) ^ (ctx[n - 1] as u64 + 1),
        );
        let raw: Vec<f64> = (0..dim as u64)
            .map(|i| 2.0 * unit(splitmix(r ^ (i + 1).wrapping_mul(GAMMA))) - 1.0)
            .collect();
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        raw.into_iter().map(|x| x / norm).collect()
    }
}

/// Brute-force diversity with explicit set insertion.
pub fn oracle_diversity(tokens: &[u32]) -> f64 {
    let mut product = 1.0;
    for n in 2..=4 {
        let mut seen: Vec<Vec<u32>> = Vec::new();
        let mut total = 0;
        for i in 0..=tokens.len() - n {
            total += 1;
            let g = tokens[i..i + n].to_vec();
            if !seen.contains(&g) {
                seen.push(g);
            }
        }
        product *= seen.len() as f64 / total as f64;
    }
    product
}
