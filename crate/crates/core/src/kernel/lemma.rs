//! Sampled audit of the main kernel estimate and the constant cascade.
//!
//! The audited inequality, for `(z, w) = (x + i h(x,u,v), u + iv)` on `K` and
//! a second slice point `(ζ, η) = H^{v'}(s, t)`:
//!
//! ```text
//! -Re Ẽ(ζ - z, η - w) <= -(s_d - x_d)²/2 - Σ_{j<d} ((s_j - x_j)² + (s_j - x_j)^{P_j})
//!                        - Σ ((t - u)² + (t - u)^Q) + C̃ Σ ((v' - v)² + (v' - v)^Q)
//! ```
//!
//! The margin of a sample is left side minus right side.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    c_k_constant, even_above, even_at_least, young_constant, AuditRecord, KernelError,
    KernelParams,
};
use crate::graph_model::{norm, BoxK, CompactSpec, GrowthBound, ModelGraph};
use crate::rng;

/// Mixture law for the second point `(s, t, v')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleLaw {
    /// Standard deviation of the near-diagonal Gaussian component.
    pub near_scale: f64,
    /// Standard deviation of the local Gaussian component.
    pub local_scale: f64,
    /// Dilation factor of the uniform far-field box.
    pub wide_factor: f64,
    /// Heavy-tail radii are `heavy_scale * 10^U(0, heavy_decades)`.
    pub heavy_scale: f64,
    pub heavy_decades: f64,
    /// Probability that `v' = v`.
    pub same_slice: f64,
}

impl SampleLaw {
    pub fn for_box(bx: &BoxK) -> Self {
        let scale = bx.diameter().max(1.0);
        SampleLaw {
            near_scale: 0.05 * scale,
            local_scale: 0.5 * scale,
            wide_factor: 4.0,
            heavy_scale: scale,
            heavy_decades: 2.0,
            same_slice: 1.0 / 3.0,
        }
    }
}

/// One audit sample: the base point `(x, u, v)` and the second point
/// `(s, t, v')`, both packed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginWitness {
    pub base: Vec<f64>,
    pub other: Vec<f64>,
}

impl fmt::Display for MarginWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(x,u,v) = {:?}, (s,t,v') = {:?}", self.base, self.other)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub samples: usize,
    pub worst_margin: f64,
    pub witness: MarginWitness,
}

/// Draws sample `index`; `v_start` is the packed offset of `v`.
fn draw_sample(bx: &BoxK, law: &SampleLaw, seed: u64, index: u64, v_start: usize) -> MarginWitness {
    let mut r = rng::stream(seed, index);
    let base = bx.sample(&mut r);
    let dim = base.len();
    let kind: f64 = r.gen();
    let mut other: Vec<f64> = if kind < 0.25 {
        base.iter().map(|b| b + law.near_scale * rng::normal(&mut r)).collect()
    } else if kind < 0.5 {
        base.iter().map(|b| b + law.local_scale * rng::normal(&mut r)).collect()
    } else if kind < 0.8 {
        bx.dilated(law.wide_factor).sample(&mut r)
    } else {
        let dir: Vec<f64> = (0..dim).map(|_| rng::normal(&mut r)).collect();
        let len = norm(&dir).max(1e-300);
        let radius = law.heavy_scale * 10f64.powf(r.gen_range(0.0..law.heavy_decades));
        base.iter().zip(&dir).map(|(b, e)| b + radius * e / len).collect()
    };
    if r.gen::<f64>() < law.same_slice {
        other[v_start..].copy_from_slice(&base[v_start..]);
    }
    MarginWitness { base, other }
}

fn audit_set(graph: &ModelGraph, bx: &BoxK, law: &SampleLaw, n: usize, seed: u64) -> Vec<MarginWitness> {
    let v_start = graph.d() + graph.m();
    (0..n as u64)
        .into_par_iter()
        .map(|i| draw_sample(bx, law, seed, i, v_start))
        .collect()
}

/// Margin of one sample; positive means the inequality fails there.
/// Parameters are not validated, so degenerate constants can be audited.
pub(crate) fn sample_margin(params: &KernelParams, graph: &ModelGraph, sample: &MarginWitness) -> f64 {
    let (d, m) = (graph.d(), graph.m());
    let (x, rest) = sample.base.split_at(d);
    let (u, v) = rest.split_at(m);
    let (s, rest) = sample.other.split_at(d);
    let (t, vp) = rest.split_at(m);
    let hz = graph.eval_h(x, u, v);
    let hs = graph.eval_h(s, t, vp);
    let dz: Vec<Complex64> = (0..d).map(|j| Complex64::new(s[j] - x[j], hs[j] - hz[j])).collect();
    let dw: Vec<Complex64> = (0..m).map(|j| Complex64::new(t[j] - u[j], vp[j] - v[j])).collect();
    let lhs = -params.tilde_e(&dz, &dw).re;

    let q = params.q as i32;
    let mut rhs = -0.5 * dz[d - 1].re * dz[d - 1].re;
    for j in 0..d - 1 {
        let a = dz[j].re;
        rhs -= a * a + a.powi(params.p[j] as i32);
    }
    for e in &dw {
        rhs -= e.re * e.re + e.re.powi(q);
        rhs += params.c_tilde * (e.im * e.im + e.im.powi(q));
    }
    let margin = lhs - rhs;
    if margin.is_nan() {
        f64::INFINITY
    } else {
        margin
    }
}

fn worst_of(params: &KernelParams, graph: &ModelGraph, set: &[MarginWitness]) -> (f64, usize) {
    let margins: Vec<f64> = set.par_iter().map(|s| sample_margin(params, graph, s)).collect();
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, &mg) in margins.iter().enumerate() {
        if mg > best.0 {
            best = (mg, i);
        }
    }
    best
}

/// Worst sampled margin over `n_samples` draws: `(x, u, v)` uniform in `B_K`,
/// `(s, t, v')` from `law` (defaults to [`SampleLaw::for_box`]).
pub fn check_lemma1_margin(
    params: &KernelParams,
    graph: &ModelGraph,
    k: &CompactSpec,
    n_samples: usize,
    seed: u64,
    law: Option<&SampleLaw>,
) -> MarginReport {
    let n_samples = n_samples.max(1);
    let default_law;
    let law = match law {
        Some(l) => l,
        None => {
            default_law = SampleLaw::for_box(&k.bx);
            &default_law
        }
    };
    let set = audit_set(graph, &k.bx, law, n_samples, seed);
    let (worst, idx) = worst_of(params, graph, &set);
    MarginReport {
        samples: n_samples,
        worst_margin: worst,
        witness: set[idx].clone(),
    }
}

/// `sup_λ [λ^k/2 - Re (λ + i)^k]`: the constant `L` in
/// `-Re (a + ib)^k <= -a^k/2 + L b^k` for even `k`.
pub fn eta_power_constant(k: u64) -> f64 {
    let k32 = k as i32;
    let f = |l: f64| 0.5 * l.powi(k32) - Complex64::new(l, 1.0).powi(k32).re;
    // beyond λ = k the real part of (λ+i)^k is positive and dominates
    let hi = k as f64 + 2.0;
    let steps = 20_000;
    let (mut best, mut arg) = (f(0.0), 0.0);
    for i in 1..=steps {
        let l = hi * i as f64 / steps as f64;
        let v = f(l);
        if v > best {
            best = v;
            arg = l;
        }
    }
    let h = hi / steps as f64;
    let (mut a, mut b) = ((arg - h).max(0.0), arg + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.max(f(0.5 * (a + b))).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub j: usize,
    pub p: u64,
    pub lambda: u64,
    /// Running even exponent after this stage.
    pub m_hat: u64,
    pub c_k: f64,
    pub escalations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    /// Stages in selection order `j = d-1, ..., 1`.
    pub stages: Vec<StageRecord>,
    /// Final exponent `M'` before `Q` is chosen.
    pub m_prime: u64,
    /// Stage constant used for `Γ`.
    pub c_k_gamma: f64,
    pub gamma_escalations: usize,
    pub q_escalations: usize,
    pub c_tilde_escalations: usize,
    pub rounds: usize,
    pub worst_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOptions {
    pub seed: u64,
    pub budget: usize,
    pub audit_samples: usize,
    pub law: Option<SampleLaw>,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        SelectionOptions {
            seed: 1,
            budget: 96,
            audit_samples: 10_000,
            law: None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Move {
    Lambda(usize),
    P(usize),
    Gamma,
    Q,
    CTilde,
}

/// `None` when the move would overflow the integer constants.
fn apply(params: &KernelParams, mv: Move) -> Option<KernelParams> {
    let mut p = params.clone();
    match mv {
        Move::Lambda(j) => p.lambda[j] = p.lambda[j].checked_mul(2)?,
        Move::P(j) => p.p[j] = p.p[j].checked_add(2).filter(|&v| v <= 1000)?,
        Move::Gamma => p.gamma = p.gamma.checked_mul(2)?,
        Move::Q => p.q = p.q.checked_add(2).filter(|&v| v <= 1000)?,
        Move::CTilde => p.c_tilde *= 2.0,
    }
    Some(p)
}

/// Chooses the kernel constants for `graph` over `k`.
///
/// With `A = C c_K`, `L = L_{1/2}` for `p = q = 2` and weights `W_d = 1`:
/// for `j = d-1, ..., 1`, `P_j` is the smallest even integer above
/// `2 P_{j+1} (N+1)` (`P_d = 2`), `C_{K,j} = L A Σ_{k>j} W_k`, `Λ_j` the
/// smallest even integer above `2 (C_{K,j} + 1)` and `W_j = Λ_j`. The
/// running exponent starts at `2(N+1)` and absorbs `P_j (N+1)`; `Q` is the
/// final value but at least 6, so that the `ε^{Q-2} η^Q` bias is `O(ε⁴)`; `Γ` the smallest even integer above `2 (L A Σ W_k + 1)`,
/// and `C̃` twice the accumulated constant. The estimate is then audited
/// and, while a sample violates it, the single doubling or exponent raise
/// that lowers the worst margin most is applied, at most `budget` times.
pub fn select_constants(
    graph: &ModelGraph,
    k: &CompactSpec,
    growth: GrowthBound,
    opts: &SelectionOptions,
) -> Result<(KernelParams, SelectionTrace), KernelError> {
    let (n, d) = (graph.n(), graph.d());
    let rho = k.bx.max_norm(0, k.bx.dim());
    let a_const = growth.c * c_k_constant(growth.n, rho);
    let l = young_constant(2.0, 2.0, 0.5)?;
    let nn = growth.n as f64 + 1.0;

    let mut stages = Vec::new();
    let mut lambda = vec![0u64; d - 1];
    let mut p = vec![0u64; d - 1];
    let mut weight_sum = 1.0;
    let mut p_next = 2u64;
    let mut m_hat = even_at_least(2.0 * nn);
    for j in (0..d - 1).rev() {
        let pj = even_above(2.0 * p_next as f64 * nn);
        let ckj = l * a_const * weight_sum;
        let lj = even_above(2.0 * (ckj + 1.0));
        m_hat = m_hat.max(even_at_least(pj as f64 * nn));
        lambda[j] = lj;
        p[j] = pj;
        weight_sum += lj as f64;
        p_next = pj;
        stages.push(StageRecord {
            j: j + 1,
            p: pj,
            lambda: lj,
            m_hat,
            c_k: ckj,
            escalations: 0,
        });
    }
    let m_prime = m_hat;
    let q = even_at_least((m_prime as f64).max(6.0));
    let c_k_gamma = l * a_const * weight_sum;
    let gamma = even_above(2.0 * (c_k_gamma + 1.0));
    let mut acc = c_k_gamma + gamma as f64 * (1.0 + eta_power_constant(q));
    for j in 0..d - 1 {
        acc += lambda[j] as f64 * (1.0 + eta_power_constant(p[j]));
    }
    let mut params = KernelParams {
        n,
        d,
        lambda,
        p,
        gamma,
        q,
        c_tilde: 2.0 * acc,
        audit: None,
    };
    params.validate()?;

    let law = opts.law.clone().unwrap_or_else(|| SampleLaw::for_box(&k.bx));
    let set = audit_set(graph, &k.bx, &law, opts.audit_samples.max(1), opts.seed);
    let (mut worst, mut idx) = worst_of(&params, graph, &set);
    let mut trace = SelectionTrace {
        stages,
        m_prime,
        c_k_gamma,
        gamma_escalations: 0,
        q_escalations: 0,
        c_tilde_escalations: 0,
        rounds: 0,
        worst_margin: worst,
    };
    while worst > 0.0 {
        if trace.rounds >= opts.budget {
            return Err(KernelError::BudgetExhausted {
                worst_margin: worst,
                witness: set[idx].clone(),
            });
        }
        let mut moves: Vec<Move> = Vec::new();
        for j in 0..d - 1 {
            moves.push(Move::Lambda(j));
            moves.push(Move::P(j));
        }
        moves.extend([Move::Gamma, Move::Q, Move::CTilde]);
        let mut best: Option<(f64, usize, Move, KernelParams)> = None;
        for mv in moves {
            let Some(cand) = apply(&params, mv) else { continue };
            let (w, i) = worst_of(&cand, graph, &set);
            if best.as_ref().map_or(true, |b| w < b.0) {
                best = Some((w, i, mv, cand));
            }
        }
        let Some((w, i, mv, cand)) = best else {
            return Err(KernelError::BudgetExhausted {
                worst_margin: worst,
                witness: set[idx].clone(),
            });
        };
        match mv {
            Move::Lambda(j) | Move::P(j) => {
                let stage = trace.stages.iter_mut().find(|s| s.j == j + 1).expect("stage");
                stage.escalations += 1;
                stage.lambda = cand.lambda[j];
                stage.p = cand.p[j];
            }
            Move::Gamma => trace.gamma_escalations += 1,
            Move::Q => trace.q_escalations += 1,
            Move::CTilde => trace.c_tilde_escalations += 1,
        }
        params = cand;
        worst = w;
        idx = i;
        trace.rounds += 1;
    }
    trace.worst_margin = worst;
    params.audit = Some(AuditRecord {
        samples: set.len(),
        seed: opts.seed,
        worst_margin: worst,
    });
    Ok((params, trace))
}
