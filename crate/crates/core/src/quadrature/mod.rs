//! Quadrature for the approximation operators `G_ε(f)` and `F_ε(f)`.
//!
//! `G_ε` integrates over the slice `Im η = Im w`. `F_ε` integrates over the
//! fixed slice `Im η = v0`; evaluated directly, its integrand carries a
//! factor of size `exp(Γ|v - v0|²/ε²)` that cancels almost completely. The
//! default route avoids that cancellation: the untruncated integrals over
//! any two slices agree, so
//! `F = G + T_{Im w} - T_{v0}` with `T_v` the `(1 - χ_R)`-weighted tail over
//! slice `v`. [`Evaluator::f_direct`] keeps the direct form as a cross-check.

pub mod cutoff;
mod engine;
pub mod legendre;

pub use cutoff::{chi, chi_radial};
pub use engine::Scaled;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse_expr, EntirePolicy, Expr, Program, SyntaxError, Var};
use crate::graph_model::{CompactSpec, ModelGraph};
use crate::kernel::{KernelParams, ScaledKernel};
use engine::{integrate, Problem, ScaledResult, Weight};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEps(f64),
    #[error("point has dimensions ({0}, {1}), expected ({2}, {3})")]
    Dimension(usize, usize, usize, usize),
    #[error("invalid quadrature config: {0}")]
    Config(String),
    #[error("kernel and graph disagree: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadConfig {
    /// Target error relative to the absolute mass of the integrand.
    pub tol: f64,
    /// Gauss–Legendre points per panel; the error estimate uses `order - 2`.
    pub order: usize,
    /// Panels per axis across the peak box `[-truncation, truncation]`.
    pub peak_panels: usize,
    pub max_panels: usize,
    /// Node budget per tensor rule; larger boxes get a flagged coarse pass.
    pub max_nodes: usize,
    /// Half-width `L₀` of the peak box in normalized coordinates.
    pub truncation: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            tol: 1e-6,
            order: 12,
            peak_panels: 4,
            max_panels: 32,
            max_nodes: 2_000_000,
            truncation: 6.5,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<(), QuadError> {
        let bad = |m: &str| Err(QuadError::Config(m.to_string()));
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if self.order < 4 {
            return bad("order must be at least 4");
        }
        if self.peak_panels < 1 || self.max_panels < self.peak_panels {
            return bad("need 1 <= peak_panels <= max_panels");
        }
        if !(self.truncation > 0.0) {
            return bad("truncation must be positive");
        }
        Ok(())
    }
}

/// An entire function of `(ζ, η)` given in the expression language.
#[derive(Debug, Clone)]
pub struct TestFunction {
    source: String,
    expr: Expr,
    program: Program,
    d: usize,
    m: usize,
}

impl TestFunction {
    pub fn parse(src: &str, d: usize, m: usize) -> Result<Self, SyntaxError> {
        let expr = parse_expr(src, &EntirePolicy { d, m })?;
        Ok(Self::from_expr(src.trim().to_string(), expr, d, m))
    }

    fn from_expr(source: String, expr: Expr, d: usize, m: usize) -> Self {
        let program = expr.compile(|v| match v {
            Var::Zeta(k) => k,
            Var::Eta(k) => d + k,
            other => unreachable!("test functions only use zeta/eta, got {other}"),
        });
        TestFunction {
            source,
            expr,
            program,
            d,
            m,
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn eval(&self, zeta: &[Complex64], eta: &[Complex64]) -> Complex64 {
        let slots: Vec<Complex64> = zeta.iter().chain(eta).copied().collect();
        self.program.eval(&slots)
    }

    /// `f` at the graph point over packed `(x, u, v)`.
    pub fn eval_on_graph(&self, graph: &ModelGraph, xuv: &[f64]) -> Complex64 {
        let (z, w) = graph_point(graph, xuv);
        self.eval(&z, &w)
    }

    pub(crate) fn program(&self) -> &Program {
        &self.program
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d, self.m)
    }
}

/// `(x + i h(x,u,v), u + iv)`.
pub fn graph_point(graph: &ModelGraph, xuv: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let (d, m) = (graph.d(), graph.m());
    let mut y = vec![0.0; d];
    graph.eval_h_packed(xuv, &mut y);
    let z = (0..d).map(|j| Complex64::new(xuv[j], y[j])).collect();
    let w = (0..m)
        .map(|j| Complex64::new(xuv[d + j], xuv[d + m + j]))
        .collect();
    (z, w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: Complex64,
    pub err_est: f64,
    pub flagged: bool,
}

impl QuadResult {
    fn from_scaled(r: &ScaledResult) -> Self {
        QuadResult {
            value: r.value.to_complex(),
            err_est: r.ln_err.exp(),
            flagged: r.flagged,
        }
    }
}

/// `F` and `G` at one point, with `log10 |F - G|` kept separately because it
/// may exceed the `f64` range.
#[derive(Debug, Clone, PartialEq)]
pub struct FEval {
    pub f: Vec<QuadResult>,
    pub g: Vec<QuadResult>,
    pub gap_log10: Vec<f64>,
}

/// Batched evaluator: one integration pass serves every test function.
pub struct Evaluator<'a> {
    graph: &'a ModelGraph,
    params: &'a KernelParams,
    cfg: &'a QuadConfig,
    k: &'a CompactSpec,
    programs: Vec<Program>,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        graph: &'a ModelGraph,
        params: &'a KernelParams,
        cfg: &'a QuadConfig,
        k: &'a CompactSpec,
        fns: &[TestFunction],
    ) -> Result<Self, QuadError> {
        cfg.validate()?;
        if params.n != graph.n() || params.d != graph.d() {
            return Err(QuadError::Mismatch(format!(
                "kernel (n={}, d={}) vs graph (n={}, d={})",
                params.n,
                params.d,
                graph.n(),
                graph.d()
            )));
        }
        if let Some(f) = fns.iter().find(|f| f.dims() != (graph.d(), graph.m())) {
            return Err(QuadError::Mismatch(format!(
                "test function '{}' has dimensions {:?}",
                f.source(),
                f.dims()
            )));
        }
        Ok(Evaluator {
            graph,
            params,
            cfg,
            k,
            programs: fns.iter().map(|f| f.program().clone()).collect(),
        })
    }

    fn check(&self, eps: f64, z: &[Complex64], w: &[Complex64]) -> Result<(), QuadError> {
        if !(eps > 0.0) {
            return Err(QuadError::NonPositiveEps(eps));
        }
        if z.len() != self.graph.d() || w.len() != self.graph.m() {
            return Err(QuadError::Dimension(z.len(), w.len(), self.graph.d(), self.graph.m()));
        }
        Ok(())
    }

    fn run(&self, kernel: &ScaledKernel, eps: f64, z: &[Complex64], w: &[Complex64], slice: &[f64], weight: Weight) -> Vec<ScaledResult> {
        let p = Problem {
            graph: self.graph,
            params: self.params,
            kernel,
            fns: &self.programs,
            cfg: self.cfg,
            eps,
            radius: self.k.radius,
            z,
            w,
        };
        integrate(&p, slice, weight)
    }

    /// `G_ε(f)(z, w)` for every test function.
    pub fn g(&self, eps: f64, z: &[Complex64], w: &[Complex64]) -> Result<Vec<QuadResult>, QuadError> {
        self.check(eps, z, w)?;
        let kernel = ScaledKernel::new(self.params, eps);
        let slice: Vec<f64> = w.iter().map(|c| c.im).collect();
        Ok(self
            .run(&kernel, eps, z, w, &slice, Weight::Cutoff)
            .iter()
            .map(QuadResult::from_scaled)
            .collect())
    }

    /// `F_ε(f)(z, w)` through the tail identity, together with `G_ε(f)(z, w)`.
    pub fn f(&self, eps: f64, z: &[Complex64], w: &[Complex64]) -> Result<FEval, QuadError> {
        self.check(eps, z, w)?;
        let kernel = ScaledKernel::new(self.params, eps);
        let slice: Vec<f64> = w.iter().map(|c| c.im).collect();
        let g = self.run(&kernel, eps, z, w, &slice, Weight::Cutoff);
        let nf = g.len();
        let (tail_v, tail_0) = if slice == self.k.v0 {
            (vec![ScaledResult::ZERO; nf], vec![ScaledResult::ZERO; nf])
        } else {
            (
                self.run(&kernel, eps, z, w, &slice, Weight::Tail),
                self.run(&kernel, eps, z, w, &self.k.v0, Weight::Tail),
            )
        };
        let mut out = FEval {
            f: Vec::with_capacity(nf),
            g: Vec::with_capacity(nf),
            gap_log10: Vec::with_capacity(nf),
        };
        for k in 0..nf {
            let gap = tail_v[k].value.sub(&tail_0[k].value);
            let gv = g[k].value.to_complex();
            let err = g[k].ln_err.exp() + tail_v[k].ln_err.exp() + tail_0[k].ln_err.exp();
            let value = gv + gap.to_complex();
            out.f.push(QuadResult {
                value,
                err_est: err,
                flagged: g[k].flagged || tail_v[k].flagged || tail_0[k].flagged || !value.is_finite(),
            });
            out.g.push(QuadResult::from_scaled(&g[k]));
            out.gap_log10.push(gap.ln_abs() / std::f64::consts::LN_10);
        }
        Ok(out)
    }

    /// `F_ε(f)(z, w)` by direct quadrature over the slice `v0`.
    pub fn f_direct(&self, eps: f64, z: &[Complex64], w: &[Complex64]) -> Result<Vec<QuadResult>, QuadError> {
        self.check(eps, z, w)?;
        let kernel = ScaledKernel::new(self.params, eps);
        Ok(self
            .run(&kernel, eps, z, w, &self.k.v0, Weight::Cutoff)
            .iter()
            .map(QuadResult::from_scaled)
            .collect())
    }
}

/// `G_ε(f)(z, w)` for a single test function.
#[allow(clippy::too_many_arguments)]
pub fn eval_g(
    graph: &ModelGraph,
    params: &KernelParams,
    cfg: &QuadConfig,
    f: &TestFunction,
    k: &CompactSpec,
    eps: f64,
    z: &[Complex64],
    w: &[Complex64],
) -> Result<QuadResult, QuadError> {
    let ev = Evaluator::new(graph, params, cfg, k, std::slice::from_ref(f))?;
    Ok(ev.g(eps, z, w)?[0])
}

/// `F_ε(f)(z, w)` for a single test function.
#[allow(clippy::too_many_arguments)]
pub fn eval_f(
    graph: &ModelGraph,
    params: &KernelParams,
    cfg: &QuadConfig,
    f: &TestFunction,
    k: &CompactSpec,
    eps: f64,
    z: &[Complex64],
    w: &[Complex64],
) -> Result<QuadResult, QuadError> {
    let ev = Evaluator::new(graph, params, cfg, k, std::slice::from_ref(f))?;
    Ok(ev.f(eps, z, w)?.f[0])
}

/// `max |approx_i - f(graph(p_i))|` over the grid.
pub fn sup_error(
    f: &TestFunction,
    graph: &ModelGraph,
    approx: &[Complex64],
    grid: &[Vec<f64>],
) -> f64 {
    approx
        .iter()
        .zip(grid)
        .map(|(a, p)| (a - f.eval_on_graph(graph, p)).norm())
        .fold(0.0, |acc: f64, e| if acc.is_nan() || e.is_nan() { f64::NAN } else { acc.max(e) })
}
