//! Bloom-Graham model graphs `y_j = h_j(x_1, .., x_{j-1}, u, v)`.
//!
//! Points of the graph are stored by their free coordinates `(x, u, v)`;
//! `y` is always recomputed from `h`.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::expr::{lex, Expr, Parser, Program, SyntaxError, Tok, Var, VarPolicy};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("decoupling violation: h{j} uses x{k}")]
    Decoupling { j: usize, k: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid compact set: {0}")]
    Compact(String),
}

/// Accepts `x`, `u`, `v` within the declared dimensions. Decoupling is
/// checked after parsing so it gets its own error.
struct GraphPolicy {
    d: usize,
    m: usize,
}

impl VarPolicy for GraphPolicy {
    fn resolve(&self, name: &str, index: usize) -> Result<Var, String> {
        let (var, bound) = match name {
            "x" => (Var::X(index - 1), self.d),
            "u" => (Var::U(index - 1), self.m),
            "v" => (Var::V(index - 1), self.m),
            _ => {
                return Err(format!(
                    "unknown variable '{name}{index}' (graphing functions use x/u/v)"
                ))
            }
        };
        if index > bound {
            return Err(format!("{name}{index} exceeds dimension {bound}"));
        }
        Ok(var)
    }

    fn allow_exp(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone)]
pub struct ModelGraph {
    n: usize,
    d: usize,
    h: Vec<Expr>,
    h_prog: Vec<Program>,
    /// `dh_prog[j][c]`: partial of `h_j` in column `c` of `(x, u, v)`.
    dh_prog: Vec<Vec<Program>>,
}

impl ModelGraph {
    pub fn new(n: usize, d: usize, h: Vec<Expr>) -> Result<Self, SpecError> {
        if d == 0 || d >= n {
            return Err(SpecError::Dimension(format!(
                "need 1 <= d <= n-1, got n={n} d={d}"
            )));
        }
        if h.len() != d {
            return Err(SpecError::Dimension(format!(
                "expected {d} graphing functions, got {}",
                h.len()
            )));
        }
        let m = n - d;
        for (j, hj) in h.iter().enumerate() {
            if hj.contains_exp() {
                return Err(SpecError::Dimension(format!(
                    "h{} uses exp, which is not allowed in graphing functions",
                    j + 1
                )));
            }
            for var in hj.variables() {
                match var {
                    Var::X(k) if k >= j => {
                        return Err(SpecError::Decoupling { j: j + 1, k: k + 1 })
                    }
                    Var::X(k) if k >= d => {
                        return Err(SpecError::Dimension(format!("x{} exceeds d={d}", k + 1)))
                    }
                    Var::U(k) | Var::V(k) if k >= m => {
                        return Err(SpecError::Dimension(format!("{var} exceeds n-d={m}")))
                    }
                    Var::Zeta(_) | Var::Eta(_) => {
                        return Err(SpecError::Dimension(format!(
                            "{var} is not a graph coordinate"
                        )))
                    }
                    _ => {}
                }
            }
        }
        let slot = move |v: Var| match v {
            Var::X(k) => k,
            Var::U(k) => d + k,
            Var::V(k) => d + m + k,
            _ => unreachable!("checked above"),
        };
        let columns: Vec<Var> = (0..d)
            .map(Var::X)
            .chain((0..m).map(Var::U))
            .chain((0..m).map(Var::V))
            .collect();
        let h_prog = h.iter().map(|e| e.compile(slot)).collect();
        let dh_prog = h
            .iter()
            .map(|e| {
                columns
                    .iter()
                    .map(|&c| e.derivative(c).compile(slot))
                    .collect()
            })
            .collect();
        Ok(ModelGraph {
            n,
            d,
            h,
            h_prog,
            dh_prog,
        })
    }

    /// The flat graph `h = 0`.
    pub fn flat(n: usize, d: usize) -> Result<Self, SpecError> {
        Self::new(n, d, vec![Expr::constant(0); d])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `n - d`, the number of `w` coordinates.
    pub fn m(&self) -> usize {
        self.n - self.d
    }

    pub fn graphing_functions(&self) -> &[Expr] {
        &self.h
    }

    /// True when no graphing function depends on `x` (rigid graph).
    pub fn is_rigid(&self) -> bool {
        self.h
            .iter()
            .all(|e| e.variables().iter().all(|v| !matches!(v, Var::X(_))))
    }

    /// `y = h(x, u + iv)`.
    pub fn eval_h(&self, x: &[f64], u: &[f64], v: &[f64]) -> Vec<f64> {
        let xuv = concat3(x, u, v);
        let mut y = vec![0.0; self.d];
        self.eval_h_packed(&xuv, &mut y);
        y
    }

    /// Hot-path form of [`eval_h`](Self::eval_h) on packed `(x, u, v)`.
    #[inline]
    pub fn eval_h_packed(&self, xuv: &[f64], y: &mut [f64]) {
        for (yj, p) in y.iter_mut().zip(&self.h_prog) {
            *yj = p.eval(xuv);
        }
    }

    /// Real derivative of `h`: a `d x (d + 2(n-d))` matrix with columns
    /// ordered `(x, u, v)`.
    pub fn eval_dh(&self, x: &[f64], u: &[f64], v: &[f64]) -> DMatrix<f64> {
        self.eval_dh_packed(&concat3(x, u, v))
    }

    pub fn eval_dh_packed(&self, xuv: &[f64]) -> DMatrix<f64> {
        let cols = self.d + 2 * self.m();
        DMatrix::from_fn(self.d, cols, |j, c| self.dh_prog[j][c].eval(xuv))
    }

    /// `H^v(s, t) = (s + i h(s, t, v), t + i v)`.
    pub fn slice_point(
        &self,
        v: &[f64],
        s: &[f64],
        t: &[f64],
    ) -> (Vec<Complex64>, Vec<Complex64>) {
        let y = self.eval_h(s, t, v);
        let zeta = s
            .iter()
            .zip(&y)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect();
        let eta = t
            .iter()
            .zip(v)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect();
        (zeta, eta)
    }

    /// Sampled audit of `|Dh(x,w)| <= C (1 + |x|^N + |w|^N)` on `bx` and
    /// on copies dilated about its centre by 2, 4 and 8.
    pub fn growth_certificate(
        &self,
        bx: &BoxK,
        bound: GrowthBound,
        n_samples: usize,
        seed: u64,
    ) -> GrowthReport {
        let mut worst = GrowthReport {
            pass: true,
            worst_ratio: 0.0,
            witness: bx.center(),
        };
        for (level, factor) in [1.0, 2.0, 4.0, 8.0].into_iter().enumerate() {
            let dil = bx.dilated(factor);
            let mut r = rng::stream(seed, 0x6772_0000 + level as u64);
            for _ in 0..n_samples.max(1) {
                let p = dil.sample(&mut r);
                let ratio = self.growth_ratio(&p, bound);
                if ratio > worst.worst_ratio || ratio.is_nan() {
                    worst.worst_ratio = ratio;
                    worst.witness = p;
                }
            }
        }
        worst.pass = worst.worst_ratio <= 1.0;
        worst
    }

    fn growth_ratio(&self, xuv: &[f64], bound: GrowthBound) -> f64 {
        let dh = self.eval_dh_packed(xuv);
        let (x, w) = xuv.split_at(self.d);
        let nx = norm(x);
        let nw = norm(w);
        let n = bound.n as i32;
        dh.norm() / (bound.c * (1.0 + nx.powi(n) + nw.powi(n)))
    }
}

impl fmt::Display for ModelGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} d={}", self.n, self.d)?;
        for (j, e) in self.h.iter().enumerate() {
            write!(f, "; h{} = {}", j + 1, e)?;
        }
        Ok(())
    }
}

/// Parse `n=<int> d=<int>; h1 = <expr>; ...`.
pub fn parse_graph_spec(text: &str) -> Result<ModelGraph, SpecError> {
    let toks = lex(text)?;
    let mut groups: Vec<(&[crate::expr::Token], usize)> = Vec::new();
    let mut start = 0;
    for (i, t) in toks.iter().enumerate() {
        if t.tok == Tok::Sym(';') {
            groups.push((&toks[start..i], t.pos));
            start = i + 1;
        }
    }
    groups.push((&toks[start..], text.len()));

    let (header, header_end) = groups[0];
    let (n, d) = parse_header(header, header_end)?;
    if d == 0 || d >= n {
        return Err(SpecError::Dimension(format!(
            "need 1 <= d <= n-1, got n={n} d={d}"
        )));
    }
    let policy = GraphPolicy { d, m: n - d };
    let mut h: Vec<Option<Expr>> = vec![None; d];
    for &(group, end) in &groups[1..] {
        let at = |i: usize| group.get(i).map_or(end, |t| t.pos);
        let j = match (group.first().map(|t| &t.tok), group.get(1).map(|t| &t.tok)) {
            (Some(Tok::Ident(name)), Some(Tok::Int(j))) if name == "h" => *j as usize,
            _ => {
                return Err(SyntaxError {
                    pos: at(0),
                    msg: "expected 'h<index> = <expr>'".into(),
                }
                .into())
            }
        };
        if group.get(2).map(|t| &t.tok) != Some(&Tok::Sym('=')) {
            return Err(SyntaxError {
                pos: at(2),
                msg: "expected '='".into(),
            }
            .into());
        }
        if j == 0 || j > d {
            return Err(SpecError::Dimension(format!("h{j} but d={d}")));
        }
        if h[j - 1].is_some() {
            return Err(SpecError::Dimension(format!("h{j} defined twice")));
        }
        let body = &group[3..];
        if body.is_empty() {
            return Err(SyntaxError {
                pos: end,
                msg: "empty expression".into(),
            }
            .into());
        }
        let expr = Parser::new(body, end, &policy).parse_all()?;
        // report decoupling before any later dimension complaints
        for var in expr.variables() {
            if let Var::X(k) = var {
                if k + 1 >= j {
                    return Err(SpecError::Decoupling { j, k: k + 1 });
                }
            }
        }
        h[j - 1] = Some(expr);
    }
    let h = h
        .into_iter()
        .enumerate()
        .map(|(j, e)| e.ok_or_else(|| SpecError::Dimension(format!("h{} is missing", j + 1))))
        .collect::<Result<Vec<_>, _>>()?;
    ModelGraph::new(n, d, h)
}

fn parse_header(toks: &[crate::expr::Token], end: usize) -> Result<(usize, usize), SpecError> {
    let mut vals = [None, None];
    let mut i = 0;
    for (slot, key) in ["n", "d"].iter().enumerate() {
        let pos = |i: usize| toks.get(i).map_or(end, |t| t.pos);
        match (
            toks.get(i).map(|t| &t.tok),
            toks.get(i + 1).map(|t| &t.tok),
            toks.get(i + 2).map(|t| &t.tok),
        ) {
            (Some(Tok::Ident(k)), Some(Tok::Sym('=')), Some(Tok::Int(v))) if k == key => {
                vals[slot] = Some(*v as usize);
                i += 3;
            }
            _ => {
                return Err(SyntaxError {
                    pos: pos(i),
                    msg: format!("expected '{key} = <int>' in header"),
                }
                .into())
            }
        }
    }
    if i != toks.len() {
        return Err(SyntaxError {
            pos: toks[i].pos,
            msg: "unexpected token in header".into(),
        }
        .into());
    }
    Ok((vals[0].unwrap(), vals[1].unwrap()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthBound {
    pub c: f64,
    pub n: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    pub pass: bool,
    pub worst_ratio: f64,
    /// `(x, u, v)` of the worst sample.
    pub witness: Vec<f64>,
}

/// Axis-aligned closed box in packed `(x, u, v)` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxK {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxK {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, SpecError> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(SpecError::Compact("lo/hi length mismatch".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(SpecError::Compact("empty box (lo > hi)".into()));
        }
        Ok(BoxK { lo, hi })
    }

    pub fn unit(dim: usize) -> Self {
        BoxK {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    pub fn dilated(&self, factor: f64) -> BoxK {
        let c = self.center();
        let lo = self
            .lo
            .iter()
            .zip(&c)
            .map(|(a, m)| m + factor * (a - m))
            .collect();
        let hi = self
            .hi
            .iter()
            .zip(&c)
            .map(|(b, m)| m + factor * (b - m))
            .collect();
        BoxK { lo, hi }
    }

    pub fn sample<R: Rng>(&self, r: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| if a == b { a } else { r.gen_range(a..=b) })
            .collect()
    }

    /// Largest Euclidean norm over the coordinate range `[from, to)`.
    pub fn max_norm(&self, from: usize, to: usize) -> f64 {
        (from..to)
            .map(|i| self.lo[i].abs().max(self.hi[i].abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Tensor grid with `points` nodes per non-degenerate axis.
    pub fn grid(&self, points: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| {
                if a == b || points <= 1 {
                    vec![if points <= 1 { 0.5 * (a + b) } else { a }]
                } else {
                    (0..points)
                        .map(|i| a + (b - a) * i as f64 / (points - 1) as f64)
                        .collect()
                }
            })
            .collect();
        let mut out = vec![Vec::new()];
        for axis in &axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&c| {
                        let mut p = prefix.clone();
                        p.push(c);
                        p
                    })
                })
                .collect();
        }
        out
    }
}

/// The compact `K` (graph over `B_K`) with the cutoff radius `R`, the
/// `v`-bound `R'` and the fixed slice `v0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactSpec {
    pub bx: BoxK,
    pub d: usize,
    pub radius: f64,
    pub v_bound: f64,
    pub v0: Vec<f64>,
}

impl CompactSpec {
    /// `max over B_K of |x| + |u|`.
    pub fn max_xu(&self) -> f64 {
        max_xu(&self.bx, self.d)
    }

    pub fn max_v(&self) -> f64 {
        let m = (self.bx.dim() - self.d) / 2;
        self.bx.max_norm(self.d + m, self.d + 2 * m)
    }

    /// Same `K`, `R'` and `v0` but an explicit cutoff radius.
    pub fn with_radius(&self, radius: f64) -> Result<CompactSpec, SpecError> {
        if radius < self.max_xu() {
            return Err(SpecError::Compact(format!(
                "radius {radius} does not cover max |x|+|u| = {}",
                self.max_xu()
            )));
        }
        Ok(CompactSpec {
            radius,
            ..self.clone()
        })
    }

    /// Membership in `K' = M ∩ [{|x|+|u| <= R+1} × {|v| < R'}]`.
    pub fn in_k_prime(&self, xuv: &[f64]) -> bool {
        let m = (xuv.len() - self.d) / 2;
        let x = &xuv[..self.d];
        let u = &xuv[self.d..self.d + m];
        let v = &xuv[self.d + m..];
        norm(x) + norm(u) <= self.radius + 1.0 && norm(v) < self.v_bound
    }

    pub fn grid(&self, points: usize) -> Vec<Vec<f64>> {
        self.bx.grid(points)
    }
}

fn max_xu(bx: &BoxK, d: usize) -> f64 {
    let m = (bx.dim() - d) / 2;
    bx.max_norm(0, d) + bx.max_norm(d, d + m)
}

/// `R = ceil(max|x|+|u| + safety * diam + 1)`, `R' = max|v| + 1`,
/// `v0` = centroid of the `v`-projection.
pub fn build_compact_spec(
    graph: &ModelGraph,
    bx: &BoxK,
    safety: f64,
) -> Result<CompactSpec, SpecError> {
    let (d, m) = (graph.d(), graph.m());
    if bx.dim() != d + 2 * m {
        return Err(SpecError::Compact(format!(
            "box has {} coordinates, expected {}",
            bx.dim(),
            d + 2 * m
        )));
    }
    if !(safety >= 1.0) {
        return Err(SpecError::Compact(format!("safety {safety} < 1")));
    }
    BoxK::new(bx.lo.clone(), bx.hi.clone())?;
    let radius = (max_xu(bx, d) + safety * bx.diameter() + 1.0).ceil();
    let v_bound = bx.max_norm(d + m, d + 2 * m) + 1.0;
    let v0 = bx.center()[d + m..].to_vec();
    Ok(CompactSpec {
        bx: bx.clone(),
        d,
        radius,
        v_bound,
        v0,
    })
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn concat3(x: &[f64], u: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len() + u.len() + v.len());
    out.extend_from_slice(x);
    out.extend_from_slice(u);
    out.extend_from_slice(v);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const RIGID: &str = "n=2 d=1; h1 = u1^2 + v1^2";
    const CODIM2: &str = "n=3 d=2; h1 = u1^2; h2 = x1*u1 + v1^2";

    #[test]
    fn parses_shipped_examples() {
        let g = parse_graph_spec(RIGID).unwrap();
        assert_eq!((g.n(), g.d()), (2, 1));
        assert!(g.is_rigid());
        let g = parse_graph_spec(CODIM2).unwrap();
        assert_eq!((g.n(), g.d(), g.m()), (3, 2, 1));
        assert!(!g.is_rigid());
    }

    #[test]
    fn rejects_coupled_h() {
        let err = parse_graph_spec("n=2 d=1; h1 = x1^2").unwrap_err();
        assert_eq!(err, SpecError::Decoupling { j: 1, k: 1 });
        assert_eq!(err.to_string(), "decoupling violation: h1 uses x1");
        let err = parse_graph_spec("n=3 d=2; h1 = u1; h2 = x2*u1").unwrap_err();
        assert_eq!(err, SpecError::Decoupling { j: 2, k: 2 });
    }

    #[test]
    fn rejects_bad_dimensions_and_exp() {
        assert!(matches!(
            parse_graph_spec("n=2 d=2; h1 = u1; h2 = u1"),
            Err(SpecError::Dimension(_))
        ));
        assert!(matches!(
            parse_graph_spec("n=2 d=1; h1 = u2"),
            Err(SpecError::Syntax(_))
        ));
        assert!(parse_graph_spec("n=2 d=1; h1 = exp(u1)").is_err());
        assert!(matches!(
            parse_graph_spec("n=3 d=2; h1 = u1"),
            Err(SpecError::Dimension(_))
        ));
        assert!(matches!(
            parse_graph_spec("n=2 d=1; h1 = u1 +"),
            Err(SpecError::Syntax(SyntaxError { pos: 18, .. }))
        ));
    }

    #[test]
    fn eval_h_examples() {
        let flat = ModelGraph::flat(2, 1).unwrap();
        assert_eq!(flat.eval_h(&[3.0], &[1.0], &[2.0]), vec![0.0]);
        let g = parse_graph_spec(RIGID).unwrap();
        assert_eq!(g.eval_h(&[0.0], &[1.0], &[2.0]), vec![5.0]);
        let g = parse_graph_spec(CODIM2).unwrap();
        assert_eq!(g.eval_h(&[2.0, 0.0], &[3.0], &[1.0])[1], 7.0);
    }

    #[test]
    fn eval_dh_examples() {
        let flat = ModelGraph::flat(3, 2).unwrap();
        assert_eq!(flat.eval_dh(&[1.0, 2.0], &[3.0], &[4.0]).norm(), 0.0);
        let g = parse_graph_spec(RIGID).unwrap();
        let dh = g.eval_dh(&[0.3], &[1.0], &[2.0]);
        assert_eq!(dh.shape(), (1, 3));
        assert_eq!(dh.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 2.0, 4.0]);
    }

    #[test]
    fn slice_point_examples() {
        let flat = ModelGraph::flat(2, 1).unwrap();
        let (z, w) = flat.slice_point(&[0.7], &[1.0], &[2.0]);
        assert_eq!(z, vec![Complex64::new(1.0, 0.0)]);
        assert_eq!(w, vec![Complex64::new(2.0, 0.7)]);
        let g = parse_graph_spec(RIGID).unwrap();
        let (z, w) = g.slice_point(&[0.0], &[1.0], &[2.0]);
        assert_eq!(z, vec![Complex64::new(1.0, 4.0)]);
        assert_eq!(w, vec![Complex64::new(2.0, 0.0)]);
    }

    #[test]
    fn growth_certificate_examples() {
        let bx = BoxK::unit(3);
        let flat = ModelGraph::flat(2, 1).unwrap();
        let r = flat.growth_certificate(&bx, GrowthBound { c: 1.0, n: 3 }, 200, 1);
        assert!(r.pass);
        assert_eq!(r.worst_ratio, 0.0);
        let g = parse_graph_spec(RIGID).unwrap();
        let r = g.growth_certificate(&bx, GrowthBound { c: 2.0, n: 1 }, 500, 1);
        assert!(r.pass, "{r:?}");
        let r = g.growth_certificate(&bx, GrowthBound { c: 0.1, n: 0 }, 500, 1);
        assert!(!r.pass && r.worst_ratio > 1.0);
    }

    #[test]
    fn compact_spec_examples() {
        let flat = ModelGraph::flat(2, 1).unwrap();
        let single = BoxK::new(vec![0.0; 3], vec![0.0; 3]).unwrap();
        let k = build_compact_spec(&flat, &single, 1.0).unwrap();
        assert_eq!((k.radius, k.v_bound, k.v0.clone()), (1.0, 1.0, vec![0.0]));

        // max|x|+|u| = 2, diam = 2*sqrt(3): 2 + 3.464.. + 1 rounds up to 7
        let cube = BoxK::new(vec![-1.0; 3], vec![1.0; 3]).unwrap();
        let k = build_compact_spec(&flat, &cube, 1.0).unwrap();
        assert_eq!(k.radius, 7.0);
        assert_eq!(k.v0, vec![0.0]);
        assert_eq!(k.v_bound, 2.0);

        let mut last = 0.0;
        for safety in [1.0, 1.5, 2.0, 5.0, 10.0] {
            let r = build_compact_spec(&flat, &cube, safety).unwrap().radius;
            assert!(r >= last);
            last = r;
        }
        assert!(BoxK::new(vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]).is_err());
        assert!(build_compact_spec(&flat, &cube, 0.5).is_err());
    }

    #[test]
    fn k_prime_contains_k() {
        let g = parse_graph_spec(CODIM2).unwrap();
        let k = build_compact_spec(&g, &BoxK::unit(4), 10.0).unwrap();
        assert!(k.grid(3).iter().all(|p| k.in_k_prime(p)));
        assert!(k.max_xu() <= k.radius);
        assert!(k.v_bound > k.max_v());
        assert!(!k.in_k_prime(&[k.radius + 1.5, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn display_round_trips() {
        let g = parse_graph_spec("n=3 d=2; h1 = 1/3*u1^2 - 0.25; h2 = x1*sin(u1) + v1^2").unwrap();
        let back = parse_graph_spec(&g.to_string()).unwrap();
        let p = [0.3, -0.2, 1.7, 0.4];
        assert_eq!(
            g.eval_h(&p[..2], &p[2..3], &p[3..]),
            back.eval_h(&p[..2], &p[2..3], &p[3..])
        );
    }
}
