//! Tensor Gauss–Legendre integration over one slice, in coordinates adapted
//! to the kernel peak.
//!
//! With `(s, t) = (Re z, Re w) + εξ`, the real part of the quadratic part of
//! `E_ε` is `ξᵀSξ - 2cᵀDJξ - cᵀDc - Γ|b|²` where `J = ∂h/∂(x,u)` at the
//! centre, `D = (Λ_1, .., Λ_{d-1}, 1)`, `c = (h(centre) - Im z)/ε` and
//! `b = (slice - Im w)/ε`. Writing `S = LLᵀ` and `ξ = ξ* + L^{-T}ρ` turns the
//! kernel magnitude into `exp(B - |ρ|²)`, so a box `|ρ_k| <= sqrt(L₀² + B)`
//! holds everything above `e^{-L₀²}` relative to unit mass.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use smallvec::SmallVec;

use super::cutoff::chi_radial;
use super::legendre::GaussLegendre;
use super::QuadConfig;
use crate::expr::Program;
use crate::graph_model::{norm, ModelGraph};
use crate::kernel::{KernelParams, ScaledKernel};

/// `mantissa * exp(log_scale)`; keeps tails that overflow `f64` comparable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub mantissa: Complex64,
    pub log_scale: f64,
}

impl Scaled {
    pub const ZERO: Scaled = Scaled {
        mantissa: Complex64::new(0.0, 0.0),
        log_scale: 0.0,
    };

    /// Natural log of the modulus; `-inf` for zero.
    pub fn ln_abs(&self) -> f64 {
        let a = self.mantissa.norm();
        if a == 0.0 {
            f64::NEG_INFINITY
        } else {
            a.ln() + self.log_scale
        }
    }

    pub fn to_complex(&self) -> Complex64 {
        let part = |c: f64| {
            if c == 0.0 {
                0.0
            } else {
                c.signum() * (c.abs().ln() + self.log_scale).exp()
            }
        };
        Complex64::new(part(self.mantissa.re), part(self.mantissa.im))
    }

    fn rescaled(&self, scale: f64) -> Complex64 {
        if self.mantissa == Complex64::new(0.0, 0.0) {
            return self.mantissa;
        }
        self.mantissa * (self.log_scale - scale).exp()
    }

    pub fn sub(&self, other: &Scaled) -> Scaled {
        let scale = self.log_scale.max(other.log_scale);
        Scaled {
            mantissa: self.rescaled(scale) - other.rescaled(scale),
            log_scale: scale,
        }
    }
}

/// One integral with its error estimate (as `ln` of an absolute error).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledResult {
    pub value: Scaled,
    pub ln_err: f64,
    pub flagged: bool,
}

impl ScaledResult {
    pub const ZERO: ScaledResult = ScaledResult {
        value: Scaled::ZERO,
        ln_err: f64::NEG_INFINITY,
        flagged: false,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    /// `χ_R`
    Cutoff,
    /// `1 - χ_R`
    Tail,
}

/// Everything fixed for one evaluation point.
pub struct Problem<'a> {
    pub graph: &'a ModelGraph,
    pub params: &'a KernelParams,
    pub kernel: &'a ScaledKernel,
    pub fns: &'a [Program],
    pub cfg: &'a QuadConfig,
    pub eps: f64,
    pub radius: f64,
    pub z: &'a [Complex64],
    pub w: &'a [Complex64],
}

struct Frame {
    centre: Vec<f64>,
    xi_star: Vec<f64>,
    basis: DMatrix<f64>,
    ln_det: f64,
    bonus: f64,
    degenerate: bool,
}

impl Frame {
    fn new(p: &Problem, slice: &[f64]) -> Frame {
        let (d, m, n) = (p.graph.d(), p.graph.m(), p.graph.n());
        let centre: Vec<f64> = p.z.iter().chain(p.w).map(|c| c.re).collect();
        let mut xuv = centre.clone();
        xuv.extend_from_slice(slice);
        let mut hc = vec![0.0; d];
        p.graph.eval_h_packed(&xuv, &mut hc);
        let dh = p.graph.eval_dh_packed(&xuv);
        let jac = dh.columns(0, n).into_owned();
        let dw = p.params.zeta_weights();
        let gamma = p.params.gamma as f64;
        let c = DVector::from_iterator(d, (0..d).map(|j| (hc[j] - p.z[j].im) / p.eps));
        let b2: f64 = (0..m).map(|j| ((slice[j] - p.w[j].im) / p.eps).powi(2)).sum();
        let dmat = DMatrix::from_diagonal(&DVector::from_vec(dw.clone()));
        let mut s = -(jac.transpose() * &dmat * &jac);
        for k in 0..n {
            s[(k, k)] += if k < d { dw[k] } else { gamma };
        }
        let base_bonus = c.dot(&(&dmat * &c)) + gamma * b2;
        match s.clone().cholesky() {
            Some(chol) if dw.iter().all(|&v| v > 0.0) => {
                let l = chol.l();
                let rhs = jac.transpose() * (&dmat * &c);
                let xi_star = chol.solve(&rhs);
                let bonus = base_bonus + xi_star.dot(&(&s * &xi_star));
                let lt = l.transpose();
                let basis = lt
                    .clone()
                    .try_inverse()
                    .unwrap_or_else(|| DMatrix::identity(n, n));
                let ln_det = -(0..n).map(|k| l[(k, k)].ln()).sum::<f64>();
                Frame {
                    centre,
                    xi_star: xi_star.iter().copied().collect(),
                    basis,
                    ln_det,
                    bonus,
                    degenerate: false,
                }
            }
            _ => Frame {
                centre,
                xi_star: vec![0.0; n],
                basis: DMatrix::identity(n, n),
                ln_det: 0.0,
                bonus: base_bonus,
                degenerate: true,
            },
        }
    }

    fn half_width(&self, cfg: &QuadConfig) -> f64 {
        let l0 = if self.degenerate {
            cfg.truncation + 3.5
        } else {
            cfg.truncation
        };
        (l0 * l0 + self.bonus.max(0.0)).sqrt()
    }

    fn to_st(&self, rho: &[f64], eps: f64, xi: &mut [f64], st: &mut [f64]) {
        let n = xi.len();
        for i in 0..n {
            let mut acc = self.xi_star[i];
            for k in 0..n {
                acc += self.basis[(i, k)] * rho[k];
            }
            xi[i] = acc;
            st[i] = self.centre[i] + eps * acc;
        }
    }
}

fn split_r(st: &[f64], d: usize) -> f64 {
    norm(&st[..d]) + norm(&st[d..])
}

/// Largest `|s| + |t|` over the box; `r` is convex and the box is a
/// parallelepiped, so the vertices suffice.
fn max_r_on_box(frame: &Frame, half: f64, eps: f64, d: usize) -> f64 {
    let n = frame.centre.len();
    let mut rho = vec![0.0; n];
    let mut xi = vec![0.0; n];
    let mut st = vec![0.0; n];
    let mut best: f64 = 0.0;
    for mask in 0..(1usize << n) {
        for k in 0..n {
            rho[k] = if mask >> k & 1 == 1 { half } else { -half };
        }
        frame.to_st(&rho, eps, &mut xi, &mut st);
        best = best.max(split_r(&st, d));
    }
    best
}

type Vals = SmallVec<[Complex64; 8]>;

struct LogAcc {
    scale: f64,
    sums: Vals,
    l1: SmallVec<[f64; 8]>,
}

impl LogAcc {
    fn new(k: usize) -> Self {
        LogAcc {
            scale: f64::NEG_INFINITY,
            sums: SmallVec::from_elem(Complex64::new(0.0, 0.0), k),
            l1: SmallVec::from_elem(0.0, k),
        }
    }

    #[inline]
    fn add(&mut self, ln_mag: f64, phase: Complex64, fvals: &[Complex64]) {
        if ln_mag > self.scale + 500.0 {
            let r = (self.scale - ln_mag).exp();
            for s in self.sums.iter_mut() {
                *s *= r;
            }
            for a in self.l1.iter_mut() {
                *a *= r;
            }
            self.scale = ln_mag;
        }
        let a = (ln_mag - self.scale).exp();
        let kern = phase * a;
        for ((s, l), f) in self.sums.iter_mut().zip(self.l1.iter_mut()).zip(fvals) {
            *s += kern * f;
            *l += a * f.norm();
        }
    }
}

/// Tensor rule of `order` points on `panels` panels per axis over `[-half, half]^n`.
fn tensor_sum(
    p: &Problem,
    frame: &Frame,
    slice: &[f64],
    weight: Weight,
    chi_needed: bool,
    half: f64,
    rule: &GaussLegendre,
    panels: usize,
) -> LogAcc {
    let (d, m, n) = (p.graph.d(), p.graph.m(), p.graph.n());
    let axis = rule.on_panels(-half, half, panels);
    let na = axis.len();
    let nf = p.fns.len();
    let mut acc = LogAcc::new(nf);
    let mut idx = vec![0usize; n];
    let mut rho = vec![0.0; n];
    let mut xi = vec![0.0; n];
    let mut xuv = vec![0.0; n + m];
    xuv[n..].copy_from_slice(slice);
    let mut hv = vec![0.0; d];
    let mut zeta_hat: SmallVec<[Complex64; 4]> = SmallVec::from_elem(Complex64::new(0.0, 0.0), d);
    let mut eta_hat: SmallVec<[Complex64; 4]> = SmallVec::from_elem(Complex64::new(0.0, 0.0), m);
    let mut slots: SmallVec<[Complex64; 8]> = SmallVec::from_elem(Complex64::new(0.0, 0.0), n);
    let mut fvals: Vals = SmallVec::from_elem(Complex64::new(0.0, 0.0), nf);
    let inv_eps = 1.0 / p.eps;
    let b_hat: SmallVec<[f64; 4]> = (0..m).map(|j| (slice[j] - p.w[j].im) * inv_eps).collect();
    'outer: loop {
        let mut wprod = 1.0;
        for k in 0..n {
            let (x, w) = axis[idx[k]];
            rho[k] = x;
            wprod *= w;
        }
        let (xs, rest) = xuv.split_at_mut(n);
        frame.to_st(&rho, p.eps, &mut xi, xs);
        let _ = rest;
        let cut = if chi_needed || weight == Weight::Tail {
            let c = chi_radial(p.radius, split_r(&xuv[..n], d));
            match weight {
                Weight::Cutoff => c,
                Weight::Tail => 1.0 - c,
            }
        } else {
            1.0
        };
        if cut > 0.0 {
            p.graph.eval_h_packed(&xuv, &mut hv);
            for j in 0..d {
                zeta_hat[j] = Complex64::new(xi[j], (hv[j] - p.z[j].im) * inv_eps);
                slots[j] = Complex64::new(xuv[j], hv[j]);
            }
            for j in 0..m {
                eta_hat[j] = Complex64::new(xi[d + j], b_hat[j]);
                slots[d + j] = Complex64::new(xuv[d + j], slice[j]);
            }
            let e = p.kernel.eval(&zeta_hat, &eta_hat);
            for (fv, prog) in fvals.iter_mut().zip(p.fns) {
                *fv = prog.eval(&slots);
            }
            let phase = Complex64::from_polar(1.0, -e.im);
            acc.add(-e.re + (wprod * cut).ln(), phase, &fvals);
        }
        // odometer
        let mut k = n;
        loop {
            if k == 0 {
                break 'outer;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < na {
                break;
            }
            idx[k] = 0;
        }
    }
    acc
}

/// `(1/C₁) ∫ weight · f(H^slice) · exp(-E_ε((H^slice - (z,w))/ε)) dξ` for every
/// `f` in the problem.
pub fn integrate(p: &Problem, slice: &[f64], weight: Weight) -> Vec<ScaledResult> {
    let (d, n) = (p.graph.d(), p.graph.n());
    let cfg = p.cfg;
    let nf = p.fns.len();
    let frame = Frame::new(p, slice);
    let half = frame.half_width(cfg);
    let r_max = max_r_on_box(&frame, half, p.eps, d);
    if weight == Weight::Tail && r_max <= p.radius {
        return vec![ScaledResult::ZERO; nf];
    }
    let chi_needed = r_max > p.radius;
    let ln_norm = frame.ln_det - p.params.normalizer_c1().ln();

    let panel_width = 2.0 * cfg.truncation / cfg.peak_panels as f64;
    let mut panels = ((2.0 * half / panel_width).ceil() as usize).max(cfg.peak_panels);
    let fits = |panels: usize, order: usize| {
        panels <= cfg.max_panels && ((panels * order) as f64).powi(n as i32) <= cfg.max_nodes as f64
    };
    if !fits(panels, cfg.order) {
        // under-resolved: one coarse pass for a magnitude-level value, on a
        // box that only just reaches the cutoff annulus where the tail peaks
        let order = 6.min(cfg.order);
        let pc = panels.min(cfg.peak_panels);
        let mut h = half;
        if weight == Weight::Tail {
            let stretch = frame.basis.norm() * p.eps * std::f64::consts::SQRT_2;
            let r0 = max_r_on_box(&frame, 0.0, p.eps, d);
            h = ((p.radius - r0).max(0.0) / stretch + 2.0 * cfg.truncation).min(half);
            while h < half && max_r_on_box(&frame, h, p.eps, d) <= p.radius + 2.0 * cfg.truncation * p.eps {
                h = (1.5 * h).min(half);
            }
        }
        let rule = GaussLegendre::new(order);
        let acc = tensor_sum(p, &frame, slice, weight, chi_needed, h, &rule, pc);
        return (0..nf)
            .map(|k| ScaledResult {
                value: Scaled {
                    mantissa: acc.sums[k],
                    log_scale: acc.scale + ln_norm,
                },
                ln_err: f64::INFINITY,
                flagged: true,
            })
            .collect();
    }
    let fine_rule = GaussLegendre::new(cfg.order);
    let coarse_rule = GaussLegendre::new(cfg.order - 2);
    loop {
        let fine = tensor_sum(p, &frame, slice, weight, chi_needed, half, &fine_rule, panels);
        let coarse = tensor_sum(p, &frame, slice, weight, chi_needed, half, &coarse_rule, panels);
        let scale = fine.scale.max(coarse.scale);
        if scale == f64::NEG_INFINITY {
            return vec![ScaledResult::ZERO; nf];
        }
        let rf = (fine.scale - scale).exp();
        let rc = (coarse.scale - scale).exp();
        // absolute target: tol relative to max(|value|, 1 in output units),
        // plus the rounding floor of summing terms of total size `mass`
        let unit = (-scale - ln_norm).exp();
        let mut all_ok = true;
        let out: Vec<ScaledResult> = (0..nf)
            .map(|k| {
                let vf = fine.sums[k] * rf;
                let err = (vf - coarse.sums[k] * rc).norm();
                let mass = fine.l1[k] * rf;
                let target = cfg.tol * vf.norm().max(unit);
                let floor = 64.0 * f64::EPSILON * mass;
                let converged = err <= target + floor;
                all_ok &= converged;
                ScaledResult {
                    value: Scaled {
                        mantissa: vf,
                        log_scale: scale + ln_norm,
                    },
                    ln_err: err.max(floor).ln() + scale + ln_norm,
                    flagged: !converged || floor > target || frame.degenerate,
                }
            })
            .collect();
        if all_ok || !fits(panels * 2, cfg.order) {
            return out;
        }
        panels *= 2;
    }
}
