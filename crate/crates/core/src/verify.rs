//! Convergence and slice-fixing experiments, plus the structural suite.
//!
//! Experiments evaluate `F_ε` and `G_ε` on a tensor grid over `B_K` for every
//! `ε` of a schedule. Cells `(ε, point)` run in parallel; results are
//! collected in input order so tables do not depend on the thread count.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph_model::{CompactSpec, ModelGraph};
use crate::kernel::{
    check_c1_invariance, check_lemma1_margin, unit_pullback_det, young_constant, KernelParams,
    ScaledKernel,
};
use crate::quadrature::{graph_point, Evaluator, QuadConfig, QuadError, TestFunction};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("epsilon schedule must be nonempty, positive and strictly decreasing: {0:?}")]
    Schedule(Vec<f64>),
    #[error("evaluation grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Quad(#[from] QuadError),
}

/// One `ε` row. `gap_log10` is `log10 sup_K |F_ε − G_ε|`, kept in log form
/// because the gap can leave the `f64` range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub eps: f64,
    pub err_g: f64,
    pub err_f: f64,
    pub gap_log10: f64,
    pub flags: usize,
}

impl ErrorRow {
    pub fn gap(&self) -> f64 {
        10f64.powf(self.gap_log10)
    }

    pub fn gap_over_eps_log10(&self) -> f64 {
        self.gap_log10 - self.eps.log10()
    }

    pub fn gap_over_eps(&self) -> f64 {
        10f64.powf(self.gap_over_eps_log10())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    /// Source of the test function.
    pub function: String,
    /// `sup_K |f|` on the grid.
    pub sup_f: f64,
    pub rows: Vec<ErrorRow>,
}

pub const CSV_HEADER: &str = "eps,err_G,err_F,gap,gap_over_eps,flags";

impl ErrorTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{}",
                r.eps,
                r.err_g,
                r.err_f,
                r.gap(),
                r.gap_over_eps(),
                r.flags
            );
        }
        out
    }

    /// F-error strictly decreasing and final F-error `<= final_rel·(1 + sup|f|)`.
    pub fn convergence_verdict(&self, final_rel: f64) -> Verdict {
        let errs: Vec<f64> = self.rows.iter().map(|r| r.err_f).collect();
        let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
        let last = *errs.last().unwrap_or(&f64::NAN);
        let bound = final_rel * (1.0 + self.sup_f);
        let worst = last / bound;
        let pass = decreasing && worst <= 1.0;
        let witness = if !decreasing {
            format!("F-errors not strictly decreasing: {errs:?}")
        } else {
            format!("final err_F = {last:e}, bound = {bound:e}")
        };
        Verdict {
            item: format!("convergence[{}]", self.function),
            pass,
            worst,
            witness,
        }
    }

    /// `gap/ε` non-increasing along the schedule and never above
    /// `slack` times its value at the largest `ε`. Compared in log10 form.
    pub fn gap_verdict(&self, slack: f64) -> Verdict {
        let ratios: Vec<f64> = self.rows.iter().map(|r| r.gap_over_eps_log10()).collect();
        let first = ratios.first().copied().unwrap_or(f64::NEG_INFINITY);
        let cap = first + slack.log10();
        let mut pass = true;
        let mut witness = format!("log10(gap/eps) = {ratios:?}");
        for (i, w) in ratios.windows(2).enumerate() {
            if !(le_log(w[1], w[0]) && le_log(w[1], cap)) {
                pass = false;
                witness = format!(
                    "log10(gap/eps) rises at eps = {}: {} -> {}",
                    self.rows[i + 1].eps,
                    w[0],
                    w[1]
                );
                break;
            }
        }
        if ratios.iter().any(|r| r.is_nan()) {
            pass = false;
        }
        let worst = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Verdict {
            item: format!("stokes_gap[{}]", self.function),
            pass,
            worst,
            witness,
        }
    }
}

/// `a <= b` with `-inf <= -inf`.
fn le_log(a: f64, b: f64) -> bool {
    a == f64::NEG_INFINITY || a <= b
}

/// One line of a verdict block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub item: String,
    pub pass: bool,
    pub worst: f64,
    pub witness: String,
}

fn check_schedule(schedule: &[f64]) -> Result<(), VerifyError> {
    let ok = !schedule.is_empty()
        && schedule.iter().all(|&e| e > 0.0 && e.is_finite())
        && schedule.windows(2).all(|w| w[1] < w[0]);
    if ok {
        Ok(())
    } else {
        Err(VerifyError::Schedule(schedule.to_vec()))
    }
}

/// Per-cell results for every function.
struct Cell {
    err_g: Vec<f64>,
    err_f: Vec<f64>,
    gap_log10: Vec<f64>,
    flags: Vec<usize>,
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// Fills every column of one table per test function.
#[allow(clippy::too_many_arguments)]
pub fn run_tables(
    graph: &ModelGraph,
    params: &KernelParams,
    k: &CompactSpec,
    fns: &[TestFunction],
    schedule: &[f64],
    cfg: &QuadConfig,
    grid: &[Vec<f64>],
) -> Result<Vec<ErrorTable>, VerifyError> {
    check_schedule(schedule)?;
    if grid.is_empty() {
        return Err(VerifyError::EmptyGrid);
    }
    let ev = Evaluator::new(graph, params, cfg, k, fns)?;
    let nf = fns.len();
    let cells: Vec<(usize, usize)> = (0..schedule.len())
        .flat_map(|i| (0..grid.len()).map(move |j| (i, j)))
        .collect();
    let results: Vec<Cell> = cells
        .par_iter()
        .map(|&(i, j)| {
            let (z, w) = graph_point(graph, &grid[j]);
            match ev.f(schedule[i], &z, &w) {
                Ok(out) => {
                    let mut cell = Cell {
                        err_g: Vec::with_capacity(nf),
                        err_f: Vec::with_capacity(nf),
                        gap_log10: out.gap_log10.clone(),
                        flags: Vec::with_capacity(nf),
                    };
                    for (q, f) in fns.iter().enumerate() {
                        let fv = f.eval(&z, &w);
                        cell.err_g.push(abs_err(out.g[q].value, fv));
                        cell.err_f.push(abs_err(out.f[q].value, fv));
                        cell.flags.push((out.g[q].flagged || out.f[q].flagged) as usize);
                    }
                    cell
                }
                // a failed cell poisons its row, not the table
                Err(_) => Cell {
                    err_g: vec![f64::INFINITY; nf],
                    err_f: vec![f64::INFINITY; nf],
                    gap_log10: vec![f64::INFINITY; nf],
                    flags: vec![1; nf],
                },
            }
        })
        .collect();

    let mut tables: Vec<ErrorTable> = fns
        .iter()
        .map(|f| ErrorTable {
            function: f.source().to_string(),
            sup_f: grid
                .iter()
                .map(|p| f.eval_on_graph(graph, p).norm())
                .fold(0.0, nan_max),
            rows: Vec::with_capacity(schedule.len()),
        })
        .collect();
    for (i, &eps) in schedule.iter().enumerate() {
        let row_cells = &results[i * grid.len()..(i + 1) * grid.len()];
        for (q, t) in tables.iter_mut().enumerate() {
            let mut row = ErrorRow {
                eps,
                err_g: 0.0,
                err_f: 0.0,
                gap_log10: f64::NEG_INFINITY,
                flags: 0,
            };
            for c in row_cells {
                row.err_g = nan_max(row.err_g, c.err_g[q]);
                row.err_f = nan_max(row.err_f, c.err_f[q]);
                row.gap_log10 = nan_max(row.gap_log10, c.gap_log10[q]);
                row.flags += c.flags[q];
            }
            t.rows.push(row);
        }
    }
    Ok(tables)
}

/// Overflowed or non-finite approximations count as infinite error.
fn abs_err(approx: Complex64, exact: Complex64) -> f64 {
    let e = (approx - exact).norm();
    if e.is_nan() {
        f64::INFINITY
    } else {
        e
    }
}

/// G- and F-error columns of [`run_tables`] on a `points`-per-axis grid.
#[allow(clippy::too_many_arguments)]
pub fn convergence_experiment(
    graph: &ModelGraph,
    params: &KernelParams,
    k: &CompactSpec,
    fns: &[TestFunction],
    schedule: &[f64],
    cfg: &QuadConfig,
    points: usize,
) -> Result<Vec<ErrorTable>, VerifyError> {
    run_tables(graph, params, k, fns, schedule, cfg, &k.grid(points))
}

/// Gap columns. When `K` has no `v`-extent every point sits on the `v0`
/// slice, `F = G` and all gaps are zero.
#[allow(clippy::too_many_arguments)]
pub fn stokes_gap_experiment(
    graph: &ModelGraph,
    params: &KernelParams,
    k: &CompactSpec,
    fns: &[TestFunction],
    schedule: &[f64],
    cfg: &QuadConfig,
    points: usize,
) -> Result<Vec<ErrorTable>, VerifyError> {
    run_tables(graph, params, k, fns, schedule, cfg, &k.grid(points))
}

/// The negative-control compact set: same `K` with `R = max(|x|+|u|) + 1`.
pub fn small_radius(k: &CompactSpec) -> CompactSpec {
    k.with_radius(k.max_xu() + 1.0)
        .expect("max|x|+|u| + 1 covers max|x|+|u|")
}

/// For every `ε`, the small-`R` ratio `gap/ε` is strictly larger than the
/// reference one.
pub fn control_verdict(reference: &ErrorTable, control: &ErrorTable) -> Verdict {
    let mut pass = reference.rows.len() == control.rows.len();
    let mut worst = f64::INFINITY;
    let mut witness = String::from("small-R ratio exceeds reference at every eps");
    for (r, c) in reference.rows.iter().zip(&control.rows) {
        let (a, b) = (r.gap_over_eps_log10(), c.gap_over_eps_log10());
        let margin = b - a;
        if !(margin > 0.0) && pass {
            pass = false;
            witness = format!("eps = {}: log10 ratio small-R {b} vs reference {a}", r.eps);
        }
        if margin.is_nan() {
            worst = f64::NAN;
        } else if !worst.is_nan() {
            worst = worst.min(margin);
        }
    }
    Verdict {
        item: format!("small_radius_control[{}]", reference.function),
        pass,
        worst,
        witness,
    }
}

/// Finite-difference Cauchy–Riemann residual of `F_ε` at `(z, w)`: for each
/// complex coordinate, the `N`-point circle mean
/// `|(1/N) Σ F(p + r e^{iθ_k} e_j) e^{iθ_k}| / r`, which equals `|∂F/∂z̄_j|`
/// up to `O(r^{N-1})` and vanishes for holomorphic `F`. Returned relative to
/// `max(1, |F|)` on the circles; the maximum over coordinates and functions.
pub fn cr_residual(ev: &Evaluator, eps: f64, z: &[Complex64], w: &[Complex64], r: f64, nodes: usize) -> Result<f64, QuadError> {
    let (d, n) = (z.len(), z.len() + w.len());
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let mut acc: Vec<Complex64> = Vec::new();
        let mut scale: f64 = 1.0;
        for k in 0..nodes {
            let phase = Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / nodes as f64);
            let (mut zz, mut ww) = (z.to_vec(), w.to_vec());
            if j < d {
                zz[j] += r * phase;
            } else {
                ww[j - d] += r * phase;
            }
            let out = ev.f(eps, &zz, &ww)?;
            if acc.is_empty() {
                acc = vec![Complex64::new(0.0, 0.0); out.f.len()];
            }
            for (a, v) in acc.iter_mut().zip(&out.f) {
                *a += v.value * phase;
                scale = nan_max(scale, v.value.norm());
            }
        }
        for a in &acc {
            let res = a.norm() / (nodes as f64 * r) / scale;
            worst = nan_max(worst, if res.is_nan() { f64::NAN } else { res });
        }
    }
    Ok(worst)
}

/// Worst [`cr_residual`] over `points` random off-manifold points: `(x, u, v)`
/// uniform in `B_K` and `Im z` displaced from `h` by up to `±ε`. Much farther
/// out, `F` is a sum that cancels like `exp(-(Im z - h)²/ε²)` and double
/// precision cannot resolve it.
#[allow(clippy::too_many_arguments)]
pub fn holomorphy_check(
    graph: &ModelGraph,
    params: &KernelParams,
    k: &CompactSpec,
    fns: &[TestFunction],
    eps: f64,
    cfg: &QuadConfig,
    points: usize,
    seed: u64,
    tol: f64,
) -> Result<Verdict, VerifyError> {
    let ev = Evaluator::new(graph, params, cfg, k, fns)?;
    let pts: Vec<(Vec<Complex64>, Vec<Complex64>)> = (0..points as u64)
        .map(|i| {
            let mut r = rng::stream(seed ^ 0x686f_6c6f, i);
            let p = k.bx.sample(&mut r);
            let (mut z, w) = graph_point(graph, &p);
            for c in z.iter_mut() {
                c.im += eps * r.gen_range(-1.0..1.0);
            }
            (z, w)
        })
        .collect();
    let res: Vec<Result<f64, QuadError>> = pts
        .par_iter()
        .map(|(z, w)| cr_residual(&ev, eps, z, w, 0.02, 8))
        .collect();
    let mut worst: f64 = 0.0;
    let mut wit = String::new();
    for (r, (z, w)) in res.into_iter().zip(&pts) {
        let r = r?;
        if r.is_nan() || r > worst || wit.is_empty() {
            worst = nan_max(worst, r);
            wit = format!("z = {z:?}, w = {w:?}");
        }
    }
    Ok(Verdict {
        item: "holomorphy".into(),
        pass: worst <= tol,
        worst,
        witness: wit,
    })
}

/// Tolerances of the structural suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteOptions {
    pub points: usize,
    pub shears: usize,
    pub audit_samples: usize,
    pub decoupling_tol: f64,
    pub jacobian_tol: f64,
    pub scaling_tol: f64,
    pub young_tol: f64,
    pub c1_tol: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            points: 100,
            shears: 5,
            audit_samples: 10_000,
            decoupling_tol: 1e-9,
            jacobian_tol: 1e-8,
            scaling_tol: 1e-12,
            young_tol: 1e-9,
            c1_tol: 1e-6,
        }
    }
}

/// Runs every structural item; failures are entries, never errors.
pub fn structural_suite(
    graph: &ModelGraph,
    k: &CompactSpec,
    params: &KernelParams,
    seed: u64,
    opts: &SuiteOptions,
) -> Vec<Verdict> {
    let pts = sample_points(k, opts.points, seed);
    vec![
        decoupling_item(graph, &pts, opts.decoupling_tol),
        jacobian_item(graph, &pts, opts.jacobian_tol),
        scaling_item(params, graph, &pts, opts.scaling_tol),
        young_item(params, opts.young_tol),
        c1_item(params, seed, opts),
        det_item(params, seed, opts.shears),
        lemma_item(params, graph, k, seed, opts.audit_samples),
        k_prime_item(k),
    ]
}

/// Points of `B_K` dilated by 2 about its centre, so derivatives are also
/// probed outside `K`.
fn sample_points(k: &CompactSpec, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let bx = k.bx.dilated(2.0);
    (0..n.max(1) as u64)
        .map(|i| bx.sample(&mut rng::stream(seed ^ 0x7375_6974_65, i)))
        .collect()
}

fn verdict(item: &str, pass: bool, worst: f64, witness: String) -> Verdict {
    Verdict {
        item: item.to_string(),
        pass,
        worst,
        witness,
    }
}

/// Worst-so-far tracker where NaN is worst.
fn track(worst: &mut f64, wit: &mut Vec<f64>, value: f64, at: &[f64]) {
    if value.is_nan() || (!worst.is_nan() && value > *worst) {
        *worst = if value.is_nan() { f64::NAN } else { value };
        *wit = at.to_vec();
    }
}

/// Central differences of `h_j` in `x_k` for `k >= j`.
fn decoupling_item(graph: &ModelGraph, pts: &[Vec<f64>], tol: f64) -> Verdict {
    let d = graph.d();
    let step = 1e-5;
    let mut worst = 0.0;
    let mut wit = Vec::new();
    let mut yp = vec![0.0; d];
    let mut ym = vec![0.0; d];
    for p in pts {
        for kx in 0..d {
            let mut a = p.clone();
            let mut b = p.clone();
            a[kx] += step;
            b[kx] -= step;
            graph.eval_h_packed(&a, &mut yp);
            graph.eval_h_packed(&b, &mut ym);
            for j in 0..=kx {
                let r = ((yp[j] - ym[j]) / (2.0 * step)).abs();
                track(&mut worst, &mut wit, r, p);
            }
        }
    }
    verdict("decoupling", worst < tol, worst, format!("(x,u,v) = {wit:?}"))
}

/// `|det ∂(ζ, η)/∂(s, t) − 1|` by central differences of the slice map.
fn jacobian_item(graph: &ModelGraph, pts: &[Vec<f64>], tol: f64) -> Verdict {
    let (d, m, n) = (graph.d(), graph.m(), graph.n());
    let step = 1e-6;
    let mut worst = 0.0;
    let mut wit = Vec::new();
    for p in pts {
        let v = &p[n..];
        let mut jac = DMatrix::<Complex64>::zeros(n, n);
        for c in 0..n {
            let mut a = p[..n].to_vec();
            let mut b = a.clone();
            a[c] += step;
            b[c] -= step;
            let (za, ea) = graph.slice_point(v, &a[..d], &a[d..]);
            let (zb, eb) = graph.slice_point(v, &b[..d], &b[d..]);
            for r in 0..d {
                jac[(r, c)] = (za[r] - zb[r]) / (2.0 * step);
            }
            for r in 0..m {
                jac[(d + r, c)] = (ea[r] - eb[r]) / (2.0 * step);
            }
        }
        let dev = (jac.determinant() - Complex64::new(1.0, 0.0)).norm();
        track(&mut worst, &mut wit, dev, p);
    }
    verdict("slice_jacobian", worst <= tol, worst, format!("(x,u,v) = {wit:?}"))
}

/// `ε² E_ε(ζ/ε, η/ε)` against `Ẽ(ζ, η)` at graph differences of the sample
/// points, relative to `|Ẽ|`.
fn scaling_item(params: &KernelParams, graph: &ModelGraph, pts: &[Vec<f64>], tol: f64) -> Verdict {
    let mut worst = 0.0;
    let mut wit = Vec::new();
    for pair in pts.windows(2) {
        let (z0, w0) = graph_point(graph, &pair[0]);
        let (z1, w1) = graph_point(graph, &pair[1]);
        let dz: Vec<Complex64> = z1.iter().zip(&z0).map(|(a, b)| a - b).collect();
        let dw: Vec<Complex64> = w1.iter().zip(&w0).map(|(a, b)| a - b).collect();
        let exact = params.tilde_e(&dz, &dw);
        for eps in [0.4, 0.2, 0.1, 0.05] {
            let kern = ScaledKernel::new(params, eps);
            let zs: Vec<Complex64> = dz.iter().map(|c| c / eps).collect();
            let ws: Vec<Complex64> = dw.iter().map(|c| c / eps).collect();
            let scaled = kern.eval(&zs, &ws) * (eps * eps);
            let rel = (scaled - exact).norm() / exact.norm().max(f64::MIN_POSITIVE);
            track(&mut worst, &mut wit, rel, &pair[1]);
        }
    }
    verdict("scaling_identity", worst <= tol, worst, format!("(x,u,v) = {wit:?}"))
}

/// Grid-search sup of `a − δ a^p` (the `b = 1` section, by homogeneity)
/// against the closed form, for `δ = 1/2` and every exponent in the kernel.
fn young_item(params: &KernelParams, tol: f64) -> Verdict {
    let mut exps: Vec<f64> = vec![2.0];
    exps.extend(params.p.iter().map(|&p| p as f64));
    exps.push(params.q as f64);
    exps.sort_by(f64::total_cmp);
    exps.dedup();
    let delta = 0.5;
    let mut worst: f64 = 0.0;
    let mut pass = true;
    let mut wit = String::new();
    for &p in &exps {
        let q = p / (p - 1.0);
        let l = young_constant(p, q, delta).expect("conjugate exponents, delta > 0");
        let peak = (1.0 / (delta * p)).powf(1.0 / (p - 1.0));
        let mut sup = f64::NEG_INFINITY;
        let steps = 200_000;
        for i in 0..=steps {
            let a = peak * 10f64.powf(-3.0 + 6.0 * i as f64 / steps as f64);
            sup = sup.max(a - delta * a.powf(p));
        }
        let ratio = sup / l;
        // above: violates the bound; well below: the bound is not sharp
        let dev = (ratio - 1.0).abs();
        if ratio > 1.0 + tol || ratio < 1.0 - 1e-6 {
            pass = false;
        }
        if dev > worst || wit.is_empty() {
            worst = worst.max(dev);
            wit = format!("p = {p}: grid sup {sup:e}, closed form {l:e}");
        }
    }
    verdict("young_sharpness", pass, worst, wit)
}

/// Random strictly lower-triangular `A` and dense `B`, entries in `[-4, 4]`.
fn random_shear(params: &KernelParams, seed: u64, i: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let (d, m) = (params.d, params.m());
    let mut r = rng::stream(seed ^ 0x7368_6561_72, i);
    let a = DMatrix::from_fn(d, d, |row, col| if col < row { r.gen_range(-4.0..4.0) } else { 0.0 });
    let b = DMatrix::from_fn(d, m, |_, _| r.gen_range(-4.0..4.0));
    (a, b)
}

fn c1_item(params: &KernelParams, seed: u64, opts: &SuiteOptions) -> Verdict {
    if params.lambda.contains(&0) || params.gamma == 0 {
        return verdict(
            "c1_invariance",
            true,
            0.0,
            "n/a: a zero quadratic coefficient makes C1 infinite".into(),
        );
    }
    let mut worst = 0.0;
    let mut wit = String::new();
    for i in 0..opts.shears as u64 {
        let (a, b) = random_shear(params, seed, i);
        let dev = match check_c1_invariance(params, &a, &b, opts.c1_tol) {
            Ok(dev) => dev,
            Err(_) => f64::INFINITY,
        };
        if dev.is_nan() || dev > worst || wit.is_empty() {
            worst = if dev.is_nan() { f64::NAN } else { dev.max(worst) };
            wit = format!("A = {:?}, B = {:?}", a.as_slice(), b.as_slice());
        }
    }
    verdict("c1_invariance", worst <= opts.c1_tol, worst, wit)
}

fn det_item(params: &KernelParams, seed: u64, shears: usize) -> Verdict {
    let mut pass = true;
    let mut worst = 0.0;
    let mut wit = String::from("all determinants exactly 1");
    for i in 0..shears as u64 {
        let (a, b) = random_shear(params, seed, i);
        let det = unit_pullback_det(params, &a, &b).unwrap_or(f64::NAN);
        if det != 1.0 {
            pass = false;
            worst = (det - 1.0).abs();
            wit = format!("det = {det} at A = {:?}, B = {:?}", a.as_slice(), b.as_slice());
            break;
        }
    }
    verdict("pullback_det", pass, worst, wit)
}

fn lemma_item(params: &KernelParams, graph: &ModelGraph, k: &CompactSpec, seed: u64, samples: usize) -> Verdict {
    let rep = check_lemma1_margin(params, graph, k, samples, seed, None);
    verdict(
        "lemma1_margin",
        rep.worst_margin <= 0.0,
        rep.worst_margin,
        rep.witness.to_string(),
    )
}

/// Every grid point of `K` lies in `K'`, where the test functions must be CR.
/// They are entire, so membership is the whole requirement.
fn k_prime_item(k: &CompactSpec) -> Verdict {
    let outside = k.grid(5).into_iter().find(|p| !k.in_k_prime(p));
    match outside {
        None => verdict("k_prime_domain", true, 0.0, "K grid inside K'".into()),
        Some(p) => verdict("k_prime_domain", false, 1.0, format!("(x,u,v) = {p:?}")),
    }
}
