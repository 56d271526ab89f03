//! The entire kernel
//! `Ẽ(ζ, η) = ζ_d² + Σ_{j<d} Λ_j (ζ_j² + ζ_j^{P_j}) + Γ Σ_j (η_j² + η_j^Q)`,
//! its ε-rescaling, the normalizing constant and the constant selection.

mod invariance;
mod lemma;

pub use invariance::{check_c1_invariance, unit_pullback_det};
pub use lemma::{
    check_lemma1_margin, eta_power_constant, select_constants, MarginReport, MarginWitness,
    SampleLaw, SelectionOptions, SelectionTrace, StageRecord,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("exponents are not conjugate: 1/{p} + 1/{q} != 1")]
    ConjugateExponents { p: f64, q: f64 },
    #[error("young constant needs delta > 0, got {0}")]
    NonPositiveDelta(f64),
    #[error("dimension mismatch: expected ({d}, {m}), got ({got_d}, {got_m})")]
    Dimension {
        d: usize,
        m: usize,
        got_d: usize,
        got_m: usize,
    },
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEps(f64),
    #[error("invalid kernel parameters: {0}")]
    InvalidParams(String),
    #[error("invalid change of variables: {0}")]
    InvalidShear(String),
    #[error("quadrature did not reach tolerance {tol:e} (estimate {estimate:e})")]
    Quadrature { tol: f64, estimate: f64 },
    #[error("selection budget exhausted: worst margin {worst_margin:e} at {witness}")]
    BudgetExhausted {
        worst_margin: f64,
        witness: MarginWitness,
    },
}

/// Outcome of the sampled kernel-estimate audit attached to a parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub samples: usize,
    pub seed: u64,
    pub worst_margin: f64,
}

/// Constants of the kernel. `lambda[j]` and `p[j]` belong to `ζ_{j+1}`,
/// `j < d-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub n: usize,
    pub d: usize,
    pub lambda: Vec<u64>,
    pub p: Vec<u64>,
    pub gamma: u64,
    pub q: u64,
    pub c_tilde: f64,
    pub audit: Option<AuditRecord>,
}

impl KernelParams {
    /// Validated constructor: all integer constants positive and even,
    /// `P_j >= 4`, `Q >= 2`.
    pub fn new(
        n: usize,
        d: usize,
        lambda: Vec<u64>,
        p: Vec<u64>,
        gamma: u64,
        q: u64,
        c_tilde: f64,
    ) -> Result<Self, KernelError> {
        let params = KernelParams {
            n,
            d,
            lambda,
            p,
            gamma,
            q,
            c_tilde,
            audit: None,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        let bad = |msg: String| Err(KernelError::InvalidParams(msg));
        if self.d == 0 || self.d > self.n {
            return bad(format!("n={} d={}", self.n, self.d));
        }
        if self.lambda.len() != self.d - 1 || self.p.len() != self.d - 1 {
            return bad(format!("need {} Λ and P entries", self.d - 1));
        }
        let even_pos = |v: u64| v > 0 && v % 2 == 0;
        if !self.lambda.iter().all(|&l| even_pos(l)) || !even_pos(self.gamma) {
            return bad("Λ and Γ must be positive even integers".into());
        }
        if !self.p.iter().all(|&p| p >= 4 && p % 2 == 0) {
            return bad("P_j must be even and >= 4".into());
        }
        if self.q < 2 || self.q % 2 != 0 {
            return bad("Q must be even and >= 2".into());
        }
        if !(self.c_tilde > 0.0) {
            return bad("C̃ must be positive".into());
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.n - self.d
    }

    fn check_dims(&self, zeta: &[Complex64], eta: &[Complex64]) -> Result<(), KernelError> {
        if zeta.len() != self.d || eta.len() != self.m() {
            return Err(KernelError::Dimension {
                d: self.d,
                m: self.m(),
                got_d: zeta.len(),
                got_m: eta.len(),
            });
        }
        Ok(())
    }

    /// `Ẽ(ζ, η)`.
    pub fn eval_tilde_e(&self, zeta: &[Complex64], eta: &[Complex64]) -> Result<Complex64, KernelError> {
        self.check_dims(zeta, eta)?;
        Ok(self.tilde_e(zeta, eta))
    }

    pub(crate) fn tilde_e(&self, zeta: &[Complex64], eta: &[Complex64]) -> Complex64 {
        let d = self.d;
        let mut acc = zeta[d - 1] * zeta[d - 1];
        for j in 0..d - 1 {
            let z = zeta[j];
            acc += self.lambda[j] as f64 * (z * z + z.powu(self.p[j] as u32));
        }
        let mut eta_sum = Complex64::new(0.0, 0.0);
        for &e in eta {
            eta_sum += e * e + e.powu(self.q as u32);
        }
        acc + self.gamma as f64 * eta_sum
    }

    /// `E_ε(ζ, η)`, evaluated through its expanded form
    /// `ζ_d² + Σ Λ_j (ζ_j² + ε^{P_j-2} ζ_j^{P_j}) + Γ Σ (η_j² + ε^{Q-2} η_j^Q)`.
    pub fn eval_e_eps(
        &self,
        eps: f64,
        zeta: &[Complex64],
        eta: &[Complex64],
    ) -> Result<Complex64, KernelError> {
        if !(eps > 0.0) {
            return Err(KernelError::NonPositiveEps(eps));
        }
        self.check_dims(zeta, eta)?;
        Ok(ScaledKernel::new(self, eps).eval(zeta, eta))
    }

    /// The quadratic limit `E₀ = ζ_d² + Σ Λ_j ζ_j² + Γ Σ η_j²`.
    pub fn eval_e0(&self, zeta: &[Complex64], eta: &[Complex64]) -> Result<Complex64, KernelError> {
        self.check_dims(zeta, eta)?;
        let w = self.zeta_weights();
        let mut acc: Complex64 = zeta.iter().zip(&w).map(|(z, c)| c * z * z).sum();
        acc += self.gamma as f64 * eta.iter().map(|e| e * e).sum::<Complex64>();
        Ok(acc)
    }

    /// Quadratic coefficients of the `ζ` block of `E₀`: `(Λ_1, .., Λ_{d-1}, 1)`.
    pub fn zeta_weights(&self) -> Vec<f64> {
        self.lambda
            .iter()
            .map(|&l| l as f64)
            .chain(std::iter::once(1.0))
            .collect()
    }

    /// `C₁ = ∫ exp(-E₀) = π^{n/2} Π Λ_j^{-1/2} Γ^{-(n-d)/2}` over real arguments.
    pub fn normalizer_c1(&self) -> f64 {
        let lam: f64 = self.lambda.iter().map(|&l| (l as f64).powf(-0.5)).product();
        std::f64::consts::PI.powf(self.n as f64 / 2.0)
            * lam
            * (self.gamma as f64).powf(-(self.m() as f64) / 2.0)
    }
}

/// `E_ε` with the ε-powers folded into the coefficients; used in the
/// quadrature inner loops.
#[derive(Debug, Clone)]
pub struct ScaledKernel {
    d: usize,
    lambda: Vec<f64>,
    lambda_hi: Vec<f64>,
    p: Vec<u32>,
    gamma: f64,
    gamma_hi: f64,
    q: u32,
}

impl ScaledKernel {
    pub fn new(params: &KernelParams, eps: f64) -> Self {
        ScaledKernel {
            d: params.d,
            lambda: params.lambda.iter().map(|&l| l as f64).collect(),
            lambda_hi: params
                .lambda
                .iter()
                .zip(&params.p)
                .map(|(&l, &p)| l as f64 * eps.powi(p as i32 - 2))
                .collect(),
            p: params.p.iter().map(|&p| p as u32).collect(),
            gamma: params.gamma as f64,
            gamma_hi: params.gamma as f64 * eps.powi(params.q as i32 - 2),
            q: params.q as u32,
        }
    }

    #[inline]
    pub fn eval(&self, zeta: &[Complex64], eta: &[Complex64]) -> Complex64 {
        let d = self.d;
        let mut acc = zeta[d - 1] * zeta[d - 1];
        for j in 0..d - 1 {
            let z = zeta[j];
            acc += self.lambda[j] * (z * z) + self.lambda_hi[j] * z.powu(self.p[j]);
        }
        for &e in eta {
            acc += self.gamma * (e * e) + self.gamma_hi * e.powu(self.q);
        }
        acc
    }
}

/// Sharp constant in `ab <= δ a^p + L_δ b^q`: `L_δ = (1/q) (δ p)^{-q/p}`.
pub fn young_constant(p: f64, q: f64, delta: f64) -> Result<f64, KernelError> {
    if !(p > 1.0 && q > 1.0) || (1.0 / p + 1.0 / q - 1.0).abs() > 1e-12 {
        return Err(KernelError::ConjugateExponents { p, q });
    }
    if !(delta > 0.0) {
        return Err(KernelError::NonPositiveDelta(delta));
    }
    Ok((delta * p).powf(-q / p) / q)
}

/// `C_K = 2^{max(N-1,0)} (1 + ρ^N)`, so that `1 + |s*|^N <= C_K (1 + |s-x|^N)`
/// whenever `|x| <= ρ` and `s*` lies on the segment `[x, s]`.
pub fn c_k_constant(n: u32, rho: f64) -> f64 {
    2f64.powi(n.saturating_sub(1) as i32) * (1.0 + rho.powi(n as i32))
}

/// Smallest even integer strictly greater than `x` (and at least 2).
pub(crate) fn even_above(x: f64) -> u64 {
    let mut k = (x.floor() as i64 + 1).max(2) as u64;
    if k % 2 == 1 {
        k += 1;
    }
    k
}

/// Smallest even integer `>= x` (and at least 2).
pub(crate) fn even_at_least(x: f64) -> u64 {
    let mut k = (x.ceil() as i64).max(2) as u64;
    if k % 2 == 1 {
        k += 1;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn codim2() -> KernelParams {
        KernelParams::new(3, 2, vec![12], vec![10], 120, 20, 1e3).unwrap()
    }

    #[test]
    fn young_special_case() {
        assert_eq!(young_constant(2.0, 2.0, 0.5).unwrap(), 0.5);
        assert!(young_constant(2.0, 3.0, 0.5).is_err());
        assert!(young_constant(2.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn young_decreases_in_delta() {
        let mut last = f64::INFINITY;
        for delta in [0.01, 0.1, 1.0, 10.0, 100.0, 1e4, 1e8] {
            let l = young_constant(3.0, 1.5, delta).unwrap();
            assert!(l < last);
            last = l;
        }
        assert!(last < 1e-4 * young_constant(3.0, 1.5, 0.01).unwrap());
    }

    #[test]
    fn young_grid_sup_below_closed_form() {
        // homogeneity: sup over a of (ab - δa^p)/b^q is independent of b,
        // so scan a log-grid of (a, b) pairs
        for &(p, delta) in &[(2.0, 0.5), (3.0, 0.2), (1.25, 2.0), (6.0, 0.01)] {
            let q = p / (p - 1.0);
            let l = young_constant(p, q, delta).unwrap();
            let mut sup = f64::NEG_INFINITY;
            for i in 0..500 {
                let a = 10f64.powf(-4.0 + 8.0 * i as f64 / 499.0);
                for k in 0..500 {
                    let b = 10f64.powf(-4.0 + 8.0 * k as f64 / 499.0);
                    sup = sup.max((a * b - delta * a.powf(p)) / b.powf(q));
                }
            }
            assert!(sup <= l * (1.0 + 1e-9), "p={p}: {sup} > {l}");
            assert!(sup > 0.9 * l);
        }
    }

    #[test]
    fn c_k_examples() {
        assert_eq!(c_k_constant(0, 3.0), 2.0);
        assert_eq!(c_k_constant(2, 1.0), 4.0);
        assert_eq!(c_k_constant(3, 0.0), 4.0);
    }

    #[test]
    fn c_k_bound_holds_on_samples() {
        let mut r = crate::rng::stream(11, 0);
        for &(n, rho) in &[(2u32, 1.0), (1, 2.0), (3, 0.5), (0, 4.0)] {
            let ck = c_k_constant(n, rho);
            for _ in 0..10_000 {
                let x: f64 = r.gen_range(-rho..=rho);
                let s: f64 = x + 20.0 * (r.gen::<f64>() - 0.5);
                let star = x + r.gen::<f64>() * (s - x);
                let lhs = 1.0 + star.abs().powi(n as i32);
                let rhs = ck * (1.0 + (s - x).abs().powi(n as i32));
                assert!(lhs <= rhs * (1.0 + 1e-12), "n={n} x={x} s={s}");
            }
        }
    }

    #[test]
    fn tilde_e_examples() {
        let p = KernelParams::new(2, 1, vec![], vec![], 2, 2, 1.0).unwrap();
        assert_eq!(p.eval_tilde_e(&[c(0.0, 0.0)], &[c(0.0, 0.0)]).unwrap(), c(0.0, 0.0));
        let (z, e) = (c(0.3, -1.2), c(0.7, 0.4));
        let got = p.eval_tilde_e(&[z], &[e]).unwrap();
        assert!((got - (z * z + 4.0 * e * e)).norm() < 1e-14);
        assert!(p.eval_tilde_e(&[z, z], &[e]).is_err());
    }

    #[test]
    fn tilde_e_nonnegative_on_reals() {
        let p = codim2();
        let mut r = crate::rng::stream(3, 0);
        for _ in 0..1000 {
            let z: Vec<_> = (0..2).map(|_| c(r.gen_range(-3.0..3.0), 0.0)).collect();
            let e = [c(r.gen_range(-3.0..3.0), 0.0)];
            let v = p.eval_tilde_e(&z, &e).unwrap();
            assert!(v.re >= 0.0 && v.im == 0.0);
        }
    }

    #[test]
    fn e_eps_scaling_identity() {
        let p = codim2();
        assert!(p.eval_e_eps(0.0, &[c(1.0, 0.0); 2], &[c(1.0, 0.0)]).is_err());
        let mut r = crate::rng::stream(5, 0);
        for eps in [1.0, 0.5, 0.1, 0.01] {
            for _ in 0..100 {
                let z: Vec<_> = (0..2).map(|_| c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))).collect();
                let e = vec![c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))];
                let exact = p.eval_tilde_e(&z, &e).unwrap();
                let zs: Vec<_> = z.iter().map(|v| v / eps).collect();
                let es: Vec<_> = e.iter().map(|v| v / eps).collect();
                let scaled = eps * eps * p.eval_e_eps(eps, &zs, &es).unwrap();
                assert!((scaled - exact).norm() <= 1e-12 * (1.0 + exact.norm()));
            }
        }
        let z = [c(0.2, 0.1), c(-0.4, 0.3)];
        let e = [c(0.5, -0.2)];
        let (one, exact) = (p.eval_e_eps(1.0, &z, &e).unwrap(), p.eval_tilde_e(&z, &e).unwrap());
        assert!((one - exact).norm() <= 1e-14 * exact.norm());
    }

    #[test]
    fn e_eps_tends_to_e0() {
        let p = codim2();
        let z = [c(0.8, 0.1), c(-0.4, 0.3)];
        let e = [c(0.9, -0.2)];
        let e0 = p.eval_e0(&z, &e).unwrap();
        let gap = |eps: f64| (p.eval_e_eps(eps, &z, &e).unwrap() - e0).norm();
        assert!(gap(0.1) < gap(0.5));
        assert!(gap(1e-3) < 1e-20);
    }

    #[test]
    fn normalizer_examples() {
        let p = KernelParams::new(1, 1, vec![], vec![], 2, 2, 1.0).unwrap();
        assert!((p.normalizer_c1() - std::f64::consts::PI.sqrt()).abs() < 1e-15);
        let p = KernelParams::new(2, 1, vec![], vec![], 4, 2, 1.0).unwrap();
        assert!((p.normalizer_c1() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let p16 = KernelParams::new(2, 1, vec![], vec![], 16, 2, 1.0).unwrap();
        assert!((p16.normalizer_c1() - p.normalizer_c1() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn normalizer_matches_2d_quadrature() {
        // ∫∫ exp(-s² - 4t²) on a truncated square, tensor Gauss-Legendre
        let rule = crate::quadrature::legendre::GaussLegendre::new(40);
        let mut total = 0.0;
        for (sn, sw) in rule.on_panels(-9.0, 9.0, 6) {
            for (tn, tw) in rule.on_panels(-5.0, 5.0, 6) {
                total += sw * tw * (-sn * sn - 4.0 * tn * tn).exp();
            }
        }
        let p = KernelParams::new(2, 1, vec![], vec![], 4, 2, 1.0).unwrap();
        assert!((total - p.normalizer_c1()).abs() < 1e-8);
    }

    #[test]
    fn raising_constants_never_decreases_real_e() {
        let base = codim2();
        let mut r = crate::rng::stream(9, 0);
        for _ in 0..500 {
            let z: Vec<_> = (0..2).map(|_| c(r.gen_range(-2.0..2.0), 0.0)).collect();
            let e = [c(r.gen_range(-2.0..2.0), 0.0)];
            let v = base.eval_tilde_e(&z, &e).unwrap().re;
            let mut up = base.clone();
            up.gamma *= 2;
            assert!(up.eval_tilde_e(&z, &e).unwrap().re >= v);
            let mut up = base.clone();
            up.lambda[0] *= 2;
            assert!(up.eval_tilde_e(&z, &e).unwrap().re >= v);
        }
    }

    #[test]
    fn even_rounding() {
        assert_eq!(even_above(4.0), 6);
        assert_eq!(even_above(4.5), 6);
        assert_eq!(even_above(5.0), 6);
        assert_eq!(even_above(0.0), 2);
        assert_eq!(even_at_least(4.0), 4);
        assert_eq!(even_at_least(4.2), 6);
        assert_eq!(even_at_least(1.0), 2);
    }

    #[test]
    fn validation() {
        assert!(KernelParams::new(3, 2, vec![3], vec![10], 120, 20, 1.0).is_err());
        assert!(KernelParams::new(3, 2, vec![4], vec![2], 120, 20, 1.0).is_err());
        assert!(KernelParams::new(3, 2, vec![4], vec![10], 0, 20, 1.0).is_err());
        assert!(KernelParams::new(2, 1, vec![], vec![], 2, 3, 1.0).is_err());
    }
}
