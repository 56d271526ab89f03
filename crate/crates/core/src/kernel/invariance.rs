//! Slice-independence of the normalizing constant under the real shear
//! `(ŝ, t̂) ↦ (ŝ + Aŝ + Bt̂, t̂)`.

use nalgebra::DMatrix;

use super::{KernelError, KernelParams};
use crate::quadrature::legendre::GaussLegendre;

/// The pullback matrix `[[I + A, B], [0, I]]`.
fn pullback_matrix(params: &KernelParams, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>, KernelError> {
    let (d, m) = (params.d, params.m());
    if a.shape() != (d, d) || b.shape() != (d, m) {
        return Err(KernelError::InvalidShear(format!(
            "A must be {d}x{d} and B {d}x{m}, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    for i in 0..d {
        for j in i..d {
            if a[(i, j)] != 0.0 {
                return Err(KernelError::InvalidShear(format!(
                    "A is not strictly lower triangular at ({i}, {j})"
                )));
            }
        }
    }
    let n = params.n;
    let mut mm = DMatrix::<f64>::identity(n, n);
    for i in 0..d {
        for j in 0..d {
            mm[(i, j)] += a[(i, j)];
        }
        for j in 0..m {
            mm[(i, d + j)] = b[(i, j)];
        }
    }
    Ok(mm)
}

/// Determinant of the pullback matrix by elimination without pivoting.
/// The pivots of a unit lower-triangular block stay exactly 1, so the result
/// is exactly 1 for every admissible `(A, B)`.
pub fn unit_pullback_det(params: &KernelParams, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64, KernelError> {
    let mut mm = pullback_matrix(params, a, b)?;
    let n = mm.nrows();
    let mut det = 1.0;
    for k in 0..n {
        let pivot = mm[(k, k)];
        det *= pivot;
        if pivot == 0.0 {
            return Ok(0.0);
        }
        for i in k + 1..n {
            let f = mm[(i, k)] / pivot;
            if f != 0.0 {
                for j in k..n {
                    let v = mm[(k, j)];
                    mm[(i, j)] -= f * v;
                }
            }
        }
    }
    Ok(det)
}

/// Integrates `exp(-E₀(𝓜(A,B) ξ))` over real `ξ` and returns the relative
/// deviation from `C₁`.
///
/// The integral is computed by nested Gauss–Legendre quadrature. Each axis
/// is truncated to a window around the conditional peak of the Gaussian
/// (half-width chosen so the neglected mass is below `tol/10`); the
/// integrand itself is always evaluated directly.
pub fn check_c1_invariance(
    params: &KernelParams,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    tol: f64,
) -> Result<f64, KernelError> {
    let mm = pullback_matrix(params, a, b)?;
    let n = params.n;
    let mut diag = params.zeta_weights();
    diag.extend(std::iter::repeat(params.gamma as f64).take(params.m()));
    let dg = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
    let s = mm.transpose() * &dg * &mm;

    // marginal forms over the leading k+1 coordinates
    let mut marginals = vec![s.clone()];
    for k in (1..n).rev() {
        let cur = marginals.last().unwrap();
        let mut next = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                next[(i, j)] = cur[(i, j)] - cur[(i, k)] * cur[(k, j)] / cur[(k, k)];
            }
        }
        marginals.push(next);
    }
    marginals.reverse();

    let half = ((10.0 * n as f64 / tol).ln()).sqrt() + 0.5;
    let rule = GaussLegendre::new(16);
    let c1 = params.normalizer_c1();
    let mut panels = 1;
    let mut prev = nested(&s, &marginals, &rule, half, panels);
    loop {
        panels *= 2;
        let cur = nested(&s, &marginals, &rule, half, panels);
        let est = (cur - prev).abs() / c1;
        if est <= tol / 10.0 {
            return Ok((cur - c1).abs() / c1);
        }
        if panels >= 16 {
            return Err(KernelError::Quadrature { tol, estimate: est });
        }
        prev = cur;
    }
}

fn nested(s: &DMatrix<f64>, marginals: &[DMatrix<f64>], rule: &GaussLegendre, half: f64, panels: usize) -> f64 {
    let mut xi = vec![0.0; s.nrows()];
    level(0, &mut xi, s, marginals, rule, half, panels)
}

fn level(
    k: usize,
    xi: &mut [f64],
    s: &DMatrix<f64>,
    marginals: &[DMatrix<f64>],
    rule: &GaussLegendre,
    half: f64,
    panels: usize,
) -> f64 {
    let n = xi.len();
    if k == n {
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += xi[i] * s[(i, j)] * xi[j];
            }
        }
        return (-q).exp();
    }
    let mk = &marginals[k];
    let skk = mk[(k, k)];
    let center = -(0..k).map(|i| mk[(k, i)] * xi[i]).sum::<f64>() / skk;
    let width = half / skk.sqrt();
    let mut total = 0.0;
    for (x, w) in rule.on_panels(center - width, center + width, panels) {
        xi[k] = x;
        total += w * level(k + 1, xi, s, marginals, rule, half, panels);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn codim2() -> KernelParams {
        KernelParams::new(3, 2, vec![12], vec![10], 120, 20, 1.0).unwrap()
    }

    #[test]
    fn identity_shear() {
        let p = codim2();
        let dev = check_c1_invariance(&p, &DMatrix::zeros(2, 2), &DMatrix::zeros(2, 1), 1e-6).unwrap();
        assert!(dev < 1e-9, "{dev}");
    }

    #[test]
    fn random_shears() {
        let p = codim2();
        let mut r = crate::rng::stream(4, 0);
        for _ in 0..5 {
            let mut a = DMatrix::zeros(2, 2);
            a[(1, 0)] = r.gen_range(-4.0..4.0);
            let b = DMatrix::from_fn(2, 1, |_, _| r.gen_range(-4.0..4.0));
            assert!(check_c1_invariance(&p, &a, &b, 1e-6).unwrap() < 1e-6);
            assert_eq!(unit_pullback_det(&p, &a, &b).unwrap(), 1.0);
        }
    }

    #[test]
    fn rejects_upper_entries() {
        let p = codim2();
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = 1.0;
        assert!(check_c1_invariance(&p, &a, &DMatrix::zeros(2, 1), 1e-6).is_err());
        assert!(unit_pullback_det(&p, &DMatrix::zeros(1, 1), &DMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn detects_wrong_normalizer() {
        // the quadrature is not tied to the closed form: a mismatched Γ shows up
        let p = KernelParams::new(2, 1, vec![], vec![], 4, 2, 1.0).unwrap();
        let mut other = p.clone();
        other.gamma = 16;
        let dev = check_c1_invariance(&other, &DMatrix::zeros(1, 1), &DMatrix::zeros(1, 1), 1e-6).unwrap();
        assert!(dev < 1e-9);
        let i_other = other.normalizer_c1() * (1.0 + dev);
        assert!((i_other / p.normalizer_c1() - 0.5).abs() < 1e-8);
    }
}
