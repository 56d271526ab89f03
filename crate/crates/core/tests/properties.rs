use cr_approx::kernel::{unit_pullback_det, young_constant, KernelParams};
use cr_approx::quadrature::cutoff::chi_radial;
use cr_approx::verify::{ErrorRow, ErrorTable, CSV_HEADER};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn even(lo: u64, hi: u64) -> impl Strategy<Value = u64> {
    (lo / 2..=hi / 2).prop_map(|k| 2 * k)
}

fn params() -> impl Strategy<Value = KernelParams> {
    (1usize..=3, 0usize..=2)
        .prop_flat_map(|(d, m)| {
            (
                Just((d, m)),
                prop::collection::vec(even(2, 40), d - 1),
                prop::collection::vec(even(4, 12), d - 1),
                even(2, 1000),
                even(2, 12),
            )
        })
        .prop_map(|((d, m), lambda, p, gamma, q)| KernelParams::new(d + m, d, lambda, p, gamma, q, 1.0).unwrap())
}

fn cplx(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.5f64..1.5, -1.5f64..1.5).prop_map(|(a, b)| Complex64::new(a, b)), n)
}

fn params_and_point() -> impl Strategy<Value = (KernelParams, Vec<Complex64>, Vec<Complex64>)> {
    params().prop_flat_map(|p| {
        let (d, m) = (p.d, p.m());
        (Just(p), cplx(d), cplx(m))
    })
}

fn table(rows: Vec<(f64, f64)>) -> ErrorTable {
    let mut eps = 0.4;
    ErrorTable {
        function: "f".into(),
        sup_f: 1.0,
        rows: rows
            .into_iter()
            .map(|(err, gap)| {
                let r = ErrorRow {
                    eps,
                    err_g: err,
                    err_f: err,
                    gap_log10: gap,
                    flags: 0,
                };
                eps /= 2.0;
                r
            })
            .collect(),
    }
}

proptest! {
    #[test]
    fn e_eps_is_a_rescaled_tilde_e((p, zeta, eta) in params_and_point(), eps in 0.01f64..1.0) {
        let direct = p.eval_e_eps(eps, &zeta, &eta).unwrap();
        let sz: Vec<_> = zeta.iter().map(|z| z * eps).collect();
        let se: Vec<_> = eta.iter().map(|e| e * eps).collect();
        let via = p.eval_tilde_e(&sz, &se).unwrap() / (eps * eps);
        let scale = 1.0 + direct.norm().max(via.norm());
        prop_assert!((direct - via).norm() <= 1e-11 * scale, "{direct} vs {via}");
    }

    #[test]
    fn e_eps_departs_from_e0_by_its_higher_terms((p, zeta, eta) in params_and_point(), eps in 1e-4f64..1.0) {
        let e0 = p.eval_e0(&zeta, &eta).unwrap();
        let dev = (p.eval_e_eps(eps, &zeta, &eta).unwrap() - e0).norm();
        let mut bound = 0.0;
        for j in 0..p.d - 1 {
            bound += p.lambda[j] as f64 * eps.powi(p.p[j] as i32 - 2) * zeta[j].norm().powi(p.p[j] as i32);
        }
        for e in &eta {
            bound += p.gamma as f64 * eps.powi(p.q as i32 - 2) * e.norm().powi(p.q as i32);
        }
        prop_assert!(dev <= bound * (1.0 + 1e-9) + 1e-12 * (1.0 + e0.norm()), "{dev} > {bound}");
    }

    #[test]
    fn shear_pullback_has_unit_determinant(
        (p, entries) in params().prop_flat_map(|p| {
            let k = p.d * p.d + p.d * p.m();
            (Just(p), prop::collection::vec(-50.0f64..50.0, k))
        })
    ) {
        let (d, m) = (p.d, p.m());
        let a = DMatrix::from_fn(d, d, |i, j| if j < i { entries[i * d + j] } else { 0.0 });
        let b = DMatrix::from_fn(d, m, |i, j| entries[d * d + i * m + j]);
        prop_assert_eq!(unit_pullback_det(&p, &a, &b).unwrap(), 1.0);
    }

    #[test]
    fn young_inequality_holds(p in 1.05f64..20.0, delta in 1e-3f64..1e3, a in 0.0f64..50.0, b in 0.0f64..50.0) {
        let q = p / (p - 1.0);
        let l = young_constant(p, q, delta).unwrap();
        let rhs = delta * a.powf(p) + l * b.powf(q);
        prop_assert!(a * b <= rhs * (1.0 + 1e-12) + 1e-300, "{} > {}", a * b, rhs);
    }

    #[test]
    fn cutoff_is_monotone_and_bounded(radius in 0.0f64..20.0, r1 in 0.0f64..25.0, r2 in 0.0f64..25.0) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let (a, b) = (chi_radial(radius, lo), chi_radial(radius, hi));
        prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        prop_assert!(b <= a);
    }

    #[test]
    fn csv_has_one_line_per_row(rows in prop::collection::vec((1e-8f64..1.0, -300.0f64..300.0), 1..8)) {
        let t = table(rows);
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        prop_assert_eq!(lines[0], CSV_HEADER);
        prop_assert_eq!(lines.len(), t.rows.len() + 1);
        for l in &lines[1..] {
            prop_assert_eq!(l.split(',').count(), 6);
        }
    }

    #[test]
    fn gap_verdict_ignores_a_common_factor(
        gaps in prop::collection::vec(-200.0f64..200.0, 1..6),
        shift in -50.0f64..50.0,
    ) {
        let a = table(gaps.iter().map(|&g| (1.0, g)).collect());
        let b = table(gaps.iter().map(|&g| (1.0, g + shift)).collect());
        prop_assert_eq!(a.gap_verdict(1.1).pass, b.gap_verdict(1.1).pass);
    }

    #[test]
    fn passing_convergence_means_strict_decrease(errs in prop::collection::vec(1e-6f64..1.0, 1..6)) {
        let t = table(errs.iter().map(|&e| (e, 0.0)).collect());
        if t.convergence_verdict(1.0).pass {
            prop_assert!(errs.windows(2).all(|w| w[1] < w[0]));
        }
        let mut sorted = errs.clone();
        sorted.sort_by(|x, y| y.partial_cmp(x).unwrap());
        sorted.dedup();
        let t = table(sorted.iter().map(|&e| (e, 0.0)).collect());
        prop_assert!(t.convergence_verdict(1.0).pass);
    }
}
