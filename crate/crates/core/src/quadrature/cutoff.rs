//! The smooth radial cutoff `χ_R`.

use crate::graph_model::norm;

fn g(tau: f64) -> f64 {
    if tau > 0.0 {
        (-1.0 / tau).exp()
    } else {
        0.0
    }
}

/// `χ_R` as a function of `r = |s| + |t|`.
pub fn chi_radial(radius: f64, r: f64) -> f64 {
    if r <= radius {
        1.0
    } else if r >= radius + 1.0 {
        0.0
    } else {
        let a = g(radius + 1.0 - r);
        let b = g(r - radius);
        a / (a + b)
    }
}

/// `χ_R(s, t)`: 1 on `|s| + |t| <= R`, 0 on `|s| + |t| >= R + 1`.
pub fn chi(radius: f64, s: &[f64], t: &[f64]) -> f64 {
    chi_radial(radius, norm(s) + norm(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_and_midpoint() {
        let r = 5.0;
        assert_eq!(chi_radial(r, 5.0), 1.0);
        assert_eq!(chi_radial(r, 6.0), 0.0);
        assert_eq!(chi_radial(r, 0.0), 1.0);
        assert_eq!(chi_radial(r, 40.0), 0.0);
        assert!((chi_radial(r, 5.5) - 0.5).abs() < 1e-15);
        assert_eq!(chi(r, &[3.0, 4.0], &[0.0]), 1.0);
        assert_eq!(chi(r, &[3.0, 4.0], &[1.0]), 0.0);
    }

    #[test]
    fn flat_contact_at_both_ends() {
        let r = 3.0;
        let h = 1e-4;
        for r0 in [r, r + 1.0] {
            let d = (chi_radial(r, r0 + h) - chi_radial(r, r0 - h)) / (2.0 * h);
            assert!(d.abs() < 1e-8, "derivative {d} at {r0}");
        }
    }

    #[test]
    fn monotone_in_r() {
        let r = 2.0;
        let mut last = 1.0;
        for i in 0..=1000 {
            let v = chi_radial(r, 1.5 + 2.0 * i as f64 / 1000.0);
            assert!(v <= last && (0.0..=1.0).contains(&v));
            last = v;
        }
    }
}
