//! Canonical partition function `Z(β) = ∫ Ω(E) e^{-βE} dE`.
//!
//! For a nondegenerate spectrum the Laplace transform has the closed form
//! `Z(β) = Σ_k e^{-βE_k} Π_{l≠k} π / (β (E_l - E_k))`, whose terms grow like
//! `β^{-n}` and cancel for small `β`. The piecewise route integrates each
//! polynomial piece against the exponential exactly, using the lower
//! incomplete gamma function in a form with only positive terms, and is
//! used wherever the closed form is ill-conditioned.

use std::f64::consts::PI;

use crate::dos::{build_dos, PiecewiseDos, Side};
use crate::error::{invalid, Error, Result};
use crate::roots::newton_bisect;
use crate::spectrum::Spectrum;

/// Which route produced `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CanonicalMethod {
    ClosedForm,
    Piecewise,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalEval {
    pub beta: f64,
    pub z: f64,
    /// Thermal mean energy `-∂ ln Z / ∂β`.
    pub u: f64,
    pub method: CanonicalMethod,
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!(
            "inverse temperature must be positive and finite, got {beta}"
        )))
    }
}

/// `∫_0^h y^j e^{-βy} dy` for `j = 0..=max_j`.
fn incomplete_moments(h: f64, beta: f64, max_j: usize) -> Vec<f64> {
    let x = beta * h;
    let series_limit = 50f64.max(2.0 * (max_j + 1) as f64 + 20.0);
    if x < series_limit {
        // γ(s, x) = x^s e^{-x} Σ_m x^m / (s (s+1) ... (s+m)), all terms positive.
        let decay = (-x).exp();
        (0..=max_j)
            .map(|j| {
                let s = (j + 1) as f64;
                let mut term = 1.0 / s;
                let mut sum = term;
                let mut m = 1.0;
                while term > 1e-17 * sum {
                    term *= x / (s + m);
                    sum += term;
                    m += 1.0;
                }
                h.powi(j as i32 + 1) * decay * sum
            })
            .collect()
    } else {
        // Upward recurrence; stable once x exceeds the order comfortably.
        let decay = (-x).exp();
        let mut out = Vec::with_capacity(max_j + 1);
        out.push(-(-x).exp_m1() / beta);
        for j in 1..=max_j {
            let prev = out[j - 1];
            out.push((j as f64 * prev - h.powi(j as i32) * decay) / beta);
        }
        out
    }
}

/// `∫ (E - E_min)^k Ω(E) e^{-β(E - E_min)} dE` for `k = 0, 1, 2`.
///
/// `β = 0` is allowed here and gives the plain moments.
fn shifted_moments(d: &PiecewiseDos, beta: f64) -> [f64; 3] {
    let e_min = d.min_energy();
    let mut total = [0.0; 3];
    for p in d.pieces() {
        let h = p.end - p.start;
        let offset = p.start - e_min;
        let ints = incomplete_moments(h, beta, p.coeffs.len() + 1);
        let weight = (-beta * offset).exp();
        // (offset + y)^k expanded against y^j.
        let mut m = [0.0; 3];
        for (j, &c) in p.coeffs.iter().enumerate() {
            m[0] += c * ints[j];
            m[1] += c * (offset * ints[j] + ints[j + 1]);
            m[2] += c * (offset * offset * ints[j] + 2.0 * offset * ints[j + 1] + ints[j + 2]);
        }
        for k in 0..3 {
            total[k] += weight * m[k];
        }
    }
    total
}

/// `Z(β)` by exact piecewise integration; valid for any spectrum.
pub fn partition_stable(d: &PiecewiseDos, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok((-beta * d.min_energy()).exp() * shifted_moments(d, beta)[0])
}

/// `ln Z(β)`, which stays finite where `Z` itself would overflow.
pub fn log_partition_stable(d: &PiecewiseDos, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(-beta * d.min_energy() + shifted_moments(d, beta)[0].ln())
}

/// Thermal mean energy `U(β) = ∫ E Ω e^{-βE} dE / Z(β)`.
pub fn thermal_energy(d: &PiecewiseDos, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let [m0, m1, _] = shifted_moments(d, beta);
    Ok(d.min_energy() + m1 / m0)
}

/// Canonical energy variance `∂² ln Z / ∂β²`.
pub fn energy_variance(d: &PiecewiseDos, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let [m0, m1, m2] = shifted_moments(d, beta);
    let mean = m1 / m0;
    Ok(m2 / m0 - mean * mean)
}

/// Terms of the closed-form sum.
fn closed_terms(s: &Spectrum, beta: f64) -> Result<Vec<f64>> {
    if !s.is_nondegenerate() {
        return Err(invalid(
            "closed-form partition function requires a nondegenerate spectrum; use partition_stable",
        ));
    }
    check_beta(beta)?;
    let energies = s.eigenvalues();
    Ok(energies
        .iter()
        .enumerate()
        .map(|(k, &ek)| {
            let prod: f64 = energies
                .iter()
                .enumerate()
                .filter(|&(l, _)| l != k)
                .map(|(_, &el)| PI / (beta * (el - ek)))
                .product();
            (-beta * ek).exp() * prod
        })
        .collect())
}

/// The closed-form sum evaluated literally, whatever its conditioning.
pub fn partition_closed_literal(s: &Spectrum, beta: f64) -> Result<f64> {
    Ok(closed_terms(s, beta)?.iter().sum())
}

/// Whether the closed-form sum keeps its result to about `1e-12` relative.
fn closed_form_is_accurate(terms: &[f64]) -> bool {
    let sum: f64 = terms.iter().sum();
    let magnitude: f64 = terms.iter().map(|t| t.abs()).sum();
    sum > 0.0 && magnitude / sum * terms.len() as f64 * f64::EPSILON <= 1e-12
}

/// `Z(β)` from the closed form for nondegenerate spectra, switching to the
/// piecewise route when cancellation between terms would cost accuracy.
/// Degenerate spectra are rejected.
pub fn partition_closed(s: &Spectrum, beta: f64) -> Result<f64> {
    let terms = closed_terms(s, beta)?;
    if closed_form_is_accurate(&terms) {
        Ok(terms.iter().sum())
    } else {
        partition_stable(&build_dos(s)?, beta)
    }
}

/// `Z` and `U` at one `β`, recording the route used for `Z`. Degenerate
/// spectra always take the piecewise route.
pub fn canonical_eval(s: &Spectrum, beta: f64) -> Result<CanonicalEval> {
    check_beta(beta)?;
    let d = build_dos(s)?;
    let closed = if s.is_nondegenerate() {
        let terms = closed_terms(s, beta)?;
        closed_form_is_accurate(&terms).then(|| terms.iter().sum::<f64>())
    } else {
        None
    };
    let (z, method) = match closed {
        Some(z) => (z, CanonicalMethod::ClosedForm),
        None => (partition_stable(&d, beta)?, CanonicalMethod::Piecewise),
    };
    Ok(CanonicalEval {
        beta,
        z,
        u: thermal_energy(&d, beta)?,
        method,
    })
}

/// Canonical and microcanonical inverse temperatures at energy `e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaConsistency {
    /// `β` with `U(β) = e`.
    pub beta_canonical: f64,
    /// `Ω'(e)/Ω(e)`.
    pub beta_micro: f64,
    /// `|β_canonical - β_micro| / β_micro`.
    pub gap: f64,
}

/// Compares the `β` that makes the canonical mean energy equal `e` with the
/// microcanonical `Ω'/Ω` at `e`.
pub fn beta_temperature_consistency(d: &PiecewiseDos, e: f64) -> Result<BetaConsistency> {
    let (lo, hi) = d.support();
    if !(e > lo && e < hi) {
        return Err(invalid(format!(
            "energy {e} is not strictly inside ({lo}, {hi})"
        )));
    }
    let [omega, d1, _] = d.jet(e, Side::Right);
    let beta_micro = d1 / omega;
    if beta_micro.is_nan() || beta_micro <= 0.0 {
        return Err(Error::NoSolution(format!(
            "energy {e} is not on the positive-temperature branch (Ω'/Ω = {beta_micro})"
        )));
    }
    let mean = {
        let [m0, m1, _] = shifted_moments(d, 0.0);
        lo + m1 / m0
    };
    if e >= mean {
        return Err(Error::NoSolution(format!(
            "energy {e} is not below the infinite-temperature mean {mean}; U(β) = E has no positive root"
        )));
    }
    let u = |beta: f64| {
        let [m0, m1, m2] = shifted_moments(d, beta);
        let mean = m1 / m0;
        (lo + mean, m2 / m0 - mean * mean)
    };
    let mut b_lo = beta_micro;
    while u(b_lo).0 <= e {
        b_lo *= 0.5;
    }
    let mut b_hi = beta_micro;
    while u(b_hi).0 >= e {
        b_hi *= 2.0;
        if !b_hi.is_finite() {
            return Err(Error::NonConvergence("could not bracket U(β) = E".into()));
        }
    }
    let beta_canonical = newton_bisect(
        |beta| {
            let (mean, var) = u(beta);
            (mean - e, -var)
        },
        b_lo,
        b_hi,
        1e-15 * b_hi,
    )?;
    Ok(BetaConsistency {
        beta_canonical,
        beta_micro,
        gap: (beta_canonical - beta_micro).abs() / beta_micro,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{ising_spectrum, make_spectrum, IsingChainSpec};
    use crate::state_space_volume;

    fn ladder(levels: &[f64]) -> Spectrum {
        make_spectrum(&levels.iter().map(|&e| (e, 1)).collect::<Vec<_>>()).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    /// Composite Simpson quadrature on each interval between breakpoints,
    /// where the integrand is smooth.
    fn quadrature(f: &dyn Fn(f64) -> f64, breaks: &[f64]) -> f64 {
        let m = 4000;
        breaks
            .windows(2)
            .map(|w| {
                let h = (w[1] - w[0]) / m as f64;
                // Endpoints sampled just inside the piece to stay on one polynomial.
                let nudge = 1e-13 * (w[1] - w[0]);
                let mut sum = f(w[0] + nudge) + f(w[1] - nudge);
                for i in 1..m {
                    let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
                    sum += weight * f(w[0] + i as f64 * h);
                }
                sum * h / 3.0
            })
            .sum()
    }

    #[test]
    fn two_level_closed_form() {
        let s = ladder(&[0.0, 1.0]);
        let expect = PI * (1.0 - (-1f64).exp());
        assert!(rel(partition_closed_literal(&s, 1.0).unwrap(), expect) < 1e-15);
        assert!(rel(partition_closed(&s, 1.0).unwrap(), expect) < 1e-15);
        let d = build_dos(&s).unwrap();
        assert!(rel(partition_stable(&d, 1.0).unwrap(), expect) < 1e-15);
    }

    #[test]
    fn ground_term_dominates_at_large_beta() {
        let s = ladder(&[0.0, 0.7, 1.5, 2.0]);
        let prefactor = PI.powi(3) / (0.7 * 1.5 * 2.0);
        let beta = 60.0;
        let z = partition_closed_literal(&s, beta).unwrap();
        let scaled = z * beta.powi(3);
        // Next corrections are O(e^{-0.7 β}).
        assert!(rel(scaled, prefactor) < 1e-15 * 1e3);
    }

    #[test]
    fn laplace_identity_against_quadrature() {
        let s = ladder(&[0.0, 1.0, 2.0]);
        let d = build_dos(&s).unwrap();
        let beta = 2.0;
        let q = quadrature(&|e| d.eval(e) * (-beta * e).exp(), &d.breakpoints());
        assert!(rel(partition_closed_literal(&s, beta).unwrap(), q) < 1e-8);
        assert!(rel(partition_stable(&d, beta).unwrap(), q) < 1e-10);
    }

    #[test]
    fn degenerate_spectrum_matches_quadrature() {
        let s = ising_spectrum(&IsingChainSpec::new(3, 0.25, 1.0)).unwrap();
        let d = build_dos(&s).unwrap();
        assert!(partition_closed(&s, 1.0).is_err());
        for beta in [0.1, 1.0, 5.0] {
            let q = quadrature(&|e| d.eval(e) * (-beta * e).exp(), &d.breakpoints());
            assert!(
                rel(partition_stable(&d, beta).unwrap(), q) < 1e-8,
                "β = {beta}"
            );
            let qe = quadrature(&|e| e * d.eval(e) * (-beta * e).exp(), &d.breakpoints());
            assert!((thermal_energy(&d, beta).unwrap() - qe / q).abs() < 1e-8);
        }
    }

    #[test]
    fn small_beta_limit_is_total_volume() {
        for dim in 2..=10 {
            let levels: Vec<f64> = (0..dim).map(|k| (k as f64).sqrt() * 1.3 - 0.4).collect();
            let s = ladder(&levels);
            let d = build_dos(&s).unwrap();
            let beta = 1e-6 / s.width();
            // Z(β) = V (1 - β ⟨E⟩ + ...); the first-order term is below 1e-8 here.
            let z = partition_stable(&d, beta).unwrap()
                * (beta * levels.iter().sum::<f64>() / dim as f64).exp();
            assert!(rel(z, state_space_volume(dim)) < 1e-8, "dim {dim}");
        }
    }

    #[test]
    fn closed_route_switches_when_ill_conditioned() {
        let s = ladder(&[0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]);
        let eval = canonical_eval(&s, 0.5).unwrap();
        assert_eq!(eval.method, CanonicalMethod::Piecewise);
        let d = build_dos(&s).unwrap();
        assert!(rel(eval.z, partition_stable(&d, 0.5).unwrap()) < 1e-15);
        let well = canonical_eval(&ladder(&[0.0, 1.0, 2.0]), 3.0).unwrap();
        assert_eq!(well.method, CanonicalMethod::ClosedForm);
        assert!(canonical_eval(&s, 0.0).is_err());
        assert!(canonical_eval(&s, -1.0).is_err());
    }

    #[test]
    fn thermal_energy_limits() {
        let d = build_dos(&ladder(&[-1.0, 0.2, 1.0, 1.8, 3.0])).unwrap();
        // Symmetric about 1.
        assert!((thermal_energy(&d, 1e-9).unwrap() - 1.0).abs() < 1e-8);
        assert!((thermal_energy(&d, 1e4).unwrap() + 1.0) < 1e-2);
        assert!(thermal_energy(&d, 1e4).unwrap() > -1.0);
    }

    #[test]
    fn three_level_canonical_beta_differs_from_micro() {
        // For E_k = 0, 1, 2: Z ∝ (1 - e^{-β})² / β², so U = 2/β - 2/(e^β - 1).
        // U = 0.5 at β = 3.5935119694474260823 (mpmath root), while Ω'/Ω = 2.
        let d = build_dos(&ladder(&[0.0, 1.0, 2.0])).unwrap();
        let c = beta_temperature_consistency(&d, 0.5).unwrap();
        assert!((c.beta_micro - 2.0).abs() < 1e-14);
        assert!((c.beta_canonical - 3.593_511_969_447_426).abs() < 1e-10);
        let oracle = |b: f64| 2.0 / b - 2.0 / b.exp_m1();
        assert!((thermal_energy(&d, 2.0).unwrap() - oracle(2.0)).abs() < 1e-13);
        assert!(c.gap > 0.7);
    }

    #[test]
    fn consistency_errors() {
        let two = build_dos(&ladder(&[0.0, 1.0])).unwrap();
        assert!(matches!(
            beta_temperature_consistency(&two, 0.5),
            Err(Error::NoSolution(_))
        ));
        let three = build_dos(&ladder(&[0.0, 1.0, 2.0])).unwrap();
        assert!(matches!(
            beta_temperature_consistency(&three, 1.5),
            Err(Error::NoSolution(_))
        ));
        assert!(beta_temperature_consistency(&three, 2.0).is_err());
    }

    #[test]
    fn z_decreasing_and_log_convex() {
        let d = build_dos(&ising_spectrum(&IsingChainSpec::new(3, 0.25, 1.0)).unwrap()).unwrap();
        let betas: Vec<f64> = (1..200).map(|i| 0.05 * i as f64).collect();
        let logz: Vec<f64> = betas
            .iter()
            .map(|&b| log_partition_stable(&d, b).unwrap())
            .collect();
        let h = 0.05;
        for i in 1..logz.len() - 1 {
            let second = (logz[i + 1] - 2.0 * logz[i] + logz[i - 1]) / (h * h);
            assert!(second >= 0.0);
            let var = energy_variance(&d, betas[i]).unwrap();
            assert!(
                (second - var).abs() < 1e-3 * var.max(1e-3),
                "β = {}",
                betas[i]
            );
        }
        // Z strictly decreasing once the spectrum is shifted to nonnegative energies.
        let shifted = build_dos(
            &ising_spectrum(&IsingChainSpec::new(3, 0.25, 1.0))
                .unwrap()
                .affine(1.0, 3.75)
                .unwrap(),
        )
        .unwrap();
        let zs: Vec<f64> = betas
            .iter()
            .map(|&b| partition_stable(&shifted, b).unwrap())
            .collect();
        assert!(zs.windows(2).all(|w| w[1] < w[0]));
        let us: Vec<f64> = betas
            .iter()
            .map(|&b| thermal_energy(&d, b).unwrap())
            .collect();
        assert!(us.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn incomplete_moments_agree_across_branches() {
        // Both evaluation routes around the switch point.
        for max_j in [3usize, 10] {
            let limit = 50f64.max(2.0 * (max_j + 1) as f64 + 20.0);
            let below = incomplete_moments(1.0, limit * (1.0 - 1e-9), max_j);
            let above = incomplete_moments(1.0, limit * (1.0 + 1e-9), max_j);
            for j in 0..=max_j {
                assert!(rel(below[j], above[j]) < 1e-7, "j = {j}");
            }
        }
        // Closed form for j = 0, 1.
        let (h, b) = (0.7, 3.0);
        let m = incomplete_moments(h, b, 1);
        assert!(rel(m[0], (1.0 - (-b * h).exp()) / b) < 1e-15);
        let exact1 = (1.0 - (1.0 + b * h) * (-b * h).exp()) / (b * b);
        assert!(rel(m[1], exact1) < 1e-14);
    }
}
