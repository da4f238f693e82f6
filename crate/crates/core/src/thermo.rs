//! Thermodynamics of the microcanonical density of states.
//!
//! With `S = k_B ln Ω`, `T dS = dE` and `C = dE/dT` we get
//! `k_B T = Ω/Ω'` and `C = k_B Ω'² / (Ω'² - Ω Ω'')`. All functions here work
//! in units with `k_B = 1`; [`ThermoCurve`] applies a display scale.
//!
//! `Ω` is a B-spline and therefore log-concave, so `T(E)` increases
//! monotonically on each side of the mode and `ln Ω` is concave. The inverse
//! map and the equilibration optimizer lean on that.

use crate::dos::PiecewiseDos;
use crate::error::{invalid, Error, Result};
use crate::roots::{bisect, golden_max, newton_bisect};

pub use crate::dos::Side;

/// Relative size below which a derivative value is treated as zero against
/// the magnitude of its polynomial terms.
const ZERO_DERIVATIVE: f64 = 1e-12;
/// Relative jump that marks a derivative discontinuity at a knot.
pub const JUMP_TOLERANCE: f64 = 1e-8;

fn check_interior(d: &PiecewiseDos, e: f64) -> Result<()> {
    let (lo, hi) = d.support();
    if e > lo && e < hi {
        Ok(())
    } else {
        Err(invalid(format!(
            "energy {e} is not strictly inside the support [{lo}, {hi}]"
        )))
    }
}

/// `Ω/Ω'` from a jet, `+∞` when `Ω' = 0`.
fn temperature_of([omega, d1, _]: [f64; 3]) -> f64 {
    if d1 == 0.0 {
        f64::INFINITY
    } else {
        omega / d1
    }
}

fn specific_heat_of([omega, d1, d2]: [f64; 3]) -> f64 {
    let num = d1 * d1;
    let den = num - omega * d2;
    if num == 0.0 && den == 0.0 {
        // Flat density: energy does not respond to temperature.
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Microcanonical temperature `k_B T = Ω/Ω'` (with `k_B = 1`).
///
/// At a knot the derivative is taken from the piece to the right; see
/// [`temperature_one_sided`] for the other limit. Returns `+∞` where
/// `Ω' = 0`, and negative values above the mode.
pub fn temperature(d: &PiecewiseDos, e: f64) -> Result<f64> {
    temperature_one_sided(d, e, Side::Right)
}

pub fn temperature_one_sided(d: &PiecewiseDos, e: f64, side: Side) -> Result<f64> {
    check_interior(d, e)?;
    Ok(temperature_of(d.jet(e, side)))
}

/// Inverse temperature `Ω'/Ω`, finite everywhere inside the support.
pub fn inverse_temperature(d: &PiecewiseDos, e: f64) -> Result<f64> {
    check_interior(d, e)?;
    let [omega, d1, _] = d.jet(e, Side::Right);
    Ok(d1 / omega)
}

/// Specific heat `C = Ω'² / (Ω'² - Ω Ω'')` in units of `k_B`.
///
/// `+∞` when only the denominator vanishes; a flat density (`Ω' = Ω'' = 0`)
/// gives 0.
pub fn specific_heat_at_e(d: &PiecewiseDos, e: f64) -> Result<f64> {
    specific_heat_one_sided(d, e, Side::Right)
}

pub fn specific_heat_one_sided(d: &PiecewiseDos, e: f64, side: Side) -> Result<f64> {
    check_interior(d, e)?;
    Ok(specific_heat_of(d.jet(e, side)))
}

/// Whether `Ω` increases with `E` immediately to one side of `e`, judged by
/// the first non-vanishing one-sided derivative. `None` if the density is
/// flat there.
fn slope_sign(d: &PiecewiseDos, e: f64, side: Side) -> Option<bool> {
    for order in 1..=d.degree() {
        let (v, scale) = d.one_sided(e, order, side);
        if v.abs() > ZERO_DERIVATIVE * scale {
            // Ω(e - h) - Ω(e) ≈ v (-h)^k / k!, so on the left even orders flip.
            let increasing = match side {
                Side::Right => v > 0.0,
                Side::Left => (v > 0.0) == (order % 2 == 1),
            };
            return Some(increasing);
        }
    }
    None
}

/// Smallest and largest maximizers of `Ω`.
pub fn mode_bounds(d: &PiecewiseDos) -> (f64, f64) {
    (smallest_mode(d), largest_mode(d))
}

fn smallest_mode(d: &PiecewiseDos) -> f64 {
    for p in d.pieces() {
        if slope_sign(d, p.start, Side::Right) != Some(true) {
            return p.start;
        }
        if slope_sign(d, p.end, Side::Left) == Some(false) {
            // Ω' > 0 near the start; its first zero lies inside.
            return descend_boundary(|e| d.one_sided(e, 1, Side::Right).0 > 0.0, p.start, p.end);
        }
    }
    d.max_energy()
}

fn largest_mode(d: &PiecewiseDos) -> f64 {
    for p in d.pieces().iter().rev() {
        // Ω must still be falling into `end` for the mode to lie further left.
        if slope_sign(d, p.end, Side::Left) != Some(false) {
            return p.end;
        }
        if slope_sign(d, p.start, Side::Right) == Some(true) {
            return descend_boundary(|e| d.one_sided(e, 1, Side::Left).0 >= 0.0, p.start, p.end);
        }
    }
    d.min_energy()
}

/// Boundary between the region where `pred` holds (left) and fails (right).
fn descend_boundary(pred: impl Fn(f64) -> bool, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Which monotone branch of `T(E)` to invert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Branch {
    /// `(E_min, E_mode)`, where `T > 0`.
    #[default]
    Positive,
    /// `(E_mode', E_max)` above the largest maximizer, where `T < 0`.
    Negative,
}

/// Energy at which the microcanonical temperature equals `t` on `branch`.
///
/// The root is bracketed by bisection and polished by Newton steps using
/// `dT/dE = 1/C`.
pub fn energy_of_temperature(d: &PiecewiseDos, t: f64, branch: Branch) -> Result<f64> {
    let (mode_lo, mode_hi) = mode_bounds(d);
    let (lo, hi) = match branch {
        Branch::Positive => (d.min_energy(), mode_lo),
        Branch::Negative => (mode_hi, d.max_energy()),
    };
    if hi <= lo {
        return Err(Error::NoSolution(format!(
            "the {branch:?} temperature branch is empty"
        )));
    }
    // Evaluate from inside the branch at its ends, where Ω or Ω' may vanish.
    let side_at = |e: f64| if e >= hi { Side::Left } else { Side::Right };
    let infinite = match branch {
        Branch::Positive => f64::INFINITY,
        Branch::Negative => f64::NEG_INFINITY,
    };
    let t_of = |e: f64| {
        let side = side_at(e);
        let (omega, omega_scale) = d.one_sided(e, 0, side);
        let (d1, d1_scale) = d.one_sided(e, 1, side);
        if d1.abs() > ZERO_DERIVATIVE * d1_scale {
            omega / d1
        } else if omega.abs() <= ZERO_DERIVATIVE * omega_scale {
            // Ω ∝ |E - e|^k near a vanishing end: T → 0.
            0.0
        } else {
            infinite
        }
    };
    let (t_lo, t_hi) = (t_of(lo), t_of(hi));
    if !(t > t_lo && t < t_hi) {
        return Err(Error::NoSolution(format!(
            "temperature {t} outside the attainable range ({t_lo}, {t_hi}) of the {branch:?} branch"
        )));
    }
    let tol = 1e-13 * d.width();
    let root = newton_bisect(
        |e| {
            let jet = d.jet(e, side_at(e));
            (t_of(e) - t, 1.0 / specific_heat_of(jet))
        },
        lo,
        hi,
        tol,
    )?;
    Ok(root)
}

/// Energy grid for [`thermo_curve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub points: usize,
    /// Inclusive energy range strictly inside the support; `None` spans the
    /// open support.
    pub range: Option<(f64, f64)>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points: 1000,
            range: None,
        }
    }
}

impl GridSpec {
    pub fn new(points: usize) -> Self {
        Self {
            points,
            range: None,
        }
    }

    pub fn with_range(mut self, lo: f64, hi: f64) -> Self {
        self.range = Some((lo, hi));
        self
    }

    /// Grid energies, moved off knots by half a step where they collide.
    pub fn energies(&self, d: &PiecewiseDos) -> Result<Vec<f64>> {
        if self.points < 2 {
            return Err(invalid("grid needs at least 2 points"));
        }
        let (lo, hi) = d.support();
        let grid: Vec<f64> = match self.range {
            Some((a, b)) => {
                if !(a > lo && b < hi && a < b) {
                    return Err(invalid(format!(
                        "grid range [{a}, {b}] must lie strictly inside the support ({lo}, {hi})"
                    )));
                }
                (0..self.points)
                    .map(|i| a + (b - a) * i as f64 / (self.points - 1) as f64)
                    .collect()
            }
            None => (1..=self.points)
                .map(|i| lo + (hi - lo) * i as f64 / (self.points + 1) as f64)
                .collect(),
        };
        let step = match self.range {
            Some((a, b)) => (b - a) / (self.points - 1) as f64,
            None => (hi - lo) / (self.points + 1) as f64,
        };
        let knots = d.breakpoints();
        let collides = |e: f64| knots.iter().any(|&k| (e - k).abs() <= 1e-12 * d.width());
        Ok(grid
            .into_iter()
            .map(|e| if collides(e) { e + 0.5 * step } else { e })
            .collect())
    }
}

/// Tabulated entropy, temperature and specific heat.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermoCurve {
    pub energy: Vec<f64>,
    pub entropy: Vec<f64>,
    pub temperature: Vec<f64>,
    pub specific_heat: Vec<f64>,
    /// Central-difference `dE/dT` on the grid, for comparison with
    /// `specific_heat`.
    pub specific_heat_numeric: Vec<f64>,
    pub kb: f64,
}

/// `S`, `T`, `C` on a grid; `kb` converts to display units (`S` and `C` in
/// units of energy per display temperature, `T` in display temperature).
pub fn thermo_curve(d: &PiecewiseDos, grid: &GridSpec, kb: f64) -> Result<ThermoCurve> {
    thermo_curve_at(d, grid.energies(d)?, kb)
}

/// [`thermo_curve`] at caller-chosen energies strictly inside the support,
/// in increasing order.
pub fn thermo_curve_at(d: &PiecewiseDos, energy: Vec<f64>, kb: f64) -> Result<ThermoCurve> {
    if !(kb.is_finite() && kb > 0.0) {
        return Err(invalid(format!("k_B must be positive, got {kb}")));
    }
    for &e in &energy {
        check_interior(d, e)?;
    }
    let jets: Vec<[f64; 3]> = energy.iter().map(|&e| d.jet(e, Side::Right)).collect();
    let entropy = jets.iter().map(|j| kb * j[0].ln()).collect();
    let temperature: Vec<f64> = jets.iter().map(|&j| temperature_of(j) / kb).collect();
    let specific_heat = jets.iter().map(|&j| kb * specific_heat_of(j)).collect();
    let n = energy.len();
    let specific_heat_numeric = (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (energy[b] - energy[a]) / (temperature[b] - temperature[a])
        })
        .collect();
    Ok(ThermoCurve {
        energy,
        entropy,
        temperature,
        specific_heat,
        specific_heat_numeric,
        kb,
    })
}

/// A knot where some derivative of `Ω` jumps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint {
    pub energy: f64,
    /// `k_B T` from the left (low-energy) limits at the knot.
    pub temperature: f64,
    /// `k_B T` from the right limits; differs from `temperature` only when
    /// `Ω'` itself jumps.
    pub temperature_right: f64,
    /// Lowest derivative order of `Ω` that is discontinuous.
    pub discontinuity_order: usize,
    /// Left and right values of that derivative.
    pub jump: (f64, f64),
}

/// Interior knots with a derivative discontinuity, in increasing energy.
pub fn critical_points(d: &PiecewiseDos) -> Vec<CriticalPoint> {
    let breaks = d.breakpoints();
    breaks[1..breaks.len() - 1]
        .iter()
        .filter_map(|&e| {
            (0..=d.degree()).find_map(|order| {
                let (l, ls) = d.one_sided(e, order, Side::Left);
                let (r, rs) = d.one_sided(e, order, Side::Right);
                ((l - r).abs() > JUMP_TOLERANCE * ls.max(rs)).then(|| CriticalPoint {
                    energy: e,
                    temperature: temperature_of(d.jet(e, Side::Left)),
                    temperature_right: temperature_of(d.jet(e, Side::Right)),
                    discontinuity_order: order,
                    jump: (l, r),
                })
            })
        })
        .collect()
}

/// Outcome of letting two systems exchange energy until total entropy is
/// maximal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibrationResult {
    /// Energy transferred into system 1 (out of system 2).
    pub epsilon: f64,
    /// Per-constituent energies after the exchange.
    pub e1: f64,
    pub e2: f64,
    pub t1: f64,
    pub t2: f64,
    pub total_entropy: f64,
    /// The maximum sits on the edge of the feasible exchange interval; the
    /// temperatures need not agree.
    pub boundary: bool,
    /// The maximum sits on a knot where one system's `Ω'` jumps from
    /// increasing to decreasing objective; there is no stationary point and
    /// the temperatures need not agree.
    pub kink: bool,
}

/// Maximizes `N₁ ln Ω₁(E₁ + ε/N₁) + N₂ ln Ω₂(E₂ - ε/N₂)` over the exchanged
/// energy `ε`.
///
/// Golden-section search locates the optimum; Newton steps on the
/// stationarity condition `β₁ = β₂` then polish it.
pub fn equilibrate(
    d1: &PiecewiseDos,
    e1: f64,
    n1: usize,
    d2: &PiecewiseDos,
    e2: f64,
    n2: usize,
) -> Result<EquilibrationResult> {
    if n1 == 0 || n2 == 0 {
        return Err(invalid("constituent counts must be positive"));
    }
    check_interior(d1, e1)?;
    check_interior(d2, e2)?;
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let lo = (n1f * (d1.min_energy() - e1)).max(n2f * (e2 - d2.max_energy()));
    let hi = (n1f * (d1.max_energy() - e1)).min(n2f * (e2 - d2.min_energy()));

    let energies = |eps: f64| (e1 + eps / n1f, e2 - eps / n2f);
    let entropy = |eps: f64| {
        let (a, b) = energies(eps);
        n1f * d1.eval(a).ln() + n2f * d2.eval(b).ln()
    };
    let log_jet = |d: &PiecewiseDos, e: f64| {
        let [o, d1, d2] = d.jet(e, Side::Right);
        (d1 / o, (o * d2 - d1 * d1) / (o * o))
    };
    // F'(ε) = β₁ - β₂ and F''(ε) = (ln Ω₁)''/N₁ + (ln Ω₂)''/N₂.
    let stationarity = |eps: f64| {
        let (a, b) = energies(eps);
        let (beta1, curv1) = log_jet(d1, a);
        let (beta2, curv2) = log_jet(d2, b);
        (beta1 - beta2, curv1 / n1f + curv2 / n2f)
    };

    let span = hi - lo;
    let guess = golden_max(entropy, lo, hi, 1e-7 * span);
    let edge = 1e-12 * span;
    let (lo_in, hi_in) = (lo + edge, hi - edge);
    let slope_lo = stationarity(lo_in).0;
    let slope_hi = stationarity(hi_in).0;

    let (epsilon, boundary) = if slope_lo.is_nan() || slope_lo <= 0.0 {
        (lo_in, true)
    } else if slope_hi.is_nan() || slope_hi >= 0.0 {
        (hi_in, true)
    } else {
        // Tight bracket around the golden-section estimate, widened until the
        // slope changes sign.
        let mut delta = 1e-6 * span;
        let (mut a, mut b);
        loop {
            a = (guess - delta).max(lo_in);
            b = (guess + delta).min(hi_in);
            if stationarity(a).0 > 0.0 && stationarity(b).0 < 0.0 {
                break;
            }
            delta *= 10.0;
        }
        let tol = 1e-10 * n1f * d1.width();
        let eps = newton_bisect(stationarity, b, a, tol)
            .or_else(|_| bisect(|x| -stationarity(x).0, a, b, tol))?;
        (eps, false)
    };

    // A sign change of F' across a knot with a jump in Ω' is a corner, not a
    // stationary point: snap to the knot and flag it.
    let mut epsilon = epsilon;
    let mut kink = false;
    if !boundary {
        let (a, b) = energies(epsilon);
        let near = |d: &PiecewiseDos, x: f64| {
            d.knots()
                .iter()
                .copied()
                .filter(|k| (k - x).abs() <= 1e-8 * d.width())
                .min_by(|p, q| (p - x).abs().total_cmp(&(q - x).abs()))
        };
        let beta = |d: &PiecewiseDos, e: f64, side: Side| {
            let [o, d1, _] = d.jet(e, side);
            d1 / o
        };
        let candidates = [
            near(d1, a).map(|k| n1f * (k - e1)),
            near(d2, b).map(|k| n2f * (e2 - k)),
        ];
        for eps_k in candidates.into_iter().flatten() {
            let (a, b) = energies(eps_k);
            let below = beta(d1, a, Side::Left) - beta(d2, b, Side::Right);
            let above = beta(d1, a, Side::Right) - beta(d2, b, Side::Left);
            if below > 0.0 && above < 0.0 && (below - above) > 1e-6 * below.abs().max(above.abs()) {
                epsilon = eps_k;
                kink = true;
                break;
            }
        }
    }

    let (a, b) = energies(epsilon);
    Ok(EquilibrationResult {
        epsilon,
        e1: a,
        e2: b,
        t1: temperature_of(d1.jet(a, Side::Right)),
        t2: temperature_of(d2.jet(b, Side::Right)),
        total_entropy: entropy(epsilon),
        boundary,
        kink,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dos::build_dos;
    use crate::spectrum::{ising_spectrum, make_spectrum, IsingChainSpec, Spectrum};
    use proptest::prelude::*;

    fn ladder(levels: &[f64]) -> Spectrum {
        make_spectrum(&levels.iter().map(|&e| (e, 1)).collect::<Vec<_>>()).unwrap()
    }

    fn dos(levels: &[f64]) -> PiecewiseDos {
        build_dos(&ladder(levels)).unwrap()
    }

    #[test]
    fn temperature_examples() {
        let four = dos(&[0.0, 1.0, 2.0, 3.0]);
        assert!((temperature(&four, 1.0).unwrap() - 0.5).abs() < 1e-14);
        let three = dos(&[0.0, 1.0, 2.0]);
        assert!((temperature(&three, 0.5).unwrap() - 0.5).abs() < 1e-14);
        let two = dos(&[0.0, 1.0]);
        assert_eq!(temperature(&two, 0.3).unwrap(), f64::INFINITY);
        assert!(temperature(&two, 0.0).is_err());
        assert!(temperature(&two, 1.5).is_err());
        // Negative above the mode.
        assert!(temperature(&three, 1.5).unwrap() < 0.0);
    }

    #[test]
    fn specific_heat_examples() {
        let three = dos(&[0.0, 1.0, 2.0]);
        assert_eq!(specific_heat_at_e(&three, 0.5).unwrap(), 1.0);
        let two = dos(&[0.0, 1.0]);
        assert_eq!(specific_heat_at_e(&two, 0.5).unwrap(), 0.0);
        let four = dos(&[0.0, 1.0, 2.0, 3.0]);
        // Ω ∝ E² on the first piece: C = 2 exactly.
        let c = specific_heat_at_e(&four, 0.5).unwrap();
        assert!((c - 2.0).abs() < 1e-13);
        // Numerical dE/dT.
        let h = 1e-5;
        let numeric =
            2.0 * h / (temperature(&four, 0.5 + h).unwrap() - temperature(&four, 0.5 - h).unwrap());
        assert!((numeric - c).abs() < 1e-8);
    }

    #[test]
    fn modes() {
        assert_eq!(mode_bounds(&dos(&[0.0, 1.0, 2.0])), (1.0, 1.0));
        let (a, b) = mode_bounds(&dos(&[0.0, 1.0, 2.0, 3.0]));
        assert!((a - 1.5).abs() < 1e-12 && (b - 1.5).abs() < 1e-12);
        assert_eq!(mode_bounds(&dos(&[0.0, 1.0])), (0.0, 1.0));
        let falling = build_dos(&make_spectrum(&[(0.0, 2), (1.0, 1)]).unwrap()).unwrap();
        assert_eq!(mode_bounds(&falling), (0.0, 0.0));
    }

    #[test]
    fn inverse_map_examples() {
        let four = dos(&[0.0, 1.0, 2.0, 3.0]);
        let e = energy_of_temperature(&four, 0.5, Branch::Positive).unwrap();
        assert!((e - 1.0).abs() < 1e-12);
        let three = dos(&[0.0, 1.0, 2.0]);
        let e = energy_of_temperature(&three, 0.5, Branch::Positive).unwrap();
        assert!((e - 0.5).abs() < 1e-12);
        let e = energy_of_temperature(&three, 1e-9, Branch::Positive).unwrap();
        assert!(e < 1e-8);
        // The three-level positive branch tops out at T = 1 (Ω ∝ E up to E = 1).
        assert!(matches!(
            energy_of_temperature(&three, 2.0, Branch::Positive),
            Err(Error::NoSolution(_))
        ));
        let e = energy_of_temperature(&three, -0.25, Branch::Negative).unwrap();
        assert!((e - 1.75).abs() < 1e-12);
        assert!(energy_of_temperature(&dos(&[0.0, 1.0]), 1.0, Branch::Positive).is_err());
    }

    #[test]
    fn inverse_map_reaches_residual_target() {
        let d = build_dos(&ising_spectrum(&IsingChainSpec::new(3, 0.25, 1.0)).unwrap()).unwrap();
        for t in [0.05, 0.3, 0.5, 0.9, 2.0, 10.0] {
            let e = energy_of_temperature(&d, t, Branch::Positive).unwrap();
            let [o, d1, _] = d.jet(e, Side::Right);
            assert!(
                (o - t * d1).abs() <= 1e-12 * o.abs().max(t * d1.abs()),
                "T = {t}"
            );
        }
    }

    #[test]
    fn critical_points_four_level() {
        let cps = critical_points(&dos(&[0.0, 1.0, 2.0, 3.0]));
        assert_eq!(cps.len(), 2);
        let c = cps[0];
        assert_eq!(c.energy, 1.0);
        assert_eq!(c.discontinuity_order, 2);
        assert!((c.temperature - 0.5).abs() < 1e-12);
        assert!((c.temperature_right - 0.5).abs() < 1e-12);
        // Second knot sits on the negative branch, mirror image.
        assert_eq!(cps[1].energy, 2.0);
        assert!((cps[1].temperature + 0.5).abs() < 1e-12);
        assert!(critical_points(&dos(&[0.0, 1.0])).is_empty());
    }

    #[test]
    fn critical_points_ising() {
        let d = build_dos(&ising_spectrum(&IsingChainSpec::new(3, 0.25, 1.0)).unwrap()).unwrap();
        let cps = critical_points(&d);
        // Knots of multiplicity 3 in a degree-6 spline: C³, jump at order 4.
        assert_eq!(cps.len(), 2);
        assert_eq!(cps[0].energy, -0.75);
        assert_eq!(cps[0].discontinuity_order, 4);
        assert!((cps[0].temperature - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ladder_jumps_at_order_n_minus_1() {
        for dim in 3..=9 {
            let levels: Vec<f64> = (0..dim).map(|k| k as f64).collect();
            let cps = critical_points(&dos(&levels));
            assert_eq!(cps.len(), dim - 2);
            assert!(
                cps.iter().all(|c| c.discontinuity_order == dim - 2),
                "dim {dim}"
            );
        }
    }

    #[test]
    fn curve_examples() {
        let four = dos(&[0.0, 1.0, 2.0, 3.0]);
        // Two interior points fall exactly on the knots at 1 and 2 and are moved off.
        let coarse = GridSpec::new(2).energies(&four).unwrap();
        assert_eq!(coarse, vec![1.5, 2.5]);
        let curve = thermo_curve(&four, &GridSpec::new(999), 1.0).unwrap();
        let mode = 1.5;
        let below: Vec<usize> = (0..curve.energy.len())
            .filter(|&i| curve.energy[i] < mode)
            .collect();
        assert!(below
            .windows(2)
            .all(|w| curve.entropy[w[1]] > curve.entropy[w[0]]));
        // T dS = dE to second order, away from the E² onset where S curves sharply.
        let smooth = |w: &&[usize]| {
            curve.energy[w[0]] > 0.1
                && (curve.energy[w[0]] - 1.0) * (curve.energy[w[1]] - 1.0) > 0.0
        };
        for w in below.windows(2).filter(smooth) {
            let (i, j) = (w[0], w[1]);
            let de = curve.energy[j] - curve.energy[i];
            let t_mid = temperature(&four, 0.5 * (curve.energy[i] + curve.energy[j])).unwrap();
            let ds = curve.entropy[j] - curve.entropy[i];
            assert!((t_mid * ds - de).abs() < 1e-4 * de, "i = {i}");
        }
        let scaled = thermo_curve(&four, &GridSpec::new(10), 2.0).unwrap();
        let plain = thermo_curve(&four, &GridSpec::new(10), 1.0).unwrap();
        assert!((scaled.temperature[2] * 2.0 - plain.temperature[2]).abs() < 1e-14);
        assert!(thermo_curve(&four, &GridSpec::new(10).with_range(-1.0, 1.0), 1.0).is_err());
    }

    #[test]
    fn equilibrate_examples() {
        let three = dos(&[0.0, 1.0, 2.0]);
        let r = equilibrate(&three, 0.4, 5, &three, 0.4, 5).unwrap();
        assert!(r.epsilon.abs() < 1e-9);
        assert!(!r.boundary);
        let r = equilibrate(&three, 0.2, 4, &three, 0.6, 4).unwrap();
        assert!((r.epsilon - 4.0 * (0.6 - 0.2) / 2.0).abs() < 1e-9);
        let four = dos(&[0.0, 1.0, 2.0, 3.0]);
        let r = equilibrate(&three, 0.3, 2, &four, 1.2, 3).unwrap();
        assert!(!r.boundary);
        assert!((r.t1 - r.t2).abs() <= 1e-8 * r.t1.abs());
        // Golden-section oracle on the raw objective.
        let f = |eps: f64| {
            2.0 * three.eval(0.3 + eps / 2.0).ln() + 3.0 * four.eval(1.2 - eps / 3.0).ln()
        };
        let oracle = golden_max(f, -0.6, 1.4, 1e-12);
        assert!((oracle - r.epsilon).abs() < 1e-6);
        assert!(equilibrate(&three, 0.3, 0, &four, 1.2, 3).is_err());
        assert!(equilibrate(&three, 2.3, 1, &four, 1.2, 3).is_err());
    }

    #[test]
    fn equilibrate_boundary_solution() {
        // Density that jumps at its lower edge: ln Ω is finite there, so the
        // optimum can sit on the boundary.
        let falling = build_dos(&make_spectrum(&[(0.0, 2), (1.0, 1)]).unwrap()).unwrap();
        let three = dos(&[0.0, 1.0, 2.0]);
        let r = equilibrate(&falling, 0.5, 1, &three, 0.5, 1).unwrap();
        assert!(r.boundary);
        assert!(!r.kink);
    }

    #[test]
    fn equilibrate_kink_solution() {
        // Ω of a three-level ladder peaks in a corner at its middle level, so
        // holding system 1 there beats any exchange.
        let three = dos(&[0.0, 1.0, 2.0]);
        let four = dos(&[0.0, 1.0, 2.0, 3.0]);
        let r = equilibrate(&three, 0.95, 5, &four, 1.45, 20).unwrap();
        assert!(r.kink && !r.boundary);
        assert_eq!(r.e1, 1.0);
        assert!(r.t1 < 0.0 && r.t2 > 0.0);
        let smooth = equilibrate(&three, 0.3, 2, &four, 1.2, 3).unwrap();
        assert!(!smooth.kink);
    }

    proptest! {
        #[test]
        fn inverse_consistency(dim in 3usize..8, t_frac in 0.01f64..0.99, seed in 0u64..1000) {
            let levels: Vec<f64> = (0..dim).map(|k| k as f64 + 0.3 * ((seed + k as u64) % 3) as f64).collect();
            let d = dos(&levels);
            let (mode, _) = mode_bounds(&d);
            let e_target = d.min_energy() + t_frac * (mode - d.min_energy());
            let t = temperature(&d, e_target).unwrap();
            let e = energy_of_temperature(&d, t, Branch::Positive).unwrap();
            let back = temperature(&d, e).unwrap();
            prop_assert!((back - t).abs() <= 1e-10 * t);
        }

        #[test]
        fn entropy_slope_is_inverse_temperature(dim in 3usize..8, frac in 0.05f64..0.95) {
            let levels: Vec<f64> = (0..dim).map(|k| (k * k) as f64 * 0.2).collect();
            let d = dos(&levels);
            let e = d.min_energy() + frac * d.width();
            let h = 1e-5 * d.width();
            let near_knot = d.breakpoints().iter().any(|&k| (k - e).abs() < 2.0 * h);
            prop_assume!(!near_knot);
            let ds = (d.eval(e + h).ln() - d.eval(e - h).ln()) / (2.0 * h);
            let beta = inverse_temperature(&d, e).unwrap();
            prop_assert!((ds - beta).abs() <= 1e-6 * beta.abs().max(1.0 / d.width()));
        }

        #[test]
        fn shift_invariance(b in -5.0f64..5.0, frac in 0.05f64..0.95) {
            let s = ladder(&[0.0, 0.4, 1.0, 2.5]);
            let d = build_dos(&s).unwrap();
            let moved = build_dos(&s.affine(1.0, b).unwrap()).unwrap();
            let e = frac * d.width();
            let t0 = temperature(&d, e).unwrap();
            let t1 = temperature(&moved, e + b).unwrap();
            prop_assert!((t0 - t1).abs() <= 1e-9 * t0.abs().max(1.0));
            let c0 = specific_heat_at_e(&d, e).unwrap();
            let c1 = specific_heat_at_e(&moved, e + b).unwrap();
            prop_assert!((c0 - c1).abs() <= 1e-7 * c0.abs().max(1.0));
        }

        #[test]
        fn branch_signs(raw in prop::collection::vec((-3.0f64..3.0, 1usize..3), 3..7), frac in 0.01f64..0.99) {
            let s = make_spectrum(&raw).unwrap();
            prop_assume!(s.distinct_count() >= 2);
            let d = build_dos(&s).unwrap();
            let (m_lo, m_hi) = mode_bounds(&d);
            if m_lo > d.min_energy() {
                let e = d.min_energy() + frac * (m_lo - d.min_energy());
                prop_assert!(temperature_one_sided(&d, e, Side::Left).unwrap() > 0.0);
            }
            if m_hi < d.max_energy() {
                let e = m_hi + frac * (d.max_energy() - m_hi);
                prop_assert!(temperature_one_sided(&d, e, Side::Right).unwrap() < 0.0);
            }
        }
    }
}
