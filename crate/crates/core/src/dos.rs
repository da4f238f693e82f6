//! Exact density of states `Ω(E)`.
//!
//! The pushforward of the Fubini–Study volume under `ψ ↦ ⟨ψ|H|ψ⟩` is
//! `Ω(E) = π^n / ((n-1)! (E_max - E_min)) · N(E)` where `N` is the B-spline of
//! degree `n - 1` whose knots are the eigenvalues repeated by multiplicity.
//! [`build_dos`] expands the B-spline in a Taylor series at the left end of
//! each knot interval, giving explicit coefficients in the local variable
//! `E - start` of each piece. Degenerate levels become repeated knots.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::poly;
use crate::spectrum::{energies_coincide, Spectrum};
use crate::state_space_volume;

/// One polynomial piece on `[start, end)`, expanded about both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    /// Coefficients in `E - start`.
    pub coeffs: Vec<f64>,
    /// The same polynomial in `E - end`, used on the right half of the
    /// piece where the expansion about `start` cancels.
    pub end_coeffs: Vec<f64>,
}

impl Piece {
    fn width(&self) -> f64 {
        self.end - self.start
    }

    /// Coefficients about the nearer end and the offset of `e` from it.
    fn local(&self, e: f64) -> (&[f64], f64) {
        if e - self.start <= self.end - e {
            (&self.coeffs, e - self.start)
        } else {
            (&self.end_coeffs, e - self.end)
        }
    }
}

/// Piecewise-polynomial density of states, zero outside its support.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseDos {
    knots: Vec<f64>,
    degree: usize,
    pieces: Vec<Piece>,
    normalization: f64,
}

/// Exact piecewise-polynomial `Ω(E)` for a spectrum.
///
/// Fails when the spectrum has a single distinct level: the energy surface
/// then collapses to a point and `Ω` is not a function.
pub fn build_dos(s: &Spectrum) -> Result<PiecewiseDos> {
    if s.distinct_count() < 2 {
        return Err(invalid(
            "spectrum has a single distinct energy; the density of states is a point mass",
        ));
    }
    let knots = s.eigenvalues();
    let n = s.n();
    let breaks: Vec<f64> = s.levels().iter().map(|&(e, _)| e).collect();
    let scale = PI.powi(n as i32) / ((1..n).map(|k| k as f64).product::<f64>() * s.width());

    let pieces = breaks
        .windows(2)
        .map(|w| {
            let coeffs = bspline_taylor(&knots, w[0]);
            // Left limit at the right end, from the mirrored knot vector.
            let mirrored: Vec<f64> = knots.iter().rev().map(|&t| -t).collect();
            let end_coeffs = bspline_taylor(&mirrored, -w[1]);
            Piece {
                start: w[0],
                end: w[1],
                coeffs: coeffs.into_iter().map(|c| c * scale).collect(),
                end_coeffs: end_coeffs
                    .into_iter()
                    .enumerate()
                    .map(|(k, c)| if k % 2 == 0 { c * scale } else { -c * scale })
                    .collect(),
            }
        })
        .collect();

    Ok(PiecewiseDos {
        knots,
        degree: n - 1,
        pieces,
        normalization: state_space_volume(s.dim()),
    })
}

/// Taylor coefficients at `lo` (right limit) of the B-spline with knot
/// vector `knots`, degree `p = knots.len() - 2`: `c_k = N^{(k)}(lo+) / k!`.
///
/// Derivatives are combinations of lower-degree B-splines whose weights are
/// divided differences over knot spans of `p - k + 1` steps, so close knots
/// only enter at the orders where they genuinely dominate.
fn bspline_taylor(knots: &[f64], lo: f64) -> Vec<f64> {
    let p = knots.len() - 2;
    // values[q][i] = N_{i,q}(lo+)
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(p + 1);
    values.push(
        (0..=p)
            .map(|i| {
                if knots[i] <= lo && lo < knots[i + 1] {
                    1.0
                } else {
                    0.0
                }
            })
            .collect(),
    );
    for q in 1..=p {
        let prev = &values[q - 1];
        let row = (0..=p - q)
            .map(|i| {
                let mut v = 0.0;
                let left_span = knots[i + q] - knots[i];
                if left_span > 0.0 {
                    v += (lo - knots[i]) / left_span * prev[i];
                }
                let right_span = knots[i + q + 1] - knots[i + 1];
                if right_span > 0.0 {
                    v += (knots[i + q + 1] - lo) / right_span * prev[i + 1];
                }
                v
            })
            .collect();
        values.push(row);
    }

    let mut coeffs = Vec::with_capacity(p + 1);
    coeffs.push(values[p][0]);
    let mut weights = vec![1.0];
    let mut binom = 1.0;
    for k in 1..=p {
        let next: Vec<f64> = (0..=k)
            .map(|j| {
                let span = knots[j + p - k + 1] - knots[j];
                if span == 0.0 {
                    return 0.0;
                }
                let a = if j < k { weights[j] } else { 0.0 };
                let b = if j > 0 { weights[j - 1] } else { 0.0 };
                (a - b) / span
            })
            .collect();
        weights = next;
        binom = binom * (p - k + 1) as f64 / k as f64;
        let row = &values[p - k];
        let sum: f64 = weights.iter().zip(row).map(|(w, v)| w * v).sum();
        coeffs.push(binom * sum);
    }
    coeffs
}

impl PiecewiseDos {
    /// Eigenvalues repeated by multiplicity (for composites, the distinct
    /// breakpoints).
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Polynomial degree `n - 1` of the pieces.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Total integral of `Ω`, `π^n / n!` for a single system.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn min_energy(&self) -> f64 {
        self.pieces[0].start
    }

    pub fn max_energy(&self) -> f64 {
        self.pieces[self.pieces.len() - 1].end
    }

    pub fn support(&self) -> (f64, f64) {
        (self.min_energy(), self.max_energy())
    }

    pub fn width(&self) -> f64 {
        self.max_energy() - self.min_energy()
    }

    /// Distinct breakpoints including both support endpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces
            .iter()
            .map(|p| p.start)
            .chain(std::iter::once(self.max_energy()))
            .collect()
    }

    /// Index of the piece whose half-open interval contains `e`; the last
    /// piece also owns `E_max`.
    fn piece_right_of(&self, e: f64) -> Option<usize> {
        if e < self.min_energy() || e > self.max_energy() {
            return None;
        }
        let idx = self.pieces.partition_point(|p| p.start <= e);
        Some(idx.saturating_sub(1))
    }

    /// Index of the piece with `start < e <= end`; the first piece also owns
    /// `E_min`.
    fn piece_left_of(&self, e: f64) -> Option<usize> {
        if e < self.min_energy() || e > self.max_energy() {
            return None;
        }
        let idx = self.pieces.partition_point(|p| p.end < e);
        Some(idx.min(self.pieces.len() - 1))
    }

    /// `Ω(E)`; zero outside the support, continuous limit at interior knots
    /// and the inner limit at the support endpoints.
    pub fn eval(&self, e: f64) -> f64 {
        match self.piece_right_of(e) {
            Some(i) => {
                let (coeffs, y) = self.pieces[i].local(e);
                poly::eval(coeffs, y)
            }
            None => 0.0,
        }
    }

    /// One-sided derivatives `(left, right)` of order `order` at `e`, taken
    /// from the exact piece coefficients. Outside the support both sides are
    /// zero; at a support endpoint the outer side is zero.
    ///
    /// Orders up to `n = degree + 1` are accepted; order `n` is identically
    /// zero on every piece.
    pub fn derivative(&self, e: f64, order: usize) -> Result<(f64, f64)> {
        if order > self.degree + 1 {
            return Err(invalid(format!(
                "derivative order {order} exceeds n = {} for pieces of degree {}",
                self.degree + 1,
                self.degree
            )));
        }
        Ok(self.derivative_unchecked(e, order))
    }

    pub(crate) fn derivative_unchecked(&self, e: f64, order: usize) -> (f64, f64) {
        (
            self.one_sided(e, order, Side::Left).0,
            self.one_sided(e, order, Side::Right).0,
        )
    }

    /// One-sided derivative together with the magnitude of its polynomial
    /// terms over the owning piece, the scale against which round-off and
    /// jumps are judged.
    pub(crate) fn one_sided(&self, e: f64, order: usize, side: Side) -> (f64, f64) {
        let outside = match side {
            Side::Left => e <= self.min_energy() || e > self.max_energy(),
            Side::Right => e < self.min_energy() || e >= self.max_energy(),
        };
        if outside {
            return (0.0, 0.0);
        }
        let idx = match side {
            Side::Left => self.piece_left_of(e),
            Side::Right => self.piece_right_of(e),
        };
        let p = &self.pieces[idx.expect("inside support")];
        let (coeffs, y) = p.local(e);
        (
            poly::eval_derivative(coeffs, y, order),
            poly::derivative_term_scale(coeffs, p.width().max(y.abs()), order),
        )
    }

    /// `(Ω, Ω', Ω'')` from the piece that owns `e` on the given side.
    pub(crate) fn jet(&self, e: f64, side: Side) -> [f64; 3] {
        [0, 1, 2].map(|k| self.one_sided(e, k, side).0)
    }

    /// `∫_a^b Ω dE` by term-wise integration; `a > b` gives the negated
    /// integral over `[b, a]`.
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        if a > b {
            return -self.integrate(b, a);
        }
        self.pieces
            .iter()
            .filter_map(|p| {
                let lo = a.max(p.start);
                let hi = b.min(p.end);
                (hi > lo).then(|| {
                    poly::integral_from_zero(&p.coeffs, hi - p.start)
                        - poly::integral_from_zero(&p.coeffs, lo - p.start)
                })
            })
            .sum()
    }

    /// Total integral computed from the pieces.
    pub fn total_integral(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| poly::integral_from_zero(&p.coeffs, p.width()))
            .sum()
    }

    /// Exact convolution `(Ω₁ * Ω₂)(E) = ∫ Ω₁(t) Ω₂(E - t) dt`: the density
    /// of the summed energy of two independent systems.
    pub fn convolve(&self, other: &PiecewiseDos) -> PiecewiseDos {
        let mut breaks: Vec<f64> = self
            .breakpoints()
            .iter()
            .flat_map(|&a| other.breakpoints().into_iter().map(move |c| a + c))
            .collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|b, a| energies_coincide(*a, *b));

        let degree = self.degree + other.degree + 1;
        let mut pieces: Vec<Piece> = breaks
            .windows(2)
            .map(|w| Piece {
                start: w[0],
                end: w[1],
                coeffs: vec![0.0; degree + 1],
                end_coeffs: Vec::new(),
            })
            .collect();

        for f in &self.pieces {
            for g in &other.pieces {
                let kernel = PairKernel::new(f, g);
                let origin = f.start + g.start;
                for out in pieces.iter_mut() {
                    let z0 = out.start - origin;
                    let z1 = out.end - origin;
                    let span = kernel.wf + kernel.wg;
                    if z1 <= tolerance_floor(span) || z0 >= span - tolerance_floor(span) {
                        continue;
                    }
                    let local = kernel.polynomial_in_region(0.5 * (z0 + z1));
                    let shifted = poly::taylor_shift(&local, z0);
                    poly::add_scaled(&mut out.coeffs, &shifted, 1.0);
                }
            }
        }
        for p in &mut pieces {
            p.coeffs.truncate(degree + 1);
            p.end_coeffs = poly::taylor_shift(&p.coeffs, p.width());
        }

        PiecewiseDos {
            knots: breaks,
            degree,
            pieces,
            normalization: self.normalization * other.normalization,
        }
    }

    /// `N`-fold self-convolution, `N ≥ 1`, by repeated doubling.
    pub fn convolution_power(&self, times: usize) -> Result<PiecewiseDos> {
        if times == 0 {
            return Err(invalid("convolution power must be at least 1"));
        }
        let mut result: Option<PiecewiseDos> = None;
        let mut base = self.clone();
        let mut k = times;
        loop {
            if k & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => r.convolve(&base),
                });
            }
            k >>= 1;
            if k == 0 {
                break;
            }
            base = base.convolve(&base);
        }
        Ok(result.expect("times >= 1"))
    }
}

fn tolerance_floor(span: f64) -> f64 {
    1e-12 * span.abs().max(1.0)
}

/// Which one-sided limit to take at a breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Convolution of two single pieces `f` on `[a, a+wf)` and `g` on
/// `[c, c+wg)`, as a function of `z = E - a - c`:
/// `h(z) = ∫_{max(0, z-wg)}^{min(wf, z)} f(u) g(z - u) du`.
struct PairKernel {
    wf: f64,
    wg: f64,
    /// `antideriv[r]` is the antiderivative in `u` of the coefficient of
    /// `z^r` in `f(u) g(z - u)`.
    antideriv: Vec<Vec<f64>>,
}

impl PairKernel {
    fn new(f: &Piece, g: &Piece) -> Self {
        let dg = g.coeffs.len();
        let df = f.coeffs.len();
        let mut by_power = vec![vec![0.0; df + dg]; dg];
        for (i, &fi) in f.coeffs.iter().enumerate() {
            for (j, &gj) in g.coeffs.iter().enumerate() {
                // (z - u)^j = Σ_r C(j, r) z^r (-u)^(j-r)
                let mut binom = 1.0;
                for r in 0..=j {
                    let sign = if (j - r) % 2 == 0 { 1.0 } else { -1.0 };
                    by_power[r][i + j - r] += fi * gj * binom * sign;
                    binom = binom * (j - r) as f64 / (r + 1) as f64;
                }
            }
        }
        Self {
            wf: f.width(),
            wg: g.width(),
            antideriv: by_power.iter().map(|q| poly::antiderivative(q)).collect(),
        }
    }

    /// Polynomial in `z` valid in the region containing `z_probe`.
    fn polynomial_in_region(&self, z_probe: f64) -> Vec<f64> {
        // Integration limits as alpha + gamma z.
        let (lo_a, lo_g) = if z_probe > self.wg {
            (-self.wg, 1.0)
        } else {
            (0.0, 0.0)
        };
        let (hi_a, hi_g) = if z_probe < self.wf {
            (0.0, 1.0)
        } else {
            (self.wf, 0.0)
        };
        let mut out = Vec::new();
        for (r, anti) in self.antideriv.iter().enumerate() {
            let mut diff = poly::compose_linear(anti, hi_a, hi_g);
            poly::add_scaled(&mut diff, &poly::compose_linear(anti, lo_a, lo_g), -1.0);
            let mut shifted = vec![0.0; r];
            shifted.extend(diff);
            poly::add_scaled(&mut out, &shifted, 1.0);
        }
        out
    }
}

/// Literal evaluation of the nondegenerate truncated-power sum
/// `(-π)^n/(n-1)! Σ_k (E_k - E)^{n-1} Π_{l≠k} 1{E_k > E}/(E_l - E_k)`.
///
/// Kept as a cross-check for [`build_dos`]; it loses accuracy when
/// eigenvalues are close.
pub fn eval_truncated_power_direct(s: &Spectrum, e: f64) -> Result<f64> {
    if !s.is_nondegenerate() {
        return Err(invalid(
            "direct truncated-power sum requires a nondegenerate spectrum",
        ));
    }
    let energies = s.eigenvalues();
    let n = s.n();
    let sum: f64 = energies
        .iter()
        .enumerate()
        .filter(|&(_, &ek)| ek > e)
        .map(|(k, &ek)| {
            let denom: f64 = energies
                .iter()
                .enumerate()
                .filter(|&(l, _)| l != k)
                .map(|(_, &el)| el - ek)
                .product();
            (ek - e).powi(n as i32 - 1) / denom
        })
        .sum();
    let prefactor = (-PI).powi(n as i32) / (1..n).map(|k| k as f64).product::<f64>();
    Ok(prefactor * sum)
}
