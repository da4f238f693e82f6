//! Grand density over the populations `p_k = |⟨E_k|ψ⟩|²`.
//!
//! Fixing the expectations of all energy projectors at once leaves a density
//! that is constant, `π^n`, on the probability simplex. Integrating out the
//! populations along a level set of energy recovers `Ω(E)`.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::spectrum::Spectrum;

/// Constant density `π^n` on the open simplex `{p_k > 0, Σ p_k < 1}` of an
/// `(n+1)`-level system, in the coordinates `p_1..p_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrandDos {
    pub dim: usize,
    pub value: f64,
}

impl GrandDos {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(invalid(format!("dimension must be at least 2, got {dim}")));
        }
        Ok(GrandDos {
            dim,
            value: PI.powi(dim as i32 - 1),
        })
    }

    /// Whether `p` (length `dim - 1`) lies strictly inside the simplex.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() + 1 == self.dim && p.iter().all(|&x| x > 0.0) && p.iter().sum::<f64>() < 1.0
    }

    pub fn eval(&self, p: &[f64]) -> Result<f64> {
        if p.len() + 1 != self.dim {
            return Err(invalid(format!(
                "expected {} populations for dimension {}, got {}",
                self.dim - 1,
                self.dim,
                p.len()
            )));
        }
        Ok(if self.contains(p) { self.value } else { 0.0 })
    }

    /// `π^n / n!`.
    pub fn total_integral(&self) -> f64 {
        (1..self.dim).fold(self.value, |acc, k| acc / k as f64)
    }
}

fn step(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Three-level grand density `¼π² (Υ(p) - Υ(p+q-1)) (Υ(q) - Υ(q-1))` with
/// `Υ(x) = -1` for `x ≤ 0` and `+1` otherwise.
///
/// The product alone is `π²` on the edge `p + q = 1`; that edge is set to 0
/// so the whole simplex boundary matches [`grand_dos_general`].
pub fn grand_dos(p: f64, q: f64) -> f64 {
    if p + q == 1.0 {
        return 0.0;
    }
    0.25 * PI * PI * (step(p) - step(p + q - 1.0)) * (step(q) - step(q - 1.0))
}

/// `π^{dim-1}` strictly inside the simplex, 0 elsewhere including its
/// boundary.
pub fn grand_dos_general(dim: usize, p: &[f64]) -> Result<f64> {
    GrandDos::new(dim)?.eval(p)
}

/// Exact integral of the three-level grand density over the rectangle
/// `[p_lo, p_hi] × [q_lo, q_hi]`.
pub fn integrate_rectangle(p_lo: f64, p_hi: f64, q_lo: f64, q_hi: f64) -> f64 {
    let (a, b) = (p_lo.max(0.0), p_hi.min(1.0));
    let (c, d) = (q_lo.max(0.0), q_hi.min(1.0));
    if a >= b || c >= d {
        return 0.0;
    }
    // Feasible q length at fixed p is clamp(1 - c - p, 0, d - c): full up to
    // p = 1 - d, then falling linearly to zero at p = 1 - c.
    let full_end = (1.0 - d).clamp(a, b);
    let zero_at = (1.0 - c).clamp(a, b);
    let full = (full_end - a) * (d - c);
    let falling = 0.5 * ((1.0 - c - full_end) + (1.0 - c - zero_at)) * (zero_at - full_end);
    PI * PI * (full + falling)
}

/// Ω(E) of a nondegenerate three-level spectrum, obtained by solving the
/// energy constraint for `p` and integrating the grand density over the
/// feasible `q` interval.
pub fn marginalize_to_energy(s: &Spectrum, e: f64) -> Result<f64> {
    if s.dim() != 3 || !s.is_nondegenerate() {
        return Err(invalid(
            "marginalization needs a nondegenerate three-level spectrum",
        ));
    }
    let levels = s.eigenvalues();
    let (e1, e2, e3) = (levels[0], levels[1], levels[2]);
    if !(e > e1 && e < e3) {
        return Ok(0.0);
    }
    // p(q) = a + b q with p E1 + q E2 + (1 - p - q) E3 = E.
    let a = (e - e3) / (e1 - e3);
    let b = -(e2 - e3) / (e1 - e3);
    // Each constraint reads c0 + c1 q > 0.
    let constraints = [(a, b), (1.0 - a, -1.0 - b), (0.0, 1.0), (1.0, -1.0)];
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (c0, c1) in constraints {
        if c1 > 0.0 {
            lo = lo.max(-c0 / c1);
        } else if c1 < 0.0 {
            hi = hi.min(-c0 / c1);
        } else if c0 <= 0.0 {
            return Ok(0.0);
        }
    }
    Ok(PI * PI * (hi - lo).max(0.0) / (e3 - e1))
}
