//! Dense polynomials in a local variable, coefficients in ascending order.

pub(crate) fn eval(coeffs: &[f64], y: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * y + c)
}

/// Value of the `order`-th derivative at `y`.
pub(crate) fn eval_derivative(coeffs: &[f64], y: f64, order: usize) -> f64 {
    if order == 0 {
        return eval(coeffs, y);
    }
    coeffs
        .iter()
        .enumerate()
        .skip(order)
        .rev()
        .fold(0.0, |acc, (j, &c)| acc * y + c * falling(j, order))
}

/// Sum of the absolute values of the terms of the `order`-th derivative at
/// `y`; the natural round-off scale of [`eval_derivative`].
pub(crate) fn derivative_term_scale(coeffs: &[f64], y: f64, order: usize) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(order)
        .map(|(j, &c)| (c * falling(j, order) * y.abs().powi((j - order) as i32)).abs())
        .sum()
}

/// `j (j-1) ... (j-k+1)`
pub(crate) fn falling(j: usize, k: usize) -> f64 {
    ((j + 1 - k)..=j).fold(1.0, |acc, v| acc * v as f64)
}

/// `∫_0^y p`.
pub(crate) fn integral_from_zero(coeffs: &[f64], y: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .rev()
        .fold(0.0, |acc, (j, &c)| acc * y + c / (j + 1) as f64)
        * y
}

/// Coefficients of the antiderivative vanishing at zero.
pub(crate) fn antiderivative(coeffs: &[f64]) -> Vec<f64> {
    std::iter::once(0.0)
        .chain(coeffs.iter().enumerate().map(|(j, &c)| c / (j + 1) as f64))
        .collect()
}

/// Coefficients of `q(y) = p(y + s)`.
pub(crate) fn taylor_shift(coeffs: &[f64], s: f64) -> Vec<f64> {
    // Repeated synthetic division (Horner's scheme applied degree times).
    let mut out = coeffs.to_vec();
    let n = out.len();
    for i in 0..n {
        for j in (i..n.saturating_sub(1)).rev() {
            out[j] += s * out[j + 1];
        }
    }
    out
}

/// `p(y) * (a + b y)`.
pub(crate) fn mul_linear(coeffs: &[f64], a: f64, b: f64) -> Vec<f64> {
    let mut out = vec![0.0; coeffs.len() + 1];
    for (j, &c) in coeffs.iter().enumerate() {
        out[j] += a * c;
        out[j + 1] += b * c;
    }
    out
}

#[cfg(test)]
pub(crate) fn mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    if p.is_empty() || q.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, &a) in p.iter().enumerate() {
        for (j, &b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

/// `acc += scale * p`, growing `acc` as needed.
pub(crate) fn add_scaled(acc: &mut Vec<f64>, p: &[f64], scale: f64) {
    if acc.len() < p.len() {
        acc.resize(p.len(), 0.0);
    }
    for (a, &c) in acc.iter_mut().zip(p) {
        *a += scale * c;
    }
}

/// Coefficients of `(a + b z)^k`.
#[cfg(test)]
pub(crate) fn linear_power(a: f64, b: f64, k: usize) -> Vec<f64> {
    (0..k).fold(vec![1.0], |acc, _| mul_linear(&acc, a, b))
}

/// Coefficients of `p(a + b z)` as a polynomial in `z`.
pub(crate) fn compose_linear(coeffs: &[f64], a: f64, b: f64) -> Vec<f64> {
    // Horner in polynomial arithmetic.
    let mut out: Vec<f64> = Vec::new();
    for &c in coeffs.iter().rev() {
        out = mul_linear(&out, a, b);
        if out.is_empty() {
            out.push(0.0);
        }
        out[0] += c;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_and_derivatives() {
        // 1 + 2y + 3y^2
        let p = [1.0, 2.0, 3.0];
        assert_eq!(eval(&p, 2.0), 17.0);
        assert_eq!(eval_derivative(&p, 2.0, 1), 14.0);
        assert_eq!(eval_derivative(&p, 2.0, 2), 6.0);
        assert_eq!(eval_derivative(&p, 2.0, 3), 0.0);
        assert_eq!(integral_from_zero(&p, 2.0), 2.0 + 4.0 + 8.0);
        assert_eq!(antiderivative(&p), vec![0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn shift_matches_direct_evaluation() {
        let p = [0.5, -1.0, 2.0, 0.25];
        let q = taylor_shift(&p, 1.5);
        for y in [-1.0, 0.0, 0.3, 2.0] {
            assert!((eval(&q, y) - eval(&p, y + 1.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn composition_and_powers() {
        let p = [1.0, -2.0, 0.5];
        let q = compose_linear(&p, 0.7, -1.3);
        for z in [-1.0, 0.0, 0.4, 3.0] {
            assert!((eval(&q, z) - eval(&p, 0.7 - 1.3 * z)).abs() < 1e-12);
        }
        let r = linear_power(2.0, 1.0, 3);
        assert_eq!(r, vec![8.0, 12.0, 6.0, 1.0]);
        assert_eq!(mul(&[1.0, 1.0], &[1.0, -1.0]), vec![1.0, 0.0, -1.0]);
    }
}
