//! Scalar special functions: real log-gamma with sign tracking, digamma,
//! the Gauss hypergeometric function on [0,1], and Pfaffians of small
//! antisymmetric matrices.

use crate::{Error, Result};
use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Lanczos coefficients for g = 7, n = 9 (Godfrey's set); relative error
/// below 1e-13 on the positive real axis.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.5 && (x - x.round()).abs() < 1e-12
}

fn lanczos_ln_gamma(x: f64) -> f64 {
    // Valid for x >= 0.5.
    let z = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// `(ln|Gamma(x)|, sign of Gamma(x))`.  Uses the reflection formula for
/// `x < 0.5`; fails on the poles at nonpositive integers.
pub fn ln_gamma(x: f64) -> Result<(f64, f64)> {
    if is_nonpositive_integer(x) {
        return Err(Error::domain(format!("gamma pole at {x}")));
    }
    if x >= 0.5 {
        Ok((lanczos_ln_gamma(x), 1.0))
    } else {
        // Gamma(x) = pi / (sin(pi x) * Gamma(1 - x)).
        let s = (PI * x).sin();
        Ok((PI.ln() - s.abs().ln() - lanczos_ln_gamma(1.0 - x), s.signum()))
    }
}

/// `Gamma(x)` as a plain float; overflows for large `x` like the real thing.
pub fn gamma(x: f64) -> Result<f64> {
    let (ln, sign) = ln_gamma(x)?;
    Ok(sign * ln.exp())
}

/// Product of gammas `prod Gamma(num) / prod Gamma(den)` evaluated in log
/// space.  A pole in a denominator sends the whole ratio to zero; a pole in
/// a numerator is an error.
pub fn gamma_ratio(nums: &[f64], dens: &[f64]) -> Result<f64> {
    if dens.iter().any(|&d| is_nonpositive_integer(d)) {
        return Ok(0.0);
    }
    let mut ln = 0.0;
    let mut sign = 1.0;
    for &x in nums {
        let (l, s) = ln_gamma(x)?;
        ln += l;
        sign *= s;
    }
    for &x in dens {
        let (l, s) = ln_gamma(x)?;
        ln -= l;
        sign *= s;
    }
    Ok(sign * ln.exp())
}

/// Digamma function for real non-pole arguments: recurrence up to x >= 8,
/// then the Bernoulli asymptotic series; reflection below 1/2.
pub fn digamma(x: f64) -> Result<f64> {
    if is_nonpositive_integer(x) {
        return Err(Error::domain(format!("digamma pole at {x}")));
    }
    if x < 0.5 {
        // psi(x) = psi(1-x) - pi*cot(pi*x)
        return Ok(digamma(1.0 - x)? - PI / (PI * x).tan());
    }
    let mut acc = 0.0;
    let mut t = x;
    while t < 8.0 {
        acc -= 1.0 / t;
        t += 1.0;
    }
    let inv2 = 1.0 / (t * t);
    // ln t - 1/2t - sum B_2n / (2n t^2n)
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    Ok(acc + t.ln() - 0.5 / t - series)
}

/// Gauss hypergeometric function 2F1(a,b;c;z) for real parameters and
/// z in [0,1].
///
/// Strategy: terminating series when a or b is a nonpositive integer;
/// otherwise power series for z <= 1/2, the z -> 1-z connection formula for
/// z > 1/2 (with the degenerate log-series when c-a-b is an integer), and
/// the Gauss summation at z = 1.  In the near-degenerate band
/// 0 < |c-a-b - m| < 1e-6 the value is the average of the generic
/// connection at c +/- 1e-4: diagnostic-grade accuracy only, which no
/// high-precision caller hits.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if is_nonpositive_integer(c) {
        return Err(Error::domain(format!("2F1 parameter pole c = {c}")));
    }
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::domain(format!("2F1 argument {z} outside [0,1]")));
    }
    // Terminating series: valid on all of [0,1].
    if is_nonpositive_integer(a) || is_nonpositive_integer(b) {
        return hyp2f1_series(a, b, c, z, true);
    }
    let s = c - a - b;
    if z == 1.0 {
        if s <= 0.0 {
            return Err(Error::domain(format!("2F1 divergent at z=1, c-a-b = {s}")));
        }
        return gamma_ratio(&[c, s], &[c - a, c - b]);
    }
    if z <= 0.5 {
        return hyp2f1_series(a, b, c, z, false);
    }
    let m = s.round();
    if m >= -0.5 && (s - m).abs() < 1e-9 {
        hyp2f1_degenerate(a, b, m as usize, z)
    } else if (s - m).abs() < 1e-6 {
        let hi = hyp2f1_connection(a, b, c + 1e-4, z)?;
        let lo = hyp2f1_connection(a, b, c - 1e-4, z)?;
        Ok(0.5 * (hi + lo))
    } else {
        hyp2f1_connection(a, b, c, z)
    }
}

/// Derivative in z via the contiguous relation
/// d/dz 2F1(a,b;c;z) = (ab/c) 2F1(a+1,b+1;c+1;z).
pub fn hyp2f1_deriv(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    Ok(a * b / c * hyp2f1(a + 1.0, b + 1.0, c + 1.0, z)?)
}

fn hyp2f1_series(a: f64, b: f64, c: f64, z: f64, terminating: bool) -> Result<f64> {
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut quiet = 0u32;
    for k in 0..2000 {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        sum += term;
        if term == 0.0 {
            return Ok(sum); // terminating series exhausted
        }
        if term.abs() <= 1e-17 * sum.abs() {
            quiet += 1;
            if quiet >= 2 {
                return Ok(sum);
            }
        } else {
            quiet = 0;
        }
    }
    if terminating {
        Ok(sum)
    } else {
        Err(Error::Quadrature(format!(
            "2F1 series stalled at z = {z} (a={a}, b={b}, c={c})"
        )))
    }
}

/// Connection formula for z > 1/2, generic (non-integer) c-a-b:
/// F(a,b;c;z) = G1 * F(a,b;a+b-c+1;w) + w^(c-a-b) G2 * F(c-a,c-b;c-a-b+1;w)
/// with w = 1-z.
fn hyp2f1_connection(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let w = 1.0 - z;
    let s = c - a - b;
    let g1 = gamma_ratio(&[c, s], &[c - a, c - b])?;
    let g2 = gamma_ratio(&[c, -s], &[a, b])?;
    let f1 = hyp2f1_series(a, b, 1.0 - s, w, false)?;
    let f2 = hyp2f1_series(c - a, c - b, 1.0 + s, w, false)?;
    Ok(g1 * f1 + w.powf(s) * g2 * f2)
}

/// Degenerate connection for c = a + b + m with integer m >= 0:
/// the finite prefix sum plus the log series.
fn hyp2f1_degenerate(a: f64, b: f64, m: usize, z: f64) -> Result<f64> {
    let w = 1.0 - z;
    let c = a + b + m as f64;
    let mf = m as f64;
    let mut value = 0.0;

    if m > 0 {
        let coeff = gamma_ratio(&[mf, c], &[a + mf, b + mf])?;
        let mut term = 1.0;
        let mut sum = 0.0;
        for n in 0..m {
            sum += term;
            if n + 1 < m {
                let nf = n as f64;
                // (a)_{n+1} (b)_{n+1} / ((n+1)! (1-m)_{n+1}) w^{n+1}
                term *= (a + nf) * (b + nf) / ((nf + 1.0) * (1.0 - mf + nf)) * w;
            }
        }
        value += coeff * sum;
    }

    // Log series: -(-1)^m Gamma(c)/(Gamma(a)Gamma(b)) w^m *
    //   sum_n (a+m)_n (b+m)_n/(n!(n+m)!) w^n
    //   * [ln w - psi(n+1) - psi(n+m+1) + psi(a+m+n) + psi(b+m+n)]
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    let coeff = -sign * gamma_ratio(&[c], &[a, b])?;
    if coeff != 0.0 {
        let lnw = w.ln();
        let mut fac = gamma_ratio(&[1.0], &[mf + 1.0])?; // 1/m!
        let mut sum = 0.0;
        for n in 0..2000 {
            let nf = n as f64;
            let bracket = lnw - digamma(nf + 1.0)? - digamma(nf + mf + 1.0)?
                + digamma(a + mf + nf)?
                + digamma(b + mf + nf)?;
            let term = fac * bracket;
            sum += term;
            if n > 3 && term.abs() <= 1e-17 * sum.abs().max(1e-300) {
                break;
            }
            fac *= (a + mf + nf) * (b + mf + nf) / ((nf + 1.0) * (nf + mf + 1.0)) * w;
        }
        value += coeff * w.powi(m as i32) * sum;
    }
    Ok(value)
}

/// Pfaffian of a small antisymmetric matrix (dimension <= 8) by recursive
/// expansion along the first row; satisfies pf(A)^2 = det(A).
pub fn pfaffian(a: &DMatrix<f64>) -> Result<f64> {
    let n = a.nrows();
    if n != a.ncols() || n % 2 != 0 {
        return Err(Error::domain(format!("pfaffian needs even square, got {n}x{}", a.ncols())));
    }
    if n > 8 {
        return Err(Error::domain("pfaffian limited to dimension 8"));
    }
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for i in 0..n {
        for j in 0..n {
            if (a[(i, j)] + a[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::domain("matrix is not antisymmetric"));
            }
        }
    }
    let idx: Vec<usize> = (0..n).collect();
    Ok(pf_rec(a, &idx))
}

fn pf_rec(a: &DMatrix<f64>, idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 1.0;
    }
    let i0 = idx[0];
    let mut acc = 0.0;
    let mut sign = 1.0;
    for &j in &idx[1..] {
        let rest: Vec<usize> = idx[1..].iter().copied().filter(|&k| k != j).collect();
        acc += sign * a[(i0, j)] * pf_rec(a, &rest);
        sign = -sign;
    }
    acc
}
