//! Quadrature: Gauss-Legendre and Gauss-Jacobi rules via Golub-Welsch,
//! and an adaptive Gauss-Kronrod 7-15 integrator that works for real and
//! complex integrands alike.
//!
//! The Jacobi rules absorb endpoint singularities (1-x)^alpha (1+x)^beta
//! with alpha, beta > -1 into the weight, which is exactly the shape of
//! the screening integrals on their natural intervals.

use crate::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use std::collections::HashMap;
use std::sync::Mutex;

/// Values an integrator can accumulate: real or complex.
pub trait QuadValue: Copy {
    fn zero() -> Self;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn scale(self, s: f64) -> Self;
    fn norm(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn norm(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn norm(self) -> f64 {
        num_complex::ComplexFloat::abs(self)
    }
}

fn ln_beta(a: f64, b: f64) -> Result<f64> {
    let (la, _) = crate::special::ln_gamma(a)?;
    let (lb, _) = crate::special::ln_gamma(b)?;
    let (lab, _) = crate::special::ln_gamma(a + b)?;
    Ok(la + lb - lab)
}

/// Nodes and weights of the n-point Gauss-Jacobi rule for the weight
/// (1-x)^alpha (1+x)^beta on [-1, 1], by the Golub-Welsch eigenvalue
/// method on the Jacobi recurrence matrix.
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || n > 1024 {
        return Err(Error::domain(format!("rule size {n} out of 1..=1024")));
    }
    if alpha <= -1.0 || beta <= -1.0 {
        return Err(Error::domain(format!(
            "Jacobi exponents must exceed -1, got alpha={alpha}, beta={beta}"
        )));
    }
    if let Some(hit) = cache_lookup(n, alpha, beta) {
        return Ok(hit);
    }
    let ab = alpha + beta;
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let d = if k == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
        m[(k, k)] = d;
        if k + 1 < n {
            let k1 = kf + 1.0;
            let e2 = if k == 0 {
                4.0 * (alpha + 1.0) * (beta + 1.0) / ((ab + 2.0).powi(2) * (ab + 3.0))
            } else {
                4.0 * k1 * (k1 + alpha) * (k1 + beta) * (k1 + ab)
                    / ((2.0 * k1 + ab).powi(2) * (2.0 * k1 + ab + 1.0) * (2.0 * k1 + ab - 1.0))
            };
            let e = e2.sqrt();
            m[(k, k + 1)] = e;
            m[(k + 1, k)] = e;
        }
    }
    let eig = SymmetricEigen::new(m);
    let mu0 = ((ab + 1.0) * std::f64::consts::LN_2 + ln_beta(alpha + 1.0, beta + 1.0)?).exp();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            (x, mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    cache_store(n, alpha, beta, &nodes, &weights);
    Ok((nodes, weights))
}

/// n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    gauss_jacobi(n, 0.0, 0.0)
}

type RuleKey = (usize, u64, u64);

fn rule_cache() -> &'static Mutex<HashMap<RuleKey, (Vec<f64>, Vec<f64>)>> {
    static CACHE: std::sync::OnceLock<Mutex<HashMap<RuleKey, (Vec<f64>, Vec<f64>)>>> =
        std::sync::OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cache_lookup(n: usize, alpha: f64, beta: f64) -> Option<(Vec<f64>, Vec<f64>)> {
    let key = (n, alpha.to_bits(), beta.to_bits());
    rule_cache().lock().ok()?.get(&key).cloned()
}

fn cache_store(n: usize, alpha: f64, beta: f64, nodes: &[f64], weights: &[f64]) {
    let key = (n, alpha.to_bits(), beta.to_bits());
    if let Ok(mut c) = rule_cache().lock() {
        if c.len() < 256 {
            c.insert(key, (nodes.to_vec(), weights.to_vec()));
        }
    }
}

/// Integrate g over (a, b) against the implicit singular endpoint factor
/// (b-v)^alpha (v-a)^beta:
///
///   returns  sum_i W_i g(v_i)  ~=  int_a^b (b-v)^alpha (v-a)^beta g(v) dv.
pub fn integrate_jacobi<F>(mut g: F, a: f64, b: f64, alpha: f64, beta: f64, n: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(b > a) {
        return Err(Error::domain(format!("bad interval ({a}, {b})")));
    }
    let (nodes, weights) = gauss_jacobi(n, alpha, beta)?;
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let jac = half.powf(alpha + beta + 1.0);
    let mut acc = 0.0;
    for (t, w) in nodes.iter().zip(&weights) {
        acc += w * g(mid + half * t);
    }
    Ok(jac * acc)
}

/// Same as `integrate_jacobi`, but doubling the rule size until two
/// successive refinements agree to the requested relative tolerance.
pub fn integrate_jacobi_adaptive<F>(
    mut g: F,
    a: f64,
    b: f64,
    alpha: f64,
    beta: f64,
    rel_tol: f64,
) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut prev = integrate_jacobi(&mut g, a, b, alpha, beta, 32)?;
    for n in [64usize, 128, 256, 512] {
        let cur = integrate_jacobi(&mut g, a, b, alpha, beta, n)?;
        let scale = cur.abs().max(prev.abs()).max(1e-300);
        if (cur - prev).abs() <= rel_tol * scale {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Quadrature(format!(
        "Jacobi rule did not converge on ({a}, {b}) with exponents ({alpha}, {beta}); last value {prev:e}"
    )))
}

// Gauss-Kronrod 7-15 constants (QUADPACK dqk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_69,
    0.279_705_391_489_276_67,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
];

/// One G7-K15 panel: returns (kronrod value, error estimate).
fn gk15<V: QuadValue, F: FnMut(f64) -> V>(f: &mut F, a: f64, b: f64) -> (V, f64) {
    let centr = 0.5 * (a + b);
    let hlgth = 0.5 * (b - a);
    let fc = f(centr);
    let mut resg = fc.scale(WG[3]);
    let mut resk = fc.scale(WGK[7]);
    let mut fv1 = [V::zero(); 7];
    let mut fv2 = [V::zero(); 7];
    for j in 0..3 {
        let idx = 2 * j + 1;
        let absc = hlgth * XGK[idx];
        let f1 = f(centr - absc);
        let f2 = f(centr + absc);
        fv1[idx] = f1;
        fv2[idx] = f2;
        resg = resg.add(f1.add(f2).scale(WG[j]));
        resk = resk.add(f1.add(f2).scale(WGK[idx]));
    }
    for j in 0..4 {
        let idx = 2 * j;
        let absc = hlgth * XGK[idx];
        let f1 = f(centr - absc);
        let f2 = f(centr + absc);
        fv1[idx] = f1;
        fv2[idx] = f2;
        resk = resk.add(f1.add(f2).scale(WGK[idx]));
    }
    let reskh = resk.scale(0.5);
    let mut resasc = WGK[7] * fc.sub(reskh).norm();
    for idx in 0..7 {
        resasc += WGK[idx] * (fv1[idx].sub(reskh).norm() + fv2[idx].sub(reskh).norm());
    }
    resasc *= hlgth.abs();
    let value = resk.scale(hlgth);
    let mut err = resk.sub(resg).norm() * hlgth.abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * 1.0f64.min((200.0 * err / resasc).powf(1.5));
    }
    (value, err)
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOutcome<V> {
    pub value: V,
    pub error: f64,
    pub evals: usize,
}

struct Segment<V> {
    err: f64,
    a: f64,
    b: f64,
    value: V,
}

/// Adaptive Gauss-Kronrod integration of f over [a, b].  Splits the worst
/// panel until the summed error estimate meets max(abs_tol, rel_tol*|I|)
/// or the evaluation budget runs out (an error in that case).
pub fn adaptive_gk<V: QuadValue, F: FnMut(f64) -> V>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_evals: usize,
) -> Result<QuadOutcome<V>> {
    if !(b > a) || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain(format!("bad interval ({a}, {b})")));
    }
    let (v0, e0) = gk15(&mut f, a, b);
    let mut segs: Vec<Segment<V>> = vec![Segment { err: e0, a, b, value: v0 }];
    let mut evals = 15usize;
    loop {
        let mut total = V::zero();
        let mut total_err = 0.0;
        for s in &segs {
            total = total.add(s.value);
            total_err += s.err;
        }
        let tol = abs_tol.max(rel_tol * total.norm());
        if total_err <= tol {
            return Ok(QuadOutcome { value: total, error: total_err, evals });
        }
        if evals + 30 > max_evals {
            return Err(Error::Quadrature(format!(
                "GK15 budget exhausted on ({a}, {b}): error {total_err:e} > tol {tol:e} after {evals} evaluations"
            )));
        }
        // split the worst segment
        let (wi, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.partial_cmp(&y.1.err).unwrap())
            .expect("nonempty");
        let worst = segs.swap_remove(wi);
        let mid = 0.5 * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            return Err(Error::Quadrature(format!(
                "GK15 cannot split further at {mid}; error {:e}",
                worst.err
            )));
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        evals += 30;
        segs.push(Segment { err: e1, a: worst.a, b: mid, value: v1 });
        segs.push(Segment { err: e2, a: mid, b: worst.b, value: v2 });
    }
}
