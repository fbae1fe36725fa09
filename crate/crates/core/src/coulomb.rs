//! Screening-charge integrals for the correlation functions F_beta: the
//! branch-tracked nested Pochhammer route (valid on the whole kappa range)
//! and the positive line-integral route (valid for 4 < kappa < 8, where the
//! endpoint singularities are integrable).
//!
//! Conventions.  For a link pattern beta with links (a_r, b_r) and boundary
//! points x_1 < ... < x_2N, the bare integrand is
//!
//!   f = prod_{i<j} (x_j - x_i)^(2/k) prod_{r<s} (u_s - u_r)^(8/k)
//!       prod_{r,i} (u_r - x_i)^(-4/k),
//!
//! with every factor anchored real-positive when each u_r sits at the
//! midpoint of the gap immediately right of x_{a_r}.  `coulomb_h` integrates
//! u_r over the Pochhammer commutator around (x_{a_r}, x_{b_r}) and returns
//! the bare iterated loop integral H; the normalized correlation is
//! F = C^N H with the screening constant C from the params module.

use crate::contour::{banded_pochhammer, Path, PathPiece, PowerFactor};
use crate::params::{c_const_extended, KappaParams};
use crate::patterns::LinkPattern;
use crate::quad::{adaptive_gk, gauss_jacobi};
use crate::special::gamma_ratio;
use crate::{Error, Result};
use num_complex::Complex64;
use std::cell::RefCell;

/// Result of a nested screening integral.
#[derive(Debug, Clone, Copy)]
pub struct CoulombValue {
    pub value: Complex64,
    /// rough accumulated quadrature error estimate
    pub error: f64,
    /// number of innermost integrand evaluations
    pub evals: usize,
}

/// The combination 4 sin^2(4 pi / k) C(k) = nu Gamma(2-8/k) / Gamma(1-4/k)^2
/// that normalizes the line representations; finite and positive on (4, 8).
pub fn c_hat_const(kappa: f64) -> Result<f64> {
    if !(kappa > 4.0 && kappa < 8.0) {
        return Err(Error::domain(format!(
            "c_hat_const requires 4 < kappa < 8, got {kappa}"
        )));
    }
    let nu = -2.0 * (4.0 * std::f64::consts::PI / kappa).cos();
    let ratio = gamma_ratio(&[2.0 - 8.0 / kappa], &[1.0 - 4.0 / kappa, 1.0 - 4.0 / kappa])?;
    Ok(nu * ratio)
}

fn validate_points(x: &[f64], n_links: usize) -> Result<()> {
    if x.len() != 2 * n_links {
        return Err(Error::domain(format!(
            "need {} boundary points for {} links, got {}",
            2 * n_links,
            n_links,
            x.len()
        )));
    }
    for w in x.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::domain(format!(
                "boundary points must be strictly increasing, got {:?}",
                x
            )));
        }
    }
    Ok(())
}

fn min_gap(x: &[f64]) -> f64 {
    x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

fn pair_prefactor(x: &[f64], kappa: f64) -> f64 {
    let mut p = 1.0;
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            p *= (x[j] - x[i]).powf(2.0 / kappa);
        }
    }
    p
}

/// Nested Pochhammer screening integral H_beta(x) (bare, including the
/// boundary-pair prefactor).  Valid for kappa in (0,8] except kappa = 4,
/// where the commutator normalization degenerates; N <= 3.  The endpoint
/// kappa = 8 is allowed: H stays finite there (the screening constant C
/// vanishes instead, which is what kills F itself).
pub fn coulomb_h(
    kappa: f64,
    beta: &LinkPattern,
    x: &[f64],
    rel_tol: f64,
) -> Result<CoulombValue> {
    if !(kappa > 0.0 && kappa <= 8.0) {
        return Err(Error::domain(format!("kappa must lie in (0,8], got {kappa}")));
    }
    if (kappa - 4.0).abs() < 1e-9 {
        return Err(Error::domain(
            "screening loops degenerate at kappa = 4; use the level-two construction",
        ));
    }
    let n = beta.n_links();
    if n == 0 || n > 3 {
        return Err(Error::domain(format!("contour route supports 1..=3 links, got {n}")));
    }
    validate_points(x, n)?;

    let links: Vec<(usize, usize)> = beta.links().to_vec();
    let gap = min_gap(x);
    let eps = gap / (2.0 * (n as f64 + 1.0));
    let rho = eps / 2.0;

    // anchor each u_r at the midpoint of the gap right of x_{a_r}; links are
    // in canonical order (sorted by opener), so an enclosing link always
    // comes before the links it encloses and gets the higher bridge band,
    // keeping the contours pairwise disjoint.
    let mut anchors = Vec::with_capacity(n);
    let mut paths = Vec::with_capacity(n);
    for (r, &(a, b)) in links.iter().enumerate() {
        let xa = x[a - 1];
        let xb = x[b - 1];
        anchors.push((xa + x[a]) / 2.0);
        let band = eps * (n - r) as f64;
        paths.push(banded_pochhammer(
            Complex64::new(xa, 0.0),
            Complex64::new(xb, 0.0),
            rho,
            band,
        )?);
    }

    let nested = NestedContour {
        kappa,
        n_loops: n,
        x,
        x_exponents: vec![-4.0 / kappa; x.len()],
        anchors,
        paths,
        rel_tols: (0..n).map(|r| rel_tol * 0.2f64.powi(r as i32)).collect(),
        budget: 200_000,
        evals: RefCell::new(0),
    };
    let pair_logs = [[Complex64::new(0.0, 0.0); 3]; 3];
    let (value, error) = nested.level(0, &[], &pair_logs)?;
    let pref = pair_prefactor(x, kappa);
    let evals = *nested.evals.borrow();
    Ok(CoulombValue { value: value * pref, error: error * pref, evals })
}

/// H_beta via the removal identity: the outermost link (the one opening at
/// x_1) is integrated out in closed form, leaving an (N-1)-fold loop
/// integral against the reduced weight that carries the conjugate charge
/// 4h at the removed link's closing point.  Every surviving loop encloses
/// either nothing or complete surviving links, whose net branch winding
/// cancels, so the value is independent of the contour realization.  Much
/// cheaper than `coulomb_h` for N = 3 (double instead of triple loop) and
/// usable on the same kappa range away from the points where the removal
/// normalization nu/C hits a Gamma pole.
pub fn coulomb_h_reduced(
    kappa: f64,
    beta: &LinkPattern,
    x: &[f64],
    rel_tol: f64,
) -> Result<CoulombValue> {
    if !(kappa > 0.0 && kappa <= 8.0) {
        return Err(Error::domain(format!("kappa must lie in (0,8], got {kappa}")));
    }
    if (kappa - 4.0).abs() < 1e-9 {
        return Err(Error::domain(
            "screening loops degenerate at kappa = 4; use the level-two construction",
        ));
    }
    let n = beta.n_links();
    if !(2..=4).contains(&n) {
        return Err(Error::domain(format!("reduced contour route supports 2..=4 links, got {n}")));
    }
    validate_points(x, n)?;
    let p = KappaParams::new(kappa)?;
    // nu / C = 4 sin^2(4 pi/k) Gamma(1-4/k)^2 / Gamma(2-8/k); errors out at
    // the degenerate points where the ratio has a pole or zero of its own
    let s4 = (4.0 * std::f64::consts::PI / kappa).sin();
    let nu_over_c =
        4.0 * s4 * s4 * gamma_ratio(&[1.0 - 4.0 / kappa, 1.0 - 4.0 / kappa], &[2.0 - 8.0 / kappa])?;

    let links: Vec<(usize, usize)> = beta.links().to_vec();
    let (_ra, rb) = links[0]; // canonical order: the link opening at 1 is outermost
    let b_idx = rb - 1;
    let two_h = 2.0 * p.h;

    let mut pref = 1.0;
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            let expo = if i == b_idx || j == b_idx { -two_h } else { 2.0 / kappa };
            pref *= (x[j] - x[i]).powf(expo);
        }
    }
    let mut x_exponents = vec![-4.0 / kappa; x.len()];
    x_exponents[b_idx] = 4.0 * p.h;

    let m = n - 1;
    let gap = min_gap(x);
    let eps = gap / (2.0 * (m as f64 + 1.0));
    let rho = eps / 2.0;
    let mut anchors = Vec::with_capacity(m);
    let mut paths = Vec::with_capacity(m);
    for (s, &(a, b)) in links[1..].iter().enumerate() {
        anchors.push((x[a - 1] + x[a]) / 2.0);
        let band = eps * (m - s) as f64;
        paths.push(banded_pochhammer(
            Complex64::new(x[a - 1], 0.0),
            Complex64::new(x[b - 1], 0.0),
            rho,
            band,
        )?);
    }
    let nested = NestedContour {
        kappa,
        n_loops: m,
        x,
        x_exponents,
        anchors,
        paths,
        rel_tols: (0..m).map(|r| rel_tol * 0.2f64.powi(r as i32)).collect(),
        budget: 200_000,
        evals: RefCell::new(0),
    };
    let pair_logs = [[Complex64::new(0.0, 0.0); 3]; 3];
    let (value, error) = nested.level(0, &[], &pair_logs)?;
    let scale = pref * nu_over_c;
    let evals = *nested.evals.borrow();
    Ok(CoulombValue { value: value * scale, error: error * scale.abs(), evals })
}

/// F_beta via the contour route: C(kappa)^N * H_beta.  The imaginary part
/// must vanish up to quadrature noise; it is returned for inspection.
pub fn coulomb_f_contour(
    kappa: f64,
    beta: &LinkPattern,
    x: &[f64],
    rel_tol: f64,
) -> Result<CoulombValue> {
    let c = c_const_extended(kappa)?;
    let h = coulomb_h(kappa, beta, x, rel_tol)?;
    let scale = c.powi(beta.n_links() as i32);
    Ok(CoulombValue {
        value: h.value * scale,
        error: h.error * scale.abs(),
        evals: h.evals,
    })
}

struct NestedContour<'a> {
    kappa: f64,
    n_loops: usize,
    x: &'a [f64],
    /// exponent of (u - x_i) for each boundary point (uniform -4/kappa for
    /// the plain integrand; the removed link's closing point carries 4h in
    /// the reduced one)
    x_exponents: Vec<f64>,
    anchors: Vec<f64>,
    paths: Vec<Path>,
    rel_tols: Vec<f64>,
    budget: usize,
    evals: RefCell<usize>,
}

impl NestedContour<'_> {
    /// Integrate level r with u_0..u_{r-1} placed.  `pair_logs[s][t]` holds
    /// the transported log of (u_t - u_s) for s < t, valid for t >= r.
    fn level(
        &self,
        r: usize,
        placed: &[Complex64],
        pair_logs: &[[Complex64; 3]; 3],
    ) -> Result<(Complex64, f64)> {
        let exp_uu = 8.0 / self.kappa;
        let ur0 = Complex64::new(self.anchors[r], 0.0);

        // moving-factor table: boundary points, placed loops, future anchors
        let cap = self.x.len() + self.n_loops - 1;
        let mut factors = Vec::with_capacity(cap);
        let mut logs = Vec::with_capacity(cap);
        for (&xi, &e) in self.x.iter().zip(&self.x_exponents) {
            factors.push(PowerFactor { base: Complex64::new(xi, 0.0), exponent: e });
            logs.push(Complex64::new((self.anchors[r] - xi).abs().ln(), 0.0));
        }
        for (s, &zs) in placed.iter().enumerate() {
            factors.push(PowerFactor { base: zs, exponent: exp_uu });
            logs.push(pair_logs[s][r]);
        }
        let future_base = factors.len();
        for t in (r + 1)..self.n_loops {
            factors.push(PowerFactor { base: Complex64::new(self.anchors[t], 0.0), exponent: 0.0 });
            logs.push(Complex64::new((self.anchors[t] - self.anchors[r]).abs().ln(), 0.0));
        }

        let path = &self.paths[r];
        let start = path.start().unwrap();
        let connector = PathPiece::Line { z0: ur0, z1: start };
        transport(&connector, &factors, &mut logs);

        let piece_rel = self.rel_tols[r];
        let piece_budget = (self.budget / path.pieces.len()).max(450);
        let mut total = Complex64::new(0.0, 0.0);
        let mut err_acc = 0.0;
        for piece in &path.pieces {
            let start_logs = logs.clone();
            let inner_err: RefCell<Option<Error>> = RefCell::new(None);
            let inner_quad_err = RefCell::new(0.0f64);
            let g = |t: f64| {
                let z = piece.point(t);
                let mut node_logs = start_logs.clone();
                for (fac, l) in factors.iter().zip(node_logs.iter_mut()) {
                    *l += delta_log(piece, fac.base, t);
                }
                let mut s = Complex64::new(0.0, 0.0);
                for (fac, l) in factors.iter().zip(node_logs.iter()) {
                    if fac.exponent != 0.0 {
                        s += *l * fac.exponent;
                    }
                }
                let weight = s.exp();
                let inner = if r + 1 < self.n_loops {
                    let mut pl = *pair_logs;
                    for (k, t_idx) in ((r + 1)..self.n_loops).enumerate() {
                        pl[r][t_idx] = node_logs[future_base + k];
                    }
                    let mut placed_next = placed.to_vec();
                    placed_next.push(z);
                    match self.level(r + 1, &placed_next, &pl) {
                        Ok((v, e)) => {
                            let cur = *inner_quad_err.borrow();
                            *inner_quad_err.borrow_mut() = cur.max(e);
                            v
                        }
                        Err(e) => {
                            inner_err.borrow_mut().get_or_insert(e);
                            Complex64::new(0.0, 0.0)
                        }
                    }
                } else {
                    *self.evals.borrow_mut() += 1;
                    Complex64::new(1.0, 0.0)
                };
                weight * inner * piece.derivative(t)
            };
            let out = adaptive_gk(g, 0.0, 1.0, 1e-280, piece_rel, piece_budget)?;
            if let Some(e) = inner_err.into_inner() {
                return Err(e);
            }
            total += out.value;
            err_acc += out.error + *inner_quad_err.borrow();
            transport(piece, &factors, &mut logs);
        }
        Ok((total, err_acc))
    }
}

fn delta_log(piece: &PathPiece, base: Complex64, t: f64) -> Complex64 {
    match *piece {
        PathPiece::Line { z0, z1 } => {
            let zt = z0 + (z1 - z0) * t;
            ((zt - base) / (z0 - base)).ln()
        }
        PathPiece::Arc { center, radius: _, theta0, theta1 } => {
            if (center - base).norm() == 0.0 {
                Complex64::new(0.0, (theta1 - theta0) * t)
            } else {
                let z0 = piece.point(0.0);
                let zh = piece.point(0.5 * t);
                let zt = piece.point(t);
                ((zh - base) / (z0 - base)).ln() + ((zt - base) / (zh - base)).ln()
            }
        }
    }
}

fn transport(piece: &PathPiece, factors: &[PowerFactor], logs: &mut [Complex64]) {
    for (f, l) in factors.iter().zip(logs.iter_mut()) {
        *l += delta_log(piece, f.base, 1.0);
    }
}

/// Which positive line representation to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineRoute {
    /// arch pattern {1,2N}, {2,3}, {4,5}, ...: screening variables in the
    /// odd gaps (x_2,x_3), (x_4,x_5), ... and the last one running from
    /// x_2N to +infinity (carries a factor nu).  For N <= 2 the arch is
    /// the rainbow pattern.
    ArchTail,
    /// parallel pattern, first variable running to -infinity (factor nu)
    ParallelTail,
    /// parallel pattern, each variable in its own natural interval
    ParallelCompact,
}

/// Is beta the rainbow pattern {1, 2N}, {2, 2N-1}, ...?
pub fn is_rainbow(beta: &LinkPattern) -> bool {
    let n = beta.n_links();
    beta.links().iter().enumerate().all(|(r, &(a, b))| a == r + 1 && b == 2 * n - r)
}

/// Is beta the arch pattern {1, 2N}, {2, 3}, {4, 5}, ...?  (One outer
/// link over N-1 side-by-side bumps; equal to the rainbow iff N <= 2.)
pub fn is_arch(beta: &LinkPattern) -> bool {
    let n = beta.n_links();
    beta.links().iter().enumerate().all(|(r, &(a, b))| {
        if r == 0 {
            a == 1 && b == 2 * n
        } else {
            a == 2 * r && b == 2 * r + 1
        }
    })
}

/// Is beta the fully parallel pattern {1,2}, {3,4}, ...?
pub fn is_parallel(beta: &LinkPattern) -> bool {
    beta.links().iter().enumerate().all(|(r, &(a, b))| a == 2 * r + 1 && b == 2 * r + 2)
}

enum LineLevel {
    Compact { lo: f64, hi: f64 },
    /// v = anchor + sign * s/(1-s), s in (0,1)
    Tail { anchor: f64, sign: f64 },
}

/// Normalized correlation F_beta through the convergent line representation,
/// available for the rainbow and parallel patterns when 4 < kappa < 8.
/// Returns (value, error estimate).
pub fn coulomb_h_line(
    kappa: f64,
    beta: &LinkPattern,
    x: &[f64],
    route: LineRoute,
    rel_tol: f64,
) -> Result<(f64, f64)> {
    if !(kappa > 4.0 && kappa < 8.0) {
        return Err(Error::domain(format!(
            "line representation converges only for 4 < kappa < 8, got {kappa}"
        )));
    }
    let n = beta.n_links();
    if n == 0 || n > 4 {
        return Err(Error::domain(format!("line route supports 1..=4 links, got {n}")));
    }
    validate_points(x, n)?;
    let p = KappaParams::new(kappa)?;
    let chat = c_hat_const(kappa)?;

    let (levels, constant): (Vec<LineLevel>, f64) = match route {
        LineRoute::ArchTail => {
            if !is_arch(beta) {
                return Err(Error::domain("ArchTail route requires the arch pattern"));
            }
            let mut lv: Vec<LineLevel> = (1..n)
                .map(|r| LineLevel::Compact { lo: x[2 * r - 1], hi: x[2 * r] })
                .collect();
            lv.push(LineLevel::Tail { anchor: x[2 * n - 1], sign: 1.0 });
            (lv, p.nu * chat.powi(n as i32))
        }
        LineRoute::ParallelTail => {
            if !is_parallel(beta) {
                return Err(Error::domain("ParallelTail route requires the parallel pattern"));
            }
            let mut lv: Vec<LineLevel> = (1..n)
                .map(|r| LineLevel::Compact { lo: x[2 * r], hi: x[2 * r + 1] })
                .collect();
            lv.push(LineLevel::Tail { anchor: x[0], sign: -1.0 });
            (lv, p.nu * chat.powi(n as i32))
        }
        LineRoute::ParallelCompact => {
            if !is_parallel(beta) {
                return Err(Error::domain("ParallelCompact route requires the parallel pattern"));
            }
            let lv = (0..n)
                .map(|r| LineLevel::Compact { lo: x[2 * r], hi: x[2 * r + 1] })
                .collect();
            (lv, chat.powi(n as i32))
        }
    };

    let e_sing = -4.0 / kappa;
    let alpha_tail = 8.0 / kappa - 2.0;
    let integrator = NestedLine { kappa, x, levels: &levels, e_sing, alpha_tail };

    let mut prev: Option<f64> = None;
    let mut order = 24;
    let mut value = 0.0;
    let mut err = f64::INFINITY;
    while order <= 768 {
        let v = integrator.run(order)?;
        if let Some(p0) = prev {
            err = (v - p0).abs();
            if err <= rel_tol * v.abs() {
                value = v;
                break;
            }
        }
        prev = Some(v);
        value = v;
        order *= 2;
    }
    if err > rel_tol * value.abs() && err.is_finite() {
        return Err(Error::Quadrature(format!(
            "line representation did not stabilize: last delta {err:.3e} at order 768"
        )));
    }
    let pref = pair_prefactor(x, kappa);
    Ok((constant * pref * value, constant.abs() * pref * err))
}

struct NestedLine<'a> {
    kappa: f64,
    x: &'a [f64],
    levels: &'a [LineLevel],
    /// endpoint exponent -4/kappa
    e_sing: f64,
    /// tail exponent 8/kappa - 2 at the compactified infinity
    alpha_tail: f64,
}

impl NestedLine<'_> {
    fn run(&self, order: usize) -> Result<f64> {
        let mut placed = Vec::with_capacity(self.levels.len());
        self.level(0, order, &mut placed)
    }

    fn level(&self, r: usize, order: usize, placed: &mut Vec<f64>) -> Result<f64> {
        let e = self.e_sing;
        let ee = 8.0 / self.kappa;
        match self.levels[r] {
            LineLevel::Compact { lo, hi } => {
                let (nodes, weights) = gauss_jacobi(order, e, e)?;
                let half = (hi - lo) / 2.0;
                let mid = (hi + lo) / 2.0;
                let jac = half.powf(2.0 * e + 1.0);
                let mut acc = 0.0;
                for (&t, &w) in nodes.iter().zip(&weights) {
                    let v = mid + half * t;
                    let mut g = 1.0;
                    for &xj in self.x {
                        if xj != lo && xj != hi {
                            g *= (v - xj).abs().powf(e);
                        }
                    }
                    for &vs in placed.iter() {
                        g *= (v - vs).abs().powf(ee);
                    }
                    let inner = if r + 1 < self.levels.len() {
                        placed.push(v);
                        let iv = self.level(r + 1, order, placed)?;
                        placed.pop();
                        iv
                    } else {
                        1.0
                    };
                    acc += w * g * inner;
                }
                Ok(acc * jac)
            }
            LineLevel::Tail { anchor, sign } => {
                // v = anchor + sign * s/(1-s); all non-tail factors become
                // [(|anchor - y|)(1-s) + s]^exponent up to the (1-s) powers
                // absorbed into the Jacobi weight s^e (1-s)^(8/k-2)
                let (nodes, weights) = gauss_jacobi(order, self.alpha_tail, e)?;
                let mut acc = 0.0;
                for (&t, &w) in nodes.iter().zip(&weights) {
                    let s = (t + 1.0) / 2.0;
                    let mut g = 1.0;
                    for &xj in self.x {
                        if xj != anchor {
                            let d = (anchor - xj).abs();
                            g *= (d * (1.0 - s) + s).powf(e);
                        }
                    }
                    for &vs in placed.iter() {
                        let d = sign * (anchor - vs);
                        debug_assert!(d > 0.0 || (anchor - vs).abs() > 0.0);
                        g *= ((anchor - vs).abs() * (1.0 - s) + s).powf(ee);
                    }
                    let inner = if r + 1 < self.levels.len() {
                        let v = anchor + sign * s / (1.0 - s);
                        placed.push(v);
                        let iv = self.level(r + 1, order, placed)?;
                        placed.pop();
                        iv
                    } else {
                        1.0
                    };
                    acc += w * g * inner;
                }
                // map (0,1) -> (-1,1) contributes ds = dt/2 with weight
                // (1-s)^alpha s^beta = ((1-t)/2)^alpha ((1+t)/2)^beta
                let jac = 0.5f64.powf(self.alpha_tail + e + 1.0);
                Ok(acc * jac)
            }
        }
    }
}

/// The screened two-variable weight with one link integrated out exactly:
/// for N = 2, the four-point function reduces to nu/C times a single loop
/// integral of this integrand, carrying the conjugate charge at the removed
/// link's closing point.  The surviving link must join adjacent boundary
/// points so that its Pochhammer loop encloses no other marked point (for
/// loops with marked points inside, the integral depends on the realization
/// of the contour, not just on which points it surrounds).  Returns the
/// positive boundary prefactor, the branched one-variable integrand
/// anchored between the surviving link's endpoints, and the loop.
pub fn reduced_integrand_n2(
    kappa: f64,
    beta: &LinkPattern,
    x: &[f64],
    removed: usize,
) -> Result<(f64, crate::contour::BranchedIntegrand, Path)> {
    if beta.n_links() != 2 {
        return Err(Error::domain("reduced integrand implemented for N = 2"));
    }
    validate_points(x, 2)?;
    let links = beta.links();
    let (_ra, rb) = links[removed];
    let (ka, kb) = links[1 - removed];
    if kb != ka + 1 {
        return Err(Error::domain(
            "surviving link must join adjacent boundary points",
        ));
    }
    let p = KappaParams::new(kappa)?;
    let two_h = 2.0 * p.h;
    let four_h = 4.0 * p.h;
    let b_idx = rb - 1; // 0-based index of the special point

    let mut pref = 1.0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            let expo = if i == b_idx || j == b_idx { -two_h } else { 2.0 / kappa };
            pref *= (x[j] - x[i]).powf(expo);
        }
    }

    let mut factors = Vec::with_capacity(4);
    for (i, &xi) in x.iter().enumerate() {
        let expo = if i == b_idx { four_h } else { -4.0 / kappa };
        factors.push(PowerFactor { base: Complex64::new(xi, 0.0), exponent: expo });
    }
    let anchor = Complex64::new((x[ka - 1] + x[ka]) / 2.0, 0.0);
    let f = crate::contour::BranchedIntegrand::new(factors, anchor)?;
    let gap = min_gap(x);
    let rho = gap / 6.0;
    let path = banded_pochhammer(
        Complex64::new(x[ka - 1], 0.0),
        Complex64::new(x[kb - 1], 0.0),
        rho,
        2.0 * rho,
    )?;
    Ok((pref, f, path))
}
