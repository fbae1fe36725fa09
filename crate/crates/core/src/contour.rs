//! Branch-tracked contour integration for the multivalued screening
//! integrands: piecewise paths, Pochhammer double-commutator loops, and
//! adaptive quadrature with continuous per-factor argument transport.
//!
//! Every multivalued piece of an integrand here is a linear factor
//! (z - w)^e.  Along a straight panel the factor's argument moves by less
//! than pi (a segment subtends less than a half-turn at any point off it),
//! so the principal logarithm of the endpoint ratio is the exact branch
//! update; arcs are split into quarter circles and handled the same way,
//! with the arc's own center updated exactly by i*dtheta.  The branch is
//! anchored by giving each factor the real logarithm ln|anchor - w| at the
//! anchor point, which makes the whole product real and positive there.

use crate::quad::{adaptive_gk, QuadOutcome};
use crate::{Error, Result};
use num_complex::Complex64;

/// One smooth piece of an integration path.
#[derive(Debug, Clone, Copy)]
pub enum PathPiece {
    Line { z0: Complex64, z1: Complex64 },
    /// Circular arc around `center`, counterclockwise iff `theta1 > theta0`.
    Arc { center: Complex64, radius: f64, theta0: f64, theta1: f64 },
}

impl PathPiece {
    pub fn point(&self, t: f64) -> Complex64 {
        match *self {
            PathPiece::Line { z0, z1 } => z0 + (z1 - z0) * t,
            PathPiece::Arc { center, radius, theta0, theta1 } => {
                let th = theta0 + (theta1 - theta0) * t;
                center + Complex64::from_polar(radius, th)
            }
        }
    }

    pub fn derivative(&self, t: f64) -> Complex64 {
        match *self {
            PathPiece::Line { z0, z1 } => z1 - z0,
            PathPiece::Arc { center: _, radius, theta0, theta1 } => {
                let th = theta0 + (theta1 - theta0) * t;
                Complex64::new(0.0, theta1 - theta0) * Complex64::from_polar(radius, th)
            }
        }
    }

    pub fn start(&self) -> Complex64 {
        self.point(0.0)
    }

    pub fn end(&self) -> Complex64 {
        self.point(1.0)
    }

    fn min_distance_to(&self, w: Complex64) -> f64 {
        match *self {
            PathPiece::Line { z0, z1 } => {
                let d = z1 - z0;
                let len2 = d.norm_sqr();
                if len2 == 0.0 {
                    return (w - z0).norm();
                }
                let t = ((w - z0).re * d.re + (w - z0).im * d.im) / len2;
                let t = t.clamp(0.0, 1.0);
                (w - (z0 + d * t)).norm()
            }
            PathPiece::Arc { center, radius, .. } => {
                // conservative: distance to the full circle
                ((w - center).norm() - radius).abs()
            }
        }
    }
}

/// A piecewise-smooth oriented path.
#[derive(Debug, Clone, Default)]
pub struct Path {
    pub pieces: Vec<PathPiece>,
}

impl Path {
    pub fn new(pieces: Vec<PathPiece>) -> Result<Self> {
        for w in pieces.windows(2) {
            if (w[0].end() - w[1].start()).norm() > 1e-9 * (1.0 + w[0].end().norm()) {
                return Err(Error::domain(format!(
                    "path pieces do not join: {} vs {}",
                    w[0].end(),
                    w[1].start()
                )));
            }
        }
        Ok(Path { pieces })
    }

    pub fn start(&self) -> Option<Complex64> {
        self.pieces.first().map(|p| p.start())
    }

    pub fn end(&self) -> Option<Complex64> {
        self.pieces.last().map(|p| p.end())
    }

    pub fn is_closed(&self) -> bool {
        match (self.start(), self.end()) {
            (Some(a), Some(b)) => (a - b).norm() < 1e-9 * (1.0 + a.norm()),
            _ => false,
        }
    }

    pub fn min_clearance(&self, points: &[Complex64]) -> f64 {
        let mut best = f64::INFINITY;
        for p in &self.pieces {
            for &w in points {
                best = best.min(p.min_distance_to(w));
            }
        }
        best
    }
}

/// The Pochhammer commutator loop around `a` and `b`: encircles b
/// negatively, a positively, b positively, a negatively, connected by
/// bridges offset from the segment [a, b].  With the integrand anchored
/// real-positive between the points, the loop integral of
/// (u-a)^(-4/k)(u-b)^(-4/k) equals 4 sin^2(4pi/k) B(1-4/k, 1-4/k).
pub fn make_pochhammer(a: Complex64, b: Complex64, clearance: f64) -> Result<Path> {
    let sep = (b - a).norm();
    if !(sep > 0.0) {
        return Err(Error::domain("degenerate Pochhammer endpoints"));
    }
    if !(clearance > 0.0 && clearance < sep / 4.0) {
        return Err(Error::domain(format!(
            "clearance {clearance} must lie in (0, |a-b|/4) = (0, {})",
            sep / 4.0
        )));
    }
    banded_pochhammer(a, b, clearance, 2.0 * clearance)
}

/// Pochhammer commutator with separate circle radius `rho` and bridge
/// height `band`, for stacking several disjoint contours.
pub fn banded_pochhammer(a: Complex64, b: Complex64, rho: f64, band: f64) -> Result<Path> {
    let e = (b - a) / (b - a).norm();
    if !(band >= rho) {
        return Err(Error::domain(format!("band {band} must be >= circle radius {rho}")));
    }
    // frame coordinates: x along e, y along i*e; frame point (s, h)
    let frame = |s: f64, h: f64| a + e * Complex64::new(s, h);
    let len = (b - a).norm();
    let base_angle = e.arg();
    let up = std::f64::consts::FRAC_PI_2 + base_angle;

    let mut pieces = Vec::with_capacity(28);
    let bridge = |from: f64, to: f64, pieces: &mut Vec<PathPiece>| {
        pieces.push(PathPiece::Line { z0: frame(from, rho), z1: frame(from, band) });
        pieces.push(PathPiece::Line { z0: frame(from, band), z1: frame(to, band) });
        pieces.push(PathPiece::Line { z0: frame(to, band), z1: frame(to, rho) });
    };
    let circle = |s: f64, ccw: bool, pieces: &mut Vec<PathPiece>| {
        let center = frame(s, 0.0);
        let sign = if ccw { 1.0 } else { -1.0 };
        for k in 0..4 {
            let t0 = up + sign * (k as f64) * std::f64::consts::FRAC_PI_2;
            let t1 = t0 + sign * std::f64::consts::FRAC_PI_2;
            pieces.push(PathPiece::Arc { center, radius: rho, theta0: t0, theta1: t1 });
        }
    };
    // commutator order: (b-, a+, b+, a-)
    bridge(0.0, len, &mut pieces);
    circle(len, false, &mut pieces);
    bridge(len, 0.0, &mut pieces);
    circle(0.0, true, &mut pieces);
    bridge(0.0, len, &mut pieces);
    circle(len, true, &mut pieces);
    bridge(len, 0.0, &mut pieces);
    circle(0.0, false, &mut pieces);
    Path::new(pieces)
}

/// A linear branch factor (z - base)^exponent.
#[derive(Debug, Clone, Copy)]
pub struct PowerFactor {
    pub base: Complex64,
    pub exponent: f64,
}

/// A product of branch-tracked power factors, an ordinary polynomial, and
/// a constant prefactor, with the branch fixed at `anchor` where each
/// factor's logarithm is real (so the product is real and positive there,
/// assuming a positive prefactor).
#[derive(Debug, Clone)]
pub struct BranchedIntegrand {
    pub factors: Vec<PowerFactor>,
    /// polynomial coefficients c_0 + c_1 u + ... (single-valued multiplier)
    pub poly: Vec<Complex64>,
    pub prefactor: Complex64,
    pub anchor: Complex64,
    /// override for the per-factor anchor logs (default: ln|anchor - base|)
    pub anchor_logs: Option<Vec<Complex64>>,
}

impl BranchedIntegrand {
    pub fn new(factors: Vec<PowerFactor>, anchor: Complex64) -> Result<Self> {
        for f in &factors {
            if (anchor - f.base).norm() == 0.0 {
                return Err(Error::domain(format!("anchor {anchor} sits on branch point {}", f.base)));
            }
        }
        Ok(BranchedIntegrand {
            factors,
            poly: vec![Complex64::new(1.0, 0.0)],
            prefactor: Complex64::new(1.0, 0.0),
            anchor,
            anchor_logs: None,
        })
    }

    pub fn with_poly(mut self, coeffs: Vec<Complex64>) -> Self {
        self.poly = coeffs;
        self
    }

    pub fn with_prefactor(mut self, c: Complex64) -> Self {
        self.prefactor = c;
        self
    }

    pub fn with_anchor_logs(mut self, logs: Vec<Complex64>) -> Self {
        assert_eq!(logs.len(), self.factors.len());
        self.anchor_logs = Some(logs);
        self
    }

    /// Per-factor logs at the anchor.
    pub fn start_logs(&self) -> Vec<Complex64> {
        match &self.anchor_logs {
            Some(l) => l.clone(),
            None => self
                .factors
                .iter()
                .map(|f| Complex64::new((self.anchor - f.base).norm().ln(), 0.0))
                .collect(),
        }
    }

    fn poly_at(&self, u: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.poly.iter().rev() {
            acc = acc * u + c;
        }
        acc
    }

    /// Value from explicit per-factor logs.
    pub fn value_from_logs(&self, u: Complex64, logs: &[Complex64]) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for (f, l) in self.factors.iter().zip(logs) {
            s += l * f.exponent;
        }
        self.prefactor * self.poly_at(u) * s.exp()
    }
}

/// Branch update for one factor along one piece, from the piece start to
/// parameter `t`.  Exact for a factor centered at the arc's own center;
/// otherwise principal-log ratios over sub-steps short enough that the
/// swept angle stays well under pi.
fn factor_delta(piece: &PathPiece, base: Complex64, t: f64) -> Complex64 {
    match *piece {
        PathPiece::Line { z0, z1 } => {
            let zt = z0 + (z1 - z0) * t;
            ((zt - base) / (z0 - base)).ln()
        }
        PathPiece::Arc { center, radius: _, theta0, theta1 } => {
            if (center - base).norm() == 0.0 {
                Complex64::new(0.0, (theta1 - theta0) * t)
            } else {
                // two half-steps: each spans at most an eighth turn
                let z0 = piece.point(0.0);
                let zh = piece.point(0.5 * t);
                let zt = piece.point(t);
                ((zh - base) / (z0 - base)).ln() + ((zt - base) / (zh - base)).ln()
            }
        }
    }
}

/// Transport all factor logs along a full piece.
fn transport_piece(piece: &PathPiece, factors: &[PowerFactor], logs: &mut [Complex64]) {
    for (f, l) in factors.iter().zip(logs.iter_mut()) {
        *l += factor_delta(piece, f.base, 1.0);
    }
}

/// Transport the integrand's branch from its anchor along a path prefix
/// and evaluate at the endpoint.
pub fn eval_branched(f: &BranchedIntegrand, via: &Path) -> Result<Complex64> {
    let mut logs = f.start_logs();
    let mut pos = f.anchor;
    for piece in &via.pieces {
        if (piece.start() - pos).norm() > 1e-9 * (1.0 + pos.norm()) {
            return Err(Error::domain(format!(
                "path prefix jumps from {pos} to {}",
                piece.start()
            )));
        }
        check_piece_clearance(piece, f)?;
        transport_piece(piece, &f.factors, &mut logs);
        pos = piece.end();
    }
    Ok(f.value_from_logs(pos, &logs))
}

fn check_piece_clearance(piece: &PathPiece, f: &BranchedIntegrand) -> Result<()> {
    for fac in &f.factors {
        let d = piece.min_distance_to(fac.base);
        let scale = 1.0 + fac.base.norm();
        if d < 1e-10 * scale {
            return Err(Error::domain(format!(
                "path passes within {d:.3e} of branch point {}",
                fac.base
            )));
        }
    }
    Ok(())
}

/// Integrate the branch-tracked integrand along `path`.  If the path does
/// not start at the anchor, the branch is transported there along a
/// straight connector first (which must clear all branch points).
pub fn integrate_path(
    f: &BranchedIntegrand,
    path: &Path,
    abs_tol: f64,
    rel_tol: f64,
    max_evals: usize,
) -> Result<QuadOutcome<Complex64>> {
    if path.pieces.is_empty() {
        return Err(Error::domain("empty path"));
    }
    let mut logs = f.start_logs();
    let start = path.start().unwrap();
    if (start - f.anchor).norm() > 1e-12 * (1.0 + start.norm()) {
        let connector = PathPiece::Line { z0: f.anchor, z1: start };
        check_piece_clearance(&connector, f)?;
        transport_piece(&connector, &f.factors, &mut logs);
    }
    let n_pieces = path.pieces.len();
    let piece_abs = abs_tol / n_pieces as f64;
    let piece_budget = (max_evals / n_pieces).max(450);
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    let mut evals = 0usize;
    for piece in &path.pieces {
        check_piece_clearance(piece, f)?;
        let start_logs = logs.clone();
        let g = |t: f64| {
            let z = piece.point(t);
            let mut node_logs = start_logs.clone();
            for (fac, l) in f.factors.iter().zip(node_logs.iter_mut()) {
                *l += factor_delta(piece, fac.base, t);
            }
            f.value_from_logs(z, &node_logs) * piece.derivative(t)
        };
        let out = adaptive_gk(g, 0.0, 1.0, piece_abs, rel_tol, piece_budget)?;
        total += out.value;
        err += out.error;
        evals += out.evals;
        transport_piece(piece, &f.factors, &mut logs);
    }
    Ok(QuadOutcome { value: total, error: err, evals })
}
