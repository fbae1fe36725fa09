//! Boundary configurations: ordered marked points on the real line, the
//! cross-ratio, and the boundary Poisson kernel of the half-plane.

use crate::{Error, Result};

/// Strictly increasing marked points x_1 < ... < x_{2N} on the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConfig {
    points: Vec<f64>,
}

impl BoundaryConfig {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 || points.len() % 2 != 0 {
            return Err(Error::domain(format!(
                "need an even number (>= 2) of boundary points, got {}",
                points.len()
            )));
        }
        if points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::domain("boundary points must be strictly increasing"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::domain("boundary points must be finite"));
        }
        Ok(BoundaryConfig { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of marked points 2N.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires at least two points
    }

    /// N, the number of links/curves.
    pub fn n_links(&self) -> usize {
        self.points.len() / 2
    }

    /// 1-based access matching the mathematical indexing x_i.
    pub fn x(&self, i: usize) -> f64 {
        self.points[i - 1]
    }

    pub fn min_gap(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn span(&self) -> f64 {
        self.points[self.points.len() - 1] - self.points[0]
    }

    /// Apply a monotone map pointwise (caller promises monotonicity).
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        BoundaryConfig::new(self.points.iter().map(|&p| f(p)).collect())
    }
}

/// Cross-ratio chi = (x2-x1)(x4-x3) / ((x3-x1)(x4-x2)) in (0,1) for
/// ordered points.
pub fn cross_ratio(x1: f64, x2: f64, x3: f64, x4: f64) -> Result<f64> {
    if !(x1 < x2 && x2 < x3 && x3 < x4) {
        return Err(Error::domain(format!(
            "cross-ratio needs x1<x2<x3<x4, got ({x1},{x2},{x3},{x4})"
        )));
    }
    Ok((x2 - x1) * (x4 - x3) / ((x3 - x1) * (x4 - x2)))
}

/// Boundary Poisson kernel of the upper half-plane, H(H; x, y) = |y-x|^-2.
pub fn half_plane_poisson(x: f64, y: f64) -> Result<f64> {
    if x == y {
        return Err(Error::domain("Poisson kernel needs distinct points"));
    }
    Ok((y - x).powi(-2))
}
