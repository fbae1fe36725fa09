//! Critical site percolation on a triangular half-disk lattice.
//!
//! `percolation_crossing_mc` estimates the probability of an open crossing
//! between the boundary intervals `(x1, x2)` and `(x3, x4)` for site
//! percolation at p = 1/2 on a triangular lattice filling a half-disk that
//! is large compared to the marked points.  The scaling limit of this
//! probability is the Cardy value `cardy_crossing(chi)` at the cross-ratio
//! `chi` of the four points, which serves as the continuum reference for the
//! Monte Carlo estimate and as the percolation side of the SLE(6)
//! hitting-order comparison.

use crate::boundary::{cross_ratio, BoundaryConfig};
use crate::quad::integrate_jacobi_adaptive;
use crate::stats::McEstimate;
use crate::{Error, Result};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

/// Cardy crossing probability at cross-ratio `chi` in (0, 1): the
/// regularized incomplete Beta integral
///
///   I_chi(1/3, 1/3) = B(1/3,1/3)^{-1} int_0^chi u^{-2/3} (1-u)^{-2/3} du,
///
/// evaluated with the crate's Gauss-Jacobi rules.  `chi` is the cross-ratio
/// `((x2-x1)(x4-x3)) / ((x3-x1)(x4-x2))` of the crossing configuration; the
/// value increases from 0 to 1 as the two marked intervals approach each
/// other and equals 1/2 at the self-dual point `chi = 1/2`.
pub fn cardy_crossing(chi: f64) -> Result<f64> {
    if !(chi > 0.0 && chi < 1.0) {
        return Err(Error::domain(format!(
            "cross-ratio must lie in (0, 1), got {chi}"
        )));
    }
    // I_chi(a, a) = 1 - I_{1-chi}(a, a): integrate over the shorter segment
    // so the non-singular endpoint stays well away from the u = 1 spike.
    if chi > 0.5 {
        return Ok(1.0 - cardy_crossing(1.0 - chi)?);
    }
    let beta_13 = integrate_jacobi_adaptive(|_| 1.0, 0.0, 1.0, -2.0 / 3.0, -2.0 / 3.0, 1e-13)?;
    let partial = integrate_jacobi_adaptive(
        |u| (1.0 - u).powf(-2.0 / 3.0),
        0.0,
        chi,
        0.0,
        -2.0 / 3.0,
        1e-13,
    )?;
    Ok(partial / beta_13)
}

/// Cardy crossing probability for the marked boundary configuration itself.
pub fn cardy_crossing_for(x: &BoundaryConfig) -> Result<f64> {
    let p = x.points();
    if p.len() != 4 {
        return Err(Error::domain("Cardy crossing needs exactly 4 points"));
    }
    cardy_crossing(cross_ratio(p[0], p[1], p[2], p[3])?)
}

/// Triangular lattice restricted to a half-disk, stored row by row.
///
/// Row `k` sits at height `k * mesh * sqrt(3)/2`; odd rows are shifted by
/// half a mesh so each interior site has six neighbours.  Row 0 lies on the
/// real axis and carries the source and target intervals.
struct HalfDiskLattice {
    row_min: Vec<i64>,
    row_offset: Vec<usize>,
    n_sites: usize,
    source: (usize, usize),
    target: (usize, usize),
}

impl HalfDiskLattice {
    fn build(x: &[f64; 4], mesh: f64, radius: f64) -> Result<Self> {
        let cx = 0.5 * (x[0] + x[3]);
        let row_h = mesh * 3f64.sqrt() / 2.0;
        let n_rows = (radius / row_h).floor() as usize + 1;
        let mut row_min = Vec::with_capacity(n_rows);
        let mut row_offset = Vec::with_capacity(n_rows + 1);
        let mut total = 0usize;
        for k in 0..n_rows {
            let y = k as f64 * row_h;
            let half_w = (radius * radius - y * y).max(0.0).sqrt();
            let shift = 0.5 * (k % 2) as f64;
            // positions cx + (i + shift) * mesh with |position - cx| <= half_w
            let i_min = ((-half_w / mesh) - shift).ceil() as i64;
            let i_max = ((half_w / mesh) - shift).floor() as i64;
            if i_max < i_min {
                return Err(Error::domain("half-disk radius too small for the mesh"));
            }
            row_min.push(i_min);
            row_offset.push(total);
            total += (i_max - i_min + 1) as usize;
        }
        row_offset.push(total);

        // bottom-row index windows for the two marked intervals (strict
        // interior so the marked points themselves stay neutral)
        let window = |a: f64, b: f64| -> Result<(usize, usize)> {
            let lo = ((a - cx) / mesh).floor() as i64 + 1;
            let hi = ((b - cx) / mesh).ceil() as i64 - 1;
            if hi < lo {
                return Err(Error::domain(format!(
                    "interval ({a}, {b}) contains no lattice sites at mesh {mesh}"
                )));
            }
            let base = row_min[0];
            Ok(((lo - base) as usize, (hi - base) as usize))
        };
        if total > u32::MAX as usize {
            return Err(Error::domain(
                "lattice too large: more than 2^32 sites; coarsen the mesh",
            ));
        }
        let source = window(x[0], x[1])?;
        let target = window(x[2], x[3])?;
        Ok(HalfDiskLattice {
            row_min,
            row_offset,
            n_sites: total,
            source,
            target,
        })
    }

    fn n_rows(&self) -> usize {
        self.row_min.len()
    }

    #[inline]
    fn row_len(&self, k: usize) -> usize {
        self.row_offset[k + 1] - self.row_offset[k]
    }

    /// One percolation sample: open each site with probability 1/2 and run a
    /// breadth-first search through open sites from the source window,
    /// reporting whether it reaches the target window.
    fn crossing_sample(
        &self,
        rng: &mut ChaCha12Rng,
        open: &mut Vec<u64>,
        seen: &mut Vec<u64>,
        queue: &mut Vec<u32>,
    ) -> bool {
        let words = self.n_sites.div_ceil(64);
        open.clear();
        open.extend((0..words).map(|_| rng.next_u64()));
        seen.clear();
        seen.resize(words, 0);
        queue.clear();

        let is_open = |open: &[u64], s: usize| open[s >> 6] >> (s & 63) & 1 == 1;
        let (s_lo, s_hi) = self.source;
        let (t_lo, t_hi) = self.target;
        for s in s_lo..=s_hi {
            if is_open(open, s) {
                seen[s >> 6] |= 1 << (s & 63);
                queue.push(s as u32);
            }
        }
        let mut head = 0usize;
        while head < queue.len() {
            let s = queue[head] as usize;
            head += 1;
            // row index by binary search over the offsets
            let k = match self.row_offset.binary_search(&s) {
                Ok(k) => k,
                Err(k) => k - 1,
            };
            let i = s - self.row_offset[k];
            if k == 0 && (t_lo..=t_hi).contains(&i) {
                return true;
            }
            let delta = (k % 2) as i64;
            let gi = self.row_min[k] + i as i64; // global column index
            let mut push = |lat: &Self, k2: usize, g2: i64| {
                if k2 >= lat.n_rows() {
                    return false;
                }
                let j = g2 - lat.row_min[k2];
                if j < 0 || j as usize >= lat.row_len(k2) {
                    return false;
                }
                let s2 = lat.row_offset[k2] + j as usize;
                if is_open(open, s2) && seen[s2 >> 6] >> (s2 & 63) & 1 == 0 {
                    seen[s2 >> 6] |= 1 << (s2 & 63);
                    queue.push(s2 as u32);
                    if k2 == 0 {
                        let t = s2 - lat.row_offset[0];
                        return (t_lo..=t_hi).contains(&t);
                    }
                }
                false
            };
            let mut hit = false;
            hit |= push(self, k, gi - 1);
            hit |= push(self, k, gi + 1);
            if k + 1 < self.n_rows() {
                hit |= push(self, k + 1, gi - 1 + delta);
                hit |= push(self, k + 1, gi + delta);
            }
            if k > 0 {
                hit |= push(self, k - 1, gi - 1 + delta);
                hit |= push(self, k - 1, gi + delta);
            }
            if hit {
                return true;
            }
        }
        false
    }
}

/// Monte Carlo estimate of the open-crossing probability between `(x1, x2)`
/// and `(x3, x4)` for critical site percolation on the triangular lattice.
///
/// Requirements: `x` holds exactly four points, `mesh <= (x2 - x1) / 20`,
/// and `radius >= 10 * (x4 - x1)` so the half-disk truncation bias is far
/// below the statistical error.  Samples use independent ChaCha streams
/// keyed by `(seed, sample index)`, so the estimate is independent of the
/// parallel execution order.
pub fn percolation_crossing_mc(
    x: &BoundaryConfig,
    mesh: f64,
    radius: f64,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let p = x.points();
    if p.len() != 4 {
        return Err(Error::domain("percolation crossing needs exactly 4 points"));
    }
    let pts = [p[0], p[1], p[2], p[3]];
    if !(mesh > 0.0) {
        return Err(Error::domain("mesh must be positive"));
    }
    if mesh > (pts[1] - pts[0]) / 20.0 {
        return Err(Error::domain(format!(
            "mesh {mesh} too coarse: must be at most (x2 - x1)/20 = {}",
            (pts[1] - pts[0]) / 20.0
        )));
    }
    if radius < 10.0 * (pts[3] - pts[0]) {
        return Err(Error::domain(format!(
            "radius {radius} too small: must be at least 10 (x4 - x1) = {}",
            10.0 * (pts[3] - pts[0])
        )));
    }
    if n_samples == 0 {
        return Err(Error::domain("need at least one sample"));
    }
    let lattice = HalfDiskLattice::build(&pts, mesh, radius)?;

    let hits = (0..n_samples)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new(), Vec::new()),
            |(open, seen, queue), idx| {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                rng.set_stream(idx as u64);
                usize::from(lattice.crossing_sample(&mut rng, open, seen, queue))
            },
        )
        .sum::<usize>();
    McEstimate::from_hits(hits, n_samples)
}
