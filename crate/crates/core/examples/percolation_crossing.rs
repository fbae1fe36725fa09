//! Critical percolation crossing probabilities vs the Cardy prediction.
//!
//! Estimates the open-crossing probability between the boundary intervals
//! (x1,x2) and (x3,x4) for site percolation at p = 1/2 on a triangular
//! half-disk lattice, and compares it with the continuum Cardy value at the
//! configuration's cross-ratio.
//!
//! Run with: cargo run --release --example percolation_crossing [n_samples]

use multisle::boundary::{cross_ratio, BoundaryConfig};
use multisle::percolation::{cardy_crossing, percolation_crossing_mc};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(2000);
    let seed = 20260815;

    println!("critical site percolation, triangular half-disk, p = 1/2");
    println!("{n} samples per configuration, seed {seed}\n");
    println!(
        "{:<22} {:>8} {:>10} {:>10} {:>10} {:>8}",
        "configuration", "chi", "estimate", "stderr", "cardy", "dev/se"
    );

    for pts in [
        [0.0, 2.0, 3.0, 6.0],  // chi = 1/2: self-dual, crossing probability 1/2
        [0.0, 1.0, 2.0, 3.0],  // chi = 1/4
        [0.0, 1.0, 1.5, 9.0],  // chi larger: intervals nearly adjacent
    ] {
        let x = BoundaryConfig::new(pts.to_vec())?;
        let chi = cross_ratio(pts[0], pts[1], pts[2], pts[3])?;
        let mesh = (pts[1] - pts[0]) / 20.0;
        let radius = 10.0 * (pts[3] - pts[0]);
        let est = percolation_crossing_mc(&x, mesh, radius, n, seed)?;
        let cardy = cardy_crossing(chi)?;
        println!(
            "{:<22} {:>8.4} {:>10.4} {:>10.4} {:>10.4} {:>8.2}",
            format!("{pts:?}"),
            chi,
            est.estimate,
            est.stderr,
            cardy,
            (est.estimate - cardy) / est.stderr
        );
    }
    Ok(())
}
