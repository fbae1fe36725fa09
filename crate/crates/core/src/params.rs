//! Constants derived from the SLE parameter kappa: conformal weight,
//! central charge, loop fugacity, the Coulomb-gas normalization constants
//! C and C-hat, and the background/screening charges.

use crate::special::gamma_ratio;
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Everything the rest of the crate needs to know about a given kappa.
#[derive(Debug, Clone)]
pub struct KappaParams {
    pub kappa: f64,
    /// Conformal weight h = (6-kappa)/(2 kappa).
    pub h: f64,
    /// Central charge (3 kappa - 8)(6 - kappa)/(2 kappa).
    pub central_charge: f64,
    /// Loop fugacity nu = -2 cos(4 pi / kappa).
    pub nu: f64,
    /// Normalization C(kappa); `None` exactly at kappa = 8/m where the
    /// defining gamma ratio degenerates.
    pub c_const: Option<f64>,
    /// C-hat = 4 sin^2(4 pi/kappa) C(kappa); same undefined set.
    pub c_hat: Option<f64>,
    /// q = exp(4 pi i / kappa).
    pub q_phase: Complex64,
    /// Background charge alpha_0 = (kappa - 4) / (4 sqrt(kappa)).
    pub alpha_0: f64,
    /// Screening charge alpha_minus = -2/sqrt(kappa).
    pub alpha_minus: f64,
    /// Dual screening charge alpha_plus = sqrt(kappa)/2.
    pub alpha_plus: f64,
    /// Boundary charge alpha_12 = 1/sqrt(kappa).
    pub alpha_12: f64,
}

/// If kappa is within `tol` of 8/m for a positive integer m, return m.
pub fn eight_over_integer(kappa: f64, tol: f64) -> Option<u64> {
    if kappa <= 0.0 {
        return None;
    }
    let m = (8.0 / kappa).round();
    if m >= 1.0 && (kappa - 8.0 / m).abs() < tol {
        Some(m as u64)
    } else {
        None
    }
}

/// The dual parameter kappa-hat with 1/kappa + 1/kappa-hat = 1/2, which
/// shares the fugacity nu (dilute/dense duality).
pub fn kappa_dual(kappa: f64) -> Result<f64> {
    let inv = 0.5 - 1.0 / kappa;
    if inv <= 0.0 {
        return Err(Error::domain(format!("no dual parameter for kappa = {kappa}")));
    }
    Ok(1.0 / inv)
}

/// C(kappa) in the reflected form
/// `Gamma(4/kappa)^2 / (4 pi sin(4 pi/kappa) Gamma(8/kappa - 1))`,
/// equivalent to the defining gamma ratio away from kappa = 8/m and giving
/// the continuous extension at the odd points kappa = 8/(2m+1) (for
/// example C(8/3) = -1/16).  Still singular at the even points kappa =
/// 8/(2m) where sin(4 pi/kappa) vanishes, and exactly zero at kappa = 8.
pub fn c_const_extended(kappa: f64) -> Result<f64> {
    if kappa <= 0.0 {
        return Err(Error::domain(format!("kappa = {kappa} out of range")));
    }
    let s = (4.0 * PI / kappa).sin();
    if s.abs() < 1e-12 {
        return Err(Error::domain(format!(
            "C(kappa) diverges at kappa = {kappa} (even 8/m point)"
        )));
    }
    let arg = 8.0 / kappa - 1.0;
    if arg <= 0.0 && (arg - arg.round()).abs() < 1e-12 {
        // Gamma pole in the denominator: C vanishes (kappa = 8).
        return Ok(0.0);
    }
    Ok(gamma_ratio(&[4.0 / kappa, 4.0 / kappa], &[arg])? / (4.0 * PI * s))
}

impl KappaParams {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::domain(format!("kappa must be positive, got {kappa}")));
        }
        let angle = 4.0 * PI / kappa;
        let nu = -2.0 * angle.cos();
        let defined = eight_over_integer(kappa, 1e-12).is_none();
        let c_const = if defined { Some(c_const_extended(kappa)?) } else { None };
        let c_hat = c_const.map(|c| 4.0 * angle.sin().powi(2) * c);
        let sk = kappa.sqrt();
        Ok(KappaParams {
            kappa,
            h: (6.0 - kappa) / (2.0 * kappa),
            central_charge: (3.0 * kappa - 8.0) * (6.0 - kappa) / (2.0 * kappa),
            nu,
            c_const,
            c_hat,
            q_phase: Complex64::new(0.0, angle).exp(),
            alpha_0: (kappa - 4.0) / (4.0 * sk),
            alpha_minus: -2.0 / sk,
            alpha_plus: sk / 2.0,
            alpha_12: 1.0 / sk,
        })
    }

    /// C(kappa), failing loudly where it is undefined.
    pub fn c_const_checked(&self) -> Result<f64> {
        self.c_const
            .ok_or_else(|| Error::domain(format!("C undefined at kappa = {}", self.kappa)))
    }

    pub fn c_hat_checked(&self) -> Result<f64> {
        self.c_hat
            .ok_or_else(|| Error::domain(format!("C-hat undefined at kappa = {}", self.kappa)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn special_kappa_values() {
        let p6 = KappaParams::new(6.0).unwrap();
        assert!(p6.h.abs() < 1e-15);
        assert_relative_eq!(p6.nu, 1.0, max_relative = 1e-14);
        assert!(p6.central_charge.abs() < 1e-14);

        let p4 = KappaParams::new(4.0).unwrap();
        assert_relative_eq!(p4.nu, 2.0, max_relative = 1e-14);
        assert_relative_eq!(p4.central_charge, 1.0, max_relative = 1e-14);
        assert!(p4.c_const.is_none(), "C undefined at kappa = 4 = 8/2");

        let p83 = KappaParams::new(8.0 / 3.0).unwrap();
        assert!(p83.nu.abs() < 1e-14);
        assert!(p83.c_const.is_none(), "flagged undefined at 8/m");
        // ... but the continuous extension exists and is -1/16
        assert_relative_eq!(c_const_extended(8.0 / 3.0).unwrap(), -0.0625, max_relative = 1e-13);
    }

    // mpmath reference values (tools/refvals.py)
    #[test]
    fn c_const_matches_reference() {
        let cases = [
            (3.3, -0.1216286809085900227749),
            (5.0, 0.1232247773490233324546),
            (7.2, 0.02429353509187759773691),
            (10.0 / 3.0, -0.128636343553764211711),
            (7.0, 0.03028053610795906494602),
            (3.0, -0.08116658256701768656438),
            (16.0 / 3.0, 0.09534497043772664850779),
            (6.0, 0.0628940755959066333833),
            (3.5, -0.1783716705549874030912),
            (2.2, -0.08780681149015029216607),
        ];
        for (k, want) in cases {
            let p = KappaParams::new(k).unwrap();
            assert_relative_eq!(p.c_const.unwrap(), want, max_relative = 1e-12);
        }
    }

    #[test]
    fn c_hat_matches_reference() {
        let cases = [
            (3.3, -0.1859072651403300897257),
            (5.0, 0.1702924540402120811421),
            (7.2, 0.09424398150103698236125),
            (16.0 / 3.0, 0.1906899408754532970156),
            (6.0, 0.1886822267877199001499),
        ];
        for (k, want) in cases {
            let p = KappaParams::new(k).unwrap();
            assert_relative_eq!(p.c_hat.unwrap(), want, max_relative = 1e-12);
        }
    }

    #[test]
    fn nu_matches_reference() {
        assert_relative_eq!(KappaParams::new(5.0).unwrap().nu, 1.618033988749894848205, max_relative = 1e-14);
        assert_relative_eq!(KappaParams::new(7.2).unwrap().nu, 0.3472963553338606977034, max_relative = 1e-13);
        assert_relative_eq!(KappaParams::new(2.2).unwrap().nu, -1.682507065662362337724, max_relative = 1e-13);
    }

    #[test]
    fn duality_shares_fugacity() {
        // 20 quasi-random kappa in (8/3, 4]
        let mut s = 13u64;
        for _ in 0..20 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let u = (s >> 11) as f64 / (1u64 << 53) as f64;
            let k = 8.0 / 3.0 + u * (4.0 - 8.0 / 3.0);
            let kd = kappa_dual(k).unwrap();
            assert!(kd >= 4.0 - 1e-9 && kd < 8.0 + 1e-9, "dual of {k} is {kd}");
            let nu1 = KappaParams::new(k).unwrap().nu;
            let nu2 = KappaParams::new(kd).unwrap().nu;
            assert_relative_eq!(nu1, nu2, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn eight_over_integer_detection() {
        assert_eq!(eight_over_integer(8.0, 1e-12), Some(1));
        assert_eq!(eight_over_integer(4.0, 1e-12), Some(2));
        assert_eq!(eight_over_integer(8.0 / 3.0, 1e-12), Some(3));
        assert_eq!(eight_over_integer(8.0 / 7.0, 1e-12), Some(7));
        assert_eq!(eight_over_integer(5.0, 1e-12), None);
        assert_eq!(eight_over_integer(3.9999, 1e-12), None);
        assert_eq!(eight_over_integer(3.9999, 1e-3), Some(2));
    }

    #[test]
    fn kappa_eight_limits() {
        // C(kappa)/nu(kappa) -> 1/(4 pi) as kappa -> 8, and C(8) = 0.
        assert_relative_eq!(c_const_extended(8.0).unwrap(), 0.0, epsilon = 1e-14);
        let k = 8.0 - 1e-6;
        let p = KappaParams::new(k).unwrap();
        assert_relative_eq!(p.c_const.unwrap() / p.nu, 1.0 / (4.0 * PI), max_relative = 1e-5);
        // nu'(8) = -pi/8: nu(kappa') ~ (pi/8)(8 - kappa')
        assert_relative_eq!(p.nu / 1e-6, PI / 8.0, max_relative = 1e-5);
    }

    #[test]
    fn defining_ratio_identity() {
        // nu/C = 4 sin^2(4pi/kappa) Gamma(1-4/kappa)^2 / Gamma(2-8/kappa)
        // (the closed form of the basic Pochhammer integral).
        for (k, want) in [
            (3.3, -12.92545621428789972396),
            (5.0, 13.13075197666582943521),
            (7.2, 14.29583442757070030581),
        ] {
            let p = KappaParams::new(k).unwrap();
            assert_relative_eq!(p.nu / p.c_const.unwrap(), want, max_relative = 1e-12);
            let direct = 4.0 * (4.0 * PI / k).sin().powi(2)
                * gamma_ratio(&[1.0 - 4.0 / k, 1.0 - 4.0 / k], &[2.0 - 8.0 / k]).unwrap();
            assert_relative_eq!(p.nu / p.c_const.unwrap(), direct, max_relative = 1e-12);
        }
    }
}
