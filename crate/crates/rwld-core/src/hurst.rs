//! Hurst-parameter bundle: the spectral and difference-form constants of the
//! fractional covariance space, plus the moving-average normalization
//! integral evaluated at construction.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::quad::{gamma, tanh_sinh};

/// Hurst index `H in (1/4, 1/2)` together with the derived constants of the
/// fractional space.
///
/// * `c1 = Gamma(2H+1) sin(pi H) / (2 pi)` scales the spectral form: the
///   inner product is `c1 int F(phi) conj(F(psi)) |xi|^{1-2H} dxi`, and with
///   this normalization `||1_{[0,x]}||^2 = |x|^{2H}` (the fractional
///   Brownian variance law).
/// * `c2` scales the equivalent difference form
///   `c2 iint [phi(x+y)-phi(x)][psi(x+y)-psi(x)] |y|^{2H-2} dx dy`.
///   Plancherel reduces the double integral to the spectral one times
///   `int |e^{iu}-1|^2 |u|^{2H-2} du = 4 Gamma(2H+1) sin(pi H) / (2H(1-2H))`,
///   which forces `c2 = H(1-2H)/2` exactly; the unit-indicator identity
///   `c2 (2/H + 4/(1-2H)) = 1` is asserted in tests.
/// * `mvn_integral` is `int_0^inf [(1+t)^{H-1/2} - t^{H-1/2}]^2 dt`,
///   evaluated to relative accuracy 1e-8 (singular head by double-
///   exponential quadrature, tail by the substitution `t -> 1/t`), and
///   `mvn_constant` the associated moving-average normalization
///   `sqrt(H) sqrt(1/2-H) / Gamma(H+1/2) * sqrt(mvn_integral + 1/(2H))`
///   from the Wiener-integral representation of fractional Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HurstParam {
    pub h: f64,
    pub c1: f64,
    pub c2: f64,
    pub mvn_integral: f64,
    pub mvn_constant: f64,
}

impl HurstParam {
    pub fn new(h: f64) -> Result<Self, CoreError> {
        if !(h > 0.25 && h < 0.5) {
            return Err(CoreError::InvalidParameter(format!(
                "Hurst index must lie in the open interval (1/4, 1/2), got {h}"
            )));
        }
        let c1 = gamma(2.0 * h + 1.0) * (std::f64::consts::PI * h).sin()
            / (2.0 * std::f64::consts::PI);
        let c2 = h * (1.0 - 2.0 * h) / 2.0;

        let kappa = h - 0.5;
        // head: integrand ~ t^{2H-1} at 0, integrable
        let head = tanh_sinh(
            |t| {
                let d = (1.0 + t).powf(kappa) - t.powf(kappa);
                d * d
            },
            0.0,
            1.0,
            1e-10,
        );
        // tail via t = 1/u: integrand u^{-1-2H} [(1+u)^kappa - 1]^2, smooth
        let tail = tanh_sinh(
            |u: f64| {
                let d = (1.0 + u).powf(kappa) - 1.0;
                u.powf(-1.0 - 2.0 * h) * d * d
            },
            0.0,
            1.0,
            1e-10,
        );
        let mvn_integral = head + tail;
        let mvn_constant = h.sqrt() * (0.5 - h).sqrt() / gamma(h + 0.5)
            * (mvn_integral + 0.5 / h).sqrt();

        Ok(HurstParam { h, c1, c2, mvn_integral, mvn_constant })
    }

    /// Exponent of the spectral weight `|xi|^{1-2H}`.
    #[inline]
    pub fn spectral_exponent(&self) -> f64 {
        1.0 - 2.0 * self.h
    }

    /// Exponent of the singular lag weight `|y|^{2H-2}`.
    #[inline]
    pub fn lag_exponent(&self) -> f64 {
        2.0 * self.h - 2.0
    }
}
