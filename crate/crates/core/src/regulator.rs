//! Time-varying regulators `C(t)` whose reciprocal scales the coupling
//! gain. All three kinds vanish (or have a diverging reciprocal) at the
//! prescribed time `T`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegulatorKind {
    /// `C(t) = (T - t)^ℓ`
    Power,
    /// `1/C(t) = (e^{aT} - 1) / (e^{aT} - e^{at})`
    ExpA,
    /// `1/C(t) = a e^{a(T-t)} / (e^{a(T-t)} - 1)`
    ExpB,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Divergence {
    Diverges,
    Converges,
}

/// A regulator with prescribed time `T`.
///
/// Power regulators with `0 < ℓ < 1` can be constructed through
/// [`Regulator::power_any`] for divergence studies; they fail
/// [`Regulator::validate`] and are refused by the network model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regulator {
    pub kind: RegulatorKind,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
}

impl Regulator {
    pub fn power(horizon: f64, ell: f64) -> Result<Self> {
        let r = Self::power_any(horizon, ell)?;
        r.validate()?;
        Ok(r)
    }

    pub fn power_any(horizon: f64, ell: f64) -> Result<Self> {
        let r = Self { kind: RegulatorKind::Power, horizon, ell: Some(ell), a: None };
        r.check_shape()?;
        Ok(r)
    }

    pub fn exp_a(horizon: f64, a: f64) -> Result<Self> {
        let r = Self { kind: RegulatorKind::ExpA, horizon, ell: None, a: Some(a) };
        r.validate()?;
        Ok(r)
    }

    pub fn exp_b(horizon: f64, a: f64) -> Result<Self> {
        let r = Self { kind: RegulatorKind::ExpB, horizon, ell: None, a: Some(a) };
        r.validate()?;
        Ok(r)
    }

    fn check_shape(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidParameters(format!("T must be positive, got {}", self.horizon)));
        }
        match self.kind {
            RegulatorKind::Power => match self.ell {
                Some(l) if l.is_finite() && l > 0.0 => Ok(()),
                other => Err(Error::InvalidParameters(format!("power regulator needs ell > 0, got {other:?}"))),
            },
            RegulatorKind::ExpA | RegulatorKind::ExpB => match self.a {
                Some(a) if a.is_finite() && a > 0.0 => Ok(()),
                other => Err(Error::InvalidParameters(format!("exponential regulator needs a > 0, got {other:?}"))),
            },
        }
    }

    /// Full admissibility: shape parameters valid and `ℓ ≥ 1` for power kind.
    pub fn validate(&self) -> Result<()> {
        self.check_shape()?;
        if self.kind == RegulatorKind::Power && self.ell() < 1.0 {
            return Err(Error::InvalidParameters(format!(
                "power regulator needs ell >= 1 for a diverging gain integral, got {}",
                self.ell()
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn ell(&self) -> f64 {
        self.ell.unwrap_or(1.0)
    }

    fn rate(&self) -> f64 {
        self.a.unwrap_or(1.0)
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        if t >= 0.0 && t < self.horizon {
            Ok(())
        } else {
            Err(Error::TimeOutOfRange { t, horizon: self.horizon })
        }
    }

    /// `C(t)` for `t ∈ [0, T)`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.value_at_gap(self.horizon - t))
    }

    /// `C(0)`.
    pub fn initial_value(&self) -> f64 {
        self.value_at_gap(self.horizon)
    }

    /// `C` as a function of the remaining time `u = T - t > 0`.
    pub(crate) fn value_at_gap(&self, u: f64) -> f64 {
        let a = self.rate();
        match self.kind {
            RegulatorKind::Power => u.powf(self.ell()),
            RegulatorKind::ExpA => (-a * u).exp_m1() / (-a * self.horizon).exp_m1(),
            RegulatorKind::ExpB => -(-a * u).exp_m1() / a,
        }
    }

    /// `1/C(t)`; finite for `t < T`.
    pub fn gain(&self, t: f64) -> Result<f64> {
        self.eval(t).map(f64::recip)
    }

    pub fn classify_divergence(&self) -> Divergence {
        match self.kind {
            RegulatorKind::Power if self.ell() < 1.0 => Divergence::Converges,
            _ => Divergence::Diverges,
        }
    }

    /// `∫_{t0}^{t1} dt / C(t)` from the closed-form antiderivative, written
    /// to avoid cancellation when `t1 - t0` is small relative to `T - t1`.
    pub fn gain_integral(&self, t0: f64, t1: f64) -> Result<f64> {
        self.check_time(t0)?;
        self.check_time(t1)?;
        if t1 < t0 {
            return self.gain_integral(t1, t0).map(|v| -v);
        }
        let u0 = self.horizon - t0;
        let u1 = self.horizon - t1;
        // ln(u0/u1) without forming the ratio of close numbers
        let log_ratio = ((t1 - t0) / u1).ln_1p();
        let a = self.rate();
        Ok(match self.kind {
            RegulatorKind::Power => {
                let ell = self.ell();
                if ell == 1.0 {
                    log_ratio
                } else {
                    // (u1^{1-ℓ} - u0^{1-ℓ}) / (ℓ - 1)
                    u0.powf(1.0 - ell) * ((ell - 1.0) * log_ratio).exp_m1() / (ell - 1.0)
                }
            }
            RegulatorKind::ExpA => {
                let k = -(-a * self.horizon).exp_m1();
                k * log_expm1_ratio(a, u0, u1) / a
            }
            RegulatorKind::ExpB => log_expm1_ratio(a, u0, u1),
        })
    }

    /// `∫_0^s dt / C(t)` by adaptive quadrature, independent of the
    /// closed-form antiderivative. Relative accuracy is about `1e-12`.
    pub fn numeric_integral_to(&self, s: f64) -> Result<f64> {
        self.numeric_integral(0.0, s)
    }

    /// `∫_a^b dt / C(t)` by adaptive quadrature, `0 ≤ a ≤ b < T`.
    pub fn numeric_integral(&self, a: f64, b: f64) -> Result<f64> {
        self.check_time(a)?;
        self.check_time(b)?;
        if b <= a {
            return if a == b { Ok(0.0) } else { self.numeric_integral(b, a).map(|v| -v) };
        }
        Ok(self.gap_integral(self.horizon - b, self.horizon - a))
    }

    /// `∫ du / C(T - u)` over gaps `u ∈ [lo, hi]`.
    pub(crate) fn gap_integral(&self, lo: f64, hi: f64) -> f64 {
        quadrature::integrate_gap(|u| 1.0 / self.value_at_gap(u), lo, hi, 1e-13)
    }
}

/// `ln(expm1(a u0) / expm1(a u1))` for `u0 ≥ u1 > 0`.
fn log_expm1_ratio(a: f64, u0: f64, u1: f64) -> f64 {
    let (x0, x1) = (a * u0, a * u1);
    if x1 > 30.0 {
        // expm1(x) ≈ e^x (1 - e^{-x}); keep the small correction
        (x0 - x1) + (-(-x0).exp()).ln_1p() - (-(-x1).exp()).ln_1p()
    } else {
        (x0.exp_m1() / x1.exp_m1()).ln()
    }
}
