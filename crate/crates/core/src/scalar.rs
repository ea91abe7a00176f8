//! Scalar prescribed-time stability models.
//!
//! * `lemma2`: `V' = -δ V / C(t)`
//! * `power`:  `V' = -δ V^p / C(t)`
//! * `lemma3`: `V' = δ₁ V^p - δ₂ V / C(t)`
//!
//! Closed forms use adaptive quadrature of `∫ dt / C`; simulations run the
//! shared RK4 integrator. Models with `p ≠ 1` are integrated in the variable
//! `U = V^{1-p}`, in which `lemma3` is linear and `power` is a quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{integrate_split, IntegratorConfig, Remainder, SplitState, SplitSystem, StepControl};
use crate::linalg::DenseMatrix;
use crate::quadrature;
use crate::regulator::{Regulator, RegulatorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarKind {
    Lemma2,
    Power,
    Lemma3,
}

/// Limit of `V(s) / C(s)` as `s → T⁻`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "value", content = "constant")]
pub enum PhiClass {
    Infinite,
    NonzeroConstant(f64),
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarModel {
    pub kind: ScalarKind,
    /// Decay rate of `lemma2` and `power`.
    pub delta: f64,
    /// Growth rate of `lemma3`.
    pub delta1: f64,
    /// Decay rate of `lemma3`.
    pub delta2: f64,
    pub p: f64,
    pub regulator: Regulator,
    pub v0: f64,
}

/// Numeric solution of a scalar model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarTrajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `ln V`, exact where `values` underflow; `-inf` for `V = 0`.
    pub ln_values: Vec<f64>,
    pub steps: usize,
}

impl ScalarModel {
    pub fn lemma2(regulator: Regulator, delta: f64, v0: f64) -> Result<Self> {
        let m = Self { kind: ScalarKind::Lemma2, delta, delta1: 0.0, delta2: 0.0, p: 1.0, regulator, v0 };
        m.validate()?;
        Ok(m)
    }

    pub fn power(regulator: Regulator, delta: f64, p: f64, v0: f64) -> Result<Self> {
        let m = Self { kind: ScalarKind::Power, delta, delta1: 0.0, delta2: 0.0, p, regulator, v0 };
        m.validate()?;
        Ok(m)
    }

    pub fn lemma3(regulator: Regulator, delta1: f64, delta2: f64, p: f64, v0: f64) -> Result<Self> {
        let m = Self { kind: ScalarKind::Lemma3, delta: 0.0, delta1, delta2, p, regulator, v0 };
        m.validate()?;
        Ok(m)
    }

    /// Parameter checks. Power regulators with `ℓ < 1` are accepted so that
    /// non-diverging gains can be studied.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameters(m));
        let reg = self.regulator;
        let shape = match reg.kind {
            RegulatorKind::Power => Regulator::power_any(reg.horizon, reg.ell.unwrap_or(f64::NAN)).map(|_| ()),
            _ => reg.validate(),
        };
        shape?;
        if !(self.v0.is_finite() && self.v0 >= 0.0) {
            return bad(format!("V0 must be finite and nonnegative, got {}", self.v0));
        }
        if !(self.p.is_finite() && self.p > 0.0) {
            return bad(format!("p must be positive, got {}", self.p));
        }
        match self.kind {
            ScalarKind::Lemma2 | ScalarKind::Power => {
                if !(self.delta.is_finite() && self.delta > 0.0) {
                    return bad(format!("delta must be positive, got {}", self.delta));
                }
                if self.kind == ScalarKind::Lemma2 && self.p != 1.0 {
                    return bad("lemma2 has p = 1".into());
                }
            }
            ScalarKind::Lemma3 => {
                if !(self.delta1.is_finite() && self.delta1 >= 0.0) {
                    return bad(format!("delta1 must be nonnegative, got {}", self.delta1));
                }
                if !(self.delta2.is_finite() && self.delta2 > 0.0) {
                    return bad(format!("delta2 must be positive, got {}", self.delta2));
                }
                let c0 = reg.initial_value();
                if self.p == 1.0 && self.delta2 <= self.delta1 * c0 {
                    return bad(format!(
                        "p = 1 requires delta2 > delta1 * C(0) = {}, got {}",
                        self.delta1 * c0,
                        self.delta2
                    ));
                }
            }
        }
        Ok(())
    }

    fn horizon(&self) -> f64 {
        self.regulator.horizon
    }

    /// Exact `V(s)`.
    pub fn closed_form(&self, s: f64) -> Result<f64> {
        self.closed_form_ln(s).map(f64::exp)
    }

    /// Exact `ln V(s)`; `-inf` when `V(s) = 0`.
    pub fn closed_form_ln(&self, s: f64) -> Result<f64> {
        self.validate()?;
        if !(0.0..self.horizon()).contains(&s) {
            return Err(Error::TimeOutOfRange { t: s, horizon: self.horizon() });
        }
        if self.v0 == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        let ln_v0 = self.v0.ln();
        let p = self.p;
        match self.kind {
            ScalarKind::Lemma2 => Ok(ln_v0 - self.delta * self.regulator.numeric_integral_to(s)?),
            ScalarKind::Power if p == 1.0 => Ok(ln_v0 - self.delta * self.regulator.numeric_integral_to(s)?),
            ScalarKind::Power => {
                let u = self.v0.powf(1.0 - p) + (p - 1.0) * self.delta * self.regulator.numeric_integral_to(s)?;
                if u <= 0.0 {
                    // p < 1: V reached zero and stays there
                    Ok(f64::NEG_INFINITY)
                } else {
                    Ok(u.ln() / (1.0 - p))
                }
            }
            ScalarKind::Lemma3 if p == 1.0 => {
                Ok(ln_v0 + self.delta1 * s - self.delta2 * self.regulator.numeric_integral_to(s)?)
            }
            ScalarKind::Lemma3 => self.lemma3_ln(s),
        }
    }

    fn lemma3_ln(&self, s: f64) -> Result<f64> {
        let p = self.p;
        let u0 = self.v0.powf(1.0 - p);
        if s == 0.0 {
            return Ok(self.v0.ln());
        }
        let cum = CumulativeGain::new(&self.regulator, s)?;
        let i_s = cum.total();
        if p < 1.0 {
            // U(s) = U0 e^{-a I(s)} + (1-p) δ₁ ∫_0^s e^{-a (I(s) - I(t))} dt
            let a = (1.0 - p) * self.delta2;
            let homogeneous = u0.ln() - a * i_s;
            let ln_u = if self.delta1 == 0.0 {
                homogeneous
            } else {
                let j = cum.integrate_back(|gap| (-a * gap).exp())?;
                log_add(homogeneous, ((1.0 - p) * self.delta1 * j).ln())
            };
            Ok(ln_u / (1.0 - p))
        } else {
            // U(s) = e^{b I(s)} [U0 - (p-1) δ₁ ∫_0^s e^{-b I(t)} dt]
            let b = (p - 1.0) * self.delta2;
            let k = if self.delta1 == 0.0 { 0.0 } else { cum.integrate_forward(|i_t| (-b * i_t).exp())? };
            let bracket = u0 - (p - 1.0) * self.delta1 * k;
            if bracket <= 0.0 {
                return Err(Error::Blowup { t: s });
            }
            Ok(-(b * i_s + bracket.ln()) / (p - 1.0))
        }
    }

    /// Analytic class of `lim V(s)/C(s)` for power regulators.
    pub fn classify_phi(&self) -> Result<PhiClass> {
        self.validate()?;
        let reg = self.regulator;
        if reg.kind != RegulatorKind::Power {
            return Err(Error::UnsupportedRegulator(format!(
                "the limit class is only derived for power regulators, got {:?}",
                reg.kind
            )));
        }
        let ell = reg.ell.unwrap_or(1.0);
        let t_end = reg.horizon;
        if self.v0 == 0.0 {
            return Ok(PhiClass::Zero);
        }
        if ell < 1.0 {
            // ∫ dt/C converges, so V(T) > 0 while C(T) = 0
            return Ok(PhiClass::Infinite);
        }
        if ell > 1.0 {
            return Ok(PhiClass::Zero);
        }
        // ℓ = 1: V(s) behaves like K (T - s)^r with r = δ (lemma2) or δ₂
        let (rate, constant) = match self.kind {
            ScalarKind::Power => {
                return Err(Error::UnsupportedModel("the limit class is derived for lemma2 and lemma3 only".into()))
            }
            ScalarKind::Lemma2 => (self.delta, self.v0 / t_end.powf(self.delta)),
            ScalarKind::Lemma3 => (self.delta2, self.lemma3_unit_rate_constant()?),
        };
        Ok(if rate < 1.0 {
            PhiClass::Infinite
        } else if rate > 1.0 {
            PhiClass::Zero
        } else {
            PhiClass::NonzeroConstant(constant)
        })
    }

    /// `lim V/C` for `lemma3`, `C = T - t` and `δ₂ = 1`.
    fn lemma3_unit_rate_constant(&self) -> Result<f64> {
        let (p, d1, t_end) = (self.p, self.delta1, self.regulator.horizon);
        if p == 1.0 {
            return Ok(self.v0 * (d1 * t_end).exp() / t_end);
        }
        let u0 = self.v0.powf(1.0 - p);
        if p < 1.0 {
            let a = 1.0 - p;
            let k = u0 / t_end.powf(a) + (1.0 - p) * d1 * t_end.powf(1.0 - a) / (1.0 - a);
            Ok(k.powf(1.0 / (1.0 - p)))
        } else {
            let b = p - 1.0;
            let bracket = u0 - (p - 1.0) * d1 * t_end / (b + 1.0);
            if bracket <= 0.0 {
                return Err(Error::Blowup { t: t_end });
            }
            Ok(bracket.powf(-1.0 / (p - 1.0)) / t_end)
        }
    }

    /// Numeric solution on `[0, T - stop_gap]` with default step controls.
    pub fn simulate(&self, stop_gap: f64, samples: usize) -> Result<ScalarTrajectory> {
        let cfg = IntegratorConfig { stop_gap, samples, ..IntegratorConfig::for_horizon(self.horizon()) };
        self.simulate_with(&cfg)
    }

    pub fn simulate_with(&self, cfg: &IntegratorConfig) -> Result<ScalarTrajectory> {
        self.validate()?;
        cfg.validate(self.horizon())?;
        if self.v0 == 0.0 {
            let times = cfg.sample_times(self.horizon());
            let n = times.len();
            return Ok(ScalarTrajectory {
                times,
                values: vec![0.0; n],
                ln_values: vec![f64::NEG_INFINITY; n],
                steps: 0,
            });
        }
        let sys = ScalarSystem::new(self);
        let y0 = if sys.transformed { self.v0.powf(1.0 - self.p) } else { self.v0 };
        let run = integrate_split(&sys, SplitState::new(0.0, Vec::new(), vec![y0]), cfg).map_err(|f| f.error)?;
        let mut out = ScalarTrajectory { times: Vec::new(), values: Vec::new(), ln_values: Vec::new(), steps: run.steps };
        for st in &run.samples {
            let ln_y = if st.e_hat[0] > 0.0 { st.ln_kappa + st.e_hat[0].ln() } else { f64::NEG_INFINITY };
            let ln_v = if sys.transformed { ln_y / (1.0 - self.p) } else { ln_y };
            out.times.push(st.t);
            out.ln_values.push(ln_v);
            out.values.push(ln_v.exp());
        }
        Ok(out)
    }
}

/// `ln(e^x + e^y)`.
fn log_add(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x > y { (x, y) } else { (y, x) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// `I(t) = ∫_0^t dx / C(x)` on `[0, s]`, cached at geometric panel starts.
struct CumulativeGain<'a> {
    reg: &'a Regulator,
    /// Breakpoints as gaps `T - t`, decreasing from `T` to `T - s`.
    gaps: Vec<f64>,
    /// `I` at each breakpoint.
    cum: Vec<f64>,
}

impl<'a> CumulativeGain<'a> {
    fn new(reg: &'a Regulator, s: f64) -> Result<Self> {
        reg.check_time(s)?;
        let gaps = quadrature::geometric_gaps(reg.horizon - s, reg.horizon);
        let mut cum = vec![0.0];
        for w in gaps.windows(2) {
            let last = *cum.last().expect("nonempty");
            cum.push(last + reg.gap_integral(w[1], w[0]));
        }
        Ok(Self { reg, gaps, cum })
    }

    fn total(&self) -> f64 {
        *self.cum.last().expect("nonempty")
    }

    /// `I` at gap `u` inside panel `k`.
    fn at(&self, k: usize, u: f64) -> f64 {
        self.cum[k] + self.reg.gap_integral(u, self.gaps[k])
    }

    /// `∫_0^s φ(I(s) - I(t)) dt`, panels summed from the right end.
    fn integrate_back<F: Fn(f64) -> f64>(&self, phi: F) -> Result<f64> {
        let total = self.total();
        let mut acc = 0.0;
        for k in (0..self.gaps.len() - 1).rev() {
            let head = total - self.cum[k];
            let f = |u: f64| phi(head - self.reg.gap_integral(u, self.gaps[k]));
            acc += quadrature::integrate(f, self.gaps[k + 1], self.gaps[k], 1e-11, 1e-15 * acc);
        }
        finite(acc)
    }

    /// `∫_0^s φ(I(t)) dt`, panels summed from the left end.
    fn integrate_forward<F: Fn(f64) -> f64>(&self, phi: F) -> Result<f64> {
        let mut acc = 0.0;
        for k in 0..self.gaps.len() - 1 {
            let f = |u: f64| phi(self.at(k, u));
            acc += quadrature::integrate(f, self.gaps[k + 1], self.gaps[k], 1e-11, 1e-15 * acc);
        }
        finite(acc)
    }
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite)
    }
}

/// A scalar model in the integrator's split form, with an empty reference.
struct ScalarSystem {
    reg: Regulator,
    b: DenseMatrix,
    forcing: Forcing,
    /// State is `U = V^{1-p}` rather than `V`.
    transformed: bool,
    p: f64,
}

enum Forcing {
    /// `c · y`
    Linear(f64),
    /// `c`, independent of the state
    Constant(f64),
    /// `c · g(t)` with `g = 1/C`
    Gain(f64),
}

impl ScalarSystem {
    fn new(m: &ScalarModel) -> Self {
        let p = m.p;
        let (lin, forcing, transformed) = match m.kind {
            ScalarKind::Lemma2 => (-m.delta, Forcing::Linear(0.0), false),
            ScalarKind::Power if p == 1.0 => (-m.delta, Forcing::Linear(0.0), false),
            ScalarKind::Power => (0.0, Forcing::Gain(-(1.0 - p) * m.delta), true),
            ScalarKind::Lemma3 if p == 1.0 => (-m.delta2, Forcing::Linear(m.delta1), false),
            ScalarKind::Lemma3 => (-(1.0 - p) * m.delta2, Forcing::Constant((1.0 - p) * m.delta1), true),
        };
        Self { reg: m.regulator, b: DenseMatrix::from_diag(&[lin]), forcing, transformed, p }
    }
}

impl SplitSystem for ScalarSystem {
    fn regulator(&self) -> &Regulator {
        &self.reg
    }

    fn gain_scale(&self) -> f64 {
        1.0
    }

    fn b_ee(&self) -> &DenseMatrix {
        &self.b
    }

    fn b_re(&self) -> Option<&DenseMatrix> {
        None
    }

    fn remainder(&self, t: f64, _r: &[f64], e_hat: &[f64], ln_kappa: f64) -> Remainder {
        let (v, ln_scale) = match self.forcing {
            Forcing::Linear(c) => (c * e_hat[0], ln_kappa),
            Forcing::Constant(c) => (c, 0.0),
            Forcing::Gain(c) => (c * self.reg.gain(t).unwrap_or(f64::NAN), 0.0),
        };
        Remainder { r: Vec::new(), e: vec![v], ln_scale }
    }

    fn stiffness(&self, _state: &SplitState) -> f64 {
        match self.forcing {
            Forcing::Linear(c) => c.abs(),
            _ => 0.0,
        }
    }

    fn blowup_bound(&self) -> f64 {
        // U = V^{1-p} grows without bound as V → 0 when p > 1
        if self.transformed && self.p > 1.0 {
            f64::INFINITY
        } else {
            crate::integrator::BLOWUP_NORM
        }
    }

    fn after_step(&self, state: &mut SplitState) -> Result<StepControl> {
        if !self.transformed || state.e_hat[0] > 0.0 {
            return Ok(StepControl::Continue);
        }
        if self.p < 1.0 {
            // V reached zero; the right-hand side vanishes there
            state.e_hat[0] = 0.0;
            state.ln_kappa = f64::NEG_INFINITY;
            Ok(StepControl::Freeze)
        } else {
            Err(Error::Blowup { t: state.t })
        }
    }
}
