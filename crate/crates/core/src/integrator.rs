//! Fixed-law RK4 integration toward the prescribed time.
//!
//! Systems are split into a reference part `r` and a deviation part `e`,
//!
//! ```text
//! r' = f_r(t, r, e) + g(t) B_re e
//! e' = f_e(t, r, e) + g(t) B_ee e,        g(t) = k / C(t),
//! ```
//!
//! with the deviation stored as `e = κ ê`, `max|ê| = 1`, and `ln κ` kept
//! separately so that deviations far below the smallest double stay
//! representable. The default scheme is a Lawson (integrating-factor) RK4:
//! the singular linear part is propagated exactly through matrix
//! exponentials of `∫ g`, and only the remainder is sampled by RK4 stages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expm, expm_log_scaled, DenseMatrix};
use crate::regulator::Regulator;

/// State norm beyond which a run is declared divergent.
pub const BLOWUP_NORM: f64 = 1e12;
/// Smallest admissible step.
pub const MIN_STEP: f64 = 1e-15;
/// Step bound relative to the stiffness of the non-linear remainder.
const NONLINEAR_CFL: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Exact propagation of the coupling, RK4 for the remainder.
    #[default]
    Lawson,
    /// Plain RK4 on the whole right-hand side.
    Classical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    /// Integration halts at `T - stop_gap`.
    pub stop_gap: f64,
    /// Upper bound on every step.
    pub step_cap: f64,
    /// Steps never exceed `shrink_factor · (T - t)`.
    pub shrink_factor: f64,
    /// Number of samples, geometrically clustered toward `T`.
    pub samples: usize,
    /// Extra sample instants merged into the geometric grid.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probe_times: Vec<f64>,
    #[serde(default)]
    pub scheme: Scheme,
}

impl IntegratorConfig {
    /// `stop_gap = 1e-6 T`, `step_cap = 1e-3 T`, `shrink_factor = 0.05`,
    /// 200 samples.
    pub fn for_horizon(horizon: f64) -> Self {
        Self {
            stop_gap: 1e-6 * horizon,
            step_cap: 1e-3 * horizon,
            shrink_factor: 0.05,
            samples: 200,
            probe_times: Vec::new(),
            scheme: Scheme::Lawson,
        }
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameters(m));
        if !(self.stop_gap > 0.0 && self.stop_gap < horizon) {
            return bad(format!("stop_gap must lie in (0, T), got {}", self.stop_gap));
        }
        if !(self.step_cap > 0.0 && self.step_cap.is_finite()) {
            return bad(format!("step_cap must be positive, got {}", self.step_cap));
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return bad(format!("shrink_factor must lie in (0, 1), got {}", self.shrink_factor));
        }
        if self.samples < 2 {
            return bad(format!("at least 2 samples are required, got {}", self.samples));
        }
        let end = horizon - self.stop_gap;
        if let Some(p) = self.probe_times.iter().find(|&&p| !(p > 0.0 && p < end)) {
            return bad(format!("probe time {p} outside (0, T - stop_gap)"));
        }
        Ok(())
    }

    /// Sample instants `T - T (stop_gap/T)^{k/(S-1)}`, `k = 0..S-1`, merged
    /// with the probe times. The first is 0, the last `T - stop_gap`.
    pub fn sample_times(&self, horizon: f64) -> Vec<f64> {
        let s = self.samples.max(2);
        let ratio = self.stop_gap / horizon;
        let mut times: Vec<f64> = (0..s)
            .map(|k| {
                if k == 0 {
                    0.0
                } else if k == s - 1 {
                    horizon - self.stop_gap
                } else {
                    horizon - horizon * ratio.powf(k as f64 / (s - 1) as f64)
                }
            })
            .collect();
        times.extend(self.probe_times.iter().copied());
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }
}

/// Integration state in log-scaled deviation coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitState {
    pub t: f64,
    pub r: Vec<f64>,
    /// Deviation direction, `max|ê| = 1` (all zero when `ln κ = -∞`).
    pub e_hat: Vec<f64>,
    pub ln_kappa: f64,
}

impl SplitState {
    pub fn new(t: f64, r: Vec<f64>, e: Vec<f64>) -> Self {
        let mut s = Self { t, r, e_hat: e, ln_kappa: 0.0 };
        s.renormalize();
        s
    }

    pub fn renormalize(&mut self) {
        let m = self.e_hat.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if m == 0.0 || self.ln_kappa == f64::NEG_INFINITY {
            self.e_hat.iter_mut().for_each(|v| *v = 0.0);
            self.ln_kappa = f64::NEG_INFINITY;
        } else {
            self.e_hat.iter_mut().for_each(|v| *v /= m);
            self.ln_kappa += m.ln();
        }
    }

    /// The deviation `κ ê` in ordinary floating point (may underflow to 0).
    pub fn deviation(&self) -> Vec<f64> {
        let k = self.ln_kappa.exp();
        self.e_hat.iter().map(|v| v * k).collect()
    }

    fn is_finite(&self) -> bool {
        self.r.iter().chain(&self.e_hat).all(|v| v.is_finite()) && !self.ln_kappa.is_nan() && self.ln_kappa < f64::INFINITY
    }

    fn exceeds(&self, bound: f64) -> bool {
        let rmax = self.r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        rmax > bound || self.ln_kappa > bound.ln()
    }
}

/// What to do after an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepControl {
    Continue,
    /// The state has reached an absorbing value and is held from now on.
    Freeze,
}

/// Remainder terms of the split form: `f_r`, and `f_e = e^{ln_scale} e`.
#[derive(Debug, Clone, PartialEq)]
pub struct Remainder {
    pub r: Vec<f64>,
    pub e: Vec<f64>,
    pub ln_scale: f64,
}

/// A system in the split form described in the module documentation.
pub trait SplitSystem {
    fn regulator(&self) -> &Regulator;
    /// The constant `k` in `g(t) = k / C(t)`.
    fn gain_scale(&self) -> f64;
    fn b_ee(&self) -> &DenseMatrix;
    fn b_re(&self) -> Option<&DenseMatrix>;
    /// `f_r` and `f_e` at the state `(r, e^{ln_kappa} ê)`.
    fn remainder(&self, t: f64, r: &[f64], e_hat: &[f64], ln_kappa: f64) -> Remainder;
    /// Lipschitz-type scale of the remainder, used to bound the step.
    fn stiffness(&self, _state: &SplitState) -> f64 {
        0.0
    }
    /// Norm beyond which the run counts as divergent.
    fn blowup_bound(&self) -> f64 {
        BLOWUP_NORM
    }
    /// Hook run after every accepted step.
    fn after_step(&self, _state: &mut SplitState) -> Result<StepControl> {
        Ok(StepControl::Continue)
    }
}

/// Samples of a finished run.
#[derive(Debug, Clone)]
pub struct SplitRun {
    pub samples: Vec<SplitState>,
    pub steps: usize,
}

/// A failed run with the samples gathered before the failure.
#[derive(Debug, Clone)]
pub struct SplitFailure {
    pub error: Error,
    pub partial: Vec<SplitState>,
}

/// Integrates `sys` from `init` to `T - stop_gap`.
pub fn integrate_split<S: SplitSystem>(
    sys: &S,
    init: SplitState,
    cfg: &IntegratorConfig,
) -> std::result::Result<SplitRun, SplitFailure> {
    let horizon = sys.regulator().horizon();
    let fail = |error, partial| Err(SplitFailure { error, partial });
    if let Err(e) = cfg.validate(horizon) {
        return fail(e, Vec::new());
    }
    let times = cfg.sample_times(horizon);
    let mut state = init;
    state.renormalize();
    if !state.is_finite() {
        return fail(Error::NonFiniteState { t: state.t }, Vec::new());
    }
    let mut samples = vec![state.clone()];
    let mut steps = 0;
    let mut frozen = false;

    for &target in &times[1..] {
        while state.t < target {
            if frozen {
                state.t = target;
                break;
            }
            let t = state.t;
            let mut h = cfg.step_cap.min(cfg.shrink_factor * (horizon - t));
            let stiff = sys.stiffness(&state);
            if stiff > 0.0 {
                h = h.min(NONLINEAR_CFL / stiff);
            }
            if h < MIN_STEP {
                return fail(Error::StepUnderflow { t, step: h }, samples);
            }
            let landing = target - t <= h;
            if landing {
                h = target - t;
            }
            let stepped = match cfg.scheme {
                Scheme::Lawson => lawson_step(sys, &state, h),
                Scheme::Classical => classical_step(sys, &state, h),
            };
            let mut next = match stepped {
                Ok(s) => s,
                Err(Error::NonFinite) => return fail(Error::Blowup { t }, samples),
                Err(e) => return fail(e, samples),
            };
            next.t = if landing { target } else { t + h };
            next.renormalize();
            steps += 1;
            if !next.is_finite() {
                return fail(Error::NonFiniteState { t: next.t }, samples);
            }
            if next.exceeds(sys.blowup_bound()) {
                return fail(Error::Blowup { t: next.t }, samples);
            }
            match sys.after_step(&mut next) {
                Ok(StepControl::Continue) => {}
                Ok(StepControl::Freeze) => frozen = true,
                Err(e) => return fail(e, samples),
            }
            state = next;
        }
        samples.push(state.clone());
    }
    Ok(SplitRun { samples, steps })
}

/// A vector `e^{ln} v`.
#[derive(Debug, Clone)]
struct Scaled {
    v: Vec<f64>,
    ln: f64,
}

impl Scaled {
    fn zero(len: usize) -> Self {
        Self { v: vec![0.0; len], ln: f64::NEG_INFINITY }
    }

    fn vanishes(&self) -> bool {
        self.ln == f64::NEG_INFINITY || self.v.iter().all(|&x| x == 0.0)
    }

    /// `Σ w_k x_k`, expressed at the largest scale among the non-zero terms.
    fn combine(terms: &[(f64, &Scaled)]) -> Scaled {
        let len = terms[0].1.v.len();
        let live: Vec<&(f64, &Scaled)> = terms.iter().filter(|(w, x)| *w != 0.0 && !x.vanishes()).collect();
        let top = live.iter().map(|(_, x)| x.ln).fold(f64::NEG_INFINITY, f64::max);
        if live.is_empty() || top.is_nan() {
            return if top.is_nan() { Scaled { v: vec![f64::NAN; len], ln: 0.0 } } else { Scaled::zero(len) };
        }
        let mut v = vec![0.0; len];
        for (w, x) in live {
            let f = w * (x.ln - top).exp();
            for (o, xi) in v.iter_mut().zip(&x.v) {
                *o += f * xi;
            }
        }
        let m = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if m == 0.0 {
            Scaled::zero(len)
        } else if !m.is_finite() {
            Scaled { v, ln: top }
        } else {
            Scaled { v: v.into_iter().map(|x| x / m).collect(), ln: top + m.ln() }
        }
    }
}

/// Exact linear flow over a gain increment `G`: deviations map to
/// `e^c P̂ ê`, and the reference picks up `B_re S(G) e` with
/// `S(G) = ∫_0^G exp(γ B_ee) dγ`.
struct Propagator {
    c: f64,
    p_hat: DenseMatrix,
    s_re: Option<DenseMatrix>,
}

impl Propagator {
    fn new<S: SplitSystem>(sys: &S, gain: f64) -> Result<Self> {
        let b = sys.b_ee();
        let (c, p_hat) = expm_log_scaled(&b.scale(gain))?;
        let s_re = match sys.b_re() {
            None => None,
            Some(b_re) => {
                let m = b.rows();
                let mut aug = DenseMatrix::zeros(2 * m, 2 * m);
                aug.set_block(0, 0, &b.scale(gain));
                aug.set_block(0, m, &DenseMatrix::identity(m).scale(gain));
                let s = expm(&aug)?.block(0, m, m, m);
                Some(b_re.matmul(&s)?)
            }
        };
        Ok(Self { c, p_hat, s_re })
    }

    fn apply(&self, r: &[f64], e: &Scaled) -> (Vec<f64>, Scaled) {
        let mut r_out = r.to_vec();
        if let Some(s) = &self.s_re {
            let k = e.ln.exp();
            if k > 0.0 {
                for (o, v) in r_out.iter_mut().zip(s.matvec(&e.v)) {
                    *o += k * v;
                }
            }
        }
        (r_out, Scaled { v: self.p_hat.matvec(&e.v), ln: e.ln + self.c })
    }
}

fn axpy(y: &[f64], a: f64, x: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(u, v)| u + a * v).collect()
}

fn stage<S: SplitSystem>(sys: &S, t: f64, r: &[f64], e: &Scaled) -> (Vec<f64>, Scaled) {
    let rem = sys.remainder(t, r, &e.v, e.ln);
    (rem.r, Scaled { v: rem.e, ln: rem.ln_scale })
}

fn lawson_step<S: SplitSystem>(sys: &S, z: &SplitState, h: f64) -> Result<SplitState> {
    let reg = sys.regulator();
    let k = sys.gain_scale();
    let (t, m, e) = (z.t, z.t + 0.5 * h, z.t + h);
    let p_tm = Propagator::new(sys, k * reg.gain_integral(t, m)?)?;
    let p_me = Propagator::new(sys, k * reg.gain_integral(m, e)?)?;
    let p_te = Propagator::new(sys, k * reg.gain_integral(t, e)?)?;
    let z0 = Scaled { v: z.e_hat.clone(), ln: z.ln_kappa };

    let (k1r, k1e) = stage(sys, t, &z.r, &z0);

    let (z2r, z2e) = p_tm.apply(&axpy(&z.r, 0.5 * h, &k1r), &Scaled::combine(&[(1.0, &z0), (0.5 * h, &k1e)]));
    let (k2r, k2e) = stage(sys, m, &z2r, &z2e);

    let (ptr, pte) = p_tm.apply(&z.r, &z0);
    let z3e = Scaled::combine(&[(1.0, &pte), (0.5 * h, &k2e)]);
    let (k3r, k3e) = stage(sys, m, &axpy(&ptr, 0.5 * h, &k2r), &z3e);

    let (fr, fe) = p_te.apply(&z.r, &z0);
    let (g3r, g3e) = p_me.apply(&k3r, &k3e);
    let z4e = Scaled::combine(&[(1.0, &fe), (h, &g3e)]);
    let (k4r, k4e) = stage(sys, e, &axpy(&fr, h, &g3r), &z4e);

    let (ar, ae) = p_te.apply(&axpy(&z.r, h / 6.0, &k1r), &Scaled::combine(&[(1.0, &z0), (h / 6.0, &k1e)]));
    let k23r = axpy(&k2r, 1.0, &k3r);
    let (br, be) = p_me.apply(&k23r, &Scaled::combine(&[(1.0, &k2e), (1.0, &k3e)]));
    let r_new: Vec<f64> = (0..ar.len()).map(|i| ar[i] + h / 3.0 * br[i] + h / 6.0 * k4r[i]).collect();
    let e_new = Scaled::combine(&[(1.0, &ae), (h / 3.0, &be), (h / 6.0, &k4e)]);
    Ok(SplitState { t: e, r: r_new, e_hat: e_new.v, ln_kappa: e_new.ln })
}

fn classical_step<S: SplitSystem>(sys: &S, z: &SplitState, h: f64) -> Result<SplitState> {
    let reg = sys.regulator();
    let l0 = z.ln_kappa;
    let kappa = l0.exp();
    let rhs = |t: f64, r: &[f64], e: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let g = sys.gain_scale() * reg.gain(t)?;
        let rem = sys.remainder(t, r, e, l0);
        let (mut fr, mut fe) = (rem.r, rem.e);
        // remainder re-expressed at the working scale l0
        let shift = if rem.ln_scale == f64::NEG_INFINITY { 0.0 } else { (rem.ln_scale - l0).exp() };
        fe.iter_mut().for_each(|v| *v *= shift);
        if let Some(b_re) = sys.b_re() {
            for (o, v) in fr.iter_mut().zip(b_re.matvec(e)) {
                *o += kappa * g * v;
            }
        }
        for (o, v) in fe.iter_mut().zip(sys.b_ee().matvec(e)) {
            *o += g * v;
        }
        Ok((fr, fe))
    };
    let t = z.t;
    let (k1r, k1e) = rhs(t, &z.r, &z.e_hat)?;
    let (k2r, k2e) = rhs(t + 0.5 * h, &axpy(&z.r, 0.5 * h, &k1r), &axpy(&z.e_hat, 0.5 * h, &k1e))?;
    let (k3r, k3e) = rhs(t + 0.5 * h, &axpy(&z.r, 0.5 * h, &k2r), &axpy(&z.e_hat, 0.5 * h, &k2e))?;
    let (k4r, k4e) = rhs(t + h, &axpy(&z.r, h, &k3r), &axpy(&z.e_hat, h, &k3e))?;
    let comb = |y: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
        (0..y.len()).map(|i| y[i] + h / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i])).collect()
    };
    Ok(SplitState {
        t: t + h,
        r: comb(&z.r, &k1r, &k2r, &k3r, &k4r),
        e_hat: comb(&z.e_hat, &k1e, &k2e, &k3e, &k4e),
        ln_kappa: l0,
    })
}
