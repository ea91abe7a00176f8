//! Node dynamics `f(x) = D x + A h(x)` with the saturation
//! `h(u) = (|u + 1| - |u - 1|) / 2` applied component-wise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, DenseMatrix};

/// Declared one-sided Lipschitz constant of the built-in Chua system.
pub const CHUA_HF: f64 = 5.4704;

const CHUA_A: [[f64; 3]; 3] = [[-1.25, -3.2, -3.2], [-3.2, 1.1, -4.4], [-3.2, 4.4, 1.0]];

/// Below this value of `ln κ` the scaled increment uses the slope limit.
const LN_KAPPA_LINEARIZE: f64 = -600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsKind {
    Chua3,
    PwlAffine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DynamicsRepr", into = "DynamicsRepr")]
pub struct NodeDynamics {
    kind: DynamicsKind,
    d: DenseMatrix,
    a: DenseMatrix,
    hf: f64,
}

#[allow(non_snake_case)]
#[derive(Serialize, Deserialize)]
struct DynamicsRepr {
    kind: DynamicsKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    D: Option<DenseMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    A: Option<DenseMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    Hf: Option<f64>,
}

impl TryFrom<DynamicsRepr> for NodeDynamics {
    type Error = Error;

    fn try_from(r: DynamicsRepr) -> Result<Self> {
        match r.kind {
            DynamicsKind::Chua3 => {
                let c = Self::chua3();
                if r.D.is_some_and(|d| d != c.d) || r.A.is_some_and(|a| a != c.a) {
                    return Err(Error::Config("chua3 fixes D and A; use pwl_affine for other matrices".into()));
                }
                if r.Hf.is_some_and(|h| h != c.hf) {
                    return Err(Error::Config(format!("chua3 fixes Hf = {CHUA_HF}")));
                }
                Ok(c)
            }
            DynamicsKind::PwlAffine => {
                let missing = |f: &str| Error::Config(format!("pwl_affine requires field {f}"));
                Self::pwl_affine(r.D.ok_or_else(|| missing("D"))?, r.A.ok_or_else(|| missing("A"))?, r.Hf.ok_or_else(|| missing("Hf"))?)
            }
        }
    }
}

impl From<NodeDynamics> for DynamicsRepr {
    fn from(n: NodeDynamics) -> Self {
        match n.kind {
            DynamicsKind::Chua3 => Self { kind: n.kind, D: None, A: None, Hf: None },
            DynamicsKind::PwlAffine => Self { kind: n.kind, D: Some(n.d), A: Some(n.a), Hf: Some(n.hf) },
        }
    }
}

/// Component-wise saturation, 1-Lipschitz and odd.
#[inline]
pub fn saturation(u: f64) -> f64 {
    u.clamp(-1.0, 1.0)
}

impl NodeDynamics {
    /// The three-dimensional Chua-type benchmark: `D = -I`, fixed `A`.
    pub fn chua3() -> Self {
        Self {
            kind: DynamicsKind::Chua3,
            d: DenseMatrix::identity(3).scale(-1.0),
            a: DenseMatrix::from_rows(&CHUA_A).expect("constant matrix"),
            hf: CHUA_HF,
        }
    }

    pub fn pwl_affine(d: DenseMatrix, a: DenseMatrix, hf: f64) -> Result<Self> {
        d.require_square()?;
        a.require_square()?;
        if d.rows() != a.rows() {
            return Err(Error::DimensionMismatch(format!("D is {0}x{0} but A is {1}x{1}", d.rows(), a.rows())));
        }
        if !hf.is_finite() {
            return Err(Error::InvalidParameters("Hf must be finite".into()));
        }
        Ok(Self { kind: DynamicsKind::PwlAffine, d, a, hf })
    }

    pub fn kind(&self) -> DynamicsKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.d.rows()
    }

    pub fn d(&self) -> &DenseMatrix {
        &self.d
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    /// Declared one-sided Lipschitz constant.
    pub fn hf(&self) -> f64 {
        self.hf
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let hx: Vec<f64> = x.iter().map(|&u| saturation(u)).collect();
        let mut out = self.d.matvec(x);
        for (o, v) in out.iter_mut().zip(self.a.matvec(&hx)) {
            *o += v;
        }
        out
    }

    /// `[f(x + κ d) - f(x)] / κ` for `κ = exp(ln_kappa)`, evaluated without
    /// forming `x + κ d` when that would lose the increment.
    pub fn scaled_increment(&self, x: &[f64], d: &[f64], ln_kappa: f64) -> Vec<f64> {
        let phi: Vec<f64> = if ln_kappa < LN_KAPPA_LINEARIZE {
            x.iter().zip(d).map(|(&u, &di)| saturation_slope(u, di) * di).collect()
        } else {
            let kappa = ln_kappa.exp();
            x.iter().zip(d).map(|(&u, &di)| saturation_quotient(u, di, kappa)).collect()
        };
        let mut out = self.d.matvec(d);
        for (o, v) in out.iter_mut().zip(self.a.matvec(&phi)) {
            *o += v;
        }
        out
    }

    /// Global Lipschitz bound `‖D‖_∞ + ‖A‖_∞`, used as a stiffness scale.
    pub fn lipschitz_bound(&self) -> f64 {
        self.d.inf_norm() + self.a.inf_norm()
    }

    /// `λ_max(sym D) + λ_max(sym A)`: the symmetric-part estimate.
    pub fn symmetric_part_estimate(&self) -> Result<f64> {
        Ok(symmetric_eigen(&self.d.symmetric_part()?)?.max() + symmetric_eigen(&self.a.symmetric_part()?)?.max())
    }

    /// `λ_max(sym D) + σ_max(A)`: a rigorous one-sided Lipschitz bound,
    /// since `h` is 1-Lipschitz.
    pub fn spectral_norm_bound(&self) -> Result<f64> {
        let ata = self.a.transpose().matmul(&self.a)?;
        let sigma = symmetric_eigen(&ata.symmetric_part()?)?.max().max(0.0).sqrt();
        Ok(symmetric_eigen(&self.d.symmetric_part()?)?.max() + sigma)
    }

    /// Samples `trials` pairs uniformly from the ball of the given radius and
    /// returns the largest one-sided Lipschitz quotient observed.
    pub fn verify_quad(&self, trials: usize, radius: f64, seed: u64) -> QuadCheck {
        let n = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ball_point = |rng: &mut ChaCha8Rng| loop {
            let p: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            if p.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                return p.into_iter().map(|v| v * radius).collect::<Vec<f64>>();
            }
        };
        let mut max_ratio = f64::NEG_INFINITY;
        let mut sampled = 0;
        while sampled < trials {
            let x = ball_point(&mut rng);
            let y = ball_point(&mut rng);
            let dx: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            let nrm2: f64 = dx.iter().map(|v| v * v).sum();
            if nrm2 == 0.0 {
                continue;
            }
            let (fx, fy) = (self.eval(&x), self.eval(&y));
            let num: f64 = dx.iter().zip(fx.iter().zip(&fy)).map(|(d, (a, b))| d * (a - b)).sum();
            max_ratio = max_ratio.max(num / nrm2);
            sampled += 1;
        }
        QuadCheck { max_ratio, declared: self.hf, passed: max_ratio <= self.hf + 1e-6 }
    }
}

/// Outcome of [`NodeDynamics::verify_quad`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadCheck {
    pub max_ratio: f64,
    pub declared: f64,
    pub passed: bool,
}

/// One-sided slope of `h` at `u` in direction `d`.
fn saturation_slope(u: f64, d: f64) -> f64 {
    let inside = if d >= 0.0 { (-1.0..1.0).contains(&u) } else { u > -1.0 && u <= 1.0 };
    if inside {
        1.0
    } else {
        0.0
    }
}

/// `(h(u + κ d) - h(u)) / κ`, exact in the linear region. Crossings are
/// decided on the increment `κ d` against the gaps `±1 - u`, which are
/// exact near the corners.
fn saturation_quotient(u: f64, d: f64, kappa: f64) -> f64 {
    let du = kappa * d;
    let (up, down) = (1.0 - u, -1.0 - u);
    if (-1.0..=1.0).contains(&u) {
        if du > up {
            up / kappa
        } else if du < down {
            down / kappa
        } else {
            d
        }
    } else if u > 1.0 {
        if du >= up {
            0.0
        } else if du >= down {
            d - up / kappa
        } else {
            -2.0 / kappa
        }
    } else if du <= down {
        0.0
    } else if du <= up {
        d - down / kappa
    } else {
        2.0 / kappa
    }
}
