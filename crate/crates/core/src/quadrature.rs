//! Adaptive Gauss–Kronrod (7/15) quadrature.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Subdivision budget of one adaptive integration.
const MAX_PANELS: usize = 4000;

/// Relative error below which further bisection only resolves rounding.
const ROUNDOFF: f64 = 50.0 * f64::EPSILON;

/// One 15-point Kronrod rule on `[a, b]`; returns (estimate, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

struct Panel {
    a: f64,
    b: f64,
    est: f64,
    err: f64,
}

/// `∫_a^b f` by globally adaptive bisection: the panel with the largest
/// error estimate is split until the summed error is below
/// `max(abs_tol, rel_tol * |estimate|)` or the panel budget is spent.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if b < a {
        return -integrate(f, b, a, rel_tol, abs_tol);
    }
    let (est, err) = gk15(&f, a, b);
    let mut panels = vec![Panel { a, b, est, err }];
    loop {
        let total: f64 = panels.iter().map(|p| p.est).sum();
        let error: f64 = panels.iter().map(|p| p.err).sum();
        let magnitude: f64 = panels.iter().map(|p| p.est.abs()).sum();
        let floor = abs_tol.max(rel_tol * total.abs()).max(ROUNDOFF * magnitude);
        if error <= floor || panels.len() >= MAX_PANELS {
            return total;
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .expect("nonempty");
        let p = panels.swap_remove(worst);
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            // cannot split further in floating point
            panels.push(p);
            return panels.iter().map(|p| p.est).sum();
        }
        for (lo, hi) in [(p.a, m), (m, p.b)] {
            let (est, err) = gk15(&f, lo, hi);
            panels.push(Panel { a: lo, b: hi, est, err });
        }
    }
}

/// Breakpoints from `hi` down to `lo`, each panel spanning at most half of
/// its distance to zero. For `lo = 0` the last panel starts at a point far
/// below the resolution of `hi`.
pub fn geometric_gaps(lo: f64, hi: f64) -> Vec<f64> {
    let cutoff = lo.max(hi * f64::EPSILON * f64::EPSILON);
    let mut pts = vec![hi];
    let mut u = hi;
    loop {
        let next = 0.5 * u;
        if next <= cutoff || next >= u {
            break;
        }
        pts.push(next);
        u = next;
    }
    pts.push(lo);
    pts
}

/// `∫_lo^hi f(u) du` for `0 ≤ lo ≤ hi` with `f` singular or steep at `u = 0`.
/// The argument is the distance to the singular point itself, so nodes close
/// to it keep full relative precision.
pub fn integrate_gap<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, rel_tol: f64) -> f64 {
    geometric_gaps(lo, hi).windows(2).map(|w| integrate(&f, w[1], w[0], rel_tol, 0.0)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_exact() {
        let v = integrate(|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, 1e-14, 0.0);
        assert!((v - (64.0 / 6.0 - 1.0 / 6.0 - 9.0)).abs() < 1e-13);
    }

    #[test]
    fn steep_integrand_near_singularity() {
        let t = 1.0;
        let s = 1.0 - 1e-9;
        let v = integrate_gap(|u| 1.0 / u, t - s, t, 1e-13);
        assert!((v + (t - s).ln()).abs() < 1e-12 * v);
        let v = integrate_gap(|u| u.powf(-0.5), 0.0, 4.0, 1e-12);
        assert!((v - 4.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let v = integrate(f64::exp, 1.0, 0.0, 1e-14, 0.0);
        assert!((v + (1f64.exp() - 1.0)).abs() < 1e-14);
    }
}
