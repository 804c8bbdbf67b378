//! Dormand–Prince 5(4) integrator with the Hairer dense-output extension.
//!
//! The state is a fixed-size array so the Prüfer flows (one or two
//! components) and the complex radial system (four real components) share
//! one implementation without allocation in the inner loop. Integration may
//! run forward or backward; the direction is taken from `t1 - t0`.

use crate::error::{Result, ZgknError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step magnitude; chosen automatically when `None`.
    pub h0: Option<f64>,
    /// Upper bound on the step magnitude.
    pub hmax: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, h0: None, hmax: f64::INFINITY, max_steps: 1_000_000 }
    }
}

impl OdeOptions {
    pub fn tight() -> Self {
        Self { rtol: 1e-12, atol: 1e-14, ..Self::default() }
    }
}

/// One accepted step together with its continuous extension.
#[derive(Debug, Clone)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub h: f64,
    cont: [[f64; N]; 5],
}

impl<const N: usize> Step<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let c = &self.cont;
        std::array::from_fn(|i| c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * c[4][i]))))
    }
}

#[derive(Debug, Clone)]
pub struct Solution<const N: usize> {
    pub t_end: f64,
    pub y_end: [f64; N],
    pub steps: Vec<Step<N>>,
    pub n_eval: usize,
}

impl<const N: usize> Solution<N> {
    pub fn t_start(&self) -> f64 {
        self.steps.first().map_or(self.t_end, |s| s.t0)
    }

    /// Dense evaluation anywhere in the integrated range.
    pub fn eval(&self, t: f64) -> Result<[f64; N]> {
        let (a, b) = (self.t_start(), self.t_end);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if !(t >= lo && t <= hi) || self.steps.is_empty() {
            return Err(ZgknError::OutOfGrid(t));
        }
        let forward = b >= a;
        // Steps are time-ordered along the direction of integration.
        let idx =
            self.steps.partition_point(|s| if forward { s.t1() < t } else { s.t1() > t }).min(self.steps.len() - 1);
        Ok(self.steps[idx].eval(t))
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[inline]
fn comb<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

/// Integrate `y' = f(t, y)` from `t0` to `t1`. When `dense` is false only the
/// end state is kept.
pub fn integrate<const N: usize, F>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    opts: &OdeOptions,
    dense: bool,
) -> Result<Solution<N>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let span = t1 - t0;
    let mut sol = Solution { t_end: t0, y_end: y0, steps: Vec::new(), n_eval: 0 };
    if span == 0.0 {
        return Ok(sol);
    }
    let dir = span.signum();
    let scale = |y: &[f64; N], z: &[f64; N], i: usize| opts.atol + opts.rtol * y[i].abs().max(z[i].abs());

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    sol.n_eval += 1;

    let mut h = match opts.h0 {
        Some(h) => h.abs(),
        None => {
            // Hairer's starting-step heuristic.
            let d0 = rms(&y, &y, |i| scale(&y, &y, i));
            let d1 = rms(&k1, &y, |i| scale(&y, &y, i));
            let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            let y1 = comb(&y, dir * h0, &[(1.0, &k1)]);
            let k2 = f(t + dir * h0, &y1);
            sol.n_eval += 1;
            let diff: [f64; N] = std::array::from_fn(|i| k2[i] - k1[i]);
            let d2 = rms(&diff, &y, |i| scale(&y, &y, i)) / h0;
            let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
            (100.0 * h0).min(h1)
        }
    }
    .min(opts.hmax)
    .min(span.abs());

    let hmin_rel = 16.0 * f64::EPSILON;
    let mut n = 0usize;
    let mut last_rejected = false;
    loop {
        n += 1;
        if n > opts.max_steps {
            return Err(ZgknError::StiffnessFailure { at: t, step: h });
        }
        let remaining = (t1 - t) * dir;
        if remaining <= 0.0 {
            break;
        }
        let final_step = h >= remaining;
        if final_step {
            h = remaining;
        }
        if h < hmin_rel * t.abs().max(span.abs() * 1e-3) {
            return Err(ZgknError::StiffnessFailure { at: t, step: h });
        }
        let hs = dir * h;
        let k2 = f(t + C2 * hs, &comb(&y, hs, &[(A21, &k1)]));
        let k3 = f(t + C3 * hs, &comb(&y, hs, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * hs, &comb(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(t + C5 * hs, &comb(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(t + hs, &comb(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y_new = comb(&y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let t_new = if final_step { t1 } else { t + hs };
        let k7 = f(t_new, &y_new);
        sol.n_eval += 6;

        let err_vec: [f64; N] =
            std::array::from_fn(|i| hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]));
        let err = rms(&err_vec, &y, |i| scale(&y, &y_new, i));
        if !err.is_finite() {
            h *= 0.1;
            last_rejected = true;
            continue;
        }
        if err <= 1.0 {
            if dense {
                let mut cont = [[0.0; N]; 5];
                for i in 0..N {
                    let ydiff = y_new[i] - y[i];
                    let bspl = hs * k1[i] - ydiff;
                    cont[0][i] = y[i];
                    cont[1][i] = ydiff;
                    cont[2][i] = bspl;
                    cont[3][i] = ydiff - hs * k7[i] - bspl;
                    cont[4][i] = hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                sol.steps.push(Step { t0: t, h: t_new - t, cont });
            }
            t = t_new;
            y = y_new;
            k1 = k7;
            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 5.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h = (h * fac).min(opts.hmax);
            last_rejected = false;
            if final_step {
                break;
            }
        } else {
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            last_rejected = true;
        }
    }
    sol.t_end = t;
    sol.y_end = y;
    Ok(sol)
}

fn rms<const N: usize>(v: &[f64; N], _y: &[f64; N], sc: impl Fn(usize) -> f64) -> f64 {
    (v.iter().enumerate().map(|(i, x)| (x / sc(i)).powi(2)).sum::<f64>() / N as f64).sqrt()
}
