//! Angular eigenvalue problem in Prüfer form,
//! `Θ′ = 2λ − 2μ cos Θ + 2W sin Θ`, `(ln S)′ = −W cos Θ − μ sin Θ`, with
//! `μ = am cos θ` and `W = aE sin θ − κ/sin θ`, and an independent dense
//! collocation discretization of the same operator.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Result, ZgknError};
use crate::ode::{self, OdeOptions, Solution};
use crate::quadrature::GaussRule;
use crate::root;

/// Distance from the poles at which the regular expansion is handed to the integrator.
pub const POLE_OFFSET: f64 = 1e-5;

pub fn validate_kappa(kappa: f64) -> Result<()> {
    let two_k = 2.0 * kappa;
    if !(two_k.is_finite() && two_k == two_k.round() && (two_k as i64).rem_euclid(2) == 1) {
        return Err(ZgknError::InvalidQuantumNumbers(format!("κ = {kappa} is not a half-odd integer")));
    }
    Ok(())
}

/// Branch labels are the integers `n` with `|n| ≥ |κ| + 1/2`; `λ_n = n` at `am = aE = 0`.
pub fn validate_branch(n: i32, kappa: f64) -> Result<()> {
    validate_kappa(kappa)?;
    if (n.unsigned_abs() as f64) < kappa.abs() + 0.5 {
        return Err(ZgknError::InvalidQuantumNumbers(format!("branch n = {n} needs |n| ≥ |κ| + 1/2 for κ = {kappa}")));
    }
    Ok(())
}

/// `dΘ/dθ`; the poles are excluded.
pub fn angular_rhs(theta: f64, big_theta: f64, lambda: f64, am: f64, ae: f64, kappa: f64) -> Result<f64> {
    let st = theta.sin();
    if st == 0.0 || !(0.0..=PI).contains(&theta) {
        return Err(ZgknError::PoleEvaluation);
    }
    let w = ae * st - kappa / st;
    Ok(2.0 * lambda - 2.0 * am * theta.cos() * big_theta.cos() + 2.0 * w * big_theta.sin())
}

fn rhs(theta: f64, y: &[f64; 2], lambda: f64, am: f64, ae: f64, kappa: f64) -> [f64; 2] {
    let (st, ct) = theta.sin_cos();
    let mu = am * ct;
    let w = ae * st - kappa / st;
    let (sb, cb) = y[0].sin_cos();
    [2.0 * lambda - 2.0 * mu * cb + 2.0 * w * sb, -w * cb - mu * sb]
}

/// Regular values `(Θ(0), Θ(π))`.
pub fn pole_angles(kappa: f64) -> (f64, f64) {
    if kappa > 0.0 {
        (0.0, PI)
    } else {
        (PI, 0.0)
    }
}

fn opts() -> OdeOptions {
    OdeOptions { rtol: 1e-12, atol: 1e-13, ..OdeOptions::default() }
}

fn shoot(lambda: f64, am: f64, ae: f64, kappa: f64, dense: bool) -> Result<(Solution<2>, Solution<2>)> {
    let (t0, tpi) = pole_angles(kappa);
    let k = kappa.abs();
    let d = 1.0 + 2.0 * k;
    let tau = POLE_OFFSET;
    let yl = [t0 + 2.0 * (lambda - am * t0.cos()) * tau / d, k * tau.ln()];
    let yr = [tpi - 2.0 * (lambda + am * tpi.cos()) * tau / d, k * tau.ln()];
    let f = |t: f64, y: &[f64; 2]| rhs(t, y, lambda, am, ae, kappa);
    let o = opts();
    let left = ode::integrate(f, tau, yl, FRAC_PI_2, &o, dense)?;
    let right = ode::integrate(f, PI - tau, yr, FRAC_PI_2, &o, dense)?;
    Ok((left, right))
}

/// `F(λ) = Θ_left(π/2) − Θ_right(π/2)`; increasing in λ, eigenvalues at `F ∈ 2πℤ`.
pub fn angular_mismatch(lambda: f64, am: f64, ae: f64, kappa: f64) -> Result<f64> {
    let (l, r) = shoot(lambda, am, ae, kappa, false)?;
    Ok(l.y_end[0] - r.y_end[0])
}

/// Winding `k` of branch `n`, fixed at `am = aE = 0` where `λ_n = n`.
pub fn branch_winding(n: i32, kappa: f64) -> Result<i64> {
    validate_branch(n, kappa)?;
    let f0 = angular_mismatch(n as f64, 0.0, 0.0, kappa)?;
    let k = (f0 / TAU).round();
    debug_assert!((f0 - k * TAU).abs() < 1e-6, "branch {n} not an exact eigenvalue at a = 0: {f0}");
    Ok(k as i64)
}

#[derive(Debug, Clone)]
pub struct AngularSolution {
    pub am: f64,
    pub ae: f64,
    pub kappa: f64,
    pub n: i32,
    pub lambda: f64,
    pub winding: i64,
    /// `Θ_left(π/2) − Θ_right(π/2) − 2πk` at the returned λ.
    pub residual: f64,
    pub evaluations: usize,
    left: Solution<2>,
    right: Solution<2>,
    /// Added to the right branch so that both `Θ` and `ln S` are continuous.
    theta_shift: f64,
    ln_shift: f64,
    /// Subtracted from `ln S` so that `∫₀^π S² dθ = 1`.
    ln_norm: f64,
}

impl AngularSolution {
    fn raw(&self, theta: f64) -> Result<[f64; 2]> {
        if !(0.0..=PI).contains(&theta) {
            return Err(ZgknError::OutOfGrid(theta));
        }
        let tau = POLE_OFFSET;
        let k = self.kappa.abs();
        if theta < tau {
            let y = self.left.eval(tau)?;
            let (t0, _) = pole_angles(self.kappa);
            return Ok([t0 + (y[0] - t0) * theta / tau, y[1] + k * (theta / tau).ln()]);
        }
        if theta > PI - tau {
            let y = self.right.eval(PI - tau)?;
            let (_, tpi) = pole_angles(self.kappa);
            let s = (PI - theta) / tau;
            return Ok([tpi + self.theta_shift + (y[0] - tpi) * s, y[1] + self.ln_shift + k * s.ln()]);
        }
        if theta <= FRAC_PI_2 {
            self.left.eval(theta)
        } else {
            let y = self.right.eval(theta)?;
            Ok([y[0] + self.theta_shift, y[1] + self.ln_shift])
        }
    }

    /// `(Θ(θ), S(θ))` with `S ≥ 0` normalized in `L²(dθ)`.
    pub fn eval(&self, theta: f64) -> Result<(f64, f64)> {
        let y = self.raw(theta)?;
        Ok((y[0], (y[1] - self.ln_norm).exp()))
    }

    /// Breakpoints of the adaptive steps, suitable for composite quadrature.
    pub fn breaks(&self) -> Vec<f64> {
        let mut b = vec![0.0, POLE_OFFSET];
        b.extend(self.left.steps.iter().map(|s| s.t1()));
        let mut r: Vec<f64> = self.right.steps.iter().map(|s| s.t1()).collect();
        r.reverse();
        b.extend(r.into_iter().skip(1));
        b.push(PI - POLE_OFFSET);
        b.push(PI);
        b.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
        b
    }

    /// `∫₀^π f(θ, Θ, S) dθ` by composite Gauss–Legendre on the step grid.
    pub fn integrate(&self, f: impl Fn(f64, f64, f64) -> f64) -> Result<f64> {
        let rule = GaussRule::new(6);
        let mut acc = crate::quadrature::KahanSum::default();
        for (t, w) in rule.composite(&self.breaks()) {
            let (bt, s) = self.eval(t)?;
            acc.add(w * f(t, bt, s));
        }
        Ok(acc.value())
    }
}

/// Solve for `λ_n(am, aE, κ)` by shooting from both poles and matching at the equator.
pub fn solve_angular(am: f64, ae: f64, kappa: f64, n: i32) -> Result<AngularSolution> {
    let k = branch_winding(n, kappa)?;
    let target = TAU * k as f64;
    let mut evals = 0usize;
    let mut g = |l: f64| -> Result<f64> {
        evals += 1;
        Ok(angular_mismatch(l, am, ae, kappa)? - target)
    };
    let spread = 0.5 + am.abs() + ae.abs();
    let (mut lo, mut hi) = (n as f64 - spread, n as f64 + spread);
    let mut tries = 0;
    while g(lo)? > 0.0 {
        lo -= spread;
        tries += 1;
        if tries > 60 {
            return Err(ZgknError::NoRootInBracket { lo, hi });
        }
    }
    while g(hi)? < 0.0 {
        hi += spread;
        tries += 1;
        if tries > 60 {
            return Err(ZgknError::NoRootInBracket { lo, hi });
        }
    }
    let found = root::brent(&mut g, lo, hi, 1e-13, 0.0)?;
    let lambda = found.x;
    let (left, right) = shoot(lambda, am, ae, kappa, true)?;
    let residual = left.y_end[0] - right.y_end[0] - target;
    let mut sol = AngularSolution {
        am,
        ae,
        kappa,
        n,
        lambda,
        winding: k,
        residual,
        evaluations: evals + found.evaluations,
        theta_shift: left.y_end[0] - right.y_end[0],
        ln_shift: left.y_end[1] - right.y_end[1],
        left,
        right,
        ln_norm: 0.0,
    };
    let norm = sol.integrate(|_, _, s| s * s)?;
    sol.ln_norm = 0.5 * norm.ln();
    Ok(sol)
}

/// Collocation matrix of the angular operator in `x = cos θ` after removing
/// the pole behaviour, `S₁ = w₁ U₁`, `S₂ = w₂ U₂`, on `npts` Gauss–Legendre
/// nodes per component. Eigenvalues approximate the λ spectrum.
pub fn dense_angular_matrix(am: f64, ae: f64, kappa: f64, npts: usize) -> DMatrix<f64> {
    let rule = GaussRule::new(npts);
    let x = &rule.nodes;
    let n = x.len();
    let bw: Vec<f64> = (0..n)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            s * ((1.0 - x[j] * x[j]) * rule.weights[j]).sqrt()
        })
        .collect();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = (bw[j] / bw[i]) / (x[i] - x[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        d[(i, i)] = diag;
    }
    let k = kappa.abs() + 0.5;
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        let xi = x[i];
        a[(i, i)] = am * xi;
        a[(n + i, n + i)] = -am * xi;
        if kappa > 0.0 {
            a[(i, n + i)] += k - ae * (1.0 - xi);
            a[(n + i, i)] += k - ae * (1.0 + xi);
            for j in 0..n {
                a[(i, n + j)] -= (1.0 - xi) * d[(i, j)];
                a[(n + i, j)] += (1.0 + xi) * d[(i, j)];
            }
        } else {
            a[(i, n + i)] -= k + ae * (1.0 + xi);
            a[(n + i, i)] -= k + ae * (1.0 - xi);
            for j in 0..n {
                a[(i, n + j)] -= (1.0 + xi) * d[(i, j)];
                a[(n + i, j)] += (1.0 - xi) * d[(i, j)];
            }
        }
    }
    a
}

pub fn dense_angular_eigenvalues(am: f64, ae: f64, kappa: f64, npts: usize) -> Vec<Complex64> {
    let m = dense_angular_matrix(am, ae, kappa, npts);
    let f = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    f.eigenvalues::<faer::complex_native::c64>().into_iter().map(|z| Complex64::new(z.re, z.im)).collect()
}

/// Dense-oracle eigenvalue of branch `n`, picked by ordering among the
/// eigenvalues of the same sign.
pub fn dense_branch_eigenvalue(am: f64, ae: f64, kappa: f64, n: i32, npts: usize) -> Result<Complex64> {
    validate_branch(n, kappa)?;
    let mut ev = dense_angular_eigenvalues(am, ae, kappa, npts);
    let idx = (n.unsigned_abs() as f64 - kappa.abs() - 0.5).round() as usize;
    if n > 0 {
        ev.retain(|z| z.re > 0.0);
        ev.sort_by(|a, b| a.re.total_cmp(&b.re));
    } else {
        ev.retain(|z| z.re < 0.0);
        ev.sort_by(|a, b| b.re.total_cmp(&a.re));
    }
    ev.get(idx).copied().ok_or_else(|| ZgknError::InvalidQuantumNumbers(format!("branch {n} beyond dense resolution")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rhs_examples() {
        assert_eq!(angular_rhs(0.0, 0.0, 1.0, 0.0, 0.0, 0.5), Err(ZgknError::PoleEvaluation));
        let v = angular_rhs(FRAC_PI_2, 0.3, 1.5, 0.2, 0.1, -0.5).unwrap();
        assert!((v - (3.0 + 2.0 * (0.1 + 0.5) * 0.3f64.sin())).abs() < 1e-15);
    }

    #[test]
    fn free_eigenvalues_are_integers() {
        for kappa in [-1.5, -0.5, 0.5, 1.5] {
            for n in [2, -2, 3, -3] {
                let s = solve_angular(0.0, 0.0, kappa, n).unwrap();
                assert!((s.lambda - n as f64).abs() < 1e-10, "κ={kappa} n={n} λ={}", s.lambda);
            }
        }
        assert!(validate_branch(1, 1.5).is_err());
        assert!(validate_kappa(1.0).is_err());
    }

    #[test]
    fn dense_oracle_free_case() {
        let ev = dense_branch_eigenvalue(0.0, 0.0, -0.5, -1, 40).unwrap();
        assert!((ev.re + 1.0).abs() < 1e-10 && ev.im.abs() < 1e-10);
        let ev = dense_branch_eigenvalue(0.0, 0.0, 1.5, 3, 40).unwrap();
        assert!((ev.re - 3.0).abs() < 1e-10);
    }

    #[test]
    fn shooting_matches_dense_oracle() {
        for (am, ae, kappa, n) in
            [(0.2, -0.1, 0.5, 1), (-0.3, 0.25, -0.5, -1), (0.1, 0.3, -1.5, 2), (0.25, 0.2, 1.5, -3)]
        {
            let s = solve_angular(am, ae, kappa, n).unwrap();
            let d = dense_branch_eigenvalue(am, ae, kappa, n, 60).unwrap();
            assert!((s.lambda - d.re).abs() < 1e-8, "{am} {ae} {kappa} {n}: {} vs {}", s.lambda, d.re);
            assert!(d.im.abs() < 1e-10);
        }
    }

    #[test]
    fn amplitude_recovers_ode() {
        let s = solve_angular(0.2, 0.3, -0.5, -1).unwrap();
        assert!((s.integrate(|_, _, v| v * v).unwrap() - 1.0).abs() < 1e-12);
        // S₁ = S cos(Θ/2), S₂ = S sin(Θ/2) satisfy the first-order system.
        let comps = |t: f64| {
            let (bt, sv) = s.eval(t).unwrap();
            (sv * (0.5 * bt).cos(), sv * (0.5 * bt).sin())
        };
        for t in [0.3, 1.2, 2.0, 2.9] {
            let h = 1e-5;
            let (a1, a2) = comps(t + h);
            let (b1, b2) = comps(t - h);
            let (s1, s2) = comps(t);
            let (st, ct) = t.sin_cos();
            let mu = 0.2 * ct;
            let w = 0.3 * st + 0.5 / st;
            let l = s.lambda;
            assert!(((a2 - b2) / (2.0 * h) - ((l - mu) * s1 + w * s2)).abs() < 1e-7);
            assert!(((a1 - b1) / (2.0 * h) - (-w * s1 - (l + mu) * s2)).abs() < 1e-7);
        }
    }
}
