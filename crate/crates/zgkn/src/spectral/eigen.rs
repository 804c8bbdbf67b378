//! Coupled eigenvalue problem: outer Brent iteration on `E` with λ refreshed
//! at `aE`, labelled by the radial winding `k` with `D(E) = 2πk`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use super::angular::{solve_angular, validate_branch, validate_kappa, AngularSolution};
use super::radial::{conservation_drift, radial_saddles, shoot, RadialProblem, RadialShot};
use super::ShootingReport;
use crate::bispinor::{eigen_bispinor, BiSpinor};
use crate::error::{Result, ZgknError};
use crate::geometry::ModelParams;
use crate::quadrature::{GaussRule, KahanSum};
use crate::root;

/// Outer tolerances: `tol_e` in units of `m`, `tol_match` in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenTolerances {
    pub tol_e: f64,
    pub tol_match: f64,
}

impl Default for EigenTolerances {
    fn default() -> Self {
        Self { tol_e: 1e-12, tol_match: 1e-10 }
    }
}

/// Mismatch `D(E)` with λ solved at `aE`.
#[derive(Debug, Clone)]
struct Evaluation {
    angular: AngularSolution,
    shot: RadialShot,
}

fn check(params: &ModelParams, kappa: f64, n: i32) -> Result<()> {
    params.validate()?;
    if !params.is_separable() {
        return Err(ZgknError::NonSeparable);
    }
    validate_kappa(kappa)?;
    validate_branch(n, kappa)
}

fn evaluate(params: &ModelParams, kappa: f64, n: i32, e: f64, dense: bool) -> Result<Evaluation> {
    radial_saddles(e, params.m)?;
    let a = params.a;
    let angular = solve_angular(a * params.m, a * e, kappa, n)?;
    let problem = RadialProblem { m: params.m, a, gamma: params.gamma(), kappa, lambda: angular.lambda, energy: e };
    let shot = shoot(problem, dense)?;
    Ok(Evaluation { angular, shot })
}

/// Raw mismatch `D(E)` on the branch `(κ, n)`.
pub fn mismatch(params: &ModelParams, kappa: f64, n: i32, e: f64) -> Result<f64> {
    check(params, kappa, n)?;
    Ok(evaluate(params, kappa, n, e, false)?.shot.mismatch)
}

/// Winding of the `level`-th positive (`level > 0`) or negative (`level < 0`)
/// energy eigenvalue, counted outward from `E = 0`.
pub fn level_winding(params: &ModelParams, kappa: f64, n: i32, level: i32) -> Result<i64> {
    if level == 0 {
        return Err(ZgknError::InvalidQuantumNumbers("level must be nonzero".into()));
    }
    let k0 = (mismatch(params, kappa, n, 0.0)? / TAU).floor() as i64;
    Ok(if level > 0 { k0 - (level as i64 - 1) } else { k0 + level.unsigned_abs() as i64 })
}

/// Walk from `start` toward `end` on `x_j = start + (end − start)(1 − 2^{−j})`
/// until `g` changes sign. Returns the bracket ordered as `(lo, hi)`.
fn geometric_bracket(
    g: &mut impl FnMut(f64) -> Result<f64>,
    start: f64,
    g_start: f64,
    end: f64,
    brackets: &mut Vec<(f64, f64)>,
) -> Result<Option<(f64, f64)>> {
    let mut prev = start;
    for j in 1..=52 {
        let x = start + (end - start) * (1.0 - 0.5f64.powi(j));
        if x == prev {
            break;
        }
        let gx = g(x)?;
        brackets.push((prev.min(x), prev.max(x)));
        if gx == 0.0 || gx.signum() != g_start.signum() {
            return Ok(Some((prev.min(x), prev.max(x))));
        }
        prev = x;
    }
    Ok(None)
}

/// One separated eigenstate together with its normalized profiles.
#[derive(Debug, Clone)]
pub struct SeparatedState {
    pub params: ModelParams,
    pub kappa: f64,
    pub n: i32,
    pub winding: i64,
    pub energy: f64,
    pub lambda: f64,
    /// Sign of the net Prüfer rotation `Ω(+∞) − Ω(−∞)`.
    pub handedness: i8,
    pub angular: AngularSolution,
    pub report: ShootingReport,
    shot: RadialShot,
    omega_shift: f64,
    ln_shift: f64,
    /// Subtracted from `ln R` so that `‖Ψ̂‖_M̂ = 1`.
    ln_norm: f64,
    decay: f64,
}

impl SeparatedState {
    fn raw_radial(&self, r: f64) -> Result<(f64, f64)> {
        let s = &self.shot;
        let rm = s.r_match;
        if r < -s.r_max {
            let y = s.left.eval(-s.r_max)?;
            return Ok((y[0], y[1] - self.decay * (-s.r_max - r)));
        }
        if r > s.r_max {
            let y = s.right.eval(s.r_max)?;
            return Ok((y[0] + self.omega_shift, y[1] + self.ln_shift - self.decay * (r - s.r_max)));
        }
        if r <= rm {
            let y = s.left.eval(r)?;
            Ok((y[0], y[1]))
        } else {
            let y = s.right.eval(r)?;
            Ok((y[0] + self.omega_shift, y[1] + self.ln_shift))
        }
    }

    /// `(R(r), Ω(r))`. Beyond `±R_max` the leading exponential tail is used.
    pub fn radial(&self, r: f64) -> Result<(f64, f64)> {
        let (om, ln) = self.raw_radial(r)?;
        Ok(((ln - self.ln_norm).exp(), om))
    }

    /// `(S(θ), Θ(θ))` with `∫ S² dθ = 1`.
    pub fn angular_profile(&self, theta: f64) -> Result<(f64, f64)> {
        let (bt, s) = self.angular.eval(theta)?;
        Ok((s, bt))
    }

    /// Integration range `[−R_max, R_max]` and the matching point.
    pub fn radial_range(&self) -> (f64, f64, f64) {
        (-self.shot.r_max, self.shot.r_match, self.shot.r_max)
    }

    /// Adaptive step breakpoints of the radial solution.
    pub fn radial_breaks(&self) -> Vec<f64> {
        let s = &self.shot;
        let mut b = vec![s.left.t_start()];
        b.extend(s.left.steps.iter().map(|st| st.t1()));
        let mut r: Vec<f64> = s.right.steps.iter().map(|st| st.t1()).collect();
        r.reverse();
        b.extend(r);
        b.push(s.right.t_start());
        b.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * x.abs().max(1.0));
        b
    }

    /// `∫ f(r, R, Ω) dr` over `[−R_max, R_max]` by composite Gauss–Legendre.
    pub fn integrate_radial(&self, f: impl Fn(f64, f64, f64) -> f64) -> Result<f64> {
        let rule = GaussRule::new(6);
        let mut acc = KahanSum::default();
        for (r, w) in rule.composite(&self.radial_breaks()) {
            let (rr, om) = self.radial(r)?;
            acc.add(w * f(r, rr, om));
        }
        Ok(acc.value())
    }

    /// `Ψ̂(t, r, θ, φ)` in the Weyl representation.
    pub fn bispinor(&self, t: f64, r: f64, theta: f64, phi: f64) -> Result<BiSpinor> {
        let (rr, om) = self.radial(r)?;
        let (ss, bt) = self.angular_profile(theta)?;
        let phase = C::from_polar(1.0, -(self.energy * t - self.kappa * phi));
        Ok(eigen_bispinor(rr, om, ss, bt, phase))
    }

    /// `‖Ψ̂‖²_M̂` from separated one-dimensional integrals.
    pub fn norm_sqr(&self) -> Result<f64> {
        let a = self.params.a;
        let ir = self.integrate_radial(|_, rr, _| rr * rr)?;
        let jr = self.integrate_radial(|r, rr, om| rr * rr * om.sin() / (r * r + a * a).sqrt())?;
        let is = self.angular.integrate(|_, _, s| s * s)?;
        let js = self.angular.integrate(|t, bt, s| s * s * t.sin() * bt.sin())?;
        Ok(4.0 * PI * (ir * is + a * jr * js))
    }

    /// Maximum relative drift of `|R₁|² − |R₂|²` on the direct complex integration.
    pub fn conservation_drift(&self) -> Result<f64> {
        conservation_drift(&self.shot)
    }

    fn build(
        params: ModelParams,
        kappa: f64,
        n: i32,
        winding: i64,
        ev: Evaluation,
        report: ShootingReport,
    ) -> Result<Self> {
        let Evaluation { angular, shot } = ev;
        let yl = shot.left.y_end;
        let yr = shot.right.y_end;
        let e = shot.problem.energy;
        let decay = (params.m * params.m - e * e).sqrt();
        let omega_shift = yl[0] - yr[0];
        let total = shot.start_angles.1 + omega_shift - shot.start_angles.0;
        let mut st = SeparatedState {
            params,
            kappa,
            n,
            winding,
            energy: e,
            lambda: angular.lambda,
            handedness: total.signum() as i8,
            angular,
            report,
            omega_shift,
            ln_shift: yl[1] - yr[1],
            ln_norm: 0.0,
            decay,
            shot,
        };
        // Rescale so the norm integrals stay in range before normalizing.
        let peak =
            st.radial_breaks().iter().filter_map(|&r| st.raw_radial(r).ok()).map(|(_, l)| l).fold(f64::MIN, f64::max);
        st.ln_norm = peak;
        let nn = st.norm_sqr()?;
        st.ln_norm = peak + 0.5 * nn.ln();
        Ok(st)
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    params: &ModelParams,
    kappa: f64,
    n: i32,
    k: i64,
    e: f64,
    mut report: ShootingReport,
    tol: &EigenTolerances,
    width: f64,
) -> Result<SeparatedState> {
    let ev = evaluate(params, kappa, n, e, true)?;
    report.mismatch = ev.shot.mismatch - TAU * k as f64;
    report.winding = k;
    report.angular_residual = ev.angular.residual;
    report.converged = report.mismatch.abs() <= tol.tol_match || width <= tol.tol_e * params.m;
    if !params.admissible() {
        report.note = "parameters outside the sufficient admissibility region".into();
    }
    if !report.converged {
        return Err(ZgknError::NoConvergence(Box::new(report)));
    }
    SeparatedState::build(*params, kappa, n, k, ev, report)
}

/// Refine a bracket `[lo, hi]` of `g(E) = D(E) − 2πk`.
#[allow(clippy::too_many_arguments)]
fn refine(
    params: &ModelParams,
    kappa: f64,
    n: i32,
    k: i64,
    lo: f64,
    hi: f64,
    mut report: ShootingReport,
    tol: &EigenTolerances,
) -> Result<SeparatedState> {
    let target = TAU * k as f64;
    let mut inner = 0usize;
    let mut g = |e: f64| -> Result<f64> {
        let ev = evaluate(params, kappa, n, e, false)?;
        inner += ev.angular.evaluations;
        Ok(ev.shot.mismatch - target)
    };
    let xtol = 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(params.m * 1e-3);
    let found = root::brent(&mut g, lo, hi, xtol, tol.tol_match)?;
    report.outer_evaluations += found.evaluations;
    report.angular_evaluations += inner;
    finish(params, kappa, n, k, found.x, report, tol, xtol)
}

/// Eigenvalue on the branch `(κ, n)` with radial winding `k`.
pub fn solve_eigenvalue(
    params: &ModelParams,
    kappa: f64,
    n: i32,
    k: i64,
    tol: &EigenTolerances,
) -> Result<SeparatedState> {
    check(params, kappa, n)?;
    let target = TAU * k as f64;
    let mut report = ShootingReport::default();
    let mut count = 0usize;
    let mut g = |e: f64| -> Result<f64> {
        count += 1;
        Ok(evaluate(params, kappa, n, e, false)?.shot.mismatch - target)
    };
    let g0 = g(0.0)?;
    if g0 == 0.0 {
        report.outer_evaluations = count;
        return finish(params, kappa, n, k, 0.0, report, tol, 0.0);
    }
    // D decreases in E: a positive residual at 0 puts the root above.
    let end = if g0 > 0.0 { params.m } else { -params.m };
    let br = geometric_bracket(&mut g, 0.0, g0, end, &mut report.brackets)?;
    report.outer_evaluations = count;
    match br {
        Some((lo, hi)) => refine(params, kappa, n, k, lo, hi, report, tol),
        None => {
            report.winding = k;
            report.note = "no sign change before the gap edge".into();
            Err(ZgknError::NoConvergence(Box::new(report)))
        }
    }
}

/// Eigenvalue on `(κ, n)` with `level` counted outward from `E = 0`.
pub fn solve_level(
    params: &ModelParams,
    kappa: f64,
    n: i32,
    level: i32,
    tol: &EigenTolerances,
) -> Result<SeparatedState> {
    let k = level_winding(params, kappa, n, level)?;
    solve_eigenvalue(params, kappa, n, k, tol)
}

/// Local search on `(κ, n)` started at `seed`, bracketing outward with doubling steps.
pub fn solve_near(
    params: &ModelParams,
    kappa: f64,
    n: i32,
    seed: f64,
    tol: &EigenTolerances,
) -> Result<SeparatedState> {
    check(params, kappa, n)?;
    let m = params.m;
    radial_saddles(seed, m)?;
    let d = evaluate(params, kappa, n, seed, false)?.shot.mismatch;
    let k = (d / TAU).round() as i64;
    let target = TAU * k as f64;
    let mut report = ShootingReport::default();
    let g0 = d - target;
    if g0.abs() <= tol.tol_match {
        report.outer_evaluations = 1;
        return finish(params, kappa, n, k, seed, report, tol, 0.0);
    }
    let g = |e: f64| -> Result<f64> { Ok(evaluate(params, kappa, n, e, false)?.shot.mismatch - target) };
    let end = if g0 > 0.0 { m } else { -m };
    let room = (end - seed).abs();
    let mut h = (1e-9 * m).min(0.5 * room);
    let mut prev = seed;
    for _ in 0..80 {
        let x = if h >= room { seed + (end - seed) * (1.0 - 1e-12) } else { seed + h * end.signum() };
        let gx = g(x)?;
        report.outer_evaluations += 1;
        report.brackets.push((prev.min(x), prev.max(x)));
        if gx.signum() != g0.signum() {
            return refine(params, kappa, n, k, prev.min(x), prev.max(x), report, tol);
        }
        if h >= room {
            break;
        }
        prev = x;
        h *= 2.0;
    }
    report.winding = k;
    report.note = format!("no sign change near seed {seed}");
    Err(ZgknError::NoConvergence(Box::new(report)))
}

/// Partner of an eigenvalue under charge conjugation: `(−κ, −n)` at `−E`.
pub fn symmetric_partner(state: &SeparatedState, tol: &EigenTolerances) -> Result<SeparatedState> {
    solve_near(&state.params, -state.kappa, -state.n, -state.energy, tol)
}

/// Scan request: branches `(κ, n)` and windings per branch, inside `window`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub kappas: Vec<f64>,
    /// Angular branch labels; ones inadmissible for a κ are skipped.
    pub branches: Vec<i32>,
    pub windings: (i64, i64),
    pub window: (f64, f64),
    pub tolerances: EigenTolerances,
}

#[derive(Debug, Clone)]
pub struct ScanFailure {
    pub kappa: f64,
    pub n: i32,
    pub winding: i64,
    pub error: ZgknError,
}

#[derive(Debug, Clone, Default)]
pub struct ScanResult {
    pub states: Vec<SeparatedState>,
    pub failures: Vec<ScanFailure>,
}

fn scan_cell(params: &ModelParams, kappa: f64, n: i32, k: i64, spec: &ScanSpec) -> Result<Option<SeparatedState>> {
    let (w0, w1) = spec.window;
    let m = params.m;
    let target = TAU * k as f64;
    let mut g = |e: f64| -> Result<f64> { Ok(evaluate(params, kappa, n, e, false)?.shot.mismatch - target) };
    // Window edges at ±m are open: approach them geometrically.
    let edge = |g: &mut dyn FnMut(f64) -> Result<f64>, w: f64, inward: f64| -> Result<f64> {
        if w.abs() < m {
            return g(w);
        }
        // Probes too close to the threshold can fail on the very long tails;
        // they are skipped inward like probes of the wrong sign.
        let mut step = 1e-12;
        let mut v = g(w.signum() * m * (1.0 - step));
        while v.as_ref().map_or(true, |v| v.signum() == inward) && step < 0.5 {
            step *= 16.0;
            v = g(w.signum() * m * (1.0 - step));
        }
        v
    };
    let lo_v = edge(&mut g, w0, -1.0)?;
    let hi_v = edge(&mut g, w1, 1.0)?;
    if !(lo_v >= 0.0 && hi_v <= 0.0) {
        return Ok(None);
    }
    let st = solve_eigenvalue(params, kappa, n, k, &spec.tolerances)?;
    Ok((st.energy > w0 && st.energy < w1).then_some(st))
}

/// Enumerate eigenvalues in `window` by winding cell, sorted by `E`.
pub fn spectrum_scan(params: &ModelParams, spec: &ScanSpec) -> Result<ScanResult> {
    let (w0, w1) = spec.window;
    let m = params.m;
    if !(w0 < w1) || w0 < -m || w1 > m {
        let e = if w0 < -m { w0 } else { w1 };
        return Err(ZgknError::NoGap { energy: e, mass: m });
    }
    if !params.is_separable() {
        return Err(ZgknError::NonSeparable);
    }
    let mut cells = Vec::new();
    for &kappa in &spec.kappas {
        validate_kappa(kappa)?;
        for &n in &spec.branches {
            if validate_branch(n, kappa).is_err() {
                continue;
            }
            for k in spec.windings.0..=spec.windings.1 {
                cells.push((kappa, n, k));
            }
        }
    }
    let run = |&(kappa, n, k): &(f64, i32, i64)| (kappa, n, k, scan_cell(params, kappa, n, k, spec));
    #[cfg(feature = "parallel")]
    let outcomes: Vec<_> = {
        use rayon::prelude::*;
        cells.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<_> = cells.iter().map(run).collect();

    let mut out = ScanResult::default();
    for (kappa, n, winding, o) in outcomes {
        match o {
            Ok(Some(st)) => out.states.push(st),
            Ok(None) => {}
            Err(error) => out.failures.push(ScanFailure { kappa, n, winding, error }),
        }
    }
    out.states.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.kappa.total_cmp(&b.kappa)).then(a.n.cmp(&b.n)));
    out.states.dedup_by(|x, y| x.kappa == y.kappa && x.n == y.n && (x.energy - y.energy).abs() <= 1e-9 * m);
    Ok(out)
}

/// Dirac labels `(N, κ_D)` reached by a positive level on branch `n` as `a → 0`.
/// The branch label plays the role of the Dirac `κ_D`; found by continuation in `a`.
pub fn sommerfeld_label(n: i32, level: i32) -> Result<(u32, i32)> {
    if level <= 0 || n == 0 {
        return Err(ZgknError::InvalidQuantumNumbers(format!("n = {n}, level = {level}")));
    }
    let principal = level as u32 + n.unsigned_abs() - 1 + u32::from(n > 0);
    Ok((principal, n))
}

#[cfg(test)]
mod tests {
    use super::super::sommerfeld_energy;
    use super::*;

    const ALPHA: f64 = 1.0 / 137.036;

    fn hydrogen(a: f64) -> ModelParams {
        ModelParams::from_coupling(a, 1.0, -ALPHA)
    }

    #[test]
    fn small_ring_reproduces_fine_structure() {
        let p = hydrogen(1e-4);
        let tol = EigenTolerances::default();
        for (n, level) in [(-1, 1), (-1, 2), (1, 1), (-2, 1)] {
            let st = solve_level(&p, -0.5, n, level, &tol).unwrap();
            let (nn, kd) = sommerfeld_label(n, level).unwrap();
            let e = sommerfeld_energy(nn, kd, ALPHA, 1.0).unwrap();
            assert!((st.energy - e).abs() < 1e-6, "n={n} level={level}: {} vs {e}", st.energy);
            assert!(st.report.converged);
        }
    }

    #[test]
    fn state_is_normalized_and_conserves_current() {
        let p = ModelParams::from_coupling(0.2, 1.0, -0.3);
        let st = solve_level(&p, -0.5, -1, 1, &EigenTolerances::default()).unwrap();
        assert!(st.energy > 0.0 && st.energy < 1.0);
        assert!((st.norm_sqr().unwrap() - 1.0).abs() < 1e-10);
        assert!(st.conservation_drift().unwrap() < 1e-8);
        let (lo, _, hi) = st.radial_range();
        assert!(st.radial(lo).unwrap().0 < 1e-12 && st.radial(hi).unwrap().0 < 1e-12);
        // Off-node values continue smoothly across the matching point.
        let rm = st.radial_range().1;
        let (a, oa) = st.radial(rm - 1e-9).unwrap();
        let (b, ob) = st.radial(rm + 1e-9).unwrap();
        assert!((a - b).abs() < 1e-7 * a && (oa - ob).abs() < 1e-7);
    }

    #[test]
    fn partner_has_opposite_energy() {
        let p = ModelParams::from_coupling(0.2, 1.0, -0.3);
        let tol = EigenTolerances::default();
        let st = solve_level(&p, 0.5, 1, 1, &tol).unwrap();
        let seeded = symmetric_partner(&st, &tol).unwrap();
        assert!((seeded.energy + st.energy).abs() < 1e-10);
        let independent = solve_level(&p, -0.5, -1, -1, &tol).unwrap();
        assert!((independent.energy + st.energy).abs() < 1e-10);
    }

    #[test]
    fn scan_is_sorted_and_symmetric() {
        let p = ModelParams::from_coupling(0.2, 1.0, -0.3);
        let spec = ScanSpec {
            kappas: vec![-0.5, 0.5],
            branches: vec![-1, 1],
            windings: (-3, 3),
            window: (-0.999, 0.999),
            tolerances: EigenTolerances::default(),
        };
        let out = spectrum_scan(&p, &spec).unwrap();
        assert!(out.failures.is_empty(), "{:?}", out.failures);
        assert!(!out.states.is_empty());
        let es: Vec<f64> = out.states.iter().map(|s| s.energy).collect();
        assert!(es.windows(2).all(|w| w[0] <= w[1]));
        for e in &es {
            assert!(es.iter().any(|f| (e + f).abs() < 1e-9), "no partner for {e}");
        }
        assert!(matches!(spectrum_scan(&p, &ScanSpec { window: (-1.5, 0.5), ..spec }), Err(ZgknError::NoGap { .. })));
    }

    #[test]
    fn free_particle_has_no_level_in_window() {
        let p = ModelParams::from_coupling(1e-6, 1.0, 0.0);
        let spec = ScanSpec {
            kappas: vec![-0.5],
            branches: vec![-1],
            windings: (-2, 2),
            window: (-0.99, 0.99),
            tolerances: EigenTolerances::default(),
        };
        assert!(spectrum_scan(&p, &spec).unwrap().states.is_empty());
    }
}
