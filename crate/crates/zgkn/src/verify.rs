//! Acceptance checks, one function per criterion.
//!
//! Each check returns a [`CriterionResult`] instead of panicking, so the
//! test harness and the CLI can print the same pass/fail table.

use std::f64::consts::{PI, TAU};
use std::time::Instant;

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bohm::integrate_trajectory;
use crate::dirac_op::{
    hamiltonian_apply, mhat, mhat_eigenvalues, norm, relative_residual, symmetry_apply, Grid, GridBiSpinor, Symmetry,
};
use crate::fields::{gauss_flux, phi_kn, psi_kn};
use crate::geometry::{self, Chart, SpacetimePoint};
use crate::interaction::{interaction, QuadratureConfig};
use crate::ode::OdeOptions;
use crate::spectral::angular::{dense_branch_eigenvalue, solve_angular};
use crate::spectral::eigen::{
    solve_level, sommerfeld_label, spectrum_scan, symmetric_partner, EigenTolerances, ScanResult, ScanSpec,
    SeparatedState,
};
use crate::spectral::sommerfeld_energy;
use crate::{Bl, ModelParams, Result, Sheet, ZgknError};

/// Fine-structure constant used by the Sommerfeld check.
pub const ALPHA: f64 = 1.0 / 137.036;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed_s: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        format!("[{tag}] {:>2} {:<28} {} ({:.1} s)", self.id, self.name, self.detail, self.elapsed_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Fewer sample points and test points; same tolerances.
    pub quick: bool,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { quick: false, seed: 20_240_601 }
    }
}

fn timed(id: u8, name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> CriterionResult {
    let t = Instant::now();
    let (passed, detail) = match f() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionResult { id, name: name.into(), passed, detail, elapsed_s: t.elapsed().as_secs_f64() }
}

/// Parameters of the scan shared by criteria 2, 3, 5, 7 and 8.
pub fn scan_params() -> ModelParams {
    ModelParams::from_coupling(0.2, 1.0, -0.3)
}

pub fn scan_spec() -> ScanSpec {
    ScanSpec {
        kappas: vec![-0.5, 0.5],
        branches: vec![-2, -1, 1, 2],
        windings: (-3, 3),
        window: (-0.999, 0.999),
        tolerances: EigenTolerances::default(),
    }
}

pub fn reference_scan() -> Result<ScanResult> {
    spectrum_scan(&scan_params(), &scan_spec())
}

pub fn sommerfeld_limit() -> CriterionResult {
    timed(1, "Sommerfeld limit", || {
        let tol = EigenTolerances::default();
        let (nn, kd) = sommerfeld_label(-1, 1)?;
        let exact = sommerfeld_energy(nn, kd, ALPHA, 1.0)?;
        let mut errs = Vec::new();
        let mut slowest = 0.0f64;
        for a in [1e-4, 1e-5, 1e-6] {
            let t = Instant::now();
            let st = solve_level(&ModelParams::from_coupling(a, 1.0, -ALPHA), -0.5, -1, 1, &tol)?;
            slowest = slowest.max(t.elapsed().as_secs_f64());
            errs.push((st.energy - exact).abs());
        }
        let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
        let passed = decreasing && errs[2] <= 1e-5 && slowest < 60.0;
        Ok((passed, format!("|ΔE| = {:.2e}, {:.2e}, {:.2e}; slowest {slowest:.2} s", errs[0], errs[1], errs[2])))
    })
}

pub fn spectral_symmetry(scan: &ScanResult) -> CriterionResult {
    timed(2, "spectral symmetry", || {
        let tol = EigenTolerances::default();
        let mut worst = 0.0f64;
        for st in &scan.states {
            let partner = symmetric_partner(st, &tol)?;
            worst = worst.max((partner.energy + st.energy).abs());
        }
        let passed = !scan.states.is_empty() && scan.failures.is_empty() && worst <= 1e-10;
        Ok((
            passed,
            format!(
                "{} levels, worst |E + E'| = {worst:.2e}, {} scan failures",
                scan.states.len(),
                scan.failures.len()
            ),
        ))
    })
}

pub fn gap_confinement(scan: &ScanResult) -> CriterionResult {
    timed(3, "gap confinement", || {
        let p = scan_params();
        let inside = p.admissible() && scan.states.iter().all(|s| s.energy.abs() < p.m);
        let widest = scan.states.iter().map(|s| s.energy.abs()).fold(0.0, f64::max);
        let mut rejected = 0;
        let windows = [(-1.5, 0.5), (-0.5, 1.0 + 1e-9), (1.0, 1.2), (-2.0, -1.0)];
        for window in windows {
            if matches!(spectrum_scan(&p, &ScanSpec { window, ..scan_spec() }), Err(ZgknError::NoGap { .. })) {
                rejected += 1;
            }
        }
        let passed = inside && !scan.states.is_empty() && rejected == windows.len();
        Ok((passed, format!("max |E| = {widest:.6}; {rejected}/{} out-of-gap windows give NoGap", windows.len())))
    })
}

pub fn angular_oracle(opts: &VerifyOptions) -> CriterionResult {
    timed(4, "angular oracle", || {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let am = rng.gen_range(-0.3..=0.3);
            let ae = rng.gen_range(-0.3..=0.3);
            let kappa: f64 = [-1.5, -0.5, 0.5, 1.5][rng.gen_range(0..4)];
            let n = kappa.abs() as i32 + 1 + rng.gen_range(0..2);
            let n = if rng.gen_bool(0.5) { n } else { -n };
            let lam = solve_angular(am, ae, kappa, n)?.lambda;
            let dense = dense_branch_eigenvalue(am, ae, kappa, n, 400)?;
            worst = worst.max((lam - dense.re).abs().max(dense.im.abs()));
        }
        Ok((worst <= 1e-6, format!("20 triples, worst |Δλ| = {worst:.2e}")))
    })
}

/// Time limit of the angular oracle, checked by the caller against `elapsed_s`.
pub const ANGULAR_BUDGET_S: f64 = 10.0;

pub fn conservation(scan: &ScanResult) -> CriterionResult {
    timed(5, "conservation law", || {
        let mut worst = 0.0f64;
        for st in &scan.states {
            worst = worst.max(st.conservation_drift()?);
        }
        let passed = !scan.states.is_empty() && worst <= 1e-8;
        Ok((passed, format!("{} states, worst drift = {worst:.2e}", scan.states.len())))
    })
}

/// On and off axis, both sheets, in the chart `(ξ, η, φ)` with `a = 1`.
pub fn interaction_points() -> Vec<Bl> {
    [(2.0, 1.0, 0.0), (-1.5, 1.0, 0.0), (1.2, 0.5, 0.7), (-0.8, -0.6, 2.0), (1.0, 0.2, 0.0)]
        .into_iter()
        .map(|(xi, eta, phi): (f64, f64, f64)| Bl::new(xi, eta.acos(), phi))
        .collect()
}

pub fn interaction_params() -> ModelParams {
    ModelParams { a: 1.0, m: 1.0, q: 0.7, q_prime: 1.3, current: 0.7 / PI }
}

pub fn interaction_propositions(opts: &VerifyOptions) -> CriterionResult {
    timed(6, "interaction propositions", || {
        let p = interaction_params();
        let cfg = QuadratureConfig::default();
        let pts = interaction_points();
        let pts = if opts.quick { &pts[2..4] } else { &pts[..] };
        let (mut worst, mut exp_lo, mut exp_hi) = (0.0f64, f64::INFINITY, f64::NEG_INFINITY);
        let mut ratios = Vec::new();
        for q in pts {
            let rep = interaction(*q, &p, &cfg)?;
            worst = worst.max(rep.p0.rel_error).max(rep.pj.rel_error);
            exp_lo = exp_lo.min(rep.p0.exponent);
            exp_hi = exp_hi.max(rep.p0.exponent);
            ratios.push(rep.p0.extrapolated / rep.p0.closed_form);
        }
        let passed = worst <= 1e-2 && exp_lo >= 0.4 && exp_hi <= 0.6;
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        Ok((
            passed,
            format!(
                "{} points, worst rel = {worst:.3}, exponent in [{exp_lo:.2}, {exp_hi:.2}], P0/closed = {mean:.4}",
                pts.len()
            ),
        ))
    })
}

pub fn circulation(scan: &ScanResult) -> CriterionResult {
    timed(7, "eigenstate circulation", || {
        let ode = OdeOptions { rtol: 1e-11, atol: 1e-12, ..OdeOptions::default() };
        let starts = [[0.0, 1.5, 0.8, 0.0], [0.0, -2.0, 2.2, 1.0]];
        let states: Vec<&SeparatedState> = scan.states.iter().filter(|s| s.report.converged).take(4).collect();
        let (mut dr, mut dphi_min, mut vmax, mut errors) = (0.0f64, f64::INFINITY, 0.0f64, 0);
        for st in &states {
            for q0 in starts {
                let w = integrate_trajectory(*st, q0, 100.0, 1000, &ode);
                if w.error.is_some() || w.samples.len() != 1001 {
                    errors += 1;
                    continue;
                }
                for s in w.samples.windows(2) {
                    dr = dr.max((s[1].q[1] - q0[1]).abs()).max((s[1].q[2] - q0[2]).abs());
                    dphi_min = dphi_min.min((s[1].q[3] - s[0].q[3]).abs());
                    vmax = vmax.max(s[1].speed);
                }
            }
        }
        let passed = !states.is_empty() && errors == 0 && dr <= 1e-6 && dphi_min > 0.0 && vmax <= 1.0;
        Ok((
            passed,
            format!(
                "{} orbits x 1000 steps, max |Δr|,|Δθ| = {dr:.1e}, min |Δφ| = {dphi_min:.1e}, max ‖v‖ = {vmax:.4}",
                states.len() * starts.len() - errors
            ),
        ))
    })
}

/// Reference resolution for the operator residual of a state with decay
/// rate `k = √(m² − E²)`.
pub fn reference_grid(state: &SeparatedState) -> Result<Grid> {
    let k = (state.params.m.powi(2) - state.energy.powi(2)).sqrt();
    Grid::for_range(0.2, 45.0 / k, 1201, 32, 4)
}

pub fn operator_residual(scan: &ScanResult) -> CriterionResult {
    timed(8, "eigenstate residual", || {
        let ground = scan
            .states
            .iter()
            .filter(|s| s.energy > 0.0)
            .min_by(|x, y| x.energy.total_cmp(&y.energy))
            .ok_or_else(|| ZgknError::InvalidParams("scan found no positive level".into()))?;
        let p = &ground.params;
        let psi = GridBiSpinor::from_state(ground, reference_grid(ground)?)?;
        let res = relative_residual(&psi, p, ground.energy)?;
        let c = symmetry_apply(&psi, Symmetry::CHat)?;
        let hc = hamiltonian_apply(&c, p)?.axpy(num_complex::Complex64::from(ground.energy), &c)?;
        let res_c = norm(&hc)? / norm(&c)?;
        let ratio = res_c / res;
        let passed = res <= 1e-6 && (0.1..=10.0).contains(&ratio);
        Ok((passed, format!("E = {:.10}, residual = {res:.2e}, Ĉ residual = {res_c:.2e}", ground.energy)))
    })
}

fn unit_sheet(rng: &mut ChaCha8Rng) -> Sheet {
    if rng.gen_bool(0.5) {
        Sheet::Positive
    } else {
        Sheet::Negative
    }
}

pub fn field_structure(opts: &VerifyOptions) -> CriterionResult {
    timed(9, "field structure", || {
        let p = ModelParams { a: 0.8, m: 1.0, q: 0.7, q_prime: 1.0, current: 0.7 / (PI * 0.8) };
        let target = 4.0 * PI * p.q;
        let up = gauss_flux(1e3 * p.a, Sheet::Positive, &p, 400)?;
        let down = gauss_flux(1e3 * p.a, Sheet::Negative, &p, 400)?;
        let flux_err = ((up - target) / target).abs().max(((down + target) / target).abs());

        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 9);
        let mut m_err = 0.0f64;
        for _ in 0..2000 {
            let r = p.a * rng.gen_range(-6.0f64..6.0).sinh();
            let theta = rng.gen_range(0.0..PI);
            let mut ev: Vec<f64> = SymmetricEigen::new(mhat(r, theta, p.a)).eigenvalues.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            let (hi, lo) = mhat_eigenvalues(r, theta, p.a);
            for (k, want) in [lo, lo, hi, hi].into_iter().enumerate() {
                m_err = m_err.max((ev[k] - want).abs());
            }
        }

        let n = if opts.quick { 10_000 } else { 100_000 };
        let mut broken = 0usize;
        for _ in 0..n {
            let xi: f64 = rng.gen_range(-20.0..20.0);
            let eta: f64 = rng.gen_range(-1.0..=1.0);
            if xi == 0.0 && eta == 0.0 {
                continue;
            }
            let same = |f: fn(f64, f64, f64, f64) -> Result<f64>| -> Result<bool> {
                Ok(f(-xi, -eta, p.q, p.a)? == -f(xi, eta, p.q, p.a)?)
            };
            if !same(phi_kn)? || !same(psi_kn)? {
                broken += 1;
            }
        }
        let passed = flux_err <= 1e-3 && m_err <= 1e-13 && broken == 0;
        Ok((passed, format!("flux rel err = {flux_err:.1e}, M̂ eig err = {m_err:.1e}, toggle violations {broken}/{n}")))
    })
}

fn angle_gap(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Largest roundtrip error over one random point, all charts.
fn roundtrip_error(rng: &mut ChaCha8Rng, a: f64) -> Result<f64> {
    let aa = a.abs();
    let mut worst = 0.0f64;
    let rel = |x: f64, y: f64, s: f64| (x - y).abs() / s;

    // Ring-centred chart through BL.
    let (xi, eta, phi) = (rng.gen_range(-20.0..20.0), rng.gen_range(-1.0..=1.0), rng.gen_range(0.0..TAU));
    let p = SpacetimePoint::ring_centered(0.0, xi, eta, phi);
    let (xi2, eta2, phi2) =
        SpacetimePoint::bl(0.0, p.to_bl(a)?.r, p.to_bl(a)?.theta, p.to_bl(a)?.phi).to_ring_centered(a)?;
    worst = worst.max(rel(xi, xi2, 1.0 + xi.abs())).max((eta - eta2).abs()).max(angle_gap(phi, phi2));

    // Cylindrical chart through BL, on a random sheet.
    let (rc, z, sheet) = (aa * rng.gen_range(0.0..10.0), aa * rng.gen_range(-10.0..10.0), unit_sheet(rng));
    let cyl = SpacetimePoint { t: 0.0, chart: Chart::Cylindrical { rho: rc, z, phi, sheet } };
    let b = cyl.to_bl(a)?;
    let (rc2, z2, _) = geometry::os_to_cyl(b.r, b.theta, b.phi, a);
    let scale = aa + rc.abs() + z.abs();
    worst = worst.max(rel(rc, rc2, scale)).max(rel(z, z2, scale));
    if b.sheet() != sheet && b.r != 0.0 {
        worst = f64::INFINITY;
    }

    // BL through the cylindrical chart and back.
    let r = aa * rng.gen_range(-5.0f64..5.0).sinh();
    let theta = rng.gen_range(0.0..PI);
    let (rc, z, _) = geometry::os_to_cyl(r, theta, phi, a);
    let (r2, theta2) = geometry::cyl_to_os(rc, z, Sheet::of_r(r), a)?;
    worst = worst.max(rel(r, r2, aa + r.abs())).max(rel(theta, theta2, 1.0));

    // BL through peripolar coordinates and back.
    if !geometry::is_ring(r, theta, a) {
        let (zeta, chi, _) = geometry::peripolar(r, theta, phi, a)?;
        let (r3, theta3) = geometry::peripolar_to_os(zeta, chi, a)?;
        worst = worst.max(rel(r, r3, aa + r.abs())).max(rel(theta, theta3, 1.0));
    }

    // Sheet swap is an involution in every chart.
    for pt in [SpacetimePoint::bl(0.0, r, theta, phi), SpacetimePoint::ring_centered(0.0, xi, eta, phi), cyl] {
        let back = geometry::sheet_swap(&geometry::sheet_swap(&pt, a)?, a)?;
        let (x, y) = (pt.to_bl(a)?, back.to_bl(a)?);
        worst = worst.max(rel(x.r, y.r, aa + x.r.abs())).max(rel(x.theta, y.theta, 1.0));
    }
    Ok(worst)
}

pub fn geometry_checks(opts: &VerifyOptions) -> CriterionResult {
    timed(10, "geometry", || {
        let a = 0.7;
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 10);
        let n = if opts.quick { 100_000 } else { 1_000_000 };
        let mut worst = 0.0f64;
        for _ in 0..n {
            worst = worst.max(roundtrip_error(&mut rng, a)?);
        }
        let ratios: Vec<f64> =
            [1e-1, 1e-2, 1e-3, 1e-4].iter().map(|e| geometry::conical_ratio(e * a, a, 512)).collect();
        let errs: Vec<f64> = ratios.iter().map(|r| (r / (4.0 * PI) - 1.0).abs()).collect();
        let refining = errs.windows(2).all(|w| w[1] <= w[0].max(1e-12));
        let passed = worst <= 1e-12 && refining && errs[3] <= 1e-2;
        Ok((
            passed,
            format!(
                "{n} points, worst roundtrip = {worst:.1e}; conical ratio/4π − 1 = {:.1e} → {:.1e}",
                errs[0], errs[3]
            ),
        ))
    })
}

/// Run every criterion in order.
pub fn run_all(opts: &VerifyOptions) -> Vec<CriterionResult> {
    let mut out = vec![sommerfeld_limit()];
    let t = Instant::now();
    match reference_scan() {
        Ok(scan) => {
            let scan_s = t.elapsed().as_secs_f64();
            let mut r = spectral_symmetry(&scan);
            r.elapsed_s += scan_s;
            out.push(r);
            out.push(gap_confinement(&scan));
            let mut ang = angular_oracle(opts);
            if ang.elapsed_s >= ANGULAR_BUDGET_S {
                ang.passed = false;
                ang.detail.push_str("; over time budget");
            }
            out.push(ang);
            out.push(conservation(&scan));
            out.push(interaction_propositions(opts));
            out.push(circulation(&scan));
            out.push(operator_residual(&scan));
        }
        Err(e) => {
            for (id, name) in [(2, "spectral symmetry"), (3, "gap confinement")] {
                out.push(timed(id, name, || Err(e.clone())));
            }
            out.push(angular_oracle(opts));
            out.push(timed(5, "conservation law", || Err(e.clone())));
            out.push(interaction_propositions(opts));
            for (id, name) in [(7, "eigenstate circulation"), (8, "eigenstate residual")] {
                out.push(timed(id, name, || Err(e.clone())));
            }
        }
    }
    out.push(field_structure(opts));
    out.push(geometry_checks(opts));
    out
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use super::*;

    #[test]
    fn lines_carry_the_verdict() {
        let r = CriterionResult { id: 3, name: "x".into(), passed: false, detail: "d".into(), elapsed_s: 0.0 };
        assert!(r.line().starts_with("[FAIL]"));
    }

    #[test]
    fn interaction_points_cover_both_sheets_and_the_axis() {
        let pts = interaction_points();
        assert_eq!(pts.len(), 5);
        assert!(pts.iter().any(|p| p.r > 0.0) && pts.iter().any(|p| p.r < 0.0));
        assert!(pts.iter().filter(|p| p.theta == 0.0).count() == 2);
        assert!(pts.iter().all(|p| (p.theta - FRAC_PI_2).abs() > 0.1 || p.r != 0.0));
    }
}
