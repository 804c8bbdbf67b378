//! Guiding law `dQ^μ/dτ = Ψ̄γ^μΨ/√(η(j, j))` for stationary states and finite
//! superpositions, orientation transport, the ring-frame view and speed scales.
//!
//! Trajectories are integrated with Boyer–Lindquist time `t` as parameter,
//! carrying proper time through `dτ/dt = √(η(j, j))/jᵗ`; null segments are
//! flagged and continue with `τ` frozen.

use nalgebra::Matrix3;
use num_complex::Complex64 as C;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::bispinor::{dot, norm3, BiSpinor, Vec3};
use crate::dirac_op::cartan_frame;
use crate::error::{Result, ZgknError};
use crate::geometry::{self, ModelParams};
use crate::ode::{self, OdeOptions};
use crate::spectral::SeparatedState;

/// Densities below this floor count as leaving the support of the state.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// A bi-spinor field `Ψ̂(t, r, θ, φ)`.
pub trait SpinorField: Sync {
    fn eval(&self, t: f64, r: f64, theta: f64, phi: f64) -> Result<BiSpinor>;

    /// Ring radius of the underlying spacetime.
    fn ring_radius(&self) -> f64;
}

impl SpinorField for SeparatedState {
    fn eval(&self, t: f64, r: f64, theta: f64, phi: f64) -> Result<BiSpinor> {
        self.bispinor(t, r, theta, phi)
    }

    fn ring_radius(&self) -> f64 {
        self.params.a
    }
}

/// `Σ c_k Ψ̂_k` over eigenstates sharing one spacetime.
#[derive(Debug, Clone)]
pub struct Superposition {
    pub terms: Vec<(C, SeparatedState)>,
}

impl Superposition {
    pub fn new(terms: Vec<(C, SeparatedState)>) -> Result<Self> {
        let Some((_, first)) = terms.first() else {
            return Err(ZgknError::InvalidParams("empty superposition".into()));
        };
        if terms.iter().any(|(_, s)| s.params != first.params) {
            return Err(ZgknError::InvalidParams("superposed states must share parameters".into()));
        }
        Ok(Self { terms })
    }
}

impl SpinorField for Superposition {
    fn eval(&self, t: f64, r: f64, theta: f64, phi: f64) -> Result<BiSpinor> {
        let mut out = [C::from(0.0); 4];
        for (c, s) in &self.terms {
            let v = s.bispinor(t, r, theta, phi)?;
            for k in 0..4 {
                out[k] += c * v.0[k];
            }
        }
        Ok(BiSpinor(out))
    }

    fn ring_radius(&self) -> f64 {
        self.terms[0].1.params.a
    }
}

/// Guiding data at one spacetime point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Guidance {
    /// `dQ^μ/dτ` in BL coordinates; for null currents `dQ^μ/ds = Ψ̄γ^μΨ/j⁰`.
    pub u: [f64; 4],
    /// Spatial frame velocity `j/j⁰`.
    pub v: Vec3,
    pub null: bool,
    /// `dτ/dt`.
    pub dtau_dt: f64,
}

/// Guiding four-velocity at `q = (t, r, θ, φ)`.
pub fn guidance(field: &dyn SpinorField, q: [f64; 4]) -> Result<Guidance> {
    let psi = field.eval(q[0], q[1], q[2], q[3])?;
    let rho = psi.norm_sqr();
    if !(rho > DENSITY_FLOOR) {
        return Err(ZgknError::ZeroDensity { at: q });
    }
    let cur = psi.current()?;
    let frame = cartan_frame(q[1], q[2], field.ring_radius())?;
    // Frame spatial indices (1, 2, 3) carry σ_x, σ_y, σ_z.
    let jf = [cur.j0, cur.j[0], cur.j[1], cur.j[2]];
    let norm = if cur.null { cur.j0 } else { cur.eta_jj.sqrt() };
    let mut u = [0.0; 4];
    for (al, ja) in jf.iter().enumerate() {
        for (nu, un) in u.iter_mut().enumerate() {
            *un += ja * frame.e[al][nu] / norm;
        }
    }
    let dtau_dt = if cur.null { 0.0 } else { 1.0 / u[0] };
    Ok(Guidance { u, v: [cur.j[0] / cur.j0, cur.j[1] / cur.j0, cur.j[2] / cur.j0], null: cur.null, dtau_dt })
}

/// One classical RK4 step of length `dtau` in proper time.
pub fn guide_step(field: &dyn SpinorField, q: [f64; 4], dtau: f64) -> Result<[f64; 4]> {
    let f = |x: [f64; 4]| guidance(field, x).map(|g| g.u);
    let add = |x: [f64; 4], k: [f64; 4], h: f64| std::array::from_fn(|i| x[i] + h * k[i]);
    let k1 = f(q)?;
    let k2 = f(add(q, k1, 0.5 * dtau))?;
    let k3 = f(add(q, k2, 0.5 * dtau))?;
    let k4 = f(add(q, k3, dtau))?;
    Ok(std::array::from_fn(|i| q[i] + dtau / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])))
}

/// `g(u, u)` in BL coordinates; equals 1 for a normalized timelike four-velocity.
pub fn four_velocity_norm(q: [f64; 4], u: [f64; 4], a: f64) -> Result<f64> {
    let g = geometry::metric_coeffs(q[1], q[2], a)?;
    Ok((0..4).map(|m| (0..4).map(|n| g[m][n] * u[m] * u[n]).sum::<f64>()).sum())
}

/// Euclidean unit vectors `(θ̂, φ̂, r̂)` at a BL point; frame legs 1, 2, 3 map onto them.
pub fn frame_axes(r: f64, theta: f64, phi: f64, a: f64) -> [Vec3; 3] {
    let w = geometry::varpi(r, a);
    let (s, c) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let unit = |v: Vec3| {
        let n = norm3(v);
        [v[0] / n, v[1] / n, v[2] / n]
    };
    let e_r = unit([r / w * s * cp, r / w * s * sp, c]);
    let e_t = unit([w * c * cp, w * c * sp, -r * s]);
    [e_t, [-sp, cp, 0.0], e_r]
}

fn to_cartesian(axes: &[Vec3; 3], v: Vec3) -> Vec3 {
    std::array::from_fn(|i| axes[0][i] * v[0] + axes[1][i] * v[1] + axes[2][i] * v[2])
}

/// One emitted point of a worldline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldlineSample {
    pub tau: f64,
    /// `(t, r, θ, φ)`.
    pub q: [f64; 4],
    /// Euclidean position.
    pub x: Vec3,
    /// `|j|/j⁰` in the orthonormal frame.
    pub speed: f64,
    /// `(Ľ, M̌, Ň)` in Euclidean axes, absent where the frame degenerates.
    pub dreibein: Option<[Vec3; 3]>,
    pub null: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Worldline {
    pub a: f64,
    pub samples: Vec<WorldlineSample>,
    /// Worst deviation from orthonormality among the emitted Dreibeine.
    pub frame_drift: f64,
    /// Worst `|g(u, u) − 1|` along timelike samples.
    pub normalization_drift: f64,
    /// Set when integration stopped early.
    #[serde(skip)]
    pub error: Option<ZgknError>,
}

fn sample(field: &dyn SpinorField, tau: f64, q: [f64; 4]) -> Result<(WorldlineSample, f64, f64)> {
    let a = field.ring_radius();
    let g = guidance(field, q)?;
    let psi = field.eval(q[0], q[1], q[2], q[3])?;
    let axes = frame_axes(q[1], q[2], q[3], a);
    let dreibein = psi.orientation()?.unit_frame().map(|f| f.map(|v| to_cartesian(&axes, v)));
    let drift = dreibein.map_or(0.0, |d| {
        let mut w = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                w = w.max((dot(d[i], d[j]) - f64::from(u8::from(i == j))).abs());
            }
        }
        w
    });
    let nd = if g.null { 0.0 } else { (four_velocity_norm(q, g.u, a)? - 1.0).abs() };
    let s = WorldlineSample {
        tau,
        q,
        x: geometry::cartesian(q[1], q[2], q[3], a),
        speed: norm3(g.v),
        dreibein,
        null: g.null,
    };
    Ok((s, drift, nd))
}

/// Integrate from `q0` over coordinate time `[q0.t, q0.t + t_span]`, emitting
/// `n_samples + 1` equally spaced samples. Errors end the worldline early.
pub fn integrate_trajectory(
    field: &dyn SpinorField,
    q0: [f64; 4],
    t_span: f64,
    n_samples: usize,
    opts: &OdeOptions,
) -> Worldline {
    let a = field.ring_radius();
    let mut w = Worldline { a, samples: Vec::new(), frame_drift: 0.0, normalization_drift: 0.0, error: None };
    let err = std::cell::RefCell::new(None);
    // State (τ, r, θ, φ) as functions of t.
    let rhs = |t: f64, y: &[f64; 4]| -> [f64; 4] {
        if err.borrow().is_some() {
            return [0.0; 4];
        }
        match guidance(field, [t, y[1], y[2], y[3]]) {
            Ok(g) => {
                let ut = g.u[0];
                [g.dtau_dt, g.u[1] / ut, g.u[2] / ut, g.u[3] / ut]
            }
            Err(e) => {
                *err.borrow_mut() = Some(e);
                [0.0; 4]
            }
        }
    };
    let mut y = [0.0, q0[1], q0[2], q0[3]];
    let dt = t_span / n_samples.max(1) as f64;
    let mut t = q0[0];
    for k in 0..=n_samples {
        if k > 0 {
            match ode::integrate(rhs, t, y, t + dt, opts, false) {
                Ok(sol) => y = sol.y_end,
                Err(e) => {
                    w.error = Some(e);
                    break;
                }
            }
            t += dt;
        }
        if let Some(e) = err.borrow_mut().take() {
            w.error = Some(e);
            break;
        }
        match sample(field, y[0], [t, y[1], y[2], y[3]]) {
            Ok((s, drift, nd)) => {
                w.frame_drift = w.frame_drift.max(drift);
                w.normalization_drift = w.normalization_drift.max(nd);
                w.samples.push(s);
            }
            Err(e) => {
                w.error = Some(e);
                break;
            }
        }
    }
    w
}

/// Ring-centre path `q(τ) = −𝓡⁻¹(τ)Q(τ)` and normal `Ň_rg(τ) = 𝓡⁻¹(τ)Ň_rg(0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingTrack {
    pub t: Vec<f64>,
    pub center: Vec<Vec3>,
    pub normal: Vec<Vec3>,
    /// `𝓡(τ)` as row-major matrices.
    pub rotations: Vec<[[f64; 3]; 3]>,
    /// Sample indices whose Dreibein was degenerate and whose rotation was interpolated.
    pub bridged: Vec<usize>,
    /// Worst `|𝓡 q + Q|`.
    pub inverse_residual: f64,
}

fn mat(d: &[Vec3; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| d[j][i])
}

/// Nearest rotation to `m` (orthogonal Procrustes).
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * vt
}

fn slerp(r0: &Matrix3<f64>, r1: &Matrix3<f64>, s: f64) -> Matrix3<f64> {
    let q0 = nalgebra::UnitQuaternion::from_matrix(r0);
    let q1 = nalgebra::UnitQuaternion::from_matrix(r1);
    q0.slerp(&q1, s).to_rotation_matrix().into_inner()
}

/// Ring view of a worldline; `normal0` aligns the ring normal at the first sample.
pub fn ring_frame_view(w: &Worldline, normal0: Vec3) -> Result<RingTrack> {
    let first = w.samples.iter().find_map(|s| s.dreibein).ok_or(ZgknError::DegenerateFrame)?;
    let d0 = mat(&first);
    let mut rot: Vec<Option<Matrix3<f64>>> =
        w.samples.iter().map(|s| s.dreibein.map(|d| nearest_rotation(&(mat(&d) * d0.transpose())))).collect();
    let mut bridged = Vec::new();
    let known: Vec<usize> = (0..rot.len()).filter(|&i| rot[i].is_some()).collect();
    for i in 0..rot.len() {
        if rot[i].is_some() {
            continue;
        }
        bridged.push(i);
        let prev = known.iter().rev().find(|&&k| k < i).copied();
        let next = known.iter().find(|&&k| k > i).copied();
        rot[i] = Some(match (prev, next) {
            (Some(p), Some(n)) => {
                let (rp, rn) = (rot[p].unwrap(), rot[n].unwrap());
                slerp(&rp, &rn, (i - p) as f64 / (n - p) as f64)
            }
            (Some(p), None) => rot[p].unwrap(),
            (None, Some(n)) => rot[n].unwrap(),
            (None, None) => return Err(ZgknError::DegenerateFrame),
        });
    }
    let n0 = nalgebra::Vector3::from(normal0);
    let mut tr = RingTrack {
        t: Vec::new(),
        center: Vec::new(),
        normal: Vec::new(),
        rotations: Vec::new(),
        bridged,
        inverse_residual: 0.0,
    };
    for (s, r) in w.samples.iter().zip(rot) {
        let r = r.unwrap();
        let inv = r.transpose();
        let x = nalgebra::Vector3::from(s.x);
        let q = -(inv * x);
        tr.inverse_residual = tr.inverse_residual.max((r * q + x).norm());
        let n = inv * n0;
        tr.t.push(s.q[0]);
        tr.center.push([q[0], q[1], q[2]]);
        tr.normal.push([n[0], n[1], n[2]]);
        tr.rotations.push(std::array::from_fn(|i| std::array::from_fn(|j| r[(i, j)])));
    }
    Ok(tr)
}

/// Speed diagnostics against the quantum scale `α_S c` and the Larmor scale `10⁻³α_S³c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiStaticReport {
    pub max_speed: f64,
    pub alpha_s: f64,
    pub c_quantum: f64,
    pub c_larmor: f64,
    pub speed_over_quantum: f64,
    /// `max_speed ≤ 0.1 c`.
    pub quasi_static: bool,
}

pub fn quasi_static_report(w: &Worldline, params: &ModelParams) -> QuasiStaticReport {
    let max_speed = w.samples.iter().map(|s| s.speed).fold(0.0, f64::max);
    let alpha_s = params.gamma().abs();
    let c_quantum = alpha_s;
    QuasiStaticReport {
        max_speed,
        alpha_s,
        c_quantum,
        c_larmor: 1e-3 * alpha_s.powi(3),
        speed_over_quantum: if c_quantum > 0.0 { max_speed / c_quantum } else { f64::INFINITY },
        quasi_static: max_speed <= 0.1,
    }
}

/// Dominant nonzero angular frequency of uniformly sampled data with spacing `dt`,
/// refined by parabolic interpolation of the periodogram peak.
pub fn dominant_frequency(series: &[f64], dt: f64) -> Option<f64> {
    let n = series.len();
    if n < 8 {
        return None;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    // Hann window to suppress leakage.
    let mut buf: Vec<C> = series
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let w = 0.5 - 0.5 * (std::f64::consts::TAU * k as f64 / (n - 1) as f64).cos();
            C::from((x - mean) * w)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let p: Vec<f64> = buf[..n / 2].iter().map(|z| z.norm_sqr()).collect();
    let k = (1..p.len()).max_by(|&i, &j| p[i].total_cmp(&p[j]))?;
    let shift = if k + 1 < p.len() {
        let (l, c, r) = (p[k - 1].ln(), p[k].ln(), p[k + 1].ln());
        let den = l - 2.0 * c + r;
        if den != 0.0 {
            0.5 * (l - r) / den
        } else {
            0.0
        }
    } else {
        0.0
    };
    Some(std::f64::consts::TAU * (k as f64 + shift) / (n as f64 * dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::eigen::{solve_level, EigenTolerances};

    fn ground() -> SeparatedState {
        let p = ModelParams::from_coupling(0.2, 1.0, -0.3);
        solve_level(&p, -0.5, -1, 1, &EigenTolerances::default()).unwrap()
    }

    fn opts() -> OdeOptions {
        OdeOptions { rtol: 1e-11, atol: 1e-12, ..OdeOptions::default() }
    }

    #[test]
    fn eigenstate_circulates_azimuthally() {
        let st = ground();
        let q0 = [0.0, 1.5, 0.8, 0.0];
        let g = guidance(&st, q0).unwrap();
        assert!(g.u[1] == 0.0 && g.u[2] == 0.0);
        assert!((four_velocity_norm(q0, g.u, 0.2).unwrap() - 1.0).abs() < 1e-12);
        let w = integrate_trajectory(&st, q0, 100.0, 1000, &opts());
        assert!(w.error.is_none());
        assert_eq!(w.samples.len(), 1001);
        let rate = g.u[3] / g.u[0];
        for s in &w.samples {
            assert!((s.q[1] - 1.5).abs() <= 1e-6 && (s.q[2] - 0.8).abs() <= 1e-6);
            assert!(s.speed <= 1.0 + 1e-10);
            assert!((s.q[3] - rate * s.q[0]).abs() < 1e-9 * (1.0 + s.q[3].abs()));
        }
        assert!(w.frame_drift < 1e-10 && w.normalization_drift < 1e-10);
        let taus: Vec<f64> = w.samples.iter().map(|s| s.tau).collect();
        assert!(taus.windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn rk4_step_stays_on_the_orbit() {
        let st = ground();
        let q = guide_step(&st, [0.0, 1.5, 0.8, 0.0], 0.1).unwrap();
        assert!(q[0] > 0.0 && q[1] == 1.5 && q[2] == 0.8);
    }

    #[test]
    fn ring_normal_is_fixed_for_eigenstates() {
        let st = ground();
        let w = integrate_trajectory(&st, [0.0, 1.5, 0.8, 0.0], 60.0, 200, &opts());
        let tr = ring_frame_view(&w, [0.0, 0.0, 1.0]).unwrap();
        assert!(tr.inverse_residual < 1e-10);
        for n in &tr.normal {
            assert!((n[2] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn superposition_beats_at_energy_difference() {
        let p = ModelParams::from_coupling(0.2, 1.0, -0.3);
        let tol = EigenTolerances::default();
        let s1 = solve_level(&p, -0.5, -1, 1, &tol).unwrap();
        let s2 = solve_level(&p, -0.5, -1, 2, &tol).unwrap();
        let de = s2.energy - s1.energy;
        let sup = Superposition::new(vec![(C::from(1.0), s1), (C::from(0.5), s2)]).unwrap();
        let span = 12.0 * std::f64::consts::TAU / de;
        let w = integrate_trajectory(&sup, [0.0, 2.0, 1.0, 0.3], span, 2048, &opts());
        assert!(w.error.is_none());
        let rs: Vec<f64> = w.samples.iter().map(|s| s.q[1]).collect();
        let f = dominant_frequency(&rs, span / 2048.0).unwrap();
        assert!((f - de).abs() < 5e-3 * de, "{f} vs {de}");
    }

    #[test]
    fn procrustes_recovers_rotations() {
        let r = nalgebra::Rotation3::from_euler_angles(0.3, -1.1, 2.0).into_inner();
        let noisy = r + Matrix3::from_element(1e-9);
        assert!((nearest_rotation(&noisy) - r).norm() < 1e-8);
        assert!((nearest_rotation(&r).determinant() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn frequency_of_pure_tone() {
        let dt = 0.1;
        let xs: Vec<f64> = (0..1000).map(|k| (0.7 * k as f64 * dt).sin()).collect();
        assert!((dominant_frequency(&xs, dt).unwrap() - 0.7).abs() < 2e-3);
    }

    #[test]
    fn static_worldline_reports_zero_speed() {
        let w = Worldline {
            a: 1.0,
            samples: vec![WorldlineSample {
                tau: 0.0,
                q: [0.0, 1.0, 1.0, 0.0],
                x: [1.0, 0.0, 0.0],
                speed: 0.0,
                dreibein: None,
                null: false,
            }],
            frame_drift: 0.0,
            normalization_drift: 0.0,
            error: None,
        };
        let rep = quasi_static_report(&w, &ModelParams::from_coupling(1.0, 1.0, -1.0 / 137.036));
        assert_eq!(rep.max_speed, 0.0);
        assert!(rep.quasi_static);
        assert!((rep.c_larmor - 1e-3 * rep.alpha_s.powi(3)).abs() < 1e-20);
    }
}
