//! Electromagnetic potentials and fields of the charged ring, and the
//! double-sheeted Coulomb potential of a point charge.
//!
//! Conventions: `φ_KN = Q r/Σ`, `A_t = −φ_KN`, `E = −∇φ_KN` in the Euclidean
//! metric of the projected sheet, so the outward flux is `+4πQ` on the first
//! sheet. The magnetic field is the curl of the Euclidean vector potential
//! `(a_φ/ϱ) φ̂` with `a_φ = I π a² r sin²θ/Σ`. Vectors are returned in the
//! Cartesian basis of the projected point.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Result, ZgknError};
use crate::geometry::{self, Bl, ModelParams, Sheet};
use crate::quadrature::GaussRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    /// Boyer–Lindquist coordinate basis `(dt, dr, dθ, dφ)`.
    Coordinate,
    /// Cartan co-frame; components are `A(e_μ)`.
    Frame,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourPotential {
    pub basis: Basis,
    pub comps: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub e: [f64; 3],
    pub b: [f64; 3],
}

fn check_ring(r: f64, theta: f64, a: f64) -> Result<()> {
    if geometry::is_ring(r, theta, a) {
        Err(ZgknError::RingPoint)
    } else {
        Ok(())
    }
}

/// `φ_KN = (Q/a) ξ/(ξ² + η²)`.
pub fn phi_kn(xi: f64, eta: f64, q: f64, a: f64) -> Result<f64> {
    let d = xi * xi + eta * eta;
    if d == 0.0 {
        return Err(ZgknError::RingPoint);
    }
    Ok(q / a * xi / d)
}

/// `ψ_KN = (Q/a) η/(ξ² + η²)`.
pub fn psi_kn(xi: f64, eta: f64, q: f64, a: f64) -> Result<f64> {
    let d = xi * xi + eta * eta;
    if d == 0.0 {
        return Err(ZgknError::RingPoint);
    }
    Ok(q / a * eta / d)
}

/// `φ_KN` in Boyer–Lindquist form, valid also for `a = 0`.
pub fn phi_kn_bl(r: f64, theta: f64, q: f64, a: f64) -> Result<f64> {
    check_ring(r, theta, a)?;
    Ok(q * r / geometry::sigma(r, theta, a))
}

/// Generalized potential `−r/Σ (Q dt − I π a² sin²θ dφ)` in the coordinate basis.
pub fn akn_gen(r: f64, theta: f64, p: &ModelParams) -> Result<FourPotential> {
    check_ring(r, theta, p.a)?;
    let sg = geometry::sigma(r, theta, p.a);
    let s2 = theta.sin().powi(2);
    Ok(FourPotential { basis: Basis::Coordinate, comps: [-p.q * r / sg, 0.0, 0.0, p.moment() * r * s2 / sg] })
}

/// Frame components `Ã_μ`; only `Ã₀` and `Ã₂` are nonzero.
pub fn atilde(r: f64, theta: f64, p: &ModelParams) -> Result<FourPotential> {
    check_ring(r, theta, p.a)?;
    let a = p.a;
    let w = geometry::varpi(r, a);
    let rho_abs = geometry::sigma(r, theta, a).sqrt();
    let st = theta.sin();
    let anom = p.anomaly();
    let a0 = -p.q * r / (rho_abs * w) - anom * a * a * r * st * st / (w * rho_abs.powi(3));
    let a2 = -anom * a * r * st / rho_abs.powi(3);
    Ok(FourPotential { basis: Basis::Frame, comps: [a0, 0.0, a2, 0.0] })
}

/// Partial derivatives `(∂_ϱ f, ∂_z f)` from `(∂_r f, ∂_θ f)`.
fn to_cyl_grad(r: f64, theta: f64, a: f64, fr: f64, ft: f64) -> (f64, f64) {
    let w = geometry::varpi(r, a);
    let sg = geometry::sigma(r, theta, a);
    let (st, ct) = theta.sin_cos();
    (fr * r * w * st / sg + ft * w * ct / sg, fr * w * w * ct / sg - ft * r * st / sg)
}

fn cyl_to_cart(phi: f64, vr: f64, vphi: f64, vz: f64) -> [f64; 3] {
    let (sp, cp) = phi.sin_cos();
    [vr * cp - vphi * sp, vr * sp + vphi * cp, vz]
}

/// Euclidean gradient of `φ_KN` in Cartesian components.
pub fn grad_phi_kn(r: f64, theta: f64, phi: f64, q: f64, a: f64) -> Result<[f64; 3]> {
    check_ring(r, theta, a)?;
    let sg = geometry::sigma(r, theta, a);
    let (st, ct) = theta.sin_cos();
    let fr = q * ((a * ct).powi(2) - r * r) / (sg * sg);
    let ft = 2.0 * q * r * a * a * st * ct / (sg * sg);
    let (gr, gz) = to_cyl_grad(r, theta, a, fr, ft);
    Ok(cyl_to_cart(phi, gr, 0.0, gz))
}

/// Euclidean gradient of `ψ_KN = Q a cos θ/Σ`, used for far-field checks.
pub fn grad_psi_kn(r: f64, theta: f64, phi: f64, q: f64, a: f64) -> Result<[f64; 3]> {
    check_ring(r, theta, a)?;
    let sg = geometry::sigma(r, theta, a);
    let (st, ct) = theta.sin_cos();
    let fr = -2.0 * q * a * ct * r / (sg * sg);
    let ft = q * a * (-st * sg - ct * 2.0 * a * a * ct * st) / (sg * sg);
    let (gr, gz) = to_cyl_grad(r, theta, a, fr, ft);
    Ok(cyl_to_cart(phi, gr, 0.0, gz))
}

/// Euclidean vector potential `(a_φ/ϱ) φ̂` with `a_φ = I π a² r sin²θ/Σ`.
pub fn vector_potential(r: f64, theta: f64, phi: f64, p: &ModelParams) -> Result<[f64; 3]> {
    check_ring(r, theta, p.a)?;
    let w = geometry::varpi(r, p.a);
    let sg = geometry::sigma(r, theta, p.a);
    let aphi_over_rho = p.moment() * r * theta.sin() / (sg * w);
    Ok(cyl_to_cart(phi, 0.0, aphi_over_rho, 0.0))
}

/// Magnetic field `∇ × A` in Cartesian components; regular on the axis.
pub fn magnetic_field(r: f64, theta: f64, phi: f64, p: &ModelParams) -> Result<[f64; 3]> {
    let a = p.a;
    check_ring(r, theta, a)?;
    let k = p.moment();
    let w = geometry::varpi(r, a);
    let sg = geometry::sigma(r, theta, a);
    let (st, ct) = theta.sin_cos();
    // a_φ = sin²θ·K r/Σ; write ∂_r a_φ = sin²θ G_r, ∂_θ a_φ = sinθ G_θ.
    let g_r = k * ((a * ct).powi(2) - r * r) / (sg * sg);
    let g_t = 2.0 * k * r * ct * w * w / (sg * sg);
    let bz = (g_r * r * st * st + g_t * ct) / sg;
    let brho = -st * (g_r * w * ct - g_t * r / w) / sg;
    Ok(cyl_to_cart(phi, brho, 0.0, bz))
}

/// Ring fields at a point.
pub fn em_fields(r: f64, theta: f64, phi: f64, p: &ModelParams) -> Result<FieldSample> {
    let g = grad_phi_kn(r, theta, phi, p.q, p.a)?;
    Ok(FieldSample { e: g.map(|c| -c), b: magnetic_field(r, theta, phi, p)? })
}

/// Outward flux of `E_KN` through the Euclidean sphere of radius `radius`
/// centred on the ring, on one sheet.
pub fn gauss_flux(radius: f64, sheet: Sheet, p: &ModelParams, n: usize) -> Result<f64> {
    let rule = GaussRule::new(n);
    let mut total = 0.0;
    for (t, wt) in rule.on(0.0, PI) {
        let (st, ct) = t.sin_cos();
        let (r, theta) = geometry::cyl_to_os(radius * st, radius * ct, sheet, p.a)?;
        let g = grad_phi_kn(r, theta, 0.0, p.q, p.a)?;
        let en = -(g[0] * st + g[2] * ct);
        total += wt * en * radius * radius * st;
    }
    Ok(TAU * total)
}

/// A point charge on the double-sheeted space, with its peripolar data cached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointSource {
    pub pos: Bl,
    pub charge: f64,
    pub cart: [f64; 3],
    pub zeta: f64,
    pub chi: f64,
}

impl PointSource {
    pub fn new(pos: Bl, charge: f64, a: f64) -> Result<Self> {
        let (zeta, chi, phi) = geometry::peripolar(pos.r, pos.theta, pos.phi, a)?;
        let pos = Bl::new(pos.r, pos.theta, phi);
        Ok(Self { pos, charge, cart: geometry::cartesian(pos.r, pos.theta, pos.phi, a), zeta, chi })
    }
}

/// Guard band applied to the arcsine argument.
const ASIN_GUARD: f64 = 1e-14;

struct PtParts {
    r_dist: f64,
    d: [f64; 3],
    x: f64,
    f: f64,
}

fn pt_parts(r: f64, theta: f64, phi: f64, src: &PointSource, a: f64) -> Result<(PtParts, [f64; 3], f64, f64)> {
    let x = geometry::cartesian(r, theta, phi, a);
    let d = [x[0] - src.cart[0], x[1] - src.cart[1], x[2] - src.cart[2]];
    let r_dist = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let (zeta, chi, _) = geometry::peripolar(r, theta, phi, a)?;
    let dphi = phi - src.pos.phi;
    let c = zeta.cosh() * src.zeta.cosh() - zeta.sinh() * src.zeta.sinh() * dphi.cos();
    let ch = (0.5 * (c.max(1.0) + 1.0)).sqrt();
    let xarg = ((0.5 * (chi - src.chi)).cos() / ch).clamp(-1.0 + ASIN_GUARD, 1.0 - ASIN_GUARD);
    let f = 0.5 + xarg.asin() / PI;
    Ok((PtParts { r_dist, d, x: xarg, f }, x, zeta, chi))
}

/// Point-charge potential `(Q′/R)(1/2 + asin(cos(Δχ/2)/cosh(ϑ/2))/π)`, with
/// `R` the projected Euclidean distance and
/// `cosh ϑ = cosh ζ cosh ζ′ − sinh ζ sinh ζ′ cos Δφ`.
pub fn phi_pt(r: f64, theta: f64, phi: f64, src: &PointSource, a: f64) -> Result<f64> {
    let (pp, _, _, _) = pt_parts(r, theta, phi, src, a)?;
    if pp.r_dist == 0.0 {
        if Sheet::of_r(r) == src.pos.sheet() {
            return Err(ZgknError::CoincidentPoints);
        }
        // Mirror point: regular, take the value slightly off it.
        let dz = 1e-7 * a.abs().max(1e-300);
        let (r2, t2) = geometry::cyl_to_os(
            geometry::os_to_cyl(r, theta, phi, a).0,
            geometry::os_to_cyl(r, theta, phi, a).1 + dz,
            Sheet::of_r(r),
            a,
        )?;
        return phi_pt(r2, t2, phi, src, a);
    }
    Ok(src.charge * pp.f / pp.r_dist)
}

/// The bracket `1/2 + asin(X)/π`; 1 at the source direction, 0 at its mirror.
pub fn phi_pt_factor(r: f64, theta: f64, phi: f64, src: &PointSource, a: f64) -> Result<f64> {
    Ok(pt_parts(r, theta, phi, src, a)?.0.f)
}

/// Analytic Euclidean gradient of [`phi_pt`] in Cartesian components.
pub fn grad_phi_pt(r: f64, theta: f64, phi: f64, src: &PointSource, a: f64) -> Result<[f64; 3]> {
    let (pp, x, zeta, chi) = pt_parts(r, theta, phi, src, a)?;
    if pp.r_dist == 0.0 {
        return Err(ZgknError::CoincidentPoints);
    }
    let aa = a.abs();
    // F(w) = ln((w + A)/(w − A)) = ζ − iχ, with w² − A² = A² sinh²ω.
    let omega = num_complex::Complex64::new((r / aa).asinh(), FRAC_PI_2 - theta);
    let fp = -2.0 / (aa * omega.sinh().powi(2));
    let (zr, zz) = (fp.re, -fp.im);
    let (cr, cz) = (-fp.im, -fp.re);
    let rc = x[0].hypot(x[1]);
    let (sp, cp) = phi.sin_cos();
    let grad_cyl = |vr: f64, vz: f64| [vr * cp, vr * sp, vz];
    let g_zeta = grad_cyl(zr, zz);
    let g_chi = grad_cyl(cr, cz);
    // ∇φ = φ̂/ϱ, only ever multiplied by sin Δφ which vanishes with ϱ on the axis.
    let dphi = phi - src.pos.phi;
    let g_phi = if rc > 0.0 { [-sp / rc, cp / rc, 0.0] } else { [0.0; 3] };

    let (shz, chz) = (zeta.sinh(), zeta.cosh());
    let (shs, chs) = (src.zeta.sinh(), src.zeta.cosh());
    let c = chz * chs - shz * shs * dphi.cos();
    let ch = (0.5 * (c.max(1.0) + 1.0)).sqrt();
    let half = 0.5 * (chi - src.chi);
    let (sh_half, cn) = half.sin_cos();
    let dc_dzeta = shz * chs - chz * shs * dphi.cos();
    let dc_dphi = shz * shs * dphi.sin();
    let one_m_x2 = ((1.0 - pp.x) * (1.0 + pp.x)).max(0.0);
    let denom = PI * one_m_x2.sqrt();
    let mut gf = [0.0; 3];
    for i in 0..3 {
        let dc = dc_dzeta * g_zeta[i] + dc_dphi * g_phi[i];
        let dch = dc / (4.0 * ch);
        let dx = -0.5 * sh_half * g_chi[i] / ch - cn * dch / (ch * ch);
        gf[i] = if denom > 0.0 { dx / denom } else { 0.0 };
    }
    let rd = pp.r_dist;
    Ok(std::array::from_fn(|i| src.charge * (gf[i] / rd - pp.f * pp.d[i] / (rd * rd * rd))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn phi_kn_examples() {
        assert_eq!(phi_kn(1.0, 0.0, 1.0, 1.0).unwrap(), 1.0);
        assert!((phi_kn(10.0, 0.0, 1.0, 1.0).unwrap() - 0.1).abs() < 1e-16);
        assert_eq!(phi_kn(-0.3, -0.2, 1.0, 1.0).unwrap(), -phi_kn(0.3, 0.2, 1.0, 1.0).unwrap());
        assert_eq!(phi_kn(0.0, 0.0, 1.0, 1.0), Err(ZgknError::RingPoint));
    }

    #[test]
    fn psi_kn_examples() {
        assert_eq!(psi_kn(0.0, 1.0, 2.0, 1.0).unwrap(), 2.0);
        assert_eq!(psi_kn(3.0, 0.0, 2.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn akn_reduces_to_pure_kn() {
        let p = ModelParams::from_coupling(0.7, 1.0, -0.3);
        let a = akn_gen(1.2, 0.4, &p).unwrap();
        let sg = geometry::sigma(1.2, 0.4, 0.7);
        assert!((a.comps[3] - p.q * 0.7 * 1.2 * 0.4f64.sin().powi(2) / sg).abs() < 1e-15);
    }

    #[test]
    fn atilde_example() {
        let p = ModelParams { a: 1.0, m: 1.0, q: 1.0, q_prime: 1.0, current: 1.0 / PI };
        let at = atilde(1.0, FRAC_PI_2, &p).unwrap();
        assert!((at.comps[0] + 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(at.comps[2], 0.0);
        let anomalous = ModelParams { current: 0.0, ..p };
        assert_eq!(atilde(2.0, 0.0, &anomalous).unwrap().comps[2], 0.0);
    }

    #[test]
    fn axis_asymptotics() {
        let p = ModelParams::from_coupling(1.0, 1.0, -1.0);
        let r = 1e4;
        let at = akn_gen(r, 0.0, &p).unwrap().comps[0];
        assert!((at + p.q / r).abs() < 2.0 / (r * r * r));
        let at = akn_gen(-r, 0.0, &p).unwrap().comps[0];
        assert!((at - p.q / r).abs() < 2.0 / (r * r * r));
    }

    fn fd_grad(f: impl Fn([f64; 3]) -> f64, x: [f64; 3], h: f64) -> [f64; 3] {
        std::array::from_fn(|i| {
            let mut xp = x;
            let mut xm = x;
            let mut xp2 = x;
            let mut xm2 = x;
            xp[i] += h;
            xm[i] -= h;
            xp2[i] += 2.0 * h;
            xm2[i] -= 2.0 * h;
            (8.0 * (f(xp) - f(xm)) - (f(xp2) - f(xm2))) / (12.0 * h)
        })
    }

    #[test]
    fn gradients_match_finite_differences() {
        let p = ModelParams { a: 1.0, m: 1.0, q: 0.8, q_prime: 0.5, current: 0.3 };
        for (r, th, ph) in [(0.7, 1.1, 0.3), (-0.4, 2.0, 4.0), (2.5, 0.3, 1.0)] {
            let sheet = Sheet::of_r(r);
            let x = geometry::cartesian(r, th, ph, p.a);
            let at = |y: [f64; 3]| geometry::from_cartesian(y, sheet, p.a).unwrap();
            let g = grad_phi_kn(r, th, ph, p.q, p.a).unwrap();
            let f = |y: [f64; 3]| {
                let b = at(y);
                phi_kn_bl(b.r, b.theta, p.q, p.a).unwrap()
            };
            let fd = fd_grad(f, x, 1e-4);
            for i in 0..3 {
                assert!((g[i] - fd[i]).abs() < 1e-8 * (1.0 + g[i].abs()), "{g:?} {fd:?}");
            }
            // B = curl A by finite differences.
            let avec = |y: [f64; 3], k: usize| {
                let b = at(y);
                vector_potential(b.r, b.theta, b.phi, &p).unwrap()[k]
            };
            let d: Vec<[f64; 3]> = (0..3).map(|k| fd_grad(|y| avec(y, k), x, 1e-4)).collect();
            let curl = [d[2][1] - d[1][2], d[0][2] - d[2][0], d[1][0] - d[0][1]];
            let b = magnetic_field(r, th, ph, &p).unwrap();
            for i in 0..3 {
                assert!((b[i] - curl[i]).abs() < 1e-8 * (1.0 + b[i].abs()), "{b:?} {curl:?}");
            }
        }
    }

    #[test]
    fn far_field_dipole_on_axis() {
        let p = ModelParams::from_coupling(1.0, 1.0, -1.0);
        let r = 1e3;
        let b = magnetic_field(r, 0.0, 0.0, &p).unwrap();
        let expected = 2.0 * p.moment() / r.powi(3);
        assert!((b[2] / expected - 1.0).abs() < 1e-2);
        let e = em_fields(r, 0.0, 0.0, &p).unwrap().e;
        assert!((e[2] * r * r / p.q - 1.0).abs() < 1e-3);
    }

    #[test]
    fn equatorial_e_has_no_z_component() {
        let p = ModelParams::from_coupling(1.0, 1.0, -1.0);
        assert!(em_fields(2.0, FRAC_PI_2, 0.0, &p).unwrap().e[2].abs() < 1e-16);
    }

    #[test]
    fn gauss_flux_both_sheets() {
        let p = ModelParams::from_coupling(1.0, 1.0, -0.5);
        let fp = gauss_flux(1e3, Sheet::Positive, &p, 64).unwrap();
        let fm = gauss_flux(1e3, Sheet::Negative, &p, 64).unwrap();
        assert!((fp / (4.0 * PI * p.q) - 1.0).abs() < 1e-10);
        assert!((fm / (-4.0 * PI * p.q) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn phi_pt_limits() {
        let a = 1.0;
        let src = PointSource::new(Bl::new(2.0, 0.8, 0.5), 1.0, a).unwrap();
        // Approaching the source along its own sheet: full Coulomb.
        let f = phi_pt_factor(2.0 + 1e-7, 0.8, 0.5, &src, a).unwrap();
        assert!((f - 1.0).abs() < 1e-6);
        // Approaching the mirror point on the other sheet: factor → 0.
        let b = geometry::from_cartesian(src.cart, Sheet::Negative, a).unwrap();
        let f = phi_pt_factor(b.r - 1e-7, b.theta, b.phi, &src, a).unwrap();
        assert!(f < 1e-6);
        assert_eq!(phi_pt(2.0, 0.8, 0.5, &src, a), Err(ZgknError::CoincidentPoints));
    }

    #[test]
    fn phi_pt_gradient_matches_fd_and_is_harmonic() {
        let a = 1.0;
        let src = PointSource::new(Bl::new(1.5, 0.9, 0.2), 1.0, a).unwrap();
        for (r, th, ph) in [(0.6, 1.3, 1.7), (-0.8, 0.7, 2.5), (3.0, 2.2, 5.0), (-2.0, 2.6, 0.1)] {
            let sheet = Sheet::of_r(r);
            let x = geometry::cartesian(r, th, ph, a);
            let f = |y: [f64; 3]| {
                let b = geometry::from_cartesian(y, sheet, a).unwrap();
                phi_pt(b.r, b.theta, b.phi, &src, a).unwrap()
            };
            let g = grad_phi_pt(r, th, ph, &src, a).unwrap();
            let fd = fd_grad(f, x, 1e-4);
            for i in 0..3 {
                assert!((g[i] - fd[i]).abs() < 1e-8 * (1.0 + g[i].abs()), "{r} {g:?} {fd:?}");
            }
            let h = 1e-2;
            let mut lap = -6.0 * f(x);
            for i in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                lap += f(xp) + f(xm);
            }
            assert!(lap.abs() <= 1e-6 * f(x).abs(), "laplacian {lap} at {r}");
        }
    }

    #[test]
    fn phi_pt_continuous_through_disc() {
        let a = 1.0;
        let src = PointSource::new(Bl::new(1.5, 0.9, 0.2), 1.0, a).unwrap();
        let up = phi_pt(1e-10, 1.0, 0.4, &src, a).unwrap();
        let dn = phi_pt(-1e-10, 1.0, 0.4, &src, a).unwrap();
        assert!((up - dn).abs() < 1e-8);
    }
}
