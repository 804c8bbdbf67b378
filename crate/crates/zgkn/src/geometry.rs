//! Charts, metric and sheet structure of the flat double-sheeted space.
//!
//! The constant-`t` slice is two copies of ℝ³ glued crosswise through the
//! disc bounded by a ring of radius `|a|`. Boyer–Lindquist `r ∈ ℝ` covers both
//! copies: `r > 0` is the first sheet, `r < 0` the second. With
//! `ϖ = √(r² + a²)` the projection to ℝ³ is `ϱ = ϖ sin θ`, `z = r cos θ`.
//!
//! A second useful chart is `r = |a| sinh u`. In `(u, θ)` the meridional
//! metric is conformally flat, and `s = (θ − π/2) + i u` uniformizes the
//! double cover near the ring: the projected complex coordinate is
//! `ϱ + i z = |a| cosh(−i s)`, so the distance to the ring is exactly
//! `2|a| |sin(s/2)|²`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Result, ZgknError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sheet {
    /// `r > 0`.
    Positive,
    /// `r < 0`.
    Negative,
}

impl Sheet {
    pub fn sign(self) -> f64 {
        match self {
            Sheet::Positive => 1.0,
            Sheet::Negative => -1.0,
        }
    }

    pub fn of_r(r: f64) -> Self {
        if r.is_sign_negative() && r != 0.0 {
            Sheet::Negative
        } else {
            Sheet::Positive
        }
    }

    pub fn other(self) -> Self {
        match self {
            Sheet::Positive => Sheet::Negative,
            Sheet::Negative => Sheet::Positive,
        }
    }
}

/// Physical parameters in units `ħ = c = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Ring radius, signed.
    pub a: f64,
    /// Particle mass.
    pub m: f64,
    /// Ring charge as seen from the `r > 0` sheet.
    pub q: f64,
    /// Charge of the test particle.
    pub q_prime: f64,
    /// Ring current. `I π a = Q` is the pure Kerr–Newman case.
    pub current: f64,
}

impl ModelParams {
    /// Separable parameters with electric coupling `γ = Q Q′`.
    ///
    /// The charges are split symmetrically, `|Q| = |Q′| = √|γ|`, with
    /// `Q < 0 < Q′` for an attractive coupling; the current is set to the
    /// pure Kerr–Newman value.
    pub fn from_coupling(a: f64, m: f64, gamma: f64) -> Self {
        let e = gamma.abs().sqrt();
        let (q, q_prime) = if gamma < 0.0 { (-e, e) } else { (e, e) };
        let current = if a != 0.0 { q / (PI * a) } else { 0.0 };
        Self { a, m, q, q_prime, current }
    }

    /// Coupling `γ = Q Q′`; negative means attraction on the `r > 0` sheet.
    pub fn gamma(&self) -> f64 {
        self.q * self.q_prime
    }

    /// Magnetic moment `I π a²` of the ring.
    pub fn moment(&self) -> f64 {
        self.current * PI * self.a * self.a
    }

    /// Anomalous part `Q − I π a` of the potential.
    pub fn anomaly(&self) -> f64 {
        self.q - self.current * PI * self.a
    }

    pub fn is_separable(&self) -> bool {
        self.anomaly().abs() <= 1e-12 * self.q.abs().max(1e-300)
    }

    /// Sufficient condition for a nonempty point spectrum:
    /// `|a| m < 1/2` and `e² < √(2|a|m(1 − 2|a|m))` with `e² = |γ|`.
    pub fn admissible(&self) -> bool {
        let am = self.a.abs() * self.m;
        am < 0.5 && self.gamma().abs() < (2.0 * am * (1.0 - 2.0 * am)).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0) || !self.m.is_finite() {
            return Err(ZgknError::InvalidParams(format!("mass must be positive, got {}", self.m)));
        }
        for (name, v) in [("a", self.a), ("Q", self.q), ("Q'", self.q_prime), ("I", self.current)] {
            if !v.is_finite() {
                return Err(ZgknError::InvalidParams(format!("{name} is not finite")));
            }
        }
        Ok(())
    }
}

/// Boyer–Lindquist position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bl {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

impl Bl {
    pub fn new(r: f64, theta: f64, phi: f64) -> Self {
        Self { r, theta, phi }
    }

    pub fn sheet(&self) -> Sheet {
        Sheet::of_r(self.r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Chart {
    BoyerLindquist { r: f64, theta: f64, phi: f64 },
    RingCentered { xi: f64, eta: f64, phi: f64 },
    Cylindrical { rho: f64, z: f64, phi: f64, sheet: Sheet },
    Peripolar { zeta: f64, chi: f64, phi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacetimePoint {
    pub t: f64,
    pub chart: Chart,
}

impl SpacetimePoint {
    pub fn bl(t: f64, r: f64, theta: f64, phi: f64) -> Self {
        Self { t, chart: Chart::BoyerLindquist { r, theta, phi } }
    }

    pub fn ring_centered(t: f64, xi: f64, eta: f64, phi: f64) -> Self {
        Self { t, chart: Chart::RingCentered { xi, eta, phi } }
    }

    /// Convert to Boyer–Lindquist coordinates.
    pub fn to_bl(&self, a: f64) -> Result<Bl> {
        match self.chart {
            Chart::BoyerLindquist { r, theta, phi } => Ok(Bl::new(r, theta, phi)),
            Chart::RingCentered { xi, eta, phi } => {
                if a == 0.0 {
                    return Err(ZgknError::InvalidParams("ring-centered chart needs a != 0".into()));
                }
                Ok(Bl::new(a * xi, eta.clamp(-1.0, 1.0).acos(), phi))
            }
            Chart::Cylindrical { rho, z, phi, sheet } => {
                let (r, theta) = cyl_to_os(rho, z, sheet, a)?;
                Ok(Bl::new(r, theta, phi))
            }
            Chart::Peripolar { zeta, chi, phi } => {
                let (r, theta) = peripolar_to_os(zeta, chi, a)?;
                Ok(Bl::new(r, theta, phi))
            }
        }
    }

    /// Ring-centered `(ξ, η, φ)`.
    pub fn to_ring_centered(&self, a: f64) -> Result<(f64, f64, f64)> {
        if a == 0.0 {
            return Err(ZgknError::InvalidParams("ring-centered chart needs a != 0".into()));
        }
        let p = self.to_bl(a)?;
        Ok((p.r / a, p.theta.cos(), p.phi))
    }
}

pub fn varpi(r: f64, a: f64) -> f64 {
    r.hypot(a)
}

/// `Σ = r² + a² cos² θ = |ρ|²`.
pub fn sigma(r: f64, theta: f64, a: f64) -> f64 {
    let c = a * theta.cos();
    r * r + c * c
}

/// `ρ = r + i a cos θ`.
pub fn rho(r: f64, theta: f64, a: f64) -> Complex64 {
    Complex64::new(r, a * theta.cos())
}

pub fn is_ring(r: f64, theta: f64, a: f64) -> bool {
    a != 0.0 && sigma(r, theta, a) <= (1e-14 * a).powi(2)
}

/// Projection `(r, θ, φ) ↦ (ϱ, z, φ)`; the sign of `r` is lost.
pub fn os_to_cyl(r: f64, theta: f64, phi: f64, a: f64) -> (f64, f64, f64) {
    (varpi(r, a) * theta.sin(), r * theta.cos(), phi)
}

/// Inverse projection on a chosen sheet.
///
/// Points of the open disc `z = 0, ϱ < |a|` have `r = 0`; there the sheet
/// flag selects `cos θ > 0` for [`Sheet::Positive`] and `cos θ < 0` for
/// [`Sheet::Negative`], which is the limit from the upper side of the first
/// sheet and from the upper side of the second sheet respectively.
pub fn cyl_to_os(rho_c: f64, z: f64, sheet: Sheet, a: f64) -> Result<(f64, f64)> {
    let aa = a.abs();
    if rho_c < 0.0 {
        return Err(ZgknError::InvalidParams(format!("cylindrical radius {rho_c} < 0")));
    }
    if z == 0.0 && (rho_c - aa).abs() <= 1e-15 * aa.max(f64::MIN_POSITIVE) && aa > 0.0 {
        return Err(ZgknError::RingPoint);
    }
    // r⁴ − s r² − a² z² = 0 with s = ϱ² + z² − a².
    let s = (rho_c - aa) * (rho_c + aa) + z * z;
    let disc = s.hypot(2.0 * aa * z);
    let r2 = if s >= 0.0 { 0.5 * (s + disc) } else { 2.0 * (aa * z).powi(2) / (disc - s) };
    let r_abs = r2.max(0.0).sqrt();
    let r = sheet.sign() * r_abs;
    let theta = if r_abs > 0.0 {
        let w = r_abs.hypot(aa);
        (rho_c / w).atan2(z / r)
    } else {
        let st = (rho_c / aa).min(1.0);
        let t = st.asin();
        match sheet {
            Sheet::Positive => t,
            Sheet::Negative => PI - t,
        }
    };
    Ok((r, theta))
}

/// Euclidean position of the projected point.
pub fn cartesian(r: f64, theta: f64, phi: f64, a: f64) -> [f64; 3] {
    let (rc, z, _) = os_to_cyl(r, theta, phi, a);
    [rc * phi.cos(), rc * phi.sin(), z]
}

/// Inverse of [`cartesian`] on a chosen sheet, with `φ ∈ [0, 2π)`.
pub fn from_cartesian(x: [f64; 3], sheet: Sheet, a: f64) -> Result<Bl> {
    let rc = x[0].hypot(x[1]);
    let (r, theta) = cyl_to_os(rc, x[2], sheet, a)?;
    Ok(Bl::new(r, theta, normalize_angle(x[1].atan2(x[0]))))
}

pub fn normalize_angle(phi: f64) -> f64 {
    let p = phi.rem_euclid(TAU);
    if p >= TAU {
        0.0
    } else {
        p
    }
}

/// Sheet swap `(ξ, η) ↦ (−ξ, −η)`, i.e. `(r, θ) ↦ (−r, π − θ)`.
pub fn sheet_swap(p: &SpacetimePoint, a: f64) -> Result<SpacetimePoint> {
    let chart = match p.chart {
        Chart::RingCentered { xi, eta, phi } => Chart::RingCentered { xi: -xi, eta: -eta, phi },
        Chart::BoyerLindquist { r, theta, phi } => Chart::BoyerLindquist { r: -r, theta: PI - theta, phi },
        Chart::Cylindrical { rho, z, phi, sheet } => {
            // Same projected point, other sheet.
            Chart::Cylindrical { rho, z, phi, sheet: sheet.other() }
        }
        Chart::Peripolar { .. } => {
            let b = p.to_bl(a)?;
            let (zeta, chi, phi) = peripolar(-b.r, PI - b.theta, b.phi, a)?;
            Chart::Peripolar { zeta, chi, phi }
        }
    };
    Ok(SpacetimePoint { t: p.t, chart })
}

/// Boyer–Lindquist metric `g_{μν}` in the order `(t, r, θ, φ)`; signature
/// `(+, −, −, −)`.
pub fn metric_coeffs(r: f64, theta: f64, a: f64) -> Result<[[f64; 4]; 4]> {
    if is_ring(r, theta, a) {
        return Err(ZgknError::RingPoint);
    }
    let w2 = r * r + a * a;
    let sg = sigma(r, theta, a);
    let mut g = [[0.0; 4]; 4];
    g[0][0] = 1.0;
    g[1][1] = -sg / w2;
    g[2][2] = -sg;
    g[3][3] = -w2 * theta.sin().powi(2);
    Ok(g)
}

/// `ω = u + i(π/2 − θ)` with `r = |a| sinh u`.
fn omega_chart(r: f64, theta: f64, a: f64) -> Complex64 {
    Complex64::new((r / a.abs()).asinh(), FRAC_PI_2 - theta)
}

/// Peripolar coordinates `(ζ, χ, φ)` of a BL point for the ring at the
/// origin with normal `ẑ`.
///
/// `ζ − iχ = ln((w + |a|)/(w − |a|))` with `w = ϱ + iz` continued over the
/// double cover, so `χ ∈ (−π, π)` on the first sheet and `χ ∈ (π, 3π)` on the
/// second. Disc points (`r = 0`) take the first-sheet value.
pub fn peripolar(r: f64, theta: f64, phi: f64, a: f64) -> Result<(f64, f64, f64)> {
    if a == 0.0 {
        return Err(ZgknError::InvalidParams("peripolar chart needs a != 0".into()));
    }
    if is_ring(r, theta, a) {
        return Err(ZgknError::RingPoint);
    }
    let omega = omega_chart(r, theta, a);
    // (w + A)/(w − A) = coth²(ω/2) for w = A cosh ω.
    let c = (omega * 0.5).tanh().inv();
    let zeta = 2.0 * c.norm().ln();
    let arg = c.arg();
    let chi = if r >= 0.0 {
        -2.0 * arg
    } else {
        // coth(ω/2) lies in the left half-plane; use arg ∈ (π/2, 3π/2).
        let arg2 = if arg < 0.0 { arg + TAU } else { arg };
        4.0 * PI - 2.0 * arg2
    };
    Ok((zeta.max(0.0), chi, normalize_angle(phi)))
}

/// Inverse of [`peripolar`] restricted to the meridional coordinates.
pub fn peripolar_to_os(zeta: f64, chi: f64, a: f64) -> Result<(f64, f64)> {
    if a == 0.0 {
        return Err(ZgknError::InvalidParams("peripolar chart needs a != 0".into()));
    }
    if !zeta.is_finite() {
        return Err(ZgknError::RingPoint);
    }
    // tanh(ω/2) = exp(−(ζ − iχ)/2). The principal atanh already has
    // Im ω ∈ (−π/2, π/2) and sign(Re ω) = sign(cos(χ/2)), which is the sheet.
    let e = Complex64::new(-zeta / 2.0, chi / 2.0).exp();
    let omega = 2.0 * e.atanh();
    let (u, nu) = (omega.re, omega.im);
    let aa = a.abs();
    Ok((aa * u.sinh(), FRAC_PI_2 - nu))
}

/// Peripolar coordinates of a Euclidean point relative to a ring with
/// arbitrary centre and unit normal. The azimuth is measured from the
/// projection of whichever of `x̂`, `ŷ` is less aligned with the normal.
pub fn peripolar_from_point(
    x: [f64; 3],
    sheet: Sheet,
    center: [f64; 3],
    normal: [f64; 3],
    a: f64,
) -> Result<(f64, f64, f64)> {
    let nn = (normal[0].powi(2) + normal[1].powi(2) + normal[2].powi(2)).sqrt();
    if nn == 0.0 {
        return Err(ZgknError::InvalidParams("ring normal is zero".into()));
    }
    let n = normal.map(|v| v / nn);
    let d = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
    let z = d[0] * n[0] + d[1] * n[1] + d[2] * n[2];
    let perp = [d[0] - z * n[0], d[1] - z * n[1], d[2] - z * n[2]];
    let seed = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let sd = seed[0] * n[0] + seed[1] * n[1] + seed[2] * n[2];
    let e1 = {
        let v = [seed[0] - sd * n[0], seed[1] - sd * n[1], seed[2] - sd * n[2]];
        let l = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        v.map(|c| c / l)
    };
    let e2 = [n[1] * e1[2] - n[2] * e1[1], n[2] * e1[0] - n[0] * e1[2], n[0] * e1[1] - n[1] * e1[0]];
    let px = perp[0] * e1[0] + perp[1] * e1[1] + perp[2] * e1[2];
    let py = perp[0] * e2[0] + perp[1] * e2[1] + perp[2] * e2[2];
    let (r, theta) = cyl_to_os(px.hypot(py), z, sheet, a)?;
    peripolar(r, theta, py.atan2(px), a)
}

/// Point–ring duality map `(r, θ, φ) ↦ (r, π − θ, φ + π)`.
pub fn dual_frame_coords(r: f64, theta: f64, phi: f64) -> (f64, f64, f64) {
    (r, PI - theta, normalize_angle(phi + PI))
}

/// Distance from the projected point to the ring circle, in a meridional
/// plane. Exact: `2|a| |sin(s/2)|²` with `s = (θ − π/2) + i u`.
pub fn ring_distance(r: f64, theta: f64, a: f64) -> f64 {
    let s = Complex64::new(theta - FRAC_PI_2, (r / a.abs()).asinh());
    2.0 * a.abs() * (s * 0.5).sin().norm_sqr()
}

/// Circumference-to-radius ratio of the meridional circle of projected
/// radius `eps` around the ring, measured in the `(u, θ)` chart metric
/// `Σ (du² + dθ²)` on the double cover. Tends to `4π`.
pub fn conical_ratio(eps: f64, a: f64, n: usize) -> f64 {
    let aa = a.abs();
    let target = eps / (2.0 * aa);
    let g = |sig: f64, b: f64| (0.5 * sig * b.cos()).sin().powi(2) + (0.5 * sig * b.sin()).sinh().powi(2);
    let mut len = 0.0;
    for k in 0..n {
        let b = TAU * k as f64 / n as f64;
        let (cb, sb) = (b.cos(), b.sin());
        let mut sig = (4.0 * target).sqrt();
        for _ in 0..60 {
            let gs = 0.5 * ((sig * cb).sin() * cb + (sig * sb).sinh() * sb);
            let step = (g(sig, b) - target) / gs;
            sig -= step;
            if step.abs() < 1e-16 * sig {
                break;
            }
        }
        let gs = 0.5 * ((sig * cb).sin() * cb + (sig * sb).sinh() * sb);
        let gb = 0.5 * sig * (-(sig * cb).sin() * sb + (sig * sb).sinh() * cb);
        let dsig = -gb / gs;
        let e = Complex64::new(cb, sb);
        let ds = (Complex64::new(dsig, sig)) * e;
        let s = e * sig;
        let metric = aa * s.sin().norm();
        len += metric * ds.norm();
    }
    len * TAU / n as f64 / eps
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn os_to_cyl_examples() {
        let (rc, z, _) = os_to_cyl(0.0, FRAC_PI_2, 0.0, 1.0);
        assert!((rc - 1.0).abs() < 1e-15 && z.abs() < 1e-16);
        let (rc, z, _) = os_to_cyl(2.0, 0.0, 0.0, 0.0);
        assert!(rc.abs() < 1e-15 && (z - 2.0).abs() < 1e-15);
        let (rc, z, _) = os_to_cyl(1.0, PI / 3.0, 0.0, 1.0);
        assert!((rc - 1.5f64.sqrt()).abs() < 1e-15 && (z - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cyl_to_os_examples() {
        let (r, t) = cyl_to_os(1.0, 0.0, Sheet::Positive, 0.0).unwrap();
        assert!((r - 1.0).abs() < 1e-15 && (t - FRAC_PI_2).abs() < 1e-15);
        let (r, t) = cyl_to_os(1.5f64.sqrt(), 0.5, Sheet::Positive, 1.0).unwrap();
        assert!((r - 1.0).abs() < 1e-14 && (t - PI / 3.0).abs() < 1e-14);
        assert_eq!(cyl_to_os(1.0, 0.0, Sheet::Negative, 1.0), Err(ZgknError::RingPoint));
    }

    #[test]
    fn metric_examples() {
        let g = metric_coeffs(2.0, 0.7, 0.0).unwrap();
        assert_eq!(g[1][1], -1.0);
        assert!((g[2][2] + 4.0).abs() < 1e-15);
        assert!((g[3][3] + 4.0 * 0.7f64.sin().powi(2)).abs() < 1e-15);
        let g = metric_coeffs(0.0, 0.0, 1.0).unwrap();
        assert_eq!((g[1][1], g[2][2]), (-1.0, -1.0));
        assert_eq!(metric_coeffs(0.0, FRAC_PI_2, 1.0), Err(ZgknError::RingPoint));
    }

    #[test]
    fn sheet_swap_example_and_involution() {
        let p = SpacetimePoint::ring_centered(0.0, 1.0, 0.5, 0.0);
        let q = sheet_swap(&p, 1.0).unwrap();
        assert_eq!(q.chart, Chart::RingCentered { xi: -1.0, eta: -0.5, phi: 0.0 });
        assert_eq!(sheet_swap(&q, 1.0).unwrap(), p);
    }

    #[test]
    fn dual_frame_example() {
        let (r, t, p) = dual_frame_coords(1.0, PI / 3.0, 0.0);
        assert_eq!(r, 1.0);
        assert!((t - 2.0 * PI / 3.0).abs() < 1e-15 && (p - PI).abs() < 1e-15);
        let (_, t2, p2) = dual_frame_coords(r, t, p);
        assert!((t2 - PI / 3.0).abs() < 1e-15 && p2.abs() < 1e-15);
        assert_eq!(dual_frame_coords(2.0, FRAC_PI_2, 1.0).1, FRAC_PI_2);
    }

    #[test]
    fn peripolar_axis_and_windows() {
        // The axis is equidistant from every ring point.
        let (zeta, chi, _) = peripolar(2.0, 0.0, 0.0, 1.0).unwrap();
        assert!(zeta.abs() < 1e-14);
        // Triangle construction: χ is the angle subtended by the diameter.
        let z = 2.0;
        let expected = 2.0 * (1.0f64 / z).atan();
        assert!((chi - expected).abs() < 1e-14 && chi > 0.0 && chi < PI);
        let (_, chi2, _) = peripolar(-2.0, PI, 0.0, 1.0).unwrap();
        assert!((chi2 - chi - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn peripolar_disc_continuity() {
        // Above the disc on the first sheet χ → π; the disc continues into
        // the second sheet from below.
        let (_, c_up, _) = peripolar(1e-9, 0.5, 0.0, 1.0).unwrap();
        let (_, c_dn, _) = peripolar(-1e-9, 0.5, 0.0, 1.0).unwrap();
        assert!((c_up - PI).abs() < 1e-6 && (c_dn - PI).abs() < 1e-6);
    }

    #[test]
    fn peripolar_matches_distance_formula() {
        let (r, th, a) = (0.7, 1.1, 1.3);
        let (rc, z, _) = os_to_cyl(r, th, 0.0, a);
        let d1 = ((rc - a).powi(2) + z * z).sqrt();
        let d2 = ((rc + a).powi(2) + z * z).sqrt();
        let (zeta, chi, _) = peripolar(r, th, 0.0, a).unwrap();
        assert!((zeta - (d2 / d1).ln()).abs() < 1e-13);
        assert!((chi - (2.0 * a * z).atan2(rc * rc + z * z - a * a)).abs() < 1e-13);
        let (r2, th2) = peripolar_to_os(zeta, chi, a).unwrap();
        assert!((r2 - r).abs() < 1e-12 && (th2 - th).abs() < 1e-12);
    }

    #[test]
    fn ring_distance_is_exact() {
        let (r, th, a) = (0.03, 1.5, 2.0);
        let (rc, z, _) = os_to_cyl(r, th, 0.0, a);
        assert!((ring_distance(r, th, a) - (rc - a).hypot(z)).abs() < 1e-15);
    }

    #[test]
    fn conical_ratio_tends_to_four_pi() {
        for eps in [1e-1, 1e-2, 1e-3] {
            let c = conical_ratio(eps, 1.0, 256);
            assert!((c / (4.0 * PI) - 1.0).abs() < 1e-9, "{c}");
        }
    }
}
