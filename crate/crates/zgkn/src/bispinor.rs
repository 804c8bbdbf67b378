//! Dirac matrices in the Weyl representation, Cayley–Klein parameters of
//! Pauli spinors and bi-spinors, orientation frames, flip maps, and the
//! probability current.

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ZgknError};

pub type Spinor = [C; 2];
pub type Vec3 = [f64; 3];

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);
const I: C = C::new(0.0, 1.0);

/// Threshold on `‖n₁ × n₂‖` below which the cross-product frame is degenerate.
pub const DEGENERATE_CROSS: f64 = 1e-10;
/// `η(j, j) < NULL_CURRENT · (j⁰)²` counts as a null current.
pub const NULL_CURRENT: f64 = 1e-12;

/// Pauli matrices with `σ₀ = 1`.
pub fn pauli(k: usize) -> Matrix2<C> {
    match k {
        0 => Matrix2::new(ONE, ZERO, ZERO, ONE),
        1 => Matrix2::new(ZERO, ONE, ONE, ZERO),
        2 => Matrix2::new(ZERO, -I, I, ZERO),
        3 => Matrix2::new(ONE, ZERO, ZERO, -ONE),
        _ => panic!("pauli index {k}"),
    }
}

fn blocks(a: Matrix2<C>, b: Matrix2<C>, c: Matrix2<C>, d: Matrix2<C>) -> Matrix4<C> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(&a);
    m.fixed_view_mut::<2, 2>(0, 2).copy_from(&b);
    m.fixed_view_mut::<2, 2>(2, 0).copy_from(&c);
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(&d);
    m
}

/// `γ⁰ = [[0, 1], [1, 0]]`, `γᵏ = [[0, −σₖ], [σₖ, 0]]`.
pub fn gamma(mu: usize) -> Matrix4<C> {
    let z = Matrix2::zeros();
    match mu {
        0 => blocks(z, pauli(0), pauli(0), z),
        1..=3 => blocks(z, -pauli(mu), pauli(mu), z),
        _ => panic!("gamma index {mu}"),
    }
}

/// `α⁰ = 1`, `αᵏ = γ⁰γᵏ = diag(σₖ, −σₖ)`.
pub fn alpha(k: usize) -> Matrix4<C> {
    let z = Matrix2::zeros();
    match k {
        0 => Matrix4::identity(),
        1..=3 => blocks(pauli(k), z, z, -pauli(k)),
        _ => panic!("alpha index {k}"),
    }
}

/// Spin matrices `Sₖ = diag(σₖ, σₖ)`.
pub fn spin(k: usize) -> Matrix4<C> {
    let z = Matrix2::zeros();
    blocks(pauli(k), z, z, pauli(k))
}

/// `σ(X) = X^μ σ_μ`.
pub fn sigma_of(x: [f64; 4]) -> Matrix2<C> {
    (0..4).fold(Matrix2::zeros(), |acc, k| acc + pauli(k) * C::from(x[k]))
}

fn norm2(psi: &Spinor) -> f64 {
    psi[0].norm_sqr() + psi[1].norm_sqr()
}

/// `ψ†σψ` without normalization.
fn spin_density(psi: &Spinor) -> Vec3 {
    let (z1, z2) = (psi[0], psi[1]);
    let c = z1.conj() * z2;
    [2.0 * c.re, 2.0 * c.im, z1.norm_sqr() - z2.norm_sqr()]
}

/// Flip map `𝔣(z₁, z₂) = (−z₂*, z₁*)`.
pub fn flip(psi: Spinor) -> Spinor {
    [-psi[1].conj(), psi[0].conj()]
}

/// `n(ψ) = ψ†σψ/ψ†ψ`.
pub fn n_vector(psi: Spinor) -> Result<Vec3> {
    let nn = norm2(&psi);
    if nn == 0.0 {
        return Err(ZgknError::ZeroSpinor);
    }
    Ok(spin_density(&psi).map(|c| c / nn))
}

/// Orthonormal frame `(l, m, n)` with `l + i m = (𝔣ψ)†σψ/ψ†ψ`.
pub fn spinor_frame(psi: Spinor) -> Result<[Vec3; 3]> {
    let nn = norm2(&psi);
    if nn == 0.0 {
        return Err(ZgknError::ZeroSpinor);
    }
    let (z1, z2) = (psi[0] * psi[0], psi[1] * psi[1]);
    let lm = [z1 - z2, I * (z1 + z2), -2.0 * psi[0] * psi[1]];
    let l = lm.map(|c| c.re / nn);
    let m = lm.map(|c| c.im / nn);
    Ok([l, m, n_vector(psi)?])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CayleyKlein {
    pub r: f64,
    pub phi: f64,
    pub theta: f64,
    pub omega: f64,
}

impl CayleyKlein {
    pub fn spinor(&self) -> Spinor {
        let (c, s) = ((0.5 * self.theta).cos(), (0.5 * self.theta).sin());
        [
            self.r * c * C::from_polar(1.0, 0.5 * (self.phi - self.omega)),
            self.r * s * C::from_polar(1.0, 0.5 * (self.phi + self.omega)),
        ]
    }

    /// The rotation with columns `(l, m, n)`, indexed `[row][col]`.
    pub fn rotation(&self) -> [Vec3; 3] {
        let (sp, cp) = self.phi.sin_cos();
        let (st, ct) = self.theta.sin_cos();
        let (so, co) = self.omega.sin_cos();
        let l = [ct * co * cp + so * sp, ct * so * cp - co * sp, -st * cp];
        let m = [ct * co * sp - so * cp, ct * so * sp + co * cp, -st * sp];
        let n = [st * co, st * so, ct];
        std::array::from_fn(|row| [l[row], m[row], n[row]])
    }
}

/// Relative modulus below which a component counts as zero.
const DEAD: f64 = 1e-13;

/// Euler angles `(Φ, Θ, Ω)` with `ψ/R = (cos(Θ/2) e^{i(Φ−Ω)/2}, sin(Θ/2) e^{i(Φ+Ω)/2})`.
pub fn cayley_klein(psi: Spinor) -> Result<CayleyKlein> {
    let r = norm2(&psi).sqrt();
    if r == 0.0 {
        return Err(ZgknError::ZeroSpinor);
    }
    let (m1, m2) = (psi[0].norm(), psi[1].norm());
    let theta = 2.0 * m2.atan2(m1);
    let (phi, omega) = if m2 <= DEAD * r {
        (2.0 * psi[0].arg(), 0.0)
    } else if m1 <= DEAD * r {
        (2.0 * psi[1].arg(), 0.0)
    } else {
        (psi[0].arg() + psi[1].arg(), psi[1].arg() - psi[0].arg())
    };
    Ok(CayleyKlein { r, phi, theta, omega })
}

/// A Dirac bi-spinor `Ψ = (ψ₁, ψ₂)` in the Weyl representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiSpinor(pub [C; 4]);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedCk {
    pub r: f64,
    pub s: f64,
    pub sigma: f64,
    pub phi: f64,
    pub theta1: f64,
    pub omega1: f64,
    pub theta2: f64,
    pub omega2: f64,
}

impl GeneralizedCk {
    pub fn bispinor(&self) -> BiSpinor {
        let half = |t: f64, o: f64| {
            let (c, s) = ((0.5 * t).cos(), (0.5 * t).sin());
            [c * C::from_polar(1.0, -0.5 * o), s * C::from_polar(1.0, 0.5 * o)]
        };
        let pre = C::from_polar(self.r, self.s);
        let p1 = pre * (0.5 * self.sigma).cos() * C::from_polar(1.0, -0.5 * self.phi);
        let p2 = pre * (0.5 * self.sigma).sin() * C::from_polar(1.0, 0.5 * self.phi);
        let a = half(self.theta1, self.omega1);
        let b = half(self.theta2, self.omega2);
        BiSpinor([p1 * a[0], p1 * a[1], p2 * b[0], p2 * b[1]])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientationFrame {
    pub n: Vec3,
    /// `n₁ × n₂` and `n_Ψ × l`, absent in the degenerate branch.
    pub l: Option<Vec3>,
    pub m: Option<Vec3>,
    /// `cos²(Σ/2) l₁ + sin²(Σ/2) l₂`, likewise for `m`.
    pub l_prime: Vec3,
    pub m_prime: Vec3,
    pub degenerate: bool,
}

impl OrientationFrame {
    /// Normalized right-handed `(l̂, m̂, n̂)`; the primed pair is used in the
    /// degenerate branch, where it is orthogonal.
    pub fn unit_frame(&self) -> Option<[Vec3; 3]> {
        let nn = norm3(self.n);
        if nn < DEGENERATE_CROSS {
            return None;
        }
        let n = scale(self.n, 1.0 / nn);
        let l = match self.l {
            Some(l) => l,
            None => {
                let lp = sub(self.l_prime, scale(n, dot(self.l_prime, n)));
                if norm3(lp) < DEGENERATE_CROSS {
                    return None;
                }
                lp
            }
        };
        let l = scale(l, 1.0 / norm3(l));
        Some([l, cross(n, l), n])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentSample {
    pub j0: f64,
    pub j: Vec3,
    /// `η(j, j) = (j⁰)² − |j|²`.
    pub eta_jj: f64,
    pub gamma: Option<f64>,
    pub null: bool,
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm3(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn scale(a: Vec3, s: f64) -> Vec3 {
    a.map(|x| x * s)
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add_scaled(a: Vec3, sa: f64, b: Vec3, sb: f64) -> Vec3 {
    [sa * a[0] + sb * b[0], sa * a[1] + sb * b[1], sa * a[2] + sb * b[2]]
}

impl BiSpinor {
    pub fn psi1(&self) -> Spinor {
        [self.0[0], self.0[1]]
    }

    pub fn psi2(&self) -> Spinor {
        [self.0[2], self.0[3]]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    fn nonzero(&self) -> Result<f64> {
        let nn = self.norm_sqr();
        if nn == 0.0 {
            Err(ZgknError::ZeroSpinor)
        } else {
            Ok(nn)
        }
    }

    /// Weights `cos²(Σ/2)`, `sin²(Σ/2)`.
    fn weights(&self) -> Result<(f64, f64)> {
        let nn = self.nonzero()?;
        Ok((norm2(&self.psi1()) / nn, norm2(&self.psi2()) / nn))
    }

    pub fn generalized_ck(&self) -> Result<GeneralizedCk> {
        let nn = self.nonzero()?;
        let r = nn.sqrt();
        let (r1, r2) = (norm2(&self.psi1()).sqrt(), norm2(&self.psi2()).sqrt());
        let sigma = 2.0 * r2.atan2(r1);
        let dead = DEAD * r;
        let ck1 = (r1 > dead).then(|| cayley_klein(self.psi1())).transpose()?;
        let ck2 = (r2 > dead).then(|| cayley_klein(self.psi2())).transpose()?;
        let (s, phi) = match (ck1, ck2) {
            (Some(a), Some(b)) => (0.5 * (a.phi + b.phi), 0.5 * (b.phi - a.phi)),
            (Some(a), None) => (0.5 * a.phi, 0.0),
            (None, Some(b)) => (0.5 * b.phi, 0.0),
            (None, None) => unreachable!("nonzero bi-spinor"),
        };
        let (theta1, omega1) = ck1.map_or((0.0, 0.0), |c| (c.theta, c.omega));
        let (theta2, omega2) = ck2.map_or((0.0, 0.0), |c| (c.theta, c.omega));
        Ok(GeneralizedCk { r, s, sigma, phi, theta1, omega1, theta2, omega2 })
    }

    /// `n_Ψ = Ψ†SΨ/Ψ†Ψ` and the associated frames.
    pub fn orientation(&self) -> Result<OrientationFrame> {
        let nn = self.nonzero()?;
        let (w1, w2) = self.weights()?;
        let d1 = spin_density(&self.psi1());
        let d2 = spin_density(&self.psi2());
        let n = add_scaled(d1, 1.0 / nn, d2, 1.0 / nn);
        let unit = |d: Vec3, w: f64| if w > 0.0 { scale(d, 1.0 / (w * nn)) } else { [0.0; 3] };
        let (n1, n2) = (unit(d1, w1), unit(d2, w2));
        let f1 = (w1 > 0.0).then(|| spinor_frame(self.psi1())).transpose()?;
        let f2 = (w2 > 0.0).then(|| spinor_frame(self.psi2())).transpose()?;
        let pick = |f: Option<[Vec3; 3]>, k: usize| f.map_or([0.0; 3], |f| f[k]);
        let l_prime = add_scaled(pick(f1, 0), w1, pick(f2, 0), w2);
        let m_prime = add_scaled(pick(f1, 1), w1, pick(f2, 1), w2);
        let l = cross(n1, n2);
        if norm3(l) < DEGENERATE_CROSS {
            return Ok(OrientationFrame { n, l: None, m: None, l_prime, m_prime, degenerate: true });
        }
        Ok(OrientationFrame { n, l: Some(l), m: Some(cross(n, l)), l_prime, m_prime, degenerate: false })
    }

    /// `j^μ = Ψ̄γ^μΨ`; `j⁰ = Ψ†Ψ`, `j = ψ₁†σψ₁ − ψ₂†σψ₂`.
    pub fn current(&self) -> Result<CurrentSample> {
        let j0 = self.nonzero()?;
        let j = sub(spin_density(&self.psi1()), spin_density(&self.psi2()));
        let eta_jj = j0 * j0 - dot(j, j);
        let null = eta_jj < NULL_CURRENT * j0 * j0;
        let gamma = (!null).then(|| j0 / eta_jj.sqrt());
        Ok(CurrentSample { j0, j, eta_jj, gamma, null })
    }

    /// `v_ψ = j/j⁰ = cos²(Σ/2) n₁ − sin²(Σ/2) n₂`.
    pub fn velocity(&self) -> Result<Vec3> {
        let c = self.current()?;
        Ok(scale(c.j, 1.0 / c.j0))
    }

    /// Blockwise flip `(𝔣ψ₁, 𝔣ψ₂)`.
    pub fn flip(&self) -> BiSpinor {
        let (a, b) = (flip(self.psi1()), flip(self.psi2()));
        BiSpinor([a[0], a[1], b[0], b[1]])
    }

    pub fn apply(&self, m: &Matrix4<C>) -> BiSpinor {
        let v = m * nalgebra::Vector4::from(self.0);
        BiSpinor([v[0], v[1], v[2], v[3]])
    }

    pub fn conj(&self) -> BiSpinor {
        BiSpinor(self.0.map(|c| c.conj()))
    }
}

/// Eigen-bi-spinor value `(R₁S₁, R₂S₂, R₂S₁, R₁S₂) e^{−i(Et − κφ)}` from the
/// Prüfer data, with `R₁ = R e^{−iΩ/2}`, `R₂ = R e^{iΩ/2}`,
/// `S₁ = S cos(Θ/2)`, `S₂ = S sin(Θ/2)`.
pub fn eigen_bispinor(rr: f64, omega: f64, ss: f64, theta_p: f64, phase: C) -> BiSpinor {
    let r1 = rr * C::from_polar(1.0, -0.5 * omega);
    let r2 = rr * C::from_polar(1.0, 0.5 * omega);
    let s1 = ss * (0.5 * theta_p).cos();
    let s2 = ss * (0.5 * theta_p).sin();
    BiSpinor([r1 * s1 * phase, r2 * s2 * phase, r2 * s1 * phase, r1 * s2 * phase])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eta(mu: usize) -> f64 {
        if mu == 0 {
            1.0
        } else {
            -1.0
        }
    }

    #[test]
    fn clifford_algebra() {
        for mu in 0..4 {
            for nu in 0..4 {
                let ac = gamma(mu) * gamma(nu) + gamma(nu) * gamma(mu);
                let expect = if mu == nu { Matrix4::identity() * C::from(2.0 * eta(mu)) } else { Matrix4::zeros() };
                assert_eq!(ac, expect, "{mu}{nu}");
            }
        }
        for k in 1..4 {
            assert_eq!(alpha(k), gamma(0) * gamma(k));
        }
    }

    #[test]
    fn north_pole_spinor() {
        let n = n_vector([ONE, ZERO]).unwrap();
        assert_eq!(n, [0.0, 0.0, 1.0]);
        assert_eq!(cayley_klein([ONE, ZERO]).unwrap().theta, 0.0);
        assert_eq!(n_vector([ZERO, ZERO]), Err(ZgknError::ZeroSpinor));
    }

    #[test]
    fn ck_rotation_matches_frame() {
        let psi = [C::new(0.3, -0.7), C::new(-0.2, 0.5)];
        let ck = cayley_klein(psi).unwrap();
        let f = spinor_frame(psi).unwrap();
        let rot = ck.rotation();
        for col in 0..3 {
            for row in 0..3 {
                assert!((rot[row][col] - f[col][row]).abs() < 1e-14);
            }
        }
        let back = ck.spinor();
        assert!((back[0] - psi[0]).norm() < 1e-15 && (back[1] - psi[1]).norm() < 1e-15);
    }

    #[test]
    fn degenerate_sigma_cases() {
        let b = BiSpinor([C::new(0.2, 0.1), C::new(0.0, 0.3), ZERO, ZERO]);
        let g = b.generalized_ck().unwrap();
        assert_eq!(g.sigma, 0.0);
        let back = g.bispinor();
        for k in 0..4 {
            assert!((back.0[k] - b.0[k]).norm() < 1e-15);
        }
        let o = b.orientation().unwrap();
        assert!((norm3(o.n) - 1.0).abs() < 1e-15);
        let v = b.velocity().unwrap();
        assert!((norm3(v) - 1.0).abs() < 1e-15);
        assert!(b.current().unwrap().null);
    }

    #[test]
    fn flip_related_blocks_have_zero_orientation() {
        let p1 = [C::new(0.4, 0.2), C::new(-0.1, 0.6)];
        let f = flip(p1);
        let ph = C::from_polar(1.0, 0.7);
        let b = BiSpinor([p1[0], p1[1], ph * f[0], ph * f[1]]);
        let o = b.orientation().unwrap();
        assert!(norm3(o.n) < 1e-15);
        assert!(o.degenerate);
        assert!(o.unit_frame().is_none());
    }

    #[test]
    fn equal_blocks_have_zero_velocity() {
        let p1 = [C::new(0.4, 0.2), C::new(-0.1, 0.6)];
        let ph = C::from_polar(1.0, 1.3);
        let b = BiSpinor([p1[0], p1[1], ph * p1[0], ph * p1[1]]);
        assert!(norm3(b.velocity().unwrap()) < 1e-15);
    }

    #[test]
    fn sheet_swap_representation() {
        let x = [0.3, -1.2, 0.7, 2.1];
        let lhs = sigma_of([x[0], -x[1], -x[2], x[3]]);
        let rhs = pauli(3) * sigma_of(x) * pauli(3);
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn eigen_bispinor_has_sigma_half_pi() {
        let b = eigen_bispinor(0.8, 1.1, 0.6, 2.0, C::from_polar(1.0, 0.4));
        assert!((b.0[0].norm() - b.0[2].norm()).abs() < 1e-15);
        let g = b.generalized_ck().unwrap();
        assert!((g.sigma - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
        let v = b.velocity().unwrap();
        let n = b.orientation().unwrap().n;
        assert!(dot(v, n).abs() < 1e-15);
        assert!(v[0].abs() < 1e-15 && v[2].abs() < 1e-15);
        assert!((v[1] - 2f64.sin() * 1.1f64.sin()).abs() < 1e-14);
    }
}
