//! Orthonormal frame, rotation coefficients and the Hamiltonian
//! `Ĥ = (M⁰)⁻¹(M^k(−i∂_k) − Q′|ρ|γ^μÃ_μ + mℜ)` acting on single-κ modes
//! tabulated on an `(r, θ)` grid.

use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, Matrix4, Vector4};
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::bispinor::{alpha, gamma};
use crate::error::{Result, ZgknError};
use crate::fields;
use crate::geometry::{self, is_ring, varpi, ModelParams};
use crate::quadrature::{GaussRule, KahanSum};
use crate::spectral::SeparatedState;

/// Coframe `ω^μ = ω^μ_ν dy^ν` and dual frame `e_μ = e_μ^ν ∂_ν`, coordinates `(t, r, θ, φ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartanFrame {
    /// `omega[μ][ν] = ω^μ_ν`.
    pub omega: [[f64; 4]; 4],
    /// `e[μ][ν] = e_μ^ν`.
    pub e: [[f64; 4]; 4],
}

pub fn cartan_frame(r: f64, theta: f64, a: f64) -> Result<CartanFrame> {
    if is_ring(r, theta, a) {
        return Err(ZgknError::RingPoint);
    }
    let w = varpi(r, a);
    let rho = geometry::sigma(r, theta, a).sqrt();
    let (s, _) = theta.sin_cos();
    let mut omega = [[0.0; 4]; 4];
    omega[0][0] = w / rho;
    omega[0][3] = -w * a * s * s / rho;
    omega[1][2] = rho;
    omega[2][0] = -a * s / rho;
    omega[2][3] = s * w * w / rho;
    omega[3][1] = rho / w;
    let mut e = [[0.0; 4]; 4];
    e[0][0] = w / rho;
    e[0][3] = a / (w * rho);
    e[1][2] = 1.0 / rho;
    e[2][0] = a * s / rho;
    e[2][3] = 1.0 / (rho * s);
    e[3][1] = w / rho;
    Ok(CartanFrame { omega, e })
}

/// Scalars `A … F` of the connection one-forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl RotationCoeffs {
    /// Frame components `Ω_{μνλ}` with `Ω_{μν} = Ω_{μνλ} ω^λ`.
    pub fn components(&self) -> [[[f64; 4]; 4]; 4] {
        let RotationCoeffs { a, b, c, d, e, f } = *self;
        let mut o = [[[0.0; 4]; 4]; 4];
        let mut set = |mu: usize, nu: usize, lam: usize, v: f64| {
            o[mu][nu][lam] = v;
            o[nu][mu][lam] = -v;
        };
        set(0, 1, 0, -c);
        set(0, 1, 2, -d);
        set(0, 2, 1, d);
        set(0, 2, 3, -b);
        set(0, 3, 0, -a);
        set(0, 3, 2, -b);
        set(1, 2, 0, d);
        set(1, 2, 2, f);
        set(1, 3, 1, -e);
        set(1, 3, 3, -c);
        set(2, 3, 0, -b);
        set(2, 3, 2, -e);
        o
    }
}

pub fn rotation_coeffs(r: f64, theta: f64, a: f64) -> Result<RotationCoeffs> {
    if is_ring(r, theta, a) {
        return Err(ZgknError::RingPoint);
    }
    let w = varpi(r, a);
    let rho3 = geometry::sigma(r, theta, a).powf(1.5);
    let (s, c) = theta.sin_cos();
    Ok(RotationCoeffs {
        a: a * a * r * s * s / (w * rho3),
        b: a * r * s / rho3,
        c: a * a * s * c / rho3,
        d: a * c * w / rho3,
        e: r * w / rho3,
        f: w * w * c / (rho3 * s),
    })
}

fn a_over_varpi(r: f64, a: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a / varpi(r, a)
    }
}

/// Weight `M̂ = 1 + (a sinθ/ϖ) α²` of the inner product.
pub fn mhat(r: f64, theta: f64, a: f64) -> Matrix4<C> {
    Matrix4::identity() + alpha(2) * C::from(theta.sin() * a_over_varpi(r, a))
}

/// `(λ₊, λ₋) = 1 ± a sinθ/ϖ`, each of multiplicity two.
pub fn mhat_eigenvalues(r: f64, theta: f64, a: f64) -> (f64, f64) {
    let x = theta.sin() * a_over_varpi(r, a);
    (1.0 + x, 1.0 - x)
}

fn re(x: f64) -> C {
    C::from(x)
}

/// Pointwise matrices of `Ĥ = P_r ∂_r + P_θ ∂_θ + Q` for azimuthal number κ.
struct PointOperator {
    pr: Matrix4<C>,
    pt: Matrix4<C>,
    q: Matrix4<C>,
}

fn point_operator(r: f64, theta: f64, kappa: f64, p: &ModelParams) -> Result<PointOperator> {
    let a = p.a;
    let w = varpi(r, a);
    let (s, ct) = theta.sin_cos();
    let m0 = gamma(0) * re(w) + gamma(2) * re(a * s);
    let inv = m0 * re(1.0 / (w * w - a * a * s * s));
    let rho_abs = geometry::sigma(r, theta, a).sqrt();
    let at = fields::atilde(r, theta, p)?.comps;
    let mi = C::new(0.0, -1.0);
    let mphi = gamma(0) * re(a / w) + gamma(2) * re(1.0 / s);
    let rho = C::new(r, a * ct);
    let rfrak = Matrix4::from_diagonal(&Vector4::new(rho, rho, rho.conj(), rho.conj()));
    let pot = (gamma(0) * re(at[0]) + gamma(2) * re(at[2])) * re(p.q_prime * rho_abs);
    let q = inv * (mphi * re(kappa) - pot + rfrak * re(p.m));
    Ok(PointOperator { pr: inv * gamma(3) * (mi * w), pt: inv * gamma(1) * mi, q })
}

/// Finite-difference weights for the `m`-th derivative at `x0` on nodes `xs` (Fornberg).
pub fn fd_weights(x0: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] *= c4 / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Tensor grid: `r = s sinh x` on a uniform symmetric `x` grid, θ on
/// Gauss–Legendre nodes of `(0, π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub scale: f64,
    pub x_max: f64,
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
    pub theta_weights: Vec<f64>,
    /// Order of the radial difference stencils.
    pub order: usize,
}

impl Grid {
    pub fn new(scale: f64, x_max: f64, n_r: usize, n_theta: usize, order: usize) -> Result<Self> {
        if !(scale > 0.0) || !(x_max > 0.0) || n_r < order + 2 || n_theta < 2 || order < 2 || !order.is_multiple_of(2) {
            return Err(ZgknError::InvalidParams(format!(
                "grid needs scale, x_max > 0, even order >= 2 and n_r > order + 1 (got {scale}, {x_max}, {n_r}, {order})"
            )));
        }
        let h = 2.0 * x_max / (n_r - 1) as f64;
        let r = (0..n_r)
            .map(|i| {
                let x = -x_max + h * i as f64;
                let y = if 2 * i + 1 == n_r { 0.0 } else { x };
                scale * y.sinh()
            })
            .collect::<Vec<_>>();
        // Enforce exact symmetry r_i = −r_{N−1−i}.
        let r = (0..n_r).map(|i| if i < n_r / 2 { -r[n_r - 1 - i] } else { r[i] }).collect();
        let rule = GaussRule::new(n_theta);
        let (theta, theta_weights) = rule.on(0.0, PI).unzip();
        Ok(Self { scale, x_max, r, theta, theta_weights, order })
    }

    /// Radial range covering `[−r_max, r_max]`.
    pub fn for_range(scale: f64, r_max: f64, n_r: usize, n_theta: usize, order: usize) -> Result<Self> {
        Self::new(scale, (r_max / scale).asinh(), n_r, n_theta, order)
    }

    pub fn n_r(&self) -> usize {
        self.r.len()
    }

    pub fn n_theta(&self) -> usize {
        self.theta.len()
    }

    fn h(&self) -> f64 {
        2.0 * self.x_max / (self.n_r() - 1) as f64
    }

    fn x(&self, i: usize) -> f64 {
        (self.r[i] / self.scale).asinh()
    }

    /// Trapezoid weights in `x` times `dr/dx`.
    pub fn r_weights(&self) -> Vec<f64> {
        let h = self.h();
        let n = self.n_r();
        (0..n)
            .map(|i| {
                let end = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
                end * h * self.scale * self.x(i).cosh()
            })
            .collect()
    }

    /// Stencils `(offset, weights)` for `d/dx` at every radial node.
    fn x_stencils(&self) -> Vec<(usize, Vec<f64>)> {
        let n = self.n_r();
        let p = self.order + 1;
        let h = self.h();
        (0..n)
            .map(|i| {
                let start = i.saturating_sub(self.order / 2).min(n - p);
                let xs: Vec<f64> = (start..start + p).map(|k| (k as f64 - i as f64) * h).collect();
                (start, fd_weights(0.0, &xs, 1))
            })
            .collect()
    }

    /// Spectral differentiation matrix on the θ nodes.
    fn theta_derivative(&self) -> DMatrix<f64> {
        let n = self.n_theta();
        let t: Vec<f64> = self.theta.iter().map(|th| 2.0 * th / PI - 1.0).collect();
        // Barycentric weights of Legendre points: (−1)^j √((1 − t²) w).
        let w: Vec<f64> = (0..n)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * ((1.0 - t[j] * t[j]) * self.theta_weights[j] * 2.0 / PI).sqrt()
            })
            .collect();
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i != j {
                    let v = (w[j] / w[i]) / (t[i] - t[j]);
                    d[(i, j)] = v;
                    diag -= v;
                }
            }
            d[(i, i)] = diag;
        }
        d * (2.0 / PI)
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.n_r();
        let m = self.n_theta();
        (0..n).all(|i| self.r[i] == -self.r[n - 1 - i])
            && (0..m).all(|j| (self.theta[j] - (PI - self.theta[m - 1 - j])).abs() <= 4.0 * f64::EPSILON * PI)
    }
}

/// ℂ⁴ values of one κ-mode on a grid, row-major in `(r, θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridBiSpinor {
    pub grid: Grid,
    /// Ring radius of the weight `M̂`.
    pub a: f64,
    pub kappa: f64,
    pub values: Vec<[C; 4]>,
}

impl GridBiSpinor {
    pub fn zeros(grid: Grid, a: f64, kappa: f64) -> Self {
        let n = grid.n_r() * grid.n_theta();
        Self { grid, a, kappa, values: vec![[C::from(0.0); 4]; n] }
    }

    pub fn from_fn(grid: Grid, a: f64, kappa: f64, f: impl Fn(f64, f64) -> [C; 4]) -> Self {
        let mut out = Self::zeros(grid, a, kappa);
        let nt = out.grid.n_theta();
        for i in 0..out.grid.n_r() {
            for j in 0..nt {
                out.values[i * nt + j] = f(out.grid.r[i], out.grid.theta[j]);
            }
        }
        out
    }

    /// Tabulate a separated eigenstate at `t = φ = 0`.
    pub fn from_state(state: &SeparatedState, grid: Grid) -> Result<Self> {
        let radial: Vec<(f64, f64)> = grid.r.iter().map(|&r| state.radial(r)).collect::<Result<_>>()?;
        let angular: Vec<(f64, f64)> = grid.theta.iter().map(|&t| state.angular_profile(t)).collect::<Result<_>>()?;
        let mut out = Self::zeros(grid, state.params.a, state.kappa);
        let nt = angular.len();
        for (i, &(rr, om)) in radial.iter().enumerate() {
            for (j, &(ss, bt)) in angular.iter().enumerate() {
                out.values[i * nt + j] = crate::bispinor::eigen_bispinor(rr, om, ss, bt, C::from(1.0)).0;
            }
        }
        Ok(out)
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.grid.n_theta() + j
    }

    fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.kappa != other.kappa || self.a != other.a {
            return Err(ZgknError::GridMismatch);
        }
        Ok(())
    }

    pub fn scale(&self, c: C) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| v.iter_mut().for_each(|z| *z *= c));
        out
    }

    /// `self + c · other`.
    pub fn axpy(&self, c: C, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(&other.values) {
            for k in 0..4 {
                v[k] += c * w[k];
            }
        }
        Ok(out)
    }

    /// `∂_r` and `∂_θ` of every component.
    fn derivatives(&self) -> (Vec<[C; 4]>, Vec<[C; 4]>) {
        let g = &self.grid;
        let (nr, nt) = (g.n_r(), g.n_theta());
        let zero = [C::from(0.0); 4];
        let mut dr = vec![zero; nr * nt];
        for (i, (start, w)) in g.x_stencils().into_iter().enumerate() {
            let jac = 1.0 / (g.scale * g.x(i).cosh());
            for j in 0..nt {
                let mut acc = zero;
                for (k, wk) in w.iter().enumerate() {
                    let v = &self.values[(start + k) * nt + j];
                    for c in 0..4 {
                        acc[c] += v[c] * *wk;
                    }
                }
                dr[i * nt + j] = acc.map(|z| z * jac);
            }
        }
        // θ: differentiate U = Ψ̂/√sinθ spectrally, then ∂Ψ̂ = √s ∂U + ½ cotθ Ψ̂.
        let d = g.theta_derivative();
        let sq: Vec<f64> = g.theta.iter().map(|t| t.sin().sqrt()).collect();
        let cot: Vec<f64> = g.theta.iter().map(|t| 0.5 / t.tan()).collect();
        let mut dt = vec![zero; nr * nt];
        for i in 0..nr {
            for jj in 0..nt {
                let mut acc = zero;
                for j in 0..nt {
                    let v = &self.values[i * nt + j];
                    let wgt = d[(jj, j)] / sq[j];
                    for c in 0..4 {
                        acc[c] += v[c] * wgt;
                    }
                }
                let own = &self.values[i * nt + jj];
                for c in 0..4 {
                    acc[c] = acc[c] * sq[jj] + own[c] * cot[jj];
                }
                dt[i * nt + jj] = acc;
            }
        }
        (dr, dt)
    }
}

fn mat_vec(m: &Matrix4<C>, v: &[C; 4]) -> [C; 4] {
    let mut o = [C::from(0.0); 4];
    for (r, out) in o.iter_mut().enumerate() {
        *out = m[(r, 0)] * v[0] + m[(r, 1)] * v[1] + m[(r, 2)] * v[2] + m[(r, 3)] * v[3];
    }
    o
}

/// `ĤΨ̂` for the κ-mode stored in `psi`.
pub fn hamiltonian_apply(psi: &GridBiSpinor, p: &ModelParams) -> Result<GridBiSpinor> {
    if psi.a != p.a {
        return Err(ZgknError::GridMismatch);
    }
    let (dr, dt) = psi.derivatives();
    let g = &psi.grid;
    let mut out = GridBiSpinor::zeros(g.clone(), p.a, psi.kappa);
    for i in 0..g.n_r() {
        for j in 0..g.n_theta() {
            let op = point_operator(g.r[i], g.theta[j], psi.kappa, p)?;
            let k = psi.idx(i, j);
            let a = mat_vec(&op.pr, &dr[k]);
            let b = mat_vec(&op.pt, &dt[k]);
            let c = mat_vec(&op.q, &psi.values[k]);
            out.values[k] = [a[0] + b[0] + c[0], a[1] + b[1] + c[1], a[2] + b[2] + c[2], a[3] + b[3] + c[3]];
        }
    }
    Ok(out)
}

/// `⟨Ψ̂, Φ̂⟩_M̂ = 2π ∫∫ Ψ̂†M̂Φ̂ dr dθ` on the shared grid.
pub fn inner_product(psi: &GridBiSpinor, phi: &GridBiSpinor) -> Result<C> {
    psi.same_grid(phi)?;
    let g = &psi.grid;
    let wr = g.r_weights();
    let a2 = alpha(2);
    let mut re_acc = KahanSum::default();
    let mut im_acc = KahanSum::default();
    for i in 0..g.n_r() {
        for j in 0..g.n_theta() {
            let k = psi.idx(i, j);
            let x = g.theta[j].sin() * psi.grid_a_over_varpi(i);
            let (u, v) = (&psi.values[k], &phi.values[k]);
            let av = mat_vec(&a2, v);
            let mut z = C::from(0.0);
            for c in 0..4 {
                z += u[c].conj() * (v[c] + av[c] * x);
            }
            let w = TAU * wr[i] * g.theta_weights[j];
            re_acc.add(w * z.re);
            im_acc.add(w * z.im);
        }
    }
    Ok(C::new(re_acc.value(), im_acc.value()))
}

impl GridBiSpinor {
    fn grid_a_over_varpi(&self, i: usize) -> f64 {
        a_over_varpi(self.grid.r[i], self.a)
    }
}

pub fn norm(psi: &GridBiSpinor) -> Result<f64> {
    Ok(inner_product(psi, psi)?.re.max(0.0).sqrt())
}

/// `‖(Ĥ − E)Ψ̂‖_M̂ / ‖Ψ̂‖_M̂`.
pub fn relative_residual(psi: &GridBiSpinor, p: &ModelParams, e: f64) -> Result<f64> {
    let h = hamiltonian_apply(psi, p)?;
    let r = h.axpy(C::from(-e), psi)?;
    Ok(norm(&r)? / norm(psi)?)
}

/// Discrete symmetries acting on grid states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Symmetry {
    /// Sheet swap `(r, θ) → (−r, π − θ)`.
    SHat,
    /// Complex conjugation; maps κ to −κ.
    KHat,
    /// `Ĉ = γ⁰K̂Ŝ`.
    CHat,
    /// `C̃ = iγ²K̂`.
    CTilde,
}

pub fn symmetry_apply(psi: &GridBiSpinor, op: Symmetry) -> Result<GridBiSpinor> {
    let swap = |s: &GridBiSpinor| -> Result<GridBiSpinor> {
        if !s.grid.is_symmetric() {
            return Err(ZgknError::AsymmetricGrid);
        }
        let (nr, nt) = (s.grid.n_r(), s.grid.n_theta());
        let mut out = s.clone();
        for i in 0..nr {
            for j in 0..nt {
                out.values[i * nt + j] = s.values[(nr - 1 - i) * nt + (nt - 1 - j)];
            }
        }
        Ok(out)
    };
    let conj = |s: &GridBiSpinor| {
        let mut out = s.clone();
        out.kappa = -s.kappa;
        out.values.iter_mut().for_each(|v| v.iter_mut().for_each(|z| *z = z.conj()));
        out
    };
    let left = |s: GridBiSpinor, m: Matrix4<C>| {
        let mut out = s;
        out.values.iter_mut().for_each(|v| *v = mat_vec(&m, v));
        out
    };
    Ok(match op {
        Symmetry::SHat => swap(psi)?,
        Symmetry::KHat => conj(psi),
        Symmetry::CHat => left(conj(&swap(psi)?), gamma(0)),
        Symmetry::CTilde => left(conj(psi), gamma(2) * C::new(0.0, 1.0)),
    })
}

const MAGIC: &[u8; 8] = b"ZGKNGRID";

/// Sidecar metadata written next to the binary container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSidecar {
    pub params: ModelParams,
    pub kappa: f64,
    pub energy: Option<f64>,
    pub grid: Grid,
}

impl GridBiSpinor {
    /// Binary layout: magic, `u64` n_r, n_θ, components, then values as
    /// little-endian `f64` pairs `(re, im)` in row-major `(r, θ, component)`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(32 + self.values.len() * 64);
        b.extend_from_slice(MAGIC);
        for n in [self.grid.n_r(), self.grid.n_theta(), 4] {
            b.extend_from_slice(&(n as u64).to_le_bytes());
        }
        for v in &self.values {
            for z in v {
                b.extend_from_slice(&z.re.to_le_bytes());
                b.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        b
    }

    pub fn from_bytes(bytes: &[u8], grid: Grid, a: f64, kappa: f64) -> Result<Self> {
        let bad = |m: &str| ZgknError::InvalidParams(format!("grid container: {m}"));
        if bytes.len() < 32 || &bytes[..8] != MAGIC {
            return Err(bad("bad header"));
        }
        let word = |k: usize| u64::from_le_bytes(bytes[8 + 8 * k..16 + 8 * k].try_into().unwrap()) as usize;
        let (nr, nt, nc) = (word(0), word(1), word(2));
        if nr != grid.n_r() || nt != grid.n_theta() || nc != 4 {
            return Err(ZgknError::GridMismatch);
        }
        let body = &bytes[32..];
        if body.len() != nr * nt * 64 {
            return Err(bad("truncated body"));
        }
        let f = |k: usize| f64::from_le_bytes(body[8 * k..8 * k + 8].try_into().unwrap());
        let values =
            (0..nr * nt).map(|p| std::array::from_fn(|c| C::new(f(8 * p + 2 * c), f(8 * p + 2 * c + 1)))).collect();
        Ok(Self { grid, a, kappa, values })
    }

    /// Write `<path>` and `<path>.json`.
    pub fn save(&self, path: &Path, params: &ModelParams, energy: Option<f64>) -> std::io::Result<()> {
        std::fs::File::create(path)?.write_all(&self.to_bytes())?;
        let side = GridSidecar { params: *params, kappa: self.kappa, energy, grid: self.grid.clone() };
        let json = serde_json::to_string_pretty(&side).map_err(std::io::Error::other)?;
        std::fs::write(sidecar_path(path), json)
    }

    pub fn load(path: &Path) -> std::io::Result<(Self, GridSidecar)> {
        let side: GridSidecar =
            serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?).map_err(std::io::Error::other)?;
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let g =
            Self::from_bytes(&bytes, side.grid.clone(), side.params.a, side.kappa).map_err(std::io::Error::other)?;
        Ok((g, side))
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const ETA: [f64; 4] = [1.0, -1.0, -1.0, -1.0];

    fn random_point(rng: &mut ChaCha8Rng) -> (f64, f64, f64) {
        (rng.gen_range(-5.0..5.0), rng.gen_range(0.05..PI - 0.05), rng.gen_range(-2.0..2.0))
    }

    #[test]
    fn frame_is_dual_and_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let (r, th, a) = random_point(&mut rng);
            let f = cartan_frame(r, th, a).unwrap();
            let g = geometry::metric_coeffs(r, th, a).unwrap();
            for mu in 0..4 {
                for nu in 0..4 {
                    let dual: f64 = (0..4).map(|k| f.omega[mu][k] * f.e[nu][k]).sum();
                    assert!((dual - f64::from(u8::from(mu == nu))).abs() < 1e-12);
                    let gm: f64 = (0..4).map(|al| ETA[al] * f.omega[al][mu] * f.omega[al][nu]).sum();
                    assert!((gm - g[mu][nu]).abs() < 1e-12 * (1.0 + g[mu][nu].abs()));
                }
            }
        }
        assert_eq!(cartan_frame(0.0, FRAC, 1.0), Err(ZgknError::RingPoint));
    }

    const FRAC: f64 = std::f64::consts::FRAC_PI_2;

    #[test]
    fn structure_equation_holds() {
        // dω^μ + Ω^μ_ν ∧ ω^ν = 0 with dω from central differences in (r, θ).
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let (r, th, a) = random_point(&mut rng);
            let h = 1e-5;
            let f = cartan_frame(r, th, a).unwrap();
            let om = rotation_coeffs(r, th, a).unwrap().components();
            let d = |dir: usize| -> [[f64; 4]; 4] {
                let (p, m) = if dir == 1 {
                    (cartan_frame(r + h, th, a).unwrap(), cartan_frame(r - h, th, a).unwrap())
                } else {
                    (cartan_frame(r, th + h, a).unwrap(), cartan_frame(r, th - h, a).unwrap())
                };
                std::array::from_fn(|mu| std::array::from_fn(|nu| (p.omega[mu][nu] - m.omega[mu][nu]) / (2.0 * h)))
            };
            let dr = d(1);
            let dt = d(2);
            let del = |al: usize| -> [[f64; 4]; 4] {
                match al {
                    1 => dr,
                    2 => dt,
                    _ => [[0.0; 4]; 4],
                }
            };
            for mu in 0..4 {
                for al in 0..4 {
                    for be in (al + 1)..4 {
                        let dw = del(al)[mu][be] - del(be)[mu][al];
                        let mut wedge = 0.0;
                        for nu in 0..4 {
                            // Ω^μ_ν coordinate components.
                            let c = |x: usize| ETA[mu] * (0..4).map(|l| om[mu][nu][l] * f.omega[l][x]).sum::<f64>();
                            wedge += c(al) * f.omega[nu][be] - c(be) * f.omega[nu][al];
                        }
                        assert!(
                            (dw + wedge).abs() < 1e-6 * (1.0 + dw.abs()),
                            "μ={mu} ({al},{be}) at {r},{th},{a}: {dw} vs {wedge}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn rotation_coeffs_limits() {
        let c = rotation_coeffs(2.0, 0.7, 0.0).unwrap();
        assert_eq!((c.a, c.b, c.c, c.d), (0.0, 0.0, 0.0, 0.0));
        assert!((c.e - 0.5).abs() < 1e-15 && (c.f - 1.0 / (0.7f64.tan() * 2.0)).abs() < 1e-15);
        let eq = rotation_coeffs(1.3, FRAC, 0.8).unwrap();
        assert!(eq.c.abs() < 1e-16 && eq.f.abs() < 1e-16);
        let o = rotation_coeffs(0.4, 1.1, 0.6).unwrap().components();
        for mu in 0..4 {
            for nu in 0..4 {
                for l in 0..4 {
                    assert_eq!(o[mu][nu][l], -o[nu][mu][l]);
                }
            }
        }
    }

    #[test]
    fn mhat_spectrum() {
        assert_eq!(mhat_eigenvalues(0.3, 0.0, 1.0), (1.0, 1.0));
        assert_eq!(mhat_eigenvalues(0.0, FRAC, 1.0), (2.0, 0.0));
        assert_eq!(mhat_eigenvalues(0.3, 1.0, 0.0), (1.0, 1.0));
        let m = mhat(0.4, 1.2, 0.7);
        let ev = m.symmetric_eigen().eigenvalues;
        let (lp, lm) = mhat_eigenvalues(0.4, 1.2, 0.7);
        let mut got: Vec<f64> = ev.iter().copied().collect();
        got.sort_by(f64::total_cmp);
        for (g, e) in got.iter().zip([lm, lm, lp, lp]) {
            assert!((g - e).abs() < 1e-14);
        }
    }

    #[test]
    fn fornberg_reproduces_classic_stencils() {
        let w = fd_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 1);
        for (a, b) in w.iter().zip([1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        let w2 = fd_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert_eq!(w2, vec![1.0, -2.0, 1.0]);
    }

    fn bump_grid() -> Grid {
        Grid::for_range(0.5, 12.0, 401, 24, 4).unwrap()
    }

    fn random_smooth(seed: u64, a: f64, kappa: f64) -> GridBiSpinor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<(C, f64, f64)> = (0..4)
            .map(|_| {
                (
                    C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    rng.gen_range(-1.5..1.5),
                    rng.gen_range(0.5..1.5),
                )
            })
            .collect();
        GridBiSpinor::from_fn(bump_grid(), a, kappa, |r, th| {
            std::array::from_fn(|k| {
                let (z, r0, w) = c[k];
                z * (-(r - r0).powi(2) / (w * w)).exp()
                    * th.sin().powf(kappa.abs() + 0.5 * (k % 2) as f64)
                    * (1.0 + 0.3 * th.cos())
            })
        })
    }

    #[test]
    fn weight_is_positive_and_reduces_to_l2() {
        let psi = random_smooth(3, 0.7, 0.5);
        assert!(inner_product(&psi, &psi).unwrap().re > 0.0);
        let flat = random_smooth(3, 0.0, 0.5);
        let mut l2 = 0.0;
        let wr = flat.grid.r_weights();
        for i in 0..flat.grid.n_r() {
            for j in 0..flat.grid.n_theta() {
                let v = &flat.values[i * flat.grid.n_theta() + j];
                l2 += TAU * wr[i] * flat.grid.theta_weights[j] * v.iter().map(|z| z.norm_sqr()).sum::<f64>();
            }
        }
        assert!((inner_product(&flat, &flat).unwrap().re - l2).abs() < 1e-12 * l2);
    }

    #[test]
    fn hamiltonian_is_linear_and_symmetric() {
        let p = ModelParams::from_coupling(0.7, 1.0, -0.2);
        let u = random_smooth(4, p.a, -0.5);
        let v = random_smooth(5, p.a, -0.5);
        let c1 = C::new(0.3, -1.2);
        let hu = hamiltonian_apply(&u, &p).unwrap();
        let hv = hamiltonian_apply(&v, &p).unwrap();
        let lhs = hamiltonian_apply(&u.axpy(c1, &v).unwrap(), &p).unwrap();
        let rhs = hu.axpy(c1, &hv).unwrap();
        let scale = norm(&lhs).unwrap();
        assert!(norm(&lhs.axpy(C::from(-1.0), &rhs).unwrap()).unwrap() < 1e-13 * scale);
        let a = inner_product(&u, &hv).unwrap();
        let b = inner_product(&hu, &v).unwrap();
        assert!((a - b).norm() < 1e-6 * a.norm().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn discrete_symmetries_are_involutions() {
        let psi = random_smooth(6, 0.4, 1.5);
        for op in [Symmetry::SHat, Symmetry::KHat, Symmetry::CHat] {
            let twice = symmetry_apply(&symmetry_apply(&psi, op).unwrap(), op).unwrap();
            assert_eq!(twice, psi, "{op:?}");
        }
        let ct = symmetry_apply(&symmetry_apply(&psi, Symmetry::CTilde).unwrap(), Symmetry::CTilde).unwrap();
        let diff = ct.axpy(C::from(-1.0), &psi).unwrap();
        assert!(diff.values.iter().flatten().all(|z| z.norm() < 1e-15));
        let mut skew = psi.clone();
        skew.grid.r[0] *= 1.01;
        assert_eq!(symmetry_apply(&skew, Symmetry::SHat), Err(ZgknError::AsymmetricGrid));
    }

    #[test]
    fn anticommutation_with_chat() {
        let p = ModelParams::from_coupling(0.7, 1.0, -0.2);
        let u = random_smooth(7, p.a, 0.5);
        let lhs = hamiltonian_apply(&symmetry_apply(&u, Symmetry::CHat).unwrap(), &p).unwrap();
        let rhs = symmetry_apply(&hamiltonian_apply(&u, &p).unwrap(), Symmetry::CHat).unwrap();
        let sum = lhs.axpy(C::from(1.0), &rhs).unwrap();
        assert!(norm(&sum).unwrap() < 1e-9 * norm(&lhs).unwrap());
    }

    #[test]
    fn container_roundtrip() {
        let psi = random_smooth(8, 0.4, -0.5);
        let bytes = psi.to_bytes();
        assert_eq!(bytes.len(), 32 + psi.values.len() * 64);
        let back = GridBiSpinor::from_bytes(&bytes, psi.grid.clone(), 0.4, -0.5).unwrap();
        assert_eq!(back, psi);
        let dir = std::env::temp_dir().join(format!("zgkn-grid-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("state.bin");
        let p = ModelParams::from_coupling(0.4, 1.0, -0.1);
        psi.save(&path, &p, Some(0.5)).unwrap();
        let (loaded, side) = GridBiSpinor::load(&path).unwrap();
        assert_eq!(loaded, psi);
        assert_eq!(side.energy, Some(0.5));
        std::fs::remove_dir_all(&dir).unwrap();
        assert!(GridBiSpinor::from_bytes(&bytes[..40], psi.grid.clone(), 0.4, -0.5).is_err());
    }
}
