//! Mutual field energy and momentum of the ring and a point charge, by
//! quadrature over the double-sheeted space with a ball around the charge and
//! a tube around the ring excised.
//!
//! `4πP₀ = ∫ ∇φ_pt·∇φ_KN d³s` and `4πP = ∫ E_pt × B_KN d³s`, compared with
//! `Q′φ_KN(q)` and `Q′A_KN(q)`.
//!
//! The integral runs in the ring-centred chart `ξ = r/|a|`, `η = cos θ`, where
//! both sheets form the strip `ξ ∈ ℝ, |η| ≤ 1` and the ring is the single point
//! `ξ = η = 0`, with volume element `|a|³(ξ² + η²) dξ dη dφ`. The meridional
//! plane is split into polar rays around the ring, cut at the tube radii of
//! the ε ladder, and two tails `|ξ| > 1`. The azimuth is integrated first
//! with the periodic trapezoid rule. The Coulomb singularity of the point
//! charge is removed by subtracting `∇(χ Q′/|x − q|)` with a smooth cutoff `χ`
//! on the charge's sheet and adding it back in spherical coordinates around
//! `q`, where it is bounded.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use crate::error::{Result, ZgknError};
use crate::fields::{self, PointSource};
use crate::geometry::{self, Bl, ModelParams, Sheet};
use crate::quadrature::{self, GaussRule, KahanSum};

/// Which sheets the quadrature covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coverage {
    Both,
    Only(Sheet),
}

/// Order of the factors in the energy integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Labeling {
    /// `E_KN · E_pt`.
    RingFirst,
    /// `E_pt · E_KN`.
    PointFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Excision radii in units of `|a|`, strictly decreasing. Applies to both
    /// the ball around the charge and the tube around the ring.
    pub eps_ladder: Vec<f64>,
    /// Gauss–Legendre nodes per panel.
    pub order: usize,
    /// Angular nodes per quarter of the polar patch around the ring.
    pub n_psi: usize,
    /// Azimuthal nodes away from the point charge.
    pub n_phi: usize,
    pub coverage: Coverage,
    pub labeling: Labeling,
}

/// `10^{-1}, 10^{-1.2}, …, 10^{-3}`.
pub fn default_ladder() -> Vec<f64> {
    (0..11).map(|k| 10f64.powf(-1.0 - 0.2 * k as f64)).collect()
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            eps_ladder: default_ladder(),
            order: 16,
            n_psi: 24,
            n_phi: 64,
            coverage: Coverage::Both,
            labeling: Labeling::RingFirst,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        let l = &self.eps_ladder;
        if l.len() < 3 {
            return Err(ZgknError::InvalidParams("the ε ladder needs at least 3 values".into()));
        }
        if !l.iter().all(|e| e.is_finite() && *e > 0.0) || l.windows(2).any(|w| w[1] >= w[0]) {
            return Err(ZgknError::InvalidParams("the ε ladder must be positive and strictly decreasing".into()));
        }
        if l[0] > 0.2 {
            return Err(ZgknError::InvalidParams(format!("largest excision {} |a| exceeds 0.2 |a|", l[0])));
        }
        if self.order < 2 || self.n_psi < 2 || self.n_phi < 4 {
            return Err(ZgknError::InvalidParams("quadrature orders too small".into()));
        }
        Ok(())
    }
}

/// Ladder of excised integrals and its extrapolation to `ε = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderReport<T> {
    /// Excision radii in units of `|a|`.
    pub eps: Vec<f64>,
    pub raw_ladder: Vec<T>,
    /// Three-point polynomial extrapolation in `√ε` through the smallest radii.
    pub extrapolated: T,
    pub closed_form: T,
    pub rel_error: f64,
    /// Least-squares slope of `ln |P(ε_{k+1}) − P(ε_k)|` against `ln ε_k`.
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionReport {
    pub point: Bl,
    pub p0: LadderReport<f64>,
    /// Cartesian components.
    pub pj: LadderReport<[f64; 3]>,
}

/// Energy part only.
pub fn interaction_p0(q: Bl, params: &ModelParams, cfg: &QuadratureConfig) -> Result<LadderReport<f64>> {
    Ok(interaction(q, params, cfg)?.p0)
}

/// Momentum part only.
pub fn interaction_pj(q: Bl, params: &ModelParams, cfg: &QuadratureConfig) -> Result<LadderReport<[f64; 3]>> {
    Ok(interaction(q, params, cfg)?.pj)
}

/// Denominator of the momentum error: `|Q′A(q)|`, or the size of `Q′A` at
/// distance `|a|` when the closed form is below 1% of that (on the axis).
fn momentum_scale(p: &ModelParams, closed: [f64; 3]) -> f64 {
    let typical = (p.q_prime * p.moment()).abs() / (p.a * p.a);
    let n = norm(closed);
    if n >= 1e-2 * typical {
        n
    } else {
        typical
    }
}

pub fn interaction(q: Bl, params: &ModelParams, cfg: &QuadratureConfig) -> Result<InteractionReport> {
    params.validate()?;
    cfg.validate()?;
    if params.a == 0.0 {
        return Err(ZgknError::InvalidParams("the excised quadrature needs a != 0".into()));
    }
    let prob = Problem::new(q, params, cfg)?;
    let buckets = prob.integrate()?;
    let l = cfg.eps_ladder.len();
    let p0: Vec<f64> = (0..l).map(|i| buckets[i][0] / (4.0 * PI)).collect();
    let pj: Vec<[f64; 3]> = (0..l).map(|i| std::array::from_fn(|c| buckets[i][c + 1] / (4.0 * PI))).collect();

    let q_phi = prob.src.pos.phi;
    let cf0 = params.q_prime * fields::phi_kn_bl(q.r, q.theta, params.q, params.a)?;
    let a_vec = fields::vector_potential(q.r, q.theta, q_phi, params)?;
    let cfj = a_vec.map(|c| params.q_prime * c);

    let eps = cfg.eps_ladder.clone();
    let ext0 = extrapolate(&eps, &p0);
    let extj: [f64; 3] = std::array::from_fn(|c| extrapolate(&eps, &pj.iter().map(|v| v[c]).collect::<Vec<_>>()));

    let d0: Vec<f64> = p0.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let dj: Vec<f64> = pj.windows(2).map(|w| norm(sub(w[1], w[0]))).collect();
    let scale0 = cf0.abs().max(ext0.abs());
    let scalej = momentum_scale(params, cfj);
    check_ladder("P0", &p0, &d0, scale0)?;
    check_ladder("P", &pj.iter().map(|v| norm(*v)).collect::<Vec<_>>(), &dj, scalej)?;

    let p0r = LadderReport {
        eps: eps.clone(),
        raw_ladder: p0,
        extrapolated: ext0,
        closed_form: cf0,
        rel_error: (ext0 - cf0).abs() / scale0.max(f64::MIN_POSITIVE),
        exponent: quadrature::loglog_slope(&eps[..l - 1], &d0),
    };
    let pjr = LadderReport {
        eps: eps.clone(),
        raw_ladder: pj,
        extrapolated: extj,
        closed_form: cfj,
        rel_error: norm(sub(extj, cfj)) / scalej.max(f64::MIN_POSITIVE),
        exponent: quadrature::loglog_slope(&eps[..l - 1], &dj),
    };
    Ok(InteractionReport { point: prob.src.pos, p0: p0r, pj: pjr })
}

fn extrapolate(eps: &[f64], vals: &[f64]) -> f64 {
    let n = eps.len();
    let h: Vec<f64> = eps[n - 3..].iter().map(|e| e.sqrt()).collect();
    quadrature::extrapolate_to_zero(&h, &vals[n - 3..])
}

/// Successive ladder differences must not grow beyond noise.
fn check_ladder(name: &str, vals: &[f64], diffs: &[f64], scale: f64) -> Result<()> {
    if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
        return Err(ZgknError::QuadratureDivergence(format!("{name} is not finite at ladder index {i}")));
    }
    let floor = 1e-9 * scale;
    for k in 1..diffs.len() {
        if diffs[k] > 1.5 * diffs[k - 1] + floor {
            return Err(ZgknError::QuadratureDivergence(format!(
                "{name} ladder steps grow at index {k}: {:e} after {:e}",
                diffs[k],
                diffs[k - 1]
            )));
        }
    }
    Ok(())
}

/// Sorted breakpoints within `[lo, hi]`, with near-duplicates merged.
fn refine_breaks(mut b: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    b.push(lo);
    b.push(hi);
    b.retain(|v| v.is_finite() && *v >= lo && *v <= hi);
    b.sort_by(f64::total_cmp);
    let tol = 1e-9 * (hi - lo);
    let mut out: Vec<f64> = Vec::with_capacity(b.len());
    for v in b {
        if out.last().is_none_or(|l| v - l > tol) {
            out.push(v);
        }
    }
    *out.last_mut().unwrap() = hi;
    out
}

fn dot(u: [f64; 3], v: [f64; 3]) -> f64 {
    u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
}

fn cross(u: [f64; 3], v: [f64; 3]) -> [f64; 3] {
    [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]]
}

fn sub(u: [f64; 3], v: [f64; 3]) -> [f64; 3] {
    [u[0] - v[0], u[1] - v[1], u[2] - v[2]]
}

fn norm(u: [f64; 3]) -> f64 {
    dot(u, u).sqrt()
}

/// Unit of work; each returns one contribution per ladder bucket.
#[derive(Debug, Clone, Copy)]
enum Cell {
    /// Polar ray around the ring in the `(ξ, η)` plane.
    Ray { psi: f64, weight: f64 },
    /// Tail `ξ = side·e^v`, `v ∈ [v0, v1]`.
    Tail { side: f64, v0: f64, v1: f64 },
    /// Spherical shell around the charge for the subtracted Coulomb part.
    Shell { bucket: usize, rho0: f64, rho1: f64 },
    /// Ball `|x − q| < ε_i` of the regularized integrand, removed afterwards.
    Ball { index: usize },
}

/// Four integrand components per ladder rung.
type Buckets = Vec<[f64; 4]>;

struct Problem<'a> {
    params: &'a ModelParams,
    cfg: &'a QuadratureConfig,
    src: PointSource,
    aa: f64,
    sheet: Sheet,
    /// Cutoff radius of the Coulomb subtraction.
    core: f64,
    q_cyl: (f64, f64),
    /// Meridional position of the charge in the `(ξ, η)` plane and the
    /// half-widths of the cutoff region there.
    q_chart: (f64, f64),
    q_box: (f64, f64),
    rule: GaussRule,
    psi_rule: GaussRule,
}

/// Distance from a point of the closed disc `z = 0, ϱ ≤ |a|`.
fn disc_distance(rc: f64, z: f64, aa: f64) -> f64 {
    if rc <= aa {
        z.abs()
    } else {
        (rc - aa).hypot(z)
    }
}

impl<'a> Problem<'a> {
    fn new(q: Bl, params: &'a ModelParams, cfg: &'a QuadratureConfig) -> Result<Self> {
        let a = params.a;
        let aa = a.abs();
        if geometry::is_ring(q.r, q.theta, a) {
            return Err(ZgknError::RingPoint);
        }
        let src = PointSource::new(q, params.q_prime, a)?;
        let (rc, z, _) = geometry::os_to_cyl(q.r, q.theta, q.phi, a);
        let dd = disc_distance(rc, z, aa);
        if dd == 0.0 {
            return Err(ZgknError::InvalidParams("the point charge lies on the branch disc".into()));
        }
        let core = 0.5 * dd;
        let eps_max = cfg.eps_ladder[0] * aa;
        let ring_d = geometry::ring_distance(q.r, q.theta, a);
        if 2.0 * eps_max >= ring_d || eps_max >= 0.5 * core {
            return Err(ZgknError::InvalidParams(format!(
                "excisions of radius {eps_max} overlap: ring distance {ring_d}, disc distance {dd}"
            )));
        }
        let (xq, eq) = (q.r / aa, q.theta.cos());
        let s2 = xq * xq + eq * eq;
        let hx = aa * (s2 / (1.0 + xq * xq)).sqrt();
        let dt = core / (aa * s2.sqrt());
        let de = [q.theta - dt, q.theta + dt].iter().map(|t| (t.clamp(0.0, PI).cos() - eq).abs()).fold(0.0, f64::max);
        Ok(Self {
            q_chart: (xq, eq),
            q_box: (core / hx, de),
            params,
            cfg,
            src,
            aa,
            sheet: Sheet::of_r(q.r),
            core,
            q_cyl: (rc, z),
            rule: GaussRule::new(cfg.order),
            psi_rule: GaussRule::new(cfg.n_psi),
        })
    }

    fn covers(&self, sheet: Sheet) -> bool {
        match self.cfg.coverage {
            Coverage::Both => true,
            Coverage::Only(s) => s == sheet,
        }
    }

    /// Integrand columns `(∇φ_pt·∇φ_KN, (E_pt × B)_x, (E_pt × B)_y, (E_pt × B)_z)`
    /// for a point-charge gradient `g` and ring data `(∇φ_KN, B)`.
    fn terms(&self, g: [f64; 3], gk: [f64; 3], b: [f64; 3]) -> [f64; 4] {
        let e = match self.cfg.labeling {
            Labeling::RingFirst => dot(gk, g),
            Labeling::PointFirst => dot(g, gk),
        };
        let f = cross(g.map(|c| -c), b);
        [e, f[0], f[1], f[2]]
    }

    /// `∇(χ Q′/ρ)` along the unit vector `n` at distance `ρ`, times `ρ²`.
    fn coulomb_part_r2(&self, rho: f64, n: [f64; 3]) -> [f64; 3] {
        let (inner, outer) = (0.5 * self.core, self.core);
        let chi = quadrature::cutoff(rho, inner, outer);
        let dchi = quadrature::cutoff_derivative(rho, inner, outer);
        let s = self.src.charge * (-chi + rho * dchi);
        n.map(|c| s * c)
    }

    /// Point-charge gradient with the cut-off Coulomb part removed.
    fn regular_gradient(&self, r: f64, theta: f64, phi: f64) -> Result<[f64; 3]> {
        let a = self.params.a;
        let g = fields::grad_phi_pt(r, theta, phi, &self.src, a)?;
        if Sheet::of_r(r) != self.sheet {
            return Ok(g);
        }
        let x = geometry::cartesian(r, theta, phi, a);
        let d = sub(x, self.src.cart);
        let rho = norm(d);
        if rho >= self.core {
            return Ok(g);
        }
        let c = self.coulomb_part_r2(rho, d.map(|v| v / rho));
        Ok(std::array::from_fn(|i| g[i] - c[i] / (rho * rho)))
    }

    /// Ring gradient and magnetic field on the meridian `φ = 0`, as `(ϱ, z)` pairs.
    fn ring_meridian(&self, r: f64, theta: f64) -> Result<((f64, f64), (f64, f64))> {
        let gk = fields::grad_phi_kn(r, theta, 0.0, self.params.q, self.params.a)?;
        let b = fields::magnetic_field(r, theta, 0.0, self.params)?;
        Ok(((gk[0], gk[2]), (b[0], b[2])))
    }

    /// Azimuthal node count: the Coulomb cutoff is resolved near the charge.
    fn phi_count(&self, r: f64, theta: f64) -> usize {
        let base = self.cfg.n_phi;
        if Sheet::of_r(r) != self.sheet {
            return base;
        }
        let (rc, z, _) = geometry::os_to_cyl(r, theta, 0.0, self.params.a);
        if (rc - self.q_cyl.0).hypot(z - self.q_cyl.1) >= self.core {
            return base;
        }
        let need = 24.0 * PI * (rc * self.q_cyl.0).sqrt() / self.core;
        let mut n = base;
        while (n as f64) < need && n < 16384 {
            n *= 2;
        }
        n
    }

    /// Azimuthal integral of the regularized integrand at a meridional point.
    fn meridian_term(&self, xi: f64, eta: f64) -> Result<[f64; 4]> {
        let r = self.aa * xi;
        let theta = eta.clamp(-1.0, 1.0).acos();
        let ((kr, kz), (br, bz)) = self.ring_meridian(r, theta)?;
        let n = self.phi_count(r, theta);
        let mut acc = [KahanSum::default(); 4];
        for k in 0..n {
            let phi = self.src.pos.phi + TAU * k as f64 / n as f64;
            let (s, c) = phi.sin_cos();
            let g = self.regular_gradient(r, theta, phi)?;
            let t = self.terms(g, [kr * c, kr * s, kz], [br * c, br * s, bz]);
            for i in 0..4 {
                acc[i].add(t[i]);
            }
        }
        let w = TAU / n as f64;
        Ok(std::array::from_fn(|i| w * acc[i].value()))
    }

    /// Polar radius in the `(ξ, η)` plane at which the tube of radius `eps`
    /// (units of `|a|`) meets the ray of angle `psi`.
    fn tube_radius(&self, psi: f64, eps: f64, s_max: f64) -> Result<f64> {
        let (sp, cp) = psi.sin_cos();
        let f = |s: f64| Ok(geometry::ring_distance(s * cp, (s * sp).clamp(-1.0, 1.0).acos(), 1.0) - eps);
        let guess = (2.0 * eps).sqrt();
        let lo = 0.5 * guess;
        let hi = (2.0 * guess).min(s_max);
        Ok(crate::root::brent(f, lo, hi, 1e-15 * guess, 0.0)?.x)
    }

    fn ray(&self, psi: f64, weight: f64, out: &mut [[KahanSum; 4]]) -> Result<()> {
        let (sp, cp) = psi.sin_cos();
        let s_sq = 1.0 / cp.abs().max(sp.abs());
        let ladder = &self.cfg.eps_ladder;
        let mut bounds = Vec::with_capacity(ladder.len());
        for &e in ladder {
            bounds.push(self.tube_radius(psi, e, s_sq)?);
        }
        let a3 = self.aa.powi(3);
        let mut segment = |bucket: usize, u0: f64, u1: f64| -> Result<()> {
            for (u, wu) in self.rule.on(u0, u1) {
                let s = u.exp();
                let xi = s * cp;
                if !self.covers(Sheet::of_r(xi)) {
                    continue;
                }
                let t = self.meridian_term(xi, s * sp)?;
                let w = weight * wu * a3 * s.powi(4);
                for i in 0..4 {
                    out[bucket][i].add(w * t[i]);
                }
            }
            Ok(())
        };
        let (u_in, u_out) = (bounds[0].ln(), s_sq.ln());
        let panels = 3;
        let mut breaks: Vec<f64> = (0..=panels).map(|p| u_in + (u_out - u_in) * p as f64 / panels as f64).collect();
        let (sq, ds) = (self.q_chart.0.hypot(self.q_chart.1), self.q_box.0.hypot(self.q_box.1));
        breaks.extend([sq - ds, sq, sq + ds].iter().filter(|v| **v > 0.0).map(|v| v.ln()));
        for w in refine_breaks(breaks, u_in, u_out).windows(2) {
            segment(0, w[0], w[1])?;
        }
        for j in 1..bounds.len() {
            segment(j, bounds[j].ln(), bounds[j - 1].ln())?;
        }
        Ok(())
    }

    fn tail(&self, side: f64, v0: f64, v1: f64, out: &mut [[KahanSum; 4]]) -> Result<()> {
        if !self.covers(Sheet::of_r(side)) {
            return Ok(());
        }
        let a3 = self.aa.powi(3);
        let (eq, de) = (self.q_chart.1, self.q_box.1);
        let eta_breaks = refine_breaks(vec![-1.0, -0.5, 0.0, 0.5, 1.0, eq - de, eq, eq + de], -1.0, 1.0);
        let eta_nodes = self.rule.composite(&eta_breaks);
        for (v, wv) in self.rule.on(v0, v1) {
            let ev = v.exp();
            let xi = side * ev;
            for &(eta, we) in &eta_nodes {
                let t = self.meridian_term(xi, eta)?;
                let w = wv * we * ev * a3 * (xi * xi + eta * eta);
                for i in 0..4 {
                    out[0][i].add(w * t[i]);
                }
            }
        }
        Ok(())
    }

    /// Ring data at the Euclidean point `x` on the charge's sheet.
    fn ring_at(&self, x: [f64; 3]) -> Result<(Bl, [f64; 3], [f64; 3])> {
        let bl = geometry::from_cartesian(x, self.sheet, self.params.a)?;
        let gk = fields::grad_phi_kn(bl.r, bl.theta, bl.phi, self.params.q, self.params.a)?;
        let b = fields::magnetic_field(bl.r, bl.theta, bl.phi, self.params)?;
        Ok((bl, gk, b))
    }

    /// Spherical quadrature around the charge of `f(ρ, n, x)·ρ²`.
    fn sphere(
        &self,
        rho0: f64,
        rho1: f64,
        mut f: impl FnMut(f64, [f64; 3], [f64; 3]) -> Result<[f64; 4]>,
    ) -> Result<[f64; 4]> {
        let n_phi = self.cfg.n_phi;
        let mut acc = [KahanSum::default(); 4];
        for (rho, wr) in self.rule.on(rho0, rho1) {
            for (ct, wt) in self.rule.on(-1.0, 1.0) {
                let st = (1.0 - ct * ct).max(0.0).sqrt();
                for k in 0..n_phi {
                    let az = TAU * (k as f64 + 0.5) / n_phi as f64;
                    let n = [st * az.cos(), st * az.sin(), ct];
                    let x = std::array::from_fn(|i| self.src.cart[i] + rho * n[i]);
                    let t = f(rho, n, x)?;
                    let w = wr * wt * TAU / n_phi as f64;
                    for i in 0..4 {
                        acc[i].add(w * t[i]);
                    }
                }
            }
        }
        Ok(std::array::from_fn(|i| acc[i].value()))
    }

    fn shell(&self, rho0: f64, rho1: f64) -> Result<[f64; 4]> {
        self.sphere(rho0, rho1, |rho, n, x| {
            let (_, gk, b) = self.ring_at(x)?;
            Ok(self.terms(self.coulomb_part_r2(rho, n), gk, b))
        })
    }

    fn ball(&self, eps: f64) -> Result<[f64; 4]> {
        self.sphere(0.0, eps, |rho, _, x| {
            let (bl, gk, b) = self.ring_at(x)?;
            let g = self.regular_gradient(bl.r, bl.theta, bl.phi)?;
            Ok(self.terms(g.map(|c| c * rho * rho), gk, b))
        })
    }

    fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        let (xq, eq) = self.q_chart;
        let (dx, de) = self.q_box;
        let sq = xq.hypot(eq);
        let psi_q = eq.atan2(xq);
        let dpsi = dx.hypot(de) / sq;
        for quarter in 0..4 {
            let c = quarter as f64 * FRAC_PI_2;
            let (lo, hi) = (c - FRAC_PI_4, c + FRAC_PI_4);
            let mut extra = vec![lo, hi];
            for k in -1..=1 {
                let p = psi_q + k as f64 * TAU;
                extra.extend([p - dpsi, p, p + dpsi]);
            }
            for w in refine_breaks(extra, lo, hi).windows(2) {
                for (psi, wt) in self.psi_rule.on(w[0], w[1]) {
                    cells.push(Cell::Ray { psi, weight: wt });
                }
            }
        }
        let v_end = 40.0 + (1.0 + xq.abs()).ln();
        let mut breaks = vec![0.0];
        while *breaks.last().unwrap() < v_end {
            let v = *breaks.last().unwrap();
            breaks.push(v + if v < 10.0 { 1.0 } else { 3.0 });
        }
        let v_end = *breaks.last().unwrap();
        for side in [1.0, -1.0] {
            let mut b = breaks.clone();
            if side * xq > 0.0 {
                b.extend([xq.abs() - dx, xq.abs(), xq.abs() + dx].iter().filter(|v| **v > 1.0).map(|v| v.ln()));
            }
            for w in refine_breaks(b, 0.0, v_end).windows(2) {
                cells.push(Cell::Tail { side, v0: w[0], v1: w[1] });
            }
        }
        if self.covers(self.sheet) {
            let eps: Vec<f64> = self.cfg.eps_ladder.iter().map(|e| e * self.aa).collect();
            cells.push(Cell::Shell { bucket: 0, rho0: eps[0], rho1: self.core });
            for j in 1..eps.len() {
                cells.push(Cell::Shell { bucket: j, rho0: eps[j], rho1: eps[j - 1] });
            }
            for index in 0..eps.len() {
                cells.push(Cell::Ball { index });
            }
        }
        cells
    }

    /// Contributions per bucket: `(main, ball)`.
    fn run(&self, cell: &Cell) -> Result<(Buckets, Buckets)> {
        let l = self.cfg.eps_ladder.len();
        let mut main = vec![[KahanSum::default(); 4]; l];
        let mut ball = vec![[0.0; 4]; l];
        match *cell {
            Cell::Ray { psi, weight } => self.ray(psi, weight, &mut main)?,
            Cell::Tail { side, v0, v1 } => self.tail(side, v0, v1, &mut main)?,
            Cell::Shell { bucket, rho0, rho1 } => {
                let t = self.shell(rho0, rho1)?;
                for i in 0..4 {
                    main[bucket][i].add(t[i]);
                }
            }
            Cell::Ball { index } => ball[index] = self.ball(self.cfg.eps_ladder[index] * self.aa)?,
        }
        Ok((main.iter().map(|b| std::array::from_fn(|i| b[i].value())).collect(), ball))
    }

    /// Excised integrals `∫_{N_ε}` for each ladder value, before the `1/4π`.
    fn integrate(&self) -> Result<Vec<[f64; 4]>> {
        let cells = self.cells();
        #[cfg(feature = "parallel")]
        let outs: Vec<_> = {
            use rayon::prelude::*;
            cells.par_iter().map(|c| self.run(c)).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let outs: Vec<_> = cells.iter().map(|c| self.run(c)).collect();

        let l = self.cfg.eps_ladder.len();
        let mut main = vec![[KahanSum::default(); 4]; l];
        let mut ball = vec![[KahanSum::default(); 4]; l];
        for o in outs {
            let (m, b) = o?;
            for j in 0..l {
                for i in 0..4 {
                    main[j][i].add(m[j][i]);
                    ball[j][i].add(b[j][i]);
                }
            }
        }
        let mut total = Vec::with_capacity(l);
        let mut run = [KahanSum::default(); 4];
        for j in 0..l {
            let mut v = [0.0; 4];
            for i in 0..4 {
                run[i].add(main[j][i].value());
                v[i] = run[i].value() - ball[j][i].value();
            }
            total.push(v);
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams { a: 1.0, m: 1.0, q: 0.7, q_prime: 1.3, current: 0.7 / PI }
    }

    #[test]
    fn default_config_is_valid() {
        let c = QuadratureConfig::default();
        c.validate().unwrap();
        assert_eq!(c.eps_ladder.len(), 11);
        assert!((c.eps_ladder[10] - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn ladder_validation() {
        let mut c = QuadratureConfig { eps_ladder: vec![0.1, 0.1, 0.01], ..QuadratureConfig::default() };
        assert!(c.validate().is_err());
        c.eps_ladder = vec![0.5, 0.1, 0.01];
        assert!(c.validate().is_err());
    }

    #[test]
    fn tube_boundary_is_exact() {
        let p = params();
        let cfg = QuadratureConfig::default();
        let prob = Problem::new(Bl::new(2.0, 0.0, 0.0), &p, &cfg).unwrap();
        for psi in [0.0, 0.4, 1.7, -2.5] {
            let s = prob.tube_radius(psi, 1e-2, 1.0).unwrap();
            let d = geometry::ring_distance(s * psi.cos(), (s * psi.sin()).acos(), 1.0);
            assert!((d - 1e-2).abs() < 1e-14);
        }
    }

    #[test]
    fn growing_ladder_steps_diverge() {
        let vals = [1.0f64, 1.1, 1.15, 1.5];
        let d: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        assert!(matches!(check_ladder("P0", &vals, &d, 1.0), Err(ZgknError::QuadratureDivergence(_))));
        let ok = [1.0f64, 1.1, 1.15, 1.17];
        let d: Vec<f64> = ok.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        check_ladder("P0", &ok, &d, 1.0).unwrap();
        let bad = [1.0, f64::NAN, 1.0];
        assert!(check_ladder("P0", &bad, &[0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn overlapping_excisions_are_rejected() {
        let p = params();
        let cfg = QuadratureConfig::default();
        let near = Bl::new(0.05, FRAC_PI_2 - 0.05, 0.0);
        assert!(matches!(interaction(near, &p, &cfg), Err(ZgknError::InvalidParams(_))));
    }
}
