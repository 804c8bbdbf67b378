//! Quadrature building blocks: Gauss–Legendre panels, a smooth partition of
//! unity, compensated summation and polynomial extrapolation to zero.

use gauss_quad::legendre::GaussLegendre;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let n = n.max(2);
        let rule = GaussLegendre::new(n).expect("degree >= 2");
        let mut pairs = rule.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { nodes: pairs.iter().map(|p| p.0).collect(), weights: pairs.iter().map(|p| p.1).collect() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (c + h * x, h * w))
    }

    /// Composite rule over consecutive breakpoints.
    pub fn composite(&self, breaks: &[f64]) -> Vec<(f64, f64)> {
        breaks.windows(2).flat_map(|w| self.on(w[0], w[1]).collect::<Vec<_>>()).collect()
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.on(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// C^∞ step: 0 for `t <= 0`, 1 for `t >= 1`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let f = |x: f64| (-1.0 / x).exp();
    f(t) / (f(t) + f(1.0 - t))
}

/// Bump equal to 1 below `inner`, 0 above `outer`, smooth in between.
pub fn cutoff(x: f64, inner: f64, outer: f64) -> f64 {
    1.0 - smooth_step((x - inner) / (outer - inner))
}

/// Derivative of [`smooth_step`].
pub fn smooth_step_derivative(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let f = |x: f64| (-1.0 / x).exp();
    let (a, b) = (f(t), f(1.0 - t));
    (a * b) * (1.0 / (t * t) + 1.0 / ((1.0 - t) * (1.0 - t))) / ((a + b) * (a + b))
}

/// Derivative of [`cutoff`] in `x`.
pub fn cutoff_derivative(x: f64, inner: f64, outer: f64) -> f64 {
    -smooth_step_derivative((x - inner) / (outer - inner)) / (outer - inner)
}

/// Neumaier-compensated sum; order-deterministic.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn kahan_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut k = KahanSum::default();
    for x in xs {
        k.add(x);
    }
    k.value()
}

/// Value at `h = 0` of the interpolating polynomial through `(h_i, y_i)`.
pub fn extrapolate_to_zero(h: &[f64], y: &[f64]) -> f64 {
    assert_eq!(h.len(), y.len());
    let mut p = y.to_vec();
    let n = h.len();
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (h[i + k] * p[i] - h[i] * p[i + 1]) / (h[i + k] - h[i]);
        }
    }
    p[0]
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> =
        x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_derivative_matches_difference() {
        for x in [0.3, 0.55, 0.7, 0.95] {
            let h = 1e-6;
            let fd = (cutoff(x + h, 0.25, 1.0) - cutoff(x - h, 0.25, 1.0)) / (2.0 * h);
            assert!((cutoff_derivative(x, 0.25, 1.0) - fd).abs() < 1e-7, "x={x}");
        }
        assert_eq!(cutoff_derivative(0.1, 0.25, 1.0), 0.0);
    }

    #[test]
    fn gauss_rule_polynomial_exactness() {
        let g = GaussRule::new(5);
        let v = g.integrate(0.0, 2.0, |x| x.powi(9));
        assert!((v - 2f64.powi(10) / 10.0).abs() < 1e-11);
    }

    #[test]
    fn neville_recovers_polynomial_limit() {
        let h = [0.4, 0.2, 0.1];
        let y: Vec<f64> = h.iter().map(|x| 3.0 + 2.0 * x - x * x).collect();
        assert!((extrapolate_to_zero(&h, &y) - 3.0).abs() < 1e-13);
    }

    #[test]
    fn partition_is_smooth_and_bounded() {
        assert_eq!(cutoff(0.1, 0.5, 1.0), 1.0);
        assert_eq!(cutoff(1.1, 0.5, 1.0), 0.0);
        assert!((cutoff(0.75, 0.5, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1e-3f64, 1e-2, 1e-1];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v.sqrt()).collect();
        assert!((loglog_slope(&x, &y) - 0.5).abs() < 1e-12);
    }
}
