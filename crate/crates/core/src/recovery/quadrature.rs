//! Quadrature for the weight `beta0(t) = pi / (2 (cosh(pi t) + 1))` on the
//! real line.

use serde::Serialize;

use crate::error::{Error, Result};

/// Default truncation: the tail mass beyond `|t| = 12` is below `2e-16`.
pub const DEFAULT_T_MAX: f64 = 12.0;
pub const DEFAULT_NODES_PER_PANEL: usize = 32;

pub fn beta0(t: f64) -> f64 {
    std::f64::consts::PI / (2.0 * ((std::f64::consts::PI * t).cosh() + 1.0))
}

/// `int_{-inf}^{t} beta0 = (1 + tanh(pi t / 2)) / 2`.
pub fn beta0_cdf(t: f64) -> f64 {
    0.5 * (1.0 + (std::f64::consts::FRAC_PI_2 * t).tanh())
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Nodes `t_k` and weights `w_k` (including `beta0(t_k)`) so that
/// `sum w_k g(t_k) ~ int beta0(t) g(t) dt`.
#[derive(Clone, Debug, Serialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub t_max: f64,
    pub panel_width: f64,
    pub nodes_per_panel: usize,
}

impl QuadratureRule {
    /// Composite Gauss-Legendre on `[-t_max, t_max]` split into panels of
    /// width `panel_width`.
    pub fn new(t_max: f64, panel_width: f64, nodes_per_panel: usize) -> Result<Self> {
        if !(t_max > 0.0 && panel_width > 0.0 && nodes_per_panel > 0) {
            return Err(Error::InvalidArgument(
                "quadrature needs positive range, panel width and node count".into(),
            ));
        }
        let panels = (2.0 * t_max / panel_width).round().max(1.0) as usize;
        let h = 2.0 * t_max / panels as f64;
        let (x, w) = gauss_legendre(nodes_per_panel);
        let mut nodes = Vec::with_capacity(panels * nodes_per_panel);
        let mut weights = Vec::with_capacity(panels * nodes_per_panel);
        for p in 0..panels {
            let mid = -t_max + (p as f64 + 0.5) * h;
            for (xi, wi) in x.iter().zip(&w) {
                let t = mid + 0.5 * h * xi;
                nodes.push(t);
                weights.push(0.5 * h * wi * beta0(t));
            }
        }
        Ok(Self {
            nodes,
            weights,
            t_max,
            panel_width: h,
            nodes_per_panel,
        })
    }

    /// The same rule with half the node spacing.
    pub fn refined(&self) -> Self {
        Self::new(self.t_max, self.panel_width / 2.0, self.nodes_per_panel)
            .expect("refining a valid rule")
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::new(DEFAULT_T_MAX, 1.0, DEFAULT_NODES_PER_PANEL).expect("valid default rule")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
        let m8: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert_abs_diff_eq!(m8, 2.0 / 9.0, epsilon = 1e-14);
        let (x, _) = gauss_legendre(32);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn beta0_is_a_probability_density() {
        let rule = QuadratureRule::default();
        assert_eq!(rule.len(), 24 * 32);
        assert_abs_diff_eq!(rule.total_weight(), 1.0, epsilon = 1e-10);
        let tail = 2.0 * (1.0 - beta0_cdf(DEFAULT_T_MAX));
        assert!(tail < 2e-16);
    }

    #[test]
    fn rule_matches_cdf_moments() {
        let rule = QuadratureRule::default();
        let fine = rule.refined();
        let g = |t: f64| (0.7 * t).cos();
        let a: f64 = rule.nodes.iter().zip(&rule.weights).map(|(t, w)| w * g(*t)).sum();
        let b: f64 = fine.nodes.iter().zip(&fine.weights).map(|(t, w)| w * g(*t)).sum();
        assert_abs_diff_eq!(a, b, epsilon = 1e-13);
        // int beta0(t) cos(a t) dt = a / sinh(a)
        assert_abs_diff_eq!(a, 0.7 / 0.7f64.sinh(), epsilon = 1e-12);
    }
}
