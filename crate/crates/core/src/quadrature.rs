//! Sphere quadrature for the emission integrals and the spontaneous-emission dipole patterns.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Angular distribution `W(θ, φ)` of spontaneously emitted photons, normalised over the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DipolePattern {
    #[default]
    Isotropic,
    /// `(3/8π) sin²θ`: a dipole oscillating along `z`, normal to the trap plane.
    DipoleZ,
}

impl DipolePattern {
    pub fn density(self, theta: f64, _phi: f64) -> f64 {
        match self {
            DipolePattern::Isotropic => 1.0 / (4.0 * PI),
            DipolePattern::DipoleZ => {
                let s = theta.sin();
                3.0 / (8.0 * PI) * s * s
            }
        }
    }

    /// `W` at a quadrature node, using its stored `sinθ`.
    pub fn density_at(self, node: &SphereNode) -> f64 {
        match self {
            DipolePattern::Isotropic => 1.0 / (4.0 * PI),
            DipolePattern::DipoleZ => 3.0 / (8.0 * PI) * node.sin_theta * node.sin_theta,
        }
    }

    /// Density of the direction cosine `u` on an axis in the plane normal to `z`, over `[-1, 1]`.
    pub fn axis_density(self, u: f64) -> f64 {
        match self {
            // Archimedes: every axis projection of a uniform direction is uniform.
            DipolePattern::Isotropic => 0.5,
            DipolePattern::DipoleZ => 0.375 * (1.0 + u * u),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DipolePattern::Isotropic => "isotropic",
            DipolePattern::DipoleZ => "dipole_z",
        }
    }
}

impl fmt::Display for DipolePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DipolePattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "isotropic" => Ok(DipolePattern::Isotropic),
            "dipole_z" => Ok(DipolePattern::DipoleZ),
            other => Err(Error::UnknownPattern(other.to_string())),
        }
    }
}

/// `W(θ, φ)` for a pattern given by name.
pub fn dipole_pattern(tag: &str, theta: f64, phi: f64) -> Result<f64> {
    Ok(tag.parse::<DipolePattern>()?.density(theta, phi))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending, mirrored exactly about zero.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        // Tricomi initial guess for the i-th largest root, then Newton.
        let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(order, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(order, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[order - 1 - i] = x;
        weights[order - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if order == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=order {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = order as f64;
    (p1, n * (x * p1 - p0) / (x * x - 1.0))
}

/// One point of the sphere grid. `weight` already carries the `dΩ = d(cosθ) dφ` measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereNode {
    pub cos_theta: f64,
    pub sin_theta: f64,
    pub phi: f64,
    pub cos_phi: f64,
    pub sin_phi: f64,
    pub weight: f64,
}

impl SphereNode {
    pub fn theta(&self) -> f64 {
        self.cos_theta.acos()
    }

    /// Direction cosines of the emitted photon on the trap axes x and y.
    pub fn projections(&self) -> (f64, f64) {
        (self.sin_theta * self.cos_phi, self.sin_theta * self.sin_phi)
    }
}

/// `(cos, sin)` of `2πj/n`. When `4 | n` the angle is reduced to the first octant in integer
/// arithmetic, so grid points related by the axis reflections get bit-identical magnitudes.
fn grid_trig(j: usize, n: usize) -> (f64, f64) {
    let step = 2.0 * PI / n as f64;
    if n % 4 != 0 {
        let a = j as f64 * step;
        return (a.cos(), a.sin());
    }
    let q = n / 4;
    let (quadrant, r) = ((j % n) / q, (j % n) % q);
    let (c, s) = if 2 * r <= q {
        let a = r as f64 * step;
        (a.cos(), a.sin())
    } else {
        let a = (q - r) as f64 * step;
        (a.sin(), a.cos())
    };
    match quadrant {
        0 => (c, s),
        1 => (-s, c),
        2 => (-c, -s),
        _ => (s, -c),
    }
}

/// Gauss–Legendre in `cosθ` times the periodic trapezoid rule in `φ`.
#[derive(Debug, Clone)]
pub struct AngularQuadrature {
    pub quad_theta: usize,
    pub quad_phi: usize,
    pub nodes: Vec<SphereNode>,
}

impl AngularQuadrature {
    pub fn new(quad_theta: usize, quad_phi: usize) -> Result<Self> {
        if quad_theta < 4 || quad_phi < 4 {
            return Err(Error::Domain(format!(
                "quadrature orders must be at least 4, got ({quad_theta}, {quad_phi})"
            )));
        }
        let (xs, ws) = gauss_legendre(quad_theta);
        let dphi = 2.0 * PI / quad_phi as f64;
        let mut nodes = Vec::with_capacity(quad_theta * quad_phi);
        let trig: Vec<(f64, f64)> = (0..quad_phi).map(|j| grid_trig(j, quad_phi)).collect();
        for (&c, &w) in xs.iter().zip(&ws) {
            let s = (1.0 - c * c).sqrt();
            for (j, &(cos_phi, sin_phi)) in trig.iter().enumerate() {
                nodes.push(SphereNode {
                    cos_theta: c,
                    sin_theta: s,
                    phi: j as f64 * dphi,
                    cos_phi,
                    sin_phi,
                    weight: w * dphi,
                });
            }
        }
        Ok(AngularQuadrature {
            quad_theta,
            quad_phi,
            nodes,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }

    /// `∫ f dΩ` over the sphere.
    pub fn integrate(&self, f: impl Fn(&SphereNode) -> f64) -> f64 {
        self.nodes.iter().map(|n| n.weight * f(n)).sum()
    }
}

/// Gauss–Legendre rule over the direction cosine `u` on one in-plane axis, weighted by the
/// pattern's marginal density. Exact replacement of the sphere grid for integrands that depend on
/// the direction through `u` alone.
pub fn axis_quadrature(order: usize, pattern: DipolePattern) -> Result<Vec<(f64, f64)>> {
    if order < 4 {
        return Err(Error::Domain(format!(
            "quadrature order must be at least 4, got {order}"
        )));
    }
    let (xs, ws) = gauss_legendre(order);
    Ok(xs
        .into_iter()
        .zip(ws)
        .map(|(u, w)| (u, w * pattern.axis_density(u)))
        .collect())
}

/// Node/weight set for a pair of orders.
pub fn angular_quadrature(quad_theta: usize, quad_phi: usize) -> Result<AngularQuadrature> {
    AngularQuadrature::new(quad_theta, quad_phi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_to_degree_2n_minus_1() {
        for order in [4usize, 5, 16, 32] {
            let (x, w) = gauss_legendre(order);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            for deg in 0..(2 * order) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!((q - exact).abs() < 1e-13, "order {order} degree {deg}");
            }
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn sphere_weights_sum_to_four_pi() {
        let q = angular_quadrature(4, 8).unwrap();
        assert_eq!(q.len(), 32);
        assert!((q.total_weight() - 4.0 * PI).abs() < 1e-12);
        let q = angular_quadrature(32, 64).unwrap();
        assert!((q.total_weight() - 4.0 * PI).abs() < 1e-12);
        assert!(angular_quadrature(3, 8).is_err());
    }

    #[test]
    fn degree_five_in_cos_theta_is_exact_at_order_four() {
        let q = angular_quadrature(4, 8).unwrap();
        let got = q.integrate(|n| {
            let c = n.cos_theta;
            3.0 * c.powi(5) - c.powi(4) + 2.0 * c * c + 1.0
        });
        // 2π ∫ (3c^5 - c^4 + 2c^2 + 1) dc over [-1, 1]
        let exact = 2.0 * PI * (-2.0 / 5.0 + 4.0 / 3.0 + 2.0);
        assert!((got - exact).abs() < 1e-12);
    }

    #[test]
    fn patterns_are_normalised() {
        assert!((dipole_pattern("isotropic", 0.3, 1.0).unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-16);
        let peak = dipole_pattern("dipole_z", PI / 2.0, 0.0).unwrap();
        assert!((peak - 3.0 / (8.0 * PI)).abs() < 1e-16);
        assert!(matches!(
            dipole_pattern("quadrupole", 0.0, 0.0),
            Err(Error::UnknownPattern(_))
        ));
        let q = angular_quadrature(16, 16).unwrap();
        for p in [DipolePattern::Isotropic, DipolePattern::DipoleZ] {
            let total = q.integrate(|n| p.density(n.theta(), n.phi));
            assert!((total - 1.0).abs() < 1e-10, "{p}");
        }
    }

    #[test]
    fn axis_rule_matches_sphere_grid() {
        let sphere = AngularQuadrature::new(48, 96).unwrap();
        for pattern in [DipolePattern::Isotropic, DipolePattern::DipoleZ] {
            let axis = axis_quadrature(48, pattern).unwrap();
            for k in [0, 2, 4, 10] {
                let f = |u: f64| (-(3.0 * u).powi(2)).exp() * u.powi(k);
                let a: f64 = axis.iter().map(|&(u, w)| w * f(u)).sum();
                let b = sphere.integrate(|n| pattern.density_at(n) * f(n.projections().0));
                assert!((a - b).abs() < 1e-12 * b.abs().max(1e-3), "{pattern} {k}: {a} {b}");
            }
        }
    }
}
