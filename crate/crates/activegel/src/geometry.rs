//! Boundary representation and the boundary-fitted coordinate transform.
//!
//! Shapes are stored as a cosine spectrum about a base radius (the model
//! is symmetric with respect to the x-axis, so sine modes never occur)
//! plus the x-offset of the moving frame.  The transform maps the fixed
//! reference disk onto the physical domain while keeping the image of a
//! radial segment normal to the boundary near `r = R`; the normal
//! derivative of any transported field is then plainly `d/dr` at the
//! boundary, which is what the myosin Neumann condition needs.

use serde::{Deserialize, Serialize};

use crate::grid::{AngularGrid, RadialGrid};
use crate::{Error, Result};

/// Physical constants of the model (bulk viscosity and contractility are
/// scaled to one).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Effective adhesion drag coefficient (> 0).
    pub zeta: f64,
    /// Surface tension coefficient (> 0).
    pub gamma: f64,
    /// Homeostatic pressure constant.
    pub p_h: f64,
    /// Area stiffness of the effective traction (>= 0).
    pub k_e: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0) {
            return Err(Error::Parameter(format!("zeta must be > 0, got {}", self.zeta)));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::Parameter(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.k_e >= 0.0) {
            return Err(Error::Parameter(format!("k_e must be >= 0, got {}", self.k_e)));
        }
        Ok(())
    }

    /// Effective pressure `p_h - k_e |Omega|`.
    pub fn p_eff(&self, area: f64) -> f64 {
        self.p_h - self.k_e * area
    }

    /// `d p_eff / d|Omega| = -k_e`.
    pub fn p_eff_prime(&self) -> f64 {
        -self.k_e
    }

    /// Steady myosin density of the disk of radius `r`:
    /// `Lambda(r) = p_eff(pi r^2) - gamma / r`.
    pub fn steady_density(&self, r: f64) -> f64 {
        self.p_eff(std::f64::consts::PI * r * r) - self.gamma / r
    }
}

/// Effective pressure at the given area.
pub fn effective_pressure(area: f64, params: &ModelParams) -> f64 {
    params.p_eff(area)
}

/// Even-symmetric boundary `r = R + rho(phi)` with frame offset `X_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryShape {
    pub base_radius: f64,
    /// `rho(phi) = c[0] + sum_j c[j] cos(j phi)`.
    pub cosine_coefficients: Vec<f64>,
    pub center_x: f64,
}

#[derive(Serialize, Deserialize)]
struct ShapeJson {
    #[serde(rename = "R")]
    r: f64,
    rho_cos: Vec<f64>,
    #[serde(rename = "Xc")]
    xc: f64,
}

impl BoundaryShape {
    pub fn new(base_radius: f64, cosine_coefficients: Vec<f64>, center_x: f64) -> Result<Self> {
        if !(base_radius > 0.0) {
            return Err(Error::Domain(format!(
                "base radius must be positive, got {base_radius}"
            )));
        }
        Ok(Self { base_radius, cosine_coefficients, center_x })
    }

    pub fn circle(radius: f64) -> Self {
        Self { base_radius: radius, cosine_coefficients: Vec::new(), center_x: 0.0 }
    }

    /// Builds a shape from sampled boundary values, rejecting sine content
    /// above round-off.
    pub fn from_values(base_radius: f64, ang: &AngularGrid, values: &[f64]) -> Result<Self> {
        let asym = ang.asymmetry(values);
        let scale = values.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1.0);
        if asym > 1e-10 * scale {
            return Err(Error::Domain(format!(
                "boundary data has sine (asymmetric) content {asym:.3e}"
            )));
        }
        Self::new(base_radius, ang.cos_coeffs(values), 0.0)
    }

    pub fn rho_at(&self, phi: f64) -> f64 {
        self.cosine_coefficients
            .iter()
            .enumerate()
            .map(|(j, c)| c * (j as f64 * phi).cos())
            .sum()
    }

    pub fn rho_deriv_at(&self, phi: f64) -> f64 {
        self.cosine_coefficients
            .iter()
            .enumerate()
            .map(|(j, c)| -c * j as f64 * (j as f64 * phi).sin())
            .sum()
    }

    pub fn rho_deriv2_at(&self, phi: f64) -> f64 {
        self.cosine_coefficients
            .iter()
            .enumerate()
            .map(|(j, c)| -c * (j * j) as f64 * (j as f64 * phi).cos())
            .sum()
    }

    pub fn radius_at(&self, phi: f64) -> f64 {
        self.base_radius + self.rho_at(phi)
    }

    pub fn rho_values(&self, ang: &AngularGrid) -> Vec<f64> {
        ang.nodes().iter().map(|&p| self.rho_at(p)).collect()
    }

    /// Max |rho| over a fine sample.
    pub fn rho_sup(&self) -> f64 {
        (0..512)
            .map(|k| self.rho_at(2.0 * std::f64::consts::PI * k as f64 / 512.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn validate_nondegenerate(&self) -> Result<()> {
        let mut min = f64::INFINITY;
        let mut at = 0.0;
        for k in 0..1024 {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / 1024.0;
            let r = self.radius_at(phi);
            if r < min {
                min = r;
                at = phi;
            }
        }
        if min <= 0.0 {
            return Err(Error::DegenerateDomain { min, phi: at });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ShapeJson {
            r: self.base_radius,
            rho_cos: self.cosine_coefficients.clone(),
            xc: self.center_x,
        })
        .expect("shape serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ShapeJson = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("shape JSON: {e}")))?;
        Self::new(raw.r, raw.rho_cos, raw.xc)
    }
}

/// Removes the `cos phi` component of `rho`, absorbing it into the frame
/// offset; first-order elimination of infinitesimal shifts.
pub fn recenter(shape: &BoundaryShape) -> BoundaryShape {
    let mut out = shape.clone();
    if out.cosine_coefficients.len() > 1 {
        out.center_x += out.cosine_coefficients[1];
        out.cosine_coefficients[1] = 0.0;
    }
    out
}

/// Domain area `int (R + rho)^2 / 2 dphi`, exact for the stored spectrum.
pub fn area(shape: &BoundaryShape) -> f64 {
    let r0 = shape.base_radius
        + shape.cosine_coefficients.first().copied().unwrap_or(0.0);
    let tail: f64 = shape
        .cosine_coefficients
        .iter()
        .skip(1)
        .map(|c| c * c)
        .sum();
    std::f64::consts::PI * (r0 * r0 + 0.5 * tail)
}

/// Curvature profile of the boundary on the angular grid.
pub fn curvature(shape: &BoundaryShape, ang: &AngularGrid) -> Result<Vec<f64>> {
    shape.validate_nondegenerate()?;
    Ok(ang
        .nodes()
        .iter()
        .map(|&phi| curvature_at(shape, phi))
        .collect())
}

pub fn curvature_at(shape: &BoundaryShape, phi: f64) -> f64 {
    let q = shape.radius_at(phi);
    let qp = shape.rho_deriv_at(phi);
    let qpp = shape.rho_deriv2_at(phi);
    (q * q + 2.0 * qp * qp - qpp * q) / (q * q + qp * qp).powf(1.5)
}

/// Linearization of the curvature at `shape` in the direction of a bump
/// with values `drho`, `drho'`, `drho''` at `phi`.
pub fn curvature_linearized_at(
    shape: &BoundaryShape,
    phi: f64,
    drho: f64,
    drho_p: f64,
    drho_pp: f64,
) -> f64 {
    let q = shape.radius_at(phi);
    let qp = shape.rho_deriv_at(phi);
    let qpp = shape.rho_deriv2_at(phi);
    let num = q * q + 2.0 * qp * qp - qpp * q;
    let den = q * q + qp * qp;
    let dnum = 2.0 * q * drho + 4.0 * qp * drho_p - q * drho_pp - qpp * drho;
    let dden_half = q * drho + qp * drho_p;
    dnum / den.powf(1.5) - 3.0 * num * dden_half / den.powf(2.5)
}

/// Quintic smoothstep cutoff: 0 below `R/2`, 1 above `2R/3`, C^2 joins.
pub fn cutoff_chi(r: f64, base_radius: f64) -> f64 {
    let lo = 0.5 * base_radius;
    let hi = 2.0 * base_radius / 3.0;
    if r <= lo {
        0.0
    } else if r >= hi {
        1.0
    } else {
        let t = (r - lo) / (hi - lo);
        t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    }
}

pub fn cutoff_chi_prime(r: f64, base_radius: f64) -> f64 {
    let lo = 0.5 * base_radius;
    let hi = 2.0 * base_radius / 3.0;
    if r <= lo || r >= hi {
        0.0
    } else {
        let t = (r - lo) / (hi - lo);
        30.0 * t * t * (1.0 - t) * (1.0 - t) / (hi - lo)
    }
}

/// Per-angle state of the transform: `rho` and its two derivatives.
#[derive(Debug, Clone, Copy)]
pub struct AngleState {
    pub rho: f64,
    pub rho_p: f64,
    pub rho_pp: f64,
}

/// Transform ingredients at one `(r, phi)` point.
#[derive(Debug, Clone, Copy)]
pub struct MapTerms {
    pub eta: f64,
    pub sigma: f64,
    pub eta_r: f64,
    pub sigma_r: f64,
    pub eta_phi: f64,
    pub sigma_phi: f64,
}

/// The boundary-fitted transform for one shape and amplitude.
#[derive(Debug, Clone)]
pub struct BoundaryMapper {
    pub shape: BoundaryShape,
    pub eps: f64,
}

impl BoundaryMapper {
    pub fn new(shape: &BoundaryShape, eps: f64) -> Result<Self> {
        let scaled = BoundaryShape {
            base_radius: shape.base_radius,
            cosine_coefficients: shape
                .cosine_coefficients
                .iter()
                .map(|c| c * eps)
                .collect(),
            center_x: shape.center_x,
        };
        scaled.validate_nondegenerate()?;
        Ok(Self { shape: shape.clone(), eps })
    }

    pub fn angle_state(&self, phi: f64) -> AngleState {
        AngleState {
            rho: self.shape.rho_at(phi),
            rho_p: self.shape.rho_deriv_at(phi),
            rho_pp: self.shape.rho_deriv2_at(phi),
        }
    }

    /// `eta`, `sigma` and their partials at `(r, phi)`.  All
    /// phi-dependence passes through `(rho, rho')`, so the angular
    /// partials follow by the chain rule.
    pub fn terms(&self, r: f64, st: &AngleState) -> MapTerms {
        let big_r = self.shape.base_radius;
        let eps = self.eps;
        let chi = cutoff_chi(r, big_r);
        let chi_p = cutoff_chi_prime(r, big_r);
        let a = big_r + eps * st.rho;
        let s = (eps * eps * st.rho_p * st.rho_p + a * a).sqrt();
        let d = (a + s) * s;

        let w = eps * st.rho_p * st.rho_p / d;
        let eta = w * (big_r - r) * chi + st.rho * chi;
        let sigma = (big_r - r) * st.rho_p / s * chi;

        let eta_r = -w * chi + (w * (big_r - r) + st.rho) * chi_p;
        let sigma_r = -st.rho_p / s * chi + (big_r - r) * st.rho_p / s * chi_p;

        let ds_drho = a * eps / s;
        let ds_drhop = eps * eps * st.rho_p / s;
        let dd_drho = eps * (a + s) * (a + s) / s;
        let dd_drhop = ds_drhop * (a + 2.0 * s);
        let dw_drho = -eps * st.rho_p * st.rho_p * dd_drho / (d * d);
        let dw_drhop = eps * (2.0 * st.rho_p * d - st.rho_p * st.rho_p * dd_drhop) / (d * d);

        let eta_phi = (dw_drho * st.rho_p + dw_drhop * st.rho_pp) * (big_r - r) * chi
            + st.rho_p * chi;
        let dsig_drho = -(big_r - r) * st.rho_p * ds_drho / (s * s) * chi;
        let dsig_drhop = (big_r - r) * (1.0 / s - st.rho_p * ds_drhop / (s * s)) * chi;
        let sigma_phi = dsig_drho * st.rho_p + dsig_drhop * st.rho_pp;

        MapTerms { eta, sigma, eta_r, sigma_r, eta_phi, sigma_phi }
    }

    /// Physical image of the reference point `(r, phi)` (the frame offset
    /// `X_c` is bookkeeping, not geometry, and is not applied here).
    pub fn point(&self, r: f64, phi: f64) -> (f64, f64) {
        let st = self.angle_state(phi);
        let t = self.terms(r, &st);
        let (c, s) = (phi.cos(), phi.sin());
        (
            (r + self.eps * t.eta) * c - self.eps * t.sigma * s,
            (r + self.eps * t.eta) * s + self.eps * t.sigma * c,
        )
    }

    /// Columns of the Jacobian matrix: `dT/dr` and `dT/dphi`.
    pub fn tangents_from_terms(
        &self,
        r: f64,
        phi: f64,
        t: &MapTerms,
    ) -> ((f64, f64), (f64, f64)) {
        let eps = self.eps;
        let (c, s) = (phi.cos(), phi.sin());
        let t_r = (
            (1.0 + eps * t.eta_r) * c - eps * t.sigma_r * s,
            (1.0 + eps * t.eta_r) * s + eps * t.sigma_r * c,
        );
        let t_phi = (
            eps * (t.eta_phi - t.sigma) * c - (r + eps * t.eta + eps * t.sigma_phi) * s,
            eps * (t.eta_phi - t.sigma) * s + (r + eps * t.eta + eps * t.sigma_phi) * c,
        );
        (t_r, t_phi)
    }

    /// Jacobian determinant; reduces to `r` for the identity map.
    pub fn jacobian(&self, r: f64, phi: f64) -> f64 {
        let st = self.angle_state(phi);
        let t = self.terms(r, &st);
        jacobian_from_terms(r, self.eps, &t)
    }

    /// Outward unit normal of the physical boundary at angle `phi`.
    pub fn boundary_normal(&self, phi: f64) -> (f64, f64) {
        let st = self.angle_state(phi);
        let a = self.shape.base_radius + self.eps * st.rho;
        let sp = self.eps * st.rho_p;
        let s = (sp * sp + a * a).sqrt();
        let (c, sn) = (phi.cos(), phi.sin());
        ((a * c + sp * sn) / s, (a * sn - sp * c) / s)
    }

    /// Arc-length factor `|dX/dphi|` of the physical boundary.
    pub fn boundary_arc_factor(&self, phi: f64) -> f64 {
        let st = self.angle_state(phi);
        let a = self.shape.base_radius + self.eps * st.rho;
        let sp = self.eps * st.rho_p;
        (sp * sp + a * a).sqrt()
    }
}

pub fn jacobian_from_terms(r: f64, eps: f64, t: &MapTerms) -> f64 {
    (1.0 + eps * t.eta_r) * (r + eps * t.eta)
        + eps * t.sigma_phi * (1.0 + eps * t.eta_r)
        + eps * eps * t.sigma * t.sigma_r
        - eps * eps * t.sigma_r * t.eta_phi
}

/// Image of `(r, phi)` under the transform.
pub fn boundary_map(
    shape: &BoundaryShape,
    eps: f64,
    r: f64,
    phi: f64,
) -> Result<(f64, f64)> {
    Ok(BoundaryMapper::new(shape, eps)?.point(r, phi))
}

/// Jacobian determinant of the transform at `(r, phi)`.
pub fn map_jacobian(shape: &BoundaryShape, eps: f64, r: f64, phi: f64) -> Result<f64> {
    Ok(BoundaryMapper::new(shape, eps)?.jacobian(r, phi))
}

/// Scalar field sampled on the tensor grid of the reference disk,
/// row-major over radius then angle.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarField {
    pub n_r: usize,
    pub n_phi: usize,
    pub values: Vec<f64>,
}

impl PolarField {
    pub fn constant(n_r: usize, n_phi: usize, value: f64) -> Self {
        Self { n_r, n_phi, values: vec![value; n_r * n_phi] }
    }

    pub fn from_fn(
        grid: &RadialGrid,
        ang: &AngularGrid,
        mut f: impl FnMut(f64, f64) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(grid.n * ang.n);
        for &r in grid.centers() {
            for &phi in ang.nodes() {
                values.push(f(r, phi));
            }
        }
        Self { n_r: grid.n, n_phi: ang.n, values }
    }

    pub fn at(&self, ir: usize, iphi: usize) -> f64 {
        self.values[ir * self.n_phi + iphi]
    }

    pub fn at_mut(&mut self, ir: usize, iphi: usize) -> &mut f64 {
        &mut self.values[ir * self.n_phi + iphi]
    }

    pub fn ring(&self, ir: usize) -> &[f64] {
        &self.values[ir * self.n_phi..(ir + 1) * self.n_phi]
    }

    pub fn ring_mut(&mut self, ir: usize) -> &mut [f64] {
        &mut self.values[ir * self.n_phi..(ir + 1) * self.n_phi]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Ratio of the highest retained angular mode to the largest mode,
    /// maximized over rings; a resolution-adequacy diagnostic.
    pub fn angular_tail(&self, ang: &AngularGrid) -> f64 {
        let mut worst = 0.0_f64;
        for ir in 0..self.n_r {
            let coeffs = ang.cos_coeffs(self.ring(ir));
            let peak = coeffs.iter().fold(0.0_f64, |a, c| a.max(c.abs()));
            if peak > 1e-14 {
                worst = worst.max(coeffs.last().unwrap().abs() / peak);
            }
        }
        worst
    }

    /// CSV serialization with header `r,phi,value`.
    pub fn to_csv(&self, grid: &RadialGrid, ang: &AngularGrid) -> String {
        let mut out = String::from("r,phi,value\n");
        for (ir, &r) in grid.centers().iter().enumerate() {
            for (iphi, &phi) in ang.nodes().iter().enumerate() {
                out.push_str(&format!("{r:.12e},{phi:.12e},{:.12e}\n", self.at(ir, iphi)));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn circle_curvature_is_constant() {
        let ang = AngularGrid::new(64).unwrap();
        let shape = BoundaryShape::circle(2.5);
        let k = curvature(&shape, &ang).unwrap();
        let (lo, hi) = k.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
        assert_abs_diff_eq!(lo, 1.0 / 2.5, epsilon = 1e-13);
        assert!(hi - lo < 1e-12);

        let shifted = BoundaryShape::new(2.5, vec![0.3], 0.0).unwrap();
        let k2 = curvature(&shifted, &ang).unwrap();
        for v in k2 {
            assert_abs_diff_eq!(v, 1.0 / 2.8, epsilon = 1e-12);
        }
    }

    #[test]
    fn curvature_matches_parametric_fd_oracle() {
        // rho = 0.1 cos 2phi on R = 1, against a 4th-order finite
        // difference of the parametric curvature on 4096 boundary points.
        let shape = BoundaryShape::new(1.0, vec![0.0, 0.0, 0.1], 0.0).unwrap();
        let n = 4096_usize;
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let xs: Vec<f64> = (0..n)
            .map(|k| shape.radius_at(k as f64 * h) * (k as f64 * h).cos())
            .collect();
        let ys: Vec<f64> = (0..n)
            .map(|k| shape.radius_at(k as f64 * h) * (k as f64 * h).sin())
            .collect();
        let d1 = |v: &[f64], k: usize| {
            let g = |o: isize| v[((k as isize + o).rem_euclid(n as isize)) as usize];
            (-g(2) + 8.0 * g(1) - 8.0 * g(-1) + g(-2)) / (12.0 * h)
        };
        let d2 = |v: &[f64], k: usize| {
            let g = |o: isize| v[((k as isize + o).rem_euclid(n as isize)) as usize];
            (-g(2) + 16.0 * g(1) - 30.0 * g(0) + 16.0 * g(-1) - g(-2)) / (12.0 * h * h)
        };
        for k in (0..n).step_by(37) {
            let (xp, yp) = (d1(&xs, k), d1(&ys, k));
            let (xpp, ypp) = (d2(&xs, k), d2(&ys, k));
            let oracle = (xp * ypp - yp * xpp) / (xp * xp + yp * yp).powf(1.5);
            let ours = curvature_at(&shape, k as f64 * h);
            assert_abs_diff_eq!(ours, oracle, epsilon = 1e-6);
        }
    }

    #[test]
    fn curvature_linearization_matches_fd() {
        let shape = BoundaryShape::new(1.0, vec![0.0, 0.0, 0.06], 0.0).unwrap();
        // bump d rho = cos 3 phi
        let eps = 1e-6;
        for k in 0..8 {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / 8.0;
            let mut plus = shape.clone();
            plus.cosine_coefficients.resize(4, 0.0);
            plus.cosine_coefficients[3] += eps;
            let mut minus = shape.clone();
            minus.cosine_coefficients.resize(4, 0.0);
            minus.cosine_coefficients[3] -= eps;
            let fd = (curvature_at(&plus, phi) - curvature_at(&minus, phi)) / (2.0 * eps);
            let lin = curvature_linearized_at(
                &shape,
                phi,
                (3.0 * phi).cos(),
                -3.0 * (3.0 * phi).sin(),
                -9.0 * (3.0 * phi).cos(),
            );
            assert_abs_diff_eq!(lin, fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn degenerate_domain_rejected() {
        let shape = BoundaryShape::new(1.0, vec![-1.5], 0.0).unwrap();
        let ang = AngularGrid::new(32).unwrap();
        assert!(curvature(&shape, &ang).is_err());
    }

    #[test]
    fn area_closed_forms() {
        assert_abs_diff_eq!(
            area(&BoundaryShape::circle(2.0)),
            std::f64::consts::PI * 4.0,
            epsilon = 1e-14
        );
        let c = 0.4;
        assert_abs_diff_eq!(
            area(&BoundaryShape::new(2.0, vec![c], 0.0).unwrap()),
            std::f64::consts::PI * (2.0 + c) * (2.0 + c),
            epsilon = 1e-13
        );
        let eps = 0.05;
        assert_abs_diff_eq!(
            area(&BoundaryShape::new(1.0, vec![0.0, 0.0, eps], 0.0).unwrap()),
            std::f64::consts::PI * (1.0 + 0.5 * eps * eps),
            epsilon = 1e-14
        );
    }

    #[test]
    fn effective_pressure_and_derivative() {
        let p = ModelParams { zeta: 1.0, gamma: 1.0, p_h: 2.0, k_e: 0.0 };
        assert_eq!(effective_pressure(std::f64::consts::PI, &p), 2.0);
        let p2 = ModelParams { zeta: 1.0, gamma: 1.0, p_h: 0.0, k_e: 1.0 };
        assert_eq!(effective_pressure(3.7, &p2), -3.7);
        // p_eff is affine in the area, so the centered difference is exact
        // for any step; a step of 0.5 keeps the division exact too.
        let h = 0.5;
        let fd = (p2.p_eff(2.0 + h) - p2.p_eff(2.0 - h)) / (2.0 * h);
        assert_abs_diff_eq!(p2.p_eff_prime(), fd, epsilon = 1e-12);
    }

    #[test]
    fn recenter_moves_only_mode_one() {
        let orthogonal = BoundaryShape::new(1.0, vec![0.1, 0.0, 0.05], 0.2).unwrap();
        assert_eq!(recenter(&orthogonal), orthogonal);

        let pure = BoundaryShape::new(1.0, vec![0.0, 0.03], 0.0).unwrap();
        let rc = recenter(&pure);
        assert_eq!(rc.cosine_coefficients[1], 0.0);
        assert_abs_diff_eq!(rc.center_x, 0.03, epsilon = 1e-15);

        let mixed = BoundaryShape::new(1.0, vec![0.1, 0.02, 0.05, 0.01], 0.0).unwrap();
        let rc = recenter(&mixed);
        assert_eq!(rc.cosine_coefficients[1], 0.0);
        assert_eq!(rc.cosine_coefficients[0], 0.1);
        assert_eq!(rc.cosine_coefficients[2], 0.05);
        // the cos(phi) projection vanishes after recentering
        let ang = AngularGrid::new(64).unwrap();
        let vals = rc.rho_values(&ang);
        let proj: f64 = vals
            .iter()
            .zip(ang.nodes())
            .map(|(v, &p)| v * p.cos())
            .sum::<f64>()
            * ang.dphi();
        assert_abs_diff_eq!(proj, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn map_is_identity_for_circle() {
        let shape = BoundaryShape::circle(1.0);
        for &(r, phi) in &[(0.2, 0.3), (0.7, 2.0), (1.0, 4.0)] {
            let (x, y) = boundary_map(&shape, 1.0, r, phi).unwrap();
            assert_abs_diff_eq!(x, r * phi.cos(), epsilon = 1e-14);
            assert_abs_diff_eq!(y, r * phi.sin(), epsilon = 1e-14);
            assert_abs_diff_eq!(map_jacobian(&shape, 1.0, r, phi).unwrap(), r, epsilon = 1e-14);
        }
    }

    #[test]
    fn map_anchors_boundary() {
        let shape = BoundaryShape::new(1.0, vec![0.02, 0.0, 0.05, 0.01], 0.0).unwrap();
        let eps = 0.8;
        for k in 0..16 {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
            let (x, y) = boundary_map(&shape, eps, 1.0, phi).unwrap();
            let q = 1.0 + eps * shape.rho_at(phi);
            assert_abs_diff_eq!(x, q * phi.cos(), epsilon = 1e-13);
            assert_abs_diff_eq!(y, q * phi.sin(), epsilon = 1e-13);
        }
    }

    #[test]
    fn eps_zero_gives_jacobian_r() {
        let shape = BoundaryShape::new(1.0, vec![0.0, 0.0, 0.2], 0.0).unwrap();
        for &(r, phi) in &[(0.3, 0.5), (0.9, 1.1)] {
            assert_abs_diff_eq!(map_jacobian(&shape, 0.0, r, phi).unwrap(), r, epsilon = 1e-14);
        }
    }

    #[test]
    fn jacobian_matches_fd_determinant_and_stays_positive() {
        let shape = BoundaryShape::new(1.0, vec![0.01, 0.0, 0.04, 0.0, 0.02], 0.0).unwrap();
        let mapper = BoundaryMapper::new(&shape, 1.0).unwrap();
        let h = 1e-6;
        for &r in &[0.15, 0.45, 0.62, 0.8, 0.95, 0.999] {
            for k in 0..12 {
                let phi = 2.0 * std::f64::consts::PI * k as f64 / 12.0;
                let xp = mapper.point(r + h, phi);
                let xm = mapper.point(r - h, phi);
                let yp = mapper.point(r, phi + h);
                let ym = mapper.point(r, phi - h);
                let dr = ((xp.0 - xm.0) / (2.0 * h), (xp.1 - xm.1) / (2.0 * h));
                let dp = ((yp.0 - ym.0) / (2.0 * h), (yp.1 - ym.1) / (2.0 * h));
                let det = dr.0 * dp.1 - dp.0 * dr.1;
                let ours = mapper.jacobian(r, phi);
                assert!(ours > 0.0, "nonpositive jacobian at r={r}, phi={phi}");
                assert_abs_diff_eq!(ours, det, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn normal_derivative_is_preserved_at_boundary() {
        // Transported manufactured field: d/dr at r = R must equal the
        // physical normal derivative at the boundary image point.
        let shape = BoundaryShape::new(1.0, vec![0.0, 0.0, 0.05, 0.02], 0.0).unwrap();
        let mapper = BoundaryMapper::new(&shape, 1.0).unwrap();
        let g = |x: f64, y: f64| (0.7 * x).sin() * (0.3 * y).cosh() + 0.2 * x * x * y;
        let grad = |x: f64, y: f64| {
            (
                0.7 * (0.7 * x).cos() * (0.3 * y).cosh() + 0.4 * x * y,
                0.3 * (0.7 * x).sin() * (0.3 * y).sinh() + 0.2 * x * x,
            )
        };
        for k in 0..8 {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / 8.0;
            let h = 1e-5;
            let sample = |r: f64| {
                let (x, y) = mapper.point(r, phi);
                g(x, y)
            };
            let dr = (sample(1.0 + h) - sample(1.0 - h)) / (2.0 * h);
            let (x, y) = mapper.point(1.0, phi);
            let (gx, gy) = grad(x, y);
            let (nx, ny) = mapper.boundary_normal(phi);
            assert_abs_diff_eq!(dr, gx * nx + gy * ny, epsilon = 1e-8);
        }
    }

    #[test]
    fn shape_json_roundtrip() {
        let shape = BoundaryShape::new(1.25, vec![0.0, 0.0, 0.07], 0.3).unwrap();
        let text = shape.to_json();
        assert!(text.contains("\"R\""));
        assert!(text.contains("\"rho_cos\""));
        assert!(text.contains("\"Xc\""));
        let back = BoundaryShape::from_json(&text).unwrap();
        assert_eq!(shape, back);
    }

    #[test]
    fn sine_content_rejected() {
        let ang = AngularGrid::new(32).unwrap();
        let vals: Vec<f64> = ang.nodes().iter().map(|&p| 0.1 * p.sin()).collect();
        assert!(BoundaryShape::from_values(1.0, &ang, &vals).is_err());
        let good: Vec<f64> = ang.nodes().iter().map(|&p| 0.1 * (2.0 * p).cos()).collect();
        let shape = BoundaryShape::from_values(1.0, &ang, &good).unwrap();
        assert_abs_diff_eq!(shape.cosine_coefficients[2], 0.1, epsilon = 1e-13);
    }
}
