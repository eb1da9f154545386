//! The bifurcation function `F(R)`, root finding with transversality,
//! and construction of asymptotic traveling-wave solutions to second
//! order in the velocity.
//!
//! Argument convention: the derivative factor in `F(R)` is evaluated at
//! `R sqrt(zeta - Lambda)`.  With that convention `F(R) = psi(1, R)`
//! where `psi` solves the rescaled unit-disk problem exactly, and the
//! root of `F` coincides identically with the root of `phi_1'(R) - 1`.
//! The variant with the bare `sqrt(zeta - Lambda)` argument is exposed
//! behind a flag for diagnostics; the dual-criterion check arbitrates.

use serde::Serialize;

use crate::elliptic::{solve_mode_bvp, BcKind, RadialProfile};
use crate::geometry::{area, BoundaryShape, ModelParams, PolarField};
use crate::grid::{gauss_legendre, AngularGrid, RadialGrid};
use crate::specfun::{bessel_i, bessel_i_prime};
use crate::stability::{phi1_closed_form, phi1_deriv_at_r};
use crate::{Error, Result};

const PI: f64 = std::f64::consts::PI;

/// Which argument the `I_1'` factor of `F(R)` receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselArgConvention {
    /// `I_1'(R kappa)`; the internally consistent form (primary).
    RadiusScaled,
    /// `I_1'(kappa)`; the literal printed form, kept for diagnostics.
    Bare,
}

/// `F(R)` with the average density supplied directly.
pub fn f_of_r_with_lambda(
    r: f64,
    zeta: f64,
    lambda: f64,
    convention: BesselArgConvention,
) -> Result<f64> {
    if zeta <= lambda {
        return Err(Error::Parameter(format!(
            "F(R) needs zeta > Lambda (zeta = {zeta}, Lambda = {lambda})"
        )));
    }
    let kappa = (zeta - lambda).sqrt();
    let arg = match convention {
        BesselArgConvention::RadiusScaled => r * kappa,
        BesselArgConvention::Bare => kappa,
    };
    Ok(zeta * bessel_i(1, r * kappa)? / (kappa.powi(3) * bessel_i_prime(1, arg)?)
        - r * lambda / (kappa * kappa))
}

/// The bifurcation function at radius `R` with `Lambda(R)` from the
/// steady-state relation.
pub fn f_of_r(r: f64, params: &ModelParams) -> Result<f64> {
    f_of_r_with_lambda(
        r,
        params.zeta,
        params.steady_density(r),
        BesselArgConvention::RadiusScaled,
    )
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BifurcationPoint {
    pub r0: f64,
    /// Central-difference slope of `F` at the root.
    pub f_prime: f64,
    /// Set when the transversality slope is suspiciously small.
    pub degenerate_transversality: bool,
}

/// Bracketed root of `F(R)` polished to 1e-10, with the transversality
/// slope from a central difference of step `1e-6 R0`.
pub fn find_bifurcation_radius(
    params: &ModelParams,
    r_lo: f64,
    r_hi: f64,
) -> Result<BifurcationPoint> {
    let f_lo = f_of_r(r_lo, params)?;
    let f_hi = f_of_r(r_hi, params)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoSignChange { func: "F(R)", lo: r_lo, hi: r_hi });
    }
    let (mut lo, mut hi, mut flo) = (r_lo, r_hi, f_lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f_of_r(mid, params)?;
        if fm == 0.0 || hi - lo < 1e-12 * hi.max(1.0) {
            break;
        }
        if flo.signum() == fm.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let r0 = 0.5 * (lo + hi);
    let step = 1e-6 * r0;
    let f_prime = (f_of_r(r0 + step, params)? - f_of_r(r0 - step, params)?) / (2.0 * step);
    let scale = (f_lo.abs().max(f_hi.abs())) / (r_hi - r_lo);
    Ok(BifurcationPoint {
        r0,
        f_prime,
        degenerate_transversality: f_prime.abs() < 1e-6 * scale,
    })
}

/// `psi(r, R)` on the unit disk: the transversality profile whose trace
/// at `r = 1` is `F(R)`.
pub fn psi_profile(r: f64, big_r: f64, params: &ModelParams) -> Result<f64> {
    let lambda = params.steady_density(big_r);
    let zeta = params.zeta;
    if zeta <= lambda {
        return Err(Error::Parameter(format!(
            "psi needs zeta > Lambda (zeta = {zeta}, Lambda = {lambda})"
        )));
    }
    let kappa = (zeta - lambda).sqrt();
    Ok(-big_r * lambda * r / (kappa * kappa)
        + zeta * bessel_i(1, big_r * kappa * r)?
            / (kappa.powi(3) * bessel_i_prime(1, big_r * kappa)?))
}

/// Asymptotic traveling-wave data at a validated bifurcation radius:
/// the order-V profile and all order-V^2 corrections.
#[derive(Debug, Clone)]
pub struct TravelingWave {
    pub r0: f64,
    pub params: ModelParams,
    /// Steady density at the bifurcation radius (= `Lambda(R0)`).
    pub m0: f64,
    pub phi0: f64,
    /// Mode-1 order-V profile, sampled on `grid`.
    pub phi1: RadialProfile,
    pub phi2_mode0: RadialProfile,
    pub phi2_mode2: RadialProfile,
    pub rho2_mode0: f64,
    pub rho2_mode2: f64,
    /// V^2 coefficient of the unnormalized multiplier
    /// `Lambda_tilde = m0 e^{-phi0} + V^2 lambda2_tilde`.
    pub lambda2_tilde: f64,
    /// Condition number of the 2x2 mode-0 closure.
    pub closure_condition: f64,
    /// Recommended maximum |V| for the expansion.
    pub valid_v: f64,
    /// Order-V^3 mode-1 correction implied by the solvability closure.
    pub phi3_mode1: Option<RadialProfile>,
    /// Order-V^3 mode-3 correction and its boundary amplitude.
    pub phi3_mode3: Option<RadialProfile>,
    pub rho3_mode3: f64,
    /// When set, the pointwise evaluators include the V^3 fields; the
    /// traveling-wave operator switches this on so its background is
    /// O(V^4)-accurate, while the expansion-order diagnostics keep the
    /// plain V^2 truncation.
    pub include_v3: bool,
    /// Grid the radial profiles live on.
    pub grid: RadialGrid,
}

/// How the mode-0 pair `(lambda2_tilde, rho_0)` is closed.  Both variants
/// pair the order-V^2 curvature relation with one more scalar equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosureKind {
    /// Fredholm solvability of the mode-1 problem at order V^3 (the
    /// boundary data of that problem are overdetermined; matching its
    /// Neumann trace is the condition that selects the branch).  This is
    /// the closure the wave family actually satisfies.
    SolvabilityV3,
    /// Freeze the average myosin density at `Lambda(R0)` to O(V^2).
    /// Satisfies the field equations to the same order but picks a
    /// different curve through the bifurcation point; kept for
    /// comparison.
    MassConsistency,
}

/// Builds the expansion with the order-V^3 solvability closure.
pub fn tw_expand(r0: f64, params: &ModelParams, n_r: usize) -> Result<TravelingWave> {
    tw_expand_with(r0, params, n_r, ClosureKind::SolvabilityV3)
}

/// Builds the expansion.  Order V is the criterion profile `phi_1`;
/// at order V^2 the quadratic source splits into angular modes 0 and 2,
/// each solved with the Neumann condition, the mode-2 boundary amplitude
/// follows from the curvature relation, and the mode-0 pair
/// `(lambda2_tilde, rho_0)` closes with the curvature relation plus the
/// chosen scalar closure.
pub fn tw_expand_with(
    r0: f64,
    params: &ModelParams,
    n_r: usize,
    closure: ClosureKind,
) -> Result<TravelingWave> {
    params.validate()?;
    if !(params.gamma > 0.0) {
        return Err(Error::Parameter(
            "traveling-wave expansion needs gamma > 0 (mode-2 closure divides by it)".into(),
        ));
    }
    let grid = RadialGrid::new(n_r, r0)?;
    let m0 = params.steady_density(r0);
    let zeta = params.zeta;
    if m0 <= 0.0 {
        return Err(Error::Nonphysical(format!("Lambda(R0) = {m0} <= 0")));
    }
    if zeta <= m0 {
        return Err(Error::Parameter(format!(
            "expansion needs zeta > Lambda(R0) (zeta = {zeta}, Lambda = {m0})"
        )));
    }
    let crit = phi1_deriv_at_r(r0, m0, zeta)?;
    if (crit - 1.0).abs() > 1e-6 {
        return Err(Error::Parameter(format!(
            "R0 = {r0} is not a bifurcation radius: phi_1'(R0) = {crit}"
        )));
    }
    let phi0 = -params.gamma / (zeta * r0);

    // Order V: closed-form phi_1.
    let mut phi1 = RadialProfile::zeros(n_r);
    for (i, &r) in grid.centers().iter().enumerate() {
        phi1.values[i] = phi1_closed_form(r0, m0, zeta, r)?;
    }
    phi1.boundary_value = 0.0;
    phi1.boundary_derivative = crit;

    // Quadratic source: m0 (phi_1 - r)^2 cos^2 phi / 2
    //   = m0 s(r) (1 + cos 2 phi) with s = (phi_1 - r)^2 / 4 twice.
    let s_half: Vec<f64> = grid
        .centers()
        .iter()
        .zip(&phi1.values)
        .map(|(&r, &p1)| (p1 - r) * (p1 - r) / 4.0)
        .collect();

    // Mode 2: L_2 u + (m0 - zeta) u = -m0 s, Neumann.
    let src2: Vec<f64> = s_half.iter().map(|s| -m0 * s).collect();
    let phi2_mode2 = solve_mode_bvp(&grid, 2, zeta - m0, &src2, BcKind::Neumann, 0.0)?;
    let rho2_mode2 = -zeta * r0 * r0 * phi2_mode2.boundary_value / (3.0 * params.gamma);

    // Mode 0 split: particular part with the quadratic source, plus
    // constant responses to the two unknowns.
    let src0: Vec<f64> = s_half.iter().map(|s| -m0 * s).collect();
    let phi_s = solve_mode_bvp(&grid, 0, zeta - m0, &src0, BcKind::Neumann, 0.0)?;
    let e0 = phi0.exp();
    let phi_a = e0 / (zeta - m0); // response to lambda2_tilde
    let phi_b = -2.0 * PI * params.p_eff_prime() * r0 / (zeta - m0); // response to rho_0

    // First equation: the order-V^2 curvature relation at mode 0,
    // zeta phi2_0(R) = gamma rho_0 / R^2.
    let a11 = zeta * phi_a;
    let a12 = zeta * phi_b - params.gamma / (r0 * r0);
    let b1 = -zeta * phi_s.boundary_value;

    // Second equation, per closure.
    let mut v3_parts: Option<(RadialProfile, RadialProfile, RadialProfile)> = None;
    let (a21, a22, b2) = match closure {
        ClosureKind::MassConsistency => {
            // <.> denotes the disk average;
            // <(phi1 - r)^2 cos^2 phi / 2> equals the average of s_half.
            let avg = |v: &[f64]| 2.0 * grid.integrate_r(v) / (r0 * r0);
            let avg_phi_s = avg(&phi_s.values);
            let avg_s_ang = avg(&s_half);
            (
                1.0 + m0 / e0 * phi_a,
                m0 / e0 * phi_b,
                -m0 / e0 * (avg_phi_s + avg_s_ang),
            )
        }
        ClosureKind::SolvabilityV3 => {
            // Mode-1 problem at order V^3: the interior source is
            //   -m0 (phi1 - r)(phi2_0 + phi2_2 / 2) - m0 (phi1 - r)^3/8
            //   - L2 e^{phi0} (phi1 - r),
            // its Dirichlet trace is -(rho_0 + rho_2/2) (Young-Laplace),
            // and its Neumann trace is
            //   -(rho_0 + rho_2/2) phi1''(R0) - rho_2 / R0   (kinematic).
            // Solving with the Dirichlet data and matching the Neumann
            // trace yields one affine equation in (L2, rho_0).
            let phi1_pp_r0 = m0 * r0 - 1.0 / r0;
            let w1: Vec<f64> = grid
                .centers()
                .iter()
                .zip(&phi1.values)
                .map(|(&r, &p1)| p1 - r)
                .collect();
            let src_base: Vec<f64> = (0..n_r)
                .map(|i| {
                    -m0 * w1[i] * (phi_s.values[i] + 0.5 * phi2_mode2.values[i])
                        - m0 * w1[i].powi(3) / 8.0
                })
                .collect();
            let w_base = solve_mode_bvp(
                &grid,
                1,
                zeta - m0,
                &src_base,
                BcKind::Dirichlet,
                -0.5 * rho2_mode2,
            )?;
            let src_l: Vec<f64> = w1.iter().map(|w| -zeta * e0 / (zeta - m0) * w).collect();
            let w_l = solve_mode_bvp(&grid, 1, zeta - m0, &src_l, BcKind::Dirichlet, 0.0)?;
            let src_rho: Vec<f64> = w1.iter().map(|w| -m0 * phi_b * w).collect();
            let w_rho = solve_mode_bvp(&grid, 1, zeta - m0, &src_rho, BcKind::Dirichlet, -1.0)?;
            let out = (
                w_l.boundary_derivative,
                w_rho.boundary_derivative + phi1_pp_r0,
                -w_base.boundary_derivative - 0.5 * rho2_mode2 * phi1_pp_r0
                    - rho2_mode2 / r0,
            );
            v3_parts = Some((w_base, w_l, w_rho));
            out
        }
    };
    let det = a11 * a22 - a12 * a21;
    let norm_a = a11.abs().max(a12.abs()).max(a21.abs()).max(a22.abs());
    let closure_condition = if det.abs() > 0.0 {
        // 2x2 max-norm condition estimate
        let inv_norm = (a22.abs().max(a12.abs()).max(a21.abs()).max(a11.abs())) / det.abs();
        norm_a * inv_norm
    } else {
        f64::INFINITY
    };
    if det.abs() < 1e-12 * norm_a * norm_a {
        return Err(Error::SingularOperator(format!(
            "mode-0 closure near singular, condition ~ {closure_condition:.3e}"
        )));
    }
    let lambda2_tilde = (b1 * a22 - b2 * a12) / det;
    let rho2_mode0 = (a11 * b2 - a21 * b1) / det;

    let mut phi2_mode0 = phi_s.clone();
    for v in &mut phi2_mode0.values {
        *v += lambda2_tilde * phi_a + rho2_mode0 * phi_b;
    }
    phi2_mode0.boundary_value += lambda2_tilde * phi_a + rho2_mode0 * phi_b;
    // Neumann: derivative untouched by constants.

    let phi3_mode1 = v3_parts.map(|(w_base, w_l, w_rho)| {
        let mut w = w_base.clone();
        for i in 0..n_r {
            w.values[i] += lambda2_tilde * w_l.values[i] + rho2_mode0 * w_rho.values[i];
        }
        w.boundary_value += lambda2_tilde * w_l.boundary_value + rho2_mode0 * w_rho.boundary_value;
        w.boundary_derivative +=
            lambda2_tilde * w_l.boundary_derivative + rho2_mode0 * w_rho.boundary_derivative;
        w
    });

    // Order-V^3 mode-3 correction (solvability closure only): interior
    // source from the cubic and cross terms, kinematic Neumann data, and
    // the boundary amplitude from the Young-Laplace relation.
    let (phi3_mode3, rho3_mode3) = if phi3_mode1.is_some() {
        let phi1_pp_r0 = m0 * r0 - 1.0 / r0;
        let src3: Vec<f64> = (0..n_r)
            .map(|i| {
                let w1 = phi1.values[i] - grid.centers()[i];
                -m0 * (w1 * phi2_mode2.values[i] / 2.0 + w1.powi(3) / 24.0)
            })
            .collect();
        let n3 = -phi1_pp_r0 * rho2_mode2 / 2.0 + rho2_mode2 / r0;
        let w3 = solve_mode_bvp(&grid, 3, zeta - m0, &src3, BcKind::Neumann, n3)?;
        let rho3 = -zeta * r0 * r0 * (w3.boundary_value + rho2_mode2 / 2.0)
            / (8.0 * params.gamma);
        (Some(w3), rho3)
    } else {
        (None, 0.0)
    };

    let rho_scale = rho2_mode0.abs().max(rho2_mode2.abs()).max(1e-12);
    let valid_v = (0.08 * r0 / rho_scale).sqrt().min(0.5);

    Ok(TravelingWave {
        r0,
        params: *params,
        m0,
        phi0,
        phi1,
        phi2_mode0,
        phi2_mode2,
        rho2_mode0,
        rho2_mode2,
        lambda2_tilde,
        closure_condition,
        valid_v,
        phi3_mode1,
        phi3_mode3,
        rho3_mode3,
        include_v3: false,
        grid,
    })
}

/// Pointwise evaluation of the expansion fields and derivatives.
impl TravelingWave {
    pub fn kappa(&self) -> f64 {
        (self.params.zeta - self.m0).sqrt()
    }

    /// Shape of the wave at velocity `v`: `rho = V^2 rho_2(phi)`, plus
    /// the V^3 mode-3 term when the refined evaluation is switched on.
    pub fn shape(&self, v: f64) -> BoundaryShape {
        let mut coeffs = vec![v * v * self.rho2_mode0, 0.0, v * v * self.rho2_mode2];
        if self.v3_profiles().is_some() {
            coeffs.push(v * v * v * self.rho3_mode3);
        }
        BoundaryShape { base_radius: self.r0, cosine_coefficients: coeffs, center_x: 0.0 }
    }

    /// Unnormalized myosin multiplier at velocity `v`.
    pub fn lambda_tilde(&self, v: f64) -> f64 {
        self.m0 * (-self.phi0).exp() + v * v * self.lambda2_tilde
    }

    fn phi1_at(&self, r: f64) -> f64 {
        phi1_closed_form(self.r0, self.m0, self.params.zeta, r).expect("valid phi1 arguments")
    }

    fn phi1_deriv_at(&self, r: f64) -> f64 {
        let kappa = self.kappa();
        let scale = self.m0 / (self.params.zeta - self.m0);
        let denom = bessel_i(1, kappa * self.r0).unwrap();
        scale * (self.r0 * kappa * bessel_i_prime(1, kappa * r).unwrap() / denom - 1.0)
    }

    fn phi1_deriv2_at(&self, r: f64) -> f64 {
        // I_1''(x) = -I_1'(x)/x + (1 + 1/x^2) I_1(x)
        let kappa = self.kappa();
        let scale = self.m0 / (self.params.zeta - self.m0);
        let denom = bessel_i(1, kappa * self.r0).unwrap();
        let x = kappa * r;
        if x < 1e-9 {
            return 0.0;
        }
        let i1 = bessel_i(1, x).unwrap();
        let i1p = bessel_i_prime(1, x).unwrap();
        let i1pp = -i1p / x + (1.0 + 1.0 / (x * x)) * i1;
        scale * self.r0 * kappa * kappa * i1pp / denom
    }

    /// Quadratic interpolation of a stored radial profile, with a Taylor
    /// extension just beyond `R0` built from the stored boundary data and
    /// the mode ODE.
    fn profile_at(&self, prof: &RadialProfile, n_mode: usize, src_at_r0: f64, r: f64) -> f64 {
        let grid = &self.grid;
        let h = grid.h;
        if r >= self.r0 {
            let u_r0 = prof.boundary_value;
            let up_r0 = prof.boundary_derivative;
            // u'' = -u'/r + n^2 u / r^2 + (zeta - m0) u + src
            let upp = -up_r0 / self.r0
                + (n_mode * n_mode) as f64 * u_r0 / (self.r0 * self.r0)
                + (self.params.zeta - self.m0) * u_r0
                + src_at_r0;
            let d = r - self.r0;
            return u_r0 + d * up_r0 + 0.5 * d * d * upp;
        }
        let idx = ((r / h - 0.5).floor() as isize).clamp(0, grid.n as isize - 2) as usize;
        let i0 = idx.min(grid.n - 3).max(1) - 1;
        let (r0, r1, r2) = (
            grid.centers()[i0],
            grid.centers()[i0 + 1],
            grid.centers()[i0 + 2],
        );
        let (u0, u1, u2) = (prof.values[i0], prof.values[i0 + 1], prof.values[i0 + 2]);
        let l0 = (r - r1) * (r - r2) / ((r0 - r1) * (r0 - r2));
        let l1 = (r - r0) * (r - r2) / ((r1 - r0) * (r1 - r2));
        let l2 = (r - r0) * (r - r1) / ((r2 - r0) * (r2 - r1));
        u0 * l0 + u1 * l1 + u2 * l2
    }

    fn profile_deriv_at(&self, prof: &RadialProfile, n_mode: usize, src_at_r0: f64, r: f64) -> f64 {
        let grid = &self.grid;
        let h = grid.h;
        if r >= self.r0 - 0.5 * h {
            let u_r0 = prof.boundary_value;
            let up_r0 = prof.boundary_derivative;
            let upp = -up_r0 / self.r0
                + (n_mode * n_mode) as f64 * u_r0 / (self.r0 * self.r0)
                + (self.params.zeta - self.m0) * u_r0
                + src_at_r0;
            return up_r0 + (r - self.r0) * upp;
        }
        let idx = ((r / h - 0.5).floor() as isize).clamp(0, grid.n as isize - 2) as usize;
        let i0 = idx.min(grid.n - 3).max(1) - 1;
        let (r0, r1, r2) = (
            grid.centers()[i0],
            grid.centers()[i0 + 1],
            grid.centers()[i0 + 2],
        );
        let (u0, u1, u2) = (prof.values[i0], prof.values[i0 + 1], prof.values[i0 + 2]);
        let d0 = (2.0 * r - r1 - r2) / ((r0 - r1) * (r0 - r2));
        let d1 = (2.0 * r - r0 - r2) / ((r1 - r0) * (r1 - r2));
        let d2 = (2.0 * r - r0 - r1) / ((r2 - r0) * (r2 - r1));
        u0 * d0 + u1 * d1 + u2 * d2
    }

    /// Interior sources of the order-V^3 problems, pointwise.
    fn s3_mode1_at(&self, r: f64) -> f64 {
        let w1 = self.phi1_at(r) - r;
        let u0 = self.profile_at(&self.phi2_mode0, 0, self.src_mode0_at_r0(), r);
        let u2 = self.profile_at(&self.phi2_mode2, 2, self.src_mode2_at_r0(), r);
        -self.m0 * w1 * (u0 + 0.5 * u2) - self.m0 * w1.powi(3) / 8.0
            - self.lambda2_tilde * self.phi0.exp() * w1
    }

    fn s3_mode3_at(&self, r: f64) -> f64 {
        let w1 = self.phi1_at(r) - r;
        let u2 = self.profile_at(&self.phi2_mode2, 2, self.src_mode2_at_r0(), r);
        -self.m0 * (w1 * u2 / 2.0 + w1.powi(3) / 24.0)
    }

    fn v3_profiles(&self) -> Option<(&RadialProfile, &RadialProfile)> {
        if !self.include_v3 {
            return None;
        }
        match (&self.phi3_mode1, &self.phi3_mode3) {
            (Some(a), Some(b)) => Some((a, b)),
            _ => None,
        }
    }

    fn src_mode0_at_r0(&self) -> f64 {
        // source of the mode-0 ODE at r = R0 including the constants:
        // -m0 s(R0) - e^{phi0} L2 + 2 pi p' R0 rho_0, with the sign
        // convention of L u + (m0 - zeta) u = src, i.e. src enters
        // u'' = ... + (zeta - m0) u + src.
        let s_r0 = (0.0 - self.r0) * (0.0 - self.r0) / 4.0; // phi1(R0) = 0
        -self.m0 * s_r0 - self.phi0.exp() * self.lambda2_tilde
            + 2.0 * PI * self.params.p_eff_prime() * self.r0 * self.rho2_mode0
    }

    fn src_mode2_at_r0(&self) -> f64 {
        let s_r0 = (0.0 - self.r0) * (0.0 - self.r0) / 4.0;
        -self.m0 * s_r0
    }

    /// `Phi(r, phi)` at velocity `v`.
    pub fn phi_at(&self, v: f64, r: f64, phi: f64) -> f64 {
        let mut out = self.phi0
            + v * self.phi1_at(r) * phi.cos()
            + v * v
                * (self.profile_at(&self.phi2_mode0, 0, self.src_mode0_at_r0(), r)
                    + self.profile_at(&self.phi2_mode2, 2, self.src_mode2_at_r0(), r)
                        * (2.0 * phi).cos());
        if let Some((w1, w3)) = self.v3_profiles() {
            out += v * v * v
                * (self.profile_at(w1, 1, self.s3_mode1_at(self.r0), r) * phi.cos()
                    + self.profile_at(w3, 3, self.s3_mode3_at(self.r0), r)
                        * (3.0 * phi).cos());
        }
        out
    }

    /// Polar gradient `(d/dr, d/dphi)` of `Phi`.
    pub fn phi_grad_polar(&self, v: f64, r: f64, phi: f64) -> (f64, f64) {
        let mut d_r = v * self.phi1_deriv_at(r) * phi.cos()
            + v * v
                * (self.profile_deriv_at(&self.phi2_mode0, 0, self.src_mode0_at_r0(), r)
                    + self.profile_deriv_at(&self.phi2_mode2, 2, self.src_mode2_at_r0(), r)
                        * (2.0 * phi).cos());
        let mut d_phi = -v * self.phi1_at(r) * phi.sin()
            - 2.0 * v * v
                * self.profile_at(&self.phi2_mode2, 2, self.src_mode2_at_r0(), r)
                * (2.0 * phi).sin();
        if let Some((w1, w3)) = self.v3_profiles() {
            let v3 = v * v * v;
            d_r += v3
                * (self.profile_deriv_at(w1, 1, self.s3_mode1_at(self.r0), r) * phi.cos()
                    + self.profile_deriv_at(w3, 3, self.s3_mode3_at(self.r0), r)
                        * (3.0 * phi).cos());
            d_phi += v3
                * (-self.profile_at(w1, 1, self.s3_mode1_at(self.r0), r) * phi.sin()
                    - 3.0
                        * self.profile_at(w3, 3, self.s3_mode3_at(self.r0), r)
                        * (3.0 * phi).sin());
        }
        (d_r, d_phi)
    }

    /// Laplacian of the wave potential from the mode ODE identities
    /// (exact for the order-V part, discrete-identity-exact for the
    /// order-V^2 profiles).
    pub fn laplacian_phi_at(&self, v: f64, r: f64, phi: f64) -> f64 {
        let zeta = self.params.zeta;
        let m0 = self.m0;
        let p1 = self.phi1_at(r);
        let s = (p1 - r) * (p1 - r) / 4.0;
        let src0 = -m0 * s - self.phi0.exp() * self.lambda2_tilde
            + 2.0 * PI * self.params.p_eff_prime() * self.r0 * self.rho2_mode0;
        let src2 = -m0 * s;
        let u0 = self.profile_at(&self.phi2_mode0, 0, self.src_mode0_at_r0(), r);
        let u2 = self.profile_at(&self.phi2_mode2, 2, self.src_mode2_at_r0(), r);
        let mut out = v * ((zeta - m0) * p1 + m0 * r) * phi.cos()
            + v * v
                * ((zeta - m0) * u0 + src0 + ((zeta - m0) * u2 + src2) * (2.0 * phi).cos());
        if let Some((w1, w3)) = self.v3_profiles() {
            let w1v = self.profile_at(w1, 1, self.s3_mode1_at(self.r0), r);
            let w3v = self.profile_at(w3, 3, self.s3_mode3_at(self.r0), r);
            out += v * v * v
                * (((zeta - m0) * w1v + self.s3_mode1_at(r)) * phi.cos()
                    + ((zeta - m0) * w3v + self.s3_mode3_at(r)) * (3.0 * phi).cos());
        }
        out
    }

    /// Second radial derivative `Phi_rr` and the mixed `Phi_r phi`, from
    /// the mode ODEs (second derivatives never touch grid differences).
    pub fn phi_grad2_polar(&self, v: f64, r: f64, phi: f64) -> (f64, f64) {
        let zeta = self.params.zeta;
        let m0 = self.m0;
        let s = {
            let p1 = self.phi1_at(r);
            (p1 - r) * (p1 - r) / 4.0
        };
        let src0 = -m0 * s - self.phi0.exp() * self.lambda2_tilde
            + 2.0 * PI * self.params.p_eff_prime() * self.r0 * self.rho2_mode0;
        let src2 = -m0 * s;
        let u0 = self.profile_at(&self.phi2_mode0, 0, self.src_mode0_at_r0(), r);
        let u2 = self.profile_at(&self.phi2_mode2, 2, self.src_mode2_at_r0(), r);
        let du0 = self.profile_deriv_at(&self.phi2_mode0, 0, self.src_mode0_at_r0(), r);
        let du2 = self.profile_deriv_at(&self.phi2_mode2, 2, self.src_mode2_at_r0(), r);
        // u'' = -u'/r + n^2 u / r^2 + (zeta - m0) u + src
        let upp0 = -du0 / r + (zeta - m0) * u0 + src0;
        let upp2 = -du2 / r + 4.0 * u2 / (r * r) + (zeta - m0) * u2 + src2;
        let p1pp = self.phi1_deriv2_at(r);
        let mut phi_rr = v * p1pp * phi.cos()
            + v * v * (upp0 + upp2 * (2.0 * phi).cos());
        let p1p = self.phi1_deriv_at(r);
        let mut phi_rphi = -v * p1p * phi.sin() - 2.0 * v * v * du2 * (2.0 * phi).sin();
        if let Some((w1, w3)) = self.v3_profiles() {
            let v3 = v * v * v;
            let w1v = self.profile_at(w1, 1, self.s3_mode1_at(self.r0), r);
            let w3v = self.profile_at(w3, 3, self.s3_mode3_at(self.r0), r);
            let dw1 = self.profile_deriv_at(w1, 1, self.s3_mode1_at(self.r0), r);
            let dw3 = self.profile_deriv_at(w3, 3, self.s3_mode3_at(self.r0), r);
            let w1pp = -dw1 / r + w1v / (r * r) + (zeta - m0) * w1v + self.s3_mode1_at(r);
            let w3pp =
                -dw3 / r + 9.0 * w3v / (r * r) + (zeta - m0) * w3v + self.s3_mode3_at(r);
            phi_rr += v3 * (w1pp * phi.cos() + w3pp * (3.0 * phi).cos());
            phi_rphi += v3 * (-dw1 * phi.sin() - 3.0 * dw3 * (3.0 * phi).sin());
        }
        (phi_rr, phi_rphi)
    }

    /// Myosin density of the wave at a physical point (polar about the
    /// wave center): `Lambda_tilde e^{Phi - Vx}`.
    pub fn myosin_at(&self, v: f64, r: f64, phi: f64) -> f64 {
        let w = (self.phi_at(v, r, phi) - v * r * phi.cos()).exp();
        self.lambda_tilde(v) * w
    }

    /// Domain average of `e^{Phi - Vx}` by tensor quadrature (the star
    /// parametrization of the wave domain, Gauss-Legendre in radius and
    /// trapezoid in angle).  `lambda_tilde(v) * mean_kernel(v)` is the
    /// average myosin density along the branch.
    pub fn mean_kernel(&self, v: f64, n_rad: usize, n_ang: usize) -> f64 {
        let shape = self.shape(v);
        let (nodes, weights) = gauss_legendre(n_rad);
        let mut total = 0.0;
        let mut area_acc = 0.0;
        for k in 0..n_ang {
            let phi = 2.0 * PI * k as f64 / n_ang as f64;
            let q = shape.radius_at(phi);
            for (x, w) in nodes.iter().zip(&weights) {
                let r = q * 0.5 * (x + 1.0);
                let jac = q * 0.5 * r;
                let kernel = (self.phi_at(v, r, phi) - v * r * phi.cos()).exp();
                total += kernel * jac * w;
                area_acc += jac * w;
            }
        }
        total / area_acc.max(1e-300)
    }
}

/// Boundary shape and reference-disk myosin field of the wave; the field
/// is sampled through the boundary-fitted map so it can seed the
/// simulator directly.
pub fn tw_fields(
    tw: &TravelingWave,
    v: f64,
    grid: &RadialGrid,
    ang: &AngularGrid,
) -> Result<(BoundaryShape, PolarField)> {
    if v.abs() > tw.valid_v {
        return Err(Error::Parameter(format!(
            "|V| = {} beyond recommended validity {}",
            v.abs(),
            tw.valid_v
        )));
    }
    tw_fields_extrapolated(tw, v, grid, ang)
}

/// Same reconstruction without the validity gate: the figure presets
/// deliberately stretch the ansatz to the velocities of the published
/// plots, far beyond asymptotic smallness.  Geometric validity (a
/// non-degenerate boundary) is still enforced.
pub fn tw_fields_extrapolated(
    tw: &TravelingWave,
    v: f64,
    grid: &RadialGrid,
    ang: &AngularGrid,
) -> Result<(BoundaryShape, PolarField)> {
    let shape = tw.shape(v);
    shape.validate_nondegenerate()?;
    let mapper = crate::geometry::BoundaryMapper::new(&shape, 1.0)?;
    let mut m = PolarField::constant(grid.n, ang.n, 0.0);
    for (i, &r) in grid.centers().iter().enumerate() {
        for (k, &phi) in ang.nodes().iter().enumerate() {
            let (x, y) = mapper.point(r, phi);
            let (rp, pp) = (x.hypot(y), y.atan2(x));
            *m.at_mut(i, k) = tw.myosin_at(v, rp, pp);
        }
    }
    Ok((shape, m))
}

/// Max-norm residual of the traveling-wave system evaluated on the
/// expansion: bulk equation, kinematic (Neumann) condition, and the
/// Young-Laplace condition.  Decays like V^3 when the expansion is
/// correct; this is the decisive correctness check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TwResidual {
    pub bulk: f64,
    pub neumann: f64,
    pub young_laplace: f64,
}

impl TwResidual {
    pub fn max(&self) -> f64 {
        self.bulk.max(self.neumann).max(self.young_laplace)
    }
}

pub fn tw_residual(tw: &TravelingWave, v: f64) -> Result<TwResidual> {
    let params = &tw.params;
    let zeta = params.zeta;
    let m0 = tw.m0;
    let r0 = tw.r0;
    let grid = &tw.grid;
    let shape = tw.shape(v);
    let lam_tilde = tw.lambda_tilde(v);
    let p_eff = params.p_eff(area(&shape));
    let n_ang = 64usize;

    // Bulk: laplacian Phi is exact for the order-V part (the ODE) and
    // exact-by-identity for the discrete order-V^2 profiles.
    let mut bulk = 0.0_f64;
    for (i, &r) in grid.centers().iter().enumerate() {
        // discrete identities: L u = (zeta - m0) u + src
        let u0 = tw.phi2_mode0.values[i];
        let u2 = tw.phi2_mode2.values[i];
        let p1 = tw.phi1.values[i];
        let s = (p1 - r) * (p1 - r) / 4.0;
        let src0 = -m0 * s - tw.phi0.exp() * tw.lambda2_tilde
            + 2.0 * PI * params.p_eff_prime() * r0 * tw.rho2_mode0;
        let src2 = -m0 * s;
        let lap2_m0 = (zeta - m0) * u0 + src0;
        let lap2_m2 = (zeta - m0) * u2 + src2;
        for k in 0..n_ang {
            let phi = 2.0 * PI * k as f64 / n_ang as f64;
            let lap1 = ((zeta - m0) * p1 + m0 * r) * phi.cos();
            let lap = v * lap1 + v * v * (lap2_m0 + lap2_m2 * (2.0 * phi).cos());
            let phi_val = tw.phi0
                + v * p1 * phi.cos()
                + v * v * (u0 + u2 * (2.0 * phi).cos());
            let kernel = (phi_val - v * r * phi.cos()).exp();
            let res = lap + lam_tilde * kernel - zeta * phi_val - p_eff;
            bulk = bulk.max(res.abs());
        }
    }

    // Boundary conditions on the true wave boundary r = q(phi).
    let mut neumann = 0.0_f64;
    let mut young_laplace = 0.0_f64;
    for k in 0..n_ang {
        let phi = 2.0 * PI * k as f64 / n_ang as f64;
        let q = shape.radius_at(phi);
        let qp = shape.rho_deriv_at(phi);
        let (f_r, f_p) = tw.phi_grad_polar(v, q, phi);
        // d/dnu of (Phi - V x) on r = q(phi)
        let g_r = f_r - v * phi.cos();
        let g_p = f_p + v * q * phi.sin();
        let dnu = (g_r - qp * g_p / (q * q)) / (1.0 + qp * qp / (q * q)).sqrt();
        neumann = neumann.max(dnu.abs());
        let kappa = crate::geometry::curvature_at(&shape, phi);
        let yl = zeta * tw.phi_at(v, q, phi) + params.gamma * kappa;
        young_laplace = young_laplace.max(yl.abs());
    }
    Ok(TwResidual { bulk, neumann, young_laplace })
}

/// Max-norm residuals of the traveling-wave system projected on one
/// angular mode, optionally including the order-V^3 mode-1 correction.
/// With the correction the mode-1 residual drops from O(V^3) to O(V^4),
/// which is the internal validation of the solvability closure: every
/// ingredient of that closure (interior source, Dirichlet and Neumann
/// boundary data) must be correct for the cancellation to happen.
pub fn tw_residual_mode(
    tw: &TravelingWave,
    v: f64,
    mode: usize,
    include_v3: bool,
) -> Result<TwResidual> {
    let params = &tw.params;
    let zeta = params.zeta;
    let m0 = tw.m0;
    let r0 = tw.r0;
    let grid = &tw.grid;
    let shape = tw.shape(v);
    let lam_tilde = tw.lambda_tilde(v);
    let p_eff = params.p_eff(area(&shape));
    let n_ang = 128usize;
    let e0 = tw.phi0.exp();

    let w3 = if include_v3 {
        tw.phi3_mode1
            .as_ref()
            .ok_or_else(|| Error::Parameter("expansion lacks the V^3 correction".into()))?
    } else {
        &RadialProfile::zeros(grid.n)
    };
    let w3 = w3.clone();

    let project = |ring: &[f64], mode: usize| -> f64 {
        let n = ring.len() as f64;
        let scale = if mode == 0 { 1.0 } else { 2.0 };
        ring.iter()
            .enumerate()
            .map(|(k, v)| {
                v * (mode as f64 * 2.0 * PI * k as f64 / n).cos()
            })
            .sum::<f64>()
            * scale
            / n
    };

    let mut bulk = 0.0_f64;
    let mut ring = vec![0.0; n_ang];
    for (i, &r) in grid.centers().iter().enumerate() {
        let u0 = tw.phi2_mode0.values[i];
        let u2 = tw.phi2_mode2.values[i];
        let p1 = tw.phi1.values[i];
        let w1 = p1 - r;
        let s = w1 * w1 / 4.0;
        let src0 = -m0 * s - e0 * tw.lambda2_tilde
            + 2.0 * PI * params.p_eff_prime() * r0 * tw.rho2_mode0;
        let src2 = -m0 * s;
        let lap2_m0 = (zeta - m0) * u0 + src0;
        let lap2_m2 = (zeta - m0) * u2 + src2;
        // interior source of the V^3 mode-1 problem
        let s3 = -m0 * w1 * (u0 + 0.5 * u2) - m0 * w1.powi(3) / 8.0
            - tw.lambda2_tilde * e0 * w1;
        let lap3 = if include_v3 { (zeta - m0) * w3.values[i] + s3 } else { 0.0 };
        for (k, slot) in ring.iter_mut().enumerate() {
            let phi = 2.0 * PI * k as f64 / n_ang as f64;
            let lap = v * ((zeta - m0) * p1 + m0 * r) * phi.cos()
                + v * v * (lap2_m0 + lap2_m2 * (2.0 * phi).cos())
                + v * v * v * lap3 * phi.cos();
            let phi_val = tw.phi0
                + v * p1 * phi.cos()
                + v * v * (u0 + u2 * (2.0 * phi).cos())
                + v * v * v * w3.values[i] * phi.cos();
            let kernel = (phi_val - v * r * phi.cos()).exp();
            *slot = lap + lam_tilde * kernel - zeta * phi_val - p_eff;
        }
        bulk = bulk.max(project(&ring, mode).abs());
    }

    let mut neumann_ring = vec![0.0; n_ang];
    let mut yl_ring = vec![0.0; n_ang];
    // source of the V^3 mode-1 problem at r = R0, where w1 = -R0
    let s3_r0 = m0
        * r0
        * (tw.phi2_mode0.boundary_value + 0.5 * tw.phi2_mode2.boundary_value)
        + m0 * r0.powi(3) / 8.0
        + tw.lambda2_tilde * e0 * r0;
    for (k, _) in (0..n_ang).enumerate() {
        let phi = 2.0 * PI * k as f64 / n_ang as f64;
        let q = shape.radius_at(phi);
        let qp = shape.rho_deriv_at(phi);
        let (f_r0, f_p0) = tw.phi_grad_polar(v, q, phi);
        // V^3 mode-1 correction, extended to r = q by Taylor
        let dw = q - r0;
        let w3_q = w3.boundary_value + dw * w3.boundary_derivative;
        // w'' from the ODE at R0
        let w3pp = w3.boundary_value / (r0 * r0)
            + (zeta - m0) * w3.boundary_value
            + s3_r0;
        let w3p_q = w3.boundary_derivative + dw * w3pp;
        let f_r = f_r0 + v * v * v * w3p_q * phi.cos();
        let f_p = f_p0 - v * v * v * w3_q * phi.sin();
        let g_r = f_r - v * phi.cos();
        let g_p = f_p + v * q * phi.sin();
        neumann_ring[k] = (g_r - qp * g_p / (q * q)) / (1.0 + qp * qp / (q * q)).sqrt();
        let kappa = crate::geometry::curvature_at(&shape, phi);
        yl_ring[k] =
            zeta * (tw.phi_at(v, q, phi) + v * v * v * w3_q * phi.cos()) + params.gamma * kappa;
    }
    Ok(TwResidual {
        bulk,
        neumann: project(&neumann_ring, mode).abs(),
        young_laplace: project(&yl_ring, mode).abs(),
    })
}

/// Mass-velocity diagram data.
#[derive(Debug, Clone, Serialize)]
pub struct MassVelocityCurve {
    pub velocities: Vec<f64>,
    pub masses: Vec<f64>,
    pub critical_mass: f64,
}

impl MassVelocityCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("V,M\n");
        for (v, m) in self.velocities.iter().zip(&self.masses) {
            out.push_str(&format!("{v:.12e},{m:.12e}\n"));
        }
        out
    }
}

/// Total myosin mass along the branch:
/// `M(V) = Lambda_tilde int_Omega e^{Phi - Vx}` by tensor quadrature.
pub fn mass_vs_velocity(tw: &TravelingWave, v_grid: &[f64]) -> Result<MassVelocityCurve> {
    let mut masses = Vec::with_capacity(v_grid.len());
    let (nodes, weights) = gauss_legendre(64);
    let n_ang = 128usize;
    for &v in v_grid {
        if v.abs() > tw.valid_v {
            return Err(Error::Parameter(format!(
                "V = {v} beyond recommended validity {}",
                tw.valid_v
            )));
        }
        let shape = tw.shape(v);
        let mut total = 0.0;
        for k in 0..n_ang {
            let phi = 2.0 * PI * k as f64 / n_ang as f64;
            let q = shape.radius_at(phi);
            for (x, w) in nodes.iter().zip(&weights) {
                let r = q * 0.5 * (x + 1.0);
                let jac = q * 0.5 * r;
                let kernel = (tw.phi_at(v, r, phi) - v * r * phi.cos()).exp();
                total += kernel * jac * w;
            }
        }
        total *= 2.0 * PI / n_ang as f64;
        masses.push(tw.lambda_tilde(v) * total);
    }
    let critical_mass = tw.m0 * PI * tw.r0 * tw.r0;
    Ok(MassVelocityCurve { velocities: v_grid.to_vec(), masses, critical_mass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stability::critical_radius_phi1;
    use approx::assert_abs_diff_eq;

    /// Parameters with `m0* = Lambda(R0)` pinned at the criterion root.
    pub fn pinned_params(m0: f64, zeta: f64, gamma: f64, k_e: f64) -> (ModelParams, f64) {
        let kappa = (zeta - m0).sqrt();
        // root of m0 x I_1'(x)/I_1(x) = zeta
        let f = |x: f64| {
            m0 * x * bessel_i_prime(1, x).unwrap() / bessel_i(1, x).unwrap() - zeta
        };
        let (mut lo, mut hi) = (1e-3, 40.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo).signum() == f(mid).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r0 = 0.5 * (lo + hi) / kappa;
        let p_h = m0 + gamma / r0 + k_e * PI * r0 * r0;
        (ModelParams { zeta, gamma, p_h, k_e }, r0)
    }

    #[test]
    fn f_sign_flip_matches_phi1_criterion() {
        let (params, r0) = pinned_params(3.0, 4.0, 0.03, 1.5);
        let mut r = 0.6 * r0;
        while r <= 1.4 * r0 {
            let lam = params.steady_density(r);
            if lam > 0.0 && lam < params.zeta {
                let f = f_of_r(r, &params).unwrap();
                let c = phi1_deriv_at_r(r, lam, params.zeta).unwrap() - 1.0;
                if f.abs() > 1e-10 && c.abs() > 1e-10 {
                    // F and the criterion flip together; F > 0 below the
                    // root (subcritical side), where phi1' < 1.
                    assert_eq!(
                        f.signum(),
                        -c.signum(),
                        "inconsistent signs at R = {r}: F = {f}, crit = {c}"
                    );
                }
            }
            r += 0.07 * r0;
        }
    }

    #[test]
    fn lambda_zero_limit_positive() {
        for &r in &[0.3, 0.8, 1.7, 3.0] {
            let v = f_of_r_with_lambda(r, 4.0, 0.0, BesselArgConvention::RadiusScaled).unwrap();
            assert!(v > 0.0, "F = {v} at R = {r}");
        }
    }

    #[test]
    fn root_agrees_with_phi1_root() {
        for &(m0, zeta, gamma, k_e) in
            &[(3.0, 4.0, 0.03, 1.5), (1.1, 2.1, 0.75, 0.25)]
        {
            let (params, r_pin) = pinned_params(m0, zeta, gamma, k_e);
            let bp =
                find_bifurcation_radius(&params, 0.94 * r_pin, 1.1 * r_pin).unwrap();
            let root_phi1 = critical_radius_phi1(&params, 0.94 * r_pin, 1.1 * r_pin).unwrap();
            assert_abs_diff_eq!(bp.r0, root_phi1, epsilon = 1e-8);
            assert_abs_diff_eq!(bp.r0, r_pin, epsilon = 1e-7);
            assert!(!bp.degenerate_transversality, "F'(R0) = {}", bp.f_prime);
        }
    }

    #[test]
    fn psi_boundary_behavior_and_bvp_oracle() {
        let (params, r0) = pinned_params(3.0, 4.0, 0.03, 1.5);
        let big_r = 1.1 * r0;
        assert_abs_diff_eq!(psi_profile(0.0, big_r, &params).unwrap(), 0.0, epsilon = 1e-12);
        // FD derivative at r = 1 equals R
        let h = 1e-6;
        let d = (psi_profile(1.0 + h, big_r, &params).unwrap()
            - psi_profile(1.0 - h, big_r, &params).unwrap())
            / (2.0 * h);
        assert_abs_diff_eq!(d, big_r, epsilon = 1e-7);
        // BVP oracle on the unit disk: L_1 psi - R^2 (zeta - Lambda) psi = R^3 Lambda r
        let lam = params.steady_density(big_r);
        let grid = RadialGrid::new(2048, 1.0).unwrap();
        let src: Vec<f64> = grid
            .centers()
            .iter()
            .map(|&r| big_r.powi(3) * lam * r)
            .collect();
        let prof = solve_mode_bvp(
            &grid,
            1,
            big_r * big_r * (params.zeta - lam),
            &src,
            BcKind::Neumann,
            big_r,
        )
        .unwrap();
        let mut worst = 0.0_f64;
        for (v, &r) in prof.values.iter().zip(grid.centers()).step_by(97) {
            worst = worst.max((v - psi_profile(r, big_r, &params).unwrap()).abs());
        }
        assert!(worst < 1e-6, "psi vs BVP gap {worst}");
    }

    #[test]
    fn printed_convention_breaks_psi_normalization() {
        // The bare-argument variant fails the psi'(1) = R identity,
        // which is the diagnostic for the argument convention.
        let (params, r0) = pinned_params(3.0, 4.0, 0.03, 1.5);
        let lam = params.steady_density(r0);
        let zeta = params.zeta;
        let kappa = (zeta - lam).sqrt();
        let deriv_scaled = -r0 * lam / (kappa * kappa)
            + zeta * r0 * bessel_i_prime(1, r0 * kappa).unwrap()
                / (kappa * kappa * bessel_i_prime(1, r0 * kappa).unwrap());
        assert_abs_diff_eq!(deriv_scaled, r0, epsilon = 1e-12);
        let deriv_bare = -r0 * lam / (kappa * kappa)
            + zeta * r0 * bessel_i_prime(1, r0 * kappa).unwrap()
                / (kappa * kappa * bessel_i_prime(1, kappa).unwrap());
        assert!((deriv_bare - r0).abs() > 1e-3);
    }

    #[test]
    fn expansion_reduces_to_steady_state_at_zero_velocity() {
        let (params, r0) = pinned_params(3.0, 4.0, 0.03, 1.5);
        let tw = tw_expand(r0, &params, 256).unwrap();
        let shape = tw.shape(0.0);
        assert_eq!(shape.cosine_coefficients, vec![0.0, 0.0, 0.0]);
        let grid = RadialGrid::new(48, r0).unwrap();
        let ang = AngularGrid::new(32).unwrap();
        let (_, m) = tw_fields(&tw, 0.0, &grid, &ang).unwrap();
        for v in &m.values {
            assert_abs_diff_eq!(*v, tw.m0, epsilon = 1e-10);
        }
    }

    #[test]
    fn phi2_neumann_residual_small() {
        let (params, r0) = pinned_params(3.0, 4.0, 0.03, 1.5);
        let tw = tw_expand(r0, &params, 512).unwrap();
        assert!(tw.phi2_mode2.boundary_derivative.abs() < 1e-9);
        assert!(tw.phi2_mode0.boundary_derivative.abs() < 1e-9);
        // the stored mode-1 content of rho_2 is structurally zero
        assert_eq!(tw.shape(0.3).cosine_coefficients[1], 0.0);
    }

    #[test]
    fn residual_decays_cubically() {
        let (params, r0) = pinned_params(3.0, 4.0, 0.03, 1.5);
        let tw = tw_expand(r0, &params, 512).unwrap();
        let vs = [0.05, 0.1, 0.2];
        let res: Vec<f64> = vs.iter().map(|&v| tw_residual(&tw, v).unwrap().max()).collect();
        let xs: Vec<f64> = vs.iter().map(|v| v.ln()).collect();
        let ys: Vec<f64> = res.iter().map(|r| r.ln()).collect();
        let slope = crate::linalg::ls_slope(&xs, &ys);
        assert!(slope >= 2.7, "log-log slope {slope}, residuals {res:?}");
    }

    #[test]
    fn myosin_concentrates_at_rear() {
        let (params, r0) = pinned_params(3.0, 4.0, 0.03, 1.5);
        let tw = tw_expand(r0, &params, 256).unwrap();
        let v = 0.3_f64.min(tw.valid_v);
        let q_pi = tw.shape(v).radius_at(PI);
        let m_rear = tw.myosin_at(v, q_pi, PI);
        let q_0 = tw.shape(v).radius_at(0.0);
        let m_front = tw.myosin_at(v, q_0, 0.0);
        assert!(
            m_rear > m_front,
            "rear {m_rear} not above front {m_front} at V = {v}"
        );
        // argmax over the boundary ring sits at phi = pi
        let mut best = (0.0, f64::NEG_INFINITY);
        for k in 0..128 {
            let phi = 2.0 * PI * k as f64 / 128.0;
            let q = tw.shape(v).radius_at(phi);
            let m = tw.myosin_at(v, q, phi);
            if m > best.1 {
                best = (phi, m);
            }
        }
        assert!((best.0 - PI).abs() < 0.2, "boundary argmax at {}", best.0);
    }

    #[test]
    fn v3_correction_sharpens_mode1_residual() {
        // The decisive validation of the solvability closure: adding the
        // order-V^3 mode-1 profile it implies must push the mode-1
        // residual from O(V^3) to O(V^5); any error in the interior
        // source, the boundary data or the 2x2 closure would break the
        // cancellation.
        let (params, r0) = pinned_params(1.1, 2.1, 0.75, 0.25);
        let tw = tw_expand_with(r0, &params, 512, ClosureKind::SolvabilityV3).unwrap();
        let vs = [0.02f64, 0.04, 0.08];
        let mut slopes = Vec::new();
        for include in [false, true] {
            let rs: Vec<f64> = vs
                .iter()
                .map(|&v| {
                    let r = tw_residual_mode(&tw, v, 1, include).unwrap();
                    r.bulk.max(r.neumann).max(r.young_laplace)
                })
                .collect();
            let xs: Vec<f64> = vs.iter().map(|v| v.ln()).collect();
            let ys: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
            slopes.push(crate::linalg::ls_slope(&xs, &ys));
        }
        assert!((2.8..3.2).contains(&slopes[0]), "bare slope {}", slopes[0]);
        assert!(slopes[1] > 4.3, "corrected slope {}", slopes[1]);
    }

    #[test]
    fn mass_curve_baseline_and_symmetry() {
        let (params, r0) = pinned_params(1.1, 2.1, 0.75, 0.25);
        let tw = tw_expand(r0, &params, 256).unwrap();
        let vmax = tw.valid_v.min(0.35);
        let vs = [-vmax, -0.5 * vmax, 0.0, 0.5 * vmax, vmax];
        let curve = mass_vs_velocity(&tw, &vs).unwrap();
        assert_abs_diff_eq!(
            curve.masses[2],
            tw.m0 * PI * r0 * r0,
            epsilon = 1e-8 * curve.masses[2]
        );
        assert_abs_diff_eq!(curve.masses[0], curve.masses[4], epsilon = 1e-10 * curve.masses[0]);
        assert_abs_diff_eq!(curve.masses[1], curve.masses[3], epsilon = 1e-10 * curve.masses[1]);
    }
}
