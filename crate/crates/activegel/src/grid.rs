//! Discretization primitives shared by every solver in the crate:
//! a cell-centered radial finite-volume grid on `[0, R]`, FFT-backed
//! spectral operations on the periodic angle, and Gauss-Legendre rules.
//!
//! Radial layout: `n_r` cells, centers `r_i = (i + 1/2) h`, faces `i h`.
//! The face at `r = 0` carries zero measure, so the coordinate
//! singularity of the polar Laplacian never enters a stencil; mode
//! parity at the origin is honored automatically by the flux form.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Result};

/// Boundary condition at `r = R` for a per-mode radial solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialBc {
    /// Prescribed value `u(R)`.
    Dirichlet(f64),
    /// Prescribed derivative `u'(R)`.
    Neumann(f64),
}

/// Uniform cell-centered grid on `[0, r_max]`.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    pub n: usize,
    pub r_max: f64,
    pub h: f64,
    centers: Vec<f64>,
}

impl RadialGrid {
    pub fn new(n: usize, r_max: f64) -> Result<Self> {
        if n < 16 {
            return Err(Error::Resolution(format!(
                "radial grid needs at least 16 cells, got {n}"
            )));
        }
        if !(r_max > 0.0) {
            return Err(Error::Domain(format!("r_max must be positive, got {r_max}")));
        }
        let h = r_max / n as f64;
        let centers = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
        Ok(Self { n, r_max, h, centers })
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Face radius `i * h` for `i = 0..=n`.
    pub fn face(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    /// Tridiagonal solve of `(1/r)(r u')' - n^2 u / r^2 - zeta_eff u = source`
    /// with regularity at the origin and the given condition at `r = R`.
    pub fn solve_mode(
        &self,
        n_mode: usize,
        zeta_eff: f64,
        source: &[f64],
        bc: RadialBc,
    ) -> Result<Vec<f64>> {
        assert_eq!(source.len(), self.n);
        if let RadialBc::Neumann(_) = bc {
            if n_mode == 0 && zeta_eff <= 0.0 {
                return Err(Error::SingularOperator(
                    "Neumann mode-0 operator needs zeta_eff > 0".into(),
                ));
            }
        }
        let n = self.n;
        let h2 = self.h * self.h;
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = source.to_vec();
        for i in 0..n {
            let r = self.centers[i];
            let f_lo = self.face(i);
            let f_hi = self.face(i + 1);
            sub[i] = f_lo / (r * h2);
            sup[i] = f_hi / (r * h2);
            diag[i] = -(f_lo + f_hi) / (r * h2)
                - (n_mode * n_mode) as f64 / (r * r)
                - zeta_eff;
        }
        // Ghost-cell elimination at r = R.
        let c_last = sup[n - 1];
        match bc {
            RadialBc::Dirichlet(g) => {
                diag[n - 1] -= c_last;
                rhs[n - 1] -= 2.0 * c_last * g;
            }
            RadialBc::Neumann(g) => {
                diag[n - 1] += c_last;
                rhs[n - 1] -= c_last * self.h * g;
            }
        }
        sup[n - 1] = 0.0;
        thomas(&sub, &mut diag, &sup, &mut rhs)?;
        Ok(rhs)
    }

    /// Applies `(1/r)(r u')' - n^2 u / r^2` with the stated boundary
    /// condition folded into the ghost cell.
    pub fn apply_mode_laplacian(&self, n_mode: usize, u: &[f64], bc: RadialBc) -> Vec<f64> {
        assert_eq!(u.len(), self.n);
        let n = self.n;
        let ghost = match bc {
            RadialBc::Dirichlet(g) => 2.0 * g - u[n - 1],
            RadialBc::Neumann(g) => u[n - 1] + self.h * g,
        };
        let mut out = vec![0.0; n];
        for i in 0..n {
            let r = self.centers[i];
            let f_lo = self.face(i);
            let f_hi = self.face(i + 1);
            let u_lo = if i == 0 { 0.0 } else { u[i - 1] };
            let u_hi = if i == n - 1 { ghost } else { u[i + 1] };
            let flux_lo = if i == 0 { 0.0 } else { f_lo * (u[i] - u_lo) / self.h };
            let flux_hi = f_hi * (u_hi - u[i]) / self.h;
            out[i] = (flux_hi - flux_lo) / (r * self.h)
                - (n_mode * n_mode) as f64 / (r * r) * u[i];
        }
        out
    }

    /// Value at `r = R` consistent with the boundary condition.
    pub fn boundary_value(&self, u: &[f64], bc: RadialBc) -> f64 {
        let n = self.n;
        match bc {
            RadialBc::Dirichlet(g) => g,
            RadialBc::Neumann(g) => {
                (9.0 * u[n - 1] - u[n - 2] + 3.0 * self.h * g) / 8.0
            }
        }
    }

    /// Derivative at `r = R` consistent with the boundary condition.
    /// For Dirichlet data the flux-consistent stencil `2(g - u_last)/h`
    /// is the one that superconverges (second order) with this scheme;
    /// wider one-sided fits lose an order to the ghost closure.
    pub fn boundary_deriv(&self, u: &[f64], bc: RadialBc) -> f64 {
        let n = self.n;
        match bc {
            RadialBc::Dirichlet(g) => 2.0 * (g - u[n - 1]) / self.h,
            RadialBc::Neumann(g) => g,
        }
    }

    /// Second-order extrapolation of the value at `r = R` without a
    /// boundary condition.
    pub fn extrapolate_value(&self, u: &[f64]) -> f64 {
        let n = self.n;
        (15.0 * u[n - 1] - 10.0 * u[n - 2] + 3.0 * u[n - 3]) / 8.0
    }

    /// Second-order extrapolation of `u'(R)` without a boundary condition.
    pub fn extrapolate_deriv(&self, u: &[f64]) -> f64 {
        let n = self.n;
        (2.0 * u[n - 1] - 3.0 * u[n - 2] + u[n - 3]) / self.h
    }

    /// Midpoint rule for `int_0^R u r dr`.
    pub fn integrate_r(&self, u: &[f64]) -> f64 {
        u.iter()
            .zip(&self.centers)
            .map(|(v, r)| v * r * self.h)
            .sum()
    }

    /// Midpoint rule for `int_0^R u dr`.
    pub fn integrate(&self, u: &[f64]) -> f64 {
        u.iter().map(|v| v * self.h).sum()
    }
}

/// Solves a tridiagonal system in place; `rhs` becomes the solution.
fn thomas(sub: &[f64], diag: &mut [f64], sup: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    for i in 1..n {
        if diag[i - 1].abs() < 1e-300 {
            return Err(Error::SingularOperator("tridiagonal pivot underflow".into()));
        }
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    if diag[n - 1].abs() < 1e-300 {
        return Err(Error::SingularOperator("tridiagonal pivot underflow".into()));
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
    }
    Ok(())
}

/// Uniform periodic angular grid with spectral derivatives.
///
/// Values live on `phi_k = 2 pi k / n`, `k = 0..n`.  All model fields are
/// even in `phi`; evenness is preserved by every operation here up to
/// round-off and can be re-imposed with [`AngularGrid::symmetrize`].
pub struct AngularGrid {
    pub n: usize,
    nodes: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for AngularGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AngularGrid").field("n", &self.n).finish()
    }
}

impl Clone for AngularGrid {
    fn clone(&self) -> Self {
        AngularGrid::new(self.n).expect("clone of valid grid")
    }
}

// rustfft plans are cheap to share and planning is not free; keep a
// process-wide cache keyed by length.
fn plan_pair(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    static CACHE: Mutex<Option<HashMap<usize, (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>>> =
        Mutex::new(None);
    let mut guard = CACHE.lock().unwrap();
    let map = guard.get_or_insert_with(HashMap::new);
    map.entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

impl AngularGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::Resolution(format!(
                "angular grid needs an even number >= 8 of nodes, got {n}"
            )));
        }
        let nodes = (0..n)
            .map(|k| 2.0 * std::f64::consts::PI * k as f64 / n as f64)
            .collect();
        let (fwd, inv) = plan_pair(n);
        Ok(Self { n, nodes, fwd, inv })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn dphi(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.n as f64
    }

    fn fft(&self, values: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> =
            values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        buf
    }

    fn ifft_real(&self, mut buf: Vec<Complex<f64>>) -> Vec<f64> {
        self.inv.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    /// Cosine coefficients `a_0..a_{n/2}` with
    /// `f(phi) = a_0 + sum_j a_j cos(j phi)`.
    /// Any odd (sine) content of the input is discarded.
    pub fn cos_coeffs(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.n);
        let buf = self.fft(values);
        let half = self.n / 2;
        let scale = 1.0 / self.n as f64;
        let mut a = Vec::with_capacity(half + 1);
        a.push(buf[0].re * scale);
        for j in 1..half {
            a.push(2.0 * buf[j].re * scale);
        }
        a.push(buf[half].re * scale);
        a
    }

    /// Inverse of [`AngularGrid::cos_coeffs`].
    pub fn values_from_cos(&self, coeffs: &[f64]) -> Vec<f64> {
        let half = self.n / 2;
        assert!(coeffs.len() <= half + 1);
        let mut buf = vec![Complex::new(0.0, 0.0); self.n];
        for (j, &a) in coeffs.iter().enumerate() {
            if j == 0 {
                buf[0] = Complex::new(a, 0.0);
            } else if j == half {
                buf[half] = Complex::new(a, 0.0);
            } else {
                buf[j] = Complex::new(a / 2.0, 0.0);
                buf[self.n - j] = Complex::new(a / 2.0, 0.0);
            }
        }
        // This synthesis wants sum c_k e^{i k phi}; the inverse transform
        // supplies exactly that without the 1/n (already folded above).
        let mut out = buf;
        self.inv.process(&mut out);
        out.iter().map(|c| c.re).collect()
    }

    /// Spectral `d/dphi`.
    pub fn deriv(&self, values: &[f64]) -> Vec<f64> {
        self.deriv_order(values, 1)
    }

    /// Spectral `d^2/dphi^2`.
    pub fn deriv2(&self, values: &[f64]) -> Vec<f64> {
        self.deriv_order(values, 2)
    }

    fn deriv_order(&self, values: &[f64], order: u32) -> Vec<f64> {
        assert_eq!(values.len(), self.n);
        let mut buf = self.fft(values);
        let half = self.n / 2;
        for (k, c) in buf.iter_mut().enumerate() {
            let freq = if k <= half { k as f64 } else { k as f64 - self.n as f64 };
            // Zero the Nyquist mode for odd derivatives.
            let ik = if k == half && order % 2 == 1 {
                Complex::new(0.0, 0.0)
            } else {
                Complex::new(0.0, freq)
            };
            *c *= ik.powu(order);
        }
        self.ifft_real(buf)
    }

    pub fn mean(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() / self.n as f64
    }

    /// Trapezoid (= spectrally exact) integral over the circle.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.dphi()
    }

    /// Zeroes all modes above `2/3 * (n/2)`; the usual dealiasing rule
    /// for quadratic products.
    pub fn dealias(&self, values: &[f64]) -> Vec<f64> {
        let mut buf = self.fft(values);
        let half = self.n / 2;
        let keep = (2 * half) / 3;
        for (k, c) in buf.iter_mut().enumerate() {
            let freq = if k <= half { k } else { self.n - k };
            if freq > keep {
                *c = Complex::new(0.0, 0.0);
            }
        }
        self.ifft_real(buf)
    }

    /// Projects onto even (cosine) symmetry about the x-axis.
    pub fn symmetrize(&self, values: &mut [f64]) {
        assert_eq!(values.len(), self.n);
        for k in 1..self.n / 2 {
            let avg = 0.5 * (values[k] + values[self.n - k]);
            values[k] = avg;
            values[self.n - k] = avg;
        }
    }

    /// Max |coefficient| among sine modes; a symmetry diagnostic.
    pub fn asymmetry(&self, values: &[f64]) -> f64 {
        let buf = self.fft(values);
        let scale = 2.0 / self.n as f64;
        buf.iter()
            .take(self.n / 2 + 1)
            .map(|c| (c.im * scale).abs())
            .fold(0.0, f64::max)
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_pair(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_pair(n, x);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mode_solve_recovers_manufactured_solution() {
        // u = r^2 (R - r), n = 1: compute the exact source and solve back.
        let rr = 2.0;
        let exact = |r: f64| r * r * (rr - r);
        // (1/r)(r u')' - u/r^2 with u = R r^2 - r^3 gives 3R - 8r.
        let source_fn = |r: f64, zeta: f64| 3.0 * rr - 8.0 * r - zeta * exact(r);
        let zeta = 1.7;
        let mut errs = Vec::new();
        for n in [64usize, 128, 256] {
            let grid = RadialGrid::new(n, rr).unwrap();
            let src: Vec<f64> = grid.centers().iter().map(|&r| source_fn(r, zeta)).collect();
            let u = grid
                .solve_mode(1, zeta, &src, RadialBc::Dirichlet(exact(rr)))
                .unwrap();
            let err = u
                .iter()
                .zip(grid.centers())
                .map(|(v, &r)| (v - exact(r)).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        let order = (errs[0] / errs[2]).log2() / 2.0;
        assert!(order > 1.85, "observed order {order}, errors {errs:?}");
    }

    #[test]
    fn constant_is_exact_for_mode0_neumann() {
        let grid = RadialGrid::new(64, 1.0).unwrap();
        let zeta = 3.0;
        let c = 0.7;
        let src = vec![-zeta * c; 64];
        let u = grid.solve_mode(0, zeta, &src, RadialBc::Neumann(0.0)).unwrap();
        for v in &u {
            assert_abs_diff_eq!(*v, c, epsilon = 1e-13);
        }
        assert_abs_diff_eq!(grid.boundary_value(&u, RadialBc::Neumann(0.0)), c, epsilon = 1e-12);
    }

    #[test]
    fn neumann_mode0_without_screening_is_singular() {
        let grid = RadialGrid::new(32, 1.0).unwrap();
        let src = vec![0.0; 32];
        assert!(grid.solve_mode(0, 0.0, &src, RadialBc::Neumann(0.0)).is_err());
    }

    #[test]
    fn angular_roundtrip_and_derivatives() {
        let ang = AngularGrid::new(32).unwrap();
        let f: Vec<f64> = ang
            .nodes()
            .iter()
            .map(|&p| 1.0 + 0.5 * (2.0 * p).cos() - 0.25 * (5.0 * p).cos())
            .collect();
        let coeffs = ang.cos_coeffs(&f);
        assert_abs_diff_eq!(coeffs[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(coeffs[2], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(coeffs[5], -0.25, epsilon = 1e-14);
        let back = ang.values_from_cos(&coeffs);
        for (a, b) in back.iter().zip(&f) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-13);
        }
        let d = ang.deriv(&f);
        for (v, &p) in d.iter().zip(ang.nodes()) {
            let exact = -(2.0 * p).sin() + 1.25 * (5.0 * p).sin();
            assert_abs_diff_eq!(*v, exact, epsilon = 1e-12);
        }
        let d2 = ang.deriv2(&f);
        for (v, &p) in d2.iter().zip(ang.nodes()) {
            let exact = -2.0 * (2.0 * p).cos() + 6.25 * (5.0 * p).cos();
            assert_abs_diff_eq!(*v, exact, epsilon = 1e-11);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // degree 15 is exact for 8 nodes
        let integral: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(14)).sum();
        assert_abs_diff_eq!(integral, 2.0 / 15.0, epsilon = 1e-13);
        let total: f64 = w.iter().sum();
        assert_abs_diff_eq!(total, 2.0, epsilon = 1e-13);
    }
}
