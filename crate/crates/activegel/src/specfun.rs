//! Modified Bessel functions of the first kind, their derivatives, and
//! zeros of `J_n'`.  These back the closed forms used by the stability
//! criterion, the `Q` functional and the bifurcation function, and the
//! Neumann-Laplacian eigenvalues entering the hypothesis checks.
//!
//! `I_n` uses the ascending series (all terms positive, so no
//! cancellation) below the seam and the large-argument expansion above
//! it for low orders; the two branches agree to better than 1e-11 at
//! the seam, which is pinned by a unit test.

use crate::{Error, Result};

/// Seam between the ascending series and the asymptotic branch.
const ASYMPTOTIC_SEAM: f64 = 20.0;

/// Value and derivative of `I_n` at one argument.
#[derive(Debug, Clone, Copy)]
pub struct BesselEval {
    pub order: u32,
    pub argument: f64,
    pub value: f64,
    pub derivative: f64,
}

/// Evaluates both `I_n(x)` and `I_n'(x)`.
pub fn bessel_i_eval(order: u32, x: f64) -> Result<BesselEval> {
    Ok(BesselEval {
        order,
        argument: x,
        value: bessel_i(order, x)?,
        derivative: bessel_i_prime(order, x)?,
    })
}

/// Modified Bessel function `I_n(x)` for `x >= 0`.
pub fn bessel_i(order: u32, x: f64) -> Result<f64> {
    if x < 0.0 {
        return Err(Error::Domain(format!("bessel_i needs x >= 0, got {x}")));
    }
    if x >= ASYMPTOTIC_SEAM && order <= 2 {
        Ok(bessel_i_asymptotic(order, x))
    } else {
        Ok(bessel_i_series(order, x))
    }
}

/// `I_n'(x)` via the identity `I_n' = (I_{n-1} + I_{n+1}) / 2`
/// (with `I_{-1} = I_1`).
pub fn bessel_i_prime(order: u32, x: f64) -> Result<f64> {
    if x < 0.0 {
        return Err(Error::Domain(format!("bessel_i_prime needs x >= 0, got {x}")));
    }
    let lower = if order == 0 { bessel_i(1, x)? } else { bessel_i(order - 1, x)? };
    let upper = bessel_i(order + 1, x)?;
    Ok(0.5 * (lower + upper))
}

fn bessel_i_series(order: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    let half = 0.5 * x;
    // t_0 = (x/2)^n / n!
    let mut term = 1.0;
    for k in 1..=order {
        term *= half / k as f64;
    }
    let q = half * half;
    let mut sum = term;
    let mut k = 0u32;
    loop {
        k += 1;
        term *= q / (k as f64 * (k + order) as f64);
        sum += term;
        if term < sum * 1e-17 || k > 400 {
            break;
        }
    }
    sum
}

fn bessel_i_asymptotic(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..40 {
        let kf = k as f64;
        term *= -(mu - (2.0 * kf - 1.0).powi(2)) / (8.0 * x * kf);
        if term.abs() >= prev {
            break;
        }
        prev = term.abs();
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    x.exp() / (2.0 * std::f64::consts::PI * x).sqrt() * sum
}

/// Bessel function of the first kind `J_n(x)`; ascending series below
/// `x = 12`, Miller's downward recurrence above (avoids the cancellation
/// that ruins the alternating series at large argument).
pub fn bessel_j(order: u32, x: f64) -> Result<f64> {
    if x < 0.0 {
        return Err(Error::Domain(format!("bessel_j needs x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(if order == 0 { 1.0 } else { 0.0 });
    }
    if x <= 12.0 {
        Ok(bessel_j_series(order, x))
    } else {
        Ok(bessel_j_miller(order, x))
    }
}

fn bessel_j_series(order: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=order {
        term *= half / k as f64;
    }
    let q = half * half;
    let mut sum = term;
    let mut k = 0u32;
    loop {
        k += 1;
        term *= -q / (k as f64 * (k + order) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-30) || k > 400 {
            break;
        }
    }
    sum
}

fn bessel_j_miller(order: u32, x: f64) -> f64 {
    let start = (x as usize + 20).max(order as usize + 20);
    let start = start + start % 2; // even start index
    let mut b_hi = 0.0_f64;
    let mut b_cur = 1e-30_f64;
    let mut norm = 0.0;
    let mut result = 0.0;
    for k in (0..=start).rev() {
        let b_lo = 2.0 * (k as f64 + 1.0) / x * b_cur - b_hi;
        b_hi = b_cur;
        b_cur = b_lo;
        if k % 2 == 0 {
            norm += if k == 0 { b_cur } else { 2.0 * b_cur };
        }
        if k == order as usize {
            result = b_cur;
        }
        if b_cur.abs() > 1e280 {
            b_cur *= 1e-280;
            b_hi *= 1e-280;
            norm *= 1e-280;
            result *= 1e-280;
        }
    }
    result / norm
}

/// `J_n'(x) = (J_{n-1} - J_{n+1}) / 2` (with `J_{-1} = -J_1`).
pub fn bessel_j_prime(order: u32, x: f64) -> Result<f64> {
    let lower = if order == 0 {
        -bessel_j(1, x)?
    } else {
        bessel_j(order - 1, x)?
    };
    let upper = bessel_j(order + 1, x)?;
    Ok(0.5 * (lower - upper))
}

/// `index`-th positive zero of `J_order'` (`index >= 1`).
///
/// Zeros are bracketed by a sign-change scan (consecutive zeros are more
/// than two units apart, so a 0.05 step cannot skip one) and polished by
/// bisection to 1e-12.
pub fn besselj_prime_zero(order: u32, index: u32) -> Result<f64> {
    if index == 0 {
        return Err(Error::Parameter("zero index starts at 1".into()));
    }
    let step = 0.05;
    let mut x_prev = 1e-6;
    let mut f_prev = bessel_j_prime(order, x_prev)?;
    let mut found = 0u32;
    let mut x = x_prev;
    let x_cap = 60.0 + 2.0 * order as f64 + 4.0 * index as f64;
    while x < x_cap {
        x += step;
        let f = bessel_j_prime(order, x)?;
        if f_prev == 0.0 {
            found += 1;
            if found == index {
                return Ok(x_prev);
            }
        } else if f_prev.signum() != f.signum() {
            found += 1;
            if found == index {
                return bisect(|t| bessel_j_prime(order, t).unwrap(), x_prev, x);
            }
        }
        x_prev = x;
        f_prev = f;
    }
    Err(Error::Domain(format!(
        "zero {index} of J_{order}' not found below {x_cap}"
    )))
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 || hi - lo < 1e-13 {
            return Ok(mid);
        }
        if f_lo.signum() == f_mid.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Independent 40-term ascending-series oracle for I_1.
    fn i1_series_oracle(x: f64) -> f64 {
        let mut sum = 0.0;
        let mut fact_k = 1.0_f64;
        for k in 0..40u32 {
            if k > 0 {
                fact_k *= k as f64;
            }
            let fact_k1 = fact_k * (k + 1) as f64;
            sum += (0.5 * x).powi(2 * k as i32 + 1) / (fact_k * fact_k1);
        }
        sum
    }

    #[test]
    fn series_constants() {
        assert_eq!(bessel_i(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_i(1, 0.0).unwrap(), 0.0);
        assert_eq!(bessel_i_prime(0, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(bessel_i_prime(1, 0.0).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn i1_matches_series_oracle() {
        let v = bessel_i(1, 1.0).unwrap();
        assert_abs_diff_eq!(v, i1_series_oracle(1.0), epsilon = 1e-14);
        assert_abs_diff_eq!(v, 0.5651591039924851, epsilon = 1e-12);
        for &x in &[0.3, 2.5, 7.0, 12.0] {
            assert_abs_diff_eq!(
                bessel_i(1, x).unwrap(),
                i1_series_oracle(x),
                epsilon = 1e-12 * i1_series_oracle(x).max(1.0)
            );
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        // Richardson-extrapolated central difference, base step 1e-5.
        for &(n, x) in &[(1u32, 2.0), (0u32, 1.3), (2u32, 4.0)] {
            let h = 1e-5;
            let d = |step: f64| {
                (bessel_i(n, x + step).unwrap() - bessel_i(n, x - step).unwrap()) / (2.0 * step)
            };
            let fd = (4.0 * d(h / 2.0) - d(h)) / 3.0;
            assert_abs_diff_eq!(bessel_i_prime(n, x).unwrap(), fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn three_term_recurrence_residual() {
        // |I_{n-1}(x) - I_{n+1}(x) - (2n/x) I_n(x)| < 1e-10 relative to I_{n-1}
        let mut x = 0.1;
        while x <= 20.0 {
            for n in 1..=6u32 {
                let lo = bessel_i(n - 1, x).unwrap();
                let hi = bessel_i(n + 1, x).unwrap();
                let mid = bessel_i(n, x).unwrap();
                let resid = (lo - hi - 2.0 * n as f64 / x * mid).abs();
                assert!(
                    resid < 1e-10 * lo.max(1.0),
                    "recurrence residual {resid} at n={n}, x={x}"
                );
            }
            x += 0.7;
        }
    }

    #[test]
    fn bessel_i_monotone_in_x() {
        for n in 0..=8u32 {
            let mut prev = bessel_i(n, 0.05).unwrap();
            let mut x = 0.3;
            while x <= 30.0 {
                let v = bessel_i(n, x).unwrap();
                assert!(v > prev, "I_{n} not increasing at x={x}");
                prev = v;
                x += 0.25;
            }
        }
    }

    #[test]
    fn finite_for_order_up_to_8() {
        for n in 0..=8u32 {
            for &x in &[0.0, 1.0, 10.0, 25.0, 50.0] {
                assert!(bessel_i(n, x).unwrap().is_finite());
            }
        }
    }

    #[test]
    fn seam_agreement() {
        // Series and asymptotic branch agree to 1e-11 at the seam.
        for n in 0..=2u32 {
            let series = bessel_i_series(n, ASYMPTOTIC_SEAM);
            let asym = bessel_i_asymptotic(n, ASYMPTOTIC_SEAM);
            assert!(
                ((series - asym) / series).abs() < 1e-11,
                "seam mismatch for n={n}: {series} vs {asym}"
            );
        }
    }

    #[test]
    fn negative_argument_rejected() {
        assert!(bessel_i(0, -1.0).is_err());
        assert!(bessel_i_prime(1, -0.5).is_err());
    }

    #[test]
    fn jprime_zeros_match_bisection_oracle() {
        // Frozen from the scan+bisection oracle on the ascending series.
        assert_abs_diff_eq!(besselj_prime_zero(1, 1).unwrap(), 1.8411837813406593, epsilon = 1e-9);
        assert_abs_diff_eq!(besselj_prime_zero(2, 1).unwrap(), 3.0542369282271403, epsilon = 1e-9);
        // J_0' = -J_1, so the first zero is j_{1,1}.
        assert_abs_diff_eq!(besselj_prime_zero(0, 1).unwrap(), 3.8317059702075125, epsilon = 1e-9);
    }

    #[test]
    fn jprime_zero_residual_and_ordering() {
        for n in 0..=3u32 {
            let mut prev = 0.0;
            for k in 1..=3u32 {
                let z = besselj_prime_zero(n, k).unwrap();
                assert!(z > prev, "zeros of J_{n}' not increasing at k={k}");
                let resid = bessel_j_prime(n, z).unwrap().abs();
                assert!(resid < 1e-10, "J_{n}'({z}) = {resid}");
                prev = z;
            }
        }
    }

    #[test]
    fn miller_matches_series_at_crossover() {
        for n in 0..=8u32 {
            let s = bessel_j_series(n, 12.0);
            let m = bessel_j_miller(n, 12.0);
            assert_abs_diff_eq!(s, m, epsilon = 1e-11);
        }
    }
}
