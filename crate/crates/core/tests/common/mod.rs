//! Shared oracles for the integration suites. Everything here is an
//! independent route to the quantities the library computes: the
//! chi-square upper tail is evaluated by adaptive quadrature of the
//! density (after substituting x = t^2, which removes the dof = 1
//! singularity), with the gamma normalization taken from the exact
//! factorial and double-factorial identities for half-integer arguments.

/// Gamma(dof / 2) computed exactly from factorials: integer arguments use
/// (k - 1)!, half-integer arguments use (2k)! sqrt(pi) / (4^k k!).
pub fn gamma_of_half(dof: usize) -> f64 {
    assert!(dof >= 1);
    let factorial = |n: usize| -> f64 { (1..=n).map(|i| i as f64).product() };
    if dof.is_multiple_of(2) {
        factorial(dof / 2 - 1)
    } else {
        let k = dof / 2;
        factorial(2 * k) * std::f64::consts::PI.sqrt() / (4f64.powi(k as i32) * factorial(k))
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let c = 0.5 * (a + b);
    let d = 0.5 * (a + c);
    let e = 0.5 * (c + b);
    let (fd, fe) = (f(d), f(e));
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, c, fa, fc, fd, left, tol / 2.0, depth - 1)
            + simpson_rec(f, c, b, fc, fb, fe, right, tol / 2.0, depth - 1)
    }
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let c = 0.5 * (a + b);
    let (fa, fb, fc) = (f(a), f(b), f(c));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    simpson_rec(&f, a, b, fa, fb, fc, whole, tol, 60)
}

/// Upper-tail chi-square probability by direct quadrature of the density.
pub fn chi_square_p_oracle(statistic: f64, dof: usize) -> f64 {
    if statistic <= 0.0 {
        return 1.0;
    }
    let a = dof as f64 / 2.0;
    let norm = 2f64.powf(a) * gamma_of_half(dof);
    // x = t^2 turns x^(a-1) dx into 2 t^(dof-1) dt, smooth at 0 for all dof.
    let integrand = move |t: f64| 2.0 * t.powi(dof as i32 - 1) * (-t * t / 2.0).exp() / norm;
    let mass = integrate(integrand, 0.0, statistic.sqrt(), 1e-11);
    (1.0 - mass).clamp(0.0, 1.0)
}
