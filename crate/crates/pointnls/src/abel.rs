//! Product-integration weights for the memory integrals of the point flow.
//!
//! The limit dynamics is driven by convolutions
//!
//! ```text
//! I(t_n) = integral_0^{t_n} U(t_n - s, delta) f(s) ds,
//!          U(tau, delta) = pref tau^{-1/2} e^{i beta / tau},
//! ```
//!
//! with `pref = (4 pi i)^{-1/2}`, `beta = delta^2 / 4`, and `f` a charge
//! history known on the uniform lattice `t_m = m dt`. The kernel has an
//! integrable inverse-square-root singularity at `s = t_n` (an Abel-type
//! Volterra kernel) and, for `delta != 0`, oscillates without bound as the
//! argument approaches zero — so generic quadrature on `f(s) K(t_n - s)` is
//! hopeless. Instead `f` is taken piecewise linear on the lattice and the
//! kernel is integrated *exactly* against it (product trapezoid rule): the
//! rule is exact for affine `f` by construction and second-order accurate
//! for smooth `f`, uniformly in the singularity.
//!
//! Every weight reduces to the subinterval moments
//!
//! ```text
//! M0 = integral_{u1}^{u2} u^{-1/2} e^{i beta/u} du,
//! M1 = integral_{u1}^{u2} u^{+1/2} e^{i beta/u} du,
//! ```
//!
//! over `[u1, u2] = [j dt, (j+1) dt]`, which depend on the lattice only
//! through the gap index `j` — one moment table per kernel distance serves
//! all rows. For `beta = 0` the moments are elementary; for `beta > 0` they
//! are evaluated by the substitution `u = beta / r^2`, which turns them into
//! Fresnel-type tail integrals handled in [`fresnel`], with a direct
//! Gauss-Legendre branch where the phase barely moves and the closed form
//! would cancel catastrophically.

use num_complex::Complex64;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// `(4 pi i)^{-1/2}`: modulus of the free kernel at unit time, with the
/// stationary-phase angle `-pi/4`.
pub fn kernel_prefactor() -> Complex64 {
    let m = 0.5 / std::f64::consts::PI.sqrt();
    Complex64::new(m * std::f64::consts::FRAC_PI_4.cos(), -m * std::f64::consts::FRAC_PI_4.sin())
}

/// Fresnel-type special functions on the half line.
///
/// Everything here reduces to `E(x) = integral_0^x e^{i t^2} dt` and the
/// tail integrals `integral_x^infty r^{-m} e^{i r^2} dr` for `m = 2, 4`.
/// Three regimes keep every evaluation at roughly machine accuracy:
/// a Taylor series for `x <= 2`, a Chebyshev fit of the smooth (phase
/// stripped) tail factor on `[2, 7]`, and an asymptotic series beyond.
pub mod fresnel {
    use super::{gauss_legendre_96, Complex64, OnceLock};

    /// `E(infinity) = sqrt(pi/8) (1 + i)`.
    pub fn e_infinity() -> Complex64 {
        let v = (std::f64::consts::PI / 8.0).sqrt();
        Complex64::new(v, v)
    }

    /// `E(x) = integral_0^x e^{i t^2} dt` for `x >= 0`.
    pub fn fresnel_e(x: f64) -> Complex64 {
        debug_assert!(x >= 0.0);
        if x <= TAYLOR_EDGE {
            return e_taylor(x);
        }
        // E = E_inf - e^{i x^2} G(x).
        let (s, c) = (x * x).sin_cos();
        e_infinity() - Complex64::new(c, s) * tail_factor(x)
    }

    /// `integral_x^infty r^{-2} e^{i r^2} dr` for `x > 0`.
    ///
    /// By parts this equals `e^{i x^2}/x + 2 i (E(infinity) - E(x))`; for
    /// `x >= 2` the tail factor absorbs the difference without cancellation.
    pub fn tail_inv_square(x: f64) -> Complex64 {
        tail_inv_square_phased(x, x * x)
    }

    /// `integral_x^infty r^{-4} e^{i r^2} dr` for `x > 0`.
    pub fn tail_inv_fourth(x: f64) -> Complex64 {
        tail_inv_fourth_phased(x, x * x)
    }

    /// [`tail_inv_square`] with the squared argument supplied directly.
    ///
    /// When the square is the primitive quantity (here `beta/u`, known to a
    /// half ulp), passing it avoids the extra phase rounding of squaring
    /// `sqrt(beta/u)` — which costs ~`phase * eps` radians and dominates the
    /// error once the phase reaches thousands of radians.
    pub fn tail_inv_square_phased(x: f64, phase: f64) -> Complex64 {
        debug_assert!(x > 0.0);
        if x >= ASYMPTOTIC_EDGE {
            return tail_asymptotic(2, x, phase);
        }
        let (s, c) = phase.sin_cos();
        let rot = Complex64::new(c, s);
        if x <= TAYLOR_EDGE {
            return rot / x + 2.0 * Complex64::i() * (e_infinity() - e_taylor(x));
        }
        rot * (1.0 / x + 2.0 * Complex64::i() * tail_factor(x))
    }

    /// [`tail_inv_fourth`] with the squared argument supplied directly.
    pub fn tail_inv_fourth_phased(x: f64, phase: f64) -> Complex64 {
        if x >= ASYMPTOTIC_EDGE {
            return tail_asymptotic(4, x, phase);
        }
        let (s, c) = phase.sin_cos();
        Complex64::new(c, s) / (3.0 * x * x * x)
            + Complex64::new(0.0, 2.0 / 3.0) * tail_inv_square_phased(x, phase)
    }

    /// `integral_x^infty r^{-p} e^{i r^2} dr` for large `x`, by repeated
    /// integration by parts:
    /// `(i/2) e^{i x^2} x^{-(p+1)} sum_k d_k x^{-2k}`, `d_0 = 1`,
    /// `d_{k+1} = d_k (-i)(p + 1 + 2k)/2`.
    ///
    /// Assembling these tails from the factor `G` instead would subtract
    /// `x^{-1}`-sized terms down to an `x^{-5}`-sized result — a cancellation
    /// of `x^4`, fatal at the small-`u` end of a weight table. The direct
    /// series has no cancellation and converges below 1e-16 for `x >= 7`.
    fn tail_asymptotic(p: u32, x: f64, phase: f64) -> Complex64 {
        let inv2 = 1.0 / (x * x);
        let mut coeff = Complex64::new(1.0, 0.0);
        let mut sum = coeff;
        for k in 0..60 {
            coeff *= Complex64::new(0.0, -0.5) * (p + 1 + 2 * k) as f64 * inv2;
            if coeff.norm() > sum.norm() {
                break; // divergent tail of the asymptotic series
            }
            sum += coeff;
            if coeff.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        let (s, c) = phase.sin_cos();
        Complex64::new(0.0, 0.5) * Complex64::new(c, s) * sum * x.powi(-(p as i32 + 1))
    }

    const TAYLOR_EDGE: f64 = 2.0;
    const ASYMPTOTIC_EDGE: f64 = 7.0;

    /// Power series `sum_n i^n x^{2n+1} / (n! (2n+1))`, accurate for small x.
    fn e_taylor(x: f64) -> Complex64 {
        let ix2 = Complex64::new(0.0, x * x);
        let mut term = Complex64::new(x, 0.0); // i^n x^{2n+1} / n!
        let mut sum = term; // n = 0 contributes term / 1
        for n in 1..60 {
            term *= ix2 / n as f64;
            let contrib = term / (2 * n + 1) as f64;
            sum += contrib;
            if contrib.norm() < 1e-18 * sum.norm().max(1e-300) {
                break;
            }
        }
        sum
    }

    /// The smooth tail factor `G(x) = (E(infinity) - E(x)) e^{-i x^2}`,
    /// which also satisfies the real-integral representation
    /// `G(x) = e^{i pi/4} integral_0^infty e^{-tau^2 - sqrt(2) x (1 - i) tau} d tau`
    /// — in particular it carries no oscillation, so a single Chebyshev fit
    /// covers `[2, 7]` to near machine precision.
    fn tail_factor(x: f64) -> Complex64 {
        if x >= ASYMPTOTIC_EDGE {
            return tail_factor_asymptotic(x);
        }
        chebyshev_eval(cheb_table(), (2.0 * x - (CHEB_LO + CHEB_HI)) / (CHEB_HI - CHEB_LO))
    }

    /// `G(x) ~ sum_k c_k x^{-(2k+1)}`, `c_0 = i/2`,
    /// `c_{k+1} = c_k * (-i/2) (2k+1)`; terms shrink until `2k+1 ~ 2x^2`.
    fn tail_factor_asymptotic(x: f64) -> Complex64 {
        let inv2 = 1.0 / (x * x);
        let mut coeff = Complex64::new(0.0, 0.5);
        let mut power = 1.0 / x;
        let mut sum = coeff * power;
        for k in 0..60 {
            coeff *= Complex64::new(0.0, -0.5) * (2 * k + 1) as f64;
            power *= inv2;
            let term = coeff * power;
            if term.norm() > sum.norm() {
                break; // divergent tail of the asymptotic series
            }
            sum += term;
            if term.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        sum
    }

    const CHEB_LO: f64 = 2.0;
    const CHEB_HI: f64 = 7.0;
    const CHEB_N: usize = 48;

    fn cheb_table() -> &'static [Complex64] {
        static TABLE: OnceLock<Vec<Complex64>> = OnceLock::new();
        TABLE.get_or_init(|| {
            // Sample G at Chebyshev points via the decaying real-integral
            // representation, then take the discrete cosine transform.
            let samples: Vec<Complex64> = (0..CHEB_N)
                .map(|i| {
                    let theta = std::f64::consts::PI * (i as f64 + 0.5) / CHEB_N as f64;
                    let x = 0.5 * (CHEB_LO + CHEB_HI) + 0.5 * (CHEB_HI - CHEB_LO) * theta.cos();
                    tail_factor_quadrature(x)
                })
                .collect();
            (0..CHEB_N)
                .map(|k| {
                    let mut c = Complex64::new(0.0, 0.0);
                    for (i, g) in samples.iter().enumerate() {
                        let theta = std::f64::consts::PI * (i as f64 + 0.5) / CHEB_N as f64;
                        c += g * (k as f64 * theta).cos();
                    }
                    c * 2.0 / CHEB_N as f64
                })
                .collect()
        })
    }

    /// Direct evaluation of the real-integral representation of `G` by
    /// Gauss-Legendre on the truncated decay range (init-time only).
    fn tail_factor_quadrature(x: f64) -> Complex64 {
        let (nodes, weights) = gauss_legendre_96();
        let rate = std::f64::consts::SQRT_2 * x;
        // Truncate where tau^2 + rate*tau >= 42 (integrand below e^{-42}).
        let tau_max = 0.5 * (-rate + (rate * rate + 168.0).sqrt());
        let mut sum = Complex64::new(0.0, 0.0);
        for (t, w) in nodes.iter().zip(weights) {
            let tau = 0.5 * tau_max * (t + 1.0);
            let damp = (-tau * tau - rate * tau).exp();
            let (s, c) = (rate * tau).sin_cos();
            sum += w * damp * Complex64::new(c, s);
        }
        sum *= 0.5 * tau_max;
        let eighth = std::f64::consts::FRAC_PI_4 / 2.0;
        sum * Complex64::new((2.0 * eighth).cos(), (2.0 * eighth).sin())
    }

    /// Clenshaw evaluation of `sum_k c_k T_k(t) - c_0 / 2`.
    fn chebyshev_eval(coeffs: &[Complex64], t: f64) -> Complex64 {
        let mut b1 = Complex64::new(0.0, 0.0);
        let mut b2 = Complex64::new(0.0, 0.0);
        for &c in coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + 0.5 * coeffs[0]
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton on the Legendre
/// recurrence; standard textbook construction, computed once).
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0f64;
            let mut p1 = 0.0f64;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * x * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (x * p0 - p1) / (x * x - 1.0);
            let dx = p0 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        weights[i] = w;
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gauss_legendre_24() -> (&'static [f64], &'static [f64]) {
    static T: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (n, w) = T.get_or_init(|| gauss_legendre(24));
    (n, w)
}

fn gauss_legendre_96() -> (&'static [f64], &'static [f64]) {
    static T: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (n, w) = T.get_or_init(|| gauss_legendre(96));
    (n, w)
}

/// Subinterval moments `(M0, M1)` for `beta > 0`.
///
/// When the phase `beta/u` moves by no more than ~1 radian across the
/// subinterval (and the singular endpoint is absent), the integrand is
/// nearly monochromatic and direct Gauss-Legendre is both cheap and exact
/// to machine precision — while the Fresnel-difference form would subtract
/// nearly equal tails. Otherwise the substitution `u = beta / r^2` maps the
/// moments onto tail integrals evaluated in [`fresnel`].
fn moments(beta: f64, u1: f64, u2: f64) -> (Complex64, Complex64) {
    debug_assert!(beta > 0.0 && u2 > u1 && u1 >= 0.0);
    if u1 > 0.0 && beta * (u2 - u1) / (u1 * u2) <= 1.0 {
        let (nodes, weights) = gauss_legendre_24();
        let c = 0.5 * (u1 + u2);
        let half = 0.5 * (u2 - u1);
        let mut m0 = Complex64::new(0.0, 0.0);
        let mut m1 = Complex64::new(0.0, 0.0);
        for (t, w) in nodes.iter().zip(weights) {
            let u = c + half * t;
            let (s, cc) = (beta / u).sin_cos();
            let phase = Complex64::new(cc, s);
            let root = u.sqrt();
            m0 += w * phase / root;
            m1 += w * phase * root;
        }
        return (m0 * half, m1 * half);
    }
    // Feed each tail the ratio beta/u as the phase directly: it is exact to
    // a half ulp, whereas squaring its square root would re-round the phase
    // (thousands of radians at small u) and swamp the value's last digits.
    let p_lo = beta / u2;
    let r_lo = p_lo.sqrt();
    let mut d2 = fresnel::tail_inv_square_phased(r_lo, p_lo);
    let mut d4 = fresnel::tail_inv_fourth_phased(r_lo, p_lo);
    if u1 > 0.0 {
        let p_hi = beta / u1;
        let r_hi = p_hi.sqrt();
        d2 -= fresnel::tail_inv_square_phased(r_hi, p_hi);
        d4 -= fresnel::tail_inv_fourth_phased(r_hi, p_hi);
    }
    let root = beta.sqrt();
    (2.0 * root * d2, 2.0 * beta * root * d4)
}

/// Precomputed product-trapezoid weights for one kernel distance.
///
/// For a row `n` (the integral up to `t_n`), the weight of `f(t_m)` is
/// assembled from the two one-sided contributions of the subintervals
/// adjacent to `t_m`; only the gap index `j = n - m - 1` enters, so the
/// table is shared by every row.
#[derive(Debug, Clone)]
pub struct MemoryKernel {
    dt: f64,
    delta: f64,
    /// `a[j]`: weight of the left node of a subinterval at gap `j`.
    a: Vec<Complex64>,
    /// `b[j]`: weight of the right node of a subinterval at gap `j`.
    b: Vec<Complex64>,
}

impl MemoryKernel {
    /// Builds weight tables covering rows `1..=max_steps`.
    pub fn new(dt: f64, delta: f64, max_steps: usize) -> Result<Self> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::BadParameter { name: "dt", value: dt });
        }
        if !delta.is_finite() {
            return Err(Error::BadParameter { name: "delta", value: delta });
        }
        if max_steps == 0 {
            return Err(Error::BadParameter { name: "max_steps", value: 0.0 });
        }
        let beta = 0.25 * delta * delta;
        let pref = kernel_prefactor();
        let mut a = Vec::with_capacity(max_steps);
        let mut b = Vec::with_capacity(max_steps);
        for j in 0..max_steps {
            let u1 = j as f64 * dt;
            let u2 = (j + 1) as f64 * dt;
            if beta == 0.0 {
                // Elementary moments, arranged to avoid subtracting nearly
                // equal square roots at large j:
                //   a = pref * 2 (u2 + sqrt(u1 u2) - 2 u1) / (3 (sqrt(u2)+sqrt(u1)))
                //   b = pref * 2 (2 u2 - sqrt(u1 u2) - u1) / (3 (sqrt(u2)+sqrt(u1)))
                let s1 = u1.sqrt();
                let s2 = u2.sqrt();
                let scale = 2.0 / (3.0 * (s1 + s2));
                a.push(pref * (scale * (u2 + s1 * s2 - 2.0 * u1)));
                b.push(pref * (scale * (2.0 * u2 - s1 * s2 - u1)));
            } else {
                let (m0, m1) = moments(beta, u1, u2);
                a.push(pref * (m1 - u1 * m0) / dt);
                b.push(pref * (u2 * m0 - m1) / dt);
            }
        }
        Ok(MemoryKernel { dt, delta, a, b })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Largest row index the tables cover.
    pub fn max_steps(&self) -> usize {
        self.a.len()
    }

    /// Weight multiplying the newest sample `f(t_n)` in row `n` (independent
    /// of `n`): the implicit part of the convolution.
    pub fn diagonal(&self) -> Complex64 {
        self.b[0]
    }

    /// Weight of `f(t_m)` in row `n`; requires `1 <= n <= max_steps`, `m <= n`.
    pub fn weight(&self, n: usize, m: usize) -> Complex64 {
        assert!(n >= 1 && n <= self.a.len() && m <= n);
        if m == n {
            self.b[0]
        } else if m == 0 {
            self.a[n - 1]
        } else {
            self.a[n - 1 - m] + self.b[n - m]
        }
    }

    /// Explicit part of row `n`: `sum_{m < n} w_{n,m} f(t_m)`, where `past`
    /// holds `f(t_0) ..= f(t_{n-1})`.
    pub fn past_sum(&self, past: &[Complex64]) -> Complex64 {
        let n = past.len();
        assert!(n <= self.a.len());
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, q) in past.iter().enumerate() {
            acc += q * self.a[n - 1 - m];
        }
        for (m, q) in past.iter().enumerate().skip(1) {
            acc += q * self.b[n - m];
        }
        acc
    }

    /// Full row `n` including the diagonal: `values` holds `f(t_0) ..= f(t_n)`.
    /// Row `n = 0` is the empty integral.
    pub fn full_sum(&self, values: &[Complex64]) -> Complex64 {
        let n = values.len() - 1;
        if n == 0 {
            return Complex64::new(0.0, 0.0);
        }
        self.past_sum(&values[..n]) + self.b[0] * values[n]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Frozen by independent 40-digit computation (complex-error-function
    /// identity cross-checked against contour-rotated adaptive quadrature).
    #[test]
    fn fresnel_e_matches_multiprecision_values() {
        let cases = [
            (0.5, c(0.49688402921479471475, 0.041481024268547481599)),
            (1.5, c(0.89918485288747861246, 0.77823780430680859961)),
            (2.0, c(0.46146146243321637287, 0.8047764893437561103)),
            (3.7, c(0.74594330963661879385, 0.56407940404460080614)),
            (5.5, c(0.5425759914773161918, 0.59225271880746179992)),
            (6.9, c(0.59348561295267171675, 0.69106023971649177022)),
            (7.0, c(0.55833433186097141836, 0.60588693162782710544)),
            (12.0, c(0.60607256397485961285, 0.59043159874927992502)),
            (50.0, c(0.62015427455283791311, 0.61906011868890412714)),
        ];
        for (x, want) in cases {
            let got = fresnel::fresnel_e(x);
            assert!(
                (got - want).norm() < 2e-15,
                "E({x}): got {got}, want {want}, gap {:.2e}",
                (got - want).norm()
            );
        }
    }

    #[test]
    fn tail_integral_matches_multiprecision_values() {
        let cases = [
            (0.5, c(0.76747275464288428028, 0.75435399739495668091)),
            (2.0, c(0.029417030940206012065, -0.048010035204896620211)),
            (3.7, c(-0.0082870123800201795943, 0.0051236721142602879982)),
            (7.0, c(0.0014015179035306859086, 0.00039509462791858328853)),
            (20.0, c(0.000053058104038727930681, -0.000033029675083871272023)),
        ];
        for (x, want) in cases {
            let got = fresnel::tail_inv_square(x);
            // The Chebyshev-interpolated middle branch carries a ~2e-15
            // roundoff floor from accumulating 96-point quadrature samples
            // into 48 cosine coefficients; the tolerance sits just above it.
            assert!(
                (got - want).norm() < 1e-15 + 5e-13 * want.norm(),
                "tail({x}): got {got}, want {want}, gap {:.2e}",
                (got - want).norm()
            );
        }
    }

    #[test]
    fn fresnel_branches_join_smoothly() {
        // Straddle each branch switch and compare the actual step against
        // the first-order prediction d/dx I2 = -e^{i x^2} / x^2; the O(delta^2)
        // Taylor remainder is ~5e-18, so any excess is branch disagreement.
        for edge in [2.0f64, 7.0] {
            let delta = 1e-9;
            let lo = fresnel::tail_inv_square(edge - delta);
            let hi = fresnel::tail_inv_square(edge + delta);
            let (s, c2) = (edge * edge).sin_cos();
            let predicted = -2.0 * delta * Complex64::new(c2, s) / (edge * edge);
            assert!(
                ((hi - lo) - predicted).norm() < 1e-14,
                "branch mismatch at {edge}: step {} vs predicted {predicted}",
                hi - lo
            );
        }
    }

    #[test]
    fn moments_match_multiprecision_values() {
        // (beta, j, M0, M1) at dt = 2.5e-4, frozen from independent
        // 40-digit contour quadrature.
        let dt = 2.5e-4;
        let cases = [
            (1.0, 0, c(2.7007033266208754634e-6, -2.8863811970409377439e-6),
                     c(6.749952853304604992e-10, -7.2176393518749306224e-10)),
            (1.0, 1, c(-0.00001310193258181005797, -1.2141390040093844213e-6),
                     c(-5.8766304880509406448e-9, -1.3258940752734880336e-9)),
            (1.0, 40, c(-0.00035766982456900357626, -0.0018792184451801097275),
                      c(-3.7279049054030302002e-6, -0.000019006664124141097906)),
            (1.0, 400, c(-0.00066822383553475620107, -0.00042150269912578536327),
                       c(-0.000066906113141251203868, -0.000042202599618806614976)),
            (1.0, 1999, c(-0.00014730931935583079397, 0.00032145172852275639662),
                        c(-0.000073636238545306926367, 0.00016068568419114594912)),
            (0.25, 0, c(-0.000013060726592003070807, 8.911571601695522306e-6),
                      c(-3.2629423657380946814e-9, 2.2311502283595621567e-9)),
            (0.25, 7, c(-0.000067721810329550512025, 0.00030712293268668524791),
                      c(-5.7790034936816998126e-8, 6.0710107720755359028e-7)),
            (9.0, 1200, c(0.000064751676612648012117, -0.0004517111526660478138),
                        c(0.000019433361308785934473, -0.00013556983947173050375)),
            (1e-6, 0, c(0.029116232654408876903, 0.002380137235686158763),
                      c(2.6336235434935666681e-6, 2.9951719194388245955e-8)),
            (1e-6, 3, c(0.0084732917649606444567, 9.7841189111554187729e-6),
                      c(7.3887822381000322578e-6, 8.4732955568874444898e-9)),
        ];
        // Tolerance floor: the phase beta/u is known only to a half ulp, and
        // at j = 0, beta = 1 it reaches 4000 radians, so the value of
        // e^{i beta/u} — hence the moment — carries ~4e-13 of irreducible
        // relative rounding regardless of how the tail is evaluated.
        for (beta, j, want0, want1) in cases {
            let u1 = j as f64 * dt;
            let u2 = (j + 1) as f64 * dt;
            let (m0, m1) = moments(beta, u1, u2);
            let scale0 = want0.norm().max(1e-6);
            let scale1 = want1.norm().max(1e-10);
            assert!(
                (m0 - want0).norm() < 2e-12 * scale0,
                "M0(beta={beta}, j={j}): got {m0}, want {want0}, rel {:.2e}",
                (m0 - want0).norm() / scale0
            );
            assert!(
                (m1 - want1).norm() < 2e-12 * scale1,
                "M1(beta={beta}, j={j}): got {m1}, want {want1}, rel {:.2e}",
                (m1 - want1).norm() / scale1
            );
        }
    }

    #[test]
    fn coincident_rows_reproduce_the_closed_forms() {
        // Exactness of the product rule for affine densities, checked against
        //   f = 1: I(t) = pref 2 sqrt(t)       = e^{-i pi/4} sqrt(t / pi)
        //   f = s: I(t) = pref (4/3) t^{3/2}   = e^{-i pi/4} (4 pi)^{-1/2} (4/3) t^{3/2}
        let dt = 2.5e-4;
        let kernel = MemoryKernel::new(dt, 0.0, 2000).unwrap();
        let pref = kernel_prefactor();
        for n in [1usize, 7, 100, 2000] {
            let t = n as f64 * dt;
            let ones: Vec<Complex64> = vec![c(1.0, 0.0); n + 1];
            let got = kernel.full_sum(&ones);
            let want = pref * 2.0 * t.sqrt();
            assert_relative_eq!(got.re, want.re, max_relative = 1e-12);
            assert_relative_eq!(got.im, want.im, max_relative = 1e-12);

            let ramp: Vec<Complex64> = (0..=n).map(|m| c(m as f64 * dt, 0.0)).collect();
            let got = kernel.full_sum(&ramp);
            let want = pref * (4.0 / 3.0) * t.powf(1.5);
            assert_relative_eq!(got.re, want.re, max_relative = 1e-12);
            assert_relative_eq!(got.im, want.im, max_relative = 1e-12);
        }
    }

    #[test]
    fn smooth_density_converges_at_second_order() {
        // f(s) = e^{is}, T = 0.5; reference values from independent
        // 40-digit contour quadrature of the full memory integral.
        let t_end = 0.5;
        for (delta, want) in [
            (0.0, c(0.35495688499433070449, -0.17221292698909890117)),
            (2.0, c(-0.051295809734721060392, 0.047971951551907829724)), // beta = 1
        ] {
            let err_at = |steps: usize| -> f64 {
                let dt = t_end / steps as f64;
                let kernel = MemoryKernel::new(dt, delta, steps).unwrap();
                let f: Vec<Complex64> = (0..=steps)
                    .map(|m| {
                        let (s, c) = (m as f64 * dt).sin_cos();
                        Complex64::new(c, s)
                    })
                    .collect();
                (kernel.full_sum(&f) - want).norm()
            };
            let coarse = err_at(500);
            let fine = err_at(1000);
            assert!(
                coarse / fine > 3.5 && fine < 1e-6,
                "delta={delta}: errors {coarse:.3e} -> {fine:.3e}"
            );
        }
    }

    #[test]
    fn row_sums_agree_with_explicit_weights() {
        let kernel = MemoryKernel::new(1e-3, 1.3, 40).unwrap();
        let values: Vec<Complex64> =
            (0..=17).map(|m| c((m as f64 * 0.3).cos(), (m as f64 * 0.17).sin())).collect();
        let n = 17;
        let mut explicit = Complex64::new(0.0, 0.0);
        for (m, q) in values.iter().enumerate() {
            explicit += q * kernel.weight(n, m);
        }
        let fast = kernel.full_sum(&values);
        assert!((fast - explicit).norm() < 1e-15, "{fast} vs {explicit}");
        let past = kernel.past_sum(&values[..n]);
        assert!((fast - past - kernel.diagonal() * values[n]).norm() < 1e-16);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(MemoryKernel::new(0.0, 1.0, 10).is_err());
        assert!(MemoryKernel::new(1e-3, f64::NAN, 10).is_err());
        assert!(MemoryKernel::new(1e-3, 1.0, 0).is_err());
    }
}
