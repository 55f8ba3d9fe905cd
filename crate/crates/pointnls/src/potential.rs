//! Potential profiles `V` and their integral moments.
//!
//! A defect is built from a profile `V` squeezed to width `eps`:
//! `(1/eps) V(x/eps)`. As `eps` shrinks, the squeezed bump converges to a
//! point coupling whose strength is `alpha = integral of V` — which is why
//! the moments computed here, not any hand-entered constant, define the
//! limit dynamics. The first absolute moment `integral of |x| V(x)` controls
//! how fast that limit is approached, so it is reported alongside.
//!
//! Closed-form profiles are truncated where their tails fall below roughly
//! `2e-10` of the peak ([`GAUSSIAN_SUPPORT_WIDTHS`]); this makes every
//! profile compactly supported, so "do two squeezed defects overlap?" is a
//! sharp question rather than a tolerance judgement.

use crate::error::{Error, Result};

/// Gaussian-type tails are cut at this many widths from the bump center.
///
/// `exp(-4.75^2) ~ 1.6e-10`, so the dropped mass is far below every
/// tolerance used by the solvers, while defects squeezed to `eps <= 0.2`
/// with unit-width profiles and unit separation keep disjoint supports.
pub const GAUSSIAN_SUPPORT_WIDTHS: f64 = 4.75;

/// Intervals used by the composite Simpson rule on closed-form profiles.
const QUADRATURE_INTERVALS: usize = 16384;

/// Shape of a potential profile.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileKind {
    /// `a * exp(-(x/w)^2)`, truncated at `|x| = 4.75 w`.
    Gaussian { amplitude: f64, width: f64 },
    /// `a` on `[-w/2, w/2]`, zero elsewhere.
    Box { amplitude: f64, width: f64 },
    /// Two Gaussian bumps `a * exp(-((x -/+ s/2)/w)^2)` centered at `+/- s/2`.
    DoubleWell { amplitude: f64, width: f64, separation: f64 },
    /// Explicit samples on the profile's own uniform grid
    /// `x_i = start + i * step`; linear interpolation in between, zero outside.
    Samples { start: f64, step: f64, values: Vec<f64> },
}

/// A validated profile with its integral moments precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialProfile {
    kind: ProfileKind,
    alpha: f64,
    abs_first_moment: f64,
    sup: f64,
    negative_part: bool,
}

impl PotentialProfile {
    pub fn new(kind: ProfileKind) -> Result<Self> {
        validate(&kind)?;
        let (alpha, abs_first_moment) = moments(&kind);
        let (sup, negative_part) = extremes(&kind);
        if !alpha.is_finite() || !abs_first_moment.is_finite() {
            return Err(Error::BadProfile);
        }
        Ok(PotentialProfile { kind, alpha, abs_first_moment, sup, negative_part })
    }

    /// Convenience constructor for the most common shape.
    pub fn gaussian(amplitude: f64, width: f64) -> Result<Self> {
        PotentialProfile::new(ProfileKind::Gaussian { amplitude, width })
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    /// Point value `V(x)`; exactly zero outside the support interval.
    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return 0.0;
        }
        match &self.kind {
            ProfileKind::Gaussian { amplitude, width } => {
                let u = x / width;
                amplitude * (-u * u).exp()
            }
            ProfileKind::Box { amplitude, .. } => *amplitude,
            ProfileKind::DoubleWell { amplitude, width, separation } => {
                let cut = GAUSSIAN_SUPPORT_WIDTHS * width;
                let mut v = 0.0;
                for center in [-separation / 2.0, separation / 2.0] {
                    let d = x - center;
                    if d.abs() <= cut {
                        let u = d / width;
                        v += amplitude * (-u * u).exp();
                    }
                }
                v
            }
            ProfileKind::Samples { start, step, values } => {
                let pos = (x - start) / step;
                let i = pos.floor();
                if i < 0.0 || i as usize + 1 >= values.len() {
                    // x equal to the last node still counts.
                    if (pos - (values.len() - 1) as f64).abs() < 1e-12 {
                        return *values.last().unwrap();
                    }
                    return 0.0;
                }
                let i = i as usize;
                let frac = pos - i as f64;
                values[i] * (1.0 - frac) + values[i + 1] * frac
            }
        }
    }

    /// Support interval `[lo, hi]` outside which `eval` is exactly zero.
    pub fn support(&self) -> (f64, f64) {
        match &self.kind {
            ProfileKind::Gaussian { width, .. } => {
                let r = GAUSSIAN_SUPPORT_WIDTHS * width;
                (-r, r)
            }
            ProfileKind::Box { width, .. } => (-width / 2.0, width / 2.0),
            ProfileKind::DoubleWell { width, separation, .. } => {
                let r = separation / 2.0 + GAUSSIAN_SUPPORT_WIDTHS * width;
                (-r, r)
            }
            ProfileKind::Samples { start, step, values } => {
                (*start, start + step * (values.len() - 1) as f64)
            }
        }
    }

    /// Coupling strength `alpha = integral of V`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// First absolute moment `integral of |x| V(x)`.
    pub fn abs_first_moment(&self) -> f64 {
        self.abs_first_moment
    }

    /// Largest value of `|V|`.
    pub fn sup_norm(&self) -> f64 {
        self.sup
    }

    /// Whether `V` dips below zero anywhere.
    pub fn has_negative_part(&self) -> bool {
        self.negative_part
    }
}

fn validate(kind: &ProfileKind) -> Result<()> {
    let finite = |v: f64, name: &'static str| -> Result<f64> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::BadParameter { name, value: v })
        }
    };
    match kind {
        ProfileKind::Gaussian { amplitude, width }
        | ProfileKind::Box { amplitude, width } => {
            finite(*amplitude, "amplitude")?;
            finite(*width, "width")?;
            if *width <= 0.0 {
                return Err(Error::BadParameter { name: "width", value: *width });
            }
        }
        ProfileKind::DoubleWell { amplitude, width, separation } => {
            finite(*amplitude, "amplitude")?;
            finite(*width, "width")?;
            finite(*separation, "separation")?;
            if *width <= 0.0 {
                return Err(Error::BadParameter { name: "width", value: *width });
            }
            if *separation < 0.0 {
                return Err(Error::BadParameter { name: "separation", value: *separation });
            }
        }
        ProfileKind::Samples { start, step, values } => {
            finite(*start, "start")?;
            finite(*step, "step")?;
            if *step <= 0.0 {
                return Err(Error::BadParameter { name: "step", value: *step });
            }
            if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
                return Err(Error::BadProfile);
            }
        }
    }
    Ok(())
}

/// `(alpha, abs_first_moment)` by composite quadrature at the profile's
/// resolution: Simpson on closed forms, trapezoid on sampled data.
fn moments(kind: &ProfileKind) -> (f64, f64) {
    match kind {
        ProfileKind::Samples { start, step, values } => {
            let mut a = 0.0;
            let mut m = 0.0;
            for (i, v) in values.iter().enumerate() {
                let w = if i == 0 || i + 1 == values.len() { 0.5 } else { 1.0 };
                let x = start + *step * i as f64;
                a += w * v;
                m += w * x.abs() * v;
            }
            (a * step, m * step)
        }
        _ => {
            // Build a throwaway profile view to reuse `eval`.
            let view = PotentialProfile {
                kind: kind.clone(),
                alpha: 0.0,
                abs_first_moment: 0.0,
                sup: 0.0,
                negative_part: false,
            };
            let (lo, hi) = view.support();
            let a = simpson(|x| view.eval(x), lo, hi, QUADRATURE_INTERVALS);
            let m = simpson(|x| x.abs() * view.eval(x), lo, hi, QUADRATURE_INTERVALS);
            (a, m)
        }
    }
}

fn extremes(kind: &ProfileKind) -> (f64, bool) {
    let view = PotentialProfile {
        kind: kind.clone(),
        alpha: 0.0,
        abs_first_moment: 0.0,
        sup: 0.0,
        negative_part: false,
    };
    let (lo, hi) = view.support();
    let n = 4096;
    let mut sup: f64 = 0.0;
    let mut neg = false;
    for i in 0..=n {
        let x = lo + (hi - lo) * i as f64 / n as f64;
        let v = view.eval(x);
        sup = sup.max(v.abs());
        if v < 0.0 {
            neg = true;
        }
    }
    (sup, neg)
}

/// Composite Simpson rule with `n` (even) intervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    debug_assert!(n % 2 == 0);
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + h * i as f64);
    }
    sum * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn box_moments_are_exact() {
        let p = PotentialProfile::new(ProfileKind::Box { amplitude: 1.0, width: 1.0 }).unwrap();
        assert_relative_eq!(p.alpha(), 1.0, max_relative = 1e-13);
        assert_relative_eq!(p.abs_first_moment(), 0.25, max_relative = 1e-13);
        assert_eq!(p.eval(0.5), 1.0); // edge is inside the closed support
        assert_eq!(p.eval(0.5000001), 0.0);
    }

    #[test]
    fn gaussian_moments_match_closed_forms() {
        // integral of e^{-x^2} = sqrt(pi); integral of |x| e^{-x^2} = 1.
        let p = PotentialProfile::gaussian(1.0, 1.0).unwrap();
        assert_relative_eq!(p.alpha(), std::f64::consts::PI.sqrt(), max_relative = 1e-9);
        assert_relative_eq!(p.abs_first_moment(), 1.0, max_relative = 1e-9);
        assert_relative_eq!(p.sup_norm(), 1.0, max_relative = 1e-12);
        assert!(!p.has_negative_part());
    }

    #[test]
    fn zero_profile_has_zero_moments() {
        let p = PotentialProfile::gaussian(0.0, 1.0).unwrap();
        assert_eq!(p.alpha(), 0.0);
        assert_eq!(p.abs_first_moment(), 0.0);
    }

    #[test]
    fn double_well_moments() {
        // Two unit-width bumps of amplitude a: alpha = 2 a sqrt(pi).
        let p = PotentialProfile::new(ProfileKind::DoubleWell {
            amplitude: -0.5,
            width: 1.0,
            separation: 3.0,
        })
        .unwrap();
        assert_relative_eq!(p.alpha(), -std::f64::consts::PI.sqrt(), max_relative = 1e-9);
        assert!(p.has_negative_part());
        // Symmetric profile: eval matches at +/- x.
        assert_relative_eq!(p.eval(1.3), p.eval(-1.3), max_relative = 1e-14);
    }

    #[test]
    fn sampled_profile_quadrature_is_second_order() {
        // Smooth asymmetric profile cos(x) + 1.2 on [-1, 3]; halving the
        // sample spacing must shrink the alpha error by at least 3.5x.
        let exact = (3.0f64.sin() + 1.0f64.sin()) + 1.2 * 4.0;
        let build = |n: usize| {
            let step = 4.0 / n as f64;
            let values: Vec<f64> =
                (0..=n).map(|i| (-1.0 + step * i as f64).cos() + 1.2).collect();
            PotentialProfile::new(ProfileKind::Samples { start: -1.0, step, values }).unwrap()
        };
        let coarse = (build(64).alpha() - exact).abs();
        let fine = (build(128).alpha() - exact).abs();
        assert!(
            coarse / fine >= 3.5,
            "expected second-order refinement, got ratio {}",
            coarse / fine
        );
    }

    #[test]
    fn sampled_profile_interpolates_linearly() {
        let p = PotentialProfile::new(ProfileKind::Samples {
            start: 0.0,
            step: 1.0,
            values: vec![0.0, 2.0, 0.0],
        })
        .unwrap();
        assert_relative_eq!(p.eval(0.5), 1.0, max_relative = 1e-14);
        assert_relative_eq!(p.eval(1.25), 1.5, max_relative = 1e-14);
        assert_eq!(p.eval(-0.1), 0.0);
        assert_eq!(p.eval(2.0), 0.0);
        assert_relative_eq!(p.alpha(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PotentialProfile::gaussian(f64::NAN, 1.0).is_err());
        assert!(PotentialProfile::gaussian(1.0, 0.0).is_err());
        assert!(PotentialProfile::new(ProfileKind::Samples {
            start: 0.0,
            step: 0.5,
            values: vec![1.0, f64::INFINITY],
        })
        .is_err());
        assert!(PotentialProfile::new(ProfileKind::Samples {
            start: 0.0,
            step: 0.5,
            values: vec![1.0],
        })
        .is_err());
    }

    #[test]
    fn gaussian_support_is_compact() {
        let p = PotentialProfile::gaussian(2.0, 0.5).unwrap();
        let (lo, hi) = p.support();
        assert_relative_eq!(hi, 4.75 * 0.5, max_relative = 1e-15);
        assert_relative_eq!(lo, -hi, max_relative = 1e-15);
        assert_eq!(p.eval(hi + 1e-9), 0.0);
        assert!(p.eval(hi - 1e-9) > 0.0);
    }
}
