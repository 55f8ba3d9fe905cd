//! Problem definitions for the two flows.
//!
//! [`ScaledProblem`] pairs a periodic grid with defects whose profiles are
//! squeezed to width `epsilon`; it is integrated by the split-step solver.
//! [`PointProblem`] keeps only each defect's site, nonlinearity exponent,
//! and coupling strength `alpha`; it is integrated by the trace-equation
//! solver. `PointProblem::from_scaled` produces the limit problem a scaled
//! family converges to, with `alpha` taken from the profile integral.

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::potential::PotentialProfile;

/// One defect of the scaled flow: a profile squeezed around `site` with
/// focusing/defocusing behaviour set by the profile sign and exponent `mu`
/// (the nonlinearity acts as `|psi|^(2 mu) psi`).
#[derive(Debug, Clone, PartialEq)]
pub struct DefectSpec {
    site: f64,
    mu: f64,
    profile: PotentialProfile,
}

impl DefectSpec {
    pub fn new(site: f64, mu: f64, profile: PotentialProfile) -> Result<Self> {
        if !site.is_finite() {
            return Err(Error::BadParameter { name: "site", value: site });
        }
        if !mu.is_finite() || mu < 0.0 {
            return Err(Error::BadParameter { name: "mu", value: mu });
        }
        Ok(DefectSpec { site, mu, profile })
    }

    pub fn site(&self) -> f64 {
        self.site
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn profile(&self) -> &PotentialProfile {
        &self.profile
    }

    /// Coupling strength the defect carries into the point limit.
    pub fn alpha(&self) -> f64 {
        self.profile.alpha()
    }
}

/// Shared iteration/guard parameters for both solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    /// Damping of the fixed-point update for the implicit trace solve.
    pub theta: f64,
    /// Absolute max-norm tolerance for the fixed-point iteration.
    pub fp_tol: f64,
    /// Iteration cap before the solve is declared stalled.
    pub fp_max_iter: usize,
    /// A run aborts once the Sobolev norm exceeds this multiple of its
    /// initial value (focusing blow-up guard).
    pub blowup_factor: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams { theta: 0.5, fp_tol: 1e-12, fp_max_iter: 200, blowup_factor: 1e3 }
    }
}

/// Validated scaled-flow problem: grid + squeezed defects.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledProblem {
    grid: Grid1D,
    defects: Vec<DefectSpec>,
    site_indices: Vec<usize>,
    epsilon: f64,
}

impl ScaledProblem {
    /// Validates geometry and admissibility.
    ///
    /// Structural checks (always on): every site must lie on a grid node,
    /// grid spacing must resolve the squeezed width (`h <= epsilon / 8`),
    /// squeezed supports must stay inside the domain and must not overlap,
    /// and sites must be distinct.
    ///
    /// Admissibility (skipped when `override_admissibility` is set): each
    /// exponent must be positive, and a profile with a negative part needs
    /// `mu < 1` to rule out finite-time blow-up.
    pub fn new(
        grid: Grid1D,
        defects: Vec<DefectSpec>,
        epsilon: f64,
        override_admissibility: bool,
    ) -> Result<Self> {
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(Error::BadParameter { name: "epsilon", value: epsilon });
        }
        if grid.spacing() > epsilon / 8.0 {
            return Err(Error::ResolutionTooCoarse { h: grid.spacing(), epsilon });
        }
        let mut site_indices = Vec::with_capacity(defects.len());
        for d in &defects {
            match grid.index_of(d.site()) {
                Some(i) => site_indices.push(i),
                None => return Err(Error::SiteOffGrid { site: d.site() }),
            }
        }
        check_distinct_sites(defects.iter().map(|d| d.site()))?;
        // Squeezed support of defect k: site + epsilon * support(V_k).
        let l = grid.half_width();
        let mut spans: Vec<(f64, f64, usize)> = defects
            .iter()
            .enumerate()
            .map(|(k, d)| {
                let (lo, hi) = d.profile().support();
                (d.site() + epsilon * lo, d.site() + epsilon * hi, k)
            })
            .collect();
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (lo, hi, k) in &spans {
            if *lo <= -l || *hi >= l {
                return Err(Error::SupportOutsideDomain { defect: *k });
            }
        }
        for pair in spans.windows(2) {
            if pair[0].1 > pair[1].0 {
                return Err(Error::OverlappingSupports {
                    first: pair[0].2.min(pair[1].2),
                    second: pair[0].2.max(pair[1].2),
                });
            }
        }
        if !override_admissibility {
            for (k, d) in defects.iter().enumerate() {
                if d.mu() <= 0.0 {
                    return Err(Error::Inadmissible {
                        defect: k,
                        mu: d.mu(),
                        why: "exponent must be positive (zero makes the coupling linear; \
                              use the admissibility override for linear validation runs)"
                            .into(),
                    });
                }
                if d.profile().has_negative_part() && d.mu() >= 1.0 {
                    return Err(Error::Inadmissible {
                        defect: k,
                        mu: d.mu(),
                        why: "a profile with a negative part needs mu < 1 to rule out \
                              finite-time blow-up"
                            .into(),
                    });
                }
            }
        }
        Ok(ScaledProblem { grid, defects, site_indices, epsilon })
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    pub fn defects(&self) -> &[DefectSpec] {
        &self.defects
    }

    /// Grid index of each defect site, in `defects()` order.
    pub fn site_indices(&self) -> &[usize] {
        &self.site_indices
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// One point defect of the limit flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointDefect {
    site: f64,
    mu: f64,
    alpha: f64,
}

impl PointDefect {
    pub fn new(site: f64, mu: f64, alpha: f64) -> Result<Self> {
        if !site.is_finite() {
            return Err(Error::BadParameter { name: "site", value: site });
        }
        if !mu.is_finite() || mu < 0.0 {
            return Err(Error::BadParameter { name: "mu", value: mu });
        }
        if !alpha.is_finite() {
            return Err(Error::BadParameter { name: "alpha", value: alpha });
        }
        Ok(PointDefect { site, mu, alpha })
    }

    pub fn site(&self) -> f64 {
        self.site
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Validated point-flow problem.
#[derive(Debug, Clone, PartialEq)]
pub struct PointProblem {
    defects: Vec<PointDefect>,
}

impl PointProblem {
    /// Admissibility (skipped when `override_admissibility` is set): every
    /// exponent must be positive, and if any coupling is attractive
    /// (`alpha < 0`) then every exponent must satisfy `mu < 1`.
    pub fn new(defects: Vec<PointDefect>, override_admissibility: bool) -> Result<Self> {
        check_distinct_sites(defects.iter().map(|d| d.site()))?;
        if !override_admissibility {
            let any_attractive = defects.iter().any(|d| d.alpha() < 0.0);
            for (k, d) in defects.iter().enumerate() {
                if d.mu() <= 0.0 {
                    return Err(Error::Inadmissible {
                        defect: k,
                        mu: d.mu(),
                        why: "exponent must be positive (zero makes the coupling linear; \
                              use the admissibility override for linear validation runs)"
                            .into(),
                    });
                }
                if any_attractive && d.mu() >= 1.0 {
                    return Err(Error::Inadmissible {
                        defect: k,
                        mu: d.mu(),
                        why: "with an attractive coupling present, every exponent needs \
                              mu < 1 to rule out finite-time blow-up"
                            .into(),
                    });
                }
            }
        }
        Ok(PointProblem { defects })
    }

    /// The limit problem of a scaled family: same sites and exponents,
    /// coupling strengths from the profile integrals.
    pub fn from_scaled(scaled: &ScaledProblem, override_admissibility: bool) -> Result<Self> {
        let defects = scaled
            .defects()
            .iter()
            .map(|d| PointDefect::new(d.site(), d.mu(), d.alpha()))
            .collect::<Result<Vec<_>>>()?;
        PointProblem::new(defects, override_admissibility)
    }

    pub fn defects(&self) -> &[PointDefect] {
        &self.defects
    }
}

fn check_distinct_sites(sites: impl Iterator<Item = f64>) -> Result<()> {
    let mut seen: Vec<f64> = Vec::new();
    for s in sites {
        if seen.iter().any(|t| *t == s) {
            return Err(Error::DuplicateSite { site: s });
        }
        seen.push(s);
    }
    Ok(())
}
