//! Tangent-family relaxation of the joint coverage constraint.
//!
//! With `m = Π p_j^{y_j}` and `n = Π q_k^{z_k}` the constraint
//! `(1 − m)(1 − n) ≥ α` is replaced by half-spaces in `(ln m, ln n)`:
//!
//! * box cuts `ln m ≤ ln(1 − α)` and `ln n ≤ ln(1 − α)`;
//! * for each weight β (γ = 1 − β) the supporting cut
//!   `β ln m + γ ln n ≤ ln F`, where `F = max f` over `n ∈ (0, 1 − α)` with
//!   `f(n) = (1 − α/(1 − n))^β n^γ`, attained at the tangency point δ.
//!
//! Every point satisfying the nonlinear constraint satisfies all cuts, so the
//! cut system is a relaxation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_alpha_beta(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha = {alpha} must lie in (0,1)")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("beta = {beta} must lie in (0,1)")));
    }
    Ok(())
}

/// Tangency coordinate δ in `(0, 1 − α)` where `f′(δ) = 0`.
///
/// This is the smaller root of `γ n² − (2γ + αβ − αγ) n + γ(1 − α) = 0`,
/// evaluated in the rationalized form `2γ(1 − α) / (2γ + α(β − γ) + √D)`
/// with `D = α(4βγ + α(β − γ)²)`, which avoids cancellation for small γ.
pub fn tangency_delta(alpha: f64, beta: f64) -> Result<f64> {
    check_alpha_beta(alpha, beta)?;
    let gamma = 1.0 - beta;
    Ok(2.0 * gamma * (1.0 - alpha) / (2.0 * gamma + alpha * (beta - gamma) + disc(alpha, beta).sqrt()))
}

fn disc(alpha: f64, beta: f64) -> f64 {
    let gamma = 1.0 - beta;
    alpha * (4.0 * beta * gamma + alpha * (beta - gamma).powi(2))
}

/// The four stationary candidates of `f`: `0`, `1 − α`, and the two roots of
/// the quadratic (smaller one first).
pub fn stationary_candidates(alpha: f64, beta: f64) -> Result<[f64; 4]> {
    check_alpha_beta(alpha, beta)?;
    let gamma = 1.0 - beta;
    let b = 2.0 * gamma + alpha * beta - alpha * gamma;
    let s = disc(alpha, beta).sqrt();
    Ok([0.0, 1.0 - alpha, (b - s) / (2.0 * gamma), (b + s) / (2.0 * gamma)])
}

/// `1 − α/(1 − n)`, the miss level of the other factor on the boundary.
pub fn boundary_partner(alpha: f64, n: f64) -> f64 {
    ((1.0 - n) - alpha) / (1.0 - n)
}

/// `f(n) = (1 − α/(1 − n))^β n^γ`.
pub fn tangent_objective(alpha: f64, beta: f64, n: f64) -> f64 {
    boundary_partner(alpha, n).powf(beta) * n.powf(1.0 - beta)
}

/// `ln F = β ln(1 − α/(1 − δ)) + γ ln δ`.
pub fn tangent_rhs(alpha: f64, beta: f64) -> Result<f64> {
    let delta = tangency_delta(alpha, beta)?;
    Ok(beta * boundary_partner(alpha, delta).ln() + (1.0 - beta) * delta.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentCut {
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub log_rhs: f64,
}

impl TangentCut {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let delta = tangency_delta(alpha, beta)?;
        let gamma = 1.0 - beta;
        let log_rhs = beta * boundary_partner(alpha, delta).ln() + gamma * delta.ln();
        Ok(TangentCut { beta, gamma, delta, log_rhs })
    }

    /// `β·ln_m + γ·ln_n ≤ log_rhs + tol`.
    pub fn holds(&self, ln_m: f64, ln_n: f64, tol: f64) -> bool {
        self.beta * ln_m + self.gamma * ln_n <= self.log_rhs + tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentFamily {
    pub alpha: f64,
    /// Sorted by β.
    pub cuts: Vec<TangentCut>,
    /// Right-hand side `ln(1 − α)` shared by both box cuts.
    pub box_rhs: f64,
}

impl TangentFamily {
    pub fn build(alpha: f64, betas: &[f64]) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::Domain("beta list is empty".into()));
        }
        let mut cuts = betas
            .iter()
            .map(|&b| TangentCut::new(alpha, b))
            .collect::<Result<Vec<_>>>()?;
        cuts.sort_by(|a, b| a.beta.total_cmp(&b.beta));
        Ok(TangentFamily { alpha, cuts, box_rhs: (1.0 - alpha).ln() })
    }

    /// Both box cuts plus every tangent cut, at absolute tolerance `tol`.
    pub fn admits(&self, ln_m: f64, ln_n: f64, tol: f64) -> bool {
        ln_m <= self.box_rhs + tol
            && ln_n <= self.box_rhs + tol
            && self.cuts.iter().all(|c| c.holds(ln_m, ln_n, tol))
    }

    /// Number of rows per demand node: two box cuts plus the tangent cuts.
    pub fn rows_per_node(&self) -> usize {
        2 + self.cuts.len()
    }
}

/// Builds a family; thin wrapper over [`TangentFamily::build`].
pub fn build_family(alpha: f64, betas: &[f64]) -> Result<TangentFamily> {
    TangentFamily::build(alpha, betas)
}

/// Slack used when testing grid points against the cut system.
pub const GRID_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapSample {
    pub m: f64,
    pub n: f64,
    pub exact_feasible: bool,
    pub la_feasible: bool,
}

/// Evaluates the exact and relaxed constraints on a `grid_n × grid_n` grid
/// over `[0, 1 − α]²`.
pub fn sample_gap(alpha: f64, betas: &[f64], grid_n: usize) -> Result<Vec<GapSample>> {
    if grid_n < 2 {
        return Err(Error::Domain(format!("grid_n = {grid_n} must be at least 2")));
    }
    let family = TangentFamily::build(alpha, betas)?;
    let step = (1.0 - alpha) / (grid_n - 1) as f64;
    let mut out = Vec::with_capacity(grid_n * grid_n);
    for a in 0..grid_n {
        let m = a as f64 * step;
        for b in 0..grid_n {
            let n = b as f64 * step;
            out.push(GapSample {
                m,
                n,
                exact_feasible: (1.0 - m) * (1.0 - n) >= alpha,
                la_feasible: family.admits(m.ln(), n.ln(), GRID_TOL),
            });
        }
    }
    Ok(out)
}

/// Share of grid cells that the relaxation admits but the exact constraint
/// rejects, times the area of `[0, 1 − α]²`.
pub fn excess_area(samples: &[GapSample], alpha: f64) -> f64 {
    let excess = samples.iter().filter(|s| s.la_feasible && !s.exact_feasible).count();
    excess as f64 / samples.len() as f64 * (1.0 - alpha).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::DEFAULT_BETAS;

    fn fd_derivative(alpha: f64, beta: f64, x: f64) -> f64 {
        let h = 1e-7;
        (tangent_objective(alpha, beta, x + h) - tangent_objective(alpha, beta, x - h)) / (2.0 * h)
    }

    #[test]
    fn symmetric_tangency_values() {
        // oracle: closed-form root for β = γ is 1 − √α
        let d = tangency_delta(0.9, 0.5).unwrap();
        assert!((d - (1.0 - 0.9f64.sqrt())).abs() < 1e-15);
        assert!((d - 0.0513167).abs() < 1e-7);
        let d = tangency_delta(0.8, 0.5).unwrap();
        assert!((d - 0.1055728).abs() < 1e-7);
        assert!(fd_derivative(0.9, 0.5, tangency_delta(0.9, 0.5).unwrap()).abs() < 1e-6);
        // β = γ: both factors at the tangency point coincide
        let d = tangency_delta(0.9, 0.5).unwrap();
        assert!((boundary_partner(0.9, d) - d).abs() < 1e-15);
    }

    #[test]
    fn rationalized_root_matches_literal_formula() {
        for &alpha in &[0.1, 0.5, 0.8, 0.85, 0.9, 0.95] {
            for &beta in &DEFAULT_BETAS {
                let lit = stationary_candidates(alpha, beta).unwrap()[2];
                let d = tangency_delta(alpha, beta).unwrap();
                assert!((lit - d).abs() < 1e-9 * d.max(1e-3), "{alpha} {beta}: {lit} vs {d}");
            }
        }
    }

    #[test]
    fn rhs_values() {
        assert!((tangent_rhs(0.9, 0.5).unwrap() - (-2.96974)).abs() < 1e-5);
        // ln(1 − √0.8) = −2.248354…
        assert!((tangent_rhs(0.8, 0.5).unwrap() - (1.0 - 0.8f64.sqrt()).ln()).abs() < 1e-12);
        assert!((tangent_rhs(0.8, 0.5).unwrap() - (-2.248354)).abs() < 1e-6);
        assert!((tangent_rhs(0.9, 0.5).unwrap() - 0.0513167f64.ln()).abs() < 1e-5);
    }

    #[test]
    fn rhs_is_value_of_f_at_delta() {
        for &beta in &DEFAULT_BETAS {
            let c = TangentCut::new(0.85, beta).unwrap();
            assert!(c.log_rhs < 0.0);
            assert!((c.log_rhs.exp() - tangent_objective(0.85, beta, c.delta)).abs() < 1e-12);
            let mstar = boundary_partner(0.85, c.delta);
            assert!((c.beta * mstar.ln() + c.gamma * c.delta.ln() - c.log_rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_root_layout() {
        for &alpha in &[0.05, 0.5, 0.9, 0.95] {
            for &beta in &DEFAULT_BETAS {
                let [r1, r2, r3, r4] = stationary_candidates(alpha, beta).unwrap();
                assert_eq!(r1, 0.0);
                assert_eq!(r2, 1.0 - alpha);
                assert!(r3 > 0.0 && r3 < 1.0 - alpha, "{alpha} {beta} {r3}");
                assert!(r4 >= 1.0 - alpha);
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(tangency_delta(0.9, 1.0).is_err());
        assert!(tangency_delta(0.9, 0.0).is_err());
        assert!(tangency_delta(1.0, 0.5).is_err());
        assert!(tangency_delta(0.0, 0.5).is_err());
        assert!(build_family(0.9, &[]).is_err());
        assert!(build_family(0.9, &[1.0]).is_err());
        assert!(sample_gap(0.9, &[0.5], 1).is_err());
    }

    #[test]
    fn family_counts_and_order() {
        let fam = build_family(0.9, &DEFAULT_BETAS).unwrap();
        assert_eq!(fam.cuts.len(), 17);
        assert_eq!(fam.rows_per_node(), 19);
        let fam = build_family(0.9, &[0.7, 0.5, 0.1]).unwrap();
        assert_eq!(fam.rows_per_node(), 3 + 2);
        assert!(fam.cuts.windows(2).all(|w| w[0].beta < w[1].beta));
    }

    #[test]
    fn gap_samples_relaxation_and_tangency_point() {
        let s = sample_gap(0.9, &[0.5], 41).unwrap();
        assert!(s.iter().all(|p| !p.exact_feasible || p.la_feasible));
        let fam = build_family(0.9, &[0.5]).unwrap();
        let t = 1.0 - 0.9f64.sqrt();
        assert!(fam.admits(t.ln(), t.ln(), GRID_TOL));
        assert!((fam.cuts[0].beta * t.ln() + fam.cuts[0].gamma * t.ln() - fam.cuts[0].log_rhs).abs() < 1e-12);
        // the point (0.005, 0.09): (0.995)(0.91) = 0.90545 ≥ 0.9
        assert!((1.0 - 0.005) * (1.0 - 0.09) >= 0.9);
        assert!(fam.admits(0.005f64.ln(), 0.09f64.ln(), 0.0));
    }
}
