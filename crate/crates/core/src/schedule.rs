//! Parameter schedules `λ = ζ^{-β}`, `ω_i = κ_i ζ^{-α}` and their
//! convergence margin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{LAMBDA_MAX, LAMBDA_MIN};
use crate::torus::FrequencyBound;

/// Exponents and prefactors of a schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub alpha: f64,
    pub beta: f64,
    pub k: u32,
    pub kappa: Vec<f64>,
}

impl ScheduleParams {
    pub fn new(alpha: f64, beta: f64, k: u32, kappa: Vec<f64>) -> Result<Self> {
        let p = ScheduleParams { alpha, beta, k, kappa };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.kappa.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_exponents(self.alpha, self.beta, self.k)?;
        let m = self.kappa.len();
        if m == 0 {
            return Err(Error::Domain("κ needs one entry per axis".into()));
        }
        if 2 * self.k as usize <= m {
            return Err(Error::Domain(format!("k = {} must exceed m/2 = {}", self.k, m as f64 / 2.0)));
        }
        if let Some(bad) = self.kappa.iter().find(|&&c| !(c.is_finite() && c > 0.0)) {
            return Err(Error::Domain(format!("κ entries must be positive, got {bad}")));
        }
        Ok(())
    }

    pub fn margin(&self) -> f64 {
        margin_terms(self.alpha, self.beta, self.k).into_iter().fold(f64::INFINITY, f64::min)
    }
}

fn check_exponents(alpha: f64, beta: f64, k: u32) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0 && beta.is_finite() && beta > 0.0) {
        return Err(Error::Domain(format!("α and β must be positive, got α = {alpha}, β = {beta}")));
    }
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    Ok(())
}

/// The seven exponents whose minimum is the margin, in the order
/// `1+2α-β, 2-(α+β), 1-α(2k-1), 1+β, 1-α, β-α(2k-1), 2β`.
pub fn margin_terms(alpha: f64, beta: f64, k: u32) -> [f64; 7] {
    let odd = (2 * k - 1) as f64;
    [
        1.0 + 2.0 * alpha - beta,
        2.0 - (alpha + beta),
        1.0 - alpha * odd,
        1.0 + beta,
        1.0 - alpha,
        beta - alpha * odd,
        2.0 * beta,
    ]
}

/// `r = min` of [`margin_terms`]; the schedule converges when `r > 0`.
pub fn margin(alpha: f64, beta: f64, k: u32) -> Result<f64> {
    check_exponents(alpha, beta, k)?;
    Ok(margin_terms(alpha, beta, k).into_iter().fold(f64::INFINITY, f64::min))
}

/// A schedule evaluated at one `ζ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub lambda: f64,
    pub omega: FrequencyBound,
    /// `λ` was pulled into the solver's supported range.
    pub clamped: bool,
}

/// `λ = ζ^{-β}` and `ω_i = max(1, round(κ_i ζ^{-α}))`. Refuses schedules with
/// `r ≤ 0` unless `force` is set.
pub fn instantiate(params: &ScheduleParams, zeta: f64, force: bool) -> Result<Instance> {
    params.validate()?;
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::Domain(format!("ζ must lie in (0, 1), got {zeta}")));
    }
    let r = params.margin();
    if r <= 0.0 {
        if !force {
            return Err(Error::InfeasibleSchedule { margin: r });
        }
        log::warn!("running a schedule with margin r = {r}; convergence is not guaranteed");
    }
    let raw = zeta.powf(-params.beta);
    let lambda = raw.clamp(LAMBDA_MIN, LAMBDA_MAX);
    let clamped = lambda != raw;
    if clamped {
        log::warn!("λ = {raw:e} clamped to {lambda:e}");
    }
    let scale = zeta.powf(-params.alpha);
    let omega = params
        .kappa
        .iter()
        .map(|&c| {
            let w = (c * scale).round().max(1.0);
            if w > u32::MAX as f64 {
                Err(Error::Range(format!("ω = {w} does not fit a frequency bound")))
            } else {
                Ok(w as u32)
            }
        })
        .collect::<Result<Vec<u32>>>()?;
    Ok(Instance { lambda, omega: FrequencyBound::new(omega), clamped })
}

/// The margin-maximizing `(α, β)` on the grid `{0.01, …, 0.99}²` at the
/// smallest admissible `k`, with `κ = 1`. Ties go to the smaller `α`, then
/// the smaller `β`.
pub fn suggest(m: usize) -> Result<ScheduleParams> {
    if m == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    let k = (m / 2 + 1) as u32;
    let odd = 2 * k as i64 - 1;
    // exact arithmetic in hundredths
    let r = |a: i64, b: i64| {
        [100 + 2 * a - b, 200 - a - b, 100 - a * odd, 100 + b, 100 - a, b - a * odd, 2 * b]
            .into_iter()
            .min()
            .unwrap()
    };
    let mut best = (i64::MIN, 0, 0);
    for a in 1..100 {
        for b in 1..100 {
            let v = r(a, b);
            if v > best.0 {
                best = (v, a, b);
            }
        }
    }
    ScheduleParams::new(best.1 as f64 / 100.0, best.2 as f64 / 100.0, k, vec![1.0; m])
}
