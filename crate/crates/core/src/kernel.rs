//! Reproducing kernels on the torus.
//!
//! The full kernel is the lattice series
//!
//! ```text
//! g_λ(x) = Σ_{l ∈ Z^m} cos(2π l·x) / (1 + λ ‖l‖_{2k}^{2k})
//! ```
//!
//! and the truncated kernel `w_λ` is the same sum restricted to the index box
//! `-ω ≤ l ≤ ω`. The full series is evaluated over a cube `‖l‖_∞ ≤ R` with a
//! tail bound that holds uniformly in `x`; the truncated kernel is a finite
//! sum and is exact up to rounding.
//!
//! The Fourier weights use `‖l‖_{2k}^{2k}` without any `(2π)^{2k}` factor.
//! The coefficient-space oracle uses the same convention for its derivative
//! penalty, so a given `λ` means the same functional on both sides.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::CompensatedSum;
use crate::torus::{FrequencyBound, TorusPoint};

/// Default tolerance for the auto-selected truncation radius.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Largest number of lattice terms a single series evaluation may use.
pub const MAX_SERIES_TERMS: u64 = 1 << 25;

/// How the infinite series of the full kernel is cut off.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationPolicy {
    /// Sum over the cube `‖l‖_∞ ≤ R`.
    Radius(u64),
    /// Pick the smallest `R` whose tail bound is at most `tol`.
    Tolerance(f64),
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy::Tolerance(DEFAULT_TOLERANCE)
    }
}

/// Parameters of `g_λ` (no `omega`) or `w_λ = P_ω g_λ` (with `omega`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    m: usize,
    k: u32,
    lambda: f64,
    omega: Option<FrequencyBound>,
    truncation: TruncationPolicy,
}

impl KernelSpec {
    /// The full kernel `g_λ` on `T^m`.
    pub fn full(m: usize, k: u32, lambda: f64) -> Result<Self> {
        let spec = KernelSpec { m, k, lambda, omega: None, truncation: TruncationPolicy::default() };
        spec.validate()?;
        Ok(spec)
    }

    /// The truncated kernel `w_λ` on `T^m` with `m = omega.dim()`.
    pub fn truncated(omega: FrequencyBound, k: u32, lambda: f64) -> Result<Self> {
        let spec = KernelSpec {
            m: omega.dim(),
            k,
            lambda,
            omega: Some(omega),
            truncation: TruncationPolicy::default(),
        };
        spec.validate()?;
        spec.omega.as_ref().unwrap().box_size()?;
        Ok(spec)
    }

    pub fn with_truncation(mut self, truncation: TruncationPolicy) -> Result<Self> {
        self.truncation = truncation;
        self.validate()?;
        Ok(self)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let mut spec = self.clone();
        spec.lambda = lambda;
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_omega(&self, omega: Option<FrequencyBound>) -> Result<Self> {
        let mut spec = self.clone();
        if let Some(w) = &omega {
            if w.dim() != self.m {
                return Err(Error::Domain(format!("ω has {} entries, expected {}", w.dim(), self.m)));
            }
            w.box_size()?;
        }
        spec.omega = omega;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Domain("dimension m must be positive".into()));
        }
        if self.k == 0 || 2 * self.k as usize <= self.m {
            return Err(Error::Domain(format!(
                "smoothness order k = {} must exceed m/2 = {}",
                self.k,
                self.m as f64 / 2.0
            )));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::Domain(format!("λ must be a positive finite number, got {}", self.lambda)));
        }
        if let TruncationPolicy::Tolerance(tol) = self.truncation {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(Error::Domain(format!("truncation tolerance must be positive, got {tol}")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn omega(&self) -> Option<&FrequencyBound> {
        self.omega.as_ref()
    }

    pub fn truncation(&self) -> TruncationPolicy {
        self.truncation
    }

    /// Fourier weight `1 / (1 + λ N)` for `N = ‖l‖_{2k}^{2k}`.
    #[inline]
    pub fn weight(&self, norm: f64) -> f64 {
        1.0 / (1.0 + self.lambda * norm)
    }

    /// Cube radius used for the full series under the current policy.
    pub fn resolve_radius(&self) -> Result<u64> {
        match self.truncation {
            TruncationPolicy::Radius(r) => Ok(r),
            TruncationPolicy::Tolerance(tol) => {
                select_radius(self.m, |r| tail_bound(r, self), tol)
            }
        }
    }

    /// Kernel value at `x` under this spec: `w_λ` when `omega` is set,
    /// otherwise the truncated series for `g_λ`.
    pub fn value(&self, x: &TorusPoint) -> Result<f64> {
        self.check_dim(x)?;
        match &self.omega {
            Some(omega) => Ok(series_w(x.coords(), omega, self)),
            None => {
                let r = self.resolve_radius()?;
                Ok(series_g(x.coords(), r, self))
            }
        }
    }

    /// A kernel evaluator with the truncation radius resolved once.
    pub fn evaluator(&self) -> Result<KernelEvaluator<'_>> {
        let ranges = match &self.omega {
            Some(omega) => {
                omega.box_size()?;
                omega.as_slice().iter().map(|&w| (-(w as i64), w as i64)).collect()
            }
            None => {
                let r = self.resolve_radius()? as i64;
                vec![(-r, r); self.m]
            }
        };
        Ok(KernelEvaluator { spec: self, ranges })
    }

    /// An upper bound on the kernel value at the origin (which is its
    /// maximum): exact for `w_λ`, truncated sum plus tail bound for `g_λ`.
    pub fn value_at_origin_upper(&self) -> Result<f64> {
        let zero = vec![0.0; self.m];
        match &self.omega {
            Some(omega) => Ok(series_w(&zero, omega, self)),
            None => {
                let r = self.resolve_radius()?;
                Ok(series_g(&zero, r, self) + tail_bound(r, self))
            }
        }
    }

    fn check_dim(&self, x: &TorusPoint) -> Result<()> {
        if x.dim() != self.m {
            return Err(Error::Domain(format!("point has dimension {}, kernel expects {}", x.dim(), self.m)));
        }
        Ok(())
    }
}

/// A kernel with its index set fixed, for repeated evaluation.
pub struct KernelEvaluator<'a> {
    spec: &'a KernelSpec,
    ranges: Vec<(i64, i64)>,
}

impl KernelEvaluator<'_> {
    #[inline]
    pub fn eval_coords(&self, x: &[f64]) -> f64 {
        let spec = self.spec;
        cosine_lattice_sum(x, &self.ranges, spec.k, |n| spec.weight(n))
    }

    pub fn eval(&self, x: &TorusPoint) -> f64 {
        self.eval_coords(x.coords())
    }
}

/// Result of a truncated series evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub radius: u64,
    /// Bound on `|exact - value|`, uniform in `x`.
    pub tail_bound: f64,
}

/// `g_λ(x)` using the truncation policy of `spec`; its `omega` is ignored.
pub fn eval_g(x: &TorusPoint, spec: &KernelSpec) -> Result<f64> {
    eval_g_detailed(x, spec).map(|s| s.value)
}

/// `g_λ(x)` together with the radius used and its certified tail bound.
pub fn eval_g_detailed(x: &TorusPoint, spec: &KernelSpec) -> Result<SeriesValue> {
    spec.check_dim(x)?;
    let radius = spec.resolve_radius()?;
    Ok(SeriesValue {
        value: series_g(x.coords(), radius, spec),
        radius,
        tail_bound: tail_bound(radius, spec),
    })
}

/// Upper bound on `Σ_{‖l‖_∞ > R} 1/(1 + λ‖l‖_{2k}^{2k})`, which bounds the
/// truncation error of `g_λ` for every `x`. Infinite for `R = 0`.
pub fn tail_bound(radius: u64, spec: &KernelSpec) -> f64 {
    lattice_power_tail(spec.m, 2.0 * spec.k as f64, radius) / spec.lambda
}

/// `w_λ(x) = P_ω g_λ(x)`. Errors when `spec` has no `omega`.
pub fn eval_w(x: &TorusPoint, spec: &KernelSpec) -> Result<f64> {
    spec.check_dim(x)?;
    let omega = spec
        .omega
        .as_ref()
        .ok_or_else(|| Error::Domain("eval_w needs a frequency bound ω".into()))?;
    omega.box_size()?;
    Ok(series_w(x.coords(), omega, spec))
}

/// Normalized one-sided Dirichlet sum
/// `Σ_{0 ≤ r ≤ ω} cos(2π r·x) / ∏(ω_i + 1)`, so that `D_ω(0) = 1`.
pub fn eval_dirichlet(x: &TorusPoint, omega: &FrequencyBound) -> Result<f64> {
    if x.dim() != omega.dim() {
        return Err(Error::Domain("point and ω dimensions differ".into()));
    }
    if omega.as_slice().iter().any(|&w| w < 1) {
        return Err(Error::Domain("Dirichlet kernel needs ω_i ≥ 1".into()));
    }
    let ranges: Vec<(i64, i64)> = omega.as_slice().iter().map(|&w| (0, w as i64)).collect();
    let count: f64 = omega.as_slice().iter().map(|&w| (w as f64) + 1.0).product();
    Ok(cosine_lattice_sum(x.coords(), &ranges, 1, |_| 1.0) / count)
}

/// `s_r(x) = Σ_{l ≠ 0} cos(2π l·x) / ‖l‖_{2k}^{2kr}`, the `r`-th coefficient
/// of the large-`λ` expansion of `g_λ`.
pub fn eval_s_r(x: &TorusPoint, r: u32, spec: &KernelSpec, truncation: TruncationPolicy) -> Result<f64> {
    eval_s_r_detailed(x, r, spec, truncation).map(|s| s.value)
}

pub fn eval_s_r_detailed(
    x: &TorusPoint,
    r: u32,
    spec: &KernelSpec,
    truncation: TruncationPolicy,
) -> Result<SeriesValue> {
    spec.check_dim(x)?;
    if r == 0 {
        return Err(Error::Domain("series order r must be positive".into()));
    }
    let radius = match truncation {
        TruncationPolicy::Radius(rad) => rad,
        TruncationPolicy::Tolerance(tol) => select_radius(spec.m, |rad| s_r_tail_bound(rad, r, spec), tol)?,
    };
    let rad = radius as i64;
    let ranges = vec![(-rad, rad); spec.m];
    let value = cosine_lattice_sum(x.coords(), &ranges, spec.k, |n| {
        if n == 0.0 {
            0.0
        } else {
            n.powi(-(r as i32))
        }
    });
    Ok(SeriesValue { value, radius, tail_bound: s_r_tail_bound(radius, r, spec) })
}

/// Upper bound on the truncation error of `s_r` at cube radius `R`.
pub fn s_r_tail_bound(radius: u64, r: u32, spec: &KernelSpec) -> f64 {
    lattice_power_tail(spec.m, 2.0 * (spec.k * r) as f64, radius)
}

/// Partial sum `1 + Σ_{r=1}^{order} (-1)^{r+1} λ^{-r} s_r(x)` of the large-`λ`
/// expansion of `g_λ`. Requires `λ > 1`.
pub fn asymptotic_g(x: &TorusPoint, spec: &KernelSpec, order: u32, truncation: TruncationPolicy) -> Result<f64> {
    spec.check_dim(x)?;
    if spec.lambda <= 1.0 {
        return Err(Error::Domain(format!("the expansion in 1/λ needs λ > 1, got {}", spec.lambda)));
    }
    let mut acc = CompensatedSum::new();
    acc.add(1.0);
    for r in 1..=order {
        let s = eval_s_r(x, r, spec, truncation)?;
        let sign = if r % 2 == 1 { 1.0 } else { -1.0 };
        acc.add(sign * s / spec.lambda.powi(r as i32));
    }
    Ok(acc.value())
}

pub(crate) fn series_g(x: &[f64], radius: u64, spec: &KernelSpec) -> f64 {
    let r = radius as i64;
    cosine_lattice_sum(x, &vec![(-r, r); spec.m], spec.k, |n| spec.weight(n))
}

pub(crate) fn series_w(x: &[f64], omega: &FrequencyBound, spec: &KernelSpec) -> f64 {
    let ranges: Vec<(i64, i64)> = omega.as_slice().iter().map(|&w| (-(w as i64), w as i64)).collect();
    cosine_lattice_sum(x, &ranges, spec.k, |n| spec.weight(n))
}

/// Upper bound on `Σ_{‖l‖_∞ > R} ‖l‖_∞^{-q}` over `Z^m`, valid for `q > m`.
///
/// The shell `‖l‖_∞ = j` has `(2j+1)^m - (2j-1)^m ≤ 2m (3j)^{m-1}` points and
/// `Σ_{j>R} j^{-s} ≤ R^{1-s}/(s-1)`.
fn lattice_power_tail(m: usize, q: f64, radius: u64) -> f64 {
    if radius == 0 {
        return f64::INFINITY;
    }
    let m_f = m as f64;
    debug_assert!(q > m_f);
    2.0 * m_f * 3f64.powi(m as i32 - 1) * (radius as f64).powf(m_f - q) / (q - m_f)
}

/// Largest cube radius whose term count stays within `MAX_SERIES_TERMS`.
fn max_radius(m: usize) -> u64 {
    let side = (MAX_SERIES_TERMS as f64).powf(1.0 / m as f64).floor() as u64;
    let mut r = side.saturating_sub(1) / 2;
    while r > 1 && (2 * r + 1).checked_pow(m as u32).is_none_or(|c| c > MAX_SERIES_TERMS) {
        r -= 1;
    }
    r.max(1)
}

/// Smallest `R ≥ 1` with `bound(R) ≤ tol`, by bisection on the nonincreasing
/// bound.
fn select_radius(m: usize, bound: impl Fn(u64) -> f64, tol: f64) -> Result<u64> {
    let hi_limit = max_radius(m);
    let achieved = bound(hi_limit);
    if achieved > tol {
        return Err(Error::Convergence { tol, achieved, radius: hi_limit });
    }
    let (mut lo, mut hi) = (1u64, hi_limit);
    if bound(lo) <= tol {
        return Ok(lo);
    }
    // invariant: bound(lo) > tol >= bound(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if bound(mid) <= tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Cosine values along the last axis are advanced by complex rotation and
/// reseeded from `sin_cos` every this many steps.
const RESEED: usize = 32;

/// `Σ_{lo ≤ l ≤ hi} weight(‖l‖_{2k}^{2k}) cos(2π l·x)` with compensated
/// summation in lexicographic order.
pub(crate) fn cosine_lattice_sum(x: &[f64], ranges: &[(i64, i64)], k: u32, weight: impl Fn(f64) -> f64) -> f64 {
    let m = x.len();
    debug_assert_eq!(ranges.len(), m);
    let exp = 2 * k as i32;
    // centered representatives make x and -x give mirrored phases
    let xc: Vec<f64> = x.iter().map(|&c| if c >= 0.5 { c - 1.0 } else { c }).collect();
    let (last_lo, last_hi) = ranges[m - 1];
    let x_last = xc[m - 1];
    let (rot_s, rot_c) = (2.0 * std::f64::consts::PI * x_last).sin_cos();

    let mut acc = CompensatedSum::new();
    let mut prefix: Vec<i64> = ranges[..m - 1].iter().map(|&(lo, _)| lo).collect();
    if ranges.iter().any(|&(lo, hi)| lo > hi) {
        return 0.0;
    }
    loop {
        let mut base_norm = 0.0;
        let mut base_phase = 0.0;
        for (i, &l) in prefix.iter().enumerate() {
            base_norm += (l as f64).powi(exp);
            base_phase += l as f64 * xc[i];
        }
        let mut c = 0.0;
        let mut s = 0.0;
        for (step, l) in (last_lo..=last_hi).enumerate() {
            if step % RESEED == 0 {
                let phase = base_phase + l as f64 * x_last;
                let phase = phase - phase.round();
                (s, c) = (2.0 * std::f64::consts::PI * phase).sin_cos();
            }
            let w = weight(base_norm + (l as f64).powi(exp));
            acc.add(w * c);
            let c_next = c * rot_c - s * rot_s;
            s = s * rot_c + c * rot_s;
            c = c_next;
        }
        // advance the odometer over the leading axes
        let mut axis = m - 1;
        loop {
            if axis == 0 {
                return acc.value();
            }
            axis -= 1;
            if prefix[axis] < ranges[axis].1 {
                prefix[axis] += 1;
                break;
            }
            prefix[axis] = ranges[axis].0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{enumerate_box, norm_2k};
    use std::f64::consts::PI;

    fn pt(c: &[f64]) -> TorusPoint {
        TorusPoint::wrap(c).unwrap()
    }

    /// Direct enumeration with plain `cos`, independent of the rotation
    /// recurrence.
    fn brute_force(x: &TorusPoint, omega: &FrequencyBound, k: u32, lambda: f64) -> f64 {
        enumerate_box(omega)
            .unwrap()
            .iter()
            .map(|l| (2.0 * PI * l.dot(x)).cos() / (1.0 + lambda * norm_2k(l, k).unwrap()))
            .sum()
    }

    #[test]
    fn spec_validation() {
        assert!(KernelSpec::full(2, 1, 1.0).is_err());
        assert!(KernelSpec::full(3, 2, 1.0).is_ok());
        assert!(KernelSpec::full(1, 1, 0.0).is_err());
        assert!(KernelSpec::full(1, 1, f64::NAN).is_err());
        assert!(KernelSpec::full(1, 1, 1.0).unwrap().with_truncation(TruncationPolicy::Tolerance(0.0)).is_err());
    }

    #[test]
    fn g_at_origin_matches_closed_form() {
        // Σ_{l∈Z} 1/(1+l²) = π coth π
        let spec = KernelSpec::full(1, 1, 1.0).unwrap().with_truncation(TruncationPolicy::Tolerance(4e-7)).unwrap();
        let v = eval_g_detailed(&pt(&[0.0]), &spec).unwrap();
        let exact = PI / PI.tanh();
        assert!((v.value - exact).abs() <= v.tail_bound + 1e-12);
        assert!((v.value - exact).abs() < 1e-6);
        assert!((exact - 3.153348).abs() < 1e-6);
    }

    #[test]
    fn g_matches_closed_form_off_origin() {
        // Σ_l cos(2πlx)/(1+λl²) = (π/√λ) cosh(π(1-2x)/√λ)/sinh(π/√λ) on [0,1]
        let lambda: f64 = 4.0;
        let a = 1.0 / lambda.sqrt();
        let spec = KernelSpec::full(1, 1, lambda).unwrap().with_truncation(TruncationPolicy::Tolerance(1e-7)).unwrap();
        for &x in &[0.1, 0.37, 0.5, 0.81] {
            let exact = (PI * a) * (PI * a * (1.0 - 2.0 * x)).cosh() / (PI * a).sinh();
            let v = eval_g(&pt(&[x]), &spec).unwrap();
            assert!((v - exact).abs() < 1e-7, "x={x}: {v} vs {exact}");
        }
    }

    #[test]
    fn g_tends_to_one_for_large_lambda() {
        let spec = KernelSpec::full(1, 1, 1e9).unwrap();
        let v = eval_g(&pt(&[0.3]), &spec).unwrap();
        assert!((v - 1.0).abs() < 1e-8);
    }

    #[test]
    fn unattainable_tolerance_reports_bound() {
        let spec = KernelSpec::full(1, 1, 1.0).unwrap().with_truncation(TruncationPolicy::Tolerance(1e-12)).unwrap();
        match eval_g(&pt(&[0.2]), &spec) {
            Err(Error::Convergence { achieved, radius, .. }) => {
                assert!(achieved > 1e-12);
                assert_eq!(radius, max_radius(1));
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn tail_bound_is_monotone_and_dominates_partial_tails() {
        let spec = KernelSpec::full(1, 1, 1.0).unwrap();
        for r in 1..200u64 {
            assert!(tail_bound(r, &spec) >= tail_bound(r + 1, &spec));
            // brute-force partial tail 2 Σ_{R<l≤R+10^5} 1/(1+l²)
            if r % 37 == 1 {
                let partial: f64 = ((r + 1)..(r + 100_000)).map(|l| 2.0 / (1.0 + (l * l) as f64)).sum();
                assert!(tail_bound(r, &spec) >= partial);
            }
        }
        assert!(tail_bound(0, &spec).is_infinite());
        let spec2 = KernelSpec::full(2, 2, 3.0).unwrap();
        let r = spec2.clone().with_truncation(TruncationPolicy::Tolerance(1e-6)).unwrap().resolve_radius().unwrap();
        assert!(tail_bound(r, &spec2) <= 1e-6);
        assert!(tail_bound(r - 1, &spec2) > 1e-6);
    }

    #[test]
    fn increasing_radius_moves_g_by_at_most_tail_bound() {
        let spec = KernelSpec::full(2, 2, 0.5).unwrap();
        let x = [0.13, 0.71];
        for r in [2u64, 5, 11] {
            let a = series_g(&x, r, &spec);
            let b = series_g(&x, 4 * r, &spec);
            assert!((a - b).abs() <= tail_bound(r, &spec));
        }
    }

    #[test]
    fn w_examples() {
        let spec = KernelSpec::truncated(FrequencyBound::new(vec![0, 0]), 2, 3.0).unwrap();
        assert_eq!(eval_w(&pt(&[0.3, 0.9]), &spec).unwrap(), 1.0);

        for (omega, k, lambda) in [(vec![5], 1, 2.0), (vec![3, 4], 2, 0.7), (vec![2, 1, 2], 2, 10.0)] {
            let omega = FrequencyBound::new(omega);
            let spec = KernelSpec::truncated(omega.clone(), k, lambda).unwrap();
            let m = omega.dim();
            let origin = TorusPoint::zero(m);
            let at0 = eval_w(&origin, &spec).unwrap();
            let direct: f64 = enumerate_box(&omega)
                .unwrap()
                .iter()
                .map(|l| 1.0 / (1.0 + lambda * norm_2k(l, k).unwrap()))
                .sum();
            assert!((at0 - direct).abs() < 1e-13);
            let x = pt(&[0.123, 0.456, 0.789][..m]);
            assert!((eval_w(&x, &spec).unwrap() - brute_force(&x, &omega, k, lambda)).abs() < 1e-12);
        }
        assert!(eval_w(&pt(&[0.1]), &KernelSpec::full(1, 1, 1.0).unwrap()).is_err());
    }

    #[test]
    fn w_approaches_g_as_omega_grows() {
        let full = KernelSpec::full(1, 1, 2.0).unwrap().with_truncation(TruncationPolicy::Tolerance(1e-12 * 0.5)).unwrap();
        let full = full.with_truncation(TruncationPolicy::Radius(4_000_000)).unwrap();
        let x = pt(&[0.27]);
        let g = eval_g_detailed(&x, &full).unwrap();
        for w in [4u32, 16, 64, 256] {
            let spec = full.with_omega(Some(FrequencyBound::new(vec![w]))).unwrap();
            let diff = (eval_w(&x, &spec).unwrap() - g.value).abs();
            assert!(diff <= tail_bound(w as u64, &full) + g.tail_bound);
        }
    }

    #[test]
    fn projection_consistency_with_cube() {
        let spec = KernelSpec::full(2, 2, 1.5).unwrap();
        let x = [0.31, 0.62];
        let w_spec = spec.with_omega(Some(FrequencyBound::uniform(2, 7))).unwrap();
        assert_eq!(series_g(&x, 7, &spec), series_w(&x, w_spec.omega().unwrap(), &w_spec));
    }

    #[test]
    fn kernels_are_even_and_peak_at_origin() {
        let w_spec = KernelSpec::truncated(FrequencyBound::new(vec![6, 3]), 2, 0.8).unwrap();
        let g_spec = KernelSpec::full(1, 1, 3.0).unwrap().with_truncation(TruncationPolicy::Radius(50_000)).unwrap();
        let origin2 = w_spec.value(&TorusPoint::zero(2)).unwrap();
        for i in 0..50 {
            let a = (i as f64 * 0.618_033_988_749_895) % 1.0;
            let b = (i as f64 * 0.754_877_666_246_693) % 1.0;
            let p = pt(&[a, b]);
            let wp = eval_w(&p, &w_spec).unwrap();
            assert!((wp - eval_w(&p.negate(), &w_spec).unwrap()).abs() < 1e-13);
            assert!(wp <= origin2);
            let q = pt(&[a]);
            let gq = eval_g(&q, &g_spec).unwrap();
            assert!((gq - eval_g(&q.negate(), &g_spec).unwrap()).abs() < 1e-13);
            let s1 = eval_s_r(&q, 1, &g_spec, TruncationPolicy::Radius(1000)).unwrap();
            let s1n = eval_s_r(&q.negate(), 1, &g_spec, TruncationPolicy::Radius(1000)).unwrap();
            assert!((s1 - s1n).abs() < 1e-13);
            let d = eval_dirichlet(&p, &FrequencyBound::new(vec![4, 5])).unwrap();
            assert!((d - eval_dirichlet(&p.negate(), &FrequencyBound::new(vec![4, 5])).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn dirichlet_examples() {
        let om = FrequencyBound::new(vec![3, 2]);
        assert!((eval_dirichlet(&TorusPoint::zero(2), &om).unwrap() - 1.0).abs() < 1e-15);
        let v = eval_dirichlet(&pt(&[1.0 / 3.0]), &FrequencyBound::new(vec![2])).unwrap();
        assert!(v.abs() < 1e-15);
        assert!(eval_dirichlet(&pt(&[0.1]), &FrequencyBound::new(vec![0])).is_err());

        // |D_ω(x)| ≤ 1/(sin(πx)(ω+1)), so (ω+1)|D_ω(x)| stays bounded
        let x = pt(&[0.2137]);
        let bound = 1.0 / (PI * 0.2137).sin();
        for w in [4u32, 16, 64, 256, 1024] {
            let d = eval_dirichlet(&x, &FrequencyBound::new(vec![w])).unwrap();
            assert!(d.abs() * (w as f64 + 1.0) <= bound + 1e-9);
        }
    }

    #[test]
    fn s_r_closed_forms() {
        let spec = KernelSpec::full(1, 1, 2.0).unwrap();
        let s1 = eval_s_r_detailed(&pt(&[0.0]), 1, &spec, TruncationPolicy::Tolerance(1e-6)).unwrap();
        assert!((s1.value - PI * PI / 3.0).abs() <= s1.tail_bound + 1e-12);
        let s2 = eval_s_r_detailed(&pt(&[0.0]), 2, &spec, TruncationPolicy::Tolerance(1e-12)).unwrap();
        assert!((s2.value - PI.powi(4) / 45.0).abs() < 1e-11);
        // Σ_{l≥1} cos(2πlx)/l² = π²(x² - x + 1/6)
        let x = 0.3;
        let s1x = eval_s_r(&pt(&[x]), 1, &spec, TruncationPolicy::Tolerance(1e-6)).unwrap();
        assert!((s1x - 2.0 * PI * PI * (x * x - x + 1.0 / 6.0)).abs() < 1e-6);
        assert!(eval_s_r(&pt(&[0.0]), 0, &spec, TruncationPolicy::Radius(3)).is_err());
    }

    #[test]
    fn asymptotic_partial_sums() {
        let spec = KernelSpec::full(1, 1, 100.0).unwrap().with_truncation(TruncationPolicy::Radius(20_000)).unwrap();
        let trunc = TruncationPolicy::Radius(20_000);
        assert_eq!(asymptotic_g(&pt(&[0.4]), &spec, 0, trunc).unwrap(), 1.0);
        assert!(asymptotic_g(&pt(&[0.4]), &KernelSpec::full(1, 1, 1.0).unwrap(), 1, trunc).is_err());

        // same radius for g and s_r, so truncation tails cancel to high order
        let mut c1 = Vec::new();
        let mut ratio = Vec::new();
        for lambda in [100.0, 200.0, 400.0, 800.0] {
            let spec = spec.with_lambda(lambda).unwrap();
            let mut e1: f64 = 0.0;
            let mut e2: f64 = 0.0;
            for j in 0..64 {
                let x = pt(&[j as f64 / 64.0]);
                let g = eval_g(&x, &spec).unwrap();
                e1 = e1.max((g - asymptotic_g(&x, &spec, 1, trunc).unwrap()).abs());
                e2 = e2.max((g - asymptotic_g(&x, &spec, 2, trunc).unwrap()).abs());
            }
            c1.push(e1 * lambda * lambda);
            ratio.push(e2 / e1 * lambda);
        }
        let (lo, hi) = c1.iter().fold((f64::MAX, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
        assert!(hi / lo < 1.1, "{c1:?}");
        // error(order 2)/error(order 1) = O(1/λ)
        let (lo, hi) = ratio.iter().fold((f64::MAX, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
        assert!(hi / lo < 1.1, "{ratio:?}");
    }
}
