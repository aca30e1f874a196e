//! Independent ground truth: the regularized functional itself and its
//! direct minimizer over `TP_ω`, computed in coefficient space.
//!
//! The functional is
//!
//! ```text
//! D(u) = (λ²/n) Σ_i (u(p_i) - q_i)² + λ Σ_l ‖l‖_{2k}^{2k} |û_l|² + Σ_l |û_l|²
//! ```
//!
//! The derivative penalty deliberately omits the `(2π)^{2k}` factor of the
//! true `k`-gradient so that it matches the kernel weights `1/(1 + λ‖l‖)`.
//! With that factor included, the same minimizer is obtained by replacing `λ`
//! with `λ (2π)^{2k}` in the penalty only.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::solver::{assemble, evaluate_many, FittedModel, ScatteredData};
use crate::sum::CompensatedSum;
use crate::targets::TargetFunction;
use crate::torus::{norm_2k, FrequencyBound, TorusPoint};
use crate::trig::{half_box, TrigPolynomial};

/// Coefficient-space representation of an element of `TP_ω`.
pub type CoeffVector = TrigPolynomial;

/// Default cap on `∏(2ω_i + 1)` for [`direct_minimize`].
pub const DEFAULT_COEFF_CAP: u64 = 100_000;

/// Something whose regularized functional can be evaluated.
pub trait Candidate {
    fn dim(&self) -> usize;
    fn values_at(&self, points: &[TorusPoint]) -> Result<Vec<f64>>;
    /// `‖u‖² + λ Σ ‖l‖_{2k}^{2k} |û_l|²`.
    fn regularization(&self, lambda: f64, k: u32) -> Result<f64>;
}

impl Candidate for TrigPolynomial {
    fn dim(&self) -> usize {
        TrigPolynomial::dim(self)
    }

    fn values_at(&self, points: &[TorusPoint]) -> Result<Vec<f64>> {
        points.iter().map(|p| self.evaluate(p)).collect()
    }

    fn regularization(&self, lambda: f64, k: u32) -> Result<f64> {
        Ok(self.l2_norm_sq() + lambda * self.gradient_energy(k)?)
    }
}

impl Candidate for FittedModel {
    fn dim(&self) -> usize {
        FittedModel::dim(self)
    }

    fn values_at(&self, points: &[TorusPoint]) -> Result<Vec<f64>> {
        evaluate_many(self, points)
    }

    /// Truncated models go through their coefficients. For a full-kernel
    /// model with the same `λ` and `k`, the regularizer equals `cᵀ G c / n²`.
    fn regularization(&self, lambda: f64, k: u32) -> Result<f64> {
        if self.spec().omega().is_some() {
            return self.to_trig()?.regularization(lambda, k);
        }
        if lambda != self.spec().lambda() || k != self.spec().k() {
            return Err(Error::Unsupported(
                "the regularizer of a full-kernel model is only available at its own λ and k".into(),
            ));
        }
        let g = assemble(self.points(), self.spec())?;
        let c = self.coeffs();
        let n = c.len();
        let mut acc = CompensatedSum::new();
        for i in 0..n {
            let row: f64 = (0..n).map(|j| g.get(i, j) * c[j]).sum();
            acc.add(c[i] * row);
        }
        Ok(acc.value() / (n * n) as f64)
    }
}

/// Data term plus regularizer at weight `λ` and order `k`. With `data` absent
/// only the regularizer is returned.
pub fn functional_value<C: Candidate + ?Sized>(
    u: &C,
    data: Option<&ScatteredData>,
    lambda: f64,
    k: u32,
) -> Result<f64> {
    let mut total = u.regularization(lambda, k)?;
    if let Some(data) = data {
        if data.dim() != u.dim() {
            return Err(Error::Domain(format!("data has dimension {}, function has {}", data.dim(), u.dim())));
        }
        let vals = u.values_at(data.points())?;
        let misfit: f64 = vals.iter().zip(data.values()).map(|(v, q)| (v - q) * (v - q)).collect::<CompensatedSum>().value();
        total += lambda * lambda / data.len() as f64 * misfit;
    }
    Ok(total)
}

/// Result of [`direct_minimize`].
#[derive(Clone, Debug)]
pub struct DirectSolution {
    pub coeffs: CoeffVector,
    /// `‖∇D‖ / ‖(λ²/n) Φᵀ q‖` at the returned coefficients.
    pub relative_gradient: f64,
}

/// Minimizes the functional over `TP_ω` by forming and solving the normal
/// equations in the real orthonormal basis `{1, √2 cos 2πl·x, √2 sin 2πl·x}`.
pub fn direct_minimize(data: &ScatteredData, lambda: f64, k: u32, omega: &FrequencyBound) -> Result<DirectSolution> {
    direct_minimize_capped(data, lambda, k, omega, DEFAULT_COEFF_CAP)
}

pub fn direct_minimize_capped(
    data: &ScatteredData,
    lambda: f64,
    k: u32,
    omega: &FrequencyBound,
    cap: u64,
) -> Result<DirectSolution> {
    if omega.dim() != data.dim() {
        return Err(Error::Domain(format!("bound has {} axes, data has dimension {}", omega.dim(), data.dim())));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!("λ must be positive and finite, got {lambda}")));
    }
    let size = omega.box_size()?;
    if size > cap {
        return Err(Error::Range(format!("{size} coefficients exceed the cap of {cap}")));
    }
    let half = half_box(omega)?;
    let dim = 1 + 2 * half.len();
    let n = data.len();

    // design matrix: basis functions evaluated at the sites
    let mut phi = DMatrix::<f64>::zeros(n, dim);
    for (i, p) in data.points().iter().enumerate() {
        phi[(i, 0)] = 1.0;
        for (j, l) in half.iter().enumerate() {
            let t = l.dot(p);
            let (s, c) = (2.0 * PI * (t - t.round())).sin_cos();
            phi[(i, 1 + 2 * j)] = SQRT_2 * c;
            phi[(i, 2 + 2 * j)] = SQRT_2 * s;
        }
    }
    let mut penalty = vec![1.0; dim];
    for (j, l) in half.iter().enumerate() {
        let w = 1.0 + lambda * norm_2k(l, k)?;
        penalty[1 + 2 * j] = w;
        penalty[2 + 2 * j] = w;
    }
    let scale = lambda * lambda / n as f64;
    let q = DVector::from_column_slice(data.values());
    let mut a = phi.transpose() * &phi * scale;
    for (i, w) in penalty.iter().enumerate() {
        a[(i, i)] += w;
    }
    let rhs = phi.transpose() * &q * scale;
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("normal equations are not positive definite".into()))?;
    let mut x = chol.solve(&rhs);
    // one refinement step
    let r = &rhs - &a * &x;
    x += chol.solve(&r);

    let grad = &a * &x - &rhs;
    let denom = rhs.norm().max(f64::MIN_POSITIVE);
    let relative_gradient = if rhs.norm() == 0.0 { grad.norm() } else { grad.norm() / denom };

    let mut coeffs = TrigPolynomial::zeros(omega)?;
    *coeffs.constant_mut() = x[0];
    for (j, mode) in coeffs.modes_mut().iter_mut().enumerate() {
        mode.cos = SQRT_2 * x[1 + 2 * j];
        mode.sin = SQRT_2 * x[2 + 2 * j];
    }
    Ok(DirectSolution { coeffs, relative_gradient })
}

/// Convenience wrapper minimizing for the parameters of a truncated kernel.
pub fn direct_minimize_for(data: &ScatteredData, spec: &KernelSpec) -> Result<DirectSolution> {
    let omega = spec
        .omega()
        .ok_or_else(|| Error::Unsupported("the coefficient-space oracle needs a frequency bound".into()))?;
    direct_minimize(data, spec.lambda(), spec.k(), omega)
}

/// `P_ω ψ`: the target's Fourier series cut to the box.
pub fn project_target(target: &TargetFunction, omega: &FrequencyBound) -> Result<CoeffVector> {
    if omega.dim() != target.dim() {
        return Err(Error::Domain(format!("bound has {} axes, target has {}", omega.dim(), target.dim())));
    }
    TrigPolynomial::from_complex(omega, |l| target.coefficient(l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::fit;
    use crate::targets::by_name;
    use crate::torus::MultiIndex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(n: usize, m: usize, seed: u64) -> ScatteredData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n).map(|_| TorusPoint::wrap(&(0..m).map(|_| rng.gen::<f64>()).collect::<Vec<_>>()).unwrap()).collect();
        let vals = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        ScatteredData::new(pts, vals).unwrap()
    }

    #[test]
    fn functional_trivial_cases() {
        let omega = FrequencyBound::new(vec![3]);
        let zero = TrigPolynomial::zeros(&omega).unwrap();
        let data = random_data(5, 1, 1);
        let z = data.with_values(vec![0.0; 5]).unwrap();
        assert_eq!(functional_value(&zero, Some(&z), 7.0, 1).unwrap(), 0.0);
        let expect = 49.0 / 5.0 * data.values().iter().map(|q| q * q).sum::<f64>();
        assert!((functional_value(&zero, Some(&data), 7.0, 1).unwrap() - expect).abs() < 1e-13);
    }

    #[test]
    fn functional_single_cosine() {
        // u = cos 2πx: ‖u‖² = 1/2, Σ l² |û_l|² = 1/2
        let omega = FrequencyBound::new(vec![2]);
        let u = TrigPolynomial::from_complex(&omega, |l| if l.0[0].abs() == 1 { (0.5, 0.0) } else { (0.0, 0.0) }).unwrap();
        for lambda in [0.5, 3.0, 40.0] {
            let v = functional_value(&u, None, lambda, 1).unwrap();
            assert!((v - (lambda * 0.5 + 0.5)).abs() < 1e-14);
        }
    }

    #[test]
    fn single_site_constant() {
        let data = ScatteredData::new(vec![TorusPoint::wrap(&[0.3]).unwrap()], vec![2.0]).unwrap();
        let lambda = 3.0;
        let sol = direct_minimize(&data, lambda, 1, &FrequencyBound::new(vec![0])).unwrap();
        let expect = lambda * lambda * 2.0 / (1.0 + lambda * lambda);
        assert!((sol.coeffs.constant() - expect).abs() < 1e-14);
        assert!(sol.coeffs.modes().is_empty());
    }

    #[test]
    fn zero_data_gives_zero_coefficients() {
        let data = random_data(6, 2, 2).with_values(vec![0.0; 6]).unwrap();
        let sol = direct_minimize(&data, 10.0, 2, &FrequencyBound::new(vec![2, 3])).unwrap();
        assert_eq!(sol.coeffs.constant(), 0.0);
        assert!(sol.coeffs.modes().iter().all(|m| m.cos == 0.0 && m.sin == 0.0));
    }

    #[test]
    fn oracle_matches_representer() {
        for (seed, lambda) in [(10u64, 1.0), (11, 10.0), (12, 100.0)] {
            let data = random_data(12, 1, seed);
            let spec = KernelSpec::truncated(FrequencyBound::new(vec![9]), 1, lambda).unwrap();
            let model = fit(&data, &spec).unwrap();
            let sol = direct_minimize_for(&data, &spec).unwrap();
            assert!(sol.relative_gradient <= 1e-8);
            let probes = random_data(50, 1, seed + 100);
            let a = model.values_at(probes.points()).unwrap();
            let b = sol.coeffs.values_at(probes.points()).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9, "λ={lambda}: {x} vs {y}");
            }
            let fa = functional_value(&model, Some(&data), lambda, 1).unwrap();
            let fb = functional_value(&sol.coeffs, Some(&data), lambda, 1).unwrap();
            assert!((fa - fb).abs() <= 1e-8 * (1.0 + fb));
        }
    }

    #[test]
    fn full_kernel_regularizer_identity() {
        // u ∈ TP when the data lies in a small box; compare against the
        // truncated kernel at a radius so large the tail is negligible
        let data = random_data(6, 1, 20);
        let radius = 4000u64;
        let full = KernelSpec::full(1, 1, 50.0)
            .unwrap()
            .with_truncation(crate::kernel::TruncationPolicy::Radius(radius))
            .unwrap();
        let trunc = KernelSpec::truncated(FrequencyBound::new(vec![radius as u32]), 1, 50.0).unwrap();
        let a = fit(&data, &full).unwrap();
        let b = fit(&data, &trunc).unwrap();
        let ra = a.regularization(50.0, 1).unwrap();
        let rb = b.regularization(50.0, 1).unwrap();
        assert!((ra - rb).abs() < 1e-10 * (1.0 + rb), "{ra} vs {rb}");
        assert!(a.regularization(10.0, 1).is_err());
    }

    #[test]
    fn projection_properties() {
        let omega = FrequencyBound::new(vec![7]);
        let sq = by_name("square-wave").unwrap();
        let p = project_target(&sq, &omega).unwrap();
        for m in p.modes() {
            let l = m.index.0[0];
            if l % 2 == 0 {
                assert_eq!((m.cos, m.sin), (0.0, 0.0));
            } else {
                assert!((m.sin - 4.0 / (PI * l as f64)).abs() < 1e-15);
            }
        }
        let twice = p.project(&omega).unwrap();
        assert_eq!(twice, p);

        let smooth = by_name("smooth").unwrap();
        let p = project_target(&smooth, &FrequencyBound::new(vec![4])).unwrap();
        assert_eq!(p.coefficient(&MultiIndex(vec![2])), (0.25, 0.0));
        assert!((p.l2_norm_sq() - smooth.l2_norm_sq()).abs() < 1e-15);

        // Pythagoras with the projection error
        let saw = by_name("sawtooth").unwrap();
        let omega = FrequencyBound::new(vec![20]);
        let p = project_target(&saw, &omega).unwrap();
        let tail = crate::targets::projection_error(&saw, &omega).unwrap();
        assert!((p.l2_norm_sq() + tail - saw.l2_norm_sq()).abs() < 1e-10);
    }

    #[test]
    fn cap_is_enforced() {
        let data = random_data(3, 2, 30);
        assert!(matches!(
            direct_minimize_capped(&data, 1.0, 2, &FrequencyBound::new(vec![10, 10]), 100),
            Err(Error::Range(_))
        ));
    }
}
