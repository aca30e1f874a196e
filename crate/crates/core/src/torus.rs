//! Points on the unit torus `[0,1)^m`, integer frequency vectors and the
//! index sets every kernel sum runs over.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest value `norm_2k` will return exactly.
const NORM_LIMIT: u64 = 1 << 62;

/// A point on the torus, stored as its canonical representative in `[0,1)^m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TorusPoint(Vec<f64>);

impl TorusPoint {
    /// Reduces every coordinate modulo 1.
    pub fn wrap(coords: &[f64]) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Domain("a torus point needs at least one coordinate".into()));
        }
        let mut out = Vec::with_capacity(coords.len());
        for (i, &x) in coords.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::Domain(format!("coordinate {i} is not finite ({x})")));
            }
            out.push(wrap_scalar(x));
        }
        Ok(TorusPoint(out))
    }

    /// The origin of `T^m`.
    pub fn zero(m: usize) -> Self {
        TorusPoint(vec![0.0; m])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    /// The point `-x` on the torus.
    pub fn negate(&self) -> Self {
        TorusPoint(self.0.iter().map(|&x| wrap_scalar(-x)).collect())
    }

    /// Euclidean distance under the periodic (minimum image) metric.
    pub fn distance(&self, other: &TorusPoint) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| {
                let d = (a - b).abs();
                let d = d.min(1.0 - d);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

#[inline]
pub(crate) fn wrap_scalar(x: f64) -> f64 {
    let r = x - x.floor();
    // x slightly below an integer rounds up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// `wrap(a - b)`.
pub fn periodic_diff(a: &TorusPoint, b: &TorusPoint) -> Result<TorusPoint> {
    if a.dim() != b.dim() {
        return Err(Error::Domain(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(TorusPoint(
        a.0.iter().zip(&b.0).map(|(&x, &y)| wrap_scalar(x - y)).collect(),
    ))
}

/// An integer frequency vector `l ∈ Z^m`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<i64>);

impl MultiIndex {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0)
    }

    pub fn neg(&self) -> Self {
        MultiIndex(self.0.iter().map(|&v| -v).collect())
    }

    /// `l · x` for a torus point.
    pub fn dot(&self, x: &TorusPoint) -> f64 {
        self.0.iter().zip(x.coords()).map(|(&l, &c)| l as f64 * c).sum()
    }

    /// True when the first nonzero entry is positive. Together with the
    /// zero index this picks one representative of every `{l, -l}` pair.
    pub fn in_upper_half(&self) -> bool {
        self.0.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0)
    }
}

/// Per-axis degree bound `ω` of `TP_ω`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FrequencyBound(pub Vec<u32>);

impl FrequencyBound {
    pub fn new(omega: Vec<u32>) -> Self {
        FrequencyBound(omega)
    }

    pub fn uniform(m: usize, w: u32) -> Self {
        FrequencyBound(vec![w; m])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    /// `∏ (2ω_i + 1)`, the dimension of `TP_ω`.
    pub fn box_size(&self) -> Result<u64> {
        self.0.iter().try_fold(1u64, |acc, &w| {
            acc.checked_mul(2 * w as u64 + 1)
                .ok_or_else(|| Error::Range(format!("index box {:?} overflows a 64-bit count", self.0)))
        })
    }

    /// Whether `-ω ≤ l ≤ ω`.
    pub fn contains(&self, l: &MultiIndex) -> bool {
        l.dim() == self.dim() && l.0.iter().zip(&self.0).all(|(&v, &w)| v.unsigned_abs() <= w as u64)
    }

    /// Doubles every entry.
    pub fn doubled(&self) -> Self {
        FrequencyBound(self.0.iter().map(|&w| w.saturating_mul(2)).collect())
    }

    /// Euclidean length of the bound vector.
    pub fn norm2(&self) -> f64 {
        self.0.iter().map(|&w| (w as f64).powi(2)).sum::<f64>().sqrt()
    }
}

impl std::fmt::Display for FrequencyBound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|w| w.to_string()).collect();
        write!(f, "{}", parts.join(";"))
    }
}

/// `‖l‖_{2k}^{2k} = Σ l_i^{2k}`, exact in integer arithmetic.
pub fn norm_2k(l: &MultiIndex, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("smoothness order k must be positive".into()));
    }
    let mut total: u64 = 0;
    for &v in &l.0 {
        let term = v
            .unsigned_abs()
            .checked_pow(2 * k)
            .filter(|&t| t <= NORM_LIMIT)
            .ok_or_else(|| Error::Range(format!("|{v}|^{} exceeds 2^62", 2 * k)))?;
        total = total
            .checked_add(term)
            .filter(|&t| t <= NORM_LIMIT)
            .ok_or_else(|| Error::Range(format!("‖{:?}‖_{{2k}}^{{2k}} exceeds 2^62", l.0)))?;
    }
    Ok(total as f64)
}

/// All `l` with `lo_i ≤ l_i ≤ hi_i`, lexicographic (last axis fastest).
fn enumerate_ranges(ranges: &[(i64, i64)]) -> Vec<MultiIndex> {
    let count: usize = ranges.iter().map(|&(lo, hi)| (hi - lo + 1) as usize).product();
    let mut out = Vec::with_capacity(count);
    let mut cur: Vec<i64> = ranges.iter().map(|&(lo, _)| lo).collect();
    if ranges.is_empty() {
        return out;
    }
    loop {
        out.push(MultiIndex(cur.clone()));
        let mut axis = ranges.len();
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            if cur[axis] < ranges[axis].1 {
                cur[axis] += 1;
                break;
            }
            cur[axis] = ranges[axis].0;
        }
    }
}

/// Every index in the box `-ω ≤ l ≤ ω`, in lexicographic order.
pub fn enumerate_box(omega: &FrequencyBound) -> Result<Vec<MultiIndex>> {
    let count = omega.box_size()?;
    if count > usize::MAX as u64 {
        return Err(Error::Range(format!("{count} indices do not fit in memory")));
    }
    let ranges: Vec<(i64, i64)> = omega.0.iter().map(|&w| (-(w as i64), w as i64)).collect();
    Ok(enumerate_ranges(&ranges))
}

/// Every index with `max_i |l_i| ≤ radius`, in lexicographic order.
pub fn enumerate_cube(radius: u64, m: usize) -> Result<Vec<MultiIndex>> {
    let side = radius
        .checked_mul(2)
        .and_then(|v| v.checked_add(1))
        .ok_or_else(|| Error::Range(format!("cube radius {radius} overflows")))?;
    let count = (0..m).try_fold(1u64, |acc, _| acc.checked_mul(side));
    if count.is_none() || radius > i64::MAX as u64 / 2 {
        return Err(Error::Range(format!("cube of radius {radius} in dimension {m} overflows a 64-bit count")));
    }
    let r = radius as i64;
    Ok(enumerate_ranges(&vec![(-r, r); m]))
}
