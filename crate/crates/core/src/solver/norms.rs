//! Residual L2 norms with a partition-independent reduction.
//!
//! Squares are accumulated into an exact fixed-point sum, so the final norm
//! depends only on the multiset of residual values: one rank or eight, any
//! iteration order, same bits.

use crate::mesh::{interior_box, Box3, FieldSet, Var};
use crate::scalar::Real;

const DIGIT_BITS: u32 = 32;
const DIGIT_MASK: i64 = (1 << DIGIT_BITS) - 1;
/// Weight of digit 0 is `2^BASE_EXP`; below the smallest subnormal.
const BASE_EXP: i32 = -1088;
const DIGITS: usize = 68;
/// Additions allowed between carry propagations (each adds < 2^32 per digit).
const CARRY_BUDGET: u32 = 1 << 29;

/// Exact sum of finite `f64` values.
#[derive(Clone, PartialEq, Eq)]
pub struct ExactSum {
    digits: [i64; DIGITS],
    pending: u32,
    non_finite: bool,
}

impl std::fmt::Debug for ExactSum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExactSum").field("value", &self.value()).finish()
    }
}

impl Default for ExactSum {
    fn default() -> Self {
        ExactSum { digits: [0; DIGITS], pending: 0, non_finite: false }
    }
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        if !x.is_finite() {
            self.non_finite = true;
            return;
        }
        if x == 0.0 {
            return;
        }
        let bits = x.to_bits();
        let negative = bits >> 63 == 1;
        let biased = ((bits >> 52) & 0x7ff) as i32;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, exp) = if biased == 0 { (frac, -1074) } else { (frac | (1 << 52), biased - 1075) };
        let pos = (exp - BASE_EXP) as u32;
        let (digit, shift) = ((pos / DIGIT_BITS) as usize, pos % DIGIT_BITS);
        let wide = (mant as u128) << shift;
        for d in 0..3 {
            let part = ((wide >> (DIGIT_BITS * d as u32)) as i64) & DIGIT_MASK;
            if part != 0 {
                if negative {
                    self.digits[digit + d] -= part;
                } else {
                    self.digits[digit + d] += part;
                }
            }
        }
        self.pending += 1;
        if self.pending >= CARRY_BUDGET {
            self.normalize();
        }
    }

    /// Adds another exact sum; associative and commutative.
    pub fn merge(&mut self, other: &ExactSum) {
        self.normalize();
        let mut o = other.clone();
        o.normalize();
        for (a, b) in self.digits.iter_mut().zip(o.digits.iter()) {
            *a += b;
        }
        self.non_finite |= o.non_finite;
        self.normalize();
    }

    /// Propagates carries so every digit but the top lies in `[0, 2^32)`.
    fn normalize(&mut self) {
        let mut carry = 0i64;
        for d in self.digits.iter_mut() {
            let v = *d + carry;
            carry = v >> DIGIT_BITS;
            *d = v & DIGIT_MASK;
        }
        self.digits[DIGITS - 1] += carry << DIGIT_BITS;
        self.pending = 0;
    }

    /// Nearest `f64` to the exact sum (deterministic, faithful to ~2^-64).
    pub fn value(&self) -> f64 {
        if self.non_finite {
            return f64::NAN;
        }
        let mut s = self.clone();
        s.normalize();
        let negative = s.digits[DIGITS - 1] < 0;
        if negative {
            for d in s.digits.iter_mut() {
                *d = -*d;
            }
            s.normalize();
        }
        let Some(top) = s.digits.iter().rposition(|&d| d != 0) else {
            return 0.0;
        };
        let mut acc = 0.0f64;
        for d in (top.saturating_sub(2)..=top).rev() {
            acc += scale(s.digits[d] as f64, BASE_EXP + DIGIT_BITS as i32 * d as i32);
        }
        if negative {
            -acc
        } else {
            acc
        }
    }
}

/// `x · 2^e` without intermediate overflow or underflow.
fn scale(mut x: f64, mut e: i32) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e)
}

/// Per-equation sums of squared residuals plus the node count.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NormAccumulator {
    pub sums: [ExactSum; 5],
    pub count: usize,
}

impl NormAccumulator {
    pub fn add_region<T: Real>(&mut self, residuals: &FieldSet<T>, region: &Box3) {
        for var in Var::ALL {
            let r = &residuals[var];
            let sum = &mut self.sums[var.index()];
            region.for_each(|i, j, k| {
                let x = r.get(i, j, k).as_f64();
                sum.add(x * x);
            });
        }
        self.count += region.count();
    }

    pub fn merge(&mut self, other: &NormAccumulator) {
        for (a, b) in self.sums.iter_mut().zip(other.sums.iter()) {
            a.merge(b);
        }
        self.count += other.count;
    }

    pub fn finish(&self, iteration: usize) -> ResidualNorms {
        let n = self.count.max(1) as f64;
        ResidualNorms { norms: std::array::from_fn(|v| (self.sums[v].value() / n).sqrt()), iteration }
    }
}

/// Per-equation RMS residuals at one iteration, in [`Var`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualNorms {
    pub norms: [f64; 5],
    pub iteration: usize,
}

impl ResidualNorms {
    pub fn get(&self, var: Var) -> f64 {
        self.norms[var.index()]
    }

    pub fn is_finite(&self) -> bool {
        self.norms.iter().all(|x| x.is_finite())
    }
}

/// `sqrt(Σ R² / N)` per equation over one block's interior.
pub fn residual_norm<T: Real>(residuals: &FieldSet<T>, iteration: usize) -> ResidualNorms {
    let mut acc = NormAccumulator::default();
    acc.add_region(residuals, &interior_box(residuals.grid().n()));
    acc.finish(iteration)
}

/// Tracks the largest norm seen per equation and decides convergence.
#[derive(Debug, Clone, Default)]
pub struct ConvergenceMonitor {
    peak: [f64; 5],
}

impl ConvergenceMonitor {
    /// Records `norms`; returns the norms scaled by their running peaks.
    /// An equation that has never been non-zero reports 0.
    pub fn observe(&mut self, norms: &ResidualNorms) -> [f64; 5] {
        std::array::from_fn(|v| {
            self.peak[v] = self.peak[v].max(norms.norms[v]);
            if self.peak[v] > 0.0 {
                norms.norms[v] / self.peak[v]
            } else {
                0.0
            }
        })
    }

    pub fn converged(relative: &[f64; 5], tol: f64) -> bool {
        relative.iter().all(|&r| r <= tol)
    }
}
