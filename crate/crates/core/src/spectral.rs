//! The heavy-ball iteration map `G(z₁, z₂) = (z₁ − α∇f(z₁) + β(z₁ − z₂), z₁)`
//! and the spectrum of its Jacobian at a critical point.
//!
//! At a critical point of a quadratic with eigenvalues `λ_i` the Jacobian
//! decouples into 2×2 blocks
//!
//! ```text
//! M_i = [ 1 + β − αλ_i   −β ]
//!       [ 1               0 ]
//! ```
//!
//! whose eigenvalues are the roots of `μ² − (1 + β − αλ_i)μ + β = 0`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::problems::{check_dim, GradientOracle, QuadraticProblem};

/// Roots of one 2×2 block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    /// Root of larger magnitude; for a complex pair, the one with `Im ≥ 0`.
    pub mu_hi: Complex64,
    pub mu_lo: Complex64,
    pub is_real: bool,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Where a block's roots sit relative to the unit circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockClass {
    /// Both roots strictly inside the unit circle.
    Stable,
    /// Largest root has magnitude exactly one.
    Unit,
    /// One root outside the unit circle.
    Unstable,
}

impl EigenPair {
    /// Sum of the roots; should equal `1 + β − αλ`.
    pub fn trace(&self) -> Complex64 {
        self.mu_hi + self.mu_lo
    }

    /// Product of the roots; should equal `β`.
    pub fn det(&self) -> Complex64 {
        self.mu_hi * self.mu_lo
    }

    pub fn class(&self) -> BlockClass {
        let m = self.mu_hi.norm();
        if m > 1.0 {
            BlockClass::Unstable
        } else if m == 1.0 {
            BlockClass::Unit
        } else {
            BlockClass::Stable
        }
    }

    /// Number of roots with magnitude greater than one.
    pub fn unstable_count(&self) -> usize {
        usize::from(self.mu_hi.norm() > 1.0) + usize::from(self.mu_lo.norm() > 1.0)
    }
}

/// Roots of `μ² − (1 + β − αλ)μ + β`.
///
/// Real roots are computed as `μ_hi = (s + sign(s)√disc)/2` and
/// `μ_lo = β/μ_hi` to avoid cancellation.
pub fn block_eigenvalues(lambda: f64, alpha: f64, beta: f64) -> EigenPair {
    let c = alpha * lambda;
    let s = 1.0 + beta - c;
    // Same as s² − 4β, but exact for λ = 0 and cancellation-free for λ < 0.
    let disc = (1.0 - beta - c) * (1.0 - beta - c) - 4.0 * c * beta;
    let (mu_hi, mu_lo, is_real) = if disc >= 0.0 {
        let root = disc.sqrt();
        let hi = 0.5 * (s + s.signum() * root);
        let lo = if hi == 0.0 { 0.0 } else { beta / hi };
        (Complex64::new(hi, 0.0), Complex64::new(lo, 0.0), true)
    } else {
        let im = 0.5 * (-disc).sqrt();
        (Complex64::new(0.5 * s, im), Complex64::new(0.5 * s, -im), false)
    };
    EigenPair {
        mu_hi,
        mu_lo,
        is_real,
        lambda,
        alpha,
        beta,
    }
}

/// Result of checking `0 < α < 4/λ₁` and `max(−1 + αλ₁/2, 0) < β < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub ok: bool,
    pub violations: Vec<String>,
}

pub fn param_conditions(alpha: f64, beta: f64, lambda1: f64) -> ParamCheck {
    let mut violations = Vec::new();
    if !(lambda1 > 0.0) {
        violations.push(format!("lambda1 > 0 (got {lambda1})"));
    }
    if !(alpha > 0.0) {
        violations.push(format!("alpha > 0 (got {alpha})"));
    }
    if !(alpha < 4.0 / lambda1) {
        violations.push(format!("alpha < 4/lambda1 = {} (got {alpha})", 4.0 / lambda1));
    }
    let lower = (-1.0 + alpha * lambda1 / 2.0).max(0.0);
    if !(beta > lower) {
        violations.push(format!("beta > max(-1 + alpha*lambda1/2, 0) = {lower} (got {beta})"));
    }
    if !(beta < 1.0) {
        violations.push(format!("beta < 1 (got {beta})"));
    }
    ParamCheck {
        ok: violations.is_empty(),
        violations,
    }
}

/// Block spectra and the stable/unstable split of `DG(x*, x*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumClassification {
    /// Dimension of the invariant subspace for `|μ| ≤ 1`.
    pub stable_dim: usize,
    /// Dimension of the invariant subspace for `|μ| > 1`.
    pub unstable_dim: usize,
    /// One entry per Hessian eigenvalue, in the problem's order.
    pub blocks: Vec<EigenPair>,
    /// `(v_i, v_i/μ_hi)` for each negative eigenvalue.
    pub unstable_eigenvectors: Vec<DVector<f64>>,
}

impl SpectrumClassification {
    pub fn report(&self) -> SpectrumReport {
        SpectrumReport {
            stable_dim: self.stable_dim,
            unstable_dim: self.unstable_dim,
            blocks: self.blocks.iter().map(BlockRecord::from).collect(),
        }
    }
}

/// Classifies the spectrum of the heavy-ball Jacobian at the origin of a quadratic.
pub fn classify_saddle_map(problem: &QuadraticProblem, alpha: f64, beta: f64) -> Result<SpectrumClassification> {
    let check = param_conditions(alpha, beta, problem.lambda_max());
    if !check.ok {
        return Err(Error::Precondition(check.violations.join("; ")));
    }
    let blocks: Vec<EigenPair> = problem
        .eigenvalues()
        .iter()
        .map(|&l| block_eigenvalues(l, alpha, beta))
        .collect();
    for b in blocks.iter().filter(|b| b.lambda == 0.0) {
        // Roots {1, β} must be distinct for the block to be diagonalizable.
        assert!(b.mu_hi != b.mu_lo, "zero-curvature block with repeated root");
    }
    let unstable_dim: usize = blocks.iter().map(EigenPair::unstable_count).sum();
    let mut unstable_eigenvectors = Vec::new();
    for (i, b) in blocks.iter().enumerate().filter(|(_, b)| b.lambda < 0.0) {
        let v = problem.eigenvector(i);
        unstable_eigenvectors.push(stack(&v, &(&v / b.mu_hi.re)));
    }
    Ok(SpectrumClassification {
        stable_dim: 2 * problem.n() - unstable_dim,
        unstable_dim,
        blocks,
        unstable_eigenvectors,
    })
}

/// `(v, v/μ_hi)`: eigenvector of `DG(x*, x*)` for the unstable root of a
/// block with `λ < 0`, where `v` is the Hessian eigenvector for `λ`.
pub fn unstable_eigenvector(lambda: f64, alpha: f64, beta: f64, v: &DVector<f64>) -> Result<DVector<f64>> {
    if !(lambda < 0.0) {
        return Err(domain(format!("unstable eigenvector needs lambda < 0, got {lambda}")));
    }
    if !(alpha > 0.0) || !(0.0..1.0).contains(&beta) {
        return Err(domain(format!("need alpha > 0 and beta in [0, 1), got alpha={alpha}, beta={beta}")));
    }
    let pair = block_eigenvalues(lambda, alpha, beta);
    Ok(stack(v, &(v / pair.mu_hi.re)))
}

fn stack(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.len();
    DVector::from_fn(2 * n, |i, _| if i < n { a[i] } else { b[i - n] })
}

/// `G(z₁, z₂)`.
pub fn apply_g<O: GradientOracle + ?Sized>(
    oracle: &O,
    alpha: f64,
    beta: f64,
    z1: &DVector<f64>,
    z2: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    check_dim(oracle.dim(), z1)?;
    check_dim(oracle.dim(), z2)?;
    let first = z1 - oracle.gradient_at(z1) * alpha + (z1 - z2) * beta;
    Ok((first, z1.clone()))
}

/// `G⁻¹(y₁, y₂) = (y₂, (y₂ − y₁ − α∇f(y₂))/β + y₂)`.
pub fn invert_g<O: GradientOracle + ?Sized>(
    oracle: &O,
    alpha: f64,
    beta: f64,
    y1: &DVector<f64>,
    y2: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if beta == 0.0 {
        return Err(domain("G is not invertible for beta = 0"));
    }
    check_dim(oracle.dim(), y1)?;
    check_dim(oracle.dim(), y2)?;
    let second = (y2 - y1 - oracle.gradient_at(y2) * alpha) / beta + y2;
    Ok((y2.clone(), second))
}

/// Dense `DG(x*, x*) = [(1+β)I − αH, −βI; I, 0]` for a quadratic.
pub fn jacobian(problem: &QuadraticProblem, alpha: f64, beta: f64) -> DMatrix<f64> {
    let n = problem.n();
    let mut dg = DMatrix::zeros(2 * n, 2 * n);
    let top_left = DMatrix::<f64>::identity(n, n) * (1.0 + beta) - problem.hessian() * alpha;
    dg.view_mut((0, 0), (n, n)).copy_from(&top_left);
    for i in 0..n {
        dg[(i, n + i)] = -beta;
        dg[(n + i, i)] = 1.0;
    }
    dg
}

/// `(re, im)` for JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexRecord {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexRecord {
    fn from(c: Complex64) -> Self {
        Self { re: c.re, im: c.im }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub lambda: f64,
    pub mu_hi: ComplexRecord,
    pub mu_lo: ComplexRecord,
    pub class: BlockClass,
}

impl From<&EigenPair> for BlockRecord {
    fn from(p: &EigenPair) -> Self {
        Self {
            lambda: p.lambda,
            mu_hi: p.mu_hi.into(),
            mu_lo: p.mu_lo.into(),
            class: p.class(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub stable_dim: usize,
    pub unstable_dim: usize,
    pub blocks: Vec<BlockRecord>,
}
