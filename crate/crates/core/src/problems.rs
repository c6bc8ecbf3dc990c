//! Quadratic test problems `f(x) = ½ xᵀ V Λ Vᵀ x` and the gradient-oracle interface.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng;

/// A smooth objective exposing its value and gradient.
pub trait GradientOracle: Send + Sync {
    fn dim(&self) -> usize;

    /// Objective value. `x` must have length [`dim`](Self::dim).
    fn value_at(&self, x: &DVector<f64>) -> f64;

    /// Gradient. `x` must have length [`dim`](Self::dim).
    fn gradient_at(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Value and gradient with a dimension check.
    fn evaluate(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        check_dim(self.dim(), x)?;
        Ok((self.value_at(x), self.gradient_at(x)))
    }
}

pub(crate) fn check_dim(n: usize, x: &DVector<f64>) -> Result<()> {
    if x.len() != n {
        return Err(domain(format!(
            "dimension mismatch: expected {n}, got {}",
            x.len()
        )));
    }
    Ok(())
}

/// `f(x) = ½ xᵀ H x` with `H = V Λ Vᵀ`, eigenvalues sorted nonincreasing.
///
/// `basis` is `None` for the diagonal case `V = I`. Column `i` of `V` is the
/// eigenvector for `eigenvalues[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProblem {
    eigenvalues: Vec<f64>,
    basis: Option<DMatrix<f64>>,
    seed: Option<u64>,
    basis_seed: Option<u64>,
}

const ORTHOGONALITY_TOL: f64 = 1e-10;

impl QuadraticProblem {
    /// Diagonal problem. The eigenvalues are sorted nonincreasing.
    pub fn diagonal(mut eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(domain("a problem needs at least one eigenvalue"));
        }
        if eigenvalues.iter().any(|l| !l.is_finite()) {
            return Err(domain("eigenvalues must be finite"));
        }
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        Ok(Self {
            eigenvalues,
            basis: None,
            seed: None,
            basis_seed: None,
        })
    }

    /// Rotated problem with an explicit orthogonal basis. `eigenvalues` must
    /// already be sorted nonincreasing so that columns stay paired.
    pub fn with_basis(eigenvalues: Vec<f64>, basis: DMatrix<f64>) -> Result<Self> {
        let n = eigenvalues.len();
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(domain("eigenvalues must be sorted nonincreasing"));
        }
        if basis.nrows() != n || basis.ncols() != n {
            return Err(domain(format!(
                "basis is {}x{}, expected {n}x{n}",
                basis.nrows(),
                basis.ncols()
            )));
        }
        let defect = (basis.transpose() * &basis - DMatrix::<f64>::identity(n, n)).amax();
        if defect > ORTHOGONALITY_TOL {
            return Err(domain(format!("basis is not orthogonal (|VᵀV − I| = {defect:e})")));
        }
        let mut p = Self::diagonal(eigenvalues)?;
        p.basis = Some(basis);
        Ok(p)
    }

    /// Rotates the spectrum by a seeded Haar-random orthogonal matrix.
    pub fn rotated(eigenvalues: Vec<f64>, basis_seed: u64) -> Result<Self> {
        let mut sorted = eigenvalues;
        sorted.sort_by(|a, b| b.total_cmp(a));
        let n = sorted.len();
        let mut p = Self::with_basis(sorted, random_orthogonal(n, basis_seed))?;
        p.basis_seed = Some(basis_seed);
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> Option<&DMatrix<f64>> {
        self.basis.as_ref()
    }

    pub fn is_diagonal(&self) -> bool {
        self.basis.is_none()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn basis_seed(&self) -> Option<u64> {
        self.basis_seed
    }

    /// Number of strictly negative eigenvalues.
    pub fn negative_count(&self) -> usize {
        self.eigenvalues.iter().filter(|&&l| l < 0.0).count()
    }

    /// `L = max(λ₁, −λ_n)`.
    pub fn lipschitz(&self) -> f64 {
        let first = self.eigenvalues[0];
        let last = self.eigenvalues[self.n() - 1];
        first.max(-last).max(0.0)
    }

    /// Largest eigenvalue λ₁.
    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Most negative eigenvalue λ_n.
    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[self.n() - 1]
    }

    /// Unit eigenvector for `eigenvalues[i]`.
    pub fn eigenvector(&self, i: usize) -> DVector<f64> {
        match &self.basis {
            Some(v) => v.column(i).into_owned(),
            None => {
                let mut e = DVector::zeros(self.n());
                e[i] = 1.0;
                e
            }
        }
    }

    /// Dense Hessian `V Λ Vᵀ`.
    pub fn hessian(&self) -> DMatrix<f64> {
        let lam = DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigenvalues));
        match &self.basis {
            Some(v) => v * lam * v.transpose(),
            None => lam,
        }
    }

    /// Coordinates of `x` in the eigenbasis, `Vᵀ x`.
    pub fn to_eigen_coords(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.basis {
            Some(v) => v.tr_mul(x),
            None => x.clone(),
        }
    }

    /// Maps eigenbasis coordinates back, `V z`.
    pub fn from_eigen_coords(&self, z: &DVector<f64>) -> DVector<f64> {
        match &self.basis {
            Some(v) => v * z,
            None => z.clone(),
        }
    }

    /// `∇f(x) = V Λ Vᵀ x` with a dimension check.
    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.n(), x)?;
        Ok(self.gradient_at(x))
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim(self.n(), x)?;
        Ok(self.value_at(x))
    }

    /// Projector onto the span of eigenvectors with negative eigenvalues.
    pub fn negative_projector(&self) -> Projector {
        let idx: Vec<usize> = (0..self.n()).filter(|&i| self.eigenvalues[i] < 0.0).collect();
        match &self.basis {
            None => Projector::Coordinates(idx),
            Some(v) => Projector::Columns(v.select_columns(idx.iter())),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ProblemFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ProblemFile = serde_json::from_str(s)?;
        file.try_into()
    }
}

impl GradientOracle for QuadraticProblem {
    fn dim(&self) -> usize {
        self.n()
    }

    fn value_at(&self, x: &DVector<f64>) -> f64 {
        let z = self.to_eigen_coords(x);
        0.5 * z
            .iter()
            .zip(&self.eigenvalues)
            .map(|(zi, li)| li * zi * zi)
            .sum::<f64>()
    }

    fn gradient_at(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.basis {
            None => x.component_mul(&DVector::from_column_slice(&self.eigenvalues)),
            Some(v) => {
                let mut z = v.tr_mul(x);
                for (zi, li) in z.iter_mut().zip(&self.eigenvalues) {
                    *zi *= li;
                }
                v * z
            }
        }
    }
}

/// Orthogonal projection onto a subspace, used to measure escape.
#[derive(Debug, Clone, PartialEq)]
pub enum Projector {
    /// Span of the listed standard basis vectors.
    Coordinates(Vec<usize>),
    /// Span of the (orthonormal) columns.
    Columns(DMatrix<f64>),
}

impl Projector {
    /// `‖P x‖`.
    pub fn norm(&self, x: &DVector<f64>) -> f64 {
        match self {
            Projector::Coordinates(idx) => idx.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt(),
            Projector::Columns(c) => c.tr_mul(x).norm(),
        }
    }

    /// The whole space.
    pub fn identity(n: usize) -> Self {
        Projector::Coordinates((0..n).collect())
    }
}

/// The 2-D saddle `f(x) = ½(x₁² − δ x₂²)`.
pub fn toy_problem(delta: f64) -> Result<QuadraticProblem> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain(format!("toy problem needs 0 < delta < 1, got {delta}")));
    }
    QuadraticProblem::diagonal(vec![1.0, -delta])
}

/// Random diagonal strict-saddle problem from a seed.
///
/// `n − p` nonnegative eigenvalues are i.i.d. uniform on `[0, 1]` and `p`
/// negative ones i.i.d. uniform on `[−2δ, −δ]`. If every nonnegative draw falls
/// below `δ` the largest one is raised to `δ`, so `λ₁ > 0` always holds.
pub fn random_problem(n: usize, p: usize, delta: f64, seed: u64) -> Result<QuadraticProblem> {
    let mut rng = rng::from_seed(seed);
    let mut prob = sample_problem(&mut rng, n, p, delta)?;
    prob.seed = Some(seed);
    Ok(prob)
}

/// Like [`random_problem`] but drawing from a caller-provided stream.
pub fn sample_problem<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    p: usize,
    delta: f64,
) -> Result<QuadraticProblem> {
    if p == 0 || p >= n {
        return Err(domain(format!("need 1 <= p < n, got p={p}, n={n}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(domain(format!("delta must be positive, got {delta}")));
    }
    let mut eig: Vec<f64> = (0..n - p).map(|_| rng.random::<f64>()).collect();
    raise_max(&mut eig, delta);
    eig.extend((0..p).map(|_| -delta * (1.0 + rng.random::<f64>())));
    QuadraticProblem::diagonal(eig)
}

/// `n − 1` nonnegative eigenvalues uniform on `[0, 1]` and a single
/// negative eigenvalue exactly `−δ`.
pub fn single_negative_problem<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    delta: f64,
) -> Result<QuadraticProblem> {
    if n < 2 {
        return Err(domain("need n >= 2"));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(domain(format!("delta must be positive, got {delta}")));
    }
    let mut eig: Vec<f64> = (0..n - 1).map(|_| rng.random::<f64>()).collect();
    raise_max(&mut eig, delta);
    eig.push(-delta);
    QuadraticProblem::diagonal(eig)
}

fn raise_max(eig: &mut [f64], floor: f64) {
    if let Some(m) = eig.iter_mut().max_by(|a, b| a.total_cmp(b)) {
        if *m < floor {
            *m = floor;
        }
    }
}

/// Haar-random orthogonal matrix: QR of a seeded Gaussian matrix with the
/// signs of `diag(R)` folded into `Q`.
pub fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng::from_seed(seed);
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// JSON form: `{n, eigenvalues[], seed?, basis_seed?}`. The basis is
/// regenerated from `basis_seed`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    pub n: usize,
    pub eigenvalues: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis_seed: Option<u64>,
}

impl From<&QuadraticProblem> for ProblemFile {
    fn from(p: &QuadraticProblem) -> Self {
        Self {
            n: p.n(),
            eigenvalues: p.eigenvalues.clone(),
            seed: p.seed,
            basis_seed: p.basis_seed,
        }
    }
}

impl TryFrom<ProblemFile> for QuadraticProblem {
    type Error = Error;

    fn try_from(f: ProblemFile) -> Result<Self> {
        if f.eigenvalues.len() != f.n {
            return Err(domain(format!(
                "n = {} but {} eigenvalues given",
                f.n,
                f.eigenvalues.len()
            )));
        }
        let mut p = match f.basis_seed {
            Some(bs) => QuadraticProblem::rotated(f.eigenvalues, bs)?,
            None => QuadraticProblem::diagonal(f.eigenvalues)?,
        };
        p.seed = f.seed;
        Ok(p)
    }
}
