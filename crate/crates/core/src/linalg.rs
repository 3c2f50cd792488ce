//! Dense complex linear algebra over small tensor-factored Hilbert spaces.
//!
//! Every space carries a [`SpaceShape`], the ordered list of factor
//! dimensions. Basis indices are row-major in the factors: factor 0 is the
//! most significant digit, so `|0⟩ ⊗ |1⟩` on `[2, 2]` is basis index 1.
//!
//! Matrices are stored as `nalgebra::DMatrix`; the factor bookkeeping and
//! the subsystem kernels live here.

use nalgebra::{SymmetricEigen, SVD};
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

pub use nalgebra::DMatrix;

pub type C64 = Complex64;

/// Tolerance for structural checks (unitarity, hermiticity).
pub const STRUCT_TOL: f64 = 1e-10;
/// Tolerance for end-to-end state and channel comparisons.
pub const STATE_TOL: f64 = 1e-9;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("factor dimension must be at least 1, got {0}")]
    ZeroDimension(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("factor index {index} out of range for {factors} factors")]
    FactorOutOfRange { index: usize, factors: usize },
    #[error("duplicate target factor {0}")]
    DuplicateTarget(usize),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("operator is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Ordered factor dimensions of a tensor-product space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpaceShape {
    dims: Vec<usize>,
}

impl SpaceShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if let Some(&d) = dims.iter().find(|&&d| d == 0) {
            return Err(LinalgError::ZeroDimension(d));
        }
        Ok(Self { dims })
    }

    /// `n` qubit factors.
    pub fn qubits(n: usize) -> Self {
        Self { dims: vec![2; n] }
    }

    /// The one-dimensional space with no factors.
    pub fn scalar() -> Self {
        Self { dims: Vec::new() }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn factors(&self) -> usize {
        self.dims.len()
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn concat(&self, other: &SpaceShape) -> SpaceShape {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        SpaceShape { dims }
    }

    /// Shape of the selected factors, in the order given.
    pub fn select(&self, targets: &[usize]) -> Result<SpaceShape> {
        check_targets(self.dims.len(), targets)?;
        Ok(SpaceShape {
            dims: targets.iter().map(|&t| self.dims[t]).collect(),
        })
    }
}

fn check_targets(factors: usize, targets: &[usize]) -> Result<()> {
    for (i, &t) in targets.iter().enumerate() {
        if t >= factors {
            return Err(LinalgError::FactorOutOfRange { index: t, factors });
        }
        if targets[..i].contains(&t) {
            return Err(LinalgError::DuplicateTarget(t));
        }
    }
    Ok(())
}

pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Flat offsets of every multi-index over `factors` (first factor most
/// significant), as seen in a space with the given strides.
pub(crate) fn offsets(dims: &[usize], strides: &[usize], factors: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for &f in factors {
        let mut next = Vec::with_capacity(out.len() * dims[f]);
        for &base in &out {
            for digit in 0..dims[f] {
                next.push(base + digit * strides[f]);
            }
        }
        out = next;
    }
    out
}

/// Precomputed index tables for acting on a subset of factors.
#[derive(Debug, Clone)]
pub struct FactorKernel {
    block: Vec<usize>,
    rest: Vec<usize>,
}

impl FactorKernel {
    pub fn new(dims: &[usize], targets: &[usize]) -> Result<Self> {
        check_targets(dims.len(), targets)?;
        let st = strides(dims);
        let others: Vec<usize> = (0..dims.len()).filter(|i| !targets.contains(i)).collect();
        Ok(Self {
            block: offsets(dims, &st, targets),
            rest: offsets(dims, &st, &others),
        })
    }

    pub fn block_dim(&self) -> usize {
        self.block.len()
    }

    /// Applies `op` (block_dim × block_dim) in place on a vector of the full
    /// space.
    pub fn apply(&self, op: &DMatrix<C64>, v: &mut [C64]) {
        let t = self.block.len();
        debug_assert_eq!(op.nrows(), t);
        let mut buf = vec![ZERO; t];
        for &base in &self.rest {
            for (b, &o) in buf.iter_mut().zip(&self.block) {
                *b = v[base + o];
            }
            for (r, &o) in self.block.iter().enumerate() {
                let mut acc = ZERO;
                for (c, b) in buf.iter().enumerate() {
                    acc += op[(r, c)] * b;
                }
                v[base + o] = acc;
            }
        }
    }
}

/// Reorders the factors of a flat vector: output factor `k` is input factor
/// `order[k]`.
pub fn permute_factors(dims: &[usize], order: &[usize], v: &[C64]) -> Result<Vec<C64>> {
    if order.len() != dims.len() {
        return Err(LinalgError::DimensionMismatch {
            expected: dims.len(),
            got: order.len(),
        });
    }
    check_targets(dims.len(), order)?;
    let st = strides(dims);
    let src = offsets(dims, &st, order);
    Ok(src.into_iter().map(|i| v[i]).collect())
}

fn check_finite<'a>(it: impl IntoIterator<Item = &'a C64>, what: &'static str) -> Result<()> {
    if it.into_iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(LinalgError::NonFinite(what))
    }
}

/// A (possibly subnormalized) vector in a tensor-factored space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVec {
    shape: SpaceShape,
    amps: Vec<C64>,
}

impl StateVec {
    pub fn new(shape: SpaceShape, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != shape.total() {
            return Err(LinalgError::DimensionMismatch {
                expected: shape.total(),
                got: amps.len(),
            });
        }
        check_finite(&amps, "state vector")?;
        Ok(Self { shape, amps })
    }

    pub fn basis(shape: SpaceShape, index: usize) -> Self {
        let mut amps = vec![ZERO; shape.total()];
        amps[index] = ONE;
        Self { shape, amps }
    }

    /// Computational basis state of qubits from a bit string, first bit most
    /// significant.
    pub fn from_bits(bits: &[bool]) -> Self {
        let index = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        Self::basis(SpaceShape::qubits(bits.len()), index)
    }

    pub fn scalar(value: C64) -> Self {
        Self {
            shape: SpaceShape::scalar(),
            amps: vec![value],
        }
    }

    pub fn shape(&self) -> &SpaceShape {
        &self.shape
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amps(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// True when the norm is at most `1 + 1e-9`.
    pub fn is_subnormalized(&self) -> bool {
        self.norm() <= 1.0 + STATE_TOL
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(LinalgError::NotNormalized(0.0));
        }
        Ok(self.scaled(C64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self {
            shape: self.shape.clone(),
            amps: self.amps.iter().map(|a| a * s).collect(),
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVec) -> Result<C64> {
        if self.amps.len() != other.amps.len() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.amps.len(),
                got: other.amps.len(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn tensor(&self, other: &StateVec) -> StateVec {
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        StateVec {
            shape: self.shape.concat(&other.shape),
            amps,
        }
    }

    /// Applies `op` on the target factors, identity elsewhere.
    pub fn apply(&self, op: &DenseOperator, targets: &[usize]) -> Result<StateVec> {
        let kernel = kernel_for(&self.shape, op, targets)?;
        let mut amps = self.amps.clone();
        kernel.apply(&op.mat, &mut amps);
        Ok(StateVec {
            shape: self.shape.clone(),
            amps,
        })
    }

    pub fn permute(&self, order: &[usize]) -> Result<StateVec> {
        let amps = permute_factors(self.shape.dims(), order, &self.amps)?;
        Ok(StateVec {
            shape: self.shape.select(order)?,
            amps,
        })
    }

    pub fn add(&self, other: &StateVec) -> Result<StateVec> {
        if self.shape != other.shape {
            return Err(LinalgError::DimensionMismatch {
                expected: self.shape.total(),
                got: other.shape.total(),
            });
        }
        Ok(StateVec {
            shape: self.shape.clone(),
            amps: self.amps.iter().zip(&other.amps).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &StateVec) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

fn kernel_for(shape: &SpaceShape, op: &DenseOperator, targets: &[usize]) -> Result<FactorKernel> {
    let sel = shape.select(targets)?;
    if sel.total() != op.dim() {
        return Err(LinalgError::DimensionMismatch {
            expected: sel.total(),
            got: op.dim(),
        });
    }
    FactorKernel::new(shape.dims(), targets)
}

/// A square operator on a tensor-factored space.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    shape: SpaceShape,
    mat: DMatrix<C64>,
}

impl DenseOperator {
    pub fn new(shape: SpaceShape, mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(LinalgError::NotSquare {
                rows: mat.nrows(),
                cols: mat.ncols(),
            });
        }
        if mat.nrows() != shape.total() {
            return Err(LinalgError::DimensionMismatch {
                expected: shape.total(),
                got: mat.nrows(),
            });
        }
        check_finite(mat.iter(), "operator")?;
        Ok(Self { shape, mat })
    }

    /// Builds an operator from row-major entries.
    pub fn from_rows(shape: SpaceShape, rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(LinalgError::NotSquare {
                rows: n,
                cols: r.len(),
            });
        }
        let mat = DMatrix::from_fn(n, n, |r, c| rows[r][c]);
        Self::new(shape, mat)
    }

    /// Builds an operator from a real row-major table, scaled by `scale`.
    pub fn real(shape: SpaceShape, scale: f64, entries: &[f64]) -> Self {
        let n = shape.total();
        assert_eq!(entries.len(), n * n);
        let mat = DMatrix::from_fn(n, n, |r, c| C64::new(scale * entries[r * n + c], 0.0));
        Self { shape, mat }
    }

    pub fn identity(shape: SpaceShape) -> Self {
        let n = shape.total();
        Self {
            shape,
            mat: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(shape: SpaceShape) -> Self {
        let n = shape.total();
        Self {
            shape,
            mat: DMatrix::zeros(n, n),
        }
    }

    pub fn shape(&self) -> &SpaceShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn entry(&self, r: usize, c: usize) -> C64 {
        self.mat[(r, c)]
    }

    /// Same entries, different factorization of the same total dimension.
    pub fn reshaped(&self, shape: SpaceShape) -> Result<Self> {
        Self::new(shape, self.mat.clone())
    }

    pub fn adjoint(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            mat: self.mat.adjoint(),
        }
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self {
            shape: self.shape.clone(),
            mat: self.mat.map(|z| z * s),
        }
    }

    /// Matrix product `self · rhs`.
    pub fn mul(&self, rhs: &DenseOperator) -> Result<Self> {
        if self.dim() != rhs.dim() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim(),
                got: rhs.dim(),
            });
        }
        Ok(Self {
            shape: self.shape.clone(),
            mat: &self.mat * &rhs.mat,
        })
    }

    pub fn add(&self, rhs: &DenseOperator) -> Result<Self> {
        if self.dim() != rhs.dim() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim(),
                got: rhs.dim(),
            });
        }
        Ok(Self {
            shape: self.shape.clone(),
            mat: &self.mat + &rhs.mat,
        })
    }

    pub fn tensor(&self, other: &DenseOperator) -> DenseOperator {
        DenseOperator {
            shape: self.shape.concat(&other.shape),
            mat: self.mat.kronecker(&other.mat),
        }
    }

    pub fn apply_vec(&self, v: &StateVec) -> Result<StateVec> {
        let targets: Vec<usize> = (0..v.shape.factors()).collect();
        v.apply(self, &targets)
    }

    /// `‖U†U − I‖` measured entrywise (max abs).
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        let p = self.mat.adjoint() * &self.mat;
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                let target = if r == c { ONE } else { ZERO };
                worst = worst.max((p[(r, c)] - target).norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    pub fn ensure_unitary(&self) -> Result<()> {
        let d = self.unitarity_defect();
        if d <= STRUCT_TOL {
            Ok(())
        } else {
            Err(LinalgError::NotUnitary(d))
        }
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|r| {
            (0..n).all(|c| {
                let target = if r == c { ONE } else { ZERO };
                (self.mat[(r, c)] - target).norm() <= tol
            })
        })
    }

    pub fn max_abs_diff(&self, other: &DenseOperator) -> f64 {
        max_abs_diff(&self.mat, &other.mat)
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.mat.iter().all(|z| z.norm() <= tol)
    }
}

pub fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Largest singular value.
///
/// For normal operators this agrees with `sup |⟨ψ|A|ψ⟩|`; for non-normal ones
/// it dominates it.
pub fn operator_norm(a: &DenseOperator) -> f64 {
    matrix_norm(&a.mat)
}

pub fn matrix_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SVD::new(m.clone(), false, false).singular_values.max()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let h = hermitian_part(m);
    let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigen-decomposition of a Hermitian matrix: (eigenvalue, eigenvector) pairs.
pub fn hermitian_eigen(m: &DMatrix<C64>) -> Vec<(f64, Vec<C64>)> {
    let h = hermitian_part(m);
    let eig = SymmetricEigen::new(h);
    (0..eig.eigenvalues.len())
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).iter().copied().collect()))
        .collect()
}

fn hermitian_part(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()).map(|z| z * 0.5)
}

/// A density operator on a tensor-factored space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOp {
    shape: SpaceShape,
    mat: DMatrix<C64>,
}

impl DensityOp {
    /// Wraps a matrix without checking positivity; see [`DensityOp::defects`].
    pub fn new(shape: SpaceShape, mat: DMatrix<C64>) -> Result<Self> {
        let op = DenseOperator::new(shape, mat)?;
        Ok(Self {
            shape: op.shape,
            mat: op.mat,
        })
    }

    pub fn from_pure(v: &StateVec) -> Self {
        let n = v.amps.len();
        let mat = DMatrix::from_fn(n, n, |r, c| v.amps[r] * v.amps[c].conj());
        Self {
            shape: v.shape.clone(),
            mat,
        }
    }

    pub fn shape(&self) -> &SpaceShape {
        &self.shape
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            shape: self.shape.clone(),
            mat: self.mat.map(|z| z * s),
        }
    }

    pub fn add(&self, other: &DensityOp) -> Result<Self> {
        if self.shape != other.shape {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(Self {
            shape: self.shape.clone(),
            mat: &self.mat + &other.mat,
        })
    }

    pub fn tensor(&self, other: &DensityOp) -> DensityOp {
        DensityOp {
            shape: self.shape.concat(&other.shape),
            mat: self.mat.kronecker(&other.mat),
        }
    }

    /// `op · ρ · op†` with `op` on the target factors.
    pub fn apply(&self, op: &DenseOperator, targets: &[usize]) -> Result<DensityOp> {
        let kernel = kernel_for(&self.shape, op, targets)?;
        let n = self.dim();
        // Left multiply column by column, then the same on the adjoint.
        let mut m = self.mat.clone();
        for c in 0..n {
            kernel.apply(&op.mat, m.column_mut(c).as_mut_slice());
        }
        let mut m = m.adjoint();
        for c in 0..n {
            kernel.apply(&op.mat, m.column_mut(c).as_mut_slice());
        }
        Ok(DensityOp {
            shape: self.shape.clone(),
            mat: m.adjoint(),
        })
    }

    /// Traces out every factor not listed in `keep`; the result has the kept
    /// factors in the order given.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityOp> {
        let dims = self.shape.dims();
        check_targets(dims.len(), keep)?;
        let st = strides(dims);
        let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
        let ko = offsets(dims, &st, keep);
        let to = offsets(dims, &st, &traced);
        let k = ko.len();
        let mat = DMatrix::from_fn(k, k, |a, b| {
            to.iter().map(|&t| self.mat[(ko[a] + t, ko[b] + t)]).sum()
        });
        Ok(DensityOp {
            shape: self.shape.select(keep)?,
            mat,
        })
    }

    pub fn permute(&self, order: &[usize]) -> Result<DensityOp> {
        let dims = self.shape.dims();
        if order.len() != dims.len() {
            return Err(LinalgError::DimensionMismatch {
                expected: dims.len(),
                got: order.len(),
            });
        }
        self.partial_trace(order)
    }

    /// `⟨ψ|ρ|ψ⟩` for a normalized pure reference state.
    pub fn fidelity_with(&self, psi: &StateVec) -> Result<f64> {
        if psi.amps.len() != self.dim() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim(),
                got: psi.amps.len(),
            });
        }
        let v = nalgebra::DVector::from_column_slice(&psi.amps);
        Ok((v.adjoint() * &self.mat * &v)[(0, 0)].re)
    }

    /// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`; equals `⟨ψ|ρ|ψ⟩` when σ is pure.
    pub fn fidelity(&self, other: &DensityOp) -> Result<f64> {
        if other.dim() != self.dim() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let h = (&self.mat + self.mat.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(h);
        // Clip round-off eigenvalues: their square roots would be ~1e-8.
        let root = |l: f64| if l > 1e-12 { l.sqrt() } else { 0.0 };
        let roots = eig.eigenvalues.map(|l| C64::new(root(l), 0.0));
        let sqrt = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.adjoint();
        let m = &sqrt * &other.mat * &sqrt;
        let t: f64 = hermitian_eigenvalues(&m).into_iter().map(root).sum();
        Ok(t * t)
    }

    pub fn max_abs_diff(&self, other: &DensityOp) -> f64 {
        max_abs_diff(&self.mat, &other.mat)
    }

    /// Structural defects: (hermiticity deviation, most negative eigenvalue
    /// clipped at 0, trace excess over 1).
    pub fn defects(&self) -> (f64, f64, f64) {
        let herm = max_abs_diff(&self.mat, &self.mat.adjoint());
        let min_ev = hermitian_eigenvalues(&self.mat).first().copied().unwrap_or(0.0);
        let excess = (self.trace().re - 1.0).max(0.0);
        (herm, (-min_ev).max(0.0), excess)
    }

    /// Hermitian within 1e-10, eigenvalues ≥ −1e-10, trace ≤ 1 + 1e-9.
    pub fn is_valid(&self) -> bool {
        let (h, neg, ex) = self.defects();
        h <= STRUCT_TOL && neg <= STRUCT_TOL && ex <= STATE_TOL
    }
}

/// A random unitary from the QR decomposition of a complex Gaussian matrix,
/// with the column phases fixed so the distribution is Haar.
pub fn random_unitary<R: Rng + ?Sized>(shape: SpaceShape, rng: &mut R) -> DenseOperator {
    let n = shape.total();
    let g = DMatrix::from_fn(n, n, |_, _| C64::new(gaussian(rng), gaussian(rng)));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..n {
        let d = r[(c, c)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for row in 0..n {
            q[(row, c)] *= phase;
        }
    }
    DenseOperator { shape, mat: q }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn x() -> DenseOperator {
        DenseOperator::real(SpaceShape::qubits(1), 1.0, &[0.0, 1.0, 1.0, 0.0])
    }
    fn z() -> DenseOperator {
        DenseOperator::real(SpaceShape::qubits(1), 1.0, &[1.0, 0.0, 0.0, -1.0])
    }
    fn h() -> DenseOperator {
        DenseOperator::real(
            SpaceShape::qubits(1),
            std::f64::consts::FRAC_1_SQRT_2,
            &[1.0, 1.0, 1.0, -1.0],
        )
    }
    fn cnot() -> DenseOperator {
        DenseOperator::real(
            SpaceShape::qubits(2),
            1.0,
            &[
                1.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                0.0, 0.0, 1.0, 0.0,
            ],
        )
    }

    #[test]
    fn tensor_of_identities_is_identity() {
        let i2 = DenseOperator::identity(SpaceShape::qubits(1));
        let i4 = i2.tensor(&i2);
        assert_eq!(i4.shape().dims(), &[2, 2]);
        assert!(i4.is_identity(0.0));
    }

    #[test]
    fn x_tensor_z_has_off_diagonal_z_blocks() {
        let m = x().tensor(&z());
        let zero_block = [(0, 0), (0, 1), (1, 0), (1, 1)];
        for (r, c) in zero_block {
            assert_eq!(m.entry(r, c), ZERO);
            assert_eq!(m.entry(r + 2, c + 2), ZERO);
        }
        for r in 0..2 {
            for c in 0..2 {
                assert_eq!(m.entry(r, c + 2), z().entry(r, c));
                assert_eq!(m.entry(r + 2, c), z().entry(r, c));
            }
        }
    }

    #[test]
    fn basis_tensor_indexing() {
        let v = StateVec::from_bits(&[false]).tensor(&StateVec::from_bits(&[true]));
        assert_eq!(v, StateVec::basis(SpaceShape::qubits(2), 1));
    }

    #[test]
    fn apply_examples() {
        let s00 = StateVec::from_bits(&[false, false]);
        assert_eq!(s00.apply(&x(), &[0]).unwrap(), StateVec::from_bits(&[true, false]));
        let s10 = StateVec::from_bits(&[true, false]);
        assert_eq!(s10.apply(&cnot(), &[0, 1]).unwrap(), StateVec::from_bits(&[true, true]));
        let out = s00.apply(&h(), &[1]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let expect = StateVec::new(SpaceShape::qubits(2), vec![C64::new(r, 0.0), C64::new(r, 0.0), ZERO, ZERO]).unwrap();
        assert!(out.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn apply_rejects_bad_targets() {
        let s = StateVec::from_bits(&[false, false]);
        assert_eq!(s.apply(&cnot(), &[0, 0]), Err(LinalgError::DuplicateTarget(0)));
        assert!(matches!(s.apply(&cnot(), &[0]), Err(LinalgError::DimensionMismatch { .. })));
        assert!(matches!(s.apply(&x(), &[2]), Err(LinalgError::FactorOutOfRange { .. })));
    }

    #[test]
    fn reversed_targets_swap_roles() {
        // CNOT on (1, 0): control is factor 1.
        let s01 = StateVec::from_bits(&[false, true]);
        assert_eq!(s01.apply(&cnot(), &[1, 0]).unwrap(), StateVec::from_bits(&[true, true]));
    }

    #[test]
    fn density_apply_conjugates() {
        let rho = DensityOp::from_pure(&StateVec::from_bits(&[false, false]));
        let out = rho.apply(&x(), &[1]).unwrap();
        let expect = DensityOp::from_pure(&StateVec::from_bits(&[false, true]));
        assert!(out.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn partial_trace_examples() {
        let rho = DensityOp::from_pure(&StateVec::from_bits(&[false, false]));
        let r = rho.partial_trace(&[0]).unwrap();
        assert!(r.max_abs_diff(&DensityOp::from_pure(&StateVec::from_bits(&[false]))) < 1e-15);
        assert!(rho.partial_trace(&[0, 1]).unwrap().max_abs_diff(&rho) == 0.0);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = StateVec::new(SpaceShape::qubits(2), vec![C64::new(s, 0.0), ZERO, ZERO, C64::new(s, 0.0)]).unwrap();
        let rho = DensityOp::from_pure(&bell);
        let half = DenseOperator::identity(SpaceShape::qubits(1)).scaled(C64::new(0.5, 0.0));
        for keep in [[0], [1]] {
            let red = rho.partial_trace(&keep).unwrap();
            assert!(max_abs_diff(red.matrix(), half.matrix()) < 1e-15);
        }
        let scalar = rho.partial_trace(&[]).unwrap();
        assert_eq!(scalar.dim(), 1);
        assert!((scalar.trace().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn operator_norm_examples() {
        assert!((operator_norm(&DenseOperator::identity(SpaceShape::qubits(2))) - 1.0).abs() < 1e-12);
        assert!((operator_norm(&x().scaled(C64::new(0.3, 0.0))) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 3] {
            let u = random_unitary(SpaceShape::qubits(n), &mut rng);
            assert!(u.is_unitary(1e-12));
        }
    }

    #[test]
    fn permute_swaps_factors() {
        let v = StateVec::from_bits(&[true, false]);
        let shape = SpaceShape::new(vec![2, 3]).unwrap();
        let w = StateVec::basis(shape, 4).permute(&[1, 0]).unwrap();
        assert_eq!(w.shape().dims(), &[3, 2]);
        assert_eq!(w, StateVec::basis(SpaceShape::new(vec![3, 2]).unwrap(), 3));
        assert_eq!(v.permute(&[1, 0]).unwrap(), StateVec::from_bits(&[false, true]));
    }

    #[test]
    fn uhlmann_fidelity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_unitary(SpaceShape::qubits(2), &mut rng);
        let psi = u.apply_vec(&StateVec::from_bits(&[false, false])).unwrap();
        let phi = StateVec::from_bits(&[true, false]);
        let (rp, rf) = (DensityOp::from_pure(&psi), DensityOp::from_pure(&phi));
        let overlap = psi.inner(&phi).unwrap().norm_sqr();
        assert!((rp.fidelity(&rf).unwrap() - overlap).abs() < 1e-10);
        assert!((rp.fidelity(&rp).unwrap() - 1.0).abs() < 1e-10);
        let mixed = DensityOp::new(SpaceShape::qubits(2), DMatrix::identity(4, 4) * C64::new(0.25, 0.0)).unwrap();
        assert!((mixed.fidelity(&rf).unwrap() - 0.25).abs() < 1e-10);
        assert!((mixed.fidelity(&mixed).unwrap() - 1.0).abs() < 1e-10);
    }
}
