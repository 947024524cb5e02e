//! Block encoding of one explicit time step.
//!
//! The one-step matrix A is not unitary, so it cannot run on a quantum
//! register directly. The route taken here:
//!
//! 1. Rescale by the diagonal, A_hat = A / (1 - 2 d r_h), and peel off the
//!    forward shifts: A_hat = A_hat' + sum_j kappa_j S_j with
//!    kappa_j = 2 r_h / (1 - 2 d r_h). The remainder (called `a_hat` below)
//!    has unit diagonal and off-diagonal entries of size O(r_a).
//! 2. Embed that remainder in the Hermitian dilation
//!    H = [[0, -i A_hat^T], [i A_hat, 0]], whose max-norm is 1 by
//!    construction, and rotate by theta = pi/2: the bottom-left block of
//!    exp(-i H pi/2) is A_hat sinc-corrected so that all its singular values
//!    are sin(pi sigma / 2) <= 1. The block therefore fits inside a unitary
//!    at unit normalization, at the price of an O(sigma - sin(pi sigma / 2))
//!    encoding error, which is quadratic in the off-diagonal size.
//! 3. The shifts are already unitary and rejoin via the mixing circuit in
//!    [`crate::lcu`].
//!
//! Everything stays in real arithmetic: H = i G with G real skew-symmetric,
//! so exp(-i H theta) = exp(G theta) is a real orthogonal matrix and
//! Hermiticity of H is exactly skew-symmetry of G.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{neighbor_index, GridSpec};
use crate::stencil::{SparseOperator, StabilityParams};

/// Dense verification paths refuse system dimensions above this.
pub const DENSE_SYSTEM_CAP: usize = 512;

/// Unit forward shift along dimension `j`: (S_j phi)[m] = phi[m + e_j], with
/// periodic wraparound. A permutation matrix, hence unitary.
pub fn shift_operator(grid: &GridSpec, j: usize) -> Result<SparseOperator> {
    if j >= grid.dims() {
        return Err(Error::OutOfRange(format!(
            "shift dimension {j} of a {}-d grid",
            grid.dims()
        )));
    }
    if !grid.is_fully_periodic() {
        return Err(Error::Config(
            "shifts are defined on periodic grids; mirror-extend walls first".into(),
        ));
    }
    let n = grid.total_points();
    let rows = (0..n).map(|m| vec![(neighbor_index(m, j, 1, grid), 1.0)]).collect();
    SparseOperator::from_rows(n, rows)
}

/// A = normalization * (a_hat + sum_j kappa[1 + j] * shifts[j]), with
/// kappa[0] = 1 belonging to a_hat. `a_hat` has exactly unit diagonal.
#[derive(Clone, Debug)]
pub struct StepDecomposition {
    pub a_hat: SparseOperator,
    pub shifts: Vec<SparseOperator>,
    /// Mixing weights, all positive: [1, 2 r_h / n, ..] with n the
    /// normalization below.
    pub kappa: Vec<f64>,
    /// 1 - 2 d r_h, the rescaling that gives a_hat its unit diagonal.
    pub normalization: f64,
}

impl StepDecomposition {
    /// sum of the mixing weights, equal to 1 / normalization.
    pub fn kappa_sum(&self) -> f64 {
        self.kappa.iter().sum()
    }

    /// Number of spatial dimensions (one shift per dimension).
    pub fn dims(&self) -> usize {
        self.shifts.len()
    }

    pub fn system_dim(&self) -> usize {
        self.a_hat.dim()
    }

    /// Rebuild A from the pieces; used to verify the split is lossless.
    pub fn recompose(&self) -> SparseOperator {
        let mut terms = vec![(self.normalization, &self.a_hat)];
        for (k, s) in self.kappa[1..].iter().zip(&self.shifts) {
            terms.push((self.normalization * k, s));
        }
        SparseOperator::linear_combination(&terms).expect("matched dimensions by construction")
    }
}

/// Split the one-step matrix into the unit-diagonal remainder plus weighted
/// forward shifts.
pub fn decompose(
    a: &SparseOperator,
    params: &StabilityParams,
    grid: &GridSpec,
) -> Result<StepDecomposition> {
    if a.dim() != grid.total_points() {
        return Err(Error::Shape(format!(
            "operator of dimension {} on a grid with {} points",
            a.dim(),
            grid.total_points()
        )));
    }
    if params.dims() != grid.dims() || params.n_points() != grid.total_points() {
        return Err(Error::Shape(
            "stability parameters were derived for a different grid".into(),
        ));
    }
    let d = grid.dims();
    let normalization = 1.0 - 2.0 * d as f64 * params.rh();
    // positive whenever r_h < 1/(2d), which StabilityParams guarantees
    let kappa_shift = 2.0 * params.rh() / normalization;
    let shifts: Vec<SparseOperator> =
        (0..d).map(|j| shift_operator(grid, j)).collect::<Result<_>>()?;
    let mut terms = vec![(1.0 / normalization, a)];
    for s in &shifts {
        terms.push((-kappa_shift, s));
    }
    let a_hat = SparseOperator::linear_combination(&terms)?;
    let mut kappa = vec![1.0];
    kappa.extend(std::iter::repeat(kappa_shift).take(d));
    Ok(StepDecomposition { a_hat, shifts, kappa, normalization })
}

/// The Hermitian dilation of the unit-diagonal remainder together with the
/// rotation angle. Stored as the real generator G = [[0, -B^T], [B, 0]]
/// (B the dilated operator), so H = i G and exp(-i H theta) = exp(G theta).
#[derive(Clone, Debug)]
pub struct BlockUnitary {
    generator: SparseOperator,
    theta: f64,
    system_dim: usize,
}

impl BlockUnitary {
    /// Dimension the unitary acts on: system plus one dilation qubit.
    pub fn dim(&self) -> usize {
        2 * self.system_dim
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn generator(&self) -> &SparseOperator {
        &self.generator
    }

    /// Largest entry magnitude of H; the dilation keeps this at 1.
    pub fn max_abs_entry(&self) -> f64 {
        self.generator.max_abs()
    }

    /// max |(G + G^T)[r][c]|: exactly the Hermiticity defect of H = i G.
    pub fn hermiticity_defect(&self) -> f64 {
        let sym = SparseOperator::linear_combination(&[
            (1.0, &self.generator),
            (1.0, &self.generator.transpose()),
        ])
        .expect("same dimension");
        sym.max_abs()
    }

    /// Apply exp(-i H theta) and report how many sparse matrix-vector
    /// products the Krylov iteration spent.
    pub fn apply_with_stats(
        &self,
        state: &[Complex64],
        tol: f64,
    ) -> Result<(Vec<Complex64>, usize)> {
        if state.len() != self.dim() {
            return Err(Error::Shape(format!(
                "state of length {} for a unitary of dimension {}",
                state.len(),
                self.dim()
            )));
        }
        if !tol.is_finite() || tol <= 0.0 || tol >= 1.0 {
            return Err(Error::Config(format!("tolerance must lie in (0, 1), got {tol}")));
        }
        // H v = i (G v)
        let hmatvec = |v: &[Complex64]| {
            let gv = self.generator.matvec_complex(v);
            gv.into_iter().map(|z| Complex64::new(-z.im, z.re)).collect()
        };
        let max_iter = 16.max(10 * (self.dim() as f64).sqrt().ceil() as usize);
        lanczos_expm(&hmatvec, state, self.theta, tol, max_iter)
    }
}

/// Embed a unit-diagonal operator in its Hermitian dilation at the fixed
/// rotation angle pi/2 (the angle at which the encoded block is the
/// sine-corrected operator itself).
pub fn dilate(a_hat: &SparseOperator) -> BlockUnitary {
    let n = a_hat.dim();
    let at = a_hat.transpose();
    let mut rows = Vec::with_capacity(2 * n);
    for m in 0..n {
        // top-right block: -B^T
        let (cols, vals) = at.row(m);
        rows.push(cols.iter().zip(vals).map(|(&c, &v)| (n + c, -v)).collect());
    }
    for m in 0..n {
        // bottom-left block: B
        let (cols, vals) = a_hat.row(m);
        rows.push(cols.iter().zip(vals).map(|(&c, &v)| (c, v)).collect());
    }
    let generator =
        SparseOperator::from_rows(2 * n, rows).expect("dilation indices in range by construction");
    BlockUnitary { generator, theta: std::f64::consts::FRAC_PI_2, system_dim: n }
}

/// Apply the block unitary to a full dilated state (length 2 N), matrix-free.
/// The result differs from the exact exponential by at most about
/// `tol * ||state||`.
pub fn apply_block_unitary(
    state: &[Complex64],
    bu: &BlockUnitary,
    tol: f64,
) -> Result<Vec<Complex64>> {
    bu.apply_with_stats(state, tol).map(|(out, _)| out)
}

/// Dense exp(-i H theta) by full Hermitian eigendecomposition. Slow and
/// memory-hungry on purpose: an independent oracle for the Krylov path.
pub fn dense_unitary_oracle(bu: &BlockUnitary) -> Result<DMatrix<Complex64>> {
    if bu.system_dim() > DENSE_SYSTEM_CAP {
        return Err(Error::SizeCap(format!(
            "dense oracle limited to system dimension {DENSE_SYSTEM_CAP}, got {}",
            bu.system_dim()
        )));
    }
    let g = bu.generator.to_dense();
    let dim = bu.dim();
    let h = DMatrix::from_fn(dim, dim, |r, c| Complex64::new(0.0, g[(r, c)]));
    let eig = h.symmetric_eigen();
    let phases =
        DVector::from_iterator(dim, eig.eigenvalues.iter().map(|&l| Complex64::from_polar(1.0, -bu.theta * l)));
    let u = &eig.eigenvectors;
    Ok(u * DMatrix::from_diagonal(&phases) * u.adjoint())
}

/// Dense effective one-step operator actually applied per accepted step:
/// the encoded (sine-corrected) block recombined with the weighted shifts.
/// Differs from A by the encoding error; equals what the mixing circuit
/// implements. Capped at system dimension [`DENSE_SYSTEM_CAP`].
pub fn encoded_operator_dense(decomp: &StepDecomposition) -> Result<DMatrix<f64>> {
    let n = decomp.system_dim();
    if n > DENSE_SYSTEM_CAP {
        return Err(Error::SizeCap(format!(
            "dense encoded operator limited to system dimension {DENSE_SYSTEM_CAP}, got {n}"
        )));
    }
    let bu = dilate(&decomp.a_hat);
    let u = dense_unitary_oracle(&bu)?;
    // bottom-left block of the unitary; real up to eigensolver dust
    let mut out = DMatrix::from_fn(n, n, |r, c| decomp.normalization * u[(n + r, c)].re);
    for (k, s) in decomp.kappa[1..].iter().zip(&decomp.shifts) {
        let w = decomp.normalization * k;
        for m in 0..n {
            let (cols, vals) = s.row(m);
            for (&c, &v) in cols.iter().zip(vals) {
                out[(m, c)] += w * v;
            }
        }
    }
    Ok(out)
}

/// y = exp(-i theta T) e_1 for the real symmetric tridiagonal T defined by
/// `alphas` (diagonal) and `betas` (off-diagonal).
fn expm_tridiag_first_column(alphas: &[f64], betas: &[f64], theta: f64) -> Vec<Complex64> {
    let m = alphas.len();
    let mut t = DMatrix::zeros(m, m);
    for (i, &a) in alphas.iter().enumerate() {
        t[(i, i)] = a;
    }
    for (i, &b) in betas.iter().enumerate() {
        t[(i, i + 1)] = b;
        t[(i + 1, i)] = b;
    }
    let eig = t.symmetric_eigen();
    (0..m)
        .map(|i| {
            (0..m)
                .map(|k| {
                    Complex64::from_polar(1.0, -theta * eig.eigenvalues[k])
                        * (eig.eigenvectors[(i, k)] * eig.eigenvectors[(0, k)])
                })
                .sum()
        })
        .collect()
}

fn cnorm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn caxpy(y: &mut [Complex64], alpha: Complex64, x: &[Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Krylov (Lanczos) approximation of exp(-i theta H) v for Hermitian H,
/// given only the matrix-vector product. Fully reorthogonalized; stops on
/// the standard a-posteriori estimate beta_j |y_j| <= tol / 2 or on happy
/// breakdown.
fn lanczos_expm(
    hmatvec: &dyn Fn(&[Complex64]) -> Vec<Complex64>,
    v: &[Complex64],
    theta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<Complex64>, usize)> {
    let beta0 = cnorm(v);
    if beta0 == 0.0 {
        return Ok((vec![Complex64::ZERO; v.len()], 0));
    }
    let inv = Complex64::from(1.0 / beta0);
    let mut basis: Vec<Vec<Complex64>> = vec![v.iter().map(|z| z * inv).collect()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut matvecs = 0;
    let mut estimate = f64::INFINITY;
    for j in 0..max_iter {
        let mut w = hmatvec(&basis[j]);
        matvecs += 1;
        let alpha = cdot(&basis[j], &w).re;
        alphas.push(alpha);
        caxpy(&mut w, Complex64::from(-alpha), &basis[j]);
        if j > 0 {
            caxpy(&mut w, Complex64::from(-betas[j - 1]), &basis[j - 1]);
        }
        // full reorthogonalization; cheap next to the matvec at these sizes
        for q in &basis {
            let overlap = cdot(q, &w);
            caxpy(&mut w, -overlap, q);
        }
        let beta = cnorm(&w);
        let y = expm_tridiag_first_column(&alphas, &betas, theta);
        estimate = beta * y[j].norm();
        let happy = beta <= 1e-14;
        if estimate <= 0.5 * tol || happy {
            let mut out = vec![Complex64::ZERO; v.len()];
            for (yi, q) in y.iter().zip(&basis) {
                caxpy(&mut out, Complex64::from(beta0) * yi, q);
            }
            return Ok((out, matvecs));
        }
        betas.push(beta);
        let inv = Complex64::from(1.0 / beta);
        basis.push(w.iter().map(|z| z * inv).collect());
    }
    Err(Error::Numerics {
        reason: format!("Krylov exponential did not converge in {max_iter} iterations"),
        residual: estimate,
    })
}
