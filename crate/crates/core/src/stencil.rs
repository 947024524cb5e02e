//! Forward-Euler stencil for the advection-diffusion equation and the
//! classical reference solver.
//!
//! One explicit step is phi(t + dt) = A phi(t) with, for each node m and
//! dimension j (indices wrapping periodically),
//!
//!   A[m][m]        = 1 - 2 d r_h
//!   A[m][m - e_j]  = r_h + r_a_j(m) / 2
//!   A[m][m + e_j]  = r_h - r_a_j(m) / 2
//!
//! where r_a_j(m) = v_j(x_m) dt / dx and r_h = D dt / dx^2. Every row sums
//! to exactly 1, so constants are fixed points of the update; columns sum to
//! 1 too when the discrete divergence of the velocity vanishes, making the
//! total mass an invariant.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{neighbor_index, Field, GridSpec, VelocityField};

/// Nondimensional step parameters: the per-node advection numbers
/// r_a_j(m) = v_j(x_m) dt / dx and the diffusion number r_h = D dt / dx^2.
///
/// Stability of the explicit scheme requires r_h < 1/(2d) strictly; the
/// constructors reject anything else. The advection numbers are not
/// constrained here: the encoded operator stays contractive for any r_a,
/// and the classical reference is allowed to be driven unstable on purpose.
#[derive(Clone, Debug)]
pub struct StabilityParams {
    ra: Vec<Vec<f64>>,
    rh: f64,
    dt: f64,
    diffusivity: f64,
    spacing: f64,
    n_points: usize,
}

impl StabilityParams {
    /// From physical inputs: velocity field, time step, and diffusivity.
    pub fn from_physical(
        grid: &GridSpec,
        velocity: &VelocityField,
        dt: f64,
        diffusivity: f64,
    ) -> Result<Self> {
        if velocity.grid() != grid {
            return Err(Error::Shape("velocity sampled on a different grid".into()));
        }
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        if !diffusivity.is_finite() || diffusivity < 0.0 {
            return Err(Error::Config(format!(
                "diffusivity must be non-negative, got {diffusivity}"
            )));
        }
        let dx = grid.spacing();
        let rh = diffusivity * dt / (dx * dx);
        let ra = (0..grid.dims())
            .map(|j| velocity.component(j).iter().map(|v| v * dt / dx).collect())
            .collect();
        Self::assemble(ra, rh, dt, diffusivity, dx, grid.total_points())
    }

    /// Choose dt so that max_m sum_j |r_a_j(m)| hits `max_ra_target`, then
    /// set the diffusivity to realize `rh`. This is how a simulation is
    /// pinned to a target operating point.
    pub fn from_targets(
        grid: &GridSpec,
        velocity: &VelocityField,
        max_ra_target: f64,
        rh: f64,
    ) -> Result<Self> {
        if velocity.grid() != grid {
            return Err(Error::Shape("velocity sampled on a different grid".into()));
        }
        if !max_ra_target.is_finite() || max_ra_target <= 0.0 {
            return Err(Error::Config(format!(
                "advection target must be positive, got {max_ra_target}"
            )));
        }
        let peak = velocity.max_abs_component_sum();
        if peak == 0.0 {
            return Err(Error::Config(
                "zero velocity cannot pin the advection number; use diffusion_only or \
                 from_physical"
                    .into(),
            ));
        }
        let dx = grid.spacing();
        let dt = max_ra_target * dx / peak;
        let diffusivity = rh * dx * dx / dt;
        Self::from_physical(grid, velocity, dt, diffusivity)
    }

    /// Pure diffusion (zero velocity) at the given rh and time step.
    pub fn diffusion_only(grid: &GridSpec, rh: f64, dt: f64) -> Result<Self> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        let dx = grid.spacing();
        let diffusivity = rh * dx * dx / dt;
        let ra = vec![vec![0.0; grid.total_points()]; grid.dims()];
        Self::assemble(ra, rh, dt, diffusivity, dx, grid.total_points())
    }

    fn assemble(
        ra: Vec<Vec<f64>>,
        rh: f64,
        dt: f64,
        diffusivity: f64,
        spacing: f64,
        n_points: usize,
    ) -> Result<Self> {
        let d = ra.len();
        let limit = 1.0 / (2.0 * d as f64);
        if !rh.is_finite() || rh <= 0.0 || rh >= limit {
            return Err(Error::Config(format!(
                "diffusion number r_h = {rh} outside the stable range (0, {limit}) for {d} \
                 dimension(s)"
            )));
        }
        Ok(Self { ra, rh, dt, diffusivity, spacing, n_points })
    }

    pub fn dims(&self) -> usize {
        self.ra.len()
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn rh(&self) -> f64 {
        self.rh
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn diffusivity(&self) -> f64 {
        self.diffusivity
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Per-node advection numbers along dimension `j`.
    pub fn ra_component(&self, j: usize) -> &[f64] {
        &self.ra[j]
    }

    /// max over nodes of sum_j |r_a_j(m)|.
    pub fn max_ra(&self) -> f64 {
        (0..self.n_points).fold(0.0, |acc, m| {
            acc.max(self.ra.iter().map(|c| c[m].abs()).sum::<f64>())
        })
    }

    /// The advection number of the shift-free equivalent problem,
    /// (2 r_h + max r_a) / (1 - 2 d r_h). The one-step encoding error is
    /// bounded by a small multiple of its square.
    pub fn equivalent_advection_parameter(&self) -> f64 {
        let d = self.dims() as f64;
        (2.0 * self.rh + self.max_ra()) / (1.0 - 2.0 * d * self.rh)
    }
}

/// Square sparse matrix in compressed sparse row form. Rows are kept sorted
/// by column; duplicate entries are merged and exact zeros dropped on build.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseOperator {
    /// Build from per-row entry lists. Entries may repeat a column (they are
    /// summed, which a wrapping stencil on a 2-point dimension needs) and
    /// may appear in any order.
    pub fn from_rows(dim: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.len() != dim {
            return Err(Error::Shape(format!("{} rows for dimension {dim}", rows.len())));
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for mut row in rows {
            row.sort_unstable_by_key(|&(c, _)| c);
            merged.clear();
            for (c, v) in row {
                if c >= dim {
                    return Err(Error::OutOfRange(format!("column {c} >= dimension {dim}")));
                }
                match merged.last_mut() {
                    Some((lc, lv)) if *lc == c => *lv += v,
                    _ => merged.push((c, v)),
                }
            }
            for &(c, v) in merged.iter().filter(|&&(_, v)| v != 0.0) {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self { dim, row_ptr, cols, vals })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: (0..=dim).collect(),
            cols: (0..dim).collect(),
            vals: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column indices and values of row `m`.
    pub fn row(&self, m: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[m];
        let hi = self.row_ptr[m + 1];
        (&self.cols[lo..hi], &self.vals[lo..hi])
    }

    pub fn row_sum(&self, m: usize) -> f64 {
        let (_, vals) = self.row(m);
        vals.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "operand length {} for dimension {}", x.len(), self.dim);
        (0..self.dim)
            .map(|m| {
                let (cols, vals) = self.row(m);
                cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect()
    }

    pub fn matvec_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.dim, "operand length {} for dimension {}", x.len(), self.dim);
        (0..self.dim)
            .map(|m| {
                let (cols, vals) = self.row(m);
                cols.iter().zip(vals).map(|(&c, &v)| x[c] * v).sum()
            })
            .collect()
    }

    pub fn transpose(&self) -> SparseOperator {
        let mut rows = vec![Vec::new(); self.dim];
        for m in 0..self.dim {
            let (cols, vals) = self.row(m);
            for (&c, &v) in cols.iter().zip(vals) {
                rows[c].push((m, v));
            }
        }
        // rows are already column-sorted because m increases monotonically
        SparseOperator::from_rows(self.dim, rows).expect("transpose preserves validity")
    }

    /// sum_i coeff_i * op_i. All operands must share a dimension.
    pub fn linear_combination(terms: &[(f64, &SparseOperator)]) -> Result<SparseOperator> {
        let dim = match terms.first() {
            Some((_, op)) => op.dim,
            None => return Err(Error::Shape("empty linear combination".into())),
        };
        if terms.iter().any(|(_, op)| op.dim != dim) {
            return Err(Error::Shape("linear combination of mismatched dimensions".into()));
        }
        let rows = (0..dim)
            .map(|m| {
                let mut row = Vec::new();
                for &(coeff, op) in terms {
                    let (cols, vals) = op.row(m);
                    row.extend(cols.iter().zip(vals).map(|(&c, &v)| (c, coeff * v)));
                }
                row
            })
            .collect();
        SparseOperator::from_rows(dim, rows)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut dense = DMatrix::zeros(self.dim, self.dim);
        for m in 0..self.dim {
            let (cols, vals) = self.row(m);
            for (&c, &v) in cols.iter().zip(vals) {
                dense[(m, c)] = v;
            }
        }
        dense
    }
}

/// Assemble the one-step matrix A on a fully periodic grid. Non-periodic
/// boundaries must be mirror-extended away before calling this.
pub fn build_time_marching_matrix(
    grid: &GridSpec,
    velocity: &VelocityField,
    params: &StabilityParams,
) -> Result<SparseOperator> {
    if !grid.is_fully_periodic() {
        return Err(Error::Config(
            "stencil requires a fully periodic grid; mirror-extend walls first".into(),
        ));
    }
    if velocity.grid() != grid {
        return Err(Error::Shape("velocity sampled on a different grid".into()));
    }
    if params.dims() != grid.dims() || params.n_points() != grid.total_points() {
        return Err(Error::Shape(
            "stability parameters were derived for a different grid".into(),
        ));
    }
    let n = grid.total_points();
    let d = grid.dims();
    let rh = params.rh();
    let diag = 1.0 - 2.0 * d as f64 * rh;
    let rows = (0..n)
        .map(|m| {
            let mut row = Vec::with_capacity(2 * d + 1);
            row.push((m, diag));
            for j in 0..d {
                let ra = params.ra_component(j)[m];
                row.push((neighbor_index(m, j, -1, grid), rh + 0.5 * ra));
                row.push((neighbor_index(m, j, 1, grid), rh - 0.5 * ra));
            }
            row
        })
        .collect();
    SparseOperator::from_rows(n, rows)
}

/// One explicit step of the classical reference: phi <- A phi.
pub fn classical_step(field: &Field, a: &SparseOperator) -> Result<Field> {
    if field.values().len() != a.dim() {
        return Err(Error::Shape(format!(
            "field with {} values for an operator of dimension {}",
            field.values().len(),
            a.dim()
        )));
    }
    Field::new(field.grid().clone(), a.matvec(field.values()))
}

/// Classical reference trajectory with its 2-norm history.
#[derive(Clone, Debug)]
pub struct ClassicalRun {
    /// Requested snapshots as (step, field) pairs, in step order.
    pub snapshots: Vec<(usize, Field)>,
    /// ||phi_t|| for t = 0..=steps.
    pub norms: Vec<f64>,
}

/// March `steps` explicit steps, recording the field at each requested step
/// (0 means the initial condition) and the norm at every step.
pub fn classical_run(
    field0: &Field,
    a: &SparseOperator,
    steps: usize,
    snapshot_steps: &[usize],
) -> Result<ClassicalRun> {
    let mut wanted: Vec<usize> = snapshot_steps.iter().copied().filter(|&s| s <= steps).collect();
    wanted.sort_unstable();
    wanted.dedup();
    let mut snapshots = Vec::with_capacity(wanted.len());
    let mut norms = Vec::with_capacity(steps + 1);
    let mut field = field0.clone();
    norms.push(field.norm_l2());
    if wanted.first() == Some(&0) {
        snapshots.push((0, field.clone()));
    }
    for t in 1..=steps {
        field = classical_step(&field, a)?;
        norms.push(field.norm_l2());
        if wanted.binary_search(&t).is_ok() {
            snapshots.push((t, field.clone()));
        }
    }
    Ok(ClassicalRun { snapshots, norms })
}
