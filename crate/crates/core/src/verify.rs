//! Cross-checks of the fast paths against independent dense oracles, with
//! pinned tolerances. The CLI's `verify` command and the acceptance tests
//! both run these.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::blockenc::{decompose, dense_unitary_oracle, dilate, encoded_operator_dense};
use crate::boundary::{extend_reflect, neumann_corrected_matrix_1d, restrict, Parity};
use crate::error::Result;
use crate::lattice::{BoundaryKind, Field, GridSpec, StateVector, VelocityField};
use crate::lcu::{build_plan, lcu_step};
use crate::stencil::{build_time_marching_matrix, classical_run, SparseOperator, StabilityParams};

pub const RECOMPOSITION_TOL: f64 = 1e-14;
pub const KAPPA_SUM_TOL: f64 = 1e-14;
pub const ROW_SUM_TOL: f64 = 1e-14;
pub const PERMUTATION_TOL: f64 = 1e-14;
pub const HERMITICITY_TOL: f64 = 1e-14;
pub const DENSE_UNITARITY_TOL: f64 = 1e-12;
pub const KRYLOV_VS_DENSE_TOL: f64 = 1e-8;
pub const LCU_VS_DENSE_TOL: f64 = 1e-8;
pub const WALL_FOLD_TOL: f64 = 1e-12;
/// |p_t - ||A phi||^2 / ||phi||^2| must stay below this multiple of the
/// squared equivalent advection parameter.
pub const PROBABILITY_BOUND_FACTOR: f64 = 5.0;
/// Halving both step parameters must shrink the one-step encoding error by
/// a factor in this range (the error is quadratic to leading order).
pub const SCALING_FACTOR_RANGE: (f64, f64) = (3.5, 4.5);

/// One named check: what was measured and what would count as passing.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub measured: f64,
    pub requirement: String,
}

impl Check {
    fn bounded(name: &'static str, measured: f64, tol: f64) -> Self {
        Self {
            name,
            passed: measured <= tol,
            measured,
            requirement: format!("<= {tol:.1e}"),
        }
    }

    fn in_range(name: &'static str, measured: f64, range: (f64, f64)) -> Self {
        Self {
            name,
            passed: measured >= range.0 && measured <= range.1,
            measured,
            requirement: format!("in [{}, {}]", range.0, range.1),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<32} measured {:>12.5e}  requirement {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.requirement
        )
    }
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

struct OperatingPoint {
    grid: GridSpec,
    params: StabilityParams,
    a: SparseOperator,
}

fn operating_points() -> Result<Vec<OperatingPoint>> {
    let mut points = Vec::new();
    // 1-d, nonuniform velocity
    let grid = GridSpec::periodic(1, 8)?;
    let velocity = VelocityField::from_fn(grid.clone(), |x, _| 0.4 + 0.6 * x[0].cos());
    let params = StabilityParams::from_targets(&grid, &velocity, 0.2, 0.15)?;
    let a = build_time_marching_matrix(&grid, &velocity, &params)?;
    points.push(OperatingPoint { grid, params, a });
    // 2-d vortex
    let grid = GridSpec::periodic(2, 4)?;
    let velocity = crate::scenarios::taylor_green_velocity(&grid)?;
    let params = StabilityParams::from_targets(&grid, &velocity, 0.15, 0.1)?;
    let a = build_time_marching_matrix(&grid, &velocity, &params)?;
    points.push(OperatingPoint { grid, params, a });
    Ok(points)
}

/// Exact structural identities of the decomposition, the dilation, and the
/// wall folding.
pub fn structural_checks() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut recompose_err = 0.0f64;
    let mut kappa_err = 0.0f64;
    let mut row_err = 0.0f64;
    let mut perm_err = 0.0f64;
    let mut herm_err = 0.0f64;
    let mut unitary_err = 0.0f64;
    for point in operating_points()? {
        let n = point.grid.total_points();
        let d = point.grid.dims() as f64;
        for m in 0..n {
            row_err = row_err.max((point.a.row_sum(m) - 1.0).abs());
        }
        let decomp = decompose(&point.a, &point.params, &point.grid)?;
        recompose_err = recompose_err
            .max((decomp.recompose().to_dense() - point.a.to_dense()).abs().max());
        let expected_sum = 1.0 / (1.0 - 2.0 * d * point.params.rh());
        kappa_err = kappa_err.max((decomp.kappa_sum() - expected_sum).abs());
        for s in &decomp.shifts {
            let product = s.transpose().to_dense() * s.to_dense();
            perm_err = perm_err.max((product - DMatrix::identity(n, n)).abs().max());
        }
        let bu = dilate(&decomp.a_hat);
        herm_err = herm_err.max(bu.hermiticity_defect());
        let u = dense_unitary_oracle(&bu)?;
        let gram = u.adjoint() * &u - DMatrix::identity(2 * n, 2 * n);
        unitary_err = unitary_err.max(gram.iter().fold(0.0f64, |acc, z| acc.max(z.norm())));
    }
    out.push(Check::bounded("row-sums", row_err, ROW_SUM_TOL));
    out.push(Check::bounded("recomposition", recompose_err, RECOMPOSITION_TOL));
    out.push(Check::bounded("kappa-sum", kappa_err, KAPPA_SUM_TOL));
    out.push(Check::bounded("shift-unitarity", perm_err, PERMUTATION_TOL));
    out.push(Check::bounded("dilation-hermiticity", herm_err, HERMITICITY_TOL));
    out.push(Check::bounded("dense-unitarity", unitary_err, DENSE_UNITARITY_TOL));
    out.push(wall_fold_check()?);
    Ok(out)
}

/// Insulated 1-d diffusion marched by mirror extension must match the
/// direct corrected wall matrix step for step.
fn wall_fold_check() -> Result<Check> {
    let n = 8;
    let rh = 0.2;
    let grid = GridSpec::new(1, n, 1.0 / n as f64, vec![BoundaryKind::NeumannReflect])?;
    let field = Field::from_fn(grid.clone(), |x| (-(x[0] - 0.3).powi(2) * 50.0).exp());
    let ext_field = extend_reflect(&field, 0, Parity::Even)?;
    let ext_grid = ext_field.grid().clone();
    let params = StabilityParams::diffusion_only(&ext_grid, rh, 1.0)?;
    let velocity = VelocityField::zero(ext_grid.clone());
    let a_ext = build_time_marching_matrix(&ext_grid, &velocity, &params)?;
    let direct = neumann_corrected_matrix_1d(n, rh)?;
    let steps = 40;
    let ext_run = classical_run(&ext_field, &a_ext, steps, &[steps])?;
    let direct_run = classical_run(&field, &direct, steps, &[steps])?;
    let folded = restrict(&ext_run.snapshots[0].1, 0, Parity::Even)?;
    let diff = folded.max_abs_diff(&direct_run.snapshots[0].1)?;
    Ok(Check::bounded("wall-fold-equivalence", diff, WALL_FOLD_TOL))
}

fn random_positive_field(grid: &GridSpec, rng: &mut ChaCha12Rng) -> Field {
    let values = (0..grid.total_points()).map(|_| 0.1 + rng.random::<f64>()).collect();
    Field::new(grid.clone(), values).expect("matching length")
}

/// Matrix-free Krylov exponential against the dense eigendecomposition, at
/// the largest system the dense oracle still covers comfortably.
pub fn krylov_vs_dense(seed: u64) -> Result<Check> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let cases: [(usize, usize); 2] = [(1, 256), (2, 16)];
    for (d, nx) in cases {
        let grid = GridSpec::periodic(d, nx)?;
        let velocity = VelocityField::from_fn(grid.clone(), |x, j| {
            (x[j] * (1.0 + j as f64)).sin() * 0.7 + 0.1
        });
        let params = StabilityParams::from_targets(&grid, &velocity, 0.25, 0.12)?;
        let a = build_time_marching_matrix(&grid, &velocity, &params)?;
        let decomp = decompose(&a, &params, &grid)?;
        let bu = dilate(&decomp.a_hat);
        let state: Vec<Complex64> = (0..bu.dim())
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm: f64 = state.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let (fast, _) = bu.apply_with_stats(&state, 1e-10)?;
        let u = dense_unitary_oracle(&bu)?;
        let slow = u * DVector::from_column_slice(&state);
        let diff = fast
            .iter()
            .zip(slow.iter())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        worst = worst.max(diff / norm);
    }
    Ok(Check::bounded("krylov-vs-dense", worst, KRYLOV_VS_DENSE_TOL))
}

/// The full mixing circuit against the dense encoded operator: the step
/// must produce exactly the sine-corrected block plus shifts, renormalized,
/// and its success probability the squared norm.
pub fn lcu_vs_dense(seed: u64) -> Result<Check> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for point in operating_points()? {
        let decomp = decompose(&point.a, &point.params, &point.grid)?;
        let encoded = encoded_operator_dense(&decomp)?;
        let d = point.grid.dims();
        let plan = build_plan(decomp, d);
        let field = random_positive_field(&point.grid, &mut rng);
        let state = StateVector::from_field(&field, plan.n_ancilla())?;
        let (next, p_t) = lcu_step(&state, &plan)?;
        let phi = DVector::from_column_slice(field.normalized()?.values());
        let expected = &encoded * phi;
        let expected_p = expected.norm_squared();
        worst = worst.max((p_t - expected_p).abs());
        let scale = expected_p.sqrt();
        for (got, want) in next.ancilla_block(0).iter().zip(expected.iter()) {
            worst = worst.max((got.re - want / scale).abs()).max(got.im.abs());
        }
    }
    Ok(Check::bounded("lcu-vs-encoded", worst, LCU_VS_DENSE_TOL))
}

/// Success probability against the classical norm ratio over random
/// operating points: |p_t - ||A phi||^2 / ||phi||^2| <= 5 r_eq^2 per draw.
/// Reports the worst error as a fraction of its bound.
pub fn probability_identity(draws: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut worst_fraction = 0.0f64;
    for i in 0..draws {
        let d = 1 + (i % 2);
        let grid = GridSpec::periodic(d, 8)?;
        let velocity = {
            let comps = (0..d)
                .map(|_| {
                    (0..grid.total_points())
                        .map(|_| 2.0 * rng.random::<f64>() - 1.0)
                        .collect()
                })
                .collect();
            VelocityField::from_components(grid.clone(), comps)?
        };
        let rh = 0.02 + rng.random::<f64>() * (1.0 / (2.0 * d as f64) - 0.04);
        let max_ra = 0.05 + 0.4 * rng.random::<f64>();
        let params = StabilityParams::from_targets(&grid, &velocity, max_ra, rh)?;
        let a = build_time_marching_matrix(&grid, &velocity, &params)?;
        let r_eq = params.equivalent_advection_parameter();
        let bound = PROBABILITY_BOUND_FACTOR * r_eq * r_eq;
        let decomp = decompose(&a, &params, &grid)?;
        let plan = build_plan(decomp, d);
        let field = random_positive_field(&grid, &mut rng);
        let state = StateVector::from_field(&field, plan.n_ancilla())?;
        let (_, p_t) = lcu_step(&state, &plan)?;
        let phi = field.normalized()?;
        let ratio: f64 = a.matvec(phi.values()).iter().map(|v| v * v).sum();
        worst_fraction = worst_fraction.max((p_t - ratio).abs() / bound);
    }
    Ok(Check {
        name: "probability-identity",
        passed: worst_fraction <= 1.0,
        measured: worst_fraction,
        requirement: format!(
            "<= 1 (|p_t - ||A phi||^2| within {PROBABILITY_BOUND_FACTOR} r_eq^2, {draws} draws)"
        ),
    })
}

/// ||A_tilde - A||_2 at a constant-speed 1-d operating point.
pub fn one_step_encoding_error(nx: usize, max_ra: f64, rh: f64) -> Result<f64> {
    let grid = GridSpec::periodic(1, nx)?;
    let velocity = VelocityField::from_fn(grid.clone(), |_, _| 1.0);
    let params = StabilityParams::from_targets(&grid, &velocity, max_ra, rh)?;
    let a = build_time_marching_matrix(&grid, &velocity, &params)?;
    let decomp = decompose(&a, &params, &grid)?;
    let encoded = encoded_operator_dense(&decomp)?;
    Ok(spectral_norm(&(encoded - a.to_dense())))
}

fn scaling_check(name: &'static str, coarse: f64) -> Result<Check> {
    let e_coarse = one_step_encoding_error(8, coarse, coarse)?;
    let e_fine = one_step_encoding_error(8, 0.5 * coarse, 0.5 * coarse)?;
    Ok(Check::in_range(name, e_coarse / e_fine, SCALING_FACTOR_RANGE))
}

/// Halving (r_a, r_h) from (0.1, 0.1) to (0.05, 0.05) must cut the one-step
/// encoding error by the quadratic factor.
///
/// Measured fact: at this operating point the factor is 4.670, slightly
/// above the pinned window. The error norm has the closed form
/// (1 - 2 r_h)(sigma - sin(pi sigma / 2)) with sigma = sqrt(1 + r_eq^2), so
/// the leading-order factor is 4 (1 - s) / (1 - 2 s) = 4.5 at s = 0.1, and
/// the higher-order terms push it to 4.670. The window is honored only
/// deeper in the asymptotic regime (see the refined check below); this
/// check reports the discrepancy rather than hiding it.
pub fn encoding_error_halving() -> Result<Check> {
    scaling_check("encoding-error-halving", 0.1)
}

/// The same halving one octave deeper, (0.05, 0.05) -> (0.025, 0.025),
/// where the quadratic regime has set in and the factor is 4.255.
pub fn encoding_error_halving_refined() -> Result<Check> {
    scaling_check("encoding-error-halving-refined", 0.05)
}

/// Every check in the suite, in report order.
pub fn run_all(seed: u64) -> Result<Vec<Check>> {
    let mut checks = structural_checks()?;
    checks.push(krylov_vs_dense(seed)?);
    checks.push(lcu_vs_dense(seed)?);
    checks.push(probability_identity(20, seed)?);
    checks.push(encoding_error_halving()?);
    checks.push(encoding_error_halving_refined()?);
    Ok(checks)
}
