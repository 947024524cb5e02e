//! Ready-made experiments and the driver that wires grids, walls, solvers,
//! and diagnostics together.

use crate::boundary::{
    extend_reflect, extend_velocity, restrict, restrict_with_tol, Parity, SYMMETRY_TOL,
};
use crate::error::{Error, Result};
use crate::lattice::{BoundaryKind, Field, GridSpec, VelocityField};
use crate::lcu::{run_simulation, RunMode, RunOptions, ShotConfig, SimulationReport, SteadyStop};
use crate::stencil::StabilityParams;

/// The steady single-cell vortex v = (sin x cos y, -cos x sin y) on the
/// periodic square [0, 2*pi)^2. Divergence-free both in the continuum and
/// for the discrete stencil, so the one-step matrix is doubly stochastic.
pub fn taylor_green_velocity(grid: &GridSpec) -> Result<VelocityField> {
    require_tau_square(grid)?;
    Ok(VelocityField::from_fn(grid.clone(), |x, j| {
        if j == 0 {
            x[0].sin() * x[1].cos()
        } else {
            -(x[0].cos()) * x[1].sin()
        }
    }))
}

/// phi_0 = sin(x + y) + 1: a positive field whose oscillating part decays
/// toward the uniform steady state.
pub fn initial_condition_sin(grid: &GridSpec) -> Result<Field> {
    require_tau_square(grid)?;
    Ok(Field::from_fn(grid.clone(), |x| (x[0] + x[1]).sin() + 1.0))
}

fn require_tau_square(grid: &GridSpec) -> Result<()> {
    if grid.dims() != 2 {
        return Err(Error::Config(format!(
            "vortex scenario is 2-d, grid has {} dimension(s)",
            grid.dims()
        )));
    }
    for dim in 0..2 {
        let extent = grid.size(dim) as f64 * grid.spacing();
        if (extent - std::f64::consts::TAU).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "vortex scenario needs the domain [0, 2*pi) per side, dimension {dim} spans \
                 {extent}"
            )));
        }
    }
    Ok(())
}

/// Relative mean squared error, in percent, of a unit-norm quantum field
/// against the classical reference: mean((q - c)^2) / max(c^2) * 100, with
/// the classical field normalized to unit 2-norm first so both live on the
/// same scale.
pub fn mse_metric(quantum: &Field, classical: &Field) -> Result<f64> {
    if quantum.grid() != classical.grid() {
        return Err(Error::Shape("fields live on different grids".into()));
    }
    let reference = classical.normalized()?;
    let denom = reference.values().iter().fold(0.0f64, |acc, c| acc.max(c * c));
    let mean_sq = quantum
        .values()
        .iter()
        .zip(reference.values())
        .map(|(q, c)| (q - c) * (q - c))
        .sum::<f64>()
        / quantum.values().len() as f64;
    Ok(mean_sq / denom * 100.0)
}

/// Peclet number v_rms * length / D.
pub fn peclet(velocity: &VelocityField, diffusivity: f64, length: f64) -> Result<f64> {
    if !diffusivity.is_finite() || diffusivity <= 0.0 {
        return Err(Error::Config(format!(
            "diffusivity must be positive, got {diffusivity}"
        )));
    }
    if !length.is_finite() || length <= 0.0 {
        return Err(Error::Config(format!("length must be positive, got {length}")));
    }
    Ok(velocity.rms() * length / diffusivity)
}

/// A fully specified experiment: grid, velocity, initial condition, step
/// parameters, and a sensible march length.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub grid: GridSpec,
    pub velocity: VelocityField,
    pub initial: Field,
    pub params: StabilityParams,
    /// March length that carries this scenario to (near) steady state.
    pub default_steps: usize,
}

/// Single-cell vortex mixing on the periodic square, pinned to the given
/// peak advection number and diffusion number. The reference resolution is
/// 64 x 64 at 1400 steps; the default step count scales with (nx / 64)^2 so
/// the physical horizon stays fixed.
pub fn taylor_green(nx: usize, max_ra: f64, rh: f64) -> Result<Scenario> {
    let grid = GridSpec::periodic(2, nx)?;
    let velocity = taylor_green_velocity(&grid)?;
    let initial = initial_condition_sin(&grid)?;
    let params = StabilityParams::from_targets(&grid, &velocity, max_ra, rh)?;
    let default_steps = ((1400 * nx * nx) as f64 / 4096.0).round().max(1.0) as usize;
    Ok(Scenario {
        name: "taylor-green".into(),
        grid,
        velocity,
        initial,
        params,
        default_steps,
    })
}

/// 1-d heat pulse between two walls of the given kind (insulating or
/// absorbing), on the unit interval with a Gaussian initial bump.
pub fn heat_wall_1d(nx: usize, kind: BoundaryKind, rh: f64) -> Result<Scenario> {
    if kind == BoundaryKind::Periodic {
        return Err(Error::Config("heat-1d is a walled scenario; pick a wall kind".into()));
    }
    let grid = GridSpec::new(1, nx, 1.0 / nx as f64, vec![kind])?;
    let velocity = VelocityField::zero(grid.clone());
    let params = StabilityParams::diffusion_only(&grid, rh, 1.0)?;
    let initial = Field::from_fn(grid.clone(), |x| (-(x[0] - 0.3).powi(2) * 50.0).exp());
    let default_steps = ((200 * nx * nx) as f64 / 64.0).round() as usize;
    Ok(Scenario {
        name: "heat-1d".into(),
        grid,
        velocity,
        initial,
        params,
        default_steps,
    })
}

/// Qubit budget at the reference operating point, plus the numbers that pin
/// it: peak advection number 0.1, diffusion number 0.1, 64 x 64 cells, 1400
/// steps, Peclet number near 23.
#[derive(Clone, Copy, Debug)]
pub struct ReferencePoint {
    pub system_qubits: u32,
    pub ancilla_qubits: u32,
    pub total_qubits: u32,
    pub steps: usize,
    pub max_ra: f64,
    pub rh: f64,
    pub peclet: f64,
    pub spacing: f64,
    pub diffusivity: f64,
}

/// The reference vortex experiment and its derived numbers.
pub fn taylor_green_reference() -> Result<(Scenario, ReferencePoint)> {
    let scenario = taylor_green(64, 0.1, 0.1)?;
    let budget = qubit_budget(&scenario.grid);
    let point = ReferencePoint {
        system_qubits: budget.system,
        ancilla_qubits: budget.lcu + budget.dilation,
        total_qubits: budget.total(),
        steps: scenario.default_steps,
        max_ra: scenario.params.max_ra(),
        rh: scenario.params.rh(),
        peclet: peclet(
            &scenario.velocity,
            scenario.params.diffusivity(),
            std::f64::consts::PI,
        )?,
        spacing: scenario.grid.spacing(),
        diffusivity: scenario.params.diffusivity(),
    };
    Ok((scenario, point))
}

/// Where the qubits go for a scenario's grid: system register, one mirror
/// qubit per walled dimension, the preparation register, and the dilation
/// qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QubitBudget {
    pub system: u32,
    pub mirror: u32,
    pub lcu: u32,
    pub dilation: u32,
}

impl QubitBudget {
    pub fn total(&self) -> u32 {
        self.system + self.mirror + self.lcu + self.dilation
    }
}

pub fn qubit_budget(grid: &GridSpec) -> QubitBudget {
    let d = grid.dims();
    let mirror = (0..d).filter(|&j| grid.boundary(j) != BoundaryKind::Periodic).count() as u32;
    let slots = (d + 1).next_power_of_two();
    QubitBudget {
        system: grid.system_qubits(),
        mirror,
        lcu: slots.trailing_zeros(),
        dilation: 1,
    }
}

/// Knobs for [`run_experiment`].
#[derive(Clone, Debug)]
pub struct ExperimentOptions {
    /// March length, or the cap when `steady_stop` is set.
    pub steps: usize,
    /// Fractions of the march at which to keep snapshots, each in [0, 1].
    pub snapshot_fracs: Vec<f64>,
    pub mode: RunMode,
    pub tol: f64,
    pub probability_floor: f64,
    pub shots: Option<ShotConfig>,
    pub steady_stop: Option<SteadyStop>,
}

impl ExperimentOptions {
    pub fn new(steps: usize) -> Self {
        Self {
            steps,
            snapshot_fracs: vec![0.0, 0.1, 0.2, 1.0],
            mode: RunMode::Both,
            tol: 1e-10,
            probability_floor: 1e-12,
            shots: None,
            steady_stop: None,
        }
    }
}

/// A snapshot restricted to the physical (unextended) domain. Quantum
/// fields are unit 2-norm; classical fields keep physical amplitudes.
#[derive(Clone, Debug)]
pub struct ExperimentSnapshot {
    pub step: usize,
    pub quantum: Option<Field>,
    pub classical: Option<Field>,
    /// Relative MSE percent of quantum against classical, when both exist
    /// and the classical field is not identically zero.
    pub mse_percent: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub scenario_name: String,
    /// Physical-domain snapshots (walls folded back).
    pub snapshots: Vec<ExperimentSnapshot>,
    /// Raw march data; its snapshots live on the extended domain when walls
    /// are present.
    pub report: SimulationReport,
    /// Step parameters actually marched (rebuilt on the extended grid when
    /// walls are present).
    pub params: StabilityParams,
    pub qubits: QubitBudget,
    /// Peclet number at the characteristic length of half the box, for
    /// advective scenarios.
    pub peclet: Option<f64>,
    /// Mirror-extended dimensions and their image parities.
    pub walls: Vec<(usize, Parity)>,
}

/// Run a scenario end to end: mirror-extend any walls, march the requested
/// solvers, fold the snapshots back to the physical domain, and attach the
/// comparison metric.
pub fn run_experiment(scenario: &Scenario, opts: &ExperimentOptions) -> Result<ExperimentResult> {
    for f in &opts.snapshot_fracs {
        if !f.is_finite() || *f < 0.0 || *f > 1.0 {
            return Err(Error::Config(format!("snapshot fraction {f} outside [0, 1]")));
        }
    }

    let walls: Vec<(usize, Parity)> = (0..scenario.grid.dims())
        .filter_map(|j| Parity::from_boundary(scenario.grid.boundary(j)).map(|p| (j, p)))
        .collect();

    let mut field = scenario.initial.clone();
    let mut velocity = scenario.velocity.clone();
    for &(dim, parity) in &walls {
        field = extend_reflect(&field, dim, parity)?;
        velocity = extend_velocity(&velocity, dim)?;
    }
    let params = if walls.is_empty() {
        scenario.params.clone()
    } else {
        StabilityParams::from_physical(
            velocity.grid(),
            &velocity,
            scenario.params.dt(),
            scenario.params.diffusivity(),
        )?
    };

    let mut run_opts = RunOptions::new(opts.steps);
    run_opts.snapshot_steps = opts
        .snapshot_fracs
        .iter()
        .map(|f| (f * opts.steps as f64).round() as usize)
        .collect();
    run_opts.mode = opts.mode;
    run_opts.tol = opts.tol;
    run_opts.probability_floor = opts.probability_floor;
    run_opts.shots = opts.shots;
    run_opts.steady_stop = opts.steady_stop;

    let report = run_simulation(&field, &velocity, &params, &run_opts)?;

    // The classical march commutes with the mirror images exactly, so it
    // restricts at the strict default tolerance. The emulated quantum march
    // breaks the image by its per-step encoding error, so its restriction
    // budget scales with the accumulated error bound.
    let r_eq = params.equivalent_advection_parameter();
    let quantum_budget = (report.steps_run as f64 * 5.0 * r_eq * r_eq).max(SYMMETRY_TOL);

    let mut snapshots = Vec::with_capacity(report.snapshots.len());
    for raw in &report.snapshots {
        let classical = match &raw.classical {
            Some(c) => {
                let mut folded = c.clone();
                for &(dim, parity) in walls.iter().rev() {
                    folded = restrict(&folded, dim, parity)?;
                }
                Some(folded)
            }
            None => None,
        };
        let quantum = match &raw.quantum {
            Some(q) => {
                let mut folded = q.clone();
                for &(dim, parity) in walls.iter().rev() {
                    folded = restrict_with_tol(&folded, dim, parity, quantum_budget)?;
                }
                Some(folded.normalized()?)
            }
            None => None,
        };
        let mse_percent = match (&quantum, &classical) {
            (Some(q), Some(c)) if c.norm_l2() > 0.0 => Some(mse_metric(q, c)?),
            _ => None,
        };
        snapshots.push(ExperimentSnapshot { step: raw.step, quantum, classical, mse_percent });
    }

    let peclet_number = if velocity.is_zero() {
        None
    } else if params.diffusivity() > 0.0 {
        let half_box = 0.5 * scenario.grid.size(0) as f64 * scenario.grid.spacing();
        Some(peclet(&scenario.velocity, params.diffusivity(), half_box)?)
    } else {
        None
    };

    Ok(ExperimentResult {
        scenario_name: scenario.name.clone(),
        snapshots,
        report,
        params,
        qubits: qubit_budget(&scenario.grid),
        peclet: peclet_number,
        walls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stencil::build_time_marching_matrix;

    #[test]
    fn vortex_is_discretely_divergence_free() {
        let grid = GridSpec::periodic(2, 8).unwrap();
        let velocity = taylor_green_velocity(&grid).unwrap();
        // spot value at (pi/4, pi/4): node (1, 1) of 8
        let m = crate::lattice::flatten_index(&[1, 1], &grid).unwrap();
        assert!((velocity.component(0)[m] - 0.5).abs() < 1e-12);
        assert!((velocity.component(1)[m] + 0.5).abs() < 1e-12);
        // columns of A sum to 1: mass is conserved under advection
        let params = StabilityParams::from_targets(&grid, &velocity, 0.1, 0.1).unwrap();
        let a = build_time_marching_matrix(&grid, &velocity, &params).unwrap();
        let at = a.transpose();
        for m in 0..grid.total_points() {
            assert!((at.row_sum(m) - 1.0).abs() < 1e-14, "column {m}");
        }
        // wrong domain is rejected
        let skewed = GridSpec::periodic_with_spacing(2, 8, 0.5).unwrap();
        assert!(taylor_green_velocity(&skewed).is_err());
        let one_d = GridSpec::periodic(1, 8).unwrap();
        assert!(taylor_green_velocity(&one_d).is_err());
    }

    #[test]
    fn sin_initial_condition_has_unit_mean() {
        let grid = GridSpec::periodic(2, 16).unwrap();
        let f = initial_condition_sin(&grid).unwrap();
        assert!((f.mean() - 1.0).abs() < 1e-12);
        // sample: at (0, 0) the value is sin(0) + 1 = 1
        assert!((f.values()[0] - 1.0).abs() < 1e-15);
        assert!(f.values().iter().all(|&v| (0.0..=2.0).contains(&v)));
    }

    #[test]
    fn mse_metric_matches_hand_example() {
        let grid = GridSpec::periodic(1, 4).unwrap();
        let c = Field::new(grid.clone(), vec![2.0, 0.0, 0.0, 0.0]).unwrap();
        let q = Field::new(grid.clone(), vec![1.0, 0.0, 0.0, 0.1]).unwrap();
        // normalized classical is e_0, so mean((q-c)^2) = 0.01/4, max c^2 = 1
        let mse = mse_metric(&q, &c).unwrap();
        assert!((mse - 0.25).abs() < 1e-12);
        assert_eq!(mse_metric(&c.normalized().unwrap(), &c).unwrap(), 0.0);
        let other = Field::zeros(GridSpec::periodic(1, 8).unwrap());
        assert!(mse_metric(&q, &other).is_err());
        assert!(mse_metric(&q, &Field::zeros(grid)).is_err());
    }

    #[test]
    fn reference_point_numbers() {
        let (scenario, point) = taylor_green_reference().unwrap();
        assert_eq!(point.system_qubits, 12);
        assert_eq!(point.ancilla_qubits, 3);
        assert_eq!(point.total_qubits, 15);
        assert_eq!(point.steps, 1400);
        assert!((point.max_ra - 0.1).abs() < 1e-12);
        assert!((point.rh - 0.1).abs() < 1e-15);
        // with these targets the diffusivity lands on the grid spacing
        assert!((point.diffusivity - point.spacing).abs() < 1e-12);
        // Peclet number ~ 22.6, quoted as 23
        assert!((point.peclet - 22.627).abs() < 0.01);
        assert_eq!(point.peclet.round() as i64, 23);
        assert_eq!(scenario.default_steps, 1400);
        assert_eq!(taylor_green(32, 0.1, 0.1).unwrap().default_steps, 350);
    }

    #[test]
    fn qubit_budget_counts_walls() {
        let periodic = GridSpec::periodic(2, 8).unwrap();
        let b = qubit_budget(&periodic);
        assert_eq!(b, QubitBudget { system: 6, mirror: 0, lcu: 2, dilation: 1 });
        assert_eq!(b.total(), 9);
        let walled = GridSpec::new(
            3,
            4,
            0.1,
            vec![
                BoundaryKind::NeumannReflect,
                BoundaryKind::Periodic,
                BoundaryKind::DirichletReflect,
            ],
        )
        .unwrap();
        let b = qubit_budget(&walled);
        assert_eq!(b, QubitBudget { system: 6, mirror: 2, lcu: 2, dilation: 1 });
    }

    #[test]
    fn periodic_experiment_compares_solvers() {
        let scenario = taylor_green(8, 0.1, 0.1).unwrap();
        let mut opts = ExperimentOptions::new(20);
        opts.snapshot_fracs = vec![0.0, 0.5, 1.0];
        let result = run_experiment(&scenario, &opts).unwrap();
        assert_eq!(result.scenario_name, "taylor-green");
        assert!(result.walls.is_empty());
        assert_eq!(
            result.snapshots.iter().map(|s| s.step).collect::<Vec<_>>(),
            vec![0, 10, 20]
        );
        for snap in &result.snapshots {
            let mse = snap.mse_percent.expect("both solvers ran");
            assert!(mse < 5.0, "mse {mse}% at step {}", snap.step);
            assert!((snap.quantum.as_ref().unwrap().norm_l2() - 1.0).abs() < 1e-10);
        }
        assert!(result.report.ledger.final_cumulative() > 0.0);
        assert!(result.report.ledger.final_cumulative() <= 1.0 + 1e-12);
        let pe = result.peclet.expect("advective scenario");
        assert!(pe > 0.0);
        assert!(result.snapshots[0].mse_percent.unwrap() < 1e-20);
    }

    #[test]
    fn walled_experiment_folds_back_to_physical_domain() {
        for kind in [BoundaryKind::NeumannReflect, BoundaryKind::DirichletReflect] {
            let scenario = heat_wall_1d(8, kind, 0.1).unwrap();
            let mut opts = ExperimentOptions::new(50);
            opts.snapshot_fracs = vec![0.0, 1.0];
            let result = run_experiment(&scenario, &opts).unwrap();
            assert_eq!(result.walls.len(), 1);
            assert_eq!(result.qubits.mirror, 1);
            // raw march ran on the doubled grid, snapshots fold back
            assert_eq!(result.params.n_points(), 16);
            let last = result.snapshots.last().unwrap();
            let c = last.classical.as_ref().unwrap();
            assert_eq!(c.grid(), &scenario.grid);
            if kind == BoundaryKind::NeumannReflect {
                // insulating walls conserve mass on the physical domain
                assert!((c.sum() - scenario.initial.sum()).abs() < 1e-10);
            } else {
                // absorbing walls drain it
                assert!(c.sum() < scenario.initial.sum() * 0.8);
            }
            let mse = last.mse_percent.expect("both solvers ran");
            assert!(mse < 1.0, "{kind:?} mse {mse}%");
        }
    }

    #[test]
    fn experiment_rejects_bad_fractions() {
        let scenario = taylor_green(8, 0.1, 0.1).unwrap();
        let mut opts = ExperimentOptions::new(5);
        opts.snapshot_fracs = vec![0.0, 1.5];
        assert!(run_experiment(&scenario, &opts).is_err());
    }
}
