//! End-to-end acceptance runs at pinned tolerances. Each test prints one
//! pass/fail line per criterion (visible with --nocapture) and then asserts
//! it, so a red criterion carries its measured values in the panic message.

use qmarch::boundary::max_interface_mean;
use qmarch::lattice::BoundaryKind;
use qmarch::lcu::{RunMode, SteadyStop};
use qmarch::scenarios::{
    heat_wall_1d, mse_metric, run_experiment, taylor_green, taylor_green_reference,
    ExperimentOptions,
};
use qmarch::verify;

const STEADY_CUMULATIVE_TARGET: f64 = 2.0 / 3.0;
const STEADY_CUMULATIVE_TOL: f64 = 0.01;
const STEADY_STEP_CAP: usize = 3000;
const QUANTUM_UNIFORM_TOL: f64 = 1e-4;
const CLASSICAL_MEAN_TOL: f64 = 1e-6;
const FULL_SCALE_MSE_LIMIT_PERCENT: f64 = 0.5;
const MASS_CONSERVATION_REL_TOL: f64 = 1e-10;
const INTERFACE_TOL: f64 = 1e-8;
const PROBABILITY_DRAWS: usize = 20;

fn report(criterion: &str, passed: bool, detail: &str) -> bool {
    println!("criterion {criterion}: {} - {detail}", if passed { "PASS" } else { "FAIL" });
    passed
}

/// One shared 32x32 vortex march feeds both the cumulative-probability
/// check and the steady-state limit check.
#[test]
fn criterion_1_and_7_steady_state_probability_and_limits() {
    let scenario = taylor_green(32, 0.1, 0.1).unwrap();
    let mut opts = ExperimentOptions::new(STEADY_STEP_CAP);
    opts.mode = RunMode::Both;
    opts.snapshot_fracs = vec![1.0];
    opts.steady_stop = Some(SteadyStop {
        quantum_l2: QUANTUM_UNIFORM_TOL,
        classical_linf: CLASSICAL_MEAN_TOL,
        check_every: 1,
    });
    let result = run_experiment(&scenario, &opts).unwrap();
    assert!(
        result.report.steady_reached,
        "no steady state within {STEADY_STEP_CAP} steps"
    );

    let cumulative = result.report.ledger.final_cumulative();
    let ok1 = report(
        "1",
        (cumulative - STEADY_CUMULATIVE_TARGET).abs() <= STEADY_CUMULATIVE_TOL,
        &format!(
            "32x32 vortex steady after {} steps, cumulative probability {cumulative:.9} \
             within {STEADY_CUMULATIVE_TOL} of 2/3",
            result.report.steps_run
        ),
    );

    let last = result.snapshots.last().unwrap();
    let quantum = last.quantum.as_ref().unwrap();
    let uniform = 1.0 / (quantum.values().len() as f64).sqrt();
    let q_dist = quantum
        .values()
        .iter()
        .map(|v| (v - uniform) * (v - uniform))
        .sum::<f64>()
        .sqrt();
    let classical = last.classical.as_ref().unwrap();
    let mean0 = scenario.initial.mean();
    let c_dist = classical
        .values()
        .iter()
        .fold(0.0f64, |acc, v| acc.max((v - mean0).abs()));
    let ok7 = report(
        "7",
        q_dist < QUANTUM_UNIFORM_TOL && c_dist < CLASSICAL_MEAN_TOL,
        &format!(
            "quantum register {q_dist:.3e} from uniform (< {QUANTUM_UNIFORM_TOL:.0e}), \
             classical field {c_dist:.3e} from the initial mean (< {CLASSICAL_MEAN_TOL:.0e})"
        ),
    );
    assert!(ok1 && ok7);
}

/// Reference-scale vortex: 64x64, 1400 steps, 15 qubits. Flagged as the
/// slow run; enable with `cargo test -- --ignored` (or --include-ignored).
#[test]
#[ignore = "reference-scale run"]
fn criterion_2_full_scale_vortex_reproduction() {
    let (scenario, point) = taylor_green_reference().unwrap();
    assert_eq!(point.system_qubits, 12);
    assert_eq!(point.ancilla_qubits, 3);
    assert_eq!(point.total_qubits, 15);
    let mut opts = ExperimentOptions::new(point.steps);
    opts.mode = RunMode::Both;
    opts.snapshot_fracs = vec![0.0, 0.1, 0.2, 1.0];
    let result = run_experiment(&scenario, &opts).unwrap();
    let worst = result
        .snapshots
        .iter()
        .filter_map(|s| s.mse_percent)
        .fold(0.0f64, f64::max);
    let ok = report(
        "2",
        worst <= FULL_SCALE_MSE_LIMIT_PERCENT,
        &format!(
            "64x64 vortex, {} steps on {} qubits, worst snapshot mse {worst:.4}% \
             (<= {FULL_SCALE_MSE_LIMIT_PERCENT}%), cumulative probability {:.6}",
            result.report.steps_run,
            point.total_qubits,
            result.report.ledger.final_cumulative()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_3_per_step_probability_identity() {
    let check = verify::probability_identity(PROBABILITY_DRAWS, 2026).unwrap();
    let ok = report(
        "3",
        check.passed,
        &format!(
            "worst |p_t - ||A phi||^2 / ||phi||^2| over {PROBABILITY_DRAWS} random draws \
             is {:.4} of its 5 r_eq^2 bound",
            check.measured
        ),
    );
    assert!(ok, "{check}");
}

#[test]
fn criterion_4_encoding_error_quadratic_order() {
    let check = verify::encoding_error_halving().unwrap();
    let ok = report(
        "4",
        check.passed,
        &format!(
            "halving (r_a, r_h) from (0.1, 0.1) to (0.05, 0.05) shrinks ||A_tilde - A||_2 \
             by {:.5}, pinned window [3.5, 4.5]",
            check.measured
        ),
    );
    assert!(
        ok,
        "measured factor {:.5} sits above the window: the error norm has the closed form \
         (1 - 2 r_h)(sigma - sin(pi sigma / 2)), sigma = sqrt(1 + r_eq^2), whose halving \
         factor at s = r_a = r_h is 4 (1 - s) / (1 - 2 s) + O(s^2) = 4.67 at s = 0.1; the \
         window is only entered a halving deeper (4.255 for 0.05 -> 0.025, covered by \
         verify::encoding_error_halving_refined)",
        check.measured
    );
}

#[test]
fn criterion_5_structural_identity_suite() {
    let mut checks = verify::structural_checks().unwrap();
    checks.push(verify::krylov_vs_dense(5).unwrap());
    checks.push(verify::lcu_vs_dense(6).unwrap());
    let failed: Vec<String> =
        checks.iter().filter(|c| !c.passed).map(|c| c.to_string()).collect();
    let ok = report(
        "5",
        failed.is_empty(),
        &format!(
            "{} exact identities and dense-oracle equivalences at their pinned tolerances",
            checks.len()
        ),
    );
    assert!(ok, "{}", failed.join("\n"));
}

#[test]
fn criterion_6_reflective_walls() {
    let steps = 200;
    let mut opts = ExperimentOptions::new(steps);
    opts.mode = RunMode::Both;
    opts.snapshot_fracs = vec![0.0, 0.25, 0.5, 0.75, 1.0];

    // insulating wall: classical mass exactly conserved, quantum within the
    // accumulated per-step encoding budget on the extended domain
    let insulated = heat_wall_1d(16, BoundaryKind::NeumannReflect, 0.05).unwrap();
    let result = run_experiment(&insulated, &opts).unwrap();
    let mass0 = insulated.initial.sum();
    let mass1 = result.snapshots.last().unwrap().classical.as_ref().unwrap().sum();
    let mass_drift = ((mass1 - mass0) / mass0).abs();
    let raw_last = result.report.snapshots.last().unwrap();
    let mse_extended = mse_metric(
        raw_last.quantum.as_ref().unwrap(),
        raw_last.classical.as_ref().unwrap(),
    )
    .unwrap();
    let r_eq = result.params.equivalent_advection_parameter();
    let budget_percent = 100.0 * steps as f64 * 5.0 * r_eq * r_eq;

    // absorbing wall: the mirror seam stays pinned at zero along the
    // classical extended march
    let absorbing = heat_wall_1d(16, BoundaryKind::DirichletReflect, 0.05).unwrap();
    let result_d = run_experiment(&absorbing, &opts).unwrap();
    let worst_interface = result_d
        .report
        .snapshots
        .iter()
        .filter_map(|s| s.classical.as_ref())
        .map(|f| max_interface_mean(f, 0))
        .fold(0.0f64, f64::max);

    let ok = report(
        "6",
        mass_drift <= MASS_CONSERVATION_REL_TOL
            && mse_extended <= budget_percent
            && worst_interface <= INTERFACE_TOL,
        &format!(
            "insulated mass drift {mass_drift:.3e} (<= {MASS_CONSERVATION_REL_TOL:.0e}), \
             extended-domain mse {mse_extended:.3e}% within the {steps}-step budget \
             {budget_percent:.1}%, absorbing interface {worst_interface:.3e} \
             (<= {INTERFACE_TOL:.0e})"
        ),
    );
    assert!(ok);
}
