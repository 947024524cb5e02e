//! Artifact emission. All numeric output is written with 17 significant
//! digits and '\n' line endings, so a rerun with the same config and seed
//! produces byte-identical files.

use std::fmt::Write as _;
use std::fs;

use qmarch::lattice::{unflatten_index, BoundaryKind, GridSpec};
use qmarch::scenarios::{ExperimentResult, ExperimentSnapshot};

use crate::config::{CliError, RunPlan};

/// Enough digits to round-trip every f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

const INDEX_HEADERS: [&str; 3] = ["x-index", "y-index", "z-index"];

pub fn snapshot_csv(grid: &GridSpec, snap: &ExperimentSnapshot) -> String {
    let mut headers: Vec<&str> = INDEX_HEADERS[..grid.dims()].to_vec();
    if snap.quantum.is_some() {
        headers.push("quantum");
    }
    if snap.classical.is_some() {
        headers.push("classical");
    }
    let mut out = headers.join(",");
    out.push('\n');
    for m in 0..grid.total_points() {
        let mut row: Vec<String> =
            unflatten_index(m, grid).iter().map(|c| c.to_string()).collect();
        if let Some(q) = &snap.quantum {
            row.push(fmt_f64(q.values()[m]));
        }
        if let Some(c) = &snap.classical {
            row.push(fmt_f64(c.values()[m]));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// One row per marched step. Columns a solver did not produce stay empty.
pub fn probability_csv(result: &ExperimentResult) -> String {
    let ledger = &result.report.ledger;
    let mut out = String::from("step,p_t,cumulative,classical_norm_ratio\n");
    for t in 0..result.report.steps_run {
        let p = ledger.per_step.get(t).map(|&x| fmt_f64(x)).unwrap_or_default();
        let c = ledger.cumulative.get(t).map(|&x| fmt_f64(x)).unwrap_or_default();
        let r = ledger
            .classical_norm_ratio
            .as_ref()
            .and_then(|v| v.get(t))
            .map(|&x| fmt_f64(x))
            .unwrap_or_default();
        let _ = writeln!(out, "{},{p},{c},{r}", t + 1);
    }
    out
}

/// Hand-rolled writer so the field order is fixed, with wall_time_s always
/// the last key (golden tests compare summaries modulo that line).
struct Json {
    buf: String,
    first: bool,
}

impl Json {
    fn new() -> Self {
        Json { buf: String::from("{\n"), first: true }
    }

    fn raw(&mut self, key: &str, value: &str) {
        if !self.first {
            self.buf.push_str(",\n");
        }
        self.first = false;
        let _ = write!(self.buf, "  \"{key}\": {value}");
    }

    fn string(&mut self, key: &str, value: &str) {
        self.raw(key, &format!("\"{value}\""));
    }

    fn int(&mut self, key: &str, value: u64) {
        self.raw(key, &value.to_string());
    }

    fn num(&mut self, key: &str, value: f64) {
        self.raw(key, &fmt_f64(value));
    }

    fn opt_num(&mut self, key: &str, value: Option<f64>) {
        match value {
            Some(x) => self.num(key, x),
            None => self.raw(key, "null"),
        }
    }

    fn bool(&mut self, key: &str, value: bool) {
        self.raw(key, if value { "true" } else { "false" });
    }

    fn int_array(&mut self, key: &str, values: impl Iterator<Item = u64>) {
        let body = values.map(|v| v.to_string()).collect::<Vec<_>>().join(", ");
        self.raw(key, &format!("[{body}]"));
    }

    fn string_array(&mut self, key: &str, values: impl Iterator<Item = String>) {
        let body =
            values.map(|v| format!("\"{v}\"")).collect::<Vec<_>>().join(", ");
        self.raw(key, &format!("[{body}]"));
    }

    fn finish(mut self) -> String {
        self.buf.push_str("\n}\n");
        self.buf
    }
}

fn boundary_name(kind: BoundaryKind) -> &'static str {
    match kind {
        BoundaryKind::Periodic => "periodic",
        BoundaryKind::NeumannReflect => "neumann",
        BoundaryKind::DirichletReflect => "dirichlet",
    }
}

fn mode_name(plan: &RunPlan) -> &'static str {
    use qmarch::lcu::RunMode;
    match plan.opts.mode {
        RunMode::Quantum => "quantum",
        RunMode::Classical => "classical",
        RunMode::Both => "both",
    }
}

pub fn summary_json(plan: &RunPlan, result: &ExperimentResult, wall_time_s: f64) -> String {
    let grid = &plan.scenario.grid;
    let params = &result.params;
    let report = &result.report;
    let mut j = Json::new();
    j.string("scenario", &result.scenario_name);
    j.string("mode", mode_name(plan));
    j.int("dims", grid.dims() as u64);
    j.int_array("shape", grid.shape().iter().map(|&s| s as u64));
    j.string_array(
        "boundary",
        (0..grid.dims()).map(|d| boundary_name(grid.boundary(d)).to_string()),
    );
    j.int("steps_requested", plan.opts.steps as u64);
    j.int("steps_run", report.steps_run as u64);
    j.bool("steady_reached", report.steady_reached);
    j.num("dt", params.dt());
    j.num("dx", params.spacing());
    j.num("diffusivity", params.diffusivity());
    j.num("max_ra", params.max_ra());
    j.num("rh", params.rh());
    j.num("r_eq", params.equivalent_advection_parameter());
    j.opt_num("peclet", result.peclet);
    j.num("tol", plan.opts.tol);
    j.int("seed", plan.seed);
    match plan.shots {
        Some(n) => j.int("shots", n),
        None => j.raw("shots", "null"),
    }
    j.int_array("snapshot_steps", result.snapshots.iter().map(|s| s.step as u64));
    j.opt_num("final_mse_percent", result.snapshots.last().and_then(|s| s.mse_percent));
    let cumulative = if plan.opts.mode.runs_quantum() {
        Some(report.ledger.final_cumulative())
    } else {
        None
    };
    j.opt_num("cumulative_probability", cumulative);
    j.opt_num(
        "empirical_cumulative_probability",
        report.shots.as_ref().map(|s| s.empirical_cumulative()),
    );
    j.int("matvec_count", report.matvec_count as u64);
    j.int("system_qubits", result.qubits.system as u64);
    j.int("mirror_qubits", result.qubits.mirror as u64);
    j.int("lcu_qubits", result.qubits.lcu as u64);
    j.int("dilation_qubits", result.qubits.dilation as u64);
    j.int("total_qubits", result.qubits.total() as u64);
    j.num("wall_time_s", wall_time_s);
    j.finish()
}

/// Write every artifact for a finished run into `plan.out`.
pub fn write_all(
    plan: &RunPlan,
    result: &ExperimentResult,
    wall_time_s: f64,
) -> Result<(), CliError> {
    fs::create_dir_all(&plan.out)?;
    for snap in &result.snapshots {
        let name = format!("snapshot_{:06}.csv", snap.step);
        fs::write(plan.out.join(name), snapshot_csv(&plan.scenario.grid, snap))?;
    }
    fs::write(plan.out.join("probabilities.csv"), probability_csv(result))?;
    fs::write(plan.out.join("summary.json"), summary_json(plan, result, wall_time_s))?;
    Ok(())
}
