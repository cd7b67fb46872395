//! Command pipelines and output emission.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use kfpness_core::analysis::{decay_fit, homogeneous_fixed_point, homogeneous_oracle, moment_balance_check};
use kfpness_core::integrator::run_transient;
use kfpness_core::ness::{fixed_point_ness, stability_experiment};
use kfpness_core::phasespace::{uniform_maxwellian, write_snapshot};
use kfpness_core::{
    BoundaryMode, DiffusivityProfile, DistributionField, EnergyMode, Error, IntegratorConfig,
    Profile, RunTrace,
};
use serde_json::{json, Map, Value};

use crate::config::{ConfigError, Setup};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Simulate,
    LinearNess,
    Ness,
    Stability,
    OracleCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Simulate => "simulate",
            Command::LinearNess => "linear-ness",
            Command::Ness => "ness",
            Command::Stability => "stability",
            Command::OracleCheck => "oracle-check",
        }
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Result of one command: exit status plus the summary record.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub summary: Value,
    pub written: Vec<PathBuf>,
}

impl Outcome {
    pub fn reason(&self) -> Option<&str> {
        self.summary.get("reason").and_then(Value::as_str)
    }
}

/// Oracle checks pass within this relative error.
pub const ORACLE_TOL: f64 = 0.01;

struct Emitter {
    dir: PathBuf,
    prefix: String,
    written: Vec<PathBuf>,
}

impl Emitter {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{}{}", self.prefix, name))
    }

    fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<fs::File>) -> kfpness_core::Result<()>,
    ) -> Result<(), Failure> {
        let path = self.path(name);
        let io = |e: std::io::Error| Failure::io(&path, e);
        fs::create_dir_all(&self.dir).map_err(|e| Failure::io(&self.dir, e))?;
        let mut w = BufWriter::new(fs::File::create(&path).map_err(io)?);
        body(&mut w).map_err(|e| match e {
            Error::Io(e) => Failure::io(&path, e),
            other => Failure::from(other),
        })?;
        w.flush().map_err(io)?;
        self.written.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, v: &Value) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(v).expect("json values serialize");
        self.write(name, |w| {
            writeln!(w, "{text}")?;
            Ok(())
        })
    }
}

#[derive(Debug)]
struct Failure {
    code: i32,
    reason: String,
    message: String,
}

impl Failure {
    fn io(path: &Path, e: std::io::Error) -> Self {
        Self {
            code: EXIT_INVALID,
            reason: "io_error".into(),
            message: format!("{}: {e}", path.display()),
        }
    }

    fn invalid(reason: &str, message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            reason: reason.into(),
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_INVALID
            },
            reason: e.reason_code().into(),
            message: e.to_string(),
        }
    }
}

fn with_status(command: Command, status: &str, mut body: Map<String, Value>) -> Value {
    body.insert("command".into(), json!(command.name()));
    body.insert("status".into(), json!(status));
    Value::Object(body)
}

fn failure_summary(command: Command, f: &Failure) -> Value {
    let mut m = Map::new();
    m.insert("reason".into(), json!(f.reason));
    m.insert("message".into(), json!(f.message));
    m.insert("exit_code".into(), json!(f.code));
    with_status(command, "failed", m)
}

/// Summary written when the configuration itself is rejected.
pub fn config_failure(command: Command, err: &ConfigError) -> Value {
    let issues: Vec<Value> = err
        .issues
        .iter()
        .map(|i| json!({"path": i.path, "line": i.line, "message": i.message}))
        .collect();
    let mut m = Map::new();
    m.insert("reason".into(), json!("validation_error"));
    m.insert("message".into(), json!(err.to_string()));
    m.insert("issues".into(), Value::Array(issues));
    m.insert("exit_code".into(), json!(EXIT_INVALID));
    with_status(command, "failed", m)
}

/// Writes a failure summary for a rejected configuration into `dir`.
pub fn write_config_failure(
    command: Command,
    err: &ConfigError,
    dir: &Path,
) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&config_failure(command, err)).expect("json");
    fs::write(&path, format!("{text}\n"))?;
    Ok(path)
}

/// Runs `command` on a resolved setup. `out` overrides `output.directory`.
/// `validate` writes nothing; every other command writes at least
/// `summary.json` and `metadata.json`, also on failure.
pub fn run_command(command: Command, setup: &Setup, out: Option<&Path>) -> Outcome {
    if command == Command::Validate {
        let mut m = Map::new();
        m.insert("metadata".into(), setup.metadata());
        return Outcome {
            exit_code: EXIT_OK,
            summary: with_status(command, "ok", m),
            written: Vec::new(),
        };
    }
    let mut em = Emitter {
        dir: out
            .map(Path::to_path_buf)
            .unwrap_or_else(|| setup.config.output.directory.clone()),
        prefix: setup.config.output.prefix.clone(),
        written: Vec::new(),
    };
    let mut meta = setup.metadata();
    meta["command"] = json!(command.name());
    meta["version"] = json!(env!("CARGO_PKG_VERSION"));
    let result = em.json("metadata.json", &meta).and_then(|_| match command {
        Command::Validate => unreachable!(),
        Command::Simulate => simulate(setup, &mut em),
        Command::LinearNess => linear_ness(setup, &mut em),
        Command::Ness => ness(setup, &mut em),
        Command::Stability => stability(setup, &mut em),
        Command::OracleCheck => oracle_check(setup, &mut em),
    });
    let (code, summary) = match result {
        Ok((code, body)) => {
            let status = if code == EXIT_OK { "ok" } else { "failed" };
            (code, with_status(command, status, body))
        }
        Err(f) => (f.code, failure_summary(command, &f)),
    };
    let code = match em.json("summary.json", &summary) {
        Ok(()) => code,
        Err(f) if code == EXIT_OK => f.code,
        Err(_) => code,
    };
    Outcome {
        exit_code: code,
        summary,
        written: em.written,
    }
}

type Body = Result<(i32, Map<String, Value>), Failure>;

fn initial_field(setup: &Setup) -> Result<DistributionField, Failure> {
    Ok(uniform_maxwellian(
        setup.system.grid().clone(),
        setup.initial_temperature,
        true,
    )?)
}

fn write_trace(em: &mut Emitter, trace: &RunTrace) -> Result<(), Failure> {
    em.write("run.csv", |w| trace.write_csv(w))?;
    em.write("final.csv", |w| write_snapshot(&trace.final_field, w))
}

fn trace_fields(trace: &RunTrace, m: &mut Map<String, Value>) {
    let last = trace.samples.last().expect("trace has samples");
    m.insert("t".into(), json!(last.t));
    m.insert("steps".into(), json!(trace.steps));
    m.insert("samples".into(), json!(trace.samples.len()));
    m.insert("mass".into(), json!(last.mass));
    m.insert("mass_drift".into(), json!(trace.mass_drift()));
    m.insert("energy".into(), json!(last.energy));
    m.insert("min_value".into(), json!(trace.final_field.min_value()));
    m.insert("steady_reached".into(), json!(trace.steady_reached));
    m.insert("residual".into(), json!(finite_or_null(trace.residual)));
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn simulate(setup: &Setup, em: &mut Emitter) -> Body {
    let f0 = initial_field(setup)?;
    let trace = run_transient(&f0, &setup.system, &setup.integrator, None)?;
    write_trace(em, &trace)?;
    let budget = moment_balance_check(
        &trace.final_field,
        &setup.system,
        &setup.integrator.energy_mode,
        setup.integrator.dt,
    )?;
    em.write("budget.csv", |w| budget.write_csv(w))?;
    let mut m = Map::new();
    trace_fields(&trace, &mut m);
    m.insert("budget_sum".into(), json!(budget.sum));
    m.insert("budget_fd_derivative".into(), json!(budget.fd_derivative));
    m.insert("budget_mismatch".into(), json!(budget.relative_mismatch()));
    Ok((EXIT_OK, m))
}

/// Integrator settings of a steady search that keeps the configured cadence.
fn steady_integrator(setup: &Setup, mode: EnergyMode) -> IntegratorConfig {
    IntegratorConfig {
        t_final: f64::INFINITY,
        energy_mode: mode,
        max_steps: Some(setup.steady.max_steps),
        stop_at_steady: true,
        ..setup.integrator.clone()
    }
}

fn linear_ness(setup: &Setup, em: &mut Emitter) -> Body {
    let lambda = match &setup.integrator.energy_mode {
        EnergyMode::Frozen(l) => l.clone(),
        EnergyMode::SelfConsistent => DiffusivityProfile::new(setup.system.tau().to_vec())?,
    };
    let f0 = initial_field(setup)?;
    let cfg = steady_integrator(setup, EnergyMode::Frozen(lambda));
    let trace = run_transient(&f0, &setup.system, &cfg, None)?;
    write_trace(em, &trace)?;
    if !trace.steady_reached {
        return Err(Error::NotConverged {
            steps: trace.steps,
            residual: trace.residual,
        }
        .into());
    }
    let mut m = Map::new();
    trace_fields(&trace, &mut m);
    Ok((EXIT_OK, m))
}

fn ness_body(outcome: &kfpness_core::NessOutcome) -> Map<String, Value> {
    let Value::Object(mut m) = serde_json::to_value(outcome.summary()).expect("summary") else {
        unreachable!()
    };
    m.insert("converged".into(), json!(outcome.state.converged));
    m.insert(
        "history".into(),
        Value::Array(
            outcome
                .state
                .history
                .iter()
                .map(|&(nu, f)| json!({"nu": nu, "f_nu": f}))
                .collect(),
        ),
    );
    m
}

fn ness(setup: &Setup, em: &mut Emitter) -> Body {
    let outcome = fixed_point_ness(&setup.system, &setup.fixed_point)?;
    em.write("final.csv", |w| write_snapshot(&outcome.steady.field, w))?;
    let mut cfg = setup.integrator.clone();
    cfg.t_final = 0.0;
    let trace = run_transient(&outcome.steady.field, &setup.system, &cfg, None)?;
    em.write("run.csv", |w| trace.write_csv(w))?;
    Ok((EXIT_OK, ness_body(&outcome)))
}

fn stability(setup: &Setup, em: &mut Emitter) -> Body {
    let outcome = fixed_point_ness(&setup.system, &setup.fixed_point)?;
    let st = stability_experiment(
        &setup.system,
        &outcome.steady,
        setup.config.stability.amplitude,
        setup.config.stability.t_final,
        &setup.integrator,
    )?;
    write_trace(em, &st.trace)?;
    let mut m = Map::new();
    m.insert("ness".into(), Value::Object(ness_body(&outcome)));
    let fit = &st.fit;
    m.insert(
        "fit".into(),
        json!({
            "status": fit.status.as_str(),
            "rate": fit.rate,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "window": [fit.window.0, fit.window.1],
            "samples": fit.samples,
            "floor": st.floor,
        }),
    );
    m.insert("regime_flag".into(), json!(outcome.regime_flag));
    // the fit re-run on the written series must agree
    debug_assert_eq!(decay_fit(&st.trace.distance_series(), st.floor).status, fit.status);
    Ok((EXIT_OK, m))
}

/// Probe radii of the written Fourier profile.
const ORACLE_RADII: [f64; 9] = [0.0, 0.05, 0.1, 0.2, 0.5, 1.0, 1.5, 2.0, 3.0];

fn oracle_check(setup: &Setup, em: &mut Emitter) -> Body {
    let p = setup.system.params();
    let tau = match p.tau {
        Profile::Constant(t) => t,
        _ => return Err(Failure::invalid("not_homogeneous", "oracle-check needs a constant tau")),
    };
    let homogeneous = p.boundary.mode == BoundaryMode::Periodic
        && p.thermostats.len() == 1
        && setup.system.thermostats().len() == 1
        && (0..setup.system.grid().n_cells()).all(|c| setup.system.thermostats().contains(0, c));
    if !homogeneous {
        return Err(Failure::invalid(
            "not_homogeneous",
            "oracle-check needs periodic boundaries and one thermostat covering the domain",
        ));
    }
    let (eta, temp) = (p.thermostats[0].eta, p.thermostats[0].temperature);
    let alpha = p.alpha;

    let oracle = homogeneous_oracle(tau, eta, temp, &ORACLE_RADII)?;
    em.write("oracle.csv", |w| {
        writeln!(w, "r,fhat")?;
        for (r, f) in oracle.radii.iter().zip(&oracle.profile) {
            writeln!(w, "{r:.16e},{f:.16e}")?;
        }
        Ok(())
    })?;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();

    let mut m = Map::new();
    let mut pass = true;
    let mut check = |name: &str, value: f64, reference: f64| {
        let err = rel(value, reference);
        let ok = err <= ORACLE_TOL;
        pass &= ok;
        json!({"name": name, "value": value, "reference": reference, "relative_error": err, "pass": ok})
    };
    let mut checks = vec![check(
        "quadrature_vs_closed_form",
        oracle.steady_energy,
        oracle.closed_form,
    )];

    let lin = setup.fixed_point.steady.clone();
    let base = kfpness_core::ness::linear_reference(&setup.system, &lin)?;
    em.write("final.csv", |w| write_snapshot(&base.field, w))?;
    checks.push(check("linear_steady_energy", base.energy, oracle.closed_form));
    if alpha > 0.0 {
        let outcome = fixed_point_ness(&setup.system, &setup.fixed_point)?;
        checks.push(check(
            "fixed_point",
            outcome.nu_star,
            homogeneous_fixed_point(alpha, tau, eta, temp),
        ));
        m.insert("ness".into(), Value::Object(ness_body(&outcome)));
    }
    m.insert("checks".into(), Value::Array(checks));
    m.insert("tolerance".into(), json!(ORACLE_TOL));
    if pass {
        Ok((EXIT_OK, m))
    } else {
        m.insert("reason".into(), json!("oracle_mismatch"));
        Ok((EXIT_NUMERICAL, m))
    }
}
