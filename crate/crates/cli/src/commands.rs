//! Command dispatch: each command writes its CSV reports, optional VTK
//! fields, the resolved configuration and a manifest into the output
//! directory.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use slipflow::analysis::{
    bogovskii_bound, decay_profile, embedding_bound, growth_profile, korn_constant, poincare_constant,
    uniqueness_probe, ConstantsReport, DecayVerdict, ProbeStart, ProbeVerdict,
};
use slipflow::carrier::{certify_smallness, verify_carrier, CarrierField, SamplingGrid, SweepOptions};
use slipflow::discretization::{build_spaces, mms_convergence, EndCondition, SpaceOptions};
use slipflow::error::Error;
use slipflow::geometry::{build_mesh, TruncatedMesh};
use slipflow::io::{
    carrier_table, certification_table, constants_table, decay_table, growth_table, history_table, mms_table,
    norms_table, probe_table, write_boundary_vtk, write_carrier_vtk, write_mesh_vtk, write_solution_vtk, Table,
};
use slipflow::solver::{picard_solve, reconstruct_u, Problem, SolutionBundle};
use toml::{Table as TomlTable, Value};

use crate::config::RunConfig;

/// Flux mismatch allowed at the solution's stations, relative to `max(1, |Φ|)`.
pub const STATION_FLUX_TOL: f64 = 1e-8;
/// Allowed relative mismatch in the integrated derivative identity of `y⁺`.
pub const DECAY_IDENTITY_TOL: f64 = 1e-8;
/// Velocity H¹ and pressure L² orders expected of P2/P1 elements.
pub const MMS_VELOCITY_ORDER: (f64, f64) = (2.0, 0.3);
pub const MMS_PRESSURE_ORDER: (f64, f64) = (2.0, 0.5);

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    VerifyCarrier,
    Solve,
    Constants,
    Decay,
    Growth,
    ProbeUniqueness,
    MmsConvergence,
    Certify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyCarrier => "verify-carrier",
            Command::Solve => "solve",
            Command::Constants => "constants",
            Command::Decay => "decay",
            Command::Growth => "growth",
            Command::ProbeUniqueness => "probe-uniqueness",
            Command::MmsConvergence => "mms-convergence",
            Command::Certify => "certify",
        }
    }
}

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass = 0,
    Validation = 1,
    Numerical = 2,
    Invariant = 3,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn name(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Validation => "validation_error",
            Status::Numerical => "numerical_failure",
            Status::Invariant => "invariant_violation",
        }
    }

    /// Exit status of a library error.
    pub fn of(e: &Error) -> Self {
        match e {
            Error::DomainTooShort { .. }
            | Error::Geometry(_)
            | Error::InvalidInterval { .. }
            | Error::Domain(_)
            | Error::InvalidParameter(_)
            | Error::DegenerateInput(_)
            | Error::Precondition(_) => Status::Validation,
            Error::SolverBreakdown { .. } | Error::NonConvergence { .. } | Error::EigenStagnation { .. } | Error::Io(_) => {
                Status::Numerical
            }
            Error::OutsideDomain { .. } | Error::LayoutMismatch(_) | Error::ConstraintLeak(_) => Status::Invariant,
        }
    }
}

/// What a command produced.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub status: Status,
    /// Failed invariants or the library diagnostic.
    pub messages: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

struct Run<'a> {
    config: &'a RunConfig,
    dir: PathBuf,
    artifacts: Vec<PathBuf>,
    failures: Vec<String>,
    summary: TomlTable,
    iterations: Vec<Value>,
    /// A finding that counts as a numerical failure rather than a violation.
    numerical: bool,
}

impl Run<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.artifacts.push(p.clone());
        p
    }

    fn csv(&mut self, name: &str, table: &Table) -> slipflow::error::Result<()> {
        let p = self.path(name);
        table.write_csv(BufWriter::new(File::create(p)?))
    }

    fn vtk(
        &mut self,
        name: &str,
        write: impl FnOnce(BufWriter<File>) -> slipflow::error::Result<()>,
    ) -> slipflow::error::Result<()> {
        let p = self.path(name);
        write(BufWriter::new(File::create(p)?))
    }

    fn assert(&mut self, ok: bool, message: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(message());
        }
    }

    fn note(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.into(), value.into());
    }

    fn mesh(&self) -> slipflow::error::Result<Arc<TruncatedMesh>> {
        Ok(Arc::new(build_mesh(&self.config.channel(), self.config.domain.half_length, self.config.domain.h)?))
    }

    fn problem(&self) -> slipflow::error::Result<Problem> {
        let carrier = CarrierField::new(self.config.carrier_params())?;
        Problem::new(self.mesh()?, carrier)
    }

    fn solve(&mut self) -> slipflow::error::Result<SolutionBundle> {
        let bundle = picard_solve(&self.problem()?, &self.config.solve_options(), None)?;
        for r in &bundle.history {
            let mut row = TomlTable::new();
            row.insert("iteration".into(), (r.iteration as i64).into());
            row.insert("increment".into(), r.increment.into());
            row.insert("residual".into(), r.residual.into());
            row.insert("damping".into(), r.damping.into());
            row.insert("flux_leak".into(), r.flux_leak.into());
            self.iterations.push(Value::Table(row));
        }
        self.note("iterations", bundle.iterations() as i64);
        self.note("relative_residual", bundle.relative_residual());
        self.note("v_h1", bundle.v_h1);
        self.note("apriori_quotient", bundle.apriori_quotient());
        self.note("contraction_estimate", bundle.contraction_estimate());
        self.csv("history.csv", &history_table(&bundle.history))?;
        Ok(bundle)
    }

    fn dispatch(&mut self, command: Command) -> slipflow::error::Result<()> {
        match command {
            Command::VerifyCarrier => self.verify_carrier(),
            Command::Solve => self.solve_command(),
            Command::Constants => self.constants(),
            Command::Decay => self.decay(),
            Command::Growth => self.growth(),
            Command::ProbeUniqueness => self.probe(),
            Command::MmsConvergence => self.mms(),
            Command::Certify => self.certify(),
        }
    }

    fn verify_carrier(&mut self) -> slipflow::error::Result<()> {
        let c = self.config;
        let carrier = CarrierField::new(c.carrier_params())?;
        let grid = SamplingGrid {
            nx: c.verify.nx as usize,
            ny: c.verify.ny as usize,
            wall_samples: c.verify.wall_samples as usize,
            stations: c.verify.stations as usize,
        };
        let report = verify_carrier(&carrier, &grid);
        let table = carrier_table(&report, c.flow.flux);
        self.csv("carrier.csv", &table)?;
        for check in report.checks(c.flow.flux) {
            self.assert(check.pass, || format!("carrier check {} = {:e} exceeds {:e}", check.name, check.value, check.tolerance));
        }
        if let Some(w) = &report.resolution_warning {
            self.note("resolution_warning", w.clone());
        }
        let mesh = self.mesh()?;
        self.vtk("carrier.vtk", |w| write_carrier_vtk(&mesh, &carrier, w))
    }

    fn solve_command(&mut self) -> slipflow::error::Result<()> {
        let bundle = self.solve()?;
        let half = self.config.domain.half_length;
        let n = 20;
        let stations: Vec<f64> = (0..n).map(|k| -half + (k as f64 + 0.5) * 2.0 * half / n as f64).collect();
        let recon = reconstruct_u(&bundle)?;
        let norms = recon.norms(None, &stations)?;
        self.csv("norms.csv", &norms_table(&norms))?;
        let phi = bundle.flux();
        let worst = norms.fluxes.iter().map(|&(_, q)| (q - phi).abs()).fold(0.0, f64::max);
        self.note("max_station_flux_error", worst);
        self.assert(worst <= STATION_FLUX_TOL * phi.abs().max(1.0), || {
            format!("station flux error {worst:e} exceeds {STATION_FLUX_TOL:e}·max(1, |Φ|)")
        });
        let mesh = bundle.layout.mesh.clone();
        self.vtk("mesh.vtk", |w| write_mesh_vtk(&mesh, w))?;
        self.vtk("boundary.vtk", |w| write_boundary_vtk(&mesh, w))?;
        self.vtk("solution.vtk", |w| write_solution_vtk(&bundle, w))
    }

    fn constants(&mut self) -> slipflow::error::Result<()> {
        let c = self.config;
        let geom = c.channel();
        let mesh = self.mesh()?;
        let layout = build_spaces(mesh.clone(), SpaceOptions::default())?;
        let korn = korn_constant(&layout)?;
        let poincare = poincare_constant(mesh, EndCondition::Free)?;
        let [a, b] = c.constants.window;
        let embedding = embedding_bound(&geom, a, b, c.constants.samples as usize, c.run.seed)?;
        let bogovskii = bogovskii_bound(&geom, 0.0, c.constants.bogovskii_h)?;
        let sweep = SweepOptions {
            eps_grid: vec![c.cutoffs.epsilon],
            dist_grid: vec![c.cutoffs.dist],
            samples: c.constants.samples as usize,
            window: (-2.0 * c.cutoffs.dist, 2.0 * c.cutoffs.dist),
            seed: c.run.seed,
        };
        let cert = certify_smallness(&geom, c.flow.flux, korn.korn_c, &sweep)?;
        let worst = cert.points[0].max_ratio;
        let mut report = ConstantsReport {
            m1: poincare.m1,
            m4: embedding.m4,
            m5: bogovskii.m5,
            korn_c: korn.korn_c,
            coercivity_margin: Some(0.5 * korn.korn_c - worst),
            empirical: Vec::new(),
        };
        report.push_empirical("smallness_ratio", Some(worst), "largest sampled smallness ratio at the run's cutoffs");
        report.push_empirical("korn_bracket_low", Some(korn.bracket.0), "Cholesky-certified lower end of the Korn bracket");
        report.push_empirical("korn_bracket_high", Some(korn.bracket.1), "Cholesky-certified upper end of the Korn bracket");
        self.csv("constants.csv", &constants_table(&report))?;
        for (name, v) in [("M1", report.m1), ("M4", report.m4), ("M5", report.m5), ("korn_c", report.korn_c)] {
            self.note(name, v);
        }
        self.note("apriori_constant", report.apriori_constant());
        if let Err(e) = report.validate() {
            self.failures.push(e.to_string());
        }
        Ok(())
    }

    fn decay(&mut self) -> slipflow::error::Result<()> {
        let c = self.config;
        let d = &c.decay;
        let (lo, hi) = (2.0 * c.cutoffs.dist + 1.0, c.domain.half_length - 1.0);
        if !(d.t_min >= lo && d.t_max <= hi && d.t_min < d.t_max) {
            return Err(Error::InvalidParameter(format!(
                "decay window [{}, {}] must be a nonempty part of [2𝔡 + 1, T − 1] = [{lo}, {hi}]",
                d.t_min, d.t_max
            )));
        }
        let grid = linspace(d.t_min, d.t_max, d.points as usize);
        let bundle = self.solve()?;
        let report = decay_profile(&bundle, &grid)?;
        self.csv("decay.csv", &decay_table(&report))?;
        self.note("verdict", format!("{:?}", report.verdict));
        if let Some(f) = report.fit {
            self.note("fitted_rate", f.rate);
            self.note("r_squared", f.r_squared);
        }
        self.assert(report.verdict != DecayVerdict::NotDecaying, || "y⁺ does not decay".into());
        self.assert(report.monotone, || "y⁺ is not nonincreasing".into());
        let defect = report.derivative_defect;
        self.assert(defect <= DECAY_IDENTITY_TOL, || {
            format!("derivative identity defect {defect:e} exceeds {DECAY_IDENTITY_TOL:e}")
        });
        Ok(())
    }

    fn growth(&mut self) -> slipflow::error::Result<()> {
        let g = &self.config.growth;
        let n = g.points as usize;
        let grid: Vec<f64> = (1..=n).map(|k| g.t_max * k as f64 / n as f64).collect();
        let bundle = self.solve()?;
        let report = growth_profile(&bundle, &grid)?;
        self.csv("growth.csv", &growth_table(&report))?;
        self.note("C6", report.c6);
        self.note("argmax_t", report.argmax_t);
        self.note("attained_inside", report.attained_inside);
        self.assert(report.c6.is_finite(), || "growth ratio is not finite".into());
        Ok(())
    }

    fn probe(&mut self) -> slipflow::error::Result<()> {
        let c = self.config;
        let mut starts = vec![ProbeStart::Zero, ProbeStart::ScaledCarrier(c.probe.carrier_scale)];
        for k in 0..c.probe.random_starts {
            starts.push(ProbeStart::Random { seed: c.run.seed.wrapping_add(k), relative: c.probe.relative });
        }
        let report = uniqueness_probe(&self.problem()?, &starts, &c.solve_options())?;
        self.csv("probe.csv", &probe_table(&report))?;
        self.note("verdict", report.verdict.name());
        if let Some(sv) = &report.saint_venant {
            self.note("saint_venant", sv.verdict.name());
        }
        match report.verdict {
            ProbeVerdict::Coincide => {}
            ProbeVerdict::Inconclusive => {
                let errors: Vec<String> = report.runs.iter().filter_map(|r| r.error.clone()).collect();
                self.failures.push(format!("probe inconclusive: {}", errors.join("; ")));
                self.numerical = true;
            }
            ProbeVerdict::Distinct => self.failures.push("probe runs reached distinct solutions".into()),
        }
        Ok(())
    }

    fn mms(&mut self) -> slipflow::error::Result<()> {
        let study = mms_convergence(&self.config.mms.h)?;
        self.csv("mms.csv", &mms_table(&study))?;
        let (vu, vp) = (*study.velocity_orders.last().unwrap(), *study.pressure_orders.last().unwrap());
        self.note("velocity_order", vu);
        self.note("pressure_order", vp);
        let (ev, tv) = MMS_VELOCITY_ORDER;
        let (ep, tp) = MMS_PRESSURE_ORDER;
        self.assert((vu - ev).abs() <= tv, || format!("velocity H¹ order {vu} outside {ev} ± {tv}"));
        self.assert((vp - ep).abs() <= tp, || format!("pressure L² order {vp} outside {ep} ± {tp}"));
        Ok(())
    }

    fn certify(&mut self) -> slipflow::error::Result<()> {
        let c = self.config;
        let layout = build_spaces(self.mesh()?, SpaceOptions::default())?;
        let korn = korn_constant(&layout)?;
        let sweep = SweepOptions {
            eps_grid: c.certify.epsilon.clone(),
            dist_grid: c.certify.dist.clone(),
            samples: c.certify.samples as usize,
            window: (c.certify.window[0], c.certify.window[1]),
            seed: c.run.seed,
        };
        let cert = certify_smallness(&c.channel(), c.flow.flux, korn.korn_c, &sweep)?;
        self.csv("certification.csv", &certification_table(&cert))?;
        self.note("korn_c", korn.korn_c);
        match cert.chosen {
            Some((e, d)) => {
                self.note("chosen_epsilon", e);
                self.note("chosen_dist", d);
            }
            None => self.failures.push("no grid point meets the smallness threshold".into()),
        }
        Ok(())
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// Runs `command` with outputs under `config.run.output` (or `out`).
pub fn run(command: Command, config: &RunConfig, out: Option<&Path>) -> std::io::Result<Outcome> {
    let dir = out.map_or_else(|| config.run.output.clone(), Path::to_path_buf);
    fs::create_dir_all(&dir)?;
    let mut r = Run {
        config,
        dir,
        artifacts: Vec::new(),
        failures: Vec::new(),
        summary: TomlTable::new(),
        iterations: Vec::new(),
        numerical: false,
    };
    let result = r.dispatch(command);
    let (status, messages) = match result {
        Ok(()) if r.failures.is_empty() => (Status::Pass, Vec::new()),
        Ok(()) if r.numerical => (Status::Numerical, r.failures.clone()),
        Ok(()) => (Status::Invariant, r.failures.clone()),
        Err(e) => {
            let mut m = r.failures.clone();
            m.push(e.to_string());
            (Status::of(&e), m)
        }
    };
    let config_path = r.path("config.toml");
    fs::write(&config_path, config.to_toml())?;
    let manifest_path = r.path("manifest.toml");
    fs::write(&manifest_path, manifest(command, config, status, &messages, r.summary.clone(), r.iterations.clone()))?;
    Ok(Outcome { status, messages, artifacts: r.artifacts })
}

fn manifest(
    command: Command,
    config: &RunConfig,
    status: Status,
    messages: &[String],
    summary: TomlTable,
    iterations: Vec<Value>,
) -> String {
    let mut doc = TomlTable::new();
    doc.insert("command".into(), command.name().into());
    doc.insert("status".into(), status.name().into());
    doc.insert("exit_code".into(), (status.code() as i64).into());
    doc.insert("messages".into(), Value::Array(messages.iter().map(|m| m.clone().into()).collect()));
    let mut used = TomlTable::new();
    used.insert("epsilon".into(), config.cutoffs.epsilon.into());
    used.insert("dist".into(), config.cutoffs.dist.into());
    used.insert("h".into(), config.domain.h.into());
    used.insert("T".into(), config.domain.half_length.into());
    used.insert("seed".into(), (config.run.seed as i64).into());
    used.insert("flux".into(), config.flow.flux.into());
    used.insert("epsilon_source".into(), format!("{:?}", config.cutoffs.epsilon_source).to_lowercase().into());
    used.insert("dist_source".into(), format!("{:?}", config.cutoffs.dist_source).to_lowercase().into());
    if let Some(w) = &config.cutoffs.policy_warning {
        used.insert("policy_warning".into(), w.clone().into());
    }
    doc.insert("parameters".into(), Value::Table(used));
    doc.insert("summary".into(), Value::Table(summary));
    match toml::Value::try_from(config) {
        Ok(v) => {
            doc.insert("config".into(), v);
        }
        Err(e) => {
            doc.insert("config_error".into(), e.to_string().into());
        }
    }
    if !iterations.is_empty() {
        doc.insert("iteration".into(), Value::Array(iterations));
    }
    toml::to_string(&doc).expect("manifest serializes")
}
