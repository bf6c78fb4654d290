//! Model points, installed strategies, sweeps and pulse traces.

use std::time::Instant;

use leakfree::magnus::convergence_certificate;
use leakfree::models::{mlz, stirap, transmon};
use leakfree::propagator::{interaction_picture, propagate};
use leakfree::sweep::par_map;
use leakfree::timedep::uniform_grid;
use leakfree::{LeakageProblem, Mat, TimeDepOperator};

use crate::config::{ModelKind, RunConfig, StrategyKind};

/// One fully specified model instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Point {
    StirapConst(stirap::StirapParams),
    StirapGauss(stirap::StirapParams, (f64, f64)),
    Transmon(transmon::TransmonParams),
    Mlz(mlz::MlzParams),
}

impl Point {
    /// The model of `cfg` with the swept parameter set to `value`.
    pub fn new(cfg: &RunConfig, value: f64) -> leakfree::Result<Self> {
        let get = |key: &str, default: f64| -> f64 {
            if cfg.sweep.parameter == key {
                value
            } else {
                cfg.model.get(key).copied().unwrap_or(default)
            }
        };
        let point = match cfg.run.model {
            ModelKind::StirapConst => {
                let p = stirap::StirapParams::vitanov(get("g0", 1.0), get("nu", 0.5)).with_delta_bound(get("delta_bound", stirap::DEFAULT_DELTA));
                p.validate()?;
                Point::StirapConst(p)
            }
            ModelKind::StirapGauss => {
                let nu = get("nu", 0.5);
                let mut p = stirap::StirapParams::gaussian(get("g0", 1.0), nu).with_delta_bound(get("delta_bound", stirap::DEFAULT_DELTA));
                if cfg.model.contains_key("delay_product") || cfg.sweep.parameter == "delay_product" {
                    p = p.with_delay(get("delay_product", stirap::DEFAULT_DELAY_PRODUCT) / nu);
                }
                p.validate()?;
                let bracket = (get("alpha_lo", 0.0), get("alpha_hi", 2.0));
                if !(bracket.0 < bracket.1) {
                    return Err(leakfree::Error::Param(format!("empty alpha bracket [{}, {}]", bracket.0, bracket.1)));
                }
                Point::StirapGauss(p, bracket)
            }
            ModelKind::Transmon => {
                let p = transmon::TransmonParams::new(get("kappa0", 0.1), get("anharmonicity", 1.0))
                    .with_lambda(get("lambda", 2f64.sqrt()))
                    .with_detuning(get("detuning", 0.0));
                p.validate()?;
                Point::Transmon(p)
            }
            ModelKind::Mlz => {
                let window = (get("window_lo", mlz::DEFAULT_WINDOW.0), get("window_hi", mlz::DEFAULT_WINDOW.1));
                let p = mlz::MlzParams::equal(get("eta", 0.3), get("omega", 0.1)).with_spurious_scale(get("spurious_scale", 1.0)).with_window(window);
                p.validate()?;
                Point::Mlz(p)
            }
        };
        Ok(point)
    }

    pub fn window(&self) -> (f64, f64) {
        match self {
            Point::StirapConst(p) | Point::StirapGauss(p, _) => p.window(),
            Point::Transmon(p) => p.window(),
            Point::Mlz(p) => p.window,
        }
    }

    /// The uncorrected problem whose Magnus expansion the corrections target.
    pub fn problem(&self) -> leakfree::Result<LeakageProblem> {
        match self {
            Point::StirapConst(p) | Point::StirapGauss(p, _) => stirap::build(p),
            Point::Transmon(p) => transmon::build_transmon(p),
            Point::Mlz(p) => mlz::sad_problem(p),
        }
    }

    /// ∫‖V_I‖₂ dt for the uncorrected problem.
    pub fn certificate(&self, tol: f64) -> leakfree::Result<f64> {
        let problem = self.problem()?;
        let u0 = propagate(&problem.h0, problem.window, tol)?;
        let v_int = interaction_picture(&problem.perturbation(), &u0)?;
        convergence_certificate(&v_int, problem.window)
    }

    /// Install a correction: infidelity plus the physical control
    /// Hamiltonian, or the reason it cannot be realized.
    pub fn install(&self, series: SeriesKind, drag: Option<&transmon::DragFormula>, tol: f64) -> leakfree::Result<Installed> {
        Ok(match (self, series) {
            (Point::StirapConst(p), SeriesKind::Stirap(protocol)) => {
                let w = stirap::protocol_correction(p, protocol);
                let infidelity = stirap::dark_state_infidelity(&stirap::build_constant_gap(p)?, w.as_ref(), tol)?;
                let hamiltonian = stirap::corrected_lab_pulses(p, w.as_ref()).map(|l| l.hamiltonian());
                Installed { infidelity, hamiltonian }
            }
            (Point::StirapGauss(p, bracket), SeriesKind::Gauss(order)) => {
                let w = stirap::gaussian_correction(p, order, *bracket, tol)?;
                let infidelity = stirap::dark_state_infidelity(&stirap::build_gaussian(p)?, w.as_ref(), tol)?;
                let hamiltonian = stirap::corrected_lab_pulses(p, w.as_ref()).map(|l| l.hamiltonian());
                Installed { infidelity, hamiltonian }
            }
            (Point::Transmon(p), SeriesKind::Transmon(kind)) => {
                let cs = match kind {
                    TransmonKind::Uncorrected => None,
                    TransmonKind::Ideal => Some(transmon::ideal_corrections(p)),
                    TransmonKind::Constrained => Some(transmon::constrained_corrections(p)),
                    TransmonKind::Drag => transmon::drag_baseline(p, drag),
                };
                let infidelity = transmon::gate_infidelity(p, cs.as_ref(), tol)?;
                let problem = transmon::build_transmon(p)?;
                let mut h = problem.hamiltonian();
                if let Some(cs) = cs.as_ref().filter(|cs| !cs.is_empty()) {
                    h = h.add(&cs.total(3, problem.window));
                }
                Installed { infidelity, hamiltonian: Ok(h) }
            }
            (Point::Mlz(p), SeriesKind::Mlz(protocol)) => {
                let w = mlz::protocol_correction(p, protocol, tol)?;
                let infidelity = mlz::transfer_infidelity(p, w.as_ref(), tol)?;
                let h0 = mlz::lab_hamiltonian(p);
                let hamiltonian = Ok(match w {
                    Some(w) => h0.add(&w),
                    None => h0,
                });
                Installed { infidelity, hamiltonian }
            }
            _ => return Err(leakfree::Error::Param("strategy does not belong to this model".into())),
        })
    }
}

pub struct Installed {
    pub infidelity: f64,
    pub hamiltonian: leakfree::Result<TimeDepOperator>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransmonKind {
    Uncorrected,
    Ideal,
    Constrained,
    Drag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    Stirap(stirap::Protocol),
    Gauss(stirap::GaussianOrder),
    Transmon(TransmonKind),
    Mlz(mlz::Protocol),
}

/// One output column group: a strategy as installed on a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Series {
    pub name: &'static str,
    pub kind: SeriesKind,
}

fn series_of(model: ModelKind, strategy: StrategyKind) -> Vec<Series> {
    use StrategyKind as S;
    let one = |kind| vec![Series { name: strategy.name(), kind }];
    match (model, strategy) {
        (ModelKind::StirapConst, s) => one(SeriesKind::Stirap(match s {
            S::W1 => stirap::Protocol::First,
            S::W1W2 => stirap::Protocol::FirstSecond,
            S::W2Optimal => stirap::Protocol::Optimal,
            S::Satd => stirap::Protocol::Satd,
            _ => stirap::Protocol::Uncorrected,
        })),
        (ModelKind::StirapGauss, s) => one(SeriesKind::Gauss(match s {
            S::W1 => stirap::GaussianOrder::First,
            S::W1W2 => stirap::GaussianOrder::Second,
            _ => stirap::GaussianOrder::Uncorrected,
        })),
        (ModelKind::Transmon, s) => one(SeriesKind::Transmon(match s {
            S::IdealMagnus => TransmonKind::Ideal,
            S::ConstrainedMagnus => TransmonKind::Constrained,
            S::DragBaseline => TransmonKind::Drag,
            _ => TransmonKind::Uncorrected,
        })),
        (ModelKind::Mlz, S::W1) => vec![
            Series { name: "w1", kind: SeriesKind::Mlz(mlz::Protocol::First) },
            Series { name: "w1_nosatd", kind: SeriesKind::Mlz(mlz::Protocol::FirstWithoutSatd) },
        ],
        (ModelKind::Mlz, s) => one(SeriesKind::Mlz(match s {
            S::Td => mlz::Protocol::Td,
            S::Satd => mlz::Protocol::Satd,
            S::W1W2 => mlz::Protocol::Second,
            _ => mlz::Protocol::Uncorrected,
        })),
    }
}

/// Column layout of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub model: ModelKind,
    pub parameter: String,
    pub series: Vec<Series>,
    pub channels: Vec<(usize, usize)>,
}

impl Schema {
    pub fn new(cfg: &RunConfig) -> Self {
        let model = cfg.run.model;
        let series = cfg.run.strategies.iter().flat_map(|&s| series_of(model, s)).collect();
        let channels = match model {
            ModelKind::StirapConst | ModelKind::StirapGauss => vec![(0, 1), (1, 2)],
            ModelKind::Transmon => upper_triangle(3),
            ModelKind::Mlz => upper_triangle(4),
        };
        Self { model, parameter: cfg.sweep.parameter.clone(), series, channels }
    }

    pub fn channel_name(&self, (i, j): (usize, usize)) -> String {
        match (self.model, i, j) {
            (ModelKind::StirapConst | ModelKind::StirapGauss, 0, 1) => "gp".into(),
            (ModelKind::StirapConst | ModelKind::StirapGauss, 1, 2) => "gs".into(),
            _ => format!("h{i}{j}"),
        }
    }

    /// Unit of energies and pulse amplitudes.
    pub fn energy_unit(&self) -> &'static str {
        match self.model {
            ModelKind::Mlz => "1",
            _ => "E",
        }
    }

    pub fn time_unit(&self) -> &'static str {
        match self.model {
            ModelKind::Mlz => "1",
            _ => "1/E",
        }
    }

    pub fn parameter_unit(&self) -> &'static str {
        match self.parameter.as_str() {
            "nu" | "g0" | "kappa0" | "anharmonicity" | "detuning" => self.energy_unit(),
            _ => "1",
        }
    }

    pub fn series_names(&self) -> Vec<&'static str> {
        self.series.iter().map(|s| s.name).collect()
    }
}

fn upper_triangle(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
}

/// One row of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub param: f64,
    /// "ok", or the failures of this point joined by "; ".
    pub status: String,
    pub certificate: f64,
    /// One entry per series.
    pub infidelity: Vec<f64>,
    /// Series-major, one entry per channel.
    pub amplitude: Vec<f64>,
    /// Seconds; written to the separate timing file.
    pub wall_time: f64,
}

impl SweepRecord {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

fn max_amplitudes(h: &TimeDepOperator, channels: &[(usize, usize)], window: (f64, f64), samples: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; channels.len()];
    for t in uniform_grid(window.0, window.1, samples) {
        let m = h.eval(t);
        for (a, &(i, j)) in out.iter_mut().zip(channels) {
            *a = a.max(m[(i, j)].norm());
        }
    }
    out
}

/// Evaluate every series at one grid value. Failures are recorded in the
/// status and leave NaN entries.
pub fn evaluate_point(cfg: &RunConfig, schema: &Schema, value: f64) -> SweepRecord {
    let start = Instant::now();
    let tol = cfg.tolerances.ode;
    let drag = cfg.drag_formula();
    let mut errors = Vec::new();
    let nch = schema.channels.len();
    let mut infidelity = vec![f64::NAN; schema.series.len()];
    let mut amplitude = vec![f64::NAN; schema.series.len() * nch];
    let mut certificate = f64::NAN;
    match Point::new(cfg, value) {
        Err(e) => errors.push(format!("parameters: {e}")),
        Ok(point) => {
            match point.certificate(tol) {
                Ok(c) => certificate = c,
                Err(e) => errors.push(format!("certificate: {e}")),
            }
            for (k, s) in schema.series.iter().enumerate() {
                match point.install(s.kind, drag.as_ref(), tol) {
                    Ok(inst) => {
                        infidelity[k] = inst.infidelity;
                        match inst.hamiltonian {
                            Ok(h) => {
                                let a = max_amplitudes(&h, &schema.channels, point.window(), cfg.output.amplitude_samples);
                                amplitude[k * nch..(k + 1) * nch].copy_from_slice(&a);
                            }
                            Err(e) => errors.push(format!("{} pulses: {e}", s.name)),
                        }
                    }
                    Err(e) => errors.push(format!("{}: {e}", s.name)),
                }
            }
        }
    }
    let status = if errors.is_empty() { "ok".to_string() } else { errors.join("; ").replace(['\n', '\r'], " ") };
    SweepRecord { param: value, status, certificate, infidelity, amplitude, wall_time: start.elapsed().as_secs_f64() }
}

/// All grid points in grid order, evaluated on the current rayon pool.
pub fn run_sweep(cfg: &RunConfig) -> Result<(Schema, Vec<SweepRecord>), crate::config::ConfigError> {
    let grid = cfg.grid()?;
    let schema = Schema::new(cfg);
    let records = par_map(&grid, |v| evaluate_point(cfg, &schema, v));
    Ok((schema, records))
}

/// Uniformly sampled control channels of every series at one parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseTrace {
    pub param: f64,
    pub times: Vec<f64>,
    pub columns: Vec<String>,
    /// rows[k][c] is column c at times[k].
    pub rows: Vec<Vec<f64>>,
    pub errors: Vec<String>,
}

/// Real and imaginary part of every channel for every series; a series
/// that cannot be realized contributes NaN columns and an error.
pub fn pulse_trace(cfg: &RunConfig, value: f64) -> leakfree::Result<PulseTrace> {
    let schema = Schema::new(cfg);
    let point = Point::new(cfg, value)?;
    let window = point.window();
    let times = uniform_grid(window.0, window.1, cfg.output.pulse_samples);
    let drag = cfg.drag_formula();
    let mut columns = Vec::new();
    let mut rows = vec![Vec::new(); times.len()];
    let mut errors = Vec::new();
    for s in &schema.series {
        let h = point.install(s.kind, drag.as_ref(), cfg.tolerances.ode).and_then(|inst| inst.hamiltonian);
        if let Err(e) = &h {
            errors.push(format!("{}: {e}", s.name));
        }
        for &ch in &schema.channels {
            let name = schema.channel_name(ch);
            columns.push(format!("{}_{name}_re", s.name));
            columns.push(format!("{}_{name}_im", s.name));
        }
        for (row, &t) in rows.iter_mut().zip(&times) {
            let m: Option<Mat> = h.as_ref().ok().map(|h| h.eval(t));
            for &(i, j) in &schema.channels {
                let z = m.as_ref().map(|m| m[(i, j)]);
                row.push(z.map_or(f64::NAN, |z| z.re));
                row.push(z.map_or(f64::NAN, |z| z.im));
            }
        }
    }
    Ok(PulseTrace { param: value, times, columns, rows, errors })
}
