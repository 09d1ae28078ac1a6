//! Configuration, orchestration and reporting for the convergence
//! experiment: the exact count over the growing box against the product of
//! singular integral and truncated singular series, with the classical
//! four-squares divisor formula as an independent oracle.

use serde::{Deserialize, Serialize};

use crate::counting::{self, WeightKind};
use crate::error::{Error, Result};
use crate::expsum::{factorize, ExpSumOptions};
use crate::oscillatory::{self, QuadOptions};
use crate::quadform::{diagonalize, BoxSpec, Diagonalization, QuadraticFormSpec, SmoothingParams};
use crate::singseries;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// How the target `N` is derived from the scale `P`.
#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NRule {
    Fixed { value: i64 },
    /// `N = floor(c P^2)`.
    Scaled { c: f64 },
    /// The nearest odd integer to `P^2`; odd targets keep the four-squares
    /// divisor formula in its simplest case.
    NearestOddToPSquared,
}

impl Default for NRule {
    fn default() -> Self {
        NRule::NearestOddToPSquared
    }
}

impl NRule {
    pub fn n_for(&self, p: f64) -> i64 {
        match *self {
            NRule::Fixed { value } => value,
            NRule::Scaled { c } => (c * p * p).floor() as i64,
            NRule::NearestOddToPSquared => {
                let p2 = p * p;
                let odd_below = 2.0 * ((p2 - 1.0) / 2.0).round() + 1.0;
                let candidates = [odd_below - 2.0, odd_below, odd_below + 2.0];
                let best = candidates
                    .iter()
                    .copied()
                    .min_by(|a, b| (a - p2).abs().total_cmp(&(b - p2).abs()))
                    .unwrap();
                best as i64
            }
        }
    }
}

/// Which optional columns to compute.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Checks {
    pub gaussian: bool,
    pub jacobi: bool,
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            gaussian: true,
            jacobi: true,
        }
    }
}

fn default_a() -> f64 {
    1.0
}
fn default_qmax() -> i64 {
    400
}
fn default_quad_rel_tol() -> f64 {
    1e-6
}
fn default_count_tol() -> f64 {
    1e-9
}

/// One convergence experiment. Unknown fields are rejected.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub form_file: PathBuf,
    pub box_file: PathBuf,
    /// Strictly increasing.
    pub p_values: Vec<f64>,
    #[serde(default)]
    pub n_rule: NRule,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_qmax")]
    pub qmax: i64,
    #[serde(default = "default_quad_rel_tol")]
    pub quad_rel_tol: f64,
    #[serde(default = "default_count_tol")]
    pub count_tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub checks: Checks,
    /// Wall-clock columns are off by default so that identical runs emit
    /// identical bytes.
    #[serde(default)]
    pub include_timings: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !self.p_values.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(
                "p_values must be strictly increasing".into(),
            ));
        }
        if self.qmax < 1 {
            return Err(Error::InvalidConfig(format!("qmax = {}", self.qmax)));
        }
        if !self.form_file.exists() {
            return Err(Error::InvalidConfig(format!(
                "form file {} does not exist",
                self.form_file.display()
            )));
        }
        if !self.box_file.exists() {
            return Err(Error::InvalidConfig(format!(
                "box file {} does not exist",
                self.box_file.display()
            )));
        }
        Ok(())
    }
}

/// Per-stage wall-clock in milliseconds; optional output.
#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub r_char_ms: u64,
    pub r_gauss_ms: u64,
    pub i_char_ms: u64,
    pub i_gauss_ms: u64,
    pub series_ms: u64,
}

/// One row of the experiment. Field order is the output order.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub p: f64,
    pub n: i64,
    pub r_char: Option<f64>,
    pub r_gauss: Option<f64>,
    pub i_char: Option<f64>,
    pub i_gauss: Option<f64>,
    pub s_trunc: Option<f64>,
    pub ratio_char: Option<f64>,
    pub ratio_gauss: Option<f64>,
    pub jacobi: Option<u64>,
    /// First failure of any stage; later stages of the row are skipped.
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

/// `r_4(N) = 8 sum_{d | N, 4 !| d} d`: the number of representations of `N`
/// as a sum of four squares.
pub fn jacobi_r4(n: i64) -> Result<u64> {
    if n < 1 {
        return Err(Error::OutOfRange(format!("N = {n} < 1")));
    }
    // build all divisors from the factorization
    let mut divisors: Vec<i64> = vec![1];
    for (p, a) in factorize(n) {
        let mut next = Vec::with_capacity(divisors.len() * (a as usize + 1));
        for &d in &divisors {
            let mut pk = 1i64;
            for _ in 0..=a {
                next.push(d * pk);
                pk *= p;
            }
        }
        divisors = next;
    }
    let sum: i64 = divisors.iter().filter(|&&d| d % 4 != 0).sum();
    Ok(8 * sum as u64)
}

pub fn load_form(path: &Path) -> Result<QuadraticFormSpec> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_box(path: &Path) -> Result<BoxSpec> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let raw: BoxSpec = serde_json::from_str(&text)?;
    BoxSpec::new(raw.c_star, raw.gamma_star)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let cfg: ExperimentConfig = serde_json::from_str(&text)?;
    cfg.validate()?;
    Ok(cfg)
}

fn is_four_squares(form: &QuadraticFormSpec) -> bool {
    form.n() == 4
        && form
            .mat()
            .iter()
            .enumerate()
            .all(|(i, row)| row.iter().enumerate().all(|(j, &v)| v == if i == j { 2 } else { 0 }))
}

struct Stage<'a> {
    timings: &'a mut Vec<(&'static str, u64)>,
    enabled: bool,
}

impl<'a> Stage<'a> {
    fn run<T>(&mut self, name: &'static str, f: impl FnOnce() -> T) -> T {
        let start = std::time::Instant::now();
        let out = f();
        if self.enabled {
            self.timings.push((name, start.elapsed().as_millis() as u64));
        }
        out
    }
}

fn compute_row(
    p: f64,
    config: &ExperimentConfig,
    form: &QuadraticFormSpec,
    box_spec: &BoxSpec,
    diag: &Diagonalization,
) -> ConvergenceRow {
    let n_target = config.n_rule.n_for(p);
    let mut row = ConvergenceRow {
        p,
        n: n_target,
        r_char: None,
        r_gauss: None,
        i_char: None,
        i_gauss: None,
        s_trunc: None,
        ratio_char: None,
        ratio_gauss: None,
        jacobi: None,
        error: None,
        timings: None,
    };
    let mut raw_timings = Vec::new();
    let mut stage = Stage {
        timings: &mut raw_timings,
        enabled: config.include_timings,
    };

    // the Gaussian weight is centred at the box centre
    let x0 = diag.rotate_from_star(&box_spec.c_star);
    let x0_norm = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let params = match SmoothingParams::with_x0_bound(p, config.a, x0, x0_norm + 4.0) {
        Ok(v) => v,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };

    let fail = |row: &mut ConvergenceRow, e: Error| {
        if row.error.is_none() {
            row.error = Some(e.to_string());
        }
    };

    let char_kind = WeightKind::Characteristic {
        box_spec: box_spec.clone(),
        dilation: 1.0,
    };
    match stage.run("r_char", || {
        counting::count(n_target, &char_kind, form, diag, &params, config.count_tol)
    }) {
        Ok(r) => row.r_char = Some(r.value),
        Err(e) => fail(&mut row, e),
    }

    let quad = QuadOptions {
        rel_tol: config.quad_rel_tol,
        ..Default::default()
    };
    match stage.run("i_char", || {
        oscillatory::singular_integral_char(
            n_target,
            p,
            &vec![(1.0, 1.0)],
            box_spec,
            diag,
            &quad,
        )
    }) {
        Ok(est) => row.i_char = Some(est.re),
        Err(e) => fail(&mut row, e),
    }

    match stage.run("series", || {
        singseries::singular_series(n_target, config.qmax, form, &ExpSumOptions::default())
    }) {
        Ok(est) => row.s_trunc = Some(est.value),
        Err(e) => fail(&mut row, e),
    }

    if config.checks.gaussian {
        match stage.run("r_gauss", || {
            counting::count(
                n_target,
                &WeightKind::Gaussian,
                form,
                diag,
                &params,
                config.count_tol,
            )
        }) {
            Ok(r) => row.r_gauss = Some(r.value),
            Err(e) => fail(&mut row, e),
        }
        match stage.run("i_gauss", || {
            oscillatory::singular_integral_gaussian(n_target, &params, diag, &quad)
        }) {
            Ok(est) => row.i_gauss = Some(est.re),
            Err(e) => fail(&mut row, e),
        }
    }

    if config.checks.jacobi && is_four_squares(form) && n_target >= 1 {
        match jacobi_r4(n_target) {
            Ok(v) => row.jacobi = Some(v),
            Err(e) => fail(&mut row, e),
        }
    }

    let ratio = |num: Option<f64>, int: Option<f64>, ser: Option<f64>| -> (Option<f64>, bool) {
        match (num, int, ser) {
            (Some(r), Some(i), Some(s)) => {
                let den = i * s;
                if den == 0.0 {
                    (None, true)
                } else {
                    (Some(r / den), false)
                }
            }
            _ => (None, false),
        }
    };
    let (rc, zero_c) = ratio(row.r_char, row.i_char, row.s_trunc);
    row.ratio_char = rc;
    let (rg, zero_g) = ratio(row.r_gauss, row.i_gauss, row.s_trunc);
    row.ratio_gauss = rg;
    if (zero_c || zero_g) && row.error.is_none() {
        row.error = Some("zero denominator in ratio".into());
    }

    if config.include_timings {
        let find = |name: &str| {
            raw_timings
                .iter()
                .find(|(n, _)| *n == name)
                .map(|&(_, ms)| ms)
                .unwrap_or(0)
        };
        row.timings = Some(Timings {
            r_char_ms: find("r_char"),
            r_gauss_ms: find("r_gauss"),
            i_char_ms: find("i_char"),
            i_gauss_ms: find("i_gauss"),
            series_ms: find("series"),
        });
    }
    row
}

/// Runs the experiment over all `P` values. Row order is by `P`; rows with a
/// failed stage carry the error message instead of aborting the sweep.
pub fn run_convergence(config: &ExperimentConfig, threads: usize) -> Result<Vec<ConvergenceRow>> {
    config.validate()?;
    let form = load_form(&config.form_file)?;
    let box_spec = load_box(&config.box_file)?;
    if box_spec.n() != form.n() {
        return Err(Error::DimensionMismatch {
            expected: form.n(),
            got: box_spec.n(),
        });
    }
    let diag = diagonalize(&form)?;

    let count = config.p_values.len();
    let slots: Mutex<Vec<Option<ConvergenceRow>>> = Mutex::new(vec![None; count]);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let workers = threads.clamp(1, count.max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if idx >= count {
                    break;
                }
                let row = compute_row(config.p_values[idx], config, &form, &box_spec, &diag);
                slots.lock().unwrap()[idx] = Some(row);
            });
        }
    });
    Ok(slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("all rows computed"))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    JsonLines,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(OutputFormat::JsonLines),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(Error::InvalidConfig(format!("unknown format {other}"))),
        }
    }
}

pub const CSV_HEADER: &str =
    "p,n,r_char,r_gauss,i_char,i_gauss,s_trunc,ratio_char,ratio_gauss,jacobi,error";

/// Writes the rows in a fixed field order. Values are formatted identically
/// in both formats so the two outputs agree field by field. Timings, when
/// present, appear only in the JSON form.
pub fn emit(rows: &[ConvergenceRow], format: OutputFormat, out: &mut dyn Write) -> Result<()> {
    let io_err = |source: std::io::Error| Error::Io {
        path: "<output>".into(),
        source,
    };
    match format {
        OutputFormat::JsonLines => {
            for row in rows {
                let line = serde_json::to_string(row)?;
                writeln!(out, "{line}").map_err(io_err)?;
            }
        }
        OutputFormat::Csv => {
            writeln!(out, "{CSV_HEADER}").map_err(io_err)?;
            let num = |v: Option<f64>| v.map(|x| json_num(x)).unwrap_or_default();
            for row in rows {
                let error = row
                    .error
                    .as_deref()
                    .map(|e| format!("\"{}\"", e.replace('"', "\"\"")))
                    .unwrap_or_default();
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    json_num(row.p),
                    row.n,
                    num(row.r_char),
                    num(row.r_gauss),
                    num(row.i_char),
                    num(row.i_gauss),
                    num(row.s_trunc),
                    num(row.ratio_char),
                    num(row.ratio_gauss),
                    row.jacobi.map(|j| j.to_string()).unwrap_or_default(),
                    error
                )
                .map_err(io_err)?;
            }
        }
    }
    Ok(())
}

/// Formats a float exactly as serde_json does, so CSV and JSON agree byte
/// for byte on every value.
fn json_num(v: f64) -> String {
    serde_json::to_string(&v).expect("finite float")
}
