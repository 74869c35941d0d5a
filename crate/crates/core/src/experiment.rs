//! Batch experiments: configuration, the per-subcommand CSV tables, the
//! verification suite and slope regression.
//!
//! Cells are computed in parallel and collected in `(field, x, Q)` order. A
//! cell that fails keeps its row with the `error` column filled in.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::arith::euler_phi;
use crate::dirichlet_constants::{
    constant_set, default_fit_grid, dirichlet_partial_sum, dirichlet_product, euler_h,
    fit_lemma_constants, laurent_constants, leading_constant_c1, ConstantSet, PhiKSums,
};
use crate::error::{Error, Result};
use crate::field_catalog::FieldSpec;
use crate::galois_image::{base_data, phi_k_by_formula, BaseData, GqGenerator};
use crate::ideal_stream::equal_norm_square_sum;
use crate::regression::{fit_line, LineFit};
use crate::sieve::primes_up_to;
use crate::variance_engine::{brute_force_theta, geometric_grid, predicted_range, VarianceEngine};
use crate::zeta::zeta;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subcommand {
    FieldInfo,
    Phik,
    Constants,
    Variance,
    Verify,
    Regress,
}

impl Subcommand {
    pub fn as_str(&self) -> &'static str {
        match self {
            Subcommand::FieldInfo => "field-info",
            Subcommand::Phik => "phik",
            Subcommand::Constants => "constants",
            Subcommand::Variance => "variance",
            Subcommand::Verify => "verify",
            Subcommand::Regress => "regress",
        }
    }
}

impl FromStr for Subcommand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "field-info" => Subcommand::FieldInfo,
            "phik" => Subcommand::Phik,
            "constants" => Subcommand::Constants,
            "variance" => Subcommand::Variance,
            "verify" => Subcommand::Verify,
            "regress" => Subcommand::Regress,
            _ => return Err(Error::Config(format!("unknown subcommand `{s}`"))),
        })
    }
}

/// Which `Q` values a variance run visits. Every rule yields `S(x; 0, Q)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QGrid {
    /// `{x/2^k, ..., x/2, x}`.
    Geometric(u32),
    Explicit(Vec<u64>),
    /// `Q = x` only.
    Full,
}

impl QGrid {
    pub fn moduli(&self, x: u64) -> Vec<u64> {
        match self {
            QGrid::Geometric(k) => geometric_grid(x, *k),
            QGrid::Explicit(list) => list.clone(),
            QGrid::Full => vec![x],
        }
    }
}

impl FromStr for QGrid {
    type Err = Error;

    /// `geometric:k`, `full` or `list:a,b,c`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "full" {
            return Ok(QGrid::Full);
        }
        if let Some(k) = s.strip_prefix("geometric:") {
            let k = k
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad geometric depth in `{s}`")))?;
            return Ok(QGrid::Geometric(k));
        }
        if let Some(list) = s.strip_prefix("list:") {
            return Ok(QGrid::Explicit(parse_u64_list(list)?));
        }
        Err(Error::Config(format!("unknown Q grid `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Budget {
    Quick,
    Full,
}

impl FromStr for Budget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "quick" => Ok(Budget::Quick),
            "full" => Ok(Budget::Full),
            other => Err(Error::Config(format!("unknown budget `{other}`"))),
        }
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Budget::Quick => "quick",
            Budget::Full => "full",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub subcommand: Subcommand,
    pub fields: Vec<String>,
    pub xs: Vec<u64>,
    pub q_grid: QGrid,
    pub q_max: u64,
    /// `x` values for the constant fits.
    pub fit_xs: Vec<u64>,
    pub budget: Budget,
    pub threads: usize,
    pub output: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub sequential: bool,
    pub gnuplot: bool,
    /// Also report the `H` and `J` parts in variance rows.
    pub with_hj: bool,
}

impl ExperimentConfig {
    pub fn new(subcommand: Subcommand) -> Self {
        Self {
            subcommand,
            fields: Vec::new(),
            xs: Vec::new(),
            q_grid: QGrid::Full,
            q_max: 100,
            fit_xs: default_fit_grid(),
            budget: Budget::Quick,
            threads: 1,
            output: None,
            input: None,
            sequential: false,
            gnuplot: false,
            with_hj: false,
        }
    }

    /// Reads `key = value` lines; `#` starts a comment. `field` may repeat.
    pub fn from_config_text(text: &str) -> Result<Self> {
        let mut subcommand = None;
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "subcommand" || key == "command" {
                subcommand = Some(value.parse()?);
            } else {
                pairs.push((key.to_string(), value.to_string()));
            }
        }
        let subcommand = subcommand.ok_or_else(|| Error::Config("missing `subcommand`".into()))?;
        let mut config = Self::new(subcommand);
        for (key, value) in pairs {
            config.set(&key, &value)?;
        }
        Ok(config)
    }

    pub fn from_config_file(path: &Path) -> Result<Self> {
        Self::from_config_text(&fs::read_to_string(path)?)
    }

    /// Applies one setting. `field` appends; every other key replaces.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "field" => self.fields.push(value.to_string()),
            "fields" => self.fields = value.split_whitespace().map(String::from).collect(),
            "x" | "xs" if self.subcommand == Subcommand::Constants => {
                self.fit_xs = parse_u64_list(value)?
            }
            "x" | "xs" => self.xs = parse_u64_list(value)?,
            "fit_xs" => self.fit_xs = parse_u64_list(value)?,
            "q_grid" => self.q_grid = value.parse()?,
            "q_max" => self.q_max = parse_num(key, value)?,
            "budget" => self.budget = value.parse()?,
            "threads" => self.threads = parse_num(key, value)?,
            "out" | "output" => self.output = Some(PathBuf::from(value)),
            "in" | "input" => self.input = Some(PathBuf::from(value)),
            "sequential" => self.sequential = parse_bool(key, value)?,
            "gnuplot" => self.gnuplot = parse_bool(key, value)?,
            "hj" | "with_hj" => self.with_hj = parse_bool(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.subcommand != Subcommand::Regress && self.fields.is_empty() {
            return Err(Error::Config("at least one field is required".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        match self.subcommand {
            Subcommand::Phik if self.q_max == 0 => {
                return Err(Error::Config("q_max must be positive".into()))
            }
            Subcommand::Variance => {
                if self.xs.is_empty() {
                    return Err(Error::Config("variance needs at least one x".into()));
                }
                if let Some(&x) = self.xs.iter().find(|&&x| x < 2) {
                    return Err(Error::Config(format!("x must be at least 2, got {x}")));
                }
                let min_x = *self.xs.iter().min().unwrap();
                if let QGrid::Explicit(list) = &self.q_grid {
                    if list.is_empty() {
                        return Err(Error::Config("empty Q list".into()));
                    }
                    if let Some(&q) = list.iter().find(|&&q| q == 0 || q > min_x) {
                        return Err(Error::Config(format!(
                            "Q = {q} is outside [1, min x = {min_x}]"
                        )));
                    }
                }
            }
            Subcommand::Regress if self.input.is_none() => {
                return Err(Error::Config("regress needs an input CSV".into()))
            }
            _ => {}
        }
        if self.gnuplot {
            if !matches!(self.subcommand, Subcommand::Phik | Subcommand::Variance) {
                return Err(Error::Config(
                    "--gnuplot applies to phik and variance only".into(),
                ));
            }
            if self.output.is_none() {
                return Err(Error::Config("--gnuplot needs --out".into()));
            }
        }
        Ok(())
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean `{value}` for `{key}`"))),
    }
}

/// Comma-separated integers; accepts `1e5` style powers of ten.
pub fn parse_u64_list(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<u64>()
                .ok()
                .or_else(|| {
                    let v: f64 = t.parse().ok()?;
                    (v >= 0.0 && v.fract() == 0.0 && v < 1.8e19).then_some(v as u64)
                })
                .ok_or_else(|| Error::Config(format!("bad integer `{t}`")))
        })
        .collect()
}

/// A CSV table: a header and schema-complete rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        assert_eq!(
            row.len(),
            self.header.len(),
            "row does not match the schema"
        );
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|&h| h == name)
    }

    /// The cell at `row` under column `name`.
    pub fn cell(&self, row: usize, name: &str) -> Option<&str> {
        Some(self.rows.get(row)?[self.column(name)?].as_str())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so the path holds either the old content or the complete new content.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn num(v: f64) -> String {
    if v != 0.0 && v.is_finite() && !(1e-4..1e15).contains(&v.abs()) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn blank_row(n: usize, field: &str, err: &Error) -> Vec<String> {
    let mut row = vec![String::new(); n];
    row[0] = field.to_string();
    row[n - 1] = err.to_string();
    row
}

fn load(descriptor: &str) -> Result<(FieldSpec, BaseData)> {
    let field: FieldSpec = descriptor.parse()?;
    let base = base_data(&field)?;
    Ok((field, base))
}

/// Runs the configured subcommand and returns its table; writes the CSV (and
/// the gnuplot view) when an output path is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Table> {
    config.validate()?;
    let table = match config.subcommand {
        Subcommand::FieldInfo => field_info_table(config),
        Subcommand::Phik => phik_table(config),
        Subcommand::Constants => constants_table(config),
        Subcommand::Variance => variance_table(config),
        Subcommand::Verify => verify_table(config),
        Subcommand::Regress => {
            let input = fs::read(config.input.as_ref().unwrap())?;
            regress_table(&read_variance_rows(&input)?)
        }
    };
    if let Some(path) = &config.output {
        write_atomic(path, &table.to_csv()?)?;
        if config.gnuplot {
            write_atomic(
                &gnuplot_path(path),
                gnuplot_view(config.subcommand, &table).as_bytes(),
            )?;
        }
    }
    Ok(table)
}

/// `<out>.dat`.
pub fn gnuplot_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".dat");
    PathBuf::from(s)
}

/// Whitespace-separated two-column rows: `q phi_K` for phik, `log Q`
/// against `S / (x Q)` for variance. Failed rows are dropped; fields and
/// `x` values are separated by blank lines.
pub fn gnuplot_view(subcommand: Subcommand, table: &Table) -> String {
    let mut out = String::new();
    let mut last_key = None;
    for (i, row) in table.rows.iter().enumerate() {
        if !table.cell(i, "error").unwrap_or("").is_empty() {
            continue;
        }
        let key = match subcommand {
            Subcommand::Variance => format!("{} x={}", row[0], table.cell(i, "x").unwrap()),
            _ => row[0].clone(),
        };
        if last_key.as_ref() != Some(&key) {
            if last_key.is_some() {
                out.push_str("\n\n");
            }
            out.push_str(&format!("# {key}\n"));
            last_key = Some(key);
        }
        let line = match subcommand {
            Subcommand::Variance => {
                let x: f64 = table.cell(i, "x").unwrap().parse().unwrap();
                let q: f64 = table.cell(i, "Q2").unwrap().parse().unwrap();
                let s: f64 = table.cell(i, "S").unwrap().parse().unwrap();
                format!("{} {}\n", q.ln(), s / (x * q))
            }
            _ => format!(
                "{} {}\n",
                table.cell(i, "q").unwrap(),
                table.cell(i, "phi_K").unwrap()
            ),
        };
        out.push_str(&line);
    }
    out
}

pub const FIELD_INFO_HEADER: [&str; 9] = [
    "field",
    "degree",
    "m_K",
    "ramified",
    "abelian",
    "phi_m_K",
    "phi_K_m_K",
    "ratio_mK",
    "error",
];

fn field_info_table(config: &ExperimentConfig) -> Table {
    let mut table = Table::new(&FIELD_INFO_HEADER);
    let rows: Vec<Vec<String>> = config
        .fields
        .par_iter()
        .map(|desc| match load(desc) {
            Ok((field, base)) => {
                let ramified: Vec<String> =
                    field.ramified_primes().iter().map(u64::to_string).collect();
                vec![
                    field.to_string(),
                    field.degree().to_string(),
                    field.m_k().to_string(),
                    ramified.join(" "),
                    field.is_abelian().to_string(),
                    euler_phi(field.m_k()).to_string(),
                    base.phi_k_m().to_string(),
                    base.ratio_mk().to_string(),
                    String::new(),
                ]
            }
            Err(e) => blank_row(FIELD_INFO_HEADER.len(), desc, &e),
        })
        .collect();
    rows.into_iter().for_each(|r| table.push(r));
    table
}

pub const PHIK_HEADER: [&str; 8] = [
    "field",
    "q",
    "phi",
    "phi_K",
    "index",
    "method_agree",
    "generation",
    "error",
];

fn phik_table(config: &ExperimentConfig) -> Table {
    let mut table = Table::new(&PHIK_HEADER);
    let blocks: Vec<Vec<Vec<String>>> = config
        .fields
        .par_iter()
        .map(|desc| {
            let (field, base) = match load(desc) {
                Ok(v) => v,
                Err(e) => return vec![blank_row(PHIK_HEADER.len(), desc, &e)],
            };
            let name = field.to_string();
            let mut generator = GqGenerator::new(&field);
            (1..=config.q_max)
                .map(|q| {
                    let phi = euler_phi(q);
                    let phi_k = base.phi_k(q);
                    let mut row = vec![
                        name.clone(),
                        q.to_string(),
                        phi.to_string(),
                        phi_k.to_string(),
                        (phi / phi_k).to_string(),
                        String::new(),
                        String::new(),
                        String::new(),
                    ];
                    let agree = generator.generate(q).and_then(|g| {
                        let agree = g.phi_k() == phi_k && phi_k_by_formula(&base, q)? == phi_k;
                        Ok((agree, g))
                    });
                    match agree {
                        Ok((a, g)) => {
                            row[5] = a.to_string();
                            // only a full group is certain; otherwise the stopping rule decided
                            row[6] = if g.phi_k() == phi {
                                "complete"
                            } else if g.hit_cap() {
                                "capped"
                            } else {
                                "stabilized"
                            }
                            .to_string();
                        }
                        Err(e) => row[7] = e.to_string(),
                    }
                    row
                })
                .collect()
        })
        .collect();
    blocks.into_iter().flatten().for_each(|r| table.push(r));
    table
}

pub const CONSTANTS_HEADER: [&str; 15] = [
    "field", "c1", "c2", "c3", "c4", "C1", "C2", "ratio_mK", "h1", "c2_err", "c3_err", "c4_err",
    "C2_err", "flagged", "error",
];

fn constants_table(config: &ExperimentConfig) -> Table {
    let mut table = Table::new(&CONSTANTS_HEADER);
    let rows: Vec<Vec<String>> = config
        .fields
        .par_iter()
        .map(|desc| {
            let set =
                load(desc).and_then(|(field, base)| constant_set(&field, &base, &config.fit_xs));
            match set {
                Ok(c) => vec![
                    c.field.clone(),
                    num(c.c1.value),
                    num(c.c2.value),
                    num(c.c3.value),
                    num(c.c4.value),
                    num(c.big_c1.value),
                    num(c.big_c2.value),
                    c.ratio_mk.to_string(),
                    num(c.h1),
                    num(c.c2.uncertainty),
                    num(c.c3.uncertainty),
                    num(c.c4.uncertainty),
                    num(c.big_c2.uncertainty),
                    c.fit_flagged.to_string(),
                    String::new(),
                ],
                Err(e) => blank_row(CONSTANTS_HEADER.len(), desc, &e),
            }
        })
        .collect();
    rows.into_iter().for_each(|r| table.push(r));
    table
}

pub const VARIANCE_HEADER: [&str; 12] = [
    "field",
    "x",
    "Q1",
    "Q2",
    "S",
    "H_opt",
    "J_opt",
    "predicted_S",
    "form",
    "residual",
    "runtime_s",
    "error",
];

fn variance_table(config: &ExperimentConfig) -> Table {
    let mut table = Table::new(&VARIANCE_HEADER);
    let cells: Vec<(usize, u64)> = (0..config.fields.len())
        .flat_map(|f| config.xs.iter().map(move |&x| (f, x)))
        .collect();
    let blocks: Vec<Vec<Vec<String>>> = cells
        .par_iter()
        .map(|&(f, x)| variance_cell(config, &config.fields[f], x))
        .collect();
    blocks.into_iter().flatten().for_each(|r| table.push(r));
    table
}

fn variance_cell(config: &ExperimentConfig, desc: &str, x: u64) -> Vec<Vec<String>> {
    let n = VARIANCE_HEADER.len();
    let grid = config.q_grid.moduli(x);
    let failed = |e: &Error| {
        let mut row = blank_row(n, desc, e);
        row[1] = x.to_string();
        row
    };
    let setup = load(desc).and_then(|(field, base)| {
        let constants = ConstantSet::closed_form(&field, &base)?;
        Ok((field, base, constants))
    });
    let (field, base, constants) = match setup {
        Ok(v) => v,
        Err(e) => return vec![failed(&e)],
    };
    let engine = match VarianceEngine::new(&field, &base, x) {
        Ok(e) => e,
        Err(e) => return vec![failed(&e)],
    };
    let name = field.to_string();
    grid.iter()
        .map(|&q| {
            let start = Instant::now();
            match engine.report(0, q, &constants, config.with_hj) {
                Ok(r) => {
                    let runtime = if config.sequential {
                        String::new()
                    } else {
                        format!("{:.3}", start.elapsed().as_secs_f64())
                    };
                    vec![
                        name.clone(),
                        x.to_string(),
                        r.q1.to_string(),
                        r.q2.to_string(),
                        num(r.s),
                        opt_num(r.h),
                        opt_num(r.j),
                        num(r.predicted_s),
                        r.predicted_form.as_str().to_string(),
                        num(r.residual),
                        runtime,
                        String::new(),
                    ]
                }
                Err(e) => {
                    let mut row = failed(&e);
                    row[0] = name.clone();
                    row[3] = q.to_string();
                    if let Ok(p) = predicted_range(&field, x, 0, q, &constants) {
                        row[7] = num(p.value);
                        row[8] = p.form.as_str().to_string();
                    }
                    row
                }
            }
        })
        .collect()
}

/// One successful variance row, as read back from CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceRow {
    pub field: String,
    pub x: u64,
    pub q1: u64,
    pub q2: u64,
    pub s: f64,
}

/// Parses a variance CSV, keeping rows with an empty `error` cell.
pub fn read_variance_rows(bytes: &[u8]) -> Result<Vec<VarianceRow>> {
    let mut reader = csv::Reader::from_reader(bytes);
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("input CSV has no `{name}` column")))
    };
    let (cf, cx, cq1, cq2, cs) = (col("field")?, col("x")?, col("Q1")?, col("Q2")?, col("S")?);
    let ce = headers.iter().position(|h| h == "error");
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        if ce.is_some_and(|c| !record[c].is_empty()) {
            continue;
        }
        let bad = |c: usize| Error::Config(format!("bad number `{}` in input CSV", &record[c]));
        rows.push(VarianceRow {
            field: record[cf].to_string(),
            x: record[cx].parse().map_err(|_| bad(cx))?,
            q1: record[cq1].parse().map_err(|_| bad(cq1))?,
            q2: record[cq2].parse().map_err(|_| bad(cq2))?,
            s: record[cs].parse().map_err(|_| bad(cs))?,
        });
    }
    Ok(rows)
}

/// Least squares of `S / (x Q)` against `log Q` over rows with `Q1 = 0`
/// sharing one field and `x`. The slope estimates `[K:Q]`, the intercept
/// `C2`.
pub fn regress_slope(rows: &[VarianceRow]) -> Result<LineFit> {
    let first = rows.first().ok_or_else(|| Error::Fit("no rows".into()))?;
    if rows
        .iter()
        .any(|r| r.field != first.field || r.x != first.x)
    {
        return Err(Error::Fit("rows mix fields or x values".into()));
    }
    if rows.iter().any(|r| r.q1 != 0 || r.q2 == 0) {
        return Err(Error::Fit("rows must have Q1 = 0 and Q2 > 0".into()));
    }
    let mut qs: Vec<u64> = rows.iter().map(|r| r.q2).collect();
    qs.sort_unstable();
    qs.dedup();
    if qs.len() != rows.len() {
        return Err(Error::Fit("repeated Q values".into()));
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.q2 as f64).ln()).collect();
    let ys: Vec<f64> = rows
        .iter()
        .map(|r| r.s / (r.x as f64 * r.q2 as f64))
        .collect();
    fit_line(&xs, &ys, 4)
}

pub const REGRESS_HEADER: [&str; 10] = [
    "field",
    "x",
    "points",
    "slope",
    "intercept",
    "r2",
    "slope_err",
    "intercept_err",
    "degree",
    "error",
];

/// One row per `(field, x)` group, in order of first appearance.
pub fn regress_table(rows: &[VarianceRow]) -> Table {
    let mut table = Table::new(&REGRESS_HEADER);
    let mut order: Vec<(String, u64)> = Vec::new();
    let mut groups: BTreeMap<(String, u64), Vec<VarianceRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.q1 == 0) {
        let key = (r.field.clone(), r.x);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r.clone());
    }
    for key in order {
        let group = &groups[&key];
        let degree = key
            .0
            .parse::<FieldSpec>()
            .map(|f| f.degree().to_string())
            .unwrap_or_default();
        let mut row = vec![String::new(); REGRESS_HEADER.len()];
        row[0] = key.0.clone();
        row[1] = key.1.to_string();
        row[2] = group.len().to_string();
        row[8] = degree;
        match regress_slope(group) {
            Ok(fit) => {
                row[3] = num(fit.slope);
                row[4] = num(fit.intercept);
                row[5] = num(fit.r2);
                row[6] = num(fit.slope_err);
                row[7] = num(fit.intercept_err);
            }
            Err(e) => row[9] = e.to_string(),
        }
        table.push(row);
    }
    table
}

/// Outcome of one verification check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub check: &'static str,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    /// `None` when the check does not apply to the field.
    pub pass: Option<bool>,
    pub detail: String,
}

impl CheckResult {
    fn within(
        check: &'static str,
        measured: f64,
        expected: f64,
        tolerance: f64,
        detail: String,
    ) -> Self {
        Self {
            check,
            measured,
            expected,
            tolerance,
            pass: Some((measured - expected).abs() <= tolerance),
            detail,
        }
    }

    fn skipped(check: &'static str, detail: &str) -> Self {
        Self {
            check,
            measured: f64::NAN,
            expected: f64::NAN,
            tolerance: f64::NAN,
            pass: None,
            detail: detail.to_string(),
        }
    }

    fn failed(check: &'static str, e: &Error) -> Self {
        Self {
            pass: Some(false),
            ..Self::skipped(check, &e.to_string())
        }
    }
}

/// Scales used by [`verify_suite`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SuiteScale {
    pub splitting_p_max: u64,
    pub q_max: u64,
    pub dirichlet_n: usize,
    pub lemma3_x: u64,
    pub lemma3_tolerance_ppm: u64,
    pub id_x: u64,
}

impl SuiteScale {
    pub fn for_budget(budget: Budget) -> Self {
        match budget {
            Budget::Quick => Self {
                splitting_p_max: 10_000,
                q_max: 500,
                dirichlet_n: 10_000,
                lemma3_x: 10_000,
                lemma3_tolerance_ppm: 50_000,
                id_x: 10_000,
            },
            Budget::Full => Self {
                splitting_p_max: 1_000_000,
                q_max: 2000,
                dirichlet_n: 100_000,
                lemma3_x: 1_000_000,
                lemma3_tolerance_ppm: 20_000,
                id_x: 100_000,
            },
        }
    }
}

/// `x` and largest modulus of the `theta^2` split and oracle checks.
pub const SPLIT_X: u64 = 3000;
pub const SPLIT_Q_MAX: u64 = 50;

/// Every check on one field, in a fixed order. Failures are entries, not
/// errors.
pub fn verify_suite(field: &FieldSpec, budget: Budget) -> Vec<CheckResult> {
    let scale = SuiteScale::for_budget(budget);
    let mut out = vec![check_splitting(field, scale.splitting_p_max)];
    let base = match base_data(field) {
        Ok(b) => b,
        Err(e) => {
            out.push(CheckResult::failed("base_data", &e));
            return out;
        }
    };
    out.push(check_dual_phi_k(field, &base, scale.q_max));
    out.extend(check_conductor_powers(field, &base));
    out.push(check_h1());
    out.extend(check_dk_factorization(&base, scale.dirichlet_n));
    out.push(check_lemma3(
        field,
        scale.lemma3_x,
        scale.lemma3_tolerance_ppm as f64 * 1e-6,
    ));
    out.extend(check_lemma2(&base, scale.id_x));
    out.extend(check_split_and_oracle(field, &base));
    out.push(check_abelian_ratio(field, &base));
    out
}

fn check_splitting(field: &FieldSpec, p_max: u64) -> CheckResult {
    let degree = field.degree();
    let mut bad = 0u64;
    let mut first = None;
    for p in primes_up_to(p_max) {
        let ok = match field.splitting(p) {
            Ok(s) => s.e * s.f * s.g == degree && (s.e > 1) == field.ramified_primes().contains(&p),
            Err(_) => false,
        };
        if !ok {
            bad += 1;
            first.get_or_insert(p);
        }
    }
    let detail = match first {
        Some(p) => format!("first failure at p = {p}"),
        None => format!("p <= {p_max}"),
    };
    CheckResult::within("splitting_efg", bad as f64, 0.0, 0.0, detail)
}

fn check_dual_phi_k(field: &FieldSpec, base: &BaseData, q_max: u64) -> CheckResult {
    let mut generator = GqGenerator::new(field);
    let mut bad = 0u64;
    let mut first = None;
    for q in 1..=q_max {
        let generated = generator.generate(q).map(|r| r.phi_k());
        let formula = phi_k_by_formula(base, q);
        let ok = matches!((generated, formula), (Ok(a), Ok(b)) if a == b);
        if !ok {
            bad += 1;
            first.get_or_insert(q);
        }
    }
    let detail = match first {
        Some(q) => format!("first mismatch at q = {q}"),
        None => format!("q <= {q_max}"),
    };
    CheckResult::within("phi_k_dual_method", bad as f64, 0.0, 0.0, detail)
}

/// `phi_K(l^(b+k)) = l^k phi_K(l^b)` for `k <= 2` and `phi_K(l^j) = phi_K(l)`
/// for `1 <= j <= b`, all by generation.
fn check_conductor_powers(field: &FieldSpec, base: &BaseData) -> Vec<CheckResult> {
    if base.locals().is_empty() {
        return vec![
            CheckResult::skipped("exp_larger_than_b", "m_K = 1"),
            CheckResult::skipped("exp_smaller_than_b", "m_K = 1"),
        ];
    }
    let mut generator = GqGenerator::new(field);
    let mut larger = (0u64, 0u64);
    let mut smaller = (0u64, 0u64);
    let mut error = None;
    for (&l, local) in base.locals() {
        let mut phi = |q: u64| match generator.generate(q) {
            Ok(r) => Some(r.phi_k()),
            Err(e) => {
                error.get_or_insert(e);
                None
            }
        };
        let at_b = phi(l.pow(local.b));
        for k in 0..=2u32 {
            larger.1 += 1;
            if at_b.is_none() || phi(l.pow(local.b + k)) != at_b.map(|v| v * l.pow(k)) {
                larger.0 += 1;
            }
        }
        let at_l = phi(l);
        for j in 1..=local.b {
            smaller.1 += 1;
            if at_l.is_none() || phi(l.pow(j)) != at_l {
                smaller.0 += 1;
            }
        }
    }
    let detail = |cases: u64| match &error {
        Some(e) => e.to_string(),
        None => format!("{cases} cases"),
    };
    vec![
        CheckResult::within(
            "exp_larger_than_b",
            larger.0 as f64,
            0.0,
            0.0,
            detail(larger.1),
        ),
        CheckResult::within(
            "exp_smaller_than_b",
            smaller.0 as f64,
            0.0,
            0.0,
            detail(smaller.1),
        ),
    ]
}

fn check_h1() -> CheckResult {
    match euler_h(1.0) {
        Ok(h) => CheckResult::within(
            "h1_identity",
            h * zeta(6.0) / zeta(3.0),
            1.0,
            1e-8,
            "h(1) zeta(6)/zeta(3)".into(),
        ),
        Err(e) => CheckResult::failed("h1_identity", &e),
    }
}

/// Partial sum of `D_K(5/2)` to `n` against the factored product, with
/// tolerance `2 n^(-3/2)`, and the same gap against the tail estimate
/// `(2/3) c1 n^(-3/2)`.
fn check_dk_factorization(base: &BaseData, n: usize) -> Vec<CheckResult> {
    let s = 2.5;
    let product = match dirichlet_product(base, s) {
        Ok(v) => v,
        Err(e) => return vec![CheckResult::failed("dk_factorization", &e)],
    };
    let gap = product - dirichlet_partial_sum(base, s, n);
    let nf = n as f64;
    let tail = 2.0 / 3.0 * leading_constant_c1(base) * nf.powf(-1.5);
    vec![
        CheckResult::within(
            "dk_factorization",
            gap,
            0.0,
            2.0 * nf.powf(-1.5),
            format!("s = 2.5, N = {n}"),
        ),
        CheckResult::within(
            "dk_tail_ratio",
            gap / tail,
            1.0,
            0.01,
            format!("tail estimate {tail:e}"),
        ),
    ]
}

fn check_lemma3(field: &FieldSpec, x: u64, tolerance: f64) -> CheckResult {
    let xf = x as f64;
    let measured = equal_norm_square_sum(field, x) / (field.degree() as f64 * (xf * xf.ln() - xf));
    CheckResult::within(
        "lemma3_ratio",
        measured,
        1.0,
        tolerance,
        format!("x = {x}, degree {}", field.degree()),
    )
}

/// The `id2` increment against `c1`, and fitted `c2, c3, c4` against their
/// closed forms.
fn check_lemma2(base: &BaseData, x: u64) -> Vec<CheckResult> {
    let c1 = leading_constant_c1(base);
    let sums = PhiKSums::new(base, 2 * x);
    let increment = (sums.id2(2 * x) - sums.id2(x)) / 2f64.ln();
    let mut out = vec![CheckResult::within(
        "id2_increment",
        increment,
        c1,
        1e-3,
        format!("x = {x}"),
    )];
    let grid: Vec<u64> = default_fit_grid().into_iter().filter(|&g| g <= x).collect();
    let (fit, laurent) =
        match fit_lemma_constants(base, &grid).and_then(|f| Ok((f, laurent_constants(base)?))) {
            Ok(v) => v,
            Err(e) => {
                out.push(CheckResult::failed("id1_id2_fit", &e));
                return out;
            }
        };
    let detail = format!("{} points up to {x}", grid.len());
    for (name, fitted, closed) in [
        ("id1_fit_c2", fit.c2, laurent.c2),
        ("id1_fit_c3", fit.c3, laurent.c3),
        ("id2_fit_c4", fit.c4, laurent.c4),
    ] {
        let tolerance = (3.0 * fitted.uncertainty).max(0.01 * closed.abs().max(1.0));
        out.push(CheckResult::within(
            name,
            fitted.value,
            closed,
            tolerance,
            detail.clone(),
        ));
    }
    out
}

/// For `x = 3000` and `q <= 50`: `sum theta^2 = H + J` per modulus, and
/// `theta_table` against the brute-force double loop.
fn check_split_and_oracle(field: &FieldSpec, base: &BaseData) -> Vec<CheckResult> {
    let engine = match VarianceEngine::new(field, base, SPLIT_X) {
        Ok(e) => e,
        Err(e) => {
            return vec![
                CheckResult::failed("theta_squared_split", &e),
                CheckResult::failed("brute_force_oracle", &e),
            ]
        }
    };
    let mut split_err = 0.0f64;
    let mut oracle_err = 0.0f64;
    let mut failure = None;
    for q in 1..=SPLIT_Q_MAX {
        let result = (|| -> Result<()> {
            let table = engine.theta_table(q)?;
            let (h, j) = engine.hj_for_modulus(q)?;
            let sq = table.sum_of_squares();
            split_err = split_err.max((sq - h - j).abs() / sq.max(f64::MIN_POSITIVE));
            let naive = brute_force_theta(field, base, SPLIT_X, q)?;
            if naive.len() != table.values.len() {
                oracle_err = f64::INFINITY;
            }
            for (a, v) in naive {
                let got = table.get(a).unwrap_or(f64::NAN);
                let rel = (got - v).abs() / v.abs().max(1.0);
                oracle_err = if rel.is_nan() {
                    f64::INFINITY
                } else {
                    oracle_err.max(rel)
                };
            }
            Ok(())
        })();
        if let Err(e) = result {
            failure.get_or_insert(e);
        }
    }
    if let Some(e) = failure {
        return vec![
            CheckResult::failed("theta_squared_split", &e),
            CheckResult::failed("brute_force_oracle", &e),
        ];
    }
    let detail = format!("x = {SPLIT_X}, q <= {SPLIT_Q_MAX}");
    vec![
        CheckResult::within("theta_squared_split", split_err, 0.0, 1e-9, detail.clone()),
        CheckResult::within("brute_force_oracle", oracle_err, 0.0, 1e-9, detail),
    ]
}

fn check_abelian_ratio(field: &FieldSpec, base: &BaseData) -> CheckResult {
    if !field.is_abelian() {
        return CheckResult::skipped("abelian_ratio", "not abelian");
    }
    let ratio = euler_phi(base.m_k()) as f64 / base.phi_k_m() as f64;
    CheckResult::within(
        "abelian_ratio",
        ratio,
        field.degree() as f64,
        0.0,
        format!("m_K = {}", base.m_k()),
    )
}

pub const VERIFY_HEADER: [&str; 8] = [
    "field",
    "check",
    "measured",
    "expected",
    "tolerance",
    "pass",
    "detail",
    "error",
];

fn verify_table(config: &ExperimentConfig) -> Table {
    let mut table = Table::new(&VERIFY_HEADER);
    let blocks: Vec<Vec<Vec<String>>> = config
        .fields
        .par_iter()
        .map(|desc| {
            let field: FieldSpec = match desc.parse() {
                Ok(f) => f,
                Err(e) => return vec![blank_row(VERIFY_HEADER.len(), desc, &e)],
            };
            let name = field.to_string();
            verify_suite(&field, config.budget)
                .into_iter()
                .map(|c| {
                    let pass = match c.pass {
                        Some(true) => "pass",
                        Some(false) => "fail",
                        None => "skip",
                    };
                    let cell = |v: f64| if v.is_nan() { String::new() } else { num(v) };
                    vec![
                        name.clone(),
                        c.check.to_string(),
                        cell(c.measured),
                        cell(c.expected),
                        cell(c.tolerance),
                        pass.to_string(),
                        c.detail,
                        String::new(),
                    ]
                })
                .collect()
        })
        .collect();
    blocks.into_iter().flatten().for_each(|r| table.push(r));
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(sub: Subcommand, fields: &[&str]) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(sub);
        c.fields = fields.iter().map(|s| s.to_string()).collect();
        c
    }

    #[test]
    fn parses_config_text() {
        let c = ExperimentConfig::from_config_text(
            "# run\nsubcommand = variance\nfield = Q\nfield = quad:-1  # Gaussian\nx = 1e4, 20000\nq_grid = geometric:3\nsequential = true\n",
        )
        .unwrap();
        assert_eq!(c.subcommand, Subcommand::Variance);
        assert_eq!(c.fields, vec!["Q", "quad:-1"]);
        assert_eq!(c.xs, vec![10_000, 20_000]);
        assert_eq!(c.q_grid, QGrid::Geometric(3));
        assert!(c.sequential);
        assert!(ExperimentConfig::from_config_text("field = Q\n").is_err());
        assert!(ExperimentConfig::from_config_text("subcommand = phik\nbogus = 1\n").is_err());
        assert_eq!(
            "list:5,10".parse::<QGrid>().unwrap(),
            QGrid::Explicit(vec![5, 10])
        );
    }

    #[test]
    fn validation() {
        assert!(matches!(
            run_experiment(&config(Subcommand::Phik, &[])),
            Err(Error::Config(_))
        ));
        let mut c = config(Subcommand::Variance, &["Q"]);
        c.xs = vec![100];
        c.q_grid = QGrid::Explicit(vec![50, 101]);
        assert!(c.validate().is_err());
        c.q_grid = QGrid::Explicit(vec![50, 100]);
        assert!(c.validate().is_ok());
        c.xs = vec![1];
        assert!(c.validate().is_err());
    }

    #[test]
    fn phik_rows_for_gaussian_field() {
        let mut c = config(Subcommand::Phik, &["quad:-1"]);
        c.q_max = 20;
        let t = run_experiment(&c).unwrap();
        assert_eq!(t.rows.len(), 20);
        assert!(t.rows.iter().all(|r| r[5] == "true" && r[7].is_empty()));
        assert_eq!(t.cell(3, "generation"), Some("stabilized"));
        assert_eq!(t.cell(4, "generation"), Some("complete"));
        // phi_K(4) = 1, phi_K(8) = 2, phi_K(5) = 4
        assert_eq!(t.cell(3, "phi_K"), Some("1"));
        assert_eq!(t.cell(7, "phi_K"), Some("2"));
        assert_eq!(t.cell(4, "phi_K"), Some("4"));
    }

    #[test]
    fn bad_field_keeps_sibling_rows() {
        let mut c = config(Subcommand::FieldInfo, &["Q", "quad:4", "cyc:5"]);
        c.q_max = 5;
        let t = run_experiment(&c).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert!(t.rows[0][8].is_empty() && t.rows[2][8].is_empty());
        assert!(!t.rows[1][8].is_empty());
        assert_eq!(t.cell(2, "ratio_mK"), Some("4"));
    }

    #[test]
    fn variance_smoke_and_determinism() {
        let mut c = config(Subcommand::Variance, &["Q"]);
        c.xs = vec![10_000];
        c.sequential = true;
        let t = run_experiment(&c).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.cell(0, "form"), Some("eq5_full_range"));
        assert_eq!(t.cell(0, "runtime_s"), Some(""));
        let s: f64 = t.cell(0, "S").unwrap().parse().unwrap();
        let p: f64 = t.cell(0, "predicted_S").unwrap().parse().unwrap();
        assert!((s - p).abs() < 0.05 * p);
        let again = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap()
            .install(|| run_experiment(&c).unwrap());
        assert_eq!(t.to_csv().unwrap(), again.to_csv().unwrap());
    }

    #[test]
    fn regress_synthetic_exact() {
        let x = 100_000u64;
        let rows: Vec<VarianceRow> = [x / 8, x / 4, x / 2, x]
            .iter()
            .map(|&q| VarianceRow {
                field: "quad:-1".into(),
                x,
                q1: 0,
                q2: q,
                s: 2.0 * x as f64 * q as f64 * (q as f64).ln() - 7.0 * x as f64 * q as f64,
            })
            .collect();
        let fit = regress_slope(&rows).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12 && (fit.intercept + 7.0).abs() < 1e-10);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert!(regress_slope(&rows[..3]).is_err());
        let t = regress_table(&rows);
        assert_eq!(t.cell(0, "degree"), Some("2"));
    }

    #[test]
    fn regress_rejects_repeated_q() {
        let row = VarianceRow {
            field: "Q".into(),
            x: 100,
            q1: 0,
            q2: 50,
            s: 1.0,
        };
        assert!(regress_slope(&vec![row; 4]).is_err());
    }

    #[test]
    fn quick_suite_on_rationals() {
        let checks = verify_suite(&"Q".parse().unwrap(), Budget::Quick);
        let names: Vec<&str> = checks.iter().map(|c| c.check).collect();
        assert_eq!(
            names[..3],
            ["splitting_efg", "phi_k_dual_method", "exp_larger_than_b"]
        );
        for c in &checks {
            assert_ne!(c.pass, Some(false), "{c:?}");
        }
    }

    #[test]
    fn variance_rows_round_trip() {
        let mut c = config(Subcommand::Variance, &["Q"]);
        c.xs = vec![2000];
        c.q_grid = QGrid::Geometric(3);
        let t = run_experiment(&c).unwrap();
        let rows = read_variance_rows(&t.to_csv().unwrap()).unwrap();
        assert_eq!(
            rows.iter().map(|r| r.q2).collect::<Vec<_>>(),
            vec![250, 500, 1000, 2000]
        );
        assert!(regress_slope(&rows).is_ok());
    }

    #[test]
    fn gnuplot_view_columns() {
        let mut c = config(Subcommand::Phik, &["Q"]);
        c.q_max = 3;
        let t = run_experiment(&c).unwrap();
        assert_eq!(gnuplot_view(Subcommand::Phik, &t), "# Q\n1 1\n2 1\n3 2\n");
    }
}
