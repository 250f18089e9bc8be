//! Batch front door: each subcommand drives one library module and emits a
//! machine-readable report with a provenance block.
//!
//! The CLI asserts nothing scientific.  Envelope violations are data, flagged
//! in the report for the test harness to judge; the only hard CLI failures
//! are invalid parameters (exit 2), numerical integrity breaks such as a
//! cross-method count mismatch (exit 3), and resource guards (exit 4).
//! Parameter precedence is flags over config file over defaults, and every
//! run is deterministic for a fixed effective config.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num::rational::Ratio;
use num::One;
use serde::{Deserialize, Serialize};

use crate::bounds::{bound_summary_row, bounds_csv, BoundsRow, choose_circle_ladder, DEFAULT_LADDER_K};
use crate::error::{Error, Result};
use crate::expsum::{
    count_s4, count_s6_brute, count_s6_hash, expsum_lp_norm, s6_grid_size, s6_via_dft,
    u128_as_string, ExpSumSpec, NormDomain,
};
use crate::geometry::{Interval, SquareRegion};
use crate::lab::{
    bilinear_ratio, family_ratio_reports, parse_ratio, rows_to_csv, trivial_bound, BilinearSpec,
    ExperimentConfig, ExperimentRow, FamilyConfig,
};
use crate::lattice::{enumerate_circle_points, LatticeCircle};

/// Largest number of radii one invocation will sweep.
const RADIUS_LIST_CAP: usize = 100_000;

/// Slack factor before a decoupling ratio is flagged as exceeding the
/// trivial envelope; quadrature noise alone stays far inside it.
const ENVELOPE_SLACK: f64 = 1.001;

#[derive(Parser)]
#[command(
    name = "declab",
    version,
    about = "Numerical laboratory for decoupling bounds, circle lattices, and exponential sums"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tabulate the closed-form bound over (p, delta) grids.
    Bounds(CommonArgs),
    /// Decoupling ratio experiments over a density family.
    Experiment(ExperimentArgs),
    /// Bilinear ratio experiments on separated interval pairs.
    Bilinear(ExperimentArgs),
    /// Ball-inflation residual experiments.
    BallInflation(ExperimentArgs),
    /// Enumerate integer points on circles of squared radius R.
    CirclePoints(CommonArgs),
    /// Sixth and fourth order correlation counts per radius.
    #[command(name = "s6")]
    S6(CommonArgs),
    /// Exponential-sum Lp norms per radius.
    Expsum(CommonArgs),
    /// Scale ladder parameters for one delta.
    Ladder(CommonArgs),
}

#[derive(Args, Clone, Debug, Default)]
struct CommonArgs {
    /// Scale, e.g. 1/16, 2^-40, or 1e-6.
    #[arg(long)]
    delta: Option<String>,
    /// Lebesgue exponent.
    #[arg(long)]
    p: Option<f64>,
    /// Squared radius: one value, a comma list, or an inclusive lo..hi range.
    #[arg(long = "R")]
    r: Option<String>,
    /// Seed for random-phase families.
    #[arg(long)]
    seed: Option<u64>,
    /// Field grid spacing.
    #[arg(long)]
    grid_spacing: Option<f64>,
    /// Counting route: brute, hash, dft, or cross.
    #[arg(long)]
    method: Option<String>,
    /// Output format: json, csv, or plot-data.
    #[arg(long)]
    format: Option<String>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON config file supplying any parameter not given as a flag.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Clone, Debug)]
struct ExperimentArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Density family: comma-separated constant, atoms, random:N, standard:N.
    #[arg(long)]
    family: Option<String>,
}

/// Effective parameters of one run, merged from flags, config file, and
/// per-subcommand defaults.  Serialized into the provenance block, so every
/// seed and grid setting that shaped the output is recorded with it.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, rename = "R", skip_serializing_if = "Option::is_none")]
    pub r: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_spacing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    /// Separation scale of bilinear and ball-inflation runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<String>,
    /// Tile exponent of bilinear and ball-inflation runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<u32>,
    /// Ladder base 1/C0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    /// Prefactor constant of bound tables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Grid side for moment and norm sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    /// Norm averaging mode: period or normalized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    /// Box side for experiments and normalized norms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<f64>,
    /// Cell indices of the separated interval pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i1: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i2: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_grid: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyConfig>,
}

impl CommonArgs {
    /// Config file overlaid with the flags that were actually given.
    fn effective(&self) -> Result<RunConfig> {
        let mut cfg: RunConfig = match &self.config {
            Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.delta {
            cfg.delta = Some(v.clone());
        }
        if let Some(v) = self.p {
            cfg.p = Some(v);
        }
        if let Some(v) = &self.r {
            cfg.r = Some(v.clone());
        }
        if let Some(v) = self.seed {
            cfg.seed = Some(v);
        }
        if let Some(v) = self.grid_spacing {
            cfg.grid_spacing = Some(v);
        }
        if let Some(v) = &self.method {
            cfg.method = Some(v.clone());
        }
        if let Some(v) = &self.format {
            cfg.format = Some(v.clone());
        }
        Ok(cfg)
    }
}

// ---------------------------------------------------------------------------
// Provenance and output plumbing

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn config_hash(subcommand: &str, cfg: &RunConfig) -> Result<String> {
    let canonical = format!("{subcommand}:{}", serde_json::to_string(cfg)?);
    Ok(format!("fnv1a:{:016x}", fnv1a(canonical.as_bytes())))
}

#[derive(Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    config_hash: String,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    provenance: Provenance<'a>,
    data: &'a T,
}

fn render_json<T: Serialize>(subcommand: &str, cfg: &RunConfig, data: &T) -> Result<String> {
    let report = Report {
        provenance: Provenance {
            tool: "declab",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            config_hash: config_hash(subcommand, cfg)?,
            config: cfg,
        },
        data,
    };
    let mut s = serde_json::to_string_pretty(&report)?;
    s.push('\n');
    Ok(s)
}

fn comment_header(subcommand: &str, cfg: &RunConfig) -> Result<String> {
    Ok(format!(
        "# declab {} {subcommand} config {}\n",
        env!("CARGO_PKG_VERSION"),
        config_hash(subcommand, cfg)?
    ))
}

/// Writes through a sibling temp file and renames, so a crashed run never
/// leaves a half-written report at the target path.
fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("report");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn write_output(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// Parameter parsing

#[derive(Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
    PlotData,
}

impl Format {
    fn parse(name: &str) -> Result<Format> {
        match name {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "plot-data" => Ok(Format::PlotData),
            other => Err(Error::InvalidParameter(format!(
                "format {other} is not one of json, csv, plot-data"
            ))),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::PlotData => "plot-data",
        }
    }
}

/// Parses a scale in any of the three accepted spellings: `a/b`, `2^-k`, or
/// a plain float.
fn parse_scale(text: &str) -> Result<f64> {
    let t = text.trim();
    let bad = |why: &str| Error::InvalidParameter(format!("scale {t}: {why}"));
    let value = if let Some(rest) = t.strip_prefix("2^-") {
        let k: i32 = rest
            .parse()
            .map_err(|_| bad("exponent after 2^- is not an integer"))?;
        if !(1..=1074).contains(&k) {
            return Err(bad("exponent out of range"));
        }
        2f64.powi(-k)
    } else if let Some((a, b)) = t.split_once('/') {
        let num: f64 = a.trim().parse().map_err(|_| bad("bad numerator"))?;
        let den: f64 = b.trim().parse().map_err(|_| bad("bad denominator"))?;
        if !(den > 0.0) {
            return Err(bad("denominator must be positive"));
        }
        num / den
    } else {
        t.parse().map_err(|_| bad("not a number"))?
    };
    if !(value > 0.0 && value < 1.0) {
        return Err(bad("must land strictly inside (0, 1)"));
    }
    Ok(value)
}

/// Parses `--R`: one radius, a comma list, or an inclusive `lo..hi` range.
fn parse_radius_list(text: &str) -> Result<Vec<u64>> {
    let t = text.trim();
    let bad = |why: String| Error::InvalidParameter(format!("radius list {t}: {why}"));
    if let Some((lo, hi)) = t.split_once("..") {
        let lo: u64 = lo
            .trim()
            .parse()
            .map_err(|_| bad("range start is not an integer".into()))?;
        let hi: u64 = hi
            .trim()
            .parse()
            .map_err(|_| bad("range end is not an integer".into()))?;
        if hi < lo {
            return Err(bad(format!("range end {hi} below start {lo}")));
        }
        let count = hi - lo + 1;
        if count > RADIUS_LIST_CAP as u64 {
            return Err(Error::ResourceGuard(format!(
                "radius range holds {count} values (cap {RADIUS_LIST_CAP})"
            )));
        }
        return Ok((lo..=hi).collect());
    }
    let mut out = Vec::new();
    for part in t.split(',') {
        out.push(
            part.trim()
                .parse()
                .map_err(|_| bad(format!("{part} is not an integer")))?,
        );
    }
    if out.is_empty() {
        return Err(bad("empty".into()));
    }
    Ok(out)
}

fn parse_family(desc: &str, seed: u64) -> Result<FamilyConfig> {
    let mut fc = FamilyConfig {
        constant: false,
        random_draws: 0,
        seed,
        atoms: false,
    };
    for part in desc.split(',') {
        let part = part.trim();
        if part == "constant" {
            fc.constant = true;
        } else if part == "atoms" {
            fc.atoms = true;
        } else if let Some(n) = part.strip_prefix("random:") {
            fc.random_draws = n.parse().map_err(|_| {
                Error::InvalidParameter(format!("family draw count {n} is not an integer"))
            })?;
        } else if let Some(n) = part.strip_prefix("standard:") {
            fc.constant = true;
            fc.atoms = true;
            fc.random_draws = n.parse().map_err(|_| {
                Error::InvalidParameter(format!("family draw count {n} is not an integer"))
            })?;
        } else {
            return Err(Error::InvalidParameter(format!(
                "family part {part} is not constant, atoms, random:N, or standard:N"
            )));
        }
    }
    Ok(fc)
}

fn require<T>(value: Option<T>, what: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidParameter(format!("{what} is required")))
}

fn nu_cell(nu: Ratio<i64>, index: u32) -> Result<Interval> {
    let i = Ratio::from_integer(index as i64);
    Interval::new(i * nu, (i + Ratio::one()) * nu)
}

// ---------------------------------------------------------------------------
// Row shapes shared by the table-like subcommands

#[derive(Serialize)]
struct MemberReport {
    member: String,
    p: f64,
    lhs: f64,
    rhs: f64,
    ratio: f64,
    envelope: f64,
    exceeds_envelope: bool,
}

#[derive(Serialize)]
struct S6Row {
    #[serde(rename = "R")]
    r: u64,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "S6", serialize_with = "u128_as_string")]
    s6: u128,
    #[serde(rename = "S4", serialize_with = "u128_as_string")]
    s4: u128,
    e: Option<f64>,
    method: String,
    #[serde(rename = "M")]
    m: Option<u64>,
}

#[derive(Serialize)]
struct ExpsumRow {
    #[serde(rename = "R")]
    r: u64,
    #[serde(rename = "N")]
    n: usize,
    p: f64,
    mode: String,
    m: u64,
    norm: f64,
    /// `norm / sqrt(N)`, the square-root-cancellation benchmark; 0 for an
    /// empty circle.
    ratio_sqrt_n: f64,
}

// ---------------------------------------------------------------------------
// Subcommand runners

fn run_bounds(args: &CommonArgs) -> Result<()> {
    let mut cfg = args.effective()?;
    let c = cfg.c.unwrap_or(1.0);
    cfg.c = Some(c);
    let deltas: Vec<String> = match (&cfg.delta, &cfg.delta_grid) {
        (Some(d), _) => vec![d.clone()],
        (None, Some(grid)) => grid.clone(),
        (None, None) => {
            return Err(Error::InvalidParameter(
                "bounds needs --delta or a delta_grid config entry".into(),
            ))
        }
    };
    let ps: Vec<f64> = match (cfg.p, &cfg.p_grid) {
        (Some(p), _) => vec![p],
        (None, Some(grid)) => grid.clone(),
        (None, None) => vec![5.0],
    };
    if deltas.is_empty() || ps.is_empty() {
        return Err(Error::InvalidParameter("bounds grid is empty".into()));
    }

    let mut rows: Vec<BoundsRow> = Vec::with_capacity(deltas.len() * ps.len());
    for &p in &ps {
        for d in &deltas {
            rows.push(bound_summary_row(parse_scale(d)?, p, c)?);
        }
    }

    let format = Format::parse(cfg.format.as_deref().unwrap_or("csv"))?;
    cfg.format = Some(format.name().into());
    let content = match format {
        Format::Json => render_json("bounds", &cfg, &rows)?,
        Format::Csv => comment_header("bounds", &cfg)? + &bounds_csv(&rows),
        Format::PlotData => {
            let mut s = comment_header("bounds", &cfg)?;
            for (i, chunk) in rows.chunks(deltas.len()).enumerate() {
                if i > 0 {
                    s.push('\n');
                }
                for row in chunk {
                    s.push_str(&format!("{:e} {}\n", row.delta, row.log_bound));
                }
            }
            s
        }
    };
    write_output(args.out.as_deref(), &content)
}

/// Family shared by the three experiment subcommands: the flag wins, then
/// the config block, then a constant-only default; the seed flag overrides
/// the family's own.
fn resolve_family(args: &ExperimentArgs, cfg: &mut RunConfig) -> Result<FamilyConfig> {
    let seed = cfg.seed.unwrap_or(0);
    cfg.seed = Some(seed);
    let mut fc = match (&args.family, &cfg.family) {
        (Some(desc), _) => parse_family(desc, seed)?,
        (None, Some(fc)) => fc.clone(),
        (None, None) => FamilyConfig::default(),
    };
    if args.common.seed.is_some() || cfg.family.as_ref().map_or(true, |f| f.seed == 0) {
        fc.seed = seed;
    }
    cfg.family = Some(fc.clone());
    Ok(fc)
}

fn run_experiment(args: &ExperimentArgs) -> Result<()> {
    let mut cfg = args.common.effective()?;
    let delta = require(cfg.delta.clone(), "--delta")?;
    let p = cfg.p.unwrap_or(5.0);
    cfg.p = Some(p);
    let fc = resolve_family(args, &mut cfg)?;

    let wire = ExperimentConfig {
        delta,
        p,
        side: cfg.side,
        spacing: cfg.grid_spacing,
        family: Some(fc),
    };
    let spec = wire.to_spec()?;
    cfg.grid_spacing = Some(spec.spacing);

    let table = family_ratio_reports(&spec, &[p])?;
    let mut members = Vec::with_capacity(table.len());
    for (g, row) in spec.family.iter().zip(&table) {
        let rep = &row[0];
        let envelope = trivial_bound(p, spec.delta);
        members.push(MemberReport {
            member: g.describe(),
            p,
            lhs: rep.lhs,
            rhs: rep.rhs,
            ratio: rep.ratio,
            envelope,
            exceeds_envelope: rep.ratio > envelope * ENVELOPE_SLACK,
        });
    }
    emit_member_reports("experiment", &mut cfg, members, args)
}

fn run_bilinear(args: &ExperimentArgs) -> Result<()> {
    let mut cfg = args.common.effective()?;
    let delta = parse_ratio(&require(cfg.delta.clone(), "--delta")?)?;
    let p = cfg.p.unwrap_or(5.0);
    cfg.p = Some(p);
    let nu = parse_ratio(cfg.nu.as_deref().unwrap_or("1/4"))?;
    cfg.nu = Some(format!("{nu}"));
    let b = cfg.b.unwrap_or(1);
    cfg.b = Some(b);
    let (c1, c2) = (cfg.i1.unwrap_or(0), cfg.i2.unwrap_or(2));
    cfg.i1 = Some(c1);
    cfg.i2 = Some(c2);
    let fc = resolve_family(args, &mut cfg)?;

    let spec = BilinearSpec::new(delta, nu, b, nu_cell(nu, c1)?, nu_cell(nu, c2)?, p)?;
    let family = fc.build(delta)?;
    let mut members = Vec::with_capacity(family.len());
    for g in &family {
        let rep = bilinear_ratio(&spec, g)?;
        members.push(MemberReport {
            member: g.describe(),
            p,
            lhs: rep.lhs,
            rhs: rep.rhs,
            ratio: rep.ratio,
            envelope: rep.envelope.unwrap_or(0.0),
            exceeds_envelope: false,
        });
    }
    emit_member_reports("bilinear", &mut cfg, members, args)
}

fn run_ball_inflation(args: &ExperimentArgs) -> Result<()> {
    let mut cfg = args.common.effective()?;
    let nu = parse_ratio(cfg.nu.as_deref().unwrap_or("1/8"))?;
    cfg.nu = Some(format!("{nu}"));
    let b = cfg.b.unwrap_or(1);
    cfg.b = Some(b);
    let p = cfg.p.unwrap_or(5.0);
    cfg.p = Some(p);
    let (c1, c2) = (cfg.i1.unwrap_or(0), cfg.i2.unwrap_or(2));
    cfg.i1 = Some(c1);
    cfg.i2 = Some(c2);
    let fc = resolve_family(args, &mut cfg)?;

    let mut nu_b = Ratio::one();
    for _ in 0..b {
        nu_b *= nu;
    }
    let nb = *nu_b.numer() as f64 / *nu_b.denom() as f64;
    let dprime = SquareRegion::origin(1.0 / (nb * nb))?;
    let family = fc.build(nu_b)?;
    let reports = crate::lab::ball_inflation_residuals(
        b,
        nu,
        p,
        &nu_cell(nu, c1)?,
        &nu_cell(nu, c2)?,
        &dprime,
        &family,
    )?;
    let members = reports
        .iter()
        .map(|rep| MemberReport {
            member: rep.member.clone().unwrap_or_default(),
            p,
            lhs: rep.lhs,
            rhs: rep.rhs,
            ratio: rep.ratio,
            envelope: rep.envelope.unwrap_or(0.0),
            exceeds_envelope: false,
        })
        .collect();
    emit_member_reports("ball-inflation", &mut cfg, members, args)
}

fn emit_member_reports(
    sub: &str,
    cfg: &mut RunConfig,
    members: Vec<MemberReport>,
    args: &ExperimentArgs,
) -> Result<()> {
    let format = Format::parse(cfg.format.as_deref().unwrap_or("json"))?;
    cfg.format = Some(format.name().into());
    let content = match format {
        Format::Json => render_json(sub, cfg, &members)?,
        Format::Csv => {
            let rows: Vec<ExperimentRow> = members
                .iter()
                .map(|m| ExperimentRow {
                    delta: cfg.delta.clone().or_else(|| cfg.nu.clone()).unwrap_or_default(),
                    p: m.p,
                    family: m.member.clone(),
                    ratio: m.ratio,
                    envelope: m.envelope,
                })
                .collect();
            comment_header(sub, cfg)? + &rows_to_csv(&rows)
        }
        Format::PlotData => {
            let mut s = comment_header(sub, cfg)?;
            for (i, m) in members.iter().enumerate() {
                s.push_str(&format!("{i} {}\n", m.ratio));
            }
            s
        }
    };
    write_output(args.common.out.as_deref(), &content)
}

fn run_circle_points(args: &CommonArgs) -> Result<()> {
    let mut cfg = args.effective()?;
    let radii = parse_radius_list(&require(cfg.r.clone(), "--R")?)?;
    let circles: Vec<LatticeCircle> = radii
        .iter()
        .map(|&r| enumerate_circle_points(r))
        .collect::<Result<_>>()?;

    let format = Format::parse(cfg.format.as_deref().unwrap_or("json"))?;
    cfg.format = Some(format.name().into());
    let content = match format {
        Format::Json => render_json("circle-points", &cfg, &circles)?,
        Format::Csv => {
            let mut s = comment_header("circle-points", &cfg)? + "R,N\n";
            for lc in &circles {
                s.push_str(&format!("{},{}\n", lc.r, lc.n()));
            }
            s
        }
        Format::PlotData => {
            let mut s = comment_header("circle-points", &cfg)?;
            for (i, lc) in circles.iter().enumerate() {
                if i > 0 {
                    s.push('\n');
                }
                for &(x, y) in &lc.points {
                    s.push_str(&format!("{x} {y}\n"));
                }
            }
            s
        }
    };
    write_output(args.out.as_deref(), &content)
}

fn excess_exponent(s6: u128, n: usize) -> Option<f64> {
    if n < 2 || s6 == 0 {
        return None;
    }
    let ln_n = (n as f64).ln();
    Some(((s6 as f64).ln() - 3.0 * ln_n) / ln_n)
}

fn run_s6(args: &CommonArgs) -> Result<()> {
    let mut cfg = args.effective()?;
    let radii = parse_radius_list(&require(cfg.r.clone(), "--R")?)?;
    let method = cfg.method.clone().unwrap_or_else(|| "hash".into());
    cfg.method = Some(method.clone());

    let mut rows = Vec::with_capacity(radii.len());
    for &r in &radii {
        let lc = enumerate_circle_points(r)?;
        let n = lc.n();
        let grid = cfg.m.unwrap_or_else(|| s6_grid_size(r));
        let (s6, s4, m_used) = if n == 0 {
            (0u128, 0u128, None)
        } else {
            let s4 = count_s4(&lc.points)?;
            match method.as_str() {
                "brute" | "brute6" => (count_s6_brute(&lc.points)?, s4, None),
                "hash" | "hash3" => (count_s6_hash(&lc.points)?, s4, None),
                "dft" => (s6_via_dft(&lc.points, grid)?, s4, Some(grid)),
                "cross" => {
                    let hash = count_s6_hash(&lc.points)?;
                    let dft = s6_via_dft(&lc.points, grid)?;
                    if hash != dft {
                        return Err(Error::Numerical(format!(
                            "count integrity failure at R = {r}: hash {hash} vs dft {dft}"
                        )));
                    }
                    (hash, s4, Some(grid))
                }
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "method {other} is not brute, hash, dft, or cross"
                    )))
                }
            }
        };
        rows.push(S6Row {
            r,
            n,
            s6,
            s4,
            e: excess_exponent(s6, n),
            method: method.clone(),
            m: m_used,
        });
    }

    let format = Format::parse(cfg.format.as_deref().unwrap_or("json"))?;
    cfg.format = Some(format.name().into());
    let content = match format {
        Format::Json => render_json("s6", &cfg, &rows)?,
        Format::Csv => {
            let mut s = comment_header("s6", &cfg)? + "R,N,S6,S4,e,method,M\n";
            for row in &rows {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    row.r,
                    row.n,
                    row.s6,
                    row.s4,
                    row.e.map_or(String::new(), |e| e.to_string()),
                    row.method,
                    row.m.map_or(String::new(), |m| m.to_string()),
                ));
            }
            s
        }
        Format::PlotData => {
            let mut s = comment_header("s6", &cfg)?;
            for row in &rows {
                if let Some(e) = row.e {
                    s.push_str(&format!("{} {e}\n", row.r));
                }
            }
            s
        }
    };
    write_output(args.out.as_deref(), &content)
}

fn run_expsum(args: &CommonArgs) -> Result<()> {
    let mut cfg = args.effective()?;
    let radii = parse_radius_list(&require(cfg.r.clone(), "--R")?)?;
    let p = cfg.p.unwrap_or(2.0);
    cfg.p = Some(p);
    let mode = cfg.mode.clone().unwrap_or_else(|| "period".into());
    cfg.mode = Some(mode.clone());

    let mut rows = Vec::with_capacity(radii.len());
    for &r in &radii {
        let lc = enumerate_circle_points(r)?;
        let n = lc.n();
        let (spec, m_used) = match mode.as_str() {
            "period" => {
                let m = cfg.m.unwrap_or_else(|| s6_grid_size(r));
                (ExpSumSpec::period(lc, p, m), m)
            }
            "normalized" => {
                let side = cfg.side.unwrap_or(4.0);
                cfg.side = Some(side);
                let m = match (cfg.m, cfg.grid_spacing) {
                    (Some(m), _) => m,
                    (None, Some(spacing)) => {
                        if !(spacing > 0.0) {
                            return Err(Error::InvalidParameter(format!(
                                "grid spacing {spacing} must be positive"
                            )));
                        }
                        (side / spacing).round() as u64 + 1
                    }
                    (None, None) => 33,
                };
                let square = SquareRegion::origin(side)?;
                (
                    ExpSumSpec {
                        points: lc,
                        p,
                        m,
                        domain: NormDomain::Normalized(square),
                    },
                    m,
                )
            }
            other => {
                return Err(Error::InvalidParameter(format!(
                    "mode {other} is not period or normalized"
                )))
            }
        };
        let norm = expsum_lp_norm(&spec)?;
        rows.push(ExpsumRow {
            r,
            n,
            p,
            mode: mode.clone(),
            m: m_used,
            norm,
            ratio_sqrt_n: if n == 0 { 0.0 } else { norm / (n as f64).sqrt() },
        });
    }

    let format = Format::parse(cfg.format.as_deref().unwrap_or("json"))?;
    cfg.format = Some(format.name().into());
    let content = match format {
        Format::Json => render_json("expsum", &cfg, &rows)?,
        Format::Csv => {
            let mut s = comment_header("expsum", &cfg)? + "R,N,p,mode,m,norm,ratio_sqrt_n\n";
            for row in &rows {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    row.r, row.n, row.p, row.mode, row.m, row.norm, row.ratio_sqrt_n
                ));
            }
            s
        }
        Format::PlotData => {
            let mut s = comment_header("expsum", &cfg)?;
            for row in &rows {
                s.push_str(&format!("{} {}\n", row.r, row.norm));
            }
            s
        }
    };
    write_output(args.out.as_deref(), &content)
}

fn run_ladder(args: &CommonArgs) -> Result<()> {
    let mut cfg = args.effective()?;
    let delta = parse_scale(&require(cfg.delta.clone(), "--delta")?)?;
    let k = cfg.k.unwrap_or(DEFAULT_LADDER_K);
    cfg.k = Some(k);
    let ladder = choose_circle_ladder(delta, k)?;

    let format = Format::parse(cfg.format.as_deref().unwrap_or("json"))?;
    cfg.format = Some(format.name().into());
    let content = match format {
        Format::Json => render_json("ladder", &cfg, &ladder)?,
        Format::Csv => {
            let mut s = comment_header("ladder", &cfg)? + "j,tau_exponent,log_tau\n";
            for (j, (&e, &lt)) in ladder
                .tau_exponents
                .iter()
                .zip(ladder.log_tau.iter())
                .enumerate()
            {
                s.push_str(&format!("{j},{e},{lt}\n"));
            }
            s
        }
        Format::PlotData => {
            let mut s = comment_header("ladder", &cfg)?;
            for (j, &lt) in ladder.log_tau.iter().enumerate() {
                s.push_str(&format!("{j} {lt}\n"));
            }
            s
        }
    };
    write_output(args.out.as_deref(), &content)
}

// ---------------------------------------------------------------------------
// Entry point

fn configure_threads() {
    if let Ok(v) = std::env::var("DECLAB_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Bounds(a) => run_bounds(a),
        Cmd::Experiment(a) => run_experiment(a),
        Cmd::Bilinear(a) => run_bilinear(a),
        Cmd::BallInflation(a) => run_ball_inflation(a),
        Cmd::CirclePoints(a) => run_circle_points(a),
        Cmd::S6(a) => run_s6(a),
        Cmd::Expsum(a) => run_expsum(a),
        Cmd::Ladder(a) => run_ladder(a),
    }
}

/// Parses arguments, runs the subcommand, and maps failures to the stable
/// exit-code contract with a diagnostic JSON line on stderr.
pub fn run() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            let diag = serde_json::json!({ "error": e.to_string(), "exit": code });
            eprintln!("{diag}");
            ExitCode::from(code as u8)
        }
    }
}
