//! `hartogs`: decide, build, evaluate and check proper maps between
//! generalized Hartogs triangles from the command line.

use clap::{Args, Parser, Subcommand, ValueEnum};
use hartogs_core::hartogs::{aut_family, aut_sample, canonical_proper, exists_proper, HartogsDomain, Point};
use hartogs_core::verify::{levi_data, run_suite, Suite, SuiteConfig};
use hartogs_core::{Error, Exponent, ExponentVec, HartogsProperMap64};
use num_complex::Complex64;
use serde::Deserialize;
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CODES: &str = "Exit codes:
  0  success
  2  malformed input (descriptor, map, points, flags)
  3  no proper holomorphic map exists
  4  dimension mismatch
  5  point or parameter outside the domain of an operation
  6  a verification property failed";

#[derive(Parser)]
#[command(name = "hartogs", version, about = "Proper holomorphic maps between generalized Hartogs triangles")]
#[command(after_help = EXIT_CODES)]
struct Cli {
    #[command(flatten)]
    cfg: Config,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Config {
    /// Absolute tolerance on modulus sums, in (0, 1e-3)
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Numeric value substituted for the transcendental L
    #[arg(long, global = true, default_value_t = std::f64::consts::SQRT_2)]
    lambda: f64,
    #[arg(long, global = true, env = "HARTOGS_SEED", default_value_t = 42)]
    seed: u64,
    /// Write the result here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide whether a proper map src -> dst exists
    Exists {
        /// Domain JSON such as '{"p":["2"],"q":["3"]}', or a file holding it
        #[arg(long)]
        src: String,
        #[arg(long)]
        dst: String,
    },
    /// Emit the canonical proper map src -> dst
    Construct {
        #[arg(long)]
        src: String,
        #[arg(long)]
        dst: String,
    },
    /// Describe Aut(src) and draw seeded samples from it
    Aut {
        #[arg(long)]
        src: String,
        #[arg(long, default_value_t = 0)]
        samples: usize,
    },
    /// Evaluate a map JSON at the points of a points file
    Eval {
        #[arg(long)]
        map: String,
        /// JSON [[re,im],...] for one point, or a list of such points
        #[arg(long)]
        points: String,
    },
    /// Run a verification suite on a map JSON, or on the canonical map src -> dst
    Verify {
        #[arg(long, conflicts_with_all = ["src", "dst"])]
        map: Option<String>,
        #[arg(long, requires = "dst")]
        src: Option<String>,
        #[arg(long, requires = "src")]
        dst: Option<String>,
        /// all, form, soundness, boundary, properness or holomorphy
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Both sides of the Levi-form identity at a point of K (m = 1)
    Levi {
        /// Comma separated, e.g. 1,1
        #[arg(long, value_delimiter = ',')]
        p: Vec<String>,
        #[arg(long)]
        q: String,
        /// JSON [[re,im],...] with the z coordinates followed by w
        #[arg(long)]
        point: String,
        /// JSON [[re,im],...] of length n
        #[arg(long)]
        tangent: String,
    },
}

struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn parse(message: impl Into<String>) -> Self {
        Failure { code: 2, kind: "parse_error", message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match e {
            Error::InvalidExponent(_) | Error::InvalidMap(_) => (2, "parse_error"),
            Error::NoProperMap => (3, "no_proper_map"),
            Error::DimensionMismatch(_) => (4, "dimension_mismatch"),
            Error::CenterTooCloseToSphere(_) => (5, "center_too_close_to_sphere"),
            Error::NotInDomain => (5, "not_in_domain"),
            Error::BranchPole => (5, "branch_pole"),
            Error::NotOnK => (5, "not_on_k"),
            Error::EmptyRegion => (5, "empty_region"),
            Error::Unsupported(_) => (5, "unsupported"),
        };
        Failure { code, kind, message: e.to_string() }
    }
}

type Outcome = Result<(Value, String, u8), Failure>;

/// Inline JSON, or the contents of the named file.
fn read_json<T: for<'de> Deserialize<'de>>(arg: &str, what: &str) -> Result<T, Failure> {
    let text = if arg.trim_start().starts_with(['{', '[']) {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| Failure::parse(format!("{what}: cannot read {arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| Failure::parse(format!("{what}: {e}")))
}

fn domain(arg: &str) -> Result<HartogsDomain, Failure> {
    read_json(arg, "domain")
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Points {
    One(Vec<Complex64>),
    Many(Vec<Vec<Complex64>>),
}

fn to_point(flat: Vec<Complex64>, n: usize) -> Result<Point<f64>, Failure> {
    Ok(Point::from_flat(flat, n)?)
}

fn check_config(cfg: &Config) -> Result<(), Failure> {
    if !(cfg.tol > 0.0 && cfg.tol < 1e-3) {
        return Err(Failure::parse(format!("--tol must lie in (0, 1e-3), got {}", cfg.tol)));
    }
    if !(cfg.lambda > 0.0 && cfg.lambda.is_finite()) {
        return Err(Failure::parse(format!("--lambda must be positive, got {}", cfg.lambda)));
    }
    Ok(())
}

fn exists(src: &str, dst: &str) -> Outcome {
    let (s, d) = (domain(src)?, domain(dst)?);
    match exists_proper(&s, &d)? {
        Some(w) => {
            let text = format!("proper map {s} -> {d} exists ({}): {}", s.regime().tag(), json!(w));
            Ok((json!({"exists": true, "regime": s.regime(), "witness": w}), text, 0))
        }
        None => Err(Error::NoProperMap.into()),
    }
}

fn construct(cfg: &Config, src: &str, dst: &str) -> Outcome {
    let (s, d) = (domain(src)?, domain(dst)?);
    let map = canonical_proper(&s, &d, cfg.lambda)?;
    let text = format!("canonical map {s} -> {d} ({})", map.regime().tag());
    Ok((json!(map), text, 0))
}

fn aut(cfg: &Config, src: &str, samples: usize) -> Outcome {
    let d = domain(src)?;
    let family = aut_family(&d)?;
    let drawn: Vec<_> = (0..samples as u64)
        .map(|i| aut_sample(&d, cfg.seed.wrapping_add(i), cfg.lambda))
        .collect();
    let text = format!("Aut({d}) = {}; {}", family.form, family.parameters.join(", "));
    Ok((json!({"family": family, "samples": drawn}), text, 0))
}

fn eval(cfg: &Config, map: &str, points: &str) -> Outcome {
    let f: HartogsProperMap64 = read_json(map, "map")?;
    let flat = match read_json::<Points>(points, "points")? {
        Points::One(p) => vec![p],
        Points::Many(ps) => ps,
    };
    let mut images = Vec::with_capacity(flat.len());
    for p in flat {
        let x = to_point(p, f.src.n())?;
        if !f.src.membership(&x, cfg.tol, cfg.lambda)?.in_closure_minus_origin() {
            return Err(Error::NotInDomain.into());
        }
        images.push(f.apply(&x)?.to_flat());
    }
    let text = images
        .iter()
        .map(|y| y.iter().map(|c| format!("{c}")).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("\n");
    Ok((json!(images), text, 0))
}

fn verify(cfg: &Config, map: Option<&str>, src: Option<&str>, dst: Option<&str>, suite: &str, samples: usize) -> Outcome {
    let f: HartogsProperMap64 = match (map, src, dst) {
        (Some(m), _, _) => read_json(m, "map")?,
        (None, Some(s), Some(d)) => canonical_proper(&domain(s)?, &domain(d)?, cfg.lambda)?,
        _ => return Err(Failure::parse("verify needs --map or both --src and --dst")),
    };
    let suite: Suite = suite.parse().map_err(|e: Error| Failure::parse(e.to_string()))?;
    let sc = SuiteConfig { samples, boundary_tol: cfg.tol.max(SuiteConfig::default().boundary_tol), ..Default::default() };
    let reports = run_suite(&f, suite, &sc, cfg.seed)?;
    let code = if reports.iter().all(|r| r.pass) { 0 } else { 6 };
    let text = reports
        .iter()
        .map(|r| {
            format!(
                "{:<22} {} worst {:e} (tolerance {:e}, {} samples)",
                r.property,
                if r.pass { "PASS" } else { "FAIL" },
                r.worst_residual,
                r.tolerance,
                r.samples
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    Ok((json!(reports), text, code))
}

fn levi(cfg: &Config, p: &[String], q: &str, point: &str, tangent: &str) -> Outcome {
    let p = ExponentVec::parse(p)?;
    let q: Exponent = q.parse()?;
    let pt = to_point(read_json(point, "point")?, p.len())?;
    let x: Vec<Complex64> = read_json(tangent, "tangent")?;
    if x.len() != p.len() {
        return Err(Error::DimensionMismatch(format!("tangent has {} entries, n = {}", x.len(), p.len())).into());
    }
    let d = levi_data(&p, q, &pt, &x, cfg.lambda)?;
    let text = format!("lhs = {:e}\nrhs = {:e}", d.levi_value, d.restricted_identity_value);
    Ok((
        json!({"lhs": d.levi_value, "rhs": d.restricted_identity_value, "tangent_y": d.tangent.1}),
        text,
        0,
    ))
}

fn run(cli: &Cli) -> Outcome {
    check_config(&cli.cfg)?;
    let cfg = &cli.cfg;
    match &cli.cmd {
        Cmd::Exists { src, dst } => exists(src, dst),
        Cmd::Construct { src, dst } => construct(cfg, src, dst),
        Cmd::Aut { src, samples } => aut(cfg, src, *samples),
        Cmd::Eval { map, points } => eval(cfg, map, points),
        Cmd::Verify { map, src, dst, suite, samples } => {
            verify(cfg, map.as_deref(), src.as_deref(), dst.as_deref(), suite, *samples)
        }
        Cmd::Levi { p, q, point, tangent } => levi(cfg, p, q, point, tangent),
    }
}

fn render(cli: &Cli, value: &Value, text: &str) -> String {
    match (&cli.cmd, cli.cfg.format) {
        (_, Format::Text) => format!("{text}\n"),
        // reports go out as JSON lines
        (Cmd::Verify { .. }, Format::Json) => value
            .as_array()
            .map(|rs| rs.iter().map(|r| format!("{r}\n")).collect())
            .unwrap_or_default(),
        (_, Format::Json) => format!("{value}\n"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({"error": "parse_error", "message": e.to_string().trim()}));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok((value, text, code)) => {
            let body = render(&cli, &value, &text);
            match &cli.cfg.out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, body) {
                        eprintln!("{}", json!({"error": "io_error", "message": e.to_string()}));
                        return ExitCode::from(2);
                    }
                }
                None => print!("{body}"),
            }
            ExitCode::from(code)
        }
        Err(f) => {
            eprintln!("{}", json!({"error": f.kind, "message": f.message}));
            ExitCode::from(f.code)
        }
    }
}
