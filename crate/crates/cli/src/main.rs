use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use skein::asymptotics::{growth_series, odd_levels};
use skein::bridge::{tv_from_jones, tv_from_jones_log, tv_prime_from_jones, verify_identity, verify_identity_at};
use skein::jones::jones_eval;
use skein::qarith::{brace, quantum_factorial_log, quantum_int};
use skein::skein::{sixj, theta, ColorSixTuple, ColorTriple};
use skein::statesum::{tv_prime_with, tv_with, with_threads, StateSumOptions};
use skein::{Error, Flavor, Form, LinkExpr, RootContext, Triangulation};

#[derive(Parser)]
#[command(name = "skein", version, about = "Turaev-Viro and colored Jones invariants at roots of unity")]
struct Cli {
    /// Worker threads for state sums and color scans.
    #[arg(long, global = true, env = "SKEIN_THREADS")]
    threads: Option<usize>,

    /// Output format; each subcommand has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Plain,
}

#[derive(Args, Clone, Copy)]
struct RootArgs {
    /// Level r.
    #[arg(long)]
    r: u32,
    /// Primitive 2r-th root A = exp(iπk/r); r must be odd.
    #[arg(long, conflicts_with = "su2")]
    so3: bool,
    /// Primitive 4r-th root A = exp(iπk/2r) (the default).
    #[arg(long)]
    su2: bool,
    /// Exponent k of the root.
    #[arg(long, default_value_t = 1)]
    exponent: u32,
}

impl RootArgs {
    fn ctx(&self) -> Result<RootContext, Error> {
        let flavor = if self.so3 { Flavor::So3 } else { Flavor::Su2 };
        RootContext::new(self.r, flavor, self.exponent)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum QKind {
    Int,
    Factorial,
    Brace,
}

#[derive(Clone, Copy, ValueEnum)]
enum FlavorChoice {
    Auto,
    Su2,
    So3,
}

#[derive(Subcommand)]
enum Command {
    /// Quantum integer, quantum factorial or brace value of n.
    Qint {
        #[arg(allow_negative_numbers = true)]
        n: i64,
        #[command(flatten)]
        root: RootArgs,
        #[arg(long, value_enum, default_value = "int")]
        kind: QKind,
    },
    /// Tetrahedral coefficient of six colors (i j k l m n), or the theta
    /// coefficient when three colors are given.
    Sixj {
        #[arg(num_args = 3..=6, required = true)]
        colors: Vec<u32>,
        #[command(flatten)]
        root: RootArgs,
        #[arg(long, default_value = "def27")]
        form: Form,
    },
    /// State sum on a tvtri triangulation.
    TvStatesum {
        /// Triangulation in tvtri format.
        file: PathBuf,
        #[command(flatten)]
        root: RootArgs,
        #[arg(long, default_value = "def27")]
        form: Form,
        /// TV'_r over even colors (SO3 roots only).
        #[arg(long)]
        prime: bool,
        /// Report zero seconds so the output is reproducible.
        #[arg(long)]
        no_timing: bool,
    },
    /// Colored Jones value of a link expression.
    Jones {
        /// Link expression, e.g. fig8, borromean, torus(2,3), cable(2,3,torus(2,3)).
        expr: String,
        /// One color per component, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        colors: Vec<u32>,
        #[command(flatten)]
        root: RootArgs,
    },
    /// Turaev-Viro invariant of the link complement as a sum of squared Jones values.
    TvSum {
        /// Link expression.
        expr: String,
        #[command(flatten)]
        root: RootArgs,
        /// TV'_r = η'² Σ|J|² (SO3 roots only).
        #[arg(long)]
        prime: bool,
    },
    /// Compares the state sum on a triangulation with the Jones sum.
    Verify {
        /// Link expression.
        expr: String,
        /// Triangulation of the link complement in tvtri format.
        file: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        r_list: Vec<u32>,
        /// Root family; `auto` uses SO3 for odd r and SU2 for even r.
        #[arg(long, value_enum, default_value = "auto")]
        flavor: FlavorChoice,
    },
    /// Growth rate (2π/r) log TV_r over odd r.
    Growth {
        /// Link expression.
        expr: String,
        #[arg(long)]
        r_max: u32,
        #[arg(long, default_value_t = 5)]
        r_min: u32,
        /// Spacing between consecutive levels (rounded down to even).
        #[arg(long, default_value_t = 2)]
        step: u32,
        /// Print the fitted limit {a, b, c, residual} as JSON instead of rows.
        #[arg(long)]
        fit: bool,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Compute(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::LevelTooSmall(_)
            | Error::EvenLevelForSo3(_)
            | Error::NotPrimitive { .. }
            | Error::FlavorMismatch { .. }
            | Error::Parse { .. }
            | Error::Validation(_)
            | Error::LinkSyntax(_)
            | Error::InvalidLink(_)
            | Error::ColorCount { .. }
            | Error::NonPositiveColor(_)
            | Error::ColorOutOfRange { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Compute(e.to_string()),
        }
    }
}

type Outcome = Result<String, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    let result = with_threads(threads, || run(cli));
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn read_triangulation(path: &Path) -> Result<Triangulation, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    Triangulation::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn json<T: Serialize>(v: &T) -> Outcome {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| Failure::Compute(e.to_string()))
}

#[derive(Serialize)]
struct Scalar {
    value: f64,
}

#[derive(Serialize)]
struct ComplexValue {
    re: f64,
    im: f64,
    abs: f64,
}

/// Shortest round-trip form, with an exponent only for very small or large values.
fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e16).contains(&a) || !a.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn scalar(v: f64, format: Option<Format>) -> Outcome {
    match format.unwrap_or(Format::Plain) {
        Format::Json => json(&Scalar { value: v }),
        Format::Csv => Ok(format!("value\n{}\n", num(v))),
        Format::Plain => Ok(format!("{}\n", num(v))),
    }
}

fn run(cli: Cli) -> Outcome {
    let format = cli.format;
    match cli.command {
        Command::Qint { n, root, kind } => {
            let ctx = root.ctx()?;
            let v = match kind {
                QKind::Int => quantum_int(&ctx, n),
                QKind::Factorial => {
                    let n = u32::try_from(n).map_err(|_| Failure::Usage("factorial needs n ≥ 0".into()))?;
                    quantum_factorial_log(&ctx, n).to_f64()
                }
                QKind::Brace => brace(&ctx, n)?,
            };
            scalar(v, format)
        }
        Command::Sixj { colors, root, form } => {
            let ctx = root.ctx()?;
            let v = match colors.len() {
                3 => theta(&ctx, ColorTriple(colors[0], colors[1], colors[2]))?,
                6 => {
                    let six: [u32; 6] = colors.try_into().expect("six colors");
                    sixj(&ctx, ColorSixTuple::from(six), form.normalization())?
                }
                n => return Err(Failure::Usage(format!("expected 3 or 6 colors, got {n}"))),
            };
            scalar(v, format)
        }
        Command::TvStatesum { file, root, form, prime, no_timing } => {
            let tri = read_triangulation(&file)?;
            let ctx = root.ctx()?;
            let opts = StateSumOptions { threads: None };
            let mut res = if prime { tv_prime_with(&tri, &ctx, form, opts)? } else { tv_with(&tri, &ctx, form, opts)? };
            if no_timing {
                res.seconds = 0.0;
            }
            match format.unwrap_or(Format::Json) {
                Format::Json => json(&res),
                Format::Csv => Ok(format!(
                    "value,admissible,visited,seconds\n{},{},{},{}\n",
                    num(res.value),
                    res.admissible,
                    res.visited,
                    num(res.seconds)
                )),
                Format::Plain => Ok(format!("{}\n", num(res.value))),
            }
        }
        Command::Jones { expr, colors, root } => {
            let link = LinkExpr::parse(&expr)?;
            let ctx = root.ctx()?;
            let v = jones_eval(&ctx, &link, &colors)?;
            match format.unwrap_or(Format::Plain) {
                Format::Json => json(&ComplexValue { re: v.re, im: v.im, abs: v.norm() }),
                Format::Csv => Ok(format!("re,im,abs\n{},{},{}\n", num(v.re), num(v.im), num(v.norm()))),
                Format::Plain if v.im.abs() <= 1e-12 * v.re.abs().max(1.0) => Ok(format!("{}\n", num(v.re))),
                Format::Plain => Ok(format!("{}{}{}i\n", num(v.re), if v.im < 0.0 { "-" } else { "+" }, num(v.im.abs()))),
            }
        }
        Command::TvSum { expr, root, prime } => {
            let link = LinkExpr::parse(&expr)?;
            let ctx = root.ctx()?;
            let v = if prime {
                tv_prime_from_jones(&ctx, &link)?
            } else {
                let v = tv_from_jones(&ctx, &link)?;
                if v.is_finite() { v } else { tv_from_jones_log(&ctx, &link)?.to_f64() }
            };
            scalar(v, format)
        }
        Command::Verify { expr, file, r_list, flavor } => {
            let link = LinkExpr::parse(&expr)?;
            let tri = read_triangulation(&file)?;
            let reports = match flavor {
                FlavorChoice::Auto => verify_identity(&link, &tri, &r_list)?,
                FlavorChoice::Su2 | FlavorChoice::So3 => {
                    let f = if matches!(flavor, FlavorChoice::So3) { Flavor::So3 } else { Flavor::Su2 };
                    let roots = r_list
                        .iter()
                        .map(|&r| RootContext::principal(r, f))
                        .collect::<Result<Vec<_>, _>>()?;
                    verify_identity_at(&link, &tri, &roots)?
                }
            };
            match format.unwrap_or(Format::Json) {
                Format::Json => json(&reports),
                Format::Csv | Format::Plain => {
                    let mut s = String::from("r,flavor,lhs,rhs,abs_diff,rel_diff,pass,lower_bound\n");
                    for rep in &reports {
                        s.push_str(&format!(
                            "{},{},{},{},{},{},{},{}\n",
                            rep.r,
                            rep.flavor,
                            num(rep.lhs),
                            num(rep.rhs),
                            num(rep.abs_diff),
                            num(rep.rel_diff),
                            rep.pass,
                            num(rep.lower_bound)
                        ));
                    }
                    Ok(s)
                }
            }
        }
        Command::Growth { expr, r_max, r_min, step, fit } => {
            let link = LinkExpr::parse(&expr)?;
            if r_max % 2 == 0 {
                return Err(Error::EvenLevelForSo3(r_max).into());
            }
            let series = growth_series(&link, &odd_levels(r_min, r_max, step))?;
            if fit {
                return match series.fit {
                    Some(f) => json(&f),
                    None => Err(Failure::Compute(format!(
                        "fit needs at least 4 levels, got {}",
                        series.rows.len()
                    ))),
                };
            }
            match format.unwrap_or(Format::Csv) {
                Format::Json => json(&series),
                Format::Csv | Format::Plain => Ok(series.to_csv()),
            }
        }
    }
}
