mod output;

use std::io::Write;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use freelat::free_norm::{self, Budget};
use freelat::qlat::{self, parse_vector, CoordinateLattice};
use freelat::stable::{self, LogGamma, StableSpec};
use freelat::{acceptance, hilbert, parse, projectivity, Error};
use serde::Serialize;
use serde_json::{json, Value};

use output::{render, Cell, Format, Report};

const EXIT_VALIDATION: u8 = 2;
const EXIT_PROPERTY: u8 = 3;

#[derive(Parser, Serialize)]
#[command(
    name = "freelat",
    version,
    about = "Free quasi-Banach lattice computations"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Serialize)]
struct Global {
    /// JSON output (default).
    #[arg(long, global = true, conflicts_with_all = ["csv", "table"])]
    json: bool,
    #[arg(long, global = true, conflicts_with = "table")]
    csv: bool,
    #[arg(long, global = true)]
    table: bool,
    /// Root seed; every random stream derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Omit the timestamp so that output is byte-identical across runs.
    #[arg(long, global = true)]
    reproducible: bool,
    /// Write output to a file instead of standard output.
    #[arg(long, global = true)]
    output: Option<String>,
}

impl Global {
    fn format(&self) -> Format {
        if self.csv {
            Format::Csv
        } else if self.table {
            Format::Table
        } else {
            Format::Json
        }
    }
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "subcommand")]
enum Command {
    /// Bracket the free p-convex lattice norm of an expression.
    FblNorm {
        /// Coordinate space, e.g. `lp:1:3`, `lp:0.5:4`, `lpgrid:0.5:16`.
        #[arg(long)]
        space: String,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        /// Prefix expression, e.g. `(add (abs (gen 0)) (abs (gen 1)))`.
        #[arg(long)]
        expr: String,
        /// `n=8,restarts=8,iters=50`; omitted keys keep their defaults.
        #[arg(long, default_value = "")]
        budget: String,
        /// User certificate vectors `e_1;e_2;...`, each comma-separated.
        #[arg(long)]
        cert: Option<String>,
    },
    /// Closed-form A_{p,q}, optionally with a Monte Carlo estimate.
    Apq {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
        /// Monte Carlo sample count.
        #[arg(long)]
        mc: Option<usize>,
    },
    /// Factorization constant bound T_q · A_{r,q} / A_{p,q}.
    MnBound {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        q: f64,
        #[arg(long = "type-const")]
        type_const: f64,
    },
    /// Scan A_{r,q}/A_{p,q} over a grid of p.
    ApqScan {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        q: f64,
        #[arg(long = "p-min", default_value_t = 1e-4)]
        p_min: f64,
        /// Defaults to just below r.
        #[arg(long = "p-max")]
        p_max: Option<f64>,
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// Draw symmetric q-stable samples.
    StableSample {
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 10)]
        samples: usize,
    },
    /// Minima and weak-L1 lower bounds of F_n.
    HilbertTable {
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, default_value_t = 10_001)]
        cells: usize,
    },
    /// Structural lemma checks for F_n.
    LemmaCheck {
        /// Defaults to 1..=64.
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
    },
    /// ℓ_p projectivity construction checks.
    Projectivity {
        #[arg(long = "N", default_value_t = 12)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 20)]
        sandwich: usize,
    },
    /// Lower bounds for p-convexity constants.
    Convexity {
        #[arg(long)]
        space: String,
        /// One or more exponents; several give a monotone scan.
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Test a family against the L-convexity condition.
    Lconvexity {
        #[arg(long)]
        space: String,
        #[arg(long)]
        u: String,
        /// Vectors `x_1;x_2;...`, each comma-separated.
        #[arg(long)]
        xs: String,
        #[arg(long)]
        epsilon: f64,
    },
    /// Evaluate an expression on scalars or lattice elements.
    ExprEval {
        #[arg(long)]
        expr: String,
        /// Generator values `x_0;x_1;...`; each may be a comma-separated vector.
        #[arg(long)]
        at: String,
        /// Also report the quasi-norm of the result in this space.
        #[arg(long)]
        space: Option<String>,
    },
    /// Run the acceptance criteria.
    SelfTest {
        /// Group, name fragment or id of the criteria to run.
        #[arg(long)]
        filter: Option<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::FblNorm { .. } => "fbl-norm",
            Command::Apq { .. } => "apq",
            Command::MnBound { .. } => "mn-bound",
            Command::ApqScan { .. } => "apq-scan",
            Command::StableSample { .. } => "stable-sample",
            Command::HilbertTable { .. } => "hilbert-table",
            Command::LemmaCheck { .. } => "lemma-check",
            Command::Projectivity { .. } => "projectivity",
            Command::Convexity { .. } => "convexity",
            Command::Lconvexity { .. } => "lconvexity",
            Command::ExprEval { .. } => "expr-eval",
            Command::SelfTest { .. } => "self-test",
        }
    }
}

fn vectors(s: &str) -> freelat::Result<Vec<Vec<f64>>> {
    s.split(';')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(parse_vector)
        .collect()
}

fn run(command: &Command, seed: u64) -> freelat::Result<Report> {
    Ok(match command {
        Command::FblNorm {
            space,
            p,
            expr,
            budget,
            cert,
        } => {
            let space = CoordinateLattice::parse(space)?;
            let f = parse(expr)?;
            let budget: Budget = budget.parse()?;
            let cert = cert.as_deref().map(vectors).transpose()?;
            let b = free_norm::norm_bracket(&f, &space, *p, budget, seed, cert.as_deref())?;
            let rows = vec![vec![
                Cell::F(b.lower),
                Cell::F(b.upper),
                Cell::from(b.flags.admissibility_exact),
            ]];
            let mut body = serde_json::to_value(&b).expect("json");
            body["expr"] = Value::from(f.to_string());
            Report::new(body, vec!["lower", "upper", "admissibility_exact"], rows)
        }
        Command::Apq { p, q, mc } => {
            let value = stable::a_pq(*p, *q)?;
            let estimate = match mc {
                Some(n) => Some(stable::a_pq_monte_carlo(
                    *p,
                    &StableSpec::new(*q, seed, *n)?,
                )?),
                None => None,
            };
            let mut row = vec![Cell::F(*p), Cell::F(*q), Cell::F(value)];
            let mut columns = vec!["p", "q", "value"];
            if let Some(e) = &estimate {
                columns.extend(["mc_estimate", "mc_stderr", "mc_samples"]);
                row.extend([
                    Cell::F(e.estimate),
                    Cell::F(e.stderr),
                    Cell::from(e.samples),
                ]);
            }
            Report::new(
                json!({ "p": p, "q": q, "value": value, "monte_carlo": estimate }),
                columns,
                vec![row],
            )
        }
        Command::MnBound {
            p,
            r,
            q,
            type_const,
        } => {
            let b = stable::mn_constant_bound(*p, *r, *q, *type_const)?;
            let row = vec![
                Cell::F(b.p),
                Cell::F(b.r),
                Cell::F(b.q),
                Cell::F(b.ratio),
                Cell::F(b.bound),
            ];
            Report::new(b, vec!["p", "r", "q", "ratio", "bound"], vec![row])
        }
        Command::ApqScan {
            r,
            q,
            p_min,
            p_max,
            points,
        } => {
            let hi = p_max.unwrap_or(r - 1e-3);
            let s = stable::uniform_bound_scan(*r, *q, &stable::linear_grid(*p_min, hi, *points))?;
            let rows = s
                .rows
                .iter()
                .map(|row| vec![Cell::F(row.p), Cell::F(row.a_pq), Cell::F(row.ratio)])
                .collect();
            Report::new(s, vec!["p", "a_pq", "ratio"], rows)
        }
        Command::StableSample { q, samples } => {
            let xs = stable::sample_stable(&StableSpec::new(*q, seed, *samples)?)?;
            let rows = xs
                .iter()
                .enumerate()
                .map(|(i, x)| vec![Cell::from(i), Cell::F(*x)])
                .collect();
            Report::new(
                json!({ "q": q, "samples": xs }),
                vec!["index", "value"],
                rows,
            )
        }
        Command::HilbertTable { n, cells } => {
            let table = hilbert::divergence_table(n, *cells)?;
            let rows = table
                .iter()
                .map(|r| {
                    vec![
                        Cell::from(r.n),
                        Cell::F(r.grid_min),
                        Cell::F(r.log_2n_minus_1),
                        Cell::F(r.weak_l1_lb),
                        Cell::F(r.grid_tolerance),
                    ]
                })
                .collect();
            Report::new(
                json!({ "cells": cells, "rows": table }),
                vec![
                    "n",
                    "grid_min",
                    "log_2n_minus_1",
                    "weak_l1_lb",
                    "grid_tolerance",
                ],
                rows,
            )
        }
        Command::LemmaCheck { n } => {
            let ns: Vec<usize> = if n.is_empty() {
                (1..=64).collect()
            } else {
                n.clone()
            };
            let reports = ns
                .iter()
                .map(|&k| hilbert::f_n_lemma_check(k))
                .collect::<freelat::Result<Vec<_>>>()?;
            let failed: Vec<usize> = reports
                .iter()
                .filter(|r| !r.all_pass())
                .map(|r| r.n)
                .collect();
            let rows = reports
                .iter()
                .map(|r| {
                    vec![
                        Cell::from(r.n),
                        Cell::from(r.symmetry),
                        Cell::from(r.unimodality),
                        Cell::from(r.minima_ordering),
                        Cell::from(r.edge_branches),
                        Cell::F(r.max_symmetry_error),
                    ]
                })
                .collect();
            Report::new(
                json!({ "reports": reports }),
                vec![
                    "n",
                    "symmetry",
                    "unimodality",
                    "minima_ordering",
                    "edge_branches",
                    "max_symmetry_error",
                ],
                rows,
            )
            .with_verdict(failed.is_empty(), json!({ "failed_n": failed }))
        }
        Command::Projectivity {
            n,
            p,
            trials,
            sandwich,
        } => {
            let r = projectivity::projectivity_suite(*n, *p, *trials, *sandwich, seed)?;
            let bf = &r.ball_family;
            let ball_ok = bf.passed();
            let rows = vec![
                vec![
                    Cell::from("beta_alpha_identity"),
                    Cell::from(r.beta_alpha_identity),
                ],
                vec![
                    Cell::from("pairwise_disjointness"),
                    Cell::from(r.disjointness.passed()),
                ],
                vec![
                    Cell::from("norm_at_most_one"),
                    Cell::from(r.norm_bound.all_at_most_one),
                ],
                vec![Cell::from("norm_sandwich"), Cell::from(r.sandwich_ok)],
                vec![Cell::from("ball_family"), Cell::from(ball_ok)],
            ];
            let witness = json!({ "disjointness": r.disjointness.first_witness });
            let passed = r.passed();
            Report::new(r, vec!["property", "passed"], rows).with_verdict(passed, witness)
        }
        Command::Convexity { space, p, trials } => {
            let l = CoordinateLattice::parse(space)?;
            let reports = if p.len() == 1 {
                vec![qlat::p_convexity_lower_bound(&l, p[0], *trials, seed)?]
            } else {
                qlat::convexity_monotonicity_scan(&l, p, *trials, seed)?
            };
            let rows = reports
                .iter()
                .map(|r| {
                    vec![
                        Cell::F(r.exponent),
                        Cell::F(r.bound),
                        Cell::F(r.witness_exponent),
                        Cell::from(r.witness.len()),
                    ]
                })
                .collect();
            Report::new(
                json!({ "space": l, "reports": reports }),
                vec!["p", "bound", "witness_exponent", "witness_size"],
                rows,
            )
        }
        Command::Lconvexity {
            space,
            u,
            xs,
            epsilon,
        } => {
            let l = CoordinateLattice::parse(space)?;
            let violation =
                qlat::l_convexity_violation(&l, &parse_vector(u)?, &vectors(xs)?, *epsilon)?;
            Report::new(
                json!({ "epsilon": epsilon, "violation": violation }),
                vec!["epsilon", "violation"],
                vec![vec![Cell::F(*epsilon), Cell::from(violation)]],
            )
        }
        Command::ExprEval { expr, at, space } => {
            let f = parse(expr)?;
            let elems = vectors(at)?;
            let values = f.evaluate_lattice(&elems)?;
            let norm = match space {
                Some(s) => Some(CoordinateLattice::parse(s)?.quasi_norm(&values)?),
                None => None,
            };
            let rows = values
                .iter()
                .enumerate()
                .map(|(j, v)| vec![Cell::from(j), Cell::F(*v)])
                .collect();
            Report::new(
                json!({ "expr": f.to_string(), "values": values, "quasi_norm": norm }),
                vec!["coordinate", "value"],
                rows,
            )
        }
        Command::SelfTest { filter } => {
            let results = acceptance::run(&LogGamma::default(), filter.as_deref());
            let failed: Vec<u8> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
            let rows = results
                .iter()
                .map(|r| {
                    vec![
                        Cell::from(r.id as usize),
                        Cell::from(r.group),
                        Cell::from(r.name),
                        Cell::from(r.passed),
                        Cell::F(r.seconds),
                        Cell::from(r.detail.clone()),
                    ]
                })
                .collect();
            for r in &results {
                eprintln!("{}", r.line());
            }
            Report::new(
                json!({ "criteria": results }),
                vec!["id", "group", "name", "passed", "seconds", "detail"],
                rows,
            )
            .with_verdict(failed.is_empty(), json!({ "failed": failed }))
        }
    })
}

fn error_json(kind: &str, message: &str, witness: Value) -> String {
    json!({ "kind": kind, "message": message, "witness": witness }).to_string()
}

fn library_error(e: &Error) -> ExitCode {
    let witness = match e {
        Error::CertificateRejected { witness, lhs, rhs } => {
            json!({ "functional": witness, "lhs": lhs, "rhs": rhs })
        }
        Error::BracketInverted { lower, upper } => json!({ "lower": lower, "upper": upper }),
        _ => Value::Null,
    };
    eprintln!("error: {e}");
    eprintln!("{}", error_json(e.kind(), &e.to_string(), witness));
    ExitCode::from(if e.is_property_failure() {
        EXIT_PROPERTY
    } else {
        EXIT_VALIDATION
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(if code == 0 { 0 } else { EXIT_VALIDATION });
        }
    };
    let g = &cli.global;
    if let Some(t) = g.threads {
        if t == 0 {
            eprintln!(
                "{}",
                error_json("parameter", "--threads must be at least 1", Value::Null)
            );
            return ExitCode::from(EXIT_VALIDATION);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .expect("thread pool is configured once");
    }
    let report = match run(&cli.command, g.seed) {
        Ok(r) => r,
        Err(e) => return library_error(&e),
    };
    let mut config = serde_json::to_value(&cli).expect("json");
    config["global"]["format"] = serde_json::to_value(g.format()).expect("json");
    let timestamp = (!g.reproducible).then(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs())
    });
    let text = render(&report, cli.command.name(), &config, timestamp, g.format());
    let written = match &g.output {
        Some(path) => std::fs::write(path, &text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("{}", error_json("io", &e.to_string(), Value::Null));
        return ExitCode::from(EXIT_VALIDATION);
    }
    if report.verdict == Some(false) {
        eprintln!(
            "{}",
            error_json(
                "property-failure",
                &format!("{} property check failed", cli.command.name()),
                report.witness
            )
        );
        return ExitCode::from(EXIT_PROPERTY);
    }
    ExitCode::SUCCESS
}
