//! Command-line front end: parse a problem file, then verify its bracket
//! table, print a single bracket, or run the order-by-order extension driver.
//!
//! Exit codes: 0 success/solved, 2 obstructed (with report), 1 usage, parse
//! or verification error.

use clap::{Parser, Subcommand};
use liext::dsl::{self, ProblemDocument};
use liext::extend::{self, ExtensionResult};
use liext::linsolve::FreePolicy;
use liext::{ExtensionProblem, Rational, VectorField};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "liext",
    version,
    about = "Exact bracket tables and order-by-order extension of polynomial vector fields onto formal deformations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the exact Lie bracket of two named fields.
    Bracket {
        /// Problem file (.liext).
        input: PathBuf,
        /// The two fields, by name or 1-based position.
        #[arg(long, num_args = 2, value_names = ["I", "J"], required = true)]
        relation: Vec<String>,
        /// Emit JSON.
        #[arg(long)]
        json: bool,
    },
    /// Check every declared bracket relation exactly.
    Verify {
        /// Problem file (.liext).
        input: PathBuf,
        /// Emit JSON.
        #[arg(long)]
        json: bool,
    },
    /// Extend the fields order by order, reporting solved orders or the
    /// first obstruction.
    Extend {
        /// Problem file (.liext).
        input: PathBuf,
        /// Target order; defaults to the file's max_order option, else 2.
        #[arg(long)]
        order: Option<u32>,
        /// Emit JSON.
        #[arg(long)]
        json: bool,
        /// Keep undetermined unknowns symbolic instead of zero-filling them.
        #[arg(long)]
        keep_free: bool,
    },
    /// Parse and validate a problem file, reporting nothing else.
    ParseCheck {
        /// Problem file (.liext).
        input: PathBuf,
        /// Emit JSON.
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    // Die quietly on a closed pipe instead of panicking mid-print.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Bracket {
            input,
            relation,
            json,
        } => bracket(&input, &relation, json),
        Command::Verify { input, json } => verify(&input, json),
        Command::Extend {
            input,
            order,
            json,
            keep_free,
        } => run_extend(&input, order, json, keep_free),
        Command::ParseCheck { input, json } => parse_check(&input, json),
    };
    ExitCode::from(code)
}

fn load(path: &Path) -> Result<ProblemDocument, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {}", path.display(), e))?;
    dsl::parse(&text).map_err(|e| format!("{}: {}", path.display(), e))
}

fn fail(message: String) -> u8 {
    eprintln!("error: {}", message);
    1
}

fn parse_check(path: &Path, json: bool) -> u8 {
    match load(path) {
        Ok(_) => {
            if json {
                print!("{}", dsl::parse_check_json());
            } else {
                println!("ok");
            }
            0
        }
        Err(e) => fail(e),
    }
}

fn resolve_field(doc: &ProblemDocument, key: &str) -> Result<usize, String> {
    if let Some(i) = doc.field_index(key) {
        return Ok(i);
    }
    if let Ok(n) = key.parse::<usize>() {
        if n >= 1 && n <= doc.fields.len() {
            return Ok(n - 1);
        }
    }
    Err(format!("no field named `{}`", key))
}

fn bracket(path: &Path, relation: &[String], json: bool) -> u8 {
    let doc = match load(path) {
        Ok(doc) => doc,
        Err(e) => return fail(e),
    };
    let (i, j) = match (
        resolve_field(&doc, &relation[0]),
        resolve_field(&doc, &relation[1]),
    ) {
        (Ok(i), Ok(j)) => (i, j),
        (Err(e), _) | (_, Err(e)) => return fail(e),
    };
    let fields = doc.base_fields();
    let result: Result<VectorField<Rational>, _> = fields[i].lie_bracket(&fields[j], None);
    match result {
        Ok(b) => {
            let (a_name, b_name) = (&doc.fields[i].0, &doc.fields[j].0);
            if json {
                print!("{}", dsl::bracket_json(a_name, b_name, &b));
            } else {
                println!("[{}, {}] = {}", a_name, b_name, b);
            }
            0
        }
        Err(e) => fail(e.to_string()),
    }
}

fn verify(path: &Path, json: bool) -> u8 {
    let doc = match load(path) {
        Ok(doc) => doc,
        Err(e) => return fail(e),
    };
    let report = match extend::verify_structure(&doc.base_fields(), &doc.lie_spec(), None) {
        Ok(r) => r,
        Err(e) => return fail(e.to_string()),
    };
    if json {
        print!("{}", dsl::verification_json(&report, &doc.field_names()));
    } else {
        for check in report.failures() {
            println!(
                "relation [{}, {}] fails: difference = {}",
                doc.fields[check.pair.0].0, doc.fields[check.pair.1].0, check.difference
            );
        }
        let held = report.checks.iter().filter(|c| c.holds()).count();
        println!("{}/{} relations hold", held, report.relations_checked());
    }
    if report.all_hold() {
        0
    } else {
        1
    }
}

fn run_extend(path: &Path, order: Option<u32>, json: bool, keep_free: bool) -> u8 {
    let doc = match load(path) {
        Ok(doc) => doc,
        Err(e) => return fail(e),
    };
    let policy = if keep_free {
        Some(FreePolicy::KeepSymbolic)
    } else {
        None
    };
    let problem = match dsl::to_problem(&doc, order, policy) {
        Ok(p) => p,
        Err(e) => return fail(format!("{}: {}", path.display(), e)),
    };
    let result = match extend::extend(&problem) {
        Ok(r) => r,
        Err(e) => return fail(e.to_string()),
    };
    if json {
        print!("{}", dsl::extension_json(&result, &problem));
    } else {
        print_extension(&result, &problem);
    }
    if result.obstruction.is_some() {
        2
    } else {
        0
    }
}

fn print_extension(result: &ExtensionResult, problem: &ExtensionProblem) {
    for stage in &result.stages {
        println!("order {}: solved", stage.order);
        if !stage.pinned.is_empty() {
            println!("  pinned:");
            for (u, value) in &stage.pinned {
                println!("    {} = {}", u.name(), value);
            }
        }
        if !stage.free.is_empty() {
            let names: Vec<&str> = stage.free.iter().map(|u| u.name()).collect();
            println!("  free: {}", names.join(", "));
        }
        println!("  fields:");
        for (name, field) in problem.spec.field_names().iter().zip(&stage.fields) {
            println!("    {} = {}", name, field);
        }
    }
    match &result.obstruction {
        Some(report) => {
            println!("obstruction at order {}:", report.order);
            println!(
                "  relation [{}, {}], component d/{}",
                problem.spec.field_name(report.failing_relation.0),
                problem.spec.field_name(report.failing_relation.1),
                problem.vars.name(report.component)
            );
            println!("  residual = {}", report.residual);
            let parts: Vec<String> = report
                .certificate
                .iter()
                .map(|(idx, mult)| {
                    format!(
                        "{} * ({})",
                        mult,
                        dsl::describe_provenance(
                            &report.system.constraints()[*idx].provenance,
                            problem
                        )
                    )
                })
                .collect();
            println!(
                "  certificate: {} = {}",
                parts.join(" + "),
                report.residual_constant
            );
            println!(
                "extension obstructed at order {}; reached order {}",
                report.order, result.achieved_order
            );
        }
        None => {
            println!("extension solved up to order {}", result.achieved_order);
        }
    }
}
