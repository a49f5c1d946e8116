//! Batch front end: build or load a diagram, dispatch one computation, and
//! emit a canonical JSON report.
//!
//! Exit status: 0 when every check in the report passes, 1 when some check
//! fails or the solver refuses the input, 2 on usage, file, or parse errors.
//! With `--out` the JSON goes to the file and a plain-text summary table to
//! standard output; without it the JSON itself is printed.  Reports are
//! canonical (sorted keys, fixed float formatting), so a fixed `--seed`
//! fixes the output bytes.

use charvar::bordism::{composition_check, ElementaryBordism};
use charvar::census::{
    blowup_triple_check, generator_census, kunneth_check, verify_move, MoveDescriptor,
};
use charvar::diagram::{CurveFamily, HeegaardDiagram};
use charvar::report::canonical_json;
use charvar::solver::SolverConfig;
use charvar::sur::{genus0_uniqueness, solve_sur};
use charvar::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "charvar",
    version,
    about = "Censuses and verifiers for character varieties of pointed Heegaard diagrams"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    /// Standard genus-g sphere diagram (pair with --genus)
    S3,
    /// The product of a sphere and a circle
    S2xs1,
    /// Lens space (pair with --p and --q)
    Lens,
}

/// One diagram, either from a JSON file or from a built-in family.
#[derive(Args, Clone)]
struct DiagramArgs {
    /// Diagram JSON file
    #[arg(long = "in", value_name = "FILE", conflicts_with = "family")]
    input: Option<PathBuf>,
    /// Built-in diagram family
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    /// Genus for the s3 family
    #[arg(long, default_value_t = 1)]
    genus: u16,
    /// Lens order p
    #[arg(long)]
    p: Option<u64>,
    /// Lens twist q
    #[arg(long, default_value_t = 1)]
    q: u64,
}

fn load_diagram(path: &Path) -> Result<HeegaardDiagram> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    HeegaardDiagram::from_json_str(&text)
}

fn family_diagram(family: FamilyArg, genus: u16, p: Option<u64>, q: u64) -> Result<HeegaardDiagram> {
    match family {
        FamilyArg::S3 => Ok(HeegaardDiagram::s3_genus(genus)),
        FamilyArg::S2xs1 => Ok(HeegaardDiagram::s2xs1()),
        FamilyArg::Lens => {
            let p = p.ok_or_else(|| {
                Error::InvalidParameter("the lens family needs --p".to_string())
            })?;
            HeegaardDiagram::lens(p, q)
        }
    }
}

impl DiagramArgs {
    fn build(&self) -> Result<HeegaardDiagram> {
        match (&self.input, self.family) {
            (Some(path), None) => load_diagram(path),
            (None, Some(family)) => family_diagram(family, self.genus, self.p, self.q),
            _ => Err(Error::InvalidParameter(
                "give a diagram with --in FILE or --family".to_string(),
            )),
        }
    }
}

/// Two diagrams for a connected-sum comparison.  Files come first, then
/// families in order; each lens occurrence consumes the next --p/--q pair
/// and each s3 occurrence the next --genus.
#[derive(Args)]
struct KunnethArgs {
    /// Diagram JSON files
    #[arg(long = "in", value_name = "FILE")]
    input: Vec<PathBuf>,
    /// Built-in diagram families
    #[arg(long, value_enum)]
    family: Vec<FamilyArg>,
    /// Genus values for s3 families, in order
    #[arg(long)]
    genus: Vec<u16>,
    /// Lens orders, in order
    #[arg(long)]
    p: Vec<u64>,
    /// Lens twists, in order
    #[arg(long)]
    q: Vec<u64>,
}

impl KunnethArgs {
    fn build(&self) -> Result<(HeegaardDiagram, HeegaardDiagram)> {
        let mut diagrams = Vec::new();
        for path in &self.input {
            diagrams.push(load_diagram(path)?);
        }
        let mut genus = self.genus.iter().copied();
        let mut p = self.p.iter().copied();
        let mut q = self.q.iter().copied();
        for family in &self.family {
            diagrams.push(match family {
                FamilyArg::S3 => HeegaardDiagram::s3_genus(genus.next().unwrap_or(1)),
                FamilyArg::S2xs1 => HeegaardDiagram::s2xs1(),
                FamilyArg::Lens => {
                    let p = p.next().ok_or_else(|| {
                        Error::InvalidParameter("each lens family needs a --p".to_string())
                    })?;
                    HeegaardDiagram::lens(p, q.next().unwrap_or(1))?
                }
            });
        }
        if diagrams.len() != 2 {
            return Err(Error::InvalidParameter(format!(
                "the connected-sum comparison needs exactly two diagrams, got {}",
                diagrams.len()
            )));
        }
        let right = diagrams.pop().expect("two diagrams");
        let left = diagrams.pop().expect("two diagrams");
        Ok((left, right))
    }
}

#[derive(Args, Clone)]
struct SolveArgs {
    /// Refinement starts; the default scales with genus
    #[arg(long)]
    starts: Option<usize>,
    /// Seed for the start sampler
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Convergence tolerance of the refiner
    #[arg(long)]
    tol: Option<f64>,
    /// Write the JSON report here and print a summary table instead
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

impl SolveArgs {
    fn config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::with_seed(self.seed);
        cfg.starts = self.starts;
        if let Some(t) = self.tol {
            cfg.converge_tol = t;
        }
        cfg
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MoveArg {
    Isotopy,
    Handleslide,
    Stabilize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CurvesArg {
    Alpha,
    Beta,
}

impl From<CurvesArg> for CurveFamily {
    fn from(c: CurvesArg) -> CurveFamily {
        match c {
            CurvesArg::Alpha => CurveFamily::Alpha,
            CurvesArg::Beta => CurveFamily::Beta,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PieceArg {
    /// Genus-raising correspondence
    Raise,
    /// Genus-lowering correspondence
    Lower,
    /// The diagonal correspondence
    Cylinder,
}

impl PieceArg {
    /// The elementary piece whose incoming end has the given genus.
    fn at_incoming_genus(self, genus: u16) -> Result<ElementaryBordism> {
        Ok(match self {
            PieceArg::Raise => ElementaryBordism::genus_raising(genus),
            PieceArg::Lower => {
                if genus == 0 {
                    return Err(Error::InvalidParameter(
                        "a genus-lowering piece needs incoming genus at least 1".to_string(),
                    ));
                }
                ElementaryBordism::genus_lowering(genus - 1)
            }
            PieceArg::Cylinder => ElementaryBordism::cylinder(genus),
        })
    }
}

const MAX_RANK: u32 = 4;

fn check_rank(rank: u32) -> Result<()> {
    if !(2..=MAX_RANK).contains(&rank) {
        return Err(Error::InvalidParameter(format!(
            "rank must lie in 2..={MAX_RANK}, got {rank}"
        )));
    }
    Ok(())
}

#[derive(Subcommand)]
enum Verb {
    /// Solve a diagram's intersection system and classify the components
    Census {
        #[command(flatten)]
        diagram: DiagramArgs,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// First homology and the component-count prediction, without solving
    Euler {
        #[command(flatten)]
        diagram: DiagramArgs,
        /// Write the JSON report here and print a summary table instead
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Compare a connected-sum census with the product of its factors
    Kunneth {
        #[command(flatten)]
        diagrams: KunnethArgs,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Check that a diagram move leaves the census invariant
    VerifyMove {
        #[command(flatten)]
        diagram: DiagramArgs,
        #[command(flatten)]
        solve: SolveArgs,
        /// Move to apply
        #[arg(long = "move", value_enum)]
        kind: MoveArg,
        /// Curve family the move acts on
        #[arg(long, value_enum, default_value = "alpha")]
        curves: CurvesArg,
        /// Index of the moved curve
        #[arg(long, default_value_t = 0)]
        curve: usize,
        /// Index of the curve slid over (handleslides)
        #[arg(long, default_value_t = 1)]
        over: usize,
        /// Conjugating or connecting path, written like "a1 b1^-1"
        #[arg(long, default_value = "b1")]
        path: String,
        /// Orientation of the slide, +1 or -1
        #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
        sign: i8,
    },
    /// Census the three pairwise genus-one diagrams of one blowup
    Blowup {
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Compose two elementary correspondences and verify the composite
    ComposeCheck {
        /// Genus of the incoming end of the first piece
        #[arg(long, default_value_t = 1)]
        genus: u16,
        #[arg(long, value_enum, default_value = "raise")]
        first: PieceArg,
        #[arg(long, value_enum, default_value = "lower")]
        second: PieceArg,
        /// Number of sampled chains
        #[arg(long, default_value_t = 50)]
        samples: usize,
        /// Seed for the samplers
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the JSON report here and print a summary table instead
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Higher-rank census of a diagram over SU(rank)
    SurCensus {
        #[command(flatten)]
        diagram: DiagramArgs,
        /// Rank of the special unitary group, 2 to 4
        #[arg(long, default_value_t = 2)]
        rank: u32,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Uniqueness of the genus-zero puncture system at a given rank
    Genus0 {
        /// Rank of the special unitary group, 2 to 4
        #[arg(long, default_value_t = 2)]
        rank: u32,
        #[command(flatten)]
        solve: SolveArgs,
    },
}

/// Prints the checks of a report as a fixed-width table, or the top-level
/// scalars when the report carries no checks.
fn print_summary(value: &Value) {
    let checks = value.get("checks").and_then(Value::as_array);
    match checks {
        Some(checks) if !checks.is_empty() => {
            let width = checks
                .iter()
                .filter_map(|c| c.get("name").and_then(Value::as_str))
                .map(str::len)
                .max()
                .unwrap_or(5)
                .max(5);
            println!("{:<width$}  {:<6}  detail", "check", "status");
            for check in checks {
                let name = check.get("name").and_then(Value::as_str).unwrap_or("?");
                let pass = check.get("pass").and_then(Value::as_bool).unwrap_or(false);
                let detail = check.get("detail").and_then(Value::as_str).unwrap_or("");
                println!("{name:<width$}  {:<6}  {detail}", if pass { "ok" } else { "FAIL" });
            }
        }
        _ => {
            if let Value::Object(map) = value {
                for (key, val) in map {
                    if !val.is_object() && !val.is_array() {
                        println!("{key}: {val}");
                    }
                }
            }
        }
    }
    let overall = value.get("pass").and_then(Value::as_bool).unwrap_or(true);
    println!("overall: {}", if overall { "pass" } else { "FAIL" });
}

/// Canonical JSON to `--out` plus a summary table on standard output, or
/// the canonical JSON itself when no path is given.
fn emit(value: &Value, out: Option<&Path>) -> Result<()> {
    let text = canonical_json(value);
    match out {
        Some(path) => {
            std::fs::write(path, &text)?;
            print_summary(value);
        }
        None => println!("{text}"),
    }
    Ok(())
}

/// Runs one verb and reports whether every check passed.
fn run(verb: &Verb) -> Result<bool> {
    match verb {
        Verb::Census { diagram, solve } => {
            let d = diagram.build()?;
            let report = generator_census(&d, &solve.config())?;
            emit(&report.to_value()?, solve.out.as_deref())?;
            Ok(report.pass)
        }
        Verb::Euler { diagram, out } => {
            let d = diagram.build()?;
            let h1 = d.h1_invariants()?;
            let value = json!({
                "diagram": d.to_json_value()?,
                "h1": { "free_rank": h1.free_rank, "torsion": h1.torsion },
                "euler_prediction": charvar::census::predict_euler(&h1),
            });
            emit(&value, out.as_deref())?;
            Ok(true)
        }
        Verb::Kunneth { diagrams, solve } => {
            let (left, right) = diagrams.build()?;
            let report = kunneth_check(&left, &right, &solve.config())?;
            emit(&report.to_value()?, solve.out.as_deref())?;
            Ok(report.pass)
        }
        Verb::VerifyMove { diagram, solve, kind, curves, curve, over, path, sign } => {
            let d = diagram.build()?;
            let descriptor = match kind {
                MoveArg::Isotopy => MoveDescriptor::Isotopy {
                    family: (*curves).into(),
                    curve: *curve,
                    path: path.parse()?,
                },
                MoveArg::Handleslide => MoveDescriptor::Handleslide {
                    family: (*curves).into(),
                    curve: *curve,
                    over: *over,
                    path: path.parse()?,
                    sign: *sign,
                },
                MoveArg::Stabilize => MoveDescriptor::Stabilize,
            };
            let report = verify_move(&d, &descriptor, &solve.config())?;
            emit(&report.to_value()?, solve.out.as_deref())?;
            Ok(report.pass)
        }
        Verb::Blowup { solve } => {
            let report = blowup_triple_check(&solve.config())?;
            emit(&report.to_value()?, solve.out.as_deref())?;
            Ok(report.pass)
        }
        Verb::ComposeCheck { genus, first, second, samples, seed, out } => {
            let first = first.at_incoming_genus(*genus)?;
            let second = second.at_incoming_genus(first.outgoing_genus())?;
            let report = composition_check(&first, &second, *samples, *seed)?;
            emit(&report.to_value(), out.as_deref())?;
            Ok(report.pass)
        }
        Verb::SurCensus { diagram, rank, solve } => {
            check_rank(*rank)?;
            let d = diagram.build()?;
            let report = solve_sur(&d, *rank, &solve.config())?;
            emit(&report.to_value()?, solve.out.as_deref())?;
            Ok(report.pass)
        }
        Verb::Genus0 { rank, solve } => {
            check_rank(*rank)?;
            let report = genus0_uniqueness(*rank, &solve.config())?;
            emit(&report.to_value(), solve.out.as_deref())?;
            Ok(report.pass)
        }
    }
}

fn exit_for(err: &Error) -> ExitCode {
    match err {
        Error::Io(_)
        | Error::Json(_)
        | Error::MalformedWord(_)
        | Error::InvalidParameter(_)
        | Error::InvalidMove(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.verb) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err}");
            exit_for(&err)
        }
    }
}
