//! Command-line front end for the compatibility checks.
//!
//! Subcommands: `check` runs the closed-form criteria on a state or
//! probability file, `figure1` rasterizes the three-pure-state exclusion
//! region, `oracle` runs the randomized measurement search, and `dutchbook`
//! audits probability assignments for coherence.
//!
//! Exit codes: 0 every requested verdict is compatible (or coherent),
//! 1 some verdict is incompatible or a contradiction was found, 2 a
//! requested criterion has no closed form for the input shape, 3 input or
//! parameter errors. JSON reports are deterministic byte for byte: they
//! carry no timing, and every randomized path takes an explicit seed that
//! defaults to zero.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qsc_core::criteria::{
    check_bfm, check_classical, check_es, check_pairwise_pp, check_w, check_w_prime, decide_pp,
    PpAnalysis, PpStatus,
};
use qsc_core::dutchbook::{
    check_strong_consistency, dutch_book_conditional, dutch_book_exclusive, validate_conditional,
    validate_exclusive, BetBook, ConditionalAssignment, ExclusivePairAssignment,
    PossibilityDeclaration, RuleViolation, StrongConsistencyReport,
};
use qsc_core::linalg::Tolerances;
use qsc_core::oracle::{
    search_contradicting_odop, search_contradicting_povm_evidence, OracleConfig, OracleResult,
};
use qsc_core::pp3::figure1_region;
use qsc_core::states::{ClassicalAssignment, ClassicalFile, QuantumStatesFile, StateEnsemble};
use qsc_core::verdict::CompatibilityVerdict;

const SCHEMA: &str = "qsc/1";

#[derive(Parser)]
#[command(name = "qsc", about = "Compatibility checks for quantum state assignments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run compatibility criteria on a quantum or classical input file.
    Check {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        criterion: CriterionArg,
        /// Single tolerance applied to rank, orthogonality, and zero cuts.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Print witness details in text output.
        #[arg(long)]
        witness: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Seed for the constructive weak-compatibility search.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Rasterize the three-pure-state exclusion region at fixed c.
    Figure1 {
        #[arg(long)]
        c: f64,
        #[arg(long)]
        resolution: usize,
        /// Output prefix; writes PREFIX_region.csv and PREFIX_ellipse.csv.
        #[arg(long)]
        out: String,
    },
    /// Search for a contradicting measurement by seeded random restarts.
    Oracle {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Explore zero-padded embeddings with up to this many extra
        /// dimensions; a find then certifies a general-measurement
        /// contradiction in the original dimension.
        #[arg(long, default_value_t = 0)]
        extra_dims: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Audit probability assignments for coherence and strong consistency.
    Dutchbook {
        #[arg(long)]
        input: PathBuf,
        /// Possibility declaration checked against the file's outcome
        /// probabilities.
        #[arg(long)]
        possible: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CriterionArg {
    Es,
    Bfm,
    Pp,
    PairwisePp,
    W,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct OracleSection {
    trials: usize,
    seed: u64,
    extra_dims: usize,
    result: OracleResult,
    statement: String,
}

#[derive(Serialize)]
struct ExclusiveFinding {
    assignment: ExclusivePairAssignment,
    violations: Vec<RuleViolation>,
    book: Option<BetBook>,
}

#[derive(Serialize)]
struct ConditionalFinding {
    assignment: ConditionalAssignment,
    violations: Vec<RuleViolation>,
    book: Option<BetBook>,
}

#[derive(Serialize)]
struct DutchbookSection {
    exclusive: Vec<ExclusiveFinding>,
    conditional: Vec<ConditionalFinding>,
    #[serde(skip_serializing_if = "Option::is_none")]
    strong_consistency: Option<StrongConsistencyReport>,
}

/// Self-contained machine-readable result. Anything needed to re-validate
/// the verdicts (witnesses included) is serialized inline; timing is left
/// to the text output so that identical inputs give identical bytes.
#[derive(Serialize)]
struct Report {
    schema: &'static str,
    input: InputDigest,
    #[serde(skip_serializing_if = "Option::is_none")]
    possible_input: Option<InputDigest>,
    tolerances: Tolerances,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    notes: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    verdicts: Vec<CompatibilityVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pp: Option<PpAnalysis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dutchbook: Option<DutchbookSection>,
}

impl Report {
    fn new(input: InputDigest, tolerances: Tolerances) -> Self {
        Report {
            schema: SCHEMA,
            input,
            possible_input: None,
            tolerances,
            notes: Vec::new(),
            verdicts: Vec::new(),
            pp: None,
            oracle: None,
            dutchbook: None,
        }
    }

    fn exit_code(&self) -> u8 {
        let mut incompatible = false;
        let mut undecided = false;
        for v in &self.verdicts {
            incompatible |= !v.compatible;
        }
        if let Some(pp) = &self.pp {
            for status in [&pp.odop, &pp.povm] {
                match status {
                    PpStatus::Decided { verdict } => incompatible |= !verdict.compatible,
                    PpStatus::Undecided { .. } => undecided = true,
                }
            }
        }
        if let Some(oracle) = &self.oracle {
            incompatible |= oracle.result.found;
        }
        if let Some(db) = &self.dutchbook {
            let coherent = db
                .exclusive
                .iter()
                .all(|f| f.violations.is_empty() && f.book.is_none())
                && db
                    .conditional
                    .iter()
                    .all(|f| f.violations.is_empty() && f.book.is_none())
                && db
                    .strong_consistency
                    .as_ref()
                    .is_none_or(|sc| sc.violations.is_empty());
            incompatible |= !coherent;
        }
        if incompatible {
            1
        } else if undecided {
            2
        } else {
            0
        }
    }
}

/// Records of probability assignments to audit. `probs` is the outcome
/// distribution checked against a possibility declaration when one is
/// supplied.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DutchBookFile {
    #[serde(default)]
    exclusive: Vec<ExclusivePairAssignment>,
    #[serde(default)]
    conditional: Vec<ConditionalAssignment>,
    #[serde(default)]
    probs: Option<Vec<f64>>,
}

enum ParsedInput {
    Quantum(StateEnsemble),
    Classical(ClassicalAssignment),
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        use std::fmt::Write;
        write!(s, "{b:02x}").expect("writing to a string cannot fail");
        s
    })
}

fn read_with_digest(path: &Path) -> Result<(String, InputDigest)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let digest = InputDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    };
    let content = String::from_utf8(bytes).context("input is not valid UTF-8")?;
    Ok((content, digest))
}

fn parse_input(content: &str, tol: &Tolerances) -> Result<ParsedInput> {
    let quantum_err = match QuantumStatesFile::parse(content) {
        Ok(file) => {
            let ensemble = file.validate(tol).context("invalid quantum states file")?;
            return Ok(ParsedInput::Quantum(ensemble));
        }
        Err(e) => e,
    };
    let classical_err = match ClassicalFile::parse(content) {
        Ok(file) => {
            let assignment = file.validate().context("invalid classical assignment file")?;
            return Ok(ParsedInput::Classical(assignment));
        }
        Err(e) => e,
    };
    bail!(
        "input matches neither format: as quantum states, {quantum_err}; \
         as classical assignment, {classical_err}"
    )
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn tolerances_from(flag: Option<f64>) -> Result<Tolerances> {
    match flag {
        None => Ok(Tolerances::default()),
        Some(t) => {
            if !(t > 0.0 && t < 1.0) {
                bail!("tolerance must lie strictly between 0 and 1, got {t}");
            }
            Ok(Tolerances {
                tol_rank: t,
                tol_orth: t,
                tol_zero: t,
            })
        }
    }
}

fn render_verdict_line(v: &CompatibilityVerdict) -> String {
    let state = if v.compatible {
        "compatible"
    } else {
        "incompatible"
    };
    let boundary = if v.boundary { ", boundary" } else { "" };
    format!(
        "{}: {} (margin {:.6e}{})",
        v.criterion, state, v.margin, boundary
    )
}

/// Timing is text-only: the JSON report must stay byte-identical across
/// reruns of the same invocation.
fn print_report(report: &Report, format: Format, witness: bool, elapsed: std::time::Duration) {
    match format {
        Format::Json => {
            println!(
                "{}",
                serde_json::to_string_pretty(report).expect("report serialization cannot fail")
            );
        }
        Format::Text => {
            println!("input: {} (sha256 {})", report.input.path, report.input.sha256);
            for note in &report.notes {
                println!("note: {note}");
            }
            for v in &report.verdicts {
                println!("{}", render_verdict_line(v));
                if witness {
                    println!(
                        "  witness: {}",
                        serde_json::to_string(&v.witness).expect("witness serialization")
                    );
                }
            }
            if let Some(pp) = &report.pp {
                for status in [&pp.odop, &pp.povm] {
                    match status {
                        PpStatus::Decided { verdict } => {
                            println!("{}", render_verdict_line(verdict));
                            if witness {
                                println!(
                                    "  witness: {}",
                                    serde_json::to_string(&verdict.witness)
                                        .expect("witness serialization")
                                );
                            }
                        }
                        PpStatus::Undecided { criterion, reason } => {
                            println!(
                                "{criterion}: undecided, closed form unavailable ({reason}; \
                                 try `qsc oracle --input FILE`)"
                            );
                        }
                    }
                }
            }
            if let Some(oracle) = &report.oracle {
                println!(
                    "oracle: found={} best_score={:.6e} trials_used={}",
                    oracle.result.found, oracle.result.best_score, oracle.result.trials_used
                );
                println!("oracle: {}", oracle.statement);
            }
            if let Some(db) = &report.dutchbook {
                for f in &db.exclusive {
                    print_book_finding("exclusive", &f.violations, &f.book);
                }
                for f in &db.conditional {
                    print_book_finding("conditional", &f.violations, &f.book);
                }
                if let Some(sc) = &db.strong_consistency {
                    println!(
                        "strong consistency: {}",
                        if sc.strongly_consistent {
                            "holds"
                        } else {
                            "violated"
                        }
                    );
                    for v in &sc.violations {
                        println!(
                            "  finding: {}",
                            serde_json::to_string(v).expect("finding serialization")
                        );
                    }
                }
            }
            println!("elapsed: {:.3}s", elapsed.as_secs_f64());
        }
    }
}

fn print_book_finding(kind: &str, violations: &[RuleViolation], book: &Option<BetBook>) {
    let rules = if violations.is_empty() {
        "rules hold".to_string()
    } else {
        let names: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        format!("violates {}", names.join(", "))
    };
    match book {
        Some(b) => println!(
            "{kind}: {rules}; sure-loss book with payoffs [{:.6}, {:.6}, {:.6}] \
             and gains [{:.6}, {:.6}, {:.6}]",
            b.payoffs[0], b.payoffs[1], b.payoffs[2], b.gains[0], b.gains[1], b.gains[2]
        ),
        None => println!("{kind}: {rules}; no sure-loss book"),
    }
}

fn cmd_check(
    input: &Path,
    criterion: CriterionArg,
    tolerance: Option<f64>,
    witness: bool,
    format: Format,
    seed: u64,
) -> Result<u8> {
    let started = Instant::now();
    let tol = tolerances_from(tolerance)?;
    let (content, digest) = read_with_digest(input)?;
    let mut report = Report::new(digest, tol);
    match parse_input(&content, &tol)? {
        ParsedInput::Quantum(ensemble) => {
            if ensemble.len() < 2 {
                report
                    .notes
                    .push("single assignment: every criterion holds vacuously".to_string());
            } else {
                if matches!(criterion, CriterionArg::Es | CriterionArg::All) {
                    report.verdicts.push(check_es(&ensemble, &tol)?);
                }
                if matches!(criterion, CriterionArg::Bfm | CriterionArg::All) {
                    report.verdicts.push(check_bfm(&ensemble, &tol)?);
                }
                if matches!(criterion, CriterionArg::PairwisePp | CriterionArg::All) {
                    report.verdicts.push(check_pairwise_pp(&ensemble, &tol)?);
                }
                if matches!(criterion, CriterionArg::W | CriterionArg::All) {
                    report.verdicts.push(check_w(&ensemble, &tol, seed)?);
                    report.verdicts.push(check_w_prime(&ensemble, &tol, seed)?);
                }
                if matches!(criterion, CriterionArg::Pp | CriterionArg::All) {
                    report.pp = Some(decide_pp(&ensemble, &tol)?);
                }
            }
        }
        ParsedInput::Classical(assignment) => {
            if matches!(criterion, CriterionArg::PairwisePp) {
                bail!("pairwise post-Peierls is defined for quantum state inputs only");
            }
            if assignment.parties().len() < 2 {
                report
                    .notes
                    .push("single assignment: every criterion holds vacuously".to_string());
            } else {
                use qsc_core::verdict::Criterion;
                let all = check_classical(&assignment, &tol);
                let wanted: &[Criterion] = match criterion {
                    CriterionArg::Es => &[Criterion::ClassicalEs],
                    CriterionArg::Bfm => &[Criterion::ClassicalBfm],
                    CriterionArg::Pp => &[Criterion::ClassicalPp],
                    CriterionArg::W => &[Criterion::ClassicalW, Criterion::ClassicalWPrime],
                    CriterionArg::All => &[
                        Criterion::ClassicalEs,
                        Criterion::ClassicalBfm,
                        Criterion::ClassicalPp,
                        Criterion::ClassicalW,
                        Criterion::ClassicalWPrime,
                    ],
                    CriterionArg::PairwisePp => unreachable!("rejected above"),
                };
                report
                    .verdicts
                    .extend(all.into_iter().filter(|v| wanted.contains(&v.criterion)));
            }
        }
    }
    print_report(&report, format, witness, started.elapsed());
    Ok(report.exit_code())
}

fn cmd_figure1(c: f64, resolution: usize, out: &str) -> Result<u8> {
    let data = figure1_region(c, resolution)?;
    let region_path = PathBuf::from(format!("{out}_region.csv"));
    let ellipse_path = PathBuf::from(format!("{out}_ellipse.csv"));
    write_atomic(&region_path, &data.region_csv())?;
    write_atomic(&ellipse_path, &data.ellipse_csv())?;
    println!(
        "wrote {} ({} cells) and {} ({} boundary points)",
        region_path.display(),
        data.cells.len(),
        ellipse_path.display(),
        data.ellipse.len()
    );
    Ok(0)
}

fn cmd_oracle(
    input: &Path,
    trials: usize,
    seed: u64,
    extra_dims: usize,
    format: Format,
) -> Result<u8> {
    let started = Instant::now();
    let tol = Tolerances::default();
    let (content, digest) = read_with_digest(input)?;
    let ensemble = match parse_input(&content, &tol)? {
        ParsedInput::Quantum(ensemble) => ensemble,
        ParsedInput::Classical(_) => {
            bail!("the measurement search needs quantum state input")
        }
    };
    let cfg = OracleConfig {
        trials,
        seed,
        extra_dims,
        ..OracleConfig::default()
    };
    let result = if extra_dims > 0 {
        search_contradicting_povm_evidence(&ensemble, &cfg)
    } else {
        search_contradicting_odop(&ensemble, &cfg)
    };
    let statement = if result.found {
        "a contradicting measurement was found; joint incompatibility is proven".to_string()
    } else {
        "no contradicting measurement was found within the trial budget; \
         this is evidence of compatibility, not proof"
            .to_string()
    };
    let mut report = Report::new(digest, tol);
    report.oracle = Some(OracleSection {
        trials,
        seed,
        extra_dims,
        result,
        statement,
    });
    print_report(&report, format, false, started.elapsed());
    Ok(report.exit_code())
}

fn cmd_dutchbook(input: &Path, possible: Option<&Path>, format: Format) -> Result<u8> {
    let started = Instant::now();
    let (content, digest) = read_with_digest(input)?;
    let file: DutchBookFile =
        serde_json::from_str(&content).context("invalid dutch-book input file")?;
    let mut report = Report::new(digest, Tolerances::default());
    let exclusive = file
        .exclusive
        .iter()
        .map(|a| ExclusiveFinding {
            assignment: *a,
            violations: validate_exclusive(a, false),
            book: dutch_book_exclusive(a),
        })
        .collect();
    let conditional = file
        .conditional
        .iter()
        .map(|a| ConditionalFinding {
            assignment: *a,
            violations: validate_conditional(a),
            book: dutch_book_conditional(a),
        })
        .collect();
    let strong_consistency = match possible {
        None => None,
        Some(path) => {
            let (possible_content, possible_digest) = read_with_digest(path)?;
            let declaration: PossibilityDeclaration = serde_json::from_str(&possible_content)
                .context("invalid possibility declaration file")?;
            let probs = file.probs.as_ref().ok_or_else(|| {
                anyhow::anyhow!(
                    "a possibility declaration needs a `probs` array in the input file"
                )
            })?;
            if probs.len() != declaration.possible.len() {
                bail!(
                    "probs has {} outcomes but the declaration has {}",
                    probs.len(),
                    declaration.possible.len()
                );
            }
            report.possible_input = Some(possible_digest);
            Some(check_strong_consistency(probs, &declaration))
        }
    };
    report.dutchbook = Some(DutchbookSection {
        exclusive,
        conditional,
        strong_consistency,
    });
    print_report(&report, format, false, started.elapsed());
    Ok(report.exit_code())
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Check {
            input,
            criterion,
            tolerance,
            witness,
            format,
            seed,
        } => cmd_check(&input, criterion, tolerance, witness, format, seed),
        Command::Figure1 { c, resolution, out } => cmd_figure1(c, resolution, &out),
        Command::Oracle {
            input,
            trials,
            seed,
            extra_dims,
            format,
        } => cmd_oracle(&input, trials, seed, extra_dims, format),
        Command::Dutchbook {
            input,
            possible,
            format,
        } => cmd_dutchbook(&input, possible.as_deref(), format),
    }
}

fn main() -> ExitCode {
    // Clap exits with 2 on usage errors by default, which this tool
    // reserves for undecided verdicts; remap argument problems to 3.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 3 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(3)
        }
    }
}
