//! Command dispatch for the `sbc` binary, written against abstract streams
//! so end-to-end tests can drive it in process.

use std::fmt::Display;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use sbcpa::bisim::{bisimilar, BisimResult, ExprLts, ItgLts};
use sbcpa::dsl::analyze_model;
use sbcpa::export::{export_dot, export_json};
use sbcpa::model::{codes, Diagnostic, Itg, Model, Severity};
use sbcpa::semantics::expand;
use sbcpa::sim::{
    enabled, initial_config, parse_scenario, simulate, step_interactive, validate_scenario,
    Scenario, SimOptions,
};

pub const EXIT_OK: u8 = 0;
/// Verification, equivalence or runtime failure.
pub const EXIT_FAIL: u8 = 1;
/// Usage or parse error.
pub const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "sbc",
    version,
    about = "Model checker and simulator for .sbc channel-based process models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Dot,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a model
    Check { file: PathBuf },
    /// Apply the composition rules to a definition and report or export the
    /// flat graph
    Expand {
        file: PathBuf,
        /// Definition or itg name to expand
        #[arg(long = "def")]
        def: String,
        /// Emit the expanded graph instead of a summary
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Write output here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check strong bisimilarity of two operands; `expand:<name>` selects
    /// the expanded form, a bare name the on-the-fly form
    Equiv {
        file: PathBuf,
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
    },
    /// Run a definition with guard evaluation and seeded random choice
    Simulate {
        file: PathBuf,
        #[arg(long = "def")]
        def: String,
        /// Scenario script (.scn) with steps and stubs
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run a whole seed range `A..B` (inclusive), one summary line each
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long = "max-steps", default_value_t = 1000)]
        max_steps: usize,
        /// Substitute type defaults for missing stub values
        #[arg(long = "lenient-stubs")]
        lenient_stubs: bool,
    },
    /// Step through a definition interactively (candidate indices on stdin)
    Step {
        file: PathBuf,
        #[arg(long = "def")]
        def: String,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long = "lenient-stubs")]
        lenient_stubs: bool,
    },
    /// Export a declared graph (or expanded definition) as DOT or JSON
    Export {
        file: PathBuf,
        /// Itg or definition name; definitions are expanded first
        #[arg(long = "def")]
        def: String,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Entry point shared by `main` and the end-to-end tests. Returns the
/// process exit code.
pub fn run_cli(
    args: &[String],
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> u8 {
    let color = std::env::var("SBC_COLOR").map(|v| v == "1").unwrap_or(false);
    let parsed = Cli::try_parse_from(std::iter::once("sbc".to_string()).chain(args.iter().cloned()));
    let cli = match parsed {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                EXIT_OK
            } else {
                let _ = write!(stderr, "{e}");
                EXIT_USAGE
            };
        }
    };
    match dispatch(cli.command, stdin, stdout, stderr, color) {
        Ok(code) => code,
        Err(failure) => {
            let _ = writeln!(stderr, "error: {}", failure.message);
            failure.code
        }
    }
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Display) -> Failure {
        Failure {
            code: EXIT_USAGE,
            message: message.to_string(),
        }
    }

    fn run(message: impl Display) -> Failure {
        Failure {
            code: EXIT_FAIL,
            message: message.to_string(),
        }
    }
}

fn dispatch(
    command: Command,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
    color: bool,
) -> Result<u8, Failure> {
    match command {
        Command::Check { file } => cmd_check(&file, stdout, stderr, color),
        Command::Expand {
            file,
            def,
            format,
            out,
        } => cmd_expand(&file, &def, format, out.as_deref(), stdout, stderr, color),
        Command::Equiv { file, left, right } => {
            cmd_equiv(&file, &left, &right, stdout, stderr, color)
        }
        Command::Simulate {
            file,
            def,
            scenario,
            seed,
            seeds,
            max_steps,
            lenient_stubs,
        } => cmd_simulate(
            &file,
            &def,
            scenario.as_deref(),
            seed,
            seeds.as_deref(),
            max_steps,
            lenient_stubs,
            stdout,
            stderr,
            color,
        ),
        Command::Step {
            file,
            def,
            scenario,
            lenient_stubs,
        } => cmd_step(
            &file,
            &def,
            scenario.as_deref(),
            lenient_stubs,
            stdin,
            stdout,
            stderr,
            color,
        ),
        Command::Export {
            file,
            def,
            format,
            out,
        } => cmd_export(&file, &def, format, out.as_deref(), stdout, stderr, color),
    }
}

// ---------------------------------------------------------------------------
// shared helpers

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read '{}': {e}", path.display())))
}

fn print_diagnostics(
    stderr: &mut dyn Write,
    file: &Path,
    diags: &[Diagnostic],
    color: bool,
) {
    for d in diags {
        let severity = match (d.severity, color) {
            (Severity::Error, true) => "\x1b[31merror\x1b[0m".to_string(),
            (Severity::Warning, true) => "\x1b[33mwarning\x1b[0m".to_string(),
            (sev, false) => sev.to_string(),
        };
        let location = match d.pos {
            Some(pos) => format!("{}:{}", file.display(), pos),
            None => file.display().to_string(),
        };
        let context = d
            .context
            .as_ref()
            .map(|c| format!(" (in {c})"))
            .unwrap_or_default();
        let _ = writeln!(
            stderr,
            "{location}: {severity}[{}]: {}{context}",
            d.code, d.message
        );
    }
}

fn diagnostics_exit_code(diags: &[Diagnostic]) -> u8 {
    if diags
        .iter()
        .any(|d| d.is_error() && d.code == codes::SYNTAX)
    {
        EXIT_USAGE
    } else {
        EXIT_FAIL
    }
}

/// Load, parse and validate a model; diagnostics go to stderr.
fn load_model(
    path: &Path,
    stderr: &mut dyn Write,
    color: bool,
) -> Result<Model, Failure> {
    let text = read_file(path)?;
    let outcome = analyze_model(&text);
    print_diagnostics(stderr, path, &outcome.diagnostics, color);
    outcome.model.ok_or(Failure {
        code: diagnostics_exit_code(&outcome.diagnostics),
        message: format!("'{}' failed validation", path.display()),
    })
}

fn load_scenario(
    path: &Path,
    model: &Model,
    stderr: &mut dyn Write,
    color: bool,
) -> Result<Scenario, Failure> {
    let text = read_file(path)?;
    let scenario = match parse_scenario(&text) {
        Ok(s) => s,
        Err(diags) => {
            print_diagnostics(stderr, path, &diags, color);
            return Err(Failure::usage(format!(
                "'{}' failed to parse",
                path.display()
            )));
        }
    };
    let diags = validate_scenario(model, &scenario);
    if !diags.is_empty() {
        print_diagnostics(stderr, path, &diags, color);
        return Err(Failure::usage(format!(
            "'{}' does not fit the model",
            path.display()
        )));
    }
    Ok(scenario)
}

fn expand_named(model: &Model, name: &str) -> Result<Itg, Failure> {
    expand(model, name).map_err(|e| Failure::usage(e.to_string()))
}

fn write_output(
    text: &str,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::usage(format!("cannot write '{}': {e}", path.display()))),
        None => {
            let _ = stdout.write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn render_export(itg: &Itg, format: Format) -> String {
    match format {
        Format::Dot => export_dot(itg),
        Format::Json => export_json(itg),
    }
}

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        format!("{n} {word}")
    } else {
        format!("{n} {word}s")
    }
}

// ---------------------------------------------------------------------------
// subcommands

fn cmd_check(
    file: &Path,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
    color: bool,
) -> Result<u8, Failure> {
    let model = load_model(file, stderr, color)?;
    let _ = writeln!(
        stdout,
        "{}, {}, OK",
        plural(model.itgs.len(), "ITG"),
        plural(model.defs.len(), "definition")
    );
    Ok(EXIT_OK)
}

fn cmd_expand(
    file: &Path,
    def: &str,
    format: Option<Format>,
    out: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
    color: bool,
) -> Result<u8, Failure> {
    let model = load_model(file, stderr, color)?;
    let itg = expand_named(&model, def)?;
    match format {
        Some(format) => write_output(&render_export(&itg, format), out, stdout)?,
        None => {
            let _ = writeln!(
                stdout,
                "expanded {}: {}, {}, initial {}",
                itg.name,
                plural(itg.states.len(), "state"),
                plural(itg.transitions.len(), "transition"),
                itg.initial_state
            );
        }
    }
    Ok(EXIT_OK)
}

enum Operand {
    Expanded(Itg),
    OnTheFly(String),
}

fn parse_operand(model: &Model, selector: &str) -> Result<Operand, Failure> {
    if let Some(name) = selector.strip_prefix("expand:") {
        Ok(Operand::Expanded(expand_named(model, name)?))
    } else {
        // fail early on unknown names
        sbcpa::resolve_refs(model, selector).map_err(|e| Failure::usage(e.to_string()))?;
        Ok(Operand::OnTheFly(selector.to_string()))
    }
}

fn cmd_equiv(
    file: &Path,
    left: &str,
    right: &str,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
    color: bool,
) -> Result<u8, Failure> {
    let model = load_model(file, stderr, color)?;
    let left = parse_operand(&model, left)?;
    let right = parse_operand(&model, right)?;

    let fly = |name: &str| ExprLts::for_name(&model, name).map_err(|e| Failure::usage(e.to_string()));
    let outcome: Result<BisimResult, _> = match (&left, &right) {
        (Operand::Expanded(a), Operand::Expanded(b)) => bisimilar(&ItgLts::new(a), &ItgLts::new(b)),
        (Operand::Expanded(a), Operand::OnTheFly(b)) => bisimilar(&ItgLts::new(a), &fly(b)?),
        (Operand::OnTheFly(a), Operand::Expanded(b)) => bisimilar(&fly(a)?, &ItgLts::new(b)),
        (Operand::OnTheFly(a), Operand::OnTheFly(b)) => bisimilar(&fly(a)?, &fly(b)?),
    };
    let result = outcome.map_err(|e| Failure::run(e.to_string()))?;
    if result.bisimilar {
        let _ = writeln!(stdout, "bisimilar");
        Ok(EXIT_OK)
    } else {
        let _ = writeln!(stdout, "not bisimilar");
        if let Some(witness) = result.witness {
            let _ = writeln!(stdout, "{witness}");
        }
        Ok(EXIT_FAIL)
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    file: &Path,
    def: &str,
    scenario_path: Option<&Path>,
    seed: u64,
    seeds: Option<&str>,
    max_steps: usize,
    lenient_stubs: bool,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
    color: bool,
) -> Result<u8, Failure> {
    let model = load_model(file, stderr, color)?;
    let scenario = match scenario_path {
        Some(p) => Some(load_scenario(p, &model, stderr, color)?),
        None => None,
    };
    let opts = SimOptions { lenient_stubs };
    match seeds {
        Some(range) => {
            let (from, to) = parse_seed_range(range)?;
            for seed in from..=to {
                let trace = simulate(&model, def, scenario.as_ref(), seed, max_steps, opts)
                    .map_err(|e| Failure::run(e.to_string()))?;
                let _ = writeln!(
                    stdout,
                    "seed {seed}: {}, {}, env: {}",
                    plural(trace.steps.len(), "step"),
                    trace.terminal,
                    trace.final_env
                );
            }
        }
        None => {
            let trace = simulate(&model, def, scenario.as_ref(), seed, max_steps, opts)
                .map_err(|e| Failure::run(e.to_string()))?;
            let _ = write!(stdout, "{}", trace.render());
        }
    }
    Ok(EXIT_OK)
}

fn parse_seed_range(range: &str) -> Result<(u64, u64), Failure> {
    let parts: Vec<&str> = range.split("..").collect();
    let bad = || Failure::usage(format!("invalid --seeds range '{range}', expected A..B"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let from: u64 = parts[0].parse().map_err(|_| bad())?;
    let to: u64 = parts[1].parse().map_err(|_| bad())?;
    if from > to {
        return Err(bad());
    }
    Ok((from, to))
}

#[allow(clippy::too_many_arguments)]
fn cmd_step(
    file: &Path,
    def: &str,
    scenario_path: Option<&Path>,
    lenient_stubs: bool,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
    color: bool,
) -> Result<u8, Failure> {
    let model = load_model(file, stderr, color)?;
    let scenario = match scenario_path {
        Some(p) => Some(load_scenario(p, &model, stderr, color)?),
        None => None,
    };
    let opts = SimOptions { lenient_stubs };
    let mut config = initial_config(&model, def).map_err(|e| Failure::usage(e.to_string()))?;
    let mut pos = 0usize;
    let mut fired = 0usize;
    loop {
        let script = scenario.as_ref().map(|s| (s, pos));
        let candidates = enabled(&model, &config, script).map_err(|e| Failure::run(e.to_string()))?;
        let _ = writeln!(stdout, "at {} | env: {}", config.node.render(), config.env);
        if candidates.is_empty() {
            let _ = writeln!(stdout, "no enabled transitions");
            return Ok(EXIT_OK);
        }
        for (i, c) in candidates.iter().enumerate() {
            let _ = writeln!(stdout, "  [{i}] {}", c.prefix.render_triple());
        }
        let _ = write!(stdout, "choose> ");
        let _ = stdout.flush();
        let mut line = String::new();
        if stdin
            .read_line(&mut line)
            .map_err(|e| Failure::run(e.to_string()))?
            == 0
        {
            return Ok(EXIT_OK); // EOF ends the session
        }
        let line = line.trim();
        if line.is_empty() || line == "q" || line == "quit" {
            return Ok(EXIT_OK);
        }
        let choice: usize = match line.parse() {
            Ok(i) => i,
            Err(_) => {
                let _ = writeln!(stdout, "enter a candidate index or 'q'");
                continue;
            }
        };
        match step_interactive(&model, &config, choice, script, opts) {
            Ok((next, mut step, consumed)) => {
                fired += 1;
                step.index = fired;
                let _ = writeln!(stdout, "{}", step.render());
                if consumed {
                    pos += 1;
                }
                config = next;
            }
            Err(e) => {
                let _ = writeln!(stdout, "error: {e}");
            }
        }
    }
}

fn cmd_export(
    file: &Path,
    def: &str,
    format: Format,
    out: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
    color: bool,
) -> Result<u8, Failure> {
    let model = load_model(file, stderr, color)?;
    let itg = expand_named(&model, def)?;
    write_output(&render_export(&itg, format), out, stdout)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seed_range("0..9").unwrap(), (0, 9));
        assert_eq!(parse_seed_range("5..5").unwrap(), (5, 5));
        assert!(parse_seed_range("9..0").is_err());
        assert!(parse_seed_range("x..1").is_err());
        assert!(parse_seed_range("3").is_err());
    }

    #[test]
    fn plural_forms() {
        assert_eq!(plural(1, "ITG"), "1 ITG");
        assert_eq!(plural(3, "ITG"), "3 ITGs");
        assert_eq!(plural(1, "definition"), "1 definition");
    }
}
