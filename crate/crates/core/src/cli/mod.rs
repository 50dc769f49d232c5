//! The `safeplc` command line: each subcommand is a `cmd_*` function so the
//! whole pipeline can be driven in-process.
//!
//! Exit codes: 0 success, 1 usage error, 2 failed stage (including I/O),
//! 3 the simulated board entered panic mode.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::b0::{expr_to_string, parse, typecheck, TypedModel};
use crate::backend::{compile_a, compile_b, disasm_a, disasm_b, CostTable};
use crate::firmware::{bootload, link, LoadedFirmware, SeqConfig, MAGIC};
use crate::relay::{parse_relay, translate};
use crate::safesim::{run_scenario, Scenario, Status, Trace};
use crate::verifier::{export_pos, generate_pos, prove_all, witness_text, ProofObligation, ProofResult, ProofStatus, DEFAULT_BUDGET};
use crate::wcet::analyze;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_STAGE: i32 = 2;
pub const EXIT_PANIC: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Read,
    Parse,
    Typecheck,
    Prove,
    Compile,
    Link,
    Bootload,
    Wcet,
    Scenario,
    Relay,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Read => "read",
            Stage::Parse => "parse",
            Stage::Typecheck => "typecheck",
            Stage::Prove => "prove",
            Stage::Compile => "compile",
            Stage::Link => "link",
            Stage::Bootload => "bootload",
            Stage::Wcet => "wcet",
            Stage::Scenario => "scenario",
            Stage::Relay => "relay",
            Stage::Write => "write",
        })
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{stage}: {msg}")]
    Stage { stage: Stage, msg: String },
}

impl CliError {
    fn stage(stage: Stage, e: impl fmt::Display) -> Self {
        CliError::Stage { stage, msg: e.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        EXIT_STAGE
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Io { path: path.into(), source })
}

fn write_file(path: &Path, data: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, data).map_err(|source| CliError::Io { path: path.into(), source })
}

fn front_end(src: &str) -> Result<TypedModel, CliError> {
    let m = parse(src).map_err(|e| CliError::stage(Stage::Parse, e))?;
    typecheck(&m).map_err(|e| CliError::stage(Stage::Typecheck, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PoSummary {
    pub total: usize,
    pub proved_interval: usize,
    pub proved_enum: usize,
    pub unproven: usize,
    pub counterexample: usize,
}

impl PoSummary {
    fn of(results: &[ProofResult]) -> Self {
        let mut s = PoSummary { total: results.len(), ..Default::default() };
        for r in results {
            match r.status {
                ProofStatus::ProvedInterval => s.proved_interval += 1,
                ProofStatus::ProvedEnum => s.proved_enum += 1,
                ProofStatus::Unproven => s.unproven += 1,
                ProofStatus::Counterexample(_) => s.counterexample += 1,
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Ok(String),
    /// Passed only because `--allow-unproven` was given.
    Flagged(String),
    Failed(String),
    Skipped,
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub budget: u64,
    pub seq: SeqConfig,
    pub allow_unproven: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { budget: DEFAULT_BUDGET, seq: SeqConfig::default(), allow_unproven: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildReport {
    pub model: Option<String>,
    pub stages: Vec<(Stage, Outcome)>,
    pub pos: Option<PoSummary>,
    /// One line per PO that is not proved.
    pub open_pos: Vec<String>,
    pub image_sizes: Option<(usize, usize)>,
    pub bundle_crc: Option<u32>,
    pub wcet: Option<u64>,
    pub bundle: Option<Vec<u8>>,
    pub bundle_path: Option<PathBuf>,
}

impl BuildReport {
    pub fn ok(&self) -> bool {
        self.bundle.is_some()
    }

    pub fn unproven_linked(&self) -> bool {
        self.stages.iter().any(|(_, o)| matches!(o, Outcome::Flagged(_)))
    }

    pub fn exit_code(&self) -> i32 {
        if self.ok() {
            EXIT_OK
        } else {
            EXIT_STAGE
        }
    }
}

impl fmt::Display for BuildReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.unproven_linked() {
            writeln!(f, "!!! WARNING: bundle contains UNPROVEN proof obligations (--allow-unproven) !!!")?;
        }
        writeln!(f, "model {}", self.model.as_deref().unwrap_or("?"))?;
        for (stage, o) in &self.stages {
            let (tag, detail) = match o {
                Outcome::Ok(d) => ("ok", d.as_str()),
                Outcome::Flagged(d) => ("UNPROVEN", d.as_str()),
                Outcome::Failed(d) => ("FAILED", d.as_str()),
                Outcome::Skipped => ("skipped", ""),
            };
            writeln!(f, "{}", format!("  {:<10} {:<9} {detail}", stage.to_string(), tag).trim_end())?;
        }
        for l in &self.open_pos {
            writeln!(f, "    {l}")?;
        }
        if let Some(p) = &self.bundle_path {
            writeln!(f, "bundle written to {}", p.display())?;
        }
        Ok(())
    }
}

fn po_line(po: &ProofObligation, r: &ProofResult) -> String {
    let mut s = format!("PO {} {} at {}: {}", po.id, po.kind, po.loc, r.status.name());
    match &r.status {
        ProofStatus::Counterexample(w) => s.push_str(&format!(" {}", witness_text(w))),
        ProofStatus::Unproven => s.push_str(&format!(" goal {}", expr_to_string(&po.goal))),
        _ => {}
    }
    s
}

/// Runs every stage on B0 source text. Stops at the first failure.
pub fn build(src: &str, opts: &BuildOptions) -> BuildReport {
    let mut r = BuildReport {
        model: None,
        stages: vec![],
        pos: None,
        open_pos: vec![],
        image_sizes: None,
        bundle_crc: None,
        wcet: None,
        bundle: None,
        bundle_path: None,
    };
    let order = [Stage::Parse, Stage::Typecheck, Stage::Prove, Stage::Compile, Stage::Link, Stage::Bootload, Stage::Wcet];
    let fail = |r: &mut BuildReport, stage: Stage, msg: String| {
        r.stages.push((stage, Outcome::Failed(msg)));
        for s in order.iter().skip_while(|s| **s != stage).skip(1) {
            r.stages.push((*s, Outcome::Skipped));
        }
    };

    let model = match parse(src) {
        Ok(m) => m,
        Err(e) => {
            fail(&mut r, Stage::Parse, e.to_string());
            return r;
        }
    };
    r.model = Some(model.name.clone());
    r.stages.push((Stage::Parse, Outcome::Ok(String::new())));
    let tm = match typecheck(&model) {
        Ok(tm) => tm,
        Err(e) => {
            fail(&mut r, Stage::Typecheck, e.to_string());
            return r;
        }
    };
    r.stages.push((Stage::Typecheck, Outcome::Ok(String::new())));

    let pos = generate_pos(&tm);
    let results = prove_all(&pos, opts.budget);
    let sum = PoSummary::of(&results);
    r.pos = Some(sum);
    r.open_pos = pos.iter().zip(&results).filter(|(_, x)| !x.status.is_proved()).map(|(p, x)| po_line(p, x)).collect();
    let detail = format!(
        "{} POs: {} proved ({} interval, {} enumeration), {} unproven, {} counterexamples",
        sum.total,
        sum.proved_interval + sum.proved_enum,
        sum.proved_interval,
        sum.proved_enum,
        sum.unproven,
        sum.counterexample
    );
    // A falsified obligation never reaches the linker, whatever the flags.
    if sum.counterexample > 0 || (sum.unproven > 0 && !opts.allow_unproven) {
        fail(&mut r, Stage::Prove, detail);
        return r;
    }
    r.stages.push((Stage::Prove, if sum.unproven > 0 { Outcome::Flagged(detail) } else { Outcome::Ok(detail) }));

    let images = compile_a(&tm).and_then(|a| Ok((a, compile_b(&tm)?)));
    let (a, b) = match images {
        Ok(x) => x,
        Err(e) => {
            fail(&mut r, Stage::Compile, e.to_string());
            return r;
        }
    };
    r.image_sizes = Some((a.code.len(), b.code.len()));
    r.stages.push((Stage::Compile, Outcome::Ok(format!("image A {} bytes, image B {} bytes", a.code.len(), b.code.len()))));

    let bundle = match link(&a, &b, &opts.seq) {
        Ok(x) => x,
        Err(e) => {
            fail(&mut r, Stage::Link, e.to_string());
            return r;
        }
    };
    let fw = match bootload(&bundle) {
        Ok(fw) => fw,
        Err(e) => {
            r.stages.push((Stage::Link, Outcome::Ok(String::new())));
            fail(&mut r, Stage::Bootload, e.to_string());
            return r;
        }
    };
    r.bundle_crc = Some(fw.bundle_crc());
    r.stages.push((Stage::Link, Outcome::Ok(format!("bundle {} bytes, crc {:#010x}", bundle.len(), fw.bundle_crc()))));
    r.stages.push((Stage::Bootload, Outcome::Ok("integrity verified".into())));

    match analyze(fw.image_b(), &CostTable::default()) {
        Ok(w) => {
            r.wcet = Some(w);
            r.stages.push((Stage::Wcet, Outcome::Ok(format!("bound {w} units"))));
        }
        Err(e) => {
            fail(&mut r, Stage::Wcet, e.to_string());
            return r;
        }
    }
    r.bundle = Some(bundle);
    r
}

/// Builds `source` and writes the bundle to `out`, by default next to the
/// source with extension `.csp`.
pub fn cmd_build(source: &Path, out: Option<&Path>, opts: &BuildOptions) -> Result<BuildReport, CliError> {
    let src = read_text(source)?;
    let mut r = build(&src, opts);
    if let Some(bundle) = &r.bundle {
        let path = out.map(Path::to_path_buf).unwrap_or_else(|| source.with_extension("csp"));
        write_file(&path, bundle)?;
        r.bundle_path = Some(path);
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PoFormat {
    Xml,
    Text,
}

/// PO listing of a B0 source, as XML or a plain table.
pub fn cmd_po(source: &Path, format: PoFormat, budget: u64) -> Result<String, CliError> {
    let tm = front_end(&read_text(source)?)?;
    let pos = generate_pos(&tm);
    let results = prove_all(&pos, budget);
    match format {
        PoFormat::Xml => export_pos(&tm.model.name, &pos, &results).map_err(|e| CliError::stage(Stage::Prove, e)),
        PoFormat::Text => {
            let mut s = format!("{:>3}  {:<17} {:<7} {:<16} goal\n", "id", "kind", "loc", "status");
            for (po, r) in pos.iter().zip(&results) {
                let mut status = r.status.name().to_string();
                if let ProofStatus::Counterexample(w) = &r.status {
                    status = format!("{status} [{}]", witness_text(w));
                }
                s.push_str(&format!(
                    "{:>3}  {:<17} {:<7} {:<16} {}\n",
                    po.id,
                    po.kind.name(),
                    po.loc.to_string(),
                    status,
                    expr_to_string(&po.goal)
                ));
            }
            let sum = PoSummary::of(&results);
            s.push_str(&format!(
                "{} POs, {} proved, {} unproven, {} counterexamples\n",
                sum.total,
                sum.proved_interval + sum.proved_enum,
                sum.unproven,
                sum.counterexample
            ));
            Ok(s)
        }
    }
}

fn load_firmware(bundle: &Path, seq: &[String]) -> Result<LoadedFirmware, CliError> {
    let fw = bootload(&read_bytes(bundle)?).map_err(|e| CliError::stage(Stage::Bootload, e))?;
    if seq.is_empty() {
        return Ok(fw);
    }
    let mut cfg = *fw.seq();
    for s in seq {
        cfg.set(s).map_err(|e| CliError::stage(Stage::Bootload, e))?;
    }
    fw.with_seq(cfg).map_err(|e| CliError::stage(Stage::Bootload, e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimOutcome {
    pub trace: Trace,
    pub trace_path: PathBuf,
}

impl SimOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.trace.status.is_panic() {
            EXIT_PANIC
        } else {
            EXIT_OK
        }
    }
}

impl fmt::Display for SimOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.trace.status {
            Status::Running => writeln!(f, "RUNNING after {} cycles", self.trace.reports.len())?,
            Status::Panic { reason, cycle } => writeln!(f, "PANIC at cycle {cycle}: {reason}")?,
        }
        writeln!(f, "trace written to {}", self.trace_path.display())
    }
}

/// Simulates a scenario on a bundle. The trace goes to `out`, by default
/// next to the scenario with extension `.trace.jsonl`.
pub fn cmd_sim(bundle: &Path, scenario: &Path, out: Option<&Path>, seq: &[String]) -> Result<SimOutcome, CliError> {
    let fw = load_firmware(bundle, seq)?;
    let sc = Scenario::from_json(&read_text(scenario)?).map_err(|e| CliError::stage(Stage::Scenario, e))?;
    let trace = run_scenario(&fw, &sc).map_err(|e| CliError::stage(Stage::Scenario, e))?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| scenario.with_extension("trace.jsonl"));
    write_file(&path, trace.to_jsonl().as_bytes())?;
    Ok(SimOutcome { trace, trace_path: path })
}

/// Translates a relay net to B0. Returns the text and, unless `stdout`,
/// writes it to `out` or next to the net with extension `.b0`.
pub fn cmd_relay(net: &Path, out: Option<&Path>, stdout: bool) -> Result<(String, Option<PathBuf>), CliError> {
    let parsed = parse_relay(&read_text(net)?).map_err(|e| CliError::stage(Stage::Relay, e))?;
    let b0 = translate(&parsed);
    if stdout {
        return Ok((b0, None));
    }
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| net.with_extension("b0"));
    write_file(&path, b0.as_bytes())?;
    Ok((b0, Some(path)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WcetReport {
    pub bound: u64,
    pub code_bytes: usize,
    pub loops: usize,
}

impl fmt::Display for WcetReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "WCET bound: {} units (image B, {} bytes, {} loops)", self.bound, self.code_bytes, self.loops)
    }
}

/// Cost bound of the bundle's bytecode cycle under the shipped or a given
/// cost table.
pub fn cmd_wcet(bundle: &Path, costs: Option<&Path>) -> Result<WcetReport, CliError> {
    let fw = load_firmware(bundle, &[])?;
    let table = match costs {
        Some(p) => CostTable::parse(&read_text(p)?).map_err(|e| CliError::stage(Stage::Wcet, e))?,
        None => CostTable::default(),
    };
    let img = fw.image_b();
    let bound = analyze(img, &table).map_err(|e| CliError::stage(Stage::Wcet, e))?;
    Ok(WcetReport { bound, code_bytes: img.code.len(), loops: img.loop_table.len() })
}

/// Listings of both images, from a bundle or straight from B0 source.
pub fn cmd_disasm(input: &Path) -> Result<String, CliError> {
    let bytes = read_bytes(input)?;
    let (a, b) = if bytes.starts_with(MAGIC) {
        let fw = bootload(&bytes).map_err(|e| CliError::stage(Stage::Bootload, e))?;
        (fw.image_a().clone(), fw.image_b().clone())
    } else {
        let src = String::from_utf8(bytes).map_err(|e| CliError::stage(Stage::Read, e))?;
        let tm = front_end(&src)?;
        let a = compile_a(&tm).map_err(|e| CliError::stage(Stage::Compile, e))?;
        let b = compile_b(&tm).map_err(|e| CliError::stage(Stage::Compile, e))?;
        (a, b)
    };
    let la = disasm_a(&a).map_err(|e| CliError::stage(Stage::Compile, e))?;
    let lb = disasm_b(&b).map_err(|e| CliError::stage(Stage::Compile, e))?;
    Ok(format!("{la}\n{lb}"))
}

#[derive(Debug, Parser)]
#[command(name = "safeplc", version, about = "Prove, compile, link and simulate B0 control programs")]
pub struct Cli {
    /// Enumeration budget of the prover, in valuations per PO.
    #[arg(long, global = true, default_value_t = DEFAULT_BUDGET)]
    pub budget: u64,
    /// Sequencer override, e.g. `--seq cycle_period_ms=5`. Repeatable.
    #[arg(long = "seq", global = true, value_name = "KEY=VALUE")]
    pub seq: Vec<String>,
    /// Output file of the command.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub cmd: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, type check, prove, compile twice, link and verify a bundle.
    Build {
        source: PathBuf,
        /// Link even with UNPROVEN obligations. Counterexamples still block.
        #[arg(long)]
        allow_unproven: bool,
    },
    /// Run a fault scenario on a bundle and write the trace.
    Sim { bundle: PathBuf, scenario: PathBuf },
    /// Export proof obligations and their status.
    Po {
        source: PathBuf,
        #[arg(long, value_enum, default_value = "xml")]
        format: PoFormat,
    },
    /// Translate a relay net to B0.
    Relay {
        net: PathBuf,
        /// Print instead of writing a file.
        #[arg(long)]
        stdout: bool,
    },
    /// Bound the cycle cost of a bundle's bytecode image.
    Wcet { bundle: PathBuf, costs: Option<PathBuf> },
    /// List both images of a bundle or a B0 source.
    Disasm { input: PathBuf },
}

fn seq_config(overrides: &[String]) -> Result<SeqConfig, CliError> {
    let mut cfg = SeqConfig::default();
    for s in overrides {
        cfg.set(s).map_err(|e| CliError::stage(Stage::Link, e))?;
    }
    Ok(cfg)
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let to = cli.out.as_deref();
    let put = |out: &mut dyn Write, text: &str| -> Result<(), CliError> {
        out.write_all(text.as_bytes()).map_err(|source| CliError::Io { path: "<stdout>".into(), source })
    };
    let emit = |out: &mut dyn Write, text: &str| -> Result<(), CliError> {
        match to {
            Some(p) => write_file(p, text.as_bytes()),
            None => put(out, text),
        }
    };
    match cli.cmd {
        Command::Build { source, allow_unproven } => {
            let opts = BuildOptions { budget: cli.budget, seq: seq_config(&cli.seq)?, allow_unproven };
            let r = cmd_build(&source, to, &opts)?;
            put(out, &r.to_string())?;
            Ok(r.exit_code())
        }
        Command::Sim { bundle, scenario } => {
            let o = cmd_sim(&bundle, &scenario, to, &cli.seq)?;
            put(out, &o.to_string())?;
            Ok(o.exit_code())
        }
        Command::Po { source, format } => {
            emit(out, &cmd_po(&source, format, cli.budget)?)?;
            Ok(EXIT_OK)
        }
        Command::Relay { net, stdout } => {
            let (text, path) = cmd_relay(&net, to, stdout)?;
            match path {
                Some(p) => put(out, &format!("B0 model written to {}\n", p.display()))?,
                None => put(out, &text)?,
            }
            Ok(EXIT_OK)
        }
        Command::Wcet { bundle, costs } => {
            emit(out, &cmd_wcet(&bundle, costs.as_deref())?.to_string())?;
            Ok(EXIT_OK)
        }
        Command::Disasm { input } => {
            emit(out, &cmd_disasm(&input)?)?;
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
