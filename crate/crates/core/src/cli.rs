//! Command-line front end. `run` returns the process exit code: 0 success, 1 a trial or
//! validation failed, 2 bad usage or unreadable input.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::EngineConfig;
use crate::disambiguation::{generate_candidates, CandidateSet, ConfirmedInstruction, ResolverMode};
use crate::eval::{corpus_accuracy, load_corpus, load_scenes, replay, sweep, CorpusReport, EvalContext, Scenario, SweepSpec};
use crate::plan::{build_plan, simulate, to_xml, validate_bt, SkillLibrary};
use crate::scene::{load_scene, SceneGraph};
use crate::session::{apply_log, parse_event_log, SessionState};

#[derive(Debug, Parser)]
#[command(name = "intenbot", version, about = "Multimodal robot intent disambiguation")]
pub struct Cli {
    /// TOML configuration file; INTENBOT_* variables override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP API.
    Serve {
        /// Scenes to register at startup.
        #[arg(long = "scene")]
        scenes: Vec<PathBuf>,
        #[arg(long)]
        bind: Option<String>,
        /// Directory served for paths outside the API.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Resolve one command into nine candidates.
    Resolve(ResolveArgs),
    /// Replay a scenario corpus and report per-trial outcomes.
    Replay(CorpusArgs),
    /// Grid-search gaze and pointing ranges over a corpus.
    Sweep {
        #[arg(long)]
        corpus: PathBuf,
        /// Write the heatmap as long-form CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        top: usize,
    },
    /// Compile a confirmed instruction to behavior-tree XML, or validate existing XML.
    Plan {
        #[arg(long, required_unless_present = "validate")]
        scene: Option<PathBuf>,
        /// ConfirmedInstruction JSON.
        #[arg(long, conflicts_with = "validate")]
        instruction: Option<PathBuf>,
        /// Check an XML file against the schema and skill library.
        #[arg(long)]
        validate: Option<PathBuf>,
        /// Also tick the tree in the simulator and print the trace.
        #[arg(long)]
        simulate: bool,
    },
    /// Accuracy breakdown of a corpus by tag and error class.
    Report {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct ResolveArgs {
    /// Scene file; optional with --scenario, whose scene_ref is used instead.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Scenario JSON (single object) with events and ground truth.
    #[arg(long, conflicts_with_all = ["events", "transcript"])]
    scenario: Option<PathBuf>,
    /// JSONL event log: touch/press/release/snapshot/transcript records.
    #[arg(long, required_unless_present = "scenario")]
    events: Option<PathBuf>,
    #[arg(long)]
    transcript: Option<String>,
    #[arg(long)]
    resolver: Option<ResolverMode>,
    /// Confirm this rank and print the compiled plan.
    #[arg(long)]
    confirm: Option<u8>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    resolver: Option<ResolverMode>,
    /// Write one TrialResult JSON line per scenario.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure that maps to exit code 1 rather than 2.
#[derive(Debug)]
struct TrialFailed(String);

impl std::fmt::Display for TrialFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for TrialFailed {}

pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) if e.is::<TrialFailed>() => {
            let _ = writeln!(err, "{e}");
            1
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            2
        }
    }
}

fn load_config(path: Option<&Path>) -> anyhow::Result<EngineConfig> {
    let mut cfg = match path {
        Some(p) => EngineConfig::load(p)?,
        None => EngineConfig::default(),
    };
    cfg.apply_env()?;
    Ok(cfg)
}

fn read_scene(path: &Path) -> anyhow::Result<SceneGraph> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    load_scene(&bytes).with_context(|| path.display().to_string())
}

fn execute(cli: Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Serve { scenes, bind, static_dir } => {
            if let Some(bind) = bind {
                cfg.server.bind = bind;
            }
            if static_dir.is_some() {
                cfg.server.static_dir = static_dir;
            }
            let runtime = tokio::runtime::Runtime::new()?;
            let preload: Vec<&Path> = scenes.iter().map(PathBuf::as_path).collect();
            runtime.block_on(crate::gateway::serve(cfg, &preload))
        }
        Command::Resolve(args) => resolve(&cfg, args, out),
        Command::Replay(args) => {
            let report = run_corpus(&cfg, &args.corpus, args.resolver)?;
            let (scenarios, _) = load_corpus(&args.corpus)?;
            if let Some(path) = &args.out {
                let mut lines = String::new();
                for t in &report.trials {
                    lines.push_str(&serde_json::to_string(t)?);
                    lines.push('\n');
                }
                std::fs::write(path, lines).with_context(|| format!("writing {}", path.display()))?;
            }
            let mut failures = Vec::new();
            for (s, t) in scenarios.iter().zip(&report.trials) {
                let status = match (t.match_rank, t.error_class) {
                    (Some(r), _) => format!("rank {r}"),
                    (None, Some(c)) => format!("miss {c:?}"),
                    (None, None) => "miss".into(),
                };
                writeln!(out, "{:<24} {status}", t.scenario_id)?;
                match t.expectation_mismatch(s) {
                    Some(m) => failures.push(m),
                    None if s.expect.is_none() && !t.matched() => failures.push(format!("{}: no candidate matched", s.id)),
                    None => {}
                }
            }
            writeln!(out, "accuracy {:.4} ({}/{})", report.overall.accuracy, report.overall.matched, report.overall.total)?;
            if failures.is_empty() {
                Ok(())
            } else {
                Err(TrialFailed(failures.join("\n")).into())
            }
        }
        Command::Sweep { corpus, csv, top } => {
            let (scenarios, scenes) = load_corpus(&corpus)?;
            let spec = SweepSpec { top_k: top, ..SweepSpec::default() };
            let result = sweep(&scenarios, &scenes, &cfg.angles, &spec, &cfg.baseline_options());
            if let Some(path) = &csv {
                std::fs::write(path, result.heatmap_csv()).with_context(|| format!("writing {}", path.display()))?;
            }
            writeln!(out, "gaze_range point_range accuracy")?;
            for p in &result.peaks {
                writeln!(out, "{:>10} {:>11} {:.4}", p.gaze_range, p.point_range, p.accuracy)?;
            }
            Ok(())
        }
        Command::Plan { scene, instruction, validate, simulate: sim } => {
            let lib = SkillLibrary::default();
            if let Some(path) = validate {
                let xml = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                let findings = validate_bt(&xml, &lib);
                if findings.is_empty() {
                    writeln!(out, "valid")?;
                    return Ok(());
                }
                let lines: Vec<String> = findings.iter().map(|f| format!("{:?}: {}", f.kind, f.message)).collect();
                return Err(TrialFailed(lines.join("\n")).into());
            }
            let scene = read_scene(scene.as_deref().expect("clap requires --scene"))?;
            let Some(path) = instruction else { bail!("--instruction is required unless --validate is given") };
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let confirmed: ConfirmedInstruction = serde_json::from_str(&text).with_context(|| path.display().to_string())?;
            let tree = build_plan(&confirmed, &scene, &lib)?;
            write!(out, "{}", to_xml(&tree))?;
            if sim {
                let trace = simulate(&tree, &scene);
                writeln!(out, "{}", serde_json::to_string_pretty(&trace)?)?;
                if !trace.succeeded() {
                    return Err(TrialFailed("simulated plan failed".into()).into());
                }
            }
            Ok(())
        }
        Command::Report { corpus, format } => {
            let report = run_corpus(&cfg, &corpus, None)?;
            match format {
                Format::Json => {
                    let summary = serde_json::json!({
                        "overall": report.overall,
                        "by_tag": report.by_tag,
                        "error_counts": report.error_counts,
                    });
                    writeln!(out, "{}", serde_json::to_string_pretty(&summary)?)?;
                }
                Format::Text => write_report(&report, out)?,
            }
            Ok(())
        }
    }
}

fn run_corpus(cfg: &EngineConfig, corpus: &Path, mode: Option<ResolverMode>) -> anyhow::Result<CorpusReport> {
    let (scenarios, scenes) = load_corpus(corpus)?;
    let resolver = cfg.build_resolver(mode.unwrap_or(cfg.resolver.mode))?;
    let mut ctx = EvalContext::new(cfg.angles, resolver.as_ref());
    ctx.lexicon = cfg.baseline_options().lexicon;
    Ok(corpus_accuracy(&scenarios, &scenes, &ctx))
}

fn write_report(report: &CorpusReport, out: &mut dyn Write) -> anyhow::Result<()> {
    let o = &report.overall;
    writeln!(out, "overall      {:.4} ({}/{})", o.accuracy, o.matched, o.total)?;
    for (tag, t) in &report.by_tag {
        writeln!(out, "{tag:<28} {:.4} ({}/{})", t.accuracy, t.matched, t.total)?;
    }
    for (class, n) in &report.error_counts {
        writeln!(out, "error {:<22} {n}", format!("{class:?}"))?;
    }
    Ok(())
}

fn resolve(cfg: &EngineConfig, args: ResolveArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let resolver = cfg.build_resolver(args.resolver.unwrap_or(cfg.resolver.mode))?;
    let scenario: Option<Scenario> = match &args.scenario {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Some(serde_json::from_str(&text).with_context(|| path.display().to_string())?)
        }
        None => None,
    };
    let scene = match (&args.scene, &scenario) {
        (Some(path), _) => read_scene(path)?,
        (None, Some(s)) => {
            let base = args.scenario.as_deref().and_then(Path::parent).unwrap_or(Path::new("."));
            let set = load_scenes(std::slice::from_ref(s), base)?;
            (**set.get(&s.scene_ref).expect("loaded")).clone()
        }
        (None, None) => bail!("--scene is required without --scenario"),
    };

    let mut state = SessionState::new();
    let (events, transcript) = match &scenario {
        Some(s) => (s.events.clone(), s.transcript.clone()),
        None => {
            let path = args.events.as_deref().expect("clap requires --events");
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            (parse_event_log(&text)?, args.transcript.clone().unwrap_or_default())
        }
    };
    apply_log(&mut state, &events)?;
    if !transcript.trim().is_empty() {
        state.attach_transcript(transcript)?;
    }
    let command = state.finalize(&scene, &cfg.angles)?;
    let set = generate_candidates(&command, &scene, resolver.as_ref())?;
    state.mark_presenting()?;

    let mut trial_failure = None;
    let match_rank = scenario.as_ref().map(|s| {
        let mut ctx = EvalContext::new(cfg.angles, resolver.as_ref());
        ctx.lexicon = cfg.baseline_options().lexicon;
        let result = replay(s, &scene, &ctx);
        if let Some(m) = result.expectation_mismatch(s) {
            trial_failure = Some(m);
        } else if s.expect.is_none() && !result.matched() {
            trial_failure = Some(format!("{}: no candidate matched ({:?})", s.id, result.error_class));
        }
        result.match_rank
    });

    let plan = match args.confirm {
        Some(rank) => {
            let confirmed = crate::disambiguation::confirm(&mut state, &set, rank)?;
            let tree = build_plan(&confirmed, &scene, &SkillLibrary::default())?;
            let trace = simulate(&tree, &scene);
            Some((confirmed, to_xml(&tree), trace))
        }
        None => None,
    };

    match args.format {
        Format::Json => {
            let mut doc = serde_json::json!({ "candidates": set });
            if let Some(rank) = match_rank {
                doc["match_rank"] = serde_json::json!(rank);
            }
            if let Some((confirmed, xml, trace)) = &plan {
                doc["confirmed"] = serde_json::to_value(confirmed)?;
                doc["bt_xml"] = serde_json::json!(xml);
                doc["trace"] = serde_json::to_value(trace)?;
            }
            writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?;
        }
        Format::Text => {
            write_candidates(&set, out)?;
            if let Some(rank) = match_rank {
                writeln!(out, "match: {}", rank.map_or("none".to_string(), |r| format!("rank {r}")))?;
            }
            if let Some((_, xml, trace)) = &plan {
                write!(out, "{xml}")?;
                for e in &trace.entries {
                    let answer = e.answer.as_deref().map(|a| format!(" -> {a}")).unwrap_or_default();
                    writeln!(out, "{:?} {}{answer}", e.outcome, e.node)?;
                }
            }
        }
    }
    match trial_failure {
        Some(m) => Err(TrialFailed(m).into()),
        None => Ok(()),
    }
}

fn write_candidates(set: &CandidateSet, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "resolver {} ({} ms){}", set.resolver_id, set.latency_ms, if set.repaired { " repaired" } else { "" })?;
    for c in &set.candidates {
        let pad = if c.padding { " *" } else { "" };
        writeln!(out, "{:>2}. {}{pad}", c.rank, c.display_text)?;
    }
    Ok(())
}
