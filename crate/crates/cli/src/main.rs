use std::io::{self, Write};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lockstep::library::{self, Guarantee, Params, ProtocolInstance, PROTOCOL_IDS};
use lockstep::monitors::{monitor_by_id, monitors_for};
use lockstep::scheduling::{build_schedule_pair, compare_observations, dichotomy, run_s1, s1_adversary, simple_scheduler, Scheduler, SCHEDULER_IDS};
use lockstep::suite;
use lockstep::verifier::{check_knowledge, explore, guarantee_holds, run, ExploreOptions, Outcome, TraceLine};
use lockstep::{Error, WinCondition};

const EXIT_USAGE: u8 = 64;
const EXIT_MISMATCH: u8 = 65;
const EXIT_RESOURCE: u8 = 70;

const EXIT_CODES: &str = "\
Exit codes:
  simulate   0 correct declaration, 2 incorrect declaration, 3 step limit
  verify     0 every claimed guarantee holds, 65 verdict mismatch, 70 resource limit
  adversary  0 construction behaved as expected, 65 otherwise
  all        64 usage error (unknown id, unsupported parameters)";

#[derive(Parser)]
#[command(name = "lockstep", version, about = "Prisoners and lightswitches in many rooms", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one protocol against one scheduler and print the trace.
    Simulate {
        #[command(flatten)]
        proto: ProtocolArgs,
        #[arg(long, default_value = "round-robin")]
        scheduler: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        max_steps: u64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Explore every schedule and check the protocol's claimed guarantee.
    Verify {
        #[command(flatten)]
        proto: ProtocolArgs,
        /// Run a named suite instead of a single protocol.
        #[arg(long, conflicts_with = "protocol")]
        suite: Option<String>,
        /// Extra monitor ids; the protocol family's defaults always run.
        #[arg(long = "monitor")]
        monitors: Vec<String>,
        #[arg(long)]
        symmetry: bool,
        #[arg(long, env = "LOCKSTEP_NODE_CAP")]
        node_cap: Option<usize>,
    },
    /// Run an adversarial construction against a protocol.
    Adversary {
        #[arg(value_enum)]
        kind: AdversaryKind,
        #[command(flatten)]
        proto: ProtocolArgs,
        /// Events compared by the indistinguishability check.
        #[arg(long, default_value_t = 500)]
        horizon: usize,
        #[arg(long, default_value_t = 10_000)]
        max_steps: u64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// List protocol, scheduler and monitor identifiers.
    List,
}

#[derive(Args)]
struct ProtocolArgs {
    #[arg(long)]
    protocol: Option<String>,
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Defaults to 1 for one-room protocols and 2 otherwise.
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, default_value_t = 1)]
    ell: u32,
    /// Start configuration names, comma separated.
    #[arg(long)]
    start: Option<String>,
    /// all-rooms, all-rooms-xK, at-least-one-room or all-declare.
    #[arg(long)]
    win: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Jsonl,
}

#[derive(Clone, Copy, ValueEnum)]
enum AdversaryKind {
    Lemma1,
    S1,
}

enum Failure {
    Usage(String),
    Exit(u8),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        match e {
            Error::ResourceLimit(_) => {
                eprintln!("lockstep: {e}");
                Failure::Exit(EXIT_RESOURCE)
            }
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl ProtocolArgs {
    fn instance(&self) -> Result<ProtocolInstance, Failure> {
        let id = self.protocol.as_deref().ok_or_else(|| Failure::Usage("--protocol is required".into()))?;
        let r = self.r.unwrap_or(if id == "one-room-known" || id == "one-room-unknown" { 1 } else { 2 });
        let params = Params { n: self.n, r, ell: self.ell, start: self.start.clone() };
        let mut inst = library::build(id, &params)?;
        if let Some(w) = &self.win {
            inst.win = WinCondition::parse(w).ok_or_else(|| Failure::Usage(format!("unknown win condition {w:?}")))?;
        }
        Ok(inst)
    }
}

fn simulate(proto: &ProtocolArgs, scheduler: &str, seed: u64, max_steps: u64, format: Format) -> Result<u8, Failure> {
    let mut inst = proto.instance()?;
    let mut sched: Box<dyn Scheduler> = match scheduler {
        "s1-adversary" => Box::new(s1_adversary(&inst)?),
        "lemma1-pair" => {
            let pair = build_schedule_pair(&inst);
            inst = pair.instance(&inst);
            Box::new(pair.s2())
        }
        other => simple_scheduler(other, inst.n, inst.r, seed)?,
    };
    let res = run(&inst, sched.as_mut(), inst.win, max_steps);
    let mut out = io::stdout().lock();
    for rec in &res.trace {
        let line = TraceLine::from_record(&inst, rec);
        let s = match format {
            Format::Text => line.to_text(),
            Format::Jsonl => line.to_json(),
        };
        let _ = writeln!(out, "{s}");
    }
    if let Format::Text = format {
        let _ = writeln!(out, "{} under {}: {}", inst.id, sched.name(), res.outcome);
    }
    Ok(match res.outcome {
        Outcome::DeclaredCorrect { .. } => 0,
        Outcome::DeclaredIncorrect { .. } => 2,
        Outcome::StepLimit { .. } => 3,
    })
}

fn verify_suite(name: &str) -> Result<u8, Failure> {
    if name != "acceptance" {
        return Err(Failure::Usage(format!("unknown suite {name:?}")));
    }
    let mut ok = true;
    for f in suite::CRITERIA {
        let rep = f();
        println!("{}", rep.line());
        for d in &rep.details {
            println!("    {d}");
        }
        ok &= rep.passed;
    }
    Ok(if ok { 0 } else { EXIT_MISMATCH })
}

fn verify(proto: &ProtocolArgs, extra: &[String], symmetry: bool, node_cap: Option<usize>) -> Result<u8, Failure> {
    let inst = proto.instance()?;
    let cap = node_cap.unwrap_or_else(lockstep::verifier::default_node_cap);
    if inst.guarantee == Guarantee::KnowledgeOnly {
        let k = check_knowledge(&inst, cap)?;
        println!("protocol={} n={} r={} property=knowledge-sound verdict={} states_explored={}", inst.id, inst.n, inst.r, k.sound, k.states);
        println!("protocol={} n={} r={} property=knowledge-eventual verdict={} states_explored={}", inst.id, inst.n, inst.r, k.eventual, k.states);
        if let Some(cx) = &k.counterexample {
            print_counterexample(&inst, cx);
        }
        return Ok(if k.passed() { 0 } else { EXIT_MISMATCH });
    }
    let mut monitors = monitors_for(&inst);
    for id in extra {
        monitors.push(monitor_by_id(id, &inst)?);
    }
    let mut opts = ExploreOptions::for_instance(&inst).with_monitors(monitors);
    opts.node_cap = cap;
    opts.symmetry = symmetry;
    let rep = explore(&inst, opts)?;
    for line in rep.report_lines() {
        println!("{line}");
    }
    let cxs = [&rep.unsafe_trace, &rep.liveness_trace, &rep.stuck_trace];
    for cx in cxs.into_iter().flatten().chain(rep.monitors.iter().filter_map(|m| m.counterexample.as_ref())) {
        print_counterexample(&inst, cx);
    }
    let claims_safety = !matches!(inst.guarantee, Guarantee::Unclaimed);
    let ok = guarantee_holds(&inst, &rep) && rep.monitors_pass() && (rep.safe || !claims_safety);
    println!("guarantee {} for {}: {}", inst.guarantee.name(), inst.id, if ok { "verified" } else { "NOT verified" });
    Ok(if ok { 0 } else { EXIT_MISMATCH })
}

fn print_counterexample(inst: &ProtocolInstance, cx: &lockstep::verifier::Counterexample) {
    println!("counterexample ({:?}): {}", cx.kind, cx.message);
    for rec in &cx.trace {
        println!("  {}", TraceLine::from_record(inst, rec).to_text());
    }
}

fn adversary(kind: AdversaryKind, proto: &ProtocolArgs, horizon: usize, max_steps: u64, format: Format) -> Result<u8, Failure> {
    let inst = proto.instance()?;
    match kind {
        AdversaryKind::Lemma1 => {
            if inst.r < 2 {
                return Err(Failure::Usage("lemma1 needs r >= 2".into()));
            }
            let pair = build_schedule_pair(&inst);
            let cmp = compare_observations(&inst, &pair, horizon);
            println!(
                "C={} D={} cycle={} passes; s2 advanced {} times and visited {} of {} rooms",
                inst.name_of(pair.c),
                inst.name_of(pair.d),
                pair.cycle_length,
                cmp.pointer_advances,
                cmp.rooms_visited_by_s2,
                inst.r
            );
            match cmp.first_divergence {
                None => println!("observation logs identical over {} events", cmp.events),
                Some((p, i)) => println!("observation logs diverge at prisoner {p}, visit {i}"),
            }
            let d = dichotomy(&inst, &pair, max_steps);
            println!("s1: {}", d.s1);
            if let Some(o) = d.extended {
                println!("s1 extended to a valid schedule: {o}");
            }
            if let Some(o) = d.s2 {
                println!("s2: {o}");
            }
            Ok(if cmp.identical { 0 } else { EXIT_MISMATCH })
        }
        AdversaryKind::S1 => {
            let rep = run_s1(&inst, max_steps)?;
            println!("s1 adversary against {}: {}", inst.id, rep.outcome);
            println!(
                "invariant={} fairness={} direct={} forced={} events={}",
                rep.invariant_ok, rep.fairness_ok, rep.direct_count, rep.case4_count, rep.events
            );
            if let Some(w) = &rep.witness {
                println!("witness: p{} never enters room {}; replay: {}", w.prisoner, w.room, w.replay);
                if let Format::Jsonl = format {
                    for e in &w.schedule {
                        println!("{}", serde_json::json!({ "prisoner": e.prisoner, "room": e.room }));
                    }
                }
            }
            println!("protocol won: {}", rep.protocol_won);
            Ok(if rep.protocol_won { EXIT_MISMATCH } else { 0 })
        }
    }
}

fn list() -> Result<u8, Failure> {
    println!("protocols: {}", PROTOCOL_IDS.join(", "));
    println!("schedulers: {}", SCHEDULER_IDS.join(", "));
    println!("monitors: {}", lockstep::monitors::MONITOR_IDS.join(", "));
    println!("suites: acceptance");
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Simulate { proto, scheduler, seed, max_steps, format } => simulate(proto, scheduler, *seed, *max_steps, *format),
        Command::Verify { suite: Some(name), .. } => verify_suite(name),
        Command::Verify { proto, monitors, symmetry, node_cap, .. } => verify(proto, monitors, *symmetry, *node_cap),
        Command::Adversary { kind, proto, horizon, max_steps, format } => adversary(*kind, proto, *horizon, *max_steps, *format),
        Command::List => list(),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("lockstep: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Exit(code)) => ExitCode::from(code),
    }
}
