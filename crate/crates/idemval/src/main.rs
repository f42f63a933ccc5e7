//! Command-line front end: offline analysis, launch validation, concrete
//! tracing, and the corpus experiments.
//!
//! Exit codes: 0 on success (including a non-idempotent verdict, which is an
//! answer, not an error), 1 on analysis/validation/execution errors, 2 when
//! corpus evaluation detects a false positive, 64 on usage errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use idemval::harness::{
    accuracy_csv, build_workload, casestudy, evaluate_corpus, generate_corpus, load_corpus,
    run_benchmark, scaling_report, taxonomy_csv, write_corpus, BenchMode, Corpus,
    DEFAULT_CORPUS_SEED,
};
use idemval::ir::parse_kernel;
use idemval::oracle::{ground_truth, trace_instance, CorpusError, MemoryImage, OracleLimits};
use idemval::range::analyze_kernel;
use idemval::validator::{
    compile_plan, read_artifact, validate, validate_strawman, write_artifact, Cause, Decision,
    Instance, Verdict,
};
use idemval::AnalysisConfig;

#[derive(Parser)]
#[command(
    name = "idemval",
    version,
    about = "Decide whether SPMD kernel launches are idempotent, from the launch arguments alone"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Analyze a kernel offline and emit its validation artifact.
    Analyze {
        /// Kernel source (.gk).
        kernel: PathBuf,
        /// Where to write the artifact JSON.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Keep loops unrolled instead of compacting them.
        #[arg(long)]
        no_compaction: bool,
    },
    /// Validate one launch against an analyzed artifact.
    Validate {
        /// Artifact JSON produced by `analyze`.
        artifact: PathBuf,
        /// Launch arguments, comma separated (decimal or 0x hex).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, value_parser = parse_int)]
        args: Vec<i64>,
        #[arg(long)]
        gdim: u32,
        #[arg(long)]
        bdim: u32,
        /// Use the enumerating baseline instead of the compiled plan.
        #[arg(long)]
        strawman: bool,
    },
    /// Execute a launch concretely and print its memory trace and ground
    /// truth.
    Trace {
        /// Kernel source (.gk).
        kernel: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, value_parser = parse_int)]
        args: Vec<i64>,
        #[arg(long)]
        gdim: u32,
        #[arg(long)]
        bdim: u32,
        /// Seed initial memory at a buffer argument: ARG:LEN:SEED.
        #[arg(long = "fill", value_parser = parse_fill)]
        fills: Vec<FillArg>,
    },
    /// Validate a whole corpus and certify it against concrete execution.
    Evaluate {
        /// Corpus directory (see `gen-corpus`).
        corpus: PathBuf,
        /// Directory for accuracy.csv and fn_taxonomy.csv.
        #[arg(short, long, default_value = "reports")]
        output: PathBuf,
    },
    /// Measure worst-case validation latency over a corpus.
    Bench {
        corpus: PathBuf,
        /// Validator configuration: base, base+r, or full.
        #[arg(long, default_value = "full", value_parser = parse_mode)]
        config: BenchMode,
        /// Repetitions per instance (the worst latency is kept).
        #[arg(long, default_value_t = 1000)]
        reps: u32,
        #[arg(short, long, default_value = "reports")]
        output: PathBuf,
        /// Skip the small-vs-large grid comparison.
        #[arg(long)]
        no_scaling: bool,
    },
    /// Cost-model case studies driven by validator verdicts.
    Casestudy {
        #[command(subcommand)]
        which: CaseCmd,
    },
    /// Write the seeded corpus to a directory.
    GenCorpus {
        output: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CORPUS_SEED)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum CaseCmd {
    /// Checkpoint input buffers only for launches that might clobber them.
    Checkpoint {
        corpus: PathBuf,
        /// Write the per-instance model table here.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Kill-and-replay idempotent launches on preemption instead of saving
    /// their context.
    Preempt {
        corpus: PathBuf,
        /// Write the latency CDFs here.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone)]
struct FillArg {
    arg: usize,
    len: u64,
    seed: u64,
}

fn parse_int(s: &str) -> Result<i64, String> {
    let (neg, t) = match s.strip_prefix('-') {
        Some(t) => (true, t),
        None => (false, s),
    };
    let v = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(h) => i64::from_str_radix(h, 16),
        None => t.parse(),
    }
    .map_err(|e| format!("`{s}`: {e}"))?;
    Ok(if neg { -v } else { v })
}

fn parse_fill(s: &str) -> Result<FillArg, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("`{s}`: expected ARG:LEN:SEED"));
    }
    Ok(FillArg {
        arg: parts[0].parse().map_err(|e| format!("`{s}`: {e}"))?,
        len: parts[1].parse().map_err(|e| format!("`{s}`: {e}"))?,
        seed: parts[2].parse().map_err(|e| format!("`{s}`: {e}"))?,
    })
}

fn parse_mode(s: &str) -> Result<BenchMode, String> {
    BenchMode::parse(s).ok_or_else(|| format!("`{s}`: expected base, base+r, or full"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let informational =
                matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if informational { ExitCode::SUCCESS } else { ExitCode::from(64) };
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::FalsePositive(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

enum Failure {
    /// Corpus evaluation found the validator accepting a clobbering launch.
    FalsePositive(String),
    Other(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Failure {
        Failure::Other(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Other(format!("{}: {e}", dir.display())))?;
    let p = dir.join(name);
    fs::write(&p, content).map_err(|e| Failure::Other(format!("{}: {e}", p.display())))?;
    println!("wrote {}", p.display());
    Ok(())
}

fn load(dir: &Path) -> Result<Corpus, Failure> {
    Ok(load_corpus(dir)?)
}

fn describe(v: &Verdict) -> String {
    let d = match &v.decision {
        Decision::Idempotent => "idempotent".to_string(),
        Decision::NonIdempotent(cause) => match cause {
            Cause::Overlap { read, write, lo, hi, assumed } => format!(
                "non-idempotent: read {read} overlaps write {write} on bytes [{lo:#x}, {hi:#x}]{}",
                if *assumed { " (under an assumed condition)" } else { "" }
            ),
            Cause::EnumeratedOverlap => {
                "non-idempotent: enumerated read and write bytes intersect".to_string()
            }
            other => format!("non-idempotent: {other:?}"),
        },
    };
    format!("{d}  [{} ns]", v.latency_ns)
}

fn run(cmd: Cmd) -> Result<(), Failure> {
    let cfg = AnalysisConfig::default();
    match cmd {
        Cmd::Analyze { kernel, output, no_compaction } => {
            let k = parse_kernel(&read(&kernel)?)?;
            let analysis = analyze_kernel(&k, &cfg, !no_compaction);
            println!("kernel {}: {:?}", k.name, analysis.class);
            println!(
                "{} descriptors, {} dropped conditions",
                analysis.descriptors.len(),
                analysis.dropped_conditions
            );
            if let Some(out) = output {
                fs::write(&out, write_artifact(&analysis))
                    .map_err(|e| Failure::Other(format!("{}: {e}", out.display())))?;
                println!("wrote {}", out.display());
            }
            Ok(())
        }
        Cmd::Validate { artifact, args, gdim, bdim, strawman } => {
            let analysis = read_artifact(&read(&artifact)?)?;
            let inst = Instance { kernel: analysis.kernel().to_string(), args, gdim, bdim };
            let v = if strawman {
                validate_strawman(&analysis, &inst)?
            } else {
                let plan = compile_plan(&analysis);
                validate(&plan, &inst)?
            };
            println!("{}", describe(&v));
            Ok(())
        }
        Cmd::Trace { kernel, args, gdim, bdim, fills } => {
            let k = parse_kernel(&read(&kernel)?)?;
            let inst = Instance { kernel: k.name.clone(), args, gdim, bdim };
            let mut mem = MemoryImage::new();
            for f in &fills {
                let base = *inst.args.get(f.arg).ok_or_else(|| {
                    Failure::Other(format!("--fill {}:{}:{}: no argument {}", f.arg, f.len, f.seed, f.arg))
                })?;
                mem.fill_seeded(base as u64, f.len, f.seed);
            }
            let trace = trace_instance(&k, &inst, &mut mem, &OracleLimits::default())?;
            print!("{}", trace.to_csv());
            let gt = ground_truth(&trace);
            match gt.witness {
                None => println!("ground truth: idempotent"),
                Some(w) => println!(
                    "ground truth: non-idempotent (byte {:#x} read at serial {} clobbered by write at serial {})",
                    w.address, w.read_serial, w.write_serial
                ),
            }
            Ok(())
        }
        Cmd::Evaluate { corpus, output } => {
            let c = load(&corpus)?;
            println!("{} kernels, {} instances", c.kernels.len(), c.total_instances());
            let report = match evaluate_corpus(&c, &cfg, &OracleLimits::default()) {
                Ok(r) => r,
                Err(e @ CorpusError::FalsePositive { .. }) => {
                    return Err(Failure::FalsePositive(e.to_string()))
                }
                Err(e) => return Err(e.into()),
            };
            write_file(&output, "accuracy.csv", &accuracy_csv(&report))?;
            write_file(&output, "fn_taxonomy.csv", &taxonomy_csv(&report))?;
            let t = report.totals();
            println!(
                "false positives = {}; {} of {} validated idempotent, {} conservative misses",
                t.false_pos, t.true_pos, t.instances, t.false_neg
            );
            Ok(())
        }
        Cmd::Bench { corpus, config, reps, output, no_scaling } => {
            let c = load(&corpus)?;
            let report = run_benchmark(&c, &cfg, config, reps)?;
            write_file(&output, "latency.csv", &report.latency_csv())?;
            write_file(&output, "cdf.csv", &report.cdf_csv())?;
            println!(
                "config {}: {} instances, worst latency {} ns",
                config.label(),
                report.rows.len(),
                report.worst_ns()
            );
            if !no_scaling {
                let vadd = c
                    .find("vectorAdd")
                    .ok_or_else(|| Failure::Other("corpus has no vectorAdd for scaling".into()))?;
                let s = scaling_report(&vadd.kernel, &cfg)?;
                println!("{}", s.summary());
            }
            Ok(())
        }
        Cmd::Casestudy { which } => {
            let ccfg = casestudy::CaseStudyConfig::default();
            match which {
                CaseCmd::Checkpoint { corpus, output } => {
                    let items = build_workload(&load(&corpus)?, &cfg)?;
                    let r = casestudy::simulate_checkpointing(&items, &ccfg);
                    println!(
                        "{} launches, {} validated idempotent",
                        r.items, r.idempotent_items
                    );
                    println!(
                        "checkpoint overhead: {:.4} without verdicts, {:.4} with (copies {} -> {} ms, validation {} ms)",
                        r.overhead_without,
                        r.overhead_with,
                        r.copy_ns_all / 1_000_000,
                        r.copy_ns_nonidempotent / 1_000_000,
                        r.validation_ns / 1_000_000
                    );
                    if let Some(dir) = output {
                        write_file(&dir, "checkpoint.csv", &casestudy::checkpoint_csv(&items, &ccfg))?;
                    }
                }
                CaseCmd::Preempt { corpus, output } => {
                    let items = build_workload(&load(&corpus)?, &cfg)?;
                    let r = casestudy::simulate_preemption(&items, &ccfg);
                    println!(
                        "preemption latency: mean {:.1} us without verdicts, {:.1} us with ({:.1}% reduction)",
                        r.mean_without_ns / 1_000.0,
                        r.mean_with_ns / 1_000.0,
                        100.0 * r.mean_reduction()
                    );
                    if let Some(dir) = output {
                        write_file(&dir, "preempt_cdf.csv", &r.cdf_csv())?;
                    }
                }
            }
            Ok(())
        }
        Cmd::GenCorpus { output, seed } => {
            let corpus = generate_corpus(seed);
            write_corpus(&corpus, &output)
                .map_err(|e| Failure::Other(format!("{}: {e}", output.display())))?;
            println!(
                "wrote {} kernels, {} instances to {} (seed 0x{seed:x})",
                corpus.kernels.len(),
                corpus.total_instances(),
                output.display()
            );
            Ok(())
        }
    }
}
