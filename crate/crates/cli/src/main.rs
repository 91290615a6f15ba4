use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use lamtree::compile::{compile_to_iptt, compile_to_twt};
use lamtree::harness::{default_max_size, difftest, gls_difftest};
use lamtree::iam::{Iam, SingleStack, Variant};
use lamtree::reduction::{normalize_term, DEFAULT_FUEL};
use lamtree::syntax::{parse_tree, RankedAlphabet, Tree};
use lamtree::transducer::{compose, GlsSpec, LambdaTransducerSpec};
use lamtree::types::classify_type;
use lamtree::walking::{check_reversible, iptt_run, twt_run, IpttSpec, TreeIndex, TwtSpec};

#[derive(Parser)]
#[command(name = "lamtree", version, about = "Run, compile and compare tree transducers defined by affine λ-terms")]
struct Cli {
    /// Step budget for every machine and for normalization.
    #[arg(long, global = true, default_value_t = DEFAULT_FUEL)]
    fuel: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a spec file (.lt, .gls, .twt or .iptt).
    Typecheck { spec: PathBuf },
    /// Print the tier of a λ-transducer.
    Classify { spec: PathBuf },
    /// Print the normal form of the program a λ-transducer builds for a tree.
    Normalize { spec: PathBuf, tree: String },
    /// Evaluate a spec on a tree.
    Run {
        #[arg(long, value_enum)]
        machine: Option<Machine>,
        /// IAM variant, for `--machine iam`.
        #[arg(long, value_enum, default_value_t = IamVariant::Auto)]
        variant: IamVariant,
        spec: PathBuf,
        tree: String,
    },
    /// Compile a λ-transducer to a walking transducer and print it.
    Compile {
        #[arg(long, value_enum)]
        target: Target,
        spec: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print a run as JSON lines.
    Trace {
        #[arg(long, value_enum)]
        machine: Option<Machine>,
        spec: PathBuf,
        tree: String,
    },
    /// Compare all applicable backends on seeded random inputs.
    Difftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        cases: usize,
        /// Largest input size; by default 4 for almost depth-1 specs, 12 otherwise.
        #[arg(long)]
        max_size: Option<usize>,
        spec: PathBuf,
    },
    /// Print the λ-transducer running FIRST and then SECOND.
    Compose {
        first: PathBuf,
        second: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check that a walking transducer is reversible (compiling a .lt first).
    Reversible { spec: PathBuf },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Machine {
    Normalize,
    Iam,
    Twt,
    Iptt,
}

#[derive(Clone, Copy, ValueEnum)]
enum IamVariant {
    Auto,
    Pa,
    Apa,
    Depth1,
    Single,
}

impl From<IamVariant> for Variant {
    fn from(v: IamVariant) -> Self {
        match v {
            IamVariant::Auto => Variant::Auto,
            IamVariant::Pa => Variant::PurelyAffine,
            IamVariant::Apa => Variant::AlmostPurelyAffine,
            IamVariant::Depth1 => Variant::Depth1,
            IamVariant::Single => Variant::SingleStack,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Twt,
    Iptt,
}

enum Spec {
    Lambda(LambdaTransducerSpec),
    Gls(GlsSpec),
    Twt(TwtSpec),
    Iptt(IpttSpec),
}

impl Spec {
    fn input(&self) -> &RankedAlphabet {
        match self {
            Spec::Lambda(s) => &s.input,
            Spec::Gls(s) => &s.input,
            Spec::Twt(s) => &s.input,
            Spec::Iptt(s) => &s.input,
        }
    }

    fn lambda(self, path: &Path) -> Result<LambdaTransducerSpec> {
        match self {
            Spec::Lambda(s) => Ok(s),
            _ => bail!("{}: expected a λ-transducer (.lt)", path.display()),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load(path: &Path) -> Result<Spec> {
    let text = read(path)?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let at = |e: String| anyhow!("{}: {e}", path.display());
    Ok(match ext {
        "lt" => Spec::Lambda(LambdaTransducerSpec::parse(&text).map_err(|e| at(e.to_string()))?),
        "gls" => Spec::Gls(GlsSpec::parse(&text).map_err(|e| at(e.to_string()))?),
        "twt" => Spec::Twt(TwtSpec::parse(&text).map_err(|e| at(e.to_string()))?),
        "iptt" => Spec::Iptt(IpttSpec::parse(&text).map_err(|e| at(e.to_string()))?),
        _ => bail!("{}: unknown spec kind; use .lt, .gls, .twt or .iptt", path.display()),
    })
}

/// A tree given inline or as `@file`.
fn tree_arg(arg: &str, sigma: &RankedAlphabet) -> Result<Tree> {
    let text = match arg.strip_prefix('@') {
        Some(p) => read(Path::new(p))?,
        None => arg.to_string(),
    };
    parse_tree(text.trim(), sigma).map_err(|e| anyhow!("input tree: {e}"))
}

fn emit(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Runs a command; `Ok(false)` means a negative answer (disagreement, not
/// reversible) rather than an error.
fn dispatch(cli: Cli) -> Result<bool> {
    let fuel = cli.fuel;
    match cli.cmd {
        Cmd::Typecheck { spec } => {
            match load(&spec)? {
                Spec::Lambda(s) => println!("ok: memory {}, {}", s.memory, s.classification()),
                Spec::Gls(s) => println!("ok: {} states, {} rules", s.states.len(), s.rules.len()),
                Spec::Twt(s) => println!("ok: {} states, {} transitions", s.states.len(), s.transitions()),
                Spec::Iptt(s) => println!("ok: {} states, {} colors, {} transitions", s.states.len(), s.colors.len(), s.delta.len()),
            }
            Ok(true)
        }
        Cmd::Classify { spec } => {
            let s = load(&spec)?.lambda(&spec)?;
            println!("{}", s.classification());
            Ok(true)
        }
        Cmd::Normalize { spec, tree } => {
            let s = load(&spec)?.lambda(&spec)?;
            let tau = tree_arg(&tree, &s.input)?;
            let p = s.program(&tau)?;
            println!("{}", normalize_term(&p, fuel)?);
            Ok(true)
        }
        Cmd::Run { machine, variant, spec, tree } => {
            let s = load(&spec)?;
            let tau = tree_arg(&tree, s.input())?;
            let out = match (s, machine) {
                (Spec::Lambda(s), None | Some(Machine::Normalize)) => s.eval_normalize(&tau, fuel)?,
                (Spec::Lambda(s), Some(Machine::Iam)) => s.eval_iam(&tau, variant.into(), fuel)?,
                (Spec::Lambda(s), Some(Machine::Twt)) => twt_run(&compile_to_twt(&s)?, &tau, fuel)?,
                (Spec::Lambda(s), Some(Machine::Iptt)) => iptt_run(&compile_to_iptt(&s)?, &tau, fuel)?,
                (Spec::Gls(s), None | Some(Machine::Normalize)) => s.run(&tau, fuel)?,
                (Spec::Twt(s), None | Some(Machine::Twt)) => twt_run(&s, &tau, fuel)?,
                (Spec::Iptt(s), None | Some(Machine::Iptt)) => iptt_run(&s, &tau, fuel)?,
                _ => bail!("{}: that machine does not apply to this kind of spec", spec.display()),
            };
            println!("{out}");
            Ok(true)
        }
        Cmd::Compile { target, spec, output } => {
            let s = load(&spec)?.lambda(&spec)?;
            let text = match target {
                Target::Twt => compile_to_twt(&s)?.to_text(),
                Target::Iptt => compile_to_iptt(&s)?.to_text(),
            };
            emit(&text, output.as_deref())?;
            Ok(true)
        }
        Cmd::Trace { machine, spec, tree } => {
            let s = load(&spec)?;
            let tau = tree_arg(&tree, s.input())?;
            let t = TreeIndex::new(&tau);
            let lines = match (s, machine) {
                (Spec::Lambda(s), None | Some(Machine::Iam)) => {
                    let v = s.annotated_program(&tau)?;
                    let class = v.classify();
                    match Variant::for_tier(class) {
                        Some(Variant::Depth1) => {
                            let m = SingleStack::new(&v);
                            m.trace(fuel).to_json_lines(&|c| m.show(c))
                        }
                        Some(variant) => {
                            let m = Iam::new(&v, variant);
                            m.trace(fuel).to_json_lines(&|c| m.show(c))
                        }
                        None => bail!("no machine runs {class} programs"),
                    }
                }
                (Spec::Lambda(s), Some(Machine::Twt)) => compile_to_twt(&s)?.trace(&tau, fuel).to_json_lines(&|c| c.show(&t)),
                (Spec::Lambda(s), Some(Machine::Iptt)) => {
                    compile_to_iptt(&s)?.trace(&tau, fuel).to_json_lines(&|c| c.show(&t))
                }
                (Spec::Twt(s), None | Some(Machine::Twt)) => s.trace(&tau, fuel).to_json_lines(&|c| c.show(&t)),
                (Spec::Iptt(s), None | Some(Machine::Iptt)) => s.trace(&tau, fuel).to_json_lines(&|c| c.show(&t)),
                _ => bail!("{}: no trace for that machine on this kind of spec", spec.display()),
            };
            print!("{lines}");
            Ok(true)
        }
        Cmd::Difftest { seed, cases, max_size, spec } => {
            eprintln!("difftest seed {seed}, {cases} cases");
            let report = match load(&spec)? {
                Spec::Lambda(s) => difftest(&s, seed, cases, max_size.unwrap_or_else(|| default_max_size(&s)), fuel)?,
                Spec::Gls(s) => gls_difftest(&s, seed, cases, max_size.unwrap_or(12), fuel)?,
                _ => bail!("{}: difftest needs a .lt or .gls spec", spec.display()),
            };
            println!("{report}");
            Ok(report.ok())
        }
        Cmd::Compose { first, second, output } => {
            let f = load(&first)?.lambda(&first)?;
            let g = load(&second)?.lambda(&second)?;
            let c = compose(&f, &g)?;
            eprintln!("memory {} is {}", c.memory, classify_type(&c.memory));
            emit(&c.to_text(), output.as_deref())?;
            Ok(true)
        }
        Cmd::Reversible { spec } => {
            let twt = match load(&spec)? {
                Spec::Twt(s) => s,
                Spec::Lambda(s) => compile_to_twt(&s)?,
                _ => bail!("{}: reversibility applies to .twt specs and compiled .lt specs", spec.display()),
            };
            match check_reversible(&twt) {
                Ok(_) => {
                    println!("reversible");
                    Ok(true)
                }
                Err(w) => {
                    println!("{w}");
                    Ok(false)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
