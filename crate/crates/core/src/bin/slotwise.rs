use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use slotwise::canon::canon_key;
use slotwise::corpus::{gen_bench, gen_random, load_dataset, BenchSpec, GenParams};
use slotwise::cost::{metrics_with, CostReport, CostTable, Weights};
use slotwise::env::{EnvConfig, TraceStep, DEFAULT_MAX_STEPS};
use slotwise::ir::parse_program;
use slotwise::keys::{default_beta, plan_keys, rotation_steps};
use slotwise::optimizer::{
    train, DecodeMode, Policy, SearchConfig, TrainConfig, UpdateMode, DEFAULT_BEAM_WIDTH,
};
use slotwise::report::{compare, run_suite, suite_csv, Strategy, SuiteConfig};
use slotwise::rewrite::{catalog, check_rules};
use slotwise::semantics::{eval, Binding, DEFAULT_MODULUS};
use slotwise::Program;

/// Rewrite-driven SIMD vectorizer for FHE arithmetic circuits.
#[derive(Parser)]
#[command(name = "slotwise", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Cost weights `ops,depth,mult`.
    #[arg(long, global = true, default_value = "1,1,1")]
    weights: Weights,
    /// `default`, `toy`, or `key=value,...` overrides.
    #[arg(long, global = true, default_value = "default")]
    table: CostTable,
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_STEPS)]
    max_steps: usize,
    #[arg(long, global = true, default_value_t = DEFAULT_BEAM_WIDTH)]
    beam_width: usize,
    /// Trained policy weights for `--strategy policy`.
    #[arg(long, global = true)]
    policy: Option<PathBuf>,
    /// Print the rewrite trace (`step,rule_name,site,reward,cost_after`) to stderr.
    #[arg(long, global = true)]
    trace: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Optimize every program in a file; prints one program per line.
    Optimize {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = StrategyArg::Beam)]
        strategy: StrategyArg,
        /// Samples for `random`, and for `policy` when > 1.
        #[arg(long, default_value_t = 1)]
        samples: usize,
    },
    /// Print the cost report of every program as CSV.
    Cost { file: PathBuf },
    /// Print the canonical key of every program.
    Canon { file: PathBuf },
    /// Evaluate a program on `name=value` bindings.
    Eval {
        file: PathBuf,
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MODULUS)]
        modulus: u64,
    },
    #[command(subcommand)]
    Rules(RulesCmd),
    /// Plan rotation keys under a budget.
    Keys {
        /// Comma-separated rotation steps.
        #[arg(long, value_delimiter = ',', conflicts_with = "program")]
        steps: Vec<i64>,
        /// Take the steps from the rotations of a program instead.
        #[arg(long)]
        program: Option<PathBuf>,
        #[arg(long)]
        slots: i64,
        /// Key budget; defaults to 2*ceil(log2 slots).
        #[arg(long)]
        beta: Option<usize>,
    },
    #[command(subcommand)]
    Gen(GenCmd),
    /// Train a policy on a dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 1000)]
        episodes: usize,
        #[arg(long, default_value_t = 1e-4)]
        lr: f64,
        /// Use the clipped surrogate update instead of plain REINFORCE.
        #[arg(long)]
        ppo: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run strategies over benchmark kernels and write the metrics CSV.
    Suite {
        /// Kernel ids such as `dot-product-8` or `tree-100-50-5`.
        #[arg(long, value_delimiter = ',', default_value = "dot-product-4,dot-product-8,dot-product-16")]
        kernels: Vec<BenchSpec>,
        #[arg(long, value_delimiter = ',', default_value = "beam")]
        strategies: Vec<StrategyArg>,
        #[arg(long, default_value_t = 8)]
        samples: usize,
        /// Directory for the optimized programs.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Geometric-mean metric ratios of run B over run A.
    Compare { a: PathBuf, b: PathBuf },
}

#[derive(Subcommand)]
enum RulesCmd {
    /// Print index, name and contract of every rule.
    List,
    /// Random soundness check of every rule.
    Check {
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
}

#[derive(Subcommand)]
enum GenCmd {
    /// Random programs, one per line.
    Random {
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        min_depth: u32,
        #[arg(long, default_value_t = 15)]
        max_depth: u32,
        #[arg(long, default_value_t = 1)]
        min_width: usize,
        #[arg(long, default_value_t = 32)]
        max_width: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Naive program of a benchmark kernel.
    Bench {
        name: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    None,
    Greedy,
    Beam,
    Random,
    Policy,
}

impl Global {
    fn env(&self) -> EnvConfig {
        EnvConfig {
            table: self.table,
            weights: self.weights,
            max_steps: self.max_steps,
        }
    }

    fn search(&self) -> SearchConfig {
        SearchConfig {
            env: self.env(),
            ..Default::default()
        }
    }

    fn strategy(&self, s: StrategyArg, samples: usize) -> Result<Strategy> {
        Ok(match s {
            StrategyArg::None => Strategy::None,
            StrategyArg::Greedy => Strategy::Greedy,
            StrategyArg::Beam => Strategy::Beam(self.beam_width),
            StrategyArg::Random => Strategy::Random {
                samples,
                seed: self.seed,
            },
            StrategyArg::Policy => {
                let path = self
                    .policy
                    .as_ref()
                    .ok_or_else(|| anyhow!("--strategy policy needs --policy <file>"))?;
                let policy = Policy::load(path).with_context(|| format!("loading {}", path.display()))?;
                let mode = if samples > 1 {
                    DecodeMode::Sample {
                        samples,
                        seed: self.seed,
                    }
                } else {
                    DecodeMode::Greedy
                };
                Strategy::Policy {
                    policy: Box::new(policy),
                    mode,
                }
            }
        })
    }
}

/// A file holding either one (possibly multi-line) program or one program
/// per line. Unparsable lines are reported and counted.
fn read_programs(path: &Path) -> Result<(Vec<Program>, usize)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(p) = parse_program(&text) {
        return Ok((vec![p], 0));
    }
    let mut out = Vec::new();
    let mut bad = 0;
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        match parse_program(line) {
            Ok(p) => out.push(p),
            Err(e) => {
                eprintln!("{}:{}: {e}", path.display(), no + 1);
                bad += 1;
            }
        }
    }
    if out.is_empty() && bad > 0 {
        bail!("no program in {} parsed", path.display());
    }
    Ok((out, bad))
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn lines<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string() + "\n").collect()
}

/// Returns the number of failed items; nonzero maps to exit code 2.
fn run(cli: Cli) -> Result<usize> {
    let g = &cli.global;
    match cli.cmd {
        Cmd::Optimize {
            file,
            strategy,
            samples,
        } => {
            let (programs, bad) = read_programs(&file)?;
            let strategy = g.strategy(strategy, samples)?;
            let cfg = g.search();
            for p in &programs {
                let out = strategy.run(p, &cfg);
                if g.trace {
                    eprintln!("{}", TraceStep::CSV_HEADER);
                    for t in &out.trace {
                        eprintln!("{}", t.csv_line());
                    }
                }
                eprintln!("cost {} -> {} in {} steps", out.cost_initial, out.cost_final, out.steps());
                println!("{}", out.program);
            }
            Ok(bad)
        }
        Cmd::Cost { file } => {
            let (programs, bad) = read_programs(&file)?;
            println!("{}", CostReport::CSV_HEADER);
            for p in &programs {
                println!("{}", metrics_with(p, &g.table, &g.weights).csv_row());
            }
            Ok(bad)
        }
        Cmd::Canon { file } => {
            let (programs, bad) = read_programs(&file)?;
            print!("{}", lines(programs.iter().map(canon_key)));
            Ok(bad)
        }
        Cmd::Eval {
            file,
            inputs,
            modulus,
        } => {
            let (programs, bad) = read_programs(&file)?;
            let text = fs::read_to_string(&inputs).with_context(|| format!("reading {}", inputs.display()))?;
            let b = Binding::parse(&text, modulus).map_err(|e| anyhow!("{}: {e}", inputs.display()))?;
            let mut failed = bad;
            for p in &programs {
                match eval(p, &b) {
                    Ok(v) => {
                        let slots: Vec<String> = v.slots().iter().map(u64::to_string).collect();
                        println!("{}", slots.join(" "));
                    }
                    Err(e) => {
                        eprintln!("{e}");
                        failed += 1;
                    }
                }
            }
            Ok(failed)
        }
        Cmd::Rules(RulesCmd::List) => {
            let cat = catalog();
            println!("# {}", cat.version());
            for r in cat.rules() {
                println!("{}\t{}\t{}", r.index(), r.name(), r.contract());
            }
            Ok(0)
        }
        Cmd::Rules(RulesCmd::Check { trials }) => {
            let tally = check_rules(trials, g.seed);
            println!("rule,applied,failures");
            for t in &tally {
                println!("{},{},{}", t.rule, t.applied, t.failures);
                if let Some((a, b)) = &t.example {
                    eprintln!("{}: {a} => {b}", t.rule);
                }
            }
            Ok(tally.iter().filter(|t| t.failures > 0).count())
        }
        Cmd::Keys {
            steps,
            program,
            slots,
            beta,
        } => {
            let chi: BTreeSet<i64> = match program {
                Some(path) => {
                    let (ps, _) = read_programs(&path)?;
                    ps.iter().flat_map(|p| rotation_steps(p.body())).collect()
                }
                None => steps.into_iter().collect(),
            };
            let plan = plan_keys(&chi, slots, beta.unwrap_or_else(|| default_beta(slots)))?;
            print!("{plan}");
            Ok(0)
        }
        Cmd::Gen(GenCmd::Random {
            count,
            min_depth,
            max_depth,
            min_width,
            max_width,
            out,
        }) => {
            let params = GenParams {
                count,
                depth: (min_depth, max_depth),
                width: (min_width, max_width),
                seed: g.seed,
                ..Default::default()
            };
            write_out(out.as_deref(), &lines(gen_random(&params)?))?;
            Ok(0)
        }
        Cmd::Gen(GenCmd::Bench { name, n, out }) => {
            let mut spec = BenchSpec::parse(&name, n)?;
            spec.seed = g.seed;
            write_out(out.as_deref(), &format!("{}\n", gen_bench(&spec)?))?;
            Ok(0)
        }
        Cmd::Train {
            dataset,
            episodes,
            lr,
            ppo,
            out,
        } => {
            let ds = load_dataset(&dataset, &[])?;
            eprintln!(
                "{} programs ({} malformed, {} duplicates dropped)",
                ds.programs.len(),
                ds.malformed,
                ds.duplicates
            );
            let cfg = TrainConfig {
                lr,
                episodes,
                seed: g.seed,
                env: g.env(),
                mode: if ppo {
                    UpdateMode::PpoClip {
                        epsilon: 0.2,
                        epochs: 4,
                    }
                } else {
                    UpdateMode::Reinforce
                },
                ..Default::default()
            };
            let (policy, log) = train(&ds.programs, &cfg)?;
            eprintln!(
                "mean terminal reward: first 100 {:.3}, last 100 {:.3}",
                log.mean_first(100),
                log.mean_last(100)
            );
            policy.save(&out)?;
            Ok(ds.malformed)
        }
        Cmd::Suite {
            kernels,
            strategies,
            samples,
            out_dir,
            csv,
        } => {
            let cfg = SuiteConfig {
                search: g.search(),
                strategies: strategies
                    .iter()
                    .map(|s| g.strategy(*s, samples))
                    .collect::<Result<_>>()?,
                out_dir,
                seed: g.seed,
            };
            let rows = run_suite(&kernels, &cfg);
            for r in rows.iter().filter(|r| r.failed()) {
                eprintln!("{} {}: {}", r.kernel, r.strategy, r.error);
            }
            write_out(csv.as_deref(), &suite_csv(&rows))?;
            Ok(rows.iter().filter(|r| r.failed()).count())
        }
        Cmd::Compare { a, b } => {
            let read = |p: &Path| fs::read_to_string(p).with_context(|| format!("reading {}", p.display()));
            print!("{}", compare(&read(&a)?, &read(&b)?)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
