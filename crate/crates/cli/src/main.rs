mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use contribnet::allocation::is_min_concave;
use contribnet::dynamics::{self, fingerprint, Mode, TerminalVerdict, Trajectory};
use contribnet::equilibria::{approximation_factor, verify_nash, verify_pairwise, Verdict};
use contribnet::instances::{self, CnfFormula, Family};
use contribnet::io::{game_hash, load_game, load_profile, profile_to_value, save_game, save_profile};
use contribnet::oracle::{equilibria_to_json, grid_equilibria, grid_optimum};
use contribnet::solvers::{self, OptMethod, SolveOutcome, Status};
use contribnet::{Config, Game, Profile};

use report::RunReport;

#[derive(Parser)]
#[command(name = "contribnet", version, about = "Equilibria, optima and dynamics of network contribution games")]
struct Cli {
    /// Improvement tolerance.
    #[arg(long, global = true, env = "CONTRIBNET_TOL", default_value_t = 1e-9)]
    tol: f64,
    /// Grid resolution for lattice searches.
    #[arg(long, global = true, default_value_t = 16)]
    grid: u32,
    /// Largest lattice the grid routines will enumerate.
    #[arg(long, global = true, default_value_t = 5_000_000)]
    grid_cap: u64,
    /// Worker threads for enumeration and seed batches.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Print wall time to stderr.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Construct an equilibrium with a class-specific algorithm.
    Solve {
        game: PathBuf,
        /// auto, greedy-c0, weighted-sum, min-convex-uniform, min-concave or max-effort.
        #[arg(long, default_value = "auto")]
        method: String,
    },
    /// Check a profile for improving deviations.
    Verify {
        game: PathBuf,
        profile: PathBuf,
        #[arg(long, value_enum, default_value_t = VerifyMode::Pairwise)]
        mode: VerifyMode,
        /// Also report the approximation factor.
        #[arg(long)]
        approx: bool,
    },
    /// Simulate bilateral best-response dynamics.
    Dynamics {
        game: PathBuf,
        #[arg(long, value_enum, default_value_t = DynMode::Random)]
        mode: DynMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run this many consecutive seeds starting at --seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, default_value_t = 10_000)]
        max_rounds: usize,
        /// Starting profile; defaults to all zeros.
        #[arg(long)]
        start: Option<PathBuf>,
        /// JSONL trajectory output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute a social optimum.
    Optimum {
        game: PathBuf,
        /// auto, tight-matching, lp, grid, separable, ascent, half-integral or vertex-enum.
        #[arg(long, default_value = "auto")]
        method: String,
    },
    /// Solve, optimize and report the price of anarchy.
    Poa {
        game: PathBuf,
        #[arg(long, default_value = "auto")]
        method: String,
        #[arg(long, default_value = "auto")]
        opt_method: String,
    },
    /// Dual certificate for a min-linear equilibrium.
    Certificate { game: PathBuf, profile: PathBuf },
    /// Enumerate lattice equilibria and the lattice optimum.
    Oracle { game: PathBuf },
    /// Generate instances.
    Gen {
        #[command(subcommand)]
        what: GenCmd,
    },
}

#[derive(Subcommand)]
enum GenCmd {
    /// A named example.
    Canonical {
        name: String,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the prescribed start profile, if any.
        #[arg(long)]
        start_out: Option<PathBuf>,
    },
    /// A seeded random instance.
    Random {
        family: String,
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// A hardness gadget from a DIMACS formula.
    Gadget {
        #[arg(value_enum)]
        kind: GadgetKind,
        cnf: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the stable profile built from a satisfying assignment.
        #[arg(long)]
        recipe_out: Option<PathBuf>,
    },
    /// A random satisfiable 3-CNF in DIMACS format.
    Cnf {
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 2)]
        l: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyMode {
    Nash,
    Pairwise,
}

#[derive(Clone, Copy, ValueEnum)]
enum DynMode {
    Random,
    Concurrent,
}

#[derive(Clone, Copy, ValueEnum)]
enum GadgetKind {
    XySum,
    Min,
    MinUniform,
}

const SOLVERS: [&str; 5] = ["greedy-c0", "weighted-sum", "min-convex-uniform", "min-concave", "max-effort"];

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    };
    if cli.timing {
        eprintln!("wall time: {:.3}s", started.elapsed().as_secs_f64());
    }
    ExitCode::from(code)
}

fn config(cli: &Cli) -> Result<Config> {
    if !(cli.tol.is_finite() && cli.tol >= 0.0) {
        bail!("--tol must be a nonnegative number");
    }
    if cli.grid == 0 {
        bail!("--grid must be positive");
    }
    Ok(Config { tol: cli.tol, grid: cli.grid, grid_cap: cli.grid_cap })
}

fn read_game(path: &Path) -> Result<Game> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    load_game(&bytes).with_context(|| format!("loading {}", path.display()))
}

fn read_profile(game: &Game, path: &Path) -> Result<Profile> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    load_profile(game, &bytes).with_context(|| format!("loading {}", path.display()))
}

fn write_or_print(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn report(cli: &Cli, command: &'static str, game: &Game) -> RunReport {
    RunReport::new(command).input("game", game_hash(game)).config("tol", cli.tol).config("grid", cli.grid)
}

fn run(cli: &Cli) -> Result<u8> {
    let cfg = config(cli)?;
    match &cli.cmd {
        Cmd::Solve { game, method } => {
            let game = read_game(game)?;
            let mut rep = report(cli, "solve", &game);
            let out = match solve(&game, method, &cfg)? {
                Ok(out) => out,
                Err(reason) => {
                    rep.result = json!({ "status": "unsupported", "reason": reason });
                    rep.print();
                    return Ok(3);
                }
            };
            rep.result = out.to_json(&game);
            rep.print();
            Ok(status_code(out.status))
        }
        Cmd::Verify { game, profile, mode, approx } => {
            let game = read_game(game)?;
            let p = read_profile(&game, profile)?;
            game.check_feasible(&p, cfg.tol)?;
            let r = match mode {
                VerifyMode::Nash => verify_nash(&game, &p, &cfg),
                VerifyMode::Pairwise => verify_pairwise(&game, &p, &cfg),
            };
            let mut rep = report(cli, "verify", &game).input("profile", fingerprint(&p));
            let mut result = r.to_json(&game);
            if *approx {
                let a = approximation_factor(&game, &p, &cfg);
                let nodes: Vec<&str> = a.nodes.iter().map(|&v| game.node(v).id.as_str()).collect();
                result["approximation"] = json!({
                    "factor": if a.infinite { json!("inf") } else { json!(a.factor) },
                    "nodes": nodes,
                });
            }
            rep.result = result;
            rep.print();
            Ok(match r.verdict {
                Verdict::Stable => 0,
                Verdict::UnilateralDeviation | Verdict::BilateralDeviation => 2,
                Verdict::StableAtResolution => 4,
            })
        }
        Cmd::Dynamics { game, mode, seed, seeds, max_rounds, start, out } => {
            let game = read_game(game)?;
            let p0 = match start {
                Some(path) => read_profile(&game, path)?,
                None => Profile::zeros(&game),
            };
            game.check_feasible(&p0, cfg.tol)?;
            if *seeds == 0 {
                bail!("--seeds must be at least 1");
            }
            let mode = match mode {
                DynMode::Random => Mode::Random,
                DynMode::Concurrent => Mode::Concurrent,
            };
            let runs: Vec<Trajectory> = (*seed..*seed + *seeds)
                .into_par_iter()
                .map(|s| dynamics::run(&game, &p0, s, *max_rounds, mode, &cfg))
                .collect::<contribnet::Result<_>>()?;
            if let Some(path) = out {
                let mut buf = Vec::new();
                for t in &runs {
                    t.write_jsonl(&game, &mut buf)?;
                }
                fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
            }
            let mut rep = report(cli, "dynamics", &game)
                .input("start", fingerprint(&p0))
                .config("seed", *seed)
                .config("seeds", *seeds)
                .config("max_rounds", *max_rounds as u64)
                .config("mode", json!(mode));
            let verdicts: Vec<Value> = runs
                .iter()
                .map(|t| {
                    let mut v = t.verdict_json(&game);
                    v.as_object_mut().unwrap().remove("type");
                    v["seed"] = json!(t.seed);
                    v
                })
                .collect();
            rep.result = if runs.len() == 1 { verdicts.into_iter().next().unwrap() } else { Value::Array(verdicts) };
            rep.print();
            let code = if runs.iter().all(|t| t.converged()) {
                0
            } else if runs.iter().any(|t| matches!(t.verdict, TerminalVerdict::CycleDetected { .. })) {
                2
            } else {
                4
            };
            Ok(code)
        }
        Cmd::Optimum { game, method } => {
            let game = read_game(game)?;
            let m = opt_method(&game, method)?;
            let opt = solvers::social_optimum(&game, m, &cfg)?;
            let mut rep = report(cli, "optimum", &game);
            rep.result = opt.to_json(&game);
            rep.print();
            Ok(0)
        }
        Cmd::Poa { game, method, opt_method: om } => {
            let game = read_game(game)?;
            let mut rep = report(cli, "poa", &game);
            let out = match solve(&game, method, &cfg)? {
                Ok(out) => out,
                Err(reason) => {
                    rep.result = json!({ "solve": { "status": "unsupported", "reason": reason } });
                    rep.print();
                    return Ok(3);
                }
            };
            let Some(eq) = out.profile.as_ref().filter(|_| out.status == Status::Equilibrium) else {
                rep.result = json!({ "solve": out.to_json(&game) });
                rep.print();
                return Ok(status_code(out.status));
            };
            let opt = solvers::social_optimum(&game, opt_method(&game, om)?, &cfg)?;
            let poa = solvers::price_of_anarchy(&game, eq, opt.welfare, &cfg, false)?;
            let mut poa_json = poa.to_json();
            if !opt.is_exact() && poa.equilibrium_welfare > 0.0 && opt.upper_bound.is_finite() {
                poa_json["ratio_upper_bound"] = json!(opt.upper_bound / poa.equilibrium_welfare);
            }
            rep.result = json!({ "solve": out.to_json(&game), "optimum": opt.to_json(&game), "poa": poa_json });
            rep.print();
            Ok(0)
        }
        Cmd::Certificate { game, profile } => {
            let game = read_game(game)?;
            let p = read_profile(&game, profile)?;
            let cert = solvers::dual_certificate(&game, &p, &cfg)?;
            let mut rep = report(cli, "certificate", &game).input("profile", fingerprint(&p));
            rep.result = cert.to_json(&game);
            rep.print();
            Ok(if cert.feasible { 0 } else { 2 })
        }
        Cmd::Oracle { game } => {
            let game = read_game(game)?;
            let raw = grid_equilibria(&game, cfg.grid, cfg.grid_cap, cfg.tol)?;
            let raw_count = raw.len();
            let surviving: Vec<Profile> = raw.into_iter().filter(|p| verify_pairwise(&game, p, &cfg).witness.is_none()).collect();
            let (best, w) = grid_optimum(&game, cfg.grid, cfg.grid_cap)?;
            let mut rep = report(cli, "oracle", &game);
            rep.result = json!({
                "resolution": cfg.grid,
                "grid_equilibria": raw_count,
                "equilibria": equilibria_to_json(&game, &surviving),
                "optimum": { "welfare": w, "profile": profile_to_value(&game, &best) },
            });
            rep.print();
            Ok(0)
        }
        Cmd::Gen { what } => generate(what),
    }
}

fn status_code(s: Status) -> u8 {
    match s {
        Status::Equilibrium => 0,
        Status::NoEquilibrium => 2,
        Status::Unsupported => 3,
    }
}

fn applicable(game: &Game, method: &str) -> bool {
    match method {
        "greedy-c0" => game.all_rewards(|r| r.in_c0()),
        "weighted-sum" => game.all_rewards(|r| r.is_weighted_sum()),
        "min-convex-uniform" => game.uniform_budgets() && game.all_rewards(|r| r.min_h().is_some_and(|h| h.shape().is_convex())),
        "min-concave" => is_min_concave(game),
        "max-effort" => game.all_rewards(|r| r.max_h().is_some()),
        _ => false,
    }
}

/// Runs the named solver; the inner `Err` is a refusal reason for `auto`.
fn solve(game: &Game, method: &str, cfg: &Config) -> Result<std::result::Result<SolveOutcome, String>> {
    let method = if method == "auto" {
        let found: Vec<&str> = SOLVERS.into_iter().filter(|m| applicable(game, m)).collect();
        match found.len() {
            _ if game.m() == 0 => "greedy-c0",
            1 => found[0],
            0 => {
                let mut families: Vec<&str> = game.edges().iter().map(|e| e.reward.family()).collect();
                families.sort_unstable();
                families.dedup();
                let reason = if families.len() > 1 {
                    format!("mixed reward classes ({}); pass --method explicitly", families.join(", "))
                } else {
                    format!("no equilibrium algorithm covers this {} game", families[0])
                };
                return Ok(Err(reason));
            }
            _ => bail!("several methods apply ({}); pass --method explicitly", found.join(", ")),
        }
    } else {
        method
    };
    Ok(Ok(match method {
        "greedy-c0" => solvers::solve_greedy_c0(game),
        "weighted-sum" => solvers::solve_weighted_sum(game),
        "min-convex-uniform" => solvers::solve_min_convex_uniform(game),
        "min-concave" => solvers::solve_min_concave(game, cfg),
        "max-effort" => solvers::solve_max_effort(game, cfg)?,
        other => bail!("unknown method '{other}'; expected auto or one of {}", SOLVERS.join(", ")),
    }))
}

fn opt_method(game: &Game, name: &str) -> Result<OptMethod> {
    if name == "auto" {
        return Ok(OptMethod::for_game(game).unwrap_or(OptMethod::Grid));
    }
    OptMethod::parse(name).with_context(|| format!("unknown optimum method '{name}'"))
}

fn generate(what: &GenCmd) -> Result<u8> {
    match what {
        GenCmd::Canonical { name, eps, out, start_out } => {
            let c = instances::canonical(name, *eps)?;
            write_or_print(out.as_deref(), &save_game(&c.game))?;
            if let Some(path) = start_out {
                let Some(start) = &c.start else { bail!("'{name}' has no prescribed start profile") };
                fs::write(path, save_profile(&c.game, start)).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        GenCmd::Random { family, n, density, seed, out } => {
            let game = instances::random_family(Family::parse(family)?, *n, *density, *seed)?;
            write_or_print(out.as_deref(), &save_game(&game))?;
        }
        GenCmd::Gadget { kind, cnf, out, recipe_out } => {
            let text = fs::read_to_string(cnf).with_context(|| format!("reading {}", cnf.display()))?;
            let f = CnfFormula::parse_dimacs(&text)?;
            let game = match kind {
                GadgetKind::XySum => instances::sat_gadget_xy_sum(&f)?,
                GadgetKind::Min => instances::sat_gadget_min(&f, false)?,
                GadgetKind::MinUniform => instances::sat_gadget_min(&f, true)?,
            };
            write_or_print(out.as_deref(), &save_game(&game))?;
            if let Some(path) = recipe_out {
                let Some(a) = f.solve() else { bail!("formula is unsatisfiable or too large to solve by enumeration") };
                let p = match kind {
                    GadgetKind::XySum => instances::xy_sum_recipe(&game, &f, &a)?,
                    GadgetKind::Min => instances::min_recipe(&game, &f, &a, false)?,
                    GadgetKind::MinUniform => instances::min_recipe(&game, &f, &a, true)?,
                };
                fs::write(path, save_profile(&game, &p)).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        GenCmd::Cnf { k, l, seed, out } => {
            let f = instances::random_satisfiable_cnf(*k, *l, *seed)?;
            write_or_print(out.as_deref(), f.to_dimacs().as_bytes())?;
        }
    }
    Ok(0)
}
