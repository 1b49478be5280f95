//! Subcommand implementations behind the `mathesis` binary.
//!
//! Each command returns an exit code and the text for stdout. Exit codes:
//! 0 success, 1 honest failure (no proof, inconsistent state, failing
//! suite), 2 usage, parse or input error.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::brain::{self, BrainConfig, BrainParams};
use crate::config::{stream, Config, ConfigError, CONFIG_ENV, VERSION};
use crate::energy::{total_energy, DomainWeights};
use crate::expr_io::{emit_trace, load_problem, parse_trace, ProofTrace, TraceEnd, TraceHeader, TraceStep};
use crate::hypergraph::rules::{apply_action, legal_actions};
use crate::hypergraph::{Action, EntityRef, MathState, RuleLibrary};
use crate::search::eps::goal_energy;
use crate::search::{eps_search, goal_proven, lifted_residual, mcts_search, EpsConfig, Guide, Individual, MctsConfig, Mutation};
use crate::selftest;
use crate::training::{
    algebraic_lift, behavior_clone, ladder, BcConfig, ExpertTrace, LadderConfig, Task, TrainConfig, Trainer, LABELS,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("{0}")]
    Config(#[from] ConfigError),
}

impl CliError {
    pub fn code(&self) -> i32 {
        2
    }

    fn input(path: &Path, message: impl ToString) -> Self {
        CliError::Input {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
}

/// Settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: Config,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
}

impl RunOptions {
    pub fn new(config: Config, out: impl Into<PathBuf>, workers: usize) -> Result<Self, CliError> {
        if workers == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        Ok(RunOptions {
            seed: config.get("seed", 0u64)?,
            config,
            workers,
            out: out.into(),
        })
    }

    fn library(&self) -> Result<RuleLibrary, CliError> {
        let name = self.config.raw("search.library").unwrap_or("logic");
        RuleLibrary::by_name(name).ok_or_else(|| CliError::Usage(format!("unknown rule library `{name}`")))
    }

    fn artifact(&self, name: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out).map_err(|e| CliError::input(&self.out, e))?;
        Ok(self.out.join(name))
    }
}

/// Reads the configuration file (the explicit path, else the one named by
/// `MATHESIS_CONFIG`, else none), then applies `key=value` overrides and an
/// explicit seed. Later sources win.
pub fn load_config(file: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Config, CliError> {
    let env_path = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
    let mut config = match file.map(Path::to_path_buf).or(env_path) {
        Some(p) => {
            let text = fs::read_to_string(&p).map_err(|e| CliError::input(&p, e))?;
            Config::parse(&text).map_err(|e| CliError::input(&p, e))?
        }
        None => Config::new(),
    };
    config.apply_overrides(overrides.iter().map(String::as_str))?;
    if let Some(s) = seed {
        config.set("seed", s.to_string());
    }
    Ok(config)
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::input(path, e))
}

fn weights(c: &Config) -> Result<DomainWeights, CliError> {
    let d = DomainWeights::default();
    Ok(DomainWeights {
        matrix: c.get("energy.w_matrix", d.matrix)?,
        ideal: c.get("energy.w_ideal", d.ideal)?,
        geometry: c.get("energy.w_geometry", d.geometry)?,
    })
}

fn problem(path: &Path, c: &Config) -> Result<crate::expr_io::BuiltProblem, CliError> {
    let dim = c.get("problem.dim", 2usize)?;
    load_problem(&read(path)?, dim).map_err(|d| CliError::input(path, d))
}

/// Energy report of a problem's premises under its bindings, with unbound
/// slots at their defaults.
pub fn cmd_verify(path: &Path, opts: &RunOptions) -> Result<Outcome, CliError> {
    let mut built = problem(path, &opts.config)?;
    built.binding.fill_defaults(&built.state);
    let tol = opts.config.get("verify.tol", 1e-8)?;
    let report = total_energy(&built.state, &built.binding, &weights(&opts.config)?).map_err(|e| CliError::input(path, e))?;
    let consistent = report.total < tol;
    let per_edge: Vec<_> = report
        .per_edge
        .iter()
        .map(|(id, e)| {
            json!({
                "edge": id.0,
                "fact": built.state.render(EntityRef::Edge(*id)),
                "domain": e.domain,
                "value": e.value,
                "violated": e.value >= tol,
            })
        })
        .collect();
    let out = json!({
        "problem": path.display().to_string(),
        "total": report.total,
        "consistent": consistent,
        "tolerance": tol,
        "per_edge": per_edge,
        "warnings": report.warnings,
        "seed": opts.seed,
        "config_hash": opts.config.hash(),
        "version": VERSION,
    });
    Ok(Outcome {
        code: if consistent { 0 } else { 1 },
        stdout: serde_json::to_string_pretty(&out).expect("serializable") + "\n",
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Mcts,
    Eps,
    Greedy,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mcts" => Ok(Method::Mcts),
            "eps" => Ok(Method::Eps),
            "greedy" => Ok(Method::Greedy),
            _ => Err(format!("unknown method `{s}` (expected mcts, eps or greedy)")),
        }
    }
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Mcts => "mcts",
            Method::Eps => "eps",
            Method::Greedy => "greedy",
        }
    }
}

fn load_trainer(path: &Path) -> Result<Trainer, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::input(path, e))?;
    Trainer::from_bytes(&bytes).map_err(|e| CliError::input(path, e))
}

/// Brain parameters from `prove.checkpoint`, if configured.
fn checkpoint_params(opts: &RunOptions) -> Result<Option<BrainParams>, CliError> {
    match opts.config.raw("prove.checkpoint") {
        Some(p) => Ok(Some(load_trainer(Path::new(p))?.params)),
        None => Ok(None),
    }
}

fn fresh_params(opts: &RunOptions) -> Result<BrainParams, CliError> {
    let d = BrainConfig::default();
    let cfg = BrainConfig {
        d_model: opts.config.get("brain.d_model", d.d_model)?,
        layers: opts.config.get("brain.layers", d.layers)?,
        max_arity: opts.config.get("brain.max_arity", d.max_arity)?,
    };
    Ok(BrainParams::new(cfg, &LABELS, opts.seed))
}

fn header(problem: &Path, method: &str, opts: &RunOptions, e0: f64) -> TraceHeader {
    TraceHeader {
        problem: problem.display().to_string(),
        seed: opts.seed,
        method: method.into(),
        config_hash: opts.config.hash(),
        version: VERSION.into(),
        e0,
    }
}

/// Goal proven as a fact with residual below `eps` where the state lifts.
fn proved(state: &MathState, eps: f64, cap: u32) -> bool {
    goal_proven(state) && lifted_residual(state, cap).is_none_or(|r| r < eps)
}

/// Replays `actions`, scoring each state by its goal energy.
fn action_trace(root: &MathState, actions: &[Action], lib: &RuleLibrary, hdr: TraceHeader, tc: &TrainConfig) -> (ProofTrace, MathState) {
    let cap = tc.witness_degree_cap;
    let mut s = root.clone();
    let mut e = hdr.e0;
    let mut steps = Vec::new();
    for (t, a) in actions.iter().enumerate() {
        s = apply_action(&s, a, lib).expect("searched actions replay");
        // Energies never rise along a trace, matching training episodes.
        let e_next = goal_energy(&s, cap).abs().min(e);
        let bonus = if proved(&s, tc.eps_tol, cap) { tc.r_success } else { 0.0 };
        steps.push(TraceStep {
            t,
            action: a.to_string(),
            e: e_next,
            r: (e - e_next) - tc.lambda_cost + bonus,
        });
        e = e_next;
    }
    let success = proved(&s, tc.eps_tol, cap);
    let trace = ProofTrace {
        header: hdr,
        steps,
        end: TraceEnd {
            done: true,
            e_final: e,
            success,
        },
    };
    (trace, s)
}

/// Searches for a proof and writes `trace.jsonl` to the output directory.
/// The budget (`prove.budget`) counts simulations for mcts, generations
/// for eps and steps for greedy.
pub fn cmd_prove(path: &Path, method: Method, opts: &RunOptions) -> Result<Outcome, CliError> {
    let built = problem(path, &opts.config)?;
    let root = built.state;
    let lib = opts.library()?;
    let tc = TrainConfig::from_config(&opts.config, opts.seed)?;
    let cap = tc.witness_degree_cap;
    let trained = checkpoint_params(opts)?;
    let trace_path = opts.artifact("trace.jsonl")?;
    // Before any action no witness exists, so a liftable goal starts at ‖h‖².
    let e0 = algebraic_lift(&root).map_or_else(|_| goal_energy(&root, cap), |l| l.goal.norm_sq());
    let brain_err = |e: brain::BrainError| CliError::input(path, e);

    let (text, success, summary) = match method {
        Method::Mcts => {
            let cfg = MctsConfig {
                simulations: opts.config.get("prove.budget", 1000usize)?,
                c_puct: opts.config.get("search.c_puct", 1.5)?,
                max_depth: opts.config.get("search.max_depth", 30usize)?,
                seed: opts.seed,
            };
            let guide = trained.as_ref().map_or(Guide::Uniform, Guide::Brain);
            let out = mcts_search(&root, guide, &lib, &cfg).map_err(brain_err)?;
            let (trace, _) = action_trace(&root, &out.actions, &lib, header(path, method.name(), opts, e0), &tc);
            let summary = format!("mcts: {} simulations, {} nodes, {} steps", cfg.simulations, out.nodes.len(), trace.steps.len());
            (emit_trace(&trace), trace.end.success, summary)
        }
        Method::Greedy => {
            algebraic_lift(&root).map_err(|e| CliError::input(path, format!("greedy needs a liftable problem: {e}")))?;
            let params = match trained {
                Some(p) => p,
                None => fresh_params(opts)?,
            };
            let budget = opts.config.get("prove.budget", tc.t_max)?;
            let mut s = root.clone();
            let mut actions = Vec::new();
            while actions.len() < budget && !proved(&s, tc.eps_tol, cap) {
                let legal = legal_actions(&s, &lib);
                if legal.is_empty() {
                    break;
                }
                let a = brain::choose_action::<rand_chacha::ChaCha8Rng>(&s, &params, &legal, None).map_err(brain_err)?;
                s = apply_action(&s, &a, &lib).expect("legal actions apply");
                actions.push(a);
            }
            let (trace, _) = action_trace(&root, &actions, &lib, header(path, method.name(), opts, e0), &tc);
            let summary = format!("greedy: {} steps", trace.steps.len());
            (emit_trace(&trace), trace.end.success, summary)
        }
        Method::Eps => {
            let d = EpsConfig::default();
            let cfg = EpsConfig {
                generations: opts.config.get("prove.budget", d.generations)?,
                population: opts.config.get("eps.population", d.population)?,
                elites: opts.config.get("eps.elites", d.elites)?,
                eps: tc.eps_tol,
                witness_degree_cap: cap,
                selection_floor: opts.config.get("eps.selection_floor", d.selection_floor)?,
                require_goal_fact: true,
                seed: opts.seed,
            };
            if cfg.population == 0 {
                return Err(CliError::Usage("eps.population must be positive".into()));
            }
            let seedling = Individual::new(root.clone(), &lib, &cfg);
            let mutation = trained.as_ref().map_or(Mutation::Uniform, Mutation::Policy);
            let out = eps_search(vec![seedling; cfg.population], mutation, &lib, &cfg).map_err(brain_err)?;
            // One record per generation stands in for the step records.
            let mut text = serde_json::to_string(&header(path, method.name(), opts, e0)).expect("serializable") + "\n";
            for g in &out.stats {
                text += &(serde_json::to_string(g).expect("serializable") + "\n");
            }
            let end = TraceEnd {
                done: true,
                e_final: -out.best.fitness,
                success: out.solved,
            };
            text += &(serde_json::to_string(&end).expect("serializable") + "\n");
            let summary = format!("eps: {} generations, best goal energy {:e}", out.generations, -out.best.fitness);
            (text, out.solved, summary)
        }
    };
    write(&trace_path, text.as_bytes())?;
    let status = if success { "proved" } else { "no proof within budget" };
    Ok(Outcome {
        code: if success { 0 } else { 1 },
        stdout: format!("{status}; {summary}; trace written to {}\n", trace_path.display()),
    })
}

fn ladder_config(c: &Config) -> Result<LadderConfig, CliError> {
    let d = LadderConfig {
        min_links: 2,
        max_links: 5,
        max_distractors: 4,
    };
    let l = LadderConfig {
        min_links: c.get("family.min_links", d.min_links)?,
        max_links: c.get("family.max_links", d.max_links)?,
        max_distractors: c.get("family.max_distractors", d.max_distractors)?,
    };
    if l.min_links == 0 || l.min_links > l.max_links || l.max_links + 3 > LABELS.len() {
        return Err(CliError::Usage("family links must satisfy 1 ≤ min ≤ max ≤ 13".into()));
    }
    Ok(l)
}

/// Trains on the given problem files (cycled) or, with none, on the
/// synthetic ladder family. Writes `checkpoint.bin` after every batch and
/// appends one JSON line per batch to `metrics.jsonl`. With `resume` an
/// existing checkpoint in the output directory is continued. `episodes`
/// is run length rather than configuration, so it stays out of the config
/// hash; without it `train.episodes` (default 200) applies.
pub fn cmd_train(problems: &[PathBuf], episodes: Option<u64>, resume: bool, opts: &RunOptions) -> Result<Outcome, CliError> {
    let lib = opts.library()?;
    let tc = TrainConfig::from_config(&opts.config, opts.seed)?;
    let episodes = match episodes {
        Some(n) => n,
        None => opts.config.get("train.episodes", 200u64)?,
    };
    let mut files = Vec::new();
    for p in problems {
        let built = problem(p, &opts.config)?;
        algebraic_lift(&built.state).map_err(|e| CliError::input(p, format!("training needs liftable problems: {e}")))?;
        files.push(Task {
            name: p.display().to_string(),
            state: built.state,
        });
    }
    let lc = ladder_config(&opts.config)?;
    let seed = opts.seed;
    let tasks = |i: u64| -> Task {
        if files.is_empty() {
            ladder(&mut stream(seed, "family", i), &lc, &format!("ladder-{i}")).task()
        } else {
            files[i as usize % files.len()].clone()
        }
    };

    let ckpt = opts.artifact("checkpoint.bin")?;
    let metrics_path = opts.artifact("metrics.jsonl")?;
    let hash = opts.config.hash();
    let mut trainer = if resume && ckpt.exists() {
        let t = load_trainer(&ckpt)?;
        if t.seed != seed {
            return Err(CliError::Usage(format!("checkpoint seed {} differs from run seed {seed}", t.seed)));
        }
        t
    } else {
        Trainer::new(fresh_params(opts)?, seed, &hash)
    };
    let mut log = fs::OpenOptions::new()
        .create(true)
        .write(true)
        .append(resume)
        .truncate(!resume)
        .open(&metrics_path)
        .map_err(|e| CliError::input(&metrics_path, e))?;
    let mut io_err = None;
    let metrics = {
        let mut on_batch = |m: &crate::training::BatchMetrics, _: &[crate::training::Episode]| {
            let line = serde_json::to_string(m).expect("serializable") + "\n";
            if let Err(e) = log.write_all(line.as_bytes()) {
                io_err.get_or_insert(CliError::input(&metrics_path, e));
            }
        };
        let start = trainer.episodes_done;
        let mut all = Vec::new();
        // Checkpoint after every batch so an interrupted run can resume.
        while trainer.episodes_done < start + episodes {
            let n = (tc.batch_episodes as u64).min(start + episodes - trainer.episodes_done);
            let m = trainer.train(n, &tasks, &lib, &tc, &mut on_batch).map_err(|e| CliError::Usage(e.to_string()))?;
            write(&ckpt, &trainer.to_bytes())?;
            all.extend(m);
        }
        all
    };
    if let Some(e) = io_err {
        return Err(e);
    }
    write(&ckpt, &trainer.to_bytes())?;
    let last = metrics.last().map_or(0.0, |m| m.success_rate);
    Ok(Outcome {
        code: 0,
        stdout: format!(
            "trained {episodes} episodes ({} total) in {} batches; last batch success {:.3}; checkpoint {}\n",
            trainer.episodes_done,
            metrics.len(),
            last,
            ckpt.display()
        ),
    })
}

/// Expert traces from trace files whose header names the problem file, or
/// `bc.traces` scripted ladder derivations when no files are given.
fn bc_dataset(traces: &[PathBuf], lib: &RuleLibrary, opts: &RunOptions) -> Result<Vec<ExpertTrace>, CliError> {
    if traces.is_empty() {
        let n = opts.config.get("bc.traces", 10u64)?;
        let lc = ladder_config(&opts.config)?;
        return Ok((0..n)
            .map(|i| ladder(&mut stream(opts.seed, "bc-family", i), &lc, &format!("ladder-{i}")).expert(lib))
            .collect());
    }
    let mut out = Vec::new();
    for p in traces {
        let trace = parse_trace(&read(p)?).map_err(|d| CliError::input(p, d))?;
        let named = PathBuf::from(&trace.header.problem);
        let problem_path = if named.exists() {
            named
        } else {
            p.parent().unwrap_or(Path::new(".")).join(&named)
        };
        let state = problem(&problem_path, &opts.config)?.state;
        let actions = trace.actions().map_err(|d| CliError::input(p, d))?;
        out.push(ExpertTrace {
            task: Task {
                name: trace.header.problem.clone(),
                state,
            },
            actions,
        });
    }
    Ok(out)
}

/// Behavior cloning; writes a trainer checkpoint and the loss curve.
pub fn cmd_bc(traces: &[PathBuf], opts: &RunOptions) -> Result<Outcome, CliError> {
    let lib = opts.library()?;
    let dataset = bc_dataset(traces, &lib, opts)?;
    let cfg = BcConfig::from_config(&opts.config)?;
    let mut params = fresh_params(opts)?;
    let report = behavior_clone(&dataset, &mut params, &cfg, &lib).map_err(|e| CliError::Usage(e.to_string()))?;
    let trainer = Trainer::new(params, opts.seed, &opts.config.hash());
    let ckpt = opts.artifact("checkpoint.bin")?;
    write(&ckpt, &trainer.to_bytes())?;
    let log = json!({
        "traces": dataset.len(),
        "updates": report.updates,
        "losses": report.losses,
        "final_cross_entropy": report.final_loss(),
        "seed": opts.seed,
        "config_hash": opts.config.hash(),
        "version": VERSION,
    });
    write(&opts.artifact("bc.json")?, (log.to_string() + "\n").as_bytes())?;
    Ok(Outcome {
        code: 0,
        stdout: format!(
            "cloned {} traces in {} updates; final cross-entropy {:.6}; checkpoint {}\n",
            dataset.len(),
            report.updates,
            report.final_loss(),
            ckpt.display()
        ),
    })
}

/// Faithfulness and finite-difference suites as a pass/fail table.
pub fn cmd_selftest(opts: &RunOptions) -> Result<Outcome, CliError> {
    let cases = opts.config.get("selftest.cases", 50usize)?;
    let fd_seeds = opts.config.get("selftest.fd_seeds", 100usize)?;
    let tol = opts.config.get("selftest.fd_tol", 1e-5)?;
    let reports = [
        selftest::faithfulness_suite(opts.seed, cases),
        selftest::smoothness_suite(opts.seed, fd_seeds, tol),
    ];
    Ok(Outcome {
        code: if reports.iter().all(selftest::SuiteReport::passed) { 0 } else { 1 },
        stdout: selftest::table(&reports),
    })
}
