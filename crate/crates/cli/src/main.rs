use std::collections::hash_map::DefaultHasher;
use std::fs::{self, File};
use std::hash::{Hash, Hasher};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use metab_core::coset::{BoxIndex, CosetAction};
use metab_core::group::{check_consistency, load_group, structure, triangularize, GroupError, Presentation};
use metab_core::interval::{make_params, Overrides, ParamError, SystemParams, DEFAULT_EPS_POS, DEFAULT_PREC, DEFAULT_TRUNC};
use metab_core::lattice::IMat;
use metab_core::measure::Measure;
use metab_core::realization::{glue, RealizeError, RealizedAction};
use metab_core::regularity::{
    dkn_verdict, holder_report, path_sum_search, replay_witness, Envelope, HolderConfig, PathSumConfig, RegularityError,
    Verdict,
};

#[derive(Parser, Debug)]
#[command(name = "metab", version, about = "Metabelian nilpotent groups acting on the interval")]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every command. Flags override the config file, which overrides the defaults.
#[derive(Args, Debug, Clone, Default)]
struct RunArgs {
    /// Catalog id (heisenberg:2, chain:3, grid:2,1,[[2]], product:A;B) or path to a JSON spec
    #[arg(long, global = true)]
    group: Option<String>,
    /// Regularity target alpha, a decimal or fraction [default: 0.45]
    #[arg(long, global = true)]
    alpha: Option<String>,
    /// 1-based index of the retained g generator [default: 1]
    #[arg(long, global = true)]
    pivot: Option<usize>,
    /// Working precision in bits [default: 128]
    #[arg(long, global = true)]
    prec: Option<u32>,
    /// Truncation radius of the mass tails [default: 512]
    #[arg(long, global = true)]
    trunc: Option<u64>,
    /// Position enclosure width target [default: 1e-20]
    #[arg(long = "eps-pos", global = true)]
    eps_pos: Option<f64>,
    /// Seed for every random choice [default: 7]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for CSV and JSON reports [default: none, stdout only]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON file with any of the keys above (eps_pos for --eps-pos)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for block-mass caches, keyed by group and parameters
    #[arg(long = "cache-dir", global = true)]
    cache_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Group inspection
    #[command(subcommand)]
    Group(GroupCmd),
    /// Symbolic coset action
    #[command(subcommand)]
    Action(ActionCmd),
    /// Interval-system exponents and their conditions
    Params {
        /// Rank k of G/A (taken from --group when omitted)
        #[arg(long)]
        k: Option<usize>,
        /// Rank d of A (taken from --group when omitted)
        #[arg(long)]
        d: Option<usize>,
    },
    /// Realized action on [0, 1]
    #[command(subcommand)]
    Realize(RealizeCmd),
    /// Hölder quotients of log Dg at increasing sample radius
    Holder {
        #[arg(long)]
        word: String,
        /// Tested exponent in (0, 1)
        #[arg(long, default_value_t = 0.45)]
        exponent: f64,
        #[arg(long, default_value_t = 3)]
        levels: u32,
        /// Radius of the first level
        #[arg(long, default_value_t = 2)]
        base: i64,
    },
    /// Path sums and the commuting-element obstruction
    #[command(subcommand)]
    Obstruct(ObstructCmd),
}

#[derive(Subcommand, Debug)]
enum GroupCmd {
    /// Ranks, nilpotency degree, growth degree and center
    Info { id: Option<String> },
    /// Unitriangularity, commutation, associativity and maximality checks
    Check { id: Option<String> },
    /// Conjugate integer matrices to upper unitriangular form; input is a JSON file
    /// holding a list of square matrices, or a group whose matrices are used
    Triangularize { input: String },
}

#[derive(Subcommand, Debug)]
enum ActionCmd {
    /// Shifts of every generator on ||i||_inf <= radius as CSV
    Table {
        #[arg(long, default_value_t = 3)]
        radius: i64,
    },
    /// Fitted polynomial bound on the shifts
    Fit {
        #[arg(long, default_value_t = 10)]
        n: u64,
    },
}

#[derive(Subcommand, Debug)]
enum RealizeCmd {
    /// Image and derivative of x under a word
    Eval {
        #[arg(long)]
        word: String,
        #[arg(long)]
        x: f64,
    },
    /// Sampled map x, g(x), Dg(x) as CSV
    Export {
        #[arg(long)]
        word: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
    },
    /// Glue one copy per pivot and print the faithfulness certificate
    Glue {
        /// Evaluate this word on the glued action at --x
        #[arg(long)]
        word: Option<String>,
        #[arg(long)]
        x: Option<f64>,
    },
}

#[derive(Subcommand, Debug)]
enum ObstructCmd {
    /// Walk search over Z^k with lengths (1 + ||v||_1)^(-decay)
    Paths {
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 2.2)]
        decay: f64,
        #[arg(long, default_value_t = 0.6)]
        beta: f64,
        #[arg(long, default_value_t = 1_000_000)]
        budget: u64,
    },
    /// Verdict for a commuting element on one box of the glued action
    Verdict {
        /// Element that must commute with the generator subset
        #[arg(long, default_value = "C")]
        word: String,
        /// Box as i_1,...,i_k:j
        #[arg(long = "box", default_value = "origin")]
        bx: String,
        /// Comma-separated f generators (labels); all f's when omitted
        #[arg(long)]
        gens: Option<String>,
        #[arg(long, default_value_t = 0.75)]
        beta: f64,
        #[arg(long, default_value_t = 1000)]
        budget: u64,
    },
}

enum Failure {
    Validation(String),
    Compute(String),
}

impl From<GroupError> for Failure {
    fn from(e: GroupError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<ParamError> for Failure {
    fn from(e: ParamError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<RealizeError> for Failure {
    fn from(e: RealizeError) -> Self {
        match e {
            RealizeError::Group(_) | RealizeError::OutOfRange(_) | RealizeError::Params(_) => {
                Failure::Validation(e.to_string())
            }
            _ => Failure::Compute(e.to_string()),
        }
    }
}

impl From<RegularityError> for Failure {
    fn from(e: RegularityError) -> Self {
        match e {
            RegularityError::Realize(r) => r.into(),
            RegularityError::Csv(_) => Failure::Compute(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Compute(format!("io: {e}"))
    }
}

type Res<T> = Result<T, Failure>;

/// Settings after merging flags, config file and defaults.
struct Run {
    group: Option<String>,
    alpha: String,
    pivot: usize,
    prec: u32,
    trunc: u64,
    eps_pos: f64,
    seed: u64,
    out: Option<PathBuf>,
    cache_dir: Option<PathBuf>,
}

fn resolve(args: RunArgs) -> Res<Run> {
    let cfg: Value = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?
        }
        None => Value::Null,
    };
    let get = |key: &str| cfg.get(key).filter(|v| !v.is_null());
    let bad = |key: &str| Failure::Validation(format!("config key `{key}` has the wrong type"));
    let text = |key: &str| -> Res<Option<String>> {
        match get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(Value::Number(n)) => Ok(Some(n.to_string())),
            Some(_) => Err(bad(key)),
        }
    };
    let uint = |key: &str| -> Res<Option<u64>> { get(key).map(|v| v.as_u64().ok_or_else(|| bad(key))).transpose() };
    let float = |key: &str| -> Res<Option<f64>> { get(key).map(|v| v.as_f64().ok_or_else(|| bad(key))).transpose() };
    let pivot = args.pivot.or(uint("pivot")?.map(|v| v as usize)).unwrap_or(1);
    if pivot == 0 {
        return Err(Failure::Validation("--pivot is 1-based".into()));
    }
    Ok(Run {
        group: args.group.or(text("group")?),
        alpha: args.alpha.or(text("alpha")?).unwrap_or_else(|| "0.45".into()),
        pivot,
        prec: args.prec.or(uint("prec")?.map(|v| v as u32)).unwrap_or(DEFAULT_PREC),
        trunc: args.trunc.or(uint("trunc")?).unwrap_or(DEFAULT_TRUNC),
        eps_pos: args.eps_pos.or(float("eps_pos")?).unwrap_or(DEFAULT_EPS_POS),
        seed: args.seed.or(uint("seed")?).unwrap_or(7),
        out: args.out.or(text("out")?.map(PathBuf::from)),
        cache_dir: args.cache_dir.or(text("cache_dir")?.map(PathBuf::from)),
    })
}

impl Run {
    fn presentation(&self, positional: Option<&str>) -> Res<Presentation> {
        let id = positional
            .or(self.group.as_deref())
            .ok_or_else(|| Failure::Validation("no group given (use --group)".into()))?;
        Ok(load_group(id)?)
    }

    fn params(&self, k: usize, d: usize) -> Res<SystemParams> {
        let ov = Overrides {
            pivot: Some(self.pivot - 1),
            eps_pos: Some(self.eps_pos),
            trunc: Some(self.trunc),
            prec: Some(self.prec),
            ..Default::default()
        };
        Ok(make_params(&self.alpha, k, d, &ov)?)
    }

    fn cache_path(&self, p: &Presentation, params: &SystemParams) -> Option<PathBuf> {
        let dir = self.cache_dir.as_ref()?;
        let mut h = DefaultHasher::new();
        p.to_json().to_string().hash(&mut h);
        let g = h.finish();
        let mut h = DefaultHasher::new();
        params.tag().hash(&mut h);
        Some(dir.join(format!("{g:016x}-{:016x}-v{}.cache", h.finish(), env!("CARGO_PKG_VERSION"))))
    }

    fn measure(&self, p: &Presentation, params: &SystemParams) -> Arc<Measure> {
        let m = Measure::new(params);
        if let Some(path) = self.cache_path(p, params) {
            if let Ok(f) = File::open(&path) {
                // a stale or damaged cache is ignored
                let _ = m.load_cache(BufReader::new(f));
            }
        }
        Arc::new(m)
    }

    fn store(&self, p: &Presentation, m: &Measure) -> Res<()> {
        if let Some(path) = self.cache_path(p, m.params()) {
            fs::create_dir_all(path.parent().unwrap())?;
            m.save_cache(BufWriter::new(File::create(path)?))?;
        }
        Ok(())
    }

    fn realize<'a>(&self, p: &'a Presentation) -> Res<RealizedAction<'a>> {
        if self.pivot > p.d() {
            return Err(Failure::Validation(format!("pivot {} out of 1..={}", self.pivot, p.d())));
        }
        let params = self.params(p.k(), p.d())?;
        let m = self.measure(p, &params);
        Ok(RealizedAction::with_measure(p, params, m)?)
    }

    fn output(&self, name: &str) -> Res<Option<BufWriter<File>>> {
        match &self.out {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                Ok(Some(BufWriter::new(File::create(dir.join(name))?)))
            }
            None => Ok(None),
        }
    }

    fn write_json(&self, name: &str, v: &Value) -> Res<()> {
        if let Some(mut f) = self.output(name)? {
            serde_json::to_writer_pretty(&mut f, v).map_err(|e| Failure::Compute(e.to_string()))?;
            writeln!(f)?;
        }
        Ok(())
    }
}

fn matrix_json(m: &IMat) -> Value {
    Value::Array(m.to_rows().iter().map(|r| Value::Array(r.iter().map(|x| i64::try_from(x).map(|v| json!(v)).unwrap_or_else(|_| json!(x.to_string()))).collect())).collect())
}

fn parse_box(s: &str, k: usize) -> Res<BoxIndex> {
    if s == "origin" {
        return Ok(BoxIndex::origin(k));
    }
    let bad = || Failure::Validation(format!("box `{s}` is not of the form i_1,...,i_k:j"));
    let (iv, j) = s.split_once(':').ok_or_else(bad)?;
    let i: Vec<i64> = if iv.trim().is_empty() {
        vec![]
    } else {
        iv.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Res<_>>()?
    };
    if i.len() != k {
        return Err(Failure::Validation(format!("box `{s}` needs {k} i-coordinates")));
    }
    Ok(BoxIndex::from_i64(&i, j.trim().parse().map_err(|_| bad())?))
}

fn read_matrices(input: &str) -> Res<Vec<IMat>> {
    let path = Path::new(input);
    if path.exists() {
        let text = fs::read_to_string(path)?;
        let v: Value = serde_json::from_str(&text).map_err(|e| Failure::Validation(format!("{input}: {e}")))?;
        let list = v.get("matrices").unwrap_or(&v);
        let arr = list.as_array().ok_or_else(|| Failure::Validation("expected a list of matrices".into()))?;
        let mut out = Vec::new();
        for (n, m) in arr.iter().enumerate() {
            let rows: Option<Vec<Vec<i64>>> = m
                .as_array()
                .and_then(|rs| rs.iter().map(|r| r.as_array()?.iter().map(|x| x.as_i64()).collect()).collect());
            let rows = rows.ok_or_else(|| Failure::Validation(format!("matrix {}: rows of integers expected", n + 1)))?;
            if rows.iter().any(|r| r.len() != rows.len()) {
                return Err(Failure::Validation(format!("matrix {} is not square", n + 1)));
            }
            let refs: Vec<&[i64]> = rows.iter().map(|r| r.as_slice()).collect();
            out.push(IMat::from_i64(&refs));
        }
        return Ok(out);
    }
    Ok(load_group(input)?.conj().to_vec())
}

fn dispatch(cli: Cli) -> Res<()> {
    let run = resolve(cli.run)?;
    match cli.command {
        Command::Group(GroupCmd::Info { id }) => {
            let p = run.presentation(id.as_deref())?;
            let s = structure(&p)?;
            let center: Vec<String> = s.center.iter().map(|z| p.format_element(z)).collect();
            println!("k={}", p.k());
            println!("d={}", p.d());
            println!("generators: {}", p.labels().join(" "));
            println!("nilpotency degree {}", s.degree);
            println!("series ranks {:?}", s.ranks);
            println!("growth degree tau {}", s.tau);
            println!("center rank {}", s.center.len());
            println!("center basis: {}", center.join(", "));
            run.write_json(
                "group_info.json",
                &json!({
                    "k": p.k(), "d": p.d(), "degree": s.degree, "ranks": s.ranks,
                    "tau": s.tau, "center": center, "presentation": p.to_json(),
                }),
            )
        }
        Command::Group(GroupCmd::Check { id }) => {
            let p = run.presentation(id.as_deref())?;
            let rep = check_consistency(&p);
            println!("triples checked {}", rep.triples_checked);
            for f in &rep.failures {
                println!("failure: {f}");
            }
            println!("{}", if rep.ok() { "consistent" } else { "inconsistent" });
            let failures: Vec<String> = rep.failures.iter().map(|f| f.to_string()).collect();
            run.write_json("group_check.json", &json!({"ok": rep.ok(), "triples": rep.triples_checked, "failures": failures}))?;
            if rep.ok() {
                Ok(())
            } else {
                Err(Failure::Validation("presentation failed the consistency checks".into()))
            }
        }
        Command::Group(GroupCmd::Triangularize { input }) => {
            let raw = read_matrices(&input)?;
            let (pm, out) = triangularize(&raw).map_err(|e| Failure::Validation(e.to_string()))?;
            println!("P = {}", matrix_json(&pm));
            for (t, a) in out.iter().enumerate() {
                println!("A_{} = {}", t + 1, matrix_json(a));
            }
            let conj: Vec<Value> = out.iter().map(matrix_json).collect();
            run.write_json("triangularize.json", &json!({"P": matrix_json(&pm), "conj": conj}))
        }
        Command::Action(cmd) => {
            let p = run.presentation(None)?;
            let a = CosetAction::new(&p, run.pivot - 1)?;
            match cmd {
                ActionCmd::Table { radius } => {
                    match run.output("action_table.csv")? {
                        Some(f) => a.table_csv(radius, f),
                        None => a.table_csv(radius, std::io::stdout().lock()),
                    }
                    .map_err(|e| Failure::Compute(e.to_string()))?;
                    Ok(())
                }
                ActionCmd::Fit { n } => {
                    let fit = a.fit_bound(n);
                    println!("M_hat {:.6}", fit.m_hat);
                    println!("slope {:.6} (d = {})", fit.slope, p.d());
                    run.write_json("action_fit.json", &json!({"m_hat": fit.m_hat, "slope": fit.slope, "d": p.d(), "n": n}))
                }
            }
        }
        Command::Params { k, d } => {
            let (k, d) = match (k, d) {
                (Some(k), Some(d)) => (k, d),
                _ => {
                    let p = run.presentation(None)?;
                    (k.unwrap_or(p.k()), d.unwrap_or(p.d()))
                }
            };
            let params = run.params(k, d)?;
            let p: Vec<String> = params.p.iter().map(|x| x.to_string()).collect();
            println!("alpha {}", params.alpha);
            println!("p = ({})", p.join(", "));
            println!("r = {}", params.r);
            for c in params.conditions() {
                println!("{} {}: {}", c.name, if c.holds { "holds" } else { "FAILS" }, c.statement);
            }
            run.write_json(
                "params.json",
                &json!({"alpha": params.alpha.to_string(), "p": p, "r": params.r.to_string(), "conditions": params.conditions()}),
            )
        }
        Command::Realize(cmd) => {
            let p = run.presentation(None)?;
            match cmd {
                RealizeCmd::Eval { word, x } => {
                    let a = run.realize(&p)?;
                    let w = p.parse_word(&word)?;
                    let (y, dy) = a.eval(&w, x)?;
                    println!("x {x:.17}");
                    println!("y {y:.17}");
                    println!("Dg {dy:.17e}");
                    run.store(&p, a.measure())
                }
                RealizeCmd::Export { word, n } => {
                    let a = run.realize(&p)?;
                    let w = p.parse_word(&word)?;
                    let skipped = match run.output("realize_export.csv")? {
                        Some(f) => a.export_csv(&w, n, f)?,
                        None => a.export_csv(&w, n, std::io::stdout().lock())?,
                    };
                    eprintln!("{skipped} unresolved points skipped");
                    run.store(&p, a.measure())
                }
                RealizeCmd::Glue { word, x } => {
                    let sets = (0..p.d()).map(|_| run.params(p.k(), p.d())).collect::<Res<Vec<_>>>()?;
                    let g = glue(&p, &sets)?;
                    let cert = g.certificate();
                    for w in &cert.witnesses {
                        let carrier = w.carrier.map(|c| (c + 1).to_string()).unwrap_or_else(|| "none".into());
                        println!("center {} on carrier {carrier}: shift {}", p.format_element(&w.element), w.shift);
                    }
                    println!("certificate {}", if cert.passed() { "passed" } else { "failed" });
                    if let (Some(word), Some(x)) = (word, x) {
                        let (y, dy) = g.eval(&p.parse_word(&word)?, x)?;
                        println!("y {y:.17}");
                        println!("Dg {dy:.17e}");
                    }
                    if cert.passed() {
                        Ok(())
                    } else {
                        Err(Failure::Compute("faithfulness certificate failed".into()))
                    }
                }
            }
        }
        Command::Holder { word, exponent, levels, base } => {
            let p = run.presentation(None)?;
            let a = run.realize(&p)?;
            let w = p.parse_word(&word)?;
            let cfg = HolderConfig { base, ..Default::default() };
            let rep = holder_report(&a, &w, exponent, levels, &cfg)?;
            println!("{rep}");
            if let Some(f) = run.output("holder.csv")? {
                rep.write_csv(f)?;
            }
            Ok(())
        }
        Command::Obstruct(ObstructCmd::Paths { k, decay, beta, budget }) => {
            if k == 0 || !(decay > 0.0) {
                return Err(Failure::Validation("need k >= 1 and decay > 0".into()));
            }
            let length = move |v: &[i64]| (1.0 + v.iter().map(|x| x.abs() as f64).sum::<f64>()).powf(-decay);
            let cfg = PathSumConfig { seed: run.seed, ..Default::default() };
            let rep = path_sum_search(&length, Some(Envelope { c: 1.0, s: decay }), k, beta, budget, &cfg)?;
            println!("{rep}");
            run.write_json(
                "paths.json",
                &json!({
                    "beta": beta, "budget": budget, "outcome": rep.outcome.to_string(),
                    "best": {"walk": rep.best.kind.to_string(), "steps": rep.best.steps, "sum": rep.best.sum,
                             "tail_bound": rep.best.tail_bound, "checkpoints": rep.best.checkpoints},
                }),
            )
        }
        Command::Obstruct(ObstructCmd::Verdict { word, bx, gens, beta, budget }) => {
            let p = run.presentation(None)?;
            let sets = (0..p.d()).map(|_| run.params(p.k(), p.d())).collect::<Res<Vec<_>>>()?;
            let g = glue(&p, &sets)?;
            let a = &g.copies()[run.pivot.min(p.d()) - 1];
            let w = p.parse_word(&word)?;
            let b = parse_box(&bx, p.k())?;
            let subset: Vec<usize> = match gens {
                None => (0..p.k()).collect(),
                Some(list) => list
                    .split(',')
                    .map(|l| p.gen_id(l.trim()).ok_or_else(|| Failure::Validation(format!("unknown generator `{l}`"))))
                    .collect::<Res<_>>()?,
            };
            let v = dkn_verdict(a, &w, &b, &subset, beta, budget)?;
            println!("{v}");
            if let Verdict::Obstructs { witness, .. } = &v {
                let ok = replay_witness(a, &b, &subset, beta, witness)?;
                println!("witness replay {}", if ok { "matches" } else { "DIFFERS" });
                run.write_json(
                    "verdict.json",
                    &json!({"obstructs": true, "beta": beta, "path": witness.path, "partial_sum": witness.partial_sum,
                            "tail_bound": witness.tail_bound, "replayed": ok}),
                )?;
            } else {
                run.write_json("verdict.json", &json!({"obstructs": false, "beta": beta, "detail": v.to_string()}))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Compute(m)) => {
            eprintln!("computation error: {m}");
            ExitCode::from(2)
        }
    }
}
