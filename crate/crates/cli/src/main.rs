//! `lssmor`: generate, reduce, simulate and compare linear switched systems.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use lssmor::experiment::{compare, comparison_run, random_lss, ComparisonSpec, RandomLssSpec};
use lssmor::moment::{check_partial_realization, reduce};
use lssmor::nice::{
    check_selection, default_depth_cap, match_sequence, reduce_alpha, reduce_alphabeta, reduce_beta,
    sequence_alpha, sequence_beta, Matched, SelectionCheck, Side,
};
use lssmor::selection::SelectionFile;
use lssmor::simulate::{random_switching, simulate, white_noise};
use lssmor::{Error, Lss64, Mode, ReductionMode, Report64, Signal64, SwitchingSequence, Word};

#[derive(Parser)]
#[command(name = "lssmor", version, about = "Moment-matching reduction of linear switched systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random system with prescribed per-mode spectral radius.
    Gen(GenArgs),
    /// Reduce a model and write the reduced model plus a report.
    Reduce(ReduceArgs),
    /// Simulate a model on a fixed or random switching signal.
    Simulate(SimulateArgs),
    /// Compare a model against a reduced model over random switching signals.
    Compare(CompareArgs),
    /// Print the Markov parameters of a model up to a word length.
    Markov(MarkovArgs),
    /// Check a reduced model against the matching conditions it claims.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    p: usize,
    #[arg(long, default_value_t = 2)]
    modes: usize,
    /// Spectral radius of each mode matrix before the shift.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Added to the diagonal; negative values give Hurwitz modes.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    shift: f64,
    #[arg(long)]
    zero_x0: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    NMatch,
    Nice,
    Sequence,
}

/// What a reduced model is supposed to match.
#[derive(Args)]
struct MatchArgs {
    /// Markov-parameter depth for n-match.
    #[arg(long = "N")]
    depth: Option<usize>,
    /// Projection mode for n-match: R, O or T.
    #[arg(long, default_value = "R")]
    mode: ReductionMode,
    /// Nice selection JSON for the nice method.
    #[arg(long)]
    selection: Option<PathBuf>,
    /// Mode sequence for the sequence method, e.g. 1221.
    #[arg(long)]
    upsilon: Option<String>,
    #[arg(long, default_value = "column")]
    side: Side,
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    #[command(flatten)]
    target: MatchArgs,
    #[arg(long)]
    out: PathBuf,
    /// Report JSON; defaults to the output path with a `.report.json` suffix.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SwitchingArgs {
    /// Fixed switching signal `q:duration,...`; random when omitted.
    #[arg(long)]
    switching: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    /// Minimum dwell per mode, `q=val,...` (default 0.1 for unlisted modes).
    #[arg(long)]
    min_dwell: Option<String>,
    #[arg(long)]
    first_mode: Option<Mode>,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    switching: SwitchingArgs,
    /// Input CSV (`t,u1,..`); seeded white noise when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    reduced: PathBuf,
    #[arg(long, default_value_t = 500)]
    seeds: usize,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    #[arg(long)]
    min_dwell: Option<String>,
    #[arg(long)]
    first_mode: Option<Mode>,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Base seed; run `k` uses seed `base + k`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV of `y` and `ybar` for the first run.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Metrics JSON with per-run and aggregate BFR.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct MarkovArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    depth: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    reduced: PathBuf,
    #[command(flatten)]
    target: MatchArgs,
    /// Maximum accepted error.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long)]
    report: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Reduce(a) => cmd_reduce(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Markov(a) => cmd_markov(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::RankFailure(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn load_model(path: &Path) -> anyhow::Result<Lss64> {
    Lss64::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn write_json(path: &Path, value: &Value) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Full-precision rendering used in human-readable output.
fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_upsilon(s: &Option<String>) -> anyhow::Result<Word> {
    let Some(s) = s else { bail!("--upsilon is required for the sequence method") };
    Ok(Word::parse(s)?)
}

fn parse_min_dwell(spec: &Option<String>, modes: usize) -> anyhow::Result<Vec<f64>> {
    let mut dwell = vec![0.1; modes];
    let Some(spec) = spec else { return Ok(dwell) };
    for part in spec.split(',').filter(|s| !s.trim().is_empty()) {
        let (q, v) = part.split_once('=').with_context(|| format!("dwell entry {part:?} is not q=val"))?;
        let q: usize = q.trim().parse().with_context(|| format!("bad mode {q:?}"))?;
        if q == 0 || q > modes {
            bail!("dwell entry for mode {q}, but the model has {modes} modes");
        }
        dwell[q - 1] = v.trim().parse().with_context(|| format!("bad dwell {v:?}"))?;
    }
    Ok(dwell)
}

fn switching_string(mu: &SwitchingSequence<f64>) -> String {
    mu.segments().iter().map(|(q, t)| format!("{q}:{t}")).collect::<Vec<_>>().join(",")
}

fn ranks_json(rep: &Report64) -> Value {
    json!({ "v": rep.ranks.v, "w": rep.ranks.w, "wv": rep.ranks.wv })
}

fn check_json(check: &SelectionCheck<f64>) -> Value {
    json!({
        "max_error": check.max_error,
        "items": check.items.len(),
        "worst": check.worst().map(|w| w.to_string()),
    })
}

/// Reduces `sys` as requested and returns the report plus the matching
/// error from the oracle appropriate to the method.
fn run_reduction(sys: &Lss64, method: Method, t: &MatchArgs) -> anyhow::Result<(Report64, Value, f64)> {
    match method {
        Method::NMatch => {
            let depth = t.depth.context("--N is required for the n-match method")?;
            let rep = reduce(sys, depth, t.mode)?;
            let matched = rep.matched_depth.unwrap_or(depth);
            let err = check_partial_realization(sys, &rep.reduced, matched)?;
            let info = json!({ "N": depth, "matched_depth": matched });
            Ok((rep, info, err))
        }
        Method::Nice => {
            let path = t.selection.as_ref().context("--selection is required for the nice method")?;
            let file = SelectionFile::load(path).with_context(|| format!("loading selection {}", path.display()))?;
            let beta = file.has_columns().then(|| file.column_selection().languages().to_automata());
            let alpha = file.row_selection().map(|r| r.languages().to_automata());
            let (rep, matched) = match (&alpha, &beta) {
                (Some(a), Some(b)) => (reduce_alphabeta(sys, a, b)?, Matched::Entries { alpha: a, beta: b }),
                (None, Some(b)) => (reduce_beta(sys, b)?, Matched::Columns(b)),
                (Some(a), None) => (reduce_alpha(sys, a)?, Matched::Rows(a)),
                (None, None) => bail!("selection {} is empty", path.display()),
            };
            let check = check_selection(sys, &rep.reduced, matched, default_depth_cap(sys, matched))?;
            let err = check.max_error;
            Ok((rep, json!({ "selection": path, "check": check_json(&check) }), err))
        }
        Method::Sequence => {
            let upsilon = parse_upsilon(&t.upsilon)?;
            let rep = match_sequence(sys, &upsilon, t.side)?;
            let check = sequence_check(sys, &rep.reduced, &upsilon, t.side)?;
            let side = match t.side {
                Side::Column => "column",
                Side::Row => "row",
            };
            let info = json!({ "upsilon": upsilon.to_string(), "side": side, "sequence_equivalence": check_json(&check) });
            Ok((rep, info, check.max_error))
        }
    }
}

fn sequence_check(sys: &Lss64, red: &Lss64, upsilon: &Word, side: Side) -> anyhow::Result<SelectionCheck<f64>> {
    Ok(match side {
        Side::Column => {
            let beta = sequence_beta(sys, upsilon)?;
            let m = Matched::Columns(&beta);
            check_selection(sys, red, m, default_depth_cap(sys, m))?
        }
        Side::Row => {
            let alpha = sequence_alpha(sys, upsilon)?;
            let m = Matched::Rows(&alpha);
            check_selection(sys, red, m, default_depth_cap(sys, m))?
        }
    })
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::NMatch => "n-match",
        Method::Nice => "nice",
        Method::Sequence => "sequence",
    }
}

fn cmd_gen(a: GenArgs) -> anyhow::Result<()> {
    let spec = RandomLssSpec {
        n: a.n,
        m: a.m,
        p: a.p,
        modes: a.modes,
        radius: a.radius,
        shift: a.shift,
        zero_x0: a.zero_x0,
    };
    if spec.n == 0 || spec.m == 0 || spec.p == 0 || spec.modes == 0 || spec.modes > 9 {
        bail!("need n, m, p >= 1 and 1 <= modes <= 9");
    }
    random_lss(&spec, a.seed).save(&a.out)?;
    println!("wrote {} (n={}, m={}, p={}, modes={})", a.out.display(), a.n, a.m, a.p, a.modes);
    Ok(())
}

fn cmd_reduce(a: ReduceArgs) -> anyhow::Result<()> {
    let sys = load_model(&a.model)?;
    let (rep, info, err) = run_reduction(&sys, a.method, &a.target)?;
    rep.reduced.save(&a.out)?;
    let report_path = a.report.unwrap_or_else(|| a.out.with_extension("report.json"));
    let report = json!({
        "method": method_name(a.method),
        "mode": rep.mode.to_string(),
        "original_dim": sys.n,
        "reduced_dim": rep.reduced.n,
        "ranks": ranks_json(&rep),
        "wv_condition": rep.wv_condition,
        "max_error": err,
        "details": info,
    });
    write_json(&report_path, &report)?;
    println!("reduced {} -> {} states (mode {})", sys.n, rep.reduced.n, rep.mode);
    println!("max matching error {}", sci(err));
    Ok(())
}

fn switching_for(sys: &Lss64, a: &SwitchingArgs) -> anyhow::Result<SwitchingSequence<f64>> {
    match &a.switching {
        Some(s) => Ok(SwitchingSequence::parse(s)?),
        None => {
            let dwell = parse_min_dwell(&a.min_dwell, sys.mode_count())?;
            Ok(random_switching(sys.mode_count(), a.horizon, &dwell, a.seed, a.first_mode)?)
        }
    }
}

fn cmd_simulate(a: SimulateArgs) -> anyhow::Result<()> {
    let sys = load_model(&a.model)?;
    let mu = switching_for(&sys, &a.switching)?;
    let dt = a.switching.dt;
    let u = match &a.input {
        Some(path) => {
            let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            Signal64::read_csv(f, Some(dt))?
        }
        None => {
            let steps = (mu.total_duration() / dt).round() as usize;
            white_noise(sys.m, steps, dt, a.switching.seed)
        }
    };
    let y = simulate(&sys, &mu, &u)?;
    let f = fs::File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    y.write_csv(std::io::BufWriter::new(f))?;
    println!("switching {}", switching_string(&mu));
    println!("wrote {} samples to {}", y.len(), a.out.display());
    Ok(())
}

fn write_pair_csv(path: &Path, y: &Signal64, ybar: &Signal64) -> anyhow::Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    let mut header = vec!["t".to_string()];
    header.extend((1..=y.dim()).map(|i| format!("y{i}")));
    header.extend((1..=ybar.dim()).map(|i| format!("ybar{i}")));
    writeln!(out, "{}", header.join(","))?;
    for k in 0..y.len() {
        let mut row = vec![format!("{:.16e}", y.time(k))];
        row.extend(y.values[k].iter().chain(ybar.values[k].iter()).map(|v| format!("{v:.16e}")));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> anyhow::Result<()> {
    let sys = load_model(&a.model)?;
    let red = load_model(&a.reduced)?;
    let spec = ComparisonSpec {
        horizon: a.horizon,
        dt: a.dt,
        min_dwell: parse_min_dwell(&a.min_dwell, sys.mode_count())?,
        first_mode: a.first_mode,
        seeds: a.seeds,
        base_seed: a.seed,
    };
    let summary = compare(&sys, &red, &spec)?;
    if let Some(path) = &a.csv {
        let (_, y, ybar) = comparison_run(&sys, &red, &spec, spec.base_seed)?;
        write_pair_csv(path, &y, &ybar)?;
    }
    if let Some(path) = &a.metrics {
        let runs: Vec<Value> = summary
            .runs
            .iter()
            .map(|r| json!({ "seed": r.seed, "switching": switching_string(&r.switching), "bfr": r.bfr }))
            .collect();
        let metrics = json!({
            "seeds": a.seeds,
            "horizon": a.horizon,
            "dt": a.dt,
            "min_dwell": spec.min_dwell,
            "runs": runs,
            "mean": summary.mean,
            "best": summary.best,
            "worst": summary.worst,
        });
        write_json(path, &metrics)?;
    }
    println!("mean BFR {}", sci(summary.mean));
    println!("best BFR {}", sci(summary.best));
    println!("worst BFR {}", sci(summary.worst));
    println!(
        "{} runs: mean {:.4}%, best {:.4}%, worst {:.4}%",
        summary.runs.len(),
        summary.mean,
        summary.best,
        summary.worst
    );
    Ok(())
}

fn cmd_markov(a: MarkovArgs) -> anyhow::Result<()> {
    let sys = load_model(&a.model)?;
    let params = sys.markov_parameters_up_to(a.depth)?;
    let entries: Vec<Value> = params
        .values()
        .map(|mp| {
            let rows: Vec<Vec<f64>> = mp.value.row_iter().map(|r| r.iter().copied().collect()).collect();
            json!({ "word": mp.word.to_string(), "value": rows })
        })
        .collect();
    let text = serde_json::to_string_pretty(&Value::Array(entries))? + "\n";
    match &a.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> anyhow::Result<()> {
    let sys = load_model(&a.model)?;
    let red = load_model(&a.reduced)?;
    let t = &a.target;
    let (what, err, detail) = if let Some(depth) = t.depth {
        ("markov", check_partial_realization(&sys, &red, depth)?, json!({ "depth": depth }))
    } else if let Some(path) = &t.selection {
        let file = SelectionFile::load(path)?;
        let beta = file.has_columns().then(|| file.column_selection().languages().to_automata());
        let alpha = file.row_selection().map(|r| r.languages().to_automata());
        let matched = match (&alpha, &beta) {
            (Some(a), Some(b)) => Matched::Entries { alpha: a, beta: b },
            (None, Some(b)) => Matched::Columns(b),
            (Some(a), None) => Matched::Rows(a),
            (None, None) => bail!("selection {} is empty", path.display()),
        };
        let check = check_selection(&sys, &red, matched, default_depth_cap(&sys, matched))?;
        ("selection", check.max_error, check_json(&check))
    } else if t.upsilon.is_some() {
        let upsilon = parse_upsilon(&t.upsilon)?;
        let check = sequence_check(&sys, &red, &upsilon, t.side)?;
        ("sequence", check.max_error, check_json(&check))
    } else {
        bail!("nothing to verify: pass --N, --selection or --upsilon");
    };
    let pass = err <= a.tol;
    if let Some(path) = &a.report {
        write_json(path, &json!({ "check": what, "max_error": err, "tol": a.tol, "pass": pass, "details": detail }))?;
    }
    println!("{what} check: max error {} ({})", sci(err), if pass { "ok" } else { "FAILED" });
    if !pass {
        bail!("error {} exceeds tolerance {}", sci(err), sci(a.tol));
    }
    Ok(())
}
