//! `ctmc-trunc`: stationary distributions and error bounds from the command line.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on numerical failures.

use clap::{Args, Parser, Subcommand};
use ctmc_trunc::bench::{
    compare_schemes, schlogl_reference, toggle_reference, BenchmarkCase, CaseId, SchloglParams, TOGGLE_C,
};
use ctmc_trunc::dist::{write_state_table, BoundsPair, TruncatedDistribution};
use ctmc_trunc::errors::{
    beta_grid_search, drift_apply, liu_bound, stationary_residual, tighten_bound_lp, ErrorReport, Rigor, TailInfo,
};
use ctmc_trunc::model::{parse_model, ReactionNetwork, State};
use ctmc_trunc::schemes::bdp::{bdp_bounds, bdp_conditional, BirthDeathSpec};
use ctmc_trunc::schemes::ita::{
    ita_average_bounds, ita_bounds, ita_marginal_bounds, ita_sweep, AverageCase, MarginalBounds, TailBound,
};
use ctmc_trunc::schemes::ldqbdp::{extract_blocks, ldqbdp_solve, r_matrix_recursion};
use ctmc_trunc::schemes::lp::{
    build_polytope, ilp_average_bounds, ilp_marginal_bounds, ilp_statewise_bounds, lp_approximate, OuterPolytope,
};
use ctmc_trunc::schemes::ta::{build_augmented, ta_diagnostics, ta_solve, ReentrySpec};
use ctmc_trunc::simulate::{empirical_distribution, gillespie_with_burn_in, DEFAULT_JUMP_CAP};
use ctmc_trunc::statespace::{
    build_sublevel_truncation, communicating_classes, detect_levels, interior_set, ClassDecomposition, NormLikeFn,
    StateFn, Truncation, TruncationKind, DEFAULT_STATE_CAP,
};
use ctmc_trunc::Error;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

#[derive(Parser, Debug)]
#[command(name = "ctmc-trunc", version, about = "Truncation-based stationary distributions of reaction networks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Approximate the stationary distribution on a truncation.
    Solve(SolveArgs),
    /// Statewise, marginal or average bounds, or the TA error bound.
    Bounds(BoundsArgs),
    /// Benchmark table of all schemes over a truncation grid.
    Compare(CompareArgs),
    /// Gillespie simulation and its time-average distribution.
    Simulate(SimulateArgs),
    /// Closed communicating classes of a truncation.
    Classes(CommonArgs),
    /// Evaluate a Foster-Lyapunov drift condition on a finite set.
    DriftCheck(DriftArgs),
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// Model file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Norm-like function defining the truncation `{w < r}`.
    #[arg(long)]
    trunc_w: Option<String>,
    #[arg(long)]
    trunc_r: Option<f64>,
    /// Explicit truncation: CSV with one column per species and a header row.
    #[arg(long)]
    trunc_file: Option<PathBuf>,
    /// Level function for the LDQBDP scheme.
    #[arg(long)]
    levels: Option<String>,
    /// Moment function `w` of the bound `pi(w) <= c`.
    #[arg(long)]
    moment_w: Option<String>,
    #[arg(long)]
    moment_c: Option<f64>,
    /// Re-entry: state:<counts>, uniform, boundary-mid or conditional:<N>.
    #[arg(long, default_value = "boundary-mid")]
    reentry: String,
    #[arg(long)]
    beta: Option<f64>,
    /// state, marginal:<species> or average:<expr>.
    #[arg(long, default_value = "state")]
    objective: String,
    /// Output prefix; files are <prefix>.csv and <prefix>.json.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads for the sweeps and the benchmark (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Relative tolerance of analytic references.
    #[arg(long, default_value_t = 1e-20)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    state_cap: usize,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// bdp, ldqbdp, ta, ita, lp or ilp.
    #[arg(long)]
    scheme: String,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// ita, ilp, bdp or liu.
    #[arg(long, default_value = "ita")]
    scheme: String,
    /// Average-bound case: nonneg, nonpos or growth:<sup |f|/w outside>.
    #[arg(long, default_value = "nonneg")]
    case: String,
    /// Lyapunov function for the liu scheme.
    #[arg(long)]
    v: Option<String>,
    /// `F = {set_w < set_r}` for the liu scheme.
    #[arg(long)]
    set_w: Option<String>,
    #[arg(long)]
    set_r: Option<f64>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// toggle, schlogl-bimodal or schlogl-unimodal.
    #[arg(long)]
    case: String,
    /// Levels of the toggle reference truncation.
    #[arg(long, default_value_t = 238)]
    ref_levels: usize,
    /// Leave wall_ms empty so the table is reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Initial counts, comma separated.
    #[arg(long)]
    x0: String,
    #[arg(long)]
    t_final: f64,
    /// Fraction of [0, t_final] discarded.
    #[arg(long, default_value_t = 0.0)]
    burn_in: f64,
    #[arg(long, default_value_t = DEFAULT_JUMP_CAP)]
    jump_cap: u64,
}

#[derive(Args, Debug)]
struct DriftArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    v: String,
    #[arg(long, default_value = "1")]
    f: String,
    #[arg(long)]
    set_w: String,
    #[arg(long)]
    set_r: f64,
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(msg.into()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let common = match &cli.cmd {
        Cmd::Solve(a) => &a.common,
        Cmd::Bounds(a) => &a.common,
        Cmd::Compare(a) => &a.common,
        Cmd::Simulate(a) => &a.common,
        Cmd::Classes(a) => a,
        Cmd::DriftCheck(a) => &a.common,
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return usage("--threads must be positive");
        }
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.cmd {
        Cmd::Solve(a) => cmd_solve(&a),
        Cmd::Bounds(a) => cmd_bounds(&a),
        Cmd::Compare(a) => cmd_compare(&a),
        Cmd::Simulate(a) => cmd_simulate(&a),
        Cmd::Classes(a) => cmd_classes(&a),
        Cmd::DriftCheck(a) => cmd_drift_check(&a),
    }
}

fn load_model(c: &CommonArgs) -> CliResult<ReactionNetwork> {
    let Some(path) = &c.model else { return usage("--model is required") };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read model {}: {e}", path.display())))?;
    Ok(parse_model(&text)?)
}

fn norm_fn(net: &ReactionNetwork, text: &str) -> CliResult<NormLikeFn> {
    Ok(NormLikeFn::parse(net, text)?)
}

fn load_truncation(net: &ReactionNetwork, c: &CommonArgs) -> CliResult<Arc<Truncation>> {
    if let Some(path) = &c.trunc_file {
        if c.trunc_w.is_some() {
            return usage("--trunc-file and --trunc-w are mutually exclusive");
        }
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
        let mut states = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(Error::from)?;
            let counts: std::result::Result<Vec<u32>, _> = rec.iter().map(|s| s.trim().parse::<u32>()).collect();
            let counts = counts.map_err(|_| Failure::Usage(format!("bad state row in {}", path.display())))?;
            if counts.len() != net.n_species() {
                return usage(format!("truncation rows need {} columns", net.n_species()));
            }
            states.push(State(counts));
        }
        return Ok(Arc::new(Truncation::from_states(states, TruncationKind::Explicit, 0.0)?));
    }
    let (Some(w), Some(r)) = (&c.trunc_w, c.trunc_r) else {
        return usage("a truncation needs --trunc-w and --trunc-r, or --trunc-file");
    };
    let w = norm_fn(net, w)?;
    Ok(Arc::new(build_sublevel_truncation(net, &w, r, &[], c.state_cap)?))
}

fn moment(net: &ReactionNetwork, c: &CommonArgs, scheme: &str) -> CliResult<(NormLikeFn, f64)> {
    match (&c.moment_w, c.moment_c) {
        (Some(w), Some(mc)) => Ok((norm_fn(net, w)?, mc)),
        _ => usage(format!("--scheme {scheme} needs --moment-w and --moment-c")),
    }
}

fn moment_c(c: &CommonArgs, scheme: &str) -> CliResult<f64> {
    c.moment_c.ok_or_else(|| Failure::Usage(format!("--scheme {scheme} needs --moment-c")))
}

/// The moment route's tail bound needs the moment function to define the truncation.
fn check_moment_matches(c: &CommonArgs, t: &Truncation) -> CliResult<()> {
    if let (Some(mw), Some(tw)) = (&c.moment_w, &c.trunc_w) {
        if mw.trim() != tw.trim() {
            return usage("the tail bound c/r needs the truncation {w < r} of the moment function: --trunc-w must equal --moment-w");
        }
    }
    if t.kind() == TruncationKind::Explicit {
        return usage("the tail bound c/r needs a sublevel truncation");
    }
    Ok(())
}

fn out_prefix(c: &CommonArgs) -> PathBuf {
    c.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> CliResult<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, v).map_err(Error::from)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

fn write_point(net: &ReactionNetwork, prefix: &Path, p: &TruncatedDistribution) -> CliResult<()> {
    let f = create(&with_ext(prefix, "csv"))?;
    write_state_table(f, &net.species, p.truncation(), &[("probability", p.values())])?;
    Ok(())
}

fn write_bounds(net: &ReactionNetwork, prefix: &Path, b: &BoundsPair) -> CliResult<()> {
    let lower: Vec<f64> = (0..b.upper.len()).map(|i| b.lower_at(i)).collect();
    let f = create(&with_ext(prefix, "csv"))?;
    write_state_table(f, &net.species, b.truncation(), &[("lower", &lower), ("upper", b.upper.values())])?;
    Ok(())
}

fn add_residual(net: &ReactionNetwork, report: &mut ErrorReport, p: &TruncatedDistribution) -> CliResult<()> {
    let t = p.truncation();
    let interior: Vec<State> = interior_set(net, t)?.into_iter().map(|i| t.state(i).clone()).collect();
    report.diagnostic("interior_residual", stationary_residual(net, p, &interior)?, Rigor::Heuristic);
    Ok(())
}

fn bdp_spec(net: &ReactionNetwork, t: &Truncation) -> CliResult<BirthDeathSpec> {
    let spec = BirthDeathSpec::from_network(net)?;
    if t.states().iter().enumerate().any(|(i, x)| x.0[0] as usize != i) {
        return usage("the bdp scheme needs the truncation {0, ..., r-1}");
    }
    Ok(spec)
}

fn cmd_solve(a: &SolveArgs) -> CliResult<()> {
    let c = &a.common;
    let scheme = a.scheme.as_str();
    if !["bdp", "ldqbdp", "ta", "ita", "lp", "ilp"].contains(&scheme) {
        return usage(format!("unknown scheme `{scheme}` (expected bdp, ldqbdp, ta, ita, lp or ilp)"));
    }
    let net = load_model(c)?;
    // check flag combinations before any heavy work
    let mom = match scheme {
        "lp" | "ilp" => Some(moment(&net, c, scheme)?),
        "ita" => Some((norm_fn(&net, c.moment_w.as_deref().unwrap_or("0"))?, moment_c(c, scheme)?)),
        _ => None,
    };
    if scheme == "ldqbdp" && c.levels.is_none() {
        return usage("--scheme ldqbdp needs --levels");
    }
    let reentry = ReentrySpec::parse(&c.reentry)?;
    let t = load_truncation(&net, c)?;
    if mom.is_some() {
        check_moment_matches(c, &t)?;
    }
    let prefix = out_prefix(c);
    let mut report = ErrorReport::new(scheme, &t);
    match scheme {
        "bdp" => {
            let spec = bdp_spec(&net, &t)?;
            match c.moment_c {
                Some(mc) => {
                    let b = bdp_bounds(&spec, t.len(), mc)?;
                    report.attach_bounds(&b, TailInfo::Bound(mc / t.threshold()));
                    write_bounds(&net, &prefix, &b)?;
                }
                None => {
                    let p = bdp_conditional(&spec, t.len())?;
                    add_residual(&net, &mut report, &p)?;
                    write_point(&net, &prefix, &p)?;
                }
            }
        }
        "ldqbdp" => {
            let f = norm_fn(&net, c.levels.as_deref().unwrap())?;
            let levels = detect_levels(&net, &t, &f)?;
            let blocks = extract_blocks(&net, &t, &levels)?;
            let rs = r_matrix_recursion(&blocks, levels.n_levels())?;
            let p = ldqbdp_solve(&blocks, &rs)?;
            report.notes.push(format!("R matrices seeded with {} at the top level", rs.terminal));
            add_residual(&net, &mut report, &p)?;
            write_point(&net, &prefix, &p)?;
        }
        "ta" => {
            let sys = build_augmented(&net, &t, &reentry)?;
            let p = ta_solve(&sys)?;
            let (outflow, _) = ta_diagnostics(&sys, &p, None);
            report.diagnostic("outflow", outflow, Rigor::Heuristic);
            report.notes.push(format!("re-entry {}", c.reentry));
            add_residual(&net, &mut report, &p)?;
            write_point(&net, &prefix, &p)?;
        }
        "ita" => {
            let mc = mom.as_ref().unwrap().1;
            let b = ita_bounds(&ita_sweep(&net, &t)?, &TailBound::Moment { c: mc, r: t.threshold() })?;
            report.attach_bounds(&b, TailInfo::Bound(mc / t.threshold()));
            write_bounds(&net, &prefix, &b)?;
        }
        "lp" => {
            let (w, mc) = mom.as_ref().unwrap();
            let p = lp_approximate(&build_polytope(&net, &t, w, *mc)?)?;
            report.tail_bound = Some(ctmc_trunc::errors::Quantity { value: mc / t.threshold(), rigor: Rigor::Rigorous });
            add_residual(&net, &mut report, &p)?;
            write_point(&net, &prefix, &p)?;
        }
        _ => {
            let (w, mc) = mom.as_ref().unwrap();
            let (b, rep) = ilp_statewise_bounds(&build_polytope(&net, &t, w, *mc)?)?;
            report.attach_bounds(&b, TailInfo::Bound(mc / t.threshold()));
            report.notes.push(if rep.unique {
                "some lower bound is positive: the stationary distribution is unique".into()
            } else {
                "no positive lower bound: uniqueness not certified".into()
            });
            let failed = rep.entries.iter().filter(|e| e.failure.is_some()).count();
            if failed > 0 {
                report.notes.push(format!("{failed} programs failed; their states carry the trivial bounds [0, 1]"));
            }
            write_bounds(&net, &prefix, &b)?;
        }
    }
    std::fs::write(with_ext(&prefix, "json"), report.to_json()? + "\n")?;
    Ok(())
}

enum ObjectiveSpec {
    State,
    Marginal(usize),
    Average(String),
}

fn parse_objective(net: &ReactionNetwork, text: &str) -> CliResult<ObjectiveSpec> {
    let t = text.trim();
    if t == "state" {
        return Ok(ObjectiveSpec::State);
    }
    if let Some(s) = t.strip_prefix("marginal:") {
        let k = net.species.iter().position(|n| n == s.trim());
        return k.map(ObjectiveSpec::Marginal).ok_or_else(|| Failure::Usage(format!("unknown species `{s}`")));
    }
    if let Some(e) = t.strip_prefix("average:") {
        return Ok(ObjectiveSpec::Average(e.to_string()));
    }
    usage(format!("unknown objective `{t}` (expected state, marginal:<species> or average:<expr>)"))
}

fn parse_case(text: &str, c: Option<f64>) -> CliResult<AverageCase> {
    match text.trim() {
        "nonneg" => Ok(AverageCase::NonnegOutside),
        "nonpos" => Ok(AverageCase::NonposOutside),
        t => match t.strip_prefix("growth:").map(|s| s.trim().parse::<f64>()) {
            Some(Ok(sup_ratio)) => match c {
                Some(c) => Ok(AverageCase::GrowthControlled { c, sup_ratio }),
                None => usage("--case growth needs --moment-c"),
            },
            _ => usage(format!("unknown case `{t}` (expected nonneg, nonpos or growth:<ratio>)")),
        },
    }
}

fn write_marginal(net: &ReactionNetwork, prefix: &Path, m: &MarginalBounds) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(&with_ext(prefix, "csv"))?);
    w.write_record([net.species[m.species].as_str(), "lower", "upper"]).map_err(Error::from)?;
    for (i, idx) in m.index.iter().enumerate() {
        w.write_record([idx.to_string(), format!("{:e}", m.lower[i]), format!("{:e}", m.upper[i])]).map_err(Error::from)?;
    }
    w.flush()?;
    write_json(&with_ext(prefix, "json"), m)
}

fn cmd_bounds(a: &BoundsArgs) -> CliResult<()> {
    let c = &a.common;
    let net = load_model(c)?;
    let prefix = out_prefix(c);
    let scheme = a.scheme.as_str();
    if scheme == "liu" {
        return cmd_liu(a, &net, &prefix);
    }
    if !["ita", "ilp", "bdp"].contains(&scheme) {
        return usage(format!("unknown bounds scheme `{scheme}` (expected ita, ilp, bdp or liu)"));
    }
    let objective = parse_objective(&net, &c.objective)?;
    let mc = moment_c(c, scheme)?;
    let case = parse_case(&a.case, Some(mc))?;
    let poly_w = if scheme == "ilp" { Some(moment(&net, c, scheme)?.0) } else { None };
    let t = load_truncation(&net, c)?;
    check_moment_matches(c, &t)?;
    let tail = TailBound::Moment { c: mc, r: t.threshold() };
    match scheme {
        "bdp" => {
            if !matches!(objective, ObjectiveSpec::State) {
                return usage("the bdp scheme only gives statewise bounds");
            }
            let b = bdp_bounds(&bdp_spec(&net, &t)?, t.len(), mc)?;
            let mut report = ErrorReport::new(scheme, &t);
            report.attach_bounds(&b, TailInfo::Bound(tail.value()));
            write_bounds(&net, &prefix, &b)?;
            std::fs::write(with_ext(&prefix, "json"), report.to_json()? + "\n")?;
        }
        "ita" => {
            let sweep = ita_sweep(&net, &t)?;
            match objective {
                ObjectiveSpec::State => {
                    let b = ita_bounds(&sweep, &tail)?;
                    let mut report = ErrorReport::new(scheme, &t);
                    report.attach_bounds(&b, TailInfo::Bound(tail.value()));
                    write_bounds(&net, &prefix, &b)?;
                    std::fs::write(with_ext(&prefix, "json"), report.to_json()? + "\n")?;
                }
                ObjectiveSpec::Marginal(k) => write_marginal(&net, &prefix, &ita_marginal_bounds(&sweep, k, &tail)?)?,
                ObjectiveSpec::Average(e) => {
                    let f = norm_fn(&net, &e)?;
                    let vals: Vec<f64> = t.states().iter().map(|x| f.eval(x)).collect();
                    write_average(&prefix, &e, &ita_average_bounds(&sweep, &vals, &tail, case)?)?;
                }
            }
        }
        _ => {
            let poly: OuterPolytope = build_polytope(&net, &t, poly_w.as_ref().unwrap(), mc)?;
            match objective {
                ObjectiveSpec::State => {
                    let (b, rep) = ilp_statewise_bounds(&poly)?;
                    let mut report = ErrorReport::new(scheme, &t);
                    report.attach_bounds(&b, TailInfo::Bound(tail.value()));
                    if rep.unique {
                        report.notes.push("some lower bound is positive: the stationary distribution is unique".into());
                    }
                    write_bounds(&net, &prefix, &b)?;
                    std::fs::write(with_ext(&prefix, "json"), report.to_json()? + "\n")?;
                }
                ObjectiveSpec::Marginal(k) => write_marginal(&net, &prefix, &ilp_marginal_bounds(&poly, k)?)?,
                ObjectiveSpec::Average(e) => {
                    let f = norm_fn(&net, &e)?;
                    let vals: Vec<f64> = t.states().iter().map(|x| f.eval(x)).collect();
                    write_average(&prefix, &e, &ilp_average_bounds(&poly, &vals, case)?)?;
                }
            }
        }
    }
    Ok(())
}

fn write_average(prefix: &Path, label: &str, b: &ctmc_trunc::schemes::ita::AverageBounds) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(&with_ext(prefix, "csv"))?);
    w.write_record(["objective", "lower", "upper"]).map_err(Error::from)?;
    w.write_record([label.to_string(), format!("{:e}", b.lower), format!("{:e}", b.upper)]).map_err(Error::from)?;
    w.flush()?;
    write_json(&with_ext(prefix, "json"), b)
}

fn sublevel_states(net: &ReactionNetwork, w: &str, r: f64, cap: usize) -> CliResult<Vec<State>> {
    let w = norm_fn(net, w)?;
    Ok(build_sublevel_truncation(net, &w, r, &[], cap)?.states().to_vec())
}

fn cmd_liu(a: &BoundsArgs, net: &ReactionNetwork, prefix: &Path) -> CliResult<()> {
    let c = &a.common;
    let (Some(v), Some(set_w), Some(set_r)) = (&a.v, &a.set_w, a.set_r) else {
        return usage("--scheme liu needs --v, --set-w and --set-r");
    };
    let ReentrySpec::FixedState(z) = ReentrySpec::parse(&c.reentry)? else {
        return usage("--scheme liu needs --reentry state:<counts>");
    };
    let t = load_truncation(net, c)?;
    let vf = norm_fn(net, v)?;
    let one = |_: &State| 1.0;
    let set = sublevel_states(net, set_w, set_r, c.state_cap)?;
    let cert = drift_apply(net, &vf, &one, &set, t.states())?.with_labels(v, "1");
    let beta = match c.beta {
        Some(b) => b,
        None => beta_grid_search(net, &t, &cert.set, 1e-3, 1e3, 61)?.0,
    };
    let liu = liu_bound(net, &t, &z, &cert, &vf, beta)?;
    let tight = tighten_bound_lp(net, &z, &cert, &vf, &liu)?;
    write_point(net, prefix, &liu.approximation)?;
    write_json(
        &with_ext(prefix, "json"),
        &serde_json::json!({ "certificate": cert, "liu_bound": liu, "tightened": tight }),
    )
}

fn cmd_compare(a: &CompareArgs) -> CliResult<()> {
    let c = &a.common;
    let id = CaseId::parse(&a.case)?;
    let case = BenchmarkCase::named(id);
    let reference = match id {
        CaseId::Toggle => {
            let r = toggle_reference(TOGGLE_C, (a.ref_levels as f64).powi(6), None)?;
            eprintln!("reference: {} states, guaranteed TV error {:e}", r.reference.len(), r.guarantee);
            r.reference
        }
        CaseId::SchloglBimodal => schlogl_reference(&SchloglParams::BIMODAL, c.tol)?,
        CaseId::SchloglUnimodal => schlogl_reference(&SchloglParams::UNIMODAL, c.tol)?,
    };
    let table = compare_schemes(&case, &reference, !a.no_timing)?;
    for f in table.failures() {
        eprintln!("cell {} r={}: {}", f.scheme, f.r, f.failure.as_deref().unwrap_or(""));
    }
    let out = create(&with_ext(&out_prefix(c), "csv"))?;
    table.write_csv(out)?;
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult<()> {
    let c = &a.common;
    let net = load_model(c)?;
    let x0: std::result::Result<Vec<u32>, _> = a.x0.split(',').map(|s| s.trim().parse::<u32>()).collect();
    let x0 = State(x0.map_err(|_| Failure::Usage(format!("bad --x0 `{}`", a.x0)))?);
    let run = gillespie_with_burn_in(&net, &x0, a.t_final, c.seed, a.jump_cap, a.burn_in)?;
    let e = empirical_distribution(&run)?;
    let prefix = out_prefix(c);
    write_point(&net, &prefix, &e)?;
    write_json(
        &with_ext(&prefix, "json"),
        &serde_json::json!({
            "generator": "ChaCha8Rng::seed_from_u64",
            "seed": run.seed,
            "t_final": run.t_final,
            "burn_in": run.burn_in,
            "x0": run.x0,
            "jumps": run.jumps,
            "visited_states": run.states.len(),
        }),
    )
}

fn describe_classes(net: &ReactionNetwork, t: &Truncation, d: &ClassDecomposition) -> String {
    let mut s = format!("{} states, {} closed classes\n", t.len(), d.closed_classes.len());
    for (k, cls) in d.closed_classes.iter().enumerate() {
        let shown: Vec<String> = cls.iter().take(8).map(|&i| t.state(i).to_string()).collect();
        let more = if cls.len() > 8 { format!(" ... ({} states)", cls.len()) } else { String::new() };
        s.push_str(&format!("closed class {k}: {}{more}\n", shown.join(" ")));
    }
    s.push_str(&format!("transient states: {}\n", d.transient.len()));
    s.push_str(&format!("note: {}\n", ClassDecomposition::CAVEAT));
    let _ = net;
    s
}

fn cmd_classes(c: &CommonArgs) -> CliResult<()> {
    let net = load_model(c)?;
    let t = load_truncation(&net, c)?;
    let d = communicating_classes(&net, &t)?;
    print!("{}", describe_classes(&net, &t, &d));
    if let Some(prefix) = &c.out {
        let classes: Vec<Vec<&State>> = d.closed_classes.iter().map(|cls| cls.iter().map(|&i| t.state(i)).collect()).collect();
        let transient: Vec<&State> = d.transient.iter().map(|&i| t.state(i)).collect();
        write_json(
            &with_ext(prefix, "json"),
            &serde_json::json!({ "closed_classes": classes, "transient": transient, "caveat": ClassDecomposition::CAVEAT }),
        )?;
    }
    Ok(())
}

fn cmd_drift_check(a: &DriftArgs) -> CliResult<()> {
    let c = &a.common;
    let net = load_model(c)?;
    let check = load_truncation(&net, c)?;
    let v = norm_fn(&net, &a.v)?;
    let f = norm_fn(&net, &a.f)?;
    let set = sublevel_states(&net, &a.set_w, a.set_r, c.state_cap)?;
    let cert = drift_apply(&net, &v, &f as &dyn StateFn, &set, check.states())?.with_labels(&a.v, &a.f);
    let json = serde_json::to_string_pretty(&cert).map_err(Error::from)?;
    println!("{json}");
    if let Some(prefix) = &c.out {
        std::fs::write(with_ext(prefix, "json"), json + "\n")?;
    }
    Ok(())
}
