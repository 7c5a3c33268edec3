//! `qcorr`: batch front end over JSON state files.
//!
//! Exit codes: 0 success or pass, 1 a check failed (including a state that
//! does not meet a check's hypothesis), 2 usage or input error.

mod table;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde_json::{json, Value};

use qcorr::correlations::{certify_collapse, hierarchy_slack, hierarchy_table, measure, MeasureName, SearchConfig};
use qcorr::divergence::DivergenceKind;
use qcorr::entropies::{cond_entropy, Cut};
use qcorr::io::{parse_pvm, parse_state, state_to_json};
use qcorr::linalg::{frob, identity, CMatrix};
use qcorr::premeasurement::{basis_projectors, decohere, fourier_basis, mus_reconstruct, petz_map, random_premeasurement, Pvm};
use qcorr::smooth::{certify_smooth_collapse, smooth_measure, BallSpec, SmoothMeasure};
use qcorr::states::{is_cc, is_cq, is_mq, is_qc, is_separable_small, random_pure, random_separable, random_state, rng_from_seed, DensityOperator, CLASS_TOL};
use qcorr::uncertainty::{check_eur, measured_cq_effects, pauli_pvms, play_game, yields_csv, EurRelation, GameInput, Verdict};
use qcorr::Error;

const SCHEMA: &str = "qcorr/1";

#[derive(Parser)]
#[command(name = "qcorr", version, about = "Quantum correlation measures and collapse certificates")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Generate a random state file.
    Gen(GenArgs),
    /// Compute one correlation measure.
    Measure(MeasureArgs),
    /// Every member of the correlation hierarchy with its ordering slack.
    Hierarchy(KindArgs),
    /// Certify that the hierarchy collapses on a premeasurement state.
    CollapseCheck(KindArgs),
    /// Smoothed collapse certificate (kind dmax or dfid).
    SmoothCollapseCheck(KindArgs),
    /// Evaluate an entropic uncertainty relation.
    EurCheck(EurArgs),
    /// Evaluate the entanglement-creation form of the tripartite relation.
    EcrCheck(EurArgs),
    /// Play the three-basis distillation game.
    Game(GameArgs),
    /// Petz recovery and minimum-uncertainty test for a register basis.
    PetzCheck(PetzArgs),
    /// Classify a bipartite state (CQ, QC, CC, separable, MQ).
    ClassCheck(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write the report to FILE instead of standard output.
    #[arg(short = 'o', value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "FILE")]
    state: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct KindArgs {
    #[command(flatten)]
    common: Common,
    /// vn, renyi:α, dmax or dfid.
    #[arg(long, default_value = "vn")]
    kind: String,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
}

#[derive(Args)]
struct GenArgs {
    /// Factor dimensions, e.g. 2x2 or 2x2x2.
    #[arg(long)]
    dims: String,
    /// premeasurement, random, pure, separable, mes or mixed.
    #[arg(long, default_value = "random")]
    kind: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the state to FILE instead of standard output.
    #[arg(short = 'o', value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MeasureArgs {
    #[command(flatten)]
    kind: KindArgs,
    /// Measure name, e.g. ic, ent, delta_ab, delta2, discord2, or a smooth
    /// measure such as e_max or delta2_fid (used with --epsilon).
    #[arg(long)]
    name: String,
}

#[derive(Args)]
struct EurArgs {
    #[command(flatten)]
    common: Common,
    /// berta, tomren, tomren_smooth, sanchez (eur-check); ecr, ecr_smooth (ecr-check).
    #[arg(long)]
    relation: String,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Measurement file; repeat once per measurement to override the defaults.
    #[arg(long, value_name = "FILE")]
    pvm: Vec<PathBuf>,
}

#[derive(Args)]
struct GameArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 1)]
    rounds: u64,
    /// Emit per-round yields as CSV instead of a report.
    #[arg(long)]
    csv: bool,
    /// Strategy PVM file; repeat per basis. Defaults to the Pauli X, Y, Z bases.
    #[arg(long, value_name = "FILE")]
    pvm: Vec<PathBuf>,
}

#[derive(Args)]
struct PetzArgs {
    #[command(flatten)]
    common: Common,
    /// Rank-one PVM fixing the register basis W (default: computational).
    #[arg(long, value_name = "FILE")]
    pvm: Option<PathBuf>,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotMq(_) | Error::HypothesisViolated(_) | Error::NotPure(_) | Error::NotMus(_) => 1,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: 2, message: e.to_string() }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: 2, message: msg.into() }
}

type Run = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.verb) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(verb: Verb) -> Run {
    match verb {
        Verb::Gen(a) => gen(a),
        Verb::Measure(a) => run_measure(a),
        Verb::Hierarchy(a) => run_hierarchy(a),
        Verb::CollapseCheck(a) => run_collapse(a, false),
        Verb::SmoothCollapseCheck(a) => run_collapse(a, true),
        Verb::EurCheck(a) => run_eur(a, false),
        Verb::EcrCheck(a) => run_eur(a, true),
        Verb::Game(a) => run_game(a),
        Verb::PetzCheck(a) => run_petz(a),
        Verb::ClassCheck(a) => run_class(a),
    }
}

fn read_state(path: &Path) -> Result<DensityOperator, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {}", path.display(), e)))?;
    parse_state(&text).map_err(|e| usage(format!("{}: {}", path.display(), e)))
}

fn read_pvm(path: &Path) -> Result<Pvm, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {}", path.display(), e)))?;
    parse_pvm(&text).map_err(|e| usage(format!("{}: {}", path.display(), e)))
}

fn parse_kind(s: &str) -> Result<DivergenceKind, Failure> {
    DivergenceKind::parse(s).map_err(|e| usage(e.to_string()))
}

fn parse_dims(s: &str) -> Result<Vec<usize>, Failure> {
    let dims: Vec<usize> = s
        .split('x')
        .map(|p| p.trim().parse::<usize>().map_err(|_| usage(format!("--dims: bad factor '{}'", p))))
        .collect::<Result<_, _>>()?;
    if dims.is_empty() || dims.contains(&0) {
        return Err(usage("--dims: factors must be positive"));
    }
    Ok(dims)
}

fn emit(verb: &str, common: &Common, result: Value, pass: Option<bool>) -> std::io::Result<()> {
    let mut env = json!({
        "schema": SCHEMA,
        "verb": verb,
        "unit": "bits",
        "tolerance": common.tol,
        "seed": common.seed,
    });
    if let Some(p) = pass {
        env["pass"] = json!(p);
    }
    env["result"] = result;
    let text = match common.out.format {
        Format::Json => serde_json::to_string_pretty(&env).expect("report serializes") + "\n",
        Format::Table => table::render(&env),
    };
    write_out(common.out.output.as_deref(), &text)
}

fn write_out(path: Option<&Path>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => {
            print!("{}", text);
            Ok(())
        }
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn search_config(seed: u64) -> SearchConfig {
    SearchConfig { seed, ..SearchConfig::default() }
}

fn gen(a: GenArgs) -> Run {
    let dims = parse_dims(&a.dims)?;
    let mut rng = rng_from_seed(a.seed);
    let n: usize = dims.iter().product();
    let rho = match a.kind.as_str() {
        "random" => random_state(&dims, n, &mut rng),
        "pure" => random_pure(&dims, &mut rng).density(),
        "mixed" => DensityOperator::maximally_mixed(&dims),
        "separable" => {
            let [da, db] = dims[..] else { return Err(usage("separable states need two factors")) };
            random_separable(da, db, 2 * da * db, &mut rng)
        }
        "mes" => {
            let [da, db] = dims[..] else { return Err(usage("mes needs two factors")) };
            if da != db {
                return Err(usage("mes needs equal factors"));
            }
            let mut ket = CMatrix::zeros(da * da, 1);
            for i in 0..da {
                ket[(i * da + i, 0)] = qcorr::linalg::r(1.0 / (da as f64).sqrt());
            }
            DensityOperator::from_ket(&ket, &dims)?
        }
        "premeasurement" => {
            let [dm, ds] = dims[..] else { return Err(usage("premeasurement dims are register x system")) };
            if dm > ds {
                return Err(usage("premeasurement needs register dimension ≤ system dimension"));
            }
            let mut ranks = vec![1usize; dm];
            for _ in dm..ds {
                let k = rng.random_range(0..dm);
                ranks[k] += 1;
            }
            let state_rank = rng.random_range(1..=ds);
            random_premeasurement(ds, &ranks, state_rank, &mut rng)?.state
        }
        other => return Err(usage(format!("unknown state kind '{}'", other))),
    };
    write_out(a.output.as_deref(), &state_to_json(&rho))?;
    Ok(true)
}

fn run_measure(a: MeasureArgs) -> Run {
    let k = &a.kind;
    let rho = read_state(&k.common.state)?;
    let cfg = search_config(k.common.seed);
    if let Ok(sm) = SmoothMeasure::parse(&a.name) {
        let r = smooth_measure(sm, &rho, &BallSpec::full(k.epsilon), &cfg)?;
        emit("measure", &k.common, to_value(&r), None)?;
        return Ok(true);
    }
    let name = MeasureName::parse(&a.name).map_err(|e| usage(e.to_string()))?;
    if k.epsilon != 0.0 {
        return Err(usage(format!("{} is not a smooth measure; drop --epsilon", a.name)));
    }
    let r = measure(name, parse_kind(&k.kind)?, &rho, &cfg)?;
    emit("measure", &k.common, to_value(&r), None)?;
    Ok(true)
}

fn run_hierarchy(a: KindArgs) -> Run {
    let rho = read_state(&a.common.state)?;
    let table = hierarchy_table(&rho, parse_kind(&a.kind)?, &search_config(a.common.seed))?;
    let slack = hierarchy_slack(&table);
    let pass = slack >= -a.common.tol;
    let rows: Vec<Value> = table
        .iter()
        .map(|m| json!({"name": m.name, "value": m.value, "lower": m.lower, "upper": m.upper, "exact": m.exact, "method": m.diagnostics.method}))
        .collect();
    emit("hierarchy", &a.common, json!({"kind": a.kind, "slack": slack, "rows": rows}), Some(pass))?;
    Ok(pass)
}

fn run_collapse(a: KindArgs, smooth: bool) -> Run {
    let rho = read_state(&a.common.state)?;
    let kind = parse_kind(&a.kind)?;
    let cert = if smooth {
        certify_smooth_collapse(&rho, a.epsilon, kind, a.common.tol)?
    } else {
        if a.epsilon != 0.0 {
            return Err(usage("collapse-check takes no --epsilon; use smooth-collapse-check"));
        }
        certify_collapse(&rho, kind, a.common.tol)?
    };
    let verb = if smooth { "smooth-collapse-check" } else { "collapse-check" };
    emit(verb, &a.common, to_value(&cert), Some(cert.collapsed))?;
    Ok(cert.collapsed)
}

fn with_trivial_environment(rho: DensityOperator) -> DensityOperator {
    if rho.dims.len() == 1 {
        let d = rho.dims[0];
        DensityOperator { dims: vec![d, 1, 1], ..rho }
    } else {
        rho
    }
}

fn run_eur(a: EurArgs, ecr: bool) -> Run {
    let relation = EurRelation::parse(&a.relation).map_err(|e| usage(e.to_string()))?;
    let is_ecr = matches!(relation, EurRelation::Ecr | EurRelation::EcrSmooth);
    if is_ecr != ecr {
        return Err(usage(format!("relation {} belongs to {}", a.relation, if is_ecr { "ecr-check" } else { "eur-check" })));
    }
    let mut rho = read_state(&a.common.state)?;
    if matches!(relation, EurRelation::Tomren | EurRelation::TomrenSmooth) || is_ecr {
        rho = with_trivial_environment(rho);
    }
    let ms: Vec<Vec<CMatrix>> = if a.pvm.is_empty() {
        let d = rho.dims[0];
        let comp = Pvm::computational(d).elements;
        let four = Pvm::from_basis(&fourier_basis(&identity(d)))?.elements;
        match relation {
            EurRelation::SanchezTriple => pauli_pvms().iter().map(|p| p.elements.clone()).collect(),
            EurRelation::Berta => vec![comp, four],
            _ => vec![four, comp],
        }
    } else {
        a.pvm.iter().map(|p| read_pvm(p).map(|x| x.elements)).collect::<Result<_, _>>()?
    };
    let chk = check_eur(relation, &rho, &ms, a.epsilon)?;
    emit(if ecr { "ecr-check" } else { "eur-check" }, &a.common, to_value(&chk), Some(chk.pass))?;
    Ok(chk.pass)
}

fn run_game(a: GameArgs) -> Run {
    let rho = read_state(&a.common.state)?;
    let input = match rho.dims.len() {
        1 if rho.is_pure(1e-9) => GameInput::Pure(rho),
        1 => GameInput::adversarial(&rho)?,
        3 => GameInput::Split(rho),
        _ => return Err(usage("game input is a state on S or on S x E1 x E2")),
    };
    let strategy: Vec<Pvm> = if a.pvm.is_empty() {
        pauli_pvms().to_vec()
    } else {
        a.pvm.iter().map(|p| read_pvm(p)).collect::<Result<_, _>>()?
    };
    let rec = play_game(&input, &strategy, a.rounds)?;
    let pass = rec.verdict != Verdict::BoundViolated;
    if a.csv {
        write_out(a.common.out.output.as_deref(), &yields_csv(&rec)?)?;
    } else {
        emit("game", &a.common, to_value(&rec), Some(pass))?;
    }
    Ok(pass)
}

fn run_petz(a: PetzArgs) -> Run {
    let rho = read_state(&a.common.state)?;
    let (da, db) = rho.two_party()?;
    let w = match &a.pvm {
        Some(p) => read_pvm(p)?.basis().ok_or_else(|| usage("--pvm must be a rank-one PVM"))?,
        None => identity(da),
    };
    if w.nrows() != da {
        return Err(usage("basis does not act on the first party"));
    }
    let z = fourier_basis(&w);
    let sigma = decohere(&rho.mat, &w, da, db);
    let p = petz_map(&sigma, &z, (da, db))?;
    let sigma_residual = frob(&(p.apply(&p.channel(&sigma))? - &sigma));
    let rho_residual = frob(&(p.apply(&p.channel(&rho.mat))? - &rho.mat));
    let h_wb = cond_entropy(DivergenceKind::VonNeumann, &measured_cq_effects(&rho, &basis_projectors(&w))?, Cut::OnSecond)?.value;
    let berta = check_eur(EurRelation::Berta, &rho, &[basis_projectors(&w), basis_projectors(&z)], 0.0)?;
    let fixed = rho_residual <= a.common.tol;
    let mus = mus_reconstruct(&rho, &w, a.common.tol);
    let reconstructed = mus.is_ok();
    // The recovery fixes ρ exactly when the relation is tight; both routes must agree.
    let consistent = fixed == (berta.slack.abs() <= a.common.tol) && fixed == reconstructed;
    let pass = sigma_residual <= 1e-10 && consistent;
    let result = json!({
        "h_w_given_b": h_wb,
        "berta_slack": berta.slack,
        "sigma_residual": sigma_residual,
        "rho_residual": rho_residual,
        "minimum_uncertainty": fixed,
        "mus_reconstruction": match mus {
            Ok(_) => json!("ok"),
            Err(e) => json!(e.to_string()),
        },
        "consistent": consistent,
    });
    emit("petz-check", &a.common, result, Some(pass))?;
    Ok(pass)
}

fn run_class(a: Common) -> Run {
    let rho = read_state(&a.state)?;
    let tol = a.tol.max(CLASS_TOL);
    let verdicts = [is_cq(&rho, tol)?, is_qc(&rho, tol)?, is_cc(&rho, tol)?, is_separable_small(&rho, tol)?, is_mq(&rho, tol)?];
    let rows: Vec<Value> = verdicts
        .iter()
        .map(|v| json!({"class": v.class, "member": v.member, "decided": v.decided, "residual": v.residual, "tolerance": v.tolerance_used}))
        .collect();
    emit("class-check", &a, json!({"dims": rho.dims, "rows": rows}), None)?;
    Ok(true)
}
