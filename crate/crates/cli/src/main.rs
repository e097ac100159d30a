use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use frobtensor::frobenius::{
    coherence_check, conformality_check, flat_identity_check, full_report, quasi_homogeneity_check, wdvv_check,
    CheckReport, EulerData, FrobeniusModel, Status,
};
use frobtensor::m0n::{betti_numbers, diagonal_with_limit, DEFAULT_N_MAX, HARD_N_MAX};
use frobtensor::rank_one::{tensor_rank1, RankOneTheory};
use frobtensor::scalar::{format_rational, parse_rational, Rational};
use frobtensor::semisimple::{
    pn_pm_model, schlesinger_matrices, special_init, NumericOptions, SpecialInitialConditions, C64,
};
use frobtensor::series::{shift_correlators, FormalShiftVector};
use frobtensor::tensor::tensor_correlators;
use frobtensor::{Error, Poly};
use frobtensor_cli::model_file::ModelFile;
use frobtensor_cli::{canonical_json, complex_json};
use serde_json::json;

#[derive(Parser)]
#[command(name = "frobtensor", version, about = "Exact tensor products of truncated Frobenius models")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for the random vectors used in semisimple numerics.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Tolerance for numeric checks.
    #[arg(long, global = true, default_value_t = 1e-10)]
    tolerance: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Output {
    /// Write to this file instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check structural identities of a model; all applicable ones when no flag is given.
    Check {
        model: PathBuf,
        #[arg(long)]
        wdvv: bool,
        #[arg(long)]
        coherence: bool,
        #[arg(long)]
        identity: bool,
        #[arg(long)]
        euler: bool,
    },
    /// Tensor product of two models.
    Tensor {
        left: PathBuf,
        right: PathBuf,
        #[arg(long)]
        order: Option<usize>,
        #[command(flatten)]
        out: Output,
    },
    /// Diagonal class and Betti numbers of M̄_{0,n}.
    Diagonal {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Tensor product of rank-one theories given as C3, C4, ... lists.
    Rank1 {
        #[arg(long)]
        c: String,
        #[arg(long)]
        c2: String,
        #[command(flatten)]
        out: Output,
    },
    /// Move the base point of a model by a rational vector.
    Shift {
        model: PathBuf,
        #[arg(long)]
        s: String,
        #[command(flatten)]
        out: Output,
    },
    /// Special initial conditions at a semisimple point.
    Semisimple {
        model: PathBuf,
        /// Comma separated coordinates, each real or complex like `1+2i`.
        #[arg(long)]
        at: String,
        #[command(flatten)]
        out: Output,
    },
    /// Closed-form special initial conditions of P^n x P^m.
    Pnpm {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value = "0")]
        x00: C64,
        #[arg(long, default_value = "0")]
        x10: C64,
        #[arg(long, default_value = "0")]
        x01: C64,
        #[command(flatten)]
        out: Output,
    },
}

enum Failure {
    Math(String),
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NotSemisimple | Error::NotTame(_) => Failure::Math(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

type CmdResult = Result<ExitCode, Failure>;

fn read_model(path: &PathBuf) -> Result<FrobeniusModel, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    ModelFile::parse(&text)
        .and_then(|f| f.to_model())
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn emit(out: &Output, text: String) -> Result<(), Failure> {
    match &out.output {
        Some(p) => fs::write(p, text + "\n").map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => {
            print_stdout(&text);
            Ok(())
        }
    }
}

fn print_stdout(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn rational_list(s: &str) -> Result<Vec<Rational>, Failure> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(|t| parse_rational(t).map_err(Failure::from)).collect()
}

fn report_json(checks: &[(&str, CheckReport)]) -> (serde_json::Value, Status) {
    let mut all = CheckReport::default();
    let mut per_check = serde_json::Map::new();
    for (name, r) in checks {
        per_check.insert((*name).into(), json!({ "status": r.status(), "violations": r.violations.len() }));
        all.merge(r.clone());
    }
    let status = all.status();
    (
        json!({
            "status": status,
            "checks": per_check,
            "violations": all.violations,
            "unverifiable": all.unverifiable,
        }),
        status,
    )
}

fn check(model: &PathBuf, wdvv: bool, coherence: bool, identity: bool, euler: bool) -> CmdResult {
    let m = read_model(model)?;
    let checks: Vec<(&str, CheckReport)> = if !(wdvv || coherence || identity || euler) {
        let full = full_report(&m);
        ["wdvv", "coherence", "identity", "euler"]
            .iter()
            .filter_map(|k| full.get(*k).map(|r| (*k, r.clone())))
            .collect()
    } else {
        let mut v = Vec::new();
        if wdvv {
            v.push(("wdvv", wdvv_check(&m)));
        }
        if coherence {
            v.push(("coherence", coherence_check(&m)));
        }
        if identity {
            v.push(("identity", flat_identity_check(&m)?));
        }
        if euler {
            let mut r = conformality_check(&m)?;
            r.merge(quasi_homogeneity_check(&m)?);
            v.push(("euler", r));
        }
        v
    };
    let (value, status) = report_json(&checks);
    print_stdout(&canonical_json(&value));
    Ok(if status == Status::Fail { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn tensor(left: &PathBuf, right: &PathBuf, order: Option<usize>, out: &Output) -> CmdResult {
    let (a, b) = (read_model(left)?, read_model(right)?);
    if order.is_none() && a.truncation().min(b.truncation()) > DEFAULT_N_MAX {
        eprintln!(
            "warning: output truncated at {DEFAULT_N_MAX} by the diagonal range; pass --order up to {HARD_N_MAX} to go further"
        );
    }
    if let Some(n) = order {
        if n > HARD_N_MAX {
            return Err(Failure::Input(format!(
                "order {n} exceeds the diagonal range: M̄_0,n is only available for n <= {HARD_N_MAX}"
            )));
        }
    }
    let t = tensor_correlators(&a, &b, order)?;
    emit(out, ModelFile::from_model(&t).to_json())?;
    Ok(ExitCode::SUCCESS)
}

fn diagonal(n: usize, out: &Output) -> CmdResult {
    let d = diagonal_with_limit(n, HARD_N_MAX)?;
    let terms: Vec<_> = d
        .entries
        .iter()
        .map(|(k, i, j, c)| {
            json!({
                "codim": k,
                "sigma": d.sigma(*k, *i).to_string(),
                "tau": d.tau(*k, *j).to_string(),
                "coefficient": format_rational(c),
            })
        })
        .collect();
    emit(out, canonical_json(&json!({ "n": n, "betti": betti_numbers(n), "terms": terms })))?;
    Ok(ExitCode::SUCCESS)
}

fn rank1(c: &str, c2: &str, out: &Output) -> CmdResult {
    let t1 = RankOneTheory::new(rational_list(c)?)?;
    let t2 = RankOneTheory::new(rational_list(c2)?)?;
    let t = tensor_rank1(&t1, &t2)?;
    let coeffs: Vec<String> = t.coeffs().iter().map(format_rational).collect();
    emit(out, canonical_json(&json!({ "first_index": 3, "coefficients": coeffs })))?;
    Ok(ExitCode::SUCCESS)
}

/// Evaluates the shifted correlators at the given rational point and moves
/// the Euler field's constant part accordingly.
fn shift(model: &PathBuf, s: &str, out: &Output) -> CmdResult {
    let m = read_model(model)?;
    let values = rational_list(s)?;
    if values.len() != m.dim() {
        return Err(Failure::Input(format!("--s has {} entries, expected {}", values.len(), m.dim())));
    }
    let dirs: Vec<usize> = (0..m.dim()).filter(|&a| !num::Zero::is_zero(&values[a])).collect();
    let top = m.correlators().entries_of_arity(m.truncation()).any(|(k, _)| k.iter().any(|a| dirs.contains(a)));
    if top {
        eprintln!(
            "warning: the shift uses directions present at arity {}; the output drops contributions of Y_n for n > {}",
            m.truncation(),
            m.truncation()
        );
    }
    let shifted = shift_correlators(m.correlators(), &FormalShiftVector::symbols(&dirs, 0))?;
    let family = shifted.map(|p| {
        p.substitute(|v| Some(Poly::constant(values[dirs[v as usize]].clone())))
            .as_constant()
            .expect("all symbols substituted")
    });
    let euler = m.euler().map(|eu| EulerData {
        r: (0..m.dim())
            .map(|b| (0..m.dim()).fold(eu.r[b].clone(), |acc, a| acc + &values[a] * &eu.d[a][b]))
            .collect(),
        ..eu.clone()
    });
    let moved = FrobeniusModel::new(m.metric().clone(), family, euler, m.identity())?;
    emit(out, ModelFile::from_model(&moved).to_json())?;
    Ok(ExitCode::SUCCESS)
}

fn semisimple_json(s: &SpecialInitialConditions) -> serde_json::Value {
    let list = |v: &[C64]| v.iter().map(complex_json).collect::<Vec<_>>();
    let matrix = |m: &[Vec<C64>]| m.iter().map(|r| list(r)).collect::<Vec<_>>();
    let a: Vec<_> = schlesinger_matrices(s).iter().map(|m| matrix(m)).collect();
    json!({ "u": list(&s.u), "eta": list(&s.eta), "v": matrix(&s.v), "schlesinger": a })
}

fn semisimple(model: &PathBuf, at: &str, opts: &NumericOptions, out: &Output) -> CmdResult {
    let m = read_model(model)?;
    let x: Vec<C64> = at
        .split(',')
        .map(|t| t.trim().parse::<C64>().map_err(|e| Failure::Input(format!("--at: '{t}': {e}"))))
        .collect::<Result<_, _>>()?;
    let s = special_init(&m, &x, opts)?;
    emit(out, canonical_json(&semisimple_json(&s)))?;
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> CmdResult {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Failure::Input(e.to_string()))?;
    }
    let opts = NumericOptions { tolerance: cli.tolerance, seed: cli.seed, ..NumericOptions::default() };
    match &cli.command {
        Command::Check { model, wdvv, coherence, identity, euler } => check(model, *wdvv, *coherence, *identity, *euler),
        Command::Tensor { left, right, order, out } => tensor(left, right, *order, out),
        Command::Diagonal { n, out } => diagonal(*n, out),
        Command::Rank1 { c, c2, out } => rank1(c, c2, out),
        Command::Shift { model, s, out } => shift(model, s, out),
        Command::Semisimple { model, at, out } => semisimple(model, at, &opts, out),
        Command::Pnpm { n, m, x00, x10, x01, out } => {
            let s = pn_pm_model(*n, *m, *x00, *x10, *x01, cli.tolerance)?;
            emit(out, canonical_json(&semisimple_json(&s)))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(Failure::Math(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
