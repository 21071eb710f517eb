//! `ngramid`: identifiability checks, moment synthesis and estimation,
//! exact-moment recovery and seeded ensembles.
//!
//! Exit codes: 0 success or identifiable, 1 not established, 2 recovery
//! failed, 3 indeterminate, 64 malformed input, 65 resource guard.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use ngramid_core::ensemble::{run_ensemble, EnsembleConfig};
use ngramid_core::identify::{full_report, CheckOptions, Overall};
use ngramid_core::io::{
    hidden_moment_to_json, matrix_from_json, matrix_to_json, moment_from_json, moment_to_json, write_json,
    FORMAT_VERSION,
};
use ngramid_core::moments::{
    estimate_moment, sample_corpus, synth_moment, synth_moment_offset, Corpus, GeneratorConfig, HiddenPrior,
    PopulationStructure,
};
use ngramid_core::recover::{recover_hidden_moment, recover_structure, RecoverOptions};
use ngramid_core::tensalg::DEFAULT_TOL;
use ngramid_core::{DenseMatrix, Error};

const EXIT_NOT_ESTABLISHED: u8 = 1;
const EXIT_RECOVERY_FAILED: u8 = 2;
const EXIT_INDETERMINATE: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_GUARD: u8 = 65;

#[derive(Parser)]
#[command(name = "ngramid", version, about = "Identifiability of overcomplete n-persistent topic models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide the deterministic identifiability conditions for a topic-word matrix.
    Check(CheckArgs),
    /// Write the exact observed moment of a model.
    Synth(SynthArgs),
    /// Sample a corpus of documents.
    Sample(SampleArgs),
    /// Estimate the observed moment from a corpus.
    Estimate(EstimateArgs),
    /// Recover the topic-word matrix from an exact moment.
    Recover(RecoverArgs),
    /// Run a seeded ensemble and write CSV results.
    Ensemble(EnsembleArgs),
}

#[derive(Args)]
struct CheckArgs {
    /// Topic-word matrix JSON (`rows`, `cols`, `data`).
    #[arg(long = "a")]
    a: PathBuf,
    /// Hidden prior: uniform, discrete:w1,..,wq, point:i, dirichlet:a or a1,..,aq.
    #[arg(long, default_value = "uniform")]
    prior: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long = "a")]
    a: PathBuf,
    #[arg(long, default_value = "uniform")]
    prior: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    r: usize,
    /// Extra words per half-document, `1 <= s <= n/2`.
    #[arg(long, default_value_t = 0)]
    offset: usize,
    /// Use the matrix as given instead of rescaling columns to word distributions.
    #[arg(long)]
    linear: bool,
    #[arg(long)]
    out: PathBuf,
    /// Also write the hidden moment used.
    #[arg(long)]
    hidden_out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    /// Topic-word matrix JSON; columns are rescaled to word distributions.
    #[arg(long = "a", conflicts_with = "config", required_unless_present = "config")]
    a: Option<PathBuf>,
    /// Generator config (key = value) that also draws a random matrix.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the generated matrix when using --config.
    #[arg(long)]
    a_out: Option<PathBuf>,
    #[arg(long, default_value = "uniform")]
    prior: String,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    r: usize,
    #[arg(long, default_value_t = 1000)]
    docs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    r: usize,
    /// Vocabulary size when the corpus header omits it.
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RecoverArgs {
    #[arg(long)]
    moment: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    q: usize,
    /// Largest column support; inferred when absent.
    #[arg(long)]
    dmax: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth matrix to align against.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Moment whose hidden part is solved for with the recovered matrix.
    #[arg(long)]
    hidden_moment: Option<PathBuf>,
    #[arg(long, requires = "hidden_moment")]
    hidden_out: Option<PathBuf>,
}

#[derive(Args)]
struct EnsembleArgs {
    #[arg(long)]
    config: PathBuf,
    /// Results CSV; falls back to `out` in the config, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String, Error> {
    Ok(fs::read_to_string(path)?)
}

fn read_matrix(path: &Path) -> Result<DenseMatrix, Error> {
    matrix_from_json(&read(path)?)
}

fn emit(v: &Value, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(p) => write_json(p, v),
        None => {
            println!("{}", serde_json::to_string_pretty(v)?);
            Ok(())
        }
    }
}

fn word_distributions(a: &DenseMatrix) -> Result<DenseMatrix, Error> {
    PopulationStructure::from_matrix(a)?.stochastic_matrix()
}

fn cmd_check(args: CheckArgs) -> Result<u8, Error> {
    let a = PopulationStructure::from_matrix(&read_matrix(&args.a)?)?;
    let prior = HiddenPrior::parse_spec(&args.prior, a.q())?;
    let opts = CheckOptions {
        tol: args.tol,
        ..CheckOptions::default()
    };
    let report = full_report(&a, &prior.hidden_moment(1)?, args.n, &opts)?;
    emit(&report.to_json(), args.out.as_deref())?;
    Ok(match report.overall {
        Overall::Identifiable => 0,
        Overall::NotEstablished => EXIT_NOT_ESTABLISHED,
        Overall::Indeterminate => EXIT_INDETERMINATE,
    })
}

fn cmd_synth(args: SynthArgs) -> Result<u8, Error> {
    let raw = read_matrix(&args.a)?;
    let a = if args.linear { raw } else { word_distributions(&raw)? };
    let prior = HiddenPrior::parse_spec(&args.prior, a.cols())?;
    let m = if args.offset == 0 {
        let mh = prior.hidden_moment(args.r)?;
        if let Some(h) = &args.hidden_out {
            write_json(h, &hidden_moment_to_json(&mh))?;
        }
        synth_moment(&a, &mh, args.n, args.r)?
    } else {
        synth_moment_offset(&a, &prior, args.n, args.r, args.offset)?
    };
    write_json(&args.out, &moment_to_json(&m))?;
    Ok(0)
}

fn cmd_sample(args: SampleArgs) -> Result<u8, Error> {
    let (a, prior, n, r, docs, seed) = match &args.config {
        Some(path) => {
            let cfg = GeneratorConfig::parse(&read(path)?)?;
            let ps = cfg.population()?;
            if let Some(out) = &args.a_out {
                write_json(out, &matrix_to_json(ps.matrix()))?;
            }
            (ps.stochastic_matrix()?, cfg.prior()?, cfg.n, cfg.r, cfg.docs, cfg.seed)
        }
        None => {
            let a = word_distributions(&read_matrix(args.a.as_ref().expect("clap requires --a"))?)?;
            let prior = HiddenPrior::parse_spec(&args.prior, a.cols())?;
            (a, prior, args.n, args.r, args.docs, args.seed)
        }
    };
    let corpus = sample_corpus(&a, &prior, n, r, docs, seed)?;
    fs::write(&args.out, corpus.to_text())?;
    Ok(0)
}

fn cmd_estimate(args: EstimateArgs) -> Result<u8, Error> {
    let corpus = Corpus::from_text(&read(&args.corpus)?, args.p)?;
    let m = estimate_moment(&corpus, args.n, args.r)?;
    write_json(&args.out, &moment_to_json(&m))?;
    Ok(0)
}

fn cmd_recover(args: RecoverArgs) -> Result<u8, Error> {
    let m = moment_from_json(&read(&args.moment)?)?;
    let opts = RecoverOptions {
        tol: args.tol,
        ..RecoverOptions::default()
    };
    let mut res = match recover_structure(&m, args.n, args.p, args.q, args.dmax, &opts) {
        Ok(r) => r,
        Err(Error::RecoveryFailed(msg)) => {
            eprintln!("recovery failed: {msg}");
            return Ok(EXIT_RECOVERY_FAILED);
        }
        Err(e) => return Err(e),
    };
    write_json(&args.out, &matrix_to_json(res.recovered.matrix()))?;
    let mut summary = json!({
        "format_version": FORMAT_VERSION,
        "candidates_found": res.candidates_found,
        "d_max_used": res.d_max_used,
    });
    if let Some(path) = &args.reference {
        let al = res.align_to(&read_matrix(path)?)?;
        summary["alignment"] = json!({
            "permutation": al.permutation,
            "signs": al.signs,
            "per_column_error": al.per_column_error,
            "max_rel_error": al.max_rel_error,
        });
    }
    if let Some(path) = &args.hidden_moment {
        let big = moment_from_json(&read(path)?)?;
        let h = recover_hidden_moment(&big, res.recovered.matrix(), args.tol)?;
        let v = hidden_moment_to_json(&h);
        match &args.hidden_out {
            Some(out) => write_json(out, &v)?,
            None => summary["hidden_moment"] = v,
        }
    }
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(0)
}

fn cmd_ensemble(args: EnsembleArgs) -> Result<u8, Error> {
    let cfg = EnsembleConfig::parse(&read(&args.config)?)?;
    let out = run_ensemble(&cfg)?;
    for note in &out.notes {
        eprintln!("{note}");
    }
    let csv = out.to_csv_string();
    match args.out.or_else(|| cfg.out.as_ref().map(PathBuf::from)) {
        Some(path) => fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(0)
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Guard(_) => EXIT_GUARD,
        Error::RecoveryFailed(_) => EXIT_RECOVERY_FAILED,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Check(a) => cmd_check(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Recover(a) => cmd_recover(a),
        Command::Ensemble(a) => cmd_ensemble(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
