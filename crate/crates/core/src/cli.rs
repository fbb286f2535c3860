//! Command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{
    bs_dpi_lower_bound, cv_lower_bound, prop42_bounds, prop43_upper, rev_cmi_lower_phi, write_csv, BoundCheck,
};
use crate::divergences::{bs_cmi, bs_entropy, cmi, umegaki, BsCmiVariant, Tripartition};
use crate::error::{Error, Result};
use crate::io::{read_state, write_state, StateFile};
use crate::linalg;
use crate::markov::{certify_with_tol, paper_example, planted_bs_qmc, structure_decompose, CertReport};
use crate::quantum::{random_state, to_re_im, von_neumann_entropy, Ensemble, KrausChannel, State, SystemSpec};
use crate::recovery::{align, phi_rot, recover_with, QuadratureRule, RecoveryMap};
use crate::spinchain::{decay_experiment, default_b_sizes, parse_interaction, DecayCurve, InteractionSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Tfim,
    Heisenberg,
    Custom,
}

#[derive(Debug, Parser)]
#[command(name = "bsqmc", version, about = "BS quantum Markov chain toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Verdict tolerance.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file (a directory for `search`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Von Neumann entropy, or D and D^ against a second state.
    Entropy {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        sigma: Option<PathBuf>,
    },
    /// Conditional mutual information.
    Cmi {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value = "A,B,C")]
        partition: String,
    },
    /// BS conditional mutual informations (os, ts, rev or all).
    Bscmi {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value = "A,B,C")]
        partition: String,
        #[arg(long, default_value = "all")]
        variant: String,
    },
    /// Residuals and QMC / BS-QMC verdicts.
    Certify {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value = "A,B,C")]
        partition: String,
    },
    /// Block decomposition of a BS-QMC.
    Decompose {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value = "A,B,C")]
        partition: String,
    },
    /// Applies a recovery map B -> AB to rho_BC.
    Recover {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value = "A,B,C")]
        partition: String,
        /// petz, bs, bs_sym, phi or phi_rot.
        #[arg(long, default_value = "phi")]
        map: String,
    },
    /// Inequality checks on one state, or on random instances without `--state`.
    Bounds {
        #[arg(long)]
        state: Option<PathBuf>,
        #[arg(long, default_value = "A,B,C")]
        partition: String,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
    },
    /// Searches planted BS-QMCs that are not QMCs.
    Search {
        #[arg(long, default_value = "2,2,2")]
        dims: String,
        #[arg(long, default_value_t = 100)]
        seeds: u64,
    },
    /// Decay of I_eta and I^rev with |B| for a Gibbs state.
    Spinchain {
        #[arg(long, value_enum, default_value_t = Model::Tfim)]
        model: Model,
        /// JSON interaction for `--model custom`.
        #[arg(long)]
        interaction: Option<PathBuf>,
        #[arg(long, default_value_t = 6)]
        sites: usize,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        coupling: f64,
        /// Transverse field (TFIM).
        #[arg(long, default_value_t = 1.0)]
        field: f64,
        /// ZZ anisotropy (Heisenberg).
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        /// Comma-separated |B| values; all admissible sizes by default.
        #[arg(long)]
        b_sizes: Option<String>,
    },
    /// The bundled 2x2x2 BS-QMC that is not a QMC.
    Example31,
}

/// `x` with 12 significant digits.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let e = x.abs().log10().floor() as i32;
    if (-5..12).contains(&e) {
        let s = format!("{:.*}", (11 - e).max(0) as usize, x);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.11e}");
        let (m, e) = s.split_once('e').expect("exponent");
        let m = if m.contains('.') { m.trim_end_matches('0').trim_end_matches('.') } else { m };
        format!("{m}e{e}")
    }
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn load(path: &Path) -> Result<State> {
    if !path.exists() {
        return Err(Error::InvalidArgument(format!("{} does not exist", path.display())));
    }
    read_state(path)
}

fn partition(s: &str) -> Result<Tripartition> {
    s.parse()
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable output");
    s.push('\n');
    s
}

fn table(rows: &[(&str, f64)]) -> String {
    let w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    rows.iter().map(|(k, v)| format!("{k:<w$}  {}\n", fmt_num(*v))).collect()
}

fn csv_pairs(rows: &[(&str, f64)]) -> String {
    let mut s = String::from("name,value\n");
    for (k, v) in rows {
        s.push_str(&format!("{k},{v:?}\n"));
    }
    s
}

fn scalar_rows(cli: &Cli, rows: &[(&str, f64)]) -> String {
    match cli.format {
        Format::Text => table(rows),
        Format::Csv => csv_pairs(rows),
        Format::Json => {
            let map: serde_json::Map<String, serde_json::Value> =
                rows.iter().map(|(k, v)| (k.to_string(), serde_json::json!(v))).collect();
            json(&map)
        }
    }
}

fn cert_text(r: &CertReport) -> String {
    let mut rows = vec![
        ("res_petz", r.res_petz),
        ("res_b", r.res_b),
        ("res_bsym", r.res_bsym),
        ("res_phi", r.res_phi),
        ("cmi", r.cmi),
    ];
    if let Some(v) = r.bs_cmi_rev {
        rows.push(("bs_cmi_rev", v));
    }
    rows.extend([
        ("eta_commutator", r.eta_commutator),
        ("eta_product_residual", r.eta_product_residual),
        ("eta_petz_residual", r.eta_petz_residual),
        ("tol", r.tol),
    ]);
    let mut s = table(&rows);
    if r.marginal {
        s.push_str("note: a residual is within a factor 10 of the tolerance\n");
    }
    s.push_str(&format!("BS-QMC: {}, QMC: {}\n", yes(r.verdict_bsqmc), yes(r.verdict_qmc)));
    s
}

fn cert_output(cli: &Cli, r: &CertReport) -> String {
    match cli.format {
        Format::Json => json(r),
        Format::Csv => {
            let mut s = csv_pairs(&[
                ("res_petz", r.res_petz),
                ("res_b", r.res_b),
                ("res_bsym", r.res_bsym),
                ("res_phi", r.res_phi),
                ("cmi", r.cmi),
                ("bs_cmi_rev", r.bs_cmi_rev.unwrap_or(f64::INFINITY)),
                ("eta_commutator", r.eta_commutator),
                ("eta_product_residual", r.eta_product_residual),
                ("eta_petz_residual", r.eta_petz_residual),
            ]);
            s.push_str(&format!("verdict_bsqmc,{}\nverdict_qmc,{}\n", r.verdict_bsqmc, r.verdict_qmc));
            s
        }
        Format::Text => cert_text(r),
    }
}

fn checks_output(cli: &Cli, checks: &[BoundCheck]) -> Result<String> {
    Ok(match cli.format {
        Format::Json => json(&checks),
        Format::Csv => {
            let mut buf = Vec::new();
            write_csv(checks, &mut buf)?;
            String::from_utf8(buf).expect("utf-8 csv")
        }
        Format::Text => {
            let w = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
            let mut s = String::new();
            for c in checks {
                s.push_str(&format!(
                    "{:<w$}  lhs {}  rhs {}  margin {}  {}\n",
                    c.name,
                    fmt_num(c.lhs),
                    fmt_num(c.rhs),
                    fmt_num(c.margin),
                    c.status
                ));
            }
            let bad = checks.iter().filter(|c| c.status == crate::bounds::Status::Violated).count();
            s.push_str(&format!("{} checks, {} violated\n", checks.len(), bad));
            s
        }
    })
}

fn parse_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("`{x}` is not a non-negative integer")))
        })
        .collect()
}

fn state_checks(rho: &State, part: &Tripartition) -> Result<Vec<BoundCheck>> {
    let mut v = vec![rev_cmi_lower_phi(rho, part)?];
    v.extend(prop42_bounds(rho, part)?.checks);
    v.push(prop43_upper(rho, part, &QuadratureRule::default())?);
    Ok(v)
}

/// Every bound on random 2x2x2 instances drawn from `seed .. seed + n`.
fn batch_checks(seed: u64, n: u64) -> Result<Vec<BoundCheck>> {
    let spec = SystemSpec::from_pairs([("A", 2), ("B", 2), ("C", 2)])?;
    let part = Tripartition::abc();
    let k_spec = SystemSpec::from_pairs([("K", 4)])?;
    let per_seed = (seed..seed + n)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let rho = random_state(&spec, Ensemble::HilbertSchmidt, 1e-3, rng.random());
            let sigma = random_state(&spec, Ensemble::HilbertSchmidt, 1e-3, rng.random());
            let ce = KrausChannel::trace_and_replace(&spec, "A")?;
            let ch = KrausChannel::random(&spec, &k_spec, 2, rng.random())?;
            let mut v = vec![cv_lower_bound(&rho, &sigma, &ce)?, bs_dpi_lower_bound(&rho, &sigma, &ch)?];
            v.extend(state_checks(&rho, &part)?);
            for c in &mut v {
                c.name = format!("{}#{s}", c.name);
            }
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

/// All multisets of blocks `(d_l, d_r)` with `sum d_l d_r = db`.
pub fn block_patterns(db: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(
        rest: usize,
        start: usize,
        cands: &[(usize, usize)],
        cur: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if rest == 0 {
            out.push(cur.clone());
            return;
        }
        for (i, &(l, r)) in cands.iter().enumerate().skip(start) {
            if l * r <= rest {
                cur.push((l, r));
                rec(rest - l * r, i, cands, cur, out);
                cur.pop();
            }
        }
    }
    let cands: Vec<(usize, usize)> = (1..=db).flat_map(|l| (1..=db / l).map(move |r| (l, r))).collect();
    let mut out = Vec::new();
    rec(db, 0, &cands, &mut Vec::new(), &mut out);
    out
}

#[derive(Debug, Serialize)]
pub struct Found {
    pub seed: u64,
    pub blocks: Vec<(usize, usize)>,
    pub res_petz: f64,
    pub res_b: f64,
    pub file: Option<String>,
    #[serde(skip)]
    pub state: State,
}

/// Planted BS-QMCs on `dims` with Petz residual above `10 tol`.
pub fn search(dims: [usize; 3], seed: u64, n: u64, tol: f64) -> Result<Vec<Found>> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let [da, db, dc] = dims;
    if da == 0 || db == 0 || dc == 0 || da * db * dc > 64 {
        return Err(Error::TooLarge(format!("search dims {da}x{db}x{dc} outside 1..=64 total")));
    }
    let patterns = block_patterns(db);
    let part = Tripartition::abc();
    let found = (seed..seed + n)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let blocks = patterns[rng.random_range(0..patterns.len())].clone();
            let rho = planted_bs_qmc(&blocks, da, dc, rng.random())?;
            Ok(match certify_with_tol(&rho, &part, tol) {
                Ok(r) if r.verdict_bsqmc && r.res_petz > 10.0 * tol => Some(Found {
                    seed: s,
                    blocks,
                    res_petz: r.res_petz,
                    res_b: r.res_b,
                    file: None,
                    state: rho,
                }),
                _ => None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(found.into_iter().flatten().collect())
}

fn run_search(cli: &Cli, dims: &str, seeds: u64) -> Result<String> {
    let d = parse_list(dims)?;
    let dims: [usize; 3] = d
        .try_into()
        .map_err(|_| Error::InvalidArgument("--dims needs three values".into()))?;
    let mut found = search(dims, cli.seed, seeds, cli.tol)?;
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir)?;
        for f in &mut found {
            let name = format!("bsqmc_{}.json", f.seed);
            write_state(dir.join(&name), &f.state)?;
            f.file = Some(name);
        }
    }
    Ok(match cli.format {
        Format::Json => json(&found),
        Format::Csv => {
            let mut s = String::from("seed,blocks,res_petz,res_b\n");
            for f in &found {
                let b: Vec<String> = f.blocks.iter().map(|(l, r)| format!("{l}x{r}")).collect();
                s.push_str(&format!("{},{},{:?},{:?}\n", f.seed, b.join(" "), f.res_petz, f.res_b));
            }
            s
        }
        Format::Text => {
            let mut s = String::new();
            for f in &found {
                let b: Vec<String> = f.blocks.iter().map(|(l, r)| format!("{l}x{r}")).collect();
                s.push_str(&format!(
                    "seed {}  blocks {}  res_petz {}  res_b {}\n",
                    f.seed,
                    b.join(" "),
                    fmt_num(f.res_petz),
                    fmt_num(f.res_b)
                ));
            }
            s.push_str(&format!("{} of {} seeds are BS-QMCs but not QMCs\n", found.len(), seeds));
            s
        }
    })
}

fn curve_output(cli: &Cli, curve: &DecayCurve) -> Result<String> {
    Ok(match cli.format {
        Format::Json => json(curve),
        Format::Csv => {
            let mut buf = Vec::new();
            curve.write_csv(&mut buf)?;
            String::from_utf8(buf).expect("utf-8 csv")
        }
        Format::Text => {
            let mut s = String::from("|A| |B| |C|  I_eta  I_rev  bound_chain  margin\n");
            for r in &curve.rows {
                s.push_str(&format!(
                    "{} {} {}  {}  {}  {}  {}\n",
                    r.size_a,
                    r.size_b,
                    r.size_c,
                    fmt_num(r.i_eta),
                    fmt_num(r.i_rev),
                    fmt_num(r.bound_chain),
                    fmt_num(r.chain_margin())
                ));
            }
            s
        }
    })
}

fn operator_file(op: crate::quantum::Operator) -> StateFile {
    let (re, im) = to_re_im(op.matrix());
    StateFile {
        subsystems: op.spec().subsystems().to_vec(),
        re,
        im,
    }
}

/// Runs one parsed command and returns the primary output.
pub fn execute(cli: &Cli) -> Result<String> {
    if cli.tol.is_nan() || cli.tol <= 0.0 {
        return Err(Error::InvalidArgument(format!("--tol {} must be positive", cli.tol)));
    }
    match &cli.command {
        Command::Entropy { state, sigma } => {
            let rho = load(state)?;
            let mut rows = vec![("entropy", von_neumann_entropy(&rho))];
            if let Some(p) = sigma {
                let s = load(p)?;
                rows.push(("relative_entropy", umegaki(&rho, &s)?.value));
                rows.push(("bs_entropy", bs_entropy(&rho, &s)?.value));
            }
            Ok(scalar_rows(cli, &rows))
        }
        Command::Cmi { state, partition: p } => {
            let v = cmi(&load(state)?, &partition(p)?)?;
            Ok(scalar_rows(cli, &[("cmi", v)]))
        }
        Command::Bscmi { state, partition: p, variant } => {
            let rho = load(state)?;
            let part = partition(p)?;
            let variants: Vec<BsCmiVariant> = if variant == "all" {
                BsCmiVariant::ALL.to_vec()
            } else {
                vec![variant.parse()?]
            };
            let vals = variants
                .iter()
                .map(|&v| Ok((v.name(), bs_cmi(&rho, &part, v)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(scalar_rows(cli, &vals))
        }
        Command::Certify { state, partition: p } => {
            let r = certify_with_tol(&load(state)?, &partition(p)?, cli.tol)?;
            Ok(cert_output(cli, &r))
        }
        Command::Decompose { state, partition: p } => {
            let d = structure_decompose(&load(state)?, &partition(p)?)?;
            Ok(match cli.format {
                Format::Text => {
                    let mut s = format!("{} blocks, reconstruction residual {}\n", d.blocks.len(), fmt_num(d.residual));
                    for (k, b) in d.blocks.iter().enumerate() {
                        s.push_str(&format!("block {k}: d_L {} d_R {} p {}\n", b.d_l, b.d_r, fmt_num(b.p)));
                    }
                    s
                }
                _ => {
                    let mut s = d.to_json();
                    s.push('\n');
                    s
                }
            })
        }
        Command::Recover { state, partition: p, map } => {
            let rho = load(state)?;
            let part = partition(p)?;
            let x = rho.partial_trace(&part.bc())?;
            let out = if map.eq_ignore_ascii_case("phi_rot") {
                phi_rot(&rho, &part.b, &part.ab(), x.operator(), &QuadratureRule::default())?
            } else {
                let m: RecoveryMap = map.parse()?;
                recover_with(&rho, &part.b, &part.ab(), m, x.operator())?
            };
            let aligned = align(out.clone(), rho.spec())?;
            let residual = linalg::trace_norm(&(aligned - rho.matrix()));
            Ok(match cli.format {
                Format::Json => json(&operator_file(out)),
                _ => scalar_rows(cli, &[("residual", residual)]),
            })
        }
        Command::Bounds { state, partition: p, seeds } => {
            let checks = match state {
                Some(s) => state_checks(&load(s)?, &partition(p)?)?,
                None => batch_checks(cli.seed, *seeds)?,
            };
            checks_output(cli, &checks)
        }
        Command::Search { dims, seeds } => run_search(cli, dims, *seeds),
        Command::Spinchain {
            model,
            interaction,
            sites,
            beta,
            coupling,
            field,
            delta,
            b_sizes,
        } => {
            let spec = match model {
                Model::Tfim => InteractionSpec::tfim(*coupling, *field),
                Model::Heisenberg => InteractionSpec::xxz(*coupling, *delta),
                Model::Custom => {
                    let path = interaction
                        .as_ref()
                        .ok_or_else(|| Error::InvalidArgument("--model custom needs --interaction".into()))?;
                    if !path.exists() {
                        return Err(Error::InvalidArgument(format!("{} does not exist", path.display())));
                    }
                    parse_interaction(&fs::read_to_string(path)?)?
                }
            };
            let sizes = match b_sizes {
                Some(s) => parse_list(s)?,
                None => default_b_sizes(*sites),
            };
            let curve = decay_experiment(&spec, *sites, *beta, &sizes)?;
            curve_output(cli, &curve)
        }
        Command::Example31 => {
            let rho = paper_example();
            let part = Tripartition::abc();
            let r = certify_with_tol(&rho, &part, cli.tol)?;
            let mut s = cert_output(cli, &r);
            if cli.format == Format::Text {
                for v in BsCmiVariant::ALL {
                    s.push_str(&format!("bs_cmi_{}  {}\n", v.name(), fmt_num(bs_cmi(&rho, &part, v)?)));
                }
            }
            Ok(s)
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let result = execute(&cli).and_then(|text| match (&cli.command, &cli.out) {
        // `--out` is the state file for example31 and the directory for search
        (Command::Example31, Some(p)) => {
            write_state(p, &paper_example())?;
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
        (Command::Search { .. }, _) => Ok(std::io::stdout().write_all(text.as_bytes())?),
        _ => emit(&cli.out, &text),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
