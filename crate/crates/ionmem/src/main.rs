//! Command-line interface: catalog inspection, scheme verification,
//! single-shot polarization mapping, scheme search, and sensitivity sweeps.
//!
//! Angles cross this boundary in degrees and are converted exactly once;
//! all serialized angle fields carry a `_deg` suffix. Results go to stdout
//! (or `--output`), diagnostics to stderr. Exit codes: 0 success/pass,
//! 1 verification failure, 2 usage error, 3 infeasible search.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use ionmem::angular::{ca40, HalfInt};
use ionmem::error::Error;
use ionmem::process::{zeeman_evolve, MAX_STORED_NORM_SQ};
use ionmem::schemes::{
    catalog, catalog_scheme, preparation_cost, verify, HeraldAcceptance, HeraldIndex, InputLabel,
    Scheme, SchemeRecord, CATALOG_VERSION,
};
use ionmem::search::{
    optimize, sweep, DetectionSpace, HeraldMode, PsiDFamily, SearchSpace, SweepParameter,
};
use ionmem::state::{AtomicState, PolarizationState};

const EXIT_VERIFY_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "ionmem",
    version,
    about = "Heralded storage of photon polarization qubits in single-ion Zeeman sublevels"
)]
struct Cli {
    /// Bound internal parallelism to this many threads.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in storage schemes.
    Catalog {
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Recompute a scheme and check it against its declared values.
    Verify {
        /// Catalog name (a-e) or path to a scheme record file.
        scheme: String,
        /// Allowed mismatch between computed and declared efficiency.
        #[arg(long, default_value_t = 1e-4)]
        tol_eff: f64,
        /// Allowed mapping infidelity (per-mapping overrides take precedence).
        #[arg(long, default_value_t = 1e-4)]
        tol_fid: f64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Send one input polarization through a scheme and print the stored state.
    Map {
        /// Catalog name (a-e) or path to a scheme record file.
        scheme: String,
        /// Named input H|V|R|L, or "theta,phi" in degrees.
        #[arg(long, allow_hyphen_values = true)]
        input: String,
        /// Magnetic field in tesla; with --time, applies the Larmor phase
        /// rotation accumulated between storage and herald detection.
        #[arg(long, allow_negative_numbers = true)]
        b_field: Option<f64>,
        /// Herald delay time in seconds.
        #[arg(long)]
        time: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Search a parameter box for the most efficient valid scheme.
    Optimize {
        /// Initial-state family: "single", "pair", "m=<half-int>" (fixed
        /// sublevel) or "pair=<half-int>" (fixed balanced pair).
        #[arg(long, default_value = "single")]
        psi_d: String,
        /// Fix the absorption angle (degrees).
        #[arg(long, conflicts_with = "alpha_range")]
        alpha: Option<f64>,
        /// Absorption angle range "lo:hi" in degrees (default 0:90).
        #[arg(long)]
        alpha_range: Option<String>,
        /// Fix the detection angle (degrees).
        #[arg(long, conflicts_with_all = ["alpha_prime_range", "lock_alpha"])]
        alpha_prime: Option<f64>,
        /// Detection angle range "lo:hi" in degrees (default 0:90).
        #[arg(long)]
        alpha_prime_range: Option<String>,
        /// Enforce alpha' = alpha (collinear collection optics).
        #[arg(long)]
        lock_alpha: bool,
        /// Fix the detection basis angle theta' (degrees); otherwise searched.
        #[arg(long, allow_negative_numbers = true)]
        theta_prime: Option<f64>,
        /// Fix the detection basis phase phi' (degrees); otherwise searched.
        #[arg(long, allow_negative_numbers = true)]
        phi_prime: Option<f64>,
        /// Herald acceptance: one, both, or auto (count the second analyzer
        /// port whenever it is valid on its own).
        #[arg(long, default_value = "auto")]
        heralds: String,
        /// Largest gram deviation accepted as a valid memory.
        #[arg(long, default_value_t = 1e-6)]
        feasibility_tol: f64,
        /// Recorded in the result for bookkeeping; the search itself is
        /// deterministic.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the winning scheme record to this file.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Evaluate a scheme across one swept parameter.
    Sweep {
        /// Catalog name (a-e) or path to a scheme record file.
        scheme: String,
        /// alpha | alpha_prime | theta_prime | phi_prime | input_impurity |
        /// psi_d_impurity.
        #[arg(long)]
        param: String,
        /// "lo:hi" - degrees for angle parameters, amplitude for impurities.
        #[arg(long, allow_hyphen_values = true)]
        range: String,
        #[arg(long)]
        steps: usize,
        /// Write rows here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SweepFormat::Csv)]
        format: SweepFormat,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn run(command: Command) -> Result<u8, Error> {
    match command {
        Command::Catalog { format } => cmd_catalog(format),
        Command::Verify {
            scheme,
            tol_eff,
            tol_fid,
            format,
        } => cmd_verify(&scheme, tol_eff, tol_fid, format),
        Command::Map {
            scheme,
            input,
            b_field,
            time,
            format,
        } => cmd_map(&scheme, &input, b_field, time, format),
        Command::Optimize {
            psi_d,
            alpha,
            alpha_range,
            alpha_prime,
            alpha_prime_range,
            lock_alpha,
            theta_prime,
            phi_prime,
            heralds,
            feasibility_tol,
            seed,
            output,
            format,
        } => cmd_optimize(OptimizeArgs {
            psi_d,
            alpha,
            alpha_range,
            alpha_prime,
            alpha_prime_range,
            lock_alpha,
            theta_prime,
            phi_prime,
            heralds,
            feasibility_tol,
            seed,
            output,
            format,
        }),
        Command::Sweep {
            scheme,
            param,
            range,
            steps,
            output,
            format,
        } => cmd_sweep(&scheme, &param, &range, steps, output, format),
    }
}

// ---------------------------------------------------------------------------
// shared helpers
// ---------------------------------------------------------------------------

fn versions() -> serde_json::Value {
    json!({ "tool": env!("CARGO_PKG_VERSION"), "catalog": CATALOG_VERSION })
}

fn envelope(command: &str, inputs: serde_json::Value, results: serde_json::Value) -> String {
    let doc = json!({
        "command": command,
        "inputs": inputs,
        "results": results,
        "versions": versions(),
    });
    serde_json::to_string_pretty(&doc).expect("report serialization cannot fail")
}

/// Resolve a scheme selector: a single catalog letter, or a record file.
fn resolve_scheme(selector: &str) -> Result<Scheme, Error> {
    let trimmed = selector.trim();
    if trimmed.len() == 1 && trimmed.chars().all(|c| c.is_ascii_alphabetic()) {
        return catalog_scheme(trimmed);
    }
    let path = Path::new(trimmed);
    if !path.exists() {
        return Err(Error::UnknownScheme(selector.to_string()));
    }
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidScheme(format!("cannot read {}: {e}", path.display())))?;
    let record: SchemeRecord = serde_json::from_str(&text).map_err(|e| {
        Error::InvalidScheme(format!(
            "{}: parse error at line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    Scheme::from_record(&record)
}

fn state_triples(state: &AtomicState) -> serde_json::Value {
    let triples: Vec<serde_json::Value> = state
        .manifold()
        .sublevels()
        .zip(state.amps())
        .map(|(m, a)| json!([m.twice(), a.re, a.im]))
        .collect();
    json!(triples)
}

fn herald_name(which: HeraldIndex) -> &'static str {
    match which {
        HeraldIndex::Primary => "primary",
        HeraldIndex::Secondary => "secondary",
    }
}

/// Compact rendering of the prepared state for the catalog table.
fn psi_d_summary(state: &AtomicState) -> String {
    let support = state.support(1e-12);
    match support.as_slice() {
        [m] => format!("|{m}>"),
        [a, b] => {
            let wa = state.amp(*a).norm_sqr();
            let wb = state.amp(*b).norm_sqr();
            if (wa - wb).abs() < 1e-9 {
                format!("(|{a}>+|{b}>)/sqrt2")
            } else {
                format!("a|{a}>+b|{b}>")
            }
        }
        levels => format!("superposition over {} sublevels", levels.len()),
    }
}

fn parse_range(text: &str, name: &str) -> Result<(f64, f64), Error> {
    let (lo, hi) = text
        .split_once(':')
        .ok_or_else(|| Error::InvalidSearchSpace(format!("{name} must look like lo:hi")))?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|_| Error::InvalidSearchSpace(format!("bad {name} lower bound '{lo}'")))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|_| Error::InvalidSearchSpace(format!("bad {name} upper bound '{hi}'")))?;
    Ok((lo, hi))
}

// ---------------------------------------------------------------------------
// catalog
// ---------------------------------------------------------------------------

fn cmd_catalog(format: Format) -> Result<u8, Error> {
    let schemes = catalog();
    match format {
        Format::Json => {
            let rows: Vec<serde_json::Value> = schemes
                .iter()
                .map(|s| {
                    let record = s.to_record();
                    let prep = preparation_cost(&s.psi_d).expect("catalog states preparable");
                    let mut value = serde_json::to_value(&record).unwrap();
                    value["prep_pulses"] = json!(prep.pulses);
                    // efficiencies are relative to the strongest channel and
                    // do not include the herald decay branching; report it
                    // alongside so the absolute numbers can be formed
                    value["herald_branching"] = json!(ca40::P32_BRANCHING_S12);
                    value
                })
                .collect();
            println!(
                "{}",
                envelope("catalog", json!({}), json!({ "schemes": rows }))
            );
        }
        _ => {
            println!(
                "{:<5} {:<22} {:>9} {:>9} {:>9} {:>9}  {:<7} {:>10} {:>11}",
                "name",
                "psi_d",
                "alpha",
                "alpha'",
                "theta'",
                "phi'",
                "heralds",
                "efficiency",
                "prep_pulses"
            );
            for s in &schemes {
                let prep = preparation_cost(&s.psi_d).expect("catalog states preparable");
                println!(
                    "{:<5} {:<22} {:>9.2} {:>9.2} {:>9.2} {:>9.2}  {:<7} {:>10.4} {:>11}",
                    s.name,
                    psi_d_summary(&s.psi_d),
                    s.geometry.alpha_deg(),
                    s.geometry.alpha_prime_deg(),
                    s.theta_prime.to_degrees(),
                    s.phi_prime.to_degrees(),
                    match s.accepted_heralds {
                        HeraldAcceptance::One => "one",
                        HeraldAcceptance::Both => "both",
                    },
                    s.declared_efficiency.unwrap_or(f64::NAN),
                    prep.pulses
                );
            }
        }
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

fn cmd_verify(selector: &str, tol_eff: f64, tol_fid: f64, format: Format) -> Result<u8, Error> {
    let scheme = resolve_scheme(selector)?;
    let report = verify(&scheme, tol_eff, tol_fid)?;

    match format {
        Format::Json => {
            let heralds: Vec<serde_json::Value> = report
                .herald_reports
                .iter()
                .map(|(which, r)| {
                    json!({
                        "herald": herald_name(*which),
                        "is_valid": r.is_valid,
                        "gram_deviation": r.gram_deviation,
                        "efficiency_min": r.efficiency_min,
                        "efficiency_max": r.efficiency_max,
                    })
                })
                .collect();
            let mappings: Vec<serde_json::Value> = report
                .mapping_fidelities
                .iter()
                .map(|(input, which, fid, pass)| {
                    json!({
                        "input": input.as_str(),
                        "herald": herald_name(*which),
                        "fidelity": fid,
                        "pass": pass,
                    })
                })
                .collect();
            let results = json!({
                "scheme": report.scheme_name,
                "computed_efficiency": report.computed_efficiency,
                "declared_efficiency": report.declared_efficiency,
                "efficiency_match": report.efficiency_match,
                "heralds": heralds,
                "mappings": mappings,
                "all_pass": report.all_pass,
            });
            let inputs = json!({
                "scheme": selector,
                "tol_eff": tol_eff,
                "tol_fid": tol_fid,
            });
            println!("{}", envelope("verify", inputs, results));
        }
        _ => {
            match report.declared_efficiency {
                Some(declared) => println!(
                    "scheme {}: computed efficiency {:.6}, declared {:.4} -> {}",
                    report.scheme_name,
                    report.computed_efficiency,
                    declared,
                    if report.efficiency_match {
                        "match"
                    } else {
                        "MISMATCH"
                    }
                ),
                None => println!(
                    "scheme {}: computed efficiency {:.6} (nothing declared)",
                    report.scheme_name, report.computed_efficiency
                ),
            }
            for (which, r) in &report.herald_reports {
                println!(
                    "herald {:<9}: valid={} gram_deviation={:.3e} efficiency=[{:.6}, {:.6}]",
                    herald_name(*which),
                    r.is_valid,
                    r.gram_deviation,
                    r.efficiency_min,
                    r.efficiency_max
                );
            }
            for (input, which, fid, pass) in &report.mapping_fidelities {
                println!(
                    "mapping {} ({:<9}): fidelity {:.6} -> {}",
                    input.as_str(),
                    herald_name(*which),
                    fid,
                    if *pass { "pass" } else { "FAIL" }
                );
            }
            println!("RESULT: {}", if report.all_pass { "PASS" } else { "FAIL" });
        }
    }
    Ok(if report.all_pass { 0 } else { EXIT_VERIFY_FAIL })
}

// ---------------------------------------------------------------------------
// map
// ---------------------------------------------------------------------------

fn parse_input_polarization(text: &str) -> Result<(String, PolarizationState), Error> {
    if let Ok(label) = InputLabel::from_str(text) {
        return Ok((label.as_str().to_string(), label.to_polarization()));
    }
    if let Some((theta, phi)) = text.split_once(',') {
        let theta: f64 = theta
            .trim()
            .parse()
            .map_err(|_| Error::InvalidScheme(format!("bad input polarization angle '{theta}'")))?;
        let phi: f64 = phi
            .trim()
            .parse()
            .map_err(|_| Error::InvalidScheme(format!("bad input polarization phase '{phi}'")))?;
        return Ok((
            format!("theta={theta}deg,phi={phi}deg"),
            PolarizationState::from_angles(theta.to_radians(), phi.to_radians()),
        ));
    }
    Err(Error::InvalidScheme(format!(
        "input must be H, V, R, L or \"theta,phi\" in degrees, got '{text}'"
    )))
}

fn cmd_map(
    selector: &str,
    input: &str,
    b_field: Option<f64>,
    time: Option<f64>,
    format: Format,
) -> Result<u8, Error> {
    let scheme = resolve_scheme(selector)?;
    let (input_name, pol) = parse_input_polarization(input)?;
    let delay = match (b_field, time) {
        (Some(b), Some(t)) => Some((b, t)),
        (None, None) => None,
        _ => {
            return Err(Error::InvalidScheme(
                "--b-field and --time must be given together".into(),
            ))
        }
    };

    let mut herald_rows = Vec::new();
    for (which, matrix) in scheme.matrices()? {
        let stored = matrix.apply(&pol);
        let p_success = stored.norm_sq();
        let eps = p_success / MAX_STORED_NORM_SQ;
        // weights at the rounding floor are closed channels, not states
        let normalized = if p_success <= 1e-24 {
            None
        } else {
            stored.normalized().ok()
        };
        let delayed = match (&normalized, delay) {
            (Some(state), Some((b, t))) => Some(zeeman_evolve(state, b, t)),
            _ => None,
        };
        herald_rows.push((which, p_success, eps, normalized, delayed));
    }

    match format {
        Format::Json => {
            let rows: Vec<serde_json::Value> = herald_rows
                .iter()
                .map(|(which, p, eps, state, delayed)| {
                    let herald_pol = scheme.herald_polarization(*which);
                    json!({
                        "herald": herald_name(*which),
                        "herald_amp_h": [herald_pol.amp_h.re, herald_pol.amp_h.im],
                        "herald_amp_v": [herald_pol.amp_v.re, herald_pol.amp_v.im],
                        "success_probability": p,
                        "efficiency": eps,
                        "state": state.as_ref().map(state_triples),
                        "state_after_delay": delayed.as_ref().map(state_triples),
                    })
                })
                .collect();
            let inputs = json!({
                "scheme": selector,
                "input": input_name,
                "b_field_tesla": b_field,
                "time_s": time,
            });
            let results = json!({
                "heralds": rows,
                "herald_branching": ca40::P32_BRANCHING_S12,
            });
            println!("{}", envelope("map", inputs, results));
        }
        _ => {
            println!("scheme {}, input {}", scheme.name, input_name);
            for (which, p, eps, state, delayed) in &herald_rows {
                println!(
                    "herald {:<9}: p_success={:.6} efficiency={:.6}",
                    herald_name(*which),
                    p,
                    eps
                );
                match state {
                    Some(s) => println!("  stored state: {s}"),
                    None => println!("  stored state: none (zero-probability channel)"),
                }
                if let Some(s) = delayed {
                    println!("  after delay : {s}");
                }
            }
        }
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

struct OptimizeArgs {
    psi_d: String,
    alpha: Option<f64>,
    alpha_range: Option<String>,
    alpha_prime: Option<f64>,
    alpha_prime_range: Option<String>,
    lock_alpha: bool,
    theta_prime: Option<f64>,
    phi_prime: Option<f64>,
    heralds: String,
    feasibility_tol: f64,
    seed: u64,
    output: Option<PathBuf>,
    format: Format,
}

fn parse_psi_d_family(text: &str) -> Result<PsiDFamily, Error> {
    let d52 = ca40::d52();
    let t = text.trim();
    if t.eq_ignore_ascii_case("single") {
        return Ok(PsiDFamily::SingleSublevel);
    }
    if t.eq_ignore_ascii_case("pair") {
        return Ok(PsiDFamily::BalancedPair);
    }
    if let Some(m) = t.strip_prefix("m=") {
        let m: HalfInt = m.parse()?;
        let state =
            AtomicState::single(d52, m).map_err(|e| Error::InvalidSearchSpace(e.to_string()))?;
        return Ok(PsiDFamily::Fixed(state));
    }
    if let Some(m) = t.strip_prefix("pair=") {
        let m: HalfInt = m.parse()?;
        let state = AtomicState::balanced_pair(d52, m.abs())
            .map_err(|e| Error::InvalidSearchSpace(e.to_string()))?;
        return Ok(PsiDFamily::Fixed(state));
    }
    Err(Error::InvalidSearchSpace(format!(
        "psi_d must be 'single', 'pair', 'm=<half-int>' or 'pair=<half-int>', got '{text}'"
    )))
}

fn angle_interval(
    fixed: Option<f64>,
    range: &Option<String>,
    name: &str,
    default: (f64, f64),
) -> Result<(f64, f64), Error> {
    if let Some(a) = fixed {
        let r = a.to_radians();
        return Ok((r, r));
    }
    match range {
        Some(text) => {
            let (lo, hi) = parse_range(text, name)?;
            Ok((lo.to_radians(), hi.to_radians()))
        }
        None => Ok(default),
    }
}

fn cmd_optimize(args: OptimizeArgs) -> Result<u8, Error> {
    let default_box = (0.0, 90f64.to_radians());
    let space = SearchSpace {
        psi_d_family: parse_psi_d_family(&args.psi_d)?,
        alpha_range: angle_interval(args.alpha, &args.alpha_range, "alpha-range", default_box)?,
        alpha_prime_range: angle_interval(
            args.alpha_prime,
            &args.alpha_prime_range,
            "alpha-prime-range",
            default_box,
        )?,
        lock_alpha_equal: args.lock_alpha,
        detection: match (args.theta_prime, args.phi_prime) {
            (None, None) => DetectionSpace::free(),
            (theta, phi) => DetectionSpace::Fixed {
                theta_prime: theta.unwrap_or(0.0).to_radians(),
                phi_prime: phi.unwrap_or(0.0).to_radians(),
            },
        },
        heralds: match args.heralds.trim().to_ascii_lowercase().as_str() {
            "one" => HeraldMode::One,
            "both" => HeraldMode::Both,
            "auto" => HeraldMode::Auto,
            other => {
                return Err(Error::InvalidSearchSpace(format!(
                    "heralds must be one, both or auto, got '{other}'"
                )))
            }
        },
    };

    let result = optimize(&space, args.feasibility_tol, args.seed)?;
    let mut record = result.best.to_record();
    record.infeasible = !result.feasible;
    let record_json =
        serde_json::to_string_pretty(&record).expect("scheme serialization cannot fail");
    if let Some(path) = &args.output {
        fs::write(path, format!("{record_json}\n"))
            .map_err(|e| Error::InvalidScheme(format!("cannot write {}: {e}", path.display())))?;
    }

    let summary = format!(
        "best: alpha_deg={:.4} alpha_prime_deg={:.4} theta_prime_deg={:.4} phi_prime_deg={:.4} \
         efficiency={:.6} residual={:.3e} feasible={} evaluations={}",
        result.best.geometry.alpha_deg(),
        result.best.geometry.alpha_prime_deg(),
        result.best.theta_prime.to_degrees(),
        result.best.phi_prime.to_degrees(),
        result.objective,
        result.constraint_residual,
        result.feasible,
        result.evaluations
    );

    match args.format {
        Format::Json => {
            let trace: Vec<serde_json::Value> = result
                .trace
                .iter()
                .map(|t| {
                    json!({
                        "evaluations": t.evaluations,
                        "objective": t.objective,
                        "residual": t.residual,
                    })
                })
                .collect();
            let inputs = json!({
                "psi_d": args.psi_d,
                "alpha_range_deg": [
                    space.alpha_range.0.to_degrees(),
                    space.alpha_range.1.to_degrees()
                ],
                "alpha_prime_range_deg": [
                    space.alpha_prime_range.0.to_degrees(),
                    space.alpha_prime_range.1.to_degrees()
                ],
                "lock_alpha": args.lock_alpha,
                "heralds": args.heralds,
                "feasibility_tol": args.feasibility_tol,
                "seed": args.seed,
            });
            let results = json!({
                "scheme": serde_json::to_value(&record).unwrap(),
                "objective": result.objective,
                "constraint_residual": result.constraint_residual,
                "feasible": result.feasible,
                "evaluations": result.evaluations,
                "trace": trace,
            });
            println!("{}", envelope("optimize", inputs, results));
        }
        _ => {
            println!("{summary}");
            if args.output.is_none() {
                println!("{record_json}");
            }
        }
    }
    Ok(if result.feasible { 0 } else { EXIT_INFEASIBLE })
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

fn cmd_sweep(
    selector: &str,
    param: &str,
    range_text: &str,
    steps: usize,
    output: Option<PathBuf>,
    format: SweepFormat,
) -> Result<u8, Error> {
    let scheme = resolve_scheme(selector)?;
    let parameter: SweepParameter = param.parse()?;
    let (lo, hi) = parse_range(range_text, "range")?;
    let range = if parameter.is_angle() {
        (lo.to_radians(), hi.to_radians())
    } else {
        (lo, hi)
    };

    let result = sweep(&scheme, parameter, range, steps)?;
    let to_output_units = |v: f64| {
        if parameter.is_angle() {
            v.to_degrees()
        } else {
            v
        }
    };

    let rendered = match format {
        SweepFormat::Csv => {
            let mut out =
                String::from("param_value,eff_min,eff_max,gram_deviation,worst_fidelity\n");
            for s in &result.samples {
                out.push_str(&format!(
                    "{:.4},{:.6},{:.6},{:.6e},{:.6}\n",
                    to_output_units(s.parameter_value),
                    s.efficiency_min,
                    s.efficiency_max,
                    s.gram_deviation,
                    s.worst_fidelity
                ));
            }
            out
        }
        SweepFormat::Json => {
            let samples: Vec<serde_json::Value> = result
                .samples
                .iter()
                .map(|s| {
                    let mut row = json!({
                        "eff_min": s.efficiency_min,
                        "eff_max": s.efficiency_max,
                        "gram_deviation": s.gram_deviation,
                        "worst_fidelity": s.worst_fidelity,
                    });
                    let key = if parameter.is_angle() {
                        "param_value_deg"
                    } else {
                        "param_value"
                    };
                    row[key] = json!(to_output_units(s.parameter_value));
                    row
                })
                .collect();
            let inputs = json!({
                "scheme": selector,
                "param": parameter.as_str(),
                "range": range_text,
                "steps": steps,
            });
            let mut text = envelope("sweep", inputs, json!({ "samples": samples }));
            text.push('\n');
            text
        }
    };

    match output {
        Some(path) => fs::write(&path, rendered)
            .map_err(|e| Error::InvalidScheme(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{rendered}"),
    }
    Ok(0)
}
