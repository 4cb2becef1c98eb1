//! fractlab: experiments on discretized fractal measures.
//!
//! Every run emits a JSON report that echoes the fully resolved
//! configuration; outputs are byte-deterministic for a fixed seed and
//! independent of the thread count.

mod source;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use fractlab::convolution;
use fractlab::dyadic::{dim_fit, LqExponent};
use fractlab::entropy_diag::{self, FiniteSet};
use fractlab::error::{Error, Result};
use fractlab::fmz;
use fractlab::fourier;
use fractlab::nonconc::{self, AffineSubspace, AncScanParams};
use fractlab::zoo::{self, schottky as fuchsian};

use source::MeasureArgs;

#[derive(Parser)]
#[command(name = "fractlab", version, about = "multiscale laboratory for discretized fractal measures")]
struct Cli {
    /// Worker threads (default: available parallelism; env FRACTLAB_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for every sampled quantity.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// JSON config file whose keys mirror the flags (flags win).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a zoo measure and write it as an FMZ file.
    Gen {
        #[command(flatten)]
        measure: MeasureArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Convolve measures: self-power with --n, or a pair with --with.
    Conv {
        #[command(flatten)]
        measure: MeasureArgs,
        /// Self-convolution power.
        #[arg(long)]
        n: Option<u32>,
        /// Second FMZ operand for a binary convolution.
        #[arg(long)]
        with: Option<PathBuf>,
        /// Direct-path threshold on nnz(a)*nnz(b).
        #[arg(long, default_value_t = convolution::DIRECT_NNZ_PRODUCT)]
        conv_threshold: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Fit an L^q dimension over a scale window.
    Dim {
        #[command(flatten)]
        measure: MeasureArgs,
        /// Exponent q in (1, inf); pass "inf" for the Frostman exponent.
        #[arg(long, default_value = "2")]
        q: String,
        /// Scale window "lo:hi".
        #[arg(long, default_value = "8:16")]
        scales: String,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Scan large frequencies for slow transform decay.
    FourierScan {
        #[command(flatten)]
        measure: MeasureArgs,
        /// Comma-separated frequency radii.
        #[arg(long, value_delimiter = ',', default_value = "64,128,256,512,1024,2048,4096")]
        t: Vec<f64>,
        #[arg(long, default_value_t = 0.02)]
        delta: f64,
        #[arg(long, default_value_t = fourier::DEFAULT_STEP)]
        step: f64,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Affine non-concentration scan.
    Nonconc {
        #[command(flatten)]
        measure: MeasureArgs,
        #[arg(long, default_value_t = 0.2)]
        theta: f64,
        #[arg(long, default_value_t = 1)]
        r: u32,
        #[arg(long, default_value_t = 4)]
        k: u32,
        #[arg(long, default_value_t = 64)]
        directions: u32,
        #[arg(long, default_value_t = 32)]
        offsets: u32,
        /// Comma-separated relative tube widths.
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.25,0.125,0.0625")]
        eps: Vec<f64>,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Worst-hyperplane polynomial decay fit.
    HplaneDecay {
        #[command(flatten)]
        measure: MeasureArgs,
        /// Random hyperplanes to sample (plus covariance directions).
        #[arg(long, default_value_t = 64)]
        family: u32,
        #[arg(long, value_delimiter = ',', default_value = "0.4,0.2,0.1,0.05,0.025")]
        eps: Vec<f64>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Convolution-square transfer check for one hyperplane.
    SqrtFriendly {
        #[command(flatten)]
        measure: MeasureArgs,
        /// Hyperplane normal (comma separated).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        normal: Vec<f64>,
        /// Hyperplane anchor point.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        anchor: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.4,0.2,0.1,0.05")]
        eps: Vec<f64>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Exact additive energy of two cell sets.
    Energy {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Greedy BSG-style extraction with a measured certificate.
    Bsg {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        l: f64,
        #[arg(long, default_value_t = 0.1)]
        eps_prime: f64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Concentration / saturation diagnostics for one subspace.
    Hochman {
        #[command(flatten)]
        measure: MeasureArgs,
        /// Subspace basis, vectors ';'-separated, coordinates ','-separated.
        #[arg(long, allow_hyphen_values = true)]
        v_basis: String,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        /// Saturation entropy scale.
        #[arg(long, default_value_t = 6)]
        m: u32,
        /// Also report the component fraction at stride r over scales 0..=k.
        #[arg(long)]
        component_k: Option<u32>,
        #[arg(long, default_value_t = 2)]
        component_r: u32,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Critical exponent of a Schottky group.
    Schottky {
        /// Interval pairs "s0,s1:t0,t1;...".
        #[arg(long, allow_hyphen_values = true)]
        intervals: String,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 16)]
        nodes: usize,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Shadow-lemma validation of a Patterson-Sullivan measure.
    Shadow {
        #[arg(long, allow_hyphen_values = true)]
        intervals: String,
        #[arg(long, default_value_t = 13)]
        scale: u32,
        #[arg(long, default_value_t = 16)]
        depth: u32,
        #[arg(long, default_value_t = 12)]
        samples: u32,
        /// t grid "start:step:end".
        #[arg(long, default_value = "0:0.5:7")]
        t_grid: String,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Ball-mass doubling exponents.
    Doubling {
        #[command(flatten)]
        measure: MeasureArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.111,0.333,1.0")]
        sigma: Vec<f64>,
        #[arg(long = "radii", value_delimiter = ',', default_value = "0.333,0.111")]
        r_grid: Vec<f64>,
        #[arg(long, default_value_t = 32)]
        centers: u32,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Merge previously written JSON reports into one summary.
    Report {
        /// Report files to merge.
        #[arg(long = "in", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn main() {
    let argv = merge_config_into_argv(std::env::args().collect());
    let cli = Cli::parse_from(argv);

    let threads = cli
        .threads
        .or_else(|| {
            std::env::var("FRACTLAB_THREADS").ok().and_then(|v| v.parse().ok())
        })
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .ok();

    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

/// Pre-scans argv for `--config FILE` and appends `--key value` for every
/// config key not already present among the flags, so explicit flags always
/// win.
fn merge_config_into_argv(mut argv: Vec<String>) -> Vec<String> {
    let Some(pos) = argv.iter().position(|a| a == "--config") else {
        return argv;
    };
    let Some(path) = argv.get(pos + 1).cloned() else {
        return argv;
    };
    let Ok(text) = std::fs::read_to_string(&path) else {
        return argv; // parse proceeds; the error surfaces as a missing flag
    };
    let Ok(serde_json::Value::Object(map)) = serde_json::from_str(&text) else {
        eprintln!("error: config file {path} is not a JSON object");
        std::process::exit(2);
    };
    for (key, value) in map {
        let flag = format!("--{key}");
        if argv.iter().any(|a| a == &flag || a.starts_with(&format!("{flag}="))) {
            continue;
        }
        match value {
            serde_json::Value::Bool(true) => argv.push(flag),
            serde_json::Value::Bool(false) => {}
            serde_json::Value::Array(items) => {
                argv.push(flag);
                argv.push(
                    items
                        .iter()
                        .map(render_scalar)
                        .collect::<Vec<_>>()
                        .join(","),
                );
            }
            other => {
                argv.push(flag);
                argv.push(render_scalar(&other));
            }
        }
    }
    argv
}

fn render_scalar(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// The envelope every command writes. The thread count is deliberately
/// not echoed: results are independent of it, and reports must be
/// byte-identical across thread counts.
fn envelope(
    command: &str,
    seed: u64,
    config: serde_json::Value,
    results: serde_json::Value,
) -> serde_json::Value {
    serde_json::json!({
        "format": "fractlab-report-v1",
        "command": command,
        "seed": seed,
        "config": config,
        "results": results,
    })
}

fn emit_json(path: &Option<PathBuf>, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format(format!("report serialization failed: {e}")))?;
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn emit_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                text.push(',');
            }
            first = false;
            write!(text, "{v:.16e}").unwrap();
        }
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn parse_q(text: &str) -> Result<LqExponent> {
    if text == "inf" || text == "infinity" {
        Ok(LqExponent::Infinity)
    } else {
        let q: f64 = text
            .parse()
            .map_err(|_| Error::Parameter(format!("bad exponent {text:?}")))?;
        LqExponent::Finite(q).validate()
    }
}

fn parse_window(text: &str) -> Result<(u32, u32)> {
    let (lo, hi) = text
        .split_once(':')
        .ok_or_else(|| Error::Parameter(format!("scale window {text:?} needs 'lo:hi'")))?;
    let lo: u32 = lo.parse().map_err(|_| Error::Parameter("bad window low".into()))?;
    let hi: u32 = hi.parse().map_err(|_| Error::Parameter("bad window high".into()))?;
    if lo > hi {
        return Err(Error::Parameter("empty scale window".into()));
    }
    Ok((lo, hi))
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Parameter(format!("grid {text:?} needs 'start:step:end'")));
    }
    let start: f64 = parts[0].parse().map_err(|_| Error::Parameter("bad grid start".into()))?;
    let step: f64 = parts[1].parse().map_err(|_| Error::Parameter("bad grid step".into()))?;
    let end: f64 = parts[2].parse().map_err(|_| Error::Parameter("bad grid end".into()))?;
    if !(step > 0.0) || end < start {
        return Err(Error::Parameter("grid needs positive step and end >= start".into()));
    }
    let n = ((end - start) / step).round() as usize;
    Ok((0..=n).map(|i| start + step * i as f64).collect())
}

fn parse_basis(text: &str) -> Result<Vec<Vec<f64>>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|vector| {
            vector
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Input(format!("bad basis coordinate {c:?}")))
                })
                .collect()
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Gen { measure, out, json } => {
            let m = measure.resolve()?;
            fmz::write_file(&m, &out)?;
            let report = envelope(
                "gen",
                seed,
                serde_json::json!({"measure": measure.echo(), "out": out.display().to_string()}),
                serde_json::json!({
                    "d": m.dim(), "k": m.scale(), "nnz": m.nnz(), "total": m.total(),
                }),
            );
            emit_json(&json, &report)
        }
        Command::Conv { measure, n, with, conv_threshold, out, json } => {
            let m = measure.resolve()?;
            let result = match (&n, &with) {
                (Some(power), None) => convolution::self_power(&m, *power)?,
                (None, Some(path)) => {
                    let other = fmz::read_file(path)?;
                    convolution::convolve_with_threshold(&m, &other, conv_threshold)?
                }
                _ => {
                    return Err(Error::Parameter(
                        "conv needs exactly one of --n or --with".into(),
                    ))
                }
            };
            fmz::write_file(&result, &out)?;
            let report = envelope(
                "conv",
                seed,
                serde_json::json!({
                    "measure": measure.echo(), "n": n,
                    "with": with.as_ref().map(|p| p.display().to_string()),
                    "conv_threshold": conv_threshold, "out": out.display().to_string(),
                }),
                serde_json::json!({
                    "k": result.scale(), "nnz": result.nnz(), "total": result.total(),
                }),
            );
            emit_json(&json, &report)
        }
        Command::Dim { measure, q, scales, json, csv } => {
            let exponent = parse_q(&q)?;
            let window = parse_window(&scales)?;
            let mut series: Vec<(u32, f64)> = Vec::new();
            let mut effective = window;
            if let Some(recipe) = measure.recipe()? {
                for k in window.0..=window.1 {
                    let m = zoo::generate(&recipe.at_scale(k))?.normalized()?;
                    series.push((k, m.lq_pow(exponent)?));
                }
            } else {
                let m = measure.resolve()?.normalized()?;
                effective = (window.0.min(m.scale()), window.1.min(m.scale()));
                for k in effective.0..=effective.1 {
                    series.push((k, m.coarsen(k)?.lq_pow(exponent)?));
                }
            }
            let estimate = dim_fit(&series, exponent)?;
            if let Some(path) = &csv {
                let rows: Vec<Vec<f64>> =
                    series.iter().map(|&(k, v)| vec![k as f64, v]).collect();
                emit_csv(path, "k,norm_power", &rows)?;
            }
            let report = envelope(
                "dim",
                seed,
                serde_json::json!({
                    "measure": measure.echo(), "q": q,
                    "scales": scales, "effective_scales": effective,
                }),
                serde_json::json!({"estimate": estimate, "series": series}),
            );
            emit_json(&json, &report)
        }
        Command::FourierScan { measure, t, delta, step, json, csv } => {
            let m = measure.resolve()?;
            let mut reports = Vec::new();
            for &radius in &t {
                reports.push(fourier::bad_set_scan(&m, radius, delta, step)?);
            }
            if let Some(path) = &csv {
                let rows: Vec<Vec<f64>> = reports
                    .iter()
                    .map(|r| vec![r.t, r.bad_count as f64, r.cover_count as f64])
                    .collect();
                emit_csv(path, "t,bad_count,cover_count", &rows)?;
            }
            let report = envelope(
                "fourier-scan",
                seed,
                serde_json::json!({
                    "measure": measure.echo(), "t": t, "delta": delta, "step": step,
                }),
                serde_json::json!({"scans": reports}),
            );
            emit_json(&json, &report)
        }
        Command::Nonconc { measure, theta, r, k, directions, offsets, eps, json, csv } => {
            let m = measure.resolve()?;
            let params = AncScanParams {
                theta,
                r,
                k,
                direction_samples: directions,
                offset_samples: offsets,
                epsilons: eps.clone(),
                exception_threshold: 0.9,
                seed,
            };
            let anc = nonconc::anc_scan(&m, &params)?;
            if let Some(path) = &csv {
                let rows: Vec<Vec<f64>> =
                    anc.delta_curve.iter().map(|&(e, v)| vec![e, v]).collect();
                emit_csv(path, "eps,delta", &rows)?;
            }
            let report = envelope(
                "nonconc",
                seed,
                serde_json::json!({
                    "measure": measure.echo(), "theta": theta, "r": r, "k": k,
                    "directions": directions, "offsets": offsets, "eps": eps,
                }),
                serde_json::to_value(&anc).unwrap(),
            );
            emit_json(&json, &report)
        }
        Command::HplaneDecay { measure, family, eps, json } => {
            let m = measure.resolve()?;
            let hyperplanes = nonconc::sample_hyperplane_family(&m, family, seed)?;
            let fit = nonconc::hyperplane_decay_fit(&m, &hyperplanes, &eps)?;
            let report = envelope(
                "hplane-decay",
                seed,
                serde_json::json!({
                    "measure": measure.echo(), "family": family, "eps": eps,
                }),
                serde_json::to_value(&fit).unwrap(),
            );
            emit_json(&json, &report)
        }
        Command::SqrtFriendly { measure, normal, anchor, eps, json } => {
            let m = measure.resolve()?;
            let w = AffineSubspace::hyperplane(anchor.clone(), &normal)?;
            let check = nonconc::sqrt_friendly_check(&m.normalized()?, &w, &eps)?;
            let report = envelope(
                "sqrt-friendly",
                seed,
                serde_json::json!({
                    "measure": measure.echo(), "normal": normal, "anchor": anchor, "eps": eps,
                }),
                serde_json::to_value(&check).unwrap(),
            );
            emit_json(&json, &report)
        }
        Command::Energy { a, b, json } => {
            let sa = FiniteSet::from_support(&fmz::read_file(&a)?);
            let sb = FiniteSet::from_support(&fmz::read_file(&b)?);
            let energy = entropy_diag::additive_energy(&sa, &sb)?;
            let report = envelope(
                "energy",
                seed,
                serde_json::json!({
                    "a": a.display().to_string(), "b": b.display().to_string(),
                }),
                serde_json::json!({
                    "energy": energy, "a_size": sa.len(), "b_size": sb.len(),
                }),
            );
            emit_json(&json, &report)
        }
        Command::Bsg { a, b, alpha, l, eps_prime, json } => {
            let sa = FiniteSet::from_support(&fmz::read_file(&a)?);
            let sb = FiniteSet::from_support(&fmz::read_file(&b)?);
            let (a2, b2, certificate) = entropy_diag::bsg_extract(&sa, &sb, alpha, l, eps_prime)?;
            let report = envelope(
                "bsg",
                seed,
                serde_json::json!({
                    "a": a.display().to_string(), "b": b.display().to_string(),
                    "alpha": alpha, "l": l, "eps_prime": eps_prime,
                }),
                serde_json::json!({
                    "certificate": certificate,
                    "a_prime_size": a2.len(), "b_prime_size": b2.len(),
                }),
            );
            emit_json(&json, &report)
        }
        Command::Hochman { measure, v_basis, eps, m, component_k, component_r, json } => {
            let nu = measure.resolve()?.normalized()?;
            let basis = parse_basis(&v_basis)?;
            let v = AffineSubspace::linear(nu.dim(), basis)?;
            let concentrated = entropy_diag::concentration_check(&nu, &v, eps)?;
            let gap = entropy_diag::saturation_gap(&nu, &v, m)?;
            let saturated = gap >= v.subspace_dim() as f64 - eps;
            let fraction = match component_k {
                Some(k) => Some(entropy_diag::component_prob(&nu, k, component_r, |c| {
                    entropy_diag::concentration_check(c, &v, eps).unwrap_or(false)
                })?),
                None => None,
            };
            let report = envelope(
                "hochman",
                seed,
                serde_json::json!({
                    "measure": measure.echo(), "v_basis": v_basis, "eps": eps, "m": m,
                    "component_k": component_k, "component_r": component_r,
                }),
                serde_json::json!({
                    "concentrated": concentrated,
                    "saturated": saturated,
                    "entropy_gap": gap,
                    "concentrated_component_fraction": fraction,
                }),
            );
            emit_json(&json, &report)
        }
        Command::Schottky { intervals, tol, nodes, json } => {
            let group = build_group(&intervals)?;
            let estimate = fuchsian::schottky_delta_with_nodes(&group, tol, nodes)?;
            let report = envelope(
                "schottky",
                seed,
                serde_json::json!({"intervals": intervals, "tol": tol, "nodes": nodes}),
                serde_json::to_value(&estimate).unwrap(),
            );
            emit_json(&json, &report)
        }
        Command::Shadow { intervals, scale, depth, samples, t_grid, json, csv } => {
            let group = build_group(&intervals)?;
            let delta = fuchsian::schottky_delta(&group, 1e-9)?.delta;
            let mu = fuchsian::ps_measure(&group, delta, scale, depth)?;
            let xi = fuchsian::limit_point_samples(&group, samples, 24, seed);
            let grid = parse_grid(&t_grid)?;
            let experiment = fuchsian::shadow_check(
                &group,
                &mu,
                delta,
                &xi,
                &grid,
                &fuchsian::ShadowParams::default(),
            )?;
            if let Some(path) = &csv {
                let rows: Vec<Vec<f64>> = experiment
                    .grid
                    .iter()
                    .zip(&experiment.values)
                    .map(|(&t, &v)| vec![t, v])
                    .collect();
                emit_csv(path, "t,log_mass_plus_delta_t", &rows)?;
            }
            let report = envelope(
                "shadow",
                seed,
                serde_json::json!({
                    "intervals": intervals, "scale": scale, "depth": depth,
                    "samples": samples, "t_grid": t_grid, "delta_hat": delta,
                }),
                serde_json::to_value(&experiment).unwrap(),
            );
            emit_json(&json, &report)
        }
        Command::Doubling { measure, sigma, r_grid, centers, json, csv } => {
            let m = measure.resolve()?;
            let experiment = zoo::doubling_check(&m, &sigma, &r_grid, centers, seed)?;
            if let Some(path) = &csv {
                let rows: Vec<Vec<f64>> = experiment
                    .grid
                    .iter()
                    .zip(&experiment.values)
                    .map(|(&s, &v)| vec![s, v])
                    .collect();
                emit_csv(path, "sigma,mean_log_ratio", &rows)?;
            }
            let report = envelope(
                "doubling",
                seed,
                serde_json::json!({
                    "measure": measure.echo(), "sigma": sigma,
                    "radii": r_grid, "centers": centers,
                }),
                serde_json::to_value(&experiment).unwrap(),
            );
            emit_json(&json, &report)
        }
        Command::Report { inputs, json, csv } => {
            let mut reports = Vec::new();
            let mut rows = Vec::new();
            for path in &inputs {
                let text = std::fs::read_to_string(path)?;
                let value: serde_json::Value = serde_json::from_str(&text)
                    .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
                if value.get("format").and_then(|f| f.as_str()) != Some("fractlab-report-v1") {
                    return Err(Error::Format(format!(
                        "{} is not a fractlab report",
                        path.display()
                    )));
                }
                rows.push(format!(
                    "{},{}",
                    path.display(),
                    value.get("command").and_then(|c| c.as_str()).unwrap_or("?")
                ));
                reports.push(value);
            }
            if let Some(path) = &csv {
                let mut text = String::from("file,command\n");
                for row in rows {
                    text.push_str(&row);
                    text.push('\n');
                }
                std::fs::write(path, text)?;
            }
            let report = envelope(
                "report",
                seed,
                serde_json::json!({
                    "inputs": inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
                }),
                serde_json::json!({"reports": reports}),
            );
            emit_json(&json, &report)
        }
    }
}

fn build_group(intervals: &str) -> Result<fuchsian::SchottkyGroup> {
    let pairs = source::parse_interval_pairs(intervals)?;
    fuchsian::SchottkyGroup::from_interval_pairs(
        &pairs
            .iter()
            .map(|p| {
                (
                    fuchsian::Interval::new(p[0][0], p[0][1]),
                    fuchsian::Interval::new(p[1][0], p[1][1]),
                )
            })
            .collect::<Vec<_>>(),
    )
}
