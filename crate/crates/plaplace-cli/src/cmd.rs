//! The five subcommands. Each builds its payloads, writes them into
//! the output directory, and finishes with the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use plaplace::constants::{faber_krahn_constant, log_p_grid, ratio_curve};
use plaplace::eigen::{
    eigen_solve, faber_krahn_scan, verify_bounds, verify_hopf, verify_simplicity,
    verify_symmetry, SolverConfig,
};
use plaplace::grid::{write_field_csv, DomainConfig, GridDomain, Shape};
use plaplace::radial::{ball_eigenvalue_bessel, ball_eigenvalue_shooting, ProblemParams};
use plaplace::special::first_zero;

use crate::out::{csv_quote, sig15, OutDir};
use crate::{input_err, CliError, Global};

/// Two inner-route values may disagree by discretization of the ODE
/// route only; a wider gap means one route is wrong.
const ROUTE_GAP_TOL: f64 = 1e-6;

fn solver_config(global: &Global) -> SolverConfig {
    SolverConfig { seed: global.seed, ..SolverConfig::default() }
}

fn say(global: &Global, line: impl AsRef<str>) {
    if !global.quiet {
        println!("{}", line.as_ref());
    }
}

fn load_domain_config(path: &PathBuf) -> Result<DomainConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    DomainConfig::from_json(&text)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

#[derive(Args)]
pub struct BallArgs {
    /// Dimension of the ball.
    #[arg(long)]
    n: u32,
    /// Exponent of the operator; must exceed 1.
    #[arg(long)]
    p: f64,
    /// Radius of the ball.
    #[arg(long, default_value_t = 1.0)]
    r: f64,
}

#[derive(Serialize)]
struct BallReport {
    n: u32,
    p: f64,
    radius: f64,
    lambda_bessel: f64,
    lambda_shooting: f64,
    relative_gap: f64,
    bessel_zero: f64,
}

pub fn ball(global: &Global, args: &BallArgs) -> Result<(), CliError> {
    let params = ProblemParams::new(args.n, args.p).map_err(input_err)?;
    let bessel = ball_eigenvalue_bessel(params, args.r).map_err(input_err)?;
    let mu = first_zero(params.bessel_order()).map_err(input_err)?;
    let shooting = ball_eigenvalue_shooting(params, args.r).map_err(input_err)?;
    let gap = (shooting.lambda - bessel).abs() / bessel;

    let mut out = OutDir::new(&global.out_dir, "ball")?;
    out.record_param("n", args.n);
    out.record_param("p", args.p);
    out.record_param("r", args.r);
    let report = BallReport {
        n: args.n,
        p: args.p,
        radius: args.r,
        lambda_bessel: bessel,
        lambda_shooting: shooting.lambda,
        relative_gap: gap,
        bessel_zero: mu,
    };
    out.write_json("ball.json", &report)?;
    out.finish()?;

    say(global, format!("lambda (Bessel route)   = {bessel:.12}"));
    say(global, format!("lambda (shooting route) = {:.12}", shooting.lambda));
    say(global, format!("relative gap            = {gap:.3e}"));
    if gap > ROUTE_GAP_TOL {
        return Err(CliError::failure(format!(
            "routes disagree: relative gap {gap:.3e} exceeds {ROUTE_GAP_TOL:.0e}"
        )));
    }
    Ok(())
}

#[derive(Args)]
pub struct ConstantsArgs {
    /// Dimension for the constants.
    #[arg(long)]
    n: u32,
    /// Lower end of the p grid.
    #[arg(long, default_value_t = 1.05)]
    p_min: f64,
    /// Upper end of the p grid.
    #[arg(long, default_value_t = 20.0)]
    p_max: f64,
    /// Number of log-spaced grid points.
    #[arg(long, default_value_t = 200)]
    points: usize,
}

pub fn constants(global: &Global, args: &ConstantsArgs) -> Result<(), CliError> {
    let grid = log_p_grid(args.p_min, args.p_max, args.points).map_err(input_err)?;
    let rows = ratio_curve(args.n, &grid).map_err(input_err)?;

    let mut csv = String::from("n,p,K,K_star,ratio\n");
    for row in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            row.n,
            sig15(row.p),
            sig15(row.k),
            sig15(row.k_star),
            sig15(row.ratio)
        );
    }
    let curve: Vec<(f64, f64)> = rows.iter().map(|r| (r.p, r.ratio)).collect();
    let plot = crate::svg::ratio_plot(args.n, &curve);

    let mut out = OutDir::new(&global.out_dir, "constants")?;
    out.record_param("n", args.n);
    out.record_param("p_min", args.p_min);
    out.record_param("p_max", args.p_max);
    out.record_param("points", args.points);
    out.write("constants.csv", &csv)?;
    out.write("ratio.svg", &plot)?;
    out.finish()?;

    let min_row = rows
        .iter()
        .min_by(|a, b| a.ratio.total_cmp(&b.ratio))
        .expect("grid is nonempty");
    say(
        global,
        format!("{} rows; minimum ratio {:.6} at p = {:.5}", rows.len(), min_row.ratio, min_row.p),
    );
    if let Some(bad) = rows.iter().find(|r| r.ratio < 1.0) {
        return Err(CliError::failure(format!(
            "ratio {} at p = {} dips below 1; the ball bound must dominate the generic one",
            bad.ratio, bad.p
        )));
    }
    Ok(())
}

#[derive(Args)]
pub struct SolveArgs {
    /// Path to a JSON domain config: {"shape": ..., "h": ...}.
    #[arg(long)]
    config: PathBuf,
    /// Exponent of the operator; must exceed 1.
    #[arg(long)]
    p: f64,
    /// Override the grid spacing from the config file.
    #[arg(long)]
    h: Option<f64>,
    /// Check the measure lower bound and the radius sandwich.
    #[arg(long)]
    verify_bounds: bool,
    /// Re-solve from this many noisy starts and compare ground states.
    #[arg(long, value_name = "STARTS")]
    simplicity: Option<usize>,
    /// Measure reflection defects of the eigenfunction.
    #[arg(long)]
    symmetry: bool,
    /// Probe the inward boundary difference quotient.
    #[arg(long)]
    hopf: bool,
}

/// Slack for the report's bound checks, matching the discretization
/// error of the default grids; misses are flagged, never fatal.
const BOUNDS_SLACK: f64 = 0.05;

#[derive(Serialize)]
struct SolveReport {
    config: DomainConfig,
    p: f64,
    lambda: f64,
    cw_low: f64,
    cw_high: f64,
    iterations: usize,
    residual: f64,
    measure: f64,
    inradius: f64,
    outradius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    bounds: Option<plaplace::eigen::BoundsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    simplicity: Option<plaplace::eigen::SimplicityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    symmetry: Option<plaplace::eigen::SymmetryReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hopf: Option<plaplace::eigen::HopfReport>,
}

pub fn solve(global: &Global, args: &SolveArgs) -> Result<(), CliError> {
    let mut config = load_domain_config(&args.config)?;
    if let Some(h) = args.h {
        config = DomainConfig::new(config.shape, h).map_err(input_err)?;
    }
    let domain = GridDomain::build(&config).map_err(input_err)?;
    let solver = solver_config(global);
    // Non-convergence is the one fatal outcome; threshold misses in the
    // verification sections are data, recorded in the report.
    let pair = eigen_solve(&domain, args.p, &solver).map_err(|e| match e {
        plaplace::Error::NoConvergence { .. } => CliError::failure(e.to_string()),
        other => input_err(other),
    })?;
    say(
        global,
        format!(
            "lambda = {:.9} in [{:.9}, {:.9}], {} outer iterations, residual {:.3e}",
            pair.lambda, pair.cw_low, pair.cw_high, pair.iterations, pair.residual
        ),
    );

    let bounds = if args.verify_bounds {
        Some(verify_bounds(&domain, &pair, args.p, BOUNDS_SLACK).map_err(input_err)?)
    } else {
        None
    };
    let simplicity = match args.simplicity {
        Some(starts) => {
            Some(verify_simplicity(&domain, args.p, &solver, starts).map_err(input_err)?)
        }
        None => None,
    };
    let symmetry = args.symmetry.then(|| verify_symmetry(&domain, &pair));
    let hopf = if args.hopf {
        Some(verify_hopf(&domain, &pair).map_err(input_err)?)
    } else {
        None
    };

    let mut out = OutDir::new(&global.out_dir, "solve")?;
    out.record_param("config", &config);
    out.record_param("p", args.p);
    out.record_param("seed", global.seed);
    let field_path = out.path("field.csv");
    write_field_csv(&domain, &pair.u, &field_path)
        .map_err(|e| CliError::failure(e.to_string()))?;
    out.record_output(&field_path);
    let report = SolveReport {
        config,
        p: args.p,
        lambda: pair.lambda,
        cw_low: pair.cw_low,
        cw_high: pair.cw_high,
        iterations: pair.iterations,
        residual: pair.residual,
        measure: domain.measure,
        inradius: domain.inradius,
        outradius: domain.outradius,
        bounds,
        simplicity,
        symmetry,
        hopf,
    };
    out.write_json("report.json", &report)?;
    out.finish()
}

#[derive(Args)]
pub struct AbpArgs {
    /// Path to a JSON domain config: {"shape": ..., "h": ...}.
    #[arg(long)]
    config: PathBuf,
    /// Exponent of the operator; must exceed 1.
    #[arg(long)]
    p: f64,
    /// Sup-convolution parameter.
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    /// Contact-neighborhood width; defaults to twice the grid spacing.
    #[arg(long)]
    sigma: Option<f64>,
}

pub fn abp(global: &Global, args: &AbpArgs) -> Result<(), CliError> {
    let config = load_domain_config(&args.config)?;
    let domain = GridDomain::build(&config).map_err(input_err)?;
    let solver = solver_config(global);
    let pair = eigen_solve(&domain, args.p, &solver).map_err(|e| match e {
        plaplace::Error::NoConvergence { .. } => CliError::failure(e.to_string()),
        other => input_err(other),
    })?;
    let sigma = args.sigma.unwrap_or(2.0 * domain.h);
    let report = plaplace::abp::verify_abp_chain(&domain, &pair, args.p, args.eps, sigma)
        .map_err(input_err)?;
    say(
        global,
        format!(
            "lambda = {:.9}; contact nodes {}; f1/f2/f3 pass rates {:.3}/{:.3}/{:.3}; terminal {}",
            pair.lambda,
            report.contact_nodes,
            report.pointwise_pass_rates.f1,
            report.pointwise_pass_rates.f2,
            report.pointwise_pass_rates.f3,
            if report.terminal_ok { "ok" } else { "MISS" }
        ),
    );

    let mut out = OutDir::new(&global.out_dir, "abp")?;
    out.record_param("config", &config);
    out.record_param("p", args.p);
    out.record_param("eps", args.eps);
    out.record_param("sigma", sigma);
    out.record_param("seed", global.seed);
    out.write_json("abp.json", &report)?;
    out.finish()
}

#[derive(Args)]
pub struct FaberKrahnArgs {
    /// Path to a JSON list of domain configs; omit for the default
    /// disk / square / ellipse / stadium lineup.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Exponent of the operator; must exceed 1.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Grid spacing for the default lineup.
    #[arg(long, default_value_t = 0.02)]
    h: f64,
}

fn default_lineup(h: f64) -> Result<Vec<DomainConfig>, CliError> {
    [
        Shape::Disk { radius: 1.0 },
        Shape::Rectangle { width: 1.0, height: 1.0 },
        Shape::Ellipse { semi_x: 1.0, semi_y: 0.5 },
        Shape::Stadium { straight: 1.0, radius: 0.5 },
    ]
    .into_iter()
    .map(|shape| DomainConfig::new(shape, h).map_err(input_err))
    .collect()
}

pub fn faber_krahn(global: &Global, args: &FaberKrahnArgs) -> Result<(), CliError> {
    let configs = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
            let configs: Vec<DomainConfig> = serde_json::from_str(&text)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            for config in &configs {
                config.validate().map_err(input_err)?;
            }
            configs
        }
        None => default_lineup(args.h)?,
    };
    let cases: Vec<(DomainConfig, f64)> =
        configs.into_iter().map(|config| (config, args.p)).collect();
    let outcome = faber_krahn_scan(&cases, &solver_config(global)).map_err(|e| match e {
        plaplace::Error::NoConvergence { .. } => CliError::failure(e.to_string()),
        other => input_err(other),
    })?;
    for warning in &outcome.warnings {
        eprintln!("warning: {warning}");
    }

    let mut csv = String::from("shape,p,lambda,measure,product\n");
    for row in &outcome.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            csv_quote(&row.label),
            sig15(row.p),
            sig15(row.lambda),
            sig15(row.measure),
            sig15(row.product)
        );
        say(
            global,
            format!("{:<60} lambda*measure = {:.6}", row.label, row.product),
        );
    }

    let mut out = OutDir::new(&global.out_dir, "faber-krahn")?;
    out.record_param("p", args.p);
    out.record_param("cases", cases.len());
    out.record_param("warnings", &outcome.warnings);
    out.record_param("seed", global.seed);
    out.write("faber_krahn.csv", &csv)?;
    out.finish()
}
