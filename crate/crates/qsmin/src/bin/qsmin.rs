//! Command-line front end: parameter validation, exact set construction,
//! dimension reports, quasisymmetry estimation and distortion batteries,
//! mass-distribution certificates, and the end-to-end minimality experiment.
//!
//! Every command reads one JSON config (see `ExperimentConfig`), writes its
//! reports under the output directory, and prints a one-line summary.
//! Exit codes: 0 success, 2 configuration or consistency problems,
//! 3 degenerate mathematics, 4 precision failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num::Zero;
use rand::SeedableRng;
use serde::Serialize;

use qsmin::config::ExperimentConfig;
use qsmin::construction::build_level;
use qsmin::dimension::{
    box_dim_estimate, box_dim_estimate_rat, hausdorff_formula_estimate, image_levelset_f64,
    mlema_checks,
};
use qsmin::error::{Error, Result};
use qsmin::experiment::minimality_experiment;
use qsmin::measure::{
    choose_d, frostman_check, r_products, sample_chains, step2_window_check,
    CertificateConstants, MassDistribution,
};
use qsmin::precision::FloatCtx;
use qsmin::qsmap::{distortion_check, estimate_m, pq_exponents, random_nested_pairs};
use qsmin::rational::{format_rat, rat_to_f64, Rat};
use qsmin::report;

#[derive(Parser)]
#[command(
    name = "qsmin",
    version,
    about = "Cantor-type sets, dimension formulas, and quasisymmetric minimality experiments"
)]
struct Cli {
    /// Path to the JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config's level depth.
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Override the working precision (decimal digits).
    #[arg(long, global = true)]
    precision: Option<u32>,
    /// Override the random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: config `output` or ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the parameter spec level by level.
    Validate,
    /// Build the level set and write its exact intervals.
    Build,
    /// Evaluate the closed-form dimension estimate.
    Dim,
    /// Box-counting regression on the (optionally mapped) level set.
    Boxdim,
    /// Estimate the quasisymmetry constant of the configured map.
    QsEstimate,
    /// Distortion-bound battery on random nested pairs.
    Distortion,
    /// Build the mass distribution and emit its certificate.
    Measure,
    /// Bounded-branching convergence diagnostics.
    Mlema,
    /// Full minimality experiment.
    Minimality,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<(ExperimentConfig, Option<PathBuf>)> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(depth) = cli.depth {
        cfg.depth = depth;
    }
    if let Some(precision) = cli.precision {
        cfg.precision = precision;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok((cfg, path.parent().map(Path::to_path_buf)))
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn run(cli: &Cli) -> Result<()> {
    let (cfg, base) = load_config(cli)?;
    let dir = out_dir(cli, &cfg);
    std::fs::create_dir_all(&dir)?;
    match cli.command {
        Command::Validate => cmd_validate(&cfg, base.as_deref(), &dir),
        Command::Build => cmd_build(&cfg, base.as_deref(), &dir),
        Command::Dim => cmd_dim(&cfg, base.as_deref(), &dir),
        Command::Boxdim => cmd_boxdim(&cfg, base.as_deref(), &dir),
        Command::QsEstimate => cmd_qs_estimate(&cfg, &dir),
        Command::Distortion => cmd_distortion(&cfg, &dir),
        Command::Measure => cmd_measure(&cfg, base.as_deref(), &dir),
        Command::Mlema => cmd_mlema(&cfg, base.as_deref(), &dir),
        Command::Minimality => cmd_minimality(&cfg, base.as_deref(), &dir),
    }
}

#[derive(Serialize)]
struct LevelDiagnostic {
    k: usize,
    branching: u64,
    ratio: String,
    rel_gaps: Vec<String>,
    branching_times_ratio: String,
    uniform: bool,
}

#[derive(Serialize)]
struct ValidateReport {
    depth: usize,
    levels: Vec<LevelDiagnostic>,
    uniform_cantor: bool,
    degenerate_full: bool,
}

fn cmd_validate(cfg: &ExperimentConfig, base: Option<&Path>, dir: &Path) -> Result<()> {
    let params = cfg.load_params(base)?;
    let mut levels = Vec::with_capacity(cfg.depth);
    let mut uniform_all = true;
    let mut degenerate_all = true;
    for k in 1..=cfg.depth {
        let lp = params.level(k)?;
        let n = lp.branching as usize;
        let interior_equal = lp.rel_gaps[1..n].windows(2).all(|w| w[0] == w[1]);
        let uniform = lp.rel_gaps[0].is_zero() && lp.rel_gaps[n].is_zero() && interior_equal;
        let degenerate = lp.rel_gaps.iter().all(|g| g.is_zero());
        uniform_all &= uniform;
        degenerate_all &= degenerate;
        let nc = Rat::from_integer(lp.branching.into()) * &lp.ratio;
        levels.push(LevelDiagnostic {
            k,
            branching: lp.branching,
            ratio: format_rat(&lp.ratio),
            rel_gaps: lp.rel_gaps.iter().map(format_rat).collect(),
            branching_times_ratio: format_rat(&nc),
            uniform,
        });
    }
    let report_data = ValidateReport {
        depth: cfg.depth,
        levels,
        uniform_cantor: uniform_all,
        degenerate_full: degenerate_all,
    };
    report::write_json(&dir.join("report.json"), &report_data)?;
    let label = if degenerate_all {
        "valid, degenerate (level sets fill [0,1])".to_string()
    } else if uniform_all {
        format!(
            "valid, uniform Cantor, n*c = {}",
            report_data.levels[0].branching_times_ratio
        )
    } else {
        "valid".to_string()
    };
    println!("{label}");
    Ok(())
}

#[derive(Serialize)]
struct BuildReport {
    depth: usize,
    count: String,
    delta: String,
    total_length: String,
}

fn cmd_build(cfg: &ExperimentConfig, base: Option<&Path>, dir: &Path) -> Result<()> {
    let params = cfg.load_params(base)?;
    let level = build_level(&params, cfg.depth)?;
    let mut w = csv::Writer::from_path(dir.join("intervals.csv"))?;
    w.write_record(["index", "address", "left", "right"])?;
    for i in 0..level.len() {
        let addr = level
            .address(i)
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(".");
        let iv = &level.intervals[i];
        w.write_record([
            i.to_string(),
            addr,
            format_rat(&iv.left),
            format_rat(&iv.right),
        ])?;
    }
    w.flush()?;
    let report_data = BuildReport {
        depth: cfg.depth,
        count: level.len().to_string(),
        delta: format_rat(level.delta()),
        total_length: format_rat(&level.total_length()),
    };
    report::write_json(&dir.join("report.json"), &report_data)?;
    println!(
        "built level {} with {} intervals of length {}",
        cfg.depth, report_data.count, report_data.delta
    );
    Ok(())
}

fn cmd_dim(cfg: &ExperimentConfig, base: Option<&Path>, dir: &Path) -> Result<()> {
    let params = cfg.load_params(base)?;
    let mut ctx = FloatCtx::new(cfg.precision);
    let rep = hausdorff_formula_estimate(&params, cfg.k_max, cfg.window, &mut ctx)?;
    report::write_json(&dir.join("report.json"), &rep)?;
    report::write_partials_csv(&dir.join("partials.csv"), &rep)?;
    println!(
        "dimension estimate {:.10} (raw {:.10}, window {})",
        rep.estimate, rep.estimate_raw, rep.window
    );
    Ok(())
}

fn cmd_boxdim(cfg: &ExperimentConfig, base: Option<&Path>, dir: &Path) -> Result<()> {
    let params = cfg.load_params(base)?;
    let map = cfg.load_map()?;
    let level = build_level(&params, cfg.depth)?;
    let rep = match (cfg.resolve_scales()?, &map) {
        // Identity on construction scales: stay rational end to end.
        (None, qsmin::QsMap::Identity) => {
            let intervals: Vec<(Rat, Rat)> = level
                .intervals
                .iter()
                .map(|iv| (iv.left.clone(), iv.right.clone()))
                .collect();
            let scales = params.delta_prefix(cfg.depth)?[1..].to_vec();
            box_dim_estimate_rat(&intervals, &scales)?
        }
        (scales, _) => {
            let image = image_levelset_f64(&map, &level, cfg.precision)?;
            let scales = match scales {
                Some(s) => s,
                None => params.delta_prefix(cfg.depth)?[1..]
                    .iter()
                    .map(rat_to_f64)
                    .collect(),
            };
            box_dim_estimate(&image, &scales)?
        }
    };
    report::write_json(&dir.join("report.json"), &rep)?;
    report::write_loglog_csv(&dir.join("loglog.csv"), &rep)?;
    std::fs::write(
        dir.join("plot.svg"),
        report::loglog_svg(&rep, "box-count regression"),
    )?;
    println!(
        "box-dim slope {:.6} (residual {:.6}) over {} scales",
        rep.slope,
        rep.residual,
        rep.scales.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct QsEstimateReport {
    m_hat: f64,
    sweep_depth: u32,
    p: f64,
    q: f64,
}

fn cmd_qs_estimate(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let map = cfg.load_map()?;
    let m_hat = estimate_m(&map, cfg.m_sweep_depth, cfg.precision)?;
    let e = pq_exponents(m_hat)?;
    let rep = QsEstimateReport {
        m_hat,
        sweep_depth: cfg.m_sweep_depth,
        p: e.p,
        q: e.q,
    };
    report::write_json(&dir.join("report.json"), &rep)?;
    println!(
        "estimated constant {m_hat:.6} at sweep depth {} (p {:.6}, q {:.6})",
        cfg.m_sweep_depth, e.p, e.q
    );
    Ok(())
}

#[derive(Serialize)]
struct DistortionSummary {
    m_hat: f64,
    m_used: f64,
    p: f64,
    q: f64,
    pairs: usize,
    all_pass: bool,
}

fn cmd_distortion(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let map = cfg.load_map()?;
    let m_hat = estimate_m(&map, cfg.m_sweep_depth, cfg.precision)?;
    let m_used = m_hat * cfg.m_margin;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let pairs = random_nested_pairs(cfg.samples, &mut rng);
    let rep = distortion_check(&map, m_used, &pairs, cfg.precision)?;
    let mut w = csv::Writer::from_path(dir.join("distortion.csv"))?;
    w.write_record(["size_ratio", "image_ratio", "lower", "upper", "pass"])?;
    for row in &rep.rows {
        w.write_record([
            row.size_ratio.to_string(),
            row.image_ratio.to_string(),
            row.lower.to_string(),
            row.upper.to_string(),
            row.pass.to_string(),
        ])?;
    }
    w.flush()?;
    let summary = DistortionSummary {
        m_hat,
        m_used,
        p: rep.exponents.p,
        q: rep.exponents.q,
        pairs: rep.rows.len(),
        all_pass: rep.all_pass,
    };
    report::write_json(&dir.join("report.json"), &summary)?;
    println!(
        "distortion battery: {} pairs with M = {m_used:.6}, all_pass = {}",
        summary.pairs, summary.all_pass
    );
    if !rep.all_pass {
        return Err(Error::Precision(
            "distortion bounds violated; the constant estimate is too small".into(),
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct CertificateReport {
    d: f64,
    #[serde(rename = "C_empirical")]
    c_empirical: f64,
    windows_tested: usize,
    seed: u64,
    pass: bool,
    r_growth: f64,
    xi_zeta_margin: f64,
}

fn cmd_measure(cfg: &ExperimentConfig, base: Option<&Path>, dir: &Path) -> Result<()> {
    let params = cfg.load_params(base)?;
    let map = cfg.load_map()?;
    let settings = cfg.experiment_settings()?;
    let depth = settings.measure_depth.min(cfg.depth).max(2);
    let m_hat = estimate_m(&map, cfg.m_sweep_depth, cfg.precision)?;
    let e = pq_exponents(m_hat)?;
    let d = choose_d(e.q, cfg.d_fraction)?;
    let measure = MassDistribution::build(&params, &map, depth, d, cfg.precision)?;
    let constants = CertificateConstants::new(&params, depth, m_hat * cfg.m_margin, d)?;

    let min_len = rat_to_f64(&params.delta(depth)?);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let windows: Vec<(f64, f64)> = (0..cfg.samples)
        .map(|_| {
            use rand::Rng;
            let len = rng.gen_range(min_len.ln()..0.25f64.ln()).exp();
            let a = rng.gen_range(0.0..(1.0 - len));
            (a, a + len)
        })
        .collect();
    let frostman = frostman_check(&measure, &windows, cfg.c_cap)?;
    let step2 = step2_window_check(&measure, &params, cfg.samples, cfg.seed)?;

    let chains = sample_chains(measure.branchings(), depth, cfg.chains, cfg.seed);
    let mut w = csv::Writer::from_path(dir.join("r_chains.csv"))?;
    w.write_record(["chain", "level", "r"])?;
    let mut r_growth = f64::INFINITY;
    let mut xi_zeta_margin = f64::INFINITY;
    for (ci, chain) in chains.iter().enumerate() {
        let rep = r_products(&measure, chain, &params, &constants)?;
        for (li, r) in rep.r.iter().enumerate() {
            w.write_record([ci.to_string(), li.to_string(), r.to_string()])?;
        }
        r_growth = r_growth.min(rep.growth);
        xi_zeta_margin = xi_zeta_margin.min(rep.bound_margin);
    }
    w.flush()?;

    let cert = CertificateReport {
        d,
        c_empirical: frostman.c_empirical,
        windows_tested: frostman.windows_tested,
        seed: cfg.seed,
        pass: frostman.pass && step2.within_bound && xi_zeta_margin >= 1.0,
        r_growth,
        xi_zeta_margin,
    };
    report::write_json(&dir.join("report.json"), &cert)?;
    println!(
        "certificate at d = {d:.6}: C = {:.6}, pass = {}",
        cert.c_empirical, cert.pass
    );
    Ok(())
}

fn cmd_mlema(cfg: &ExperimentConfig, base: Option<&Path>, dir: &Path) -> Result<()> {
    let params = cfg.load_params(base)?;
    let rep = mlema_checks(&params, cfg.k_max, cfg.mlema_p, cfg.mlema_eps)?;
    report::write_json(&dir.join("report.json"), &rep)?;
    report::write_mlema_csv(&dir.join("mlema.csv"), &rep)?;
    let last = cfg.k_max - 1;
    println!(
        "diagnostics at k = {}: length root {:.6}, gap mean {:.6}, large-gap density {:.6}",
        cfg.k_max, rep.total_length_root[last], rep.gap_power_mean[last],
        rep.large_gap_density[last]
    );
    Ok(())
}

fn cmd_minimality(cfg: &ExperimentConfig, base: Option<&Path>, dir: &Path) -> Result<()> {
    let params = cfg.load_params(base)?;
    let map = cfg.load_map()?;
    let settings = cfg.experiment_settings()?;
    let summary = minimality_experiment(&params, &map, &settings)?;
    report::write_json(&dir.join("report.json"), &summary)?;
    report::write_loglog_csv(&dir.join("loglog.csv"), &summary.image_box)?;
    std::fs::write(
        dir.join("plot.svg"),
        report::loglog_svg(&summary.image_box, "image box-count regression"),
    )?;
    println!(
        "dim estimate {:.6} (hypothesis met: {}), image box slope {:.6}, certified d {}",
        summary.dim_estimate,
        summary.hypothesis_met,
        summary.image_box.slope,
        summary
            .certified_d
            .map(|d| format!("{d:.6}"))
            .unwrap_or_else(|| "none".into())
    );
    Ok(())
}
