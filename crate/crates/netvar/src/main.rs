use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use netvar::experiment::{fit_setup, plan_setups};
use netvar::export::{fit_report, immersion_csv, response_csv, signal_csv};
use netvar::{export_plotdata, run_analytic, run_montecarlo, CaseStudy, ExperimentConfig, Overrides, PlotData};
use netvar_core::immersion::ImmerseOptions;
use netvar_core::{check_consistency_conditions, immerse, simulate, FitOptions, FrequencyGrid, SimulationOptions};

#[derive(Parser)]
#[command(name = "netvar", version, about = "Local module identification experiments in dynamic networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Network description, optionally with an [experiment] stanza (manifests work too).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of frequency grid points.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args)]
struct Campaign {
    #[arg(long)]
    runs: Option<usize>,
    /// Worker threads for Monte-Carlo runs.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one record and write signals.csv.
    Simulate(Common),
    /// Immerse the network onto each reduced predictor set.
    Immerse(Common),
    /// Simulate once and fit every setup.
    Identify(Common),
    /// Asymptotic covariance and condition curves, no fitting.
    Variance(Common),
    /// Seeded Monte-Carlo campaign over the sweep.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        campaign: Campaign,
    },
    /// Built-in four-node case study.
    CaseStudy {
        /// one_param_g43 or two_param_g43.
        #[arg(long, default_value = "one_param_g43")]
        variant: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        grid: Option<usize>,
        #[command(flatten)]
        campaign: Campaign,
        /// Print the built-in config and exit.
        #[arg(long)]
        print_config: bool,
    },
}

fn load(common: &Common, campaign: Option<&Campaign>) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(&common.config).with_context(|| format!("reading {}", common.config.display()))?;
    let mut cfg = ExperimentConfig::parse(&text).with_context(|| format!("parsing {}", common.config.display()))?;
    overrides(common.seed, common.grid, campaign).apply(&mut cfg);
    cfg.check()?;
    Ok(cfg)
}

fn overrides(seed: Option<u64>, grid: Option<usize>, campaign: Option<&Campaign>) -> Overrides {
    Overrides {
        seed,
        grid,
        runs: campaign.and_then(|c| c.runs),
        workers: campaign.and_then(|c| c.workers),
        n_samples: None,
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn validated(cfg: &ExperimentConfig) -> Result<netvar_core::NetworkModel> {
    let model = cfg.network.clone();
    let report = model.validate_on(&FrequencyGrid::uniform(cfg.grid));
    if !report.is_valid() {
        bail!("network invalid: {}", report.issues.join("; "));
    }
    Ok(model)
}

fn simulate_cmd(common: &Common) -> Result<()> {
    let cfg = load(common, None)?;
    let model = validated(&cfg)?;
    let opts = SimulationOptions { sample_time: cfg.sample_time, burn_in: cfg.burn_in };
    let rec = simulate(&model, cfg.n_samples, cfg.seed, opts)?;
    write(&common.out, "signals.csv", &signal_csv(&rec))
}

fn immerse_cmd(common: &Common) -> Result<()> {
    let cfg = load(common, None)?;
    let model = validated(&cfg)?;
    let grid = FrequencyGrid::uniform(cfg.grid);
    let mut any = false;
    for plan in plan_setups(&cfg, &model)? {
        let ps = &plan.predictor_set;
        if ps.eliminated(&model).is_empty() {
            continue;
        }
        any = true;
        println!("setup {}: {ps}", plan.name);
        println!("  {}", check_consistency_conditions(&model, ps)?);
        let imm = immerse(&model, ps, &grid, ImmerseOptions { allow_inconsistent: true })?;
        println!("  eliminated: {:?}", imm.eliminated);
        for (k, l) in &imm.lumped {
            match &l.exact {
                Some(tf) => println!("  lumped G_{}{k}: {tf}", ps.output()),
                None => println!("  lumped G_{}{k}: frequency response only", ps.output()),
            }
        }
        for w in &imm.warnings {
            println!("  warning: {w}");
        }
        write(&common.out, &format!("immersion_{}.csv", plan.name), &immersion_csv(&imm))?;
    }
    if !any {
        bail!("no setup eliminates any node");
    }
    Ok(())
}

fn identify_cmd(common: &Common) -> Result<()> {
    let cfg = load(common, None)?;
    let model = validated(&cfg)?;
    let grid = FrequencyGrid::uniform(cfg.grid);
    let opts = SimulationOptions { sample_time: cfg.sample_time, burn_in: cfg.burn_in };
    let rec = simulate(&model, cfg.n_samples, cfg.seed, opts)?;
    let fit_opts = FitOptions { restarts: cfg.restarts, seed: cfg.seed, ..FitOptions::default() };
    for plan in plan_setups(&cfg, &model)? {
        let f = fit_setup(&plan, &rec, &grid, &fit_opts).with_context(|| format!("fitting setup {}", plan.name))?;
        println!(
            "setup {}: sigma2 = {:.6e}, iterations = {}, converged = {}, Ljung-Box Q = {:.2}",
            plan.name, f.fit.sigma2, f.fit.iterations, f.fit.converged, f.whiteness
        );
        write(&common.out, &format!("fit_{}.txt", plan.name), &fit_report(&plan.name, &plan.inputs, &f.fit))?;
        write(&common.out, &format!("response_{}.csv", plan.name), &response_csv(&grid, &f.response, &f.delta))?;
    }
    Ok(())
}

fn variance_cmd(common: &Common) -> Result<()> {
    let cfg = load(common, None)?;
    let bundle = run_analytic(&cfg)?;
    let med = bundle.grid.median_index();
    for p in &bundle.points {
        for s in &p.setups {
            println!("{} {}: asymptotic cov at omega={:.4} is {:.6e}", p.label(), s.name, bundle.grid.points()[med], s.asymptotic.values[med]);
        }
    }
    // a single-setup config has no condition curve
    let mut paths = export_plotdata(&bundle, PlotData::Asymptotic, &common.out)?;
    if bundle.points.iter().all(|p| p.condition.is_some()) {
        paths.extend(export_plotdata(&bundle, PlotData::Condition, &common.out)?);
    }
    paths.extend(export_plotdata(&bundle, PlotData::Manifest, &common.out)?);
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn report(bundle: &netvar::ResultBundle, out: &Path) -> Result<()> {
    for p in &bundle.points {
        let mut line = format!("{}: {} runs included, {} excluded", p.label(), p.included.len(), p.excluded.len());
        if let Some(a) = &p.aborted {
            line.push_str(&format!(" (aborted: {a})"));
        }
        println!("{line}");
    }
    let which = if bundle.points.iter().any(|p| p.aborted.is_some()) || bundle.config.runs < 2 {
        eprintln!("sample covariance unavailable at some points; writing analytic curves and manifest only");
        vec![PlotData::Condition, PlotData::Asymptotic, PlotData::Summary, PlotData::Manifest, PlotData::Script]
    } else {
        vec![PlotData::All]
    };
    for w in which {
        for p in export_plotdata(bundle, w, out)? {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate(c) => simulate_cmd(c),
        Command::Immerse(c) => immerse_cmd(c),
        Command::Identify(c) => identify_cmd(c),
        Command::Variance(c) => variance_cmd(c),
        Command::Montecarlo { common, campaign } => {
            let cfg = load(common, Some(campaign))?;
            let bundle = run_montecarlo(&cfg)?;
            report(&bundle, &common.out)
        }
        Command::CaseStudy { variant, out, seed, grid, campaign, print_config } => {
            let variant: CaseStudy = variant.parse()?;
            if *print_config {
                print!("{}", variant.config_text());
                return Ok(());
            }
            let mut cfg = variant.config()?;
            overrides(*seed, *grid, Some(campaign)).apply(&mut cfg);
            cfg.check()?;
            let bundle = run_montecarlo(&cfg)?;
            report(&bundle, out)
        }
    }
}
