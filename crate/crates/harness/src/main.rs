use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use prompt_harness::config::{ExperimentConfig, ExperimentKind, ProxyMode};
use prompt_harness::error::{HarnessError, Result};
use prompt_harness::experiment::{
    advantages_by_group, check_failures, run_simulations, thread_pool,
};
use prompt_harness::output::{
    emit_csv, emit_summary_csv, failures_by_group, read_results_csv, write_metadata, write_text,
};
use prompt_harness::plot::{emit_boxplot_svg, render_boxplot_svg};
use prompt_harness::smoking::{
    emit_smoking_csv, load_smoking, log_ratios_by_mode, run_smoking_comparison, study_count_warning,
};

#[derive(Parser)]
#[command(
    name = "prompt",
    version,
    about = "Relevance-weighted transfer learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores); overrides the config.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulation sweep described by a TOML config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Grid points per axis; overrides the config.
        #[arg(long)]
        grid: Option<usize>,
        /// Simulations per sweep cell; overrides the config.
        #[arg(long)]
        simulations: Option<usize>,
    },
    /// Exact checks of the misspecification decomposition and information
    /// bound on random discrete models.
    Verify {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Leave-one-study-out comparison on smoking-cessation data.
    Smoking {
        /// `study,treatment,events,total` CSV; the bundled data when omitted.
        data: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModeArg::All)]
        proxy_mode: ModeArg,
        /// Retained Metropolis samples per chain.
        #[arg(long, default_value_t = 4000)]
        samples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Box plot of the advantage column of a results CSV, one box per group.
    Plot { results: PathBuf, svg: PathBuf },
    /// Print the default config for an experiment.
    Config {
        #[arg(value_enum)]
        experiment: KindArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Weak,
    Strong,
    Misleading,
    All,
}

impl ModeArg {
    fn modes(self) -> Vec<ProxyMode> {
        match self {
            ModeArg::Weak => vec![ProxyMode::Weak],
            ModeArg::Strong => vec![ProxyMode::Strong],
            ModeArg::Misleading => vec![ProxyMode::Misleading],
            ModeArg::All => ProxyMode::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Linear,
    Gp,
    Smoking,
    ToyVerify,
}

impl From<KindArg> for ExperimentKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Linear => ExperimentKind::Linear,
            KindArg::Gp => ExperimentKind::Gp,
            KindArg::Smoking => ExperimentKind::Smoking,
            KindArg::ToyVerify => ExperimentKind::ToyVerify,
        }
    }
}

fn apply(config: &mut ExperimentConfig, common: &Common) {
    if let Some(s) = common.seed {
        config.master_seed = s;
    }
    if let Some(o) = &common.out {
        config.output_dir = o.clone();
    }
    if let Some(j) = common.jobs {
        config.parallelism = j;
    }
}

fn sweep(config: &ExperimentConfig) -> Result<()> {
    config.validate()?;
    if config.experiment == ExperimentKind::Smoking {
        let modes = config.smoking.proxy_modes.clone();
        return smoking(
            config,
            config.smoking.data.as_deref(),
            &modes,
            config.smoking.n_samples,
        );
    }
    let results = run_simulations(config)?;
    let dir = &config.output_dir;
    emit_csv(&results, &dir.join("results.csv"))?;
    let groups = advantages_by_group(&results);
    emit_summary_csv(
        &groups,
        &failures_by_group(&results),
        &dir.join("summary.csv"),
    )?;
    write_metadata(config, &results, &dir.join("run_metadata.txt"))?;
    if !groups.is_empty() {
        emit_boxplot_svg(&groups, &dir.join("advantage.svg"))?;
    }
    print_groups(&groups);
    if config.experiment == ExperimentKind::ToyVerify {
        print_verification(&results);
    }
    check_failures(&results)?;
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn print_groups(groups: &[(String, Vec<f64>)]) {
    for (label, values) in groups {
        let mut v = values.clone();
        v.sort_by(f64::total_cmp);
        let med = prompt_harness::plot::quantile_sorted(&v, 0.5);
        println!("{label}: n={} median={med:.4}", v.len());
    }
}

fn print_verification(results: &[prompt_harness::SimulationResult]) {
    let reports: Vec<_> = results
        .iter()
        .filter_map(|r| r.diagnostics.as_ref())
        .collect();
    let max = |f: &dyn Fn(&prompt_core::diagnostics::DiagnosticsReport) -> f64| {
        reports.iter().map(|d| f(d).abs()).fold(0.0, f64::max)
    };
    let violations = reports
        .iter()
        .filter(|d| !d.bound_classic.satisfied)
        .count();
    println!("instances: {}", reports.len());
    println!(
        "decomposition residual, max |.|: {:.3e}",
        max(&|d| d.decomposition_residual)
    );
    println!(
        "decomposition residual without the 1/n factor, max |.|: {:.3e}",
        max(&|d| d.decomposition_residual_as_stated)
    );
    println!("information bound violations: {violations}");
}

fn smoking(
    config: &ExperimentConfig,
    data: Option<&Path>,
    modes: &[ProxyMode],
    samples: usize,
) -> Result<()> {
    let records = load_smoking(data)?;
    if let Some(w) = study_count_warning(&records) {
        eprintln!("warning: {w}");
    }
    let pool = thread_pool(config.parallelism)?;
    let results =
        pool.install(|| run_smoking_comparison(&records, modes, samples, config.master_seed))?;
    let dir = &config.output_dir;
    emit_smoking_csv(&results, &dir.join("smoking_results.csv"))?;
    let groups = log_ratios_by_mode(&results, modes);
    emit_summary_csv(&groups, &[], &dir.join("smoking_summary.csv"))?;
    let svg = render_boxplot_svg(
        &groups,
        "Held-out study: r-weighted vs classic",
        "log predictive ratio",
    );
    write_text(&dir.join("smoking.svg"), &svg)?;
    let mut meta = format!(
        "prompt-harness {}\nexperiment: smoking\nmaster_seed: {}\nsamples per chain: {samples}\nstudies: {}\narms: {}\n",
        env!("CARGO_PKG_VERSION"),
        config.master_seed,
        prompt_harness::smoking::studies(&records).len(),
        records.len()
    );
    let warned = results.iter().filter(|r| !r.warnings.is_empty()).count();
    meta.push_str(&format!("partitions with sampler warnings: {warned}\n"));
    write_text(&dir.join("run_metadata.txt"), &meta)?;
    print_groups(&groups);
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn plot(results: &Path, svg: &Path) -> Result<()> {
    let rows = read_results_csv(results)?;
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for r in &rows {
        let Some(a) = r.advantage else { continue };
        match groups.iter_mut().find(|(g, _)| *g == r.group) {
            Some((_, v)) => v.push(a),
            None => groups.push((r.group.clone(), vec![a])),
        }
    }
    if groups.is_empty() {
        return Err(HarnessError::EmptyInput(results.to_path_buf()));
    }
    emit_boxplot_svg(&groups, svg)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            common,
            grid,
            simulations,
        } => {
            let mut c = ExperimentConfig::load(&config)?;
            apply(&mut c, &common);
            if let Some(g) = grid {
                c.grid_resolution = g;
            }
            if let Some(n) = simulations {
                c.n_simulations = n;
            }
            sweep(&c)
        }
        Command::Verify { instances, common } => {
            let mut c = ExperimentConfig::new(ExperimentKind::ToyVerify);
            c.n_simulations = instances;
            c.output_dir = PathBuf::from("out/verify");
            apply(&mut c, &common);
            sweep(&c)
        }
        Command::Smoking {
            data,
            proxy_mode,
            samples,
            common,
        } => {
            let mut c = ExperimentConfig::new(ExperimentKind::Smoking);
            c.output_dir = PathBuf::from("out/smoking");
            apply(&mut c, &common);
            smoking(&c, data.as_deref(), &proxy_mode.modes(), samples)
        }
        Command::Plot { results, svg } => plot(&results, &svg),
        Command::Config { experiment } => {
            print!("{}", ExperimentConfig::new(experiment.into()).to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
