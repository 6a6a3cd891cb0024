//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use repeaterscope::channel::{conversion_threshold, elementary_success, select_wavelength, LinkBudget, MediumProfile, MEMORY_NM, TELECOM_NM};
use repeaterscope::coupling::{dnanf_coupling, effective_coupling, CouplingTarget, StepIndexFiber};
use repeaterscope::metrics::{ops_per_secret_bit, repeaters_per_secret_bit};
use repeaterscope::oracle::{mc_skr, MonteCarloConfig};
use repeaterscope::protocol::{evaluate_chain_detailed, ProtocolConfig};
use repeaterscope::states::NoiseParams;
use repeaterscope::sweep::{figure_preset, ratio_csv, ratio_table, run_sweep_with_threads, SweepSpec};
use repeaterscope::{Error, Result};

#[derive(Parser)]
#[command(name = "repeaterscope", version, about = "Multiplexed quantum repeater chain evaluator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for sweeps and Monte-Carlo runs.
    #[arg(long, global = true, env = "THREADS")]
    threads: Option<usize>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Elementary-link success probability and wavelength choice.
    Link(LinkArgs),
    /// Facet coupling efficiency versus tilt.
    Couple(CoupleArgs),
    /// Evaluate one repeater chain.
    Chain(ChainArgs),
    /// Run a parameter sweep from a JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Reproduce a figure's data grid (fig3, fig5, fig6, fig7, fig8, skr_curves).
    Figure {
        name: String,
        /// Override the preset with a JSON config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct MediumArgs {
    /// smf, hcf or hcf1550.
    #[arg(long, default_value = "hcf")]
    medium: String,
    #[arg(long, default_value_t = 1.0)]
    eta_hardware: f64,
    #[arg(long, default_value_t = 1.0)]
    conv_eff: f64,
    /// Inter-repeater spacing, km.
    #[arg(long, default_value_t = 20.0)]
    l0: f64,
}

#[derive(Args)]
struct LinkArgs {
    #[command(flatten)]
    link: MediumArgs,
}

#[derive(Args)]
struct CoupleArgs {
    #[arg(long, default_value_t = 0.05)]
    theta_max: f64,
    #[arg(long, default_value_t = 51)]
    steps: usize,
    /// Bare silica facet instead of an AR-coated one.
    #[arg(long)]
    uncoated: bool,
}

#[derive(Args)]
struct ChainArgs {
    /// ProtocolConfig as JSON; overrides the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    link: MediumArgs,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 1024)]
    m: usize,
    #[arg(long, default_value_t = 1e-3)]
    eps_g: f64,
    /// Memory coherence time, s.
    #[arg(long, default_value_t = 1.0)]
    t2: f64,
    #[arg(long, default_value_t = 0.95)]
    f_th: f64,
    /// Print the per-level schedule.
    #[arg(long)]
    trace: bool,
    /// Add a Monte-Carlo estimate of the key rate.
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => Ok(fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn link_inputs(a: &MediumArgs) -> Result<(MediumProfile, LinkBudget)> {
    Ok((MediumProfile::preset(&a.medium)?, LinkBudget::new(a.eta_hardware, a.conv_eff, a.l0)?))
}

fn cmd_link(cli: &Cli, a: &LinkArgs) -> Result<()> {
    let (medium, budget) = link_inputs(&a.link)?;
    let (wavelength, pi0) = select_wavelength(&medium, &budget)?;
    let branch = |w| {
        if medium.allowed_wavelengths.contains(&w) {
            elementary_success(&medium, &budget, w).ok()
        } else {
            None
        }
    };
    let threshold = conversion_threshold(&medium, budget.l0).ok();
    let value = json!({
        "medium": medium.label(),
        "l0": budget.l0,
        "conv_eff": budget.conv_eff,
        "eta_hardware": budget.eta_hardware,
        "pi0_memory": branch(MEMORY_NM),
        "pi0_telecom": branch(TELECOM_NM),
        "wavelength_used": wavelength,
        "pi0": pi0,
        "conversion_threshold": threshold,
    });
    let text = match cli.format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&value)?),
        Format::Csv => {
            let opt = |x: Option<f64>| x.map_or("nan".to_string(), |v| format!("{v:.16e}"));
            format!(
                "medium,l0,conv_eff,eta_hardware,pi0_memory,pi0_telecom,wavelength_used,pi0,conversion_threshold\n\
                 {},{:.16e},{:.16e},{:.16e},{},{},{},{:.16e},{}\n",
                medium.label(),
                budget.l0,
                budget.conv_eff,
                budget.eta_hardware,
                opt(branch(MEMORY_NM)),
                opt(branch(TELECOM_NM)),
                wavelength,
                pi0,
                opt(threshold)
            )
        }
    };
    emit(cli.out.as_deref(), &text)
}

fn cmd_couple(cli: &Cli, a: &CoupleArgs) -> Result<()> {
    if a.steps < 2 || !(a.theta_max > 0.0) {
        return Err(Error::Config("need at least two steps and a positive theta_max".into()));
    }
    let target = CouplingTarget::StepIndex { fiber: StepIndexFiber::default_smf(!a.uncoated), wavelength_nm: 1550.0 };
    let mut rows = Vec::with_capacity(a.steps);
    for i in 0..a.steps {
        let theta = a.theta_max * i as f64 / (a.steps - 1) as f64;
        let smf = effective_coupling(&target, theta)?;
        let hcf = dnanf_coupling(theta).unwrap_or(f64::NAN);
        rows.push((theta, smf, hcf));
    }
    let text = match cli.format {
        Format::Json => {
            let v: Vec<_> = rows
                .iter()
                .map(|(t, s, h)| json!({"theta_rad": t, "eta_smf_1550": s, "eta_constants_hcf": h.is_finite().then_some(*h)}))
                .collect();
            format!("{}\n", serde_json::to_string_pretty(&v)?)
        }
        Format::Csv => {
            let mut s = String::from("theta_rad,eta_smf_1550,eta_constants_hcf\n");
            for (t, e, h) in rows {
                let h = if h.is_finite() { format!("{h:.16e}") } else { "nan".into() };
                s.push_str(&format!("{t:.16e},{e:.16e},{h}\n"));
            }
            s
        }
    };
    emit(cli.out.as_deref(), &text)
}

fn chain_config(a: &ChainArgs) -> Result<ProtocolConfig> {
    if let Some(path) = &a.config {
        let cfg: ProtocolConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
        cfg.validate()?;
        return Ok(cfg);
    }
    let (medium, budget) = link_inputs(&a.link)?;
    let mut cfg = ProtocolConfig::new(medium, budget, NoiseParams::new(a.eps_g, a.t2)?, a.n, a.m);
    cfg.f_th = a.f_th;
    cfg.validate()?;
    Ok(cfg)
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(k) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?
            .install(f)),
    }
}

fn cmd_chain(cli: &Cli, a: &ChainArgs) -> Result<()> {
    let cfg = chain_config(a)?;
    let (point, trace, _) = evaluate_chain_detailed(&cfg)?;
    let mut value = serde_json::to_value(&point)?;
    value["ops_per_secret_bit"] = json!(finite_or_null(ops_per_secret_bit(&point)));
    value["repeaters_per_secret_bit"] = json!(finite_or_null(repeaters_per_secret_bit(&point)));
    value["total_distance"] = json!(cfg.total_distance());
    if a.oracle {
        let mc = MonteCarloConfig::new(a.trials, a.seed);
        let (skr, res) = in_pool(cli.threads, || mc_skr(&cfg, &mc))??;
        value["oracle"] = json!({
            "trials": a.trials,
            "seed": a.seed,
            "skr_pcu": skr.mean,
            "skr_pcu_std_err": skr.std_err,
            "completion_prob": res.completion_prob.mean,
            "completion_prob_std_err": res.completion_prob.std_err,
            "z_score": skr.z_score(point.skr_pcu),
        });
    }
    let mut text = format!("{}\n", serde_json::to_string_pretty(&value)?);
    if a.trace {
        if cli.format == Format::Json {
            text = format!("{}\n", serde_json::to_string_pretty(&json!({"point": value, "trace": trace}))?);
        } else {
            text.push_str("level,wait_time,fidelity_in,distill,d,fidelity_out,capacity\n");
            for l in &trace.levels {
                text.push_str(&format!(
                    "{},{:.6e},{:.10},{},{:.10},{:.10},{}\n",
                    l.level,
                    l.wait_time,
                    l.pre_state.fidelity(),
                    u8::from(l.distill),
                    l.d,
                    l.fidelity,
                    l.capacity
                ));
            }
        }
    }
    emit(cli.out.as_deref(), &text)
}

fn finite_or_null(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn write_sweep(cli: &Cli, spec: &SweepSpec) -> Result<()> {
    let output = run_sweep_with_threads(spec, cli.threads)?;
    let text = match cli.format {
        Format::Csv => output.to_csv(),
        Format::Json => format!("{}\n", output.to_json()?),
    };
    let out = cli.out.clone().or_else(|| spec.output_path.clone());
    emit(out.as_deref(), &text)?;
    if let (Some(ratio), Some(rows)) = (&spec.ratio, output.rows()) {
        let table = ratio_table(rows, ratio)?;
        let text = match cli.format {
            Format::Csv => ratio_csv(&table),
            Format::Json => format!("{}\n", serde_json::to_string_pretty(&table)?),
        };
        match out {
            Some(path) => {
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
                let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
                fs::write(path.with_file_name(format!("{stem}_ratio.{ext}")), text)?;
            }
            None => print!("\n{text}"),
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Link(a) => cmd_link(cli, a),
        Command::Couple(a) => cmd_couple(cli, a),
        Command::Chain(a) => cmd_chain(cli, a),
        Command::Sweep { config } => {
            let spec = SweepSpec::from_json(&fs::read_to_string(config)?)?;
            write_sweep(cli, &spec)
        }
        Command::Figure { name, config } => {
            let spec = match config {
                Some(path) => SweepSpec::from_json(&fs::read_to_string(path)?)?,
                None => figure_preset(name)?,
            };
            write_sweep(cli, &spec)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() || matches!(e, Error::Io(_)) {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
