use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};

use paco::analysis::{
    angle_sweep, export_w_csv, pca, pca_components_csv, pca_csv, subspace_csv, subspace_sample,
};
use paco::checkpoint::Checkpoint;
use paco::compose::CompositionScope;
use paco::envs::{SkillConfig, SuiteConfig, TaskSpec};
use paco::trainer::{evaluate, transfer, RunConfig, TrainConfig, Trainer, Variant};

#[derive(Parser, Debug)]
#[command(name = "paco", version, about = "Parameter-compositional multi-task SAC")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Run configuration (TOML with [suite], [agent] and [trainer] sections).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Checkpoint file to read.
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    variant: Option<Variant>,
    #[arg(long, global = true)]
    scope: Option<CompositionScope>,
    /// Parameter-set size.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Keep each compositional vector on the unit sphere.
    #[arg(long, global = true)]
    normalize_w: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train an agent on the configured suite.
    Train,
    /// Evaluate a checkpoint on its task specs.
    Eval {
        #[arg(long, default_value_t = 10)]
        episodes: usize,
    },
    /// Project the compositional vectors onto their top-2 principal components.
    Pca,
    /// Roll out policies composed at points on the unit circle (K = 2).
    SubspaceSample {
        /// Comma-separated angles in radians.
        #[arg(long, value_delimiter = ',', conflicts_with = "num_angles")]
        angles: Vec<f64>,
        /// Evenly spaced angles on [0, 2π).
        #[arg(long, default_value_t = 36)]
        num_angles: usize,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
    },
    /// Learn a new compositional vector with the parameter set frozen.
    Transfer {
        /// TOML file describing the new skill.
        #[arg(long, conflicts_with = "like_task")]
        task_config: Option<PathBuf>,
        /// Copy the spec of an existing task.
        #[arg(long)]
        like_task: Option<usize>,
        /// Environment steps for the new task.
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Write the compositional matrix as CSV.
    ExportW,
}

fn load_run(g: &Global) -> anyhow::Result<RunConfig> {
    let mut run = match &g.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = g.variant {
        run.trainer.variant = v;
    }
    if let Some(s) = g.scope {
        run.agent.scope = s;
    }
    if let Some(k) = g.k {
        run.agent.k = k;
    }
    if g.normalize_w {
        run.agent.normalize_w = true;
    }
    if let Some(seed) = g.seed {
        run.trainer.seed = seed;
    }
    run.validate()?;
    Ok(run)
}

fn load_checkpoint(g: &Global) -> anyhow::Result<Checkpoint> {
    let path = g
        .checkpoint
        .as_ref()
        .ok_or_else(|| paco::Error::Config("--checkpoint is required for this command".into()))?;
    Ok(Checkpoint::load(path)?)
}

fn out_dir(g: &Global, default: &str) -> anyhow::Result<PathBuf> {
    let dir = g.out_dir.clone().unwrap_or_else(|| PathBuf::from(default));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn task_names(specs: &[TaskSpec]) -> Vec<String> {
    specs.iter().map(|s| s.name.clone()).collect()
}

fn cmd_train(g: &Global) -> anyhow::Result<()> {
    let run = load_run(g)?;
    let dir = out_dir(g, "runs/latest")?;
    std::fs::write(dir.join("config.toml"), run.to_toml_string()?)?;
    let mut trainer = Trainer::new(&run)?;
    trainer.write_to(&dir)?;
    trainer.run()?;
    let record = trainer.record();
    let eval = record.final_eval().ok_or_else(|| anyhow!("training produced no evaluation"))?;
    for (name, s) in record.task_names.iter().zip(&eval.per_task) {
        println!("{name}: {s:.3}");
    }
    println!(
        "mean success {:.3} after {} env steps, {} updates ({} masked, {} resets)",
        eval.mean,
        trainer.env_steps(),
        trainer.updates(),
        record.masks.len(),
        record.resets.len()
    );
    println!("run written to {}", dir.display());
    Ok(())
}

fn cmd_eval(g: &Global, episodes: usize) -> anyhow::Result<()> {
    let ckpt = load_checkpoint(g)?;
    let seed = g.seed.unwrap_or(0);
    let result = evaluate(&ckpt.agent, &ckpt.specs, episodes, seed)?;
    let mut csv = String::from("task,success\n");
    for (name, s) in task_names(&ckpt.specs).iter().zip(&result.per_task) {
        println!("{name}: {s:.3}");
        csv.push_str(&format!("{name},{s}\n"));
    }
    println!("mean success {:.3} (seed {seed}, {episodes} episodes per task)", result.mean);
    if g.out_dir.is_some() {
        write(&out_dir(g, ".")?.join("eval.csv"), &csv)?;
    }
    Ok(())
}

fn cmd_pca(g: &Global) -> anyhow::Result<()> {
    let ckpt = load_checkpoint(g)?;
    let w = ckpt.agent.w().vectors().to_vec();
    let p = pca(&w)?;
    let names = task_names(&ckpt.specs);
    let dir = out_dir(g, ".")?;
    write(&dir.join("pca.csv"), &pca_csv(&p, &names))?;
    write(&dir.join("pca_components.csv"), &pca_components_csv(&p))?;
    println!(
        "explained variance ratio: {}",
        p.explained_ratio.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>().join(", ")
    );
    Ok(())
}

fn cmd_subspace(g: &Global, angles: &[f64], num_angles: usize, episodes: usize) -> anyhow::Result<()> {
    let ckpt = load_checkpoint(g)?;
    let angles = if angles.is_empty() {
        angle_sweep(num_angles)
    } else {
        angles.to_vec()
    };
    let samples = subspace_sample(&ckpt.agent, &ckpt.specs, &angles, episodes, g.seed.unwrap_or(0))?;
    let dir = out_dir(g, ".")?;
    write(&dir.join("subspace.csv"), &subspace_csv(&samples, &task_names(&ckpt.specs)))
}

fn transfer_spec(ckpt: &Checkpoint, task_config: Option<&Path>, like: Option<usize>) -> anyhow::Result<TaskSpec> {
    if let Some(t) = like {
        return ckpt.specs.get(t).cloned().ok_or_else(|| {
            paco::Error::Config(format!("--like-task {t}: checkpoint has {} tasks", ckpt.specs.len())).into()
        });
    }
    let Some(path) = task_config else {
        bail!(paco::Error::Config("transfer needs --task-config or --like-task".into()));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| paco::Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let skill: SkillConfig = toml::from_str(&text).map_err(|e| paco::Error::Config(e.to_string()))?;
    let first = ckpt
        .specs
        .first()
        .ok_or_else(|| paco::Error::Config("checkpoint has no task specs".into()))?;
    let suite = SuiteConfig {
        horizon: first.horizon,
        reward: first.reward,
        physics: first.physics,
        ..SuiteConfig::default()
    };
    if skill.skill_id.is_none() {
        bail!(paco::Error::Config(
            "task config must set skill_id to one of the checkpoint's one-hot slots".into()
        ));
    }
    Ok(skill.to_spec(0, first.num_skills, &suite)?)
}

fn cmd_transfer(g: &Global, task_config: Option<&Path>, like: Option<usize>, steps: Option<u64>) -> anyhow::Result<()> {
    let ckpt = load_checkpoint(g)?;
    let spec = transfer_spec(&ckpt, task_config, like)?;
    let mut cfg: TrainConfig = match (&g.config, &ckpt.run) {
        (Some(_), _) => load_run(g)?.trainer,
        (None, Some(run)) => run.trainer.clone(),
        (None, None) => TrainConfig::default(),
    };
    cfg.injections.clear();
    if let Some(s) = steps {
        cfg.total_env_steps = s;
    }
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    let dir = out_dir(g, "runs/transfer")?;
    let name = spec.name.clone();
    let out = transfer(ckpt.agent, ckpt.specs, spec, cfg, Some(&dir))?;
    let start = match out.initial_candidate {
        c if c < out.task => format!("w of task {c}"),
        _ => "random w".to_string(),
    };
    println!("task {} ({name}): started from {start}, success {:.3}", out.task, out.success);
    println!("parameter set and existing compositional vectors unchanged");
    println!("run written to {}", dir.display());
    Ok(())
}

fn cmd_export_w(g: &Global) -> anyhow::Result<()> {
    let ckpt = load_checkpoint(g)?;
    let csv = export_w_csv(ckpt.agent.w().vectors(), &task_names(&ckpt.specs))?;
    match &g.out_dir {
        Some(_) => write(&out_dir(g, ".")?.join("w.csv"), &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Train => cmd_train(g),
        Command::Eval { episodes } => cmd_eval(g, *episodes),
        Command::Pca => cmd_pca(g),
        Command::SubspaceSample {
            angles,
            num_angles,
            episodes,
        } => cmd_subspace(g, angles, *num_angles, *episodes),
        Command::Transfer {
            task_config,
            like_task,
            steps,
        } => cmd_transfer(g, task_config.as_deref(), *like_task, *steps),
        Command::ExportW => cmd_export_w(g),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            match err.downcast_ref::<paco::Error>() {
                Some(paco::Error::Config(_)) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
