use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use symprune::ansatz::{build_hea, sample_params, AnsatzDesign};
use symprune::experiments::{
    critical_point, dynamics_experiment, emit_dynamics, emit_outputs, run_sweep_with, CellEvent, DynamicsConfig,
    ExperimentConfig,
};
use symprune::hamiltonians::{interaction_graph, project_hamiltonian, ProblemGraph};
use symprune::pruning::{symmetric_prune, PruneStage, StageLabel};
use symprune::state::spectrum;
use symprune::symmetry::{
    ansatz_subspace, default_cap, graph_automorphisms, hamiltonian_automorphisms, kernel_report,
    monte_carlo_kernel, symmetry_report, theory_fluctuation, theory_qbar, theory_qbar_s,
};
use symprune::training::{steps_to_epsilon, train};

#[derive(Parser)]
#[command(name = "symprune", version, about = "Symmetric pruning of variational quantum circuits")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Overrides the master seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for every output file.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Start from the large preset (n = 6, m = 2) instead of the desk preset.
    #[arg(long, global = true)]
    full: bool,
    /// TOML experiment configuration; unspecified fields keep the preset values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run SP0 to SP3 and write each stage plus a census table.
    Prune {
        /// Initial ansatz as JSON; defaults to a hardware-efficient ansatz.
        #[arg(long)]
        ansatz: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        layers: usize,
    },
    /// Train one stage from one initialisation and write its trace.
    Train {
        #[arg(long, default_value = "SP3")]
        stage: StageLabel,
        #[arg(long, default_value_t = 10)]
        layers: usize,
    },
    /// Kernel at initialisation: Monte Carlo samples next to the theory.
    Qntk {
        #[arg(long, default_value = "SP3")]
        stage: StageLabel,
        #[arg(long, default_value_t = 10)]
        layers: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Full stage by depth sweep with resumable journal.
    Sweep,
    /// Averaged gradient-descent residual against the kernel prediction.
    Dynamics {
        /// TOML dynamics configuration.
        #[arg(long)]
        dynamics: Option<PathBuf>,
    },
    /// Automorphism group and orbits of a graph file or of the configured Hamiltonian.
    Automorphisms {
        /// Graph in `n m` / edge-list text format.
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Exact spectrum and symmetry report of the configured problem.
    Spectrum {
        #[arg(long, default_value_t = 8)]
        levels: usize,
        #[arg(long, default_value_t = 4)]
        layers: usize,
    },
}

fn load_config(g: &Global) -> Result<ExperimentConfig> {
    let base = if g.full { ExperimentConfig::full() } else { ExperimentConfig::desk() };
    let mut cfg = match &g.config {
        None => base,
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            // merge the file over the preset so partial files work with --full
            let mut merged: toml::Table = toml::from_str(&base.to_toml())?;
            merged.extend(toml::from_str::<toml::Table>(&text)?);
            ExperimentConfig::from_toml(&toml::to_string(&merged)?)?
        }
    };
    if let Some(s) = g.seed {
        cfg.master_seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn stages_for(cfg: &ExperimentConfig, initial: AnsatzDesign) -> Result<Vec<PruneStage>> {
    Ok(symmetric_prune(&initial, &cfg.hamiltonian()?)?)
}

fn stage_ansatz(cfg: &ExperimentConfig, stage: StageLabel, layers: usize) -> Result<AnsatzDesign> {
    let h = cfg.hamiltonian()?;
    let stages = stages_for(cfg, build_hea(h.num_qubits(), layers)?)?;
    Ok(stages.into_iter().find(|s| s.label == stage).expect("every stage is built").ansatz)
}

fn run(cli: Cli) -> Result<bool> {
    let g = &cli.global;
    let out = &g.out_dir;
    match cli.command {
        Command::Prune { ansatz, layers } => {
            let cfg = load_config(g)?;
            let h = cfg.hamiltonian()?;
            let initial = match ansatz {
                Some(p) => AnsatzDesign::read(&p)?,
                None => build_hea(h.num_qubits(), layers)?,
            };
            let spec = cfg.loss_spec()?;
            let mut census = String::from("stage,gates,free_params,removed_gates,d_eff\n");
            for s in stages_for(&cfg, initial)? {
                let d = ansatz_subspace(&s.ansatz, &spec)?.dim();
                census.push_str(&format!(
                    "{},{},{},{},{}\n",
                    s.label,
                    s.ansatz.gates().count(),
                    s.free_param_count,
                    s.removed_gate_count,
                    d
                ));
                write(out, &format!("{}.json", s.label), s.ansatz.to_json())?;
            }
            print!("{census}");
            write(out, "census.csv", census)?;
            Ok(true)
        }
        Command::Train { stage, layers } => {
            let cfg = load_config(g)?;
            let a = stage_ansatz(&cfg, stage, layers)?;
            let init = sample_params(&a, cfg.master_seed);
            let trace = train(&a, &cfg.loss_spec()?, &cfg.optimizer, &init)?;
            write(out, "trace.csv", trace.to_csv())?;
            let t_eps = steps_to_epsilon(&trace, cfg.epsilon);
            let summary = json!({
                "stage": stage,
                "layers": layers,
                "num_params": a.num_free_params(),
                "final_loss": trace.final_loss(),
                "t_eps": t_eps,
                "stop_reason": trace.stop_reason,
                "iterations": trace.records.len() - 1,
                "wall_time_secs": trace.wall_time_secs,
                "final_params": trace.final_params.values,
            });
            write(out, "train.json", serde_json::to_string_pretty(&summary)?)?;
            println!(
                "{stage} L={layers} K={} final loss {:e}, T(eps) {}",
                a.num_free_params(),
                trace.final_loss(),
                t_eps.map_or("not reached".into(), |t| t.to_string())
            );
            Ok(true)
        }
        Command::Qntk { stage, layers, trials } => {
            let cfg = load_config(g)?;
            let spec = cfg.loss_spec()?;
            let a = stage_ansatz(&cfg, stage, layers)?;
            let mc = monte_carlo_kernel(&a, &spec, trials, cfg.master_seed)?;
            let basis = ansatz_subspace(&a, &spec)?;
            let h_star = project_hamiltonian(&spec.hamiltonian, &basis)?;
            let k = a.num_free_params();
            let point = kernel_report(&a, &sample_params(&a, cfg.master_seed), &spec)?;
            let report = json!({
                "stage": stage,
                "layers": layers,
                "num_params": k,
                "d_eff": basis.dim(),
                "mc_mean": mc.mean,
                "mc_std": mc.std_dev,
                "theory_qbar": theory_qbar(k, &spec.hamiltonian),
                "theory_qbar_s": theory_qbar_s(k, &h_star, basis.dim())?,
                "theory_fluctuation": theory_fluctuation(k, &h_star, basis.dim())?,
                "at_seed": point,
                "samples": mc.samples,
            });
            write(out, "qntk.json", serde_json::to_string_pretty(&report)?)?;
            println!(
                "{stage} L={layers} K={k} d_eff={} mean Q {:.6} (std {:.6}), theory {:.6}",
                basis.dim(),
                mc.mean,
                mc.std_dev,
                report["theory_qbar_s"]
            );
            Ok(true)
        }
        Command::Sweep => {
            let cfg = load_config(g)?;
            write(out, "config.toml", cfg.to_toml())?;
            let total = cfg.stages.len() * cfg.layer_grid.len() * cfg.repeats;
            let done = std::sync::atomic::AtomicUsize::new(0);
            let result = run_sweep_with(&cfg, Some(&out.join("journal.csv")), |ev| {
                let k = done.fetch_add(1, std::sync::atomic::Ordering::SeqCst) + 1;
                // one eprintln per event keeps lines whole across workers
                match ev {
                    CellEvent::Done(r) => eprintln!(
                        "[{k}] {} L={} r={} loss {:e}",
                        r.stage, r.layers, r.repeat, r.final_loss
                    ),
                    CellEvent::Failed(f) => {
                        eprintln!("[{k}] {} L={} r={} failed: {}", f.stage, f.layers, f.repeat, f.message)
                    }
                }
            })?;
            emit_outputs(&result, out)?;
            for s in &cfg.stages {
                let cp = critical_point(&result, *s)
                    .ok()
                    .flatten()
                    .map_or("not found".to_string(), |k| k.to_string());
                println!("{s}: critical LK {cp}");
            }
            println!("{} of {total} cells completed", result.rows.len());
            Ok(result.is_complete())
        }
        Command::Dynamics { dynamics } => {
            let mut cfg = match dynamics {
                Some(p) => toml::from_str::<DynamicsConfig>(&fs::read_to_string(&p)?)
                    .with_context(|| format!("parsing {}", p.display()))?,
                None if g.full => DynamicsConfig {
                    n: 6,
                    layers: 80,
                    repeats: 30,
                    ..DynamicsConfig::default()
                },
                None => DynamicsConfig::default(),
            };
            if let Some(s) = g.seed {
                cfg.master_seed = s;
            }
            let r = dynamics_experiment(&cfg)?;
            emit_dynamics(&r, out)?;
            match r.fit {
                Some(f) => println!(
                    "fitted gamma {:.4e} (R^2 {:.4}), predicted {:.4e}",
                    f.gamma, f.r_squared, r.theory_gamma
                ),
                None => println!("no decay window; predicted gamma {:.4e}", r.theory_gamma),
            }
            Ok(true)
        }
        Command::Automorphisms { graph } => {
            let group = match graph {
                Some(p) => graph_automorphisms(&ProblemGraph::read(&p)?)?,
                None => {
                    let cfg = load_config(g)?;
                    let h = cfg.hamiltonian()?;
                    write(out, "graph.txt", interaction_graph(&h.effective).to_text())?;
                    hamiltonian_automorphisms(&h.effective)?
                }
            };
            println!("order {}", group.order());
            for o in &group.vertex_orbits {
                println!("vertex orbit {o:?}");
            }
            for o in &group.edge_orbits {
                println!("edge orbit {o:?}");
            }
            write(out, "automorphisms.json", serde_json::to_string_pretty(&group)?)?;
            Ok(true)
        }
        Command::Spectrum { levels, layers } => {
            let cfg = load_config(g)?;
            let h = cfg.hamiltonian()?;
            let spec = cfg.loss_spec()?;
            let values = spectrum(&h.full)?;
            for (i, e) in values.iter().take(levels).enumerate() {
                println!("E{i} = {e:.12}");
            }
            let a = stage_ansatz(&cfg, StageLabel::SP3, layers)?;
            let cap = default_cap(a.num_qubits());
            let report = symmetry_report(&a, &spec, cap)?;
            print!("{}", report.to_text());
            write(out, "spectrum.json", serde_json::to_string_pretty(&values)?)?;
            write(out, "symmetry_report.txt", report.to_text())?;
            write(out, "symmetry_report.json", report.to_json())?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
