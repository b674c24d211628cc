use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use stochsynth::config::RunConfig;
use stochsynth::pipeline::{self, Model, SynthesisInputs, SynthesisReport};

#[derive(Parser)]
#[command(
    name = "synth",
    version,
    about = "Switching-controller synthesis for stochastic systems against LTLf specifications"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Translate the negated formula to a DFA: dfa.json, dfa.dot, switching.dot.
    Translate(Common),
    /// Enumerate accepting runs, tasks and partition groups: decomposition.json.
    Decompose(Common),
    /// Synthesize one barrier certificate per group: certificates.json, bounds.json.
    Synthesize(Common),
    /// Closed-loop Monte Carlo: traces.csv, mc.json. Reuses certificates.json when it matches the config.
    Simulate(Common),
    /// Every stage plus report.json and report.txt.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides simulation.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured formula.
    #[arg(long)]
    formula: Option<String>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn model(&self) -> Result<Model> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.simulation.seed = seed;
        }
        if let Some(f) = &self.formula {
            cfg.formula = f.clone();
        }
        fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        Ok(Model::build(cfg)?)
    }
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn warn(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn translate(c: &Common, model: &Model) -> Result<()> {
    write(&c.out, "dfa.json", to_json(&pipeline::translation(model))?)?;
    write(&c.out, "dfa.dot", model.dfa.to_dot()?)?;
    write(&c.out, "switching.dot", model.automaton.to_dot())
}

fn synthesize(c: &Common, model: &Model) -> Result<SynthesisReport> {
    let syn = pipeline::synthesize(model)?;
    write(&c.out, "certificates.json", to_json(&syn)?)?;
    write(
        &c.out,
        "bounds.json",
        to_json(&json!({ "task_bounds": syn.task_bounds, "bounds": syn.bounds }))?,
    )?;
    Ok(syn)
}

/// Certificates from a previous `synthesize` with identical inputs.
fn stored_certificates(c: &Common, model: &Model) -> Option<SynthesisReport> {
    let text = fs::read_to_string(c.out.join("certificates.json")).ok()?;
    let syn: SynthesisReport = serde_json::from_str(&text).ok()?;
    (syn.inputs == SynthesisInputs::of(&model.config)).then_some(syn)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Translate(c) => {
            let model = c.model()?;
            warn(&model.warnings);
            translate(c, &model)?;
        }
        Command::Decompose(c) => {
            let model = c.model()?;
            warn(&model.warnings);
            write(
                &c.out,
                "decomposition.json",
                to_json(&pipeline::decomposition(&model))?,
            )?;
        }
        Command::Synthesize(c) => {
            let model = c.model()?;
            warn(&model.warnings);
            let syn = synthesize(c, &model)?;
            warn(&syn.warnings);
            for b in &syn.bounds {
                println!("{}: satisfaction >= {}", b.prop, b.lower);
            }
        }
        Command::Simulate(c) => {
            let model = c.model()?;
            warn(&model.warnings);
            let syn = if model.config.synthesis.enabled {
                match stored_certificates(c, &model) {
                    Some(s) => Some(s),
                    None => {
                        eprintln!("no matching certificates.json; synthesizing");
                        Some(synthesize(c, &model)?)
                    }
                }
            } else {
                None
            };
            let (sim, csv) = pipeline::simulate(&model, syn.as_ref())?;
            warn(&sim.warnings);
            write(&c.out, "traces.csv", csv)?;
            write(&c.out, "mc.json", to_json(&sim)?)?;
            let mc = &sim.monte_carlo;
            println!(
                "{} of {} runs satisfied; {}% interval [{}, {}]",
                mc.satisfied,
                mc.runs,
                mc.confidence * 100.0,
                mc.lower,
                mc.upper
            );
        }
        Command::Report(c) => {
            let model = c.model()?;
            translate(c, &model)?;
            write(
                &c.out,
                "decomposition.json",
                to_json(&pipeline::decomposition(&model))?,
            )?;
            let syn = synthesize(c, &model)?;
            let (sim, csv) = pipeline::simulate(&model, Some(&syn))?;
            write(&c.out, "traces.csv", csv)?;
            write(&c.out, "mc.json", to_json(&sim)?)?;
            let report = pipeline::assemble(&model, Some(syn), Some(sim));
            warn(&report.warnings);
            let text = pipeline::render_text(&report);
            write(&c.out, "report.json", to_json(&report)?)?;
            write(&c.out, "report.txt", &text)?;
            print!("{text}");
        }
    }
    Ok(())
}
