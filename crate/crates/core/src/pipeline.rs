//! Orchestration behind the CLI: build the model from a [`RunConfig`],
//! translate, decompose, synthesize, simulate and assemble the report.
//! Every output is a pure function of the configuration and seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{translate_minimal, AutomatonError, Dfa, DfaDump};
use crate::bounds::{BoundsError, SpecificationBound, TaskBound};
use crate::cegis::{
    bisect_gamma_c, BarrierCertificate, BisectionStep, CegisConfig, CegisProblem, IterationRecord,
    TaskRegions,
};
use crate::config::{ConfigError, PolicyConfig, RunConfig, SystemConfig};
use crate::controller::{
    clopper_pearson, monte_carlo, run_closed_loop, ConstantLaw, ControlLaw, ControllerError,
    FeedbackPolicy, HybridPolicy, InitialStates, MonteCarloConfig, MonteCarloSummary,
    SwitchingAutomaton,
};
use crate::decomposition::{Decomposition, DecompositionError, PartitionKey, ReachTask};
use crate::formula::{negate, parse, Alphabet, Formula};
use crate::poly::{Interval, NoiseComponent, NoiseSpec, Polynomial};
use crate::system::{run_rng, Dynamics, Labeling, Region, StochasticSystem};

/// Disjunct cap when complementing regions for the default label.
const MAX_DISJUNCTS: usize = 64;
/// Grid points used to look for overlapping label regions.
const OVERLAP_POINTS: f64 = 1e5;
/// Allowed shortfall of the empirical lower end below the certified bound.
pub const MC_SLACK: f64 = 0.01;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error("certified policy requested but no certificates are available")]
    NoCertificates,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Parsed and validated inputs shared by all stages.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: RunConfig,
    pub alphabet: Alphabet,
    pub formula: Formula,
    pub negated: Formula,
    /// Minimal DFA of the negated formula, canonically numbered.
    pub dfa: Dfa,
    pub system: StochasticSystem<f64>,
    pub labeling: Labeling<f64>,
    pub automaton: SwitchingAutomaton,
    pub decomposition: Decomposition,
    pub warnings: Vec<String>,
}

impl Model {
    pub fn build(config: RunConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let alphabet = Alphabet::new(config.propositions.iter().cloned())
            .map_err(|e| ConfigError::field("propositions", e.to_string()))?;
        let formula = parse(&config.formula, &alphabet)
            .map_err(|e| ConfigError::field("formula", e.to_string()))?;
        let negated = negate(&formula);
        let dfa = translate_minimal(&negated, &alphabet)?.canonical();
        let system = build_system(&config.system, config.synthesis.enabled)?;
        let labeling = build_labeling(&config, &alphabet)?;
        let automaton = SwitchingAutomaton::build(&dfa);
        let decomposition = Decomposition::new(&dfa, config.horizon)?;

        let mut warnings = Vec::new();
        let n = system.state_dim();
        let per_axis = (OVERLAP_POINTS.powf(1.0 / n as f64).floor() as usize).max(2);
        for (a, b) in labeling.overlaps(system.state_box(), per_axis) {
            warnings.push(format!(
                "label regions of `{}` and `{}` overlap; the first listed wins",
                alphabet.name(a),
                alphabet.name(b)
            ));
        }
        if decomposition.vacuous {
            warnings
                .push("the negated specification accepts the empty word; every bound is 1".into());
        }
        Ok(Self {
            config,
            alphabet,
            formula,
            negated,
            dfa,
            system,
            labeling,
            automaton,
            decomposition,
            warnings,
        })
    }

    pub fn prop_name(&self, p: usize) -> String {
        self.alphabet.name(p).to_string()
    }

    fn names(&self, ps: impl IntoIterator<Item = usize>) -> Vec<String> {
        ps.into_iter().map(|p| self.prop_name(p)).collect()
    }
}

fn build_system(cfg: &SystemConfig, certify: bool) -> Result<StochasticSystem<f64>, PipelineError> {
    for (i, d) in cfg.dynamics.iter().enumerate() {
        Dynamics::<f64>::parse(&[d])
            .map_err(|e| ConfigError::field(format!("system.dynamics[{i}]"), e.to_string()))?;
    }
    let dynamics = Dynamics::parse(&cfg.dynamics)
        .map_err(|e| ConfigError::field("system.dynamics", e.to_string()))?;
    if certify {
        if let Dynamics::Expression(_) = dynamics {
            return Err(ConfigError::field(
                "system.dynamics",
                "synthesis needs polynomial dynamics; set synthesis.enabled = false to simulate only",
            )
            .into());
        }
    }
    let noise = NoiseSpec::new(
        cfg.noise_std
            .iter()
            .map(|&std| NoiseComponent { mean: 0.0, std })
            .collect(),
    )
    .map_err(|e| ConfigError::field("system.noise_std", e.to_string()))?;
    let state_box = cfg
        .state_box
        .iter()
        .map(|[lo, hi]| Interval::new(*lo, *hi))
        .collect();
    StochasticSystem::new(dynamics, cfg.inputs.clone(), noise, state_box)
        .map_err(|e| ConfigError::field("system", e.to_string()).into())
}

fn build_labeling(cfg: &RunConfig, alphabet: &Alphabet) -> Result<Labeling<f64>, PipelineError> {
    let mut regions = Vec::new();
    for (i, l) in cfg.labels.iter().enumerate() {
        let mut disjuncts = Vec::new();
        for b in &l.region.boxes {
            let bx: Vec<_> = b.iter().map(|[lo, hi]| Interval::new(*lo, *hi)).collect();
            disjuncts.extend(Region::from_box(&bx).disjuncts);
        }
        for (j, conj) in l.region.inequalities.iter().enumerate() {
            let mut gs = Vec::new();
            for (k, g) in conj.iter().enumerate() {
                let path = format!("labels[{i}].region.inequalities[{j}][{k}]");
                let p = Polynomial::<f64>::parse(g)
                    .map_err(|e| ConfigError::field(&path, e.to_string()))?;
                if p.vars().iter().any(
                    |v| !matches!(v, crate::poly::Var::State(s) if s < &cfg.system.dynamics.len()),
                ) {
                    return Err(
                        ConfigError::field(path, "may only use state variables x1..xn").into(),
                    );
                }
                gs.push(p);
            }
            disjuncts.push(gs);
        }
        let p = alphabet.index_of(&l.prop).expect("validated");
        regions.push((p, Region::new(disjuncts)));
    }
    let default = alphabet.index_of(&cfg.default_label).expect("validated");
    Labeling::new(alphabet.clone(), regions, default)
        .map_err(|e| ConfigError::field("labels", e.to_string()).into())
}

// ---------------------------------------------------------------- translate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationReport {
    pub formula: String,
    pub negated: String,
    pub dfa: DfaDump,
    pub switching_states: Vec<String>,
}

pub fn translation(model: &Model) -> TranslationReport {
    TranslationReport {
        formula: model.formula.display(&model.alphabet).to_string(),
        negated: model.negated.display(&model.alphabet).to_string(),
        dfa: model.dfa.dump(),
        switching_states: model.automaton.states().iter().map(|s| s.name()).collect(),
    }
}

// ---------------------------------------------------------------- decompose

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTasks {
    pub run: Vec<usize>,
    pub tasks: Vec<ReachTask>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDump {
    pub index: usize,
    pub key: PartitionKey,
    pub tasks: Vec<ReachTask>,
    pub source_labels: Vec<String>,
    pub target_labels: Vec<String>,
    pub horizon: usize,
}

/// JSON view of the decomposition; runs are DFA state sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub n: usize,
    pub self_loops: Vec<usize>,
    pub runs: Vec<Vec<usize>>,
    pub by_initial: BTreeMap<String, Vec<Vec<usize>>>,
    pub tasks: Vec<RunTasks>,
    pub groups: Vec<GroupDump>,
    pub vacuous: bool,
}

pub fn decomposition(model: &Model) -> DecompositionReport {
    let dec = &model.decomposition;
    DecompositionReport {
        n: dec.n,
        self_loops: dec.self_loops.iter().copied().collect(),
        runs: dec.runs.iter().map(|r| r.0.clone()).collect(),
        by_initial: dec
            .by_initial
            .iter()
            .map(|(p, rs)| {
                (
                    model.prop_name(*p),
                    rs.iter().map(|r| r.0.clone()).collect(),
                )
            })
            .collect(),
        tasks: dec
            .tasks
            .iter()
            .map(|(r, ts)| RunTasks {
                run: r.0.clone(),
                tasks: ts.iter().copied().collect(),
            })
            .collect(),
        groups: dec
            .groups
            .iter()
            .enumerate()
            .map(|(index, g)| GroupDump {
                index,
                key: g.key.clone(),
                tasks: g.tasks.iter().copied().collect(),
                source_labels: model.names(g.source_labels.iter().copied()),
                target_labels: model.names(g.target_labels.iter().copied()),
                horizon: g.horizon,
            })
            .collect(),
        vacuous: dec.vacuous,
    }
}

// ---------------------------------------------------------------- synthesize

/// Synthesis outcome of one partition group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSynthesis {
    pub index: usize,
    pub key: PartitionKey,
    pub horizon: usize,
    pub degree: u32,
    pub certificate: Option<BarrierCertificate<f64>>,
    /// `min(1, γ + cT)` at the group horizon; 1 without a certificate.
    pub bound: f64,
    pub failure: Option<String>,
    pub steps: Vec<BisectionStep>,
    pub log: Vec<IterationRecord>,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub prop: String,
    pub upper: f64,
    pub lower: f64,
    pub runs: Vec<(Vec<usize>, f64)>,
}

/// Certificates and bounds; also the certificate store read by `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    /// The configuration parts the certificates depend on.
    pub inputs: SynthesisInputs,
    pub groups: Vec<GroupSynthesis>,
    pub task_bounds: Vec<TaskBound<f64>>,
    pub bounds: Vec<BoundRow>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisInputs {
    pub propositions: Vec<String>,
    pub formula: String,
    pub horizon: usize,
    pub system: SystemConfig,
    pub labels: Vec<crate::config::LabelConfig>,
    pub default_label: String,
    pub synthesis: crate::config::SynthesisConfig,
}

impl SynthesisInputs {
    pub fn of(cfg: &RunConfig) -> Self {
        Self {
            propositions: cfg.propositions.clone(),
            formula: cfg.formula.clone(),
            horizon: cfg.horizon,
            system: cfg.system.clone(),
            labels: cfg.labels.clone(),
            default_label: cfg.default_label.clone(),
            synthesis: cfg.synthesis.clone(),
        }
    }
}

/// Synthesizes one certificate per group (sequentially) unless synthesis is
/// disabled, then combines the bounds. A failed group contributes 1.
pub fn synthesize(model: &Model) -> Result<SynthesisReport, PipelineError> {
    let dec = &model.decomposition;
    let syn = &model.config.synthesis;
    let mut groups = Vec::new();
    let mut warnings = Vec::new();
    for (index, g) in dec.groups.iter().enumerate() {
        let degree = syn.degree_for(index);
        let mut out = GroupSynthesis {
            index,
            key: g.key.clone(),
            horizon: g.horizon,
            degree,
            certificate: None,
            bound: 1.0,
            failure: None,
            steps: Vec::new(),
            log: Vec::new(),
            samples: 0,
        };
        if !syn.enabled {
            out.failure = Some("synthesis disabled".into());
            groups.push(out);
            continue;
        }
        let cfg = CegisConfig {
            degree,
            ..syn.cegis
        };
        match synthesize_group(model, g, &cfg) {
            Ok(b) => {
                out.bound = b.bound().unwrap_or(1.0);
                out.certificate = b.certificate;
                out.steps = b.steps;
                out.log = b.log;
                out.samples = b.samples;
                if out.certificate.is_none() {
                    out.failure = Some("no certified (gamma, c) pair".into());
                }
            }
            Err(why) => out.failure = Some(why),
        }
        if let Some(why) = &out.failure {
            if syn.enabled {
                warnings.push(format!(
                    "group {index} {}: {why}; its tasks use the bound 1",
                    key_name(&g.key)
                ));
            }
        }
        groups.push(out);
    }
    let pairs: Vec<Option<(f64, f64)>> = groups
        .iter()
        .map(|g| g.certificate.as_ref().map(|c| (c.gamma, c.c)))
        .collect();
    let task_bounds = crate::bounds::task_bounds(dec, &pairs);
    let plain: BTreeMap<ReachTask, f64> = task_bounds.iter().map(|(t, b)| (*t, b.bound)).collect();
    let spec = SpecificationBound::compute(dec, &model.alphabet, &plain)?;
    Ok(SynthesisReport {
        inputs: SynthesisInputs::of(&model.config),
        groups,
        task_bounds: task_bounds.into_values().collect(),
        bounds: bound_rows(&spec),
        warnings,
    })
}

fn bound_rows(spec: &SpecificationBound<f64>) -> Vec<BoundRow> {
    spec.per_prop
        .iter()
        .map(|b| BoundRow {
            prop: b.name.clone(),
            upper: b.upper,
            lower: b.lower,
            runs: b.runs.iter().map(|r| (r.run.clone(), r.value)).collect(),
        })
        .collect()
}

fn synthesize_group(
    model: &Model,
    g: &crate::decomposition::TaskGroup,
    cfg: &CegisConfig,
) -> Result<crate::cegis::BisectionOutcome<f64>, String> {
    let lab = &model.labeling;
    let source = lab
        .union_region(g.source_labels.iter().copied(), MAX_DISJUNCTS)
        .ok_or("source region is not representable")?;
    let target = lab
        .union_region(g.target_labels.iter().copied(), MAX_DISJUNCTS)
        .ok_or("target region is not representable")?;
    let problem = CegisProblem::new(
        &model.system,
        &TaskRegions { source, target },
        g.horizon,
        cfg,
    )
    .map_err(|e| e.to_string())?;
    bisect_gamma_c(&problem, cfg).map_err(|e| e.to_string())
}

fn key_name(k: &PartitionKey) -> String {
    let succ: Vec<String> = k.successors.iter().map(|q| format!("q{q}")).collect();
    format!("(q{},q{},{{{}}})", k.source, k.via, succ.join(","))
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub policy: String,
    pub initial: String,
    pub monte_carlo: MonteCarloSummary,
    /// Certified satisfaction lower bound for the initial label, if any.
    pub certified_lower: Option<f64>,
    /// Whether the empirical lower end is at least the certified bound
    /// minus the slack.
    pub consistent: Option<bool>,
    pub warnings: Vec<String>,
}

/// Monte Carlo runs and the first few trajectories as CSV.
pub fn simulate(
    model: &Model,
    synthesis: Option<&SynthesisReport>,
) -> Result<(SimulationReport, String), PipelineError> {
    let cfg = &model.config;
    let sim = &cfg.simulation;
    let certificates: Option<Vec<Option<BarrierCertificate<f64>>>> =
        synthesis.map(|s| s.groups.iter().map(|g| g.certificate.clone()).collect());
    let (law, policy): (Box<dyn ControlLaw<f64>>, String) = match &cfg.policy {
        PolicyConfig::Certified { tolerance } => {
            let certs = certificates.ok_or(PipelineError::NoCertificates)?;
            let pol = HybridPolicy::new(&model.automaton, &model.decomposition, &certs, *tolerance);
            (
                Box::new(pol),
                format!("certified switching policy (tolerance {tolerance})"),
            )
        }
        PolicyConfig::Feedback { gains, offset } => (
            Box::new(FeedbackPolicy {
                gains: gains.clone(),
                offset: offset.clone(),
                inputs: cfg.system.inputs.clone(),
            }),
            "quantized linear feedback".into(),
        ),
        PolicyConfig::Constant { input } => (
            Box::new(ConstantLaw(*input)),
            format!("constant input {input}"),
        ),
    };
    let (initial, initial_label, initial_name) = match (&sim.initial.prop, &sim.initial.point) {
        (Some(p), _) => {
            let idx = model.alphabet.index_of(p).expect("validated");
            let region = model.labeling.region(idx, MAX_DISJUNCTS).ok_or_else(|| {
                ConfigError::field("simulation.initial.prop", "region is not representable")
            })?;
            (
                InitialStates::Region(region),
                idx,
                format!("uniform over the region of {p}"),
            )
        }
        (None, Some(x)) => (
            InitialStates::Point(x.clone()),
            model.labeling.label(x),
            format!("point {x:?}"),
        ),
        (None, None) => unreachable!("validated"),
    };
    let mc_cfg = MonteCarloConfig {
        runs: sim.runs,
        steps: cfg.steps(),
        confidence: sim.confidence,
        seed: sim.seed,
    };
    let mc = monte_carlo(
        &model.system,
        &model.labeling,
        &model.automaton,
        law.as_ref(),
        &model.dfa,
        Some(&model.formula),
        &initial,
        &mc_cfg,
    )?;
    let certified_lower = synthesis
        .filter(|_| matches!(cfg.policy, PolicyConfig::Certified { .. }))
        .and_then(|s| {
            s.bounds
                .iter()
                .find(|b| b.prop == model.prop_name(initial_label))
                .map(|b| b.lower)
        });
    let consistent = certified_lower.map(|lb| mc.lower >= lb - MC_SLACK);
    let mut warnings = Vec::new();
    if mc.fallback_runs > 0 {
        warnings.push(format!(
            "{} of {} runs used a fallback input ({} steps in total)",
            mc.fallback_runs, mc.runs, mc.fallback_steps
        ));
    }
    if mc.clamped_runs > 0 {
        warnings.push(format!(
            "{} of {} runs left the state box and were projected back",
            mc.clamped_runs, mc.runs
        ));
    }
    if consistent == Some(false) {
        warnings.push(format!(
            "empirical lower end {:.6} is below the certified bound {:.6} minus {MC_SLACK}",
            mc.lower,
            certified_lower.unwrap_or(0.0)
        ));
    }
    let csv = traces_csv(
        model,
        law.as_ref(),
        &initial,
        &mc_cfg,
        sim.traces.min(sim.runs),
    )?;
    Ok((
        SimulationReport {
            policy,
            initial: initial_name,
            monte_carlo: mc,
            certified_lower,
            consistent,
            warnings,
        },
        csv,
    ))
}

/// Rows `run, k, x1..xn, u1..um, q_m, label`; the input columns are empty on
/// the last visited step. Run `r` replays Monte Carlo run `r` exactly.
fn traces_csv(
    model: &Model,
    law: &dyn ControlLaw<f64>,
    initial: &InitialStates<f64>,
    cfg: &MonteCarloConfig,
    count: usize,
) -> Result<String, PipelineError> {
    let n = model.system.state_dim();
    let m = model.system.input_dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["run".to_string(), "k".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=m).map(|i| format!("u{i}")));
    header.extend(["q_m".to_string(), "label".to_string()]);
    w.write_record(&header)?;
    for r in 0..count {
        let mut rng = run_rng(cfg.seed, r as u64);
        let x0 = match initial {
            InitialStates::Point(x) => x.clone(),
            InitialStates::Region(reg) => reg
                .sample(model.system.state_box(), &mut rng, 100_000)
                .ok_or(ControllerError::EmptyInitialRegion)?,
        };
        let run = run_closed_loop(
            &model.system,
            &model.labeling,
            &model.automaton,
            law,
            &x0,
            cfg.steps,
            &mut rng,
        )
        .map_err(ControllerError::from)?;
        for k in 0..run.states.len() {
            let mut row = vec![r.to_string(), k.to_string()];
            row.extend(run.states[k].iter().map(|v| v.to_string()));
            match run.inputs.get(k) {
                Some(&u) => row.extend(model.system.inputs()[u].iter().map(|v| v.to_string())),
                None => row.extend(std::iter::repeat_n(String::new(), m)),
            }
            row.push(run.modes[k].to_string());
            row.push(model.prop_name(run.labels[k]));
            w.write_record(&row)?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

// ---------------------------------------------------------------- report

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub name: String,
    pub horizon: usize,
    pub translation: TranslationReport,
    pub decomposition: DecompositionReport,
    pub synthesis: Option<SynthesisReport>,
    pub simulation: Option<SimulationReport>,
    pub warnings: Vec<String>,
}

/// Every artifact of a full run.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub report: Report,
    pub dfa_dot: String,
    pub switching_dot: String,
    pub traces_csv: String,
}

pub fn run_all(model: &Model) -> Result<Artifacts, PipelineError> {
    let synthesis = synthesize(model)?;
    let (simulation, traces_csv) = simulate(model, Some(&synthesis))?;
    Ok(Artifacts {
        report: assemble(model, Some(synthesis), Some(simulation)),
        dfa_dot: model.dfa.to_dot()?,
        switching_dot: model.automaton.to_dot(),
        traces_csv,
    })
}

/// Collects the stage outputs and every warning into one report.
pub fn assemble(
    model: &Model,
    synthesis: Option<SynthesisReport>,
    simulation: Option<SimulationReport>,
) -> Report {
    let mut warnings = model.warnings.clone();
    if let Some(s) = &synthesis {
        warnings.extend(s.warnings.iter().cloned());
    }
    if let Some(s) = &simulation {
        warnings.extend(s.warnings.iter().cloned());
    }
    Report {
        schema_version: crate::config::SCHEMA_VERSION,
        name: model.config.name.clone(),
        horizon: model.config.horizon,
        translation: translation(model),
        decomposition: decomposition(model),
        synthesis,
        simulation,
        warnings,
    }
}

/// Human-readable rendering; every number comes from `report`.
pub fn render_text(report: &Report) -> String {
    let mut s = String::new();
    let t = &report.translation;
    let _ = writeln!(s, "run: {}", report.name);
    let _ = writeln!(s, "formula: {}", t.formula);
    let _ = writeln!(s, "negation: {}", t.negated);
    let _ = writeln!(s, "horizon N: {}", report.horizon);
    let _ = writeln!(
        s,
        "DFA: {} states, accepting {:?}, self-loops {:?}",
        t.dfa.states, t.dfa.accepting, t.dfa.self_loops
    );
    let _ = writeln!(
        s,
        "switching automaton: {} states",
        t.switching_states.len()
    );
    let d = &report.decomposition;
    let _ = writeln!(s, "\naccepting runs (N = {}): {}", d.n, d.runs.len());
    for (p, runs) in &d.by_initial {
        let _ = writeln!(
            s,
            "  {p}: {}",
            runs.iter()
                .map(|r| fmt_run(r))
                .collect::<Vec<_>>()
                .join(" ")
        );
    }
    let _ = writeln!(s, "groups:");
    for g in &d.groups {
        let tasks: Vec<String> = g
            .tasks
            .iter()
            .map(|t| format!("(q{},q{},q{},{})", t.source, t.via, t.target, t.horizon))
            .collect();
        let _ = writeln!(
            s,
            "  [{}] {} T={} source {:?} target {:?} tasks {}",
            g.index,
            key_name(&g.key),
            g.horizon,
            g.source_labels,
            g.target_labels,
            tasks.join(" ")
        );
    }
    if let Some(syn) = &report.synthesis {
        let _ = writeln!(s, "\ncertificates:");
        for g in &syn.groups {
            match &g.certificate {
                Some(c) => {
                    let _ = writeln!(
                        s,
                        "  [{}] degree {} gamma {:e} c {:e} bound {:e} ({} bisection steps)\n      B(x) = {}",
                        g.index,
                        g.degree,
                        c.gamma,
                        c.c,
                        g.bound,
                        g.steps.len(),
                        c.b
                    );
                }
                None => {
                    let _ = writeln!(
                        s,
                        "  [{}] none: {}",
                        g.index,
                        g.failure.as_deref().unwrap_or("unknown")
                    );
                }
            }
        }
        let _ = writeln!(s, "\nbounds (per initial label):");
        for b in &syn.bounds {
            let _ = writeln!(
                s,
                "  {}: violation <= {:e}, satisfaction >= {}",
                b.prop, b.upper, b.lower
            );
        }
    }
    if let Some(sim) = &report.simulation {
        let mc = &sim.monte_carlo;
        let _ = writeln!(s, "\nMonte Carlo ({}; start {}):", sim.policy, sim.initial);
        let _ = writeln!(
            s,
            "  {} of {} runs satisfied ({}), {}% interval [{}, {}]",
            mc.satisfied,
            mc.runs,
            mc.frequency,
            mc.confidence * 100.0,
            mc.lower,
            mc.upper
        );
        if let Some(lb) = sim.certified_lower {
            let _ = writeln!(
                s,
                "  certified lower bound {lb}; consistent: {}",
                sim.consistent.unwrap_or(false)
            );
        }
    }
    if !report.warnings.is_empty() {
        let _ = writeln!(s, "\nwarnings:");
        for w in &report.warnings {
            let _ = writeln!(s, "  - {w}");
        }
    }
    s
}

fn fmt_run(r: &[usize]) -> String {
    format!(
        "({})",
        r.iter()
            .map(|q| format!("q{q}"))
            .collect::<Vec<_>>()
            .join(",")
    )
}

/// Clopper–Pearson interval re-exported for report consumers.
pub fn empirical_interval(
    successes: usize,
    runs: usize,
    confidence: f64,
) -> Result<(f64, f64), PipelineError> {
    Ok(clopper_pearson(successes, runs, confidence)?)
}
