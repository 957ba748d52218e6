use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use flashgate::analyzer::{sparsity_profile, write_profile_csv, AttentionDump};
use flashgate::flops::{estimate_flops, savings_breakdown, FlopsParams};
use flashgate::gate::{replay_metrics, GateConfig, GateDecision, Observation, TriggerMode};
use flashgate::ics::{select_top_k, IcsAnalysis};
use flashgate::trace::tensor::read_tensor_file;
use flashgate::trace::{
    observations, read_trace, synthesize_trace, write_trace, SynthSpec, TokenResolver,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{emit_json, opt_field, sink};
use crate::{
    AnalyzeArgs, ArchArgs, FlopsArgs, GateArgs, Mode, ReplayArgs, SelectArgs, SweepArgs, SynthArgs,
};

#[derive(Serialize)]
struct Selection {
    indices: Vec<usize>,
    scores: Vec<f64>,
    retention: f64,
    expected_random: f64,
}

pub fn select(args: SelectArgs) -> Result<()> {
    let tensor = read_tensor_file(&args.tensor)
        .with_context(|| format!("reading {}", args.tensor.display()))?;
    let matrix = tensor.matrix(args.index)?;
    let analysis = IcsAnalysis::new(&matrix, args.rank_tol)?;
    let scores = analysis.scores();
    let subset = select_top_k(&scores, args.k)?;
    let rank = analysis.rank();
    let selection = Selection {
        retention: analysis.retention(&subset, rank)?,
        expected_random: analysis.expected_random_retention(args.k, rank)?,
        indices: subset.indices().to_vec(),
        scores: scores.scores().to_vec(),
    };
    emit_json(&selection, args.out.as_deref())
}

fn load_observations(args: &ReplayArgs) -> Result<Vec<Observation>> {
    let file =
        File::open(&args.trace).with_context(|| format!("opening {}", args.trace.display()))?;
    let steps = read_trace(BufReader::new(file))
        .with_context(|| format!("reading {}", args.trace.display()))?;
    let base = args.trace.parent().unwrap_or(Path::new("."));
    let mut resolver = TokenResolver::new(base, args.k, args.rank_tol);
    Ok(observations(&steps, &mut resolver)?)
}

fn gate_config(epsilon1: f64, delta: f64, mode: Mode) -> Result<GateConfig> {
    let mode = match mode {
        Mode::Default => TriggerMode::MotivationConsistent,
        Mode::Literal => TriggerMode::Literal,
    };
    Ok(GateConfig::new(epsilon1, delta)?.with_mode(mode))
}

#[derive(Serialize)]
struct GateSummary {
    reuse_rate: f64,
    decisions: Vec<GateDecision>,
    steps: usize,
}

pub fn gate(args: GateArgs) -> Result<()> {
    let obs = load_observations(&args.replay)?;
    let config = gate_config(args.epsilon1, args.delta, args.replay.mode)?;
    let report = replay_metrics(&obs, &config)?;
    if let Some(path) = &args.out {
        let mut out = sink(Some(path))?;
        writeln!(out, "step,verdict,reason,alpha_deg,phi,epsilon2")?;
        for d in &report.decisions {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                d.step,
                d.verdict,
                d.reason,
                opt_field(d.alpha_deg),
                opt_field(d.phi),
                opt_field(d.epsilon2)
            )?;
        }
        out.flush()?;
    }
    let summary = GateSummary {
        reuse_rate: report.reuse_rate,
        steps: report.decisions.len(),
        decisions: report.decisions,
    };
    emit_json(&summary, None)
}

fn flops_params(n: u64, np: u64, reuse_rate: f64, arch: &ArchArgs) -> Result<FlopsParams> {
    let params = FlopsParams {
        tokens: n,
        hidden: arch.d,
        ffn: arch.m,
        layers: arch.layers,
        prune_layer: arch.prune_layer,
        pruned_tokens: np,
        reuse_rate,
    };
    params.validate()?;
    Ok(params)
}

pub fn flops(args: FlopsArgs) -> Result<()> {
    let params = flops_params(
        args.n,
        args.np.unwrap_or(args.n),
        args.reuse_rate,
        &args.arch,
    )?;
    let total = estimate_flops(&params)?;
    println!("{:.2}", total / 1e12);
    if args.breakdown {
        let b = savings_breakdown(&params)?;
        println!("baseline {:.2}", b.baseline / 1e12);
        println!("after_pruning {:.2}", b.after_pruning / 1e12);
        println!(
            "after_pruning_and_reuse {:.2}",
            b.after_pruning_and_reuse / 1e12
        );
        println!("pruning_share {:.3}", b.pruning_share);
        println!("reuse_share {:.3}", b.reuse_share);
    }
    Ok(())
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    if !args.replay.trace.is_file() {
        bail!("trace {} does not exist", args.replay.trace.display());
    }
    let obs = load_observations(&args.replay)?;
    let np = match args.np {
        Some(np) => np,
        None => obs.first().context("trace is empty")?.tokens.len() as u64,
    };
    flops_params(args.n, np, 0.0, &args.arch)?;
    let grid: Vec<(f64, f64)> = args
        .epsilon1
        .iter()
        .flat_map(|&e| args.delta.iter().map(move |&d| (e, d)))
        .collect();
    let rows = grid
        .par_iter()
        .map(|&(e1, delta)| {
            let config = gate_config(e1, delta, args.replay.mode)?;
            let rate = replay_metrics(&obs, &config)?.reuse_rate;
            let cost = estimate_flops(&flops_params(args.n, np, rate, &args.arch)?)?;
            Ok((e1, delta, rate, cost / 1e12))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = sink(Some(&args.out))?;
    writeln!(out, "epsilon1,delta,reuse_rate,flops_estimate")?;
    for (e1, delta, rate, cost) in rows {
        writeln!(out, "{e1},{delta},{rate},{cost}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn synth(args: SynthArgs, seed: u64) -> Result<()> {
    let spec = SynthSpec {
        length: args.length,
        action_dim: args.action_dim,
        plateau_fraction: args.plateau_fraction,
        plateau_run_length: args.plateau_run_length,
        angle_noise_deg: args.angle_noise_deg,
        token_universe: args.token_universe,
        token_budget: args.token_budget,
        token_churn: args.token_churn,
        seed,
    };
    let steps = synthesize_trace(&spec)?;
    write_trace(&steps, sink(args.out.as_deref())?)?;
    Ok(())
}

pub fn analyze(args: AnalyzeArgs) -> Result<()> {
    let tensor = read_tensor_file(&args.tensor)
        .with_context(|| format!("reading {}", args.tensor.display()))?;
    let profile = sparsity_profile(&AttentionDump::from_tensor(&tensor)?)?;
    write_profile_csv(&profile, sink(args.out.as_deref())?)?;
    Ok(())
}
