use std::fmt::Write as _;
use std::fs;

use anyhow::{bail, Context, Result};
use pyrewire::consensus::{
    consensus_matrix, simulate, spectral_convergence_check, trajectory_csv, ConsensusSystem,
};
use pyrewire::data::{
    generate_sbm, load_citation, split, NodeDataset, RawGraphData, SbmParams, SplitSizes,
};
use pyrewire::gnn::{
    checkpoint, evaluate, prune_pipeline, train, train_with_hooks, EpochHook, GnnModel,
    PruneConfig, SpectraLog, TrainConfig,
};
use pyrewire::graph::WeightedGraph;
use pyrewire::linalg::format_f64;
use pyrewire::rewiring::{
    flip_recall, score_data_graph, CoupledRewireHook, RewireConfig, SignFlipInjector,
};
use serde_json::json;

use crate::args::{
    out_path, Common, ConsensusCmd, DataArgs, PruneCmd, RewireCmd, RewireMode, SpectraCmd,
    TrainArgs, TrainCmd,
};

fn prepare_out(common: &Common) -> Result<()> {
    fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))
}

fn write(common: &Common, file: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = out_path(common, file);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn raw_data(d: &DataArgs, seed: u64) -> Result<RawGraphData> {
    if d.sbm {
        let params = SbmParams {
            blocks: d.blocks,
            nodes_per_block: d.nodes_per_block,
            p_in: d.p_in,
            p_out: d.p_out,
            feature_dim: d.feature_dim,
            feature_gap: d.feature_gap,
            seed,
        };
        return Ok(generate_sbm(&params)?);
    }
    let dir = d.data.as_ref().expect("checked by caller");
    let (data, report) = load_citation(dir, &d.name)
        .with_context(|| format!("loading {} from {}", d.name, dir.display()))?;
    log::info!(
        "loaded {}: {} nodes, {} edges, {} classes ({} self-loops and {} duplicates dropped)",
        d.name,
        data.n(),
        data.graph.edge_count(),
        data.class_count,
        report.self_loops_dropped,
        report.duplicates_dropped
    );
    Ok(data)
}

fn dataset(d: &DataArgs, seed: u64) -> Result<NodeDataset> {
    let raw = raw_data(d, seed)?;
    let defaults = if d.sbm {
        SplitSizes {
            per_class_train: 20,
            val: 40,
            test: 120,
        }
    } else {
        SplitSizes::default()
    };
    let sizes = SplitSizes {
        per_class_train: d.train_per_class.unwrap_or(defaults.per_class_train),
        val: d.val.unwrap_or(defaults.val),
        test: d.test.unwrap_or(defaults.test),
    };
    Ok(split(&raw, sizes, seed, d.propagation)?)
}

fn train_config(t: &TrainArgs, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: t.epochs,
        lr: t.lr,
        momentum: t.momentum,
        weight_decay: t.weight_decay,
        l1: t.l1,
        seed,
        track_spectra: true,
    }
}

fn dims(data: &NodeDataset, hidden: &[usize]) -> Vec<usize> {
    let mut d = vec![data.feature_dim()];
    d.extend_from_slice(hidden);
    d.push(data.class_count);
    d
}

pub fn run_train(cmd: &TrainCmd) -> Result<()> {
    let seed = cmd.common.seed;
    let data = dataset(&cmd.data, seed)?;
    let config = train_config(&cmd.train, seed);
    let model = GnnModel::init(&dims(&data, &cmd.train.hidden), cmd.train.activation, seed)?;
    let out = train(model, &data, &config)?;
    let eval = evaluate(&out.model, &data, config.regularization())?;
    prepare_out(&cmd.common)?;
    write(&cmd.common, "metrics.csv", out.history.to_csv())?;
    write(&cmd.common, "spectra.csv", out.spectra.to_csv())?;
    checkpoint::save(&out_path(&cmd.common, "model.ckpt"), &out.model)?;
    let summary = json!({
        "test_acc": eval.test_acc,
        "best_val_acc": out.history.best_val_acc().unwrap_or(eval.val_acc),
        "epochs": config.epochs,
    });
    write(
        &cmd.common,
        "summary.json",
        serde_json::to_string_pretty(&summary)?,
    )?;
    println!("test_acc {:.4}", eval.test_acc);
    Ok(())
}

pub fn run_prune(cmd: &PruneCmd) -> Result<()> {
    let seed = cmd.common.seed;
    let data = dataset(&cmd.data, seed)?;
    let config = TrainConfig {
        track_spectra: false,
        ..train_config(&cmd.train, seed)
    };
    let prune = PruneConfig {
        energy_threshold: cmd.energy_threshold,
        finetune_epochs: cmd.finetune_epochs,
        source: cmd.plan_source,
        min_width: cmd.min_width,
    };
    let out = prune_pipeline(
        &data,
        &cmd.train.hidden,
        cmd.train.activation,
        &config,
        &prune,
    )?;
    prepare_out(&cmd.common)?;
    write(&cmd.common, "width_plan.json", out.plan.to_json())?;
    checkpoint::save(&out_path(&cmd.common, "model.ckpt"), &out.pruned.model)?;
    let summary = json!({
        "original_widths": cmd.train.hidden,
        "planned_widths": out.plan.widths,
        "source_ranks": out.plan.source_ranks,
        "naturally_shrinking": out.plan.naturally_shrinking(),
        "unpruned_test_acc": out.unpruned_eval.test_acc,
        "pruned_test_acc": out.pruned_eval.test_acc,
        "unpruned_parameters": out.unpruned.model.parameter_count(),
        "pruned_parameters": out.pruned.model.parameter_count(),
        "finetune_epochs": cmd.finetune_epochs,
    });
    write(
        &cmd.common,
        "prune_summary.json",
        serde_json::to_string_pretty(&summary)?,
    )?;
    println!(
        "widths {:?} -> {:?}; test_acc {:.4} -> {:.4}",
        cmd.train.hidden, out.plan.widths, out.unpruned_eval.test_acc, out.pruned_eval.test_acc
    );
    Ok(())
}

pub fn run_rewire(cmd: &RewireCmd) -> Result<()> {
    let seed = cmd.common.seed;
    if cmd.mode == RewireMode::Data {
        let raw = raw_data(&cmd.data, seed)?;
        let scored = score_data_graph(&raw.graph, cmd.top)?;
        let mut csv = String::from("i,j,score\n");
        for c in &scored {
            writeln!(csv, "{},{},{}", c.i, c.j, format_f64(c.score))?;
        }
        prepare_out(&cmd.common)?;
        write(&cmd.common, "data_scores.csv", csv)?;
        println!("scored {} candidate links", scored.len());
        return Ok(());
    }
    if cmd.deltas.is_empty() {
        bail!("--deltas needs at least one value");
    }
    let data = dataset(&cmd.data, seed)?;
    let config = TrainConfig {
        track_spectra: false,
        ..train_config(&cmd.train, seed)
    };
    let model = GnnModel::init(&dims(&data, &cmd.train.hidden), cmd.train.activation, seed)?;
    let inject_layer = cmd.inject_layer.unwrap_or(model.depth() - 1);

    let mut convergence = String::from("delta,epoch,train_loss,val_loss,val_acc,test_acc\n");
    let mut events = String::from("delta,epoch,layer,vertex,action,i,j,w,score\n");
    let mut runs = Vec::new();
    for &delta in &cmd.deltas {
        let mut hook = CoupledRewireHook::new(RewireConfig {
            delta,
            warmup: cmd.warmup,
            cadence: cmd.cadence,
            threshold: cmd.threshold,
            budget: cmd.budget,
            layers: cmd.layers.clone(),
        })?;
        let mut injector = cmd.inject_fraction.map(|fraction| SignFlipInjector {
            epoch: cmd.inject_epoch,
            layer: inject_layer,
            fraction,
            seed: seed.wrapping_add(1),
            flipped: Vec::new(),
        });
        // the snapshot at the injection epoch is taken before the corruption
        let mut hooks: Vec<&mut dyn EpochHook> = vec![&mut hook];
        if let Some(inj) = injector.as_mut() {
            hooks.push(inj);
        }
        let out = train_with_hooks(model.clone(), &data, &config, &mut hooks)?;
        let d = format_f64(delta);
        for m in &out.history.epochs {
            writeln!(
                convergence,
                "{d},{},{},{},{},{}",
                m.epoch,
                format_f64(m.train_loss),
                format_f64(m.val_loss),
                format_f64(m.val_acc),
                format_f64(m.test_acc)
            )?;
        }
        for line in hook.events_csv().lines().skip(1) {
            writeln!(events, "{d},{line}")?;
        }
        let eval = evaluate(&out.model, &data, config.regularization())?;
        let recall = injector.as_ref().map(|inj| {
            let rows = out.model.layers()[inj.layer].d_in();
            flip_recall(&inj.flipped, &hook.flagged_vertices(inj.layer), rows)
        });
        println!(
            "delta {d}: test_acc {:.4}, {} rewiring events",
            eval.test_acc,
            hook.events.len()
        );
        runs.push(json!({
            "delta": delta,
            "test_acc": eval.test_acc,
            "best_val_acc": out.history.best_val_acc(),
            "events": hook.events.len(),
            "flag_snapshots": hook.flags.len(),
            "flipped": injector.as_ref().map(|i| i.flipped.len()),
            "recall": recall,
        }));
    }
    prepare_out(&cmd.common)?;
    write(&cmd.common, "convergence.csv", convergence)?;
    write(&cmd.common, "rewire_events.csv", events)?;
    write(
        &cmd.common,
        "rewire_summary.json",
        serde_json::to_string_pretty(&json!({ "runs": runs }))?,
    )?;
    Ok(())
}

pub fn run_consensus(cmd: &ConsensusCmd) -> Result<()> {
    let sys = if let Some(path) = &cmd.system {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        ConsensusSystem::from_text(&text)?
    } else {
        let path = cmd
            .graph
            .as_ref()
            .expect("clap requires --system or --graph");
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let graph = WeightedGraph::from_edge_list_text(&text)?;
        let x0 = if cmd.x0.is_empty() {
            (0..graph.n()).map(|i| i as f64).collect()
        } else {
            cmd.x0.clone()
        };
        ConsensusSystem::new(consensus_matrix(&graph, cmd.eps)?, x0)?
    };
    let report = spectral_convergence_check(sys.a())?;
    prepare_out(&cmd.common)?;
    let run = simulate(&sys, cmd.tol, cmd.max_steps, true);
    let mean = sys.x0().iter().sum::<f64>() / sys.n().max(1) as f64;
    let mut verdict = json!({
        "verdict": report.verdict,
        "regime": report.regime,
        "spectral_radius": report.spectral_radius,
        "subdominant_radius": report.subdominant_radius,
        "symmetric": report.symmetric,
        "initial_mean": mean,
    });
    match run {
        Ok(run) => {
            verdict["steps"] = json!(run.steps);
            verdict["reached"] = json!(run.reached);
            verdict["final_state"] = json!(run.x);
            write(
                &cmd.common,
                "trajectory.csv",
                trajectory_csv(&run.trajectory),
            )?;
            write(
                &cmd.common,
                "verdict.json",
                serde_json::to_string_pretty(&verdict)?,
            )?;
            println!(
                "{:?}: {} after {} steps",
                report.verdict,
                if run.reached {
                    "agreement"
                } else {
                    "no agreement"
                },
                run.steps
            );
            Ok(())
        }
        Err(e) => {
            verdict["diverged"] = json!(true);
            write(
                &cmd.common,
                "verdict.json",
                serde_json::to_string_pretty(&verdict)?,
            )?;
            Err(e.into())
        }
    }
}

pub fn run_spectra(cmd: &SpectraCmd) -> Result<()> {
    let data = dataset(&cmd.data, cmd.common.seed)?;
    let model = checkpoint::load(&cmd.checkpoint, cmd.activation)
        .with_context(|| format!("loading {}", cmd.checkpoint.display()))?;
    let pass = model.forward(&data)?;
    let mut log = SpectraLog::default();
    log.record(cmd.epoch, pass.hidden_states())?;
    prepare_out(&cmd.common)?;
    write(&cmd.common, "spectra.csv", log.to_csv())?;
    Ok(())
}

pub fn require_data(d: &DataArgs) -> Result<(), String> {
    if d.sbm || d.data.is_some() {
        Ok(())
    } else {
        Err("one of --data DIR or --sbm is required".into())
    }
}
