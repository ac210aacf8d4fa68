use fedpan::alignment::{
    collect_activations, distance_matrix, fusion_curve, match_costs, preference_vectors,
    uniform_grid, FusionCurve,
};
use fedpan::data::Dataset;
use fedpan::fed::weight_divergence;
use fedpan::network::checkpoint;
use fedpan::MlpModel;
use serde::Serialize;

use super::{load_data, Context};
use crate::error::{CliError, CliResult};
use crate::output::{header, write_matrix};
use crate::settings::Settings;

#[derive(Serialize)]
struct MatchRow {
    model: usize,
    layer: usize,
    match_ratio: f64,
    cost: f64,
}

#[derive(Serialize)]
struct PrefRow {
    model: usize,
    layer: usize,
    /// Fraction of neurons whose preferred class equals model 0's.
    agreement_with_model0: f64,
}

#[derive(Serialize)]
struct DivergenceRow {
    layer: usize,
    divergence: f64,
}

#[derive(Serialize, Default)]
struct Report<'a> {
    command: &'static str,
    seed: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    divergence: Vec<DivergenceRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    matching: Vec<MatchRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    preference: Vec<PrefRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fusion: Option<FusionCurve>,
    config: Option<&'a Settings>,
}

struct Inputs {
    models: Vec<MlpModel>,
    test: Dataset,
    probe: Dataset,
}

fn inputs(ctx: &Context, min_models: usize) -> CliResult<Inputs> {
    let a = &ctx.settings.analysis;
    if a.checkpoints.len() < min_models {
        return Err(CliError::Config(format!(
            "analysis.checkpoints needs at least {min_models} path(s), got {}",
            a.checkpoints.len()
        )));
    }
    for p in &a.checkpoints {
        if !p.is_file() {
            return Err(CliError::Config(format!(
                "no checkpoint at {}",
                p.display()
            )));
        }
    }
    let models = a
        .checkpoints
        .iter()
        .map(checkpoint::load)
        .collect::<Result<Vec<_>, _>>()?;
    for m in &models[1..] {
        models[0].check_same_architecture(m)?;
    }
    let (_, test) = load_data(&ctx.settings)?;
    if test.dim() != models[0].input_dim() {
        return Err(CliError::Data(format!(
            "checkpoint expects {} inputs, data has {}",
            models[0].input_dim(),
            test.dim()
        )));
    }
    let n = a.probe_samples.min(test.len());
    let probe = test.subset(&(0..n).collect::<Vec<_>>())?;
    Ok(Inputs {
        models,
        test,
        probe,
    })
}

fn hidden_layers(ctx: &Context, model: &MlpModel, allow_output: bool) -> CliResult<Vec<usize>> {
    let top = if allow_output {
        model.depth()
    } else {
        model.depth() - 1
    };
    let layers = &ctx.settings.analysis.layers;
    if layers.is_empty() {
        return Ok((1..model.depth()).collect());
    }
    if let Some(l) = layers.iter().find(|&&l| l == 0 || l > top) {
        return Err(CliError::Config(format!(
            "analysis layer {l} outside 1..={top}"
        )));
    }
    Ok(layers.clone())
}

/// Matches every model's neurons to model 0's. Writes `match.csv` with one
/// row per (model, layer, neuron).
fn run_match(ctx: &Context, inp: &Inputs, report: &mut Report) -> CliResult<()> {
    let layers = hidden_layers(ctx, &inp.models[0], false)?;
    let features = inp.probe.features();
    let mut w = ctx.out.csv(
        "match.csv",
        &header(&["model", "layer", "neuron", "assigned", "distance"]),
    )?;
    for &layer in &layers {
        let reference = collect_activations(&inp.models[0], features, layer)?;
        for (k, m) in inp.models.iter().enumerate().skip(1) {
            let other = collect_activations(m, features, layer)?;
            let costs = distance_matrix(&reference, &other)?;
            let r = match_costs(&costs);
            for (i, &j) in r.assignment.iter().enumerate() {
                w.write_record([
                    k.to_string(),
                    layer.to_string(),
                    i.to_string(),
                    j.to_string(),
                    costs[i][j].to_string(),
                ])?;
            }
            if ctx.settings.analysis.dump_matrices {
                let dense = fedpan::Matrix::from_rows(&costs)?;
                write_matrix(&ctx.out, &format!("distance_m{k}_l{layer}.csv"), &dense)?;
            }
            report.matching.push(MatchRow {
                model: k,
                layer,
                match_ratio: r.match_ratio,
                cost: r.cost,
            });
        }
    }
    w.flush()?;
    Ok(())
}

/// Preference vectors of every model. Writes `prefvec.csv` with columns
/// `model, layer, neuron, argmax, p0..p{C-1}`.
fn run_prefvec(ctx: &Context, inp: &Inputs, report: &mut Report) -> CliResult<()> {
    let layers = hidden_layers(ctx, &inp.models[0], true)?;
    let classes = inp.models[0].output_dim();
    let mut cols = header(&["model", "layer", "neuron", "argmax"]);
    cols.extend((0..classes).map(|c| format!("p{c}")));
    let mut w = ctx.out.csv("prefvec.csv", &cols)?;
    for &layer in &layers {
        let mut reference = None;
        for (k, m) in inp.models.iter().enumerate() {
            let pref = preference_vectors(m, &inp.probe, layer)?;
            for j in 0..pref.values.rows() {
                let mut rec = vec![
                    k.to_string(),
                    layer.to_string(),
                    j.to_string(),
                    pref.argmax[j].to_string(),
                ];
                rec.extend(pref.values.row(j).iter().map(|v| v.to_string()));
                w.write_record(&rec)?;
            }
            if ctx.settings.analysis.dump_matrices {
                write_matrix(
                    &ctx.out,
                    &format!("preference_m{k}_l{layer}.csv"),
                    &pref.values,
                )?;
            }
            let base = reference.get_or_insert_with(|| pref.clone());
            report.preference.push(PrefRow {
                model: k,
                layer,
                agreement_with_model0: pref.agreement(base),
            });
        }
    }
    w.flush()?;
    Ok(())
}

fn run_divergence(ctx: &Context, inp: &Inputs, report: &mut Report) -> CliResult<()> {
    let refs: Vec<&MlpModel> = inp.models.iter().collect();
    let mut w = ctx
        .out
        .csv("divergence.csv", &header(&["layer", "divergence"]))?;
    for layer in 1..=inp.models[0].depth() {
        let d = weight_divergence(&refs, layer)?;
        w.write_record([layer.to_string(), d.to_string()])?;
        report.divergence.push(DivergenceRow {
            layer,
            divergence: d,
        });
    }
    w.flush()?;
    Ok(())
}

fn run_fusion(ctx: &Context, inp: &Inputs, report: &mut Report) -> CliResult<()> {
    let grid = uniform_grid(ctx.settings.analysis.fusion_points.max(2));
    let curve = fusion_curve(&inp.models[0], &inp.models[1], &inp.test, &grid, ctx.exec)?;
    let mut w = ctx.out.csv("fusion.csv", &header(&["mu", "accuracy"]))?;
    for (mu, acc) in curve.mu.iter().zip(&curve.accuracy) {
        w.write_record([mu.to_string(), acc.to_string()])?;
    }
    w.flush()?;
    report.fusion = Some(curve);
    Ok(())
}

fn report<'a>(ctx: &'a Context, command: &'static str) -> Report<'a> {
    Report {
        command,
        seed: ctx.settings.seed,
        config: Some(&ctx.settings),
        ..Default::default()
    }
}

/// Divergence, matching, preference vectors and the fusion curve of the
/// first two checkpoints. Writes the four CSVs and `analysis.json`.
pub fn cmd_analyze(ctx: &Context) -> CliResult<()> {
    let inp = inputs(ctx, 2)?;
    let mut rep = report(ctx, "analyze");
    run_divergence(ctx, &inp, &mut rep)?;
    run_match(ctx, &inp, &mut rep)?;
    run_prefvec(ctx, &inp, &mut rep)?;
    run_fusion(ctx, &inp, &mut rep)?;
    ctx.out.write_json("analysis.json", &rep)
}

pub fn cmd_match(ctx: &Context) -> CliResult<()> {
    let inp = inputs(ctx, 2)?;
    let mut rep = report(ctx, "match");
    run_match(ctx, &inp, &mut rep)?;
    ctx.out.write_json("match.json", &rep)
}

pub fn cmd_prefvec(ctx: &Context) -> CliResult<()> {
    let inp = inputs(ctx, 1)?;
    let mut rep = report(ctx, "prefvec");
    run_prefvec(ctx, &inp, &mut rep)?;
    ctx.out.write_json("prefvec.json", &rep)
}
