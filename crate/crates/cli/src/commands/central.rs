use fedpan::network::checkpoint;
use fedpan::rng::{stream_seed, tags};
use fedpan::train::{evaluate, train_with_callback};
use fedpan::{MlpModel, SeededRng};
use serde::Serialize;

use super::{load_data, Context};
use crate::error::CliResult;
use crate::output::header;
use crate::settings::Settings;

#[derive(Serialize)]
struct Summary<'a> {
    command: &'static str,
    seed: u64,
    initial_accuracy: f64,
    final_accuracy: f64,
    best_accuracy: f64,
    steps: usize,
    config: &'a Settings,
}

/// Trains one model on the full training set, logging test accuracy per
/// epoch. Writes `curve.csv`, `model.ckpt` and `summary.json`.
pub fn cmd_train_central(ctx: &Context) -> CliResult<()> {
    let s = &ctx.settings;
    let (train, test) = load_data(s)?;
    let mut sizes = vec![train.dim()];
    sizes.extend(&s.model.hidden);
    sizes.push(train.classes());
    let mut model = MlpModel::new(&sizes, s.model.pan(), stream_seed(s.seed, tags::INIT, 0))?;
    let initial_accuracy = evaluate(&model, &test)?;

    let mut curve = ctx.out.csv(
        "curve.csv",
        &header(&["epoch", "train_loss", "test_accuracy"]),
    )?;
    curve.write_record(["0".to_string(), String::new(), initial_accuracy.to_string()])?;
    let mut best = initial_accuracy;
    let mut last = initial_accuracy;
    let indices: Vec<usize> = (0..train.len()).collect();
    // the data order depends on the seed only, never on the model settings
    let mut rng = SeededRng::derive(s.seed, tags::DATA, 2);
    let stats = train_with_callback(
        &mut model,
        &train,
        &indices,
        &s.train.train_config(),
        None,
        None,
        &mut rng,
        |epoch, m, loss| {
            last = evaluate(m, &test)?;
            best = best.max(last);
            curve
                .write_record([epoch.to_string(), loss.to_string(), last.to_string()])
                .map_err(|e| fedpan::Error::Io(e.into()))?;
            Ok(())
        },
    )?;
    curve.flush()?;
    checkpoint::save(&model, ctx.out.path("model.ckpt"))?;
    ctx.out.write_json(
        "summary.json",
        &Summary {
            command: "train-central",
            seed: s.seed,
            initial_accuracy,
            final_accuracy: last,
            best_accuracy: best,
            steps: stats.steps,
            config: s,
        },
    )
}
