mod analyze;
mod central;
mod fed_run;

pub use analyze::{cmd_analyze, cmd_match, cmd_prefvec};
pub use central::cmd_train_central;
pub use fed_run::cmd_fed_run;
pub use shuffle_test::cmd_shuffle_test;

use fedpan::data::{gen_synthetic, load_idx, Dataset};
use fedpan::rng::{stream_seed, tags};
use fedpan::Execution;

use crate::error::{CliError, CliResult};
use crate::output::OutDir;
use crate::settings::{DataSource, Settings};

pub struct Context {
    pub settings: Settings,
    pub exec: Execution,
    pub out: OutDir,
}

/// Train and test sets. Synthetic data draws train and test rows from one
/// generator so they share class means.
pub fn load_data(settings: &Settings) -> CliResult<(Dataset, Dataset)> {
    let d = &settings.data;
    match d.source {
        DataSource::Synthetic => {
            let seed = d.seed.unwrap_or(settings.seed);
            let all = gen_synthetic(
                d.train_samples + d.test_samples,
                d.dim,
                d.classes,
                d.separation,
                stream_seed(seed, tags::DATA, 0),
            )?;
            Ok(all.split(d.train_samples, stream_seed(seed, tags::DATA, 1))?)
        }
        DataSource::Idx => {
            let path = |p: &Option<std::path::PathBuf>, name: &str| {
                p.clone()
                    .ok_or_else(|| CliError::Config(format!("data.{name} is required")))
            };
            let train = load_idx(
                path(&d.train_images, "train_images")?,
                path(&d.train_labels, "train_labels")?,
            )?;
            let test = load_idx(
                path(&d.test_images, "test_images")?,
                path(&d.test_labels, "test_labels")?,
            )?;
            if train.dim() != test.dim() {
                return Err(CliError::Data(
                    "train and test images differ in size".into(),
                ));
            }
            let classes = train.classes().max(test.classes());
            Ok((with_classes(train, classes)?, with_classes(test, classes)?))
        }
    }
}

fn with_classes(ds: Dataset, classes: usize) -> CliResult<Dataset> {
    if ds.classes() == classes {
        return Ok(ds);
    }
    Ok(Dataset::new(
        ds.features().clone(),
        ds.labels().to_vec(),
        classes,
    )?)
}
