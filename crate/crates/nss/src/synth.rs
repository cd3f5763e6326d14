//! Synthetic benchmark files: training and test records from one random
//! generator plus the generator itself as a checkpoint.

use std::path::{Path, PathBuf};

use nss_core::data::{synth_system, SynthOptions, SynthSystem};
use nss_core::{Dataset, EstimatorKind, Normalizer, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::Checkpoint;
use crate::error::Result;
use crate::io::{create_dir, write_csv};

/// Generator plus a second, independently excited record for testing.
#[derive(Debug, Clone)]
pub struct SynthBenchmark {
    pub system: SynthSystem,
    pub test: Dataset,
    pub test_clean_y: Vec<f64>,
}

pub fn synth_benchmark(seed: u64, opts: SynthOptions, n_test: usize) -> Result<SynthBenchmark> {
    let system = synth_system(seed, opts)?;
    // the test input comes from its own stream so it does not depend on `n`
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let (mut test, test_clean_y) = system.excite(&mut rng, n_test, opts.noise_std)?;
    test.name = "synth_test".into();
    Ok(SynthBenchmark { system, test, test_clean_y })
}

/// The generator as a checkpoint: identity normalizer, ZERO estimator.
pub fn generator_checkpoint(sys: &SynthSystem) -> Checkpoint {
    let spec = sys.model.spec;
    Checkpoint {
        model_spec: spec,
        config: TrainConfig { est_type: EstimatorKind::Zero, seq_est_len: 10 * spec.n_x, normalize: false, ..TrainConfig::default() },
        normalizer: Normalizer::identity(spec.n_u, spec.n_y),
        params: sys.params.clone(),
        best_val_loss: None,
        iteration: 0,
        rng_digest: 0,
    }
}

/// Writes `train.csv`, `test.csv` and `generator.json` into `dir`.
pub fn write_benchmark(bench: &SynthBenchmark, dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let paths = [dir.join("train.csv"), dir.join("test.csv"), dir.join("generator.json")];
    write_csv(&paths[0], &bench.system.data)?;
    write_csv(&paths[1], &bench.test)?;
    generator_checkpoint(&bench.system).save(&paths[2])?;
    Ok(paths.to_vec())
}
