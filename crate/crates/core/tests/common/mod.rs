#![allow(dead_code)]

use adaptprompt::corpus::{generate_synthetic, Corpus, SenseHierarchy, SensePrior, SyntheticSpec};
use adaptprompt::encoder::EncoderConfig;

pub fn small_corpus(seed: u64, n_train: usize, noise_rate: f64) -> Corpus {
    let spec = SyntheticSpec {
        seed,
        n_train,
        n_dev: n_train / 4,
        n_test: n_train / 4,
        noise_rate,
        connectives_per_third_sense: 3,
        sense_prior: SensePrior::Uniform,
        ..Default::default()
    };
    generate_synthetic(&spec, &SenseHierarchy::bundled())
}

pub fn tiny_encoder(vocab_size: usize) -> EncoderConfig {
    EncoderConfig {
        d_model: 8,
        n_heads: 2,
        n_layers: 1,
        d_ff: 16,
        max_len: 100,
        vocab_size,
        dropout_rate: 0.0,
        tie_output: true,
    }
}
