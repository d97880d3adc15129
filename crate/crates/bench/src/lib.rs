//! Shared fixtures for the benchmarks: models at the default sizes over the
//! bundled synthetic corpus.

use acgan_core::adversarial::{Dataset, Pipeline};
use acgan_core::config::Config;
use acgan_core::corpus::EncodedSentence;
use acgan_core::discriminator::Discriminator;
use acgan_core::generator::Generator;

pub struct Fixture {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub sentences: Vec<EncodedSentence>,
}

pub fn fixture() -> Fixture {
    let cfg = Config::default();
    let data = Dataset::load(&cfg).expect("bundled grammar");
    let p = Pipeline::new(&cfg, &data).expect("pipeline");
    Fixture {
        generator: p.new_generator().expect("generator"),
        discriminator: p.new_discriminator().expect("discriminator"),
        sentences: p.disc_corpus.iter().take(64).cloned().collect(),
    }
}
