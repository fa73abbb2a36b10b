//! Generates a handful of seen and shifted ("unseen") samples, writes them as
//! PNG pairs and shows one augmentation.
//!
//!     cargo run --example synth_corpus -- /tmp/synth

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use skipgraph::pipeline::corpus::{read_corpus, write_corpus};
use skipgraph::synth::{augment, generate, AugmentPolicy, DomainShift, SynthSpec};

fn main() -> skipgraph::Result<()> {
    let root = std::env::args().nth(1).unwrap_or_else(|| "synth_demo".into());
    let seen = SynthSpec { count: 6, ..SynthSpec::default() };
    let unseen = seen.clone().with_shift(DomainShift::unseen());

    for (name, spec) in [("seen", &seen), ("unseen", &unseen)] {
        let samples = generate(spec)?;
        let dir = std::path::Path::new(&root).join(name);
        write_corpus(&dir, spec, &samples)?;
        let back = read_corpus(&dir)?;
        assert_eq!(back, samples, "PNG round trip is lossless");
        let areas: Vec<usize> = samples.iter().map(|s| s.mask_area()).collect();
        println!("{name}: {} samples in {}, mask areas {areas:?}", samples.len(), dir.display());
    }

    let sample = &generate(&seen)?[0];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let aug = augment(sample, &AugmentPolicy::binary(), &mut rng);
    println!("augmented mask area {} (was {})", aug.mask_area(), sample.mask_area());
    Ok(())
}
