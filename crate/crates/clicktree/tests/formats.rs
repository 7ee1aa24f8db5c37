use std::io::{self, BufReader, Read};
use std::path::PathBuf;

use clicktree::core::ingest::{ingest, WindowingPolicy};
use clicktree::core::sim::{simulate, simulate_stream, SimulationConfig};
use clicktree::core::{DetectorTree, EmitterEnsemble, NoiseModel};
use clicktree::formats::{counts, stream};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// Hands out at most `chunk` bytes per read.
struct Chunked<R> {
    inner: R,
    chunk: usize,
}

impl<R: Read> Read for Chunked<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = buf.len().min(self.chunk);
        self.inner.read(&mut buf[..n])
    }
}

fn chunked(bytes: &[u8], chunk: usize) -> BufReader<Chunked<&[u8]>> {
    BufReader::with_capacity(chunk.max(1), Chunked { inner: bytes, chunk })
}

#[test]
fn golden_stream_parses_to_golden_counts() {
    let expected = counts::read(&mut std::fs::read(data("golden.counts")).unwrap().as_slice()).unwrap();
    for name in ["golden.tags", "golden.tagsbin"] {
        let bytes = std::fs::read(data(name)).unwrap();
        let parsed = stream::read(&bytes[..]).unwrap();
        assert_eq!(parsed.events.len(), 100, "{name}");
        let (got, diagnostics) = ingest(&parsed, WindowingPolicy::from_header(&parsed.header).unwrap()).unwrap();
        assert_eq!(got, expected, "{name}");
        assert_eq!(diagnostics.events, 100);
        let (_, streamed, _) = stream::ingest_reader(&bytes[..], |_| {}).unwrap();
        assert_eq!(streamed, expected, "{name}");
    }
}

#[test]
fn golden_files_are_byte_stable() {
    let text = std::fs::read(data("golden.tags")).unwrap();
    let parsed = stream::read(&text[..]).unwrap();
    let mut again = Vec::new();
    stream::write(&parsed, stream::Encoding::Text, &mut again).unwrap();
    assert_eq!(again, text);
    let mut binary = Vec::new();
    stream::write(&parsed, stream::Encoding::Binary, &mut binary).unwrap();
    assert_eq!(binary, std::fs::read(data("golden.tagsbin")).unwrap());
    let c = std::fs::read(data("golden.counts")).unwrap();
    assert_eq!(counts::to_string(&counts::read(&mut c.as_slice()).unwrap()).as_bytes(), &c[..]);
}

#[test]
fn golden_files_match_the_simulator() {
    let mut config = SimulationConfig::new(
        EmitterEnsemble::uniform(3, 0.3).unwrap(),
        NoiseModel::new(0.05).unwrap(),
        DetectorTree::balanced(4, 0.8).unwrap(),
        136,
        2024,
    );
    config.emit_stream = true;
    let mut text = Vec::new();
    stream::write(&simulate_stream(&config).unwrap(), stream::Encoding::Text, &mut text).unwrap();
    assert_eq!(text, std::fs::read(data("golden.tags")).unwrap());
    assert_eq!(
        counts::to_string(&simulate(&config).unwrap()).as_bytes(),
        std::fs::read(data("golden.counts")).unwrap()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ingestion_is_chunking_invariant(seed in any::<u64>(), pulses in 1u64..20_000, chunk in 1usize..64, binary in any::<bool>()) {
        let mut config = SimulationConfig::new(
            EmitterEnsemble::uniform(2, 0.4).unwrap(),
            NoiseModel::new(0.1).unwrap(),
            DetectorTree::balanced(3, 0.7).unwrap(),
            pulses,
            seed,
        );
        config.emit_stream = true;
        let encoding = if binary { stream::Encoding::Binary } else { stream::Encoding::Text };
        let mut bytes = Vec::new();
        stream::write(&simulate_stream(&config).unwrap(), encoding, &mut bytes).unwrap();
        let whole = stream::ingest_reader(&bytes[..], |_| {}).unwrap();
        let pieces = stream::ingest_reader(chunked(&bytes, chunk), |_| {}).unwrap();
        prop_assert_eq!(&whole.1, &pieces.1);
        prop_assert_eq!(whole.2, pieces.2);
        prop_assert_eq!(whole.1, simulate(&config).unwrap());
    }

    #[test]
    fn n_trials_depends_only_on_duration(seed in any::<u64>(), pulses in 1u64..5_000, lambda in 0.0..2.0f64) {
        let mut config = SimulationConfig::new(
            EmitterEnsemble::empty(),
            NoiseModel::new(lambda).unwrap(),
            DetectorTree::balanced(2, 0.5).unwrap(),
            pulses,
            seed,
        );
        config.emit_stream = true;
        let s = simulate_stream(&config).unwrap();
        let (c, _) = ingest(&s, WindowingPolicy::from_header(&s.header).unwrap()).unwrap();
        prop_assert_eq!(c.n_trials(), pulses);
    }
}

#[test]
fn ten_random_configs_round_trip_through_files() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9);
    let mut next = || rng.random::<f64>();
    for i in 0..10 {
        let n = 1 + (next() * 4.0) as usize;
        let xi: Vec<f64> = (0..n).map(|_| next()).collect();
        let mut config = SimulationConfig::new(
            EmitterEnsemble::uniform((next() * 6.0) as usize, next()).unwrap(),
            NoiseModel::new(next() * 0.5).unwrap(),
            DetectorTree::with_efficiencies(xi).unwrap(),
            1 + (next() * 100_000.0) as u64,
            i,
        );
        config.emit_stream = true;
        for encoding in [stream::Encoding::Text, stream::Encoding::Binary] {
            let mut bytes = Vec::new();
            stream::write(&simulate_stream(&config).unwrap(), encoding, &mut bytes).unwrap();
            let parsed = stream::read(&bytes[..]).unwrap();
            let (got, _) = ingest(&parsed, WindowingPolicy::from_header(&parsed.header).unwrap()).unwrap();
            assert_eq!(got, simulate(&config).unwrap(), "config {i}");
        }
    }
}
