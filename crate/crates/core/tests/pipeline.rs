mod common;

use abmlump::analysis::absorption_analysis;
use abmlump::sim::{estimate_matrix, stream_rng, Sampler};
use abmlump::{
    build_micro_chain, check_lumpable, frequency_partition, lump, moran_partition, orbits, parse_model,
    serialize_model, ConfigSpace, Distribution, Error, GeneratorSet, Partition, StochasticMatrix, DEFAULT_CAP,
};
use common::*;

fn read_model(name: &str) -> abmlump::ModelSpec {
    let path = format!("{}/../../models/{name}", env!("CARGO_MANIFEST_DIR"));
    parse_model(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn document_to_fixation() {
    let spec = read_model("voter3.model");
    let micro = build_micro_chain(&spec, DEFAULT_CAP).unwrap();
    let part = orbits(micro.space(), &GeneratorSet::preset("SN", 3, spec.alphabet()).unwrap()).unwrap();
    assert!(part.same_blocks(&frequency_partition(micro.space()).unwrap()));
    let mac = lump(micro.matrix(), &part).unwrap();
    assert_eq!(mac.prob("⟨2,1⟩", "⟨1,2⟩"), Some(q(1, 3)));
    let report = absorption_analysis(mac.matrix()).unwrap();
    let from = part.block_index("⟨2,1⟩").unwrap();
    let to = part.block_index("⟨3,0⟩").unwrap();
    assert!((report.absorption_probability(from, to).unwrap() - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn text_formats_round_trip() {
    let spec = read_model("path3.model");
    assert_eq!(parse_model(&serialize_model(&spec)).unwrap(), spec);
    let micro = build_micro_chain(&spec, DEFAULT_CAP).unwrap();
    let text = micro.matrix().to_text();
    assert_eq!(&StochasticMatrix::parse_text(&text).unwrap(), micro.matrix());
    let part = frequency_partition(micro.space()).unwrap();
    assert_eq!(Partition::parse_text(&part.to_text(), Some(8)).unwrap(), part);
    let mu = Distribution::new(vec![
        q(1, 2),
        q(1, 4),
        q(0, 1),
        q(1, 4),
        q(0, 1),
        q(0, 1),
        q(0, 1),
        q(0, 1),
    ])
    .unwrap();
    assert_eq!(Distribution::parse_text(&mu.to_text(), 8).unwrap(), mu);
}

#[test]
fn document_errors_name_the_problem() {
    let partial = "[model]\nname = x\nattributes = black, white\n[topology]\ncomplete 2\n[rule]\narity 2\nblack black -> black\n[choice]\nfrom-topology uniform\n";
    let err = parse_model(partial).unwrap_err();
    assert!(err.to_string().contains("not total"), "{err}");

    let short = "[model]\nname = x\nattributes = black, white\n[topology]\ncomplete 3\n[rule]\nbuiltin voter\n[choice]\n1 2 1/2\n2 3 1/3\n";
    let err = parse_model(short).unwrap_err();
    assert!(matches!(err, Error::Validation(_)));
    assert!(err.to_string().contains("5/6"), "{err}");
}

#[test]
fn voter_with_three_attributes_lumps_to_simplex() {
    let spec = abmlump::ModelSpec::voter_with_alphabet(
        abmlump::Topology::complete(4).unwrap(),
        abmlump::AttributeAlphabet::new(["r", "g", "b"]).unwrap(),
    )
    .unwrap();
    let micro = build_micro_chain(&spec, DEFAULT_CAP).unwrap();
    let freq = frequency_partition(micro.space()).unwrap();
    assert_eq!(freq.n_blocks(), 15);
    assert!(check_lumpable(micro.matrix(), &freq).unwrap().is_lumpable());
    // Counting one attribute alone is lumpable because the other two are interchangeable.
    let moran = moran_partition(micro.space(), 0).unwrap();
    assert!(check_lumpable(micro.matrix(), &moran).unwrap().is_lumpable());
}

#[test]
fn sampler_false_alarm_rate_is_nominal() {
    // Across many seeds, the fraction of entries beyond 3σ should be close to
    // the two-sided normal tail 0.27%, not zero and not large.
    let spec = read_model("voter3.model");
    let micro = build_micro_chain(&spec, DEFAULT_CAP).unwrap();
    let entries = micro.matrix().nnz() - 2;
    let seeds = 200u64;
    let violations: usize = (0..seeds)
        .map(|s| estimate_matrix(&spec, &micro, 2_000, s, 3.0).unwrap().violations.len())
        .sum();
    let rate = violations as f64 / (entries as f64 * seeds as f64);
    assert!(rate < 0.01, "3σ exceedance rate {rate}");
}

#[test]
fn sampler_reproduces_omega_weights() {
    let spec = read_model("star3.model");
    let space = ConfigSpace::for_model(&spec, DEFAULT_CAP).unwrap();
    let sampler = Sampler::new(&spec);
    let mut rng = stream_rng(11, 0);
    let mut hits = 0u32;
    // From d = (white,black,black) on the star centred at 1, all-black needs
    // the centre as focal agent (1/3); both its neighbours are black.
    for _ in 0..20_000 {
        if sampler.step_index(&space, 1, &mut rng) == 0 {
            hits += 1;
        }
    }
    let micro = build_micro_chain(&spec, DEFAULT_CAP).unwrap();
    assert_eq!(micro.matrix().get(1, 0), q(1, 3));
    let f = hits as f64 / 20_000.0;
    let sigma = (1.0 / 3.0 * 2.0 / 3.0 / 20_000.0f64).sqrt();
    assert!((f - 1.0 / 3.0).abs() < 3.0 * sigma, "{f}");
}
