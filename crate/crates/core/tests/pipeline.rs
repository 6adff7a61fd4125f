//! End-to-end use of the public API: realizations, free elements and the
//! solver-backed quantities on small qubit examples.

use dynres_core::choi::{random_channel, ChannelChoi, SystemPair};
use dynres_core::conic::IpmSettings;
use dynres_core::linalg::max_abs_diff;
use dynres_core::problems::{conversion_distance, diamond_distance, g_value, monotone_f, Form};
use dynres_core::supermap::{
    apply_superchannel, random_realization, superchoi_from_realization, validate_superchannel,
};
use dynres_core::theory::{
    is_free_channel, sample_free_channel, sample_free_superchannel, ChannelParties, Factorization, Parties, Side,
    TheorySpec,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn qubit() -> SystemPair {
    SystemPair::new(2, 2)
}

fn ppt() -> TheorySpec {
    let w = ChannelParties { input: Factorization::alpha(2), output: Factorization::beta(2) };
    TheorySpec::ppt(Parties::from_sides(&w, &w)).unwrap()
}

#[test]
fn realization_and_choi_agree() {
    let mut r = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let real = random_realization(qubit(), qubit(), 2, &mut r).unwrap();
        let theta = superchoi_from_realization(&real).unwrap();
        assert!(validate_superchannel(&theta).valid);
        let n = random_channel(qubit(), 2, &mut r).unwrap();
        let via_choi = apply_superchannel(&theta, &n).unwrap();
        let via_circuit = real.apply(&n).unwrap();
        assert!(max_abs_diff(via_choi.matrix(), via_circuit.matrix()) < 1e-10);
    }
}

#[test]
fn free_superchannels_keep_channels_free() {
    let t = ppt();
    let mut r = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..5 {
        let n = sample_free_channel(&t, Side::A, qubit(), &mut r).unwrap();
        let theta = sample_free_superchannel(&t, qubit(), qubit(), &mut r).unwrap();
        let m = apply_superchannel(&theta, &n).unwrap();
        let rep = is_free_channel(&m, &t, Side::B).unwrap();
        assert!(rep.free, "pt min eig {}", rep.pt_min_eig);
        let d = conversion_distance(&n, &m, &t, Form::Primal, &IpmSettings::default()).unwrap();
        assert!(d.value < 1e-6, "{}", d.value);
    }
}

#[test]
fn free_channels_attain_g() {
    let t = ppt();
    let s = IpmSettings::default();
    let mut r = ChaCha8Rng::seed_from_u64(13);
    let n = sample_free_channel(&t, Side::A, qubit(), &mut r).unwrap();
    let p = random_channel(qubit(), 2, &mut r).unwrap();
    let f = monotone_f(&n, &p, &t, Form::Both, &s).unwrap();
    let g = g_value(&p, &t, &s).unwrap();
    assert!((f.value - g.value).abs() < 1e-6, "{} vs {}", f.value, g.value);
}

#[test]
fn diamond_to_completely_depolarizing() {
    let d =
        diamond_distance(&ChannelChoi::identity(2), &ChannelChoi::depolarizing(2, 2), &IpmSettings::default()).unwrap();
    assert!((d.value - 0.75).abs() < 1e-6, "{}", d.value);
}
