use std::f64::consts::E;

use fishtank_core::fishmonger::coder::{fixed_prob, Decoder, Encoder};
use fishtank_core::fishmonger::{
    mantissa_bits, FishmongerParams, FishmongerSketch, QuantizedEstimate,
};
use fishtank_core::harness::hbb::HyperBitBit;
use fishtank_core::info::{ll_curves, pcsa_curves};
use fishtank_core::sketch::{AnySketch, OffsetMode, SketchKind, SketchParams};
use fishtank_core::OracleSeed;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = SketchParams> {
    (
        prop::sample::select(vec![1.5, 2.0, E, 16.0]),
        prop::sample::select(vec![1u32, 4, 16, 33]),
        prop::sample::select(vec![
            OffsetMode::None,
            OffsetMode::Uniform,
            OffsetMode::Random,
        ]),
    )
        .prop_map(|(q, m, o)| SketchParams::new(q, m, o).unwrap())
}

fn plain_kind() -> impl Strategy<Value = SketchKind> {
    prop::sample::select(vec![SketchKind::Pcsa, SketchKind::Ll])
}

fn build(kind: SketchKind, p: SketchParams, seed: u64, elems: &[u64]) -> AnySketch {
    let mut s = AnySketch::new(kind, p, seed).unwrap();
    elems.iter().for_each(|&e| {
        s.insert(e);
    });
    s
}

fn merged(a: &AnySketch, b: &AnySketch) -> AnySketch {
    let mut out = a.clone();
    out.merge(b).unwrap();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn merge_is_a_semilattice(
        kind in plain_kind(),
        p in params(),
        seed in any::<u64>(),
        a in prop::collection::vec(0u64..5000, 0..200),
        b in prop::collection::vec(0u64..5000, 0..200),
        c in prop::collection::vec(0u64..5000, 0..200),
    ) {
        let (sa, sb, sc) = (build(kind, p, seed, &a), build(kind, p, seed, &b), build(kind, p, seed, &c));
        prop_assert_eq!(merged(&sa, &sb), merged(&sb, &sa));
        prop_assert_eq!(merged(&merged(&sa, &sb), &sc), merged(&sa, &merged(&sb, &sc)));
        prop_assert_eq!(merged(&sa, &sa), sa.clone());
        let all: Vec<u64> = a.iter().chain(&b).copied().collect();
        prop_assert_eq!(merged(&sa, &sb), build(kind, p, seed, &all));
    }

    #[test]
    fn state_ignores_order_and_repeats(
        kind in plain_kind(),
        p in params(),
        seed in any::<u64>(),
        elems in prop::collection::vec(0u64..1000, 0..300),
        shuffle_seed in any::<u64>(),
    ) {
        let mut permuted = elems.clone();
        let o = OracleSeed::new(shuffle_seed);
        permuted.sort_by_key(|&e| o.bits(e, 0, 0));
        permuted.extend_from_slice(&elems[..elems.len() / 2]);
        prop_assert_eq!(build(kind, p, seed, &elems), build(kind, p, seed, &permuted));
    }

    #[test]
    fn files_round_trip(
        kind in prop::sample::select(vec![
            SketchKind::Pcsa,
            SketchKind::Ll,
            SketchKind::MartingalePcsa,
            SketchKind::MartingaleLl,
        ]),
        p in params(),
        seed in any::<u64>(),
        n in 0u64..3000,
    ) {
        let s = build(kind, p, seed, &(0..n).collect::<Vec<_>>());
        let bytes = s.to_bytes();
        let back = AnySketch::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
        prop_assert_eq!(back, s);
    }

    #[test]
    fn martingale_estimate_grows_with_the_state(
        p in params(),
        seed in any::<u64>(),
        elems in prop::collection::vec(0u64..2000, 1..300),
    ) {
        let mut s = AnySketch::new(SketchKind::MartingaleLl, p, seed).unwrap();
        let mut last = 0.0;
        for e in elems {
            let changed = s.insert(e);
            let now = s.estimate().lambda_hat;
            prop_assert_eq!(changed, now > last);
            prop_assert!(now >= last);
            last = now;
        }
    }

    #[test]
    fn fishmonger_round_trip_and_budget(
        m in prop::sample::select(vec![4u32, 16, 64]),
        seed in any::<u64>(),
        n in 0u64..20_000,
    ) {
        let params = FishmongerParams::new(m).unwrap();
        let mut s = FishmongerSketch::new(params, seed).unwrap();
        for e in 0..n {
            s.insert(e);
        }
        prop_assert!(s.payload_bits() + params.estimate_bits() <= params.budget_bits());
        let bytes = s.to_bytes();
        let back = FishmongerSketch::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
        prop_assert_eq!(back.state(), s.state());
        prop_assert_eq!(back.estimate().lambda_hat, s.estimate().lambda_hat);
    }
}

proptest! {
    #[test]
    fn coder_is_lossless_and_near_entropy(
        symbols in prop::collection::vec((any::<bool>(), 1e-12f64..1.0), 0..2000),
    ) {
        let mut enc = Encoder::new();
        let mut cost = 0.0;
        for &(bit, p0) in &symbols {
            let fp = fixed_prob(p0);
            enc.encode(bit, fp);
            let p = fp as f64 / 2f64.powi(64);
            cost -= if bit { (1.0 - p).log2() } else { p.log2() };
        }
        let out = enc.finish();
        prop_assert!(out.len() as f64 <= cost + 2.0 + 1e-6, "{} vs {}", out.len(), cost);
        let mut dec = Decoder::new(&out);
        for &(bit, p0) in &symbols {
            prop_assert_eq!(dec.decode(fixed_prob(p0)), bit);
        }
    }

    #[test]
    fn quantizer_brackets_from_above(
        x in 1e-9f64..1e18,
        m in 1u32..4096,
        u in prop::sample::select(vec![16u32, 32, 64]),
    ) {
        let v = QuantizedEstimate::round_up(x, mantissa_bits(m, u)).value();
        prop_assert!(v >= x);
        prop_assert!(v <= x * (1.0 + 1.0 / (m as f64 * u as f64)));
    }

    #[test]
    fn hbb_weight_stays_below_32(
        hashes in prop::collection::vec((0u32..64, 1u32..40), 0..3000),
    ) {
        let mut s = HyperBitBit::new();
        let mut level = 0;
        for (j, k) in hashes {
            s.insert_hash(j, k);
            prop_assert!(s.weight() <= 31);
            prop_assert!(s.l >= level);
            level = s.l;
        }
    }

    #[test]
    fn curves_repeat_every_factor_of_q(
        q in prop::sample::select(vec![2.0, E, 16.0]),
        log_lambda in -5.0f64..30.0,
    ) {
        let l = log_lambda.exp();
        for curve in [pcsa_curves, ll_curves] {
            let (a, b) = (curve(q, l).unwrap(), curve(q, q * l).unwrap());
            prop_assert!((a.entropy_bits - b.entropy_bits).abs() < 1e-9);
            prop_assert!((a.norm_info - b.norm_info).abs() < 1e-9);
        }
    }
}
