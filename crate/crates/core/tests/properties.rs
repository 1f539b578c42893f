use std::cmp::Ordering;

use fpisa::analysis::synthetic::{worker_vectors, Distribution};
use fpisa::analysis::{exact_sum, ratio_distribution, truncation_model_sum, Dyadic, ErrorClass};
use fpisa::analysis::{classify, error_distribution};
use fpisa::arith::{add, readout, to_fpisa};
use fpisa::formats::monotone_key;
use fpisa::{AddEvent, Exec, FpFormat, FpisaConfig, FpisaValue, Variant};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

#[test]
fn monotone_key_orders_1e5_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let finite = |rng: &mut ChaCha8Rng| loop {
        let b: u32 = rng.random();
        if !f32::from_bits(b).is_nan() {
            return b;
        }
    };
    for _ in 0..100_000 {
        let (a, b) = (finite(&mut rng), finite(&mut rng));
        let (ka, kb) = (monotone_key(a, FpFormat::FP32).unwrap(), monotone_key(b, FpFormat::FP32).unwrap());
        assert_eq!(ka.cmp(&kb), f32::from_bits(a).total_cmp(&f32::from_bits(b)), "{a:#x} {b:#x}");
    }
}

fn sequence() -> impl Strategy<Value = Vec<u32>> {
    (40u32..200, 0u32..30).prop_flat_map(|(base, spread)| {
        prop::collection::vec(
            (any::<bool>(), base..=base + spread, 0u32..1 << 23).prop_map(|(s, e, f)| ((s as u32) << 31) | (e << 23) | f),
            1..64,
        )
    })
}

fn run(words: &[u32], cfg: &FpisaConfig) -> (FpisaValue, Vec<AddEvent>) {
    let mut state = FpisaValue::ZERO;
    let mut events = Vec::new();
    for &w in words {
        let o = add(state, to_fpisa(w, cfg).unwrap(), cfg);
        events.push(o.event);
        state = o.state;
    }
    (state, events)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    /// Without discarded bits the truncation model is the exact sum.
    #[test]
    fn truncation_model_without_loss_is_exact(words in sequence(), g in 0u32..=3) {
        let cfg = FpisaConfig::fp32(Variant::Exact).with_guard_bits(g);
        let t = truncation_model_sum(&words, &cfg).unwrap();
        let exact = exact_sum(&words, FpFormat::FP32).unwrap();
        if !t.lossy {
            prop_assert_eq!(&t.value, &exact);
        }
        // flooring never raises the value
        prop_assert!(t.value <= exact);
    }

    /// The register run equals the unbounded model unless it overflowed.
    #[test]
    fn register_matches_model(words in sequence(), approx in any::<bool>()) {
        let cfg = FpisaConfig::fp32(if approx { Variant::Approx } else { Variant::Exact });
        let (state, events) = run(&words, &cfg);
        let overflowed = events.contains(&AddEvent::HeadroomOverflow);
        let overwrote = events.iter().any(|e| matches!(e, AddEvent::Overwrite { .. }));
        if !overflowed && !overwrote {
            let t = truncation_model_sum(&words, &cfg).unwrap();
            prop_assert_eq!(readout(&state, &cfg, cfg.default_rounding()).unwrap().bits, t.word);
        }
    }

    /// Exact never overwrites, and every lossy element gets exactly one class.
    #[test]
    fn attribution(words in sequence(), approx in any::<bool>()) {
        let cfg = FpisaConfig::fp32(if approx { Variant::Approx } else { Variant::Exact });
        let (_, events) = run(&words, &cfg);
        let class = classify(events.iter().copied());
        if !approx {
            prop_assert_ne!(class, Some(ErrorClass::Overwrite));
        }
        prop_assert_eq!(class.is_none(), events.iter().all(|e| e.is_none()));
    }
}

#[test]
fn error_classes_cover_every_nonzero_error() {
    for variant in [Variant::Exact, Variant::Approx] {
        let cfg = FpisaConfig::fp32(variant);
        let vectors = worker_vectors(Distribution::LogNormal { sigma: 2.0, mu: 0.0 }, 8, 4000, 5, FpFormat::FP32, Exec::Parallel);
        let h = error_distribution(&vectors, &cfg, Exec::Parallel).unwrap().histogram;
        assert_eq!(h.classes.total(), h.errors);
        assert_eq!(h.errors + h.zero_error, h.elements);
        if variant == Variant::Exact {
            assert_eq!(h.classes.overwrite, 0);
        }
    }
}

/// P(range of `n` standard normals < w), by Simpson quadrature of
/// `n * integral phi(x) (Phi(x + w) - Phi(x))^(n-1) dx`.
fn range_cdf(n: i32, w: f64) -> f64 {
    let z = Normal::new(0.0, 1.0).unwrap();
    let (lo, hi, steps) = (-10.0, 10.0, 4000);
    let h = (hi - lo) / steps as f64;
    let f = |x: f64| z.pdf(x) * (z.cdf(x + w) - z.cdf(x)).powi(n - 1);
    let mut acc = f(lo) + f(hi);
    for i in 1..steps {
        acc += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    n as f64 * acc * h / 3.0
}

#[test]
fn lognormal_ratio_fraction_hits_target() {
    // ln(max/min) of 8 magnitudes is sigma times the range of 8 normals
    let target = 0.83;
    let threshold = 7.0 * std::f64::consts::LN_2;
    let (mut lo, mut hi) = (0.01f64, 20.0f64);
    for _ in 0..60 {
        let mid = (lo + hi) / 2.0;
        if range_cdf(8, threshold / mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let sigma = (lo + hi) / 2.0;
    assert!((range_cdf(8, threshold / sigma) - target).abs() < 1e-9);
    let vectors = worker_vectors(Distribution::LogNormal { sigma, mu: 0.0 }, 8, 50_000, 21, FpFormat::FP32, Exec::Parallel);
    let h = ratio_distribution(&vectors, FpFormat::FP32, Exec::Parallel).unwrap();
    assert_eq!(h.defined, 50_000);
    assert!((h.fraction_below_2_7 - target).abs() <= 0.02, "sigma {sigma}: {}", h.fraction_below_2_7);
}

#[test]
fn dyadic_sum_matches_f64_when_representable() {
    let words: Vec<u32> = [1.5f32, -0.25, 1024.0, 3.0].iter().map(|v| v.to_bits()).collect();
    assert_eq!(exact_sum(&words, FpFormat::FP32).unwrap().to_f64(), 1028.25);
    assert_eq!(Dyadic::from_i64(3, -1).cmp(&Dyadic::from_i64(6, -2)), Ordering::Equal);
}
