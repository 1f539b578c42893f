use fpisa::arith::{add, readout, to_fpisa};
use fpisa::pipeline::{AluProfile, FpisaPipeline, PipelineError};
use fpisa::{FpFormat, FpisaConfig, FpisaValue, Variant};
use proptest::prelude::*;

fn configs() -> Vec<(FpisaConfig, AluProfile)> {
    let mut out = Vec::new();
    for (fmt, r) in [(FpFormat::FP32, 32), (FpFormat::FP16, 16), (FpFormat::BF16, 16), (FpFormat::FP16, 32)] {
        for g in [0, 1, 3] {
            let cfg = FpisaConfig::new(fmt, Variant::Exact).with_register_width(r).with_guard_bits(g);
            if cfg.validate().is_err() {
                continue;
            }
            out.push((cfg, AluProfile::extended()));
            out.push((cfg.with_variant(Variant::Approx), AluProfile::extended()));
            out.push((cfg.with_variant(Variant::Approx), AluProfile::baseline()));
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn builtin_programs_track_core(ops in prop::collection::vec((0usize..3, any::<u32>(), 0u8..10), 1..120)) {
        for (cfg, profile) in configs() {
            let mut pipe = FpisaPipeline::new(cfg, 3, profile).unwrap();
            let mut states = [FpisaValue::ZERO; 3];
            for &(slot, raw, kind) in &ops {
                let word = raw & cfg.format.word_mask();
                match kind {
                    0 => {
                        let want = readout(&states[slot], &cfg, cfg.default_rounding()).unwrap().bits;
                        prop_assert_eq!(pipe.read(slot).unwrap(), want);
                    }
                    1 => {
                        pipe.clear(slot).unwrap();
                        states[slot] = FpisaValue::ZERO;
                    }
                    _ => match to_fpisa(word, &cfg) {
                        Err(_) => prop_assert_eq!(pipe.add(slot, word), Err(PipelineError::Dropped)),
                        Ok(inc) => {
                            let want = add(states[slot], inc, &cfg);
                            let got = pipe.add(slot, word).unwrap();
                            prop_assert_eq!(got.before, states[slot]);
                            prop_assert_eq!(pipe.state(slot).unwrap(), want.state, "{:?} {:#x}", cfg, word);
                            states[slot] = want.state;
                        }
                    },
                }
            }
        }
    }
}
