//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.
//!
//! Reference values here come from small integer models written for the
//! tests (an `i128` mantissa register and a floor-to-24-bit packer), not
//! from the library's own oracles.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use fpisa::aggregation::{aggregate_vectors, run_protocol, SessionConfig};
use fpisa::analysis::error_distribution;
use fpisa::analysis::synthetic::{rows, worker_vectors, Distribution};
use fpisa::arith::{add, add_approx, readout, to_fpisa};
use fpisa::lpm::{clz_lpm, shared_table};
use fpisa::pipeline::{builtin_program, validate, AluProfile, Capability, FpisaPipeline, PipelineError};
use fpisa::query::{groupby_having_extreme, groupby_sum, topn, Direction, Extreme, GroupResult, Row};
use fpisa::{AddEvent, Exec, FpFormat, FpisaConfig, FpisaValue, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BIN: &str = env!("CARGO_BIN_EXE_fpisa");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 worked example", worked_example),
        ("2 headroom capacity", headroom_capacity),
        ("3 overwrite threshold", overwrite_threshold),
        ("4 truncation oracle", truncation_oracle),
        ("5 rounding direction", rounding_direction),
        ("6 clz table", clz_table),
        ("7 pipeline lockstep", pipeline_lockstep),
        ("8 aggregation", aggregation),
        ("9 query pruning", query_pruning),
        ("10 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let o = run();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("{status} criterion {name}: {} [{:.1}s]", o.detail, start.elapsed().as_secs_f64());
        failed += !o.pass as u32;
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

// ---- test-side reference models (FP32) ----

/// `(sign, biased exponent, 24-bit significand)`; zero and subnormals give 0.
fn parts(bits: u32) -> (bool, i64, i128) {
    let e = ((bits >> 23) & 0xFF) as i64;
    if e == 0 {
        return (false, 0, 0);
    }
    assert!(e < 255, "finite input");
    (bits >> 31 == 1, e, ((bits & 0x7F_FFFF) | 0x80_0000) as i128)
}

fn signed(bits: u32) -> (i64, i128) {
    let (neg, e, sig) = parts(bits);
    (e, if neg { -sig } else { sig })
}

/// `m * 2^scale` floored to a 24-bit significand and packed. Panics outside
/// the normal range, which the generators here stay inside.
fn floor_to_f32(m: i128, scale: i64) -> u32 {
    if m == 0 {
        return 0;
    }
    let neg = m < 0;
    let mag = m.unsigned_abs();
    let mut p = 127 - mag.leading_zeros() as i64;
    let drop = p - 23;
    let mut sig = if drop > 0 {
        let rem = mag & ((1u128 << drop) - 1);
        (mag >> drop) + (neg && rem != 0) as u128
    } else {
        mag << -drop
    };
    if sig == 1 << 24 {
        sig >>= 1;
        p += 1;
    }
    let e = p + scale + 127;
    assert!((1..=254).contains(&e), "result exponent {e} out of range");
    ((neg as u32) << 31) | ((e as u32) << 23) | (sig as u32 & 0x7F_FFFF)
}

/// Exact-variant alignment on an unbounded register, FP32, no guard bits.
fn trunc_exact(words: &[u32]) -> (u32, bool) {
    let (mut exp, mut mant, mut lossy) = (0i64, 0i128, false);
    for &w in words {
        let (e, m) = signed(w);
        if m == 0 {
            continue;
        }
        if e <= exp {
            let d = (exp - e).min(127) as u32;
            lossy |= (m >> d) << d != m;
            mant += m >> d;
        } else {
            let d = (e - exp).min(127) as u32;
            lossy |= (mant >> d) << d != mant;
            mant = (mant >> d) + m;
            exp = e;
        }
    }
    (floor_to_f32(mant, exp - 150), lossy)
}

/// Position of the first addition whose exact-variant sum leaves a 32-bit
/// signed register, if any.
fn first_overflow_exact(words: &[u32]) -> Option<usize> {
    let (mut exp, mut mant) = (0i64, 0i128);
    for (i, &w) in words.iter().enumerate() {
        let (e, m) = signed(w);
        if m == 0 {
            continue;
        }
        let (next_exp, next) = if e <= exp { (exp, mant + (m >> (exp - e).min(127))) } else { (e, (mant >> (e - exp).min(127)) + m) };
        if next.abs() >= 1 << 31 {
            return Some(i);
        }
        (exp, mant) = (next_exp, next);
    }
    None
}

/// Exact sum as `(mantissa, scale)`.
fn exact_sum(words: &[u32]) -> (i128, i64) {
    let min = words.iter().map(|&w| signed(w)).filter(|p| p.1 != 0).map(|p| p.0).min();
    let Some(min) = min else { return (0, 0) };
    let m = words.iter().map(|&w| signed(w)).filter(|p| p.1 != 0).map(|(e, m)| m << (e - min)).sum();
    (m, min - 150)
}

fn word_at_scale(bits: u32, scale: i64) -> i128 {
    let (e, m) = signed(bits);
    if m == 0 {
        0
    } else {
        m << (e - 150 - scale)
    }
}

fn random_word<R: Rng>(rng: &mut R, exp_lo: u32, exp_hi: u32, signs: Option<bool>) -> u32 {
    let neg = signs.unwrap_or_else(|| rng.random());
    let e = rng.random_range(exp_lo..=exp_hi);
    ((neg as u32) << 31) | (e << 23) | rng.random_range(0..1u32 << 23)
}

fn run_cli(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("run fpisa")
}

fn fp32(variant: Variant) -> FpisaConfig {
    FpisaConfig::fp32(variant)
}

// ---- criteria ----

fn worked_example() -> Outcome {
    let start = Instant::now();
    let out = run_cli(&["add", "3.0", "1.0", "--format", "fp32", "--variant", "exact"]);
    let elapsed = start.elapsed();
    let text = String::from_utf8_lossy(&out.stdout);
    let needed = [
        "decoded (+, 128, 1.1b)",
        "decoded (+, 127, 1.0b)",
        "aligned addend 0.1b x 2^1",
        "(10.0b x 2^1)",
        "shift-right-1",
    ];
    let missing: Vec<_> = needed.iter().filter(|n| !text.contains(*n)).collect();
    let last = text.lines().last().unwrap_or("");
    let ok = out.status.success()
        && missing.is_empty()
        && last == "result = 4.0 (0x40800000)"
        && elapsed < Duration::from_secs(1);
    outcome(ok, format!("missing {missing:?}, last line {last:?}, {} ms", elapsed.as_millis()))
}

fn headroom_capacity() -> Outcome {
    let cfg = fp32(Variant::Exact);
    // 1.99999988 x 2^0: all 24 significand bits set
    let max = to_fpisa(0x3FFF_FFFF, &cfg).unwrap();
    let mut state = FpisaValue::ZERO;
    let mut first_overflow = None;
    for i in 1..=129 {
        let o = add(state, max, &cfg);
        if o.event == AddEvent::HeadroomOverflow {
            first_overflow.get_or_insert(i);
        }
        state = o.state;
    }
    let lib_ok = first_overflow == Some(129) && state.mantissa == 128 * 0xFF_FFFF;

    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for w in 0..129 {
        let p = dir.path().join(format!("w{w}.csv"));
        std::fs::write(&p, "1.99999988\n").unwrap();
        files.push(p.display().to_string());
    }
    let report = dir.path().join("report.json");
    let mut args = vec!["aggregate", "--report", report.to_str().unwrap(), "--workers"];
    args.extend(files.iter().map(String::as_str));
    let out = run_cli(&args);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    let cli_ok = out.status.success()
        && report["event_counts"]["HeadroomOverflow"] == 1
        && report["events"][0]["kind"] == "HeadroomOverflow"
        && report["events"][0]["worker"] == 128;
    outcome(lib_ok && cli_ok, format!("first overflow at addition {first_overflow:?}; CLI report flags worker 128: {cli_ok}"))
}

fn overwrite_threshold() -> Outcome {
    let cfg = fp32(Variant::Approx);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut lossless_7, mut overwrite_8, mut bound_ok, mut overwrites) = (true, true, true, 0u64);
    let mut gap7_overflows = 0u64;
    for _ in 0..100_000 {
        let s = random_word(&mut rng, 1, 246, None);
        let (_, es, ms) = parts(s);
        let state = to_fpisa(s, &cfg).unwrap();

        // gap 7: the incoming mantissa lands shifted, nothing is lost
        let i7 = random_word(&mut rng, es as u32 + 7, es as u32 + 7, None);
        let o = add_approx(state, to_fpisa(i7, &cfg).unwrap(), &cfg);
        let (_, m7) = signed(i7);
        let sum = signed(s).1 + (m7 << 7);
        if sum.abs() < 1 << 31 {
            lossless_7 &= o.event == AddEvent::None && o.state.mantissa as i128 == sum;
        } else {
            gap7_overflows += 1;
            lossless_7 &= o.event == AddEvent::HeadroomOverflow && o.state == state;
        }

        // gap >= 8: overwrite, and the discarded value is below 2^-7 of the incoming
        let gap = rng.random_range(8..=(254 - es as u32).min(40));
        let i8 = random_word(&mut rng, es as u32 + gap, es as u32 + gap, None);
        let o = add_approx(state, to_fpisa(i8, &cfg).unwrap(), &cfg);
        let AddEvent::Overwrite { discarded } = o.event else {
            overwrite_8 = false;
            continue;
        };
        overwrites += 1;
        // |discarded| * 2^7 < |incoming|, compared at the state's scale
        let (_, ei, mi) = parts(i8);
        bound_ok &= discarded == state && (ms << 7) < (mi << (ei - es));
    }
    outcome(
        lossless_7 && overwrite_8 && bound_ok && overwrites == 100_000,
        format!("gap 7 lossless {lossless_7} ({gap7_overflows} sums past the register), gap>=8 overwrites {overwrites}/100000, bound holds {bound_ok}"),
    )
}

fn truncation_oracle() -> Outcome {
    let cfg = fp32(Variant::Exact);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut mismatches, mut exact_mismatches, mut event_free) = (0u64, 0u64, 0u64);
    let mut words = Vec::with_capacity(64);
    for _ in 0..1_000_000 {
        let len = rng.random_range(1..=64);
        let base = rng.random_range(40..=190u32);
        let spread = rng.random_range(0..=30u32);
        words.clear();
        for _ in 0..len {
            words.push(if rng.random_ratio(1, 50) { 0 } else { random_word(&mut rng, base, base + spread, None) });
        }
        let mut state = FpisaValue::ZERO;
        let mut lossy = false;
        for &w in &words {
            let o = add(state, to_fpisa(w, &cfg).unwrap(), &cfg);
            lossy |= !o.event.is_none();
            state = o.state;
        }
        let got = readout(&state, &cfg, cfg.default_rounding()).unwrap().bits;
        let (want, _) = trunc_exact(&words);
        mismatches += (got != want) as u64;
        if !lossy {
            event_free += 1;
            let (m, scale) = exact_sum(&words);
            exact_mismatches += (got != floor_to_f32(m, scale)) as u64;
        }
    }
    outcome(
        mismatches == 0 && exact_mismatches == 0,
        format!("10^6 sequences: {mismatches} oracle mismatches; {event_free} event-free, {exact_mismatches} differ from exact sum"),
    )
}

fn rounding_direction() -> Outcome {
    let cfg = fp32(Variant::Exact);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut violations = 0u64;
    for trial in 0..100_000 {
        let negative = trial % 2 == 1;
        let len = rng.random_range(1..=64);
        let base = rng.random_range(40..=190u32);
        let spread = rng.random_range(0..=30u32);
        let words: Vec<u32> = (0..len).map(|_| random_word(&mut rng, base, base + spread, Some(negative))).collect();
        let mut state = FpisaValue::ZERO;
        for &w in &words {
            state = add(state, to_fpisa(w, &cfg).unwrap(), &cfg).state;
        }
        let got = readout(&state, &cfg, cfg.default_rounding()).unwrap().bits;
        let (exact, scale) = exact_sum(&words);
        let got = word_at_scale(got, scale);
        let ok = if negative { got.abs() >= exact.abs() } else { got <= exact };
        violations += !ok as u64;
    }
    outcome(violations == 0, format!("{violations} violations in 10^5 trials (half all-negative)"))
}

fn clz_table() -> Outcome {
    let table = shared_table(32);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    for lz in 0..=32u32 {
        for _ in 0..100 {
            let v: u32 = if lz == 32 { 0 } else { (1u32 << (31 - lz)) | (rng.random::<u32>() & ((1u32 << (31 - lz)) - 1)) };
            mismatches += (clz_lpm(v as u64, table) != v.leading_zeros()) as u32;
        }
    }
    outcome(mismatches == 0, format!("33 classes x 100 fills, {mismatches} mismatches"))
}

fn pipeline_lockstep() -> Outcome {
    let configs = [
        (fp32(Variant::Exact), AluProfile::extended()),
        (fp32(Variant::Approx), AluProfile::extended()),
        (fp32(Variant::Approx), AluProfile::baseline()),
        (fp32(Variant::Exact).with_guard_bits(2), AluProfile::extended()),
        (FpisaConfig::new(FpFormat::FP16, Variant::Approx).with_register_width(16), AluProfile::baseline()),
        (FpisaConfig::new(FpFormat::BF16, Variant::Exact).with_register_width(16).with_guard_bits(1), AluProfile::extended()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut cases, mut mismatches) = (0u64, 0u64);
    let per_config = 1_000_000 / configs.len() as u64 + 1;
    for (cfg, profile) in &configs {
        let fmt = cfg.format;
        let m = fmt.mantissa_bits();
        let slots = 4;
        let mut pipe = FpisaPipeline::new(*cfg, slots, profile.clone()).unwrap();
        let mut states = vec![FpisaValue::ZERO; slots];
        for i in 0..per_config {
            let slot = rng.random_range(0..slots);
            if i % 41 == 0 {
                pipe.clear(slot).unwrap();
                states[slot] = FpisaValue::ZERO;
            }
            // mostly near the slot's exponent, so gaps around the headroom get exercised
            let word = if rng.random_ratio(1, 8) || states[slot].exponent == 0 {
                rng.random::<u32>() & fmt.word_mask()
            } else {
                let top = fmt.exponent_field_max() as i64 - 1;
                let e = (states[slot].exponent as i64 + rng.random_range(-12..=12)).clamp(0, top) as u32;
                ((rng.random::<bool>() as u32) << (fmt.total_bits() - 1)) | (e << m) | (rng.random::<u32>() & fmt.fraction_mask())
            };
            cases += 1;
            let ok = match to_fpisa(word, cfg) {
                Err(_) => pipe.add(slot, word) == Err(PipelineError::Dropped) && pipe.state(slot).unwrap() == states[slot],
                Ok(inc) => {
                    let want = add(states[slot], inc, cfg);
                    let got = pipe.add(slot, word).unwrap();
                    let r = readout(&want.state, cfg, cfg.default_rounding()).unwrap().bits;
                    let ok = got.before == states[slot]
                        && pipe.state(slot).unwrap() == want.state
                        && got.result == r
                        && got.overflow == (want.event == AddEvent::HeadroomOverflow)
                        // the pipeline flags every replacement; core only counts discarded nonzero states
                        && (got.overwrite && !got.before.is_zero()) == matches!(want.event, AddEvent::Overwrite { .. });
                    states[slot] = want.state;
                    ok
                }
            };
            mismatches += !ok as u64;
        }
    }
    let exact = builtin_program(&fp32(Variant::Exact), 4, &AluProfile::extended()).unwrap();
    let v = validate(&exact, &AluProfile::baseline());
    let missing = v.missing_capabilities();
    let caps_ok = missing.len() == 2
        && missing.contains(&Capability::VariableShift)
        && missing.contains(&Capability::StatefulReadShiftAddWrite);
    outcome(
        mismatches == 0 && cases >= 1_000_000 && caps_ok,
        format!("{cases} cases, {mismatches} mismatches; exact on baseline misses {missing:?}"),
    )
}

fn aggregation() -> Outcome {
    let cfg = fp32(Variant::Exact);
    let vectors = worker_vectors(Distribution::Uniform { lo: -1.0, hi: 1.0 }, 8, 100_000, 8, FpFormat::FP32, Exec::Parallel);
    let config = SessionConfig { n_workers: 8, n_slots: 128, elements_per_packet: 64, fpisa: cfg, profile: AluProfile::extended() };
    let run = run_protocol(&vectors, config).unwrap();
    let mut column = Vec::with_capacity(8);
    let mut mismatches = 0;
    for e in 0..100_000 {
        column.clear();
        column.extend(vectors.iter().map(|v| v[e]));
        mismatches += (run.result[e] != trunc_exact(&column).0) as u32;
    }
    let functional = aggregate_vectors(&vectors, &cfg, Exec::Parallel).unwrap();
    let overwrites = run.events.iter().filter(|e| matches!(e.event, AddEvent::Overwrite { .. })).count();
    let report = error_distribution(&vectors, &cfg, Exec::Parallel).unwrap();
    let c = &report.histogram.classes;
    outcome(
        mismatches == 0 && functional.result == run.result && overwrites == 0 && c.overwrite == 0,
        format!(
            "8 x 10^5: {mismatches} oracle mismatches; errors: {} rounding, {} overwrite, {} overflow; {} exact",
            c.rounding, c.overwrite, c.headroom_overflow, report.histogram.zero_error
        ),
    )
}

fn query_pruning() -> Outcome {
    let fmt = FpFormat::FP32;
    let table = rows(Distribution::Uniform { lo: -1000.0, hi: 1000.0 }, 1_000_000, 64, 9, fmt);
    let value = |w: u32| f32::from_bits(w);
    let mut ok = true;
    let mut notes = Vec::new();

    for (dir, n) in [(Direction::Largest, 10), (Direction::Smallest, 100)] {
        let r = topn(&table, n, dir, fmt).unwrap();
        let mut sorted: Vec<f32> = table.iter().map(|r| value(r.value)).collect();
        sorted.sort_by(|a, b| a.total_cmp(b));
        if dir == Direction::Largest {
            sorted.reverse();
        }
        let got: Vec<f32> = r.result.iter().map(|r| value(r.value)).collect();
        ok &= got == sorted[..n];
        notes.push(format!("top{n} {dir:?} drop {:.4}", r.drop_fraction()));
    }

    for which in [Extreme::Max, Extreme::Min] {
        let r = groupby_having_extreme(&table, which, fmt).unwrap();
        let mut want: BTreeMap<u64, f32> = BTreeMap::new();
        for row in &table {
            let v = value(row.value);
            want.entry(row.key)
                .and_modify(|m| *m = if which == Extreme::Max { m.max(v) } else { m.min(v) })
                .or_insert(v);
        }
        let got: BTreeMap<u64, f32> = r.result.iter().map(|(&k, &w)| (k, value(w))).collect();
        ok &= got == want;
        notes.push(format!("{which:?} drop {:.4}", r.drop_fraction()));
    }

    // few large groups push some partial sums past the register; many small ones stay inside it
    let cfg = fp32(Variant::Exact);
    let many = rows(Distribution::Uniform { lo: -1000.0, hi: 1000.0 }, 1_000_000, 4096, 10, fmt);
    for (name, t) in [("64 groups", &table), ("4096 groups", &many)] {
        let sums = groupby_sum(t, &cfg, Exec::Parallel).unwrap();
        let mut by_group: BTreeMap<u64, Vec<(usize, u32)>> = BTreeMap::new();
        for (i, Row { key, value }) in t.iter().enumerate() {
            by_group.entry(*key).or_default().push((i, *value));
        }
        let (mut mismatches, mut overflowed) = (0, 0);
        for (k, members) in &by_group {
            let words: Vec<u32> = members.iter().map(|m| m.1).collect();
            let want = match first_overflow_exact(&words) {
                Some(pos) => {
                    overflowed += 1;
                    GroupResult::HeadroomOverflow { row: members[pos].0 }
                }
                None => GroupResult::Sum { value: trunc_exact(&words).0 },
            };
            mismatches += (sums.groups.get(k) != Some(&want)) as u32;
        }
        ok &= mismatches == 0 && sums.groups.len() == by_group.len();
        if name == "4096 groups" {
            ok &= overflowed == 0;
        }
        notes.push(format!("gb-sum {name}: {mismatches} mismatches, {overflowed} overflowed"));
    }
    outcome(ok, notes.join(", "))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("rows.csv"), "key,value\ng1,3.0\ng2,-1.5\ng1,1.0\nbroken\ng2,2.0\n").unwrap();
    let rows_path = d.join("rows.csv");
    let rows_path = rows_path.to_str().unwrap();
    let commands: Vec<Vec<&str>> = vec![
        vec!["add", "3.0", "1.0"],
        vec!["add", "1.0", "256.0", "--variant", "approx", "--output-format", "json"],
        vec!["validate", "--builtin", "approx", "--profile", "baseline", "--output-format", "json"],
        vec!["validate", "--builtin", "exact", "--emit-program"],
        vec!["aggregate", "--synthetic", "uniform(-1,1)", "--n", "8", "--len", "100000", "--seed", "7"],
        vec!["aggregate", "--synthetic", "lognormal(3)", "--n", "4", "--len", "5000", "--engine", "functional", "--variant", "approx", "--output-format", "json"],
        vec!["query", "--op", "topn", "--synthetic", "uniform(-5,5)", "--rows", "20000", "--n", "5"],
        vec!["query", "--op", "gb-sum", "--input", rows_path],
        vec!["query", "--op", "gb-extreme", "--synthetic", "lognormal(2)", "--rows", "20000", "--groups", "30", "--output-format", "json"],
        vec!["analyze", "--error", "--synthetic", "uniform(-1,1)", "--n", "8", "--len", "20000", "--variant", "approx"],
        vec!["analyze", "--ratio", "--synthetic", "lognormal(2)", "--n", "8", "--len", "20000", "--output-format", "json"],
    ];
    let mut differing = Vec::new();
    for (i, args) in commands.iter().enumerate() {
        let run = |tag: &str| {
            let out = d.join(format!("{i}-{tag}.out"));
            let report = d.join(format!("{i}-{tag}.report"));
            let mut full: Vec<&str> = args.clone();
            let (o, r) = (out.to_str().unwrap().to_string(), report.to_str().unwrap().to_string());
            full.extend(["--output", &o]);
            if matches!(args[0], "aggregate" | "query") {
                full.extend(["--report", &r]);
            }
            let res = run_cli(&full);
            (res.status.code(), read(&out), read(&report), res.stderr)
        };
        let (a, b) = (run("a"), run("b"));
        if a != b || a.0 != Some(0) {
            differing.push(args.join(" "));
        }
    }
    outcome(differing.is_empty(), format!("{} commands rerun; differing or failing: {differing:?}", commands.len()))
}

fn read(p: &Path) -> Option<Vec<u8>> {
    std::fs::read(p).ok()
}
