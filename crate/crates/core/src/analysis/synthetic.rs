//! Seeded generators for gradient-like vectors and query rows.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal, Uniform};

use crate::exec::Exec;
use crate::formats::FpFormat;
use crate::query::Row;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    /// Uniform on `[lo, hi)`.
    Uniform { lo: f64, hi: f64 },
    /// Random sign, magnitude `exp(mu + sigma * z)` with `z` standard normal.
    LogNormal { sigma: f64, mu: f64 },
}

impl FromStr for Distribution {
    type Err = String;

    /// `uniform(lo,hi)`, `lognormal(sigma)` or `lognormal(sigma,mu)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, rest) = s.split_once('(').ok_or_else(|| format!("bad distribution {s:?}"))?;
        let args = rest.strip_suffix(')').ok_or_else(|| format!("bad distribution {s:?}"))?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}")))
            .collect::<Result<_, _>>()?;
        if nums.iter().any(|x| !x.is_finite()) {
            return Err(format!("{s:?}: parameters must be finite"));
        }
        match (name.trim().to_ascii_lowercase().as_str(), nums.as_slice()) {
            ("uniform", &[lo, hi]) if lo < hi => Ok(Distribution::Uniform { lo, hi }),
            ("lognormal", &[sigma]) if sigma >= 0.0 => Ok(Distribution::LogNormal { sigma, mu: 0.0 }),
            ("lognormal", &[sigma, mu]) if sigma >= 0.0 => Ok(Distribution::LogNormal { sigma, mu }),
            _ => Err(format!("bad distribution {s:?} (expected uniform(lo,hi) or lognormal(sigma[,mu]))")),
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distribution::Uniform { lo, hi } => write!(f, "uniform({lo},{hi})"),
            Distribution::LogNormal { sigma, mu } => write!(f, "lognormal({sigma},{mu})"),
        }
    }
}

impl Distribution {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Uniform { lo, hi } => Uniform::new(lo, hi).expect("lo < hi").sample(rng),
            Distribution::LogNormal { sigma, mu } => {
                let z: f64 = StandardNormal.sample(rng);
                let mag = (mu + sigma * z).exp();
                if rng.random::<bool>() {
                    -mag
                } else {
                    mag
                }
            }
        }
    }
}

/// Rounds to `fmt`, saturating at the largest finite value.
fn to_word(v: f64, fmt: FpFormat) -> u32 {
    let max = fmt.to_f64(((fmt.exponent_field_max() - 1) << fmt.mantissa_bits()) | fmt.fraction_mask());
    fmt.from_f64(v.clamp(-max, max))
}

/// `n_workers` vectors of `len` words. Worker `w` draws from stream `w` of
/// a ChaCha8 generator seeded with `seed`, so the output does not depend on
/// the execution policy.
pub fn worker_vectors(dist: Distribution, n_workers: usize, len: usize, seed: u64, fmt: FpFormat, exec: Exec) -> Vec<Vec<u32>> {
    exec.map_range(n_workers, |w| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(w as u64);
        (0..len).map(|_| to_word(dist.sample(&mut rng), fmt)).collect()
    })
}

/// Rows with keys uniform over `0..n_groups`.
pub fn rows(dist: Distribution, n_rows: usize, n_groups: u64, seed: u64, fmt: FpFormat) -> Vec<Row> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_rows)
        .map(|_| {
            let key = rng.random_range(0..n_groups.max(1));
            Row { key, value: to_word(dist.sample(&mut rng), fmt) }
        })
        .collect()
}
