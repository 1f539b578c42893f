use std::fmt::Write as _;

use serde::Serialize;

/// Error classes, most severe first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    HeadroomOverflow,
    Overwrite,
    Rounding,
}

impl ErrorClass {
    pub fn name(self) -> &'static str {
        match self {
            ErrorClass::HeadroomOverflow => "headroom_overflow",
            ErrorClass::Overwrite => "overwrite",
            ErrorClass::Rounding => "rounding",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub rounding: u64,
    pub overwrite: u64,
    pub headroom_overflow: u64,
}

impl ClassCounts {
    pub fn get(&self, class: ErrorClass) -> u64 {
        match class {
            ErrorClass::Rounding => self.rounding,
            ErrorClass::Overwrite => self.overwrite,
            ErrorClass::HeadroomOverflow => self.headroom_overflow,
        }
    }

    fn bump(&mut self, class: ErrorClass) {
        match class {
            ErrorClass::Rounding => self.rounding += 1,
            ErrorClass::Overwrite => self.overwrite += 1,
            ErrorClass::HeadroomOverflow => self.headroom_overflow += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.rounding + self.overwrite + self.headroom_overflow
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Bucket {
    pub label: String,
    pub count: u64,
}

/// Lowest and highest decade edges: 1e-12 and 1e0.
pub const LOW_DECADE: i32 = -12;
pub const HIGH_DECADE: i32 = 0;

fn edge(k: i32) -> f64 {
    format!("1e{k}").parse().expect("float literal")
}

/// Absolute errors in decade buckets `[1e-12, 1e0)`, with an underflow
/// bucket below and an overflow bucket from `1e0` up. Zero errors are only
/// counted in `zero_error`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorHistogram {
    pub elements: u64,
    pub zero_error: u64,
    pub errors: u64,
    pub max_abs_error: f64,
    pub buckets: Vec<Bucket>,
    pub classes: ClassCounts,
}

impl Default for ErrorHistogram {
    fn default() -> Self {
        let mut buckets = vec![Bucket { label: format!("(0,1e{LOW_DECADE})"), count: 0 }];
        for k in LOW_DECADE..HIGH_DECADE {
            buckets.push(Bucket { label: format!("[1e{k},1e{})", k + 1), count: 0 });
        }
        buckets.push(Bucket { label: format!("[1e{HIGH_DECADE},inf]"), count: 0 });
        ErrorHistogram { elements: 0, zero_error: 0, errors: 0, max_abs_error: 0.0, buckets, classes: ClassCounts::default() }
    }
}

impl ErrorHistogram {
    pub fn bucket_index(abs_error: f64) -> usize {
        if abs_error < edge(LOW_DECADE) {
            return 0;
        }
        let mut i = 1;
        for k in LOW_DECADE + 1..=HIGH_DECADE {
            if abs_error < edge(k) {
                return i;
            }
            i += 1;
        }
        i
    }

    /// Records one element. `class` is required for nonzero errors.
    pub fn record(&mut self, abs_error: f64, class: Option<ErrorClass>) {
        self.elements += 1;
        if abs_error == 0.0 {
            self.zero_error += 1;
            return;
        }
        self.errors += 1;
        self.max_abs_error = self.max_abs_error.max(abs_error);
        self.buckets[Self::bucket_index(abs_error)].count += 1;
        self.classes.bump(class.unwrap_or(ErrorClass::Rounding));
    }

    pub fn bucket(&self, label: &str) -> Option<u64> {
        self.buckets.iter().find(|b| b.label == label).map(|b| b.count)
    }

    fn frac(n: u64, d: u64) -> f64 {
        if d == 0 {
            0.0
        } else {
            n as f64 / d as f64
        }
    }

    /// `bucket,count,fraction` rows. Bucket and class fractions are of all
    /// nonzero errors; `zero_error` is a fraction of elements.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bucket,count,fraction\n");
        for b in &self.buckets {
            writeln!(s, "{},{},{}", b.label, b.count, Self::frac(b.count, self.errors)).unwrap();
        }
        for class in [ErrorClass::Rounding, ErrorClass::Overwrite, ErrorClass::HeadroomOverflow] {
            let n = self.classes.get(class);
            writeln!(s, "class:{},{},{}", class.name(), n, Self::frac(n, self.errors)).unwrap();
        }
        writeln!(s, "zero_error,{},{}", self.zero_error, Self::frac(self.zero_error, self.elements)).unwrap();
        writeln!(s, "elements,{},1", self.elements).unwrap();
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RatioBucket {
    /// Bucket `[2^log2, 2^(log2+1))`.
    pub log2: i64,
    pub count: u64,
}

/// Element-wise max/min magnitude ratios. Elements with a zero among the
/// workers have no ratio and are counted apart.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioHistogram {
    pub elements: u64,
    pub defined: u64,
    pub zero_containing: u64,
    pub all_zero: u64,
    pub buckets: Vec<RatioBucket>,
    /// Fraction of defined ratios below `2^7`.
    pub fraction_below_2_7: f64,
}

impl RatioHistogram {
    pub fn from_classes(classes: impl IntoIterator<Item = RatioClass>) -> Self {
        let mut counts: Vec<u64> = Vec::new();
        let mut h = RatioHistogram {
            elements: 0,
            defined: 0,
            zero_containing: 0,
            all_zero: 0,
            buckets: Vec::new(),
            fraction_below_2_7: 0.0,
        };
        for c in classes {
            h.elements += 1;
            match c {
                RatioClass::AllZero => h.all_zero += 1,
                RatioClass::ZeroContaining => h.zero_containing += 1,
                RatioClass::Log2(k) => {
                    h.defined += 1;
                    let k = k as usize;
                    if counts.len() <= k {
                        counts.resize(k + 1, 0);
                    }
                    counts[k] += 1;
                }
            }
        }
        let below: u64 = counts.iter().take(7).sum();
        h.fraction_below_2_7 = if h.defined == 0 { 0.0 } else { below as f64 / h.defined as f64 };
        h.buckets = counts.into_iter().enumerate().map(|(k, count)| RatioBucket { log2: k as i64, count }).collect();
        h
    }

    pub fn count(&self, log2: i64) -> u64 {
        self.buckets.iter().find(|b| b.log2 == log2).map_or(0, |b| b.count)
    }

    /// `bucket,count,fraction` rows; ratio fractions are of defined ratios.
    pub fn to_csv(&self) -> String {
        let frac = |n: u64, d: u64| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let mut s = String::from("bucket,count,fraction\n");
        for b in &self.buckets {
            writeln!(s, "[2^{},2^{}),{},{}", b.log2, b.log2 + 1, b.count, frac(b.count, self.defined)).unwrap();
        }
        writeln!(s, "zero_containing,{},{}", self.zero_containing, frac(self.zero_containing, self.elements)).unwrap();
        writeln!(s, "all_zero,{},{}", self.all_zero, frac(self.all_zero, self.elements)).unwrap();
        writeln!(s, "below_2^7,{},{}", (self.fraction_below_2_7 * self.defined as f64).round(), self.fraction_below_2_7)
            .unwrap();
        writeln!(s, "elements,{},1", self.elements).unwrap();
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioClass {
    AllZero,
    ZeroContaining,
    /// `floor(log2(max/min))`.
    Log2(u32),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decade_buckets() {
        assert_eq!(ErrorHistogram::bucket_index(1e-13), 0);
        assert_eq!(ErrorHistogram::bucket_index(1e-12), 1);
        assert_eq!(ErrorHistogram::bucket_index(5e-3), 10);
        assert_eq!(ErrorHistogram::bucket_index(0.999), 12);
        assert_eq!(ErrorHistogram::bucket_index(1.0), 13);
        assert_eq!(ErrorHistogram::bucket_index(f64::INFINITY), 13);
        let h = ErrorHistogram::default();
        assert_eq!(h.buckets.len(), 14);
        assert_eq!(h.buckets[10].label, "[1e-3,1e-2)");
    }

    #[test]
    fn records_sum_up() {
        let mut h = ErrorHistogram::default();
        h.record(0.0, None);
        h.record(1.0, Some(ErrorClass::Overwrite));
        h.record(1e-9, None);
        assert_eq!((h.elements, h.errors, h.zero_error), (3, 2, 1));
        assert_eq!(h.buckets.iter().map(|b| b.count).sum::<u64>(), h.errors);
        assert_eq!(h.classes.total(), h.errors);
        assert_eq!(h.bucket("[1e0,inf]"), Some(1));
        assert!(h.to_csv().contains("class:overwrite,1,0.5\n"));
    }

    #[test]
    fn ratio_fraction() {
        let h = RatioHistogram::from_classes([
            RatioClass::Log2(2),
            RatioClass::Log2(9),
            RatioClass::ZeroContaining,
            RatioClass::AllZero,
        ]);
        assert_eq!(h.count(2), 1);
        assert_eq!(h.defined, 2);
        assert_eq!(h.fraction_below_2_7, 0.5);
        assert_eq!(h.buckets.len(), 10);
    }
}
