//! Run configuration: built-in defaults, then a TOML file, then flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use fpisa::pipeline::{AluProfile, ProfileName};
use fpisa::{FpFormat, FpisaConfig, Variant};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    Exact,
    Approx,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Exact => Variant::Exact,
            VariantArg::Approx => Variant::Approx,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileArg {
    Baseline,
    Extended,
}

/// Settings shared by every command. Unset flags fall back to the config
/// file, then to defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML file with defaults for these settings
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// fp32, fp16 or bf16
    #[arg(long, global = true)]
    pub format: Option<String>,
    #[arg(long, value_enum, global = true)]
    pub variant: Option<VariantArg>,
    /// Mantissa register width in bits (16 or 32)
    #[arg(long, global = true)]
    pub register_width: Option<u32>,
    #[arg(long, global = true)]
    pub guard_bits: Option<u32>,
    #[arg(long, value_enum, global = true)]
    pub profile: Option<ProfileArg>,
    /// Instruction slots per stage before the validator warns
    #[arg(long, global = true)]
    pub instruction_slots: Option<usize>,
    /// Write the main output here instead of stdout
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub output_format: Option<OutputFormat>,
    /// Seed for synthetic inputs
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Fail with exit code 3 on overwrite or headroom-overflow events
    #[arg(long, global = true)]
    pub strict: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub format: Option<String>,
    pub variant: Option<VariantArg>,
    pub register_width: Option<u32>,
    pub guard_bits: Option<u32>,
    pub profile: Option<ProfileArg>,
    pub instruction_slots: Option<usize>,
    pub output_format: Option<OutputFormat>,
    pub seed: Option<u64>,
    pub strict: Option<bool>,
    pub workers: Option<usize>,
    pub slots: Option<usize>,
    pub elements_per_packet: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub fpisa: FpisaConfig,
    pub profile: AluProfile,
    pub output: Option<PathBuf>,
    pub output_format: OutputFormat,
    pub seed: u64,
    pub strict: bool,
    pub file: FileConfig,
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs, default_format: OutputFormat) -> Result<Self> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let format_name = args.format.clone().or(file.format.clone()).unwrap_or_else(|| "fp32".into());
        let format: FpFormat = format_name.parse().map_err(|e| anyhow::anyhow!("{e}"))?;
        let variant: Variant = args.variant.or(file.variant).unwrap_or(VariantArg::Exact).into();
        let mut fpisa = FpisaConfig::new(format, variant);
        if let Some(r) = args.register_width.or(file.register_width) {
            fpisa = fpisa.with_register_width(r);
        } else if format.total_bits() == 16 {
            fpisa = fpisa.with_register_width(16);
            if fpisa.validate().is_err() {
                fpisa = fpisa.with_register_width(32);
            }
        }
        if let Some(g) = args.guard_bits.or(file.guard_bits) {
            fpisa = fpisa.with_guard_bits(g);
        }
        fpisa.validate()?;
        let mut profile = match args.profile.or(file.profile).unwrap_or(ProfileArg::Extended) {
            ProfileArg::Baseline => AluProfile::named(ProfileName::Baseline),
            ProfileArg::Extended => AluProfile::named(ProfileName::Extended),
        };
        if let Some(n) = args.instruction_slots.or(file.instruction_slots) {
            if n == 0 {
                bail!("--instruction-slots must be at least 1");
            }
            profile.instruction_slots = n;
        }
        Ok(RunConfig {
            fpisa,
            profile,
            output: args.output.clone(),
            output_format: args.output_format.or(file.output_format).unwrap_or(default_format),
            seed: args.seed.or(file.seed).unwrap_or(0),
            strict: args.strict || file.strict.unwrap_or(false),
            file,
        })
    }
}
