//! Run configuration: flags layered over an optional TOML file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use matchnet::rates::{PsiLowForm, RateOptions, UpsilonCross};
use matchnet::simulator::PassRule;
use matchnet::sweep::{Axis, Format};
use matchnet::{Params, Profile64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Homogeneous,
    Heterogeneous,
    /// Sweep only: rates at a fixed profile, no equilibrium.
    Exogenous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PassRuleArg {
    PsiConsistent,
    UpsilonConsistent,
}

impl From<PassRuleArg> for PassRule {
    fn from(p: PassRuleArg) -> Self {
        match p {
            PassRuleArg::PsiConsistent => PassRule::PsiConsistent,
            PassRuleArg::UpsilonConsistent => PassRule::UpsilonConsistent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsiLowArg {
    Limit,
    Displayed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpsilonCrossArg {
    Symmetric,
    PoolCount,
}

/// Every setting shared by the subcommands. Unset fields fall back to the
/// config file, then to the documented defaults.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// homogeneous | heterogeneous | exogenous [default: homogeneous]
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    /// Direct arrival rate [default: 0.5]
    #[arg(long)]
    pub a: Option<f64>,
    /// Divorce probability [default: 0.015]
    #[arg(long)]
    pub d: Option<f64>,
    /// Socialization cost [default: 0.005]
    #[arg(long)]
    pub c: Option<f64>,
    /// High-type share [default: 0.8]
    #[arg(long)]
    pub h: Option<f64>,
    /// Gain from a high-type spouse [default: 2]
    #[arg(long = "Y")]
    #[serde(rename = "Y")]
    pub y: Option<f64>,
    /// Marriage value in the one-type model [default: 1]
    #[arg(long = "V")]
    #[serde(rename = "V")]
    pub v: Option<f64>,
    /// Agents per gender [default: 20000 for simulate]
    #[arg(long)]
    pub n: Option<usize>,
    /// Common socialization level, sets both types [default: 1.5]
    #[arg(long)]
    pub s: Option<f64>,
    /// High-type socialization
    #[arg(long = "s-h")]
    #[serde(alias = "s-h")]
    pub s_h: Option<f64>,
    /// Low-type socialization
    #[arg(long = "s-l")]
    #[serde(alias = "s-l")]
    pub s_l: Option<f64>,
    /// Swept parameter: a, d, c, h, Y or V [default: a]
    #[arg(long)]
    pub axis: Option<String>,
    /// First grid value [default: 0.3]
    #[arg(long)]
    pub from: Option<f64>,
    /// Last grid value [default: 0.7]
    #[arg(long)]
    pub to: Option<f64>,
    /// Grid step [default: 0.01]
    #[arg(long)]
    pub step: Option<f64>,
    /// Monte Carlo replications [default: 200]
    #[arg(long)]
    pub reps: Option<usize>,
    /// Random seed [default: 2024]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Who may receive a passed date [default: psi-consistent]
    #[arg(long = "pass-rule", value_enum)]
    #[serde(alias = "pass-rule")]
    pub pass_rule: Option<PassRuleArg>,
    /// csv | json
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Output file [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Solver tolerance on |LHS - c| [default: 1e-10 one type, 1e-9 two types]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Low-type friends rate: limit | displayed [default: limit]
    #[arg(long = "psi-low-form", value_enum)]
    #[serde(alias = "psi-low-form")]
    pub psi_low_form: Option<PsiLowArg>,
    /// Low-to-high introduction rate: symmetric | pool-count [default: symmetric]
    #[arg(long = "upsilon-cross", value_enum)]
    #[serde(alias = "upsilon-cross")]
    pub upsilon_cross: Option<UpsilonCrossArg>,
    /// Worker threads [default: all cores]
    #[arg(long, env = "MATCHNET_THREADS")]
    pub threads: Option<usize>,
}

macro_rules! layer {
    ($flags:ident, $file:ident, $($f:ident),*) => {
        Settings { $($f: $flags.$f.or($file.$f)),* }
    };
}

impl Settings {
    /// Fills unset flags from `path`. Flags win.
    pub fn with_file(self, path: Option<&Path>) -> Result<Settings> {
        let Some(path) = path else { return Ok(self) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: Settings = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let flags = self;
        Ok(layer!(
            flags, file, model, a, d, c, h, y, v, n, s, s_h, s_l, axis, from, to, step, reps, seed, pass_rule,
            format, out, tol, psi_low_form, upsilon_cross, threads
        ))
    }

    pub fn model(&self) -> ModelKind {
        self.model.unwrap_or(ModelKind::Homogeneous)
    }

    /// Parameters with defaults applied. The one-type model pins `h = 1`.
    pub fn params(&self) -> Result<Params> {
        let mut p = Params::default();
        if let Some(a) = self.a {
            p.arrival = a;
        }
        if let Some(d) = self.d {
            p.divorce = d;
        }
        if let Some(c) = self.c {
            p.cost = c;
        }
        if let Some(h) = self.h {
            p.high_share = h;
        }
        if let Some(y) = self.y {
            p.high_gain = y;
        }
        if let Some(v) = self.v {
            p.marriage_value = v;
        }
        p.population = self.n;
        if self.model() == ModelKind::Homogeneous {
            if self.h.is_some_and(|h| h != 1.0) {
                bail!("--h {} conflicts with --model homogeneous, which fixes h = 1", self.h.unwrap_or(1.0));
            }
            p.high_share = 1.0;
        }
        p.validate()?;
        Ok(p)
    }

    /// Profile from `--s`, overridden per type by `--s-h` and `--s-l`.
    pub fn profile(&self) -> Result<Profile64> {
        let base = self.s.unwrap_or(1.5);
        let prof = Profile64::new(self.s_h.unwrap_or(base), self.s_l.unwrap_or(base));
        prof.validate()?;
        Ok(prof)
    }

    pub fn axis(&self) -> Result<Axis> {
        Ok(self.axis.as_deref().unwrap_or("a").parse()?)
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        let (from, to, step) = (self.from.unwrap_or(0.3), self.to.unwrap_or(0.7), self.step.unwrap_or(0.01));
        Ok(matchnet::sweep::grid(from, to, step)?)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(2024)
    }

    pub fn rate_options(&self) -> RateOptions {
        RateOptions {
            psi_low: match self.psi_low_form {
                Some(PsiLowArg::Displayed) => PsiLowForm::Displayed,
                _ => PsiLowForm::Limit,
            },
            upsilon_cross: match self.upsilon_cross {
                Some(UpsilonCrossArg::PoolCount) => UpsilonCross::PoolCount,
                _ => UpsilonCross::Symmetric,
            },
        }
    }
}
