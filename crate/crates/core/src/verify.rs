//! Invariant suites behind `matchnet verify`.
//!
//! The quick mode runs the closed-form suites only. The full mode adds the
//! Monte Carlo checks. Random inputs come from a ChaCha stream seeded by the
//! caller, so a report is a pure function of mode and seed.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{
    a_bar, ds_da_implicit, existence_threshold_homogeneous, foc_high_lhs, foc_homogeneous_lhs, foc_low_lhs,
    foc_low_lhs_checked, solve_heterogeneous, solve_homogeneous, HeterogeneousOptions, TRANSCRIPTION_TOLERANCE,
};
use crate::error::Error;
use crate::params::{Education, ModelParams, Profile};
use crate::rates::{
    marriage_rate_homogeneous, psi, psi_homogeneous, upsilon, upsilon_homogeneous, MarriageRateVariant,
    MatchingRates, RateOptions,
};
use crate::simulator::{compare_to_closed_form, monte_carlo, PassRule, SimConfig, SimEstimates};
use crate::sweep::{
    detect_peak, detect_peak_points, grid, homogeneous_effort, numeric_derivative, sweep, Axis, Model, PeakVerdict,
};

/// Which suites to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Quick,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    pub mode: Mode,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            mode: Mode::Quick,
            seed: 2024,
        }
    }
}

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub pass: bool,
    /// Worst statistic observed, preformatted.
    pub worst: String,
    /// Violated invariants with their inputs, at most [`MAX_LISTED`].
    pub failures: Vec<String>,
}

/// Violations listed per suite.
pub const MAX_LISTED: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub mode: Mode,
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.pass)
    }

    /// Plain-text table: suite, status, worst statistic, then the listed
    /// violations of failed suites.
    pub fn render(&self) -> String {
        let mode = match self.mode {
            Mode::Quick => "quick",
            Mode::Full => "full",
        };
        let mut out = String::new();
        let _ = writeln!(out, "matchnet verify ({mode}, seed {})", self.seed);
        let _ = writeln!(out, "{:<28} {:<6} worst statistic", "suite", "status");
        for s in &self.suites {
            let status = if s.pass { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{:<28} {:<6} {}", s.name, status, s.worst);
        }
        for s in self.suites.iter().filter(|s| !s.pass) {
            let _ = writeln!(out, "\n{} violations:", s.name);
            for f in &s.failures {
                let _ = writeln!(out, "  - {f}");
            }
        }
        let failed = self.suites.iter().filter(|s| !s.pass).count();
        if failed == 0 {
            let _ = writeln!(out, "\noverall: PASS ({} suites)", self.suites.len());
        } else {
            let _ = writeln!(out, "\noverall: FAIL ({failed} of {} suites)", self.suites.len());
        }
        out
    }
}

/// Runs the suites of the chosen mode.
pub fn run(opts: &VerifyOptions) -> VerifyReport {
    let seed = opts.seed;
    let mut suites = vec![
        rates_in_range(seed),
        limit_reduction(seed),
        homogeneous_lhs_shape(),
        existence_boundary(),
        foc_residuals(),
        implicit_derivative(),
        comparative_statics_sign(),
        hump_shapes(),
        weighted_rate_hump(),
        exogenous_monotonicity(),
        transcription(seed),
    ];
    if opts.mode == Mode::Full {
        suites.extend([
            mc_homogeneous(seed),
            mc_heterogeneous(seed, PassRule::PsiConsistent),
            mc_heterogeneous(seed, PassRule::UpsilonConsistent),
            mc_protocol(seed),
            mc_conflict_decay(seed),
        ]);
    }
    VerifyReport {
        mode: opts.mode,
        seed,
        suites,
    }
}

struct Collector {
    name: &'static str,
    failures: Vec<String>,
    count: usize,
}

impl Collector {
    fn new(name: &'static str) -> Self {
        Collector {
            name,
            failures: Vec::new(),
            count: 0,
        }
    }

    fn fail(&mut self, msg: String) {
        self.count += 1;
        if self.failures.len() < MAX_LISTED {
            self.failures.push(msg);
        }
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.fail(msg());
        }
    }

    fn error(&mut self, context: &str, e: Error) {
        self.fail(format!("{context}: {e}"));
    }

    fn finish(self, worst: String) -> SuiteResult {
        let worst = if self.count > MAX_LISTED {
            format!("{worst}; {} violations", self.count)
        } else {
            worst
        };
        SuiteResult {
            name: self.name,
            pass: self.count == 0,
            worst,
            failures: self.failures,
        }
    }
}

fn stream(seed: u64, suite: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(suite);
    rng
}

fn random_params(rng: &mut ChaCha8Rng) -> ModelParams<f64> {
    ModelParams::default()
        .with_arrival(rng.random_range(0.05..0.95))
        .with_divorce(rng.random_range(0.005..0.2))
        .with_high_share(rng.random_range(0.05..0.95))
        .with_high_gain(rng.random_range(1.0..4.0))
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

pub(crate) fn fig5() -> ModelParams<f64> {
    ModelParams::default()
        .with_cost(0.005)
        .with_divorce(0.015)
        .with_marriage_value(2.0)
}

pub(crate) fn fig8() -> ModelParams<f64> {
    ModelParams::default()
        .with_cost(0.003)
        .with_divorce(0.015)
        .with_high_share(0.8)
        .with_high_gain(2.0)
}

fn rates_in_range(seed: u64) -> SuiteResult {
    let mut c = Collector::new("rates-in-unit-interval");
    let mut rng = stream(seed, 1);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..1000 {
        let p = random_params(&mut rng);
        let prof = Profile::new(log_uniform(&mut rng, 1e-3, 50.0), log_uniform(&mut rng, 1e-3, 50.0));
        match MatchingRates::evaluate(&prof, &p, RateOptions::default()) {
            Ok(r) => {
                for (ch, v) in r.iter() {
                    lo = lo.min(v);
                    hi = hi.max(v);
                    c.check((0.0..=1.0).contains(&v), || {
                        format!("{} = {v} outside [0, 1] at {prof:?}, {p:?}", ch.name())
                    });
                }
                c.check(r.psi_hl == 0.0, || format!("psi_hl = {} at {prof:?}", r.psi_hl));
            }
            Err(e) => c.error("rate evaluation", e),
        }
    }
    c.finish(format!("8000 rates in [{lo:.3e}, {hi:.6}]"))
}

fn limit_reduction(seed: u64) -> SuiteResult {
    let mut c = Collector::new("limit-reduction");
    let mut rng = stream(seed, 2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let base = random_params(&mut rng);
        let (sh, sl) = (log_uniform(&mut rng, 1e-3, 20.0), log_uniform(&mut rng, 1e-3, 20.0));
        let prof = Profile::new(sh, sl);
        let (a, d) = (base.arrival, base.divorce);
        let opts = RateOptions::default();
        let high = base.with_high_share(1.0);
        let low = base.with_high_share(0.0);
        let pairs = [
            (psi(Education::High, Education::High, &prof, &high, opts), psi_homogeneous(sh, a, d), "psi_hh at h=1"),
            (upsilon(Education::High, Education::High, &prof, &high), upsilon_homogeneous(sh, d), "ups_hh at h=1"),
            (psi(Education::Low, Education::Low, &prof, &low, opts), psi_homogeneous(sl, a, d), "psi_ll at h=0"),
            (upsilon(Education::Low, Education::Low, &prof, &low), upsilon_homogeneous(sl, d), "ups_ll at h=0"),
        ];
        for (het, hom, what) in pairs {
            match het {
                Ok(v) => {
                    let diff = (v - hom).abs();
                    worst = worst.max(diff);
                    c.check(diff <= 1e-12, || format!("{what}: |{v} - {hom}| = {diff:e} at {prof:?}"));
                }
                Err(e) => c.error(what, e),
            }
        }
    }
    c.finish(format!("max abs difference = {worst:.3e}"))
}

fn homogeneous_lhs_shape() -> SuiteResult {
    let mut c = Collector::new("homogeneous-lhs-shape");
    let p = fig5();
    let mut prev = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    for k in 0..=700 {
        let s = 10f64.powf(-4.0 + k as f64 * 0.01);
        let v = foc_homogeneous_lhs(s, &p).unwrap_or(f64::NAN);
        max_ratio = max_ratio.max(v / prev);
        c.check(v < prev, || format!("LHS not decreasing at s = {s}: {v} >= {prev}"));
        prev = v;
    }
    let limit = foc_homogeneous_lhs(1e-12, &p).unwrap_or(f64::NAN);
    let thr = existence_threshold_homogeneous(&p);
    let rel = (limit - thr).abs() / thr;
    c.check(rel < 1e-9, || format!("s -> 0 limit {limit} vs threshold {thr}"));
    c.finish(format!("max LHS(s+)/LHS(s) = {max_ratio:.6}; limit rel err = {rel:.3e}"))
}

fn existence_boundary() -> SuiteResult {
    let mut c = Collector::new("existence-boundary");
    let mut excluded = 0;
    let mut tested = 0;
    let mut worst_residual: f64 = 0.0;
    for i in 0..20 {
        let a = 0.025 + 0.05 * i as f64;
        for j in 0..20 {
            let cost = 0.0002 + 0.0003 * j as f64;
            let p = ModelParams::default()
                .with_arrival(a)
                .with_cost(cost)
                .with_divorce(0.015)
                .with_marriage_value(1.0);
            let thr = existence_threshold_homogeneous(&p);
            if (cost - thr).abs() <= 1e-9 {
                excluded += 1;
                continue;
            }
            tested += 1;
            match solve_homogeneous(&p, 1e-10) {
                Ok(eq) => {
                    c.check(eq.exists == (cost < thr), || {
                        format!("a = {a}, c = {cost}: exists = {} but threshold = {thr}", eq.exists)
                    });
                    if eq.exists {
                        worst_residual = worst_residual.max(eq.residual);
                        c.check(eq.residual <= 1e-10 && eq.s_star > 0.0, || {
                            format!("a = {a}, c = {cost}: residual {}", eq.residual)
                        });
                    }
                }
                Err(e) => c.error(&format!("a = {a}, c = {cost}"), e),
            }
        }
    }
    let mismatches = c.count;
    c.finish(format!(
        "{mismatches} mismatches in {tested} cells ({excluded} excluded); max residual {worst_residual:.3e}"
    ))
}

fn foc_residuals() -> SuiteResult {
    let mut c = Collector::new("foc-residuals");
    let a_grid = grid(0.3, 0.7, 0.01).expect("static grid");
    let mut worst_hom: f64 = 0.0;
    let mut worst_het: f64 = 0.0;
    let mut roots = 0;
    for &a in &a_grid {
        let p = fig5().with_arrival(a);
        match solve_homogeneous(&p, 1e-10) {
            Ok(eq) if eq.exists => {
                let r = (foc_homogeneous_lhs(eq.s_star, &p).unwrap_or(f64::NAN) - p.cost).abs();
                worst_hom = worst_hom.max(r);
                c.check(r <= 1e-10, || format!("one-type a = {a}: residual {r:e}"));
            }
            Ok(_) => {}
            Err(e) => c.error(&format!("one-type a = {a}"), e),
        }
        let p = fig8().with_arrival(a);
        match solve_heterogeneous(&p, &HeterogeneousOptions::default()) {
            Ok(eq) => {
                for r in &eq.roots {
                    roots += 1;
                    let rh = (foc_high_lhs(r.high, r.low, &p).unwrap_or(f64::NAN) - p.cost).abs();
                    let rl = (foc_low_lhs(r.low, r.high, &p).unwrap_or(f64::NAN) - p.cost).abs();
                    worst_het = worst_het.max(rh).max(rl);
                    c.check(rh <= 1e-9 && rl <= 1e-9, || {
                        format!("two-type a = {a}, root {r:?}: residuals {rh:e}, {rl:e}")
                    });
                }
            }
            Err(e) => c.error(&format!("two-type a = {a}"), e),
        }
    }
    c.finish(format!(
        "one-type max {worst_hom:.3e}; two-type max {worst_het:.3e} over {roots} roots"
    ))
}

fn implicit_derivative() -> SuiteResult {
    let mut c = Collector::new("implicit-derivative");
    let mut worst: f64 = 0.0;
    for a in [0.35, 0.45, 0.55, 0.65, 0.4] {
        let p = fig5().with_arrival(a);
        let result = solve_homogeneous(&p, f64::MIN_POSITIVE).and_then(|eq| {
            let implicit = ds_da_implicit(eq.s_star, &p)?;
            let numeric = numeric_derivative(homogeneous_effort, &p, Axis::Arrival, 1e-3)?;
            Ok((implicit, numeric))
        });
        match result {
            Ok((implicit, numeric)) => {
                let rel = (implicit - numeric).abs() / numeric.abs();
                worst = worst.max(rel);
                c.check(rel <= 1e-4, || {
                    format!("a = {a}: implicit {implicit} vs numerical {numeric} (rel {rel:e})")
                });
            }
            Err(e) => c.error(&format!("a = {a}"), e),
        }
    }
    c.finish(format!("max relative error = {worst:.3e}"))
}

fn comparative_statics_sign() -> SuiteResult {
    let mut c = Collector::new("comparative-statics-sign");
    let mut signs = Vec::new();
    let mut worst_bar: f64 = 0.0;
    for a in grid(0.05, 0.95, 0.01).expect("static grid") {
        let p = fig5().with_arrival(a);
        match solve_homogeneous(&p, 1e-10) {
            Ok(eq) if eq.exists => match ds_da_implicit(eq.s_star, &p) {
                Ok(v) => signs.push(v > 0.0),
                Err(e) => c.error(&format!("a = {a}"), e),
            },
            Ok(_) => {}
            Err(e) => c.error(&format!("a = {a}"), e),
        }
        // The bracketed factor of the numerator vanishes at a_bar.
        if let Ok(eq) = solve_homogeneous(&p, 1e-10) {
            if eq.exists {
                let d = p.divorce;
                let x = (1.0 - d) * -(-eq.s_star * d).exp_m1() / d;
                let ab = a_bar(d, eq.s_star);
                let factor = 1.0 - 2.0 * ab - ab * (1.0 - ab) * x;
                worst_bar = worst_bar.max(factor.abs());
                c.check(factor.abs() <= 1e-12, || format!("a = {a}: factor at a_bar = {factor:e}"));
            }
        }
    }
    let flips = signs.windows(2).filter(|w| w[0] != w[1]).count();
    let starts_positive = signs.first().copied().unwrap_or(false);
    c.check(flips == 1 && starts_positive, || {
        format!("sign pattern has {flips} flips, first positive = {starts_positive}")
    });
    c.finish(format!("{flips} sign flip(s); max |factor at a_bar| = {worst_bar:.3e}"))
}

fn hump_shapes() -> SuiteResult {
    let mut c = Collector::new("hump-shapes");
    let a_grid = grid(0.05, 0.95, 0.01).expect("static grid");
    let mut notes = Vec::new();
    match sweep(Axis::Arrival, &a_grid, &fig5(), &Model::Homogeneous) {
        Ok(t) => {
            for col in ["s_star", "psi"] {
                match detect_peak(&t, col) {
                    Ok(r) => {
                        notes.push(format!("{col}@{}", r.argmax));
                        c.check(r.verdict == PeakVerdict::SinglePeak, || {
                            format!("one-type {col}: {}", r.verdict.tag())
                        });
                        if col == "s_star" && r.verdict == PeakVerdict::SinglePeak {
                            let bar = a_bar(0.015, r.max);
                            let gap = (r.argmax - bar).abs();
                            notes.push(format!("a_bar={bar:.4}"));
                            c.check(gap <= 0.01 + 1e-12, || {
                                format!("s_star peak at a = {} but a_bar = {bar}", r.argmax)
                            });
                        }
                    }
                    Err(e) => c.error(col, e),
                }
            }
        }
        Err(e) => c.error("one-type sweep", e),
    }
    match sweep(Axis::Arrival, &a_grid, &fig8(), &Model::Heterogeneous) {
        Ok(t) => {
            for col in ["s_h_star", "s_l_star", "psi_hh", "psi_l_total"] {
                match detect_peak(&t, col) {
                    Ok(r) => {
                        notes.push(format!("{col}@{}", r.argmax));
                        c.check(r.verdict == PeakVerdict::SinglePeak, || {
                            format!("two-type {col}: {}", r.verdict.tag())
                        });
                    }
                    Err(e) => c.error(col, e),
                }
            }
        }
        Err(e) => c.error("two-type sweep", e),
    }
    c.finish(notes.join(" "))
}

fn weighted_rate_hump() -> SuiteResult {
    let mut c = Collector::new("weighted-rate-hump");
    let mut peaks = Vec::new();
    for s_bar in [0.5, 1.0, 1.5, 3.0] {
        let points: Vec<(f64, f64)> = grid(0.01, 0.99, 0.01)
            .expect("static grid")
            .into_iter()
            .map(|a| {
                let p = ModelParams::default().with_arrival(a).with_divorce(0.015);
                (a, marriage_rate_homogeneous(s_bar, &p, MarriageRateVariant::Weighted))
            })
            .collect();
        match detect_peak_points(&points) {
            Ok(r) => {
                peaks.push(format!("s={s_bar}:{}", r.argmax));
                c.check(r.verdict == PeakVerdict::SinglePeak && r.sign_changes == 1, || {
                    format!("s = {s_bar}: {} with {} sign changes", r.verdict.tag(), r.sign_changes)
                });
            }
            Err(e) => c.error(&format!("s = {s_bar}"), e),
        }
    }
    c.finish(format!("peaks {}", peaks.join(" ")))
}

fn exogenous_monotonicity() -> SuiteResult {
    let mut c = Collector::new("exogenous-monotonicity");
    let a_grid = grid(0.05, 0.95, 0.01).expect("static grid");
    let model = Model::Exogenous(Profile::uniform(1.5));
    let mut min_step = f64::INFINITY;
    match sweep(Axis::Arrival, &a_grid, &fig8(), &model) {
        Ok(t) => {
            for col in ["psi_hh", "psi_lh", "psi_ll"] {
                let v = t.values(col).unwrap_or_default();
                for (k, w) in v.windows(2).enumerate() {
                    let (x, y) = (w[0].unwrap_or(f64::NAN), w[1].unwrap_or(f64::NAN));
                    min_step = min_step.min(y - x);
                    c.check(y > x, || format!("{col} not increasing at a = {}", a_grid[k + 1]));
                }
            }
            for col in ["ups_hh", "ups_hl", "ups_lh", "ups_ll"] {
                let v = t.values(col).unwrap_or_default();
                c.check(v.windows(2).all(|w| w[0] == w[1]), || format!("{col} varies with a"));
            }
        }
        Err(e) => c.error("exogenous sweep", e),
    }
    c.finish(format!("min psi increment = {min_step:.3e}; upsilon columns constant"))
}

fn transcription(seed: u64) -> SuiteResult {
    let mut c = Collector::new("low-foc-transcription");
    let mut rng = stream(seed, 3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p = random_params(&mut rng).with_cost(1e-3);
        let (sh, sl) = (log_uniform(&mut rng, 0.05, 5.0), log_uniform(&mut rng, 0.05, 5.0));
        match foc_low_lhs_checked(sl, sh, &p, f64::INFINITY) {
            Ok(_) => {}
            Err(e) => {
                c.error("evaluation", e);
                continue;
            }
        }
        match foc_low_lhs_checked(sl, sh, &p, TRANSCRIPTION_TOLERANCE) {
            Ok(_) => {
                let printed = foc_low_lhs(sl, sh, &p).unwrap_or(f64::NAN);
                let num = crate::equilibrium::numerical_marginal_return_low(sl, sh, &p).unwrap_or(f64::NAN);
                worst = worst.max((printed - num).abs() / num.abs());
            }
            Err(Error::TranscriptionMismatch { relative, .. }) => {
                worst = worst.max(relative);
                c.fail(format!("s_h = {sh}, s_l = {sl}, {p:?}: relative {relative:e}"));
            }
            Err(e) => c.error("evaluation", e),
        }
    }
    c.finish(format!("max relative error = {worst:.3e} over 1000 points"))
}

fn mc_config(seed: u64, n: usize, h: f64, rule: PassRule) -> SimConfig {
    SimConfig {
        n,
        reps: 200,
        seed,
        pass_rule: rule,
        params: ModelParams::default()
            .with_arrival(0.5)
            .with_divorce(0.015)
            .with_cost(0.003)
            .with_high_share(h),
        profile: Profile::uniform(1.5),
    }
}

fn mc_report(c: &mut Collector, est: &SimEstimates) -> f64 {
    let report = compare_to_closed_form(est, &est.config.params, &est.config.profile);
    for r in report.rows.iter().filter(|r| r.applicable && !r.pass) {
        c.fail(format!(
            "{}: estimate {:?} vs {} (z = {:?})",
            r.name, r.estimate, r.analytic, r.z
        ));
    }
    report.max_abs_z
}

fn mc_homogeneous(seed: u64) -> SuiteResult {
    let mut c = Collector::new("mc-homogeneous");
    let cfg = mc_config(seed, 20_000, 1.0, PassRule::PsiConsistent);
    match monte_carlo(&cfg) {
        Ok(est) => {
            let z = mc_report(&mut c, &est);
            c.finish(format!("max |z| = {z:.3}"))
        }
        Err(e) => {
            c.error("simulation", e);
            c.finish("no estimate".into())
        }
    }
}

fn mc_heterogeneous(seed: u64, rule: PassRule) -> SuiteResult {
    let name = match rule {
        PassRule::PsiConsistent => "mc-heterogeneous-psi",
        PassRule::UpsilonConsistent => "mc-heterogeneous-upsilon",
    };
    let mut c = Collector::new(name);
    let cfg = mc_config(seed, 20_000, 0.8, rule);
    match monte_carlo(&cfg) {
        Ok(est) => {
            let z = mc_report(&mut c, &est);
            c.finish(format!("max |z| = {z:.3}"))
        }
        Err(e) => {
            c.error("simulation", e);
            c.finish("no estimate".into())
        }
    }
}

/// Protocol fidelity: marking, divorce and holding rates against their
/// binomial expectations, with the pairing surplus taken as reported.
fn mc_protocol(seed: u64) -> SuiteResult {
    let mut c = Collector::new("mc-protocol");
    let cfg = mc_config(seed, 20_000, 0.8, PassRule::PsiConsistent);
    let est = match monte_carlo(&cfg) {
        Ok(est) => est,
        Err(e) => {
            c.error("simulation", e);
            return c.finish("no estimate".into());
        }
    };
    let (a, d) = (cfg.params.arrival, cfg.params.divorce);
    let t = &est.totals;
    let reps = cfg.reps as f64;
    let nh = (cfg.params.high_share * cfg.n as f64).round();
    let counts = [nh, cfg.n as f64 - nh];
    let mut worst: f64 = 0.0;
    let mut z_check = |c: &mut Collector, what: &str, observed: f64, trials: f64, p: f64| {
        let z = (observed - trials * p) / (trials * p * (1.0 - p)).sqrt();
        worst = worst.max(z.abs());
        c.check(z.abs() <= 3.0, || format!("{what}: {observed} vs {} (z = {z:.3})", trials * p));
    };
    let paired: u64 = t.direct_meetings.iter().flatten().sum();
    let marked = (paired + t.unpaired_marked) as f64;
    z_check(&mut c, "marked agents", marked, 2.0 * cfg.n as f64 * reps, a);
    for e in 0..2 {
        z_check(&mut c, "divorced couples", t.divorces[0][e] as f64, counts[e] * reps, d);
        for g in 0..2 {
            let held = t.needless_dates[g][e] as f64;
            z_check(&mut c, "needless dates", held, t.direct_meetings[g][e] as f64, 1.0 - d);
        }
    }
    let surplus = t.unpaired_marked as f64 / marked;
    c.finish(format!("max |z| = {worst:.3}; pairing surplus {surplus:.3e} of marked"))
}

/// Conflicts per viable introduction on a doubling sequence of `n`.
pub fn conflict_sequence(seed: u64) -> Vec<(usize, Option<f64>, u64, u64)> {
    (0..7)
        .map(|k| {
            let n = 1000usize << k;
            let cfg = mc_config(seed, n, 1.0, PassRule::PsiConsistent);
            match monte_carlo(&cfg) {
                Ok(est) => (n, est.conflict_rate, est.totals.conflicts, est.totals.viable_introductions),
                Err(_) => (n, None, 0, 0),
            }
        })
        .collect()
}

fn mc_conflict_decay(seed: u64) -> SuiteResult {
    let mut c = Collector::new("mc-conflict-decay");
    let seq = conflict_sequence(seed);
    let rates: Vec<String> = seq
        .iter()
        .map(|(n, r, _, _)| format!("{}k:{}", n / 1000, r.map_or("-".into(), |r| format!("{r:.4}"))))
        .collect();
    for w in seq.windows(2) {
        let (prev, next) = (w[0].1.unwrap_or(f64::NAN), w[1].1.unwrap_or(f64::NAN));
        c.check(next < prev, || {
            format!(
                "rate at n = {} ({next:.5}, {}/{}) not below n = {} ({prev:.5})",
                w[1].0, w[1].2, w[1].3, w[0].0
            )
        });
    }
    c.finish(rates.join(" "))
}
