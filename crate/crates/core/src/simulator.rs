//! Agent-based realization of one round of the marriage market on sampled
//! friendship graphs.
//!
//! Each gender has `n` agents; the first `round(h n)` indices of each gender
//! are high types. Everyone starts married to an opposite-gender agent of
//! the same type. Friendships form only within a gender, each pair
//! independently with probability `min(s_i s_j / sum_k s_k, 1)`.
//!
//! One round runs:
//!
//! 1. Couples divorce with probability `d`.
//! 2. Every agent is marked for a direct meeting with probability `a`.
//!    Marked agents of each type are paired at random across genders; the
//!    surplus side stays unmarked.
//! 3. Direct pairs of two singles marry.
//! 4. A married agent holding a date passes it to one uniformly chosen
//!    eligible single friend, where single means divorced and not married in
//!    step 3. Under [`PassRule::PsiConsistent`] a low-type date only goes to
//!    low-type friends; under [`PassRule::UpsilonConsistent`] any single
//!    friend is eligible.
//! 5. Introductions whose date is single are resolved in random order. One
//!    that finds either party already married is a conflict.
//!
//! Channel frequencies are tallied with the conditioning of the
//! large-market rates:
//!
//! - Upsilon cell: divorced agents whose direct date stayed married. A hit
//!   towards type `e'` means the date had at least one eligible single
//!   friend of type `e'`.
//! - Psi cell: divorced agents without a direct date. A hit towards `e'`
//!   means they were passed at least one type-`e'` date, whatever that
//!   date's marital status.
//!
//! Both genders are pooled. Replication `r` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` on stream `r`, so results do not
//! depend on how replications are scheduled across threads.

use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Education, ModelParams, Profile};
use crate::rates::{upsilon_with, Channel, MatchingRates, RateOptions, UpsilonCross};

const NONE: u32 = u32::MAX;
const HIGH: usize = 0;
const LOW: usize = 1;

fn type_index(e: Education) -> usize {
    match e {
        Education::High => HIGH,
        Education::Low => LOW,
    }
}

/// Which single friends may receive a passed date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PassRule {
    /// Low-type dates go only to low-type friends, so nobody passes a low
    /// type to a high type.
    #[default]
    PsiConsistent,
    /// Any single friend is eligible.
    UpsilonConsistent,
}

impl PassRule {
    pub fn name(self) -> &'static str {
        match self {
            PassRule::PsiConsistent => "psi-consistent",
            PassRule::UpsilonConsistent => "upsilon-consistent",
        }
    }
}

impl FromStr for PassRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "psi-consistent" => Ok(PassRule::PsiConsistent),
            "upsilon-consistent" => Ok(PassRule::UpsilonConsistent),
            _ => Err(Error::Format(format!(
                "unknown pass rule `{s}`; expected psi-consistent or upsilon-consistent"
            ))),
        }
    }
}

/// Two genders of `n` agents with their initial spouses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Population {
    pub n: usize,
    /// High types per gender. Agents `0..high_count` are high.
    pub high_count: usize,
    /// `spouse[g][i]`: index in the other gender of agent `i`'s spouse.
    /// Gender 0 is men, 1 women.
    pub spouse: [Vec<u32>; 2],
    /// Set when `0 < h < 1` but rounding leaves a single type.
    pub warning: Option<String>,
}

impl Population {
    pub fn generate<R: Rng>(n: usize, high_share: f64, rng: &mut R) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter {
                field: "n",
                value: n as f64,
                reason: "must be >= 2",
            });
        }
        if n >= NONE as usize {
            return Err(Error::InvalidParameter {
                field: "n",
                value: n as f64,
                reason: "exceeds the supported population size",
            });
        }
        if !(0.0..=1.0).contains(&high_share) {
            return Err(Error::InvalidParameter {
                field: "h",
                value: high_share,
                reason: "must lie in [0, 1]",
            });
        }
        let high_count = (high_share * n as f64).round() as usize;
        let warning = (high_share > 0.0 && high_share < 1.0 && (high_count == 0 || high_count == n)).then(|| {
            format!(
                "degenerate composition: round({high_share} * {n}) = {high_count} leaves one education type"
            )
        });
        let mut spouse = [vec![0u32; n], vec![0u32; n]];
        for range in [0..high_count, high_count..n] {
            let mut women: Vec<u32> = range.clone().map(|i| i as u32).collect();
            women.shuffle(rng);
            for (m, w) in range.zip(women) {
                spouse[0][m] = w;
                spouse[1][w as usize] = m as u32;
            }
        }
        Ok(Population {
            n,
            high_count,
            spouse,
            warning,
        })
    }

    pub fn education(&self, i: usize) -> Education {
        if i < self.high_count {
            Education::High
        } else {
            Education::Low
        }
    }

    fn kind(&self, i: usize) -> usize {
        if i < self.high_count {
            HIGH
        } else {
            LOW
        }
    }

    pub fn count(&self, e: Education) -> usize {
        match e {
            Education::High => self.high_count,
            Education::Low => self.n - self.high_count,
        }
    }
}

/// Population drawn from `ChaCha8Rng::seed_from_u64(seed)`.
pub fn generate_population(n: usize, high_share: f64, seed: u64) -> Result<Population> {
    Population::generate(n, high_share, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Undirected friendship graph in compressed sparse row form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl Graph {
    fn from_edges(n: usize, edges: &[(u32, u32)]) -> Self {
        let mut offsets = vec![0usize; n + 1];
        for &(u, v) in edges {
            offsets[u as usize + 1] += 1;
            offsets[v as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut neighbors = vec![0u32; offsets[n]];
        for &(u, v) in edges {
            neighbors[fill[u as usize]] = v;
            fill[u as usize] += 1;
            neighbors[fill[v as usize]] = u;
            fill[v as usize] += 1;
        }
        Graph { offsets, neighbors }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Every link appears in both endpoints' lists.
    pub fn is_symmetric(&self) -> bool {
        (0..self.len()).all(|i| self.neighbors(i).iter().all(|&j| self.neighbors(j as usize).contains(&(i as u32))))
    }
}

/// One friendship graph per gender.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    pub graphs: [Graph; 2],
    /// Pairs whose link probability was clipped at 1, over both genders.
    pub clipped_pairs: u64,
}

/// Number of failures before the next success, for success probability
/// with `log_q = ln(1 - p)`.
fn geometric_skip<R: Rng>(log_q: f64, cap: i64, rng: &mut R) -> i64 {
    let r: f64 = rng.random();
    let k = ((1.0 - r).ln() / log_q).floor();
    if k >= cap as f64 {
        cap
    } else {
        k as i64
    }
}

/// Links among `size` agents starting at `offset`, each pair with
/// probability `p`, by geometric skipping over the lower triangle.
fn sample_triangle<R: Rng>(offset: usize, size: usize, p: f64, rng: &mut R, edges: &mut Vec<(u32, u32)>) {
    if size < 2 || p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        for v in 1..size {
            for w in 0..v {
                edges.push(((offset + v) as u32, (offset + w) as u32));
            }
        }
        return;
    }
    let log_q = (-p).ln_1p();
    let n = size as i64;
    let cap = n * n;
    let (mut v, mut w) = (1i64, -1i64);
    while v < n {
        w += 1 + geometric_skip(log_q, cap, rng);
        while w >= v && v < n {
            w -= v;
            v += 1;
        }
        if v < n {
            edges.push(((offset as i64 + v) as u32, (offset as i64 + w) as u32));
        }
    }
}

/// Links between two disjoint index ranges, each pair with probability `p`.
fn sample_rectangle<R: Rng>(
    (row_offset, rows): (usize, usize),
    (col_offset, cols): (usize, usize),
    p: f64,
    rng: &mut R,
    edges: &mut Vec<(u32, u32)>,
) {
    if rows == 0 || cols == 0 || p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        for r in 0..rows {
            for c in 0..cols {
                edges.push(((row_offset + r) as u32, (col_offset + c) as u32));
            }
        }
        return;
    }
    let log_q = (-p).ln_1p();
    let total = (rows * cols) as i64;
    let mut k = -1i64;
    loop {
        k += 1 + geometric_skip(log_q, total, rng);
        if k >= total {
            break;
        }
        let (r, c) = ((k as usize) / cols, (k as usize) % cols);
        edges.push(((row_offset + r) as u32, (col_offset + c) as u32));
    }
}

/// Samples each gender's friendship graph. High types invest
/// `profile.high`, low types `profile.low`.
pub fn realize_network<R: Rng>(population: &Population, profile: &Profile<f64>, rng: &mut R) -> Network {
    let n = population.n;
    let nh = population.high_count;
    let nl = n - nh;
    let (sh, sl) = (profile.high, profile.low);
    let total = nh as f64 * sh + nl as f64 * sl;
    let link = |x: f64, y: f64| if total > 0.0 { x * y / total } else { 0.0 };
    let (raw_hh, raw_hl, raw_ll) = (link(sh, sh), link(sh, sl), link(sl, sl));
    let pairs = |k: usize| (k * k.saturating_sub(1) / 2) as u64;
    let mut clipped = 0u64;
    if raw_hh > 1.0 {
        clipped += pairs(nh);
    }
    if raw_hl > 1.0 {
        clipped += (nh * nl) as u64;
    }
    if raw_ll > 1.0 {
        clipped += pairs(nl);
    }
    let graphs = [0, 1].map(|_| {
        let mut edges = Vec::new();
        sample_triangle(0, nh, raw_hh.min(1.0), rng, &mut edges);
        sample_rectangle((0, nh), (nh, nl), raw_hl.min(1.0), rng, &mut edges);
        sample_triangle(nh, nl, raw_ll.min(1.0), rng, &mut edges);
        Graph::from_edges(n, &edges)
    });
    Network {
        graphs,
        clipped_pairs: 2 * clipped,
    }
}

/// Counters of one round, or of several rounds summed. Arrays are indexed
/// `[gender][type]` or `[type][partner type]`, with gender 0 men, 1 women,
/// type 0 high, 1 low.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub divorces: [[u64; 2]; 2],
    /// Agents paired for a direct meeting.
    pub direct_meetings: [[u64; 2]; 2],
    pub direct_marriages: [[u64; 2]; 2],
    /// `[gender][type][partner type]`: agents married as an introduced date.
    pub upsilon_marriages: [[[u64; 2]; 2]; 2],
    /// `[gender][type][partner type]`: agents married to a date passed on by
    /// a friend.
    pub psi_marriages: [[[u64; 2]; 2]; 2],
    /// Dates held by married agents.
    pub needless_dates: [[u64; 2]; 2],
    /// Marked agents left without a direct partner.
    pub unpaired_marked: u64,
    /// Dates passed to a friend.
    pub passes: u64,
    /// Passes whose date was single.
    pub viable_introductions: u64,
    /// Viable introductions that failed because a party had already married.
    pub conflicts: u64,
    pub clipped_pairs: u64,
    /// `[type]`: agents in the Upsilon conditioning cell.
    pub upsilon_trials: [u64; 2],
    /// `[type][partner type]`.
    pub upsilon_hits: [[u64; 2]; 2],
    /// `[type]`: agents in the Psi conditioning cell.
    pub psi_trials: [u64; 2],
    /// `[type][partner type]`.
    pub psi_hits: [[u64; 2]; 2],
}

impl RoundOutcome {
    fn add(&mut self, other: &RoundOutcome) {
        fn add2(a: &mut [[u64; 2]; 2], b: &[[u64; 2]; 2]) {
            for i in 0..2 {
                for j in 0..2 {
                    a[i][j] += b[i][j];
                }
            }
        }
        add2(&mut self.divorces, &other.divorces);
        add2(&mut self.direct_meetings, &other.direct_meetings);
        add2(&mut self.direct_marriages, &other.direct_marriages);
        for g in 0..2 {
            add2(&mut self.upsilon_marriages[g], &other.upsilon_marriages[g]);
            add2(&mut self.psi_marriages[g], &other.psi_marriages[g]);
        }
        add2(&mut self.needless_dates, &other.needless_dates);
        self.unpaired_marked += other.unpaired_marked;
        self.passes += other.passes;
        self.viable_introductions += other.viable_introductions;
        self.conflicts += other.conflicts;
        self.clipped_pairs += other.clipped_pairs;
        add2(&mut self.upsilon_hits, &other.upsilon_hits);
        add2(&mut self.psi_hits, &other.psi_hits);
        for e in 0..2 {
            self.upsilon_trials[e] += other.upsilon_trials[e];
            self.psi_trials[e] += other.psi_trials[e];
        }
    }

    /// Agents who married this round, over all channels.
    pub fn newly_married(&self) -> u64 {
        let mut total = 0;
        for g in 0..2 {
            for e in 0..2 {
                total += self.direct_marriages[g][e];
                total += self.upsilon_marriages[g][e].iter().sum::<u64>();
                total += self.psi_marriages[g][e].iter().sum::<u64>();
            }
        }
        total
    }

    /// Flat `(name, value)` listing in a fixed order, used for CSV export.
    pub fn fields(&self) -> Vec<(String, u64)> {
        let gender = ["m", "w"];
        let kind = ["h", "l"];
        let mut out = Vec::new();
        let by_gender = |name: &str, v: &[[u64; 2]; 2], out: &mut Vec<(String, u64)>| {
            for g in 0..2 {
                for e in 0..2 {
                    out.push((format!("{name}_{}_{}", gender[g], kind[e]), v[g][e]));
                }
            }
        };
        by_gender("divorces", &self.divorces, &mut out);
        by_gender("direct_meetings", &self.direct_meetings, &mut out);
        by_gender("direct_marriages", &self.direct_marriages, &mut out);
        for (name, v) in [("ups_marriages", &self.upsilon_marriages), ("psi_marriages", &self.psi_marriages)] {
            for g in 0..2 {
                for e in 0..2 {
                    for p in 0..2 {
                        out.push((format!("{name}_{}_{}{}", gender[g], kind[e], kind[p]), v[g][e][p]));
                    }
                }
            }
        }
        by_gender("needless_dates", &self.needless_dates, &mut out);
        for (name, v) in [
            ("unpaired_marked", self.unpaired_marked),
            ("passes", self.passes),
            ("viable_introductions", self.viable_introductions),
            ("conflicts", self.conflicts),
            ("clipped_pairs", self.clipped_pairs),
        ] {
            out.push((name.to_string(), v));
        }
        for (name, trials, hits) in [
            ("ups", &self.upsilon_trials, &self.upsilon_hits),
            ("psi", &self.psi_trials, &self.psi_hits),
        ] {
            for e in 0..2 {
                out.push((format!("{name}_trials_{}", kind[e]), trials[e]));
                for p in 0..2 {
                    out.push((format!("{name}_hits_{}{}", kind[e], kind[p]), hits[e][p]));
                }
            }
        }
        out
    }
}

/// Runs steps 1 to 5 of the round on a realized network.
pub fn run_round<R: Rng>(
    population: &Population,
    network: &Network,
    params: &ModelParams<f64>,
    rng: &mut R,
    rule: PassRule,
) -> RoundOutcome {
    let n = population.n;
    let kind = |i: usize| population.kind(i);
    let mut out = RoundOutcome {
        clipped_pairs: network.clipped_pairs,
        ..Default::default()
    };

    // 1. Divorce, couple by couple.
    let mut divorced = [vec![false; n], vec![false; n]];
    for m in 0..n {
        if rng.random_bool(params.divorce) {
            let w = population.spouse[0][m] as usize;
            divorced[0][m] = true;
            divorced[1][w] = true;
            out.divorces[0][kind(m)] += 1;
            out.divorces[1][kind(w)] += 1;
        }
    }

    // 2. Direct meetings: mark, then pair marked agents of the same type.
    let mut date = [vec![NONE; n], vec![NONE; n]];
    for (e, range) in [(HIGH, 0..population.high_count), (LOW, population.high_count..n)] {
        let mut marked: [Vec<u32>; 2] = [Vec::new(), Vec::new()];
        for list in marked.iter_mut() {
            for i in range.clone() {
                if rng.random_bool(params.arrival) {
                    list.push(i as u32);
                }
            }
            list.shuffle(rng);
        }
        let k = marked[0].len().min(marked[1].len());
        out.unpaired_marked += (marked[0].len() + marked[1].len() - 2 * k) as u64;
        for (&m, &w) in marked[0].iter().zip(&marked[1]) {
            date[0][m as usize] = w;
            date[1][w as usize] = m;
        }
        out.direct_meetings[0][e] += k as u64;
        out.direct_meetings[1][e] += k as u64;
    }

    // 3. Two singles who meet marry.
    let mut partner = [vec![NONE; n], vec![NONE; n]];
    for m in 0..n {
        let w = date[0][m];
        if w != NONE && divorced[0][m] && divorced[1][w as usize] {
            partner[0][m] = w;
            partner[1][w as usize] = m as u32;
            out.direct_marriages[0][kind(m)] += 1;
            out.direct_marriages[1][kind(w as usize)] += 1;
        }
    }
    let eligible: [Vec<bool>; 2] = [0, 1].map(|g| (0..n).map(|i| divorced[g][i] && partner[g][i] == NONE).collect());

    // 4. Married holders pass their date to a single friend.
    let mut received = [vec![0u8; n], vec![0u8; n]];
    let mut viable: Vec<(u8, u32, u32)> = Vec::new();
    let mut candidates: Vec<u32> = Vec::new();
    for g in 0..2 {
        let other = 1 - g;
        for j in 0..n {
            let i = date[g][j];
            if divorced[g][j] || i == NONE {
                continue;
            }
            let i = i as usize;
            let date_kind = kind(i);
            out.needless_dates[g][kind(j)] += 1;
            candidates.clear();
            let mut by_kind = [0u32; 2];
            for &f in network.graphs[g].neighbors(j) {
                let f_idx = f as usize;
                if !eligible[g][f_idx] {
                    continue;
                }
                let fk = kind(f_idx);
                if rule == PassRule::PsiConsistent && date_kind == LOW && fk == HIGH {
                    continue;
                }
                candidates.push(f);
                by_kind[fk] += 1;
            }
            let date_single = divorced[other][i];
            if date_single {
                out.upsilon_trials[date_kind] += 1;
                for (pk, &count) in by_kind.iter().enumerate() {
                    if count > 0 {
                        out.upsilon_hits[date_kind][pk] += 1;
                    }
                }
            }
            if !candidates.is_empty() {
                let f = candidates[rng.random_range(0..candidates.len())];
                out.passes += 1;
                received[g][f as usize] |= 1 << date_kind;
                if date_single {
                    viable.push((g as u8, f, i as u32));
                }
            }
        }
    }

    // 5. Resolve viable introductions in random order.
    viable.shuffle(rng);
    out.viable_introductions = viable.len() as u64;
    for (g, f, i) in viable {
        let (g, f, i) = (g as usize, f as usize, i as usize);
        let other = 1 - g;
        if partner[g][f] == NONE && partner[other][i] == NONE {
            partner[g][f] = i as u32;
            partner[other][i] = f as u32;
            out.psi_marriages[g][kind(f)][kind(i)] += 1;
            out.upsilon_marriages[other][kind(i)][kind(f)] += 1;
        } else {
            out.conflicts += 1;
        }
    }

    // Psi cell: divorced and no direct date.
    for g in 0..2 {
        for f in 0..n {
            if divorced[g][f] && date[g][f] == NONE {
                let fk = kind(f);
                out.psi_trials[fk] += 1;
                for pk in [HIGH, LOW] {
                    if received[g][f] & (1 << pk) != 0 {
                        out.psi_hits[fk][pk] += 1;
                    }
                }
            }
        }
    }

    debug_assert!((0..n).all(|m| {
        let w = partner[0][m];
        w == NONE || partner[1][w as usize] == m as u32
    }));
    out
}

/// Settings of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Agents per gender.
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub pass_rule: PassRule,
    pub params: ModelParams<f64>,
    pub profile: Profile<f64>,
}

/// Empirical frequency of one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelEstimate {
    pub channel: Channel,
    pub hits: u64,
    /// Size of the conditioning cell, pooled over genders and replications.
    pub trials: u64,
    /// `hits / trials`; absent for an empty cell.
    pub estimate: Option<f64>,
    /// `sqrt(p (1 - p) / trials)` at the estimate.
    pub standard_error: Option<f64>,
}

/// Result of [`monte_carlo`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEstimates {
    pub config: SimConfig,
    pub replications: usize,
    pub channels: Vec<ChannelEstimate>,
    /// Conflicts per viable introduction; absent without introductions.
    pub conflict_rate: Option<f64>,
    pub totals: RoundOutcome,
    #[serde(skip)]
    pub per_replication: Vec<RoundOutcome>,
    pub warnings: Vec<String>,
}

impl SimEstimates {
    pub fn channel(&self, c: Channel) -> &ChannelEstimate {
        &self.channels[c.index()]
    }
}

/// Runs `reps` independent replications of population, network and round.
pub fn monte_carlo(config: &SimConfig) -> Result<SimEstimates> {
    let mut params = config.params;
    params.population = Some(config.n);
    params.validate()?;
    config.profile.validate()?;
    if config.reps == 0 {
        return Err(Error::InvalidParameter {
            field: "reps",
            value: 0.0,
            reason: "must be >= 1",
        });
    }
    let runs: Vec<(RoundOutcome, Option<String>)> = (0..config.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(rep as u64);
            let population = Population::generate(config.n, params.high_share, &mut rng)?;
            let network = realize_network(&population, &config.profile, &mut rng);
            let outcome = run_round(&population, &network, &params, &mut rng, config.pass_rule);
            Ok((outcome, population.warning))
        })
        .collect::<Result<_>>()?;

    let mut totals = RoundOutcome::default();
    for (o, _) in &runs {
        totals.add(o);
    }
    let mut warnings: Vec<String> = runs.iter().find_map(|(_, w)| w.clone()).into_iter().collect();
    let h = params.high_share;
    let share = (h * config.n as f64).round() / config.n as f64;
    if warnings.is_empty() && share != h {
        warnings.push(format!(
            "high-type share rounds to {share} at n = {}; closed forms use {h}",
            config.n
        ));
    }
    let channels = Channel::ALL
        .iter()
        .map(|&c| {
            let (e, p) = (type_index(c.receiver()), type_index(c.partner()));
            let (hits, trials) = match c {
                Channel::Psi(..) => (totals.psi_hits[e][p], totals.psi_trials[e]),
                Channel::Upsilon(..) => (totals.upsilon_hits[e][p], totals.upsilon_trials[e]),
            };
            let estimate = (trials > 0).then(|| hits as f64 / trials as f64);
            ChannelEstimate {
                channel: c,
                hits,
                trials,
                estimate,
                standard_error: estimate.map(|q| (q * (1.0 - q) / trials as f64).sqrt()),
            }
        })
        .collect();
    let conflict_rate =
        (totals.viable_introductions > 0).then(|| totals.conflicts as f64 / totals.viable_introductions as f64);
    Ok(SimEstimates {
        config: *config,
        replications: config.reps,
        channels,
        conflict_rate,
        totals,
        per_replication: runs.into_iter().map(|(o, _)| o).collect(),
        warnings,
    })
}

/// Passing threshold on `|z|`.
pub const Z_LIMIT: f64 = 3.0;

/// One row of [`compare_to_closed_form`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub analytic: f64,
    pub estimate: Option<f64>,
    pub standard_error: Option<f64>,
    pub z: Option<f64>,
    /// Whether the pass rule reproduces the mechanics behind this formula
    /// and the conditioning cell is non-empty.
    pub applicable: bool,
    /// `|z| <= 3`, or trivially true when not applicable.
    pub pass: bool,
    pub note: String,
}

/// Monte Carlo frequencies against the large-market rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pass_rule: PassRule,
    pub rows: Vec<ComparisonRow>,
    pub all_pass: bool,
    pub max_abs_z: f64,
}

/// `z`-scores of every channel against its closed form. The standard error
/// falls back to the analytic rate when the estimate is 0 or 1.
///
/// Applicability by pass rule:
///
/// - `psi-consistent`: `ups_lh` is not applicable, since low-type dates
///   never reach high-type friends.
/// - `upsilon-consistent`: `psi_hl` and `psi_ll` are not applicable, since
///   low-type dates also go to high-type friends. The symmetric `ups_lh`
///   does not describe these mechanics either; the pool-count form, added
///   as `ups_lh_pool`, does.
pub fn compare_to_closed_form(
    estimates: &SimEstimates,
    params: &ModelParams<f64>,
    profile: &Profile<f64>,
) -> ValidationReport {
    let rule = estimates.config.pass_rule;
    let analytic =
        MatchingRates::evaluate(profile, params, RateOptions::default()).unwrap_or_else(|_| MatchingRates::zero());
    let pool = upsilon_with(
        Education::Low,
        Education::High,
        profile,
        params,
        RateOptions {
            upsilon_cross: UpsilonCross::PoolCount,
            ..Default::default()
        },
    )
    .unwrap_or(0.0);
    use Education::{High, Low};
    let excluded = |c: Channel| match rule {
        PassRule::PsiConsistent => {
            matches!(c, Channel::Upsilon(Low, High)).then_some("low-type dates never reach high-type friends")
        }
        PassRule::UpsilonConsistent => match c {
            Channel::Psi(High, Low) | Channel::Psi(Low, Low) => {
                Some("low-type dates are also passed to high-type friends")
            }
            Channel::Upsilon(Low, High) => Some("symmetric form; see ups_lh_pool"),
            _ => None,
        },
    };

    let mut rows: Vec<ComparisonRow> = Channel::ALL
        .iter()
        .map(|&c| row(c.name(), analytic.get(c), estimates.channel(c), excluded(c)))
        .collect();
    let pool_excluded = (rule == PassRule::PsiConsistent).then_some("low-type dates never reach high-type friends");
    rows.push(row(
        "ups_lh_pool",
        pool,
        estimates.channel(Channel::Upsilon(Low, High)),
        pool_excluded,
    ));
    let all_pass = rows.iter().all(|r| r.pass);
    let max_abs_z = rows
        .iter()
        .filter(|r| r.applicable)
        .filter_map(|r| r.z)
        .fold(0.0, |m: f64, z| m.max(z.abs()));
    ValidationReport {
        pass_rule: rule,
        rows,
        all_pass,
        max_abs_z,
    }
}

fn row(name: &str, analytic: f64, est: &ChannelEstimate, excluded: Option<&str>) -> ComparisonRow {
    let note;
    let (applicable, z, se) = match (excluded, est.estimate) {
        (Some(why), _) => {
            note = why.to_string();
            (false, None, est.standard_error)
        }
        (None, None) => {
            note = "empty conditioning cell".to_string();
            (false, None, None)
        }
        (None, Some(q)) => {
            note = String::new();
            let n = est.trials as f64;
            let se = if q == 0.0 || q == 1.0 {
                (analytic * (1.0 - analytic) / n).sqrt()
            } else {
                (q * (1.0 - q) / n).sqrt()
            };
            let diff = q - analytic;
            let z = if diff == 0.0 {
                0.0
            } else if se > 0.0 {
                diff / se
            } else {
                f64::INFINITY
            };
            (true, Some(z), Some(se))
        }
    };
    let pass = !applicable || z.is_some_and(|z| z.abs() <= Z_LIMIT);
    ComparisonRow {
        name: name.to_string(),
        analytic,
        estimate: est.estimate,
        standard_error: se,
        z,
        applicable,
        pass,
        note,
    }
}

/// One CSV row per replication with every [`RoundOutcome`] counter.
pub fn write_replications_csv<W: Write>(estimates: &SimEstimates, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let map = |e: csv::Error| Error::Format(format!("csv: {e}"));
    let names: Vec<String> = RoundOutcome::default().fields().into_iter().map(|(k, _)| k).collect();
    let mut header = vec!["replication".to_string()];
    header.extend(names);
    w.write_record(&header).map_err(map)?;
    for (rep, o) in estimates.per_replication.iter().enumerate() {
        let mut rec = vec![rep.to_string()];
        rec.extend(o.fields().into_iter().map(|(_, v)| v.to_string()));
        w.write_record(&rec).map_err(map)?;
    }
    w.flush().map_err(|e| Error::Format(format!("csv: {e}")))?;
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    estimates: &'a SimEstimates,
    validation: &'a ValidationReport,
}

/// Aggregate JSON summary: configuration, pooled estimates, totals and the
/// closed-form comparison.
pub fn write_summary_json<W: Write>(estimates: &SimEstimates, validation: &ValidationReport, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, &Summary { estimates, validation })
        .map_err(|e| Error::Format(format!("json: {e}")))?;
    writeln!(out).map_err(|e| Error::Format(format!("json: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bench_params() -> ModelParams<f64> {
        ModelParams::default().with_arrival(0.5).with_divorce(0.015).with_high_share(1.0)
    }

    #[test]
    fn population_composition() {
        let p = generate_population(4, 0.5, 7).unwrap();
        assert_eq!(p.high_count, 2);
        assert_eq!(p.count(Education::Low), 2);
        for m in 0..4 {
            let w = p.spouse[0][m] as usize;
            assert_eq!(p.spouse[1][w] as usize, m);
            assert_eq!(p.education(m), p.education(w));
        }
        assert_eq!(generate_population(10, 1.0, 1).unwrap().high_count, 10);
        assert_eq!(generate_population(1000, 0.8, 1).unwrap().high_count, 800);
        assert_eq!(generate_population(50, 0.3, 9).unwrap(), generate_population(50, 0.3, 9).unwrap());
        assert!(generate_population(1, 0.5, 0).is_err());
        assert!(generate_population(3, 0.1, 0).unwrap().warning.is_some());
    }

    #[test]
    fn empty_network_without_effort() {
        let pop = generate_population(100, 0.5, 1).unwrap();
        let net = realize_network(&pop, &Profile::uniform(0.0), &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(net.graphs[0].edge_count() + net.graphs[1].edge_count(), 0);
    }

    #[test]
    fn network_is_symmetric_and_clips() {
        let pop = generate_population(200, 0.5, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = realize_network(&pop, &Profile::new(2.0, 0.5), &mut rng);
        assert!(net.graphs.iter().all(Graph::is_symmetric));
        assert_eq!(net.clipped_pairs, 0);
        let small = generate_population(4, 1.0, 0).unwrap();
        let net = realize_network(&small, &Profile::uniform(10.0), &mut rng);
        assert_eq!(net.clipped_pairs, 12);
        assert_eq!(net.graphs[0].edge_count(), 6);
    }

    #[test]
    fn no_divorce_means_no_network_marriages() {
        let pop = generate_population(2000, 1.0, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = realize_network(&pop, &Profile::uniform(1.5), &mut rng);
        let mut params = bench_params();
        params.divorce = 0.0;
        let out = run_round(&pop, &net, &params, &mut rng, PassRule::PsiConsistent);
        assert_eq!(out.divorces, [[0; 2]; 2]);
        assert_eq!(out.newly_married(), 0);
        let paired: u64 = out.direct_meetings.iter().flatten().sum();
        let needless: u64 = out.needless_dates.iter().flatten().sum();
        assert_eq!(paired, needless);
    }

    #[test]
    fn no_arrival_means_no_meetings() {
        let pop = generate_population(2000, 1.0, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let net = realize_network(&pop, &Profile::uniform(1.5), &mut rng);
        let mut params = bench_params();
        params.arrival = 0.0;
        let out = run_round(&pop, &net, &params, &mut rng, PassRule::PsiConsistent);
        assert_eq!(out.direct_meetings, [[0; 2]; 2]);
        assert_eq!(out.newly_married(), 0);
        assert_eq!(out.psi_hits, [[0; 2]; 2]);
    }

    #[test]
    fn channel_counts_balance() {
        let cfg = SimConfig {
            n: 3000,
            reps: 4,
            seed: 11,
            pass_rule: PassRule::UpsilonConsistent,
            params: bench_params().with_high_share(0.6).with_divorce(0.3),
            profile: Profile::new(2.0, 1.0),
        };
        let est = monte_carlo(&cfg).unwrap();
        for o in &est.per_replication {
            let ups: u64 = o.upsilon_marriages.iter().flatten().flatten().sum();
            let psi: u64 = o.psi_marriages.iter().flatten().flatten().sum();
            assert_eq!(ups, psi);
            assert_eq!(o.viable_introductions, ups + o.conflicts);
            let direct: u64 = o.direct_marriages.iter().flatten().sum();
            assert_eq!(o.newly_married(), direct + ups + psi);
        }
    }

    #[test]
    fn zero_profile_passes_vacuously() {
        let cfg = SimConfig {
            n: 500,
            reps: 3,
            seed: 1,
            pass_rule: PassRule::PsiConsistent,
            params: bench_params().with_high_share(0.8),
            profile: Profile::uniform(0.0),
        };
        let est = monte_carlo(&cfg).unwrap();
        let report = compare_to_closed_form(&est, &cfg.params, &cfg.profile);
        assert!(report.all_pass);
        for r in &report.rows {
            assert_eq!(r.analytic, 0.0);
            assert!(r.estimate.unwrap_or(0.0) == 0.0);
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let cfg = SimConfig {
            n: 1000,
            reps: 5,
            seed: 42,
            pass_rule: PassRule::PsiConsistent,
            params: bench_params(),
            profile: Profile::uniform(1.5),
        };
        assert_eq!(monte_carlo(&cfg).unwrap(), monte_carlo(&cfg).unwrap());
    }

    #[test]
    fn pass_rule_parsing() {
        assert_eq!("psi-consistent".parse::<PassRule>().unwrap(), PassRule::PsiConsistent);
        assert_eq!("upsilon-consistent".parse::<PassRule>().unwrap(), PassRule::UpsilonConsistent);
        assert!("other".parse::<PassRule>().is_err());
    }
}
