//! Meeting rates through friends, expected utilities and marriage rates.
//!
//! Two channels bring a single agent a partner through the friendship
//! network:
//!
//! - *Upsilon*: the agent met a married person directly, and that person
//!   introduces the agent to one of his or her single friends.
//! - *Psi*: a married friend of the agent met somebody directly and passes
//!   that needless date on.
//!
//! Rates are indexed `(e, e')`: the probability that a single of type `e`
//! gains access to at least one partner of type `e'` through the channel.
//! Large-market forms are exponential, `1 - exp(-x)`, and are evaluated
//! through `expm1` because the exponents are tiny at realistic divorce
//! rates.
//!
//! Low types never pass low-type dates to high-type friends, so
//! `Psi_{h,l} = 0` identically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Education, ModelParams, Profile};
use crate::scalar::{one_minus_exp_neg, pow_complement, Scalar};

use Education::{High, Low};

/// A link probability together with whether `min(., 1)` was binding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link<T> {
    pub prob: T,
    pub clipped: bool,
}

/// Probability that two agents of the same gender are friends:
/// `min(s_i s_j / aggregate, 1)`, or 0 when nobody socializes.
pub fn link_probability<T: Scalar>(s_i: T, s_j: T, aggregate: T) -> Link<T> {
    if !(aggregate > T::zero()) {
        return Link {
            prob: T::zero(),
            clipped: false,
        };
    }
    let raw = s_i * s_j / aggregate;
    if raw > T::one() {
        Link {
            prob: T::one(),
            clipped: true,
        }
    } else {
        Link {
            prob: raw,
            clipped: false,
        }
    }
}

/// Link probability between a type-`e` and a type-`other` agent in a
/// population of `n` per gender, both types investing per `profile`.
pub fn pair_link_prob<T: Scalar>(
    e: Education,
    other: Education,
    profile: &Profile<T>,
    params: &ModelParams<T>,
) -> Result<Link<T>> {
    let n = params.population_scalar()?;
    let y = aggregate(profile, params)?;
    Ok(link_probability(
        profile.effort(e),
        profile.effort(other),
        n * y,
    ))
}

fn aggregate<T: Scalar>(profile: &Profile<T>, params: &ModelParams<T>) -> Result<T> {
    let y = profile.aggregate(params.high_share);
    if y > T::zero() {
        Ok(y)
    } else {
        Err(Error::DegenerateProfile(
            "aggregate effort h*s_h + (1-h)*s_l must be positive",
        ))
    }
}

// ---------------------------------------------------------------------------
// One education type
// ---------------------------------------------------------------------------

/// `Upsilon(s) = 1 - exp(-s d)`. Does not depend on the arrival rate.
pub fn upsilon_homogeneous<T: Scalar>(s: T, divorce: T) -> T {
    one_minus_exp_neg(s * divorce)
}

/// `Psi(s) = 1 - exp(-(a (1-d) / d) (1 - exp(-s d)))`.
pub fn psi_homogeneous<T: Scalar>(s: T, arrival: T, divorce: T) -> T {
    one_minus_exp_neg(psi_homogeneous_exponent(s, s, arrival, divorce))
}

/// Psi for a single deviator investing `s_i` while everybody else invests
/// `s`. Own effort enters the exponent linearly.
pub fn psi_homogeneous_dev<T: Scalar>(s_i: T, s: T, arrival: T, divorce: T) -> Result<T> {
    if !(s > T::zero()) {
        return Err(Error::DegenerateProfile(
            "deviation rate needs positive effort by the others",
        ));
    }
    Ok(one_minus_exp_neg(psi_homogeneous_exponent(
        s_i, s, arrival, divorce,
    )))
}

/// Derivative of [`psi_homogeneous_dev`] in the deviator's effort.
pub fn psi_homogeneous_dev_slope<T: Scalar>(s_i: T, s: T, arrival: T, divorce: T) -> Result<T> {
    let psi = psi_homogeneous_dev(s_i, s, arrival, divorce)?;
    let per_unit = arrival * (T::one() - divorce) * one_minus_exp_neg(s * divorce) / (divorce * s);
    Ok((T::one() - psi) * per_unit)
}

fn psi_homogeneous_exponent<T: Scalar>(s_i: T, s: T, arrival: T, divorce: T) -> T {
    let reach = one_minus_exp_neg(s * divorce);
    if s > T::zero() {
        arrival * (T::one() - divorce) * s_i * reach / (divorce * s)
    } else {
        // s_i == s == 0: removable singularity, the rate is zero.
        T::zero()
    }
}

// ---------------------------------------------------------------------------
// Two education types
// ---------------------------------------------------------------------------

/// Which closed form to use for `Psi_{l,l}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsiLowForm {
    /// Large-market limit of the finite-population product for low types.
    /// This is the form whose deviation derivative equals the printed
    /// low-type first-order condition.
    #[default]
    Limit,
    /// The displayed closed form, which carries an extra `(1-h) s_l / y`
    /// factor in the exponent.
    Displayed,
}

/// How `Upsilon_{l,h}` is reconstructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpsilonCross {
    /// `Upsilon_{l,h} = Upsilon_{h,l}`, pool of single low types.
    #[default]
    Symmetric,
    /// Pool of single *high* types `n d h` around a low-type date.
    PoolCount,
}

/// Switches for the formula variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RateOptions {
    pub psi_low: PsiLowForm,
    pub upsilon_cross: UpsilonCross,
}

/// Upsilon for a single of type `e` introduced to a type-`other` friend of
/// a married direct date.
pub fn upsilon<T: Scalar>(
    e: Education,
    other: Education,
    profile: &Profile<T>,
    params: &ModelParams<T>,
) -> Result<T> {
    upsilon_with(e, other, profile, params, RateOptions::default())
}

pub fn upsilon_with<T: Scalar>(
    e: Education,
    other: Education,
    profile: &Profile<T>,
    params: &ModelParams<T>,
    opts: RateOptions,
) -> Result<T> {
    let y = aggregate(profile, params)?;
    let h = params.high_share;
    let l = T::one() - h;
    let d = params.divorce;
    let (sh, sl) = (profile.high, profile.low);
    let exponent = match (e, other) {
        (High, High) => d * h * sh * sh / y,
        (High, Low) => d * l * sh * sl / y,
        (Low, High) => match opts.upsilon_cross {
            UpsilonCross::Symmetric => d * l * sh * sl / y,
            UpsilonCross::PoolCount => d * h * sh * sl / y,
        },
        (Low, Low) => d * l * sl * sl / y,
    };
    Ok(one_minus_exp_neg(exponent))
}

/// Psi for a single of type `e` receiving a type-`other` date from a
/// married friend, at the symmetric profile.
pub fn psi<T: Scalar>(
    e: Education,
    other: Education,
    profile: &Profile<T>,
    params: &ModelParams<T>,
    opts: RateOptions,
) -> Result<T> {
    let own = profile.effort(e);
    psi_dev(e, other, own, profile, params, opts)
}

/// Psi for a single type-`e` deviator investing `s_i` while everybody else
/// follows `profile`.
pub fn psi_dev<T: Scalar>(
    e: Education,
    other: Education,
    s_i: T,
    profile: &Profile<T>,
    params: &ModelParams<T>,
    opts: RateOptions,
) -> Result<T> {
    let per_unit = psi_exponent_per_unit(e, other, profile, params, opts)?;
    Ok(one_minus_exp_neg(per_unit * s_i))
}

/// Derivative of [`psi_dev`] in `s_i`.
pub fn psi_dev_slope<T: Scalar>(
    e: Education,
    other: Education,
    s_i: T,
    profile: &Profile<T>,
    params: &ModelParams<T>,
    opts: RateOptions,
) -> Result<T> {
    let per_unit = psi_exponent_per_unit(e, other, profile, params, opts)?;
    Ok((-(per_unit * s_i)).exp() * per_unit)
}

/// The Psi exponent divided by the receiver's own effort.
fn psi_exponent_per_unit<T: Scalar>(
    e: Education,
    other: Education,
    profile: &Profile<T>,
    params: &ModelParams<T>,
    opts: RateOptions,
) -> Result<T> {
    let y = aggregate(profile, params)?;
    let h = params.high_share;
    let l = T::one() - h;
    let a = params.arrival;
    let d = params.divorce;
    let (sh, sl) = (profile.high, profile.low);
    let base = a * (T::one() - d) / d;
    Ok(match (e, other) {
        (_, High) => base * h * one_minus_exp_neg(d * sh) / y,
        (High, Low) => T::zero(),
        (Low, Low) => {
            let reach = one_minus_exp_neg(d * l * sl * sl / y);
            match opts.psi_low {
                PsiLowForm::Limit if sl > T::zero() => base * reach / sl,
                PsiLowForm::Limit => T::zero(),
                PsiLowForm::Displayed => base * l * reach / y,
            }
        }
    })
}

/// Denominator of the finite-population product for high types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiDenominator {
    /// Competition term uses `p_{l,l}`, as printed.
    #[default]
    Printed,
    /// Competition term uses `p_{h,l}`, the expected number of single low
    /// friends of a high-type holder.
    Corrected,
}

/// Finite-population probability of *not* receiving a same-type date.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteN<T> {
    pub phi: T,
    /// At least one link probability exceeded 1 and was clipped.
    pub clipped: bool,
}

/// `phi_{e,e}` at population size `params.population`.
pub fn phi_finite_n<T: Scalar>(
    e: Education,
    profile: &Profile<T>,
    params: &ModelParams<T>,
    denominator: PhiDenominator,
) -> Result<FiniteN<T>> {
    let n = params.population_scalar()?;
    let one = T::one();
    if !(profile.aggregate(params.high_share) > T::zero()) {
        return Ok(FiniteN {
            phi: one,
            clipped: false,
        });
    }
    let h = params.high_share;
    let l = one - h;
    let a = params.arrival;
    let d = params.divorce;
    let p_hh = pair_link_prob(High, High, profile, params)?;
    let p_hl = pair_link_prob(High, Low, profile, params)?;
    let p_ll = pair_link_prob(Low, Low, profile, params)?;
    let clipped = p_hh.clipped || p_hl.clipped || p_ll.clipped;

    let phi = match e {
        High => {
            let competition = match denominator {
                PhiDenominator::Printed => p_ll.prob,
                PhiDenominator::Corrected => p_hl.prob,
            };
            let reach = one
                - pow_complement(p_hh.prob, d * h * n) * pow_complement(p_hl.prob, d * l * n);
            let denom = d * (h * (n - one) * p_hh.prob + l * n * competition);
            if p_hh.prob == T::zero() || !(denom > T::zero()) {
                one
            } else {
                pow_complement(p_hh.prob * reach / denom, a * (one - d) * h * n)
            }
        }
        Low => {
            let reach = one - pow_complement(p_ll.prob, d * l * n);
            let denom = d * l * n * p_ll.prob;
            if !(denom > T::zero()) {
                one
            } else {
                pow_complement(p_ll.prob * reach / denom, a * (one - d) * l * n)
            }
        }
    };
    Ok(FiniteN { phi, clipped })
}

// ---------------------------------------------------------------------------
// Aggregates
// ---------------------------------------------------------------------------

/// Channel identifiers, in the column order used everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    Psi(Education, Education),
    Upsilon(Education, Education),
}

impl Channel {
    pub const ALL: [Channel; 8] = [
        Channel::Psi(High, High),
        Channel::Psi(Low, High),
        Channel::Psi(Low, Low),
        Channel::Psi(High, Low),
        Channel::Upsilon(High, High),
        Channel::Upsilon(High, Low),
        Channel::Upsilon(Low, High),
        Channel::Upsilon(Low, Low),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Psi(High, High) => "psi_hh",
            Channel::Psi(Low, High) => "psi_lh",
            Channel::Psi(Low, Low) => "psi_ll",
            Channel::Psi(High, Low) => "psi_hl",
            Channel::Upsilon(High, High) => "ups_hh",
            Channel::Upsilon(High, Low) => "ups_hl",
            Channel::Upsilon(Low, High) => "ups_lh",
            Channel::Upsilon(Low, Low) => "ups_ll",
        }
    }

    pub fn index(self) -> usize {
        Channel::ALL.iter().position(|c| *c == self).unwrap()
    }

    /// Type of the single whose access the channel measures.
    pub fn receiver(self) -> Education {
        match self {
            Channel::Psi(e, _) | Channel::Upsilon(e, _) => e,
        }
    }

    /// Type of the partner reached.
    pub fn partner(self) -> Education {
        match self {
            Channel::Psi(_, p) | Channel::Upsilon(_, p) => p,
        }
    }
}

/// All eight channel rates at a symmetric profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchingRates<T> {
    pub psi_hh: T,
    pub psi_lh: T,
    pub psi_ll: T,
    pub psi_hl: T,
    pub ups_hh: T,
    pub ups_hl: T,
    pub ups_lh: T,
    pub ups_ll: T,
}

impl<T: Scalar> MatchingRates<T> {
    pub fn evaluate(profile: &Profile<T>, params: &ModelParams<T>, opts: RateOptions) -> Result<Self> {
        Ok(MatchingRates {
            psi_hh: psi(High, High, profile, params, opts)?,
            psi_lh: psi(Low, High, profile, params, opts)?,
            psi_ll: psi(Low, Low, profile, params, opts)?,
            psi_hl: psi(High, Low, profile, params, opts)?,
            ups_hh: upsilon_with(High, High, profile, params, opts)?,
            ups_hl: upsilon_with(High, Low, profile, params, opts)?,
            ups_lh: upsilon_with(Low, High, profile, params, opts)?,
            ups_ll: upsilon_with(Low, Low, profile, params, opts)?,
        })
    }

    /// All zeros: what every channel delivers when nobody socializes.
    pub fn zero() -> Self {
        let z = T::zero();
        MatchingRates {
            psi_hh: z,
            psi_lh: z,
            psi_ll: z,
            psi_hl: z,
            ups_hh: z,
            ups_hl: z,
            ups_lh: z,
            ups_ll: z,
        }
    }

    pub fn get(&self, channel: Channel) -> T {
        match channel {
            Channel::Psi(High, High) => self.psi_hh,
            Channel::Psi(Low, High) => self.psi_lh,
            Channel::Psi(Low, Low) => self.psi_ll,
            Channel::Psi(High, Low) => self.psi_hl,
            Channel::Upsilon(High, High) => self.ups_hh,
            Channel::Upsilon(High, Low) => self.ups_hl,
            Channel::Upsilon(Low, High) => self.ups_lh,
            Channel::Upsilon(Low, Low) => self.ups_ll,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Channel, T)> + '_ {
        Channel::ALL.into_iter().map(move |c| (c, self.get(c)))
    }
}

/// Whose expected utility to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Agent {
    /// One-type market; the common effort is read from `profile.high`.
    Homogeneous,
    High,
    Low,
}

/// Expected utility of an agent investing `s_i` while everybody else
/// follows `profile`.
///
/// Upsilon terms are evaluated at the symmetric profile: the agent's own
/// effort does not change whether a married direct date has single
/// friends. Only the Psi terms respond to `s_i`.
pub fn expected_utility<T: Scalar>(
    agent: Agent,
    s_i: T,
    profile: &Profile<T>,
    params: &ModelParams<T>,
    opts: RateOptions,
) -> Result<T> {
    let one = T::one();
    let a = params.arrival;
    let d = params.divorce;
    let y_gain = params.high_gain;
    let stay = one - d;
    let cost = params.cost * s_i;
    match agent {
        Agent::Homogeneous => {
            let s = profile.high;
            let v = params.marriage_value;
            let ups = upsilon_homogeneous(s, d);
            let psi_i = if s_i == T::zero() {
                T::zero()
            } else {
                psi_homogeneous_dev(s_i, s, a, d)?
            };
            Ok(v * (stay + d * d * a + d * a * stay * ups + d * (one - a) * psi_i) - cost)
        }
        Agent::High => {
            let ups_hh = upsilon_with(High, High, profile, params, opts)?;
            let ups_hl = upsilon_with(High, Low, profile, params, opts)?;
            let psi_hh = psi_dev(High, High, s_i, profile, params, opts)?;
            let psi_hl = psi_dev(High, Low, s_i, profile, params, opts)?;
            Ok(stay * y_gain
                + d * d * a * y_gain
                + d * a * stay * (ups_hh * y_gain + ups_hl)
                + d * (one - a) * (psi_hh * y_gain + (one - psi_hh) * psi_hl)
                - cost)
        }
        Agent::Low => {
            let ups_lh = upsilon_with(Low, High, profile, params, opts)?;
            let ups_ll = upsilon_with(Low, Low, profile, params, opts)?;
            let psi_lh = psi_dev(Low, High, s_i, profile, params, opts)?;
            let psi_ll = psi_dev(Low, Low, s_i, profile, params, opts)?;
            Ok(stay
                + d * d * a
                + d * a * stay * (ups_lh * y_gain + ups_ll)
                + d * (one - a) * (psi_lh * y_gain + (one - psi_lh) * psi_ll)
                - cost)
        }
    }
}

/// The two definitions of the marriage rate through friends in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarriageRateVariant {
    /// Sum of the Upsilon and Psi rates over partner types.
    Summed,
    /// `a (1-d) Upsilon + (1-a) Psi`, weighting each channel by the
    /// probability that it is the relevant one. One-type market only.
    Weighted,
}

/// Marriage rate through friends in the one-type market.
pub fn marriage_rate_homogeneous<T: Scalar>(
    s: T,
    params: &ModelParams<T>,
    variant: MarriageRateVariant,
) -> T {
    let a = params.arrival;
    let d = params.divorce;
    let ups = upsilon_homogeneous(s, d);
    let psi = psi_homogeneous(s, a, d);
    match variant {
        MarriageRateVariant::Summed => ups + psi,
        MarriageRateVariant::Weighted => a * (T::one() - d) * ups + (T::one() - a) * psi,
    }
}

/// Marriage rate through friends for type `e` in the two-type market.
pub fn marriage_rate<T: Scalar>(
    e: Education,
    profile: &Profile<T>,
    params: &ModelParams<T>,
    variant: MarriageRateVariant,
    opts: RateOptions,
) -> Result<T> {
    if variant == MarriageRateVariant::Weighted {
        return Err(Error::UnsupportedVariant(
            "the weighted marriage rate is defined for the one-type market only",
        ));
    }
    let mut total = T::zero();
    for other in Education::BOTH {
        total = total
            + upsilon_with(e, other, profile, params, opts)?
            + psi(e, other, profile, params, opts)?;
    }
    Ok(total)
}
