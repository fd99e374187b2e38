//! Market primitives and socialization profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Scalar};

/// Education level of an agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Education {
    High,
    Low,
}

impl Education {
    pub const BOTH: [Education; 2] = [Education::High, Education::Low];

    pub fn tag(self) -> &'static str {
        match self {
            Education::High => "h",
            Education::Low => "l",
        }
    }
}

/// Primitives of the marriage market.
///
/// Marrying a low type is worth 1 and staying single 0. `high_gain` is the
/// value of marrying a high type. `marriage_value` scales every marriage
/// payoff in the one-type model so that the figure parameterization (value
/// of marriage 2) can be expressed; 1 gives the normalized model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    /// Probability of meeting a potential partner directly.
    pub arrival: T,
    /// Probability that a couple divorces.
    pub divorce: T,
    /// Marginal cost of socialization.
    pub cost: T,
    /// Population share of high types.
    pub high_share: T,
    /// Gain from marrying a high type.
    pub high_gain: T,
    /// Marriage value in the one-type model.
    pub marriage_value: T,
    /// Agents per gender, when finite-population quantities are needed.
    pub population: Option<usize>,
}

impl<T: Scalar> Default for ModelParams<T> {
    fn default() -> Self {
        ModelParams {
            arrival: lit(0.5),
            divorce: lit(0.015),
            cost: lit(0.005),
            high_share: lit(0.8),
            high_gain: lit(2.0),
            marriage_value: T::one(),
            population: None,
        }
    }
}

impl<T: Scalar> ModelParams<T> {
    pub fn with_arrival(mut self, a: T) -> Self {
        self.arrival = a;
        self
    }

    pub fn with_divorce(mut self, d: T) -> Self {
        self.divorce = d;
        self
    }

    pub fn with_cost(mut self, c: T) -> Self {
        self.cost = c;
        self
    }

    pub fn with_high_share(mut self, h: T) -> Self {
        self.high_share = h;
        self
    }

    pub fn with_high_gain(mut self, y: T) -> Self {
        self.high_gain = y;
        self
    }

    pub fn with_marriage_value(mut self, v: T) -> Self {
        self.marriage_value = v;
        self
    }

    pub fn with_population(mut self, n: usize) -> Self {
        self.population = Some(n);
        self
    }

    /// Rejects anything outside the admissible ranges.
    pub fn validate(&self) -> Result<()> {
        let zero = T::zero();
        let one = T::one();
        open_unit(self.arrival, "a")?;
        open_unit(self.divorce, "d")?;
        if !(self.cost > zero) {
            return Err(invalid("c", self.cost, "must be > 0"));
        }
        if !(self.high_share >= zero && self.high_share <= one) {
            return Err(invalid("h", self.high_share, "must lie in [0, 1]"));
        }
        if !(self.high_gain >= one) || !self.high_gain.is_finite() {
            return Err(invalid("Y", self.high_gain, "must be finite and >= 1"));
        }
        if !(self.marriage_value >= one) || !self.marriage_value.is_finite() {
            return Err(invalid("V", self.marriage_value, "must be finite and >= 1"));
        }
        if let Some(n) = self.population {
            if n < 2 {
                return Err(Error::InvalidParameter {
                    field: "n",
                    value: n as f64,
                    reason: "must be >= 2",
                });
            }
        }
        Ok(())
    }

    pub(crate) fn population_scalar(&self) -> Result<T> {
        let n = self.population.ok_or(Error::MissingPopulation)?;
        Ok(T::from_usize(n).expect("population fits the scalar type"))
    }

    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let c = |x: T| lit::<U>(to_f64(x));
        ModelParams {
            arrival: c(self.arrival),
            divorce: c(self.divorce),
            cost: c(self.cost),
            high_share: c(self.high_share),
            high_gain: c(self.high_gain),
            marriage_value: c(self.marriage_value),
            population: self.population,
        }
    }
}

fn open_unit<T: Scalar>(x: T, field: &'static str) -> Result<()> {
    if x > T::zero() && x < T::one() {
        Ok(())
    } else {
        Err(invalid(field, x, "must lie in the open interval (0, 1)"))
    }
}

fn invalid<T: Scalar>(field: &'static str, value: T, reason: &'static str) -> Error {
    Error::InvalidParameter {
        field,
        value: to_f64(value),
        reason,
    }
}

/// Symmetric socialization investments by education type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Profile<T> {
    pub high: T,
    pub low: T,
}

impl<T: Scalar> Profile<T> {
    pub fn new(high: T, low: T) -> Self {
        Profile { high, low }
    }

    /// Both types invest `s`.
    pub fn uniform(s: T) -> Self {
        Profile { high: s, low: s }
    }

    pub fn effort(&self, e: Education) -> T {
        match e {
            Education::High => self.high,
            Education::Low => self.low,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("s_h", self.high), ("s_l", self.low)] {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(invalid(field, v, "must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// Per-capita aggregate effort `h s_h + (1 - h) s_l`.
    pub fn aggregate(&self, high_share: T) -> T {
        high_share * self.high + (T::one() - high_share) * self.low
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ModelParams::<f64>::default().validate().unwrap();
        ModelParams::<f32>::default().validate().unwrap();
    }

    #[test]
    fn rejects_out_of_range() {
        let p = ModelParams::<f64>::default();
        for bad in [
            p.with_arrival(0.0),
            p.with_arrival(1.0),
            p.with_divorce(1.2),
            p.with_cost(0.0),
            p.with_high_share(-0.1),
            p.with_high_gain(0.5),
            p.with_marriage_value(f64::INFINITY),
            p.with_population(1),
        ] {
            let err = bad.validate().unwrap_err();
            assert!(matches!(err, Error::InvalidParameter { .. }), "{err}");
        }
    }

    #[test]
    fn error_names_the_field() {
        let err = ModelParams::<f64>::default()
            .with_divorce(0.0)
            .validate()
            .unwrap_err();
        assert!(err.to_string().contains("`d`"));
    }

    #[test]
    fn profile_aggregate() {
        let p = Profile::new(2.0, 1.0);
        assert_eq!(p.aggregate(0.5), 1.5);
        assert!(Profile::new(-1.0, 0.0).validate().is_err());
    }
}
