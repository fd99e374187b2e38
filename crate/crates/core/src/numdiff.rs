//! Finite-difference derivatives.

use crate::error::Result;
use crate::scalar::{lit, Scalar};

/// Central difference `(f(x+h) - f(x-h)) / 2h`.
pub fn central<T, F>(mut f: F, x: T, h: T) -> Result<T>
where
    T: Scalar,
    F: FnMut(T) -> Result<T>,
{
    let up = f(x + h)?;
    let down = f(x - h)?;
    Ok((up - down) / (h + h))
}

/// Central difference with one Richardson step, `(4 D(h/2) - D(h)) / 3`.
/// The error is `O(h^4)` for smooth `f`.
pub fn richardson<T, F>(mut f: F, x: T, h: T) -> Result<T>
where
    T: Scalar,
    F: FnMut(T) -> Result<T>,
{
    let coarse = central(&mut f, x, h)?;
    let fine = central(&mut f, x, h / lit(2.0))?;
    Ok((lit::<T>(4.0) * fine - coarse) / lit(3.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_low_degree_polynomials() {
        let cubic = |x: f64| Ok(x * x * x - 2.0 * x);
        let d = central(cubic, 2.0, 1e-3).unwrap();
        assert!((d - 10.0).abs() < 1e-5);
        let quintic = |x: f64| Ok(x.powi(4));
        let r = richardson(quintic, 1.0, 1e-2).unwrap();
        assert!((r - 4.0).abs() < 1e-10);
    }

    #[test]
    fn richardson_beats_plain_central() {
        let f = |x: f64| Ok(x.sin());
        let exact = 1.0_f64.cos();
        let plain = (central(f, 1.0, 1e-2).unwrap() - exact).abs();
        let refined = (richardson(f, 1.0, 1e-2).unwrap() - exact).abs();
        assert!(refined < plain / 100.0);
    }
}
