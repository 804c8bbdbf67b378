//! Bracketed scalar root finding for fallible objectives.

use roots::{find_root_brent, Convergency};

use crate::error::{Result, ZgknError};

struct Tolerance {
    xtol: f64,
    ytol: f64,
    max_iter: usize,
}

impl Convergency<f64> for Tolerance {
    fn is_root_found(&mut self, y: f64) -> bool {
        y.abs() <= self.ytol
    }

    fn is_converged(&mut self, x1: f64, x2: f64) -> bool {
        (x1 - x2).abs() <= self.xtol
    }

    fn is_iteration_limit_reached(&mut self, iter: usize) -> bool {
        iter >= self.max_iter
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub evaluations: usize,
}

/// Brent's method on `[lo, hi]`. The first error raised by `f` aborts the search.
pub fn brent(mut f: impl FnMut(f64) -> Result<f64>, lo: f64, hi: f64, xtol: f64, ytol: f64) -> Result<Root> {
    let mut err = None;
    let mut evaluations = 0;
    let mut g = |x: f64| {
        evaluations += 1;
        if err.is_some() {
            return 0.0;
        }
        match f(x) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                0.0
            }
        }
    };
    let mut tol = Tolerance { xtol, ytol, max_iter: 200 };
    let found = find_root_brent(lo, hi, &mut g, &mut tol);
    if let Some(e) = err {
        return Err(e);
    }
    match found {
        Ok(x) => Ok(Root { x, evaluations }),
        Err(_) => Err(ZgknError::NoRootInBracket { lo, hi }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cubic_root() {
        let r = brent(|x| Ok(x * x * x - 2.0), 0.0, 2.0, 1e-14, 0.0).unwrap();
        assert!((r.x - 2f64.cbrt()).abs() < 1e-13);
    }

    #[test]
    fn reports_missing_bracket_and_errors() {
        assert!(matches!(brent(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-12, 0.0), Err(ZgknError::NoRootInBracket { .. })));
        assert_eq!(brent(|_| Err(ZgknError::ZeroSpinor), -1.0, 1.0, 1e-12, 0.0), Err(ZgknError::ZeroSpinor));
    }
}
