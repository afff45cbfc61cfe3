//! Centered univariate bases.

use serde::{Deserialize, Serialize};

use crate::error::{GqrError, Result};
use crate::Matrix;

/// Relative widening applied to data-derived domains.
pub const DOMAIN_MARGIN: f64 = 1e-9;
/// Relative tolerance under which out-of-domain values are clamped silently.
pub const CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BasisFamily {
    /// Cubic B-splines on equidistant interior knots; `interior_knots + 3`
    /// centered functions (one of the `interior_knots + 4` raw splines is
    /// dropped, since the centered set sums to zero).
    CubicBSpline { interior_knots: usize },
    /// `√2 sin(2πl t)`, `√2 cos(2πl t)`, `l = 1, 2, …`, truncated to `m`
    /// functions, with `t` the covariate mapped to `[0, 1]`.
    Fourier { m: usize },
}

impl BasisFamily {
    pub fn m(&self) -> usize {
        match *self {
            BasisFamily::CubicBSpline { interior_knots } => interior_knots + 3,
            BasisFamily::Fourier { m } => m,
        }
    }
}

impl Default for BasisFamily {
    fn default() -> Self {
        BasisFamily::CubicBSpline { interior_knots: 4 }
    }
}

/// What to do with covariate values outside the basis domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutOfDomain {
    #[default]
    Clamp,
    Error,
}

/// Basis family plus one domain `[lo, hi]` per covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub family: BasisFamily,
    pub domains: Vec<(f64, f64)>,
    /// Full clamped knot vector on `[0, 1]` (splines only).
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    knots: Vec<f64>,
}

/// Validates the family and domains and precomputes the knot vector.
pub fn build_basis(family: BasisFamily, domains: &[(f64, f64)]) -> Result<BasisSpec> {
    BasisSpec::new(family, domains.to_vec())
}

impl BasisSpec {
    pub fn new(family: BasisFamily, domains: Vec<(f64, f64)>) -> Result<Self> {
        if domains.is_empty() {
            return Err(GqrError::InvalidParameter(
                "at least one covariate domain required".into(),
            ));
        }
        for (k, &(lo, hi)) in domains.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(GqrError::InvalidParameter(format!(
                    "degenerate domain [{lo}, {hi}] for covariate {k}"
                )));
            }
        }
        let knots = match family {
            BasisFamily::CubicBSpline { interior_knots } => {
                let mut t = vec![0.0; 4];
                let span = (interior_knots + 1) as f64;
                t.extend((1..=interior_knots).map(|j| j as f64 / span));
                t.extend([1.0; 4]);
                t
            }
            BasisFamily::Fourier { m } => {
                if m == 0 {
                    return Err(GqrError::InvalidParameter("Fourier basis needs m >= 1".into()));
                }
                Vec::new()
            }
        };
        Ok(Self { family, domains, knots })
    }

    /// Same family on every column of `z`, domains from the column ranges
    /// widened by a relative `1e-9`.
    pub fn from_data(family: BasisFamily, z: &Matrix) -> Result<Self> {
        if z.nrows() == 0 {
            return Err(GqrError::DegenerateDesign("no observations".into()));
        }
        let domains = z
            .column_iter()
            .map(|c| {
                let lo = c.min();
                let hi = c.max();
                let pad = DOMAIN_MARGIN * (hi - lo).abs().max(lo.abs().max(hi.abs())).max(1.0);
                (lo - pad, hi + pad)
            })
            .collect();
        Self::new(family, domains)
    }

    pub fn m(&self) -> usize {
        self.family.m()
    }

    /// Number of covariates.
    pub fn d(&self) -> usize {
        self.domains.len()
    }

    /// Clamped knot vector on `[0, 1]`; empty for Fourier bases.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Maps `z` into `[0, 1]`, clamping. Returns the mapped value and whether
    /// `z` was further outside than the clamp tolerance.
    pub fn to_unit(&self, k: usize, z: f64) -> (f64, bool) {
        let (lo, hi) = self.domains[k];
        let t = (z - lo) / (hi - lo);
        let outside = !(-CLAMP_TOL..=1.0 + CLAMP_TOL).contains(&t);
        (t.clamp(0.0, 1.0), outside)
    }

    /// Centered basis of covariate `k` at `z`, written into `out[..m]`.
    /// Values outside the domain are clamped to it.
    pub fn eval_into(&self, k: usize, z: f64, out: &mut [f64]) {
        let (t, _) = self.to_unit(k, z);
        self.eval_unit(t, out);
    }

    pub fn eval(&self, k: usize, z: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.m()];
        self.eval_into(k, z, &mut out);
        out
    }

    /// Centered basis at `t ∈ [0, 1]`.
    pub fn eval_unit(&self, t: f64, out: &mut [f64]) {
        let m = self.m();
        match self.family {
            BasisFamily::Fourier { .. } => {
                let s2 = std::f64::consts::SQRT_2;
                for (j, o) in out.iter_mut().take(m).enumerate() {
                    let l = (j / 2 + 1) as f64;
                    let arg = 2.0 * std::f64::consts::PI * l * t;
                    *o = if j % 2 == 0 { s2 * arg.sin() } else { s2 * arg.cos() };
                }
            }
            BasisFamily::CubicBSpline { .. } => {
                let t_k = &self.knots;
                let mut raw = [0.0; 4];
                let span = bspline_nonzero(t_k, t, &mut raw);
                for (j, o) in out.iter_mut().take(m).enumerate() {
                    let mean = (t_k[j + 4] - t_k[j]) / 4.0;
                    let v = if j + 3 >= span && j <= span {
                        raw[j + 3 - span]
                    } else {
                        0.0
                    };
                    *o = v - mean;
                }
            }
        }
    }
}

/// The four cubic B-splines that may be nonzero at `t`: writes
/// `B_{s−3}, …, B_s` into `out` and returns the span index `s`
/// (`t_s ≤ t < t_{s+1}`, with the right endpoint assigned to the last span).
fn bspline_nonzero(knots: &[f64], t: f64, out: &mut [f64; 4]) -> usize {
    const P: usize = 3;
    let n_basis = knots.len() - P - 1;
    let s = if t >= knots[n_basis] {
        n_basis - 1
    } else {
        // last s with knots[s] <= t, searched among the non-degenerate spans
        let mut s = P;
        while s + 1 < n_basis && knots[s + 1] <= t {
            s += 1;
        }
        s
    };
    let mut left = [0.0; P + 1];
    let mut right = [0.0; P + 1];
    out[0] = 1.0;
    for j in 1..=P {
        left[j] = t - knots[s + 1 - j];
        right[j] = knots[s + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            let tmp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        out[j] = saved;
    }
    s
}
