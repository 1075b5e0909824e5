use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::legendre::{poly_space_dim, MultiIndexSet};

/// Smoothness parameters: dimension `N`, `alpha >= 0`, `d = floor(alpha)` and
/// `p = N / (N + alpha)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CtxRepr", into = "CtxRepr")]
pub struct AlphaContext {
    dim: usize,
    alpha: f64,
    degree: usize,
    p: f64,
}

#[derive(Serialize, Deserialize)]
struct CtxRepr {
    dim: usize,
    alpha: f64,
    #[serde(default, skip_deserializing)]
    degree: usize,
    #[serde(default, skip_deserializing)]
    p: f64,
}

impl TryFrom<CtxRepr> for AlphaContext {
    type Error = Error;
    fn try_from(r: CtxRepr) -> Result<Self> {
        AlphaContext::new(r.dim, r.alpha)
    }
}

impl From<AlphaContext> for CtxRepr {
    fn from(c: AlphaContext) -> Self {
        CtxRepr { dim: c.dim, alpha: c.alpha, degree: c.degree, p: c.p }
    }
}

impl AlphaContext {
    pub fn new(dim: usize, alpha: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::param("alpha", format!("must be finite and >= 0, got {alpha}")));
        }
        let degree = alpha.floor() as usize;
        Ok(AlphaContext { dim, alpha, degree, p: dim as f64 / (dim as f64 + alpha) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `[alpha]`, the highest vanishing-moment order.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `N / p = N + alpha`.
    pub fn n_over_p(&self) -> f64 {
        self.dim as f64 + self.alpha
    }

    /// `C(N + d, N)`.
    pub fn d_poly(&self) -> usize {
        poly_space_dim(self.dim, self.degree)
    }

    pub fn moment_set(&self) -> Arc<MultiIndexSet> {
        MultiIndexSet::get(self.dim, self.degree)
    }
}
