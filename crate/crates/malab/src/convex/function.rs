use serde::{Deserialize, Serialize};

use crate::error::{MalabError, Result};
use crate::grid::{GridSpec, NodeKind};

/// Optional constants attached to a function: ellipticity bounds and sup-norm bound.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FunctionMeta {
    pub lambda: Option<f64>,
    #[serde(rename = "Lambda")]
    pub big_lambda: Option<f64>,
    #[serde(rename = "K")]
    pub sup_bound: Option<f64>,
}

/// Values on the in-domain nodes of a grid. Exterior nodes hold NaN.
#[derive(Debug, Clone)]
pub struct ConvexGridFunction {
    grid: GridSpec,
    values: Vec<f64>,
    kinds: Vec<NodeKind>,
    certified: bool,
    pub meta: FunctionMeta,
}

impl ConvexGridFunction {
    pub fn new(grid: GridSpec, mut values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(MalabError::SizeMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        let kinds = grid.node_kinds();
        for (i, k) in kinds.iter().enumerate() {
            if k.in_domain() {
                if !values[i].is_finite() {
                    return Err(MalabError::NonFinite { node: i });
                }
            } else {
                values[i] = f64::NAN;
            }
        }
        Ok(ConvexGridFunction {
            grid,
            values,
            kinds,
            certified: false,
            meta: FunctionMeta::default(),
        })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.point(i);
                f(&x[..grid.dim])
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn kind(&self, idx: usize) -> NodeKind {
        self.kinds[idx]
    }

    pub fn in_domain(&self, idx: usize) -> bool {
        self.kinds[idx].in_domain()
    }

    pub fn is_certified(&self) -> bool {
        self.certified
    }

    /// Runs the discrete convexity check and sets the certificate on success.
    pub fn certify(&mut self, tol_convex: f64) -> bool {
        self.certified = super::is_discretely_convex(self, tol_convex).convex;
        self.certified
    }

    pub(crate) fn set_certified(&mut self, flag: bool) {
        self.certified = flag;
    }

    /// Maximum absolute in-domain value.
    pub fn sup_norm(&self) -> f64 {
        self.in_domain_values().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Default convexity tolerance: 1e-9 times the value scale.
    pub fn default_tol_convex(&self) -> f64 {
        1e-9 * self.sup_norm().max(1.0)
    }

    pub fn in_domain_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().zip(&self.kinds).filter(|(_, k)| k.in_domain()).map(|(v, _)| *v)
    }

    /// Replaces the values, keeping grid and metadata. Drops the certificate.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        let mut out = Self::new(self.grid.clone(), values)?;
        out.meta = self.meta.clone();
        Ok(out)
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}
