//! Block-dependence designs and correlation matrices.
//!
//! A design splits `m` coordinates into consecutive blocks of size `b` (the
//! last block takes the remainder). Pairs inside a block share the canonical
//! correlation `rho`; pairs in different blocks are independent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lancaster::{FamilyParams, Marginal};

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidDesign(msg.into())
}

/// How alternative coordinates depart from the null law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AltSpec {
    /// Gamma alternatives: the statistic is multiplied by this factor (> 1).
    ScaleFactor(f64),
    /// Poisson and negative binomial alternatives: the mean grows by this
    /// amount (> 0) through an independent additive component of the same
    /// family.
    MeanShift(f64),
}

/// Placement of the true nulls among the `m` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullLayout {
    /// A uniformly random subset, redrawn for every replication.
    #[default]
    Random,
    /// Coordinates `0 .. m0`.
    Leading,
}

/// A complete block-dependence design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DependenceDesign {
    pub m: usize,
    pub block_size: usize,
    pub rho: f64,
    pub family: FamilyParams,
    pub pi0: f64,
    #[serde(default)]
    pub alt: Option<AltSpec>,
    #[serde(default)]
    pub null_layout: NullLayout,
    pub seed: u64,
}

impl DependenceDesign {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(invalid("m must be at least 1"));
        }
        if self.block_size == 0 || self.block_size > self.m {
            return Err(invalid(format!(
                "block size {} outside 1..={}",
                self.block_size, self.m
            )));
        }
        if self.family.symmetric_marginal().is_none() {
            return Err(invalid(
                "vector designs need a family with equal marginals; gamma_nb is pairwise only",
            ));
        }
        self.family
            .check_rho(self.rho)
            .map_err(|e| invalid(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.pi0) {
            return Err(invalid(format!("pi0 {} outside [0, 1]", self.pi0)));
        }
        if self.m0() < self.m {
            let alt = self
                .alt
                .ok_or_else(|| invalid("an alternative is required when pi0 < 1"))?;
            match (self.family, alt) {
                (FamilyParams::Gamma(_), AltSpec::ScaleFactor(s)) if s > 1.0 && s.is_finite() => {}
                (FamilyParams::Poisson(_) | FamilyParams::NegBinomial(_), AltSpec::MeanShift(d))
                    if d > 0.0 && d.is_finite() => {}
                (fam, alt) => {
                    return Err(invalid(format!(
                        "alternative {alt:?} does not fit the {} family",
                        fam.name()
                    )))
                }
            }
        }
        Ok(())
    }

    /// Number of true nulls, `round(pi0 · m)`.
    pub fn m0(&self) -> usize {
        ((self.pi0 * self.m as f64).round() as usize).min(self.m)
    }

    pub fn null_marginal(&self) -> Marginal {
        self.family
            .symmetric_marginal()
            .expect("validated designs have equal marginals")
    }

    /// `(start, len)` of every block.
    pub fn blocks(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let b = self.block_size.max(1);
        (0..self.m)
            .step_by(b)
            .map(move |start| (start, b.min(self.m - start)))
    }

    /// Ordered pairs `i ≠ j` sharing a block.
    pub fn within_block_pairs(&self) -> u64 {
        let b = self.block_size.max(1) as u64;
        let (m, r) = (self.m as u64, self.m as u64 % self.block_size.max(1) as u64);
        (m / b) * b * (b - 1) + r * r.saturating_sub(1)
    }

    pub fn correlation(&self, i: usize, j: usize) -> f64 {
        if i == j {
            1.0
        } else if i / self.block_size == j / self.block_size {
            self.rho
        } else {
            0.0
        }
    }

    /// The implied correlation matrix, for small `m`.
    pub fn explicit_matrix(&self) -> Result<CorrelationMatrix> {
        let m = self.m;
        let mut data = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                data[i * m + j] = self.correlation(i, j);
            }
        }
        CorrelationMatrix::new(m, data)
    }
}

/// Block size as a function of `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BlockRule {
    /// A constant size, capped at `m`.
    Fixed(usize),
    /// `⌈√m⌉`.
    Sqrt,
    /// `⌈m^γ⌉` for `0 ≤ γ ≤ 1`.
    Power(f64),
    /// A single block of size `m`.
    Full,
}

impl BlockRule {
    pub fn block_size(&self, m: usize) -> usize {
        let b = match *self {
            BlockRule::Fixed(b) => b,
            BlockRule::Sqrt => (m as f64).sqrt().ceil() as usize,
            BlockRule::Power(g) => (m as f64).powf(g).ceil() as usize,
            BlockRule::Full => m,
        };
        b.clamp(1, m.max(1))
    }
}

/// A design with `m` left open, used by sweeps over a grid of `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignTemplate {
    pub block: BlockRule,
    pub rho: f64,
    pub family: FamilyParams,
    pub pi0: f64,
    #[serde(default)]
    pub alt: Option<AltSpec>,
    #[serde(default)]
    pub null_layout: NullLayout,
    pub seed: u64,
}

impl DesignTemplate {
    pub fn design(&self, m: usize) -> Result<DependenceDesign> {
        if let BlockRule::Power(g) = self.block {
            if !(0.0..=1.0).contains(&g) {
                return Err(invalid(format!("block exponent {g} outside [0, 1]")));
            }
        }
        let d = DependenceDesign {
            m,
            block_size: self.block.block_size(m),
            rho: self.rho,
            family: self.family,
            pi0: self.pi0,
            alt: self.alt,
            null_layout: self.null_layout,
            seed: self.seed,
        };
        d.validate()?;
        Ok(d)
    }
}

/// A symmetric correlation matrix with unit diagonal, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    m: usize,
    data: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn new(m: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != m * m {
            return Err(Error::InvalidMatrix(format!(
                "{} entries for a {m} × {m} matrix",
                data.len()
            )));
        }
        for i in 0..m {
            if data[i * m + i] != 1.0 {
                return Err(Error::InvalidMatrix(format!("diagonal entry {i} is not 1")));
            }
            for j in 0..i {
                let (a, b) = (data[i * m + j], data[j * m + i]);
                if a != b {
                    return Err(Error::InvalidMatrix(format!("entries ({i}, {j}) and ({j}, {i}) differ")));
                }
                if !(-1.0..=1.0).contains(&a) {
                    return Err(Error::InvalidMatrix(format!("entry ({i}, {j}) = {a} outside [−1, 1]")));
                }
            }
        }
        Ok(Self { m, data })
    }

    pub fn identity(m: usize) -> Self {
        let mut data = vec![0.0; m * m];
        for i in 0..m {
            data[i * m + i] = 1.0;
        }
        Self { m, data }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }

    /// Off-diagonal entries `ρ_ij`, `i ≠ j`, in row-major order.
    pub fn off_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        let m = self.m;
        self.data
            .iter()
            .enumerate()
            .filter(move |(k, _)| k / m != k % m)
            .map(|(_, &v)| v)
    }
}

/// `||R||_1 = m + Σ_blocks b_k (b_k − 1) |ρ|`.
pub fn l1_norm(design: &DependenceDesign) -> f64 {
    design.m as f64 + design.within_block_pairs() as f64 * design.rho.abs()
}

/// `||R||_1 = Σ_{i,j} |ρ_ij|`.
pub fn l1_norm_matrix(r: &CorrelationMatrix) -> f64 {
    r.data.iter().map(|v| v.abs()).sum()
}
