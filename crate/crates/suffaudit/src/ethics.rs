//! Distributive-ethics scoring of allocations under four theories.
//!
//! An [`Allocation`] records how much of a single good each individual in
//! each population holds. [`score`] evaluates it under one of four theories:
//!
//! - **maximization** — total goods, regardless of distribution;
//! - **egalitarian** — negated inequality index (Gini by default), so that
//!   higher scores always mean "better by this theory";
//! - **prioritarian** — sum of concavely transformed goods, so gains to
//!   worse-off individuals count for more;
//! - **sufficientarian** — headcount of individuals at or above a threshold,
//!   with the aggregate shortfall below the threshold as a secondary
//!   statistic ([`shortfall`]).
//!
//! Every score is a function of the pooled multiset of individual goods:
//! splitting the same individuals differently across populations, or
//! reordering them, changes nothing. That is deliberate — these theories
//! rank distributions over *individuals*, not over groups.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while building or scoring allocations.
#[derive(Debug, Error)]
pub enum EthicsError {
    #[error("population `{population}` holds a non-finite goods value")]
    NonFinite { population: String },
    #[error("population `{0}` is empty")]
    EmptyPopulation(String),
    #[error("allocation has no populations")]
    NoPopulations,
    #[error("threshold must be finite, got {0}")]
    NonFiniteThreshold(f64),
    #[error("{transform} transform requires goods {requirement}, found {value}")]
    TransformDomain {
        transform: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("Gini index requires non-negative goods, found {0}")]
    NegativeGoods(f64),
}

/// Goods held by named populations of individuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    populations: BTreeMap<String, Vec<f64>>,
}

impl Allocation {
    /// Validates that every population is non-empty and every value finite.
    pub fn new(populations: BTreeMap<String, Vec<f64>>) -> Result<Self, EthicsError> {
        if populations.is_empty() {
            return Err(EthicsError::NoPopulations);
        }
        for (name, goods) in &populations {
            if goods.is_empty() {
                return Err(EthicsError::EmptyPopulation(name.clone()));
            }
            if goods.iter().any(|g| !g.is_finite()) {
                return Err(EthicsError::NonFinite {
                    population: name.clone(),
                });
            }
        }
        Ok(Allocation { populations })
    }

    /// Single unnamed population.
    pub fn from_goods(goods: Vec<f64>) -> Result<Self, EthicsError> {
        Allocation::new([("all".to_string(), goods)].into_iter().collect())
    }

    pub fn populations(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.populations
    }

    /// Every individual's goods, pooled and sorted ascending. Sorting fixes
    /// the floating-point reduction order, which is what makes all scores
    /// exactly invariant under permutation and re-partitioning.
    pub fn pooled(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.populations.values().flatten().copied().collect();
        all.sort_by(f64::total_cmp);
        all
    }
}

/// The four distributive theories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theory {
    Maximization,
    Egalitarian,
    Prioritarian,
    Sufficientarian,
}

/// Inequality index used by the egalitarian score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityIndex {
    #[default]
    Gini,
    Variance,
}

/// Concave transform used by the prioritarian score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorityTransform {
    #[default]
    Sqrt,
    Ln,
}

/// A theory together with the parameters it requires; parameters that a
/// theory does not use cannot be expressed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "theory", rename_all = "snake_case")]
pub enum TheoryParams {
    Maximization,
    Egalitarian {
        #[serde(default)]
        index: InequalityIndex,
    },
    Prioritarian {
        #[serde(default)]
        transform: PriorityTransform,
    },
    Sufficientarian { threshold: f64 },
}

impl TheoryParams {
    pub fn theory(&self) -> Theory {
        match self {
            TheoryParams::Maximization => Theory::Maximization,
            TheoryParams::Egalitarian { .. } => Theory::Egalitarian,
            TheoryParams::Prioritarian { .. } => Theory::Prioritarian,
            TheoryParams::Sufficientarian { .. } => Theory::Sufficientarian,
        }
    }
}

/// Scores an allocation; higher is always better within a theory.
///
/// Scores from different theories are not comparable to one another — a
/// maximization total and a negated Gini share no scale.
pub fn score(alloc: &Allocation, params: &TheoryParams) -> Result<f64, EthicsError> {
    let pooled = alloc.pooled();
    match params {
        TheoryParams::Maximization => Ok(pooled.iter().sum()),
        TheoryParams::Egalitarian { index } => Ok(-inequality(&pooled, *index)?),
        TheoryParams::Prioritarian { transform } => {
            let mut total = 0.0;
            for &g in &pooled {
                total += match transform {
                    PriorityTransform::Sqrt if g < 0.0 => {
                        return Err(EthicsError::TransformDomain {
                            transform: "sqrt",
                            requirement: "≥ 0",
                            value: g,
                        })
                    }
                    PriorityTransform::Sqrt => g.sqrt(),
                    PriorityTransform::Ln if g <= 0.0 => {
                        return Err(EthicsError::TransformDomain {
                            transform: "ln",
                            requirement: "> 0",
                            value: g,
                        })
                    }
                    PriorityTransform::Ln => g.ln(),
                };
            }
            Ok(total)
        }
        TheoryParams::Sufficientarian { threshold } => {
            if !threshold.is_finite() {
                return Err(EthicsError::NonFiniteThreshold(*threshold));
            }
            Ok(pooled.iter().filter(|&&g| g >= *threshold).count() as f64)
        }
    }
}

/// Total distance to the threshold across individuals below it; lower is
/// better. Secondary statistic for the sufficientarian theory: among
/// allocations with equal headcounts it distinguishes how far the
/// insufficient individuals fall short.
pub fn shortfall(alloc: &Allocation, threshold: f64) -> Result<f64, EthicsError> {
    if !threshold.is_finite() {
        return Err(EthicsError::NonFiniteThreshold(threshold));
    }
    Ok(alloc
        .pooled()
        .iter()
        .map(|&g| (threshold - g).max(0.0))
        .sum())
}

fn inequality(pooled: &[f64], index: InequalityIndex) -> Result<f64, EthicsError> {
    let n = pooled.len() as f64;
    match index {
        InequalityIndex::Gini => {
            if let Some(&bad) = pooled.iter().find(|&&g| g < 0.0) {
                return Err(EthicsError::NegativeGoods(bad));
            }
            let mean = pooled.iter().sum::<f64>() / n;
            if mean == 0.0 {
                // Everyone holds zero: no inequality to measure.
                return Ok(0.0);
            }
            // For an ascending sort, Σᵢ Σⱼ |xᵢ−xⱼ| = 2 Σᵢ (2i − n + 1)xᵢ.
            let weighted: f64 = pooled
                .iter()
                .enumerate()
                .map(|(i, &g)| (2.0 * i as f64 - n + 1.0) * g)
                .sum();
            Ok(weighted / (n * n * mean))
        }
        InequalityIndex::Variance => {
            let mean = pooled.iter().sum::<f64>() / n;
            Ok(pooled.iter().map(|&g| (g - mean).powi(2)).sum::<f64>() / n)
        }
    }
}

/// Which of two allocations a theory prefers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preference {
    A,
    B,
    Indifferent,
}

impl fmt::Display for Preference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preference::A => "A",
            Preference::B => "B",
            Preference::Indifferent => "indifferent",
        })
    }
}

/// Compares two allocations by score; exact ties are `Indifferent`.
pub fn compare(
    a: &Allocation,
    b: &Allocation,
    params: &TheoryParams,
) -> Result<Preference, EthicsError> {
    let sa = score(a, params)?;
    let sb = score(b, params)?;
    Ok(if sa > sb {
        Preference::A
    } else if sb > sa {
        Preference::B
    } else {
        Preference::Indifferent
    })
}
