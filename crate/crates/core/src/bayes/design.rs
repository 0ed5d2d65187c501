use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::corpus::FeatureKind;
use crate::error::{Error, Result};
use crate::experiment::{Channel, ExperimentResult, Representation, Strategy};
use crate::stats::fisher_z;

pub const INTERCEPT: &str = "(Intercept)";

/// One per-target CCC of the analysed channel and feature kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub representation: Representation,
    pub strategy: Strategy,
    pub test_corpus: String,
    pub target: String,
    pub ccc: f64,
    pub z: f64,
}

/// A categorical factor: level names and the level index of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub name: String,
    pub levels: Vec<String>,
    pub index: Vec<usize>,
}

/// Design columns tested together, such as a main effect or an interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub columns: Vec<usize>,
}

/// Response and full-rank design matrix. Column 0 is the intercept.
#[derive(Debug, Clone)]
pub struct Design {
    pub y: Vec<f64>,
    pub x: DMatrix<f64>,
    pub column_names: Vec<String>,
    pub blocks: Vec<Block>,
    /// Factor names and levels when the design was built from factors.
    pub factors: Vec<(String, Vec<String>)>,
    pub observations: Vec<Observation>,
}

/// Sum-to-zero code of `level` among `n` levels: a unit vector for the first
/// `n - 1` levels and all minus ones for the last.
fn sum_code(level: usize, n: usize) -> Vec<f64> {
    if level + 1 == n {
        vec![-1.0; n - 1]
    } else {
        (0..n - 1).map(|j| if j == level { 1.0 } else { 0.0 }).collect()
    }
}

/// Non-empty subsets of `0..k` ordered by size, then lexicographically.
fn interaction_terms(k: usize) -> Vec<Vec<usize>> {
    let mut terms: Vec<Vec<usize>> = (1u32..1 << k).map(|m| (0..k).filter(|i| m & (1 << i) != 0).collect()).collect();
    terms.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    terms
}

fn rank(x: &DMatrix<f64>) -> usize {
    let svd = x.clone().svd(false, false);
    let max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    svd.singular_values.iter().filter(|s| **s > 1e-9 * max.max(f64::MIN_POSITIVE)).count()
}

impl Design {
    /// Validates a prebuilt design: finite values, constant first column,
    /// blocks within range and full column rank.
    pub fn from_matrix(y: Vec<f64>, x: DMatrix<f64>, column_names: Vec<String>, blocks: Vec<Block>) -> Result<Design> {
        if x.nrows() != y.len() {
            return Err(Error::shape(format!("{} responses", x.nrows()), y.len()));
        }
        if column_names.len() != x.ncols() {
            return Err(Error::shape(format!("{} column names", x.ncols()), column_names.len()));
        }
        if x.ncols() == 0 || x.column(0).iter().any(|v| *v != 1.0) {
            return Err(Error::DegenerateInput("first design column must be the intercept"));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput("non-finite value in design"));
        }
        if blocks.iter().flat_map(|b| &b.columns).any(|&c| c == 0 || c >= x.ncols()) {
            return Err(Error::DegenerateInput("block refers to the intercept or a missing column"));
        }
        let r = rank(&x);
        if r < x.ncols() {
            return Err(Error::RankDeficient { rank: r, columns: x.ncols() });
        }
        Ok(Design {
            y,
            x,
            column_names,
            blocks,
            factors: Vec::new(),
            observations: Vec::new(),
        })
    }

    /// Sum-coded main effects and all interactions of the given factors.
    pub fn from_factors(y: Vec<f64>, factors: &[Factor]) -> Result<Design> {
        for f in factors {
            if f.index.len() != y.len() {
                return Err(Error::shape(format!("{} level indices for `{}`", y.len(), f.name), f.index.len()));
            }
            if f.levels.len() < 2 {
                return Err(Error::MissingLevel {
                    factor: f.name.clone(),
                    level: "a second level".into(),
                });
            }
            for (l, name) in f.levels.iter().enumerate() {
                if !f.index.contains(&l) {
                    return Err(Error::MissingLevel {
                        factor: f.name.clone(),
                        level: name.clone(),
                    });
                }
            }
            if f.index.iter().any(|&i| i >= f.levels.len()) {
                return Err(Error::DegenerateInput("level index out of range"));
            }
        }
        let terms = interaction_terms(factors.len());
        let mut column_names = vec![INTERCEPT.to_string()];
        let mut blocks = Vec::new();
        for term in &terms {
            let mut names = vec![String::new()];
            for &fi in term {
                let f = &factors[fi];
                names = names
                    .iter()
                    .flat_map(|prefix| {
                        f.levels[..f.levels.len() - 1].iter().map(move |l| {
                            let sep = if prefix.is_empty() { "" } else { ":" };
                            format!("{prefix}{sep}{}[{l}]", f.name)
                        })
                    })
                    .collect();
            }
            let start = column_names.len();
            column_names.extend(names);
            blocks.push(Block {
                name: term.iter().map(|&fi| factors[fi].name.as_str()).collect::<Vec<_>>().join(":"),
                columns: (start..column_names.len()).collect(),
            });
        }
        let sizes: Vec<usize> = factors.iter().map(|f| f.levels.len()).collect();
        let rows: Vec<Vec<f64>> = (0..y.len())
            .map(|i| coded_row(&terms, &sizes, &factors.iter().map(|f| f.index[i]).collect::<Vec<_>>()))
            .collect();
        let x = DMatrix::from_fn(y.len(), column_names.len(), |i, j| rows[i][j]);
        let mut d = Design::from_matrix(y, x, column_names, blocks)?;
        d.factors = factors.iter().map(|f| (f.name.clone(), f.levels.clone())).collect();
        Ok(d)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_columns(&self) -> usize {
        self.x.ncols()
    }

    pub fn block(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }

    /// Design row of one cell, given a level name per factor. Its product
    /// with the coefficients is that cell's mean.
    pub fn cell_row(&self, levels: &[&str]) -> Result<Vec<f64>> {
        if levels.len() != self.factors.len() {
            return Err(Error::shape(format!("{} factor levels", self.factors.len()), levels.len()));
        }
        let idx = self
            .factors
            .iter()
            .zip(levels)
            .map(|((name, lv), l)| {
                lv.iter().position(|v| v == l).ok_or_else(|| Error::MissingLevel {
                    factor: name.clone(),
                    level: l.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let sizes: Vec<usize> = self.factors.iter().map(|(_, l)| l.len()).collect();
        Ok(coded_row(&interaction_terms(sizes.len()), &sizes, &idx))
    }
}

fn coded_row(terms: &[Vec<usize>], sizes: &[usize], idx: &[usize]) -> Vec<f64> {
    let codes: Vec<Vec<f64>> = idx.iter().zip(sizes).map(|(&l, &n)| sum_code(l, n)).collect();
    let mut row = vec![1.0];
    for term in terms {
        let mut prod = vec![1.0];
        for &fi in term {
            prod = prod.iter().flat_map(|p| codes[fi].iter().map(move |c| p * c)).collect();
        }
        row.extend(prod);
    }
    row
}

/// Representation x strategy x test-corpus design on Fisher-z CCC values of
/// one channel and feature kind, one observation per target and cell.
/// Cells without a defined CCC are left out.
pub fn build_design(result: &ExperimentResult, channel: Channel, kind: FeatureKind) -> Result<Design> {
    let mut observations = Vec::new();
    for c in result.cells.iter().filter(|c| c.channel == channel && c.kind == kind) {
        let Some(ccc) = c.ccc else {
            log::warn!("dropping undefined CCC for {} {} {} {}", c.representation, c.strategy, c.test_corpus, c.target);
            continue;
        };
        observations.push(Observation {
            representation: c.representation,
            strategy: c.strategy,
            test_corpus: c.test_corpus.clone(),
            target: c.target.clone(),
            ccc,
            z: fisher_z(ccc)?,
        });
    }
    let mut corpora: Vec<String> = Vec::new();
    for o in &observations {
        if !corpora.contains(&o.test_corpus) {
            corpora.push(o.test_corpus.clone());
        }
    }
    let factor = |name: &str, levels: Vec<String>, key: &dyn Fn(&Observation) -> String| Factor {
        name: name.into(),
        index: observations.iter().map(|o| levels.iter().position(|l| *l == key(o)).expect("level listed")).collect(),
        levels,
    };
    let factors = [
        factor("representation", Representation::ALL.iter().map(|r| r.to_string()).collect(), &|o| o.representation.to_string()),
        factor("strategy", Strategy::ALL.iter().map(|s| s.to_string()).collect(), &|o| o.strategy.to_string()),
        factor("test_corpus", corpora, &|o| o.test_corpus.clone()),
    ];
    let mut d = Design::from_factors(observations.iter().map(|o| o.z).collect(), &factors)?;
    d.observations = observations;
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::grid;

    #[test]
    fn full_grid_gives_ninety_full_rank_rows() {
        let r = grid(|_, _, c, t| 0.1 + 0.05 * c as f64 + 0.01 * t as f64);
        let d = build_design(&r, Channel::Multimodal, FeatureKind::Deep).unwrap();
        assert_eq!(d.n(), 90);
        assert_eq!(d.n_columns(), 18);
        let names: Vec<_> = d.blocks.iter().map(|b| b.name.as_str()).collect();
        assert_eq!(
            names,
            ["representation", "strategy", "test_corpus", "representation:strategy", "representation:test_corpus", "strategy:test_corpus", "representation:strategy:test_corpus"]
        );
        for (o, z) in d.observations.iter().zip(&d.y) {
            assert!((z - o.ccc.atanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_strategy_is_reported() {
        let mut r = grid(|_, _, _, _| 0.2);
        r.cells.retain(|c| c.strategy != Strategy::Mixed);
        match build_design(&r, Channel::Multimodal, FeatureKind::Deep) {
            Err(Error::MissingLevel { factor, level }) => assert_eq!((factor.as_str(), level.as_str()), ("strategy", "mixed")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sum_coding_columns_sum_to_zero_over_balanced_cells() {
        let d = build_design(&grid(|_, _, _, _| 0.3), Channel::Multimodal, FeatureKind::Deep).unwrap();
        for j in 1..d.n_columns() {
            assert!(d.x.column(j).sum().abs() < 1e-12, "column {}", d.column_names[j]);
        }
        let row = d.cell_row(&["labels", "cross", "older"]).unwrap();
        assert_eq!(row.len(), 18);
        assert_eq!(row[0], 1.0);
    }

    #[test]
    fn duplicated_block_is_rank_deficient() {
        let x = DMatrix::from_fn(6, 3, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let err = Design::from_matrix(vec![0.0; 6], x, vec!["a".into(), "b".into(), "c".into()], vec![]).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { rank: 2, columns: 3 }));
    }
}
