use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{merge_deltas, DeltaSet, MergeError, MergeMethod, MergeParams};
use crate::store::ModelWeights;

/// Candidate values per hyperparameter. Only the axes the method reads are
/// expanded.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergeGrid {
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub retain_ratios: Vec<f64>,
    pub drop_rates: Vec<f64>,
    pub ts: Vec<f64>,
}

const SCALING_TERMS: [f64; 6] = [0.1, 0.3, 0.5, 0.7, 0.9, 1.0];
const RETAIN_RATIOS: [f64; 3] = [0.1, 0.2, 0.3];
const DROP_RATES: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

impl MergeGrid {
    /// Default search ranges: scaling term {0.1, 0.3, 0.5, 0.7, 0.9, 1.0},
    /// retain ratio {0.1, 0.2, 0.3}, drop rate {0.1, 0.3, 0.5, 0.7, 0.9}.
    /// Interpolation weight and SLERP t sweep 0.0..=1.0 in steps of 0.1.
    pub fn searched_ranges(method: MergeMethod) -> Self {
        let unit: Vec<f64> = (0..=10).map(|i| f64::from(i) / 10.0).collect();
        match method {
            MergeMethod::TaskArithmetic => Self { lambdas: SCALING_TERMS.to_vec(), ..Self::default() },
            MergeMethod::Ties => Self {
                lambdas: SCALING_TERMS.to_vec(),
                retain_ratios: RETAIN_RATIOS.to_vec(),
                ..Self::default()
            },
            MergeMethod::Dare => Self {
                lambdas: SCALING_TERMS.to_vec(),
                drop_rates: DROP_RATES.to_vec(),
                ..Self::default()
            },
            MergeMethod::Interpolate2 => Self { alphas: unit, ..Self::default() },
            MergeMethod::Slerp => Self { ts: unit, ..Self::default() },
            MergeMethod::Average => Self::default(),
        }
    }

    /// Cartesian product over the axes `template.method` reads; other fields
    /// (including the seed) come from `template`.
    pub fn expand(&self, template: &MergeParams) -> Result<Vec<MergeParams>, MergeError> {
        fn axis<'a>(name: &'static str, values: &'a [f64]) -> Result<&'a [f64], MergeError> {
            if values.is_empty() {
                Err(MergeError::EmptyGrid(name))
            } else {
                Ok(values)
            }
        }
        let base = *template;
        let combos: Vec<MergeParams> = match template.method {
            MergeMethod::Average => vec![base],
            MergeMethod::TaskArithmetic => axis("lambdas", &self.lambdas)?
                .iter()
                .map(|&lambda| MergeParams { lambda, ..base })
                .collect(),
            MergeMethod::Interpolate2 => axis("alphas", &self.alphas)?
                .iter()
                .map(|&alpha| MergeParams { alpha, ..base })
                .collect(),
            MergeMethod::Slerp => axis("ts", &self.ts)?.iter().map(|&t| MergeParams { t, ..base }).collect(),
            MergeMethod::Ties => {
                let retains = axis("retain_ratios", &self.retain_ratios)?;
                axis("lambdas", &self.lambdas)?
                    .iter()
                    .flat_map(|&lambda| {
                        retains
                            .iter()
                            .map(move |&retain_ratio| MergeParams { lambda, retain_ratio, ..base })
                    })
                    .collect()
            }
            MergeMethod::Dare => {
                let drops = axis("drop_rates", &self.drop_rates)?;
                axis("lambdas", &self.lambdas)?
                    .iter()
                    .flat_map(|&lambda| drops.iter().map(move |&drop_rate| MergeParams { lambda, drop_rate, ..base }))
                    .collect()
            }
        };
        for p in &combos {
            p.validate()?;
        }
        Ok(combos)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridResult {
    pub params: MergeParams,
    pub score: f64,
}

fn rank(results: &mut [GridResult]) {
    results.sort_by(|a, b| {
        b.score.total_cmp(&a.score).then_with(|| {
            a.params
                .key()
                .iter()
                .zip(b.params.key().iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        })
    });
}

fn evaluate_one<F, E>(base: &ModelWeights, deltas: &[DeltaSet], params: MergeParams, evaluator: &F) -> Result<GridResult, MergeError>
where
    F: Fn(&ModelWeights) -> Result<f64, E>,
    E: std::fmt::Display,
{
    let merged = merge_deltas(base, deltas, &params)?;
    let score = evaluator(&merged).map_err(|e| MergeError::Evaluator {
        params: params.to_string(),
        message: e.to_string(),
    })?;
    Ok(GridResult { params, score })
}

/// Scores every combination and returns them best first. Equal scores are
/// ordered by ascending (lambda, alpha, retain_ratio, drop_rate, t).
pub fn grid_search<F, E>(
    base: &ModelWeights,
    deltas: &[DeltaSet],
    grid: &MergeGrid,
    template: &MergeParams,
    mut evaluator: F,
) -> Result<Vec<GridResult>, MergeError>
where
    F: FnMut(&ModelWeights) -> Result<f64, E>,
    E: std::fmt::Display,
{
    let mut results = Vec::new();
    for params in grid.expand(template)? {
        let merged = merge_deltas(base, deltas, &params)?;
        let score = evaluator(&merged).map_err(|e| MergeError::Evaluator {
            params: params.to_string(),
            message: e.to_string(),
        })?;
        results.push(GridResult { params, score });
    }
    rank(&mut results);
    Ok(results)
}

/// [`grid_search`] with concurrent evaluations; same ranking.
pub fn grid_search_par<F, E>(
    base: &ModelWeights,
    deltas: &[DeltaSet],
    grid: &MergeGrid,
    template: &MergeParams,
    evaluator: F,
) -> Result<Vec<GridResult>, MergeError>
where
    F: Fn(&ModelWeights) -> Result<f64, E> + Sync,
    E: std::fmt::Display,
{
    let mut results = grid
        .expand(template)?
        .into_par_iter()
        .map(|p| evaluate_one(base, deltas, p, &evaluator))
        .collect::<Result<Vec<_>, _>>()?;
    rank(&mut results);
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::merge::compute_delta;
    use crate::store::{Dtype, Tensor};

    fn family() -> (ModelWeights, Vec<DeltaSet>) {
        let base =
            ModelWeights::from_entries([("w", Tensor::new(Dtype::F32, vec![3], vec![0.5, 1.0, -1.0]).unwrap())]).unwrap();
        let m1 =
            ModelWeights::from_entries([("w", Tensor::new(Dtype::F32, vec![3], vec![1.5, 1.0, -2.0]).unwrap())]).unwrap();
        let m2 =
            ModelWeights::from_entries([("w", Tensor::new(Dtype::F32, vec![3], vec![0.5, 3.0, 0.0]).unwrap())]).unwrap();
        let ds = vec![compute_delta(&m1, &base, "a").unwrap(), compute_delta(&m2, &base, "b").unwrap()];
        (base, ds)
    }

    #[test]
    fn combination_counts() {
        let ta = MergeGrid::searched_ranges(MergeMethod::TaskArithmetic);
        assert_eq!(ta.expand(&MergeParams::new(MergeMethod::TaskArithmetic)).unwrap().len(), 6);
        let ties = MergeGrid::searched_ranges(MergeMethod::Ties);
        assert_eq!(ties.expand(&MergeParams::new(MergeMethod::Ties)).unwrap().len(), 18);
        let dare = MergeGrid::searched_ranges(MergeMethod::Dare);
        assert_eq!(dare.expand(&MergeParams::new(MergeMethod::Dare)).unwrap().len(), 30);
        assert_eq!(
            MergeGrid::default().expand(&MergeParams::new(MergeMethod::Average)).unwrap().len(),
            1
        );
    }

    #[test]
    fn empty_axis_rejected() {
        let g = MergeGrid { lambdas: vec![0.5], ..MergeGrid::default() };
        assert!(matches!(g.expand(&MergeParams::new(MergeMethod::Ties)), Err(MergeError::EmptyGrid("retain_ratios"))));
    }

    #[test]
    fn evaluator_called_per_combination() {
        let (base, ds) = family();
        let mut calls = 0;
        let grid = MergeGrid::searched_ranges(MergeMethod::Ties);
        let out = grid_search(&base, &ds, &grid, &MergeParams::new(MergeMethod::Ties), |_| {
            calls += 1;
            Ok::<_, String>(0.0)
        })
        .unwrap();
        assert_eq!(calls, 18);
        // all scores tie: lexicographic order on (lambda, ..., retain_ratio)
        assert_eq!((out[0].params.lambda, out[0].params.retain_ratio), (0.1, 0.1));
        assert_eq!((out[1].params.lambda, out[1].params.retain_ratio), (0.1, 0.2));
        assert_eq!(out[17].params.lambda, 1.0);
    }

    #[test]
    fn evaluator_failure_names_recipe() {
        let (base, ds) = family();
        let grid = MergeGrid::searched_ranges(MergeMethod::TaskArithmetic);
        let err = grid_search(&base, &ds, &grid, &MergeParams::new(MergeMethod::TaskArithmetic), |m| {
            if m.get("w").unwrap().values()[1] > 2.0 {
                Err("too large")
            } else {
                Ok(1.0)
            }
        })
        .unwrap_err();
        assert!(err.to_string().contains("task_arithmetic(lambda=0.7)"), "{err}");
    }

    #[test]
    fn parallel_matches_sequential() {
        let (base, ds) = family();
        let grid = MergeGrid::searched_ranges(MergeMethod::Dare);
        let template = MergeParams::dare(1.0, 0.5, 3);
        let score = |m: &ModelWeights| Ok::<_, String>(m.get("w").unwrap().values().iter().map(|&v| f64::from(v)).sum());
        let seq = grid_search(&base, &ds, &grid, &template, score).unwrap();
        let par = grid_search_par(&base, &ds, &grid, &template, score).unwrap();
        assert_eq!(seq, par);
    }
}
