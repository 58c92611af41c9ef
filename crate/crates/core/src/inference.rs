//! Applying a fitted model to new texts, and the baseline aggregators it is
//! compared against.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CriterionSpec, ScoreMatrix, TextSample, WeightModel};
use crate::scorer::{run_bounded, JudgeResponse, Scorer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredText {
    #[serde(rename = "id")]
    pub sample_id: String,
    pub criterion_scores: Vec<f64>,
    #[serde(rename = "contributions")]
    pub per_criterion_contributions: Vec<f64>,
    pub uniscore: f64,
    /// Number of judged criteria that fell back to the neutral score.
    #[serde(default)]
    pub fallbacks: usize,
}

/// Weighted sum of criterion scores. Returns the total and the per-criterion
/// terms; the total is the plain sum of the returned terms.
pub fn aggregate(signed_weights: &[f64], scores: &[f64]) -> Result<(f64, Vec<f64>)> {
    if signed_weights.len() != scores.len() {
        return Err(Error::InvalidInput(format!(
            "{} scores for {} weights",
            scores.len(),
            signed_weights.len()
        )));
    }
    let terms: Vec<f64> = signed_weights.iter().zip(scores).map(|(w, s)| w * s).collect();
    Ok((terms.iter().sum(), terms))
}

fn check_criteria(model: &WeightModel, criteria: &[CriterionSpec]) -> Result<()> {
    let names: Vec<&str> = criteria.iter().map(|c| c.name.as_str()).collect();
    let expected: Vec<&str> = model.criteria().iter().map(String::as_str).collect();
    if names != expected {
        return Err(Error::InvalidInput(format!(
            "criteria {names:?} do not match model criteria {expected:?}"
        )));
    }
    Ok(())
}

fn build_scored(
    model: &WeightModel,
    sample_id: &str,
    scores: Vec<f64>,
    responses: &[Option<JudgeResponse>],
) -> Result<ScoredText> {
    let (uniscore, terms) = aggregate(model.signed_weights(), &scores)?;
    Ok(ScoredText {
        sample_id: sample_id.to_string(),
        criterion_scores: scores,
        per_criterion_contributions: terms,
        uniscore,
        fallbacks: responses.iter().flatten().filter(|r| r.fell_back).count(),
    })
}

/// Scores one text: one scorer invocation per criterion, then the dot product
/// with the signed weights.
pub fn score_text(
    model: &WeightModel,
    scorer: &Scorer,
    criteria: &[CriterionSpec],
    sample: &TextSample,
) -> Result<ScoredText> {
    check_criteria(model, criteria)?;
    let (scores, responses) = scorer.score_text(criteria, &model.fit_metadata().scaling, sample)?;
    build_scored(model, &sample.id, scores, &responses)
}

/// Scores many texts, up to the scorer's parallelism at a time. Output order
/// follows input order.
pub fn score_texts(
    model: &WeightModel,
    scorer: &Scorer,
    criteria: &[CriterionSpec],
    samples: &[TextSample],
) -> Result<Vec<ScoredText>> {
    check_criteria(model, criteria)?;
    let scaling = &model.fit_metadata().scaling;
    run_bounded(samples.len(), scorer.max_parallel(), |i| {
        let (scores, responses) = scorer.score_text(criteria, scaling, &samples[i])?;
        build_scored(model, &samples[i].id, scores, &responses)
    })
    .into_iter()
    .collect()
}

/// Reads one [`ScoredText`] per non-blank line.
pub fn load_scored(path: impl AsRef<Path>) -> Result<Vec<ScoredText>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Record {
            line: idx + 1,
            message: format!("malformed scored record: {e}"),
        })?);
    }
    Ok(out)
}

pub fn write_scored(scored: &[ScoredText], mut out: impl Write) -> std::io::Result<()> {
    for s in scored {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineAggregator {
    SingleCriterion { index: usize },
    EqualMean,
    RandomWeights { seed: u64, weights: Vec<f64> },
    LeastSquares { coefficients: Vec<f64>, intercept: f64 },
}

impl BaselineAggregator {
    /// Draws `m` weights from U[-1, 1] once; they stay fixed afterwards.
    pub fn random_weights(seed: u64, m: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
        BaselineAggregator::RandomWeights { seed, weights }
    }

    fn arity(&self) -> Option<usize> {
        match self {
            BaselineAggregator::RandomWeights { weights, .. } => Some(weights.len()),
            BaselineAggregator::LeastSquares { coefficients, .. } => Some(coefficients.len()),
            _ => None,
        }
    }
}

pub fn apply_baseline(agg: &BaselineAggregator, scores: &ScoreMatrix) -> Result<Vec<f64>> {
    let cols = scores.cols();
    if let Some(n) = agg.arity() {
        if n != cols {
            return Err(Error::InvalidInput(format!(
                "aggregator expects {n} columns, matrix has {cols}"
            )));
        }
    }
    let rows = 0..scores.rows();
    Ok(match agg {
        BaselineAggregator::SingleCriterion { index } => {
            if *index >= cols {
                return Err(Error::InvalidInput(format!(
                    "column {index} out of range for {cols} columns"
                )));
            }
            scores.column(*index)
        }
        BaselineAggregator::EqualMean => rows.map(|r| scores.row(r).iter().sum::<f64>() / cols as f64).collect(),
        BaselineAggregator::RandomWeights { weights, .. } => rows.map(|r| dot(weights, scores.row(r))).collect(),
        BaselineAggregator::LeastSquares {
            coefficients,
            intercept,
        } => rows.map(|r| intercept + dot(coefficients, scores.row(r))).collect(),
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// Relative residual below which a centered column counts as a combination
// of the columns before it.
const COLLINEAR_TOL: f64 = 1e-10;

/// Ordinary least squares with an intercept, solved through the normal
/// equations of the centered design.
pub fn fit_least_squares(scores: &ScoreMatrix, targets: &[f64]) -> Result<BaselineAggregator> {
    let (n, m) = (scores.rows(), scores.cols());
    if targets.len() != n {
        return Err(Error::InvalidInput(format!("{} targets for {n} rows", targets.len())));
    }
    if n < m + 1 {
        return Err(Error::InvalidInput(format!(
            "{n} rows cannot fit {m} coefficients and an intercept"
        )));
    }
    let means: Vec<f64> = (0..m)
        .map(|j| scores.column(j).iter().sum::<f64>() / n as f64)
        .collect();
    let y_mean = targets.iter().sum::<f64>() / n as f64;
    let centered: Vec<Vec<f64>> = (0..m)
        .map(|j| scores.column(j).iter().map(|x| x - means[j]).collect())
        .collect();

    check_rank(&centered, scores.criteria())?;

    let mut gram = vec![vec![0.0; m]; m];
    let mut rhs = vec![0.0; m];
    for i in 0..m {
        for j in 0..m {
            gram[i][j] = dot(&centered[i], &centered[j]);
        }
        rhs[i] = centered[i].iter().zip(targets).map(|(x, y)| x * (y - y_mean)).sum();
    }
    let coefficients = cholesky_solve(gram, rhs).ok_or_else(|| Error::RankDeficient {
        columns: scores.criteria().to_vec(),
    })?;
    let intercept = y_mean - dot(&coefficients, &means);
    Ok(BaselineAggregator::LeastSquares {
        coefficients,
        intercept,
    })
}

/// Gram-Schmidt pass over centered columns; a column whose residual vanishes
/// is collinear with the intercept or the retained columns before it.
fn check_rank(centered: &[Vec<f64>], names: &[String]) -> Result<()> {
    let mut basis: Vec<(usize, Vec<f64>)> = Vec::new();
    for (j, col) in centered.iter().enumerate() {
        let norm = dot(col, col).sqrt();
        let mut resid = col.clone();
        let mut involved = Vec::new();
        for (k, q) in &basis {
            let c = dot(&resid, q);
            if c.abs() > COLLINEAR_TOL * norm.max(1.0) {
                involved.push(names[*k].clone());
            }
            resid.iter_mut().zip(q).for_each(|(r, qi)| *r -= c * qi);
        }
        let rnorm = dot(&resid, &resid).sqrt();
        if norm == 0.0 || rnorm <= COLLINEAR_TOL * norm {
            let mut columns = involved;
            if norm == 0.0 {
                columns.push("intercept".into());
            }
            columns.push(names[j].clone());
            return Err(Error::RankDeficient { columns });
        }
        basis.push((j, resid.iter().map(|r| r / rnorm).collect()));
    }
    Ok(())
}

fn cholesky_solve(a: Vec<Vec<f64>>, b: Vec<f64>) -> Option<Vec<f64>> {
    let m = b.len();
    let mut l = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..=i {
            let s: f64 = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut z = vec![0.0; m];
    for i in 0..m {
        z[i] = (b[i] - (0..i).map(|k| l[i][k] * z[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        x[i] = (z[i] - (i + 1..m).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::sample_parts;
    use crate::model::{PromptSpec, SignalValue};
    use crate::scorer::{MockRule, ScorerBackend};
    use proptest::prelude::*;
    use rand::Rng;

    fn matrix(rows: Vec<Vec<f64>>) -> ScoreMatrix {
        let m = rows[0].len();
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        let names = (0..m).map(|j| format!("c{j}")).collect();
        ScoreMatrix::new(ids, names, rows.concat(), vec![false; m]).unwrap()
    }

    #[test]
    fn dot_product_cases() {
        assert_eq!(aggregate(&[0.5, -0.5], &[4.0, 2.0]).unwrap().0, 1.0);
        assert_eq!(aggregate(&[1.0, 0.0, 0.0], &[2.5, 4.0, 1.0]).unwrap().0, 2.5);
        assert!(aggregate(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn case_study_neutral_scores() {
        let w = [-0.11, 0.17, 0.18, -0.07, 0.47];
        let (total, _) = aggregate(&w, &[3.0; 5]).unwrap();
        assert!((total - 1.92).abs() < 1e-12);
    }

    #[test]
    fn score_text_uses_model_and_checks_names() {
        let model = WeightModel::new(sample_parts()).unwrap();
        let criteria: Vec<CriterionSpec> = model
            .criteria()
            .iter()
            .map(|n| CriterionSpec::judged(n.clone(), PromptSpec::new("d", "g", "s").unwrap()))
            .collect();
        let scorer = Scorer::from_backend(&ScorerBackend::mock(1, MockRule::Tagged)).unwrap();
        let tags: String = model.criteria().iter().map(|n| format!("[{n}=4]")).collect();
        let sample = TextSample::new("x", tags, SignalValue::Continuous(0.0)).unwrap();
        let scored = score_text(&model, &scorer, &criteria, &sample).unwrap();
        assert_eq!(scored.criterion_scores, vec![4.0; model.len()]);
        let expected: f64 = model.signed_weights().iter().map(|w| 4.0 * w).sum();
        assert!((scored.uniscore - expected).abs() < 1e-12);
        assert_eq!(scored.fallbacks, 0);

        let mut reordered = criteria.clone();
        reordered.reverse();
        assert!(score_text(&model, &scorer, &reordered, &sample).is_err());

        let batch = score_texts(&model, &scorer, &criteria, &[sample.clone(), sample]).unwrap();
        assert_eq!(batch[0], batch[1]);
        assert_eq!(batch[0], scored);
    }

    #[test]
    fn scored_jsonl_round_trip() {
        let rows = vec![ScoredText {
            sample_id: "a".into(),
            criterion_scores: vec![1.0, 4.0],
            per_criterion_contributions: vec![0.1, -0.30000000000000004],
            uniscore: -0.20000000000000004,
            fallbacks: 1,
        }];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        write_scored(&rows, std::fs::File::create(&path).unwrap()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("{\"id\":\"a\",\"criterion_scores\""));
        assert_eq!(load_scored(&path).unwrap(), rows);
        std::fs::write(&path, "{\"id\": 3}\n").unwrap();
        assert!(matches!(load_scored(&path), Err(Error::Record { line: 1, .. })));
    }

    #[test]
    fn baselines() {
        let s = matrix(vec![vec![1.0, 3.0, 5.0], vec![2.0, 2.0, 2.0]]);
        assert_eq!(
            apply_baseline(&BaselineAggregator::EqualMean, &s).unwrap(),
            vec![3.0, 2.0]
        );
        assert_eq!(
            apply_baseline(&BaselineAggregator::SingleCriterion { index: 0 }, &s).unwrap(),
            vec![1.0, 2.0]
        );
        let a = BaselineAggregator::random_weights(9, 3);
        let b = BaselineAggregator::random_weights(9, 3);
        assert_eq!(a, b);
        if let BaselineAggregator::RandomWeights { weights, .. } = &a {
            assert!(weights.iter().all(|w| (-1.0..=1.0).contains(w)));
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let regenerated: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..=1.0)).collect();
            assert_eq!(weights, &regenerated);
        }
        assert_eq!(apply_baseline(&a, &s).unwrap(), apply_baseline(&b, &s).unwrap());
        assert!(apply_baseline(&BaselineAggregator::random_weights(9, 2), &s).is_err());
    }

    #[test]
    fn least_squares_exact_line() {
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|i| vec![1.0 + (i % 5) as f64, 1.0 + ((i * 3) % 5) as f64])
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.5 * r[0] - 1.0).collect();
        let s = matrix(rows);
        let BaselineAggregator::LeastSquares {
            coefficients,
            intercept,
        } = fit_least_squares(&s, &y).unwrap()
        else {
            panic!()
        };
        assert!((coefficients[0] - 2.5).abs() < 1e-9);
        assert!(coefficients[1].abs() < 1e-9);
        assert!((intercept + 1.0).abs() < 1e-9);
    }

    #[test]
    fn least_squares_constant_and_two_point() {
        let s = matrix(vec![vec![1.0, 2.0], vec![2.0, 5.0], vec![4.0, 1.0], vec![3.0, 3.0]]);
        let BaselineAggregator::LeastSquares {
            coefficients,
            intercept,
        } = fit_least_squares(&s, &[7.0; 4]).unwrap()
        else {
            panic!()
        };
        assert!(coefficients.iter().all(|c| c.abs() < 1e-12));
        assert!((intercept - 7.0).abs() < 1e-12);

        let s = matrix(vec![vec![1.0], vec![3.0]]);
        let BaselineAggregator::LeastSquares {
            coefficients,
            intercept,
        } = fit_least_squares(&s, &[2.0, 6.0]).unwrap()
        else {
            panic!()
        };
        assert!((coefficients[0] - 2.0).abs() < 1e-12);
        assert!(intercept.abs() < 1e-12);
    }

    #[test]
    fn least_squares_names_collinear_columns() {
        let s = matrix(vec![
            vec![1.0, 2.0, 3.0],
            vec![1.5, 3.0, 1.0],
            vec![2.0, 4.0, 5.0],
            vec![2.5, 5.0, 2.0],
        ]);
        match fit_least_squares(&s, &[1.0, 2.0, 3.0, 4.0]) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec!["c0", "c1"]),
            other => panic!("{other:?}"),
        }
        let s = matrix(vec![vec![1.0, 2.0], vec![2.0, 2.0], vec![3.0, 2.0]]);
        match fit_least_squares(&s, &[1.0, 2.0, 3.0]) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec!["intercept", "c1"]),
            other => panic!("{other:?}"),
        }
        assert!(fit_least_squares(&matrix(vec![vec![1.0, 2.0], vec![2.0, 1.0]]), &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn linear_in_scores(
            w in prop::collection::vec(-1.0f64..1.0, 4),
            a in prop::collection::vec(1.0f64..5.0, 4),
            b in prop::collection::vec(1.0f64..5.0, 4),
            alpha in 0.0f64..1.0,
        ) {
            let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + (1.0 - alpha) * y).collect();
            let (sa, ta) = aggregate(&w, &a).unwrap();
            let (sb, _) = aggregate(&w, &b).unwrap();
            let (sm, _) = aggregate(&w, &mix).unwrap();
            prop_assert!((sm - (alpha * sa + (1.0 - alpha) * sb)).abs() < 1e-12);
            prop_assert_eq!(ta.iter().sum::<f64>(), sa);
        }

        #[test]
        fn ranking_invariant_under_positive_scale(
            w in prop::collection::vec(-1.0f64..1.0, 3),
            texts in prop::collection::vec(prop::collection::vec(1u8..=5, 3), 2..40),
            c in 0.01f64..100.0,
        ) {
            let scaled: Vec<f64> = w.iter().map(|x| x * c).collect();
            let base: Vec<f64> = texts.iter().map(|t| {
                let s: Vec<f64> = t.iter().map(|&v| f64::from(v)).collect();
                aggregate(&w, &s).unwrap().0
            }).collect();
            let other: Vec<f64> = texts.iter().map(|t| {
                let s: Vec<f64> = t.iter().map(|&v| f64::from(v)).collect();
                aggregate(&scaled, &s).unwrap().0
            }).collect();
            // equal-valued texts may differ in the last ulp after scaling; compare
            // only pairs that are clearly ordered
            for i in 0..base.len() {
                for j in 0..base.len() {
                    if base[i] < base[j] - 1e-9 {
                        prop_assert!(other[i] < other[j]);
                    }
                }
            }
        }
    }
}
