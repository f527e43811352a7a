use std::fmt::Write;

use serde::Serialize;

use super::{AnalysisError, TokenScoreVector};
use crate::util::ceil_fraction;

/// Number of tokens in the top `p` percent of `n`: `max(1, ⌈p·n/100⌉)`.
pub fn top_count(p: f64, n: usize) -> usize {
    ceil_fraction(p / 100.0, n).max(1)
}

/// Indices of the `k` largest scores, ties going to the lower index,
/// returned in ascending index order.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    order.truncate(k);
    order.sort_unstable();
    order
}

fn check_percentage(p: f64) -> Result<(), AnalysisError> {
    if p > 0.0 && p <= 100.0 {
        Ok(())
    } else {
        Err(AnalysisError::Percentage(p))
    }
}

/// Intersection over union of the two vectors' top-`p`% token sets.
pub fn topk_iou(a: &TokenScoreVector, b: &TokenScoreVector, p: f64) -> Result<f64, AnalysisError> {
    if a.len() != b.len() {
        return Err(AnalysisError::LengthMismatch { a: a.len(), b: b.len() });
    }
    check_percentage(p)?;
    let k = top_count(p, a.len());
    let sa = top_k(a.scores(), k);
    let sb = top_k(b.scores(), k);
    let mut inter = 0;
    let (mut i, mut j) = (0, 0);
    while i < sa.len() && j < sb.len() {
        match sa[i].cmp(&sb[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    Ok(inter as f64 / (2 * k - inter) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IoUPoint {
    pub p: f64,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IoUCurve {
    pub points: Vec<IoUPoint>,
}

impl IoUCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,iou\n");
        for pt in &self.points {
            writeln!(out, "{},{}", pt.p, pt.iou).expect("write to string");
        }
        out
    }
}

/// [`topk_iou`] at each percentage; `ps` must be strictly increasing.
pub fn iou_curve(a: &TokenScoreVector, b: &TokenScoreVector, ps: &[f64]) -> Result<IoUCurve, AnalysisError> {
    if ps.is_empty() {
        return Err(AnalysisError::Empty("percentage list"));
    }
    for w in ps.windows(2) {
        if w[1] <= w[0] {
            return Err(AnalysisError::Unordered { prev: w[0], next: w[1] });
        }
    }
    let points = ps
        .iter()
        .map(|&p| Ok(IoUPoint { p, iou: topk_iou(a, b, p)? }))
        .collect::<Result<_, AnalysisError>>()?;
    Ok(IoUCurve { points })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &[f64]) -> TokenScoreVector {
        TokenScoreVector::new(s.to_vec(), "t").unwrap()
    }

    fn ranked(top: &[usize]) -> TokenScoreVector {
        let mut s = vec![0.0; 10];
        for (r, &i) in top.iter().enumerate() {
            s[i] = 10.0 - r as f64;
        }
        v(&s)
    }

    #[test]
    fn examples() {
        assert_eq!(topk_iou(&ranked(&[0, 1]), &ranked(&[2, 3]), 20.0).unwrap(), 0.0);
        assert!((topk_iou(&ranked(&[0, 1]), &ranked(&[1, 2]), 20.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let up: Vec<f64> = (0..10).map(f64::from).collect();
        let down: Vec<f64> = up.iter().rev().copied().collect();
        assert_eq!(topk_iou(&v(&up), &v(&down), 50.0).unwrap(), 0.0);
        assert_eq!(topk_iou(&v(&up), &v(&down), 100.0).unwrap(), 1.0);
    }

    #[test]
    fn ties_take_lower_index() {
        assert_eq!(top_k(&[1.0, 1.0, 1.0, 0.0], 2), vec![0, 1]);
        assert_eq!(top_count(5.0, 10), 1);
        assert_eq!(top_count(0.001, 10), 1);
        assert_eq!(top_count(20.0, 10), 2);
        assert_eq!(top_count(30.0, 10), 3);
    }

    #[test]
    fn errors() {
        assert_eq!(topk_iou(&v(&[1.0]), &v(&[1.0, 2.0]), 50.0), Err(AnalysisError::LengthMismatch { a: 1, b: 2 }));
        assert!(topk_iou(&v(&[1.0]), &v(&[1.0]), 0.0).is_err());
        assert!(topk_iou(&v(&[1.0]), &v(&[1.0]), 100.5).is_err());
        assert!(iou_curve(&v(&[1.0]), &v(&[1.0]), &[10.0, 10.0]).is_err());
    }

    #[test]
    fn curve_csv() {
        let a = v(&[3.0, 2.0, 1.0, 0.0]);
        let c = iou_curve(&a, &a, &[25.0, 100.0]).unwrap();
        assert_eq!(c.to_csv(), "p,iou\n25,1\n100,1\n");
    }
}
