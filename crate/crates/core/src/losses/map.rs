use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Result of [`mean_average_precision`].
#[derive(Debug, Clone, PartialEq)]
pub struct MapReport {
    /// Mean AP over classes with at least one positive.
    pub map: f64,
    /// Per-class AP, `None` for skipped classes.
    pub per_class: Vec<Option<f64>>,
    /// Classes without any positive label.
    pub skipped: Vec<usize>,
}

fn average_precision(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // stable: equal scores keep index order
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Some(sum / positives as f64)
}

/// Ranking-based mean average precision over the columns of `[N, K]` scores.
pub fn mean_average_precision(scores: &Tensor, labels: &Tensor) -> Result<MapReport> {
    let (n, k) = match (scores.shape(), labels.shape()) {
        ([n, k], [n2, k2]) if n == n2 && k == k2 => (*n, *k),
        (s, l) => {
            return Err(Error::shape(
                "mean_average_precision",
                format!("{s:?} vs {l:?}"),
            ))
        }
    };
    if labels.data().iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("labels must be multi-hot"));
    }
    let mut per_class = Vec::with_capacity(k);
    let mut skipped = Vec::new();
    let mut col_scores = vec![0.0; n];
    let mut col_labels = vec![false; n];
    for c in 0..k {
        for r in 0..n {
            col_scores[r] = scores.data()[r * k + c];
            col_labels[r] = labels.data()[r * k + c] == 1.0;
        }
        let ap = average_precision(&col_scores, &col_labels);
        if ap.is_none() {
            skipped.push(c);
        }
        per_class.push(ap);
    }
    let evaluated: Vec<f64> = per_class.iter().flatten().copied().collect();
    if evaluated.is_empty() {
        return Err(Error::invalid("no class has a positive label"));
    }
    let map = evaluated.iter().sum::<f64>() / evaluated.len() as f64;
    Ok(MapReport {
        map,
        per_class,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Tensor {
        Tensor::new(vec![v.len(), 1], v.to_vec()).unwrap()
    }

    #[test]
    fn hand_ranked_case() {
        let r = mean_average_precision(&col(&[0.9, 0.8, 0.7]), &col(&[1.0, 0.0, 1.0])).unwrap();
        assert!((r.map - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_reversed() {
        let r = mean_average_precision(&col(&[0.9, 0.8, 0.1, 0.0]), &col(&[1.0, 1.0, 0.0, 0.0]))
            .unwrap();
        assert_eq!(r.map, 1.0);
        let n = 7;
        let scores: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut labels = vec![0.0; n];
        labels[0] = 1.0;
        let r = mean_average_precision(&col(&scores), &col(&labels)).unwrap();
        assert!((r.map - 1.0 / n as f64).abs() < 1e-15);
    }

    #[test]
    fn ties_break_by_index() {
        // positive at index 1 ties with negative at index 0; index 0 ranks first
        let r = mean_average_precision(&col(&[0.5, 0.5]), &col(&[0.0, 1.0])).unwrap();
        assert_eq!(r.map, 0.5);
    }

    #[test]
    fn skips_and_errors() {
        let scores = Tensor::new(vec![2, 2], vec![0.9, 0.1, 0.2, 0.3]).unwrap();
        let labels = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let r = mean_average_precision(&scores, &labels).unwrap();
        assert_eq!(r.skipped, vec![1]);
        assert_eq!(r.per_class[1], None);
        assert_eq!(r.map, 1.0);
        assert!(mean_average_precision(&scores, &Tensor::zeros(&[2, 2])).is_err());
    }
}
