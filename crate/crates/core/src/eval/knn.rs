use crate::data::Dataset;
use crate::error::{Error, Result};

/// Predicts test labels by majority vote of the `k` nearest training
/// samples (Euclidean). Distance ties go to the lower training index and
/// vote ties to the smaller class label.
pub fn knn_predict(train: &Dataset, test: &Dataset, k: usize) -> Result<Vec<usize>> {
    let labels = train
        .labels()
        .ok_or_else(|| Error::InvalidArgument("training set has no labels".into()))?;
    if train.n_features() != test.n_features() {
        return Err(Error::Dimension(format!(
            "train has {} features, test has {}",
            train.n_features(),
            test.n_features()
        )));
    }
    let n_train = train.n_samples();
    if k == 0 || k > n_train {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must lie in [1, {n_train}]"
        )));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let xtr = train.features();
    let xte = test.features();
    let mut out = Vec::with_capacity(test.n_samples());
    let mut dists: Vec<(f64, usize)> = Vec::with_capacity(n_train);
    for t in 0..test.n_samples() {
        dists.clear();
        for i in 0..n_train {
            let d: f64 = xte
                .column(t)
                .iter()
                .zip(xtr.column(i).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dists.push((d, i));
        }
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < n_train {
            dists.select_nth_unstable_by(k - 1, cmp);
        }
        let mut votes = vec![0usize; classes];
        for &(_, i) in &dists[..k] {
            votes[labels[i]] += 1;
        }
        let mut best = 0;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = c;
            }
        }
        out.push(best);
    }
    Ok(out)
}

/// Test accuracy of [`knn_predict`]; the test set must carry labels.
pub fn knn_classify(train: &Dataset, test: &Dataset, k: usize) -> Result<f64> {
    let truth = test
        .labels()
        .ok_or_else(|| Error::InvalidArgument("test set has no labels".into()))?;
    let pred = knn_predict(train, test, k)?;
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn ds(values: &[f64], labels: &[usize]) -> Dataset {
        Dataset::new(
            DMatrix::from_row_slice(1, values.len(), values),
            Some(labels.to_vec()),
            Some(3),
            None,
        )
        .unwrap()
    }

    #[test]
    fn exact_match_with_one_neighbor() {
        let train = ds(&[0.0, 5.0, 9.0], &[2, 0, 1]);
        let test = ds(&[5.0, 9.0], &[0, 1]);
        assert_eq!(knn_predict(&train, &test, 1).unwrap(), vec![0, 1]);
        assert_eq!(knn_classify(&train, &test, 1).unwrap(), 1.0);
    }

    #[test]
    fn whole_training_set_votes_majority() {
        let train = ds(&[0.0, 1.0, 2.0, 3.0, 4.0], &[1, 1, 1, 0, 2]);
        let test = ds(&[3.9, -2.0], &[0, 1]);
        assert_eq!(knn_predict(&train, &test, 5).unwrap(), vec![1, 1]);
        assert!(knn_classify(&train, &test, 6).is_err());
    }
}
