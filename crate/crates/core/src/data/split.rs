use rand::seq::SliceRandom;

use crate::data::panel::Panel;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Panel,
    pub test: Panel,
    pub seed: u64,
}

/// Label-stratified split. Each class contributes `round(n_class * fraction)`
/// rows to the training side; rows keep their original relative order.
pub fn stratified_split(panel: &Panel, train_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} must lie in (0, 1)"
        )));
    }
    let labels = panel.labels()?;
    let (pos, neg): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| labels[i]);
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::invalid("stratified split needs both classes"));
    }
    let mut rng = rng_from_seed(seed);
    let mut in_train = vec![false; panel.len()];
    for mut class in [neg, pos] {
        class.shuffle(&mut rng);
        let take = (class.len() as f64 * train_fraction).round() as usize;
        for &i in &class[..take] {
            in_train[i] = true;
        }
    }
    let (train_idx, test_idx): (Vec<usize>, Vec<usize>) =
        (0..panel.len()).partition(|&i| in_train[i]);
    Ok(Split {
        train: panel.select(&train_idx),
        test: panel.select(&test_idx),
        seed,
    })
}
