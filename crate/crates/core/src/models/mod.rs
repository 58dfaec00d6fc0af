//! Model implementations and their shared surface: training options, the
//! serialized-model umbrella type, and image-level prediction.

pub mod cnn;
pub mod io;
pub mod linear;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{flatten_normalize, flatten_raw};
use crate::spectral::SpectrumImage;

/// Gradient-descent hyperparameters, shared by every trainer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOptions {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// L2 penalty coefficient on weights (never biases).
    pub l2: f64,
    pub seed: u64,
}

impl TrainOptions {
    pub fn logreg_defaults() -> Self {
        TrainOptions {
            learning_rate: 0.1,
            epochs: 30,
            batch_size: 32,
            l2: 0.0,
            seed: 42,
        }
    }

    pub fn svm_defaults() -> Self {
        TrainOptions {
            learning_rate: 0.1,
            epochs: 30,
            batch_size: 32,
            l2: 1e-4,
            seed: 42,
        }
    }

    pub fn linreg_defaults() -> Self {
        TrainOptions {
            learning_rate: 1e-3,
            epochs: 30,
            batch_size: 32,
            l2: 1e-6,
            seed: 42,
        }
    }

    pub fn cnn_defaults() -> Self {
        TrainOptions {
            learning_rate: 0.01,
            epochs: 15,
            batch_size: 32,
            l2: 0.0,
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive and finite"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::config("l2 must be >= 0"));
        }
        Ok(())
    }
}

/// Provenance recorded in every model file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMeta {
    pub final_train_loss: f64,
    pub epochs_run: usize,
    /// Only set when explicitly requested; files are byte-reproducible by
    /// default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax_tie_low(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Any trained model, as stored in a model file.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Linear(linear::LinearModel),
    Cnn(cnn::CnnModel),
}

/// What a model says about one frame.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Class {
        index: usize,
        label: String,
        /// Probability of the predicted class, when the model is
        /// probabilistic.
        probability: Option<f64>,
        /// Decision score of the predicted class, for margin models.
        score: Option<f64>,
    },
    Dilution { percent: f64, clamped: bool },
}

impl AnyModel {
    pub fn kind_str(&self) -> &'static str {
        match self {
            AnyModel::Linear(m) => m.kind.as_str(),
            AnyModel::Cnn(_) => "cnn",
        }
    }

    pub fn label_set(&self) -> &[String] {
        match self {
            AnyModel::Linear(m) => &m.label_set,
            AnyModel::Cnn(m) => &m.label_set,
        }
    }

    pub fn normalize_pixels(&self) -> bool {
        match self {
            AnyModel::Linear(m) => m.normalize_pixels,
            AnyModel::Cnn(m) => m.normalize_pixels,
        }
    }

    /// Flatten an image exactly the way this model was trained.
    pub fn features_for(&self, img: &SpectrumImage) -> Vec<f64> {
        if self.normalize_pixels() {
            flatten_normalize(img).0
        } else {
            flatten_raw(img).0
        }
    }

    /// Classify or regress one frame.
    pub fn predict_image(&self, img: &SpectrumImage) -> Result<Prediction> {
        match self {
            AnyModel::Linear(m) => {
                let x = self.features_for(img);
                match m.kind {
                    linear::LinearKind::Linreg => {
                        let (percent, clamped) = m.predict_dilution(&x)?;
                        Ok(Prediction::Dilution { percent, clamped })
                    }
                    linear::LinearKind::Logreg => {
                        let probs = m.predict_proba(&x)?;
                        let index = argmax_tie_low(&probs);
                        Ok(Prediction::Class {
                            index,
                            label: m.label_set[index].clone(),
                            probability: Some(probs[index]),
                            score: None,
                        })
                    }
                    linear::LinearKind::Svm => {
                        let scores = m.decision_scores(&x)?;
                        let index = argmax_tie_low(&scores);
                        Ok(Prediction::Class {
                            index,
                            label: m.label_set[index].clone(),
                            probability: None,
                            score: Some(scores[index]),
                        })
                    }
                }
            }
            AnyModel::Cnn(m) => {
                let probs = m.forward_image(img)?;
                let index = argmax_tie_low(&probs);
                Ok(Prediction::Class {
                    index,
                    label: m.label_set[index].clone(),
                    probability: Some(probs[index]),
                    score: None,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax_tie_low(&[0.0, 0.0]), 0);
        assert_eq!(argmax_tie_low(&[0.1, 0.7, 0.2]), 1);
        assert_eq!(argmax_tie_low(&[3.0, 5.0, 5.0, 1.0]), 1);
    }

    #[test]
    fn argmax_matches_a_brute_force_scan() {
        let mut rng = Stream::from_seed(8);
        for _ in 0..500 {
            let n = 1 + rng.next_index(10);
            // Coarse values so ties actually occur.
            let scores: Vec<f64> = (0..n).map(|_| rng.next_index(5) as f64).collect();
            let fast = argmax_tie_low(&scores);
            let mut brute = 0;
            let mut best = f64::NEG_INFINITY;
            for (i, &s) in scores.iter().enumerate() {
                if s > best {
                    best = s;
                    brute = i;
                }
            }
            assert_eq!(fast, brute, "scores {scores:?}");
        }
    }

    #[test]
    fn options_validate_their_domains() {
        assert!(TrainOptions::logreg_defaults().validate().is_ok());
        let mut bad = TrainOptions::logreg_defaults();
        bad.epochs = 0;
        assert!(bad.validate().is_err());
        let mut bad = TrainOptions::svm_defaults();
        bad.learning_rate = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = TrainOptions::linreg_defaults();
        bad.l2 = -1.0;
        assert!(bad.validate().is_err());
    }
}
