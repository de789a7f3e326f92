use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmotionScore {
    pub emotion: usize,
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Top-1 identification accuracy of one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub per_emotion: Vec<EmotionScore>,
}

impl Report {
    /// `(emotion, truth, prediction)` triples.
    pub fn from_predictions(rows: &[(usize, usize, usize)]) -> Self {
        let mut by_emotion: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for &(e, truth, pred) in rows {
            let entry = by_emotion.entry(e).or_default();
            entry.0 += 1;
            entry.1 += usize::from(truth == pred);
        }
        let ratio = |c: usize, t: usize| if t == 0 { 0.0 } else { c as f64 / t as f64 };
        let total = rows.len();
        let correct = by_emotion.values().map(|v| v.1).sum();
        Report {
            total,
            correct,
            accuracy: ratio(correct, total),
            per_emotion: by_emotion
                .into_iter()
                .map(|(emotion, (t, c))| EmotionScore {
                    emotion,
                    total: t,
                    correct: c,
                    accuracy: ratio(c, t),
                })
                .collect(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report is always serializable")
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

/// Mean accuracy over repeated cross-emotion runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetSummary {
    pub mean_accuracy: f64,
    pub runs: Vec<SubsetRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetRun {
    pub train_emotions: Vec<usize>,
    pub accuracy: f64,
}
