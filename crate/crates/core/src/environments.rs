//! Loss-sequence generators.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::LossVector;
use crate::error::{FplError, Result};
use crate::perturbation::{mix_seed, stream_rng};
use crate::probability::WeightVector;

const BERNOULLI_TAG: u64 = 0xbe_7a01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EnvironmentSpec {
    /// Two experts, losses `0 1 0 1 ...` and `1/2 0 1 0 ...`.
    FlKiller,
    /// Independent `{0, 1}` losses with means `probabilities`.
    Bernoulli { probabilities: Vec<f64>, seed: u64 },
    /// Loss 1 on the expert the predictor is most likely to pick.
    GreedyAdversary,
    /// Rows read from a whitespace-separated text file.
    Playback { path: PathBuf },
}

#[derive(Debug, Clone)]
enum Source {
    FlKiller,
    Bernoulli { probabilities: Vec<f64>, seed: u64 },
    GreedyAdversary,
    Playback(Vec<LossVector>),
}

/// An instantiated environment for `n` experts over `horizon` steps.
#[derive(Debug, Clone)]
pub struct Environment {
    source: Source,
    n: usize,
    horizon: u64,
}

impl Environment {
    pub fn new(spec: &EnvironmentSpec, n: usize, horizon: u64) -> Result<Self> {
        let source = match spec {
            EnvironmentSpec::FlKiller => {
                if n != 2 {
                    return Err(FplError::invalid(format!(
                        "fl_killer needs exactly 2 experts, got {n}"
                    )));
                }
                Source::FlKiller
            }
            EnvironmentSpec::Bernoulli { probabilities, seed } => {
                if probabilities.len() != n {
                    return Err(FplError::invalid(format!(
                        "bernoulli has {} probabilities for {n} experts",
                        probabilities.len()
                    )));
                }
                if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(FplError::invalid("bernoulli probabilities must lie in [0, 1]"));
                }
                Source::Bernoulli {
                    probabilities: probabilities.clone(),
                    seed: *seed,
                }
            }
            EnvironmentSpec::GreedyAdversary => Source::GreedyAdversary,
            EnvironmentSpec::Playback { path } => {
                let rows = read_playback(path, n)?;
                if (rows.len() as u64) < horizon {
                    return Err(FplError::invalid(format!(
                        "playback file {} has {} rows, horizon is {horizon}",
                        path.display(),
                        rows.len()
                    )));
                }
                Source::Playback(rows)
            }
        };
        Ok(Self { source, n, horizon })
    }

    pub fn from_rows(rows: Vec<LossVector>, n: usize) -> Result<Self> {
        if let Some(i) = rows.iter().position(|r| r.len() != n) {
            return Err(FplError::Format {
                row: i + 1,
                message: format!("expected {n} losses"),
            });
        }
        let horizon = rows.len() as u64;
        Ok(Self {
            source: Source::Playback(rows),
            n,
            horizon,
        })
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// Adaptive environments look at the predictor's distribution before
    /// emitting the loss.
    pub fn is_adaptive(&self) -> bool {
        matches!(self.source, Source::GreedyAdversary)
    }

    pub fn next_loss(&self, t: u64, context: Option<&WeightVector>) -> Result<LossVector> {
        if t == 0 || t > self.horizon {
            return Err(FplError::invalid(format!(
                "step {t} outside horizon 1..={}",
                self.horizon
            )));
        }
        match &self.source {
            Source::FlKiller => Ok(LossVector::new(fl_killer_row(t).to_vec())?),
            Source::Bernoulli { probabilities, seed } => {
                let mut rng = stream_rng(mix_seed(*seed, BERNOULLI_TAG), t);
                let values = probabilities
                    .iter()
                    .map(|p| if rng.gen::<f64>() < *p { 1.0 } else { 0.0 })
                    .collect();
                LossVector::new(values)
            }
            Source::GreedyAdversary => {
                let w = context.ok_or_else(|| {
                    FplError::InvalidState("greedy adversary needs the selection probabilities".into())
                })?;
                if w.len() != self.n {
                    return Err(FplError::invalid("weight vector length differs from class size"));
                }
                let mut values = vec![0.0; self.n];
                values[w.argmax()] = 1.0;
                LossVector::new(values)
            }
            Source::Playback(rows) => Ok(rows[(t - 1) as usize].clone()),
        }
    }
}

fn fl_killer_row(t: u64) -> [f64; 2] {
    match t {
        1 => [0.0, 0.5],
        t if t % 2 == 0 => [1.0, 0.0],
        _ => [0.0, 1.0],
    }
}

pub fn read_playback(path: &Path, n: usize) -> Result<Vec<LossVector>> {
    let text = std::fs::read_to_string(path)?;
    parse_playback(&text, n)
}

/// One step per line, `n` whitespace-separated losses; `#` lines are comments.
pub fn parse_playback(text: &str, n: usize) -> Result<Vec<LossVector>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let row = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let values = trimmed
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| FplError::Format {
                    row,
                    message: format!("`{tok}` is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != n {
            return Err(FplError::Format {
                row,
                message: format!("expected {n} losses, found {}", values.len()),
            });
        }
        let loss = LossVector::new(values).map_err(|e| FplError::Format {
            row,
            message: e.to_string(),
        })?;
        rows.push(loss);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probability::inclusion_exclusion;

    #[test]
    fn fl_killer_rows() {
        let env = Environment::new(&EnvironmentSpec::FlKiller, 2, 10).unwrap();
        assert_eq!(env.next_loss(1, None).unwrap().values(), &[0.0, 0.5]);
        assert_eq!(env.next_loss(2, None).unwrap().values(), &[1.0, 0.0]);
        assert_eq!(env.next_loss(3, None).unwrap().values(), &[0.0, 1.0]);
        assert!(env.next_loss(11, None).is_err());
        assert!(Environment::new(&EnvironmentSpec::FlKiller, 3, 10).is_err());
    }

    #[test]
    fn degenerate_bernoulli() {
        let spec = EnvironmentSpec::Bernoulli {
            probabilities: vec![0.0, 1.0],
            seed: 11,
        };
        let env = Environment::new(&spec, 2, 100).unwrap();
        for t in 1..=100 {
            assert_eq!(env.next_loss(t, None).unwrap().values(), &[0.0, 1.0]);
        }
    }

    #[test]
    fn bernoulli_replays() {
        let spec = EnvironmentSpec::Bernoulli {
            probabilities: vec![0.3, 0.5, 0.9],
            seed: 4,
        };
        let a = Environment::new(&spec, 3, 50).unwrap();
        let b = Environment::new(&spec, 3, 50).unwrap();
        for t in 1..=50 {
            assert_eq!(a.next_loss(t, None).unwrap(), b.next_loss(t, None).unwrap());
        }
    }

    #[test]
    fn greedy_hits_most_likely_expert() {
        let env = Environment::new(&EnvironmentSpec::GreedyAdversary, 2, 5).unwrap();
        assert!(env.is_adaptive());
        // w = (0.75, 0.25)
        let w = inclusion_exclusion(&[0.0, 2f64.ln()], 1.0).unwrap();
        assert_eq!(env.next_loss(1, Some(&w)).unwrap().values(), &[1.0, 0.0]);
        assert!(env.next_loss(1, None).is_err());
        let tie = inclusion_exclusion(&[0.0, 0.0], 1.0).unwrap();
        let s = env.next_loss(2, Some(&tie)).unwrap();
        assert_eq!(s.values().iter().filter(|v| **v == 1.0).count(), 1);
        assert_eq!(s.values()[0], 1.0);
    }

    #[test]
    fn playback_parsing() {
        let rows = parse_playback("# header\n0 1\n\n0.5 0.25\n", 2).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].values(), &[0.5, 0.25]);
        let err = parse_playback("0 1\n0 1 1\n", 2).unwrap_err();
        assert!(matches!(err, FplError::Format { row: 2, .. }));
        let err = parse_playback("0 1\n# c\n0 1.5\n", 2).unwrap_err();
        assert!(matches!(err, FplError::Format { row: 3, .. }));
        assert!(matches!(
            parse_playback("0 x\n", 2),
            Err(FplError::Format { row: 1, .. })
        ));
    }
}
