//! Maximum probe-holder slippage over repeated trials of tracked 6-DOF pose.
//!
//! Each trial's deviation on an axis is the largest absolute departure from
//! the trial's first sample. Trials are summarized by the mean and the
//! population standard deviation of those maxima.

use std::io::Read;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum SlippageError {
    #[error("no trials to analyze")]
    NoTrials,
    #[error("trial {trial} has {samples} sample(s), need at least 2")]
    EmptyTrial { trial: String, samples: usize },
    #[error("trial {trial}: time does not increase at t_us = {t_us}")]
    NonMonotonicTime { trial: String, t_us: u64 },
    #[error("trial {trial} mixes conditions {first:?} and {second:?}")]
    MixedCondition { trial: String, first: String, second: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Position in millimeters, orientation in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSample6Dof {
    pub t_us: u64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub yaw: f64,
    pub pitch: f64,
}

impl PoseSample6Dof {
    fn axes(&self) -> [f64; 6] {
        [self.x, self.y, self.z, self.roll, self.yaw, self.pitch]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub id: String,
    pub condition: Option<String>,
    pub samples: Vec<PoseSample6Dof>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisStat {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Translational {
    pub x: AxisStat,
    pub y: AxisStat,
    pub z: AxisStat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotational {
    pub roll: AxisStat,
    pub yaw: AxisStat,
    pub pitch: AxisStat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlippageReport {
    pub trial_count: usize,
    pub translational_mm: Translational,
    pub rotational_deg: Rotational,
}

/// Per-axis maxima of one trial, in the order x, y, z, roll, yaw, pitch.
pub fn trial_deviation(id: &str, samples: &[PoseSample6Dof]) -> Result<[f64; 6], SlippageError> {
    if samples.len() < 2 {
        return Err(SlippageError::EmptyTrial {
            trial: id.to_string(),
            samples: samples.len(),
        });
    }
    if let Some(w) = samples.windows(2).find(|w| w[1].t_us <= w[0].t_us) {
        return Err(SlippageError::NonMonotonicTime {
            trial: id.to_string(),
            t_us: w[1].t_us,
        });
    }
    let base = samples[0].axes();
    let mut dev = [0.0f64; 6];
    for s in samples {
        for (d, (v, b)) in dev.iter_mut().zip(s.axes().iter().zip(base)) {
            *d = d.max((v - b).abs());
        }
    }
    Ok(dev)
}

fn stat(values: &[f64]) -> AxisStat {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    AxisStat { mean, std: var.sqrt() }
}

pub fn analyze_trials(trials: &[Vec<PoseSample6Dof>]) -> Result<SlippageReport, SlippageError> {
    if trials.is_empty() {
        return Err(SlippageError::NoTrials);
    }
    let devs = trials
        .iter()
        .enumerate()
        .map(|(i, t)| trial_deviation(&i.to_string(), t))
        .collect::<Result<Vec<_>, _>>()?;
    let axis = |k: usize| stat(&devs.iter().map(|d| d[k]).collect::<Vec<_>>());
    Ok(SlippageReport {
        trial_count: trials.len(),
        translational_mm: Translational {
            x: axis(0),
            y: axis(1),
            z: axis(2),
        },
        rotational_deg: Rotational {
            roll: axis(3),
            yaw: axis(4),
            pitch: axis(5),
        },
    })
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    trial: String,
    t_us: u64,
    x: f64,
    y: f64,
    z: f64,
    roll: f64,
    yaw: f64,
    pitch: f64,
    #[serde(default)]
    condition: Option<String>,
}

/// Reads `trial,t_us,x,y,z,roll,yaw,pitch[,condition]` rows. Trials keep
/// the order in which they first appear.
pub fn read_trials_csv<R: Read>(input: R) -> Result<Vec<Trial>, SlippageError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut trials: Vec<Trial> = Vec::new();
    for row in reader.deserialize::<CsvRow>() {
        let row = row?;
        let condition = row.condition.filter(|c| !c.is_empty());
        let sample = PoseSample6Dof {
            t_us: row.t_us,
            x: row.x,
            y: row.y,
            z: row.z,
            roll: row.roll,
            yaw: row.yaw,
            pitch: row.pitch,
        };
        match trials.iter_mut().find(|t| t.id == row.trial) {
            Some(t) => {
                if t.condition != condition {
                    return Err(SlippageError::MixedCondition {
                        trial: row.trial,
                        first: t.condition.clone().unwrap_or_default(),
                        second: condition.unwrap_or_default(),
                    });
                }
                t.samples.push(sample);
            }
            None => trials.push(Trial {
                id: row.trial,
                condition,
                samples: vec![sample],
            }),
        }
    }
    Ok(trials)
}

/// One row of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRow {
    pub condition: Option<String>,
    #[serde(flatten)]
    pub report: SlippageReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlippageTable {
    /// Always "population": std divides by the number of trials.
    pub std_kind: String,
    pub rows: Vec<ConditionRow>,
}

/// Groups trials by condition (order of first appearance) and summarizes each group.
pub fn summarize(trials: &[Trial]) -> Result<SlippageTable, SlippageError> {
    if trials.is_empty() {
        return Err(SlippageError::NoTrials);
    }
    let mut conditions: Vec<Option<String>> = Vec::new();
    for t in trials {
        if !conditions.contains(&t.condition) {
            conditions.push(t.condition.clone());
        }
    }
    let mut rows = Vec::new();
    for c in conditions {
        let group: Vec<&Trial> = trials.iter().filter(|t| t.condition == c).collect();
        for t in &group {
            trial_deviation(&t.id, &t.samples)?;
        }
        let samples: Vec<Vec<PoseSample6Dof>> = group.iter().map(|t| t.samples.clone()).collect();
        rows.push(ConditionRow {
            condition: c,
            report: analyze_trials(&samples)?,
        });
    }
    Ok(SlippageTable {
        std_kind: "population".into(),
        rows,
    })
}
