//! Evaluation metrics in the goals / captures / out-of-time schema.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{EVENT_CAPTURE, EVENT_GOAL};
use crate::error::{Error, Result};
use crate::smdp::Trajectory;

pub const METRICS_SCHEMA_VERSION: u32 = 1;

/// Outcome counts normalised to a 100-episode batch, average final `w`
/// (the sum of base shaped rewards) and average played length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub episodes: usize,
    pub goals: f64,
    pub captures: f64,
    pub out_of_time: f64,
    pub avg_reward: f64,
    pub avg_episode_length: f64,
}

pub fn metrics_collect(trajectories: &[Trajectory]) -> Result<MetricsRecord> {
    if trajectories.is_empty() {
        return Err(Error::Validation("no episodes to summarise".into()));
    }
    let n = trajectories.len() as f64;
    let per100 = 100.0 / n;
    let count = |event: Option<&str>| trajectories.iter().filter(|tr| tr.event() == event).count() as f64;
    Ok(MetricsRecord {
        episodes: trajectories.len(),
        goals: count(Some(EVENT_GOAL)) * per100,
        captures: count(Some(EVENT_CAPTURE)) * per100,
        out_of_time: count(None) * per100,
        avg_reward: trajectories.iter().map(Trajectory::base_reward_sum).sum::<f64>() / n,
        avg_episode_length: trajectories.iter().map(|tr| tr.length() as f64).sum::<f64>() / n,
    })
}

/// Mean and (population) standard deviation of each column over trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub trials: usize,
    pub mean: MetricsRecord,
    pub std: MetricsRecord,
}

impl MetricsSummary {
    pub fn from_trials(records: &[MetricsRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Validation("no trials to summarise".into()));
        }
        let n = records.len() as f64;
        let column = |f: fn(&MetricsRecord) -> f64| {
            let mean = records.iter().map(f).sum::<f64>() / n;
            let var = records.iter().map(|r| (f(r) - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        };
        let (goals, goals_sd) = column(|r| r.goals);
        let (captures, captures_sd) = column(|r| r.captures);
        let (oot, oot_sd) = column(|r| r.out_of_time);
        let (reward, reward_sd) = column(|r| r.avg_reward);
        let (len, len_sd) = column(|r| r.avg_episode_length);
        let episodes = records[0].episodes;
        Ok(MetricsSummary {
            trials: records.len(),
            mean: MetricsRecord {
                episodes,
                goals,
                captures,
                out_of_time: oot,
                avg_reward: reward,
                avg_episode_length: len,
            },
            std: MetricsRecord {
                episodes,
                goals: goals_sd,
                captures: captures_sd,
                out_of_time: oot_sd,
                avg_reward: reward_sd,
                avg_episode_length: len_sd,
            },
        })
    }

    /// Aligned human-readable table.
    pub fn to_table(&self, label: &str) -> String {
        let m = &self.mean;
        let s = &self.std;
        let mut out = String::new();
        out.push_str(&format!(
            "{:<16} {:>14} {:>14} {:>14} {:>16} {:>16}\n",
            "run", "goals", "captures", "out_of_time", "avg_reward", "episode_length"
        ));
        out.push_str(&format!(
            "{:<16} {:>14} {:>14} {:>14} {:>16} {:>16}\n",
            label,
            format!("{:.1}±{:.1}", m.goals, s.goals),
            format!("{:.1}±{:.1}", m.captures, s.captures),
            format!("{:.1}±{:.1}", m.out_of_time, s.out_of_time),
            format!("{:.3}±{:.3}", m.avg_reward, s.avg_reward),
            format!("{:.1}±{:.1}", m.avg_episode_length, s.avg_episode_length),
        ));
        out
    }
}

/// Columnar metrics file: schema/mode comment, header, one row per trial.
pub fn write_metrics<W: Write>(records: &[MetricsRecord], mode: &str, scenario: &str, mut out: W) -> Result<()> {
    writeln!(out, "# schema_version={METRICS_SCHEMA_VERSION} mode={mode} scenario={scenario}")?;
    writeln!(out, "trial episodes goals captures out_of_time avg_reward avg_episode_length")?;
    for (i, r) in records.iter().enumerate() {
        writeln!(
            out,
            "{i} {} {:.3} {:.3} {:.3} {:.6} {:.3}",
            r.episodes, r.goals, r.captures, r.out_of_time, r.avg_reward, r.avg_episode_length
        )?;
    }
    Ok(())
}
