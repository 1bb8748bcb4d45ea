//! Dwell-based user intent prediction.
//!
//! The predictor consumes target-resolved gaze samples (which block, if any,
//! the user is looking at) and fires a [`PredictedIntent`] the first time the
//! gaze has rested continuously on one block for at least the dwell threshold.
//! Short glances while scanning the workspace never reach the threshold and
//! are ignored.
//!
//! A fired intent stays latched until a dwell completes on another block, the
//! block stops being available, or the user has not looked at it for
//! `latch_expiry` seconds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BlockId, Seconds, TIME_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    pub t: Seconds,
    /// `None` when the gaze is off all blocks.
    pub block: Option<BlockId>,
}

impl GazeSample {
    pub fn new(t: Seconds, block: Option<BlockId>) -> Self {
        GazeSample { t, block }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DwellConfig {
    /// Continuous dwell needed before an intent fires.
    pub dwell: Seconds,
    /// Nominal sampling period of the gaze stream; also the simulation tick.
    pub sample_period: Seconds,
    /// Consecutive off-target samples bridged without breaking a dwell.
    pub gap_tolerance: u32,
    /// A latched intent expires after this long without gaze on its block.
    pub latch_expiry: Seconds,
}

impl Default for DwellConfig {
    fn default() -> Self {
        DwellConfig { dwell: 0.8, sample_period: 1.0 / 30.0, gap_tolerance: 0, latch_expiry: 5.0 }
    }
}

impl DwellConfig {
    pub fn validate(&self) -> Result<(), GazeError> {
        if !(self.dwell > 0.0) || !(self.sample_period > 0.0) || !(self.latch_expiry > 0.0) {
            return Err(GazeError::InvalidConfig);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedIntent {
    pub block: BlockId,
    pub t_fired: Seconds,
}

#[derive(Debug, Error, PartialEq)]
pub enum GazeError {
    #[error("gaze sample at t={got} arrived after t={last}")]
    OutOfOrder { last: Seconds, got: Seconds },
    #[error("dwell, sample period and latch expiry must be positive")]
    InvalidConfig,
}

#[derive(Debug, Clone, PartialEq)]
struct Episode {
    block: BlockId,
    start: Seconds,
    gap: u32,
    fired: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct Latch {
    intent: PredictedIntent,
    last_seen: Seconds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DwellPredictor {
    config: DwellConfig,
    last_t: Option<Seconds>,
    episode: Option<Episode>,
    latch: Option<Latch>,
}

impl DwellPredictor {
    pub fn new(config: DwellConfig) -> Self {
        DwellPredictor { config, last_t: None, episode: None, latch: None }
    }

    pub fn config(&self) -> &DwellConfig {
        &self.config
    }

    /// Feeds one sample; returns an intent exactly when a dwell first reaches
    /// the threshold.
    pub fn ingest(&mut self, sample: GazeSample) -> Result<Option<PredictedIntent>, GazeError> {
        if let Some(last) = self.last_t {
            if sample.t < last {
                return Err(GazeError::OutOfOrder { last, got: sample.t });
            }
        }
        self.last_t = Some(sample.t);

        if let (Some(latch), Some(b)) = (self.latch.as_mut(), sample.block) {
            if latch.intent.block == b {
                latch.last_seen = sample.t;
            }
        }

        let on_episode = matches!((&self.episode, sample.block), (Some(ep), Some(b)) if ep.block == b);
        if on_episode {
            let ep = self.episode.as_mut().expect("checked above");
            ep.gap = 0;
        } else {
            let bridged = match self.episode.as_mut() {
                Some(ep) if ep.gap < self.config.gap_tolerance => {
                    ep.gap += 1;
                    true
                }
                _ => false,
            };
            if !bridged {
                self.episode = sample
                    .block
                    .map(|block| Episode { block, start: sample.t, gap: 0, fired: false });
            }
            // An interrupting sample never completes a dwell.
            if bridged || sample.block.is_none() {
                return Ok(None);
            }
        }

        let ep = self.episode.as_mut().expect("episode exists for an on-target sample");
        if !ep.fired && sample.t - ep.start + TIME_EPS >= self.config.dwell {
            ep.fired = true;
            let intent = PredictedIntent { block: ep.block, t_fired: sample.t };
            self.latch = Some(Latch { intent, last_seen: sample.t });
            return Ok(Some(intent));
        }
        Ok(None)
    }

    /// The latched intent, if it is still valid at `now`. `available` reports
    /// whether a block is still at its start position.
    pub fn current_intent(
        &self,
        now: Seconds,
        available: impl Fn(BlockId) -> bool,
    ) -> Option<PredictedIntent> {
        let latch = self.latch.as_ref()?;
        if !available(latch.intent.block) {
            return None;
        }
        if now - latch.last_seen >= self.config.latch_expiry {
            return None;
        }
        Some(latch.intent)
    }

    /// Drops any dwell in progress and any latched intent. Sample ordering is
    /// still enforced across a reset.
    pub fn reset(&mut self) {
        self.episode = None;
        self.latch = None;
    }
}
