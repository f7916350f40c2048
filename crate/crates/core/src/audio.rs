//! Time-domain multichannel signals.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Multichannel real-valued signal, nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    channels: Vec<Vec<f64>>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidConfig("sample rate must be positive"));
        }
        if let Some(first) = channels.first() {
            let len = first.len();
            if let Some(bad) = channels.iter().find(|c| c.len() != len) {
                return Err(Error::shape("channel length", len, bad.len()));
            }
        }
        Ok(Self {
            channels,
            sample_rate,
        })
    }

    pub fn silence(channels: usize, len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(alloc::vec![alloc::vec![0.0; len]; channels], sample_rate)
    }

    pub fn mono(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        Self::new(alloc::vec![samples], sample_rate)
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, idx: usize) -> &[f64] {
        &self.channels[idx]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    /// Single-channel buffer holding channel `idx`.
    pub fn select(&self, idx: usize) -> AudioBuffer {
        AudioBuffer {
            channels: alloc::vec![self.channels[idx].clone()],
            sample_rate: self.sample_rate,
        }
    }

    /// Zero-pads or truncates every channel to `len` samples.
    pub fn resized(mut self, len: usize) -> AudioBuffer {
        for c in &mut self.channels {
            c.resize(len, 0.0);
        }
        self
    }

    /// Stacks single- or multichannel buffers into one buffer.
    pub fn stack(parts: &[AudioBuffer]) -> Result<AudioBuffer> {
        let rate = parts
            .first()
            .map(|b| b.sample_rate)
            .ok_or(Error::InvalidConfig("nothing to stack"))?;
        let mut channels = Vec::new();
        for p in parts {
            if p.sample_rate != rate {
                return Err(Error::InvalidConfig("sample rates differ"));
            }
            channels.extend(p.channels.iter().cloned());
        }
        AudioBuffer::new(channels, rate)
    }

    pub fn scaled(&self, gain: f64) -> AudioBuffer {
        AudioBuffer {
            channels: self
                .channels
                .iter()
                .map(|c| c.iter().map(|v| v * gain).collect())
                .collect(),
            sample_rate: self.sample_rate,
        }
    }
}
