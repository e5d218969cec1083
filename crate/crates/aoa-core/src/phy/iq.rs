//! Complex baseband streams and the on-disk interchange format: interleaved
//! little-endian 32-bit float (I, Q) pairs plus a line-oriented sidecar
//! metadata file.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{AoaError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct IqStream {
    pub samples: Vec<Complex64>,
    /// Samples per second.
    pub sample_rate: f64,
    /// Absolute start time of the first sample, seconds.
    pub t0: f64,
    /// RF channel index 0..=39 the stream is centered on.
    pub center_channel: u8,
    /// Per-sample validity mask set by the RF switch (switch transients are
    /// invalid). `None` means every sample is valid.
    pub valid: Option<Vec<bool>>,
}

impl IqStream {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64, t0: f64, center_channel: u8) -> Self {
        IqStream {
            samples,
            sample_rate,
            t0,
            center_channel,
            valid: None,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Time of sample `idx` on this stream's clock.
    pub fn sample_time(&self, idx: usize) -> f64 {
        self.t0 + idx as f64 / self.sample_rate
    }

    pub fn is_valid(&self, idx: usize) -> bool {
        match &self.valid {
            Some(mask) => mask.get(idx).copied().unwrap_or(false),
            None => idx < self.samples.len(),
        }
    }

    /// Write the samples as interleaved f32 LE pairs to `path`, with the
    /// metadata sidecar at `<path>.meta`.
    pub fn write_file(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(self.samples.len() * 8);
        for s in &self.samples {
            buf.extend_from_slice(&(s.re as f32).to_le_bytes());
            buf.extend_from_slice(&(s.im as f32).to_le_bytes());
        }
        let mut f = fs::File::create(path)?;
        f.write_all(&buf)?;
        let meta = format!(
            "sample_rate={}\nt0={}\nchannel={}\nsamples={}\n",
            self.sample_rate,
            self.t0,
            self.center_channel,
            self.samples.len()
        );
        fs::write(sidecar_path(path), meta)?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<IqStream> {
        let meta = fs::read_to_string(sidecar_path(path))?;
        let mut sample_rate = None;
        let mut t0 = None;
        let mut channel = None;
        for line in meta.lines() {
            let Some((key, value)) = line.split_once('=') else {
                continue;
            };
            match key.trim() {
                "sample_rate" => sample_rate = value.trim().parse::<f64>().ok(),
                "t0" => t0 = value.trim().parse::<f64>().ok(),
                "channel" => channel = value.trim().parse::<u8>().ok(),
                _ => {}
            }
        }
        let (Some(sample_rate), Some(t0), Some(channel)) = (sample_rate, t0, channel) else {
            return Err(AoaError::Config(format!(
                "incomplete IQ metadata sidecar for {}",
                path.display()
            )));
        };

        let mut raw = Vec::new();
        fs::File::open(path)?.read_to_end(&mut raw)?;
        if raw.len() % 8 != 0 {
            return Err(AoaError::Config(format!(
                "IQ file {} is not a whole number of f32 pairs",
                path.display()
            )));
        }
        let samples = raw
            .chunks_exact(8)
            .map(|c| {
                let i = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                let q = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
                Complex64::new(f64::from(i), f64::from(q))
            })
            .collect();
        Ok(IqStream::new(samples, sample_rate, t0, channel))
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".meta");
    std::path::PathBuf::from(os)
}
