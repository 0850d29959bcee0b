//! MFCC extraction from PCM audio.
//!
//! The pipeline is the classic one: framing → Hamming window → FFT power
//! spectrum → triangular mel filterbank → log energies → orthonormal DCT-II.
//! Every stage is deterministic; identical inputs yield identical outputs.

use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A mono audio signal with samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    /// Wraps raw samples after validating them. All samples must be finite
    /// and within `[-1, 1]`, the buffer must be non-empty, and the rate
    /// must be positive.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidParameter(
                "sample rate must be positive".into(),
            ));
        }
        if samples.is_empty() {
            return Err(Error::EmptyInput("audio buffer has no samples".into()));
        }
        for (i, &s) in samples.iter().enumerate() {
            if !s.is_finite() || !(-1.0..=1.0).contains(&s) {
                return Err(Error::InvalidParameter(format!(
                    "sample {i} is {s}, outside [-1, 1]"
                )));
            }
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Reads a 16-bit PCM WAV file. Multi-channel audio is averaged down to
    /// mono; integer samples are scaled by 1/32768.
    pub fn from_wav_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_wav_bytes(&bytes)
    }

    /// Same as [`AudioBuffer::from_wav_path`] but from any reader.
    pub fn from_wav_reader<R: Read>(mut reader: R) -> Result<Self> {
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        Self::from_wav_bytes(&bytes)
    }

    /// Parses RIFF/WAVE bytes. Only uncompressed 16-bit PCM is accepted.
    pub fn from_wav_bytes(bytes: &[u8]) -> Result<Self> {
        parse_wav(bytes)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn parse_wav(bytes: &[u8]) -> Result<AudioBuffer> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::Format("not a RIFF/WAVE file".into()));
    }
    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (tag, channels, rate, bits)
    let mut data: Option<&[u8]> = None;
    let mut pos = 12usize;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_end = pos + 8 + size;
        if body_end > bytes.len() {
            return Err(Error::Format(format!(
                "chunk `{}` overruns the file",
                String::from_utf8_lossy(id)
            )));
        }
        let body = &bytes[pos + 8..body_end];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::Format("fmt chunk too short".into()));
                }
                let tag = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                fmt = Some((tag, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word-aligned: odd sizes are followed by a pad byte.
        pos = body_end + (size & 1);
    }
    let (tag, channels, rate, bits) =
        fmt.ok_or_else(|| Error::Format("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::Format("missing data chunk".into()))?;
    if tag != 1 {
        return Err(Error::Format(format!(
            "only PCM WAV is supported (format tag {tag})"
        )));
    }
    if bits != 16 {
        return Err(Error::Format(format!(
            "only 16-bit samples are supported (got {bits}-bit)"
        )));
    }
    if channels == 0 {
        return Err(Error::Format("fmt chunk declares zero channels".into()));
    }
    let frame_bytes = 2 * channels as usize;
    if data.len() % frame_bytes != 0 {
        return Err(Error::Format(format!(
            "data chunk of {} bytes is not a whole number of {channels}-channel frames",
            data.len()
        )));
    }
    let samples = data
        .chunks_exact(frame_bytes)
        .map(|frame| {
            let sum: f64 = frame
                .chunks_exact(2)
                .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64)
                .sum();
            sum / channels as f64 / 32768.0
        })
        .collect();
    AudioBuffer::new(samples, rate)
}

/// Parameters for [`mfcc`]. `fft_size` must be a power of two no smaller
/// than `frame_length`; `coefficients` may not exceed `mel_filters`; `hop`
/// may not exceed `frame_length`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MfccConfig {
    /// Analysis window length in samples.
    pub frame_length: usize,
    /// Samples advanced between consecutive frames.
    pub hop: usize,
    /// FFT length; frames are zero-padded up to it.
    pub fft_size: usize,
    /// Number of triangular mel filters spanning 0..Nyquist.
    pub mel_filters: usize,
    /// Number of DCT outputs kept per frame.
    pub coefficients: usize,
    /// Added to each filter energy before the log.
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self::for_sample_rate(16_000)
    }
}

impl MfccConfig {
    /// Standard speech-processing defaults: 25 ms frames, 10 ms hop, FFT
    /// rounded up to the next power of two, 40 filters, 40 coefficients.
    pub fn for_sample_rate(sample_rate: u32) -> Self {
        let frame_length = (sample_rate as usize * 25) / 1000;
        let hop = (sample_rate as usize * 10) / 1000;
        Self {
            frame_length,
            hop,
            fft_size: frame_length.next_power_of_two(),
            mel_filters: 40,
            coefficients: 40,
            log_floor: 1e-10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_length == 0 || self.hop == 0 {
            return Err(Error::InvalidParameter(
                "frame_length and hop must be positive".into(),
            ));
        }
        if self.hop > self.frame_length {
            return Err(Error::InvalidParameter(format!(
                "hop ({}) must not exceed frame_length ({})",
                self.hop, self.frame_length
            )));
        }
        if !self.fft_size.is_power_of_two() || self.fft_size < self.frame_length {
            return Err(Error::InvalidParameter(format!(
                "fft_size ({}) must be a power of two >= frame_length ({})",
                self.fft_size, self.frame_length
            )));
        }
        if self.mel_filters == 0 {
            return Err(Error::InvalidParameter(
                "mel_filters must be positive".into(),
            ));
        }
        if self.coefficients == 0 || self.coefficients > self.mel_filters {
            return Err(Error::InvalidParameter(format!(
                "coefficients ({}) must be in 1..=mel_filters ({})",
                self.coefficients, self.mel_filters
            )));
        }
        if !(self.log_floor.is_finite() && self.log_floor > 0.0) {
            return Err(Error::InvalidParameter(
                "log_floor must be a positive finite value".into(),
            ));
        }
        Ok(())
    }

    /// `floor((n - frame_length) / hop) + 1`, the number of full frames in a
    /// signal of `n` samples.
    pub fn frame_count(&self, n: usize) -> usize {
        if n < self.frame_length {
            0
        } else {
            (n - self.frame_length) / self.hop + 1
        }
    }
}

/// Mel value of a frequency in Hz: `2595 * log10(1 + hz / 700)`.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

/// Inverse of [`hz_to_mel`].
pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// The `mel_filters + 2` break frequencies (Hz) that define the filterbank:
/// equally spaced on the mel scale from 0 to Nyquist.
fn filter_points(config: &MfccConfig, sample_rate: u32) -> Vec<f64> {
    let mel_max = hz_to_mel(sample_rate as f64 / 2.0);
    let m = config.mel_filters;
    (0..m + 2)
        .map(|k| mel_to_hz(mel_max * k as f64 / (m + 1) as f64))
        .collect()
}

/// Peak (center) frequency in Hz of each triangular filter.
pub fn mel_filter_centers(config: &MfccConfig, sample_rate: u32) -> Vec<f64> {
    let points = filter_points(config, sample_rate);
    points[1..=config.mel_filters].to_vec()
}

/// Triangular filterbank as a `mel_filters x (fft_size/2 + 1)` weight matrix.
/// Filter `i` rises linearly from break frequency `i` to its peak at break
/// `i + 1` and falls back to zero at break `i + 2`; weights are evaluated at
/// the exact FFT bin frequencies.
pub fn mel_filterbank(config: &MfccConfig, sample_rate: u32) -> Vec<Vec<f64>> {
    let bins = config.fft_size / 2 + 1;
    let points = filter_points(config, sample_rate);
    let mut bank = vec![vec![0.0; bins]; config.mel_filters];
    for (i, filter) in bank.iter_mut().enumerate() {
        let (lo, mid, hi) = (points[i], points[i + 1], points[i + 2]);
        for (b, w) in filter.iter_mut().enumerate() {
            let f = b as f64 * sample_rate as f64 / config.fft_size as f64;
            if f >= lo && f <= mid {
                *w = (f - lo) / (mid - lo);
            } else if f > mid && f < hi {
                *w = (hi - f) / (hi - mid);
            }
        }
    }
    bank
}

fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos())
        .collect()
}

/// Windowed FFT power spectra, one row per frame, `fft_size/2 + 1` bins each.
fn power_spectra(audio: &AudioBuffer, config: &MfccConfig) -> Vec<Vec<f64>> {
    let frames = config.frame_count(audio.len());
    let window = hamming(config.frame_length);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(config.fft_size);
    let bins = config.fft_size / 2 + 1;
    let mut out = Vec::with_capacity(frames);
    let samples = audio.samples();
    for frame in 0..frames {
        let start = frame * config.hop;
        let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); config.fft_size];
        for (n, slot) in buf.iter_mut().enumerate().take(config.frame_length) {
            slot.re = samples[start + n] * window[n];
        }
        fft.process(&mut buf);
        out.push(buf[..bins].iter().map(|c| c.norm_sqr()).collect());
    }
    out
}

/// Per-frame mel filterbank energies (before the log), `frames x mel_filters`.
pub fn mel_energies(audio: &AudioBuffer, config: &MfccConfig) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    if audio.len() < config.frame_length {
        return Err(Error::InvalidParameter(format!(
            "audio has {} samples but one frame needs {}",
            audio.len(),
            config.frame_length
        )));
    }
    let bank = mel_filterbank(config, audio.sample_rate());
    let spectra = power_spectra(audio, config);
    Ok(spectra
        .iter()
        .map(|power| {
            bank.iter()
                .map(|filter| filter.iter().zip(power).map(|(w, p)| w * p).sum())
                .collect()
        })
        .collect())
}

/// Orthonormal DCT-II basis, `out_len x m` rows.
fn dct_basis(out_len: usize, m: usize) -> Vec<Vec<f64>> {
    (0..out_len)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / m as f64).sqrt()
            } else {
                (2.0 / m as f64).sqrt()
            };
            (0..m)
                .map(|j| scale * (PI * (2 * j + 1) as f64 * k as f64 / (2 * m) as f64).cos())
                .collect()
        })
        .collect()
}

/// Extracts MFCCs: one row per frame, `config.coefficients` values each.
///
/// Frame count is `floor((len - frame_length) / hop) + 1`; signals shorter
/// than one frame are an error.
pub fn mfcc(audio: &AudioBuffer, config: &MfccConfig) -> Result<Vec<Vec<f64>>> {
    let energies = mel_energies(audio, config)?;
    let basis = dct_basis(config.coefficients, config.mel_filters);
    Ok(energies
        .iter()
        .map(|row| {
            let logs: Vec<f64> = row.iter().map(|&e| (e + config.log_floor).ln()).collect();
            basis
                .iter()
                .map(|basis_row| basis_row.iter().zip(&logs).map(|(b, x)| b * x).sum())
                .collect()
        })
        .collect())
}
