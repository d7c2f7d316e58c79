//! Exact delta-comb spectral functions: Σ w_l δ(ω − ω_l).

use num_complex::Complex64;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralLine {
    pub frequency: f64,
    pub weight: Complex64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectrumError {
    #[error("line at {frequency} has weight {re} + {im}i, not real and positive")]
    NotPositive { frequency: f64, re: f64, im: f64 },
}

/// Lines sorted by strictly increasing frequency. A spectrum flagged
/// positive has only real, strictly positive weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineSpectrum {
    lines: Vec<SpectralLine>,
    positive: bool,
}

impl LineSpectrum {
    /// Sorts the lines, merges frequencies closer than `merge_tol` by adding
    /// weights, snaps clusters within `merge_tol` of zero to exactly zero and
    /// drops lines whose weight is exactly zero.
    pub fn from_lines(mut raw: Vec<SpectralLine>, merge_tol: f64) -> Self {
        raw.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
        let mut lines: Vec<SpectralLine> = Vec::with_capacity(raw.len());
        let mut i = 0;
        while i < raw.len() {
            let start = raw[i].frequency;
            let mut sum_f = 0.0;
            let mut weight = Complex64::default();
            let mut n = 0;
            while i < raw.len() && raw[i].frequency - start <= merge_tol {
                sum_f += raw[i].frequency;
                weight += raw[i].weight;
                n += 1;
                i += 1;
            }
            let mut frequency = sum_f / n as f64;
            if frequency.abs() <= merge_tol {
                frequency = 0.0;
            }
            if weight != Complex64::default() {
                match lines.last_mut() {
                    Some(last) if last.frequency == frequency => last.weight += weight,
                    _ => lines.push(SpectralLine { frequency, weight }),
                }
            }
        }
        Self { lines, positive: false }
    }

    pub fn lines(&self) -> &[SpectralLine] {
        &self.lines
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn is_positive(&self) -> bool {
        self.positive
    }

    /// Checks and records positivity. Imaginary parts below `1e-14` of the
    /// largest weight are treated as rounding and removed.
    pub fn into_positive(mut self) -> Result<Self, SpectrumError> {
        let scale = self.lines.iter().map(|l| l.weight.norm()).fold(0.0, f64::max);
        for l in &mut self.lines {
            if l.weight.im.abs() > 1e-14 * scale || !(l.weight.re > 0.0) {
                return Err(SpectrumError::NotPositive { frequency: l.frequency, re: l.weight.re, im: l.weight.im });
            }
            l.weight.im = 0.0;
        }
        self.positive = true;
        Ok(self)
    }

    /// Weight of the line within `tol` of `frequency`, zero if none.
    pub fn weight_at(&self, frequency: f64, tol: f64) -> Complex64 {
        self.lines
            .iter()
            .find(|l| (l.frequency - frequency).abs() <= tol)
            .map(|l| l.weight)
            .unwrap_or_default()
    }

    pub fn total_weight(&self) -> Complex64 {
        self.lines.iter().map(|l| l.weight).sum()
    }

    /// Largest |weight|, used to scale comparisons.
    pub fn scale(&self) -> f64 {
        self.lines.iter().map(|l| l.weight.norm()).fold(0.0, f64::max)
    }
}
