//! The four lead-wise augmentations, all driven by one intensity `gamma`.
//!
//! Cut/pad segments are shared by every lead of a record so the leads stay
//! time-aligned. Mask windows are drawn per lead.

use crate::record::MultiLeadRecord;
use crate::rng::RandomStream;

use super::AugmentError;

fn check_gamma(gamma: f64) -> Result<(), AugmentError> {
    if (0.0..=100.0).contains(&gamma) {
        Ok(())
    } else {
        Err(AugmentError::InvalidParams(format!("gamma = {gamma} not in [0, 100]")))
    }
}

/// `gamma` percent of `n` samples, rounded half to even.
pub fn percent_to_samples(gamma: f64, n: usize) -> usize {
    (gamma * n as f64 / 100.0).round_ties_even() as usize
}

/// Adds i.i.d. `N(0, gamma^2)` noise to every sample (`gamma` is the standard deviation).
pub fn gaussian_noise(
    record: &MultiLeadRecord,
    gamma: f64,
    rng: &mut RandomStream,
) -> Result<MultiLeadRecord, AugmentError> {
    check_gamma(gamma)?;
    if gamma == 0.0 {
        return Ok(record.clone());
    }
    let leads = record
        .leads
        .iter()
        .map(|lead| lead.iter().map(|x| x + gamma * rng.standard_normal()).collect())
        .collect();
    Ok(record.with_leads(leads))
}

/// Linear interpolation of `signal` onto `len` evenly spaced points with both
/// endpoints aligned.
pub fn resample_linear(signal: &[f64], len: usize) -> Vec<f64> {
    let n = signal.len();
    if len == 0 {
        return Vec::new();
    }
    if n == 1 || len == 1 {
        return vec![signal[0]; len];
    }
    let span = (n - 1) as f64;
    let steps = (len - 1) as f64;
    (0..len)
        .map(|j| {
            let pos = j as f64 * span / steps;
            let i0 = (pos.floor() as usize).min(n - 2);
            let frac = pos - i0 as f64;
            let (a, b) = (signal[i0], signal[i0 + 1]);
            a + frac * (b - a)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarpMode {
    Cut,
    Pad,
}

/// Where and how much to cut or pad. `start` indexes the original signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WarpDraw {
    pub mode: WarpMode,
    pub start: usize,
    pub len: usize,
}

/// Fair coin for cut/pad, then a uniform segment position.
///
/// Fails when `gamma` would leave fewer than two samples after a cut, whichever
/// branch the coin picks.
pub fn sample_time_warp(n_samples: usize, gamma: f64, rng: &mut RandomStream) -> Result<WarpDraw, AugmentError> {
    check_gamma(gamma)?;
    let len = percent_to_samples(gamma, n_samples);
    if n_samples < len + 2 {
        return Err(AugmentError::TooShort {
            removed: len,
            n_samples,
        });
    }
    let mode = if rng.coin() { WarpMode::Cut } else { WarpMode::Pad };
    let start = match mode {
        WarpMode::Cut => rng.below(n_samples - len + 1),
        WarpMode::Pad => rng.below(n_samples + 1),
    };
    Ok(WarpDraw { mode, start, len })
}

pub fn apply_time_warp(record: &MultiLeadRecord, draw: &WarpDraw) -> Result<MultiLeadRecord, AugmentError> {
    let n = record.n_samples();
    if draw.len == 0 {
        return Ok(record.clone());
    }
    let in_range = match draw.mode {
        WarpMode::Cut => draw.start + draw.len <= n && n - draw.len >= 2,
        WarpMode::Pad => draw.start <= n,
    };
    if !in_range {
        return Err(AugmentError::InvalidParams(format!("warp {draw:?} does not fit {n} samples")));
    }
    let leads = record
        .leads
        .iter()
        .map(|lead| {
            let edited: Vec<f64> = match draw.mode {
                WarpMode::Cut => lead[..draw.start]
                    .iter()
                    .chain(&lead[draw.start + draw.len..])
                    .copied()
                    .collect(),
                WarpMode::Pad => lead[..draw.start]
                    .iter()
                    .copied()
                    .chain(std::iter::repeat_n(0.0, draw.len))
                    .chain(lead[draw.start..].iter().copied())
                    .collect(),
            };
            resample_linear(&edited, n)
        })
        .collect();
    Ok(record.with_leads(leads))
}

pub fn time_warp(record: &MultiLeadRecord, gamma: f64, rng: &mut RandomStream) -> Result<MultiLeadRecord, AugmentError> {
    let draw = sample_time_warp(record.n_samples(), gamma, rng)?;
    apply_time_warp(record, &draw)
}

/// Kernel length for one smoothing call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmoothDraw {
    pub len: usize,
}

pub fn sample_smooth(rng: &mut RandomStream) -> SmoothDraw {
    SmoothDraw { len: 1 + rng.below(5) }
}

/// Integer offsets and normalized weights of a Gaussian window of `len` taps.
///
/// Offsets run from `-(len / 2)` to `len - 1 - len / 2`, so even lengths lean
/// one tap into the past. The width is `max(gamma / 100 * len, 1e-6)`.
pub fn gaussian_kernel(len: usize, gamma: f64) -> Vec<(isize, f64)> {
    let width = (gamma / 100.0 * len as f64).max(1e-6);
    let half = (len / 2) as isize;
    let raw: Vec<(isize, f64)> = (0..len as isize)
        .map(|j| {
            let m = j - half;
            (m, (-((m * m) as f64) / (2.0 * width * width)).exp())
        })
        .collect();
    let total: f64 = raw.iter().map(|(_, w)| w).sum();
    raw.into_iter().map(|(m, w)| (m, w / total)).collect()
}

/// Weighted moving average with edge replication.
pub fn apply_smooth(record: &MultiLeadRecord, gamma: f64, draw: &SmoothDraw) -> Result<MultiLeadRecord, AugmentError> {
    check_gamma(gamma)?;
    if draw.len <= 1 {
        return Ok(record.clone());
    }
    let kernel = gaussian_kernel(draw.len, gamma);
    let n = record.n_samples() as isize;
    let leads = record
        .leads
        .iter()
        .map(|lead| {
            (0..n)
                .map(|t| {
                    let centre = lead[t as usize];
                    // written as a correction to the centre sample so constant signals stay exact
                    centre
                        + kernel
                            .iter()
                            .map(|&(m, w)| w * (lead[(t + m).clamp(0, n - 1) as usize] - centre))
                            .sum::<f64>()
                })
                .collect()
        })
        .collect();
    Ok(record.with_leads(leads))
}

pub fn gaussian_smooth(record: &MultiLeadRecord, gamma: f64, rng: &mut RandomStream) -> Result<MultiLeadRecord, AugmentError> {
    check_gamma(gamma)?;
    let draw = sample_smooth(rng);
    apply_smooth(record, gamma, &draw)
}

/// One contiguous zero window of `len` samples per lead; `starts[i]` is the
/// first masked sample of lead `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskDraw {
    pub starts: Vec<usize>,
    pub len: usize,
}

/// Window length from `gamma`, then an independent uniform start per lead.
pub fn sample_mask(n_leads: usize, n_samples: usize, gamma: f64, rng: &mut RandomStream) -> Result<MaskDraw, AugmentError> {
    check_gamma(gamma)?;
    let len = percent_to_samples(gamma, n_samples).min(n_samples);
    let starts = (0..n_leads).map(|_| rng.below(n_samples - len + 1)).collect();
    Ok(MaskDraw { starts, len })
}

pub fn apply_mask(record: &MultiLeadRecord, draw: &MaskDraw) -> Result<MultiLeadRecord, AugmentError> {
    let n = record.n_samples();
    if draw.starts.len() != record.n_leads() || draw.starts.iter().any(|&s| s + draw.len > n) {
        return Err(AugmentError::InvalidParams(format!("mask {draw:?} does not fit {} x {n}", record.n_leads())));
    }
    let leads = record
        .leads
        .iter()
        .zip(&draw.starts)
        .map(|(lead, &start)| {
            let mut out = lead.clone();
            out[start..start + draw.len].fill(0.0);
            out
        })
        .collect();
    Ok(record.with_leads(leads))
}

pub fn zero_mask(record: &MultiLeadRecord, gamma: f64, rng: &mut RandomStream) -> Result<MultiLeadRecord, AugmentError> {
    let draw = sample_mask(record.n_leads(), record.n_samples(), gamma, rng)?;
    apply_mask(record, &draw)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_record(seed: u64, n: usize, t: usize) -> MultiLeadRecord {
        let mut rng = RandomStream::new(seed);
        MultiLeadRecord::from_leads("r", (0..n).map(|_| (0..t).map(|_| rng.standard_normal()).collect()).collect())
            .unwrap()
    }

    #[test]
    fn rounding_is_half_even() {
        assert_eq!(percent_to_samples(50.0, 5), 2); // 2.5
        assert_eq!(percent_to_samples(50.0, 7), 4); // 3.5
        assert_eq!(percent_to_samples(25.0, 100), 25);
    }

    #[test]
    fn zero_gamma_is_identity() {
        let r = random_record(1, 3, 40);
        for seed in 0..20 {
            let mut rng = RandomStream::new(seed);
            assert_eq!(gaussian_noise(&r, 0.0, &mut rng).unwrap(), r);
            assert_eq!(time_warp(&r, 0.0, &mut rng).unwrap(), r);
            assert_eq!(gaussian_smooth(&r, 0.0, &mut rng).unwrap(), r);
            assert_eq!(zero_mask(&r, 0.0, &mut rng).unwrap(), r);
        }
    }

    #[test]
    fn noise_is_seeded() {
        let r = random_record(2, 2, 50);
        let a = gaussian_noise(&r, 1.0, &mut RandomStream::new(4)).unwrap();
        let b = gaussian_noise(&r, 1.0, &mut RandomStream::new(4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, r);
    }

    #[test]
    fn resample_hand_values() {
        // 4 -> 8 points: positions j * 3 / 7
        let out = resample_linear(&[0.0, 7.0, 14.0, 21.0], 8);
        let expect: Vec<f64> = (0..8).map(|j| j as f64 * 3.0).collect();
        for (a, b) in out.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(resample_linear(&[1.0, 2.0, 3.0], 3), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn cut_at_start_resamples_tail() {
        let lead: Vec<f64> = vec![5.0, -1.0, 2.0, 8.0, 1.0, 3.0, -2.0, 4.0];
        let r = MultiLeadRecord::from_leads("r", vec![lead.clone(), lead]).unwrap();
        let draw = WarpDraw { mode: WarpMode::Cut, start: 0, len: percent_to_samples(50.0, 8) };
        let out = apply_time_warp(&r, &draw).unwrap();
        // tail [1, 3, -2, 4] at positions j*3/7, worked by hand
        let expect = [
            1.0,
            1.0 + 3.0 / 7.0 * 2.0,
            1.0 + 6.0 / 7.0 * 2.0,
            3.0 + 2.0 / 7.0 * -5.0,
            3.0 + 5.0 / 7.0 * -5.0,
            -2.0 + 1.0 / 7.0 * 6.0,
            -2.0 + 4.0 / 7.0 * 6.0,
            4.0,
        ];
        for (a, b) in out.leads[0].iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn pad_inserts_zeros_then_compresses() {
        let r = MultiLeadRecord::from_leads("r", vec![vec![2.0; 4], vec![1.0, 2.0, 3.0, 4.0]]).unwrap();
        let draw = WarpDraw { mode: WarpMode::Pad, start: 4, len: 2 };
        let out = apply_time_warp(&r, &draw).unwrap();
        // [1,2,3,4,0,0] sampled at 0, 5/3, 10/3, 5
        let expect = [1.0, 2.0 + 2.0 / 3.0, 4.0 - 4.0 / 3.0, 0.0];
        for (a, b) in out.leads[1].iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn warp_preserves_constants_and_length() {
        let r = MultiLeadRecord::from_leads("r", vec![vec![0.7; 33]; 3]).unwrap();
        for seed in 0..30 {
            let draw = sample_time_warp(33, 40.0, &mut RandomStream::new(seed)).unwrap();
            let out = apply_time_warp(&r, &draw).unwrap();
            assert!(out.leads.iter().all(|l| l.len() == 33));
            if draw.mode == WarpMode::Cut {
                assert!(out.leads.iter().flatten().all(|&v| v == 0.7));
            }
        }
    }

    #[test]
    fn warp_too_large() {
        let mut rng = RandomStream::new(0);
        assert!(matches!(sample_time_warp(10, 90.0, &mut rng), Err(AugmentError::TooShort { removed: 9, .. })));
        assert!(sample_time_warp(10, 80.0, &mut rng).is_ok());
    }

    #[test]
    fn smooth_three_taps_matches_convolution() {
        let r = MultiLeadRecord::from_leads("r", vec![vec![0.0, 0.0, 1.0, 0.0, 0.0]; 2]).unwrap();
        let out = apply_smooth(&r, 100.0, &SmoothDraw { len: 3 }).unwrap();
        // width 3: weights e^{-1/18}, 1, e^{-1/18} normalized
        let side = (-1.0f64 / 18.0).exp();
        let total = 1.0 + 2.0 * side;
        let expect = [0.0, side / total, 1.0 / total, side / total, 0.0];
        for (a, b) in out.leads[0].iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn smooth_identities() {
        let r = random_record(3, 2, 20);
        assert_eq!(apply_smooth(&r, 80.0, &SmoothDraw { len: 1 }).unwrap(), r);
        let c = MultiLeadRecord::from_leads("c", vec![vec![-3.1; 20]; 2]).unwrap();
        for len in 1..=5 {
            for gamma in [0.0, 13.0, 100.0] {
                assert_eq!(apply_smooth(&c, gamma, &SmoothDraw { len }).unwrap(), c);
            }
        }
    }

    #[test]
    fn kernel_sums_to_one() {
        for len in 1..=5 {
            let k = gaussian_kernel(len, 50.0);
            assert_eq!(k.len(), len);
            assert!((k.iter().map(|(_, w)| w).sum::<f64>() - 1.0).abs() < 1e-15);
        }
        assert_eq!(gaussian_kernel(4, 0.0), vec![(-2, 0.0), (-1, 0.0), (0, 1.0), (1, 0.0)]);
    }

    #[test]
    fn mask_window() {
        let r = random_record(5, 3, 100);
        let mut distinct_starts = false;
        for seed in 0..20 {
            let out = zero_mask(&r, 25.0, &mut RandomStream::new(seed)).unwrap();
            let mut firsts = Vec::new();
            for lead in 0..3 {
                let zeros: Vec<usize> = (0..100).filter(|&t| out.leads[lead][t] == 0.0).collect();
                assert_eq!(zeros.len(), 25);
                assert_eq!(zeros[24] - zeros[0], 24);
                for t in 0..100 {
                    let expect = if zeros.contains(&t) { 0.0 } else { r.leads[lead][t] };
                    assert_eq!(out.leads[lead][t], expect);
                }
                firsts.push(zeros[0]);
            }
            distinct_starts |= firsts.iter().any(|&f| f != firsts[0]);
        }
        assert!(distinct_starts);
        let full = zero_mask(&r, 100.0, &mut RandomStream::new(1)).unwrap();
        assert!(full.leads.iter().flatten().all(|&v| v == 0.0));
    }
}
