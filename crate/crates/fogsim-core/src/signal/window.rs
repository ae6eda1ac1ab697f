//! Window segmentation, labeling and channel selection.

use std::collections::BTreeMap;

use super::{ModalityBlock, ModalityKind, Recording, Window};
use crate::error::{Error, Result};

/// Tolerance for the window/stride boundary test, so that durations that are
/// an exact multiple of the stride in real arithmetic do not lose the last
/// window to floating-point rounding.
const BOUNDARY_EPS: f64 = 1e-9;

/// Number of windows of `window_length_s` at `stride_s` fitting a recording
/// of `duration_s`: windows start at `0, stride, 2*stride, ...` while
/// `start + window_length <= duration`.
pub fn window_count(duration_s: f64, window_length_s: f64, stride_s: f64) -> usize {
    if duration_s + BOUNDARY_EPS < window_length_s {
        return 0;
    }
    ((duration_s - window_length_s) / stride_s + BOUNDARY_EPS).floor() as usize + 1
}

/// Cut a recording into fixed-length windows. Labels stay unset until
/// [`assign_label`]. Each modality block spans exactly `window_length_s`
/// seconds at that modality's sample rate (`round(rate * length)` samples).
pub fn segment_windows(
    rec: &Recording,
    window_length_s: f64,
    stride_s: f64,
) -> Result<Vec<Window>> {
    if !(window_length_s > 0.0) || !(stride_s > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "window length and stride must be positive, got {window_length_s} and {stride_s}"
        )));
    }
    if window_length_s > rec.duration_s + BOUNDARY_EPS {
        return Err(Error::InvalidConfig(format!(
            "window of {window_length_s} s longer than recording of {} s",
            rec.duration_s
        )));
    }

    let count = window_count(rec.duration_s, window_length_s, stride_s);
    let mut windows = Vec::with_capacity(count);
    for i in 0..count {
        let start_s = i as f64 * stride_s;
        let mut blocks: BTreeMap<ModalityKind, ModalityBlock> = BTreeMap::new();
        for modality in ModalityKind::ALL {
            let streams: Vec<_> = rec.streams.iter().filter(|s| s.modality == modality).collect();
            if streams.is_empty() {
                continue;
            }
            let rate = streams[0].sample_rate_hz;
            let n = (rate * window_length_s).round() as usize;
            let first = (start_s * rate).round() as usize;
            let mut data = Vec::with_capacity(streams.len() * n);
            for s in &streams {
                // Clamp against the stream end; validation guarantees the
                // count matches the duration within one sample period.
                let first = first.min(s.samples.len().saturating_sub(n));
                data.extend_from_slice(&s.samples[first..first + n]);
            }
            blocks.insert(
                modality,
                ModalityBlock {
                    channels: streams.iter().map(|s| s.channel.clone()).collect(),
                    sample_rate_hz: rate,
                    data,
                    samples_per_channel: n,
                },
            );
        }
        windows.push(Window {
            subject_id: rec.subject_id.clone(),
            start_s,
            length_s: window_length_s,
            blocks,
            label: None,
            label_overlap_fraction: 0.0,
        });
    }
    Ok(windows)
}

/// Label a window by its overlap with the FoG intervals:
/// `fraction = |[start, start+len) ∩ intervals| / len`, label 1 iff the
/// fraction reaches `overlap_threshold`.
pub fn assign_label(mut w: Window, fog_intervals: &[(f64, f64)], overlap_threshold: f64) -> Window {
    let start = w.start_s;
    let end = w.start_s + w.length_s;
    let mut covered = 0.0;
    for &(a, b) in fog_intervals {
        let lo = a.max(start);
        let hi = b.min(end);
        if hi > lo {
            covered += hi - lo;
        }
    }
    let fraction = covered / w.length_s;
    w.label_overlap_fraction = fraction;
    w.label = Some(fraction >= overlap_threshold);
    w
}

/// Restrict a recording to the requested channels, in the order given.
/// Annotations and duration are unchanged.
pub fn select_channels(rec: &Recording, spec: &[(ModalityKind, String)]) -> Result<Recording> {
    let mut streams = Vec::with_capacity(spec.len());
    for (modality, channel) in spec {
        match rec.stream(*modality, channel) {
            Some(s) => streams.push(s.clone()),
            None => {
                return Err(Error::UnknownChannel(format!("{}/{}", modality, channel)));
            }
        }
    }
    Ok(Recording {
        subject_id: rec.subject_id.clone(),
        streams,
        fog_intervals: rec.fog_intervals.clone(),
        duration_s: rec.duration_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Stream;
    use proptest::prelude::*;

    fn recording(duration_s: f64, eeg_rate: f64) -> Recording {
        let n = (duration_s * eeg_rate).round() as usize;
        Recording::new(
            "s1",
            vec![
                Stream {
                    modality: ModalityKind::Eeg,
                    channel: "EEG_1".into(),
                    sample_rate_hz: eeg_rate,
                    samples: (0..n).map(|i| i as f64).collect(),
                },
                Stream {
                    modality: ModalityKind::Emg,
                    channel: "EMG_LT".into(),
                    sample_rate_hz: 2.0 * eeg_rate,
                    samples: vec![1.0; 2 * n],
                },
            ],
            vec![],
            duration_s,
        )
        .unwrap()
    }

    #[test]
    fn five_windows_over_ten_seconds() {
        let rec = recording(10.0, 100.0);
        let ws = segment_windows(&rec, 3.0, 1.5).unwrap();
        let starts: Vec<f64> = ws.iter().map(|w| w.start_s).collect();
        assert_eq!(starts, vec![0.0, 1.5, 3.0, 4.5, 6.0]);
    }

    #[test]
    fn exact_fit_yields_one_window() {
        let rec = recording(3.0, 100.0);
        let ws = segment_windows(&rec, 3.0, 0.7).unwrap();
        assert_eq!(ws.len(), 1);
        assert_eq!(ws[0].start_s, 0.0);
    }

    #[test]
    fn window_longer_than_recording_errors() {
        let rec = recording(2.0, 100.0);
        assert!(segment_windows(&rec, 3.0, 1.0).is_err());
    }

    #[test]
    fn blocks_span_window_at_modality_rate() {
        let rec = recording(10.0, 100.0);
        let ws = segment_windows(&rec, 3.0, 1.5).unwrap();
        let w = &ws[1]; // starts at 1.5 s
        let eeg = w.block(ModalityKind::Eeg).unwrap();
        assert_eq!(eeg.samples_per_channel, 300);
        assert_eq!(eeg.channel_row(0)[0], 150.0); // sample index 1.5 s * 100 Hz
        let emg = w.block(ModalityKind::Emg).unwrap();
        assert_eq!(emg.samples_per_channel, 600);
    }

    #[test]
    fn label_examples() {
        let rec = recording(10.0, 100.0);
        let ws = segment_windows(&rec, 3.0, 1.0).unwrap();

        // window [3,6), interval [5,9): overlap 1 s -> fraction 1/3 >= 0.25
        let w = assign_label(ws[3].clone(), &[(5.0, 9.0)], 0.25);
        assert!((w.label_overlap_fraction - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(w.label, Some(true));

        // window [0,3), no intervals -> fraction 0, label 0
        let w = assign_label(ws[0].clone(), &[], 0.25);
        assert_eq!(w.label_overlap_fraction, 0.0);
        assert_eq!(w.label, Some(false));

        // window [2,5), intervals [2.5,3.0) and [4.0,4.5): 0.5+0.5 seconds
        // -> fraction 1/3 < 0.5, label 0
        let w = assign_label(ws[2].clone(), &[(2.5, 3.0), (4.0, 4.5)], 0.5);
        assert!((w.label_overlap_fraction - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(w.label, Some(false));
    }

    #[test]
    fn select_full_set_is_identity() {
        let rec = recording(10.0, 100.0);
        let spec: Vec<_> = rec
            .streams
            .iter()
            .map(|s| (s.modality, s.channel.clone()))
            .collect();
        let out = select_channels(&rec, &spec).unwrap();
        assert_eq!(out, rec);
    }

    #[test]
    fn select_subset_preserves_spec_order() {
        let mut streams = Vec::new();
        for i in 1..=25 {
            streams.push(Stream {
                modality: ModalityKind::Eeg,
                channel: format!("EEG_{i}"),
                sample_rate_hz: 100.0,
                samples: vec![i as f64; 1000],
            });
        }
        let rec = Recording::new("s1", streams, vec![], 10.0).unwrap();
        let spec = vec![
            (ModalityKind::Eeg, "EEG_7".to_string()),
            (ModalityKind::Eeg, "EEG_2".to_string()),
            (ModalityKind::Eeg, "EEG_19".to_string()),
            (ModalityKind::Eeg, "EEG_1".to_string()),
        ];
        let out = select_channels(&rec, &spec).unwrap();
        let names: Vec<_> = out.streams.iter().map(|s| s.channel.as_str()).collect();
        assert_eq!(names, vec!["EEG_7", "EEG_2", "EEG_19", "EEG_1"]);
    }

    #[test]
    fn select_unknown_channel_names_it() {
        let rec = recording(10.0, 100.0);
        let err =
            select_channels(&rec, &[(ModalityKind::Eeg, "EEG_99".to_string())]).unwrap_err();
        assert!(err.to_string().contains("EEG_99"));
    }

    proptest! {
        #[test]
        fn count_formula_matches_enumeration(
            duration in 3.0f64..60.0,
            window in 0.5f64..3.0,
            stride in 0.1f64..2.0,
        ) {
            prop_assume!(duration >= window);
            let formula = window_count(duration, window, stride);
            // Independent enumeration of start times.
            let mut n = 0usize;
            loop {
                let t = n as f64 * stride;
                if t + window <= duration + 1e-9 {
                    n += 1;
                } else {
                    break;
                }
            }
            prop_assert_eq!(formula, n);
        }

        #[test]
        fn overlap_fraction_in_unit_range_and_monotone(
            start in 0.0f64..7.0,
            a in 0.0f64..10.0,
            len in 0.0f64..5.0,
        ) {
            let rec = recording(10.0, 100.0);
            let ws = segment_windows(&rec, 3.0, 10.0).unwrap();
            let mut w = ws[0].clone();
            w.start_s = start;
            let b = (a + len).min(10.0);
            let intervals = if b > a { vec![(a, b)] } else { vec![] };
            let low = assign_label(w.clone(), &intervals, 0.25);
            prop_assert!(low.label_overlap_fraction >= 0.0);
            prop_assert!(low.label_overlap_fraction <= 1.0 + 1e-12);
            // For a fixed threshold, the label is monotone in the fraction:
            // a higher threshold can only turn labels off.
            let high = assign_label(w, &intervals, 0.75);
            if high.label == Some(true) {
                prop_assert_eq!(low.label, Some(true));
            }
        }
    }
}
