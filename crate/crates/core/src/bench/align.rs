use crate::estimators::EstimateRecord;
use crate::headpose::LandmarkSet;
use crate::session::{ClickEvent, SessionLog};

/// Clicks against 30 fps frames; a frame is always within half an interval.
pub const DEFAULT_ALIGN_WINDOW_US: i64 = 100_000;

/// Index of the element nearest to `t` within `window_us` in a sorted slice; ties pick the earlier.
pub fn nearest_within<R>(items: &[R], t: i64, window_us: i64, ts: impl Fn(&R) -> i64) -> Option<usize> {
    let idx = items.partition_point(|r| ts(r) < t);
    [idx.checked_sub(1), Some(idx)]
        .into_iter()
        .flatten()
        .filter(|&i| i < items.len())
        .map(|i| ((ts(&items[i]) - t).abs(), i))
        .filter(|(dt, _)| *dt <= window_us)
        .min_by_key(|(dt, _)| *dt)
        .map(|(_, i)| i)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchedSample<'a> {
    pub click: ClickEvent<f64>,
    pub landmarks: &'a LandmarkSet<f64>,
    /// Nearest record per estimate stream, in the log's stream order.
    pub estimates: Vec<Option<&'a EstimateRecord<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment<'a> {
    pub matched: Vec<MatchedSample<'a>>,
    pub dropped: usize,
    pub total: usize,
    pub diagnostics: Vec<String>,
}

/// Pairs every click with the nearest landmark frame and the nearest record of
/// each estimate stream. Clicks without a landmark frame in the window are dropped.
pub fn align_to_clicks(log: &SessionLog<f64>, window_us: i64) -> Alignment<'_> {
    let mut out = Alignment { matched: vec![], dropped: 0, total: log.clicks.len(), diagnostics: vec![] };
    if log.landmarks.is_empty() {
        out.diagnostics.push("landmark stream is empty".into());
    }
    if log.clicks.is_empty() {
        out.diagnostics.push("no click events".into());
    }
    for click in &log.clicks {
        let Some(li) = nearest_within(&log.landmarks, click.timestamp_us, window_us, |l| l.timestamp_us) else {
            out.dropped += 1;
            out.diagnostics.push(format!("click at {} us has no landmark frame within {} us", click.timestamp_us, window_us));
            continue;
        };
        let estimates = log
            .estimates
            .iter()
            .map(|s| nearest_within(&s.records, click.timestamp_us, window_us, |r| r.timestamp_us).map(|i| &s.records[i]))
            .collect();
        out.matched.push(MatchedSample { click: *click, landmarks: &log.landmarks[li], estimates });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::headpose::FaceModel3D;
    use crate::synthlab::{default_camera, default_screen, generate_session, SceneConfig};
    use nalgebra::Point2;

    fn log() -> SessionLog<f64> {
        generate_session(&SceneConfig { n_samples: 10, ..Default::default() }, &FaceModel3D::default(), &default_camera(), &default_screen())
            .unwrap()
            .0
    }

    #[test]
    fn synthetic_clicks_all_match_their_frames() {
        let log = log();
        let a = align_to_clicks(&log, DEFAULT_ALIGN_WINDOW_US);
        assert_eq!((a.dropped, a.matched.len(), a.total), (0, 10, 10));
        for m in &a.matched {
            assert_eq!(m.landmarks.timestamp_us, m.click.timestamp_us);
            assert!(m.estimates.iter().all(|e| e.unwrap().timestamp_us == m.click.timestamp_us));
        }
    }

    #[test]
    fn window_rule_for_clicks() {
        let mut log = log();
        log.landmarks.truncate(1);
        log.clicks = vec![ClickEvent { timestamp_us: log.landmarks[0].timestamp_us + 40_000, target_px: Point2::new(1.0, 1.0) }];
        assert_eq!(align_to_clicks(&log, 100_000).matched.len(), 1);
        let a = align_to_clicks(&log, 30_000);
        assert_eq!((a.matched.len(), a.dropped), (0, 1));
        assert_eq!(a.matched.len() + a.dropped, a.total);
    }

    #[test]
    fn empty_streams_give_empty_result_with_diagnostics() {
        let mut log = log();
        log.landmarks.clear();
        let a = align_to_clicks(&log, 100_000);
        assert!(a.matched.is_empty());
        assert_eq!(a.dropped, 10);
        assert!(!a.diagnostics.is_empty());
    }

    #[test]
    fn nearest_prefers_earlier_on_tie() {
        let ts = [0i64, 10, 20];
        assert_eq!(nearest_within(&ts, 5, 100, |t| *t), Some(0));
        assert_eq!(nearest_within(&ts, 16, 100, |t| *t), Some(2));
        assert_eq!(nearest_within(&ts, 500, 100, |t| *t), None);
    }
}
