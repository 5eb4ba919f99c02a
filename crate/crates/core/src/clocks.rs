//! Time-event sets and the clock functions they induce.
//!
//! A [`TimeEventSet`] is a finite disjoint union of single instants and
//! closed intervals inside the model's time window. The induced
//! [`ClockFunction`] maps a query time `t` to the next event at-or-after `t`
//! (`+inf` when none remains). Arrival times are derived from an ongoing
//! clock: the next ongoing event, collapsed to its left endpoint when it is
//! an interval.

use serde::{Deserialize, Serialize};

use crate::error::ValidationError;
use crate::time::{time_le, Time};

/// A finite set of discrete instants and closed intervals, normalized:
/// sorted ascending, deduplicated, pairwise disjoint.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimeEventSet {
    #[serde(default)]
    pub points: Vec<Time>,
    #[serde(default)]
    pub intervals: Vec<(Time, Time)>,
}

/// A single event or the fragment of one returned by range queries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventRef {
    Point(Time),
    Interval(Time, Time),
}

impl EventRef {
    /// Left end of the event.
    pub fn start(&self) -> Time {
        match *self {
            EventRef::Point(t) => t,
            EventRef::Interval(a, _) => a,
        }
    }

    /// Right end of the event (equal to the start for points).
    pub fn end(&self) -> Time {
        match *self {
            EventRef::Point(t) => t,
            EventRef::Interval(_, b) => b,
        }
    }
}

/// Validates and normalizes a raw collection of points and intervals.
///
/// Normalization sorts both lists, merges duplicate points, and folds points
/// that touch an interval into that interval (logged as a warning: the
/// ambiguous "instant on the edge of a continuum" case is resolved toward
/// the continuous reading). Errors are reported for degenerate intervals,
/// events outside `[t_start, t_end]`, points strictly inside intervals, and
/// intersecting intervals.
pub fn validate_event_set(
    points: &[Time],
    intervals: &[(Time, Time)],
    t_start: Time,
    t_end: Time,
    eps: f64,
) -> Result<TimeEventSet, ValidationError> {
    for &(a, b) in intervals {
        if !a.is_finite() || !b.is_finite() || a >= b - eps {
            return Err(ValidationError::DegenerateInterval { start: a, end: b });
        }
    }
    let in_range = |t: Time| time_le(t_start, t, eps) && time_le(t, t_end, eps);
    for &p in points {
        if !p.is_finite() || !in_range(p) {
            return Err(ValidationError::OutOfRange { time: p, t_start, t_end });
        }
    }
    for &(a, b) in intervals {
        if !in_range(a) || !in_range(b) {
            return Err(ValidationError::OutOfRange {
                time: if in_range(a) { b } else { a },
                t_start,
                t_end,
            });
        }
    }

    let mut ivs: Vec<(Time, Time)> = intervals.to_vec();
    ivs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    for w in ivs.windows(2) {
        let (_, b0) = w[0];
        let (a1, _) = w[1];
        if a1 <= b0 + eps {
            return Err(ValidationError::Overlap {
                detail: format!("intervals [{}, {}] and [{}, {}] intersect", w[0].0, b0, a1, w[1].1),
            });
        }
    }

    let mut pts: Vec<Time> = points.to_vec();
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup_by(|a, b| (*a - *b).abs() <= eps);

    let mut kept = Vec::with_capacity(pts.len());
    for p in pts {
        let mut touching = false;
        for &(a, b) in &ivs {
            if p > a + eps && p < b - eps {
                return Err(ValidationError::Overlap {
                    detail: format!("point {p} lies inside interval [{a}, {b}]"),
                });
            }
            if (p - a).abs() <= eps || (p - b).abs() <= eps {
                log::warn!("event set: point {p} touches interval [{a}, {b}]; merged into the interval");
                touching = true;
                break;
            }
        }
        if !touching {
            kept.push(p);
        }
    }

    Ok(TimeEventSet { points: kept, intervals: ivs })
}

impl TimeEventSet {
    /// Set with no events.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty() && self.intervals.is_empty()
    }

    /// Smallest event time, if any.
    pub fn min(&self) -> Option<Time> {
        let p = self.points.first().copied();
        let i = self.intervals.first().map(|&(a, _)| a);
        match (p, i) {
            (Some(p), Some(i)) => Some(p.min(i)),
            (Some(p), None) => Some(p),
            (None, Some(i)) => Some(i),
            (None, None) => None,
        }
    }

    /// Largest event time, if any.
    pub fn max(&self) -> Option<Time> {
        let p = self.points.last().copied();
        let i = self.intervals.last().map(|&(_, b)| b);
        match (p, i) {
            (Some(p), Some(i)) => Some(p.max(i)),
            (Some(p), None) => Some(p),
            (None, Some(i)) => Some(i),
            (None, None) => None,
        }
    }

    /// Whether `t` belongs to the set (a point or inside an interval), up to `eps`.
    pub fn contains(&self, t: Time, eps: f64) -> bool {
        self.points.iter().any(|&p| (p - t).abs() <= eps)
            || self.intervals.iter().any(|&(a, b)| t >= a - eps && t <= b + eps)
    }

    /// All events intersecting `[a, b]`, in order; intervals are clipped to
    /// the query range.
    pub fn events_between(&self, a: Time, b: Time, eps: f64) -> Vec<EventRef> {
        let mut out = Vec::new();
        for &p in &self.points {
            if p >= a - eps && p <= b + eps {
                out.push(EventRef::Point(p));
            }
        }
        for &(lo, hi) in &self.intervals {
            if hi >= a - eps && lo <= b + eps {
                out.push(EventRef::Interval(lo.max(a), hi.min(b)));
            }
        }
        out.sort_by(|x, y| x.start().partial_cmp(&y.start()).unwrap());
        out
    }
}

/// The next-event-at-or-after map induced by a [`TimeEventSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockFunction {
    pub events: TimeEventSet,
}

impl ClockFunction {
    pub fn new(events: TimeEventSet) -> Self {
        Self { events }
    }

    /// Next event time at-or-after `t`: a point, the left endpoint of an
    /// interval `t` precedes, or `t` itself when `t` lies inside an
    /// interval. `+inf` when no event remains.
    pub fn eval(&self, t: Time, eps: f64) -> Time {
        let mut best = f64::INFINITY;
        for &p in &self.events.points {
            if p >= t - eps {
                best = best.min(p);
                break; // sorted: the first admissible point is the smallest
            }
        }
        for &(a, b) in &self.events.intervals {
            if b >= t - eps {
                best = best.min(if t >= a { t } else { a });
                break;
            }
        }
        best
    }

    /// The event attaining [`ClockFunction::eval`] at `t`, if any.
    pub fn next_event(&self, t: Time, eps: f64) -> Option<EventRef> {
        let v = self.eval(t, eps);
        if v.is_infinite() {
            return None;
        }
        // Prefer the interval when both an interval and a point attain the
        // minimum; normalization makes that case impossible anyway.
        for &(a, b) in &self.events.intervals {
            if b >= t - eps && (if t >= a { t } else { a }) <= v + eps {
                return Some(EventRef::Interval(a, b));
            }
        }
        for &p in &self.events.points {
            if p >= t - eps && p <= v + eps {
                return Some(EventRef::Point(p));
            }
        }
        None
    }
}

/// Arrival time derived from an ongoing clock: the next ongoing event
/// collapsed to its left endpoint.
///
/// Returns the event time itself for a discrete ongoing event, the left
/// endpoint when the next ongoing event is an interval (even when `t` lies
/// inside it), and `+inf` when the interaction never occurs at-or-after `t`.
pub fn arrival_from_ongoing(ongoing: &ClockFunction, t: Time, eps: f64) -> Time {
    match ongoing.next_event(t, eps) {
        None => f64::INFINITY,
        Some(EventRef::Point(p)) => p,
        Some(EventRef::Interval(a, _)) => a,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::DEFAULT_EPS;

    const EPS: f64 = DEFAULT_EPS;

    fn set(points: &[f64], intervals: &[(f64, f64)]) -> TimeEventSet {
        validate_event_set(points, intervals, 0.0, 100.0, EPS).unwrap()
    }

    #[test]
    fn finite_near_accumulation_family_is_valid() {
        // {1 - 1/n, 1 + 1/n : n = 1..5} together with {1}: finite, so no
        // accumulation ambiguity can arise.
        let mut pts = vec![1.0];
        for n in 1..=5 {
            pts.push(1.0 - 1.0 / n as f64);
            pts.push(1.0 + 1.0 / n as f64);
        }
        let s = set(&pts, &[]);
        assert_eq!(s.points.len(), 11);
        assert!(s.intervals.is_empty());
    }

    #[test]
    fn overlapping_intervals_rejected() {
        let err = validate_event_set(&[], &[(0.0, 1.0), (0.5, 2.0)], 0.0, 10.0, EPS).unwrap_err();
        assert!(matches!(err, ValidationError::Overlap { .. }));
    }

    #[test]
    fn point_inside_interval_rejected() {
        let err = validate_event_set(&[0.5], &[(0.0, 1.0)], 0.0, 10.0, EPS).unwrap_err();
        assert!(matches!(err, ValidationError::Overlap { .. }));
    }

    #[test]
    fn touching_point_merges_into_interval() {
        let s = set(&[1.0], &[(1.0, 2.0)]);
        assert!(s.points.is_empty());
        assert_eq!(s.intervals, vec![(1.0, 2.0)]);
    }

    #[test]
    fn degenerate_interval_rejected() {
        let err = validate_event_set(&[], &[(2.0, 2.0)], 0.0, 10.0, EPS).unwrap_err();
        assert!(matches!(err, ValidationError::DegenerateInterval { .. }));
    }

    #[test]
    fn out_of_range_rejected() {
        let err = validate_event_set(&[11.0], &[], 0.0, 10.0, EPS).unwrap_err();
        assert!(matches!(err, ValidationError::OutOfRange { .. }));
    }

    #[test]
    fn single_point_clock() {
        // T = {t_st}: eval(t_st) = t_st, eval(t) = +inf for t > t_st.
        let c = ClockFunction::new(set(&[0.0], &[]));
        assert_eq!(c.eval(0.0, EPS), 0.0);
        assert_eq!(c.eval(0.1, EPS), f64::INFINITY);
    }

    #[test]
    fn full_interval_clock_is_identity() {
        // T = [t_st, t_end]: eval(t) = t everywhere.
        let c = ClockFunction::new(set(&[], &[(0.0, 100.0)]));
        for t in [0.0, 0.5, 42.0, 100.0] {
            assert_eq!(c.eval(t, EPS), t);
        }
    }

    #[test]
    fn next_point_semantics() {
        let c = ClockFunction::new(set(&[3.0], &[]));
        assert_eq!(c.eval(1.0, EPS), 3.0);
        assert_eq!(c.eval(3.0, EPS), 3.0);
    }

    #[test]
    fn arrival_collapses_interval_to_left_endpoint() {
        // Ongoing events {1} ∪ [1, 2] normalize to [1, 2]; the arrival is 1
        // throughout [0, 2].
        let c = ClockFunction::new(set(&[1.0], &[(1.0, 2.0)]));
        for k in 0..=100 {
            let t = 2.0 * k as f64 / 100.0;
            assert_eq!(arrival_from_ongoing(&c, t, EPS), 1.0, "t = {t}");
        }
    }

    #[test]
    fn arrival_of_full_interval_is_window_start() {
        let c = ClockFunction::new(set(&[], &[(0.0, 100.0)]));
        for t in [0.0, 17.0, 99.9] {
            assert_eq!(arrival_from_ongoing(&c, t, EPS), 0.0);
        }
    }

    #[test]
    fn arrival_of_empty_set_is_never() {
        let c = ClockFunction::new(TimeEventSet::empty());
        assert_eq!(arrival_from_ongoing(&c, 0.0, EPS), f64::INFINITY);
    }

    #[test]
    fn events_between_queries() {
        let s = set(&[1.0, 2.0, 5.0], &[]);
        assert_eq!(s.events_between(1.5, 4.0, EPS), vec![EventRef::Point(2.0)]);

        let s = set(&[], &[(0.0, 10.0)]);
        assert_eq!(s.events_between(2.0, 3.0, EPS), vec![EventRef::Interval(2.0, 3.0)]);

        assert!(TimeEventSet::empty().events_between(0.0, 1.0, EPS).is_empty());
    }
}
