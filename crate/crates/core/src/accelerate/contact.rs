use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::demoset::read_json;
use crate::error::{Error, Result};
use crate::segment::PrecisionLabeling;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContactKind {
    Attach,
    Detach,
}

/// A change of contact state at frame `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub t: usize,
    #[serde(rename = "event")]
    pub kind: ContactKind,
}

pub fn contacts_file_name(i: usize) -> String {
    format!("contacts_{i}.json")
}

pub fn read_contacts_json(path: &Path) -> Result<Vec<ContactEvent>> {
    read_json(path)
}

/// Marks `window` frames on either side of every contact change as precision.
pub fn contact_labeling(
    trajectory: &str,
    events: &[ContactEvent],
    len: usize,
    window: usize,
) -> Result<PrecisionLabeling> {
    if let Some(e) = events.iter().find(|e| e.t == 0 || e.t > len) {
        return Err(Error::FrameOutOfRange { t: e.t, len });
    }
    Ok(PrecisionLabeling::from_inclusive_ranges(
        trajectory,
        len,
        events.iter().map(|e| (e.t.saturating_sub(window).max(1), e.t + window)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attach(t: usize) -> ContactEvent {
        ContactEvent {
            t,
            kind: ContactKind::Attach,
        }
    }

    #[test]
    fn single_event_window() {
        let lab = contact_labeling("x", &[attach(50)], 100, 10).unwrap();
        assert_eq!(lab.precision_runs(), std::slice::from_ref(&(40..61)));
    }

    #[test]
    fn overlapping_windows_merge() {
        let events = [attach(50), ContactEvent { t: 60, kind: ContactKind::Detach }];
        let lab = contact_labeling("x", &events, 100, 10).unwrap();
        assert_eq!(lab.precision_runs(), std::slice::from_ref(&(40..71)));
    }

    #[test]
    fn no_events_no_precision_and_clipping() {
        assert_eq!(contact_labeling("x", &[], 100, 10).unwrap().precision_count(), 0);
        let lab = contact_labeling("x", &[attach(2), attach(99)], 100, 5).unwrap();
        assert_eq!(lab.precision_runs(), &[1..8, 94..101]);
        assert!(contact_labeling("x", &[attach(101)], 100, 5).is_err());
    }

    #[test]
    fn json_shape() {
        let events: Vec<ContactEvent> =
            serde_json::from_str(r#"[{"t": 5, "event": "attach"}, {"t": 9, "event": "detach"}]"#).unwrap();
        assert_eq!(events[1].kind, ContactKind::Detach);
    }
}
