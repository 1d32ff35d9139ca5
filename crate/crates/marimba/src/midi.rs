//! Standard MIDI File export: melodies render as one percussive note per
//! crossing. Format 0, 480 ticks per quarter, fixed tempo 120, so one
//! second is 960 ticks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::melody::Melody;

pub const TICKS_PER_QUARTER: u32 = 480;
pub const TEMPO_US_PER_QUARTER: u32 = 500_000; // 120 bpm
pub const TICKS_PER_SECOND: f64 = 960.0;

#[derive(Debug, Error)]
pub enum MidiError {
    #[error("melody label {0:?} has no key in the note map")]
    UnmappedLabel(String),
    #[error("key {key} for label {label:?} outside 0..=127")]
    KeyOutOfRange { label: String, key: u16 },
    #[error("time_scale must be positive and finite")]
    BadTimeScale,
}

/// How labels become MIDI events.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoteMap {
    /// Label to MIDI key number (0..=127).
    pub keys: BTreeMap<String, u8>,
    /// Seconds of audio per unit of hyperbolic length.
    pub time_scale: f64,
    pub velocity: u8,
    /// Note length in seconds.
    pub duration: f64,
}

impl Default for NoteMap {
    fn default() -> Self {
        NoteMap { keys: BTreeMap::new(), time_scale: 1.0, velocity: 100, duration: 0.1 }
    }
}

fn push_varlen(out: &mut Vec<u8>, mut v: u32) {
    let mut stack = [0u8; 4];
    let mut n = 0;
    loop {
        stack[n] = (v & 0x7f) as u8;
        v >>= 7;
        n += 1;
        if v == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(stack[i] | if i > 0 { 0x80 } else { 0 });
    }
}

/// Render a melody to SMF bytes. Note-on at round(t * time_scale * 960)
/// ticks, note-off after the map's duration. Deterministic for fixed
/// inputs; an empty melody still yields a valid file.
pub fn export_midi(m: &Melody, map: &NoteMap) -> Result<Vec<u8>, MidiError> {
    if !(map.time_scale > 0.0 && map.time_scale.is_finite()) {
        return Err(MidiError::BadTimeScale);
    }
    let off_delay = ((map.duration * TICKS_PER_SECOND).round() as u32).max(1);
    // (tick, off-before-on flag, key, on?) collected then delta-encoded.
    let mut events: Vec<(u32, u8, u8)> = Vec::with_capacity(2 * m.notes.len());
    for (label, t) in &m.notes {
        let key = *map
            .keys
            .get(label)
            .ok_or_else(|| MidiError::UnmappedLabel(label.clone()))?;
        let tick = (t * map.time_scale * TICKS_PER_SECOND).round() as u32;
        events.push((tick, 1, key));
        events.push((tick + off_delay, 0, key));
    }
    // Offs sort before ons at the same tick so re-struck keys stay sane.
    events.sort_by_key(|&(tick, on, key)| (tick, on, key));

    let mut track = Vec::new();
    // Tempo meta event at tick 0.
    track.extend_from_slice(&[0x00, 0xff, 0x51, 0x03]);
    track.extend_from_slice(&TEMPO_US_PER_QUARTER.to_be_bytes()[1..]);
    let mut cursor = 0u32;
    for (tick, on, key) in events {
        push_varlen(&mut track, tick - cursor);
        cursor = tick;
        if on == 1 {
            track.extend_from_slice(&[0x90, key, map.velocity]);
        } else {
            track.extend_from_slice(&[0x80, key, 0]);
        }
    }
    // End of track.
    track.extend_from_slice(&[0x00, 0xff, 0x2f, 0x00]);

    let mut out = Vec::with_capacity(track.len() + 22);
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes()); // format 0
    out.extend_from_slice(&1u16.to_be_bytes()); // one track
    out.extend_from_slice(&(TICKS_PER_QUARTER as u16).to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    Ok(out)
}

/// Minimal reader for round-trip checks: absolute ticks and keys of the
/// note-on events of a single-track file produced by [`export_midi`].
pub fn note_on_ticks(bytes: &[u8]) -> Option<Vec<(u32, u8)>> {
    if bytes.len() < 22 || &bytes[0..4] != b"MThd" || &bytes[14..18] != b"MTrk" {
        return None;
    }
    let mut p = 22;
    let mut tick = 0u32;
    let mut ons = Vec::new();
    while p < bytes.len() {
        // Variable-length delta.
        let mut delta = 0u32;
        loop {
            let b = *bytes.get(p)?;
            p += 1;
            delta = (delta << 7) | (b & 0x7f) as u32;
            if b & 0x80 == 0 {
                break;
            }
        }
        tick += delta;
        match *bytes.get(p)? {
            0xff => {
                let kind = *bytes.get(p + 1)?;
                let len = *bytes.get(p + 2)? as usize;
                p += 3 + len;
                if kind == 0x2f {
                    return Some(ons);
                }
            }
            0x90 => {
                ons.push((tick, *bytes.get(p + 1)?));
                p += 3;
            }
            0x80 => p += 3,
            _ => return None,
        }
    }
    Some(ons)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn melody() -> Melody {
        Melody {
            notes: vec![
                ("C4".into(), 0.5),
                ("E4".into(), 1.25),
                ("C4".into(), 1.25001),
                ("E4".into(), 3.0),
            ],
            horizon: 4.0,
            labels: BTreeSet::from(["C4".into(), "E4".into()]),
        }
    }

    fn map() -> NoteMap {
        let mut map = NoteMap::default();
        map.keys.insert("C4".into(), 60);
        map.keys.insert("E4".into(), 64);
        map
    }

    #[test]
    fn note_on_ticks_round_trip() {
        let bytes = export_midi(&melody(), &map()).unwrap();
        let ons = note_on_ticks(&bytes).unwrap();
        assert_eq!(ons.len(), 4);
        for ((tick, key), (label, t)) in ons.iter().zip(&melody().notes) {
            assert_eq!(*tick, (t * 960.0).round() as u32);
            assert_eq!(*key, if label == "C4" { 60 } else { 64 });
        }
        // Monotone note-on times.
        assert!(ons.windows(2).all(|w| w[0].0 <= w[1].0));
    }

    #[test]
    fn empty_melody_is_a_valid_file() {
        let m = Melody { notes: vec![], horizon: 1.0, labels: BTreeSet::new() };
        let bytes = export_midi(&m, &map()).unwrap();
        assert_eq!(note_on_ticks(&bytes), Some(vec![]));
    }

    #[test]
    fn deterministic_bytes_and_unmapped_labels() {
        let a = export_midi(&melody(), &map()).unwrap();
        let b = export_midi(&melody(), &map()).unwrap();
        assert_eq!(a, b);
        let empty_map = NoteMap::default();
        assert!(matches!(
            export_midi(&melody(), &empty_map),
            Err(MidiError::UnmappedLabel(_))
        ));
    }
}
