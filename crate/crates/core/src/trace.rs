//! Optional per-event log shared by all protocol modules.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    SourceTx,
    RelayTx,
    Delivered,
    Deferred,
    HandshakeIdle,
    Split,
    SegmentHop,
    Reassembled,
    Gated,
    Overheard,
    Purged,
    OwnTx,
    Fallback,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Action::SourceTx => "source_tx",
            Action::RelayTx => "relay_tx",
            Action::Delivered => "delivered",
            Action::Deferred => "deferred",
            Action::HandshakeIdle => "handshake_idle",
            Action::Split => "split",
            Action::SegmentHop => "segment_hop",
            Action::Reassembled => "reassembled",
            Action::Gated => "gated",
            Action::Overheard => "overheard",
            Action::Purged => "purged",
            Action::OwnTx => "own_tx",
            Action::Fallback => "fallback",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub slot: u64,
    /// Cell index on the grid the acting node is scheduled on.
    pub cell: (usize, usize),
    pub action: Action,
    pub sn: u64,
    pub src: u32,
    pub dst: u32,
    /// Secondary subframe role or mobility class, when relevant.
    pub role: Option<&'static str>,
}

impl TraceEvent {
    pub fn csv_header() -> &'static str {
        "slot,cell,action,sn,src,dst,role"
    }

    pub fn csv(&self) -> String {
        format!(
            "{},{}:{},{},{},{},{},{}",
            self.slot,
            self.cell.0,
            self.cell.1,
            self.action,
            self.sn,
            self.src,
            self.dst,
            self.role.unwrap_or("")
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct Trace {
    enabled: bool,
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new(enabled: bool) -> Self {
        Self {
            enabled,
            events: Vec::new(),
        }
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    #[inline]
    pub fn push(&mut self, ev: impl FnOnce() -> TraceEvent) {
        if self.enabled {
            self.events.push(ev());
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(TraceEvent::csv_header());
        s.push('\n');
        for e in &self.events {
            s.push_str(&e.csv());
            s.push('\n');
        }
        s
    }
}
