//! Wire messages. Every message is one JSON text frame tagged by `type`.

use serde::{Deserialize, Serialize};

use reprise_core::harness::{Method, Prop, TickOutput};
use reprise_core::sim::Workspace;

/// Client to server.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    /// Velocity command for the next tick.
    Command { v: Vec<f64> },
    /// Begin an interaction; the hint is stored as the record's label.
    Start { task_hint: Option<String> },
    End,
    SetMethod { name: Method },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Paused,
    Live,
    Retraining,
}

/// Server to client.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Frame {
        tick: usize,
        /// Robot state after the tick.
        state: Vec<f64>,
        a_h: Vec<f64>,
        a_r: Vec<f64>,
        beta: f64,
        bundle: u64,
    },
    Scene { workspace: Workspace<f64>, start: Vec<f64>, props: Vec<Prop> },
    Status {
        mode: Mode,
        method: Method,
        bundle: u64,
        /// Interactions stored so far.
        interactions: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        notice: Option<String>,
    },
}

impl ServerMessage {
    pub fn frame(t: &TickOutput) -> Self {
        ServerMessage::Frame {
            tick: t.tick,
            state: t.next_state.clone(),
            a_h: t.a_h.clone(),
            a_r: t.a_r.clone(),
            beta: t.beta,
            bundle: t.bundle_version,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

impl ClientMessage {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("client messages serialize")
    }
}
