//! Live teleoperation over WebSocket: a fixed-rate control loop around the
//! same controller the offline harness uses, with continual retraining
//! between interactions.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{ClientMessage, Mode, ServerMessage};
pub use server::{serve, spawn, Service};
pub use session::{Ended, Mailbox, Session, SessionConfig};
