//! Line protocol for pulley angle commands, plus a servo emulator that
//! speaks it over TCP.

// Validation negates comparisons so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod client;
pub mod clock;
pub mod controller;
pub mod frame;
pub mod server;
pub mod servo;

pub use client::{ActuatorClient, ClientError};
pub use clock::{Clock, ManualClock, SystemClock};
pub use controller::ServoController;
pub use frame::{decode, decode_reply, encode, encode_reply, CommandFrame, EncodeError, ParseError, ParseErrorKind, Reply};
pub use server::{serve, ServerHandle, Snapshot};
pub use servo::{ServoBank, ServoError, ServoState};
