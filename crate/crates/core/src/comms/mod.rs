//! In-vehicle data distribution: V2V message fields carried as
//! identifier-tagged 8-byte UDP packages, bridged one-to-one onto CAN frames,
//! and a seeded impaired channel standing in for the radio link.
//!
//! The byte-level contract is written down in `docs/wire-format.md`.

mod can;
mod channel;
mod codec;

use thiserror::Error;

pub use can::{can_to_udp, udp_to_can, CanFrame, CanMapping};
pub use channel::{Channel, ChannelParams, ChannelStats, Envelope};
pub use codec::{
    decode_v2v, encode_v2v, DecodeOutcome, DecodeStatus, FieldId, UdpPackage, V2VAssembler, V2VMessage, DATAGRAM_LEN,
    WIRE_FORMAT_VERSION,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CommsError {
    #[error("cannot encode {field}: {reason}")]
    Encoding { field: &'static str, reason: String },
    #[error("framing error: {0}")]
    Framing(String),
    #[error("unsupported wire format version {0}")]
    UnsupportedVersion(u64),
    #[error("decoded {field} out of range: {value}")]
    InvalidField { field: &'static str, value: f64 },
    #[error("UDP identifier {0:#04x} has no CAN mapping")]
    Unmapped(u8),
    #[error("CAN identifier {0:#05x} has no UDP mapping")]
    UnmappedCan(u16),
    #[error("invalid CAN frame: {0}")]
    InvalidFrame(String),
    #[error("invalid mapping table line {line}: {msg}")]
    Mapping { line: usize, msg: String },
}
