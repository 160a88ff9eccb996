use std::collections::BTreeMap;

use super::CommsError;

/// Version carried in the `Version` package.
pub const WIRE_FORMAT_VERSION: u64 = 1;

/// Datagram size on the wire: identifier byte followed by the payload.
pub const DATAGRAM_LEN: usize = 9;

/// Identifier byte of each UDP package.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum FieldId {
    Version = 0x00,
    Acceleration = 0x01,
    Latitude = 0x02,
    Longitude = 0x03,
    Heading = 0x04,
    LidarSummary = 0x05,
    Timestamp = 0x06,
    SenderId = 0x07,
}

impl FieldId {
    pub const ALL: [FieldId; 8] = [
        FieldId::Version,
        FieldId::Acceleration,
        FieldId::Latitude,
        FieldId::Longitude,
        FieldId::Heading,
        FieldId::LidarSummary,
        FieldId::Timestamp,
        FieldId::SenderId,
    ];

    /// Fields a message cannot be complete without.
    pub const MANDATORY: [FieldId; 3] = [FieldId::Acceleration, FieldId::Latitude, FieldId::Longitude];

    pub fn from_u8(id: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|f| *f as u8 == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct UdpPackage {
    pub id: u8,
    pub payload: [u8; 8],
}

impl UdpPackage {
    pub fn from_f64(id: FieldId, value: f64) -> Self {
        UdpPackage { id: id as u8, payload: value.to_le_bytes() }
    }

    pub fn from_u64(id: FieldId, value: u64) -> Self {
        UdpPackage { id: id as u8, payload: value.to_le_bytes() }
    }

    pub fn as_f64(&self) -> f64 {
        f64::from_le_bytes(self.payload)
    }

    pub fn as_u64(&self) -> u64 {
        u64::from_le_bytes(self.payload)
    }

    pub fn to_datagram(&self) -> [u8; DATAGRAM_LEN] {
        let mut out = [0u8; DATAGRAM_LEN];
        out[0] = self.id;
        out[1..].copy_from_slice(&self.payload);
        out
    }

    pub fn from_datagram(bytes: &[u8]) -> Result<Self, CommsError> {
        if bytes.len() != DATAGRAM_LEN {
            return Err(CommsError::Framing(format!("datagram is {} bytes, expected {DATAGRAM_LEN}", bytes.len())));
        }
        let mut payload = [0u8; 8];
        payload.copy_from_slice(&bytes[1..]);
        Ok(UdpPackage { id: bytes[0], payload })
    }
}

/// Lead-vehicle broadcast.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct V2VMessage {
    /// m/s^2
    pub acceleration: f64,
    /// degrees
    pub latitude: f64,
    /// degrees
    pub longitude: f64,
    /// Send time (s).
    pub timestamp: f64,
    pub sender: u64,
}

impl V2VMessage {
    fn check(&self) -> Result<(), CommsError> {
        let enc = |field, reason: &str| Err(CommsError::Encoding { field, reason: reason.to_string() });
        if !self.acceleration.is_finite() {
            return enc("acceleration", "not finite");
        }
        if !self.timestamp.is_finite() {
            return enc("timestamp", "not finite");
        }
        if !(self.latitude.abs() <= 90.0) {
            return enc("latitude", "outside [-90, 90]");
        }
        if !(self.longitude.abs() <= 180.0) {
            return enc("longitude", "outside [-180, 180]");
        }
        Ok(())
    }
}

/// One package per field, version first.
pub fn encode_v2v(msg: &V2VMessage) -> Result<Vec<UdpPackage>, CommsError> {
    msg.check()?;
    Ok(vec![
        UdpPackage::from_u64(FieldId::Version, WIRE_FORMAT_VERSION),
        UdpPackage::from_f64(FieldId::Acceleration, msg.acceleration),
        UdpPackage::from_f64(FieldId::Latitude, msg.latitude),
        UdpPackage::from_f64(FieldId::Longitude, msg.longitude),
        UdpPackage::from_f64(FieldId::Timestamp, msg.timestamp),
        UdpPackage::from_u64(FieldId::SenderId, msg.sender),
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecodeStatus {
    Complete(V2VMessage),
    Incomplete { missing: Vec<FieldId> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    pub status: DecodeStatus,
    /// Packages whose identifier is not part of the V2V message.
    pub unknown: usize,
}

impl DecodeOutcome {
    pub fn message(&self) -> Option<&V2VMessage> {
        match &self.status {
            DecodeStatus::Complete(m) => Some(m),
            DecodeStatus::Incomplete { .. } => None,
        }
    }
}

/// Streaming reassembly: latest value per identifier wins.
#[derive(Debug, Clone, Default)]
pub struct V2VAssembler {
    fields: BTreeMap<FieldId, UdpPackage>,
    unknown: usize,
}

impl V2VAssembler {
    pub fn push(&mut self, pkg: UdpPackage) -> Result<(), CommsError> {
        match FieldId::from_u8(pkg.id) {
            Some(FieldId::Version) => {
                let v = pkg.as_u64();
                if v != WIRE_FORMAT_VERSION {
                    return Err(CommsError::UnsupportedVersion(v));
                }
            }
            Some(FieldId::Heading) | Some(FieldId::LidarSummary) | None => self.unknown += 1,
            Some(id) => {
                self.fields.insert(id, pkg);
            }
        }
        Ok(())
    }

    pub fn outcome(&self) -> Result<DecodeOutcome, CommsError> {
        let missing: Vec<FieldId> = FieldId::MANDATORY.into_iter().filter(|f| !self.fields.contains_key(f)).collect();
        if !missing.is_empty() {
            return Ok(DecodeOutcome { status: DecodeStatus::Incomplete { missing }, unknown: self.unknown });
        }
        let f = |id| self.fields.get(&id).map(UdpPackage::as_f64);
        let msg = V2VMessage {
            acceleration: f(FieldId::Acceleration).unwrap_or_default(),
            latitude: f(FieldId::Latitude).unwrap_or_default(),
            longitude: f(FieldId::Longitude).unwrap_or_default(),
            timestamp: f(FieldId::Timestamp).unwrap_or_default(),
            sender: self.fields.get(&FieldId::SenderId).map_or(0, UdpPackage::as_u64),
        };
        if !(msg.latitude.abs() <= 90.0) {
            return Err(CommsError::InvalidField { field: "latitude", value: msg.latitude });
        }
        if !(msg.longitude.abs() <= 180.0) {
            return Err(CommsError::InvalidField { field: "longitude", value: msg.longitude });
        }
        Ok(DecodeOutcome { status: DecodeStatus::Complete(msg), unknown: self.unknown })
    }
}

pub fn decode_v2v(packages: &[UdpPackage]) -> Result<DecodeOutcome, CommsError> {
    let mut asm = V2VAssembler::default();
    for p in packages {
        asm.push(*p)?;
    }
    asm.outcome()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg() -> V2VMessage {
        V2VMessage { acceleration: 1.0, latitude: 40.0, longitude: 29.1, timestamp: 12.34, sender: 7 }
    }

    #[test]
    fn round_trip() {
        let out = decode_v2v(&encode_v2v(&msg()).unwrap()).unwrap();
        assert_eq!(out.message(), Some(&msg()));
        assert_eq!(out.unknown, 0);
    }

    #[test]
    fn reference_bytes() {
        let zero = UdpPackage::from_f64(FieldId::Acceleration, 0.0);
        assert_eq!(zero.payload, [0u8; 8]);
        let pk = encode_v2v(&msg()).unwrap();
        assert_eq!(pk[1].id, 0x01);
        assert_eq!(pk[1].payload, [0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0xF0, 0x3F]);
        assert_eq!(pk[0].to_datagram(), [0x00, 0x01, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn missing_longitude_incomplete() {
        let pk: Vec<_> = encode_v2v(&msg()).unwrap().into_iter().filter(|p| p.id != FieldId::Longitude as u8).collect();
        let out = decode_v2v(&pk).unwrap();
        assert_eq!(out.status, DecodeStatus::Incomplete { missing: vec![FieldId::Longitude] });
    }

    #[test]
    fn latest_value_wins() {
        let mut pk = encode_v2v(&msg()).unwrap();
        pk.push(UdpPackage::from_f64(FieldId::Acceleration, -2.5));
        assert_eq!(decode_v2v(&pk).unwrap().message().unwrap().acceleration, -2.5);
    }

    #[test]
    fn unknown_ids_counted() {
        let mut pk = encode_v2v(&msg()).unwrap();
        pk.push(UdpPackage { id: 0xEE, payload: [1; 8] });
        pk.push(UdpPackage::from_f64(FieldId::Heading, 0.3));
        let out = decode_v2v(&pk).unwrap();
        assert_eq!(out.unknown, 2);
        assert!(out.message().is_some());
    }

    #[test]
    fn out_of_range_rejected() {
        let bad = V2VMessage { latitude: 91.0, ..msg() };
        assert!(matches!(encode_v2v(&bad), Err(CommsError::Encoding { field: "latitude", .. })));
        let bad = V2VMessage { acceleration: f64::NAN, ..msg() };
        assert!(encode_v2v(&bad).is_err());
    }

    #[test]
    fn framing_and_version() {
        assert!(matches!(UdpPackage::from_datagram(&[1, 2, 3]), Err(CommsError::Framing(_))));
        let d = UdpPackage::from_f64(FieldId::Latitude, 41.5).to_datagram();
        assert_eq!(UdpPackage::from_datagram(&d).unwrap().as_f64(), 41.5);
        let v2 = UdpPackage::from_u64(FieldId::Version, 2);
        assert_eq!(decode_v2v(&[v2]), Err(CommsError::UnsupportedVersion(2)));
    }
}
