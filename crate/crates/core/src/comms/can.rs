use std::collections::BTreeMap;

use super::{CommsError, FieldId, UdpPackage};

/// Classic CAN 2.0A data frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CanFrame {
    id: u16,
    dlc: u8,
    data: [u8; 8],
}

impl CanFrame {
    pub const MAX_ID: u16 = 0x7FF;

    pub fn new(id: u16, data: &[u8]) -> Result<Self, CommsError> {
        if id > Self::MAX_ID {
            return Err(CommsError::InvalidFrame(format!("identifier {id:#x} exceeds 11 bits")));
        }
        if data.len() > 8 {
            return Err(CommsError::InvalidFrame(format!("{} data bytes, at most 8", data.len())));
        }
        let mut buf = [0u8; 8];
        buf[..data.len()].copy_from_slice(data);
        Ok(CanFrame { id, dlc: data.len() as u8, data: buf })
    }

    pub fn id(&self) -> u16 {
        self.id
    }

    pub fn dlc(&self) -> u8 {
        self.dlc
    }

    pub fn data(&self) -> &[u8] {
        &self.data[..self.dlc as usize]
    }
}

/// One-to-one UDP identifier to CAN identifier table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanMapping {
    forward: BTreeMap<u8, u16>,
    reverse: BTreeMap<u16, u8>,
}

impl Default for CanMapping {
    /// Every known field identifier `n` maps to CAN `0x100 + n`.
    fn default() -> Self {
        let pairs = FieldId::ALL.iter().map(|f| (*f as u8, 0x100 + *f as u16));
        Self::from_pairs(pairs).expect("default table is one-to-one")
    }
}

fn parse_int(tok: &str) -> Option<u64> {
    let tok = tok.trim();
    match tok.strip_prefix("0x").or_else(|| tok.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16).ok(),
        None => tok.parse().ok(),
    }
}

impl CanMapping {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u8, u16)>) -> Result<Self, CommsError> {
        let mut m = CanMapping { forward: BTreeMap::new(), reverse: BTreeMap::new() };
        for (i, (udp, can)) in pairs.into_iter().enumerate() {
            m.insert(udp, can, i + 1)?;
        }
        Ok(m)
    }

    fn insert(&mut self, udp: u8, can: u16, line: usize) -> Result<(), CommsError> {
        if can > CanFrame::MAX_ID {
            return Err(CommsError::Mapping { line, msg: format!("CAN id {can:#x} exceeds 11 bits") });
        }
        if self.forward.contains_key(&udp) || self.reverse.contains_key(&can) {
            return Err(CommsError::Mapping { line, msg: format!("duplicate entry {udp:#x} -> {can:#x}") });
        }
        self.forward.insert(udp, can);
        self.reverse.insert(can, udp);
        Ok(())
    }

    /// Parses `udp_id, can_id` lines; decimal or `0x` hex; `#` comments.
    pub fn parse(text: &str) -> Result<Self, CommsError> {
        let mut m = CanMapping { forward: BTreeMap::new(), reverse: BTreeMap::new() };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| CommsError::Mapping { line: i + 1, msg: msg.to_string() };
            let (a, b) = line.split_once(',').ok_or_else(|| bad("expected `udp_id, can_id`"))?;
            let udp = parse_int(a).filter(|v| *v <= 0xFF).ok_or_else(|| bad("udp_id must be 0..=255"))?;
            let can = parse_int(b).filter(|v| *v <= 0xFFFF).ok_or_else(|| bad("bad can_id"))?;
            m.insert(udp as u8, can as u16, i + 1)?;
        }
        Ok(m)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# udp_id, can_id\n");
        for (u, c) in &self.forward {
            s.push_str(&format!("{u:#04x}, {c:#05x}\n"));
        }
        s
    }

    pub fn can_id(&self, udp: u8) -> Option<u16> {
        self.forward.get(&udp).copied()
    }

    pub fn udp_id(&self, can: u16) -> Option<u8> {
        self.reverse.get(&can).copied()
    }
}

/// Bridges a package onto CAN: mapped identifier, DLC 8, payload verbatim.
pub fn udp_to_can(pkg: &UdpPackage, mapping: &CanMapping) -> Result<CanFrame, CommsError> {
    let id = mapping.can_id(pkg.id).ok_or(CommsError::Unmapped(pkg.id))?;
    CanFrame::new(id, &pkg.payload)
}

pub fn can_to_udp(frame: &CanFrame, mapping: &CanMapping) -> Result<UdpPackage, CommsError> {
    let id = mapping.udp_id(frame.id()).ok_or(CommsError::UnmappedCan(frame.id()))?;
    let payload: [u8; 8] = frame
        .data()
        .try_into()
        .map_err(|_| CommsError::Framing(format!("CAN frame carries {} bytes, expected 8", frame.dlc())))?;
    Ok(UdpPackage { id, payload })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_through() {
        let m = CanMapping::default();
        let pkg = UdpPackage { id: 0x02, payload: [1, 2, 3, 4, 5, 6, 7, 8] };
        let f = udp_to_can(&pkg, &m).unwrap();
        assert_eq!(f.id(), 0x102);
        assert_eq!(f.dlc(), 8);
        assert_eq!(f.data(), &pkg.payload);
        assert_eq!(can_to_udp(&f, &m).unwrap(), pkg);
    }

    #[test]
    fn unmapped_id() {
        let m = CanMapping::default();
        let pkg = UdpPackage { id: 0x90, payload: [0; 8] };
        assert_eq!(udp_to_can(&pkg, &m), Err(CommsError::Unmapped(0x90)));
    }

    #[test]
    fn frame_limits() {
        assert!(CanFrame::new(0x800, &[]).is_err());
        assert!(CanFrame::new(0x7FF, &[0; 9]).is_err());
        let f = CanFrame::new(0x10, &[9, 9, 9]).unwrap();
        assert_eq!(f.dlc() as usize, f.data().len());
        let short = CanFrame::new(0x101, &[1, 2]).unwrap();
        assert!(matches!(can_to_udp(&short, &CanMapping::default()), Err(CommsError::Framing(_))));
    }

    #[test]
    fn mapping_file() {
        let m = CanMapping::parse("# table\n0x01, 0x201\n2, 514\n").unwrap();
        assert_eq!(m.can_id(1), Some(0x201));
        assert_eq!(m.can_id(2), Some(514));
        assert_eq!(m.udp_id(0x201), Some(1));
        assert!(CanMapping::parse("1, 0x201\n2, 0x201\n").is_err());
        assert!(CanMapping::parse("1, 0x900\n").is_err());
        assert!(CanMapping::parse("300, 1\n").is_err());
        let d = CanMapping::default();
        assert_eq!(CanMapping::parse(&d.to_text()).unwrap(), d);
    }
}
