use super::interp::{MachineState, Value};

/// Byte encoding of a state used for every comparison between copies:
/// BOOL as one byte, INT as 4 bytes little-endian two's complement, arrays
/// element by element, variables in canonical order.
pub fn canonical_snapshot(s: &MachineState) -> Vec<u8> {
    let mut out = Vec::new();
    for v in &s.values {
        encode(v, &mut out);
    }
    out
}

fn encode(v: &Value, out: &mut Vec<u8>) {
    match v {
        Value::Bool(b) => out.push(*b as u8),
        Value::Int(i) => out.extend_from_slice(&(*i as i32).to_le_bytes()),
        Value::Array(vs) => vs.iter().for_each(|v| encode(v, out)),
    }
}
