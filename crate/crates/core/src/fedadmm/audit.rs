use crate::graph::DeviceGraph;

use super::{Endpoint, Message};

/// A logged message between two devices that share no edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub message: Message,
}

/// Scans a message log. Device-local traffic, traffic along an edge of `g`,
/// and traffic with the coordinator are allowed.
pub fn message_audit(log: &[Message], g: &DeviceGraph) -> Vec<Violation> {
    log.iter()
        .filter(|m| match (m.sender, m.receiver) {
            (Endpoint::Device(a), Endpoint::Device(b)) => {
                a != b && (a >= g.num_nodes() || b >= g.num_nodes() || !g.contains(a, b))
            }
            _ => false,
        })
        .map(|&message| Violation { message })
        .collect()
}
