use std::fmt;

use serde::{Deserialize, Serialize};

/// Port label: simple (message), buffer (queue side) or clock (scheduling).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PortLabel {
    Simple,
    Buffer,
    Clock,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PortDir {
    In,
    Out,
}

/// A port (name, label, direction). Written `p?`/`p!` for simple ports,
/// `p~?`/`p~!` for buffer ports and `p<?`/`p<!` for clock ports.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Port {
    pub name: String,
    pub label: PortLabel,
    pub dir: PortDir,
}

impl Port {
    pub fn new(name: impl Into<String>, label: PortLabel, dir: PortDir) -> Self {
        Port { name: name.into(), label, dir }
    }

    pub fn simple_in(name: impl Into<String>) -> Self {
        Self::new(name, PortLabel::Simple, PortDir::In)
    }

    pub fn simple_out(name: impl Into<String>) -> Self {
        Self::new(name, PortLabel::Simple, PortDir::Out)
    }

    pub fn clock_in(name: impl Into<String>) -> Self {
        Self::new(name, PortLabel::Clock, PortDir::In)
    }

    pub fn clock_out(name: impl Into<String>) -> Self {
        Self::new(name, PortLabel::Clock, PortDir::Out)
    }

    pub fn buffer_in(name: impl Into<String>) -> Self {
        Self::new(name, PortLabel::Buffer, PortDir::In)
    }

    pub fn buffer_out(name: impl Into<String>) -> Self {
        Self::new(name, PortLabel::Buffer, PortDir::Out)
    }

    /// The master-clock port ⊤ = `clk<?`, the one clock in-port that stays
    /// unconnected and activates the master scheduler on a lost token.
    pub fn master_clock() -> Self {
        Self::clock_in("clk")
    }

    pub fn is_master_clock(&self) -> bool {
        self.name == "clk" && self.label == PortLabel::Clock && self.dir == PortDir::In
    }

    pub fn is_in(&self) -> bool {
        self.dir == PortDir::In
    }

    pub fn is_out(&self) -> bool {
        self.dir == PortDir::Out
    }

    /// The low-level complement: the port this one is wired to directly.
    ///
    /// (p!)ᶜ = p~?, (p?)ᶜ = p~!, (p<!)ᶜ = p<?, and the three inverses.
    pub fn complement(&self) -> Port {
        use PortDir::*;
        use PortLabel::*;
        let (label, dir) = match (self.label, self.dir) {
            (Simple, Out) => (Buffer, In),
            (Simple, In) => (Buffer, Out),
            (Buffer, In) => (Simple, Out),
            (Buffer, Out) => (Simple, In),
            (Clock, Out) => (Clock, In),
            (Clock, In) => (Clock, Out),
        };
        Port::new(self.name.clone(), label, dir)
    }

    /// Parses the textual form, e.g. `net!`, `net?`, `net<!`, `net~?`.
    pub fn parse(s: &str) -> Option<Port> {
        let (body, dir) = match s.chars().last()? {
            '!' => (&s[..s.len() - 1], PortDir::Out),
            '?' => (&s[..s.len() - 1], PortDir::In),
            _ => return None,
        };
        let (name, label) = match body.chars().last()? {
            '<' => (&body[..body.len() - 1], PortLabel::Clock),
            '~' => (&body[..body.len() - 1], PortLabel::Buffer),
            _ => (body, PortLabel::Simple),
        };
        if name.is_empty() {
            return None;
        }
        Some(Port::new(name, label, dir))
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self.label {
            PortLabel::Simple => "",
            PortLabel::Buffer => "~",
            PortLabel::Clock => "<",
        };
        let dir = match self.dir {
            PortDir::In => "?",
            PortDir::Out => "!",
        };
        write!(f, "{}{}{}", self.name, label, dir)
    }
}
