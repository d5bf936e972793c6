//! Process and message identifiers.
//!
//! Pids and tags live in disjoint namespaces. In serialized form a pid is
//! written `p<n>` and a tag `l<n>`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid {kind} identifier `{text}` (expected `{prefix}<n>` with n >= 1)")]
pub struct IdError {
    pub kind: &'static str,
    pub prefix: char,
    pub text: String,
}

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident, $prefix:literal, $kind:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl $name {
            pub const PREFIX: char = $prefix;

            pub fn get(self) -> u32 {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}{}", $prefix, self.0)
            }
        }

        impl FromStr for $name {
            type Err = IdError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let err = || IdError { kind: $kind, prefix: $prefix, text: s.to_string() };
                let rest = s.strip_prefix($prefix).ok_or_else(err)?;
                if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(err());
                }
                match rest.parse::<u32>() {
                    Ok(n) if n >= 1 => Ok($name(n)),
                    _ => Err(err()),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

id_type!(
    /// Process identifier. The root process of a run is `p1`.
    Pid, 'p', "pid"
);
id_type!(
    /// Unique message tag.
    Tag, 'l', "tag"
);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_and_parse() {
        assert_eq!(Pid(3).to_string(), "p3");
        assert_eq!(Tag(12).to_string(), "l12");
        assert_eq!("p7".parse::<Pid>().unwrap(), Pid(7));
        assert_eq!("l1".parse::<Tag>().unwrap(), Tag(1));
    }

    #[test]
    fn namespaces_do_not_mix() {
        assert!("l1".parse::<Pid>().is_err());
        assert!("p1".parse::<Tag>().is_err());
        assert!("p0".parse::<Pid>().is_err());
        assert!("p".parse::<Pid>().is_err());
        assert!("p-1".parse::<Pid>().is_err());
    }
}
