use alloc::string::String;
use core::cmp::Ordering;
use core::fmt;

/// Unique object identifier such as `chair7`.
///
/// Ordered naturally: alphabetic prefix first, then the numeric suffix as a
/// number, so `chair2 < chair10`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(transparent))]
pub struct ObjectId(String);

impl ObjectId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    /// `label` followed by a 1-based ordinal.
    pub fn from_parts(label: &str, ordinal: usize) -> Self {
        Self(alloc::format!("{label}{ordinal}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn split(&self) -> (&str, Option<u64>) {
        let digits = self.0.bytes().rev().take_while(u8::is_ascii_digit).count();
        let (head, tail) = self.0.split_at(self.0.len() - digits);
        (head, tail.parse().ok())
    }
}

impl Ord for ObjectId {
    fn cmp(&self, other: &Self) -> Ordering {
        let (ha, na) = self.split();
        let (hb, nb) = other.split();
        ha.cmp(hb).then(na.cmp(&nb)).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for ObjectId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ObjectId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

impl AsRef<str> for ObjectId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;
    use alloc::vec::Vec;

    #[test]
    fn natural_order() {
        let ids: BTreeSet<ObjectId> = ["chair10", "chair2", "cabinet1", "chair1", "chair"].into_iter().map(ObjectId::from).collect();
        let order: Vec<&str> = ids.iter().map(ObjectId::as_str).collect();
        assert_eq!(order, ["cabinet1", "chair", "chair1", "chair2", "chair10"]);
    }
}
