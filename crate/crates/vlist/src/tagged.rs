//! Tagged node links: a slot reference plus mark/flag bits in one word.
//!
//! A marked link announces that its node is being deleted; a flagged link
//! freezes the successor of a marked run while it is replaced. A link is
//! clean xor marked xor flagged, and once marked or flagged it never changes
//! again.

/// Low bit: the node owning this link is logically deleted.
pub const MARK_MASK: u64 = 0x1;
/// Second bit: the node is frozen as the replacement target of a trim.
pub const FLAG_MASK: u64 = 0x2;
/// Both tag bits.
pub const AUX_MASK: u64 = MARK_MASK | FLAG_MASK;

/// Index of a node slot in the pool.
///
/// This is a plain array index, not an address; the pool it refers to is
/// implied by context. Slot indices are never deallocated, so a `NodeRef` is
/// always safe to read through (though what it refers to may have been
/// recycled -- see the reclaim module).
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug)]
pub struct NodeRef(pub(crate) u64);

impl NodeRef {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn from_index(idx: usize) -> Self {
        NodeRef(idx as u64)
    }
}

/// One word encoding an optional `NodeRef` and the two tag bits.
///
/// The reference part is `(index + 1) << 2`, so the all-zero word is the
/// clean null link and the two low bits stay free for tags.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub struct TaggedLink(u64);

impl TaggedLink {
    pub const NULL: TaggedLink = TaggedLink(0);

    pub fn to(node: NodeRef) -> Self {
        TaggedLink((node.0 + 1) << 2)
    }

    pub fn from_raw(word: u64) -> Self {
        TaggedLink(word)
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    pub fn is_marked(self) -> bool {
        self.0 & MARK_MASK != 0
    }

    pub fn is_flagged(self) -> bool {
        self.0 & FLAG_MASK != 0
    }

    pub fn is_marked_or_flagged(self) -> bool {
        self.0 & AUX_MASK != 0
    }

    /// The link with its tag bits cleared.
    pub fn clean(self) -> Self {
        TaggedLink(self.0 & !AUX_MASK)
    }

    pub fn with_mark(self) -> Self {
        TaggedLink(self.0 | MARK_MASK)
    }

    pub fn with_flag(self) -> Self {
        TaggedLink(self.0 | FLAG_MASK)
    }

    /// The referenced slot, ignoring tag bits; `None` for null.
    pub fn node(self) -> Option<NodeRef> {
        let word = self.0 & !AUX_MASK;
        if word == 0 {
            None
        } else {
            Some(NodeRef((word >> 2) - 1))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ref_roundtrip_ignores_tags() {
        let n = NodeRef::from_index(42);
        let link = TaggedLink::to(n);
        assert_eq!(link.node(), Some(n));
        assert_eq!(link.with_mark().node(), Some(n));
        assert_eq!(link.with_flag().node(), Some(n));
        assert_eq!(link.with_mark().clean(), link);
    }

    #[test]
    fn tag_predicates() {
        let link = TaggedLink::to(NodeRef::from_index(7));
        assert!(!link.is_marked());
        assert!(!link.is_flagged());
        assert!(!link.is_marked_or_flagged());
        assert!(link.with_mark().is_marked());
        assert!(!link.with_mark().is_flagged());
        assert!(link.with_flag().is_flagged());
        assert!(link.with_flag().is_marked_or_flagged());
    }

    #[test]
    fn null_is_clean_zero() {
        assert_eq!(TaggedLink::NULL.raw(), 0);
        assert_eq!(TaggedLink::NULL.node(), None);
        assert!(!TaggedLink::NULL.is_marked_or_flagged());
    }

    #[test]
    fn index_zero_is_not_null() {
        let link = TaggedLink::to(NodeRef::from_index(0));
        assert_ne!(link.raw(), 0);
        assert_eq!(link.node(), Some(NodeRef::from_index(0)));
    }
}
