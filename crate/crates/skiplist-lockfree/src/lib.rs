//! Lock-free skip list built on compare-and-swap, with deletion via
//! mark bits packed into the successor words and epoch-based
//! reclamation. The Shavit-Lotan and spray queues run directly on
//! [`SkipList`]; the Linden queue reuses the node, marked-word, and
//! level machinery with its own bottom-level protocol.

pub mod level;
pub mod list;
pub mod marked;
pub mod node;

pub use level::{generate_level, MAX_LEVEL, TOWER_SLOTS};
pub use list::{SearchResult, SkipList};
pub use marked::MarkedWord;
pub use node::Node;
