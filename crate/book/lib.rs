// mdbook cannot compile snippets against workspace crates, so every chapter
// is pulled in as a module doc and `cargo test --doc -p edgearm-book` runs
// the code blocks. One module per chapter keeps failures traceable.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/model.md")]
pub mod model {}
#[doc = include_str!("src/reasoning.md")]
pub mod reasoning {}
#[doc = include_str!("src/monitoring.md")]
pub mod monitoring {}
#[doc = include_str!("src/reconciliation.md")]
pub mod reconciliation {}
#[doc = include_str!("src/watcher.md")]
pub mod watcher {}
#[doc = include_str!("src/scenarios.md")]
pub mod scenarios {}
#[doc = include_str!("src/operating.md")]
pub mod operating {}
