//! The guide's chapters, compiled so that every snippet runs as a doc-test.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/primitives.md")]
pub mod primitives {}

#[doc = include_str!("../../../book/src/neighborhoods.md")]
pub mod neighborhoods {}

#[doc = include_str!("../../../book/src/aggregation.md")]
pub mod aggregation {}

#[doc = include_str!("../../../book/src/depth-init.md")]
pub mod depth_init {}

#[doc = include_str!("../../../book/src/attention.md")]
pub mod attention {}

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}

#[doc = include_str!("../../../book/src/files-and-cli.md")]
pub mod files_and_cli {}
