//! The narrative guide, compiled from `book/src` so its code listings run
//! as doc-tests. The rendered version is built with `mdbook build book`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/observers.md")]
pub mod observers {}

#[doc = include_str!("../../../book/src/stability.md")]
pub mod stability {}

#[doc = include_str!("../../../book/src/feasibility.md")]
pub mod feasibility {}

#[doc = include_str!("../../../book/src/validation.md")]
pub mod validation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
