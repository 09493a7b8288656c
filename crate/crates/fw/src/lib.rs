//! Tooling around the [`afw`] core library: deterministic fixture
//! generation, the loopback update-channel simulator, and the pieces
//! of the `fw` command-line tool that are worth testing as a library.

pub mod channel;
pub mod demo;
pub mod fixture;
pub mod hexutil;
