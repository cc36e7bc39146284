// SPDX-License-Identifier: Apache-2.0

//! Runs the code listings in `book/src` as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}
#[doc = include_str!("../../../book/src/windows.md")]
mod windows {}
#[doc = include_str!("../../../book/src/ks.md")]
mod ks {}
#[doc = include_str!("../../../book/src/moment.md")]
mod moment {}
#[doc = include_str!("../../../book/src/alarms.md")]
mod alarms {}
#[doc = include_str!("../../../book/src/proxies.md")]
mod proxies {}
#[doc = include_str!("../../../book/src/metrics.md")]
mod metrics {}
#[doc = include_str!("../../../book/src/simulator.md")]
mod simulator {}
#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}
