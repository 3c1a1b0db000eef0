//! The book's code listings, compiled and run as doctests.

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/scenarios.md")]
mod scenarios {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/track.md")]
mod track {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/estimator.md")]
mod estimator {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/control.md")]
mod control {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/telemetry.md")]
mod telemetry {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/analysis.md")]
mod analysis {}
