//! Online velocity planning on 3D race tracks.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apex;
pub mod ggcon;
pub mod grip;
pub mod planner;
pub mod pointmass;
pub mod sim;
pub mod track3d;
pub mod velprofile;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/tracks.md")]
    pub mod tracks {}
    #[doc = include_str!("../../../book/src/gg.md")]
    pub mod gg {}
    #[doc = include_str!("../../../book/src/apexes.md")]
    pub mod apexes {}
    #[doc = include_str!("../../../book/src/profiles.md")]
    pub mod profiles {}
    #[doc = include_str!("../../../book/src/planner.md")]
    pub mod planner {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    pub mod simulation {}
}
