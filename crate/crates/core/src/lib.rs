pub mod dynamics;
pub mod error;
pub mod exchange;
pub mod filtering;
pub mod infotheory;
pub mod market;
pub mod numerics;
pub mod options;
pub mod stochastic;
pub mod strategies;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/information.md")]
    mod information {}
    #[doc = include_str!("../../../book/src/pricing.md")]
    mod pricing {}
    #[doc = include_str!("../../../book/src/options.md")]
    mod options {}
    #[doc = include_str!("../../../book/src/information-measures.md")]
    mod information_measures {}
    #[doc = include_str!("../../../book/src/trading.md")]
    mod trading {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
