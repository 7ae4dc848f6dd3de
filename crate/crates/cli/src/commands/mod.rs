pub mod bench;
pub mod convert;
pub mod eval;
pub mod inspect;
pub mod train;
