//! One module per subcommand.

pub mod bench;
pub mod eval;
pub mod gen_data;
pub mod plan;
pub mod train;
pub mod verify;
