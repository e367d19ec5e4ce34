pub mod expr;
pub mod interval;
pub mod cantor;
pub mod thickness;
pub mod theorem;
pub mod verify;
pub mod presets;
pub mod cli;
