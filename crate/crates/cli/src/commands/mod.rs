pub mod bbox;
pub mod conservatism;
pub mod contours;
pub mod simulate;
