pub mod bilinear;
pub mod knapp;
pub mod lie_info;
pub mod null_check;
pub mod simulate;
