pub mod ajax;
pub mod bea;
pub mod boc;
pub mod hsbc;
