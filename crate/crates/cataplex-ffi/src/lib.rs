//! C ABI for the verification toolkit.

pub fn placeholder() {}
