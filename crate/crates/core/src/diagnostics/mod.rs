pub mod bounds;
pub mod counts;
pub mod flops;
pub mod gradcheck;
pub mod svd;
