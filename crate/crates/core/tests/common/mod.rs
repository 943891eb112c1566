pub mod cases;
pub mod desk;
pub mod gradcheck;
pub mod oracles;
