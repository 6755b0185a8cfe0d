pub mod amm;
pub mod batch;
pub mod crossmm;
pub mod lending;
pub mod money;
pub mod redirect;
pub mod reference;
pub mod scenario;
pub mod venue;
