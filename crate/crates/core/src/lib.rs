pub mod algebra;
pub mod linalg;
pub mod permuto;
pub mod potentials;
pub mod qcoh;
pub mod residual;
pub mod saito;
pub mod series;
