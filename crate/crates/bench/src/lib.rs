//! Fixtures shared by the criterion benches in `benches/`.

use qldp_core::model::LatticeBox;
use qldp_core::opalg::{kron, spin};
use qldp_core::{Model, Potential};

/// 1D σzσz chain observed through σx.
pub fn ising_chain() -> Model {
    let zz = kron(&spin::sz(), &spin::sz());
    Model::new(Potential::nearest_neighbour(1, &zz).unwrap(), spin::sx()).unwrap()
}

/// 2D σxσx + 0.5 σzσz observed through σz.
pub fn xz_square() -> Model {
    let op = &kron(&spin::sx(), &spin::sx()) + &kron(&spin::sz(), &spin::sz()).scale(qldp_core::C64::new(0.5, 0.0));
    Model::new(Potential::nearest_neighbour(2, &op).unwrap(), spin::sz()).unwrap()
}

pub fn chain(n: usize) -> LatticeBox {
    LatticeBox::chain(n).unwrap()
}
