use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;
