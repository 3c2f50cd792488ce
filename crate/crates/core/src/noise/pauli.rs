use nalgebra::DMatrix;

use super::NoiseError;
use crate::circuit::{pauli_x, pauli_y, pauli_z};
use crate::linalg::{matrix_norm, DenseOperator, SpaceShape, StateVec, C64, ZERO};

pub const PAULI_LABELS: [char; 4] = ['I', 'X', 'Y', 'Z'];

/// `P₀ = I, P₁ = X, P₂ = Y, P₃ = Z`.
pub struct PauliBasis;

impl PauliBasis {
    pub fn get(j: usize) -> DenseOperator {
        match j {
            0 => DenseOperator::identity(SpaceShape::qubits(1)),
            1 => pauli_x(),
            2 => pauli_y(),
            3 => pauli_z(),
            _ => panic!("Pauli index {j} out of range"),
        }
    }

    pub fn all() -> [DenseOperator; 4] {
        [0, 1, 2, 3].map(PauliBasis::get)
    }
}

/// `E = Σⱼ Eⱼ ⊗ Pⱼ` with each `Eⱼ` acting on the germ alone.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeDecomposition {
    dim: usize,
    components: [DMatrix<C64>; 4],
}

impl EdgeDecomposition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn component(&self, j: usize) -> &DMatrix<C64> {
        &self.components[j]
    }

    pub fn component_op(&self, j: usize) -> DenseOperator {
        DenseOperator::new(SpaceShape::new(vec![self.dim]).expect("d ≥ 1"), self.components[j].clone())
            .expect("square")
    }

    /// `‖Eⱼ‖` (largest singular value) for each `j`.
    pub fn norms(&self) -> [f64; 4] {
        [0, 1, 2, 3].map(|j| matrix_norm(&self.components[j]))
    }

    pub fn is_zero(&self, j: usize) -> bool {
        self.components[j].iter().all(|z| *z == ZERO)
    }

    /// `Σⱼ Eⱼ ⊗ Pⱼ` on `germ ⊗ qubit`.
    pub fn reconstruct(&self) -> DenseOperator {
        let shape = SpaceShape::new(vec![self.dim, 2]).expect("d ≥ 1");
        let mut acc = DMatrix::from_element(2 * self.dim, 2 * self.dim, ZERO);
        for (j, p) in PauliBasis::all().iter().enumerate() {
            acc += self.components[j].kronecker(p.matrix());
        }
        DenseOperator::new(shape, acc).expect("square")
    }
}

/// `Eⱼ = ½·Tr_Q[E·(I_d ⊗ Pⱼ)]`, the qubit being the last (least significant)
/// factor.
pub fn pauli_decompose(e: &DenseOperator) -> Result<EdgeDecomposition, NoiseError> {
    let n = e.dim();
    if !n.is_multiple_of(2) || n == 0 {
        return Err(NoiseError::BadShape(format!(
            "edge operator of dimension {n} does not factor as germ ⊗ qubit"
        )));
    }
    let d = n / 2;
    let m = e.matrix();
    let components = [0, 1, 2, 3].map(|j| {
        let p = PauliBasis::get(j);
        let p = p.matrix();
        DMatrix::from_fn(d, d, |g, h| {
            let mut acc = ZERO;
            for a in 0..2 {
                for b in 0..2 {
                    acc += m[(g * 2 + a, h * 2 + b)] * p[(b, a)];
                }
            }
            acc * 0.5
        })
    });
    Ok(EdgeDecomposition { dim: d, components })
}

/// `Σ_{j=1..3} ‖Eⱼ g‖`.
pub fn error_seminorm(dec: &EdgeDecomposition, g: &StateVec) -> Result<f64, NoiseError> {
    if g.shape().total() != dec.dim {
        return Err(NoiseError::BadShape(format!(
            "germ state of dimension {} for a {}-dimensional germ",
            g.shape().total(),
            dec.dim
        )));
    }
    let v = nalgebra::DVector::from_column_slice(g.amps());
    Ok((1..4).map(|j| (&dec.components[j] * &v).norm()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Builtin;
    use crate::linalg::random_unitary;
    use rand::SeedableRng;

    #[test]
    fn basis_is_orthogonal() {
        let ps = PauliBasis::all();
        for (i, a) in ps.iter().enumerate() {
            assert!(a.is_unitary(1e-15));
            assert_eq!(a.max_abs_diff(&a.adjoint()), 0.0);
            for (j, b) in ps.iter().enumerate() {
                let t = a.mul(b).unwrap().matrix().trace();
                let want = if i == j { 2.0 } else { 0.0 };
                assert!((t - C64::new(want, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn decomposition_examples() {
        let id = pauli_decompose(&DenseOperator::identity(SpaceShape::new(vec![3, 2]).unwrap())).unwrap();
        assert!(id.component_op(0).is_identity(0.0));
        assert!((1..4).all(|j| id.is_zero(j)));

        let h = DenseOperator::identity(SpaceShape::new(vec![2]).unwrap()).tensor(&Builtin::H.operator());
        let dec = pauli_decompose(&h).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for j in [1, 3] {
            let want = DMatrix::<C64>::identity(2, 2) * C64::new(r, 0.0);
            assert!(crate::linalg::max_abs_diff(dec.component(j), &want) < 1e-15);
        }
        assert!(dec.is_zero(0) && dec.is_zero(2));
    }

    #[test]
    fn seminorm_examples() {
        let g = StateVec::basis(SpaceShape::new(vec![2]).unwrap(), 1);
        let id = pauli_decompose(&DenseOperator::identity(SpaceShape::new(vec![2, 2]).unwrap())).unwrap();
        assert_eq!(error_seminorm(&id, &g).unwrap(), 0.0);
        let x = DenseOperator::identity(SpaceShape::new(vec![2]).unwrap()).tensor(&pauli_x());
        assert!((error_seminorm(&pauli_decompose(&x).unwrap(), &g).unwrap() - 1.0).abs() < 1e-15);
        let rot = crate::sim::pauli_rotation(crate::sim::Axis::X, 0.1)
            .reshaped(SpaceShape::new(vec![1, 2]).unwrap())
            .unwrap();
        let s = error_seminorm(&pauli_decompose(&rot).unwrap(), &StateVec::scalar(C64::new(1.0, 0.0))).unwrap();
        assert!((s - 0.0998334).abs() < 1e-7);
        assert!((s - 0.1f64.sin()).abs() < 1e-15);
        assert!(error_seminorm(&id, &StateVec::scalar(C64::new(1.0, 0.0))).is_err());
    }

    #[test]
    fn random_unitaries_reconstruct() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for d in [2usize, 4] {
            for _ in 0..100 {
                let u = random_unitary(SpaceShape::new(vec![d, 2]).unwrap(), &mut rng);
                let dec = pauli_decompose(&u).unwrap();
                assert!(dec.reconstruct().max_abs_diff(&u) < 1e-12);
                assert!(dec.norms().iter().all(|&n| n <= 1.0 + 1e-10));
            }
        }
    }
}
