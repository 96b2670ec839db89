mod common;

use common::{pair, rel_pair, shape_grid};
use peel_core::subspace::{apply_b, decompose, eigenvalue_of, project};
use peel_core::{HwPair, Subspace};
use peel_oracles::dense;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn decomposition_is_orthogonal_and_complete(idx in 0usize..12, seed in any::<u64>()) {
        let shape = shape_grid()[idx];
        let z = pair(&shape, seed);
        let d = decompose(&z, &shape).unwrap();
        let parts: Vec<HwPair> = d.components.iter().map(|c| c.pair()).collect();
        for (i, a) in parts.iter().enumerate() {
            for b in &parts[i + 1..] {
                prop_assert!(a.dot(b).abs() < 1e-10 * z.norm_squared());
            }
        }
        prop_assert!(rel_pair(&d.reconstruct(), &z) < 1e-10);
    }

    #[test]
    fn projection_is_idempotent(idx in 0usize..12, seed in any::<u64>(), tag in 0usize..5) {
        let shape = shape_grid()[idx];
        let z = pair(&shape, seed);
        let tag = Subspace::ALL[tag];
        let once = project(&z, &shape, tag).unwrap().pair();
        let twice = project(&once, &shape, tag).unwrap().pair();
        prop_assert!(twice.sub(&once).norm() <= 1e-12 * z.norm());
    }

    #[test]
    fn components_are_eigenvectors(idx in 0usize..12, seed in any::<u64>()) {
        let shape = shape_grid()[idx];
        let z = pair(&shape, seed);
        let m = dense::coupling(shape.classes(), shape.per_class(), shape.gamma());
        let mut spectral = HwPair::zeros(&shape);
        for comp in decompose(&z, &shape).unwrap().components {
            let part = comp.pair();
            let sigma = eigenvalue_of(comp.subspace, &shape);
            prop_assert_eq!(sigma, comp.eigenvalue);
            let image = HwPair::new(&part.w * &m, &part.h * m.transpose());
            prop_assert!(image.sub(&part.scaled(sigma)).norm() <= 1e-10 * z.norm());
            spectral = spectral.add(&part.scaled(sigma));
        }
        let bz = apply_b(&z, &shape).unwrap();
        prop_assert!(bz.sub(&spectral).norm() <= 1e-10 * bz.norm().max(z.norm() * 1e-3));
    }
}
