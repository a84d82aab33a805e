mod common;

use common::{dense_decomposition, random_mask, random_vec, rel_diff, rng};
use mtdl_core::decompose::{solve_potential_tangential, DecomposeOptions};
use mtdl_core::linalg::{dot, matvec, norm};
use mtdl_core::manifold::restricted_derivative;
use mtdl_core::synthetic::{annulus, thick_shell, two_disks};
use mtdl_core::{
    assemble, build_grid, harmonic_space, hodge_decompose, hodge_decompose_with, BoundaryCondition, Cochain,
    EigenOptions, GridComplex, Supports, Variant, VertexMask,
};
use proptest::prelude::*;

fn decompose(g: &GridComplex, sup: &Supports, k: usize, v: &[f64], variant: Variant) -> [Vec<f64>; 3] {
    let opts = DecomposeOptions {
        variant,
        ..DecomposeOptions::default()
    };
    let res = hodge_decompose_with(&Cochain::full(g, k, v.to_vec()).unwrap(), g, sup, &opts).unwrap();
    res.components().map(|c| c.values().to_vec())
}

/// Kernel vectors of the degree-1 Laplacians under both conditions, zero-extended.
fn harmonic_fields(g: &GridComplex, sup: &Supports) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for bc in BoundaryCondition::ALL {
        let s = sup.get(bc);
        let op = assemble(g, s, 1, Variant::Big).unwrap();
        let basis = harmonic_space(&op, 4, &EigenOptions::default()).unwrap();
        for j in 0..basis.dim() {
            out.push(s.extend(1, &basis.vector(j)));
        }
    }
    out
}

#[test]
fn annulus_residual_carries_the_harmonic_content() {
    let shape = annulus(24, 9.5, 4.0);
    let g = shape.grid().unwrap();
    let sup = Supports::build(&g, &shape.mask(&g).unwrap()).unwrap();
    let v = random_vec(&mut rng(3), g.cell_count(1));
    let [w1, w2, w3] = decompose(&g, &sup, 1, &v, Variant::Big);
    assert!(norm(&w3) > 0.1 * norm(&v));
    assert!(dot(&w1, &w2).abs() <= 1e-10 * norm(&v).powi(2));
    assert!(dot(&w1, &w3).abs() <= 1e-8 * norm(&v).powi(2));

    let hs = harmonic_fields(&g, &sup);
    assert_eq!(hs.len(), 2);
    for h in &hs {
        let [a, b, c] = decompose(&g, &sup, 1, h, Variant::Big);
        assert!(
            norm(&a) <= 1e-8 && norm(&b) <= 1e-8,
            "harmonic field leaked: {} {}",
            norm(&a),
            norm(&b)
        );
        assert!(rel_diff(&c, h, 1.0) <= 1e-8);
        assert!((dot(&w3, h) - dot(&v, h)).abs() <= 1e-8 * norm(&v));
    }
}

#[test]
fn matches_the_dense_oracle_on_two_components() {
    let shape = two_disks(16);
    let g = shape.grid().unwrap();
    let sup = Supports::build(&g, &shape.mask(&g).unwrap()).unwrap();
    let v = random_vec(&mut rng(8), g.cell_count(1));
    let got = decompose(&g, &sup, 1, &v, Variant::Big);
    let want = dense_decomposition(&g, &sup, &v);
    for c in 0..3 {
        assert!(rel_diff(&got[c], &want[c], norm(&v)) <= 1e-8, "component {c}");
    }
}

#[test]
fn zero_forms_leave_locally_constant_residuals() {
    let shape = two_disks(16);
    let g = shape.grid().unwrap();
    let sup = Supports::build(&g, &shape.mask(&g).unwrap()).unwrap();
    let v = random_vec(&mut rng(9), g.vertex_count());
    let [w1, w2, w3] = decompose(&g, &sup, 0, &v, Variant::Big);
    assert!(w1.iter().all(|&x| x == 0.0));
    let t = &sup.tangential;
    let d = restricted_derivative(&g, t, 0).unwrap();
    assert!(norm(&matvec(&d, &t.restrict(0, &w3))) <= 1e-8 * norm(&v));
    // one constant per component, so two distinct values on the support
    let mut levels: Vec<f64> = t.restrict(0, &w3);
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup_by(|a, b| (*a - *b).abs() < 1e-8);
    assert_eq!(levels.len(), 2);
    assert!(dot(&w2, &w3).abs() <= 1e-8 * norm(&v).powi(2));
}

#[test]
fn singular_potential_system_gives_the_minimal_norm_potential() {
    // the cavity makes the degree-2 tangential Laplacian singular
    let shape = thick_shell(12);
    let g = shape.grid().unwrap();
    let sup = Supports::build(&g, &shape.mask(&g).unwrap()).unwrap();
    let v = random_vec(&mut rng(10), g.cell_count(1));
    let (w, report) = solve_potential_tangential(&g, &sup, &v, 1, &DecomposeOptions::default()).unwrap();
    assert!(report.relative_residual() <= 1e-9);
    let op = assemble(&g, &sup.tangential, 2, Variant::Big).unwrap();
    let basis = harmonic_space(&op, 2, &EigenOptions::default()).unwrap();
    assert_eq!(basis.dim(), 1);
    assert!(dot(&w, &basis.vector(0)).abs() <= 1e-8 * norm(&w));
}

#[test]
fn hodge_variant_agrees_with_big_for_one_forms() {
    // stars are uniform per degree, so both variants project onto the same subspaces
    let mut r = rng(12);
    for (dims, h) in [
        (vec![9, 11], 0.5),
        (vec![10, 7], 2.5),
        (vec![5, 6, 4], 0.5),
        (vec![6, 5, 5], 1.7),
    ] {
        let g = build_grid(&dims, h).unwrap();
        let mask = random_mask(&g, &mut r, 0.75);
        let sup = Supports::build(&g, &mask).unwrap();
        let v = random_vec(&mut r, g.cell_count(1));
        let big = decompose(&g, &sup, 1, &v, Variant::Big);
        let hodge = decompose(&g, &sup, 1, &v, Variant::Hodge);
        for c in 0..3 {
            assert!(
                rel_diff(&big[c], &hodge[c], norm(&v)) <= 1e-8,
                "{dims:?} h={h} component {c}"
            );
        }
    }
}

#[test]
fn two_forms_in_three_dimensions() {
    let g = build_grid(&[5, 6, 5], 1.0).unwrap();
    let mask = random_mask(&g, &mut rng(13), 0.8);
    let v = random_vec(&mut rng(14), g.cell_count(2));
    let opts = DecomposeOptions::default();
    let res = hodge_decompose(&Cochain::full(&g, 2, v.clone()).unwrap(), &g, &mask, &opts).unwrap();
    assert!(res.diagnostics.max_abs_cosine() <= 1e-8);
    let sup = Supports::build(&g, &mask).unwrap();
    // the exact part is closed on the normal support
    let d = restricted_derivative(&g, &sup.normal, 2).unwrap();
    let w1 = sup.normal.restrict(2, res.exact.values());
    assert!(norm(&matvec(&d, &w1)) <= 1e-8 * norm(&v));
    // and idempotent
    let again = hodge_decompose(&res.exact, &g, &mask, &opts).unwrap();
    assert!(rel_diff(again.exact.values(), res.exact.values(), norm(&v)) <= 1e-8);
}

#[test]
fn empty_mask_passes_everything_through() {
    let g = build_grid(&[5, 5], 1.0).unwrap();
    let mask = VertexMask::from_inside(&g, vec![false; 25]).unwrap();
    let v = random_vec(&mut rng(15), g.cell_count(1));
    let res = hodge_decompose(
        &Cochain::full(&g, 1, v.clone()).unwrap(),
        &g,
        &mask,
        &DecomposeOptions::default(),
    )
    .unwrap();
    assert!(res.exact.values().iter().all(|&x| x == 0.0));
    assert!(res.coexact.values().iter().all(|&x| x == 0.0));
    assert_eq!(res.harmonic.values(), &v[..]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn agrees_with_the_dense_oracle(
        dims in prop::collection::vec(3usize..11, 2),
        seed in 0u64..10_000,
        fill in 0.4f64..1.0,
    ) {
        let g = build_grid(&dims, 1.0).unwrap();
        let mut r = rng(seed);
        let mask = random_mask(&g, &mut r, fill);
        let sup = Supports::build(&g, &mask).unwrap();
        let v = random_vec(&mut r, g.cell_count(1));
        let got = decompose(&g, &sup, 1, &v, Variant::Big);
        let want = dense_decomposition(&g, &sup, &v);
        for c in 0..3 {
            prop_assert!(rel_diff(&got[c], &want[c], norm(&v)) <= 1e-8);
        }
    }
}
