use std::path::Path;

use ndarray::Array2;
use proptest::prelude::*;
use tcnn_core::audit::{audit_surface, AuditTolerances};
use tcnn_core::dataset::Dataset;
use tcnn_core::losses::{loss_tc1, loss_tc2, loss_tc3, loss_total, LossWeights};
use tcnn_core::mlp::{init_params, Architecture, ModelParams};
use tcnn_core::oracle::{generate_dataset, OracleParams};
use tcnn_core::tsr::{
    components_to_polar, polar_to_components, tractions_from_grid, CollocationGrid, JPair, JSurface, PathToughness,
    ToughnessMode,
};

fn grid_and_values() -> impl Strategy<Value = (CollocationGrid, Vec<f64>, Vec<f64>)> {
    (2usize..6, 2usize..7, -1.2f64..0.0, 0.1f64..1.4).prop_flat_map(|(m, z, lo, span)| {
        let grid = CollocationGrid::uniform(m, z, lo, lo + span, 5.0).unwrap();
        let n = m * z;
        (
            Just(grid),
            prop::collection::vec(0.01f64..5.0, n),
            prop::collection::vec(0.01f64..5.0, n),
        )
    })
}

fn surface(grid: &CollocationGrid, jn: Vec<f64>, jt: Vec<f64>) -> JSurface {
    let shape = (grid.m(), grid.z());
    JSurface::new(
        grid,
        Array2::from_shape_vec(shape, jn).unwrap(),
        Array2::from_shape_vec(shape, jt).unwrap(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn polar_decomposition_round_trips(r in 0.0f64..100.0, phi in -1.55f64..1.55) {
        let (dn, dt) = polar_to_components(r, phi).unwrap();
        prop_assert!((dn * dn + dt * dt - r * r).abs() <= 1e-12 * (r * r).max(1e-300));
        prop_assert!(dn >= 0.0);
        let (r2, phi2) = components_to_polar(dn, dt);
        prop_assert!((r2 - r).abs() <= 1e-12 * r.max(1.0));
        if r > 0.0 {
            prop_assert!((phi2 - phi).abs() <= 1e-12);
        }
    }

    #[test]
    fn loss_terms_are_nonnegative_and_finite((grid, jn, jt) in grid_and_values()) {
        let s = surface(&grid, jn, jt);
        let t = PathToughness::from_surface(&s, ToughnessMode::PerPath).unwrap();
        let terms = [
            loss_tc1(&grid, &s, &t).unwrap(),
            loss_tc2(&grid, &s, &t).unwrap(),
            loss_tc3(&grid, &tractions_from_grid(&grid, &s).unwrap()).unwrap(),
        ];
        for v in terms {
            prop_assert!(v >= 0.0 && v.is_finite(), "{terms:?}");
        }
        prop_assert!(terms[2] <= 1.0);
    }

    #[test]
    fn tc1_ignores_uniform_rescaling((grid, jn, jt) in grid_and_values(), c in 0.01f64..100.0) {
        let a = surface(&grid, jn.clone(), jt.clone());
        let b = surface(&grid, jn.iter().map(|v| v * c).collect(), jt.iter().map(|v| v * c).collect());
        let la = loss_tc1(&grid, &a, &PathToughness::from_surface(&a, ToughnessMode::PerPath).unwrap()).unwrap();
        let lb = loss_tc1(&grid, &b, &PathToughness::from_surface(&b, ToughnessMode::PerPath).unwrap()).unwrap();
        prop_assert!((la - lb).abs() <= 1e-9 * la.max(1e-12), "{la} vs {lb}");
    }

    #[test]
    fn toughness_identity_holds_pointwise((grid, jn, jt) in grid_and_values(), global in any::<bool>()) {
        let s = surface(&grid, jn, jt);
        let mode = if global { ToughnessMode::Global } else { ToughnessMode::PerPath };
        let t = PathToughness::from_surface(&s, mode).unwrap();
        for j in 0..grid.m() {
            for i in 0..grid.z() {
                let p = JPair { j_n: s.j_n[[j, i]], j_t: s.j_t[[j, i]] };
                let sum = p.j_n + p.j_t;
                prop_assert!((t.total(j, t.damage(j, p)) - sum).abs() <= 1e-12 * sum);
            }
        }
    }

    #[test]
    fn audit_fractions_are_fractions((grid, jn, jt) in grid_and_values(), tol in 0.0f64..0.5) {
        let s = surface(&grid, jn, jt);
        let a = audit_surface(&s, &grid, AuditTolerances::uniform(tol), ToughnessMode::PerPath).unwrap();
        let f = a.report.fractions;
        for v in [f.tc1, f.tc2, f.tc3, f.overall] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!((f.overall - (f.tc1 + f.tc2 + f.tc3) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn total_loss_is_linear(raw in prop::array::uniform4(0.0f64..10.0), w in prop::array::uniform4(0.01f64..1.0)) {
        let sum: f64 = w.iter().sum();
        let weights = LossWeights::new(w[0] / sum, w[1] / sum, w[2] / sum, w[3] / sum).unwrap();
        let once = loss_total(raw, &weights).unwrap().total;
        let twice = loss_total(raw.map(|v| 2.0 * v), &weights).unwrap().total;
        prop_assert!((twice - 2.0 * once).abs() <= 1e-12 * once.max(1e-300));
        prop_assert!(once >= 0.0);
    }

    #[test]
    fn consistent_oracle_is_clean_on_any_grid(m in 2usize..12, z in 2usize..20, lo in -1.5f64..0.0, span in 0.05f64..1.5) {
        let hi = (lo + span).min(1.55);
        let grid = CollocationGrid::uniform(m, z, lo, hi, 10.0).unwrap();
        let a = audit_surface(&OracleParams::consistent(), &grid, AuditTolerances::uniform(1e-9), ToughnessMode::PerPath)
            .unwrap();
        let f = a.report.fractions;
        prop_assert_eq!((f.tc1, f.tc2, f.tc3), (0.0, 0.0, 0.0));
    }

    #[test]
    fn dataset_csv_round_trips(seed in any::<u64>(), noise in 0.0f64..0.1) {
        let oracle = OracleParams::consistent().with_noise(noise, seed);
        let data = generate_dataset(&[-30.0, 10.0, 60.0], &[5, 7, 4], &oracle).unwrap();
        let mut bytes = Vec::new();
        data.write_csv(&mut bytes).unwrap();
        let back = Dataset::read_csv(bytes.as_slice(), Path::new("mem.csv")).unwrap();
        let mut again = Vec::new();
        back.write_csv(&mut again).unwrap();
        prop_assert_eq!(bytes, again);
    }

    #[test]
    fn model_json_round_trips_bit_exactly(seed in any::<u64>(), width in 1usize..9) {
        let m = init_params(&Architecture::new(vec![width, width]).unwrap(), seed).unwrap();
        let back = ModelParams::from_json(&m.to_json()).unwrap();
        let bits = |p: &ModelParams| p.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&m), bits(&back));
    }
}
