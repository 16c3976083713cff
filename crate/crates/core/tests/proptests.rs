//! Property tests of the structural invariants.

mod common;

use proptest::prelude::*;

use nematic_core::certificates::gronwall_accumulate;
use nematic_core::experiments::{experiment_catalogue, CATALOGUE};
use nematic_core::fem::{
    assemble_consistent_mass, assemble_convection_charge, assemble_isotropic_stiffness, velocity_products,
    DirectorBc, VelocityField,
};
use nematic_core::io::{echo_config, parse_config, read_vtk, vtk_string};
use nematic_core::mesh::{build_structured_mesh, BoxDomain, Pattern, TriMesh};
use nematic_core::scheme::{director_step, step, FixedPointConfig};
use nematic_core::state::{DiscreteState, PhysParams};
use nematic_core::Vec3;

fn mesh(dim: usize, n: usize) -> TriMesh {
    build_structured_mesh(n, &BoxDomain::centered_unit(dim), Pattern::default_for(dim)).unwrap()
}

fn unit(v: (f64, f64, f64)) -> Vec3 {
    let w = Vec3::new(v.0, v.1, v.2);
    if w.norm() < 1e-3 {
        Vec3::z()
    } else {
        w.normalize()
    }
}

/// Smooth director built from a few random Fourier coefficients.
fn wavy_director(m: &TriMesh, c: &[f64; 6]) -> Vec<Vec3> {
    m.nodes
        .iter()
        .map(|x| {
            unit((
                (c[0] * x[0] + c[1]).cos(),
                (c[2] * x[1] + c[3]).sin(),
                0.3 + c[4] * x[0] * x[1] + c[5] * x[2],
            ))
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn director_step_preserves_nodal_norm(
        c in prop::array::uniform6(-3.0f64..3.0),
        k in 1e-4f64..2e-2,
        elastic in 0.01f64..2.0,
        v in (-2.0f64..2.0, -2.0f64..2.0),
    ) {
        let m = mesh(2, 4);
        let p = PhysParams { elastic, k, eps_a: 0.0, lambda_npp: 0.0, ..PhysParams::defaults(2) };
        let d0 = wavy_director(&m, &c);
        let vel = vec![Vec3::new(v.0, v.1, 0.0); m.n_nodes()];
        let f = vec![Vec3::zeros(); m.n_elements()];
        let s = director_step(&m, &p, 1e-12, 30, &d0, &vel, &f).unwrap();
        let worst = s.d.iter().map(|d| (d.norm() - 1.0).abs()).fold(0.0, f64::max);
        prop_assert!(worst < 1e-10, "norm deviation {worst:e}");
    }

    #[test]
    fn full_step_conserves_charge_and_norm(
        c in prop::array::uniform6(-2.0f64..2.0),
        np in 0.1f64..0.9,
        amp in 0.0f64..0.09,
        lambda in 0.0f64..5.0,
    ) {
        let m = mesh(2, 4);
        let p = PhysParams { k: 1e-3, lambda_npp: lambda, elastic: 0.1, ..PhysParams::defaults(2) };
        let mut s = DiscreteState::at_rest(&m, Vec3::z(), DirectorBc::Neumann);
        s.director.values = wavy_director(&m, &c);
        s.n_plus.values = m.nodes.iter().map(|x| np + amp * (3.0 * x[0]).sin()).collect();
        s.n_minus.values = m.nodes.iter().map(|x| np + amp * (2.0 * x[1]).cos()).collect();
        let (next, cert) = step(&s, &m, &p, &FixedPointConfig::default()).unwrap();
        let (p0, m0) = s.charge_masses(&m);
        let (p1, m1) = next.charge_masses(&m);
        prop_assert!((p1 - p0).abs() <= 1e-10 * p0);
        prop_assert!((m1 - m0).abs() <= 1e-10 * m0);
        prop_assert!(cert.max_norm_violation < 1e-8);
        prop_assert!(cert.divergence_norm < 1e-12);
    }

    #[test]
    fn lumped_mass_is_positive_and_exact_on_constants(dim in 2usize..4, n in 1usize..5) {
        let m = mesh(dim, n);
        prop_assert!(m.lumped_mass.iter().all(|&x| x > 0.0));
        let total: f64 = m.lumped_mass.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-13);
        let cm = assemble_consistent_mass(&m).row_sums();
        for (a, b) in cm.iter().zip(&m.lumped_mass) {
            prop_assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn stiffness_is_symmetric_with_zero_row_sums(dim in 2usize..4, n in 1usize..5) {
        let m = mesh(dim, n);
        let k = assemble_isotropic_stiffness(&m);
        prop_assert!(k.is_symmetric(1e-13));
        prop_assert!(k.row_sums().iter().all(|r| r.abs() < 1e-12));
        prop_assert!(k.diagonal().iter().all(|&d| d > 0.0));
    }

    #[test]
    fn charge_convection_rows_sum_to_divergence(seed in any::<u64>()) {
        // -(w, grad phi_i) = (div w, phi_i) when w vanishes on the boundary.
        use rand::SeedableRng;
        let m = mesh(2, 3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut w = common::random_velocity(&m, &mut rng);
        for &z in &m.boundary_nodes {
            w.nodal[z] = Vec3::zeros();
        }
        let c = assemble_convection_charge(&m, &w, None).row_sums();
        let div = common::divergence_residual(&m, &w);
        for (a, b) in c.iter().zip(&div) {
            prop_assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn velocity_products_are_symmetric_and_positive(seed in any::<u64>(), dim in 2usize..4) {
        use rand::SeedableRng;
        let m = mesh(dim, 2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let u = common::random_velocity(&m, &mut rng);
        let w = common::random_velocity(&m, &mut rng);
        let (a, b) = velocity_products(&m, &u, &w);
        let (c, d) = velocity_products(&m, &w, &u);
        prop_assert!((a - c).abs() < 1e-12 && (b - d).abs() < 1e-12);
        let (l2, h1) = velocity_products(&m, &u, &u);
        prop_assert!(l2 > 0.0 && h1 > 0.0);
    }

    #[test]
    fn vtk_round_trip_is_exact(
        vals in prop::collection::vec(-1e6f64..1e6, 25 * 7),
        t in 0.0f64..10.0,
        step_index in 0usize..100000,
    ) {
        let m = mesh(2, 2);
        let n = m.n_nodes();
        prop_assert_eq!(n, 13);
        let mut s = DiscreteState::at_rest(&m, Vec3::z(), DirectorBc::Neumann);
        s.t = t;
        s.step_index = step_index;
        let mut it = vals.into_iter();
        let mut next = || it.next().unwrap();
        s.velocity = VelocityField {
            nodal: (0..n).map(|_| Vec3::new(next(), next(), 0.0)).collect(),
            bubble: vec![Vec3::zeros(); m.n_elements()],
        };
        for z in 0..n {
            s.director.values[z] = Vec3::new(next(), next(), next());
            s.n_plus.values[z] = next();
            s.n_minus.values[z] = next();
        }
        let doc = read_vtk(&vtk_string(&s, &m)).unwrap();
        prop_assert_eq!(doc.points.clone(), m.nodes.clone());
        for z in 0..n {
            let d = s.director.values[z];
            prop_assert_eq!(doc.vectors["director"][z], [d.x, d.y, d.z]);
            prop_assert_eq!(doc.scalars["n_plus"][z], s.n_plus.values[z]);
            prop_assert_eq!(doc.scalars["n_minus"][z], s.n_minus.values[z]);
        }
    }

    #[test]
    fn config_echo_round_trips(
        which in 0usize..7,
        k in 1e-5f64..1e-2,
        nu in 0.01f64..10.0,
        elastic in 0.0f64..5.0,
        n in 1usize..40,
        stab in any::<bool>(),
    ) {
        let mut cfg = experiment_catalogue(CATALOGUE[which]).unwrap();
        cfg.params.k = k;
        cfg.params.nu = nu;
        cfg.params.elastic = elastic;
        cfg.params.stabilization_on = stab;
        cfg.n_per_side = n;
        let text = echo_config(&cfg);
        let back = parse_config(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(echo_config(&back), text);
    }

    #[test]
    fn gronwall_verifies_admissible_sequences(
        seed in any::<u64>(),
        len in 2usize..30,
        k in 1e-3f64..0.2,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut y = vec![rng.gen_range(0.0..3.0)];
        let (mut f, mut g1, mut g2) = (vec![0.0], vec![0.0], vec![0.0]);
        for j in 1..len {
            let a = rng.gen_range(0.0..0.9 / k);
            let b = rng.gen_range(0.0..3.0);
            let fj = rng.gen_range(0.0..=0.5) * (1.0 + k * b) * y[j - 1] / k;
            y.push(((1.0 + k * b) * y[j - 1] - k * fj) / (1.0 - k * a));
            f.push(fj);
            g1.push(a);
            g2.push(b);
        }
        let mut phi: Vec<f64> = (0..=len).map(|_| rng.gen_range(0.0..1.0)).collect();
        phi.sort_by(|a, b| b.total_cmp(a));
        let r = gronwall_accumulate(&y, &f, &g1, &g2, &phi, k).unwrap();
        prop_assert!(r.verified, "lhs {} rhs {}", r.lhs, r.rhs);
        prop_assert!(r.products.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }
}
