use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spdtn_core::circuit::{eagle_127, heavy_hex, kicked_ising, lightcone_prune, Circuit, Gate, Lattice};
use spdtn_core::clifford::{conjugate, recompile, CliffordTableau};
use spdtn_core::oracle::{heisenberg_dense_expectation, statevector_expectation, StateVector};
use spdtn_core::pauli::{Letter, PauliWord};
use spdtn_core::spd::{run_spd, run_spd_with, PauliSum, SpdOptions};

fn random_word(rng: &mut ChaCha8Rng, n: usize, max_weight: usize) -> PauliWord {
    let weight = rng.gen_range(1..=max_weight.min(n));
    let mut w = PauliWord::identity(n);
    let mut placed = 0;
    while placed < weight {
        let q = rng.gen_range(0..n);
        if w.letter(q) == Letter::I {
            w.set(q, [Letter::X, Letter::Y, Letter::Z][rng.gen_range(0..3)]);
            placed += 1;
        }
    }
    w
}

fn random_circuit(rng: &mut ChaCha8Rng, n: usize, len: usize, clifford_only: bool) -> Circuit {
    let mut c = Circuit::new(n, vec![]);
    for _ in 0..len {
        let q = rng.gen_range(0..n);
        let mut r = rng.gen_range(0..n - 1);
        if r >= q {
            r += 1;
        }
        let kind = rng.gen_range(0..if clifford_only { 10 } else { 12 });
        let g = match kind {
            0 => Gate::H { q },
            1 => Gate::S { q },
            2 => Gate::Sdg { q },
            3 => Gate::X { q },
            4 => Gate::Y { q },
            5 => Gate::Z { q },
            6 => Gate::Cx { control: q, target: r },
            7 => Gate::Cz { a: q, b: r },
            8 | 9 => Gate::Rotation {
                axis: random_word(rng, n, 3),
                theta: rng.gen_range(-4i32..=4) as f64 * FRAC_PI_2,
            },
            _ => Gate::Rotation {
                axis: random_word(rng, n, 3),
                theta: rng.gen_range(-PI..PI),
            },
        };
        c.push_gate(g).unwrap();
    }
    c
}

fn random_observable(rng: &mut ChaCha8Rng, n: usize, terms: usize) -> PauliSum {
    PauliSum::from_terms(
        n,
        (0..terms).map(|_| (random_word(rng, n, n), Complex64::new(rng.gen_range(-1.0..1.0), 0.0))),
    )
    .unwrap()
}

fn spd_exact(c: &Circuit, o: &PauliSum) -> f64 {
    run_spd(&recompile(c, o).unwrap(), 0.0).unwrap().expectation
}

#[test]
fn three_way_agreement_on_random_clifford_circuits() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 2..=8 {
        for _ in 0..4 {
            let c = random_circuit(&mut rng, n, 40, true);
            let o = random_observable(&mut rng, n, 3);
            let sv = statevector_expectation(&c, &o).unwrap();
            let dense = heisenberg_dense_expectation(&c, &o).unwrap();
            let tab = CliffordTableau::from_gates(n, &c.gates()).unwrap();
            let mut clifford = 0.0;
            for (w, coef) in o.iter() {
                let img = conjugate(&tab, &w);
                if img.word.is_z_type() {
                    clifford += (coef * img.phase.to_complex()).re;
                }
            }
            assert!((sv - dense).abs() < 1e-12, "n={n}: {sv} vs {dense}");
            assert!((sv - clifford).abs() < 1e-12, "n={n}: {sv} vs {clifford}");
        }
    }
}

#[test]
fn random_six_qubit_circuits_match_across_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let c = random_circuit(&mut rng, 6, 30, false);
        let o = random_observable(&mut rng, 6, 4);
        let sv = statevector_expectation(&c, &o).unwrap();
        let dense = heisenberg_dense_expectation(&c, &o).unwrap();
        assert!((sv - dense).abs() < 1e-12, "{sv} vs {dense}");
    }
}

#[test]
fn recompiled_spd_matches_dense_on_random_circuits() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for n in 2..=10 {
        for _ in 0..3 {
            let c = random_circuit(&mut rng, n, 50, false);
            let o = random_observable(&mut rng, n, 2);
            let rc = recompile(&c, &o).unwrap();
            for r in &rc.rotations {
                assert!(r.theta.abs() <= std::f64::consts::FRAC_PI_4 + 1e-15);
            }
            let spd = run_spd(&rc, 0.0).unwrap().expectation;
            let dense = heisenberg_dense_expectation(&c, &o).unwrap();
            assert!((spd - dense).abs() < 1e-10, "n={n}: {spd} vs {dense}");
        }
    }
}

#[test]
fn pure_clifford_rotations_are_removed() {
    let lat = heavy_hex(1, 1);
    let c = kicked_ising(&lat, FRAC_PI_2, 3, false);
    let o = PauliSum::from_text(12, "Z0").unwrap();
    let rc = recompile(&c, &o).unwrap();
    assert!(rc.rotations.is_empty());
    assert_eq!(rc.observable.len(), 1);
}

#[test]
fn kicked_ising_fragment_spd_vs_statevector() {
    let lat = eagle_127();
    let (frag, _) = lat.ball(62, 16).unwrap();
    let center = 0;
    let theta = 7.0 * PI / 32.0;
    let c = kicked_ising(&frag, theta, 5, false);
    let o = PauliSum::from_text(16, &format!("Z{center}")).unwrap();
    let sv = statevector_expectation(&c, &o).unwrap();
    let spd = spd_exact(&c, &o);
    assert!((sv - spd).abs() < 1e-10, "{sv} vs {spd}");
}

#[test]
fn lightcone_pruning_preserves_values() {
    let lat = eagle_127();
    let (frag, _) = lat.ball(62, 16).unwrap();
    let c = kicked_ising(&frag, 0.4, 4, false);
    for q in [0usize, 5, 11] {
        let o = PauliSum::from_text(16, &format!("Z{q}")).unwrap();
        let pruned = lightcone_prune(&c, &o);
        assert!(pruned.gates().len() <= c.gates().len());
        let full = spd_exact(&c, &o);
        let cut = spd_exact(&pruned, &o);
        assert!((full - cut).abs() < 1e-12, "{full} vs {cut}");
        let sv = statevector_expectation(&pruned, &o).unwrap();
        assert!((sv - full).abs() < 1e-10);
    }
}

#[test]
fn theta_zero_keeps_z_observables_at_one() {
    let lat = heavy_hex(2, 2);
    let n = lat.num_nodes();
    let c = kicked_ising(&lat, 0.0, 7, false);
    let o = PauliSum::magnetization(n);
    let r = run_spd(&recompile(&c, &o).unwrap(), 0.0).unwrap();
    assert!((r.expectation - 1.0).abs() < 1e-14);
    assert_eq!(r.peak_terms, n);
}

#[test]
fn norm_is_conserved_without_truncation() {
    let lat = eagle_127();
    let c = kicked_ising(&lat, 0.3, 4, false);
    let o = PauliSum::from_text(127, "Z62").unwrap();
    let rc = recompile(&lightcone_prune(&c, &o), &o).unwrap();
    let opts = SpdOptions {
        track_norm: true,
        ..SpdOptions::default()
    };
    let (r, norms) = run_spd_with(&rc, 0.0, &opts).unwrap();
    assert!(!norms.is_empty());
    for v in norms {
        assert!((v - 1.0).abs() < 1e-10);
    }
    assert!(r.peak_terms >= r.final_terms);
}

#[test]
fn term_cap_aborts_gracefully() {
    let lat = heavy_hex(1, 2);
    let n = lat.num_nodes();
    let c = kicked_ising(&lat, 0.5, 4, false);
    let o = PauliSum::from_text(n, "Z3").unwrap();
    let rc = recompile(&c, &o).unwrap();
    let opts = SpdOptions {
        max_terms: 10,
        track_norm: false,
    };
    match run_spd_with(&rc, 0.0, &opts) {
        Err(spdtn_core::Error::TermCap { cap, gates_applied }) => {
            assert_eq!(cap, 10);
            assert!(gates_applied >= 1);
        }
        other => panic!("expected term cap, got {other:?}"),
    }
}

#[test]
fn arbitrary_initial_state() {
    let amps = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
    let psi = StateVector::from_amplitudes(1, amps).unwrap();
    let o = PauliSum::from_text(1, "Z0").unwrap();
    assert_eq!(psi.expectation(&o).unwrap(), -1.0);
}

#[test]
fn ring_lattice_from_edges() {
    let lat = Lattice::new(4, vec![(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
    let c = kicked_ising(&lat, 0.25, 3, true);
    let o = PauliSum::from_text(4, "X0 Y1 + 0.5*Z2").unwrap();
    let sv = statevector_expectation(&c, &o).unwrap();
    assert!((spd_exact(&c, &o) - sv).abs() < 1e-12);
}
