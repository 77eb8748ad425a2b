use mfbm::fredholm::{probe_t_min, solve_g, solve_pq_with, GFamily, OperatorA, PqConfig};
use mfbm::model::kernel_k;
use mfbm::quad::Adaptive;
use mfbm::{NoiseLevel, Theta};

fn th(h: f64, s: f64) -> Theta {
    Theta::new(h, s).unwrap()
}

fn ne(e: f64) -> NoiseLevel {
    NoiseLevel::new(e).unwrap()
}

#[test]
fn family_rows_match_direct_solves() {
    let (t, eps) = (th(0.85, 1.3), ne(0.7));
    let cell = 0.05;
    let fam = GFamily::new(&t, eps, cell, 80).unwrap();
    for k in [16, 41, 80] {
        let direct = solve_g(&t, eps, k as f64 * cell, k).unwrap();
        let row = fam.values(k);
        for (a, b) in row.iter().zip(&direct.values) {
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "k = {k}: {a} vs {b}");
        }
    }
}

#[test]
fn solution_satisfies_continuous_equation_at_a_node() {
    // εg(s) + ∫₀ᵗ K(r − s) g(r) dr = K(s), checked with the interpolant and
    // an independent quadrature.
    let (t, eps) = (th(0.8, 1.0), ne(1.0));
    let sol = solve_g(&t, eps, 2.0, 512).unwrap();
    let s = sol.nodes[300];
    let q = Adaptive::new(1e-9, 0.0, 4000);
    let f = |r: f64| {
        if r == s {
            return [0.0];
        }
        [kernel_k(&t, r - s).unwrap() * sol.interpolate(r)]
    };
    let left = q.integrate(f, 0.0, s, 64).unwrap().value[0];
    let right = q.integrate(f, s, 2.0, 64).unwrap().value[0];
    let lhs = eps.value() * sol.values[300] + left + right;
    let rhs = kernel_k(&t, s).unwrap();
    assert!((lhs - rhs).abs() < 5e-3 * rhs, "{lhs} vs {rhs}");
}

#[test]
fn g_is_positive_and_its_energy_falls_with_noise() {
    // ⟨K, (ε + K)⁻¹K⟩ is strictly decreasing in ε.
    let t = th(0.85, 1.0);
    let energy = |e: f64| {
        let g = solve_g(&t, ne(e), 4.0, 128).unwrap();
        assert!(g.residual < 1e-8);
        assert!(g.values.iter().all(|v| *v > 0.0));
        g.nodes.iter().zip(&g.values).map(|(s, v)| kernel_k(&t, *s).unwrap() * v).sum::<f64>()
    };
    let e: Vec<f64> = [0.25, 1.0, 4.0].iter().map(|x| energy(*x)).collect();
    assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
}

#[test]
fn contraction_beyond_probe_and_pq_bounds() {
    let (t, eps) = (th(0.85, 1.0), ne(1.0));
    let cfg = PqConfig::default();
    let (t_min, norm) = probe_t_min(&t, eps, 0.95, 1024.0, &cfg).unwrap();
    assert!(norm < 0.95);
    let op = OperatorA::new(&t, eps, t_min, &cfg).unwrap();
    let mut last = norm;
    for m in [2.0, 4.0, 8.0] {
        let n = op.retimed(t_min * m).operator_norm();
        assert!(n < 1.0 && n <= last + 1e-12, "norm {n} at {m}·T_min");
        last = n;
    }
    let pq = solve_pq_with(&t, eps, 4.0 * t_min, &cfg).unwrap();
    assert!(pq.contraction < 1.0);
    // p solves p = A p − ½ with ‖A‖ < 1, so ‖p + ½‖ ≤ ‖A‖/(1 − ‖A‖)·‖½‖.
    let half = 0.5 * pq.weights.iter().sum::<f64>().sqrt();
    let a = op.retimed(4.0 * t_min).operator_norm();
    assert!(pq.p_deviation() <= a / (1.0 - a) * half * (1.0 + 1e-6));
}
