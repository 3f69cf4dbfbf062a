use rbdsde::noise::{enumerate_tree, make_grid, sample_noise, FiltrationIndex, NoiseMode};

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0))
}

#[test]
fn gaussian_increments_have_the_right_moments() {
    let grid = make_grid(2.0, 5).unwrap();
    let paths = 40_000;
    let noise = sample_noise(&grid, paths, 2, 1, 11).unwrap();
    assert_eq!(noise.mode(), NoiseMode::Gaussian);
    let dt = grid.dt();
    for i in 0..5 {
        for k in 0..2 {
            let v: Vec<f64> = (0..paths).map(|p| noise.dw(i, p)[k]).collect();
            let (m, var) = mean_var(&v);
            assert!(m.abs() < 4.0 * (dt / paths as f64).sqrt(), "mean {m}");
            // sd of the sample variance is about dt sqrt(2 / P)
            assert!((var - dt).abs() < 5.0 * dt * (2.0 / paths as f64).sqrt(), "var {var}");
        }
        let v: Vec<f64> = (0..paths).map(|p| noise.db(i, p)[0]).collect();
        let (m, var) = mean_var(&v);
        assert!(m.abs() < 4.0 * (dt / paths as f64).sqrt());
        assert!((var - dt).abs() < 5.0 * dt * (2.0 / paths as f64).sqrt());
    }
}

#[test]
fn gaussian_axes_are_uncorrelated() {
    let grid = make_grid(1.0, 3).unwrap();
    let paths = 40_000;
    let noise = sample_noise(&grid, paths, 2, 1, 5).unwrap();
    let dt = grid.dt();
    let bound = 5.0 * dt / (paths as f64).sqrt();
    for i in 0..3 {
        let c_wb: f64 = (0..paths).map(|p| noise.dw(i, p)[0] * noise.db(i, p)[0]).sum::<f64>() / paths as f64;
        let c_ww: f64 = (0..paths).map(|p| noise.dw(i, p)[0] * noise.dw(i, p)[1]).sum::<f64>() / paths as f64;
        assert!(c_wb.abs() < bound && c_ww.abs() < bound, "{c_wb} {c_ww}");
    }
    let c_time: f64 = (0..paths).map(|p| noise.dw(0, p)[0] * noise.dw(1, p)[0]).sum::<f64>() / paths as f64;
    assert!(c_time.abs() < bound);
}

#[test]
fn terminal_brownian_variance() {
    let grid = make_grid(1.5, 6).unwrap();
    let paths = 40_000;
    let noise = sample_noise(&grid, paths, 1, 1, 3).unwrap();
    let w: Vec<f64> = (0..paths).map(|p| noise.w(6, p)[0]).collect();
    let b: Vec<f64> = (0..paths).map(|p| noise.b_tail(0, p)[0]).collect();
    for v in [w, b] {
        let (m, var) = mean_var(&v);
        assert!(m.abs() < 4.0 * (1.5 / paths as f64).sqrt());
        assert!((var - 1.5).abs() < 5.0 * 1.5 * (2.0 / paths as f64).sqrt());
    }
}

#[test]
fn sampling_ignores_thread_count() {
    let grid = make_grid(1.0, 8).unwrap();
    let draw = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sample_noise(&grid, 3000, 2, 2, 99).unwrap())
    };
    assert_eq!(draw(1), draw(7));
}

#[test]
fn seeds_give_different_paths() {
    let grid = make_grid(1.0, 2).unwrap();
    let a = sample_noise(&grid, 10, 1, 1, 1).unwrap();
    let b = sample_noise(&grid, 10, 1, 1, 2).unwrap();
    assert_ne!(a.increments(), b.increments());
    assert_eq!(a.seed(), 1);
}

#[test]
fn tree_moments_are_exact() {
    let grid = make_grid(1.0, 4).unwrap();
    let t = enumerate_tree(&grid).unwrap();
    assert!(t.is_tree());
    let n = t.paths() as f64;
    for i in 0..4 {
        let m: f64 = (0..t.paths()).map(|p| t.dw(i, p)[0]).sum::<f64>() / n;
        let v: f64 = (0..t.paths()).map(|p| t.db(i, p)[0].powi(2)).sum::<f64>() / n;
        assert_eq!(m, 0.0);
        assert!((v - 0.25).abs() < 1e-15);
    }
}

#[test]
fn tree_mask_marks_known_bits() {
    // N = 3, i = 1: dW_0 known, dB_1 and dB_2 known
    assert_eq!(FiltrationIndex(1).tree_mask(3), 0b110_001);
    assert_eq!(FiltrationIndex(0).tree_mask(3), 0b111_000);
    assert_eq!(FiltrationIndex(3).tree_mask(3), 0b000_111);
}
