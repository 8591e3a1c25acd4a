use imgraph::corrgraph::Axis;
use imgraph::features::{
    correlation_feature_matrix, correlation_features, standard_features, FeatureMatrix,
};
use imgraph::image_io::Image;
use imgraph::product_graph::kron;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(rng: &mut ChaCha8Rng, n: usize) -> Image {
    Image::from_array(Array2::from_shape_fn((n, n), |_| {
        rng.random_range(0.0..=1.0)
    }))
    .unwrap()
}

/// Pixel with replicate padding.
fn at(a: &Array2<f64>, i: isize, u: isize) -> f64 {
    let n = a.nrows() as isize;
    a[[i.clamp(0, n - 1) as usize, u.clamp(0, n - 1) as usize]]
}

#[test]
fn standard_features_match_naive_windows() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let kx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
    let ky = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
    for _ in 0..10 {
        let img = random_image(&mut rng, 7);
        let a = img.pixels();
        let f = standard_features(&img).unwrap().matrix.to_dense();
        for i in 0..7isize {
            for u in 0..7isize {
                let mut vals = Vec::new();
                let (mut gx, mut gy) = (0.0, 0.0);
                for di in -1..=1isize {
                    for du in -1..=1isize {
                        let v = at(a, i + di, u + du);
                        vals.push(v);
                        gx += kx[(di + 1) as usize][(du + 1) as usize] * v;
                        gy += ky[(di + 1) as usize][(du + 1) as usize] * v;
                    }
                }
                let mean = vals.iter().sum::<f64>() / 9.0;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 9.0;
                let row = f.row((i * 7 + u) as usize);
                assert!((row[0] - mean).abs() < 1e-12);
                assert!((row[1] - var).abs() < 1e-12);
                assert!((row[2] - gx.hypot(gy)).abs() < 1e-12);
                assert!((row[3] - gy.atan2(gx)).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn correlation_matrix_has_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in [2, 5, 8] {
        let img = random_image(&mut rng, n);
        let a = img.pixels();
        let g = correlation_feature_matrix(&img, Axis::Row).g;
        for i in 0..n {
            let col_mean = (0..n).map(|k| a[[k, i]]).sum::<f64>() / n as f64;
            for j in 0..n {
                assert!((g[[i, j]] - (a[[i, j]] / 2.0 + col_mean / 2.0)).abs() < 1e-12);
            }
        }
        let gc = correlation_feature_matrix(&img, Axis::Column).g;
        let gt = correlation_feature_matrix(&img.transposed(), Axis::Row).g;
        assert_eq!(gc, gt);
    }
}

#[test]
fn factored_features_equal_explicit_kronecker_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let img = random_image(&mut rng, 5);
    let gr = correlation_feature_matrix(&img, Axis::Row).g;
    let gc = correlation_feature_matrix(&img, Axis::Column).g;
    let explicit = (kron(&gr, &gc) + kron(&gc, &gr)) / 2.0;
    let feats = correlation_features(&img).matrix;
    assert!(matches!(feats, FeatureMatrix::KronMean { .. }));
    let dense = feats.to_dense();
    assert!((&dense - &explicit).iter().all(|d| d.abs() < 1e-12));

    let w = Array2::from_shape_fn((25, 3), |_| rng.random_range(-1.0..1.0));
    assert!((feats.matmul(&w) - explicit.dot(&w))
        .iter()
        .all(|d| d.abs() < 1e-10));
    assert!((feats.t_matmul(&w) - explicit.t().dot(&w))
        .iter()
        .all(|d| d.abs() < 1e-10));
}
