use joint_demosaick::cfa::{data_consistency, mosaic, CfaPattern, PatternKind};
use joint_demosaick::metrics::{psnr_255, srgb_encode};
use joint_demosaick::modelfile::{decode, encode_cascade};
use joint_demosaick::resdnet::{materialize_weights, project_noise, projection_radius};
use joint_demosaick::tensor::{conv2d, conv2d_backward, conv_transpose2d, reflexive_pad, reflexive_pad_backward, FilterBank};
use joint_demosaick::{CascadeParams, ImageTensor, ResDNetParams};
use proptest::prelude::*;

fn tensor(h: usize, w: usize, c: usize) -> impl Strategy<Value = ImageTensor> {
    prop::collection::vec(-10.0f64..10.0, h * w * c)
        .prop_map(move |v| ImageTensor::from_vec(h, w, c, v).unwrap())
}

fn sized_tensor(c: usize) -> impl Strategy<Value = ImageTensor> {
    (3usize..9, 3usize..9).prop_flat_map(move |(h, w)| tensor(h, w, c))
}

fn bank(out: usize, inp: usize, k: usize, bias: usize) -> impl Strategy<Value = FilterBank> {
    (
        prop::collection::vec(-1.0f64..1.0, out * inp * k * k),
        prop::collection::vec(-1.0f64..1.0, bias),
    )
        .prop_map(move |(w, b)| FilterBank::new(out, inp, k, k, w, b).unwrap())
}

fn pattern() -> impl Strategy<Value = CfaPattern> {
    prop::sample::select(PatternKind::ALL.to_vec()).prop_map(CfaPattern::new)
}

// Independent reference: mirror without repeating the edge sample.
fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - m }) as usize
}

fn naive_correlation(x: &ImageTensor, f: &FilterBank) -> ImageTensor {
    let (h, w, _) = x.shape();
    let r = (f.kernel_h / 2) as isize;
    ImageTensor::from_fn(h, w, f.out_channels, |y, xx, o| {
        let mut acc = f.bias[o];
        for i in 0..f.in_channels {
            for dy in 0..f.kernel_h {
                for dx in 0..f.kernel_w {
                    let sy = mirror(y as isize + dy as isize - r, h);
                    let sx = mirror(xx as isize + dx as isize - r, w);
                    acc += f.weight(o, i, dy, dx) * x.at(sy, sx, i);
                }
            }
        }
        acc
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_matches_naive_correlation(x in sized_tensor(2), f in bank(3, 2, 3, 3)) {
        let a = conv2d(&x, &f).unwrap();
        let b = naive_correlation(&x, &f);
        for (p, q) in a.data().iter().zip(b.data()) {
            prop_assert!(close(*p, *q, 1e-12));
        }
    }

    #[test]
    fn transposed_conv_is_adjoint(x in (5usize..9, 5usize..9).prop_flat_map(|(h, w)| (tensor(h, w, 3), tensor(h, w, 4))), f in bank(4, 3, 5, 0)) {
        let (u, v) = x;
        let zero_bias = FilterBank { bias: vec![0.0; 4], ..f.clone() };
        let t_bank = FilterBank { bias: vec![0.0; 3], ..f };
        let lhs = conv2d(&u, &zero_bias).unwrap().dot(&v);
        let rhs = u.dot(&conv_transpose2d(&v, &t_bank).unwrap());
        prop_assert!(close(lhs, rhs, 1e-10), "{lhs} vs {rhs}");
    }

    #[test]
    fn conv_backward_input_is_adjoint(x in (3usize..8, 3usize..8).prop_flat_map(|(h, w)| (tensor(h, w, 2), tensor(h, w, 3))), f in bank(3, 2, 3, 3)) {
        let (u, g) = x;
        let g_in = conv2d_backward(&g, &u, &f).unwrap().input;
        let zero_bias = FilterBank { bias: vec![0.0; 3], ..f };
        let lhs = conv2d(&u, &zero_bias).unwrap().dot(&g);
        prop_assert!(close(lhs, u.dot(&g_in), 1e-10));
    }

    #[test]
    fn padding_adjoint(x in sized_tensor(2), pad in 1usize..3, seed in any::<u64>()) {
        let pad = pad.min(x.height().min(x.width()) - 1);
        let p = reflexive_pad(&x, pad).unwrap();
        let (h, w, c) = p.shape();
        let g = ImageTensor::from_fn(h, w, c, |y, xx, ch| ((seed as usize ^ (y * 31 + xx * 7 + ch)) % 17) as f64 - 8.0);
        let back = reflexive_pad_backward(&g, x.shape(), pad).unwrap();
        prop_assert!(close(p.dot(&g), x.dot(&back), 1e-10));
    }

    #[test]
    fn mosaic_is_idempotent_and_consistency_keeps_samples(xu in (3usize..9, 3usize..9).prop_flat_map(|(h, w)| (tensor(h, w, 3), tensor(h, w, 3))), p in pattern()) {
        let (x, u) = xu;
        let y = mosaic(&x, &p).unwrap();
        let again = mosaic(y.data(), &p).unwrap();
        prop_assert_eq!(again.data(), y.data());
        let z = data_consistency(&u, &y).unwrap();
        let mz = mosaic(&z, &p).unwrap();
        prop_assert_eq!(mz.data(), y.data());
        let (h, w, c) = u.shape();
        for r in 0..h {
            for col in 0..w {
                for ch in 0..c {
                    if !p.samples(r, col, ch) {
                        prop_assert_eq!(z.at(r, col, ch), u.at(r, col, ch));
                    }
                }
            }
        }
    }

    #[test]
    fn projection_bound_and_fixed_point(e in sized_tensor(3), sigma in 0.01f64..5.0, gamma in -3.0f64..3.0) {
        let eps = projection_radius(sigma, gamma, e.len());
        let p = project_noise(&e, sigma, gamma);
        prop_assert!(p.norm() <= eps * (1.0 + 1e-12));
        if e.norm() <= eps {
            prop_assert_eq!(p, e);
        } else {
            // same direction
            prop_assert!(close(p.dot(&e), p.norm() * e.norm(), 1e-12));
        }
    }

    #[test]
    fn materialised_filters_are_zero_mean_with_norm_s(raw in prop::collection::vec(-3.0f64..3.0, 9..76), s in -4.0f64..4.0) {
        prop_assume!(raw.iter().any(|&v| (v - raw[0]).abs() > 1e-3));
        let v = materialize_weights(&raw, s).unwrap();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(mean.abs() < 1e-12);
        prop_assert!((norm - s.abs()).abs() < 1e-12);
    }

    #[test]
    fn psnr_symmetric(a in tensor(4, 4, 3), b in tensor(4, 4, 3)) {
        let ab = psnr_255(&a, &b).unwrap();
        let ba = psnr_255(&b, &a).unwrap();
        prop_assert!(ab == ba || close(ab, ba, 1e-12));
    }

    #[test]
    fn srgb_monotone(u in 0.0f64..0.9, d in 1e-9f64..0.1) {
        prop_assert!(srgb_encode(u + d) > srgb_encode(u));
    }

    #[test]
    fn flips_are_involutions(x in sized_tensor(3)) {
        prop_assert_eq!(x.flip_horizontal().flip_horizontal(), x.clone());
        prop_assert_eq!(x.flip_vertical().flip_vertical(), x);
    }

    #[test]
    fn model_round_trip_at_f32(seed in any::<u64>(), k in 1usize..6) {
        let mut p = CascadeParams::with_schedule(ResDNetParams::init(1, 3, seed).unwrap(), k, 15.0, 1.0).unwrap();
        for a in p.arrays_mut() {
            for v in a.iter_mut() {
                *v = *v as f32 as f64;
            }
        }
        let back = decode(&encode_cascade(&p)).unwrap().into_cascade().unwrap();
        prop_assert_eq!(back, p);
    }
}

#[test]
fn srgb_continuous_near_knee() {
    // scan a fine grid across the textbook knee value
    let mut prev = srgb_encode(0.003_13 - 1e-6);
    for k in 1..=2000 {
        let u = 0.003_13 - 1e-6 + k as f64 * 1e-9;
        let v = srgb_encode(u);
        assert!(v > prev);
        assert!(v - prev < 12.92 * 1e-9 + 1e-9, "jump at {u}");
        prev = v;
    }
}
