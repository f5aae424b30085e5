use lgtm::core::{make_light_mask, sample_initial_noise, LightMask, LightSpec, Point, RgbImage};
use lgtm::formats::{ltz, mask_png, rgb_png};
use lgtm::spec_json;
use proptest::prelude::*;

fn spec() -> impl Strategy<Value = LightSpec> {
    let c = || -0.5..1.5f64;
    prop_oneof![
        (c(), c(), 0.01..4.0f64).prop_map(|(x, y, r)| LightSpec::point(Point::new(x, y), r).unwrap()),
        (c(), c(), c(), c(), 0.01..4.0f64)
            .prop_map(|(a, b, x, y, r)| LightSpec::segment(Point::new(a, b), Point::new(x, y), r).unwrap()),
    ]
}

proptest! {
    #[test]
    fn ltz_round_trip_is_stable(seed in any::<u64>(), h in 1usize..24, w in 1usize..24) {
        let z = sample_initial_noise(seed, h, w).unwrap();
        let bytes = ltz::encode(&z).unwrap();
        let back = ltz::decode(&bytes).unwrap();
        prop_assert_eq!((back.height(), back.width(), back.seed(), back.timestep()), (h, w, seed, 1000));
        for (a, b) in z.values().iter().zip(back.values()) {
            prop_assert_eq!(*a as f32, *b as f32);
        }
        prop_assert_eq!(ltz::encode(&back).unwrap(), bytes);
    }

    #[test]
    fn mask_png_quantizes_to_16_bits(values in proptest::collection::vec(0.0..=1.0f64, 1..200), w in 1usize..20) {
        let h = values.len().div_ceil(w);
        let mut values = values;
        values.resize(w * h, 0.0);
        let mask = LightMask::from_values(w, h, values).unwrap();
        let bytes = mask_png::encode(&mask).unwrap();
        let back = mask_png::decode(&bytes).unwrap();
        for (a, b) in mask.values().iter().zip(back.values()) {
            prop_assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-12);
        }
        prop_assert_eq!(mask_png::encode(&back).unwrap(), bytes);
    }

    #[test]
    fn rgb_png_is_lossless(pixels in proptest::collection::vec(any::<u8>(), 3..300)) {
        let w = pixels.len() / 3;
        let image = RgbImage::new(w, 1, pixels[..3 * w].to_vec()).unwrap();
        prop_assert_eq!(rgb_png::decode(&rgb_png::encode(&image).unwrap()).unwrap(), image);
    }

    #[test]
    fn spec_json_round_trips(s in spec()) {
        let text = spec_json::to_json(&s).unwrap();
        prop_assert_eq!(spec_json::parse_light_spec(&text, true).unwrap(), s);
    }
}

#[test]
fn strict_and_lenient_spec_parsing() {
    let text = r#"{"kind":"point","ax":0.25,"ay":0.5,"radius":0.8,"color":"red"}"#;
    assert!(spec_json::parse_light_spec(text, true).is_err());
    let lenient = spec_json::parse_light_spec(text, false).unwrap();
    assert_eq!(spec_json::to_json(&lenient).unwrap(), r#"{"kind":"point","ax":0.25,"ay":0.5,"radius":0.8}"#);
}

#[test]
fn mask_png_rejects_other_pixel_formats() {
    let rgb = rgb_png::encode(&RgbImage::filled(4, 4, [1, 2, 3]).unwrap()).unwrap();
    assert!(mask_png::decode(&rgb).is_err());
    let mask = make_light_mask(&LightSpec::point(Point::new(0.5, 0.5), 1.0).unwrap(), 4, 4).unwrap();
    assert!(rgb_png::decode(&mask_png::encode(&mask).unwrap()).is_ok());
}
