use dyspn::io::pgm::{decode_depth, encode_depth, MAX_DEPTH};
use dyspn::io::{PgmImage, RawTensor, RunConfig, TensorData};
use dyspn::synth::SceneKind;
use dyspn::{DepthGrid, Precision, Variant};
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..6, 0..5)
}

fn tensor() -> impl Strategy<Value = RawTensor> {
    dims().prop_flat_map(|d| {
        let n: usize = d.iter().product();
        let d32 = d.clone();
        prop_oneof![
            prop::collection::vec(any::<f64>(), n)
                .prop_map(move |v| RawTensor::new(d.clone(), TensorData::F64(v)).unwrap()),
            prop::collection::vec(any::<f32>(), n)
                .prop_map(move |v| RawTensor::new(d32.clone(), TensorData::F32(v)).unwrap()),
        ]
    })
}

fn image() -> impl Strategy<Value = PgmImage> {
    (1usize..12, 1usize..12).prop_flat_map(|(h, w)| {
        prop::collection::vec(any::<u16>(), h * w).prop_map(move |s| PgmImage::new(h, w, s).unwrap())
    })
}

proptest! {
    #[test]
    fn tensor_bytes_round_trip(t in tensor()) {
        let bytes = t.encode();
        let back = RawTensor::decode(&bytes).unwrap();
        // compare encodings so NaN payloads count as equal
        prop_assert_eq!(back.encode(), bytes);
        prop_assert_eq!(back.dims(), t.dims());
    }

    #[test]
    fn tensor_rejects_truncation(t in tensor(), cut in 1usize..16) {
        let bytes = t.encode();
        let keep = bytes.len().saturating_sub(cut);
        prop_assert!(RawTensor::decode(&bytes[..keep]).is_err());
    }

    #[test]
    fn pgm_bytes_round_trip(img in image()) {
        let bytes = img.encode();
        let back = PgmImage::decode(&bytes).unwrap();
        prop_assert_eq!(&back, &img);
        prop_assert_eq!(back.encode(), bytes);
    }

    #[test]
    fn quantized_depth_round_trips(img in image()) {
        let depth = img.to_depth();
        let bytes = encode_depth(&depth).unwrap();
        prop_assert_eq!(&bytes, &img.encode());
        prop_assert_eq!(decode_depth(&bytes).unwrap(), depth);
    }

    #[test]
    fn depth_error_is_half_a_step(values in prop::collection::vec(0.0..MAX_DEPTH, 1..50)) {
        let n = values.len();
        let depth = DepthGrid::new(1, n, values.clone()).unwrap();
        let back = decode_depth(&encode_depth(&depth).unwrap()).unwrap();
        for (a, b) in values.iter().zip(back.as_grid().values()) {
            prop_assert!((a - b).abs() <= 0.5 / 256.0 + 1e-12);
        }
    }

    #[test]
    fn run_config_round_trips(
        variant in prop::sample::select(Variant::ALL.to_vec()),
        steps in 1usize..50,
        epsilon in 0.0f64..1.0,
        f32p: bool,
        tape: bool,
        seed: u64,
        sparsity in 0.0f64..1.0,
        sigma in prop::option::of(0.001f64..10.0),
        gt in prop::option::of("[a-z]{1,8}\\.pgm"),
    ) {
        let cfg = RunConfig {
            variant,
            steps,
            epsilon,
            precision: if f32p { Precision::F32 } else { Precision::F64 },
            tape,
            seed,
            sparsity,
            sigma,
            gt: gt.map(Into::into),
            scene: SceneKind::SlantedPlanes,
            ..RunConfig::default()
        };
        let text = cfg.serialize();
        let back = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.serialize(), text);
    }
}

#[test]
fn one_meter_is_sample_256() {
    let depth = DepthGrid::new(1, 1, vec![1.0]).unwrap();
    let img = PgmImage::from_depth(&depth).unwrap();
    assert_eq!(img.samples, vec![256]);
    assert_eq!(PgmImage::new(1, 1, vec![256]).unwrap().to_depth(), depth);
}
