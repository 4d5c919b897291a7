use dcse::auxiva::IvaConfig;
use dcse::dsp::{ComplexSpectrogram, StftConfig};
use dcse::model::*;
use dcse::nn::{channel_shuffle, FeatureTensor, Tensor4};
use dcse::{Complex64, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn preset(name: &str) -> ModelConfig {
    ModelConfig::preset(name).unwrap()
}

fn random_spec(channels: usize, frames: usize, seed: u64) -> ComplexSpectrogram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..channels * frames * 257)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    ComplexSpectrogram::from_vec(channels, frames, 257, data).unwrap()
}

fn random_tensor(shape: [usize; 4], seed: u64) -> Tensor4 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor4::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn random_network(name: &str, seed: u64) -> Network {
    let cfg = preset(name);
    Network::new(&cfg, &init_random(&cfg, seed).unwrap()).unwrap()
}

/// Random weights with every bias forced to zero.
struct ZeroBias(RandomInit);

impl ParamSource for ZeroBias {
    fn tensor(&mut self, name: &str, shape: &[usize], kind: Kind) -> Result<Vec<f32>> {
        let v = self.0.tensor(name, shape, kind)?;
        Ok(if matches!(kind, Kind::Bias { .. }) { vec![0.0; v.len()] } else { v })
    }
}

#[test]
fn feature_plane_counts() {
    let y = random_spec(2, 3, 1);
    assert_eq!(build_features(&y, &y, &preset("id6")).unwrap().channels(), 6);
    assert_eq!(build_features(&y, &y, &preset("id1")).unwrap().channels(), 6);
    assert_eq!(build_features(&y, &y, &preset("id5")).unwrap().channels(), 5);
    let cs_n = ModelConfig::new(FeatureKind::Complex, IvaChannels::SpeechAndNoise, Masking::Noisy, EncoderKind::Single);
    let f = build_features(&y, &y, &cs_n).unwrap();
    assert_eq!(f.channels(), 8);
    for p in 0..4 {
        for l in 0..3 {
            assert_eq!(f.row(p, l), f.row(p + 4, l));
        }
    }
    assert!(build_features(&y, &random_spec(2, 4, 1), &preset("id6")).is_err());
    assert!(build_features(&random_spec(1, 3, 1), &random_spec(1, 3, 1), &preset("id6")).is_err());
}

#[test]
fn lps_feature_values() {
    let y = random_spec(2, 2, 2);
    let f = build_features(&y, &y, &preset("id6")).unwrap();
    for l in 0..2 {
        for k in 0..257 {
            let want = y.get(1, l, k).norm_sqr().max(1e-12).ln() as f32;
            assert_eq!(f.get(5, l, k), want);
            assert_eq!(f.get(3, l, k), y.get(1, l, k).im as f32);
        }
    }
}

#[test]
fn sfe_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = FeatureTensor::from_vec(2, 4, 9, (0..72).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let s = sfe(&x, 3).unwrap();
    assert_eq!((s.channels(), s.frames(), s.bands()), (6, 4, 9));
    for c in 0..2 {
        for l in 0..4 {
            for f in 0..9usize {
                let neighbours = [f.saturating_sub(1), f, (f + 1).min(8usize)];
                for (j, n) in neighbours.iter().enumerate() {
                    assert_eq!(s.get(c * 3 + j, l, f), x.get(c, l, *n));
                }
            }
        }
    }
    let flat = FeatureTensor::from_vec(1, 1, 5, vec![2.0; 5]).unwrap();
    assert!(sfe(&flat, 3).unwrap().data().iter().all(|&v| v == 2.0));
    let mut spike = FeatureTensor::zeros(1, 1, 7);
    spike.set(0, 0, 3, 1.0);
    let s = sfe(&spike, 3).unwrap();
    for f in 0..7 {
        let any = (0..3).any(|j| s.get(j, 0, f) != 0.0);
        assert_eq!(any, (2..=4).contains(&f));
    }
    assert!(sfe(&flat, 2).is_err());
}

#[test]
fn gtconv_dead_branch_passes_first_half() {
    let mut src = Recorder::default();
    let block = GtConv::build(&mut src, "gt", 16, 16, (3, 3), 2, 33).unwrap();
    let x = random_tensor([1, 16, 1, 33], 4);
    let y = block.step(&x, &mut block.state(33)).unwrap();
    let expect = channel_shuffle(&Tensor4::concat_channels(&[&x.narrow_channels(0, 8).unwrap(), &Tensor4::zeros([1, 8, 1, 33])]).unwrap(), 2).unwrap();
    assert_eq!(y, expect);
    assert!(GtConv::build(&mut src, "odd", 15, 16, (3, 3), 1, 33).is_err());
}

fn gt_batch(block: &GtConv, x: &Tensor4) -> Tensor4 {
    let mut st = block.state(x.freq());
    let frames: Vec<Tensor4> = (0..x.time()).map(|t| block.step(&x.narrow_time(t, t + 1).unwrap(), &mut st).unwrap()).collect();
    Tensor4::concat_time(&frames.iter().collect::<Vec<_>>()).unwrap()
}

#[test]
fn gtconv_shape_and_causality() {
    for d in [1, 2, 5] {
        let mut src = RandomInit::new(d as u64);
        let block = GtConv::build(&mut src, "gt", 16, 16, (3, 3), d, 33).unwrap();
        let x = random_tensor([1, 16, 20, 33], 5);
        let y = gt_batch(&block, &x);
        assert_eq!(y.shape(), x.shape());
        let t = 7;
        let mut z = x.clone();
        for f in t + 1..20 {
            for c in 0..16 {
                z.set(0, c, f, 3, 5.0);
            }
        }
        let yz = gt_batch(&block, &z);
        assert_eq!(y.narrow_time(0, t + 1).unwrap(), yz.narrow_time(0, t + 1).unwrap());
        assert_ne!(y, yz);
    }
}

#[test]
fn encoder_trace_and_zero_input() {
    let cfg = preset("id6");
    assert_eq!(cfg.band_trace(129), vec![129, 65, 33]);
    let mut src = ZeroBias(RandomInit::new(9));
    let net = Network::build(&cfg, &mut src).unwrap();
    let z = net.encode(&Tensor4::zeros([1, 18, 5, 129])).unwrap();
    assert_eq!(z.shape(), [1, 16, 5, 33]);
    assert!(z.data().iter().all(|&v| v == 0.0));
    let x = random_tensor([1, 18, 5, 129], 10);
    assert_eq!(net.encode(&x).unwrap().shape(), [1, 16, 5, 33]);
    assert!(net.encode(&random_tensor([1, 18, 5, 128], 10)).is_err());
}

#[test]
fn dual_and_single_latents_match_in_shape() {
    let y = random_spec(2, 4, 11);
    for name in ["id6", "id7"] {
        let net = random_network(name, 12);
        let mut st = net.stream();
        let (crm, trace) = net.step_trace(&mut st, [y.frame(0, 0), y.frame(1, 0)], [y.frame(0, 0), y.frame(1, 0)]).unwrap();
        assert_eq!(trace.encoded.shape(), [1, 16, 1, 33]);
        assert_eq!(crm.shape(), [1, 2, 1, 129]);
    }
}

#[test]
fn gdprnn_identity_and_causality() {
    let cfg = preset("id6");
    let zero = Network::build(&cfg, &mut Recorder::default()).unwrap();
    let x = random_tensor([1, 16, 6, 33], 13);
    assert_eq!(zero.gdprnn(&x).unwrap(), x);

    let net = random_network("id6", 14);
    let y = net.gdprnn(&x).unwrap();
    assert_eq!(y.shape(), x.shape());
    let mut z = x.clone();
    z.set(0, 3, 5, 10, 4.0);
    let yz = net.gdprnn(&z).unwrap();
    assert_eq!(y.narrow_time(0, 5).unwrap(), yz.narrow_time(0, 5).unwrap());
    assert_ne!(y, yz);

    let mut bad = Recorder::default();
    assert!(DprnnBlock::build(&mut bad, "b", 15, 2, 33).is_err());
}

#[test]
fn decoder_range_and_trace() {
    let net = random_network("id6", 15);
    let x = random_tensor([1, 16, 8, 33], 16).map(|v| v * 50.0);
    let m = net.decode(&x).unwrap();
    assert_eq!(m.shape(), [1, 2, 8, 129]);
    assert!(m.data().iter().all(|v| v.abs() < 1.0));
}

#[test]
fn forward_shape_range_determinism() {
    let net = random_network("id6", 17);
    let y = random_spec(2, 12, 18).data().iter().map(|v| v * 30.0).collect::<Vec<_>>();
    let y = ComplexSpectrogram::from_vec(2, 12, 257, y).unwrap();
    let iva = random_spec(2, 12, 19);
    let a = net.forward(&y, &iva).unwrap();
    let b = net.forward(&y, &iva).unwrap();
    assert_eq!((a.frames(), a.bins()), (12, 257));
    assert!(a.re().iter().chain(a.im()).all(|v| v.abs() < 1.0));
    assert_eq!(a, b);
    assert!(net.forward(&y, &random_spec(2, 11, 19)).is_err());
}

#[test]
fn forward_is_causal() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for name in ["id6", "id7", "id1"] {
        let net = random_network(name, 21);
        let y = random_spec(2, 16, 22);
        let iva = random_spec(2, 16, 23);
        let base = net.forward(&y, &iva).unwrap();
        for _ in 0..3 {
            let t = rng.random_range(0..15);
            let (mut y2, mut iva2) = (y.clone(), iva.clone());
            for l in t + 1..16 {
                for k in 0..257 {
                    let v = Complex64::new(rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0));
                    y2.set(rng.random_range(0..2), l, k, v);
                    iva2.set(rng.random_range(0..2), l, k, v * 0.5);
                }
            }
            let pert = net.forward(&y2, &iva2).unwrap();
            for l in 0..=t {
                assert_eq!(base.frame(l), pert.frame(l), "{name}: frame {l} changed (t = {t})");
            }
        }
    }
}

#[test]
fn streaming_matches_batch_bitwise() {
    let net = random_network("id6", 24);
    let y = random_spec(2, 20, 25);
    let iva = random_spec(2, 20, 26);
    let batch = net.forward(&y, &iva).unwrap();
    let mut st = net.stream();
    let (mut re, mut im) = (vec![0.0; 257], vec![0.0; 257]);
    for l in 0..20 {
        net.step(&mut st, [y.frame(0, l), y.frame(1, l)], [iva.frame(0, l), iva.frame(1, l)], &mut re, &mut im).unwrap();
        let (br, bi) = batch.frame(l);
        assert!(re.iter().zip(br).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(im.iter().zip(bi).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
    assert_eq!(st.frames_processed(), 20);
}

#[test]
fn golden_regression() {
    let net = random_network("id6", 2024);
    let y = random_spec(2, 6, 7);
    let iva = random_spec(2, 6, 8);
    let m = net.forward(&y, &iva).unwrap();
    let probe: Vec<f32> = [(0, 0), (1, 10), (2, 100), (3, 200), (5, 256)]
        .iter()
        .flat_map(|&(l, k)| [m.re()[l * 257 + k], m.im()[l * 257 + k]])
        .collect();
    let sum: f64 = m.re().iter().chain(m.im()).map(|&v| v as f64).sum();
    let golden: [f32; 10] = GOLDEN_PROBE;
    for (a, b) in probe.iter().zip(golden) {
        assert!((a - b).abs() < 1e-5, "{probe:?}");
    }
    assert!((sum - GOLDEN_SUM).abs() < 1e-3);
}

const GOLDEN_PROBE: [f32; 10] =
    [0.4707002, 0.26698804, 0.36929345, 0.8229886, 0.56853634, 0.31790552, 0.54264176, 0.3413066, 0.4446215, 0.3146841];
const GOLDEN_SUM: f64 = 1144.1363404249423;

#[test]
fn mask_application() {
    let y = random_spec(2, 3, 27);
    let iva = random_spec(2, 3, 28);
    let ones = ComplexRatioMask::from_planes(3, 257, vec![1.0; 771], vec![0.0; 771]).unwrap();
    let s = apply_mask(&ones, &y, &iva, Masking::Noisy).unwrap();
    assert_eq!(s.channel(0), y.channel(0));
    let s = apply_mask(&ones, &y, &iva, Masking::Iva).unwrap();
    assert_eq!(s.channel(0), iva.channel(0));
    let zero = ComplexRatioMask::zeros(3, 257);
    assert!(apply_mask(&zero, &y, &iva, Masking::Noisy).unwrap().is_all_zero());

    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let re: Vec<f32> = (0..771).map(|_| rng.random_range(-1.0..1.0)).collect();
    let im: Vec<f32> = (0..771).map(|_| rng.random_range(-1.0..1.0)).collect();
    let m = ComplexRatioMask::from_planes(3, 257, re.clone(), im.clone()).unwrap();
    let s = apply_mask(&m, &y, &iva, Masking::Noisy).unwrap();
    for l in 0..3 {
        for k in 0..257 {
            let (mr, mi) = (re[l * 257 + k] as f64, im[l * 257 + k] as f64);
            let t = y.get(0, l, k);
            let want = Complex64::new(mr * t.re - mi * t.im, mr * t.im + mi * t.re);
            assert!((s.get(0, l, k) - want).norm() < 1e-12);
        }
    }
    assert!(apply_mask(&ComplexRatioMask::zeros(2, 257), &y, &iva, Masking::Noisy).is_err());
}

#[test]
fn parameter_budget() {
    let id6 = count_params(&preset("id6")).unwrap();
    let id5 = count_params(&preset("id5")).unwrap();
    assert!((id6 as f64 - 24_390.0).abs() <= 0.15 * 24_390.0, "{id6}");
    assert!(id5 < id6);
    assert_eq!(id6 - id5, 240);
    assert_eq!(count_params(&preset("id3")).unwrap(), id5);
    assert_eq!(count_params(&preset("id4")).unwrap(), id6);
    assert_eq!(count_params(&preset("id1")).unwrap(), id6);
    assert!(count_params(&preset("id7")).unwrap() > id6);
    let mut empty = preset("id6");
    empty.conv_blocks = 0;
    empty.gtconv_dilations.clear();
    empty.dprnn_blocks = 0;
    assert_eq!(count_params(&empty).unwrap(), 0);
    // Running statistics are stored but not counted.
    let w = init_random(&preset("id6"), 1).unwrap();
    assert!(w.numel() > id6);
}

#[test]
fn mac_accounting() {
    let stft = StftConfig::default();
    let cfg = preset("id6");
    let r = mac_report(&cfg, &stft, &IvaConfig::default()).unwrap();
    let per_layer: f64 = r.layers.iter().map(|(_, m)| m).sum();
    assert!((per_layer - r.network).abs() < 1e-6 * r.network);
    assert!((r.total - r.network - r.iva).abs() < 1e-6);
    assert!(r.network > 1e6 && r.network < 1e8);
    assert_eq!(count_macs(&cfg, &stft).unwrap(), r.total);
    let none = mac_report(&cfg, &stft, &IvaConfig { iterations: 0, ..Default::default() }).unwrap();
    assert_eq!(none.total, none.network);
    assert!(count_macs(&preset("id5"), &stft).unwrap() < r.total);
}

#[test]
fn weights_round_trip_and_determinism() {
    let cfg = preset("id7");
    let w = init_random(&cfg, 0xDEAD_BEEF_1234_5678).unwrap();
    let bytes = save_weights(&w);
    assert_eq!(&bytes[..4], b"GTCW");
    assert_eq!(bytes[4], 1);
    let back = load_weights(&bytes).unwrap();
    assert_eq!(back, w);
    assert_eq!(save_weights(&back), bytes);
    assert_eq!(back.meta.seed, Some(0xDEAD_BEEF_1234_5678));
    assert_eq!(init_random(&cfg, 0xDEAD_BEEF_1234_5678).unwrap(), w);
    assert_ne!(init_random(&cfg, 1).unwrap(), w);
}

#[test]
fn weight_format_errors() {
    let cfg = preset("id6");
    let bytes = save_weights(&init_random(&cfg, 3).unwrap());
    for cut in [0, 3, 9, bytes.len() / 2, bytes.len() - 1] {
        assert!(matches!(load_weights(&bytes[..cut]), Err(Error::Format(_))), "cut {cut}");
    }
    let mut flipped = bytes.clone();
    flipped[100] ^= 1;
    assert!(matches!(load_weights(&flipped), Err(Error::Format(m)) if m.contains("CRC")));
    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(load_weights(&magic).is_err());
}

#[test]
fn weights_must_match_config() {
    let id1 = init_random(&preset("id1"), 4).unwrap();
    let err = Network::new(&preset("id2"), &id1).unwrap_err();
    assert!(matches!(err, Error::Format(_)));

    let id5 = init_random(&preset("id5"), 4).unwrap();
    let mut anon = id5.clone();
    anon.meta = WeightMeta::default();
    let err = Network::new(&preset("id6"), &anon).unwrap_err().to_string();
    assert!(err.contains("enc.conv1.conv.weight"), "{err}");

    let mut tensors = id5.tensors().clone();
    tensors.insert("stray".into(), WeightTensor { shape: vec![1], data: vec![0.0] });
    let extra = ModelWeights::new(tensors, id5.meta).unwrap();
    assert!(Network::new(&preset("id5"), &extra).unwrap_err().to_string().contains("stray"));

    let mut tensors = id5.tensors().clone();
    tensors.shift_remove("dprnn1.inter.ln.beta");
    let missing = ModelWeights::new(tensors, id5.meta).unwrap();
    assert!(Network::new(&preset("id5"), &missing).unwrap_err().to_string().contains("dprnn1.inter.ln.beta"));
    assert!(Network::new(&preset("id5"), &id5).is_ok());
}

#[test]
fn presets_parse_and_display() {
    for n in PRESET_NAMES {
        let cfg: ModelConfig = n.parse().unwrap();
        assert_eq!(cfg.preset_name(), Some(n));
        assert!(cfg.to_string().contains(n));
    }
    assert!("id8".parse::<ModelConfig>().is_err());
    let p = preset("id6");
    assert_eq!((p.gtconv_dilations.clone(), p.conv_kernel, p.conv_stride), (vec![1, 2, 5], (1, 5), (1, 2)));
}
