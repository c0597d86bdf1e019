use std::fs;
use std::path::Path;

use downscaler_core::dataset::*;
use downscaler_core::imageio::to_u8;
use downscaler_core::swe::csf::{run_to_csf, CsfDir};
use downscaler_core::swe::{BasinSpec, SimConfig};
use proptest::prelude::*;

fn small() -> SimConfig {
    SimConfig {
        nx: 16,
        ny: 16,
        dx: 625.0,
        dy: 625.0,
        t_end: 2400.0,
        ..SimConfig::tidal_bay_coarse()
    }
}

fn simulate(root: &Path, basin: &BasinSpec) {
    let c = small();
    run_to_csf(&c, basin, 0, &root.join("coarse")).unwrap();
    run_to_csf(&c.refined(), basin, 0, &root.join("fine")).unwrap();
}

fn opts(seed: u64) -> DatasetOptions {
    DatasetOptions {
        patch_size: 16,
        seed,
        ..Default::default()
    }
}

#[test]
fn dataset_from_simulations() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    simulate(root, &BasinSpec::tidal_bay());
    let coarse = CsfDir::open(&root.join("coarse")).unwrap();
    let fine = CsfDir::open(&root.join("fine")).unwrap();
    let f = coarse.meta.n_frames;
    assert_eq!(fine.meta.n_frames, 2 * f - 1);

    let m = make_dataset(&root.join("coarse"), &root.join("fine"), &root.join("d1"), &opts(4)).unwrap();
    assert_eq!(m.samples.len(), f - 1);
    assert_eq!((m.train.len(), m.val.len(), m.test.len()), (7, 2, 3));
    let mut ids: Vec<&String> = m.train.iter().chain(&m.val).chain(&m.test).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), f - 1);

    // same seed, same manifest; a different seed reshuffles the splits
    make_dataset(&root.join("coarse"), &root.join("fine"), &root.join("d2"), &opts(4)).unwrap();
    assert_eq!(
        fs::read(root.join("d1/manifest.json")).unwrap(),
        fs::read(root.join("d2/manifest.json")).unwrap()
    );
    let other = make_dataset(&root.join("coarse"), &root.join("fine"), &root.join("d3"), &opts(5)).unwrap();
    assert_ne!(other.train, m.train);

    // stored samples equal freshly built pairs, with consistent timestamps
    let ds = Dataset::open(&root.join("d1")).unwrap();
    let pairs = build_pairs(&coarse, &fine, (16, 16), &m.norm_ranges).unwrap();
    for info in &m.samples {
        let s = ds.load_sample(&info.id).unwrap();
        let p = pairs.iter().find(|p| p.id == info.id).unwrap();
        assert_eq!(&s, p);
        let k = s.coarse_index;
        assert_eq!(s.fine_index, 2 * k);
        assert_eq!(s.t, [coarse.meta.frame_times[k], coarse.meta.frame_times[k + 1]]);
        assert_eq!(fine.meta.frame_times[2 * k + 1] * 2.0, s.t[0] + s.t[1]);
        assert!(s.lr.iter().chain(&s.hr).all(|v| (0.0..=1.0).contains(v)));
    }
    assert_eq!(ds.load(Split::Test).unwrap().len(), 3);
    assert!(ds.load_sample("999999").is_err());
}

#[test]
fn eight_bit_export_round_trip_is_within_one_level() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path(), &BasinSpec::from_name("island-bay").unwrap());
    let coarse = CsfDir::open(&tmp.path().join("coarse")).unwrap();
    let states: Vec<_> = (0..coarse.meta.n_frames).map(|k| coarse.frame(k).unwrap()).collect();
    let norm = NormRanges::fit(&states).unwrap();
    let state = &states[5];
    let img = render(state, (16, 16), &norm).unwrap();
    assert!(img.mask.iter().any(|m| !m), "island should mask some pixels");
    let hw = 16 * 16;
    let fields = [&state.u, &state.v, &state.xi];
    for c in 0..CHANNELS {
        let [lo, hi] = norm.0[c];
        for p in 0..hw {
            if !img.mask[p] {
                assert_eq!(img.data[c * hw + p], 0.0);
                continue;
            }
            let q = to_u8(img.data[c * hw + p]) as f64 / 255.0;
            let back = norm.denormalize(c, q);
            assert!((back - fields[c][p]).abs() <= (hi - lo) / 255.0, "channel {c} pixel {p}");
        }
    }
}

fn arb_sample() -> impl Strategy<Value = SamplePair> {
    let n = 4usize;
    (
        prop::collection::vec(0.0f32..1.0, 2 * 3 * n * n),
        prop::collection::vec(0.0f32..1.0, 3 * 3 * n * n),
        prop::collection::vec(any::<bool>(), n * n),
    )
        .prop_map(move |(lr, hr, mask)| SamplePair {
            id: "000000".into(),
            height: n,
            width: n,
            lr,
            hr,
            mask,
            coarse_index: 0,
            fine_index: 0,
            t: [0.0, 1.0],
        })
}

fn close(a: &SamplePair, b: &SamplePair) -> bool {
    a.mask == b.mask
        && a.lr.iter().chain(&a.hr).zip(b.lr.iter().chain(&b.hr)).all(|(x, y)| (x - y).abs() <= 1e-6)
}

proptest! {
    #[test]
    fn every_augmentation_is_invertible(
        s in arb_sample(),
        hflip: bool,
        vflip: bool,
        turns in 0u8..4,
        reverse: bool,
    ) {
        let a = Augmentation { hflip, vflip, quarter_turns: turns, reverse };
        let mut back = a.apply(&s).unwrap();
        for step in [
            Augmentation { reverse, ..Default::default() },
            Augmentation { quarter_turns: (4 - turns) % 4, ..Default::default() },
            Augmentation { vflip, ..Default::default() },
            Augmentation { hflip, ..Default::default() },
        ] {
            back = step.apply(&back).unwrap();
        }
        prop_assert!(close(&back, &s));
    }
}
