mod common;

use std::sync::LazyLock;

use proptest::prelude::*;
use qbc_core::adversary::*;
use qbc_core::constants::HBAR;
use qbc_core::engine::Slit;
use qbc_core::protocol::*;
use qbc_core::rng::{session_seed, substream, Domain};
use qbc_core::session::*;
use qbc_core::verifier::{calibrate_quantiles, QuantileTable, RejectionReason, TestName};
use qbc_core::QbcError;

fn apparatus(n: usize, alpha: Option<f64>) -> Apparatus {
    Apparatus::build(&ProtocolConfig { n_trials: n, alpha_override: alpha, ..Default::default() }).unwrap()
}

static SMALL: LazyLock<Apparatus> = LazyLock::new(|| apparatus(40, None));
static SMALL_TABLE: LazyLock<QuantileTable> = LazyLock::new(|| calibrate_quantiles(&SMALL, 4000, 5).unwrap());

fn flip(committed: Bit, rule: GuessRule) -> AliceStrategy {
    AliceStrategy::Adversary(AdversaryStrategy::BitFlipGuess { committed, unveiled: committed.flipped(), rule })
}

#[test]
fn invalid_strategies() {
    let a = &*SMALL;
    let key = SessionKey::new(1);
    let (setups, _) = bob_prepare_trials(a.config(), &key);
    let same = cheat_bitflip(Bit::One, Bit::One, GuessRule::Coin, &setups, a, &key);
    assert!(matches!(same, Err(QbcError::InvalidParams(_))));
    let early = cheat_delayed(a.config().t1(), Bit::Zero, 1.0, &setups, a, &key);
    assert!(matches!(early, Err(QbcError::InvalidParams(_))));
    let fraction = cheat_delayed(2.0, Bit::Zero, 1.5, &setups, a, &key);
    assert!(matches!(fraction, Err(QbcError::InvalidParams(_))));
}

#[test]
fn coin_guessing_passes_each_single_slit_check_with_probability_half() {
    // αN = 20 single-slit detections would leave 2^-10.
    assert_eq!(0.5f64.powi(10), 9.765625e-4);
    let a = apparatus(24, Some(0.5));
    let runner = SessionRunner::new(&a, flip(Bit::One, GuessRule::Coin), None).unwrap();
    let sessions = 6000;
    let mut accepted = 0usize;
    let mut expected = 0.0;
    let mut var = 0.0;
    for i in 0..sessions {
        let r = runner.run(&SessionKey::new(session_seed(12, i))).unwrap();
        let cs = r.report.conditional_success.unwrap();
        if r.verdict.passes_except(&[TestName::SlitConsistency]) {
            assert_eq!(cs, 0.5f64.powi(r.report.single_slit_detections as i32));
        } else {
            assert_eq!(cs, 0.0);
        }
        accepted += r.report.accept as usize;
        expected += cs;
        var += cs * (1.0 - cs);
    }
    // direct acceptance frequency against the summed per-session probabilities
    let diff = accepted as f64 - expected;
    assert!(diff.abs() < 4.0 * var.sqrt(), "{accepted} accepted vs {expected}");
}

#[test]
fn guess_accuracy_matches_simulation() {
    let a = &*SMALL;
    assert_eq!(GuessRule::Coin.accuracy(a, Slit::Left), 0.5);
    let n = 100_000;
    for (choice, open) in [(SlitChoice::LeftOnly, Slit::Left), (SlitChoice::RightOnly, Slit::Right)] {
        let sampler = a.screen_pattern(choice).unwrap().sampler().unwrap();
        let ml = GuessRule::MaximumLikelihood.accuracy(a, open);
        let sign = GuessRule::Sign.accuracy(a, open);
        assert!(ml >= sign && sign > 0.5, "{ml} {sign}");
        for (rule, p) in [(GuessRule::MaximumLikelihood, ml), (GuessRule::Sign, sign)] {
            let mut rng = substream(8, Domain::Adversary, 0);
            let hits = (0..n).filter(|_| rule.guess(a, sampler.sample(&mut rng), &mut rng) == open).count() as f64;
            let sd = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((hits - n as f64 * p).abs() < 4.0 * sd, "{rule:?}: {hits} vs {}", n as f64 * p);
        }
    }
}

#[test]
fn envelope_fabrication_is_caught() {
    let a = apparatus(200, Some(0.5));
    let table = calibrate_quantiles(&a, 4000, 9).unwrap();
    let runner = SessionRunner::new(&a, flip(Bit::Zero, GuessRule::MaximumLikelihood), Some(&table)).unwrap();
    let rejected = (0..200)
        .map(|i| runner.run(&SessionKey::new(session_seed(2, i))).unwrap())
        .filter(|o| o.verdict.rejection_reason == Some(RejectionReason::PatternMismatch))
        .count();
    assert!(rejected >= 190, "{rejected}");
}

#[test]
fn delayed_measurement_loses_decayed_neutrons() {
    let a = apparatus(100, None);
    let tau = a.config().tau;
    let cheat = DelayedCheat::new(&a, tau, Bit::Zero, 1.0).unwrap();
    let (mut announced, mut supported) = (0usize, 0usize);
    let (mut single, mut wrong) = (0usize, 0usize);
    for i in 0..400 {
        let key = SessionKey::new(session_seed(4, i));
        let (setups, sealed) = bob_prepare_trials(a.config(), &key);
        let (_, unveil, report) = cheat.run(&setups, &key).unwrap();
        announced += report.announced;
        supported += report.supported;
        for e in &unveil.data {
            let open = match sealed.choices()[e.trial_id as usize] {
                SlitChoice::LeftOnly => Slit::Left,
                SlitChoice::RightOnly => Slit::Right,
                SlitChoice::Both => continue,
            };
            single += 1;
            wrong += (e.datum != Revealed::Slit { slit: open }) as usize;
        }
    }
    let missing = 1.0 - supported as f64 / announced as f64;
    let p = 1.0 - (-1.0f64).exp();
    let sd = (p * (1.0 - p) / announced as f64).sqrt();
    assert!((missing - p).abs() < 3.0 * sd, "{missing} over {announced}");
    let sd = (0.25 / single as f64).sqrt();
    assert!((wrong as f64 / single as f64 - 0.5).abs() < 4.0 * sd, "{wrong}/{single}");
}

#[test]
fn delayed_measurement_is_rejected_past_one_lifetime() {
    let a = apparatus(100, None);
    let table = calibrate_quantiles(&a, 4000, 3).unwrap();
    for unveiled in [Bit::Zero, Bit::One] {
        let strategy = AliceStrategy::Adversary(AdversaryStrategy::DelayedMeasurement {
            measure_time: a.config().tau,
            unveiled,
            announce_fraction: 1.0,
        });
        let runner = SessionRunner::new(&a, strategy, Some(&table)).unwrap();
        for i in 0..200 {
            let o = runner.run(&SessionKey::new(session_seed(6, i))).unwrap();
            assert!(!o.verdict.accept);
            let d = o.report.delayed.unwrap();
            if d.announced > 0 {
                assert_eq!(o.verdict.rejection_reason, Some(RejectionReason::MissingData));
            }
            if unveiled == Bit::One {
                // positions spread far past the t1 screen
                assert!(d.width_ratio > 1e3);
            }
        }
    }
}

#[test]
fn width_ratio_matches_free_spreading() {
    // Soft edges keep ⟨p²⟩ finite so the moment oracle converges; a huge
    // lifetime keeps the late measurement inside the guard.
    let config = ProtocolConfig { edge_softness: 1e-5, tau: 1e9, commit_end: 1e8, unveil_time: 1e9, ..Default::default() };
    let a = Apparatus::build(&config).unwrap();
    let field = a.slit_field(SlitChoice::Both).unwrap();
    let hm = HBAR / config.mass();
    let flight = config.t1() - config.t0;
    // just past t1 the late pattern is evolved on the grid; far later it
    // comes from the momentum map
    for t_m in [config.t1() + 0.01 * flight, config.t1() + 0.05 * flight, 10.0, 885.7] {
        let cheat = DelayedCheat::new(&a, t_m, Bit::One, 1.0).unwrap();
        let key = SessionKey::new(1);
        let report = cheat.run(&bob_prepare_trials(&config, &key).0, &key).unwrap().2;
        let want = common::free_width_from_moments(field, hm, t_m - config.t0)
            / common::free_width_from_moments(field, hm, flight);
        assert!((report.width_ratio / want - 1.0).abs() < 5e-3, "{} vs {want}", report.width_ratio);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn cheating_transcripts_look_honest(seed in any::<u64>(), which in 0usize..4) {
        let a = &*SMALL;
        let strategy = match which {
            0 => flip(Bit::Zero, GuessRule::MaximumLikelihood),
            1 => flip(Bit::One, GuessRule::Sign),
            2 => AliceStrategy::Adversary(AdversaryStrategy::DelayedMeasurement {
                measure_time: a.config().tau, unveiled: Bit::One, announce_fraction: 1.0 }),
            _ => AliceStrategy::Adversary(AdversaryStrategy::DelayedMeasurement {
                measure_time: 0.5, unveiled: Bit::Zero, announce_fraction: 0.5 }),
        };
        let key = SessionKey::new(seed);
        let cheat = run_session(strategy, a, &key, Some(&SMALL_TABLE)).unwrap();
        let honest = run_session(AliceStrategy::Honest { bit: Bit::Zero }, a, &key, Some(&SMALL_TABLE)).unwrap();
        let shape = |t: &CommitTranscript| common::field_names(&serde_json::from_str(&t.to_json().unwrap()).unwrap());
        prop_assert_eq!(shape(&cheat.transcript), shape(&honest.transcript));
        prop_assert_eq!(cheat.transcript.n_trials, honest.transcript.n_trials);
    }
}
