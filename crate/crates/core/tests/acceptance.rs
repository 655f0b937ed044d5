//! End-to-end acceptance checks. Prints one line per criterion and exits
//! non-zero if any fails.

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use spikegram::adaptation::{backward_path, make_synthetic_corpus, train, GradientPath, TrainConfig};
use spikegram::audio_io::prepare;
use spikegram::filterbank::{synthesize, synthesize_with_grads};
use spikegram::lca::{hard_threshold, step, LcaState};
use spikegram::metrics::{
    box_stats, evaluate_corpus, inhibition_matrix, iterations_to_reach, max_off_adjacent, mean_off_adjacent,
    Evaluation, NamedSignal,
};
use spikegram::{
    encode, encode_traced, ChannelParams, Filterbank, FilterbankConfig, GramTable, LcaConfig, Preset,
    StridedDictionary,
};

const TRAIN_CLIPS: usize = 32;
const HELD_OUT_CLIPS: usize = 16;
const CLIP_SECONDS: f64 = 0.25;
const TRAIN_SEED: u64 = 1;
const HELD_OUT_SEED: u64 = 2;
/// Adam step size for the 8-update desk run; see README.
const DESK_LEARNING_RATE: f64 = 0.125;
const LONG_TRACE: usize = 2048;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, elapsed: Duration, outcome: &Outcome) {
    println!(
        "criterion {id} {:<4} {name} [{:.1} s]: {}",
        if outcome.pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        outcome.detail
    );
}

fn dense_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    let instances = 24;
    for case in 0..instances {
        let (k, fl, r, t) = random_shape(&mut rng);
        let filters = random_filters(&mut rng, k, fl);
        let d = StridedDictionary::new(filters.clone(), r, t).unwrap();
        let dense = DenseDict::build(&filters, r, t);
        let gram = d.gram();
        let s = random_vec(&mut rng, t);
        let x = random_vec(&mut rng, d.num_atoms());
        let a: Vec<f64> = x.iter().map(|v| if rng.gen_bool(0.3) { *v } else { 0.0 }).collect();
        let active: Vec<(usize, f64)> =
            a.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(m, v)| (m, *v)).collect();
        worst = worst.max(max_abs_diff(&d.analyze(&s).unwrap(), &dense.apply_t(&s)));
        worst = worst.max(max_abs_diff(&d.synthesize_signal(&x).unwrap(), &dense.apply(&x)));
        worst = worst.max(max_abs_diff(&d.inhibit(&gram, &active).unwrap(), &dense.inhibit(&a)));
        let peak = d.analyze(&s).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lca = LcaConfig {
            tau: 0.01,
            dt: if case % 2 == 0 { 1e-4 } else { 1e-3 },
            num_iters: 64,
            threshold: 0.2 * peak,
        };
        let (result, trace) = encode_traced(&s, &d, &gram, &lca).unwrap();
        let (u, a_ref) = dense.lca(&s, &lca, 64);
        worst = worst.max(max_abs_diff(&trace.final_potentials, &u));
        worst = worst.max(max_abs_diff(&result.coefficients, &a_ref));
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: worst < 1e-9 && secs < 10.0,
        detail: format!("{instances} instances, max deviation {worst:.2e} (< 1e-9), {secs:.2} s (< 10 s)"),
    }
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let h = 1e-6;

    let fb_cfg = FilterbankConfig {
        num_channels: 1,
        filter_len: 256,
        stride: 10,
        sample_rate_hz: 16_000.0,
        freq_min_hz: 200.0,
        freq_max_hz: 4000.0,
    };
    let mut worst_partial = 0.0f64;
    for _ in 0..20 {
        let p = ChannelParams::new(
            rng.gen_range(200.0..4000.0),
            rng.gen_range(2.0..6.0),
            rng.gen_range(0.5..2.0),
            rng.gen_range(-2.0..2.0),
        );
        let g = synthesize_with_grads(&p, &fb_cfg).unwrap();
        let bumps: [(fn(&mut ChannelParams, f64), &Vec<f64>); 3] = [
            (|p, d| p.chirp += d, &g.d_chirp),
            (|p, d| p.bandwidth_scale += d, &g.d_bandwidth),
            (|p, d| p.order += d, &g.d_order),
        ];
        for (bump, analytic) in bumps {
            let (mut plus, mut minus) = (p, p);
            bump(&mut plus, h);
            bump(&mut minus, -h);
            let (a, b) = (synthesize(&plus, &fb_cfg).unwrap(), synthesize(&minus, &fb_cfg).unwrap());
            let fd: Vec<f64> = a.samples.iter().zip(&b.samples).map(|(x, y)| (x - y) / (2.0 * h)).collect();
            worst_partial = worst_partial.max(rel_l2(analytic, &fd));
        }
    }

    let tiny = FilterbankConfig {
        num_channels: 3,
        filter_len: 32,
        stride: 4,
        sample_rate_hz: 8000.0,
        freq_min_hz: 400.0,
        freq_max_hz: 2000.0,
    };
    let recon_loss = |bank: &Filterbank, s: &[f64], lca: &LcaConfig| {
        let d = StridedDictionary::new(bank.filters().unwrap(), 4, s.len()).unwrap();
        0.5 * encode(s, &d, &d.gram(), lca).unwrap().mse * s.len() as f64
    };
    let mut worst_backward = 0.0f64;
    for _ in 0..10 {
        let channels = [600.0, 1100.0, 1900.0]
            .iter()
            .map(|&f| {
                ChannelParams::new(
                    f * rng.gen_range(0.9..1.1),
                    rng.gen_range(2.5..5.0),
                    rng.gen_range(0.7..1.6),
                    rng.gen_range(-1.5..1.5),
                )
            })
            .collect();
        let bank = Filterbank::new(tiny, channels).unwrap();
        let s = random_vec(&mut rng, 64);
        let d = StridedDictionary::new(bank.filters().unwrap(), 4, 64).unwrap();
        let gram = d.gram();
        let peak = d.analyze(&s).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lca = LcaConfig {
            tau: 0.01,
            dt: 0.002,
            num_iters: 8,
            threshold: 0.3 * peak,
        };
        let (_, trace) = encode_traced(&s, &d, &gram, &lca).unwrap();
        let analytic = backward_path(
            &s,
            &trace,
            &d,
            &gram,
            &bank.filters_with_grads().unwrap(),
            &lca,
            GradientPath::Reconstruction,
        )
        .unwrap()
        .to_flat();
        let mut numeric = Vec::new();
        for ch in 0..3 {
            let bumps: [fn(&mut ChannelParams, f64); 3] =
                [|p, d| p.chirp += d, |p, d| p.bandwidth_scale += d, |p, d| p.order += d];
            for bump in bumps {
                let (mut plus, mut minus) = (bank.clone(), bank.clone());
                bump(&mut plus.channels[ch], h);
                bump(&mut minus.channels[ch], -h);
                numeric.push((recon_loss(&plus, &s, &lca) - recon_loss(&minus, &s, &lca)) / (2.0 * h));
            }
        }
        worst_backward = worst_backward.max(rel_l2(&analytic, &numeric));
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: worst_backward < 1e-3 && worst_partial < 1e-5 && secs < 60.0,
        detail: format!(
            "backward rel err {worst_backward:.2e} (< 1e-3, 10 instances, 8 iterations); \
             filter partial rel err {worst_partial:.2e} (< 1e-5); {secs:.2} s (< 60 s)"
        ),
    }
}

fn gammatone_identity() -> Outcome {
    let cfg = FilterbankConfig::default();
    let bank = Filterbank::from_preset(cfg, Preset::Gammatone).unwrap();
    let filters = bank.filters().unwrap();
    let mut worst = 0.0f64;
    for (i, ch) in bank.channels.iter().enumerate() {
        let f = ch.center_freq_hz;
        let raw: Vec<f64> = (1..=cfg.filter_len)
            .map(|n| {
                let t = n as f64 / cfg.sample_rate_hz;
                t.powi(3)
                    * (-2.0 * std::f64::consts::PI * (24.7 + 0.108 * f) * t).exp()
                    * (2.0 * std::f64::consts::PI * f * t).cos()
            })
            .collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let reference: Vec<f64> = raw.iter().map(|v| v / norm).collect();
        worst = worst.max(max_abs_diff(filters.filter(i), &reference));
    }
    Outcome {
        pass: worst < 1e-12,
        detail: format!("16 channels, max per-sample deviation {worst:.2e} (< 1e-12)"),
    }
}

struct Desk {
    gt: Filterbank,
    trained: Filterbank,
    held_out: Vec<NamedSignal>,
    lca: LcaConfig,
    eval: Evaluation,
}

fn corpus(count: usize, seed: u64, cfg: &FilterbankConfig) -> Vec<Vec<f64>> {
    make_synthetic_corpus(count, seed, cfg.sample_rate_hz, CLIP_SECONDS)
        .unwrap()
        .iter()
        .map(|s| prepare(s, cfg.filter_len, cfg.stride).unwrap())
        .collect()
}

fn desk_run(learning_rate: f64) -> Desk {
    let cfg = FilterbankConfig::default();
    let lca = LcaConfig::default();
    let gt = Filterbank::from_preset(cfg, Preset::Gammatone).unwrap();
    let config = TrainConfig {
        learning_rate,
        num_epochs: 2,
        ..TrainConfig::default()
    };
    let trained = train(&corpus(TRAIN_CLIPS, TRAIN_SEED, &cfg), &gt, &lca, &config)
        .unwrap()
        .filterbank;
    let held_out: Vec<NamedSignal> = corpus(HELD_OUT_CLIPS, HELD_OUT_SEED, &cfg)
        .into_iter()
        .enumerate()
        .map(|(i, samples)| NamedSignal {
            name: format!("held_out_{i:02}"),
            samples,
        })
        .collect();
    let eval = evaluate_corpus(
        &[("gt".into(), gt.clone()), ("trained".into(), trained.clone())],
        &held_out,
        &lca,
    )
    .unwrap();
    Desk {
        gt,
        trained,
        held_out,
        lca,
        eval,
    }
}

fn medians(desk: &Desk) -> String {
    let (g, t) = (&desk.eval.summary["gt"], &desk.eval.summary["trained"]);
    format!(
        "median spikes {} vs GT {}, median MSE {:.4e} vs GT {:.4e}",
        t.spikes.median, g.spikes.median, t.mse.median, g.mse.median
    )
}

fn spike_and_mse_direction(desk: &Desk) -> Outcome {
    let (g, t) = (&desk.eval.summary["gt"], &desk.eval.summary["trained"]);
    Outcome {
        pass: t.spikes.median <= g.spikes.median && t.mse.median <= g.mse.median && g.failures == 0,
        detail: medians(desk),
    }
}

/// Per clip: (iterations GT needs for its own 64-iteration MSE, iterations the trained dictionary needs).
fn convergence(desk: &Desk) -> Vec<(usize, Option<usize>)> {
    let long = LcaConfig {
        num_iters: LONG_TRACE,
        ..desk.lca
    };
    let stride = desk.gt.config.stride;
    let prepared = |bank: &Filterbank| {
        let filters = Arc::new(bank.filters().unwrap());
        let gram = GramTable::new(&filters, stride);
        (filters, gram)
    };
    let (gt_filters, gt_gram) = prepared(&desk.gt);
    let (tr_filters, tr_gram) = prepared(&desk.trained);
    desk.held_out
        .par_iter()
        .map(|clip| {
            let len = clip.samples.len();
            let gt_dict = StridedDictionary::new(gt_filters.clone(), stride, len).unwrap();
            let tr_dict = StridedDictionary::new(tr_filters.clone(), stride, len).unwrap();
            let gt_trace = encode(&clip.samples, &gt_dict, &gt_gram, &long).unwrap().mse_trace;
            let tr_trace = encode(&clip.samples, &tr_dict, &tr_gram, &long).unwrap().mse_trace;
            let target = gt_trace[desk.lca.num_iters - 1];
            let gt_iters = iterations_to_reach(&gt_trace, target).expect("reached by construction");
            (gt_iters, iterations_to_reach(&tr_trace, target))
        })
        .collect()
}

fn convergence_summary(per_clip: &[(usize, Option<usize>)]) -> (f64, String) {
    let faster = per_clip
        .iter()
        .filter(|(g, t)| t.is_some_and(|t| t < *g))
        .count();
    let fraction = faster as f64 / per_clip.len() as f64;
    let speedups: Vec<f64> = per_clip
        .iter()
        .map(|(g, t)| *g as f64 / t.unwrap_or(LONG_TRACE + 1) as f64)
        .collect();
    let median_speedup = box_stats(&speedups).unwrap().median;
    (
        fraction,
        format!(
            "{faster}/{} clips faster ({:.1} %, need >= 80 %), median speedup {median_speedup:.2}x",
            per_clip.len(),
            100.0 * fraction
        ),
    )
}

fn off_adjacent_growth(desk: &Desk) -> Outcome {
    let stride = desk.gt.config.stride;
    let before = inhibition_matrix(&GramTable::new(&desk.gt.filters().unwrap(), stride));
    let after = inhibition_matrix(&GramTable::new(&desk.trained.filters().unwrap(), stride));
    let (gt_max, gt_mean, tr_mean) = (
        max_off_adjacent(&before),
        mean_off_adjacent(&before),
        mean_off_adjacent(&after),
    );
    Outcome {
        pass: gt_max < 0.05 && tr_mean > gt_mean,
        detail: format!(
            "GT max off-adjacent {gt_max:.4} (< 0.05); mean off-adjacent {gt_mean:.5} -> {tr_mean:.5} after training"
        ),
    }
}

fn properties() -> Outcome {
    let cases = 128;
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut failures = Vec::new();
    let (mut adjoint, mut threshold, mut descent, mut descent_cases, mut boxes, mut determinism) =
        (0, 0, 0, 0, 0, 0);
    for _ in 0..cases {
        let (k, fl, r, t) = random_shape(&mut rng);
        let d = StridedDictionary::new(random_filters(&mut rng, k, fl), r, t).unwrap();
        let gram = d.gram();
        let s = random_vec(&mut rng, t);
        let y = random_vec(&mut rng, d.num_atoms());
        let p = d.analyze(&s).unwrap();
        let lhs: f64 = p.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = s.iter().zip(&d.synthesize_signal(&y).unwrap()).map(|(a, b)| a * b).sum();
        adjoint += usize::from((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));

        let peak = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lca = LcaConfig {
            tau: 0.01,
            dt: rng.gen_range(5e-4..2e-3),
            num_iters: 64,
            threshold: rng.gen_range(0.05..0.6) * peak,
        };
        let mut state = LcaState::rest(d.num_atoms());
        let mut consistent = true;
        for _ in 0..8 {
            state = step(&state, &p, &d, &gram, &lca).unwrap();
            consistent &= state
                .potentials
                .iter()
                .zip(&state.activations)
                .all(|(u, a)| *a == hard_threshold(*u, lca.threshold));
        }
        threshold += usize::from(consistent);

        let first = encode(&s, &d, &gram, &lca).unwrap();
        if first.spike_count > 0 {
            descent_cases += 1;
            descent += usize::from(first.energy_trace[63] < first.energy_trace[0]);
        }
        determinism += usize::from(first == encode(&s, &d, &gram, &lca).unwrap());

        let n = rng.gen_range(1..40);
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect();
        let b = box_stats(&values).unwrap();
        boxes += usize::from(b.lo_whisker <= b.q1 && b.q1 <= b.median && b.median <= b.q3 && b.q3 <= b.hi_whisker);
    }
    for (name, ok, total) in [
        ("adjointness", adjoint, cases),
        ("threshold consistency", threshold, cases),
        ("energy descent", descent, descent_cases),
        ("BoxStats ordering", boxes, cases),
        ("determinism", determinism, cases),
    ] {
        if ok != total {
            failures.push(format!("{name} {ok}/{total}"));
        }
    }
    Outcome {
        pass: failures.is_empty() && descent_cases >= 100,
        detail: if failures.is_empty() {
            format!("{cases} random cases each ({descent_cases} with spikes for descent); proptest suite in tests/properties.rs")
        } else {
            failures.join(", ")
        },
    }
}

fn main() {
    let mut all_pass = true;
    let mut run = |id: usize, name: &str, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        report(id, name, start.elapsed(), &outcome);
        all_pass &= outcome.pass;
    };
    run(1, "dense-oracle equivalence", &dense_oracle);
    run(2, "gradient correctness", &gradients);
    run(3, "gammatone identity", &gammatone_identity);

    let start = Instant::now();
    let desk = desk_run(DESK_LEARNING_RATE);
    let train_time = start.elapsed();
    run(4, "spike count and MSE direction", &|| {
        let mut o = spike_and_mse_direction(&desk);
        o.detail = format!("{} (lr {DESK_LEARNING_RATE}, train+eval {:.1} s)", o.detail, train_time.as_secs_f64());
        o
    });
    run(5, "convergence direction", &|| {
        let (fraction, detail) = convergence_summary(&convergence(&desk));
        Outcome {
            pass: fraction >= 0.8,
            detail,
        }
    });
    run(6, "inhibition pattern", &|| off_adjacent_growth(&desk));
    run(7, "property suites", &properties);

    // same protocol at the default step size, reported for reference only
    let reference = desk_run(TrainConfig::default().learning_rate);
    let (_, conv) = convergence_summary(&convergence(&reference));
    println!(
        "info: lr {} -> {}; {conv}; mean off-adjacent {:.5}",
        TrainConfig::default().learning_rate,
        medians(&reference),
        mean_off_adjacent(&inhibition_matrix(&GramTable::new(
            &reference.trained.filters().unwrap(),
            reference.trained.config.stride
        )))
    );

    if !all_pass {
        std::process::exit(1);
    }
}
