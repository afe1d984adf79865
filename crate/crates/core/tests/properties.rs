use std::f64::consts::{PI, TAU};
use std::io::Cursor;

use proptest::prelude::*;
use stripefit::dsp::{butter_lowpass, filtfilt};
use stripefit::model_io::{parse_trials, rotate_to_bisector, write_trials, Frame, Point, TrialFormat, TrialSet};
use stripefit::optim::{grid_search, simulated_annealing, Axis, Bounds, SaSchedule, SearchBox};
use stripefit::patternfit::{fit_frame, FitConfig, Optimizer, Strategy as FitStrategy};
use stripefit::stats::{one_sample_ttest, one_way_anova, reg_inc_beta, student_t_two_sided};
use stripefit::synth::{generate_crossing_trial, generate_striped_frame, CrossingSpec, StripeSpec};
use stripefit::waveform::{eval_wave, objective, WaveKind, WaveParams};

fn point() -> impl Strategy<Value = Point> {
    (-20.0..20.0f64, -20.0..20.0f64).prop_map(|(x, y)| Point::new(x, y))
}

fn frame() -> impl Strategy<Value = Frame> {
    (prop::collection::vec(point(), 1..30), prop::collection::vec(point(), 1..30))
        .prop_map(|(g1, g2)| Frame::new(0.0, g1, g2))
}

fn params() -> impl Strategy<Value = WaveParams> {
    (0.0..180.0f64, 0.5..10.0f64, 0.0..TAU).prop_map(|(g, l, p)| WaveParams::new(g, l, p))
}

fn wave() -> impl Strategy<Value = WaveKind> {
    prop_oneof![Just(WaveKind::Sine), Just(WaveKind::Square)]
}

fn shifted(frame: &Frame, d: Point) -> Frame {
    frame.map_points(|p| p + d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn wave_and_objective_are_bounded(f in frame(), w in wave(), q in params(), p in point()) {
        prop_assert!(eval_wave(w, p, q).abs() <= 1.0);
        let c = objective(w, &f, q).unwrap();
        prop_assert!((-2.0..=2.0).contains(&c));
    }

    #[test]
    fn swapping_groups_negates(f in frame(), w in wave(), q in params()) {
        prop_assert_eq!(objective(w, &f.swapped(), q).unwrap(), -objective(w, &f, q).unwrap());
    }

    #[test]
    fn shift_along_stripes_is_invisible(f in frame(), q in params(), s in -10.0..10.0f64) {
        let moved = shifted(&f, q.stripe_direction() * s);
        let d = objective(WaveKind::Sine, &moved, q).unwrap() - objective(WaveKind::Sine, &f, q).unwrap();
        prop_assert!(d.abs() <= 1e-12, "{}", d);
    }

    #[test]
    fn one_period_along_the_normal_is_invisible(f in frame(), q in params(), k in -3i32..=3) {
        let moved = shifted(&f, q.normal() * (k as f64 * q.lambda_m));
        let d = objective(WaveKind::Sine, &moved, q).unwrap() - objective(WaveKind::Sine, &f, q).unwrap();
        prop_assert!(d.abs() <= 1e-12, "{}", d);
    }

    #[test]
    fn flipping_the_normal_negates(f in frame(), q in params()) {
        let flipped = WaveParams::new(q.gamma_deg + 180.0, q.lambda_m, (TAU - q.psi_rad).rem_euclid(TAU));
        let d = objective(WaveKind::Sine, &f, flipped).unwrap() + objective(WaveKind::Sine, &f, q).unwrap();
        prop_assert!(d.abs() <= 1e-12, "{}", d);
    }

    #[test]
    fn scaling_space_and_wavelength_is_invisible(f in frame(), q in params(), s in 0.1..10.0f64) {
        let scaled = f.map_points(|p| p * s);
        let qs = WaveParams::new(q.gamma_deg, q.lambda_m * s, q.psi_rad);
        let d = objective(WaveKind::Sine, &scaled, qs).unwrap() - objective(WaveKind::Sine, &f, q).unwrap();
        prop_assert!(d.abs() <= 1e-12, "{}", d);
    }

    #[test]
    fn rotation_preserves_distances(f in frame(), angle in 0.0..TAU) {
        let dir = Point::new(angle.cos(), angle.sin());
        let r = rotate_to_bisector(&f, dir).unwrap();
        let before: Vec<Point> = f.points().collect();
        let after: Vec<Point> = r.points().collect();
        for i in 0..before.len() {
            for j in 0..i {
                let (a, b) = (before[i].distance(before[j]), after[i].distance(after[j]));
                prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
            }
        }
    }

    #[test]
    fn anova_is_affine_invariant(
        groups in prop::collection::vec(prop::collection::vec(-50.0..50.0f64, 3..8), 2..5),
        shift in -100.0..100.0f64,
        scale in prop_oneof![-10.0..-0.1f64, 0.1..10.0f64],
    ) {
        let base = one_way_anova(&groups);
        prop_assume!(base.is_ok());
        let base = base.unwrap();
        let moved: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|v| v * scale + shift).collect()).collect();
        let other = one_way_anova(&moved).unwrap();
        prop_assert!((base.f_stat - other.f_stat).abs() <= 1e-8 * base.f_stat.max(1.0));
        prop_assert!((base.eta_sq - other.eta_sq).abs() <= 1e-10);
        prop_assert!((0.0..=1.0).contains(&base.p_value));
    }

    #[test]
    fn ttest_shift_is_exact(sample in prop::collection::vec(-1000i32..1000, 2..20), c in -1000i32..1000, mu in -1000i32..1000) {
        let xs: Vec<f64> = sample.iter().map(|&v| v as f64).collect();
        prop_assume!(xs.iter().any(|&v| v != xs[0]));
        let moved: Vec<f64> = xs.iter().map(|v| v + c as f64).collect();
        let a = one_sample_ttest(&xs, mu as f64).unwrap();
        let b = one_sample_ttest(&moved, (mu + c) as f64).unwrap();
        prop_assert_eq!(a.t_stat, b.t_stat);
        prop_assert_eq!(a.p_value, b.p_value);
    }

    #[test]
    fn two_group_anova_is_squared_pooled_t(
        a in prop::collection::vec(-50.0..50.0f64, 2..10),
        b in prop::collection::vec(-50.0..50.0f64, 2..10),
    ) {
        let r = one_way_anova(&[a.clone(), b.clone()]);
        prop_assume!(r.is_ok());
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let ss = |v: &[f64]| { let m = mean(v); v.iter().map(|x| (x - m).powi(2)).sum::<f64>() };
        let sp2 = (ss(&a) + ss(&b)) / (na + nb - 2.0);
        let t = (mean(&a) - mean(&b)) / (sp2 * (1.0 / na + 1.0 / nb)).sqrt();
        let f = r.unwrap().f_stat;
        prop_assert!((f - t * t).abs() <= 1e-10 * f.max(1.0), "{} {}", f, t * t);
    }

    #[test]
    fn incomplete_beta_is_monotone(x in 0.0..1.0f64, dx in 0.0..0.5f64, a in 0.05..200.0f64, b in 0.05..200.0f64) {
        let lo = reg_inc_beta(x, a, b).unwrap();
        let hi = reg_inc_beta((x + dx).min(1.0), a, b).unwrap();
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert!(hi >= lo - 1e-14, "{} {}", lo, hi);
    }

    #[test]
    fn p_values_are_probabilities(t in -50.0..50.0f64, df in 1.0..200.0f64) {
        let p = student_t_two_sided(t, df).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert_eq!(student_t_two_sided(0.0, df).unwrap(), 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn filter_commutes_with_time_reversal(series in prop::collection::vec(-5.0..5.0f64, 45..400)) {
        let c = butter_lowpass(4, 0.5, 120.0).unwrap();
        let forward = filtfilt(&c, &series).unwrap();
        let rev: Vec<f64> = series.iter().rev().copied().collect();
        let backward = filtfilt(&c, &rev).unwrap();
        for (a, b) in forward.iter().rev().zip(&backward) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn filter_is_linear(
        u in prop::collection::vec(-5.0..5.0f64, 200),
        v in prop::collection::vec(-5.0..5.0f64, 200),
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
    ) {
        let c = butter_lowpass(2, 3.0, 50.0).unwrap();
        let mix: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let lhs = filtfilt(&c, &mix).unwrap();
        let (fu, fv) = (filtfilt(&c, &u).unwrap(), filtfilt(&c, &v).unwrap());
        for i in 0..lhs.len() {
            prop_assert!((lhs[i] - (a * fu[i] + b * fv[i])).abs() <= 1e-9);
        }
    }

    #[test]
    fn fits_are_canonical_and_consistent(f in frame(), w in wave(), nm in any::<bool>(), seed in any::<u64>()) {
        let opt = if nm { Optimizer::Nm } else { Optimizer::Sa };
        let mut config = FitConfig::default();
        config.sa.steps_per_temp = 20;
        let r = fit_frame(&f, FitStrategy::new(w, opt), &config, seed);
        prop_assume!(r.is_ok());
        let r = r.unwrap();
        let q = r.params;
        prop_assert!((0.0..180.0).contains(&q.gamma_deg));
        prop_assert!((0.0..TAU).contains(&q.psi_rad));
        prop_assert!(r.c_norm <= 1.0);
        let again = objective(w, &f, q).unwrap();
        prop_assert!((again - r.raw_value).abs() <= 1e-12, "{} {}", again, r.raw_value);
    }

    #[test]
    fn synthetic_trials_round_trip(angle in 10.0..=180.0f64, jitter in 0.0..0.3f64, seed in any::<u64>()) {
        let spec = CrossingSpec { angle_deg: angle, jitter_sd_m: jitter, seed, n1: 5, n2: 4, duration_s: 4.0, ..CrossingSpec::default() };
        let set = TrialSet { trials: vec![generate_crossing_trial(&spec).unwrap()] };
        let mut buf = Vec::new();
        write_trials(&mut buf, &set).unwrap();
        let back = parse_trials(Cursor::new(&buf), TrialFormat::CanonicalCsv).unwrap();
        let mut again = Vec::new();
        write_trials(&mut again, &back).unwrap();
        prop_assert_eq!(buf, again);
        let (a, b) = (&set.trials[0], &back.trials[0]);
        for (s, t) in a.samples().zip(b.samples()) {
            prop_assert_eq!(&s.pedestrian_id, &t.pedestrian_id);
            prop_assert!(s.pos.distance(t.pos) <= 1e-7 * (1.0 + s.pos.norm()));
        }
    }
}

#[test]
fn grid_result_bounds_every_node() {
    let spec = StripeSpec { gamma_deg: 70.0, lambda_m: 2.0, psi_rad: 1.0, n1: 15, n2: 15, jitter_sd_m: 0.3, extent_m: 4.0, seed: 5 };
    let (frame, _) = generate_striped_frame(&spec).unwrap();
    let obj = stripefit::waveform::FrameObjective::new(WaveKind::Sine, &frame).unwrap();
    let g = grid_search(|x| obj.eval_slice(x), &Bounds::default().search_box(), &[37, 20, 16], true).unwrap();
    let surface = g.surface.unwrap();
    assert!(surface.values.iter().all(|&v| v <= g.best.value));
    assert_eq!(obj.eval_slice(&g.best.x), g.best.value);
}

#[test]
fn annealing_finds_the_global_peak_for_most_seeds() {
    let f = |x: &[f64]| (5.0 * x[0]).sin() + 0.5 * x[0].sin();
    let global = (0..1_000_000)
        .map(|i| f(&[TAU * i as f64 / 1_000_000.0]))
        .fold(f64::NEG_INFINITY, f64::max);
    let bounds = SearchBox::new(vec![Axis::closed(0.0, TAU)]);
    let hits = (0..100u64)
        .filter(|&seed| {
            let schedule = SaSchedule { step_scale: vec![1.0], seed, ..SaSchedule::default() };
            simulated_annealing(f, &bounds, &schedule).unwrap().value >= global - 1e-3
        })
        .count();
    assert!(hits >= 95, "{hits}");
}

#[test]
fn cold_annealing_never_goes_downhill() {
    let f = |x: &[f64]| -(x[0] - 1.0).powi(2) + (7.0 * x[0]).sin();
    let bounds = SearchBox::new(vec![Axis::closed(-4.0, 4.0)]);
    let t_min = 1e-4;
    let schedule = SaSchedule {
        t0: t_min * (1.0 + 1e-9),
        t_min,
        step_scale: vec![0.5],
        seed: 3,
        trace: true,
        ..SaSchedule::default()
    };
    let r = simulated_annealing(f, &bounds, &schedule).unwrap();
    let trace = r.trace.unwrap();
    assert!(trace.windows(2).all(|w| w[1].current >= w[0].current - 1e-12 && w[1].best >= w[0].best));
}

#[test]
fn simplex_settles_on_the_nearby_local_peak() {
    let f = |x: &[f64]| x[0].cos() + 0.05 * x[0];
    let r = stripefit::optim::nelder_mead(f, &[5.0], &stripefit::optim::NmOptions::default()).unwrap();
    assert!((r.x[0] - (2.0 * PI + 0.05f64.asin())).abs() < 1e-3, "{:?}", r.x);
}

#[test]
fn grid_argmax_turns_with_the_frame() {
    let spec = StripeSpec { gamma_deg: 50.0, lambda_m: 2.0, psi_rad: 0.4, n1: 20, n2: 20, jitter_sd_m: 0.0, extent_m: 4.0, seed: 9 };
    let (frame, _) = generate_striped_frame(&spec).unwrap();
    let argmax = |f: &Frame| {
        let obj = stripefit::waveform::FrameObjective::new(WaveKind::Sine, f).unwrap();
        grid_search(|x| obj.eval_slice(x), &Bounds::with_lambda(1.0, 10.0).search_box(), &[180, 91, 32], false)
            .unwrap()
            .best
            .x[0]
    };
    let g0 = argmax(&frame);
    for theta in [20.0f64, 75.0, 130.0] {
        let t = theta.to_radians();
        let rotated = frame.map_points(|p| Point::new(p.x * t.cos() - p.y * t.sin(), p.x * t.sin() + p.y * t.cos()));
        let d = (argmax(&rotated) - (g0 + theta)).rem_euclid(180.0);
        assert!(d.min(180.0 - d) <= 1.0, "theta {theta}: {d}");
    }
}
