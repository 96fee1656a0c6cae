//! Property tests over the kernel, coding, wiring and plasticity building
//! blocks.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relnet_core::coding::{
    circular_distance, decode_circular_mean, gaussian_rate_profile, GaussianStimulus, RelationKind,
};
use relnet_core::connectivity::{
    build_random_projection, deliver_spikes, PlasticityRule, ProjectionKind, ProjectionSpec,
    WeightBounds, WeightInit,
};
use relnet_core::network::GroupId;
use relnet_core::neuron::{
    steady_state_voltage, Integrator, NeuronType, NeuronTypeParams, PopulationState, SynapseKind,
    SynapseKindParams, SynapseParams,
};
use relnet_core::plasticity::{
    inhib_on_post, inhib_on_pre, normalize_rows_then_columns, InhibParams, TraceField,
};

const DT: f64 = 0.1;

fn unit_angles(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 / n as f64).collect()
}

fn neuron_params(kind: NeuronType) -> NeuronTypeParams {
    NeuronTypeParams::canonical(kind)
}

fn random_spec(n_src: usize, n_dst: usize, p: f64) -> ProjectionSpec {
    ProjectionSpec {
        src: GroupId::Exc(0),
        dst: GroupId::Exc(1),
        n_src,
        n_dst,
        kind: ProjectionKind::EE,
        p,
        init: WeightInit::Uniform { low: 0.0, high: 0.3 },
        bounds: WeightBounds::new(0.0, 10.0),
        rule: PlasticityRule::TripletEe,
    }
}

proptest! {
    #[test]
    fn gaussian_code_decodes_to_its_center(value in 0.0f64..1.0, n in 64usize..800, peak in 0.5f64..100.0) {
        let stim = GaussianStimulus::new(value, peak, 1.0 / 16.0);
        let rates = gaussian_rate_profile(&stim, n);
        let est = decode_circular_mean(&rates, &unit_angles(n)).unwrap();
        prop_assert!(circular_distance(est.value, value) < 1e-9, "{} vs {}", est.value, value);
    }

    #[test]
    fn decoding_ignores_overall_scale(
        activity in proptest::collection::vec(0.0f64..50.0, 3..200),
        scale in 1e-3f64..1e3,
    ) {
        let angles = unit_angles(activity.len());
        let scaled: Vec<f64> = activity.iter().map(|a| a * scale).collect();
        match (decode_circular_mean(&activity, &angles), decode_circular_mean(&scaled, &angles)) {
            (Some(a), Some(b)) if a.resultant > 1e-6 => {
                prop_assert!(circular_distance(a.value, b.value) < 1e-9);
                prop_assert!((a.resultant - b.resultant).abs() < 1e-9);
            }
            (None, None) | (Some(_), _) => {}
            (None, Some(_)) => prop_assert!(false, "scaling made an undecodable vector decodable"),
        }
    }

    #[test]
    fn relation_samples_satisfy_their_identity(first in 0.0f64..1.0, second in 0.0f64..1.0) {
        for kind in [RelationKind::Additive, RelationKind::AffineNeg, RelationKind::DoubleSquare] {
            let s = kind.complete(first, second);
            prop_assert!(s.residual() < 1e-12, "{kind:?}: {s:?}");
            for v in s.values() {
                prop_assert!((0.0..1.0).contains(&v));
            }
        }
    }

    #[test]
    fn conductances_decay_by_the_exact_factor(
        g_e in 0.0f64..50.0,
        g_i in 0.0f64..50.0,
        steps in 1usize..200,
    ) {
        let params = neuron_params(NeuronType::Inhibitory);
        let syn = SynapseParams::default();
        let integ = Integrator::new(&params, &syn, DT);
        let mut state = PopulationState::at_rest(1, NeuronType::Inhibitory, &params);
        state.g_e[0] = g_e;
        state.g_i[0] = g_i;
        let mut spikes = Vec::new();
        for k in 0..steps {
            integ.step(&mut state, k as f64 * DT, GroupId::Inh(0), &mut spikes).unwrap();
        }
        let t = steps as f64 * DT;
        let expect_e = g_e * (-t / syn.excitatory.tau_g).exp();
        let expect_i = g_i * (-t / syn.inhibitory.tau_g).exp();
        prop_assert!((state.g_e[0] - expect_e).abs() <= 1e-12 * expect_e.max(1e-300));
        prop_assert!((state.g_i[0] - expect_i).abs() <= 1e-12 * expect_i.max(1e-300));
    }

    #[test]
    fn membrane_converges_to_clamped_steady_state(g_e in 0.0f64..0.15, g_i in 0.0f64..3.0) {
        // Very slow synapses hold the conductances nearly constant.
        let syn = SynapseParams {
            excitatory: SynapseKindParams { tau_g: 1e15, v_rev: 0.0 },
            inhibitory: SynapseKindParams { tau_g: 1e15, v_rev: -85.0 },
        };
        let params = neuron_params(NeuronType::Excitatory);
        let target = steady_state_voltage(&params, &syn, g_e, g_i);
        prop_assume!(target < params.v_thresh - 0.5);
        let integ = Integrator::new(&params, &syn, DT);
        let mut state = PopulationState::at_rest(1, NeuronType::Excitatory, &params);
        state.g_e[0] = g_e;
        state.g_i[0] = g_i;
        let mut spikes = Vec::new();
        for k in 0..20_000 {
            integ.step(&mut state, k as f64 * DT, GroupId::Exc(0), &mut spikes).unwrap();
        }
        prop_assert!(spikes.is_empty());
        prop_assert!((state.v[0] - target).abs() < 1e-6, "{} vs {}", state.v[0], target);
    }

    #[test]
    fn spikes_respect_the_refractory_period(
        seed in any::<u64>(),
        drive in 0.05f64..3.0,
        inhibitory in any::<bool>(),
    ) {
        let kind = if inhibitory { NeuronType::Inhibitory } else { NeuronType::Excitatory };
        let params = neuron_params(kind);
        let syn = SynapseParams::default();
        let integ = Integrator::new(&params, &syn, DT);
        let n = 8;
        let mut state = PopulationState::at_rest(n, kind, &params);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut last = vec![f64::NEG_INFINITY; n];
        let mut spikes = Vec::new();
        for k in 0..5_000 {
            let now = k as f64 * DT;
            for j in 0..n {
                state.add_conductance(j, drive * rng.gen::<f64>(), SynapseKind::Excitatory).unwrap();
            }
            spikes.clear();
            integ.step(&mut state, now, GroupId::Exc(0), &mut spikes).unwrap();
            for &j in &spikes {
                let gap = now - last[j as usize];
                prop_assert!(gap >= params.tau_refrac - 1e-9, "gap {gap}");
                last[j as usize] = now;
            }
        }
    }

    #[test]
    fn delivery_conserves_weight(seed in any::<u64>(), p in 0.05f64..1.0, firing in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let proj = build_random_projection(&random_spec(30, 25, p), false, &mut rng).unwrap();
        let spikes: Vec<u32> = (0..30u32).filter(|_| rng.gen::<f64>() < firing).collect();
        let params = neuron_params(NeuronType::Excitatory);
        let mut dst = PopulationState::at_rest(25, NeuronType::Excitatory, &params);
        deliver_spikes(&spikes, &proj, &mut dst);
        let delivered: f64 = dst.g_e.iter().sum();
        let sent: f64 = proj
            .pairs()
            .filter(|(i, _, _)| spikes.contains(i))
            .map(|(_, _, w)| w)
            .sum();
        prop_assert!((delivered - sent).abs() <= 1e-12 * sent.max(1.0));
        prop_assert!(dst.g_i.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn normalization_hits_column_targets(
        seed in any::<u64>(),
        n_src in 20usize..200,
        n_dst in 20usize..200,
        p in 0.1f64..0.6,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = build_random_projection(&random_spec(n_src, n_dst, p), false, &mut rng).unwrap();
        let row_target = p * n_dst as f64 * 0.15;
        let col_target = p * n_src as f64 * 0.15;
        normalize_rows_then_columns(&mut m, row_target, col_target);
        for j in 0..n_dst {
            let s = m.column_sum(j);
            prop_assert!(s == 0.0 || (s - col_target).abs() < 1e-9);
        }
    }

    #[test]
    fn wiring_is_a_function_of_the_seed(seed in any::<u64>()) {
        let spec = random_spec(40, 40, 0.3);
        let a = build_random_projection(&spec, true, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = build_random_projection(&spec, true, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.pairs().all(|(i, j, _)| i != j));
    }
}

/// Poisson spike train on the step grid, as sorted times in ms.
fn spike_train(rate: f64, duration: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut t = 0.0;
    let mut out = Vec::new();
    loop {
        t += -(1.0 - rng.gen::<f64>()).ln() / rate * 1e3;
        if t >= duration {
            return out;
        }
        out.push((t / DT).round() * DT);
    }
}

/// Mean drift of one inhibitory weight under independent Poisson pre and
/// post trains.
fn inhibitory_drift(pre_rate: f64, post_rate: f64, seed: u64) -> f64 {
    let params = InhibParams {
        w_min: 0.0,
        w_max: 1e12,
        ..InhibParams::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let duration = 2_000_000.0;
    let pre = spike_train(pre_rate, duration, &mut rng);
    let post = spike_train(post_rate, duration, &mut rng);
    let mut x_pre = TraceField::new(1, params.tau_x_pre);
    let mut x_post = TraceField::new(1, params.tau_x_post);
    let w0 = 1e6;
    let mut w = w0;
    let (mut a, mut b) = (0, 0);
    while a < pre.len() || b < post.len() {
        let t_pre = pre.get(a).copied().unwrap_or(f64::INFINITY);
        let t_post = post.get(b).copied().unwrap_or(f64::INFINITY);
        if t_pre <= t_post {
            w = inhib_on_pre(w, x_post.read(0, t_pre).unwrap(), &params);
            x_pre.set(0, t_pre);
            a += 1;
        } else {
            w = inhib_on_post(w, x_pre.read(0, t_post).unwrap(), &params);
            x_post.set(0, t_post);
            b += 1;
        }
    }
    (w - w0) / (duration * 1e-3)
}

#[test]
fn inhibitory_rule_pushes_rates_toward_target() {
    let target = InhibParams::default().alpha;
    for seed in 0..3 {
        assert!(inhibitory_drift(10.0, 0.5 * target, seed) < 0.0);
        assert!(inhibitory_drift(10.0, 2.0 * target, seed) > 0.0);
    }
}

/// Zero of the mean drift for independent Poisson trains. A trace that is
/// set to 1 at each spike has mean `r tau / (1 + r tau)` at an independent
/// event, so the drift vanishes where
/// `u / (1 + u) + u / (1 + r_pre tau_pre) = offset` with `u = r_post tau_post`.
fn analytic_fixed_point(pre_rate: f64, params: &InhibParams) -> f64 {
    let pre = pre_rate * params.tau_x_pre * 1e-3;
    let f = |u: f64| u / (1.0 + u) + u / (1.0 + pre) - params.offset();
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo / (params.tau_x_post * 1e-3)
}

#[test]
fn inhibitory_fixed_point_matches_trace_statistics() {
    let params = InhibParams::default();
    let zero = analytic_fixed_point(10.0, &params);
    assert!(zero > params.alpha && zero < 1.2 * params.alpha, "{zero}");
    for seed in 0..2 {
        assert!(inhibitory_drift(10.0, zero - 0.3, 200 + seed) < 0.0);
        assert!(inhibitory_drift(10.0, zero + 0.3, 200 + seed) > 0.0);
    }
}
