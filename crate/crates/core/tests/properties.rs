mod common;

use proptest::prelude::*;

use common::{db, line_instance, random_covariances, random_instance, rng};
use softnull::clustering::ClusterLayout;
use softnull::harness::{aggregate, seeds, sig6, ResultRow, ResultTable, RowStatus};
use softnull::netgen::{draw_channels, hex_gains, hex_layout, HexParams};
use softnull::precoders::{dpc_bound, noncoop, run_strategy, sin_precode, zf_fullnet, PrecodeInput, PrecoderConfig, Strategy};
use softnull::rate_model::{achievable_rates, taylor_rate, Utility};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn taylor_rate_under_estimates_and_touches(seed in any::<u64>(), scale in 0.01f64..10.0) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, 3, 2);
        let q = random_covariances(&mut r, &inst.layout, scale);
        let qbar = random_covariances(&mut r, &inst.layout, scale);
        let rates = achievable_rates(&inst.channels, &inst.layout, &q).unwrap();
        let at_bar = achievable_rates(&inst.channels, &inst.layout, &qbar).unwrap();
        for i in 0..inst.layout.num_users() {
            let lower = taylor_rate(&inst.channels, &inst.layout, &q, &qbar, i).unwrap();
            prop_assert!(lower <= rates[i] + 1e-9, "user {i}: {lower} > {}", rates[i]);
            let touch = taylor_rate(&inst.channels, &inst.layout, &qbar, &qbar, i).unwrap();
            prop_assert!((touch - at_bar[i]).abs() <= 1e-9);
        }
    }

    #[test]
    fn aggregate_channel_is_link_concatenation(seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, 4, 3);
        let ch = &inst.channels;
        for i in 0..ch.num_users() {
            for j in 0..ch.num_bases() {
                let off = ch.base_offset(j);
                let m = ch.base_antennas()[j];
                prop_assert_eq!(ch.link(i, j), ch.aggregate(i).columns(off, m).into_owned());
            }
        }
    }

    #[test]
    fn sum_rate_strategies_respect_power_and_ordering(seed in any::<u64>(), bases in 2usize..5, snr in -5.0f64..25.0) {
        let (ch, full, serving) = line_instance(bases, bases, seed);
        let p = vec![db(snr); bases];
        let sin = sin_precode(&ch, &full, &p, &Utility::SumRate, &PrecoderConfig::default()).unwrap();
        let zf = zf_fullnet(&ch, &p, &Utility::SumRate, &Default::default()).unwrap();
        let nc = noncoop(&ch, &p, &serving, &Utility::SumRate).unwrap();
        let dpc = dpc_bound(&ch, &p).unwrap();
        for res in [&sin, &zf, &nc] {
            for (used, cap) in res.report.base_power.iter().zip(&p) {
                prop_assert!(*used <= cap * (1.0 + 1e-6), "{}: {used} > {cap}", res.label());
            }
        }
        prop_assert!(sin.report.utility >= zf.report.utility - 1e-6);
        prop_assert!(dpc.sum_rate >= zf.sum_rate - 1e-6);
        prop_assert!(dpc.sum_rate >= sin.sum_rate - 1e-6);
        prop_assert!(dpc.sum_rate >= nc.sum_rate - 1e-6);
    }

    #[test]
    fn sin_trace_is_monotone_and_true_rates_dominate(seed in any::<u64>(), size in 1usize..4, snr in 0.0f64..30.0) {
        let (ch, layout, _) = line_instance(4, size, seed);
        let p = vec![db(snr); 4];
        let cfg = PrecoderConfig { epsilon: 1e-4, ..PrecoderConfig::default() };
        let res = sin_precode(&ch, &layout, &p, &Utility::SumRate, &cfg).unwrap();
        for w in res.utility_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9, "{} then {}", w[0], w[1]);
        }
        prop_assert!(res.report.utility >= res.utility_trace.last().unwrap() - 1e-6);
        for (used, cap) in res.report.base_power.iter().zip(&p) {
            prop_assert!(*used <= cap * (1.0 + 1e-6));
        }
    }

    #[test]
    fn myopic_zf_respects_power(seed in any::<u64>(), size in 1usize..4, snr in 0.0f64..30.0) {
        let (ch, layout, serving) = line_instance(5, size, seed);
        let p = vec![db(snr); 5];
        let input = PrecodeInput { channels: &ch, layout: &layout, powers: &p, utility: &Utility::SumRate, serving: &serving };
        let res = run_strategy(Strategy::MyopicZf, &input, &PrecoderConfig::default()).unwrap();
        for (used, cap) in res.report.base_power.iter().zip(&p) {
            prop_assert!(*used <= cap * (1.0 + 1e-6));
        }
        prop_assert!(res.report.rates.iter().all(|r| *r >= 0.0));
    }

    #[test]
    fn fading_index_never_moves_shadowing(master in any::<u64>(), s in 0usize..50, f in 0usize..50, g in 0usize..50) {
        prop_assert_eq!(seeds::shadow_seed(master, s), seeds::shadow_seed(master, s));
        prop_assert_eq!(seeds::layout_seed(master, s), seeds::layout_seed(master, s));
        if f != g {
            prop_assert_ne!(seeds::fading_seed(master, s, f), seeds::fading_seed(master, s, g));
        }
        prop_assert_ne!(seeds::shadow_seed(master, s), seeds::fading_seed(master, s, f));
    }

    #[test]
    fn sig6_keeps_six_digits(x in -1e9f64..1e9) {
        let back: f64 = sig6(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-6 * x.abs() + 1e-300);
    }

    #[test]
    fn aggregation_is_nonnegative_and_complete(values in prop::collection::vec((0usize..3, 0usize..4, 0.0f64..20.0, any::<bool>()), 1..60)) {
        let strategies = [Strategy::Noncoop, Strategy::Zf, Strategy::Sin];
        let snrs = [-10.0, 0.0, 10.0, 20.0];
        let rows: Vec<ResultRow> = values
            .iter()
            .enumerate()
            .map(|(t, &(s, x, v, failed))| ResultRow {
                trial: t,
                shadow: 0,
                fading: t,
                strategy: strategies[s],
                clustering: None,
                cluster_size: 0,
                snr_db: snrs[x],
                status: if failed { RowStatus::Failed("numerical".into()) } else { RowStatus::Ok },
                rates: vec![v],
                utility: v,
                normalized_sum_rate: v,
                active_fraction: 1.0,
                iterations: 1,
                converged: true,
                note: String::new(),
            })
            .collect();
        let table = ResultTable { rows };
        let summary = aggregate(&table).unwrap();
        let counted: usize = summary.rows.iter().map(|r| r.trials + r.failed).sum();
        prop_assert_eq!(counted, table.rows.len());
        for r in &summary.rows {
            prop_assert_eq!(r.missing(), r.mean_normalized_sum_rate.is_none());
            if let Some(m) = r.mean_normalized_sum_rate {
                prop_assert!(m >= 0.0);
                prop_assert!(r.stderr.unwrap() >= 0.0);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn hex_regeneration_is_bit_identical(seed in any::<u64>()) {
        let params = HexParams::default();
        let geo = hex_layout(&params, seed).unwrap();
        let gains = hex_gains(&geo, &params, seed ^ 1).unwrap();
        prop_assert_eq!(&geo, &hex_layout(&params, seed).unwrap());
        prop_assert_eq!(&gains, &hex_gains(&geo, &params, seed ^ 1).unwrap());
        let a = draw_channels(&gains, &geo, 9).unwrap();
        prop_assert_eq!(a, draw_channels(&gains, &geo, 9).unwrap());
        prop_assert!(geo.num_users() <= 57);
        let full = ClusterLayout::full(geo.num_users(), geo.base_antennas.clone()).unwrap();
        prop_assert!(full.is_full());
    }
}
