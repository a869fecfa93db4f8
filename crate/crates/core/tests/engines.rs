use predrace::analysis::{
    analyze, AnalysisError, AnalysisOptions, CaseKind, RaceKind, Relation, Tier,
};
use predrace::fixtures::{self, TR_FIG1, TR_FIG2};
use predrace::stats::CaseStats;
use predrace::trace::parse_trace;

fn races(text: &str, r: Relation, t: Tier) -> Vec<(usize, usize, RaceKind)> {
    let tr = parse_trace(text).unwrap();
    analyze(&tr, r, t, AnalysisOptions::default())
        .unwrap()
        .race_keys()
}

fn stats(text: &str, t: Tier) -> CaseStats {
    let tr = parse_trace(text).unwrap();
    analyze(&tr, Relation::Dc, t, AnalysisOptions::default())
        .unwrap()
        .stats
}

fn configs() -> impl Iterator<Item = (Relation, Tier)> {
    Relation::ALL
        .into_iter()
        .flat_map(|r| Tier::ALL.into_iter().map(move |t| (r, t)))
        .filter(|(r, t)| t.supports(*r))
}

#[test]
fn lock_elision_race() {
    for (r, t) in configs() {
        let got = races(TR_FIG1, r, t);
        if r == Relation::Hb {
            assert!(got.is_empty(), "{r}/{t}");
        } else {
            assert_eq!(got, vec![(0, 7, RaceKind::ReadWrite)], "{r}/{t}");
        }
    }
}

#[test]
fn dc_only_race() {
    for (r, t) in configs() {
        let n = races(TR_FIG2, r, t).len();
        let want = if matches!(r, Relation::Dc | Relation::Wdc) {
            1
        } else {
            0
        };
        assert_eq!(n, want, "{r}/{t}");
    }
}

#[test]
fn capo() {
    let tr = fixtures::tr_capo();
    for t in Tier::ALL {
        assert!(races(&tr, Relation::Dc, t).is_empty(), "{t}");
        assert_eq!(races(&tr, Relation::Wdc, t).len(), 1, "{t}");
    }
}

#[test]
fn smarttrack_fixtures_match_unopt() {
    for tr in [
        fixtures::tr_st_a(),
        fixtures::tr_st_b(),
        fixtures::tr_st_c(),
        fixtures::tr_st_d(),
    ] {
        for r in [Relation::Wcp, Relation::Dc, Relation::Wdc] {
            assert_eq!(
                races(&tr, r, Tier::SmartTrack),
                races(&tr, r, Tier::Unopt),
                "{r}\n{tr}"
            );
        }
        assert!(
            races(&tr, Relation::Dc, Tier::SmartTrack).is_empty(),
            "{tr}"
        );
    }
}

#[test]
fn trivial_traces() {
    for (r, t) in configs() {
        assert!(races("", r, t).is_empty());
        assert!(races("T1 rd x; T2 rd x", r, t).is_empty());
        assert_eq!(
            races("T1 wr x; T2 wr x", r, t),
            vec![(0, 1, RaceKind::WriteWrite)]
        );
        assert!(races("T1 wr x; T1 fork T2; T2 rd x", r, t).is_empty());
        assert!(races("T1 fork T2; T2 wr x; T1 join T2; T1 rd x", r, t).is_empty());
        assert_eq!(races("T1 fork T2; T2 wr x; T1 rd x", r, t).len(), 1);
    }
}

#[test]
fn hb_smarttrack_is_unsupported() {
    let tr = parse_trace(TR_FIG1).unwrap();
    let err = analyze(
        &tr,
        Relation::Hb,
        Tier::SmartTrack,
        AnalysisOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(err, AnalysisError::Unsupported { .. }));
}

#[test]
fn ill_formed_input_is_rejected() {
    let tr = parse_trace("T1 acq m; T2 acq m").unwrap();
    assert!(matches!(
        analyze(&tr, Relation::Dc, Tier::Fto, AnalysisOptions::default()),
        Err(AnalysisError::IllFormed(_))
    ));
}

#[test]
fn stop_at_first_race() {
    let text = "T1 wr x; T2 wr x; T1 wr y; T2 wr y";
    let tr = parse_trace(text).unwrap();
    let opts = AnalysisOptions {
        stop_at_first_race: true,
        ..AnalysisOptions::default()
    };
    for (r, t) in configs() {
        assert_eq!(analyze(&tr, r, t, opts).unwrap().races.len(), 1);
        assert_eq!(races(text, r, t).len(), 2);
    }
}

#[test]
fn same_epoch_cases() {
    let loop100 = vec!["T1 rd x"; 100].join("; ");
    for t in [Tier::Fto, Tier::SmartTrack] {
        let s = stats(&loop100, t);
        assert_eq!(s.count(CaseKind::ReadSameEpoch), 99);
        assert_eq!(s.nsea_reads, 1);

        assert_eq!(
            stats("T1 rd x; T1 rd x", t).count(CaseKind::ReadSameEpoch),
            1
        );
        let s = stats("T1 rd x; T1 acq m; T1 rd x", t);
        assert_eq!(s.count(CaseKind::ReadSameEpoch), 0);
        assert_eq!(s.count(CaseKind::ReadOwned), 1);
        assert_eq!(
            stats("T1 wr x; T1 wr x", t).count(CaseKind::WriteSameEpoch),
            1
        );
    }
}

#[test]
fn shared_read_cases() {
    // T1 and T2 read unordered: the read slot inflates to a vector; T2's next
    // read owns it, and the write after the join has to check both components.
    let s = stats(
        "T1 fork T2; T1 rd x; T2 rd x; T2 acq m; T2 rd x; T2 rel m; T1 join T2; T1 wr x",
        Tier::Fto,
    );
    assert_eq!(s.count(CaseKind::ReadShare), 1);
    assert_eq!(s.count(CaseKind::ReadSharedOwned), 1);
    assert_eq!(s.count(CaseKind::WriteShared), 1);
}

#[test]
fn lock_elision_fto_counts() {
    let s = stats(TR_FIG1, Tier::Fto);
    assert_eq!(s.count(CaseKind::WriteSameEpoch), 0);
    assert_eq!(s.nsea_reads + s.nsea_writes, s.reads + s.writes);
}

#[test]
fn nested_locks_histogram() {
    let s = stats(
        "T1 acq a; T1 acq b; T1 acq c; T1 wr x; T1 rel c; T1 rel b; T1 rel a",
        Tier::Fto,
    );
    assert_eq!(s.locks_held, [1, 1, 1]);
}

#[test]
fn cases_partition_accesses() {
    use predrace::trace::{generate_trace, GenConfig};
    for seed in 0..200 {
        let tr = generate_trace(&GenConfig {
            threads: 4,
            events: 80,
            seed,
            ..GenConfig::default()
        })
        .unwrap();
        let accesses = tr.events().iter().filter(|e| e.op.is_access()).count() as u64;
        for (r, t) in configs() {
            let s = analyze(&tr, r, t, AnalysisOptions::default())
                .unwrap()
                .stats;
            assert_eq!(s.total(), accesses, "{r}/{t} seed {seed}");
            assert_eq!(s.reads + s.writes, accesses);
            let same_r = s.count(CaseKind::ReadSameEpoch) + s.count(CaseKind::ReadSharedSameEpoch);
            assert_eq!(s.nsea_reads, s.reads - same_r);
            assert_eq!(s.nsea_writes, s.writes - s.count(CaseKind::WriteSameEpoch));
        }
    }
}
