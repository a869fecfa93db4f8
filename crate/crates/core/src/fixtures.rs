//! Small hand-written traces with known verdicts.
//!
//! `SYNC(T,l)` in the templates below stands for
//! `T acq l; T rd lVar; T wr lVar; T rel l`.

/// No HB race, but `rd x` (T1) and `wr x` (T2) form a predictable race.
pub const TR_FIG1: &str =
    "T1 rd x; T1 acq m; T1 wr y; T1 rel m; T2 acq m; T2 rd z; T2 rel m; T2 wr x";

/// Predictable race and DC race on x, but no WCP race.
pub const TR_FIG2: &str = "T1 rd x; T1 acq m; T1 wr y; T1 rel m; T2 acq m; T2 rd y; T2 rel m; \
T2 acq n; T2 rel n; T3 acq n; T3 rel n; T3 wr x";

const CAPO: &str = "T1 acq m; SYNC(T1,o); T1 rd x; T1 rel m; SYNC(T2,o); SYNC(T2,p); \
T3 acq m; SYNC(T3,p); T3 rel m; T3 wr x";

const ST_A: &str = "T1 acq p; T1 acq m; T1 acq n; T1 wr x; T1 rel n; T1 rel m; \
T2 acq m; T2 rd x; T1 rel p; T2 rel m; SYNC(T2,o); SYNC(T3,o); T3 acq p; T3 wr x; T3 rel p";

// The last three carry a probe: T1 writes y just before its `rel m` and T3
// reads y at the end. Only the rel m -> T3 access edge orders the pair.
const ST_B: &str = "T1 acq m; T1 rd x; SYNC(T1,o); SYNC(T2,o); T2 rd x; SYNC(T2,p); \
T1 wr y; T1 rel m; SYNC(T3,p); T3 acq m; T3 wr x; T3 rel m; T3 rd y";

const ST_C: &str = "T1 acq m; T1 wr x; SYNC(T1,o); SYNC(T2,o); T2 wr x; SYNC(T2,p); \
T1 wr y; T1 rel m; SYNC(T3,p); T3 acq m; T3 rd x; T3 rel m; T3 rd y";

const ST_D: &str = "T1 acq m; T1 rd x; SYNC(T1,o); SYNC(T2,o); T2 wr x; SYNC(T2,p); \
T1 wr y; T1 rel m; SYNC(T3,p); T3 acq m; T3 wr x; T3 rel m; T3 rd y";

/// Replace every `SYNC(T,l)` segment by its four-event expansion.
pub fn expand_sync(template: &str) -> String {
    template
        .split(';')
        .map(|seg| {
            let seg = seg.trim();
            match seg.strip_prefix("SYNC(").and_then(|s| s.strip_suffix(')')) {
                Some(args) => {
                    let (t, l) = args.split_once(',').expect("SYNC(T,l)");
                    let (t, l) = (t.trim(), l.trim());
                    format!("{t} acq {l}; {t} rd {l}Var; {t} wr {l}Var; {t} rel {l}")
                }
                None => seg.to_string(),
            }
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// A WDC race on x that is not a predictable race.
pub fn tr_capo() -> String {
    expand_sync(CAPO)
}

/// Nested critical sections on p, m, n around a write later read and rewritten.
pub fn tr_st_a() -> String {
    expand_sync(ST_A)
}

/// Read-share hazard: a read in T2 must not forget T1's critical section on m.
pub fn tr_st_b() -> String {
    expand_sync(ST_B)
}

/// Write, write, read: T2's write drops T1's critical section from the CS lists.
pub fn tr_st_c() -> String {
    expand_sync(ST_C)
}

/// Read, write, write variant of [`tr_st_c`].
pub fn tr_st_d() -> String {
    expand_sync(ST_D)
}
