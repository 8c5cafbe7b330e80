//! Stability of a detector's accuracy along the distortion ladders.
//!
//! For each distorted level `i` with accuracy `A_i`:
//!
//! * `PD_i = min(1, ((A_i − A_ref) / A_ref)²)` penalises drift from the
//!   reference accuracy;
//! * `PM_i = min(1, ((A_i − A_prev) / A_prev)²)` when `A_i > A_prev`, else 0,
//!   penalises accuracy rising as quality falls. `A_prev` is the next better
//!   level in the same chain, or the reference for the first level.
//!
//! `S.x = 1 − sqrt(mean_i(ω·PD_i + (1 − ω)·PM_i))`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::distortion::{check_param, DistortionKind};
use crate::{Error, Result};

/// Weight of the degradation penalty used unless overridden.
pub const DEFAULT_OMEGA: f64 = 0.8;

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("{name} = {v} outside [0, 1]")))
    }
}

/// Squared relative change `((a − base) / base)²` clamped to 1. A zero base
/// gives 0 when `a` is also zero and 1 otherwise.
fn relative_penalty(a: f64, base: f64) -> f64 {
    if base == 0.0 {
        return if a == 0.0 { 0.0 } else { 1.0 };
    }
    (((a - base) / base).powi(2)).min(1.0)
}

/// Penalty of accuracy degradation relative to the reference.
pub fn degradation_penalty(a_i: f64, a_ref: f64) -> Result<f64> {
    check_unit("a_i", a_i)?;
    check_unit("a_ref", a_ref)?;
    Ok(relative_penalty(a_i, a_ref))
}

/// Non-monotonicity penalty relative to the next better-quality level.
pub fn monotonicity_penalty(a_i: f64, a_prev: f64) -> Result<f64> {
    check_unit("a_i", a_i)?;
    check_unit("a_prev", a_prev)?;
    if a_i <= a_prev {
        return Ok(0.0);
    }
    Ok(relative_penalty(a_i, a_prev))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderEntry {
    pub level: u32,
    pub param: f64,
    pub accuracy: f64,
}

/// Accuracies of one distortion kind, grouped into quality-descending chains.
/// `bv` has two chains (darker, brighter); every other kind has one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderAccuracies {
    pub kind: DistortionKind,
    pub a_ref: f64,
    pub chains: Vec<Vec<LadderEntry>>,
}

impl LadderAccuracies {
    /// Total number of distorted sequences, `N_x`.
    pub fn n_x(&self) -> usize {
        self.chains.iter().map(Vec::len).sum()
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("a_ref", self.a_ref)?;
        let expected = if self.kind == DistortionKind::Bv { 2 } else { 1 };
        if self.chains.len() != expected {
            return Err(Error::InvalidParam(format!(
                "{} ladders have {expected} chain(s), got {}",
                self.kind,
                self.chains.len()
            )));
        }
        if self.n_x() == 0 {
            return Err(Error::Empty(format!("{} ladder has no levels", self.kind)));
        }
        for e in self.chains.iter().flatten() {
            check_unit("accuracy", e.accuracy)?;
        }
        Ok(())
    }

    /// Entries in chain order.
    pub fn entries(&self) -> impl Iterator<Item = &LadderEntry> {
        self.chains.iter().flatten()
    }
}

/// Sort raw `(level, param, accuracy)` entries into quality-descending chains:
/// ascending QP, descending scale, ascending σ; brightness is split by sign
/// and each side sorted by ascending |offset|.
pub fn order_ladder(kind: DistortionKind, a_ref: f64, entries: &[LadderEntry]) -> Result<LadderAccuracies> {
    check_unit("a_ref", a_ref)?;
    for e in entries {
        check_param(kind, e.param)?;
        check_unit("accuracy", e.accuracy)?;
    }
    let mut sorted = entries.to_vec();
    sorted.sort_by(|a, b| a.param.total_cmp(&b.param));
    if sorted.windows(2).any(|w| w[0].param == w[1].param) {
        return Err(Error::InvalidParam(format!("duplicate {kind} parameters")));
    }
    let by_abs = |v: &mut Vec<LadderEntry>| v.sort_by(|a, b| a.param.abs().total_cmp(&b.param.abs()));
    let chains = match kind {
        DistortionKind::Qp | DistortionKind::Wn => vec![sorted],
        DistortionKind::Res => {
            sorted.reverse();
            vec![sorted]
        }
        DistortionKind::Bv => {
            let (mut low, mut high): (Vec<_>, Vec<_>) = sorted.into_iter().partition(|e| e.param < 0.0);
            by_abs(&mut low);
            by_abs(&mut high);
            vec![low, high]
        }
    };
    let ladder = LadderAccuracies { kind, a_ref, chains };
    ladder.validate()?;
    Ok(ladder)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelPenalty {
    pub level: u32,
    pub param: f64,
    pub a: f64,
    pub pd: f64,
    pub pm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyBreakdown {
    pub omega: f64,
    pub levels: Vec<LevelPenalty>,
}

/// Stability of one ladder and the per-level penalties behind it.
pub fn stability(ladder: &LadderAccuracies, omega: f64) -> Result<(f64, PenaltyBreakdown)> {
    check_unit("omega", omega)?;
    ladder.validate()?;
    let mut levels = Vec::with_capacity(ladder.n_x());
    for chain in &ladder.chains {
        let mut prev = ladder.a_ref;
        for e in chain {
            levels.push(LevelPenalty {
                level: e.level,
                param: e.param,
                a: e.accuracy,
                pd: degradation_penalty(e.accuracy, ladder.a_ref)?,
                pm: monotonicity_penalty(e.accuracy, prev)?,
            });
            prev = e.accuracy;
        }
    }
    let mean = levels
        .iter()
        .map(|l| omega * l.pd + (1.0 - omega) * l.pm)
        .sum::<f64>()
        / levels.len() as f64;
    let s = (1.0 - mean.sqrt()).clamp(0.0, 1.0);
    Ok((s, PenaltyBreakdown { omega, levels }))
}

/// `[S.qp, S.res, S.wn, S.bv]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityVector {
    pub s_qp: f64,
    pub s_res: f64,
    pub s_wn: f64,
    pub s_bv: f64,
}

impl StabilityVector {
    pub fn ideal() -> Self {
        StabilityVector::from_array([1.0; 4])
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        StabilityVector {
            s_qp: v[0],
            s_res: v[1],
            s_wn: v[2],
            s_bv: v[3],
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.s_qp, self.s_res, self.s_wn, self.s_bv]
    }

    pub fn get(&self, kind: DistortionKind) -> f64 {
        match kind {
            DistortionKind::Qp => self.s_qp,
            DistortionKind::Res => self.s_res,
            DistortionKind::Wn => self.s_wn,
            DistortionKind::Bv => self.s_bv,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (k, v) in DistortionKind::ALL.iter().zip(self.to_array()) {
            check_unit(&format!("S.{k}"), v)?;
        }
        Ok(())
    }
}

/// Stability of all four kinds; exactly one ladder per kind is required.
pub fn stability_vector(ladders: &[LadderAccuracies], omega: f64) -> Result<StabilityVector> {
    let mut by_kind = BTreeMap::new();
    for l in ladders {
        if by_kind.insert(l.kind, stability(l, omega)?.0).is_some() {
            return Err(Error::InvalidParam(format!("more than one {} ladder", l.kind)));
        }
    }
    let mut v = [0.0; 4];
    for (slot, kind) in v.iter_mut().zip(DistortionKind::ALL) {
        *slot = *by_kind
            .get(&kind)
            .ok_or_else(|| Error::InvalidParam(format!("missing {kind} ladder")))?;
    }
    Ok(StabilityVector::from_array(v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindReport {
    pub s: f64,
    pub levels: Vec<LevelPenalty>,
}

/// Serializable stability summary of one detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub detector_id: String,
    pub a_ref: f64,
    pub omega: f64,
    pub per_kind: BTreeMap<DistortionKind, KindReport>,
}

impl StabilityReport {
    pub fn build(detector_id: &str, ladders: &[LadderAccuracies], omega: f64) -> Result<Self> {
        let first = ladders
            .first()
            .ok_or_else(|| Error::Empty("no ladders to report".into()))?;
        if ladders.iter().any(|l| l.a_ref != first.a_ref) {
            return Err(Error::InvalidParam("ladders disagree on a_ref".into()));
        }
        let mut per_kind = BTreeMap::new();
        for l in ladders {
            let (s, breakdown) = stability(l, omega)?;
            if per_kind
                .insert(l.kind, KindReport { s, levels: breakdown.levels })
                .is_some()
            {
                return Err(Error::InvalidParam(format!("more than one {} ladder", l.kind)));
            }
        }
        Ok(StabilityReport {
            detector_id: detector_id.to_string(),
            a_ref: first.a_ref,
            omega,
            per_kind,
        })
    }

    pub fn vector(&self) -> Result<StabilityVector> {
        let mut v = [0.0; 4];
        for (slot, kind) in v.iter_mut().zip(DistortionKind::ALL) {
            *slot = self
                .per_kind
                .get(&kind)
                .ok_or_else(|| Error::InvalidParam(format!("missing {kind} ladder")))?
                .s;
        }
        Ok(StabilityVector::from_array(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn entry(level: u32, param: f64, accuracy: f64) -> LadderEntry {
        LadderEntry { level, param, accuracy }
    }

    fn chain(kind: DistortionKind, a_ref: f64, accs: &[f64]) -> LadderAccuracies {
        let entries: Vec<_> = accs
            .iter()
            .enumerate()
            .map(|(i, &a)| entry(i as u32 + 1, 10.0 + i as f64, a))
            .collect();
        LadderAccuracies { kind, a_ref, chains: vec![entries] }
    }

    #[test]
    fn degradation_examples() {
        assert_eq!(degradation_penalty(0.7, 0.7).unwrap(), 0.0);
        assert!((degradation_penalty(0.25, 0.5).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(degradation_penalty(0.6, 0.2).unwrap(), 1.0);
        assert!(degradation_penalty(1.1, 0.5).is_err());
    }

    #[test]
    fn monotonicity_examples() {
        assert_eq!(monotonicity_penalty(0.3, 0.4).unwrap(), 0.0);
        assert!((monotonicity_penalty(0.55, 0.5).unwrap() - 0.01).abs() < 1e-12);
        assert_eq!(monotonicity_penalty(0.3, 0.1).unwrap(), 1.0);
        assert!(monotonicity_penalty(0.3, -0.1).is_err());
    }

    #[test]
    fn zero_reference_accuracy() {
        assert_eq!(degradation_penalty(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(degradation_penalty(0.1, 0.0).unwrap(), 1.0);
        assert_eq!(monotonicity_penalty(0.2, 0.0).unwrap(), 1.0);
        assert_eq!(monotonicity_penalty(0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn ordering_rules() {
        let qp = order_ladder(
            DistortionKind::Qp,
            0.9,
            &[entry(3, 40.0, 0.1), entry(1, 10.0, 0.2), entry(2, 25.0, 0.3)],
        )
        .unwrap();
        let params: Vec<_> = qp.entries().map(|e| e.param).collect();
        assert_eq!(params, vec![10.0, 25.0, 40.0]);

        let res = order_ladder(
            DistortionKind::Res,
            0.9,
            &[entry(1, 0.5, 0.1), entry(2, 0.875, 0.2), entry(3, 0.25, 0.3)],
        )
        .unwrap();
        let params: Vec<_> = res.entries().map(|e| e.param).collect();
        assert_eq!(params, vec![0.875, 0.5, 0.25]);

        let bv = order_ladder(
            DistortionKind::Bv,
            0.9,
            &[entry(1, -0.2, 0.5), entry(2, 0.1, 0.5), entry(3, -0.1, 0.5), entry(4, 0.3, 0.5)],
        )
        .unwrap();
        let low: Vec<_> = bv.chains[0].iter().map(|e| e.param).collect();
        let high: Vec<_> = bv.chains[1].iter().map(|e| e.param).collect();
        assert_eq!(low, vec![-0.1, -0.2]);
        assert_eq!(high, vec![0.1, 0.3]);

        let single = order_ladder(DistortionKind::Wn, 0.5, &[entry(1, 0.1, 0.5)]).unwrap();
        assert_eq!(single.n_x(), 1);
        let (_, b) = stability(&single, 0.0).unwrap();
        assert_eq!(b.levels[0].pm, 0.0);
    }

    #[test]
    fn ordering_errors() {
        assert!(order_ladder(DistortionKind::Qp, 0.5, &[entry(1, 10.0, 0.1), entry(2, 10.0, 0.2)]).is_err());
        assert!(order_ladder(DistortionKind::Qp, 0.5, &[]).is_err());
        assert!(order_ladder(DistortionKind::Bv, 0.5, &[entry(1, 0.0, 0.1)]).is_err());
    }

    #[test]
    fn ideal_ladder_is_one() {
        let l = chain(DistortionKind::Qp, 0.73, &[0.73; 11]);
        assert_eq!(stability(&l, DEFAULT_OMEGA).unwrap().0, 1.0);
    }

    #[test]
    fn fully_penalised_level_is_zero() {
        // PD = 1 and PM = 1: a_ref = 0.1, a = 0.9 (also above its predecessor, the reference)
        let l = chain(DistortionKind::Qp, 0.1, &[0.9]);
        let (s, b) = stability(&l, 0.5).unwrap();
        assert_eq!((b.levels[0].pd, b.levels[0].pm), (1.0, 1.0));
        assert_eq!(s, 0.0);
    }

    #[test]
    fn worked_example() {
        let l = chain(DistortionKind::Res, 0.8, &[0.8, 0.4]);
        let (s, b) = stability(&l, 0.8).unwrap();
        assert_eq!((b.levels[0].pd, b.levels[0].pm), (0.0, 0.0));
        assert!((b.levels[1].pd - 0.25).abs() < 1e-12);
        assert_eq!(b.levels[1].pm, 0.0);
        assert!((s - (1.0 - 0.1f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn bv_chains_restart_from_reference() {
        let l = LadderAccuracies {
            kind: DistortionKind::Bv,
            a_ref: 0.5,
            chains: vec![vec![entry(1, -0.1, 0.4)], vec![entry(2, 0.1, 0.45)]],
        };
        let (_, b) = stability(&l, 0.0).unwrap();
        // the bright chain's predecessor is the reference (0.5), not the dark level (0.4)
        assert_eq!(b.levels[1].pm, 0.0);
    }

    #[test]
    fn vector_requires_every_kind() {
        let ladders: Vec<_> = DistortionKind::ALL
            .iter()
            .map(|&k| {
                if k == DistortionKind::Bv {
                    LadderAccuracies { kind: k, a_ref: 0.6, chains: vec![vec![entry(1, -0.1, 0.6)], vec![]] }
                } else {
                    chain(k, 0.6, &[0.6, 0.6])
                }
            })
            .collect();
        let v = stability_vector(&ladders, DEFAULT_OMEGA).unwrap();
        assert_eq!(v.to_array(), [1.0; 4]);
        assert!(stability_vector(&ladders[..3], DEFAULT_OMEGA).is_err());
        let mut dup = ladders.clone();
        dup.push(ladders[0].clone());
        assert!(stability_vector(&dup, DEFAULT_OMEGA).is_err());
        assert!(stability(&ladders[0], 1.5).is_err());
    }

    #[test]
    fn report_reproduces_vector() {
        let ladders: Vec<_> = DistortionKind::ALL
            .iter()
            .map(|&k| {
                if k == DistortionKind::Bv {
                    LadderAccuracies {
                        kind: k,
                        a_ref: 0.8,
                        chains: vec![vec![entry(1, -0.1, 0.7)], vec![entry(2, 0.1, 0.9)]],
                    }
                } else {
                    chain(k, 0.8, &[0.8, 0.4])
                }
            })
            .collect();
        let r = StabilityReport::build("hog", &ladders, 0.8).unwrap();
        assert_eq!(r.vector().unwrap(), stability_vector(&ladders, 0.8).unwrap());
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains(r#""per_kind":{"qp""#));
    }

    fn accs() -> impl Strategy<Value = (f64, Vec<f64>)> {
        (0.0f64..=1.0, proptest::collection::vec(0.0f64..=1.0, 1..15))
    }

    proptest! {
        #[test]
        fn stability_in_unit_range((a_ref, a) in accs(), omega in 0.0f64..=1.0) {
            let (s, b) = stability(&chain(DistortionKind::Wn, a_ref, &a), omega).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
            for l in b.levels {
                prop_assert!((0.0..=1.0).contains(&l.pd) && (0.0..=1.0).contains(&l.pm));
            }
        }

        #[test]
        fn pure_degradation_ignores_order((a_ref, a) in accs(), seed in any::<u64>()) {
            let mut shuffled = a.clone();
            let n = shuffled.len();
            for i in (1..n).rev() {
                shuffled.swap(i, (seed as usize ^ i.wrapping_mul(2654435761)) % (i + 1));
            }
            let s1 = stability(&chain(DistortionKind::Qp, a_ref, &a), 1.0).unwrap().0;
            let s2 = stability(&chain(DistortionKind::Qp, a_ref, &shuffled), 1.0).unwrap().0;
            prop_assert!((s1 - s2).abs() < 1e-12);
        }

        #[test]
        fn monotone_chains_are_omega_free((a_ref, mut a) in accs(), w1 in 0.0f64..=1.0, w2 in 0.0f64..=1.0) {
            a.sort_by(|x, y| y.total_cmp(x));
            a.iter_mut().for_each(|v| *v = v.min(a_ref));
            let l = chain(DistortionKind::Qp, a_ref, &a);
            let (_, b) = stability(&l, w1).unwrap();
            prop_assert!(b.levels.iter().all(|l| l.pm == 0.0));
            // scaled by omega only; the ranking across detectors is unchanged
            let s1 = stability(&l, w1).unwrap().0;
            let s2 = stability(&l, w2).unwrap().0;
            if w1 <= w2 { prop_assert!(s1 >= s2 - 1e-12); } else { prop_assert!(s2 >= s1 - 1e-12); }
        }

        #[test]
        fn larger_penalty_never_raises_stability((a_ref, a) in accs(), idx in 0usize..15, drop in 0.0f64..1.0) {
            let idx = idx % a.len();
            let base = chain(DistortionKind::Qp, a_ref, &a);
            let (s0, b0) = stability(&base, 1.0).unwrap();
            // push level idx further from a_ref: PD_idx cannot decrease
            let mut worse = a.clone();
            worse[idx] = if a[idx] <= a_ref { a[idx] * (1.0 - drop) } else { (a[idx] + drop).min(1.0) };
            let (s1, b1) = stability(&chain(DistortionKind::Qp, a_ref, &worse), 1.0).unwrap();
            prop_assert!(b1.levels[idx].pd >= b0.levels[idx].pd);
            prop_assert!(s1 <= s0 + 1e-12);
        }
    }
}
