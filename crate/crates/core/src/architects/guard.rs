//! Wrappers that limit how fast an architect may move the weights.

use super::{Architect, ArchitectContext, SWITCH_TOLERANCE};
use crate::error::Result;
use crate::events::Event;
use crate::reward::WeightVector;
use crate::satenv::KpiSnapshot;

/// Rejects weight changes proposed less than `min_steps` after the previous
/// accepted change.
pub struct CooldownGuard<A> {
    inner: A,
    min_steps: u64,
    last_change: Option<u64>,
    events: Vec<Event>,
}

impl<A: Architect> CooldownGuard<A> {
    pub fn new(inner: A, min_steps: u64) -> Self {
        CooldownGuard {
            inner,
            min_steps,
            last_change: None,
            events: Vec::new(),
        }
    }

    pub fn inner(&self) -> &A {
        &self.inner
    }
}

impl<A: Architect> Architect for CooldownGuard<A> {
    fn name(&self) -> String {
        self.inner.name()
    }

    fn propose(&mut self, kpi: &KpiSnapshot, ctx: &ArchitectContext) -> Result<WeightVector> {
        let proposed = self.inner.propose(kpi, ctx)?;
        if proposed.linf_distance(&ctx.current) <= SWITCH_TOLERANCE {
            return Ok(proposed);
        }
        if let Some(last) = self.last_change {
            if ctx.step.saturating_sub(last) < self.min_steps {
                self.events.push(Event::ProposalSuppressed {
                    step: ctx.step,
                    proposed,
                    reason: format!("cooldown: last change at step {last}"),
                });
                return Ok(ctx.current);
            }
        }
        self.last_change = Some(ctx.step);
        Ok(proposed)
    }

    fn tick(&mut self, step: u64, current: &WeightVector) -> Option<WeightVector> {
        self.inner.tick(step, current)
    }

    fn drain_events(&mut self) -> Vec<Event> {
        let mut out = self.inner.drain_events();
        out.append(&mut self.events);
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    from: WeightVector,
    to: WeightVector,
    start: u64,
}

/// Moves the applied weights linearly toward each accepted target over
/// `interval` steps. A new target arriving before the current move has
/// finished is parked and taken up once it has.
pub struct ThrottleInterpolate<A> {
    inner: A,
    interval: u64,
    segment: Option<Segment>,
    pending: Option<WeightVector>,
    events: Vec<Event>,
}

impl<A: Architect> ThrottleInterpolate<A> {
    pub fn new(inner: A, interval: u64) -> Self {
        ThrottleInterpolate {
            inner,
            interval: interval.max(1),
            segment: None,
            pending: None,
            events: Vec::new(),
        }
    }

    /// Weights on the current segment at `step`.
    pub fn value_at(&self, step: u64) -> Option<WeightVector> {
        self.segment.map(|s| {
            let t = step.saturating_sub(s.start) as f64 / self.interval as f64;
            s.from.lerp(&s.to, t)
        })
    }

    pub fn pending(&self) -> Option<WeightVector> {
        self.pending
    }

    fn settled(&self, step: u64) -> bool {
        self.segment.is_none_or(|s| {
            step.saturating_sub(s.start) >= self.interval
                || s.from.linf_distance(&s.to) <= SWITCH_TOLERANCE
        })
    }
}

impl<A: Architect> Architect for ThrottleInterpolate<A> {
    fn name(&self) -> String {
        format!("{}+throttle", self.inner.name())
    }

    fn propose(&mut self, kpi: &KpiSnapshot, ctx: &ArchitectContext) -> Result<WeightVector> {
        let proposed = self.inner.propose(kpi, ctx)?;
        let Some(seg) = self.segment else {
            // nothing to interpolate from on the very first query
            self.segment = Some(Segment {
                from: proposed,
                to: proposed,
                start: ctx.step,
            });
            return Ok(proposed);
        };
        if proposed.linf_distance(&seg.to) <= SWITCH_TOLERANCE {
            self.pending = None;
            return Ok(self.value_at(ctx.step).unwrap_or(ctx.current));
        }
        if self.settled(ctx.step) {
            self.segment = Some(Segment {
                from: ctx.current,
                to: proposed,
                start: ctx.step,
            });
            self.pending = None;
            return Ok(ctx.current);
        }
        self.pending = Some(proposed);
        self.events.push(Event::TargetDeferred {
            step: ctx.step,
            proposed,
        });
        Ok(self.value_at(ctx.step).unwrap_or(ctx.current))
    }

    fn tick(&mut self, step: u64, current: &WeightVector) -> Option<WeightVector> {
        if let Some(next) = self.pending {
            if self.settled(step) {
                self.segment = Some(Segment {
                    from: *current,
                    to: next,
                    start: step,
                });
                self.pending = None;
            }
        }
        self.value_at(step)
    }

    fn drain_events(&mut self) -> Vec<Event> {
        let mut out = self.inner.drain_events();
        out.append(&mut self.events);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::architects::FixedArchitect;
    use crate::satenv::RegimeLabel;

    /// Returns the next vector of a script on each call.
    struct Scripted(Vec<WeightVector>, usize);

    impl Architect for Scripted {
        fn name(&self) -> String {
            "scripted".into()
        }
        fn propose(&mut self, _: &KpiSnapshot, _: &ArchitectContext) -> Result<WeightVector> {
            let w = self.0[self.1.min(self.0.len() - 1)];
            self.1 += 1;
            Ok(w)
        }
    }

    fn ctx(step: u64, current: WeightVector) -> ArchitectContext {
        ArchitectContext {
            step,
            current,
            regime: RegimeLabel::Mixed,
        }
    }

    fn kpi() -> KpiSnapshot {
        KpiSnapshot::from_array([0.0; 5])
    }

    #[test]
    fn cooldown_blocks_fast_changes() {
        let a = WeightVector::splat(0.5).unwrap();
        let b = WeightVector::splat(1.0).unwrap();
        let mut g = CooldownGuard::new(Scripted(vec![a, b, b, b], 0), 50);
        assert_eq!(g.propose(&kpi(), &ctx(0, b)).unwrap(), a);
        assert_eq!(g.propose(&kpi(), &ctx(30, a)).unwrap(), a);
        assert_eq!(g.drain_events().len(), 1);
        assert_eq!(g.propose(&kpi(), &ctx(50, a)).unwrap(), b);
        // same as current: not a change, not suppressed
        assert_eq!(g.propose(&kpi(), &ctx(51, b)).unwrap(), b);
        assert!(g.drain_events().is_empty());
    }

    #[test]
    fn throttle_midpoint_and_deferral() {
        let a = WeightVector::splat(0.5).unwrap();
        let b = WeightVector::splat(1.5).unwrap();
        let c = WeightVector::splat(0.1).unwrap();
        let mut t = ThrottleInterpolate::new(Scripted(vec![a, b, c], 0), 1000);
        assert_eq!(t.propose(&kpi(), &ctx(0, a)).unwrap(), a);
        assert_eq!(t.propose(&kpi(), &ctx(0, a)).unwrap(), a);
        let mid = t.tick(500, &a).unwrap();
        for v in mid.as_array() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        // a new target inside the interval is parked
        let held = t.propose(&kpi(), &ctx(600, t.value_at(600).unwrap())).unwrap();
        assert!((held.get(0) - 1.1).abs() < 1e-12);
        assert_eq!(t.pending(), Some(c));
        assert!(matches!(t.drain_events()[..], [Event::TargetDeferred { step: 600, .. }]));
        let end = t.tick(1000, &t.value_at(999).unwrap()).unwrap();
        assert!(t.pending().is_none());
        assert!((end.get(0) - 1.5).abs() < 2e-3);
        let later = t.tick(2000, &end).unwrap();
        assert_eq!(later, c);
    }

    #[test]
    fn throttle_steps_are_bounded() {
        let a = WeightVector::splat(0.01).unwrap();
        let b = WeightVector::splat(2.0).unwrap();
        let mut t = ThrottleInterpolate::new(Scripted(vec![a, b], 0), 1000);
        let mut cur = t.propose(&kpi(), &ctx(0, a)).unwrap();
        cur = t.propose(&kpi(), &ctx(10, cur)).unwrap();
        for step in 11..1500 {
            let next = t.tick(step, &cur).unwrap();
            assert!(next.linf_distance(&cur) <= 1.99 / 1000.0 + 1e-12);
            cur = next;
        }
        assert_eq!(cur, b);
    }

    #[test]
    fn fixed_passes_through_guards() {
        let w = WeightVector::splat(0.7).unwrap();
        let mut g = CooldownGuard::new(ThrottleInterpolate::new(FixedArchitect { weights: w }, 10), 50);
        assert_eq!(g.propose(&kpi(), &ctx(0, w)).unwrap(), w);
        assert_eq!(g.tick(5, &w), Some(w));
    }
}
