//! Henstock (gauge) integration on the extended real line, on boxes in
//! `R^n`, and fineness checks for cylinder sets of paths.
//!
//! Extended reals are plain `f64` values with `±INFINITY` as the points at
//! infinity. Intervals are half open, `[u, v)`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Division splits happen at this fraction of an interval rather than at the
/// midpoint, so dyadic rationals are never produced as split points.
pub const SPLIT_FRACTION: f64 = 0.507_106_781_186_547_5; // 1/sqrt(2) - 0.2
pub const MAX_DIVISION_DEPTH: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalKind {
    Bounded,
    LeftUnbounded,
    RightUnbounded,
    /// The whole line. Only valid as an integration domain; no tag is
    /// attached to it.
    Whole,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtInterval {
    lower: f64,
    upper: f64,
}

impl ExtInterval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || !(lower < upper) || lower == f64::INFINITY || upper == f64::NEG_INFINITY
        {
            return Err(Error::Invalid(format!("[{lower}, {upper}) is not a valid interval")));
        }
        Ok(Self { lower, upper })
    }

    pub fn bounded(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) {
            return Err(Error::Invalid(format!("[{lower}, {upper}) must have finite ends")));
        }
        Self::new(lower, upper)
    }

    pub fn left_unbounded(upper: f64) -> Result<Self> {
        Self::new(f64::NEG_INFINITY, upper)
    }

    pub fn right_unbounded(lower: f64) -> Result<Self> {
        Self::new(lower, f64::INFINITY)
    }

    pub fn whole() -> Self {
        Self { lower: f64::NEG_INFINITY, upper: f64::INFINITY }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn kind(&self) -> IntervalKind {
        match (self.lower.is_finite(), self.upper.is_finite()) {
            (true, true) => IntervalKind::Bounded,
            (false, true) => IntervalKind::LeftUnbounded,
            (true, false) => IntervalKind::RightUnbounded,
            (false, false) => IntervalKind::Whole,
        }
    }

    /// `v - u` when bounded, zero otherwise.
    pub fn length(&self) -> f64 {
        match self.kind() {
            IntervalKind::Bounded => self.upper - self.lower,
            _ => 0.0,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x < self.upper
    }
}

impl fmt::Display for ExtInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lower == f64::NEG_INFINITY {
            write!(f, "(-inf, {})", self.upper)
        } else {
            write!(f, "[{}, {})", self.lower, self.upper)
        }
    }
}

fn point_key(x: f64) -> u64 {
    // -0.0 and 0.0 are the same point.
    if x == 0.0 {
        0
    } else {
        x.to_bits()
    }
}

/// Registered points with individual gauge weights, matched exactly.
#[derive(Debug, Clone, Default)]
pub struct ExceptionalSet {
    points: Vec<(f64, f64)>,
    lookup: HashMap<u64, usize>,
}

impl ExceptionalSet {
    pub fn new(points: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut set = Self::default();
        for (x, w) in points {
            if !x.is_finite() || !(w > 0.0 && w.is_finite()) {
                return Err(Error::Invalid(format!(
                    "exceptional point ({x}, {w}) needs a finite point and positive weight"
                )));
            }
            match set.lookup.get(&point_key(x)) {
                Some(&i) => set.points[i].1 = set.points[i].1.min(w),
                None => {
                    set.lookup.insert(point_key(x), set.points.len());
                    set.points.push((x, w));
                }
            }
        }
        Ok(set)
    }

    pub fn weight(&self, x: f64) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        self.lookup.get(&point_key(x)).map(|&i| self.points[i].1)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn total_weight(&self) -> f64 {
        self.points.iter().map(|p| p.1).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

type DeltaFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A gauge `delta > 0` on the extended reals, with an optional exceptional
/// set overriding it at registered points.
#[derive(Clone)]
pub struct Gauge1D {
    delta: DeltaFn,
    exceptional: ExceptionalSet,
}

impl fmt::Debug for Gauge1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gauge1D").field("exceptional_points", &self.exceptional.points.len()).finish()
    }
}

impl Gauge1D {
    pub fn new(delta: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { delta: Arc::new(delta), exceptional: ExceptionalSet::default() }
    }

    pub fn constant(delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::Invalid(format!("gauge value {delta} must be positive")));
        }
        Ok(Self::new(move |_| delta))
    }

    pub fn with_exceptional(mut self, points: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        self.exceptional = ExceptionalSet::new(points)?;
        Ok(self)
    }

    pub fn exceptional(&self) -> &ExceptionalSet {
        &self.exceptional
    }

    pub fn is_exceptional(&self, x: f64) -> bool {
        self.exceptional.weight(x).is_some()
    }

    pub fn delta(&self, x: f64) -> f64 {
        self.exceptional.weight(x).unwrap_or_else(|| (self.delta)(x))
    }

    fn checked_delta(&self, x: f64) -> Result<f64> {
        let d = self.delta(x);
        if d > 0.0 && !d.is_nan() {
            Ok(d)
        } else {
            Err(Error::Invalid(format!("gauge is not positive at {x}: {d}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaggedPair {
    pub tag: f64,
    pub interval: ExtInterval,
}

impl TaggedPair {
    pub fn new(tag: f64, interval: ExtInterval) -> Self {
        Self { tag, interval }
    }
}

pub fn is_attached(pair: &TaggedPair) -> bool {
    let span = pair.interval;
    match span.kind() {
        IntervalKind::Bounded => pair.tag == span.lower || pair.tag == span.upper,
        IntervalKind::LeftUnbounded => pair.tag == f64::NEG_INFINITY,
        IntervalKind::RightUnbounded => pair.tag == f64::INFINITY,
        IntervalKind::Whole => false,
    }
}

pub fn is_fine(pair: &TaggedPair, gauge: &Gauge1D) -> Result<bool> {
    if !is_attached(pair) {
        return Err(Error::NotAttached { tag: pair.tag, interval: pair.interval.to_string() });
    }
    let d = gauge.checked_delta(pair.tag)?;
    let span = pair.interval;
    Ok(match span.kind() {
        IntervalKind::Bounded => span.upper - span.lower < d,
        IntervalKind::LeftUnbounded => span.upper < -1.0 / d,
        IntervalKind::RightUnbounded => span.lower > 1.0 / d,
        IntervalKind::Whole => unreachable!("whole line is never attached"),
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Division {
    pairs: Vec<TaggedPair>,
}

impl Division {
    pub fn new(pairs: Vec<TaggedPair>) -> Self {
        Self { pairs }
    }

    pub fn pairs(&self) -> &[TaggedPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn max_length(&self) -> f64 {
        self.pairs.iter().map(|p| p.interval.length()).fold(0.0, f64::max)
    }

    /// True when the intervals are disjoint and their union is exactly
    /// `domain`, compared bit for bit at every shared endpoint.
    pub fn tiles(&self, domain: &ExtInterval) -> bool {
        if self.pairs.is_empty() {
            return false;
        }
        let mut intervals: Vec<ExtInterval> = self.pairs.iter().map(|p| p.interval).collect();
        intervals.sort_by(|a, b| a.lower.total_cmp(&b.lower));
        if intervals[0].lower != domain.lower || intervals[intervals.len() - 1].upper != domain.upper {
            return false;
        }
        intervals.windows(2).all(|w| w[0].upper == w[1].lower)
    }

    pub fn is_fine(&self, gauge: &Gauge1D) -> Result<bool> {
        for p in &self.pairs {
            if !is_fine(p, gauge)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn all_tags_avoid(&self, set: &ExceptionalSet) -> bool {
        self.pairs.iter().all(|p| set.weight(p.tag).is_none())
    }
}

/// Strictly inside the left tail fineness bound, `v < -1/delta(-inf)`.
fn left_tail_cut(gauge: &Gauge1D) -> Result<f64> {
    let bound = -1.0 / gauge.checked_delta(f64::NEG_INFINITY)?;
    if !bound.is_finite() {
        return Err(Error::Invalid("gauge at -inf is too small to cut the tail".into()));
    }
    Ok(bound.next_down())
}

/// Strictly inside the right tail fineness bound, `u > 1/delta(inf)`.
fn right_tail_cut(gauge: &Gauge1D) -> Result<f64> {
    let bound = 1.0 / gauge.checked_delta(f64::INFINITY)?;
    if !bound.is_finite() {
        return Err(Error::Invalid("gauge at +inf is too small to cut the tail".into()));
    }
    Ok(bound.next_up())
}

/// Builds a gauge-fine division of `domain` with endpoint tags. Unbounded
/// tails are cut first; the remaining bounded part is split at
/// [`SPLIT_FRACTION`] until every piece is fine, preferring tags outside the
/// gauge's exceptional set.
pub fn build_division(domain: &ExtInterval, gauge: &Gauge1D) -> Result<Division> {
    let mut pairs = Vec::new();
    let mut tail = None;
    let (mut lo, mut hi) = (domain.lower, domain.upper);

    if lo == f64::NEG_INFINITY {
        let cut = left_tail_cut(gauge)?;
        if hi <= cut {
            return Ok(Division::new(vec![TaggedPair::new(f64::NEG_INFINITY, *domain)]));
        }
        pairs.push(TaggedPair::new(f64::NEG_INFINITY, ExtInterval::left_unbounded(cut)?));
        lo = cut;
    }
    if hi == f64::INFINITY {
        let cut = right_tail_cut(gauge)?;
        if lo >= cut {
            pairs.push(TaggedPair::new(f64::INFINITY, ExtInterval::right_unbounded(lo)?));
            return Ok(Division::new(pairs));
        }
        tail = Some(TaggedPair::new(f64::INFINITY, ExtInterval::right_unbounded(cut)?));
        hi = cut;
    }

    bisect_into(lo, hi, gauge, &mut pairs)?;
    pairs.extend(tail);
    Ok(Division::new(pairs))
}

fn bisect_into(lo: f64, hi: f64, gauge: &Gauge1D, pairs: &mut Vec<TaggedPair>) -> Result<()> {
    let mut stack = vec![(lo, hi, 0usize)];
    while let Some((u, v, depth)) = stack.pop() {
        let len = v - u;
        let mut chosen = None;
        let mut fallback = None;
        for tag in [u, v] {
            if len < gauge.checked_delta(tag)? {
                if gauge.is_exceptional(tag) {
                    fallback.get_or_insert(tag);
                } else {
                    chosen = Some(tag);
                    break;
                }
            }
        }
        if let Some(tag) = chosen.or(fallback) {
            pairs.push(TaggedPair::new(tag, ExtInterval::bounded(u, v)?));
            continue;
        }
        if depth >= MAX_DIVISION_DEPTH {
            return Err(Error::DepthLimit(MAX_DIVISION_DEPTH));
        }
        let mid = u + SPLIT_FRACTION * len;
        if !(mid > u && mid < v) {
            return Err(Error::DepthLimit(depth));
        }
        stack.push((mid, v, depth + 1));
        stack.push((u, mid, depth + 1));
    }
    Ok(())
}

/// Division in which each of `tags` is forced to be the tag of an interval of
/// half its gauge length, starting at the tag (or ending at it, when the tag
/// is the right end of `domain`). The rest is filled by [`build_division`].
pub fn division_with_forced_tags(domain: &ExtInterval, gauge: &Gauge1D, tags: &[f64]) -> Result<Division> {
    if domain.kind() != IntervalKind::Bounded {
        return Err(Error::Invalid("forced-tag divisions need a bounded domain".into()));
    }
    let mut forced: Vec<TaggedPair> = Vec::new();
    let mut sorted: Vec<f64> = tags.iter().copied().filter(|&t| t >= domain.lower && t <= domain.upper).collect();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    for &p in &sorted {
        let half = 0.5 * gauge.checked_delta(p)?;
        let interval = if p == domain.upper {
            ExtInterval::bounded((p - half).max(domain.lower), p)?
        } else {
            ExtInterval::bounded(p, (p + half).min(domain.upper))?
        };
        forced.push(TaggedPair::new(p, interval));
    }
    forced.sort_by(|a, b| a.interval.lower.total_cmp(&b.interval.lower));
    if forced.windows(2).any(|w| w[0].interval.upper > w[1].interval.lower) {
        return Err(Error::Invalid("forced tag intervals overlap".into()));
    }
    let mut pairs = Vec::with_capacity(forced.len() * 3);
    let mut cursor = domain.lower;
    for pair in forced {
        if pair.interval.lower > cursor {
            bisect_into(cursor, pair.interval.lower, gauge, &mut pairs)?;
        }
        cursor = pair.interval.upper;
        pairs.push(pair);
    }
    if cursor < domain.upper {
        bisect_into(cursor, domain.upper, gauge, &mut pairs)?;
    }
    Ok(Division::new(pairs))
}

/// Kahan-compensated sum of `h(tag, interval)` over the division. Pairs
/// tagged at `±inf` contribute zero and `h` is not called for them.
pub fn riemann_sum<T, H>(h: H, division: &Division) -> T
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Sub<Output = T>,
    H: Fn(f64, &ExtInterval) -> T,
{
    let mut sum = T::default();
    let mut comp = T::default();
    for p in &division.pairs {
        if p.tag.is_infinite() {
            continue;
        }
        let y = h(p.tag, &p.interval) - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Rationals in `[0, 1]` ordered by denominator then numerator, each with
/// weight `eps / 2^(k+2)` for its index `k >= 1`. The list stops once the
/// weight would drop below a few hundred ulps of 1, where intervals of that
/// size can no longer be formed.
pub fn dirichlet_rationals(eps: f64) -> Result<Vec<(f64, f64)>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Invalid(format!("eps must be positive, got {eps}")));
    }
    let floor = 256.0 * f64::EPSILON;
    let mut out = Vec::new();
    let mut k = 1i32;
    'outer: for q in 1u64.. {
        for p in 0..=q {
            if gcd(p, q) != 1 {
                continue;
            }
            let weight = eps / 2f64.powi(k + 2);
            if weight < floor {
                break 'outer;
            }
            out.push((p as f64 / q as f64, weight));
            k += 1;
        }
    }
    Ok(out)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// The indicator of the irrationals on `[0, 1]` together with the gauge that
/// makes its integral exactly one.
#[derive(Debug, Clone)]
pub struct DirichletExample {
    pub eps: f64,
    pub gauge: Gauge1D,
}

impl DirichletExample {
    pub fn new(eps: f64) -> Result<Self> {
        let gauge = Gauge1D::constant(1.0)?.with_exceptional(dirichlet_rationals(eps)?)?;
        Ok(Self { eps, gauge })
    }

    /// Zero at the registered rationals, one elsewhere.
    pub fn f(&self, x: f64) -> f64 {
        if self.gauge.is_exceptional(x) {
            0.0
        } else {
            1.0
        }
    }

    pub fn h(&self, x: f64, interval: &ExtInterval) -> f64 {
        self.f(x) * interval.length()
    }

    pub fn rationals(&self) -> Vec<f64> {
        self.gauge.exceptional().points().iter().map(|p| p.0).collect()
    }
}

#[derive(Debug, Clone)]
pub struct IntegrationOptions {
    pub max_rounds: usize,
    pub dimension_cap: usize,
    /// Points (coordinates, in more than one dimension) where tags must be
    /// avoided unless the cell is finer than the registered weight.
    pub exceptional: ExceptionalSet,
    pub max_panels: usize,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self { max_rounds: 40, dimension_cap: 4, exceptional: ExceptionalSet::default(), max_panels: 20_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralEstimate {
    pub value: f64,
    pub error: f64,
    pub rounds: usize,
    pub evaluations: usize,
}

/// Gauge integral of a point-interval function over `domain` to absolute
/// tolerance `tol`.
pub fn integrate_1d<H>(h: H, domain: &ExtInterval, tol: f64, opts: &IntegrationOptions) -> Result<IntegralEstimate>
where
    H: Fn(f64, &ExtInterval) -> f64,
{
    integrate_nd(|x: &[f64], cell: &[ExtInterval]| h(x[0], &cell[0]), &[*domain], tol, opts)
}

/// Gauge integral over a box of extended intervals, with corner tags.
pub fn integrate_nd<H>(h: H, domain: &[ExtInterval], tol: f64, opts: &IntegrationOptions) -> Result<IntegralEstimate>
where
    H: Fn(&[f64], &[ExtInterval]) -> f64,
{
    let dim = domain.len();
    if dim == 0 {
        return Err(Error::Invalid("integration domain has no dimensions".into()));
    }
    if dim > opts.dimension_cap {
        return Err(Error::DimensionCap { dim, cap: opts.dimension_cap });
    }
    if !(tol > 0.0) {
        return Err(Error::Invalid(format!("tolerance must be positive, got {tol}")));
    }
    let mut engine = BoxEngine { h: &h, dim, opts, evaluations: 0 };
    let unbounded = domain.iter().any(|d| d.kind() != IntervalKind::Bounded);
    if !unbounded {
        let lo: Vec<f64> = domain.iter().map(|d| d.lower).collect();
        let hi: Vec<f64> = domain.iter().map(|d| d.upper).collect();
        let (value, error) = engine.adaptive(&lo, &hi, tol)?;
        return Ok(IntegralEstimate { value, error, rounds: 1, evaluations: engine.evaluations });
    }

    // Cut every infinite side at +-R_k, R_k doubling each round. The tail
    // pairs are tagged at infinity and contribute nothing; the cut values are
    // extrapolated in 1/R.
    let scale =
        domain.iter().flat_map(|d| [d.lower, d.upper]).filter(|x| x.is_finite()).fold(1.0f64, |m, x| m.max(x.abs()));
    let r0 = 2.0 * scale;
    let mut table: Vec<Vec<f64>> = Vec::new();
    let mut inner_error = 0.0f64;
    let mut best_prev = f64::NAN;
    for round in 0..opts.max_rounds {
        let radius = r0 * 2f64.powi(round as i32);
        let lo: Vec<f64> = domain.iter().map(|d| if d.lower.is_finite() { d.lower } else { -radius }).collect();
        let hi: Vec<f64> = domain.iter().map(|d| if d.upper.is_finite() { d.upper } else { radius }).collect();
        let (value, error) = engine.adaptive(&lo, &hi, tol / 10.0)?;
        inner_error = inner_error.max(error);
        let mut row = vec![value];
        if let Some(prev) = table.last() {
            for j in 1..=prev.len().min(2) {
                let factor = 2f64.powi(j as i32) - 1.0;
                row.push(row[j - 1] + (row[j - 1] - prev[j - 1]) / factor);
            }
        }
        let best = *row.last().expect("row has at least one entry");
        table.push(row);
        if round >= 2 {
            let gap = (best - best_prev).abs();
            if gap + inner_error <= tol / 2.0 {
                return Ok(IntegralEstimate {
                    value: best,
                    error: gap + inner_error,
                    rounds: round + 1,
                    evaluations: engine.evaluations,
                });
            }
        }
        best_prev = best;
    }
    Err(Error::NonConvergence(format!("tail cut did not settle after {} rounds", opts.max_rounds)))
}

/// Shared engine for bounded boxes: global adaptive panels, each estimated by
/// Richardson extrapolation over uniform corner-tagged sub-divisions with
/// 2^l cells per axis.
struct BoxEngine<'a, H> {
    h: &'a H,
    dim: usize,
    opts: &'a IntegrationOptions,
    evaluations: usize,
}

struct Panel {
    lo: Vec<f64>,
    hi: Vec<f64>,
    value: f64,
    error: f64,
}

impl<H> BoxEngine<'_, H>
where
    H: Fn(&[f64], &[ExtInterval]) -> f64,
{
    fn levels(&self) -> usize {
        match self.dim {
            1 => 5,
            2 => 4,
            3 => 3,
            _ => 2,
        }
    }

    fn adaptive(&mut self, lo: &[f64], hi: &[f64], tol: f64) -> Result<(f64, f64)> {
        let first = self.panel(lo.to_vec(), hi.to_vec())?;
        let mut panels = vec![first];
        loop {
            let mut total = 0.0;
            let mut comp = 0.0;
            let mut error = 0.0;
            for p in &panels {
                let y = p.value - comp;
                let t = total + y;
                comp = (t - total) - y;
                total = t;
                error += p.error;
            }
            if !total.is_finite() {
                return Err(Error::Domain("integrand is not finite on the domain".into()));
            }
            if error <= tol {
                return Ok((total, error));
            }
            if panels.len() >= self.opts.max_panels {
                return Err(Error::NonConvergence(format!(
                    "{} panels without reaching tolerance {tol:.3e} (estimate {error:.3e})",
                    panels.len()
                )));
            }
            let worst = panels
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
                .map(|(i, _)| i)
                .expect("panel list is never empty");
            let p = panels.swap_remove(worst);
            let axis = (0..self.dim)
                .max_by(|&a, &b| (p.hi[a] - p.lo[a]).total_cmp(&(p.hi[b] - p.lo[b])))
                .expect("dimension is positive");
            let cut = p.lo[axis] + SPLIT_FRACTION * (p.hi[axis] - p.lo[axis]);
            if !(cut > p.lo[axis] && cut < p.hi[axis]) {
                return Err(Error::NonConvergence("panel width underflow".into()));
            }
            let mut left_hi = p.hi.clone();
            left_hi[axis] = cut;
            let mut right_lo = p.lo.clone();
            right_lo[axis] = cut;
            panels.push(self.panel(p.lo, left_hi)?);
            panels.push(self.panel(right_lo, p.hi)?);
        }
    }

    fn panel(&mut self, lo: Vec<f64>, hi: Vec<f64>) -> Result<Panel> {
        let levels = self.levels();
        let mut prev: Vec<f64> = Vec::new();
        let mut diag_prev = f64::NAN;
        let mut diag = f64::NAN;
        for l in 0..=levels {
            let mut row = vec![self.uniform_sum(&lo, &hi, 1usize << l)?];
            for j in 1..=l {
                let factor = 2f64.powi(j as i32) - 1.0;
                row.push(row[j - 1] + (row[j - 1] - prev[j - 1]) / factor);
            }
            diag_prev = diag;
            diag = row[l];
            prev = row;
        }
        Ok(Panel { lo, hi, value: diag, error: (diag - diag_prev).abs() })
    }

    /// Riemann sum over `n` cells per axis, each tagged at its lowest
    /// corner that is not exceptional.
    fn uniform_sum(&mut self, lo: &[f64], hi: &[f64], n: usize) -> Result<f64> {
        let d = self.dim;
        let edges: Vec<Vec<f64>> = (0..d)
            .map(|a| {
                (0..=n).map(|j| if j == n { hi[a] } else { lo[a] + (hi[a] - lo[a]) * j as f64 / n as f64 }).collect()
            })
            .collect();
        let mut index = vec![0usize; d];
        let mut cell_lo = vec![0.0; d];
        let mut cell_hi = vec![0.0; d];
        let mut sum = 0.0;
        let mut comp = 0.0;
        loop {
            for a in 0..d {
                cell_lo[a] = edges[a][index[a]];
                cell_hi[a] = edges[a][index[a] + 1];
            }
            let y = self.cell_sum(&cell_lo, &cell_hi, 0)? - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            let mut a = 0;
            loop {
                index[a] += 1;
                if index[a] < n {
                    break;
                }
                index[a] = 0;
                a += 1;
                if a == d {
                    return Ok(sum);
                }
            }
        }
    }

    fn corner_weight(&self, point: &[f64]) -> Option<f64> {
        point.iter().filter_map(|&x| self.opts.exceptional.weight(x)).reduce(f64::min)
    }

    /// Contribution of one cell. Cells whose corners are all exceptional and
    /// too coarse for their weights are split further.
    fn cell_sum(&mut self, lo: &[f64], hi: &[f64], depth: usize) -> Result<f64> {
        let d = self.dim;
        let mut point = vec![0.0; d];
        let side = (0..d).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
        let mut fallback: Option<Vec<f64>> = None;
        for corner in 0..(1usize << d) {
            for a in 0..d {
                point[a] = if corner >> a & 1 == 1 { hi[a] } else { lo[a] };
            }
            match self.corner_weight(&point) {
                None => return Ok(self.eval(&point, lo, hi)),
                Some(w) if side < w && fallback.is_none() => fallback = Some(point.clone()),
                Some(_) => {}
            }
        }
        if let Some(p) = fallback {
            return Ok(self.eval(&p, lo, hi));
        }
        if depth >= MAX_DIVISION_DEPTH {
            return Err(Error::DepthLimit(MAX_DIVISION_DEPTH));
        }
        let axis = (0..d).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).expect("dimension is positive");
        let cut = lo[axis] + SPLIT_FRACTION * (hi[axis] - lo[axis]);
        if !(cut > lo[axis] && cut < hi[axis]) {
            return Err(Error::DepthLimit(depth));
        }
        let mut left_hi = hi.to_vec();
        left_hi[axis] = cut;
        let mut right_lo = lo.to_vec();
        right_lo[axis] = cut;
        Ok(self.cell_sum(lo, &left_hi, depth + 1)? + self.cell_sum(&right_lo, hi, depth + 1)?)
    }

    fn eval(&mut self, point: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
        let cell: Vec<ExtInterval> = lo.iter().zip(hi).map(|(&u, &v)| ExtInterval { lower: u, upper: v }).collect();
        self.evaluations += 1;
        (self.h)(point, &cell)
    }
}

/// Finite, strictly increasing set of times interior to a window.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionSet {
    times: Vec<f64>,
}

impl DimensionSet {
    pub fn new(times: Vec<f64>, window: (f64, f64)) -> Result<Self> {
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invalid("dimension set times must be strictly increasing".into()));
        }
        if let Some(&t) = times.iter().find(|&&t| !(t > window.0 && t < window.1)) {
            return Err(Error::Invalid(format!("time {t} is not interior to [{}, {}]", window.0, window.1)));
        }
        Ok(Self { times })
    }

    pub fn empty() -> Self {
        Self { times: Vec::new() }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn contains(&self, t: f64) -> bool {
        self.times.contains(&t)
    }
}

/// Paths passing through one interval per time of a dimension set.
#[derive(Debug, Clone, PartialEq)]
pub struct Cylinder {
    pub dims: DimensionSet,
    pub boxes: Vec<ExtInterval>,
}

impl Cylinder {
    pub fn new(dims: DimensionSet, boxes: Vec<ExtInterval>) -> Result<Self> {
        if dims.len() != boxes.len() {
            return Err(Error::Invalid(format!("{} boxes for {} dimensions", boxes.len(), dims.len())));
        }
        Ok(Self { dims, boxes })
    }
}

/// Cylinder of paths pinned at both ends of the window.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedCylinder {
    pub endpoints: (f64, f64),
    pub cylinder: Cylinder,
}

impl ConstrainedCylinder {
    pub fn new(endpoints: (f64, f64), dims: DimensionSet, boxes: Vec<ExtInterval>) -> Result<Self> {
        if !(endpoints.0.is_finite() && endpoints.1.is_finite()) {
            return Err(Error::Invalid("constrained endpoints must be finite".into()));
        }
        Ok(Self { endpoints, cylinder: Cylinder::new(dims, boxes)? })
    }

    pub fn volume(&self) -> f64 {
        cylinder_volume(&self.cylinder)
    }
}

/// Product of the box lengths; zero when any box is unbounded.
pub fn cylinder_volume(c: &Cylinder) -> f64 {
    c.boxes.iter().map(ExtInterval::length).product()
}

/// Samples of a path at a set of times.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSamples {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl PathSamples {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Invalid("path sample times and values differ in length".into()));
        }
        Ok(Self { times, values })
    }

    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.times.iter().position(|&s| s == t).map(|i| self.values[i])
    }
}

type MinimalSetFn = Arc<dyn Fn(&PathSamples) -> Vec<f64> + Send + Sync>;
type DeltaFamilyFn = Arc<dyn Fn(&DimensionSet, &[f64]) -> f64 + Send + Sync>;

/// Gauge on path space: a finite time list `A`, a rule choosing the minimal
/// dimension set from a path, and a gauge value for each dimension set.
#[derive(Clone)]
pub struct InfGauge {
    times: Vec<f64>,
    minimal_set: MinimalSetFn,
    delta_family: DeltaFamilyFn,
}

impl fmt::Debug for InfGauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InfGauge").field("times", &self.times).finish_non_exhaustive()
    }
}

impl InfGauge {
    pub fn new(
        times: Vec<f64>,
        minimal_set: impl Fn(&PathSamples) -> Vec<f64> + Send + Sync + 'static,
        delta_family: impl Fn(&DimensionSet, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { times, minimal_set: Arc::new(minimal_set), delta_family: Arc::new(delta_family) }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
}

/// Checks `(path, N, I[N])` against a path-space gauge: the minimal set must
/// lie in `N`, and every sampled value must be a fine tag of its box under
/// the gauge value for `N`.
pub fn check_gamma_fine(samples: &PathSamples, c: &Cylinder, gauge: &InfGauge) -> Result<bool> {
    let mut values = Vec::with_capacity(c.dims.len());
    for &t in c.dims.times() {
        match samples.value_at(t) {
            Some(v) => values.push(v),
            None => return Err(Error::Invalid(format!("path is not sampled at dimension time {t}"))),
        }
    }
    let minimal = (gauge.minimal_set)(samples);
    if let Some(&t) = minimal.iter().find(|&&t| !gauge.times.contains(&t)) {
        return Err(Error::Invalid(format!("minimal set returned {t}, which is not in A")));
    }
    if minimal.iter().any(|&t| !c.dims.contains(t)) {
        return Ok(false);
    }
    for (&v, b) in values.iter().zip(&c.boxes) {
        if !is_attached(&TaggedPair::new(v, *b)) {
            return Err(Error::NotAttached { tag: v, interval: b.to_string() });
        }
    }
    let delta = (gauge.delta_family)(&c.dims, &values);
    let local = Gauge1D::constant(delta)?;
    for (&v, b) in values.iter().zip(&c.boxes) {
        if !is_fine(&TaggedPair::new(v, *b), &local)? {
            return Ok(false);
        }
    }
    Ok(true)
}
