//! The resolution game loop.
//!
//! A game position is a cleaned [`MonomialState`].  Each move blows up a
//! center chosen from the position's invariants:
//!
//! * While the two-word invariant vanishes the game is in its **tight
//!   phase**: the center is dictated by the gamma value (a single deep
//!   divisor, or a pair of divisors), and the descent of gamma drives the
//!   endgame.
//! * Otherwise the **singular locus** picks the center: a whole curve when
//!   some divisor is deep enough (ties broken toward the younger divisor),
//!   the point alone otherwise.
//!
//! Point blow-ups have a fiber of candidate points; an adversary (the
//! *devil*) picks among them.  Three adversaries are provided: `WorstCase`
//! greedily maximizes the child's two-word invariant, `Scripted` follows a
//! fixed list of choices, and `Exhaustive` explores every fiber point,
//! producing one [`Trace`] per finished game.
//!
//! Every move is recorded as a [`TraceStep`] with the full invariant report
//! on both sides, so a finished trace supports offline audits:
//! [`detect_jump_episodes`] brackets each invariant-raising step together
//! with the single-bad-divisor run it starts and verifies the inequality
//! chain that caps the raise, and [`compare_old_new`] checks that the
//! legacy comparison tuple still falls at every non-tight step.

use std::fmt;

use crate::blowup::{self, BlowupError, Center, FiberPoint, Outcome};
use crate::invariants::{
    analyze, DivisorReport, InvariantError, InvariantReport, StateAnalysis, TightCase,
};
use crate::order::{GammaValue, OldTuple, SpadePair, Word};
use crate::rat::Rat;
use crate::state::{Axis, Configuration, MonomialState};

/// How the adversary picks a fiber point at each point-style blow-up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DevilStrategy {
    /// Analyze every candidate child and take the one with the largest
    /// two-word invariant; ties go to the earliest candidate in fiber
    /// order.  When no candidate yields a new position the first candidate
    /// (whatever ends the game) is taken.
    WorstCase,
    /// Explore every fiber point, branching into one trace per finished
    /// game.  Errs with [`DriverError::PathBudget`] past `max_paths` games.
    Exhaustive { max_paths: usize },
    /// Consume one scripted choice per point-style blow-up (point centers
    /// and two-divisor gamma centers).  A missing or invalid entry falls
    /// back to the first candidate in fiber order.
    Scripted(Vec<FiberPoint>),
}

/// How a finished game ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    /// The fiber of the last blow-up holds no singular point.
    Resolved,
    /// The order of the last coefficient fell below its floor: the
    /// position dropped out of the stratum the game plays on.
    SigmaDrop,
    /// The tight phase ran out of singular fiber points.
    TightResolved,
    /// The step budget ran out first.
    MaxSteps,
    /// The precision budget ran out first.
    PrecisionExhausted,
}

impl fmt::Display for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Terminal::Resolved => "resolved",
            Terminal::SigmaDrop => "sigma-drop",
            Terminal::TightResolved => "tight-resolved",
            Terminal::MaxSteps => "max-steps",
            Terminal::PrecisionExhausted => "precision-exhausted",
        };
        write!(f, "{s}")
    }
}

/// What kind of move a step was.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    /// A point blow-up whose word of bad residuals did not rise.
    Standard,
    /// A point blow-up that raised the word of bad residuals.
    Esoteric,
    /// A curve blow-up chosen from the singular locus.
    CurveStep,
    /// A move of the tight phase, directed by the gamma value.
    GammaStep,
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StepKind::Standard => "standard",
            StepKind::Esoteric => "esoteric",
            StepKind::CurveStep => "curve",
            StepKind::GammaStep => "tight",
        };
        write!(f, "{s}")
    }
}

/// What a single step produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeTag {
    /// A new position; the game goes on.
    Continued,
    Resolved,
    SigmaDrop,
    PrecisionExhausted,
}

impl fmt::Display for OutcomeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OutcomeTag::Continued => "continued",
            OutcomeTag::Resolved => "resolved",
            OutcomeTag::SigmaDrop => "sigma-drop",
            OutcomeTag::PrecisionExhausted => "precision-exhausted",
        };
        write!(f, "{s}")
    }
}

/// One recorded move: the position before, the center, the adversary's
/// fiber choice (for point-style moves), and the resulting position with
/// its invariants (absent when the move ended the game).
#[derive(Debug, Clone)]
pub struct TraceStep {
    /// Blow-up depth of the pre-move position.
    pub year: u32,
    pub pre_state: MonomialState,
    pub pre: InvariantReport,
    pub center: Center,
    pub fiber: Option<FiberPoint>,
    pub post_state: Option<MonomialState>,
    pub post: Option<InvariantReport>,
    pub kind: StepKind,
    pub outcome: OutcomeTag,
}

/// One finished game: the cleaned initial position, every move, and how it
/// ended.
#[derive(Debug, Clone)]
pub struct Trace {
    pub initial_state: MonomialState,
    pub initial: InvariantReport,
    pub steps: Vec<TraceStep>,
    pub terminal: Terminal,
}

/// Driver failures.  Expected game endings are [`Terminal`] statuses, not
/// errors; these arise from misuse or broken internal contracts.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DriverError {
    #[error("the two-word invariant vanishes here; the tight phase picks its own centers")]
    TightPhase,
    #[error("more than {limit} finished games; raise the path budget to see the rest")]
    PathBudget { limit: usize },
    #[error("driver contract broken: {what}")]
    Internal { what: String },
    #[error(transparent)]
    Blowup(#[from] BlowupError),
    #[error(transparent)]
    Invariant(#[from] InvariantError),
}

/// How a point blow-up compares to the move before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepClass {
    Standard,
    Esoteric,
    /// The pre-move position has no bad divisor, so there is no word to
    /// compare (also reported for curve moves).
    NotApplicable,
}

/// The ascending word of weighted residuals over the bad divisors of a
/// position.
pub fn a_word(report: &InvariantReport) -> Word {
    let mut letters: Vec<Rat> = report
        .divisors
        .iter()
        .filter(|d| d.bad)
        .filter_map(|d| d.w_rho)
        .collect();
    letters.sort();
    Word(letters)
}

/// Classifies a point blow-up: `Esoteric` exactly when the ascending word
/// of bad weighted residuals rises from `pre` to `post`.
pub fn classify_transformation(pre: &InvariantReport, post: &InvariantReport) -> StepClass {
    if pre.configuration.bad_count() == 0 {
        return StepClass::NotApplicable;
    }
    if a_word(pre) < a_word(post) {
        StepClass::Esoteric
    } else {
        StepClass::Standard
    }
}

/// Picks the next center from a cleaned position's report: a curve when the
/// singular locus contains one (the deeper divisor wins; ties go to the
/// larger index, i.e. the younger divisor), the point otherwise.  Errs with
/// [`DriverError::TightPhase`] when the two-word invariant vanishes — the
/// tight phase chooses centers by the gamma value instead.
pub fn select_center(report: &InvariantReport) -> Result<Center, DriverError> {
    use crate::invariants::SingularLocusDesc::*;
    if report.inv_spade.is_zero() {
        return Err(DriverError::TightPhase);
    }
    match report.singular_locus {
        PointOnly => Ok(Center::Point),
        CurveX => Ok(Center::Curve(Axis::X)),
        CurveY => Ok(Center::Curve(Axis::Y)),
        BothCurves => {
            let find = |axis: Axis| {
                report
                    .divisors
                    .iter()
                    .find(|d| d.axis == axis)
                    .ok_or_else(|| DriverError::Internal {
                        what: format!("both curves are singular but the {axis} divisor is missing"),
                    })
            };
            let dx = find(Axis::X)?;
            let dy = find(Axis::Y)?;
            if (dx.h, dx.index) > (dy.h, dy.index) {
                Ok(Center::Curve(Axis::X))
            } else {
                Ok(Center::Curve(Axis::Y))
            }
        }
    }
}

/// Default step budget: one move per multiple of the coefficient degree
/// that fits in the precision budget.
pub fn default_max_steps(state: &MonomialState) -> u32 {
    state.prec / state.pe()
}

/// Plays the game from `state` (cleaned first) until a terminal status or
/// the step budget.  Returns one trace per finished game: a single trace
/// for `WorstCase` and `Scripted`, one per explored path for `Exhaustive`.
///
/// A starting position too coarse to analyze is a caller error and comes
/// back as `Err`; precision running out *during* play is an expected ending
/// and is reported as [`Terminal::PrecisionExhausted`].
pub fn run(
    state: &MonomialState,
    devil: &DevilStrategy,
    max_steps: u32,
) -> Result<Vec<Trace>, DriverError> {
    let root = analyze(state)?;
    let mut ctx = Ctx {
        devil,
        max_steps,
        initial_state: root.cleaned.clone(),
        initial: root.report.clone(),
        traces: Vec::new(),
        script_pos: 0,
    };
    explore(&mut ctx, root.cleaned, root.report, Vec::new())?;
    Ok(ctx.traces)
}

struct Ctx<'a> {
    devil: &'a DevilStrategy,
    max_steps: u32,
    initial_state: MonomialState,
    initial: InvariantReport,
    traces: Vec<Trace>,
    script_pos: usize,
}

fn finish(ctx: &mut Ctx, steps: Vec<TraceStep>, terminal: Terminal) -> Result<(), DriverError> {
    if let DevilStrategy::Exhaustive { max_paths } = ctx.devil {
        if ctx.traces.len() >= *max_paths {
            return Err(DriverError::PathBudget { limit: *max_paths });
        }
    }
    ctx.traces.push(Trace {
        initial_state: ctx.initial_state.clone(),
        initial: ctx.initial.clone(),
        steps,
        terminal,
    });
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn mk_step(
    state: MonomialState,
    report: InvariantReport,
    center: Center,
    fiber: Option<FiberPoint>,
    post_state: Option<MonomialState>,
    post: Option<InvariantReport>,
    kind: StepKind,
    outcome: OutcomeTag,
) -> TraceStep {
    TraceStep {
        year: state.year,
        pre_state: state,
        pre: report,
        center,
        fiber,
        post_state,
        post,
        kind,
        outcome,
    }
}

fn explore(
    ctx: &mut Ctx,
    state: MonomialState,
    report: InvariantReport,
    steps: Vec<TraceStep>,
) -> Result<(), DriverError> {
    if steps.len() as u32 >= ctx.max_steps {
        return finish(ctx, steps, Terminal::MaxSteps);
    }
    if report.inv_spade.is_zero() {
        tight_move(ctx, state, report, steps)
    } else {
        monomial_move(ctx, state, report, steps)
    }
}

/// The divisor axes named by the gamma value of a tight position.
fn gamma_axes(state: &MonomialState, report: &InvariantReport) -> Result<Vec<Axis>, DriverError> {
    match &report.gamma {
        GammaValue::NegInfinity => Err(DriverError::Internal {
            what: "tight phase reached with no gamma center".into(),
        }),
        GammaValue::Value { indices, .. } => indices
            .iter()
            .map(|ix| {
                state
                    .monomial
                    .divisors
                    .iter()
                    .find(|d| d.index == *ix)
                    .map(|d| d.axis)
                    .ok_or_else(|| DriverError::Internal {
                        what: format!("gamma names divisor {ix}, which is not at the point"),
                    })
            })
            .collect(),
    }
}

fn tight_move(
    ctx: &mut Ctx,
    state: MonomialState,
    report: InvariantReport,
    mut steps: Vec<TraceStep>,
) -> Result<(), DriverError> {
    let axes = gamma_axes(&state, &report)?;
    let center = Center::Gamma(axes.clone());
    match blowup::transform_gamma(&state, &axes) {
        Err(BlowupError::Invariant(InvariantError::PrecisionExhausted { .. })) => {
            steps.push(mk_step(
                state,
                report,
                center,
                None,
                None,
                None,
                StepKind::GammaStep,
                OutcomeTag::PrecisionExhausted,
            ));
            finish(ctx, steps, Terminal::PrecisionExhausted)
        }
        Err(e) => Err(e.into()),
        Ok(cands) if cands.is_empty() => {
            steps.push(mk_step(
                state,
                report,
                center,
                None,
                None,
                None,
                StepKind::GammaStep,
                OutcomeTag::Resolved,
            ));
            finish(ctx, steps, Terminal::TightResolved)
        }
        Ok(cands) => {
            let point_like = axes.len() == 2;
            dispatch(
                ctx,
                state,
                report,
                steps,
                center,
                cands,
                StepKind::GammaStep,
                point_like,
            )
        }
    }
}

fn monomial_move(
    ctx: &mut Ctx,
    state: MonomialState,
    report: InvariantReport,
    mut steps: Vec<TraceStep>,
) -> Result<(), DriverError> {
    let center = select_center(&report)?;
    match center {
        Center::Curve(axis) => {
            let out = blowup::transform_curve(&state, axis)?;
            settle(
                ctx,
                state,
                report,
                steps,
                Center::Curve(axis),
                None,
                out,
                StepKind::CurveStep,
                None,
            )
        }
        Center::Point => match blowup::enumerate_fiber(&state) {
            Err(BlowupError::Invariant(InvariantError::PrecisionExhausted { .. })) => {
                steps.push(mk_step(
                    state,
                    report,
                    Center::Point,
                    None,
                    None,
                    None,
                    StepKind::Standard,
                    OutcomeTag::PrecisionExhausted,
                ));
                finish(ctx, steps, Terminal::PrecisionExhausted)
            }
            Err(e) => Err(e.into()),
            Ok(cands) if cands.is_empty() => {
                steps.push(mk_step(
                    state,
                    report,
                    Center::Point,
                    None,
                    None,
                    None,
                    StepKind::Standard,
                    OutcomeTag::Resolved,
                ));
                finish(ctx, steps, Terminal::Resolved)
            }
            Ok(cands) => dispatch(
                ctx,
                state,
                report,
                steps,
                Center::Point,
                cands,
                StepKind::Standard,
                true,
            ),
        },
        Center::Gamma(_) => Err(DriverError::Internal {
            what: "locus centers are points or curves".into(),
        }),
    }
}

/// Lets the adversary pick among the fiber candidates (or explores them
/// all) and continues each chosen branch.
#[allow(clippy::too_many_arguments)]
fn dispatch(
    ctx: &mut Ctx,
    state: MonomialState,
    report: InvariantReport,
    steps: Vec<TraceStep>,
    center: Center,
    mut cands: Vec<(FiberPoint, Outcome)>,
    base_kind: StepKind,
    point_like: bool,
) -> Result<(), DriverError> {
    let devil = ctx.devil;
    match devil {
        DevilStrategy::Exhaustive { .. } => {
            for (fiber, out) in cands {
                settle(
                    ctx,
                    state.clone(),
                    report.clone(),
                    steps.clone(),
                    center.clone(),
                    Some(fiber),
                    out,
                    base_kind,
                    None,
                )?;
            }
            Ok(())
        }
        DevilStrategy::Scripted(script) => {
            let want = if point_like {
                let w = script.get(ctx.script_pos).cloned();
                ctx.script_pos += 1;
                w
            } else {
                None
            };
            let idx = want
                .and_then(|fp| cands.iter().position(|(f, _)| *f == fp))
                .unwrap_or(0);
            let (fiber, out) = cands.swap_remove(idx);
            settle(
                ctx, state, report, steps, center,
                Some(fiber),
                out,
                base_kind,
                None,
            )
        }
        DevilStrategy::WorstCase => {
            let mut best: Option<(usize, StateAnalysis)> = None;
            for (i, (_, out)) in cands.iter().enumerate() {
                if let Outcome::NewState(s) = out {
                    match analyze(s) {
                        Ok(an) => {
                            let better = match &best {
                                None => true,
                                Some((_, b)) => an.report.inv_spade > b.report.inv_spade,
                            };
                            if better {
                                best = Some((i, an));
                            }
                        }
                        // A child too coarse to analyze cannot be compared;
                        // it is never the adversary's pick.
                        Err(InvariantError::PrecisionExhausted { .. }) => {}
                        Err(e) => return Err(e.into()),
                    }
                }
            }
            let (idx, cached) = match best {
                Some((i, an)) => (i, Some(an)),
                None => (0, None),
            };
            let (fiber, out) = cands.swap_remove(idx);
            settle(
                ctx, state, report, steps, center,
                Some(fiber),
                out,
                base_kind,
                cached,
            )
        }
    }
}

/// Records one chosen move and either recurses into the new position or
/// closes the trace with the matching terminal status.
#[allow(clippy::too_many_arguments)]
fn settle(
    ctx: &mut Ctx,
    state: MonomialState,
    report: InvariantReport,
    mut steps: Vec<TraceStep>,
    center: Center,
    fiber: Option<FiberPoint>,
    out: Outcome,
    base_kind: StepKind,
    cached: Option<StateAnalysis>,
) -> Result<(), DriverError> {
    match out {
        Outcome::NewState(s) => {
            let analyzed = match cached {
                Some(a) => Ok(a),
                None => analyze(&s),
            };
            match analyzed {
                Ok(an) => {
                    let kind = match base_kind {
                        StepKind::Standard | StepKind::Esoteric => {
                            match classify_transformation(&report, &an.report) {
                                StepClass::Esoteric => StepKind::Esoteric,
                                _ => StepKind::Standard,
                            }
                        }
                        other => other,
                    };
                    steps.push(mk_step(
                        state,
                        report,
                        center,
                        fiber,
                        Some(an.cleaned.clone()),
                        Some(an.report.clone()),
                        kind,
                        OutcomeTag::Continued,
                    ));
                    explore(ctx, an.cleaned, an.report, steps)
                }
                Err(InvariantError::PrecisionExhausted { .. }) => {
                    steps.push(mk_step(
                        state,
                        report,
                        center,
                        fiber,
                        Some(s),
                        None,
                        base_kind,
                        OutcomeTag::PrecisionExhausted,
                    ));
                    finish(ctx, steps, Terminal::PrecisionExhausted)
                }
                Err(e) => Err(e.into()),
            }
        }
        Outcome::NotSingular => {
            steps.push(mk_step(
                state,
                report,
                center,
                fiber,
                None,
                None,
                base_kind,
                OutcomeTag::Resolved,
            ));
            finish(ctx, steps, Terminal::Resolved)
        }
        Outcome::SigmaDrop => {
            steps.push(mk_step(
                state,
                report,
                center,
                fiber,
                None,
                None,
                base_kind,
                OutcomeTag::SigmaDrop,
            ));
            finish(ctx, steps, Terminal::SigmaDrop)
        }
        Outcome::PrecisionExhausted => {
            steps.push(mk_step(
                state,
                report,
                center,
                fiber,
                None,
                None,
                base_kind,
                OutcomeTag::PrecisionExhausted,
            ));
            finish(ctx, steps, Terminal::PrecisionExhausted)
        }
    }
}

/// One named pass/fail verdict inside a [`JumpEpisode`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// The bracket around one invariant-raising step: the step itself, the
/// single-bad-divisor run it starts, and — when the run exits into a
/// two-divisor position — the exit values and the inequality chain that
/// caps the raise.
///
/// Value names follow the run's shape: `m_heart` is the heart invariant at
/// the jump source, `m_tilde` the bad divisor's weighted residual right
/// after the jump, `m_flat` the same at the last single-bad-divisor
/// position, and `w_rho_sharp`/`m_natural`/`mu_natural` are read at or
/// just before the exit position.
#[derive(Debug, Clone)]
pub struct JumpEpisode {
    /// Index of the invariant-raising step in the trace.
    pub esoteric_step: usize,
    /// Indices of the steps whose pre-move position lies in the run
    /// (including the exit step).
    pub run_steps: Vec<usize>,
    /// Index of the step whose result is the exit position, when reached.
    pub sharp_step: Option<usize>,
    /// The trace ended (or left the expected shapes) before the exit
    /// position was reached; recorded values stop where the data stops.
    pub truncated: bool,
    /// Whether the last single-bad-divisor position is a good point.
    pub flat_good: Option<bool>,
    pub m_heart: Rat,
    pub m_tilde: Option<Rat>,
    pub m_flat: Option<Rat>,
    pub m_natural: Option<Rat>,
    pub mu_natural: Option<Rat>,
    pub w_rho_sharp: Option<Rat>,
    pub checks: Vec<EpisodeCheck>,
}

impl JumpEpisode {
    /// The episode reached its exit position.
    pub fn complete(&self) -> bool {
        !self.truncated
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// The weighted residual of the only bad divisor, when there is exactly
/// one.
fn lone_bad_w_rho(rep: &InvariantReport) -> Option<Rat> {
    let w = a_word(rep);
    if w.len() == 1 {
        Some(w.letters()[0])
    } else {
        None
    }
}

/// The axis of the only bad divisor, when there is exactly one.
fn lone_bad_axis(rep: &InvariantReport) -> Option<Axis> {
    let bads: Vec<Axis> = rep
        .divisors
        .iter()
        .filter(|d| d.bad)
        .map(|d| d.axis)
        .collect();
    if bads.len() == 1 {
        Some(bads[0])
    } else {
        None
    }
}

/// Finds every step of a trace where the two-word invariant strictly
/// rises and brackets it into a [`JumpEpisode`], verifying the run's
/// descent and the inequality chain.  Episodes cut short by the trace
/// ending (or exiting into a good boundary) are reported as truncated,
/// with no failed checks invented for the missing part.
pub fn detect_jump_episodes(trace: &Trace) -> Vec<JumpEpisode> {
    trace
        .steps
        .iter()
        .enumerate()
        .filter(|(_, s)| {
            s.post
                .as_ref()
                .map(|post| s.pre.inv_spade < post.inv_spade)
                .unwrap_or(false)
        })
        .map(|(i, _)| build_episode(trace, i))
        .collect()
}

fn build_episode(trace: &Trace, i: usize) -> JumpEpisode {
    let steps = &trace.steps;
    let p_rep = &steps[i].pre;
    let m_heart = p_rep.inv_heart;
    let two = Rat::from_int(2);
    let mut checks: Vec<EpisodeCheck> = Vec::new();
    let mut chk = |name: &'static str, passed: bool, detail: String| {
        checks.push(EpisodeCheck {
            name,
            passed,
            detail,
        });
    };

    let mut ep = JumpEpisode {
        esoteric_step: i,
        run_steps: Vec::new(),
        sharp_step: None,
        truncated: false,
        flat_good: None,
        m_heart,
        m_tilde: None,
        m_flat: None,
        m_natural: None,
        mu_natural: None,
        w_rho_sharp: None,
        checks: Vec::new(),
    };

    // The raise must leave a two-divisor position with the point bad, and
    // it must raise the word of bad residuals.
    let source_ok = matches!(
        p_rep.configuration,
        Configuration::OneBadOneGood | Configuration::TwoBad
    ) && !p_rep.point_good;
    chk(
        "jump-source",
        source_ok,
        format!(
            "raising step leaves a {:?} position with the point {}",
            p_rep.configuration,
            if p_rep.point_good { "good" } else { "bad" }
        ),
    );
    chk(
        "jump-raises-the-word",
        trace.steps[i].kind == StepKind::Esoteric,
        format!("the raising step is recorded as {}", trace.steps[i].kind),
    );

    let Some(pt_rep) = steps[i].post.as_ref() else {
        ep.truncated = true;
        ep.checks = checks;
        return ep;
    };

    let landed = pt_rep.configuration == Configuration::OneBad;
    chk(
        "jump-lands-alone-bad",
        landed,
        format!("the raise lands in {:?}", pt_rep.configuration),
    );
    ep.m_tilde = lone_bad_w_rho(pt_rep);
    if let Some(mt) = ep.m_tilde {
        chk(
            "chain-double-heart-beats-entry",
            two * m_heart > mt,
            format!("2·{m_heart} vs {mt}"),
        );
    }
    if !landed {
        ep.truncated = true;
        ep.checks = checks;
        return ep;
    }

    // Walk the single-bad-divisor run until it exits into a two-divisor
    // position (or the trace stops first).
    let mut j = i + 1;
    let mut exit: Option<usize> = None;
    loop {
        if j >= steps.len() {
            ep.truncated = true;
            break;
        }
        ep.run_steps.push(j);
        let Some(post) = steps[j].post.as_ref() else {
            ep.truncated = true;
            break;
        };
        match post.configuration {
            Configuration::OneBad => j += 1,
            Configuration::OneBadOneGood | Configuration::TwoBad => {
                exit = Some(j);
                break;
            }
            Configuration::OneGood | Configuration::TwoGood => {
                ep.truncated = true;
                break;
            }
        }
    }

    // Inside the run the two-word invariant must fall at point moves and
    // hold still at curve-style moves.
    let mut descent_ok = true;
    let mut descent_detail = String::from("every run step descends");
    for &k in &ep.run_steps {
        let st = &steps[k];
        let Some(post) = st.post.as_ref() else { continue };
        let ok = match st.kind {
            StepKind::CurveStep | StepKind::GammaStep => post.inv_spade == st.pre.inv_spade,
            StepKind::Standard | StepKind::Esoteric => post.inv_spade < st.pre.inv_spade,
        };
        if !ok {
            descent_ok = false;
            descent_detail = format!("step {k} breaks the run's descent");
        }
    }
    chk("run-descends", descent_ok, descent_detail);

    let Some(j) = exit else {
        ep.checks = checks;
        return ep;
    };
    ep.sharp_step = Some(j);
    let flat = &steps[j].pre;
    let sharp = steps[j].post.as_ref().expect("exit step has a result");

    ep.m_flat = lone_bad_w_rho(flat);
    ep.flat_good = Some(flat.point_good);
    // The relay's slope: its weight when the point is good, the coefficient
    // order over the degree when bad — in both cases the adapted slope.
    ep.mu_natural = Some(flat.h_p);

    let flat_axis = lone_bad_axis(flat);
    let inherited = flat_axis.and_then(|ax| sharp.divisors.iter().find(|d| d.axis == ax));
    let sharp_ok = matches!(inherited, Some(d) if d.bad && d.w_rho.is_some());
    chk(
        "exit-keeps-the-run-divisor-bad",
        sharp_ok,
        format!(
            "the run's divisor ({}) stays bad at the exit",
            flat_axis.map_or("?".to_string(), |a| a.to_string())
        ),
    );
    ep.w_rho_sharp = inherited.and_then(|d| d.w_rho);
    ep.m_natural = match sharp.configuration {
        Configuration::OneBadOneGood => Some(sharp.ord_m_usual - sharp.ord_m_tight),
        Configuration::TwoBad => flat_axis
            .and_then(|ax| sharp.divisors.iter().find(|d| d.axis == ax.other()))
            .filter(|d| d.bad)
            .and_then(|d| d.w_rho),
        _ => None,
    };

    chk(
        "exit-shape-matches-relay",
        (sharp.configuration == Configuration::OneBadOneGood) == flat.point_good,
        format!(
            "exit in {:?} with the relay point {}",
            sharp.configuration,
            if flat.point_good { "good" } else { "bad" }
        ),
    );

    let sandwich = p_rep.inv_spade.cmp_letter(m_heart) == std::cmp::Ordering::Greater
        && sharp.inv_spade.cmp_letter(m_heart) == std::cmp::Ordering::Less;
    chk(
        "heart-sandwich",
        sandwich,
        format!(
            "two-word invariant vs {m_heart}: source {:?}, exit {:?}",
            p_rep.inv_spade, sharp.inv_spade
        ),
    );

    if let (Some(mt), Some(mf)) = (ep.m_tilde, ep.m_flat) {
        chk(
            "chain-entry-caps-relay",
            mt >= mf,
            format!("{mt} vs {mf}"),
        );
    }
    if let (Some(mf), Some(ws), Some(mn)) = (ep.m_flat, ep.w_rho_sharp, ep.m_natural) {
        // The relay beats the exit payload; the bound is tight exactly when
        // the relay point is good, so equality is allowed only there.
        let bound = ws + mn;
        let relay_ok = if flat.point_good {
            mf >= bound
        } else {
            mf > bound
        };
        chk(
            "chain-relay-beats-exit",
            relay_ok,
            format!(
                "{mf} vs {ws} + {mn} (relay point {})",
                if flat.point_good { "good" } else { "bad" }
            ),
        );
        chk(
            "chain-double-heart-beats-exit",
            two * m_heart > bound,
            format!("2·{m_heart} vs {bound}"),
        );
    }

    ep.checks = checks;
    ep
}

/// One row of the legacy-vs-new comparison: both invariants on each side
/// of a non-tight step.
#[derive(Debug, Clone)]
pub struct OldNewRow {
    pub step: usize,
    pub old_pre: OldTuple,
    pub old_post: OldTuple,
    pub spade_pre: SpadePair,
    pub spade_post: SpadePair,
    pub strict_decrease: bool,
}

/// The legacy comparison tuple next to the two-word invariant at every
/// non-tight step of a trace.
#[derive(Debug, Clone)]
pub struct OldNewReport {
    pub rows: Vec<OldNewRow>,
    /// The legacy tuple fell strictly at every recorded step.
    pub all_strict: bool,
}

/// Lines up the legacy comparison tuple against the two-word invariant at
/// every non-tight step with a resulting position.  Tight-phase moves are
/// excluded: the legacy tuple is not part of that endgame.
pub fn compare_old_new(trace: &Trace) -> OldNewReport {
    let mut rows = Vec::new();
    for (i, st) in trace.steps.iter().enumerate() {
        if st.kind == StepKind::GammaStep {
            continue;
        }
        let Some(post) = st.post.as_ref() else { continue };
        rows.push(OldNewRow {
            step: i,
            old_pre: st.pre.inv_old.clone(),
            old_post: post.inv_old.clone(),
            spade_pre: st.pre.inv_spade.clone(),
            spade_post: post.inv_spade.clone(),
            strict_decrease: post.inv_old < st.pre.inv_old,
        });
    }
    let all_strict = rows.iter().all(|r| r.strict_decrease);
    OldNewReport { rows, all_strict }
}

// ---------------------------------------------------------------------------
// Trace audit.
// ---------------------------------------------------------------------------

/// One named verdict from [`audit_trace`]: which step it examined, the
/// fiber point for fiber-wide checks, and what it found.
#[derive(Debug, Clone)]
pub struct AuditLine {
    pub step: usize,
    pub fiber: Option<FiberPoint>,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// The verdicts of re-playing a finished trace against the engine.
#[derive(Debug, Clone)]
pub struct TraceAudit {
    pub lines: Vec<AuditLine>,
}

impl TraceAudit {
    pub fn all_passed(&self) -> bool {
        self.lines.iter().all(|l| l.passed)
    }

    /// The failed lines, in trace order.
    pub fn failures(&self) -> Vec<&AuditLine> {
        self.lines.iter().filter(|l| !l.passed).collect()
    }
}

struct Auditor {
    lines: Vec<AuditLine>,
    step: usize,
}

impl Auditor {
    fn say(
        &mut self,
        fiber: Option<&FiberPoint>,
        name: &'static str,
        passed: bool,
        detail: String,
    ) {
        self.lines.push(AuditLine {
            step: self.step,
            fiber: fiber.cloned(),
            name,
            passed,
            detail,
        });
    }
}

/// The divisor of a report on the given axis, if any.
fn div_on(rep: &InvariantReport, axis: Axis) -> Option<&DivisorReport> {
    rep.divisors.iter().find(|d| d.axis == axis)
}

fn max_divisor_index(rep: &InvariantReport) -> Option<u32> {
    rep.divisors.iter().map(|d| d.index).max()
}

/// The exceptional divisor born at a move: the one younger than every
/// pre-move divisor.
fn fresh_divisor<'a>(
    pre: &InvariantReport,
    post: &'a InvariantReport,
) -> Option<&'a DivisorReport> {
    match max_divisor_index(pre) {
        Some(floor) => post.divisors.iter().find(|d| d.index > floor),
        None => post.divisors.first(),
    }
}

/// The monomial gap: how far the usual boundary monomial overshoots the
/// tight one at the point.
fn gap(rep: &InvariantReport) -> Rat {
    rep.ord_m_usual - rep.ord_m_tight
}

/// Whether `fp` is the fiber point where the strict transform of the
/// divisor on `axis` meets the fresh exceptional.
fn meeting_point(axis: Axis, fp: &FiberPoint) -> bool {
    match axis {
        Axis::X => *fp == FiberPoint::YChartOrigin,
        Axis::Y => matches!(fp, FiberPoint::XChart(c) if c.is_zero()),
    }
}

enum Replayed {
    Continue(Box<StateAnalysis>),
    End(OutcomeTag),
}

/// Analyzes a replayed outcome; precision running out counts as a game
/// ending, any other analysis failure is an error.
fn replay_outcome(out: &Outcome) -> Result<Replayed, InvariantError> {
    match out {
        Outcome::NewState(s) => match analyze(s) {
            Ok(an) => Ok(Replayed::Continue(Box::new(an))),
            Err(InvariantError::PrecisionExhausted { .. }) => {
                Ok(Replayed::End(OutcomeTag::PrecisionExhausted))
            }
            Err(e) => Err(e),
        },
        Outcome::NotSingular => Ok(Replayed::End(OutcomeTag::Resolved)),
        Outcome::SigmaDrop => Ok(Replayed::End(OutcomeTag::SigmaDrop)),
        Outcome::PrecisionExhausted => Ok(Replayed::End(OutcomeTag::PrecisionExhausted)),
    }
}

/// Lines the stored landing (or ending) up against the replayed one and
/// hands back the replayed child report when the game goes on.
fn check_recorded(
    a: &mut Auditor,
    fiber: Option<&FiberPoint>,
    st: &TraceStep,
    rep: &Replayed,
) -> Option<InvariantReport> {
    match (rep, &st.post) {
        (Replayed::Continue(an), Some(stored)) => {
            a.say(
                fiber,
                "recorded-landing-matches",
                an.report == *stored,
                "the stored landing report must equal the replayed one".into(),
            );
            Some(an.report.clone())
        }
        (Replayed::Continue(an), None) => {
            a.say(
                fiber,
                "recorded-ending-matches",
                false,
                format!(
                    "the replay continues but the step is stored as {}",
                    st.outcome
                ),
            );
            Some(an.report.clone())
        }
        (Replayed::End(tag), None) => {
            a.say(
                fiber,
                "recorded-ending-matches",
                *tag == st.outcome,
                format!("stored {}, replayed {tag}", st.outcome),
            );
            None
        }
        (Replayed::End(tag), Some(_)) => {
            a.say(
                fiber,
                "recorded-landing-matches",
                false,
                format!("the step stores a landing but the replay ends the game ({tag})"),
            );
            None
        }
    }
}

/// Re-plays every move of a finished trace against the engine and checks
/// the step-by-step control laws on the way:
///
/// * stored pre-move reports and landings equal what the engine recomputes;
/// * curve moves keep the two-word invariant and shave exactly one off the
///   center divisor's weight;
/// * tight-phase moves keep the tight type, transform the tight monomial
///   exactly, and strictly decrease the gamma value;
/// * point moves are audited over the **whole fiber**, not only the
///   adversary's choice: descent of the two-word invariant, the relay
///   shape of every word raise, badness tracking of the fresh divisor,
///   strict improvement of surviving bad divisors, and the residual and
///   gap bounds that cap what a bad point can pass on.
pub fn audit_trace(trace: &Trace) -> TraceAudit {
    let mut a = Auditor {
        lines: Vec::new(),
        step: 0,
    };
    for (i, st) in trace.steps.iter().enumerate() {
        a.step = i;
        let pre_an = match analyze(&st.pre_state) {
            Ok(an) => an,
            Err(e) => {
                a.say(None, "position-reanalyzes", false, e.to_string());
                continue;
            }
        };
        a.say(
            None,
            "position-already-clean",
            pre_an.rounds == 0,
            format!("{} cleaning rounds on a stored position", pre_an.rounds),
        );
        a.say(
            None,
            "recorded-analysis-matches",
            pre_an.report == st.pre,
            "the stored pre-move report must equal the recomputed one".into(),
        );
        if let Some(ps) = &st.post_state {
            let pe = st.pre_state.pe();
            a.say(
                None,
                "precision-ticks-down",
                ps.prec <= pre_an.cleaned.prec.saturating_sub(pe),
                format!(
                    "child precision {} from parent {}, budget {pe} per move",
                    ps.prec, pre_an.cleaned.prec
                ),
            );
        }
        match st.kind {
            StepKind::CurveStep => audit_curve(&mut a, st, &pre_an),
            StepKind::GammaStep => audit_gamma(&mut a, st, &pre_an),
            StepKind::Standard | StepKind::Esoteric => audit_point(&mut a, st, &pre_an),
        }
    }
    TraceAudit { lines: a.lines }
}

fn audit_curve(a: &mut Auditor, st: &TraceStep, pre_an: &StateAnalysis) {
    let Center::Curve(axis) = st.center else {
        a.say(
            None,
            "curve-center-recorded",
            false,
            format!("curve move stored with center {:?}", st.center),
        );
        return;
    };
    let pre = &pre_an.report;
    let out = match blowup::transform_curve(&pre_an.cleaned, axis) {
        Ok(out) => out,
        Err(e) => {
            a.say(None, "curve-move-replays", false, e.to_string());
            return;
        }
    };
    let rep = match replay_outcome(&out) {
        Ok(r) => r,
        Err(e) => {
            a.say(None, "curve-landing-analyzes", false, e.to_string());
            return;
        }
    };
    let Some(child) = check_recorded(a, None, st, &rep) else {
        return;
    };

    a.say(
        None,
        "curve-keeps-the-word",
        child.inv_spade == pre.inv_spade,
        format!("{:?} then {:?}", pre.inv_spade, child.inv_spade),
    );
    let one = Rat::from_int(1);
    match (div_on(pre, axis), div_on(&child, axis)) {
        (Some(pd), Some(cd)) => {
            a.say(
                None,
                "curve-drops-the-center-weight-by-one",
                cd.mu == pd.mu - one,
                format!("{} from {}", cd.mu, pd.mu),
            );
            a.say(
                None,
                "curve-fresh-divisor-tracks-center-badness",
                cd.bad == pd.bad,
                format!("center divisor bad: {}, fresh divisor bad: {}", pd.bad, cd.bad),
            );
        }
        (Some(pd), None) => a.say(
            None,
            "curve-drops-the-center-weight-by-one",
            pd.mu == one,
            format!("the center divisor left weight {} behind", pd.mu),
        ),
        (None, _) => a.say(
            None,
            "curve-center-exists",
            false,
            format!("no divisor on the {axis} axis to blow up along"),
        ),
    }
    if let Some(pd) = div_on(pre, axis.other()) {
        let kept = div_on(&child, axis.other());
        let ok = matches!(kept, Some(cd) if cd.index == pd.index && cd.mu == pd.mu);
        a.say(
            None,
            "curve-keeps-the-bystander",
            ok,
            format!(
                "the {} divisor must survive a curve move untouched",
                axis.other()
            ),
        );
    }
}

fn audit_gamma(a: &mut Auditor, st: &TraceStep, pre_an: &StateAnalysis) {
    let Center::Gamma(axes) = &st.center else {
        a.say(
            None,
            "tight-center-recorded",
            false,
            format!("tight move stored with center {:?}", st.center),
        );
        return;
    };
    let pre = &pre_an.report;
    a.say(
        None,
        "tight-phase-has-a-type",
        pre.tight != TightCase::NotTight,
        format!("position is {:?}", pre.tight),
    );
    let cands = match blowup::transform_gamma(&pre_an.cleaned, axes) {
        Ok(c) => c,
        Err(BlowupError::Invariant(InvariantError::PrecisionExhausted { .. })) => {
            a.say(
                None,
                "recorded-ending-matches",
                st.outcome == OutcomeTag::PrecisionExhausted,
                format!("the replay runs out of precision; stored {}", st.outcome),
            );
            return;
        }
        Err(e) => {
            a.say(None, "tight-move-replays", false, e.to_string());
            return;
        }
    };
    let Some(fp) = &st.fiber else {
        a.say(
            None,
            "tight-fiber-empty",
            cands.is_empty() && st.outcome == OutcomeTag::Resolved,
            format!("{} candidates, stored {}", cands.len(), st.outcome),
        );
        return;
    };
    let Some((_, out)) = cands.iter().find(|(f, _)| f == fp) else {
        a.say(
            Some(fp),
            "recorded-fiber-point-exists",
            false,
            "the stored fiber choice is not on the replayed fiber".into(),
        );
        return;
    };
    let rep = match replay_outcome(out) {
        Ok(r) => r,
        Err(e) => {
            a.say(Some(fp), "tight-landing-analyzes", false, e.to_string());
            return;
        }
    };
    let Some(child) = check_recorded(a, Some(fp), st, &rep) else {
        return;
    };

    a.say(
        Some(fp),
        "gamma-strictly-decreases",
        child.gamma < pre.gamma,
        format!("{:?} from {:?}", child.gamma, pre.gamma),
    );
    a.say(
        Some(fp),
        "tight-type-preserved",
        child.tight == pre.tight,
        format!("{:?} from {:?}", child.tight, pre.tight),
    );

    // The tight monomial must transform exactly: survivors keep their
    // exponent, the fresh exceptional takes the center's total less one.
    let floor = max_divisor_index(pre);
    let mut problems: Vec<String> = Vec::new();
    for cd in &child.divisors {
        if !matches!(floor, Some(fl) if cd.index <= fl) {
            continue;
        }
        match pre.divisors.iter().find(|d| d.index == cd.index) {
            Some(pd) if pd.axis == cd.axis && pd.h == cd.h => {}
            Some(pd) => problems.push(format!(
                "survivor {} moved from h = {} on {} to h = {} on {}",
                cd.index, pd.h, pd.axis, cd.h, cd.axis
            )),
            None => problems.push(format!("divisor {} appeared from nowhere", cd.index)),
        }
    }
    let expected = axes
        .iter()
        .filter_map(|&ax| div_on(pre, ax))
        .fold(Rat::from_int(-1), |acc, d| acc + d.h);
    match fresh_divisor(pre, &child) {
        Some(fd) => {
            if fd.h != expected {
                problems.push(format!("fresh divisor has h = {}, expected {expected}", fd.h));
            }
        }
        None => {
            if !expected.is_zero() {
                problems.push(format!("fresh divisor missing, expected h = {expected}"));
            }
        }
    }
    a.say(
        Some(fp),
        "tight-monomial-transforms-exactly",
        problems.is_empty(),
        if problems.is_empty() {
            "survivors keep h; the fresh exponent is the center sum less one".into()
        } else {
            problems.join("; ")
        },
    );
}

fn audit_point(a: &mut Auditor, st: &TraceStep, pre_an: &StateAnalysis) {
    let pre = &pre_an.report;

    // A good point astride two bad divisors clears each cross gap: its
    // residual on one axis beats what the other axis still owes.
    if pre.configuration == Configuration::TwoBad && pre.point_good {
        if let (Some(dx), Some(dy)) = (div_on(pre, Axis::X), div_on(pre, Axis::Y)) {
            let ok = match (dx.w_rho, dy.w_rho) {
                (Some(wx), Some(wy)) => wx > dy.mu - dy.h && wy > dx.mu - dx.h,
                _ => false,
            };
            a.say(
                None,
                "good-point-residual-clears-the-cross-gap",
                ok,
                format!(
                    "w-rho {:?}/{:?} against cross gaps {}/{}",
                    dx.w_rho,
                    dy.w_rho,
                    dy.mu - dy.h,
                    dx.mu - dx.h
                ),
            );
        }
    }

    let cands = match blowup::enumerate_fiber(&pre_an.cleaned) {
        Ok(c) => c,
        Err(BlowupError::Invariant(InvariantError::PrecisionExhausted { .. })) => {
            a.say(
                None,
                "recorded-ending-matches",
                st.outcome == OutcomeTag::PrecisionExhausted,
                format!("the replay runs out of precision; stored {}", st.outcome),
            );
            return;
        }
        Err(e) => {
            a.say(None, "point-move-replays", false, e.to_string());
            return;
        }
    };
    let Some(chosen_fp) = &st.fiber else {
        a.say(
            None,
            "recorded-ending-matches",
            cands.is_empty() && st.outcome == OutcomeTag::Resolved,
            format!("{} candidates, stored {}", cands.len(), st.outcome),
        );
        return;
    };
    a.say(
        Some(chosen_fp),
        "recorded-fiber-point-exists",
        cands.iter().any(|(f, _)| f == chosen_fp),
        "the stored fiber choice must be on the replayed fiber".into(),
    );

    for (fp, out) in &cands {
        let chosen = chosen_fp == fp;
        let rep = match replay_outcome(out) {
            Ok(r) => r,
            Err(e) => {
                a.say(Some(fp), "fiber-child-analyzes", false, e.to_string());
                continue;
            }
        };
        let child = if chosen {
            check_recorded(a, Some(fp), st, &rep)
        } else {
            match rep {
                Replayed::Continue(an) => Some(an.report.clone()),
                Replayed::End(_) => None,
            }
        };
        let Some(child) = child else {
            continue;
        };
        if chosen {
            let want = match classify_transformation(pre, &child) {
                StepClass::Esoteric => StepKind::Esoteric,
                _ => StepKind::Standard,
            };
            a.say(
                Some(fp),
                "recorded-kind-matches",
                want == st.kind,
                format!("stored {}, replayed {want}", st.kind),
            );
        }
        audit_fiber_child(a, pre, fp, &child);
    }
}

/// The control laws of a single point blow-up, checked on one fiber child.
fn audit_fiber_child(
    a: &mut Auditor,
    pre: &InvariantReport,
    fp: &FiberPoint,
    child: &InvariantReport,
) {
    // Descent: a move whose word of bad residuals does not rise must drop
    // the whole two-word invariant strictly.  A move that raises the
    // two-word invariant is allowed only as an exit from a bad-point relay:
    // the word rises, the source is a two-divisor position with the point
    // bad, the landing keeps a lone bad divisor, and the landing sits away
    // from both axes.  A word raise that still lowers the invariant claims
    // nothing further.
    if child.inv_spade > pre.inv_spade {
        let ok = a_word(pre) < a_word(child)
            && matches!(
                pre.configuration,
                Configuration::OneBadOneGood | Configuration::TwoBad
            )
            && !pre.point_good
            && child.configuration == Configuration::OneBad;
        a.say(
            Some(fp),
            "jump-exits-through-a-relay",
            ok,
            format!(
                "{:?} with the point {} raises into {:?}",
                pre.configuration,
                if pre.point_good { "good" } else { "bad" },
                child.configuration
            ),
        );
        a.say(
            Some(fp),
            "jump-lands-off-axis",
            matches!(fp, FiberPoint::XChart(c) if !c.is_zero()),
            "an invariant raise can only land at a generic fiber point".into(),
        );
    } else if a_word(pre) >= a_word(child) {
        a.say(
            Some(fp),
            "standard-move-strictly-descends",
            child.inv_spade < pre.inv_spade,
            format!("{:?} from {:?}", child.inv_spade, pre.inv_spade),
        );
    }

    // The fresh exceptional is bad exactly when the point was.
    let fresh = fresh_divisor(pre, child);
    match fresh {
        Some(fd) => a.say(
            Some(fp),
            "fresh-divisor-tracks-center-badness",
            fd.bad != pre.point_good,
            format!(
                "point good: {}, fresh divisor bad: {}",
                pre.point_good, fd.bad
            ),
        ),
        None if !pre.point_good => a.say(
            Some(fp),
            "fresh-divisor-tracks-center-badness",
            false,
            "the point is bad but the fresh divisor was dropped".into(),
        ),
        None => {}
    }

    // A bad divisor's strict transform at its own meeting point stays bad
    // and its weighted residual strictly improves.
    for pd in pre.divisors.iter().filter(|d| d.bad) {
        if !meeting_point(pd.axis, fp) {
            continue;
        }
        match child.divisors.iter().find(|d| d.index == pd.index) {
            Some(cd) => {
                a.say(
                    Some(fp),
                    "survivor-stays-bad",
                    cd.bad,
                    format!("the {} divisor's strict transform", pd.axis),
                );
                if let (Some(pw), Some(cw)) = (pd.w_rho, cd.w_rho) {
                    a.say(
                        Some(fp),
                        "survivor-residual-strictly-improves",
                        cw < pw,
                        format!("{cw} from {pw}"),
                    );
                }
            }
            None => a.say(
                Some(fp),
                "survivor-stays-bad",
                false,
                format!("the {} divisor vanished at its own chart", pd.axis),
            ),
        }
    }

    if !pre.point_good {
        // What a bad point passes to the fresh divisor never exceeds what
        // a bad divisor already carried — read away from that divisor's
        // own meeting point, and at generic points only when it stands
        // alone.
        if let Some(fw) = fresh.filter(|d| d.bad).and_then(|d| d.w_rho) {
            for pd in pre.divisors.iter().filter(|d| d.bad) {
                let other_present = div_on(pre, pd.axis.other()).is_some();
                let applies = !meeting_point(pd.axis, fp)
                    && (!other_present || meeting_point(pd.axis.other(), fp));
                if !applies {
                    continue;
                }
                if let Some(pw) = pd.w_rho {
                    a.say(
                        Some(fp),
                        "fresh-residual-never-worsens",
                        fw <= pw,
                        format!("fresh {fw} against the {} divisor's {pw}", pd.axis),
                    );
                }
            }
            // At either origin chart the monomial gap caps the fresh
            // residual outright.
            if meeting_point(Axis::X, fp) || meeting_point(Axis::Y, fp) {
                a.say(
                    Some(fp),
                    "gap-caps-the-fresh-residual",
                    fw < gap(pre),
                    format!("fresh {fw} under the gap {}", gap(pre)),
                );
            }
        }

        // Landing clear of every bad strict transform strictly shrinks
        // the monomial gap.
        let avoids = pre
            .divisors
            .iter()
            .filter(|d| d.bad)
            .all(|d| !meeting_point(d.axis, fp));
        if avoids {
            a.say(
                Some(fp),
                "monomial-gap-strictly-shrinks",
                gap(child) < gap(pre),
                format!("{} from {}", gap(child), gap(pre)),
            );
        }
    }

    // The good-point cross bound caps the next gap at the origin charts.
    if pre.configuration == Configuration::TwoBad && pre.point_good {
        let pd = if meeting_point(Axis::X, fp) {
            div_on(pre, Axis::Y)
        } else if meeting_point(Axis::Y, fp) {
            div_on(pre, Axis::X)
        } else {
            None
        };
        if let Some(w) = pd.and_then(|d| d.w_rho) {
            a.say(
                Some(fp),
                "cross-residual-caps-the-next-gap",
                w > gap(child),
                format!("{w} over the next gap {}", gap(child)),
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FqCtx;
    use crate::series::BiSeries;
    use crate::state::{DivisorInfo, Hypersurface, MonomialData};
    use std::sync::Arc;

    fn r(n: i64) -> Rat {
        Rat::from_int(n)
    }

    fn rq(n: i64, d: i64) -> Rat {
        Rat::new(n, d)
    }

    fn series(ctx: &Arc<FqCtx>, prec: u32, terms: &[(u32, u32)]) -> BiSeries {
        BiSeries::from_terms(ctx, prec, terms.iter().map(|&(i, j)| ((i, j), ctx.one())))
    }

    /// p = 2, e = 1 state with a₁ = 0 and the given last coefficient.
    fn state2(
        ctx: &Arc<FqCtx>,
        a: u32,
        divisors: &[(Axis, u32, u32)],
        prec: u32,
        terms: &[(u32, u32)],
    ) -> MonomialState {
        let hyp = Hypersurface::new(
            2,
            1,
            vec![BiSeries::zero(ctx, prec), series(ctx, prec, terms)],
        )
        .unwrap();
        let divisors = divisors
            .iter()
            .map(|&(axis, index, m)| DivisorInfo { axis, index, m })
            .collect();
        MonomialState::new(hyp, MonomialData { a, divisors }, 0)
    }

    /// Point with two bad shallow divisors: blow-ups here can raise the
    /// word of bad residuals.
    fn flagship(ctx: &Arc<FqCtx>) -> MonomialState {
        state2(
            ctx,
            2,
            &[(Axis::X, 0, 5), (Axis::Y, 1, 5)],
            30,
            &[(3, 1), (1, 3)],
        )
    }

    /// One divisor deep enough that the singular locus is a curve.
    fn running(ctx: &Arc<FqCtx>) -> MonomialState {
        state2(ctx, 2, &[(Axis::X, 0, 5)], 30, &[(4, 0), (3, 2)])
    }

    /// Both axes in the singular locus with equal depth.
    fn both_curves(ctx: &Arc<FqCtx>, ix: u32, iy: u32) -> MonomialState {
        state2(
            ctx,
            2,
            &[(Axis::X, ix, 3), (Axis::Y, iy, 3)],
            20,
            &[(3, 2), (2, 3)],
        )
    }

    /// Tight position whose coefficient is the boundary monomial itself.
    fn tight_two_good(ctx: &Arc<FqCtx>) -> MonomialState {
        state2(ctx, 2, &[(Axis::X, 0, 1), (Axis::Y, 1, 1)], 12, &[(1, 1)])
    }

    /// Tight position with a unit factor: x³y²·(1 + x).
    fn tight_unit(ctx: &Arc<FqCtx>) -> MonomialState {
        state2(
            ctx,
            2,
            &[(Axis::X, 0, 4), (Axis::Y, 1, 3)],
            20,
            &[(3, 2), (4, 2)],
        )
    }

    #[test]
    fn budget_defaults_to_precision_over_degree() {
        let ctx = FqCtx::new(2, 1).unwrap();
        assert_eq!(default_max_steps(&flagship(&ctx)), 15);
        assert_eq!(default_max_steps(&tight_two_good(&ctx)), 6);
    }

    #[test]
    fn center_prefers_a_deep_curve() {
        let ctx = FqCtx::new(2, 1).unwrap();
        let rep = analyze(&running(&ctx)).unwrap().report;
        assert_eq!(select_center(&rep).unwrap(), Center::Curve(Axis::X));
    }

    #[test]
    fn center_breaks_curve_ties_by_divisor_age() {
        let ctx = FqCtx::new(2, 1).unwrap();
        let rep = analyze(&both_curves(&ctx, 7, 4)).unwrap().report;
        assert_eq!(select_center(&rep).unwrap(), Center::Curve(Axis::X));
        let rep = analyze(&both_curves(&ctx, 4, 7)).unwrap().report;
        assert_eq!(select_center(&rep).unwrap(), Center::Curve(Axis::Y));
    }

    #[test]
    fn center_defaults_to_the_point_and_rejects_tight_positions() {
        let ctx = FqCtx::new(2, 1).unwrap();
        let rep = analyze(&flagship(&ctx)).unwrap().report;
        assert_eq!(select_center(&rep).unwrap(), Center::Point);
        let rep = analyze(&tight_two_good(&ctx)).unwrap().report;
        assert_eq!(select_center(&rep), Err(DriverError::TightPhase));
    }

    #[test]
    fn classification_tracks_the_word_of_bad_residuals() {
        let ctx = FqCtx::new(2, 1).unwrap();
        // The four positions the flagship game walks through, rebuilt
        // directly: x²y³ / y³ / xy³ on one divisor, then xy² on two.
        let s0 = analyze(&flagship(&ctx)).unwrap().report;
        let s1 = analyze(&state2(&ctx, 2, &[(Axis::X, 2, 8)], 28, &[(2, 3)]))
            .unwrap()
            .report;
        let s2 = analyze(&state2(&ctx, 2, &[(Axis::X, 3, 6)], 26, &[(0, 3)]))
            .unwrap()
            .report;
        let s3 = analyze(&state2(&ctx, 2, &[(Axis::X, 4, 4)], 24, &[(1, 3)]))
            .unwrap()
            .report;
        let s4 = analyze(&state2(
            &ctx,
            2,
            &[(Axis::X, 4, 4), (Axis::Y, 5, 2)],
            22,
            &[(1, 2)],
        ))
        .unwrap()
        .report;

        assert_eq!(a_word(&s0), Word(vec![r(1), r(1)]));
        assert_eq!(a_word(&s1), Word(vec![rq(3, 2)]));
        assert_eq!(a_word(&s2), Word(vec![rq(3, 2)]));
        assert_eq!(a_word(&s3), Word(vec![rq(3, 2)]));
        assert_eq!(a_word(&s4), Word(vec![r(0)]));

        // The word rises: (1,1) < (3/2).
        assert_eq!(classify_transformation(&s0, &s1), StepClass::Esoteric);
        // Equal words are not a raise.
        assert_eq!(classify_transformation(&s1, &s2), StepClass::Standard);
        // A falling word: (3/2) > (0).
        assert_eq!(classify_transformation(&s3, &s4), StepClass::Standard);
        // No bad divisor on the pre side: nothing to compare.
        let good = analyze(&state2(&ctx, 2, &[(Axis::X, 0, 2)], 12, &[(2, 3)]))
            .unwrap()
            .report;
        assert_eq!(classify_transformation(&good, &s1), StepClass::NotApplicable);
        // Prefix rule: the shorter word is the smaller one.
        assert!(Word(vec![r(1)]) < Word(vec![r(1), r(2)]));
    }

    /// The flagship game under the greedy adversary: the raise is the
    /// adversary's best move, and the game runs raise → curve → two point
    /// moves → tight endgame, ending in a sigma drop.
    #[test]
    fn worst_case_devil_chases_the_jump() {
        let ctx = FqCtx::new(2, 1).unwrap();
        let st = flagship(&ctx);
        let traces = run(&st, &DevilStrategy::WorstCase, default_max_steps(&st)).unwrap();
        assert_eq!(traces.len(), 1);
        let t = &traces[0];
        assert_eq!(t.terminal, Terminal::SigmaDrop);
        assert_eq!(t.steps.len(), 5);

        let kinds: Vec<StepKind> = t.steps.iter().map(|s| s.kind).collect();
        assert_eq!(
            kinds,
            vec![
                StepKind::Esoteric,
                StepKind::CurveStep,
                StepKind::Standard,
                StepKind::Standard,
                StepKind::GammaStep,
            ]
        );
        let fibers: Vec<Option<FiberPoint>> = t.steps.iter().map(|s| s.fiber.clone()).collect();
        let one = ctx.one();
        let zero = ctx.zero();
        assert_eq!(
            fibers,
            vec![
                Some(FiberPoint::XChart(one.clone())),
                None,
                Some(FiberPoint::XChart(zero.clone())),
                Some(FiberPoint::YChartOrigin),
                Some(FiberPoint::YChartOrigin),
            ]
        );
        assert_eq!(t.steps[1].center, Center::Curve(Axis::X));
        assert_eq!(t.steps[4].center, Center::Gamma(vec![Axis::Y]));
        let outcomes: Vec<OutcomeTag> = t.steps.iter().map(|s| s.outcome).collect();
        assert_eq!(
            outcomes,
            vec![
                OutcomeTag::Continued,
                OutcomeTag::Continued,
                OutcomeTag::Continued,
                OutcomeTag::Continued,
                OutcomeTag::SigmaDrop,
            ]
        );
        assert_eq!(
            t.steps.iter().map(|s| s.year).collect::<Vec<_>>(),
            vec![0, 1, 2, 3, 4]
        );
        assert_eq!(
            t.steps.iter().map(|s| s.pre_state.prec).collect::<Vec<_>>(),
            vec![30, 28, 26, 24, 22]
        );

        // The raise itself.
        let s0 = &t.steps[0].pre;
        let s1 = t.steps[0].post.as_ref().unwrap();
        assert_eq!(s0.configuration, Configuration::TwoBad);
        assert_eq!(s1.configuration, Configuration::OneBad);
        assert_eq!(
            s0.inv_spade,
            SpadePair::from_words(Word(vec![r(1), r(1)]), Word(vec![r(4)]))
        );
        assert_eq!(
            s1.inv_spade,
            SpadePair::from_words(Word(vec![rq(3, 2)]), Word(vec![r(3)]))
        );

        // The curve move holds the two-word invariant still and lowers the
        // weight by exactly one.
        let c_pre = &t.steps[1].pre;
        let c_post = t.steps[1].post.as_ref().unwrap();
        assert_eq!(c_pre.inv_spade, c_post.inv_spade);
        assert_eq!(c_pre.mu_p, r(4));
        assert_eq!(c_post.mu_p, r(3));

        // The exit position: one bad and one good divisor, already tight.
        let s4 = t.steps[3].post.as_ref().unwrap();
        assert_eq!(s4.configuration, Configuration::OneBadOneGood);
        assert!(s4.inv_spade.is_zero());
        assert_eq!(s4.tight, crate::invariants::TightCase::TypeI);
    }

    #[test]
    fn flagship_episode_passes_every_check() {
        let ctx = FqCtx::new(2, 1).unwrap();
        let st = flagship(&ctx);
        let traces = run(&st, &DevilStrategy::WorstCase, default_max_steps(&st)).unwrap();
        let eps = detect_jump_episodes(&traces[0]);
        assert_eq!(eps.len(), 1);
        let ep = &eps[0];
        assert!(ep.complete());
        assert!(
            ep.all_passed(),
            "failed checks: {:?}",
            ep.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>()
        );
        assert_eq!(ep.esoteric_step, 0);
        assert_eq!(ep.run_steps, vec![1, 2, 3]);
        assert_eq!(ep.sharp_step, Some(3));
        assert_eq!(ep.flat_good, Some(true));
        assert_eq!(ep.m_heart, r(1));
        assert_eq!(ep.m_tilde, Some(rq(3, 2)));
        assert_eq!(ep.m_flat, Some(rq(3, 2)));
        assert_eq!(ep.m_natural, Some(rq(3, 2)));
        assert_eq!(ep.mu_natural, Some(r(2)));
        assert_eq!(ep.w_rho_sharp, Some(r(0)));
    }

    #[test]
    fn episode_reports_truncation_at_the_budget() {
        let ctx = FqCtx::new(2, 1).unwrap();
        let st = flagship(&ctx);
        let traces = run(&st, &DevilStrategy::WorstCase, 2).unwrap();
        let t = &traces[0];
        assert_eq!(t.terminal, Terminal::MaxSteps);
        assert_eq!(t.steps.len(), 2);
        let eps = detect_jump_episodes(t);
        assert_eq!(eps.len(), 1);
        assert!(eps[0].truncated);
        // Truncation is reported, not failed: every computable check holds.
        assert!(eps[0].all_passed());
        assert_eq!(eps[0].sharp_step, None);
    }

    #[test]
    fn exhaustive_devil_maps_the_whole_tree() {
        let ctx = FqCtx::new(2, 1).unwrap();
        let st = flagship(&ctx);
        let traces = run(
            &st,
            &DevilStrategy::Exhaustive { max_paths: 64 },
            default_max_steps(&st),
        )
        .unwrap();
        assert_eq!(traces.len(), 5);
        assert_eq!(
            traces.iter().map(|t| t.terminal).collect::<Vec<_>>(),
            vec![
                Terminal::SigmaDrop,
                Terminal::SigmaDrop,
                Terminal::SigmaDrop,
                Terminal::TightResolved,
                Terminal::TightResolved,
            ]
        );
        assert_eq!(
            traces.iter().map(|t| t.steps.len()).collect::<Vec<_>>(),
            vec![2, 2, 5, 5, 5]
        );
        // First moves in fiber order; only the last branch raises the word.
        let one = ctx.one();
        let zero = ctx.zero();
        assert_eq!(traces[0].steps[0].fiber, Some(FiberPoint::YChartOrigin));
        assert_eq!(traces[1].steps[0].fiber, Some(FiberPoint::XChart(zero.clone())));
        for t in &traces[2..] {
            assert_eq!(t.steps[0].fiber, Some(FiberPoint::XChart(one.clone())));
            assert_eq!(t.steps[0].kind, StepKind::Esoteric);
        }
        assert_eq!(traces[0].steps[0].kind, StepKind::Standard);
        assert_eq!(traces[1].steps[0].kind, StepKind::Standard);

        for (i, t) in traces.iter().enumerate() {
            assert_ne!(t.terminal, Terminal::MaxSteps);
            let audit = compare_old_new(t);
            assert!(audit.all_strict, "legacy tuple rose on path {i}");
            let eps = detect_jump_episodes(t);
            match i {
                0 | 1 => assert!(eps.is_empty()),
                2 => {
                    assert_eq!(eps.len(), 1);
                    assert!(eps[0].complete());
                    assert!(eps[0].all_passed());
                }
                _ => {
                    // The run exits into a good boundary: truncated, with
                    // nothing failed.
                    assert_eq!(eps.len(), 1);
                    assert!(eps[0].truncated);
                    assert!(eps[0].all_passed());
                }
            }
        }
    }

    #[test]
    fn exhaustive_budget_is_a_hard_fuse() {
        let ctx = FqCtx::new(2, 1).unwrap();
        let st = flagship(&ctx);
        let err = run(
            &st,
            &DevilStrategy::Exhaustive { max_paths: 2 },
            default_max_steps(&st),
        )
        .unwrap_err();
        assert_eq!(err, DriverError::PathBudget { limit: 2 });
    }

    #[test]
    fn scripted_devil_consumes_choices_and_falls_back() {
        let ctx = FqCtx::new(2, 1).unwrap();
        let st = flagship(&ctx);
        let one = ctx.one();
        let zero = ctx.zero();
        // Three scripted choices: the raise, an invalid entry (the second
        // point move has a single candidate), and a valid pick of the
        // resolving chart at the third.
        let script = DevilStrategy::Scripted(vec![
            FiberPoint::XChart(one.clone()),
            FiberPoint::XChart(one.clone()),
            FiberPoint::XChart(one.clone()),
        ]);
        let traces = run(&st, &script, default_max_steps(&st)).unwrap();
        assert_eq!(traces.len(), 1);
        let t = &traces[0];
        assert_eq!(t.terminal, Terminal::TightResolved);
        let fibers: Vec<Option<FiberPoint>> = t.steps.iter().map(|s| s.fiber.clone()).collect();
        assert_eq!(
            fibers,
            vec![
                Some(FiberPoint::XChart(one.clone())),
                None,
                Some(FiberPoint::XChart(zero.clone())),
                Some(FiberPoint::XChart(one.clone())),
                None,
            ]
        );
        assert_eq!(t.steps[4].kind, StepKind::GammaStep);
        assert_eq!(t.steps[4].outcome, OutcomeTag::Resolved);
    }

    #[test]
    fn curve_first_game_ends_without_exhausting_steps() {
        let ctx = FqCtx::new(2, 1).unwrap();
        let st = running(&ctx);
        let traces = run(&st, &DevilStrategy::WorstCase, default_max_steps(&st)).unwrap();
        assert_eq!(traces.len(), 1);
        let t = &traces[0];
        assert_eq!(t.terminal, Terminal::SigmaDrop);
        assert_eq!(t.steps.len(), 2);
        assert_eq!(t.steps[0].kind, StepKind::CurveStep);
        assert_eq!(t.steps[0].center, Center::Curve(Axis::X));
        assert_eq!(t.steps[1].kind, StepKind::Standard);
        assert_eq!(t.steps[1].fiber, Some(FiberPoint::YChartOrigin));
        assert_eq!(t.steps[1].outcome, OutcomeTag::SigmaDrop);
        assert!(detect_jump_episodes(t).is_empty());
        let audit = compare_old_new(t);
        assert_eq!(audit.rows.len(), 1);
        assert!(audit.all_strict);
    }

    #[test]
    fn tight_game_with_a_good_boundary_resolves_at_once() {
        let ctx = FqCtx::new(2, 1).unwrap();
        let st = tight_two_good(&ctx);
        let traces = run(&st, &DevilStrategy::WorstCase, default_max_steps(&st)).unwrap();
        assert_eq!(traces.len(), 1);
        let t = &traces[0];
        assert_eq!(t.terminal, Terminal::TightResolved);
        assert_eq!(t.steps.len(), 1);
        assert_eq!(t.steps[0].kind, StepKind::GammaStep);
        assert_eq!(t.steps[0].center, Center::Gamma(vec![Axis::Y, Axis::X]));
        assert_eq!(t.steps[0].fiber, None);
        assert_eq!(t.steps[0].outcome, OutcomeTag::Resolved);
    }

    #[test]
    fn tight_game_walks_down_the_gamma_ladder() {
        let ctx = FqCtx::new(2, 1).unwrap();
        let st = tight_unit(&ctx);
        let traces = run(&st, &DevilStrategy::WorstCase, default_max_steps(&st)).unwrap();
        assert_eq!(traces.len(), 1);
        let t = &traces[0];
        assert_eq!(t.terminal, Terminal::SigmaDrop);
        assert_eq!(t.steps.len(), 2);
        assert_eq!(t.steps[0].kind, StepKind::GammaStep);
        assert_eq!(t.steps[0].center, Center::Gamma(vec![Axis::X]));
        assert_eq!(t.steps[0].outcome, OutcomeTag::Continued);
        assert_eq!(t.steps[1].kind, StepKind::GammaStep);
        assert_eq!(t.steps[1].center, Center::Gamma(vec![Axis::Y]));
        assert_eq!(t.steps[1].outcome, OutcomeTag::SigmaDrop);
        // The gamma value falls strictly between consecutive tight moves.
        assert!(t.steps[0].pre.gamma > t.steps[1].pre.gamma);
        // Tight moves stay out of the legacy comparison.
        assert!(compare_old_new(t).rows.is_empty());
    }

    fn assert_audit_clean(trace: &Trace) {
        let audit = audit_trace(trace);
        assert!(!audit.lines.is_empty(), "an audited game must say something");
        for l in audit.failures() {
            panic!(
                "step {} ({:?}): {} failed: {}",
                l.step, l.fiber, l.name, l.detail
            );
        }
        assert!(audit.all_passed());
    }

    #[test]
    fn audit_passes_the_flagship_game() {
        let ctx = FqCtx::new(2, 1).unwrap();
        let st = flagship(&ctx);
        let traces = run(&st, &DevilStrategy::WorstCase, default_max_steps(&st)).unwrap();
        assert_eq!(traces.len(), 1);
        assert_audit_clean(&traces[0]);
    }

    #[test]
    fn audit_passes_the_exhaustive_tree() {
        let ctx = FqCtx::new(2, 1).unwrap();
        let st = flagship(&ctx);
        let traces = run(
            &st,
            &DevilStrategy::Exhaustive { max_paths: 400 },
            default_max_steps(&st),
        )
        .unwrap();
        assert!(traces.len() > 1);
        for t in &traces {
            assert_audit_clean(t);
        }
    }

    #[test]
    fn audit_passes_the_curve_opening() {
        let ctx = FqCtx::new(2, 1).unwrap();
        let st = running(&ctx);
        let traces = run(&st, &DevilStrategy::WorstCase, default_max_steps(&st)).unwrap();
        assert_eq!(traces.len(), 1);
        assert_eq!(traces[0].steps[0].kind, StepKind::CurveStep);
        assert_audit_clean(&traces[0]);
    }

    #[test]
    fn audit_passes_both_tight_games() {
        let ctx = FqCtx::new(2, 1).unwrap();
        for st in [tight_two_good(&ctx), tight_unit(&ctx)] {
            let traces = run(&st, &DevilStrategy::WorstCase, default_max_steps(&st)).unwrap();
            for t in &traces {
                assert!(t.steps.iter().all(|s| s.kind == StepKind::GammaStep));
                assert_audit_clean(t);
            }
        }
    }

    #[test]
    fn audit_flags_a_tampered_trace() {
        let ctx = FqCtx::new(2, 1).unwrap();
        let st = flagship(&ctx);
        let mut traces = run(&st, &DevilStrategy::WorstCase, default_max_steps(&st)).unwrap();
        let t = &mut traces[0];
        let victim = t
            .steps
            .iter_mut()
            .find(|s| s.post.is_some())
            .expect("the flagship game records at least one landing");
        victim.post.as_mut().unwrap().inv_heart = Rat::from_int(99);
        let audit = audit_trace(t);
        assert!(!audit.all_passed());
        assert!(audit
            .failures()
            .iter()
            .any(|l| l.name == "recorded-landing-matches"));
    }
}
