"""End-to-end state protection pipelines.

Each run_* function wires instruments and channels into one protection
scheme and reports the output state, success probability, fidelity against
the input, and the full branch trail. Deterministic schemes (qfbc, qffc_rot,
wmppf) are trace-preserving maps with success probability exactly 1;
post-selected schemes (wmqmr, qffc_ps, composite, ent_wmqmr) report the
normalized accepted mixture and its weight.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from . import qmath
from .channels import KrausChannel, ad_kraus, ad_unravel, apply_channel, lift_local
from .measurements import (
    Branch,
    BranchEnsemble,
    PartialMeasurement,
    flips,
    measure,
    partial_measure,
    post_wm_ops,
    povm_axis,
    povm_generalized,
    pre_wm_pair,
    qmr_map,
    rotation,
    wm_map,
)
from .qmath import ID2, InitialState, dagger, state_from_angles

TRACE_ATOL = 1e-12


@dataclass(frozen=True)
class SchemeResult:
    """Outcome of one scheme run.

    output_state is the CPTP output for deterministic schemes and the
    normalized accepted mixture for post-selected ones (None when the
    accepted weight is zero, in which case fidelity is reported as 0).
    """

    output_state: np.ndarray | None
    success_prob: float
    fidelity: float
    branches: BranchEnsemble
    concurrence: float | None = None


@dataclass(frozen=True)
class SchemeSpec:
    """A scheme kind plus its noise channel and named parameters."""

    kind: str
    noise: KrausChannel | None
    params: dict[str, Any]


def _check_prob(value: float, name: str):
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must be in [0, 1], got {value}")


def _conj(op: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return op @ rho @ dagger(op)


def _conditional(rho_in, accepted_sum, success):
    if success <= 1e-15:
        return None, 0.0
    out = accepted_sum / success
    return out, qmath.fidelity(rho_in, out)


def matched_qmr_strength(p1: float, r: float) -> float:
    """Reversal strength p2 = 1 - (1-p1)(1-r) that undoes the no-jump branch."""
    return 1.0 - (1.0 - p1) * (1.0 - r)


def matched_post_wm_strength(p: float) -> float:
    """Post-WM strength (2p-1)/p that exactly inverts the pre-measurement (p >= 1/2)."""
    if p <= 0:
        return 0.0
    return max(0.0, (2.0 * p - 1.0) / p)


def run_wmqmr(rho_in, r: float, p1: float, p2: float | None = None,
              no_jump_only: bool = False) -> SchemeResult:
    """Weak measurement, amplitude damping, reversal measurement.

    p2 defaults to the matched reversal strength. With no_jump_only the
    channel is restricted to its A0 trajectory (the jump branch is
    discarded), under which the matched p2 recovers the input exactly.
    """
    rho_in = qmath.check_density(rho_in)
    _check_prob(r, "r")
    _check_prob(p1, "p1")
    if p2 is None:
        p2 = matched_qmr_strength(p1, r)
    _check_prob(p2, "p2")

    branches: list[Branch] = []
    wm_ens = partial_measure(rho_in, wm_map(p1))
    branches.append(wm_ens.branches[1])
    s = wm_ens.branches[0].state

    if no_jump_only:
        unravel = ad_unravel(s, r)
        branches.append(Branch(label="wm/jump/discard",
                               state=unravel.branches[1].state, accepted=False))
        s = unravel.branches[0].state
    else:
        s = apply_channel(s, ad_kraus(r))

    qmr_ens = partial_measure(s, qmr_map(p2))
    branches.append(Branch(label="wm/ad/qmr/discard",
                           state=qmr_ens.branches[1].state, accepted=False))
    kept = qmr_ens.branches[0].state
    branches.insert(0, Branch(label="wm/ad/qmr/accept", state=kept, accepted=True))

    ensemble = BranchEnsemble(branches=tuple(branches))
    success = ensemble.success_prob
    out, fid = _conditional(rho_in, kept, success)
    return SchemeResult(output_state=out, success_prob=success, fidelity=fid,
                        branches=ensemble)


def run_qfbc(rho_in, noise: KrausChannel, theta: float, eta: float | None = None,
             meas_axis: str = "y", rot_axis: str = "z", beta: float | None = None,
             sign_binding: int = +1,
             etas: tuple[float, float] | None = None) -> SchemeResult:
    """Measure after the noise, rotate conditioned on the outcome.

    The default binding rotates the '+' outcome by +eta and the '-' outcome
    by -eta about rot_axis (sign_binding = -1 swaps them). etas overrides
    the tied form with independently signed angles per outcome. beta selects
    the phase-generalized measurement pair instead of an axis pair.
    """
    rho_in = qmath.check_density(rho_in)
    if etas is None:
        if eta is None:
            raise ValueError("provide eta or etas")
        if sign_binding not in (+1, -1):
            raise ValueError(f"sign_binding must be +1 or -1, got {sign_binding}")
        etas = (sign_binding * eta, -sign_binding * eta)

    rho_e = apply_channel(rho_in, noise)
    pair = povm_generalized(theta, beta) if beta is not None \
        else povm_axis(meas_axis, theta)
    measured = measure(rho_e, pair)

    out = np.zeros_like(rho_e)
    rotated = []
    for br, angle in zip(measured.branches, etas):
        rot = rotation(rot_axis, abs(angle), +1 if angle >= 0 else -1)
        state = _conj(rot.matrix, br.state)
        rotated.append(Branch(label=f"{br.label}/rot", state=state))
        out = out + state
    tr = float(np.real(np.trace(out)))
    if abs(tr - 1.0) > TRACE_ATOL:
        raise ValueError(f"feedback map is not trace preserving: trace {tr}")
    out = out / tr
    return SchemeResult(output_state=out, success_prob=1.0,
                        fidelity=qmath.fidelity(rho_in, out),
                        branches=BranchEnsemble(branches=tuple(rotated)))


def _flip_sandwich(rho_in, noise: KrausChannel, p: float):
    """Shared front of the feed-forward schemes: pre-measure, flip, damp, unflip."""
    pre = measure(rho_in, pre_wm_pair(p))
    fs = flips()
    out = []
    for i, (br, f) in enumerate(zip(pre.branches, fs)):
        s = _conj(f, br.state)
        s = apply_channel(s, noise)
        s = _conj(f, s)
        out.append((f"{br.label}/F{i + 1}/{noise.kind}/F{i + 1}", s))
    return out


def run_qffc_ps(rho_in, r: float, p: float, p_u: float | None = None,
                p_v: float | None = None) -> SchemeResult:
    """Post-selected feed-forward control against amplitude damping.

    Pre-measurement pair, outcome-keyed flips around the channel, then the
    recovery partial measurements N1 / W1 whose null results are kept.
    Strengths default to the exact-reversal values (2p-1)/p.
    """
    rho_in = qmath.check_density(rho_in)
    _check_prob(r, "r")
    _check_prob(p, "p")
    if p_u is None:
        p_u = matched_post_wm_strength(p)
    if p_v is None:
        p_v = matched_post_wm_strength(p)
    post = post_wm_ops(p_u, p_v)

    branches: list[Branch] = []
    kept_sum = np.zeros_like(rho_in)
    for (label, s), pm in zip(_flip_sandwich(rho_in, ad_kraus(r), p), post):
        ens = partial_measure(s, pm)
        kept = ens.branches[0].state
        kept_sum = kept_sum + kept
        branches.append(Branch(label=f"{label}/{pm.role}/accept", state=kept))
        branches.append(Branch(label=f"{label}/{pm.role}/discard",
                               state=ens.branches[1].state, accepted=False))
    ensemble = BranchEnsemble(branches=tuple(branches))
    success = ensemble.success_prob
    out, fid = _conditional(rho_in, kept_sum, success)
    return SchemeResult(output_state=out, success_prob=success, fidelity=fid,
                        branches=ensemble)


def run_qffc_rot(rho_in, noise: KrausChannel, p: float, eta: float,
                 signs: tuple[int, int] = (+1, -1)) -> SchemeResult:
    """Deterministic feed-forward control: rotations instead of post-measurements.

    Both branches are kept; each gets a y-axis rotation R_y(sign_i * eta)
    keyed to its pre-measurement outcome.
    """
    rho_in = qmath.check_density(rho_in)
    _check_prob(p, "p")
    branches = []
    out = np.zeros_like(rho_in)
    for (label, s), sign in zip(_flip_sandwich(rho_in, noise, p), signs):
        rot = rotation("y", eta, sign)
        state = _conj(rot.matrix, s)
        branches.append(Branch(label=f"{label}/rot", state=state))
        out = out + state
    tr = float(np.real(np.trace(out)))
    if abs(tr - 1.0) > TRACE_ATOL:
        raise ValueError(f"feed-forward map is not trace preserving: trace {tr}")
    out = out / tr
    return SchemeResult(output_state=out, success_prob=1.0,
                        fidelity=qmath.fidelity(rho_in, out),
                        branches=BranchEnsemble(branches=tuple(branches)))


def run_wmppf(rho_in, noise: KrausChannel, p: float) -> SchemeResult:
    """Flip sandwich with no recovery stage; success probability is exactly 1."""
    return run_qffc_rot(rho_in, noise, p, eta=0.0)


def run_composite(rho_in, r: float, p: float, eta: float,
                  p_u: float | None = None, p_v: float | None = None,
                  signs: tuple[int, int] = (+1, -1)) -> SchemeResult:
    """Feed-forward control with an added feedback rotation per accepted branch."""
    base = run_qffc_ps(rho_in, r, p, p_u=p_u, p_v=p_v)
    rho_in = qmath.check_density(rho_in)
    branches = []
    kept_sum = np.zeros_like(rho_in)
    sign_iter = iter(signs)
    for br in base.branches.branches:
        if not br.accepted:
            branches.append(br)
            continue
        rot = rotation("y", eta, next(sign_iter))
        state = _conj(rot.matrix, br.state)
        kept_sum = kept_sum + state
        branches.append(Branch(label=f"{br.label}/rot", state=state))
    ensemble = BranchEnsemble(branches=tuple(branches))
    success = ensemble.success_prob
    out, fid = _conditional(rho_in, kept_sum, success)
    return SchemeResult(output_state=out, success_prob=success, fidelity=fid,
                        branches=ensemble)


def run_ent_wmqmr(rho_2q, r1: float, r2: float, p1: float,
                  p2: float | None = None, side: str = "one") -> SchemeResult:
    """One- or two-sided WMQMR protection of a two-qubit state.

    Local amplitude damping acts on both qubits (strengths r1, r2); the
    weak measurement and its reversal act on qubit 1 only (side='one') or
    on both (side='both'). Reports the concurrence of the accepted state.
    """
    rho_2q = qmath.check_density(rho_2q)
    if rho_2q.shape[0] != 4:
        raise ValueError("run_ent_wmqmr expects a two-qubit state (dim 4)")
    for name, v in (("r1", r1), ("r2", r2), ("p1", p1)):
        _check_prob(v, name)
    if side not in ("one", "both"):
        raise ValueError(f"side must be 'one' or 'both', got {side!r}")
    if p2 is None:
        p2 = matched_qmr_strength(p1, r1)
    _check_prob(p2, "p2")

    def lifted(pm: PartialMeasurement, qubit: int) -> PartialMeasurement:
        op = np.kron(pm.op, ID2) if qubit == 1 else np.kron(ID2, pm.op)
        return PartialMeasurement(op=op, strength=pm.strength,
                                  role=f"{pm.role}@q{qubit}")

    sides = (1,) if side == "one" else (1, 2)
    stages = [lifted(wm_map(p1), q) for q in sides]
    post_stages = [lifted(qmr_map(p2), q) for q in sides]

    rejected: list[Branch] = []
    s = rho_2q
    for pm in stages:
        ens = partial_measure(s, pm)
        rejected.append(ens.branches[1])
        s = ens.branches[0].state
    s = apply_channel(s, lift_local(ad_kraus(r1), 1))
    s = apply_channel(s, lift_local(ad_kraus(r2), 2))
    for pm in post_stages:
        ens = partial_measure(s, pm)
        rejected.append(ens.branches[1])
        s = ens.branches[0].state

    success = float(np.real(np.trace(s)))
    ensemble = BranchEnsemble(branches=(
        Branch(label=f"wm[{side}]/ad/qmr/accept", state=s),
        *rejected,
    ))
    out, fid = _conditional(rho_2q, s, success)
    conc = qmath.concurrence(out) if out is not None else 0.0
    return SchemeResult(output_state=out, success_prob=success, fidelity=fid,
                        branches=ensemble, concurrence=conc)


_RUNNERS = {
    "wmqmr": lambda rho, spec: run_wmqmr(
        rho, r=spec.params["r"], p1=spec.params["p1"], p2=spec.params.get("p2"),
        no_jump_only=spec.params.get("no_jump_only", False)),
    "qfbc": lambda rho, spec: run_qfbc(
        rho, spec.noise, theta=spec.params["theta"], eta=spec.params.get("eta"),
        meas_axis=spec.params.get("meas_axis", "y"),
        rot_axis=spec.params.get("rot_axis", "z"),
        beta=spec.params.get("beta"),
        sign_binding=spec.params.get("sign_binding", +1),
        etas=spec.params.get("etas")),
    "qffc_ps": lambda rho, spec: run_qffc_ps(
        rho, r=spec.params["r"], p=spec.params["p"],
        p_u=spec.params.get("p_u"), p_v=spec.params.get("p_v")),
    "qffc_rot": lambda rho, spec: run_qffc_rot(
        rho, spec.noise, p=spec.params["p"], eta=spec.params["eta"],
        signs=spec.params.get("signs", (+1, -1))),
    "wmppf": lambda rho, spec: run_wmppf(rho, spec.noise, p=spec.params["p"]),
    "composite": lambda rho, spec: run_composite(
        rho, r=spec.params["r"], p=spec.params["p"], eta=spec.params["eta"],
        p_u=spec.params.get("p_u"), p_v=spec.params.get("p_v"),
        signs=spec.params.get("signs", (+1, -1))),
    "ent_wmqmr": lambda rho, spec: run_ent_wmqmr(
        rho, r1=spec.params["r1"], r2=spec.params["r2"], p1=spec.params["p1"],
        p2=spec.params.get("p2"), side=spec.params.get("side", "one")),
}

SCHEME_KINDS = tuple(sorted(_RUNNERS))


def run_scheme(rho_in, spec: SchemeSpec) -> SchemeResult:
    """Dispatch a SchemeSpec to its pipeline."""
    kind = spec.kind.lower()
    if kind not in _RUNNERS:
        raise ValueError(f"unknown scheme kind {spec.kind!r}; expected one of {SCHEME_KINDS}")
    return _RUNNERS[kind](rho_in, spec)


def pair_average_fidelity(spec: SchemeSpec, alpha: float, phi: float) -> float:
    """Equal-prior average fidelity over the nonorthogonal pair |psi+->, |psi-->."""
    fids = []
    for sign in (+1, -1):
        rho = state_from_angles(InitialState(alpha=alpha, phi=phi, pair_sign=sign))
        fids.append(run_scheme(rho, spec).fidelity)
    return 0.5 * (fids[0] + fids[1])
