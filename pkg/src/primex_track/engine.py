"""Vectorized network engine for Monte Carlo runs.

Runs the same algorithms as :mod:`protocols` on stacked arrays with a
leading run axis: information matrices ``(R, N, n, n)``, information vectors
``(R, N, n)`` and codes packed into 64-bit words ``(R, N, W)``. All runs share one graph, so
each numpy call advances every run at once. A sequential neighbor fold is
batched across nodes by fold position, which preserves the per-node order
because each node only reads the round-start snapshot of its neighbors.

Packed codes are addressed by global index rather than by live position.
The sliding window clears bits older than the window instead of dropping
them; since every node shares the layout, cleared and dropped positions
compare identically.

Pairwise weights use the closed form of the constrained least-squares fit:
with ``n10`` bits only at the local node and ``n01`` bits only at the
received one, ``J(w) = n10 w**2 + n01 (1 - w)**2`` so ``w_i = n01 / (n10 + n01)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .belief import GaussianBelief, MotionModel, SensorModel
from .errors import FusionError, ProtocolError
from .fusion import GOLDEN_ITERATIONS, _INV_PHI, FusionStats
from .ic_codes import InformationCode, PrimeIndexAllocator, allocate_indices
from .network import NetworkGraph
from .protocols import (
    ALGORITHMS,
    COMMUNICATION,
    SENSOR,
    NodeState,
    ProtocolConfig,
    RoundLog,
    uses_event_trigger,
)


def _popcount(words: np.ndarray) -> np.ndarray:
    return np.bitwise_count(words).sum(axis=-1, dtype=np.int64)


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def _matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...j->...i", m, v)


def ci_optimal_weights(omega_a: np.ndarray, omega_b: np.ndarray) -> np.ndarray:
    """Batched trace-minimizing CI weight on ``omega_a`` for stacks ``(r, n, n)``.

    With ``omega_b = L L^T`` and ``L^-1 omega_a L^-T = U diag(mu) U^T`` the
    objective is ``sum_k c_k / (1 + w (mu_k - 1))`` where ``c_k`` is the
    squared norm of column k of ``L^-T U``. Golden-section search runs on
    that scalar form, then the endpoints and midpoint are compared exactly as
    in the pairwise rule.
    """
    chol_inv = np.linalg.inv(np.linalg.cholesky(omega_b))
    chol_inv_t = np.swapaxes(chol_inv, -1, -2)
    mu, u = np.linalg.eigh(_sym(chol_inv @ omega_a @ chol_inv_t))
    g = chol_inv_t @ u
    c = np.sum(g * g, axis=-2)
    d = mu - 1.0

    def f(w: np.ndarray) -> np.ndarray:
        return np.add.reduce(c / (1.0 + w[:, None] * d), axis=1)

    r = omega_a.shape[0]
    # bracket [lo, lo + width]; interior points sit at fractions 1-phi and phi
    lo = np.zeros(r)
    width = 1.0
    f1 = f(lo + (1.0 - _INV_PHI))
    f2 = f(lo + _INV_PHI)
    for _ in range(GOLDEN_ITERATIONS):
        left = f1 <= f2
        lo = np.where(left, lo, lo + (1.0 - _INV_PHI) * width)
        width *= _INV_PHI
        fn = f(lo + np.where(left, 1.0 - _INV_PHI, _INV_PHI) * width)
        f1, f2 = np.where(left, fn, f2), np.where(left, f1, fn)
    gs = lo + 0.5 * width

    cands = np.stack([gs, np.zeros(r), np.full(r, 0.5), np.ones(r)], axis=1)
    vals = np.stack([f(cands[:, q]) for q in range(4)], axis=1)
    idx = np.arange(r)
    best = np.argmin(vals, axis=1)
    vmin = vals[idx, best]
    return np.where(vals[:, 2] <= vmin + 1e-12 * np.abs(vmin), 0.5, cands[idx, best])


@dataclass(frozen=True)
class BatchRoundLog:
    """One communication round across all runs."""

    k: int
    l: int
    transmit: np.ndarray  # (R, N) bool
    fusions: np.ndarray  # (R,) int

    def for_run(self, run: int) -> RoundLog:
        return RoundLog(self.k, self.l, tuple(np.nonzero(self.transmit[run])[0].tolist()), int(self.fusions[run]))


class Engine:
    """Array-backed network state for one algorithm, one graph and ``runs`` runs."""

    def __init__(
        self,
        graph: NetworkGraph,
        algorithm: str,
        prior: GaussianBelief,
        motion: MotionModel,
        sensor: SensorModel,
        config: ProtocolConfig = ProtocolConfig(),
        window_length: int | None = None,
        runs: int = 1,
    ):
        if algorithm not in ALGORITHMS:
            raise ProtocolError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
        self.graph = graph
        self.algorithm = algorithm
        self.motion = motion
        self.sensor = sensor
        self.config = config
        self.runs = runs
        self.event_trigger = uses_event_trigger(algorithm)
        self.stats = FusionStats()
        n_nodes = graph.node_count
        self.allocator = PrimeIndexAllocator(max(len(graph.sensor_ids), 1), window_length)
        self.sensor_nodes = np.array(graph.sensor_ids, dtype=np.int64)
        self.nbr = graph.padded_in_neighbors
        self._f_t = motion.F.T.copy()

        copies = 1 if algorithm == "cf" else n_nodes
        self.omega = np.broadcast_to(prior.info_matrix, (runs, copies) + prior.info_matrix.shape).copy()
        self.eta = np.broadcast_to(prior.info_vector, (runs, copies) + prior.info_vector.shape).copy()
        self.ic = np.ones((runs, n_nodes, 1), dtype=np.uint64)
        self.ref = np.zeros((runs, n_nodes, 1), dtype=np.uint64)

    # -- state access ---------------------------------------------------

    def means(self) -> np.ndarray:
        """Posterior means ``(R, N, n)``."""
        mean = _matvec(_sym(np.linalg.inv(self.omega)), self.eta)
        if self.algorithm == "cf":
            mean = np.repeat(mean, self.graph.node_count, axis=1)
        return mean

    def to_states(self, run: int = 0) -> list[NodeState]:
        out = []
        for i in range(self.graph.node_count):
            src = 0 if self.algorithm == "cf" else i
            rank = self.graph.sensor_rank.get(i)
            out.append(
                NodeState(
                    GaussianBelief(self.omega[run, src].copy(), self.eta[run, src].copy()),
                    InformationCode._wrap(self._unpack(self.ic[run, i])),
                    InformationCode._wrap(self._unpack(self.ref[run, i])),
                    SENSOR if rank is not None else COMMUNICATION,
                    rank,
                )
            )
        return out

    def _unpack(self, words: np.ndarray) -> np.ndarray:
        bits = np.unpackbits(words.astype("<u8").view(np.uint8), bitorder="little")
        return bits[self.allocator.window_start : self.allocator.end_index].copy()

    # -- time step --------------------------------------------------------

    def step(self, k: int, measurements: np.ndarray | None) -> list[BatchRoundLog]:
        """Advance through time step ``k``.

        ``measurements`` has shape ``(R, S, n_z)`` with sensors in rank order.
        """
        n_s = self.sensor_nodes.size
        z = None if measurements is None else np.asarray(measurements, dtype=float)
        if n_s and (z is None or z.shape[:2] != (self.runs, n_s)):
            raise ProtocolError(f"expected measurements of shape ({self.runs}, {n_s}, n_z) at k={k}")
        self.allocator, _ = allocate_indices(self.allocator, k)
        if k > 1:
            self._predict()
        if n_s:
            contrib = z @ (self.sensor.R_inv @ self.sensor.H)
            if self.algorithm == "cf":
                self.omega[:, 0] = _sym(self.omega[:, 0] + n_s * self.sensor.info_gain)
                self.eta[:, 0] = self.eta[:, 0] + contrib.sum(axis=1)
            else:
                rows = self.sensor_nodes
                self.omega[:, rows] = self.omega[:, rows] + self.sensor.info_gain
                self.eta[:, rows] = self.eta[:, rows] + contrib
        self._grow_codes()
        if self.algorithm == "cf":
            return []

        round_fn = {
            "ci-uw": self._ci_uniform_round,
            "ci-ow": self._ci_optimal_round,
            "primex-c": self._consensus_round,
            "primex-c-et": self._consensus_round,
            "primex-g": self._gossip_round,
            "primex-g-et": self._gossip_round,
        }[self.algorithm]
        return [round_fn(k, l) for l in range(1, self.config.rounds + 1)]

    def _predict(self) -> None:
        cov = _sym(np.linalg.inv(self.omega))
        mean = _matvec(cov, self.eta)
        cov = _sym(self.motion.F @ cov @ self._f_t + self.motion.Q)
        self.omega = _sym(np.linalg.inv(cov))
        self.eta = _matvec(self.omega, mean @ self._f_t)

    def _grow_codes(self) -> None:
        alloc = self.allocator
        words = -(-alloc.end_index // 64)
        if words > self.ic.shape[2]:
            pad = np.zeros(self.ic.shape[:2] + (words - self.ic.shape[2],), dtype=np.uint64)
            self.ic = np.concatenate([self.ic, pad], axis=2)
            self.ref = np.concatenate([self.ref, pad], axis=2)
        if self.sensor_nodes.size:
            idx = alloc.index(0, alloc.current_time) + np.arange(self.sensor_nodes.size)
            self.ic[:, self.sensor_nodes, idx // 64] |= np.left_shift(np.uint64(1), (idx % 64).astype(np.uint64))
        start = alloc.window_start
        if start:
            full, part = divmod(start, 64)
            self.ic[:, :, :full] = 0
            self.ref[:, :, :full] = 0
            if part:
                keep = ~np.uint64((1 << part) - 1)
                self.ic[:, :, full] &= keep
                self.ref[:, :, full] &= keep

    # -- rounds -----------------------------------------------------------

    def _gate(self, l: int) -> np.ndarray:
        shape = self.ic.shape[:2]
        if not self.event_trigger:
            return np.ones(shape, dtype=bool)
        if l == 1 and not self.config.gate_first_round:
            transmit = np.ones(shape, dtype=bool)
        else:
            transmit = np.any(self.ic & ~self.ref, axis=2)
        self.ref[transmit] = self.ic[transmit]
        return transmit

    def _primex_fuse(self, rr, ii, jj, snap_omega, snap_eta, snap_ic) -> np.ndarray:
        """Fuse snapshot ``(rr, jj)`` into current ``(rr, ii)``; returns per-run fusion counts."""
        phi_i = self.ic[rr, ii]
        phi_j = snap_ic[rr, jj]
        n10 = _popcount(phi_i & ~phi_j)
        n01 = _popcount(~phi_i & phi_j)
        differ = (n10 + n01) > 0
        counts = np.bincount(rr[differ], minlength=self.runs)
        self.stats.fusions += int(differ.sum())
        # a received subset leaves the local density unchanged exactly
        act = n01 > 0
        if not np.any(act):
            return counts
        rr, ii, jj, n10, n01 = rr[act], ii[act], jj[act], n10[act], n01[act]
        w = n01 / (n10 + n01)
        e_i, e_j = 1.0 - w, w
        if self.config.exact_product_when_disjoint:
            disjoint = ~np.any(phi_i[act] & phi_j[act], axis=1)
            e_i = np.where(disjoint, 1.0, e_i)
            e_j = np.where(disjoint, 1.0, e_j)
            self.stats.disjoint += int(disjoint.sum())
        self.omega[rr, ii] = _sym(
            e_i[:, None, None] * self.omega[rr, ii] + e_j[:, None, None] * snap_omega[rr, jj]
        )
        self.eta[rr, ii] = e_i[:, None] * self.eta[rr, ii] + e_j[:, None] * snap_eta[rr, jj]
        self.ic[rr, ii] |= snap_ic[rr, jj]
        return counts

    def _consensus_round(self, k: int, l: int) -> BatchRoundLog:
        transmit = self._gate(l)
        snap = self.omega.copy(), self.eta.copy(), self.ic.copy()
        fusions = np.zeros(self.runs, dtype=np.int64)
        for m in range(self.nbr.shape[1]):
            nodes = np.nonzero(self.nbr[:, m] >= 0)[0]
            senders = self.nbr[nodes, m]
            rr, cc = np.nonzero(transmit[:, senders])
            if rr.size:
                fusions += self._primex_fuse(rr, nodes[cc], senders[cc], *snap)
        return BatchRoundLog(k, l, transmit, fusions)

    def _gossip_round(self, k: int, l: int) -> BatchRoundLog:
        transmit = self._gate(l)
        snap = self.omega.copy(), self.eta.copy(), self.ic.copy()
        fusions = np.zeros(self.runs, dtype=np.int64)
        if self.nbr.shape[1]:
            present = self.nbr >= 0
            safe = np.where(present, self.nbr, 0)
            scores = _popcount(snap[2][:, safe] & ~self.ic[:, :, None, :])
            scores = np.where(present[None] & transmit[:, safe], scores, -1)
            best = np.argmax(scores, axis=2)
            best_score = np.take_along_axis(scores, best[..., None], axis=2)[..., 0]
            rr, ii = np.nonzero(best_score > 0)
            if rr.size:
                fusions += self._primex_fuse(rr, ii, self.nbr[ii, best[rr, ii]], *snap)
        return BatchRoundLog(k, l, transmit, fusions)

    def _ci_uniform_round(self, k: int, l: int) -> BatchRoundLog:
        adj = self.graph.adjacency
        count = adj.sum(axis=1) + 1.0
        r, n, d, _ = self.omega.shape
        summed = adj @ self.omega.reshape(r, n, d * d)
        omega = (self.omega + summed.reshape(r, n, d, d)) / count[:, None, None]
        eta = (self.eta + adj @ self.eta) / count[:, None]
        self.omega, self.eta = _sym(omega), eta
        transmit = np.ones(self.ic.shape[:2], dtype=bool)
        return BatchRoundLog(k, l, transmit, np.full(self.runs, int(adj.sum())))

    def _ci_optimal_round(self, k: int, l: int) -> BatchRoundLog:
        snap_omega, snap_eta = self.omega.copy(), self.eta.copy()
        n = self.omega.shape[-1]
        fusions = 0
        for m in range(self.nbr.shape[1]):
            nodes = np.nonzero(self.nbr[:, m] >= 0)[0]
            cols = self.nbr[nodes, m]
            a = self.omega[:, nodes]
            b = snap_omega[:, cols]
            try:
                w = ci_optimal_weights(a.reshape(-1, n, n), b.reshape(-1, n, n)).reshape(self.runs, -1)
            except np.linalg.LinAlgError as exc:
                raise FusionError("CI weight search met a non positive definite matrix") from exc
            self.omega[:, nodes] = _sym(w[..., None, None] * a + (1.0 - w)[..., None, None] * b)
            self.eta[:, nodes] = w[..., None] * self.eta[:, nodes] + (1.0 - w)[..., None] * snap_eta[:, cols]
            fusions += nodes.size
        transmit = np.ones(self.ic.shape[:2], dtype=bool)
        return BatchRoundLog(k, l, transmit, np.full(self.runs, fusions))
