"""Differentiable MaxSAT layer.

The layer relaxes Boolean variables to unit vectors, minimizes
<C, V^T V> by coordinate descent over the non-input vectors, and reads
each variable's probability off its angle to the truth direction.
Training fits the symmetric pairwise weight matrix C by reverse-mode
differentiation through the recorded descent sweeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from maxeq import _mixing
from maxeq.formula import ContractViolation
from maxeq.tasks import Dataset, Example

PROB_EPS = 1e-7


class TrainingDiverged(RuntimeError):
    """Loss became NaN during training."""


@dataclass(frozen=True)
class CMatrix:
    """Symmetric pairwise weights over truth + defined + auxiliary variables.

    Row/column 0 is the truth variable; the diagonal is stored as zeros
    because it only shifts the objective by a constant.
    """

    n_d: int
    n_a: int
    entries: np.ndarray

    def __post_init__(self):
        n1 = self.n_d + self.n_a + 1
        e = np.ascontiguousarray(np.asarray(self.entries, dtype=np.float64))
        if e.shape != (n1, n1):
            raise ContractViolation(f"entries must be {(n1, n1)}, got {e.shape}")
        if not np.array_equal(e, e.T):
            raise ContractViolation("entries must be symmetric")
        if np.any(np.diag(e) != 0.0):
            raise ContractViolation("diagonal must be stored as zeros")
        object.__setattr__(self, "entries", e)

    @property
    def n(self) -> int:
        return self.n_d + self.n_a

    @classmethod
    def from_raw(cls, n_d: int, n_a: int, raw: np.ndarray) -> "CMatrix":
        """Symmetrize and zero the diagonal of an arbitrary square matrix."""
        m = (np.asarray(raw, dtype=np.float64) + np.asarray(raw, dtype=np.float64).T) / 2.0
        np.fill_diagonal(m, 0.0)
        return cls(n_d, n_a, m)


@dataclass(frozen=True)
class SMatrix:
    """Clause-style weight matrix; column 0 is the truth coefficient column."""

    n_d: int
    n_a: int
    entries: np.ndarray

    def __post_init__(self):
        e = np.ascontiguousarray(np.asarray(self.entries, dtype=np.float64))
        if e.ndim != 2 or e.shape[1] != self.n_d + self.n_a + 1:
            raise ContractViolation("S must have one column per variable plus truth")
        object.__setattr__(self, "entries", e)

    @property
    def m(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class EmbeddingState:
    """Unit vectors for truth + variables; row i is variable i's vector."""

    k: int
    vectors: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vectors, dtype=np.float64))
        if v.ndim != 2 or v.shape[1] != self.k:
            raise ContractViolation("vectors must be (n+1, k)")
        norms = np.linalg.norm(v, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ContractViolation("all vectors must have unit norm")
        object.__setattr__(self, "vectors", v)

    @property
    def num_vars(self) -> int:
        return self.vectors.shape[0] - 1


@dataclass(frozen=True)
class MixingTrace:
    """Recorded coordinate updates of one forward solve."""

    var: np.ndarray     # int32 (steps,)
    old: np.ndarray     # float64 (steps, k), pre-update vectors
    norm: np.ndarray    # float64 (steps,)
    skipped: np.ndarray  # bool (steps,)
    steps: int
    sweeps: int


@dataclass(frozen=True)
class LayerConfig:
    n_d: int
    n_a: int
    k: int = 0  # 0 selects the low-rank SDP bound ceil(sqrt(2(n+1))) + 1
    max_sweeps: int = 40
    convergence_tol: float = 1e-4
    degenerate_tol: float = 1e-8
    rounding_threshold: float = 0.5

    def __post_init__(self):
        if self.k == 0:
            object.__setattr__(self, "k", math.ceil(math.sqrt(2 * (self.n_d + self.n_a + 1))) + 1)
        if self.k < 2:
            raise ContractViolation("k must be >= 2")
        if self.convergence_tol <= 0 or self.degenerate_tol <= 0:
            raise ContractViolation("tolerances must be > 0")
        if not 0.0 < self.rounding_threshold < 1.0:
            raise ContractViolation("rounding_threshold must lie in (0, 1)")

    @property
    def n1(self) -> int:
        return self.n_d + self.n_a + 1


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 2e-3
    batch_size: int = 64
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    iht_enabled: bool = False
    iht_fraction: float = 0.2
    backward_cap: int = 40  # sweeps of unroll in the reverse pass
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ContractViolation("learning_rate must be > 0")
        if self.epochs < 1:
            raise ContractViolation("epochs must be >= 1")


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    loss: float
    bit_acc: float
    instance_acc: float


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return (z ^ (z >> 31)) & 0xFFFFFFFFFFFFFFFF


def example_seed(base: int, epoch: int, index: int) -> int:
    """Stable per-example RNG seed, 31-bit for the kernel RNG."""
    return _splitmix64(_splitmix64(base * 2654435761 + epoch) + index) & 0x7FFFFFFF


def _input_arrays(inputs: Iterable[tuple[int, int]]) -> tuple[np.ndarray, np.ndarray]:
    pairs = sorted(inputs)
    in_vars = np.array([v for v, _ in pairs], dtype=np.int32)
    in_vals = np.array([b for _, b in pairs], dtype=np.int8)
    return in_vars, in_vals


def _update_vars(n1: int, in_vars: np.ndarray) -> np.ndarray:
    mask = np.ones(n1, dtype=bool)
    mask[0] = False
    mask[in_vars] = False
    return np.nonzero(mask)[0].astype(np.int32)


def init_state(config: LayerConfig, example_inputs: Iterable[tuple[int, int]],
               rng_seed: int) -> EmbeddingState:
    """Truth at the first basis vector, inputs at -cos(pi*z) times truth,
    everything else uniform random on the unit sphere."""
    in_vars, in_vals = _input_arrays(example_inputs)
    if in_vars.size and (in_vars.min() < 1 or in_vars.max() > config.n_d):
        raise ContractViolation("input variables must be defined variables")
    V = _mixing.init_vectors(config.n1, config.k, in_vars, in_vals, rng_seed)
    return EmbeddingState(config.k, V)


def mixing_solve(C: CMatrix, state: EmbeddingState, outputs: Iterable[int],
                 config: LayerConfig) -> EmbeddingState:
    state2, _ = mixing_solve_traced(C, state, outputs, config)
    return state2


def mixing_solve_traced(C: CMatrix, state: EmbeddingState, outputs: Iterable[int],
                        config: LayerConfig) -> tuple[EmbeddingState, MixingTrace]:
    """Coordinate descent over the given variables in ascending index order."""
    upd = np.array(sorted(set(outputs)), dtype=np.int32)
    if upd.size and (upd.min() < 1 or upd.max() > C.n):
        raise ContractViolation("update set outside variable range")
    V = state.vectors.copy()
    cap = config.max_sweeps * max(1, upd.size)
    t_var = np.zeros(cap, dtype=np.int32)
    t_old = np.zeros((cap, config.k), dtype=np.float64)
    t_norm = np.zeros(cap, dtype=np.float64)
    t_skip = np.zeros(cap, dtype=np.bool_)
    steps = _mixing.mixing_forward(C.entries, V, upd, config.max_sweeps,
                                   config.convergence_tol, config.degenerate_tol,
                                   t_var, t_old, t_norm, t_skip)
    trace = MixingTrace(t_var[:steps].copy(), t_old[:steps].copy(),
                        t_norm[:steps].copy(), t_skip[:steps].copy(),
                        steps, steps // max(1, upd.size))
    return EmbeddingState(config.k, V), trace


def readout(state: EmbeddingState, var: int) -> float:
    """p(z_var = 1) from the angle between the variable and truth vectors."""
    if var == 0:
        raise ContractViolation("truth variable has no readout")
    return float(_mixing.readout_prob(state.vectors, var))


def predict(probabilities: Mapping[int, float], threshold: float) -> dict[int, int]:
    """Round probabilities; ties at the threshold go to 0."""
    if not 0.0 < threshold < 1.0:
        raise ContractViolation("threshold must lie in (0, 1)")
    return {v: (1 if p > threshold else 0) for v, p in probabilities.items()}


def bce_loss(probabilities: Sequence[float], labels: Sequence[int]) -> float:
    """Mean binary cross-entropy with probabilities clamped away from 0/1."""
    if len(probabilities) != len(labels):
        raise ContractViolation("probabilities and labels must align")
    p = np.clip(np.asarray(probabilities, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    y = np.asarray(labels, dtype=np.float64)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


def layer_backward(C: CMatrix, final_state: EmbeddingState, trace: MixingTrace,
                   dloss_dp: Mapping[int, float], sweep_cap: int | None = None) -> np.ndarray:
    """Gradient of the loss with respect to every off-diagonal C entry.

    Treats c_ij and c_ji as one parameter; the returned matrix is
    symmetric with a zero diagonal.  sweep_cap truncates the unroll to the
    last so-many sweeps; by default the whole trace is replayed.
    """
    V = final_state.vectors.copy()
    n1, k = V.shape
    dV = np.zeros((n1, k))
    for var, dldp in dloss_dp.items():
        t = float(np.dot(V[var], V[0]))
        if -1.0 < t < 1.0:
            dpdt = 1.0 / (math.pi * math.sqrt(1.0 - t * t))
            dV[var] += dldp * dpdt * V[0]
    dC = np.zeros((n1, n1))
    per_sweep = max(1, trace.steps // max(1, trace.sweeps))
    stop_at = 0 if sweep_cap is None else max(0, trace.steps - sweep_cap * per_sweep)
    _mixing.mixing_backward(C.entries, V, dV, trace.var, trace.old, trace.norm,
                            trace.skipped, trace.steps, stop_at, dC)
    return dC + dC.T


def iht_sparsify(C: CMatrix, epsilon: float) -> CMatrix:
    """Zero every entry with magnitude at most epsilon."""
    if epsilon < 0:
        raise ContractViolation("epsilon must be >= 0")
    e = C.entries.copy()
    e[np.abs(e) <= epsilon] = 0.0
    return CMatrix(C.n_d, C.n_a, e)


def iht_epsilon(C: CMatrix, fraction: float) -> float:
    """fraction times the mean magnitude of nonzero off-diagonal entries."""
    e = C.entries[np.nonzero(C.entries)]
    if e.size == 0:
        return 0.0
    return fraction * float(np.mean(np.abs(e)))


def sdp_objective(C: CMatrix, state: EmbeddingState) -> float:
    """<C, V^T V> with the stored zero diagonal."""
    V = state.vectors
    return float(np.sum(C.entries * (V @ V.T)))


@dataclass
class _Packed:
    """Dataset flattened for the kernels."""

    in_vars: list
    in_vals: list
    sup_vars: list
    sup_vals: list
    upd: list


def _pack(dataset: Dataset, n1: int) -> _Packed:
    p = _Packed([], [], [], [], [])
    for ex in dataset.examples:
        iv, ivals = _input_arrays(ex.input_vars)
        sv = np.array([v for v, _ in sorted(ex.output_vars)], dtype=np.int32)
        svals = np.array([b for _, b in sorted(ex.output_vars)], dtype=np.int8)
        p.in_vars.append(iv)
        p.in_vals.append(ivals)
        p.sup_vars.append(sv)
        p.sup_vals.append(svals)
        p.upd.append(_update_vars(n1, iv))
    return p


@dataclass(frozen=True)
class TrainResult:
    c: CMatrix
    metrics: tuple[EpochMetrics, ...]


def init_c(config: LayerConfig, seed: int) -> CMatrix:
    """Small random symmetric start so early solves are non-degenerate."""
    rng = np.random.default_rng(seed)
    n1 = config.n1
    raw = rng.normal(0.0, 1.0 / n1, size=(n1, n1))
    return CMatrix.from_raw(config.n_d, config.n_a, raw)


def train(dataset: Dataset, layer_config: LayerConfig, train_config: TrainConfig,
          log=None) -> TrainResult:
    """Adam on the off-diagonal entries of C over the dataset.

    The per-example gradient comes from unrolling the recorded descent
    sweeps; batch gradients are averaged.  When IHT is enabled, every
    epoch ends by zeroing entries below a fraction of the mean nonzero
    magnitude.
    """
    if len(dataset) == 0:
        raise ContractViolation("dataset must be nonempty")
    if dataset.n_d != layer_config.n_d:
        raise ContractViolation("dataset and layer disagree on defined variables")
    n1 = layer_config.n1
    k = layer_config.k
    packed = _pack(dataset, n1)
    C = init_c(layer_config, train_config.seed).entries.copy()
    m = np.zeros_like(C)
    v = np.zeros_like(C)
    t = 0
    shuffle_rng = np.random.default_rng(_splitmix64(train_config.seed ^ 0x5EED))
    max_upd = max(u.size for u in packed.upd)
    cap = layer_config.max_sweeps * max_upd
    t_var = np.zeros(cap, dtype=np.int32)
    t_old = np.zeros((cap, k), dtype=np.float64)
    t_norm = np.zeros(cap, dtype=np.float64)
    t_skip = np.zeros(cap, dtype=np.bool_)
    dC = np.zeros((n1, n1))
    metrics = []
    n = len(dataset)
    for epoch in range(1, train_config.epochs + 1):
        order = shuffle_rng.permutation(n)
        ep_loss = 0.0
        ep_bits = 0
        ep_bit_total = 0
        ep_inst = 0
        for start in range(0, n, train_config.batch_size):
            batch = order[start:start + train_config.batch_size]
            dC[:] = 0.0
            batch_loss = 0.0
            for idx in batch:
                seed = example_seed(train_config.seed, epoch, int(idx))
                loss, ncorr = _mixing.train_example(
                    C, k, packed.in_vars[idx], packed.in_vals[idx],
                    packed.sup_vars[idx], packed.sup_vals[idx], packed.upd[idx],
                    seed, layer_config.max_sweeps, layer_config.convergence_tol,
                    layer_config.degenerate_tol, PROB_EPS,
                    layer_config.rounding_threshold, train_config.backward_cap,
                    t_var, t_old, t_norm, t_skip, dC)
                batch_loss += loss
                nsup = packed.sup_vars[idx].size
                ep_bits += ncorr
                ep_bit_total += nsup
                ep_inst += 1 if ncorr == nsup else 0
            if not np.isfinite(batch_loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch starting {start}")
            ep_loss += batch_loss
            # per-pair parameter gradient, averaged over the batch
            grad = (dC + dC.T) / len(batch)
            t += 1
            m = train_config.adam_beta1 * m + (1 - train_config.adam_beta1) * grad
            v = train_config.adam_beta2 * v + (1 - train_config.adam_beta2) * grad * grad
            mhat = m / (1 - train_config.adam_beta1 ** t)
            vhat = v / (1 - train_config.adam_beta2 ** t)
            C -= train_config.learning_rate * mhat / (np.sqrt(vhat) + train_config.adam_eps)
            np.fill_diagonal(C, 0.0)
        if train_config.iht_enabled:
            cm = CMatrix(layer_config.n_d, layer_config.n_a, C.copy())
            C = iht_sparsify(cm, iht_epsilon(cm, train_config.iht_fraction)).entries.copy()
        em = EpochMetrics(epoch, ep_loss / n, ep_bits / max(1, ep_bit_total),
                          ep_inst / n)
        metrics.append(em)
        if log is not None:
            log(em)
    return TrainResult(CMatrix(layer_config.n_d, layer_config.n_a, C),
                       tuple(metrics))


@dataclass(frozen=True)
class EvalResult:
    bit_acc: float
    instance_acc: float
    probs: tuple[np.ndarray, ...]  # per example, probability per variable row


def evaluate(c: CMatrix, dataset: Dataset, layer_config: LayerConfig,
             seed: int = 0) -> EvalResult:
    """Forward-only accuracy of the layer on a dataset."""
    n1 = layer_config.n1
    packed = _pack(dataset, n1)
    bits = 0
    bit_total = 0
    inst = 0
    all_probs = []
    probs = np.zeros(n1)
    for idx in range(len(dataset)):
        s = example_seed(seed ^ 0xE7A1, 0, idx)
        _mixing.eval_example(c.entries, layer_config.k, packed.in_vars[idx],
                             packed.in_vals[idx], packed.upd[idx], s,
                             layer_config.max_sweeps, layer_config.convergence_tol,
                             layer_config.degenerate_tol, probs)
        all_probs.append(probs.copy())
        sv, svals = packed.sup_vars[idx], packed.sup_vals[idx]
        pred = probs[sv] > layer_config.rounding_threshold
        ncorr = int(np.sum(pred == (svals == 1)))
        bits += ncorr
        bit_total += sv.size
        inst += 1 if ncorr == sv.size else 0
    n = len(dataset)
    return EvalResult(bits / max(1, bit_total), inst / max(1, n), tuple(all_probs))


@dataclass(frozen=True)
class STrainResult:
    s: SMatrix
    metrics: tuple[EpochMetrics, ...]


def train_s(dataset: Dataset, layer_config: LayerConfig, train_config: TrainConfig,
            m: int, log=None) -> STrainResult:
    """Train the clause-style matrix directly (diagnostic variant).

    The forward pass runs on the Gram matrix of S with its diagonal
    dropped, so the chain rule gives dL/dS as S times the symmetric
    pairwise gradient.
    """
    if len(dataset) == 0:
        raise ContractViolation("dataset must be nonempty")
    n1 = layer_config.n1
    k = layer_config.k
    packed = _pack(dataset, n1)
    rng = np.random.default_rng(train_config.seed)
    S = rng.normal(0.0, 1.0 / math.sqrt(n1), size=(m, n1))
    ms = np.zeros_like(S)
    vs = np.zeros_like(S)
    t = 0
    shuffle_rng = np.random.default_rng(_splitmix64(train_config.seed ^ 0x5EED))
    max_upd = max(u.size for u in packed.upd)
    cap = layer_config.max_sweeps * max_upd
    t_var = np.zeros(cap, dtype=np.int32)
    t_old = np.zeros((cap, k), dtype=np.float64)
    t_norm = np.zeros(cap, dtype=np.float64)
    t_skip = np.zeros(cap, dtype=np.bool_)
    dC = np.zeros((n1, n1))
    metrics = []
    n = len(dataset)
    for epoch in range(1, train_config.epochs + 1):
        order = shuffle_rng.permutation(n)
        ep_loss = 0.0
        ep_bits = 0
        ep_bit_total = 0
        ep_inst = 0
        for start in range(0, n, train_config.batch_size):
            batch = order[start:start + train_config.batch_size]
            C = S.T @ S
            np.fill_diagonal(C, 0.0)
            C = np.ascontiguousarray(C)
            dC[:] = 0.0
            batch_loss = 0.0
            for idx in batch:
                seed = example_seed(train_config.seed, epoch, int(idx))
                loss, ncorr = _mixing.train_example(
                    C, k, packed.in_vars[idx], packed.in_vals[idx],
                    packed.sup_vars[idx], packed.sup_vals[idx], packed.upd[idx],
                    seed, layer_config.max_sweeps, layer_config.convergence_tol,
                    layer_config.degenerate_tol, PROB_EPS,
                    layer_config.rounding_threshold, train_config.backward_cap,
                    t_var, t_old, t_norm, t_skip, dC)
                batch_loss += loss
                nsup = packed.sup_vars[idx].size
                ep_bits += ncorr
                ep_bit_total += nsup
                ep_inst += 1 if ncorr == nsup else 0
            if not np.isfinite(batch_loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch starting {start}")
            ep_loss += batch_loss
            G = (dC + dC.T) / len(batch)
            grad = S @ G
            t += 1
            ms = train_config.adam_beta1 * ms + (1 - train_config.adam_beta1) * grad
            vs = train_config.adam_beta2 * vs + (1 - train_config.adam_beta2) * grad * grad
            mhat = ms / (1 - train_config.adam_beta1 ** t)
            vhat = vs / (1 - train_config.adam_beta2 ** t)
            S -= train_config.learning_rate * mhat / (np.sqrt(vhat) + train_config.adam_eps)
        em = EpochMetrics(epoch, ep_loss / n, ep_bits / max(1, ep_bit_total), ep_inst / n)
        metrics.append(em)
        if log is not None:
            log(em)
    return STrainResult(SMatrix(layer_config.n_d, layer_config.n_a, S), tuple(metrics))


def evaluate_s(s: SMatrix, dataset: Dataset, layer_config: LayerConfig,
               seed: int = 0) -> EvalResult:
    C = s.entries.T @ s.entries
    np.fill_diagonal(C, 0.0)
    cm = CMatrix(s.n_d, s.n_a, (C + C.T) / 2.0)
    return evaluate(cm, dataset, layer_config, seed)


def save_smatrix(s: SMatrix, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"s-matrix m={s.m} n_d={s.n_d} n_a={s.n_a}\n")
        for row in s.entries:
            fh.write(" ".join(repr(x) for x in row) + "\n")


def load_smatrix(path) -> SMatrix:
    with open(path) as fh:
        header = fh.readline().split()
        if not header or header[0] != "s-matrix":
            raise ContractViolation(f"not an s-matrix file: {path}")
        fields = dict(kv.split("=") for kv in header[1:])
        rows = [np.array(line.split(), dtype=np.float64) for line in fh if line.strip()]
    e = np.vstack(rows)
    assert e.shape[0] == int(fields["m"])
    return SMatrix(int(fields["n_d"]), int(fields["n_a"]), e)


# ---------------------------------------------------------------------------
# C matrix file format: header line, then one "i j value" per nonzero
# off-diagonal entry with i < j (0 denotes the truth row).


def save_cmatrix(c: CMatrix, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"c-matrix n_d={c.n_d} n_a={c.n_a}\n")
        n1 = c.n + 1
        for i in range(n1):
            for j in range(i + 1, n1):
                val = c.entries[i, j]
                if val != 0.0:
                    fh.write(f"{i} {j} {val!r}\n")


def load_cmatrix(path) -> CMatrix:
    with open(path) as fh:
        header = fh.readline().split()
        if not header or header[0] != "c-matrix":
            raise ContractViolation(f"not a c-matrix file: {path}")
        fields = dict(kv.split("=") for kv in header[1:])
        n_d, n_a = int(fields["n_d"]), int(fields["n_a"])
        n1 = n_d + n_a + 1
        e = np.zeros((n1, n1))
        for line in fh:
            i_s, j_s, v_s = line.split()
            i, j = int(i_s), int(j_s)
            e[i, j] = e[j, i] = float(v_s)
    return CMatrix(n_d, n_a, e)


def save_metrics(metrics: Iterable[EpochMetrics], path) -> None:
    with open(path, "w") as fh:
        for em in metrics:
            fh.write(f"epoch={em.epoch} loss={em.loss!r} "
                     f"bit_acc={em.bit_acc!r} instance_acc={em.instance_acc!r}\n")
