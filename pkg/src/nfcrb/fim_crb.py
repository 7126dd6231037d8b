"""Fisher information and Cramer-Rao bounds for joint (bearing, range) estimation.

The estimated parameter vector is ordered

    [bearing_1..bearing_N, range_1..range_N, cov-entry params (N^2), noise variance]

where the source-covariance entries are parameterized by N real diagonal
values followed, for each upper-triangle pair (p < q) in row-major order, by
the real part then the imaginary part.

Two routes to the information matrix are provided: the generic trace form
(one trace of R^-1 dR R^-1 dR per entry, scaled by the snapshot count), which
is the authoritative path, and a closed-form block assembly built from
index-selection matrices, kept as a cross-check that reports its per-block
deviation from the generic path.  Finite-difference oracles for the steering
and covariance derivatives back both.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import SingularCovarianceError, SingularGeometryError, ValidationError
from .geometry import Scenario, delay_matrix, sensor_positions, source_positions
from .signal_model import CovarianceSet, covariances, steering_matrix


@dataclass(frozen=True)
class ParameterIndex:
    """Bijective map between flat parameter indices and (block, position)."""

    n_sources: int

    def __post_init__(self) -> None:
        if self.n_sources < 0:
            raise ValidationError("source count must be nonnegative")

    @property
    def size(self) -> int:
        n = self.n_sources
        return 2 * n + n * n + 1

    @property
    def bearing(self) -> slice:
        return slice(0, self.n_sources)

    @property
    def range(self) -> slice:
        return slice(self.n_sources, 2 * self.n_sources)

    @property
    def cov_entries(self) -> slice:
        n = self.n_sources
        return slice(2 * n, 2 * n + n * n)

    @property
    def noise(self) -> int:
        return self.size - 1

    def upper_pairs(self) -> list[tuple[int, int]]:
        """Row-major upper-triangle pairs (p, q) with p < q, zero-based."""
        n = self.n_sources
        return [(p, q) for p in range(n) for q in range(p + 1, n)]

    def labels(self) -> list[str]:
        n = self.n_sources
        out = [f"bearing[{i}]" for i in range(n)]
        out += [f"range[{i}]" for i in range(n)]
        out += [f"cov_diag[{i}]" for i in range(n)]
        for p, q in self.upper_pairs():
            out += [f"cov_re[{p},{q}]", f"cov_im[{p},{q}]"]
        out.append("noise")
        return out

    def describe(self, i: int) -> tuple[str, tuple[int, ...]]:
        n = self.n_sources
        if not 0 <= i < self.size:
            raise ValidationError(f"parameter index {i} outside 0..{self.size - 1}")
        if i < n:
            return "bearing", (i,)
        if i < 2 * n:
            return "range", (i - n,)
        if i == self.noise:
            return "noise", ()
        j = i - 2 * n
        if j < n:
            return "cov_diag", (j,)
        p, q = self.upper_pairs()[(j - n) // 2]
        return ("cov_re", (p, q)) if (j - n) % 2 == 0 else ("cov_im", (p, q))

    def cov_entry_bases(self) -> list[np.ndarray]:
        """Hermitian basis matrices of the source-covariance parameterization."""
        n = self.n_sources
        bases = []
        for d in range(n):
            E = np.zeros((n, n), dtype=complex)
            E[d, d] = 1.0
            bases.append(E)
        for p, q in self.upper_pairs():
            E = np.zeros((n, n), dtype=complex)
            E[p, q] = 1.0
            E[q, p] = 1.0
            bases.append(E)
            E = np.zeros((n, n), dtype=complex)
            E[p, q] = 1j
            E[q, p] = -1j
            bases.append(E)
        return bases


@dataclass(frozen=True, eq=False)
class FimMatrix:
    """Real symmetric information matrix over a ParameterIndex ordering."""

    entries: np.ndarray
    snapshots: int
    index: ParameterIndex | None = None
    array_cov_condition: float = float("nan")


@dataclass(frozen=True, eq=False)
class CrbReport:
    """Diagonal Cramer-Rao bounds split into bearing (rad^2) and range (m^2) blocks."""

    crb_theta: np.ndarray
    crb_r: np.ndarray
    crb_theta_total: float
    crb_r_total: float
    condition_number: float
    rank: int
    size: int
    rank_deficient: bool


def _pair_distances(scenario: Scenario) -> np.ndarray:
    d = np.linalg.norm(
        source_positions(scenario)[None, :, :] - sensor_positions(scenario)[:, None, :], axis=2
    )
    if np.any(d <= 0):
        k, n = np.argwhere(d <= 0)[0]
        raise SingularGeometryError(f"sensor {k + 1} coincides with source {n + 1}")
    return d


def delay_gradients(scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """(M, N) partial derivatives of the delays w.r.t. each source's bearing and range.

    Differentiating the law-of-cosines distance gives
    d tau / d bearing = rho r sin(bearing - azimuth) / (c d) and
    d tau / d range = (r - rho cos(bearing - azimuth)) / (c d), with d the
    sensor-to-source distance.
    """
    rho = scenario.sensor_radii()[:, None]
    r = scenario.source_ranges()[None, :]
    diff = scenario.source_bearings()[None, :] - scenario.sensor_azimuths()[:, None]
    d = _pair_distances(scenario)
    c = scenario.velocity_mps
    dtau_bearing = rho * r * np.sin(diff) / (c * d)
    dtau_range = (r - rho * np.cos(diff)) / (c * d)
    return dtau_bearing, dtau_range


def _derivative_columns(scenario: Scenario) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Steering matrix plus per-source derivative columns stacked as (M, N) matrices."""
    A = steering_matrix(delay_matrix(scenario), scenario.frequencies())
    dtau_b, dtau_r = delay_gradients(scenario)
    w = 2.0 * np.pi * scenario.frequencies()[None, :]
    return A, -1j * w * dtau_b * A, -1j * w * dtau_r * A


def steering_derivatives(scenario: Scenario, axis: str) -> list[np.ndarray]:
    """Analytic steering derivatives, one (M, N) matrix per source.

    The matrix for source n is zero except in column n, which equals
    -j 2 pi f_n (d tau / d axis) A[:, n].
    """
    if axis not in ("bearing", "range"):
        raise ValidationError(f"axis must be 'bearing' or 'range', got {axis!r}")
    A, cols_b, cols_r = _derivative_columns(scenario)
    cols = cols_b if axis == "bearing" else cols_r
    out = []
    for n in range(scenario.num_sources):
        D = np.zeros_like(A)
        D[:, n] = cols[:, n]
        out.append(D)
    return out


def rx_derivatives(scenario: Scenario, A: np.ndarray, covset: CovarianceSet) -> list[np.ndarray]:
    """Hermitian derivatives of the array covariance, ordered per ParameterIndex."""
    index = ParameterIndex(scenario.num_sources)
    Rs = covset.source_cov
    Ah = A.conj().T
    out = []
    for axis in ("bearing", "range"):
        for D in steering_derivatives(scenario, axis):
            out.append(D @ Rs @ Ah + A @ Rs @ D.conj().T)
    for E in index.cov_entry_bases():
        out.append(A @ E @ Ah)
    out.append(np.eye(A.shape[0], dtype=complex))
    return out


def _index_for(derivs_len: int) -> ParameterIndex | None:
    n = int(round(np.sqrt(derivs_len))) - 1
    if n >= 0 and (n + 1) ** 2 == derivs_len:
        return ParameterIndex(n)
    return None


def fim_generic(array_cov: np.ndarray, derivs, snapshots: int) -> FimMatrix:
    """Information matrix from the trace form, scaled linearly by the snapshot count.

    Entry (a, b) is snapshots * Re tr(R^-1 dR_a R^-1 dR_b); symmetric and
    positive semidefinite by construction for Hermitian inputs.
    """
    if snapshots < 1:
        raise ValidationError(f"snapshot count must be >= 1, got {snapshots}")
    R = np.asarray(array_cov, dtype=complex)
    w = np.linalg.eigvalsh(R)
    if w[0] <= 0 or w[0] < 1e-15 * w[-1]:
        raise SingularCovarianceError(
            f"array covariance is numerically singular; smallest eigenvalue {w[0]:.6e}"
        )
    cond = float(w[-1] / w[0])
    Rinv = np.linalg.inv(R)
    half = [Rinv @ np.asarray(D, dtype=complex) for D in derivs]
    P = len(half)
    F = np.zeros((P, P))
    for a in range(P):
        for b in range(a, P):
            F[a, b] = F[b, a] = float(np.real(np.trace(half[a] @ half[b])))
    return FimMatrix(snapshots * F, int(snapshots), _index_for(P), cond)


def fim_for_scenario(scenario: Scenario) -> FimMatrix:
    """Convenience: steering, covariances, derivatives, and the generic information matrix."""
    A = steering_matrix(delay_matrix(scenario), scenario.frequencies())
    covset = covariances(A, scenario.signals, scenario.noise_variance)
    return fim_generic(covset.array_cov, rx_derivatives(scenario, A, covset), scenario.snapshots)


@dataclass(frozen=True, eq=False)
class SelectionMatrices:
    """Index-built selection machinery for the closed-form blocks.

    All matrices act on column-major vectorizations of N x N matrices.  Index
    vectors are one-based positions into such vectorizations:

    * ``strict_lower_idx`` / ``mirror_upper_idx``: strictly-lower entries in
      column-major order and, pairwise, their mirrored upper entries;
    * ``lower_diag_idx``: lower-triangle-with-diagonal entries, column-major;
    * ``diag_idx``: the diagonal entries;
    * ``*_rows``: the matching output row numbers (1..count).

    ``fold_add`` / ``fold_sub`` write the sum / difference of mirrored entries
    into the lower slots; ``lower_selector`` / ``strict_lower_selector`` keep
    only those slots.  ``sym_fold`` and ``skew_fold`` compose them (the skew
    fold carries a -j factor, making it complex), and ``hermitian_to_real``
    stacks both so a vectorized Hermitian matrix maps to the real listing
    [diagonals and doubled real parts; doubled negated imaginary parts].
    ``diag_selector`` extracts the diagonal of a vectorized matrix.
    """

    hermitian_to_real: np.ndarray
    diag_selector: np.ndarray
    sym_fold: np.ndarray
    skew_fold: np.ndarray
    fold_add: np.ndarray
    fold_sub: np.ndarray
    lower_selector: np.ndarray
    strict_lower_selector: np.ndarray
    strict_lower_idx: np.ndarray
    strict_lower_rows: np.ndarray
    mirror_upper_idx: np.ndarray
    lower_diag_idx: np.ndarray
    lower_diag_rows: np.ndarray
    diag_idx: np.ndarray
    diag_rows: np.ndarray


def _ones_at(rows, cols, shape) -> np.ndarray:
    out = np.zeros(shape)
    out[np.asarray(rows, dtype=int), np.asarray(cols, dtype=int)] = 1.0
    return out


def selection_matrices(n_sources: int) -> SelectionMatrices:
    """Build the selection matrices and index vectors for N sources."""
    N = n_sources
    if N < 1:
        raise ValidationError(f"source count must be >= 1, got {N}")
    n2 = N * N
    # zero-based column-major position of entry (row, col) is col * N + row
    strict_lower = [p * N + q for p in range(N) for q in range(p + 1, N)]
    mirror_upper = [q * N + p for p in range(N) for q in range(p + 1, N)]
    lower_diag = [p * N + q for p in range(N) for q in range(p, N)]
    diag = [p * N + p for p in range(N)]

    fold_add = np.eye(n2) + _ones_at(strict_lower, mirror_upper, (n2, n2))
    fold_sub = np.eye(n2) - _ones_at(strict_lower, mirror_upper, (n2, n2))
    lower_selector = _ones_at(range(len(lower_diag)), lower_diag, (len(lower_diag), n2))
    strict_lower_selector = _ones_at(
        range(len(strict_lower)), strict_lower, (len(strict_lower), n2)
    )
    sym_fold = lower_selector @ fold_add
    skew_fold = -1j * (strict_lower_selector @ fold_sub)
    hermitian_to_real = np.vstack([sym_fold.astype(complex), skew_fold])
    diag_selector = _ones_at(range(N), diag, (N, n2))

    def one_based(seq) -> np.ndarray:
        return np.asarray(seq, dtype=int) + 1

    return SelectionMatrices(
        hermitian_to_real=hermitian_to_real,
        diag_selector=diag_selector,
        sym_fold=sym_fold,
        skew_fold=skew_fold,
        fold_add=fold_add,
        fold_sub=fold_sub,
        lower_selector=lower_selector,
        strict_lower_selector=strict_lower_selector,
        strict_lower_idx=one_based(strict_lower),
        strict_lower_rows=one_based(range(len(strict_lower))),
        mirror_upper_idx=one_based(mirror_upper),
        lower_diag_idx=one_based(lower_diag),
        lower_diag_rows=one_based(range(len(lower_diag))),
        diag_idx=one_based(diag),
        diag_rows=one_based(range(N)),
    )


def _folded_basis_alignment(n_sources: int) -> np.ndarray:
    """Signed permutation from the folded real parameterization to ParameterIndex order.

    The folded listing interleaves diagonals among doubled real parts in
    column-major lower-triangle order and then carries negated imaginary
    parts; ParameterIndex wants diagonals first and (re, im) per upper pair.
    Returns S with S[index_pos, folded_pos] = +/-1 so that
    F_index = S F_folded S^T.
    """
    N = n_sources
    n2 = N * N

    def pair_offset(p: int, q: int) -> int:
        return p * (2 * N - p - 1) // 2 + (q - p - 1)

    S = np.zeros((n2, n2))
    w = 0
    for p in range(N):
        for q in range(p, N):
            if q == p:
                S[p, w] = 1.0
            else:
                S[N + 2 * pair_offset(p, q), w] = 1.0
            w += 1
    for p in range(N):
        for q in range(p + 1, N):
            S[N + 2 * pair_offset(p, q) + 1, w] = -1.0
            w += 1
    return S


def _vec(M: np.ndarray) -> np.ndarray:
    return M.flatten(order="F")


def fim_closed_form(
    scenario: Scenario, A: np.ndarray, covset: CovarianceSet, snapshots: int
) -> tuple[FimMatrix, dict[str, float]]:
    """Block-assembled information matrix plus per-block deviation from the generic path.

    The bearing/range blocks combine Hadamard products of source-covariance
    and derivative cross terms; blocks coupled to the covariance-entry
    parameters go through the selection matrices and are then realigned to the
    ParameterIndex ordering.  The generic trace form remains authoritative:
    the returned dict reports max |closed - generic| per block, relative to
    the block magnitude floored at 1e-6 of the whole matrix so that blocks
    that are numerically zero report their absolute noise instead of 0/0.
    """
    N = scenario.num_sources
    index = ParameterIndex(N)
    Rs = covset.source_cov
    R = covset.array_cov
    w = np.linalg.eigvalsh(R)
    if w[0] <= 0 or w[0] < 1e-15 * w[-1]:
        raise SingularCovarianceError(
            f"array covariance is numerically singular; smallest eigenvalue {w[0]:.6e}"
        )
    Rinv = np.linalg.inv(R)
    Rinv2 = Rinv @ Rinv
    _, cols_b, cols_r = _derivative_columns(scenario)
    cols = {"bearing": cols_b, "range": cols_r}
    Ah = A.conj().T

    gram = Ah @ Rinv @ A                      # N x N
    phi = Rs @ gram @ Rs
    U = {ax: Rs @ Ah @ Rinv @ cols[ax] for ax in cols}

    def block_axes(alpha: str, beta: str) -> np.ndarray:
        psi = cols[beta].conj().T @ Rinv @ cols[alpha]
        return 2.0 * snapshots * np.real(U[beta] * U[alpha].T + phi * psi.T)

    sel = selection_matrices(N)
    fold_h = sel.hermitian_to_real.conj().T
    align = _folded_basis_alignment(N)

    def block_axis_cov(alpha: str) -> np.ndarray:
        kron = np.kron((gram @ Rs).T, cols[alpha].conj().T @ Rinv @ A)
        folded = 2.0 * snapshots * np.real(sel.diag_selector @ kron @ fold_h)
        return folded @ align.T

    def block_axis_noise(alpha: str) -> np.ndarray:
        return 2.0 * snapshots * np.real(np.diag(Rs @ Ah @ Rinv2 @ cols[alpha]))

    cov_cov = snapshots * np.real(
        sel.hermitian_to_real @ np.kron(gram.conj(), gram) @ fold_h
    )
    cov_cov = align @ cov_cov @ align.T
    cov_noise = align @ (snapshots * np.real(sel.hermitian_to_real @ _vec(Ah @ Rinv2 @ A)))
    noise_noise = snapshots * float(np.real(np.trace(Rinv2)))

    F = np.zeros((index.size, index.size))
    sb, sr, sm = index.bearing, index.range, index.cov_entries
    iv = index.noise
    F[sb, sb] = block_axes("bearing", "bearing")
    F[sb, sr] = block_axes("bearing", "range")
    F[sr, sb] = F[sb, sr].T
    F[sr, sr] = block_axes("range", "range")
    F[sb, sm] = block_axis_cov("bearing")
    F[sm, sb] = F[sb, sm].T
    F[sr, sm] = block_axis_cov("range")
    F[sm, sr] = F[sr, sm].T
    F[sb, iv] = block_axis_noise("bearing")
    F[iv, sb] = F[sb, iv]
    F[sr, iv] = block_axis_noise("range")
    F[iv, sr] = F[sr, iv]
    F[sm, sm] = cov_cov
    F[sm, iv] = cov_noise
    F[iv, sm] = cov_noise
    F[iv, iv] = noise_noise
    F = 0.5 * (F + F.T)

    generic = fim_generic(R, rx_derivatives(scenario, A, covset), snapshots)
    G = generic.entries
    blocks = {
        "bearing-bearing": (sb, sb),
        "bearing-range": (sb, sr),
        "range-range": (sr, sr),
        "bearing-cov": (sb, sm),
        "range-cov": (sr, sm),
        "bearing-noise": (sb, iv),
        "range-noise": (sr, iv),
        "cov-cov": (sm, sm),
        "cov-noise": (sm, iv),
        "noise-noise": (iv, iv),
    }
    deviations = {}
    overall = float(np.abs(G).max())
    for name, (ra, ca) in blocks.items():
        gb = np.atleast_2d(G[ra, ca])
        cb = np.atleast_2d(F[ra, ca])
        scale = max(float(np.abs(gb).max()), 1e-6 * overall, 1e-300)
        deviations[name] = float(np.abs(cb - gb).max() / scale)

    return FimMatrix(F, int(snapshots), index, generic.array_cov_condition), deviations


def crb_from_fim(fim: FimMatrix, n_sources: int | None = None) -> CrbReport:
    """Diagonal bounds from the pseudo-inverse of the information matrix.

    Rank deficiency (singular values below 1e-12 of the largest) is flagged,
    not raised; the pseudo-inverse is used either way.  Totals are the sums of
    the per-source diagonal entries of each block.
    """
    F = np.asarray(fim.entries, dtype=float)
    if F.ndim != 2 or F.shape[0] != F.shape[1]:
        raise ValidationError(f"information matrix must be square, got {F.shape}")
    if fim.index is not None:
        n = fim.index.n_sources
    elif n_sources is not None:
        n = int(n_sources)
    else:
        raise ValidationError("source count is needed to split the diagonal into blocks")
    if 2 * n > F.shape[0]:
        raise ValidationError(f"{n} sources do not fit a {F.shape[0]}-parameter matrix")
    sv = np.linalg.svd(F, compute_uv=False)
    tol = 1e-12 * sv[0] if sv.size else 0.0
    rank = int(np.sum(sv > tol))
    deficient = rank < F.shape[0]
    cond = float(sv[0] / sv[-1]) if not deficient and sv.size else float("inf")
    diag = np.diag(np.linalg.pinv(F, rtol=1e-12))
    crb_theta = diag[:n].copy()
    crb_r = diag[n : 2 * n].copy()
    return CrbReport(
        crb_theta=crb_theta,
        crb_r=crb_r,
        crb_theta_total=float(crb_theta.sum()),
        crb_r_total=float(crb_r.sum()),
        condition_number=cond,
        rank=rank,
        size=int(F.shape[0]),
        rank_deficient=deficient,
    )


def steering_derivatives_fd(
    scenario: Scenario, axis: str, rel_step: float = 1e-6
) -> list[np.ndarray]:
    """Central finite differences of the steering matrix, one (M, N) matrix per source.

    Steps are 1e-6 radians for bearings and 1e-6 of each range for ranges.
    """
    if axis not in ("bearing", "range"):
        raise ValidationError(f"axis must be 'bearing' or 'range', got {axis!r}")
    freqs = scenario.frequencies()

    def steering_at(sources) -> np.ndarray:
        scn = replace(scenario, sources=tuple(sources))
        return steering_matrix(delay_matrix(scn), freqs)

    out = []
    for n, src in enumerate(scenario.sources):
        if axis == "bearing":
            h = rel_step
            hi = replace(src, bearing_rad=src.bearing_rad + h)
            lo = replace(src, bearing_rad=src.bearing_rad - h)
        else:
            h = rel_step * src.range_m
            hi = replace(src, range_m=src.range_m + h)
            lo = replace(src, range_m=src.range_m - h)
        sources_hi = list(scenario.sources)
        sources_lo = list(scenario.sources)
        sources_hi[n] = hi
        sources_lo[n] = lo
        out.append((steering_at(sources_hi) - steering_at(sources_lo)) / (2.0 * h))
    return out


def rx_derivatives_fd(scenario: Scenario, rel_step: float = 1e-6) -> list[np.ndarray]:
    """Central finite differences of the array covariance over the full parameter vector."""
    index = ParameterIndex(scenario.num_sources)
    freqs = scenario.frequencies()
    s = scenario.amplitudes()
    base_rs = np.outer(s, s.conj())

    def rx_at(sources, rs_shift, eta) -> np.ndarray:
        scn = replace(scenario, sources=tuple(sources))
        A = steering_matrix(delay_matrix(scn), freqs)
        return A @ (base_rs + rs_shift) @ A.conj().T + eta * np.eye(scenario.num_sensors)

    eta0 = scenario.noise_variance
    zero = np.zeros_like(base_rs)
    out = []
    for axis in ("bearing", "range"):
        for n, src in enumerate(scenario.sources):
            if axis == "bearing":
                h = rel_step
                hi = replace(src, bearing_rad=src.bearing_rad + h)
                lo = replace(src, bearing_rad=src.bearing_rad - h)
            else:
                h = rel_step * src.range_m
                hi = replace(src, range_m=src.range_m + h)
                lo = replace(src, range_m=src.range_m - h)
            sources_hi = list(scenario.sources)
            sources_lo = list(scenario.sources)
            sources_hi[n] = hi
            sources_lo[n] = lo
            out.append(
                (rx_at(sources_hi, zero, eta0) - rx_at(sources_lo, zero, eta0)) / (2.0 * h)
            )
    scale = max(float(np.abs(s).max()) ** 2, 1.0)
    for E in index.cov_entry_bases():
        h = rel_step * scale
        out.append(
            (rx_at(scenario.sources, h * E, eta0) - rx_at(scenario.sources, -h * E, eta0))
            / (2.0 * h)
        )
    h = rel_step * eta0
    out.append(
        (rx_at(scenario.sources, zero, eta0 + h) - rx_at(scenario.sources, zero, eta0 - h))
        / (2.0 * h)
    )
    return out
