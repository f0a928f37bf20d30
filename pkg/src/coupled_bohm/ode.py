"""Adaptive explicit Runge-Kutta integration with dense output.

The method is the Dormand-Prince order-8 pair with Hairer's combined
5th/3rd-order error estimator (local error estimate scaling as h^8, i.e. an
8(7) pair in practice) and a 7th-order continuous extension using three extra
stages per step. Coefficients are the published DOP853 constants.

Two drivers share the tableau: :func:`solve` integrates one system and keeps
every step for dense evaluation; :func:`solve_batch` advances many
independent systems side by side, each lane with its own step size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import GuardTriggered, StepUnderflow

N_STAGES = 12
N_STAGES_EXTENDED = 16
INTERPOLATOR_POWER = 7

C = np.array([
    0.0,
    0.526001519587677318785587544488e-01,
    0.789002279381515978178381316732e-01,
    0.118350341907227396726757197510,
    0.281649658092772603273242802490,
    0.333333333333333333333333333333,
    0.25,
    0.307692307692307692307692307692,
    0.651282051282051282051282051282,
    0.6,
    0.857142857142857142857142857142,
    1.0,
    1.0,
    0.1,
    0.2,
    0.777777777777777777777777777778,
])

A = np.zeros((N_STAGES_EXTENDED, N_STAGES_EXTENDED))
A[1, 0] = 5.26001519587677318785587544488e-2
A[2, :2] = [1.97250569845378994544595329183e-2, 5.91751709536136983633785987549e-2]
A[3, [0, 2]] = [2.95875854768068491816892993775e-2, 8.87627564304205475450678981324e-2]
A[4, [0, 2, 3]] = [
    2.41365134159266685502369798665e-1,
    -8.84549479328286085344864962717e-1,
    9.24834003261792003115737966543e-1,
]
A[5, [0, 3, 4]] = [
    3.7037037037037037037037037037e-2,
    1.70828608729473871279604482173e-1,
    1.25467687566822425016691814123e-1,
]
A[6, [0, 3, 4, 5]] = [
    3.7109375e-2,
    1.70252211019544039314978060272e-1,
    6.02165389804559606850219397283e-2,
    -1.7578125e-2,
]
A[7, [0, 3, 4, 5, 6]] = [
    3.70920001185047927108779319836e-2,
    1.70383925712239993810214054705e-1,
    1.07262030446373284651809199168e-1,
    -1.53194377486244017527936158236e-2,
    8.27378916381402288758473766002e-3,
]
A[8, [0, 3, 4, 5, 6, 7]] = [
    6.24110958716075717114429577812e-1,
    -3.36089262944694129406857109825,
    -8.68219346841726006818189891453e-1,
    2.75920996994467083049415600797e1,
    2.01540675504778934086186788979e1,
    -4.34898841810699588477366255144e1,
]
A[9, [0, 3, 4, 5, 6, 7, 8]] = [
    4.77662536438264365890433908527e-1,
    -2.48811461997166764192642586468,
    -5.90290826836842996371446475743e-1,
    2.12300514481811942347288949897e1,
    1.52792336328824235832596922938e1,
    -3.32882109689848629194453265587e1,
    -2.03312017085086261358222928593e-2,
]
A[10, [0, 3, 4, 5, 6, 7, 8, 9]] = [
    -9.3714243008598732571704021658e-1,
    5.18637242884406370830023853209,
    1.09143734899672957818500254654,
    -8.14978701074692612513997267357,
    -1.85200656599969598641566180701e1,
    2.27394870993505042818970056734e1,
    2.49360555267965238987089396762,
    -3.0467644718982195003823669022,
]
A[11, [0, 3, 4, 5, 6, 7, 8, 9, 10]] = [
    2.27331014751653820792359768449,
    -1.05344954667372501984066689879e1,
    -2.00087205822486249909675718444,
    -1.79589318631187989172765950534e1,
    2.79488845294199600508499808837e1,
    -2.85899827713502369474065508674,
    -8.87285693353062954433549289258,
    1.23605671757943030647266201528e1,
    6.43392746015763530355970484046e-1,
]
A[12, [0, 5, 6, 7, 8, 9, 10, 11]] = [
    5.42937341165687622380535766363e-2,
    4.45031289275240888144113950566,
    1.89151789931450038304281599044,
    -5.8012039600105847814672114227,
    3.1116436695781989440891606237e-1,
    -1.52160949662516078556178806805e-1,
    2.01365400804030348374776537501e-1,
    4.47106157277725905176885569043e-2,
]
A[13, [0, 6, 7, 8, 9, 10, 11, 12]] = [
    5.61675022830479523392909219681e-2,
    2.53500210216624811088794765333e-1,
    -2.46239037470802489917441475441e-1,
    -1.24191423263816360469010140626e-1,
    1.5329179827876569731206322685e-1,
    8.20105229563468988491666602057e-3,
    7.56789766054569976138603589584e-3,
    -8.298e-3,
]
A[14, [0, 5, 6, 7, 10, 11, 12, 13]] = [
    3.18346481635021405060768473261e-2,
    2.83009096723667755288322961402e-2,
    5.35419883074385676223797384372e-2,
    -5.49237485713909884646569340306e-2,
    -1.08347328697249322858509316994e-4,
    3.82571090835658412954920192323e-4,
    -3.40465008687404560802977114492e-4,
    1.41312443674632500278074618366e-1,
]
A[15, [0, 5, 6, 7, 8, 12, 13, 14]] = [
    -4.28896301583791923408573538692e-1,
    -4.69762141536116384314449447206,
    7.68342119606259904184240953878,
    4.06898981839711007970213554331,
    3.56727187455281109270669543021e-1,
    -1.39902416515901462129418009734e-3,
    2.9475147891527723389556272149,
    -9.15095847217987001081870187138,
]

#: Propagating weights (the order-8 solution) live in row 12 of the extended tableau.
B = A[N_STAGES, :N_STAGES].copy()

E3 = np.zeros(N_STAGES + 1)
E3[:-1] = B
E3[[0, 8, 11]] -= [
    0.244094488188976377952755905512,
    0.733846688281611857341361741547,
    0.220588235294117647058823529412e-1,
]

E5 = np.zeros(N_STAGES + 1)
E5[[0, 5, 6, 7, 8, 9, 10, 11]] = [
    0.1312004499419488073250102996e-1,
    -0.1225156446376204440720569753e1,
    -0.4957589496572501915214079952,
    0.1664377182454986536961530415e1,
    -0.3503288487499736816886487290,
    0.3341791187130174790297318841,
    0.8192320648511571246570742613e-1,
    -0.2235530786388629525884427845e-1,
]

D = np.zeros((INTERPOLATOR_POWER - 3, N_STAGES_EXTENDED))
_D_COLS = [0, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15]
D[0, _D_COLS] = [
    -0.84289382761090128651353491142e1, 0.56671495351937776962531783590,
    -0.30689499459498916912797304727e1, 0.23846676565120698287728149680e1,
    0.21170345824450282767155149946e1, -0.87139158377797299206789907490,
    0.22404374302607882758541771650e1, 0.63157877876946881815570249290,
    -0.88990336451333310820698117400e-1, 0.18148505520854727256656404962e2,
    -0.91946323924783554000451984436e1, -0.44360363875948939664310572000e1,
]
D[1, _D_COLS] = [
    0.10427508642579134603413151009e2, 0.24228349177525818288430175319e3,
    0.16520045171727028198505394887e3, -0.37454675472269020279518312152e3,
    -0.22113666853125306036270938578e2, 0.77334326684722638389603898808e1,
    -0.30674084731089398182061213626e2, -0.93321305264302278729567221706e1,
    0.15697238121770843886131091075e2, -0.31139403219565177677282850411e2,
    -0.93529243588444783865713862664e1, 0.35816841486394083752465898540e2,
]
D[2, _D_COLS] = [
    0.19985053242002433820987653617e2, -0.38703730874935176555105901742e3,
    -0.18917813819516756882830838328e3, 0.52780815920542364900561016686e3,
    -0.11573902539959630126141871134e2, 0.68812326946963000169666922661e1,
    -0.10006050966910838403183860980e1, 0.77771377980534432092869265740,
    -0.27782057523535084065932004339e1, -0.60196695231264120758267380846e2,
    0.84320405506677161018159903784e2, 0.11992291136182789328035130030e2,
]
D[3, _D_COLS] = [
    -0.25693933462703749003312586129e2, -0.15418974869023643374053993627e3,
    -0.23152937917604549567536039109e3, 0.35763911791061412378285349910e3,
    0.93405324183624310003907691704e2, -0.37458323136451633156875139351e2,
    0.10409964950896230045147246184e3, 0.29840293426660503123344363579e2,
    -0.43533456590011143754432175058e2, 0.96324553959188282948394950600e2,
    -0.39177261675615439165231486172e2, -0.14972683625798562581422125276e3,
]

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
PI_BETA = 0.04
PI_ALPHA = 1.0 / 8.0 - 0.2 * PI_BETA
REJECT_FACTOR = 0.2


# -- order conditions ------------------------------------------------------------


def rooted_trees(order: int):
    """All rooted trees with ``order`` vertices, each a sorted tuple of child subtrees."""
    return _trees(order)


_TREE_CACHE: dict[int, list] = {}


def _trees(n):
    if n in _TREE_CACHE:
        return _TREE_CACHE[n]
    if n == 1:
        out = [()]
    else:
        out = sorted(set(_forests(n - 1, n - 1)))
    _TREE_CACHE[n] = out
    return out


def _forests(total, max_part):
    """Multisets of trees with ``total`` vertices; parts in non-increasing size order."""
    if total == 0:
        return [()]
    result = []
    for size in range(min(total, max_part), 0, -1):
        for tree in _trees(size):
            for rest in _forests(total - size, size):
                result.append(tuple(sorted((tree,) + rest)))
    return result


def _tree_size(tree):
    return 1 + sum(_tree_size(child) for child in tree)


def _gamma(tree):
    return _tree_size(tree) * math.prod(_gamma(child) for child in tree)


def _phi(tree, a):
    out = np.ones(a.shape[0])
    for child in tree:
        out = out * (a @ _phi(child, a))
    return out


def order_condition_residuals(max_order: int, a=None, b=None):
    """``sum(b * Phi(t)) - 1/gamma(t)`` for every rooted tree up to ``max_order``.

    Defaults to the propagating weights of the embedded tableau.
    """
    a = A[:N_STAGES, :N_STAGES] if a is None else a
    b = B if b is None else b
    res = []
    for order in range(1, max_order + 1):
        for tree in rooted_trees(order):
            res.append(float(b @ _phi(tree, a)) - 1.0 / _gamma(tree))
    return np.array(res)


def dense_weights(theta: float):
    """Stage weights ``b(theta)`` of the continuous extension: ``y(t0+theta h) = y0 + h*sum(b_i k_i)``.

    Derived from the interpolant in terms of the 16 extended stages (stage 12 is
    ``f(t0+h, y1)``), so the order conditions of the interpolant can be checked.
    """
    x = theta
    b1 = np.zeros(N_STAGES_EXTENDED)
    b1[:N_STAGES] = B
    e0 = np.zeros(N_STAGES_EXTENDED)
    e0[0] = 1.0
    e12 = np.zeros(N_STAGES_EXTENDED)
    e12[12] = 1.0
    # F rows in units of h: delta, f0 - delta, 2 delta - f0 - f1, D0..D3
    rows = [b1, e0 - b1, 2 * b1 - e0 - e12] + list(D)
    acc = np.zeros(N_STAGES_EXTENDED)
    for i, row in enumerate(reversed(rows)):
        acc = acc + row
        acc = acc * (x if i % 2 == 0 else 1.0 - x)
    return acc


# -- single-system driver --------------------------------------------------------


@dataclass
class OdeProblem:
    rhs: Callable
    t_span: tuple
    y0: np.ndarray

    def __post_init__(self):
        self.y0 = np.atleast_1d(np.asarray(self.y0, dtype=float)).copy()
        t0, t1 = self.t_span
        if not t1 > t0:
            raise ValueError("t_span must satisfy t1 > t0")
        if self.y0.ndim != 1 or self.y0.size < 1:
            raise ValueError("y0 must be a non-empty vector")

    @property
    def dimension(self) -> int:
        return self.y0.size


@dataclass
class StepRecord:
    t_start: float
    t_end: float
    y_start: np.ndarray
    y_end: np.ndarray
    coeffs: np.ndarray | None
    error: float

    def __call__(self, t):
        """Evaluate the step interpolant; exact at both step ends."""
        if self.coeffs is None:
            raise ValueError("step was integrated without dense output")
        x = (np.asarray(t, dtype=float) - self.t_start) / (self.t_end - self.t_start)
        y = np.zeros(np.shape(x) + self.y_start.shape)
        xx = np.expand_dims(x, -1)
        for i, f in enumerate(self.coeffs[::-1]):
            y = y + f
            y = y * (xx if i % 2 == 0 else 1.0 - xx)
        return y + self.y_start


@dataclass
class OdeSolution:
    steps: list = field(default_factory=list)
    t: np.ndarray | None = None
    y: np.ndarray | None = None
    nfev: int = 0
    n_accepted: int = 0
    n_rejected: int = 0
    status: str = "running"
    message: str = ""

    def __call__(self, t):
        """Dense evaluation at scalar or array ``t`` inside the integrated span."""
        t = np.asarray(t, dtype=float)
        ends = np.array([s.t_end for s in self.steps])
        lo, hi = self.t[0], self.t[-1]
        tol = 1e-12 * max(1.0, abs(hi))
        if np.any(t < lo - tol) or np.any(t > hi + tol):
            raise ValueError(f"t outside integrated span [{lo}, {hi}]")
        flat = np.atleast_1d(t)
        idx = np.clip(np.searchsorted(ends, flat, side="left"), 0, len(self.steps) - 1)
        out = np.empty((flat.size, self.y.shape[1]))
        for k in np.unique(idx):
            sel = idx == k
            out[sel] = self.steps[k](flat[sel])
        return out[0] if t.ndim == 0 else out.reshape(t.shape + (self.y.shape[1],))

    @property
    def stats(self) -> dict:
        return {"steps": self.n_accepted, "rejected": self.n_rejected, "nfev": self.nfev}


def _error_norm(k, h, scale):
    err5 = (k.T @ E5) / scale
    err3 = (k.T @ E3) / scale
    n5 = float(err5 @ err5)
    n3 = float(err3 @ err3)
    if n5 == 0.0 and n3 == 0.0:
        return 0.0
    return abs(h) * n5 / math.sqrt((n5 + 0.01 * n3) * scale.size)


def _initial_step(rhs, t0, y0, f0, rtol, atol, span):
    scale = atol + rtol * np.abs(y0)
    d0 = np.linalg.norm(y0 / scale) / math.sqrt(y0.size)
    d1 = np.linalg.norm(f0 / scale) / math.sqrt(y0.size)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = y0 + h0 * f0
    f1 = np.asarray(rhs(t0 + h0, y1), dtype=float)
    d2 = np.linalg.norm((f1 - f0) / scale) / math.sqrt(y0.size) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 8.0)
    return min(100 * h0, h1, span)


def _stages(rhs, t, y, h, f0, guard, k):
    """Fill ``k[0:13]``; return the order-8 trial state, or None if a guard/finite check fails."""
    k[0] = f0
    for s in range(1, N_STAGES):
        ys = y + h * (k[:s].T @ A[s, :s])
        ts = t + C[s] * h
        if guard is not None and not guard(ts, ys):
            return None
        k[s] = rhs(ts, ys)
        if not np.all(np.isfinite(k[s])):
            return None
    y_new = y + h * (k[:N_STAGES].T @ B)
    if guard is not None and not guard(t + h, y_new):
        return None
    k[N_STAGES] = rhs(t + h, y_new)
    if not np.all(np.isfinite(k[N_STAGES])):
        return None
    return y_new


def _dense_coeffs(rhs, t, y, y_new, h, k):
    for s in range(N_STAGES + 1, N_STAGES_EXTENDED):
        k[s] = rhs(t + C[s] * h, y + h * (k[:s].T @ A[s, :s]))
    delta = y_new - y
    F = np.empty((INTERPOLATOR_POWER, y.size))
    F[0] = delta
    F[1] = h * k[0] - delta
    F[2] = 2 * delta - h * (k[N_STAGES] + k[0])
    F[3:] = h * (D @ k)
    return F


def solve(
    problem: OdeProblem,
    rtol=1e-9,
    atol=1e-12,
    guard=None,
    dense=True,
    first_step=None,
    max_step=math.inf,
    max_steps=1_000_000,
) -> OdeSolution:
    """Integrate ``problem`` across its ``t_span``.

    ``guard(t, y) -> bool`` is evaluated at every stage and trial state; a
    ``False`` rejects the step and shrinks it. If the step then underflows,
    :class:`GuardTriggered` is raised carrying the last accepted time/state
    (and the partial solution on ``.solution``).
    """
    if not (rtol > 0 and atol > 0):
        raise ValueError("rtol and atol must be positive")
    rhs = problem.rhs
    t0, t1 = map(float, problem.t_span)
    y = problem.y0.copy()
    f = np.asarray(rhs(t0, y), dtype=float)
    if not np.all(np.isfinite(f)):
        raise ValueError("right-hand side is not finite at the initial point")
    sol = OdeSolution(nfev=1)
    ts, ys = [t0], [y.copy()]
    h = first_step if first_step is not None else _initial_step(rhs, t0, y, f, rtol, atol, t1 - t0)
    if first_step is None:
        sol.nfev += 1
    h = min(h, max_step)
    t = t0
    err_prev = 1e-4
    k = np.empty((N_STAGES_EXTENDED, y.size))
    guard_hit = False
    while t < t1:
        if sol.n_accepted >= max_steps:
            sol.status = "failed"
            sol.message = "maximum number of steps exceeded"
            break
        h = min(h, max_step, t1 - t)
        if t + h == t or h < 4 * np.spacing(t):
            sol.status = "failed"
            sol.t, sol.y = np.array(ts), np.array(ys)
            if guard_hit:
                exc = GuardTriggered(f"guard rejected every step near t={t}", t=t, state=y.copy())
            else:
                exc = StepUnderflow(f"step size underflow at t={t}", t=t, state=y.copy())
            exc.solution = sol
            raise exc
        y_new = _stages(rhs, t, y, h, f, guard, k)
        sol.nfev += N_STAGES
        if y_new is None:
            guard_hit = True
            sol.n_rejected += 1
            h *= REJECT_FACTOR
            continue
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = _error_norm(k[: N_STAGES + 1], h, scale)
        if err <= 1.0:
            # snap to the end when rounding would leave a sliver of a few ulps
            t_new = t1 if t1 - (t + h) <= 4 * np.spacing(t1) else t + h
            coeffs = _dense_coeffs(rhs, t, y, y_new, h, k) if dense else None
            if dense:
                sol.nfev += N_STAGES_EXTENDED - N_STAGES - 1
            sol.steps.append(StepRecord(t, t_new, y.copy(), y_new.copy(), coeffs, err))
            fac = err**PI_ALPHA / err_prev**PI_BETA / SAFETY if err > 0 else 1.0 / MAX_FACTOR
            fac = min(1.0 / MIN_FACTOR, max(1.0 / MAX_FACTOR, fac))
            h_next = h / fac
            err_prev = max(err, 1e-4)
            t, y, f = t_new, y_new, k[N_STAGES].copy()
            ts.append(t)
            ys.append(y.copy())
            sol.n_accepted += 1
            guard_hit = False
            h = h_next
        else:
            sol.n_rejected += 1
            fac = min(1.0 / MIN_FACTOR, err**PI_ALPHA / SAFETY)
            h = h / fac
    if sol.status == "running":
        sol.status = "finished"
    sol.t, sol.y = np.array(ts), np.array(ys)
    return sol


# -- many independent systems ----------------------------------------------------


@dataclass
class BatchResult:
    """Per-lane outcome of :func:`solve_batch`.

    ``y`` has shape ``(len(t_eval), lanes, dim)``; rows for lanes that failed
    before reaching an output time are NaN.
    """

    t_eval: np.ndarray
    y: np.ndarray
    status: np.ndarray  # 0 finished, 1 guard, 2 underflow
    fail_time: np.ndarray
    n_accepted: np.ndarray
    n_rejected: np.ndarray

    @property
    def lost(self):
        return self.status != 0


def _weighted(w, k):
    """``sum_j w[j] k[j]`` accumulated elementwise in a fixed order.

    Unlike ``tensordot`` the rounding of each lane does not depend on how many
    lanes are in the batch.
    """
    out = None
    for j, wj in enumerate(w):
        if wj == 0.0:
            continue
        out = wj * k[j] if out is None else out + wj * k[j]
    return np.zeros_like(k[0]) if out is None else out


def _row_sumsq(e):
    out = e[:, 0] * e[:, 0]
    for j in range(1, e.shape[1]):
        out = out + e[:, j] * e[:, j]
    return out


def _batch_trial(rhs, guard, ki, f0, ti, yi, hi, dim, atol, rtol):
    """One trial step for every active lane; returns states, times, guard mask and error norms."""
    ki[0] = f0
    ok = np.ones(ti.size, dtype=bool)
    hcol = hi[:, None]
    for s in range(1, N_STAGES):
        ys = yi + hcol * _weighted(A[s, :s], ki)
        ts = ti + C[s] * hi
        if guard is not None:
            ok &= np.asarray(guard(ts, ys), dtype=bool)
        ki[s] = rhs(ts, ys)
    y_new = yi + hcol * _weighted(B, ki)
    t_new = ti + hi
    if guard is not None:
        ok &= np.asarray(guard(t_new, y_new), dtype=bool)
    ki[N_STAGES] = rhs(t_new, y_new)
    ok &= np.all(np.isfinite(ki[N_STAGES]), axis=1) & np.all(np.isfinite(ki[:N_STAGES]), axis=(0, 2))
    scale = atol + rtol * np.maximum(np.abs(yi), np.abs(y_new))
    e5 = _weighted(E5, ki) / scale
    e3 = _weighted(E3, ki) / scale
    n5 = _row_sumsq(e5)
    n3 = _row_sumsq(e3)
    err = np.where((n5 == 0) & (n3 == 0), 0.0, np.abs(hi) * n5 / np.sqrt((n5 + 0.01 * n3) * dim))
    err = np.where(ok, err, np.inf)
    return y_new, t_new, ok, err


def solve_batch(rhs, t0, y0, t_eval, rtol=1e-9, atol=1e-12, guard=None, max_iterations=2_000_000) -> BatchResult:
    """Integrate ``lanes`` independent copies of one ODE family in lock-step iterations.

    ``rhs(t, Y)`` receives per-lane times ``t`` (shape ``(L,)``) and states
    ``Y`` (shape ``(L, dim)``); ``guard(t, Y)`` returns a boolean mask. Each lane
    keeps its own step size and error control, and lands exactly on every
    output time in ``t_eval`` (which must be increasing and ``>= t0``).
    """
    y0 = np.asarray(y0, dtype=float)
    if y0.ndim != 2:
        raise ValueError("y0 must have shape (lanes, dim)")
    t_eval = np.asarray(t_eval, dtype=float)
    if t_eval.ndim != 1 or np.any(np.diff(t_eval) <= 0) or t_eval[0] < t0:
        raise ValueError("t_eval must be increasing and start at or after t0")
    lanes, dim = y0.shape
    out = np.full((t_eval.size, lanes, dim), np.nan)
    status = np.zeros(lanes, dtype=int)
    fail_time = np.full(lanes, np.nan)
    n_acc = np.zeros(lanes, dtype=int)
    n_rej = np.zeros(lanes, dtype=int)

    t = np.full(lanes, float(t0))
    y = y0.copy()
    target = np.zeros(lanes, dtype=int)
    hit0 = t_eval[0] == t0
    if hit0:
        out[0] = y
        target[:] = 1
    active = target < t_eval.size
    f = np.asarray(rhs(t, y), dtype=float)
    h = np.full(lanes, np.nan)
    for i in np.flatnonzero(active):
        span = t_eval[-1] - t0
        h[i] = _initial_step(lambda tt, yy: rhs(np.array([tt]), yy[None])[0], t0, y[i], f[i], rtol, atol, span)
    err_prev = np.full(lanes, 1e-4)
    guard_hit = np.zeros(lanes, dtype=bool)
    k = np.empty((N_STAGES + 1, lanes, dim))

    for _ in range(max_iterations):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        ti, yi = t[idx], y[idx]
        stop = t_eval[target[idx]]
        hi = np.minimum(h[idx], stop - ti)
        under = (ti + hi == ti) | (hi < 4 * np.spacing(np.maximum(np.abs(ti), 1e-300)))
        if np.any(under):
            bad = idx[under]
            status[bad] = np.where(guard_hit[bad], 1, 2)
            fail_time[bad] = t[bad]
            active[bad] = False
            keep = ~under
            idx, ti, yi, stop, hi = idx[keep], ti[keep], yi[keep], stop[keep], hi[keep]
            if idx.size == 0:
                continue
        with np.errstate(all="ignore"):
            y_new, t_new, ok, err = _batch_trial(rhs, guard, k[:, : idx.size], f[idx], ti, yi, hi, dim, atol, rtol)
        ki = k[:, : idx.size]
        accept = ok & (err <= 1.0)

        # rejected lanes
        rej = ~accept
        if np.any(rej):
            r_idx = idx[rej]
            n_rej[r_idx] += 1
            guard_hit[r_idx] = ~ok[rej]
            with np.errstate(divide="ignore", over="ignore"):
                fac = np.where(ok[rej], np.minimum(1.0 / MIN_FACTOR, err[rej] ** PI_ALPHA / SAFETY), 1.0 / REJECT_FACTOR)
            h[r_idx] = hi[rej] / fac

        if np.any(accept):
            a_idx = idx[accept]
            ea = err[accept]
            with np.errstate(divide="ignore"):
                fac = np.where(ea > 0, ea**PI_ALPHA / err_prev[a_idx] ** PI_BETA / SAFETY, 1.0 / MAX_FACTOR)
            fac = np.clip(fac, 1.0 / MAX_FACTOR, 1.0 / MIN_FACTOR)
            landed = t_new[accept] >= stop[accept] - 4 * np.spacing(stop[accept])
            # a step shortened to land on an output time keeps the earlier proposal
            clipped = landed & (hi[accept] < h[a_idx])
            h[a_idx] = np.where(clipped, h[a_idx], hi[accept] / fac)
            err_prev[a_idx] = np.maximum(ea, 1e-4)
            t[a_idx] = np.where(landed, stop[accept], t_new[accept])
            y[a_idx] = y_new[accept]
            f[a_idx] = ki[N_STAGES, accept]
            n_acc[a_idx] += 1
            guard_hit[a_idx] = False
            for j, lane in zip(np.flatnonzero(landed), a_idx[landed]):
                out[target[lane], lane] = y_new[accept][j]
                target[lane] += 1
                if target[lane] >= t_eval.size:
                    active[lane] = False
    else:
        raise RuntimeError("solve_batch exceeded max_iterations")
    return BatchResult(t_eval=t_eval, y=out, status=status, fail_time=fail_time, n_accepted=n_acc, n_rejected=n_rej)


def check_tableau(max_order=5, atol=1e-12):
    """Raise if the propagating weights violate an order condition up to ``max_order``."""
    res = order_condition_residuals(max_order)
    worst = float(np.max(np.abs(res)))
    if worst > atol:
        raise AssertionError(f"order conditions violated: max residual {worst:.3g}")
    return worst


__all__ = [
    "OdeProblem",
    "OdeSolution",
    "StepRecord",
    "BatchResult",
    "solve",
    "solve_batch",
    "order_condition_residuals",
    "dense_weights",
    "rooted_trees",
    "check_tableau",
]
