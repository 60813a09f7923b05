"""Hot kernels: forward jets through the MLP and their reverse pass.

A "jet" here is the network output together with first derivatives along a
few input columns and, optionally, the second derivative along the first of
those columns.  The reverse pass differentiates every jet component with
respect to the flat parameter vector, which is what the constrained loss
needs during training.

Two interchangeable backends are provided.  Both push the value, tangent and
curvature channels through each layer with matrix products; the numba one
stacks the channels into a single product per layer and fuses the
activation-derivative bookkeeping into one compiled loop, the numpy one
builds the same quantities from array temporaries.  Set
``PINNFATIGUE_NUMBA=0`` to force the numpy path (numba is also skipped when
it is not importable).

Parameter layout: for each layer, the row-major weight matrix
``(dims[l+1], dims[l])`` followed by its bias vector.

Activation ids: 0 = SELU, 1 = identity (test hook for linear collapse).
"""

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("PINNFATIGUE_NUMBA", "1").strip().lower() not in (
    "0",
    "false",
    "no",
    "off",
)

SELU = 0
IDENTITY = 1


def layer_offsets(dims):
    """Start offsets of each layer's (W, b) block in the flat vector, plus total size."""
    dims = np.asarray(dims, dtype=np.int64)
    offs = np.zeros(len(dims), dtype=np.int64)
    for l in range(len(dims) - 1):
        offs[l + 1] = offs[l] + dims[l + 1] * dims[l] + dims[l + 1]
    return offs


def unit_offsets(dims):
    dims = np.asarray(dims, dtype=np.int64)
    uo = np.zeros(len(dims), dtype=np.int64)
    for l in range(1, len(dims)):
        uo[l] = uo[l - 1] + dims[l]
    # uo[l] .. uo[l] + dims[l+1] holds the pre-activations of layer l+1
    return uo


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------


def act_derivs_np(z, act, lam, alpha):
    """Return (sigma, sigma', sigma'', sigma''') evaluated at z."""
    if act == IDENTITY:
        one = np.ones_like(z)
        zero = np.zeros_like(z)
        return z.copy(), one, zero, zero
    pos = z > 0.0
    e = np.exp(np.minimum(z, 0.0))
    la = lam * alpha
    s0 = np.where(pos, lam * z, la * (e - 1.0))
    s1 = np.where(pos, lam, la * e)
    s2 = np.where(pos, 0.0, la * e)
    return s0, s1, s2, s2.copy()


def _unpack(theta, dims, l, offs):
    n_out, n_in = dims[l + 1], dims[l]
    o = offs[l]
    W = theta[o : o + n_out * n_in].reshape(n_out, n_in)
    b = theta[o + n_out * n_in : o + n_out * n_in + n_out]
    return W, b


def forward_jet_numpy(theta, dims, X, cols, second, act, lam, alpha):
    """Batched jet forward pass.

    Returns ``(out, Z, Zt, Zs)`` where ``out`` has columns
    ``[y, dy/dx_cols[0], ..., dy/dx_cols[K-1], (d2y/dx_cols[0]^2)]``.
    """
    dims = np.asarray(dims, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    K = len(cols)
    L = len(dims) - 1
    offs = layer_offsets(dims)
    uo = unit_offsets(dims)
    U = int(uo[-1])
    Z = np.empty((n, U))
    Zt = np.empty((K, n, U))
    Zs = np.empty((n, U)) if second else np.empty((n, 0))

    a = X
    at = np.zeros((K, n, dims[0]))
    for k in range(K):
        at[k, :, cols[k]] = 1.0
    as_ = np.zeros((n, dims[0]))
    for l in range(L):
        W, b = _unpack(theta, dims, l, offs)
        sl = slice(uo[l], uo[l] + dims[l + 1])
        z = a @ W.T + b
        zt = at @ W.T
        Z[:, sl] = z
        Zt[:, :, sl] = zt
        if second:
            zs = as_ @ W.T
            Zs[:, sl] = zs
        if l < L - 1:
            s0, s1, s2, _ = act_derivs_np(z, act, lam, alpha)
            a = s0
            if second:
                as_ = s2 * zt[0] ** 2 + s1 * zs
            at = s1[None, :, :] * zt
        else:
            a, at = z, zt
            if second:
                as_ = zs

    out = np.empty((n, 1 + K + (1 if second else 0)))
    out[:, 0] = a[:, 0]
    for k in range(K):
        out[:, 1 + k] = at[k, :, 0]
    if second:
        out[:, 1 + K] = as_[:, 0]
    return out, Z, Zt, Zs


def backward_jet_numpy(theta, dims, X, cols, second, act, lam, alpha, Z, Zt, Zs, adj):
    """Gradient of ``sum(adj * out)`` with respect to the flat parameters."""
    dims = np.asarray(dims, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    n = X.shape[0]
    K = len(cols)
    L = len(dims) - 1
    offs = layer_offsets(dims)
    uo = unit_offsets(dims)
    grad = np.zeros(int(offs[-1]))

    gz = adj[:, 0:1].copy()
    gzt = np.empty((K, n, 1))
    for k in range(K):
        gzt[k, :, 0] = adj[:, 1 + k]
    gzs = adj[:, 1 + K : 2 + K].copy() if second else None

    for l in range(L - 1, -1, -1):
        W, _ = _unpack(theta, dims, l, offs)
        n_out, n_in = dims[l + 1], dims[l]
        o = offs[l]
        if l > 0:
            sl = slice(uo[l - 1], uo[l - 1] + n_in)
            zp = Z[:, sl]
            s0, s1, s2, s3 = act_derivs_np(zp, act, lam, alpha)
            ztp = Zt[:, :, sl]
            a = s0
            at = s1[None, :, :] * ztp
            if second:
                zsp = Zs[:, sl]
                as_ = s2 * ztp[0] ** 2 + s1 * zsp
        else:
            a = X
        gW = gz.T @ a
        if l > 0:
            for k in range(K):
                gW += gzt[k].T @ at[k]
            if second:
                gW += gzs.T @ as_
        else:
            for k in range(K):
                gW[:, cols[k]] += gzt[k].sum(axis=0)
        grad[o : o + n_out * n_in] = gW.ravel()
        grad[o + n_out * n_in : o + n_out * n_in + n_out] = gz.sum(axis=0)
        if l == 0:
            break
        ga = gz @ W
        gat = gzt @ W
        if second:
            gas = gzs @ W
        mix = (gat * ztp).sum(axis=0)
        if second:
            mix = mix + gas * zsp
        gz = ga * s1 + mix * s2
        gzt = gat * s1[None, :, :]
        if second:
            gz = gz + gas * ztp[0] ** 2 * s3
            gzt[0] = gzt[0] + 2.0 * gas * s2 * ztp[0]
            gzs = gas * s1
    return grad


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _act4(z, act, lam, alpha):
        if act == 1:
            return z, 1.0, 0.0, 0.0
        if z > 0.0:
            return lam * z, lam, 0.0, 0.0
        e = np.exp(z)
        la = lam * alpha
        return la * (e - 1.0), la * e, la * e, la * e

    @njit(cache=True)
    def _forward_jet_nb(theta, dims, X, cols, second, act, lam, alpha):
        # channels stacked row-wise: [value | tangent_0..K-1 | curvature] x n samples
        n = X.shape[0]
        K = cols.shape[0]
        C = 1 + K + (1 if second else 0)
        L = dims.shape[0] - 1
        offs = np.zeros(L + 1, dtype=np.int64)
        uo = np.zeros(L + 1, dtype=np.int64)
        for l in range(L):
            offs[l + 1] = offs[l] + dims[l + 1] * dims[l] + dims[l + 1]
            uo[l + 1] = uo[l] + dims[l + 1]
        P = np.empty((C, n, uo[L]))
        H = np.zeros((C * n, dims[0]))
        H[:n] = X
        for k in range(K):
            for i in range(n):
                H[(1 + k) * n + i, cols[k]] = 1.0
        for l in range(L):
            n_in = dims[l]
            n_out = dims[l + 1]
            o = offs[l]
            WT = np.ascontiguousarray(theta[o : o + n_out * n_in].reshape((n_out, n_in)).T)
            b = theta[o + n_out * n_in : o + n_out * n_in + n_out]
            S = np.dot(H, WT)
            for i in range(n):
                for j in range(n_out):
                    S[i, j] += b[j]
            for c in range(C):
                for i in range(n):
                    for j in range(n_out):
                        P[c, i, uo[l] + j] = S[c * n + i, j]
            if l == L - 1:
                H = S
                break
            Hn = np.empty((C * n, n_out))
            for i in range(n):
                for j in range(n_out):
                    s0, s1, s2, s3 = _act4(S[i, j], act, lam, alpha)
                    Hn[i, j] = s0
                    for k in range(K):
                        Hn[(1 + k) * n + i, j] = s1 * S[(1 + k) * n + i, j]
                    if second:
                        zt0 = S[n + i, j]
                        Hn[(1 + K) * n + i, j] = s2 * zt0 * zt0 + s1 * S[(1 + K) * n + i, j]
            H = Hn
        out = np.empty((n, C))
        for c in range(C):
            for i in range(n):
                out[i, c] = H[c * n + i, 0]
        return out, P

    @njit(cache=True)
    def _backward_jet_nb(theta, dims, X, cols, second, act, lam, alpha, P, adj):
        n = X.shape[0]
        K = cols.shape[0]
        C = 1 + K + (1 if second else 0)
        L = dims.shape[0] - 1
        offs = np.zeros(L + 1, dtype=np.int64)
        uo = np.zeros(L + 1, dtype=np.int64)
        for l in range(L):
            offs[l + 1] = offs[l] + dims[l + 1] * dims[l] + dims[l + 1]
            uo[l + 1] = uo[l] + dims[l + 1]
        grad = np.zeros(offs[L])
        G = np.empty((C * n, 1))
        for c in range(C):
            for i in range(n):
                G[c * n + i, 0] = adj[i, c]
        for l in range(L - 1, -1, -1):
            n_in = dims[l]
            n_out = dims[l + 1]
            o = offs[l]
            # rebuild the stacked input of layer l
            Hin = np.zeros((C * n, n_in))
            s1v = np.empty((n, n_in))
            s2v = np.empty((n, n_in))
            s3v = np.empty((n, n_in))
            if l > 0:
                base = uo[l - 1]
                for i in range(n):
                    for m in range(n_in):
                        s0, s1, s2, s3 = _act4(P[0, i, base + m], act, lam, alpha)
                        s1v[i, m] = s1
                        s2v[i, m] = s2
                        s3v[i, m] = s3
                        Hin[i, m] = s0
                        for k in range(K):
                            Hin[(1 + k) * n + i, m] = s1 * P[1 + k, i, base + m]
                        if second:
                            zt0 = P[1, i, base + m]
                            Hin[(1 + K) * n + i, m] = s2 * zt0 * zt0 + s1 * P[1 + K, i, base + m]
            else:
                Hin[:n] = X
                for k in range(K):
                    for i in range(n):
                        Hin[(1 + k) * n + i, cols[k]] = 1.0
            gW = np.dot(np.ascontiguousarray(G.T), Hin)
            for j in range(n_out):
                for m in range(n_in):
                    grad[o + j * n_in + m] = gW[j, m]
                acc = 0.0
                for i in range(n):
                    acc += G[i, j]
                grad[o + n_out * n_in + j] = acc
            if l == 0:
                break
            W = np.ascontiguousarray(theta[o : o + n_out * n_in].reshape((n_out, n_in)))
            GH = np.dot(G, W)
            Gn = np.empty((C * n, n_in))
            base = uo[l - 1]
            for i in range(n):
                for m in range(n_in):
                    s1 = s1v[i, m]
                    s2 = s2v[i, m]
                    mix = 0.0
                    for k in range(K):
                        gat = GH[(1 + k) * n + i, m]
                        mix += gat * P[1 + k, i, base + m]
                        Gn[(1 + k) * n + i, m] = gat * s1
                    g = GH[i, m] * s1
                    if second:
                        gas = GH[(1 + K) * n + i, m]
                        zt0 = P[1, i, base + m]
                        mix += gas * P[1 + K, i, base + m]
                        g += gas * zt0 * zt0 * s3v[i, m]
                        Gn[n + i, m] += 2.0 * gas * s2 * zt0
                        Gn[(1 + K) * n + i, m] = gas * s1
                    Gn[i, m] = g + mix * s2
            G = Gn
        return grad

    def forward_jet_numba(theta, dims, X, cols, second, act, lam, alpha):
        K = len(cols)
        out, P = _forward_jet_nb(
            np.ascontiguousarray(theta, dtype=np.float64),
            np.ascontiguousarray(dims, dtype=np.int64),
            np.ascontiguousarray(X, dtype=np.float64),
            np.ascontiguousarray(cols, dtype=np.int64),
            bool(second),
            int(act),
            float(lam),
            float(alpha),
        )
        Zs = P[1 + K] if second else np.empty((P.shape[1], 0))
        return out, P[0], P[1 : 1 + K], Zs

    def backward_jet_numba(theta, dims, X, cols, second, act, lam, alpha, Z, Zt, Zs, adj):
        parts = [Z[None], Zt] + ([Zs[None]] if second else [])
        P = np.concatenate(parts, axis=0)
        return _backward_jet_nb(
            np.ascontiguousarray(theta, dtype=np.float64),
            np.ascontiguousarray(dims, dtype=np.int64),
            np.ascontiguousarray(X, dtype=np.float64),
            np.ascontiguousarray(cols, dtype=np.int64),
            bool(second),
            int(act),
            float(lam),
            float(alpha),
            P,
            np.ascontiguousarray(adj, dtype=np.float64),
        )


if USE_NUMBA:
    forward_jet = forward_jet_numba
    backward_jet = backward_jet_numba
else:
    forward_jet = forward_jet_numpy
    backward_jet = backward_jet_numpy


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
