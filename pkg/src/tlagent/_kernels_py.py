"""Pure-Python/numpy implementations of the hot loops.

Same signatures and results as the compiled ``_kernels`` extension; selected
by ``tlagent.kernels`` when the extension is missing or disabled.

Arguments shared by all kernels: ``delta`` is the int32 transition table
(states x letters), ``accepting`` and ``live`` are uint8 state masks,
``start`` is the initial state, ``letters`` an int32 letter per frame and
``probs`` a float64 (frames x letters) table of letter probabilities.
"""

import numpy as np


def forward(delta, start, probs):
    """Propagate a point mass at ``start`` through every frame.

    Returns the final state distribution and the total mass after each frame.
    """
    delta = np.asarray(delta)
    n_states = delta.shape[0]
    flat = delta.ravel()
    dist = np.zeros(n_states)
    dist[start] = 1.0
    masses = np.empty(len(probs))
    for t, p in enumerate(probs):
        dist = np.bincount(flat, weights=np.outer(dist, p).ravel(), minlength=n_states)
        masses[t] = dist.sum()
    return dist, masses


def _accepts_from(delta, accepting, live, state, letters, lo, hi):
    for k in range(lo, hi + 1):
        if not live[state]:
            return False
        state = delta[state, letters[k]]
    return bool(accepting[state])


def boolean_spans(delta, accepting, live, start, letters, max_window):
    """Relevant minimal spans of a boolean letter sequence.

    For every start frame ``i`` the run from ``start`` is advanced until it
    first accepts at ``j`` (within ``max_window`` frames).  The span ``[i, j]``
    is kept only if frame ``i`` matters: some other letter at ``i`` would make
    the same window reject.
    """
    delta = np.asarray(delta)
    accepting = np.asarray(accepting)
    live = np.asarray(live)
    letters = np.asarray(letters)
    T = len(letters)
    alternatives = sorted(set(delta[start].tolist()))
    starts, ends = [], []
    for i in range(T):
        q = start
        last = min(i + max_window, T) - 1
        for j in range(i, last + 1):
            q = delta[q, letters[j]]
            if accepting[q]:
                actual = delta[start, letters[i]]
                for s in alternatives:
                    if s != actual and not _accepts_from(delta, accepting, live, s, letters,
                                                         i + 1, j):
                        starts.append(i)
                        ends.append(j)
                        break
                break
            if not live[q]:
                break
    return np.array(starts, dtype=np.int64), np.array(ends, dtype=np.int64)


def _step(flat, n_states, dist, p):
    return np.bincount(flat, weights=np.outer(dist, p).ravel(), minlength=n_states)


def prob_spans(delta, accepting, live, start, probs, max_window, rho):
    """Probabilistic counterpart of ``boolean_spans``.

    A window ``[i, j]`` qualifies when its acceptance probability reaches
    ``rho``; frame ``i`` is relevant when fixing it to some letter drops the
    probability below ``rho``.  Returns starts, ends and span probabilities.
    """
    delta = np.asarray(delta)
    accepting = np.asarray(accepting, dtype=bool)
    live = np.asarray(live, dtype=bool)
    probs = np.asarray(probs)
    n_states = delta.shape[0]
    flat = delta.ravel()
    T = len(probs)
    alternatives = sorted(set(delta[start].tolist()))
    starts, ends, values = [], [], []
    for i in range(T):
        dist = np.zeros(n_states)
        dist[start] = 1.0
        last = min(i + max_window, T) - 1
        for j in range(i, last + 1):
            dist = _step(flat, n_states, dist, probs[j])
            acc = dist[accepting].sum()
            if acc >= rho:
                for s in alternatives:
                    alt = np.zeros(n_states)
                    alt[s] = 1.0
                    for k in range(i + 1, j + 1):
                        alt = _step(flat, n_states, alt, probs[k])
                    if alt[accepting].sum() < rho:
                        starts.append(i)
                        ends.append(j)
                        values.append(acc)
                        break
                break
            if dist[live].sum() < rho - 1e-12:
                break
    return (np.array(starts, dtype=np.int64), np.array(ends, dtype=np.int64),
            np.array(values, dtype=np.float64))
